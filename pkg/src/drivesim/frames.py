"""Planar-vector vocabulary: Clarke transform, rotations, instantaneous
power and circular/scalar saturation.

All three-phase quantities live in the power-invariant alpha-beta frame as
plain ``float64`` arrays of shape (2,).  With this scaling the norm of a
balanced voltage vector equals the line-to-line RMS voltage, and
``P = v @ i`` holds without extra factors.  ``J`` denotes the quarter-turn
rotation; complex impedances act on planar vectors as ``r*I + x*J``.

Everything here is a pure function, safe to call from any thread and from
inside the numba kernels.
"""

import math

import numpy as np

from ._accel import njit

_SQRT23 = math.sqrt(2.0 / 3.0)
_SQRT12 = math.sqrt(0.5)
_HALF_SQRT3 = 0.5 * math.sqrt(3.0)

# Power-invariant Clarke matrix, orthonormal: T^-1 == T.T
CLARKE_MATRIX = _SQRT23 * np.array(
    [
        [1.0, -0.5, -0.5],
        [0.0, _HALF_SQRT3, -_HALF_SQRT3],
        [_SQRT12, _SQRT12, _SQRT12],
    ]
)

#: Modulation-magnitude ceiling in alpha-beta coordinates.  Third-harmonic
#: injection is not simulated as a waveform; its only effect is this bound.
MOD_LIMIT = 1.0 / math.sqrt(2.0)


@njit
def clarke(x_abc):
    """Power-invariant Clarke transform.

    Returns the alpha-beta pair as a (2,) array plus the zero-sequence
    component separately (consumers normally discard it).
    """
    a = x_abc[0]
    b = x_abc[1]
    c = x_abc[2]
    out = np.empty(2)
    out[0] = _SQRT23 * (a - 0.5 * b - 0.5 * c)
    out[1] = _SQRT23 * _HALF_SQRT3 * (b - c)
    gamma = _SQRT23 * _SQRT12 * (a + b + c)
    return out, gamma


@njit
def clarke_inverse(v, gamma):
    """Inverse Clarke (transpose of the orthonormal matrix)."""
    out = np.empty(3)
    out[0] = _SQRT23 * (v[0] + _SQRT12 * gamma)
    out[1] = _SQRT23 * (-0.5 * v[0] + _HALF_SQRT3 * v[1] + _SQRT12 * gamma)
    out[2] = _SQRT23 * (-0.5 * v[0] - _HALF_SQRT3 * v[1] + _SQRT12 * gamma)
    return out


@njit
def rotate(theta, v):
    """Apply the rotation matrix R(theta) to a planar vector."""
    c = math.cos(theta)
    s = math.sin(theta)
    out = np.empty(2)
    out[0] = c * v[0] - s * v[1]
    out[1] = s * v[0] + c * v[1]
    return out


@njit
def jrot(v):
    """Quarter-turn J @ v, with J = R(pi/2)."""
    out = np.empty(2)
    out[0] = -v[1]
    out[1] = v[0]
    return out


@njit
def instantaneous_power(v, i):
    """Instantaneous active/reactive power (P, Q) of a voltage/current pair.

    P = v @ i and Q = v @ (J i); both are invariant under a common rotation
    of the two arguments, so the same expressions serve alpha-beta and dq.
    """
    p = v[0] * i[0] + v[1] * i[1]
    q = v[0] * (-i[1]) + v[1] * i[0]
    return p, q


@njit
def impedance_apply(r, x, v):
    """(r*I + x*J) @ v — complex impedance acting on a planar vector."""
    out = np.empty(2)
    out[0] = r * v[0] - x * v[1]
    out[1] = x * v[0] + r * v[1]
    return out


@njit
def impedance_solve(r, x, v):
    """(r*I + x*J)^-1 @ v.  Requires r*r + x*x > 0."""
    d = r * r + x * x
    out = np.empty(2)
    out[0] = (r * v[0] + x * v[1]) / d
    out[1] = (-x * v[0] + r * v[1]) / d
    return out


@njit
def circular_sat(v, radius):
    """Clamp a planar vector to the disc of the given radius.

    Direction is preserved; the output norm never exceeds ``radius`` and
    the operation is idempotent.
    """
    n = math.hypot(v[0], v[1])
    out = np.empty(2)
    if n <= radius or n == 0.0:
        out[0] = v[0]
        out[1] = v[1]
    else:
        scale = radius / n
        out[0] = v[0] * scale
        out[1] = v[1] * scale
    return out


@njit
def scalar_sat(u, lim):
    """Clamp to [-lim, +lim]; returns (value, saturated flag).

    The flag feeds anti-windup logic in the PI controllers.
    """
    if u > lim:
        return lim, True
    if u < -lim:
        return -lim, True
    return u, False


class ComplexImpedance:
    """Resistance/reactance pair acting on planar vectors as r*I + x*J.

    ``x`` is the reactance at the nominal grid frequency (omega0 * L for an
    inductive branch).
    """

    __slots__ = ("r", "x")

    def __init__(self, r, x):
        self.r = float(r)
        self.x = float(x)

    @classmethod
    def from_rl(cls, r, l, omega0):
        return cls(r, omega0 * l)

    def apply(self, v):
        return impedance_apply(self.r, self.x, np.asarray(v, dtype=float))

    def solve(self, v):
        if self.r * self.r + self.x * self.x == 0.0:
            raise ZeroDivisionError("impedance is singular (r = x = 0)")
        return impedance_solve(self.r, self.x, np.asarray(v, dtype=float))

    def __add__(self, other):
        return ComplexImpedance(self.r + other.r, self.x + other.x)

    def norm(self):
        return math.hypot(self.r, self.x)

    def __repr__(self):
        return f"ComplexImpedance(r={self.r!r}, x={self.x!r})"


def planar(x, y):
    """Convenience constructor for a (2,) float64 planar vector."""
    return np.array([float(x), float(y)])
