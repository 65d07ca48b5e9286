"""Gradient-descent PLL on the ray-circle decomposition.

The PLL output vector is parameterized by log-magnitude gamma and angle
theta, v = exp(gamma) * R(theta) @ g1, and both coordinates descend the
tracking energy U = 0.5*||v - v_g||^2.  The production implementation is
cartesian: the descent law turns into a linear system
dv/dt = [[nu, -w], [w, nu]] @ v which is advanced one step by the implicit
midpoint rule with (nu, w) frozen over the step.  The midpoint update has
a closed form (a Cayley factor) and preserves ||v|| exactly when nu = 0.

The gain is the orthonormalizing form K = kappa * exp(-2*gamma)
= kappa / ||v||^2, which makes the convergence rate amplitude-independent.
A magnitude floor keeps gamma from running off to -inf when the measured
voltage collapses during bolted faults (in continuous time that takes
forever, at a fixed step it reaches denormals within seconds).
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit

__all__ = ["PllState", "pll_gradient", "pll_energy",
           "pll_step_cartesian", "pll_step_polar", "wrap_angle"]

#: Stability bound for the frozen-coefficient step: kappa * dt must stay
#: well below 2; the discrete descent property is exercised at <= 0.5.
MAX_KAPPA_DT = 0.5


@njit
def pll_gradient_kernel(vx, vy, vgx, vgy):
    ex = vx - vgx
    ey = vy - vgy
    g_gamma = vx * ex + vy * ey
    g_theta = -vy * ex + vx * ey    # (J v) . (v - v_g)
    return g_gamma, g_theta


def pll_gradient(v_pll, v_g):
    """Gradients of U with respect to (gamma, theta) at the given output.

    g_gamma = v . (v - v_g), g_theta = (J v) . (v - v_g); both vanish at
    lock and match finite differences of U(gamma, theta).
    """
    return pll_gradient_kernel(v_pll[0], v_pll[1], v_g[0], v_g[1])


def pll_energy(v_pll, v_g):
    """Tracking energy U = 0.5 * ||v_pll - v_g||^2."""
    e = np.asarray(v_pll, dtype=float) - np.asarray(v_g, dtype=float)
    return 0.5 * float(e @ e)


@njit
def pll_step_kernel(vx, vy, vgx, vgy, kappa, omega_ff, dt, v_floor):
    """One frozen-coefficient midpoint step; returns (vx', vy', omega, nu)."""
    n2 = vx * vx + vy * vy
    k = kappa / n2
    g_gamma, g_theta = pll_gradient_kernel(vx, vy, vgx, vgy)
    nu = -k * g_gamma
    om = omega_ff - k * g_theta
    if n2 <= v_floor * v_floor and nu < 0.0:
        nu = 0.0    # magnitude floor: stop shrinking toward zero
    a = 0.5 * dt * nu
    b = 0.5 * dt * om
    # midpoint closed form: v+ = ((1 + a + ib) / (1 - a - ib)) v
    den = (1.0 - a) * (1.0 - a) + b * b
    fr = (1.0 - a * a - b * b) / den
    fi = 2.0 * b / den
    nvx = fr * vx - fi * vy
    nvy = fi * vx + fr * vy
    return nvx, nvy, om, nu


@dataclass
class PllState:
    """Cartesian PLL state plus the last computed frequency and the
    accumulated (unwrapped) angle."""

    v_pll: np.ndarray
    omega_pll: float
    theta_pll: float

    @classmethod
    def from_measurement(cls, v_g, omega0, vg_nom, v_eps_frac=0.01):
        """Initialize on the first voltage sample; falls back to the
        nominal phasor when the sample is degenerate."""
        v = np.asarray(v_g, dtype=float)
        if math.hypot(v[0], v[1]) > v_eps_frac * vg_nom:
            v0 = v.copy()
        else:
            v0 = np.array([vg_nom, 0.0])
        theta0 = math.atan2(v0[1], v0[0])
        return cls(v_pll=v0, omega_pll=omega0, theta_pll=theta0)


def pll_step_cartesian(state, v_g, kappa, omega_ff, dt, v_floor=0.0):
    """Advance the cartesian PLL one step of ``dt`` seconds.

    ``omega_ff`` is the frequency feed-forward: the nominal grid frequency
    normally, or eta*v_dc when the bidirectional DC coupling is enabled.
    Returns a new PllState; theta advances by omega*dt.
    """
    vx, vy, om, _ = pll_step_kernel(
        state.v_pll[0], state.v_pll[1], v_g[0], v_g[1],
        kappa, omega_ff, dt, v_floor)
    return PllState(v_pll=np.array([vx, vy]), omega_pll=om,
                    theta_pll=state.theta_pll + om * dt)


@njit
def pll_step_polar_kernel(gamma, theta, vgx, vgy, kappa, omega_ff, dt):
    eg = math.exp(gamma)
    vx = eg * math.cos(theta)
    vy = eg * math.sin(theta)
    k = kappa * math.exp(-2.0 * gamma)
    g_gamma, g_theta = pll_gradient_kernel(vx, vy, vgx, vgy)
    return gamma - dt * k * g_gamma, theta + dt * (omega_ff - k * g_theta)


def pll_step_polar(gamma, theta, v_g, kappa, omega_ff, dt):
    """Explicit-Euler step of the polar (gamma, theta) form; cross-check
    implementation for the cartesian path."""
    return pll_step_polar_kernel(gamma, theta, v_g[0], v_g[1],
                                 kappa, omega_ff, dt)


def wrap_angle(theta):
    """Wrap to (-pi, pi] for reporting; internal angles stay unwrapped."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi
