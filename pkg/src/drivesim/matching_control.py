"""Synchronous-machine matching grid-side controller.

The modulation vector is generated directly from a log-magnitude/angle
pair (gamma_r, theta).  The angle advances at the matching frequency
eta * v_dc — this is what makes the converter behave like a machine whose
rotor speed is the DC-link voltage — plus a gradient correction that
tracks a current set-point through the steady-state map

    i_hat = -Z^-1 ((omega0/eta) * exp(gamma_r) * R(theta) @ g1 - v_g),

with Z the converter impedance augmented by the virtual impedance.  The
measured current replaces i_hat inside the gradient (online feedback
optimization), so the controller needs no phase-locked loop: it consumes
only i_g, v_dc, the shaft speed, and the voltage already used to build
the current set-point.

Bounding gamma_r by log(1/sqrt(2)) enforces the modulation limit by
construction.  The active-power demand is the mechanical power tau_m*w1;
the reactive demand and the current limiter are shared with the cascaded
stack.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .cascade_control import (
    CG_ETA, CG_GAMMA_MAX, CG_GAMMA_MIN, CG_ILIM, CG_INOM, CG_KF,
    CG_KF_ORTHO,
    CG_KIM, CG_KPM, CG_KPV, CG_LG, CG_NA1, CG_NA2, CG_NB0, CG_NB1, CG_NB2,
    CG_NOTCH_ON, CG_OMEGA0, CG_SMOOTH, CG_TAULIM, CG_VDCREF, CG_VDEAD,
    CG_VEPS, CG_VF_BW, CG_VGREF2, CG_WREF, CG_ZER, CG_ZEX, CG_ZGR, CG_ZGX,
    CS_GAMR, CS_ISX, CS_ISY, CS_NZ1, CS_NZ2, CS_SIZE, CS_SPEED_SAT,
    CS_THETA, CS_VFD, CS_VFQ, CS_XM,
    ac_voltage_kernel, current_reference_kernel, notch_kernel,
    pack_gains, pi_step_kernel,
)
from .frames import MOD_LIMIT, impedance_solve

__all__ = ["MatchingState", "steady_state_current", "matching_gradients",
           "matching_step", "matching_power_reference", "MatchingController"]

GAMMA_MAX = math.log(MOD_LIMIT)


@dataclass
class MatchingState:
    """Modulation coordinate: log magnitude (bounded above by
    log(1/sqrt(2))) and unwrapped angle."""

    gamma_r: float
    theta: float

    def __post_init__(self):
        if self.gamma_r > GAMMA_MAX + 1e-12:
            raise ValueError("gamma_r above the modulation bound")

    def modulation(self):
        eg = math.exp(self.gamma_r)
        return np.array([eg * math.cos(self.theta), eg * math.sin(self.theta)])


@njit
def steady_state_kernel(gamma_r, theta, vgx, vgy, zr, zx, eta, omega0):
    scale = (omega0 / eta) * math.exp(gamma_r)
    ex = vgx - scale * math.cos(theta)
    ey = vgy - scale * math.sin(theta)
    return impedance_solve(zr, zx, np.array([ex, ey]))


def steady_state_current(gamma_r, theta, v_g, z_eff, eta, omega0):
    """Steady grid current induced by the modulation coordinate:
    i_hat = -z_eff^-1 ((omega0/eta) e^gamma R(theta) g1 - v_g).

    ``z_eff`` is the converter impedance plus the virtual impedance.
    """
    if z_eff.r ** 2 + z_eff.x ** 2 == 0.0:
        raise ValueError("effective impedance is singular")
    return steady_state_kernel(gamma_r, theta, v_g[0], v_g[1],
                               z_eff.r, z_eff.x, eta, omega0)


@njit
def matching_gradient_kernel(gamma_r, theta, zr, zx, eta, omega0):
    """Row gradients of the steady-state map w.r.t. (gamma_r, theta),
    each returned as the planar vector it dots against."""
    scale = (omega0 / eta) * math.exp(gamma_r)
    u = np.empty(2)
    u[0] = scale * math.cos(theta)
    u[1] = scale * math.sin(theta)
    w = impedance_solve(zr, zx, u)
    d_gamma = np.empty(2)
    d_gamma[0] = -w[0]
    d_gamma[1] = -w[1]
    d_theta = np.empty(2)
    d_theta[0] = w[1]     # J @ d_gamma
    d_theta[1] = -w[0]
    return d_gamma, d_theta


def matching_gradients(gamma_r, theta, z_eff, eta, omega0):
    """Gradients of the steady-state map; d_theta = J @ d_gamma.

    Validated against central finite differences of
    steady_state_current in the test suite.
    """
    if z_eff.r ** 2 + z_eff.x ** 2 == 0.0:
        raise ValueError("effective impedance is singular")
    return matching_gradient_kernel(gamma_r, theta, z_eff.r, z_eff.x,
                                    eta, omega0)


@njit
def matching_update_kernel(gamma_r, theta, igx, igy, isx, isy, vdc,
                           kf, ortho, lg, zr, zx, zvr, zvx, vdc_ref,
                           eta, omega0, gamma_max, gamma_min, dt):
    """Forward-Euler update of (gamma_r, theta); returns the new pair plus
    the modulation vector and the synchronization energy.

    The virtual impedance is realized on current deviations in the
    modulation output, m = e^g R(theta) g1 + z_v @ (i_g - i*)/vdc_ref: the
    converter then presents z_g + z_v to disturbances (damping the weakly
    damped grid-circuit mode, without which the tracking loop is unstable
    at the design gain) while the steady modulation reduces to the EMF
    alone, which the gamma_r bound keeps inside the modulation limit.
    The gradients use z_g + z_v, which is exact for this realization
    since the i* offset drops out of the sensitivities.  The final output
    is circularly limited at 1/sqrt(2).
    """
    d_gamma, d_theta = matching_gradient_kernel(gamma_r, theta, zr, zx,
                                                eta, omega0)
    ex = igx - isx
    ey = igy - isy
    k = kf
    if ortho:
        k = kf * math.exp(-2.0 * gamma_r)
    # the tracking corrections are rate-bounded to a few percent of the
    # nominal frequency: near lock they are far smaller anyway, and the
    # bound keeps the tracking branch from holding a large slip against
    # the matching synchronization during deep faults
    lim = 0.05 * omega0
    dgam = -k * lg * (d_gamma[0] * ex + d_gamma[1] * ey)
    if dgam > lim:
        dgam = lim
    elif dgam < -lim:
        dgam = -lim
    dth = -k * lg * (d_theta[0] * ex + d_theta[1] * ey)
    if dth > lim:
        dth = lim
    elif dth < -lim:
        dth = -lim
    dth += eta * vdc
    g2 = gamma_r + dt * dgam
    if g2 > gamma_max:
        g2 = gamma_max
    elif g2 < gamma_min:
        g2 = gamma_min
    t2 = theta + dt * dth
    eg = math.exp(g2)
    mx = eg * math.cos(t2) + (zvr * ex - zvx * ey) / vdc_ref
    my = eg * math.sin(t2) + (zvx * ex + zvr * ey) / vdc_ref
    n = math.hypot(mx, my)
    if n > MOD_LIMIT:
        mx *= MOD_LIMIT / n
        my *= MOD_LIMIT / n
    sync = 0.5 * lg * (ex * ex + ey * ey)
    return g2, t2, mx, my, sync


def matching_step(st, i_g, i_star, v_dc, kf, lg, z_g, z_v, vdc_ref, eta,
                  omega0, dt, orthonormal_gain=False,
                  gamma_min=math.log(1e-3)):
    """One controller-rate step of the matching law.

    The measured current stands in for the steady-state current inside
    the gradient of the synchronization energy
    S = 0.5 * (i - i*)' Lg (i - i*).  gamma_r is clamped above by
    log(1/sqrt(2)), capping the EMF magnitude by construction; the
    virtual-impedance output term is added on top and the modulation is
    circularly limited at 1/sqrt(2).  Returns (m_g, new MatchingState).
    """
    z_eff = z_g + z_v
    g2, t2, mx, my, _ = matching_update_kernel(
        st.gamma_r, st.theta, i_g[0], i_g[1], i_star[0], i_star[1], v_dc,
        kf, orthonormal_gain, lg, z_eff.r, z_eff.x, z_v.r, z_v.x, vdc_ref,
        eta, omega0, GAMMA_MAX, gamma_min, dt)
    return np.array([mx, my]), MatchingState(g2, t2)


def matching_power_reference(tau_m, w1):
    """Active-power demand from the mechanical side: P* = tau_m * w1."""
    return tau_m * w1


@njit
def matching_step_kernel(cs, igx, igy, vgx, vgy, vdc, w1, g, dt):
    """One controller-rate step of the full matching stack.

    Same contract as cascaded_step_kernel: mutates ``cs``, returns
    (tau_m, mgx, mgy, p_star, q_star, freq, sync_energy).  Never touches
    the PLL slots.
    """
    if g[CG_NOTCH_ON] != 0.0:
        w1f, z1, z2 = notch_kernel(w1, cs[CS_NZ1], cs[CS_NZ2],
                                   g[CG_NB0], g[CG_NB1], g[CG_NB2],
                                   g[CG_NA1], g[CG_NA2])
        cs[CS_NZ1] = z1
        cs[CS_NZ2] = z2
    else:
        w1f = w1

    # identical speed coupling as the cascaded stack
    w_dc = (g[CG_WREF] / g[CG_VDCREF]) * vdc
    tau_m, xm, sat_m = pi_step_kernel(w1f - w_dc, cs[CS_XM],
                                      g[CG_KPM], g[CG_KIM],
                                      g[CG_TAULIM], dt)
    cs[CS_XM] = xm
    cs[CS_SPEED_SAT] = 1.0 if sat_m else 0.0

    # reference-voltage filter: first-order in the EMF frame, so the
    # positive sequence passes and unbalance ripple is attenuated (the
    # matching controller has no PLL to lean on)
    th = cs[CS_THETA]
    c = math.cos(th)
    s = math.sin(th)
    vd = c * vgx + s * vgy
    vq = -s * vgx + c * vgy
    a = g[CG_VF_BW] * dt
    cs[CS_VFD] += a * (vd - cs[CS_VFD])
    cs[CS_VFQ] += a * (vq - cs[CS_VFQ])
    vfx = c * cs[CS_VFD] - s * cs[CS_VFQ]
    vfy = s * cs[CS_VFD] + c * cs[CS_VFQ]

    # PQ demand: mechanical power plus the shared reactive compensator
    p_star = tau_m * w1
    vf_n2 = vfx * vfx + vfy * vfy
    q_star = ac_voltage_kernel(vf_n2, g[CG_VGREF2], g[CG_KPV], p_star,
                               g[CG_INOM], g[CG_SMOOTH] != 0.0)
    # dead-bus coast: with the PCC collapsed, the measured voltage is the
    # converter's own drop, so tracking it is self-referential; ride the
    # fault at the matching frequency with the full output impedance and
    # re-engage when the bus returns
    kf = g[CG_KF]
    if vf_n2 > g[CG_VDEAD] * g[CG_VDEAD]:
        isx, isy = current_reference_kernel(p_star, q_star, vfx, vfy,
                                            g[CG_ILIM], g[CG_VEPS],
                                            cs[CS_ISX], cs[CS_ISY])
    else:
        isx = 0.0
        isy = 0.0
        kf = 0.0
    cs[CS_ISX] = isx
    cs[CS_ISY] = isy

    g2, t2, mx, my, sync = matching_update_kernel(
        cs[CS_GAMR], cs[CS_THETA], igx, igy, isx, isy, vdc,
        kf, g[CG_KF_ORTHO] != 0.0, g[CG_LG],
        g[CG_ZER], g[CG_ZEX], g[CG_ZER] - g[CG_ZGR], g[CG_ZEX] - g[CG_ZGX],
        g[CG_VDCREF], g[CG_ETA], g[CG_OMEGA0],
        g[CG_GAMMA_MAX], g[CG_GAMMA_MIN], dt)
    cs[CS_GAMR] = g2
    cs[CS_THETA] = t2

    freq = g[CG_ETA] * vdc
    return tau_m, mx, my, p_star, q_star, freq, sync


class MatchingController:
    """Stateful wrapper over the fused matching step; single-owner use."""

    def __init__(self, plant, gains, dt):
        self.plant = plant
        self.gains = gains
        self.dt = float(dt)
        self.g = pack_gains(gains, plant, dt)
        self.cs = np.zeros(CS_SIZE)
        self.cs[CS_GAMR] = min(math.log(plant.vg_nom * plant.eta
                                        / plant.omega0), GAMMA_MAX)

    def initialize(self, v_g, i_star=None):
        """Seed (gamma_r, theta) from the first measurements so the
        initial synchronization gradient is near zero: the EMF is the
        voltage behind the converter impedance at the initial current
        (just the voltage sample itself when no current is given)."""
        emf = np.array([float(v_g[0]), float(v_g[1])])
        if i_star is not None:
            zr = self.g[CG_ZGR]
            zx = self.g[CG_ZGX]
            emf[0] -= zr * i_star[0] - zx * i_star[1]
            emf[1] -= zx * i_star[0] + zr * i_star[1]
            self.cs[CS_ISX] = i_star[0]
            self.cs[CS_ISY] = i_star[1]
        n = math.hypot(emf[0], emf[1])
        if n > self.g[CG_VEPS]:
            self.cs[CS_GAMR] = min(math.log(n / self.plant.vdc_ref),
                                   GAMMA_MAX)
            self.cs[CS_THETA] = math.atan2(emf[1], emf[0])
        c = math.cos(self.cs[CS_THETA])
        s = math.sin(self.cs[CS_THETA])
        self.cs[CS_VFD] = c * v_g[0] + s * v_g[1]
        self.cs[CS_VFQ] = -s * v_g[0] + c * v_g[1]

    def step(self, i_g, v_g, v_dc, w1):
        """Returns (tau_m, m_g, info dict)."""
        tau_m, mx, my, p_star, q_star, freq, sync = matching_step_kernel(
            self.cs, i_g[0], i_g[1], v_g[0], v_g[1], v_dc, w1,
            self.g, self.dt)
        info = {"p_star": p_star, "q_star": q_star, "freq": freq,
                "sync_energy": sync,
                "i_star": np.array([self.cs[CS_ISX], self.cs[CS_ISY]]),
                "gamma_r": self.cs[CS_GAMR], "theta": self.cs[CS_THETA]}
        return tau_m, np.array([mx, my]), info
