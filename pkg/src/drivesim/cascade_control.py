"""Modified cascaded-PI grid-side stack.

Five pieces, stepped at the controller rate with forward-Euler
integrators and conditional-integration anti-windup:

* speed coupling: the usual speed PI, but with its reference replaced by
  the DC-link voltage mapped to an equivalent speed w_dc; this couples
  the shaft elastically to the DC capacitor,
* DC-link regulator: PI on v_dc against a reference drooped with the PLL
  frequency, output is the active-power demand,
* AC-voltage compensator: proportional reactive-power demand, projected
  onto the current-feasible set with active-power priority,
* current reference: PQ demand mapped through the measured voltage and
  clamped by the circular current limiter,
* current controller: PI with the integral accumulated in the dq frame
  (harmonic tracking), voltage/impedance feed-forward including the
  virtual impedance, circular modulation limiter at 1/sqrt(2).

The anti-windup scheme freezes an integrator while the output is
saturated and the error pushes further outward.  Gains follow the
second-order design rules kp = 2*zeta*omega*<inertia>, ki = omega^2 *
<inertia> with the DC loop sized on the coupled capacitance c_tot.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .frames import MOD_LIMIT, scalar_sat
from .pll import pll_step_kernel

__all__ = [
    "PiState", "ControlGains",
    "dc_as_speed", "speed_coupling_step", "dc_reference", "dc_voltage_step",
    "ac_voltage_step", "current_reference", "current_control_step",
    "notch_coefficients", "CascadeController",
]


@dataclass
class PiState:
    """PI integrator memory: value plus last-step saturation flag."""

    integ: float = 0.0
    saturated: bool = False


@dataclass
class ControlGains:
    """Loop tunings and controller-side constants for both grid-side
    strategies.

    zeta/omega pairs are the continuous-time second-order design targets;
    the physical gains are produced by the ``kp_*``/``ki_*`` helpers at
    bind time.  Bandwidth ordering omega_g > omega_dc is enforced (inner
    loop faster than outer).  ``notch`` optionally enables an active
    damping notch (f0_hz, depth, width_hz) on the speed feedback.
    """

    zeta_m: float = 1.0
    omega_m: float = 7.54            # speed loop, rad/s
    zeta_dc: float = 1.0
    omega_dc: float = 2.0 * math.pi * 2.0
    zeta_g: float = 1.0
    omega_g: float = 2.0 * math.pi * 200.0
    kp_v: float = 1.0                # AC voltage gain, var/V^2
    kappa_pll: float = 63.0
    kf: float = 7.54e-3              # matching synchronization gain
    zv_r: float = 0.8                # virtual impedance, ohm
    zv_l: float = 1.0e-3             # virtual impedance, H
    vf_bandwidth: float = 63.0       # matching reference-voltage filter, rad/s
    limiter_margin: float = 0.96     # current-reference clamp / i_nom
    notch: tuple | None = None       # (f0_hz, depth 0..1, width_hz)
    use_vpll_ff: bool = False        # feed v_pll instead of v_g to Eq. FF
    pll_dc_coupled: bool = False     # PLL feed-forward = eta*v_dc
    smooth_projection: bool = False  # tanh-blended reactive projection
    matching_orthonormal: bool = False  # kf * exp(-2*gamma_r) gain mode

    def __post_init__(self):
        for z in (self.zeta_m, self.zeta_dc, self.zeta_g):
            if not 0.0 < z <= 2.0:
                raise ValueError("damping ratios must lie in (0, 2]")
        for w in (self.omega_m, self.omega_dc, self.omega_g):
            if w <= 0.0:
                raise ValueError("loop bandwidths must be positive")
        if not self.omega_g > self.omega_dc:
            raise ValueError("current loop must be faster than DC loop")

    def kp_m(self, m_total):
        return 2.0 * self.zeta_m * self.omega_m * m_total

    def ki_m(self, m_total):
        return self.omega_m ** 2 * m_total

    def kp_dc(self, c_tot):
        return 2.0 * self.zeta_dc * self.omega_dc * c_tot

    def ki_dc(self, c_tot):
        return self.omega_dc ** 2 * c_tot

    def kp_g(self, lg):
        return 2.0 * self.zeta_g * self.omega_g * lg

    def ki_g(self, lg):
        return self.omega_g ** 2 * lg


# -- free-function operations (unit-test surface) ----------------------------

def dc_as_speed(v_dc, w_ref, vdc_ref):
    """Map the DC voltage to the speed of the equivalent coupled mass:
    w_dc = (w_ref / vdc_ref) * v_dc."""
    if vdc_ref <= 0.0:
        raise ValueError("vdc_ref must be positive")
    return (w_ref / vdc_ref) * v_dc


@njit
def pi_step_kernel(err, integ, kp, ki, lim, dt):
    """Shared conditional-integration PI: out = sat(-kp*e - ki*x).

    Returns (out, new integ, saturated).  The integrator freezes when the
    output is saturated and the error pushes it further outward.
    """
    raw = -kp * err - ki * integ
    out, sat = scalar_sat(raw, lim)
    if not (sat and err * raw < 0.0):
        integ = integ + dt * err
    return out, integ, sat


def speed_coupling_step(w1, w_dc, st, gains, m_total, tau_nom, dt):
    """Speed PI on (w1 - w_dc), saturated at +-tau_nom with anti-windup.

    ``w1`` is the (optionally notch-filtered) speed of the motor-side
    mass; replacing the fixed reference by w_dc is what couples the shaft
    to the DC link.  Returns (tau_m, new PiState).
    """
    out, integ, sat = pi_step_kernel(
        w1 - w_dc, st.integ, gains.kp_m(m_total), gains.ki_m(m_total),
        tau_nom, dt)
    return out, PiState(integ, sat)


def dc_reference(omega_pll, eta):
    """DC-voltage reference drooped with the estimated grid frequency:
    v* = omega_pll / eta, equal to vdc_ref at nominal frequency."""
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    return omega_pll / eta


def dc_voltage_step(v_dc, v_dc_star, st, gains, c_tot, p_nom, vdc_ref, dt):
    """DC-link PI; the raw output is scaled by vdc_ref into watts, then
    saturated at +-p_nom.  Gains are sized on the coupled capacitance
    c_tot.  Returns (P*, new PiState)."""
    out, integ, sat = pi_step_kernel(
        v_dc - v_dc_star, st.integ,
        gains.kp_dc(c_tot), gains.ki_dc(c_tot), p_nom / vdc_ref, dt)
    return out * vdc_ref, PiState(integ, sat)


@njit
def ac_voltage_kernel(vg_norm2, vg_ref2, kp_v, p_star, i_nom, smooth):
    """Reactive demand with projection onto the current-feasible set."""
    raw = kp_v * (vg_norm2 - vg_ref2)
    head = i_nom * i_nom * vg_norm2 - p_star * p_star
    if head <= 0.0:
        return 0.0
    cap = math.sqrt(head)
    if smooth:
        return cap * math.tanh(raw / cap)
    if raw > cap:
        return cap
    if raw < -cap:
        return -cap
    return raw


def ac_voltage_step(v_g, vg_ref, kp_v, p_star, i_nom, smooth=False):
    """Reactive-power demand regulating the PCC voltage magnitude.

    Q = kp_v * (||v_g||^2 - vg_ref^2), projected so the (P*, Q*) pair
    stays inside the current circle with active-power priority: the
    feasible band is +-sqrt((i_nom*||v_g||)^2 - P*^2), zero when the
    active demand already consumes the whole current budget.
    """
    n2 = float(v_g[0] ** 2 + v_g[1] ** 2)
    return ac_voltage_kernel(n2, vg_ref * vg_ref, kp_v, p_star, i_nom, smooth)


@njit
def current_reference_kernel(p_star, q_star, vgx, vgy, i_nom,
                             v_eps, prev_x, prev_y):
    """PQ demand to limited current reference; holds the previous
    reference when the voltage is degenerate."""
    n2 = vgx * vgx + vgy * vgy
    if n2 > v_eps * v_eps:
        ix = (vgx * p_star + vgy * q_star) / n2
        iy = (vgy * p_star - vgx * q_star) / n2
    else:
        ix = prev_x
        iy = prev_y
    n = math.hypot(ix, iy)
    if n > i_nom and n > 0.0:
        s = i_nom / n
        ix *= s
        iy *= s
    return ix, iy


def current_reference(p_star, q_star, v_g, i_nom, v_eps=0.0, prev=None):
    """Current reference realizing (P*, Q*) at the measured voltage, then
    circularly limited at i_nom.

    The unlimited value satisfies instantaneous_power(v_g, i*) == (P*, Q*)
    exactly.  Below the voltage guard ``v_eps`` the previous reference is
    held (and still limited): the map has 1/||v_g||^2 in it and bolted
    faults would otherwise blow it up.
    """
    if prev is None:
        prev = np.zeros(2)
    ix, iy = current_reference_kernel(
        p_star, q_star, v_g[0], v_g[1], i_nom, v_eps, prev[0], prev[1])
    return np.array([ix, iy])


@njit
def current_control_kernel(igx, igy, isx, isy, vffx, vffy, theta,
                           xd, xq, kp, ki, zgr, zgx, zvr, zvx,
                           vdc_ref, dt, limit):
    """dq-integral current PI with feed-forward and circular limiter.

    Returns (mx, my, xd', xq', saturated).  The feed-forward carries the
    converter-impedance drop of the reference, v_ff - z_g @ i*; the
    virtual impedance acts on the tracking deviation, z_v @ (i - i*), so
    it shapes the apparent output impedance without consuming modulation
    headroom when the reference sits at the current limit.
    """
    ex = igx - isx
    ey = igy - isy
    c = math.cos(theta)
    s = math.sin(theta)
    # integral state lives in dq: rotate error by -theta
    ed = c * ex + s * ey
    eq = -s * ex + c * ey
    # rotate integral back for the output
    xa = c * xd - s * xq
    xb = s * xd + c * xq
    ffx = vffx - (zgr * isx - zgx * isy)
    ffy = vffy - (zgx * isx + zgr * isy)
    rx = (kp * ex + (zvr * ex - zvx * ey) + ki * xa + ffx) / vdc_ref
    ry = (kp * ey + (zvx * ex + zvr * ey) + ki * xb + ffy) / vdc_ref
    n = math.hypot(rx, ry)
    if n > limit:
        mx = rx * limit / n
        my = ry * limit / n
        sat = True
    else:
        mx = rx
        my = ry
        sat = False
    # conditional integration: freeze when saturated and pushing outward
    if not (sat and (rx * ex + ry * ey) > 0.0):
        xd += dt * ed
        xq += dt * eq
    return mx, my, xd, xq, sat


def current_control_step(i_g, i_star, v_ff, theta, st, gains, lg, zg, zv,
                         vdc_ref, dt):
    """dq-frame current PI producing the modulation vector.

    ``st.integ`` is the (2,) dq integral state; ``lg`` the converter
    inductance the gains are sized on.  The feed-forward is
    v_ff - zg @ i_star - zv @ (i_g - i_star); v_ff is the measured PCC
    voltage or the PLL output depending on configuration.  Output is
    circularly limited at 1/sqrt(2) with the integrator frozen while
    saturated.  Returns (m_g, new PiState).
    """
    mx, my, xd, xq, sat = current_control_kernel(
        i_g[0], i_g[1], i_star[0], i_star[1], v_ff[0], v_ff[1], theta,
        st.integ[0], st.integ[1], gains.kp_g(lg), gains.ki_g(lg),
        zg.r, zg.x, zv.r, zv.x, vdc_ref, dt, MOD_LIMIT)
    return np.array([mx, my]), PiState(np.array([xd, xq]), sat)


def notch_coefficients(f0_hz, depth, width_hz, dt):
    """Biquad notch (b0, b1, b2, a1, a2) at the controller rate.

    depth 1 is a full notch, 0 disables; width is the -3 dB bandwidth.
    """
    w = 2.0 * math.pi * f0_hz * dt
    q = f0_hz / width_hz
    alpha = math.sin(w) / (2.0 * q)
    cw = math.cos(w)
    a0 = 1.0 + alpha
    b0 = (1.0 + (1.0 - depth) * alpha) / a0
    b1 = -2.0 * cw / a0
    b2 = (1.0 - (1.0 - depth) * alpha) / a0
    a1 = -2.0 * cw / a0
    a2 = (1.0 - alpha) / a0
    return b0, b1, b2, a1, a2


@njit
def notch_kernel(x, z1, z2, b0, b1, b2, a1, a2):
    """Direct form II transposed biquad step; returns (y, z1', z2')."""
    y = b0 * x + z1
    z1 = b1 * x - a1 * y + z2
    z2 = b2 * x - a2 * y
    return y, z1, z2


# -- packed layouts for the fused kernels -------------------------------------

# controller state slots (shared by both strategies; unused slots idle)
CS_XM = 0          # speed PI integrator
CS_SPEED_SAT = 1
CS_XDC = 2         # DC PI integrator
CS_DC_SAT = 3
CS_XGD = 4         # current PI integral, d
CS_XGQ = 5         # current PI integral, q
CS_CUR_SAT = 6
CS_VPX = 7         # PLL vector
CS_VPY = 8
CS_THPLL = 9
CS_OMPLL = 10
CS_ISX = 11        # held current reference
CS_ISY = 12
CS_NZ1 = 13        # notch biquad state
CS_NZ2 = 14
CS_GAMR = 15       # matching log-magnitude
CS_THETA = 16      # matching angle
CS_VFD = 17        # matching reference-voltage filter (EMF frame)
CS_VFQ = 18
CS_SIZE = 19

# packed gain/constant slots
CG_KPM = 0
CG_KIM = 1
CG_TAULIM = 2
CG_KPDC = 3
CG_KIDC = 4
CG_PLIM = 5        # p_nom / vdc_ref (limit of the unscaled DC PI)
CG_VDCREF = 6
CG_WREF = 7
CG_ETA = 8
CG_KPG = 9
CG_KIG = 10
CG_ZER = 11        # (zg + zv) resistance
CG_ZEX = 12        # (zg + zv) reactance
CG_KPV = 13
CG_VGREF2 = 14
CG_INOM = 15
CG_VEPS = 16
CG_KAPPA = 17
CG_OMEGA0 = 18
CG_PLLFLOOR = 19
CG_USE_VPLL = 20   # 0/1 feed-forward source
CG_PLL_COUPLED = 21
CG_SMOOTH = 22
CG_NOTCH_ON = 23
CG_NB0 = 24
CG_NB1 = 25
CG_NB2 = 26
CG_NA1 = 27
CG_NA2 = 28
CG_KF = 29
CG_LG = 30
CG_GAMMA_MAX = 31  # log(1/sqrt(2))
CG_GAMMA_MIN = 32
CG_KF_ORTHO = 33   # 0/1 state-dependent matching gain
CG_ZGR = 34        # converter impedance alone; the virtual part is
CG_ZGX = 35        # recovered as (zg + zv) - zg
CG_VDEAD = 36      # matching dead-bus coast threshold
CG_VF_BW = 37      # matching reference-voltage filter bandwidth
CG_ILIM = 38       # current-reference clamp, margin below i_nom
CG_SIZE = 39


def pack_gains(gains, plant, dt_control):
    """Numeric gain vector for the fused kernels."""
    g = np.zeros(CG_SIZE)
    m = plant.total_inertia
    g[CG_KPM] = gains.kp_m(m)
    g[CG_KIM] = gains.ki_m(m)
    g[CG_TAULIM] = plant.tau_nom
    g[CG_KPDC] = gains.kp_dc(plant.c_tot)
    g[CG_KIDC] = gains.ki_dc(plant.c_tot)
    g[CG_PLIM] = plant.p_nom / plant.vdc_ref
    g[CG_VDCREF] = plant.vdc_ref
    g[CG_WREF] = plant.w_nom
    g[CG_ETA] = plant.eta
    g[CG_KPG] = gains.kp_g(plant.lg)
    g[CG_KIG] = gains.ki_g(plant.lg)
    g[CG_ZER] = plant.rg + gains.zv_r
    g[CG_ZEX] = plant.omega0 * (plant.lg + gains.zv_l)
    g[CG_KPV] = gains.kp_v
    g[CG_VGREF2] = plant.vg_nom ** 2
    g[CG_INOM] = plant.i_nom
    g[CG_VEPS] = 0.01 * plant.vg_nom
    g[CG_KAPPA] = gains.kappa_pll
    g[CG_OMEGA0] = plant.omega0
    g[CG_PLLFLOOR] = 0.01 * plant.vg_nom
    g[CG_USE_VPLL] = 1.0 if gains.use_vpll_ff else 0.0
    g[CG_PLL_COUPLED] = 1.0 if gains.pll_dc_coupled else 0.0
    g[CG_SMOOTH] = 1.0 if gains.smooth_projection else 0.0
    if gains.notch is not None:
        f0, depth, width = gains.notch
        b0, b1, b2, a1, a2 = notch_coefficients(f0, depth, width, dt_control)
        g[CG_NOTCH_ON] = 1.0
        g[CG_NB0] = b0
        g[CG_NB1] = b1
        g[CG_NB2] = b2
        g[CG_NA1] = a1
        g[CG_NA2] = a2
    g[CG_KF] = gains.kf
    g[CG_LG] = plant.lg
    g[CG_GAMMA_MAX] = math.log(MOD_LIMIT)
    g[CG_GAMMA_MIN] = math.log(1.0e-3)
    g[CG_KF_ORTHO] = 1.0 if gains.matching_orthonormal else 0.0
    g[CG_ZGR] = plant.rg
    g[CG_ZGX] = plant.omega0 * plant.lg
    g[CG_VDEAD] = 0.2 * plant.vg_nom
    g[CG_VF_BW] = gains.vf_bandwidth
    g[CG_ILIM] = gains.limiter_margin * plant.i_nom
    return g


@njit
def cascaded_step_kernel(cs, igx, igy, vgx, vgy, vdc, w1, g, dt):
    """One controller-rate step of the full cascaded stack.

    Mutates the state vector ``cs`` in place and returns
    (tau_m, mgx, mgy, p_star, q_star, freq, sync_energy).
    """
    # active-damping notch on the speed feedback
    if g[CG_NOTCH_ON] != 0.0:
        w1f, z1, z2 = notch_kernel(w1, cs[CS_NZ1], cs[CS_NZ2],
                                   g[CG_NB0], g[CG_NB1], g[CG_NB2],
                                   g[CG_NA1], g[CG_NA2])
        cs[CS_NZ1] = z1
        cs[CS_NZ2] = z2
    else:
        w1f = w1

    # PLL
    om_ff = g[CG_OMEGA0]
    if g[CG_PLL_COUPLED] != 0.0:
        om_ff = g[CG_ETA] * vdc
    vpx, vpy, om, _ = pll_step_kernel(cs[CS_VPX], cs[CS_VPY], vgx, vgy,
                                      g[CG_KAPPA], om_ff, dt,
                                      g[CG_PLLFLOOR])
    cs[CS_VPX] = vpx
    cs[CS_VPY] = vpy
    cs[CS_OMPLL] = om
    cs[CS_THPLL] += om * dt
    theta = cs[CS_THPLL]

    # speed coupling -> motor torque
    w_dc = (g[CG_WREF] / g[CG_VDCREF]) * vdc
    tau_m, xm, sat_m = pi_step_kernel(w1f - w_dc, cs[CS_XM],
                                      g[CG_KPM], g[CG_KIM],
                                      g[CG_TAULIM], dt)
    cs[CS_XM] = xm
    cs[CS_SPEED_SAT] = 1.0 if sat_m else 0.0

    # DC droop + PI -> active power demand
    vdc_star = om / g[CG_ETA]
    pouts, xdc, sat_dc = pi_step_kernel(vdc - vdc_star, cs[CS_XDC],
                                        g[CG_KPDC], g[CG_KIDC],
                                        g[CG_PLIM], dt)
    cs[CS_XDC] = xdc
    cs[CS_DC_SAT] = 1.0 if sat_dc else 0.0
    p_star = pouts * g[CG_VDCREF]

    # reactive compensation and current reference built on the PLL output
    # voltage: it filters unbalance and fault transients out of the
    # 1/||v||^2 map while tracking the PCC at the synchronization rate
    vp_n2 = vpx * vpx + vpy * vpy
    q_star = ac_voltage_kernel(vp_n2, g[CG_VGREF2], g[CG_KPV], p_star,
                               g[CG_INOM], g[CG_SMOOTH] != 0.0)
    isx, isy = current_reference_kernel(p_star, q_star, vpx, vpy,
                                        g[CG_ILIM], g[CG_VEPS],
                                        cs[CS_ISX], cs[CS_ISY])
    cs[CS_ISX] = isx
    cs[CS_ISY] = isy

    # current PI in dq
    if g[CG_USE_VPLL] != 0.0:
        vffx = vpx
        vffy = vpy
    else:
        vffx = vgx
        vffy = vgy
    mx, my, xd, xq, sat_c = current_control_kernel(
        igx, igy, isx, isy, vffx, vffy, theta,
        cs[CS_XGD], cs[CS_XGQ], g[CG_KPG], g[CG_KIG],
        g[CG_ZGR], g[CG_ZGX], g[CG_ZER] - g[CG_ZGR], g[CG_ZEX] - g[CG_ZGX],
        g[CG_VDCREF], dt, MOD_LIMIT)
    cs[CS_XGD] = xd
    cs[CS_XGQ] = xq
    cs[CS_CUR_SAT] = 1.0 if sat_c else 0.0

    ex = vpx - vgx
    ey = vpy - vgy
    sync = 0.5 * (ex * ex + ey * ey)
    return tau_m, mx, my, p_star, q_star, om, sync


class CascadeController:
    """Stateful wrapper over the fused cascaded step, for step-by-step use
    outside the simulation engine.  Stepped by a single owner."""

    def __init__(self, plant, gains, dt):
        self.plant = plant
        self.gains = gains
        self.dt = float(dt)
        self.g = pack_gains(gains, plant, dt)
        self.cs = np.zeros(CS_SIZE)
        self.cs[CS_VPX] = plant.vg_nom

    def initialize(self, v_g, i_star=None):
        """Seed the PLL (and optionally the held current reference) from
        the first measurement."""
        n = math.hypot(v_g[0], v_g[1])
        if n > self.g[CG_VEPS]:
            self.cs[CS_VPX] = v_g[0]
            self.cs[CS_VPY] = v_g[1]
        else:
            self.cs[CS_VPX] = self.plant.vg_nom
            self.cs[CS_VPY] = 0.0
        self.cs[CS_THPLL] = math.atan2(self.cs[CS_VPY], self.cs[CS_VPX])
        self.cs[CS_OMPLL] = self.plant.omega0
        if i_star is not None:
            self.cs[CS_ISX] = i_star[0]
            self.cs[CS_ISY] = i_star[1]

    def step(self, i_g, v_g, v_dc, w1):
        """Returns (tau_m, m_g, info dict)."""
        tau_m, mx, my, p_star, q_star, freq, sync = cascaded_step_kernel(
            self.cs, i_g[0], i_g[1], v_g[0], v_g[1], v_dc, w1,
            self.g, self.dt)
        info = {"p_star": p_star, "q_star": q_star, "freq": freq,
                "sync_energy": sync,
                "i_star": np.array([self.cs[CS_ISX], self.cs[CS_ISY]]),
                "omega_pll": self.cs[CS_OMPLL],
                "theta_pll": self.cs[CS_THPLL]}
        return tau_m, np.array([mx, my]), info
