"""Fixed-step time-domain engine.

A run integrates the plant with classical RK4 at ``dt_plant`` while the
selected controller stack is stepped every ``dt_control`` (an integer
multiple) with zero-order-held outputs.  The infinite-bus source is a
pure function of time compiled from the scenario's event list, so the
integrator samples it at the RK4 stage times; event timestamps are
snapped to the control grid so discontinuities never land inside a step.

A scenario starts with a warm-up interval at the initial load (the run is
initialized at the analytic near-equilibrium, the warm-up absorbs the
residual), then applies its events.  Identical configs produce
bit-identical traces: there is no randomness anywhere in the engine.

Load torque follows a viscous law tau_l = tau_set * w_N / w_nom, so a
grid-frequency excursion of x % moves the steady drivetrain power by
2x % of the load level.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import njit
from . import cascade_control as cc
from .cascade_control import ControlGains, cascaded_step_kernel, pack_gains
from .frames import impedance_apply
from .matching_control import GAMMA_MAX, matching_step_kernel
from .plant import PlantParams, plant_rhs, two_mass_params

__all__ = [
    "NonFinite", "SimulationError",
    "PhaseJump", "ThreePhaseDrop", "FrequencyStep", "SinglePhaseDrop",
    "VoltageDip", "LoadStep", "ScenarioScript", "SimConfig", "SimTrace",
    "grid_source", "rk4_step", "rk4_generic", "run_scenario",
    "scenario_preset", "build_config", "SCENARIO_NAMES", "GRIDS", "CONTROLS",
]


class SimulationError(RuntimeError):
    """Base for aborted runs; carries the failure time."""

    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail


class NonFinite(SimulationError):
    """A state variable went NaN/Inf; the run aborts at the offending time."""


# -- scenario events ----------------------------------------------------------

@dataclass(frozen=True)
class PhaseJump:
    degrees: float


@dataclass(frozen=True)
class ThreePhaseDrop:
    to_pu: float
    duration_s: float


@dataclass(frozen=True)
class FrequencyStep:
    hz: float


@dataclass(frozen=True)
class SinglePhaseDrop:
    phase_index: int = 0     # sustained to the end of the run


@dataclass(frozen=True)
class VoltageDip:
    to_pu: float
    duration_s: float


@dataclass(frozen=True)
class LoadStep:
    to_pu: float


@dataclass
class ScenarioScript:
    """Timed grid/load events; event times are relative to warm-up end."""

    name: str
    events: list                 # [(t_s, event), ...] time-sorted
    duration: float              # post-warm-up run length, s
    grid: str = "stiff"          # {stiff, weak}
    load_pu: float = 0.0         # initial load, fraction of tau_nom
    control: str = "cascaded"    # {cascaded, matching}

    def __post_init__(self):
        if self.grid not in ("stiff", "weak"):
            raise ValueError(f"unknown grid kind {self.grid!r}")
        if self.control not in ("cascaded", "matching"):
            raise ValueError(f"unknown control kind {self.control!r}")
        if abs(self.load_pu) > 1.0:
            raise ValueError("|load_pu| must be <= 1")
        times = [t for t, _ in self.events]
        if times != sorted(times):
            raise ValueError("events must be time-sorted")
        if times and self.duration <= max(times):
            raise ValueError("duration must exceed the last event time")


@dataclass
class SimConfig:
    """Everything one deterministic run needs."""

    plant: PlantParams
    gains: ControlGains
    scenario: ScenarioScript
    dt_plant: float = 5.0e-5
    dt_control: float = 1.0e-4
    record_decimation: int = 10  # record every k-th control step
    warmup: float = 2.0

    def __post_init__(self):
        ratio = self.dt_control / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("dt_control must be an integer multiple of dt_plant")
        if self.record_decimation < 1:
            raise ValueError("record_decimation must be >= 1")

    @property
    def n_substeps(self):
        return int(round(self.dt_control / self.dt_plant))


# -- grid-source timeline ------------------------------------------------------

@dataclass
class GridTimeline:
    """Packed event arrays for the source kernel (absolute times)."""

    seg_t: np.ndarray      # angle segment start times
    seg_w: np.ndarray      # segment frequencies, rad/s
    seg_phi: np.ndarray    # accumulated angle at segment start
    amp_t0: np.ndarray     # three-phase amplitude windows
    amp_t1: np.ndarray
    amp_fac: np.ndarray
    pha_t0: np.ndarray     # single-phase zeroing windows
    pha_t1: np.ndarray
    pha_idx: np.ndarray    # int64 phase index
    base_amp: float        # alpha-beta magnitude of the unfaulted bus
    load_t: np.ndarray     # load set-point timeline
    load_tau: np.ndarray   # N*m


def compile_timeline(script, plant, warmup, snap_dt=None):
    """Turn the event list into the packed arrays the kernels consume.

    Event times are offset by the warm-up and snapped to ``snap_dt`` so
    discontinuities coincide with control-step boundaries.
    """
    def _snap(t):
        t = warmup + t
        if snap_dt:
            t = round(t / snap_dt) * snap_dt
        return t

    big = 1e30   # effectively "until the end of the run"
    seg_t, seg_w, seg_phi = [0.0], [plant.omega0], [0.0]
    amp_t0, amp_t1, amp_fac = [], [], []
    pha_t0, pha_t1, pha_idx = [], [], []
    load_t, load_tau = [0.0], [script.load_pu * plant.tau_nom]

    for t_ev, ev in script.events:
        t = _snap(t_ev)
        if isinstance(ev, FrequencyStep):
            phi = seg_phi[-1] + seg_w[-1] * (t - seg_t[-1])
            seg_t.append(t)
            seg_w.append(seg_w[-1] + 2.0 * math.pi * ev.hz)
            seg_phi.append(phi)
        elif isinstance(ev, PhaseJump):
            phi = seg_phi[-1] + seg_w[-1] * (t - seg_t[-1])
            seg_t.append(t)
            seg_w.append(seg_w[-1])
            seg_phi.append(phi + math.radians(ev.degrees))
        elif isinstance(ev, (ThreePhaseDrop, VoltageDip)):
            amp_t0.append(t)
            amp_t1.append(t + ev.duration_s)
            amp_fac.append(ev.to_pu)
        elif isinstance(ev, SinglePhaseDrop):
            if ev.phase_index not in (0, 1, 2):
                raise ValueError("phase_index must be 0, 1 or 2")
            pha_t0.append(t)
            pha_t1.append(big)
            pha_idx.append(ev.phase_index)
        elif isinstance(ev, LoadStep):
            load_t.append(t)
            load_tau.append(ev.to_pu * plant.tau_nom)
        else:
            raise TypeError(f"unknown event {ev!r}")

    return GridTimeline(
        seg_t=np.array(seg_t), seg_w=np.array(seg_w), seg_phi=np.array(seg_phi),
        amp_t0=np.array(amp_t0), amp_t1=np.array(amp_t1),
        amp_fac=np.array(amp_fac),
        pha_t0=np.array(pha_t0), pha_t1=np.array(pha_t1),
        pha_idx=np.array(pha_idx, dtype=np.int64),
        base_amp=plant.vg_nom,
        load_t=np.array(load_t), load_tau=np.array(load_tau),
    )


_SQRT23 = math.sqrt(2.0 / 3.0)
_HALF_SQRT3 = 0.5 * math.sqrt(3.0)


@njit
def grid_source_kernel(t, seg_t, seg_w, seg_phi,
                       amp_t0, amp_t1, amp_fac,
                       pha_t0, pha_t1, pha_idx, base_amp):
    """Infinite-bus voltage in alpha-beta at time t.

    Built in abc (so single-phase faults flow into alpha-beta as negative
    sequence naturally) and Clarke-transformed; phase is accumulated per
    segment, so frequency steps never snap the angle.
    """
    k = seg_t.shape[0] - 1
    while k > 0 and t < seg_t[k]:
        k -= 1
    th = seg_phi[k] + seg_w[k] * (t - seg_t[k])

    fac = 1.0
    for j in range(amp_t0.shape[0]):
        if amp_t0[j] <= t < amp_t1[j]:
            fac *= amp_fac[j]
    fa = fac
    fb = fac
    fc = fac
    for j in range(pha_t0.shape[0]):
        if pha_t0[j] <= t < pha_t1[j]:
            if pha_idx[j] == 0:
                fa = 0.0
            elif pha_idx[j] == 1:
                fb = 0.0
            else:
                fc = 0.0

    pk = base_amp * _SQRT23          # peak phase amplitude
    a = fa * pk * math.cos(th)
    b = fb * pk * math.cos(th - 2.0 * math.pi / 3.0)
    c = fc * pk * math.cos(th + 2.0 * math.pi / 3.0)
    vx = _SQRT23 * (a - 0.5 * b - 0.5 * c)
    vy = _SQRT23 * _HALF_SQRT3 * (b - c)
    return vx, vy


def grid_source(t, script, plant, warmup=0.0):
    """Infinite-bus alpha-beta voltage at absolute time ``t`` for a
    scenario (no snapping; the engine snaps to its control grid)."""
    tl = compile_timeline(script, plant, warmup)
    vx, vy = grid_source_kernel(
        t, tl.seg_t, tl.seg_w, tl.seg_phi, tl.amp_t0, tl.amp_t1, tl.amp_fac,
        tl.pha_t0, tl.pha_t1, tl.pha_idx, tl.base_amp)
    return np.array([vx, vy])


# -- integrators ---------------------------------------------------------------

def rk4_generic(f, y, t, dt):
    """One classical RK4 step of dy/dt = f(t, y) for an array state."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state, inputs, params, dt):
    """Classical RK4 step of the plant with all inputs held.

    Accepts and returns PlantState; raises DcCollapse via the derivative.
    """
    from .plant import PlantState, derivative

    def f(_t, y):
        return derivative(PlantState.from_vector(y), inputs, params).as_vector()

    y = rk4_generic(f, state.as_vector(), 0.0, dt)
    return PlantState.from_vector(y)


@njit
def _rk4_plant_sub(y, mgx, mgy, tau_m, tau_l, t, h,
                   pp, masses, ks, cs,
                   seg_t, seg_w, seg_phi, amp_t0, amp_t1, amp_fac,
                   pha_t0, pha_t1, pha_idx, base_amp,
                   k1, k2, k3, k4, ytmp):
    """RK4 plant substep with controller outputs held and the grid source
    sampled at the stage times.  Returns collapse status."""
    vx, vy = grid_source_kernel(t, seg_t, seg_w, seg_phi, amp_t0, amp_t1,
                                amp_fac, pha_t0, pha_t1, pha_idx, base_amp)
    st = plant_rhs(y, mgx, mgy, tau_m, tau_l, vx, vy, pp, masses, ks, cs, k1)
    if st != 0:
        return st
    vx, vy = grid_source_kernel(t + 0.5 * h, seg_t, seg_w, seg_phi, amp_t0,
                                amp_t1, amp_fac, pha_t0, pha_t1, pha_idx,
                                base_amp)
    for i in range(y.shape[0]):
        ytmp[i] = y[i] + 0.5 * h * k1[i]
    st = plant_rhs(ytmp, mgx, mgy, tau_m, tau_l, vx, vy, pp, masses, ks, cs, k2)
    if st != 0:
        return st
    for i in range(y.shape[0]):
        ytmp[i] = y[i] + 0.5 * h * k2[i]
    st = plant_rhs(ytmp, mgx, mgy, tau_m, tau_l, vx, vy, pp, masses, ks, cs, k3)
    if st != 0:
        return st
    vx, vy = grid_source_kernel(t + h, seg_t, seg_w, seg_phi, amp_t0, amp_t1,
                                amp_fac, pha_t0, pha_t1, pha_idx, base_amp)
    for i in range(y.shape[0]):
        ytmp[i] = y[i] + h * k3[i]
    st = plant_rhs(ytmp, mgx, mgy, tau_m, tau_l, vx, vy, pp, masses, ks, cs, k4)
    if st != 0:
        return st
    for i in range(y.shape[0]):
        y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


@njit
def _run_loop(y, ctl, g, pp, masses, ks, cs_damp, ctrl_kind,
              dt_plant, n_sub, n_ctrl, record_every,
              seg_t, seg_w, seg_phi, amp_t0, amp_t1, amp_fac,
              pha_t0, pha_t1, pha_idx, base_amp,
              load_t, load_tau, w_nom, rec):
    """Fused simulation loop.  Returns (status, t_fail, rows_recorded);
    status 0 = ok, 1 = DC collapse, 2 = non-finite state."""
    n = masses.shape[0]
    n_states = y.shape[0]
    k1 = np.empty(n_states)
    k2 = np.empty(n_states)
    k3 = np.empty(n_states)
    k4 = np.empty(n_states)
    ytmp = np.empty(n_states)
    dt_ctrl = dt_plant * n_sub
    row = 0
    load_i = 0

    for k in range(n_ctrl):
        t = k * dt_ctrl

        # measurements
        vinfx, vinfy = grid_source_kernel(t, seg_t, seg_w, seg_phi, amp_t0,
                                          amp_t1, amp_fac, pha_t0, pha_t1,
                                          pha_idx, base_amp)
        igx = y[0]
        igy = y[1]
        vgx = vinfx - (pp[4] * igx - pp[5] * igy)
        vgy = vinfy - (pp[5] * igx + pp[4] * igy)
        vdc = y[2]
        w1 = y[4]

        # controller step, outputs held over the control interval
        if ctrl_kind == 0:
            tau_m, mgx, mgy, p_star, q_star, freq, sync = cascaded_step_kernel(
                ctl, igx, igy, vgx, vgy, vdc, w1, g, dt_ctrl)
        else:
            tau_m, mgx, mgy, p_star, q_star, freq, sync = matching_step_kernel(
                ctl, igx, igy, vgx, vgy, vdc, w1, g, dt_ctrl)

        # viscous load torque, held over the control interval
        while load_i + 1 < load_t.shape[0] and t >= load_t[load_i + 1]:
            load_i += 1
        tau_l = load_tau[load_i] * y[2 + 2 * n] / w_nom

        if k % record_every == 0:
            rec[row, 0] = t
            rec[row, 1] = igx
            rec[row, 2] = igy
            rec[row, 3] = math.hypot(igx, igy)
            rec[row, 4] = vdc
            rec[row, 5] = vgx
            rec[row, 6] = vgy
            rec[row, 7] = math.hypot(vgx, vgy)
            for i in range(n):
                rec[row, 8 + i] = y[4 + 2 * i]
            rec[row, 8 + n] = tau_m
            rec[row, 9 + n] = (ks[0] * (y[3] - y[5])
                               + cs_damp[0] * (y[4] - y[6]))
            rec[row, 10 + n] = vgx * igx + vgy * igy
            rec[row, 11 + n] = -vgx * igy + vgy * igx
            rec[row, 12 + n] = math.hypot(mgx, mgy)
            rec[row, 13 + n] = freq
            rec[row, 14 + n] = p_star
            rec[row, 15 + n] = q_star
            rec[row, 16 + n] = sync
            rec[row, 17 + n] = tau_l
            row += 1

        # plant substeps
        for s in range(n_sub):
            st = _rk4_plant_sub(y, mgx, mgy, tau_m, tau_l,
                                t + s * dt_plant, dt_plant,
                                pp, masses, ks, cs_damp,
                                seg_t, seg_w, seg_phi, amp_t0, amp_t1,
                                amp_fac, pha_t0, pha_t1, pha_idx, base_amp,
                                k1, k2, k3, k4, ytmp)
            if st != 0:
                return 1, t + s * dt_plant, row

        for i in range(n_states):
            if not math.isfinite(y[i]):
                return 2, t, row

    return 0, 0.0, row


# -- trace ---------------------------------------------------------------------

class SimTrace:
    """Uniformly sampled record of a run.

    ``data`` is (rows, columns) float64; ``columns`` names them.  Per-unit
    views are derived from the stored bases (power p_nom, voltage vg_nom,
    DC voltage vdc_ref, speed w_nom, frequency omega0, torque tau_nom,
    current p_nom/vg_nom).
    """

    def __init__(self, data, columns, bases, meta):
        self.data = data
        self.columns = list(columns)
        self.bases = dict(bases)
        self.meta = dict(meta)
        self._index = {c: i for i, c in enumerate(self.columns)}

    def column(self, name):
        return self.data[:, self._index[name]]

    @property
    def t(self):
        return self.column("t_s")

    def __len__(self):
        return self.data.shape[0]

    _PU_MAP = [
        ("ig_norm_A", "ig_norm_pu", "i_base"),
        ("v_dc_V", "v_dc_pu", "vdc_ref"),
        ("vg_norm_V", "vg_norm_pu", "vg_nom"),
        ("p_g_W", "p_g_pu", "p_nom"),
        ("q_g_var", "q_g_pu", "p_nom"),
        ("w1_rad_s", "w1_pu", "w_nom"),
        ("tau_m_Nm", "tau_m_pu", "tau_nom"),
        ("tau_shaft_Nm", "tau_shaft_pu", "tau_nom"),
        ("tau_l_Nm", "tau_l_pu", "tau_nom"),
        ("freq_rad_s", "freq_pu", "omega0"),
    ]

    def pu_columns(self):
        """(names, matrix) of the derived per-unit columns."""
        names = []
        cols = []
        for src, name, base in self._PU_MAP:
            if src in self._index:
                names.append(name)
                cols.append(self.column(src) / self.bases[base])
        return names, np.column_stack(cols)

    def to_csv(self, path, include_pu=True):
        """Write the trace; SI columns first, per-unit columns appended."""
        names = list(self.columns)
        data = self.data
        if include_pu:
            pu_names, pu = self.pu_columns()
            names = names + pu_names
            data = np.hstack([data, pu])
        header = ",".join(names)
        np.savetxt(path, data, delimiter=",", header=header, comments="")

    def finite(self):
        return bool(np.isfinite(self.data).all())


def trace_columns(n_masses):
    cols = ["t_s", "ig_alpha_A", "ig_beta_A", "ig_norm_A", "v_dc_V",
            "vg_alpha_V", "vg_beta_V", "vg_norm_V"]
    cols += [f"w{i + 1}_rad_s" for i in range(n_masses)]
    cols += ["tau_m_Nm", "tau_shaft_Nm", "p_g_W", "q_g_var", "m_norm",
             "freq_rad_s", "p_star_W", "q_star_var", "sync_energy",
             "tau_l_Nm"]
    return cols


# -- run assembly ---------------------------------------------------------------

def _steady_init(plant, gains, load_pu, v_inf0):
    """Analytic near-equilibrium: grid current, PCC voltage and PQ demand
    consistent with the initial load at nominal speed and DC voltage."""
    tau = load_pu * plant.tau_nom
    p_mech = tau * plant.w_nom
    z = plant.z_grid
    i = np.zeros(2)
    v_g = v_inf0.copy()
    p_t = p_mech
    q = 0.0
    for _ in range(120):
        v_g = v_inf0 - impedance_apply(z.r, z.x, i)
        p_t = (p_mech + plant.gdc * plant.vdc_ref ** 2
               + plant.rg * float(i @ i))
        q = cc.ac_voltage_kernel(float(v_g @ v_g), plant.vg_nom ** 2,
                                 gains.kp_v, p_t, plant.i_nom, False)
        ix, iy = cc.current_reference_kernel(p_t, q, v_g[0], v_g[1],
                                             plant.i_nom,
                                             0.01 * plant.vg_nom, i[0], i[1])
        i = 0.5 * i + 0.5 * np.array([ix, iy])
    return tau, p_t, q, i, v_g


def _initial_arrays(config):
    """Initial plant state vector and controller state vector."""
    plant = config.plant
    gains = config.gains
    script = config.scenario
    n = plant.n_masses

    v_inf0 = np.array([plant.vg_nom, 0.0])
    tau, p_t, _q, i0, vg0 = _steady_init(plant, gains, script.load_pu, v_inf0)

    y = np.zeros(3 + 2 * n)
    y[0:2] = i0
    y[2] = plant.vdc_ref
    # static twist: every joint carries the full through torque
    xs = np.zeros(n)
    for j in range(n - 2, -1, -1):
        k_j = plant.couplings[j][0]
        xs[j] = xs[j + 1] + tau / k_j
    for idx in range(n):
        y[3 + 2 * idx] = xs[idx]
        y[4 + 2 * idx] = plant.w_nom

    ctl = np.zeros(cc.CS_SIZE)
    m_total = plant.total_inertia
    ctl[cc.CS_XM] = -tau / gains.ki_m(m_total)
    ctl[cc.CS_XDC] = -p_t / (gains.ki_dc(plant.c_tot) * plant.vdc_ref)
    ctl[cc.CS_ISX] = i0[0]
    ctl[cc.CS_ISY] = i0[1]

    theta0 = math.atan2(vg0[1], vg0[0])
    ctl[cc.CS_VPX] = vg0[0]
    ctl[cc.CS_VPY] = vg0[1]
    ctl[cc.CS_THPLL] = theta0
    ctl[cc.CS_OMPLL] = plant.omega0

    # current-PI integral starts clean: the deviation-form virtual
    # impedance leaves nothing for it to hold at steady tracking

    # matching EMF consistent with the plant steady state (the virtual-
    # impedance output term vanishes at i = i*)
    vm = vg0 - impedance_apply(plant.rg, plant.omega0 * plant.lg, i0)
    theta_m = math.atan2(vm[1], vm[0])
    ctl[cc.CS_GAMR] = min(math.log(np.hypot(vm[0], vm[1]) / plant.vdc_ref),
                          GAMMA_MAX)
    ctl[cc.CS_THETA] = theta_m
    cm = math.cos(theta_m)
    sm = math.sin(theta_m)
    ctl[cc.CS_VFD] = cm * vg0[0] + sm * vg0[1]
    ctl[cc.CS_VFQ] = -sm * vg0[0] + cm * vg0[1]
    return y, ctl


def run_scenario(config):
    """Integrate one scenario; returns the SimTrace.

    Raises plant.DcCollapse or NonFinite with the failure time when the
    run aborts.
    """
    from .plant import DcCollapse

    plant = config.plant
    script = config.scenario
    tl = compile_timeline(script, plant, config.warmup,
                          snap_dt=config.dt_control)
    g = pack_gains(config.gains, plant, config.dt_control)
    y, ctl = _initial_arrays(config)
    pp, masses, ks, cs_damp = plant.pack()

    total = config.warmup + script.duration
    n_ctrl = int(round(total / config.dt_control))
    n_rec = (n_ctrl + config.record_decimation - 1) // config.record_decimation
    cols = trace_columns(plant.n_masses)
    rec = np.zeros((n_rec, len(cols)))

    ctrl_kind = 0 if script.control == "cascaded" else 1
    status, t_fail, rows = _run_loop(
        y, ctl, g, pp, masses, ks, cs_damp, ctrl_kind,
        config.dt_plant, config.n_substeps, n_ctrl, config.record_decimation,
        tl.seg_t, tl.seg_w, tl.seg_phi, tl.amp_t0, tl.amp_t1, tl.amp_fac,
        tl.pha_t0, tl.pha_t1, tl.pha_idx, tl.base_amp,
        tl.load_t, tl.load_tau, plant.w_nom, rec)

    if status == 1:
        raise DcCollapse(f"DC link collapsed at t = {t_fail:.6f} s")
    if status == 2:
        raise NonFinite(f"non-finite state at t = {t_fail:.6f} s",
                        t_fail=t_fail)

    bases = {"p_nom": plant.p_nom, "vg_nom": plant.vg_nom,
             "vdc_ref": plant.vdc_ref, "w_nom": plant.w_nom,
             "omega0": plant.omega0, "tau_nom": plant.tau_nom,
             "i_base": plant.p_nom / plant.vg_nom, "i_nom": plant.i_nom}
    meta = {"scenario": script.name, "grid": script.grid,
            "control": script.control, "warmup": config.warmup,
            "events": [(config.warmup + t, ev) for t, ev in script.events],
            "dt_sample": config.dt_control * config.record_decimation}
    return SimTrace(rec[:rows], cols, bases, meta)


# -- scenario library ------------------------------------------------------------

SCENARIO_NAMES = ("phase-jump", "3ph-drop", "freq-up", "freq-down",
                  "1ph-drop", "dip", "load-step")
GRIDS = ("stiff", "weak")
CONTROLS = ("cascaded", "matching")


def scenario_preset(name, grid="stiff", control="cascaded"):
    """The seven ride-through scenarios at their reference loads."""
    presets = {
        "phase-jump": dict(load_pu=-0.5, duration=5.0,
                           events=[(1.0, PhaseJump(60.0))]),
        "3ph-drop": dict(load_pu=-0.5, duration=9.0,
                         events=[(0.5, ThreePhaseDrop(0.0, 5.0))]),
        "freq-up": dict(load_pu=-0.5, duration=7.0,
                        events=[(1.0, FrequencyStep(1.0))]),
        "freq-down": dict(load_pu=-0.5, duration=7.0,
                          events=[(1.0, FrequencyStep(-1.0))]),
        "1ph-drop": dict(load_pu=0.95, duration=5.0,
                         events=[(1.0, SinglePhaseDrop(0))]),
        "dip": dict(load_pu=0.95, duration=5.0,
                    events=[(1.0, VoltageDip(0.5, 1.0))]),
        "load-step": dict(load_pu=-0.5, duration=7.0,
                          events=[(1.0, LoadStep(0.95))]),
    }
    if name not in presets:
        raise KeyError(f"unknown scenario {name!r}; "
                       f"expected one of {SCENARIO_NAMES}")
    spec = presets[name]
    return ScenarioScript(name=name, events=spec["events"],
                          duration=spec["duration"], grid=grid,
                          load_pu=spec["load_pu"], control=control)


def build_config(scenario="phase-jump", grid="stiff", control="cascaded",
                 plant=None, gains=None, **overrides):
    """Assemble a SimConfig from the preset library and defaults."""
    script = (scenario if isinstance(scenario, ScenarioScript)
              else scenario_preset(scenario, grid, control))
    if plant is None:
        plant = two_mass_params(grid=script.grid)
    if gains is None:
        gains = ControlGains()
    return SimConfig(plant=plant, gains=gains, scenario=script, **overrides)
