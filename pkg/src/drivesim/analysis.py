"""Small-signal analysis and trace metrics.

Three jobs:

* linearize the plant + speed-coupling loop around its synchronous
  equilibrium and evaluate the DC-node frequency response (the coupled
  case shows the shaft inertia as a huge effective capacitance at low
  frequency, with a transmission zero at the first torsional mode),
* provide the exact three-mass equivalent of the coupled system as an
  independent trajectory oracle,
* reduce traces to scalar metrics (extrema, settling times, steady P/Q,
  DC-bus second-harmonic content).

The linearization is numerical: central finite differences of the closed
loop right-hand side in per-unit-scaled coordinates, at a trim point
verified to residual < 1e-8 p.u.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit
from .cascade_control import dc_reference

__all__ = [
    "NoEquilibrium", "LinearModel", "linearize", "frequency_response",
    "trace_metrics", "settling_time", "second_harmonic_rms",
    "three_mass_equivalence_error", "dc_loop_coefficients",
]


class NoEquilibrium(RuntimeError):
    """Trim failed to reach the residual tolerance."""


@dataclass
class LinearModel:
    """State-space model dx = A x + B u, y = C x around an equilibrium."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    x0: np.ndarray
    u0: float
    labels: list
    residual: float


# -- closed speed-coupling loop in reduced (twist) coordinates -----------------
#
# z = [v_dc, x_m, delta_1..delta_{N-1}, w_1..w_N]; the input is a current
# injected into the DC node.  Angles appear only as joint twists, so the
# rigid rotation is factored out and the synchronous operating point is a
# true equilibrium.

def _coupling_rhs(z, u, plant, gains, coupled):
    n = plant.n_masses
    v = z[0]
    x_m = z[1]
    deltas = z[2:2 + n - 1]
    ws = z[2 + n - 1:]
    rho = plant.w_nom / plant.vdc_ref
    w_target = rho * v if coupled else plant.w_nom
    err = ws[0] - w_target
    m_total = plant.total_inertia
    tau_m = -gains.kp_m(m_total) * err - gains.ki_m(m_total) * x_m

    dz = np.empty_like(z)
    dz[0] = (-plant.gdc * v + u - tau_m * ws[0] / v) / plant.cdc
    dz[1] = err
    for j in range(n - 1):
        dz[2 + j] = ws[j] - ws[j + 1]
    for i in range(n):
        t = 0.0
        if i > 0:
            k, c = plant.couplings[i - 1]
            t += k * deltas[i - 1] + c * (ws[i - 1] - ws[i])
        if i < n - 1:
            k, c = plant.couplings[i]
            t -= k * deltas[i] + c * (ws[i] - ws[i + 1])
        if i == 0:
            t += tau_m
        dz[2 + n - 1 + i] = t / plant.masses[i]
    return dz


def _coupling_scales(plant):
    n = plant.n_masses
    return np.concatenate([
        [plant.vdc_ref, 1.0], np.ones(n - 1), plant.w_nom * np.ones(n)])


def _trim(plant, gains, coupled, tol=1e-8, max_iter=30):
    """Damped Newton to the synchronous equilibrium; the DC injection
    carries the conductance loss so the trim is exact."""
    n = plant.n_masses
    u0 = plant.gdc * plant.vdc_ref
    z = np.concatenate([
        [plant.vdc_ref, 0.0], np.zeros(n - 1), plant.w_nom * np.ones(n)])
    scales = _coupling_scales(plant)

    def residual_pu(zz):
        return float(np.max(np.abs(_coupling_rhs(zz, u0, plant, gains,
                                                 coupled)) / scales))

    res = residual_pu(z)
    it = 0
    while res > tol and it < max_iter:
        jac = _fd_jacobian(lambda zz: _coupling_rhs(zz, u0, plant, gains,
                                                    coupled), z, scales)
        f = _coupling_rhs(z, u0, plant, gains, coupled)
        step, *_ = np.linalg.lstsq(jac, -f, rcond=None)
        alpha = 1.0
        while alpha > 1e-6:
            cand = z + alpha * step
            if cand[0] > 0.0 and residual_pu(cand) < res:
                z = cand
                break
            alpha *= 0.5
        else:
            break
        res = residual_pu(z)
        it += 1
    if res > tol:
        raise NoEquilibrium(f"trim residual {res:.3e} p.u. above {tol:g}")
    return z, u0, res


def _fd_jacobian(f, z, scales, rel_step=1e-6):
    n = z.shape[0]
    f0 = f(z)
    jac = np.empty((f0.shape[0], n))
    for i in range(n):
        h = rel_step * scales[i]
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (f(zp) - f(zm)) / (2.0 * h)
    return jac


def linearize(plant, gains, coupled=True):
    """Linearize the DC node + speed-coupling loop.

    Input: current injected into the DC node; output: v_dc.  With
    ``coupled=False`` the speed loop regulates against the fixed nominal
    speed instead of the DC-derived one, so the injection sees the bare
    capacitor.  Raises NoEquilibrium when the trim fails.
    """
    z0, u0, res = _trim(plant, gains, coupled)
    scales = _coupling_scales(plant)
    a = _fd_jacobian(lambda z: _coupling_rhs(z, u0, plant, gains, coupled),
                     z0, scales)
    n = z0.shape[0]
    b = np.zeros((n, 1))
    du = 1e-6 * plant.i_nom if plant.i_nom > 0 else 1e-6
    b[:, 0] = (_coupling_rhs(z0, u0 + du, plant, gains, coupled)
               - _coupling_rhs(z0, u0 - du, plant, gains, coupled)) / (2 * du)
    c = np.zeros((1, n))
    c[0, 0] = 1.0
    nm = plant.n_masses
    labels = (["v_dc", "x_m"] + [f"delta_{j + 1}" for j in range(nm - 1)]
              + [f"w_{i + 1}" for i in range(nm)])
    return LinearModel(a=a, b=b, c=c, x0=z0, u0=u0, labels=labels,
                       residual=res)


def frequency_response(model, freqs_hz):
    """Gain (dB) and phase (deg) of C (jw I - A)^-1 B per frequency.

    A pole exactly on a requested frequency is reported as +inf gain.
    """
    n = model.a.shape[0]
    out = np.empty((len(freqs_hz), 2))
    eye = np.eye(n)
    for k, f in enumerate(freqs_hz):
        s = 2j * math.pi * f
        try:
            x = np.linalg.solve(s * eye - model.a, model.b)
            h = complex((model.c @ x)[0, 0])
            out[k, 0] = 20.0 * math.log10(abs(h)) if h != 0 else -math.inf
            out[k, 1] = math.degrees(math.atan2(h.imag, h.real))
        except np.linalg.LinAlgError:
            out[k, 0] = math.inf
            out[k, 1] = math.nan
    return out


def dc_loop_coefficients(plant, gains):
    """Small-signal coefficients of the DC loop in grid-frequency
    coordinates, assembled from the package's own control pieces under the
    ideal-current-loop assumption.

    Returns (measured_p, measured_i, expected_p, expected_i) where the
    expectations are kp_dc/eta^2 and ki_dc/eta^2.  ``measured_*`` are
    central finite differences of (c_tot/eta^2) * d(omega)/dt with respect
    to the PLL frequency and the DC integrator state.
    """
    eta = plant.eta
    c_tot = plant.c_tot
    kp = gains.kp_dc(c_tot)
    ki = gains.ki_dc(c_tot)
    p_m = 0.3 * plant.p_nom

    def omega_dot_scaled(omega, omega_pll, x_dc):
        v = omega / eta
        v_star = dc_reference(omega_pll, eta)
        p_star = (-kp * (v - v_star) - ki * x_dc) * plant.vdc_ref
        return (p_star - p_m) / omega   # = (c_tot/eta^2) * d(omega)/dt

    omega0 = plant.omega0
    x0 = -p_m / (ki * plant.vdc_ref)    # trim: p_star == p_m
    h_w = 1e-6 * omega0
    measured_p = -(omega_dot_scaled(omega0, omega0 + h_w, x0)
                   - omega_dot_scaled(omega0, omega0 - h_w, x0)) / (2 * h_w)
    h_x = 1e-6 * max(abs(x0), 1.0)
    measured_i = -(omega_dot_scaled(omega0, omega0, x0 + h_x)
                   - omega_dot_scaled(omega0, omega0, x0 - h_x)) / (2 * h_x)
    # measured_p is the coefficient on (omega - omega_pll), measured_i the
    # one on x_dc; Eq-form expectations below (the x_dc coefficient carries
    # one eta from theta - theta_pll = eta * x_dc)
    return -measured_p, measured_i / eta, -kp / eta ** 2, ki / eta ** 2


# -- three-mass equivalence oracle ---------------------------------------------

@njit
def _rhs_direct(y, out, mgx, mgy, vgx, vgy, tau_l,
                lg, rg, cdc, gdc, kp, ki, rho, masses, ks, cs):
    """Plant + continuous (unsaturated) speed-coupling PI.

    y = [igx, igy, v_dc, x_m, x_1, w_1, ..., x_N, w_N]
    """
    n = masses.shape[0]
    vdc = y[2]
    w1 = y[5]
    w_dc = rho * vdc
    err = w1 - w_dc
    tau_m = -kp * err - ki * y[3]
    out[0] = (-rg * y[0] + vgx - mgx * vdc) / lg
    out[1] = (-rg * y[1] + vgy - mgy * vdc) / lg
    out[2] = (-gdc * vdc + (mgx * y[0] + mgy * y[1]) - tau_m * w1 / vdc) / cdc
    out[3] = err
    for i in range(n):
        out[4 + 2 * i] = y[5 + 2 * i]
        t = 0.0
        if i > 0:
            t -= (ks[i - 1] * (y[4 + 2 * i] - y[4 + 2 * (i - 1)])
                  + cs[i - 1] * (y[5 + 2 * i] - y[5 + 2 * (i - 1)]))
        if i < n - 1:
            t -= (ks[i] * (y[4 + 2 * i] - y[4 + 2 * (i + 1)])
                  + cs[i] * (y[5 + 2 * i] - y[5 + 2 * (i + 1)]))
        if i == 0:
            t += tau_m
        if i == n - 1:
            t -= tau_l
        out[5 + 2 * i] = t / masses[i]


@njit
def _rhs_three_mass(y, out, mgx, mgy, vgx, vgy, tau_l,
                    lg, rg, cdc, gdc, kp, ki, rho, masses, ks, cs):
    """The equivalent chain with the DC link as an extra rotating mass.

    y = [igx, igy, x_0, w_dc, x_1, w_1, ..., x_N, w_N].  The controller
    spring/damper (ki, kp) acts unscaled on mass 1 (it is literally the
    motor torque), while the reaction on the DC mass carries the power-
    consistency factor w_1/w_dc; the DC conductance appears as viscous
    drag on the DC mass.
    """
    n = masses.shape[0]
    w_dc = y[3]
    w1 = y[5]
    x_m = y[4] - y[2]           # x_1 - x_0
    sig = 1.0 / rho             # vdc_ref / w_nom
    m_dc = sig * sig * cdc
    g_eq = sig * sig * gdc
    coupl = kp * (w1 - w_dc) + ki * x_m      # = -tau_m
    out[0] = (-rg * y[0] + vgx - sig * mgx * w_dc) / lg
    out[1] = (-rg * y[1] + vgy - sig * mgy * w_dc) / lg
    out[2] = w_dc
    out[3] = ((w1 / w_dc) * coupl - g_eq * w_dc
              + sig * (mgx * y[0] + mgy * y[1])) / m_dc
    for i in range(n):
        out[4 + 2 * i] = y[5 + 2 * i]
        t = 0.0
        if i > 0:
            t -= (ks[i - 1] * (y[4 + 2 * i] - y[4 + 2 * (i - 1)])
                  + cs[i - 1] * (y[5 + 2 * i] - y[5 + 2 * (i - 1)]))
        if i < n - 1:
            t -= (ks[i] * (y[4 + 2 * i] - y[4 + 2 * (i + 1)])
                  + cs[i] * (y[5 + 2 * i] - y[5 + 2 * (i + 1)]))
        if i == 0:
            t -= coupl
        if i == n - 1:
            t -= tau_l
        out[5 + 2 * i] = t / masses[i]


@njit
def _integrate_pair(y_a, y_b, dt, mgx, mgy, vg_amp, omega0, tau_l,
                    lg, rg, cdc, gdc, kp, ki, rho, masses, ks, cs,
                    out_a, out_b):
    """RK4 both models with identical steps and the same rotating source;
    records each state vector every step into out_a/out_b."""
    nsteps = out_a.shape[0] - 1
    na = y_a.shape[0]
    k1 = np.empty(na)
    k2 = np.empty(na)
    k3 = np.empty(na)
    k4 = np.empty(na)
    tmp = np.empty(na)
    out_a[0, :] = y_a
    out_b[0, :] = y_b
    for step in range(nsteps):
        t = step * dt
        for model in range(2):
            y = y_a if model == 0 else y_b
            for stage in range(4):
                if stage == 0:
                    ts = t
                    src = y
                    dst = k1
                elif stage == 1:
                    ts = t + 0.5 * dt
                    for i in range(na):
                        tmp[i] = y[i] + 0.5 * dt * k1[i]
                    src = tmp
                    dst = k2
                elif stage == 2:
                    ts = t + 0.5 * dt
                    for i in range(na):
                        tmp[i] = y[i] + 0.5 * dt * k2[i]
                    src = tmp
                    dst = k3
                else:
                    ts = t + dt
                    for i in range(na):
                        tmp[i] = y[i] + dt * k3[i]
                    src = tmp
                    dst = k4
                vgx = vg_amp * math.cos(omega0 * ts)
                vgy = vg_amp * math.sin(omega0 * ts)
                if model == 0:
                    _rhs_direct(src, dst, mgx, mgy, vgx, vgy, tau_l,
                                lg, rg, cdc, gdc, kp, ki, rho, masses, ks, cs)
                else:
                    _rhs_three_mass(src, dst, mgx, mgy, vgx, vgy, tau_l,
                                    lg, rg, cdc, gdc, kp, ki, rho,
                                    masses, ks, cs)
            for i in range(na):
                y[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i]
                                      + k4[i])
        out_a[step + 1, :] = y_a
        out_b[step + 1, :] = y_b


def three_mass_equivalence_error(plant, gains, t_end=5.0, dt=1e-4,
                                 kick=0.02, tau_l_pu=0.2, m_g=(0.3, 0.1)):
    """Integrate the coupled loop and its three-mass equivalent from a
    kicked initial condition; returns the relative sup-norm trajectory
    mismatch (normalized per state by its own trajectory amplitude).
    """
    n = plant.n_masses
    rho = plant.w_nom / plant.vdc_ref
    m_total = plant.total_inertia
    kp = gains.kp_m(m_total)
    ki = gains.ki_m(m_total)
    _, masses, ks, cs = plant.pack()

    y_a = np.zeros(4 + 2 * n)
    y_a[0] = 0.1 * plant.i_nom
    y_a[1] = -0.05 * plant.i_nom
    y_a[2] = plant.vdc_ref * (1.0 + kick)
    y_a[3] = 0.05                          # x_m
    for i in range(n):
        y_a[4 + 2 * i] = 0.002 * i
        y_a[5 + 2 * i] = plant.w_nom * (1.0 + kick * (-1.0) ** i)

    # map to the three-mass coordinates: x_0 = x_1 - x_m, w_dc = rho*v_dc
    y_b = y_a.copy()
    y_b[2] = y_a[4] - y_a[3]
    y_b[3] = rho * y_a[2]

    nsteps = int(round(t_end / dt))
    out_a = np.empty((nsteps + 1, y_a.shape[0]))
    out_b = np.empty((nsteps + 1, y_b.shape[0]))
    _integrate_pair(y_a, y_b, dt, m_g[0], m_g[1], plant.vg_nom,
                    plant.omega0, tau_l_pu * plant.tau_nom,
                    plant.lg, plant.rg, plant.cdc, plant.gdc, kp, ki, rho,
                    masses, ks, cs, out_a, out_b)

    # map the equivalent trajectory back to the direct coordinates
    back = out_b.copy()
    back[:, 2] = out_b[:, 3] / rho           # v_dc
    back[:, 3] = out_b[:, 4] - out_b[:, 2]   # x_m
    err = np.abs(out_a - back)
    scale = np.maximum(np.max(np.abs(out_a), axis=0), 1e-30)
    return float(np.max(err / scale))


# -- trace metrics ---------------------------------------------------------------

def settling_time(t, y, t_event, band_frac=0.02, steady_window=0.2):
    """Time after ``t_event`` until y stays inside +-band of its final
    value, the band being ``band_frac`` of the event-induced step (with a
    small floor so a no-step signal settles immediately).
    """
    sel = t >= t_event
    if not np.any(sel):
        return 0.0
    ts = t[sel]
    ys = y[sel]
    n_steady = max(1, int(len(ys) * steady_window))
    steady = float(np.mean(ys[-n_steady:]))
    step = steady - float(ys[0])
    band = max(band_frac * abs(step), 1e-12 + 1e-6 * abs(steady))
    outside = np.abs(ys - steady) > band
    if not np.any(outside):
        return 0.0
    last = np.max(np.nonzero(outside)[0])
    if last + 1 >= len(ts):
        return float(ts[-1] - t_event)
    return float(ts[last + 1] - t_event)


def second_harmonic_rms(t, y, f0):
    """RMS of the 2*f0 component over an integer number of cycles at the
    end of the window (single-bin DFT)."""
    f2 = 2.0 * f0
    span = t[-1] - t[0]
    n_cyc = math.floor(span * f2)
    if n_cyc < 1:
        return 0.0
    t_start = t[-1] - n_cyc / f2
    sel = t >= t_start - 1e-12
    ts = t[sel]
    ys = y[sel] - np.mean(y[sel])
    ph = np.exp(-2j * math.pi * f2 * ts)
    amp = 2.0 * abs(np.sum(ys * ph)) / len(ys)
    return float(amp / math.sqrt(2.0))


def trace_metrics(trace):
    """Flat scalar metrics of a run: extrema of the limited quantities,
    DC overshoot, settling times after each event, pre/post steady P and
    Q, and the DC-bus second-harmonic RMS after the first event."""
    t = trace.t
    vdc = trace.column("v_dc_V")
    vdc_ref = trace.bases["vdc_ref"]
    f0 = trace.bases["omega0"] / (2.0 * math.pi)
    metrics = {
        "max_ig_norm_A": float(np.max(trace.column("ig_norm_A"))),
        "max_m_norm": float(np.max(trace.column("m_norm"))),
        "vdc_min_V": float(np.min(vdc)),
        "vdc_max_V": float(np.max(vdc)),
        "vdc_overshoot_pct": float(100.0 * (np.max(vdc) - vdc_ref) / vdc_ref),
        "vg_min_V": float(np.min(trace.column("vg_norm_V"))),
        "vg_max_V": float(np.max(trace.column("vg_norm_V"))),
        "finite": float(trace.finite()),
    }
    events = trace.meta.get("events", [])
    p = trace.column("p_g_W")
    q = trace.column("q_g_var")
    if events:
        t_first = events[0][0]
        pre = (t > t_first - 0.5) & (t < t_first)
        if np.any(pre):
            metrics["p_steady_pre_W"] = float(np.mean(p[pre]))
            metrics["q_steady_pre_var"] = float(np.mean(q[pre]))
        for k, (t_ev, _ev) in enumerate(events):
            metrics[f"settle_vdc_{k}_s"] = settling_time(t, vdc, t_ev)
        post = t >= t_first
        metrics["vdc_2h_rms_V"] = second_harmonic_rms(t[post], vdc[post], f0)
    n_tail = max(1, int(0.1 * len(t)))
    metrics["p_steady_post_W"] = float(np.mean(p[-n_tail:]))
    metrics["q_steady_post_var"] = float(np.mean(q[-n_tail:]))
    return metrics
