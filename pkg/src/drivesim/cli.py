"""Operator command line.

Subcommands:

* ``simulate`` — one scenario x grid x controller run: trace CSV, metrics
  record, manifest, plot script.
* ``sweep`` — the full scenario grid (or a filtered subset) across a
  worker pool, with a comparison table and a pass/fail summary of the
  built-in limit assertions.
* ``bode`` — DC-node frequency response of the coupled and uncoupled
  speed loop, as CSV plus a plot script.
* ``write-config`` — emit the default configuration file.

Exit codes: 0 ok, 1 runtime failure (aborted run, failed invariant),
2 usage or configuration error.
"""

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import NoEquilibrium, frequency_response, linearize, trace_metrics
from .config import (ConfigError, config_hash, default_config,
                     make_sim_config, read_config, write_config)
from .frames import MOD_LIMIT
from .plant import DcCollapse
from .simulation import (CONTROLS, GRIDS, SCENARIO_NAMES, SimulationError,
                         run_scenario)

_RUNS_CHECKS = ("finite", "current_limit", "modulation_limit", "vdc_envelope")


def run_checks(trace):
    """Built-in limit assertions evaluated on every recorded sample."""
    i_nom = trace.bases["i_nom"]
    vdc_ref = trace.bases["vdc_ref"]
    vdc = trace.column("v_dc_V")
    return {
        "finite": trace.finite(),
        "current_limit": float(np.max(trace.column("ig_norm_A")))
        <= 1.02 * i_nom,
        "modulation_limit": float(np.max(trace.column("m_norm")))
        <= MOD_LIMIT + 1e-12,
        "vdc_envelope": bool(0.7 * vdc_ref <= np.min(vdc)
                             and np.max(vdc) <= 1.3 * vdc_ref),
    }


def write_metrics(path, metrics):
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(metrics):
            fh.write(f"{key} = {metrics[key]:.9g}\n")


def write_manifest(path, cfg, scenario, grid, control, outputs, runtime,
                   checks):
    manifest = {
        "config_hash": config_hash(cfg),
        "version": __version__,
        "scenario": scenario,
        "grid": grid,
        "control": control,
        "outputs": outputs,
        "runtime_s": round(runtime, 3),
        "checks": checks,
        "passed": all(checks.values()),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


_TRACE_PLOT = """\
#!/usr/bin/env python3
\"\"\"Plot the simulation trace written next to this script.\"\"\"
import csv
import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else "trace.csv"
with open(path) as fh:
    names = fh.readline().strip().split(",")
data = np.loadtxt(path, delimiter=",", skiprows=1)
col = {n: data[:, i] for i, n in enumerate(names)}

panels = [
    ("v_dc_pu", "DC-link voltage [pu]"),
    ("ig_norm_pu", "current magnitude [pu]"),
    ("p_g_pu", "active power [pu]"),
    ("q_g_pu", "reactive power [pu]"),
    ("w1_pu", "shaft speed w1 [pu]"),
    ("tau_shaft_pu", "inner-shaft torque [pu]"),
    ("m_norm", "modulation magnitude"),
    ("freq_pu", "frequency estimate [pu]"),
]
fig, axes = plt.subplots(4, 2, figsize=(11, 9), sharex=True)
for ax, (name, label) in zip(axes.flat, panels):
    ax.plot(col["t_s"], col[name], lw=0.8)
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
for ax in axes[-1]:
    ax.set_xlabel("t [s]")
fig.tight_layout()
fig.savefig(path.replace(".csv", ".png"), dpi=150)
print("wrote", path.replace(".csv", ".png"))
"""

_BODE_PLOT = """\
#!/usr/bin/env python3
\"\"\"Plot the DC-node frequency responses written next to this script.\"\"\"
import matplotlib.pyplot as plt
import numpy as np

fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
for name, label in (("bode_coupled.csv", "coupled"),
                    ("bode_uncoupled.csv", "uncoupled")):
    try:
        data = np.loadtxt(name, delimiter=",", skiprows=1)
    except OSError:
        continue
    ax1.semilogx(data[:, 0], data[:, 1], label=label)
    ax2.semilogx(data[:, 0], data[:, 2], label=label)
ax1.set_ylabel("gain [dB]")
ax2.set_ylabel("phase [deg]")
ax2.set_xlabel("frequency [Hz]")
for ax in (ax1, ax2):
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
fig.tight_layout()
fig.savefig("bode.png", dpi=150)
print("wrote bode.png")
"""


def _load_config(path):
    if path is None:
        return default_config()
    return read_config(path)


def _run_single(cfg, scenario, grid, control, outdir):
    """Execute one run and write its artifacts; returns (manifest, metrics)."""
    sim_cfg = make_sim_config(cfg, scenario, grid, control)
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    trace = run_scenario(sim_cfg)
    runtime = time.perf_counter() - t0
    trace_path = os.path.join(outdir, "trace.csv")
    trace.to_csv(trace_path)
    metrics = trace_metrics(trace)
    metrics_path = os.path.join(outdir, "metrics.txt")
    write_metrics(metrics_path, metrics)
    plot_path = os.path.join(outdir, "plot_trace.py")
    with open(plot_path, "w", encoding="utf-8") as fh:
        fh.write(_TRACE_PLOT)
    checks = run_checks(trace)
    manifest = write_manifest(
        os.path.join(outdir, "manifest.json"), cfg, scenario, grid, control,
        {"trace": trace_path, "metrics": metrics_path, "plot": plot_path},
        runtime, checks)
    return manifest, metrics


def cmd_simulate(args):
    try:
        cfg = _load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = args.out or os.path.join(
        "runs", f"{args.scenario}_{args.grid}_{args.control}")
    try:
        manifest, _ = _run_single(cfg, args.scenario, args.grid,
                                  args.control, outdir)
    except (DcCollapse, SimulationError) as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1
    status = "ok" if manifest["passed"] else "LIMIT VIOLATION"
    print(f"{args.scenario} / {args.grid} / {args.control}: {status} "
          f"({manifest['runtime_s']} s) -> {outdir}")
    return 0 if manifest["passed"] else 1


def _sweep_worker(packed):
    """Runs in a pool worker; returns a result row dict."""
    cfg, scenario, grid, control, outdir = packed
    try:
        manifest, metrics = _run_single(cfg, scenario, grid, control, outdir)
        return {"key": (scenario, grid, control), "error": None,
                "manifest": manifest, "metrics": metrics}
    except (DcCollapse, SimulationError, ConfigError) as exc:
        return {"key": (scenario, grid, control), "error": str(exc),
                "manifest": None, "metrics": None}


def cmd_sweep(args):
    try:
        cfg = _load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    controls = [args.only] if args.only else list(CONTROLS)
    grids = [args.grid] if args.grid else list(GRIDS)
    jobs = []
    for scenario in SCENARIO_NAMES:
        for grid in grids:
            for control in controls:
                outdir = os.path.join(args.out,
                                      f"{scenario}_{grid}_{control}")
                jobs.append((cfg, scenario, grid, control, outdir))
    if args.dry_run:
        for _, scenario, grid, control, outdir in jobs:
            print(f"would run {scenario} / {grid} / {control} -> {outdir}")
        print(f"{len(jobs)} runs planned")
        return 0

    t0 = time.perf_counter()
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    elapsed = time.perf_counter() - t0

    header = (f"{'scenario':<11} {'grid':<6} {'control':<9} "
              f"{'ig max[pu]':>10} {'m max':>7} {'vdc[pu]':>15} "
              f"{'settle[s]':>9}  status")
    print(header)
    print("-" * len(header))
    failures = 0
    for res in results:
        scenario, grid, control = res["key"]
        if res["error"] is not None:
            failures += 1
            print(f"{scenario:<11} {grid:<6} {control:<9} "
                  f"{'-':>10} {'-':>7} {'-':>15} {'-':>9}  "
                  f"ABORT: {res['error']}")
            continue
        man = res["manifest"]
        met = res["metrics"]
        i_nom_pu = met["max_ig_norm_A"] / _i_nom_of(cfg)
        vdc_lo = met["vdc_min_V"] / cfg["plant"]["vdc_ref_v"]
        vdc_hi = met["vdc_max_V"] / cfg["plant"]["vdc_ref_v"]
        settle = met.get("settle_vdc_0_s", 0.0)
        ok = man["passed"]
        failures += 0 if ok else 1
        print(f"{scenario:<11} {grid:<6} {control:<9} "
              f"{i_nom_pu:>10.3f} {met['max_m_norm']:>7.4f} "
              f"{vdc_lo:>7.3f}/{vdc_hi:<7.3f} {settle:>9.3f}  "
              f"{'pass' if ok else 'FAIL ' + _failed_names(man['checks'])}")
    print(f"\n{len(results)} runs, {failures} failed, {elapsed:.1f} s")
    return 1 if failures else 0


def _i_nom_of(cfg):
    pc = cfg["plant"]
    p_nom = pc["tau_nom_nm"] * pc["w_nom_rad_s"]
    return pc["alpha_q"] * p_nom / pc["vg_nom_v"]


def _failed_names(checks):
    return ",".join(name for name in _RUNS_CHECKS if not checks[name])


def cmd_bode(args):
    try:
        cfg = _load_config(args.config)
        sim_cfg = make_sim_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    freqs = np.logspace(math.log10(args.fmin), math.log10(args.fmax),
                        args.points)
    cases = {"on": (True,), "off": (False,), "both": (True, False)}[
        args.coupling]
    for coupled in cases:
        try:
            model = linearize(sim_cfg.plant, sim_cfg.gains, coupled=coupled)
        except NoEquilibrium as exc:
            print(f"no equilibrium: {exc}", file=sys.stderr)
            return 1
        resp = frequency_response(model, freqs)
        name = "bode_coupled.csv" if coupled else "bode_uncoupled.csv"
        path = os.path.join(args.out, name)
        data = np.column_stack([freqs, resp])
        np.savetxt(path, data, delimiter=",",
                   header="freq_hz,gain_db,phase_deg", comments="")
        print(f"wrote {path} (trim residual {model.residual:.2e} p.u.)")
    with open(os.path.join(args.out, "plot_bode.py"), "w",
              encoding="utf-8") as fh:
        fh.write(_BODE_PLOT)
    return 0


def cmd_write_config(args):
    write_config(args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="drivesim",
        description="grid-connected drive simulator: inertia coupling with "
                    "cascaded-PI or machine-matching grid-side control")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--scenario", choices=SCENARIO_NAMES, required=True)
    sim.add_argument("--grid", choices=GRIDS, default="stiff")
    sim.add_argument("--control", choices=CONTROLS, default="cascaded")
    sim.add_argument("--config", help="run configuration file")
    sim.add_argument("--out", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    swp = sub.add_parser("sweep", help="run the full scenario grid")
    swp.add_argument("--only", choices=CONTROLS,
                     help="restrict to one controller")
    swp.add_argument("--grid", choices=GRIDS,
                     help="restrict to one grid strength")
    swp.add_argument("--config", help="run configuration file")
    swp.add_argument("--out", default="runs", help="output root directory")
    swp.add_argument("--workers", type=int,
                     default=min(4, os.cpu_count() or 1))
    swp.add_argument("--dry-run", action="store_true",
                     help="print planned runs, execute none")
    swp.set_defaults(func=cmd_sweep)

    bod = sub.add_parser("bode", help="DC-node frequency response")
    bod.add_argument("--coupling", choices=("on", "off", "both"),
                     default="both")
    bod.add_argument("--fmin", type=float, default=0.01)
    bod.add_argument("--fmax", type=float, default=100.0)
    bod.add_argument("--points", type=int, default=200)
    bod.add_argument("--config", help="run configuration file")
    bod.add_argument("--out", default="bode", help="output directory")
    bod.set_defaults(func=cmd_bode)

    wcf = sub.add_parser("write-config", help="emit the default config file")
    wcf.add_argument("--out", default="drivesim.cfg")
    wcf.set_defaults(func=cmd_write_config)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
