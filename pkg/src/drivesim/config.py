"""Flat sectioned key-value run configuration.

One file fully determines a run: plant constants, grid impedances, loop
tunings, integrator rates, and the scenario selection.  The format is
INI (configparser) with unit-suffixed keys and comment lines, so configs
diff cleanly and round-trip exactly: parse -> serialize -> parse yields
an identical in-memory configuration.
"""

import configparser
import hashlib
import io

from .cascade_control import ControlGains
from .frames import ComplexImpedance
from .plant import PlantParams
from .simulation import SimConfig, scenario_preset

__all__ = ["ConfigError", "default_config", "parse_config", "read_config",
           "serialize_config", "write_config", "config_hash", "make_sim_config"]


class ConfigError(ValueError):
    """Bad key, value, or structure in a run configuration."""


# schema: section -> key -> (type tag, comment)
_SCHEMA = {
    "plant": {
        "lg_h": ("float", "converter phase inductance, H"),
        "rg_ohm": ("float", "converter phase resistance, ohm"),
        "cdc_f": ("float", "DC-link capacitance, F"),
        "gdc_s": ("float", "DC-link conductance, S"),
        "masses_kgm2": ("floatlist", "shaft inertias, kg*m^2"),
        "coupling_k_nm_rad": ("floatlist", "joint stiffnesses, N*m/rad"),
        "coupling_c_nms_rad": ("floatlist", "joint dampings, N*m*s/rad"),
        "w_nom_rad_s": ("float", "nominal shaft speed, rad/s"),
        "vdc_ref_v": ("float", "nominal DC-link voltage, V"),
        "vg_nom_v": ("float", "nominal PCC voltage magnitude "
                              "(alpha-beta norm = line-to-line RMS), V"),
        "tau_nom_nm": ("float", "rated shaft torque, N*m"),
        "omega0_rad_s": ("float", "nominal grid frequency, rad/s"),
        "alpha_q": ("float", "current de-rating factor"),
        "alpha_v": ("float", "grid-code overvoltage factor"),
    },
    "grid": {
        "stiff_r_ohm": ("float", "stiff-grid Thevenin resistance, ohm"),
        "stiff_l_h": ("float", "stiff-grid Thevenin inductance, H"),
        "weak_r_ohm": ("float", "weak-grid Thevenin resistance, ohm"),
        "weak_l_h": ("float", "weak-grid Thevenin inductance, H"),
    },
    "gains": {
        "zeta_m": ("float", "speed-loop damping ratio"),
        "omega_m_rad_s": ("float", "speed-loop bandwidth, rad/s"),
        "zeta_dc": ("float", "DC-loop damping ratio"),
        "omega_dc_rad_s": ("float", "DC-loop bandwidth, rad/s"),
        "zeta_g": ("float", "current-loop damping ratio"),
        "omega_g_rad_s": ("float", "current-loop bandwidth, rad/s"),
        "kp_v_var_v2": ("float", "AC-voltage reactive gain, var/V^2"),
        "kappa_pll": ("float", "PLL synchronization gain, 1/s"),
        "kf": ("float", "matching synchronization gain"),
        "zv_r_ohm": ("float", "virtual impedance resistance, ohm"),
        "zv_l_h": ("float", "virtual impedance inductance, H"),
        "vff_source": ("str", "current-loop voltage feed-forward: "
                              "auto | measured | pll"),
        "pll_dc_coupled": ("bool", "PLL feed-forward from eta*v_dc"),
        "smooth_projection": ("bool", "tanh-blended reactive projection"),
        "matching_orthonormal": ("bool",
                                 "state-dependent matching gain"),
        "notch_f0_hz": ("float", "speed-feedback notch center, Hz "
                                 "(0 disables)"),
        "notch_depth": ("float", "notch depth, 0..1"),
        "notch_width_hz": ("float", "notch -3 dB width, Hz"),
    },
    "sim": {
        "dt_plant_s": ("float", "plant integration step, s"),
        "dt_control_s": ("float", "controller step, s (integer multiple "
                                  "of the plant step)"),
        "record_decimation": ("int", "record every k-th controller step"),
        "warmup_s": ("float", "settle interval before the first event, s"),
    },
    "run": {
        "scenario": ("str", "phase-jump | 3ph-drop | freq-up | freq-down | "
                            "1ph-drop | dip | load-step"),
        "grid": ("str", "stiff | weak"),
        "control": ("str", "cascaded | matching"),
    },
}


def default_config():
    """Nested dict of the shipped defaults (see plant presets)."""
    from .plant import two_mass_params, Z_STIFF, Z_WEAK

    p = two_mass_params()
    g = ControlGains()
    return {
        "plant": {
            "lg_h": p.lg, "rg_ohm": p.rg, "cdc_f": p.cdc, "gdc_s": p.gdc,
            "masses_kgm2": list(p.masses),
            "coupling_k_nm_rad": [k for k, _ in p.couplings],
            "coupling_c_nms_rad": [c for _, c in p.couplings],
            "w_nom_rad_s": p.w_nom, "vdc_ref_v": p.vdc_ref,
            "vg_nom_v": p.vg_nom, "tau_nom_nm": p.tau_nom,
            "omega0_rad_s": p.omega0, "alpha_q": p.alpha_q,
            "alpha_v": p.alpha_v,
        },
        "grid": {
            "stiff_r_ohm": Z_STIFF[0], "stiff_l_h": Z_STIFF[1],
            "weak_r_ohm": Z_WEAK[0], "weak_l_h": Z_WEAK[1],
        },
        "gains": {
            "zeta_m": g.zeta_m, "omega_m_rad_s": g.omega_m,
            "zeta_dc": g.zeta_dc, "omega_dc_rad_s": g.omega_dc,
            "zeta_g": g.zeta_g, "omega_g_rad_s": g.omega_g,
            "kp_v_var_v2": g.kp_v, "kappa_pll": g.kappa_pll, "kf": g.kf,
            "zv_r_ohm": g.zv_r, "zv_l_h": g.zv_l,
            "vff_source": "auto", "pll_dc_coupled": False,
            "smooth_projection": False, "matching_orthonormal": False,
            "notch_f0_hz": 0.0, "notch_depth": 1.0, "notch_width_hz": 2.0,
        },
        "sim": {
            "dt_plant_s": 5.0e-5, "dt_control_s": 1.0e-4,
            "record_decimation": 10, "warmup_s": 2.0,
        },
        "run": {
            "scenario": "phase-jump", "grid": "stiff", "control": "cascaded",
        },
    }


def _format_value(tag, value):
    if tag == "floatlist":
        return ", ".join(repr(float(v)) for v in value)
    if tag == "bool":
        return "true" if value else "false"
    if tag == "float":
        return repr(float(value))
    return str(value)


def _parse_value(tag, raw, section, key):
    try:
        if tag == "float":
            return float(raw)
        if tag == "int":
            return int(raw)
        if tag == "bool":
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if tag == "floatlist":
            return [float(x) for x in raw.split(",") if x.strip()]
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(
            f"[{section}] {key}: cannot parse {raw!r} as {tag}") from exc


def serialize_config(cfg):
    """Config dict to INI text with unit comments."""
    buf = io.StringIO()
    for section, keys in _SCHEMA.items():
        buf.write(f"[{section}]\n")
        for key, (tag, comment) in keys.items():
            buf.write(f"# {comment}\n")
            buf.write(f"{key} = {_format_value(tag, cfg[section][key])}\n")
        buf.write("\n")
    return buf.getvalue()


def parse_config(text):
    """INI text to a typed config dict; unknown keys are errors."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = default_config()
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            tag, _ = _SCHEMA[section][key]
            cfg[section][key] = _parse_value(tag, raw, section, key)
    return cfg


def read_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def write_config(path, cfg=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg or default_config()))


def config_hash(cfg):
    """sha256 of the canonical serialized form; platform-stable for
    identical configurations."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def make_sim_config(cfg, scenario=None, grid=None, control=None):
    """Build the executable SimConfig from a config dict, with optional
    scenario/grid/control overrides (CLI flags win over the [run] section).
    """
    run = cfg["run"]
    scenario = scenario or run["scenario"]
    grid = grid or run["grid"]
    control = control or run["control"]
    if grid not in ("stiff", "weak"):
        raise ConfigError(f"unknown grid {grid!r}")
    if control not in ("cascaded", "matching"):
        raise ConfigError(f"unknown control {control!r}")

    pc = cfg["plant"]
    gc = cfg["grid"]
    omega0 = pc["omega0_rad_s"]
    if grid == "stiff":
        z = ComplexImpedance.from_rl(gc["stiff_r_ohm"], gc["stiff_l_h"], omega0)
    else:
        z = ComplexImpedance.from_rl(gc["weak_r_ohm"], gc["weak_l_h"], omega0)
    ks = pc["coupling_k_nm_rad"]
    cs = pc["coupling_c_nms_rad"]
    if len(ks) != len(cs):
        raise ConfigError("coupling stiffness/damping lists differ in length")
    try:
        plant = PlantParams(
            lg=pc["lg_h"], rg=pc["rg_ohm"], cdc=pc["cdc_f"], gdc=pc["gdc_s"],
            masses=tuple(pc["masses_kgm2"]),
            couplings=tuple(zip(ks, cs)), z_grid=z,
            w_nom=pc["w_nom_rad_s"], vdc_ref=pc["vdc_ref_v"],
            vg_nom=pc["vg_nom_v"], tau_nom=pc["tau_nom_nm"], omega0=omega0,
            alpha_q=pc["alpha_q"], alpha_v=pc["alpha_v"])
    except ValueError as exc:
        raise ConfigError(f"[plant] {exc}") from exc

    gn = cfg["gains"]
    vff = gn["vff_source"]
    if vff not in ("auto", "measured", "pll"):
        raise ConfigError(f"vff_source must be auto|measured|pll, got {vff!r}")
    use_vpll = (grid == "weak") if vff == "auto" else (vff == "pll")
    notch = None
    if gn["notch_f0_hz"] > 0.0:
        notch = (gn["notch_f0_hz"], gn["notch_depth"], gn["notch_width_hz"])
    try:
        gains = ControlGains(
            zeta_m=gn["zeta_m"], omega_m=gn["omega_m_rad_s"],
            zeta_dc=gn["zeta_dc"], omega_dc=gn["omega_dc_rad_s"],
            zeta_g=gn["zeta_g"], omega_g=gn["omega_g_rad_s"],
            kp_v=gn["kp_v_var_v2"], kappa_pll=gn["kappa_pll"], kf=gn["kf"],
            zv_r=gn["zv_r_ohm"], zv_l=gn["zv_l_h"], notch=notch,
            use_vpll_ff=use_vpll, pll_dc_coupled=gn["pll_dc_coupled"],
            smooth_projection=gn["smooth_projection"],
            matching_orthonormal=gn["matching_orthonormal"])
    except ValueError as exc:
        raise ConfigError(f"[gains] {exc}") from exc

    sc = cfg["sim"]
    try:
        script = scenario_preset(scenario, grid=grid, control=control)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return SimConfig(plant=plant, gains=gains, scenario=script,
                         dt_plant=sc["dt_plant_s"],
                         dt_control=sc["dt_control_s"],
                         record_decimation=sc["record_decimation"],
                         warmup=sc["warmup_s"])
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}") from exc
