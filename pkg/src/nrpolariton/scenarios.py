"""Configuration parsing, scenario presets, and CSV emission.

Config files are line-oriented ``key = value`` text with ``#`` comments.
Physical quantities carry explicit unit suffixes in their key names
(_mhz, _us). Scenario runners return CSV payloads as strings keyed by
output filename, so callers (CLI, HTTP service) decide where bytes land.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, fields, replace
from importlib import resources

import numpy as np

from . import atomic, dynamics, linear_response

SCENARIOS = (
    "spectrum", "sweep2d", "isolation", "saturation", "g2", "fit", "cooperativity",
)

PRESET_NAMES = ("fig1", "fig2", "fig3b", "fig3cde", "fig4")


class ConfigError(Exception):
    pass


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario: str | None = None
    # linear-response parameters
    kappa_mhz: float | None = None
    kappa1_mhz: float | None = None
    kappa2_mhz: float | None = None
    gamma_mhz: float | None = None
    delta_ac_mhz: float = 0.0
    c_plus: float | None = None
    c_minus: float | None = None
    # atomic-structure parameters
    g0_mhz: float | None = None
    n_atoms: float | None = None
    populations: tuple[float, ...] | None = None
    resonant_fprime: int = 3
    pump_target_m: int | None = None
    pump_fidelity: float = 1.0
    # quantum-dynamics parameters
    sim_n_atoms: int = 2
    n_max: int = 3
    input_flux: float = 1e-3
    flux_min: float | None = None
    flux_max: float | None = None
    flux_points: int | None = None
    delta_mhz: float = 0.0
    delta_ac_plus_mhz: float | None = None
    delta_ac_minus_mhz: float | None = None
    # grids
    delta_min_mhz: float | None = None
    delta_max_mhz: float | None = None
    delta_points: int | None = None
    delta_ac_min_mhz: float | None = None
    delta_ac_max_mhz: float | None = None
    delta_ac_points: int | None = None
    tau_max_us: float | None = None
    tau_points: int | None = None
    # isolation-vs-cooperativity grid
    c_list: tuple[float, ...] | None = None
    # fit inputs
    fit_free: tuple[str, ...] | None = None
    fit_branch: str = "+"
    input_csv: str | None = None


def _parse_float(text: str) -> float:
    return float(text)


def _parse_int(text: str) -> int:
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _parse_str(text: str) -> str:
    return text


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x.strip()) for x in text.split(","))


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(","))


_PARSERS = {
    "scenario": _parse_str,
    "kappa_mhz": _parse_float,
    "kappa1_mhz": _parse_float,
    "kappa2_mhz": _parse_float,
    "gamma_mhz": _parse_float,
    "delta_ac_mhz": _parse_float,
    "c_plus": _parse_float,
    "c_minus": _parse_float,
    "g0_mhz": _parse_float,
    "n_atoms": _parse_float,
    "populations": _parse_float_list,
    "resonant_fprime": _parse_int,
    "pump_target_m": _parse_int,
    "pump_fidelity": _parse_float,
    "sim_n_atoms": _parse_int,
    "n_max": _parse_int,
    "input_flux": _parse_float,
    "flux_min": _parse_float,
    "flux_max": _parse_float,
    "flux_points": _parse_int,
    "delta_mhz": _parse_float,
    "delta_ac_plus_mhz": _parse_float,
    "delta_ac_minus_mhz": _parse_float,
    "delta_min_mhz": _parse_float,
    "delta_max_mhz": _parse_float,
    "delta_points": _parse_int,
    "delta_ac_min_mhz": _parse_float,
    "delta_ac_max_mhz": _parse_float,
    "delta_ac_points": _parse_int,
    "tau_max_us": _parse_float,
    "tau_points": _parse_int,
    "c_list": _parse_float_list,
    "fit_free": _parse_str_list,
    "fit_branch": _parse_str,
    "input_csv": _parse_str,
}


def _validate(config: RunConfig) -> list[str]:
    """Collect every range violation (not just the first)."""
    problems = []
    for name in ("kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz",
                 "g0_mhz", "input_flux"):
        v = getattr(config, name)
        if v is not None and v <= 0:
            problems.append(f"{name} must be positive, got {v}")
    for name in ("c_plus", "c_minus", "n_atoms"):
        v = getattr(config, name)
        if v is not None and v < 0:
            problems.append(f"{name} must be non-negative, got {v}")
    if config.scenario is not None and config.scenario not in SCENARIOS:
        problems.append(
            f"unknown scenario {config.scenario!r}; choose from {', '.join(SCENARIOS)}"
        )
    if config.populations is not None:
        ps = config.populations
        if len(ps) != 9:
            problems.append(f"populations needs 9 entries, got {len(ps)}")
        else:
            if any(p < 0 for p in ps):
                problems.append("populations must be non-negative")
            total = sum(ps)
            if abs(total - 1.0) > 1e-12:
                problems.append(f"populations sum to {total!r}, expected 1")
    if config.resonant_fprime not in atomic.EXCITED_F:
        problems.append(
            f"resonant_fprime must be one of {atomic.EXCITED_F}, "
            f"got {config.resonant_fprime}"
        )
    if not 0.0 <= config.pump_fidelity <= 1.0:
        problems.append(f"pump_fidelity must lie in [0, 1], got {config.pump_fidelity}")
    if config.pump_target_m is not None and abs(config.pump_target_m) > 4:
        problems.append(f"pump_target_m must lie in -4..4, got {config.pump_target_m}")
    if config.sim_n_atoms < 0:
        problems.append(f"sim_n_atoms must be non-negative, got {config.sim_n_atoms}")
    if config.n_max < 1:
        problems.append(f"n_max must be at least 1, got {config.n_max}")
    for lo, hi, n in (
        ("delta_min_mhz", "delta_max_mhz", "delta_points"),
        ("delta_ac_min_mhz", "delta_ac_max_mhz", "delta_ac_points"),
        ("flux_min", "flux_max", "flux_points"),
    ):
        vlo, vhi, vn = getattr(config, lo), getattr(config, hi), getattr(config, n)
        if vlo is not None and vhi is not None and vlo >= vhi:
            problems.append(f"{lo} must be below {hi} ({vlo} >= {vhi})")
        if vn is not None and vn < 1:
            problems.append(f"{n} must be at least 1, got {vn}")
    if config.tau_max_us is not None and config.tau_max_us <= 0:
        problems.append(f"tau_max_us must be positive, got {config.tau_max_us}")
    if config.tau_points is not None and config.tau_points < 2:
        problems.append(f"tau_points must be at least 2, got {config.tau_points}")
    if config.fit_branch not in ("+", "-"):
        problems.append(f"fit_branch must be '+' or '-', got {config.fit_branch!r}")
    if config.fit_free is not None:
        for nm in config.fit_free:
            if nm not in linear_response.FITTABLE:
                problems.append(f"fit_free contains unknown parameter {nm!r}")
    return problems


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    """Parse and validate a key = value configuration."""
    values: dict[str, object] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{origin}:{lineno}: expected 'key = value'")
            continue
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            errors.append(f"{origin}:{lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"{origin}:{lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _PARSERS[key](val)
        except ValueError as exc:
            errors.append(f"{origin}:{lineno}: bad value for {key}: {exc}")
    if errors:
        raise ConfigError("; ".join(errors))
    config = RunConfig(**values)
    problems = _validate(config)
    if problems:
        raise ConfigError(f"{origin}: " + "; ".join(problems))
    return config


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse(serialize(parse(t))) == parse(t)."""
    lines = []
    defaults = RunConfig()
    for f in fields(RunConfig):
        v = getattr(config, f.name)
        if v is None:
            continue
        if v == getattr(defaults, f.name) and f.default is not None:
            # still emit explicit values identical to defaults: cheap and
            # keeps the snapshot self-contained
            pass
        if isinstance(v, tuple):
            rendered = ", ".join(_fmt(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            rendered = _fmt(v)
        else:
            rendered = str(v)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply --set key=value overrides on top of a parsed config."""
    updates = {}
    errors = []
    for key, val in overrides.items():
        if key not in _PARSERS:
            errors.append(f"unknown key {key!r}")
            continue
        try:
            updates[key] = _PARSERS[key](val)
        except ValueError as exc:
            errors.append(f"bad value for {key}: {exc}")
    if errors:
        raise ConfigError("; ".join(errors))
    config = replace(config, **updates)
    problems = _validate(config)
    if problems:
        raise ConfigError("; ".join(problems))
    return config


def load_preset(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return resources.files("nrpolariton.presets").joinpath(f"{name}.cfg").read_text()


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    """12 significant digits, locale-independent; infinities as 'inf'."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


def render_csv(header: list[str], rows) -> str:
    """Fixed column order, LF line endings, 12 significant digits."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(out) + "\n"


def emit_csv(content: str, path) -> None:
    from pathlib import Path

    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="\n") as fh:
            fh.write(content)
    except OSError as exc:
        raise ScenarioError(f"cannot write {p}: {exc}") from exc


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    scenario: str
    config_hash: str
    wall_time_s: float
    files: tuple[str, ...]


@dataclass(frozen=True)
class RunResult:
    record: RunRecord
    files: dict[str, str]   # filename -> CSV payload


def _require(config: RunConfig, *names: str):
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        raise ScenarioError(f"config is missing required keys: {', '.join(missing)}")


def _system_params(config: RunConfig) -> linear_response.SystemParams:
    _require(config, "kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz",
             "c_plus", "c_minus")
    return linear_response.SystemParams(
        kappa_mhz=config.kappa_mhz,
        kappa1_mhz=config.kappa1_mhz,
        kappa2_mhz=config.kappa2_mhz,
        gamma_mhz=config.gamma_mhz,
        delta_ac_mhz=config.delta_ac_mhz,
        c_plus=config.c_plus,
        c_minus=config.c_minus,
    )


def _delta_grid(config: RunConfig) -> np.ndarray:
    _require(config, "delta_min_mhz", "delta_max_mhz", "delta_points")
    return np.linspace(config.delta_min_mhz, config.delta_max_mhz, config.delta_points)


def _populations(config: RunConfig) -> atomic.PopulationDistribution:
    if config.populations is not None:
        return atomic.PopulationDistribution(config.populations)
    if config.pump_target_m is not None:
        return atomic.PopulationDistribution.pumped(
            config.pump_target_m, config.pump_fidelity
        )
    raise ScenarioError("config needs either populations or pump_target_m")


def _branch_model(config: RunConfig, c: float, delta_ac: float, flux: float):
    if c == 0.0:
        return dynamics.build_model(
            0, config.n_max, 0.0, config.kappa_mhz, config.kappa1_mhz,
            config.kappa2_mhz, config.gamma_mhz, config.delta_mhz,
            delta_ac, flux,
        )
    return dynamics.model_for_cooperativity(
        c, config.sim_n_atoms, config.n_max, config.kappa_mhz,
        config.kappa1_mhz, config.kappa2_mhz, config.gamma_mhz,
        config.delta_mhz, delta_ac, flux,
    )


def _run_spectrum(config: RunConfig) -> dict[str, str]:
    params = _system_params(config)
    result = linear_response.sweep_1d(params, _delta_grid(config))
    rows = zip(
        map(float, result.deltas_mhz), map(float, result.t_plus),
        map(float, result.t_minus), map(float, result.isolation_db),
    )
    return {
        "spectrum.csv": render_csv(
            ["delta_mhz", "t_plus", "t_minus", "isolation_db"], rows
        )
    }


def _run_sweep2d(config: RunConfig) -> dict[str, str]:
    params = _system_params(config)
    _require(config, "delta_ac_min_mhz", "delta_ac_max_mhz", "delta_ac_points")
    dac_grid = np.linspace(
        config.delta_ac_min_mhz, config.delta_ac_max_mhz, config.delta_ac_points
    )
    grid_rows = linear_response.sweep_2d(params, _delta_grid(config), dac_grid)
    rows = []
    peak_rows = []
    for dac, res in grid_rows:
        for i, d in enumerate(res.deltas_mhz):
            rows.append((float(dac), float(d), float(res.t_plus[i]),
                         float(res.t_minus[i]), float(res.isolation_db[i])))
        try:
            for pos, height in linear_response.find_polariton_peaks(res, "+"):
                peak_rows.append((float(dac), pos, height))
        except linear_response.LinearResponseError:
            pass
    return {
        "sweep2d.csv": render_csv(
            ["delta_ac_mhz", "delta_mhz", "t_plus", "t_minus", "isolation_db"], rows
        ),
        "peaks_plus.csv": render_csv(
            ["delta_ac_mhz", "peak_delta_mhz", "height"], peak_rows
        ),
    }


def _run_isolation(config: RunConfig) -> dict[str, str]:
    """Eq.-2 ideal isolation curve plus master-equation points at Delta = 0."""
    _require(config, "kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz", "c_list")
    rows = []
    for c in config.c_list:
        ideal = linear_response.ideal_isolation(c)
        ideal_db = 10.0 * math.log10(ideal)
        m_plus = _branch_model(config, c, config.delta_ac_mhz, config.input_flux)
        m_minus = _branch_model(config, 0.0, config.delta_ac_mhz, config.input_flux)
        t_plus = dynamics.steady_state(m_plus).transmission
        t_minus = dynamics.steady_state(m_minus).transmission
        me_db = 10.0 * math.log10(t_minus / t_plus) if t_plus > 0 else float("inf")
        rows.append((float(c), ideal_db, me_db))
    return {
        "isolation_vs_c.csv": render_csv(
            ["c_plus", "ideal_isolation_db", "master_equation_isolation_db"], rows
        )
    }


def _run_saturation(config: RunConfig) -> dict[str, str]:
    _require(config, "kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz",
             "c_plus", "c_minus", "flux_min", "flux_max", "flux_points")
    fluxes = np.geomspace(config.flux_min, config.flux_max, config.flux_points)
    plus_template = _branch_model(config, config.c_plus, config.delta_ac_mhz, 0.0)
    minus_template = _branch_model(config, config.c_minus, config.delta_ac_mhz, 0.0)
    plus_pts = dynamics.saturation_curve(plus_template, fluxes)
    minus_pts = dynamics.saturation_curve(minus_template, fluxes)
    rows = []
    for p, m in zip(plus_pts, minus_pts):
        iso = m.output_flux / p.output_flux if p.output_flux > 0 else float("inf")
        rows.append((
            p.input_flux, p.output_flux, p.photon_number, p.polariton_number,
            m.output_flux, m.photon_number, m.polariton_number, iso,
        ))
    return {
        "saturation.csv": render_csv(
            ["input_flux", "output_flux_plus", "photon_number_plus",
             "polariton_number_plus", "output_flux_minus", "photon_number_minus",
             "polariton_number_minus", "isolation_ratio"],
            rows,
        )
    }


def _run_g2(config: RunConfig) -> dict[str, str]:
    _require(config, "kappa_mhz", "kappa1_mhz", "kappa2_mhz", "gamma_mhz",
             "c_plus", "c_minus", "tau_max_us", "tau_points")
    taus = np.linspace(0.0, config.tau_max_us, config.tau_points)
    dac_plus = (config.delta_ac_plus_mhz if config.delta_ac_plus_mhz is not None
                else config.delta_ac_mhz)
    dac_minus = (config.delta_ac_minus_mhz if config.delta_ac_minus_mhz is not None
                 else config.delta_ac_mhz)
    traces = {}
    for label, c, dac in (("plus", config.c_plus, dac_plus),
                          ("minus", config.c_minus, dac_minus)):
        model = _branch_model(config, c, dac, config.input_flux)
        state = dynamics.steady_state(model)
        traces[label] = dynamics.g2_tau(state, model, taus)
    rows = zip(map(float, taus), map(float, traces["plus"].g2),
               map(float, traces["minus"].g2))
    return {"g2.csv": render_csv(["tau_us", "g2_plus", "g2_minus"], rows)}


def _read_spectrum_csv(text: str) -> linear_response.SpectrumResult:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ScenarioError("input spectrum CSV is empty")
    header = [h.strip() for h in lines[0].split(",")]
    try:
        i_delta = header.index("delta_mhz")
        i_plus = header.index("t_plus")
    except ValueError as exc:
        raise ScenarioError(
            "input CSV must have delta_mhz and t_plus columns"
        ) from exc
    i_minus = header.index("t_minus") if "t_minus" in header else None
    deltas, tp, tm = [], [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        deltas.append(float(cells[i_delta]))
        tp.append(float(cells[i_plus]))
        tm.append(float(cells[i_minus]) if i_minus is not None else 0.0)
    tp, tm = np.array(tp), np.array(tm)
    return linear_response.SpectrumResult(
        deltas_mhz=np.array(deltas), t_plus=tp, t_minus=tm,
        isolation_db=np.zeros_like(tp),
    )


def _run_fit(config: RunConfig, input_text: str | None = None) -> dict[str, str]:
    _require(config, "input_csv")
    if input_text is None:
        from pathlib import Path

        try:
            input_text = Path(config.input_csv).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read {config.input_csv}: {exc}") from exc
    data = _read_spectrum_csv(input_text)
    initial = _system_params(config)
    free = config.fit_free or ("c_plus",)
    fit = linear_response.fit_spectrum(
        data, initial, free=free, branches=(config.fit_branch,),
        g0_mhz=config.g0_mhz,
    )
    rows = [
        (name, float(getattr(fit.params, name)),
         float(fit.uncertainties.get(name, 0.0)))
        for name in linear_response.FITTABLE
    ]
    rows.append(("residual_norm", fit.residual_norm, 0.0))
    if fit.n_eff is not None:
        rows.append(("n_eff", fit.n_eff, 0.0))
    return {"fit.csv": render_csv(["parameter", "value", "uncertainty"], rows)}


def _run_cooperativity(config: RunConfig) -> dict[str, str]:
    _require(config, "g0_mhz", "n_atoms", "kappa_mhz", "gamma_mhz")
    pop = _populations(config)
    table = atomic.TransitionTable.for_cesium_d2(config.resonant_fprime)
    pair = atomic.effective_cooperativity(
        pop, table, config.g0_mhz, config.n_atoms,
        config.kappa_mhz, config.gamma_mhz,
    )
    shift_plus, shift_minus = atomic.dispersive_shift(
        pop, table, config.g0_mhz, config.n_atoms
    )
    rows = [
        ("c_plus", pair.c_plus),
        ("c_minus", pair.c_minus),
        ("g_eff_plus_mhz", pair.g_eff_plus_mhz),
        ("g_eff_minus_mhz", pair.g_eff_minus_mhz),
        ("n_eff_plus", pair.g_eff_plus_mhz**2 / config.g0_mhz**2),
        ("n_eff_minus", pair.g_eff_minus_mhz**2 / config.g0_mhz**2),
        ("dispersive_shift_plus_mhz", shift_plus),
        ("dispersive_shift_minus_mhz", shift_minus),
    ]
    return {"cooperativity.csv": render_csv(["quantity", "value"], rows)}


_RUNNERS = {
    "spectrum": _run_spectrum,
    "sweep2d": _run_sweep2d,
    "isolation": _run_isolation,
    "saturation": _run_saturation,
    "g2": _run_g2,
    "fit": _run_fit,
    "cooperativity": _run_cooperativity,
}


def run_scenario(
    config: RunConfig,
    scenario: str | None = None,
    fit_input_text: str | None = None,
) -> RunResult:
    """Execute one scenario; outputs are deterministic for identical configs."""
    name = scenario or config.scenario
    if name is None:
        raise ScenarioError("no scenario selected (config key or CLI subcommand)")
    if name not in _RUNNERS:
        raise ScenarioError(f"unknown scenario {name!r}")
    snapshot = serialize_config(replace(config, scenario=name))
    digest = hashlib.sha256(snapshot.encode()).hexdigest()
    start = time.monotonic()
    try:
        if name == "fit":
            files = _run_fit(config, fit_input_text)
        else:
            files = _RUNNERS[name](config)
    except (atomic.AtomicError, dynamics.DynamicsError,
            linear_response.LinearResponseError) as exc:
        raise ScenarioError(f"{name}: {exc}") from exc
    wall = time.monotonic() - start
    record = RunRecord(
        scenario=name, config_hash=digest, wall_time_s=wall,
        files=tuple(sorted(files)),
    )
    return RunResult(record=record, files=files)
