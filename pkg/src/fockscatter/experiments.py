"""Config-driven runs of both engines, cross-engine comparison, sweeps, validation."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import mps as M
from . import oracles
from . import pulses as P
from . import scattering as S
from .observables import SERIES_FIELDS, CorrelationMap, ObservableSeries, ensure_dir

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TAIL = 15.0


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


class ComparisonError(RuntimeError):
    pass


# --- config ------------------------------------------------------------------

@dataclass
class Grids:
    dt: float = 0.01
    t_window: tuple[float, float] | None = None
    omega_max: float = 30.0
    n_omega: int = 1024
    oversample: int = 2


@dataclass
class Truncation:
    svd_cutoff: float = 1e-10
    max_bond: int = 16
    d_bin: int = M.D_BIN


@dataclass
class Outputs:
    series: bool = True
    g1: bool = False
    g2: bool = False
    map_stride: int = 1
    spectra: bool = False


@dataclass
class ExperimentConfig:
    engine: str = "both"
    pulse: P.PulseParams = field(default_factory=P.PulseParams)
    input_state: str | float = "two"
    gamma: float = 1.0
    grids: Grids = field(default_factory=Grids)
    truncation: Truncation = field(default_factory=Truncation)
    outputs: Outputs = field(default_factory=Outputs)
    seed_label: str = ""
    schema_version: int = SCHEMA_VERSION

    @property
    def alpha(self) -> float:
        if self.input_state == "one_one":
            return 0.0
        if self.input_state == "two":
            return 0.5
        return float(self.input_state)

    @property
    def window(self) -> tuple[float, float]:
        if self.grids.t_window is not None:
            return tuple(self.grids.t_window)
        p = self.pulse
        if p.shape == "tophat":
            return 0.0, p.t_b + p.t_p + TAIL
        return 0.0, p.t_c + p.t_b + TAIL

    @property
    def frequency_grid(self) -> S.FrequencyGrid:
        return S.FrequencyGrid(self.grids.omega_max, self.grids.n_omega)

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {self.schema_version}")
        if self.engine not in ("mps", "scattering", "both"):
            raise ConfigError("engine", f"unknown engine {self.engine!r}")
        if not self.gamma > 0:
            raise ConfigError("gamma", "must be positive")
        if isinstance(self.input_state, str):
            if self.input_state not in ("one_one", "two"):
                raise ConfigError("input_state", f"unknown state {self.input_state!r}")
        else:
            if not 0 <= self.input_state <= 0.5:
                raise ConfigError("input_state", "alpha must lie in [0, 0.5]")
            if self.engine != "scattering" or self.pulse.shape != "gaussian":
                raise ConfigError("input_state", "numeric alpha needs engine=scattering and a Gaussian pulse")
        if self.engine in ("scattering", "both") and self.pulse.shape == "tophat":
            raise ConfigError("pulse.shape", "top-hat pulses are MPS-only")
        if self.engine in ("mps", "both") and self.pulse.shape == "tophat" and self.pulse.t_b < self.pulse.t_p:
            raise ConfigError("pulse.t_b", "top-hat segments overlap (t_b < t_p)")
        if not self.grids.dt > 0:
            raise ConfigError("grids.dt", "must be positive")
        lo, hi = self.window
        if not hi > lo:
            raise ConfigError("grids.t_window", "empty window")
        if self.outputs.map_stride < 1:
            raise ConfigError("outputs.map_stride", "must be >= 1")
        if self.truncation.d_bin < 3:
            raise ConfigError("truncation.d_bin", "two photons need d_bin >= 3")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pulse"] = asdict(self.pulse)
        return d


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0], "unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or "<root>", str(exc)) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    sub = {}
    for key, cls in (("pulse", P.PulseParams), ("grids", Grids), ("truncation", Truncation), ("outputs", Outputs)):
        if key in data:
            sub[key] = _build(cls, data.pop(key), key)
    if "grids" in sub and sub["grids"].t_window is not None:
        sub["grids"].t_window = tuple(sub["grids"].t_window)
    cfg = _build(ExperimentConfig, data, "")
    for key, val in sub.items():
        setattr(cfg, key, val)
    cfg.validate()
    return cfg


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("fockscatter.presets").iterdir()
                  if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("fockscatter.presets") / f"{name}.json"
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}; known: {', '.join(preset_names())}")
    return json.loads(path.read_text())


# --- engines -----------------------------------------------------------------

@dataclass
class EngineOutput:
    series: ObservableSeries
    g1: CorrelationMap | None = None
    g2: CorrelationMap | None = None
    diagnostics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def run_mps(cfg: ExperimentConfig, threads: int = 1) -> EngineOutput:
    p, dt, window, d = cfg.pulse, cfg.grids.dt, cfg.window, cfg.truncation.d_bin
    if cfg.alpha == 0.5:
        state = M.build_two_photon_mps(P.discretize_pulse(p, dt, window), d=d)
    else:
        f1, f2 = P.discretize_single_pulses(p, dt, window)
        if p.shape == "tophat":
            state = M.concat_product_pulses(f1, f2, d=d)
        else:
            state = M.build_product_mps(f1, f2, d=d)
    params = M.EvolutionParams(gamma=cfg.gamma, dt=dt, svd_cutoff=cfg.truncation.svd_cutoff,
                               max_bond=cfg.truncation.max_bond)
    res = M.evolve(state, params)
    out = EngineOutput(res.series, diagnostics={
        "discarded_weight": res.discarded_weight,
        "max_bond": res.max_bond_used,
        "norm_defect": float(abs(1.0 - res.norm_history[-1])),
        "excitation_defect": float(np.abs(res.photons + res.tls_edges[1:] - 2.0).max()),
        "n_bins": state.n_bins,
    })
    out.extra["result"] = res
    stride = cfg.outputs.map_stride
    if cfg.outputs.g1:
        out.g1 = M.two_time_correlation(res.state, "G1", stride=stride, threads=threads)
    if cfg.outputs.g2:
        out.g2 = M.two_time_correlation(res.state, "G2", stride=stride, threads=threads)
    return out


def run_scattering(cfg: ExperimentConfig) -> EngineOutput:
    maps = tuple(k for k, on in (("G1", cfg.outputs.g1), ("G2", cfg.outputs.g2)) if on)
    res = S.run_scattering(cfg.pulse, gamma=cfg.gamma, grid=cfg.frequency_grid, window=cfg.window,
                           alpha=cfg.alpha, oversample=cfg.grids.oversample, maps=maps)
    s = cfg.outputs.map_stride

    def thin(cm):
        if cm is None or s == 1:
            return cm
        return CorrelationMap(cm.t[::s], cm.values[::s, ::s], cm.kind)

    dt = res.series.dt
    out = EngineOutput(res.series, thin(res.g1), thin(res.g2), diagnostics={
        "unitarity_defect": res.unitarity_defect,
        "photons_in": float(res.series.n_in.sum() * dt),
        "photons_out": float(res.series.n_t.sum() * dt),
        "time_step": dt,
    })
    out.extra["result"] = res
    return out


# --- running -----------------------------------------------------------------

def _write_engine(out: EngineOutput, cfg: ExperimentConfig, out_dir: Path) -> dict:
    files = {}
    if cfg.outputs.series:
        out.series.to_csv(out_dir / "series.csv")
        files["series"] = "series.csv"
    for name in ("g1", "g2"):
        cm = getattr(out, name)
        if cm is not None:
            cm.to_csv(out_dir / f"{name}.csv")
            files[name] = f"{name}.csv"
    if cfg.outputs.spectra and "result" in out.extra and hasattr(out.extra["result"], "f_in"):
        from .observables import write_two_photon_csv
        r = out.extra["result"]
        write_two_photon_csv(out_dir / "f_in.csv", r.f_in.omega, r.f_in.values)
        write_two_photon_csv(out_dir / "f_out.csv", r.f_out.omega, r.f_out.values)
        files["f_in"], files["f_out"] = "f_in.csv", "f_out.csv"
    return files


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def run_experiment(cfg: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Run one configuration; write CSVs and ``manifest.json`` under ``out_dir``."""
    cfg.validate()
    out_dir = ensure_dir(out_dir)
    engines = ["mps", "scattering"] if cfg.engine == "both" else [cfg.engine]
    manifest: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "config": _jsonable(cfg.to_dict()),
                                "runs": {}}
    outputs = {}
    for name in engines:
        t0 = time.perf_counter()
        sub = out_dir / name if cfg.engine == "both" else out_dir
        ensure_dir(sub)
        out = run_mps(cfg, threads) if name == "mps" else run_scattering(cfg)
        files = _write_engine(out, cfg, sub)
        wall = time.perf_counter() - t0
        entry = {"engine": name, "diagnostics": _jsonable(out.diagnostics), "files": files,
                 "wall_time_s": wall}
        if cfg.engine == "both":
            sub_manifest = {"schema_version": SCHEMA_VERSION, "config": manifest["config"], **entry}
            (sub / "manifest.json").write_text(json.dumps(sub_manifest, indent=2))
            entry["manifest"] = f"{name}/manifest.json"
        manifest["runs"][name] = entry
        outputs[name] = out
        log.info("%s finished in %.1f s", name, wall)
    if cfg.engine == "both":
        report = compare_outputs(outputs["mps"], outputs["scattering"])
        manifest["comparison"] = report.to_dict()
    else:
        manifest.update(manifest["runs"][cfg.engine])
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    manifest["_outputs"] = outputs
    return manifest


# --- comparison --------------------------------------------------------------

DEFAULT_TOLERANCES = {"n_in": 1e-2, "n_tls": 1e-2, "n_t": 1e-2, "n_tt": 5e-2, "g1": 5e-2, "g2": 5e-2}
RELATIVE = {"n_tt", "g1", "g2"}


@dataclass
class ComparisonReport:
    differences: dict
    grids: dict
    passed: bool

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _common_grid(ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    lo, hi = max(ta[0], tb[0]), min(ta[-1], tb[-1])
    if not hi > lo:
        raise ComparisonError(f"runs share no time window ([{ta[0]}, {ta[-1]}] vs [{tb[0]}, {tb[-1]}])")
    coarse = ta if (ta[1] - ta[0]) >= (tb[1] - tb[0]) else tb
    return coarse[(coarse >= lo - 1e-12) & (coarse <= hi + 1e-12)]


def _interp_budget(t: np.ndarray, y: np.ndarray, h: float) -> float:
    """Linear-interpolation error estimate ``h^2/8 max|y''|``."""
    if len(y) < 3:
        return 0.0
    d2 = np.diff(y, 2) / (t[1] - t[0]) ** 2
    return float(h**2 / 8 * np.abs(d2).max())


def compare_series(a: ObservableSeries, b: ObservableSeries, maps_a=None, maps_b=None,
                   tolerances: dict | None = None) -> ComparisonReport:
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    grid = _common_grid(a.t, b.t)
    h = float(grid[1] - grid[0]) if len(grid) > 1 else 0.0
    diffs = {}
    for name in SERIES_FIELDS[1:]:
        ya = np.interp(grid, a.t, a.column(name))
        yb = np.interp(grid, b.t, b.column(name))
        d = np.abs(ya - yb)
        scale = max(np.abs(ya).max(), np.abs(yb).max(), 1e-300) if name in RELATIVE else 1.0
        val = float(d.max() / scale)
        diffs[name] = {"max_abs": float(d.max()), "l2": float(np.sqrt(np.sum(d**2) * h)),
                       "metric": val, "relative": name in RELATIVE, "tol": tol[name],
                       "interp_budget": max(_interp_budget(a.t, a.column(name), h),
                                            _interp_budget(b.t, b.column(name), h)),
                       "passed": bool(val <= tol[name])}
    for name in ("g1", "g2"):
        ma, mb = (maps_a or {}).get(name), (maps_b or {}).get(name)
        if ma is None or mb is None:
            continue
        tg = _common_grid(ma.t, mb.t)
        va, vb = ma.resample(tg).values, mb.resample(tg).values
        d = np.abs(va - vb)
        scale = max(np.abs(va).max(), np.abs(vb).max(), 1e-300)
        val = float(d.max() / scale)
        hg = float(tg[1] - tg[0])
        diffs[name] = {"max_abs": float(d.max()), "l2": float(np.sqrt(np.sum(d**2)) * hg),
                       "metric": val, "relative": True, "tol": tol[name], "passed": bool(val <= tol[name])}
    grids = {"dt_a": float(a.dt), "dt_b": float(b.dt), "dt_common": h,
             "window": [float(grid[0]), float(grid[-1])]}
    return ComparisonReport(diffs, grids, all(v["passed"] for v in diffs.values()))


def compare_outputs(a: EngineOutput, b: EngineOutput, tolerances=None) -> ComparisonReport:
    return compare_series(a.series, b.series, {"g1": a.g1, "g2": a.g2}, {"g1": b.g1, "g2": b.g2}, tolerances)


def _load_run(manifest_path) -> tuple[ObservableSeries, dict]:
    path = Path(manifest_path)
    if path.is_dir():
        path = path / "manifest.json"
    data = json.loads(path.read_text())
    files = data.get("files")
    if files is None:
        raise ComparisonError(f"{path} describes a combined run; pass one engine's manifest")
    base = path.parent
    series = ObservableSeries.from_csv(base / files["series"])
    maps = {k: CorrelationMap.from_csv(base / files[k]) for k in ("g1", "g2") if k in files}
    return series, maps


def compare_methods(run_a, run_b, tolerances: dict | None = None) -> ComparisonReport:
    """Compare two runs given their manifest paths (or run directories)."""
    sa, ma = _load_run(run_a)
    sb, mb = _load_run(run_b)
    return compare_series(sa, sb, ma, mb, tolerances)


# --- sweep -------------------------------------------------------------------

@dataclass
class SweepConfig:
    pulse: P.PulseParams = field(default_factory=P.PulseParams)
    t_b: list[float] = field(default_factory=lambda: [float(x) for x in np.arange(0, 20.25, 0.5)])
    alpha: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5])
    gamma: float = 1.0
    grids: Grids = field(default_factory=Grids)
    seed_label: str = ""
    schema_version: int = SCHEMA_VERSION


def sweep_from_dict(data: dict) -> SweepConfig:
    data = dict(data)
    data.pop("kind", None)
    pulse = _build(P.PulseParams, data.pop("pulse", {}), "pulse")
    grids = _build(Grids, data.pop("grids", {}), "grids")
    if "t_b_range" in data:
        lo, hi, step = data.pop("t_b_range")
        data["t_b"] = [float(x) for x in np.arange(lo, hi + step / 2, step)]
    cfg = _build(SweepConfig, data, "")
    cfg.pulse, cfg.grids = pulse, grids
    if pulse.shape != "gaussian":
        raise ConfigError("pulse.shape", "the sweep runs the scattering engine and needs Gaussian pulses")
    for i, a in enumerate(cfg.alpha):
        if not 0 <= a <= 0.5:
            raise ConfigError(f"alpha[{i}]", "must lie in [0, 0.5]")
    for i, tb in enumerate(cfg.t_b):
        if tb < 0:
            raise ConfigError(f"t_b[{i}]", "must be non-negative")
    return cfg


def _sweep_cell(args):
    pulse, t_b, alpha, gamma, grids = args
    p = replace(pulse, t_b=t_b, alpha=alpha)
    try:
        res = S.run_scattering(p, gamma=gamma, grid=S.FrequencyGrid(grids.omega_max, grids.n_omega),
                               window=(0.0, p.t_c + t_b + TAIL), oversample=grids.oversample, maps=())
        return t_b, alpha, float(res.series.n_tls.max()), ""
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        return t_b, alpha, float("nan"), f"{type(exc).__name__}: {exc}"


def sweep_max_population(cfg: SweepConfig, out_path=None, threads: int = 1) -> list[dict]:
    cells = [(cfg.pulse, tb, a, cfg.gamma, cfg.grids) for a in cfg.alpha for tb in cfg.t_b]
    if threads > 1:
        with ProcessPoolExecutor(threads) as pool:
            rows = list(pool.map(_sweep_cell, cells, chunksize=4))
    else:
        rows = [_sweep_cell(c) for c in cells]
    table = [{"t_b": tb, "alpha": a, "max_pop": mp, "error": err} for tb, a, mp, err in rows]
    if out_path is not None:
        with open(out_path, "w") as fh:
            fh.write("t_b,alpha,max_pop\n")
            for r in table:
                fh.write(f"{r['t_b']:.6g},{r['alpha']:.6g},{r['max_pop']:.10g}\n")
    return table


# --- validation --------------------------------------------------------------

def _check(name, value, tol, detail="", passed=None):
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "passed": ok, "value": float(value), "tol": float(tol), "detail": detail}


def validate(svd_cutoff: float = 1e-10, omega_max: float = 30.0, n_omega: int = 1024,
             dt: float = 0.01, cross_engine: bool = True) -> dict:
    """Run the oracle suite; failures are report entries, never exceptions."""
    checks = []

    def guarded(name, fn):
        try:
            checks.extend(fn())
        except Exception as exc:
            checks.append({"name": name, "passed": False, "value": float("nan"), "tol": float("nan"),
                           "detail": f"{type(exc).__name__}: {exc}"})

    def decay():
        errs = []
        for h in (dt, dt / 2):
            st = M.build_vacuum(int(round(5 / h)), h, excited=True)
            r = M.evolve(st, M.EvolutionParams(dt=h, svd_cutoff=svd_cutoff))
            t = np.arange(len(r.tls_edges)) * h
            errs.append(np.abs(r.tls_edges - oracles.spontaneous_decay(t)).max())
        return [_check("decay_law", errs[0], 2e-3),
                _check("decay_convergence", errs[0] / errs[1], 1.8, "error ratio under dt halving, needs >= tol",
                       passed=errs[0] / errs[1] >= 1.8)]

    def tophat():
        p = P.PulseParams(shape="tophat", t_p=1.0, t_b=1.0)
        f1, _ = P.discretize_single_pulses(p, dt, (0.0, 1.0 + TAIL))
        r = M.evolve(M.build_single_photon_mps(f1), M.EvolutionParams(dt=dt, svd_cutoff=svd_cutoff))
        k = int(round(1.0 / dt))
        ref = float(oracles.tophat_single_photon_population(1.0, 1.0))
        return [_check("single_photon_tophat", abs(r.tls_edges[k] - ref), 5e-3)]

    def gaussian_single():
        center, win = 4.0, (0.0, 19.0)
        f = P.discretize_envelope(lambda t: P.gaussian_single_envelope(t, center, 1.0), dt, win)
        r = M.evolve(M.build_single_photon_mps(f), M.EvolutionParams(dt=dt, svd_cutoff=svd_cutoff))
        t = np.arange(len(r.tls_edges)) * dt
        ref = oracles.single_photon_population(lambda s: P.gaussian_single_envelope(s, center, 1.0), t)
        grid = S.FrequencyGrid(omega_max, n_omega)
        g = P.SpectralAmplitude(grid.omega, P.gaussian_spectral_amplitude(grid.omega, 1.0, center))
        sc = S.single_photon_series(g, 1.0, 9.5, win)
        return [_check("single_photon_gaussian_mps", abs(r.tls_edges.max() - ref.max()), 1e-2),
                _check("single_photon_gaussian_scattering", abs(sc.n_tls.max() - ref.max()), 1e-2)]

    def mps_conservation():
        cfg = ExperimentConfig(engine="mps", pulse=P.PulseParams(t_b=8.0), input_state="two",
                               grids=Grids(dt=dt), truncation=Truncation(svd_cutoff=svd_cutoff))
        out = run_mps(cfg)
        d = out.diagnostics
        return [_check("norm_conservation", d["norm_defect"], 1e-6),
                _check("excitation_conservation", d["excitation_defect"], 1e-3),
                _check("mps_photon_number", abs(out.series.n_t.sum() * dt - 2), 1e-3)]

    def scattering_checks():
        grid = S.FrequencyGrid(omega_max, n_omega)
        grid.check_resolution(1.0)
        res = S.run_scattering(P.PulseParams(t_b=8.0), grid=grid, alpha=0.5, maps=())
        dtt = res.series.dt
        return [_check("unitarity", res.unitarity_defect, 1e-3),
                _check("photon_number_in", abs(res.series.n_in.sum() * dtt - 2), 1e-3),
                _check("photon_number_out", abs(res.series.n_t.sum() * dtt - 2), 1e-3)]

    def cross():
        cfg = ExperimentConfig(engine="both", pulse=P.PulseParams(t_b=8.0), input_state="two",
                               grids=Grids(dt=dt, omega_max=omega_max, n_omega=n_omega),
                               truncation=Truncation(svd_cutoff=svd_cutoff))
        rep = compare_outputs(run_mps(cfg), run_scattering(cfg))
        return [_check("cross_engine_n_tls", rep.differences["n_tls"]["metric"], 1e-2),
                _check("cross_engine_n_t", rep.differences["n_t"]["metric"], 1e-2)]

    guarded("decay_law", decay)
    guarded("single_photon_tophat", tophat)
    guarded("single_photon_gaussian", gaussian_single)
    guarded("mps_conservation", mps_conservation)
    guarded("unitarity", scattering_checks)
    if cross_engine:
        guarded("cross_engine", cross)
    return {"passed": all(c["passed"] for c in checks), "checks": checks,
            "settings": {"svd_cutoff": svd_cutoff, "omega_max": omega_max, "n_omega": n_omega, "dt": dt}}
