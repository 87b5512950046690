import json

import numpy as np
import pytest
from scipy.signal import argrelmax

from fockscatter import cli
from fockscatter import experiments as E
from fockscatter.observables import CorrelationMap, ObservableSeries


def base(**kw):
    d = {"schema_version": 1, "engine": "scattering", "pulse": {"shape": "gaussian", "t_b": 8.0},
         "input_state": "two", "outputs": {"series": True}}
    d.update(kw)
    return d


# --- config --------------------------------------------------------------------

@pytest.mark.parametrize("data, path", [
    (base(pulse={"shape": "tophat"}), "pulse.shape"),
    (base(engine="mps", input_state=0.2), "input_state"),
    (base(input_state=0.7), "input_state"),
    (base(engine="mps", pulse={"shape": "tophat", "t_p": 1.0, "t_b": 0.5}, input_state="one_one"), "pulse.t_b"),
    (base(engine="warp"), "engine"),
    (base(schema_version=2), "schema_version"),
    (base(grids={"dt": 0.01, "bogus": 1}), "grids.bogus"),
    (base(pulse={"sigma_t": -1.0}), "pulse"),
])
def test_config_errors_carry_field_path(data, path):
    with pytest.raises(E.ConfigError) as err:
        E.config_from_dict(data)
    assert err.value.path == path


def test_config_defaults_and_alpha():
    cfg = E.config_from_dict(base(input_state=0.25))
    assert cfg.alpha == 0.25
    assert cfg.window == (0.0, 4.0 + 8.0 + E.TAIL)
    assert E.config_from_dict(base(input_state="one_one")).alpha == 0.0


# --- presets -------------------------------------------------------------------

def test_preset_registry_covers_every_panel():
    names = set(E.preset_names())
    for fig in ("fig2", "fig3", "fig4", "fig5"):
        assert {fig + c for c in "abcdef"} <= names
    assert {"fig6a", "fig6b", "fig6c", "fig6d", "fig7"} <= names


@pytest.mark.parametrize("name", [n for n in E.preset_names() if n != "fig7"])
def test_presets_validate(name):
    cfg = E.config_from_dict(E.load_preset(name))
    expected_tb = {"fig2": (1.0, 2.0, 11.0), "fig3": (1.0, 2.0, 11.0), "fig4": (1.0, 2.0, 8.0),
                   "fig5": (2.0, 4.0, 8.0), "fig6": (8.0,)}[name[:4]]
    assert cfg.pulse.t_b in expected_tb
    if name[:4] in ("fig2", "fig3"):
        assert cfg.engine == "mps" and cfg.pulse.shape == "tophat" and cfg.pulse.t_p == 1.0
    else:
        assert cfg.engine == "scattering" and cfg.pulse.sigma_t == 1.0 and cfg.pulse.t_c == 4.0


def test_unknown_preset():
    with pytest.raises(E.ConfigError, match="unknown preset"):
        E.load_preset("fig99")


def test_fig2a_no_coincidences_before_second_pulse(tmp_path):
    E.run_experiment(E.config_from_dict(E.load_preset("fig2a")), tmp_path)
    s = ObservableSeries.from_csv(tmp_path / "series.csv")
    assert np.abs(s.n_tt[s.t < 1.0]).max() <= 1e-12
    assert s.n_tt.max() > 1e-3  # two photons do meet in the second segment


def test_fig4f_two_bunching_features(tmp_path):
    E.run_experiment(E.config_from_dict(E.load_preset("fig4f")), tmp_path)
    g2 = CorrelationMap.from_csv(tmp_path / "g2.csv")
    diag = g2.diagonal()
    peaks = [i for i in argrelmax(diag)[0] if diag[i] > 0.05 * diag.max()]
    assert len(peaks) == 2
    assert abs(g2.t[peaks[0]] - 4) < 2 and abs(g2.t[peaks[1]] - 12) < 2


# --- running -------------------------------------------------------------------

def test_empty_request_writes_manifest_only(tmp_path):
    cfg = E.config_from_dict(base(outputs={"series": False}))
    E.run_experiment(cfg, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["config"]["engine"] == "scattering" and "wall_time_s" in m


def test_runs_are_reproducible(tmp_path):
    cfg = E.config_from_dict(base(outputs={"series": True, "g2": True, "map_stride": 4}))
    E.run_experiment(cfg, tmp_path / "a")
    again = E.config_from_dict(json.loads((tmp_path / "a" / "manifest.json").read_text())["config"])
    E.run_experiment(again, tmp_path / "b")
    for name in ("series.csv", "g2.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_correlation_map_csv_roundtrip(tmp_path):
    t = np.linspace(0, 1, 5)
    v = np.outer(t, t) + 1j * np.subtract.outer(t, t)
    CorrelationMap(t, v, "G1").to_csv(tmp_path / "g1.csv")
    back = CorrelationMap.from_csv(tmp_path / "g1.csv")
    np.testing.assert_allclose(back.values, v, atol=1e-12)
    assert back.kind == "G1"


# --- comparison ------------------------------------------------------------------

@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("both")
    cfg = E.config_from_dict(base(engine="both", outputs={"series": True, "g2": True, "map_stride": 5}))
    manifest = E.run_experiment(cfg, root)
    return root, manifest


def test_both_engines_agree(two_runs):
    root, manifest = two_runs
    assert manifest["comparison"]["passed"]
    assert manifest["comparison"]["differences"]["n_tls"]["max_abs"] <= 1e-2
    assert (root / "mps" / "manifest.json").exists() and (root / "scattering" / "series.csv").exists()


def test_compare_self_is_zero(two_runs):
    root, _ = two_runs
    rep = E.compare_methods(root / "mps", root / "mps")
    assert rep.passed
    assert all(d["max_abs"] == 0 for d in rep.differences.values())


def test_compare_is_symmetric(two_runs):
    root, _ = two_runs
    ab = E.compare_methods(root / "mps", root / "scattering")
    ba = E.compare_methods(root / "scattering", root / "mps")
    for k in ab.differences:
        assert ab.differences[k]["max_abs"] == pytest.approx(ba.differences[k]["max_abs"], rel=1e-12)
        assert ab.differences[k]["l2"] == pytest.approx(ba.differences[k]["l2"], rel=1e-12)
    assert ab.grids["window"] == ba.grids["window"]


def test_mismatched_gamma_flagged(two_runs, tmp_path):
    root, _ = two_runs
    cfg = E.config_from_dict(base(gamma=2.0))
    E.run_experiment(cfg, tmp_path)
    assert not E.compare_methods(root / "scattering", tmp_path).passed


def test_disjoint_windows_error():
    t = np.linspace(0, 1, 11)
    a = ObservableSeries(t, t, t, t, t)
    b = ObservableSeries(t + 5, t, t, t, t)
    with pytest.raises(E.ComparisonError):
        E.compare_series(a, b)


# --- sweep ---------------------------------------------------------------------

def test_small_sweep(tmp_path):
    cfg = E.sweep_from_dict({"pulse": {"shape": "gaussian"}, "t_b": [0.0, 3.0, 20.0], "alpha": [0.0, 0.5]})
    table = E.sweep_max_population(cfg, tmp_path / "s.csv")
    assert len(table) == 6 and not any(r["error"] for r in table)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t_b,alpha,max_pop" and len(lines) == 7
    half = {r["t_b"]: r["max_pop"] for r in table if r["alpha"] == 0.5}
    assert half[20.0] / half[0.0] == pytest.approx(2**-0.5, abs=0.02)


def test_sweep_marks_failed_cells_and_continues():
    cfg = E.sweep_from_dict({"pulse": {"shape": "gaussian"}, "t_b": [1.0, 100.0], "alpha": [0.0]})
    table = E.sweep_max_population(cfg, threads=2)
    assert table[0]["error"] == "" and np.isfinite(table[0]["max_pop"])
    assert table[1]["error"] and np.isnan(table[1]["max_pop"])


def test_sweep_rejects_tophat():
    with pytest.raises(E.ConfigError, match="pulse.shape"):
        E.sweep_from_dict({"pulse": {"shape": "tophat"}})


# --- validation suite --------------------------------------------------------------

def test_validate_fresh_passes():
    rep = E.validate()
    assert rep["passed"], [c for c in rep["checks"] if not c["passed"]]


def test_validate_loose_cutoff_fails_norm():
    rep = E.validate(svd_cutoff=1e-2, cross_engine=False)
    assert not {c["name"]: c for c in rep["checks"]}["norm_conservation"]["passed"]


def test_validate_narrow_band_fails_unitarity():
    rep = E.validate(omega_max=3.0, cross_engine=False)
    assert not {c["name"]: c for c in rep["checks"]}["unitarity"]["passed"]


# --- CLI -----------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, two_runs):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(base()))
    assert cli.main(["run", str(good), "--out-dir", str(tmp_path / "r")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(base(pulse={"shape": "tophat"})))
    assert cli.main(["run", str(bad)]) == 1
    assert cli.main(["preset", "nope"]) == 1
    root, _ = two_runs
    assert cli.main(["compare", str(root / "mps"), str(root / "scattering")]) == 0
    other = tmp_path / "other.json"
    other.write_text(json.dumps(base(gamma=2.0)))
    assert cli.main(["run", str(other), "--out-dir", str(tmp_path / "g2")]) == 0
    assert cli.main(["compare", str(root / "mps"), str(tmp_path / "g2")]) == 3
    assert cli.main(["validate", "--svd-cutoff", "1e-2", "--no-cross"]) == 2


def test_cli_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(base()))
    assert cli.main(["run", str(cfg), "--grid-points", "2048", "--out-dir", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["config"]["grids"]["n_omega"] == 2048


def test_cli_preset_list(capsys):
    assert cli.main(["preset", "list"]) == 0
    assert "fig7" in capsys.readouterr().out
