import csv
import json
import numpy as np
import pytest

from procoal import run as runner
from procoal.cli import main
from procoal.config import load_config, parse_config
from procoal.errors import ConfigError

START = "2006-02-01T00:00:00"


def base_config(**overrides):
    cfg = {
        "seed": 42,
        "climate": {"synthetic": {"width": 3, "height": 3, "start": START,
                                  "days": 120, "interval_hours": 3,
                                  "corr_length": 1.2}},
        "pool": {"random_pool": {"count": 18,
                                 "ranges": {"n_turbines": [1, 2], "n_pv": [4, 12]}}},
        "requirements": {"phi": [0.1], "p_min": [0.0], "n_coal": [3]},
        "algorithms": {"percolation": True, "random": {"repeats": 4},
                       "correlated": True},
        "deseason_window_days": 15,
        "k_min": 2,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


# -- config validation ------------------------------------------------------------

def test_missing_pool_section_names_field(tmp_path, capsys):
    cfg = base_config()
    del cfg["pool"]
    rc = main(["form", "--config", write_config(tmp_path, cfg),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "pool" in capsys.readouterr().err


def test_bad_phi_path_in_error():
    cfg = base_config()
    cfg["requirements"]["phi"] = [0.1, 1.5]
    with pytest.raises(ConfigError) as err:
        parse_config(cfg)
    assert err.value.path == "requirements.phi[1]"


def test_analytic_phi_boundary_rejected():
    cfg = base_config()
    cfg["requirements"]["phi"] = [0.0]
    with pytest.raises(ConfigError):
        parse_config(cfg)
    cfg["mode"] = "empirical"
    parse_config(cfg)  # fine in empirical mode


def test_no_algorithm_selected():
    cfg = base_config(algorithms={})
    with pytest.raises(ConfigError) as err:
        parse_config(cfg)
    assert err.value.path == "algorithms"


def test_pool_exclusive_choice():
    cfg = base_config()
    cfg["pool"]["agents"] = [{"id": "a"}]
    with pytest.raises(ConfigError):
        parse_config(cfg)


def test_seed_and_mode_overrides(tmp_path):
    path = write_config(tmp_path, base_config())
    cfg = load_config(path, {"seed": 7, "mode": "empirical", "out_dir": "x"})
    assert cfg.seed == 7 and cfg.mode == "empirical" and cfg.out_dir == "x"


def test_explicit_agents_parse():
    cfg = base_config()
    cfg["pool"] = {"agents": [
        {"id": "a1", "cell": [0, 0], "n_turbines": 1,
         "turbine": {"cut_in": 3.0, "rated_speed": 12.0, "cut_out": 25.0,
                     "rated_power": 1e4},
         "base_load": 400.0, "rng_seed": 5},
        {"id": "a2", "cell": [1, 1], "base_load": 300.0},
    ]}
    parsed = parse_config(cfg)
    sim = runner.simulate(parsed)
    assert sorted(sim.series) == ["a1", "a2"]


def test_explicit_agent_error_has_path():
    cfg = base_config()
    cfg["pool"] = {"agents": [{"id": "a1", "n_turbines": 1}]}  # missing turbine
    with pytest.raises(ConfigError) as err:
        runner.simulate(parse_config(cfg))
    assert "pool.agents[0]" in str(err.value)


# -- simulate ----------------------------------------------------------------------

def test_simulate_writes_byte_identical_outputs(tmp_path):
    path = write_config(tmp_path, base_config())
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["simulate", "--config", path, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", path, "--out", str(out2)]) == 0
    assert (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()
    assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert len(manifest["agents"]) == 18


# -- form --------------------------------------------------------------------------

def test_form_writes_structures_and_summary(tmp_path):
    path = write_config(tmp_path, base_config())
    out = tmp_path / "form"
    assert main(["form", "--config", path, "--out", str(out)]) == 0
    entries = json.loads((out / "structures.json").read_text())
    algorithms = [e["meta"]["algorithm"] for e in entries]
    assert algorithms.count("percolation") == 1
    assert algorithms.count("random") == 4
    assert algorithms.count("correlated") == 1
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["algorithm"] for r in rows} == {"percolation", "random", "correlated"}
    # welfare recomputable from per-coalition records
    for entry in entries:
        total = sum(c["utility"] for c in entry["structure"]["coalitions"])
        assert total == pytest.approx(float(entry["meta"]["welfare"]), rel=1e-12)


def test_form_single_grand_coalition_acceptance_one(tmp_path):
    cfg = base_config()
    cfg["requirements"] = {"phi": [0.5], "p_min": [0.0], "n_coal": [1]}
    cfg["algorithms"] = {"percolation": True}
    path = write_config(tmp_path, cfg)
    out = tmp_path / "one"
    assert main(["form", "--config", path, "--out", str(out)]) == 0
    entry = json.loads((out / "structures.json").read_text())[0]
    assert float(entry["meta"]["acceptance"]) == 1.0
    assert entry["structure"]["coalitions"][0]["valid"] is True


def test_form_rejects_multi_value_requirements(tmp_path, capsys):
    cfg = base_config()
    cfg["requirements"]["p_min"] = [0.0, 100.0]
    rc = main(["form", "--config", write_config(tmp_path, cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "requirements.p_min" in capsys.readouterr().err


def test_form_split_shorter_than_window_is_clear_error(tmp_path, capsys):
    cfg = base_config()
    cfg["climate"]["synthetic"]["days"] = 40
    cfg["deseason_window_days"] = 30  # needs 60 train days
    rc = main(["form", "--config", write_config(tmp_path, cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "n_train" in capsys.readouterr().err


def test_form_infeasible_n_coal_exit_code(tmp_path, capsys):
    cfg = base_config()
    cfg["requirements"]["n_coal"] = [10]  # 18 agents, k_min 2 -> max 9
    rc = main(["form", "--config", write_config(tmp_path, cfg),
               "--out", str(tmp_path / "x")])
    assert rc == 3
    assert "9" in capsys.readouterr().err


def test_form_from_saved_series_matches_in_memory(tmp_path):
    path = write_config(tmp_path, base_config())
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", path, "--out", str(sim_out)]) == 0
    out1 = tmp_path / "f1"
    out2 = tmp_path / "f2"
    assert main(["form", "--config", path, "--out", str(out1)]) == 0
    assert main(["form", "--config", path, "--series", str(sim_out),
                 "--out", str(out2)]) == 0
    assert (out1 / "structures.json").read_bytes() == (out2 / "structures.json").read_bytes()


# -- sweep and report ----------------------------------------------------------------

def sweep_config():
    cfg = base_config()
    cfg["requirements"] = {"phi": [0.1], "p_min": [0.0, 1500.0, 4000.0],
                           "n_coal": [2, 3]}
    cfg["algorithms"] = {"percolation": True, "random": {"repeats": 3},
                         "correlated": True}
    return cfg


def test_sweep_outputs_and_monotone_acceptance(tmp_path):
    path = write_config(tmp_path, sweep_config())
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * 2 * (1 + 3 + 1)
    for key, group in _group_rows(rows).items():
        group.sort(key=lambda r: float(r["p_min"]))
        accs = [float(r["acceptance"]) for r in group]
        assert all(b <= a + 1e-12 for a, b in zip(accs, accs[1:])), key
    with open(out / "pivot_acceptance_vs_pmin.csv") as fh:
        pivot = list(csv.DictReader(fh))
    assert len(pivot) == 3 * 2 * 3  # p_min x n_coal x algorithm
    with open(out / "pivot_welfare_vs_ncoal.csv") as fh:
        pivot_w = list(csv.DictReader(fh))
    assert {r["n_coal"] for r in pivot_w} == {"2", "3"}


def _group_rows(rows):
    groups = {}
    for r in rows:
        groups.setdefault((r["phi"], r["n_coal"], r["algorithm"], r["realization"]),
                          []).append(r)
    return groups


def test_single_point_sweep_matches_form(tmp_path):
    cfg = base_config()
    path = write_config(tmp_path, cfg)
    parsed = load_config(path)
    series = runner.simulate(parsed).series
    form_rows = [r.row for r in runner.form_run(parsed, series)]
    sweep_rows = [r.row for r in runner.sweep_run(parsed, series)]
    assert form_rows == sweep_rows


def test_sweep_reuses_series_not_resimulating(tmp_path):
    path = write_config(tmp_path, sweep_config())
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--config", path, "--out", str(sim_out)]) == 0
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["sweep", "--config", path, "--out", str(out1)]) == 0
    assert main(["sweep", "--config", path, "--series", str(sim_out),
                 "--out", str(out2)]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_report_aggregates_mean_and_std(tmp_path):
    path = write_config(tmp_path, sweep_config())
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    rep_out = tmp_path / "rep"
    assert main(["report", str(out / "sweep.csv"), "--out", str(rep_out)]) == 0
    with open(rep_out / "report.csv") as fh:
        rows = list(csv.DictReader(fh))
    with open(out / "sweep.csv") as fh:
        raw = list(csv.DictReader(fh))
    for row in rows:
        matching = [float(r["welfare"]) for r in raw
                    if (r["phi"], r["p_min"], r["n_coal"], r["algorithm"])
                    == (row["phi"], row["p_min"], row["n_coal"], row["algorithm"])]
        assert int(row["realizations"]) == len(matching)
        assert float(row["welfare_mean"]) == pytest.approx(np.mean(matching), rel=1e-12)
        if row["algorithm"] != "random":
            assert float(row["welfare_std"]) == 0.0
    assert any(float(r["welfare_std"]) > 0 for r in rows if r["algorithm"] == "random"
               ) or all(float(r["welfare_mean"]) == 0 for r in rows
                        if r["algorithm"] == "random")


def test_report_rejects_mixed_modes(tmp_path):
    cfg = sweep_config()
    path = write_config(tmp_path, cfg)
    out_a = tmp_path / "a"
    assert main(["sweep", "--config", path, "--out", str(out_a)]) == 0
    cfg["mode"] = "empirical"
    path_b = write_config(tmp_path, cfg, "cfg2.json")
    out_b = tmp_path / "b"
    assert main(["sweep", "--config", path_b, "--out", str(out_b)]) == 0
    rc = main(["report", str(out_a / "sweep.csv"), str(out_b / "sweep.csv"),
               "--out", str(tmp_path / "r")])
    assert rc == 1
