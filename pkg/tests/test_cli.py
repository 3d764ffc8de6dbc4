import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from gaudin_lab.cli import main
from gaudin_lab.suites import Check, run_suite, thread_count

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def write_config(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def rational_field(**over):
    cfg = {
        "model": {"kind": "rational", "N": 2, "marked_points": [0.0], "lambda": [[0.0, 1.0]], "k": 0.8},
        "field": {"M": 8, "G": 32, "seed": 1, "initial": {"g0": "equator", "windings": [0, 0, 0], "amplitude": 0.15}},
        "flow": "heisenberg",
        "evolution": {"dt": 1e-3, "T": 0.005, "output_every": 1, "monitors": ["casimirs"]},
    }
    for key, val in over.items():
        cfg[key] = val
    return cfg


# -- verify ------------------------------------------------------------------------


def test_verify_efun_passes_and_writes_report(tmp_path):
    code, out = run(tmp_path, "verify", "--suite", "efun", "--samples", "20", "--seed", "7")
    assert code == 0
    rep = json.loads((out / "verify.json").read_text())
    assert rep["suite"] == "efun" and rep["passed"] and rep["n_checks"] == len(rep["checks"])
    fay = [c for c in rep["checks"] if "fay" in c["name"].lower()]
    assert fay and all(c["value"] <= 1e-10 for c in fay)
    run_json = json.loads((out / "run.json").read_text())
    assert run_json["seed"] == 7 and run_json["exit_code"] == 0
    assert len(run_json["config_sha256"]) == 64 and run_json["wall_time_s"] >= 0
    assert set(run_json["versions"]) >= {"gaudin_lab", "numpy", "python"}


def test_verify_rejects_empty_samples(tmp_path):
    code, out = run(tmp_path, "verify", "--suite", "mech", "--samples", "0")
    assert code == 2
    assert json.loads((out / "run.json").read_text())["exit_code"] == 2


def test_verify_rejects_unknown_suite(tmp_path):
    assert run(tmp_path, "verify", "--suite", "nope")[0] == 2


def test_missing_subcommand_is_a_config_error():
    assert main([]) == 2


def test_failed_checks_exit_one(tmp_path, monkeypatch):
    import gaudin_lab.cli as cli

    monkeypatch.setattr(cli, "run_suite", lambda *a, **k: [Check("x", 1.0, 0.5)])
    assert run(tmp_path, "verify", "--suite", "efun")[0] == 1


def test_suite_checks_do_not_depend_on_threads():
    a = run_suite("field", samples=1, seed=3, threads=1)
    b = run_suite("field", samples=1, seed=3, threads=4)
    assert [(c.name, c.value) for c in a] == [(c.name, c.value) for c in b]


def test_thread_cap_from_environment(monkeypatch):
    monkeypatch.setenv("GAUDIN_LAB_THREADS", "3")
    assert thread_count() == 3


def test_check_bounds():
    assert Check("a", 1e-12, 1e-10).passed and not Check("a", 1e-9, 1e-10).passed
    assert Check("c", 0.5, 1e-2, "lower").passed and not Check("c", 1e-3, 1e-2, "lower").passed
    assert not Check("n", float("nan"), 1.0).passed


# -- simulate ----------------------------------------------------------------------


def test_simulate_constant_field_is_fixed(tmp_path):
    code, out = run(tmp_path, "simulate", "--config", str(CONFIGS / "heisenberg_constant.yaml"))
    assert code == 0
    header, rows = read_csv(out / "trajectory.csv")
    assert header[:3] == ["t", "site", "x"]
    by_time = {}
    for r in rows:
        by_time.setdefault(r[0], []).append(r[3:])
    snaps = list(by_time.values())
    assert len(snaps) == 3
    first = np.array(snaps[0], dtype=float)
    assert all(np.abs(np.array(s, dtype=float) - first).max() <= 1e-14 for s in snaps)
    assert (out / "monitors.csv").exists() and (out / "final_state.json").exists()


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, rational_field())
    _, a = run(tmp_path, "simulate", "--config", cfg, "--seed", "5", name="a")
    _, b = run(tmp_path, "simulate", "--config", cfg, "--seed", "5", name="b")
    for f in ("trajectory.csv", "monitors.csv", "final_state.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    _, c = run(tmp_path, "simulate", "--config", cfg, "--seed", "6", name="c")
    # field.seed pins the initial data; the run seed only drives the spot checks
    assert (a / "trajectory.csv").read_bytes() == (c / "trajectory.csv").read_bytes()


def test_csv_numbers_round_trip(tmp_path):
    cfg = write_config(tmp_path, rational_field())
    _, out = run(tmp_path, "simulate", "--config", cfg)
    _, rows = read_csv(out / "trajectory.csv")
    for text in rows[5][3:]:
        assert float(text) == float(f"{float(text):.17g}")
        assert len(text.replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17


def test_pcm_total_spin_columns_are_constant(tmp_path):
    cfg = yaml.safe_load((CONFIGS / "pcm.yaml").read_text())
    cfg["evolution"]["T"] = 0.005
    cfg["evolution"]["output_every"] = 10
    code, out = run(tmp_path, "simulate", "--config", write_config(tmp_path, cfg))
    assert code == 0
    header, rows = read_csv(out / "monitors.csv")
    vals = np.array(rows, dtype=float)
    cols = [i for i, h in enumerate(header) if h.startswith("l0_")]
    assert len(cols) == 6
    assert np.abs(vals[:, cols] - vals[0, cols]).max() <= 1e-8


def test_simulate_json_config(tmp_path):
    data = json.loads((CONFIGS / "top.json").read_text())
    data["evolution"].update(T=0.01, output_every=5)
    p = tmp_path / "top.json"
    p.write_text(json.dumps(data))
    code, out = run(tmp_path, "simulate", "--config", str(p))
    assert code == 0
    header, rows = read_csv(out / "trajectory.csv")
    assert header[:2] == ["t", "site"] and len(rows) == 3 * 3


def test_blow_up_keeps_partial_outputs(tmp_path):
    cfg = {
        "model": {"kind": "rational", "N": 2, "marked_points": [0.0, 0.1], "lambda": [1.0, 1.0]},
        "state": {"seed": 0, "scale": 2.0},
        "flow": "First(1)",
        "evolution": {"dt": 0.5, "T": 100.0, "output_every": 1, "monitors": [], "blowup": 1e3},
    }
    code, out = run(tmp_path, "simulate", "--config", write_config(tmp_path, cfg))
    assert code == 3
    assert (out / "trajectory.csv.partial").exists() and (out / "final_state.json.partial").exists()
    assert not (out / "trajectory.csv").exists()
    rec = json.loads((out / "run.json").read_text())
    assert rec["exit_code"] == 3 and rec["t_last"] >= 0


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c["model"].update(marked_points=[0.0, 0.0], **{"lambda": [1.0, 1.0]}),
        lambda c: c["model"].update(kind="hyperbolic"),
        lambda c: c.update(flow="Third(1)"),
        lambda c: c.update(flow="Second(4)"),
        lambda c: c.update(flow="ll"),
        lambda c: c["field"].update(G=100),
        lambda c: c["field"].update(file="missing.json"),
        lambda c: c["field"].update(initial={"g0": "sideways"}),
        lambda c: c["evolution"].update(monitors=["energy"]),
        lambda c: c.update(colour="blue"),
        lambda c: c.update(state={"seed": 1}),
    ],
)
def test_schema_violations_exit_two(tmp_path, mutate):
    cfg = rational_field()
    mutate(cfg)
    assert run(tmp_path, "simulate", "--config", write_config(tmp_path, cfg))[0] == 2


def test_unreadable_config_exits_two(tmp_path):
    assert run(tmp_path, "simulate", "--config", str(tmp_path / "absent.yaml"))[0] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unclosed")
    assert run(tmp_path, "simulate", "--config", str(bad))[0] == 2


def test_state_file_round_trip(tmp_path):
    cfg = write_config(tmp_path, rational_field())
    _, a = run(tmp_path, "simulate", "--config", cfg, name="a")
    again = rational_field()
    again["field"] = {"M": 8, "G": 32, "file": str(a / "final_state.json")}
    code, b = run(tmp_path, "simulate", "--config", write_config(tmp_path, again, "again.yaml"), name="b")
    assert code == 0
    _, rows_a = read_csv(a / "trajectory.csv")
    _, rows_b = read_csv(b / "trajectory.csv")
    last_a = [r for r in rows_a if r[0] == rows_a[-1][0]]
    first_b = [r for r in rows_b if r[0] == "0"]
    assert np.abs(np.array([r[3:] for r in last_a], float) - np.array([r[3:] for r in first_b], float)).max() <= 1e-13


# -- residual and charges ----------------------------------------------------------


def test_residual_second_flow_elliptic(tmp_path):
    code, out = run(tmp_path, "residual", "--config", str(CONFIGS / "residual_second_elliptic.yaml"))
    assert code == 0
    summary = json.loads((out / "residual_summary.json").read_text())
    assert summary["max_residual"] <= 1e-8 and summary["n_samples"] == 100
    header, rows = read_csv(out / "residual.csv")
    assert header == ["flow", "state", "x", "z_re", "z_im", "residual"] and rows[0][0] == "Second(2)"


def test_residual_perturbed_control_fails(tmp_path):
    code, out = run(tmp_path, "residual", "--config", str(CONFIGS / "residual_second_elliptic.yaml"), "--perturb", "0.01")
    assert code == 1
    assert json.loads((out / "residual_summary.json").read_text())["max_residual"] > 1e-2


def test_residual_rational_mechanics(tmp_path):
    code, out = run(tmp_path, "residual", "--config", str(CONFIGS / "residual_rational_mech.yaml"))
    assert code == 0
    assert json.loads((out / "residual_summary.json").read_text())["max_residual"] <= 1e-12


def test_charges_report(tmp_path):
    code, out = run(tmp_path, "charges", "--config", str(CONFIGS / "charges.yaml"))
    assert code == 0
    header, rows = read_csv(out / "charges.csv")
    assert header[0] == "x" and len(header) == 1 + 2 * 6 and len(rows) == 256
    sites = json.loads((out / "charges.json").read_text())["sites"]
    for s in sites.values():
        assert abs(complex(*s["H1"]) - complex(*s["H1_explicit"])) <= 1e-8
        assert abs(complex(*s["H2"]) - complex(*s["H2_explicit"])) <= 1e-7


def test_charges_needs_a_field(tmp_path):
    cfg = yaml.safe_load((CONFIGS / "residual_rational_mech.yaml").read_text())
    assert run(tmp_path, "charges", "--config", write_config(tmp_path, cfg))[0] == 2


def test_charges_gauge_singularity_exits_three(tmp_path):
    from gaudin_lab.field import LoopState, OrbitField

    # a constant diagonal field has S_12 = 0 everywhere
    p = tmp_path / "diag.json"
    p.write_text(LoopState([OrbitField(1.0, np.eye(2), ())], 16).to_json())
    cfg = rational_field(field={"G": 16, "M": 4, "file": str(p)})
    cfg["model"]["lambda"] = [1.0]
    assert run(tmp_path, "charges", "--config", write_config(tmp_path, cfg))[0] == 3
