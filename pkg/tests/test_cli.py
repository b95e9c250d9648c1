import json

import pytest

from hawkesq.cli import main

H1 = {"type": "sum_exp", "terms": [{"alpha": 0.5, "beta": 1.0}]}
H2 = {"type": "sum_exp", "terms": [{"alpha": 0.1, "beta": 0.25},
                                   {"alpha": 0.4, "beta": 4.0}]}
ZERO = {"type": "sum_exp", "terms": []}


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_command(tmp_path):
    cfg = _write(tmp_path, "sim.json", {
        "name": "demo", "kernel": H1, "mu": 20.0, "horizon": 5.0,
        "reps": 300, "seed": 5, "probe_times": [5.0]})
    code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    outdir = tmp_path / "out" / "simulate" / "demo"
    moments = json.loads((outdir / "moments.json").read_text())
    assert abs(moments["mean"][0][0] - 200.0) < 10.0   # lambda*t = 40*5
    assert (outdir / "paths.csv").exists()
    assert json.loads((outdir / "manifest.json").read_text())["seed"] == 5


def test_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2
    missing = _write(tmp_path, "missing.json", {"kernel": H1})
    assert main(["simulate", "--config", missing, "--out", str(tmp_path / "o")]) == 2
    unstable = _write(tmp_path, "unstable.json", {
        "kernel": {"type": "sum_exp", "terms": [{"alpha": 2.0, "beta": 1.0}]},
        "mu": 1.0, "horizon": 1.0})
    assert main(["simulate", "--config", unstable, "--out", str(tmp_path / "o")]) == 2


def test_analyze_command_h2(tmp_path):
    cfg = _write(tmp_path, "an.json", {
        "name": "h2", "kernel": H2, "grid": {"dt": 0.02, "t_max": 80.0}, "seed": 1})
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    outdir = tmp_path / "out" / "analyze" / "h2"
    lap = json.loads((outdir / "laplace.json").read_text())
    assert lap["R"] == pytest.approx([0.83333, 0.15873], abs=5e-4)
    assert lap["Xtilde"] == pytest.approx([1.2, 0.2], abs=1e-9)
    asym = json.loads((outdir / "asymptotics.json").read_text())
    assert asym["slope"] == pytest.approx(8.0)
    assert asym["offset"] == pytest.approx(-40.2, abs=5e-2)
    for name in ("phi.csv", "K.csv", "covG.csv"):
        assert (outdir / name).exists()


def test_analyze_zero_kernel(tmp_path):
    cfg = _write(tmp_path, "z.json", {"name": "z", "kernel": ZERO,
                                      "grid": {"dt": 0.05, "t_max": 40.0}, "seed": 1})
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "out")]) == 0
    phi = (tmp_path / "out" / "analyze" / "z" / "phi.csv").read_text().splitlines()
    assert all(line.endswith(",0") for line in phi[1:])


def test_validate_fclt_poisson(tmp_path):
    cfg = _write(tmp_path, "f.json", {
        "name": "poisson", "kernel": ZERO, "mu": 50.0, "reps": 1500,
        "probe_times": [1.0, 2.0], "seed": 3, "grid": {"dt": 0.05, "t_max": 40.0}})
    code = main(["validate-fclt", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    report = json.loads(
        (tmp_path / "out" / "validate-fclt" / "poisson" / "report.json").read_text())
    assert report["pass"] and report["max_abs_z"] < 3.0


def test_validate_fclt_multivariate_decoupled(tmp_path):
    kernel = {"type": "matrix", "p": [1.0, 1.0],
              "entries": [[H1, ZERO], [ZERO, H1]]}
    cfg = _write(tmp_path, "m.json", {
        "name": "dec", "kernel": kernel, "mu": 20.0, "reps": 1200,
        "probe_times": [1.0, 2.0], "seed": 6, "grid": {"dt": 0.05, "t_max": 40.0}})
    code = main(["validate-fclt", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    report = json.loads(
        (tmp_path / "out" / "validate-fclt" / "dec" / "report.json").read_text())
    cross = [c for c in report["checks"] if "dims" in c]
    assert cross and all(abs(c["z"]) < 3.0 for c in cross)


def test_validate_queue_poisson(tmp_path):
    cfg = _write(tmp_path, "q.json", {
        "name": "mmq", "kernel": ZERO, "mu": 20.0,
        "service": {"type": "exponential", "rate": 1.0},
        "n_samples": 3000, "seed": 4, "tv_threshold": 0.1})
    code = main(["validate-queue", "--config", cfg, "--out", str(tmp_path / "out")])
    assert code == 0
    verdict = json.loads(
        (tmp_path / "out" / "validate-queue" / "mmq" / "verdict.json").read_text())
    assert verdict["pass"]


def test_manifest_rerun_is_bitwise(tmp_path):
    cfg = _write(tmp_path, "sim.json", {
        "name": "first", "kernel": H1, "mu": 10.0, "horizon": 3.0,
        "reps": 50, "seed": 11, "probe_times": [3.0]})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    manifest = tmp_path / "a" / "simulate" / "first" / "manifest.json"
    assert main(["simulate", "--config", str(manifest), "--out", str(tmp_path / "b")]) == 0
    for name in ("paths.csv", "moments.json"):
        first = (tmp_path / "a" / "simulate" / "first" / name).read_bytes()
        second = (tmp_path / "b" / "simulate" / "first" / name).read_bytes()
        assert first == second


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, "sim.json", {
        "name": "s", "kernel": H1, "mu": 10.0, "horizon": 2.0,
        "reps": 20, "seed": 1, "probe_times": [2.0]})
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "simulate" / "s" / "paths.csv").read_bytes()
    b = (tmp_path / "b" / "simulate" / "s" / "paths.csv").read_bytes()
    assert a != b
