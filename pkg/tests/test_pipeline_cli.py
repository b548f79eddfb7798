import json
from dataclasses import replace

import numpy as np
import pytest

from closure.cli import build_parser, main
from closure.errors import DomainError
from closure.geometry import chord_to_geodesic_radius, geodesic_dist_so3, random_rotation
from closure.init_sampler import InitConfig
from closure.miniball import megb_so3, min_enclosing_ball
from closure.pipeline import run_closure
from closure.purse import Purse3D3D, PurseReg, WeightedBound
from closure.synth import SynthSpec, synth_purse
from closure.walk import PROFILES

LM = PROFILES["lm"][0]
SMALL = replace(LM, n_walks=10, n_iters=10)


def single_ball(rng, beta_R, beta_t):
    return PurseReg.isotropic(random_rotation(rng)[None], rng.normal(size=(1, 3)), beta_R, beta_t)


def test_single_hypothesis_reaches_boundary(rng):
    p = single_ball(rng, 0.2, 0.1)
    rep = run_closure(p, InitConfig(200, 3), SMALL)
    assert rep.D_hat >= 0.95 * chord_to_geodesic_radius(0.2)
    assert rep.d_hat >= 0.95 * 0.1


def test_degenerate_tiny_bounds(rng):
    p = single_ball(rng, 1e-6, 1e-6)
    rep = run_closure(p, InitConfig(50, 0), SMALL)
    assert rep.D_hat <= 2 * chord_to_geodesic_radius(1e-6)
    assert rep.d_hat <= 2e-6


def test_report_matches_emitted_samples():
    p, _ = synth_purse(SynthSpec("reg", 8, 0.2, 0.5, None, 1))
    rep = run_closure(p, InitConfig(200, 1), SMALL)
    Rb = rep.rotation_walk.boundary_rotations
    tb = rep.translation_walk.boundary_translations
    g = megb_so3(Rb)
    assert rep.D_hat == g.radius and np.array_equal(rep.center_rotation, g.center)
    assert rep.d_hat == min_enclosing_ball(tb).radius
    # the reported radius is the largest distance from the reported center
    assert rep.D_hat == float(np.max(geodesic_dist_so3(rep.center_rotation[None], Rb)))
    assert abs(rep.d_hat - np.max(np.linalg.norm(tb - rep.center_translation, axis=1))) == 0.0
    assert rep.n_boundary_rotations == len(Rb) and rep.n_boundary_translations == len(tb)


def test_more_walks_never_shrink_the_estimate():
    p, _ = synth_purse(SynthSpec("3d3d", 10, 0.1, 0.5, None, 2))
    small = run_closure(p, InitConfig(300, 2), replace(SMALL, n_walks=3))
    big = run_closure(p, InitConfig(300, 2), replace(SMALL, n_walks=6))
    assert big.D_hat >= small.D_hat - 1e-12
    assert big.d_hat >= small.d_hat - 1e-12


def test_thread_count_does_not_change_report():
    p, _ = synth_purse(SynthSpec("reg", 6, 0.2, 0.5, None, 4))
    a = run_closure(p, InitConfig(100, 4), SMALL, threads=1)
    b = run_closure(p, InitConfig(100, 4), SMALL, threads=3)
    assert a.to_json() == b.to_json()


def test_empty_purse_is_an_error():
    a = np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]])
    b = a.copy()
    b[0] += 5.0  # inconsistent with any rigid motion at this bound
    p = Purse3D3D(a, b, [WeightedBound(np.eye(3), 0.01)] * 3)
    with pytest.raises(DomainError, match="empty"):
        run_closure(p, InitConfig(100, 0), SMALL)
    with pytest.raises(DomainError):
        run_closure(p, InitConfig(100, 0), SMALL, threads=0)


# -- command line ----------------------------------------------------------------


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_synth_then_closure_is_byte_identical(tmp_path, capsys):
    purse = tmp_path / "p.json"
    assert run(capsys, "synth", "--kind", "reg", "--seed", 7, "--out", purse)[0] == 0
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    for r in (r1, r2):
        assert run(capsys, "closure", "--purse", purse, "--seed", 7, "--profile", "lm", "--out", r)[0] == 0
    assert r1.read_bytes() == r2.read_bytes()
    rep = json.loads(r1.read_text())
    assert rep["kind"] == "reg" and rep["seed"] == 7 and rep["profile"] == "lm"


def test_closure_threads_flag_and_env(tmp_path, capsys, monkeypatch):
    purse = tmp_path / "p.json"
    run(capsys, "synth", "--kind", "reg", "--n", 6, "--seed", 3, "--out", purse)
    args = ["closure", "--purse", purse, "--profile", "lm", "--n-trials", 100]
    _, one, _ = run(capsys, *args, "--threads", 1)
    monkeypatch.setenv("CLOSURE_THREADS", "2")
    _, env, _ = run(capsys, *args)
    assert one == env
    monkeypatch.setenv("CLOSURE_THREADS", "many")
    code, _, err = run(capsys, *args)
    assert code == 1 and "CLOSURE_THREADS" in err


def test_closure_side_outputs(tmp_path, capsys):
    purse = tmp_path / "p.json"
    run(capsys, "synth", "--kind", "3d3d", "--n", 10, "--seed", 1, "--out", purse)
    out = tmp_path
    code, _, _ = run(
        capsys, "closure", "--purse", purse, "--profile", "lmo", "--n-trials", 300, "--out", out / "r.json",
        "--trace", out / "trace.csv", "--samples", out / "s.csv", "--timings", out / "t.json",
    )
    assert code == 0
    rep = json.loads((out / "r.json").read_text())
    assert "timings" not in rep
    assert set(json.loads((out / "t.json").read_text())) == {"init", "walk", "miniball"}
    rows = (out / "s.csv").read_text().splitlines()
    assert rows[0].startswith("R00,") and len(rows) == rep["n_boundary_samples"]["rotation"] + 1
    assert len((out / "trace.csv").read_text().splitlines()) > 1


def test_params_override(tmp_path, capsys):
    purse, prm = tmp_path / "p.json", tmp_path / "prm.json"
    run(capsys, "synth", "--kind", "reg", "--n", 5, "--out", purse)
    prm.write_text(json.dumps({"n_walks": 3, "n_iters": 2}))
    _, out, _ = run(capsys, "closure", "--purse", purse, "--profile", "lm", "--params", prm, "--n-trials", 50)
    rep = json.loads(out)
    assert rep["params"]["n_walks"] == 3 and rep["params"]["n_iters"] == 2 and rep["init"]["n_trials"] == 50
    prm.write_text(json.dumps({"n_walkers": 3}))
    code, _, err = run(capsys, "closure", "--purse", purse, "--params", prm)
    assert code == 1 and "unknown walk parameters" in err


def test_ratio_with_equal_radii(tmp_path, capsys):
    rep, outer = tmp_path / "r.json", tmp_path / "o.json"
    rep.write_text(json.dumps({"D_hat": 0.25, "d_hat": 0.1}))
    outer.write_text(json.dumps({"D_bar": 0.25, "d_bar": 0.1}))
    code, out, _ = run(capsys, "ratio", "--report", rep, "--outer", outer)
    assert code == 0
    res = json.loads(out)
    assert res["eta_R"] == 1.0 and res["eta_t"] == 1.0 and res["method"] == "external"


def test_ratio_against_grid_bound(tmp_path, capsys):
    purse, rep = tmp_path / "p.json", tmp_path / "r.json"
    run(capsys, "synth", "--kind", "3d3d", "--n", 12, "--seed", 5, "--out", purse)
    run(capsys, "closure", "--purse", purse, "--profile", "3dmatch++", "--n-trials", 500, "--out", rep)
    code, out, _ = run(capsys, "ratio", "--report", rep, "--purse", purse, "--n-trials", 500, "--resolution", 2e-3)
    assert code == 0
    res = json.loads(out)
    assert 0 < res["eta_R"] <= 1 and 0 < res["eta_t"] <= 1 and res["method"] == "grid"


def test_ratio_needs_an_outer_source(tmp_path, capsys):
    rep = tmp_path / "r.json"
    rep.write_text(json.dumps({"D_hat": 0.25, "d_hat": 0.1}))
    assert run(capsys, "ratio", "--report", rep)[0] == 1


def test_sample_and_descent(tmp_path, capsys):
    purse, s = tmp_path / "p.json", tmp_path / "s.csv"
    run(capsys, "synth", "--kind", "3d3d", "--n", 10, "--out", purse)
    assert run(capsys, "sample", "--purse", purse, "--n-trials", 300, "--out", s)[0] == 0
    rows = s.read_text().splitlines()
    assert len(rows) > 2
    code, out, _ = run(capsys, "descent", "--samples", s, "--n-steps", 50, "--tail", 5)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "iter,f,dist_to_final" and len(lines) == 51
    code, out, _ = run(capsys, "descent", "--n", 30, "--n-steps", 20, "--tail", 2, "--out", tmp_path / "d.csv")
    assert code == 0 and out == "" and len((tmp_path / "d.csv").read_text().splitlines()) == 21


def test_sample_warns_when_few(tmp_path, capsys):
    purse, s = tmp_path / "p.json", tmp_path / "s.csv"
    run(capsys, "synth", "--kind", "3d3d", "--n", 10, "--out", purse)
    code, _, err = run(capsys, "sample", "--purse", purse, "--n-trials", 1, "--min-samples", 10, "--out", s)
    assert code == 0 and "warning" in err


def test_calibrate_subcommand(tmp_path, capsys):
    from closure.calibration import save_records, synth_records

    f = tmp_path / "rec.json"
    save_records(synth_records("3d3d", 50, 0), f)
    code, out, _ = run(capsys, "calibrate", "--records", f, "--epsilon", 0.2)
    assert code == 0 and json.loads(out)["alpha"] > 0
    save_records(synth_records("reg", 50, 0), f)
    code, out, _ = run(capsys, "calibrate", "--records", f, "--epsilon", 0.2)
    res = json.loads(out)
    assert code == 0 and res["k_R"] > 0 and res["k_t"] > 0


def test_selftest_exits_zero(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "selftest passed" in out


def test_unknown_flag_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["closure", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_missing_and_malformed_inputs(tmp_path, capsys):
    code, _, err = run(capsys, "closure", "--purse", tmp_path / "nope.json")
    assert code == 1 and err.startswith("error:")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "closure", "--purse", bad)[0] == 1


def test_synth_truth_file(tmp_path, capsys):
    truth = tmp_path / "gt.json"
    _, out, _ = run(capsys, "synth", "--kind", "2d3d", "--n", 6, "--seed", 2, "--truth", truth)
    gt = json.loads(truth.read_text())
    assert len(gt["R"]) == 9 and len(gt["t"]) == 3
    assert json.loads(out)["kind"] == "2d3d"


def test_parser_lists_all_subcommands():
    sub = next(a for a in build_parser()._actions if a.dest == "cmd")
    assert set(sub.choices) == {"closure", "sample", "calibrate", "synth", "ratio", "descent", "selftest"}
