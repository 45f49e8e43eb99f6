import csv

import numpy as np
import pytest

from csc.bench import (DEFAULTS, PLAN_NAMES, ExperimentPlan, noisy_lambda, run_experiment,
                       verify)
from csc.cli import main
from csc.conv_model import ConvOperator, LocalDictionary
from csc.errors import MissingArtifact, PlanInvalid
from csc.io import load_dictionary, load_vector, save_vector
from csc.signals import dct_local_dictionary

SMALL = {
    "fig2-omp-distance": "trials=6\nN=128\ncardinality=1,12\n",
    "fig3a-omp-phase": "trials=4\nN=128\ncardinality=1,12\n",
    "fig3b-bp-phase": "trials=3\nN=128\ncardinality=1,6\nscale=1,100\n",
    "fig4-bp-linf": "trials=3\nN=128\ncardinality=1,6\nscale=1,100\n",
    "fig5-admm-evolution": "N=50\ncardinality=4\ndecay=0.995\nsnapshots=5,50\nmax_iterations=6000\n",
    "fig6-convergence-time": "N=50\ncardinality=4\nsigmas=0.05\nmax_iterations=20000\n",
}


def write_plan(tmp_path, name, extra="", out="run"):
    path = tmp_path / f"{name}.plan"
    path.write_text(f"name={name}\nout={out}\n{SMALL[name]}{extra}")
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- plans -------------------------------------------------------------------------------

def test_every_experiment_has_defaults():
    assert set(PLAN_NAMES) == set(DEFAULTS)
    for name in PLAN_NAMES:
        plan = ExperimentPlan.from_text(f"name={name}\n")
        assert plan.trials >= 1 and plan.out.name == name


def test_plan_overrides_and_paths(tmp_path):
    plan = ExperimentPlan.load(write_plan(tmp_path, "fig2-omp-distance", "seed=7\n", out="x/y"))
    assert plan.out == tmp_path / "x" / "y"
    assert plan.trials == 6 and plan.N == 128 and plan.spec.seed == 7
    assert plan.spec.cardinality == (1, 12)
    again = ExperimentPlan.from_text(plan.to_keyvalue(), tmp_path)
    assert again.to_keyvalue() == plan.to_keyvalue()


@pytest.mark.parametrize("text", [
    "trials=3\n",
    "name=fig9\n",
    "name=fig2-omp-distance\nbogus=1\n",
    "name=fig2-omp-distance\nworkers=zero\n",
    "name=fig2-omp-distance\nworkers=0\n",
    "name=fig2-omp-distance\ntrials=0\n",
    "name=fig2-omp-distance\namplitude=cauchy\n",
    "name=fig2-omp-distance\nno equals sign\n",
])
def test_bad_plans(text):
    with pytest.raises((PlanInvalid, ValueError)):
        ExperimentPlan.from_text(text)


def test_missing_plan_file(tmp_path):
    with pytest.raises(MissingArtifact):
        ExperimentPlan.load(tmp_path / "nope.plan")
    assert main(["run", str(tmp_path / "nope.plan")]) == 2


def test_noisy_lambda():
    op = ConvOperator(dct_local_dictionary(), 300)
    assert noisy_lambda(0.02, op) == pytest.approx(0.02 * np.sqrt(2 * np.log(1500)))


# -- runs and verification --------------------------------------------------------------

@pytest.mark.parametrize("name", PLAN_NAMES)
def test_small_runs_verify(tmp_path, name):
    plan = ExperimentPlan.load(write_plan(tmp_path, name))
    summary = run_experiment(plan)
    assert not summary.failures and summary.rows > 0
    for f in ("results.csv", "timing.csv", "metadata.txt", "plot.txt", "render_plot.py"):
        assert (plan.out / f).is_file()
    report = verify(plan.out)
    assert report.experiment == name
    if name != "fig3a-omp-phase":          # too few trials for the failure-region check
        assert report.passed, report.render()
    meta = (plan.out / "metadata.txt").read_text()
    assert f"name={name}" in meta and "rng=philox4x64-10/v1" in meta


def test_runs_are_deterministic(tmp_path):
    a = ExperimentPlan.load(write_plan(tmp_path, "fig4-bp-linf", out="a"))
    b = ExperimentPlan.load(write_plan(tmp_path, "fig4-bp-linf", "workers=2\n", out="b"))
    run_experiment(a)
    run_experiment(b)
    assert (a.out / "results.csv").read_bytes() == (b.out / "results.csv").read_bytes()


def test_doctored_row_fails_verification(tmp_path, capsys):
    plan = ExperimentPlan.load(write_plan(tmp_path, "fig2-omp-distance"))
    run_experiment(plan)
    path = plan.out / "results.csv"
    rows = read_rows(path)
    target = next(i for i, r in enumerate(rows) if r["coherence_hyp"] == "1")
    rows[target]["coherence_bound"] = "1e-30"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    report = verify(plan.out)
    assert not report.passed
    assert any(f"row {target + 2} " in v for v in report.violations)
    assert main(["verify", str(plan.out)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_missing_artifacts(tmp_path):
    with pytest.raises(MissingArtifact):
        verify(tmp_path)
    assert main(["verify", str(tmp_path)]) == 2
    (tmp_path / "metadata.txt").write_text("experiment=fig2-omp-distance\n")
    (tmp_path / "results.csv").write_text("trial,l0\n")
    with pytest.raises(MissingArtifact):
        verify(tmp_path)


def test_cli_run_and_verify(tmp_path, capsys):
    plan = write_plan(tmp_path, "fig2-omp-distance")
    assert main(["run", str(plan)]) == 0
    assert main(["verify", str(tmp_path / "run")]) == 0
    assert "PASS" in capsys.readouterr().out


# -- gen-dict and solve ------------------------------------------------------------------

def test_gen_dict(tmp_path, capsys):
    out = tmp_path / "d.convdict"
    assert main(["gen-dict", "--dct", "--n", "8", "--m", "3", "--out", str(out), "--N", "32"]) == 0
    assert np.allclose(load_dictionary(out), dct_local_dictionary(8, 3).atoms)
    assert "mu =" in capsys.readouterr().out
    out2 = tmp_path / "g.convdict"
    assert main(["gen-dict", "--n", "8", "--m", "2", "--band", "0", "0.35", "--target", "0.35",
                 "--seed", "2", "--out", str(out2)]) == 0
    assert load_dictionary(out2).shape == (8, 2)


@pytest.mark.parametrize("extra", [
    ["--solver", "omp", "--n-nonzero", "3"],
    ["--solver", "omp", "--eps", "1e-6"],
    ["--solver", "ista", "--lambda", "0.01"],
    ["--solver", "ist-local", "--lambda", "0.01"],
    ["--solver", "admm", "--lambda", "0.01", "--rho", "0.5"],
    ["--solver", "ista", "--lambda-schedule", "0.9", "--max-iters", "3000"],
])
def test_solve_round_trip(tmp_path, extra):
    d = tmp_path / "d.convdict"
    main(["gen-dict", "--dct", "--n", "6", "--m", "2", "--out", str(d)])
    op = ConvOperator(LocalDictionary(load_dictionary(d)), 24)
    code = np.zeros(48)
    code[[4, 21, 40]] = [1.0, -1.5, 2.0]
    save_vector(tmp_path / "y.vec", op.apply(code))
    args = ["solve", "--in", str(tmp_path / "y.vec"), "--dict", str(d),
            "--out", str(tmp_path / "g.vec"), "--trace", str(tmp_path / "t.csv")] + extra
    assert main(args) == 0
    g = load_vector(tmp_path / "g.vec")
    assert g.shape == (48,)
    assert np.linalg.norm(op.apply(g) - op.apply(code)) < 0.1 * np.linalg.norm(op.apply(code))
    assert read_rows(tmp_path / "t.csv")[0]["iter"] == "1"


@pytest.mark.parametrize("args", [
    [],
    ["solve"],
    ["solve", "--solver", "lars", "--in", "y", "--dict", "d", "--out", "g"],
    ["solve", "--solver", "omp", "--in", "missing.vec", "--dict", "missing.convdict", "--out", "g"],
    ["gen-dict"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(args):
    assert main(args) == 2


def test_solve_argument_conflicts(tmp_path):
    d = tmp_path / "d.convdict"
    main(["gen-dict", "--dct", "--n", "4", "--m", "1", "--out", str(d)])
    save_vector(tmp_path / "y.vec", np.ones(8))
    base = ["solve", "--in", str(tmp_path / "y.vec"), "--dict", str(d), "--out", str(tmp_path / "g")]
    assert main(base + ["--solver", "omp"]) == 2
    assert main(base + ["--solver", "ista"]) == 2
    assert main(base + ["--solver", "ista", "--lambda", "1", "--lambda-schedule", "0.9"]) == 2
    (tmp_path / "bad.vec").write_text("vec v1 len=3\n1\n")
    bad = ["solve", "--in", str(tmp_path / "bad.vec"), "--dict", str(d), "--out", "g",
           "--solver", "omp", "--n-nonzero", "1"]
    assert main(bad) == 2


def test_noiseless_single_omp_trial_is_exact(tmp_path):
    # at most 6 atoms keeps l0_inf under the exact-recovery threshold (about 6.1 here)
    plan = ExperimentPlan(name="fig2-omp-distance", out=tmp_path / "run",
                          options={"trials": 1, "noise": "none", "noise_level": 0.0,
                                   "cardinality": "1,6"})
    run_experiment(plan)
    rows = read_rows(plan.out / "results.csv")
    assert len(rows) == 1 and float(rows[0]["distance_l2"]) <= 1e-8
