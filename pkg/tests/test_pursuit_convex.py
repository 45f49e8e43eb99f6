import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_unit_atoms
from csc.conv_model import ConvOperator, LocalDictionary
from csc.errors import NoConvergence
from csc.pursuit_convex import (BP_BATCH_COLUMNS, BpConfig, LambdaSchedule, bp_admm_local,
                                bp_batch_experiment, bp_global_reference, bp_ist_local,
                                bp_objective, bp_trial, hard_threshold, kkt_certified,
                                kkt_residuals, polish_bp, soft_threshold, step_constant)
from csc.signals import SignalSpec, dct_local_dictionary, experiment_dictionary
import oracles

SOLVERS = (bp_global_reference, bp_ist_local, bp_admm_local)


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(7)
    op = ConvOperator(LocalDictionary(random_unit_atoms(rng, 4, 2)), 16)
    code = np.zeros(32)
    code[[3, 14, 25]] = [1.5, -2.0, 1.0]
    y = op.apply(code) + 0.05 * rng.standard_normal(16)
    return op, y


def quiet(fn, *args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoConvergence)
        return fn(*args, **kw)


# -- thresholding ----------------------------------------------------------------------

def test_soft_threshold_examples():
    assert list(soft_threshold([3.0, -3.0, 0.5, -1.0, 0.0], 1.0)) == [2.0, -2.0, 0.0, 0.0, 0.0]
    assert list(soft_threshold([1.5], 0.0)) == [1.5]
    with pytest.raises(ValueError):
        soft_threshold([1.0], -0.1)
    assert list(hard_threshold([3.0, -0.5, 1.0], 1.0)) == [3.0, 0.0, 0.0]


@given(st.floats(-5, 5), st.floats(0, 3))
def test_soft_threshold_is_the_prox(v, t):
    assert soft_threshold(v, t) == pytest.approx(oracles.soft_threshold_grid(v, t), abs=2e-4)


# -- configuration ------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {}, {"lam": 1.0, "schedule": LambdaSchedule()}, {"lam": -1.0}, {"lam": 1.0, "tol": 0.0},
    {"lam": 1.0, "step_safety": 1.0}, {"lam": 1.0, "mode": "l2"}, {"lam": 1.0, "max_iterations": 0},
])
def test_bp_config_validation(kw):
    with pytest.raises(ValueError):
        BpConfig(**kw)


def test_schedule_validation():
    for kw in ({"decay": 1.0}, {"decay": 0.0}, {"floor": -1.0}):
        with pytest.raises(ValueError):
            LambdaSchedule(**kw)


def test_schedule_decays_to_floor(small):
    op, y = small
    res = quiet(bp_global_reference, op, y,
                BpConfig(schedule=LambdaSchedule(decay=0.5, floor=1e-3), max_iterations=400))
    assert res.lam == pytest.approx(1e-3)
    start = 0.1 * np.abs(op.adjoint(y)).max()
    res = quiet(bp_global_reference, op, y,
                BpConfig(schedule=LambdaSchedule(decay=0.5), max_iterations=3))
    assert res.lam == pytest.approx(start * 0.25)


# -- trivial cases -------------------------------------------------------------------------

@pytest.mark.parametrize("solver", SOLVERS)
def test_large_lambda_gives_zero(small, solver):
    op, y = small
    lam = float(np.abs(op.adjoint(y)).max()) * 1.0001
    res = solver(op, y, BpConfig(lam=lam))
    # the consensus solver averages stripes, so its zeros are only numerical
    assert np.abs(res.code).max() < 1e-6 and res.support.size == 0 and res.converged


@pytest.mark.parametrize("solver", SOLVERS)
def test_zero_signal(small, solver):
    op, _ = small
    res = solver(op, np.zeros(16), BpConfig(lam=0.1))
    assert not res.code.any()


# -- agreement with independent solvers ------------------------------------------------

def test_reference_matches_dense_lasso(small):
    op, y = small
    lam = 0.1
    res = bp_global_reference(op, y, BpConfig(lam=lam, tol=1e-13, max_iterations=200_000))
    D = oracles.dense_dictionary(op.local.atoms, op.N)
    ref = oracles.lasso_split(D, y, lam)
    assert np.abs(res.code - ref).max() < 1e-5
    obj = bp_objective(op, y, res.code, lam)
    assert obj <= 0.5 * np.sum((y - D @ ref) ** 2) + lam * np.abs(ref).sum() + 1e-10
    off, on = oracles.kkt_violation(D, y, res.code, lam)
    assert off <= 1e-6 and on <= 1e-6
    assert kkt_residuals(op, y, res.code, lam, 1e-9) == pytest.approx(
        (off / lam, on / lam), abs=1e-12)


def test_noiseless_schedule_approaches_l1_minimizer():
    op = ConvOperator(dct_local_dictionary(6, 2), 18)
    code = np.zeros(36)
    code[[2, 17]] = [1.2, -1.6]
    y = op.apply(code)
    res = quiet(bp_global_reference, op, y, BpConfig(schedule=LambdaSchedule(), tol=1e-12,
                                                     max_iterations=30000))
    lp = oracles.basis_pursuit_lp(oracles.dense_dictionary(op.local.atoms, 18), y)
    assert np.abs(res.code - lp).max() < 1e-4


def test_ist_first_iteration(small):
    op, y = small
    c = step_constant(op, BpConfig(lam=0.1))
    res = quiet(bp_ist_local, op, y, BpConfig(lam=0.1, max_iterations=1), c=c)
    assert np.allclose(res.code, soft_threshold(op.adjoint(y) / c, 0.1 / c), atol=1e-14)


def test_ist_local_is_bitwise_lockstep_with_reference(small):
    op, y = small
    c = step_constant(op, BpConfig(lam=0.05))
    cfg = BpConfig(lam=0.05, max_iterations=50, tol=1e-300)
    seen = {"ref": [], "ist": []}
    quiet(bp_global_reference, op, y, cfg, c=c, callback=lambda k, g: seen["ref"].append(g.copy()))
    quiet(bp_ist_local, op, y, cfg, c=c, callback=lambda k, g: seen["ist"].append(g.copy()))
    assert len(seen["ref"]) == len(seen["ist"]) == 50
    for a, b in zip(seen["ref"], seen["ist"]):
        assert np.array_equal(a, b)


@pytest.mark.parametrize("rho", [0.1, 1.0])
def test_admm_reaches_reference_objective(small, rho):
    op, y = small
    lam = 0.1
    ref = bp_global_reference(op, y, BpConfig(lam=lam, tol=1e-12, max_iterations=200_000))
    admm = bp_admm_local(op, y, BpConfig(lam=lam, tol=1e-10, max_iterations=200_000), rho=rho)
    assert admm.converged
    f_ref = bp_objective(op, y, ref.code, lam)
    assert abs(bp_objective(op, y, admm.code, lam) - f_ref) <= 1e-5 * max(1.0, f_ref)
    assert np.abs(admm.code - ref.code).max() < 1e-5
    # consensus: the local centre codes agree with the aggregated code
    assert np.abs(admm.extras["local_codes"] - admm.code).max() < 1e-6


def test_admm_rejects_bad_rho(small):
    with pytest.raises(ValueError):
        bp_admm_local(*small, BpConfig(lam=0.1), rho=0.0)


@pytest.mark.parametrize("solver", (bp_global_reference, bp_ist_local))
def test_objective_monotone_for_fixed_lambda(small, solver):
    op, y = small
    res = quiet(solver, op, y, BpConfig(lam=0.05, max_iterations=500, tol=1e-300))
    obj = np.array(res.objective)
    assert np.all(np.diff(obj) <= 1e-12 * obj[:-1])
    assert [t["iter"] for t in res.trace] == list(range(1, 501))


def test_iteration_cap_warns(small):
    with pytest.warns(NoConvergence):
        res = bp_global_reference(*small, BpConfig(lam=0.01, max_iterations=2))
    assert not res.converged and res.iterations == 2


@pytest.mark.parametrize("solver", SOLVERS)
def test_l0_mode_runs(small, solver):
    op, y = small
    res = quiet(solver, op, y, BpConfig(lam=0.05, mode="l0", max_iterations=2000))
    assert np.all(np.isfinite(res.code))
    assert 0 < res.support.size < op.N * op.m
    assert res.residual_norms[-1] < np.linalg.norm(y)


# -- certificates -------------------------------------------------------------------------

def test_polish_snaps_to_exact_solution(small):
    op, y = small
    lam = 0.1
    rough = quiet(bp_global_reference, op, y, BpConfig(lam=lam, tol=1e-6, max_iterations=3000))
    assert not kkt_certified(op, y, rough.code, lam, 1e-9)
    polished = polish_bp(op, y, rough.code, lam, supp_tol=1e-9)
    assert kkt_certified(op, y, polished, lam, 1e-9)
    assert np.abs(polished - rough.code).max() < 1e-3
    assert not polish_bp(op, y, np.zeros(32), lam).any()
    wrong = np.zeros(32)
    wrong[0] = -5.0
    assert np.array_equal(polish_bp(op, y, wrong, lam), wrong)


def test_kkt_zero_code(small):
    op, y = small
    lam_max = np.abs(op.adjoint(y)).max()
    off, on = kkt_residuals(op, y, np.zeros(32), lam_max)
    assert off == pytest.approx(0.0, abs=1e-15) and on == 0.0
    assert not kkt_certified(op, y, np.zeros(32), 0.5 * lam_max)


# -- planted-signal trials ---------------------------------------------------------------

def test_bp_trial_row():
    op = ConvOperator(experiment_dictionary(), 640)
    spec = SignalSpec(seed=2, cardinality=(1, 8), scale=(1.0, 100.0), noise="norm", noise_level=0.1)
    row = bp_trial(op, spec, 0)
    assert row["lam"] == pytest.approx(4 * row["eps_L"])
    assert row["converged"] and row["kkt_off"] <= 1e-4 and row["kkt_on"] <= 1e-4
    assert row["linf_ratio"] == pytest.approx(row["linf_error"] / row["eps_L"])
    assert row["code"].shape == (1280,)
    rows = bp_batch_experiment(op, 2, cardinality_range=(1, 8), amplitude_range=(1.0, 100.0),
                               seed=2)
    assert set(BP_BATCH_COLUMNS) <= set(rows[0]) and "code" not in rows[0]
    assert rows[0]["linf_error"] == row["linf_error"]
