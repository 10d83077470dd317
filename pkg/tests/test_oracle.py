import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optinject.decorrelate import decorrelate
from optinject.demo import make_data, make_instance
from optinject.ensemble import SampleEnsemble, omega_norm_sq
from optinject.estimator import (
    Estimator,
    FullRankEstimator,
    empirical_error,
    fit_full_rank,
    fit_rank_constrained,
)
from optinject.oracle import (
    compare,
    naive_objective,
    oracle_full_solution,
    oracle_rank_solution,
    perturbation_sweep,
    z_perturbation_sweep,
)


def _seeded():
    x, y, _ = make_data(21, 4, 3, 80)
    sys = decorrelate([y, SampleEnsemble(y.samples ** 2)])
    return x, y, sys


def test_compare_gaps_exact():
    rep = compare("t", 3.0, 2.5, 0.1, {"seed": 1})
    assert rep.abs_gap == 0.5 and rep.rel_gap == 0.5 / 2.5
    assert not rep.passed
    assert compare("t", 0.1, 0.1 + 1e-13, 1e-12).passed
    json.dumps(rep.to_dict())


def test_rank_solution_full_rank_equals_wiener():
    x, _, sys = _seeded()
    for j, z in enumerate(sys.z):
        lhs = oracle_rank_solution(x, z, x.dim, floor=sys.floors[j])
        rhs = oracle_full_solution(x, z, floor=sys.floors[j])
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)
        np.testing.assert_allclose(rhs, fit_full_rank(x, sys).products()[j], atol=1e-10)


def test_rank_solution_zero_cross():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((20, 4)))
    x, z = SampleEnsemble(q[:, :2].T), SampleEnsemble(q[:, 2:].T)
    np.testing.assert_allclose(oracle_rank_solution(x, z, 1), 0.0, atol=1e-15)


@given(st.integers(0, 10_000))
def test_rank_solution_matches_estimator(seed):
    inst = make_instance(seed)
    sys = decorrelate(inst.v)
    est = fit_rank_constrained(inst.x, sys, inst.ranks)
    for j, s in enumerate(est.products()):
        o = oracle_rank_solution(inst.x, sys.z[j], inst.ranks[j], floor=sys.floors[j])
        assert np.linalg.norm(s - o) <= 1e-8 * max(1.0, np.linalg.norm(o))


def test_sweep_trivial():
    x, _, sys = _seeded()
    est = fit_rank_constrained(x, sys, (1, 1))
    rep = perturbation_sweep(x, sys, est, count=1, magnitude=0.0)
    assert rep.abs_gap == 0.0 and rep.passed


def test_sweep_fitted_and_detuned():
    x, _, sys = _seeded()
    est = fit_rank_constrained(x, sys, (2, 1))
    assert perturbation_sweep(x, sys, est, count=1000, seed=4).passed
    bad = Estimator([(g * 1.2, h) for g, h in est.blocks])
    rep = perturbation_sweep(x, sys, bad, count=200, seed=4)
    assert not rep.passed and rep.oracle < rep.primary
    full = fit_full_rank(x, sys)
    assert perturbation_sweep(x, sys, full, count=300, seed=5).passed
    with pytest.raises(ValueError):
        perturbation_sweep(x, sys, est, count=0)


def test_sweep_is_deterministic():
    x, _, sys = _seeded()
    est = fit_rank_constrained(x, sys, (2, 1))
    a = perturbation_sweep(x, sys, est, count=50, seed=9)
    b = perturbation_sweep(x, sys, est, count=50, seed=9)
    assert a == b


def test_naive_objective_cases():
    x, _, sys = _seeded()
    zero = Estimator([(np.zeros((4, 1)), np.zeros((1, z.dim))) for z in sys.z])
    assert naive_objective(x, zero.blocks, sys.z) == pytest.approx(omega_norm_sq(x), rel=1e-15)
    z = SampleEnsemble(np.random.default_rng(1).standard_normal((3, 10)))
    m = np.random.default_rng(2).standard_normal((2, 3))
    target = SampleEnsemble(m @ z.samples)
    assert naive_objective(target, [m], [z]) <= 1e-28
    est = fit_rank_constrained(x, sys, (2, 1))
    assert abs(naive_objective(x, est.blocks, sys.z) - empirical_error(x, est, sys)) <= 1e-12


def test_z_sweep_single_block():
    x, y, sys = _seeded()
    est = fit_rank_constrained(x, sys, (1, 2))
    s1 = est.products()[1]
    z = [y, SampleEnsemble(np.linalg.pinv(s1) @ x.samples)]
    assert z_perturbation_sweep(x, est, z, count=100, blocks=1, seed=1).passed
    worse = [y, SampleEnsemble(1.5 * z[1].samples)]
    assert not z_perturbation_sweep(x, est, worse, count=100, blocks=1, seed=1).passed
