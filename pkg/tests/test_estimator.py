import re
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from optinject.decorrelate import DecorrelatedSystem, LiftInjection, InjectionFamily, decorrelate
from optinject.demo import make_data, make_instance
from optinject.ensemble import SampleEnsemble, estimate_cov, omega_norm_sq
from optinject.estimator import (
    Estimator,
    FullRankEstimator,
    IllDefinedInjectionWarning,
    NumericalError,
    RankProfile,
    _clamp,
    a_matrix,
    degree_comparison,
    diagnostics,
    empirical_error,
    estimator_from_json,
    fit_full_rank,
    fit_rank_constrained,
    predict,
    predicted_error_full,
    predicted_error_rank,
)
from optinject.oracle import oracle_rank_solution


def _rng(seed):
    return np.random.default_rng(seed)


def _orthogonal_rows(seed, n_samples, *dims):
    """Ensembles whose rows are mutually orthogonal over the samples."""
    q, _ = np.linalg.qr(_rng(seed).standard_normal((n_samples, sum(dims))))
    out, o = [], 0
    for d in dims:
        out.append(SampleEnsemble(np.sqrt(n_samples) * q[:, o:o + d].T))
        o += d
    return out


# rank profile ----------------------------------------------------------------
def test_rank_profile():
    prof = RankProfile((2, 1, 1), m=5, n=4)
    assert (prof.r, prof.degree) == (4, 2)
    assert prof.c == 1.0
    with pytest.raises(ValueError, match=re.escape("r ≤ min{m,n}")):
        RankProfile((3, 2), m=4, n=6)
    with pytest.raises(ValueError, match="0 < r_j"):
        RankProfile((2, 0), m=4, n=4)
    with pytest.raises(ValueError):
        RankProfile((), m=4, n=4)


# fitting ------------------------------------------------------------------------
def test_identity_fit():
    x = SampleEnsemble(_rng(0).standard_normal((3, 40)))
    sys = decorrelate([x])
    est = fit_rank_constrained(x, sys, [3])
    np.testing.assert_allclose(est.products()[0], np.eye(3), atol=1e-12)
    assert empirical_error(x, est, sys) <= 1e-24


def test_identity_fit_rank_deficient_x():
    base = _rng(1).standard_normal((2, 40))
    x = SampleEnsemble(np.vstack([base, base[:1] + base[1:]]))  # rank 2 in R^3
    sys = decorrelate([x])
    s = fit_rank_constrained(x, sys, [3]).products()[0]
    e = estimate_cov(x, x)
    np.testing.assert_allclose(s @ e, e, atol=1e-10)
    assert empirical_error(x, fit_rank_constrained(x, sys, [3]), sys) <= 1e-20


def test_uncorrelated_block_is_zero_with_warning():
    y, z1 = _orthogonal_rows(2, 30, 2, 2)
    x = SampleEnsemble(y.samples[::-1] * [[2.0], [1.0]])
    sys = DecorrelatedSystem.from_uncorrelated([y, z1])
    with pytest.warns(IllDefinedInjectionWarning):
        est = fit_rank_constrained(x, sys, [1, 1])
    assert not np.any(est.products()[1])
    np.testing.assert_allclose(fit_full_rank(x, sys).products()[1], 0.0, atol=1e-15)


def test_two_path_seeded():
    x, y, _ = make_data(11, 5, 4, 120)
    sys = decorrelate([y, SampleEnsemble(np.tanh(y.samples) ** 2)])
    est = fit_rank_constrained(x, sys, (2, 1))
    for j, r in enumerate((2, 1)):
        oracle = oracle_rank_solution(x, sys.z[j], r, floor=sys.floors[j])
        gap = np.linalg.norm(est.products()[j] - oracle)
        assert gap <= 1e-8 * max(1.0, np.linalg.norm(oracle))


def test_rank_exceeding_m_rejected():
    x = SampleEnsemble(_rng(3).standard_normal((2, 10)))
    with pytest.raises(ValueError, match="exceeds m"):
        fit_rank_constrained(x, decorrelate([x]), [3])
    with pytest.raises(ValueError, match="ranks for"):
        fit_rank_constrained(x, decorrelate([x]), [1, 1])


def test_full_rank_identity_and_formula():
    x = SampleEnsemble(_rng(4).standard_normal((3, 25)))
    sys = decorrelate([x])
    np.testing.assert_allclose(fit_full_rank(x, sys).products()[0], np.eye(3), atol=1e-12)
    assert predicted_error_full(x, sys) == pytest.approx(0.0, abs=1e-12)
    xx, y, _ = make_data(5, 4, 3, 90)
    sys = decorrelate([y, SampleEnsemble(y.samples ** 2)])
    full = fit_full_rank(xx, sys)
    assert abs(empirical_error(xx, full, sys) - predicted_error_full(xx, sys)) <= 1e-8


def test_predict_cases():
    z = SampleEnsemble(_rng(5).standard_normal((3, 7)))
    zero = Estimator([(np.zeros((2, 1)), np.zeros((1, 3)))])
    np.testing.assert_array_equal(predict(zero, [z]).samples, np.zeros((2, 7)))
    ident = FullRankEstimator([np.eye(3)])
    np.testing.assert_array_equal(predict(ident, [z]).samples, z.samples)
    with pytest.raises(ValueError):
        predict(ident, [z, z])
    with pytest.raises(ValueError):
        predict(FullRankEstimator([np.eye(2)]), [z])


def test_predict_matches_column_loop():
    inst = make_instance(8)
    sys = decorrelate(inst.v)
    est = fit_rank_constrained(inst.x, sys, inst.ranks)
    out = predict(est, sys).samples
    for k in range(0, inst.x.n_samples, 17):
        col = sum(g @ (h @ z.samples[:, k]) for (g, h), z in zip(est.blocks, sys.z))
        np.testing.assert_allclose(out[:, k], col, rtol=1e-12, atol=1e-12)


def test_empirical_error_cases():
    x = SampleEnsemble(_rng(6).standard_normal((2, 12)))
    sys = decorrelate([x])
    zero = FullRankEstimator([np.zeros((2, 2))])
    assert empirical_error(x, zero, sys) == omega_norm_sq(x)
    assert empirical_error(x, FullRankEstimator([np.eye(2)]), sys) == 0.0


def test_predicted_rank_limits():
    inst = make_instance(9)
    sys = decorrelate(inst.v)
    full_ranks = [min(inst.x.dim, z.dim) for z in sys.z]
    d = diagnostics(inst.x, sys, full_ranks)
    assert predicted_error_rank(inst.x, sys, full_ranks) == pytest.approx(d.alpha0, abs=1e-10)
    assert predicted_error_full(inst.x, sys) == pytest.approx(d.alpha0, abs=1e-10)


def test_uncorrelated_everything_gives_trace():
    y, z1, x = _orthogonal_rows(10, 30, 2, 2, 3)
    sys = DecorrelatedSystem.from_uncorrelated([y, z1])
    tr = np.trace(estimate_cov(x, x))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert predicted_error_rank(x, sys, [1, 1]) == pytest.approx(tr)
        assert predicted_error_full(x, sys) == pytest.approx(tr)
        d = diagnostics(x, DecorrelatedSystem.from_uncorrelated([y]), [1])
    assert d.alpha0 == pytest.approx(tr)


def test_vacuous_truncation_agrees():
    # A_1 has rank 1 but r_1 = 2
    y, z1 = _orthogonal_rows(12, 40, 3, 1)
    x = SampleEnsemble(np.vstack([y.samples[0] + z1.samples[0], y.samples[1], z1.samples[0]]))
    sys = DecorrelatedSystem.from_uncorrelated([y, z1])
    est = fit_rank_constrained(x, sys, [1, 2])
    assert abs(empirical_error(x, est, sys) - predicted_error_rank(x, sys, [1, 2])) <= 1e-10


@given(st.integers(0, 10_000))
def test_error_formula_property(seed):
    inst = make_instance(seed)
    sys = decorrelate(inst.v)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = fit_rank_constrained(inst.x, sys, inst.ranks)
    pred = predicted_error_rank(inst.x, sys, inst.ranks)
    emp = empirical_error(inst.x, est, sys)
    assert abs(pred - emp) <= 1e-8 * max(1.0, emp)
    assert predicted_error_full(inst.x, sys) <= pred + 1e-10


@given(st.integers(0, 10_000))
def test_rank_monotone_property(seed):
    inst = make_instance(seed)
    sys = decorrelate(inst.v)
    ranks = list(inst.ranks)
    prev = predicted_error_rank(inst.x, sys, ranks)
    for j in range(len(ranks)):
        while ranks[j] < min(inst.x.dim, sys.z[j].dim):
            ranks[j] += 1
            cur = predicted_error_rank(inst.x, sys, ranks)
            assert cur <= prev + 1e-10
            prev = cur


@given(st.integers(0, 10_000))
def test_degree_monotone_property(seed):
    inst = make_instance(seed)
    sys = decorrelate(inst.v)
    errs = [predicted_error_rank(inst.x, sys.truncate(p), inst.ranks[:p + 1])
            for p in range(sys.degree + 1)]
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


# diagnostics ----------------------------------------------------------------------
def test_diagnostics_energy_identity():
    inst = make_instance(13)
    sys = decorrelate(inst.v)
    ranks = [min(inst.x.dim, z.dim) for z in sys.z]
    d = diagnostics(inst.x, sys, ranks)
    head = float(np.sum(d.singular_values[0][:ranks[0]] ** 2))
    assert d.injection_energy == pytest.approx(d.trace_xx - d.predicted_error - head, abs=1e-10)
    for cols, s, r in zip(d.gamma_cols, d.singular_values, d.ranks):
        assert np.sum(cols) == pytest.approx(np.sum(s[:r] ** 2), abs=1e-10)
    assert d.gamma == max(d.gamma_block[1:])
    assert d.beta <= d.gamma + 1e-15
    assert set(d.to_dict()) >= {"alpha0", "beta", "gamma", "q_total", "predicted_error"}


def test_q_nested_monotone():
    x, y, _ = make_data(14, 5, 4, 200)
    errs = []
    for q in (1, 2, 4, 6):
        fam = InjectionFamily((LiftInjection(3, 1), LiftInjection(q, 9)))
        sys = decorrelate([y] + fam.apply(y))
        errs.append(predicted_error_rank(x, sys, (2, 1, 1)))
    assert all(b <= a + 1e-10 for a, b in zip(errs, errs[1:]))


def test_degree_comparison_fields():
    inst = make_instance(15)
    sys = decorrelate(inst.v)
    if sys.degree == 0:
        pytest.skip("instance has no injections")
    res = degree_comparison(inst.x, sys, inst.ranks, 0)
    assert res["ranks_g"] == [sum(inst.ranks)]
    a0 = a_matrix(inst.x, sys, 0)
    s = np.linalg.svd(a0, compute_uv=False)
    assert res["lhs"] == pytest.approx(np.sum(s[inst.ranks[0]:sum(inst.ranks)] ** 2))
    with pytest.raises(ValueError):
        degree_comparison(inst.x, sys, inst.ranks, sys.degree)


def test_negative_error_clamp():
    assert _clamp(-1e-12, 1.0, "e") == 0.0
    with pytest.raises(NumericalError):
        _clamp(-1e-3, 1.0, "e")
    with pytest.raises(NumericalError):
        _clamp(float("nan"), 1.0, "e")


def test_json_round_trip():
    inst = make_instance(16)
    sys = decorrelate(inst.v)
    est = fit_rank_constrained(inst.x, sys, inst.ranks)
    back = estimator_from_json(est.to_json())
    for (g, h), (g2, h2) in zip(est.blocks, back.blocks):
        assert g.tobytes() == g2.tobytes() and h.tobytes() == h2.tobytes()
    full = fit_full_rank(inst.x, sys)
    back = estimator_from_json(full.to_json())
    assert isinstance(back, FullRankEstimator)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(full.blocks, back.blocks))
    with pytest.raises(ValueError):
        estimator_from_json('{"version": "other"}')
