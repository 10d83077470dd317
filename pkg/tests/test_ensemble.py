import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from optinject.ensemble import (
    DataError,
    SampleEnsemble,
    apply_matrix,
    center,
    estimate_cov,
    load_csv,
    omega_norm_sq,
    save_csv,
)
from optinject.linalg_core import psd_eig

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def ensembles(draw, n_samples=None):
    d = draw(st.integers(1, 5))
    n = n_samples if n_samples is not None else draw(st.integers(1, 12))
    return SampleEnsemble(draw(arrays(np.float64, (d, n), elements=finite)))


@st.composite
def ensemble_pairs(draw):
    n = draw(st.integers(1, 12))
    return draw(ensembles(n)), draw(ensembles(n))


def test_construction_rules():
    e = SampleEnsemble(np.array([1.0, 2.0, 3.0]))
    assert (e.dim, e.n_samples) == (1, 3)
    with pytest.raises(ValueError):
        e.samples[0, 0] = 5.0
    with pytest.raises(DataError):
        SampleEnsemble(np.zeros((2, 0)))
    with pytest.raises(DataError):
        SampleEnsemble(np.array([[1.0, np.inf]]))
    with pytest.raises(DataError):
        SampleEnsemble(np.zeros((2, 2, 2)))


def test_source_array_is_copied():
    a = np.ones((2, 3))
    e = SampleEnsemble(a)
    a[0, 0] = 7.0
    assert e.samples[0, 0] == 1.0


def test_cov_single_sample():
    x = SampleEnsemble(np.array([[1.0], [2.0]]))
    np.testing.assert_array_equal(estimate_cov(x, x), [[1.0, 2.0], [2.0, 4.0]])


def test_cov_hand_value():
    x = SampleEnsemble(np.array([[1.0, 2.0], [0.0, 1.0]]))
    y = SampleEnsemble(np.array([[1.0, 1.0]]))
    np.testing.assert_array_equal(estimate_cov(x, y), [[1.5], [0.5]])


def test_cov_mismatched_samples():
    with pytest.raises(DataError, match="sample count"):
        estimate_cov(np.ones((1, 3)), np.ones((1, 4)))


@given(ensemble_pairs())
def test_cov_transpose_exact(pair):
    x, y = pair
    assert estimate_cov(x, y).tobytes() == estimate_cov(y, x).T.copy().tobytes()


@given(ensembles())
def test_self_cov_symmetric_psd(x):
    e = estimate_cov(x, x)
    assert np.array_equal(e, e.T)
    w = np.linalg.eigvalsh(e)
    assert w[0] >= -1e-12 * max(w[-1], 0.0)
    psd_eig(e)


def test_omega_norm_examples():
    assert omega_norm_sq(np.zeros((2, 3))) == 0.0
    assert omega_norm_sq(np.array([[3.0], [4.0]])) == 25.0
    x = SampleEnsemble(np.random.default_rng(0).standard_normal((3, 20)))
    assert abs(omega_norm_sq(x) - np.trace(estimate_cov(x, x))) <= 1e-12 * omega_norm_sq(x)


@given(ensembles(), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_omega_norm_of_mapped(x, rows, seed):
    a = np.random.default_rng(seed).standard_normal((rows, x.dim))
    lhs = omega_norm_sq(apply_matrix(a, x))
    rhs = np.trace(a @ estimate_cov(x, x) @ a.T)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(rhs), 1e-300) + 1e-300


def test_apply_matrix_examples():
    x = SampleEnsemble(np.array([[1.0, 3.0], [2.0, 4.0]]))
    np.testing.assert_array_equal(apply_matrix(np.eye(2), x).samples, x.samples)
    np.testing.assert_array_equal(apply_matrix(np.zeros((3, 2)), x).samples, np.zeros((3, 2)))
    np.testing.assert_array_equal(apply_matrix([[1.0, 1.0]], x).samples, [[3.0, 7.0]])
    with pytest.raises(DataError):
        apply_matrix(np.eye(3), x)


def test_center_is_explicit():
    x = SampleEnsemble(np.array([[1.0, 3.0]]))
    c, mean = center(x)
    np.testing.assert_array_equal(c.samples, [[-1.0, 1.0]])
    np.testing.assert_array_equal(mean, [2.0])
    # moments of the raw ensemble are uncentered
    assert estimate_cov(x, x)[0, 0] == 5.0


def test_paired_arithmetic():
    a = SampleEnsemble(np.ones((2, 3)))
    np.testing.assert_array_equal((a + a - a).samples, a.samples)
    with pytest.raises(DataError):
        a + SampleEnsemble(np.ones((2, 4)))


# csv -----------------------------------------------------------------------------
def test_csv_single_value(tmp_path):
    p = tmp_path / "one.csv"
    p.write_text("5.0\n")
    e = load_csv(p)
    assert (e.dim, e.n_samples) == (1, 1)
    assert e.samples[0, 0] == 5.0


def test_csv_layout_and_transpose(tmp_path):
    p = tmp_path / "a.csv"
    rows = np.arange(30, dtype=float).reshape(3, 10)
    p.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    e = load_csv(p)
    assert (e.dim, e.n_samples) == (3, 10)
    t = load_csv(p, transpose=True)
    assert (t.dim, t.n_samples) == (10, 3)


def test_csv_header_skipped(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("s1,s2\n1,2\n3,4\n")
    np.testing.assert_array_equal(load_csv(p).samples, [[1, 2], [3, 4]])


def test_csv_round_trip_bits(tmp_path):
    x = SampleEnsemble(np.random.default_rng(1).standard_normal((4, 7)) * 1e-3)
    p = tmp_path / "r.csv"
    save_csv(x, p)
    assert load_csv(p).samples.tobytes() == x.samples.tobytes()
    save_csv(x, p, transpose=True)
    assert load_csv(p, transpose=True).samples.tobytes() == x.samples.tobytes()


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("a,b\n", "header row but no data"),
    ("1,2\n3\n", "ragged row 2"),
    ("1,2\n3,x\n", "row 2, column 2"),
    ("1,nan\n", "non-finite"),
])
def test_csv_errors(tmp_path, text, match):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=match):
        load_csv(p)


def test_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_csv(tmp_path / "nope.csv")
