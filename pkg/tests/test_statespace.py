import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rolf.statespace import (
    DimensionError,
    GaussianBelief,
    LinearGaussianModel,
    NotPositiveDefiniteError,
    Trajectory,
    belief_violations,
    mahalanobis_sq,
    spd_inverse,
    symmetrize_psd,
    validate_model,
)

from conftest import random_spd

finite = st.floats(-1e3, 1e3, allow_nan=False)


def identity_model(**overrides):
    kw = dict(F=np.eye(2), H=np.eye(2), Q=np.eye(2), R=np.eye(2),
              init=GaussianBelief(np.zeros(2), np.eye(2)))
    kw.update(overrides)
    return LinearGaussianModel(**kw)


def test_validate_identity_model_ok():
    report = validate_model(identity_model())
    assert report.ok
    assert report.violations == ()


def test_validate_zero_R():
    report = validate_model(identity_model(R=np.zeros((2, 2))))
    assert not report.ok
    assert "R not positive definite" in report.violations


def test_validate_F_shape():
    report = validate_model(identity_model(F=np.ones((2, 3))))
    assert "F dimension mismatch" in report.violations


@pytest.mark.parametrize("field, value, violation", [
    ("H", np.ones((2, 3)), "H dimension mismatch"),
    ("Q", np.eye(3), "Q dimension mismatch"),
    ("R", np.eye(3), "R dimension mismatch"),
    ("Q", np.diag([1.0, -1.0]), "Q not positive semidefinite"),
    ("Q", np.array([[1.0, 0.5], [0.0, 1.0]]), "Q not symmetric"),
])
def test_validate_named_violations(field, value, violation):
    assert violation in validate_model(identity_model(**{field: value})).violations


def test_validate_time_varying_provider():
    model = identity_model(F=lambda t: np.eye(2) * (1 + t))
    assert validate_model(model, t=3).ok
    broken = identity_model(F=lambda t: np.eye(3) if t > 0 else np.eye(2))
    assert validate_model(broken, t=0).ok
    assert "F dimension mismatch" in validate_model(broken, t=1).violations


def test_trajectory_lengths():
    assert len(Trajectory(np.zeros((0, 4)), np.zeros((0, 2)))) == 0
    with pytest.raises(DimensionError):
        Trajectory(np.zeros((3, 4)), np.zeros((2, 2)))


def test_belief_is_read_only():
    b = GaussianBelief([1.0, 2.0], np.eye(2))
    with pytest.raises(ValueError):
        b.mean[0] = 5.0
    with pytest.raises(DimensionError):
        GaussianBelief([1.0, 2.0], np.eye(3))


def test_symmetrize_identity_fixed_point():
    np.testing.assert_array_equal(symmetrize_psd(np.eye(3)), np.eye(3))


def test_symmetrize_arithmetic():
    np.testing.assert_allclose(symmetrize_psd([[1.0, 2.0], [0.0, 1.0]]), [[1.0, 1.0], [1.0, 1.0]], atol=1e-15)


def test_symmetrize_indefinite_matches_eig_clamp(rng):
    A = rng.standard_normal((4, 4))
    S = (A + A.T) / 2
    w, V = np.linalg.eig(S)  # general (non-symmetric) solver as the oracle
    w, V = w.real, V.real
    assert w.min() < 0
    V = V / np.linalg.norm(V, axis=0)
    oracle = V @ np.diag(np.maximum(w, 0)) @ V.T
    out = symmetrize_psd(S)
    np.testing.assert_allclose(out, oracle, atol=1e-12)
    assert np.linalg.eigvalsh(out).min() >= -1e-12


def test_symmetrize_rejects_non_square():
    with pytest.raises(DimensionError):
        symmetrize_psd(np.ones((2, 3)))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (4, 4), elements=finite))
def test_symmetrize_idempotent(M):
    once = symmetrize_psd(M)
    np.testing.assert_allclose(symmetrize_psd(once), once, atol=1e-12 * max(1.0, np.abs(M).max()))
    assert not belief_violations(GaussianBelief(np.zeros(4), once), tol=1e-9)


def test_mahalanobis_examples():
    assert mahalanobis_sq(np.zeros(3), np.eye(3)) == 0.0
    assert mahalanobis_sq(np.ones(3), np.eye(3)) == pytest.approx(3.0, abs=1e-15)


def test_mahalanobis_matches_explicit_inverse(rng):
    for d in (1, 2, 3, 5):
        R = random_spd(rng, d)
        r = rng.standard_normal(d)
        assert mahalanobis_sq(r, R) == pytest.approx(r @ np.linalg.inv(R) @ r, abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 6), elements=finite))
def test_mahalanobis_identity_is_norm(r):
    assert abs(mahalanobis_sq(r, np.eye(r.shape[0])) - r @ r) <= 1e-12 * max(1.0, r @ r)


def test_mahalanobis_rejects_non_pd():
    with pytest.raises(NotPositiveDefiniteError):
        mahalanobis_sq([1.0, 1.0], np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        mahalanobis_sq([1.0, 1.0], np.eye(3))


def test_spd_inverse(rng):
    M = random_spd(rng, 5)
    np.testing.assert_allclose(spd_inverse(M) @ M, np.eye(5), atol=1e-10)
    with pytest.raises(NotPositiveDefiniteError):
        spd_inverse(np.diag([1.0, 0.0]))


def test_belief_violations_flags_bad_cov():
    assert belief_violations(GaussianBelief(np.zeros(2), np.diag([1.0, -1.0]))) == ["cov not positive semidefinite"]
    assert "cov not symmetric" in belief_violations(GaussianBelief(np.zeros(2), [[1.0, 0.1], [0.0, 1.0]]))
