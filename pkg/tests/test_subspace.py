import numpy as np
import pytest

from rcdtns.errors import ConfigMismatch, InvalidInput
from rcdtns.rcdt import RcdtVector
from rcdtns.subspace import distance_to_subspace, fit_subspace

from oracles import least_squares_distance


def vec(values, fingerprint="test"):
    values = np.asarray(values, dtype=float)
    return RcdtVector(values=values, n_angles=1, n_points=values.size, fingerprint=fingerprint)


def test_single_sample_span():
    v = vec([3.0, 0.0, 4.0])
    basis = fit_subspace([v])
    assert basis.rank == 1
    assert np.allclose(np.abs(basis.basis[:, 0]), np.array([3, 0, 4]) / 5.0)
    assert distance_to_subspace(v, basis) <= 1e-10


def test_duplicate_samples_culled():
    v = vec(np.arange(1.0, 9.0))
    basis = fit_subspace([v, v])
    assert basis.rank == 1


def test_empty_sample_list_rejected():
    with pytest.raises(InvalidInput):
        fit_subspace([])


def test_mixed_fingerprints_rejected():
    with pytest.raises(ConfigMismatch):
        fit_subspace([vec([1.0, 0.0]), vec([0.0, 1.0], fingerprint="other")])


def test_distance_fingerprint_mismatch():
    basis = fit_subspace([vec([1.0, 0.0])])
    with pytest.raises(ConfigMismatch):
        distance_to_subspace(vec([0.0, 1.0], fingerprint="other"), basis)


def test_independent_vectors_full_rank_and_membership(rng):
    samples = [vec(rng.standard_normal(40)) for _ in range(5)]
    basis = fit_subspace(samples)
    assert basis.rank == 5
    combo = sum(rng.standard_normal() * s.values for s in samples)
    v = vec(combo)
    assert distance_to_subspace(v, basis) <= 1e-8 * np.linalg.norm(combo)


def test_orthonormality(rng):
    samples = [vec(rng.standard_normal(30)) for _ in range(7)]
    basis = fit_subspace(samples)
    gram = basis.basis.T @ basis.basis
    assert np.abs(gram - np.eye(basis.rank)).max() <= 1e-10


def test_vector_in_span_has_zero_distance(rng):
    samples = [vec(rng.standard_normal(12)) for _ in range(3)]
    basis = fit_subspace(samples)
    inside = vec(basis.basis @ rng.standard_normal(basis.rank))
    assert distance_to_subspace(inside, basis) <= 1e-10 * np.linalg.norm(inside.values)


def test_orthogonal_vector_distance_is_norm(rng):
    basis = fit_subspace([vec([1.0, 0.0, 0.0, 0.0]), vec([0.0, 1.0, 0.0, 0.0])])
    v = vec([0.0, 0.0, 3.0, 4.0])
    assert distance_to_subspace(v, basis) == pytest.approx(5.0, abs=1e-10)


def test_against_least_squares_oracle(rng):
    for _ in range(20):
        dim, n = 20, 3
        raw = rng.standard_normal((dim, n))
        basis = fit_subspace([vec(raw[:, j]) for j in range(n)])
        v = rng.standard_normal(dim)
        ours = distance_to_subspace(vec(v), basis)
        oracle = least_squares_distance(v, raw)
        assert ours == pytest.approx(oracle, rel=1e-8, abs=1e-12)


def test_projection_idempotent(rng):
    samples = [vec(rng.standard_normal(25)) for _ in range(4)]
    basis = fit_subspace(samples)
    v = rng.standard_normal(25)
    proj = basis.basis @ (basis.basis.T @ v)
    proj2 = basis.basis @ (basis.basis.T @ proj)
    assert np.linalg.norm(proj2 - proj) <= 1e-10 * max(np.linalg.norm(proj), 1e-30)


def test_pythagoras(rng):
    samples = [vec(rng.standard_normal(25)) for _ in range(4)]
    basis = fit_subspace(samples)
    v = rng.standard_normal(25)
    proj = basis.basis @ (basis.basis.T @ v)
    d = distance_to_subspace(vec(v), basis)
    lhs = np.linalg.norm(v) ** 2
    rhs = np.linalg.norm(proj) ** 2 + d**2
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_training_samples_near_fitted_subspace(rng):
    samples = [vec(rng.standard_normal(30)) for _ in range(6)]
    basis = fit_subspace(samples, rank_tolerance=1e-12)
    for s in samples:
        assert distance_to_subspace(s, basis) <= 1e-6 * np.linalg.norm(s.values)


def test_argmin_invariant_under_common_scaling(rng):
    bases = [fit_subspace([vec(rng.standard_normal(15)) for _ in range(2)]) for _ in range(4)]
    v = vec(rng.standard_normal(15))
    dists = np.array([distance_to_subspace(v, b) for b in bases])
    assert np.argmin(dists) == np.argmin(dists * 7.3)


def test_rank_cap():
    samples = [vec(np.eye(6)[j]) for j in range(4)]
    basis = fit_subspace(samples, rank_cap=2)
    assert basis.rank == 2


def test_rank_tolerance_bounds():
    with pytest.raises(InvalidInput):
        fit_subspace([vec([1.0, 0.0])], rank_tolerance=0.0)
    with pytest.raises(InvalidInput):
        fit_subspace([vec([1.0, 0.0])], rank_tolerance=1.0)
