import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topk_eigen.lanczos import lanczos
from topk_eigen.oracle import dense_oracle
from topk_eigen.solver import (SolverConfig, accuracy_report, default_ncv, reconstruct_from_factors,
                               reconstruct_topk, select_and_map, top_k_eigen)
from topk_eigen.jacobi import jacobi_eigen
from topk_eigen.sparse import CooMatrix, frobenius_normalize
from topk_eigen.synthetic import random_graph, random_sparse_symmetric

DIAG3 = CooMatrix.from_dense(np.diag([5.0, 2.0, 1.0]))
PATH3 = CooMatrix.from_dense([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def test_diag_example():
    d = top_k_eigen(DIAG3, 2)
    assert np.allclose(d.eigenvalues, [5.0, 2.0], atol=1e-12)
    assert np.allclose(np.abs(d.eigenvectors), np.eye(3)[:, :2], atol=1e-12)


def test_path_graph_example():
    d = top_k_eigen(PATH3, 1)
    assert d.eigenvalues[0] == pytest.approx(np.sqrt(2), abs=1e-12)
    assert np.allclose(d.eigenvectors[:, 0], [0.5, np.sqrt(2) / 2, 0.5], atol=1e-12)


def test_random_n200_example():
    m = random_sparse_symmetric(200, 0.02, seed=21)
    ref, _ = dense_oracle(m.to_dense())
    d = top_k_eigen(m, 8, ncv=128)
    assert np.abs(d.eigenvalues - ref[:8]).max() <= 1e-6 * np.abs(ref[:8]).min()
    assert accuracy_report(m, d).max_residual <= 1e-6


def test_k_bounds_and_symmetry():
    with pytest.raises(ValueError):
        top_k_eigen(DIAG3, 0)
    with pytest.raises(ValueError):
        top_k_eigen(DIAG3, 4)
    with pytest.raises(ValueError):
        top_k_eigen(random_sparse_symmetric(100, 0.1, 0), 65)
    asym = CooMatrix.from_arrays(2, [0], [1], [1.0], check_symmetric=False)
    with pytest.raises(ValueError):
        top_k_eigen(asym, 1)


def test_default_ncv():
    assert default_ncv(3, 2) == 3
    assert default_ncv(10_000, 1) == 16
    assert default_ncv(10_000, 24) == 96
    assert default_ncv(10_000, 64) == 256


def test_sign_convention_and_sorting(rng):
    m = random_sparse_symmetric(80, 0.1, seed=2)
    d = top_k_eigen(m, 6, ncv=80)
    assert np.all(np.diff(np.abs(d.eigenvalues)) <= 1e-12)
    for j in range(6):
        q = d.eigenvectors[:, j]
        first = q[np.flatnonzero(np.abs(q) > 1e-12 * np.abs(q).max())[0]]
        assert first > 0
    assert np.abs(np.linalg.norm(d.eigenvectors, axis=0) - 1).max() <= 1e-6


def test_tie_break():
    # +-1 have equal magnitude; +1 must come first
    m = CooMatrix.from_dense(np.diag([1.0, -1.0, 0.5]))
    d = top_k_eigen(m, 2)
    assert np.allclose(d.eigenvalues, [1.0, -1.0])


@settings(max_examples=15)
@given(st.integers(30, 120), st.integers(0, 10_000), st.floats(0.01, 100))
def test_scaling_invariance(n, seed, c):
    m = random_sparse_symmetric(n, 0.1, seed)
    d1 = top_k_eigen(m, 3, ncv=n)
    d2 = top_k_eigen(m.scaled(c), 3, ncv=n)
    assert np.allclose(d2.eigenvalues, c * d1.eigenvalues, rtol=1e-8, atol=1e-12 * c)
    ref = dense_oracle(m.to_dense())[0]
    if abs(abs(ref[2]) - abs(ref[3])) > 1e-6 and abs(abs(ref[1]) - abs(ref[2])) > 1e-6 \
            and abs(abs(ref[0]) - abs(ref[1])) > 1e-6:
        assert np.allclose(np.abs(d1.eigenvectors.T @ d2.eigenvectors), np.eye(3), atol=1e-6)


def test_accuracy_report_examples():
    d = top_k_eigen(DIAG3, 3)
    r = accuracy_report(DIAG3, d)
    assert r.max_residual <= 1e-12 and r.mean_orthogonality_degrees == pytest.approx(90.0)
    d.eigenvectors[:, 1] = d.eigenvectors[:, 0]
    assert accuracy_report(DIAG3, d).min_orthogonality_degrees == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(ValueError):
        accuracy_report(CooMatrix.from_dense(np.eye(4)), d)


def test_accuracy_report_perturbation(rng):
    m = random_sparse_symmetric(60, 0.1, seed=8)
    d = top_k_eigen(m, 2, ncv=60)
    base = accuracy_report(m, d).per_pair_residuals
    z = rng.normal(size=60)
    z /= np.linalg.norm(z)
    d.eigenvectors[:, 0] += 1e-3 * z
    q = d.eigenvectors[:, 0]
    expect = np.linalg.norm(m.to_dense() @ q - d.eigenvalues[0] * q)
    got = accuracy_report(m, d).per_pair_residuals
    assert got[0] == pytest.approx(expect, rel=1e-10)
    assert 1e-5 < got[0] - base[0] < 1e-2


def test_normalized_residual_scale():
    m = random_sparse_symmetric(60, 0.1, seed=8)
    d = top_k_eigen(m, 2, ncv=60)
    d.eigenvectors[:, :] += 1e-4  # make residuals well above roundoff
    a, b = accuracy_report(m, d), accuracy_report(m, d, normalized=True)
    assert b.mean_residual == pytest.approx(a.mean_residual / m.frobenius_norm, rel=1e-9, abs=1e-18)


def test_reconstruction():
    d = top_k_eigen(DIAG3, 1)
    assert np.allclose(reconstruct_topk(d), np.diag([5.0, 0, 0]), atol=1e-12)
    m = random_sparse_symmetric(12, 0.3, seed=1)
    d = top_k_eigen(m, 12, ncv=12)
    assert np.linalg.norm(reconstruct_topk(d) - m.to_dense()) <= 1e-8
    m = random_sparse_symmetric(50, 0.1, seed=5)
    vals, vecs = dense_oracle(m.to_dense())
    best = np.linalg.norm(m.to_dense() - (vecs[:, :4] * vals[:4]) @ vecs[:, :4].T)
    d = top_k_eigen(m, 4, ncv=50)
    assert np.linalg.norm(m.to_dense() - reconstruct_topk(d)) <= best + 1e-6


def test_factor_formula_matches():
    m = random_sparse_symmetric(40, 0.15, seed=3)
    nm = frobenius_normalize(m)
    t, basis, _ = lanczos(nm, 20)
    jr = jacobi_eigen(t)
    vals, q = select_and_map(jr, basis, 20)
    direct = reconstruct_from_factors(basis, jr.eigenvectors, jr.eigenvalues, nm.scale)
    assert np.linalg.norm((q * vals) @ q.T * nm.scale - direct) <= 1e-8


def test_fidelity_config_on_graph():
    g = random_graph(5000, 8, "powerlaw", seed=3)
    d = top_k_eigen(g, 8, SolverConfig.fidelity())
    r = accuracy_report(g, d, normalized=True)
    assert r.mean_residual <= 1e-3 and r.mean_orthogonality_degrees >= 89.9
    assert d.lanczos_report.saturations == 0 and not d.warnings
    assert set(d.timings) == {"normalize", "lanczos", "spmv", "jacobi", "map_back"}


def test_overrides_and_determinism():
    m = random_sparse_symmetric(100, 0.05, seed=4)
    a = top_k_eigen(m, 4, SolverConfig.fidelity(), seed=5)
    b = top_k_eigen(m, 4, SolverConfig.fidelity(seed=5))
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
