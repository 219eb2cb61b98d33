import numpy as np
import pytest

from bench_errors import DimensionError, NumericalError
from procrustes_solvers import (
    WSubproblem,
    dominant_eigenvalue,
    majorization_steps,
    orthonormal_init,
    polar_factor,
    solve_balanced,
    solve_unbalanced,
    w_objective,
)


def spd(rng, n, floor=1.0):
    m = rng.normal(size=(n, n))
    return m @ m.T + floor * np.eye(n)


def rotations(count=3600):
    theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
    cos, sin = np.cos(theta), np.sin(theta)
    rot = np.stack([np.stack([cos, -sin], axis=-1), np.stack([sin, cos], axis=-1)], axis=-2)
    ref = np.stack([np.stack([cos, sin], axis=-1), np.stack([sin, -cos], axis=-1)], axis=-2)
    return np.concatenate([rot, ref])


# ==================== Balanced ====================

def test_balanced_identity_targets():
    assert np.allclose(solve_balanced(WSubproblem(g=np.eye(2), a=-np.eye(2))), np.eye(2))
    assert np.allclose(solve_balanced(WSubproblem(g=np.eye(2), a=np.eye(2))), -np.eye(2))


def test_balanced_beats_the_orthogonal_group_grid(rng):
    for _ in range(5):
        p = WSubproblem(g=spd(rng, 2), a=rng.normal(size=(2, 2)))
        w = solve_balanced(p)
        frames = rotations()
        grid = np.einsum('kij,il,klj->k', frames, p.g, frames) + 2.0 * np.einsum('ij,kij->k', p.a, frames)
        assert w_objective(p, w) <= grid.min() + 1e-9


def test_balanced_needs_square():
    p = WSubproblem(g=np.eye(3), a=np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        solve_balanced(p)


# ==================== Unbalanced ====================

def test_dominant_eigenvalue_diagonal():
    assert dominant_eigenvalue(np.diag([3.0, 1.0])) == pytest.approx(3.0, rel=1e-8)


def test_dominant_eigenvalue_matches_dense(rng):
    g = spd(rng, 8)
    assert dominant_eigenvalue(g) == pytest.approx(np.linalg.eigvalsh(g)[-1], rel=1e-8)


def test_identity_quadratic_collapses_to_linear_minimizer(rng):
    a = rng.normal(size=(5, 2))
    p = WSubproblem(g=np.eye(5), a=a)
    target = polar_factor(-a)
    w = solve_unbalanced(p, seed=3)
    assert np.allclose(w, target, atol=1e-4)
    assert w_objective(p, w) <= w_objective(p, target) + 1e-8


def test_unbalanced_single_column_beats_angle_grid(rng):
    theta = np.linspace(0.0, 2.0 * np.pi, 3600, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)])
    for _ in range(5):
        p = WSubproblem(g=spd(rng, 2, floor=0.5), a=3.0 * rng.normal(size=(2, 1)))
        best = min(
            w_objective(p, solve_unbalanced(p, inner_tol=1e-15, inner_max=20000, seed=seed))
            for seed in range(8)
        )
        grid = np.sum(circle * (p.g @ circle), axis=0) + 2.0 * (p.a[:, 0] @ circle)
        assert best <= grid.min() + 1e-6


def test_majorization_never_increases(rng):
    for _ in range(100):
        n = int(rng.integers(3, 7))
        d = int(rng.integers(1, n))
        p = WSubproblem(g=spd(rng, n), a=rng.normal(size=(n, d)))
        w0 = orthonormal_init(n, d, int(rng.integers(0, 1000)))
        values = [w_objective(p, w0)]
        steps = majorization_steps(p, w0)
        for _ in range(20):
            w, value = next(steps)
            values.append(value)
        assert all(b <= a + 1e-12 * max(abs(a), 1.0) for a, b in zip(values, values[1:]))
        assert np.linalg.norm(w.T @ w - np.eye(d)) < 1e-10


def test_unbalanced_solver_objective_never_increases(rng):
    for _ in range(100):
        n = int(rng.integers(3, 7))
        d = int(rng.integers(1, n))
        p = WSubproblem(g=spd(rng, n), a=rng.normal(size=(n, d)))
        start = orthonormal_init(n, d, int(rng.integers(0, 1000)))
        values = [w_objective(p, start)]
        w = solve_unbalanced(p, inner_tol=1e-15, inner_max=50, init=start,
                             on_step=lambda _, value: values.append(value))
        assert len(values) >= 2
        assert values[-1] == pytest.approx(w_objective(p, w), rel=0.0, abs=1e-12)
        assert all(b <= a + 1e-12 * max(abs(a), 1.0) for a, b in zip(values, values[1:]))


def test_unbalanced_warm_start_and_validation(rng):
    p = WSubproblem(g=spd(rng, 4), a=rng.normal(size=(4, 2)))
    start = orthonormal_init(4, 2, 1)
    w = solve_unbalanced(p, init=start)
    assert w_objective(p, w) <= w_objective(p, start)

    with pytest.raises(DimensionError):
        solve_unbalanced(WSubproblem(g=np.eye(2), a=np.zeros((2, 2))))
    with pytest.raises(NumericalError):
        solve_unbalanced(WSubproblem(g=np.eye(3), a=np.full((3, 1), np.nan)))


# ==================== Building blocks ====================

def test_orthonormal_init():
    square = orthonormal_init(4, 4, 7)
    assert abs(abs(np.linalg.det(square)) - 1.0) < 1e-10
    assert np.array_equal(orthonormal_init(5, 3, 11), orthonormal_init(5, 3, 11))
    assert np.array_equal(orthonormal_init(5, 3, (11, 2)), orthonormal_init(5, 3, (11, 2)))

    thin = orthonormal_init(3, 2, 0)
    assert np.allclose(np.linalg.norm(thin, axis=0), 1.0, atol=1e-10)
    assert abs(thin[:, 0] @ thin[:, 1]) < 1e-10

    with pytest.raises(DimensionError):
        orthonormal_init(2, 3, 0)


def test_polar_factor_maximizes_trace(rng):
    m = rng.normal(size=(5, 2))
    w = polar_factor(m)
    best = np.trace(w.T @ m)
    # 10,000 random 5 x 2 orthonormal frames from QR of Gaussian matrices
    frames, _ = np.linalg.qr(rng.normal(size=(10000, 5, 2)))
    assert np.allclose(np.einsum('kji,kjl->kil', frames, frames), np.eye(2), atol=1e-12)
    assert np.einsum('kij,ij->k', frames, m).max() <= best + 1e-12


def test_subproblem_validation():
    with pytest.raises(DimensionError):
        WSubproblem(g=np.ones((2, 3)), a=np.zeros((2, 1)))
    with pytest.raises(DimensionError):
        WSubproblem(g=np.eye(2), a=np.zeros((3, 1)))
    with pytest.raises(DimensionError):
        WSubproblem(g=np.array([[1.0, 2.0], [0.0, 1.0]]), a=np.zeros((2, 1)))
