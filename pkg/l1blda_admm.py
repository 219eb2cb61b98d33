"""
L1BLDA ADMM Module
Scaled ADMM for the L1-norm Bhattacharyya-bound discriminant problem

    min_W  -(1/N) sum_{i<j} sqrt(N_i N_j) ||W^T (x̄_i - x̄_j)||_1
           + Omega sum_s ||W^T (x_s - x̄_{class(s)})||_1      s.t.  W^T W = I

Split variables: one pair block B_ij per class pair, one sample block Z_s per
training sample and a copy D of W. Scaled duals alpha, beta, Gamma.
Block layout: B and alpha are P x d (pairs in lexicographic order), Z and
beta are N x d (sample column order), W, D and Gamma are n x d.
"""

import csv
import logging
import os
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from bench_errors import NumericalError
from bench_settings import get_default_it_max, get_default_rho, get_default_seed, get_default_tolerances
from dataset_loader import LabeledDataset
from procrustes_solvers import (
    DOMINANT_MARGIN,
    WSubproblem,
    dominant_eigenvalue,
    orthonormal_init,
    solve_balanced,
    solve_unbalanced,
)
from scatter_stats import (
    ClassStats,
    adaptive_weights,
    admm_w_matrices,
    class_stats,
    deviations,
    pair_differences,
    pair_weights,
)
from spectral_solvers import ProjectionMatrix, canonicalize_signs, check_dimension, orthonormality_error
from stationary_polish import StationaryPoint, polish_stationary_point, unknown_count

logger = logging.getLogger(__name__)


class AdmmConfig(BaseModel):
    """ADMM and inner Procrustes controls; unset fields come from the environment"""
    rho: float = Field(default_factory=get_default_rho, gt=0.0)
    eps_pri: float = Field(default_factory=lambda: get_default_tolerances()[0], gt=0.0)
    eps_dual: float = Field(default_factory=lambda: get_default_tolerances()[1], gt=0.0)
    it_max: int = Field(default_factory=get_default_it_max, ge=1)
    seed: int = Field(default_factory=get_default_seed, ge=0)
    inner_tol: float = Field(default=1e-8, gt=0.0)
    inner_max: int = Field(default=200, ge=1)
    warm_start_inner: bool = True
    polish: bool = True
    polish_every: int = Field(default=25, ge=1)
    polish_max_unknowns: int = Field(default=400, ge=1)


@dataclass(frozen=True)
class AdmmState:
    w: np.ndarray
    dmat: np.ndarray
    b_blocks: np.ndarray
    z_blocks: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    iter: int = 0
    r_norm: float = float('inf')
    s_norm: float = float('inf')
    # previous-iteration primal blocks, needed by the dual residual
    b_prev: Optional[np.ndarray] = None
    z_prev: Optional[np.ndarray] = None
    d_prev: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, n: int, d: int, n_pairs: int, n_samples: int, seed: int) -> 'AdmmState':
        """W = D = seeded orthonormal matrix, every other block zero"""
        w = orthonormal_init(n, d, seed)
        return cls(
            w=w,
            dmat=w.copy(),
            b_blocks=np.zeros((n_pairs, d)),
            z_blocks=np.zeros((n_samples, d)),
            alpha=np.zeros((n_pairs, d)),
            beta=np.zeros((n_samples, d)),
            gamma=np.zeros((n, d)),
        )

    def is_finite(self) -> bool:
        blocks = (self.w, self.dmat, self.b_blocks, self.z_blocks, self.alpha, self.beta, self.gamma)
        return all(np.all(np.isfinite(block)) for block in blocks)


@dataclass(frozen=True)
class L1bldaObjective:
    between_term: float
    within_term: float
    total: float


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    objective: float
    r_norm: float
    s_norm: float
    orth_error: float


def soft_threshold(x: np.ndarray, kappa: float) -> np.ndarray:
    """Componentwise shrinkage: a - k if a > k, 0 if |a| <= k, a + k if a < -k"""
    return np.sign(x) * np.maximum(np.abs(x) - kappa, 0.0)


def _pair_projection(w: np.ndarray, stats: ClassStats) -> np.ndarray:
    """P x d rows c_ij W^T (x̄_i - x̄_j)"""
    return ((pair_differences(stats) * pair_weights(stats)).T @ w)


def _sample_projection(w: np.ndarray, data: LabeledDataset, stats: ClassStats) -> np.ndarray:
    """N x d rows W^T (x_s - x̄_{class(s)})"""
    return deviations(data, stats).T @ w


def objective_l1blda(w: np.ndarray, data: LabeledDataset, stats: ClassStats, omega: float) -> L1bldaObjective:
    """
    Example:
        Two single-sample classes at (0,0) and (2,0), w = (1,0):
        between = (1/2) * 2 = 1, within = 0, total = -1
    """
    between = float(np.sum(np.abs(_pair_projection(w, stats))))
    within = float(np.sum(np.abs(_sample_projection(w, data, stats))))
    return L1bldaObjective(between_term=between, within_term=within, total=float(-between + omega * within))


def update_b(w: np.ndarray, stats: ClassStats, alpha: np.ndarray, rho: float) -> np.ndarray:
    """B = v + 1/rho where v >= 0, v - 1/rho where v < 0, with v = c_ij W^T d_ij + alpha"""
    v = _pair_projection(w, stats) + alpha
    return np.where(v >= 0.0, v + 1.0 / rho, v - 1.0 / rho)


def update_z(w: np.ndarray, data: LabeledDataset, stats: ClassStats, beta: np.ndarray,
             omega: float, rho: float) -> np.ndarray:
    """Z = Phi_{Omega/rho}(W^T dev + beta)"""
    return soft_threshold(_sample_projection(w, data, stats) + beta, omega / rho)


def update_d(w: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return w - gamma


def update_duals(state: AdmmState, data: LabeledDataset, stats: ClassStats) -> AdmmState:
    """Scaled dual ascent with unit step on every constraint block"""
    return replace(
        state,
        alpha=state.alpha + _pair_projection(state.w, stats) - state.b_blocks,
        beta=state.beta + _sample_projection(state.w, data, stats) - state.z_blocks,
        gamma=state.gamma + state.dmat - state.w,
    )


def residuals(state: AdmmState, data: LabeledDataset, stats: ClassStats, rho: float) -> Tuple[float, float]:
    """
    Primal and dual residual magnitudes.

    r = max of the pair block norms ||c_ij W^T d_ij - B_ij||, the sample block
    norms ||W^T dev_s - Z_s|| and ||D - W||_F.
    s = max of rho ||d_ij|| ||B_ij - B_ij_prev||, rho ||dev_s|| ||Z_s - Z_s_prev||
    and rho ||D - D_prev||_F (outer products measured in 2-norm). Without a
    previous iterate s is infinite.
    """
    pair_gap = np.linalg.norm(_pair_projection(state.w, stats) - state.b_blocks, axis=1)
    sample_gap = np.linalg.norm(_sample_projection(state.w, data, stats) - state.z_blocks, axis=1)
    r_norm = max(
        float(np.max(pair_gap, initial=0.0)),
        float(np.max(sample_gap, initial=0.0)),
        float(np.linalg.norm(state.dmat - state.w)),
    )

    if state.b_prev is None or state.z_prev is None or state.d_prev is None:
        return r_norm, float('inf')

    diff_norms = np.linalg.norm(pair_differences(stats), axis=0)
    dev_norms = np.linalg.norm(deviations(data, stats), axis=0)
    s_norm = rho * max(
        float(np.max(diff_norms * np.linalg.norm(state.b_blocks - state.b_prev, axis=1), initial=0.0)),
        float(np.max(dev_norms * np.linalg.norm(state.z_blocks - state.z_prev, axis=1), initial=0.0)),
        float(np.linalg.norm(state.dmat - state.d_prev)),
    )
    return r_norm, s_norm


def augmented_lagrangian(state: AdmmState, data: LabeledDataset, stats: ClassStats,
                         omega: float, rho: float) -> float:
    """
    Scaled-form augmented Lagrangian at the current iterate:

        -sum ||B_ij||_1 + Omega sum ||Z_s||_1
        + rho/2 (||c W^T d - B + alpha||^2 + ||W^T dev - Z + beta||^2 + ||D - W + Gamma||^2)
        - rho/2 (||alpha||^2 + ||beta||^2 + ||Gamma||^2)
    """
    pair_term = _pair_projection(state.w, stats) - state.b_blocks + state.alpha
    sample_term = _sample_projection(state.w, data, stats) - state.z_blocks + state.beta
    copy_term = state.dmat - state.w + state.gamma
    penalty = np.sum(pair_term ** 2) + np.sum(sample_term ** 2) + np.sum(copy_term ** 2)
    duals = np.sum(state.alpha ** 2) + np.sum(state.beta ** 2) + np.sum(state.gamma ** 2)
    return float(
        -np.sum(np.abs(state.b_blocks)) + omega * np.sum(np.abs(state.z_blocks))
        + 0.5 * rho * (penalty - duals)
    )


def fixed_point_state(point: StationaryPoint, data: LabeledDataset, stats: ClassStats,
                      omega: float, rho: float, k: int) -> AdmmState:
    """
    ADMM state that one iteration maps onto itself when the point is stationary.

    W = D, Gamma = 0, B = c_ij W^T d_ij with alpha = -sign/rho, beta = Omega Xi / rho
    and Z from the soft-thresholding rule. Pair blocks are only fixed when every
    |c_ij W^T d_ij| >= 1/rho.
    """
    pairs = _pair_projection(point.w, stats)
    signs = np.where(pairs >= 0.0, 1.0, -1.0)
    beta = omega * point.xi / rho
    z_blocks = soft_threshold(_sample_projection(point.w, data, stats) + beta, omega / rho)
    return AdmmState(
        w=point.w,
        dmat=point.w.copy(),
        b_blocks=pairs,
        z_blocks=z_blocks,
        alpha=-signs / rho,
        beta=beta,
        gamma=np.zeros_like(point.w),
        iter=k,
        b_prev=pairs,
        z_prev=z_blocks,
        d_prev=point.w.copy(),
    )


def admm_iteration(state: AdmmState, k: int, data: LabeledDataset, stats: ClassStats,
                   omega: float, cfg: AdmmConfig, shift: Optional[float]) -> AdmmState:
    """One pass of steps (a)-(g); the returned state carries its residuals"""
    d = state.w.shape[1]
    # (a) W-step: min tr(W^T G W) - 2 tr(A^T W), handed over as linear term -A
    g, a = admm_w_matrices(data, stats, state)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(a))):
        raise NumericalError("non-finite W-subproblem", iteration=k)
    problem = WSubproblem(g=g, a=-a)
    if d == data.n:
        w = solve_balanced(problem)
    else:
        w = solve_unbalanced(
            problem,
            inner_tol=cfg.inner_tol,
            inner_max=cfg.inner_max,
            seed=(cfg.seed, k),
            init=state.w if cfg.warm_start_inner else None,
            shift=shift,
        )

    # (b)-(d) closed-form block minimizers
    b_blocks = update_b(w, stats, state.alpha, cfg.rho)
    z_blocks = update_z(w, data, stats, state.beta, omega, cfg.rho)
    dmat = update_d(w, state.gamma)
    state = replace(
        state,
        w=w, b_blocks=b_blocks, z_blocks=z_blocks, dmat=dmat,
        b_prev=state.b_blocks, z_prev=state.z_blocks, d_prev=state.dmat,
        iter=k,
    )

    # (e)-(g)
    state = update_duals(state, data, stats)
    r_norm, s_norm = residuals(state, data, stats, cfg.rho)
    state = replace(state, r_norm=r_norm, s_norm=s_norm)
    if not state.is_finite() or not np.isfinite(r_norm):
        raise NumericalError("non-finite ADMM iterate", iteration=k)
    return state


def _polished_state(state: AdmmState, data: LabeledDataset, stats: ClassStats,
                    omega: float, cfg: AdmmConfig, shift: Optional[float]) -> Optional[AdmmState]:
    """Fixed-point state built from the stationary point near W, kept only if the next iteration certifies it"""
    try:
        point = polish_stationary_point(
            state.w, pair_differences(stats) * pair_weights(stats), deviations(data, stats), omega,
        )
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.debug("polish at iteration %d failed: %s", state.iter, e)
        return None
    if point is None:
        return None
    candidate = fixed_point_state(point, data, stats, omega, cfg.rho, state.iter)
    try:
        next_state = admm_iteration(candidate, state.iter + 1, data, stats, omega, cfg, shift)
    except NumericalError:
        return None
    if next_state.r_norm <= cfg.eps_pri and next_state.s_norm <= cfg.eps_dual:
        return candidate
    logger.debug("polished point at iteration %d is not an ADMM fixed point: r=%.3g s=%.3g",
                 state.iter, next_state.r_norm, next_state.s_norm)
    return None


def solve_l1blda(data: LabeledDataset, d: int, cfg: Optional[AdmmConfig] = None,
                 on_iteration: Optional[Callable[[IterationRecord], None]] = None,
                 ) -> Tuple[ProjectionMatrix, List[IterationRecord]]:
    """
    Runs the scaled ADMM until both residuals pass their tolerances or it_max.

    Each iteration: (a) W from the Procrustes subproblem (closed form when
    d = n, majorization otherwise), (b) pair blocks, (c) sample blocks by soft
    thresholding, (d) D = W - Gamma, (e-g) dual updates.

    Every polish_every iterations without convergence the iterate is replaced
    by an exact fixed point built from a nearby stationary point of the L1
    objective, provided one ADMM iteration from it passes both tolerances.
    Problems with more than polish_max_unknowns Newton unknowns are never
    polished.

    Args:
        data: Training set, ideally min-max normalized
        d: Target dimension, 1 <= d <= n
        cfg: Solver controls (default AdmmConfig())
        on_iteration: Called with every IterationRecord as it is produced

    Returns:
        (projection with the L1 objective at W, per-iteration trace)

    Raises:
        DimensionError: If d is out of range
        NumericalError: If an iterate turns non-finite
    """
    cfg = cfg or AdmmConfig()
    check_dimension(d, data.n)
    stats = class_stats(data)
    omega = adaptive_weights(stats).omega

    state = AdmmState.initial(data.n, d, len(stats.pairs), data.N, cfg.seed)
    shift = None
    if d < data.n:
        g, _ = admm_w_matrices(data, stats, state)
        if np.all(np.isfinite(g)):
            shift = dominant_eigenvalue(g) * (1.0 + DOMINANT_MARGIN)
    polish = cfg.polish and unknown_count(data.n, d) <= cfg.polish_max_unknowns
    trace: List[IterationRecord] = []
    converged = False

    for k in range(1, cfg.it_max + 1):
        state = admm_iteration(state, k, data, stats, omega, cfg, shift)
        objective = objective_l1blda(state.w, data, stats, omega)
        record = IterationRecord(
            iter=k,
            objective=objective.total,
            r_norm=state.r_norm,
            s_norm=state.s_norm,
            orth_error=orthonormality_error(state.w),
        )
        trace.append(record)
        if on_iteration is not None:
            on_iteration(record)
        logger.debug("admm %d: objective=%.6g r=%.3g s=%.3g", k, record.objective, state.r_norm, state.s_norm)

        if state.r_norm <= cfg.eps_pri and state.s_norm <= cfg.eps_dual:
            converged = True
            break

        if polish and k % cfg.polish_every == 0 and k < cfg.it_max:
            polished = _polished_state(state, data, stats, omega, cfg, shift)
            if polished is not None:
                logger.debug("admm %d: moved to a certified fixed point", k)
                state = polished

    if not converged:
        logger.warning(
            "L1BLDA on %s (d=%d) stopped at it_max=%d: r=%.3g s=%.3g",
            data.name, d, cfg.it_max, state.r_norm, state.s_norm,
        )

    w = canonicalize_signs(state.w)
    projection = ProjectionMatrix(
        w=w,
        method='l1blda',
        objective=objective_l1blda(w, data, stats, omega).total,
        seed=cfg.seed,
    )
    return projection, trace


def write_trace_csv(trace: List[IterationRecord], path: str) -> None:
    """One row per iteration: iter, objective, r_norm, s_norm, orth_error"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow(['iter', 'objective', 'r_norm', 's_norm', 'orth_error'])
        for record in trace:
            writer.writerow([
                record.iter, repr(float(record.objective)), repr(float(record.r_norm)),
                repr(float(record.s_norm)), repr(float(record.orth_error)),
            ])
