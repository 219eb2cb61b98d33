"""
Stationary Polish Module
Exact stationary points of the L1BLDA objective near an ADMM iterate

    f(W) = -sum_ij ||W^T c_ij d_ij||_1 + Omega sum_s ||W^T dev_s||_1,   W^T W = I

Every |x| is smoothed to sqrt(x^2 + eps^2). A Riemannian descent at the
largest eps moves W next to a smoothed minimizer; a primal-dual Newton
method then follows the smoothed stationary points down to eps_end:

    -C sigma + Omega Dev Xi - W Lambda = 0
    W^T W - I = 0
    Xi_sk sqrt(q_sk^2 + eps^2) - q_sk = 0,     q = Dev^T W

with C = [c_ij d_ij] and sigma the pair signs frozen at the start of the
path. Xi holds the sample subgradients; |Xi_sk| < 1 marks a sample whose
projection vanishes.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from procrustes_solvers import polar_factor

logger = logging.getLogger(__name__)

SMOOTHING_START = 1e-2
SMOOTHING_END = 1e-10
SMOOTHING_DIVISOR = 3.0
DESCENT_MAX_ITER = 300
DESCENT_TOL = 1e-10
NEWTON_MAX_ITER = 50
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class StationaryPoint:
    w: np.ndarray            # n x d orthonormal
    xi: np.ndarray           # N x d sample subgradients in [-1, 1]
    pair_signs: np.ndarray   # P x d, +1 where W^T c_ij d_ij >= 0
    residual: float          # KKT residual at eps_end


def unknown_count(n: int, d: int) -> int:
    """Size of the reduced Newton system: W plus the symmetric multiplier"""
    return n * d + d * (d + 1) // 2


def smoothed_objective(w: np.ndarray, pair_matrix: np.ndarray, dev: np.ndarray,
                       omega: float, eps: float) -> Tuple[float, np.ndarray]:
    """
    Smoothed objective and its Euclidean gradient.

    Args:
        w: n x d point
        pair_matrix: n x P columns c_ij d_ij
        dev: n x N columns x_s - x̄_{class(s)}
        omega: Within-class weight
        eps: Smoothing radius, f_eps - f lies in [-P d eps, N d Omega eps]
    """
    p = pair_matrix.T @ w
    q = dev.T @ w
    hp = np.sqrt(p ** 2 + eps ** 2)
    hq = np.sqrt(q ** 2 + eps ** 2)
    value = float(-np.sum(hp) + omega * np.sum(hq))
    grad = -pair_matrix @ (p / hp) + omega * (dev @ (q / hq))
    return value, grad


def tangent_gradient(w: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Projection of a Euclidean gradient onto the tangent space of W^T W = I"""
    wg = w.T @ grad
    return grad - w @ (0.5 * (wg + wg.T))


def smoothed_descent(w: np.ndarray, pair_matrix: np.ndarray, dev: np.ndarray, omega: float,
                     eps: float, max_iter: int = DESCENT_MAX_ITER,
                     tol: float = DESCENT_TOL) -> Tuple[np.ndarray, int]:
    """
    Armijo descent along the tangent gradient with polar retraction.

    The step doubles after each accepted move and halves on rejection.

    Returns:
        (final W, number of accepted steps)
    """
    value, grad = smoothed_objective(w, pair_matrix, dev, omega, eps)
    step = 1e-2
    accepted = 0
    while accepted < max_iter:
        direction = tangent_gradient(w, grad)
        slope = float(np.sum(direction ** 2))
        if np.sqrt(slope) < tol:
            break
        for _ in range(40):
            candidate = polar_factor(w - step * direction)
            cand_value, cand_grad = smoothed_objective(candidate, pair_matrix, dev, omega, eps)
            if cand_value <= value - ARMIJO_C * step * slope:
                w, value, grad = candidate, cand_value, cand_grad
                step *= 2.0
                accepted += 1
                break
            step /= 2.0
        else:
            break
    return w, accepted


class _SmoothedKkt:
    """Residual and Newton step of the smoothed KKT system at a fixed eps"""

    def __init__(self, pair_matrix: np.ndarray, pair_signs: np.ndarray, dev: np.ndarray, omega: float):
        self.dev = dev
        self.omega = omega
        self.pair_term = -pair_matrix @ pair_signs
        n, d = self.pair_term.shape
        self.n, self.d = n, d
        rows, cols = np.triu_indices(d)
        self.upper = (rows, cols)
        # column-major positions of (i, j) and (j, i) inside vec of a d x d matrix
        self.pos_ij = cols * d + rows
        self.pos_ji = rows * d + cols
        self.dup = np.zeros((d * d, len(rows)))
        self.dup[self.pos_ij, np.arange(len(rows))] = 1.0
        self.dup[self.pos_ji, np.arange(len(rows))] = 1.0

    def residual(self, w: np.ndarray, lam: np.ndarray, xi: np.ndarray,
                 eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        q = self.dev.T @ w
        stationarity = self.pair_term + self.omega * (self.dev @ xi) - w @ lam
        feasibility = (w.T @ w - np.eye(self.d))[self.upper]
        complementarity = xi * np.sqrt(q ** 2 + eps ** 2) - q
        return stationarity, feasibility, complementarity, q

    @staticmethod
    def norm(parts: Tuple[np.ndarray, ...]) -> float:
        return float(np.sqrt(sum(np.sum(part ** 2) for part in parts)))

    def initial_multiplier(self, w: np.ndarray, xi: np.ndarray) -> np.ndarray:
        wr = w.T @ (self.pair_term + self.omega * (self.dev @ xi))
        return 0.5 * (wr + wr.T)

    def newton_step(self, w: np.ndarray, lam: np.ndarray, xi: np.ndarray,
                    eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Full Newton direction (dW, dLambda, dXi).

        dXi is eliminated through its diagonal block, leaving a square system
        in vec(dW) and the upper triangle of dLambda (column-major vec).
        """
        n, d = self.n, self.d
        stationarity, feasibility, complementarity, q = self.residual(w, lam, xi, eps)
        h = np.sqrt(q ** 2 + eps ** 2)
        slope = xi * q / h - 1.0
        weights = -slope / h

        curvature = linalg.block_diag(*[
            self.omega * (self.dev * weights[:, k]) @ self.dev.T for k in range(d)
        ])
        top = np.hstack([
            curvature - np.kron(lam.T, np.eye(n)),
            -np.kron(np.eye(d), w) @ self.dup,
        ])
        gram = np.kron(np.eye(d), w.T)
        bottom = np.hstack([gram[self.pos_ij] + gram[self.pos_ji], np.zeros((len(self.pos_ij),) * 2)])
        rhs = np.concatenate([
            (-stationarity + self.omega * (self.dev @ (complementarity / h))).ravel(order='F'),
            -feasibility,
        ])
        step, *_ = linalg.lstsq(np.vstack([top, bottom]), rhs)

        dw = step[:n * d].reshape((n, d), order='F')
        dlam = (self.dup @ step[n * d:]).reshape((d, d), order='F')
        dxi = (-complementarity - slope * (self.dev.T @ dw)) / h
        return dw, dlam, dxi


def follow_smoothing_path(w: np.ndarray, pair_matrix: np.ndarray, dev: np.ndarray, omega: float,
                          eps_start: float = SMOOTHING_START, eps_end: float = SMOOTHING_END,
                          divisor: float = SMOOTHING_DIVISOR,
                          max_iter: int = NEWTON_MAX_ITER) -> Optional[StationaryPoint]:
    """
    Newton continuation from eps_start down to eps_end.

    Each level is solved to max(eps / 100, 1e-13) in the KKT residual with a
    backtracking search on that residual. Returns None as soon as a level
    misses its target by more than a factor of 10.
    """
    pair_signs = np.where(pair_matrix.T @ w >= 0.0, 1.0, -1.0)
    system = _SmoothedKkt(pair_matrix, pair_signs, dev, omega)
    eps = eps_start
    q = dev.T @ w
    xi = q / np.sqrt(q ** 2 + eps ** 2)
    lam = system.initial_multiplier(w, xi)

    while True:
        target = max(eps * 1e-2, 1e-13)
        current = system.norm(system.residual(w, lam, xi, eps)[:3])
        for _ in range(max_iter):
            if current <= target:
                break
            dw, dlam, dxi = system.newton_step(w, lam, xi, eps)
            step = 1.0
            for _ in range(30):
                trial = (w + step * dw, lam + step * dlam, xi + step * dxi)
                trial_norm = system.norm(system.residual(*trial, eps)[:3])
                if trial_norm < current * (1.0 - ARMIJO_C * step):
                    (w, lam, xi), current = trial, trial_norm
                    break
                step /= 2.0
            else:
                break
        if current > 10.0 * max(target, 1e-12):
            logger.debug("smoothing path stalled at eps=%.1e: residual %.3g", eps, current)
            return None
        if eps <= eps_end:
            break
        eps /= divisor

    return StationaryPoint(
        w=polar_factor(w),
        xi=np.clip(xi, -1.0, 1.0),
        pair_signs=pair_signs,
        residual=current,
    )


def polish_stationary_point(w: np.ndarray, pair_matrix: np.ndarray, dev: np.ndarray,
                            omega: float) -> Optional[StationaryPoint]:
    """
    Smoothed descent from W followed by the Newton continuation.

    Returns:
        The stationary point, or None when the continuation fails
    """
    start, steps = smoothed_descent(w, pair_matrix, dev, omega, SMOOTHING_START)
    logger.debug("smoothed descent: %d steps", steps)
    return follow_smoothing_path(start, pair_matrix, dev, omega)
