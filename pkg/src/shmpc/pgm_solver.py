"""Projected gradient method on the condensed QP, with offline iteration bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .condensing import CondensedQp, eval_cost


@dataclass(frozen=True, eq=False)
class BoxConstraint:
    """Per-move box; the stacked feasible set is the horizon-fold product."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if not (np.all(lower < 0.0) and np.all(upper > 0.0)):
            raise ValueError("box must contain 0 in its interior (lower < 0 < upper)")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def m(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True, eq=False)
class SolveResult:
    z: np.ndarray
    iterations_run: int
    cost: float
    grad_norm: float


def project_box(z, U: BoxConstraint) -> np.ndarray:
    """Componentwise clamp of the stacked vector onto the per-move box."""
    z = np.asarray(z, dtype=float).ravel()
    m = U.m
    if z.shape[0] % m != 0:
        raise ValueError("stacked vector length is not a multiple of the input dimension")
    h = z.shape[0] // m
    lo = np.tile(U.lower, h)
    hi = np.tile(U.upper, h)
    return np.clip(z, lo, hi)


def _extreme_eigs(qp: CondensedQp):
    vals = np.linalg.eigvalsh(qp.H)
    return float(vals[0]), float(vals[-1])


def pgm_solve(qp: CondensedQp, x, z0, max_iters: int, U: BoxConstraint,
              tol: float | None = None, spectra=None) -> SolveResult:
    """Fixed-step projected gradient on J(x, .).

    Step size s = 1/(lambda_min + lambda_max) of H, which gives the Euclidean
    contraction factor (kappa-1)/(kappa+1) for the gradient 2(Hz + Gx).
    With tol=None the loop runs exactly max_iters iterations so that offline
    certificates translate into exact flop counts; with a tolerance it stops
    once the displacement ||z+ - z|| drops to tol.
    """
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z0, dtype=float).ravel()
    if np.any(np.abs(z - project_box(z, U)) > 1e-12):
        raise ValueError("z0 must lie in the box")
    lam_min, lam_max = spectra if spectra is not None else _extreme_eigs(qp)
    s = 1.0 / (lam_min + lam_max)
    H = qp.H
    q = qp.G @ x
    m = U.m
    h = z.shape[0] // m
    lo = np.tile(U.lower, h)
    hi = np.tile(U.upper, h)
    iters = 0
    for _ in range(max_iters):
        grad = 2.0 * (H @ z + q)
        zn = np.clip(z - s * grad, lo, hi)
        iters += 1
        if tol is not None and np.linalg.norm(zn - z) <= tol:
            z = zn
            break
        z = zn
    grad_norm = float(np.linalg.norm(2.0 * (H @ z + q)))
    return SolveResult(z=z, iterations_run=iters, cost=eval_cost(qp, x, z), grad_norm=grad_norm)


def _rate(lam_min: float, lam_max: float) -> float:
    kappa = lam_max / lam_min
    return (kappa - 1.0) / (kappa + 1.0)


def iter_bound_cold(qp: CondensedQp, x, e_bar_k: float, spectra=None, chol=None) -> int:
    """Offline iteration count for a zero-vector start.

    ceil( log( sqrt(lambda_min) * e_bar / ||Gx||_{H^-1} ) / log((kappa-1)/(kappa+1)) ),
    floored at 0. The H^-1 norm comes from a Cholesky solve.
    """
    if e_bar_k <= 0:
        raise ValueError("e_bar_k must be positive")
    x = np.asarray(x, dtype=float).ravel()
    gx = qp.G @ x
    nrm_gx = np.linalg.norm(gx)
    if nrm_gx == 0.0:
        return 0
    lam_min, lam_max = spectra if spectra is not None else _extreme_eigs(qp)
    rate = _rate(lam_min, lam_max)
    c = chol if chol is not None else cho_factor(qp.H)
    hnorm = math.sqrt(float(gx @ cho_solve(c, gx)))
    if hnorm == 0.0:
        return 0
    arg = math.sqrt(lam_min) * e_bar_k / hnorm
    if arg >= 1.0:
        return 0
    if rate <= 0.0:
        # kappa = 1 means H is a multiple of the identity, so one clamped step
        # lands exactly on the minimizer
        return 1
    return max(0, math.ceil(math.log(arg) / math.log(rate)))


def warm_start_constants(qp: CondensedQp, spectra=None, chol=None):
    """(tau, sigma) with tau = lambda_min^{-1/2} ||H^{-1/2} G B|| and sigma the same with G alone."""
    lam_min, _ = spectra if spectra is not None else _extreme_eigs(qp)
    c = chol if chol is not None else cho_factor(qp.H)
    GB = qp.G @ qp.B
    tau = math.sqrt(max(0.0, float(np.linalg.eigvalsh(GB.T @ cho_solve(c, GB))[-1]))) / math.sqrt(lam_min)
    G = qp.G
    sigma = math.sqrt(max(0.0, float(np.linalg.eigvalsh(G.T @ cho_solve(c, G))[-1]))) / math.sqrt(lam_min)
    return tau, sigma


def iter_bound_warm(qp: CondensedQp, e_bar_k: float, e_bar_prev: float, d_bar: float,
                    spectra=None, chol=None) -> int:
    """Offline iteration count for a shifted warm start.

    ceil( log( e_bar_k / ((1+tau) e_bar_prev + sigma d_bar) ) / log((kappa-1)/(kappa+1)) ),
    floored at 0.
    """
    if e_bar_k <= 0 or e_bar_prev <= 0 or d_bar < 0:
        raise ValueError("error budgets must be positive and d_bar nonnegative")
    lam_min, lam_max = spectra if spectra is not None else _extreme_eigs(qp)
    rate = _rate(lam_min, lam_max)
    tau, sigma = warm_start_constants(qp, spectra=(lam_min, lam_max), chol=chol)
    start_err = (1.0 + tau) * e_bar_prev + sigma * d_bar
    if start_err == 0.0:
        return 0
    arg = e_bar_k / start_err
    if arg >= 1.0:
        return 0
    if rate <= 0.0:
        # kappa = 1: see iter_bound_cold
        return 1
    return max(0, math.ceil(math.log(arg) / math.log(rate)))


def flops_per_iteration(horizon: int, m: int, n: int) -> int:
    """hm(2hm - 1) + hm(2n - 1) + 5hm for one projected-gradient iteration."""
    if horizon < 1 or m < 1 or n < 1:
        raise ValueError("arguments must be positive")
    hm = horizon * m
    return hm * (2 * hm - 1) + hm * (2 * n - 1) + 5 * hm
