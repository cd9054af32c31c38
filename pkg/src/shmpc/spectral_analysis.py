"""Hessian conditioning analysis: monotonicity condition, omega sweeps, eigen derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .condensing import build_prediction
from .dynamics import CostWeights, LtiModel

GAP_REL_TOL = 1e-9


def _scalar_r(R: np.ndarray) -> float:
    """chi for R = chi*I; raises when R is not a positive scalar matrix."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    chi = float(R[0, 0])
    if chi <= 0 or not np.allclose(R, chi * np.eye(R.shape[0]), rtol=0.0, atol=1e-12 * max(1.0, chi)):
        raise ValueError("R must be a positive scalar multiple of the identity for this check")
    return chi


def hessian_at(model: LtiModel, weights: CostWeights, horizon: int, omega: float):
    """(H(omega), S_horizon) with omega >= 0 allowed; omega = 0 zeroes the terminal block."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    Phi, S_blocks = build_prediction(model, horizon)
    Q, R, P = weights.Q, weights.R, weights.P
    n = model.n
    H = np.kron(np.eye(horizon), R)
    for l in range(1, horizon):
        Sl = S_blocks[l - 1]
        H = H + Sl.T @ Q @ Sl
    Sh = S_blocks[horizon - 1]
    H = H + omega * (Sh.T @ P @ Sh)
    return 0.5 * (H + H.T), Sh


def _extreme_gaps_ok(vals: np.ndarray) -> bool:
    if vals.shape[0] < 2:
        return True
    nrm = max(1.0, abs(float(vals[-1])))
    return bool(vals[1] - vals[0] > GAP_REL_TOL * nrm and vals[-1] - vals[-2] > GAP_REL_TOL * nrm)


@dataclass(frozen=True)
class KappaConditionReport:
    """Sufficient condition for the condition number to shrink with omega."""

    ok: bool
    condition_ok: bool
    simple_ok: bool
    lhs: float
    rhs: float
    margin: float
    tie_omegas: List[float]


def check_kappa_condition(model: LtiModel, weights: CostWeights, horizon: int,
                          omega_prime_0: float, n_grid: int = 5) -> KappaConditionReport:
    """Check lambda_max(B'PB)/chi <= ||S_h vbar0||_P^2 / ||vbar0||_{H1}^2 plus
    simple extreme eigenvalues of H(omega) over a grid in (0, omega_prime_0].

    vbar0 is the top eigenvector of H(0) and H1 = H(omega_prime_0). A failed
    simplicity scan makes the condition unverifiable (simple_ok=False), which is
    reported rather than treated as a hard failure.
    """
    chi = _scalar_r(weights.R)
    if omega_prime_0 <= 0:
        raise ValueError("omega_prime_0 must be positive")
    B, P = model.B, weights.P
    H0, Sh = hessian_at(model, weights, horizon, 0.0)
    H1, _ = hessian_at(model, weights, horizon, omega_prime_0)
    vals0, vecs0 = np.linalg.eigh(H0)
    vbar0 = vecs0[:, -1]
    lhs = float(np.linalg.eigvalsh(B.T @ P @ B)[-1]) / chi
    num = float((Sh @ vbar0) @ P @ (Sh @ vbar0))
    den = float(vbar0 @ H1 @ vbar0)
    rhs = num / den
    tie_omegas: List[float] = []
    for om in np.linspace(omega_prime_0 / n_grid, omega_prime_0, n_grid):
        Hm, _ = hessian_at(model, weights, horizon, float(om))
        if not _extreme_gaps_ok(np.linalg.eigvalsh(Hm)):
            tie_omegas.append(float(om))
    simple_ok = not tie_omegas
    condition_ok = bool(lhs <= rhs)
    return KappaConditionReport(
        ok=condition_ok and simple_ok, condition_ok=condition_ok, simple_ok=simple_ok,
        lhs=lhs, rhs=rhs, margin=rhs - lhs, tie_omegas=tie_omegas,
    )


@dataclass(frozen=True, eq=False)
class SweepReport:
    horizon: int
    omega_grid: np.ndarray
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    kappa: np.ndarray
    cond_lhs: float
    cond_rhs: float
    cond_ok: bool
    gap_ok: np.ndarray
    spectrum_monotone: bool
    kappa_monotone: bool


def kappa_sweep(model: LtiModel, weights: CostWeights, horizon: int,
                omega_grid) -> SweepReport:
    """Spectra and condition numbers of H(omega) along an ascending grid.

    Every eigenvalue must be nondecreasing along the grid (the weight multiplies
    a positive-semidefinite term, so eigenvalues can only go up or stay put);
    the condition number must not decrease whenever the sufficient condition
    holds. Violations raise, since they contradict properties the construction
    guarantees.
    """
    grid = np.asarray(omega_grid, dtype=float).ravel()
    if grid.size < 1 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("omega_grid must be ascending and positive")
    cond = check_kappa_condition(model, weights, horizon, float(grid[-1]))
    lam_min, lam_max, kappa, gap_ok = [], [], [], []
    prev_spec = None
    spectrum_monotone = True
    for om in grid:
        H, _ = hessian_at(model, weights, horizon, float(om))
        vals = np.linalg.eigvalsh(H)
        lam_min.append(float(vals[0]))
        lam_max.append(float(vals[-1]))
        kappa.append(float(vals[-1] / vals[0]))
        gap_ok.append(_extreme_gaps_ok(vals))
        if prev_spec is not None:
            nrm = max(1.0, abs(float(vals[-1])))
            if not np.all(vals - prev_spec >= -1e-9 * nrm):
                spectrum_monotone = False
        prev_spec = vals
    if not spectrum_monotone:
        raise RuntimeError("elementwise spectrum monotonicity in omega failed")
    kappa_arr = np.asarray(kappa)
    kappa_monotone = bool(np.all(np.diff(kappa_arr) >= -1e-9 * kappa_arr[:-1])) if grid.size > 1 else True
    if cond.ok and grid.size > 1 and not kappa_monotone:
        raise RuntimeError("condition number decreased with omega despite the condition holding")
    return SweepReport(
        horizon=int(horizon), omega_grid=grid,
        lambda_min=np.asarray(lam_min), lambda_max=np.asarray(lam_max),
        kappa=kappa_arr, cond_lhs=cond.lhs, cond_rhs=cond.rhs, cond_ok=cond.ok,
        gap_ok=np.asarray(gap_ok, dtype=bool),
        spectrum_monotone=spectrum_monotone, kappa_monotone=kappa_monotone,
    )


def sweep_to_csv(report: SweepReport, path, k: int = 0) -> None:
    """Write one sweep as CSV rows (k, omega, lambda_min, lambda_max, kappa, cond_lhs, cond_rhs, gap_flag)."""
    lines = ["k,omega,lambda_min,lambda_max,kappa,cond_lhs,cond_rhs,gap_flag"]
    for i, om in enumerate(report.omega_grid):
        lines.append(
            f"{k},{om:.17g},{report.lambda_min[i]:.17g},{report.lambda_max[i]:.17g},"
            f"{report.kappa[i]:.17g},{report.cond_lhs:.17g},{report.cond_rhs:.17g},"
            f"{int(report.gap_ok[i])}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class EigenDerivReport:
    skipped: bool
    rel_err_min: float
    rel_err_max: float
    analytic_min: float
    analytic_max: float
    fd_min: float
    fd_max: float


def eigen_derivative_check(model: LtiModel, weights: CostWeights, horizon: int,
                           omega: float) -> EigenDerivReport:
    """Compare d(lambda)/d(omega) = ||S_h v||_P^2 against central finite differences.

    Uses step 1e-6 * omega. Skipped (with a report) when an extreme eigenvalue
    is not simple at omega.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    H, Sh = hessian_at(model, weights, horizon, omega)
    vals, vecs = np.linalg.eigh(H)
    if not _extreme_gaps_ok(vals):
        return EigenDerivReport(True, np.nan, np.nan, np.nan, np.nan, np.nan, np.nan)
    P = weights.P
    v_min, v_max = vecs[:, 0], vecs[:, -1]
    an_min = float((Sh @ v_min) @ P @ (Sh @ v_min))
    an_max = float((Sh @ v_max) @ P @ (Sh @ v_max))
    step = 1e-6 * omega
    Hp, _ = hessian_at(model, weights, horizon, omega + step)
    Hm, _ = hessian_at(model, weights, horizon, omega - step)
    vp = np.linalg.eigvalsh(Hp)
    vm = np.linalg.eigvalsh(Hm)
    fd_min = float((vp[0] - vm[0]) / (2.0 * step))
    fd_max = float((vp[-1] - vm[-1]) / (2.0 * step))
    rel_min = abs(fd_min - an_min) / max(1e-300, abs(an_min))
    rel_max = abs(fd_max - an_max) / max(1e-300, abs(an_max))
    return EigenDerivReport(False, rel_min, rel_max, an_min, an_max, fd_min, fd_max)


@dataclass(frozen=True)
class ChainReport:
    """The four-link inequality chain behind the kappa monotonicity argument.

    links = (min-eigvec ratio at omega, lambda_max(B'PB)/chi, top-eigvec-of-H(0)
    ratio, top-eigvec ratio at omega); the chain must be increasing whenever the
    sufficient condition holds.
    """

    link_min_prime: float
    link_bound: float
    link_top_zero: float
    link_top_prime: float

    def ordered(self) -> bool:
        return (self.link_min_prime < self.link_bound
                <= self.link_top_zero <= self.link_top_prime + 1e-12)


def kappa_condition_chain(model: LtiModel, weights: CostWeights, horizon: int,
                          omega: float, omega_prime_0: float) -> ChainReport:
    """Evaluate all four links of the monotonicity chain at a given omega."""
    chi = _scalar_r(weights.R)
    P = weights.P
    H1, Sh = hessian_at(model, weights, horizon, omega_prime_0)
    H0, _ = hessian_at(model, weights, horizon, 0.0)
    Hw, _ = hessian_at(model, weights, horizon, omega)
    _, vecs_w = np.linalg.eigh(Hw)
    v_min_w, v_max_w = vecs_w[:, 0], vecs_w[:, -1]
    _, vecs_0 = np.linalg.eigh(H0)
    v_top_0 = vecs_0[:, -1]

    def ratio(v):
        return float((Sh @ v) @ P @ (Sh @ v)) / float(v @ H1 @ v)

    return ChainReport(
        link_min_prime=ratio(v_min_w),
        link_bound=float(np.linalg.eigvalsh(model.B.T @ P @ model.B)[-1]) / chi,
        link_top_zero=ratio(v_top_0),
        link_top_prime=ratio(v_max_w),
    )


def kappa_condition_scan(model: LtiModel, weights: CostWeights, N: int,
                         omega_prime_0: float):
    """Per-step condition flags for horizons N-k, k = 0..N-1, and the largest
    k up to which the condition holds contiguously from k = 0."""
    flags = []
    for k in range(N):
        rep = check_kappa_condition(model, weights, N - k, omega_prime_0, n_grid=3)
        flags.append(rep.ok)
    last_contiguous = -1
    for k, f in enumerate(flags):
        if not f:
            break
        last_contiguous = k
    return flags, last_contiguous
