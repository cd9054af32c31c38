"""Discrete-time LTI models, ZOH discretization, Riccati machinery, terminal sets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _is_symmetric_pd(M: np.ndarray) -> bool:
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * max(1.0, np.linalg.norm(M))):
        return False
    try:
        np.linalg.cholesky(0.5 * (M + M.T))
    except np.linalg.LinAlgError:
        return False
    return True


def stabilizability_defect(A: np.ndarray, B: np.ndarray):
    """PBH test at every eigenvalue with modulus >= 1 - 1e-9, rank tolerance 1e-10.

    Returns the first offending eigenvalue, or None when (A, B) is stabilizable.
    """
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - 1e-9:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        smin = np.linalg.svd(pencil, compute_uv=False)[-1]
        if smin <= 1e-10:
            return lam
    return None


@dataclass(frozen=True, eq=False)
class LtiModel:
    """Discrete-time pair x+ = A x + B u, validated for stabilizability."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B row count {B.shape[0]} does not match A size {A.shape[0]}")
        if A.shape[0] < 1 or B.shape[1] < 1:
            raise ValueError("state and input dimensions must be at least 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        # A model with an uncontrollable marginal mode still describes valid
        # open-loop arithmetic (discretization, prediction), so construction
        # only warns; solve_dare rejects such pairs hard.
        lam = stabilizability_defect(A, B)
        if lam is not None:
            import warnings

            warnings.warn(
                f"(A, B) is not stabilizable: eigenvalue {lam:.6g} "
                f"(|lam| = {abs(lam):.6g}) is uncontrollable",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class CostWeights:
    """Stage weights Q, R = chi*I, terminal pair (P, K), level alpha, decay gamma."""

    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray
    alpha: float
    gamma: float
    model: LtiModel = field(repr=False)

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        P = _as_matrix(self.P, "P")
        K = _as_matrix(self.K, "K")
        if not _is_symmetric_pd(Q):
            raise ValueError("Q must be symmetric positive definite")
        if not _is_symmetric_pd(R):
            raise ValueError("R must be symmetric positive definite")
        if not _is_symmetric_pd(P):
            raise ValueError("P must be symmetric positive definite")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        A, B = self.model.A, self.model.B
        K_ref = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        resid = np.linalg.norm(Q + A.T @ P @ A - (A.T @ P @ B) @ K_ref - P)
        if resid > 1e-9 * max(1.0, np.linalg.norm(P)):
            raise ValueError(f"P does not solve the Riccati equation (residual {resid:.3e})")
        if np.linalg.norm(K - K_ref) > 1e-9 * max(1.0, np.linalg.norm(K_ref)):
            raise ValueError("K is inconsistent with (P, R, B, A)")
        gamma_ref = gamma_level(self.alpha, Q, P)
        if not np.isclose(self.gamma, gamma_ref, rtol=1e-9, atol=1e-12):
            raise ValueError(f"gamma {self.gamma} does not match alpha*lambda_min(P^-1 Q) = {gamma_ref}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "K", K)

    @property
    def chi(self) -> float:
        """Scalar chi when R = chi*I, else the largest eigenvalue of R."""
        return float(np.linalg.eigvalsh(self.R)[-1])


def make_cost_weights(model: LtiModel, Q, R, alpha: float) -> CostWeights:
    """Solve the Riccati equation and assemble validated weights."""
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    P, K = solve_dare(model, Q, R)
    gamma = gamma_level(alpha, Q, P)
    return CostWeights(Q=Q, R=R, P=P, K=K, alpha=float(alpha), gamma=gamma, model=model)


@dataclass(frozen=True, eq=False)
class TerminalSet:
    """Ellipsoid {x : x'Px <= alpha} with a tightened copy {x : x'Px <= rho_tight*alpha}."""

    P: np.ndarray
    alpha: float
    rho_tight: float

    def __post_init__(self):
        P = _as_matrix(self.P, "P")
        if not _is_symmetric_pd(P):
            raise ValueError("P must be symmetric positive definite")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not (0.0 < self.rho_tight < 1.0):
            raise ValueError("rho_tight must lie in (0, 1)")
        object.__setattr__(self, "P", P)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float).ravel()
        return float(x @ self.P @ x)

    def contains(self, x) -> bool:
        return self.value(x) <= self.alpha

    def contains_tight(self, x) -> bool:
        return self.value(x) <= self.rho_tight * self.alpha

    def in_interior(self, x) -> bool:
        return self.value(x) < self.alpha


def discretize_zoh(A_cont, B_cont, Ts: float) -> LtiModel:
    """Zero-order-hold discretization via the augmented matrix exponential."""
    A_cont = _as_matrix(A_cont, "A_cont")
    B_cont = _as_matrix(B_cont, "B_cont")
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    n = A_cont.shape[0]
    if A_cont.shape[0] != A_cont.shape[1]:
        raise ValueError(f"A_cont must be square, got {A_cont.shape}")
    if B_cont.shape[0] != n:
        raise ValueError("B_cont row count does not match A_cont")
    m = B_cont.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A_cont * Ts
    aug[:n, n:] = B_cont * Ts
    E = expm(aug)
    A = E[:n, :n]
    B = E[:n, n:]
    return LtiModel(A=A, B=B)


def solve_dare(model: LtiModel, Q, R, tol: float = 1e-13, max_iters: int = 10**6):
    """Fixed-point Riccati recursion P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA.

    Returns (P, K) with K = (R + B'PB)^-1 B'PA. Raises on non-convergence,
    which signals non-stabilizable or badly scaled data.
    """
    A, B = model.A, model.B
    Q = _as_matrix(Q, "Q")
    R = _as_matrix(R, "R")
    if not _is_symmetric_pd(Q) or not _is_symmetric_pd(R):
        raise ValueError("Q and R must be symmetric positive definite")
    lam = stabilizability_defect(A, B)
    if lam is not None:
        raise ValueError(
            f"(A, B) is not stabilizable (eigenvalue {lam:.6g} uncontrollable); "
            "the Riccati recursion has no stabilizing fixed point"
        )
    P = Q.copy()
    for _ in range(max_iters):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        Pn = Q + A.T @ P @ A - (A.T @ P @ B) @ K
        Pn = 0.5 * (Pn + Pn.T)
        if np.max(np.abs(Pn - P)) <= tol * max(1.0, np.max(np.abs(Pn))):
            P = Pn
            break
        P = Pn
    else:
        raise RuntimeError("Riccati fixed-point iteration did not converge")
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    resid = np.linalg.norm(Q + A.T @ P @ A - (A.T @ P @ B) @ K - P)
    if resid > 1e-9 * max(1.0, np.linalg.norm(P)):
        raise RuntimeError(f"Riccati residual {resid:.3e} above tolerance")
    closed = A - B @ K
    if np.max(np.abs(np.linalg.eigvals(closed))) >= 1.0:
        raise RuntimeError("closed-loop A - BK is not Schur stable")
    return P, K


def gamma_level(alpha: float, Q, P) -> float:
    """gamma = alpha * lambda_min(P^{-1/2} Q P^{-1/2}), the per-step cost floor on the ellipsoid."""
    from scipy.linalg import eigh as generalized_eigh

    Q = _as_matrix(Q, "Q")
    P = _as_matrix(P, "P")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not _is_symmetric_pd(Q) or not _is_symmetric_pd(P):
        raise ValueError("Q and P must be symmetric positive definite")
    # generalized problem Q v = lambda P v has the same spectrum as the whitened matrix
    lam_min = generalized_eigh(Q, P, eigvals_only=True)[0]
    return float(alpha * lam_min)


@dataclass(frozen=True)
class InvarianceReport:
    """Boundary-sampled check of the one-step decrease condition on the ellipsoid."""

    passed: bool
    max_violation: float
    n_checked: int
    max_unclamped_input: float
    support_input_bound: float


def check_terminal_invariance(model: LtiModel, weights: CostWeights, U,
                              n_samples: int = 10000, seed: int = 0) -> InvarianceReport:
    """Sample the boundary x'Px = alpha and evaluate F(Ax+Bu) - F(x) + l(x,u) at u = clamp(-Kx).

    Passes iff the maximum violation is <= 1e-8. The support_input_bound field
    carries max_{x on boundary} |K x| per input row, the closed form
    sqrt(K P^-1 K') * sqrt(alpha), so callers can see whether clamping ever binds.
    """
    A, B = model.A, model.B
    Q, R, P, K, alpha = weights.Q, weights.R, weights.P, weights.K, weights.alpha
    lower, upper = U
    lower = np.asarray(lower, dtype=float).ravel()
    upper = np.asarray(upper, dtype=float).ravel()
    if not (np.all(lower < 0.0) and np.all(upper > 0.0)):
        raise ValueError("input box must contain 0 in its interior")
    rng = np.random.default_rng(seed)
    Pinv = np.linalg.inv(P)
    support = float(np.sqrt(np.max(np.diag(K @ Pinv @ K.T))) * np.sqrt(alpha))
    max_violation = -np.inf
    max_unclamped = 0.0
    for _ in range(n_samples):
        y = rng.standard_normal(model.n)
        x = y * np.sqrt(alpha / float(y @ P @ y))
        u_raw = -K @ x
        max_unclamped = max(max_unclamped, float(np.max(np.abs(u_raw))))
        u = np.clip(u_raw, lower, upper)
        xp = A @ x + B @ u
        viol = float(xp @ P @ xp - x @ P @ x + x @ Q @ x + u @ R @ u)
        max_violation = max(max_violation, viol)
    return InvarianceReport(
        passed=bool(max_violation <= 1e-8),
        max_violation=float(max_violation),
        n_checked=int(n_samples),
        max_unclamped_input=max_unclamped,
        support_input_bound=support,
    )
