"""Condensed QP construction: J(x, z) = x'Wx + 2 z'Gx + z'Hz over the stacked input z."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .dynamics import CostWeights, LtiModel


@dataclass(frozen=True, eq=False)
class CondensedQp:
    """Condensed data for one horizon and one terminal weight omega.

    H = S' Qbar S + Rbar, G = S' Qbar Phi, W = Q + Phi' Qbar Phi, where S stacks
    the S_blocks row-wise, Phi stacks A..A^horizon, Qbar = blkdiag(Q,...,Q, omega*P)
    and Rbar = blkdiag(R,...,R).
    """

    horizon: int
    omega: float
    H: np.ndarray
    G: np.ndarray
    W: np.ndarray
    S_blocks: List[np.ndarray]
    Phi: np.ndarray
    Qbar: np.ndarray
    Rbar: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        hm = self.H.shape[0]
        n = self.G.shape[1]
        if self.H.shape != (hm, hm) or self.G.shape[0] != hm or self.W.shape != (n, n):
            raise ValueError("inconsistent condensed matrix shapes")
        nrmH = np.linalg.norm(self.H)
        if np.linalg.norm(self.H - self.H.T) > 1e-12 * max(1.0, nrmH):
            raise ValueError("H is not symmetric")
        if np.linalg.norm(self.W - self.W.T) > 1e-12 * max(1.0, np.linalg.norm(self.W)):
            raise ValueError("W is not symmetric")
        try:
            np.linalg.cholesky(self.H)
        except np.linalg.LinAlgError as exc:
            raise ValueError("H is not positive definite") from exc

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0] // self.horizon


def build_prediction(model: LtiModel, horizon: int):
    """Stacked prediction maps: Phi = [A; ...; A^horizon], S_blocks[l-1] = [A^{l-1}B ... B 0 ... 0]."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    A, B = model.A, model.B
    n, m = model.n, model.m
    Apow = [np.eye(n)]
    for _ in range(horizon):
        Apow.append(Apow[-1] @ A)
    Phi = np.vstack([Apow[i] for i in range(1, horizon + 1)])
    # row l reads [A^{l-1}B ... B] out of one precomputed strip; block column j
    # multiplies the input applied j steps after x
    strip = np.hstack([Apow[l] @ B for l in range(horizon - 1, -1, -1)])
    S_blocks = []
    for l in range(1, horizon + 1):
        Sl = np.zeros((n, horizon * m))
        Sl[:, :l * m] = strip[:, (horizon - l) * m:]
        S_blocks.append(Sl)
    return Phi, S_blocks


def condense(model: LtiModel, weights: CostWeights, omega: float, horizon: int) -> CondensedQp:
    """Assemble the condensed QP for the given horizon and terminal weight."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if omega <= 0:
        raise ValueError("omega must be positive")
    n, m = model.n, model.m
    Q, R, P = weights.Q, weights.R, weights.P
    Phi, S_blocks = build_prediction(model, horizon)
    S = np.vstack(S_blocks)
    Qbar = np.zeros((horizon * n, horizon * n))
    for i in range(horizon - 1):
        Qbar[i * n:(i + 1) * n, i * n:(i + 1) * n] = Q
    Qbar[(horizon - 1) * n:, (horizon - 1) * n:] = omega * P
    Rbar = np.kron(np.eye(horizon), R)
    H = S.T @ Qbar @ S + Rbar
    H = 0.5 * (H + H.T)
    G = S.T @ Qbar @ Phi
    W = Q + Phi.T @ Qbar @ Phi
    W = 0.5 * (W + W.T)
    return CondensedQp(
        horizon=int(horizon), omega=float(omega), H=H, G=G, W=W,
        S_blocks=S_blocks, Phi=Phi, Qbar=Qbar, Rbar=Rbar,
        Q=Q, R=R, P=P, B=model.B,
    )


def eval_cost(qp: CondensedQp, x, z) -> float:
    """x'Wx + 2 z'Gx + z'Hz."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if x.shape[0] != qp.n or z.shape[0] != qp.H.shape[0]:
        raise ValueError("dimension mismatch in eval_cost")
    return float(x @ qp.W @ x + 2.0 * z @ (qp.G @ x) + z @ (qp.H @ z))


class SpectralData(NamedTuple):
    lambda_min: float
    lambda_max: float
    kappa: float
    v_min: np.ndarray
    v_max: np.ndarray


def spectral(qp: CondensedQp) -> SpectralData:
    """Extreme eigenpairs of H with a residual guard of 1e-9 * ||H||."""
    vals, vecs = np.linalg.eigh(qp.H)
    lam_min, lam_max = float(vals[0]), float(vals[-1])
    v_min, v_max = vecs[:, 0].copy(), vecs[:, -1].copy()
    nrm = np.linalg.norm(qp.H)
    for lam, v in ((lam_min, v_min), (lam_max, v_max)):
        resid = np.linalg.norm(qp.H @ v - lam * v)
        if resid > 1e-9 * max(1.0, nrm):
            raise RuntimeError(f"eigenpair residual {resid:.3e} exceeds 1e-9*||H||")
    return SpectralData(lam_min, lam_max, lam_max / lam_min, v_min, v_max)
