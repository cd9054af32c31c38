"""Online adjustment of the terminal penalty weight and the budget schedules.

The controller tracks a scalar weight omega_k on the terminal cost. Whenever a
shifted candidate sequence certifies that the terminal set stays reachable with
a smaller weight, omega is reduced, the cost-margin schedule {beta_i} is rebuilt,
and the per-step disturbance and solver-error budgets (w_bar, e_bar, d_bar) are
recomputed. Reductions restart the solver from the zero vector, so each one
trades a one-time cold-start cost against cheaper conditioning afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .condensing import CondensedQp
from .dynamics import CostWeights, LtiModel
from .pgm_solver import BoxConstraint, SolveResult, pgm_solve

ETA_DEFAULT = 1.0 / 7.0


class ScheduleError(ValueError):
    """Margin schedule out of budget (negative radicand / beta range violation)."""


@dataclass(frozen=True, eq=False)
class ScheduleBundle:
    """Budget schedules valid from anchor_k to the deadline N under constant omega."""

    anchor_k: int
    N: int
    omega: float
    beta: np.ndarray        # beta_i, i in [anchor_k, N]
    vbar: np.ndarray        # Vbar_i, i in [anchor_k, N]
    wbar: np.ndarray        # wbar_i, i in [anchor_k, N-1]
    ebar: np.ndarray        # ebar_i, i in [anchor_k, N-1]
    d_bar: float
    v_anchor: float
    feasible: bool

    def beta_at(self, i: int) -> float:
        return float(self.beta[i - self.anchor_k])

    def vbar_at(self, i: int) -> float:
        return float(self.vbar[i - self.anchor_k])

    def wbar_at(self, i: int) -> float:
        return float(self.wbar[i - self.anchor_k])

    def ebar_at(self, i: int) -> float:
        return float(self.ebar[i - self.anchor_k])


@dataclass(frozen=True, eq=False)
class AdaptState:
    """Weight, margin, budget schedules, and staleness counter at one time step."""

    omega_k: float
    omega_prime_0: float
    beta_prime: float
    schedule: ScheduleBundle
    delta_k: int
    rho_tilde: Optional[float]
    epsilon: float

    @property
    def beta_schedule(self) -> np.ndarray:
        return self.schedule.beta

    @property
    def Vbar_schedule(self) -> np.ndarray:
        return self.schedule.vbar

    @property
    def wbar_schedule(self) -> np.ndarray:
        return self.schedule.wbar

    @property
    def ebar_schedule(self) -> np.ndarray:
        return self.schedule.ebar

    @property
    def d_bar(self) -> float:
        return self.schedule.d_bar

    @property
    def anchor_k(self) -> int:
        return self.schedule.anchor_k


def stage_cost_sum(model: LtiModel, weights: CostWeights, x_k, z_tail):
    """Sum of stage costs x'Qx + u'Ru along xi+ = A xi + B mu, plus the terminal state."""
    A, B = model.A, model.B
    Q, R = weights.Q, weights.R
    xi = np.asarray(x_k, dtype=float).ravel().copy()
    z = np.asarray(z_tail, dtype=float).ravel()
    m = model.m
    if z.shape[0] % m != 0:
        raise ValueError("z_tail length is not a multiple of the input dimension")
    L = 0.0
    for j in range(z.shape[0] // m):
        mu = z[j * m:(j + 1) * m]
        L += float(xi @ Q @ xi + mu @ R @ mu)
        xi = A @ xi + B @ mu
    return L, xi


def lambda_bound(L: float, steps: int, gamma: float, rho: float,
                 alpha: float, epsilon: float) -> float:
    """Smallest admissible terminal weight: max(epsilon, (L - steps*gamma) / ((1-rho)*alpha))."""
    if not (0.0 <= rho < 1.0):
        # rho = 0 (candidate tail ending exactly at the origin) is fine; at
        # rho = 1 the denominator vanishes
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if alpha <= 0 or gamma <= 0 or epsilon <= 0:
        raise ValueError("alpha, gamma, epsilon must be positive")
    return max(epsilon, (L - steps * gamma) / ((1.0 - rho) * alpha))


def rho_from_candidate(xi_N, P, alpha: float) -> Optional[float]:
    """F(xi_N)/alpha when the candidate terminal state is interior, else None (reject)."""
    xi_N = np.asarray(xi_N, dtype=float).ravel()
    F = float(xi_N @ P @ xi_N)
    if F >= alpha:
        return None
    return F / alpha


def margin_schedules(v_now: float, beta_prime: float, k: int, N: int,
                     gamma: float, alpha: float, omega: float,
                     W_spectra, P, B, eta: float = ETA_DEFAULT,
                     shape: str = "linear") -> ScheduleBundle:
    """Build the margin and budget schedules for steps i in [k, N] at constant omega.

    beta decays linearly from beta_prime at i = k to 0 at i = N (shape="constant"
    keeps beta_i = beta_prime until N-1 instead). Then
        Vbar_i = (N-i)*gamma + omega*alpha - beta_i,
        wbar_i = (sqrt(Vbar_{i+1}) - sqrt(Vbar_{i+1} - (beta_i - beta_{i+1}))) / pi_i,
        ebar_i = (wbar_i - d_bar) / ||B||,   d_bar = eta * min_i wbar_i,
    with pi_i = sqrt(W_spectra[i-k]) for i <= N-2 and pi_{N-1} = sqrt(omega*lambda_max(P)).

    Raises ScheduleError when some beta_i exceeds (N-i-1)*gamma + omega*alpha,
    which is exactly the negative-radicand condition; the caller must use a
    smaller margin or a larger omega.
    """
    if beta_prime <= 0:
        raise ValueError("beta_prime must be positive")
    if not (0 <= k < N):
        raise ValueError("k must lie in [0, N)")
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0, 1)")
    h = N - k
    idx = np.arange(k, N + 1)
    if shape == "linear":
        beta = beta_prime * (N - idx) / h
    elif shape == "constant":
        beta = np.full(h + 1, beta_prime)
        beta[-1] = 0.0
    else:
        raise ValueError(f"unknown beta schedule shape {shape!r}")
    # range check beta_i <= (N-i-1)*gamma + omega*alpha; equivalent to all
    # radicands below being nonnegative
    cap = (N - idx[:-1] - 1) * gamma + omega * alpha
    bad = np.nonzero(beta[:-1] > cap + 1e-12 * max(1.0, beta_prime))[0]
    if bad.size:
        i = int(idx[bad[0]])
        raise ScheduleError(
            f"beta_{i} = {beta[bad[0]]:.6g} exceeds its budget {cap[bad[0]]:.6g}; "
            "margin schedule too aggressive for this omega"
        )
    vbar = (N - idx) * gamma + omega * alpha - beta
    W_spectra = np.asarray(W_spectra, dtype=float).ravel()
    if W_spectra.shape[0] != max(0, h - 1):
        raise ValueError(f"W_spectra must have {h - 1} entries (i = k..N-2), got {W_spectra.shape[0]}")
    lam_max_P = float(np.linalg.eigvalsh(np.asarray(P, dtype=float))[-1])
    pi = np.empty(h)
    pi[: h - 1] = np.sqrt(W_spectra)
    pi[h - 1] = math.sqrt(omega * lam_max_P)
    dbeta = beta[:-1] - beta[1:]
    radicand = vbar[1:] - dbeta
    radicand = np.maximum(radicand, 0.0)  # roundoff guard; true negatives already raised
    wbar = (np.sqrt(vbar[1:]) - np.sqrt(radicand)) / pi
    d_bar = eta * float(wbar.min())
    normB = float(np.linalg.norm(np.atleast_2d(np.asarray(B, dtype=float)), 2))
    ebar = (wbar - d_bar) / normB
    feasible = bool(d_bar > 0.0 and np.all(wbar > 0.0) and np.all(wbar >= d_bar))
    return ScheduleBundle(
        anchor_k=int(k), N=int(N), omega=float(omega), beta=beta, vbar=vbar,
        wbar=wbar, ebar=ebar, d_bar=d_bar, v_anchor=float(v_now), feasible=feasible,
    )


@dataclass(frozen=True, eq=False)
class AdaptContext:
    """Problem data and knobs the online step needs at every k."""

    model: LtiModel
    weights: CostWeights
    N: int
    box: BoxConstraint
    omega_prime_0: float
    qp_builder: Callable[[int, float], CondensedQp]
    wmax_fn: Callable[[int, float], np.ndarray]
    epsilon: float = 1e-8
    omega_fraction: float = 0.2
    eta: float = ETA_DEFAULT
    solve_tol: float = 1e-10
    solve_cap: int = 200000


def _stage_cost(weights: CostWeights, x, u) -> float:
    return float(x @ weights.Q @ x + u @ weights.R @ u)


def _margins(weights: CostWeights, x_k, first_move, h: int, omega: float, j_tilde: float):
    """Both margin variants: slack below the loose sublevel bound (the one that
    spends the first stage cost) and below the tight one (pure step budget)."""
    gamma, alpha = weights.gamma, weights.alpha
    l0 = _stage_cost(weights, x_k, first_move)
    loose = l0 + (h - 1) * gamma + omega * alpha - j_tilde
    tight = h * gamma + omega * alpha - j_tilde
    return loose, tight


def online_step(k: int, state: Optional[AdaptState], prev_solution: Optional[SolveResult],
                x_k, ctx: AdaptContext):
    """One adaptation step. Returns (new_state, warm_start_or_None, info dict).

    k = 0: solve the full-horizon problem accurately, keep omega = omega_prime_0,
    and build the initial budget schedules from the loose margin (the first stage
    cost is spent as part of the step-0 budget). info["initial_solve"] carries
    the accurate solution.
    k > 0: shift the previous solution, certify the smaller weight via the
    candidate terminal state, clamp the trial weight to the schedule feasibility
    floor, and accept iff the tight margin is positive and omega actually drops.
    A None warm start means: cold start from the zero vector (delta_k = 0).
    """
    if k == 0:
        return _online_step_initial(x_k, ctx)

    if state is None or prev_solution is None:
        raise ValueError("steps k > 0 need the previous state and solution")
    model, weights = ctx.model, ctx.weights
    N, m = ctx.N, model.m
    P, alpha, gamma = weights.P, weights.alpha, weights.gamma
    h = N - k
    x_k = np.asarray(x_k, dtype=float).ravel()
    info: dict = {"k": k, "accepted": False, "rho_tilde": None, "lambda_floor": None,
                  "omega_floor": None, "j_tilde": None, "beta_prime_loose": None,
                  "beta_prime_tight": None}
    omega_prev = state.omega_k
    z_cand = np.asarray(prev_solution.z, dtype=float).ravel()[m:]
    if z_cand.shape[0] != h * m:
        raise ValueError("previous solution has the wrong length for the shifted candidate")
    L, xi_N = stage_cost_sum(model, weights, x_k, z_cand)
    F_tail = float(xi_N @ P @ xi_N)
    rho = rho_from_candidate(xi_N, P, alpha)
    info["rho_tilde"] = rho

    def retain():
        new_state = AdaptState(
            omega_k=omega_prev, omega_prime_0=state.omega_prime_0,
            beta_prime=state.beta_prime, schedule=state.schedule,
            delta_k=state.delta_k + 1, rho_tilde=rho, epsilon=state.epsilon,
        )
        return new_state, z_cand, info

    if rho is None:
        return retain()
    lam = lambda_bound(L, h, gamma, rho, alpha, ctx.epsilon)
    info["lambda_floor"] = lam
    if lam >= omega_prev - ctx.epsilon:
        return retain()
    omega_try = lam + ctx.omega_fraction * (omega_prev - lam)
    # schedule feasibility floor for the linear beta shape: the tight margin
    # beta' = h*gamma + omega*alpha - (L + omega*F_tail) must stay <= h*omega*alpha,
    # else the last radicand goes negative
    C = h * gamma - L
    denom = h * alpha - (alpha - F_tail)
    if C > 0.0 and denom > 0.0:
        omega_floor = C / denom
        info["omega_floor"] = omega_floor
        omega_try = max(omega_try, omega_floor * (1.0 + 1e-9))
    if omega_try >= omega_prev - ctx.epsilon:
        return retain()
    j_tilde = L + omega_try * F_tail
    info["j_tilde"] = j_tilde
    loose, tight = _margins(weights, x_k, z_cand[:m], h, omega_try, j_tilde)
    info["beta_prime_loose"] = loose
    info["beta_prime_tight"] = tight
    if tight <= 0.0:
        return retain()
    try:
        bundle = margin_schedules(j_tilde, tight, k, N, gamma, alpha, omega_try,
                                  ctx.wmax_fn(k, omega_try), P, model.B, eta=ctx.eta)
    except ScheduleError:
        return retain()
    if not bundle.feasible:
        return retain()
    info["accepted"] = True
    new_state = AdaptState(
        omega_k=omega_try, omega_prime_0=state.omega_prime_0, beta_prime=tight,
        schedule=bundle, delta_k=0, rho_tilde=rho, epsilon=state.epsilon,
    )
    return new_state, None, info


def _online_step_initial(x0, ctx: AdaptContext):
    """Step k = 0: accurate solve, weight kept at omega_prime_0, initial schedules."""
    model, weights = ctx.model, ctx.weights
    N, m = ctx.N, model.m
    P, alpha, gamma = weights.P, weights.alpha, weights.gamma
    omega0 = ctx.omega_prime_0
    x0 = np.asarray(x0, dtype=float).ravel()
    qp = ctx.qp_builder(N, omega0)
    res = pgm_solve(qp, x0, np.zeros(N * m), ctx.solve_cap, ctx.box, tol=ctx.solve_tol)
    L, xi_N = stage_cost_sum(model, weights, x0, res.z)
    rho = rho_from_candidate(xi_N, P, alpha)
    info: dict = {"k": 0, "accepted": True, "rho_tilde": rho, "omega_floor": None,
                  "lambda_floor": None, "v0": res.cost, "initial_solve": res}
    if rho is not None:
        info["lambda_floor"] = lambda_bound(L, N, gamma, rho, alpha, ctx.epsilon)
    # the weight stays at omega_prime_0; reductions begin once a shifted
    # candidate exists, so the step-0 schedule matches the constant-weight one
    j_tilde = L + omega0 * float(xi_N @ P @ xi_N)
    info["j_tilde"] = j_tilde
    loose, tight = _margins(weights, x0, res.z[:m], N, omega0, j_tilde)
    info["beta_prime_loose"] = loose
    info["beta_prime_tight"] = tight
    if loose <= 0.0:
        raise ScheduleError(
            f"initial margin {loose:.6g} is not positive; the starting state is "
            "outside the certifiable region for omega_prime_0"
        )
    bundle = margin_schedules(j_tilde, loose, 0, N, gamma, alpha, omega0,
                              ctx.wmax_fn(0, omega0), P, model.B, eta=ctx.eta)
    if not bundle.feasible:
        raise ScheduleError("initial budget schedule is infeasible")
    state = AdaptState(
        omega_k=float(omega0), omega_prime_0=float(omega0),
        beta_prime=loose, schedule=bundle, delta_k=0, rho_tilde=rho,
        epsilon=ctx.epsilon,
    )
    return state, None, info
