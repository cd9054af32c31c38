"""Closed-loop simulation harness: benchmark preset, config I/O, CSV and plot logs.

A run simulates x+ = A x + B u + d for k = 0..N-1 under the shrinking-horizon
controller. Each step condenses the remaining horizon, computes a certified
iteration count (cold bound after a weight change, warm bound otherwise), runs
the projected gradient method for exactly that many iterations, applies the
first move, and draws a bounded disturbance. Everything is logged per step.
"""
from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_factor

from .adaptation import AdaptContext, AdaptState, online_step
from .condensing import CondensedQp
from .dynamics import CostWeights, LtiModel, discretize_zoh, make_cost_weights
from .pgm_solver import (BoxConstraint, flops_per_iteration, iter_bound_cold,
                         iter_bound_warm, pgm_solve)
from .spectral_analysis import check_kappa_condition

DIST_KINDS = ("none", "uniform-ball", "fixed-sequence")
MODES = ("nominal", "adaptive")
SOLVER_MODES = ("certified-bounds", "tolerance")
OUTPUT_DIR_ENV = "SHMPC_OUT_DIR"


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything one closed-loop run needs; see load_config for the file format.

    The model comes either from continuous-time matrices plus a sample time
    (zero-order hold) or directly from discrete-time matrices, never both.
    """

    n_steps: int
    q: np.ndarray
    r: np.ndarray
    omega_prime_0: float
    alpha: float
    u_min: np.ndarray
    u_max: np.ndarray
    x0: np.ndarray
    a_cont: Optional[np.ndarray] = None
    b_cont: Optional[np.ndarray] = None
    ts: Optional[float] = None
    a_disc: Optional[np.ndarray] = None
    b_disc: Optional[np.ndarray] = None
    dist_kind: str = "uniform-ball"
    dist_scale: float = 1.0
    dist_seed: int = 0
    dist_sequence: Optional[np.ndarray] = None
    mode: str = "adaptive"
    solver_mode: str = "certified-bounds"
    solver_tol: float = 1e-10
    epsilon: float = 1e-8
    omega_fraction: float = 0.2
    eta: float = 1.0 / 7.0

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ValueError("mission length must be at least 1")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        cont = self.a_cont is not None or self.b_cont is not None or self.ts is not None
        disc = self.a_disc is not None or self.b_disc is not None
        if cont and disc:
            raise ValueError("give either continuous matrices with ts or discrete matrices, not both")
        if cont and (self.a_cont is None or self.b_cont is None or self.ts is None):
            raise ValueError("continuous model needs a_cont, b_cont and ts")
        if disc and (self.a_disc is None or self.b_disc is None):
            raise ValueError("discrete model needs both a and b")
        if not (cont or disc):
            raise ValueError("no model given")
        if self.dist_kind not in DIST_KINDS:
            raise ValueError(f"disturbance kind must be one of {DIST_KINDS}")
        if self.dist_kind == "uniform-ball" and not 0.0 <= float(self.dist_scale) <= 1.0:
            raise ValueError("scale must lie in [0, 1] for uniform-ball disturbances")
        if self.dist_kind == "fixed-sequence" and self.dist_sequence is None:
            raise ValueError("fixed-sequence disturbances need a sequence")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.solver_mode not in SOLVER_MODES:
            raise ValueError(f"solver mode must be one of {SOLVER_MODES}")
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if x0.size == 0 or not np.all(np.isfinite(x0)):
            raise ValueError("x0 must be finite and nonempty")
        object.__setattr__(self, "x0", x0)

    def build_model(self) -> LtiModel:
        if self.a_disc is not None:
            return LtiModel(A=self.a_disc, B=self.b_disc)
        return discretize_zoh(self.a_cont, self.b_cont, self.ts)

    def build_weights(self, model: LtiModel) -> CostWeights:
        return make_cost_weights(model, self.q, self.r, self.alpha)

    def build_box(self) -> BoxConstraint:
        return BoxConstraint(lower=self.u_min, upper=self.u_max)


def spacecraft_preset() -> SimConfig:
    """Axisymmetric spacecraft spin stabilization, 20 s mission at 0.1 s sampling.

    Transversal angular velocities couple at rate a = p (E_y - E_x) / E_y with
    spin rate p = 1 and inertias E_y = 1, E_x = 0.05; one torque input. The
    initial torque demand sits on the saturation bound.
    """
    p, e_y, e_x = 1.0, 1.0, 0.05
    a = p * (e_y - e_x) / e_y
    return SimConfig(
        n_steps=200,
        q=np.eye(2),
        r=np.array([[3.0]]),
        omega_prime_0=1.0,
        alpha=13.2667,
        u_min=np.array([-0.5]),
        u_max=np.array([0.5]),
        x0=np.array([0.9, 0.9]),
        a_cont=np.array([[0.0, a], [-a, 0.0]]),
        b_cont=np.array([[0.0], [1.0 / e_y]]),
        ts=0.1,
        dist_kind="uniform-ball",
        dist_scale=1.0,
        dist_seed=0,
        mode="adaptive",
    )


@dataclass(frozen=True, eq=False)
class SimStep:
    k: int
    x_k: np.ndarray
    u_k: np.ndarray
    omega_k: float
    kappa_Hk: float
    iter_bound: int
    iters_run: int
    flops_step: int
    V_Nk: float
    Vbar_k: float
    F_xk: float
    beta_prime_k: float
    d_bar_k: float
    delta_k: int
    cold_start_flag: bool


@dataclass(frozen=True, eq=False)
class SimLog:
    config: SimConfig = field(repr=False)
    steps: List[SimStep] = field(repr=False)
    terminal_x: np.ndarray
    terminal_F: float
    flops_total: int
    success: bool
    check_warning: Optional[str] = None


class QpCache:
    """Prefix sums over the horizon so H/G/W at any (h, omega) assemble in O((hm)^2).

    H(h, omega) = H0[h] + omega * ShPSh[h] and likewise for G and W: the stage
    terms accumulate as the horizon grows while the terminal-weight terms scale
    linearly in omega, so one pass over h = 1..N caches both parts for every
    shrinking-horizon subproblem of the run.
    """

    def __init__(self, model: LtiModel, weights: CostWeights, N: int):
        if N < 1:
            raise ValueError("horizon must be at least 1")
        self.model, self.weights, self.N = model, weights, int(N)
        A, B, Q, R, P = model.A, model.B, weights.Q, weights.R, weights.P
        n, m = model.n, model.m
        self.Apow = [np.eye(n)]
        for _ in range(N):
            self.Apow.append(self.Apow[-1] @ A)
        self.H0: list = [None] * (N + 1)
        self.G0: list = [None] * (N + 1)
        self.W0: list = [None] * (N + 1)
        self.ShPSh: list = [None] * (N + 1)
        self.ShPPhi: list = [None] * (N + 1)
        self.PhiPPhi: list = [None] * (N + 1)
        stage_h = np.zeros((m, m))
        stage_g = np.zeros((m, n))
        w_cum = Q.copy()
        s_full = np.zeros((n, 0))  # [A^{h-1}B ... B], grown one block per pass
        self._phi_full: Optional[np.ndarray] = None
        for h in range(1, N + 1):
            hm = h * m
            if h >= 2:
                # stage cost of the newly interior prediction step h-1; its S row
                # is last pass's s_full, zero-padded on the trailing move
                sq = s_full.T @ Q
                grown_h = np.zeros((hm, hm))
                grown_h[:hm - m, :hm - m] = stage_h + sq @ s_full
                stage_h = grown_h
                grown_g = np.zeros((hm, n))
                grown_g[:hm - m, :] = stage_g + sq @ self.Apow[h - 1]
                stage_g = grown_g
                w_cum = w_cum + self.Apow[h - 1].T @ Q @ self.Apow[h - 1]
            s_full = np.hstack([self.Apow[h - 1] @ B, s_full])
            self.H0[h] = stage_h + np.kron(np.eye(h), R)
            self.G0[h] = stage_g.copy()
            self.W0[h] = w_cum.copy()
            self.ShPSh[h] = s_full.T @ P @ s_full
            self.ShPPhi[h] = s_full.T @ P @ self.Apow[h]
            self.PhiPPhi[h] = self.Apow[h].T @ P @ self.Apow[h]
        self._strip = s_full  # [A^{N-1}B ... B]
        self._phi_full = np.vstack(self.Apow[1:])

    def prediction(self, h: int):
        """Phi and S_blocks for horizon h, assembled from the cached powers."""
        n, m = self.model.n, self.model.m
        Phi = self._phi_full[:h * n, :]
        off = (self.N - h) * m
        S_blocks = []
        for l in range(1, h + 1):
            Sl = np.zeros((n, h * m))
            Sl[:, :l * m] = self._strip[:, off + (h - l) * m:]
            S_blocks.append(Sl)
        return Phi, S_blocks

    def matrices(self, h: int, omega: float):
        H = self.H0[h] + omega * self.ShPSh[h]
        G = self.G0[h] + omega * self.ShPPhi[h]
        W = self.W0[h] + omega * self.PhiPPhi[h]
        return 0.5 * (H + H.T), G, 0.5 * (W + W.T)

    def build_qp(self, h: int, omega: float) -> CondensedQp:
        H, G, W = self.matrices(h, omega)
        Phi, S_blocks = self.prediction(h)
        n = self.model.n
        Qbar = np.zeros((h * n, h * n))
        for i in range(h - 1):
            Qbar[i * n:(i + 1) * n, i * n:(i + 1) * n] = self.weights.Q
        Qbar[(h - 1) * n:, (h - 1) * n:] = omega * self.weights.P
        Rbar = np.kron(np.eye(h), self.weights.R)
        return CondensedQp(
            horizon=h, omega=float(omega), H=H, G=G, W=W,
            S_blocks=S_blocks, Phi=Phi, Qbar=Qbar, Rbar=Rbar,
            Q=self.weights.Q, R=self.weights.R, P=self.weights.P, B=self.model.B,
        )

    def wmax_list(self, k: int, omega: float) -> np.ndarray:
        """Largest eigenvalue of W(N-i-1, omega) for i = k..N-2, in step order."""
        out = np.empty(max(0, self.N - 1 - k))
        for j, i in enumerate(range(k, self.N - 1)):
            h = self.N - i - 1
            W = self.W0[h] + omega * self.PhiPPhi[h]
            out[j] = np.linalg.eigvalsh(0.5 * (W + W.T))[-1]
        return out


def _unit_ball_raw(rng: np.random.Generator, n: int) -> np.ndarray:
    """One sample, uniform on the closed unit ball."""
    v = rng.standard_normal(n)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return np.zeros(n)
    return (v / nrm) * rng.random() ** (1.0 / n)


def draw_unit_ball(rng: np.random.Generator, n: int, count: int) -> List[np.ndarray]:
    return [_unit_ball_raw(rng, n) for _ in range(count)]


def run_closed_loop(config: SimConfig,
                    _raw_ball: Optional[List[np.ndarray]] = None) -> SimLog:
    """Simulate the full mission and return the per-step log.

    Disturbances are drawn inside the ball of radius scale * d_bar, where d_bar
    is the budget in force when the step began; a budget recomputed during step
    k only governs draws from step k+1 on. _raw_ball injects pre-drawn unit-ball
    samples so paired runs see the same realization directions and radii.
    """
    model = config.build_model()
    weights = config.build_weights(model)
    box = config.build_box()
    if box.m != model.m:
        raise ValueError("input box dimension does not match the model")
    N, n, m = config.n_steps, model.n, model.m
    seq = None
    if config.dist_kind == "fixed-sequence":
        seq = np.asarray(config.dist_sequence, dtype=float)
        if seq.ndim != 2 or seq.shape[0] < N or seq.shape[1] != n:
            raise ValueError("fixed disturbance sequence must have shape (N, n) at least")
    cache = QpCache(model, weights, N)
    ctx = AdaptContext(
        model=model, weights=weights, N=N, box=box,
        omega_prime_0=config.omega_prime_0,
        qp_builder=cache.build_qp, wmax_fn=cache.wmax_list,
        epsilon=config.epsilon, omega_fraction=config.omega_fraction,
        eta=config.eta, solve_tol=config.solver_tol,
    )
    check_warning = None
    if config.mode == "adaptive":
        report = check_kappa_condition(model, weights, N, config.omega_prime_0)
        if not report.ok:
            check_warning = ("conditioning-monotonicity premise failed "
                             f"(condition_ok={report.condition_ok}, simple_ok={report.simple_ok}); "
                             "proceeding, kappa dominance is not guaranteed")
            warnings.warn(check_warning, RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(config.dist_seed)
    certified = config.solver_mode == "certified-bounds"

    x = config.x0.copy()
    steps: List[SimStep] = []
    flops_total = 0
    state: Optional[AdaptState] = None
    prev_result = None
    dbar_in_force: Optional[float] = None   # governs draws at the current step
    dbar_draw_prev: Optional[float] = None  # budget the previous step drew under

    for k in range(N):
        h = N - k
        if k == 0 or config.mode == "adaptive":
            state, warm, _ = online_step(k, state, prev_result, x, ctx)
        else:
            # nominal mode: schedule fixed at its step-0 value, weight never moves
            warm = np.asarray(prev_result.z, dtype=float).ravel()[m:]
            state = replace(state, delta_k=state.delta_k + 1)
        sched = state.schedule
        if dbar_in_force is None:
            dbar_in_force = sched.d_bar
        cold = state.delta_k == 0
        qp = cache.build_qp(h, state.omega_k)
        vals = np.linalg.eigvalsh(qp.H)
        lam_min, lam_max = float(vals[0]), float(vals[-1])
        spectra = (lam_min, lam_max)
        chol = cho_factor(qp.H)
        if cold:
            bound = iter_bound_cold(qp, x, sched.ebar_at(k), spectra=spectra, chol=chol)
            z0 = np.zeros(h * m)
        else:
            bound = iter_bound_warm(qp, sched.ebar_at(k), sched.ebar_at(k - 1),
                                    dbar_draw_prev, spectra=spectra, chol=chol)
            z0 = warm
        if certified:
            res = pgm_solve(qp, x, z0, bound, box, spectra=spectra)
        else:
            res = pgm_solve(qp, x, z0, 200000, box, tol=config.solver_tol, spectra=spectra)
        u = res.z[:m].copy()
        flops_step = res.iterations_run * flops_per_iteration(h, m, n)
        flops_total += flops_step
        # at a step that recomputed its own budgets, the certified value V_bar
        # is the feasible-candidate cost, not the schedule formula
        vbar_k = sched.v_anchor if sched.anchor_k == k else sched.vbar_at(k)
        steps.append(SimStep(
            k=k, x_k=x.copy(), u_k=u, omega_k=float(state.omega_k),
            kappa_Hk=lam_max / lam_min, iter_bound=int(bound),
            iters_run=int(res.iterations_run), flops_step=int(flops_step),
            V_Nk=float(res.cost), Vbar_k=float(vbar_k),
            F_xk=float(x @ weights.P @ x), beta_prime_k=float(state.beta_prime),
            d_bar_k=float(sched.d_bar), delta_k=int(state.delta_k),
            cold_start_flag=bool(cold),
        ))
        if config.dist_kind == "none":
            d = np.zeros(n)
        elif config.dist_kind == "fixed-sequence":
            d = seq[k].copy()
        else:
            raw = _raw_ball[k] if _raw_ball is not None else _unit_ball_raw(rng, n)
            d = raw * (config.dist_scale * dbar_in_force)
        x = model.A @ x + model.B @ u + d
        prev_result = res
        dbar_draw_prev = dbar_in_force
        if sched.anchor_k == k:
            dbar_in_force = sched.d_bar

    terminal_F = float(x @ weights.P @ x)
    return SimLog(
        config=config, steps=steps, terminal_x=x, terminal_F=terminal_F,
        flops_total=int(flops_total),
        success=bool(np.isfinite(terminal_F) and terminal_F <= config.alpha + 1e-12),
        check_warning=check_warning,
    )


@dataclass(frozen=True, eq=False)
class CompareReport:
    nominal: SimLog = field(repr=False)
    adaptive: SimLog = field(repr=False)
    kappa_nominal: np.ndarray
    kappa_adaptive: np.ndarray
    omega_adaptive: np.ndarray
    bound_nominal: np.ndarray
    bound_adaptive: np.ndarray
    flops_nominal: int
    flops_adaptive: int
    dominance_ok: bool
    strict_where_reduced: bool


def compare_modes(config: SimConfig, strict_rel_margin: float = 1e-10) -> CompareReport:
    """Run nominal and adaptive side by side on one disturbance realization.

    Both runs consume the same pre-drawn unit-ball samples; each scales them by
    its own in-force budget, so the realization process is shared even where the
    budgets differ. Raises if the adaptive run's conditioning ever exceeds the
    nominal run's, or fails to beat it strictly wherever the weight was reduced.
    """
    model = config.build_model()
    raws = None
    if config.dist_kind == "uniform-ball":
        rng = np.random.default_rng(config.dist_seed)
        raws = draw_unit_ball(rng, model.n, config.n_steps)
    log_nom = run_closed_loop(replace(config, mode="nominal"), _raw_ball=raws)
    log_ada = run_closed_loop(replace(config, mode="adaptive"), _raw_ball=raws)
    k_nom = np.array([s.kappa_Hk for s in log_nom.steps])
    k_ada = np.array([s.kappa_Hk for s in log_ada.steps])
    w_ada = np.array([s.omega_k for s in log_ada.steps])
    reduced = w_ada < config.omega_prime_0 * (1.0 - 1e-12)
    # a one-dimensional Hessian has condition number 1 under any weight, so
    # strictness is only claimable while the QP has at least two variables
    hm = (config.n_steps - np.arange(config.n_steps)) * model.m
    strict_mask = reduced & (hm >= 2)
    dominance_ok = bool(np.all(k_ada <= k_nom * (1.0 + 1e-12)))
    strict_ok = bool(np.all(k_nom[strict_mask] - k_ada[strict_mask]
                            > strict_rel_margin * k_nom[strict_mask]))
    if not (dominance_ok and strict_ok):
        raise RuntimeError("conditioning dominance violated between adaptive and nominal runs")
    return CompareReport(
        nominal=log_nom, adaptive=log_ada,
        kappa_nominal=k_nom, kappa_adaptive=k_ada, omega_adaptive=w_ada,
        bound_nominal=np.array([s.iter_bound for s in log_nom.steps]),
        bound_adaptive=np.array([s.iter_bound for s in log_ada.steps]),
        flops_nominal=log_nom.flops_total, flops_adaptive=log_ada.flops_total,
        dominance_ok=dominance_ok, strict_where_reduced=strict_ok,
    )


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def csv_columns(n: int, m: int) -> List[str]:
    cols = ["k"]
    cols += [f"x_{i}" for i in range(n)]
    cols += [f"u_{i}" for i in range(m)]
    cols += ["omega", "kappa_H", "iter_bound", "iters_run", "flops_step",
             "V_N", "V_bar", "F_x", "beta_prime", "d_bar", "delta", "cold_start"]
    return cols


def export_csv(log: SimLog, path) -> None:
    """Write the per-step log; fixed column order, full double precision.

    Columns: k, x_0..x_{n-1}, u_0..u_{m-1}, omega, kappa_H, iter_bound,
    iters_run, flops_step, V_N, V_bar, F_x, beta_prime, d_bar, delta,
    cold_start (0/1). Floats carry 17 significant digits so parsing the file
    back reproduces every value exactly.
    """
    n = int(np.asarray(log.config.x0).size)
    m = int(np.asarray(log.config.u_min).ravel().size)
    lines = [",".join(csv_columns(n, m))]
    for s in log.steps:
        row = [str(s.k)]
        row += [_fmt(v) for v in np.asarray(s.x_k).ravel()]
        row += [_fmt(v) for v in np.asarray(s.u_k).ravel()]
        row += [_fmt(s.omega_k), _fmt(s.kappa_Hk), str(s.iter_bound),
                str(s.iters_run), str(s.flops_step), _fmt(s.V_Nk), _fmt(s.Vbar_k),
                _fmt(s.F_xk), _fmt(s.beta_prime_k), _fmt(s.d_bar_k),
                str(s.delta_k), str(int(s.cold_start_flag))]
        lines.append(",".join(row))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write CSV log to {path}: {e}") from e


def emit_plot_data(log: SimLog, path) -> None:
    """Write per-panel series (state, omega, kappa, iteration bounds) as JSON."""
    ks = [s.k for s in log.steps]
    panels = {
        "state": {"k": ks,
                  "x": [list(map(float, np.asarray(s.x_k).ravel())) for s in log.steps],
                  "u": [list(map(float, np.asarray(s.u_k).ravel())) for s in log.steps]},
        "omega": {"k": ks, "omega": [s.omega_k for s in log.steps]},
        "kappa": {"k": ks, "kappa": [s.kappa_Hk for s in log.steps]},
        "bounds": {"k": ks,
                   "iter_bound": [s.iter_bound for s in log.steps],
                   "iters_run": [s.iters_run for s in log.steps],
                   "flops_step": [s.flops_step for s in log.steps]},
        "totals": {"flops_total": log.flops_total,
                   "terminal_F": log.terminal_F,
                   "alpha": float(log.config.alpha),
                   "success": log.success},
    }
    try:
        with open(path, "w", encoding="ascii") as f:
            json.dump(panels, f, indent=1)
            f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write plot data to {path}: {e}") from e


def resolve_output_dir(cli_value: Optional[str]) -> str:
    """Output directory: the environment override wins, then the CLI value, then cwd."""
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return env
    if cli_value:
        return cli_value
    return "."


_SECTION_KEYS = {
    "model": {"a_cont", "b_cont", "ts", "a", "b", "u_min", "u_max"},
    "cost": {"q", "r", "omega_prime_0", "alpha"},
    "horizon": {"N", "x0"},
    "disturbance": {"kind", "scale", "seed", "sequence"},
    "solver": {"mode", "tol"},
    "adaptation": {"mode", "epsilon", "omega_fraction", "eta"},
}


def _load_toml(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e}") from e


def load_config(path) -> SimConfig:
    """Parse a run configuration from TOML.

    Sections [model], [cost] and [horizon] are required; [disturbance],
    [solver] and [adaptation] are optional. Unknown sections or keys are
    rejected, so a typo fails loudly instead of silently running defaults.
    """
    data = _load_toml(path)
    for section in data:
        if section not in _SECTION_KEYS:
            raise ValueError(f"unknown config section [{section}]")
        if not isinstance(data[section], dict):
            raise ValueError(f"config section [{section}] must be a table")
        for key in data[section]:
            if key not in _SECTION_KEYS[section]:
                raise ValueError(f"unknown key '{key}' in section [{section}]")
    for section in ("model", "cost", "horizon"):
        if section not in data:
            raise ValueError(f"missing required config section [{section}]")
    model, cost, horizon = data["model"], data["cost"], data["horizon"]
    dist = data.get("disturbance", {})
    solver = data.get("solver", {})
    adapt = data.get("adaptation", {})

    def arr(v):
        return None if v is None else np.asarray(v, dtype=float)

    for req, sec in (("q", cost), ("r", cost), ("omega_prime_0", cost), ("alpha", cost),
                     ("u_min", model), ("u_max", model), ("N", horizon), ("x0", horizon)):
        if req not in sec:
            raise ValueError(f"missing required config key '{req}'")
    return SimConfig(
        n_steps=int(horizon["N"]),
        q=arr(cost["q"]), r=arr(cost["r"]),
        omega_prime_0=float(cost["omega_prime_0"]), alpha=float(cost["alpha"]),
        u_min=arr(model["u_min"]), u_max=arr(model["u_max"]),
        x0=arr(horizon["x0"]),
        a_cont=arr(model.get("a_cont")), b_cont=arr(model.get("b_cont")),
        ts=None if "ts" not in model else float(model["ts"]),
        a_disc=arr(model.get("a")), b_disc=arr(model.get("b")),
        dist_kind=dist.get("kind", "uniform-ball"),
        dist_scale=float(dist.get("scale", 1.0)),
        dist_seed=int(dist.get("seed", 0)),
        dist_sequence=arr(dist.get("sequence")),
        mode=adapt.get("mode", "adaptive"),
        solver_mode=solver.get("mode", "certified-bounds"),
        solver_tol=float(solver.get("tol", 1e-10)),
        epsilon=float(adapt.get("epsilon", 1e-8)),
        omega_fraction=float(adapt.get("omega_fraction", 0.2)),
        eta=float(adapt.get("eta", 1.0 / 7.0)),
    )


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _fmt(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, np.ndarray):
        if v.ndim == 1:
            return "[" + ", ".join(_fmt(x) for x in v) + "]"
        return "[" + ", ".join(_toml_value(row) for row in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def config_to_toml_str(config: SimConfig) -> str:
    """Render a config in the load_config format (full precision)."""
    sections: dict = {"model": {}, "cost": {}, "horizon": {}, "disturbance": {},
                      "solver": {}, "adaptation": {}}
    mdl = sections["model"]
    if config.a_disc is not None:
        mdl["a"] = config.a_disc
        mdl["b"] = config.b_disc
    else:
        mdl["a_cont"] = config.a_cont
        mdl["b_cont"] = config.b_cont
        mdl["ts"] = config.ts
    mdl["u_min"] = np.asarray(config.u_min, dtype=float).ravel()
    mdl["u_max"] = np.asarray(config.u_max, dtype=float).ravel()
    sections["cost"] = {"q": np.asarray(config.q, dtype=float),
                        "r": np.asarray(config.r, dtype=float),
                        "omega_prime_0": config.omega_prime_0, "alpha": config.alpha}
    sections["horizon"] = {"N": config.n_steps, "x0": config.x0}
    sections["disturbance"] = {"kind": config.dist_kind, "scale": config.dist_scale,
                               "seed": config.dist_seed}
    if config.dist_sequence is not None:
        sections["disturbance"]["sequence"] = np.asarray(config.dist_sequence, dtype=float)
    sections["solver"] = {"mode": config.solver_mode, "tol": config.solver_tol}
    sections["adaptation"] = {"mode": config.mode, "epsilon": config.epsilon,
                              "omega_fraction": config.omega_fraction, "eta": config.eta}
    lines = []
    for name, table in sections.items():
        lines.append(f"[{name}]")
        for key, value in table.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def config_to_toml(config: SimConfig, path) -> None:
    """Write a config in the load_config format."""
    text = config_to_toml_str(config)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"cannot write config to {path}: {e}") from e
