"""Shared fixtures: the spacecraft benchmark bank and random problem generators."""
import time
from dataclasses import replace

import numpy as np
import pytest

from shmpc import (LtiModel, compare_modes, make_cost_weights, run_closed_loop,
                   spacecraft_preset)
from shmpc.dynamics import stabilizability_defect
from shmpc.sim_harness import QpCache

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def preset():
    return spacecraft_preset()


@pytest.fixture(scope="session")
def bench_model(preset):
    return preset.build_model()


@pytest.fixture(scope="session")
def bench_weights(preset, bench_model):
    return preset.build_weights(bench_model)


@pytest.fixture(scope="session")
def bench_cache(preset, bench_model, bench_weights):
    return QpCache(bench_model, bench_weights, preset.n_steps)


@pytest.fixture(scope="session")
def bench_bank(preset):
    """Closed-loop logs for 20 disturbance seeds in both modes, plus wall time.

    Built once and shared by the acceptance tests so the 40 benchmark runs are
    paid for a single time.
    """
    logs = {}
    t0 = time.perf_counter()
    for seed in range(20):
        for mode in ("nominal", "adaptive"):
            cfg = replace(preset, dist_seed=seed, mode=mode)
            logs[(mode, seed)] = run_closed_loop(cfg)
    elapsed = time.perf_counter() - t0
    return {"logs": logs, "elapsed": elapsed}


@pytest.fixture(scope="session")
def bench_compare(preset):
    """One paired nominal/adaptive benchmark comparison on the default seed."""
    return compare_modes(preset)


def random_stabilizable(rng, n_max=4, m_max=2):
    """Draw a stabilizable (A, B) pair with a mix of stable and unstable spectra."""
    while True:
        n = int(rng.integers(1, n_max + 1))
        m = int(rng.integers(1, m_max + 1))
        A = rng.normal(size=(n, n))
        radius = max(float(np.max(np.abs(np.linalg.eigvals(A)))), 0.2)
        A *= rng.uniform(0.3, 1.25) / radius
        B = rng.normal(size=(n, m))
        if stabilizability_defect(A, B) is None:
            return LtiModel(A=A, B=B)


def random_weights(rng, model, alpha=None):
    n, m = model.n, model.m
    M = rng.normal(size=(n, n))
    Q = M @ M.T + 0.5 * np.eye(n)
    chi = float(rng.uniform(0.2, 3.0))
    if alpha is None:
        alpha = float(rng.uniform(0.5, 5.0))
    return make_cost_weights(model, Q, chi * np.eye(m), alpha)
