"""Measurement scheduling policies.

Four ways to map the current posterior (or measurement history) to the
next exposure time and readout phase: uniform random draws, the halving
schedule (exposure halves, phase averages in the last outcome), greedy
mutual-information maximization, and greedy expected-variance
minimization.  The greedy policies search an exhaustive tau x theta
product grid, geometric in tau so that halving sequences land on grid
anchors, uniform in theta.

Ties (values within ``TIE_TOL`` of the optimum) resolve to the smallest
tau, then the smallest theta.  The information objective is invariant
under theta -> theta + pi (relabelling the two outcomes), so optima come
in pairs; the tie rule canonically picks the representative below pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import xlogy

from .bayes import (
    FieldDistribution,
    FieldGrid,
    RamseyParams,
    TWO_PI,
    bayes_update,
    uniform_distribution,
)

POLICY_KINDS = ("random", "kpe", "myopic_entropy", "variance_min")

# Cells whose objective is within this of the best count as tied.
TIE_TOL = 1e-9

_EV_MASS_FLOOR = 1e-300


@dataclass(frozen=True)
class PolicyConfig:
    """Hyperparameters shared by all policies.

    tau_min/tau_max bound both the random draws and the search grid;
    kpe_tau0/kpe_theta0 seed the halving schedule.  coherence_time is the
    dephasing time the policies assume when scoring or emitting
    measurement parameters.
    """

    kind: str = "myopic_entropy"
    tau_min: float = 5.0 / 512.0
    tau_max: float = 5.0
    tau_grid_size: int = 64
    theta_grid_size: int = 64
    kpe_tau0: float = 4.0
    kpe_theta0: float = 0.0
    coherence_time: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        if not 0.0 < self.tau_min < self.tau_max < math.inf:
            raise ValueError(f"require 0 < tau_min < tau_max < inf, got [{self.tau_min}, {self.tau_max}]")
        if self.tau_grid_size < 1 or self.theta_grid_size < 1:
            raise ValueError("grid sizes must be positive")
        if not self.kpe_tau0 > 0.0:
            raise ValueError(f"require kpe_tau0 > 0, got {self.kpe_tau0}")
        if not self.coherence_time > 0.0:
            raise ValueError(f"require coherence_time > 0, got {self.coherence_time}")
        object.__setattr__(self, "kpe_theta0", float(self.kpe_theta0) % TWO_PI)


@dataclass(frozen=True)
class PolicyState:
    """Posterior plus the (params, outcome) history that produced it."""

    posterior: FieldDistribution
    history: tuple[tuple[RamseyParams, int], ...] = ()
    step_index: int = 0

    def __post_init__(self) -> None:
        if len(self.history) != self.step_index:
            raise ValueError(
                f"history length {len(self.history)} != step_index {self.step_index}"
            )


def tau_search_grid(cfg: PolicyConfig) -> np.ndarray:
    if cfg.tau_grid_size == 1:
        return np.array([cfg.tau_min])
    return np.geomspace(cfg.tau_min, cfg.tau_max, cfg.tau_grid_size)


def theta_search_grid(cfg: PolicyConfig) -> np.ndarray:
    return np.arange(cfg.theta_grid_size) * (TWO_PI / cfg.theta_grid_size)


@lru_cache(maxsize=256)
def _tau_trig(grid_key: tuple[float, float, int], tau: float) -> tuple[np.ndarray, np.ndarray]:
    # cos/sin of 2 tau b on the grid; cached because the search grid taus
    # repeat every policy call while the posterior changes.
    b_min, b_max, n_points = grid_key
    b = np.linspace(b_min, b_max, n_points)
    c = np.cos(2.0 * tau * b)
    s = np.sin(2.0 * tau * b)
    c.flags.writeable = False
    s.flags.writeable = False
    return c, s


def _grid_key(grid: FieldGrid) -> tuple[float, float, int]:
    return (grid.b_min, grid.b_max, grid.n_points)


def _mi_matrix(d: FieldDistribution, cfg: PolicyConfig) -> np.ndarray:
    """Mutual information for every (tau, theta) cell, natural units."""
    taus = tau_search_grid(cfg)
    thetas = theta_search_grid(cfg)
    q = d.grid.trapz_weights * d.density
    cos_t = np.cos(thetas)[:, None]
    sin_t = np.sin(thetas)[:, None]
    key = _grid_key(d.grid)
    out = np.empty((len(taus), len(thetas)))
    for i, tau in enumerate(taus):
        c, s = _tau_trig(key, float(tau))
        contrast = math.exp(-tau / cfg.coherence_time)
        l0 = 0.5 + (0.5 * contrast) * (cos_t * c - sin_t * s)
        l1 = 1.0 - l0
        p0 = l0 @ q
        p1 = l1 @ q
        h_x = -(xlogy(p0, p0) + xlogy(p1, p1))
        h_xb = -(xlogy(l0, l0) + xlogy(l1, l1)) @ q
        out[i] = h_x - h_xb
    return out


def _expected_variance_matrix(d: FieldDistribution, cfg: PolicyConfig) -> np.ndarray:
    """Outcome-averaged posterior variance for every (tau, theta) cell."""
    taus = tau_search_grid(cfg)
    thetas = theta_search_grid(cfg)
    b = d.grid.points
    q = d.grid.trapz_weights * d.density
    qb = q * b
    qb2 = qb * b
    tot0, tot1, tot2 = float(q.sum()), float(qb.sum()), float(qb2.sum())
    cos_t = np.cos(thetas)[:, None]
    sin_t = np.sin(thetas)[:, None]
    key = _grid_key(d.grid)
    out = np.empty((len(taus), len(thetas)))
    for i, tau in enumerate(taus):
        c, s = _tau_trig(key, float(tau))
        contrast = math.exp(-tau / cfg.coherence_time)
        l0 = 0.5 + (0.5 * contrast) * (cos_t * c - sin_t * s)
        m0 = l0 @ q
        m1 = l0 @ qb
        m2 = l0 @ qb2
        ev = np.zeros(len(thetas))
        for m0x, m1x, m2x in ((m0, m1, m2), (tot0 - m0, tot1 - m1, tot2 - m2)):
            ok = m0x > _EV_MASS_FLOOR
            mm = np.where(ok, m0x, 1.0)
            var = np.maximum(m2x / mm - (m1x / mm) ** 2, 0.0)
            ev += np.where(ok, m0x * var, 0.0)
        out[i] = ev
    return out


def _best_cell(scores: np.ndarray, cfg: PolicyConfig) -> tuple[float, float]:
    """Smallest-tau-then-smallest-theta cell among near-maximal scores."""
    best = float(scores.max())
    ti, hi = np.argwhere(scores >= best - TIE_TOL)[0]
    return float(tau_search_grid(cfg)[ti]), float(theta_search_grid(cfg)[hi])


def next_params_random(state: PolicyState, cfg: PolicyConfig, rng: np.random.Generator) -> RamseyParams:
    """tau uniform on [tau_min, tau_max), theta uniform on [0, 2*pi).

    Ignores the state entirely and consumes exactly two uniform draws, in
    that order.
    """
    tau = float(rng.uniform(cfg.tau_min, cfg.tau_max))
    theta = float(rng.uniform(0.0, TWO_PI))
    return RamseyParams(tau, theta, coherence_time=cfg.coherence_time)


def next_params_kpe(state: PolicyState, cfg: PolicyConfig) -> RamseyParams:
    """Halving schedule: first call returns the hyperparameters, then
    tau halves and theta moves to (theta + pi * outcome) / 2 each step."""
    if not state.history:
        return RamseyParams(cfg.kpe_tau0, cfg.kpe_theta0, coherence_time=cfg.coherence_time)
    prev_params, prev_outcome = state.history[-1]
    tau = 0.5 * prev_params.tau
    theta = 0.5 * (prev_params.theta + math.pi * prev_outcome)
    return RamseyParams(tau, theta, coherence_time=cfg.coherence_time)


def next_params_myopic_entropy(state: PolicyState, cfg: PolicyConfig) -> RamseyParams:
    """Exhaustive grid argmax of single-measurement mutual information."""
    tau, theta = _best_cell(_mi_matrix(state.posterior, cfg), cfg)
    return RamseyParams(tau, theta, coherence_time=cfg.coherence_time)


def next_params_variance_min(state: PolicyState, cfg: PolicyConfig) -> RamseyParams:
    """Exhaustive grid argmin of the expected posterior variance."""
    tau, theta = _best_cell(-_expected_variance_matrix(state.posterior, cfg), cfg)
    return RamseyParams(tau, theta, coherence_time=cfg.coherence_time)


def next_params(state: PolicyState, cfg: PolicyConfig, rng: np.random.Generator | None = None) -> RamseyParams:
    """Dispatch on cfg.kind; only the random policy consumes the rng."""
    if cfg.kind == "random":
        if rng is None:
            raise ValueError("random policy requires an rng")
        return next_params_random(state, cfg, rng)
    if cfg.kind == "kpe":
        return next_params_kpe(state, cfg)
    if cfg.kind == "myopic_entropy":
        return next_params_myopic_entropy(state, cfg)
    if cfg.kind == "variance_min":
        return next_params_variance_min(state, cfg)
    raise ValueError(f"unknown policy kind {cfg.kind!r}")


def tau_cell_index(cfg: PolicyConfig, tau: float) -> int:
    """Nearest index of tau on the geometric search grid."""
    if cfg.tau_grid_size == 1:
        return 0
    ratio = math.log(cfg.tau_max / cfg.tau_min)
    pos = (cfg.tau_grid_size - 1) * math.log(tau / cfg.tau_min) / ratio
    return min(max(int(round(pos)), 0), cfg.tau_grid_size - 1)


def theta_cell_index(cfg: PolicyConfig, theta: float) -> int:
    """Nearest index of theta on the circular search grid."""
    pos = int(round((theta % TWO_PI) / (TWO_PI / cfg.theta_grid_size)))
    return pos % cfg.theta_grid_size


def theta_cells_apart(cfg: PolicyConfig, theta_a: float, theta_b: float) -> int:
    k = cfg.theta_grid_size
    d = abs(theta_cell_index(cfg, theta_a) - theta_cell_index(cfg, theta_b))
    return min(d, k - d)


@dataclass(frozen=True)
class KpeCheckRow:
    """One step of the halving-vs-myopic prediction comparison."""

    step: int
    kpe_tau: float
    kpe_theta: float
    myopic_tau: float
    myopic_theta: float
    tau_cell_delta: int
    theta_cell_delta: int


def compare_kpe_to_myopic(
    outcomes, cfg: PolicyConfig, grid: FieldGrid
) -> list[KpeCheckRow]:
    """Drive a scripted halving-schedule trajectory and compare predictions.

    The trajectory starts from a uniform prior over ``grid`` and follows
    the halving schedule through the scripted outcomes; after each update
    both the schedule's next parameters and the myopic argmax are
    computed on the same posterior.  Returns one row per step from step 2
    (the first adaptive prediction) onward.
    """
    outcomes = [int(x) for x in outcomes]
    if any(x not in (0, 1) for x in outcomes):
        raise ValueError("outcomes must be 0/1")
    posterior = uniform_distribution(grid)
    history: list[tuple[RamseyParams, int]] = []
    params = RamseyParams(cfg.kpe_tau0, cfg.kpe_theta0, coherence_time=cfg.coherence_time)
    rows: list[KpeCheckRow] = []
    for i, x in enumerate(outcomes, start=1):
        posterior = bayes_update(posterior, params, x)
        history.append((params, x))
        state = PolicyState(posterior, tuple(history), len(history))
        kpe = next_params_kpe(state, cfg)
        myo = next_params_myopic_entropy(state, cfg)
        rows.append(
            KpeCheckRow(
                step=i + 1,
                kpe_tau=kpe.tau,
                kpe_theta=kpe.theta,
                myopic_tau=myo.tau,
                myopic_theta=myo.theta,
                tau_cell_delta=abs(tau_cell_index(cfg, kpe.tau) - tau_cell_index(cfg, myo.tau)),
                theta_cell_delta=theta_cells_apart(cfg, kpe.theta, myo.theta),
            )
        )
        params = kpe
    return rows
