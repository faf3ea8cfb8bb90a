"""Sequential measurement simulation and ensemble aggregation.

A trial draws (or fixes) a true field value, then repeats: ask the
policy for the next controls, sample a binary outcome from the true
field's likelihood, update the posterior, and record its entropy and
spread.  Trials derive independent random streams from (master_seed,
trial_index), so an ensemble is a pure function of its configuration and
is insensitive to execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bayes import (
    FieldDistribution,
    FieldGrid,
    RamseyParams,
    bayes_update,
    entropy,
    gaussian_distribution,
    likelihood,
    mean,
    variance,
)
from .policies import PolicyConfig, PolicyState, next_params


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation run depends on.

    true_field of None means each trial samples its own true value from
    the Gaussian prior; a float pins it (useful for debugging and
    oracle tests).
    """

    prior_mean: float
    prior_std: float
    coherence_time: float
    n_measurements: int
    n_realizations: int
    master_seed: int
    policy: PolicyConfig
    grid: FieldGrid
    true_field: float | None = None

    def __post_init__(self) -> None:
        if not self.prior_std > 0.0:
            raise ValueError(f"require prior_std > 0, got {self.prior_std}")
        if not self.coherence_time > 0.0:
            raise ValueError(f"require coherence_time > 0, got {self.coherence_time}")
        if self.n_measurements < 0:
            raise ValueError(f"require n_measurements >= 0, got {self.n_measurements}")
        if self.n_realizations < 1:
            raise ValueError(f"require n_realizations >= 1, got {self.n_realizations}")
        lo = self.prior_mean - 6.0 * self.prior_std
        hi = self.prior_mean + 6.0 * self.prior_std
        if lo < self.grid.b_min or hi > self.grid.b_max:
            raise ValueError(
                f"grid [{self.grid.b_min}, {self.grid.b_max}] must cover prior_mean +- 6 std "
                f"([{lo}, {hi}])"
            )
        if self.policy.coherence_time != self.coherence_time:
            raise ValueError(
                "policy.coherence_time must match the simulation coherence_time "
                f"({self.policy.coherence_time} != {self.coherence_time})"
            )


@dataclass(frozen=True)
class StepRecord:
    step: int
    tau: float
    theta: float
    outcome: int
    posterior_entropy: float
    posterior_std: float
    posterior_mean: float


@dataclass(frozen=True)
class Trajectory:
    """Per-step records of one simulated measurement sequence."""

    master_seed: int
    trial_index: int
    b_true: float
    records: tuple[StepRecord, ...]


@dataclass(frozen=True)
class EnsembleSummary:
    """Across-trial per-step means and stds (population std, ddof=0)."""

    n_trials: int
    mean_entropy: np.ndarray
    std_entropy: np.ndarray
    mean_posterior_std: np.ndarray
    std_posterior_std: np.ndarray


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent per-trial stream from a stateless seed mix."""
    return np.random.default_rng([int(master_seed), int(trial_index)])


def initial_prior(cfg: SimConfig) -> FieldDistribution:
    return gaussian_distribution(cfg.grid, cfg.prior_mean, cfg.prior_std)


def sample_outcome(rng: np.random.Generator, b_true: float, p: RamseyParams) -> int:
    """Draw one outcome from the true field's likelihood (one uniform draw)."""
    return 0 if rng.random() < likelihood(0, b_true, p) else 1


def run_trial(cfg: SimConfig, trial_index: int) -> Trajectory:
    """Simulate one measurement sequence; bit-identical for equal inputs."""
    rng = trial_rng(cfg.master_seed, trial_index)
    if cfg.true_field is not None:
        b_true = float(cfg.true_field)
    else:
        b_true = float(rng.normal(cfg.prior_mean, cfg.prior_std))
    posterior = initial_prior(cfg)
    history: list[tuple[RamseyParams, int]] = []
    records: list[StepRecord] = []
    for step in range(1, cfg.n_measurements + 1):
        state = PolicyState(posterior, tuple(history), len(history))
        params = next_params(state, cfg.policy, rng)
        outcome = sample_outcome(rng, b_true, params)
        posterior = bayes_update(posterior, params, outcome)
        records.append(
            StepRecord(
                step=step,
                tau=params.tau,
                theta=params.theta,
                outcome=outcome,
                posterior_entropy=entropy(posterior),
                posterior_std=math.sqrt(variance(posterior)),
                posterior_mean=mean(posterior),
            )
        )
        history.append((params, outcome))
    return Trajectory(cfg.master_seed, trial_index, b_true, tuple(records))


def summarize(trajectories: list[Trajectory]) -> EnsembleSummary:
    """Aggregate per-step statistics across trials."""
    if not trajectories:
        raise ValueError("need at least one trajectory")
    ent = np.array([[r.posterior_entropy for r in t.records] for t in trajectories])
    std = np.array([[r.posterior_std for r in t.records] for t in trajectories])
    return EnsembleSummary(
        n_trials=len(trajectories),
        mean_entropy=ent.mean(axis=0),
        std_entropy=ent.std(axis=0),
        mean_posterior_std=std.mean(axis=0),
        std_posterior_std=std.std(axis=0),
    )


def run_ensemble(cfg: SimConfig) -> EnsembleSummary:
    """Run n_realizations independent trials and aggregate them."""
    return summarize([run_trial(cfg, i) for i in range(cfg.n_realizations)])
