"""Grid-based Bayesian inference for Ramsey-style magnetometry.

Field distributions live on a fixed uniform grid, and every integral in
this module uses the same trapezoidal rule.  Using one quadrature rule
everywhere is what makes the information identities (mutual information
equals prior entropy minus expected posterior entropy, predictive
probabilities summing to one, update order independence) hold to float
precision instead of only in the continuum limit.

All quantities are in natural units: the coupling constant defaults to 1
and exposure/coherence times are the corresponding rescaled quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

TWO_PI = 2.0 * math.pi

# Predictive probabilities at or below this are treated as an impossible
# outcome rather than fed into a division.
ZERO_EVIDENCE_FLOOR = 1e-300

# Trapezoidal integral of a density must stay this close to 1.
NORMALIZATION_TOL = 1e-9


class ZeroEvidence(ValueError):
    """An outcome with (numerically) zero probability under the prior."""


@dataclass(frozen=True)
class FieldGrid:
    """Uniformly spaced sample points for densities over the field.

    ``points`` and ``trapz_weights`` are derived once at construction and
    shared read-only; two grids compare equal iff their defining triple
    (b_min, b_max, n_points) matches.
    """

    b_min: float
    b_max: float
    n_points: int
    points: np.ndarray = field(init=False, repr=False, compare=False)
    trapz_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.b_min < self.b_max:
            raise ValueError(f"require b_min < b_max, got [{self.b_min}, {self.b_max}]")
        if self.n_points < 2:
            raise ValueError(f"require n_points >= 2, got {self.n_points}")
        pts = np.linspace(self.b_min, self.b_max, self.n_points)
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "trapz_weights", w)

    @property
    def spacing(self) -> float:
        return (self.b_max - self.b_min) / (self.n_points - 1)

    @property
    def width(self) -> float:
        return self.b_max - self.b_min

    def integrate(self, values: np.ndarray) -> float:
        """Trapezoidal integral of point values over the grid."""
        return float(self.trapz_weights @ values)


def default_grid() -> FieldGrid:
    """The default working grid: [-20, 20] at 2**14 points."""
    return FieldGrid(-20.0, 20.0, 2**14)


@dataclass(frozen=True)
class FieldDistribution:
    """A normalized probability density sampled on a :class:`FieldGrid`.

    The density is validated (non-negative, trapezoidal integral within
    ``NORMALIZATION_TOL`` of one) and stored read-only; instances are
    immutable and safe to share across threads.
    """

    grid: FieldGrid
    density: np.ndarray

    def __post_init__(self) -> None:
        dens = np.ascontiguousarray(self.density, dtype=float)
        if dens.shape != (self.grid.n_points,):
            raise ValueError(
                f"density shape {dens.shape} does not match grid ({self.grid.n_points},)"
            )
        if np.any(dens < 0.0):
            raise ValueError("density values must be non-negative")
        total = self.grid.integrate(dens)
        if not math.isfinite(total) or abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"density integrates to {total!r}, expected 1")
        dens.flags.writeable = False
        object.__setattr__(self, "density", dens)


def distribution_from_density(grid: FieldGrid, values: np.ndarray) -> FieldDistribution:
    """Normalize arbitrary non-negative point values into a distribution."""
    vals = np.asarray(values, dtype=float)
    total = grid.integrate(vals)
    if total <= 0.0 or not math.isfinite(total):
        raise ValueError(f"cannot normalize density with integral {total!r}")
    return FieldDistribution(grid, vals / total)


def gaussian_distribution(grid: FieldGrid, mean: float, std: float) -> FieldDistribution:
    if std <= 0.0:
        raise ValueError(f"require std > 0, got {std}")
    z = (grid.points - mean) / std
    return distribution_from_density(grid, np.exp(-0.5 * z * z))


def uniform_distribution(
    grid: FieldGrid, b_lo: float | None = None, b_hi: float | None = None
) -> FieldDistribution:
    """Uniform density over [b_lo, b_hi] (the whole grid by default)."""
    lo = grid.b_min if b_lo is None else b_lo
    hi = grid.b_max if b_hi is None else b_hi
    if not grid.b_min <= lo < hi <= grid.b_max:
        raise ValueError(f"window [{lo}, {hi}] not inside grid")
    inside = (grid.points >= lo) & (grid.points <= hi)
    return distribution_from_density(grid, inside.astype(float))


def spike_distribution(grid: FieldGrid, b0: float) -> FieldDistribution:
    """All probability mass on the grid point nearest b0."""
    idx = int(np.argmin(np.abs(grid.points - b0)))
    dens = np.zeros(grid.n_points)
    dens[idx] = 1.0 / grid.trapz_weights[idx]
    return FieldDistribution(grid, dens)


@dataclass(frozen=True)
class RamseyParams:
    """Controls and constants of one Ramsey measurement.

    tau: exposure time (>= 0).
    theta: readout phase, wrapped into [0, 2*pi) at construction.
    coherence_time: dephasing time T; ``math.inf`` is the exact
        no-decoherence case (contrast factor exactly 1).
    mu: coupling constant, 1 in natural units.
    """

    tau: float
    theta: float
    coherence_time: float = math.inf
    mu: float = 1.0

    def __post_init__(self) -> None:
        if not self.tau >= 0.0:
            raise ValueError(f"require tau >= 0, got {self.tau}")
        if not self.coherence_time > 0.0:
            raise ValueError(f"require coherence_time > 0, got {self.coherence_time}")
        if not self.mu > 0.0:
            raise ValueError(f"require mu > 0, got {self.mu}")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def contrast(self) -> float:
        """Decay factor exp(-tau/T); exactly 1.0 for infinite T."""
        return math.exp(-self.tau / self.coherence_time)


def likelihood(x: int, b, p: RamseyParams):
    """Probability of outcome ``x`` given field value(s) ``b``.

    Outcome 0 has probability 1/2 + exp(-tau/T) cos(2 mu b tau + theta)/2;
    outcome 1 is computed as its exact complement, so the two outcomes sum
    to 1.0 exactly for every ``b``.
    """
    if x not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {x!r}")
    b_arr = np.asarray(b, dtype=float)
    l0 = 0.5 + 0.5 * p.contrast * np.cos(2.0 * p.mu * p.tau * b_arr + p.theta)
    out = l0 if x == 0 else 1.0 - l0
    return float(out) if out.ndim == 0 else out


def predictive_prob(d: FieldDistribution, p: RamseyParams, x: int) -> float:
    """Prior probability of outcome ``x``: the likelihood averaged over d."""
    return d.grid.integrate(likelihood(x, d.grid.points, p) * d.density)


def bayes_update(d: FieldDistribution, p: RamseyParams, x: int) -> FieldDistribution:
    """Posterior after observing outcome ``x`` with controls ``p``.

    Raises:
        ZeroEvidence: the outcome has probability <= 1e-300 under ``d``.
    """
    unnormalized = likelihood(x, d.grid.points, p) * d.density
    evidence = d.grid.integrate(unnormalized)
    if evidence <= ZERO_EVIDENCE_FLOOR:
        raise ZeroEvidence(
            f"outcome {x} has predictive probability {evidence!r} under the prior"
        )
    return FieldDistribution(d.grid, unnormalized / evidence)


def entropy(d: FieldDistribution) -> float:
    """Differential entropy -∫ p ln p db in nats, with 0 ln 0 = 0."""
    return -d.grid.integrate(xlogy(d.density, d.density))


def mean(d: FieldDistribution) -> float:
    return d.grid.integrate(d.grid.points * d.density)


def variance(d: FieldDistribution) -> float:
    """Second central moment, clamped at zero against float cancellation."""
    q = d.grid.trapz_weights * d.density
    m1 = float(q @ d.grid.points)
    m2 = float(q @ (d.grid.points * d.grid.points))
    return max(m2 - m1 * m1, 0.0)


def binary_entropy(q):
    """Entropy in nats of a Bernoulli(q) outcome, vectorized, 0 ln 0 = 0."""
    return -(xlogy(q, q) + xlogy(1.0 - q, 1.0 - q))


def mutual_information(d: FieldDistribution, p: RamseyParams) -> float:
    """Information in nats one measurement carries about the field.

    Computed as H(X) - H(X|B): the entropy of the two predictive outcome
    probabilities minus the prior-weighted average of the pointwise
    outcome entropy.  Both terms use the grid's trapezoidal rule, so the
    result stays in [0, ln 2] up to float roundoff.
    """
    l0 = likelihood(0, d.grid.points, p)
    q = d.grid.trapz_weights * d.density
    p0 = float(q @ l0)
    p1 = float(q @ (1.0 - l0))
    h_x = -(xlogy(p0, p0) + xlogy(p1, p1))
    h_x_given_b = float(q @ binary_entropy(l0))
    return h_x - h_x_given_b


_FUNCTIONALS = {"entropy": entropy, "variance": variance}


def expected_posterior_functional(d: FieldDistribution, p: RamseyParams, g: str) -> float:
    """Outcome-averaged value of a posterior functional.

    ``g`` selects the functional ("entropy" or "variance").  An outcome
    whose predictive probability is zero contributes nothing; if both
    outcomes are impossible (cannot happen for a normalized prior) the
    ZeroEvidence from the update propagates.
    """
    try:
        functional = _FUNCTIONALS[g]
    except KeyError:
        raise ValueError(f"unknown functional tag {g!r}; expected one of {sorted(_FUNCTIONALS)}")
    total = 0.0
    possible = False
    for x in (0, 1):
        px = predictive_prob(d, p, x)
        if px <= ZERO_EVIDENCE_FLOOR:
            continue
        possible = True
        total += px * functional(bayes_update(d, p, x))
    if not possible:
        raise ZeroEvidence("no outcome has positive probability under the prior")
    return total
