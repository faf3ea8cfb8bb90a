"""Sparse Fourier-domain analysis of periodic posteriors.

A posterior built from products of raised-cosine likelihoods has a
transform supported on finitely many frequencies.  Holding it as a list
of (frequency, amplitude) peaks makes the outcome bias and the
conditional entropy of a candidate measurement cheap to evaluate, and
gives a route to those numbers that is independent of the grid pipeline
in :mod:`ramsey_sched.bayes` -- the two paths cross-check each other.

Transform convention, fixed once and used in every phase formula here:

    F[p](xi) = integral p(b) exp(-i xi b) db

so a density term cos(w b + phi) contributes amplitude exp(+i phi)/2 at
xi = +w and the conjugate at xi = -w.  The closed expressions below
(bias, conditional entropy, the triangular schedule comb) assume full
contrast, i.e. infinite coherence time; finite-T cases route through the
grid instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bayes import FieldDistribution, RamseyParams, TWO_PI, binary_entropy

# Peaks closer than this in frequency are merged into one.
MERGE_TOL = 1e-9

# Peaks with amplitude magnitude below this are dropped.
PRUNE_TOL = 1e-12

_SERIES_STOP = 1e-15
_SERIES_CONVERGED = 1e-12


class TruncationNotConverged(RuntimeError):
    """The closed coefficient series hit its term cap before converging."""


class InsufficientSeries(ValueError):
    """A comb peak needs a series coefficient beyond the computed order."""


@dataclass(frozen=True)
class DeltaComb:
    """Weighted point masses in the frequency domain.

    Construction canonicalizes the peak list: sorted by frequency, peaks
    within ``MERGE_TOL`` merged by summing amplitudes, magnitudes below
    ``PRUNE_TOL`` dropped.  Transforms of real densities are Hermitian
    (amplitude at -xi conjugate to +xi) and normalized ones carry
    amplitude 1 at xi = 0; ``is_hermitian`` / ``zero_frequency_amplitude``
    expose those invariants for checking.
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        amps = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        if freqs.shape != amps.shape:
            raise ValueError("frequencies and amplitudes must have matching shapes")
        order = np.argsort(freqs)
        freqs, amps = freqs[order], amps[order]

        merged_f: list[float] = []
        merged_a: list[complex] = []
        for f, a in zip(freqs, amps):
            if merged_f and f - merged_f[-1] <= MERGE_TOL:
                merged_a[-1] += a
            else:
                merged_f.append(float(f))
                merged_a.append(complex(a))
        keep_f = []
        keep_a = []
        for f, a in zip(merged_f, merged_a):
            if abs(a) >= PRUNE_TOL:
                keep_f.append(f)
                keep_a.append(a)
        f_arr = np.asarray(keep_f, dtype=float)
        a_arr = np.asarray(keep_a, dtype=complex)
        f_arr.flags.writeable = False
        a_arr.flags.writeable = False
        object.__setattr__(self, "frequencies", f_arr)
        object.__setattr__(self, "amplitudes", a_arr)

    def __len__(self) -> int:
        return len(self.frequencies)

    def amplitude_at(self, xi: float) -> complex:
        """Amplitude of the peak within ``MERGE_TOL`` of xi, else 0."""
        if len(self.frequencies) == 0:
            return 0.0 + 0.0j
        i = int(np.searchsorted(self.frequencies, xi))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self.frequencies):
                delta = abs(self.frequencies[j] - xi)
                if best is None or delta < best[0]:
                    best = (delta, j)
        if best is not None and best[0] <= MERGE_TOL:
            return complex(self.amplitudes[best[1]])
        return 0.0 + 0.0j

    def zero_frequency_amplitude(self) -> complex:
        return self.amplitude_at(0.0)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(
            abs(self.amplitude_at(-f) - np.conj(a)) <= tol
            for f, a in zip(self.frequencies, self.amplitudes)
        )


def comb_from_distribution(d: FieldDistribution, frequencies) -> DeltaComb:
    """Evaluate the transform of ``d`` at the requested frequencies.

    Zero and the negated frequencies are always included, so the result
    satisfies the Hermitian and normalization invariants by construction
    (up to quadrature roundoff).
    """
    req = np.atleast_1d(np.asarray(frequencies, dtype=float))
    xi = np.unique(np.concatenate([req, -req, [0.0]]))
    q = d.grid.trapz_weights * d.density
    amps = np.exp(-1j * np.outer(xi, d.grid.points)) @ q
    return DeltaComb(xi, amps)


def measurement_comb(p: RamseyParams, x: int) -> DeltaComb:
    """Three-peak transform of the pointwise likelihood of outcome ``x``.

    Amplitude 1/2 at xi = 0 and a conjugate pair of magnitude
    exp(-tau/T)/4 at xi = +-2 mu tau carrying phase theta + pi x.  At
    tau = 0 the three peaks collapse into the single constant value of
    the likelihood.
    """
    if x not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {x!r}")
    side = 0.25 * p.contrast * np.exp(1j * (p.theta + math.pi * x))
    xi = 2.0 * p.mu * p.tau
    return DeltaComb(
        np.array([-xi, 0.0, xi]),
        np.array([np.conj(side), 0.5 + 0.0j, side]),
    )


def bias_from_comb(c: DeltaComb, p: RamseyParams) -> float:
    """|Pr(outcome) - 1/2| for a measurement against prior comb ``c``.

    Only the comb amplitudes at +-2 mu tau enter; with no peak there the
    measurement is off-resonance and exactly unbiased.  The value is the
    same for both outcomes.
    """
    xi = 2.0 * p.mu * p.tau
    a_plus = c.amplitude_at(xi)
    a_minus = c.amplitude_at(-xi)
    phase = np.exp(1j * p.theta)
    return 0.25 * p.contrast * abs(phase * a_minus + np.conj(phase) * a_plus)


@dataclass(frozen=True)
class AlphaSeries:
    """Cosine-series coefficients of the pointwise outcome-entropy profile.

    For a full-contrast measurement the outcome entropy as a function of
    phase is periodic with period pi; ``coefficients[j]`` is its j-th
    cosine coefficient.  The j = 0 term (the profile mean) is positive;
    all higher coefficients are negative and increase strictly toward
    zero, which is what makes the aligned halving schedule optimal.
    """

    coefficients: np.ndarray
    method: str
    _METHODS = ("closed_series", "quadrature")

    def __post_init__(self) -> None:
        coeffs = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if self.method not in self._METHODS:
            raise ValueError(f"method must be one of {self._METHODS}, got {self.method!r}")
        if coeffs.ndim != 1 or len(coeffs) < 1:
            raise ValueError("coefficients must be a non-empty 1-d array")
        if not coeffs[0] > 0.0:
            raise ValueError(f"coefficient 0 must be positive, got {coeffs[0]!r}")
        tail = coeffs[1:]
        if tail.size and not np.all(tail < 0.0):
            raise ValueError("coefficients for j >= 1 must be negative")
        if tail.size > 1 and not np.all(np.diff(tail) > 0.0):
            raise ValueError("coefficients for j >= 1 must be strictly increasing")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def j_max(self) -> int:
        return len(self.coefficients) - 1


def alpha_series_quadrature(j_max: int, n_panels: int = 2**14) -> AlphaSeries:
    """Coefficients by composite midpoint quadrature over one period.

    This is the independent oracle for :func:`alpha_series_closed`.  The
    integrand is periodic, so the composite rule converges like the decay
    of the profile's own coefficients; the default 2**14 panels give
    better than 1e-12.
    """
    if j_max < 0:
        raise ValueError(f"require j_max >= 0, got {j_max}")
    if n_panels < 2**12:
        raise ValueError(f"require at least 2**12 panels, got {n_panels}")
    x = (np.arange(n_panels) + 0.5) * (TWO_PI / n_panels)
    h = binary_entropy(0.5 * (1.0 + np.cos(x)))
    coeffs = np.empty(j_max + 1)
    coeffs[0] = float(np.mean(h))
    if j_max >= 1:
        j = np.arange(1, j_max + 1)
        coeffs[1:] = 2.0 * (np.cos(2.0 * np.outer(j, x)) @ h) / n_panels
    return AlphaSeries(coeffs, "quadrature")


def _closed_coefficient(j: int, term_cap: int) -> float:
    """Binomial-sum form of coefficient j >= 1.

    The summand is C(2m, m+j) 4^{-m} (m - 2(j+1)^2) / (2m(2m-1)(m+j+1))
    for m = j, j+1, ...  It changes sign once, at m = 2(j+1)^2, so the
    small-term stop rule only engages past that point; stopping at the
    zero crossing itself would silently drop the whole positive tail.
    """
    m = np.arange(j, term_cap + 1, dtype=float)
    ratios = (2.0 * m[:-1] + 1.0) * (m[:-1] + 1.0) / (2.0 * (m[:-1] + 1.0 + j) * (m[:-1] + 1.0 - j))
    weights = np.empty_like(m)
    weights[0] = 0.25**j
    if len(m) > 1:
        np.cumprod(ratios, out=weights[1:])
        weights[1:] *= weights[0]
    terms = weights * (m - 2.0 * (j + 1) ** 2) / (2.0 * m * (2.0 * m - 1.0) * (m + j + 1.0))
    sign_flip = 2.0 * (j + 1) ** 2
    stoppable = (np.abs(terms) < _SERIES_STOP) & (m > sign_flip)
    if stoppable.any():
        stop = int(np.argmax(stoppable))
    else:
        stop = len(terms) - 1
        if abs(terms[stop]) > _SERIES_CONVERGED:
            raise TruncationNotConverged(
                f"coefficient {j}: last term {terms[stop]:.3e} after {term_cap} terms"
            )
    return float(np.sum(terms[: stop + 1]))


def alpha_series_closed(j_max: int, term_cap: int = 600_000) -> AlphaSeries:
    """Coefficients from the closed binomial-sum series.

    The series is stated for j >= 1; the j = 0 coefficient is the profile
    mean and is always taken from the quadrature route.  Terms decay like
    m**-2.5, so the default cap keeps the truncation error below 1e-9.

    Raises:
        TruncationNotConverged: a coefficient's last summed term still
            exceeded 1e-12 at the cap.
    """
    if j_max < 0:
        raise ValueError(f"require j_max >= 0, got {j_max}")
    if term_cap < j_max + 10:
        raise ValueError(f"require term_cap >= j_max + 10, got {term_cap}")
    coeffs = np.empty(j_max + 1)
    coeffs[0] = alpha_series_quadrature(0).coefficients[0]
    for j in range(1, j_max + 1):
        coeffs[j] = _closed_coefficient(j, term_cap)
    return AlphaSeries(coeffs, "closed_series")


def conditional_entropy_from_comb(c: DeltaComb, p: RamseyParams, a: AlphaSeries) -> float:
    """H(X|B) in nats for a full-contrast measurement against comb ``c``.

    Equals the profile mean (coefficient 0) plus one term per comb peak
    sitting on the harmonic ladder 4 mu tau k; a diffuse comb gives the
    mean exactly.  Agrees with the grid evaluation when ``c`` was built
    from the same wide periodic distribution.

    Raises:
        InsufficientSeries: a comb peak needs k beyond ``a.j_max``.
    """
    if p.tau == 0.0:
        return float(binary_entropy(0.5 * (1.0 + p.contrast * math.cos(p.theta))))
    base = 4.0 * p.mu * p.tau
    total = float(a.coefficients[0])
    for xi, amp in zip(c.frequencies, c.amplitudes):
        if xi <= MERGE_TOL:
            continue
        k = int(round(xi / base))
        if k < 1 or abs(xi - k * base) > MERGE_TOL:
            continue
        if k > a.j_max:
            raise InsufficientSeries(
                f"comb peak at xi={xi} needs coefficient {k} but series stops at {a.j_max}"
            )
        total += float(a.coefficients[k]) * float((np.exp(-2j * k * p.theta) * amp).real)
    return total


def kpe_posterior_comb(n: int, tau1: float, mu: float = 1.0) -> DeltaComb:
    """Posterior comb after n halving-schedule measurements on a diffuse prior.

    Real triangular weights 1 - |j|/2**n at frequencies 2**(-n+2) mu tau1 j
    for j in [-(2**n - 1), 2**n - 1], expressed in the rezeroed field
    variable that absorbs the accumulated measurement phases.
    """
    if n < 1:
        raise ValueError(f"require n >= 1, got {n}")
    if n > 24:
        raise ValueError(f"comb with 2**{n + 1} peaks is not representable sensibly")
    if not tau1 > 0.0:
        raise ValueError(f"require tau1 > 0, got {tau1}")
    j = np.arange(-(2**n - 1), 2**n)
    xi = (2.0 ** (-n + 2)) * mu * tau1 * j
    weights = 1.0 - np.abs(j) / 2.0**n
    return DeltaComb(xi, weights.astype(complex))
