"""Seeded Z-detection trials and grid posteriors over the angular displacement.

Data enter only as the sufficient statistic ``(trials, zero_count)``.  The
likelihood is evaluated in log space, so thousands of trials do not underflow.

By default posteriors live on the fundamental branch ``[0, pi/(2l)]`` where
``sin^2(l theta)`` is monotone; pass ``full_domain=True`` to work on
``[-pi, pi]`` and see all ``2l`` symmetric copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateError, DomainError
from .probmodels import (
    IDEAL,
    InterferometerConfig,
    NoiseModel,
    Strategy,
    binary_probabilities,
    combined_zero_probability,
)
from .quadrature import UNIFORM, PriorDensity, QuadratureGrid
from .signalfit import SignalModel

__all__ = [
    "RNG_ALGORITHM",
    "TrialSample",
    "IdealLikelihood",
    "CombinedLikelihood",
    "ExperimentalLikelihood",
    "Posterior",
    "EstimateSummary",
    "make_rng",
    "branch_grid",
    "simulate_trials",
    "posterior_from_counts",
    "asymptotic_posterior",
    "summarize",
]

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(replication,)); zero iff uniform < p_zero"


@dataclass(frozen=True)
class TrialSample:
    true_theta: float | None
    trials: int
    zero_count: int
    seed: int | None = None

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 0:
            raise DomainError(f"trials must be a non-negative integer, got {self.trials}")
        if int(self.zero_count) != self.zero_count or not 0 <= self.zero_count <= self.trials:
            raise DomainError(f"zero_count must be an integer in [0, {self.trials}], got {self.zero_count}")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "zero_count", int(self.zero_count))

    @property
    def nonzero_count(self) -> int:
        return self.trials - self.zero_count

    def to_dict(self) -> dict:
        return {
            "true_theta": self.true_theta,
            "trials": self.trials,
            "zero_count": self.zero_count,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class IdealLikelihood:
    config: InterferometerConfig

    @property
    def quantum_number(self) -> int:
        return self.config.quantum_number

    def probabilities(self, theta):
        return binary_probabilities(Strategy.Z, np.asarray(theta, dtype=float), self.config)


@dataclass(frozen=True)
class CombinedLikelihood:
    """Balanced loss, detector efficiency and dark counts together."""

    config: InterferometerConfig
    noise: NoiseModel = IDEAL

    def __post_init__(self):
        # fail early on unbalanced paths
        combined_zero_probability(0.0, self.config, self.noise)

    @property
    def quantum_number(self) -> int:
        return self.config.quantum_number

    def probabilities(self, theta):
        return binary_probabilities(Strategy.Z, np.asarray(theta, dtype=float), self.config, self.noise)


# fitted fringe (amplitude, effective photons, offset, l) used directly as a likelihood
ExperimentalLikelihood = SignalModel


def make_rng(seed: int, replication: int | None = None) -> np.random.Generator:
    if replication is None:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def simulate_trials(true_theta: float, trials: int, model, seed: int,
                    replication: int | None = None) -> TrialSample:
    """Draw ``trials`` independent Bernoulli zero/nonzero outcomes at ``true_theta``.

    ``replication`` derives an independent stream from ``seed`` so that
    replications can run in any order or concurrently.
    """
    if int(trials) != trials or trials < 0:
        raise DomainError(f"trials must be a non-negative integer, got {trials}")
    p_zero = float(np.asarray(model.probabilities(true_theta)[0]))
    rng = make_rng(seed, replication)
    zeros = int(np.count_nonzero(rng.random(int(trials)) < p_zero))
    return TrialSample(float(true_theta), int(trials), zeros, seed)


def branch_grid(quantum_number: int, size: int | None = None) -> QuadratureGrid:
    """Simpson grid on the fundamental branch ``[0, pi/(2l)]``."""
    return QuadratureGrid.simpson(size, 0.0, math.pi / (2 * quantum_number))


@dataclass(frozen=True, eq=False)
class Posterior:
    """Normalised density on ``grid``; ``log_normalizer`` is ``log`` of the evidence
    ``integral(likelihood * prior)``."""

    grid: QuadratureGrid
    density: np.ndarray
    log_normalizer: float

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def mean(self) -> float:
        return self.grid.integrate(self.grid.nodes * self.density)

    def total_variation(self, other: "Posterior") -> float:
        if other.grid.size != self.grid.size or not np.allclose(other.grid.nodes, self.grid.nodes):
            raise DomainError("posteriors live on different grids")
        return 0.5 * self.grid.integrate(np.abs(self.density - other.density))


def _resolve_grid(grid, model, full_domain):
    if grid is not None:
        return grid
    if full_domain:
        return QuadratureGrid.simpson()
    return branch_grid(model.quantum_number)


def _posterior(log_like, prior, grid):
    with np.errstate(divide="ignore"):
        log_post = log_like + np.log(prior.on(grid))
    peak = float(np.max(log_post))
    if not np.isfinite(peak):
        raise DegenerateError("observed counts have zero probability at every grid angle")
    unnorm = np.exp(log_post - peak)
    mass = grid.integrate(unnorm)
    return Posterior(grid, unnorm / mass, peak + math.log(mass))


def posterior_from_counts(sample: TrialSample, model, prior: PriorDensity = UNIFORM,
                          grid: QuadratureGrid | None = None, *,
                          full_domain: bool = False) -> Posterior:
    """Posterior ``prop. to p(zero|theta)^k p(nonzero|theta)^(M-k) p(theta)``."""
    grid = _resolve_grid(grid, model, full_domain)
    p_zero, p_nonzero = model.probabilities(grid.nodes)
    log_like = kernels.bernoulli_log_likelihood(
        p_zero, p_nonzero, float(sample.zero_count), float(sample.nonzero_count)
    )
    return _posterior(log_like, prior, grid)


def asymptotic_posterior(true_theta: float, trials: int, model, prior: PriorDensity = UNIFORM,
                         grid: QuadratureGrid | None = None, *,
                         full_domain: bool = False) -> Posterior:
    """Large-``M`` posterior with the counts replaced by their expectations at ``true_theta``."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    grid = _resolve_grid(grid, model, full_domain)
    star_zero, star_nonzero = (float(np.asarray(p)) for p in model.probabilities(true_theta))
    p_zero, p_nonzero = model.probabilities(grid.nodes)
    log_like = kernels.bernoulli_log_likelihood(
        p_zero, p_nonzero, trials * star_zero, trials * star_nonzero
    )
    return _posterior(log_like, prior, grid)


@dataclass(frozen=True)
class EstimateSummary:
    map_theta: float
    posterior_mean: float
    hpd_interval: tuple[float, float]
    level: float
    hpd_mass: float
    peak_count: int
    multimodal: bool = False
    degenerate: bool = False

    @property
    def hpd_width(self) -> float:
        return self.hpd_interval[1] - self.hpd_interval[0]

    def to_dict(self) -> dict:
        return {
            "map_theta": self.map_theta,
            "posterior_mean": self.posterior_mean,
            "hpd_low": self.hpd_interval[0],
            "hpd_high": self.hpd_interval[1],
            "level": self.level,
            "hpd_mass": self.hpd_mass,
            "peak_count": self.peak_count,
            "multimodal": self.multimodal,
            "degenerate": self.degenerate,
        }


def _segment_mass_above(x, f, c):
    """Mass of the piecewise-linear interpolant of ``f`` restricted to ``f >= c``."""
    f0, f1 = f[:-1], f[1:]
    h = np.diff(x)
    both = (f0 >= c) & (f1 >= c)
    mass = np.sum(0.5 * (f0[both] + f1[both]) * h[both])
    cross = (f0 >= c) != (f1 >= c)
    if np.any(cross):
        hi = np.maximum(f0[cross], f1[cross])
        lo = np.minimum(f0[cross], f1[cross])
        frac = (hi - c) / (hi - lo)
        mass += np.sum(0.5 * (hi + c) * frac * h[cross])
    return float(mass)


def _interval_mass(x, f, a, b):
    """Integral of the piecewise-linear interpolant over ``[a, b]``."""
    inside = (x > a) & (x < b)
    xs = np.concatenate(([a], x[inside], [b]))
    fs = np.interp(xs, x, f)
    return float(np.sum(0.5 * (fs[:-1] + fs[1:]) * np.diff(xs)))


def _count_peaks(x, f, periodic):
    interior = (f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])
    count = int(np.count_nonzero(interior))
    if not periodic:
        count += int(f[0] > f[1]) + int(f[-1] > f[-2])
    return count


def summarize(posterior: Posterior, level: float = 0.95) -> EstimateSummary:
    """MAP, mean, MAP-containing highest-density interval and peak count.

    The interval is computed on the piecewise-linear interpolant of the
    density: the density threshold is bisected until the region above it
    holds ``level`` of the mass, then the connected piece around the MAP is
    reported.  ``multimodal`` is set when that piece holds less than
    ``level``; ``degenerate`` when the density is flat.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    x = posterior.grid.nodes
    f = np.asarray(posterior.density, dtype=float)
    imap = int(np.argmax(f))  # first maximum, i.e. smallest theta on ties
    map_theta = float(x[imap])
    mean = posterior.mean()
    periodic = math.isclose(posterior.grid.length, 2 * math.pi, rel_tol=1e-12)
    peaks = _count_peaks(x, f, periodic)
    fmax = float(f[imap])

    if float(np.max(f) - np.min(f)) <= 1e-12 * fmax:
        return EstimateSummary(map_theta, mean, (float(x[0]), float(x[-1])), level, 1.0,
                               peaks, multimodal=False, degenerate=True)

    total = _segment_mass_above(x, f, 0.0)
    target = level * total
    lo_c, hi_c = 0.0, fmax
    for _ in range(200):
        c = 0.5 * (lo_c + hi_c)
        m = _segment_mass_above(x, f, c)
        if abs(m - target) <= 1e-13 * total:
            break
        if m > target:
            lo_c = c
        else:
            hi_c = c

    def edge(step):
        i = imap
        while 0 <= i + step < f.size and f[i + step] >= c:
            i += step
        if not 0 <= i + step < f.size:
            return float(x[i])
        j = i + step
        frac = (f[i] - c) / (f[i] - f[j])
        return float(x[i] + frac * (x[j] - x[i]))

    low, high = edge(-1), edge(+1)
    mass = _interval_mass(x, f, low, high) / total
    return EstimateSummary(map_theta, mean, (low, high), level, mass, peaks,
                           multimodal=mass < level - 1e-6)
