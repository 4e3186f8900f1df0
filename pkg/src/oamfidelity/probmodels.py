"""Outcome probabilities for Z and parity detection at one interferometer port.

The interferometer maps an OAM coherent state of mean photon number ``N`` and
topological charge ``l`` onto a coherent state at port B whose mean photon
number is ``N sin^2(l theta)``.  Every detection probability below is a
function of that port-B mean, optionally degraded by path loss, detector
inefficiency and Poissonian dark counts.

All functions accept scalar or array ``theta`` and return a float for scalar
input, an ``ndarray`` otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import AccuracyError, ContractError, DomainError

__all__ = [
    "Strategy",
    "Outcome",
    "InterferometerConfig",
    "NoiseModel",
    "IDEAL",
    "outcome_probability",
    "binary_probabilities",
    "port_mean_photons",
    "lossy_zero_probability",
    "efficiency_zero_probability",
    "dark_count_pmf",
    "dark_zero_probability",
    "combined_zero_probability",
    "default_truncation",
    "fock_oracle_probability",
]


class Strategy(enum.Enum):
    Z = "z"
    PARITY = "parity"

    @property
    def outcomes(self) -> tuple["Outcome", "Outcome"]:
        """The (first, second) outcome pair; the first is Zero resp. Even."""
        if self is Strategy.Z:
            return (Outcome.ZERO, Outcome.NONZERO)
        return (Outcome.EVEN, Outcome.ODD)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        try:
            return cls(text.lower())
        except ValueError:
            raise ContractError(f"unknown strategy {text!r}; expected 'z' or 'parity'") from None


class Outcome(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    EVEN = "even"
    ODD = "odd"

    @classmethod
    def parse(cls, text: str) -> "Outcome":
        try:
            return cls(text.lower())
        except ValueError:
            raise ContractError(f"unknown outcome {text!r}") from None


@dataclass(frozen=True)
class InterferometerConfig:
    """Mean photon number ``N = |alpha_l|^2`` and OAM quantum number ``l``."""

    mean_photons: float
    quantum_number: int = 1

    def __post_init__(self):
        if not math.isfinite(self.mean_photons) or self.mean_photons < 0:
            raise DomainError(f"mean_photons must be finite and >= 0, got {self.mean_photons}")
        if int(self.quantum_number) != self.quantum_number or self.quantum_number < 1:
            raise DomainError(f"quantum_number must be a positive integer, got {self.quantum_number}")
        object.__setattr__(self, "quantum_number", int(self.quantum_number))
        object.__setattr__(self, "mean_photons", float(self.mean_photons))


@dataclass(frozen=True)
class NoiseModel:
    """Path transmissivities, detector efficiency and dark-count rate per gate."""

    t_a: float = 1.0
    t_b: float = 1.0
    efficiency: float = 1.0
    dark_rate: float = 0.0

    def __post_init__(self):
        for name in ("t_a", "t_b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 < self.efficiency <= 1.0:
            raise DomainError(f"efficiency must lie in (0, 1], got {self.efficiency}")
        if not self.dark_rate >= 0.0 or not math.isfinite(self.dark_rate):
            raise DomainError(f"dark_rate must be finite and >= 0, got {self.dark_rate}")
        for name in ("t_a", "t_b", "efficiency", "dark_rate"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def is_identity(self) -> bool:
        return self.t_a == 1.0 and self.t_b == 1.0 and self.efficiency == 1.0 and self.dark_rate == 0.0


IDEAL = NoiseModel()


def _wrap(theta, result):
    if np.ndim(theta) == 0:
        return float(result)
    return result


def _sin2(theta, config):
    return np.sin(config.quantum_number * np.asarray(theta, dtype=float)) ** 2


def _check_transmissivity(name, value):
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def port_mean_photons(theta, config: InterferometerConfig, noise: NoiseModel = IDEAL):
    """Mean photon number arriving at the port-B detector.

    Equal path transmissivities give ``t * efficiency * N sin^2(l theta)``.
    Unequal ones use ``|sqrt(t_a) e^{-il theta} - sqrt(t_b) e^{il theta}|^2 / 4``
    written as ``(sqrt(t_a) - sqrt(t_b))^2 / 4 + sqrt(t_a t_b) sin^2(l theta)``,
    which avoids the cancellation of the ``1 - cos`` form near ``theta = 0``.
    """
    s2 = _sin2(theta, config)
    if noise.t_a == noise.t_b:
        modulus = noise.t_a * s2
    else:
        ra, rb = math.sqrt(noise.t_a), math.sqrt(noise.t_b)
        modulus = 0.25 * (ra - rb) ** 2 + ra * rb * s2
    return noise.efficiency * config.mean_photons * modulus


def binary_probabilities(strategy: Strategy, theta, config: InterferometerConfig,
                         noise: NoiseModel = IDEAL):
    """Both outcome probabilities, each computed without cancellation.

    Returns:
        ``(p_first, p_second)`` for (Zero, Nonzero) or (Even, Odd).

    Raises:
        ContractError: parity detection with a nonzero dark-count rate; the
            dark-count model only covers Z detection.
    """
    mu = np.asarray(port_mean_photons(theta, config, noise))
    if strategy is Strategy.Z:
        x = mu + noise.dark_rate
        return _wrap(theta, np.exp(-x)), _wrap(theta, -np.expm1(-x))
    if noise.dark_rate != 0.0:
        raise ContractError("dark counts are modelled for Z detection only")
    return _wrap(theta, 0.5 * (1.0 + np.exp(-2.0 * mu))), _wrap(theta, -0.5 * np.expm1(-2.0 * mu))


def outcome_probability(strategy: Strategy, outcome: Outcome, theta,
                        config: InterferometerConfig):
    """Ideal probability of ``outcome`` under ``strategy`` at angle ``theta``.

    >>> cfg = InterferometerConfig(1.0, 2)
    >>> round(outcome_probability(Strategy.Z, Outcome.ZERO, math.pi / 4, cfg), 6)
    0.367879
    """
    first, second = strategy.outcomes
    if outcome not in (first, second):
        raise ContractError(f"outcome {outcome.value!r} is not produced by {strategy.value!r} detection")
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    pair = binary_probabilities(strategy, theta, config)
    return pair[0] if outcome is first else pair[1]


def lossy_zero_probability(theta, config: InterferometerConfig, t_a: float, t_b: float):
    """Z-detection zero probability with path transmissivities ``t_a``, ``t_b``."""
    _check_transmissivity("t_a", t_a)
    _check_transmissivity("t_b", t_b)
    ra, rb = math.sqrt(t_a), math.sqrt(t_b)
    modulus = 0.25 * (ra - rb) ** 2 + ra * rb * _sin2(theta, config)
    return _wrap(theta, np.exp(-config.mean_photons * modulus))


def efficiency_zero_probability(theta, config: InterferometerConfig, efficiency: float):
    if not 0.0 < efficiency <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got {efficiency}")
    return _wrap(theta, np.exp(-efficiency * config.mean_photons * _sin2(theta, config)))


def dark_count_pmf(n: int, dark_rate: float) -> float:
    """Poisson probability of ``n`` dark counts in one gate."""
    if int(n) != n or n < 0:
        raise DomainError(f"dark count number must be a non-negative integer, got {n}")
    if dark_rate < 0:
        raise DomainError(f"dark_rate must be >= 0, got {dark_rate}")
    if dark_rate == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-dark_rate + n * math.log(dark_rate) - math.lgamma(n + 1))


def dark_zero_probability(theta, config: InterferometerConfig, dark_rate: float):
    if dark_rate < 0:
        raise DomainError(f"dark_rate must be >= 0, got {dark_rate}")
    x = config.mean_photons * _sin2(theta, config) + dark_rate
    return _wrap(theta, np.exp(-x))


def combined_zero_probability(theta, config: InterferometerConfig, noise: NoiseModel):
    """Zero probability with loss, inefficiency and dark counts together.

    Only defined for balanced paths; the effective photon number is
    ``t * efficiency * N``.
    """
    if noise.t_a != noise.t_b:
        raise ContractError(
            "combined model requires t_a == t_b; use lossy_zero_probability for unbalanced paths"
        )
    n_eff = noise.t_a * noise.efficiency * config.mean_photons
    return _wrap(theta, np.exp(-n_eff * _sin2(theta, config) - noise.dark_rate))


def default_truncation(mean_photons: float) -> int:
    return int(math.ceil(mean_photons + 10.0 * math.sqrt(mean_photons) + 20.0))


def fock_oracle_probability(strategy: Strategy, outcome: Outcome, theta: float,
                            config: InterferometerConfig, truncation: int | None = None,
                            tail_tolerance: float = 1e-12) -> float:
    """Brute-force outcome probability from the two-mode Fock expansion.

    Sums ``|<x, y|psi>|^2 = e^{-N} (N cos^2)^x (N sin^2)^y / (x! y!)`` over
    ``x, y <= truncation``, marginalises mode A, then applies the Z or parity
    projector on mode B.  Shares no code with the closed forms.

    Raises:
        AccuracyError: the discarded Poisson tail exceeds ``tail_tolerance``.
    """
    first, second = strategy.outcomes
    if outcome not in (first, second):
        raise ContractError(f"outcome {outcome.value!r} is not produced by {strategy.value!r} detection")
    n = config.mean_photons
    if truncation is None:
        truncation = default_truncation(n)
    # each mode is Poisson with mean <= N, so the joint tail is at most twice a Poisson(N) tail
    tail = 2.0 * float(poisson.sf(truncation, n)) if n > 0 else 0.0
    if tail > tail_tolerance:
        raise AccuracyError(
            f"truncation {truncation} leaves tail mass up to {tail:.3e} > {tail_tolerance:.1e}",
            estimates=(tail,),
        )

    phase = config.quantum_number * float(theta)
    c2, s2 = math.cos(phase) ** 2, math.sin(phase) ** 2
    k = np.arange(truncation + 1, dtype=float)
    log_fact = gammaln(k + 1.0)
    with np.errstate(divide="ignore"):
        log_a = k * np.log(n * c2) - log_fact if n * c2 > 0 else np.where(k == 0, 0.0, -np.inf)
        log_b = k * np.log(n * s2) - log_fact if n * s2 > 0 else np.where(k == 0, 0.0, -np.inf)
    joint = np.exp(-n + log_a[:, None] + log_b[None, :])
    marginal_b = joint.sum(axis=0)

    if strategy is Strategy.Z:
        p_first = marginal_b[0]
        p_second = marginal_b[1:].sum()
    else:
        p_first = marginal_b[0::2].sum()
        p_second = marginal_b[1::2].sum()
    return float(p_first if outcome is first else p_second)
