"""Shannon mutual information between the angle and a binary detection outcome.

Everything is evaluated on a :class:`~oamfidelity.quadrature.QuadratureGrid`
(composite Simpson, ``2**12 + 1`` nodes over ``[-pi, pi]`` by default).  The
quadrature error is estimated by repeating the computation on the grid made
of every other node.

Where an outcome probability touches 0 or 1 the integrand contains a
``theta^2 log theta`` term, so Simpson converges only as ``h^3`` instead of
spectrally.  The two Simpson values are therefore combined as
``(8 S_h - S_2h) / 7``, which removes that term; ``extrapolate=False`` returns
the plain fine-grid Simpson value instead.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import AccuracyError, ContractError, DegenerateError
from .probmodels import (
    IDEAL,
    InterferometerConfig,
    NoiseModel,
    Outcome,
    Strategy,
    binary_probabilities,
)
from .quadrature import UNIFORM, PriorDensity, QuadratureGrid

__all__ = [
    "ConditionalDensity",
    "FidelityResult",
    "SweepPoint",
    "SWEEP_AXES",
    "conditional_density",
    "marginal_outcome_probability",
    "mutual_information",
    "fidelity_sweep",
]

DEFAULT_TOLERANCE = 1e-4
# floor for the reported error so that "refinement changes H by less than the
# estimate" stays meaningful when both grids agree to the last bit
_ERROR_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class ConditionalDensity:
    outcome: Outcome
    grid: QuadratureGrid
    values: np.ndarray

    def local_maxima(self) -> np.ndarray:
        """Angles of strict local maxima, treating the grid as periodic.

        The duplicated endpoint of a full ``[-pi, pi]`` grid is dropped first.
        """
        v = self.values[:-1]
        nodes = self.grid.nodes[:-1]
        left, right = np.roll(v, 1), np.roll(v, -1)
        return nodes[(v > left) & (v > right)]


@dataclass(frozen=True)
class FidelityResult:
    bits: float
    strategy: Strategy
    config: InterferometerConfig
    noise: NoiseModel
    grid_size: int
    estimated_error: float

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "estimated_error": self.estimated_error,
            "strategy": self.strategy.value,
            "mean_photons": self.config.mean_photons,
            "quantum_number": self.config.quantum_number,
            "t_a": self.noise.t_a,
            "t_b": self.noise.t_b,
            "efficiency": self.noise.efficiency,
            "dark_rate": self.noise.dark_rate,
            "grid_size": self.grid_size,
        }


def _grid_or_default(grid):
    return QuadratureGrid.simpson() if grid is None else grid


def _outcome_index(strategy: Strategy, outcome: Outcome) -> int:
    try:
        return strategy.outcomes.index(outcome)
    except ValueError:
        raise ContractError(
            f"outcome {outcome.value!r} is not produced by {strategy.value!r} detection"
        ) from None


def marginal_outcome_probability(outcome: Outcome, strategy: Strategy,
                                 config: InterferometerConfig, noise: NoiseModel = IDEAL,
                                 prior: PriorDensity = UNIFORM,
                                 grid: QuadratureGrid | None = None) -> float:
    """Prior-averaged probability of ``outcome``."""
    grid = _grid_or_default(grid)
    idx = _outcome_index(strategy, outcome)
    p = binary_probabilities(strategy, grid.nodes, config, noise)[idx]
    return grid.integrate(p * prior.on(grid))


def conditional_density(outcome: Outcome, strategy: Strategy, config: InterferometerConfig,
                        noise: NoiseModel = IDEAL, prior: PriorDensity = UNIFORM,
                        grid: QuadratureGrid | None = None) -> ConditionalDensity:
    """Bayes posterior density of the angle after a single ``outcome``."""
    grid = _grid_or_default(grid)
    idx = _outcome_index(strategy, outcome)
    joint = binary_probabilities(strategy, grid.nodes, config, noise)[idx] * prior.on(grid)
    evidence = grid.integrate(joint)
    if not evidence > 1e-300:
        raise DegenerateError(f"outcome {outcome.value!r} has zero probability for every angle")
    return ConditionalDensity(outcome, grid, joint / evidence)


def _bits_on(strategy, config, noise, prior, grid):
    p_first, p_second = binary_probabilities(strategy, grid.nodes, config, noise)
    wq = grid.weights * prior.on(grid)
    bits, _, _ = kernels.binary_mutual_information(p_first, p_second, wq)
    return bits


def mutual_information(strategy: Strategy, config: InterferometerConfig,
                       noise: NoiseModel = IDEAL, prior: PriorDensity = UNIFORM,
                       grid: QuadratureGrid | None = None, *,
                       tolerance: float = DEFAULT_TOLERANCE,
                       fold_period: bool = False,
                       extrapolate: bool = True) -> FidelityResult:
    """Fidelity (mutual information in bits) of a detection strategy.

    Args:
        tolerance: Largest acceptable disagreement between the grid and its
            half-resolution coarsening.
        fold_period: Integrate over one period ``[0, pi/l]`` only.  Valid for
            the uniform prior, for which it gives the same value faster.
        extrapolate: Apply the ``h^3`` Richardson correction.  The reported
            ``estimated_error`` is ``|S_h - S_2h| / 7`` either way.

    Raises:
        AccuracyError: the refinement estimate exceeds ``tolerance``.
    """
    if fold_period:
        if prior.kind != "uniform":
            raise ContractError("fold_period requires the uniform prior")
        size = (grid.size if grid is not None else None)
        grid = QuadratureGrid.simpson(size, 0.0, math.pi / config.quantum_number)
    grid = _grid_or_default(grid)

    fine = _bits_on(strategy, config, noise, prior, grid)
    coarse = _bits_on(strategy, config, noise, prior, grid.coarsen())
    error = max(abs(fine - coarse) / 7.0, _ERROR_FLOOR)
    if error > tolerance:
        raise AccuracyError(
            f"quadrature not converged: {fine!r} on {grid.size} nodes vs {coarse!r} on the coarse grid",
            estimates=(fine, coarse),
        )
    bits = (8.0 * fine - coarse) / 7.0 if extrapolate else fine
    # roundoff can push an exactly-zero information slightly negative
    bits = min(max(bits, 0.0), 1.0)
    return FidelityResult(bits, strategy, config, noise, grid.size, error)


SWEEP_AXES = ("mean_photons", "loss", "efficiency", "dark")


@dataclass(frozen=True)
class SweepPoint:
    coords: dict
    result: FidelityResult


def _check_range(values):
    values = [float(v) for v in values]
    if not values:
        raise ContractError("sweep range is empty")
    diffs = np.diff(values)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ContractError("sweep range must be strictly monotone")
    return values


def fidelity_sweep(strategy: Strategy, axis: str, ranges: Sequence[Sequence[float]], *,
                   mean_photons: float = 1.0, quantum_number: int = 1,
                   noise: NoiseModel = IDEAL, grid: QuadratureGrid | None = None,
                   tolerance: float = DEFAULT_TOLERANCE, workers: int = 1) -> list[SweepPoint]:
    """Evaluate the fidelity over a rectangular parameter grid.

    ``axis`` selects the swept quantities and the meaning of ``ranges``:

    ``mean_photons``  ``[N values]``
    ``loss``          ``[L_A values, L_B values]`` with ``t = 1 - L``
    ``efficiency``    ``[efficiency values]``
    ``dark``          ``[dark_rate values, N values]``

    Points come back in lexicographic order of the axes whatever ``workers`` is.
    """
    names = {
        "mean_photons": ("mean_photons",),
        "loss": ("loss_a", "loss_b"),
        "efficiency": ("efficiency",),
        "dark": ("dark_rate", "mean_photons"),
    }
    if axis not in names:
        raise ContractError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if len(ranges) != len(names[axis]):
        raise ContractError(f"axis {axis!r} needs {len(names[axis])} range(s), got {len(ranges)}")
    ranges = [_check_range(r) for r in ranges]
    grid = _grid_or_default(grid)

    def job(coords):
        c = dict(zip(names[axis], coords))
        n = c.get("mean_photons", mean_photons)
        point_noise = noise
        if axis == "loss":
            point_noise = replace(noise, t_a=1.0 - c["loss_a"], t_b=1.0 - c["loss_b"])
        elif axis == "efficiency":
            point_noise = replace(noise, efficiency=c["efficiency"])
        elif axis == "dark":
            point_noise = replace(noise, dark_rate=c["dark_rate"])
        cfg = InterferometerConfig(n, quantum_number)
        return SweepPoint(c, mutual_information(strategy, cfg, point_noise, UNIFORM, grid,
                                                tolerance=tolerance))

    points = list(itertools.product(*ranges))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, points))
    return [job(p) for p in points]
