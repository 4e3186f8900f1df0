"""Composite Simpson grids and prior densities over an angular interval."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

__all__ = ["QuadratureGrid", "PriorDensity", "UNIFORM", "DEFAULT_EXPONENT"]

DEFAULT_EXPONENT = 12


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and weights of a composite quadrature rule on ``[lo, hi]``."""

    nodes: np.ndarray
    weights: np.ndarray
    rule: str = "simpson"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 3:
            raise ContractError("grid needs matching 1-D nodes and weights with at least 3 entries")
        if np.any(np.diff(nodes) <= 0):
            raise ContractError("grid nodes must be strictly increasing")
        if np.any(weights < 0):
            raise ContractError("grid weights must be non-negative")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def simpson(cls, size: int | None = None, lo: float = -math.pi, hi: float = math.pi,
                exponent: int = DEFAULT_EXPONENT) -> "QuadratureGrid":
        """Uniform composite Simpson grid with ``size`` (odd) nodes.

        ``size`` defaults to ``2**exponent + 1``.  Grids symmetric about zero
        get exactly mirrored nodes so that even integrands stay even.
        """
        if size is None:
            size = 2 ** exponent + 1
        if size < 3 or size % 2 == 0:
            raise DomainError(f"Simpson grid size must be odd and >= 3, got {size}")
        if not hi > lo:
            raise DomainError(f"empty interval [{lo}, {hi}]")
        h = (hi - lo) / (size - 1)
        nodes = lo + h * np.arange(size)
        nodes[-1] = hi
        if lo == -hi:
            half = size // 2
            nodes[half] = 0.0
            nodes[half + 1:] = -nodes[:half][::-1]
        return cls(nodes, _simpson_weights(size, h), "simpson")

    @property
    def lo(self) -> float:
        return float(self.nodes[0])

    @property
    def hi(self) -> float:
        return float(self.nodes[-1])

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing(self) -> float:
        return self.length / (self.size - 1)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def coarsen(self) -> "QuadratureGrid":
        """Same rule on every other node; used for the refinement error estimate."""
        if self.rule != "simpson" or (self.size - 1) % 4 != 0:
            raise ContractError(f"cannot coarsen a {self.rule} grid of size {self.size}")
        return QuadratureGrid.simpson((self.size + 1) // 2, self.lo, self.hi)

    def refine(self) -> "QuadratureGrid":
        return QuadratureGrid.simpson(2 * self.size - 1, self.lo, self.hi)


@dataclass(frozen=True, eq=False)
class PriorDensity:
    """Prior over the angle: uniform, or tabulated and linearly interpolated.

    A uniform prior is normalised over whichever grid it is evaluated on, so
    it reads ``1 / (2 pi)`` on ``[-pi, pi]``.
    """

    kind: str = "uniform"
    nodes: np.ndarray | None = field(default=None)
    values: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.kind == "uniform":
            return
        if self.kind != "tabulated" or self.nodes is None or self.values is None:
            raise ContractError("prior must be 'uniform' or 'tabulated' with nodes and values")
        if np.any(np.asarray(self.values) < 0):
            raise DomainError("prior density must be non-negative")

    @classmethod
    def tabulated(cls, grid: QuadratureGrid, values) -> "PriorDensity":
        values = np.asarray(values, dtype=float)
        total = grid.integrate(values)
        if not total > 0:
            raise DomainError("tabulated prior has zero mass")
        return cls("tabulated", grid.nodes, values / total)

    def on(self, grid: QuadratureGrid) -> np.ndarray:
        if self.kind == "uniform":
            return np.full(grid.size, 1.0 / grid.length)
        return np.interp(grid.nodes, self.nodes, self.values, left=0.0, right=0.0)


UNIFORM = PriorDensity()
