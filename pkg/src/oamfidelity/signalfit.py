"""Least-squares fitting of the Z-detection fringe ``A exp[-N_e sin^2(l (theta + theta0))]``.

The fit uses a damped Gauss-Newton (Levenberg-Marquardt) iteration with an
analytic Jacobian.  Figures of merit (visibility, FWHM, resolution factor
against the classical ``cos^2(l theta)`` fringe) follow in closed form from
the fitted parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, FitError, RankError

__all__ = [
    "DataPoint",
    "SignalModel",
    "FitReport",
    "poisson_error_bar",
    "datapoints_from_counts",
    "synthesize_counts",
    "fit_signal",
    "visibility",
    "fwhm",
    "resolution_factor",
]

MAX_ITERATIONS = 200
STEP_TOLERANCE = 1e-10


@dataclass(frozen=True)
class DataPoint:
    theta: float
    zero_fraction: float
    sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.zero_fraction <= 1.0:
            raise DomainError(f"zero_fraction must lie in [0, 1], got {self.zero_fraction}")
        if not self.sigma >= 0.0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SignalModel:
    """Fringe ``amplitude * exp[-effective_photons * sin^2(l (theta + offset))]``.

    ``amplitude = exp(-n_b)`` where ``n_b`` is the background noise term.
    """

    amplitude: float
    effective_photons: float
    offset: float = 0.0
    quantum_number: int = 1

    def __post_init__(self):
        if not 0.0 < self.amplitude <= 1.0:
            raise DomainError(f"amplitude must lie in (0, 1], got {self.amplitude}")
        if not self.effective_photons > 0.0:
            raise DomainError(f"effective_photons must be > 0, got {self.effective_photons}")
        if int(self.quantum_number) != self.quantum_number or self.quantum_number < 1:
            raise DomainError(f"quantum_number must be a positive integer, got {self.quantum_number}")

    @classmethod
    def from_background(cls, background: float, effective_photons: float, offset: float = 0.0,
                        quantum_number: int = 1) -> "SignalModel":
        if background < 0:
            raise DomainError(f"background must be >= 0, got {background}")
        return cls(math.exp(-background), effective_photons, offset, quantum_number)

    @property
    def background(self) -> float:
        return -math.log(self.amplitude)

    @property
    def period(self) -> float:
        return math.pi / self.quantum_number

    def canonical(self) -> "SignalModel":
        """Same model with the offset folded into ``[0, pi/l)``."""
        off = math.fmod(self.offset, self.period)
        if off < 0:
            off += self.period
        if off >= self.period:
            off = 0.0
        return SignalModel(self.amplitude, self.effective_photons, off, self.quantum_number)

    def zero_probability(self, theta):
        s2 = np.sin(self.quantum_number * (np.asarray(theta, dtype=float) + self.offset)) ** 2
        out = self.amplitude * np.exp(-self.effective_photons * s2)
        return float(out) if np.ndim(theta) == 0 else out

    def probabilities(self, theta):
        """``(p_zero, p_nonzero)``, the likelihood interface used by Bayesian estimation."""
        s2 = np.sin(self.quantum_number * (np.asarray(theta, dtype=float) + self.offset)) ** 2
        x = self.effective_photons * s2 + self.background
        return np.exp(-x), -np.expm1(-x)

    def to_dict(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "background": self.background,
            "effective_photons": self.effective_photons,
            "offset": self.offset,
            "quantum_number": self.quantum_number,
        }


def visibility(model: SignalModel) -> float:
    """Fringe contrast ``(max - min) / (max + min) = tanh(N_e / 2)``."""
    return math.tanh(0.5 * model.effective_photons)


def fwhm(model: SignalModel) -> float:
    """Full width of the central peak at half its maximum ``A / 2``.

    Raises:
        DomainError: ``N_e <= ln 2``; the fringe never drops to half maximum.
    """
    ratio = math.log(2.0) / model.effective_photons
    if ratio >= 1.0:
        raise DomainError(
            f"no half-maximum crossing for effective_photons={model.effective_photons} <= ln 2"
        )
    return 2.0 * math.asin(math.sqrt(ratio)) / model.quantum_number


def resolution_factor(model: SignalModel) -> float:
    """Classical fringe width ``pi / (2 l)`` divided by the measured FWHM."""
    return (math.pi / (2 * model.quantum_number)) / fwhm(model)


def poisson_error_bar(zero_count: int, trials: int) -> float:
    """Binomial standard error of the observed zero fraction."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not 0 <= zero_count <= trials:
        raise DomainError(f"zero_count must lie in [0, {trials}], got {zero_count}")
    p = zero_count / trials
    return math.sqrt(p * (1.0 - p) / trials)


def datapoints_from_counts(thetas, zero_counts, trials) -> list[DataPoint]:
    """Turn recorded counts into fractions with binomial error bars."""
    trials = np.broadcast_to(trials, np.shape(thetas))
    return [
        DataPoint(float(t), int(k) / int(m), poisson_error_bar(int(k), int(m)))
        for t, k, m in zip(thetas, zero_counts, trials)
    ]


def synthesize_counts(model: SignalModel, thetas, trials: int = 2000, replications: int = 20,
                      seed: int = 0) -> np.ndarray:
    """Binomial zero counts summed over ``replications`` runs of ``trials`` gates.

    Returns an integer array aligned with ``thetas``; the total number of gates
    per angle is ``trials * replications``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    p = np.asarray(model.zero_probability(np.asarray(thetas, dtype=float)))
    draws = rng.binomial(trials, p[:, None], size=(p.size, replications))
    return draws.sum(axis=1)


@dataclass(frozen=True, eq=False)
class FitReport:
    model: SignalModel
    visibility: float
    fwhm: float
    resolution_factor: float
    residual_norm: float
    covariance: np.ndarray
    parametrization: str = "amplitude"
    iterations: int = 0
    parameter_names: tuple = field(default=("amplitude", "effective_photons", "offset"))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "visibility": self.visibility,
            "fwhm": self.fwhm,
            "resolution_factor": self.resolution_factor,
            "residual_norm": self.residual_norm,
            "parametrization": self.parametrization,
            "parameter_names": list(self.parameter_names),
            "covariance": self.covariance.tolist(),
            "iterations": self.iterations,
        }


def _model_and_jacobian(params, theta, ell, background):
    first, n_e, off = params
    phase = ell * (theta + off)
    s2 = np.sin(phase) ** 2
    if background:
        amp = math.exp(-first)
        value = np.exp(-first - n_e * s2)
        d_first = -value
    else:
        amp = first
        value = amp * np.exp(-n_e * s2)
        d_first = value / amp
    d_ne = -s2 * value
    d_off = -n_e * ell * np.sin(2.0 * phase) * value
    return value, np.column_stack((d_first, d_ne, d_off))


def _feasible(params, background):
    first, n_e, _ = params
    if not n_e > 0:
        return False
    return first >= 0 if background else 0 < first <= 1


def _initial_guess(theta, y, ell):
    amp = float(np.max(y))
    if amp <= 0:
        raise RankError("all zero fractions are zero; the fringe is undetermined")
    n_e = -math.log(max(float(np.min(y)), 1e-6) / amp)
    # peak of the fringe sits where theta + offset is a multiple of pi/l
    off = math.fmod(-float(theta[int(np.argmax(y))]), math.pi / ell)
    if off < 0:
        off += math.pi / ell
    return SignalModel(min(amp, 1.0), max(n_e, 1e-3), off, ell)


def fit_signal(data, quantum_number: int, initial: SignalModel | None = None, *,
               parametrization: str = "amplitude", max_iterations: int = MAX_ITERATIONS,
               step_tolerance: float = STEP_TOLERANCE) -> FitReport:
    """Weighted least-squares fit of the fringe to ``data`` with ``l`` held fixed.

    Args:
        data: Sequence of :class:`DataPoint`.
        quantum_number: Fixed OAM quantum number ``l``.
        initial: Starting model; derived from the data when omitted.
        parametrization: ``"amplitude"`` fits ``A``; ``"background"`` fits
            ``n_b = -ln A``.  Both give the same optimum.

    Raises:
        ContractError: fewer than 4 points, or the points span less than half
            a fringe period.
        RankError: the Jacobian is numerically singular.
        FitError: no convergence within ``max_iterations``.
    """
    if parametrization not in ("amplitude", "background"):
        raise ContractError(f"unknown parametrization {parametrization!r}")
    background = parametrization == "background"
    ell = int(quantum_number)
    data = list(data)
    if len(data) < 4:
        raise ContractError(f"need at least 4 data points, got {len(data)}")
    theta = np.array([d.theta for d in data], dtype=float)
    y = np.array([d.zero_fraction for d in data], dtype=float)
    sigma = np.array([d.sigma for d in data], dtype=float)
    if np.ptp(theta) < math.pi / (2 * ell):
        raise ContractError("data must span at least half a fringe period")
    positive = sigma[sigma > 0]
    if positive.size == 0:
        sigma = np.ones_like(sigma)
    else:
        sigma = np.where(sigma > 0, sigma, positive.min())

    start = initial if initial is not None else _initial_guess(theta, y, ell)
    first = start.background if background else start.amplitude
    params = np.array([first, start.effective_photons, start.offset], dtype=float)

    def evaluate(p):
        value, jac = _model_and_jacobian(p, theta, ell, background)
        return (value - y) / sigma, jac / sigma[:, None]

    resid, jac = evaluate(params)
    chi2 = float(resid @ resid)
    damping = 1e-3
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        jtj = jac.T @ jac
        grad = jac.T @ resid
        scale = np.diag(jtj).copy()
        if np.any(scale <= 0) or not np.all(np.isfinite(jtj)):
            raise RankError("Jacobian has a vanishing column; data cannot determine every parameter")
        try:
            step = np.linalg.solve(jtj + damping * np.diag(scale), -grad)
        except np.linalg.LinAlgError:
            raise RankError("normal equations are singular") from None
        if np.linalg.norm(step) <= step_tolerance * (np.linalg.norm(params) + step_tolerance):
            converged = True
            break
        trial = params + step
        if _feasible(trial, background):
            t_resid, t_jac = evaluate(trial)
            t_chi2 = float(t_resid @ t_resid)
        else:
            t_chi2 = math.inf
        if t_chi2 <= chi2:
            params, resid, jac, chi2 = trial, t_resid, t_jac, t_chi2
            damping = max(damping / 10.0, 1e-12)
        else:
            damping *= 10.0
            if damping > 1e16:
                # no descent direction left at working precision
                converged = True
                break
    if not converged:
        raise FitError(f"no convergence after {max_iterations} iterations", best=params.copy())

    singular = np.linalg.svd(jac, compute_uv=False)
    if singular[-1] <= 1e-12 * singular[0]:
        raise RankError(f"Jacobian is rank deficient (condition {singular[0] / singular[-1]:.3e})")
    covariance = np.linalg.inv(jac.T @ jac)

    first, n_e, off = params
    amp = math.exp(-first) if background else first
    model = SignalModel(float(amp), float(n_e), float(off), ell).canonical()
    names = ("background" if background else "amplitude", "effective_photons", "offset")
    try:
        width = fwhm(model)
    except DomainError:
        width = math.nan
    return FitReport(
        model=model,
        visibility=visibility(model),
        fwhm=width,
        resolution_factor=(math.pi / (2 * ell)) / width,
        residual_norm=math.sqrt(chi2),
        covariance=covariance,
        parametrization=parametrization,
        iterations=iteration,
        parameter_names=names,
    )
