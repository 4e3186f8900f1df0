"""Binary-detection angular displacement estimation with an OAM-fed interferometer.

Submodules:

``probmodels``  outcome probabilities for Z and parity detection, ideal and noisy
``fidelity``    mutual-information fidelity and parameter sweeps
``bayes``       seeded trial simulation and grid posteriors
``signalfit``   fringe fitting, visibility, FWHM and resolution factor
``cli``         the ``oamfid`` command-line tool
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AccuracyError,
    ContractError,
    DegenerateError,
    DomainError,
    FitError,
    OamFidelityError,
    ParseError,
    RankError,
)
from .probmodels import IDEAL, InterferometerConfig, NoiseModel, Outcome, Strategy  # noqa: F401
