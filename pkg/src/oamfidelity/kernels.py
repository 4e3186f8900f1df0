"""Backend selection for the grid kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
NumPy versions in ``_pykernels`` are used.  Setting ``OAMFIDELITY_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:
    pass

if os.environ.get("OAMFIDELITY_PURE_PYTHON", "").lower() in ("1", "true", "yes"):
    BACKEND = "python"
else:
    BACKEND = "cython" if "cython" in BACKENDS else "python"

_impl = BACKENDS[BACKEND]
binary_mutual_information = _impl.binary_mutual_information
bernoulli_log_likelihood = _impl.bernoulli_log_likelihood
