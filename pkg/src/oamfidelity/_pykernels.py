"""NumPy implementations of the grid kernels (fallback for ``_ckernels``)."""

import numpy as np


def binary_mutual_information(p_first, p_second, wq):
    """Mutual information between a binary outcome and a gridded angle.

    Args:
        p_first, p_second: Outcome probabilities at each node.
        wq: Quadrature weight times prior density at each node.

    Returns:
        ``(bits, marginal_first, marginal_second)``.  Terms with a zero
        probability or zero marginal contribute nothing.
    """
    p_first = np.asarray(p_first, dtype=float)
    p_second = np.asarray(p_second, dtype=float)
    wq = np.asarray(wq, dtype=float)
    marg = (float(np.dot(wq, p_first)), float(np.dot(wq, p_second)))
    bits = 0.0
    for p, pm in zip((p_first, p_second), marg):
        if pm <= 0.0:
            continue
        mask = p > 0.0
        bits += float(np.dot(wq[mask], p[mask] * np.log2(p[mask] / pm)))
    return bits, marg[0], marg[1]


def bernoulli_log_likelihood(p_first, p_second, n_first, n_second):
    """``n_first log p_first + n_second log p_second`` per node, with 0 log 0 = 0.

    Counts may be fractional.  A zero probability paired with a positive
    count yields ``-inf``.
    """
    p_first = np.asarray(p_first, dtype=float)
    p_second = np.asarray(p_second, dtype=float)
    out = np.zeros_like(p_first)
    with np.errstate(divide="ignore"):
        if n_first > 0:
            out += n_first * np.log(p_first)
        if n_second > 0:
            out += n_second * np.log(p_second)
    return out
