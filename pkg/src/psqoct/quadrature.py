"""Composite Simpson weights on uniform grids.

The interferogram integrals are evaluated as ``weights @ integrand`` so the
same weight vector serves every delay; only the weights live here.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


def simpson_weights(n: int, step: float) -> NDArray[np.float64]:
    """Quadrature weights of composite Simpson's rule for ``n`` uniform points.

    Odd ``n`` uses the 1-4-2-...-4-1 pattern. Even ``n`` applies the 1/3 rule
    to the first ``n - 3`` intervals and Simpson's 3/8 rule to the last three.
    ``n == 2`` falls back to the trapezoid rule.
    """
    if n < 2:
        raise ValueError("need at least two grid points")
    w = np.zeros(n)
    if n == 2:
        w[:] = step / 2
        return w
    if n % 2 == 1:
        w[0:n:2] = 2.0
        w[1:n:2] = 4.0
        w[0] = w[-1] = 1.0
        return w * step / 3.0
    if n == 4:
        return np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * step / 8.0
    m = n - 3  # odd number of points covered by the 1/3 rule
    w[:m] = simpson_weights(m, step)
    w[m - 1 :] += np.array([1.0, 3.0, 3.0, 1.0]) * 3.0 * step / 8.0
    return w


def simpson(values: NDArray, step: float, axis: int = -1) -> NDArray:
    """Integrate uniformly sampled ``values`` along ``axis``."""
    values = np.asarray(values)
    w = simpson_weights(values.shape[axis], step)
    return np.tensordot(np.moveaxis(values, axis, -1), w, axes=([-1], [0]))
