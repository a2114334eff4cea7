"""Compensated running sums.

``math.fsum`` is exact but only gives the final total; diagnostics need every
prefix, so this module keeps a Neumaier accumulator alongside the sum.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray


def _neumaier_prefix(column: list[float]) -> list[float]:
    out = []
    s = c = 0.0
    for v in column:
        t = s + v
        # keep the low-order bits of whichever operand was smaller
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out.append(s + c)
    return out


def compensated_cumsum(values: ArrayLike) -> NDArray[np.float64]:
    """Prefix sums along axis 0 with Neumaier compensation.

    Works on 1-D sequences and on ``(N, n)`` arrays (independent columns).
    """
    a = np.asarray(values, dtype=float)
    if a.ndim == 1:
        return np.array(_neumaier_prefix(a.tolist()), dtype=float)
    if a.shape[0] == 0:
        return a.copy()
    cols = [_neumaier_prefix(col) for col in a.reshape(a.shape[0], -1).T.tolist()]
    return np.array(cols, dtype=float).T.reshape(a.shape)


def compensated_sum(values: ArrayLike) -> float:
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    return float(compensated_cumsum(a)[-1])
