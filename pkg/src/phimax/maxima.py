"""Running maxima over anchored rectangles and their normalized deviations.

For a grid ``X`` the window ``(m, j)`` is ``{(k, n): k <= m, n <= j}`` and
``M[m, j]`` its maximum. Indices in this module's public results are 1-based
like the windows they describe; arrays are stored 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from phimax.conditions import NormalizerSpec
from phimax.simulate import DoubleArray


@dataclass
class RunningMaxGrid:
    x: np.ndarray
    prefix_max: np.ndarray
    a: np.ndarray
    y: np.ndarray
    z: np.ndarray
    y_plus: np.ndarray
    y_minus: np.ndarray
    argmax: np.ndarray | None = None  # shape (m, j, 2) of 1-based (k*, n*)

    @property
    def shape(self):
        return self.prefix_max.shape


def _values(array) -> np.ndarray:
    v = array.values if isinstance(array, DoubleArray) else np.asarray(array, dtype=float)
    if v.ndim != 2 or v.size == 0:
        raise ValueError("expected a non-empty 2-d grid")
    return v


def prefix_max(array) -> np.ndarray:
    """``M[m, j] = max_{k<=m, n<=j} X[k, n]``.

    Equivalent to the recursion ``M = max(M_up, M_left, X)``, computed as two
    cumulative maxima (down the rows, then along the columns).
    """
    v = _values(array)
    return np.maximum.accumulate(np.maximum.accumulate(v, axis=0), axis=1)


def argmax_locations(array) -> np.ndarray:
    """1-based ``(k*, n*)`` of each window maximum, ties to the lexicographically smallest.

    A column pass records the earliest row reaching each running column
    maximum; a row-parallel sweep over columns then merges the left window
    with the current column.
    """
    v = _values(array)
    m, j = v.shape
    colmax = np.maximum.accumulate(v, axis=0)
    rows = np.arange(m)[:, None]
    rises = np.empty_like(v, dtype=bool)
    rises[0] = True
    rises[1:] = v[1:] > colmax[:-1]
    colarg = np.maximum.accumulate(np.where(rises, rows, 0), axis=0)

    best = colmax[:, 0].copy()
    bk = colarg[:, 0].copy()
    bn = np.zeros(m, dtype=np.int64)
    out = np.empty((m, j, 2), dtype=np.int64)
    out[:, 0, 0] = bk
    out[:, 0, 1] = 0
    for n in range(1, j):
        cand = colmax[:, n]
        ck = colarg[:, n]
        take = (cand > best) | ((cand == best) & (ck < bk))
        best = np.where(take, cand, best)
        bk = np.where(take, ck, bk)
        bn = np.where(take, n, bn)
        out[:, n, 0] = bk
        out[:, n, 1] = bn
    return out + 1


def distinct_argmax_locations(argmax: np.ndarray) -> np.ndarray:
    """Sorted unique ``(k*, n*)`` pairs across all windows."""
    return np.unique(argmax.reshape(-1, 2), axis=0)


def normalizer(spec: NormalizerSpec, m: int, j: int) -> float:
    """``a_{m,j} = g(ln(mj)) psi^{-1}(ln(mj))``; zero at ``m = j = 1``."""
    if m < 1 or j < 1:
        raise ValueError("window extents must be positive")
    y = math.log(m) + math.log(j)
    return float(spec.g(y)) * float(spec.family.psi_inverse(y))


def normalizer_grid(spec: NormalizerSpec, m: int, j: int) -> np.ndarray:
    """``a`` for every window of an ``m x j`` grid, evaluated once per distinct product ``mj``."""
    prod = np.outer(np.arange(1, m + 1, dtype=np.int64), np.arange(1, j + 1, dtype=np.int64))
    uniq, inv = np.unique(prod, return_inverse=True)
    y = np.log(uniq.astype(float))
    vals = np.asarray(spec.g(y), dtype=float) * np.asarray(spec.family.psi_inverse(y), dtype=float)
    return vals[inv].reshape(m, j)


def deviations(array, spec: NormalizerSpec, a: np.ndarray | None = None, with_argmax: bool = True) -> RunningMaxGrid:
    """Fill ``M``, ``a``, ``Y = M - a``, ``Z = X - a`` and the split parts ``Y+``, ``Y-``.

    A precomputed normalizer grid ``a`` of matching shape can be passed to
    avoid recomputation across replications.
    """
    v = _values(array)
    if a is None:
        a = normalizer_grid(spec, *v.shape)
    elif a.shape != v.shape:
        raise ValueError(f"normalizer grid shape {a.shape} does not match the array {v.shape}")
    M = prefix_max(v)
    y = M - a
    return RunningMaxGrid(
        x=v,
        prefix_max=M,
        a=a,
        y=y,
        z=v - a,
        y_plus=np.maximum(y, 0.0),
        y_minus=np.maximum(-y, 0.0),
        argmax=argmax_locations(v) if with_argmax else None,
    )


def window_series(grid: RunningMaxGrid, windows) -> np.ndarray:
    """``Y`` along a list of 1-based windows ``(m, j)``, in the given order."""
    rows, cols = grid.shape
    idx = []
    for w in windows:
        m, j = int(w[0]), int(w[1])
        if not (1 <= m <= rows and 1 <= j <= cols):
            raise ValueError(f"window ({m}, {j}) is outside the {rows}x{cols} grid")
        idx.append((m - 1, j - 1))
    if not idx:
        return np.empty(0)
    ii, jj = zip(*idx)
    return grid.y[list(ii), list(jj)]


def geometric_windows(s: int, t: int, count: int, limit: tuple[int, int] | None = None) -> list[tuple[int, int]]:
    """Window ladder ``(2^i s, 2^i t)`` for ``i = 0 .. count-1``, optionally clipped to ``limit``."""
    out = []
    for i in range(count):
        w = (s * 2**i, t * 2**i)
        if limit is not None and (w[0] > limit[0] or w[1] > limit[1]):
            break
        out.append(w)
    return out
