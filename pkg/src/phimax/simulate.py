"""Seeded generation of independent double arrays.

Randomness is counter-based. Realization ``r`` of master seed ``s`` derives a
Philox key from ``SeedSequence([s, r, stream])``; row ``k`` then reads the
counter block starting at ``[0, k, 0, 0]`` and cell ``(k, n)`` consumes the
``n``-th 64-bit word of that row. Any cell depends only on
``(seed, realization, k, n)``, so a top-left sub-rectangle is identical to
the array generated with the smaller extents, and rows can be produced in
any order or in parallel.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"PMAX"
HEADER = struct.Struct("<4sIII")
_STREAMS = {"gaussian": 1, "weibull": 2}
_MANTISSA = np.uint64((1 << 53) - 1)
_TWO_M53 = 2.0**-53


@dataclass(frozen=True)
class WeibullParams:
    theta: float
    b: float

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError(f"weibull theta must exceed 1, got {self.theta}")
        if not self.b > 0:
            raise ValueError(f"weibull b must be positive, got {self.b}")


@dataclass
class DoubleArray:
    """Dense ``m x j`` grid ``values[k-1, n-1] = X_{k,n}`` plus generation metadata."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("a double array needs a non-empty 2-d grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("double array values must be finite")
        self.values = v

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def j(self) -> int:
        return self.values.shape[1]


def _check_extents(m, j):
    if int(m) < 1 or int(j) < 1:
        raise ValueError(f"extents must be positive, got m={m}, j={j}")
    return int(m), int(j)


def _key(seed: int, realization: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence([int(seed), int(realization), stream]).generate_state(2, np.uint64)


def raw_words(seed: int, realization: int, m: int, j: int, stream: int, rows=None) -> np.ndarray:
    """``(len(rows), j)`` array of the raw 64-bit words assigned to each cell."""
    key = _key(seed, realization, stream)
    rows = range(m) if rows is None else rows
    out = np.empty((len(rows), j), dtype=np.uint64)
    counter = np.zeros(4, dtype=np.uint64)
    for i, k in enumerate(rows):
        counter[1] = k
        out[i] = np.random.Philox(key=key, counter=counter).random_raw(j)
    return out


def _uniform_open(words: np.ndarray) -> np.ndarray:
    # low 53 bits, centred in their cell: strictly inside (0, 1), so log() is safe
    return ((words & _MANTISSA).astype(np.float64) + 0.5) * _TWO_M53


def gaussian_from_words(words: np.ndarray, j: int | None = None) -> np.ndarray:
    """Box-Muller on consecutive word pairs ``(2i, 2i+1)`` of every row.

    ``words`` must have an even number of columns; the first ``j`` normals
    of each row are returned.
    """
    rows, width = words.shape
    if width % 2:
        raise ValueError("Box-Muller needs an even number of words per row")
    u = _uniform_open(words).reshape(rows, width // 2, 2)
    radius = np.sqrt(-2.0 * np.log(u[..., 0]))
    angle = 2.0 * math.pi * u[..., 1]
    z = np.empty((rows, width // 2, 2))
    z[..., 0] = radius * np.cos(angle)
    z[..., 1] = radius * np.sin(angle)
    return z.reshape(rows, width)[:, : width if j is None else j]


def weibull_from_words(words: np.ndarray, params: WeibullParams) -> np.ndarray:
    """``S b (-ln U)^(1/theta)``: ``U`` from the low 53 bits, the sign ``S`` from bit 63."""
    u = _uniform_open(words)
    sign = np.where((words >> np.uint64(63)) == 1, -1.0, 1.0)
    return sign * params.b * (-np.log(u)) ** (1.0 / params.theta)


def sample_gaussian(seed: int, m: int, j: int, realization: int = 0) -> DoubleArray:
    """I.i.d. standard normal grid keyed by ``(seed, realization, k, n)``."""
    m, j = _check_extents(m, j)
    vals = gaussian_from_words(raw_words(seed, realization, m, j + j % 2, _STREAMS["gaussian"]), j)
    return DoubleArray(vals, {"distribution": {"kind": "gaussian"}, "seed": int(seed), "realization": int(realization)})


def sample_reflected_weibull(seed: int, m: int, j: int, params: WeibullParams, realization: int = 0) -> DoubleArray:
    """I.i.d. reflected Weibull grid with ``P(|X| > x) = exp(-(x/b)^theta)``."""
    m, j = _check_extents(m, j)
    vals = weibull_from_words(raw_words(seed, realization, m, j, _STREAMS["weibull"]), params)
    desc = {"kind": "weibull", "theta": params.theta, "b": params.b}
    return DoubleArray(vals, {"distribution": desc, "seed": int(seed), "realization": int(realization)})


def validate_distribution(desc: dict) -> dict:
    """Normalized copy of a distribution descriptor; raises ``ValueError`` naming the bad field."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ValueError("distribution.kind is required")
    kind = desc["kind"]
    allowed = {"gaussian": {"kind"}, "weibull": {"kind", "theta", "b"}, "constant": {"kind", "value"}}
    if kind not in allowed:
        raise ValueError(f"distribution.kind must be gaussian, weibull or constant, got {kind!r}")
    unknown = set(desc) - allowed[kind]
    if unknown:
        raise ValueError(f"unknown field(s) in distribution: {sorted(unknown)}")
    if kind == "weibull":
        for name in ("theta", "b"):
            if name not in desc:
                raise ValueError(f"distribution.{name} is required for kind 'weibull'")
        WeibullParams(float(desc["theta"]), float(desc["b"]))
        return {"kind": "weibull", "theta": float(desc["theta"]), "b": float(desc["b"])}
    if kind == "constant":
        return {"kind": "constant", "value": float(desc.get("value", 0.0))}
    return {"kind": "gaussian"}


def sample(desc: dict, seed: int, m: int, j: int, realization: int = 0) -> DoubleArray:
    """Dispatch on a distribution descriptor (``gaussian``, ``weibull`` or ``constant``)."""
    desc = validate_distribution(desc)
    if desc["kind"] == "gaussian":
        return sample_gaussian(seed, m, j, realization)
    if desc["kind"] == "weibull":
        return sample_reflected_weibull(seed, m, j, WeibullParams(desc["theta"], desc["b"]), realization)
    m, j = _check_extents(m, j)
    return DoubleArray(np.full((m, j), desc["value"]), {"distribution": desc, "seed": int(seed),
                                                         "realization": int(realization)})


# --------------------------------------------------------------------------
# grid files


def write_grid_binary(path, values) -> None:
    """``PMAX`` magic, u32 ``m``, u32 ``j``, u32 zero padding, then little-endian f64 row-major."""
    v = np.ascontiguousarray(values, dtype="<f8")
    m, j = v.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, m, j, 0))
        fh.write(v.tobytes())


def read_grid_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ValueError(f"{path}: too short for a grid header")
    magic, m, j, _ = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    expected = HEADER.size + 8 * m * j
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for a {m}x{j} grid, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(m, j).astype(np.float64)


def write_grid_csv(path, values) -> None:
    """Long format with header ``k,n,value`` (1-based indices), values in round-trip precision."""
    v = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "n", "value"])
        for k in range(v.shape[0]):
            for n in range(v.shape[1]):
                w.writerow([k + 1, n + 1, repr(float(v[k, n]))])


def read_grid_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"k", "n", "value"}:
        raise ValueError(f"{path}: expected columns k,n,value")
    ks = np.array([int(r["k"]) for r in rows])
    ns = np.array([int(r["n"]) for r in rows])
    m, j = int(ks.max()), int(ns.max())
    if len(rows) != m * j:
        raise ValueError(f"{path}: {len(rows)} rows do not fill a {m}x{j} grid")
    out = np.empty((m, j))
    out[ks - 1, ns - 1] = [float(r["value"]) for r in rows]
    return out


def read_grid(path) -> np.ndarray:
    """Read either grid format, chosen by the file's leading bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return read_grid_binary(path) if head == MAGIC else read_grid_csv(path)
