"""Orlicz N-functions and their conjugate apparatus.

An :class:`OrliczFamily` bundles an N-function ``phi`` with its density
``p_density``, the generalized inverse ``q_inverse`` of that density, the
Young-Fenchel conjugate ``psi`` and the inverses of ``phi`` and ``psi`` on
the nonnegative half-line. Every evaluator is vectorized and even.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from phimax._search import golden_max, log_bracket_max, sup_bisect

FAMILY_KINDS = ("power", "gaussian", "weibull", "table")


@dataclass(frozen=True)
class OrliczFamily:
    kind: str
    params: dict
    phi: Callable
    p_density: Callable
    q_inverse: Callable
    psi: Callable
    psi_inverse_closed: Callable | None = None
    phi_inverse_closed: Callable | None = None
    note: str = field(default="", compare=False)

    def psi_inverse(self, y):
        return psi_inverse(self, y)

    def phi_inverse(self, y):
        return phi_inverse(self, y)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def _even(f):
    def wrapped(x):
        return f(np.abs(np.asarray(x, dtype=float)))

    return wrapped


def _as_output(x, out):
    return float(out) if np.ndim(x) == 0 else out


def make_power_family(r: float) -> OrliczFamily:
    """``phi(x) = |x|^r / r`` with conjugate ``|x|^q / q``, ``1/r + 1/q = 1``."""
    r = float(r)
    if not r > 1:
        raise ValueError(f"power family needs r > 1, got {r}")
    q = r / (r - 1)
    return OrliczFamily(
        kind="power",
        params={"r": r},
        phi=_even(lambda x: x**r / r),
        p_density=_even(lambda t: t ** (r - 1)),
        q_inverse=_even(lambda t: t ** (1 / (r - 1))),
        psi=_even(lambda x: x**q / q),
        psi_inverse_closed=lambda y: (q * y) ** (1 / q),
        phi_inverse_closed=lambda y: (r * y) ** (1 / r),
    )


def make_gaussian_family() -> OrliczFamily:
    """The self-conjugate quadratic ``x^2 / 2`` of classical subgaussianity."""
    fam = make_power_family(2.0)
    return OrliczFamily(
        kind="gaussian",
        params={},
        phi=fam.phi,
        p_density=fam.p_density,
        q_inverse=fam.q_inverse,
        psi=fam.psi,
        psi_inverse_closed=lambda y: np.sqrt(2 * y),
        phi_inverse_closed=lambda y: np.sqrt(2 * y),
    )


def make_weibull_conjugate_family(theta: float, b: float, phi_constant: str = "conjugate") -> OrliczFamily:
    """Conjugate pair for reflected Weibull tails, ``psi(x) = (x / b)^theta``.

    ``phi(x) = K x^(theta/(theta-1))`` with ``K`` chosen so that ``psi`` is
    exactly the Young-Fenchel transform of ``phi``:
    ``K = ((theta-1)/theta) * (b^theta/theta)^(1/(theta-1))``.

    ``phi_constant="published"`` swaps in the reciprocal constant
    ``(theta/b^theta)^(1/(theta-1))`` that the original norm computation
    for theta=9, b=1.25 used (tau close to 0.997). The bundle then stays
    conjugate-consistent: ``psi`` becomes ``(x / b')^theta`` with
    ``b' = (theta^2 / b^theta)^(1/theta)``.
    """
    theta, b = float(theta), float(b)
    if not theta > 1:
        raise ValueError(f"weibull family needs theta > 1, got {theta}")
    if not b > 0:
        raise ValueError(f"weibull family needs b > 0, got {b}")
    if phi_constant == "conjugate":
        scale = b
        note = ""
    elif phi_constant == "published":
        scale = (theta**2 / b**theta) ** (1 / theta)
        note = "published phi constant; psi scale b' = %.12g" % scale
    else:
        raise ValueError(f"phi_constant must be 'conjugate' or 'published', got {phi_constant!r}")

    s = theta / (theta - 1)
    K = ((theta - 1) / theta) * (scale**theta / theta) ** (1 / (theta - 1))
    dens = (scale**theta / theta) ** (1 / (theta - 1))
    params = {"theta": theta, "b": b}
    if phi_constant != "conjugate":
        params["phi_constant"] = phi_constant
    return OrliczFamily(
        kind="weibull",
        params=params,
        phi=_even(lambda x: K * x**s),
        p_density=_even(lambda t: dens * t ** (1 / (theta - 1))),
        q_inverse=_even(lambda t: theta * t ** (theta - 1) / scale**theta),
        psi=_even(lambda x: (x / scale) ** theta),
        psi_inverse_closed=lambda y: scale * y ** (1 / theta),
        phi_inverse_closed=lambda y: (y / K) ** (1 / s),
        note=note,
    )


def make_table_family(xs, phis) -> OrliczFamily:
    """N-function interpolated from samples ``(x_i, phi(x_i))``, ``x_i > 0``.

    Piecewise linear between knots, ``phi_1 (x/x_1)^2`` below the first knot
    and a quadratic continuation of the last slope beyond the last knot, so
    the result is convex, superlinear and vanishes like ``x^2`` at zero.
    """
    xs = np.asarray(xs, dtype=float)
    ph = np.asarray(phis, dtype=float)
    if xs.ndim != 1 or xs.shape != ph.shape or xs.size < 2:
        raise ValueError("table needs matching 1-d xs and phis with at least two knots")
    if not (xs[0] > 0 and np.all(np.diff(xs) > 0)):
        raise ValueError("table xs must be positive and strictly increasing")
    if not (ph[0] > 0 and np.all(np.diff(ph) > 0)):
        raise ValueError("table phis must be positive and strictly increasing")
    slopes = np.diff(ph) / np.diff(xs)
    left_slope = 2 * ph[0] / xs[0]
    if np.any(np.diff(slopes) < -1e-12 * np.abs(slopes[1:])) or left_slope > slopes[0] * (1 + 1e-12):
        raise ValueError("table is not convex (including the quadratic head through the origin)")
    x_n, phi_n, s_n = xs[-1], ph[-1], slopes[-1]
    curv = s_n / x_n

    def phi_abs(x):
        x = np.asarray(x, dtype=float)
        mid = np.interp(x, xs, ph)
        head = ph[0] * (x / xs[0]) ** 2
        d = x - x_n
        tail = phi_n + s_n * d + 0.5 * curv * d * d
        return np.where(x < xs[0], head, np.where(x > x_n, tail, mid))

    def p_abs(t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, slopes.size - 1)
        mid = slopes[idx]
        head = left_slope * t / xs[0]
        tail = s_n + curv * (t - x_n)
        return np.where(t < xs[0], head, np.where(t >= x_n, tail, mid))

    phi = _even(phi_abs)
    p_density = _even(p_abs)
    q_vec = np.vectorize(lambda t: generalized_inverse_q(p_abs, t), otypes=[float])
    psi_vec = np.vectorize(lambda x: young_fenchel_numeric(phi, x), otypes=[float])
    return OrliczFamily(
        kind="table",
        params={"xs": xs.tolist(), "phis": ph.tolist()},
        phi=phi,
        p_density=p_density,
        q_inverse=lambda t: _as_output(t, q_vec(np.abs(t))),
        psi=lambda x: _as_output(x, psi_vec(np.abs(x))),
    )


def young_fenchel_numeric(phi: Callable, x: float, tol: float = 1e-10) -> float:
    """``sup_y (x y - phi(y))`` for an even, convex, superlinear ``phi``.

    The concave objective is maximized over ``y = exp(s)`` by golden-section
    search after an outward bracket expansion in ``s``; working in ``log y``
    gives relative precision ``tol`` in the maximizer at every scale.
    """
    x = abs(float(x))
    if x == 0.0:
        return 0.0

    def g(s):
        y = math.exp(s)
        with np.errstate(over="ignore"):
            val = x * y - float(phi(y))
        return val if math.isfinite(val) else -math.inf

    try:
        lo, hi = log_bracket_max(g)
    except OverflowError as exc:
        raise ValueError(f"conjugate search did not terminate at x={x}; phi is not superlinear") from exc
    _, best = golden_max(g, lo, hi, tol=tol)
    return max(best, 0.0)


def generalized_inverse_q(p_density: Callable, t: float) -> float:
    """``sup{u >= 0 : p(u) <= t}`` by monotone bisection on an expanding bracket.

    Plateaus of ``p`` at level ``t`` resolve to their right end.
    """
    t = float(t)
    if t < 0:
        raise ValueError("q is defined for t >= 0")
    if float(p_density(0.0)) > t:
        return 0.0
    return sup_bisect(lambda u: float(p_density(u)) <= t)


def _monotone_inverse(f: Callable, y: float, tol: float) -> float:
    if y == 0.0:
        return 0.0
    hi = 1.0
    while float(f(hi)) < y:
        hi *= 2
        if hi > 1e300:
            raise OverflowError(f"cannot bracket the inverse at y={y}")
    lo = hi / 2
    while lo > 1e-300 and float(f(lo)) > y:
        hi, lo = lo, lo / 2
    return brentq(lambda u: float(f(u)) - y, lo if float(f(lo)) <= y else 0.0, hi, xtol=1e-300, rtol=tol, maxiter=500)


def _inverse(closed, f, y, tol):
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise ValueError("inverse is only defined for y >= 0")
    if closed is not None:
        out = closed(y_arr)
    else:
        out = np.vectorize(lambda v: _monotone_inverse(f, v, tol), otypes=[float])(y_arr)
    return float(out) if out.ndim == 0 else out


def psi_inverse(family: OrliczFamily, y, tol: float = 1e-14):
    """Nonnegative root of ``psi(x) = y``; closed form where the family has one."""
    return _inverse(family.psi_inverse_closed, family.psi, y, tol)


def phi_inverse(family: OrliczFamily, y, tol: float = 1e-14):
    """Nonnegative root of ``phi(x) = y``; closed form where the family has one."""
    return _inverse(family.phi_inverse_closed, family.phi, y, tol)


def family_from_dict(desc: dict) -> OrliczFamily:
    """Build a family from its JSON descriptor.

    ``{"kind": "power", "r": 2}``, ``{"kind": "gaussian"}``,
    ``{"kind": "weibull", "theta": 9, "b": 1.25}`` (optional
    ``"phi_constant": "published"``) or ``{"kind": "table", "xs": [...], "phis": [...]}``.
    """
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ValueError("family descriptor must be an object with a 'kind' field")
    kind = desc["kind"]
    extra = set(desc) - {"kind"}
    try:
        if kind == "power":
            _only(extra, {"r"}, kind)
            return make_power_family(desc["r"])
        if kind == "gaussian":
            _only(extra, set(), kind)
            return make_gaussian_family()
        if kind == "weibull":
            _only(extra, {"theta", "b", "phi_constant"}, kind)
            return make_weibull_conjugate_family(desc["theta"], desc["b"], desc.get("phi_constant", "conjugate"))
        if kind == "table":
            _only(extra, {"xs", "phis"}, kind)
            return make_table_family(desc["xs"], desc["phis"])
    except KeyError as exc:
        raise ValueError(f"family.{exc.args[0]} is required for kind {kind!r}") from None
    raise ValueError(f"family.kind must be one of {FAMILY_KINDS}, got {kind!r}")


def _only(extra, allowed, kind):
    unknown = extra - allowed
    if unknown:
        raise ValueError(f"unknown field(s) for family kind {kind!r}: {sorted(unknown)}")


def family_from_json(text: str) -> OrliczFamily:
    return family_from_dict(json.loads(text))
