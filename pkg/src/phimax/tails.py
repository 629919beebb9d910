"""Norm estimation, the upper tail bound and lower-tail models.

The phi-subgaussian norm of a centered variable with log-MGF ``L`` is
``sup_{lambda>0} phi^{-1}(L(lambda)) / lambda``; :func:`tau_phi_estimate`
evaluates that supremum numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from phimax._search import golden_max
from phimax.orlicz import OrliczFamily, make_weibull_conjugate_family


@dataclass(frozen=True)
class SubgaussianEstimate:
    tau: float
    lambda_star: float
    series_terms: int | None
    objective_curve: tuple | None = None
    flags: tuple = ()

    @property
    def ok(self) -> bool:
        return "boundary" not in self.flags

    def to_dict(self) -> dict:
        return {"tau": self.tau, "lambda_star": self.lambda_star, "M": self.series_terms, "flags": list(self.flags)}


@dataclass(frozen=True)
class TailModel:
    """Lower-tail specification ``P(X < x) <= exp(-C exp(-kappa(x)))``.

    ``B``, ``C1``, ``C2`` and ``x0`` feed the divergence conditions; ``C2``
    left as ``None`` is estimated on a grid by the checker.
    """

    kappa: Callable
    r: Callable
    C: float
    C0: Callable
    B: float | None = None
    C1: float | None = None
    C2: float | None = None
    x0: float | None = None
    name: str = field(default="custom", compare=False)

    def validate(self, xs=None) -> list[str]:
        xs = np.geomspace(1e-3, 50.0, 400) if xs is None else np.asarray(xs, dtype=float)
        problems = []
        k = np.asarray(self.kappa(xs), dtype=float)
        rr = np.asarray(self.r(xs), dtype=float)
        if np.any(k <= 0):
            problems.append("kappa is not positive on the grid")
        if np.any(np.diff(k) <= 0):
            problems.append("kappa is not increasing on the grid")
        if np.any(np.diff(rr) < -1e-12 * np.maximum(1.0, np.abs(rr[1:]))):
            problems.append("r is not non-decreasing on the grid")
        if not self.C > 0:
            problems.append("C must be positive")
        return problems


def log_mgf_reflected_weibull(lam: float, theta: float, b: float, M: int = 50) -> float:
    """Log of ``sum_{n=0}^{M} (lam b)^(2n) Gamma(1 + 2n/theta) / (2n)!``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    lam = abs(float(lam))
    if lam == 0.0:
        return 0.0
    n = np.arange(M + 1)
    logs = 2 * n * math.log(lam * b) + gammaln(1 + 2 * n / theta) - gammaln(2 * n + 1)
    top = float(np.max(logs))
    total = math.fsum(np.exp(logs - top))
    out = top + math.log(total)
    if not math.isfinite(out):
        raise ValueError(f"series accumulation is not finite at lambda={lam}, M={M}")
    return out


def mgf_reflected_weibull(lam: float, theta: float, b: float, M: int = 50) -> float:
    """Truncated even MGF series of a reflected Weibull variable (always >= 1)."""
    out = math.exp(log_mgf_reflected_weibull(lam, theta, b, M))
    if not math.isfinite(out):
        raise ValueError(f"MGF overflows at lambda={lam}; use log_mgf_reflected_weibull")
    return out


def log_mgf_from_dict(desc: dict, M: int = 50) -> Callable[[float], float]:
    """Log-MGF evaluator for a distribution descriptor."""
    kind = desc.get("kind")
    if kind == "weibull":
        theta, b = float(desc["theta"]), float(desc["b"])
        return lambda lam: log_mgf_reflected_weibull(lam, theta, b, M)
    if kind == "gaussian":
        sigma = float(desc.get("sigma", 1.0))
        return lambda lam: 0.5 * (sigma * lam) ** 2
    if kind == "constant":
        if float(desc.get("value", 0.0)) != 0.0:
            raise ValueError("only the centered constant 0 has a subgaussian norm")
        return lambda lam: 0.0
    raise ValueError(f"no MGF available for distribution kind {kind!r}")


def _h(log_mgf, family, lam):
    val = float(log_mgf(lam))
    return float(family.phi_inverse(max(val, 0.0))) / lam


def tau_phi_estimate(
    log_mgf: Callable[[float], float],
    family: OrliczFamily,
    lam_range: tuple[float, float] = (1e-2, 1e3),
    n_grid: int = 200,
    tol: float = 1e-6,
    series_terms: int | None = None,
    keep_curve: bool = False,
) -> SubgaussianEstimate:
    """Maximize ``h(lambda) = phi^{-1}(log_mgf(lambda)) / lambda`` over ``lambda > 0``.

    Coarse geometric scan followed by golden-section refinement to ``tol``
    in lambda. A maximizer on the scan boundary triggers one tenfold widening;
    if it persists the estimate carries the ``"boundary"`` flag.
    """
    lo, hi = lam_range
    flags = []
    for attempt in range(2):
        grid = np.geomspace(lo, hi, n_grid)
        vals = np.array([_h(log_mgf, family, lam) for lam in grid])
        top = float(vals.max())
        if top <= 0.0:
            curve = (tuple(grid), tuple(vals)) if keep_curve else None
            return SubgaussianEstimate(0.0, float("nan"), series_terms, curve, ("degenerate",))
        if top - float(vals.min()) <= 1e-9 * top:
            curve = (tuple(grid), tuple(vals)) if keep_curve else None
            return SubgaussianEstimate(top, float(grid[0]), series_terms, curve, ("flat",))
        i = int(vals.argmax())
        if 0 < i < n_grid - 1:
            break
        if attempt == 0:
            lo, hi = lo / 10, hi * 10
        else:
            flags.append("boundary")
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    lam_star, tau = golden_max(lambda lam: _h(log_mgf, family, lam), a, b, tol=tol)
    if vals[i] > tau:
        lam_star, tau = float(grid[i]), float(vals[i])
    curve = (tuple(grid), tuple(vals)) if keep_curve else None
    return SubgaussianEstimate(float(tau), float(lam_star), series_terms, curve, tuple(flags))


def upper_tail_bound(family: OrliczFamily, tau: float, x):
    """``exp(-psi(x / tau))``, the upper bound on ``P(X >= x)`` for ``x > 0``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise ValueError("the tail bound is stated for x > 0")
    if not tau > 0:
        raise ValueError("tau must be positive")
    out = np.exp(-np.asarray(family.psi(x_arr / tau), dtype=float))
    return float(out) if out.ndim == 0 else out


def _birnbaum_log_gap(B):
    # min over x >= x0 of B*x^2/2 - kappa(x), kappa the Gaussian lower-tail exponent
    def f(x):
        return B * x * x / 2 - (x * x / 2 + math.log(math.sqrt(4 + x * x) + x))

    return f


def gaussian_lower_tail_model(B: float = 1.05, x0: float = 1.0) -> TailModel:
    """Lower-tail model of the standard normal from Birnbaum's inequality.

    ``kappa(x) = x^2/2 + ln(sqrt(4+x^2) + x)``, ``C = sqrt(2/pi)`` and
    ``C0(x) = -ln(x + sqrt(4+x^2))``. ``C1`` is the exact infimum that makes
    ``exp(-kappa) >= C1 exp(-B psi)`` hold on ``[x0, inf)``; it needs ``B > 1``.
    """
    C1 = None
    if B > 1:
        gap = _birnbaum_log_gap(B)
        res = minimize_scalar(gap, bounds=(x0, x0 + 50.0 / math.sqrt(B - 1)), method="bounded",
                              options={"xatol": 1e-12})
        C1 = math.exp(min(res.fun, gap(x0)))
    return TailModel(
        kappa=lambda x: np.asarray(x, dtype=float) ** 2 / 2 + np.log(np.sqrt(4 + np.asarray(x, dtype=float) ** 2) + x),
        r=lambda x: x + 1 / np.sqrt(4 + np.asarray(x, dtype=float) ** 2),
        C=math.sqrt(2 / math.pi),
        C0=lambda x: -np.log(x + np.sqrt(4 + np.asarray(x, dtype=float) ** 2)),
        B=B,
        C1=C1,
        x0=x0,
        name="gaussian",
    )


def psi_lower_tail_model(family: OrliczFamily, C: float, c: float = 1.0, x0: float = 1.0, name: str = "psi") -> TailModel:
    """Model with ``kappa = psi`` and ``r = q_phi``; ``c`` is the norm bound.

    ``C0(x) = psi(x) - psi(c x)``, which is identically zero for ``c = 1``
    and nonnegative whenever ``c <= 1``; its lower bound 0 is used then.
    """
    if c <= 1:
        C0 = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    else:
        C0 = lambda x: family.psi(x) - family.psi(c * np.asarray(x, dtype=float))
    return TailModel(kappa=family.psi, r=family.q_inverse, C=C, C0=C0, B=1.0, C1=1.0, x0=x0, name=name)


def weibull_lower_tail_model(theta: float, b: float, c: float = 1.0, x0: float | None = None) -> TailModel:
    """Reflected Weibull: ``kappa = psi = (x/b)^theta``, ``C = 1/2``, ``r = q_phi``."""
    fam = make_weibull_conjugate_family(theta, b)
    return psi_lower_tail_model(fam, C=0.5, c=c, x0=b if x0 is None else x0, name="weibull")


def tail_model_from_dict(desc: dict, family: OrliczFamily | None = None) -> TailModel:
    kind = desc.get("kind")
    if kind == "gaussian":
        return gaussian_lower_tail_model(B=float(desc.get("B", 1.05)), x0=float(desc.get("x0", 1.0)))
    if kind == "weibull":
        return weibull_lower_tail_model(desc["theta"], desc["b"], c=float(desc.get("c", 1.0)),
                                        x0=desc.get("x0"))
    if kind == "psi":
        if family is None:
            raise ValueError("tail model kind 'psi' needs a family")
        model = psi_lower_tail_model(family, C=float(desc["C"]), c=float(desc.get("c", 1.0)),
                                     x0=float(desc.get("x0", 1.0)))
        if "C2" in desc:
            model = TailModel(**{**model.__dict__, "C2": float(desc["C2"])})
        return model
    raise ValueError(f"tail_model.kind must be 'gaussian', 'weibull' or 'psi', got {kind!r}")
