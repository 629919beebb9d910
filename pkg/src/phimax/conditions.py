"""Numerical checks of the integrability and series hypotheses.

Finiteness of an improper integral or an infinite series cannot be decided
from finitely many evaluations. Every check here returns a
:class:`FinitenessVerdict` built from contributions over doubling blocks,
with the block data exposed so a verdict can be audited.

Integrands of the exp-of-exp type are assembled as logarithms; ``-inf``
means an exact zero.
"""
from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from phimax.orlicz import OrliczFamily
from phimax.tails import TailModel

LN2 = math.log(2.0)


class Verdict(str, enum.Enum):
    FINITE = "finite"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


@dataclass
class FinitenessVerdict:
    verdict: Verdict
    partial_value: float
    tail_ratio: float
    segments: list = field(default_factory=list)
    message: str = ""
    log_partial_value: float = math.nan

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "partial_value": self.partial_value,
            "log_partial_value": self.log_partial_value,
            "tail_ratio": self.tail_ratio,
            "segments": [[lo, hi, c] for (lo, hi), c in self.segments],
            "message": self.message,
        }


# --------------------------------------------------------------------------
# normalizers


@dataclass(frozen=True)
class NormalizerSpec:
    """Norm-growth function ``g`` together with the Orlicz family."""

    g: Callable
    family: OrliczFamily
    g_desc: dict = field(default_factory=lambda: {"kind": "const", "c": 1.0})

    @property
    def is_constant(self) -> bool:
        return self.g_desc.get("kind") == "const"

    def validate(self, xs=None) -> list[str]:
        xs = np.linspace(0.0, 50.0, 501) if xs is None else np.asarray(xs, dtype=float)
        gv = np.asarray(self.g(xs), dtype=float) * np.ones_like(xs)
        problems = []
        if np.any(gv <= 0):
            problems.append("g must be positive")
        if np.any(np.diff(gv) < 0):
            problems.append("g must be non-decreasing")
        if float(self.g(0.0)) < 1:
            problems.append("g(0) < 1: the lower-tail argument assumes g(0) >= 1")
        return problems


def make_g(desc: dict) -> Callable:
    """Evaluator for a g descriptor.

    ``{"kind": "const", "c": 1}``, ``{"kind": "exp", "c": 1, "k": 1}``,
    ``{"kind": "powerlog", "c": 1, "p": 0.5, "s": 0}`` meaning
    ``c (1+x)^p ln(e+x)^s``, or ``{"kind": "table", "xs": [...], "gs": [...]}``
    (linear between knots, flat outside).
    """
    kind = desc.get("kind")
    if kind == "const":
        c = float(desc.get("c", 1.0))
        return lambda x: np.full_like(np.asarray(x, dtype=float), c) if np.ndim(x) else c
    if kind == "exp":
        c, k = float(desc.get("c", 1.0)), float(desc.get("k", 1.0))
        return lambda x: c * np.exp(k * np.asarray(x, dtype=float))
    if kind == "powerlog":
        c, p, s = float(desc.get("c", 1.0)), float(desc.get("p", 0.0)), float(desc.get("s", 0.0))
        return lambda x: c * (1 + np.asarray(x, dtype=float)) ** p * np.log(math.e + np.asarray(x, dtype=float)) ** s
    if kind == "table":
        xs = np.asarray(desc["xs"], dtype=float)
        gs = np.asarray(desc["gs"], dtype=float)
        if xs.shape != gs.shape or np.any(np.diff(xs) <= 0):
            raise ValueError("g table needs matching xs/gs with increasing xs")
        return lambda x: np.interp(x, xs, gs)
    raise ValueError(f"g.kind must be const, exp, powerlog or table, got {kind!r}")


def parse_g(text_or_desc) -> dict:
    """Accept a descriptor dict or a shorthand such as ``"const:1"`` or ``"exp:1"``."""
    if isinstance(text_or_desc, dict):
        return text_or_desc
    head, _, arg = str(text_or_desc).partition(":")
    if head == "const":
        return {"kind": "const", "c": float(arg or 1.0)}
    if head == "exp":
        return {"kind": "exp", "c": 1.0, "k": float(arg or 1.0)}
    raise ValueError(f"cannot parse g shorthand {text_or_desc!r}")


def normalizer_spec(family: OrliczFamily, g="const:1") -> NormalizerSpec:
    desc = parse_g(g)
    return NormalizerSpec(g=make_g(desc), family=family, g_desc=desc)


# --------------------------------------------------------------------------
# block classification


def _logsumexp(logs):
    finite = [v for v in logs if v > -math.inf]
    if not finite:
        return -math.inf
    top = max(finite)
    return top + math.log(math.fsum(math.exp(v - top) for v in finite))


def _exp_or_inf(v):
    return math.exp(v) if v < 709.78 else math.inf


def _classify(logs, shrink, tail_tol, k_finite, k_diverge, may_diverge=True):
    """Return (verdict or None, tail_ratio) from log block contributions.

    Working with logarithms lets integrals far beyond the double range
    (for instance ``exp(5000)``) still be classified. ``may_diverge=False``
    withholds a divergence verdict for now.
    """
    n = len(logs)
    ratio = math.nan
    if n >= 2:
        a, b = logs[-2], logs[-1]
        if a == -math.inf:
            ratio = 0.0 if b == -math.inf else math.inf
        else:
            ratio = _exp_or_inf(b - a)
    log_shrink = math.log(shrink)
    if n >= k_finite + 1:
        last = logs[-(k_finite + 1):]
        shrinking = all(b == -math.inf or (a > -math.inf and b <= a - log_shrink)
                        for a, b in zip(last[:-1], last[1:]))
        if shrinking:
            total = _logsumexp(logs)
            rho = ratio if math.isfinite(ratio) else 0.0
            if total == -math.inf or tail_tol is None or rho == 0.0:
                return Verdict.FINITE, ratio
            if rho < 1 and logs[-1] + math.log(rho / (1 - rho)) <= math.log(tail_tol) + total:
                return Verdict.FINITE, ratio
    if may_diverge and n >= k_diverge:
        last = logs[-k_diverge:]
        if all(v > -math.inf for v in last) and all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(last[:-1], last[1:])):
            # growth that is clearly slowing down (a peak still ahead) is not divergence yet
            steps = [b - a for a, b in zip(last[:-1], last[1:])]
            decelerating = steps[0] > 0.1 and steps[-1] < 0.5 * steps[0]
            if not decelerating:
                return Verdict.DIVERGES, ratio
    return None, ratio


def _verdict(verdict, logs, ratio, segments, message=""):
    total = _logsumexp(logs)
    return FinitenessVerdict(verdict, _exp_or_inf(total), ratio, segments, message, total)


def improper_integral(
    f: Callable,
    a: float,
    *,
    log: bool = False,
    first_width: float | None = None,
    max_segments: int = 60,
    rtol: float = 1e-9,
    atol: float = 1e-300,
    shrink: float = 2.0,
    tail_tol: float = 1e-8,
    k_finite: int = 4,
    k_diverge: int = 8,
    diverge_horizon: float = 1e8,
) -> FinitenessVerdict:
    """Heuristic finiteness verdict for ``int_a^inf f(x) dx`` with ``f >= 0``.

    The range is cut into doubling segments ``[a, 2a], [2a, 4a], ...`` (the
    first segment is ``[a, a + first_width]`` when ``a = 0``), each
    integrated by adaptive Gauss-Kronrod quadrature. *Finite* when the last
    ``k_finite`` contributions each shrink by ``shrink`` and the geometric
    tail extrapolation is below ``tail_tol`` of the running total;
    *diverges* when ``k_diverge`` consecutive contributions fail to decrease
    and the segments have reached ``diverge_horizon``. Polynomial growth on
    the way up to a distant peak looks exactly like divergence, so the
    verdict waits until a late peak is implausible.

    With ``log=True``, ``f`` returns ``log f``. Contributions are accumulated
    as logarithms, so ``partial_value`` may be ``inf`` for a finite but huge
    integral; ``log_partial_value`` always holds its logarithm.
    """
    if a < 0:
        raise ValueError("lower limit must be nonnegative")
    logf = f if log else (lambda x: _safe_log(f(x)))
    width = first_width if first_width is not None else (a if a > 0 else 1.0)
    edges = [a, a + width]
    logs: list[float] = []
    segments: list = []
    ratio = math.nan
    for _ in range(max_segments):
        lo, hi = edges[-2], edges[-1]
        try:
            lval = _segment_log_integral(logf, lo, hi, rtol, atol)
        except _BadIntegrand as exc:
            return _verdict(Verdict.INCONCLUSIVE, logs, ratio, segments,
                            f"integrand not finite at x={exc.args[0]!r}")
        logs.append(lval)
        segments.append(((lo, hi), _exp_or_inf(lval)))
        verdict, ratio = _classify(logs, shrink, tail_tol, k_finite, k_diverge, hi >= diverge_horizon)
        if verdict is not None:
            return _verdict(verdict, logs, ratio, segments)
        edges.append(2 * hi)
    return _verdict(Verdict.INCONCLUSIVE, logs, ratio, segments,
                    f"no decision within {max_segments} segments")


class _BadIntegrand(Exception):
    pass


def _safe_log(v):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(v)


def _segment_log_integral(logf, lo, hi, rtol, atol, n_samples=129):
    """Logarithm of ``int_lo^hi exp(logf)``.

    A sampled log-range under 40 is integrated in one piece after shifting
    by the sampled maximum. Sharper integrands are split at the sample points
    and every piece is integrated with its own shift; pieces more than 60
    log-units under the peak are dropped.
    """
    xs = np.linspace(lo, hi, n_samples)
    with np.errstate(all="ignore"):
        lv = np.array([float(logf(x)) for x in xs])
    bad = np.isnan(lv) | (lv == np.inf)
    if bad.any():
        raise _BadIntegrand(float(xs[np.argmax(bad)]))
    if np.all(lv == -np.inf):
        return -math.inf
    top = float(lv.max())
    finite = lv[lv > -np.inf]
    if top - float(finite.min()) < 40 and finite.size == lv.size:
        return _piece(logf, lo, hi, lv[0], lv[-1], top, rtol, atol)
    logs = []
    for i in range(n_samples - 1):
        a, b = float(lv[i]), float(lv[i + 1])
        if max(a, b) < top - 60:
            continue
        logs.append(_piece(logf, float(xs[i]), float(xs[i + 1]), a, b, max(a, b), rtol, atol))
    return _logsumexp(logs)


def _piece(logf, lo, hi, la, lb, shift, rtol, atol):
    def integrand(x):
        with np.errstate(all="ignore"):
            v = float(logf(x))
        if math.isnan(v) or v == math.inf:
            raise _BadIntegrand(x)
        return math.exp(min(v - shift, 700.0))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, _ = quad(integrand, lo, hi, epsrel=rtol, epsabs=atol * math.exp(min(max(-shift, -700.0), 700.0)), limit=400)
    if val > 0:
        return math.log(val) + shift
    return _loglinear_log_integral(lo, hi, la, lb)


def _loglinear_log_integral(lo, hi, la, lb):
    # exact integral of exp of the linear interpolant between (lo, la) and (hi, lb)
    if la == -math.inf and lb == -math.inf:
        return -math.inf
    if la == -math.inf or lb == -math.inf:
        return -math.inf
    h = hi - lo
    d = lb - la
    m = max(la, lb)
    if abs(d) < 1e-12:
        return m + math.log(h)
    return m + math.log(h) + math.log(-math.expm1(-abs(d))) - math.log(abs(d))


# --------------------------------------------------------------------------
# convergence conditions


def theorem1_log_integrand(spec: NormalizerSpec, epsilon: float) -> Callable:
    """``log[psi(x) q(x) exp(-eps q(x) / g(psi(x) + ln 2))]``."""
    fam, g = spec.family, spec.g

    def logf(x):
        psi = float(fam.psi(x))
        q = float(fam.q_inverse(x))
        if psi <= 0 or q <= 0:
            return -math.inf
        return math.log(psi) + math.log(q) - epsilon * q / float(g(psi + LN2))

    return logf


def check_theorem1(spec: NormalizerSpec, epsilon: float, **kw) -> FinitenessVerdict:
    """Upper-part integrability condition; with ``g = 1`` the bounded-norm form."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return improper_integral(theorem1_log_integrand(spec, epsilon), 0.0, log=True, **kw)


def _check_theorem2_cond3(spec, model, xs):
    g0 = float(spec.g(0.0))
    lhs = np.array([float(spec.family.psi(x)) - float(model.kappa(x * float(spec.g(x)) / g0)) for x in xs])
    rhs = np.asarray(model.C0(xs), dtype=float) * np.ones_like(xs)
    bad = lhs < rhs - 1e-9 * np.maximum(1.0, np.abs(rhs))
    return None if not bad.any() else float(xs[np.argmax(bad)])


def check_theorem2(spec: NormalizerSpec, model: TailModel, epsilon: float, A: float, **kw):
    """Both lower-part integrability conditions; returns ``(first, second)`` verdicts.

    The first integral, over ``y in [A, inf)``, is evaluated after the exact
    substitution ``y = exp(psi(t))``: its integrand decays only like
    ``exp(-c exp(eps sqrt(ln y)))`` in ``y``, so doubling blocks in ``y``
    never reach the decaying regime, while in ``t`` they do. The exponent of
    the second integral carries the factor ``eps`` in front of ``r``.
    """
    if not epsilon >= 0:
        raise ValueError("epsilon must be nonnegative")
    if not A > 0:
        raise ValueError("A must be positive")
    fam, g = spec.family, spec.g
    g0 = float(g(0.0))
    C = model.C
    notes = []
    if g0 < 1:
        notes.append("g(0) < 1")
    bad3 = _check_theorem2_cond3(spec, model, np.geomspace(1e-3, 100.0, 300))
    if bad3 is not None:
        notes.append(f"psi(x) - kappa(x g(x)/g(0)) >= C0(x) fails near x={bad3:.6g}")

    def inner1(t):
        gt = float(g(float(fam.psi(t))))
        return gt / g0 * t - epsilon / gt

    def logf1(t):
        q = float(fam.q_inverse(t))
        if q <= 0:
            return -math.inf
        psi_t = float(fam.psi(t))
        arg = psi_t - float(model.kappa(inner1(t)))
        return math.log(q) + psi_t - _half_c_exp(C, arg)

    def inner2(y):
        gy = float(g(float(fam.psi(y))))
        return y * gy / g0 - epsilon / gy

    def logf2(y):
        psi_y = float(fam.psi(y))
        q = float(fam.q_inverse(y))
        if psi_y <= 0 or q <= 0:
            return -math.inf
        gy = float(g(psi_y))
        arg = float(model.C0(y)) + epsilon * float(model.r(inner2(y))) / gy
        return math.log(psi_y) + math.log(q) + psi_y - _half_c_exp(C, arg)

    results = []
    lnA = math.log(A)
    if lnA < 0:
        return _inconclusive_pair("A < 1 is not supported by the substituted first integral")
    t_A = float(fam.psi_inverse(lnA))
    lower = [(inner1, t_A, "first"), (inner2, A, "second")]
    for (inner, start, label), logf in zip(lower, (logf1, logf2)):
        if inner(max(start, 1e-300)) < 0:
            results.append(FinitenessVerdict(Verdict.INCONCLUSIVE, math.nan, math.nan, [],
                                             f"{label} condition: inner argument negative at the lower limit"))
            continue
        if start == 0.0:
            v = improper_integral(logf, 0.0, log=True, **kw)
        else:
            v = improper_integral(logf, start, log=True, **kw)
        if notes:
            v.message = "; ".join(filter(None, [v.message, *notes]))
        results.append(v)
    return tuple(results)


def _half_c_exp(C, arg):
    # (C/2) exp(arg); an overflow means the integrand underflows to an exact zero
    return 0.5 * C * math.exp(arg) if arg < 709.0 else math.inf


def _inconclusive_pair(msg):
    return tuple(FinitenessVerdict(Verdict.INCONCLUSIVE, math.nan, math.nan, [], msg) for _ in range(2))


def check_corollary2(family: OrliczFamily, model: TailModel, epsilon: float, A: float, **kw):
    """Bounded-norm form of :func:`check_theorem2` (``g = 1``)."""
    return check_theorem2(normalizer_spec(family, "const:1"), model, epsilon, A, **kw)


# --------------------------------------------------------------------------
# rate series


@dataclass(frozen=True)
class RateParams:
    alpha: float
    epsilon: float = 0.0
    f: Callable | float = 1.0
    c0: float | None = None

    def validate(self, xs=None) -> list[str]:
        xs = np.geomspace(1.0, 1e6, 200) if xs is None else np.asarray(xs, dtype=float)
        fv = self.f if not callable(self.f) else np.asarray(self.f(xs), dtype=float)
        problems = []
        if np.any(np.asarray(fv) < 1):
            problems.append("f must satisfy f(x) >= 1 for x >= 1")
        if self.c0 is not None and np.any(np.asarray(fv) < self.c0):
            problems.append("f falls below c0")
        return problems


def _theorem3_block(params, lo, hi):
    """Sum of (mj)^(-alpha-f(mj/kn)) over lo < max(m, j) <= hi."""
    alpha, f = params.alpha, params.f
    total = []
    for m in range(1, hi + 1):
        j_start = lo + 1 if m <= lo else 1
        for j in range(j_start, hi + 1):
            mj = m * j
            kn = np.outer(np.arange(1, m + 1), np.arange(1, j + 1))
            fv = np.asarray(f(mj / kn), dtype=float)
            total.append(float(np.sum(np.exp(-(alpha + fv) * math.log(mj)))))
    return math.fsum(total)


def theorem3_partial_sum(params: RateParams, cap: int, time_budget: float = 60.0,
                         ratio_threshold: float = 0.95, k: int = 4):
    """Partial sums ``S_N`` of the quadruple rate series for ``N = 1, 2, 4, ... <= cap``.

    Constant ``f = c`` uses the exact factorization
    ``S_N = (sum_{m<=N} m^(1-alpha-c))^2``; a callable ``f`` is summed
    directly until ``time_budget`` seconds are spent. The verdict applies
    the block test to the increments ``S_2N - S_N``: *finite* when the last
    ``k`` increment ratios stay below ``ratio_threshold``, *diverges* when
    ``k`` consecutive increments fail to decrease.
    """
    if cap < 4:
        raise ValueError("cap must be at least 4")
    Ns = [1]
    while Ns[-1] * 2 <= cap:
        Ns.append(Ns[-1] * 2)
    sums = []
    started = time.monotonic()
    if not callable(params.f):
        expo = 1.0 - params.alpha - float(params.f)
        m = np.arange(1, Ns[-1] + 1, dtype=float)
        cums = np.cumsum(m**expo)
        sums = [float(cums[N - 1] ** 2) for N in Ns]
    else:
        acc = 0.0
        prev = 0
        for N in Ns:
            if sums and time.monotonic() - started > time_budget:
                break
            acc += _theorem3_block(params, prev, N)
            sums.append(acc)
            prev = N
    incs = [sums[0]] + [b - a for a, b in zip(sums[:-1], sums[1:])]
    log_incs = [math.log(v) if v > 0 else -math.inf for v in incs]
    verdict, ratio = _classify(log_incs, 1.0 / ratio_threshold, None, k, k)
    segs = [((Ns[i - 1] if i else 0, Ns[i]), incs[i]) for i in range(len(incs))]
    msg = "" if len(sums) == len(Ns) else f"time budget reached at N={Ns[len(sums) - 1]}"
    v = FinitenessVerdict(verdict or Verdict.INCONCLUSIVE, sums[-1], ratio, segs, msg,
                          math.log(sums[-1]) if sums[-1] > 0 else -math.inf)
    return list(zip(Ns[: len(sums)], sums)), v


@dataclass
class Theorem4Report:
    condition_ii: bool
    condition_iii: bool
    C1: float | None
    C2: float
    C2_estimated: bool
    threshold: float
    alpha: float
    epsilon: float
    diverges: bool
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_theorem4(family: OrliczFamily, model: TailModel, epsilon: float, alpha: float,
                   n_grid: int = 2000) -> Theorem4Report:
    """Grid check of the lower-tail and growth conditions behind divergence of the rate series.

    Verifies ``exp(-kappa(x)) >= C1 exp(-B psi(x))`` and
    ``q(x + eps) / psi(x) <= C2`` on ``[x0, x0 * 2^10]`` and reports the
    threshold ``2 - B (1 + C2 eps)`` below which the series diverges.
    """
    if model.B is None or model.x0 is None:
        raise ValueError("tail model must carry B and x0")
    x0, B = float(model.x0), float(model.B)
    xs = np.geomspace(x0, x0 * 2**10, n_grid)
    failures = []
    ok_ii = True
    if model.C1 is None or not model.C1 > 0:
        ok_ii = False
        failures.append("C1 missing or nonpositive")
    else:
        lhs = -np.asarray(model.kappa(xs), dtype=float)
        rhs = math.log(model.C1) - B * np.asarray(family.psi(xs), dtype=float)
        bad = lhs < rhs - 1e-12 * np.maximum(1.0, np.abs(rhs))
        if bad.any():
            ok_ii = False
            failures.append(f"(ii) fails at x={float(xs[np.argmax(bad)]):.6g}")
    ratio = np.asarray(family.q_inverse(xs + epsilon), dtype=float) / np.asarray(family.psi(xs), dtype=float)
    sup_grid = float(np.max(ratio))
    if model.C2 is None:
        C2, estimated, ok_iii = sup_grid, True, math.isfinite(sup_grid)
    else:
        C2, estimated = float(model.C2), False
        ok_iii = sup_grid <= C2 * (1 + 1e-12)
        if not ok_iii:
            failures.append(f"(iii) fails at x={float(xs[np.argmax(ratio)]):.6g}: ratio {sup_grid:.6g} > C2")
    threshold = 2.0 - B * (1.0 + C2 * epsilon)
    return Theorem4Report(
        condition_ii=ok_ii,
        condition_iii=ok_iii,
        C1=model.C1,
        C2=C2,
        C2_estimated=estimated,
        threshold=threshold,
        alpha=alpha,
        epsilon=epsilon,
        diverges=ok_ii and ok_iii and alpha < threshold,
        failures=failures,
    )
