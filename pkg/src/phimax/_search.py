"""Small one-dimensional search routines shared by the numeric modules."""
import math

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


def golden_max(f, a, b, tol=1e-10, max_iter=500):
    """Golden-section search for the maximum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x_best, f_best)`` once the bracket is narrower than ``tol``.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if h <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = INV_PHI * h
            d = a + INV_PHI * h
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def log_bracket_max(g, s0=0.0, s_min=-745.0, s_max=709.0):
    """Bracket the maximum of a unimodal ``g`` over log-scale abscissas.

    Steps outward from ``s0`` with doubling stride in the direction of
    increase. Returns ``(lo, hi)`` or raises ``OverflowError`` when the
    upper limit is hit while ``g`` is still increasing.
    """
    g0 = g(s0)
    if g(s0 + 1.0) > g0:
        direction = 1.0
    elif g(s0 - 1.0) > g0:
        direction = -1.0
    else:
        return s0 - 1.0, s0 + 1.0
    prev, prev_val = s0, g0
    step = 1.0
    while True:
        cur = s0 + direction * step
        if cur > s_max:
            raise OverflowError("objective still increasing at the upper search limit")
        if cur < s_min:
            return s_min, prev
        cur_val = g(cur)
        if cur_val < prev_val:
            back = s0 + direction * step / 4 if step >= 4 else s0
            return (min(back, cur), max(back, cur))
        prev, prev_val = cur, cur_val
        step *= 2


def sup_bisect(pred, iters=200):
    """Supremum of ``{u >= 0 : pred(u)}`` for a predicate true on an initial segment.

    ``pred(0)`` is assumed true. Works in relative precision for both tiny
    and huge answers.
    """
    if pred(1.0):
        lo, hi = 1.0, 2.0
        while pred(hi):
            lo, hi = hi, hi * 2
            if hi > 1e300:
                raise OverflowError("predicate holds beyond 1e300")
    else:
        lo, hi = 0.5, 1.0
        while not pred(lo):
            hi, lo = lo, lo / 2
            if lo < 1e-300:
                return 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo
