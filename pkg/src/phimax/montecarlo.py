"""Replicated running-maxima experiments.

One pass over the replications feeds every statistic: window moments and
exceedance counts, per-shell histograms for the grouped statistics, and
exceedance count grids for the rate series. Each replication is a pure
function of ``(seed, replication index)``; replications run in a thread pool
in fixed-size batches and are merged strictly in index order, so the report
does not depend on the number of workers.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from phimax.conditions import make_g, parse_g, NormalizerSpec
from phimax.maxima import normalizer_grid, prefix_max
from phimax.orlicz import family_from_dict
from phimax.simulate import sample, validate_distribution
from phimax.tails import log_mgf_from_dict, tau_phi_estimate, upper_tail_bound

SQUARE_LADDER = [(31, 31), (62, 62), (125, 125), (250, 250), (500, 500), (1000, 1000)]
ASPECT_LADDER = [(8, 31), (16, 62), (31, 125), (62, 250), (125, 500), (250, 1000)]
FALLBACK_LADDER = [(8, 8), (16, 16), (32, 32), (64, 64), (128, 128), (256, 256)]
GROUP_THRESHOLDS = [10, 20, 100, 300, 600, 1000]
TAIL_REALIZATION = 2**40
Z975 = float(norm.ppf(0.975))


def scaled_thresholds(extent: int, reference: int = 1200, thresholds=GROUP_THRESHOLDS) -> list[int]:
    """Group thresholds rescaled from a ``reference`` grid side to ``extent``, kept strictly increasing."""
    out = []
    for r in thresholds:
        v = max(1, round(r * extent / reference))
        if out and v <= out[-1]:
            v = out[-1] + 1
        out.append(v)
    return out


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    distribution: dict
    family: dict
    seed: int
    replications: int = 1000
    g: dict = field(default_factory=lambda: {"kind": "const", "c": 1.0})
    extent: tuple[int, int] | None = None
    window_sets: dict = field(default_factory=dict)
    group_thresholds: list = field(default_factory=list)
    epsilons: list = field(default_factory=list)
    rate: dict | None = None
    tail_check: dict | None = None
    histogram_bins: int = 2**18
    histogram_range: float = 8.0
    max_ci_halfwidth: float = 0.05
    batch: int = 16

    _FIELDS = ("distribution", "family", "seed", "replications", "g", "extent", "window_sets",
               "group_thresholds", "epsilons", "rate", "tail_check", "histogram_bins",
               "histogram_range", "max_ci_halfwidth", "batch")

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.distribution = validate_distribution(self.distribution)
        try:
            family_from_dict(self.family)
        except ValueError as exc:
            raise ValueError(f"family: {exc}") from None
        self.g = parse_g(self.g)
        make_g(self.g)
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ValueError("replications must be an integer >= 1")
        sets = {}
        for name, ws in dict(self.window_sets).items():
            cleaned = []
            for i, w in enumerate(ws):
                if len(w) != 2 or int(w[0]) < 1 or int(w[1]) < 1:
                    raise ValueError(f"window_sets.{name}[{i}] must be a pair of positive integers")
                cleaned.append((int(w[0]), int(w[1])))
            sets[str(name)] = cleaned
        self.window_sets = sets
        th = [int(r) for r in self.group_thresholds]
        if any(b <= a for a, b in zip(th[:-1], th[1:])) or any(r < 1 for r in th):
            raise ValueError("group_thresholds must be positive and strictly increasing")
        self.group_thresholds = th
        self.epsilons = [float(e) for e in self.epsilons]
        if self.rate is not None:
            r = dict(self.rate)
            for key in ("alphas", "epsilons", "N_max"):
                if key not in r:
                    raise ValueError(f"rate.{key} is required")
            if not r["alphas"] or not r["epsilons"]:
                raise ValueError("rate.alphas and rate.epsilons must be non-empty")
            if int(r["N_max"]) < 2:
                raise ValueError("rate.N_max must be at least 2")
            self.rate = {"alphas": [float(a) for a in r["alphas"]], "epsilons": [float(e) for e in r["epsilons"]],
                         "N_max": int(r["N_max"])}
        if self.tail_check is not None:
            t = dict(self.tail_check)
            if not t.get("x"):
                raise ValueError("tail_check.x must be a non-empty list")
            if any(float(x) <= 0 for x in t["x"]):
                raise ValueError("tail_check.x values must be positive")
            self.tail_check = {"x": [float(x) for x in t["x"]], "tau": None if t.get("tau") is None else float(t["tau"]),
                               "draws": int(t.get("draws", 10**6))}
        if self.histogram_bins < 2 or self.histogram_bins % 2:
            raise ValueError("histogram_bins must be an even integer >= 2")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        need_m = [w[0] for ws in self.window_sets.values() for w in ws]
        need_j = [w[1] for ws in self.window_sets.values() for w in ws]
        if self.rate is not None:
            need_m.append(self.rate["N_max"])
            need_j.append(self.rate["N_max"])
        if self.extent is None:
            if not need_m:
                if self.group_thresholds:
                    raise ValueError("extent is required when only group statistics are requested")
                self.extent = None
                return
            self.extent = (max(need_m), max(need_j))
        else:
            self.extent = (int(self.extent[0]), int(self.extent[1]))
            if min(self.extent) < 1:
                raise ValueError("extent must be positive")
            for name, ws in self.window_sets.items():
                for i, w in enumerate(ws):
                    if w[0] > self.extent[0] or w[1] > self.extent[1]:
                        raise ValueError(f"window_sets.{name}[{i}] = {w} exceeds extent {self.extent}")
            if self.rate is not None and self.rate["N_max"] > min(self.extent):
                raise ValueError(f"rate.N_max exceeds extent {self.extent}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ValueError("experiment config must be a JSON object")
        unknown = set(d) - set(cls._FIELDS)
        if unknown:
            raise ValueError(f"unknown config field(s): {sorted(unknown)}")
        for key in ("distribution", "family", "seed"):
            if key not in d:
                raise ValueError(f"{key} is required")
        kw = copy.deepcopy(d)
        if kw.get("extent") is not None:
            kw["extent"] = tuple(kw["extent"])
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {}
        for k in self._FIELDS:
            v = getattr(self, k)
            if isinstance(v, tuple):
                v = list(v)
            if k == "window_sets":
                v = {name: [list(w) for w in ws] for name, ws in v.items()}
            out[k] = copy.deepcopy(v)
        return out

    def normalizer_spec(self) -> NormalizerSpec:
        return NormalizerSpec(g=make_g(self.g), family=family_from_dict(self.family), g_desc=self.g)

    def windows(self) -> list[tuple[str, int, int]]:
        return [(f"{name}-{i + 1}", m, j) for name, ws in self.window_sets.items() for i, (m, j) in enumerate(ws)]


# --------------------------------------------------------------------------
# streaming accumulators


class StreamingMoments:
    """Count, sum and sum of squares per slot; merged in a fixed order."""

    def __init__(self, size: int):
        self.count = 0
        self.total = np.zeros(size)
        self.total_sq = np.zeros(size)

    def add(self, values: np.ndarray) -> None:
        self.count += 1
        self.total += values
        self.total_sq += values * values

    def mean(self) -> np.ndarray:
        return self.total / self.count

    def rms(self) -> np.ndarray:
        return np.sqrt(self.total_sq / self.count)


@dataclass
class _Plan:
    extent: tuple[int, int]
    a: np.ndarray
    win_idx: tuple
    eps: np.ndarray
    shells: list
    shell_order: np.ndarray | None
    shell_starts: np.ndarray | None
    shell_of_sorted: np.ndarray | None
    bins: int
    half_range: float
    rate_n: int
    rate_eps: np.ndarray


def _make_plan(cfg: ExperimentConfig) -> _Plan:
    m, j = cfg.extent
    spec = cfg.normalizer_spec()
    a = normalizer_grid(spec, m, j)
    wins = cfg.windows()
    win_idx = (np.array([w[1] - 1 for w in wins], dtype=np.int64), np.array([w[2] - 1 for w in wins], dtype=np.int64))
    shells, order, starts, shell_of = [], None, None, None
    th = [r for r in cfg.group_thresholds if r <= max(m, j)]
    if th:
        r_grid = np.maximum.outer(np.arange(1, m + 1), np.arange(1, j + 1))
        shell_id = np.searchsorted(np.array(th), r_grid.ravel(), side="right") - 1  # -1: below the first threshold
        keep = np.flatnonzero(shell_id >= 0)
        order = keep[np.argsort(shell_id[keep], kind="stable")]
        sorted_ids = shell_id[order]
        starts = np.searchsorted(sorted_ids, np.arange(len(th)))
        shell_of = sorted_ids
        shells = th
    rate_n = cfg.rate["N_max"] if cfg.rate else 0
    rate_eps = np.array(cfg.rate["epsilons"]) if cfg.rate else np.empty(0)
    return _Plan((m, j), a, win_idx, np.array(cfg.epsilons), shells, order, starts, shell_of,
                 cfg.histogram_bins, cfg.histogram_range, rate_n, rate_eps)


def _replicate(cfg: ExperimentConfig, plan: _Plan, r: int) -> dict:
    m, j = plan.extent
    x = sample(cfg.distribution, cfg.seed, m, j, realization=r).values
    y = prefix_max(x)
    y -= plan.a
    out = {}
    wy = y[plan.win_idx]
    out["window_y"] = wy
    out["window_exceed"] = wy[:, None] > plan.eps[None, :]
    if plan.shells:
        v = y.ravel()[plan.shell_order]
        starts = plan.shell_starts
        out["shell_min"] = np.minimum.reduceat(v, starts)
        out["shell_max"] = np.maximum.reduceat(v, starts)
        out["shell_sum"] = np.add.reduceat(v, starts)
        width = 2 * plan.half_range / plan.bins
        b = np.floor((v + plan.half_range) / width)
        b = np.clip(b, -1, plan.bins).astype(np.int64) + 1  # 0 underflow, bins+1 overflow
        out["hist"] = np.bincount(plan.shell_of_sorted * (plan.bins + 2) + b,
                                  minlength=len(plan.shells) * (plan.bins + 2))
    if plan.rate_n:
        sub = y[: plan.rate_n, : plan.rate_n]
        out["rate_exceed"] = sub[None, :, :] > plan.rate_eps[:, None, None]
    return out


class _Accumulator:
    def __init__(self, plan: _Plan):
        self.plan = plan
        n_win = plan.win_idx[0].size
        self.moments = StreamingMoments(n_win)
        self.exceed = np.zeros((n_win, plan.eps.size), dtype=np.int64)
        k = len(plan.shells)
        self.shell_min = np.full(k, np.inf)
        self.shell_max = np.full(k, -np.inf)
        self.shell_sum = np.zeros(k)
        self.hist = np.zeros(k * (plan.bins + 2), dtype=np.int64) if k else None
        self.rate_counts = (np.zeros((plan.rate_eps.size, plan.rate_n, plan.rate_n), dtype=np.int64)
                            if plan.rate_n else None)
        self.n = 0

    def merge(self, part: dict) -> None:
        self.n += 1
        self.moments.add(part["window_y"])
        self.exceed += part["window_exceed"]
        if self.hist is not None:
            np.minimum(self.shell_min, part["shell_min"], out=self.shell_min)
            np.maximum(self.shell_max, part["shell_max"], out=self.shell_max)
            self.shell_sum += part["shell_sum"]
            self.hist += part["hist"]
        if self.rate_counts is not None:
            self.rate_counts += part["rate_exceed"]


def _run_pass(cfg: ExperimentConfig, threads: int | None) -> _Accumulator:
    plan = _make_plan(cfg)
    acc = _Accumulator(plan)
    threads = max(1, int(threads or os.cpu_count() or 1))
    batch = max(cfg.batch, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, cfg.replications, batch):
            idx = range(start, min(start + batch, cfg.replications))
            for part in pool.map(lambda r: _replicate(cfg, plan, r), idx):
                acc.merge(part)
    return acc


# --------------------------------------------------------------------------
# summaries


def _hist_quantile(counts: np.ndarray, q: float, lo: float, width: float, vmin: float, vmax: float) -> float:
    """Quantile (linear-interpolation definition) from binned counts; bins 0 and -1 hold out-of-range mass."""
    n = int(counts.sum())
    rank = q * (n - 1)
    cum = np.cumsum(counts)
    i = int(np.searchsorted(cum, rank, side="right"))
    if i == 0:
        return vmin
    if i == counts.size - 1:
        return vmax
    before = cum[i - 1]
    frac = (rank - before + 0.5) / counts[i]
    val = lo + (i - 1 + frac) * width
    return float(min(max(val, vmin), vmax))


def _fold_abs(counts: np.ndarray, bins: int) -> np.ndarray:
    """Histogram of ``|Y|`` on ``[0, H]`` from a histogram of ``Y`` on ``[-H, H]`` (plus out-of-range)."""
    inner = counts[1:-1]
    half = bins // 2
    folded = inner[half:] + inner[:half][::-1]
    return np.concatenate([[0], folded, [counts[0] + counts[-1]]])


def wilson_interval(successes: int, n: int, z: float = Z975) -> tuple[float, float]:
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def binomial_interval(successes: int, n: int, z: float = Z975) -> tuple[float, float, str]:
    """Normal-approximation interval, switching to Wilson under 10 successes or failures."""
    if successes < 10 or n - successes < 10:
        lo, hi = wilson_interval(successes, n, z)
        return lo, hi, "wilson"
    p = successes / n
    half = z * math.sqrt(p * (1 - p) / n)
    return max(0.0, p - half), min(1.0, p + half), "normal"


def _rmse_rows(cfg, acc) -> list[dict]:
    rms = acc.moments.rms() if acc.n else np.empty(0)
    mean = acc.moments.mean() if acc.n else np.empty(0)
    return [{"window_id": wid, "m": m, "j": j, "rmse": float(rms[i]), "mean": float(mean[i]), "n_reps": acc.n}
            for i, (wid, m, j) in enumerate(cfg.windows())]


def _group_rows(cfg, acc) -> list[dict]:
    plan = acc.plan
    rows = []
    stride = plan.bins + 2
    width = 2 * plan.half_range / plan.bins
    k = len(plan.shells)
    shell_counts = acc.hist.reshape(k, stride) if k else None
    for gi, r in enumerate(cfg.group_thresholds):
        if gi >= k:
            rows.append({"group": gi + 1, "r_min": r, "count": 0, "min": None, "q1": None, "median": None,
                         "q3": None, "max": None, "mean": None, "median_abs": None})
            continue
        counts = shell_counts[gi:].sum(axis=0)
        n = int(counts.sum())
        vmin, vmax = float(acc.shell_min[gi:].min()), float(acc.shell_max[gi:].max())
        qs = [_hist_quantile(counts, q, -plan.half_range, width, vmin, vmax) for q in (0.25, 0.5, 0.75)]
        abs_counts = _fold_abs(counts, plan.bins)
        amax = max(abs(vmin), abs(vmax))
        amin = 0.0 if vmin <= 0 <= vmax else min(abs(vmin), abs(vmax))
        med_abs = _hist_quantile(abs_counts, 0.5, 0.0, width, amin, amax)
        rows.append({"group": gi + 1, "r_min": r, "count": n, "min": vmin, "q1": qs[0], "median": qs[1],
                     "q3": qs[2], "max": vmax, "mean": math.fsum(acc.shell_sum[gi:]) / n, "median_abs": med_abs})
    return rows


def _exceedance_rows(cfg, acc, warnings) -> list[dict]:
    rows = []
    for i, (wid, m, j) in enumerate(cfg.windows()):
        for e_i, eps in enumerate(cfg.epsilons):
            s = int(acc.exceed[i, e_i])
            lo, hi, method = binomial_interval(s, acc.n)
            if (hi - lo) / 2 > cfg.max_ci_halfwidth:
                warnings.append(f"CI half-width {(hi - lo) / 2:.3g} exceeds {cfg.max_ci_halfwidth} at {wid}, eps={eps}; "
                                "more replications needed")
            rows.append({"window_id": wid, "m": m, "j": j, "epsilon": eps, "successes": s, "n_reps": acc.n,
                         "p_hat": s / acc.n, "ci_low": lo, "ci_high": hi, "method": method})
    return rows


def rate_levels(n_max: int) -> list[int]:
    """Doubling partial-sum levels ``1, 2, 4, ...`` ending exactly at ``n_max``."""
    levels = [1]
    while levels[-1] * 2 <= n_max:
        levels.append(levels[-1] * 2)
    if levels[-1] != n_max:
        levels.append(n_max)
    return levels


def rate_partial_sums(prob: np.ndarray, alpha: float, levels) -> list[float]:
    """``S_N = sum_{m, j <= N} (mj)^(-alpha) prob[m-1, j-1]`` at each level ``N``."""
    n = prob.shape[0]
    idx = np.arange(1, n + 1, dtype=float)
    w = np.outer(idx**-alpha, idx**-alpha)
    cum = np.cumsum(np.cumsum(w * prob, axis=0), axis=1)
    return [float(cum[N - 1, N - 1]) for N in levels]


def classify_rate(sums: list[float], stable_tol: float = 1e-3, growth_tol: float = 0.1) -> tuple[str, float]:
    """Relative increment over the last doubling: ``stabilizing`` below ``stable_tol``, ``growing`` above ``growth_tol``."""
    if sums[-1] == 0.0:
        return "zero", 0.0
    inc = (sums[-1] - sums[-2]) / sums[-1]
    if inc < stable_tol:
        return "stabilizing", inc
    if inc > growth_tol:
        return "growing", inc
    return "undetermined", inc


def _rate_rows(cfg, acc) -> tuple[list[dict], list[dict]]:
    levels = rate_levels(cfg.rate["N_max"])
    rows, trends = [], []
    for e_i, eps in enumerate(cfg.rate["epsilons"]):
        prob = acc.rate_counts[e_i] / acc.n
        for alpha in cfg.rate["alphas"]:
            sums = rate_partial_sums(prob, alpha, levels)
            rows += [{"alpha": alpha, "epsilon": eps, "N": N, "partial_sum": s} for N, s in zip(levels, sums)]
            trend, inc = classify_rate(sums)
            trends.append({"alpha": alpha, "epsilon": eps, "trend": trend, "last_relative_increment": inc})
    return rows, trends


# --------------------------------------------------------------------------
# public runners


@dataclass
class ExperimentReport:
    config: dict
    rmse: list = field(default_factory=list)
    groups: list = field(default_factory=list)
    exceedance: list = field(default_factory=list)
    rate: list = field(default_factory=list)
    rate_trends: list = field(default_factory=list)
    tail_check: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.config.get("seed"),
            "rmse": self.rmse,
            "groups": self.groups,
            "exceedance": self.exceedance,
            "rate": self.rate,
            "rate_trends": self.rate_trends,
            "tail_check": self.tail_check,
            "warnings": self.warnings,
        }

    def write(self, outdir) -> list[Path]:
        """Write ``report.json`` and the CSV tables; returns the written paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        tables = [
            ("rmse.csv", ["window_id", "m", "j", "rmse", "n_reps"], self.rmse),
            ("groups.csv", ["group", "r_min", "count", "min", "q1", "median", "q3", "max", "mean", "median_abs"], self.groups),
            ("rate.csv", ["alpha", "epsilon", "N", "partial_sum"], self.rate),
            ("exceedance.csv", ["window_id", "m", "j", "epsilon", "successes", "n_reps", "p_hat", "ci_low",
                                "ci_high", "method"], self.exceedance),
            ("tail_check.csv", ["x", "empirical", "bound", "sigma", "draws", "violation"], self.tail_check),
        ]
        for name, cols, rows in tables:
            path = outdir / name
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                for row in rows:
                    w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                                for c in cols])
            written.append(path)
        path = outdir / "report.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written


def _as_config(config) -> ExperimentConfig:
    return config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)


def run_experiment(config, threads: int | None = None) -> ExperimentReport:
    """Every requested statistic from a single pass over the replications."""
    cfg = _as_config(config)
    report = ExperimentReport(config=cfg.to_dict())
    if cfg.extent is not None:
        acc = _run_pass(cfg, threads)
        report.rmse = _rmse_rows(cfg, acc)
        if cfg.group_thresholds:
            report.groups = _group_rows(cfg, acc)
        report.exceedance = _exceedance_rows(cfg, acc, report.warnings)
        if cfg.rate:
            report.rate, report.rate_trends = _rate_rows(cfg, acc)
    if cfg.tail_check:
        report.tail_check = empirical_tail_check(cfg)
    return report


def _subconfig(config, **changes) -> ExperimentConfig:
    cfg = _as_config(config)
    d = cfg.to_dict()
    d.update(changes)
    return ExperimentConfig.from_dict(d)


def run_rmse_experiment(config, threads: int | None = None) -> list[dict]:
    """RMSE of ``Y`` at every configured window across replications."""
    cfg = _subconfig(config, group_thresholds=[], rate=None, tail_check=None, epsilons=[])
    return _rmse_rows(cfg, _run_pass(cfg, threads))


def run_group_stats(config, threads: int | None = None) -> list[dict]:
    """Five-number summary, mean and median ``|Y|`` of ``Y`` pooled over ``m v j >= r_i``."""
    cfg = _subconfig(config, window_sets={}, rate=None, tail_check=None, epsilons=[])
    return _group_rows(cfg, _run_pass(cfg, threads))


def run_rate_series(config, threads: int | None = None) -> tuple[list[dict], list[dict]]:
    """Partial sums of ``(mj)^(-alpha) P(Y+ > eps)`` over doubling ``N`` and their trend labels."""
    cfg = _subconfig(config, window_sets={}, group_thresholds=[], tail_check=None, epsilons=[])
    if cfg.rate is None:
        raise ValueError("config has no rate block")
    return _rate_rows(cfg, _run_pass(cfg, threads))


def empirical_tail_check(config) -> list[dict]:
    """Empirical ``P(X >= x)`` against ``exp(-psi(x / tau))`` with 3-sigma binomial slack.

    ``tau`` comes from the config or, when absent, from the MGF of the
    distribution. Draws use a dedicated realization so they never coincide
    with an experiment replication.
    """
    cfg = _as_config(config)
    tc = cfg.tail_check
    if tc is None:
        raise ValueError("config has no tail_check block")
    family = family_from_dict(cfg.family)
    tau = tc["tau"]
    if tau is None:
        tau = tau_phi_estimate(log_mgf_from_dict(cfg.distribution), family).tau
    draws = tc["draws"]
    cols = 1000 if draws >= 1000 else draws
    rows = -(-draws // cols)
    x = sample(cfg.distribution, cfg.seed, rows, cols, realization=TAIL_REALIZATION).values.ravel()[:draws]
    out = []
    for pt in tc["x"]:
        p = float(np.count_nonzero(x >= pt)) / draws
        sigma = math.sqrt(p * (1 - p) / draws)
        bound = float(upper_tail_bound(family, tau, pt)) if tau > 0 else 0.0
        out.append({"x": pt, "empirical": p, "bound": bound, "sigma": sigma, "draws": draws, "tau": tau,
                    "violation": p > bound + 3 * sigma})
    return out
