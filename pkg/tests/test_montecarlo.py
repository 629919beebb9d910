import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from phimax.conditions import normalizer_spec
from phimax.maxima import normalizer_grid, prefix_max
from phimax.montecarlo import (
    ExperimentConfig,
    StreamingMoments,
    binomial_interval,
    classify_rate,
    empirical_tail_check,
    rate_levels,
    rate_partial_sums,
    run_experiment,
    run_group_stats,
    run_rate_series,
    run_rmse_experiment,
    scaled_thresholds,
    wilson_interval,
)
from phimax.orlicz import make_gaussian_family, make_weibull_conjugate_family
from phimax.simulate import sample

WEIBULL = {"kind": "weibull", "theta": 9.0, "b": 1.25}
GAUSSIAN = {"kind": "gaussian"}


def base(**kw):
    cfg = {"distribution": GAUSSIAN, "family": GAUSSIAN, "seed": 1, "replications": 20}
    cfg.update(kw)
    return cfg


def pooled_y(cfg, threshold):
    """Oracle: every replication recomputed directly, Y pooled over m v j >= threshold."""
    c = ExperimentConfig.from_dict(cfg)
    m, j = c.extent
    a = normalizer_grid(normalizer_spec(make_gaussian_family()), m, j)
    r = np.maximum.outer(np.arange(1, m + 1), np.arange(1, j + 1))
    vals = []
    for rep in range(c.replications):
        y = prefix_max(sample(c.distribution, c.seed, m, j, realization=rep).values) - a
        vals.append(y[r >= threshold])
    return np.concatenate(vals)


# ---------------------------------------------------------------- config

def test_config_requires_seed_and_fields():
    with pytest.raises(ValueError, match="seed"):
        ExperimentConfig.from_dict({"distribution": GAUSSIAN, "family": GAUSSIAN})
    with pytest.raises(ValueError, match="unknown"):
        ExperimentConfig.from_dict(base(colour="red"))
    with pytest.raises(ValueError, match="replications"):
        ExperimentConfig.from_dict(base(replications=0))


def test_config_rejects_bad_thresholds_and_windows():
    with pytest.raises(ValueError, match="strictly increasing"):
        ExperimentConfig.from_dict(base(extent=[10, 10], group_thresholds=[5, 5]))
    with pytest.raises(ValueError, match=r"window_sets\.w\[0\]"):
        ExperimentConfig.from_dict(base(extent=[10, 10], window_sets={"w": [[20, 2]]}))
    with pytest.raises(ValueError, match="N_max"):
        ExperimentConfig.from_dict(base(extent=[10, 10], rate={"alphas": [1], "epsilons": [0.1], "N_max": 20}))
    with pytest.raises(ValueError, match=r"rate\.alphas"):
        ExperimentConfig.from_dict(base(rate={"epsilons": [0.1], "N_max": 8}))


def test_config_round_trip():
    cfg = ExperimentConfig.from_dict(base(window_sets={"s": [[4, 4], [8, 8]]}, epsilons=[0.1]))
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    assert cfg.extent == (8, 8)


def test_scaled_thresholds():
    assert scaled_thresholds(1200) == [10, 20, 100, 300, 600, 1000]
    th = scaled_thresholds(256)
    assert th == [2, 4, 21, 64, 128, 213]
    assert scaled_thresholds(20) == [1, 2, 3, 5, 10, 17]


# ---------------------------------------------------------------- RMSE

def test_streaming_moments_match_two_pass():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(500, 7))
    sm = StreamingMoments(7)
    for row in data:
        sm.add(row)
    assert np.allclose(sm.rms(), np.sqrt(np.mean(data**2, axis=0)), rtol=1e-12, atol=0)
    assert np.allclose(sm.mean(), data.mean(axis=0), rtol=1e-12, atol=1e-15)


def test_rmse_matches_direct_recomputation():
    cfg = base(window_sets={"s": [[3, 3], [9, 9], [16, 16]]})
    rows = run_rmse_experiment(cfg, threads=1)
    a = normalizer_grid(normalizer_spec(make_gaussian_family()), 16, 16)
    for row in rows:
        ys = [prefix_max(sample(GAUSSIAN, 1, 16, 16, realization=r).values)[row["m"] - 1, row["j"] - 1]
              - a[row["m"] - 1, row["j"] - 1] for r in range(20)]
        assert row["rmse"] == pytest.approx(math.sqrt(np.mean(np.square(ys))), rel=1e-12)
        assert row["n_reps"] == 20


def test_degenerate_field_rmse_equals_normalizer():
    cfg = base(distribution={"kind": "constant", "value": 0.0}, window_sets={"s": [[2, 2], [5, 7], [30, 30]]})
    for row in run_rmse_experiment(cfg, threads=2):
        assert row["rmse"] == pytest.approx(math.sqrt(2 * math.log(row["m"] * row["j"])), rel=1e-15)


@pytest.mark.slow
def test_rmse_shrinks_with_window_over_seeds():
    wins = 0
    for seed in range(20):
        cfg = base(seed=seed, replications=200, window_sets={"nested": [[8, 8], [64, 64]]})
        small, large = run_rmse_experiment(cfg, threads=1)
        wins += large["rmse"] < small["rmse"]
    assert wins >= 19


def test_rmse_is_thread_count_independent():
    cfg = base(window_sets={"s": [[5, 5], [20, 20]]}, replications=37, batch=4)
    assert run_rmse_experiment(cfg, threads=1) == run_rmse_experiment(cfg, threads=5)


# ---------------------------------------------------------------- groups

def test_group_stats_against_pooled_oracle():
    cfg = base(extent=[24, 24], group_thresholds=[3, 10, 20], replications=15)
    rows = run_group_stats(cfg, threads=2)
    width = 16 / 2**18
    counts = [row["count"] for row in rows]
    assert counts == sorted(counts, reverse=True) and len(set(counts)) == 3
    for row in rows:
        ys = pooled_y(cfg, row["r_min"])
        assert row["count"] == ys.size
        assert row["min"] == ys.min() and row["max"] == ys.max()
        assert row["mean"] == pytest.approx(ys.mean(), rel=1e-12)
        for key, q in (("q1", 0.25), ("median", 0.5), ("q3", 0.75)):
            assert abs(row[key] - np.quantile(ys, q)) <= 2 * width
        assert abs(row["median_abs"] - np.median(np.abs(ys))) <= 2 * width


def test_group_nesting_and_empty_groups():
    rows = run_group_stats(base(extent=[12, 12], group_thresholds=[2, 6, 12, 50], replications=3), threads=1)
    assert [r["count"] for r in rows[:3]] == [3 * (144 - 1), 3 * (144 - 25), 3 * (144 - 121)]
    assert rows[3]["count"] == 0 and rows[3]["median"] is None


def test_constant_field_group_medians():
    cfg = base(distribution={"kind": "constant", "value": 0.0}, extent=[10, 10], group_thresholds=[2, 5], replications=1)
    rows = run_group_stats(cfg, threads=1)
    a = normalizer_grid(normalizer_spec(make_gaussian_family()), 10, 10)
    r = np.maximum.outer(np.arange(1, 11), np.arange(1, 11))
    for row in rows:
        assert abs(row["median"] - np.median(-a[r >= row["r_min"]])) <= 2 * 16 / 2**18


@pytest.mark.slow
def test_weibull_group_median_abs_shrinks_over_seeds():
    wins = 0
    for seed in range(20):
        cfg = {"distribution": WEIBULL, "family": WEIBULL, "seed": seed, "replications": 200, "extent": [128, 128],
               "group_thresholds": scaled_thresholds(128)}
        rows = run_group_stats(cfg, threads=1)
        wins += rows[-1]["median_abs"] < rows[0]["median_abs"]
    assert wins >= 19


# ---------------------------------------------------------------- rate series

def test_rate_levels():
    assert rate_levels(8) == [1, 2, 4, 8]
    assert rate_levels(12) == [1, 2, 4, 8, 12]


def test_rate_partial_sums_closed_form():
    p = np.ones((4, 4))
    s = rate_partial_sums(p, 1.0, [1, 2, 4])
    harmonic = lambda n: sum(1 / k for k in range(1, n + 1))
    assert s == pytest.approx([harmonic(1) ** 2, harmonic(2) ** 2, harmonic(4) ** 2])


def test_classify_rate():
    assert classify_rate([1.0, 1.0 + 1e-5]) == ("stabilizing", pytest.approx(1e-5 / (1 + 1e-5)))
    assert classify_rate([1.0, 2.0])[0] == "growing"
    assert classify_rate([1.0, 1.05])[0] == "undetermined"
    assert classify_rate([0.0, 0.0])[0] == "zero"


def test_rate_unattainable_threshold_gives_zero_sums():
    rows, trends = run_rate_series(base(rate={"alphas": [0.0, 1.5], "epsilons": [1e3], "N_max": 16}), threads=1)
    assert all(r["partial_sum"] == 0.0 for r in rows)
    assert all(t["trend"] == "zero" for t in trends)


def test_rate_partial_sums_monotone():
    rows, _ = run_rate_series(base(rate={"alphas": [0.0, 0.7, 1.5], "epsilons": [0.0, 0.3], "N_max": 32}), threads=1)
    for alpha in (0.0, 0.7, 1.5):
        for eps in (0.0, 0.3):
            sums = [r["partial_sum"] for r in rows if r["alpha"] == alpha and r["epsilon"] == eps]
            assert all(b >= a for a, b in zip(sums, sums[1:]))


def test_rate_probabilities_track_exact_gaussian_exceedance():
    cfg = base(replications=400, rate={"alphas": [1.0], "epsilons": [0.2], "N_max": 16})
    rows, _ = run_rate_series(cfg, threads=1)
    idx = np.arange(1, 17)
    mj = np.outer(idx, idx).astype(float)
    exact = -np.expm1(mj * norm.logcdf(np.sqrt(2 * np.log(mj)) + 0.2))
    ref = rate_partial_sums(exact, 1.0, rate_levels(16))
    got = [r["partial_sum"] for r in rows]
    assert got[-1] == pytest.approx(ref[-1], rel=0.1)


def test_rate_series_requires_block():
    with pytest.raises(ValueError):
        run_rate_series(base(window_sets={"s": [[2, 2]]}))


# ---------------------------------------------------------------- exceedance and CIs

def test_wilson_and_normal_intervals():
    lo, hi, method = binomial_interval(0, 100)
    assert method == "wilson" and lo == pytest.approx(0.0, abs=1e-15) and 0 < hi < 0.05
    lo, hi, method = binomial_interval(50, 100)
    assert method == "normal" and lo == pytest.approx(0.5 - 1.959964 * 0.05, rel=1e-5)
    lo, hi = wilson_interval(3, 10)
    assert lo < 0.3 < hi


def test_exceedance_report_and_warning():
    rep = run_experiment(base(window_sets={"s": [[4, 4]]}, epsilons=[0.0, 10.0], replications=10), threads=1)
    rows = rep.exceedance
    assert [r["epsilon"] for r in rows] == [0.0, 10.0]
    assert rows[1]["successes"] == 0 and rows[1]["p_hat"] == 0.0
    assert all(0 <= r["ci_low"] <= r["p_hat"] <= r["ci_high"] <= 1 for r in rows)
    assert any("more replications" in w for w in rep.warnings)


# ---------------------------------------------------------------- tail check

def test_tail_check_gaussian():
    cfg = base(tail_check={"x": [2.0], "tau": 1.0, "draws": 10**6})
    (row,) = empirical_tail_check(cfg)
    assert row["bound"] == pytest.approx(math.exp(-2))
    assert abs(row["empirical"] - norm.sf(2.0)) < 5 * row["sigma"]
    assert not row["violation"]


def test_tail_check_weibull_with_estimated_tau():
    fam = {"kind": "weibull", "theta": 9.0, "b": 1.25, "phi_constant": "published"}
    cfg = {"distribution": WEIBULL, "family": fam, "seed": 2,
           "tail_check": {"x": [1.25, 1e-6], "draws": 200000}}
    rows = empirical_tail_check(cfg)
    assert rows[0]["tau"] == pytest.approx(0.99740, abs=1e-5)
    assert rows[0]["empirical"] == pytest.approx(0.5 * math.exp(-1), abs=5 * rows[0]["sigma"])
    assert rows[1]["bound"] == pytest.approx(1.0)
    assert not any(r["violation"] for r in rows)


# ---------------------------------------------------------------- whole report

def test_report_determinism_and_files(tmp_path):
    cfg = base(extent=[16, 16], window_sets={"s": [[4, 4], [16, 16]]}, group_thresholds=[2, 8],
               epsilons=[0.1], rate={"alphas": [0.0], "epsilons": [0.1], "N_max": 16},
               tail_check={"x": [1.0], "tau": 1.0, "draws": 5000}, replications=9, batch=2)
    r1 = run_experiment(cfg, threads=1)
    r3 = run_experiment(cfg, threads=3)
    p1 = r1.write(tmp_path / "a")
    p3 = r3.write(tmp_path / "b")
    for a, b in zip(p1, p3):
        assert a.read_bytes() == b.read_bytes()
    names = sorted(p.name for p in p1)
    assert names == ["exceedance.csv", "groups.csv", "rate.csv", "report.json", "rmse.csv", "tail_check.csv"]
    header = (tmp_path / "a" / "rmse.csv").read_text().splitlines()[0]
    assert header == "window_id,m,j,rmse,n_reps"
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["seed"] == 1
    assert ExperimentConfig.from_dict(report["config"]).to_dict() == report["config"]
