"""A small replicated study of normalized running maxima.

One config drives everything: RMSE along a window ladder, grouped statistics
over shells m v j >= r, exceedance probabilities and rate-series partial
sums. The report is identical for any number of worker threads.

Run: python demos/05_monte_carlo_study.py   (about half a minute on one core)
"""
import json
import tempfile
from pathlib import Path

from phimax.montecarlo import FALLBACK_LADDER, run_experiment, scaled_thresholds

weibull = {"kind": "weibull", "theta": 9.0, "b": 1.25}
config = {
    "distribution": weibull,
    "family": weibull,
    "seed": 2024,
    "replications": 100,
    "window_sets": {"ladder": [list(w) for w in FALLBACK_LADDER[:5]]},
    "group_thresholds": scaled_thresholds(128),
    "epsilons": [0.02, 0.05],
    "rate": {"alphas": [0.0, 1.5], "epsilons": [0.05], "N_max": 128},
    "tail_check": {"x": [0.625, 1.25], "draws": 100000},
}

report = run_experiment(config, threads=2)

print("RMSE along the ladder (falls as the window grows):")
for row in report.rmse:
    print(f"  {row['m']:4d} x {row['j']:<4d} rmse {row['rmse']:.4f}")

print("group medians of |Y| over shells m v j >= r:")
for g in report.groups:
    print(f"  r >= {g['r_min']:4d}: {g['count']:9d} values, median |Y| {g['median_abs']:.4f}")

print("exceedance P(|Y| > eps) per window:")
for e in report.exceedance:
    print(f"  {e['window_id']} eps {e['epsilon']}: {e['p_hat']:.3f} [{e['ci_low']:.3f}, {e['ci_high']:.3f}] ({e['method']})")

print("rate-series trends:", [(t["alpha"], t["trend"]) for t in report.rate_trends])
print("tail check violations:", [r["x"] for r in report.tail_check if r["violation"]])
for w in report.warnings:
    print("warning:", w)

with tempfile.TemporaryDirectory() as tmp:
    paths = report.write(Path(tmp))
    print("files:", sorted(p.name for p in paths))
    echoed = json.loads((Path(tmp) / "report.json").read_text())["config"]
    print("config echo has", len(echoed), "fields; seed", echoed["seed"])
