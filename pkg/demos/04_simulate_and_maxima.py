"""Seeded double arrays and their running maxima.

Simulation is counter based: entry (k, n) depends only on the seed, the
realization index and its own coordinates. A 10 x 10 grid is therefore the
corner of every larger grid drawn with the same seed.

Run: python demos/04_simulate_and_maxima.py
"""
import tempfile
from pathlib import Path

import numpy as np

from phimax.conditions import normalizer_spec
from phimax.maxima import deviations, distinct_argmax_locations, geometric_windows, window_series
from phimax.orlicz import make_weibull_conjugate_family
from phimax.simulate import read_grid, sample, write_grid_binary

desc = {"kind": "weibull", "theta": 9.0, "b": 1.25}
big = sample(desc, seed=7, m=400, j=300).values
small = sample(desc, seed=7, m=10, j=10).values
print("corner reproduced exactly:", np.array_equal(big[:10, :10], small))

# Running maxima over every anchored window, centred by a_{m,j} = g(ln mj) psi^{-1}(ln mj).
spec = normalizer_spec(make_weibull_conjugate_family(9.0, 1.25))
d = deviations(big, spec)
print("grid shape", d.shape, " Y at the full window:", round(float(d.y[-1, -1]), 5))

# Along a geometric diagonal the deviation shrinks toward zero.
wins = geometric_windows(4, 3, 7, limit=(400, 300))
for (m, j), y in zip(wins, window_series(d, wins)):
    print(f"  window {m:3d} x {j:3d}: Y = {y:+.5f}")

# Y = Y+ - Y-, and the maximum moves only rarely, so few cells ever hold it.
assert np.array_equal(d.y_plus - d.y_minus, d.y)
print("cells that are ever the running argmax:", len(distinct_argmax_locations(d.argmax)), "of", big.size)

# Grids round-trip through the little-endian binary format.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "grid.bin"
    write_grid_binary(path, big)
    print("binary round trip:", np.array_equal(read_grid(path), big), path.stat().st_size, "bytes")
