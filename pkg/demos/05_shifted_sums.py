"""
Shifted divisor sums and a truncated spectral side
==================================================

The first half measures S(X, Y, b) = sum tau(n) tau(n + b) w((n - X)/Y)
with its main term removed, against the pointwise bound.  The second half
feeds a SYNTHETIC spectral data file (made-up numbers, not Maass form
data) through the truncated spectral side to show the report format.
"""

import json
import tempfile
from pathlib import Path

from pgl2local.arch_local import BivariateWeight, TestFunction
from pgl2local.global_demo import ingest_spectral_data, scaling_experiment, spectral_rhs_truncated

grid = [(X, X**0.75, b) for b in (1, 16) for X in (1e4, 3e4, 1e5)]
report = scaling_experiment(grid, samples=16)
print("     X        Y     b    S - main        ratio_point  ratio_mean")
for r in report.rows:
    print(f"{r.X:8.0f} {r.Y:8.1f} {r.b:3}  {r.S:+.4e}   {r.ratio_point:.3f}        {r.ratio_mean:.3f}")

synthetic = [
    {"r": 4.2, "parity": 0, "hecke": {"1": 1.0, "2": 0.3}, "L_half": None, "L_one_ad": None,
     "c_abs": 0.8, "c_sign": 1, "source": "synthetic"},
    {"r": 7.9, "parity": 1, "hecke": {"1": 1.0, "2": -0.6}, "L_half": None, "L_one_ad": None,
     "c_abs": 0.5, "c_sign": -1, "source": "synthetic"},
]
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "synthetic.json"
    path.write_text(json.dumps(synthetic))
    data = ingest_spectral_data(path)

h = BivariateWeight(TestFunction.bump(0.1, 3), TestFunction.bump(0.1, 3))
print()
print(spectral_rhs_truncated(h, 2, data, [5.0, 10.0]).to_csv(), end="")
