"""
The hypergeometric kernel and the decay of h_vee
================================================

Run with ``python demos/01_kernel_and_decay.py``.
"""

import numpy as np

from pgl2local.arch_local import ArchRep, BivariateWeight, TestFunction, hvee_integral, kernel_K

# Real parts of the kernel K(t, y); it oscillates and decays like y^(-1/2) as y grows.
ys = np.array([0.1, 0.5, 1.0, 5.0, 50.0, 1e6])
for t in (0.5, 1.0, 5.0):
    vals = kernel_K(t, ys)
    print(f"t = {t:4}:", "  ".join(f"{v.real:+.6e}" for v in vals))

# h_vee(pi_r, 1) for a weight on y1 > 0, y2 < 0.  The character integral is
# computed once and then evaluated for many r.
h = BivariateWeight(TestFunction.bump(0.05, 4), TestFunction.bump(-4, -0.05))
p0 = ArchRep.principal(0.0)
data = hvee_integral(1.0, h, p0, p0)
print("\n   r    |h_vee(pi_r, 1)|    (1 + r)^10 |h_vee|")
for r in (1, 5, 10, 20, 30):
    v = abs(complex(data.value(ArchRep.principal(float(r)))))
    print(f"{r:4}   {v:.6e}      {v * (1 + r) ** 10:.6e}")
