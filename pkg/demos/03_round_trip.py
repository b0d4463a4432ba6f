"""
Reconstructing h from its spectral transform
============================================

h_vee(., y1 - y2) is tabulated on a spectral grid, and invert_h integrates
it back against the Plancherel measure.  Raising the spectral cutoff from
10 to 40 shrinks the error by two orders of magnitude.
"""

from pgl2local.arch_local import ArchRep, BivariateWeight, TestFunction, hvee_table, invert_h, spectral_grid

h = BivariateWeight(TestFunction.bump(0.1, 3), TestFunction.bump(0.1, 3))
p0 = ArchRep.principal(0.0)
y1, y2 = 1.5, 0.5
table = hvee_table(y1 - y2, h, p0, p0, spectral_grid(40, 40))
exact = complex(h(y1, y2)).real
print(f"h({y1}, {y2}) = {exact:.10f}")
for R in (10, 20, 30, 40):
    v = complex(invert_h(y1, y2, table, p0, p0, R_cut=R)).real
    print(f"R_cut = {R:2}:  {v:.10f}   relative error {abs(v - exact) / exact:.2e}")
