"""
Single-integral check against pi h_sharp
========================================

For phi on (0, 1) or (1, oo) the single integral V-check(r) and pi times
h_sharp(pi_r, trivial) agree.  For phi on the negative axis they do not,
and the CLI reports that case with exit code 2.
"""

from pgl2local.arch_local import TestFunction, appendix_check

for lo, hi in ((1.5, 2.5), (0.2, 0.8), (-2.5, -1.5)):
    phi = TestFunction.bump(lo, hi)
    lhs, rhs, res = appendix_check(phi, 1.0)
    print(f"phi on ({lo}, {hi}), r = 1:  V-check {lhs.real:+.12e}  pi h_sharp {rhs.real:+.12e}  residual {res:.1e}")
