"""
p-adic gamma factors as rational functions of X = p^-s
======================================================
"""

from fractions import Fraction

from pgl2local.padic_local import (
    PadicCharacter,
    PadicRep,
    StepFunction,
    gl2_gamma,
    h_vee_padic,
    tate_gamma,
    unit_characters,
)
from pgl2local.specfun import UnitCharacter, gauss_sum

p = 5
triv = PadicCharacter.unramified(p)
print("gamma(s, |.|^0) at X = 0.3:", tate_gamma(triv)(0.3))
print("zeros of gamma(s, pi(alpha = 5^(1/4))):", sorted(float(abs(z)) for z in gl2_gamma(PadicRep(p, p**0.25), triv).zeros()))

# gamma(s, chi) gamma(1 - s, chi^-1) is the constant chi(-1)
for u in unit_characters(p, 1)[1:]:
    chi = PadicCharacter(p, 0j, u)
    prod = tate_gamma(chi) * tate_gamma(chi.inverse()).reflect(1 / p)
    print(f"chi = {u.j}:  product at X = 0.7 is {prod(0.7):.12f}, |tau(chi)|^2 = {abs(gauss_sum(p, UnitCharacter(p, 1, u.j))) ** 2:.12f}")

# the residue sum and a trapezoid rule on the contour give the same h_vee
u = StepFunction.units(p)
pi = PadicRep(p, 1.0)
for method in ("residue", "trapezoid"):
    print(f"h_vee({method}):", h_vee_padic(pi, Fraction(1), (u, u), pi, triv, method=method))
