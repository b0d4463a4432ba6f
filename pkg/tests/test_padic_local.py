import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgl2local.padic_local import (
    LaurentRational,
    PadicCharacter,
    PadicRep,
    PoleOnContour,
    StepFunction,
    UnhandledRamification,
    epsilon_half,
    gl2_gamma,
    h_sharp_padic,
    h_vee_padic,
    padic_mellin,
    tate_gamma,
    unit_characters,
)
from pgl2local.specfun import UnitCharacter

X_SAMPLES = [0.37, 0.8 + 0.1j, -1.3 + 0.4j, 2.2j]


def same_function(a: LaurentRational, b: LaurentRational) -> bool:
    return a.equals(b) and all(abs(a(x) - b(x)) <= 1e-12 * max(1, abs(b(x))) for x in X_SAMPLES)


# ---- Laurent rationals


def test_laurent_arithmetic_roundtrip():
    p = 3
    f = LaurentRational(p, [1.0, 2.0], -1, [(0.5, 1)])
    g = LaurentRational(p, [1.0, -0.25j], 0, [(2.0, 2)])
    assert same_function((f * g) / g, f)
    assert same_function((f + g) - g, f)
    assert same_function(f * f.inverse(), LaurentRational.constant(p, 1.0))


def test_laurent_circle_integral_is_residue_sum():
    p = 5
    f = LaurentRational.laurent(p, {-2: 1.0, 0: 3.0, 1: 2.0})
    assert abs(f.circle_integral(1.0) - 3.0) < 1e-14
    g = LaurentRational(p, [1.0], 0, [(0.5, 1)])  # 1/(X - 1/2)
    assert abs(g.circle_integral(1.0) - 0.0) < 1e-14  # integrand 1/(X(X - 1/2)): residues -2 and 2
    assert abs(g.circle_integral(0.25) + 2.0) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=3), min_size=1, max_size=4),
       st.integers(-3, 3), st.floats(0.3, 0.9), st.floats(1.2, 3.0))
def test_laurent_residue_matches_trapezoid(num, low, w_in, w_out):
    f = LaurentRational(7, num, low, [(w_in, 1), (w_out * 1j, 2)])
    assert abs(f.circle_integral(1.0) - f.circle_trapezoid(1.0, 512)) < 1e-9 * max(1, max(abs(c) for c in num))


# ---- gamma and epsilon factors


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_tate_gamma_trivial(p):
    # (1 - p^-s) / (1 - p^(s-1)) with X = p^-s
    expected = LaurentRational(p, [1.0, -1.0], 1, [(1 / p, 1)])
    g = tate_gamma(PadicCharacter.unramified(p))
    assert same_function(g, expected)
    for x in X_SAMPLES:
        assert abs(g(x) - (1 - x) / (1 - 1 / (p * x))) < 1e-12


def test_tate_gamma_unramified_twist():
    p, t = 5, 0.3 + 0.7j
    shifted = tate_gamma(PadicCharacter.unramified(p, t))
    base = tate_gamma(PadicCharacter.unramified(p))
    assert same_function(shifted, base.scale(p ** (-t)))


def _chars(p):
    out = [PadicCharacter.unramified(p), PadicCharacter.unramified(p, 0.2 + 0.1j)]
    for m in (1, 2):
        out += [PadicCharacter(p, 0.3j, u) for u in unit_characters(p, m) if u.is_primitive() and u.m == m][:3]
    return out


@pytest.mark.parametrize("p", [2, 3, 5])
def test_gamma_duality(p):
    for chi in _chars(p):
        prod = tate_gamma(chi) * tate_gamma(chi.inverse()).reflect(1 / p)
        sign = chi.unit_value(p**4 - 1) if chi.unit is not None else 1.0
        assert same_function(prod, LaurentRational.constant(p, sign))


def test_gamma_duality_quadratic_signs():
    # chi(-1) = +1 for the quadratic character mod 5, -1 mod 3
    for p, expected in ((5, 1.0), (3, -1.0)):
        chi = PadicCharacter(p, 0j, UnitCharacter(p, 1, (p - 1) // 2))
        prod = tate_gamma(chi) * tate_gamma(chi.inverse()).reflect(1 / p)
        assert same_function(prod, LaurentRational.constant(p, expected))


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_epsilon_unit_modulus(p):
    for chi in _chars(p):
        if chi.conductor:
            assert abs(abs(epsilon_half(chi.shift(-chi.exponent))) - 1) < 1e-12


def test_quadratic_epsilon_magnitude():
    chi = PadicCharacter(5, 0j, UnitCharacter(5, 1, 2))
    g = tate_gamma(chi)
    coeff = g.numerator()[0][-1] if len(g.numerator()[0]) else 0
    assert abs(abs(coeff) / math.sqrt(5) - 1) < 1e-12


def test_gl2_gamma_trivial_satake_is_square():
    p = 3
    g = tate_gamma(PadicCharacter.unramified(p))
    assert same_function(gl2_gamma(PadicRep(p, 1.0), PadicCharacter.unramified(p)), g * g)


@pytest.mark.parametrize("p", [2, 3, 5])
def test_gl2_gamma_zeros(p):
    a = p**0.25
    g = gl2_gamma(PadicRep(p, a), PadicCharacter.unramified(p))
    zeros = sorted(g.zeros(), key=abs)
    assert np.allclose(zeros, sorted([1 / a, a], key=abs), atol=1e-10)


def test_gl2_gamma_degree_bound():
    p = 3
    for chi in _chars(p):
        g = gl2_gamma(PadicRep(p, p**0.25), chi)
        num, _ = g.numerator()
        assert len(num) - 1 <= 2 + 2 * chi.conductor
        assert len(g.denominator()) - 1 <= 2 + 2 * chi.conductor


# ---- Mellin transforms of step functions


def test_padic_mellin_examples():
    p = 5
    u = StepFunction.units(p)
    assert same_function(padic_mellin(u, PadicCharacter.unramified(p)), LaurentRational.constant(p, 1 - 1 / p))
    ram = PadicCharacter(p, 0j, UnitCharacter(p, 1, 1))
    assert padic_mellin(u, ram).is_zero()
    f = StepFunction.units(p, 3.0, 1)
    assert same_function(padic_mellin(f, PadicCharacter.unramified(p)), LaurentRational.monomial(p, 3 * (1 - 1 / p), 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(-2, 2), st.integers(-2, 2), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 3))
def test_padic_mellin_linear(v1, v2, a, b, j):
    p = 3
    f, g = StepFunction.units(p, a, v1), StepFunction.units(p, b, v2 + 5)
    chi = PadicCharacter(p, 0.1j, UnitCharacter(p, 2, j))
    lhs = padic_mellin(f + g, chi)
    rhs = padic_mellin(f, chi) + padic_mellin(g, chi)
    for x in X_SAMPLES:
        assert abs(lhs(x) - rhs(x)) < 1e-12 * max(1, abs(rhs(x)))


# ---- transforms


def _unit_pair(p):
    return StepFunction.units(p), StepFunction.units(p)


def test_h_vee_zero():
    p = 5
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    assert h_vee_padic(pi, 1, (StepFunction.zero(p), StepFunction.units(p)), pi, tr) == 0


def test_h_vee_residue_vs_trapezoid_p5():
    p = 5
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    r = h_vee_padic(pi, 1, _unit_pair(p), pi, tr)
    t = h_vee_padic(pi, 1, _unit_pair(p), pi, tr, method="trapezoid")
    assert abs(r - t) < 1e-12


def test_h_vee_contour_independence():
    p = 5
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    a = h_vee_padic(pi, 1, _unit_pair(p), pi, tr, sigma=0.2)
    b = h_vee_padic(pi, 1, _unit_pair(p), pi, tr, sigma=0.3)
    assert abs(a - b) < 1e-14


def test_h_vee_strip_checked():
    p = 5
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    with pytest.raises(ValueError):
        h_vee_padic(pi, 1, _unit_pair(p), pi, tr, sigma=0.7)


@settings(max_examples=25, deadline=None)
@given(st.sets(st.integers(-1, 2), min_size=1, max_size=2), st.sets(st.integers(-1, 2), min_size=1, max_size=2),
       st.integers(1, 3))
def test_h_vee_support_bound(V1, V2, drop):
    p = 3
    f1 = StepFunction(p, 0, tuple((v, 1, 1.0) for v in sorted(V1)))
    f2 = StepFunction(p, 0, tuple((v, 1, 0.5) for v in sorted(V2)))
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    vy = min(V1 | V2) - drop
    assert h_vee_padic(pi, Fraction(p) ** vy, (f1, f2), pi, tr) == 0


def test_h_sharp_zero():
    p = 3
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    assert h_sharp_padic(pi, tr, (StepFunction.zero(p), StepFunction.units(p)), pi, tr) == 0


def test_h_sharp_residue_vs_trapezoid_p3():
    p = 3
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    r = h_sharp_padic(pi, tr, _unit_pair(p), pi, tr)
    t = h_sharp_padic(pi, tr, _unit_pair(p), pi, tr, method="trapezoid")
    assert abs(r - t) < 1e-12


def test_h_sharp_linear_in_h():
    p = 3
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    f = StepFunction(p, 1, ((0, 1, 1.0), (1, 2, 0.5)))
    g = StepFunction.units(p, 2.0, -1)
    u = StepFunction.units(p)
    lhs = h_sharp_padic(pi, tr, (f + g, u), pi, tr)
    rhs = h_sharp_padic(pi, tr, (f, u), pi, tr) + h_sharp_padic(pi, tr, (g, u), pi, tr)
    assert abs(lhs - rhs) < 1e-14 * max(1, abs(rhs)) + 1e-15


def test_h_sharp_level_refinement_invariant():
    p = 3
    pi, tr = PadicRep(p, p**0.2), PadicCharacter.unramified(p)
    f = StepFunction(p, 1, ((0, 1, 1.0), (1, 2, 0.5)))
    u = StepFunction.units(p)
    a = h_sharp_padic(pi, tr, (f, u), pi, tr)
    b = h_sharp_padic(pi, tr, (f, u), pi, tr, level=2)
    assert abs(a - b) < 1e-12 * max(1, abs(a))


def test_h_sharp_conductor_cap():
    p = 3
    pi, tr = PadicRep(p, 1.0), PadicCharacter.unramified(p)
    chi0 = PadicCharacter(p, 0j, UnitCharacter(p, 3, 1))
    with pytest.raises(UnhandledRamification):
        h_sharp_padic(pi, chi0, _unit_pair(p), pi, tr, conductor_cap=2)


def test_pole_on_contour_detected():
    f = LaurentRational(5, [1.0], 0, [(1.0, 1)])
    with pytest.raises(PoleOnContour):
        f.circle_integral(1.0)


def test_residue_vs_converged_trapezoid_narrow_strip():
    # alpha = 2^(1/4) leaves the strip (0, 1/4); 256 points are short of 1e-12 here
    p = 2
    pi, tr, u = PadicRep(p, p**0.25), PadicCharacter.unramified(p), StepFunction.units(p)
    r = h_sharp_padic(pi, tr, (u, u), PadicRep(p, 1.0), tr, sigma=0.125)
    coarse = h_sharp_padic(pi, tr, (u, u), PadicRep(p, 1.0), tr, sigma=0.125, method="trapezoid")
    fine = h_sharp_padic(pi, tr, (u, u), PadicRep(p, 1.0), tr, sigma=0.125, method="trapezoid",
                         trapezoid_points=1024)
    assert abs(r - fine) < 1e-12 < abs(r - coarse)
