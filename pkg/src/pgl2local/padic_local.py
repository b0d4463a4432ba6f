"""Local factors and transforms at a finite prime.

Everything here is for unramified principal series of PGL2(Q_p) and
characters ``chi = chi_unit |.|^z`` of Q_p^x, with ``chi(p) = p^(-z)`` and
``chi_unit`` extended to Q_p^x by ``chi_unit(p) = 1``.

Conventions:

* additive character psi(x) = e(-{x}_p), unramified; together with
  e(x) at the real place it is trivial on Q;
* dx gives Z_p volume 1 and d^x y = dy/|y|, so Z_p^x has volume 1 - 1/p;
* the dual measure on characters is
  ``(1 - 1/p)^(-1) sum_(chi_unit) oint dX / (2 pi i X)`` with
  ``X = p^(-s)`` for ``chi = chi_unit |.|^s``.

Rational functions of X carry their poles explicitly, so contour
integrals over |X| = p^(-sigma) are finite residue sums.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .specfun import UnitCharacter, _is_prime, _primitive_root

MERGE_TOL = 1e-12


class PoleOnContour(ValueError):
    """A pole of the integrand lies on the integration circle."""


class UnhandledRamification(ValueError):
    """A character's conductor exceeds the configured cap."""


# ---------------------------------------------------------------------------
# rational functions of X


def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def _poly_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=complex)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def _poly_from_roots(roots: Sequence[tuple[complex, int]]) -> np.ndarray:
    """Ascending coefficients of prod (X - w)^m."""
    out = np.array([1.0 + 0j])
    for w, m in roots:
        for _ in range(m):
            out = _poly_mul(out, np.array([-w, 1.0 + 0j]))
    return out


def _merge_poles(a: Iterable[tuple[complex, int]], b: Iterable[tuple[complex, int]]) -> list[tuple[complex, int]]:
    out: list[list] = [[w, m] for w, m in a]
    for w, m in b:
        for item in out:
            if abs(item[0] - w) <= MERGE_TOL * max(1.0, abs(w)):
                item[1] += m
                break
        else:
            out.append([w, m])
    return [(w, m) for w, m in out if m > 0]


def _pole_lcm(a: Sequence[tuple[complex, int]], b: Sequence[tuple[complex, int]]):
    """Common multiple of two pole sets and the extra factors each side needs."""
    common = [[w, m] for w, m in a]
    for w, m in b:
        for item in common:
            if abs(item[0] - w) <= MERGE_TOL * max(1.0, abs(w)):
                item[1] = max(item[1], m)
                break
        else:
            common.append([w, m])

    def missing(side):
        extra = []
        for w, m in common:
            have = 0
            for w2, m2 in side:
                if abs(w2 - w) <= MERGE_TOL * max(1.0, abs(w)):
                    have = m2
            if m > have:
                extra.append((w, m - have))
        return extra

    common_t = [(w, m) for w, m in common]
    return common_t, missing(a), missing(b)


class LaurentRational:
    """R(X) = X^low * N(X) / prod_j (X - w_j)^(m_j), N an ordinary polynomial.

    ``num`` holds the ascending coefficients of N; poles are kept in
    factored form so that residues can be taken without root finding.
    All poles are nonzero.
    """

    def __init__(self, p: int, num: Sequence[complex], low: int = 0,
                 poles: Sequence[tuple[complex, int]] = ()):
        self.p = p
        num = np.asarray(num, dtype=complex).ravel()
        if num.size == 0:
            num = np.zeros(1, dtype=complex)
        # strip leading zeros of N, and pull trailing zeros into X^low
        nz = np.nonzero(num)[0]
        if nz.size == 0:
            self.num, self.low, self.poles = np.zeros(1, dtype=complex), 0, ()
            return
        num = num[nz[0]: nz[-1] + 1]
        self.num = num
        self.low = int(low) + int(nz[0])
        if any(abs(w) == 0 for w, _ in poles):
            raise ValueError("poles at X = 0 belong in low")
        self.poles = tuple((complex(w), int(m)) for w, m in poles if m > 0)

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, p: int, c: complex) -> "LaurentRational":
        return cls(p, [c])

    @classmethod
    def monomial(cls, p: int, c: complex, k: int) -> "LaurentRational":
        return cls(p, [c], k)

    @classmethod
    def laurent(cls, p: int, coeffs: dict[int, complex]) -> "LaurentRational":
        """Laurent polynomial from {power: coefficient}."""
        if not coeffs:
            return cls(p, [0])
        lo, hi = min(coeffs), max(coeffs)
        arr = np.zeros(hi - lo + 1, dtype=complex)
        for k, c in coeffs.items():
            arr[k - lo] += c
        return cls(p, arr, lo)

    def is_zero(self) -> bool:
        return not np.any(self.num)

    # arithmetic ---------------------------------------------------------

    def _check(self, other: "LaurentRational") -> None:
        if self.p != other.p:
            raise ValueError("different primes")

    def __mul__(self, other):
        if not isinstance(other, LaurentRational):
            return LaurentRational(self.p, self.num * complex(other), self.low, self.poles)
        self._check(other)
        return LaurentRational(self.p, _poly_mul(self.num, other.num), self.low + other.low,
                               _merge_poles(self.poles, other.poles))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, LaurentRational):
            other = LaurentRational.constant(self.p, complex(other))
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        poles, extra_a, extra_b = _pole_lcm(self.poles, other.poles)
        a = _poly_mul(self.num, _poly_from_roots(extra_a))
        b = _poly_mul(other.num, _poly_from_roots(extra_b))
        low = min(self.low, other.low)
        a = np.concatenate([np.zeros(self.low - low, dtype=complex), a])
        b = np.concatenate([np.zeros(other.low - low, dtype=complex), b])
        return LaurentRational(self.p, _poly_add(a, b), low, poles)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, LaurentRational) else -complex(other))

    def inverse(self) -> "LaurentRational":
        """1/R; the zeros of N become poles (found with np.roots)."""
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        lead = self.num[-1]
        roots = np.roots(self.num[::-1]) if len(self.num) > 1 else np.array([])
        poles = _merge_poles([], [(complex(r), 1) for r in roots])
        num = _poly_from_roots(self.poles) / lead
        return LaurentRational(self.p, num, -self.low, poles)

    def __truediv__(self, other):
        if not isinstance(other, LaurentRational):
            return self * (1 / complex(other))
        return self * other.inverse()

    # substitutions ------------------------------------------------------

    def scale(self, c: complex) -> "LaurentRational":
        """X -> c X."""
        c = complex(c)
        num = self.num * c ** np.arange(len(self.num))
        # (cX - w)^m = c^m (X - w/c)^m
        factor = c**self.low
        for w, m in self.poles:
            factor /= c**m
        return LaurentRational(self.p, num * factor, self.low, [(w / c, m) for w, m in self.poles])

    def reflect(self, c: complex) -> "LaurentRational":
        """X -> c / X."""
        c = complex(c)
        d = len(self.num) - 1
        # N(c/X) = X^(-d) sum n_i c^i X^(d-i)
        num = (self.num * c ** np.arange(d + 1))[::-1]
        low = -d - self.low
        factor = c**self.low
        poles = []
        total_m = 0
        for w, m in self.poles:
            # (c/X - w)^m = (-w)^m X^(-m) (X - c/w)^m
            factor /= (-w) ** m
            total_m += m
            poles.append((c / w, m))
        return LaurentRational(self.p, num * factor, low + total_m, poles)

    def at_s(self, s: complex) -> complex:
        return self(self.p ** (-complex(s)))

    # evaluation ---------------------------------------------------------

    def __call__(self, X):
        X = np.asarray(X, dtype=complex)
        val = np.polynomial.polynomial.polyval(X, self.num) * X**self.low
        for w, m in self.poles:
            val = val / (X - w) ** m
        return val

    def numerator(self) -> tuple[np.ndarray, int]:
        """(ascending coefficients, lowest power) of the Laurent numerator X^low N."""
        return self.num.copy(), self.low

    def denominator(self) -> np.ndarray:
        return _poly_from_roots(self.poles)

    def zeros(self, tol: float = 1e-8) -> np.ndarray:
        """Nonzero zeros after cancelling against poles."""
        roots = list(np.roots(self.num[::-1])) if len(self.num) > 1 else []
        left = [[w, m] for w, m in self.poles]
        out = []
        for r in roots:
            for item in left:
                if item[1] > 0 and abs(item[0] - r) <= tol * max(1.0, abs(r)):
                    item[1] -= 1
                    break
            else:
                out.append(r)
        return np.array(out, dtype=complex)

    def reduced_poles(self, tol: float = 1e-8) -> list[tuple[complex, int]]:
        roots = list(np.roots(self.num[::-1])) if len(self.num) > 1 else []
        out = []
        for w, m in self.poles:
            k = sum(1 for r in roots if abs(r - w) <= tol * max(1.0, abs(w)))
            if m - k > 0:
                out.append((w, m - k))
        return out

    def equals(self, other: "LaurentRational", tol: float = 1e-12) -> bool:
        """Symbolic equality: the cross products agree coefficientwise."""
        self._check(other)
        a = _poly_mul(self.num, other.denominator())
        b = _poly_mul(other.num, self.denominator())
        low = min(self.low, other.low)
        a = np.concatenate([np.zeros(self.low - low, dtype=complex), a])
        b = np.concatenate([np.zeros(other.low - low, dtype=complex), b])
        diff = _poly_add(a, -b)
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        return bool(np.max(np.abs(diff)) <= tol * scale)

    def __repr__(self) -> str:
        return f"LaurentRational(p={self.p}, num={self.num!r}, low={self.low}, poles={self.poles!r})"

    # contour integrals --------------------------------------------------

    def circle_integral(self, radius: float) -> complex:
        """(1/(2 pi i)) oint_(|X| = radius) R(X) dX / X, by residues."""
        for w, _ in self.poles:
            if abs(abs(w) - radius) <= 1e-12 * radius:
                raise PoleOnContour(f"pole at |X| = {abs(w):.15g} on the circle")
        total = []
        # pole of R(X)/X at 0 of order 1 - low
        q = 1 - self.low
        if q > 0:
            total.append(_taylor_coeff(self.num, 0, 0j, self.poles, q - 1))
        for i, (w, m) in enumerate(self.poles):
            if abs(w) < radius:
                others = self.poles[:i] + self.poles[i + 1:]
                total.append(_taylor_coeff(self.num, self.low - 1, w, others, m - 1))
        return complex(math.fsum(t.real for t in total), math.fsum(t.imag for t in total))

    def circle_trapezoid(self, radius: float, n: int = 256) -> complex:
        """The same integral by the n-point trapezoid rule on the circle."""
        X = radius * np.exp(2j * math.pi * np.arange(n) / n)
        return complex(np.mean(self(X)))


def _series_shift(num: np.ndarray, w: complex, order: int) -> np.ndarray:
    """Taylor coefficients in h of N(w + h) up to h^order."""
    out = np.zeros(order + 1, dtype=complex)
    d = len(num) - 1
    for j in range(min(order, d) + 1):
        # coefficient of h^j: sum_i n_i C(i, j) w^(i-j)
        i = np.arange(j, d + 1)
        binom = np.array([math.comb(int(k), j) for k in i], dtype=float)
        out[j] = np.sum(num[j:] * binom * w ** (i - j))
    return out


def _series_power(base: complex, expo: int, order: int) -> np.ndarray:
    """Taylor coefficients of (base + h)^expo, base != 0, any integer expo."""
    out = np.zeros(order + 1, dtype=complex)
    c = complex(base) ** expo
    out[0] = c
    for j in range(1, order + 1):
        c = c * (expo - j + 1) / (j * base)
        out[j] = c
    return out


def _series_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def _taylor_coeff(num: np.ndarray, power: int, w: complex, poles, order: int) -> complex:
    """Coefficient of h^order in N(w+h) (w+h)^power / prod (w + h - w_j)^m_j."""
    s = _series_shift(num, w, order)
    if power != 0:
        if w == 0:
            raise ValueError("power of X at the expansion point 0")
        s = _series_mul(s, _series_power(w, power, order), order)
    for wj, mj in poles:
        s = _series_mul(s, _series_power(w - wj, -mj, order), order)
    return complex(s[order])


# ---------------------------------------------------------------------------
# characters


@lru_cache(maxsize=64)
def _dlog_table(p: int, m: int) -> dict[int, tuple[int, int]]:
    """a -> (sign bit, exponent) for units a mod p^m (see UnitCharacter)."""
    n = p**m
    table: dict[int, tuple[int, int]] = {}
    if m == 0:
        return {0: (0, 0)}
    if p == 2:
        if m == 1:
            return {1: (0, 0)}
        v, k = 1, 0
        size = max(1, n // 4)
        for k in range(size):
            table[v] = (0, k)
            table[(-v) % n] = (1, k)
            v = (v * 5) % n
        return table
    g = _primitive_root(p)
    v = 1
    for k in range(n - n // p):
        table[v] = (0, k)
        v = (v * g) % n
    return table


def unit_values(chi: UnitCharacter) -> dict[int, complex]:
    """Value table {a mod p^m: chi(a)} built from one discrete-log pass."""
    if chi.m == 0:
        return {0: 1.0 + 0j}
    table = _dlog_table(chi.p, chi.m)
    out = {}
    if chi.p == 2:
        cyc = max(1, chi.modulus // 4)
        for a, (sgn, k) in table.items():
            out[a] = (-1) ** (sgn * chi.j_minus) * cmath.exp(2j * math.pi * chi.j * k / cyc)
    else:
        order = chi.order_group
        for a, (_, k) in table.items():
            out[a] = cmath.exp(2j * math.pi * chi.j * k / order)
    return out


def unit_characters(p: int, m: int) -> list[UnitCharacter]:
    """All characters of (Z/p^m)^x (imprimitive ones included)."""
    if m == 0:
        return [UnitCharacter(p, 0)]
    if p == 2:
        if m == 1:
            return [UnitCharacter(2, 1, 0, 0)]
        cyc = max(1, 2**m // 4)
        return [UnitCharacter(2, m, j, s) for s in (0, 1) for j in range(cyc)]
    order = p**m - p ** (m - 1)
    return [UnitCharacter(p, m, j) for j in range(order)]


@dataclass(frozen=True)
class PadicCharacter:
    """chi = chi_unit |.|^exponent on Q_p^x; chi(p) = p^(-exponent).

    ``unit`` may be given modulo any p^m; ``conductor`` is the exponent of
    its primitive version.
    """

    p: int
    exponent: complex = 0j
    unit: UnitCharacter | None = None

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.unit is not None and self.unit.p != self.p:
            raise ValueError("unit character for a different prime")

    @classmethod
    def unramified(cls, p: int, exponent: complex = 0j) -> "PadicCharacter":
        return cls(p, complex(exponent), None)

    @property
    def level(self) -> int:
        return 0 if self.unit is None else self.unit.m

    def _table(self) -> dict[int, complex]:
        return unit_values(self.unit) if self.unit is not None else {0: 1.0 + 0j}

    def unit_value(self, a: int) -> complex:
        if self.unit is None or self.unit.m == 0:
            return 1.0 + 0j
        return self._table()[a % self.unit.modulus]

    @property
    def conductor(self) -> int:
        if self.unit is None or self.unit.m == 0:
            return 0
        vals = self._table()
        n = self.unit.modulus
        for c in range(0, self.unit.m + 1):
            step = self.p**c
            if c == 0:
                ok = all(abs(v - 1) < 1e-12 for v in vals.values())
            else:
                ok = all(abs(vals[a] - 1) < 1e-12 for a in range(1, n, step) if a % self.p)
            if ok:
                return c
        return self.unit.m

    @property
    def at_p(self) -> complex:
        return self.p ** (-complex(self.exponent))

    def __call__(self, x) -> complex:
        v, u = padic_split(self.p, x)
        return self.unit_value(u) * self.at_p**v

    def twist(self, beta: complex) -> "PadicCharacter":
        """chi times the unramified character sending p to beta."""
        return PadicCharacter(self.p, self.exponent - cmath.log(beta) / math.log(self.p), self.unit)

    def shift(self, z: complex) -> "PadicCharacter":
        """chi |.|^z."""
        return PadicCharacter(self.p, self.exponent + z, self.unit)

    def inverse(self) -> "PadicCharacter":
        return PadicCharacter(self.p, -self.exponent, None if self.unit is None else self.unit.conj())

    def conj(self) -> "PadicCharacter":
        return PadicCharacter(self.p, complex(self.exponent).conjugate(),
                              None if self.unit is None else self.unit.conj())

    def real_part(self) -> float:
        return complex(self.exponent).real


@dataclass(frozen=True)
class PadicRep:
    """Unramified principal series with Satake parameter alpha: L(s) = prod (1 - alpha^(+-1) p^-s)^-1."""

    p: int
    satake: complex = 1.0 + 0j

    def __post_init__(self):
        if self.satake == 0:
            raise ValueError("Satake parameter must be nonzero")
        if self.theta >= 0.5:
            raise ValueError("theta-tempered with theta < 1/2 required")

    @property
    def theta(self) -> float:
        return abs(math.log(abs(complex(self.satake)))) / math.log(self.p)

    @classmethod
    def from_spectral(cls, p: int, t: complex) -> "PadicRep":
        """alpha = p^(i t)."""
        return cls(p, complex(p) ** (1j * t))


def padic_split(p: int, x) -> tuple[int, int]:
    """x = p^v u with u a p-adic unit; returns (v, u mod p^40) for rational x."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("0 has no valuation")
    num, den = x.numerator, x.denominator
    v = 0
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    mod = p**40
    return v, (num * pow(den, -1, mod)) % mod


def padic_valuation(p: int, x) -> int:
    return padic_split(p, x)[0]


# ---------------------------------------------------------------------------
# gamma factors


def _additive(p: int, x: Fraction) -> complex:
    """psi(x) = e(-{x}_p) for x in Q."""
    x = Fraction(x)
    v, _ = padic_split(p, x) if x != 0 else (0, 0)
    if x == 0 or v >= 0:
        return 1.0 + 0j
    # {x}_p: the part of x with p-power denominator, in [0, 1)
    den = p ** (-v)
    rest = x.denominator // den
    frac = Fraction((x.numerator * pow(rest, -1, den)) % den, den)
    return cmath.exp(-2j * math.pi * float(frac))


def gauss_sum_psi(chi: PadicCharacter) -> complex:
    """sum over u mod p^c of chi_unit^(-1)(u) psi(u / p^c), c the conductor."""
    c = chi.conductor
    if c == 0:
        return 1.0 + 0j
    n = chi.p**c
    terms = [np.conj(chi.unit_value(u)) * cmath.exp(-2j * math.pi * u / n) for u in range(1, n) if u % chi.p]
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def epsilon_half(chi: PadicCharacter) -> complex:
    """epsilon(1/2, chi, psi); modulus 1 for unitary chi."""
    return tate_gamma(chi).at_s(0.5) if chi.conductor else 1.0 + 0j


def tate_gamma(chi: PadicCharacter) -> LaurentRational:
    """gamma(s, chi, psi) as a rational function of X = p^(-s).

    Unramified: L(1 - s, chi^-1) / L(s, chi) = (1 - a X) / (1 - (a p X)^(-1)) with a = chi(p).
    Conductor c >= 1: epsilon(s, chi, psi) = G a^c X^c, G = gauss_sum_psi(chi).
    """
    p = chi.p
    a = chi.at_p
    c = chi.conductor
    if c == 0:
        # (1 - aX) X / (X - 1/(a p))
        return LaurentRational(p, [1.0, -a], 1, [(1 / (a * p), 1)])
    return LaurentRational.monomial(p, gauss_sum_psi(chi) * a**c, c)


def gl2_gamma(pi: PadicRep, chi: PadicCharacter) -> LaurentRational:
    """gamma(s, pi x chi, psi) = gamma(s, chi mu_alpha) gamma(s, chi mu_alpha^-1)."""
    if pi.p != chi.p:
        raise ValueError("different primes")
    alpha = complex(pi.satake)
    return tate_gamma(chi.twist(alpha)) * tate_gamma(chi.twist(1 / alpha))


def L_factor(chi: PadicCharacter) -> LaurentRational:
    """L(s, chi): (1 - chi(p) X)^(-1) if unramified, else 1."""
    if chi.conductor:
        return LaurentRational.constant(chi.p, 1.0)
    a = chi.at_p
    return LaurentRational(chi.p, [-1 / a], 0, [(1 / a, 1)])


# ---------------------------------------------------------------------------
# step functions and Mellin transforms


@dataclass(frozen=True)
class StepFunction:
    """sum of value * indicator(p^v (a + p^level Z_p)) over pieces (v, a, value).

    With level 0 a piece is the whole shell p^v Z_p^x and ``a`` is ignored.
    """

    p: int
    level: int
    pieces: tuple[tuple[int, int, complex], ...] = ()

    def __post_init__(self):
        seen = set()
        for v, a, _ in self.pieces:
            key = (v, a % self.p**self.level if self.level else 0)
            if self.level and a % self.p == 0:
                raise ValueError("unit classes must be prime to p")
            if key in seen:
                raise ValueError("overlapping pieces")
            seen.add(key)

    @classmethod
    def units(cls, p: int, value: complex = 1.0, v: int = 0) -> "StepFunction":
        """value times the indicator of p^v Z_p^x."""
        return cls(p, 0, ((v, 1, complex(value)),))

    @classmethod
    def zero(cls, p: int) -> "StepFunction":
        return cls(p, 0, ())

    def is_zero(self) -> bool:
        return all(val == 0 for _, _, val in self.pieces)

    def valuations(self) -> list[int]:
        return sorted({v for v, _, val in self.pieces if val != 0})

    def __call__(self, x) -> complex:
        if Fraction(x) == 0:
            return 0j
        v, u = padic_split(self.p, x)
        for pv, a, val in self.pieces:
            if pv == v and (self.level == 0 or (u - a) % self.p**self.level == 0):
                return complex(val)
        return 0j

    def __add__(self, other: "StepFunction") -> "StepFunction":
        """Sum, refined to the common level."""
        if self.p != other.p:
            raise ValueError("different primes")
        lv = max(self.level, other.level)
        vals: dict[tuple[int, int], complex] = {}
        for f in (self, other):
            for v in f.valuations():
                for a in _units_mod(self.p, lv):
                    val = f(Fraction(self.p) ** v * a)
                    if val:
                        vals[(v, a)] = vals.get((v, a), 0j) + val
        if lv == 0:
            return StepFunction(self.p, 0, tuple((v, 1, c) for (v, _), c in vals.items()))
        return StepFunction(self.p, lv, tuple((v, a, c) for (v, a), c in vals.items()))

    def scaled(self, c: complex) -> "StepFunction":
        return StepFunction(self.p, self.level, tuple((v, a, c * val) for v, a, val in self.pieces))


def _units_mod(p: int, m: int) -> list[int]:
    if m == 0:
        return [1]
    n = p**m
    return [a for a in range(1, n) if a % p]


def padic_mellin(f: StepFunction, chi: PadicCharacter) -> LaurentRational:
    """s -> int f(y) chi^(-1)(y) |y|^s d^x y, a Laurent polynomial in X = p^(-s)."""
    p = f.p
    coeffs: dict[int, complex] = {}
    for v, a, val in f.pieces:
        if val == 0:
            continue
        if f.level == 0:
            # whole shell: orthogonality kills ramified chi
            if chi.conductor:
                continue
            term = val * (1 - 1 / p) * chi.at_p ** (-v)
        else:
            if chi.conductor > f.level:
                continue
            term = val * p ** (-f.level) * np.conj(chi.unit_value(a)) * chi.at_p ** (-v)
        coeffs[v] = coeffs.get(v, 0j) + term
    return LaurentRational.laurent(p, coeffs)


# ---------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class _Cell:
    """x = rep * (1 + p^M Z_p) scaled; vol is the d^x volume."""

    rep: Fraction
    vol: float


def _cells(p: int, M: int, vals: Iterable[int], near_one: Iterable[int]) -> list[_Cell]:
    """Cells with x, 1 - x of constant valuation and unit class mod p^M.

    ``vals``: valuations of x (the class of 1 mod p at valuation 0 is left
    to ``near_one``); ``near_one``: the valuations w >= 1 of 1 - x.
    """
    units = _units_mod(p, M)
    out = []
    for v in sorted(set(vals)):
        for a in units:
            if v == 0 and a % p == 1:
                continue
            out.append(_Cell(Fraction(p) ** v * a, p ** (-M)))
    for w in sorted(set(near_one)):
        if w < 1:
            continue
        for b in units:
            out.append(_Cell(1 - Fraction(p) ** w * b, p ** (-w - M)))
    return out


def _split(p: int, x: Fraction) -> tuple[int, int]:
    return padic_split(p, x)


def _abs(p: int, x: Fraction) -> float:
    return float(p) ** (-padic_valuation(p, x))


@dataclass(frozen=True)
class _Monomials:
    """sum_j c_j chi_unit(u_j) X^(k_j), to be specialised at each chi_unit."""

    p: int
    M: int
    terms: tuple[tuple[int, int, complex], ...]  # (k, u mod p^M, c)

    def at(self, chi_unit: UnitCharacter, conj: bool = False) -> LaurentRational:
        vals = unit_values(chi_unit)
        n = chi_unit.modulus
        coeffs: dict[int, complex] = {}
        for k, u, c in self.terms:
            cv = vals[u % n] if chi_unit.m else 1.0
            if conj:
                cv = np.conj(cv)
            coeffs[k] = coeffs.get(k, 0j) + c * cv
        return LaurentRational.laurent(self.p, coeffs)


def _check_sigma(sigma: float, lo: float, hi: float, what: str) -> None:
    if not (lo < sigma < hi):
        raise ValueError(f"{what}: sigma = {sigma} outside ({lo:g}, {hi:g})")


def _outer(p: int, M: int, sigma: float, pi: PadicRep, pi1: PadicRep, chi2: PadicCharacter,
           inner, method: str, points: int = 256) -> complex:
    """(1 - 1/p)^-1 sum_(chi_unit mod p^M) oint gamma(1/2, pi x chi) gamma(1, pi1 x conj(chi2)^-1 x chi^-1) inner dX/(2 pi i X)."""
    radius = float(p) ** (-sigma)
    mu = chi2.conj().inverse()
    total = []
    for cu in unit_characters(p, M):
        inner_X = inner(cu)
        if inner_X.is_zero():
            continue
        chi_unit = PadicCharacter(p, 0j, cu)
        g_half = gl2_gamma(pi, chi_unit).scale(p**-0.5)
        eta = PadicCharacter(p, mu.exponent, cu.conj())
        g_one = gl2_gamma(pi1, eta).reflect(1 / p)
        R = g_half * g_one * inner_X
        if method == "residue":
            total.append(R.circle_integral(radius))
        elif method == "trapezoid":
            total.append(R.circle_trapezoid(radius, points))
        else:
            raise ValueError("method must be residue or trapezoid")
    s = complex(math.fsum(t.real for t in total), math.fsum(t.imag for t in total))
    return s / (1 - 1 / p)


def _pair_level(h: tuple[StepFunction, StepFunction]) -> int:
    return max(1, h[0].level, h[1].level)


def h_vee_padic(pi: PadicRep, y, h: tuple[StepFunction, StepFunction], pi1: PadicRep,
                chi2: PadicCharacter, sigma: float = 0.25, method: str = "residue",
                level: int | None = None, trapezoid_points: int = 256) -> complex:
    """h^vee(pi, y) for h(y1, y2) = f1(y1) conj(f2(y2)).

    ``y`` is a nonzero rational or a pair (v, u) meaning p^v u.  ``level``
    refines the cell decomposition beyond the level of h (the value must
    not change).  ``method="trapezoid"`` replaces the residue sum by the
    ``trapezoid_points``-point rule on the circle.
    """
    f1, f2 = h
    p = pi.p
    if chi2.conductor:
        raise ValueError("chi2 must be unramified")
    th2 = abs(chi2.real_part())
    _check_sigma(sigma, pi1.theta + th2, 0.5 - pi.theta, "h_vee_padic")
    if isinstance(y, tuple):
        y = Fraction(p) ** y[0] * y[1]
    y = Fraction(y)
    if f1.is_zero() or f2.is_zero():
        return 0j
    M = max(_pair_level(h), level or 0)
    vy = padic_valuation(p, y)
    vt = [v - vy for v in f1.valuations()]
    vt1 = [v - vy for v in f2.valuations()]
    chi2bar = chi2.conj()
    terms = []
    for cell in _cells(p, M, vt, [w for w in vt1 if w >= 1]):
        t = cell.rep
        val = f1(y * t) * np.conj(f2(y * (t - 1)))
        if val == 0:
            continue
        q = (t - 1) / t
        val *= chi2bar(q) * math.sqrt(_abs(p, t) / _abs(p, t - 1))
        v, u = _split(p, t)
        # chi^-1(t) = conj(chi_unit(u)) X^(-v)
        terms.append((-v, u % p**M, val * cell.vol))
    inner = _Monomials(p, M, tuple(terms))
    return _outer(p, M, sigma, pi, pi1, chi2, lambda cu: inner.at(cu, conj=True), method, trapezoid_points)


def H_padic(y, chi0: PadicCharacter, h: tuple[StepFunction, StepFunction]) -> complex:
    """H(y, chi0) = int f1(z) conj(f2(y z)) chi0(z) d^x z, exactly."""
    f1, f2 = h
    p = f1.p
    y = Fraction(y)
    M = max(_pair_level(h), chi0.conductor)
    vy = padic_valuation(p, y)
    total = []
    for v in f1.valuations():
        if v + vy not in f2.valuations():
            continue
        for a in _units_mod(p, M):
            z = Fraction(p) ** v * a
            val = f1(z) * np.conj(f2(y * z))
            if val:
                total.append(val * chi0(z) * p ** (-M))
    return complex(math.fsum(t.real for t in total), math.fsum(t.imag for t in total))


def h_sharp_padic(pi: PadicRep, chi0: PadicCharacter, h: tuple[StepFunction, StepFunction],
                  pi1: PadicRep, chi2: PadicCharacter, sigma: float = 0.25, method: str = "residue",
                  conductor_cap: int = 6, level: int | None = None, trapezoid_points: int = 256) -> complex:
    """h^sharp(pi, chi0) by residues (or the trapezoid rule, as for h_vee_padic).

    The y-integral is split into cells on which y, 1 - y have constant
    valuation and unit class; near y = 1 the cells are indexed by the
    valuation of 1 - y, and their tail is summed as a geometric series.
    """
    f1, f2 = h
    p = pi.p
    if chi2.conductor:
        raise ValueError("chi2 must be unramified")
    if chi0.conductor > conductor_cap:
        raise UnhandledRamification(f"conductor {chi0.conductor} above the cap {conductor_cap}")
    if chi0.real_part() <= -0.5:
        raise ValueError("Re(chi0) must exceed -1/2")
    _check_sigma(sigma, pi1.theta, 0.5 - pi.theta, "h_sharp_padic")
    if sigma <= -chi0.real_part():
        raise ValueError("sigma must exceed -Re(chi0) for the y-integral near 1")
    if f1.is_zero() or f2.is_zero():
        return 0j
    M = max(_pair_level(h), chi0.conductor, level or 0)
    vy = sorted({b - a for a in f1.valuations() for b in f2.valuations()})
    W = M
    chi2bar = chi2.conj()
    terms = []
    for cell in _cells(p, M, vy, range(1, W + 1) if 0 in vy else []):
        y = cell.rep
        Hy = H_padic(y, chi0, h)
        if Hy == 0:
            continue
        x = 1 - y
        val = Hy * chi0(x) * chi2bar(y) * math.sqrt(_abs(p, y)) / _abs(p, x)
        v, u = _split(p, x)
        # chi(1 - y) = chi_unit(u) X^v
        terms.append((v, u % p**M, val * cell.vol))
    inner = _Monomials(p, M, tuple(terms))
    H1 = H_padic(1, chi0, h) if 0 in vy else 0j
    a0 = chi0.at_p
    c0 = chi0.conductor

    def inner_at(cu: UnitCharacter) -> LaurentRational:
        R = inner.at(cu)
        if H1 != 0:
            # tail v(1 - y) > W: only chi_unit = chi0_unit^-1 survives
            prod_trivial = all(abs(chi0.unit_value(u) * unit_values(cu)[u % cu.modulus] - 1) < 1e-12
                               for u in _units_mod(p, M)) if cu.m else c0 == 0
            if prod_trivial:
                # H(1)(1 - 1/p) sum_(w > W) (a0 X)^w = H(1)(1 - 1/p)(a0 X)^(W+1) / (1 - a0 X)
                coef = H1 * (1 - 1 / p) * a0 ** (W + 1) * (-1 / a0)
                R = R + LaurentRational(p, [coef], W + 1, [(1 / a0, 1)])
        return R

    return _outer(p, M, sigma, pi, pi1, chi2, inner_at, method, trapezoid_points)
