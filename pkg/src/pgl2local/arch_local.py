"""Transforms at the real place.

Conventions used throughout:

* characters of R^x are ``sgn^delta |.|^tau``; ``ArchCharacter.tau`` is the
  full complex exponent, so unitary characters have ``tau = i t``;
* the character measure is ``(1/2) sum_delta int_(sigma) dtau / (2 pi i)``;
* additive character psi(x) = e(x); local gamma factors are the genuine
  ``gamma(s, pi x chi, psi)`` built from Gamma_R and Gamma_C, with
  epsilon(s, sgn, psi) = i.

The forward transforms ``h_vee`` and ``h_sharp`` are contour integrals over
the character variable.  The inner (compactly supported) integrals are done
once on a tanh-substituted trapezoid grid, after which the contour integral
is a dense matrix product evaluated panel by panel with Gauss-Legendre
nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import loggamma as _lg

from .specfun import (
    PoleError,
    QuadratureSpec,
    bessel_K,
    gauss_legendre,
    hyp2f1,
    integrate,
    log_gamma,
    neumaier_sum,
    _arith,
)

LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2 * math.pi)


class StripViolation(ValueError):
    """The contour abscissa lies outside the holomorphy strip."""


class InsufficientGrid(ValueError):
    """The spectral grid cannot meet the requested tolerance."""


class MixedSupport(ValueError):
    """A test function straddles 0 or 1 where a single case is required."""


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class BumpAtom:
    """amplitude * exp(-1/(1-u^2)), u = (|x| - center)/halfwidth, on one side of 0."""

    center: float
    halfwidth: float
    side: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")
        if not (self.halfwidth > 0 and self.center - self.halfwidth >= 0):
            raise ValueError("bump support must stay inside one half line")

    @property
    def interval(self) -> tuple[float, float]:
        """Support of the atom, as used by the quadratures.

        A bump reaching 0 is trimmed where exp(-1/(1-u^2)) < e^-40, about
        1e-17 of its peak, since |t|^s and log|t| are unbounded there.
        """
        lo, hi = self.center - self.halfwidth, self.center + self.halfwidth
        if lo <= 0:
            lo = self.center - self.halfwidth * math.sqrt(1 - 1 / 40)
        return (lo, hi) if self.side > 0 else (-hi, -lo)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (self.side * x - self.center) / self.halfwidth
        inside = np.abs(u) < 1
        safe = np.where(inside, 1 - u * u, 1.0)
        return np.where(inside, self.amplitude * np.exp(-1.0 / safe), 0.0)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = (self.side * x - self.center) / self.halfwidth
        inside = np.abs(u) < 1
        safe = np.where(inside, 1 - u * u, 1.0)
        val = np.exp(-1.0 / safe) * (-2 * u / safe**2) * self.side / self.halfwidth
        return np.where(inside, self.amplitude * val, 0.0)


def _tanh_nodes(lo: float, hi: float, step: float, reach: float = 3.5) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes for int_lo^hi g, via t = m + d tanh(w).

    Exponentially accurate for integrands that vanish to infinite order at
    both ends (products of bumps).
    """
    m, d = 0.5 * (lo + hi), 0.5 * (hi - lo)
    n = int(math.ceil(reach / step))
    w = step * np.arange(-n, n + 1)
    t = m + d * np.tanh(w)
    wt = step * d / np.cosh(w) ** 2
    keep = (t > lo) & (t < hi)
    return t[keep], wt[keep]


def _step_for(freq: float, rel_width: float) -> float:
    """Trapezoid step resolving |t|^(i freq) on an interval of relative width rel_width."""
    return min(0.1, (math.pi**2 / 4) / (40.0 + abs(freq) * rel_width * math.pi / 8))


class TestFunction:
    """Finite sum of bump atoms, a smooth compactly supported function on R^x."""

    __test__ = False  # not a pytest class

    def __init__(self, atoms: Iterable[BumpAtom] = ()):
        self.atoms: tuple[BumpAtom, ...] = tuple(atoms)

    @classmethod
    def bump(cls, lo: float, hi: float, amplitude: float = 1.0) -> "TestFunction":
        """Single bump supported on (lo, hi), an interval on either side of 0 (an end may be 0)."""
        if lo >= hi or (lo < 0 < hi):
            raise ValueError("interval must not straddle 0")
        side = 1 if hi > 0 else -1
        a, b = sorted((abs(lo), abs(hi)))
        return cls([BumpAtom(0.5 * (a + b), 0.5 * (b - a), side, amplitude)])

    @classmethod
    def zero(cls) -> "TestFunction":
        return cls()

    def is_zero(self) -> bool:
        return all(a.amplitude == 0 for a in self.atoms)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a in self.atoms:
            out = out + a(x)
        return out

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for a in self.atoms:
            out = out + a.derivative(x)
        return out

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(self.atoms + other.atoms)

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(BumpAtom(a.center, a.halfwidth, a.side, c * a.amplitude) for a in self.atoms)

    def support(self) -> list[tuple[float, float]]:
        return [a.interval for a in self.atoms]

    def peak(self) -> float:
        xs = np.concatenate([np.linspace(*a.interval, 401) for a in self.atoms]) if self.atoms else np.zeros(1)
        return float(np.max(np.abs(self(xs))))

    def nodes(self, freq: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        """(x, w) with sum w g(x) ~ int f(x) g(x) dx for g oscillating like |x|^(i freq)."""
        xs, ws = [], []
        for a in self.atoms:
            lo, hi = a.interval
            x, w = _tanh_nodes(lo, hi, _step_for(freq, 0.5 * (hi - lo) / min(abs(lo), abs(hi))))
            xs.append(x)
            ws.append(w * a(x))
        if not xs:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(xs), np.concatenate(ws)

    def mellin(self, s, delta: int = 0) -> np.ndarray:
        """int f(x) sgn(x)^delta |x|^s d^x x (vectorised over s)."""
        s = np.asarray(s, dtype=complex)
        freq = float(np.max(np.abs(s.imag))) if s.size else 0.0
        x, w = self.nodes(freq)
        if x.size == 0:
            return np.zeros(s.shape, dtype=complex)
        g = w * np.sign(x) ** delta / np.abs(x)
        return np.exp(np.multiply.outer(s, np.log(np.abs(x)))) @ g


@dataclass(frozen=True)
class BivariateWeight:
    """h(y1, y2) = factor1(y1) * conj(factor2(y2))  (both factors are real here)."""

    factor1: TestFunction
    factor2: TestFunction

    def __call__(self, y1, y2) -> np.ndarray:
        return self.factor1(y1) * self.factor2(y2)

    def is_zero(self) -> bool:
        return self.factor1.is_zero() or self.factor2.is_zero()

    def peak(self) -> float:
        return self.factor1.peak() * self.factor2.peak()

    def t_nodes(self, y: float, freq: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes for int h(y t, y (t - 1)) g(t) dt; weights include h."""
        ts, ws = [], []
        for a1 in self.factor1.atoms:
            for a2 in self.factor2.atoms:
                i1 = sorted(v / y for v in a1.interval)
                i2 = sorted(1 + v / y for v in a2.interval)
                lo, hi = max(i1[0], i2[0]), min(i1[1], i2[1])
                if hi <= lo:
                    continue
                tmin = min(abs(lo), abs(hi)) if lo * hi > 0 else 1e-300
                rel = max((hi - lo) / 2 / tmin, (hi - lo) / 2 / max(min(abs(lo - 1), abs(hi - 1)), 1e-300))
                t, w = _tanh_nodes(lo, hi, _step_for(freq, min(rel, 50.0)))
                ts.append(t)
                ws.append(w * a1(y * t) * a2(y * (t - 1)))
        if not ts:
            return np.zeros(0), np.zeros(0)
        return np.concatenate(ts), np.concatenate(ws)

    def H(self, y, chi0: "ArchCharacter | None" = None) -> np.ndarray:
        """H(y, chi0) = int h(z, y z) chi0(z) d^x z, vectorised over y."""
        chi0 = chi0 or ArchCharacter.trivial()
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros(y.shape, dtype=complex)
        for i, yv in enumerate(y):
            acc = []
            for a1 in self.factor1.atoms:
                for a2 in self.factor2.atoms:
                    i1 = sorted(a1.interval)
                    i2 = sorted(v / yv for v in a2.interval)
                    lo, hi = max(i1[0], i2[0]), min(i1[1], i2[1])
                    if hi <= lo:
                        continue
                    z, w = _tanh_nodes(lo, hi, _step_for(abs(chi0.tau.imag), (hi - lo) / 2 / min(abs(lo), abs(hi))))
                    vals = w * a1(z) * a2(yv * z) * chi0(z) / np.abs(z)
                    acc.append(neumaier_sum(vals))
            out[i] = neumaier_sum(acc) if acc else 0
        return out

    def H_support(self) -> list[tuple[float, float]]:
        """Intervals in y outside of which H(y, .) vanishes."""
        out = []
        for a1 in self.factor1.atoms:
            for a2 in self.factor2.atoms:
                q = [b / a for a in a1.interval for b in a2.interval]
                out.append((min(q), max(q)))
        return out


@dataclass(frozen=True)
class DiagonalWeight:
    """Weight specified through H(y, triv) = phi(y) |y|^(1/2) directly."""

    phi: TestFunction

    def is_zero(self) -> bool:
        return self.phi.is_zero()

    def H(self, y, chi0: "ArchCharacter | None" = None) -> np.ndarray:
        if chi0 is not None and not chi0.is_trivial():
            raise ValueError("DiagonalWeight only defines H at the trivial character")
        y = np.asarray(y, dtype=float)
        return (self.phi(y) * np.sqrt(np.abs(y))).astype(complex)

    def H_support(self) -> list[tuple[float, float]]:
        return self.phi.support()


# ---------------------------------------------------------------------------
# characters and representations


@dataclass(frozen=True)
class ArchCharacter:
    """sgn^delta |.|^tau with complex exponent tau."""

    tau: complex = 0j
    delta: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "delta", int(self.delta) % 2)

    @classmethod
    def trivial(cls) -> "ArchCharacter":
        return cls(0j, 0)

    @classmethod
    def unitary(cls, t: float, delta: int = 0) -> "ArchCharacter":
        return cls(1j * t, delta)

    def is_trivial(self) -> bool:
        return self.tau == 0 and self.delta == 0

    def __mul__(self, other: "ArchCharacter") -> "ArchCharacter":
        return ArchCharacter(self.tau + other.tau, self.delta ^ other.delta)

    def inverse(self) -> "ArchCharacter":
        return ArchCharacter(-self.tau, self.delta)

    def conj(self) -> "ArchCharacter":
        return ArchCharacter(self.tau.conjugate(), self.delta)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sign(x) ** self.delta * np.exp(self.tau * np.log(np.abs(x)))

    @property
    def real_part(self) -> float:
        return self.tau.real


@dataclass(frozen=True)
class ArchRep:
    """Generic irreducible unitary representation of PGL2(R).

    ``principal``: induced from sgn^eta |.|^(i r), spectral parameter r
    (complex with |Im r| <= theta for complementary series), parity eta.
    ``discrete``: discrete series of even weight k.
    """

    variant: str
    r: complex = 0j
    eta: int = 0
    k: int = 0
    theta: float = 0.0

    def __post_init__(self):
        if self.variant == "principal":
            object.__setattr__(self, "r", complex(self.r))
            th = max(self.theta, abs(self.r.imag))
            object.__setattr__(self, "theta", th)
            if th >= 0.5:
                raise ValueError("principal series must be theta-tempered with theta < 1/2")
            if self.eta not in (0, 1):
                raise ValueError("eta must be 0 or 1")
        elif self.variant == "discrete":
            if self.k < 2 or self.k % 2:
                raise ValueError("discrete series weight must be even and >= 2")
        else:
            raise ValueError("variant must be 'principal' or 'discrete'")

    @classmethod
    def principal(cls, r: complex, eta: int = 0) -> "ArchRep":
        return cls("principal", r=r, eta=eta)

    @classmethod
    def discrete(cls, k: int) -> "ArchRep":
        return cls("discrete", k=k)

    @property
    def is_principal(self) -> bool:
        return self.variant == "principal"

    def inducing_character(self) -> ArchCharacter:
        if not self.is_principal:
            raise ValueError("only principal series are induced from a character")
        return ArchCharacter(1j * self.r, self.eta)

    def label(self) -> str:
        if self.is_principal:
            return f"principal(r={self.r.real:g}{'+' if self.r.imag >= 0 else '-'}{abs(self.r.imag):g}i, eta={self.eta})"
        return f"discrete(k={self.k})"


# ---------------------------------------------------------------------------
# gamma factors


def _lgR(x):
    """log Gamma_R(x)."""
    return -0.5 * x * LOG_PI + _lg(0.5 * x)


def _lgC(x):
    """log Gamma_C(x)."""
    return math.log(2.0) - x * LOG_2PI + _lg(x)


def gl1_gamma(s, tau, delta: int):
    """gamma(s, sgn^delta |.|^tau, e(x)) = i^delta Gamma_R(1-s-tau+delta)/Gamma_R(s+tau+delta)."""
    tau = np.asarray(tau, dtype=complex)
    val = (1j**delta) * np.exp(_lgR(1 - s - tau + delta) - _lgR(s + tau + delta))
    return val


def gamma_factor(s: complex, pi: ArchRep, tau, delta: int):
    """gamma(s, pi x sgn^delta |.|^tau, e(x)), vectorised over tau."""
    tau = np.asarray(tau, dtype=complex)
    if pi.is_principal:
        rho = pi.eta ^ (delta % 2)
        lg = 0
        for sign in (1, -1):
            mu = sign * 1j * pi.r + tau
            lg = lg + _lgR(1 - s - mu + rho) - _lgR(s + mu + rho)
        return (-1) ** rho * np.exp(lg)
    a = (pi.k - 1) / 2
    return (1j**pi.k) * np.exp(_lgC(1 - s - tau + a) - _lgC(s + tau + a))


def gamma_quotient_G(pi: ArchRep, chi: ArchCharacter) -> complex:
    """The displayed quotient G(pi; chi).

    Principal series: prod_+- Gamma((1/2 +- i r - tau + rho)/2) / Gamma((1/2 +- i r + tau + rho)/2)
    with rho = 0 if eta == delta else 1.  Discrete series:
    [delta == 0] i^k Gamma(k/2 - tau)/Gamma(k/2 + tau), where tau is the
    exponent of chi (the other common convention writes i*tau for it).

    G differs from gamma(1/2, pi x chi, e(x)) by elementary factors; see
    ``gamma_factor`` for the latter.
    """
    tau = chi.tau
    if pi.is_principal:
        rho = 0 if pi.eta == chi.delta else 1
        args_num = [0.5 * (0.5 + sg * 1j * pi.r - tau + rho) for sg in (1, -1)]
        args_den = [0.5 * (0.5 + sg * 1j * pi.r + tau + rho) for sg in (1, -1)]
        _pole_guard(args_num, "gamma_quotient_G numerator")
        return complex(np.exp(sum(log_gamma(a) for a in args_num) - sum(log_gamma(a) for a in args_den)))
    if chi.delta:
        return 0j
    a, b = pi.k / 2 - tau, pi.k / 2 + tau
    _pole_guard([a], "gamma_quotient_G numerator")
    return complex((1j**pi.k) * np.exp(log_gamma(a) - log_gamma(b)))


def _pole_guard(args: Sequence[complex], what: str) -> None:
    for a in args:
        a = complex(a)
        if a.imag == 0 and a.real <= 0 and a.real == round(a.real):
            raise PoleError(f"{what}: Gamma pole at argument {a.real:g}")


# ---------------------------------------------------------------------------
# contour machinery


@dataclass(frozen=True)
class ContourSpec:
    """Vertical line Re(tau) = sigma, truncated at |Im tau| <= im_cutoff.

    ``im_cutoff`` is the starting truncation.  With ``adaptive`` the cutoff
    is pushed out (up to ``max_cutoff``) until the estimated tail falls
    below ``tail_tol`` relative to the integrand's L1 mass.
    """

    sigma: float = 0.25
    im_cutoff: float = 50.0
    quadrature: QuadratureSpec = QuadratureSpec()
    adaptive: bool = True
    tail_tol: float = 1e-13
    max_cutoff: float = 6000.0
    panel: float = 1.0
    panel_nodes: int = 16
    fine_until: float = 50.0


class ContourValue(complex):
    """A complex number that also carries the truncation data it was computed with."""

    tail: float
    cutoff: float

    def __new__(cls, value: complex, tail: float = 0.0, cutoff: float = 0.0):
        obj = super().__new__(cls, complex(value).real, complex(value).imag)
        obj.tail = float(tail)
        obj.cutoff = float(cutoff)
        return obj


def _gl_line(U: float, panel: float, n: int, sigma: float = 0.25, fine_until: float = 50.0,
             edge: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on [0, U].

    Gamma-factor poles sit at distance min(sigma, edge - sigma) from the
    line near |u| = spectral parameter, so panels are kept narrower than
    that distance on [0, fine_until].
    """
    x, w = gauss_legendre(n)
    dist = max(min(sigma, edge - sigma), 0.02)
    fine = min(panel, 1.25 * dist)
    edges = [0.0]
    while edges[-1] < U:
        e = edges[-1]
        # the integrand's phase advances like log(u) per unit of u
        width = fine if e < fine_until else panel * min(1.0, 6.0 / math.log(math.e + e))
        edges.append(min(U, e + width))
    edges = np.asarray(edges)
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    return u, wu


class _MellinTable:
    """M(tau, delta) = sum_j w_j sgn(t_j)^delta |t_j|^(sign * tau) on a vertical line."""

    def __init__(self, t: np.ndarray, w: np.ndarray, sign: int = -1):
        self.t = t
        self.logt = np.log(np.abs(t))
        self.sgn = np.sign(t)
        self.w = w.astype(complex)
        self.sign = sign

    def line(self, sigma: float, u: np.ndarray) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
        """Values at sigma + i u and sigma - i u (u >= 0), for delta = 0, 1."""
        u = np.asarray(u, dtype=float)
        if self.t.size == 0:
            z = np.zeros(u.shape, dtype=complex)
            return {0: z, 1: z}, {0: z, 1: z}
        base = self.w * np.exp(self.sign * sigma * self.logt)
        cols = []
        for delta in (0, 1):
            g = base * self.sgn**delta
            cols += [g, np.conj(g)]
        G = np.stack(cols, axis=1)
        out = np.empty((u.size, 4), dtype=complex)
        chunk = max(1, min(2048, 4_000_000 // self.logt.size))
        for i in range(0, u.size, chunk):
            E = np.exp((self.sign * 1j) * np.multiply.outer(u[i:i + chunk], self.logt))
            out[i:i + chunk] = E @ G
        pos = {0: out[:, 0], 1: out[:, 2]}
        neg = {0: np.conj(out[:, 1]), 1: np.conj(out[:, 3])}
        return pos, neg


def _choose_cutoff(envelope, start: float, tol: float, umax: float, step: float = 2.0) -> tuple[float, float]:
    """Truncation point where the integrand's L1 tail drops below tol * total."""
    u = np.arange(0.0, umax + step, step)
    e = envelope(u)
    tail = np.concatenate([np.cumsum(e[::-1])[::-1] * step, [0.0]])[1:]
    total = tail[0] + e[0] * step
    if total == 0:
        return start, 0.0
    ok = np.nonzero(tail <= tol * total)[0]
    U = float(u[ok[0]]) if ok.size else umax
    U = max(U, start)
    idx = min(int(U / step), len(tail) - 1)
    return min(U, umax), float(tail[idx])


@dataclass
class _CharIntegral:
    """Precomputed character-side data for one forward transform.

    The integrand is (1/2) sum_delta gamma(1/2, pi x chi) * B_delta(tau) with
    B_delta absorbing everything that does not depend on pi.  ``u`` holds the
    nonnegative half of the line; ``B_neg`` the values at -u.
    """

    sigma: float
    u: np.ndarray
    wu: np.ndarray
    B_pos: dict[int, np.ndarray]
    B_neg: dict[int, np.ndarray]
    tail: float
    cutoff: float
    symmetric: bool

    def _real_pi(self, pi: ArchRep) -> bool:
        return (not pi.is_principal) or pi.r.imag == 0

    def value(self, pi: ArchRep) -> ContourValue:
        total = []
        tau = self.sigma + 1j * self.u
        fold = self.symmetric and self._real_pi(pi)
        for delta in (0, 1):
            g = gamma_factor(0.5, pi, tau, delta)
            if fold:
                total.append(2 * np.dot(self.wu, (g * self.B_pos[delta]).real))
            else:
                gm = gamma_factor(0.5, pi, np.conj(tau), delta)
                total.append(np.dot(self.wu, g * self.B_pos[delta] + gm * self.B_neg[delta]))
        val = 0.5 * neumaier_sum(total) / (2 * math.pi)
        return ContourValue(val, self.tail, self.cutoff)

    def values(self, pis: Sequence[ArchRep]) -> np.ndarray:
        return np.array([complex(self.value(p)) for p in pis])


def _adaptive_cutoff(make_table, B_at, sigma: float, contour: ContourSpec) -> tuple[float, float]:
    """Grow the probe range until the integrand's tail is negligible inside it."""
    U_try = max(2 * contour.im_cutoff, 100.0)
    while True:
        probe = make_table(U_try)

        def env(u):
            e = np.zeros(u.shape)
            for b in B_at(u, probe):
                for delta in b:
                    e = np.maximum(e, np.abs(b[delta]) / (1 + u) ** (2 * sigma))
            return e

        U, tail = _choose_cutoff(env, contour.im_cutoff, contour.tail_tol, U_try, step=max(1.0, U_try / 1000))
        if U <= 0.75 * U_try or U_try >= contour.max_cutoff:
            return U, tail
        U_try = min(2 * U_try, contour.max_cutoff)


def _full_line(u: np.ndarray, wu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.concatenate([-u[::-1], u]), np.concatenate([wu[::-1], wu])


def _check_strip(sigma: float, lo: float, hi: float, what: str) -> None:
    if not (lo < sigma < hi):
        raise StripViolation(f"{what}: sigma = {sigma} outside the strip ({lo:g}, {hi:g})")


def _theta(pi: ArchRep) -> float:
    return pi.theta if pi.is_principal else 0.0


def _gamma_pi1(pi1: ArchRep, mu_tau: np.ndarray, mu_delta: int) -> np.ndarray:
    """gamma(1, pi1 x sgn^mu_delta |.|^mu_tau)."""
    return gamma_factor(1.0, pi1, mu_tau, mu_delta)


# ---------------------------------------------------------------------------
# h_vee


def _hvee_t_weights(h: BivariateWeight, y: float, pi2: ArchRep, freq: float) -> _MellinTable:
    """t-integrand of h_vee without the chi^{-1}(t) factor."""
    t, w = h.t_nodes(y, freq)
    if t.size == 0:
        return _MellinTable(t, w)
    chi2bar = pi2.inducing_character().conj()
    q = (t - 1) / t
    w = w * chi2bar(q) * np.abs(t / (t - 1)) ** 0.5 / np.abs(t)
    return _MellinTable(t, w)


def hvee_integral(y: float, h: BivariateWeight, pi1: ArchRep, pi2: ArchRep,
                  contour: ContourSpec = ContourSpec(), theta: float = 0.0) -> _CharIntegral:
    """Character-side data for h_vee(., y); reuse it for many pi."""
    if not pi2.is_principal:
        raise ValueError("pi2 must be a principal series")
    if y == 0:
        raise ValueError("y must be nonzero")
    _check_strip(contour.sigma, _theta(pi1) + _theta(pi2), 0.5 - theta, "h_vee")
    sigma = contour.sigma
    chi2 = pi2.inducing_character()
    # gamma(1, pi1 x conj(chi2)^{-1} x chi^{-1}): exponent conj(chi2)^{-1} = -conj(i r2)
    mu0 = -chi2.conj().tau

    def B_at(u: np.ndarray, table: _MellinTable):
        pos, neg = table.line(sigma, u)
        for sgn, m in ((1, pos), (-1, neg)):
            tau = sigma + sgn * 1j * u
            for delta in (0, 1):
                m[delta] = _gamma_pi1(pi1, mu0 - tau, chi2.delta ^ delta) * m[delta]
        return pos, neg

    if h.is_zero():
        z = {0: np.zeros(0), 1: np.zeros(0)}
        return _CharIntegral(sigma, np.zeros(0), np.zeros(0), z, z, 0.0, 0.0, True)

    U = contour.im_cutoff
    tail = 0.0
    if contour.adaptive:
        U, tail = _adaptive_cutoff(lambda f: _hvee_t_weights(h, y, pi2, f), B_at, sigma, contour)
    table = _hvee_t_weights(h, y, pi2, U)
    u, wu = _gl_line(U, contour.panel, contour.panel_nodes, sigma, contour.fine_until, 0.5 - theta)
    symmetric = pi2.r == 0 and (not pi1.is_principal or pi1.r.imag == 0)
    pos, neg = B_at(u, table)
    return _CharIntegral(sigma, u, wu, pos, neg, tail, U, symmetric)


def h_vee(pi: ArchRep, y: float, h: BivariateWeight, pi1: ArchRep, pi2: ArchRep,
          contour: ContourSpec = ContourSpec()) -> ContourValue:
    """h^vee(pi, y) as a character contour integral of the compactly supported t-transform.

    Symmetry under u -> -u (all spectral parameters real, h real) is used
    to halve the work when it applies.
    """
    data = hvee_integral(y, h, pi1, pi2, contour, theta=_theta(pi))
    return data.value(pi)


def _gamma_half_matrix(rs: np.ndarray, eta: int, tau: np.ndarray, delta: int) -> np.ndarray:
    """gamma(1/2, pi_(r, eta) x chi_(tau, delta)) for a vector of real r (rows) and tau (columns)."""
    rho = eta ^ delta
    r = np.asarray(rs, dtype=float)[:, None]
    t = np.asarray(tau, dtype=complex)[None, :]
    lg = 0
    for sign in (1, -1):
        mu = sign * 1j * r + t
        lg = lg + _lgR(0.5 - mu + rho) - _lgR(0.5 + mu + rho)
    return (-1) ** rho * np.exp(lg)


def _gamma_half_discrete(ks: np.ndarray, tau: np.ndarray) -> np.ndarray:
    k = np.asarray(ks, dtype=float)[:, None]
    t = np.asarray(tau, dtype=complex)[None, :]
    a = (k - 1) / 2
    return (1j ** np.asarray(ks)[:, None]) * np.exp(_lgC(0.5 - t + a) - _lgC(0.5 + t + a))


def _char_values_principal(data: "_CharIntegral", rs: np.ndarray, eta: int, chunk: int = 64) -> np.ndarray:
    """data.value(pi_(r, eta)) for many real r at once."""
    out = np.empty(len(rs), dtype=complex)
    if data.u.size == 0:
        out[:] = 0
        return out
    tau = data.sigma + 1j * data.u
    for i in range(0, len(rs), chunk):
        r = rs[i:i + chunk]
        acc = np.zeros(len(r), dtype=complex)
        for delta in (0, 1):
            g = _gamma_half_matrix(r, eta, tau, delta)
            if data.symmetric:
                acc += 2 * ((g * data.B_pos[delta][None, :]).real @ data.wu)
            else:
                gm = _gamma_half_matrix(r, eta, np.conj(tau), delta)
                acc += (g * data.B_pos[delta][None, :] + gm * data.B_neg[delta][None, :]) @ data.wu
        out[i:i + chunk] = 0.5 * acc / (2 * math.pi)
    return out


def _char_values_discrete(data: "_CharIntegral", ks: np.ndarray) -> np.ndarray:
    if data.u.size == 0 or len(ks) == 0:
        return np.zeros(len(ks), dtype=complex)
    tau = data.sigma + 1j * data.u
    acc = np.zeros(len(ks), dtype=complex)
    g = _gamma_half_discrete(ks, tau)
    gm = _gamma_half_discrete(ks, np.conj(tau))
    for delta in (0, 1):
        if data.symmetric:
            acc += 2 * ((g * data.B_pos[delta][None, :]).real @ data.wu)
        else:
            acc += (g * data.B_pos[delta][None, :] + gm * data.B_neg[delta][None, :]) @ data.wu
    return 0.5 * acc / (2 * math.pi)


# ---------------------------------------------------------------------------
# H, h_flat, w


def h_flat(chi: ArchCharacter, y: float, h: BivariateWeight) -> complex:
    """h^flat(chi, y) = int h(z, y z) chi(z) d^x z."""
    if h.is_zero():
        return 0j
    return complex(h.H(y, chi)[0])


def H_of(y: float, chi0: ArchCharacter, h) -> complex:
    """H(y, chi0) = int h(z, y z) chi0(z) d^x z (the same integral as h_flat, arguments swapped)."""
    if h.is_zero():
        return 0j
    return complex(np.atleast_1d(h.H(y, chi0))[0])


def _y_nodes(h, freq: float, split_at: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes over the support of H(., chi0)."""
    ys, ws = [], []
    for lo, hi in h.H_support():
        pieces = [(lo, hi)]
        if split_at is not None and lo < split_at < hi:
            pieces = [(lo, split_at), (split_at, hi)]
        for a, b in pieces:
            tmin = min(abs(a), abs(b))
            rel = (b - a) / 2 / max(tmin, 1e-300)
            if split_at is not None:
                rel = max(rel, (b - a) / 2 / max(min(abs(a - split_at), abs(b - split_at)), 1e-3))
            if split_at is not None and (a == split_at or b == split_at):
                y, w = _de_nodes(a, b, _step_for(freq, min(rel, 50.0)) / 2)
            else:
                y, w = _tanh_nodes(a, b, _step_for(freq, min(rel, 50.0)))
            ys.append(y)
            ws.append(w)
    if not ys:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(ys), np.concatenate(ws)


def _de_nodes(lo: float, hi: float, step: float, reach: float = 3.2) -> tuple[np.ndarray, np.ndarray]:
    """tanh-sinh nodes, for integrands with an algebraic endpoint singularity."""
    m, d = 0.5 * (lo + hi), 0.5 * (hi - lo)
    n = int(math.ceil(reach / step))
    w = step * np.arange(-n, n + 1)
    s = 0.5 * math.pi * np.sinh(w)
    t = m + d * np.tanh(s)
    wt = step * d * 0.5 * math.pi * np.cosh(w) / np.cosh(s) ** 2
    keep = (t > lo) & (t < hi)
    return t[keep], wt[keep]


def w_eta_chi(eta: ArchCharacter, chi: ArchCharacter, h) -> complex:
    """w(eta, chi) = int H(y, chi) eta(y) d^x y."""
    if h.is_zero():
        return 0j
    y, w = _y_nodes(h, abs(eta.tau.imag))
    vals = np.asarray(h.H(y, chi)) * eta(y) / np.abs(y) * w
    return neumaier_sum(vals)


# ---------------------------------------------------------------------------
# h_sharp


def _hsharp_table(h, chi0: ArchCharacter, pi2: ArchRep, freq: float) -> _MellinTable:
    """x = 1 - y nodes carrying H(y, chi0) chi0(x) conj(chi2)(y) |y|^(1/2) / |x| d^x y."""
    y, w = _y_nodes(h, freq, split_at=1.0)
    if y.size == 0:
        return _MellinTable(y, w, sign=1)
    x = 1 - y
    chi2bar = pi2.inducing_character().conj()
    vals = np.asarray(h.H(y, chi0)) * chi0(x) * chi2bar(y) * np.sqrt(np.abs(y)) / np.abs(x) / np.abs(y) * w
    return _MellinTable(x, vals, sign=1)


def hsharp_integral(chi0: ArchCharacter, h, pi1: ArchRep, pi2: ArchRep,
                    contour: ContourSpec = ContourSpec(), theta: float = 0.0) -> _CharIntegral:
    """Character-side data for h_sharp(., chi0); reuse it for many pi."""
    if not pi2.is_principal:
        raise ValueError("pi2 must be a principal series")
    if chi0.real_part <= -0.5:
        raise ValueError("Re(chi0) must exceed -1/2")
    _check_strip(contour.sigma, _theta(pi1), 0.5 - theta, "h_sharp")
    sigma = contour.sigma
    chi2 = pi2.inducing_character()
    mu0 = -chi2.conj().tau

    def B_at(u: np.ndarray, table: _MellinTable):
        pos, neg = table.line(sigma, u)
        for sgn, m in ((1, pos), (-1, neg)):
            tau = sigma + sgn * 1j * u
            for delta in (0, 1):
                m[delta] = _gamma_pi1(pi1, mu0 - tau, chi2.delta ^ delta) * m[delta]
        return pos, neg

    if h.is_zero():
        z = {0: np.zeros(0), 1: np.zeros(0)}
        return _CharIntegral(sigma, np.zeros(0), np.zeros(0), z, z, 0.0, 0.0, True)
    U = contour.im_cutoff
    tail = 0.0
    if contour.adaptive:
        U, tail = _adaptive_cutoff(lambda f: _hsharp_table(h, chi0, pi2, f), B_at, sigma, contour)
    table = _hsharp_table(h, chi0, pi2, U)
    u, wu = _gl_line(U, contour.panel, contour.panel_nodes, sigma, contour.fine_until, 0.5 - theta)
    symmetric = (pi2.r == 0 and chi0.tau.imag == 0 and (not pi1.is_principal or pi1.r.imag == 0)
                 and _weight_is_real(h))
    pos, neg = B_at(u, table)
    return _CharIntegral(sigma, u, wu, pos, neg, tail, U, symmetric)


def _weight_is_real(h) -> bool:
    return isinstance(h, (BivariateWeight, DiagonalWeight))


def _fast_path_case(h, chi0: ArchCharacter, pi: ArchRep, pi1: ArchRep, pi2: ArchRep) -> str | None:
    """Which residue-kernel case applies, or None."""
    if not chi0.is_trivial() or not pi.is_principal or pi.eta != 0 or pi.r.imag != 0:
        return None
    if not (pi1.is_principal and pi1.r == 0 and pi1.eta == 0 and pi2.r == 0 and pi2.eta == 0):
        return None
    sup = h.H_support()
    if not sup:
        return None
    lo, hi = min(a for a, _ in sup), max(b for _, b in sup)
    if 0 < lo and hi <= 1:
        return "unit-interval"
    if lo >= 1:
        return "beyond-one"
    # for H on (-oo, 0) the kernel argument 1 - y exceeds 1, where the
    # residue series does not apply; the contour route handles it
    return None


def h_sharp(pi: ArchRep, chi0: ArchCharacter, h, pi1: ArchRep, pi2: ArchRep,
            contour: ContourSpec = ContourSpec(), method: str = "auto") -> ContourValue:
    """h^sharp(pi, chi0).

    ``method="contour"`` evaluates the character integral directly.
    ``method="residue"`` uses the closed residue kernel, which is available
    when chi0 is trivial, pi is an even principal series, pi1 and pi2 are
    spherical with parameter 0 and H(., triv) lives in (0, 1) or (1, oo).  ``"auto"`` picks the residue kernel when it applies.
    """
    if method not in ("auto", "contour", "residue"):
        raise ValueError("method must be auto, contour or residue")
    case = _fast_path_case(h, chi0, pi, pi1, pi2) if method != "contour" else None
    if method == "residue" and case is None:
        raise ValueError("the residue kernel does not apply to these inputs")
    if case is not None:
        return ContourValue(_hsharp_residue(pi.r.real, h), 0.0, 0.0)
    data = hsharp_integral(chi0, h, pi1, pi2, contour, theta=_theta(pi))
    return data.value(pi)


def _hsharp_residue(r: float, h) -> complex:
    """(1/2) int phi(y) K_res(r, 1 - y) dy, phi(y) = H(y, triv) |y|^(-1/2)."""
    if h.is_zero():
        return 0j
    y, w = _y_nodes(h, 0.0)
    phi = np.asarray(h.H(y)) / np.sqrt(np.abs(y))
    k = residue_kernel(r, 1 - y)
    return 0.5 * neumaier_sum(w * phi * k)


# ---------------------------------------------------------------------------
# hypergeometric kernels


def _pm_terms(r: float, x: np.ndarray, power_sign: int) -> np.ndarray:
    """Gamma(1/2+ir)^2/Gamma(1+2ir) |x|^(-1/2 + power_sign*i r) F(1/2+ir, 1/2+ir; 1+2ir; x)."""
    a = 0.5 + 1j * r
    coef = np.exp(2 * _lg(a) - _lg(1 + 2j * r))
    ax = np.abs(x)
    return coef * np.exp((-0.5 + power_sign * 1j * r) * np.log(ax)) * hyp2f1(a, a, 2 * a, x)


def _even_limit(f, r: float, h0: float = 2e-3) -> complex:
    """Value at r of an even analytic function near 0 from samples at r_j = j h0.

    Fits a cubic in r^2 through four samples (a 4-term Taylor expansion).
    """
    rj = h0 * np.arange(1, 5)
    vals = np.array([f(v) for v in rj])
    V = np.vander(rj**2, 4, increasing=True)
    coef = np.linalg.solve(V, vals)
    return (np.vander(np.atleast_1d(r * r), 4, increasing=True) @ coef)


def residue_kernel(r: float, t) -> np.ndarray:
    """2 sum_+- |t|^(-1/2 +- i r) (1 +- i/sinh(pi r)) Gamma(1/2 +- i r)^2/Gamma(1 +- 2 i r) F(., ., ., t).

    Defined for real t < 1, t != 0.  It equals the shifted contour integral
    int_(3/4) t^(-s) G(s) ds/(2 pi i) for 0 < t < 1; for t < 0 it is the
    kernel of the case where the weight lives beyond 1.  Even in r; the
    removable singularity at r = 0 is handled by ``_even_limit``.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t >= 1) or np.any(t == 0):
        raise ValueError("residue_kernel needs t < 1, t != 0")
    r = abs(float(r))

    def direct(rv: float) -> np.ndarray:
        tp = _pm_terms(rv, t, 1)
        # the minus term is the complex conjugate of the plus term for real r
        s = math.sinh(math.pi * rv)
        return 2 * ((tp + np.conj(tp)) + (1j / s) * (tp - np.conj(tp)))

    val = _even_limit(direct, r) if r < 1e-3 else direct(r)
    val = np.real_if_close(np.asarray(val, dtype=complex), tol=1e6)
    return complex(np.atleast_1d(val)[0]) if scalar else np.asarray(val, dtype=complex)


def _kernel_terms_extended(tv: complex, y: np.ndarray) -> np.ndarray:
    # same sum as in kernel_K, carried in the wide-float back end
    ctx = _arith("extended").ctx
    tv = ctx.mpc(tv)
    total = np.zeros(len(y), dtype=object)
    total[:] = [ctx.mpc(0)] * len(y)
    for sg in (1, -1):
        a = ctx.mpf(0.5) + sg * 1j * tv
        coef = ctx.exp(2 * log_gamma(complex(a), "extended") - log_gamma(complex(1 + 2j * sg * tv), "extended"))
        F = hyp2f1(complex(a), complex(a), complex(2 * a), -1 / y, "extended")
        pw = np.array([ctx.exp((-0.5 - sg * 1j * tv) * ctx.log(ctx.mpf(float(v)))) for v in y], dtype=object)
        total = total + (1 + sg * 1j / ctx.sinh(ctx.pi * tv)) * coef * pw * F
    return np.array([complex(v / 2) for v in total], dtype=complex)


def kernel_K(t: complex, y, precision: str = "double") -> np.ndarray:
    """K(t, y) = 1/2 sum_+- (1 +- i/sinh(pi t)) y^(-1/2 -+ i t) Gamma(1/2 +- i t)^2/Gamma(1 +- 2 i t) F(., ., ., -1/y).

    ``precision="extended"`` evaluates in the wide-float back end and rounds
    the result to double.
    """
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        raise ValueError("kernel_K needs y > 0")
    t = complex(t)
    if abs(t.imag) >= 0.5:
        raise ValueError("kernel_K needs |Im t| < 1/2")

    def one(tv: complex) -> np.ndarray:
        if precision == "extended":
            return _kernel_terms_extended(tv, y)
        total = 0
        for sg in (1, -1):
            a = 0.5 + sg * 1j * tv
            coef = np.exp(2 * _lg(a) - _lg(1 + 2j * sg * tv))
            term = coef * np.exp((-0.5 - sg * 1j * tv) * np.log(y)) * hyp2f1(a, a, 2 * a, -1 / y)
            total = total + (1 + sg * 1j / np.sinh(math.pi * tv)) * term
        return 0.5 * total

    if abs(t) < 1e-3:
        if t.imag != 0:
            raise ValueError("kernel_K near t = 0 is only supported for real t")
        val = _even_limit(one, t.real)
    else:
        val = one(t)
    val = np.asarray(val, dtype=complex)
    return complex(val.reshape(-1)[0]) if scalar else val


# ---------------------------------------------------------------------------
# the classical transforms


@dataclass(frozen=True)
class MellinImage:
    """V(t) = int H(z) |z|^(-i t) d^x z with H(z) = phi(z) |z|^(1/2)."""

    phi: TestFunction

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.phi.mellin(0.5 - 1j * t, 0)

    def inner_cosine(self, y: np.ndarray) -> np.ndarray:
        """int V(x) cos(x log((y+1)/y)) dx, in closed form."""
        y = np.asarray(y, dtype=float)
        q = 1 + 1 / y
        total = np.zeros(y.shape)
        for s1 in (1, -1):
            for s2 in (1, -1):
                total = total + q ** (0.5 * s1) * self.phi(s2 * q**s1)
        return math.pi * total

    def is_zero(self) -> bool:
        return self.phi.is_zero()


def motohashi_check(V, t: float, spec: QuadratureSpec = QuadratureSpec()) -> complex:
    """V-check(t) = 2 int_0^oo (int V(x) cos(x log((y+1)/y)) dx) K(t, y) dy / sqrt(y (1 + y)).

    V is either a ``MellinImage`` (inner integral in closed form) or an even
    callable in the spectral variable (inner integral by quadrature).
    """
    if isinstance(V, MellinImage):
        if V.is_zero():
            return 0j
        return _check_from_phi(V, t)
    return _check_generic(V, t, spec)


def _q_pieces(phi: TestFunction) -> list[tuple[int, int, float, float]]:
    """For each (s1, s2) the y-interval where phi(s2 q^s1) can be nonzero, q = 1 + 1/y."""
    out = []
    for lo, hi in phi.support():
        s2 = 1 if lo > 0 else -1
        a, b = sorted((abs(lo), abs(hi)))
        # q^s1 in [a, b] with q in (1, oo)
        if b > 1:
            qa, qb = max(a, 1.0), b
            if qb > qa:
                out.append((1, s2, 1 / (qb - 1), 1 / (qa - 1) if qa > 1 else math.inf))
        if a < 1:
            qa, qb = 1 / min(b, 1.0), 1 / a
            if qb > qa:
                out.append((-1, s2, 1 / (qb - 1), 1 / (qa - 1) if qa > 1 else math.inf))
    return out


def _check_from_phi(V: MellinImage, t: float) -> complex:
    """Outer y-integral with the hypergeometric kernel K(t, y)."""
    total = []
    for atom in V.phi.atoms:
        total.extend(_check_atom(TestFunction([atom]), t))
    return neumaier_sum(total)


def _check_atom(phi: TestFunction, t: float) -> list[complex]:
    # one atom at a time: overlapping atoms must not be integrated twice
    total = []
    for s1, s2, ylo, yhi in _q_pieces(phi):
        if math.isinf(yhi):
            raise MixedSupport("phi touches |x| = 1; the closed inner form is singular there")
        # integrate in the phi variable x = s2 q^s1 so the bump is sampled well
        xs = sorted((s2 * (1 + 1 / ylo) ** s1, s2 * (1 + 1 / yhi) ** s1))
        x, w = _tanh_nodes(xs[0], xs[1], _step_for(abs(t), 1.0))
        q = np.abs(x) ** s1
        y = 1 / (q - 1)
        dy = np.abs(y * y * s1 * np.abs(x) ** (s1 - 1))  # |dy/dx| with y = 1/(q-1), q = |x|^s1
        vals = math.pi * q ** (0.5 * s1) * phi(x) * kernel_K(t, y) / np.sqrt(y * (1 + y)) * dy * w
        total.append(2 * neumaier_sum(vals))
    return total


def _check_generic(V, t: float, spec: QuadratureSpec, x_max: float = 60.0) -> complex:
    """Both integrals by quadrature; V must decay fast enough to truncate at |x| = x_max."""
    xg, wg = gauss_legendre(64)
    edges = np.linspace(0, x_max, int(4 * x_max) + 1)
    xs = (((edges[:-1] + edges[1:]) / 2)[:, None] + ((edges[1:] - edges[:-1]) / 2)[:, None] * xg).ravel()
    ws = (((edges[1:] - edges[:-1]) / 2)[:, None] * wg).ravel()
    vx = np.asarray(V(xs), dtype=complex) * ws
    if not np.any(vx):
        return 0j

    def outer(v: np.ndarray) -> np.ndarray:
        # y = exp(v) over the real line
        y = np.exp(v)
        L = np.log1p(1 / y)
        inner = 2 * (np.cos(np.multiply.outer(L, xs)) @ vx)
        return 2 * inner * kernel_K(t, y) / np.sqrt(y * (1 + y)) * y

    res = integrate(lambda s: outer(np.log(s / (1 - s))) / (s * (1 - s)), 1e-12, 1 - 1e-12, spec)
    return res.value


def motohashi_tilde(V: TestFunction, t: float, spec: QuadratureSpec = QuadratureSpec()) -> complex:
    """V-tilde(t) = int_0^oo K(t, y) V(y) dy."""
    if V.is_zero():
        return 0j
    if any(lo < 0 for lo, _ in V.support()):
        raise ValueError("V must be supported in (0, oo)")
    y, w = V.nodes(abs(t))
    return neumaier_sum(w * kernel_K(t, y))


def wcheck_value(phi: TestFunction, r: float) -> complex:
    """The single-integral form of V-check(r) for V = MellinImage(phi).

    pi sum_+- int phi(t) |1/|t| - 1|^(+- i r) Gamma^2/Gamma F(., ., ., 1 - 1/|t|)
    (1 +- i/sinh(pi r)) dt / sqrt|t (|t| - 1)|.
    """
    if phi.is_zero():
        return 0j
    for lo, hi in phi.support():
        a, b = sorted((abs(lo), abs(hi)))
        if a < 1 < b:
            raise MixedSupport("phi straddles |t| = 1")
    x, w = phi.nodes(abs(r))
    ax = np.abs(x)
    arg = 1 - 1 / ax
    rr = abs(float(r))

    def direct(rv: float) -> np.ndarray:
        a = 0.5 + 1j * rv
        coef = np.exp(2 * _lg(a) - _lg(1 + 2j * rv))
        tp = coef * np.exp(1j * rv * np.log(np.abs(1 / ax - 1))) * hyp2f1(a, a, 2 * a, arg)
        s = math.sinh(math.pi * rv)
        return (tp + np.conj(tp)) + (1j / s) * (tp - np.conj(tp))

    kern = _even_limit(direct, rr) if rr < 1e-3 else direct(rr)
    vals = math.pi * w * np.asarray(kern) / np.sqrt(np.abs(ax * (ax - 1)))
    return neumaier_sum(vals)


def appendix_check(phi: TestFunction, r: float, spec: QuadratureSpec = QuadratureSpec(),
                   contour: ContourSpec = ContourSpec()) -> tuple[complex, complex, float]:
    """(lhs, rhs, residual): the single-integral V-check(r) against pi h^sharp by the contour route."""
    if phi.is_zero():
        return 0j, 0j, 0.0
    sup = phi.support()
    lo, hi = min(a for a, _ in sup), max(b for _, b in sup)
    # supports are open intervals, so an end may sit at 1
    if not ((0 < lo and hi <= 1) or lo >= 1 or hi < 0):
        raise MixedSupport("phi must live in one of (0, 1), (1, oo), (-oo, 0)")
    lhs = wcheck_value(phi, r)
    p0 = ArchRep.principal(0.0)
    rhs = math.pi * complex(h_sharp(ArchRep.principal(r), ArchCharacter.trivial(), DiagonalWeight(phi),
                                    p0, p0, contour, method="contour"))
    resid = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return lhs, rhs, resid


# ---------------------------------------------------------------------------
# Plancherel measure and inversion

PLANCHEREL_CONSTANT = 1 / (4 * math.pi**2)
"""Calibrated against the h_vee round trip and frozen (see ``calibrate_plancherel``)."""


def plancherel_density(pi: ArchRep, constant: float = PLANCHEREL_CONSTANT) -> float:
    """Density against dr on [0, oo) for principal series, point mass for discrete series.

    Both parities carry c r tanh(pi r); the weight-k discrete series carries c (k - 1).
    """
    if pi.is_principal:
        if pi.r.imag != 0:
            raise ValueError("plancherel_density needs a tempered (real r) principal series")
        r = abs(pi.r.real)
        return constant * r * math.tanh(math.pi * r)
    return constant * (pi.k - 1)


@dataclass(frozen=True)
class SpectralGrid:
    """Gauss-Legendre nodes on [0, R_cut] (shared by both parities) and even k <= K_cut."""

    r: np.ndarray
    weights: np.ndarray
    ks: np.ndarray
    R_cut: float
    K_cut: int

    def restrict(self, R_cut: float) -> np.ndarray:
        """Mask of nodes inside [0, R_cut]; R_cut must be a panel edge of this grid."""
        return self.r <= R_cut


def spectral_grid(R_cut: float = 40.0, K_cut: int = 40, panel: float = 2.0, nodes: int = 20) -> SpectralGrid:
    npan = max(1, int(math.ceil(R_cut / panel)))
    edges = np.linspace(0.0, R_cut, npan + 1)
    x, w = gauss_legendre(nodes)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    r = (mid[:, None] + half[:, None] * x).ravel()
    wr = (half[:, None] * w).ravel()
    return SpectralGrid(r, wr, np.arange(2, K_cut + 1, 2), R_cut, K_cut)


@dataclass(frozen=True)
class SpectralTable:
    """Values of a forward transform on a SpectralGrid: principal[eta][i] and discrete[j]."""

    grid: SpectralGrid
    principal: dict[int, np.ndarray]
    discrete: np.ndarray
    kind: str
    point: float | None = None
    chi0: ArchCharacter | None = None

    def is_zero(self) -> bool:
        return not (np.any(self.principal[0]) or np.any(self.principal[1]) or np.any(self.discrete))


def _table_from(data: _CharIntegral, grid: SpectralGrid) -> tuple[dict[int, np.ndarray], np.ndarray]:
    principal = {eta: _char_values_principal(data, grid.r, eta) for eta in (0, 1)}
    return principal, _char_values_discrete(data, grid.ks)


def hvee_table(y: float, h: BivariateWeight, pi1: ArchRep, pi2: ArchRep, grid: SpectralGrid,
               contour: ContourSpec = ContourSpec()) -> SpectralTable:
    """h_vee(pi, y) for every pi of the grid."""
    data = hvee_integral(y, h, pi1, pi2, contour)
    principal, discrete = _table_from(data, grid)
    return SpectralTable(grid, principal, discrete, "vee", point=y)


def hsharp_table(chi0: ArchCharacter, h, pi1: ArchRep, pi2: ArchRep, grid: SpectralGrid,
                 contour: ContourSpec = ContourSpec()) -> SpectralTable:
    """h_sharp(pi, chi0) for every pi of the grid (contour route throughout)."""
    data = hsharp_integral(chi0, h, pi1, pi2, contour)
    principal, discrete = _table_from(data, grid)
    return SpectralTable(grid, principal, discrete, "sharp", chi0=chi0)


def spectral_taper(r: np.ndarray, R_cut: float, fraction: float) -> np.ndarray:
    """Smooth cutoff: 1 below (1 - fraction) R_cut, 0 above R_cut, C^oo in between."""
    r = np.asarray(r, dtype=float)
    if fraction <= 0:
        return (r <= R_cut).astype(float)
    a = R_cut * (1 - fraction)
    x = np.clip((r - a) / (R_cut - a), 0.0, 1.0)
    out = np.zeros(r.shape)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    e1, e2 = np.exp(-1 / xi), np.exp(-1 / (1 - xi))
    out[inner] = e2 / (e1 + e2)
    out[x == 0] = 1.0
    return out


def _spectral_side(table: SpectralTable, tau: np.ndarray, delta: int, R_cut: float, constant: float,
                   taper: float = 0.0) -> np.ndarray:
    """int_pi table(pi) gamma(1/2, pi x chi) dpi at chi = sgn^delta |.|^tau, over r <= R_cut."""
    g = table.grid
    keep = g.r <= R_cut + 1e-12
    r = g.r[keep]
    dens = constant * r * np.tanh(math.pi * r) * g.weights[keep] * spectral_taper(r, R_cut, taper)
    out = np.zeros(tau.shape, dtype=complex)
    for eta in (0, 1):
        c = dens * table.principal[eta][keep]
        for i in range(0, len(r), 64):
            out += c[i:i + 64] @ _gamma_half_matrix(r[i:i + 64], eta, tau, delta)
    if len(g.ks):
        c = constant * (g.ks - 1) * table.discrete
        out += c @ _gamma_half_discrete(g.ks, tau)
    return out


def _tail_bound(table: SpectralTable, R_cut: float, constant: float, width: float = 2.0) -> float:
    """Plancherel mass of |table| on the last panel below R_cut: a proxy for the neglected tail."""
    g = table.grid
    sel = (g.r <= R_cut + 1e-12) & (g.r > R_cut - width)
    dens = constant * g.r[sel] * np.tanh(math.pi * g.r[sel]) * g.weights[sel]
    return float(sum(np.sum(dens * np.abs(table.principal[eta][sel])) for eta in (0, 1)))


INVERSION_TAPER = 0.5
"""Fraction of [0, R_cut] over which the Plancherel density is smoothly switched off."""

OUTER_FACTOR = 3.0
"""Default outer (character) cutoff as a multiple of R_cut."""


def _outer_integral(table: SpectralTable, w0: float, mu0: complex, mu_delta: int, pi1: ArchRep,
                    contour: ContourSpec, R_cut: float, outer_cutoff: float | None,
                    constant: float, taper: float) -> complex:
    """(1/2) sum_delta int chi(w0) gamma(1, pi1 x sgn^mu_delta |.|^mu0 x chi^-1) P(chi) dchi.

    A hard cut of the spectral integral at R_cut makes P(chi) ring out to
    |Im chi| well beyond R_cut; tapering the density smoothly keeps P
    concentrated and the outer integral stable.
    """
    sigma = contour.sigma
    V = outer_cutoff if outer_cutoff is not None else OUTER_FACTOR * R_cut
    v, wv = _gl_line(V, 1.0, 16, sigma, V + 1.0, 0.5)
    total = []
    for delta in (0, 1):
        for sg in (1, -1):
            tau = sigma + sg * 1j * v
            P = _spectral_side(table, tau, delta, R_cut, constant, taper)
            g1 = _gamma_pi1(pi1, mu0 - tau, mu_delta ^ delta)
            chi = np.sign(w0) ** delta * np.exp(tau * math.log(abs(w0)))
            total.append(np.sum(wv * chi * g1 * P))
    return 0.5 * neumaier_sum(total) / (2 * math.pi)


def invert_h(y1: float, y2: float, table: SpectralTable, pi1: ArchRep, pi2: ArchRep,
             contour: ContourSpec = ContourSpec(), R_cut: float | None = None,
             outer_cutoff: float | None = None, tol: float | None = None,
             constant: float = PLANCHEREL_CONSTANT, taper: float = INVERSION_TAPER) -> ContourValue:
    """Recover h(y1, y2) from h_vee(., y1 - y2) on a spectral grid.

    The spectral integral is done first, for every character on the outer
    line, and the character integral second.  The density is tapered over
    the top ``taper`` fraction of [0, R_cut].  ``tail`` on the result is the
    Plancherel mass of |h_vee| over the last panel below R_cut, scaled by
    the prefactor; with ``tol`` set an InsufficientGrid is raised when it
    exceeds tol.
    """
    if y1 == 0 or y2 == 0:
        raise ValueError("y1 and y2 must be nonzero")
    if y1 == y2:
        raise ValueError("invert_h needs y1 != y2")
    if table.kind != "vee" or table.point is None or abs(table.point - (y1 - y2)) > 1e-12 * max(1, abs(y1 - y2)):
        raise ValueError("the table must hold h_vee(., y1 - y2)")
    _check_strip(contour.sigma, _theta(pi1) + _theta(pi2), 0.5, "invert_h")
    R = table.grid.R_cut if R_cut is None else min(R_cut, table.grid.R_cut)
    if table.is_zero():
        return ContourValue(0j, 0.0, 0.0)
    chi2bar = pi2.inducing_character().conj()
    pref = complex(chi2bar(np.array(y1 / y2))) * math.sqrt(abs(y1 * y2)) / abs(y1 - y2)
    val = pref * _outer_integral(table, 1 - y2 / y1, chi2bar.tau, chi2bar.delta, pi1, contour, R,
                                 outer_cutoff, constant, taper)
    tail = abs(pref) * _tail_bound(table, R, constant)
    if tol is not None and tail > tol:
        raise InsufficientGrid(f"spectral tail {tail:.3g} above tolerance {tol:.3g} at R_cut = {R}")
    return ContourValue(val, tail, R)


def invert_H(y: float, chi0: ArchCharacter, table: SpectralTable, pi1: ArchRep, pi2: ArchRep,
             contour: ContourSpec = ContourSpec(), R_cut: float | None = None,
             outer_cutoff: float | None = None, tol: float | None = None,
             constant: float = PLANCHEREL_CONSTANT, taper: float = INVERSION_TAPER) -> ContourValue:
    """Recover H(y, chi0) from h_sharp(., chi0) on a spectral grid."""
    if y == 0 or y == 1:
        raise ValueError("invert_H needs y not in {0, 1}")
    if chi0.real_part <= -0.5:
        raise ValueError("Re(chi0) must exceed -1/2")
    if table.kind != "sharp" or table.chi0 != chi0:
        raise ValueError("the table must hold h_sharp(., chi0)")
    _check_strip(contour.sigma, _theta(pi1), 0.5, "invert_H")
    R = table.grid.R_cut if R_cut is None else min(R_cut, table.grid.R_cut)
    if table.is_zero():
        return ContourValue(0j, 0.0, 0.0)
    chi2 = pi2.inducing_character()
    chi2bar = chi2.conj()
    x = np.array(1 - y)
    pref = (complex(chi2.inverse().conj()(np.array(y))) * math.sqrt(abs(y))
            / (complex(chi0(x)) * abs(1 - y)))
    val = pref * _outer_integral(table, 1 - y, chi2bar.tau, chi2bar.delta, pi1, contour, R,
                                 outer_cutoff, constant, taper)
    tail = abs(pref) * _tail_bound(table, R, constant)
    if tol is not None and tail > tol:
        raise InsufficientGrid(f"spectral tail {tail:.3g} above tolerance {tol:.3g} at R_cut = {R}")
    return ContourValue(val, tail, R)


def calibrate_plancherel(h: BivariateWeight, y1: float = 1.0, y2: float = 0.5, R_cut: float = 40.0,
                         K_cut: int = 40, contour: ContourSpec = ContourSpec()) -> float:
    """The constant c making the h_vee round trip reproduce h(y1, y2) exactly.

    Densities are taken as c r tanh(pi r) and c (k - 1); the round trip is
    linear in c, so one run with c = 1 fixes it.  The hard cutoff is used
    here so that the answer does not depend on the taper.
    """
    p0 = ArchRep.principal(0.0)
    table = hvee_table(y1 - y2, h, p0, p0, spectral_grid(R_cut, K_cut), contour)
    raw = complex(invert_h(y1, y2, table, p0, p0, contour, constant=1.0, taper=0.0, outer_cutoff=R_cut + 20.0))
    return float((complex(h(y1, y2)) / raw).real)


# ---------------------------------------------------------------------------
# Whittaker function


def whittaker_spherical(r: float, y: float) -> float:
    """W(a(y)) = 2 |y|^(1/2) K_(ir)(2 pi |y|)."""
    if y == 0:
        raise ValueError("y must be nonzero")
    ay = abs(float(y))
    return float(2 * math.sqrt(ay) * np.real(bessel_K(1j * r, 2 * math.pi * ay)))
