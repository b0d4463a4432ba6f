"""Shifted convolution sums over Q: exact left sides, truncated spectral right sides,
and the short-window scaling experiment.

The spectral side is never closed numerically: complete spectral data
(every Maass form, the continuous spectrum and signed coefficients) is out
of reach, so reports carry partial sums and absolute majorants, and say
what they leave out.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np

from .arch_local import ArchRep, BivariateWeight, ContourSpec, hvee_integral

THETA = 7 / 64
NOT_COMPUTED = ("continuous (Eisenstein) spectrum", "main terms of the shifted sum")


class InsufficientCoefficients(ValueError):
    """The coefficient source does not reach the window."""


class MissingData(ValueError):
    """A spectral datum lacks a field the computation needs."""


class KimSarnakWarning(UserWarning):
    """A Hecke eigenvalue exceeds d(n) n^theta."""


class MultiplicativityWarning(UserWarning):
    """lambda(m) lambda(n) != lambda(mn) for coprime m, n beyond the stated precision."""


# ---------------------------------------------------------------------------
# coefficients


def divisor_coeffs(N: int) -> np.ndarray:
    """tau(n) for 0 <= n <= N (tau(0) = 0), by sieve."""
    if N < 1:
        raise ValueError("N must be at least 1")
    tau = np.zeros(N + 1, dtype=np.int64)
    for d in range(1, N + 1):
        tau[d::d] += 1
    return tau


@dataclass(frozen=True)
class DivisorSource:
    """lambda(n) = tau(n), the Hecke eigenvalues of the weight-0 Eisenstein series at 1/2."""

    def coeffs(self, N: int) -> np.ndarray:
        return divisor_coeffs(N).astype(float)

    def label(self) -> str:
        return "divisor"


@dataclass(frozen=True)
class HeckeSource:
    """Eigenvalues from an ingested SpectralDatum."""

    datum: "SpectralDatum"

    def coeffs(self, N: int) -> np.ndarray:
        out = np.zeros(N + 1)
        for n in range(1, N + 1):
            if n not in self.datum.hecke:
                raise InsufficientCoefficients(f"lambda({n}) missing for r = {self.datum.r}")
            out[n] = self.datum.hecke[n]
        return out

    def label(self) -> str:
        return f"hecke(r={self.datum.r!r})"


def _bump(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1
    out = np.zeros(u.shape)
    out[inside] = np.exp(-1 / (1 - u[inside] ** 2))
    return out


@dataclass(frozen=True)
class Window:
    """n -> V((n - X) / Y) with V the standard bump on (lo, hi)."""

    lo: float = 1.0
    hi: float = 2.0
    X: float = 0.0
    Y: float = 1.0
    amplitude: float = 1.0

    def __call__(self, n) -> np.ndarray:
        u = (np.asarray(n, dtype=float) - self.X) / self.Y
        c, w = (self.lo + self.hi) / 2, (self.hi - self.lo) / 2
        return self.amplitude * _bump((u - c) / w)

    def integer_range(self) -> range:
        """Integers n with a possibly nonzero weight."""
        a = math.floor(self.X + self.lo * self.Y)
        b = math.ceil(self.X + self.hi * self.Y)
        return range(max(a, 1), max(b + 1, 1))


@dataclass(frozen=True)
class ShiftedSumSpec:
    """sum_n lambda1(n + b) lambda2(n) w(n)."""

    source1: object
    source2: object
    b: int
    window: Window

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("b must be a positive integer")


def shifted_sum_lhs(spec: ShiftedSumSpec, coeffs: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """The finite sum, with compensated summation in increasing n."""
    rng = spec.window.integer_range()
    if len(rng) == 0 or spec.window.amplitude == 0:
        return 0.0
    top = rng[-1] + spec.b
    if coeffs is None:
        c1, c2 = spec.source1.coeffs(top), spec.source2.coeffs(rng[-1])
    else:
        c1, c2 = coeffs
        if len(c1) <= top or len(c2) <= rng[-1]:
            raise InsufficientCoefficients(f"coefficients needed up to {top}")
    n = np.arange(rng.start, rng.stop)
    terms = c1[n + spec.b] * c2[n] * spec.window(n)
    return math.fsum(terms.tolist())


def divisor_main_density(b: int, x) -> np.ndarray:
    """Main-term density of tau(n) tau(n + b) at n = x.

    sum_q c_q(b) q^-2 (log x + 2 gamma - 2 log q)^2, summed in closed form
    through sum_q c_q(b) q^-s = sigma_(1-s)(b) / zeta(s) and its s-derivatives at 2.
    """
    divs = [d for d in range(1, b + 1) if b % d == 0]
    with mpmath.workdps(30):
        z0, z1, z2 = mpmath.zeta(2), mpmath.zeta(2, derivative=1), mpmath.zeta(2, derivative=2)
        s0 = mpmath.fsum(mpmath.mpf(1) / d for d in divs)
        s1 = mpmath.fsum(-mpmath.log(d) / d for d in divs)
        s2 = mpmath.fsum(mpmath.log(d) ** 2 / d for d in divs)
        f0 = s0 / z0
        f1 = s1 / z0 - s0 * z1 / z0**2
        f2 = s2 / z0 - 2 * s1 * z1 / z0**2 + s0 * (2 * z1**2 / z0**3 - z2 / z0**2)
        g2 = 2 * mpmath.euler
        f0, f1, f2, g2 = float(f0), float(f1), float(f2), float(g2)
    L = np.log(np.asarray(x, dtype=float)) + g2
    # sum c_q q^-2 (L - 2 log q)^2 = F L^2 + 4 F' L + 4 F''
    return f0 * L * L + 4 * f1 * L + 4 * f2


def divisor_main_term(b: int, window: Window) -> float:
    """sum_n (main density at n) w(n)."""
    rng = window.integer_range()
    if len(rng) == 0:
        return 0.0
    n = np.arange(rng.start, rng.stop)
    return math.fsum((divisor_main_density(b, n) * window(n)).tolist())


# ---------------------------------------------------------------------------
# spectral data


@dataclass
class SpectralDatum:
    """One Hecke-Maass form of level 1 with the data needed for the spectral side."""

    r: float
    parity: int
    hecke: dict[int, float]
    L_half: float | None = None
    L_one_ad: float | None = None
    c_abs: float | None = None
    c_sign: int | None = None
    source: str = ""
    warnings: list[str] = field(default_factory=list, compare=False)

    def coefficient(self) -> float:
        """|c_pi|, from c_abs or the L-values."""
        if self.c_abs is not None:
            return self.c_abs
        missing = [k for k in ("L_half", "L_one_ad") if getattr(self, k) is None]
        if missing:
            raise MissingData(f"datum r = {self.r}: missing {', '.join(missing)} (or c_abs)")
        return c_abs_from_L(self.L_half, self.L_one_ad)


def _num_divisors(n: int) -> int:
    count, d = 0, 1
    while d * d <= n:
        if n % d == 0:
            count += 1 if d * d == n else 2
        d += 1
    return count


def kim_sarnak_violations(datum: SpectralDatum, theta: float = THETA) -> list[str]:
    out = []
    for n, lam in sorted(datum.hecke.items()):
        bound = _num_divisors(n) * n**theta
        if abs(lam) > bound * (1 + 1e-12):
            out.append(f"r = {datum.r}: |lambda({n})| = {abs(lam):.6g} exceeds d(n) n^theta = {bound:.6g}")
    return out


def multiplicativity_defects(datum: SpectralDatum, tol: float = 1e-6) -> list[str]:
    """Records where |lambda(2) lambda(3) - lambda(6)| exceeds tol."""
    out = []
    for m, n in ((2, 3),):
        if all(k in datum.hecke for k in (m, n, m * n)):
            d = abs(datum.hecke[m] * datum.hecke[n] - datum.hecke[m * n])
            if d > tol:
                out.append(f"r = {datum.r}: lambda({m}) lambda({n}) - lambda({m * n}) = {d:.3g}")
    return out


def c_abs_from_L(L_half_triple: float, L_one_ad: float, tempered: bool = True,
                 G: float | None = None) -> float:
    """|c_pi| = |L(1/2, pi1 x conj(pi2) x pi)|^(1/2) / L(1, Ad, pi).

    Valid when pi2 is tempered at every place of S; otherwise a correction
    factor G (multiplying |c_pi|^2) must be supplied.
    """
    if L_one_ad <= 0:
        raise ValueError("L(1, Ad) must be positive")
    if L_half_triple < 0:
        raise ValueError("the central value enters through its absolute value; pass |L|")
    base = math.sqrt(L_half_triple) / L_one_ad
    if tempered:
        return base
    if G is None:
        raise ValueError("pi2 is not tempered on S: supply the correction factor G")
    return base * math.sqrt(G)


_RECORD_KEYS = {"r", "parity", "hecke", "L_half", "L_one_ad", "c_abs", "c_sign", "source"}


def ingest_spectral_data(path: str | Path, theta: float = THETA, precision: float = 1e-6) -> list[SpectralDatum]:
    """Read and validate a JSON array of spectral records.

    Kim-Sarnak violations and failures of lambda(2) lambda(3) = lambda(6)
    (beyond ``precision``) are reported as warnings and kept on each record.
    """
    text = Path(path).read_text()
    if not text.strip():
        return []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: line {err.lineno}: {err.msg}") from None
    if not isinstance(raw, list):
        raise ValueError(f"{path}: top level must be an array")
    out = []
    for i, rec in enumerate(raw):
        where = f"{path}: record {i}"
        if not isinstance(rec, dict):
            raise ValueError(f"{where}: not an object")
        unknown = set(rec) - _RECORD_KEYS
        if unknown:
            raise ValueError(f"{where}: unknown fields {sorted(unknown)}")
        for key in ("r", "parity", "hecke"):
            if key not in rec:
                raise ValueError(f"{where}: missing field '{key}'")
        if rec["parity"] not in (0, 1):
            raise ValueError(f"{where}: field 'parity' must be 0 or 1")
        if not isinstance(rec["hecke"], dict):
            raise ValueError(f"{where}: field 'hecke' must be an object")
        try:
            hecke = {int(k): float(v) for k, v in rec["hecke"].items()}
        except (TypeError, ValueError):
            raise ValueError(f"{where}: field 'hecke' needs integer keys and numeric values") from None
        for key in ("L_half", "L_one_ad", "c_abs"):
            if rec.get(key) is not None and not isinstance(rec[key], (int, float)):
                raise ValueError(f"{where}: field '{key}' must be a number or null")
        if rec.get("L_one_ad") is not None and rec["L_one_ad"] <= 0:
            raise ValueError(f"{where}: field 'L_one_ad' must be positive")
        if rec.get("c_sign") not in (None, 1, -1):
            raise ValueError(f"{where}: field 'c_sign' must be 1, -1 or null")
        d = SpectralDatum(float(rec["r"]), int(rec["parity"]), hecke,
                          rec.get("L_half"), rec.get("L_one_ad"), rec.get("c_abs"),
                          rec.get("c_sign"), str(rec.get("source", "")))
        ks, mult = kim_sarnak_violations(d, theta), multiplicativity_defects(d, precision)
        d.warnings = ks + mult
        for msg in ks:
            warnings.warn(msg, KimSarnakWarning, stacklevel=2)
        for msg in mult:
            warnings.warn(msg, MultiplicativityWarning, stacklevel=2)
        out.append(d)
    return out


def write_spectral_data(data: Sequence[SpectralDatum], path: str | Path) -> None:
    records = []
    for d in data:
        records.append({
            "r": d.r, "parity": d.parity,
            "hecke": {str(n): v for n, v in sorted(d.hecke.items())},
            "L_half": d.L_half, "L_one_ad": d.L_one_ad, "c_abs": d.c_abs,
            "c_sign": d.c_sign, "source": d.source,
        })
    Path(path).write_text(json.dumps(records, indent=1) + "\n")


# ---------------------------------------------------------------------------
# reports


def fmt(x: float) -> str:
    """17 significant digits, the CSV number format."""
    return format(float(x), ".17g")


@dataclass
class Report:
    """Partial sums of the spectral side against cutoffs, with majorants."""

    lhs: float | None
    cutoffs: list[float]
    partial: list[complex | None]
    majorant: list[float]
    tail: list[float]
    metadata: dict = field(default_factory=dict)

    @property
    def residuals(self) -> list[float | None]:
        if self.lhs is None:
            return [None] * len(self.cutoffs)
        return [None if s is None else abs(self.lhs - s) for s in self.partial]

    def rows(self) -> list[list[str]]:
        out = [["cutoff", "partial_sum_re", "partial_sum_im", "majorant", "tail_estimate"]]
        for c, s, m, t in zip(self.cutoffs, self.partial, self.majorant, self.tail):
            re, im = ("nan", "nan") if s is None else (fmt(s.real), fmt(s.imag))
            out.append([fmt(c), re, im, fmt(m), fmt(t)])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerows(self.rows())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "lhs": self.lhs,
            "rows": [{"cutoff": c, "partial_sum": None if s is None else [s.real, s.imag],
                      "majorant": m, "tail_estimate": t}
                     for c, s, m, t in zip(self.cutoffs, self.partial, self.majorant, self.tail)],
            "metadata": self.metadata,
        }, indent=1, sort_keys=True)


def spectral_rhs_truncated(h: BivariateWeight, b: int, data: Sequence[SpectralDatum], cutoffs: Sequence[float],
                           pi1: ArchRep | None = None, pi2: ArchRep | None = None,
                           contour: ContourSpec = ContourSpec(), lhs: float | None = None) -> Report:
    """Partial sums of (1/2) sum_j lambda_j(b) b^(-1/2) c_j h_vee(pi_j, b) over r_j <= cutoff.

    The 1/2 is the half-counting measure on the discrete spectrum.  The
    signed sum needs every c_sign; otherwise only the majorant
    sum |lambda_j(b)| b^(-1/2) |c_j| |h_vee| / 2 is meaningful.
    ``tail`` is the majorant mass of the supplied data above each cutoff.
    """
    p0 = ArchRep.principal(0.0)
    pi1 = pi1 or p0
    pi2 = pi2 or p0
    cutoffs = sorted(float(c) for c in cutoffs)
    terms, mags = [], []
    if data:
        problems = []
        for d in data:
            if b not in d.hecke:
                problems.append(f"r = {d.r}: lambda({b})")
            try:
                d.coefficient()
            except MissingData as err:
                problems.append(str(err))
        if problems:
            raise MissingData("; ".join(problems))
        integral = hvee_integral(float(b), h, pi1, pi2, contour)
        for d in data:
            hv = complex(integral.value(ArchRep.principal(d.r, d.parity)))
            c = d.coefficient()
            base = 0.5 * d.hecke[b] / math.sqrt(b) * hv
            mags.append(abs(base) * c)
            terms.append(None if d.c_sign is None else base * c * d.c_sign)
    signed = all(t is not None for t in terms)
    order = sorted(range(len(data)), key=lambda i: (data[i].r, data[i].parity))
    partial, major, tail = [], [], []
    total_major = math.fsum(mags)
    for c in cutoffs:
        idx = [i for i in order if data[i].r <= c]
        m = math.fsum(mags[i] for i in idx)
        major.append(m)
        tail.append(total_major - m)
        if signed:
            re = math.fsum(terms[i].real for i in idx)
            im = math.fsum(terms[i].imag for i in idx)
            partial.append(complex(re, im))
        else:
            partial.append(None)
    meta = {"b": b, "n_data": len(data), "signed": signed, "not_computed": list(NOT_COMPUTED)}
    return Report(lhs, cutoffs, partial, major, tail, meta)


# ---------------------------------------------------------------------------
# short-window scaling experiment


@dataclass
class ScalingRow:
    X: float
    Y: float
    b: int
    S: float
    S_main: float
    S_sup: float
    mean_square: float
    mean_square_se: float
    bound_point: float
    bound_mean: float
    ratio_point: float = 0.0
    ratio_mean: float = 0.0


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    metadata: dict

    def header(self) -> list[str]:
        return list(asdict(self.rows[0]).keys()) if self.rows else [f.name for f in ScalingRow.__dataclass_fields__.values()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.header())
        for row in self.rows:
            w.writerow([fmt(v) for v in asdict(row).values()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows], "metadata": self.metadata},
                          indent=1, sort_keys=True)


def bound_pointwise(X: float, Y: float, b: int, theta: float = THETA, eps: float = 0.05) -> float:
    """X^(1+eps)/Y (Y^(1/2) + b^(1/2)) min(b^theta, 1 + Y b^(1/4)/X)."""
    return X ** (1 + eps) / Y * (math.sqrt(Y) + math.sqrt(b)) * min(b**theta, 1 + Y * b**0.25 / X)


def bound_mean_square(X: float, Y: float, b: int, theta: float = THETA, eps: float = 0.05) -> float:
    """b^(2 theta) X^(2+eps) (1 + b/Y), a bound for int_X^(2X) |S(x, Y, b)|^2 dx."""
    return b ** (2 * theta) * X ** (2 + eps) * (1 + b / Y)


def scaling_experiment(grid: Sequence[tuple[float, float, int]], source1=None, source2=None,
                       window: Window = Window(1.0, 2.0), theta: float = THETA, eps: float = 0.05,
                       samples: int = 64, subtract_main: bool = True) -> ScalingReport:
    """|S(X, Y, b)| and (1/X) int_X^(2X) |S(x, Y, b)|^2 dx against the two bounds.

    With divisor coefficients the sum has a main term of size Y log^2 X
    that the bounds (made for cusp forms) do not cover; ``subtract_main``
    removes it using ``divisor_main_term``.  The integral over [X, 2X] is
    the midpoint rule with ``samples`` points, and ``mean_square_se`` is the
    sampling standard error of that mean.  ``S_sup`` is the largest |S|
    among the samples.  Ratios are normalized so the largest cell is 1.
    """
    source1 = source1 or DivisorSource()
    source2 = source2 or DivisorSource()
    divisor = isinstance(source1, DivisorSource) and isinstance(source2, DivisorSource)
    if subtract_main and not divisor:
        raise ValueError("main-term subtraction is only available for divisor coefficients")
    top = 0
    for X, Y, b in grid:
        top = max(top, math.ceil(2 * X + window.hi * Y) + b + 1)
    c1 = source1.coeffs(top) if grid else np.zeros(1)
    c2 = c1 if source2 == source1 else (source2.coeffs(top) if grid else np.zeros(1))
    rows = []
    for X, Y, b in grid:
        def S_at(x: float) -> float:
            w = Window(window.lo, window.hi, x, Y, window.amplitude)
            val = shifted_sum_lhs(ShiftedSumSpec(source1, source2, b, w), (c1, c2))
            if subtract_main:
                val -= divisor_main_term(b, w)
            return val

        s0 = S_at(X)
        w0 = Window(window.lo, window.hi, X, Y, window.amplitude)
        main = divisor_main_term(b, w0) if subtract_main else 0.0
        xs = X + (np.arange(samples) + 0.5) * (X / samples)
        vals = np.array([S_at(float(x)) for x in xs])
        sq = vals**2
        ms = math.fsum(sq.tolist()) / samples  # (1/X) int_X^2X |S|^2 dx
        se = float(np.std(sq, ddof=1)) / math.sqrt(samples) if samples > 1 else 0.0
        rows.append(ScalingRow(X, Y, b, s0, main, float(np.max(np.abs(vals))), ms, se,
                               bound_pointwise(X, Y, b, theta, eps), bound_mean_square(X, Y, b, theta, eps)))
    raw_point = [r.S_sup / r.bound_point for r in rows]
    raw_mean = [r.mean_square * r.X / r.bound_mean for r in rows]
    np_max = max(raw_point, default=1.0) or 1.0
    nm_max = max(raw_mean, default=1.0) or 1.0
    for r, a, m in zip(rows, raw_point, raw_mean):
        r.ratio_point = a / np_max
        r.ratio_mean = m / nm_max
    meta = {"theta": theta, "eps": eps, "samples": samples, "window": [window.lo, window.hi],
            "main_term_subtracted": subtract_main,
            "source": [getattr(source1, "label", lambda: "?")(), getattr(source2, "label", lambda: "?")()]}
    return ScalingReport(rows, meta)


def config_hash(config: dict) -> str:
    """sha256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()
