import json
import math
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgl2local.arch_local import ArchRep, BivariateWeight, TestFunction, hvee_integral
from pgl2local.global_demo import (
    DivisorSource,
    HeckeSource,
    InsufficientCoefficients,
    KimSarnakWarning,
    MissingData,
    MultiplicativityWarning,
    ShiftedSumSpec,
    SpectralDatum,
    Window,
    c_abs_from_L,
    config_hash,
    divisor_coeffs,
    divisor_main_term,
    ingest_spectral_data,
    scaling_experiment,
    shifted_sum_lhs,
    spectral_rhs_truncated,
    write_spectral_data,
)

H = BivariateWeight(TestFunction.bump(0.1, 3), TestFunction.bump(0.1, 3))


def naive_tau(n: int) -> int:
    return sum(1 for d in range(1, n + 1) if n % d == 0)


# ---- coefficients and the shifted sum


def test_divisor_sieve_small():
    tau = divisor_coeffs(60)
    assert tau[0] == 0
    assert all(tau[n] == naive_tau(n) for n in range(1, 61))


def test_divisor_sieve_asymptotics():
    N = 10**6
    total = int(divisor_coeffs(N).sum())
    expected = N * math.log(N) + (2 * np.euler_gamma - 1) * N
    assert abs(total - expected) <= math.sqrt(N)


def test_shifted_sum_zero_cases():
    src = DivisorSource()
    assert shifted_sum_lhs(ShiftedSumSpec(src, src, 3, Window(1, 2, 100, 50, amplitude=0.0))) == 0
    # (X + lo Y, X + hi Y) contains no integer
    assert shifted_sum_lhs(ShiftedSumSpec(src, src, 3, Window(1, 2, 10.1, 0.2))) == 0


def test_shift_must_be_positive():
    with pytest.raises(ValueError):
        ShiftedSumSpec(DivisorSource(), DivisorSource(), 0, Window())


def test_shifted_sum_brute_force():
    rng = random.Random(20240611)
    src = DivisorSource()
    for _ in range(20):
        X = rng.uniform(0, 400)
        Y = rng.uniform(1, 80)
        b = rng.randint(1, 30)
        w = Window(1, 2, X, Y, amplitude=rng.uniform(0.5, 2))
        spec = ShiftedSumSpec(src, src, b, w)
        lo, hi = X + Y, X + 2 * Y
        terms = [naive_tau(n + b) * naive_tau(n) * float(w(n)) for n in range(1, math.ceil(hi) + 1) if lo < n < hi]
        assert shifted_sum_lhs(spec) == math.fsum(terms)


def test_hecke_source_needs_coefficients():
    d = SpectralDatum(9.5, 1, {1: 1.0, 2: 0.5})
    spec = ShiftedSumSpec(HeckeSource(d), DivisorSource(), 1, Window(1, 2, 0, 2))
    with pytest.raises(InsufficientCoefficients):
        shifted_sum_lhs(spec)


@pytest.mark.parametrize("b", [1, 6])
def test_divisor_main_term(b):
    w = Window(1, 2, 20000, 2000)
    S = shifted_sum_lhs(ShiftedSumSpec(DivisorSource(), DivisorSource(), b, w))
    M = divisor_main_term(b, w)
    assert abs(S - M) < 0.01 * abs(S)


# ---- spectral data


def test_c_abs_from_L():
    assert c_abs_from_L(0.0, 2.0) == 0
    assert c_abs_from_L(1.0, 1.0) == 1
    assert c_abs_from_L(4.0, 2.0) == 1
    with pytest.raises(ValueError):
        c_abs_from_L(1.0, 1.0, tempered=False)
    assert c_abs_from_L(1.0, 1.0, tempered=False, G=4.0) == 2


def _record(**kw):
    rec = {"r": 9.53, "parity": 1, "hecke": {"1": 1.0, "2": 1.5, "3": 0.25, "6": 0.375},
           "L_half": 0.8, "L_one_ad": 1.2, "c_abs": None, "c_sign": None, "source": "synthetic"}
    rec.update(kw)
    return rec


def test_ingest_empty(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    assert ingest_spectral_data(p) == []
    p.write_text("[]")
    assert ingest_spectral_data(p) == []


def test_ingest_roundtrip(tmp_path):
    p, q = tmp_path / "a.json", tmp_path / "b.json"
    p.write_text(json.dumps([_record(), _record(r=12.17, parity=0, c_abs=0.1 + 0.2, c_sign=-1)]))
    data = ingest_spectral_data(p)
    write_spectral_data(data, q)
    again = ingest_spectral_data(q)
    assert again == data
    assert again[1].c_abs == 0.1 + 0.2  # bit exact through JSON
    write_spectral_data(again, p)
    assert p.read_bytes() == q.read_bytes()


def test_ingest_kim_sarnak_warning(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps([_record(hecke={"1": 1.0, "2": 10.0})]))
    with pytest.warns(KimSarnakWarning):
        data = ingest_spectral_data(p)
    assert data[0].warnings


def test_ingest_multiplicativity_warning(tmp_path):
    p = tmp_path / "mult.json"
    p.write_text(json.dumps([_record(hecke={"1": 1.0, "2": 1.5, "3": 0.25, "6": 0.5})]))
    with pytest.warns(MultiplicativityWarning):
        ingest_spectral_data(p)
    p.write_text(json.dumps([_record()]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ingest_spectral_data(p)


@pytest.mark.parametrize("bad", [
    "{",
    json.dumps({"r": 1}),
    json.dumps([_record(parity=2)]),
    json.dumps([_record(extra=1)]),
    json.dumps([{"r": 1.0, "parity": 0}]),
    json.dumps([_record(hecke={"x": 1.0})]),
    json.dumps([_record(L_one_ad=0.0)]),
    json.dumps([_record(c_sign=2)]),
])
def test_ingest_schema_errors(tmp_path, bad):
    p = tmp_path / "bad.json"
    p.write_text(bad)
    with pytest.raises(ValueError):
        ingest_spectral_data(p)


def test_coefficient_missing_data():
    with pytest.raises(MissingData):
        SpectralDatum(9.5, 1, {1: 1.0}).coefficient()
    assert SpectralDatum(9.5, 1, {1: 1.0}, L_half=4.0, L_one_ad=2.0).coefficient() == 1


# ---- the truncated spectral side


def test_rhs_empty_data():
    rep = spectral_rhs_truncated(H, 1, [], [5, 10], lhs=2.0)
    assert rep.partial == [0j, 0j] and rep.majorant == [0, 0] and rep.tail == [0, 0]
    assert rep.residuals == [2.0, 2.0]


def test_rhs_single_datum():
    d = SpectralDatum(3.0, 0, {1: 1.0, 2: 0.5}, c_abs=1.0, c_sign=1)
    rep = spectral_rhs_truncated(H, 1, [d], [10.0])
    hv = complex(hvee_integral(1.0, H, ArchRep.principal(0.0), ArchRep.principal(0.0)).value(ArchRep.principal(3.0, 0)))
    assert abs(rep.partial[0] - 0.5 * hv) <= 1e-14 * abs(hv)


def test_rhs_unsigned_gives_majorant_only():
    data = [SpectralDatum(3.0, 0, {2: 0.5}, c_abs=1.0), SpectralDatum(5.0, 1, {2: -0.7}, c_abs=2.0, c_sign=1)]
    rep = spectral_rhs_truncated(H, 2, data, [4.0, 6.0])
    assert rep.partial == [None, None]
    assert rep.majorant[0] < rep.majorant[1] and rep.tail[1] == 0
    assert "nan" in rep.to_csv()


def test_rhs_terms_decay():
    lo = spectral_rhs_truncated(H, 1, [SpectralDatum(5.0, 0, {1: 1.0}, c_abs=1.0)], [100]).majorant[0]
    hi = spectral_rhs_truncated(H, 1, [SpectralDatum(30.0, 0, {1: 1.0}, c_abs=1.0)], [100]).majorant[0]
    assert lo >= 100 * hi


@settings(max_examples=10, deadline=None)
@given(st.lists(st.tuples(st.floats(1, 20), st.floats(-2, 2), st.floats(0, 3)), min_size=1, max_size=5))
def test_rhs_partial_bounded_by_majorant(rows):
    data = [SpectralDatum(r, 0, {1: 1.0, 3: lam}, c_abs=c, c_sign=1 if lam >= 0 else -1) for r, lam, c in rows]
    rep = spectral_rhs_truncated(H, 3, data, [5.0, 25.0])
    for s, m in zip(rep.partial, rep.majorant):
        assert abs(s) <= m * (1 + 1e-12) + 1e-300


def test_rhs_missing_data():
    with pytest.raises(MissingData):
        spectral_rhs_truncated(H, 2, [SpectralDatum(3.0, 0, {1: 1.0}, c_abs=1.0)], [5.0])
    with pytest.raises(MissingData):
        spectral_rhs_truncated(H, 1, [SpectralDatum(3.0, 0, {1: 1.0})], [5.0])


def test_report_formats():
    d = SpectralDatum(3.0, 0, {1: 1.0}, c_abs=1.0, c_sign=1)
    rep = spectral_rhs_truncated(H, 1, [d], [2.0, 4.0], lhs=0.5)
    lines = rep.to_csv().split("\r\n")
    assert lines[0] == "cutoff,partial_sum_re,partial_sum_im,majorant,tail_estimate"
    assert len([x for x in lines if x]) == 3
    assert json.loads(rep.to_json())["lhs"] == 0.5


# ---- scaling experiment


def test_scaling_empty_grid():
    rep = scaling_experiment([])
    assert rep.rows == [] and "ratio_point" in rep.header()


def test_scaling_normalization_and_determinism():
    grid = [(2000.0, 2000.0**0.75, 1), (4000.0, 4000.0**0.75, 1)]
    a = scaling_experiment(grid, samples=8)
    b = scaling_experiment(grid, samples=8)
    assert a.to_csv() == b.to_csv()
    assert max(r.ratio_point for r in a.rows) == 1.0
    assert max(r.ratio_mean for r in a.rows) == 1.0
    for r in a.rows:
        assert r.mean_square >= 0 and r.mean_square_se >= 0 and r.S_sup >= abs(r.S)


def test_scaling_main_term_removes_bulk():
    grid = [(5000.0, 5000.0**0.75, 1)]
    raw = scaling_experiment(grid, samples=4, subtract_main=False).rows[0]
    sub = scaling_experiment(grid, samples=4).rows[0]
    assert abs(sub.S) < 0.05 * abs(raw.S)
    assert abs(raw.S - sub.S - sub.S_main) <= 1e-9 * abs(raw.S)


def test_scaling_main_term_needs_divisor():
    d = SpectralDatum(9.5, 1, {n: 0.0 for n in range(1, 50)})
    with pytest.raises(ValueError):
        scaling_experiment([(10.0, 5.0, 1)], HeckeSource(d), HeckeSource(d))


def test_config_hash_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
