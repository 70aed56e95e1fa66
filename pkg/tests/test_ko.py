from __future__ import annotations

import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radial_lab import errors
from radial_lab.ko import (
    CallableNonlinearity,
    PowerLaw,
    Tabulated,
    as_nonlinearity,
    classical_ko_verdict,
    cumulative,
    gamma_tail,
    ko_verdicts,
    sqrt_cumulative,
    sqrtf_equivalence,
    theorem1_classify,
)
from radial_lab.model import BallKind, SystemParams, classify_ball

GRID_S = (1.0, 1.5, 2.0, 3.0, 5.0)
GRID_P = (0.3, 0.5, 1.0, 2.0)
GRID_Q = (0.1, 0.5, 1.0, 1.5)


def plain_slope(s, p, q):
    """Closed-form tail slope of 1/G^e for f = t^s: G ~ s'^(s+2)."""
    return -(s + 2) * p / (2 * p - q + 1)


# --- cumulative integrals ------------------------------------------------------------


@given(st.floats(0, 6))
def test_cumulative_matches_power_law_closed_form(s):
    t = np.logspace(-4, 12, 40)
    F, G = cumulative(PowerLaw(s), t)
    assert np.allclose(F, t ** (s + 1) / (s + 1), rtol=1e-8, atol=0)
    assert np.allclose(G, t ** (s + 2) / ((s + 1) * (s + 2)), rtol=1e-8, atol=0)


def test_cumulative_linear_at_two():
    F, G = cumulative(PowerLaw(1), np.array([2.0]))
    assert F[0] == pytest.approx(2.0, rel=1e-12)
    assert G[0] == pytest.approx(4 / 3, rel=1e-12)


def test_cumulative_tabulated_constant():
    tab = Tabulated(np.array([0.0, 1.0, 10.0, 100.0]), np.array([3.0, 3.0, 3.0, 3.0]))
    t = np.array([0.5, 2.0, 50.0, 1000.0])
    F, G = cumulative(tab, t)
    assert np.allclose(F, 3 * t, rtol=1e-10)
    assert np.allclose(G, 1.5 * t**2, rtol=1e-10)


def test_callable_matches_power_law():
    t = np.logspace(-2, 8, 25)
    Fc, Gc = cumulative(CallableNonlinearity(lambda x: x**2.5, "t^2.5"), t)
    Fp, Gp = cumulative(PowerLaw(2.5), t)
    assert np.allclose(Fc, Fp, rtol=1e-13) and np.allclose(Gc, Gp, rtol=1e-13)


def test_scalar_only_callable_is_vectorised():
    f = CallableNonlinearity(lambda x: math.exp(min(float(np.squeeze(x)), 50.0) / 10.0), "exp-ish")
    F, _ = cumulative(f, np.array([1.0, 2.0]))
    assert F[1] == pytest.approx(10 * (math.exp(0.2) - 1), rel=1e-10)


def test_tabulated_piecewise_linear_in_log_log_is_exact_power():
    t = np.logspace(-2, 4, 7)
    tab = Tabulated(t, t**2)
    x = np.logspace(-1, 6, 30)
    assert np.allclose(tab(x), x**2, rtol=1e-12)
    F, G = cumulative(tab, x)
    assert np.allclose(F, x**3 / 3, rtol=1e-8)


def test_cumulative_rejects_bad_grid():
    with pytest.raises(errors.NonMonotoneInput):
        cumulative(PowerLaw(1), np.array([1.0, 3.0, 2.0]))
    with pytest.raises(errors.NonMonotoneInput):
        cumulative(PowerLaw(1), np.array([0.0, 1.0]))


@pytest.mark.parametrize(
    "t, f",
    [([0, 1, 2], [1, 3, 2]), ([0, 2, 1], [1, 2, 3]), ([0, 1, 2], [0, 0, 1])],
)
def test_tabulated_validation(t, f):
    with pytest.raises(errors.NonMonotoneInput):
        Tabulated(np.array(t, float), np.array(f, float))


def test_callable_spot_check():
    with pytest.raises(errors.NonMonotoneInput):
        CallableNonlinearity(lambda x: np.cos(x) + 2).check()
    with pytest.raises(errors.NonMonotoneInput):
        CallableNonlinearity(lambda x: x - 1).check()
    CallableNonlinearity(lambda x: x**3).check()


def test_tabulated_from_csv(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("t,f\n0,0\n1,1\n10,100\n100,10000\n")
    tab = Tabulated.from_csv(path)
    assert tab(np.array([1000.0]))[0] == pytest.approx(1e6)
    v = ko_verdicts(tab, 1, 1)
    assert v.plain.extrapolated
    assert v.plain.tail_exponent_estimate == pytest.approx(plain_slope(2, 1, 1), abs=1e-6)
    bad = tmp_path / "g.csv"
    bad.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        Tabulated.from_csv(bad)


def test_as_nonlinearity():
    assert as_nonlinearity(2) == PowerLaw(2.0)
    assert isinstance(as_nonlinearity(lambda t: t), CallableNonlinearity)
    with pytest.raises(TypeError):
        as_nonlinearity("t^2")


# --- verdicts ---------------------------------------------------------------------------


def test_verdict_examples():
    v = ko_verdicts(PowerLaw(1), 0.5, 0.2)
    assert v.plain.tail_exponent_estimate == pytest.approx(-0.8333333, abs=1e-6)
    assert v.plain.verdict == "Divergent"
    v = ko_verdicts(PowerLaw(5), 1, 1)
    assert v.weighted.tail_exponent_estimate == pytest.approx(-2.5, abs=1e-6)
    assert v.weighted.verdict == "Convergent"
    v = ko_verdicts(PowerLaw(2), 1, 1)
    assert v.plain.tail_exponent_estimate == pytest.approx(-2, abs=1e-6)
    assert v.plain.verdict == "Convergent"
    assert v.weighted.tail_exponent_estimate == pytest.approx(-1, abs=1e-6)
    assert v.weighted.verdict == "Inconclusive"


@pytest.mark.parametrize(
    "s, p, q, kind",
    [
        (1, 0.5, 0.2, BallKind.ALL_BOUNDED),
        (5, 1, 1, BallKind.U_BOUNDED_V_BLOWS_UP),
        (1, 2, 0.5, BallKind.BOTH_BLOW_UP),
    ],
)
def test_integral_classification_examples(s, p, q, kind):
    assert theorem1_classify(PowerLaw(s), p, q).kind is kind


def test_guard_violation():
    with pytest.raises(errors.GuardViolation):
        ko_verdicts(PowerLaw(1), 0.1, 2.0)
    with pytest.raises(errors.GuardViolation):
        theorem1_classify(PowerLaw(1), 0.1, 2.0)


@given(st.floats(1, 6), st.floats(0.05, 3), st.floats(0.05, 3))
def test_verdict_slopes_match_closed_form(s, p, q):
    if 2 * p - q + 1 <= 0.05:
        return
    v = ko_verdicts(PowerLaw(s), p, q)
    k = plain_slope(s, p, q)
    assert v.plain.tail_exponent_estimate == pytest.approx(k, abs=1e-6)
    assert v.weighted.tail_exponent_estimate == pytest.approx(k + 1, abs=1e-6)
    lo, hi = v.plain.confidence_band
    assert lo <= v.plain.tail_exponent_estimate <= hi
    for ver in (v.plain, v.weighted):
        e = ver.tail_exponent_estimate
        expected = "Convergent" if e < -1.05 else "Divergent" if e > -0.95 else "Inconclusive"
        assert ver.verdict == expected


def test_cross_validation_never_opposite():
    for s, p, q in product(GRID_S, GRID_P, GRID_Q):
        closed = classify_ball(SystemParams(3, 0, 0, p, q, s))
        ko = theorem1_classify(PowerLaw(s), p, q)
        if ko.kind is closed.kind:
            continue
        assert ko.kind is BallKind.INCONCLUSIVE
        k = plain_slope(s, p, q)
        assert min(abs(k + 1), abs(k + 2)) <= 0.05 + 1e-9


def test_verdicts_stable_under_longer_cutoff():
    flips = {("Convergent", "Divergent"), ("Divergent", "Convergent")}
    for s, p, q in product(GRID_S, GRID_P, GRID_Q):
        a = ko_verdicts(PowerLaw(s), p, q)
        b = ko_verdicts(PowerLaw(s), p, q, cutoff=1e24)
        assert (a.plain.verdict, b.plain.verdict) not in flips
        assert (a.weighted.verdict, b.weighted.verdict) not in flips


def test_non_power_nonlinearity_verdicts():
    # f = t^2 log(e + t): plain slope tends to -2 with a slowly varying factor
    f = CallableNonlinearity(lambda t: t**2 * np.log(np.e + t), "t^2 log")
    assert ko_verdicts(f, 1, 1).plain.verdict == "Convergent"
    # f = e^t: G grows faster than any power
    g = CallableNonlinearity(lambda t: np.exp(np.minimum(t, 600.0)), "exp")
    assert ko_verdicts(g, 1, 1, cutoff=1e2).plain.verdict == "Convergent"


def test_classical_single_equation_wrapper():
    # ∫ ds / sqrt(F) with F ~ s^(k+1): slope -(k+1)/2
    assert classical_ko_verdict(PowerLaw(3)).verdict == "Convergent"
    assert classical_ko_verdict(PowerLaw(0.5)).verdict == "Divergent"
    assert classical_ko_verdict(PowerLaw(1)).verdict == "Inconclusive"


# --- sqrt(f) form -------------------------------------------------------------------


def test_sqrt_cumulative_closed_form():
    t = np.logspace(-3, 10, 20)
    assert np.allclose(sqrt_cumulative(PowerLaw(1), t), 2 / 3 * t**1.5, rtol=1e-9)


@given(st.floats(1, 5), st.floats(0.1, 2), st.floats(0.1, 2))
def test_sqrtf_form_agrees_on_power_laws(s, p, q):
    if 2 * p - q + 1 <= 0.05:
        return
    rep = sqrtf_equivalence(PowerLaw(s), p, q)
    assert rep.f_form.tail_exponent_estimate == pytest.approx(rep.sqrtf_form.tail_exponent_estimate, abs=1e-6)
    assert rep.agree
    assert rep.inequality_holds


def test_sqrtf_inequality_at_one_for_linear_f():
    # G(2) = 4/3 for f = t and (∫_0^1 sqrt t)^2 = 4/9
    rep = sqrtf_equivalence(PowerLaw(1), 0.5, 0.2)
    _, G2 = cumulative(PowerLaw(1), np.array([2.0]))
    H1 = sqrt_cumulative(PowerLaw(1), np.array([1.0]))
    assert G2[0] == pytest.approx(4 / 3) and H1[0] == pytest.approx(2 / 3)
    assert rep.inequality_min_ratio >= 1.0


def test_sqrtf_constant_f():
    rep = sqrtf_equivalence(PowerLaw(0), 0.5, 0.2)
    assert rep.agree
    e = 0.5 / 1.8
    assert rep.f_form.tail_exponent_estimate == pytest.approx(-2 * e, abs=1e-6)


# --- Γ --------------------------------------------------------------------------------


def test_gamma_closed_form():
    t = np.array([1.0, 10.0, 1e3, 1e6, 1e13])
    g = gamma_tail(PowerLaw(2), 1, 1, t)
    assert np.allclose(g, math.sqrt(12) / t, rtol=1e-8)
    assert gamma_tail(PowerLaw(2), 1, 1, 4.0) == pytest.approx(math.sqrt(12) / 4, rel=1e-8)


@given(st.floats(1.5, 6), st.floats(0.3, 2))
def test_gamma_positive_decreasing_vanishing(s, p):
    q = 0.5
    if plain_slope(s, p, q) >= -1.05:
        return
    t = np.logspace(-1, 10, 30)
    g = gamma_tail(PowerLaw(s), p, q, t)
    assert np.all(g > 0)
    assert np.all(np.diff(g) < 0)
    # for f = t^s, Γ(t) is exactly a multiple of t^(k+1)
    k = plain_slope(s, p, q)
    assert g[-1] / g[0] == pytest.approx((t[-1] / t[0]) ** (k + 1), rel=1e-6)


def test_gamma_power_decay():
    s, p, q = 5.0, 1.0, 1.0
    k = plain_slope(s, p, q)
    t = np.logspace(4, 10, 7)
    g = gamma_tail(PowerLaw(s), p, q, t)
    scaled = g * t ** (-k - 1)
    assert np.ptp(scaled) / scaled.mean() < 1e-6


def test_gamma_divergent_tail():
    with pytest.raises(errors.DivergentTail):
        gamma_tail(PowerLaw(1), 0.5, 0.2, 1.0)
    with pytest.raises(ValueError):
        gamma_tail(PowerLaw(2), 1, 1, -1.0)
