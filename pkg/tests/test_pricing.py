import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postedprice.errors import DomainError, ParameterError
from postedprice.pricing import (
    EXHAUSTED,
    BoundInputs,
    PricingParams,
    Regime,
    adaptive_simpson,
    beta_zero,
    competitive_alpha,
    integrate_price,
    lambert_w0,
    multi_resource_bound,
    multi_slot_bound,
    ratio_curve,
    unit_price,
    unit_price_array,
)

mpmath.mp.dps = 40


def mp_alpha(gamma, beta):
    g, b = mpmath.mpf(gamma), mpmath.mpf(beta)
    L = mpmath.log(g)
    b0 = mpmath.lambertw(L).real / L
    if b <= 0:
        return mpmath.mpf(1)
    if b >= 1:
        return L + 1
    if b > b0:
        return (L + 1) / (b - mpmath.log(b))
    return L / ((1 + b) * L - mpmath.lambertw(b * g ** (1 + b) * L).real)


def mp_price(rho, gamma, beta):
    """Independent high-precision evaluation of the cost-free price."""
    rho, b = mpmath.mpf(rho), mpmath.mpf(beta)
    a = mp_alpha(gamma, beta)
    if b <= 0 or rho <= 1 / a:
        return mpmath.mpf(1)
    if b >= 1:
        return mpmath.exp(a * rho - 1)
    L = mpmath.log(gamma)
    b0 = mpmath.lambertw(L).real / L
    if b > b0:
        if rho <= b:
            return mpmath.exp(a * rho - 1)
        return mpmath.exp(a * b - 1) * (1 + b - rho) ** (-a)
    return gamma * b**a * (1 + b - rho) ** (-a)


# -- Lambert W ---------------------------------------------------------------


@pytest.mark.parametrize("x, w", [(0.0, 0.0), (math.e, 1.0)])
def test_lambert_exact_points(x, w):
    assert lambert_w0(x) == pytest.approx(w, abs=1e-15)


def test_lambert_ln10():
    w = lambert_w0(math.log(10))
    assert w == pytest.approx(float(mpmath.lambertw(mpmath.log(10)).real), rel=1e-14)
    assert w == pytest.approx(0.9187, abs=1e-4)
    assert abs(w * math.exp(w) - math.log(10)) <= 1e-12


def test_lambert_residual_and_monotone_on_log_grid():
    xs = np.logspace(-9, 6, 1000)
    ws = [lambert_w0(x) for x in xs]
    for x, w in zip(xs, ws):
        assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, x)
    assert all(b > a for a, b in zip(ws, ws[1:]))


@pytest.mark.parametrize("x", [1e-6, 0.3, 1.0, 7.5, 123.0, 1e5])
def test_lambert_matches_mpmath(x):
    assert lambert_w0(x) == pytest.approx(float(mpmath.lambertw(x).real), rel=1e-13)


def test_lambert_negative_rejected():
    with pytest.raises(DomainError):
        lambert_w0(-0.1)


# -- constants ---------------------------------------------------------------


def test_beta_zero_values():
    assert beta_zero(10) == pytest.approx(0.399, abs=1e-3)
    assert beta_zero(math.e) == pytest.approx(0.567143290, abs=1e-9)
    assert beta_zero(1 + 1e-6) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("gamma", [1.0, 0.5])
def test_beta_zero_needs_gamma_above_one(gamma):
    with pytest.raises(ParameterError):
        beta_zero(gamma)


@pytest.mark.parametrize(
    "beta, regime",
    [(2.0, Regime.LARGE_DEMAND), (1.0, Regime.LARGE_DEMAND), (0.5, Regime.MID_DEMAND),
     (0.2, Regime.LOW_DEMAND), (0.0, Regime.SLACK), (-0.5, Regime.SLACK)],
)
def test_alpha_against_high_precision(beta, regime):
    c = competitive_alpha(10.0, beta)
    assert c.regime is regime
    assert c.alpha == pytest.approx(float(mp_alpha(10, beta)), rel=1e-12)


def test_alpha_quoted_values():
    assert competitive_alpha(10, 2).alpha == pytest.approx(math.log(10) + 1, abs=1e-12)
    assert competitive_alpha(10, 0.5).alpha == pytest.approx(2.7680, abs=1e-4)
    assert competitive_alpha(10, 0.2).alpha == pytest.approx(1.8975658837, abs=1e-9)
    assert competitive_alpha(10, 0).alpha == 1.0


def test_alpha_continuous_at_regime_edges():
    for gamma in (2.0, 10.0, 100.0):
        b0 = beta_zero(gamma)
        L = math.log(gamma)
        at_b0_low = L / ((1 + b0) * L - lambert_w0(b0 * gamma ** (1 + b0) * L))
        at_b0_mid = (L + 1) / (b0 - math.log(b0))
        assert at_b0_low == pytest.approx(at_b0_mid, rel=1e-9)
        assert (L + 1) / (1 - math.log(1.0)) == pytest.approx(L + 1, rel=1e-12)
        left = competitive_alpha(gamma, 1 - 1e-12).alpha
        assert left == pytest.approx(L + 1, rel=1e-9)


def test_alpha_monotone_in_beta_and_tends_to_one():
    betas = np.linspace(1e-4, 2.0, 2000)
    alphas = [competitive_alpha(10, b).alpha for b in betas]
    assert all(b >= a - 1e-12 for a, b in zip(alphas, alphas[1:]))
    assert competitive_alpha(10, 1e-9).alpha == pytest.approx(1.0, abs=1e-6)


def test_gamma_one_degenerate():
    p = PricingParams(2.0, 2.0, 0.5)
    assert p.alpha == 1.0
    assert unit_price(0.3, p) == 2.0
    assert unit_price(0.999, p) == 2.0


# -- params ------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [dict(p_floor=0), dict(p_floor=-1), dict(p_ceil=0.5), dict(beta=-1.0), dict(op_cost=-0.1),
     dict(p_floor=float("nan"))],
)
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        PricingParams(**kwargs)


def test_gamma_is_exact_ratio():
    p = PricingParams.from_gamma(10, 2, p_floor=3.0)
    assert p.p_ceil == 30.0
    assert p.gamma == 10.0


# -- price function ----------------------------------------------------------


def test_price_quoted_values():
    assert unit_price(0.0, PricingParams.from_gamma(10, 2)) == 1.0
    assert unit_price(0.7, PricingParams.from_gamma(10, 2)) == pytest.approx(3.7129, abs=1e-4)
    p_mid = PricingParams.from_gamma(10, 0.5)
    # high-precision value 2.72272519; see ledger on the looser quoted 2.7230
    assert unit_price(0.7, p_mid) == pytest.approx(float(mp_price(0.7, 10, 0.5)), rel=1e-12)
    assert unit_price(0.7, p_mid) == pytest.approx(2.7230, abs=5e-4)


@pytest.mark.parametrize("beta", [3.0, 1.0, 0.7, 0.5, 0.39, 0.2, 0.05])
@pytest.mark.parametrize("rho", [0.0, 0.1, 0.25, 0.33, 0.45, 0.6, 0.75, 0.9, 0.99, 0.999999])
def test_price_against_high_precision(beta, rho):
    p = PricingParams.from_gamma(10, beta)
    assert unit_price(rho, p) == pytest.approx(float(mp_price(rho, 10, beta)), rel=1e-11)


def test_exhausted_at_one_in_every_regime():
    for beta in (2, 0.5, 0.2, 0, -0.5):
        assert unit_price(1.0, PricingParams.from_gamma(10, beta)) is EXHAUSTED
    with pytest.raises(TypeError):
        EXHAUSTED + 1.0


@pytest.mark.parametrize("rho", [-1e-9, 1.0 + 1e-9, float("nan")])
def test_price_domain(rho):
    with pytest.raises(DomainError):
        unit_price(rho, PricingParams())


def test_slack_is_flat():
    p = PricingParams.from_gamma(10, -0.3, op_cost=0.5)
    assert all(unit_price(r, p) == 1.5 for r in np.linspace(0, 0.999, 50))


def test_upper_boundary_reaches_ceiling():
    for beta in (2.0, 0.5, 0.2):
        for c in (0.0, 0.7):
            p = PricingParams.from_gamma(10, beta, c)
            assert unit_price(1 - 1e-13, p) == pytest.approx(10 + c, rel=1e-9)


def test_breakpoints_continuous():
    for beta in (2.0, 0.5, 0.2):
        p = PricingParams.from_gamma(10, beta)
        for bp in p.breakpoints():
            if 0 < bp < 1:
                left, right = unit_price(bp - 1e-12, p), unit_price(bp + 1e-12, p)
                assert left == pytest.approx(right, rel=1e-9)


def test_array_matches_scalar():
    p = PricingParams.from_gamma(7, 0.6, 0.25)
    rho = np.linspace(0, 1, 501)
    arr = unit_price_array(rho, p)
    for r, a in zip(rho[:-1], arr[:-1]):
        assert a == pytest.approx(unit_price(r, p), rel=1e-14)
    assert arr[-1] == math.inf


params_strategy = st.builds(
    PricingParams.from_gamma,
    st.floats(1.01, 200),
    st.floats(-0.9, 5),
    st.floats(0, 3),
    st.floats(0.1, 10),
)


@settings(max_examples=60, deadline=None)
@given(params_strategy)
def test_monotone_on_grid(p):
    vals = unit_price_array(np.linspace(0, 1, 10_001)[:-1], p)
    assert np.all(np.diff(vals) >= -1e-12 * vals[1:])
    assert vals[0] == p.p_floor + p.op_cost


@settings(max_examples=60, deadline=None)
@given(params_strategy, st.floats(0, 0.999))
def test_cost_shift(p, rho):
    assert unit_price(rho, p) == pytest.approx(unit_price(rho, p.without_cost()) + p.op_cost, rel=1e-14)


# -- integration and curves ----------------------------------------------------


def test_adaptive_simpson_polynomial():
    assert adaptive_simpson(lambda x: x**3, 0, 2) == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize("beta", [2.0, 0.5, 0.2])
def test_integral_matches_mpmath(beta):
    p = PricingParams.from_gamma(10, beta)
    kinks = sorted({0.0, float(1 / mp_alpha(10, beta)), min(beta, 0.95), 0.95})
    ref = mpmath.quad(lambda r: mp_price(r, 10, beta), [k for k in kinks if k <= 0.95])
    assert integrate_price(0, 0.95, p) == pytest.approx(float(ref), rel=1e-9)


def test_ratio_curve_examples():
    big = PricingParams.from_gamma(10, 2)
    assert ratio_curve(0.2, big).ratio == 1.0
    assert ratio_curve(0.7, big).ratio == pytest.approx(math.log(10) + 1, rel=1e-12)
    assert ratio_curve(0.7, big).v_ol == pytest.approx(1.1242, abs=1e-4)
    assert ratio_curve(0.9, PricingParams.from_gamma(10, 0.5)).ratio == pytest.approx(2.7680, abs=1e-4)
    assert ratio_curve(0.9, PricingParams.from_gamma(10, 0.2)).ratio == pytest.approx(
        float(mp_alpha(10, 0.2)), rel=1e-8)


def test_property_one_flat_ratio():
    p = PricingParams.from_gamma(10, 2)
    for rho in np.linspace(p.flat_end + 1e-6, 1.0, 200):
        assert ratio_curve(rho, p).ratio == pytest.approx(p.alpha, rel=1e-9)


@pytest.mark.parametrize("beta", [0.5, 0.2])
def test_ratio_flat_on_increasing_part_scarce_regimes(beta):
    p = PricingParams.from_gamma(10, beta)
    for rho in np.linspace(p.flat_end + 1e-3, 0.999, 40):
        assert ratio_curve(rho, p).ratio == pytest.approx(p.alpha, rel=1e-7)


def test_ratio_curve_requires_zero_cost():
    with pytest.raises(ParameterError):
        ratio_curve(0.5, PricingParams.from_gamma(10, 2, 0.1))


# -- bounds --------------------------------------------------------------------


def test_multi_resource_bound_values():
    a1 = math.log(10) + 1
    assert multi_resource_bound(10, 2, 1.0) == pytest.approx(a1, rel=1e-9)
    v = multi_resource_bound(10, 0.5, 0.5)
    assert math.isfinite(v) and v > competitive_alpha(10, 0.5).alpha
    assert v == pytest.approx(18.8538, abs=1e-3)
    p = PricingParams.from_gamma(10, 2)
    theta = (1 + 2 - 0.8) * (10 - unit_price(0.8, p)) / integrate_price(0, 0.8, p)
    assert multi_resource_bound(10, 2, 0.8) == pytest.approx(max(a1 / 0.8, a1 + theta), rel=1e-9)


def test_multi_resource_bound_needs_scarcity():
    with pytest.raises(ParameterError):
        multi_resource_bound(10, 0.0, 0.5)


def test_multi_slot_bound():
    p = PricingParams.from_gamma(10, 2)
    eta_prime = integrate_price(0, 1, p) / 10
    expected = 11 * max(p.alpha, 1 / eta_prime)
    assert multi_slot_bound(1.2, 1.0, p) == pytest.approx(expected, rel=1e-9)
    big = multi_slot_bound(1e9, 1.0, p)
    assert big == pytest.approx(max(p.alpha, 1 / eta_prime), rel=1e-6)
    assert multi_slot_bound(1.2, 1e-6, p) > 1e5
    with pytest.raises(ParameterError):
        multi_slot_bound(1.0, 1.0, p)


def test_bound_inputs():
    b = BoundInputs(eta=0.8, lam=1.5, num_resources=3, params=PricingParams.from_gamma(10, 2))
    assert 0 < b.eta_prime <= 1
    assert b.multi_resource() == multi_resource_bound(10, 2, 0.8)
    with pytest.raises(ParameterError):
        BoundInputs(eta=0.0, lam=1.5, num_resources=1, params=PricingParams())
