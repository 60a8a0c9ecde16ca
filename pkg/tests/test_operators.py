import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from fracrule.core import deterministic_sum, make_grid, sample
from fracrule.operators import (
    BaseMismatchError,
    OperatorKind,
    OperatorSpec,
    frac_derivative,
    gl_convolve,
    gl_weights,
    local_frac_derivative,
    thread_count,
)

RL = OperatorKind.RIEMANN_LIOUVILLE_GL
JUM = OperatorKind.JUMARIE_SHIFTED_GL


def power_rule(p, alpha, x):
    return math.gamma(p + 1) / math.gamma(p + 1 - alpha) * x ** (p - alpha)


def test_gl_weights_classical_difference():
    assert gl_weights(1.0, 4).tolist() == [1.0, -1.0, 0.0, 0.0]


def test_gl_weights_half_by_hand():
    assert gl_weights(0.5, 4).tolist() == [1.0, -0.5, -0.125, -0.0625]


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_gl_weights_are_signed_binomials(alpha):
    k = np.arange(30)
    assert np.allclose(gl_weights(alpha, 30), (-1.0) ** k * special.binom(alpha, k), rtol=1e-13, atol=0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_gl_weight_partial_sums_decrease_to_zero(alpha):
    partial = np.cumsum(gl_weights(alpha, 1001))
    assert np.all(partial > 0)
    assert np.all(np.diff(partial) < 0)
    # partial sum m equals binom(m - alpha, m), roughly m^-alpha / Gamma(1 - alpha)
    assert partial[1000] == pytest.approx(1000.0**-alpha / math.gamma(1 - alpha), rel=1e-3)


def test_gl_weights_need_positive_count():
    with pytest.raises(ValueError):
        gl_weights(0.5, 0)


def test_operator_spec_coerces_names_and_orders():
    spec = OperatorSpec("rl", 0.5, 0)
    assert spec.kind is RL and spec.alpha == 0.5
    assert OperatorSpec("caputo", 0.3).kind is JUM
    with pytest.raises(ValueError):
        OperatorSpec("riesz", 0.5)
    with pytest.raises(ValueError):
        OperatorSpec(RL, 1.5)


def test_rl_of_identity_converges_to_power_rule():
    errors = []
    for n in (251, 501, 1001):
        g = make_grid(0, 1.0 / (n - 1), n)
        d = frac_derivative(sample(lambda x: x, g), OperatorSpec(RL, 0.5, 0))
        errors.append(abs(d.values[-1] - 1.1283792))
    assert errors[-1] < 1e-3
    assert errors[0] / errors[1] > 1.8 and errors[1] / errors[2] > 1.8
    assert 2 * math.sqrt(1 / math.pi) == pytest.approx(1.1283792, abs=1e-7)


def test_constant_under_both_operators():
    g = make_grid(0, 1e-3, 1001)
    one = sample(lambda x: 1.0, g)
    rl = frac_derivative(one, OperatorSpec(RL, 0.5, 0)).values
    x = g.points[g.points >= 0.25]
    expected = x**-0.5 / math.gamma(0.5)
    assert np.max(np.abs(rl[g.points >= 0.25] / expected - 1)) < 2e-3
    jum = frac_derivative(one, OperatorSpec(JUM, 0.5, 0)).values
    assert np.all(jum == 0.0)


def test_order_one_is_backward_difference():
    g = make_grid(0.2, 0.01, 101)
    f = sample(np.sin, g)
    d = frac_derivative(f, OperatorSpec(RL, 1.0, 0.2)).values
    expected = (f.values[1:] - f.values[:-1]) / 0.01
    assert np.allclose(d[1:], expected, rtol=1e-12, atol=1e-12)
    errors = []
    for h in (0.02, 0.01, 0.005):
        g = make_grid(0.0, h, round(1 / h) + 1)
        d = frac_derivative(sample(np.sin, g), OperatorSpec(RL, 1.0, 0.0)).values
        errors.append(np.max(np.abs(d[1:] - np.cos(g.points[1:]))))
    assert math.log2(errors[0] / errors[1]) == pytest.approx(1.0, abs=0.05)
    assert math.log2(errors[1] / errors[2]) == pytest.approx(1.0, abs=0.05)


def test_first_output_is_single_term():
    g = make_grid(0, 0.01, 11)
    f = sample(lambda x: x + 2.0, g)
    d = frac_derivative(f, OperatorSpec(RL, 0.5, 0))
    assert d.values[0] == 2.0 * 0.01**-0.5


def test_base_mismatch():
    f = sample(np.sin, make_grid(0.1, 0.01, 11))
    with pytest.raises(BaseMismatchError):
        frac_derivative(f, OperatorSpec(RL, 0.5, 0.0))


def test_local_kind_is_not_a_grid_operator():
    f = sample(np.sin, make_grid(0, 0.01, 11))
    with pytest.raises(ValueError):
        frac_derivative(f, OperatorSpec(OperatorKind.LOCAL_QUOTIENT, 0.5, 0.0))


def test_convolution_matches_deterministic_sum_bitwise():
    rng = np.random.default_rng(7)
    values = rng.normal(size=700)
    w = gl_weights(0.37, values.size)
    conv = gl_convolve(values, 0.37, threads=1)
    for i in (0, 1, 2, 50, 351, 699):
        terms = [w[k] * values[i - k] for k in range(i + 1)]
        assert conv[i] == deterministic_sum(terms)


@pytest.mark.parametrize("threads", [2, 3, 4, 7])
def test_threaded_convolution_is_bitwise_serial(threads):
    rng = np.random.default_rng(threads)
    values = rng.normal(size=3001)
    serial = gl_convolve(values, 0.6, threads=1)
    assert np.array_equal(serial, gl_convolve(values, 0.6, threads=threads))


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("FRACRULE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("FRACRULE_THREADS", "0")
    with pytest.raises(ValueError):
        thread_count()
    monkeypatch.setenv("FRACRULE_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()


@settings(max_examples=40, deadline=None)
@given(
    c1=st.floats(-10, 10),
    c2=st.floats(-10, 10),
    alpha=st.floats(0.05, 1.0),
    kind=st.sampled_from([RL, JUM]),
)
def test_linearity(c1, c2, alpha, kind):
    g = make_grid(0, 0.01, 201)
    f = sample(np.sin, g)
    h = sample(lambda x: np.exp(-x) + x**2, g)
    spec = OperatorSpec(kind, alpha, 0)
    combo = f.with_values(c1 * f.values + c2 * h.values)
    lhs = frac_derivative(combo, spec).values
    rhs = c1 * frac_derivative(f, spec).values + c2 * frac_derivative(h, spec).values
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@pytest.mark.parametrize("alpha", [0.05, 0.3, 0.5, 0.7, 1.0])
@pytest.mark.parametrize("c", [1.0, -3.25, 1e6])
def test_jumarie_annihilates_constants_bitwise(alpha, c):
    f = sample(lambda x: c, make_grid(-0.5, 0.003, 700))
    out = frac_derivative(f, OperatorSpec(JUM, alpha, -0.5)).values
    assert np.all(out == 0.0)


def caputo_by_quadrature(fprime, alpha, x):
    # independent route: (1/Gamma(1-alpha)) int_0^x f'(s) (x-s)^-alpha ds
    val, _ = integrate.quad(fprime, 0, x, weight="alg", wvar=(0, -alpha))
    return val / math.gamma(1 - alpha)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_jumarie_matches_caputo_on_smooth_inputs(alpha):
    xs = (0.3, 0.6, 1.0)
    errors = []
    for n in (501, 1001):
        g = make_grid(0, 1.0 / (n - 1), n)
        d = frac_derivative(sample(lambda x: np.cos(x) + 2, g), OperatorSpec(JUM, alpha, 0))
        errors.append(
            max(
                abs(d.values[g.index_of(x)] - caputo_by_quadrature(lambda s: -math.sin(s), alpha, x))
                for x in xs
            )
        )
    assert errors[1] < 2e-3
    assert errors[0] / errors[1] > 1.8


@pytest.mark.parametrize("p", [1, 2, 0.5])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_power_rule_first_order(p, alpha):
    errors = []
    for n in (501, 1001, 2001):
        g = make_grid(0, 1.0 / (n - 1), n)
        d = frac_derivative(sample(lambda x: x**p, g), OperatorSpec(RL, alpha, 0)).values
        mask = g.points >= 0.25
        errors.append(np.max(np.abs(d[mask] - power_rule(p, alpha, g.points[mask]))))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert min(orders) >= 0.9


def test_local_quotient_of_fractional_power_is_exact():
    x0 = 0.4
    est = local_frac_derivative(lambda x: abs(x - x0) ** 0.5, x0, 0.5, [0.1, 0.05, 0.025, 0.0125])
    assert np.allclose(est.quotients, math.gamma(1.5), rtol=1e-14)
    assert est.value == pytest.approx(0.8862269, abs=1e-7)


def test_local_quotient_of_constant():
    est = local_frac_derivative(lambda x: 7.0, 0.3, 0.6, [0.1, 0.01, 0.001])
    assert est.value == 0.0
    assert np.all(est.quotients == 0.0)


def test_local_quotient_classical_limit():
    est = local_frac_derivative(lambda x: x, 0.3, 1.0, [0.1, 0.05, 0.02])
    assert est.value == pytest.approx(1.0, abs=1e-12)
    est = local_frac_derivative(math.exp, 0.0, 1.0, [0.1, 0.05, 0.025, 0.0125])
    assert est.value == pytest.approx(1.0, abs=1e-7)
    assert abs(est.quotients[-1] - 1.0) > 1e-3


def test_local_quotient_of_smooth_function_vanishes_for_fractional_order():
    est = local_frac_derivative(np.sin, 0.5, 0.5, [0.1, 0.05, 0.025, 0.0125, 0.00625])
    assert abs(est.value) < 1e-3 < abs(est.quotients[-1])


def test_local_quotient_validation():
    with pytest.raises(ValueError):
        local_frac_derivative(np.sin, 0.0, 0.5, [0.1, 0.2])
    with pytest.raises(ValueError):
        local_frac_derivative(np.sin, 0.0, 0.5, [0.1, -0.05])
    with pytest.raises(ValueError):
        local_frac_derivative(lambda x: math.inf if x > 0.15 else 0.0, 0.0, 0.5, [0.2, 0.1])
