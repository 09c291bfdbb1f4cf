import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isp.errors import FitError, InvalidArgumentError
from isp.regularization import (
    SplitMix64,
    degree_table,
    eval_fit_derivative,
    fit_polynomial,
    generate_noisy,
    l2_discrete,
    relative_improvement,
    select_degree,
    write_polyfit_csv,
)

m1 = lambda t: (2 / math.pi) * math.exp(-t)
m2 = lambda t: (2 / math.pi) * math.cos(2 * math.pi * t)


def test_splitmix_reference_vectors():
    r = SplitMix64(0)
    assert [r.next_u64() for _ in range(3)] == [
        0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(2)] == [6457827717110365317, 3203168211198807973]


def test_symmetric_draws_in_range():
    r = SplitMix64(7).symmetric(10000)
    assert r.min() >= -1 and r.max() < 1
    assert abs(r.mean()) < 0.03


def test_noise_free_series():
    s = generate_noisy(m1, 1.0, 100, 0.0, 3)
    assert s.t.shape == (101,)
    assert s.t[0] == 0 and s.t[-1] == 1
    assert np.array_equal(s.values, np.array([m1(t) for t in s.t]))


def test_noise_bounded_and_reproducible():
    a = generate_noisy(m1, 1.0, 100, 0.05, 11)
    b = generate_noisy(m1, 1.0, 100, 0.05, 11)
    assert np.array_equal(a.values, b.values)
    assert np.all(np.abs(a.values - a.exact) <= 0.05 * np.abs(a.exact))
    assert not np.array_equal(a.values, generate_noisy(m1, 1.0, 100, 0.05, 12).values)


def test_noise_rms_matches_uniform_law():
    # uniform on [-1, 1] has rms 1/sqrt(3)
    eps = 0.05
    rms = []
    for seed in range(20):
        s = generate_noisy(m1, 1.0, 100, eps, seed)
        rms.append(l2_discrete((s.values - s.exact) / s.exact))
        assert 0.5 * eps / math.sqrt(3) <= rms[-1] <= 1.5 * eps / math.sqrt(3)
    assert np.mean(rms) == pytest.approx(eps / math.sqrt(3), rel=0.1)


def test_negative_noise_rejected():
    with pytest.raises(InvalidArgumentError):
        generate_noisy(m1, 1.0, 100, -0.01, 0)


def test_exact_cubic_reproduced():
    s = generate_noisy(lambda t: 1 - 2 * t + 0.5 * t**2 - 3 * t**3, 1.0, 100, 0.0, 0)
    fit = fit_polynomial(s, 3)
    assert fit.residual <= 1e-10
    assert fit(0.37) == pytest.approx(1 - 2 * 0.37 + 0.5 * 0.37**2 - 3 * 0.37**3, abs=1e-12)


def test_residual_is_recomputable():
    s = generate_noisy(m1, 1.0, 100, 0.03, 5)
    fit = fit_polynomial(s, 4)
    direct = math.sqrt(np.sum((fit(s.t) - s.values) ** 2) / 101)
    assert fit.residual == pytest.approx(direct, rel=1e-12)


def test_fit_matches_unconstrained_lstsq():
    s = generate_noisy(m1, 2.0, 100, 0.01, 1)
    fit = fit_polynomial(s, 5)
    ref = np.polynomial.polynomial.Polynomial.fit(s.t, s.values, 5)
    assert np.allclose(fit(s.t), ref(s.t), atol=1e-12)


def test_parity_even_zeroes_odd_coefficients():
    s = generate_noisy(m2, 1.0, 100, 0.03, 1)
    fit = fit_polynomial(s, 6, "even")
    assert np.all(fit.coefficients[1::2] == 0.0)
    # m2 is even about t = 1/2; the even fit of noise-free data is tight
    exact = generate_noisy(lambda t: (2 * t - 1) ** 4 - (2 * t - 1) ** 2, 1.0, 100, 0.0, 0)
    assert fit_polynomial(exact, 4, "even").residual <= 1e-10


def test_parity_odd():
    s = generate_noisy(lambda t: (2 * t - 1) ** 3, 1.0, 50, 0.0, 0)
    fit = fit_polynomial(s, 3, "odd")
    assert np.all(fit.coefficients[0::2] == 0.0)
    assert fit.residual <= 1e-12


def test_fit_argument_errors():
    s = generate_noisy(m1, 1.0, 5, 0.0, 0)
    with pytest.raises(InvalidArgumentError):
        fit_polynomial(s, 6)
    with pytest.raises(InvalidArgumentError):
        fit_polynomial(s, 0, "odd")
    with pytest.raises(InvalidArgumentError):
        fit_polynomial(s, 2, "weird")


def test_rank_deficient_design():
    s = generate_noisy(m1, 1.0, 100, 0.0, 0)
    s = type(s)(np.zeros(101), s.values, s.exact, 0.0, 0, 1.0)
    with pytest.raises(FitError):
        fit_polynomial(s, 2)


def test_relative_improvement_zero_when_equal():
    s = generate_noisy(m1, 1.0, 100, 0.01, 0)
    assert relative_improvement(s, 3, 3) == 0.0


def test_relative_improvement_degenerate():
    s = generate_noisy(lambda t: 0.0, 1.0, 100, 0.0, 0)
    with pytest.raises(FitError):
        relative_improvement(s, 0, 1)


def test_improvement_table_trend_case1():
    rows = degree_table(generate_noisy(m1, 1.0, 100, 0.001, 0), range(1, 6))
    assert rows[0][2] is None
    assert rows[1][2] == pytest.approx(91.5, abs=10)


def test_improvement_table_trend_case2_even():
    rims = [relative_improvement(generate_noisy(m2, 1.0, 100, 0.001, s), 4, 6, "even")
            for s in range(10)]
    assert np.mean(rims) == pytest.approx(95.2, abs=10)


def test_select_degree_case1_at_one_percent():
    picks = [select_degree(generate_noisy(m1, 1.0, 100, 0.01, s)) for s in range(10)]
    assert np.bincount(picks).argmax() == 3


def test_select_degree_exact_quadratic():
    s = generate_noisy(lambda t: 1 + t - 4 * t**2, 1.0, 100, 0.0, 0)
    assert select_degree(s) == 2


def test_select_degree_falls_back_to_max():
    s = generate_noisy(lambda t: math.exp(3 * t), 1.0, 100, 0.0, 0)
    assert select_degree(s, max_degree=4) == 4


def test_derivative_of_exact_quadratic():
    fit = fit_polynomial(generate_noisy(lambda t: 3 * t**2, 1.0, 100, 0.0, 0), 2)
    assert eval_fit_derivative(fit, 1.0) == pytest.approx(6.0, abs=1e-10)


def test_derivative_of_constant():
    fit = fit_polynomial(generate_noisy(lambda t: -1.5, 3.0, 10, 0.0, 0), 0)
    assert eval_fit_derivative(fit, 2.0) == 0.0


def test_derivative_of_degree6_fit_to_exponential():
    fit = fit_polynomial(generate_noisy(m1, 1.0, 100, 0.0, 0), 6)
    t = np.arange(1, 201) / 200
    assert np.abs(fit.derivative(t) + (2 / math.pi) * np.exp(-t)).max() <= 1e-4


def test_derivative_chain_rule_nonunit_T():
    T = 4.0
    fit = fit_polynomial(generate_noisy(lambda t: t**3, T, 60, 0.0, 0), 3)
    assert fit.derivative(2.5) == pytest.approx(3 * 2.5**2, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.001, 0.05), st.sampled_from(["any", "even"]))
def test_residual_monotone_in_nested_basis(seed, eps, parity):
    s = generate_noisy(m2, 1.0, 100, eps, seed)
    step = 1 if parity == "any" else 2
    res = [fit_polynomial(s, d, parity).residual for d in range(0, 11, step)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.001, 0.05),
       st.floats(0.1, 100.0) | st.floats(-100.0, -0.1))
def test_scale_equivariance(seed, eps, c):
    s = generate_noisy(m1, 1.0, 100, eps, seed)
    scaled = type(s)(s.t, c * s.values, c * s.exact, eps, seed, 1.0)
    assert fit_polynomial(scaled, 3).residual == pytest.approx(
        abs(c) * fit_polynomial(s, 3).residual, rel=1e-9)
    assert relative_improvement(scaled, 1, 2) == pytest.approx(
        relative_improvement(s, 1, 2), abs=1e-7)
    assert select_degree(scaled) == select_degree(s)


def test_polyfit_csv(tmp_path):
    s = generate_noisy(m1, 1.0, 100, 0.01, 0)
    fit = fit_polynomial(s, 3)
    path = tmp_path / "polyfit.csv"
    write_polyfit_csv(path, s, fit)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,m_exact,m_noisy,p_fit,p_fit_derivative"
    assert len(lines) == 102
    first = [float(v) for v in lines[1].split(",")]
    assert first[1] == m1(0.0)
    assert len(lines[1].split(",")[1].split("e")[0].replace("-", "").replace(".", "")) == 17


def test_rule_on_precomputed_curve():
    from isp.regularization import select_from_residuals
    assert select_from_residuals([0, 2, 4, 6], [1.0, 0.5, 0.49, 0.1]) == 2
    assert select_from_residuals([1, 2, 3], [1.0, 0.5, 0.25]) == 3
    assert select_from_residuals([0, 1], [0.0, 0.0]) == 0
    with pytest.raises(InvalidArgumentError):
        select_from_residuals([0, 1], [1.0])


def test_rule_agrees_with_series_selection():
    from isp.regularization import select_from_residuals
    s = generate_noisy(m2, 1.0, 100, 0.01, 4)
    degrees = list(range(0, 11, 2))
    curve = [fit_polynomial(s, d, "even").residual for d in degrees]
    assert select_from_residuals(degrees, curve) == select_degree(s, "even")
