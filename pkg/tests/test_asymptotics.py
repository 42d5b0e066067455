import dataclasses
import math
import sys

import numpy as np
import pytest

sys.path.insert(0, "tests")
import _oracles as orc  # noqa: E402

from sojourn_mc import covariance as cov  # noqa: E402
from sojourn_mc import heavy_tail as ht  # noqa: E402
from sojourn_mc.asymptotics import (  # noqa: E402
    _CSV_COLUMNS,
    FAlphaConvolution,
    compound_poisson_tail,
    convolve_tails,
    d3_series,
    gamma_one_minus,
    predict_tail,
    predictions_csv,
)
from sojourn_mc.berman import estimate_berman  # noqa: E402
from sojourn_mc.errors import ContractError, RangeError, SolverError  # noqa: E402


def exp_lattice(n: int = 2 ** 15, top: float = 30.0):
    grid = np.linspace(top / n, top, n)
    return grid, 1.0 - np.exp(-grid)


@pytest.fixture(scope="module")
def exp_conv():
    grid, cdf = exp_lattice()
    return FAlphaConvolution(grid, cdf)


@pytest.fixture(scope="module")
def small_table():
    return estimate_berman(1.0, [0.0, 0.5], S=4.0, step=0.01, R=2000, seed=3)


def test_single_fold_tail_is_exactly_one_minus_cdf():
    grid, cdf = exp_lattice(n=256, top=8.0)
    conv = FAlphaConvolution(grid, cdf)
    for j in (0, 1, 17, 100, 255):
        assert conv.tail(1, float(grid[j])) == 1.0 - cdf[j]
    assert conv.tail(1, 0.0) == 1.0
    # k = 1 beyond the stored grid: only escaped mass remains
    assert conv.tail(1, float(grid[-1]) + 1.0) == conv.escape0


def test_point_mass_convolution_is_exact():
    h, n, i0 = 0.5, 64, 3
    grid = np.linspace(h, n * h, n)
    cdf = np.where(np.arange(n) >= i0, 1.0, 0.0)
    conv = FAlphaConvolution(grid, cdf)
    v = float(grid[i0])
    # FFT convolution keeps the step exact to rounding noise
    for k in (1, 2, 3, 5):
        assert conv.tail(k, k * v - h) == pytest.approx(1.0, abs=1e-12)
        assert conv.tail(k, k * v) == pytest.approx(0.0, abs=1e-12)
    assert conv.escape0 == 0.0


def test_compound_poisson_matches_exponential_oracle(exp_conv):
    res = compound_poisson_tail(2.0, 1.0, exp_conv)
    assert res.remainder <= 1e-8
    assert res.k_used < 60
    # the only error left is lattice discretization of the jump law
    assert abs(res.value - orc.CP_EXP_L2_X1) < 1e-3
    assert abs(res.value - orc.cp_exp_oracle(2.0, 1.0)) < 1e-3


def test_compound_poisson_zero_threshold_exact(exp_conv):
    for l in (0.125, 0.5, 1.0, 2.0, 7.25):
        res = compound_poisson_tail(l, 0.0, exp_conv)
        assert res.value == -math.expm1(-l)
        assert res.remainder == 0.0


def test_d3_series_zero_threshold_is_gamma(exp_conv):
    for lam, want in orc.GAMMA_1M.items():
        res = d3_series(lam, 0.0, exp_conv)
        assert res.k_used == 1
        assert res.remainder == 0.0
        assert res.value == pytest.approx(gamma_one_minus(lam), rel=1e-14)
        assert res.value == pytest.approx(want, rel=1e-13)


def test_d3_series_exponential_jumps(exp_conv):
    exact = orc.GammaTailConv()
    for lam, want in orc.D3_EXP_X1.items():
        res = d3_series(lam, 1.0, exact, tol=1e-9)
        assert abs(res.value - want) < 1e-6
        lattice = d3_series(lam, 1.0, exp_conv, tol=1e-9)
        assert abs(lattice.value - want) < 1e-3


def test_convolve_tails_materializes_requested_powers():
    grid, cdf = exp_lattice(n=512, top=12.0)
    conv = convolve_tails((grid, cdf), 5)
    assert conv.K == 5
    assert conv.tail_powers.shape == (5, 512)
    # every extra fold shifts mass upward
    tp = conv.tail_powers
    assert np.all(np.diff(tp, axis=0) >= -1e-12)


def test_convolution_validation():
    with pytest.raises(RangeError):
        FAlphaConvolution([0.5, 1.0, 1.7], [0.1, 0.2, 0.3])
    with pytest.raises(RangeError):
        FAlphaConvolution([0.0, 0.5, 1.0], [0.1, 0.2, 0.3])
    with pytest.raises(RangeError):
        FAlphaConvolution([0.5, 1.0], [0.1, 0.2, 0.3])
    with pytest.raises(RangeError):
        FAlphaConvolution([0.5, 1.0, 1.5], [0.3, 0.2, 0.4])
    with pytest.raises(RangeError):
        FAlphaConvolution([0.5, 1.0, 1.5], [0.1, 0.2, 0.3], max_k=0)
    grid, cdf = exp_lattice(n=4, top=2.0)
    conv = FAlphaConvolution(grid, cdf)
    with pytest.raises(RangeError):
        conv.tail(0, 1.0)
    with pytest.raises(RangeError):
        conv.tail(1, -0.1)
    with pytest.raises(ContractError):
        conv.tail(2, 3.0)  # beyond the base grid but below k * top
    with pytest.raises(SolverError):
        convolve_tails((grid, cdf), 5, max_k=3)


def test_series_validation(exp_conv):
    for lam in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(RangeError):
            d3_series(lam, 1.0, exp_conv)
    with pytest.raises(RangeError):
        d3_series(0.5, 1.0, exp_conv, tol=0.0)
    with pytest.raises(RangeError):
        compound_poisson_tail(0.0, 1.0, exp_conv)
    with pytest.raises(RangeError):
        compound_poisson_tail(2.0, 1.0, exp_conv, tol=-1.0)


def test_predict_tail_composes_ingredients(small_table):
    tab = small_table
    model = cov.frac_ou(1.0)
    u = 3.0
    scaling = cov.scaling_bundle(model, u, tab.b0)

    p1 = predict_tail(ht.D1, model, ht.pareto(1.5), tab, u, 0.5)
    want = (tab.b_values[1] * ht.mean_T(ht.pareto(1.5))
            * scaling.v * scaling.psi)
    assert p1.predicted_tail == pytest.approx(want, rel=1e-12)
    assert p1.ingredients["b_x"] == tab.b_values[1]

    p2 = predict_tail(ht.D2, model, ht.pareto(1.0), tab, u, 0.0)
    want = (tab.b0 * ht.integrated_tail(ht.pareto(1.0), scaling.m)
            * scaling.v * scaling.psi)
    assert p2.predicted_tail == pytest.approx(want, rel=1e-12)

    p3 = predict_tail(ht.D3, model, ht.pareto(0.5), tab, u, 0.5)
    series = d3_series(0.5, 0.5, FAlphaConvolution(tab.f_grid, tab.f_cdf))
    want = series.value * ht.tail_T(ht.pareto(0.5), scaling.m)
    assert p3.predicted_tail == pytest.approx(want, rel=1e-12)
    assert p3.ingredients["series_value"] == pytest.approx(series.value)

    p4 = predict_tail(ht.D4, model, ht.log_pareto(), tab, u, 0.0)
    assert p4.predicted_tail == ht.tail_T(ht.log_pareto(), scaling.m)


def test_predict_tail_d4_threshold_free(small_table):
    model = cov.frac_ou(1.0)
    tails = [predict_tail(ht.D4, model, ht.log_pareto(), small_table, 3.5, x)
             .predicted_tail for x in (0.0, 0.25, 0.7, 2.0)]
    assert all(t == tails[0] for t in tails)


def test_predict_tail_closed_form_converges(small_table):
    model = cov.frac_ou(1.0)
    h = ht.pareto(1.5)

    def ratio(u):
        p = predict_tail(ht.D1, model, h, small_table, u, 0.0)
        return p.closed_form_tail / p.predicted_tail

    assert abs(ratio(15.0) - 1.0) < abs(ratio(4.0) - 1.0)
    assert abs(ratio(15.0) - 1.0) < 0.01

    tab_model = cov.tabulated(
        np.linspace(0.0, 5.0, 501),
        np.exp(-np.linspace(0.0, 5.0, 501)), alpha=1.0)
    p = predict_tail(ht.D1, tab_model, h, small_table, 3.0, 0.0)
    assert p.closed_form_tail is None


def test_predict_tail_contract_errors(small_table):
    model = cov.frac_ou(1.0)
    with pytest.raises(ContractError):
        predict_tail(ht.D1, model, ht.pareto(0.5), small_table, 3.0, 0.0)
    with pytest.raises(ContractError):
        predict_tail(ht.D1, cov.frac_ou(0.5), ht.pareto(1.5),
                     small_table, 3.0, 0.0)
    bogus = dataclasses.replace(ht.pareto(1.0), scenario=ht.D1)
    with pytest.raises(ContractError):
        predict_tail(ht.D1, model, bogus, small_table, 3.0, 0.0)
    with pytest.raises(RangeError):
        predict_tail(ht.D1, model, ht.pareto(1.5), small_table, 3.0, -1.0)
    with pytest.raises(RangeError):
        predict_tail(ht.D1, model, ht.pareto(1.5), small_table, 3.0, 0.33)


def test_predictions_csv_shape(small_table):
    model = cov.frac_ou(1.0)
    rows = [
        predict_tail(ht.D1, model, ht.pareto(1.5), small_table, 3.0, 0.5),
        predict_tail(ht.D4, model, ht.log_pareto(), small_table, 3.0, 0.0),
    ]
    text = predictions_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(_CSV_COLUMNS)
    assert len(lines) == 3
    assert "np.float64" not in text
    d1 = dict(zip(_CSV_COLUMNS, lines[1].split(",")))
    assert d1["scenario"] == ht.D1
    assert float(d1["b_x"]) == small_table.b_values[1]
    assert d1["series_value"] == ""
    d4 = dict(zip(_CSV_COLUMNS, lines[2].split(",")))
    assert d4["b_x"] == "" and d4["l_m"] == ""
    assert float(d4["tail_T_m"]) == float(d4["predicted_tail"])
