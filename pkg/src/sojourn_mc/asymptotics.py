"""Tail predictions: the limit right-hand sides for the four horizon regimes.

With m(u) = 1 / (B_alpha(0) v(u) Psi(u)) the predicted tail of the scaled
sojourn P{v(u) L_u[0, T] > x} is, per regime,

  D1:  B_alpha(x) E[T] v(u) Psi(u)
  D2:  B_alpha(x) l(m(u)) v(u) Psi(u)
  D3:  [lambda sum_k Gamma(k-lambda)/k! tail(F_alpha^*k)(x)] * P{T > m(u)}
  D4:  P{T > m(u)}                                   (independent of x)

The D3 series and the compound-Poisson law share one convolution engine that
iterates the probability-mass vector of the discretized jump law F_alpha on
its uniform value lattice. Truncation of both series uses a two-sided
sandwich: tails of the k-fold convolution are nondecreasing in k and at most
1, so the omitted mass lies between R_K * tail_K(x) and R_K, where the
coefficient remainders are exact:

  lambda sum_{k>K} Gamma(k-lambda)/k!  =  Gamma(K+1-lambda) / Gamma(K+1)
  sum_{k>K} e^-l l^k / k!              =  P(K+1, l)   (regularized lower gamma)

The midpoint halves the uniform bound and makes x = 0 exact at K = 1, since
tail_k(0) = 1 for a positive jump law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc, gammaln

from . import covariance as cov
from . import heavy_tail as ht
from .berman import BermanTable
from .errors import ContractError, GridResolutionError, RangeError, SolverError

_LEAK_TOL = 1e-6
_DEFAULT_MAX_K = 600
_SERIES_TOL = 1e-8

_CSV_COLUMNS = ("scenario", "alpha", "family", "u", "x", "predicted_tail",
                "closed_form_tail", "v", "psi", "m", "b_x", "l_m", "tail_T_m",
                "series_value", "series_remainder")


class SeriesResult(NamedTuple):
    value: float
    remainder: float
    k_used: int


class FAlphaConvolution:
    """Tails of k-fold convolutions of a CDF table on a uniform value lattice.

    Mass in cell j of f_cdf sits at the right edge f_grid[j]; mass above
    f_grid[-1] (1 - f_cdf[-1]) escapes to +infinity and sums containing any
    escaped jump count toward every tail. Convolution powers are materialized
    lazily up to max_k; per-power tails are re-read on the base grid, which
    is exact because k-fold sums stay on the same lattice.
    """

    def __init__(self, f_grid, f_cdf, max_k: int = _DEFAULT_MAX_K):
        f_grid = np.asarray(f_grid, dtype=float)
        f_cdf = np.asarray(f_cdf, dtype=float)
        if f_grid.ndim != 1 or len(f_grid) < 2 or len(f_grid) != len(f_cdf):
            raise RangeError("need matching 1-d f_grid and f_cdf with >= 2 cells")
        if f_grid[0] <= 0.0:
            raise RangeError("f_grid must start at a positive cell edge")
        steps = np.diff(f_grid)
        if not np.allclose(steps, f_grid[0], rtol=1e-6, atol=0.0):
            raise RangeError("f_grid must be uniform")
        if np.any(np.diff(f_cdf) < -1e-12) or f_cdf[-1] > 1.0 + 1e-12 or f_cdf[0] < 0.0:
            raise RangeError("f_cdf is not a CDF table")
        if max_k < 1:
            raise RangeError(f"max_k must be >= 1, got {max_k}")
        self.f_grid = f_grid
        self.f_cdf = np.minimum(f_cdf, 1.0)
        self.h = float(f_grid[0])
        self.n = len(f_grid)
        self.max_k = int(max_k)
        self.escape0 = float(max(0.0, 1.0 - self.f_cdf[-1]))
        self._pmf1 = np.diff(self.f_cdf, prepend=0.0)
        # k = 1 tails come from f_cdf itself: bit-exact 1 - F on the grid
        self._tails = [1.0 - self.f_cdf]
        self._pmf_k = self._pmf1  # running k-fold pmf, unit offset k

    @property
    def K(self) -> int:
        return len(self._tails)

    @property
    def tail_powers(self) -> np.ndarray:
        """Materialized tails, shape (K, n), row k-1 = tail of the k-fold sum."""
        return np.array(self._tails)

    def _extend(self) -> None:
        k = self.K + 1
        if k > self.max_k:
            raise SolverError(
                f"convolution cap max_k={self.max_k} reached; the series "
                f"truncation cannot be certified at this tolerance")
        pmf = np.clip(fftconvolve(self._pmf_k, self._pmf1), 0.0, None)
        total = float(np.sum(pmf))
        expected = (1.0 - self.escape0) ** k
        if abs(total - expected) > _LEAK_TOL:
            raise GridResolutionError(
                f"mass leakage {abs(total - expected):.3e} at convolution "
                f"power {k}; the value grid is under-resolved")
        cdf_ext = np.cumsum(pmf)
        finite_total = cdf_ext[-1]
        esc_k = 1.0 - expected
        # unit j of the k-fold sum lives at array index j - k
        tails = np.full(self.n, finite_total + esc_k)
        j = np.arange(max(k, 1), self.n + 1)
        tails[j - 1] = (finite_total - cdf_ext[j - k]) + esc_k
        self._tails.append(np.maximum(tails, 0.0))
        self._pmf_k = pmf

    def ensure(self, k: int) -> None:
        while self.K < k:
            self._extend()

    def tail(self, k: int, x: float) -> float:
        """P{k-fold sum > x}, exact for the lattice law."""
        if k < 1:
            raise RangeError(f"k must be >= 1, got {k}")
        if x < 0.0:
            raise RangeError(f"x must be nonnegative, got {x}")
        if x >= k * self.f_grid[-1]:
            return 1.0 - (1.0 - self.escape0) ** k
        units = int(np.floor(x / self.h + 1e-9))
        if units >= self.n and k > 1:
            raise ContractError(
                f"x={x:g} lies beyond the stored base grid (max {self.f_grid[-1]:g})")
        self.ensure(k)
        if units == 0:
            return 1.0
        if units >= self.n:  # k == 1, all lattice mass is below x
            return self.escape0
        return float(self._tails[k - 1][units - 1])


def convolve_tails(f, K: int, max_k: int | None = None) -> FAlphaConvolution:
    """Materialize K convolution powers of a jump-law table.

    f is a BermanTable or an (f_grid, f_cdf) pair.
    """
    if isinstance(f, BermanTable):
        f_grid, f_cdf = f.f_grid, f.f_cdf
    else:
        f_grid, f_cdf = f
    if max_k is None:
        max_k = max(int(K), _DEFAULT_MAX_K)
    conv = FAlphaConvolution(f_grid, f_cdf, max_k=max_k)
    conv.ensure(int(K))
    return conv


def _sandwich(partial: float, coeff_rest: float, tail_k: float) -> tuple:
    value = partial + coeff_rest * 0.5 * (1.0 + tail_k)
    remainder = coeff_rest * 0.5 * (1.0 - tail_k)
    return value, remainder


def d3_series(lam: float, x: float, conv, tol: float = _SERIES_TOL) -> SeriesResult:
    """lambda sum_k Gamma(k-lambda)/k! tail_k(x) with certified truncation.

    The exact coefficient remainder Gamma(K+1-lambda)/Gamma(K+1), combined
    with the tail sandwich, yields Gamma(1-lambda) exactly at x = 0.
    """
    if not 0.0 < lam < 1.0:
        raise RangeError(f"lambda must lie in (0, 1), got {lam}")
    if tol <= 0.0:
        raise RangeError(f"tol must be positive, got {tol}")
    partial = 0.0
    k = 0
    while True:
        k += 1
        t_k = conv.tail(k, x)
        partial += lam * math.exp(gammaln(k - lam) - gammaln(k + 1.0)) * t_k
        coeff_rest = math.exp(gammaln(k + 1.0 - lam) - gammaln(k + 1.0))
        value, remainder = _sandwich(partial, coeff_rest, t_k)
        if remainder <= tol:
            return SeriesResult(value, remainder, k)
        if k >= conv.max_k:
            raise SolverError(
                f"series truncation cannot meet tol={tol:g} within "
                f"max_k={conv.max_k} terms (remainder {remainder:.3e})")


def compound_poisson_tail(l: float, x: float, conv,
                          tol: float = _SERIES_TOL) -> SeriesResult:
    """P{Y(l) > x} for a compound Poisson sum with jump law F_alpha.

    sum_{k>=1} e^-l l^k/k! tail_k(x); the Poisson coefficient remainder is
    the regularized lower incomplete gamma P(K+1, l), and x = 0 gives
    1 - e^-l exactly.
    """
    if l <= 0.0:
        raise RangeError(f"l must be positive, got {l}")
    if tol <= 0.0:
        raise RangeError(f"tol must be positive, got {tol}")
    if x == 0.0:
        # tail_k(0) = 1 for every k of a positive jump law: the series
        # telescopes to P{at least one jump} with zero remainder
        return SeriesResult(-math.expm1(-l), 0.0, 1)
    log_l = math.log(l)
    partial = 0.0
    k = 0
    while True:
        k += 1
        t_k = conv.tail(k, x)
        partial += math.exp(-l + k * log_l - gammaln(k + 1.0)) * t_k
        coeff_rest = float(gammainc(k + 1.0, l))
        value, remainder = _sandwich(partial, coeff_rest, t_k)
        if remainder <= tol:
            return SeriesResult(value, remainder, k)
        if k >= conv.max_k:
            raise SolverError(
                f"series truncation cannot meet tol={tol:g} within "
                f"max_k={conv.max_k} terms (remainder {remainder:.3e})")


@dataclass(frozen=True)
class AsymptoticPrediction:
    scenario: str
    alpha: float
    family: str
    u: float
    x: float
    predicted_tail: float
    closed_form_tail: float | None
    ingredients: dict


def _b_at(berman: BermanTable, x: float) -> float:
    hit = np.nonzero(np.abs(berman.x_grid - x) <= 1e-12 * max(1.0, abs(x)))[0]
    if len(hit) == 0:
        raise RangeError(
            f"x={x:g} is not on the estimated constant grid {berman.x_grid}")
    return float(berman.b_values[hit[0]])


def _conv_for(berman: BermanTable) -> FAlphaConvolution:
    if berman._conv is None:
        berman._conv = FAlphaConvolution(berman.f_grid, berman.f_cdf)
    return berman._conv


def _closed_form_scale(model: cov.CovarianceModel, u: float, b0: float):
    """Large-u closed forms of v * Psi and m for the two parametric models.

    v Psi -> a^-1 (2 pi)^-1/2 u^{2/alpha - 1} e^{-u^2/2} and
    m -> a sqrt(2 pi) b0^-1 u^{1 - 2/alpha} e^{u^2/2}; a = 1 for the
    exponential-correlation model.
    """
    if model.kind == cov.FRAC_OU:
        a = 1.0
    elif model.kind == cov.FBM_INCREMENT:
        a = model.a
    else:
        return None, None
    vpsi = (1.0 / a) / math.sqrt(2.0 * math.pi) \
        * u ** (2.0 / model.alpha - 1.0) * math.exp(-0.5 * u * u)
    m = a * math.sqrt(2.0 * math.pi) / b0 \
        * u ** (1.0 - 2.0 / model.alpha) * math.exp(0.5 * u * u)
    return vpsi, m


def predict_tail(scenario: str, model: cov.CovarianceModel,
                 horizon: ht.HorizonModel, berman: BermanTable, u: float,
                 x: float, tol: float = _SERIES_TOL) -> AsymptoticPrediction:
    """Evaluate the limit tail for the given regime at level u and threshold x."""
    if scenario != horizon.scenario:
        raise ContractError(
            f"scenario {scenario!r} does not match the horizon's "
            f"{horizon.scenario!r}")
    if berman.alpha != model.alpha:
        raise ContractError(
            f"constant table alpha={berman.alpha:g} does not match the "
            f"model alpha={model.alpha:g}")
    if x < 0.0:
        raise RangeError(f"x must be nonnegative, got {x}")
    scaling = cov.scaling_bundle(model, u, berman.b0)
    cf_vpsi, cf_m = _closed_form_scale(model, u, berman.b0)
    ingredients = {"v": scaling.v, "psi": scaling.psi, "m": scaling.m}
    closed = None

    if scenario == ht.D1:
        b_x = _b_at(berman, x)
        e_t = ht.mean_T(horizon)
        if not math.isfinite(e_t):
            raise ContractError(f"{horizon.model_id} has no finite mean for D1")
        ingredients["b_x"] = b_x
        predicted = b_x * e_t * scaling.v * scaling.psi
        if cf_vpsi is not None:
            closed = b_x * e_t * cf_vpsi
    elif scenario == ht.D2:
        b_x = _b_at(berman, x)
        l_m = ht.integrated_tail(horizon, scaling.m)
        ingredients["b_x"] = b_x
        ingredients["l_m"] = l_m
        predicted = b_x * l_m * scaling.v * scaling.psi
        if cf_vpsi is not None:
            closed = b_x * ht.integrated_tail(horizon, cf_m) * cf_vpsi
    elif scenario == ht.D3:
        series = d3_series(horizon.lam, x, _conv_for(berman), tol)
        tail_m = ht.tail_T(horizon, scaling.m)
        ingredients["series_value"] = series.value
        ingredients["series_remainder"] = series.remainder
        ingredients["tail_T_m"] = tail_m
        predicted = series.value * tail_m
        if cf_vpsi is not None:
            closed = series.value * ht.tail_T(horizon, cf_m)
    elif scenario == ht.D4:
        tail_m = ht.tail_T(horizon, scaling.m)
        ingredients["tail_T_m"] = tail_m
        predicted = tail_m
        if cf_vpsi is not None:
            closed = ht.tail_T(horizon, cf_m)
    else:
        raise ContractError(f"unknown scenario {scenario!r}")

    return AsymptoticPrediction(
        scenario=scenario, alpha=model.alpha, family=horizon.family,
        u=float(u), x=float(x), predicted_tail=float(predicted),
        closed_form_tail=None if closed is None else float(closed),
        ingredients=ingredients)


def predictions_csv(predictions) -> str:
    """CSV text with one row per prediction; absent ingredients stay empty."""
    lines = [",".join(_CSV_COLUMNS)]
    for p in predictions:
        row = {
            "scenario": p.scenario,
            "alpha": repr(float(p.alpha)),
            "family": p.family,
            "u": repr(float(p.u)),
            "x": repr(float(p.x)),
            "predicted_tail": repr(float(p.predicted_tail)),
            "closed_form_tail": ("" if p.closed_form_tail is None
                                 else repr(float(p.closed_form_tail))),
        }
        for key in ("v", "psi", "m", "b_x", "l_m", "tail_T_m", "series_value",
                    "series_remainder"):
            val = p.ingredients.get(key)
            row[key] = "" if val is None else repr(float(val))
        lines.append(",".join(row[c] for c in _CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def gamma_one_minus(lam: float) -> float:
    """Gamma(1 - lambda), the x = 0 value of the D3 series."""
    return float(gamma_fn(1.0 - lam))
