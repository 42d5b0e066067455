"""Stationary correlation models and the level-dependent time scaling.

A centered stationary Gaussian process with unit variance and correlation r
spends its time above a high level u in excursions whose natural duration is
1/v(u), where v(u) solves

    u^2 (1 - r(1/v(u))) = 1.

Everything downstream (Berman constants, excursion clocks, step rules) is
expressed on the 1/v(u) timescale. The mean excursion clock is

    m(u) = 1 / (b0 * v(u) * psi(u)),

with psi the standard normal survival function and b0 the x=0 Berman
constant estimate, so that high-level excursions arrive at unit rate in
m(u)-time.

Built-in models:
    frac_ou(alpha):          r(t) = exp(-t^alpha), alpha in (0, 2]
    fbm_increment(alpha, a): r(t) = ((a+t)^a + |a-t|^a - 2 t^a) / (2 a^a)
                             (increments of fractional Brownian motion,
                             Hurst alpha/2, over lag a), alpha in (0, 2)
    tabulated(t, r, alpha):  linear interpolation of a sampled correlation,
                             with the local roughness index alpha supplied
                             by the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import RangeError, SolverError

FRAC_OU = "frac_ou"
FBM_INCREMENT = "fbm_increment"
TABULATED = "tabulated"

_V_RESIDUAL_TOL = 1e-10
_BISECT_BRACKET = (1e-12, 1.0)
_BISECT_MAX_HI = 1e9
_BISECT_ITERS = 200


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    kind: str
    alpha: float
    a: float = 1.0
    table_t: np.ndarray | None = None
    table_r: np.ndarray | None = None

    @property
    def model_id(self) -> str:
        if self.kind == FRAC_OU:
            return f"frac_ou(alpha={self.alpha:g})"
        if self.kind == FBM_INCREMENT:
            return f"fbm_increment(alpha={self.alpha:g},a={self.a:g})"
        return f"tabulated(alpha={self.alpha:g},n={len(self.table_t)})"


def frac_ou(alpha: float) -> CovarianceModel:
    if not 0.0 < alpha <= 2.0:
        raise RangeError(f"frac_ou needs alpha in (0, 2], got {alpha}")
    return CovarianceModel(kind=FRAC_OU, alpha=float(alpha))


def fbm_increment(alpha: float, a: float) -> CovarianceModel:
    if not 0.0 < alpha < 2.0:
        raise RangeError(f"fbm_increment needs alpha in (0, 2), got {alpha}")
    if a <= 0.0:
        raise RangeError(f"fbm_increment needs a > 0, got {a}")
    return CovarianceModel(kind=FBM_INCREMENT, alpha=float(alpha), a=float(a))


def tabulated(t, r, alpha: float) -> CovarianceModel:
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if t.ndim != 1 or t.shape != r.shape or t.size < 2:
        raise RangeError("tabulated model needs two equal 1-d columns, length >= 2")
    if t[0] != 0.0 or r[0] != 1.0:
        raise RangeError("tabulated grid must start at t=0 with r=1")
    if np.any(np.diff(t) <= 0.0):
        raise RangeError("tabulated t grid must be strictly increasing")
    if np.any(np.abs(r) > 1.0):
        raise RangeError("tabulated correlation must lie in [-1, 1]")
    if not 0.0 < alpha <= 2.0:
        raise RangeError(f"tabulated needs alpha in (0, 2], got {alpha}")
    return CovarianceModel(kind=TABULATED, alpha=float(alpha), table_t=t, table_r=r)


def load_tabulated_csv(path: str, alpha: float) -> CovarianceModel:
    """Two-column CSV (t, r), strictly increasing t starting at 0 with r=1."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if data.shape[1] != 2:
        raise RangeError(f"{path}: expected two columns (t, r)")
    return tabulated(data[:, 0], data[:, 1], alpha)


def eval_correlation(model: CovarianceModel, t):
    """r(t) for scalar or array t >= 0."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise RangeError("correlation argument must be nonnegative")
    al = model.alpha
    if model.kind == FRAC_OU:
        out = np.exp(-(arr ** al))
    elif model.kind == FBM_INCREMENT:
        a = model.a
        out = ((a + arr) ** al + np.abs(a - arr) ** al - 2.0 * arr ** al) / (2.0 * a ** al)
    else:
        if np.any(arr > model.table_t[-1]):
            raise RangeError(
                f"tabulated correlation queried at t beyond table range "
                f"[0, {model.table_t[-1]:g}]")
        out = np.interp(arr, model.table_t, model.table_r)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


# Normal survival: erfc is accurate through u=8; above that the Mills-ratio
# series psi(u) = phi(u)/u * sum (-1)^k (2k-1)!! u^{-2k} converges to better
# than 1e-12 relative before its terms turn around.
_ERFC_CUTOFF = 8.0


def normal_survival(u: float) -> float:
    """Psi(u) = P{N(0,1) > u}, relative error below 1e-12."""
    u = float(u)
    if u <= _ERFC_CUTOFF:
        return float(0.5 * erfc(u / math.sqrt(2.0)))
    phi = math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    if phi == 0.0:
        return 0.0
    usq = u * u
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = -term * (2 * k - 1) / usq
        if abs(nxt) >= abs(term):
            break
        term = nxt
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return phi / u * total


def _bisect_v(model: CovarianceModel, u: float) -> float:
    # root of g(w) = u^2 (1 - r(w)) - 1 in w = 1/v; g increases with w
    lo, hi = _BISECT_BRACKET
    usq = u * u

    def g(w: float) -> float:
        return usq * (1.0 - eval_correlation(model, w)) - 1.0

    glo, ghi = g(lo), g(hi)
    # near u = 1 the root w = 1/v can exceed 1; grow the bracket as far as
    # the model allows (tabulated correlations stop at their table edge)
    while ghi <= 0.0 and hi < _BISECT_MAX_HI:
        try:
            ghi = g(2.0 * hi)
        except RangeError:
            break
        hi *= 2.0
    if glo >= 0.0 or ghi <= 0.0:
        raise SolverError(
            f"no sign change for the scaling equation in w bracket "
            f"({lo:g}, {hi:g}) (model {model.model_id}, u={u:g})")
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2.22e-16 * hi:
            break
    w = 0.5 * (lo + hi)
    if abs(g(w)) > _V_RESIDUAL_TOL:
        raise SolverError(
            f"scaling equation residual {abs(g(w)):.2e} exceeds {_V_RESIDUAL_TOL:g} "
            f"(model {model.model_id}, u={u:g})")
    return 1.0 / w


def solve_v(model: CovarianceModel, u: float) -> float:
    """Solve u^2 (1 - r(1/v)) = 1 for v; closed form where available."""
    u = float(u)
    if u <= 1.0:
        raise RangeError(f"scaling needs u > 1, got {u}")
    closed = None
    if model.kind == FRAC_OU:
        # e^{-w^alpha} = 1 - u^{-2}  =>  w = (-log1p(-u^{-2}))^{1/alpha}
        closed = (-math.log1p(-(u ** -2.0))) ** (-1.0 / model.alpha)
    elif model.kind == FBM_INCREMENT and model.alpha == 1.0:
        # 1 - r(t) = t/a exactly for t < a, so v = a u^2 / a^2 ... = u^2 / a
        closed = u * u / model.a
    if closed is not None:
        resid = abs(u * u * (1.0 - eval_correlation(model, 1.0 / closed)) - 1.0)
        v_check = _bisect_v(model, u)
        if resid > _V_RESIDUAL_TOL or abs(closed - v_check) > 1e-8 * closed:
            raise SolverError(
                f"closed-form scaling disagrees with root finder "
                f"({closed!r} vs {v_check!r}, model {model.model_id}, u={u:g})")
        return closed
    return _bisect_v(model, u)


@dataclass(frozen=True)
class LevelScaling:
    u: float
    v: float
    psi: float
    m: float


def scaling_bundle(model: CovarianceModel, u: float, b0: float) -> LevelScaling:
    """Compose v(u), Psi(u) and the excursion clock m(u) = 1/(b0 v psi)."""
    if b0 <= 0.0:
        raise RangeError(f"b0 must be positive, got {b0}")
    v = solve_v(model, u)
    psi = normal_survival(u)
    return LevelScaling(u=float(u), v=v, psi=psi, m=1.0 / (b0 * v * psi))


def berman_condition_report(model: CovarianceModel, t_max: float = 1e6,
                            tol: float = 1e-3) -> dict:
    """Numeric check of the mixing condition r(t) log t -> 0.

    For frac_ou the product is evaluated directly on a log grid out to t_max.
    For fbm_increment direct evaluation cancels catastrophically at large t,
    and the product genuinely decays only like t^{alpha-2} log t, so the
    check uses the analytic envelope
        |r(t)| <= alpha |1-alpha| (t-a)^{alpha-2} a^{2-alpha} / 2,  t > a+1,
    and reports both the numeric value at t_max and the (always negative)
    decay exponent. Tabulated models are advisory: the check covers only the
    table range.
    """
    report = {"model": model.model_id, "tol": tol, "t_max": t_max}
    if model.kind == FBM_INCREMENT:
        al, a = model.alpha, model.a
        if al == 1.0:
            # r vanishes identically beyond lag a
            report.update(method="exact-zero", max_tail_value=0.0,
                          numeric_ok=True, analytic_decay=True, satisfied=True)
            return report
        envelope = al * abs(1.0 - al) * (t_max - a) ** (al - 2.0) * a ** (2.0 - al) / 2.0
        val = envelope * math.log(t_max)
        report.update(method="envelope", max_tail_value=val,
                      numeric_ok=bool(val < tol),
                      analytic_decay=True,  # exponent alpha - 2 < 0
                      satisfied=True)
        return report
    if model.kind == TABULATED:
        t_hi = min(t_max, float(model.table_t[-1]))
        grid = np.logspace(math.log10(max(t_hi / 10.0, 2.0)), math.log10(t_hi), 64)
        vals = np.abs(eval_correlation(model, grid) * np.log(grid))
        val = float(vals.max())
        report.update(method="table-range", max_tail_value=val, t_max=t_hi,
                      numeric_ok=bool(val < tol), analytic_decay=False,
                      satisfied=bool(val < tol), advisory=True)
        return report
    grid = np.logspace(math.log10(t_max / 10.0), math.log10(t_max), 64)
    vals = np.abs(eval_correlation(model, grid) * np.log(grid))
    val = float(vals.max())
    # exp(-t^alpha) beats any power of log t in the limit for every alpha > 0
    report.update(method="direct", max_tail_value=val,
                  numeric_ok=bool(val < tol), analytic_decay=True,
                  satisfied=True)
    return report
