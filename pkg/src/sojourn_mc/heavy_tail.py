"""Random-horizon models for the four tail-regime scenarios.

The horizon T enters the limit theory only through its tail F_bar(t) = P{T > t},
its integrated tail l(u) = int_0^u F_bar(t) dt, and quantile-coupled sampling.
Four regimes are distinguished by the tail at the critical horizon scale:

  D1_Integrable    E[T] < infinity (l(u) -> E[T], u F_bar(u) -> 0)
  D2_RV1           F_bar regularly varying with index 1, infinite mean
  D3_RV            F_bar(t) = (t/t0)^-lambda with lambda in (0, 1)
  D4_SlowlyVarying F_bar slowly varying

Canonical families, all with closed-form tails, integrated tails, and
single-uniform inverse-CDF samplers (one draw per replication keeps horizon
sampling exactly coupled across levels u):

  Deterministic(t0)           P{T = t0} = 1
  Exponential(mean)           F_bar(t) = exp(-t/mean)
  Pareto(lambda, t0)          F_bar(t) = min(1, (t/t0)^-lambda)
  Pareto1LogCorrected(t0)     F_bar(t) = (t0/t) ln^-3(e t/t0) for t >= t0
                              (index-1 tail with finite mean 1.5 t0)
  LogPareto(t0)               F_bar(t) = min(1, 1/ln(t e/t0)) for t >= t0
                              (1/ln t at the default t0 = e)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expi

from .errors import RangeError, SolverError
from .streams import stream

DETERMINISTIC = "deterministic"
EXPONENTIAL = "exponential"
PARETO = "pareto"
PARETO1_LOG = "pareto1_log_corrected"
LOG_PARETO = "log_pareto"

D1 = "D1_Integrable"
D2 = "D2_RV1"
D3 = "D3_RV"
D4 = "D4_SlowlyVarying"


@dataclass(frozen=True)
class HorizonModel:
    scenario: str
    family: str
    t0: float = 1.0
    lam: float = math.nan
    mean: float = math.nan

    @property
    def model_id(self) -> str:
        if self.family == EXPONENTIAL:
            return f"{self.family}(mean={self.mean:g})"
        if self.family == PARETO:
            return f"{self.family}(lambda={self.lam:g},t0={self.t0:g})"
        return f"{self.family}(t0={self.t0:g})"


def deterministic(t0: float) -> HorizonModel:
    if t0 <= 0.0:
        raise RangeError(f"t0 must be positive, got {t0}")
    return HorizonModel(scenario=D1, family=DETERMINISTIC, t0=float(t0))


def exponential(mean: float) -> HorizonModel:
    if mean <= 0.0:
        raise RangeError(f"mean must be positive, got {mean}")
    return HorizonModel(scenario=D1, family=EXPONENTIAL, mean=float(mean))


def pareto(lam: float, t0: float = 1.0) -> HorizonModel:
    """Pure Pareto tail; the scenario follows from the index lambda."""
    if lam <= 0.0 or t0 <= 0.0:
        raise RangeError(f"need lambda > 0 and t0 > 0, got {lam}, {t0}")
    if lam < 1.0:
        scenario = D3
    elif lam == 1.0:
        scenario = D2
    else:
        scenario = D1
    return HorizonModel(scenario=scenario, family=PARETO, t0=float(t0),
                        lam=float(lam))


def pareto1_log_corrected(t0: float = 1.0) -> HorizonModel:
    """Index-1 Pareto with an ln^-3 correction: finite mean 1.5 t0."""
    if t0 <= 0.0:
        raise RangeError(f"t0 must be positive, got {t0}")
    return HorizonModel(scenario=D1, family=PARETO1_LOG, t0=float(t0))


def log_pareto(t0: float = math.e) -> HorizonModel:
    if t0 <= 0.0:
        raise RangeError(f"t0 must be positive, got {t0}")
    return HorizonModel(scenario=D4, family=LOG_PARETO, t0=float(t0))


def tail_T(h: HorizonModel, t) -> float | np.ndarray:
    """Exact F_bar(t) = P{T > t}."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise RangeError("t must be nonnegative")
    if h.family == DETERMINISTIC:
        out = np.where(t_arr < h.t0, 1.0, 0.0)
    elif h.family == EXPONENTIAL:
        out = np.exp(-t_arr / h.mean)
    elif h.family == PARETO:
        with np.errstate(divide="ignore"):
            out = np.where(t_arr < h.t0, 1.0, (t_arr / h.t0) ** -h.lam)
    elif h.family == PARETO1_LOG:
        safe = np.maximum(t_arr, h.t0)
        out = np.where(t_arr < h.t0, 1.0,
                       (h.t0 / safe) * np.log(math.e * safe / h.t0) ** -3.0)
    elif h.family == LOG_PARETO:
        safe = np.maximum(t_arr, h.t0)
        out = np.where(t_arr < h.t0, 1.0, 1.0 / np.log(math.e * safe / h.t0))
    else:
        raise RangeError(f"unknown family {h.family!r}")
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def tail_inverse(h: HorizonModel, u01) -> float | np.ndarray:
    """Map uniforms to horizons: T = inf{t : F_bar(t) <= u01}.

    The same map serves as tail quantile. Deterministic horizons return t0
    for every u01 < 1; continuous families invert F_bar exactly.
    """
    u_arr = np.asarray(u01, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr > 1.0):
        raise RangeError("u01 must lie in (0, 1]")
    if h.family == DETERMINISTIC:
        out = np.full_like(u_arr, h.t0)
    elif h.family == EXPONENTIAL:
        out = -h.mean * np.log(u_arr)
    elif h.family == PARETO:
        out = h.t0 * u_arr ** (-1.0 / h.lam)
    elif h.family == PARETO1_LOG:
        out = h.t0 * np.exp(_p1lc_w(u_arr) - 1.0)
    elif h.family == LOG_PARETO:
        with np.errstate(over="ignore"):
            out = np.where(u_arr < 1.0 / 700.0, np.inf,
                           (h.t0 / math.e) * np.exp(1.0 / np.maximum(u_arr, 1e-12)))
    else:
        raise RangeError(f"unknown family {h.family!r}")
    return float(out) if np.isscalar(u01) or u_arr.ndim == 0 else out


def _p1lc_w(u_arr: np.ndarray) -> np.ndarray:
    """Solve exp(1-w)/w^3 = u on w >= 1 by monotone Newton iteration.

    h(w) = (1-w) - 3 ln w - ln u is decreasing and convex, so Newton from
    w = 1 converges monotonically from the left.
    """
    target = np.log(u_arr)
    w = np.ones_like(u_arr)
    for _ in range(80):
        res = (1.0 - w) - 3.0 * np.log(w) - target
        step = res / (1.0 + 3.0 / w)
        w = w + step
        if np.all(np.abs(step) <= 1e-14 * w):
            return w
    raise SolverError("horizon inverse did not converge")


def sample_T(h: HorizonModel, seed: int) -> float:
    """One inverse-CDF draw; deterministic given the seed."""
    rng = stream(seed)
    return float(tail_inverse(h, _open_uniform(rng, 1))[0])


def _open_uniform(rng: np.random.Generator, count: int) -> np.ndarray:
    u = rng.random(count)
    return np.maximum(u, np.finfo(float).tiny)  # keep draws in (0, 1]


def sample_T_batch(h: HorizonModel, count: int, rng: np.random.Generator):
    return tail_inverse(h, _open_uniform(rng, count))


def tail_quantile(h: HorizonModel, p: float) -> float:
    """Smallest t with F_bar(t) <= p."""
    if not 0.0 < p <= 1.0:
        raise RangeError(f"p must lie in (0, 1], got {p}")
    return float(tail_inverse(h, p))


def mean_T(h: HorizonModel) -> float:
    if h.family == DETERMINISTIC:
        return h.t0
    if h.family == EXPONENTIAL:
        return h.mean
    if h.family == PARETO:
        return h.t0 * h.lam / (h.lam - 1.0) if h.lam > 1.0 else math.inf
    if h.family == PARETO1_LOG:
        return 1.5 * h.t0
    if h.family == LOG_PARETO:
        return math.inf
    raise RangeError(f"unknown family {h.family!r}")


def integrated_tail(h: HorizonModel, u: float) -> float:
    """l(u) = int_0^u F_bar(t) dt, closed form for every built-in family."""
    if u < 0.0:
        raise RangeError(f"u must be nonnegative, got {u}")
    if u == 0.0:
        return 0.0
    if h.family == DETERMINISTIC:
        return min(u, h.t0)
    if h.family == EXPONENTIAL:
        return h.mean * -math.expm1(-u / h.mean)
    if u <= h.t0:
        return u
    if h.family == PARETO:
        if h.lam == 1.0:
            return h.t0 * (1.0 + math.log(u / h.t0))
        return h.t0 + h.t0 / (1.0 - h.lam) * ((u / h.t0) ** (1.0 - h.lam) - 1.0)
    if h.family == PARETO1_LOG:
        return h.t0 + 0.5 * h.t0 * (1.0 - math.log(math.e * u / h.t0) ** -2.0)
    if h.family == LOG_PARETO:
        w = math.log(math.e * u / h.t0)
        return h.t0 + (h.t0 / math.e) * (expi(w) - expi(1.0))
    raise RangeError(f"unknown family {h.family!r}")


def _integrated_tail_quad(h: HorizonModel, u: float) -> float:
    """Adaptive-quadrature reference for l(u), relative tolerance 1e-8."""
    if u == 0.0:
        return 0.0
    pts = [h.t0] if 0.0 < h.t0 < u else None
    val, err = quad(lambda t: tail_T(h, t), 0.0, u, points=pts,
                    epsrel=1e-8, limit=200)
    if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1.0):
        raise SolverError(f"integrated-tail quadrature failed at u={u:g}")
    return float(val)


def parse_horizon_spec(spec) -> HorizonModel:
    """Build a horizon from 'family:key=val,...' strings or config dicts."""
    if isinstance(spec, HorizonModel):
        return spec
    if isinstance(spec, str):
        name, _, rest = spec.partition(":")
        params = {}
        if rest:
            for part in rest.split(","):
                key, _, val = part.partition("=")
                if not _ or not key:
                    raise RangeError(f"bad horizon spec {spec!r}")
                params[key.strip()] = float(val)
        return _horizon_from_params(name.strip(), params)
    if isinstance(spec, dict):
        params = dict(spec)
        name = params.pop("family", None)
        if not isinstance(name, str):
            raise RangeError("horizon dict needs a 'family' string")
        return _horizon_from_params(name, {k: float(v) for k, v in params.items()})
    raise RangeError(f"cannot parse horizon spec of type {type(spec).__name__}")


def _horizon_from_params(name: str, params: dict) -> HorizonModel:
    known = {
        DETERMINISTIC: (deterministic, {"t0"}),
        EXPONENTIAL: (exponential, {"mean"}),
        PARETO: (pareto, {"lambda", "t0"}),
        PARETO1_LOG: (pareto1_log_corrected, {"t0"}),
        LOG_PARETO: (log_pareto, {"t0"}),
    }
    if name not in known:
        raise RangeError(f"unknown horizon family {name!r}")
    ctor, allowed = known[name]
    unknown = set(params) - allowed
    if unknown:
        raise RangeError(f"unknown {name} parameters {sorted(unknown)}")
    kwargs = {("lam" if k == "lambda" else k): v for k, v in params.items()}
    return ctor(**kwargs)
