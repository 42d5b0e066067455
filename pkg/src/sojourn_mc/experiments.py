"""Monte Carlo estimation of scaled-sojourn tails over random horizons.

Each level u gets one simulation pass: paths of the stationary process are
generated on the grid step = 1/(points_per_unit * v(u)), horizons are drawn
once per replication (shared across levels for common-random-number
coupling), and the left-endpoint exceedance count serves every threshold of
the x-grid at once. Since v(u) * step = 1/points_per_unit, the indicator

    v(u) * step * count > x   <=>   count >= floor(x * points_per_unit) + 1

is evaluated in integers, which makes tails exactly nonincreasing in x on
shared paths and makes the x = 0 cell literally the grid sup-crossing event.

The exponential-correlation model at alpha = 1 is Markov on the grid, so
paths of any length are simulated exactly by the AR(1) recursion in column
chunks with carried state; replications retire as soon as every threshold
is decided. Other models are simulated by one circulant embedding per
horizon, which bounds the grid length a single pass can handle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import covariance as cov
from . import gauss_sim as gs
from . import heavy_tail as ht
from .asymptotics import _b_at, compound_poisson_tail, _conv_for, predict_tail
from .berman import BermanTable
from .errors import ContractError, RangeError
from .streams import ROLE_HORIZON, ROLE_PATH, float_key, stream

_BATCH_ELEMENTS = 20_000_000
_TIME_CHUNK = 4096
_EMBED_LIMIT = 1 << 22

_REPORT_HEADER = "scenario,alpha,family,u,x,empirical,se,predicted,ratio,flags"


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: cov.CovarianceModel
    horizon: ht.HorizonModel
    berman: BermanTable
    u_grid: np.ndarray
    x_grid: np.ndarray
    replications: int
    points_per_unit: float = 10.0
    cap_quantile: float = 1e-4
    cap_m_multiple: float = 1e3
    cap_absolute: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "u_grid", np.asarray(self.u_grid, dtype=float))
        object.__setattr__(self, "x_grid", np.asarray(self.x_grid, dtype=float))
        if self.points_per_unit < 10.0:
            raise RangeError(
                f"points_per_unit must be >= 10 to resolve the 1/v(u) "
                f"timescale, got {self.points_per_unit}")
        if self.replications < 1:
            raise RangeError("need at least one replication")
        if self.u_grid.ndim != 1 or np.any(np.diff(self.u_grid) <= 0.0):
            raise RangeError("u_grid must be 1-d strictly increasing")
        if len(self.u_grid) and self.u_grid[0] <= 1.0:
            raise RangeError("u_grid entries must exceed 1")
        if (self.x_grid.ndim != 1 or len(self.x_grid) == 0
                or np.any(np.diff(self.x_grid) <= 0.0) or self.x_grid[0] < 0.0):
            raise RangeError("x_grid must be 1-d strictly increasing, >= 0")
        if not 0.0 < self.cap_quantile < 1.0:
            raise RangeError("cap_quantile must lie in (0, 1)")
        if self.cap_m_multiple <= 0.0:
            raise RangeError("cap_m_multiple must be positive")
        if self.cap_absolute is not None and self.cap_absolute <= 0.0:
            raise RangeError("cap_absolute must be positive")
        if self.berman.alpha != self.model.alpha:
            raise ContractError(
                f"constant table alpha={self.berman.alpha:g} does not match "
                f"model alpha={self.model.alpha:g}")


@dataclass(frozen=True)
class CellResult:
    scenario: str
    alpha: float
    family: str
    u: float
    x: float
    empirical: float
    se: float
    predicted: float
    ratio: float | None
    flags: tuple


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    diagnostics: dict = field(compare=False)

    def to_csv(self) -> str:
        lines = [_REPORT_HEADER]
        for r in self.rows:
            ratio = "" if r.ratio is None else repr(float(r.ratio))
            lines.append(",".join([
                r.scenario, repr(float(r.alpha)), r.family, repr(float(r.u)),
                repr(float(r.x)), repr(float(r.empirical)), repr(float(r.se)),
                repr(float(r.predicted)), ratio, ";".join(r.flags)]))
        return "\n".join(lines) + "\n"

    def sidecar_json(self) -> str:
        return json.dumps(self.diagnostics, indent=2)


def _binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


def _thresholds_to_counts(x_values: np.ndarray, ppu: float) -> np.ndarray:
    return np.floor(np.asarray(x_values, dtype=float) * ppu).astype(np.int64) + 1


def _ar1_final_counts(u: float, rho: float, steps: np.ndarray, count_cap: int,
                      rng: np.random.Generator):
    """Exact AR(1) pass: capped exceedance counts and a max-based crossing flag."""
    n_rows = len(steps)
    counts = np.zeros(n_rows, dtype=np.int64)
    state = rng.standard_normal(n_rows)
    crossed = state > u
    counts[crossed] = 1
    remaining = steps.astype(np.int64) - 1
    sig = math.sqrt(max(0.0, 1.0 - rho * rho))
    active = np.nonzero((remaining > 0) & (counts < count_cap))[0]
    while active.size:
        cols = int(min(_TIME_CHUNK, int(remaining[active].max())))
        z = rng.standard_normal((active.size, cols))
        x, _ = lfilter([1.0], [1.0, -rho], sig * z, axis=1,
                       zi=(rho * state[active])[:, None])
        valid = np.arange(cols)[None, :] < remaining[active, None]
        counts[active] += np.count_nonzero((x > u) & valid, axis=1)
        crossed[active] |= np.where(valid, x, -np.inf).max(axis=1) > u
        state[active] = x[:, -1]
        remaining[active] -= cols
        keep = (remaining[active] > 0) & (counts[active] < count_cap)
        active = active[keep]
    return np.minimum(counts, count_cap), crossed


def _embed_final_counts(model: cov.CovarianceModel, u: float, delta: float,
                        steps: np.ndarray, count_cap: int,
                        rng: np.random.Generator):
    """One-embedding pass for non-Markov models; whole paths are materialized."""
    n = max(2, int(steps.max()))
    if n > _EMBED_LIMIT:
        raise ContractError(
            f"horizon needs {n} grid points but a single circulant embedding "
            f"is capped at {_EMBED_LIMIT}; shorten the horizon or refine the "
            f"cap rule")
    paths, flags = gs._stationary_batch(model, n, delta, len(steps), rng)
    valid = np.arange(n)[None, :] < steps[:, None]
    ex = (paths > u) & valid
    counts = ex.sum(axis=1)
    crossed = np.where(valid, paths, -np.inf).max(axis=1) > u
    return np.minimum(counts, count_cap), crossed, flags


def _final_counts(model: cov.CovarianceModel, u: float, delta: float,
                  steps: np.ndarray, count_cap: int, seed: int):
    """Batched exceedance counts for all replications; returns (counts, crossed, flags)."""
    n_rows = len(steps)
    counts = np.empty(n_rows, dtype=np.int64)
    crossed = np.empty(n_rows, dtype=bool)
    flags: set = set()
    markov = model.kind == cov.FRAC_OU and model.alpha == 1.0
    if markov:
        batch = max(1, _BATCH_ELEMENTS // _TIME_CHUNK)
        rho = math.exp(-delta)
    else:
        batch = max(1, _BATCH_ELEMENTS // max(2, int(steps.max()) if n_rows else 2))
    for b_idx, start in enumerate(range(0, n_rows, batch)):
        sl = slice(start, min(start + batch, n_rows))
        rng = stream(seed, ROLE_PATH, float_key(u), b_idx)
        if markov:
            counts[sl], crossed[sl] = _ar1_final_counts(
                u, rho, steps[sl], count_cap, rng)
        else:
            counts[sl], crossed[sl], fl = _embed_final_counts(
                model, u, delta, steps[sl], count_cap, rng)
            flags.update(fl)
    return counts, crossed, tuple(sorted(flags))


def _level_scales(cfg: ExperimentConfig, u: float):
    """(v, psi, m, delta, cap, sanity) for one level; u <= 1 runs unscaled."""
    if u > 1.0:
        scaling = cov.scaling_bundle(cfg.model, u, cfg.berman.b0)
        v, psi, m = scaling.v, scaling.psi, scaling.m
        sanity = False
    else:
        v, psi, m = 1.0, cov.normal_survival(u), math.inf
        sanity = True
    delta = 1.0 / (cfg.points_per_unit * v)
    cap = ht.tail_quantile(cfg.horizon, cfg.cap_quantile)
    if math.isfinite(m):
        cap = min(cap, cfg.cap_m_multiple * m)
    if cfg.cap_absolute is not None:
        cap = min(cap, cfg.cap_absolute)
    return v, psi, m, delta, cap, sanity


def _horizon_draws(cfg: ExperimentConfig) -> np.ndarray:
    """Uniforms shared by every level: one draw per replication."""
    rng = stream(cfg.seed, ROLE_HORIZON)
    return ht._open_uniform(rng, cfg.replications)


def _level_pass(cfg: ExperimentConfig, u: float, x_values: np.ndarray):
    """One pass serving every threshold in x_values plus the sup event."""
    v, psi, m, delta, cap, sanity = _level_scales(cfg, u)
    horizons = np.minimum(ht.tail_inverse(cfg.horizon, _horizon_draws(cfg)), cap)
    steps = np.maximum(np.ceil(horizons / delta).astype(np.int64), 1)
    thresholds = _thresholds_to_counts(x_values, cfg.points_per_unit)
    count_cap = int(thresholds.max())
    counts, crossed, flags = _final_counts(cfg.model, u, delta, steps,
                                           count_cap, cfg.seed)
    estimates = np.array([np.count_nonzero(counts >= thr) / cfg.replications
                          for thr in thresholds])
    ses = np.array([_binomial_se(p, cfg.replications) for p in estimates])
    sup_est = np.count_nonzero(crossed) / cfg.replications
    if sanity:
        flags = flags + ("sanity-mode",)
    diag = {
        "u": float(u), "v": float(v), "psi": float(psi), "m": float(m),
        "step": float(delta), "cap": float(cap),
        "truncated_mass": float(ht.tail_T(cfg.horizon, cap)),
        "replications": int(cfg.replications),
        "mean_steps": float(np.mean(steps)),
        "flags": list(flags),
    }
    return estimates, ses, sup_est, diag


def empirical_sojourn_tail(cfg: ExperimentConfig, u: float, x: float):
    """(estimate, se) for P{v(u) L_u[0, T] > x}, deterministic given cfg.seed.

    The pass always evaluates the config's full x-grid (plus x if absent) so
    estimates at different thresholds share identical paths.
    """
    x_values = np.union1d(cfg.x_grid, [float(x)])
    estimates, ses, _, _ = _level_pass(cfg, u, x_values)
    idx = int(np.searchsorted(x_values, float(x)))
    return float(estimates[idx]), float(ses[idx])


def empirical_sup_tail(cfg: ExperimentConfig, u: float):
    """(estimate, se) for P{sup of the grid path above u} on the same paths
    as empirical_sojourn_tail at the config's x-grid."""
    _, _, sup_est, _ = _level_pass(cfg, u, cfg.x_grid)
    return float(sup_est), _binomial_se(float(sup_est), cfg.replications)


def run_comparison(cfg: ExperimentConfig) -> ComparisonReport:
    """Full (u, x) sweep: empirical tails vs predicted tails, with flags."""
    scenario = cfg.horizon.scenario
    rows = []
    cells = []
    for u in cfg.u_grid:
        estimates, ses, sup_est, diag = _level_pass(cfg, u, cfg.x_grid)
        diag["sup_estimate"] = float(sup_est)
        cells.append(diag)
        for i, x in enumerate(cfg.x_grid):
            pred = predict_tail(scenario, cfg.model, cfg.horizon, cfg.berman,
                                float(u), float(x))
            est = float(estimates[i])
            flags = tuple(diag["flags"])
            if diag["truncated_mass"] > 10.0 * est:
                flags = flags + ("truncated-mass",)
            ratio = est / pred.predicted_tail if est > 0.0 else None
            rows.append(CellResult(
                scenario=scenario, alpha=cfg.model.alpha,
                family=cfg.horizon.family, u=float(u), x=float(x),
                empirical=est, se=float(ses[i]),
                predicted=float(pred.predicted_tail), ratio=ratio, flags=flags))
    diagnostics = {
        "schema_version": 1,
        "scenario": scenario,
        "model": cfg.model.model_id,
        "horizon": cfg.horizon.model_id,
        "alpha": float(cfg.model.alpha),
        "replications": int(cfg.replications),
        "points_per_unit": float(cfg.points_per_unit),
        "cap_quantile": float(cfg.cap_quantile),
        "cap_m_multiple": float(cfg.cap_m_multiple),
        "seed": int(cfg.seed),
        "berman": {
            "alpha": float(cfg.berman.alpha), "S": float(cfg.berman.S),
            "step": float(cfg.berman.step),
            "replications": int(cfg.berman.replications),
            "seed": int(cfg.berman.seed),
        },
        "levels": cells,
    }
    return ComparisonReport(rows=tuple(rows), diagnostics=diagnostics)


def _ar1_checkpoint_hits(u: float, rho: float, checkpoints: np.ndarray,
                         thr: int, n_rows: int, rng: np.random.Generator):
    """Indicators {count at checkpoint >= thr} for equal-length AR(1) paths.

    Retired rows (count already >= thr) imply 1 at all later checkpoints,
    so their simulation stops early.
    """
    n_cp = len(checkpoints)
    n_max = int(checkpoints[-1])
    ind = np.zeros((n_rows, n_cp), dtype=bool)
    state = rng.standard_normal(n_rows)
    counts = (state > u).astype(np.int64)
    processed = 1
    k = 0
    while k < n_cp and checkpoints[k] <= processed:
        ind[:, k] = counts >= thr
        k += 1
    retired = counts >= thr
    if k < n_cp and retired.any():
        ind[np.nonzero(retired)[0], k:] = True
    active = np.nonzero(~retired)[0]
    sig = math.sqrt(max(0.0, 1.0 - rho * rho))
    while active.size and processed < n_max:
        cols = int(min(_TIME_CHUNK, n_max - processed))
        z = rng.standard_normal((active.size, cols))
        x, _ = lfilter([1.0], [1.0, -rho], sig * z, axis=1,
                       zi=(rho * state[active])[:, None])
        cum = np.cumsum(x > u, axis=1)
        while k < n_cp and checkpoints[k] <= processed + cols:
            col = int(checkpoints[k]) - processed - 1
            ind[active, k] = (counts[active] + cum[:, col]) >= thr
            k += 1
        counts[active] += cum[:, -1]
        state[active] = x[:, -1]
        processed += cols
        now_retired = counts[active] >= thr
        if k < n_cp and now_retired.any():
            ind[active[now_retired], k:] = True
        active = active[~now_retired]
    return ind


def _embed_checkpoint_hits(model: cov.CovarianceModel, u: float, delta: float,
                           checkpoints: np.ndarray, thr: int, n_rows: int,
                           rng: np.random.Generator):
    n_max = max(2, int(checkpoints[-1]))
    if n_max > _EMBED_LIMIT:
        raise ContractError(
            f"checkpointed horizon needs {n_max} grid points; single-embedding "
            f"simulation is capped at {_EMBED_LIMIT}")
    paths, _ = gs._stationary_batch(model, n_max, delta, n_rows, rng)
    cum = np.cumsum(paths > u, axis=1)
    return cum[:, checkpoints - 1] >= thr


def compound_poisson_convergence_check(alpha: float, berman: BermanTable,
                                       model: cov.CovarianceModel, u_grid,
                                       l_grid, x: float, R: int, seed: int,
                                       points_per_unit: float = 10.0) -> dict:
    """Empirical P{L*_u[0, l m(u)] > x} against the compound-Poisson tail.

    Returns a table with one row per (u, l) and the per-u sup-discrepancy
    sequence that the convergence claim says should shrink as u grows.
    """
    u_grid = np.asarray(u_grid, dtype=float)
    l_grid = np.asarray(l_grid, dtype=float)
    if len(l_grid) == 0 or np.any(~np.isfinite(l_grid)) or np.any(l_grid <= 0.0):
        raise RangeError("l_grid must be positive and finite")
    if np.any(np.diff(l_grid) <= 0.0):
        raise RangeError("l_grid must be strictly increasing")
    if np.any(u_grid <= 1.0):
        raise RangeError("u_grid entries must exceed 1")
    if x < 0.0:
        raise RangeError(f"x must be nonnegative, got {x}")
    if berman.alpha != model.alpha:
        raise ContractError("constant table alpha does not match model alpha")
    if points_per_unit < 10.0:
        raise RangeError("points_per_unit must be >= 10")

    conv = _conv_for(berman)
    targets = [compound_poisson_tail(float(l), float(x), conv).value
               for l in l_grid]
    thr = int(_thresholds_to_counts(np.array([x]), points_per_unit)[0])
    markov = model.kind == cov.FRAC_OU and model.alpha == 1.0
    rows = []
    sup_rows = []
    for u in u_grid:
        scaling = cov.scaling_bundle(model, float(u), berman.b0)
        delta = 1.0 / (points_per_unit * scaling.v)
        checkpoints = np.maximum(
            np.ceil(l_grid * scaling.m / delta).astype(np.int64), 1)
        hits = np.zeros((R, len(l_grid)), dtype=bool)
        if markov:
            batch = max(1, _BATCH_ELEMENTS // _TIME_CHUNK)
            rho = math.exp(-delta)
        else:
            batch = max(1, _BATCH_ELEMENTS // max(2, int(checkpoints[-1])))
        for b_idx, start in enumerate(range(0, R, batch)):
            rows_here = min(batch, R - start)
            rng = stream(seed, ROLE_PATH, float_key(u), b_idx)
            if markov:
                hits[start:start + rows_here] = _ar1_checkpoint_hits(
                    float(u), rho, checkpoints, thr, rows_here, rng)
            else:
                hits[start:start + rows_here] = _embed_checkpoint_hits(
                    model, float(u), delta, checkpoints, thr, rows_here, rng)
        discrepancies = []
        for i, l in enumerate(l_grid):
            emp = float(np.count_nonzero(hits[:, i]) / R)
            se = _binomial_se(emp, R)
            d = abs(emp - targets[i])
            discrepancies.append((d, se))
            rows.append({
                "u": float(u), "l": float(l),
                "horizon": float(l * scaling.m),
                "empirical": emp, "se": se,
                "target": float(targets[i]), "discrepancy": d,
            })
        j = int(np.argmax([d for d, _ in discrepancies]))
        sup_rows.append({
            "u": float(u), "sup_discrepancy": float(discrepancies[j][0]),
            "argmax_l": float(l_grid[j]), "se_at_argmax": float(discrepancies[j][1]),
        })
    return {"x": float(x), "replications": int(R),
            "points_per_unit": float(points_per_unit),
            "rows": rows, "sup_discrepancy": sup_rows}


def intermediate_horizon_ratio_check(alpha: float, berman: BermanTable,
                                     model: cov.CovarianceModel, u_grid,
                                     A_rule, x: float, R: int, seed: int,
                                     points_per_unit: float = 10.0) -> dict:
    """Ratio of empirical P{L*_u[0, A(u)] > x} to B(x) A(u) v(u) Psi(u).

    A_rule is either the canonical string "sqrt(m/v)" or a callable
    (u, scaling) -> A. The window rule must satisfy A v increasing and
    A/m decreasing over the supplied grid, the checkable shadow of the
    intermediate-horizon growth conditions.
    """
    u_grid = np.asarray(u_grid, dtype=float)
    if np.any(u_grid <= 1.0):
        raise RangeError("u_grid entries must exceed 1")
    if berman.alpha != model.alpha:
        raise ContractError("constant table alpha does not match model alpha")
    if points_per_unit < 10.0:
        raise RangeError("points_per_unit must be >= 10")
    if A_rule == "sqrt(m/v)":
        rule_name = "sqrt(m/v)"

        def a_of(u, scaling):
            return math.sqrt(scaling.m / scaling.v)
    elif callable(A_rule):
        rule_name = getattr(A_rule, "__name__", "custom")
        a_of = A_rule
    else:
        raise RangeError(f"A_rule must be 'sqrt(m/v)' or callable, got {A_rule!r}")

    b_x = _b_at(berman, float(x))
    scalings = [cov.scaling_bundle(model, float(u), berman.b0) for u in u_grid]
    a_values = [float(a_of(float(u), s)) for u, s in zip(u_grid, scalings)]
    if any(a <= 0.0 for a in a_values):
        raise RangeError("A_rule produced a nonpositive window")
    av = [a * s.v for a, s in zip(a_values, scalings)]
    am = [a / s.m for a, s in zip(a_values, scalings)]
    if len(u_grid) >= 2 and (np.any(np.diff(av) <= 0.0) or np.any(np.diff(am) >= 0.0)):
        raise ContractError(
            f"A_rule {rule_name!r} violates the intermediate-horizon growth "
            f"conditions on this grid: need A v increasing and A/m decreasing")

    thr = int(_thresholds_to_counts(np.array([x]), points_per_unit)[0])
    rows = []
    for u, scaling, a in zip(u_grid, scalings, a_values):
        delta = 1.0 / (points_per_unit * scaling.v)
        n_steps = max(1, int(math.ceil(a / delta)))
        steps = np.full(R, n_steps, dtype=np.int64)
        counts, _, flags = _final_counts(model, float(u), delta, steps, thr,
                                         int(seed))
        emp = float(np.count_nonzero(counts >= thr) / R)
        se = _binomial_se(emp, R)
        predicted = b_x * a * scaling.v * scaling.psi
        rows.append({
            "u": float(u), "A": float(a), "empirical": emp, "se": se,
            "predicted": float(predicted),
            "ratio": float(emp / predicted) if predicted > 0.0 else math.inf,
            "flags": list(flags),
        })
    return {"x": float(x), "A_rule": rule_name, "replications": int(R),
            "points_per_unit": float(points_per_unit), "rows": rows}
