"""Exact simulation of stationary Gaussian paths and the drifted fBm field.

Stationary paths on a uniform grid are drawn by circulant embedding: the
covariance row r(|i-j| step) is embedded in a circulant matrix whose FFT
eigenvalues must be nonnegative; one complex FFT then yields two independent
exact paths (real and imaginary parts). Models whose embedding stays
indefinite after padding fall back to a dense factorization for n <= 4096.

The field W_alpha(s) = sqrt(2) B_alpha(s) - |s|^alpha (B_alpha fractional
Brownian motion with Hurst alpha/2) is synthesized from one fBm on [0, 2S]
recentred at S, which is exact in law by increment stationarity. alpha = 2
degenerates to the random parabola sqrt(2) Z s - s^2, and alpha = 1 to
ordinary Brownian motion (cumulative iid Gaussian increments).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import covariance as cov
from .errors import RangeError, SolverError
from .streams import stream

_EIG_REL_TOL = 1e-8
_MAX_EMBED = 2 ** 24
_DENSE_MAX_N = 4096

_embed_cache: dict = {}
_fgn_cache: dict = {}
_dense_cache: dict = {}


@dataclass(frozen=True, eq=False)
class GridPath:
    step: float
    values: np.ndarray
    seed: int
    model_id: str
    flags: tuple = ()

    @property
    def t_max(self) -> float:
        return (len(self.values) - 1) * self.step


@dataclass(frozen=True, eq=False)
class WAlphaPath:
    step: float
    origin_index: int
    values: np.ndarray
    alpha: float
    seed: int
    flags: tuple = ()


class _EmbeddingError(SolverError):
    pass


def _spectrum_from_row(row: np.ndarray):
    lam = np.fft.fft(row).real
    lam_max = lam.max()
    if lam.min() < -_EIG_REL_TOL * lam_max:
        raise _EmbeddingError(
            f"circulant embedding has eigenvalues below -{_EIG_REL_TOL:g} * max "
            f"(min {lam.min():.3e}, max {lam_max:.3e})")
    flags = ()
    if lam.min() < 0.0:
        lam = np.clip(lam, 0.0, None)
        flags = ("clipped-eigenvalues",)
    return lam, flags


def _stationary_spectrum(model: cov.CovarianceModel, n: int, step: float):
    key = (model.model_id, n, step)
    hit = _embed_cache.get(key)
    if hit is not None:
        return hit
    m = 1 << max(1, int(np.ceil(np.log2(2 * (n - 1)))))
    last_err = None
    while m <= _MAX_EMBED:
        lags = np.minimum(np.arange(m), m - np.arange(m)) * step
        try:
            row = cov.eval_correlation(model, lags)
            lam, flags = _spectrum_from_row(row)
        except (RangeError, _EmbeddingError) as err:
            last_err = err
            m *= 2
            continue
        out = (np.sqrt(lam / m), flags)
        if len(_embed_cache) > 16:
            _embed_cache.clear()
        _embed_cache[key] = out
        return out
    raise _EmbeddingError(
        f"no nonnegative circulant embedding for {model.model_id} with n={n}, "
        f"step={step:g} up to padding {_MAX_EMBED}: {last_err}")


def _circulant_batch(scaled_sqrt_lam: np.ndarray, n: int, count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """count exact paths of length n; one complex FFT yields two paths."""
    m = len(scaled_sqrt_lam)
    pairs = (count + 1) // 2
    out = np.empty((count, n))
    # keep each FFT block under ~2^25 complex entries
    block = max(1, (1 << 25) // m)
    done = 0
    while done < pairs:
        b = min(block, pairs - done)
        zeta = rng.standard_normal((b, m)) + 1j * rng.standard_normal((b, m))
        y = np.fft.fft(zeta * scaled_sqrt_lam, axis=1)[:, :n]
        lo = 2 * done
        take_re = min(b, count - lo)
        out[lo:lo + take_re] = y.real[:take_re]
        lo_im = lo + take_re
        take_im = min(b, count - lo_im)
        if take_im > 0:
            out[lo_im:lo_im + take_im] = y.imag[:take_im]
        done += b
    return out


def _dense_factor(model: cov.CovarianceModel, n: int, step: float):
    key = (model.model_id, n, step)
    hit = _dense_cache.get(key)
    if hit is not None:
        return hit
    lags = np.arange(n) * step
    row = cov.eval_correlation(model, lags)
    sigma = row[np.abs(np.subtract.outer(np.arange(n), np.arange(n)))]
    w, vecs = np.linalg.eigh(sigma)
    if w.min() < -_EIG_REL_TOL * w.max():
        raise SolverError(
            f"covariance of {model.model_id} is not positive semidefinite on this "
            f"grid (min eigenvalue {w.min():.3e})")
    flags = ("dense-fallback",)
    if w.min() < 0.0:
        flags = ("dense-fallback", "clipped-eigenvalues")
    factor = vecs * np.sqrt(np.clip(w, 0.0, None))
    out = (factor, flags)
    if len(_dense_cache) > 8:
        _dense_cache.clear()
    _dense_cache[key] = out
    return out


def _stationary_batch(model: cov.CovarianceModel, n: int, step: float, count: int,
                      rng: np.random.Generator):
    """(count, n) exact stationary paths plus warning flags."""
    if n < 2:
        raise RangeError(f"need at least 2 grid points, got {n}")
    if step <= 0.0:
        raise RangeError(f"step must be positive, got {step}")
    try:
        scaled, flags = _stationary_spectrum(model, n, step)
        return _circulant_batch(scaled, n, count, rng), flags
    except _EmbeddingError:
        if n > _DENSE_MAX_N:
            raise
        factor, flags = _dense_factor(model, n, step)
        z = rng.standard_normal((count, n))
        return z @ factor.T, flags


def simulate_stationary(model: cov.CovarianceModel, n: int, step: float,
                        seed: int) -> GridPath:
    """One exact path of X(0), X(step), ..., X((n-1) step)."""
    rng = stream(seed)
    values, flags = _stationary_batch(model, n, step, 1, rng)
    return GridPath(step=float(step), values=values[0], seed=int(seed),
                    model_id=model.model_id, flags=flags)


def _fgn_spectrum(hurst: float, n_incr: int):
    key = (hurst, n_incr)
    hit = _fgn_cache.get(key)
    if hit is not None:
        return hit
    m = 1 << max(1, int(np.ceil(np.log2(2 * n_incr))))
    while m <= _MAX_EMBED:
        k = np.minimum(np.arange(m), m - np.arange(m)).astype(float)
        h2 = 2.0 * hurst
        gamma = 0.5 * ((k + 1.0) ** h2 - 2.0 * k ** h2 + np.abs(k - 1.0) ** h2)
        try:
            lam, flags = _spectrum_from_row(gamma)
        except _EmbeddingError:
            m *= 2
            continue
        out = (np.sqrt(lam / m), flags)
        if len(_fgn_cache) > 16:
            _fgn_cache.clear()
        _fgn_cache[key] = out
        return out
    raise _EmbeddingError(f"no nonnegative fGn embedding for H={hurst:g}, n={n_incr}")


def _fbm_batch(alpha: float, n_incr: int, step: float, count: int,
               rng: np.random.Generator):
    """(count, n_incr + 1) fBm paths B(0)=0, Hurst alpha/2, plus flags."""
    hurst = 0.5 * alpha
    if hurst == 0.5:
        incr = rng.standard_normal((count, n_incr)) * np.sqrt(step)
        flags = ()
    else:
        scaled, flags = _fgn_spectrum(hurst, n_incr)
        incr = _circulant_batch(scaled, n_incr, count, rng) * step ** hurst
    paths = np.empty((count, n_incr + 1))
    paths[:, 0] = 0.0
    np.cumsum(incr, axis=1, out=paths[:, 1:])
    return paths, flags


def _w_alpha_batch(alpha: float, S: float, step: float, count: int,
                   rng: np.random.Generator):
    """(count, 2 n_side + 1) samples of W_alpha on [-S, S]; W(0) = 0 exactly."""
    n_side = _grid_side(S, step)
    n_pts = 2 * n_side + 1
    s = (np.arange(n_pts) - n_side) * step
    if alpha == 2.0:
        z = rng.standard_normal(count)
        return np.sqrt(2.0) * z[:, None] * s - s * s, n_side, ()
    fbm, flags = _fbm_batch(alpha, 2 * n_side, step, count, rng)
    w = np.sqrt(2.0) * (fbm - fbm[:, n_side][:, None])
    w -= np.abs(s) ** alpha
    return w, n_side, flags


def _w_alpha_batch_one_sided(alpha: float, S: float, step: float, count: int,
                             rng: np.random.Generator):
    """(count, n_side + 1) samples of W_alpha on [0, S]."""
    n_side = _grid_side(S, step)
    s = np.arange(n_side + 1) * step
    if alpha == 2.0:
        z = rng.standard_normal(count)
        return np.sqrt(2.0) * z[:, None] * s - s * s, ()
    fbm, flags = _fbm_batch(alpha, n_side, step, count, rng)
    w = np.sqrt(2.0) * fbm - s ** alpha
    return w, flags


def _grid_side(S: float, step: float) -> int:
    if S <= 0.0 or step <= 0.0:
        raise RangeError(f"need S > 0 and step > 0, got S={S}, step={step}")
    n_side = int(round(S / step))
    if abs(n_side * step - S) > 1e-9 * max(1.0, S):
        raise RangeError(f"S={S:g} is not an integer multiple of step={step:g}")
    if 2 * n_side + 1 > _MAX_EMBED:
        raise RangeError(f"S/step = {S / step:g} exceeds the {_MAX_EMBED} point cap")
    if n_side < 1:
        raise RangeError("window too short for the grid")
    return n_side


def simulate_w_alpha(alpha: float, S: float, step: float, seed: int) -> WAlphaPath:
    """One sample path of W_alpha(s) = sqrt(2) B_alpha(s) - |s|^alpha on [-S, S]."""
    if not 0.0 < alpha <= 2.0:
        raise RangeError(f"alpha must lie in (0, 2], got {alpha}")
    rng = stream(seed)
    values, origin, flags = _w_alpha_batch(alpha, S, step, 1, rng)
    return WAlphaPath(step=float(step), origin_index=origin, values=values[0],
                      alpha=float(alpha), seed=int(seed), flags=flags)
