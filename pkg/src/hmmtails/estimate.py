"""Tail-index and tail-constant estimators on stationary samples.

Windows are taken on ``|R|`` so the positive and negative tails of one sample
(and all per-state subsets) are measured on the same t-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateOrderStats, NoSamples, ThinTail

DEFAULT_QUANTILES = (0.99, 0.9999)
GRID_SIZE = 16
MIN_EXCEEDANCES = 100
HILL_K_CAP = 100_000


def _filtered(values, states=None, state=None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if state is not None:
        if states is None:
            raise ValueError("state filter given without state labels")
        values = values[np.asarray(states) == state]
    if values.size == 0:
        raise NoSamples("no samples left after filtering")
    return values


def empirical_tail(values, t: float, sign: int = 1, states=None, state=None) -> float:
    """Fraction of (filtered) samples with ``sign * R > t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = _filtered(values, states, state)
    return float(np.count_nonzero(sign * x > t)) / x.size


@dataclass(frozen=True)
class HillEstimate:
    alpha_hat: float
    std_err: float
    k: int


def default_hill_k(n_positive: int) -> int:
    return int(min(math.floor(n_positive ** (2.0 / 3.0)), HILL_K_CAP, n_positive - 1))


def hill(values, k: int | None = None) -> HillEstimate:
    """Hill estimator on the positive samples: ``k / sum_j log(R_(j) / R_(k+1))``."""
    x = np.asarray(values, dtype=float)
    x = x[x > 0]
    if k is None:
        k = default_hill_k(x.size)
    if k < 2 or k >= x.size:
        raise ValueError(f"need 2 <= k < number of positive samples ({x.size}), got k={k}")
    top = -np.partition(-x, k)[: k + 1]
    top.sort()
    top = top[::-1]
    denom = float(np.sum(np.log(top[:k] / top[k])))
    if not denom > 0:
        raise DegenerateOrderStats("top order statistics are tied")
    alpha_hat = k / denom
    return HillEstimate(alpha_hat, alpha_hat / math.sqrt(k), k)


def quantile_window(values, quantiles=DEFAULT_QUANTILES) -> tuple[float, float]:
    a = np.abs(np.asarray(values, dtype=float))
    lo, hi = np.quantile(a, quantiles)
    return float(lo), float(hi)


@dataclass(frozen=True)
class KHat:
    value: float
    std_err: float
    spread: float
    n: int
    exceedances: int


def _grid(t_window, size=GRID_SIZE) -> np.ndarray:
    t_lo, t_hi = t_window
    if not (0 < t_lo < t_hi):
        raise ThinTail(f"window {t_window} is empty; the sample has no spread in its tail")
    return np.geomspace(t_lo, t_hi, size)


def _window_weights(x: np.ndarray, grid: np.ndarray, alpha: float) -> np.ndarray:
    """Per-sample ``mean_g t_g^alpha 1{x > t_g}``; its mean is the grid average of t^alpha P(R > t)."""
    cum = np.concatenate(([0.0], np.cumsum(grid ** alpha)))
    return cum[np.searchsorted(grid, x, side="left")] / grid.size


def _k_hat(x: np.ndarray, alpha: float, grid: np.ndarray, sign: int) -> KHat:
    exceed = int(np.count_nonzero(np.abs(x) > grid[0]))
    if exceed < MIN_EXCEEDANCES:
        raise ThinTail(f"only {exceed} exceedances of |R| at t_lo={grid[0]:.4g}")
    f = _window_weights(sign * x, grid, alpha)
    sorted_x = np.sort(sign * x)
    per_t = grid ** alpha * (x.size - np.searchsorted(sorted_x, grid, side="right")) / x.size
    mean = float(f.mean())
    spread = float((per_t.max() - per_t.min()) / mean) if mean > 0 else 0.0
    return KHat(mean, float(f.std(ddof=1) / math.sqrt(x.size)), spread, x.size, exceed)


def k_constant_estimate(values, alpha: float, t_window=None, sign: int = 1, states=None,
                        per_state: bool = False, quantiles=DEFAULT_QUANTILES,
                        grid_size: int = GRID_SIZE) -> dict:
    """Window-averaged ``t^alpha P(sign * R > t)``.

    Returns ``{"all": KHat}`` or, with ``per_state``, one entry per state label.
    The default window is a pair of quantiles of ``|R|`` over the whole sample.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    values = np.asarray(values, dtype=float)
    if t_window is None:
        t_window = quantile_window(values, quantiles)
    grid = _grid(t_window, grid_size)
    if not per_state:
        return {"all": _k_hat(_filtered(values), alpha, grid, sign)}
    if states is None:
        raise ValueError("per_state needs state labels")
    states = np.asarray(states)
    return {s.item() if hasattr(s, "item") else s: _k_hat(values[states == s], alpha, grid, sign)
            for s in np.unique(states)}


@dataclass(frozen=True)
class SymmetryCheck:
    k_plus: float
    k_minus: float
    z: float
    std_err: float


def symmetry_check(values, alpha: float, t_window=None, quantiles=DEFAULT_QUANTILES,
                   grid_size: int = GRID_SIZE) -> SymmetryCheck:
    """Compare the two signed constants; z uses the per-sample variance of their difference."""
    x = _filtered(values)
    if t_window is None:
        t_window = quantile_window(x, quantiles)
    grid = _grid(t_window, grid_size)
    exceed = int(np.count_nonzero(np.abs(x) > grid[0]))
    if exceed < MIN_EXCEEDANCES:
        raise ThinTail(f"only {exceed} exceedances of |R| at t_lo={grid[0]:.4g}")
    fp = _window_weights(x, grid, alpha)
    fm = _window_weights(-x, grid, alpha)
    diff = fp - fm
    se = float(diff.std(ddof=1) / math.sqrt(x.size))
    z = float(diff.mean() / se) if se > 0 else 0.0
    return SymmetryCheck(float(fp.mean()), float(fm.mean()), z, se)


@dataclass
class TailEstimate:
    alpha_hat: float
    alpha_std_err: float
    k_used: int
    K_hat: dict = field(default_factory=dict)      # (state, sign) -> KHat
    t_window: tuple = (math.nan, math.nan)
    n_samples: int = 0
    alpha_used: float = math.nan


def tail_estimate(values, states=None, alpha: float | None = None, quantiles=DEFAULT_QUANTILES,
                  per_state: bool = False, k: int | None = None) -> TailEstimate:
    """Hill index plus signed constants; ``alpha=None`` plugs the Hill estimate into the constants."""
    values = np.asarray(values, dtype=float)
    h = hill(values, k)
    alpha_used = h.alpha_hat if alpha is None else alpha
    window = quantile_window(values, quantiles)
    K_hat = {}
    for sign in (1, -1):
        for key, est in k_constant_estimate(values, alpha_used, window, sign, states, per_state).items():
            K_hat[(key, sign)] = est
    return TailEstimate(h.alpha_hat, h.std_err, h.k, K_hat, window, values.size, alpha_used)
