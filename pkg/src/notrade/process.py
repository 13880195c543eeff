"""Signal, return and position simulation with Monte Carlo estimators.

The smoothed signal is the normalised AR(1) recursion

    xs[t] = alpha * xs[t-1] + sqrt(1 - alpha**2) * x[t]

and the position follows the two-state hysteresis rule with thresholds
``+-eta``.  The estimators here are the ground truth that the closed forms
and the survival solver are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonTerminationError, ParameterError
from .gaussian import TAIL_LIMIT, gauss_sf
from .rng import RngStream

ALPHA_MAX = 0.99
SURVIVAL_CAP = 10**8
DEFAULT_BATCHES = 50

# child-stream slots used by gen_path / estimate_K_mc
_X_SLOT, _EPS_SLOT, _INIT_SLOT = 0, 1, 2


@dataclass(frozen=True)
class ModelParams:
    rho: float
    alpha: float
    eta: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if not 0.0 <= self.alpha <= ALPHA_MAX:
            raise ParameterError(f"alpha must lie in [0, {ALPHA_MAX}], got {self.alpha}")
        if not (self.eta >= 0.0 and math.isfinite(self.eta)):
            raise ParameterError(f"eta must be finite and >= 0, got {self.eta}")

    @property
    def burn_in(self) -> int:
        return burn_in_steps(self.alpha)


@dataclass
class SignalPath:
    x: np.ndarray
    x_smooth: np.ndarray
    y: np.ndarray
    w: np.ndarray
    burn_in: int

    def __post_init__(self):
        n = len(self.x)
        if not (len(self.x_smooth) == len(self.y) == len(self.w) == n):
            raise ParameterError("SignalPath arrays must share one length")

    def __len__(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("a Monte Carlo estimate needs n >= 2")

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


def burn_in_steps(alpha: float) -> int:
    return math.ceil(50.0 / (1.0 - alpha))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= ALPHA_MAX:
        raise ParameterError(f"alpha must lie in [0, {ALPHA_MAX}], got {alpha}")


def smooth_path(x: np.ndarray, alpha: float, x_smooth_init: float) -> np.ndarray:
    """Exponentially smooth ``x``.

    ``x_smooth_init`` is the smoothed value one step before ``x[0]``; drawing it
    from N(0, 1) gives a stationary start.
    """
    _check_alpha(alpha)
    return _kernels.ema(np.ascontiguousarray(x, dtype=np.float64), float(alpha),
                        float(x_smooth_init))


def apply_hysteresis(x_smooth: np.ndarray, eta: float, w0: int) -> np.ndarray:
    """Positions in {-1, +1}; ``w0`` is the position held before the first step."""
    if w0 not in (-1, 1):
        raise ParameterError("w0 must be -1 or +1")
    xs = np.ascontiguousarray(x_smooth, dtype=np.float64)
    return _kernels.hysteresis(xs, float(eta), int(w0))


def gen_path(params: ModelParams, T: int, seed: RngStream) -> SignalPath:
    if T < 2:
        raise ParameterError("T must be at least 2")
    x = seed.spawn(_X_SLOT).normals(T)
    eps = seed.spawn(_EPS_SLOT).normals(T)
    z = seed.spawn(_INIT_SLOT).normal()
    xs = smooth_path(x, params.alpha, z)
    # inside the zone the first position leans on the sign of the signal
    w_init = 1 if xs[0] >= 0.0 else -1
    w = apply_hysteresis(xs, params.eta, w_init)
    y = params.rho * x + math.sqrt(1.0 - params.rho**2) * eps
    return SignalPath(x=x, x_smooth=xs, y=y, w=w, burn_in=params.burn_in)


def estimate_K_mc(params: ModelParams, T: int, seed: RngStream, *,
                  n_batches: int = DEFAULT_BATCHES,
                  estimator: str = "wy") -> McEstimate:
    """Time average of w_t * y_t after burn-in, batch-means standard error.

    ``estimator="signal"`` averages ``rho * w_t * x_t`` instead: the same
    expectation with the return noise integrated out, hence far lower variance.
    The path itself is identical to ``gen_path(params, T, seed)``.
    """
    if estimator not in ("wy", "signal"):
        raise ParameterError(f"unknown estimator {estimator!r}")
    if n_batches < 30:
        raise ParameterError("batch means needs at least 30 batches")
    burn = params.burn_in
    if T < 10 * burn:
        raise ParameterError(f"T={T} too small: need at least 10 * burn_in = {10 * burn}")
    if T - burn < n_batches:
        raise ParameterError("fewer post-burn-in steps than batches")
    s, stream = seed.key
    sx = np.uint64(seed.spawn(_X_SLOT).stream_id)
    se = np.uint64(seed.spawn(_EPS_SLOT).stream_id)
    sz = np.uint64(seed.spawn(_INIT_SLOT).stream_id)
    sums, counts = _kernels.correlation_batches(
        s, sx, se, sz, float(params.alpha), float(params.eta), float(params.rho),
        np.int64(T), np.int64(burn), np.int64(n_batches), estimator == "signal")
    means = sums / counts
    n_avg = int(counts.sum())
    return McEstimate(
        mean=float(sums.sum() / n_avg),
        stderr=float(np.std(means, ddof=1) / math.sqrt(n_batches)),
        n=n_avg,
    )


def _check_survival(params: ModelParams) -> float:
    if params.eta > TAIL_LIMIT:
        raise ParameterError(f"eta must be <= {TAIL_LIMIT} for survival sampling")
    return gauss_sf(params.eta)


def sample_survival_time(params: ModelParams, seed: RngStream, *,
                         cap: int = SURVIVAL_CAP) -> int:
    """First t >= 1 with smoothed signal <= -eta, started above +eta.

    Consumes draws from ``seed`` starting at its current position.
    """
    tail = _check_survival(params)
    if seed.position != 0:
        # the compiled sampler addresses draws from index 0 of a stream
        raise ParameterError("sample_survival_time expects a fresh stream")
    s, stream = seed.key
    tau = _kernels.survival_one(s, stream, float(params.alpha), float(params.eta),
                                tail, np.int64(cap))
    if tau == _kernels.STATUS_CAPPED:
        raise NonTerminationError(f"survival path exceeded {cap} steps at {params}")
    return int(tau)


def survival_samples(params: ModelParams, n: int, seed: RngStream, *,
                     cap: int = SURVIVAL_CAP, first: int = 0) -> np.ndarray:
    """Survival times for replicates ``first .. first+n-1`` (replicate i uses seed.spawn(i))."""
    tail = _check_survival(params)
    s, stream = seed.key
    taus = _kernels.survival_many(s, stream, np.int64(first), np.int64(n),
                                  float(params.alpha), float(params.eta), tail,
                                  np.int64(cap))
    if np.any(taus == _kernels.STATUS_CAPPED):
        raise NonTerminationError(f"a survival path exceeded {cap} steps at {params}")
    return taus


def estimate_H_mc(params: ModelParams, n: int, seed: RngStream, *,
                  cap: int = SURVIVAL_CAP, chunk: int = 1 << 16) -> McEstimate:
    if n < 2:
        raise ParameterError("need at least 2 survival samples")
    total = 0.0
    total_sq = 0.0
    # fixed chunk order keeps the floating-point sum reproducible
    for first in range(0, n, chunk):
        taus = survival_samples(params, min(chunk, n - first), seed, cap=cap,
                                first=first).astype(np.float64)
        total += float(taus.sum())
        total_sq += float(np.dot(taus, taus))
    mean = total / n
    var = max(total_sq - n * mean * mean, 0.0) / (n - 1)
    return McEstimate(mean=mean, stderr=math.sqrt(var / n), n=n)


def trade_frequency(path: SignalPath) -> float:
    """Fraction of post-burn-in steps whose position differs from the previous one."""
    if len(path) < path.burn_in + 2:
        raise ParameterError("path shorter than burn_in + 2")
    w = np.asarray(path.w[path.burn_in:], dtype=np.int64)
    return float(np.count_nonzero(np.diff(w)) / (len(w) - 1))
