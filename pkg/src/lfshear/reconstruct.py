"""EPI inpainting by iterative hard thresholding in the shearlet domain.

Each iteration takes a step toward the measured rows, analyzes, hard
thresholds with a linearly decaying level and synthesizes:

    x <- S*( T_lambda( S(x + alpha * (y - H x)) ) )

The step ``alpha`` is either fixed or chosen per iteration as
``|beta|^2 / |H S*(beta)|^2`` with ``beta`` the analysis of the residual
restricted to the current coefficient support.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .shearlet import analyze, build_system, synthesize

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-12
DIVERGENCE_FACTOR = 10.0


class DivergenceError(RuntimeError):
    """Raised when the data residual grows past the divergence guard."""

    def __init__(self, iteration, residual, initial):
        super().__init__(
            f"reconstruction diverged at iteration {iteration}: "
            f"residual {residual:.4g} > {DIVERGENCE_FACTOR:g} x initial {initial:.4g}"
        )
        self.iteration = iteration
        self.residual = residual
        self.initial = initial


@dataclass(frozen=True)
class SamplingMask:
    """Measured EPI rows: every ``step``-th row starting at 0."""

    n_t: int
    step: int
    measured_rows: tuple

    @property
    def rows(self):
        return np.asarray(self.measured_rows, dtype=int)

    def row_weights(self):
        w = np.zeros((self.n_t, 1))
        w[self.rows] = 1.0
        return w

    def apply(self, x):
        """``H x``: zero every unmeasured row."""
        out = np.zeros_like(x)
        out[self.rows] = x[self.rows]
        return out


def build_mask(n_t, d_max, m):
    if m < 2:
        raise ValueError("need at least 2 measured rows")
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    if n_t < (m - 1) * d_max + 1:
        raise ValueError(f"n_t={n_t} cannot hold {m} rows spaced {d_max} apart")
    return SamplingMask(n_t, d_max, tuple(i * d_max for i in range(m)))


@dataclass(frozen=True)
class IterationParams:
    """Solver settings.

    ``lambda_max``/``lambda_min`` of ``None`` are derived at the first
    iteration from the largest coefficient of ``S(x0 + alpha0 * r0)``.
    ``alpha`` is ``"adaptive"`` or a positive number.
    """

    n_iter: int = 100
    lambda_max: float | None = None
    lambda_min: float | None = None
    alpha: object = "adaptive"
    init: str = "lowpass"
    lambda_max_factor: float = 0.05
    lambda_min_ratio: float = 1e-3
    reimpose_every_iter: bool = False
    normalization: str = "clipped"
    support: str = "thresholded"

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.init not in ("zero", "lowpass"):
            raise ValueError("init must be 'zero' or 'lowpass'")
        if self.support not in ("thresholded", "analysis"):
            raise ValueError("support must be 'thresholded' or 'analysis'")
        if self.alpha != "adaptive":
            if not isinstance(self.alpha, (int, float)) or self.alpha <= 0:
                raise ValueError("fixed alpha must be a positive number")
        lo, hi = self.lambda_min, self.lambda_max
        if lo is not None and lo < 0 or hi is not None and hi < 0:
            raise ValueError("thresholds must be non-negative")
        if lo is not None and hi is not None and hi < lo:
            raise ValueError("lambda_max must be >= lambda_min")

    @property
    def adaptive(self):
        return self.alpha == "adaptive"

    def resolved(self, lambda_max, lambda_min):
        return IterationParams(**{**self.__dict__, "lambda_max": lambda_max, "lambda_min": lambda_min})


def parse_alpha(text):
    """Parse ``"adaptive"`` or ``"fixed:A"``."""
    if text == "adaptive":
        return "adaptive"
    if text.startswith("fixed:"):
        return float(text.split(":", 1)[1])
    raise ValueError(f"alpha must be 'adaptive' or 'fixed:A', got {text!r}")


def hard_threshold(coeffs, lam):
    """Zero every coefficient with ``|c| < lam``; ``|c| == lam`` is kept."""
    if lam < 0:
        raise ValueError("threshold must be non-negative")
    coeffs = np.asarray(coeffs)
    return np.where(np.abs(coeffs) >= lam, coeffs, 0.0)


def lambda_schedule(params, n):
    """Threshold at iteration ``n``: linear from lambda_max down to lambda_min."""
    if not 0 <= n < params.n_iter:
        raise ValueError(f"iteration {n} outside [0, {params.n_iter})")
    if params.lambda_max is None or params.lambda_min is None:
        raise ValueError("thresholds unresolved; set lambda_max and lambda_min")
    if params.n_iter == 1:
        return params.lambda_max
    frac = n / (params.n_iter - 1)
    return params.lambda_max + (params.lambda_min - params.lambda_max) * frac


def _support(coeffs):
    peak = np.abs(coeffs).max()
    if peak == 0:
        return None
    sup = np.abs(coeffs) > SUPPORT_TOL * peak
    return sup if sup.any() else None


def adaptive_alpha(x_n, y, mask, system, coeffs_x=None):
    """Normalized step ``|beta|^2 / |H S*(beta)|^2`` on the support of ``S(x_n)``.

    Returns 1.0 when the residual or the denominator vanishes.  An empty
    support (``x_n == 0``) is treated as the full index set.
    """
    residual = y - mask.apply(x_n)
    if not np.any(residual):
        return 1.0
    beta = analyze(system, residual)
    if coeffs_x is None:
        coeffs_x = analyze(system, x_n)
    sup = _support(coeffs_x)
    if sup is not None:
        beta = np.where(sup, beta, 0.0)
    num = float(np.sum(beta ** 2))
    den = float(np.sum(mask.apply(synthesize(system, beta)) ** 2))
    if den == 0.0 or num == 0.0:
        return 1.0
    return num / den


def lowpass_estimate(y, mask, system):
    """Initial estimate: ``y`` low-passed by ``h_J x h_J``, normalized by the
    low-passed mask so unmeasured rows are not darkened."""
    lp = system.lowpass[:, : system.n_v // 2 + 1]
    num = sfft.irfft2(sfft.rfft2(y) * lp, s=system.shape)
    weight = np.broadcast_to(mask.row_weights(), y.shape)
    den = sfft.irfft2(sfft.rfft2(weight) * lp, s=system.shape)
    return num / np.maximum(den, 1e-3)


def reconstruct_epi(y, mask, system, params=None, observer=None, x0=None):
    """Fill the unmeasured rows of ``y``.

    ``observer(n, lam, alpha, residual)`` is called once per iteration with
    the data residual ``|y - H x_{n+1}|``.  Measured rows of the result are
    copied from ``y`` after the last iteration.  ``x0`` overrides the
    initial estimate chosen by ``params.init``.
    """
    params = params or IterationParams()
    y = np.asarray(y, dtype=float)
    system.check_shape(y)
    if mask.n_t != y.shape[0]:
        raise ValueError(f"mask covers {mask.n_t} rows, EPI has {y.shape[0]}")
    rows = mask.rows
    y = mask.apply(y)

    if x0 is not None:
        x = np.array(x0, dtype=float)
        system.check_shape(x, "initial estimate")
    elif params.init == "lowpass" and np.any(y):
        x = lowpass_estimate(y, mask, system)
    else:
        x = np.zeros_like(y)
    initial = float(np.linalg.norm(y - mask.apply(x)))
    guard = DIVERGENCE_FACTOR * max(initial, np.linalg.norm(y) * 1e-12)

    lam_max, lam_min = params.lambda_max, params.lambda_min
    kept = None
    for n in range(params.n_iter):
        residual = y - mask.apply(x)
        if params.adaptive:
            sup = kept if params.support == "thresholded" else None
            alpha = adaptive_alpha(x, y, mask, system, coeffs_x=sup)
        else:
            alpha = float(params.alpha)
        coeffs = analyze(system, x + alpha * residual)
        if lam_max is None or lam_min is None:
            peak = float(np.abs(coeffs).max())
            if lam_max is None:
                lam_max = params.lambda_max_factor * peak
            if lam_min is None:
                lam_min = min(params.lambda_min_ratio * lam_max, lam_max)
            params = params.resolved(lam_max, lam_min)
        lam = lambda_schedule(params, n)
        kept = hard_threshold(coeffs, lam)
        x = synthesize(system, kept)
        if params.reimpose_every_iter:
            x[rows] = y[rows]
        res = float(np.linalg.norm(y - mask.apply(x)))
        if observer is not None:
            observer(n, lam, alpha, res)
        if not math.isfinite(res) or res > guard:
            raise DivergenceError(n, res, initial)
    x[rows] = y[rows]
    return x


def log_observer(logger=log, level=logging.INFO):
    """Observer emitting ``iter=<n> lambda=<f> alpha=<f> residual=<f>`` lines."""

    def _emit(n, lam, alpha, residual):
        logger.log(level, "iter=%d lambda=%.6g alpha=%.6g residual=%.6g", n, lam, alpha, residual)

    return _emit


def transform_rows(n_rows, scales):
    """Smallest multiple of ``2**scales`` holding ``n_rows``."""
    q = 2 ** scales
    return -(-n_rows // q) * q


def scales_for(d_max):
    """Number of scales for a maximal disparity: ``ceil(log2 d_max)``, at least 1."""
    return max(1, math.ceil(math.log2(d_max))) if d_max > 1 else 1


def reconstruct_views(rows, d_max, params=None, system=None, observer=None):
    """Densify one EPI given its measured scanlines.

    ``rows`` is an ``m x n_v`` array, one scanline per input view.  Output
    has ``(m - 1) * d_max + 1`` rows with row ``i * d_max`` equal to input
    row ``i``.  The t-axis is padded to a multiple of ``2**J`` with
    unmeasured rows that start out as copies of the last view, then cropped.
    """
    params = params or IterationParams()
    rows = np.asarray(rows, dtype=float)
    m, n_v = rows.shape
    n_out = (m - 1) * d_max + 1
    if d_max == 1:
        return rows.copy()
    scales = scales_for(d_max)
    n_t = transform_rows(n_out, scales)
    if system is None:
        system = build_system(n_t, n_v, scales, normalization=params.normalization)
    mask = build_mask(n_t, d_max, m)
    y = np.zeros((n_t, n_v))
    y[mask.rows] = rows
    x0 = None
    if params.init == "lowpass" and n_t > n_out:
        x0 = lowpass_estimate(y, mask, system)
        x0[n_out:] = rows[-1]
    x = reconstruct_epi(y, mask, system, params, observer, x0=x0)
    return x[:n_out]
