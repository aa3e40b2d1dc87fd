"""Light-field container, EPI slicing, reconstruction drivers and refocusing.

Views are stored as ``views[s, t, y, x, c]``: ``(s, t)`` is the camera grid
position (row, column), ``(y, x)`` the pixel and ``c`` the color plane.  A
horizontal EPI fixes ``(s, y, c)`` and has rows ``t`` and columns ``x``; a
vertical EPI fixes ``(t, x, c)`` and has rows ``s`` and columns ``y``.

Scene points are assumed to move toward larger pixel coordinates as the
grid index grows.  Data with the opposite convention is mirrored before
reconstruction (see ``disparity_sign``).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .reconstruct import (
    IterationParams,
    build_mask,
    lowpass_estimate,
    reconstruct_epi,
    scales_for,
    transform_rows,
)
from .shearlet import build_system

log = logging.getLogger(__name__)

LAYOUTS = {"RGB": 3, "Y": 1, "YUV": 3, "GRAY": 1}


@dataclass(frozen=True)
class CameraGeometry:
    """Pinhole rig: focal length, depth range, pixel pitch and camera step."""

    focal: float
    z_min: float
    z_max: float = math.inf
    delta_v: float = 1.0
    delta_t: float = 1.0

    def __post_init__(self):
        if not 0 < self.z_min <= self.z_max:
            raise ValueError("need 0 < z_min <= z_max")
        if min(self.focal, self.delta_v, self.delta_t) <= 0:
            raise ValueError("focal, delta_v and delta_t must be positive")


def camera_step_bound(geom):
    """Largest camera step keeping adjacent-view disparity within 1 px."""
    return geom.z_min / geom.focal * geom.delta_v


def disparity(geom, z):
    """Disparity in pixels between adjacent views for a point at depth ``z``."""
    if z <= 0:
        raise ValueError("depth must be positive")
    if math.isinf(z):
        return 0.0
    return geom.focal / z * geom.delta_t / geom.delta_v


@dataclass(eq=False)
class LightField:
    """Grid of views sharing size and channel layout."""

    views: np.ndarray
    channel_layout: str = "RGB"
    bit_depth: int = 8
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.views)
        if v.ndim == 4:
            v = v[..., None]
        if v.ndim != 5:
            raise ValueError("views must be indexed [s, t, y, x(, c)]")
        if self.channel_layout not in LAYOUTS:
            raise ValueError(f"unknown channel layout {self.channel_layout!r}")
        if v.shape[-1] != LAYOUTS[self.channel_layout]:
            raise ValueError(
                f"layout {self.channel_layout} needs {LAYOUTS[self.channel_layout]} planes, got {v.shape[-1]}"
            )
        if not 1 <= self.bit_depth <= 16:
            raise ValueError("bit_depth must be in 1..16")
        self.views = v

    @property
    def grid(self):
        return self.views.shape[:2]

    @property
    def n_views(self):
        return self.grid[0] * self.grid[1]

    @property
    def image_shape(self):
        return self.views.shape[2:4]

    @property
    def n_channels(self):
        return self.views.shape[4]

    @property
    def peak(self):
        return float(2 ** self.bit_depth - 1)

    def view(self, s, t):
        return self.views[s, t]

    def with_views(self, views, **meta):
        return LightField(views, self.channel_layout, self.bit_depth, {**self.meta, **meta})


def extract_epi(lf, s_index, u, channel):
    """Horizontal EPI: row ``i`` is scanline ``u`` of view ``(s_index, i)``."""
    n_s, n_t = lf.grid
    h = lf.image_shape[0]
    if not (0 <= s_index < n_s and 0 <= u < h and 0 <= channel < lf.n_channels):
        raise IndexError(f"EPI index (s={s_index}, u={u}, c={channel}) out of range")
    return np.array(lf.views[s_index, :, u, :, channel], dtype=float)


def insert_epi(lf, epi, s_index, u, channel):
    """Write an EPI back into ``lf`` in place (inverse of :func:`extract_epi`)."""
    n_s, n_t = lf.grid
    if not (0 <= s_index < n_s and 0 <= u < lf.image_shape[0] and 0 <= channel < lf.n_channels):
        raise IndexError(f"EPI index (s={s_index}, u={u}, c={channel}) out of range")
    epi = np.asarray(epi)
    if epi.shape != (n_t, lf.image_shape[1]):
        raise ValueError(f"EPI shape {epi.shape} does not match {(n_t, lf.image_shape[1])}")
    lf.views[s_index, :, u, :, channel] = epi


def estimate_disparity_sign(rows):
    """+1 if content moves to larger pixel indices along the view axis, else -1.

    Compares the circular cross-correlation peak of adjacent input rows
    (stacked over all EPIs given, shape ``[..., m, width]``).
    """
    rows = np.asarray(rows, dtype=float)
    a = rows[..., :-1, :] - rows[..., :-1, :].mean(axis=-1, keepdims=True)
    b = rows[..., 1:, :] - rows[..., 1:, :].mean(axis=-1, keepdims=True)
    xc = np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n=rows.shape[-1])
    xc = xc.reshape(-1, rows.shape[-1]).sum(axis=0)
    n = xc.size
    lag = int(np.argmax(xc))
    lag = lag if lag <= n // 2 else lag - n
    return -1 if lag < 0 else 1


class EPIReconstructionError(RuntimeError):
    def __init__(self, where, cause):
        super().__init__(f"EPI {where}: {cause}")
        self.where = where
        self.__cause__ = cause


class _SystemPool:
    """Shared, lazily built systems keyed by grid and scale count."""

    def __init__(self, normalization, systems=None):
        self.normalization = normalization
        self._cache = dict(systems or {})

    def get(self, n_t, n_v, scales):
        key = (n_t, n_v, scales)
        if key not in self._cache:
            self._cache[key] = build_system(n_t, n_v, scales, normalization=self.normalization)
        return self._cache[key]


def _densify_rows(rows, step, scales, params, pool, sign, observer=None):
    """Reconstruct one EPI from its measured rows (``m x width``)."""
    m, width = rows.shape
    n_out = (m - 1) * step + 1
    n_t = transform_rows(n_out, scales)
    system = pool.get(n_t, width, scales)
    mask = build_mask(n_t, step, m)
    y = np.zeros((n_t, width))
    y[mask.rows] = rows[:, ::sign]
    x0 = None
    if params.init == "lowpass" and n_t > n_out:
        # padding rows start as copies of the last view
        x0 = lowpass_estimate(y, mask, system)
        x0[n_out:] = y[mask.rows[-1]]
    x = reconstruct_epi(y, mask, system, params, observer, x0=x0)
    return x[:n_out, ::sign]


def _channel_d_max(d_max, n_channels):
    if np.ndim(d_max) == 0:
        d = [int(math.ceil(d_max))] * n_channels
    else:
        d = [int(math.ceil(v)) for v in d_max]
        if len(d) != n_channels:
            raise ValueError(f"need one d_max per channel ({n_channels}), got {len(d)}")
    if min(d) < 1:
        raise ValueError("d_max must be >= 1")
    return d


def _view_step(d_max, n_channels, step):
    d = _channel_d_max(d_max, n_channels)
    if step is None:
        return d, max(d)
    if step < max(d):
        raise ValueError(f"view step {step} is below the largest d_max {max(d)}")
    return d, int(step)


def _densify_axis(views, axis, d_max, params, pool, sign, workers, observer, step=None):
    """Densify ``views[s, t, y, x, c]`` along grid axis 0 (s) or 1 (t)."""
    _, step = _view_step(d_max, views.shape[4], step)
    # the transform depth follows the gap between measured rows, not the
    # channel's own disparity: fewer scales than log2(step) leave the gap
    # unresolved and the iteration blows up
    scales = scales_for(step)
    if axis == 0:
        # vertical EPIs: rows s, columns y -> move to the horizontal layout
        work = views.transpose(1, 0, 3, 2, 4)
    else:
        work = views
    n_a, m, h, w, nc = work.shape
    n_out = (m - 1) * step + 1
    out = np.empty((n_a, n_out, h, w, nc))
    if step == 1:
        out[:] = work
    else:
        if sign is None:
            sign = estimate_disparity_sign(work.transpose(0, 2, 4, 1, 3).reshape(-1, m, w))
        jobs = [(a, r, c) for a in range(n_a) for r in range(h) for c in range(nc)]

        def run(job):
            a, r, c = job
            try:
                obs = observer(job) if observer else None
                return _densify_rows(
                    np.asarray(work[a, :, r, :, c], dtype=float), step,
                    scales, params, pool, sign, obs,
                )
            except Exception as exc:  # attach EPI coordinates
                raise EPIReconstructionError((axis, a, r, c), exc) from exc

        # warm the shared systems so worker threads never build concurrently
        pool.get(transform_rows(n_out, scales), w, scales)
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                results = list(ex.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        for (a, r, c), epi in zip(jobs, results):
            out[a, :, r, :, c] = epi
        # input views are copied back untouched
        out[:, ::step] = work
    if axis == 0:
        out = out.transpose(1, 0, 3, 2, 4)
    return out


def reconstruct_hpo(lf_coarse, d_max, params=None, *, step=None, sign=None, workers=None,
                    observer=None, systems=None):
    """Densify a horizontal-parallax light field (one camera row).

    Output has ``(m - 1) * step + 1`` views, ``step`` defaulting to
    ``max(d_max)``; input view ``i`` lands at output index ``i * step``.
    ``d_max`` may be a per-channel sequence; each channel then uses
    ``ceil(log2 d_max_c)`` scales at the shared view step.  ``sign`` fixes
    the disparity direction (``None`` estimates it).  ``observer(where)``
    returns the per-iteration callback for the EPI at ``where``.
    """
    params = params or IterationParams()
    n_s, m = lf_coarse.grid
    if n_s != 1:
        raise ValueError("reconstruct_hpo expects a single camera row")
    if m < 2:
        raise ValueError("need at least 2 input views")
    pool = _SystemPool(params.normalization, systems)
    out = _densify_axis(lf_coarse.views, 1, d_max, params, pool, sign, workers, observer, step)
    return lf_coarse.with_views(_restore_dtype(out, lf_coarse), d_max=d_max)


def reconstruct_full_parallax(lf_coarse, d_max_h, d_max_v, params=None, *, step=None, sign=None,
                              workers=None, observer=None, systems=None):
    """Densify every camera row horizontally, then every resulting column vertically."""
    params = params or IterationParams()
    n_s, n_t = lf_coarse.grid
    if n_s < 2 or n_t < 2:
        raise ValueError("full-parallax reconstruction needs at least a 2x2 grid")
    pool = _SystemPool(params.normalization, systems)
    sh = sv = sign
    if isinstance(sign, tuple):
        sh, sv = sign
    st_h = st_v = step
    if isinstance(step, tuple):
        st_h, st_v = step
    nc = lf_coarse.n_channels
    _, step_h = _view_step(d_max_h, nc, st_h)
    _, step_v = _view_step(d_max_v, nc, st_v)
    mid = _densify_axis(lf_coarse.views, 1, d_max_h, params, pool, sh, workers, observer, step_h)
    out = _densify_axis(mid, 0, d_max_v, params, pool, sv, workers, observer, step_v)
    out[::step_v, ::step_h] = lf_coarse.views
    return lf_coarse.with_views(_restore_dtype(out, lf_coarse), d_max=(d_max_h, d_max_v))


def _restore_dtype(out, lf):
    # keep float results; only the exact input views must survive bit-identically
    if np.issubdtype(lf.views.dtype, np.floating):
        return out.astype(lf.views.dtype, copy=False)
    return out


def refocus(lf, slope):
    """Shift-and-add refocus at ``slope`` pixels per view, bilinear shifts.

    View ``(s, t)`` is resampled at ``(y + slope*(s - sc), x + slope*(t - tc))``
    around the grid center ``(sc, tc)`` and all views are averaged.
    """
    n_s, n_t = lf.grid
    sc, tc = (n_s - 1) / 2.0, (n_t - 1) / 2.0
    acc = np.zeros(lf.views.shape[2:], dtype=float)
    for s in range(n_s):
        for t in range(n_t):
            shift = (-slope * (s - sc), -slope * (t - tc), 0.0)
            acc += ndimage.shift(np.asarray(lf.views[s, t], dtype=float), shift,
                                 order=1, mode="constant", cval=0.0, prefilter=False)
    return acc / (n_s * n_t)


def psnr(a, b, peak=1.0):
    """PSNR in dB; ``inf`` when the images are identical."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)
