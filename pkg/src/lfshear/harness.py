"""Evaluation harness: leave-N-out runs, PSNR reports, difference maps and
the synthetic line-EPI generator used as ground truth in tests."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .lightfield import LightField, psnr, reconstruct_full_parallax, reconstruct_hpo
from .reconstruct import IterationParams, scales_for

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class EvalReport:
    dataset: str
    per_view: list
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    psnr_mode: str = "rgb"

    @property
    def trivial(self):
        return not self.per_view

    @property
    def mean_psnr(self):
        vals = [p for _, p in self.per_view if math.isfinite(p)]
        if not vals:
            return math.inf if self.per_view else math.nan
        return sum(vals) / len(vals)

    def to_dict(self):
        d = asdict(self)
        d["mean_psnr"] = self.mean_psnr
        d["trivial"] = self.trivial
        return d


def view_psnr(a, b, peak, mode="rgb"):
    """PSNR of one view: per channel then averaged (``rgb``) or on luma only."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if mode == "luma":
        if a.shape[-1] == 3:
            a, b = a @ _LUMA, b @ _LUMA
        return psnr(a, b, peak)
    if mode != "rgb":
        raise ValueError("psnr mode must be 'rgb' or 'luma'")
    if a.ndim == 3:
        vals = [psnr(a[..., c], b[..., c], peak) for c in range(a.shape[-1])]
        if any(math.isinf(v) for v in vals):
            finite = [v for v in vals if math.isfinite(v)]
            return sum(finite) / len(finite) if finite else math.inf
        return sum(vals) / len(vals)
    return psnr(a, b, peak)


def _kept_span(n_views, n):
    # last kept index; views beyond it would need extrapolation
    return ((n_views - 1) // n) * n


def leave_n_out(lf_full, n, params=None, view_disparity=1, *, psnr_mode="rgb",
                sign=None, workers=None, observer=None, keep_outputs=False):
    """Keep every ``n``-th view, reconstruct the rest, score the held-out views.

    Reconstruction runs at ``d_max = n * ceil(view_disparity)`` and the dense
    result is sampled every ``ceil(view_disparity)`` views, which lands
    exactly on the original grid.  Views past the last kept one are not
    scored.  One camera row runs the horizontal driver, a grid runs the
    full-parallax driver with the same ``n`` on both axes.
    """
    params = params or IterationParams()
    if n < 1:
        raise ValueError("n must be >= 1")
    n_s, n_t = lf_full.grid
    name = lf_full.meta.get("name", "lightfield")
    if n == 1:
        return EvalReport(name, [], {"n": 1}, 0.0, psnr_mode)
    per_view_disp = [int(math.ceil(d)) for d in np.atleast_1d(view_disparity)]
    step_d = max(per_view_disp)
    d_max = [n * d for d in per_view_disp]
    if len(d_max) == 1:
        d_max = d_max[0]
    span_t = _kept_span(n_t, n)
    if span_t == 0:
        raise ValueError(f"keeping every {n}-th of {n_t} views leaves fewer than 2")
    full_parallax = n_s > 1
    if full_parallax:
        span_s = _kept_span(n_s, n)
        if span_s == 0:
            raise ValueError(f"keeping every {n}-th of {n_s} rows leaves fewer than 2")
        coarse = lf_full.with_views(lf_full.views[:span_s + 1:n, :span_t + 1:n])
    else:
        span_s = 0
        coarse = lf_full.with_views(lf_full.views[:, :span_t + 1:n])

    t0 = time.perf_counter()
    if full_parallax:
        dense = reconstruct_full_parallax(coarse, d_max, d_max, params, sign=sign,
                                          workers=workers, observer=observer)
        out = dense.views[::step_d, ::step_d]
    else:
        dense = reconstruct_hpo(coarse, d_max, params, sign=sign, workers=workers,
                                observer=observer)
        out = dense.views[:, ::step_d]
    wall = time.perf_counter() - t0

    per_view = []
    for s in range(span_s + 1):
        for t in range(span_t + 1):
            if s % n == 0 and t % n == 0:
                continue
            idx = s * n_t + t
            per_view.append((idx, view_psnr(out[s, t], lf_full.views[s, t], lf_full.peak, psnr_mode)))
    config = {
        "n": n,
        "d_max": d_max,
        "view_disparity": per_view_disp,
        "scales": scales_for(max(np.atleast_1d(d_max))),
        "full_parallax": full_parallax,
        "params": {k: v for k, v in asdict(params).items()},
    }
    report = EvalReport(name, per_view, config, wall, psnr_mode)
    if keep_outputs:
        report.outputs = out
    return report


def write_report_csv(report, path):
    """``view_index,psnr_db`` rows followed by ``mean,<value>``; config goes
    to a JSON sidecar next to the CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["view_index", "psnr_db"])
        for idx, p in report.per_view:
            w.writerow([idx, repr(float(p))])
        w.writerow(["mean", repr(float(report.mean_psnr))])
    side = path.with_suffix(".json")
    side.write_text(json.dumps(report.to_dict(), indent=2, default=str))
    return path


def read_report_csv(path):
    """Parse a report CSV into ``(rows, mean)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["view_index", "psnr_db"]:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    if rows[-1][0] != "mean":
        raise ValueError(f"{path}: missing mean line")
    return [(int(i), float(p)) for i, p in rows[1:-1]], float(rows[-1][1])


def diff_map(a, b, gain, bit_depth=8):
    """``clamp(gain * |a - b|)`` as integers at ``bit_depth``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    peak = 2 ** bit_depth - 1
    out = np.clip(np.rint(gain * np.abs(a - b)), 0, peak)
    return out.astype(np.uint16 if bit_depth > 8 else np.uint8)


# ---------------------------------------------------------------- synthetic scenes

@dataclass(frozen=True)
class Line:
    position: float
    disparity: float
    intensity: float
    width: float = 4.0


def random_lines(n, width, d_max, seed, min_width=2.0, max_width=8.0):
    """``n`` random lines with disparities in ``[0, d_max]``."""
    rng = np.random.default_rng(seed)
    return [
        Line(rng.uniform(0, width), rng.uniform(0, d_max), rng.uniform(0.05, 0.95),
             rng.uniform(min_width, max_width))
        for _ in range(n)
    ]


def make_synthetic_epi(width, height, lines, d_max=16, texture_seed=None,
                       background=0.5, texture=0.1, supersample=8):
    """Dense Lambertian EPI of constant-intensity lines.

    A line at disparity ``d`` (pixels per ``d_max`` dense rows) covers
    ``[p + (d / d_max) * t, p + (d / d_max) * t + width)`` in row ``t``,
    with circular wrap along v and box-filtered edges.  Larger disparity
    means nearer, so such lines are drawn over smaller ones.  With
    ``texture_seed`` the background carries a smooth static texture.
    """
    lines = [ln if isinstance(ln, Line) else Line(*ln) for ln in lines]
    for ln in lines:
        if not 0 <= ln.disparity <= d_max:
            raise ValueError(f"disparity {ln.disparity} outside [0, {d_max}]")
        if ln.width <= 0:
            raise ValueError("line width must be positive")
    t = np.arange(height)[:, None]
    v = np.arange(width)[None, :]
    epi = np.full((height, width), float(background))
    if texture_seed is not None:
        rng = np.random.default_rng(texture_seed)
        tex = rng.normal(size=width)
        k = np.exp(-0.5 * (np.arange(-20, 21) / 6.0) ** 2)
        tex = np.real(np.fft.ifft(np.fft.fft(tex) * np.fft.fft(k / k.sum(), width)))
        epi = epi + texture * tex[None, :] / np.abs(tex).max()
    offsets = (np.arange(supersample) + 0.5) / supersample
    for ln in sorted(lines, key=lambda l: l.disparity):
        slope = ln.disparity / d_max
        cov = np.zeros((height, width))
        for o in offsets:
            x = np.mod(v + o - slope * t - ln.position, width)
            cov += x < ln.width
        cov /= supersample
        epi = cov * ln.intensity + (1.0 - cov) * epi
    desc = {
        "width": width, "height": height, "d_max": d_max, "texture_seed": texture_seed,
        "background": background, "lines": [asdict(ln) for ln in lines],
    }
    return epi, desc


def parse_line_spec(spec):
    """``"pos:disp:intensity[:width],..."`` or ``"random:N[:seed]"``."""
    spec = spec.strip()
    if spec.startswith("random:"):
        parts = spec.split(":")
        n = int(parts[1])
        seed = int(parts[2]) if len(parts) > 2 else 0
        return ("random", n, seed)
    lines = []
    for item in filter(None, spec.split(",")):
        vals = [float(x) for x in item.split(":")]
        if len(vals) not in (3, 4):
            raise ValueError(f"line spec {item!r} needs pos:disp:intensity[:width]")
        lines.append(Line(*vals))
    if not lines:
        raise ValueError("empty line spec")
    return lines


def synthetic_lightfield(epi, step=1):
    """Wrap a dense EPI as a one-row, one-pixel-high 8-bit grayscale light
    field, keeping every ``step``-th row as a view.  Intensities in ``[0, 1]``
    are scaled to ``[0, 255]`` so the container's peak applies."""
    views = 255.0 * np.asarray(epi, dtype=float)[::step, None, :, None]
    return LightField(views[None], "Y", 8, {"name": "synthetic"})
