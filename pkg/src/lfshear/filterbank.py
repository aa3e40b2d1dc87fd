"""1D scaling/wavelet cascades and the 2D directional fan filter.

Everything downstream is evaluated on DFT grids, so each filter can report
its frequency response at arbitrary normalized frequencies.  Spatial taps
are kept for symmetry checks and for the product-formula tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

# CDF 9/7 biorthogonal pair, unit-DC normalization (sum(h) = 1).
_CDF97_LOW9 = np.array([
    0.026748757410810, -0.016864118442875, -0.078223266528990,
    0.266864118442875, 0.602949018236360, 0.266864118442875,
    -0.078223266528990, -0.016864118442875, 0.026748757410810,
])
_CDF97_LOW7 = np.array([
    -0.045635881557125, -0.028771763114250, 0.295635881557125,
    0.557543526228500, 0.295635881557125, -0.028771763114250,
    -0.045635881557125,
])


def _centered_index(n_taps):
    return np.arange(n_taps) - (n_taps - 1) // 2


def dtft(taps, xi):
    """Frequency response of a centered 1D filter at angular frequencies `xi`."""
    taps = np.asarray(taps, dtype=float)
    n = _centered_index(taps.size)
    xi = np.asarray(xi, dtype=float)
    return np.tensordot(np.exp(-1j * np.multiply.outer(xi, n)), taps, axes=([-1], [0]))


def upsample_taps(taps, factor):
    """Insert ``factor - 1`` zeros between taps (keeps the filter centered)."""
    taps = np.asarray(taps, dtype=float)
    if factor == 1:
        return taps.copy()
    out = np.zeros((taps.size - 1) * factor + 1)
    out[::factor] = taps
    return out


@dataclass(frozen=True)
class FilterPair1D:
    """Base scaling filter ``h`` and wavelet filter ``g``, both centered."""

    h: np.ndarray
    g: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if h.size == 0 or g.size == 0:
            raise ValueError("base filters must be non-empty")
        if h.size % 2 == 0 or g.size % 2 == 0:
            raise ValueError("base filters must have odd length (centered taps)")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            raise ValueError("base filters must be finite")
        if abs(h.sum()) < 1e-12:
            raise ValueError("scaling filter h must have nonzero DC response")
        if abs(g.sum()) > 1e-9:
            raise ValueError("wavelet filter g must have zero DC response")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @classmethod
    def cdf97(cls):
        """CDF 9/7: 9-tap analysis low-pass, high-pass from the 7-tap dual."""
        n7 = _centered_index(_CDF97_LOW7.size)
        g = _CDF97_LOW7 * (-1.0) ** n7
        return cls(_CDF97_LOW9.copy(), g, name="cdf97")

    @classmethod
    def from_lowpass(cls, h, name="qmf"):
        """Pair a symmetric low-pass with its mirror ``g(n) = (-1)^n h(n)``."""
        h = np.asarray(h, dtype=float)
        h = h / h.sum()
        n = _centered_index(h.size)
        return cls(h, h * (-1.0) ** n, name=name)


@dataclass(frozen=True)
class CascadeSet:
    """Iterated filters at one level: ``h_j`` and ``g_j`` (centered taps)."""

    level: int
    h: np.ndarray
    g: np.ndarray


def cascade_filters(base, max_level):
    """Return the cascades ``h_j, g_j`` for ``j = 0..max_level``.

    Spatially, ``h_j = h * h↑2 * ... * h↑2^(j-1)`` and
    ``g_j = (g↑2^(j-1)) * h_(j-1)``; ``h_0`` is the unit impulse.
    ``g_0`` has no meaning and is stored as an empty array.
    """
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    if not isinstance(base, FilterPair1D):
        base = FilterPair1D(*base)
    out = [CascadeSet(0, np.ones(1), np.zeros(0))]
    h_prev = np.ones(1)
    for j in range(1, max_level + 1):
        g_j = np.convolve(upsample_taps(base.g, 2 ** (j - 1)), h_prev)
        h_j = np.convolve(upsample_taps(base.h, 2 ** (j - 1)), h_prev)
        out.append(CascadeSet(j, h_j, g_j))
        h_prev = h_j
    return out


def cascade_response(base, level, xi, kind="h"):
    """Product-formula response of ``h_level`` or ``g_level`` at ``xi``.

    This path never builds the long cascaded taps, so the grid builders use
    it; the taps from :func:`cascade_filters` must agree with it.
    """
    xi = np.asarray(xi, dtype=float)
    if kind == "h":
        out = np.ones(xi.shape, dtype=complex)
        for k in range(level):
            out = out * dtft(base.h, 2.0 ** k * xi)
        return out
    if kind == "g":
        if level < 1:
            raise ValueError("g cascade starts at level 1")
        return dtft(base.g, 2.0 ** (level - 1) * xi) * cascade_response(base, level - 1, xi, "h")
    raise ValueError(f"unknown cascade kind {kind!r}")


def dft_frequencies(n):
    """Angular frequencies of an ``n``-point DFT, in ``[-pi, pi)``."""
    return 2.0 * np.pi * np.fft.fftfreq(n)


def _maxflat_halfband(x, order):
    # (1-x)^N * sum_k C(N-1+k, k) x^k: equals 1 at x=0, 0 at x=1, 1/2 at x=1/2
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for k in range(order):
        acc = acc + comb(order - 1 + k, k) * x ** k
    return (1.0 - x) ** order * acc


@dataclass(frozen=True)
class FanFilter:
    """Maxflat fan filter passing the horizontal sector ``|xi2| <= |xi1|``.

    Built as a diamond maxflat low-pass (McClellan-transformed 1D maxflat
    half-band) modulated by pi along the first axis.  The response is a real
    trigonometric polynomial with values in [0, 1], equal to 1/2 on the
    diagonals ``|xi2| = |xi1|``.
    """

    order: int = 4
    taps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("fan filter order must be >= 1")
        # degree 2N-1 in each cosine -> (4N-1)^2 taps, recovered exactly from 4N samples
        n = 4 * self.order
        xi = dft_frequencies(n)
        grid = self.response(xi[:, None], xi[None, :])
        taps = np.real(np.fft.fftshift(np.fft.ifft2(grid)))
        c = n // 2
        r = 2 * self.order - 1
        object.__setattr__(self, "taps", taps[c - r:c + r + 1, c - r:c + r + 1].copy())

    def response(self, xi1, xi2):
        t = 0.5 * (np.cos(xi2) - np.cos(xi1))
        return _maxflat_halfband(0.5 * (1.0 - t), self.order)


def fan_response_grid(fan, n1, n2, scale1=1.0, scale2=1.0):
    """Sample ``P(scale1*xi1, scale2*xi2)`` on an ``n1 x n2`` DFT grid.

    Axis 0 carries ``xi1``.  The response is a trigonometric polynomial, so
    scaled arguments outside [-pi, pi) are periodized automatically.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError("grid dimensions must be >= 2")
    if scale1 <= 0 or scale2 <= 0:
        raise ValueError("scale factors must be positive")
    xi1 = dft_frequencies(n1)[:, None] * scale1
    xi2 = dft_frequencies(n2)[None, :] * scale2
    return fan.response(xi1, xi2)
