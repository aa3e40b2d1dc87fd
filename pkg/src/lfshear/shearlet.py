"""EPI-adapted digital shearlet system and its undecimated transform.

One cone, non-negative shears, scaling along the image (v) axis only.  An
EPI grid is indexed ``[t, v]``: axis 0 runs over views, axis 1 over pixels.
A scene point at per-row disparity ``delta`` traces ``v = v0 + delta * t``;
element ``(j, k)`` is tuned to ``delta = k / 2**(j + 1)``.

All element responses are real and even (zero-phase), so correlation and
convolution coincide and every plane is computed with real FFTs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .filterbank import (
    FanFilter,
    FilterPair1D,
    cascade_response,
    dft_frequencies,
    fan_response_grid,
)

log = logging.getLogger(__name__)

LOWPASS = (-1, 0)
NORMALIZATIONS = ("exact", "clipped", "paper")
DEFAULT_FLOOR = 0.3


class SingularFrameError(ValueError):
    """The frame function vanishes somewhere, so no dual exists."""


def element_count(scales):
    """Number of planes: one low-pass plus ``2**(j+1) + 1`` shears per scale."""
    return 1 + sum(2 ** (j + 1) + 1 for j in range(scales))


def element_list(scales):
    out = [LOWPASS]
    for j in range(scales):
        out.extend((j, k) for k in range(2 ** (j + 1) + 1))
    return out


def _row_offsets(n):
    # signed periodic distance of each row from row 0
    r = np.arange(n)
    return np.where(r < (n + 1) // 2, r, r - n)


def _shear_phase(n_t, n_v, k, j):
    """Per-row spectral multiplier along v for a shear by ``k / 2**j``.

    Equivalent to refining v by ``2**j``, ideal low-pass at ``pi / 2**j``,
    shifting row ``t`` by ``k * t`` refined samples, filtering again and
    decimating.  The Nyquist column of an even grid gets ``cos`` because the
    ideal filter splits it evenly between its two aliases.
    """
    s = k / 2.0 ** j
    t = _row_offsets(n_t)[:, None].astype(float)
    xi_v = dft_frequencies(n_v)[None, :]
    phase = np.exp(-1j * xi_v * s * t)
    if n_v % 2 == 0:
        phase[:, n_v // 2] = np.cos(np.pi * s * t[:, 0])
    return phase


def digital_shear(image, k, j, method="fourier"):
    """Shear ``image`` so row ``t`` moves by ``(k / 2**j) * t`` pixels along v.

    ``t`` is the signed periodic row offset from row 0, and all boundaries
    are circular.  For integer shears the result is an exact circular
    row-wise shift.  ``method="refine"`` runs the literal
    upsample/filter/shift/filter/decimate chain; it agrees with the default
    closed form to round-off and exists for cross-checking.
    """
    if j < 0:
        raise ValueError("shear refinement level j must be >= 0")
    image = np.asarray(image, dtype=float)
    n_t, n_v = image.shape
    if method == "fourier":
        spec = np.fft.fft(image, axis=1) * _shear_phase(n_t, n_v, k, j)
        return np.real(np.fft.ifft(spec, axis=1))
    if method != "refine":
        raise ValueError(f"unknown shear method {method!r}")
    q = 2 ** j
    n_f = n_v * q
    up = np.zeros((n_t, n_f))
    up[:, ::q] = image * q
    tau = np.zeros(n_f)
    b = np.abs(np.fft.fftfreq(n_f) * n_f)
    tau[b < n_v / 2] = 1.0
    tau[b == n_v / 2] = np.sqrt(0.5)
    fine = np.real(np.fft.ifft(np.fft.fft(up, axis=1) * tau, axis=1))
    t = _row_offsets(n_t)
    for row in range(n_t):
        fine[row] = np.roll(fine[row], k * t[row])
    fine = np.real(np.fft.ifft(np.fft.fft(fine, axis=1) * tau, axis=1))
    return fine[:, ::q]


def _shear_grid(freq, k, j):
    """Apply :func:`digital_shear` to a filter given by its real spectrum."""
    n_t, n_v = freq.shape
    rows = np.fft.ifft(freq, axis=0)
    out = np.fft.fft(rows * _shear_phase(n_t, n_v, k, j), axis=0)
    return np.real(out)


def _directional_generator(base, fan, scales, j, n_t, n_v):
    """Spectrum of the unsheared element ``(j, 0)`` on the ``[t, v]`` grid."""
    xi_t = dft_frequencies(n_t)
    xi_v = dft_frequencies(n_v)
    g = np.real(cascade_response(base, scales - j, xi_v, "g"))
    h = np.real(cascade_response(base, scales + 1, xi_t, "h"))
    p = fan_response_grid(fan, n_v, n_t, 2.0 ** (scales - j - 1), 2.0 ** (scales + 1)).T
    return h[:, None] * g[None, :] * p


def _lowpass(base, scales, n_t, n_v):
    h_t = np.real(cascade_response(base, scales, dft_frequencies(n_t), "h"))
    h_v = np.real(cascade_response(base, scales, dft_frequencies(n_v), "h"))
    return h_t[:, None] * h_v[None, :]


def _paper_frame_function(base, fan, scales, n_t, n_v, lowpass):
    """Frame function of the full two-cone system with shears ``|k| <= 2**(j+1)``."""
    total = lowpass ** 2
    for j in range(scales):
        gen = _directional_generator(base, fan, scales, j, n_t, n_v)
        gen_t = _directional_generator(base, fan, scales, j, n_v, n_t)
        for k in range(-(2 ** (j + 1)), 2 ** (j + 1) + 1):
            total = total + _shear_grid(gen, k, j + 1) ** 2
            total = total + _shear_grid(gen_t, k, j + 1).T ** 2
    return total


@dataclass(eq=False)
class ShearletSystem:
    """Precomputed analysis and dual spectra for a fixed EPI grid.

    ``analysis[e]`` and ``dual[e]`` are real spectra on the full
    ``(n_t, n_v)`` DFT grid, ordered as ``elements``; element 0 is the
    low-pass.  ``frame_function`` is the sum of squared analysis spectra.
    """

    n_t: int
    n_v: int
    scales: int
    elements: list
    analysis: np.ndarray
    dual: np.ndarray
    frame_function: np.ndarray
    lowpass: np.ndarray = None
    normalization: str = "exact"
    floor: float = DEFAULT_FLOOR
    _half: tuple = field(default=None, repr=False)

    def __post_init__(self):
        h = self.n_v // 2 + 1
        self._half = (
            np.ascontiguousarray(self.analysis[..., :h]),
            np.ascontiguousarray(self.dual[..., :h]),
        )

    @property
    def eta(self):
        return len(self.elements)

    @property
    def shape(self):
        return (self.n_t, self.n_v)

    def index(self, j, k):
        return self.elements.index((j, k))

    def spatial_filter(self, e, dual=False):
        """Spatial taps of element ``e``, origin at ``[0, 0]`` (circular)."""
        spec = self.dual[e] if dual else self.analysis[e]
        return np.real(np.fft.ifft2(spec))

    def check_shape(self, arr, what="EPI"):
        if tuple(arr.shape[-2:]) != self.shape:
            raise ValueError(
                f"{what} shape {tuple(arr.shape[-2:])} does not match system grid {self.shape}"
            )


def build_system(
    n_t,
    n_v,
    scales,
    base=None,
    fan=None,
    normalization="exact",
    floor=DEFAULT_FLOOR,
):
    """Build the EPI-adapted shearlet system on an ``n_t x n_v`` grid.

    Element ``(j, 0)`` is ``g_{J-j}`` along v times ``h_{J+1}`` along t
    times the fan response ``P(2^(J-j-1) xi_v, 2^(J+1) xi_t)``; element
    ``(j, k)`` is its digital shear by ``k / 2**(j+1)``.  The low-pass is
    ``h_J`` along both axes.

    The one-cone family vanishes on parts of the ``xi_v = 0`` axis, so the
    dual normalization needs a choice:

    ``"exact"``
        Wherever the directional family covers less than ``floor``, the
        low-pass element is completed up to ``floor``.  The family is then a
        frame with lower bound ``floor`` and synthesis inverts analysis.
    ``"clipped"``
        Same floor in the denominator, no completion.  Synthesis after
        analysis passes frequencies covered at least ``floor`` unchanged and
        attenuates the rest; this is what the reconstruction uses.
    ``"paper"``
        Duals divided by the frame function of the full two-cone system
        with shears of both signs (comparison only).
    """
    if scales < 1:
        raise ValueError("scales must be >= 1")
    if n_t < 2 ** scales or n_v < 2 ** scales:
        raise ValueError(
            f"grid {n_t}x{n_v} too small for {scales} scales (need >= {2 ** scales})"
        )
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    base = base or FilterPair1D.cdf97()
    fan = fan or FanFilter()

    elements = element_list(scales)
    analysis = np.empty((len(elements), n_t, n_v))
    lowpass = _lowpass(base, scales, n_t, n_v)
    analysis[0] = lowpass
    e = 1
    for j in range(scales):
        gen = _directional_generator(base, fan, scales, j, n_t, n_v)
        for k in range(2 ** (j + 1) + 1):
            analysis[e] = _shear_grid(gen, k, j + 1) if k else gen
            e += 1

    covered = np.einsum("eij,eij->ij", analysis, analysis)
    if normalization == "exact":
        if floor <= 0:
            raise ValueError("exact normalization needs a positive floor")
        deficit = np.maximum(floor - covered, 0.0)
        analysis[0] = np.sqrt(lowpass ** 2 + deficit)
        frame = covered + deficit
        denom = frame
    elif normalization == "clipped":
        if floor <= 0:
            raise ValueError("clipped normalization needs a positive floor")
        frame = covered
        denom = np.maximum(covered, floor)
    else:
        frame = covered
        denom = _paper_frame_function(base, fan, scales, n_t, n_v, lowpass)

    if not np.all(denom > 0):
        raise SingularFrameError("frame function has zeros; dual filters undefined")
    dual = analysis / denom
    log.debug(
        "built %dx%d shearlet system J=%d eta=%d (%s), frame range [%.4g, %.4g]",
        n_t, n_v, scales, len(elements), normalization, frame.min(), frame.max(),
    )
    return ShearletSystem(
        n_t, n_v, scales, elements, analysis, dual, frame,
        lowpass=lowpass, normalization=normalization, floor=float(floor),
    )


def analyze(system, epi):
    """Undecimated analysis: one ``n_t x n_v`` coefficient plane per element."""
    epi = np.asarray(epi, dtype=float)
    system.check_shape(epi)
    spec = sfft.rfft2(epi)
    return sfft.irfft2(spec[None] * system._half[0], s=system.shape, axes=(-2, -1))


def synthesize(system, coeffs):
    """Sum of the coefficient planes convolved with their dual filters."""
    coeffs = np.asarray(coeffs, dtype=float)
    system.check_shape(coeffs, "coefficient stack")
    if coeffs.shape[0] != system.eta:
        raise ValueError(f"expected {system.eta} planes, got {coeffs.shape[0]}")
    spec = sfft.rfft2(coeffs, axes=(-2, -1))
    return sfft.irfft2(np.einsum("eij,eij->ij", spec, system._half[1]), s=system.shape)


def frame_bounds(system):
    """Lower and upper frame bounds: extrema of the frame function."""
    return float(system.frame_function.min()), float(system.frame_function.max())
