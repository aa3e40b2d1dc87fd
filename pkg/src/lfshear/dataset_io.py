"""Dataset manifests, view images, float maps and the shearlet-system cache.

Manifest (JSON)::

    {
      "name": "teddy",
      "view_pattern": "im{t}.png",      # {s}/{t} fields or one printf field
      "grid": [1, 9],                   # n_s camera rows, n_t columns
      "channel_layout": "RGB",          # RGB | Y | YUV
      "d_max": [17],                    # per channel, or a single value
      "bit_depth": 8,
      "leave_n": 2,
      "index_base": 0,                  # added to s and t when expanding
      "disparity_sign": null,           # +1 / -1 / null (estimate)
      "yuv": null                       # planar raw input, see below
    }

Relative paths resolve against the manifest's directory; ``${LFSHEAR_DATA}``
in ``root`` expands to that environment variable (default ``./data``).  For planar raw
YUV input set ``"yuv": {"width": W, "height": H, "chroma_subsampling":
[2, 2]}`` and point ``view_pattern`` at one raw frame per view.

System cache layout (little-endian)::

    b"SHLC"  u8 version  u32 n_t  u32 n_v  u8 J  u16 count
    count x (n_t * n_v) complex64 analysis spectra (re, im interleaved)
    u8 normalization code  f32 floor
    n_t * n_v f32 dual denominator
    n_t * n_v f32 plain low-pass spectrum
"""

from __future__ import annotations

import json
import logging
import os
import re
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .lightfield import LightField
from .shearlet import NORMALIZATIONS, ShearletSystem, build_system, element_list

log = logging.getLogger(__name__)

DATA_ENV = "LFSHEAR_DATA"
CACHE_MAGIC = b"SHLC"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sBIIBH")
_TRAILER = struct.Struct("<Bf")


class CacheMismatchError(RuntimeError):
    """Cached system does not fit the requested grid/J/version: rebuild it."""


class CacheFormatError(ValueError):
    """File is not a shearlet-system cache."""


# ---------------------------------------------------------------- manifests

@dataclass
class DatasetManifest:
    name: str
    view_pattern: str
    grid: tuple
    channel_layout: str = "RGB"
    d_max: list = field(default_factory=lambda: [1])
    bit_depth: int = 8
    leave_n: int = 1
    index_base: int = 0
    disparity_sign: int | None = None
    yuv: dict | None = None
    root: str = "."

    def __post_init__(self):
        self.grid = tuple(int(g) for g in self.grid)
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ValueError("grid must be [n_s, n_t] with positive entries")
        if np.ndim(self.d_max) == 0:
            self.d_max = [self.d_max]
        self.d_max = [int(np.ceil(d)) for d in self.d_max]
        if min(self.d_max) < 1:
            raise ValueError("d_max must be >= 1 for every channel")
        if self.channel_layout not in ("RGB", "Y", "YUV", "GRAY"):
            raise ValueError(f"unknown channel layout {self.channel_layout!r}")
        if self.disparity_sign not in (None, 1, -1):
            raise ValueError("disparity_sign must be 1, -1 or null")

    def channel_d_max(self, n_channels):
        d = self.d_max
        if len(d) == 1:
            return d * n_channels
        if self.channel_layout == "YUV" and len(d) == 2:
            return [d[0], d[1], d[1]]
        if len(d) != n_channels:
            raise ValueError(f"manifest lists {len(d)} d_max values for {n_channels} channels")
        return list(d)

    def view_path(self, s, t):
        s_i, t_i = s + self.index_base, t + self.index_base
        pat = self.view_pattern
        if "%" in pat:
            n_fields = len(re.findall(r"%[-0-9]*d", pat))
            name = pat % ((t_i,) if n_fields == 1 else (s_i, t_i))
        else:
            name = pat.format(s=s_i, t=t_i, i=s * self.grid[1] + t + self.index_base)
        return Path(self.root) / name

    def to_json(self):
        d = asdict(self)
        d.pop("root")
        d["grid"] = list(self.grid)
        return json.dumps(d, indent=2)


def load_manifest(path):
    path = Path(path)
    with open(path) as fh:
        data = json.load(fh)
    root = data.pop("root", None)
    known = set(DatasetManifest.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ValueError(f"unknown manifest fields: {sorted(extra)}")
    base = path.parent
    if root:
        # roots under the data directory resolve against the working directory,
        # plain relative roots against the manifest's own directory
        from_env = DATA_ENV in root
        env = {DATA_ENV: "data", **os.environ}
        root = Path(os.path.expanduser(_expand(root, env)))
        if not root.is_absolute():
            root = (Path.cwd() if from_env else base) / root
    return DatasetManifest(**data, root=str(root or base))


def _expand(text, env):
    return re.sub(r"\$\{(\w+)\}|\$(\w+)", lambda m: env.get(m.group(1) or m.group(2), m.group(0)), text)


def bundled_manifest(name):
    """Path of a manifest shipped with the package (teddy, cones, truck, bunny)."""
    path = Path(__file__).parent / "manifests" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no bundled manifest named {name!r}")
    return path


# ---------------------------------------------------------------- images

def read_image(path):
    """Read an 8/16-bit PNG/PPM/PGM as ``(h, w, c)`` with RGB channel order."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ValueError(f"cannot decode image {path}")
    if img.ndim == 2:
        img = img[..., None]
    elif img.shape[2] == 4:
        img = img[..., :3]
    if img.shape[2] == 3:
        img = img[..., ::-1]
    return np.ascontiguousarray(img)


def write_image(path, img):
    """Write an integer image losslessly (format from the suffix)."""
    img = np.asarray(img)
    if img.dtype not in (np.uint8, np.uint16):
        raise TypeError("write_image expects uint8 or uint16 data")
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    elif img.ndim == 3:
        img = img[..., ::-1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.ascontiguousarray(img)):
        raise OSError(f"failed to write image {path}")


def _container_bits(dtype):
    return 16 if dtype == np.uint16 else 8


def _to_bit_depth(img, src_bits, dst_bits):
    if src_bits == dst_bits:
        return img
    scale = (2.0 ** dst_bits - 1) / (2.0 ** src_bits - 1)
    out = np.rint(img.astype(float) * scale)
    return out.astype(np.uint16 if dst_bits > 8 else np.uint8)


def to_integer_views(views, bit_depth):
    """Round and clip float intensities into the container for ``bit_depth``."""
    dtype = np.uint16 if bit_depth > 8 else np.uint8
    views = np.asarray(views)
    if views.dtype == dtype:
        return views
    return np.clip(np.rint(views), 0, 2 ** bit_depth - 1).astype(dtype)


def load_views(manifest):
    """Load every view of ``manifest`` into a :class:`LightField`."""
    if manifest.yuv:
        raise ValueError("planar YUV manifests load through load_yuv_planes")
    n_s, n_t = manifest.grid
    first = None
    views = None
    for s in range(n_s):
        for t in range(n_t):
            idx = s * n_t + t
            path = manifest.view_path(s, t)
            try:
                img = read_image(path)
            except FileNotFoundError:
                raise FileNotFoundError(f"view {idx} (s={s}, t={t}) missing: {path}") from None
            except ValueError as exc:
                raise ValueError(f"view {idx} (s={s}, t={t}): {exc}") from None
            img = _to_bit_depth(img, _container_bits(img.dtype), manifest.bit_depth)
            if manifest.channel_layout in ("Y", "GRAY") and img.shape[2] == 3:
                raise ValueError(f"view {idx} is color but the manifest declares {manifest.channel_layout}")
            if manifest.channel_layout in ("RGB", "YUV") and img.shape[2] == 1:
                img = np.repeat(img, 3, axis=2)
            if first is None:
                first = img.shape
                views = np.empty((n_s, n_t) + first, dtype=img.dtype)
            elif img.shape != first:
                raise ValueError(
                    f"view {idx} (s={s}, t={t}) has shape {img.shape}, expected {first}"
                )
            views[s, t] = img
    return LightField(views, manifest.channel_layout, manifest.bit_depth,
                      {"name": manifest.name})


def save_views(lf, directory, pattern="view_{s:02d}_{t:02d}.png"):
    """Write each view losslessly; returns the number of files written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    views = to_integer_views(lf.views, lf.bit_depth)
    n_s, n_t = lf.grid
    count = 0
    for s in range(n_s):
        for t in range(n_t):
            name = pattern.format(s=s, t=t, i=s * n_t + t)
            path = directory / name
            try:
                write_image(path, views[s, t])
            except OSError as exc:
                raise OSError(f"writing view (s={s}, t={t}) to {path}: {exc}") from exc
            count += 1
    return count


def read_yuv_planar(path, width, height, subsampling=(2, 2), bit_depth=8):
    """One planar raw frame -> ``(Y, U, V)`` at their native resolutions."""
    dtype = np.dtype("<u2") if bit_depth > 8 else np.dtype("u1")
    cw, ch = width // subsampling[0], height // subsampling[1]
    sizes = (width * height, cw * ch, cw * ch)
    raw = np.fromfile(path, dtype=dtype)
    if raw.size < sum(sizes):
        raise ValueError(f"{path}: expected {sum(sizes)} samples, found {raw.size}")
    y = raw[: sizes[0]].reshape(height, width)
    u = raw[sizes[0]: sizes[0] + sizes[1]].reshape(ch, cw)
    v = raw[sizes[0] + sizes[1]: sum(sizes)].reshape(ch, cw)
    return y, u, v


def load_yuv_planes(manifest):
    """Planar YUV manifest -> ``{"Y": lf, "U": lf, "V": lf}`` single-plane fields."""
    spec = manifest.yuv or {}
    w, h = int(spec["width"]), int(spec["height"])
    sub = tuple(spec.get("chroma_subsampling", (2, 2)))
    n_s, n_t = manifest.grid
    planes = {"Y": [], "U": [], "V": []}
    for s in range(n_s):
        for t in range(n_t):
            path = manifest.view_path(s, t)
            if not path.exists():
                raise FileNotFoundError(f"view {s * n_t + t} (s={s}, t={t}) missing: {path}")
            for key, plane in zip("YUV", read_yuv_planar(path, w, h, sub, manifest.bit_depth)):
                planes[key].append(plane)
    out = {}
    for key, items in planes.items():
        arr = np.stack(items).reshape((n_s, n_t) + items[0].shape)
        out[key] = LightField(arr, "Y", manifest.bit_depth, {"name": manifest.name, "plane": key})
    return out


# ---------------------------------------------------------------- PFM

def write_pfm(path, data):
    """Portable float map, little-endian (negative scale), bottom row first."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[..., 0]
    if data.ndim == 2:
        kind = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        kind = b"PF"
    else:
        raise ValueError("PFM holds 1- or 3-channel 2D data")
    h, w = data.shape[:2]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(kind + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as fh:
        kind = fh.readline().strip()
        if kind not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        while not dims:
            dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        channels = 3 if kind == b"PF" else 1
        data = np.frombuffer(fh.read(), dtype=endian + "f4")
    if data.size != w * h * channels:
        raise ValueError(f"{path}: truncated PFM payload")
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].astype(np.float32)


# ---------------------------------------------------------------- system cache

def _atomic_write(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _denominator(system):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = system.analysis / system.dual
    # any element with a nonzero dual gives the denominator
    den = np.where(system.dual != 0, ratio, np.nan)
    out = np.nanmax(den, axis=0)
    return np.where(np.isfinite(out), out, 1.0)


def cache_system(system, path):
    """Serialize ``system``; the file is written atomically."""
    n = system.eta
    if n > 0xFFFF:
        raise ValueError("too many elements for the cache format")
    parts = [_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, system.n_t, system.n_v, system.scales, n)]
    spec = np.zeros((n, system.n_t, system.n_v, 2), dtype="<f4")
    spec[..., 0] = system.analysis
    parts.append(spec.tobytes())
    parts.append(_TRAILER.pack(NORMALIZATIONS.index(system.normalization), system.floor))
    parts.append(np.asarray(_denominator(system), dtype="<f4").tobytes())
    parts.append(np.asarray(system.lowpass, dtype="<f4").tobytes())
    _atomic_write(path, b"".join(parts))


def load_cached_system(path, n_t=None, n_v=None, scales=None):
    """Load a cached system, validating grid size and J when given.

    Raises :class:`CacheMismatchError` when the file is from another format
    version or does not match the expectation, so callers rebuild.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size or blob[:4] != CACHE_MAGIC:
        raise CacheFormatError(f"{path}: bad magic header")
    magic, version, c_nt, c_nv, c_j, count = _HEADER.unpack_from(blob)
    if version != CACHE_VERSION:
        raise CacheMismatchError(f"{path}: cache version {version}, expected {CACHE_VERSION}")
    for name, want, got in (("n_t", n_t, c_nt), ("n_v", n_v, c_nv), ("J", scales, c_j)):
        if want is not None and want != got:
            raise CacheMismatchError(f"{path}: cached {name}={got}, requested {want}; rebuild needed")
    elements = element_list(c_j)
    if count != len(elements):
        raise CacheFormatError(f"{path}: {count} elements stored, J={c_j} needs {len(elements)}")
    grid = c_nt * c_nv
    off = _HEADER.size
    need = off + count * grid * 8 + _TRAILER.size + 2 * grid * 4
    if len(blob) != need:
        raise CacheFormatError(f"{path}: size {len(blob)} bytes, expected {need}")
    spec = np.frombuffer(blob, dtype="<f4", count=count * grid * 2, offset=off)
    analysis = spec.reshape(count, c_nt, c_nv, 2)[..., 0].astype(float)
    off += count * grid * 8
    code, floor = _TRAILER.unpack_from(blob, off)
    off += _TRAILER.size
    denom = np.frombuffer(blob, dtype="<f4", count=grid, offset=off).reshape(c_nt, c_nv).astype(float)
    off += grid * 4
    lowpass = np.frombuffer(blob, dtype="<f4", count=grid, offset=off).reshape(c_nt, c_nv).astype(float)
    frame = np.einsum("eij,eij->ij", analysis, analysis)
    return ShearletSystem(
        c_nt, c_nv, c_j, elements, analysis, analysis / denom, frame,
        lowpass=lowpass, normalization=NORMALIZATIONS[code], floor=float(floor),
    )


def get_or_build_system(path, n_t, n_v, scales, normalization="exact", **kwargs):
    """Load ``path`` when it matches, otherwise build and cache a new system."""
    if path is not None and Path(path).exists():
        try:
            system = load_cached_system(path, n_t, n_v, scales)
            if system.normalization == normalization:
                return system
            log.info("cache %s has normalization %s; rebuilding", path, system.normalization)
        except (CacheMismatchError, CacheFormatError) as exc:
            log.info("rebuilding system: %s", exc)
    system = build_system(n_t, n_v, scales, normalization=normalization, **kwargs)
    if path is not None:
        cache_system(system, path)
    return system
