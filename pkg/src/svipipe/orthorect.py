"""Equirectangular to rectilinear (gnomonic) view extraction.

Angles follow the vehicle frame: longitude 0 is straight ahead, positive
longitude turns right, positive latitude looks up. Pixel coordinates are
continuous with pixel ``i`` covering ``[i, i + 1)``, so pixel centers sit at
``i + 0.5``.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from PIL import Image


class Side(str, enum.Enum):
    LEFT = "L"
    RIGHT = "R"


@dataclass(frozen=True)
class ViewSpec:
    side: Side
    yaw_offset: float  # degrees, Left = -90, Right = +90
    hfov: float = 100.0
    vfov: float = 67.0
    out_width: int = 1920
    out_height: int = 1280
    pitch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if not 0 < self.hfov < 180 or not 0 < self.vfov < 180:
            raise ValueError(f"field of view must lie in (0, 180): {self.hfov}, {self.vfov}")
        if self.out_width <= 0 or self.out_height <= 0:
            raise ValueError("output dimensions must be positive")

    @property
    def focal(self) -> tuple[float, float]:
        fx = (self.out_width / 2) / np.tan(np.radians(self.hfov) / 2)
        fy = (self.out_height / 2) / np.tan(np.radians(self.vfov) / 2)
        return fx, fy


DEFAULT_VIEWS = (
    ViewSpec(Side.LEFT, -90.0),
    ViewSpec(Side.RIGHT, 90.0),
)


@dataclass(frozen=True)
class RectilinearView:
    frame_id: str
    side: Side
    pixels: np.ndarray  # (height, width, 3) uint8

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def check_equirect(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected an (H, W, 3) uint8 image, got {img.shape} {img.dtype}")
    h, w = img.shape[:2]
    if w == 0 or w != 2 * h:
        raise ValueError(f"equirectangular image must be 2:1, got {w}x{h}")
    return img


def sphere_to_equirect_pixel(lon, lat, width: int, height: int):
    u = (np.asarray(lon) / (2 * np.pi) + 0.5) * width
    v = (0.5 - np.asarray(lat) / np.pi) * height
    return u, v


def equirect_pixel_to_sphere(u, v, width: int, height: int):
    lon = (np.asarray(u) / width - 0.5) * 2 * np.pi
    lat = (0.5 - np.asarray(v) / height) * np.pi
    return lon, lat


def _rotations(spec: ViewSpec):
    yaw = np.radians(spec.yaw_offset)
    pitch = np.radians(spec.pitch)
    return np.cos(yaw), np.sin(yaw), np.cos(pitch), np.sin(pitch)


def gnomonic_ray(px, py, spec: ViewSpec):
    """Spherical direction (lon, lat) in radians seen through output pixel (px, py)."""
    fx, fy = spec.focal
    cy_, sy_, cp, sp = _rotations(spec)
    x = (np.asarray(px, dtype=np.float64) - spec.out_width / 2) / fx
    y = -(np.asarray(py, dtype=np.float64) - spec.out_height / 2) / fy
    z = np.ones_like(x)
    # pitch about the camera's right axis, then yaw about the vertical
    y, z = y * cp + z * sp, -y * sp + z * cp
    x, z = x * cy_ + z * sy_, -x * sy_ + z * cy_
    return np.arctan2(x, z), np.arctan2(y, np.hypot(x, z))


def _camera_coords(lon, lat, spec: ViewSpec):
    cy_, sy_, cp, sp = _rotations(spec)
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    x = np.cos(lat) * np.sin(lon)
    y = np.sin(lat)
    z = np.cos(lat) * np.cos(lon)
    x, z = x * cy_ - z * sy_, x * sy_ + z * cy_
    y, z = y * cp - z * sp, y * sp + z * cp
    return x, y, z


def gnomonic_pixel(lon, lat, spec: ViewSpec):
    """Inverse of :func:`gnomonic_ray`. Directions behind the camera give NaN."""
    fx, fy = spec.focal
    x, y, z = _camera_coords(lon, lat, spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        zz = np.where(z > 0, z, np.nan)
        px = x / zz * fx + spec.out_width / 2
        py = -y / zz * fy + spec.out_height / 2
    return px, py


def in_view(lon, lat, spec: ViewSpec):
    """Boolean mask of directions that land inside the view's frustum."""
    x, y, z = _camera_coords(lon, lat, spec)
    tx = np.tan(np.radians(spec.hfov) / 2)
    ty = np.tan(np.radians(spec.vfov) / 2)
    return (z > 0) & (np.abs(x) <= tx * z) & (np.abs(y) <= ty * z)


def coverage_fraction(specs=DEFAULT_VIEWS, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo estimate of the fraction of the sphere seen by any of ``specs``."""
    rng = np.random.default_rng(seed)
    lon = rng.uniform(-np.pi, np.pi, n_samples)
    lat = np.arcsin(rng.uniform(-1.0, 1.0, n_samples))
    hit = np.zeros(n_samples, dtype=bool)
    for spec in specs:
        hit |= in_view(lon, lat, spec)
    return float(hit.mean())


@dataclass(frozen=True)
class SamplingTable:
    """Precomputed bilinear gather indices and weights for one view and source size."""

    idx: np.ndarray  # (4, n) int64 flat source-pixel indices
    weights: np.ndarray  # (4, n) float32
    shape: tuple[int, int]


@functools.lru_cache(maxsize=32)
def sampling_table(spec: ViewSpec, src_width: int, src_height: int) -> SamplingTable:
    py, px = np.mgrid[0 : spec.out_height, 0 : spec.out_width].astype(np.float64)
    lon, lat = gnomonic_ray(px + 0.5, py + 0.5, spec)
    u, v = sphere_to_equirect_pixel(lon, lat, src_width, src_height)
    # sample positions in index space (pixel centers at integers)
    u = u - 0.5
    v = np.clip(v - 0.5, 0.0, src_height - 1)
    x0 = np.floor(u)
    y0 = np.floor(v)
    fx = u - x0
    fy = v - y0
    x0 = x0.astype(np.int64) % src_width
    x1 = (x0 + 1) % src_width
    y0 = y0.astype(np.int64)
    y1 = np.minimum(y0 + 1, src_height - 1)
    idx = np.stack([y0 * src_width + x0, y0 * src_width + x1, y1 * src_width + x0, y1 * src_width + x1])
    w = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy]).astype(np.float32)
    idx = idx.reshape(4, -1)
    w = w.reshape(4, -1)
    idx.flags.writeable = False
    w.flags.writeable = False
    return SamplingTable(idx, w, (spec.out_height, spec.out_width))


@numba.njit(cache=True, nogil=True)
def _gather_bilinear(src, idx, w, out):
    n = idx.shape[1]
    for k in range(n):
        i0, i1, i2, i3 = idx[0, k], idx[1, k], idx[2, k], idx[3, k]
        w0, w1, w2, w3 = w[0, k], w[1, k], w[2, k], w[3, k]
        for c in range(3):
            val = src[i0, c] * w0 + src[i1, c] * w1 + src[i2, c] * w2 + src[i3, c] * w3
            val = np.floor(val + np.float32(0.5))
            if val < 0:
                val = 0.0
            elif val > 255:
                val = 255.0
            out[k, c] = np.uint8(val)


def orthorectify(img: np.ndarray, spec: ViewSpec, frame_id: str = "") -> RectilinearView:
    """Resample an equirectangular frame into the rectilinear view ``spec``.

    Bilinear interpolation, wrapping across the longitude seam and clamping
    latitude at the poles.
    """
    img = check_equirect(img)
    h, w = img.shape[:2]
    table = sampling_table(spec, w, h)
    src = np.ascontiguousarray(img).reshape(-1, 3)
    out = np.empty((table.idx.shape[1], 3), dtype=np.uint8)
    _gather_bilinear(src, table.idx, table.weights, out)
    return RectilinearView(frame_id, spec.side, out.reshape(spec.out_height, spec.out_width, 3))


def load_equirect(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return check_equirect(np.asarray(im.convert("RGB")))


def view_filename(frame_id: str, side: Side | str, ext: str = "png") -> str:
    return f"{frame_id}_{Side(side).value}.{ext}"


def save_view(view: RectilinearView, path: str | Path) -> None:
    # no timestamps or optional chunks, so encoded bytes depend only on pixels
    Image.fromarray(view.pixels).save(path, format="PNG", optimize=False)
