"""Top-down scene rasterization and patch sampling.

The camera is a binary silhouette renderer: a pixel is 1.0 when its center
lies inside the object, else 0.0. Pixel (W//2, H//2) maps to the world
origin; +column is +x, +row is -y (row 0 at the top of the frame).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBoundsError, OutOfFrameError
from .geometry import ObjectShape, Pose2, contains_points


@dataclass(frozen=True)
class ImagingConfig:
    width: int = 64
    height: int = 64
    patch_size: int = 32
    meters_per_pixel: float = 0.005

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "patch_size": self.patch_size,
            "meters_per_pixel": self.meters_per_pixel,
        }

    @staticmethod
    def from_dict(d: dict) -> "ImagingConfig":
        return ImagingConfig(**d)


@dataclass(frozen=True)
class Image:
    """Grayscale image, row-major float pixels in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width)
    meters_per_pixel: float


@dataclass(frozen=True)
class Patch:
    """Square sub-window of an image; center_px is (col, row) in the source."""

    center_px: tuple
    size_px: int
    pixels: np.ndarray


def pixel_to_world(img: Image, p) -> tuple:
    """World coordinates (m) of a pixel center; (col, row) order."""
    i, j = int(p[0]), int(p[1])
    if not (0 <= i < img.width and 0 <= j < img.height):
        raise OutOfBoundsError(f"pixel {p} outside {img.width}x{img.height}")
    mpp = img.meters_per_pixel
    return ((i - img.width // 2) * mpp, (img.height // 2 - j) * mpp)


def world_to_pixel(img: Image, xy) -> tuple:
    """Nearest pixel (col, row) for a world point."""
    mpp = img.meters_per_pixel
    i = int(round(xy[0] / mpp)) + img.width // 2
    j = img.height // 2 - int(round(xy[1] / mpp))
    if not (0 <= i < img.width and 0 <= j < img.height):
        raise OutOfBoundsError(f"world point {xy} outside the frame")
    return (i, j)


def _pixel_center_grid(cfg: ImagingConfig) -> np.ndarray:
    mpp = cfg.meters_per_pixel
    xs = (np.arange(cfg.width) - cfg.width // 2) * mpp
    ys = (cfg.height // 2 - np.arange(cfg.height)) * mpp
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def render_scene(obj: ObjectShape, pose: Pose2, cfg: ImagingConfig) -> Image:
    """Rasterize the posed object as a binary silhouette."""
    world = obj.transformed(pose)
    mpp = cfg.meters_per_pixel
    for part in world.parts:
        for x, y in part:
            i = int(round(x / mpp)) + cfg.width // 2
            j = cfg.height // 2 - int(round(y / mpp))
            if not (0 <= i < cfg.width and 0 <= j < cfg.height):
                raise OutOfFrameError(
                    f"{obj.name}: vertex ({x:.4f}, {y:.4f}) projects outside the frame"
                )
    inside = contains_points(world, _pixel_center_grid(cfg))
    pixels = inside.astype(float).reshape(cfg.height, cfg.width)
    return Image(cfg.width, cfg.height, pixels, mpp)


def _patch_center_range(img: Image, size_px: int) -> tuple:
    half = size_px // 2
    return (half, img.width - size_px + half, half, img.height - size_px + half)


def extract_patch(img: Image, center, size_px: int = 32) -> Patch:
    """Copy the size_px window whose local (half, half) pixel is `center`."""
    i, j = int(center[0]), int(center[1])
    half = size_px // 2
    r0, c0 = j - half, i - half
    if r0 < 0 or c0 < 0 or r0 + size_px > img.height or c0 + size_px > img.width:
        raise OutOfBoundsError(f"patch at {center} size {size_px} not inside image")
    return Patch((i, j), size_px, img.pixels[r0:r0 + size_px, c0:c0 + size_px].copy())


def clamp_patch_center(img: Image, center, size_px: int = 32) -> tuple:
    """Nearest valid patch center to `center`."""
    lo_i, hi_i, lo_j, hi_j = _patch_center_range(img, size_px)
    return (min(max(int(center[0]), lo_i), hi_i), min(max(int(center[1]), lo_j), hi_j))


def sample_patch_centers(img: Image, n_g: int, rng: np.random.Generator,
                         size_px: int = 32) -> list:
    """n_g patch centers whose windows each contain at least one object pixel.

    Rejection-samples uniformly over valid centers; after 1000*n_g rejections
    falls back to object pixels clamped into the valid center range.
    """
    if n_g < 1:
        raise ValueError("n_g must be >= 1")
    lo_i, hi_i, lo_j, hi_j = _patch_center_range(img, size_px)
    half = size_px // 2
    centers = []
    rejections = 0
    limit = 1000 * n_g
    while len(centers) < n_g and rejections < limit:
        i = int(rng.integers(lo_i, hi_i + 1))
        j = int(rng.integers(lo_j, hi_j + 1))
        window = img.pixels[j - half:j + size_px - half, i - half:i + size_px - half]
        if np.any(window > 0.0):
            centers.append((i, j))
        else:
            rejections += 1
    if len(centers) < n_g:
        rows, cols = np.nonzero(img.pixels > 0.0)
        if len(rows) == 0:
            fallback = [((lo_i + hi_i) // 2, (lo_j + hi_j) // 2)]
        else:
            fallback = [clamp_patch_center(img, (int(c), int(r)), size_px)
                        for r, c in zip(rows, cols)]
        k = 0
        while len(centers) < n_g:
            centers.append(fallback[k % len(fallback)])
            k += 1
    return centers


def to_pgm(pixels: np.ndarray) -> bytes:
    """Serialize a float [0,1] pixel grid as binary PGM (P5, maxval 255)."""
    h, w = pixels.shape
    data = np.rint(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    return b"P5\n%d %d\n255\n" % (w, h) + data.tobytes()


def from_pgm(blob: bytes) -> np.ndarray:
    """Parse a binary PGM (P5) back into a float [0,1] grid."""
    if not blob.startswith(b"P5"):
        raise ValueError("not a P5 PGM")
    parts = blob.split(b"\n", 3)
    if len(parts) < 4:
        raise ValueError("truncated PGM header")
    w, h = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    data = np.frombuffer(parts[3], dtype=np.uint8, count=w * h)
    return data.reshape(h, w).astype(float) / float(maxval)
