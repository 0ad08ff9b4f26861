"""Raster primitives shared by every stage of the pipeline.

Images are plain numpy arrays:

* RGB raster: ``uint8`` array of shape ``(height, width, 3)``
* channel plane: 2-D ``float64`` (while filtering) or ``uint8`` array
* binary mask: 2-D ``bool`` array, ``True`` marks lesion pixels
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage
from skimage.transform import resize

BIT_DEPTH = 8
MAX_LEVEL = 2**BIT_DEPTH - 1

CHANNELS = {"R": 0, "G": 1, "B": 2}


def as_rgb(img) -> np.ndarray:
    """Validate and return an RGB raster as a ``uint8`` (H, W, 3) array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > MAX_LEVEL):
            raise ValueError(f"channel values must lie in [0, {MAX_LEVEL}]")
        arr = arr.astype(np.uint8)
    return arr


def extract_channel(img, which: str = "B") -> np.ndarray:
    return as_rgb(img)[:, :, CHANNELS[which.upper()]].copy()


def luminance(img) -> np.ndarray:
    """ITU-R BT.601 luma as float64 in [0, 255]."""
    rgb = as_rgb(img).astype(np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


def high_boost_kernel(c: float) -> np.ndarray:
    """Identity plus ``c`` times the 5-point Laplacian (sign flipped to sharpen)."""
    if c < 0:
        raise ValueError("boost parameter c must be non-negative")
    return np.array(
        [[0.0, -c, 0.0],
         [-c, 4.0 * c + 1.0, -c],
         [0.0, -c, 0.0]]
    )


def convolve3x3(plane, kernel) -> np.ndarray:
    """Convolve a plane with a 3x3 kernel using replicate padding.

    Output is real-valued and unclamped. Call :func:`quantize` before
    building a histogram from it.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (3, 3):
        raise ValueError("kernel must be 3x3")
    # true convolution: flip the kernel before correlating
    return ndimage.correlate(np.asarray(plane, dtype=np.float64), kernel[::-1, ::-1], mode="nearest")


def quantize(plane) -> np.ndarray:
    """Round half up and clamp to the 8-bit range."""
    return np.clip(np.floor(np.asarray(plane, dtype=np.float64) + 0.5), 0, MAX_LEVEL).astype(np.uint8)


def saturating_scale(plane, factor: float) -> np.ndarray:
    """Multiply by ``factor``, round, and saturate at the 8-bit ceiling."""
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor!r}")
    return quantize(np.asarray(plane, dtype=np.float64) * factor)


def downscaled_shape(height: int, width: int, max_pixels: int) -> tuple[int, int]:
    """Largest ``(floor(h*s), floor(w*s))`` with ``s < 1`` whose area is below ``max_pixels``.

    The output size only changes where ``s`` crosses ``k/h`` or ``k/w``, so
    those breakpoints are the complete candidate set.
    """
    if max_pixels < 1:
        raise ValueError("max_pixels must be >= 1")
    if height * width < max_pixels:
        return height, width
    best = None
    # s = k/height
    for k in range(1, height):
        h, w = k, (width * k) // height
        if h >= 1 and w >= 1 and h * w < max_pixels and (best is None or (h, w) > best):
            best = (h, w)
    # s = k/width
    for k in range(1, width):
        h, w = (height * k) // width, k
        if h >= 1 and w >= 1 and h * w < max_pixels and (best is None or (h, w) > best):
            best = (h, w)
    if best is None:
        best = (1, 1)
    return best


def downscale(img, max_pixels: int = 12000) -> np.ndarray:
    """Shrink an RGB raster uniformly until it has fewer than ``max_pixels`` pixels.

    Bilinear sampling, no anti-aliasing prefilter. Images already under the
    cap are returned unchanged.
    """
    img = as_rgb(img)
    h, w = img.shape[:2]
    th, tw = downscaled_shape(h, w, max_pixels)
    if (th, tw) == (h, w):
        return img
    out = resize(img, (th, tw, 3), order=1, mode="edge", anti_aliasing=False, preserve_range=True)
    return quantize(out)


def _nearest_index(n_out: int, n_src: int) -> np.ndarray:
    # source index whose centre is nearest to each output centre; ties go low
    i = np.arange(n_out, dtype=np.int64)
    num = (2 * i + 1) * n_src - 2 * n_out
    idx = -((-num) // (2 * n_out))  # ceil
    return np.clip(idx, 0, n_src - 1)


def downscale_mask(mask, target_w: int, target_h: int) -> np.ndarray:
    """Nearest-neighbour resample of a boolean mask to exactly ``(target_h, target_w)``."""
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    rows = _nearest_index(target_h, mask.shape[0])
    cols = _nearest_index(target_w, mask.shape[1])
    return mask[np.ix_(rows, cols)]


def area(mask) -> int:
    return int(np.count_nonzero(mask))
