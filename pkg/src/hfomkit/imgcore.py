"""Grayscale raster primitives: I/O, crop/resize, binarize, pad, rotate, convolve.

A gray image is a 2-D ``numpy.uint8`` array, row-major, intensities in
[0, 255]. A binarized image contains only the values {0, 255}.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

__all__ = [
    "LAPLACIAN",
    "load_image",
    "save_image",
    "check_gray",
    "check_binary",
    "crop_resize",
    "binarize",
    "pad_to_blocks",
    "rotate_quarter",
    "convolve3x3",
]

# Positive Laplacian: center +4, 4-neighbours -1, corners 0.
LAPLACIAN = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=np.float64)

QUARTER_ANGLES = (0, 90, 180, 270)


def check_gray(img):
    """Validate and return a 2-D uint8 image array."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale array, got shape {img.shape}")
    if img.size == 0:
        raise ValueError("zero-dimension image")
    if img.dtype != np.uint8:
        if np.issubdtype(img.dtype, np.integer) and img.min() >= 0 and img.max() <= 255:
            img = img.astype(np.uint8)
        else:
            raise ValueError(f"expected uint8 intensities in [0, 255], got dtype {img.dtype}")
    return img


def check_binary(img):
    """Validate that an image contains only the values {0, 255}."""
    img = check_gray(img)
    if not np.isin(img, (0, 255)).all():
        raise ValueError("image is not binarized (values outside {0, 255})")
    return img


def load_image(path):
    """Read a PGM (P5) or PNG file as a gray image.

    Multi-channel inputs are converted to single-channel by luma.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.uint8)
    return check_gray(arr)


def save_image(img, path):
    """Write a gray image as PGM (P5) or PNG, chosen by file extension."""
    img = check_gray(img)
    Image.fromarray(img, mode="L").save(path)


def crop_resize(img, s):
    """Center-crop to the largest centered square, then nearest-neighbour resize to s x s."""
    img = check_gray(img)
    if s < 16:
        raise ValueError(f"target side must be >= 16, got {s}")
    h, w = img.shape
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    img = img[top : top + side, left : left + side]
    if side == s:
        return img.copy()
    # pixel-center sampling: output pixel i reads source pixel floor((i + 0.5) * side / s)
    idx = np.minimum(((np.arange(s) + 0.5) * side / s).astype(np.intp), side - 1)
    return img[np.ix_(idx, idx)]


def binarize(img, t=127):
    """Threshold: pixel >= t maps to 255, pixel < t maps to 0."""
    img = check_gray(img)
    if not 0 <= t <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {t}")
    return np.where(img >= t, 255, 0).astype(np.uint8)


def _pad_amounts(side, b_s):
    target = -(-side // b_s) * b_s
    p = target - side
    if p < 4:
        # thin padding goes on top/left only; right and bottom stay unpadded
        return p, 0
    return p // 2, p - p // 2


def pad_to_blocks(img, b_s):
    """Pad with white pixels so both sides become exact multiples of b_s.

    Padding is split evenly (floor on top/left, ceil on bottom/right); when
    the amount for an axis is below 4 it is applied to the top/left side only.
    """
    img = check_gray(img)
    if b_s % 2 == 0:
        raise ValueError(f"block side must be odd, got {b_s}")
    h, w = img.shape
    if b_s > min(h, w):
        raise ValueError(f"block side {b_s} exceeds image side {min(h, w)}")
    top, bottom = _pad_amounts(h, b_s)
    left, right = _pad_amounts(w, b_s)
    if top == bottom == left == right == 0:
        return img.copy()
    return np.pad(img, ((top, bottom), (left, right)), constant_values=255)


def rotate_quarter(img, angle):
    """Lossless quarter-turn rotation of a square image; counter-clockwise positive."""
    img = check_gray(img)
    if img.shape[0] != img.shape[1]:
        raise ValueError(f"quarter rotation needs a square image, got {img.shape}")
    if angle not in QUARTER_ANGLES:
        raise ValueError(f"angle must be one of {QUARTER_ANGLES}, got {angle}")
    return np.rot90(img, k=angle // 90).copy()


def convolve3x3(img, kernel):
    """Convolve with a 3x3 kernel; 1-pixel replicate border keeps the output size.

    Returns a signed float64 response raster.
    """
    img = check_gray(img)
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.shape != (3, 3):
        raise ValueError(f"kernel must be 3x3, got {kernel.shape}")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"image must be at least 3x3, got {img.shape}")
    return ndimage.convolve(img.astype(np.float64), kernel, mode="nearest")
