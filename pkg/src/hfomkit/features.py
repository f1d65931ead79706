"""Six-feature description of a fingerprint image.

Features: mean intensity, intensity variance, scaled squared ridge/valley
ratio sum, mean block directional difference, mean ridge-to-valley ratio,
and mean orientation change.
"""

from dataclasses import dataclass

import numpy as np

from . import imgcore

__all__ = [
    "FeatureVector",
    "LabeledSample",
    "FEATURE_NAMES",
    "LABELS",
    "SLIT_OFFSETS",
    "mean_variance",
    "block_directional_difference",
    "orientation_change",
    "rvr_features",
    "extract_features",
]

FEATURE_NAMES = ("mu", "sigma2", "ssrvr", "bdd_avg", "rvr_avg", "theta_avg")
LABELS = ("dry", "standard", "wet")

DEFAULT_EPSILON = 1e16
DEFAULT_BLOCK_SIDE = 15
THETA_SCALE = 255.0

# Directional slits inside a 9x9 window, one per 22.5-degree step over a half
# turn. Each slit holds the 8 window pixels on the line through the center
# (center excluded): offsets below are the positive half, (dy, dx) with
# dy = round(-t*sin(a)), dx = round(t*cos(a)) for t = 1..4, except the two
# diagonal directions, which keep the exact diagonal pixels so every slit
# has 8 distinct entries; the negated offsets complete the slit.
_HALF_SLITS = (
    ((0, 1), (0, 2), (0, 3), (0, 4)),        # 0.0 deg
    ((0, 1), (-1, 2), (-1, 3), (-2, 4)),     # 22.5 deg
    ((-1, 1), (-2, 2), (-3, 3), (-4, 4)),    # 45.0 deg
    ((-1, 0), (-2, 1), (-3, 1), (-4, 2)),    # 67.5 deg
    ((-1, 0), (-2, 0), (-3, 0), (-4, 0)),    # 90.0 deg
    ((-1, 0), (-2, -1), (-3, -1), (-4, -2)), # 112.5 deg
    ((-1, -1), (-2, -2), (-3, -3), (-4, -4)),# 135.0 deg
    ((0, -1), (-1, -2), (-1, -3), (-2, -4)), # 157.5 deg
)
SLIT_OFFSETS = tuple(
    half + tuple((-dy, -dx) for dy, dx in half) for half in _HALF_SLITS
)


@dataclass(frozen=True)
class FeatureVector:
    mu: float
    sigma2: float
    ssrvr: float
    bdd_avg: float
    rvr_avg: float
    theta_avg: float

    def as_array(self):
        return np.array(
            [self.mu, self.sigma2, self.ssrvr, self.bdd_avg, self.rvr_avg, self.theta_avg],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.shape != (6,):
            raise ValueError(f"feature vector must have 6 entries, got shape {arr.shape}")
        return cls(*arr.tolist())


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: str
    source_id: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}; expected one of {LABELS}")


def mean_variance(img):
    """Population mean and variance over all pixels."""
    img = imgcore.check_gray(img)
    data = img.astype(np.float64)
    return float(data.mean()), float(data.var())


def block_directional_difference(img):
    """Per-block spread between max and min directional slit sums.

    The image gets a 1-pixel replicate border, is partitioned into 3x3
    blocks, and each block center anchors a 9x9 window whose 8 slit sums
    are compared. Windows that run past the border use replicate padding.

    Returns (per-block BDD raster, bdd_avg).
    """
    img = imgcore.check_gray(img)
    if img.shape[0] < 9 or img.shape[1] < 9:
        raise ValueError(f"image must be at least 9x9, got {img.shape}")
    padded = np.pad(img.astype(np.float64), 1, mode="edge")
    nb_r = padded.shape[0] // 3
    nb_c = padded.shape[1] // 3
    # extra replicate margin so every 9x9 window stays in bounds
    wide = np.pad(padded, 4, mode="edge")
    sums = np.zeros((nb_r, nb_c, 8))
    for d, slit in enumerate(SLIT_OFFSETS):
        for dy, dx in slit:
            r0 = 4 + 1 + dy
            c0 = 4 + 1 + dx
            sums[:, :, d] += wide[r0 : r0 + 3 * nb_r : 3, c0 : c0 + 3 * nb_c : 3]
    bdd = sums.max(axis=2) - sums.min(axis=2)
    return bdd, float(bdd.mean())


def orientation_change(img, scale=THETA_SCALE):
    """Per-block arctan of the mean positive-Laplacian response.

    The response is divided by `scale` before arctan so the angle stays in
    (-pi/2, pi/2) without saturating.

    Returns (per-block theta raster, theta_avg).
    """
    g = imgcore.convolve3x3(img, imgcore.LAPLACIAN)
    nb_r = g.shape[0] // 3
    nb_c = g.shape[1] // 3
    if nb_r == 0 or nb_c == 0:
        raise ValueError(f"image must be at least 3x3, got {g.shape}")
    block_mean = g[: 3 * nb_r, : 3 * nb_c].reshape(nb_r, 3, nb_c, 3).mean(axis=(1, 3))
    theta = np.arctan(block_mean / scale)
    return theta, float(theta.mean())


def _block_rvr(block):
    lo = int(block.min())
    hi = int(block.max())
    n = block.size
    if lo == hi:
        # constant block: classify by the constant itself
        if lo < 128:
            return float(n)  # all ridge, zero-valley guard divides by 1
        return 0.0
    thr = block.mean()
    valley = int((block >= thr).sum())
    ridge = n - valley
    return ridge / max(valley, 1)


def rvr_features(img, b_s=DEFAULT_BLOCK_SIDE, epsilon=DEFAULT_EPSILON):
    """Mean ridge-to-valley ratio and its epsilon-scaled squared sum.

    Each b_s x b_s block is binarized at its own mean intensity; ridge
    pixels are those below the mean. Degenerate blocks fall back to the
    guard rules in `_block_rvr`.

    Returns (rvr_avg, ssrvr).
    """
    padded = imgcore.pad_to_blocks(img, b_s).astype(np.float64)
    m_r = padded.shape[0] // b_s
    m_c = padded.shape[1] // b_s
    rvrs = np.empty(m_r * m_c)
    i = 0
    for r in range(m_r):
        for c in range(m_c):
            block = padded[r * b_s : (r + 1) * b_s, c * b_s : (c + 1) * b_s]
            rvrs[i] = _block_rvr(block)
            i += 1
    ssrvr = float(((rvrs * epsilon) ** 2).sum())
    return float(rvrs.mean()), ssrvr


def extract_features(img, b_s=DEFAULT_BLOCK_SIDE, epsilon=DEFAULT_EPSILON, theta_scale=THETA_SCALE):
    """Assemble the full six-entry feature vector for one image."""
    mu, sigma2 = mean_variance(img)
    _, bdd_avg = block_directional_difference(img)
    _, theta_avg = orientation_change(img, scale=theta_scale)
    rvr_avg, ssrvr = rvr_features(img, b_s=b_s, epsilon=epsilon)
    return FeatureVector(mu, sigma2, ssrvr, bdd_avg, rvr_avg, theta_avg)
