"""Hybrid fingerprint orientation map generation.

Pipeline: pick the best `standard` fingerprints, binarize, align the stack
by quarter-turn hill climbing on the common-pixel count, render per-block
ridge orientation fields, refine blocks the same way, and join quadrants
from four distinct maps into the final hybrid map. Scored with shifted
SSIM.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import imgcore

__all__ = [
    "STAGE_NAMES",
    "FingerStack",
    "OrientationMap",
    "Hfom",
    "HfomConfig",
    "select_best_standard",
    "common_pixel_count",
    "min_rotate_max_flow",
    "sub_blocks",
    "subblock_orientation",
    "block_orientation_field",
    "orientation_map",
    "refine_blocks",
    "assemble_hfom",
    "ssim",
    "hfom_pipeline",
]

ROTATIONS = (90, 180, 270)
ORIENTATIONS = (0, 45, 90)
MIN_LINE_PIXELS = 2

STAGE_NAMES = (
    "No Change",
    "Binarization",
    "Rotation",
    "Ridge Orientation Fields Generation",
    "Orientation Map Modification at Block Level",
)


@dataclass
class FingerStack:
    """Equally sized image stack with per-image applied rotation angles."""

    images: list
    angles: list

    def __post_init__(self):
        if not self.images:
            raise ValueError("empty stack")
        shape = self.images[0].shape
        for img in self.images:
            if img.shape != shape:
                raise ValueError("stack images must share dimensions")
        if len(self.angles) != len(self.images):
            raise ValueError("one rotation angle per image required")

    def p_count(self):
        return common_pixel_count(self.images)


@dataclass
class OrientationMap:
    """Rendered per-block ridge orientation field for one fingerprint."""

    image: np.ndarray
    angles: np.ndarray  # per-block angle in {0, 45, 90}; -1 for none
    b_s: int


@dataclass
class Hfom:
    image: np.ndarray
    provenance: list  # (quadrant index 1..4, source map index)


@dataclass
class HfomConfig:
    n: int = 10
    threshold: int = 127
    b_s: int = 15
    assignment_seed: int = None


def select_best_standard(pool, n):
    """First n pool images after ascending lexicographic sort by (mu, sigma2, rvr_avg).

    `pool` holds (source_id, image, FeatureVector) triples already labeled
    `standard`.
    """
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    if len(pool) < n:
        raise ValueError(f"insufficient standard fingerprints: {len(pool)} < {n}")
    ranked = sorted(pool, key=lambda item: (item[2].mu, item[2].sigma2, item[2].rvr_avg))
    return ranked[:n]


def common_pixel_count(images):
    """Number of positions where every image agrees with image 0."""
    if not images:
        raise ValueError("empty stack")
    ref = images[0]
    agree = np.ones(ref.shape, dtype=bool)
    for img in images[1:]:
        if img.shape != ref.shape:
            raise ValueError("stack images must share dimensions")
        agree &= img == ref
    return int(agree.sum())


def min_rotate_max_flow(stack):
    """Greedy quarter-turn alignment maximizing the common-pixel count.

    Image 0 stays fixed. Each pass tries rotating every other image by
    90/180/270 degrees and keeps the rotation only on a strict count
    increase (smallest angle on ties); passes repeat until stable.
    """
    images = [imgcore.check_binary(img) for img in stack.images]
    angles = list(stack.angles)
    current = common_pixel_count(images)
    changed = True
    while changed:
        changed = False
        for i in range(1, len(images)):
            best_angle, best_count = None, current
            for angle in ROTATIONS:
                trial = imgcore.rotate_quarter(images[i], angle)
                count = common_pixel_count(images[:i] + [trial] + images[i + 1 :])
                if count > best_count:
                    best_angle, best_count = angle, count
            if best_angle is not None:
                images[i] = imgcore.rotate_quarter(images[i], best_angle)
                angles[i] = (angles[i] + best_angle) % 360
                current = best_count
                changed = True
    return FingerStack(images, angles)


def sub_blocks(block):
    """Four overlapping quadrant sub-blocks sharing the block's center pixel.

    Returns a list of (sub-block array, reference-corner position), where
    the reference corner is the parent block's center.
    """
    b_s = block.shape[0]
    if block.shape[0] != block.shape[1] or b_s % 2 == 0:
        raise ValueError(f"block must be square with odd side, got {block.shape}")
    h = (b_s + 1) // 2
    return [
        (block[:h, :h], (h - 1, h - 1)),
        (block[:h, h - 1 :], (h - 1, 0)),
        (block[h - 1 :, :h], (0, h - 1)),
        (block[h - 1 :, h - 1 :], (0, 0)),
    ]


def subblock_orientation(q, ref_pos):
    """Dominant orientation in {0, 45, 90} of black pixels through the reference corner.

    The sub-block is rotated so the reference corner sits top-left, black
    pixels are counted along the top row, main diagonal, and left column,
    and the winning angle is mapped back through the inverse rotation.
    Returns None when fewer than 2 black pixels lie on every line.
    """
    q = imgcore.check_binary(q)
    h = q.shape[0]
    corner_to_k = {(0, 0): 0, (0, h - 1): 1, (h - 1, h - 1): 2, (h - 1, 0): 3}
    if ref_pos not in corner_to_k:
        raise ValueError(f"reference position {ref_pos} is not a corner of {q.shape}")
    k = corner_to_k[ref_pos]
    canon = np.rot90(q, k=k)
    black = canon == 0
    counts = {
        0: int(black[0, :].sum()),
        45: int(black[np.arange(h), np.arange(h)].sum()),
        90: int(black[:, 0].sum()),
    }
    if k % 2 == 1:  # quarter turns swap horizontal and vertical
        counts = {0: counts[90], 45: counts[45], 90: counts[0]}
    best = max(counts.values())
    if best < MIN_LINE_PIXELS:
        return None
    for angle in ORIENTATIONS:
        if counts[angle] == best:
            return angle
    raise AssertionError("unreachable")


def _render_block(b_s, angle):
    block = np.full((b_s, b_s), 255, dtype=np.uint8)
    if angle is None:
        return block
    c = b_s // 2
    if angle == 0:
        block[c, :] = 0
    elif angle == 90:
        block[:, c] = 0
    elif angle == 45:
        for d in range(-c, c + 1):
            block[c - d, c + d] = 0
    else:
        raise ValueError(f"unsupported orientation {angle}")
    return block


def block_orientation_field(block):
    """Majority vote over the sub-block orientations, rendered as a line.

    Ties pick the smaller angle; with no votes the block stays blank.
    Returns (rendered block, chosen angle or None).
    """
    votes = {}
    for q, ref in sub_blocks(block):
        angle = subblock_orientation(q, ref)
        if angle is not None:
            votes[angle] = votes.get(angle, 0) + 1
    if not votes:
        return _render_block(block.shape[0], None), None
    best = max(votes.values())
    chosen = min(a for a, v in votes.items() if v == best)
    return _render_block(block.shape[0], chosen), chosen


def orientation_map(img, b_s):
    """Per-block orientation rendering of a padded, binarized image."""
    img = imgcore.check_binary(img)
    if img.shape[0] % b_s or img.shape[1] % b_s:
        raise ValueError(f"image {img.shape} is not padded to multiples of {b_s}")
    m_r = img.shape[0] // b_s
    m_c = img.shape[1] // b_s
    out = np.empty_like(img)
    angles = np.full((m_r, m_c), -1, dtype=np.int16)
    for k in range(m_r):
        for l in range(m_c):
            block = img[k * b_s : (k + 1) * b_s, l * b_s : (l + 1) * b_s]
            rendered, angle = block_orientation_field(block)
            out[k * b_s : (k + 1) * b_s, l * b_s : (l + 1) * b_s] = rendered
            if angle is not None:
                angles[k, l] = angle
    return OrientationMap(out, angles, b_s)


def _rotated_angle(code, rotation):
    if code < 0 or rotation == 180:
        return code
    if code == 45:
        return 45
    return 90 - code  # quarter turns swap 0 and 90


def refine_blocks(maps):
    """Quarter-turn hill climb on individual rendered blocks.

    Map 0 is the fixed reference; a block rotation in another map is kept
    only when it strictly increases the stack-wide common-pixel count
    (smallest angle on ties). Passes repeat until stable.
    """
    if not maps:
        raise ValueError("empty map stack")
    b_s = maps[0].b_s
    grid = maps[0].angles.shape
    for m in maps:
        if m.b_s != b_s or m.angles.shape != grid or m.image.shape != maps[0].image.shape:
            raise ValueError("maps must share block grid and dimensions")
    images = [m.image.copy() for m in maps]
    angles = [m.angles.copy() for m in maps]
    m_r, m_c = grid
    changed = True
    while changed:
        changed = False
        for k in range(m_r):
            for l in range(m_c):
                sl = (slice(k * b_s, (k + 1) * b_s), slice(l * b_s, (l + 1) * b_s))
                for c in range(1, len(images)):
                    regions = [img[sl] for img in images]
                    base = common_pixel_count(regions)
                    best_rot, best_count = None, base
                    for rot in ROTATIONS:
                        trial = np.rot90(images[c][sl], k=rot // 90)
                        count = common_pixel_count(
                            regions[:c] + [trial] + regions[c + 1 :]
                        )
                        if count > best_count:
                            best_rot, best_count = rot, count
                    if best_rot is not None:
                        images[c][sl] = np.rot90(images[c][sl], k=best_rot // 90)
                        angles[c][k, l] = _rotated_angle(int(angles[c][k, l]), best_rot)
                        changed = True
    return [OrientationMap(img, ang, b_s) for img, ang in zip(images, angles)]


def assemble_hfom(maps, assignment_seed=None):
    """Join quadrants of four distinct orientation maps into the hybrid map.

    Quadrant order is TL, TR, BL, BR; sources are a seeded permutation of
    the first four maps (identity without a seed). Odd-sided maps receive
    one extra white row and column on the bottom/right first.
    """
    if len(maps) < 4:
        raise ValueError(f"need at least 4 orientation maps, got {len(maps)}")
    side = maps[0].image.shape[0]
    imgs = []
    for m in maps:
        img = m.image
        if img.shape != (side, side):
            raise ValueError("maps must share identical square dimensions")
        if side % 2:
            img = np.pad(img, ((0, 1), (0, 1)), constant_values=255)
        imgs.append(img)
    half = imgs[0].shape[0] // 2
    quads = (
        (slice(0, half), slice(0, half)),
        (slice(0, half), slice(half, 2 * half)),
        (slice(half, 2 * half), slice(0, half)),
        (slice(half, 2 * half), slice(half, 2 * half)),
    )
    if assignment_seed is None:
        sources = [0, 1, 2, 3]
    else:
        sources = np.random.default_rng(assignment_seed).permutation(4).tolist()
    h = np.full_like(imgs[0], 255)
    provenance = []
    for iota, (sl, z) in enumerate(zip(quads, sources), start=1):
        h[sl] = imgs[z][sl]
        provenance.append((iota, z))
    return Hfom(h, provenance)


def ssim(a, b, win=7):
    """Structural similarity over sliding uniform windows, shifted into [0, 2].

    Uses the 8-bit dynamic-range constants C1 = (0.01*255)^2 and
    C2 = (0.03*255)^2; the raw mean score gets +1.
    """
    a = imgcore.check_gray(a).astype(np.float64)
    b = imgcore.check_gray(b).astype(np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    mu_a = ndimage.uniform_filter(a, win)
    mu_b = ndimage.uniform_filter(b, win)
    var_a = ndimage.uniform_filter(a * a, win) - mu_a**2
    var_b = ndimage.uniform_filter(b * b, win) - mu_b**2
    cov = ndimage.uniform_filter(a * b, win) - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    )
    r = win // 2
    if score.shape[0] > 2 * r and score.shape[1] > 2 * r:
        score = score[r:-r, r:-r]  # keep fully valid windows only
    return float(score.mean()) + 1.0


@dataclass
class PipelineResult:
    hfom: Hfom
    stages: list  # (stage name, common-pixel count) in execution order
    stack: FingerStack
    maps: list


def hfom_pipeline(pool, cfg=None):
    """Full hybrid-map generation from a pool of `standard` fingerprints.

    `pool` holds (source_id, image, FeatureVector) triples of identically
    sized square grayscale images. Records the common-pixel count after
    every stage.
    """
    cfg = cfg or HfomConfig()
    chosen = select_best_standard(pool, cfg.n)
    raw = [item[1] for item in chosen]
    stages = [(STAGE_NAMES[0], common_pixel_count(raw))]
    binary = [imgcore.binarize(img, cfg.threshold) for img in raw]
    stack = FingerStack(binary, [0] * len(binary))
    stages.append((STAGE_NAMES[1], stack.p_count()))
    stack = min_rotate_max_flow(stack)
    stages.append((STAGE_NAMES[2], stack.p_count()))
    maps = [
        orientation_map(imgcore.pad_to_blocks(img, cfg.b_s), cfg.b_s)
        for img in stack.images
    ]
    stages.append((STAGE_NAMES[3], common_pixel_count([m.image for m in maps])))
    maps = refine_blocks(maps)
    stages.append((STAGE_NAMES[4], common_pixel_count([m.image for m in maps])))
    hybrid = assemble_hfom(maps, cfg.assignment_seed)
    return PipelineResult(hybrid, stages, stack, maps)
