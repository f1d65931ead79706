"""Synthetic fingerprint-like test images: oriented sinusoidal ridge patterns.

A desk-scale stand-in for a real fingerprint corpus. `standard` images are
mid-contrast continuous ridges, `dry` images lose ridge segments to white
gaps, and `wet` images are darker, low-contrast prints with filled
valleys.
"""

import csv
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import imgcore
from .features import LABELS

__all__ = ["synth_image", "synth_dataset"]


def _ridge_wave(side, rng):
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    phi = rng.uniform(0, np.pi)
    period = rng.uniform(7.0, 10.0)
    phase = rng.uniform(0, 2 * np.pi)
    curve = rng.uniform(-1.5e-4, 1.5e-4)
    u = xx * np.cos(phi) + yy * np.sin(phi)
    v = -xx * np.sin(phi) + yy * np.cos(phi)
    return np.sin(2 * np.pi * u / period + curve * v * v + phase)


def synth_image(label, side, rng):
    """One seeded synthetic fingerprint of the requested class."""
    if label not in LABELS:
        raise ValueError(f"unknown label {label!r}")
    wave = _ridge_wave(side, rng)
    noise = rng.normal(0, 6.0, (side, side))
    if label == "standard":
        img = 127.5 - 110.0 * wave + noise
    elif label == "wet":
        # thickened dark ridges, valleys filled: darker and lower contrast
        img = 80.0 - 55.0 * np.tanh(2.0 * (wave + 0.3)) + noise
    else:  # dry: vanishing ridge segments
        img = 127.5 - 110.0 * wave + noise
        blobs = ndimage.gaussian_filter(rng.normal(0, 1.0, (side, side)), 6.0)
        img = np.where(blobs > 0.05, np.maximum(img, 225.0), img)
    return np.clip(img, 0, 255).astype(np.uint8)


def synth_dataset(out_dir, counts, seed=0, side=160):
    """Write seeded synthetic images plus a `manifest.csv` into out_dir.

    `counts` maps label -> image count. Returns the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for label in LABELS:
        for i in range(counts.get(label, 0)):
            name = f"{label}_{i:04d}.png"
            imgcore.save_image(synth_image(label, side, rng), out_dir / name)
            rows.append((name, label))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        writer.writerows(rows)
    return manifest
