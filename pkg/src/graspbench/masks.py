"""Binary mask run-length encoding and IoU.

Masks travel as column-major (Fortran order) run lengths. The counts string
is a space-separated list of decimal run lengths, always starting with the
run of zeros (possibly "0" when the mask begins with a set pixel). This
encoding is normative for scene files: a byte-for-byte round trip is part of
the file contract.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, ParseError


def encode_rle(mask: np.ndarray) -> dict:
    """Encode a binary HxW mask as {"size": [h, w], "counts": str}."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    h, w = mask.shape
    flat = mask.flatten(order="F").astype(np.int8)
    if flat.size == 0:
        return {"size": [h, w], "counts": ""}
    # run boundaries
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return {"size": [h, w], "counts": " ".join(str(r) for r in runs)}


def decode_rle(rle: dict) -> np.ndarray:
    """Decode {"size": [h, w], "counts": str} back to a boolean HxW mask."""
    try:
        h, w = int(rle["size"][0]), int(rle["size"][1])
        counts_str = rle["counts"]
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"malformed RLE mask: {exc}") from exc
    if h < 0 or w < 0:
        raise ParseError(f"negative mask size {h}x{w}")
    runs = [int(tok) for tok in counts_str.split()] if counts_str else []
    if any(r < 0 for r in runs):
        raise ParseError("negative run length in mask counts")
    total = sum(runs)
    if total != h * w:
        raise ParseError(f"mask counts sum to {total}, expected {h * w} for size {h}x{w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape((h, w), order="F")


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; 0.0 when both empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    inter = np.logical_and(a, b).sum()
    return float(inter / union)
