"""Scene image and depth loading."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .scene import Scene


def load_image(scene: Scene) -> Image.Image:
    """RGB image for a scene; a flat gray canvas when the file is absent.

    Synthetic graph-only scenes carry sizes but no pixels; rendering on a
    blank canvas keeps mark annotation and episodes runnable for them.
    """
    path = Path(scene.image.path)
    if path.is_file():
        img = Image.open(path).convert("RGB")
        if img.size != (scene.image.width, scene.image.height):
            img = img.resize((scene.image.width, scene.image.height))
        return img
    return Image.new("RGB", (scene.image.width, scene.image.height), (200, 200, 200))


def load_depth(scene: Scene) -> Optional[np.ndarray]:
    """Depth in meters (HxW float array), or None when the scene has no depth."""
    if scene.depth is None:
        return None
    path = Path(scene.depth.path)
    if not path.is_file():
        return None
    raw = np.asarray(Image.open(path), dtype=np.float64)
    return raw * scene.depth.scale_mm / 1000.0
