"""Deterministic toy scenes for demos and tests.

Each toy scene stacks axis-aligned rectangles in layers inside a small bin
image. Occlusion fractions are computed exactly from rectangle geometry
(covered amodal area / amodal area), and edges always point from upper to
lower layers, so the pruned graph is acyclic by construction. Every scene
contributes targets across the difficulty spectrum: a 3-deep stack (Hard at
the bottom), a 2-stack (Medium), and free objects (Easy); "ambiguous"
variants duplicate class names.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import save_scene
from .masks import encode_rle
from .scene import (
    DepthRef,
    ImageRef,
    Intrinsics,
    ObjectInstance,
    OcclusionEdge,
    Scene,
)

IMG_W, IMG_H = 160, 120
# top-down camera, roughly 60 deg FOV at this resolution
TOY_INTRINSICS = Intrinsics(fx=140.0, fy=140.0, cx=80.0, cy=60.0)
BACKGROUND_MM = 700
LAYER_STEP_MM = 25

_PALETTE = [
    (200, 60, 60), (60, 160, 60), (60, 90, 200), (210, 180, 40),
    (170, 70, 190), (70, 190, 190), (230, 130, 40), (120, 120, 120),
]

# (name, x, y, w, h, layer); layers stack bottom-up, higher layer occludes lower
_RECTS = [
    ("bottom_of_stack", 14, 30, 44, 34, 0),
    ("middle_of_stack", 34, 46, 44, 34, 1),
    ("top_of_stack", 54, 62, 44, 34, 2),
    ("pair_lower", 108, 14, 40, 30, 0),
    ("pair_upper", 124, 30, 32, 26, 1),
    ("free_a", 12, 84, 30, 26, 0),
    ("free_b", 112, 78, 34, 30, 0),
]

_PLAIN_CLASSES = ["box", "stapler", "tape", "bottle", "duck", "car", "banana"]
# duplicates: bottom/free_a share "cube", pair_lower/free_b share "car"
_AMBIG_CLASSES = ["cube", "stapler", "tape", "car", "duck", "cube", "car"]


def build_toy_scene(scene_id: str, ambiguous: bool, jitter: tuple[int, int] = (0, 0),
                    image_dir: str = ".") -> tuple[Scene, np.ndarray, np.ndarray]:
    """Construct one toy scene; returns (scene, rgb array, depth array in mm)."""
    dx, dy = jitter
    classes = _AMBIG_CLASSES if ambiguous else _PLAIN_CLASSES

    rects = []
    for name, x, y, w, h, layer in _RECTS:
        x = min(max(x + dx, 0), IMG_W - w - 1)
        y = min(max(y + dy, 0), IMG_H - h - 1)
        rects.append((name, x, y, w, h, layer))

    amodal = []
    for _, x, y, w, h, _ in rects:
        m = np.zeros((IMG_H, IMG_W), dtype=bool)
        m[y : y + h, x : x + w] = True
        amodal.append(m)

    modal = []
    for i, (_, _, _, _, _, layer) in enumerate(rects):
        covered = np.zeros((IMG_H, IMG_W), dtype=bool)
        for j, (_, _, _, _, _, lj) in enumerate(rects):
            if lj > layer:
                covered |= amodal[j]
        modal.append(amodal[i] & ~covered)

    objects = []
    for i, (_, _, _, _, _, _) in enumerate(rects):
        ys, xs = np.nonzero(modal[i])
        cu, cv = xs.mean(), ys.mean()
        # snap the center onto the modal mask (L-shaped remainders)
        k = int(np.argmin((xs - cu) ** 2 + (ys - cv) ** 2))
        objects.append(
            ObjectInstance(
                id=i,
                class_name=classes[i],
                center=(float(xs[k]), float(ys[k])),
                modal_mask=encode_rle(modal[i]),
                amodal_mask=encode_rle(amodal[i]),
            )
        )

    edges = []
    for i, (_, _, _, _, _, li) in enumerate(rects):
        for j, (_, _, _, _, _, lj) in enumerate(rects):
            if li <= lj:
                continue
            overlap = int((amodal[i] & amodal[j]).sum())
            if overlap:
                edges.append(OcclusionEdge(i, j, overlap / int(amodal[j].sum())))

    rgb = np.full((IMG_H, IMG_W, 3), 235, dtype=np.uint8)
    depth = np.full((IMG_H, IMG_W), BACKGROUND_MM, dtype=np.uint16)
    order = sorted(range(len(rects)), key=lambda i: rects[i][5])
    for i in order:
        layer = rects[i][5]
        rgb[amodal[i]] = _PALETTE[i % len(_PALETTE)]
        depth[amodal[i]] = BACKGROUND_MM - LAYER_STEP_MM * (layer + 1)

    scene = Scene(
        scene_id=scene_id,
        image=ImageRef(path=f"{image_dir}/{scene_id}.png", width=IMG_W, height=IMG_H),
        objects=tuple(objects),
        edges=tuple(edges),
        depth=DepthRef(path=f"{image_dir}/{scene_id}_depth.png", scale_mm=1.0),
        intrinsics=TOY_INTRINSICS,
    )
    return scene, rgb, depth


def generate_toy_scenes(out_dir, count: int = 12, seed: int = 0) -> list[Scene]:
    """Write `count` toy scenes (scene JSON + RGB PNG + depth PNG) to out_dir.

    Alternates plain and ambiguous variants with seeded position jitter, so
    every difficulty cell has at least count // 2 eligible targets.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(count):
        ambiguous = i % 2 == 1
        jitter = (int(rng.integers(-6, 7)), int(rng.integers(-6, 7)))
        scene_id = f"toy{i:03d}"
        scene, rgb, depth = build_toy_scene(scene_id, ambiguous, jitter, image_dir=".")
        Image.fromarray(rgb).save(out / f"{scene_id}.png")
        Image.fromarray(depth).save(out / f"{scene_id}_depth.png")
        save_scene(scene, out / f"{scene_id}.json")
        scenes.append(scene)
    return scenes
