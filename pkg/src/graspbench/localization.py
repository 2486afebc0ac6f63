"""Object keypoint producers and localization scoring.

Three localizer kinds share one output shape (a keypoint list): ground truth
(stored centers with object hints), a noise model over ground truth (misses
occluded objects, jitters points, injects duplicates), and a remote pointing
service.
"""

from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from PIL import Image

from .errors import EmptyScene, ProtocolError
from .prompting import Keypoint
from .remote import EndpointConfig, image_to_base64_png, post_json
from .scene import Scene, SceneState

POINTING_INSTRUCTION = "point at all objects in the bin"


def default_dropout(occluded_fraction: float) -> float:
    """Drop probability rises with occlusion: heavily occluded objects get missed."""
    return min(1.0, 2.0 * occluded_fraction)


@dataclass(frozen=True)
class LocalizerConfig:
    kind: str = "gt"  # gt | perturbed | remote
    noise_sigma_px: float = 0.0
    dropout_by_occlusion: Callable[[float], float] = field(default=default_dropout)
    duplicate_rate: float = 0.0
    seed: int = 0
    endpoint: Optional[EndpointConfig] = None


def gt_localize(state: SceneState) -> list[Keypoint]:
    """One keypoint per live object at its stored center, object hint set."""
    live = sorted(state.live)
    if not live:
        raise EmptyScene(f"no live objects in scene {state.scene.scene_id}")
    return [
        Keypoint(point=state.scene.object(oid).center, object_hint=oid) for oid in live
    ]


def occluded_fraction(state: SceneState, oid: int) -> float:
    """Total live occluded-area fraction of an object (raw edges, clamped)."""
    total = sum(
        e.fraction
        for e in state.scene.edges
        if e.occluded == oid and state.is_live(e.occluder)
    )
    return min(1.0, total)


def _state_seed(state: SceneState, seed: int) -> int:
    key = f"{state.scene.scene_id}|{sorted(state.removed)}|{seed}"
    return zlib.crc32(key.encode())


def perturbed_localize(state: SceneState, cfg: LocalizerConfig) -> list[Keypoint]:
    """Simulated pointing: occlusion-dependent misses, Gaussian jitter, duplicates.

    Deterministic per (state, cfg.seed); degenerates to gt_localize when all
    noise parameters are zero.
    """
    if cfg.kind != "perturbed":
        raise ValueError(f"perturbed_localize needs kind='perturbed', got {cfg.kind!r}")
    live = sorted(state.live)
    if not live:
        raise EmptyScene(f"no live objects in scene {state.scene.scene_id}")
    rng = np.random.default_rng(_state_seed(state, cfg.seed))
    w, h = state.scene.image.width, state.scene.image.height
    points: list[Keypoint] = []
    for oid in live:
        drop_p = cfg.dropout_by_occlusion(occluded_fraction(state, oid))
        if rng.random() < drop_p:
            continue
        u, v = state.scene.object(oid).center
        if cfg.noise_sigma_px > 0:
            u += rng.normal(0.0, cfg.noise_sigma_px)
            v += rng.normal(0.0, cfg.noise_sigma_px)
        u = float(np.clip(u, 0, w - 1))
        v = float(np.clip(v, 0, h - 1))
        points.append(Keypoint(point=(u, v), object_hint=oid))
        if cfg.duplicate_rate > 0 and rng.random() < cfg.duplicate_rate:
            du = float(np.clip(u + rng.normal(0.0, 3 + cfg.noise_sigma_px), 0, w - 1))
            dv = float(np.clip(v + rng.normal(0.0, 3 + cfg.noise_sigma_px), 0, h - 1))
            points.append(Keypoint(point=(du, dv), flagged=True))
    return points


_POINT_TAG = re.compile(r"<point\s+x=\"([-\d.]+)\"\s+y=\"([-\d.]+)\"")


def parse_point_reply(text: str) -> list[tuple[float, float]]:
    """Accepts either <point x=".." y=".."> tags or a JSON point list."""
    tags = _POINT_TAG.findall(text)
    if tags:
        return [(float(x), float(y)) for x, y in tags]
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"unparsable pointing reply: {text[:200]!r}") from exc
    if isinstance(doc, dict):
        doc = doc.get("points", doc.get("keypoints"))
    if not isinstance(doc, list):
        raise ProtocolError(f"pointing reply has no point list: {text[:200]!r}")
    points = []
    for item in doc:
        try:
            if isinstance(item, dict):
                points.append((float(item["x"]), float(item["y"])))
            else:
                points.append((float(item[0]), float(item[1])))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad point entry {item!r}") from exc
    return points


def remote_localize(image: Image.Image, cfg: EndpointConfig, session=None) -> list[Keypoint]:
    """Query a pointing service; out-of-bounds points are clamped and flagged."""
    body = {
        "model": cfg.model,
        "image": image_to_base64_png(image),
        "instruction": POINTING_INSTRUCTION,
    }
    last_exc = None
    for _ in range(max(1, cfg.retries)):
        text = post_json(cfg, body, session=session)
        try:
            points = parse_point_reply(text)
            break
        except ProtocolError as exc:
            last_exc = exc
    else:
        raise last_exc
    w, h = image.size
    keypoints = []
    for u, v in points:
        cu = float(np.clip(u, 0, w - 1))
        cv = float(np.clip(v, 0, h - 1))
        keypoints.append(Keypoint(point=(cu, cv), flagged=(cu, cv) != (u, v)))
    return keypoints


def eval_localization(pred: list[Keypoint], scene: Scene) -> dict[str, float]:
    """Point-in-mask matching: AP, AR, F1.

    A prediction matches the object whose modal mask contains it; only the
    first match (reading order) per object counts, extras and out-of-mask
    points are false positives, unmatched objects false negatives.
    """
    masks = {o.id: o.decode_modal() for o in scene.objects}
    matched: set[int] = set()
    tp = fp = 0
    ordered = sorted(pred, key=lambda k: (k.point[1], k.point[0]))
    for k in ordered:
        u, v = int(round(k.point[0])), int(round(k.point[1]))
        hit = None
        for oid, mask in masks.items():
            if 0 <= v < mask.shape[0] and 0 <= u < mask.shape[1] and mask[v, u]:
                hit = oid
                break
        if hit is not None and hit not in matched:
            matched.add(hit)
            tp += 1
        else:
            fp += 1
    fn = len(masks) - len(matched)
    ap = tp / (tp + fp) if tp + fp else 0.0
    ar = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * ap * ar / (ap + ar) if ap + ar else 0.0
    return {"AP": ap, "AR": ar, "F1": f1}
