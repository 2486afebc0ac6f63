"""Mark-based visual prompting and reasoner reply parsing.

Numbered markers are drawn at object keypoints so a reasoner can answer with
a mark id instead of free-form localization. Prompts are plain deterministic
text; replies must carry one JSON decision object (first balanced object in
the reply is extracted, nothing fancier).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from PIL import Image, ImageDraw, ImageFont

from .errors import NoDecision, OutOfBounds, UnknownMark


@dataclass(frozen=True)
class Keypoint:
    point: tuple[float, float]  # (u, v) pixels
    object_hint: Optional[int] = None  # known object id (GT localizers only)
    mark_id: int = 0  # assigned by assign_marks
    flagged: bool = False  # e.g. clamped from out-of-bounds


@dataclass(frozen=True)
class Decision:
    mark_id: int
    class_name: str
    is_target: bool
    rationale: str = ""


@dataclass(frozen=True)
class MarkStyle:
    radius: int = 14
    fill: tuple[int, int, int] = (40, 40, 40)
    outline: tuple[int, int, int] = (255, 255, 255)
    text: tuple[int, int, int] = (255, 255, 255)


@dataclass
class MarkRegistry:
    """Bijection mark_id -> keypoint, plus rendering audit metadata."""

    marks: dict[int, Keypoint] = field(default_factory=dict)
    collisions: list[tuple[int, int]] = field(default_factory=list)

    def require(self, mark_id: int) -> Keypoint:
        if mark_id not in self.marks:
            raise UnknownMark(f"mark {mark_id} not in registry (have {sorted(self.marks)})")
        return self.marks[mark_id]


def assign_marks(keypoints: list[Keypoint]) -> list[Keypoint]:
    """Number keypoints 1..K in reading order (row-major by point).

    Reading order keeps numbering stable across re-localizations of an
    unchanged layout, unlike localizer output order.
    """
    ordered = sorted(keypoints, key=lambda k: (k.point[1], k.point[0]))
    return [
        Keypoint(point=k.point, object_hint=k.object_hint, mark_id=i + 1, flagged=k.flagged)
        for i, k in enumerate(ordered)
    ]


def render_marks(
    image: Image.Image,
    keypoints: list[Keypoint],
    style: MarkStyle = MarkStyle(),
) -> tuple[Image.Image, MarkRegistry]:
    """Draw numbered markers on a copy of the raw scene image.

    Overlapping markers are both drawn, never jittered (a moved mark would
    desynchronize from its keypoint); collisions are recorded in the
    registry for audit.
    """
    if not keypoints:
        raise ValueError("keypoints must be non-empty")
    w, h = image.size
    for k in keypoints:
        u, v = k.point
        if not (0 <= u < w and 0 <= v < h):
            raise OutOfBounds(f"keypoint {k.point} outside {w}x{h} image")

    marked = assign_marks(keypoints)
    registry = MarkRegistry(marks={k.mark_id: k for k in marked})
    r = style.radius
    for i, a in enumerate(marked):
        for b in marked[i + 1 :]:
            du = a.point[0] - b.point[0]
            dv = a.point[1] - b.point[1]
            if du * du + dv * dv < r * r:
                registry.collisions.append((a.mark_id, b.mark_id))

    out = image.copy()
    draw = ImageDraw.Draw(out)
    font = ImageFont.load_default()
    for k in marked:
        u, v = k.point
        draw.ellipse(
            [u - r, v - r, u + r, v + r],
            fill=style.fill,
            outline=style.outline,
            width=2,
        )
        label = str(k.mark_id)
        left, top, right, bottom = draw.textbbox((0, 0), label, font=font)
        tw, th = right - left, bottom - top
        draw.text((u - tw / 2 - left, v - th / 2 - top), label, fill=style.text, font=font)
    return out, registry


_SETUP = "Setup: a robotic arm with a parallel gripper picks objects from a cluttered bin, viewed top-down."
_OBJECTIVE = "Objective: grasp the target object without obstruction, removing obstructing objects first when needed."
_LOGIC = "Reasoning logic: determine actions based on obstructions; an object resting on top of another must be removed before the one beneath can be grasped."
_ACTIONS = "Actions: return the target's mark if it is free to grasp, otherwise identify the top obstructor to remove next."
_FORMAT = (
    'Respond with exactly one JSON object: {"id": <mark number>, "class": "<object class>", '
    '"is_target": <true if the chosen object is the requested target>, "rationale": "<short reason>"}.'
)


def build_reason_prompt(
    instruction: str,
    registry: MarkRegistry,
    history: list[Decision] | tuple[Decision, ...] = (),
) -> str:
    """Contextualized grasp-reasoning prompt: setup, objective, logic, actions,
    then the instruction verbatim, the response contract, and a history digest."""
    if not instruction:
        raise ValueError("instruction must be non-empty")
    lines = [
        _SETUP,
        _OBJECTIVE,
        _LOGIC,
        _ACTIONS,
        f"Marks on the image: {', '.join(str(m) for m in sorted(registry.marks))}.",
        f"User instruction: {json.dumps(instruction, ensure_ascii=False)}",
        _FORMAT,
    ]
    if history:
        lines.append("Previously grasped this episode:")
        for i, d in enumerate(history, 1):
            lines.append(
                f"  step {i}: mark {d.mark_id} ({d.class_name}), "
                f"{'the target' if d.is_target else 'an obstructor'}"
            )
    return "\n".join(lines)


def build_identify_prompt(instruction: str, registry: MarkRegistry) -> str:
    """Identification-only prompt: which mark is the described object.

    No obstruction logic; used for instruction-interpretability scoring.
    """
    if not instruction:
        raise ValueError("instruction must be non-empty")
    lines = [
        "The image shows a bin of objects annotated with numbered marks.",
        f"Marks on the image: {', '.join(str(m) for m in sorted(registry.marks))}.",
        f"Which mark is the object described by: {json.dumps(instruction, ensure_ascii=False)}",
        _FORMAT,
    ]
    return "\n".join(lines)


def parse_decision(reply: str, registry: MarkRegistry) -> Decision:
    """Extract the first well-formed decision object from a reply.

    A single repair pass only: scan for the first balanced JSON object with
    the required fields. Free-text heuristics are deliberately absent so
    failure modes stay deterministic.
    """
    decoder = json.JSONDecoder()
    pos = reply.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(reply, pos)
        except json.JSONDecodeError:
            pos = reply.find("{", pos + 1)
            continue
        if (
            isinstance(obj, dict)
            and isinstance(obj.get("id"), int)
            and not isinstance(obj.get("id"), bool)
            and isinstance(obj.get("class"), str)
            and isinstance(obj.get("is_target"), bool)
        ):
            registry.require(obj["id"])
            return Decision(
                mark_id=obj["id"],
                class_name=obj["class"],
                is_target=obj["is_target"],
                rationale=str(obj.get("rationale", "")),
            )
        pos = reply.find("{", pos + 1)
    raise NoDecision(f"no parsable decision in reply: {reply[:200]!r}")
