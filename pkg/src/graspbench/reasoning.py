"""Pluggable decision-makers: oracle, scripted fixture, and remote VLM.

All reasoners satisfy one contract: decide(image, registry, instruction,
history) -> Decision validated against the mark registry. The oracle also
exposes a state-based decide for engines that own ground truth.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol

from PIL import Image

from .errors import ConfigError, FixtureExhausted, ProtocolError, UnknownMark
from .prompting import (
    Decision,
    MarkRegistry,
    build_identify_prompt,
    build_reason_prompt,
    parse_decision,
)
from .remote import EndpointConfig, image_to_base64_png, post_json
from .scene import SceneState, valid_pick_set

log = logging.getLogger(__name__)


class Reasoner(Protocol):
    name: str
    deterministic: bool

    def decide(
        self,
        image: Image.Image,
        registry: MarkRegistry,
        instruction: str,
        history: tuple[Decision, ...] = (),
    ) -> Decision: ...


def oracle_decide(state: SceneState, target: int) -> tuple[int, str, bool]:
    """Perfect reasoning from ground truth: (object id, class, is_target).

    Ties between leaf obstructors break to the lowest object id so oracle
    runs are reproducible.
    """
    picks = valid_pick_set(state, target)
    if picks == {target}:
        return target, state.scene.object(target).class_name, True
    pick = min(picks)
    return pick, state.scene.object(pick).class_name, False


@dataclass
class OracleReasoner:
    """Ground-truth-backed reasoner; needs object hints on the marks."""

    name: str = "oracle"
    deterministic: bool = True
    state: Optional[SceneState] = None
    target: Optional[int] = None

    def bind(self, state: SceneState, target: int) -> None:
        self.state = state
        self.target = target

    def decide(self, image, registry: MarkRegistry, instruction, history=()) -> Decision:
        if self.state is None or self.target is None:
            raise ConfigError("oracle reasoner used without a bound scene state")
        oid, cls, is_target = oracle_decide(self.state, self.target)
        mark = _mark_for_object(registry, oid)
        return Decision(mark_id=mark, class_name=cls, is_target=is_target)


def _mark_for_object(registry: MarkRegistry, oid: int) -> int:
    for mark_id, kp in registry.marks.items():
        if kp.object_hint == oid:
            return mark_id
    raise ConfigError(
        f"object {oid} has no hinted mark; the oracle reasoner requires a "
        "ground-truth localizer"
    )


@dataclass
class ScriptedReasoner:
    """Replays a fixed decision list; single episode owner only."""

    fixture: list[tuple[int, str, bool]]
    name: str = "scripted"
    deterministic: bool = True
    consumed: int = 0

    def decide(self, image, registry: MarkRegistry, instruction, history=()) -> Decision:
        if self.consumed >= len(self.fixture):
            raise FixtureExhausted(
                f"scripted fixture exhausted after {self.consumed} entries"
            )
        mark_id, cls, is_target = self.fixture[self.consumed]
        self.consumed += 1
        registry.require(mark_id)
        return Decision(mark_id=mark_id, class_name=cls, is_target=is_target)


@dataclass
class RemoteReasoner:
    """Chat-completion-backed reasoner (one text part + one image part)."""

    endpoint: EndpointConfig
    name: str = "remote"
    deterministic: bool = False
    audit_log: list[dict] = field(default_factory=list)
    session: object = None

    def decide(self, image, registry: MarkRegistry, instruction, history=()) -> Decision:
        prompt = build_reason_prompt(instruction, registry, history)
        return self._ask(image, registry, prompt)

    def identify(self, image, registry: MarkRegistry, instruction) -> Decision:
        prompt = build_identify_prompt(instruction, registry)
        return self._ask(image, registry, prompt)

    def _ask(self, image, registry: MarkRegistry, prompt: str) -> Decision:
        body = {
            "model": self.endpoint.model,
            "temperature": self.endpoint.temperature,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {
                                "url": "data:image/png;base64," + image_to_base64_png(image)
                            },
                        },
                    ],
                }
            ],
        }
        text = post_json(self.endpoint, body, session=self.session)
        reply = _extract_chat_text(text)
        # raw request/reply kept for audit: temperature 0 does not imply determinism
        self.audit_log.append({"prompt": prompt, "reply": reply})
        return parse_decision(reply, registry)


def _extract_chat_text(raw: str) -> str:
    try:
        doc = json.loads(raw)
        content = doc["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise ProtocolError(f"malformed chat completion reply: {raw[:200]!r}") from exc
    if isinstance(content, list):  # multi-part content: first text part
        for part in content:
            if isinstance(part, dict) and part.get("type") == "text":
                return part["text"]
        raise ProtocolError("chat reply has no text part")
    return str(content)


def gpt_score(
    image,
    registry: MarkRegistry,
    instructions,
    target: int,
    identifier,
) -> tuple[float, list[str]]:
    """Fraction of the 3 instructions whose described object is identified
    as the target; identifier errors count as incorrect and are flagged."""
    if len(instructions) != 3:
        raise ValueError(f"gpt_score needs exactly 3 instructions, got {len(instructions)}")
    target_mark = _mark_for_object(registry, target)
    correct = 0
    flags: list[str] = []
    for i, instruction in enumerate(instructions):
        try:
            decision = identifier(image, registry, instruction)
        except Exception as exc:  # transport/protocol/no-decision all score 0
            flags.append(f"instruction {i}: {type(exc).__name__}: {exc}")
            continue
        if decision.mark_id == target_mark:
            correct += 1
    return correct / 3.0, flags


def oracle_identifier(target_mark: int, class_name: str = ""):
    """Identifier that always answers the target's mark (perfect-reasoner baseline)."""

    def identify(image, registry: MarkRegistry, instruction) -> Decision:
        registry.require(target_mark)
        return Decision(mark_id=target_mark, class_name=class_name, is_target=True)

    return identify
