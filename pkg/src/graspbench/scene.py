"""Scenes, occlusion graphs, and ground-truth grasp ordering.

A scene is a single top-down view of a cluttered bin: object instances with
masks plus a directed occlusion graph. After pruning the weak edges, every
surviving edge (occluder -> occluded) is treated as a hard obstruction: the
occluder must be removed before the occluded object can be grasped.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import CycleError, UnknownTarget, ValidationError
from .masks import decode_rle

PRUNE_THRESHOLD_DEFAULT = 0.01  # occluded-area fraction below which an edge is noise


class Level(str, Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


@dataclass(frozen=True)
class Difficulty:
    level: Level
    ambiguous: bool

    @property
    def cell(self) -> str:
        return f"{self.level.value}/{'w' if self.ambiguous else 'wo'}-amb"

    @staticmethod
    def from_cell(cell: str) -> "Difficulty":
        level_part, amb_part = cell.split("/")
        return Difficulty(Level(level_part), amb_part == "w-amb")


ALL_CELLS = tuple(
    Difficulty(level, amb).cell for level in Level for amb in (False, True)
)


@dataclass(frozen=True)
class ImageRef:
    path: str
    width: int
    height: int


@dataclass(frozen=True)
class DepthRef:
    path: str
    scale_mm: float


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    class_name: str
    center: tuple[float, float]
    modal_mask: dict  # RLE {"size": [h, w], "counts": str}
    amodal_mask: Optional[dict] = None

    def decode_modal(self) -> np.ndarray:
        return decode_rle(self.modal_mask)

    def decode_amodal(self) -> Optional[np.ndarray]:
        return decode_rle(self.amodal_mask) if self.amodal_mask is not None else None


@dataclass(frozen=True)
class OcclusionEdge:
    occluder: int
    occluded: int
    fraction: float  # of the occluded object's amodal area covered by the occluder


@dataclass(frozen=True)
class Scene:
    scene_id: str
    image: ImageRef
    objects: tuple[ObjectInstance, ...]
    edges: tuple[OcclusionEdge, ...]
    depth: Optional[DepthRef] = None
    intrinsics: Optional[Intrinsics] = None

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValidationError(f"scene {self.scene_id}: ids unique violated")

    @cached_property
    def by_id(self) -> dict[int, ObjectInstance]:
        return {o.id: o for o in self.objects}

    def object(self, oid: int) -> ObjectInstance:
        try:
            return self.by_id[oid]
        except KeyError:
            raise UnknownTarget(f"scene {self.scene_id}: no object {oid}") from None

    @cached_property
    def pruned_edges(self) -> tuple[OcclusionEdge, ...]:
        return prune_occlusion_graph(self, PRUNE_THRESHOLD_DEFAULT)


@dataclass(frozen=True)
class SceneState:
    """Immutable view of a scene with some objects already removed."""

    scene: Scene
    removed: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        unknown = self.removed - set(self.scene.by_id)
        if unknown:
            raise ValidationError(f"removed ids not in scene: {sorted(unknown)}")

    @property
    def live(self) -> frozenset[int]:
        return frozenset(self.scene.by_id) - self.removed

    def is_live(self, oid: int) -> bool:
        return oid in self.scene.by_id and oid not in self.removed

    def require_live(self, oid: int) -> None:
        if not self.is_live(oid):
            raise UnknownTarget(f"object {oid} is not live in scene {self.scene.scene_id}")

    def live_edges(self) -> list[OcclusionEdge]:
        """Pruned edges between live objects only."""
        return [
            e
            for e in self.scene.pruned_edges
            if e.occluder not in self.removed and e.occluded not in self.removed
        ]

    def obstructors_of(self, oid: int) -> set[int]:
        """Direct live obstructors (pruned in-edges) of an object."""
        return {e.occluder for e in self.live_edges() if e.occluded == oid}


def prune_occlusion_graph(
    scene: Scene, threshold: float = PRUNE_THRESHOLD_DEFAULT
) -> tuple[OcclusionEdge, ...]:
    """Drop occlusion edges whose fraction is strictly below the threshold.

    The surviving graph must be acyclic; a cycle is a data error and raised
    as CycleError with one offending cycle.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    kept = tuple(e for e in scene.edges if e.fraction >= threshold)
    cycle = _find_cycle({o.id for o in scene.objects}, kept)
    if cycle is not None:
        raise CycleError(cycle)
    return kept


def _find_cycle(nodes: set[int], edges) -> Optional[list[int]]:
    """Iterative DFS cycle detection; returns one cycle's node list or None."""
    succ: dict[int, list[int]] = {n: [] for n in nodes}
    for e in edges:
        succ[e.occluder].append(e.occluded)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}
    parent: dict[int, int] = {}
    for root in sorted(nodes):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    parent[nxt] = node
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if color[nxt] == GRAY:
                    cycle = [nxt, node]
                    cur = node
                    while cur != nxt:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    return cycle[:-1]
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


def obstructor_closure(state: SceneState, target: int) -> set[int]:
    """All live objects with a directed obstruction path to the target."""
    state.require_live(target)
    pred: dict[int, set[int]] = {}
    for e in state.live_edges():
        pred.setdefault(e.occluded, set()).add(e.occluder)
    closure: set[int] = set()
    frontier = [target]
    while frontier:
        node = frontier.pop()
        for up in pred.get(node, ()):
            if up not in closure:
                closure.add(up)
                frontier.append(up)
    closure.discard(target)
    return closure


def valid_pick_set(state: SceneState, target: int) -> set[int]:
    """The ground-truth correct next grasps.

    The target itself when free, otherwise the closure members that are
    themselves unobstructed. Non-empty for any acyclic pruned graph.
    """
    closure = obstructor_closure(state, target)
    if not closure:
        return {target}
    return {oid for oid in closure if not state.obstructors_of(oid)}


def minimal_steps(state: SceneState, target: int) -> int:
    """Fewest grasps to extract the target: every transitive obstructor, then it."""
    return len(obstructor_closure(state, target)) + 1


def classify_difficulty(state: SceneState, target: int) -> Level:
    """Difficulty by obstruction chain depth above the target.

    Depth is the longest directed path (in edges) from a leaf obstructor down
    to the target within the closure subgraph: 0 -> Easy, 1 -> Medium,
    >= 2 -> Hard.
    """
    closure = obstructor_closure(state, target)
    if not closure:
        return Level.EASY
    sub = closure | {target}
    pred: dict[int, set[int]] = {n: set() for n in sub}
    for e in state.live_edges():
        if e.occluder in sub and e.occluded in sub:
            pred[e.occluded].add(e.occluder)
    depth_cache: dict[int, int] = {}

    def depth(node: int) -> int:
        # longest path from any source (leaf obstructor) down to `node`
        if node in depth_cache:
            return depth_cache[node]
        ups = pred[node]
        d = 0 if not ups else 1 + max(depth(u) for u in ups)
        depth_cache[node] = d
        return d

    d = depth(target)
    if d == 1:
        return Level.MEDIUM
    return Level.HARD


def is_ambiguous(scene: Scene, target: int) -> bool:
    """True when at least two scene objects share the target's class."""
    cls = scene.object(target).class_name
    return sum(1 for o in scene.objects if o.class_name == cls) >= 2


def difficulty_of(state: SceneState, target: int) -> Difficulty:
    return Difficulty(classify_difficulty(state, target), is_ambiguous(state.scene, target))


def remove_object(state: SceneState, oid: int) -> SceneState:
    """Value-semantics removal: returns a new state, input untouched."""
    state.require_live(oid)
    return replace(state, removed=state.removed | {oid})
