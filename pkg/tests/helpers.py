"""Shared test builders and brute-force oracles."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from graspbench.masks import encode_rle
from graspbench.scene import (
    ImageRef,
    ObjectInstance,
    OcclusionEdge,
    Scene,
    SceneState,
)

IMG_W, IMG_H = 32, 32


def tiny_scene(n_objects, edges, classes=None, scene_id="s", fractions=None):
    """Scene with n tiny disjoint square masks and the given (occluder, occluded) edges.

    Object ids are 0..n-1 laid out left to right; every edge defaults to
    fraction 0.5 (well above the pruning threshold).
    """
    objs = []
    for i in range(n_objects):
        mask = np.zeros((IMG_H, IMG_W), dtype=bool)
        u = 2 + 3 * (i % 10)
        v = 2 + 3 * (i // 10)
        mask[v : v + 2, u : u + 2] = True
        cls = classes[i] if classes else f"cls{i}"
        objs.append(
            ObjectInstance(
                id=i,
                class_name=cls,
                center=(float(u), float(v)),
                modal_mask=encode_rle(mask),
            )
        )
    fractions = fractions or {}
    edge_objs = tuple(
        OcclusionEdge(a, b, fractions.get((a, b), 0.5)) for a, b in edges
    )
    return Scene(
        scene_id=scene_id,
        image=ImageRef(path=f"{scene_id}.png", width=IMG_W, height=IMG_H),
        objects=tuple(objs),
        edges=edge_objs,
    )


def brute_force_min_steps_and_picks(live, edges, target):
    """Exhaustive enumeration oracle over removal orders.

    Rule: an object is removable only when no live object obstructs it
    (no live in-edge). Returns (minimal removals to reach the target,
    set of first picks that admit a minimal-length order).
    """
    live = frozenset(live)
    edges = tuple((a, b) for a, b in edges if a in live and b in live)

    @lru_cache(maxsize=None)
    def min_steps(removed):
        if target in removed:
            return 0
        remaining = live - removed
        removable = [
            o
            for o in remaining
            if not any(b == o and a in remaining for a, b in edges)
        ]
        if target in removable:
            return 1
        best = None
        for o in removable:
            sub = min_steps(removed | {o})
            if best is None or 1 + sub < best:
                best = 1 + sub
        assert best is not None, "acyclic graph must always have a removable object"
        return best

    total = min_steps(frozenset())
    removable0 = [
        o for o in live if not any(b == o and a in live for a, b in edges)
    ]
    picks = set()
    for o in removable0:
        if o == target:
            if total == 1:
                picks.add(o)
        elif 1 + min_steps(frozenset({o})) == total:
            picks.add(o)
    return total, picks


def brute_force_longest_chain(live, edges, target):
    """Longest path length (edges) ending at target, over live obstruction edges."""
    live = set(live)
    pred = {n: [] for n in live}
    for a, b in edges:
        if a in live and b in live:
            pred[b].append(a)

    @lru_cache(maxsize=None)
    def depth(node):
        ups = pred[node]
        return 0 if not ups else 1 + max(depth(u) for u in ups)

    return depth(target)


def random_dag_scene(rng, scene_id="rand", max_objects=6, duplicate_classes=False):
    """Random acyclic occlusion scene: edges only point from higher to lower ids."""
    n = int(rng.integers(2, max_objects + 1))
    edges = []
    for b in range(n - 1):
        for a in range(b + 1, n):
            if rng.random() < 0.4:
                edges.append((a, b))
    classes = None
    if duplicate_classes:
        pool = [f"cls{i}" for i in range(max(1, n - 1))]
        classes = [pool[int(rng.integers(0, len(pool)))] for _ in range(n)]
    return tiny_scene(n, edges, classes=classes, scene_id=scene_id)


def initial_state(scene):
    return SceneState(scene=scene)
