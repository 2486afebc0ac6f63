"""Scene-file schemas, scenario stratification, and instruction ingestion.

Scene files are standalone JSON documents (see README for the schema); the
instruction file is JSONL keyed by (scene_id, target_id). A ScenarioSet
manifest pins the sampled (scene, target) pairs plus the seed so a run can be
reproduced byte for byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    EmptyInstruction,
    InsufficientPool,
    ParseError,
    UnknownScenario,
    ValidationError,
)
from .masks import decode_rle
from .scene import (
    ALL_CELLS,
    DepthRef,
    Difficulty,
    ImageRef,
    Intrinsics,
    ObjectInstance,
    OcclusionEdge,
    Scene,
    SceneState,
    difficulty_of,
)


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    scene_id: str
    target_id: int
    difficulty: Difficulty
    instructions: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    seed: int
    per_cell_counts: dict[str, int]

    def __post_init__(self):
        actual: dict[str, int] = {}
        for sc in self.scenarios:
            actual[sc.difficulty.cell] = actual.get(sc.difficulty.cell, 0) + 1
        if actual != {k: v for k, v in self.per_cell_counts.items() if v}:
            raise ValidationError(
                f"per_cell_counts {self.per_cell_counts} does not match scenarios {actual}"
            )


def _require(obj: dict, field: str, where: str):
    if field not in obj:
        raise ParseError(f"{where}: missing field '{field}'")
    return obj[field]


def load_scene(path) -> Scene:
    """Load and fully validate one scene file.

    Relative image/depth paths are resolved against the scene file's
    directory so the scene is usable from any working directory.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    scene = scene_from_dict(raw, where=str(path))
    base = path.parent
    image = scene.image
    if not Path(image.path).is_absolute():
        image = ImageRef(str((base / image.path).resolve()), image.width, image.height)
    depth = scene.depth
    if depth is not None and not Path(depth.path).is_absolute():
        depth = DepthRef(str((base / depth.path).resolve()), depth.scale_mm)
    return replace(scene, image=image, depth=depth)


def scene_from_dict(raw: dict, where: str = "<scene>") -> Scene:
    scene_id = _require(raw, "scene_id", where)
    img = _require(raw, "image", where)
    image = ImageRef(
        path=_require(img, "path", where),
        width=int(_require(img, "width", where)),
        height=int(_require(img, "height", where)),
    )
    depth = None
    if raw.get("depth") is not None:
        depth = DepthRef(
            path=_require(raw["depth"], "path", where),
            scale_mm=float(_require(raw["depth"], "scale_mm", where)),
        )
    intrinsics = None
    if raw.get("intrinsics") is not None:
        k = raw["intrinsics"]
        intrinsics = Intrinsics(
            fx=float(k["fx"]), fy=float(k["fy"]), cx=float(k["cx"]), cy=float(k["cy"])
        )

    objects = []
    seen_ids = set()
    for entry in _require(raw, "objects", where):
        oid = int(_require(entry, "id", where))
        if oid < 0:
            raise ValidationError(f"{where}: object id {oid} negative")
        if oid in seen_ids:
            raise ValidationError(f"{where}: ids unique violated (duplicate id {oid})")
        seen_ids.add(oid)
        cls = _require(entry, "class", where)
        if not isinstance(cls, str) or not cls:
            raise ValidationError(f"{where}: object {oid} class must be non-empty")
        cu, cv = _require(entry, "center", where)
        if not (0 <= cu < image.width and 0 <= cv < image.height):
            raise ValidationError(
                f"{where}: object {oid} center ({cu}, {cv}) outside image bounds"
            )
        modal_rle = _require(entry, "modal_mask", where)
        modal = decode_rle(modal_rle)
        if modal.shape != (image.height, image.width):
            raise ParseError(
                f"{where}: object {oid} modal mask size {modal.shape} != image "
                f"({image.height}, {image.width})"
            )
        if not modal.any():
            raise ValidationError(f"{where}: object {oid} modal mask is empty")
        amodal_rle = entry.get("amodal_mask")
        if amodal_rle is not None:
            amodal = decode_rle(amodal_rle)
            if amodal.shape != modal.shape:
                raise ParseError(f"{where}: object {oid} amodal mask size mismatch")
            if np.logical_and(modal, ~amodal).any():
                raise ValidationError(
                    f"{where}: object {oid} amodal mask is not a superset of modal"
                )
        objects.append(
            ObjectInstance(
                id=oid,
                class_name=cls,
                center=(float(cu), float(cv)),
                modal_mask=modal_rle,
                amodal_mask=amodal_rle,
            )
        )

    edges = []
    seen_pairs = set()
    for entry in raw.get("occlusion", []):
        a = int(_require(entry, "occluder", where))
        b = int(_require(entry, "occluded", where))
        frac = float(_require(entry, "fraction", where))
        if a == b:
            raise ValidationError(f"{where}: self-occlusion on object {a}")
        if a not in seen_ids or b not in seen_ids:
            raise ValidationError(f"{where}: occlusion edge ({a}, {b}) references unknown id")
        if (a, b) in seen_pairs:
            raise ValidationError(f"{where}: duplicate occlusion edge ({a}, {b})")
        if not 0.0 <= frac <= 1.0:
            raise ValidationError(f"{where}: occlusion fraction {frac} outside [0, 1]")
        seen_pairs.add((a, b))
        edges.append(OcclusionEdge(a, b, frac))

    scene = Scene(
        scene_id=scene_id,
        image=image,
        objects=tuple(objects),
        edges=tuple(edges),
        depth=depth,
        intrinsics=intrinsics,
    )
    scene.pruned_edges  # validate acyclicity at load time (raises CycleError)
    return scene


def scene_to_dict(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "image": {
            "path": scene.image.path,
            "width": scene.image.width,
            "height": scene.image.height,
        },
        "depth": (
            {"path": scene.depth.path, "scale_mm": scene.depth.scale_mm}
            if scene.depth
            else None
        ),
        "intrinsics": (
            {
                "fx": scene.intrinsics.fx,
                "fy": scene.intrinsics.fy,
                "cx": scene.intrinsics.cx,
                "cy": scene.intrinsics.cy,
            }
            if scene.intrinsics
            else None
        ),
        "objects": [
            {
                "id": o.id,
                "class": o.class_name,
                "center": [o.center[0], o.center[1]],
                "modal_mask": o.modal_mask,
                "amodal_mask": o.amodal_mask,
            }
            for o in scene.objects
        ],
        "occlusion": [
            {"occluder": e.occluder, "occluded": e.occluded, "fraction": e.fraction}
            for e in scene.edges
        ],
    }


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2), encoding="utf-8")


def load_scenes_dir(scenes_dir) -> list[Scene]:
    """Load every *.json scene in a directory, sorted by filename."""
    paths = sorted(Path(scenes_dir).glob("*.json"))
    return [load_scene(p) for p in paths]


def sample_scenarios(
    scenes: list[Scene],
    per_cell: int,
    min_objects: int = 4,
    seed: int = 0,
) -> ScenarioSet:
    """Stratified sampling of (scene, target) pairs, per difficulty cell.

    Eligibility is evaluated on the initial scene state (nothing removed);
    scenes with fewer than min_objects objects are excluded entirely. Draws
    are uniform without replacement within each cell, deterministic per seed.
    """
    if per_cell < 1:
        raise ValueError("per_cell must be >= 1")
    pools: dict[str, list[tuple[str, int]]] = {cell: [] for cell in ALL_CELLS}
    scene_index = {s.scene_id: s for s in scenes}
    for scene in scenes:
        if len(scene.objects) < min_objects:
            continue
        state = SceneState(scene=scene)
        for obj in scene.objects:
            diff = difficulty_of(state, obj.id)
            pools[diff.cell].append((scene.scene_id, obj.id))

    rng = random.Random(seed)
    scenarios: list[Scenario] = []
    for cell in ALL_CELLS:
        pool = sorted(pools[cell])
        if len(pool) < per_cell:
            raise InsufficientPool(cell, len(pool), per_cell)
        for scene_id, target_id in rng.sample(pool, per_cell):
            scene = scene_index[scene_id]
            scenarios.append(
                Scenario(
                    scenario_id=f"{scene_id}:{target_id}",
                    scene_id=scene_id,
                    target_id=target_id,
                    difficulty=Difficulty.from_cell(cell),
                )
            )
    return ScenarioSet(
        scenarios=tuple(scenarios),
        seed=seed,
        per_cell_counts={cell: per_cell for cell in ALL_CELLS},
    )


def read_instruction_rows(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            for field in ("scene_id", "target_id", "instructions"):
                if field not in row:
                    raise ParseError(f"{path}:{lineno}: missing field '{field}'")
            rows.append(row)
    return rows


def attach_instructions(scenario_set: ScenarioSet, path) -> ScenarioSet:
    """Attach free-form instructions to each scenario from a JSONL file.

    Rows must reference known (scene_id, target_id) pairs; scenarios left
    without instructions are reported via the returned set's scenarios
    having empty instruction tuples (callers decide whether that is fatal).
    """
    by_key: dict[tuple[str, int], list[str]] = {}
    known = {(sc.scene_id, sc.target_id) for sc in scenario_set.scenarios}
    for row in read_instruction_rows(path):
        key = (row["scene_id"], int(row["target_id"]))
        if key not in known:
            raise UnknownScenario(f"instruction row for unknown scenario {key}")
        texts = []
        for text in row["instructions"]:
            if not isinstance(text, str) or not text.strip():
                raise EmptyInstruction(f"empty instruction for scenario {key}")
            texts.append(text)
        by_key.setdefault(key, []).extend(texts)
    scenarios = tuple(
        replace(sc, instructions=tuple(by_key.get((sc.scene_id, sc.target_id), ())))
        for sc in scenario_set.scenarios
    )
    return replace(scenario_set, scenarios=scenarios)


def append_instruction_row(path, scene_id: str, target_id: int, text: str) -> dict:
    """Append one annotation row; write is line-complete or absent."""
    if not text.strip():
        raise EmptyInstruction("instruction text is empty")
    row = {"scene_id": scene_id, "target_id": int(target_id), "instructions": [text]}
    line = json.dumps(row, ensure_ascii=False) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
    return row


# --- manifest ---

def save_manifest(scenario_set: ScenarioSet, path) -> None:
    doc = {
        "seed": scenario_set.seed,
        "per_cell_counts": scenario_set.per_cell_counts,
        "scenarios": [
            {
                "scenario_id": sc.scenario_id,
                "scene_id": sc.scene_id,
                "target_id": sc.target_id,
                "difficulty": sc.difficulty.cell,
                "instructions": list(sc.instructions),
            }
            for sc in scenario_set.scenarios
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False), encoding="utf-8")


def load_manifest(path) -> ScenarioSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    scenarios = tuple(
        Scenario(
            scenario_id=entry["scenario_id"],
            scene_id=entry["scene_id"],
            target_id=int(entry["target_id"]),
            difficulty=Difficulty.from_cell(entry["difficulty"]),
            instructions=tuple(entry.get("instructions", ())),
        )
        for entry in doc["scenarios"]
    )
    return ScenarioSet(
        scenarios=scenarios,
        seed=int(doc["seed"]),
        per_cell_counts={k: int(v) for k, v in doc["per_cell_counts"].items()},
    )


def validate_scenario_against_scene(scenario: Scenario, scene: Scene) -> None:
    """Recompute the difficulty cell and compare with the stored one."""
    state = SceneState(scene=scene)
    actual = difficulty_of(state, scenario.target_id)
    if actual != scenario.difficulty:
        raise ValidationError(
            f"scenario {scenario.scenario_id}: stored difficulty "
            f"{scenario.difficulty.cell} != recomputed {actual.cell}"
        )
