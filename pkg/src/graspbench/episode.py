"""Per-step episode loop and batch runner.

Each step: localize -> render marks -> reason -> segment -> pose -> execute.
Failures are classified per stage (S: wrong mask, P: grasp point on a wrong
object, M: object dropped during motion) and the stop setting decides which
of them terminate the episode. Scene evolution is removal-only; whatever
object the grasp point physically lands on is the one removed when the
motion succeeds.
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, GraspBenchError
from .geometry import GraspPose, grasp_proxy
from .imaging import load_depth, load_image
from .localization import LocalizerConfig, gt_localize, perturbed_localize, remote_localize
from .masks import encode_rle, mask_iou
from .prompting import Decision, MarkStyle, render_marks
from .scene import Scene, SceneState, minimal_steps, remove_object, valid_pick_set

RESULTS_SCHEMA_VERSION = 1


class StopSetting(str, Enum):
    """Which failure classes terminate an episode."""

    SPM = "spm"
    PM = "pm"
    P = "p"

    @property
    def tracked(self) -> frozenset[str]:
        return {
            StopSetting.SPM: frozenset({"S", "P", "M"}),
            StopSetting.PM: frozenset({"P", "M"}),
            StopSetting.P: frozenset({"P"}),
        }[self]


@dataclass(frozen=True)
class ExecutionModel:
    """Stand-in for physical grasp execution: drops with probability q."""

    motion_failure_prob: float = 0.0


@dataclass
class StepOutcome:
    step_index: int  # 1-based
    keypoints: list
    decision: Optional[Decision]
    decision_error: Optional[str]
    resolved_id: Optional[int]
    class_mismatch: bool
    predicted_mask: Optional[dict]  # RLE
    mask_ok: Optional[bool]  # IoU >= 0.5 vs some valid pick
    pose: Optional[GraspPose]
    gt_valid_set: list[int]
    failure: Optional[str]  # None | "S" | "P" | "M"
    grasped_id: Optional[int]


@dataclass
class EpisodeRecord:
    scenario_id: str
    instruction_index: int
    steps: list[StepOutcome]
    success: bool
    l: int  # minimal steps at episode start
    p: int  # steps actually taken
    terminated_by: str  # target_grasped | failure | step_cap | error
    error: Optional[str] = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.scenario_id, self.instruction_index)


def _episode_seed(seed: int, scenario_id: str, instruction_index: int) -> int:
    return zlib.crc32(f"{seed}|{scenario_id}|{instruction_index}".encode())


def gt_segmenter(state: SceneState, point: tuple[float, float], class_name: str):
    """Simulated segmentation stage: resolve a decided mark to a GT modal mask.

    Prefers live objects of the decided class (case-insensitive), nearest
    center first; falls back to nearest center overall when no class matches
    (flagged as a class mismatch).
    """
    live = sorted(state.live)
    by_class = [
        oid
        for oid in live
        if state.scene.object(oid).class_name.lower() == class_name.strip().lower()
    ]
    pool = by_class or live
    mismatch = not by_class

    def dist(oid: int) -> float:
        cu, cv = state.scene.object(oid).center
        return (cu - point[0]) ** 2 + (cv - point[1]) ** 2

    oid = min(pool, key=dist)
    return state.scene.object(oid).decode_modal(), oid, mismatch


def run_episode(
    scene: Scene,
    scenario,
    instruction_index: int,
    localizer: LocalizerConfig,
    reasoner,
    stop: StopSetting = StopSetting.SPM,
    exec_model: ExecutionModel = ExecutionModel(),
    step_cap: Optional[int] = None,
    seed: int = 0,
    mark_style: MarkStyle = MarkStyle(),
    segmenter: Optional[Callable] = None,
) -> EpisodeRecord:
    """Run one instruction-driven episode to termination."""
    if scenario.instructions:
        try:
            instruction = scenario.instructions[instruction_index]
        except IndexError:
            raise ConfigError(
                f"scenario {scenario.scenario_id} has no instruction {instruction_index}"
            ) from None
    else:
        instruction = f"grasp object {scenario.target_id}"
    if localizer.kind == "remote" and getattr(reasoner, "name", "") == "oracle":
        raise ConfigError("oracle reasoner requires a localizer that carries object hints")

    state = SceneState(scene=scene)
    target = scenario.target_id
    l = minimal_steps(state, target)
    cap = step_cap if step_cap is not None else 2 * l + 3
    rng = np.random.default_rng(_episode_seed(seed, scenario.scenario_id, instruction_index))
    image = load_image(scene)
    depth = load_depth(scene)
    segment = segmenter or gt_segmenter

    steps: list[StepOutcome] = []
    history: list[Decision] = []
    success = False
    terminated_by = "step_cap"

    while len(steps) < cap:
        step_index = len(steps) + 1
        gt_set = sorted(valid_pick_set(state, target))
        valid_masks = [state.scene.object(oid).decode_modal() for oid in gt_set]
        outcome = StepOutcome(
            step_index=step_index,
            keypoints=[],
            decision=None,
            decision_error=None,
            resolved_id=None,
            class_mismatch=False,
            predicted_mask=None,
            mask_ok=None,
            pose=None,
            gt_valid_set=gt_set,
            failure=None,
            grasped_id=None,
        )
        failures: set[str] = set()
        grasp_pixel = None

        try:
            # 1) localize + 2) annotate
            if localizer.kind == "gt":
                keypoints = gt_localize(state)
            elif localizer.kind == "perturbed":
                keypoints = perturbed_localize(state, localizer)
            elif localizer.kind == "remote":
                keypoints = remote_localize(image, localizer.endpoint)
            else:
                raise ConfigError(f"unknown localizer kind {localizer.kind!r}")
            annotated, registry = render_marks(image, keypoints, mark_style)
            outcome.keypoints = [
                {"u": k.point[0], "v": k.point[1], "mark_id": k.mark_id,
                 "object_hint": k.object_hint}
                for k in registry.marks.values()
            ]
            # 3) reason
            if hasattr(reasoner, "bind"):
                reasoner.bind(state, target)
            decision = reasoner.decide(annotated, registry, instruction, tuple(history))
            outcome.decision = decision
            history.append(decision)
            # 4) segment
            point = registry.require(decision.mark_id).point
            mask, resolved_id, mismatch = segment(state, point, decision.class_name)
            outcome.resolved_id = resolved_id
            outcome.class_mismatch = mismatch
            outcome.predicted_mask = encode_rle(mask)
            outcome.mask_ok = any(mask_iou(mask, gm) >= 0.5 for gm in valid_masks)
            if not outcome.mask_ok:
                failures.add("S")
            # 5) pose
            if depth is not None and scene.intrinsics is not None:
                pose = grasp_proxy(mask, depth, scene.intrinsics)
                grasp_pixel = pose.pixel
            else:
                ys, xs = np.nonzero(mask)
                grasp_pixel = (float(xs.mean()), float(ys.mean()))
                pose = None
            outcome.pose = pose
            pu, pv = int(round(grasp_pixel[0])), int(round(grasp_pixel[1]))
            pose_ok = any(
                0 <= pv < gm.shape[0] and 0 <= pu < gm.shape[1] and gm[pv, pu]
                for gm in valid_masks
            )
            if not pose_ok:
                failures.add("P")
        except GraspBenchError as exc:
            # pipeline cannot produce a mask: classified as a segmentation-stage failure
            outcome.decision_error = f"{type(exc).__name__}: {exc}"
            failures.add("S")
            grasp_pixel = None

        # 6) execute motion
        motion_ok = False
        if grasp_pixel is not None:
            motion_ok = rng.random() >= exec_model.motion_failure_prob
            if not motion_ok:
                failures.add("M")
        # the recorded failure is the first failing stage: S before P before M
        outcome.failure = next((f for f in ("S", "P", "M") if f in failures), None)

        # 7) physical outcome: the object under the grasp point is the one lifted
        grasped = None
        if grasp_pixel is not None and motion_ok:
            pu, pv = int(round(grasp_pixel[0])), int(round(grasp_pixel[1]))
            for oid in sorted(state.live):
                gm = state.scene.object(oid).decode_modal()
                if 0 <= pv < gm.shape[0] and 0 <= pu < gm.shape[1] and gm[pv, pu]:
                    grasped = oid
                    break
        outcome.grasped_id = grasped
        steps.append(outcome)

        if failures & stop.tracked:
            terminated_by = "failure"
            break
        if grasped is not None:
            state = remove_object(state, grasped)
            if grasped == target:
                success = True
                terminated_by = "target_grasped"
                break

    return EpisodeRecord(
        scenario_id=scenario.scenario_id,
        instruction_index=instruction_index,
        steps=steps,
        success=success and terminated_by == "target_grasped",
        l=l,
        p=len(steps),
        terminated_by=terminated_by,
    )


# --- batch running and serialization ---

def step_to_dict(s: StepOutcome) -> dict:
    return {
        "step_index": s.step_index,
        "keypoints": s.keypoints,
        "decision": (
            {
                "mark_id": s.decision.mark_id,
                "class_name": s.decision.class_name,
                "is_target": s.decision.is_target,
                "rationale": s.decision.rationale,
            }
            if s.decision
            else None
        ),
        "decision_error": s.decision_error,
        "resolved_id": s.resolved_id,
        "class_mismatch": s.class_mismatch,
        "predicted_mask": s.predicted_mask,
        "mask_ok": s.mask_ok,
        "pose": (
            {
                "position": list(s.pose.position),
                "yaw": s.pose.yaw,
                "width": s.pose.width,
                "confidence": s.pose.confidence,
                "pixel": list(s.pose.pixel),
            }
            if s.pose
            else None
        ),
        "gt_valid_set": s.gt_valid_set,
        "failure": s.failure,
        "grasped_id": s.grasped_id,
    }


def record_to_dict(r: EpisodeRecord) -> dict:
    return {
        "schema_version": RESULTS_SCHEMA_VERSION,
        "scenario_id": r.scenario_id,
        "instruction_index": r.instruction_index,
        "steps": [step_to_dict(s) for s in r.steps],
        "success": r.success,
        "l": r.l,
        "p": r.p,
        "terminated_by": r.terminated_by,
        "error": r.error,
    }


def record_to_json(r: EpisodeRecord) -> str:
    return json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False)


def run_batch(
    scenes_by_id: dict[str, Scene],
    scenario_set,
    localizer: LocalizerConfig,
    reasoner_factory: Callable[[], object],
    stop: StopSetting = StopSetting.SPM,
    exec_model: ExecutionModel = ExecutionModel(),
    seed: int = 0,
    workers: int = 1,
    results_path=None,
    step_cap: Optional[int] = None,
) -> list[EpisodeRecord]:
    """Run every (scenario, instruction) episode.

    Per-episode errors are captured in records, never abort the batch. The
    output list is canonically ordered by (scenario_id, instruction_index)
    so worker count cannot change the bytes written.
    """
    jobs = []
    for sc in scenario_set.scenarios:
        indices = range(len(sc.instructions)) if sc.instructions else [0]
        for idx in indices:
            jobs.append((sc, idx))

    def run_one(job):
        sc, idx = job
        try:
            scene = scenes_by_id[sc.scene_id]
            return run_episode(
                scene, sc, idx, localizer, reasoner_factory(), stop=stop,
                exec_model=exec_model, seed=seed, step_cap=step_cap,
            )
        except Exception as exc:
            return EpisodeRecord(
                scenario_id=sc.scenario_id,
                instruction_index=idx,
                steps=[],
                success=False,
                l=0,
                p=0,
                terminated_by="error",
                error=f"{type(exc).__name__}: {exc}",
            )

    if workers <= 1:
        records = [run_one(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, jobs))
    records.sort(key=lambda r: r.key)
    if results_path is not None:
        with open(results_path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(record_to_json(r) + "\n")
    return records


def load_records(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
