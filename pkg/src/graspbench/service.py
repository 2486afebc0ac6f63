"""HTTP service for interactive episodes and instruction collection.

State machine per episode: awaiting_instruction -> decided_pending_confirm
-> executing -> (awaiting_instruction | done). Nothing mutates scene state
except confirm; a second instruct before confirm replaces the pending
decision. Annotation writes are append-only, serialized through one lock.
"""

from __future__ import annotations

import io
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import append_instruction_row, load_scenes_dir
from .episode import gt_segmenter
from .errors import GraspBenchError
from .imaging import load_image
from .localization import LocalizerConfig, gt_localize, perturbed_localize
from .prompting import Decision, MarkStyle, assign_marks, render_marks
from .reasoning import OracleReasoner, RemoteReasoner, ScriptedReasoner
from .remote import EndpointConfig
from .scene import (
    Scene,
    SceneState,
    difficulty_of,
    remove_object,
    valid_pick_set,
)

PHASES = ("awaiting_instruction", "decided_pending_confirm", "executing", "done")


@dataclass
class InteractiveEpisode:
    episode_id: str
    scene: Scene
    state: SceneState
    target_id: Optional[int] = None
    phase: str = "awaiting_instruction"
    pending: Optional[dict] = None  # decision awaiting confirm
    log: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateEpisodeBody(BaseModel):
    scene_id: str
    target_id: Optional[int] = None
    reasoner: str = "oracle"  # oracle | scripted | remote
    endpoint_url: Optional[str] = None
    endpoint_model: str = ""
    auth_token_env: str = ""
    localizer: str = "gt"  # gt | perturbed
    noise_sigma_px: float = 0.0
    seed: int = 0


class InstructBody(BaseModel):
    text: str


class ConfirmBody(BaseModel):
    accept: bool
    override_mark: Optional[int] = None


class AnnotationBody(BaseModel):
    scene_id: str
    target_id: int
    text: str


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(
    scenes_dir,
    annotations_path=None,
    static_dir=None,
    mark_style: MarkStyle = MarkStyle(),
) -> FastAPI:
    scenes = {s.scene_id: s for s in load_scenes_dir(scenes_dir)}
    episodes: dict[str, InteractiveEpisode] = {}
    annotations_path = Path(annotations_path) if annotations_path else None
    annotation_lock = threading.Lock()

    app = FastAPI(title="graspbench service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def get_scene(scene_id: str) -> Scene:
        scene = scenes.get(scene_id)
        if scene is None:
            raise _error(404, "UnknownScenario", f"no scene {scene_id}")
        return scene

    def get_episode(episode_id: str) -> InteractiveEpisode:
        ep = episodes.get(episode_id)
        if ep is None:
            raise _error(404, "UnknownScenario", f"no episode {episode_id}")
        return ep

    def localize(ep: InteractiveEpisode):
        cfg = ep.config
        if cfg.get("localizer") == "perturbed":
            lcfg = LocalizerConfig(
                kind="perturbed",
                noise_sigma_px=cfg.get("noise_sigma_px", 0.0),
                seed=cfg.get("seed", 0),
            )
            return perturbed_localize(ep.state, lcfg)
        return gt_localize(ep.state)

    def build_reasoner(ep: InteractiveEpisode):
        kind = ep.config.get("reasoner", "oracle")
        if kind == "remote":
            return RemoteReasoner(
                endpoint=EndpointConfig(
                    url=ep.config["endpoint_url"],
                    model=ep.config.get("endpoint_model", ""),
                    auth_token_env=ep.config.get("auth_token_env", ""),
                )
            )
        if kind == "scripted":
            return ScriptedReasoner(fixture=list(ep.config.get("fixture", ())))
        return OracleReasoner()

    @app.get("/scenes")
    def list_scenes():
        out = []
        for sid in sorted(scenes):
            scene = scenes[sid]
            state = SceneState(scene=scene)
            out.append(
                {
                    "scene_id": sid,
                    "n_objects": len(scene.objects),
                    "classes": sorted({o.class_name for o in scene.objects}),
                    "objects": [
                        {
                            "id": o.id,
                            "class": o.class_name,
                            "center": list(o.center),
                            "difficulty": difficulty_of(state, o.id).cell,
                        }
                        for o in scene.objects
                    ],
                }
            )
        return {"scenes": out}

    @app.get("/scenes/{scene_id}/image")
    def scene_image(scene_id: str, marks: int = 0):
        scene = get_scene(scene_id)
        image = load_image(scene)
        if marks:
            state = SceneState(scene=scene)
            image, _ = render_marks(image, gt_localize(state), mark_style)
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/episodes", status_code=201)
    def create_episode(body: CreateEpisodeBody):
        scene = get_scene(body.scene_id)
        if body.reasoner == "remote" and not body.endpoint_url:
            raise _error(400, "ConfigError", "remote reasoner needs endpoint_url")
        if body.target_id is not None and body.target_id not in {
            o.id for o in scene.objects
        }:
            raise _error(400, "UnknownTarget", f"no object {body.target_id}")
        episode_id = uuid.uuid4().hex[:12]
        episodes[episode_id] = InteractiveEpisode(
            episode_id=episode_id,
            scene=scene,
            state=SceneState(scene=scene),
            target_id=body.target_id,
            config=body.model_dump(),
        )
        return {"episode_id": episode_id}

    @app.post("/episodes/{episode_id}/instruct")
    def instruct(episode_id: str, body: InstructBody):
        ep = get_episode(episode_id)
        if not body.text.strip():
            raise _error(400, "EmptyInstruction", "instruction text is empty")
        with ep.lock:
            if ep.phase == "done":
                raise _error(409, "ValidationError", "episode is finished")
            try:
                keypoints = assign_marks(localize(ep))
                image = load_image(ep.scene)
                marked, registry = render_marks(image, keypoints, mark_style)
                reasoner = build_reasoner(ep)
                if hasattr(reasoner, "bind"):
                    # oracle needs GT state; pick its target from the episode
                    # binding or fall back to the first live object
                    target = ep.target_id
                    if target is None or not ep.state.is_live(target):
                        target = min(ep.state.live)
                    reasoner.bind(ep.state, target)
                decision: Decision = reasoner.decide(
                    marked, registry, body.text, history=()
                )
            except GraspBenchError as exc:
                raise _error(422, type(exc).__name__, str(exc)) from exc
            kp = registry.require(decision.mark_id)
            resolved_id = kp.object_hint
            diagnostics = {}
            if ep.target_id is not None and ep.state.is_live(ep.target_id):
                gt_set = sorted(valid_pick_set(ep.state, ep.target_id))
                diagnostics = {
                    "valid_pick_set": gt_set,
                    "pick_is_valid": resolved_id in gt_set,
                }
            ep.pending = {
                "instruction": body.text,
                "decision": {
                    "mark_id": decision.mark_id,
                    "class": decision.class_name,
                    "is_target": decision.is_target,
                    "rationale": decision.rationale,
                },
                "marks": {m: list(k.point) for m, k in registry.marks.items()},
                "resolved_id": resolved_id,
                "diagnostics": diagnostics,
            }
            ep.phase = "decided_pending_confirm"
            return {
                "phase": ep.phase,
                "decision": ep.pending["decision"],
                "resolved_id": resolved_id,
                "image_url": f"/scenes/{ep.scene.scene_id}/image?marks=1",
                "diagnostics": diagnostics,
            }

    @app.post("/episodes/{episode_id}/confirm")
    def confirm(episode_id: str, body: ConfirmBody):
        ep = get_episode(episode_id)
        with ep.lock:
            if ep.phase != "decided_pending_confirm":
                raise _error(409, "ValidationError", "no decision pending")
            if not body.accept:
                ep.pending = None
                ep.phase = "awaiting_instruction"
                return {"phase": ep.phase, "live_objects": sorted(ep.state.live)}
            pending = ep.pending
            pick_id = pending["resolved_id"]
            overridden = False
            if body.override_mark is not None:
                marks = pending["marks"]
                if body.override_mark not in marks:
                    raise _error(400, "UnknownMark", f"no mark {body.override_mark}")
                point = marks[body.override_mark]
                _, pick_id, _ = gt_segmenter(ep.state, tuple(point), "")
                overridden = True
            ep.phase = "executing"
            grasped = pick_id if pick_id is not None and ep.state.is_live(pick_id) else None
            if grasped is not None:
                ep.state = remove_object(ep.state, grasped)
            ep.log.append(
                {
                    "instruction": pending["instruction"],
                    "decision": pending["decision"],
                    "grasped_id": grasped,
                    "overridden": overridden,
                    "live_after": sorted(ep.state.live),
                }
            )
            ep.pending = None
            target_taken = (
                ep.target_id is not None and not ep.state.is_live(ep.target_id)
            )
            ep.phase = "done" if (not ep.state.live or target_taken) else "awaiting_instruction"
            return {
                "phase": ep.phase,
                "grasped_id": grasped,
                "overridden": overridden,
                "live_objects": sorted(ep.state.live),
            }

    @app.get("/episodes/{episode_id}/state")
    def episode_state(episode_id: str):
        ep = get_episode(episode_id)
        with ep.lock:
            return {
                "episode_id": ep.episode_id,
                "scene_id": ep.scene.scene_id,
                "target_id": ep.target_id,
                "phase": ep.phase,
                "live_objects": sorted(ep.state.live),
                "pending": ep.pending and {
                    "decision": ep.pending["decision"],
                    "resolved_id": ep.pending["resolved_id"],
                },
                "log": ep.log,
            }

    @app.post("/annotations", status_code=201)
    def add_annotation(body: AnnotationBody):
        if annotations_path is None:
            raise _error(400, "ConfigError", "service started without an annotations file")
        scene = get_scene(body.scene_id)
        if body.target_id not in {o.id for o in scene.objects}:
            raise _error(400, "UnknownTarget", f"no object {body.target_id}")
        if not body.text.strip():
            raise _error(400, "EmptyInstruction", "instruction text is empty")
        with annotation_lock:
            row = append_instruction_row(
                annotations_path, body.scene_id, body.target_id, body.text
            )
        return row

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def main():  # pragma: no cover - thin uvicorn wrapper
    import click
    import uvicorn

    @click.command()
    @click.option("--scenes", required=True, type=click.Path(exists=True, file_okay=False))
    @click.option("--annotations", type=click.Path(dir_okay=False))
    @click.option("--static", type=click.Path(file_okay=False))
    @click.option("--port", default=8000, show_default=True, type=int)
    def serve(scenes, annotations, static, port):
        app = create_app(scenes, annotations_path=annotations, static_dir=static)
        uvicorn.run(app, host="127.0.0.1", port=port)

    serve()


if __name__ == "__main__":  # pragma: no cover
    main()
