"""Command-line entry points.

Exit codes: 0 success, 1 validation error (bad inputs, bad config),
2 runtime error. Every command except ``eval`` is single-threaded.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import HarnessConfig, load_config
from .dataset import (
    attach_instructions,
    load_manifest,
    load_scene,
    load_scenes_dir,
    sample_scenarios,
    save_manifest,
)
from .episode import StopSetting, run_batch
from .errors import GraspBenchError, ValidationError
from .imaging import load_image
from .localization import LocalizerConfig, gt_localize
from .metrics import aggregate_report, render_table
from .prompting import render_marks
from .reasoning import OracleReasoner, RemoteReasoner, ScriptedReasoner
from .scene import SceneState

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


@click.group()
def main():
    """Deterministic evaluation harness for language-guided bin picking."""


@main.command()
@click.option("--scenes", required=True, type=click.Path(exists=True, file_okay=False))
def ingest(scenes):
    """Validate every scene file in a directory and summarize diagnostics."""
    scenes_dir = Path(scenes)
    files = sorted(scenes_dir.glob("*.json"))
    errors = []
    ok = 0
    for path in files:
        try:
            load_scene(path)
            ok += 1
        except GraspBenchError as exc:
            errors.append(f"{path.name}: {type(exc).__name__}: {exc}")
    for line in errors:
        click.echo(line, err=True)
    click.echo(f"{ok} scenes OK, {len(errors)} failed")
    if not files:
        click.echo("0 scenes", err=True)
        sys.exit(EXIT_VALIDATION)
    sys.exit(EXIT_VALIDATION if errors else EXIT_OK)


@main.command()
@click.option("--scenes", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--per-cell", default=50, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def generate(scenes, per_cell, seed, out):
    """Sample a stratified scenario manifest from a scene directory."""
    try:
        scene_list = load_scenes_dir(scenes)
        scenario_set = sample_scenarios(scene_list, per_cell=per_cell, seed=seed)
    except GraspBenchError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    save_manifest(scenario_set, out)
    click.echo(f"{len(scenario_set.scenarios)} scenarios -> {out}")
    sys.exit(EXIT_OK)


def _reasoner_factory(cfg: HarnessConfig):
    kind = cfg.reasoner.kind
    if kind == "oracle":
        return OracleReasoner
    if kind == "scripted":
        fixture = list(cfg.reasoner.fixture)
        return lambda: ScriptedReasoner(fixture=list(fixture))
    return lambda: RemoteReasoner(endpoint=cfg.reasoner.endpoint)


@main.command(name="eval")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--scenes", type=click.Path(exists=True, file_okay=False),
              help="Overrides scenes_dir from the config file.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--workers", default=1, show_default=True, type=int)
@click.option("--seed", type=int, help="Overrides seed from the config file.")
@click.option("--stop", type=click.Choice(["spm", "pm", "p"]),
              help="Overrides stop setting from the config file.")
@click.option("--reasoner", "reasoner_kind",
              type=click.Choice(["oracle", "scripted", "remote"]),
              help="Overrides reasoner kind from the config file.")
@click.option("--localizer", "localizer_kind",
              type=click.Choice(["gt", "perturbed", "remote"]),
              help="Overrides localizer kind from the config file.")
def cmd_eval(manifest, config_path, scenes, out, workers, seed, stop,
             reasoner_kind, localizer_kind):
    """Run every (scenario, instruction) episode and write results JSONL."""
    from dataclasses import replace

    try:
        cfg = load_config(config_path) if config_path else HarnessConfig()
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if stop is not None:
            cfg = replace(cfg, stop=StopSetting(stop))
        if reasoner_kind is not None:
            cfg = replace(cfg, reasoner=replace(cfg.reasoner, kind=reasoner_kind))
        if localizer_kind is not None:
            cfg = replace(cfg, localizer=replace(cfg.localizer, kind=localizer_kind))
        if cfg.reasoner.kind == "remote" and cfg.reasoner.endpoint is None:
            raise ValidationError("remote reasoner needs an endpoint in the config")
        if cfg.localizer.kind == "remote" and cfg.localizer.endpoint is None:
            raise ValidationError("remote localizer needs an endpoint in the config")
        scenes_dir = Path(scenes) if scenes else cfg.scenes_dir
        if scenes_dir is None:
            raise ValidationError("no scenes directory (use --scenes or scenes_dir)")
        scenario_set = load_manifest(manifest)
        if cfg.instructions_file is not None:
            scenario_set = attach_instructions(scenario_set, cfg.instructions_file)
        scene_list = load_scenes_dir(scenes_dir)
        by_id = {s.scene_id: s for s in scene_list}
        missing = {sc.scene_id for sc in scenario_set.scenarios} - set(by_id)
        if missing:
            raise ValidationError(f"manifest references unknown scenes {sorted(missing)}")
    except GraspBenchError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)

    try:
        records = run_batch(
            by_id,
            scenario_set,
            localizer=cfg.localizer,
            reasoner_factory=_reasoner_factory(cfg),
            stop=cfg.stop,
            exec_model=cfg.exec_model,
            seed=cfg.seed,
            workers=workers,
            results_path=out,
            step_cap=cfg.step_cap,
        )
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    n_ok = sum(1 for r in records if r.success)
    click.echo(f"{len(records)} episodes ({n_ok} succeeded) -> {out}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False),
              help="Also write the report as JSON.")
def report(results, manifest, out):
    """Aggregate a results JSONL into per-difficulty-cell metrics."""
    from .episode import load_records

    try:
        records = load_records(results)
        if not records:
            raise ValidationError("no records")
        scenario_set = load_manifest(manifest)
        cell_by_scenario = {
            sc.scenario_id: sc.difficulty.cell for sc in scenario_set.scenarios
        }
        instructions = {
            sc.scenario_id: list(sc.instructions)
            for sc in scenario_set.scenarios
            if sc.instructions
        }
        rep = aggregate_report(
            records, cell_by_scenario, instructions_by_scenario=instructions or None
        )
    except GraspBenchError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(render_table(rep))
    if out:
        Path(out).write_text(
            json.dumps(rep.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
        click.echo(f"report -> {out}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--scene", "scene_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def annotate(scene_path, out):
    """Render numbered marks at ground-truth keypoints onto the scene image."""
    try:
        scene = load_scene(scene_path)
        state = SceneState(scene=scene)
        keypoints = gt_localize(state)
        image = load_image(scene)
        marked, registry = render_marks(image, keypoints)
    except GraspBenchError as exc:
        click.echo(f"{type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    marked.save(out)
    click.echo(f"{len(registry.marks)} marks -> {out}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
