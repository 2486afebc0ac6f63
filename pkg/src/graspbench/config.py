"""Run configuration: one TOML or JSON file, secrets via environment only.

The config file is committable by construction — endpoint auth is referenced
through the *name* of an environment variable, never a literal token.
Unknown fields are rejected so typos fail loudly instead of silently using
defaults, and every relative path is resolved against the config file's own
directory so runs are reproducible from any working directory.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .episode import ExecutionModel, StopSetting
from .errors import ConfigError
from .localization import LocalizerConfig
from .prompting import MarkStyle
from .remote import EndpointConfig


@dataclass(frozen=True)
class ReasonerSpec:
    kind: str = "oracle"  # oracle | scripted | remote
    endpoint: Optional[EndpointConfig] = None
    fixture: tuple = ()  # scripted decisions: (mark_id, class, is_target)


@dataclass(frozen=True)
class HarnessConfig:
    localizer: LocalizerConfig = field(default_factory=LocalizerConfig)
    reasoner: ReasonerSpec = field(default_factory=ReasonerSpec)
    stop: StopSetting = StopSetting.SPM
    exec_model: ExecutionModel = field(default_factory=ExecutionModel)
    seed: int = 0
    scenes_dir: Optional[Path] = None
    instructions_file: Optional[Path] = None
    results_dir: Optional[Path] = None
    mark_style: MarkStyle = field(default_factory=MarkStyle)
    step_cap: Optional[int] = None


def _check_fields(raw: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown fields {unknown}")


def _endpoint_from(raw: dict, where: str) -> EndpointConfig:
    for key in ("auth_token", "api_key", "token"):
        if key in raw:
            raise ConfigError(f"{where}: secrets go in env vars, not config files")
    allowed = {f.name for f in fields(EndpointConfig)}
    _check_fields(raw, allowed, where)
    if "url" not in raw:
        raise ConfigError(f"{where}: endpoint needs a url")
    return EndpointConfig(**raw)


def _localizer_from(raw: dict, where: str) -> LocalizerConfig:
    allowed = {"kind", "noise_sigma_px", "duplicate_rate", "seed", "endpoint"}
    _check_fields(raw, allowed, where)
    kind = raw.get("kind", "gt")
    if kind not in ("gt", "perturbed", "remote"):
        raise ConfigError(f"{where}: unknown localizer kind {kind!r}")
    endpoint = None
    if "endpoint" in raw:
        endpoint = _endpoint_from(raw["endpoint"], f"{where}.endpoint")
    return LocalizerConfig(
        kind=kind,
        noise_sigma_px=float(raw.get("noise_sigma_px", 0.0)),
        duplicate_rate=float(raw.get("duplicate_rate", 0.0)),
        seed=int(raw.get("seed", 0)),
        endpoint=endpoint,
    )


def _reasoner_from(raw: dict, where: str) -> ReasonerSpec:
    allowed = {"kind", "endpoint", "fixture"}
    _check_fields(raw, allowed, where)
    kind = raw.get("kind", "oracle")
    if kind not in ("oracle", "scripted", "remote"):
        raise ConfigError(f"{where}: unknown reasoner kind {kind!r}")
    endpoint = None
    if "endpoint" in raw:
        endpoint = _endpoint_from(raw["endpoint"], f"{where}.endpoint")
    if kind == "remote" and endpoint is None:
        raise ConfigError(f"{where}: remote reasoner needs an endpoint")
    fixture = tuple(
        (int(m), str(c), bool(t)) for m, c, t in raw.get("fixture", ())
    )
    return ReasonerSpec(kind=kind, endpoint=endpoint, fixture=fixture)


def _mark_style_from(raw: dict, where: str) -> MarkStyle:
    allowed = {f.name for f in fields(MarkStyle)}
    _check_fields(raw, allowed, where)
    # TOML/JSON arrays arrive as lists; the color fields are tuples
    cooked = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return MarkStyle(**cooked)


_TOP_LEVEL = {
    "localizer", "reasoner", "stop", "motion_failure_prob", "seed",
    "scenes_dir", "instructions_file", "results_dir", "mark_style", "step_cap",
}


def config_from_dict(raw: dict, base_dir: Path, where: str = "<config>") -> HarnessConfig:
    _check_fields(raw, _TOP_LEVEL, where)

    def resolve(key: str) -> Optional[Path]:
        if key not in raw:
            return None
        return (base_dir / Path(raw[key])).resolve()

    stop = raw.get("stop", "spm")
    try:
        stop = StopSetting(stop.lower() if isinstance(stop, str) else stop)
    except ValueError as exc:
        raise ConfigError(f"{where}: unknown stop setting {stop!r}") from exc

    return HarnessConfig(
        localizer=_localizer_from(raw.get("localizer", {}), f"{where}.localizer"),
        reasoner=_reasoner_from(raw.get("reasoner", {}), f"{where}.reasoner"),
        stop=stop,
        exec_model=ExecutionModel(
            motion_failure_prob=float(raw.get("motion_failure_prob", 0.0))
        ),
        seed=int(raw.get("seed", 0)),
        scenes_dir=resolve("scenes_dir"),
        instructions_file=resolve("instructions_file"),
        results_dir=resolve("results_dir"),
        mark_style=_mark_style_from(raw.get("mark_style", {}), f"{where}.mark_style"),
        step_cap=int(raw["step_cap"]) if "step_cap" in raw else None,
    )


def load_config(path) -> HarnessConfig:
    path = Path(path)
    try:
        if path.suffix == ".toml":
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be a table/object")
    return config_from_dict(raw, path.parent.resolve(), where=str(path))
