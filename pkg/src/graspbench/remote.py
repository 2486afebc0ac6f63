"""Shared HTTP plumbing for remote localization / reasoning endpoints."""

from __future__ import annotations

import base64
import io
import os
import time
from dataclasses import dataclass
from typing import Optional

import requests
from PIL import Image

from .errors import TransportError


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = ""
    temperature: float = 0.0
    timeout_s: float = 60.0
    retries: int = 3
    retry_backoff_s: float = 0.5
    auth_token_env: str = ""  # env var holding the bearer token; never stored in config


def _headers(cfg: EndpointConfig) -> dict:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_token_env:
        token = os.environ.get(cfg.auth_token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def post_json(cfg: EndpointConfig, body: dict, session: Optional[requests.Session] = None):
    """POST with retry on transport errors and non-2xx statuses.

    Raises TransportError once the retry budget is exhausted. Reply body is
    returned as text; callers own parsing (and its ProtocolError).
    """
    sess = session or requests
    last_exc = None
    for attempt in range(cfg.retries):
        try:
            resp = sess.post(cfg.url, json=body, headers=_headers(cfg), timeout=cfg.timeout_s)
            if resp.status_code // 100 == 2:
                return resp.text
            last_exc = TransportError(f"{cfg.url}: HTTP {resp.status_code}")
        except requests.RequestException as exc:
            last_exc = TransportError(f"{cfg.url}: {exc}")
        if attempt + 1 < cfg.retries:
            time.sleep(cfg.retry_backoff_s * (attempt + 1))
    raise last_exc


def image_to_base64_png(image: Image.Image) -> str:
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
