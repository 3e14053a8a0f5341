"""Model-backed critic over an OpenAI-compatible chat-completions gateway.

Configuration comes from environment variables (``LAYOUTEVAL_GATEWAY_URL``,
``LAYOUTEVAL_GATEWAY_MODEL``, ``LAYOUTEVAL_GATEWAY_KEY``) or explicit fields.
Stub mode replays canned response files from a directory so the full parse
path can run offline.

The critic contract: the model must answer with a JSON object of the form
``{"reward": <0..1>, "notes": [{"label": ..., "issue": ..., "with": ...,
"amount_m": ..., "suggestion": ...}]}``. Free text around the JSON block is
tolerated and stripped.
"""

from __future__ import annotations

import base64
import json
import mimetypes
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import requests

from .errors import GatewayError
from .refine import CriticFeedback, CriticNote, ISSUES
from .scene import PlacementCondition, SceneLayout, condition_to_dict, layout_to_dict

MODALITIES = ("text", "image", "image+text", "semantics+text")

ENV_URL = "LAYOUTEVAL_GATEWAY_URL"
ENV_MODEL = "LAYOUTEVAL_GATEWAY_MODEL"
ENV_KEY = "LAYOUTEVAL_GATEWAY_KEY"

# transport(url, headers, payload, timeout) -> (status_code, response_text)
Transport = Callable[[str, dict, dict, float], tuple[int, str]]


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float) -> tuple[int, str]:
    response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return response.status_code, response.text


@dataclass
class GatewayConfig:
    url: str = ""
    model: str = ""
    api_key: str = ""
    timeout_s: float = 60.0
    max_attempts: int = 3
    backoff_s: float = 1.0
    stub_dir: str | None = None

    @classmethod
    def from_env(cls, stub_dir: str | None = None) -> "GatewayConfig":
        return cls(
            url=os.environ.get(ENV_URL, ""),
            model=os.environ.get(ENV_MODEL, ""),
            api_key=os.environ.get(ENV_KEY, ""),
            stub_dir=stub_dir,
        )


@dataclass
class GatewayClient:
    config: GatewayConfig
    transport: Transport = field(default=_requests_transport)
    sleep: Callable[[float], None] = field(default=time.sleep)
    _stub_files: list[Path] | None = field(default=None, init=False, repr=False)
    _stub_index: int = field(default=0, init=False, repr=False)

    def chat(self, messages: list[dict]) -> str:
        """Send a chat request; return the assistant message content.

        Retries transient failures (network errors, timeouts, 5xx) with
        exponential backoff, then raises GatewayError carrying the retry log.
        """
        if self.config.stub_dir is not None:
            return self._stub_response()
        if not self.config.url or not self.config.model:
            raise GatewayError(
                f"gateway not configured: set {ENV_URL} and {ENV_MODEL} (or enable stub mode)"
            )
        payload = {"model": self.config.model, "messages": messages}
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"

        attempts: list[str] = []
        for attempt in range(self.config.max_attempts):
            try:
                status, text = self.transport(self.config.url, headers, payload, self.config.timeout_s)
            except requests.RequestException as exc:
                attempts.append(f"attempt {attempt + 1}: {exc}")
            else:
                if status < 500:
                    if status != 200:
                        raise GatewayError(f"gateway returned HTTP {status}: {text[:500]}", attempts)
                    return _extract_content(text)
                attempts.append(f"attempt {attempt + 1}: HTTP {status}")
            if attempt + 1 < self.config.max_attempts:
                self.sleep(self.config.backoff_s * (2 ** attempt))
        raise GatewayError(
            f"gateway failed after {self.config.max_attempts} attempts", attempts
        )

    def _stub_response(self) -> str:
        if self._stub_files is None:
            self._stub_files = sorted(Path(self.config.stub_dir).glob("*.json"))
            if not self._stub_files:
                raise GatewayError(f"stub directory {self.config.stub_dir} has no *.json responses")
        path = self._stub_files[min(self._stub_index, len(self._stub_files) - 1)]
        self._stub_index += 1
        return _extract_content(path.read_text(encoding="utf-8"))


def _extract_content(response_text: str) -> str:
    try:
        data = json.loads(response_text)
        content = data["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise GatewayError(f"unparseable gateway response: {exc}; payload: {response_text[:500]}")
    if not isinstance(content, str):
        raise GatewayError(f"gateway content is not text; payload: {response_text[:500]}")
    return content


def load_template(name: str) -> str:
    return resources.files("layouteval.templates").joinpath(name).read_text(encoding="utf-8")


def _image_part(path: str | Path) -> dict:
    mime = mimetypes.guess_type(str(path))[0] or "image/png"
    data = base64.b64encode(Path(path).read_bytes()).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}}


def build_critic_messages(
    modality: str,
    layout: SceneLayout,
    condition: PlacementCondition,
    image_paths: tuple[str | Path, ...] = (),
) -> list[dict]:
    """Assemble the chat request for a critic call in the given modality."""
    if modality not in MODALITIES:
        raise ValueError(f"modality must be one of {MODALITIES}, got {modality!r}")
    if "image" in modality and not image_paths:
        raise ValueError(f"modality {modality!r} requires at least one rendered view path")

    system = load_template("critic_system.txt")
    condition_json = json.dumps(condition_to_dict(condition), indent=2, sort_keys=True)
    layout_json = json.dumps(layout_to_dict(layout), indent=2, sort_keys=True)

    if modality == "image":
        user_text = load_template("critic_image.txt").format(condition=condition_json)
    elif modality == "semantics+text":
        labels = sorted({o.label for o in layout.objects})
        user_text = load_template("critic_semantics.txt").format(
            condition=condition_json, labels=json.dumps(labels), layout=layout_json
        )
    else:  # text, image+text
        user_text = load_template("critic_text.txt").format(
            condition=condition_json, layout=layout_json
        )

    content: list[dict] | str
    if "image" in modality:
        content = [{"type": "text", "text": user_text}]
        content.extend(_image_part(p) for p in image_paths)
    else:
        content = user_text
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": content},
    ]


def parse_critic_response(text: str) -> CriticFeedback:
    """Parse the model's JSON verdict, tolerating surrounding prose/fences."""
    payload = _find_json_object(text)
    if payload is None:
        raise GatewayError(f"no JSON object found in critic response: {text[:500]}")
    reward = payload.get("reward")
    if isinstance(reward, bool) or not isinstance(reward, (int, float)):
        raise GatewayError(f"critic response missing numeric reward: {text[:500]}")
    reward = min(1.0, max(0.0, float(reward)))
    notes = []
    for raw in payload.get("notes", []) or []:
        if not isinstance(raw, dict) or "label" not in raw:
            continue
        issue = str(raw.get("issue", ""))
        if issue not in ISSUES:
            continue
        amount = raw.get("amount_m")
        notes.append(CriticNote(
            label=str(raw["label"]),
            issue=issue,
            with_label=str(raw["with"]) if raw.get("with") is not None else None,
            amount_m=float(amount) if isinstance(amount, (int, float)) and not isinstance(amount, bool) else None,
            suggestion=str(raw.get("suggestion", "")),
        ))
    return CriticFeedback(reward=reward, notes=notes)


def _find_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def model_critic(
    client: GatewayClient,
    modality: str,
    layout: SceneLayout,
    condition: PlacementCondition,
    image_paths: tuple[str | Path, ...] = (),
) -> CriticFeedback:
    """One critic call through the gateway (or its stub)."""
    messages = build_critic_messages(modality, layout, condition, image_paths)
    return parse_critic_response(client.chat(messages))


def make_model_critic(
    client: GatewayClient, modality: str, image_paths: tuple[str | Path, ...] = ()
):
    """Adapt the gateway critic to the refine-loop critic signature."""

    def critic(layout: SceneLayout, condition: PlacementCondition) -> CriticFeedback:
        return model_critic(client, modality, layout, condition, image_paths)

    return critic
