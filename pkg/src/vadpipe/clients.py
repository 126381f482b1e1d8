"""Pluggable model clients: object detector, captioner, text/image embedder, LLM.

Each client comes in two flavours: an HTTP adapter for a real served model
(endpoint and model name from config or environment variables) and a
deterministic offline stand-in used by tests and the synthetic scenario.
Offline clients are pure functions of their inputs.
"""

from __future__ import annotations

import hashlib
import os
import time
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .artifacts import read_jsonl

ENV_LLM_ENDPOINT = "LLM_ENDPOINT"
ENV_LLM_MODEL = "LLM_MODEL"
ENV_VLM_ENDPOINT = "VLM_ENDPOINT"
ENV_EMBED_ENDPOINT = "EMBED_ENDPOINT"


class TransportError(RuntimeError):
    """A client call failed at the transport level (timeout, HTTP error)."""


def call_with_retries(
    fn: Callable[[], str],
    attempts: int = 3,
    backoff_s: float = 0.05,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Run `fn`, retrying transport failures with exponential backoff."""
    last: TransportError | None = None
    for attempt in range(attempts):
        try:
            return fn()
        except TransportError as exc:
            last = exc
            if attempt + 1 < attempts:
                sleep(backoff_s * (2**attempt))
    assert last is not None
    raise last


# --------------------------------------------------------------------------
# Detector


class DetectorClient(Protocol):
    def detect(self, video_id: str, frame_index: int, image: np.ndarray) -> list[dict]:
        """Return raw detections: {bbox: [x, y, w, h], class_label, confidence}."""
        ...


class ScriptedDetector:
    """Plays back detections from a JSONL script keyed by (video_id, frame_index)."""

    def __init__(self, script_path: str | Path):
        self._by_frame: dict[tuple[str, int], list[dict]] = {}
        for rec in read_jsonl(script_path):
            key = (rec["video_id"], int(rec["frame_index"]))
            self._by_frame.setdefault(key, []).append(
                {
                    "bbox": [float(v) for v in rec["bbox"]],
                    "class_label": rec["class_label"],
                    "confidence": float(rec["confidence"]),
                }
            )

    def detect(self, video_id: str, frame_index: int, image: np.ndarray) -> list[dict]:
        return [dict(d) for d in self._by_frame.get((video_id, frame_index), [])]


class HttpDetector:
    """Adapter for an external detection service."""

    def __init__(self, endpoint: str, session=None, timeout_s: float = 30.0):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def detect(self, video_id: str, frame_index: int, image: np.ndarray) -> list[dict]:
        payload = {
            "video_id": video_id,
            "frame_index": frame_index,
            "shape": list(image.shape),
            "pixels_hex": image.tobytes().hex(),
        }
        data = _post_json(self._session, self.endpoint, payload, self.timeout_s)
        return list(data["detections"])


# --------------------------------------------------------------------------
# Captioner


class CaptionClient(Protocol):
    model_id: str

    def caption(
        self, video_id: str, frame_index: int, image: np.ndarray, instruction: str, max_tokens: int
    ) -> str: ...


class ScriptedCaptioner:
    """Plays back captions from a JSONL script; truncates to `max_tokens` words.

    Word-level truncation is a stand-in for the token budget of a real
    captioner; it lets the token-length ablation change behaviour without any
    model in the loop.
    """

    model_id = "scripted-captioner"

    def __init__(self, script_path: str | Path):
        self._captions = {
            (rec["video_id"], int(rec["frame_index"])): rec["caption"]
            for rec in read_jsonl(script_path)
        }

    def caption(self, video_id, frame_index, image, instruction, max_tokens):
        try:
            text = self._captions[(video_id, int(frame_index))]
        except KeyError:
            raise TransportError(f"no scripted caption for {video_id}:{frame_index}")
        words = text.split()
        if len(words) > max_tokens:
            text = " ".join(words[:max_tokens])
        return text


class HttpCaptioner:
    def __init__(self, endpoint: str = "", model: str = "", session=None, timeout_s: float = 60.0):
        self.endpoint = endpoint or os.environ.get(ENV_VLM_ENDPOINT, "")
        self.model_id = model or os.environ.get("VLM_MODEL", "default-vlm")
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise ValueError(f"caption endpoint missing; set {ENV_VLM_ENDPOINT}")
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def caption(self, video_id, frame_index, image, instruction, max_tokens):
        payload = {
            "model": self.model_id,
            "instruction": instruction,
            "max_tokens": max_tokens,
            "shape": list(image.shape),
            "pixels_hex": image.tobytes().hex(),
        }
        data = _post_json(self._session, self.endpoint, payload, self.timeout_s)
        return str(data["caption"])


# --------------------------------------------------------------------------
# Embedder


class EmbedClient(Protocol):
    dim: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, video_id: str, frame_index: int) -> np.ndarray: ...


def hash_embed(text: str, dim: int = 64) -> np.ndarray:
    """Deterministic bag-of-words embedding.

    Each lowercase token is mapped to a fixed pseudo-random unit direction
    seeded by its SHA-256 digest; the text embedding is the normalized token
    sum. Cosine similarity therefore tracks token overlap, which is enough to
    exercise refinement without model weights. Uses hashlib, not `hash()`,
    so values are stable across processes.
    """
    acc = np.zeros(dim, dtype=np.float64)
    for token in text.lower().split():
        token = token.strip(".,!?;:()[]\"'")
        if not token:
            continue
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(dim)
        acc += vec / np.linalg.norm(vec)
    norm = np.linalg.norm(acc)
    if norm > 0:
        acc /= norm
    return acc


class HashEmbedder:
    """Offline joint-space embedder.

    Text goes through `hash_embed`. For images it embeds the frame's scripted
    scene description (what a captioner should ideally have said), looked up
    from a JSONL table, so image/text cosine similarity behaves like a joint
    embedding space.
    """

    def __init__(self, descriptions_path: str | Path | None = None, dim: int = 64):
        self.dim = dim
        self._descriptions: dict[tuple[str, int], str] = {}
        if descriptions_path is not None:
            self._descriptions = {
                (rec["video_id"], int(rec["frame_index"])): rec["description"]
                for rec in read_jsonl(descriptions_path)
            }

    def embed_text(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim)

    def embed_image(self, video_id: str, frame_index: int) -> np.ndarray:
        try:
            description = self._descriptions[(video_id, int(frame_index))]
        except KeyError:
            raise TransportError(f"no scripted description for {video_id}:{frame_index}")
        return hash_embed(description, self.dim)


class HttpEmbedder:
    def __init__(self, endpoint: str = "", dim: int = 64, session=None, timeout_s: float = 30.0):
        self.endpoint = endpoint or os.environ.get(ENV_EMBED_ENDPOINT, "")
        self.dim = dim
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise ValueError(f"embed endpoint missing; set {ENV_EMBED_ENDPOINT}")
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def embed_text(self, text: str) -> np.ndarray:
        data = _post_json(self._session, self.endpoint, {"text": text}, self.timeout_s)
        return np.asarray(data["embedding"], dtype=np.float64)

    def embed_image(self, video_id: str, frame_index: int) -> np.ndarray:
        payload = {"video_id": video_id, "frame_index": frame_index}
        data = _post_json(self._session, self.endpoint, payload, self.timeout_s)
        return np.asarray(data["embedding"], dtype=np.float64)


# --------------------------------------------------------------------------
# LLM


class LLMClient(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


class CallableLLM:
    """Wraps a pure `prompt -> response` function; handy in unit tests."""

    def __init__(self, fn: Callable[[str], str], model_id: str = "callable-llm"):
        self._fn = fn
        self.model_id = model_id

    def complete(self, prompt: str) -> str:
        return self._fn(prompt)


class HttpLLM:
    def __init__(self, endpoint: str = "", model: str = "", session=None, timeout_s: float = 120.0):
        self.endpoint = endpoint or os.environ.get(ENV_LLM_ENDPOINT, "")
        self.model_id = model or os.environ.get(ENV_LLM_MODEL, "default-llm")
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise ValueError(f"LLM endpoint missing; set {ENV_LLM_ENDPOINT}")
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def complete(self, prompt: str) -> str:
        payload = {"model": self.model_id, "prompt": prompt, "temperature": 0}
        data = _post_json(self._session, self.endpoint, payload, self.timeout_s)
        return str(data["text"])


# --------------------------------------------------------------------------


def _post_json(session, endpoint: str, payload: dict, timeout_s: float) -> dict:
    import requests

    try:
        resp = session.post(endpoint, json=payload, timeout=timeout_s)
    except requests.RequestException as exc:
        raise TransportError(f"POST {endpoint} failed: {exc}") from exc
    if resp.status_code != 200:
        raise TransportError(f"POST {endpoint} returned {resp.status_code}")
    return resp.json()
