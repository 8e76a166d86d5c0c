"""Reasoning-service boundary: request types, response parsers, backends.

Wire protocol (shared by the HTTP backend and the bundled service): POST a
JSON object ``{"role": ..., "prompt": ..., "attachments": [...]}`` to a single
endpoint and read back ``{"text": ...}``. The mock backend answers the same
requests from a scenario file keyed by ``role:sha256(prompt)[:16]`` with
optional per-role defaults, so batch runs replay byte-identically.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from . import prompts
from .errors import (
    ParseError,
    ProtocolError,
    ScenarioError,
    TransportError,
    ValidationError,
)
from .timeline import QAPair

ROLE_KEY_PHRASES = "key_phrases"
ROLE_CLIP_CAPTION = "clip_caption"
ROLE_CLIP_RETRIEVAL = "clip_retrieval"
ROLE_FRAME_VERDICT = "frame_verdict"
ROLE_CLASSIFY_MOTION = "classify_motion"
ROLE_CLASSIFY_NONEXISTENCE = "classify_nonexistence"
ROLE_CLASSIFY_HOLISTIC = "classify_holistic"
ROLE_CLASSIFY_SEMANTIC = "classify_semantic"

ROLES = frozenset(
    {
        ROLE_KEY_PHRASES,
        ROLE_CLIP_CAPTION,
        ROLE_CLIP_RETRIEVAL,
        ROLE_FRAME_VERDICT,
        ROLE_CLASSIFY_MOTION,
        ROLE_CLASSIFY_NONEXISTENCE,
        ROLE_CLASSIFY_HOLISTIC,
        ROLE_CLASSIFY_SEMANTIC,
    }
)
# roles whose requests ship a media reference alongside the prompt
ATTACHMENT_ROLES = frozenset({ROLE_CLIP_CAPTION, ROLE_FRAME_VERDICT})

ENDPOINT_ENV_VAR = "VIDTHINKER_REASONER_URL"

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 0.5
DEFAULT_MAX_PARALLEL = 8


@dataclass(frozen=True)
class ReasonRequest:
    role: str
    prompt: str
    attachments: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValidationError(f"unknown role {self.role!r}")
        if not self.prompt:
            raise ValidationError("prompt must be non-empty")
        object.__setattr__(self, "attachments", tuple(self.attachments))
        if self.role in ATTACHMENT_ROLES:
            if not self.attachments:
                raise ValidationError(f"role {self.role} requires attachments")
        elif self.attachments:
            raise ValidationError(f"role {self.role} does not take attachments")


@dataclass(frozen=True)
class RetrievalResult:
    """Outcome of clip retrieval: an explanation plus the chosen clip indexes.

    ``clips`` is None when retrieval found no clues; an empty tuple is
    normalized to None because the two encode the same state.
    """

    explanation: str
    clips: tuple[int, ...] | None

    def __post_init__(self) -> None:
        if self.clips is not None:
            clips = tuple(self.clips)
            if not clips:
                object.__setattr__(self, "clips", None)
                return
            if any(b <= a for a, b in zip(clips, clips[1:])):
                raise ValidationError(f"clip indexes must strictly increase: {clips}")
            if clips[0] < 0:
                raise ValidationError(f"clip indexes must be >= 0: {clips}")
            object.__setattr__(self, "clips", clips)


@dataclass(frozen=True)
class FrameVerdict:
    frame_index: int
    relevant: bool


# ---------------------------------------------------------------------------
# response parsing
# ---------------------------------------------------------------------------

_ONE_CLIP_RE = re.compile(r"^\s*One clip:\s*\[\s*Clip-(\d+)\s*\]\s*\.?\s*$", re.IGNORECASE)
_MULTI_SHAPE_RE = re.compile(
    r"^\s*Multiple clips:\s*\[\s*Clip-\d+(?:\s*,\s*Clip-\d+)*\s*\]\s*\.?\s*$",
    re.IGNORECASE,
)
_CLIP_INDEX_RE = re.compile(r"Clip-(\d+)", re.IGNORECASE)
_NONE_RE = re.compile(r"^\s*None\.?\s*$", re.IGNORECASE)
_WORD_RE = re.compile(r"[A-Za-z]+")


def _extract_json_object(text: str) -> dict | None:
    """First JSON object found anywhere in the text, fences and prose ignored."""
    decoder = json.JSONDecoder()
    pos = text.find("{")
    fallback = None
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except (json.JSONDecodeError, RecursionError, ValueError):
            pass
        else:
            if isinstance(obj, dict):
                if "clip_num" in obj:
                    return obj
                if fallback is None:
                    fallback = obj
        pos = text.find("{", pos + 1)
    return fallback


def parse_clip_num(text: str, n_clips: int | None = None) -> RetrievalResult:
    """Parse a retrieval response into a :class:`RetrievalResult`.

    Accepts the three response arms ``One clip: [Clip-i]``,
    ``Multiple clips: [Clip-i, Clip-j, ...]`` and ``None.`` inside a JSON
    object that may be wrapped in prose or markdown fences. Out-of-range
    indexes are parse errors, never clamped.
    """
    obj = _extract_json_object(text)
    if obj is None:
        raise ParseError("no JSON object found in response", text=text)
    clip_num = obj.get("clip_num")
    if not isinstance(clip_num, str):
        raise ParseError("response object lacks a string clip_num field", text=text)
    explanation = obj.get("explanation")
    explanation = explanation if isinstance(explanation, str) else ""

    if _NONE_RE.match(clip_num):
        return RetrievalResult(explanation, None)
    one = _ONE_CLIP_RE.match(clip_num)
    if one:
        indexes = [int(one.group(1))]
    elif _MULTI_SHAPE_RE.match(clip_num):
        indexes = sorted({int(m) for m in _CLIP_INDEX_RE.findall(clip_num)})
    else:
        raise ParseError(f"clip_num matches no grammar arm: {clip_num!r}", text=text)
    if n_clips is not None and indexes and indexes[-1] >= n_clips:
        raise ParseError(
            f"clip index {indexes[-1]} out of range for {n_clips} clips", text=text
        )
    return RetrievalResult(explanation, tuple(indexes))


def render_clip_num(result: RetrievalResult) -> str:
    """Canonical clip_num string for a retrieval result (inverse of parsing)."""
    if result.clips is None:
        return "None."
    if len(result.clips) == 1:
        return f"One clip: [Clip-{result.clips[0]}]"
    return "Multiple clips: [" + ", ".join(f"Clip-{i}" for i in result.clips) + "]"


def parse_yes_no(text: str) -> bool:
    """Read a yes/no verdict from the first word of a response."""
    match = _WORD_RE.search(text)
    if match is None:
        raise ParseError("no yes/no token in response", text=text)
    token = match.group(0).lower()
    if token == "yes":
        return True
    if token == "no":
        return False
    raise ParseError(f"expected yes or no, got {token!r}", text=text)


# ---------------------------------------------------------------------------
# backends
# ---------------------------------------------------------------------------


class ReasonerBackend(Protocol):
    def complete(self, request: ReasonRequest) -> str: ...


def scenario_key(role: str, prompt: str) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
    return f"{role}:{digest}"


class MockReasoner:
    """Replays pinned responses from a scenario mapping.

    The scenario is a JSON object with a ``responses`` map from
    ``role:sha256(prompt)[:16]`` to response text and an optional
    ``defaults`` map from role to fallback text. Responses are a pure
    function of the request, so runs replay deterministically.
    """

    def __init__(self, scenario: dict):
        if not isinstance(scenario, dict):
            raise ValidationError("scenario must be a JSON object")
        responses = scenario.get("responses", {})
        defaults = scenario.get("defaults", {})
        if not isinstance(responses, dict) or not isinstance(defaults, dict):
            raise ValidationError("scenario responses/defaults must be objects")
        self._responses = {str(k): str(v) for k, v in responses.items()}
        self._defaults = {str(k): str(v) for k, v in defaults.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "MockReasoner":
        try:
            scenario = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot load scenario {path}: {exc}") from exc
        return cls(scenario)

    def complete(self, request: ReasonRequest) -> str:
        key = scenario_key(request.role, request.prompt)
        if key in self._responses:
            return self._responses[key]
        if request.role in self._defaults:
            return self._defaults[request.role]
        raise ScenarioError(f"no scenario response for {key} (role {request.role})")


class HttpReasoner:
    """Talks to a reasoning service over the single-endpoint wire protocol."""

    def __init__(
        self,
        url: str,
        timeout_s: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if not url:
            raise ValidationError("endpoint url must be non-empty")
        self._url = url
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def complete(self, request: ReasonRequest) -> str:
        payload = {
            "role": request.role,
            "prompt": request.prompt,
            "attachments": list(request.attachments),
        }
        try:
            response = self._client.post(self._url, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"POST {self._url} failed: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(f"POST {self._url} returned {response.status_code}")
        try:
            body = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProtocolError(f"non-JSON response from {self._url}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ProtocolError(f"response from {self._url} lacks a text field")
        return body["text"]

    def close(self) -> None:
        self._client.close()


@dataclass
class TraceEntry:
    role: str
    prompt: str
    attachments: tuple[str, ...]
    response: str


class ReasonerClient:
    """Backend wrapper enforcing retry, parallelism, and provenance capture.

    Transport failures are retried with exponential backoff; every other
    error (parse, scenario miss, protocol) is deterministic and surfaces
    immediately. A shared semaphore bounds in-flight requests across all
    threads using this client.
    """

    def __init__(
        self,
        backend: ReasonerBackend,
        max_parallel: int = DEFAULT_MAX_PARALLEL,
        retries: int = DEFAULT_RETRIES,
        backoff_s: float = DEFAULT_BACKOFF_S,
        trace: bool = False,
    ):
        if max_parallel < 1:
            raise ValidationError(f"max_parallel must be >= 1, got {max_parallel}")
        if retries < 0:
            raise ValidationError(f"retries must be >= 0, got {retries}")
        self._backend = backend
        self._semaphore = threading.Semaphore(max_parallel)
        self._retries = retries
        self._backoff_s = backoff_s
        self._trace_lock = threading.Lock()
        self._trace: list[TraceEntry] | None = [] if trace else None

    def complete(self, request: ReasonRequest) -> str:
        with self._semaphore:
            attempt = 0
            while True:
                try:
                    text = self._backend.complete(request)
                    break
                except TransportError:
                    if attempt >= self._retries:
                        raise
                    time.sleep(self._backoff_s * (2**attempt))
                    attempt += 1
        if self._trace is not None:
            with self._trace_lock:
                self._trace.append(
                    TraceEntry(request.role, request.prompt, request.attachments, text)
                )
        return text

    @property
    def trace_entries(self) -> list[TraceEntry]:
        if self._trace is None:
            return []
        with self._trace_lock:
            return list(self._trace)


# ---------------------------------------------------------------------------
# role-level operations
# ---------------------------------------------------------------------------


def extract_key_phrases(qa: QAPair, client: ReasonerClient) -> str:
    """Distill a QA pair into the phrase describing the evidence to find."""
    prompt = prompts.build_key_phrase_prompt(qa)
    return client.complete(ReasonRequest(ROLE_KEY_PHRASES, prompt)).strip()


def caption_clip(cue: str, clip_ref: str, client: ReasonerClient) -> str:
    """Describe one clip, steered toward the distilled cue."""
    prompt = prompts.build_caption_prompt(cue, clip_ref)
    request = ReasonRequest(ROLE_CLIP_CAPTION, prompt, attachments=(clip_ref,))
    return client.complete(request).strip()


def retrieve_clips(
    captions: list[str], qa: QAPair, client: ReasonerClient
) -> RetrievalResult:
    """Pick the clips whose captions cover the question and the answer."""
    if not captions:
        raise ValidationError("retrieval needs at least one caption")
    prompt = prompts.build_retrieval_prompt(captions, qa)
    raw = client.complete(ReasonRequest(ROLE_CLIP_RETRIEVAL, prompt))
    return parse_clip_num(raw, n_clips=len(captions))


def verdict_frame(
    frame_index: int, frame_ref: str, qa: QAPair, client: ReasonerClient
) -> FrameVerdict:
    """Ask whether a single frame shows evidence for the QA pair."""
    prompt = prompts.build_verdict_prompt(frame_ref, qa)
    request = ReasonRequest(ROLE_FRAME_VERDICT, prompt, attachments=(frame_ref,))
    return FrameVerdict(frame_index, parse_yes_no(client.complete(request)))


def probe_yes_no(role: str, prompt: str, client: ReasonerClient) -> bool:
    return parse_yes_no(client.complete(ReasonRequest(role, prompt)))
