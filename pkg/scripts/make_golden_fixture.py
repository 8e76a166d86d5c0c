#!/usr/bin/env python3
"""Regenerate the committed pipeline fixture under tests/data/.

Runs the full pipeline against a rule-driven backend, records every
prompt/response pair into a replayable scenario file, then replays the
scenario through the mock backend and freezes the resulting annotation file
as the golden output. Rerun this only when pipeline behavior intentionally
changes, and commit the refreshed files.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from vidthinker.features import FrameFeatureSet, save_features
from vidthinker.pipeline import PipelineConfig, annotate_batch, write_annotations
from vidthinker.reasoning import (
    MockReasoner,
    ReasonerClient,
    ReasonRequest,
    ROLE_CLASSIFY_HOLISTIC,
    ROLE_CLASSIFY_MOTION,
    ROLE_CLASSIFY_NONEXISTENCE,
    ROLE_CLASSIFY_SEMANTIC,
    ROLE_CLIP_CAPTION,
    ROLE_CLIP_RETRIEVAL,
    ROLE_FRAME_VERDICT,
    ROLE_KEY_PHRASES,
    scenario_key,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"

QA_A = [
    {
        "qa_id": "a-q1",
        "question": "What does the man playing the drums do with his feet as he plays the drum?",
        "answer": "He moves his feet.",
    },
    {
        "qa_id": "a-q2",
        "question": "Please describe the video in detail.",
        "answer": "A band performs in a garage, then packs up their gear.",
    },
    {
        "qa_id": "a-q3",
        "question": "Which moves faster, the white car or the bicycle?",
        "answer": "B. The white car.",
        "options": ["A. The bicycle.", "B. The white car."],
    },
]

QA_B = [
    {
        "qa_id": "b-q1",
        "question": "How does the camera move while the woman assembles the shelf?",
        "answer": "It pans slowly from left to right.",
    },
    {
        "qa_id": "b-q2",
        "question": "Does the person clean the sink area?",
        "answer": "No, the sink is never cleaned.",
    },
    {
        "qa_id": "b-q3",
        "question": "What color is the toolbox on the bench?",
        "answer": "Red.",
    },
]

KEY_PHRASES = {
    "a-q1": "The man playing the drums moves his feet and hits the drums with his hands.",
    "a-q2": "A band performs in a garage and then packs up their gear.",
    "a-q3": "The white car moves faster than the bicycle.",
    "b-q1": "The camera pans slowly from left to right while the woman assembles the shelf.",
    "b-q2": "The person never cleans the sink area.",
    "b-q3": "A red toolbox sits on the bench.",
}

# kitchen-a has 60 frames -> 12 clips; workshop-b has 47 frames -> 10 clips
RETRIEVAL = {
    "a-q1": '{"explanation": "Clip-2 shows the drummer using his feet on the pedals.", "clip_num": "One clip: [Clip-2]"}',
    "a-q2": '{"explanation": "A full description needs every clip.", "clip_num": "Multiple clips: [Clip-0, Clip-1, Clip-2, Clip-3, Clip-4, Clip-5, Clip-6, Clip-7, Clip-8, Clip-9, Clip-10, Clip-11]"}',
    "a-q3": '{"explanation": "The white car and the bicycle move through Clip-4 and Clip-5.", "clip_num": "Multiple clips: [Clip-4, Clip-5]"}',
    "b-q1": '{"explanation": "The shelf assembly with the pan spans Clip-1 and Clip-3.", "clip_num": "Multiple clips: [Clip-1, Clip-3]"}',
    "b-q2": '{"explanation": "The sink only appears in Clip-8, so it is the closest clue.", "clip_num": "One clip: [Clip-8]"}',
    "b-q3": '{"explanation": "The bench with the toolbox appears in Clip-7.", "clip_num": "One clip: [Clip-7]"}',
}

# probe answers: (motion, nonexistence, holistic, semantic)
PROBES = {
    "a-q1": ("No", "No", "No", "Yes"),
    "a-q2": ("No", "No", "Yes", "Yes"),
    "a-q3": ("Yes", "No", "No", "No"),
    "b-q1": ("Yes", "No", "No", "Yes"),
    "b-q2": ("No", "Yes", "No", "Yes"),
    "b-q3": ("No", "No", "No", "Yes"),
}

YES_FRAMES = {
    "a-q1": {11, 13},
    "a-q3": {20, 21, 22, 23, 24, 25, 27, 29},
    "b-q1": {5, 6, 7, 8, 9, 15, 16, 17},
    "b-q2": {41, 43},
    "b-q3": set(),  # every verdict no -> fallback to all retrieved-clip frames
}

CAPTIONS = {
    "kitchen-a/clip-0002": "A man plays the drums, moving his feet on the pedals and striking the drums with his hands.",
    "kitchen-a/clip-0004": "A white car drives past the open garage while a bicycle rolls along the curb.",
    "kitchen-a/clip-0005": "The white car pulls ahead of the bicycle on the street outside.",
    "workshop-b/clip-0001": "The camera pans from left to right as a woman lays out shelf boards.",
    "workshop-b/clip-0003": "The pan continues while the woman screws the shelf brackets together.",
    "workshop-b/clip-0007": "A red toolbox sits on the workbench next to a stack of clamps.",
    "workshop-b/clip-0008": "A cluttered sink area is visible in the corner; nobody touches it.",
}

_PROBE_ROLES = {
    ROLE_CLASSIFY_MOTION: 0,
    ROLE_CLASSIFY_NONEXISTENCE: 1,
    ROLE_CLASSIFY_HOLISTIC: 2,
    ROLE_CLASSIFY_SEMANTIC: 3,
}

ALL_QA = {q["qa_id"]: q for q in QA_A + QA_B}


def qa_id_of(prompt: str) -> str:
    for qa_id, qa in ALL_QA.items():
        if qa["question"] in prompt:
            return qa_id
    raise KeyError(f"no fixture QA matches prompt: {prompt[:80]!r}")


class RuleBackend:
    """Deterministic stand-in model; records everything it answers."""

    def __init__(self) -> None:
        self.recorded: dict[str, str] = {}

    def complete(self, request: ReasonRequest) -> str:
        text = self._answer(request)
        self.recorded[scenario_key(request.role, request.prompt)] = text
        return text

    def _answer(self, request: ReasonRequest) -> str:
        role, prompt = request.role, request.prompt
        if role == ROLE_KEY_PHRASES:
            return KEY_PHRASES[qa_id_of(prompt)]
        if role == ROLE_CLIP_CAPTION:
            ref = request.attachments[0]
            return CAPTIONS.get(ref, f"Ordinary activity continues in {ref}.")
        if role == ROLE_CLIP_RETRIEVAL:
            return RETRIEVAL[qa_id_of(prompt)]
        if role == ROLE_FRAME_VERDICT:
            frame_index = int(request.attachments[0].rsplit("-", 1)[1])
            return "Yes" if frame_index in YES_FRAMES[qa_id_of(prompt)] else "No"
        if role in _PROBE_ROLES:
            return PROBES[qa_id_of(prompt)][_PROBE_ROLES[role]]
        raise KeyError(f"unhandled role {role}")


def make_features(video_id: str, frame_count: int, seed: int) -> FrameFeatureSet:
    rng = np.random.default_rng(seed)
    dim = 6
    centers = np.eye(dim, dtype=np.float64)[:3]
    scene = np.minimum(np.arange(frame_count) * 3 // frame_count, 2)
    rows = centers[scene] + 0.05 * rng.standard_normal((frame_count, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return FrameFeatureSet(video_id, rows.astype(np.float32), normalized=True)


def main() -> int:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    save_features(make_features("kitchen-a", 60, 11), DATA_DIR / "kitchen-a.vitg")
    save_features(make_features("workshop-b", 47, 13), DATA_DIR / "workshop-b.vitg")
    (DATA_DIR / "qa_a.json").write_text(json.dumps(QA_A, indent=2) + "\n", encoding="utf-8")
    (DATA_DIR / "qa_b.json").write_text(json.dumps(QA_B, indent=2) + "\n", encoding="utf-8")
    manifest = "kitchen-a\tkitchen-a.vitg\tqa_a.json\nworkshop-b\tworkshop-b.vitg\tqa_b.json\n"
    (DATA_DIR / "manifest.tsv").write_text(manifest, encoding="utf-8")

    config = PipelineConfig()
    backend = RuleBackend()
    annotations, failures = annotate_batch(
        DATA_DIR / "manifest.tsv", config, ReasonerClient(backend)
    )
    if failures:
        for failure in failures:
            print("FAILURE:", failure, file=sys.stderr)
        return 1

    scenario = {"responses": dict(sorted(backend.recorded.items()))}
    (DATA_DIR / "scenario.json").write_text(
        json.dumps(scenario, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    # replay through the mock to prove the scenario is complete, then freeze
    replayed, replay_failures = annotate_batch(
        DATA_DIR / "manifest.tsv",
        config,
        ReasonerClient(MockReasoner.from_file(DATA_DIR / "scenario.json")),
    )
    if replay_failures or replayed != annotations:
        print("replay mismatch", file=sys.stderr)
        return 1
    write_annotations(replayed, DATA_DIR / "golden_annotations.jsonl")
    print(f"wrote fixture: {len(replayed)} annotations, "
          f"{len(backend.recorded)} pinned responses")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
