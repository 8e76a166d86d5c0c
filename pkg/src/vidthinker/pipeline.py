"""End-to-end annotation pipeline and its batch/file plumbing.

For one (video, qa) record the stages run strictly in order: segment the
timeline into clips, distill the QA into a search cue, caption every clip
chronologically under that cue, retrieve the clips that cover question and
answer, classify the instruction type, collect per-frame yes/no verdicts
inside the retrieved clips, then hand the yes-frames to the type-dispatched
sampler. Any stage error becomes a structured failure record and the batch
moves on.

Annotation files are JSONL: one header object, then one record per line with
lexicographically sorted keys, UTF-8, LF line endings. Records are sorted by
(video_id, qa_id) before writing, so output bytes do not depend on worker
scheduling.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import StageFailure, ValidationError, VidThinkerError
from .features import FrameFeatureSet, load_features
from .reasoning import (
    ReasonerClient,
    caption_clip,
    extract_key_phrases,
    retrieve_clips,
    verdict_frame,
)
from .sampling import SamplePlan, rate_stride, sample_frames
from .taxonomy import classify, collect_signals
from .timeline import Clip, InstructionType, QAPair, VideoTimeline, segment_uniform, time_of_frame

FORMAT_NAME = "vidthinker.annotations"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    clip_seconds: float = 5.0
    budget: int = 32
    fixed_rate_fps: float = 1.0
    verdict_fps: float = 1.0
    sample_fps: float = 1.0  # frame rate the feature files were sampled at
    max_workers: int = 4
    max_parallel_requests: int = 8
    retries: int = 3
    backoff_s: float = 0.5
    trace: bool = False


@dataclass(frozen=True)
class Provenance:
    """Raw reasoning evidence retained with every annotation."""

    key_phrases: str
    captions: tuple[str, ...]
    retrieval_explanation: str
    verdict_frames: tuple[int, ...]
    verdict_bitmap: tuple[bool, ...]
    backfill_frames: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "captions", tuple(self.captions))
        object.__setattr__(self, "verdict_frames", tuple(self.verdict_frames))
        object.__setattr__(self, "verdict_bitmap", tuple(self.verdict_bitmap))
        object.__setattr__(self, "backfill_frames", tuple(self.backfill_frames))
        if len(self.verdict_frames) != len(self.verdict_bitmap):
            raise ValidationError("verdict bitmap must align with verdict frames")


@dataclass(frozen=True)
class GroundingAnnotation:
    video_id: str
    qa_id: str
    instruction_type: InstructionType
    relevant_clip_indices: tuple[int, ...]
    frame_indices: tuple[int, ...]
    frame_timestamps_s: tuple[float, ...]
    provenance: Provenance

    def __post_init__(self) -> None:
        object.__setattr__(self, "relevant_clip_indices", tuple(self.relevant_clip_indices))
        object.__setattr__(self, "frame_indices", tuple(self.frame_indices))
        object.__setattr__(self, "frame_timestamps_s", tuple(self.frame_timestamps_s))
        if not self.frame_indices:
            raise ValidationError("annotation must select at least one frame")
        if len(self.frame_indices) != len(self.frame_timestamps_s):
            raise ValidationError("timestamps must align with frame indices")
        if list(self.frame_indices) != sorted(set(self.frame_indices)):
            raise ValidationError("frame indices must be sorted and unique")
        empty = not self.relevant_clip_indices
        if empty != (self.instruction_type is InstructionType.NON_CLUES):
            raise ValidationError(
                "relevant clips must be empty exactly for non-clues annotations"
            )


@dataclass(frozen=True)
class FailureRecord:
    """One (video, qa) record the batch could not annotate."""

    video_id: str
    qa_id: str | None
    stage: str
    cause: str

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "qa_id": self.qa_id,
            "stage": self.stage,
            "cause": self.cause,
        }


def clip_ref(video_id: str, clip_index: int) -> str:
    return f"{video_id}/clip-{clip_index:04d}"


def frame_ref(video_id: str, frame_index: int) -> str:
    return f"{video_id}/frame-{frame_index:06d}"


def _run_stage(stage: str, fn, *args):
    try:
        return fn(*args)
    except StageFailure:
        raise
    except VidThinkerError as exc:
        raise StageFailure(stage, exc) from exc


def annotate(
    timeline: VideoTimeline,
    features: FrameFeatureSet,
    qa: QAPair,
    config: PipelineConfig,
    client: ReasonerClient,
) -> GroundingAnnotation:
    """Annotate one (video, qa) record; raises StageFailure on any stage error."""
    if features.frame_count != timeline.frame_count:
        raise StageFailure(
            "features",
            f"feature rows {features.frame_count} != timeline frames {timeline.frame_count}",
        )
    clips = _run_stage("segment", segment_uniform, timeline, config.clip_seconds)

    cue = _run_stage("key_phrases", extract_key_phrases, qa, client)

    def _caption_all() -> list[str]:
        return [
            caption_clip(cue, clip_ref(timeline.video_id, clip.index), client)
            for clip in clips
        ]

    captions = _run_stage("captions", _caption_all)
    retrieval = _run_stage("retrieval", retrieve_clips, captions, qa, client)

    signals = _run_stage("classify", collect_signals, qa, retrieval, len(clips), client)
    instruction_type = classify(signals)

    retrieved: list[Clip] = (
        [clips[i] for i in retrieval.clips] if retrieval.clips is not None else []
    )

    verdict_frames: list[int] = []
    verdict_bitmap: list[bool] = []
    pool: list[int] | None = None
    if instruction_type is not InstructionType.NON_CLUES:
        stride = rate_stride(timeline.sample_fps, config.verdict_fps)
        candidates: list[int] = []
        for clip in retrieved:
            candidates.extend(range(clip.start_frame, clip.end_frame_exclusive, stride))

        def _verdict_all() -> list[bool]:
            flags = []
            for idx in candidates:
                verdict = verdict_frame(idx, frame_ref(timeline.video_id, idx), qa, client)
                flags.append(verdict.relevant)
            return flags

        verdict_bitmap = _run_stage("verdicts", _verdict_all)
        verdict_frames = candidates
        pool = [idx for idx, keep in zip(candidates, verdict_bitmap) if keep]
        if not pool:
            # every verdict said no: fall back to all retrieved-clip frames
            pool = [f for clip in retrieved for f in clip.frames()]

    plan = SamplePlan(
        instruction_type=instruction_type,
        timeline=timeline,
        relevant_clips=tuple(retrieved) if instruction_type is not InstructionType.NON_CLUES else (),
        budget=config.budget,
        fixed_rate_fps=config.fixed_rate_fps,
    )
    frame_indices = _run_stage("sample", sample_frames, plan, features, pool)

    in_clips = {f for clip in plan.relevant_clips for f in clip.frames()}
    backfill = (
        tuple(f for f in frame_indices if f not in in_clips) if plan.relevant_clips else ()
    )
    provenance = Provenance(
        key_phrases=cue,
        captions=tuple(captions),
        retrieval_explanation=retrieval.explanation,
        verdict_frames=tuple(verdict_frames),
        verdict_bitmap=tuple(verdict_bitmap),
        backfill_frames=backfill,
    )
    return GroundingAnnotation(
        video_id=timeline.video_id,
        qa_id=qa.qa_id,
        instruction_type=instruction_type,
        relevant_clip_indices=tuple(c.index for c in plan.relevant_clips),
        frame_indices=tuple(frame_indices),
        frame_timestamps_s=tuple(time_of_frame(timeline, f) for f in frame_indices),
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# manifest + QA files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    feature_path: Path
    qa_path: Path


def load_manifest(path: str | Path) -> tuple[list[ManifestEntry], list[FailureRecord]]:
    """Parse a TSV manifest: video_id, feature path, QA file path per line.

    Relative paths resolve against the manifest's directory. Malformed lines
    become failure records instead of aborting the batch.
    """
    manifest_path = Path(path)
    base = manifest_path.parent
    entries: list[ManifestEntry] = []
    failures: list[FailureRecord] = []
    text = manifest_path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            failures.append(
                FailureRecord(
                    video_id=parts[0].strip() if parts and parts[0].strip() else f"line-{lineno}",
                    qa_id=None,
                    stage="manifest",
                    cause=f"line {lineno}: expected 3 tab-separated fields",
                )
            )
            continue
        video_id, feature_path, qa_path = (p.strip() for p in parts)
        entries.append(
            ManifestEntry(
                video_id=video_id,
                feature_path=(base / feature_path).resolve(),
                qa_path=(base / qa_path).resolve(),
            )
        )
    return entries, failures


def load_qa_file(path: str | Path) -> list[QAPair]:
    """Read a QA file: a JSON list of {qa_id, question, answer, options?}."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read QA file {path}: {exc}") from exc
    if not isinstance(data, list):
        raise ValidationError(f"QA file {path} must hold a JSON list")
    pairs = []
    for item in data:
        if not isinstance(item, dict):
            raise ValidationError(f"QA file {path} entries must be objects")
        options = item.get("options")
        pairs.append(
            QAPair(
                qa_id=str(item.get("qa_id", "")),
                question=str(item.get("question", "")),
                answer=str(item.get("answer", "")),
                options=tuple(options) if options else None,
            )
        )
    return pairs


# ---------------------------------------------------------------------------
# batch
# ---------------------------------------------------------------------------


def _annotate_video(
    entry: ManifestEntry, config: PipelineConfig, client: ReasonerClient
) -> tuple[list[GroundingAnnotation], list[FailureRecord]]:
    annotations: list[GroundingAnnotation] = []
    failures: list[FailureRecord] = []
    try:
        features = load_features(entry.feature_path, video_id=entry.video_id)
    except (VidThinkerError, OSError) as exc:
        return [], [FailureRecord(entry.video_id, None, "load_features", str(exc))]
    try:
        qa_pairs = load_qa_file(entry.qa_path)
    except (VidThinkerError, OSError) as exc:
        return [], [FailureRecord(entry.video_id, None, "load_qa", str(exc))]
    try:
        timeline = VideoTimeline(
            video_id=entry.video_id,
            duration_s=features.frame_count / config.sample_fps,
            sample_fps=config.sample_fps,
            frame_count=features.frame_count,
        )
    except VidThinkerError as exc:
        return [], [FailureRecord(entry.video_id, None, "timeline", str(exc))]
    for qa in qa_pairs:
        try:
            annotations.append(annotate(timeline, features, qa, config, client))
        except StageFailure as exc:
            failures.append(FailureRecord(entry.video_id, qa.qa_id, exc.stage, exc.cause))
        except VidThinkerError as exc:
            failures.append(FailureRecord(entry.video_id, qa.qa_id, "annotate", str(exc)))
    return annotations, failures


def annotate_batch(
    manifest_path: str | Path, config: PipelineConfig, client: ReasonerClient
) -> tuple[list[GroundingAnnotation], list[FailureRecord]]:
    """Annotate every manifest record with bounded video-level parallelism.

    Output ordering is independent of scheduling: annotations sort by
    (video_id, qa_id) and failures by (video_id, qa_id, stage).
    """
    entries, failures = load_manifest(manifest_path)
    annotations: list[GroundingAnnotation] = []
    if entries:
        workers = max(1, min(config.max_workers, len(entries)))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(
                executor.map(lambda e: _annotate_video(e, config, client), entries)
            )
        for video_annotations, video_failures in results:
            annotations.extend(video_annotations)
            failures.extend(video_failures)
    annotations.sort(key=lambda a: (a.video_id, a.qa_id))
    failures.sort(key=lambda f: (f.video_id, f.qa_id or "", f.stage))
    return annotations, failures


# ---------------------------------------------------------------------------
# annotation files
# ---------------------------------------------------------------------------


def annotation_to_dict(annotation: GroundingAnnotation) -> dict:
    return {
        "video_id": annotation.video_id,
        "qa_id": annotation.qa_id,
        "instruction_type": annotation.instruction_type.value,
        "relevant_clip_indices": list(annotation.relevant_clip_indices),
        "frame_indices": list(annotation.frame_indices),
        "frame_timestamps_s": list(annotation.frame_timestamps_s),
        "provenance": {
            "key_phrases": annotation.provenance.key_phrases,
            "captions": list(annotation.provenance.captions),
            "retrieval_explanation": annotation.provenance.retrieval_explanation,
            "verdict_frames": list(annotation.provenance.verdict_frames),
            "verdict_bitmap": list(annotation.provenance.verdict_bitmap),
            "backfill_frames": list(annotation.provenance.backfill_frames),
        },
    }


def annotation_from_dict(record: dict) -> GroundingAnnotation:
    try:
        prov = record["provenance"]
        return GroundingAnnotation(
            video_id=record["video_id"],
            qa_id=record["qa_id"],
            instruction_type=InstructionType(record["instruction_type"]),
            relevant_clip_indices=tuple(record["relevant_clip_indices"]),
            frame_indices=tuple(record["frame_indices"]),
            frame_timestamps_s=tuple(record["frame_timestamps_s"]),
            provenance=Provenance(
                key_phrases=prov["key_phrases"],
                captions=tuple(prov["captions"]),
                retrieval_explanation=prov["retrieval_explanation"],
                verdict_frames=tuple(prov["verdict_frames"]),
                verdict_bitmap=tuple(prov["verdict_bitmap"]),
                backfill_frames=tuple(prov["backfill_frames"]),
            ),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed annotation record: {exc}") from exc


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_annotations(
    annotations: list[GroundingAnnotation], path: str | Path
) -> None:
    """Write the canonical annotation JSONL: header line, then sorted records."""
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    lines = [_dumps(header)]
    ordered = sorted(annotations, key=lambda a: (a.video_id, a.qa_id))
    lines.extend(_dumps(annotation_to_dict(a)) for a in ordered)
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def read_annotations(path: str | Path) -> list[GroundingAnnotation]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.split("\n") if line]
    if not lines:
        raise ValidationError(f"{path}: missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise ValidationError(f"{path}: not an annotation file")
    if header.get("version") != FORMAT_VERSION:
        raise ValidationError(f"{path}: unsupported version {header.get('version')}")
    records = []
    for lineno, line in enumerate(lines[1:], 2):
        try:
            records.append(annotation_from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return records


def write_failures(failures: list[FailureRecord], path: str | Path) -> None:
    lines = [_dumps(f.to_dict()) for f in failures]
    payload = ("\n".join(lines) + "\n") if lines else ""
    Path(path).write_bytes(payload.encode("utf-8"))


def write_trace(client: ReasonerClient, path: str | Path) -> None:
    """Dump every prompt/response the client saw to a JSONL sidecar."""
    lines = [
        _dumps(
            {
                "role": entry.role,
                "prompt": entry.prompt,
                "attachments": list(entry.attachments),
                "response": entry.response,
            }
        )
        for entry in client.trace_entries
    ]
    payload = ("\n".join(lines) + "\n") if lines else ""
    Path(path).write_bytes(payload.encode("utf-8"))
