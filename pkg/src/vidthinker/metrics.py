"""Grounding quality metrics, policy comparison reports, timing tables."""
from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError


def _check_indices(name: str, indices: Iterable[int], frame_count: int | None) -> set[int]:
    out = set()
    for idx in indices:
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise ValidationError(f"{name} index {idx!r} is not a non-negative integer")
        if frame_count is not None and idx >= frame_count:
            raise ValidationError(f"{name} index {idx} outside [0, {frame_count})")
        out.add(idx)
    return out


def frame_iou(
    pred: Iterable[int], gt: Iterable[int], frame_count: int | None = None
) -> float:
    """Set IoU over frame indices. Both empty counts as perfect agreement."""
    p = _check_indices("pred", pred, frame_count)
    g = _check_indices("gt", gt, frame_count)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    return len(p & g) / len(p | g)


def _check_intervals(name: str, intervals: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    out = []
    for pair in intervals:
        if len(pair) != 2:
            raise ValidationError(f"{name} interval {pair!r} must have two endpoints")
        start, end = float(pair[0]), float(pair[1])
        if not (math.isfinite(start) and math.isfinite(end)) or start >= end:
            raise ValidationError(f"{name} interval [{start}, {end}) is empty or invalid")
        out.append((start, end))
    return out


def _merged_length(intervals: list[tuple[float, float]]) -> float:
    merged: list[list[float]] = []
    for start, end in sorted(intervals):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return sum(end - start for start, end in merged)


def segment_iou(
    pred: Sequence[Sequence[float]], gt: Sequence[Sequence[float]]
) -> float:
    """IoU of two interval unions, invariant under splitting intervals."""
    p = _check_intervals("pred", pred)
    g = _check_intervals("gt", gt)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    len_p = _merged_length(p)
    len_g = _merged_length(g)
    len_union = _merged_length(p + g)
    inter = len_p + len_g - len_union
    if len_union <= 0:
        return 0.0
    return max(0.0, inter) / len_union


def recall_at_k(selected: Iterable[int], gt: Iterable[int]) -> float:
    """Fraction of ground-truth frames recovered; empty ground truth is 1.0."""
    s = _check_indices("selected", selected, None)
    g = _check_indices("gt", gt, None)
    if not g:
        return 1.0
    return len(s & g) / len(g)


# ---------------------------------------------------------------------------
# policy comparison
# ---------------------------------------------------------------------------


@dataclass
class PolicyAggregate:
    records: int = 0
    sum_iou: float = 0.0
    sum_recall: float = 0.0

    @property
    def mean_iou(self) -> float:
        return self.sum_iou / self.records if self.records else 0.0

    @property
    def mean_recall(self) -> float:
        return self.sum_recall / self.records if self.records else 0.0


@dataclass
class EvalReport:
    k: int
    policies: dict[str, PolicyAggregate] = field(default_factory=dict)
    records: list[dict] = field(default_factory=list)
    deltas: list[dict] = field(default_factory=list)
    unmatched_pred: list[str] = field(default_factory=list)
    unmatched_gt: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "policies": {
                name: {
                    "records": agg.records,
                    "mean_frame_iou": agg.mean_iou,
                    "mean_recall_at_k": agg.mean_recall,
                }
                for name, agg in sorted(self.policies.items())
            },
            "records": self.records,
            "deltas": self.deltas,
            "unmatched_pred": self.unmatched_pred,
            "unmatched_gt": self.unmatched_gt,
        }


def _read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ValidationError(f"{path}:{lineno}: expected an object per line")
        if "format" in obj and "frame_indices" not in obj:
            continue  # header line
        rows.append(obj)
    return rows


def _as_int_list(path: str | Path, record: dict, key: str) -> list[int]:
    value = record.get(key)
    if not isinstance(value, list) or not all(
        isinstance(x, int) and not isinstance(x, bool) for x in value
    ):
        raise ValidationError(f"{path}: record {record.get('video_id')!r} needs integer {key}")
    return value


def compare_policies(
    pred_path: str | Path,
    gt_path: str | Path,
    k: int,
    report_path: str | Path | None = None,
    json_path: str | Path | None = None,
) -> EvalReport:
    """Grade prediction records against ground truth, grouped by policy.

    Predictions are JSONL records carrying ``video_id``, ``frame_indices``
    and optionally ``qa_id`` and ``policy`` (selection outputs and pipeline
    annotations both qualify). Ground truth reuses the annotation schema.
    Records join on (video_id, qa_id); when exactly two policies are present
    the report carries per-record recall and IoU deltas between them,
    first-policy-by-name minus second.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    gt_map: dict[tuple[str, str], set[int]] = {}
    for record in _read_jsonl(gt_path):
        key = (str(record.get("video_id", "")), str(record.get("qa_id", "")))
        gt_map[key] = set(_as_int_list(gt_path, record, "frame_indices"))

    report = EvalReport(k=k)
    seen_gt = set()
    per_key: dict[tuple[str, str], dict[str, dict]] = {}
    for record in _read_jsonl(pred_path):
        key = (str(record.get("video_id", "")), str(record.get("qa_id", "")))
        policy = str(record.get("policy", "pred"))
        pred_frames = set(_as_int_list(pred_path, record, "frame_indices"))
        if key not in gt_map:
            report.unmatched_pred.append(f"{key[0]}/{key[1]}:{policy}")
            continue
        seen_gt.add(key)
        gt_frames = gt_map[key]
        iou = frame_iou(pred_frames, gt_frames)
        recall = recall_at_k(pred_frames, gt_frames)
        agg = report.policies.setdefault(policy, PolicyAggregate())
        agg.records += 1
        agg.sum_iou += iou
        agg.sum_recall += recall
        row = {
            "video_id": key[0],
            "qa_id": key[1],
            "policy": policy,
            "frame_iou": iou,
            "recall_at_k": recall,
        }
        report.records.append(row)
        per_key.setdefault(key, {})[policy] = row
    report.unmatched_gt = sorted(
        f"{vid}/{qa}" for (vid, qa) in gt_map.keys() - seen_gt
    )
    report.unmatched_pred.sort()
    report.records.sort(key=lambda r: (r["video_id"], r["qa_id"], r["policy"]))

    names = sorted(report.policies)
    if len(names) == 2:
        first, second = names
        for key in sorted(per_key):
            rows = per_key[key]
            if first in rows and second in rows:
                report.deltas.append(
                    {
                        "video_id": key[0],
                        "qa_id": key[1],
                        "policies": f"{first}-{second}",
                        "delta_frame_iou": rows[first]["frame_iou"]
                        - rows[second]["frame_iou"],
                        "delta_recall_at_k": rows[first]["recall_at_k"]
                        - rows[second]["recall_at_k"],
                    }
                )

    if report_path is not None:
        Path(report_path).write_text(render_report(report), encoding="utf-8")
    if json_path is not None:
        payload = json.dumps(report.to_dict(), sort_keys=True, indent=2)
        Path(json_path).write_text(payload + "\n", encoding="utf-8")
    return report


def render_report(report: EvalReport) -> str:
    """Deterministic plain-text table for a policy comparison."""
    lines = [f"policy comparison (k={report.k})"]
    lines.append("")
    lines.append(f"{'policy':<12} {'records':>8} {'mean_frame_iou':>16} {'mean_recall_at_k':>18}")
    for name in sorted(report.policies):
        agg = report.policies[name]
        lines.append(
            f"{name:<12} {agg.records:>8} {agg.mean_iou:>16.6f} {agg.mean_recall:>18.6f}"
        )
    if report.deltas:
        better = sum(1 for d in report.deltas if d["delta_recall_at_k"] > 0)
        mean_delta = sum(d["delta_recall_at_k"] for d in report.deltas) / len(report.deltas)
        pair = report.deltas[0]["policies"]
        lines.append("")
        lines.append(
            f"per-record recall delta ({pair}): positive on "
            f"{better}/{len(report.deltas)}, mean {mean_delta:.6f}"
        )
    if report.unmatched_pred:
        lines.append("")
        lines.append("unmatched predictions: " + ", ".join(report.unmatched_pred))
    if report.unmatched_gt:
        lines.append("")
        lines.append("unmatched ground truth: " + ", ".join(report.unmatched_gt))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------


def timing_report(stage_seconds: Mapping[str, float]) -> str:
    """Two-column wall-clock table with an overall row, in insertion order."""
    total = 0.0
    for name, seconds in stage_seconds.items():
        if not math.isfinite(seconds) or seconds < 0:
            raise ValidationError(f"stage {name!r} has invalid duration {seconds}")
        total += seconds
    lines = [f"{'stage':<16} {'seconds':>10}"]
    for name, seconds in stage_seconds.items():
        lines.append(f"{name:<16} {seconds:>10.3f}")
    lines.append(f"{'overall':<16} {total:>10.3f}")
    return "\n".join(lines) + "\n"


@contextmanager
def time_stage(timings: dict[str, float], stage: str):
    """Accumulate wall-clock seconds for one stage into a mapping."""
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = timings.get(stage, 0.0) + (time.perf_counter() - start)
