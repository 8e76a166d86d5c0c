"""Acceptance gate: one test per shipping criterion.

Run with ``pytest -v tests/test_acceptance.py``; the verbose runner prints one
PASSED/FAILED line per criterion. Each test also prints its measured numbers
(visible with ``-rA``). Every oracle used here is written inside this module,
independent of the library implementations it checks.
"""
import json
import math
import string
import time

import numpy as np

from vidthinker.errors import ParseError
from vidthinker.features import (
    FrameFeatureSet,
    GridFeature,
    anchor_pool,
    load_features,
    normalize,
    save_features,
)
from vidthinker.keyframes import KeyframeParams, extract_keyframes
from vidthinker.metrics import compare_policies, frame_iou, segment_iou
from vidthinker.pipeline import (
    GroundingAnnotation,
    PipelineConfig,
    Provenance,
    annotate_batch,
    annotation_from_dict,
    annotation_to_dict,
    read_annotations,
    write_annotations,
)
from vidthinker.reasoning import MockReasoner, ReasonerClient, parse_clip_num, parse_yes_no
from vidthinker.sampling import SamplePlan, rate_stride, sample_frames, sample_motion
from vidthinker.selection import (
    POLICY_TOPK,
    POLICY_UNIFORM,
    score_by_query_similarity,
    select_topk,
    select_uniform,
)
from vidthinker.timeline import Clip, InstructionType, VideoTimeline

from conftest import DATA_DIR


def _report(criterion: int, detail: str) -> None:
    print(f"criterion {criterion} PASS: {detail}")


def _random_unit_features(rng, n, dim) -> FrameFeatureSet:
    raw = rng.standard_normal((n, dim))
    raw[np.linalg.norm(raw, axis=1) < 1e-3] = 1.0  # no degenerate rows
    return normalize(FrameFeatureSet("v", raw.astype(np.float32)))


# -----------------------------------------------------------------------------
# 1. keyframe algorithm agrees with an independent pseudocode transcription
# -----------------------------------------------------------------------------


def _keyframe_oracle(rows: np.ndarray, t1: float, t2: float) -> list[int]:
    sel = [0]
    prev = rows[0]
    n = len(rows)
    for i in range(1, n):
        if float(np.clip(np.dot(rows[i], prev), -1.0, 1.0)) < t1:
            for j in range(i + 1, n):
                if float(np.clip(np.dot(rows[i], rows[j]), -1.0, 1.0)) < t2:
                    sel.append(i)
                    prev = rows[i]
                    break
    if float(np.clip(np.dot(rows[n - 1], prev), -1.0, 1.0)) < t1 and sel[-1] != n - 1:
        sel.append(n - 1)
    return sel


def test_criterion_1_keyframe_oracle_equivalence():
    rng = np.random.default_rng(20260814)
    trials = 1000
    start = time.perf_counter()
    for _ in range(trials):
        n = int(rng.integers(1, 65))
        dim = int(rng.integers(2, 9))
        t1 = float(rng.uniform(-0.5, 1.0))
        t2 = float(rng.uniform(-0.5, 1.0))
        features = _random_unit_features(rng, n, dim)
        got = extract_keyframes(
            features, KeyframeParams(scene_threshold=t1, diversity_threshold=t2)
        )
        want = _keyframe_oracle(features.vectors.astype(np.float64), t1, t2)
        assert got == want, f"divergence at n={n} dim={dim} t1={t1} t2={t2}"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"oracle sweep took {elapsed:.2f}s (budget 10s)"
    _report(1, f"{trials}/{trials} random inputs agree exactly in {elapsed:.2f}s (< 10s)")


# -----------------------------------------------------------------------------
# 2. retrieval grammar: canonical examples plus a 10,000-input fuzz sweep
# -----------------------------------------------------------------------------


def _fuzz_corpus(rng, count: int) -> list[str]:
    alphabet = string.printable + "ClipNone{}[]:," * 3
    corpus = []
    templates = [
        '{{"explanation": "{0}", "clip_num": "{1}"}}',
        '```json\n{{"clip_num": "{1}"}}\n```',
        "{1}",
        '{{"clip_num": {1}}}',
        "prose {0} then {{not json",
    ]
    fragments = [
        "One clip: [Clip-{}]",
        "Multiple clips: [Clip-{}, Clip-{}]",
        "None.",
        "none",
        "One clip: Clip-{}",
        "Multiple clips: []",
        "[Clip-{}]",
        "Clip-{}",
        "",
    ]
    for _ in range(count):
        roll = rng.integers(0, 3)
        if roll == 0:
            # raw noise, arbitrary code points
            length = int(rng.integers(0, 80))
            corpus.append("".join(chr(int(c)) for c in rng.integers(1, 0x2FFF, length)))
        elif roll == 1:
            length = int(rng.integers(0, 60))
            corpus.append("".join(rng.choice(list(alphabet), length)))
        else:
            template = templates[int(rng.integers(0, len(templates)))]
            fragment = fragments[int(rng.integers(0, len(fragments)))]
            nums = [str(int(v)) for v in rng.integers(-5, 10**6, 2)]
            try:
                fragment = fragment.format(*nums)
            except (IndexError, KeyError):
                pass
            corpus.append(template.format("x" * int(rng.integers(0, 9)), fragment))
    return corpus


def test_criterion_2_grammar_fidelity_and_fuzz():
    one = parse_clip_num('{"explanation": "e", "clip_num": "One clip: [Clip-2]"}')
    assert one.clips == (2,)
    multi = parse_clip_num(
        '{"explanation": "e", "clip_num": "Multiple clips: [Clip-1, Clip-7, Clip-8]"}'
    )
    assert multi.clips == (1, 7, 8)
    none = parse_clip_num('{"explanation": "e", "clip_num": "None."}')
    assert none.clips is None

    rng = np.random.default_rng(7)
    corpus = _fuzz_corpus(rng, 10_000)
    assert len(corpus) == 10_000
    parsed = 0
    for text in corpus:
        try:
            parse_clip_num(text, n_clips=int(rng.integers(1, 40)))
            parsed += 1
        except ParseError:
            pass
        try:
            parse_yes_no(text)
        except ParseError:
            pass
    _report(2, f"3 canonical examples exact; 10000 fuzz inputs, {parsed} parsed, 0 crashes")


# -----------------------------------------------------------------------------
# 3. golden pipeline run is byte-identical across parallelism degrees
# -----------------------------------------------------------------------------


def test_criterion_3_pipeline_determinism_golden(tmp_path):
    golden = (DATA_DIR / "golden_annotations.jsonl").read_bytes()
    backend = MockReasoner.from_file(DATA_DIR / "scenario.json")
    start = time.perf_counter()
    for workers in (1, 2, 8):
        config = PipelineConfig(max_workers=workers)
        client = ReasonerClient(backend, max_parallel=8)
        annotations, failures = annotate_batch(DATA_DIR / "manifest.tsv", config, client)
        assert failures == []
        assert len(annotations) == 6
        out = tmp_path / f"run-{workers}.jsonl"
        write_annotations(annotations, out)
        assert out.read_bytes() == golden, f"byte drift at parallelism {workers}"
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"3 golden runs took {elapsed:.2f}s (budget 5s)"
    _report(3, f"2 videos / 6 QA byte-identical at parallelism 1, 2, 8 in {elapsed:.2f}s (< 5s)")


# -----------------------------------------------------------------------------
# 4. top-k selection agrees with a naive full-sort oracle
# -----------------------------------------------------------------------------


def _topk_oracle(scores, k: int) -> tuple[int, ...]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return tuple(sorted(order[: min(k, len(scores))]))


def _random_increasing_map(rng, values: np.ndarray):
    knots = np.unique(values)
    targets = np.cumsum(rng.uniform(0.01, 1.0, knots.size)) * rng.uniform(0.1, 5.0)
    return np.interp(values, knots, targets)


def test_criterion_4_topk_full_sort_oracle():
    rng = np.random.default_rng(11)
    for trial in range(1000):
        n = int(rng.integers(1, 513))
        k = int(rng.integers(1, 64))
        if trial % 2:
            scores = rng.standard_normal(n)
        else:
            scores = rng.integers(0, 5, n).astype(np.float64)  # dense ties
        got = select_topk(scores, k).frame_indices
        assert got == _topk_oracle(list(scores), k), f"divergence at trial {trial}"
    for trial in range(100):
        n = int(rng.integers(2, 257))
        scores = rng.integers(0, 6, n).astype(np.float64)
        k = int(rng.integers(1, 40))
        base = select_topk(scores, k).frame_indices
        mapped = _random_increasing_map(rng, scores)
        assert select_topk(mapped, k).frame_indices == base, f"transform drift at {trial}"
    _report(4, "1000 random vectors match the full-sort oracle; 100 monotone maps invariant")


# -----------------------------------------------------------------------------
# 5. planted-segment suite: Top-32 beats Uni-32 on every record
# -----------------------------------------------------------------------------


def _planted_video(rng, n_frames: int, vid: str):
    """512-frame video with one contiguous high-similarity segment.

    In-segment frames point near the query axis with similarity strictly
    decreasing as frames move away from the segment center (exact ties are
    broken by frame order), so the construction itself defines which
    min(length, 32) frames are the strongest evidence. Everything else is
    exactly orthogonal to the query.
    """
    length = int(rng.integers(16, 65))
    start = int(rng.integers(0, n_frames - length + 1))
    segment = list(range(start, start + length))
    center = start + (length - 1) / 2.0
    by_centrality = sorted(segment, key=lambda f: (abs(f - center), f))

    dim = 4
    vectors = np.zeros((n_frames, dim), dtype=np.float64)
    phases = rng.uniform(0, 2 * np.pi, n_frames)
    vectors[:, 2] = np.cos(phases)
    vectors[:, 3] = np.sin(phases)
    for rank, frame in enumerate(by_centrality):
        theta = 0.1 + 0.5 * (rank / length)
        vectors[frame] = (math.cos(theta), math.sin(theta), 0.0, 0.0)
    features = FrameFeatureSet(vid, vectors.astype(np.float32), normalized=True)
    gt = sorted(by_centrality[: min(length, 32)])
    return features, gt, length


def test_criterion_5_planted_segment_policy_comparison(tmp_path):
    rng = np.random.default_rng(2024)
    n_frames, k, n_videos = 512, 32, 100
    query = np.array([1.0, 0.0, 0.0, 0.0])
    header = json.dumps({"format": "vidthinker.annotations", "version": 1})
    gt_lines, pred_lines = [header], [header]
    overlap_expectation = 0.0

    start = time.perf_counter()
    for v in range(n_videos):
        vid = f"synth-{v:03d}"
        features, gt, length = _planted_video(rng, n_frames, vid)
        scores = score_by_query_similarity(features, query)
        top = select_topk(scores, k, video_id=vid)
        uni = select_uniform(n_frames, k, video_id=vid)
        overlap_expectation += math.ceil(len(gt) * k / n_frames) / len(gt) / n_videos
        gt_lines.append(
            json.dumps({"video_id": vid, "qa_id": "q", "frame_indices": gt}, sort_keys=True)
        )
        for sel in (top, uni):
            pred_lines.append(
                json.dumps(
                    {
                        "video_id": vid,
                        "qa_id": "q",
                        "policy": sel.policy,
                        "frame_indices": list(sel.frame_indices),
                    },
                    sort_keys=True,
                )
            )
    gt_path = tmp_path / "gt.jsonl"
    pred_path = tmp_path / "pred.jsonl"
    gt_path.write_text("\n".join(gt_lines) + "\n", encoding="utf-8")
    pred_path.write_text("\n".join(pred_lines) + "\n", encoding="utf-8")

    report = compare_policies(
        pred_path, gt_path, k, report_path=tmp_path / "r.txt", json_path=tmp_path / "r.json"
    )
    elapsed = time.perf_counter() - start

    top_recall = report.policies[POLICY_TOPK].mean_recall
    uni_recall = report.policies[POLICY_UNIFORM].mean_recall
    uni_bound = k / n_frames + overlap_expectation + 0.1
    assert top_recall >= 0.95, f"Top-32 mean recall {top_recall:.4f} < 0.95"
    assert uni_recall <= uni_bound, f"Uni-32 mean recall {uni_recall:.4f} > {uni_bound:.4f}"
    assert len(report.deltas) == n_videos
    sidecar = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    assert all(d["delta_recall_at_k"] > 0 for d in sidecar["deltas"]), (
        "Top-32 must beat Uni-32 on every record"
    )
    assert elapsed < 30.0, f"suite took {elapsed:.2f}s (budget 30s)"
    _report(
        5,
        f"100 videos: Top-32 recall {top_recall:.3f} >= 0.95, Uni-32 {uni_recall:.3f} <= "
        f"{uni_bound:.3f}, Top > Uni on {len(report.deltas)}/100 records, {elapsed:.2f}s (< 30s)",
    )


# -----------------------------------------------------------------------------
# 6. metric and anchor-pooling exactness
# -----------------------------------------------------------------------------


def test_criterion_6_metric_and_anchor_exactness():
    assert abs(frame_iou({1, 2, 3, 4}, {3, 4, 5, 6}) - 2 / 6) < 1e-9
    assert abs(frame_iou({1, 2}, {1, 2}) - 1.0) < 1e-9
    assert abs(frame_iou({1}, {2}) - 0.0) < 1e-9
    assert abs(segment_iou([(0, 10)], [(0, 10)]) - 1.0) < 1e-9
    assert abs(segment_iou([(0, 10)], [(5, 15)]) - 5 / 15) < 1e-9
    assert abs(segment_iou([], [(0, 1)]) - 0.0) < 1e-9

    rng = np.random.default_rng(3)
    for _ in range(100):
        rows, cols, channel = (int(rng.integers(1, 7)) for _ in range(3))
        p1 = rng.uniform(-1, 1, (rows * cols, channel))
        p2 = rng.uniform(-1, 1, (rows * cols, channel))
        a, b = rng.uniform(-1, 1, 2)
        pooled = anchor_pool(GridFeature(rows, cols, p1))
        expected = p1.astype(np.float32).astype(np.float64).sum(axis=0) / (rows * cols)
        assert np.max(np.abs(pooled - expected)) < 1e-6, "pooling is not the patch mean"
        combined = anchor_pool(GridFeature(rows, cols, a * p1 + b * p2))
        linear = a * pooled + b * anchor_pool(GridFeature(rows, cols, p2))
        assert np.max(np.abs(combined - linear)) < 1e-6, "pooling is not linear"
    _report(6, "hand IoU values within 1e-9; 100 grids pooled within 1e-6 incl. linearity")


# -----------------------------------------------------------------------------
# 7. sampler contracts on 500 random plans
# -----------------------------------------------------------------------------


def _random_plan(rng):
    fps = float(rng.choice([1.0, 2.0, 4.0]))
    n = int(rng.integers(4, 200))
    kind = list(InstructionType)[int(rng.integers(0, 4))]
    timeline = VideoTimeline("v", duration_s=n / fps, sample_fps=fps, frame_count=n)
    if kind is InstructionType.NON_CLUES:
        clips = ()
    else:
        n_clips = min(int(rng.integers(1, 4)), (n + 1) // 2)
        bounds = np.sort(rng.choice(n + 1, size=2 * n_clips, replace=False))
        clips = tuple(
            Clip(i, int(bounds[2 * i]), int(bounds[2 * i + 1]), bounds[2 * i] / fps, bounds[2 * i + 1] / fps)
            for i in range(n_clips)
        )
    return SamplePlan(
        instruction_type=kind,
        timeline=timeline,
        relevant_clips=clips,
        budget=int(rng.integers(1, 64)),
        fixed_rate_fps=float(rng.choice([0.5, 1.0, 2.0])),
    )


def test_criterion_7_sampler_contracts():
    rng = np.random.default_rng(99)
    decile_checked = 0
    for trial in range(500):
        plan = _random_plan(rng)
        n = plan.timeline.frame_count
        features = _random_unit_features(rng, n, 4)
        got = sample_frames(plan, features)
        assert got == sorted(set(got)), f"trial {trial}: unsorted or duplicated"
        assert len(got) == min(plan.budget, n), f"trial {trial}: wrong size"
        assert all(0 <= f < n for f in got), f"trial {trial}: out of range"
        if plan.instruction_type is InstructionType.NON_CLUES and plan.budget >= 3:
            first_end = max(1, math.ceil(n / 10))
            last_start = min(n - 1, math.floor(9 * n / 10))
            assert any(f < first_end for f in got), f"trial {trial}: first decile missed"
            assert any(f >= last_start for f in got), f"trial {trial}: last decile missed"
            decile_checked += 1

    # dedicated stride check: budget equal to the nominal walk length, so the
    # output is the untrimmed fixed-rate pass
    stride_checked = 0
    for trial in range(200):
        fps = float(rng.choice([1.0, 2.0, 3.0, 4.0]))
        rate = float(rng.choice([0.5, 1.0, 2.0]))
        stride = rate_stride(fps, rate)
        n = int(rng.integers(20, 200))
        a = int(rng.integers(0, n - 12))
        b = int(rng.integers(a + 10, n + 1))
        nominal = len(range(a, b, stride))
        if nominal < 2:
            continue
        timeline = VideoTimeline("v", duration_s=n / fps, sample_fps=fps, frame_count=n)
        plan = SamplePlan(
            instruction_type=InstructionType.MOTION_ONLY,
            timeline=timeline,
            relevant_clips=(Clip(0, a, b, a / fps, b / fps),),
            budget=nominal,
            fixed_rate_fps=rate,
        )
        got = sample_motion(plan)
        gaps = [y - x for x, y in zip(got, got[1:])]
        assert all(abs(g - stride) <= 1 for g in gaps), (
            f"trial {trial}: stride {stride} but gaps {sorted(set(gaps))}"
        )
        stride_checked += 1
    assert stride_checked >= 150
    _report(
        7,
        f"500 plans honor size/order/range; stride deviation <= 1 on {stride_checked} "
        f"motion plans; decile coverage on {decile_checked} non-clues plans",
    )


# -----------------------------------------------------------------------------
# 8. container and record round-trips are byte-exact
# -----------------------------------------------------------------------------


def _random_annotation(rng, idx: int) -> GroundingAnnotation:
    kind = list(InstructionType)[int(rng.integers(0, 4))]
    n = int(rng.integers(4, 100))
    frames = sorted(
        int(f) for f in rng.choice(n, size=int(rng.integers(1, min(16, n))), replace=False)
    )
    clips = () if kind is InstructionType.NON_CLUES else tuple(
        sorted(int(c) for c in rng.choice(12, size=int(rng.integers(1, 4)), replace=False))
    )
    verdicts = tuple(int(f) for f in frames[: int(rng.integers(0, len(frames) + 1))])
    return GroundingAnnotation(
        video_id=f"video-é{idx}",
        qa_id=f"qa-{int(rng.integers(0, 1000)):03d}",
        instruction_type=kind,
        relevant_clip_indices=clips,
        frame_indices=tuple(frames),
        frame_timestamps_s=tuple(f / 2.0 for f in frames),
        provenance=Provenance(
            key_phrases="phrase " + "x" * int(rng.integers(0, 9)),
            captions=tuple(f"caption {i}" for i in range(int(rng.integers(1, 5)))),
            retrieval_explanation="why — reasons",
            verdict_frames=verdicts,
            verdict_bitmap=tuple(bool(rng.integers(0, 2)) for _ in verdicts),
            backfill_frames=(),
        ),
    )


def test_criterion_8_format_round_trips(tmp_path):
    rng = np.random.default_rng(44)
    for i in range(100):
        n = int(rng.integers(1, 40))
        grid = rng.integers(0, 2) == 1
        if grid:
            r, c, ch = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
            vectors = rng.standard_normal((n, r * c * ch)).astype(np.float32)
            features = FrameFeatureSet(f"f{i}", vectors, grid_shape=(r, c))
        else:
            dim = int(rng.integers(1, 24))
            vectors = rng.standard_normal((n, dim)).astype(np.float32)
            features = FrameFeatureSet(f"f{i}", vectors)
            if rng.integers(0, 2):
                features = normalize(features)
        first = tmp_path / "a.vitg"
        second = tmp_path / "b.vitg"
        save_features(features, first)
        loaded = load_features(first, video_id=features.video_id)
        save_features(loaded, second)
        assert first.read_bytes() == second.read_bytes(), f"vitg drift on instance {i}"
        assert np.array_equal(loaded.vectors, features.vectors)
        assert loaded.grid_shape == features.grid_shape
        assert loaded.normalized == features.normalized

    annotations = [_random_annotation(np.random.default_rng(1000 + j), j) for j in range(100)]
    for annotation in annotations:
        assert annotation_from_dict(annotation_to_dict(annotation)) == annotation
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    write_annotations(annotations, first)
    write_annotations(read_annotations(first), second)
    assert first.read_bytes() == second.read_bytes(), "annotation file drift"
    _report(8, "100 VITG instances and 100 annotation records round-trip byte-identically")
