"""Command-line interface.

Backends are named with a small spec grammar: ``mock:scenario.json`` replays
a pinned scenario file, ``http:<url>`` (or a plain ``http(s)://`` URL) talks
to a live endpoint. When ``--reasoner`` is omitted the endpoint URL is read
from ``VIDTHINKER_REASONER_URL``.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .errors import VidThinkerError
from .features import load_features, normalize
from .keyframes import KeyframeParams, extract_keyframes
from .metrics import compare_policies, render_report
from .pipeline import (
    PipelineConfig,
    annotate_batch,
    load_qa_file,
    write_annotations,
    write_failures,
    write_trace,
)
from .reasoning import (
    ENDPOINT_ENV_VAR,
    HttpReasoner,
    MockReasoner,
    ReasonerClient,
)
from .selection import (
    HttpScorer,
    POLICY_TOPK,
    POLICY_UNIFORM,
    score_by_query_similarity,
    score_frames_remote,
    select_topk,
    select_uniform,
)
from .taxonomy import classify, collect_signals
from .reasoning import RetrievalResult


def _make_backend(spec: str | None):
    if spec is None:
        spec = os.environ.get(ENDPOINT_ENV_VAR)
        if not spec:
            raise click.UsageError(
                f"no --reasoner given and {ENDPOINT_ENV_VAR} is not set"
            )
    if spec.startswith("mock:"):
        return MockReasoner.from_file(spec[len("mock:") :])
    if spec.startswith(("http://", "https://")):
        return HttpReasoner(spec)
    if spec.startswith("http:"):
        return HttpReasoner(spec[len("http:") :])
    raise click.UsageError(f"reasoner spec must be mock:<path> or http:<url>, got {spec!r}")


@click.group()
def main() -> None:
    """Instruction-guided temporal grounding toolkit."""


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--t1", type=float, default=0.85, show_default=True, help="Scene-change threshold.")
@click.option("--t2", type=float, default=0.80, show_default=True, help="Forward-scan threshold.")
@click.option("--lookahead", type=int, default=None, help="Bound the forward scan window.")
def keyframes(features_path: str, t1: float, t2: float, lookahead: int | None) -> None:
    """Print scene-change keyframe indices, one per line."""
    try:
        features = load_features(features_path)
        if not features.normalized:
            features = normalize(features)
        params = KeyframeParams(scene_threshold=t1, diversity_threshold=t2)
        for index in extract_keyframes(features, params, lookahead=lookahead):
            click.echo(index)
    except VidThinkerError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command(name="classify")
@click.option("--qa", "qa_path", required=True, type=click.Path(exists=True))
@click.option("--reasoner", "reasoner_spec", default=None, help="mock:<path> or http:<url>.")
@click.option(
    "--breadth",
    type=float,
    default=0.5,
    show_default=True,
    help="Assumed retrieval breadth; no retrieval runs in this audit command.",
)
def classify_cmd(qa_path: str, reasoner_spec: str | None, breadth: float) -> None:
    """Classify each QA pair's instruction type, one per line."""
    try:
        client = ReasonerClient(_make_backend(reasoner_spec))
        placeholder = RetrievalResult("", None)
        for qa in load_qa_file(qa_path):
            signals = collect_signals(qa, placeholder, 1, client, breadth_override=breadth)
            click.echo(f"{qa.qa_id}\t{classify(signals).value}")
    except VidThinkerError as exc:
        raise click.ClickException(str(exc)) from exc


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--reasoner", "reasoner_spec", default=None, help="mock:<path> or http:<url>.")
@click.option("--clip-seconds", type=float, default=5.0, show_default=True)
@click.option("--budget", type=int, default=32, show_default=True)
@click.option("--rate-fps", type=float, default=1.0, show_default=True)
@click.option("--sample-fps", type=float, default=1.0, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--failures", "failures_path", default=None, type=click.Path())
@click.option("--trace", is_flag=True, help="Write a prompt/response sidecar next to --out.")
def annotate(
    manifest_path: str,
    out_path: str,
    reasoner_spec: str | None,
    clip_seconds: float,
    budget: int,
    rate_fps: float,
    sample_fps: float,
    workers: int,
    failures_path: str | None,
    trace: bool,
) -> None:
    """Annotate every manifest record and write the annotation JSONL."""
    config = PipelineConfig(
        clip_seconds=clip_seconds,
        budget=budget,
        fixed_rate_fps=rate_fps,
        sample_fps=sample_fps,
        max_workers=workers,
        trace=trace,
    )
    try:
        client = ReasonerClient(
            _make_backend(reasoner_spec),
            max_parallel=config.max_parallel_requests,
            retries=config.retries,
            backoff_s=config.backoff_s,
            trace=trace,
        )
        annotations, failures = annotate_batch(manifest_path, config, client)
        write_annotations(annotations, out_path)
        write_failures(failures, failures_path or f"{out_path}.failures.jsonl")
        if trace:
            write_trace(client, f"{out_path}.trace.jsonl")
    except VidThinkerError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"annotated {len(annotations)} records, {len(failures)} failures")
    if failures:
        sys.exit(1)


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", default=None, type=click.Path(exists=True))
@click.option("--query-embedding", "query_path", default=None, type=click.Path(exists=True))
@click.option("--scorer", "scorer_spec", default=None, help="http:<url> scoring endpoint.")
@click.option("--question", default="", help="Question forwarded to a remote scorer.")
@click.option("--k", type=int, default=32, show_default=True)
@click.option(
    "--policy",
    type=click.Choice([POLICY_TOPK, POLICY_UNIFORM]),
    default=POLICY_TOPK,
    show_default=True,
)
@click.option("--out", "out_path", required=True, type=click.Path())
def select(
    features_path: str,
    scores_path: str | None,
    query_path: str | None,
    scorer_spec: str | None,
    question: str,
    k: int,
    policy: str,
    out_path: str,
) -> None:
    """Select frames by policy and write a selection JSON."""
    sources = [s for s in (scores_path, query_path, scorer_spec) if s]
    if policy == POLICY_TOPK and len(sources) != 1:
        raise click.UsageError(
            "topk needs exactly one of --scores, --query-embedding, --scorer"
        )
    try:
        features = load_features(features_path)
        if policy == POLICY_UNIFORM:
            result = select_uniform(features.frame_count, k, video_id=features.video_id)
        else:
            if scores_path:
                scores = json.loads(Path(scores_path).read_text(encoding="utf-8"))
                if isinstance(scores, dict):
                    scores = scores.get(features.video_id, scores.get("scores"))
                scores = np.asarray(scores, dtype=np.float64)
            elif query_path:
                query = load_features(query_path)
                scores = score_by_query_similarity(features, query.vectors[0])
            else:
                url = scorer_spec
                if url.startswith("http:") and not url.startswith("http://"):
                    url = url[len("http:") :]
                scores = score_frames_remote(features, question, HttpScorer(url))
            result = select_topk(scores, k, video_id=features.video_id)
        payload = json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
        Path(out_path).write_text(payload, encoding="utf-8")
    except VidThinkerError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"selected {len(result.frame_indices)} frames -> {out_path}")


@main.command(name="eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=32, show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--json", "json_path", required=True, type=click.Path())
def eval_cmd(pred_path: str, gt_path: str, k: int, report_path: str, json_path: str) -> None:
    """Grade predictions against ground truth and write report artifacts."""
    try:
        report = compare_policies(pred_path, gt_path, k, report_path, json_path)
    except VidThinkerError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(render_report(report), nl=False)


@main.command()
@click.option("--scenario", "scenario_path", default=None, type=click.Path(exists=True))
@click.option("--scores", "scores_path", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(scenario_path: str | None, scores_path: str | None, host: str, port: int) -> None:
    """Serve the reasoning/scoring wire protocol over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(scenario_path, scores_path), host=host, port=port)


if __name__ == "__main__":
    main()
