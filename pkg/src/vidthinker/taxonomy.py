"""Instruction-type classification: yes/no probes plus pure routing rules."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import prompts
from .errors import ValidationError
from .reasoning import (
    ROLE_CLASSIFY_HOLISTIC,
    ROLE_CLASSIFY_MOTION,
    ROLE_CLASSIFY_NONEXISTENCE,
    ROLE_CLASSIFY_SEMANTIC,
    ReasonerClient,
    RetrievalResult,
    probe_yes_no,
)
from .timeline import InstructionType, QAPair


@dataclass(frozen=True)
class TaxonomySignals:
    """Everything the routing rules look at.

    ``retrieval_breadth`` is the fraction of segmented clips retrieval
    returned; 0.0 encodes the no-clues outcome (None and the empty list are
    the same state).
    """

    motion: bool
    nonexistence: bool
    holistic: bool
    semantic: bool
    retrieval_breadth: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.retrieval_breadth) or not (
            0.0 <= self.retrieval_breadth <= 1.0
        ):
            raise ValidationError(
                f"retrieval_breadth must be in [0, 1], got {self.retrieval_breadth}"
            )


def classify(signals: TaxonomySignals) -> InstructionType:
    """Route probe signals to an instruction type.

    Precedence: holistic questions and retrievals that came back empty or
    full-video wide are NON_CLUES; speed questions about things that do exist
    are motion-driven (pure motion unless the question also names visual
    content to find); everything else localizes by semantics alone. A
    nonexistence hit keeps the SEMANTIC_ONLY label; the sampler widens its
    evidence globally through backfill instead of a different type.
    """
    breadth = signals.retrieval_breadth
    if signals.holistic or breadth <= 0.0 or breadth >= 1.0:
        return InstructionType.NON_CLUES
    if signals.motion and not signals.nonexistence:
        return (
            InstructionType.SEMANTIC_MOTION
            if signals.semantic
            else InstructionType.MOTION_ONLY
        )
    return InstructionType.SEMANTIC_ONLY


def collect_signals(
    qa: QAPair,
    retrieval: RetrievalResult,
    n_clips: int,
    client: ReasonerClient,
    breadth_override: float | None = None,
) -> TaxonomySignals:
    """Run the four yes/no probes and measure retrieval breadth."""
    if n_clips < 1 and breadth_override is None:
        raise ValidationError(f"n_clips must be >= 1, got {n_clips}")
    if breadth_override is not None:
        breadth = breadth_override
    elif retrieval.clips is None:
        breadth = 0.0
    else:
        breadth = len(retrieval.clips) / n_clips
    return TaxonomySignals(
        motion=probe_yes_no(ROLE_CLASSIFY_MOTION, prompts.build_motion_prompt(qa), client),
        nonexistence=probe_yes_no(
            ROLE_CLASSIFY_NONEXISTENCE, prompts.build_nonexistence_prompt(qa), client
        ),
        holistic=probe_yes_no(
            ROLE_CLASSIFY_HOLISTIC, prompts.build_holistic_prompt(qa), client
        ),
        semantic=probe_yes_no(
            ROLE_CLASSIFY_SEMANTIC, prompts.build_semantic_prompt(qa), client
        ),
        retrieval_breadth=breadth,
    )


def classify_qa(
    qa: QAPair, retrieval: RetrievalResult, n_clips: int, client: ReasonerClient
) -> InstructionType:
    """Probe and route in one call."""
    return classify(collect_signals(qa, retrieval, n_clips, client))
