"""Instruction-guided temporal grounding toolkit."""

from .errors import (
    MathDomainError,
    ParseError,
    ProtocolError,
    RangeError,
    ScenarioError,
    StageFailure,
    TransportError,
    ValidationError,
    VidThinkerError,
    VitgFormatError,
)
from .features import (
    FrameFeatureSet,
    GridFeature,
    anchor_pool,
    anchor_vectors,
    cosine_sim,
    load_features,
    normalize,
    save_features,
)
from .keyframes import KeyframeParams, extract_keyframes, select_diverse
from .metrics import compare_policies, frame_iou, recall_at_k, segment_iou, timing_report
from .pipeline import (
    FailureRecord,
    GroundingAnnotation,
    PipelineConfig,
    Provenance,
    annotate,
    annotate_batch,
    read_annotations,
    write_annotations,
)
from .reasoning import (
    FrameVerdict,
    HttpReasoner,
    MockReasoner,
    ReasonerClient,
    ReasonRequest,
    RetrievalResult,
    parse_clip_num,
    parse_yes_no,
)
from .sampling import (
    SamplePlan,
    sample_frames,
    sample_hybrid,
    sample_motion,
    sample_nonclues,
    sample_semantic,
)
from .selection import (
    SelectionResult,
    score_by_query_similarity,
    score_frames_remote,
    select_topk,
    select_uniform,
)
from .taxonomy import TaxonomySignals, classify, classify_qa, collect_signals
from .timeline import (
    Clip,
    InstructionType,
    QAPair,
    VideoTimeline,
    frame_of_time,
    segment_uniform,
    time_of_frame,
)

__version__ = "0.1.0"
