"""Grid-and-graph toolkit for handwritten mathematical expressions.

The library covers the algorithmic half of a detect-then-read recognizer:
token vocabulary and LaTeX round-tripping, training-target assignment
between attention maps and a classification grid, graph decoding from
per-cell classes plus neighbor scores, expression-level metrics, a binary
tensor format, and a synthetic-sample generator for end-to-end checks.
"""

from .assignment import (
    AssignmentTarget,
    PgdLoss,
    build_cost,
    estimate_positions,
    hungarian,
    loss_pgd,
    loss_total,
    loss_vat,
    make_targets,
)
from .decode import (
    ExprGraph,
    Node,
    PathResult,
    apply_corrections,
    build_graph,
    decode_pipeline,
    decode_with_graph,
    expand_imaginary,
    longest_path,
    prune_and_acyclify,
    vat_extract,
)
from .errors import (
    BadMagic,
    ChannelMismatch,
    CycleDetected,
    DanglingGroup,
    DimOverflow,
    EmptyCorpus,
    EmptyInput,
    EvenKernel,
    GridTooSmall,
    HmeGraphError,
    IllNested,
    Infeasible,
    LengthMismatch,
    NoPath,
    NodeCountMismatch,
    NonFinite,
    NonFiniteValue,
    NonStochasticRow,
    ShapeMismatch,
    StepMismatch,
    TooLarge,
    TruncatedPayload,
    UnbalancedBraces,
    UnknownControlSequence,
    VocabMiss,
)
from .metrics import EvalReport, evaluate, time_stats, token_edit_distance
from .synth import (
    NoiseSpec,
    SynthSample,
    coverage_corpus,
    default_vocab,
    gen_expression,
    layout_and_render,
    make_sample,
    oracle_edit,
    oracle_hungarian,
    oracle_longest_path,
    teacher_matrices,
)
from .tensor_io import (
    export_dot,
    graph_to_json,
    read_tensor,
    write_graph_json,
    write_tensor,
)
from .tokens import (
    TokenVocab,
    build_vocab,
    emit_latex,
    end_parents,
    gt_targets,
    instance_group_counts,
    parse_latex,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentTarget",
    "BadMagic",
    "ChannelMismatch",
    "CycleDetected",
    "DanglingGroup",
    "DimOverflow",
    "EmptyCorpus",
    "EmptyInput",
    "EvalReport",
    "EvenKernel",
    "ExprGraph",
    "GridTooSmall",
    "HmeGraphError",
    "IllNested",
    "Infeasible",
    "LengthMismatch",
    "NoPath",
    "Node",
    "NodeCountMismatch",
    "NoiseSpec",
    "NonFinite",
    "NonFiniteValue",
    "NonStochasticRow",
    "PathResult",
    "PgdLoss",
    "ShapeMismatch",
    "StepMismatch",
    "SynthSample",
    "TokenVocab",
    "TooLarge",
    "TruncatedPayload",
    "UnbalancedBraces",
    "UnknownControlSequence",
    "VocabMiss",
    "apply_corrections",
    "build_cost",
    "build_graph",
    "build_vocab",
    "coverage_corpus",
    "decode_pipeline",
    "decode_with_graph",
    "default_vocab",
    "emit_latex",
    "end_parents",
    "estimate_positions",
    "evaluate",
    "expand_imaginary",
    "export_dot",
    "gen_expression",
    "graph_to_json",
    "gt_targets",
    "hungarian",
    "instance_group_counts",
    "layout_and_render",
    "longest_path",
    "loss_pgd",
    "loss_total",
    "loss_vat",
    "make_sample",
    "make_targets",
    "oracle_edit",
    "oracle_hungarian",
    "oracle_longest_path",
    "parse_latex",
    "prune_and_acyclify",
    "read_tensor",
    "teacher_matrices",
    "time_stats",
    "token_edit_distance",
    "vat_extract",
    "write_graph_json",
    "write_tensor",
]
