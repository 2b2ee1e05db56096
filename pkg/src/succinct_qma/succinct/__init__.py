"""Merkle commit-and-open arguments and the three-phase succinct protocol."""

from .accounting import ScalingModel, accounting_report, fit_log_squared, protocol_sizes, saok_sizes, totals
from .code import DISTANCE, DecodingError, rs_decode, rs_encode
from .extract import ExtractionResult, classical_extract, rewind_budget
from .merkle import HashSpec, MalformedPath, MerkleCommitment, byte_leaves, merkle_commit, merkle_root, merkle_verify
from .protocol import (
    CompiledSuccinctProver,
    SuccinctProver,
    SuccinctTranscript,
    r3_check,
    r3_from_compiled,
    r3_relation,
    run_succinct_protocol,
)
from .saok import (
    CorruptingSaokProver,
    HonestSaokProver,
    MessageProver,
    Relation,
    SaokProver,
    SaokTranscript,
    merkle_relation,
    saok_run,
)
