"""Classical rewinding extractor for resettable deterministic provers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional

from ..rng import TracedRng
from .code import K, N, DecodingError, encoded_len, rs_decode, rs_encode
from .merkle import HashSpec, MalformedPath, merkle_root, merkle_verify
from .saok import Relation, SaokProver

STATUSES = ("success", "decode_failure", "relation_failure", "binding_violation", "hash_collision",
            "budget_exhausted", "malformed_commitment")


@dataclass
class ExtractionResult:
    status: str
    witness: Optional[bytes]
    rewinds: int
    budget: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "success"


def rewind_budget(m_len: int, k: int) -> int:
    """``ceil(L / k) * ceil(log2 L)``: enough for the coupon-collector bound on half of each block."""
    return math.ceil(m_len / k) * max(1, math.ceil(math.log2(m_len)))


def classical_extract(prover: SaokProver, relation: Relation, hs: HashSpec, k: int = 32,
                      budget: Optional[int] = None, rng: Optional[TracedRng] = None) -> ExtractionResult:
    """Rewind ``prover`` on fresh challenges until the committed codeword can be decoded.

    Every opening is checked against the committed root: a path that fails is a
    binding violation, two valid openings of one index with different symbols
    are a hash collision. Decoding is attempted once each block of the encoded
    part has at least half its symbols; the result must re-encode consistently
    with every symbol seen, match the witness root and satisfy the relation.
    """
    rng = rng or TracedRng(0)
    com = prover.commit()
    L, wl = com.m_len, com.w_len
    budget = rewind_budget(L, k) if budget is None else budget
    cw = encoded_len(wl)
    if L != cw + wl:
        return ExtractionResult("malformed_commitment", None, 0, budget, "length is not codeword plus proof")
    seen: Dict[int, int] = {}
    per_block = [0] * (cw // N)
    last_failure = ""
    for r in range(1, budget + 1):
        idx = [rng.below(L, "challenge") for _ in range(k)]
        for j, o in zip(idx, prover.open(idx)):
            try:
                valid = len(o.symbol) == 1 and merkle_verify(com.rt_m, j, o.symbol, o.path, hs, L)
            except MalformedPath as exc:
                return ExtractionResult("binding_violation", None, r, budget, f"malformed path at {j}: {exc}")
            if not valid:
                return ExtractionResult("binding_violation", None, r, budget,
                                        f"opening of index {j} does not verify against the committed root")
            s = o.symbol[0]
            if j in seen:
                if seen[j] != s:
                    return ExtractionResult("hash_collision", None, r, budget,
                                            f"index {j} opened to {seen[j]} and {s} with valid paths")
                continue
            seen[j] = s
            if j < cw:
                per_block[j // N] += 1
        if min(per_block) < K:
            continue
        word = [seen.get(j) for j in range(cw)]
        try:
            w = rs_decode(word)
        except DecodingError as exc:
            last_failure = str(exc)
            continue
        again = rs_encode(w)
        if any(again[j] != s for j, s in seen.items() if j < cw):
            last_failure = "decoded word disagrees with opened symbols"
            continue
        if len(w) != wl or merkle_root(w, hs) != com.rt_w:
            return ExtractionResult("decode_failure", None, r, budget, "decoded witness does not match the witness root")
        if not relation(w):
            return ExtractionResult("relation_failure", w, r, budget, relation.why(w))
        return ExtractionResult("success", w, r, budget, f"{len(seen)} distinct symbols opened")
    if last_failure:
        return ExtractionResult("decode_failure", None, budget, budget, last_failure)
    return ExtractionResult("budget_exhausted", None, budget, budget, "not enough distinct symbols")
