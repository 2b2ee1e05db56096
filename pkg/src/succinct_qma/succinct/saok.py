"""Three-message commit-and-open argument of knowledge.

The prover encodes its witness ``w`` as ``m = (RS(w), pi)`` with the naive
proof ``pi = w``, commits to ``m`` and to ``w`` under separate Merkle roots,
receives ``k`` uniform indices and opens them. In harness mode ``pi`` is
handed to the verifier out of band (booked as harness bytes), which then
checks ``R(x, pi)``, the ``w`` root and that every opened symbol agrees with
``(RS(pi), pi)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..compiler import _read_uvarint, _uvarint
from ..rng import TracedRng
from .code import encoded_len, rs_encode
from .merkle import HashSpec, MalformedPath, byte_leaves, depth_for, merkle_commit, merkle_root, merkle_verify

FRAME = 4
DIRECTIONS = ("V->P", "P->V", "harness")


@dataclass(frozen=True)
class Relation:
    """NP-style relation with a deterministic decision procedure.

    ``time_bound`` is the declared number of steps (hash calls plus one
    predicate evaluation) for witnesses of at most ``max_witness`` bytes.
    """

    name: str
    instance: bytes
    decide: Callable[[bytes, bytes], bool]
    time_bound: int = 0
    max_witness: int = 0
    explain: Optional[Callable[[bytes, bytes], str]] = None

    def __call__(self, witness: bytes) -> bool:
        return bool(self.decide(self.instance, witness))

    def why(self, witness: bytes) -> str:
        return self.explain(self.instance, witness) if self.explain else f"{self.name} does not hold"


@dataclass
class Message:
    direction: str
    label: str
    payload: bytes

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(self.direction)

    @property
    def nbytes(self) -> int:
        return FRAME + len(self.payload)

    def framed(self) -> bytes:
        return struct.pack(">I", len(self.payload)) + self.payload


def byte_counts(messages: Sequence[Message]) -> Dict[str, int]:
    out = {d: 0 for d in DIRECTIONS}
    for msg in messages:
        out[msg.direction] += msg.nbytes
    return out


# --- wire encodings ------------------------------------------------------------------------


@dataclass(frozen=True)
class SaokCommit:
    rt_m: bytes
    rt_w: bytes
    m_len: int
    w_len: int

    def to_bytes(self) -> bytes:
        return self.rt_m + self.rt_w + _uvarint(self.m_len) + _uvarint(self.w_len)

    @classmethod
    def from_bytes(cls, data: bytes, digest_size: int = 32) -> "SaokCommit":
        d = digest_size
        m_len, pos = _read_uvarint(data, 2 * d)
        w_len, _ = _read_uvarint(data, pos)
        return cls(data[:d], data[d:2 * d], m_len, w_len)


@dataclass(frozen=True)
class Opening:
    index: int
    symbol: bytes
    path: Tuple[bytes, ...]


def encode_indices(indices: Sequence[int], width: int) -> bytes:
    v = 0
    for j in indices:
        v = (v << width) | j
    nbits = width * len(indices)
    return v.to_bytes((nbits + 7) // 8, "big") if nbits else b""


def decode_indices(data: bytes, count: int, width: int) -> List[int]:
    if width == 0:
        return [0] * count
    v = int.from_bytes(data, "big")
    mask = (1 << width) - 1
    return [(v >> (width * (count - 1 - i))) & mask for i in range(count)]


def encode_openings(openings: Sequence[Opening]) -> bytes:
    return b"".join(o.symbol + b"".join(o.path) for o in openings)


def decode_openings(data: bytes, indices: Sequence[int], depth: int, digest_size: int = 32) -> List[Opening]:
    step = 1 + depth * digest_size
    if len(data) != step * len(indices):
        raise MalformedPath("opening message has the wrong length")
    out = []
    for i, j in enumerate(indices):
        chunk = data[i * step:(i + 1) * step]
        path = tuple(chunk[1 + t * digest_size:1 + (t + 1) * digest_size] for t in range(depth))
        out.append(Opening(j, chunk[:1], path))
    return out


# --- provers --------------------------------------------------------------------------------


def honest_message(w: bytes) -> bytes:
    return rs_encode(bytes(w)) + bytes(w)


class SaokProver:
    """Resettable prover: ``commit`` and ``open`` are functions of their inputs."""

    def commit(self) -> SaokCommit:
        raise NotImplementedError

    def open(self, indices: Sequence[int]) -> List[Opening]:
        raise NotImplementedError

    def proof(self) -> bytes:
        raise NotImplementedError


class MessageProver(SaokProver):
    """Commits to an arbitrary message ``m`` next to the witness root of ``pi``."""

    def __init__(self, m: bytes, pi: bytes, hs: HashSpec):
        self.m, self.pi, self.hs = bytes(m), bytes(pi), hs
        self.tree_m = merkle_commit(byte_leaves(self.m), hs)
        self.tree_w = merkle_commit(byte_leaves(self.pi), hs)

    def commit(self) -> SaokCommit:
        return SaokCommit(self.tree_m.root, self.tree_w.root, len(self.m), len(self.pi))

    def open(self, indices: Sequence[int]) -> List[Opening]:
        return [Opening(j, self.m[j:j + 1], tuple(self.tree_m.open(j))) for j in indices]

    def proof(self) -> bytes:
        return self.pi


class HonestSaokProver(MessageProver):
    def __init__(self, witness: bytes, hs: HashSpec):
        super().__init__(honest_message(witness), witness, hs)


class CorruptingSaokProver(MessageProver):
    """Honest message with the symbols at ``positions`` replaced by different bytes."""

    def __init__(self, witness: bytes, hs: HashSpec, positions: Sequence[int], rng: TracedRng):
        m = bytearray(honest_message(witness))
        self.positions = sorted(set(positions))
        for j in self.positions:
            m[j] ^= 1 + rng.below(255, "corrupt")
        super().__init__(bytes(m), witness, hs)

    @classmethod
    def at_fraction(cls, witness: bytes, hs: HashSpec, delta: float, rng: TracedRng) -> "CorruptingSaokProver":
        L = len(honest_message(witness))
        count = round(delta * L)
        chosen = set()
        while len(chosen) < count:
            chosen.add(rng.below(L, "position"))
        return cls(witness, hs, sorted(chosen), rng)

    @property
    def delta(self) -> float:
        return len(self.positions) / len(self.m)


# --- the run ----------------------------------------------------------------------------------


@dataclass
class SaokTranscript:
    relation: str
    commit: SaokCommit
    challenges: List[int]
    openings: List[Opening]
    verdict: bool
    reason: str
    messages: List[Message] = field(default_factory=list)

    @property
    def rt(self) -> Tuple[bytes, bytes]:
        return self.commit.rt_m, self.commit.rt_w

    def byte_counts(self) -> Dict[str, int]:
        return byte_counts(self.messages)

    def to_json(self) -> str:
        return json.dumps({
            "relation": self.relation,
            "rt_m": self.commit.rt_m.hex(),
            "rt_w": self.commit.rt_w.hex(),
            "m_len": self.commit.m_len,
            "challenges": self.challenges,
            "verdict": "accept" if self.verdict else "reject",
            "reason": self.reason,
            "messages": [{"dir": m.direction, "label": m.label, "bytes": m.nbytes} for m in self.messages],
        }, sort_keys=True)


def saok_run(relation: Relation, witness: Optional[bytes], hs: HashSpec, k: int = 32,
             rng: Optional[TracedRng] = None, prover: Optional[SaokProver] = None,
             label: str = "") -> SaokTranscript:
    """One execution; pass ``prover`` for adversarial mode, else the honest prover for ``witness``."""
    rng = rng or TracedRng(0)
    prover = prover or HonestSaokProver(witness, hs)
    tag = f"{label or relation.name}/"
    d = hs.digest_size
    msgs: List[Message] = []

    # message 1: roots (parsed back from the wire so the verifier sees only bytes)
    com_bytes = prover.commit().to_bytes()
    msgs.append(Message("P->V", tag + "commit", com_bytes))
    com = SaokCommit.from_bytes(com_bytes, d)

    def done(ok, why, idx=(), ops=()):
        return SaokTranscript(relation.name, com, list(idx), list(ops), ok, why, msgs)

    if com.m_len != encoded_len(com.w_len) + com.w_len:
        return done(False, "committed length is not a codeword-plus-proof length")

    # message 2: k uniform indices with replacement
    width = depth_for(com.m_len)
    idx = [rng.below(com.m_len, "challenge") for _ in range(k)]
    msgs.append(Message("V->P", tag + "challenge", encode_indices(idx, width)))

    # message 3: openings
    try:
        ops = decode_openings(encode_openings(prover.open(decode_indices(msgs[-1].payload, k, width))),
                              idx, width, d)
    except MalformedPath as exc:
        return done(False, f"malformed openings: {exc}", idx)
    msgs.append(Message("P->V", tag + "open", encode_openings(ops)))

    pi = bytes(prover.proof())
    msgs.append(Message("harness", tag + "proof", pi))

    for o in ops:
        try:
            ok = merkle_verify(com.rt_m, o.index, o.symbol, o.path, hs, com.m_len)
        except MalformedPath as exc:
            return done(False, f"malformed path at {o.index}: {exc}", idx, ops)
        if not ok:
            return done(False, f"path for index {o.index} does not verify", idx, ops)
    if len(pi) != com.w_len or merkle_root(pi, hs) != com.rt_w:
        return done(False, "proof does not match the witness root", idx, ops)
    if not relation(pi):
        return done(False, relation.why(pi), idx, ops)
    ref = honest_message(pi)
    for o in ops:
        if ref[o.index:o.index + 1] != o.symbol:
            return done(False, f"spot check failed at index {o.index}", idx, ops)
    return done(True, "accept", idx, ops)


def merkle_relation(name: str, root: bytes, hs: HashSpec, max_witness: int = 0) -> Relation:
    """``R(com, w) = 1`` iff ``w`` is a valid opening of the byte-leaf Merkle root ``com``."""
    return Relation(name, root, lambda inst, w: merkle_root(w, hs) == inst,
                    time_bound=2 * max(1, max_witness) + 1, max_witness=max_witness,
                    explain=lambda inst, w: f"{name}: witness does not open the commitment")
