"""Fully succinct three-phase protocol wrapped around the compiled game.

Phase 1: the verifier sends ``hk`` and the encrypted question; the prover
commits to its encrypted answer and proves knowledge of an opening (R1).
Phase 2: the verifier sends Bob's question in the clear; the prover commits
to its answer and proves knowledge of an opening (R2). Phase 3: the verifier
reveals the secret key and the prover proves knowledge of openings of both
commitments that the game predicate accepts after decryption (R3).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..compiler import (
    Ciphertext,
    CompiledProver,
    CompiledTranscript,
    DecryptionError,
    NonlocalGame,
    QheScheme,
    SecretKey,
    _read_uvarint,
    _uvarint,
    decode_bits,
    decode_question,
    encode_bits,
    encode_question,
)
from ..games import question_to_json
from ..rng import TracedRng
from .merkle import HashSpec, merkle_root
from .saok import HonestSaokProver, Message, Relation, SaokProver, SaokTranscript, byte_counts, merkle_relation, saok_run

PHASES = ("phase1", "phase2", "phase3")


def lp(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def split_lp(data: bytes, count: int) -> List[bytes]:
    out, pos = [], 0
    for _ in range(count):
        if pos + 4 > len(data):
            raise ValueError("truncated length prefix")
        (k,) = struct.unpack(">I", data[pos:pos + 4])
        if pos + 4 + k > len(data):
            raise ValueError("truncated field")
        out.append(data[pos + 4:pos + 4 + k])
        pos += 4 + k
    if pos != len(data):
        raise ValueError("trailing bytes")
    return out


def encode_secret_key(sk: SecretKey) -> bytes:
    return _uvarint(sk.secparam) + sk.material


def decode_secret_key(data: bytes) -> SecretKey:
    secparam, pos = _read_uvarint(data, 0)
    return SecretKey(secparam, data[pos:])


# --- relation R3 ------------------------------------------------------------------------------


def r3_instance(com1: bytes, com2: bytes, c1: bytes, q2: bytes, sk: bytes, test: str, private: dict) -> bytes:
    meta = json.dumps({"test": test, "private": private}, sort_keys=True).encode()
    return lp(com1) + lp(com2) + lp(c1) + lp(q2) + lp(sk) + lp(meta)


def r3_witness(alpha: bytes, answer_b: bytes) -> bytes:
    return lp(alpha) + lp(answer_b)


def r3_check(game: NonlocalGame, qhe: QheScheme, hs: HashSpec, instance: bytes, witness: bytes) -> Tuple[bool, str]:
    """Openings of both commitments, then ``V(Dec(c1), Dec(alpha), q2, b) = 1``."""
    com1, com2, c1, q2, skb, meta = split_lp(instance, 6)
    try:
        alpha, wb = split_lp(witness, 2)
    except ValueError as exc:
        return False, f"R3: malformed witness ({exc})"
    if merkle_root(alpha, hs) != com1:
        return False, "R3: witness does not open com1"
    if merkle_root(wb, hs) != com2:
        return False, "R3: witness does not open com2"
    info = json.loads(meta)
    try:
        sk = decode_secret_key(skb)
        x = decode_question(qhe.dec(sk, Ciphertext.from_bytes(c1)))
        a = decode_bits(qhe.dec(sk, Ciphertext.from_bytes(alpha)))
        y = decode_question(q2)
        b = decode_bits(wb)
    except (DecryptionError, ValueError, IndexError, struct.error) as exc:
        return False, f"R3: decoding failed ({exc})"
    try:
        ok = game.verdict(info["test"], x, a, y, b, info["private"])
    except ValueError as exc:
        return False, f"R3: malformed answer ({exc})"
    return bool(ok), "R3: game predicate accepts" if ok else "R3: game predicate rejects"


def r3_relation(game: NonlocalGame, qhe: QheScheme, hs: HashSpec, instance: bytes, max_witness: int = 0) -> Relation:
    return Relation("R3", instance, lambda inst, w: r3_check(game, qhe, hs, inst, w)[0],
                    time_bound=2 * max(1, max_witness) + 3, max_witness=max_witness,
                    explain=lambda inst, w: r3_check(game, qhe, hs, inst, w)[1])


def r3_from_compiled(game: NonlocalGame, qhe: QheScheme, hs: HashSpec, t: CompiledTranscript) -> Tuple[Relation, bytes]:
    """R3 instance and witness for the values of a question-succinct run."""
    alpha, wb = t.alpha.to_bytes(), encode_bits(t.b)
    inst = r3_instance(merkle_root(alpha, hs), merkle_root(wb, hs), t.c.to_bytes(), encode_question(t.y),
                       encode_secret_key(t.sk), t.test, t.private)
    return r3_relation(game, qhe, hs, inst), r3_witness(alpha, wb)


# --- provers -----------------------------------------------------------------------------------


class SuccinctProver:
    """Each phase returns ``(commitment, witness)``; the witness feeds that phase's argument."""

    def phase1(self, hs: HashSpec, c1: bytes) -> Tuple[bytes, bytes]:
        raise NotImplementedError

    def phase2(self, q2: bytes) -> Tuple[bytes, bytes]:
        raise NotImplementedError

    def phase3(self, sk: bytes) -> bytes:
        raise NotImplementedError

    def saok_prover(self, phase: str, witness: bytes, hs: HashSpec) -> SaokProver:
        return HonestSaokProver(witness, hs)


class CompiledSuccinctProver(SuccinctProver):
    """Runs a compiled prover underneath and commits to its answers."""

    def __init__(self, compiled: CompiledProver, rng: TracedRng):
        self.compiled, self.rng = compiled, rng

    def phase1(self, hs, c1):
        self.hs = hs
        self.branch = self.compiled.round1(Ciphertext.from_bytes(c1), self.rng)
        self.alpha = self.branch.alpha.to_bytes()
        return merkle_root(self.alpha, hs), self.alpha

    def phase2(self, q2):
        self.wb = encode_bits(self.branch.round2(decode_question(q2), self.rng))
        return merkle_root(self.wb, self.hs), self.wb

    def phase3(self, sk):
        return r3_witness(self.alpha, self.wb)


# --- the run -------------------------------------------------------------------------------------


@dataclass
class SuccinctTranscript:
    test: str
    x: object
    y: object
    private: dict
    commitments: Dict[str, bytes]
    saoks: Dict[str, SaokTranscript]
    messages: List[Message]
    verdict: bool
    failed_phase: Optional[str]
    reason: str
    hashspec: HashSpec = field(repr=False, default=None)

    def byte_counts(self) -> Dict[str, int]:
        return byte_counts(self.messages)

    def to_json(self) -> str:
        return json.dumps({
            "test": self.test,
            "x": question_to_json(self.x),
            "y": question_to_json(self.y),
            "private": self.private,
            "commitments": {k: v.hex() for k, v in self.commitments.items()},
            "verdict": "accept" if self.verdict else "reject",
            "failed_phase": self.failed_phase,
            "reason": self.reason,
            "messages": [{"dir": m.direction, "label": m.label, "bytes": m.nbytes} for m in self.messages],
            "bytes": self.byte_counts(),
        }, sort_keys=True)


def run_succinct_protocol(game: NonlocalGame, qhe: QheScheme, prover, secparam: int = 128,
                          rng: Optional[TracedRng] = None, hashspec: Optional[HashSpec] = None,
                          k: int = 32) -> SuccinctTranscript:
    """``prover`` is a SuccinctProver or a CompiledProver (wrapped honestly).

    A fresh hash key is sampled unless ``hashspec`` fixes one.
    """
    rng = rng or TracedRng(0)
    if isinstance(prover, CompiledProver):
        prover = CompiledSuccinctProver(prover, rng)
    test, x, y, private = game.sample(rng)
    hs = hashspec or HashSpec.sample(rng)
    sk = qhe.gen(secparam, rng)
    c1 = qhe.enc(sk, encode_question(x)).to_bytes()
    msgs: List[Message] = []
    coms: Dict[str, bytes] = {}
    saoks: Dict[str, SaokTranscript] = {}

    def finish(phase=None, reason="accept"):
        return SuccinctTranscript(test, x, y, dict(private), coms, saoks, msgs, phase is None, phase, reason, hs)

    def argue(phase, relation, witness):
        sp = prover.saok_prover(phase, witness, hs)
        tr = saok_run(relation, witness, hs, k, rng, prover=sp, label=relation.name)
        saoks[phase] = tr
        msgs.extend(tr.messages)
        return tr

    # phase 1
    msgs += [Message("V->P", "hk", hs.to_bytes()), Message("V->P", "c1", c1)]
    com1, w1 = prover.phase1(hs, c1)
    coms["com1"] = com1
    msgs.append(Message("P->V", "com1", com1))
    tr = argue("phase1", merkle_relation("R1", com1, hs, len(w1)), w1)
    if not tr.verdict:
        return finish("phase1", tr.reason)

    # phase 2
    q2 = encode_question(y)
    msgs.append(Message("V->P", "q2", q2))
    com2, w2 = prover.phase2(q2)
    coms["com2"] = com2
    msgs.append(Message("P->V", "com2", com2))
    tr = argue("phase2", merkle_relation("R2", com2, hs, len(w2)), w2)
    if not tr.verdict:
        return finish("phase2", tr.reason)

    # phase 3
    skb = encode_secret_key(sk)
    msgs.append(Message("V->P", "sk", skb))
    w3 = prover.phase3(skb)
    inst = r3_instance(com1, com2, c1, q2, skb, test, dict(private))
    tr = argue("phase3", r3_relation(game, qhe, hs, inst, len(w3)), w3)
    if not tr.verdict:
        return finish("phase3", tr.reason)
    return finish()
