"""Single-prover compilation of the two-prover game over a pluggable QHE interface.

The verifier encrypts Alice's question, the prover answers it homomorphically,
then receives Bob's question in the clear. Round two is only reachable through
the branch object returned by round one, so the prover cannot see ``y`` early.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .games import (
    Com,
    Mixed,
    MsAlice,
    MsBob,
    PureBasis,
    QItem,
    Question,
    Tele,
    TwoProverStrategy,
    braiding_items,
    draw_braiding,
    draw_mvp,
    game_verdict,
    ham_items,
    main_items,
    mvp_items,
)
from .hamiltonian import MeasurementHamiltonian
from .rng import TracedRng
from .smallbias import BiasedSet

MAGIC = b"QHE1"


class DecryptionError(ValueError):
    pass


class UnsupportedCircuit(ValueError):
    pass


# --- wire encodings -----------------------------------------------------------------


def _uvarint(v: int) -> bytes:
    if v < 0:
        raise ValueError("varint must be non-negative")
    out = bytearray()
    while True:
        byte = v & 0x7F
        v >>= 7
        out.append(byte | (0x80 if v else 0))
        if not v:
            return bytes(out)


def _read_uvarint(buf: bytes, pos: int) -> Tuple[int, int]:
    v, shift = 0, 0
    while True:
        byte = buf[pos]
        pos += 1
        v |= (byte & 0x7F) << shift
        shift += 7
        if not byte & 0x80:
            return v, pos


_TAGS = {"com": 1, "ms": 2, "ms_cell": 3, "pure": 4, "mixed": 5, "tele": 6}


def encode_question(q: Question) -> bytes:
    """Compact binary form: tag byte then unsigned varints."""
    out = bytearray([_TAGS[q.tag]])
    if isinstance(q, (Com, MsAlice, MsBob)):
        out += _uvarint(q.r_a) + _uvarint(q.r_b)
    if isinstance(q, MsAlice):
        out += bytes(q.cells)
    elif isinstance(q, MsBob):
        out.append(q.j)
    elif isinstance(q, PureBasis):
        out += q.basis.encode()
    elif isinstance(q, Mixed):
        out += _uvarint(q.seed)
    return bytes(out)


def decode_question(data: bytes) -> Question:
    tag = {v: k for k, v in _TAGS.items()}.get(data[0])
    pos = 1
    if tag in ("com", "ms", "ms_cell"):
        ra, pos = _read_uvarint(data, pos)
        rb, pos = _read_uvarint(data, pos)
        if tag == "com":
            return Com(ra, rb)
        if tag == "ms":
            return MsAlice(ra, rb, tuple(data[pos:pos + 3]))
        return MsBob(ra, rb, data[pos])
    if tag == "pure":
        return PureBasis(data[pos:pos + 1].decode())
    if tag == "mixed":
        return Mixed(_read_uvarint(data, pos)[0])
    if tag == "tele":
        return Tele()
    raise ValueError("unknown question tag byte")


def encode_bits(bits: str) -> bytes:
    """Bit string as ``varint(len) || big-endian packed bits``."""
    k = len(bits)
    body = int(bits, 2).to_bytes((k + 7) // 8, "big") if k else b""
    return _uvarint(k) + body


def decode_bits(data: bytes) -> str:
    k, pos = _read_uvarint(data, 0)
    return format(int.from_bytes(data[pos:], "big"), f"0{k}b") if k else ""


def _lp(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


# --- ciphertexts and schemes --------------------------------------------------------------


@dataclass(frozen=True)
class Ciphertext:
    scheme: str
    key_id: bytes
    body: bytes
    tag: bytes = b""

    def to_bytes(self) -> bytes:
        return MAGIC + _lp(self.scheme.encode()) + _lp(self.key_id) + _lp(self.body) + _lp(self.tag)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if data[:4] != MAGIC:
            raise DecryptionError("bad ciphertext header")
        parts, pos = [], 4
        for _ in range(4):
            (k,) = struct.unpack(">I", data[pos:pos + 4])
            parts.append(data[pos + 4:pos + 4 + k])
            pos += 4 + k
        return cls(parts[0].decode(), parts[1], parts[2], parts[3])

    def __len__(self) -> int:
        return len(self.to_bytes())


@dataclass(frozen=True)
class SecretKey:
    secparam: int
    material: bytes

    @property
    def key_id(self) -> bytes:
        return hashlib.blake2s(self.material, digest_size=8).digest()


@dataclass
class EvalBranch:
    """One outcome of a homomorphic evaluation: output ciphertext, weight, post state."""

    ciphertext: Ciphertext
    weight: float
    state: object


class AliceCircuit:
    """Alice's question-dependent measurement, read off a two-prover strategy."""

    kind = "alice_measurement"

    def __init__(self, strategy: TwoProverStrategy):
        self.strategy = strategy

    def branches(self, x: Question, state) -> List[Tuple[str, float, object]]:
        return [(b.answer, b.weight, b.state) for b in self.strategy.alice_branches(x, state)]


class IdentityCircuit:
    kind = "identity"


class QheScheme:
    name = "abstract"
    insecure = True
    capabilities: Tuple[str, ...] = ()

    def gen(self, secparam: int, rng: Optional[TracedRng] = None) -> SecretKey:
        raise NotImplementedError

    def enc(self, key: SecretKey, plaintext: bytes) -> Ciphertext:
        raise NotImplementedError

    def eval_branches(self, circuit, state, ct: Ciphertext) -> List[EvalBranch]:
        raise NotImplementedError

    def dec(self, key: SecretKey, ct: Ciphertext) -> bytes:
        raise NotImplementedError

    def eval(self, circuit, state, ct: Ciphertext, rng: TracedRng) -> EvalBranch:
        br = self.eval_branches(circuit, state, ct)
        return br[rng.choice_index([b.weight for b in br], "eval")]


class TransparentQhe(QheScheme):
    """Correct but insecure: the plaintext rides inside a tagged wrapper.

    Ciphertexts carry ``secparam / 8`` tag bytes so that message sizes scale
    with the security parameter as they would for a real scheme.
    """

    name = "transparent-v1"
    insecure = True
    capabilities = ("identity", "alice_measurement")

    def gen(self, secparam: int = 128, rng: Optional[TracedRng] = None) -> SecretKey:
        nbytes = max(1, secparam // 8)
        if rng is None:
            material = secrets.token_bytes(nbytes)
        else:
            material = rng.bits(8 * nbytes, "key").to_bytes(nbytes, "big")
        return SecretKey(secparam, material)

    def _wrap(self, key_id: bytes, secparam_bytes: int, body: bytes) -> Ciphertext:
        return Ciphertext(self.name, key_id, body, bytes(secparam_bytes))

    def enc(self, key: SecretKey, plaintext: bytes) -> Ciphertext:
        return self._wrap(key.key_id, max(1, key.secparam // 8), plaintext)

    def dec(self, key: SecretKey, ct: Ciphertext) -> bytes:
        if ct.scheme != self.name:
            raise DecryptionError(f"ciphertext from scheme {ct.scheme!r}")
        if ct.key_id != key.key_id:
            raise DecryptionError("key mismatch")
        return ct.body

    def eval_branches(self, circuit, state, ct: Ciphertext) -> List[EvalBranch]:
        if circuit.kind not in self.capabilities:
            raise UnsupportedCircuit(f"{self.name} cannot evaluate {circuit.kind}")
        if circuit.kind == "identity":
            return [EvalBranch(ct, 1.0 if state is None else state.norm2(), state)]
        x = decode_question(ct.body)
        return [
            EvalBranch(self._wrap(ct.key_id, len(ct.tag), encode_bits(ans)), w, st)
            for ans, w, st in circuit.branches(x, state)
        ]


def transparent_qhe() -> TransparentQhe:
    return TransparentQhe()


# --- compiled prover -----------------------------------------------------------------------


class ProverBranch:
    """Post-round-one prover; the only way to answer ``y``."""

    def __init__(self, alpha: Ciphertext, weight: float, answer_y: Callable[[Question], Dict[str, float]], state=None):
        self.alpha = alpha
        self.weight = weight
        self._answer_y = answer_y
        # unnormalised post-measurement register, exposed for diagnostics only
        self.state = state

    def round2_distribution(self, y: Question) -> Dict[str, float]:
        return self._answer_y(y)

    def round2(self, y: Question, rng: TracedRng) -> str:
        dist = self.round2_distribution(y)
        keys = list(dist)
        return keys[rng.choice_index([dist[k] for k in keys], "round2")]


class CompiledProver:
    def round1_branches(self, c: Ciphertext) -> List[ProverBranch]:
        raise NotImplementedError

    def round1(self, c: Ciphertext, rng: TracedRng) -> ProverBranch:
        br = self.round1_branches(c)
        return br[rng.choice_index([b.weight for b in br], "round1")]


class HonestCompiledProver(CompiledProver):
    """Alice's measurement under eval, then Bob's measurement on the same register."""

    def __init__(self, strategy: TwoProverStrategy, qhe: QheScheme):
        self.strategy, self.qhe = strategy, qhe
        self.circuit = AliceCircuit(strategy)

    def round1_branches(self, c: Ciphertext) -> List[ProverBranch]:
        state = self.strategy.initial_state()
        out = []
        for eb in self.qhe.eval_branches(self.circuit, state, c):
            post = eb.state

            def answer_y(y, post=post):
                return self.strategy.bob_distribution(y, post)

            out.append(ProverBranch(eb.ciphertext, eb.weight, answer_y, post))
        return out


def honest_compiled_prover(strategy: TwoProverStrategy, qhe: QheScheme) -> HonestCompiledProver:
    if AliceCircuit.kind not in qhe.capabilities:
        raise UnsupportedCircuit(f"{qhe.name} cannot evaluate Alice's measurements")
    return HonestCompiledProver(strategy, qhe)


# --- games as verifier objects ----------------------------------------------------------------


@dataclass
class NonlocalGame:
    """Question sampler, exact question list and predicate for one (sub)game."""

    name: str
    n: int
    sample: Callable[[TracedRng], Tuple[str, Question, Question, dict]]
    items: Callable[[], List[QItem]]
    S: Optional[BiasedSet] = None
    mh: Optional[MeasurementHamiltonian] = None

    def verdict(self, test, x, a, y, b, private) -> bool:
        return game_verdict(test, x, a, y, b, private, self.S, self.mh)


def braiding_game(S: BiasedSet, strict: bool = False) -> NonlocalGame:
    return NonlocalGame("braiding", S.n, lambda rng: draw_braiding(S, rng, strict),
                        lambda: braiding_items(S, strict), S=S)


def mvp_game(mh: MeasurementHamiltonian) -> NonlocalGame:
    return NonlocalGame("mvp", mh.n, lambda rng: draw_mvp(mh, rng), lambda: mvp_items(mh), mh=mh)


def hamiltonian_game(mh: MeasurementHamiltonian) -> NonlocalGame:
    def sample(rng):
        return "ham", Tele(), Mixed(rng.bits(mh.seed_bits, "seed")), {}

    return NonlocalGame("ham", mh.n, sample, lambda: ham_items(mh), mh=mh)


def main_game(mh: MeasurementHamiltonian, S: BiasedSet, strict: bool = False) -> NonlocalGame:
    subs = [braiding_game(S, strict), mvp_game(mh), hamiltonian_game(mh)]

    def sample(rng):
        return subs[rng.below(3, "test")].sample(rng)

    return NonlocalGame("main", mh.n, sample, lambda: main_items(mh, S, strict), S=S, mh=mh)


# --- compiled runs ------------------------------------------------------------------------------


@dataclass
class CompiledTranscript:
    test: str
    c: Ciphertext
    alpha: Ciphertext
    y: Question
    b: str
    a: Optional[str]
    verdict: bool
    private: Dict[str, object] = field(default_factory=dict)
    diagnostic: str = ""
    x: Optional[Question] = None
    sk: Optional[SecretKey] = None

    def to_json(self) -> str:
        from .games import question_to_json

        return json.dumps({
            "test": self.test,
            "c": self.c.to_bytes().hex(),
            "alpha": self.alpha.to_bytes().hex(),
            "y": question_to_json(self.y),
            "b": self.b,
            "a": self.a,
            "verdict": "accept" if self.verdict else "reject",
            "private": self.private,
            "diagnostic": self.diagnostic,
        }, sort_keys=True)


def _decrypt_answer(qhe: QheScheme, sk: SecretKey, alpha: Ciphertext) -> Tuple[Optional[str], str]:
    try:
        return decode_bits(qhe.dec(sk, alpha)), ""
    except (DecryptionError, ValueError, IndexError) as exc:
        return None, f"decryption failed: {exc}"


def compile_and_run(game: NonlocalGame, qhe: QheScheme, prover: CompiledProver, secparam: int,
                    rng: TracedRng) -> CompiledTranscript:
    """The five steps in order: sample, keygen + encrypt, round 1, round 2, decrypt + decide."""
    test, x, y, private = game.sample(rng)
    sk = qhe.gen(secparam, rng)
    c = qhe.enc(sk, encode_question(x))
    branch = prover.round1(c, rng)
    b = branch.round2(y, rng)
    a, diag = _decrypt_answer(qhe, sk, branch.alpha)
    verdict = False
    if a is not None:
        try:
            verdict = game.verdict(test, x, a, y, b, private)
        except ValueError as exc:
            diag = f"malformed answer: {exc}"
    return CompiledTranscript(test, c, branch.alpha, y, b, a, verdict, dict(private), diag, x, sk)


@dataclass
class _Round1:
    sk: SecretKey
    branches: List[Tuple[Optional[str], ProverBranch]]


def _round1(qhe, prover, x, secparam, rng) -> _Round1:
    sk = qhe.gen(secparam, rng)
    c = qhe.enc(sk, encode_question(x))
    return _Round1(sk, [(_decrypt_answer(qhe, sk, br.alpha)[0], br) for br in prover.round1_branches(c)])


def _joint(r1: _Round1, y: Question) -> Dict[Tuple[str, str], float]:
    out: Dict[Tuple[str, str], float] = {}
    for a, br in r1.branches:
        a = "!" if a is None else a
        for bans, p in br.round2_distribution(y).items():
            out[(a, bans)] = out.get((a, bans), 0.0) + br.weight * p
    return out


def compiled_joint_distribution(qhe: QheScheme, prover: CompiledProver, x: Question, y: Question,
                                secparam: int = 128, rng: Optional[TracedRng] = None) -> Dict[Tuple[str, str], float]:
    """``Pr[dec(alpha), b]`` for fixed questions, enumerating every prover branch.

    Undecryptable answers are reported under ``"!"``.
    """
    return _joint(_round1(qhe, prover, x, secparam, rng), y)


def compiled_exact_accept(game: NonlocalGame, qhe: QheScheme, prover: CompiledProver, secparam: int = 128,
                          items: Optional[Sequence[QItem]] = None) -> float:
    total = 0.0
    rounds: Dict[Question, _Round1] = {}
    for p, test, x, y, private in (game.items() if items is None else items):
        if private.get("auto_accept"):
            total += float(p)
            continue
        if x not in rounds:
            rounds[x] = _round1(qhe, prover, x, secparam, None)
        acc = 0.0
        for (a, b), w in _joint(rounds[x], y).items():
            if a == "!":
                continue
            try:
                ok = game.verdict(test, x, a, y, b, private)
            except ValueError:
                ok = False
            acc += w if ok else 0.0
        total += float(p) * acc
    return total
