"""Two-prover game engine: questions, verifier predicates and prover strategies.

Honest provers share ``n + 1`` EPR pairs. Alice holds qubits ``0..n``, Bob holds
``n+1..2n+1`` (pair ``i`` is ``(i, n+1+i)``), and the witness, when present,
sits on ``2n+2..3n+1``. Most tests only touch the last ``n`` pairs; the first
pair carries the extra qubit of the magic square grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .hamiltonian import MeasurementHamiltonian
from .pauli import PauliString, PauliWord, bits_to_int, dot, sigma_x, sigma_z, word_mul
from .rng import TracedRng
from .simulator import (
    QuantumState,
    apply_word,
    basis_distribution,
    measure_bases_branches,
    observable_branches,
    prepare_epr,
    teleport_branches,
)
from .smallbias import BiasedSet

# --- questions ----------------------------------------------------------------


@dataclass(frozen=True)
class Com:
    r_a: int
    r_b: int
    tag = "com"


@dataclass(frozen=True)
class MsAlice:
    r_a: int
    r_b: int
    cells: Tuple[int, int, int]
    tag = "ms"

    def __post_init__(self):
        if tuple(self.cells) not in LINES:
            raise ValueError(f"cells {self.cells} are not a row or column")


@dataclass(frozen=True)
class MsBob:
    r_a: int
    r_b: int
    j: int
    tag = "ms_cell"

    def __post_init__(self):
        if not 1 <= self.j <= 9:
            raise ValueError("cell index must lie in 1..9")


@dataclass(frozen=True)
class PureBasis:
    basis: str
    tag = "pure"

    def __post_init__(self):
        if self.basis not in ("X", "Z"):
            raise ValueError("pure basis must be X or Z")


@dataclass(frozen=True)
class Mixed:
    seed: int
    tag = "mixed"


@dataclass(frozen=True)
class Tele:
    tag = "tele"


Question = Union[Com, MsAlice, MsBob, PureBasis, Mixed, Tele]


def question_to_json(q: Question) -> dict:
    out = {"tag": q.tag}
    if isinstance(q, (Com, MsAlice, MsBob)):
        out.update(r_a=q.r_a, r_b=q.r_b)
    if isinstance(q, MsAlice):
        out["cells"] = list(q.cells)
    elif isinstance(q, MsBob):
        out["j"] = q.j
    elif isinstance(q, PureBasis):
        out["basis"] = q.basis
    elif isinstance(q, Mixed):
        out["seed"] = hex(q.seed)
    return out


def question_from_json(d: Mapping) -> Question:
    tag = d["tag"]
    if tag == "com":
        return Com(d["r_a"], d["r_b"])
    if tag == "ms":
        return MsAlice(d["r_a"], d["r_b"], tuple(d["cells"]))
    if tag == "ms_cell":
        return MsBob(d["r_a"], d["r_b"], d["j"])
    if tag == "pure":
        return PureBasis(d["basis"])
    if tag == "mixed":
        return Mixed(int(d["seed"], 16))
    if tag == "tele":
        return Tele()
    raise ValueError(f"unknown question tag {tag!r}")


def answer_arity(q: Question, n: int) -> int:
    if isinstance(q, Com):
        return 2
    if isinstance(q, MsAlice):
        return 3
    if isinstance(q, MsBob):
        return 1
    if isinstance(q, (PureBasis, Mixed)):
        return n
    if isinstance(q, Tele):
        return 2 * n
    raise TypeError(f"not a question: {q!r}")


def check_answer(q: Question, ans: str, n: int) -> None:
    k = answer_arity(q, n)
    if len(ans) != k or set(ans) - {"0", "1"}:
        raise ValueError(f"answer {ans!r} does not have arity {k} for {q.tag}")


def _hex_bits(bits: str) -> dict:
    return {"len": len(bits), "hex": format(int(bits, 2), "x") if bits else ""}


def _bits_hex(d: Mapping) -> str:
    k = d["len"]
    return format(int(d["hex"], 16), f"0{k}b") if k else ""


# --- magic square grid ---------------------------------------------------------

ROWS = ((1, 2, 3), (4, 5, 6), (7, 8, 9))
COLUMNS = ((1, 4, 7), (2, 5, 8), (3, 6, 9))
LINES = ROWS + COLUMNS


def lines_through(j: int) -> Tuple[Tuple[int, int, int], Tuple[int, int, int]]:
    return ROWS[(j - 1) // 3], COLUMNS[(j - 1) % 3]


def grid_words(a: str, b: str) -> Dict[int, PauliWord]:
    """Cell observables on ``n + 1`` qubits (first-qubit factor on the left)."""
    n = len(a)
    if len(b) != n:
        raise ValueError("a and b must have equal length")
    one = lambda letter: PauliWord(1, 1, letter == "X", letter == "Z")  # noqa: E731
    eye1, eyen = PauliWord.identity(1), PauliWord.identity(n)
    za, xb = sigma_z(a), sigma_x(b)
    g = {
        1: one("Z").tensor(eyen),
        2: eye1.tensor(za),
        3: one("Z").tensor(za),
        4: eye1.tensor(xb),
        5: one("X").tensor(eyen),
        6: one("X").tensor(xb),
    }
    g[7] = -(one("Z").tensor(xb))
    g[8] = -(one("X").tensor(za))
    g[9] = -word_mul(g[3], g[6])
    return g


def _line_parity(cells: Sequence[int]) -> int:
    g = grid_words("1", "1")
    prod = g[cells[0]] * g[cells[1]] * g[cells[2]]
    if prod.xmask or prod.zmask:
        raise AssertionError("grid line does not multiply to a scalar")
    return 0 if prod.phase == 1 else 1


# parity Alice's three bits must have on each line: rows 0, columns 1
LINE_PARITY: Dict[Tuple[int, int, int], int] = {line: _line_parity(line) for line in LINES}


def _parity(bits: str, mask: str) -> int:
    return dot(bits_to_int(bits), bits_to_int(mask))


# --- verifier predicates --------------------------------------------------------


def verify_commutation(a: str, b: str, alice_ans: str, basis: str, v: str) -> bool:
    if len(alice_ans) != 2 or len(v) != len(a):
        raise ValueError("arity mismatch in commutation test")
    if basis == "Z":
        return _parity(v, a) == int(alice_ans[0])
    if basis == "X":
        return _parity(v, b) == int(alice_ans[1])
    raise ValueError("basis must be X or Z")


def verify_anticommutation(
    a: str, b: str, cells: Sequence[int], alice_ans: str, j: int, bob_ans: str
) -> bool:
    """Magic square predicate with Bob asked cell ``j``.

    Bob's answer is ``n`` bits when ``j`` is 2 (asked Z) or 4 (asked X), one bit
    otherwise.
    """
    cells = tuple(cells)
    if cells not in LINES:
        raise ValueError(f"cells {cells} are not a row or column")
    if j not in cells:
        raise ValueError("Bob's cell is not on Alice's line")
    if len(alice_ans) != 3:
        raise ValueError("Alice must answer three bits")
    if sum(int(c) for c in alice_ans) % 2 != LINE_PARITY[cells]:
        return False
    k = cells.index(j)
    if j == 2:
        if len(bob_ans) != len(a):
            raise ValueError("arity mismatch for the Z cell")
        return _parity(bob_ans, a) == int(alice_ans[k])
    if j == 4:
        if len(bob_ans) != len(b):
            raise ValueError("arity mismatch for the X cell")
        return _parity(bob_ans, b) == int(alice_ans[k])
    if len(bob_ans) != 1:
        raise ValueError("Bob must answer one bit")
    return bob_ans == alice_ans[k]


def verify_mixed_vs_pure(basis: str, u: str, w: Optional[PauliString], v: str) -> bool:
    """``w`` None is the pure branch (accept iff u = v)."""
    if len(u) != len(v):
        raise ValueError("arity mismatch in mixed-vs-pure test")
    if w is None:
        return u == v
    return all(ui == vi for ui, vi, wi in zip(u, v, w.letters) if wi == basis)


def correct_outcomes(w: PauliString, v: str, ux: str, uz: str) -> str:
    """Undo the teleportation Pauli: ``ux`` flips Z-basis outcomes, ``uz`` flips X-basis ones."""
    out = []
    for wi, vi, xi, zi in zip(w.letters, v, ux, uz):
        if wi == "I":
            out.append("0")
        elif wi == "Z":
            out.append(str(int(vi) ^ int(xi)))
        else:
            out.append(str(int(vi) ^ int(zi)))
    return "".join(out)


def verify_hamiltonian(mh: MeasurementHamiltonian, seed: int, tele_ans: str, v: str) -> bool:
    n = mh.n
    if len(tele_ans) != 2 * n or len(v) != n:
        raise ValueError("arity mismatch in Hamiltonian test")
    s = correct_outcomes(mh.sampler(seed), v, tele_ans[:n], tele_ans[n:])
    return bool(mh.accept(seed, s))


# --- transcripts -------------------------------------------------------------------


@dataclass
class GameTranscript:
    """One play. ``private`` holds verifier coins that never reach a prover."""

    test: str
    alice_q: Question
    alice_a: str
    bob_q: Question
    bob_a: str
    verdict: bool
    private: Dict[str, object] = field(default_factory=dict)
    trace: List[tuple] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "test": self.test,
            "alice": {"question": question_to_json(self.alice_q), "answer": _hex_bits(self.alice_a)},
            "bob": {"question": question_to_json(self.bob_q), "answer": _hex_bits(self.bob_a)},
            "verdict": "accept" if self.verdict else "reject",
            "private": self.private,
            "trace": [list(t) for t in self.trace],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GameTranscript":
        d = json.loads(text)
        return cls(
            d["test"],
            question_from_json(d["alice"]["question"]), _bits_hex(d["alice"]["answer"]),
            question_from_json(d["bob"]["question"]), _bits_hex(d["bob"]["answer"]),
            d["verdict"] == "accept", d["private"], [tuple(t) for t in d["trace"]],
        )


def game_verdict(test: str, aq, aa, bq, ba, private, S: Optional[BiasedSet], mh: Optional[MeasurementHamiltonian]) -> bool:
    if test in ("com", "anticom"):
        a, b = S.member(aq.r_a), S.member(aq.r_b)
        if private.get("auto_accept"):
            return True
        if test == "com":
            return verify_commutation(a, b, aa, bq.basis, ba)
        return verify_anticommutation(a, b, aq.cells, aa, private["j"], ba)
    if test == "mvp":
        w = mh.sampler(bq.seed) if isinstance(bq, Mixed) else None
        return verify_mixed_vs_pure(aq.basis, aa, w, ba)
    if test == "ham":
        return verify_hamiltonian(mh, bq.seed, aa, ba)
    raise ValueError(f"unknown test {test!r}")


def recompute_verdict(t: GameTranscript, S: Optional[BiasedSet] = None, mh: Optional[MeasurementHamiltonian] = None) -> bool:
    return game_verdict(t.test, t.alice_q, t.alice_a, t.bob_q, t.bob_a, t.private, S, mh)


# --- strategies -----------------------------------------------------------------------


@dataclass
class Branch:
    answer: str
    weight: float
    state: Optional[QuantumState]


class TwoProverStrategy:
    """Provers answer via ``alice_branches``/``bob_distribution``; sampling is derived."""

    n: int

    def initial_state(self) -> Optional[QuantumState]:
        return None

    def alice_branches(self, q: Question, state) -> List[Branch]:
        raise NotImplementedError

    def bob_distribution(self, q: Question, state) -> Dict[str, float]:
        """Bob's conditional answer distribution on the given (post-Alice) state."""
        raise NotImplementedError

    def alice_respond(self, q: Question, state, rng: TracedRng) -> Tuple[str, object]:
        br = self.alice_branches(q, state)
        i = rng.choice_index([b.weight for b in br], "alice")
        chosen = br[i]
        st = chosen.state.normalized() if chosen.state is not None else None
        return chosen.answer, st

    def bob_respond(self, q: Question, state, rng: TracedRng) -> Tuple[str, object]:
        dist = self.bob_distribution(q, state)
        keys = list(dist)
        return keys[rng.choice_index([dist[k] for k in keys], "bob")], state


class HonestStrategy(TwoProverStrategy):
    """The italicised honest behaviour of every subtest."""

    def __init__(self, n: int, witness: Optional[QuantumState], mh: Optional[MeasurementHamiltonian], S: Optional[BiasedSet]):
        if witness is not None and witness.m != n:
            raise ValueError(f"witness has {witness.m} qubits, expected {n}")
        if mh is not None and mh.n != n:
            raise ValueError(f"Hamiltonian acts on {mh.n} qubits, expected {n}")
        if S is not None and S.n != n:
            raise ValueError(f"biased set has length {S.n}, expected {n}")
        self.n, self.witness, self.mh, self.S = n, witness, mh, S
        self.alice_all = tuple(range(n + 1))
        self.alice_last = tuple(range(1, n + 1))
        self.bob_all = tuple(range(n + 1, 2 * n + 2))
        self.bob_last = tuple(range(n + 2, 2 * n + 2))
        self.witness_qubits = tuple(range(2 * n + 2, 3 * n + 2))

    def initial_state(self) -> QuantumState:
        epr = prepare_epr(self.n + 1)
        return epr if self.witness is None else epr.tensor(self.witness)

    def _ab(self, q) -> Tuple[str, str]:
        return self.S.member(q.r_a), self.S.member(q.r_b)

    def _observables(self, state: QuantumState, words: Sequence[PauliWord], qubits) -> List[Branch]:
        frontier = [("", state)]
        for word in words:
            frontier = [
                (bits + str(bit), br)
                for bits, st in frontier
                for bit, br in observable_branches(st, word, list(qubits))
            ]
        return [Branch(bits, br.norm2(), br) for bits, br in frontier if br.norm2() > 1e-15]

    def alice_branches(self, q: Question, state: QuantumState) -> List[Branch]:
        if isinstance(q, Com):
            a, b = self._ab(q)
            # sequential when a.b = 1; that pair is auto-accepted or never asked
            return self._observables(state, [sigma_z(a), sigma_x(b)], self.alice_last)
        if isinstance(q, MsAlice):
            a, b = self._ab(q)
            if not dot(a, b):
                # grid is not a commuting family; such questions are auto-accepted
                return [Branch("000", state.norm2(), state)]
            g = grid_words(a, b)
            return self._observables(state, [g[c] for c in q.cells], self.alice_all)
        if isinstance(q, PureBasis):
            w = PauliString.uniform(q.basis, self.n)
            return [Branch(o.bits, o.probability, o.branch) for o in measure_bases_branches(state, list(self.alice_last), w)]
        if isinstance(q, Tele):
            return self._teleport(state)
        raise TypeError(f"Alice cannot answer {q!r}")

    def _teleport(self, state: QuantumState) -> List[Branch]:
        if self.witness is None:
            raise ValueError("teleportation needs a witness")
        frontier = [("", "", state)]
        for i in range(self.n):
            src, ah, bh = self.witness_qubits[i], self.alice_last[i], self.bob_last[i]
            frontier = [
                (ux + str(x), uz + str(z), br)
                for ux, uz, st in frontier
                for x, z, br in teleport_branches(st, src, ah, bh)
            ]
        return [Branch(ux + uz, br.norm2(), br) for ux, uz, br in frontier if br.norm2() > 1e-15]

    def bob_distribution(self, q: Question, state: QuantumState) -> Dict[str, float]:
        norm = state.norm2()
        if isinstance(q, PureBasis):
            d = basis_distribution(state, list(self.bob_last), PauliString.uniform(q.basis, self.n))
        elif isinstance(q, Mixed):
            d = basis_distribution(state, list(self.bob_last), self.mh.sampler(q.seed))
        elif isinstance(q, MsBob):
            a, b = self._ab(q)
            word = grid_words(a, b)[q.j]
            if not word.is_hermitian():
                return {"0": 1.0}
            moved = apply_word(state, word, list(self.bob_all)).amplitudes
            plus = np.vdot(state.amplitudes, moved).real
            d = {"0": (norm + plus) / 2, "1": (norm - plus) / 2}
        else:
            raise TypeError(f"Bob cannot answer {q!r}")
        return {k: v / norm for k, v in d.items() if v > 1e-15}


def honest_strategy(
    witness: Optional[QuantumState],
    mh: Optional[MeasurementHamiltonian] = None,
    S: Optional[BiasedSet] = None,
    n: Optional[int] = None,
) -> HonestStrategy:
    """Honest provers; ``witness`` may be None when no Hamiltonian test is played."""
    if n is None:
        n = witness.m if witness is not None else (mh.n if mh is not None else S.n)
    return HonestStrategy(n, witness, mh, S)


class IncompleteTableError(KeyError):
    pass


class ClassicalStrategy(TwoProverStrategy):
    """Deterministic answers per question; the quantum state is ignored."""

    def __init__(self, n: int, alice, bob):
        self.n = n
        self._alice, self._bob = alice, bob

    @staticmethod
    def _lookup(table, q, who):
        if callable(table):
            return table(q)
        try:
            return table[q]
        except KeyError:
            raise IncompleteTableError(f"{who} table has no answer for {q!r}") from None

    def alice_branches(self, q, state) -> List[Branch]:
        ans = self._lookup(self._alice, q, "Alice")
        check_answer(q, ans, self.n)
        return [Branch(ans, 1.0, None)]

    def bob_distribution(self, q, state) -> Dict[str, float]:
        ans = self._lookup(self._bob, q, "Bob")
        check_answer(q, ans, self.n)
        return {ans: 1.0}


def classical_strategy(n: int, alice: Union[Mapping, Callable], bob: Union[Mapping, Callable]) -> ClassicalStrategy:
    return ClassicalStrategy(n, alice, bob)


def zero_answers(n: int) -> Callable[[Question], str]:
    return lambda q: "0" * answer_arity(q, n)


# --- question distributions ------------------------------------------------------------
# Each item: (probability, test, alice question, bob question, private coins).

QItem = Tuple[Fraction, str, Question, Question, Dict[str, object]]


def _com_items(p: Fraction, ra: int, rb: int) -> List[QItem]:
    return [(p / 2, "com", Com(ra, rb), PureBasis(W), {}) for W in ("X", "Z")]


def _bob_cell_question(ra: int, rb: int, j: int) -> Question:
    if j == 2:
        return PureBasis("Z")
    if j == 4:
        return PureBasis("X")
    return MsBob(ra, rb, j)


def _anticom_items(p: Fraction, ra: int, rb: int) -> List[QItem]:
    out = []
    for j in range(1, 10):
        for line in lines_through(j):
            out.append((p / 18, "anticom", MsAlice(ra, rb, line), _bob_cell_question(ra, rb, j), {"j": j}))
    return out


def braiding_items(S: BiasedSet, strict: bool = False) -> List[QItem]:
    """Exact question distribution of the braiding test.

    Default flow: a fair coin picks the subtest, questions are sent regardless,
    and a choice inconsistent with ``a.b`` is accepted automatically.
    """
    size = len(S)
    pair = Fraction(1, size * size)
    items: List[QItem] = []
    for ra in range(size):
        for rb in range(size):
            ab = dot(S.member(ra), S.member(rb))
            if strict:
                items += _anticom_items(pair, ra, rb) if ab else _com_items(pair, ra, rb)
                continue
            for it in _com_items(pair / 2, ra, rb):
                items.append(it[:4] + ({**it[4], "coin": "com", "auto_accept": bool(ab)},))
            for it in _anticom_items(pair / 2, ra, rb):
                items.append(it[:4] + ({**it[4], "coin": "anticom", "auto_accept": not ab},))
    return items


def mvp_items(mh: MeasurementHamiltonian) -> List[QItem]:
    seeds = mh.seeds()
    ps = Fraction(1, 4 * len(seeds))
    items: List[QItem] = []
    for W in ("X", "Z"):
        items.append((Fraction(1, 4), "mvp", PureBasis(W), PureBasis(W), {"b": 0}))
        items += [(ps, "mvp", PureBasis(W), Mixed(s), {"b": 1}) for s in seeds]
    return items


def ham_items(mh: MeasurementHamiltonian) -> List[QItem]:
    seeds = mh.seeds()
    p = Fraction(1, len(seeds))
    return [(p, "ham", Tele(), Mixed(s), {}) for s in seeds]


def main_items(mh: MeasurementHamiltonian, S: BiasedSet, strict: bool = False) -> List[QItem]:
    third = Fraction(1, 3)
    return [
        (p * third, *rest)
        for part in (braiding_items(S, strict), mvp_items(mh), ham_items(mh))
        for p, *rest in part
    ]


# --- exact acceptance ------------------------------------------------------------------------


def joint_distribution(strategy: TwoProverStrategy, aq: Question, bq: Question, state=None,
                       alice_cache: Optional[dict] = None) -> Dict[Tuple[str, str], float]:
    """``Pr[a, b]`` for one question pair (Alice acts first)."""
    if state is None:
        state = strategy.initial_state()
    if alice_cache is not None and aq in alice_cache:
        branches = alice_cache[aq]
    else:
        branches = strategy.alice_branches(aq, state)
        if alice_cache is not None:
            alice_cache[aq] = branches
    out: Dict[Tuple[str, str], float] = {}
    for br in branches:
        for bans, p in strategy.bob_distribution(bq, br.state).items():
            out[(br.answer, bans)] = out.get((br.answer, bans), 0.0) + br.weight * p
    return out


def exact_accept(
    strategy: TwoProverStrategy,
    items: Sequence[QItem],
    S: Optional[BiasedSet] = None,
    mh: Optional[MeasurementHamiltonian] = None,
) -> float:
    """Acceptance probability summed over every question pair and answer branch."""
    state = strategy.initial_state()
    cache: dict = {}
    total = 0.0
    for p, test, aq, bq, private in items:
        if private.get("auto_accept"):
            total += float(p)
            continue
        acc = sum(
            w for (aa, ba), w in joint_distribution(strategy, aq, bq, state, cache).items()
            if game_verdict(test, aq, aa, bq, ba, private, S, mh)
        )
        total += float(p) * acc
    return total


# --- sampled runs ------------------------------------------------------------------------------


def _play(strategy, test, aq, bq, private, rng, S, mh) -> GameTranscript:
    state = strategy.initial_state()
    state = state.normalized() if state is not None else None
    aa, state = strategy.alice_respond(aq, state, rng)
    ba, _ = strategy.bob_respond(bq, state, rng)
    n = strategy.n
    check_answer(aq, aa, n)
    check_answer(bq, ba, n)
    verdict = game_verdict(test, aq, aa, bq, ba, private, S, mh)
    return GameTranscript(test, aq, aa, bq, ba, verdict, dict(private), list(rng.trace))


def draw_braiding(S: BiasedSet, rng: TracedRng, strict: bool):
    ra = rng.below(len(S), "r_a")
    rb = rng.below(len(S), "r_b")
    ab = dot(S.member(ra), S.member(rb))
    private: Dict[str, object] = {}
    if strict:
        coin = "anticom" if ab else "com"
    else:
        coin = "anticom" if rng.bit("subtest") else "com"
        private = {"coin": coin, "auto_accept": bool(ab) != (coin == "anticom")}
    if coin == "com":
        W = "Z" if rng.bit("W") else "X"
        return "com", Com(ra, rb), PureBasis(W), private
    j = rng.below(9, "j") + 1
    line = lines_through(j)[rng.bit("line")]
    private["j"] = j
    return "anticom", MsAlice(ra, rb, line), _bob_cell_question(ra, rb, j), private


def run_pauli_braiding(strategy: TwoProverStrategy, S: BiasedSet, rng: TracedRng, strict: bool = False) -> GameTranscript:
    test, aq, bq, private = draw_braiding(S, rng, strict)
    return _play(strategy, test, aq, bq, private, rng, S, None)


def draw_mvp(mh: MeasurementHamiltonian, rng: TracedRng):
    W = "Z" if rng.bit("W") else "X"
    b = rng.bit("b")
    bq = PureBasis(W) if b == 0 else Mixed(rng.bits(mh.seed_bits, "seed"))
    return "mvp", PureBasis(W), bq, {"b": b}


def run_mixed_vs_pure(strategy: TwoProverStrategy, mh: MeasurementHamiltonian, rng: TracedRng) -> GameTranscript:
    test, aq, bq, private = draw_mvp(mh, rng)
    return _play(strategy, test, aq, bq, private, rng, None, mh)


def run_hamiltonian_test(strategy: TwoProverStrategy, mh: MeasurementHamiltonian, rng: TracedRng) -> GameTranscript:
    seed = rng.bits(mh.seed_bits, "seed")
    return _play(strategy, "ham", Tele(), Mixed(seed), {}, rng, None, mh)


def run_main(strategy: TwoProverStrategy, mh: MeasurementHamiltonian, S: BiasedSet, rng: TracedRng,
             strict: bool = False) -> GameTranscript:
    if mh.n != S.n or strategy.n != mh.n:
        raise ValueError(f"dimension mismatch: strategy {strategy.n}, Hamiltonian {mh.n}, set {S.n}")
    which = rng.below(3, "test")
    if which == 0:
        test, aq, bq, private = draw_braiding(S, rng, strict)
    elif which == 1:
        test, aq, bq, private = draw_mvp(mh, rng)
    else:
        test, aq, bq, private = "ham", Tele(), Mixed(rng.bits(mh.seed_bits, "seed")), {}
    return _play(strategy, test, aq, bq, private, rng, S, mh)


# --- magic square values ----------------------------------------------------------------------
# "cell": the subtest's sampling (uniform cell j, then a uniform line through j;
# Bob answers one cell). "row_column": the textbook game (uniform row to Alice,
# uniform column to Bob, both bound by their line parity, compared at the crossing).

_TRIPLES = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]


def _ok(line, bits) -> bool:
    return sum(bits) % 2 == LINE_PARITY[line]


@lru_cache(maxsize=None)
def ms_classical_value(variant: str = "cell") -> Fraction:
    """Best deterministic success probability.

    Alice's answer on each line can be optimised separately once Bob's
    answers are fixed, so only Bob's assignments are enumerated.
    """
    best = Fraction(0)
    if variant == "cell":
        for bob in range(512):
            cell = {j: (bob >> (j - 1)) & 1 for j in range(1, 10)}
            score = sum(
                max(sum(bits[k] == cell[c] for k, c in enumerate(line)) if _ok(line, bits) else 0 for bits in _TRIPLES)
                for line in LINES
            )
            best = max(best, Fraction(score, 18))
        return best
    if variant == "row_column":
        for cols in np.ndindex(8, 8, 8):
            col_bits = [_TRIPLES[c] for c in cols]
            if not all(_ok(COLUMNS[i], col_bits[i]) for i in range(3)):
                continue
            score = 0
            for r, row in enumerate(ROWS):
                score += max(
                    sum(bits[c] == col_bits[c][r] for c in range(3)) if _ok(row, bits) else 0 for bits in _TRIPLES
                )
            best = max(best, Fraction(score, 9))
        return best
    raise ValueError(f"unknown variant {variant!r}")


def ms_quantum_value(variant: str = "cell") -> float:
    """Exact success of the grid observables on two EPR pairs (``a = b = 1``)."""
    S = BiasedSet(1, ("1",), 1.0)
    honest = honest_strategy(None, S=S, n=1)
    if variant == "cell":
        return exact_accept(honest, braiding_items(S, strict=True), S)
    if variant != "row_column":
        raise ValueError(f"unknown variant {variant!r}")
    g = grid_words("1", "1")
    state = honest.initial_state()
    total = 0.0
    for r, row in enumerate(ROWS):
        for c, col in enumerate(COLUMNS):
            # row[c] and col[r] are the same crossing cell
            for br in honest._observables(state, [g[x] for x in row], honest.alice_all):
                for bob in honest._observables(br.state, [g[x] for x in col], honest.bob_all):
                    if _ok(col, [int(x) for x in bob.answer]) and br.answer[c] == bob.answer[r]:
                        total += bob.weight / 9
    return total
