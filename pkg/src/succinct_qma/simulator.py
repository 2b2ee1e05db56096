"""Dense statevector simulation for the honest provers.

States may be subnormalised: exact computations keep every measurement branch
with its squared norm as its weight instead of sampling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .pauli import DENSE_CAP, DimensionCapError, PauliString, PauliWord
from .rng import TracedRng

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    m: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape[0] != 1 << self.m:
            raise ValueError("amplitude vector length is not 2^m")

    @classmethod
    def basis(cls, bits: str) -> "QuantumState":
        amp = np.zeros(1 << len(bits), dtype=complex)
        amp[int(bits, 2) if bits else 0] = 1.0
        return cls(amp, len(bits))

    @classmethod
    def from_vector(cls, vec) -> "QuantumState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        m = vec.shape[0].bit_length() - 1
        return cls(vec, m)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self) -> "QuantumState":
        nrm = np.sqrt(self.norm2())
        if nrm == 0:
            raise ValueError("cannot normalise a zero branch")
        return QuantumState(self.amplitudes / nrm, self.m)

    def tensor(self, other: "QuantumState") -> "QuantumState":
        return QuantumState(np.kron(self.amplitudes, other.amplitudes), self.m + other.m)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.m)

    def to_json(self, tol: float = 0.0) -> list:
        return [
            [int(i), float(a.real), float(a.imag)]
            for i, a in enumerate(self.amplitudes)
            if abs(a) > tol
        ]


@dataclass
class MeasurementOutcome:
    bits: str
    branch: QuantumState
    probability: float


def _check_cap(m: int, cap: int | None):
    limit = DENSE_CAP if cap is None else cap
    if m > limit:
        raise DimensionCapError(f"{m} qubits exceeds dense cap {limit}")


def _check_qubits(state: QuantumState, qubits: Sequence[int]):
    if len(set(qubits)) != len(qubits):
        raise ValueError("duplicate qubit indices")
    for q in qubits:
        if q < 0 or q >= state.m:
            raise ValueError(f"qubit {q} out of range")


def prepare_epr(k: int, cap: int | None = None) -> QuantumState:
    """``k`` EPR pairs, Alice's halves on qubits ``0..k-1`` and Bob's on ``k..2k-1``."""
    _check_cap(2 * k, cap)
    amp = np.zeros(1 << (2 * k), dtype=complex)
    # pair i couples qubit i and qubit k+i, so |x>_A |x>_B has index x * 2^k + x
    x = np.arange(1 << k)
    amp[(x << k) | x] = 1.0 / np.sqrt(1 << k)
    return QuantumState(amp, 2 * k)


def apply_1q(state: QuantumState, gate: np.ndarray, qubit: int) -> QuantumState:
    t = state.as_tensor()
    t = np.moveaxis(np.tensordot(gate, t, axes=([1], [qubit])), 0, qubit)
    return QuantumState(t.reshape(-1), state.m)


def apply_hadamard(state: QuantumState, qubits: Sequence[int]) -> QuantumState:
    for q in qubits:
        state = apply_1q(state, _H, q)
    return state


def apply_cnot(state: QuantumState, control: int, target: int) -> QuantumState:
    if control == target:
        raise ValueError("control equals target")
    idx = np.arange(1 << state.m)
    cbit = 1 << (state.m - 1 - control)
    tbit = 1 << (state.m - 1 - target)
    src = np.where(idx & cbit, idx ^ tbit, idx)
    return QuantumState(state.amplitudes[src], state.m)


def _global_masks(word: PauliWord, qubits: Sequence[int], m: int) -> Tuple[int, int]:
    gx = gz = 0
    for k, q in enumerate(qubits):
        bit = 1 << (word.n - 1 - k)
        pos = 1 << (m - 1 - q)
        if word.xmask & bit:
            gx |= pos
        if word.zmask & bit:
            gz |= pos
    return gx, gz


def apply_word(state: QuantumState, word: PauliWord, qubits: Sequence[int]) -> QuantumState:
    """Apply ``phase * X(x) Z(z)`` acting on the listed qubits."""
    if len(qubits) != word.n:
        raise ValueError("word length does not match qubit list")
    _check_qubits(state, qubits)
    gx, gz = _global_masks(word, qubits, state.m)
    idx = np.arange(1 << state.m)
    signs = 1 - 2 * (np.bitwise_count(idx & gz).astype(np.int64) & 1)
    out = np.empty_like(state.amplitudes)
    out[idx ^ gx] = word.phase * signs * state.amplitudes
    return QuantumState(out, state.m)


def observable_branches(
    state: QuantumState, word: PauliWord, qubits: Sequence[int]
) -> List[Tuple[int, QuantumState]]:
    """Measure a Hermitian word; bit 0 is the +1 eigenspace."""
    if not word.is_hermitian():
        raise ValueError("word is not Hermitian")
    moved = apply_word(state, word, qubits).amplitudes
    plus = (state.amplitudes + moved) / 2
    minus = (state.amplitudes - moved) / 2
    return [(0, QuantumState(plus, state.m)), (1, QuantumState(minus, state.m))]


def _rotated_rows(state: QuantumState, qubits: Sequence[int], w: PauliString):
    _check_qubits(state, qubits)
    if len(qubits) != len(w):
        raise ValueError("|qubits| must equal |w|")
    active = [q for q, ch in zip(qubits, w.letters) if ch != "I"]
    xq = [q for q, ch in zip(qubits, w.letters) if ch == "X"]
    rotated = apply_hadamard(state, xq)
    t = rotated.as_tensor()
    t = np.moveaxis(t, active, list(range(len(active)))) if active else t
    return active, xq, t.reshape(1 << len(active), -1)


def _outcome_string(w: PauliString, active_bits: str) -> str:
    out, it = [], iter(active_bits)
    for ch in w.letters:
        out.append("0" if ch == "I" else next(it))
    return "".join(out)


def basis_distribution(state: QuantumState, qubits: Sequence[int], w: PauliString) -> Dict[str, float]:
    """Born-rule weights of ``pi^w_u`` on the listed qubits (unnormalised)."""
    active, _, rows = _rotated_rows(state, qubits, w)
    probs = np.einsum("ij,ij->i", rows, rows.conj()).real
    k = len(active)
    return {
        _outcome_string(w, format(i, f"0{k}b") if k else ""): float(p)
        for i, p in enumerate(probs)
    }


def measure_bases_branches(
    state: QuantumState, qubits: Sequence[int], w: PauliString, drop_zero: bool = True
) -> List[MeasurementOutcome]:
    """Every branch ``pi^w_u |psi>`` with its weight. Identity letters report 0."""
    active, xq, rows = _rotated_rows(state, qubits, w)
    k = len(active)
    shape = (2,) * state.m
    out = []
    for i in range(rows.shape[0]):
        p = float(np.vdot(rows[i], rows[i]).real)
        if drop_zero and p < 1e-15:
            continue
        keep = np.zeros_like(rows)
        keep[i] = rows[i]
        t = keep.reshape((2,) * k + shape[k:]) if k else keep.reshape(shape)
        if k:
            t = np.moveaxis(t, list(range(k)), active)
        branch = apply_hadamard(QuantumState(t.reshape(-1), state.m), xq)
        out.append(MeasurementOutcome(_outcome_string(w, format(i, f"0{k}b") if k else ""), branch, p))
    return out


def measure_bases(
    state: QuantumState, qubits: Sequence[int], w: PauliString, rng: TracedRng
) -> MeasurementOutcome:
    """Sampled measurement; the returned branch is renormalised."""
    branches = measure_bases_branches(state, qubits, w)
    idx = rng.choice_index([b.probability for b in branches], label="measure")
    b = branches[idx]
    total = sum(x.probability for x in branches)
    return MeasurementOutcome(b.bits, b.branch.normalized(), b.probability / total)


def teleport_branches(
    state: QuantumState, source: int, alice_half: int, bob_half: int
) -> List[Tuple[int, int, QuantumState]]:
    """Bell-measure (source, alice_half). Returns ``(ux, uz, branch)`` for all four outcomes.

    ``ux`` is the Alice-half bit and ``uz`` the source bit; Bob's qubit then holds
    ``X^ux Z^uz`` applied to the source state.
    """
    if len({source, alice_half, bob_half}) != 3:
        raise ValueError("overlapping teleportation indices")
    s = apply_cnot(state, source, alice_half)
    s = apply_1q(s, _H, source)
    out = []
    for mo in measure_bases_branches(s, [source, alice_half], PauliString(("Z", "Z")), drop_zero=False):
        uz, ux = int(mo.bits[0]), int(mo.bits[1])
        out.append((ux, uz, mo.branch))
    return out


def teleport(state: QuantumState, source: int, pair: Tuple[int, int], rng: TracedRng):
    branches = teleport_branches(state, source, pair[0], pair[1])
    idx = rng.choice_index([b.norm2() for _, _, b in branches], label="teleport")
    ux, uz, b = branches[idx]
    return ux, uz, b.normalized()


# --- scripted exact acceptance -------------------------------------------------

@dataclass(frozen=True)
class MeasureStep:
    """Measure ``qubits`` in bases ``w`` and store the outcome under ``key``."""

    key: str
    qubits: Tuple[int, ...]
    w: PauliString


@dataclass(frozen=True)
class ObservableStep:
    key: str
    word: PauliWord
    qubits: Tuple[int, ...]


@dataclass(frozen=True)
class VerdictStep:
    predicate: Callable[[Mapping[str, str]], bool]


def _expand(state: QuantumState, step) -> List[Tuple[str, QuantumState]]:
    if isinstance(step, MeasureStep):
        return [(b.bits, b.branch) for b in measure_bases_branches(state, list(step.qubits), step.w)]
    if isinstance(step, ObservableStep):
        return [(str(bit), br) for bit, br in observable_branches(state, step.word, list(step.qubits))]
    raise TypeError(f"unknown step {step!r}")


def exact_accept_prob(initial: QuantumState, script: Sequence, cap: int | None = None) -> float:
    """Sum of branch weights whose record satisfies the final verdict step."""
    _check_cap(initial.m, cap)
    if not script or not isinstance(script[-1], VerdictStep):
        raise ValueError("script must end with a VerdictStep")
    frontier = [({}, initial)]
    for step in script[:-1]:
        nxt = []
        for record, st in frontier:
            for bits, br in _expand(st, step):
                if br.norm2() > 1e-15:
                    nxt.append(({**record, step.key: bits}, br))
        frontier = nxt
    verdict = script[-1].predicate
    return float(sum(st.norm2() for rec, st in frontier if verdict(rec)))


def sample_accept(initial: QuantumState, script: Sequence, rng: TracedRng) -> bool:
    record: Dict[str, str] = {}
    st = initial.normalized()
    for step in script[:-1]:
        options = _expand(st, step)
        idx = rng.choice_index([b.norm2() for _, b in options], label=getattr(step, "key", "step"))
        bits, br = options[idx]
        record[step.key] = bits
        st = br.normalized()
    return bool(script[-1].predicate(record))


def reduced_density(state: QuantumState, keep: Sequence[int]) -> np.ndarray:
    """Partial trace onto ``keep`` (in the listed order)."""
    _check_qubits(state, keep)
    rest = [q for q in range(state.m) if q not in keep]
    t = np.moveaxis(state.as_tensor(), list(keep) + rest, list(range(state.m)))
    mat = t.reshape(1 << len(keep), -1)
    return mat @ mat.conj().T
