"""Hamiltonian pipeline: X/Z terms, measurement form, amplification, subsampling.

A :class:`MeasurementHamiltonian` is a seeded sampler ``seed -> w`` together with
an acceptance predicate ``(seed, u) -> bool``; it stands for
``H = I - E_seed sum_{u in Q(seed)} pi^{w(seed)}_u``.
Energies are reported as ``<H>``, i.e. one minus the acceptance probability.
"""

from __future__ import annotations

import hashlib
import hmac
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .pauli import PauliString, pauli_projector, word_to_dense, sigma_w
from .rng import TracedRng
from .simulator import QuantumState, basis_distribution

ENUM_CAP_BITS = 20
KSV_QUBIT_CAP = 4096
DENSE_QUBIT_CAP = 12


class SeedSpaceError(ValueError):
    pass


# --- X/Z Hamiltonians ------------------------------------------------------------

@dataclass(frozen=True)
class XZTerm:
    coeff: float
    qubits: Tuple[int, ...]
    bases: Tuple[str, ...]

    def __post_init__(self):
        if len(self.qubits) != len(self.bases) or not 1 <= len(self.qubits) <= 2:
            raise ValueError("terms act on one or two qubits")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("repeated qubit in term")
        if any(b not in ("X", "Z") for b in self.bases):
            raise ValueError("bases must be X or Z")
        if not math.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")

    def pauli_string(self, n: int) -> PauliString:
        letters = ["I"] * n
        for q, b in zip(self.qubits, self.bases):
            letters[q] = b
        return PauliString(tuple(letters))


@dataclass(frozen=True)
class XZHamiltonian:
    n: int
    terms: Tuple[XZTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if max(t.qubits) >= self.n or min(t.qubits) < 0:
                raise ValueError("term acts outside the register")

    def dense(self) -> np.ndarray:
        if self.n > DENSE_QUBIT_CAP:
            raise ValueError("too many qubits for a dense matrix")
        out = np.zeros((1 << self.n, 1 << self.n), dtype=complex)
        for t in self.terms:
            w = t.pauli_string(self.n)
            out += t.coeff * word_to_dense(sigma_w(w, "1" * self.n))
        return out

    def ground(self) -> Tuple[float, QuantumState]:
        vals, vecs = np.linalg.eigh(self.dense())
        return float(vals[0]), QuantumState(vecs[:, 0], self.n)

    def to_json(self) -> list:
        return [{"coeff": t.coeff, "qubits": list(t.qubits), "bases": "".join(t.bases)} for t in self.terms]

    @classmethod
    def from_json(cls, data: Sequence[Mapping], n: Optional[int] = None) -> "XZHamiltonian":
        terms = tuple(XZTerm(float(d["coeff"]), tuple(d["qubits"]), tuple(d["bases"])) for d in data)
        if n is None:
            n = 1 + max(max(t.qubits) for t in terms)
        return cls(n, terms)


def random_xz_hamiltonian(n: int, num_terms: int, rng: np.random.Generator, dyadic_bits: int = 3) -> XZHamiltonian:
    """Random 2-local instance whose |coefficients| sum to a power of two.

    Each |c_j| is a positive multiple of ``2^-dyadic_bits`` and the total is
    rounded up to a power of two by padding the last term, so term weights are
    dyadic and the measurement form is exact.
    """
    terms = []
    for _ in range(num_terms):
        k = 1 if n == 1 else int(rng.integers(1, 3))
        qubits = tuple(int(q) for q in rng.choice(n, size=k, replace=False))
        bases = tuple(str(b) for b in rng.choice(["X", "Z"], size=k))
        mag = int(rng.integers(1, 1 << dyadic_bits)) / (1 << dyadic_bits)
        sign = 1 if rng.random() < 0.5 else -1
        terms.append([sign * mag, qubits, bases])
    total = sum(abs(t[0]) for t in terms)
    target = 2.0 ** math.ceil(math.log2(total))
    last = terms[-1]
    last[0] = math.copysign(abs(last[0]) + target - total, last[0])
    return XZHamiltonian(n, tuple(XZTerm(c, q, b) for c, q, b in terms))


# --- measurement form -------------------------------------------------------------

@dataclass
class MeasurementHamiltonian:
    n: int
    seed_bits: int
    sampler: Callable[[int], PauliString]
    accept: Callable[[int, str], bool]
    alpha: float = 0.0
    beta: float = 1.0
    recipe: List[dict] = field(default_factory=list)
    metadata: Dict[str, object] = field(default_factory=dict)

    def seeds(self):
        if self.seed_bits > ENUM_CAP_BITS:
            raise SeedSpaceError(f"seed space 2^{self.seed_bits} too large to enumerate")
        return range(1 << self.seed_bits)

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "seed_bits": self.seed_bits, "alpha": self.alpha,
                           "beta": self.beta, "recipe": self.recipe}, sort_keys=True)


def _largest_remainder(weights: Sequence[float], slots: int) -> List[int]:
    total = sum(weights)
    raw = [w * slots / total for w in weights]
    base = [int(math.floor(r)) for r in raw]
    left = slots - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def _parity_on(u: str, qubits: Sequence[int]) -> int:
    return sum(u[q] == "1" for q in qubits) & 1


def mf_convert(
    h: XZHamiltonian,
    alpha_h: Optional[float] = None,
    beta_h: Optional[float] = None,
    precision_bits: int = 12,
) -> MeasurementHamiltonian:
    """Energy-test form of ``h``.

    Seed bits pick a slot; slots are shared among terms in proportion to
    ``|c_j|`` (largest remainder), which realises ``Pr[j] = |c_j| / sum|c|`` up
    to the recorded quantisation error. The outcome ``u`` on the term's support
    is accepted iff ``parity(u) xor [c_j < 0] = 1``, so the acceptance
    probability is ``1/2 - <h>/(2 sum|c|)`` and the measured Hamiltonian is
    ``H'' = I/2 + h / (2 sum|c|)``.
    """
    if not h.terms:
        raise ValueError("Hamiltonian has no terms")
    mags = [abs(t.coeff) for t in h.terms]
    total = sum(mags)
    if total == 0:
        raise ValueError("all coefficients are zero")
    min_bits = math.ceil(math.log2(len(h.terms))) if len(h.terms) > 1 else 0
    K = None
    for k in range(min_bits, max(min_bits, precision_bits) + 1):
        alloc = _largest_remainder(mags, 1 << k)
        exact = all(Fraction(a, 1 << k) == Fraction(m) / Fraction(total) for a, m in zip(alloc, mags))
        if exact:
            K = k
            break
    if K is None:
        K = max(min_bits, precision_bits)
        alloc = _largest_remainder(mags, 1 << K)
    slot_term = np.repeat(np.arange(len(h.terms)), alloc)
    strings = [t.pauli_string(h.n) for t in h.terms]
    negative = [t.coeff < 0 for t in h.terms]
    realised = [math.copysign(a / (1 << K) * total, t.coeff) for a, t in zip(alloc, h.terms)]
    scale = 1.0 / (2 * total)

    def sampler(seed: int) -> PauliString:
        return strings[slot_term[seed]]

    def accept(seed: int, u: str) -> bool:
        j = slot_term[seed]
        return bool(_parity_on(u, h.terms[j].qubits) ^ negative[j])

    alpha = 0.5 + scale * alpha_h if alpha_h is not None else 0.0
    beta = 0.5 + scale * beta_h if beta_h is not None else 1.0
    meta = {
        "offset": 0.5,
        "scale": scale,
        "slot_bits": K,
        "slots": alloc,
        "realised_coeffs": realised,
        "quantisation_error": max(abs(r - t.coeff) for r, t in zip(realised, h.terms)),
    }
    recipe = [{"step": "mf", "hamiltonian": h.to_json(), "n": h.n, "alpha_h": alpha_h,
               "beta_h": beta_h, "precision_bits": precision_bits}]
    return MeasurementHamiltonian(h.n, K, sampler, accept, alpha, beta, recipe, meta)


def ksv_threshold_accept(rejections: int, t: int, alpha: float, beta: float, literal: bool = False) -> bool:
    mid = (alpha + beta) / 2
    if literal:
        # b_i = -1 for an accepting block, +1 for a rejecting one
        signed = rejections - (t - rejections)
        return signed < t * mid
    return rejections / t < mid


def ksv_amplify(mh: MeasurementHamiltonian, t: int, literal: bool = False, cap: int = KSV_QUBIT_CAP) -> MeasurementHamiltonian:
    """``t`` independent blocks with a threshold on the number of rejecting blocks."""
    if t < 1:
        raise ValueError("t must be at least 1")
    if t * mh.n > cap:
        raise ValueError(f"t*n = {t * mh.n} exceeds cap {cap}")
    R, n = mh.seed_bits, mh.n
    chunk_mask = (1 << R) - 1

    def chunks(seed: int) -> List[int]:
        return [(seed >> (R * (t - 1 - i))) & chunk_mask for i in range(t)]

    def sampler(seed: int) -> PauliString:
        letters: Tuple[str, ...] = ()
        for c in chunks(seed):
            letters += mh.sampler(c).letters
        return PauliString(letters)

    def accept(seed: int, u: str) -> bool:
        rej = sum(not mh.accept(c, u[i * n:(i + 1) * n]) for i, c in enumerate(chunks(seed)))
        return ksv_threshold_accept(rej, t, mh.alpha, mh.beta, literal)

    meta = {"t": t, "literal": literal, "base": dict(mh.metadata)}
    recipe = mh.recipe + [{"step": "ksv", "t": t, "literal": literal}]
    return MeasurementHamiltonian(t * n, t * R, sampler, accept, mh.alpha, mh.beta, recipe, meta)


def ksv_accept_probability(p_block: float | Fraction, t: int, alpha: float, beta: float, literal: bool = False) -> float:
    """Exact acceptance of the amplified test when each block accepts independently w.p. ``p_block``."""
    p = Fraction(p_block)
    q = 1 - p
    total = Fraction(0)
    for r in range(t + 1):
        if ksv_threshold_accept(r, t, alpha, beta, literal):
            total += math.comb(t, r) * q**r * p ** (t - r)
    return float(total)


# --- PRG ----------------------------------------------------------------------------

DEFAULT_PRG_KEY = b"succinct-qma/prg/v1"


def _keyed_digest(key: bytes, data: bytes, hash_name: str) -> bytes:
    if hash_name == "blake2s":
        return hashlib.blake2s(data, key=key[:32], digest_size=32).digest()
    if hash_name == "sha256":
        return hmac.new(key, data, hashlib.sha256).digest()
    raise ValueError(f"unknown hash {hash_name!r}")


def prg_expand(seed: int, seed_len: int, out_len: int, key: bytes = DEFAULT_PRG_KEY, hash_name: str = "blake2s") -> int:
    """GGM-style expansion: root ``H_k(seed)``, children ``H_k(node || b)``.

    The leaves of the shallowest tree with enough 256-bit blocks are
    concatenated left to right and truncated to ``out_len`` bits (returned as
    an int, most significant bit first).
    """
    if out_len > 1 << 20:
        raise ValueError("out_len above 2^20")
    if seed < 0 or seed >> seed_len:
        raise ValueError("seed wider than seed_len")
    nbytes = max(1, (seed_len + 7) // 8)
    level = [_keyed_digest(key, seed_len.to_bytes(4, "big") + seed.to_bytes(nbytes, "big"), hash_name)]
    blocks = max(1, -(-out_len // 256))
    while len(level) < blocks:
        level = [_keyed_digest(key, node + bytes([b]), hash_name) for node in level for b in (0, 1)]
    stream = int.from_bytes(b"".join(level), "big")
    return stream >> (256 * len(level) - out_len) if out_len else 0


@dataclass(frozen=True)
class Prg:
    seed_len: int
    out_len: int
    kind: str = "hash"
    key: bytes = DEFAULT_PRG_KEY
    hash_name: str = "blake2s"
    constant: int = 0

    def expand(self, seed: int) -> int:
        if self.kind == "identity":
            return seed << (self.out_len - self.seed_len)
        if self.kind == "constant":
            return self.constant
        return prg_expand(seed, self.seed_len, self.out_len, self.key, self.hash_name)

    @classmethod
    def identity(cls, R: int) -> "Prg":
        return cls(R, R, "identity")

    @classmethod
    def constant_output(cls, seed_len: int, out_len: int, value: int) -> "Prg":
        return cls(seed_len, out_len, "constant", constant=value)

    def to_json(self) -> dict:
        return {"seed_len": self.seed_len, "out_len": self.out_len, "kind": self.kind,
                "key": self.key.hex(), "hash": self.hash_name, "constant": self.constant}


def prg_subsample(mh: MeasurementHamiltonian, prg: Prg) -> MeasurementHamiltonian:
    """Replace the full seed by ``prg.expand(short seed)``; the predicate is unchanged."""
    if prg.out_len < mh.seed_bits:
        raise ValueError("PRG output shorter than the seed budget")
    drop = prg.out_len - mh.seed_bits

    def full(seed: int) -> int:
        return prg.expand(seed) >> drop

    def sampler(seed: int) -> PauliString:
        return mh.sampler(full(seed))

    def accept(seed: int, u: str) -> bool:
        return mh.accept(full(seed), u)

    meta = {"prg": prg.to_json(), "base_seed_bits": mh.seed_bits, "base": dict(mh.metadata), "full_seed": full}
    recipe = mh.recipe + [{"step": "prg", **prg.to_json()}]
    return MeasurementHamiltonian(mh.n, prg.seed_len, sampler, accept, mh.alpha, mh.beta, recipe, meta)


def prg_seed_histogram(
    mh_sub: MeasurementHamiltonian, samples: Optional[int] = None, rng: Optional[TracedRng] = None
) -> Dict[int, float]:
    """Distribution of the base (full) seed induced by a subsampled Hamiltonian.

    Enumerates every short seed when ``samples`` is None, otherwise draws
    ``samples`` uniform short seeds.
    """
    full = mh_sub.metadata["full_seed"]
    counts: Dict[int, int] = {}
    if samples is None:
        seeds = mh_sub.seeds()
        n_draws = len(seeds)
    else:
        if rng is None:
            raise ValueError("sampling mode needs an rng")
        gen = rng.generator
        width = mh_sub.seed_bits
        words = (width + 62) // 63
        raw = gen.integers(0, 1 << 63, size=(samples, words), dtype=np.int64)
        seeds = [reduce(lambda acc, w: (acc << 63) | int(w), row, 0) & ((1 << width) - 1) for row in raw]
        n_draws = samples
    for s in seeds:
        f = full(s)
        counts[f] = counts.get(f, 0) + 1
    return {k: v / n_draws for k, v in counts.items()}


# --- term tables, dense matrices and energies ------------------------------------------

def term_table(mh: MeasurementHamiltonian, seed_weights: Optional[Mapping[int, float]] = None):
    """Group seeds into ``(weight, w, accepted outcomes)`` classes."""
    if seed_weights is None:
        R = mh.seed_bits
        seed_weights = {s: 1.0 / (1 << R) for s in mh.seeds()}
    if mh.n > 16:
        raise ValueError("term tables need n <= 16")
    outcomes_by_w: Dict[str, List[str]] = {}
    classes: Dict[Tuple[str, Tuple[str, ...]], float] = {}
    for seed, wt in seed_weights.items():
        w = mh.sampler(seed)
        key = str(w)
        if key not in outcomes_by_w:
            active = [i for i, ch in enumerate(w.letters) if ch != "I"]
            outs = []
            for bits in itertools.product("01", repeat=len(active)):
                u = ["0"] * mh.n
                for i, b in zip(active, bits):
                    u[i] = b
                outs.append("".join(u))
            outcomes_by_w[key] = outs
        acc = tuple(u for u in outcomes_by_w[key] if mh.accept(seed, u))
        classes[(key, acc)] = classes.get((key, acc), 0.0) + wt
    return [(wt, PauliString.parse(w), acc) for (w, acc), wt in classes.items()]


def dense_hamiltonian(mh: MeasurementHamiltonian, seed_weights: Optional[Mapping[int, float]] = None) -> np.ndarray:
    if mh.n > DENSE_QUBIT_CAP:
        raise ValueError("too many qubits for a dense matrix")
    dim = 1 << mh.n
    H = np.eye(dim, dtype=complex)
    for wt, w, acc in term_table(mh, seed_weights):
        for u in acc:
            H -= wt * pauli_projector(w, u)
    return H


def ground_energy(mh: MeasurementHamiltonian, seed_weights: Optional[Mapping[int, float]] = None) -> Tuple[float, QuantumState]:
    vals, vecs = np.linalg.eigh(dense_hamiltonian(mh, seed_weights))
    return float(vals[0]), QuantumState(vecs[:, 0], mh.n)


def _accept_weight(mh, seed, dist) -> float:
    return sum(p for u, p in dist.items() if p > 0 and mh.accept(seed, u))


def exact_energy(
    mh: MeasurementHamiltonian,
    state: QuantumState,
    trials: Optional[int] = None,
    rng: Optional[TracedRng] = None,
):
    """``<H>`` for ``state``.

    Enumeration mode (``trials`` None) returns a float. Sampling mode returns
    ``(estimate, standard_error)`` from ``trials`` seeded energy tests.
    """
    if state.m != mh.n:
        raise ValueError("state size does not match the Hamiltonian")
    norm = state.norm2()
    cache: Dict[str, Dict[str, float]] = {}

    def dist_for(w: PauliString):
        key = str(w)
        if key not in cache:
            cache[key] = basis_distribution(state, list(range(mh.n)), w)
        return cache[key]

    if trials is None:
        R = mh.seed_bits
        acc = 0.0
        for seed in mh.seeds():
            acc += _accept_weight(mh, seed, dist_for(mh.sampler(seed)))
        return 1.0 - acc / ((1 << R) * norm)
    if rng is None:
        raise ValueError("sampling mode needs an rng")
    hits = 0
    for _ in range(trials):
        seed = rng.bits(mh.seed_bits, "seed")
        d = dist_for(mh.sampler(seed))
        keys = list(d)
        u = keys[rng.choice_index([d[k] for k in keys], "outcome")]
        hits += mh.accept(seed, u)
    p = hits / trials
    return 1.0 - p, math.sqrt(max(p * (1 - p), 1e-300) / trials)


def dprime_sample(mh: MeasurementHamiltonian, seed: int) -> PauliString:
    """``w'`` with ``w'_i = w_i`` where ``a_i = 1`` and identity elsewhere.

    The top ``seed_bits`` bits of ``seed`` draw ``w``; the low ``n`` bits are ``a``.
    """
    total = mh.seed_bits + mh.n
    if seed < 0 or seed >> total:
        raise ValueError(f"seed must fit in {total} bits")
    w = mh.sampler(seed >> mh.n)
    a = format(seed & ((1 << mh.n) - 1), f"0{mh.n}b")
    return PauliString(tuple(ch if bit == "1" else "I" for ch, bit in zip(w.letters, a)))


def trivial_hamiltonian(n: int, accept_all: bool, seed_bits: int = 1) -> MeasurementHamiltonian:
    """Every ``Q(w)`` is the full outcome set (energy 0) or empty (energy 1)."""
    w = PauliString.uniform("Z", n)
    return MeasurementHamiltonian(
        n, seed_bits, lambda s: w, lambda s, u: accept_all,
        recipe=[{"step": "trivial", "n": n, "accept_all": accept_all, "seed_bits": seed_bits}],
    )


def build_from_recipe(recipe: Sequence[Mapping]) -> MeasurementHamiltonian:
    """Rebuild a Hamiltonian from its pipeline description."""
    mh: Optional[MeasurementHamiltonian] = None
    for step in recipe:
        kind = step["step"]
        if kind == "mf":
            h = XZHamiltonian.from_json(step["hamiltonian"], step.get("n"))
            mh = mf_convert(h, step.get("alpha_h"), step.get("beta_h"), step.get("precision_bits", 12))
        elif kind == "trivial":
            mh = trivial_hamiltonian(step["n"], step["accept_all"], step.get("seed_bits", 1))
        elif kind == "ksv":
            mh = ksv_amplify(mh, step["t"], step.get("literal", False))
        elif kind == "prg":
            prg = Prg(step["seed_len"], step["out_len"], step["kind"], bytes.fromhex(step["key"]),
                      step["hash"], step.get("constant", 0))
            mh = prg_subsample(mh, prg)
        else:
            raise ValueError(f"unknown recipe step {kind!r}")
    if mh is None:
        raise ValueError("empty recipe")
    return mh


def toy_instances() -> List[XZHamiltonian]:
    """Three small instances with dyadic term weights (exact measurement form)."""
    T = XZTerm
    return [
        XZHamiltonian(2, (T(1.0, (0, 1), ("Z", "Z")), T(-0.5, (0,), ("X",)), T(0.5, (1,), ("X",)))),
        XZHamiltonian(3, (T(-1.0, (0, 1), ("Z", "Z")), T(-1.0, (1, 2), ("Z", "Z")),
                          T(1.0, (0,), ("X",)), T(-1.0, (2,), ("X",)))),
        XZHamiltonian(4, (T(0.5, (0, 1), ("X", "X")), T(0.5, (1, 2), ("Z", "Z")), T(-0.5, (2, 3), ("X", "Z")),
                          T(0.5, (3,), ("Z",)), T(-0.5, (0,), ("Z",)), T(0.5, (0, 3), ("Z", "X")),
                          T(0.5, (1,), ("X",)), T(-0.5, (2,), ("X",)))),
    ]


def yes_instance(h: XZHamiltonian, margin: float = 0.05) -> MeasurementHamiltonian:
    """Measurement form whose ``alpha`` sits just above the ground energy."""
    e0, _ = h.ground()
    total = sum(abs(t.coeff) for t in h.terms)
    return mf_convert(h, alpha_h=e0 + margin * total, beta_h=e0 + 4 * margin * total)


def subsampled_ground_energy(
    mh_sub: MeasurementHamiltonian,
    samples: Optional[int] = None,
    rng: Optional[TracedRng] = None,
    delta: float = 1e-9,
) -> Tuple[float, float]:
    """Ground energy of a PRG-subsampled Hamiltonian and an error bound.

    With ``samples`` None every short seed is enumerated and the bound is 0.
    Otherwise the seed distribution is estimated from uniform draws. Writing
    ``H = I - sum_c p_c A_c`` over term classes with ``0 <= A_c <= I``, the
    empirical ``p_hat`` gives ``|E0(H) - E0(H_hat)| <= sum_c |p_c - p_hat_c|``,
    which is below ``sqrt(2 (k ln 2 + ln(1/delta)) / N)`` except with
    probability ``delta`` (Bretagnolle-Huber-Carol, ``k`` classes).
    """
    hist = prg_seed_histogram(mh_sub, samples, rng)
    base = _base_of(mh_sub)
    table = term_table(base, hist)
    if mh_sub.n > DENSE_QUBIT_CAP:
        raise ValueError("too many qubits for a dense matrix")
    H = np.eye(1 << mh_sub.n, dtype=complex)
    for wt, w, acc in table:
        for u in acc:
            H -= wt * pauli_projector(w, u)
    e0 = float(np.linalg.eigvalsh(H)[0])
    if samples is None:
        return e0, 0.0
    k = len(term_table(base))
    return e0, math.sqrt(2 * (k * math.log(2) + math.log(1 / delta)) / samples)


def _base_of(mh_sub: MeasurementHamiltonian) -> MeasurementHamiltonian:
    recipe = mh_sub.recipe
    if not recipe or recipe[-1]["step"] != "prg":
        raise ValueError("not a PRG-subsampled Hamiltonian")
    return build_from_recipe(recipe[:-1])
