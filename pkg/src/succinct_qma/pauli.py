"""Heisenberg-Weyl group algebra and Pauli-basis projective measurements.

Conventions
-----------
Qubit 0 is the leftmost tensor factor and the most significant bit of an
amplitude index. Bit strings are Python ``str`` over ``'01'`` with character
``i`` describing qubit ``i``. Masks stored on :class:`PauliWord` are ints
using the same order, so qubit ``i`` sits at bit position ``n - 1 - i``.

Words carry only real signs: ``phase * X(xmask) Z(zmask)`` with
``phase in {+1, -1}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

DENSE_CAP = 12
LETTERS = ("I", "X", "Z")

DenseOperator = np.ndarray


class DimensionCapError(ValueError):
    """Raised when a dense realisation would exceed the configured qubit cap."""


def _check_cap(n: int, cap: int | None) -> None:
    limit = DENSE_CAP if cap is None else cap
    if n > limit:
        raise DimensionCapError(f"{n} qubits exceeds dense cap {limit}")


def bits_to_int(bits: str) -> int:
    if bits == "":
        return 0
    if any(ch not in "01" for ch in bits):
        raise ValueError(f"not a bit string: {bits!r}")
    return int(bits, 2)


def int_to_bits(value: int, n: int) -> str:
    if value < 0 or value >> n:
        raise ValueError(f"{value} does not fit in {n} bits")
    return format(value, f"0{n}b") if n else ""


def dot(a: str | int, b: str | int) -> int:
    """Inner product mod 2 of two bit strings (or masks)."""
    x = bits_to_int(a) if isinstance(a, str) else a
    y = bits_to_int(b) if isinstance(b, str) else b
    return bin(x & y).count("1") & 1


def xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return "".join("1" if x != y else "0" for x, y in zip(a, b))


@dataclass(frozen=True)
class PauliString:
    """A string ``w`` in ``{I, X, Z}^n``."""

    letters: Tuple[str, ...]

    def __post_init__(self):
        letters = tuple(self.letters)
        if len(letters) < 1:
            raise ValueError("PauliString needs at least one qubit")
        for ch in letters:
            if ch not in LETTERS:
                raise ValueError(f"bad Pauli letter {ch!r}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        return cls(tuple(text))

    @classmethod
    def uniform(cls, letter: str, n: int) -> "PauliString":
        return cls((letter,) * n)

    @property
    def n(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(self.letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __getitem__(self, i: int) -> str:
        return self.letters[i]

    def support_mask(self, letter: str | None = None) -> int:
        """Mask of qubits carrying ``letter`` (any non-identity letter if None)."""
        m = 0
        for ch in self.letters:
            m <<= 1
            if (letter is None and ch != "I") or ch == letter:
                m |= 1
        return m


@dataclass(frozen=True)
class PauliWord:
    """Signed element ``phase * X(xmask) Z(zmask)`` of the group W_n."""

    n: int
    phase: int
    xmask: int
    zmask: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.phase not in (1, -1):
            raise ValueError("phase restricted to +1/-1")
        full = (1 << self.n) - 1
        if self.xmask & ~full or self.zmask & ~full or self.xmask < 0 or self.zmask < 0:
            raise ValueError("mask wider than n")

    @classmethod
    def identity(cls, n: int) -> "PauliWord":
        return cls(n, 1, 0, 0)

    @classmethod
    def from_bits(cls, phase: int, xbits: str, zbits: str) -> "PauliWord":
        if len(xbits) != len(zbits):
            raise ValueError("length mismatch")
        return cls(len(xbits), phase, bits_to_int(xbits), bits_to_int(zbits))

    def __mul__(self, other: "PauliWord") -> "PauliWord":
        return word_mul(self, other)

    def __neg__(self) -> "PauliWord":
        return PauliWord(self.n, -self.phase, self.xmask, self.zmask)

    def square_sign(self) -> int:
        """Sign s with ``word * word = s * identity``."""
        return -1 if dot(self.xmask, self.zmask) else 1

    def is_hermitian(self) -> bool:
        # (X^x Z^z)^dagger = Z^z X^x = (-1)^{x.z} X^x Z^z
        return self.square_sign() == 1

    def tensor(self, other: "PauliWord") -> "PauliWord":
        """Word on ``self.n + other.n`` qubits with ``self`` on the left factor."""
        return PauliWord(
            self.n + other.n,
            self.phase * other.phase,
            (self.xmask << other.n) | other.xmask,
            (self.zmask << other.n) | other.zmask,
        )

    def to_json(self) -> dict:
        return {"n": self.n, "sign": self.phase, "x": hex(self.xmask), "z": hex(self.zmask)}

    @classmethod
    def from_json(cls, data: Mapping) -> "PauliWord":
        return cls(int(data["n"]), int(data["sign"]), int(data["x"], 16), int(data["z"], 16))


def sigma_w(w: PauliString, a: str) -> PauliWord:
    """The word ``sigma_w(a) = prod_i sigma_{w_i}^{a_i}`` with phase +1."""
    if len(w) != len(a):
        raise ValueError(f"length mismatch: |w|={len(w)}, |a|={len(a)}")
    am = bits_to_int(a)
    return PauliWord(w.n, 1, am & w.support_mask("X"), am & w.support_mask("Z"))


def sigma_x(a: str) -> PauliWord:
    return PauliWord(len(a), 1, bits_to_int(a), 0)


def sigma_z(b: str) -> PauliWord:
    return PauliWord(len(b), 1, 0, bits_to_int(b))


def word_mul(p: PauliWord, q: PauliWord) -> PauliWord:
    """Normal-form product; moving Z(p.z) past X(q.x) costs (-1)^{p.z . q.x}."""
    if p.n != q.n:
        raise ValueError(f"length mismatch: {p.n} vs {q.n}")
    sign = p.phase * q.phase * (-1 if dot(p.zmask, q.xmask) else 1)
    return PauliWord(p.n, sign, p.xmask ^ q.xmask, p.zmask ^ q.zmask)


def all_words(n: int) -> list[PauliWord]:
    """Every element of W_n, ordered by (phase, xmask, zmask)."""
    return [
        PauliWord(n, s, x, z)
        for s in (1, -1)
        for x in range(1 << n)
        for z in range(1 << n)
    ]


def word_to_dense(p: PauliWord, cap: int | None = None) -> DenseOperator:
    """Dense matrix ``phase * X(xmask) @ Z(zmask)``."""
    _check_cap(p.n, cap)
    dim = 1 << p.n
    cols = np.arange(dim)
    rows = cols ^ p.xmask
    parity = np.zeros(dim, dtype=np.int64)
    zm = cols & p.zmask
    while np.any(zm):
        parity ^= zm & 1
        zm >>= 1
    out = np.zeros((dim, dim), dtype=complex)
    out[rows, cols] = p.phase * (1 - 2 * parity)
    return out


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def pauli_projector(w: PauliString, u: str, cap: int | None = None) -> DenseOperator:
    """``pi^w_u = prod_i (I + (-1)^{u_i} sigma_{w_i}) / 2`` as a dense matrix.

    For an identity letter the factor is ``I`` when ``u_i = 0`` and zero otherwise.
    """
    if len(w) != len(u):
        raise ValueError("length mismatch")
    _check_cap(w.n, cap)
    factors = []
    for letter, bit in zip(w.letters, u):
        sign = 1 if bit == "0" else -1
        factors.append((_SINGLE["I"] + sign * _SINGLE[letter]) / 2)
    return _kron_all(factors)


def projector_family(w: PauliString, cap: int | None = None) -> Dict[str, DenseOperator]:
    """All ``pi^w_u`` indexed by ``u``, including the zero projectors."""
    return {
        "".join(bits): pauli_projector(w, "".join(bits), cap)
        for bits in itertools.product("01", repeat=w.n)
    }


def reduce_measurement(
    projectors: Mapping[str, DenseOperator], S: Sequence[int]
) -> Dict[str, DenseOperator]:
    """Marginalise a projective family onto the qubit subset ``S``.

    The output at ``v`` is the sum of inputs at every ``u`` with ``u|_S = v``.
    Indices in ``S`` are 0-based and the output string follows their order.
    """
    if len(S) == 0:
        raise ValueError("empty index subset")
    items = list(projectors.items())
    if not items:
        raise ValueError("empty family")
    n = len(items[0][0])
    if any(i < 0 or i >= n for i in S) or len(set(S)) != len(S):
        raise ValueError("bad index subset")
    total = sum(op for _, op in items)
    if not np.allclose(total, np.eye(total.shape[0]), atol=1e-9):
        raise ValueError("input family does not sum to identity")
    out: Dict[str, DenseOperator] = {}
    for u, op in items:
        v = "".join(u[i] for i in S)
        out[v] = out[v] + op if v in out else op.copy()
    for bits in itertools.product("01", repeat=len(S)):
        out.setdefault("".join(bits), np.zeros_like(total))
    return dict(sorted(out.items()))


def is_hermitian(op: DenseOperator, tol: float = 1e-10) -> bool:
    return bool(np.allclose(op, op.conj().T, atol=tol))


def is_unitary(op: DenseOperator, tol: float = 1e-10) -> bool:
    return bool(np.allclose(op @ op.conj().T, np.eye(op.shape[0]), atol=tol))
