"""Small-bias subsets of {0,1}^n from the field-powering construction.

Member ``(x, y)`` has bit ``i`` equal to ``<x^i, y>``, the GF(2) inner product of
the coefficient vectors of ``x^i`` and ``y`` in GF(2^m). For a fixed nonzero
``b`` the character sum over all pairs equals ``Pr_x[p_b(x) = 0]`` with
``deg p_b <= n - 1``, so the multiset has bias at most ``(n - 1) / 2^m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

BRUTE_FORCE_CAP = 24


# --- GF(2^m) ----------------------------------------------------------------

def _poly_mulmod(a: int, b: int, mod: int, deg: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= mod
    return out


def _poly_mod(a: int, mod: int) -> int:
    dm = mod.bit_length() - 1
    while a and a.bit_length() - 1 >= dm:
        a ^= mod << (a.bit_length() - 1 - dm)
    return a


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def is_irreducible(poly: int) -> bool:
    """Rabin-style test: no factor of degree <= m/2 divides ``poly``."""
    m = poly.bit_length() - 1
    if m < 1:
        return False
    if m == 1:
        return True
    xpow = 0b10
    for _ in range(m // 2):
        xpow = _poly_mulmod(xpow, xpow, poly, m)
        if _poly_gcd(poly, xpow ^ 0b10) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_poly(m: int) -> int:
    """Smallest irreducible polynomial of degree ``m`` (as a bit mask)."""
    for cand in range((1 << m) | 1, 1 << (m + 1), 2):
        if is_irreducible(cand):
            return cand
    raise ValueError(f"no irreducible polynomial of degree {m}")


@dataclass(frozen=True)
class GF2m:
    m: int
    modulus: int

    @classmethod
    def of_degree(cls, m: int) -> "GF2m":
        return cls(m, irreducible_poly(m))

    def mul(self, a: int, b: int) -> int:
        return _poly_mulmod(a, b, self.modulus, self.m)

    def powers(self, x: int, count: int) -> List[int]:
        out, cur = [], 1
        for _ in range(count):
            out.append(cur)
            cur = self.mul(cur, x)
        return out


# --- biased sets ---------------------------------------------------------------

@dataclass(frozen=True)
class BiasedSet:
    """Distinct n-bit members; indices are the protocol's ``r_a``/``r_b``."""

    n: int
    members: tuple
    target_bias: float
    field_degree: int = 0
    _ints: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.members:
            raise ValueError("biased set must be nonempty")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate members")
        if any(len(s) != self.n for s in self.members):
            raise ValueError("member length mismatch")
        if self._ints is None:
            object.__setattr__(self, "_ints", np.array([int(s, 2) for s in self.members], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.members)

    def member(self, index: int) -> str:
        return self.members[index]

    @property
    def index_bits(self) -> int:
        return max(1, math.ceil(math.log2(len(self.members))))

    def as_ints(self) -> np.ndarray:
        return self._ints

    def size_constant(self) -> float:
        """``c`` with ``|S| = c * (n / bias)^2``."""
        return len(self.members) / (self.n / self.target_bias) ** 2

    def export(self) -> str:
        return "\n".join(self.members) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.export())

    @classmethod
    def load(cls, path: str | Path, target_bias: float = 1.0) -> "BiasedSet":
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
        return cls(len(lines[0]), tuple(lines), target_bias)


def field_degree_for(n: int, bias: float) -> int:
    return max(1, math.ceil(math.log2(n / bias)))


def power_construction(n: int, m: int) -> List[int]:
    """Distinct members of the degree-``m`` construction, in lexicographic (x, y) order."""
    gf = GF2m.of_degree(m)
    size = 1 << m
    pw = np.array([gf.powers(x, n) for x in range(size)], dtype=np.int64)  # (x, i)
    ys = np.arange(size, dtype=np.int64)
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    seen, out = set(), []
    for x in range(size):
        bits = np.bitwise_count(pw[x][None, :] & ys[:, None]).astype(np.int64) & 1  # (y, i)
        vals = bits @ weights
        for v in vals.tolist():
            if v not in seen:
                seen.add(v)
                out.append(v)
    return out


def construct_biased(
    n: int, bias: float, exhaustive: bool = False, verify: bool = True, max_extra_degree: int = 4
) -> BiasedSet:
    """Build a set of bias at most ``bias``.

    ``bias = 1`` is the degenerate case and returns the singleton ``{0^n}``;
    ``exhaustive`` returns the whole cube. When ``n`` is small enough for a
    brute-force check the field degree is raised until the deduplicated set
    passes it.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not (0 < bias <= 1):
        raise ValueError("bias target must lie in (0, 1]")
    if exhaustive:
        if n > BRUTE_FORCE_CAP:
            raise ValueError("exhaustive set too large")
        return BiasedSet(n, tuple(format(v, f"0{n}b") for v in range(1 << n)), bias, n)
    if bias == 1:
        return BiasedSet(n, ("0" * n,), bias, 0)
    m = field_degree_for(n, bias)
    for extra in range(max_extra_degree + 1):
        vals = power_construction(n, m + extra)
        cand = BiasedSet(n, tuple(format(v, f"0{n}b") for v in vals), bias, m + extra)
        if not verify or n > BRUTE_FORCE_CAP or bias_of(cand) <= bias:
            return cand
    raise RuntimeError(f"no set with bias <= {bias} up to degree {m + max_extra_degree}")


def walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform of a length-2^n vector."""
    a = np.array(vec, dtype=np.int64)
    h = 1
    size = a.shape[0]
    while h < size:
        a = a.reshape(-1, 2, h)
        a = np.stack([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        h *= 2
    return a.reshape(size)


def character_sums(members: Iterable[int], n: int) -> np.ndarray:
    counts = np.zeros(1 << n, dtype=np.int64)
    np.add.at(counts, np.asarray(list(members), dtype=np.int64), 1)
    return walsh_hadamard(counts)


def bias_of(S: BiasedSet | Sequence[str]) -> float:
    """``max_{b != 0} |E_{a in S} (-1)^{a.b}|`` by exhaustive transform."""
    if isinstance(S, BiasedSet):
        n, ints = S.n, S.as_ints()
    else:
        n = len(S[0])
        ints = np.array([int(s, 2) for s in S], dtype=np.int64)
    if n > BRUTE_FORCE_CAP:
        raise ValueError(f"n={n} too large for exhaustive bias check")
    sums = character_sums(ints, n)
    if n == 0 or sums.shape[0] == 1:
        return 0.0
    return float(np.max(np.abs(sums[1:])) / len(ints))
