"""Byte accounting: exact per-message formulas and an asymptotic parameter model.

The formulas mirror the wire encoders message by message, so they can be
checked for equality against measured transcripts at desk scale and then
evaluated at parameters far beyond what can be simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from ..compiler import TransparentQhe
from .code import encoded_len
from .merkle import depth_for
from .saok import FRAME, Message, byte_counts

SCHEME_NAME_LEN = len(TransparentQhe.name)
KEY_ID_LEN = 8


def uvarint_len(v: int) -> int:
    return max(1, -(-max(v, 0).bit_length() // 7))


def bits_len(nbits: int) -> int:
    """Answer encoding: varint length then packed bits."""
    return uvarint_len(nbits) + (nbits + 7) // 8


def ciphertext_len(body_len: int, secparam: int) -> int:
    return 4 + (4 + SCHEME_NAME_LEN) + (4 + KEY_ID_LEN) + (4 + body_len) + (4 + max(1, secparam // 8))


def secret_key_len(secparam: int) -> int:
    return uvarint_len(secparam) + max(1, secparam // 8)


def hashspec_len() -> int:
    return 2 + 32


def saok_sizes(w_len: int, k: int, digest: int = 32) -> Dict[str, int]:
    """Framed sizes of the three argument messages plus the harness proof."""
    L = encoded_len(w_len) + w_len
    depth = depth_for(L)
    return {
        "commit": FRAME + 2 * digest + uvarint_len(L) + uvarint_len(w_len),
        "challenge": FRAME + (k * depth + 7) // 8,
        "open": FRAME + k * (1 + depth * digest),
        "proof": FRAME + w_len,
        "m_len": L,
        "depth": depth,
    }


def protocol_sizes(x_len: int, y_len: int, a_bits: int, b_bits: int, secparam: int, k: int,
                   digest: int = 32) -> Dict[str, int]:
    """Framed size of every message of one three-phase run, keyed by wire label."""
    alpha = ciphertext_len(bits_len(a_bits), secparam)
    wb = bits_len(b_bits)
    w3 = 8 + alpha + wb
    out = {
        "hk": FRAME + hashspec_len(),
        "c1": FRAME + ciphertext_len(x_len, secparam),
        "com1": FRAME + digest,
        "q2": FRAME + y_len,
        "com2": FRAME + digest,
        "sk": FRAME + secret_key_len(secparam),
    }
    for name, wl in (("R1", alpha), ("R2", wb), ("R3", w3)):
        s = saok_sizes(wl, k, digest)
        for part in ("commit", "challenge", "open", "proof"):
            out[f"{name}/{part}"] = s[part]
    return out


DIRECTION = {"hk": "V->P", "c1": "V->P", "q2": "V->P", "sk": "V->P", "com1": "P->V", "com2": "P->V",
             "commit": "P->V", "open": "P->V", "challenge": "V->P", "proof": "harness"}


def totals(sizes: Dict[str, int]) -> Dict[str, int]:
    out = {"V->P": 0, "P->V": 0, "harness": 0}
    for label, v in sizes.items():
        out[DIRECTION[label.split("/")[-1]]] += v
    out["total"] = out["V->P"] + out["P->V"]
    return out


def measured_sizes(messages: Sequence[Message]) -> Dict[str, int]:
    return {m.label: m.nbytes for m in messages}


# --- asymptotic parameter model -------------------------------------------------------------


@dataclass(frozen=True)
class ScalingModel:
    """Parameters of the amplified, subsampled instance as functions of ``n``.

    - promise gap ``1/n``; amplification to error ``2^-eps_bits`` by a
      Hoeffding bound gives ``t(n) = ceil(2 ln(2^eps_bits) n^2)`` blocks;
    - the amplified witness has ``N = t(n) n`` qubits;
    - one block samples a term of ``n^terms_exp`` with ``slot_bits`` of
      weight resolution, ``R0 = ceil(terms_exp log2 n) + slot_bits`` bits,
      and the amplified verifier needs ``R = t R0`` bits;
    - the PRG seed has ``l = ceil(log2 R)^2`` bits, a polylog choice;
    - the small-bias set has ``|S| = (2^ceil(log2(N / bias)))^2`` members.
    """

    secparam: int = 128
    k: int = 32
    eps_bits: int = 40
    terms_exp: int = 2
    slot_bits: int = 8
    bias: float = 0.25
    digest: int = 32

    def blocks(self, n: int) -> int:
        return math.ceil(2 * self.eps_bits * math.log(2) * n * n)

    def qubits(self, n: int) -> int:
        return self.blocks(n) * n

    def random_bits(self, n: int) -> int:
        return self.blocks(n) * (math.ceil(self.terms_exp * math.log2(n)) + self.slot_bits)

    def seed_bits(self, n: int) -> int:
        return math.ceil(math.log2(self.random_bits(n))) ** 2

    def set_size(self, n: int) -> int:
        return (1 << math.ceil(math.log2(self.qubits(n) / self.bias))) ** 2

    def question_len(self, n: int) -> int:
        """Longest encoded question: tag byte plus varints (seed or two set indices plus cells)."""
        r = uvarint_len(self.set_size(n) - 1)
        return max(1 + 2 * r + 3, 1 + uvarint_len((1 << self.seed_bits(n)) - 1), 2)

    def succinct_sizes(self, n: int) -> Dict[str, int]:
        N = self.qubits(n)
        q = self.question_len(n)
        return protocol_sizes(q, q, 2 * N, N, self.secparam, self.k, self.digest)

    def succinct_totals(self, n: int) -> Dict[str, int]:
        return totals(self.succinct_sizes(n))

    def naive_totals(self, n: int) -> Dict[str, int]:
        """Send-everything: full Pauli strings (2 bits per qubit) as questions and full answers, no commitments."""
        N = self.qubits(n)
        q = 1 + (2 * N + 7) // 8
        v2p = FRAME + ciphertext_len(q, self.secparam) + FRAME + q + FRAME + secret_key_len(self.secparam)
        p2v = FRAME + ciphertext_len(bits_len(2 * N), self.secparam) + FRAME + bits_len(N)
        return {"V->P": v2p, "P->V": p2v, "harness": 0, "total": v2p + p2v}


def fit_log_squared(ns: Iterable[int], ys: Iterable[float]) -> Tuple[float, float, float]:
    """Least-squares ``y = a log2(n)^2 + b``; returns ``(a, b, R^2)``."""
    x = np.log2(np.asarray(list(ns), dtype=float)) ** 2
    y = np.asarray(list(ys), dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def accounting_report(ns: Sequence[int] = tuple(range(16, 1025)), model: ScalingModel = ScalingModel()) -> dict:
    v2p = [model.succinct_totals(n)["V->P"] for n in ns]
    a, b, r2 = fit_log_squared(ns, v2p)
    top = max(ns)
    s, nv = model.succinct_totals(top), model.naive_totals(top)
    return {
        "fit": {"a": a, "b": b, "r2": r2},
        "v2p": dict(zip(map(int, ns), v2p)),
        "n_max": top,
        "succinct_total": s["total"],
        "naive_total": nv["total"],
        "ratio": s["total"] / nv["total"],
    }
