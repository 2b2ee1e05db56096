"""Rate-1/2 Reed-Solomon code over GF(2^8) with byte symbols.

The payload ``len(w) (4 bytes) || w`` is zero-padded to whole blocks of 127
bytes; every block becomes a 254-symbol codeword. Each block tolerates 127
erasures or 63 errors, so the code's declared minimum distance is 128 symbols
(relative distance 128/254 within a block).
"""

from __future__ import annotations

import struct
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from reedsolo import ReedSolomonError, RSCodec

K, N = 127, 254
NSYM = N - K
DISTANCE = NSYM + 1


class DecodingError(ValueError):
    pass


@lru_cache(maxsize=1)
def _codec() -> RSCodec:
    return RSCodec(NSYM, nsize=N)


def n_blocks(w_len: int) -> int:
    return -(-(4 + w_len) // K)


def encoded_len(w_len: int) -> int:
    return N * n_blocks(w_len)


@lru_cache(maxsize=1)
def _tables():
    """exp/log tables of GF(2^8) modulo 0x11d, the field reedsolo uses by default."""
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    v = 1
    for i in range(255):
        exp[i], log[v] = v, i
        v <<= 1
        if v & 0x100:
            v ^= 0x11D
    exp[255:510] = exp[:255]
    return exp, log


@lru_cache(maxsize=1)
def _parity_logs() -> np.ndarray:
    """log of the parity contributed by each unit message symbol (systematic code is GF(2^8)-linear)."""
    _, log = _tables()
    codec = _codec()
    rows = []
    for i in range(K):
        unit = bytearray(K)
        unit[i] = 1
        rows.append(np.frombuffer(bytes(codec.encode(unit))[K:], dtype=np.uint8))
    par = np.array(rows, dtype=np.int64)
    if (par == 0).any():
        raise RuntimeError("unexpected zero in the parity matrix")
    return log[par]


def _encode_blocks(payload: bytes) -> bytes:
    exp, log = _tables()
    plog = _parity_logs()
    msg = np.frombuffer(payload, dtype=np.uint8).reshape(-1, K).astype(np.int64)
    out = bytearray()
    for block in msg:
        nz = block != 0
        terms = exp[log[block[nz]][:, None] + plog[nz]]
        parity = np.bitwise_xor.reduce(terms, axis=0) if nz.any() else np.zeros(NSYM, dtype=np.int64)
        out += bytes(block.astype(np.uint8)) + bytes(parity.astype(np.uint8))
    return bytes(out)


def _payload(w: bytes) -> bytes:
    payload = struct.pack(">I", len(w)) + w
    return payload + bytes(K * n_blocks(len(w)) - len(payload))


@lru_cache(maxsize=2048)
def rs_encode(w: bytes) -> bytes:
    """Systematic encoding via a precomputed parity matrix (checked against reedsolo in tests)."""
    return _encode_blocks(_payload(w))


def rs_encode_reference(w: bytes) -> bytes:
    return bytes(_codec().encode(_payload(w)))


def rs_decode(symbols: Sequence[Optional[int]], errors_ok: bool = True) -> bytes:
    """Decode a full-length word; ``None`` marks an erasure.

    Raises DecodingError when a block has too many erasures/errors or the
    length header is inconsistent.
    """
    if len(symbols) % N:
        raise DecodingError("word length is not a whole number of blocks")
    out = bytearray()
    codec = _codec()
    for b in range(len(symbols) // N):
        block = symbols[b * N:(b + 1) * N]
        erase = [i for i, s in enumerate(block) if s is None]
        if len(erase) > NSYM:
            raise DecodingError(f"block {b}: {len(erase)} erasures exceed {NSYM}")
        word = bytearray(0 if s is None else s for s in block)
        try:
            msg, _, errata = codec.decode(word, erase_pos=erase or None)
        except ReedSolomonError as exc:
            raise DecodingError(f"block {b}: {exc}") from None
        if not errors_ok and len(errata) > len(erase):
            raise DecodingError(f"block {b}: unexpected symbol errors")
        out += msg
    if len(out) < 4:
        raise DecodingError("missing length header")
    (k,) = struct.unpack(">I", out[:4])
    if 4 + k > len(out) or any(out[4 + k:]) or n_blocks(k) * K != len(out):
        raise DecodingError("inconsistent length header")
    return bytes(out[4:4 + k])
