"""Keyed hashing and Merkle commitments."""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from ..rng import TracedRng

LEAF, NODE, PAD = b"\x00", b"\x01", b"\x02"
HASH_FAMILIES = {"blake2b": 1, "hmac-sha256": 2}


class MalformedPath(ValueError):
    pass


@dataclass(frozen=True)
class HashSpec:
    """Keyed hash ``H_hk`` from a fixed family.

    ``digest_size`` below 32 is only for demonstrating what the harness does
    when collisions exist; production use keeps the 256-bit default.
    """

    key: bytes
    family: str = "blake2b"
    digest_size: int = 32
    _proto: object = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.family not in HASH_FAMILIES:
            raise ValueError(f"unknown hash family {self.family!r}")
        if not 1 <= self.digest_size <= 32:
            raise ValueError("digest size must be in 1..32 bytes")
        if self.family == "blake2b":
            proto = hashlib.blake2b(key=self.key, digest_size=self.digest_size)
        else:
            proto = hmac.new(self.key, digestmod=hashlib.sha256)
        object.__setattr__(self, "_proto", proto)

    @classmethod
    def sample(cls, rng: Optional[TracedRng] = None, family: str = "blake2b") -> "HashSpec":
        key = secrets.token_bytes(32) if rng is None else rng.bits(256, "hk").to_bytes(32, "big")
        return cls(key, family)

    def digest(self, data: bytes) -> bytes:
        h = self._proto.copy()
        h.update(data)
        return h.digest()[: self.digest_size]

    @property
    def pad(self) -> bytes:
        return self.digest(PAD)

    def to_bytes(self) -> bytes:
        return bytes([HASH_FAMILIES[self.family], self.digest_size]) + self.key


def depth_for(n_leaves: int) -> int:
    return max(0, (n_leaves - 1).bit_length())


@dataclass
class MerkleCommitment:
    leaves: List[bytes]
    levels: List[List[bytes]] = field(repr=False)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def open(self, index: int) -> List[bytes]:
        """Sibling digests from the leaf level upward."""
        if not 0 <= index < len(self.leaves):
            raise IndexError(index)
        path = []
        for level in self.levels[:-1]:
            path.append(level[index ^ 1])
            index >>= 1
        return path


def _build(leaves: Tuple[bytes, ...], hs: HashSpec) -> MerkleCommitment:
    if not leaves:
        raise ValueError("at least one leaf is required")
    h = hs.digest
    level = [h(LEAF + x) for x in leaves]
    level += [hs.pad] * ((1 << depth_for(len(leaves))) - len(leaves))
    levels = [level]
    while len(level) > 1:
        level = [h(NODE + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
        levels.append(level)
    return MerkleCommitment(list(leaves), levels)


_cached_build = lru_cache(maxsize=512)(_build)


def merkle_commit(leaves: Sequence[bytes], hs: HashSpec, cache: bool = True) -> MerkleCommitment:
    """Commit to ``leaves``; padding slots hold the keyed pad marker digest.

    Trees are memoised per (key, leaves) since protocol runs often recommit
    identical messages under a fixed key.
    """
    leaves = tuple(bytes(x) for x in leaves)
    return _cached_build(leaves, hs) if cache else _build(leaves, hs)


def byte_leaves(data: bytes) -> List[bytes]:
    """One leaf per byte symbol; the empty string commits to a single empty leaf."""
    return [data[i:i + 1] for i in range(len(data))] or [b""]


def merkle_root(data: bytes, hs: HashSpec) -> bytes:
    return merkle_commit(byte_leaves(data), hs).root


def merkle_verify(root: bytes, index: int, leaf: bytes, path: Sequence[bytes], hs: HashSpec,
                  n_leaves: Optional[int] = None) -> bool:
    if any(not isinstance(p, (bytes, bytearray)) or len(p) != hs.digest_size for p in path):
        raise MalformedPath("path entries must be digests")
    if n_leaves is not None and len(path) != depth_for(n_leaves):
        raise MalformedPath(f"path length {len(path)} does not match depth {depth_for(n_leaves)}")
    if not 0 <= index < (1 << len(path)) or (n_leaves is not None and index >= n_leaves):
        raise MalformedPath(f"index {index} outside the tree")
    node = hs.digest(LEAF + bytes(leaf))
    for sib in path:
        node = hs.digest(NODE + node + sib) if index & 1 == 0 else hs.digest(NODE + sib + node)
        index >>= 1
    return hmac.compare_digest(node, root)
