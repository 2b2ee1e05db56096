"""Numerical checks for state-dependent norms and approximate representations.

Everything here works with dense matrices: families of binary observables
indexed by bit strings, functions on the Heisenberg-Weyl group ``W_n``
(enumerated only for ``n <= 2``), and post-measurement branch states.
Checks return :class:`CheckResult` records that unpack as ``(lhs, rhs, holds)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .pauli import (
    PauliString,
    PauliWord,
    all_words,
    bits_to_int,
    dot,
    int_to_bits,
    pauli_projector,
    sigma_w,
    sigma_x,
    sigma_z,
    word_mul,
    word_to_dense,
)
from .smallbias import BiasedSet, bias_of

PSD_TOL = 1e-10
CHOI_TOL = 1e-9
CLIP_TOL = 1e-12
MAX_GROUP_N = 2
FLAG_CONSTANT = 100.0


class NormlabError(ValueError):
    pass


class NotPSD(NormlabError):
    pass


class DimensionMismatch(NormlabError):
    pass


class ConventionViolation(NormlabError):
    def __init__(self, outcomes: Sequence[str]):
        self.outcomes = list(outcomes)
        super().__init__(f"nonzero projectors on identity-forbidden outcomes: {self.outcomes[:8]}")


class NotComplete(NormlabError):
    pass


class NonInvariantState(NormlabError):
    pass


class BranchMismatch(NormlabError):
    pass


class ChoiDiagnostic(NormlabError):
    """The Choi operator is not PSD, or its channel is not unital.

    The operator is a Gram matrix, so negativity only comes from numerical
    garbage; a non-unitary table shows up as ``phi(1) != 1``.
    """

    def __init__(self, min_eigenvalue: float, unital_error: float, unitarity_defect: float):
        self.min_eigenvalue = min_eigenvalue
        self.unital_error = unital_error
        self.unitarity_defect = unitarity_defect
        super().__init__(
            f"Choi diagnostic: min eigenvalue {min_eigenvalue:.3e}, |phi(1) - 1| = {unital_error:.3e}, "
            f"max |f(g)^dag f(g) - 1| = {unitarity_defect:.3e}"
        )


# ---------------------------------------------------------------- results


@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    holds: bool
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))

    def __bool__(self) -> bool:
        return bool(self.holds)

    def to_record(self) -> dict:
        return {
            "check": self.name,
            "parameters": _jsonable(self.params),
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "verdict": "pass" if self.holds else "fail",
            "extra": _jsonable(self.extra),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer, int, bool, np.bool_)):
        return obj.item() if hasattr(obj, "item") else obj
    return obj if isinstance(obj, str) or obj is None else str(obj)


def report_json(results: Sequence[CheckResult]) -> str:
    return json.dumps([r.to_record() for r in results], indent=2)


# ---------------------------------------------------------------- norms


def check_state(psi: np.ndarray, dim: Optional[int] = None, tol: float = PSD_TOL) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise DimensionMismatch(f"state must be square, got {psi.shape}")
    if dim is not None and psi.shape[0] != dim:
        raise DimensionMismatch(f"state has dimension {psi.shape[0]}, operators {dim}")
    if np.max(np.abs(psi - psi.conj().T)) > tol:
        raise NotPSD("state is not Hermitian")
    lo = float(np.linalg.eigvalsh(psi).min())
    if lo < -tol:
        raise NotPSD(f"state has eigenvalue {lo:.3e}")
    return psi


def state_inner(A: np.ndarray, B: np.ndarray, psi: np.ndarray) -> complex:
    """``Tr[A^dag B psi]``."""
    return complex(np.sum(A.conj() * (B @ psi)))


def _norm_sq(A: np.ndarray, psi: np.ndarray) -> float:
    return max(float(np.sum(A.conj() * (A @ psi)).real), 0.0)


def state_norm_sq(A: np.ndarray, psi: np.ndarray) -> float:
    A = np.asarray(A, dtype=complex)
    psi = check_state(psi, A.shape[0])
    if A.shape[1] != psi.shape[0]:
        raise DimensionMismatch(f"operator {A.shape} vs state {psi.shape}")
    return _norm_sq(A, psi)


def state_norm(A: np.ndarray, psi: np.ndarray) -> float:
    return math.sqrt(state_norm_sq(A, psi))


def trace_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def op_norm(M: np.ndarray) -> float:
    return float(np.linalg.svd(M, compute_uv=False).max())


def norm_properties(
    A: np.ndarray, B: np.ndarray, psi: np.ndarray, psi2: np.ndarray, U: np.ndarray, tol: float = 1e-10
) -> Dict[str, CheckResult]:
    """The five basic properties of the state-dependent norm, one result each."""
    d = A.shape[0]
    psi, psi2 = check_state(psi, d), check_state(psi2, d)
    out = {}
    lhs, rhs = state_norm(A, B @ psi @ B.conj().T), state_norm(A @ B, psi)
    out["conjugated_state"] = CheckResult("conjugated_state", lhs, rhs, abs(lhs - rhs) <= tol)
    lhs, rhs = state_norm(A @ B, psi), op_norm(A) * state_norm(B, psi)
    out["operator_bound"] = CheckResult("operator_bound", lhs, rhs, lhs <= rhs + tol)
    lhs, rhs = state_norm(U @ A, psi), state_norm(A, psi)
    out["unitary_invariance"] = CheckResult("unitary_invariance", lhs, rhs, abs(lhs - rhs) <= tol)
    lhs, rhs = state_norm_sq(A, psi + psi2), state_norm_sq(A, psi) + state_norm_sq(A, psi2)
    out["linearity"] = CheckResult("linearity", lhs, rhs, abs(lhs - rhs) <= tol)
    lhs, rhs = state_norm_sq(A + B, psi), 2 * state_norm_sq(A, psi) + 2 * state_norm_sq(B, psi)
    out["squared_triangle"] = CheckResult("squared_triangle", lhs, rhs, lhs <= rhs + tol)
    return out


def replace_state_check(A: np.ndarray, psi: np.ndarray, psi2: np.ndarray, tol: float = 1e-10) -> CheckResult:
    lhs = abs(state_norm_sq(A, psi) - state_norm_sq(A, psi2))
    rhs = op_norm(A) ** 2 * trace_norm(psi - psi2)
    return CheckResult("replace_state", lhs, rhs, lhs <= rhs + tol)


def cauchy_schwarz_check(As: Sequence[np.ndarray], psis: Sequence[np.ndarray], tol: float = 1e-10) -> CheckResult:
    if len(As) != len(psis):
        raise DimensionMismatch("one operator per state")
    total = sum(float(np.trace(p).real) for p in psis)
    if total > 1 + tol:
        raise NormlabError(f"states carry total trace {total:.6f} > 1")
    lhs = sum(trace_norm(A @ p) for A, p in zip(As, psis))
    rhs = math.sqrt(sum(state_norm_sq(A, p) for A, p in zip(As, psis)))
    return CheckResult("cauchy_schwarz", lhs, rhs, lhs <= rhs + tol, {"terms": len(As)})


# ---------------------------------------------------------------- random instances


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    return random_unitary(d_out, rng)[:, :d_in]


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = (z + z.conj().T) / 2
    return h / op_norm(h)


def random_density(d: int, rng: np.random.Generator, trace: float = 1.0, rank: Optional[int] = None) -> np.ndarray:
    r = d if rank is None else rank
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    return trace * rho / np.trace(rho).real


def random_binary_observable(d: int, rng: np.random.Generator) -> np.ndarray:
    u = random_unitary(d, rng)
    signs = rng.choice([-1.0, 1.0], size=d)
    return (u * signs) @ u.conj().T


def unitary_near_identity(d: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """``exp(i theta H)`` for a random Hermitian ``H`` of operator norm 1."""
    vals, vecs = np.linalg.eigh(random_hermitian(d, rng))
    return (vecs * np.exp(1j * theta * vals)) @ vecs.conj().T


def random_projective_family(
    n: int, d: int, rng: np.random.Generator, w: Optional[PauliString] = None
) -> Dict[str, np.ndarray]:
    """Rank-one projectors of a random basis spread over ``{0,1}^n``.

    With ``w`` given, outcomes with a 1 on an identity letter stay empty.
    """
    outcomes = ["".join(b) for b in itertools.product("01", repeat=n)]
    allowed = outcomes if w is None else [u for u in outcomes if _respects_convention(w, u)]
    basis = random_unitary(d, rng)
    fam = {u: np.zeros((d, d), dtype=complex) for u in outcomes}
    for j in range(d):
        u = allowed[rng.integers(len(allowed))]
        v = basis[:, j : j + 1]
        fam[u] = fam[u] + v @ v.conj().T
    return fam


# ---------------------------------------------------------------- observable families


def _bitstrings(n: int) -> List[str]:
    return [int_to_bits(v, n) for v in range(1 << n)]


def _is_binary(op: np.ndarray, tol: float) -> bool:
    eye = np.eye(op.shape[0])
    return np.max(np.abs(op - op.conj().T)) <= tol and np.max(np.abs(op @ op - eye)) <= tol


@dataclass
class ObservableFamily:
    """Binary observables ``W(a)`` indexed by n-bit strings."""

    label: str
    ops: Dict[str, np.ndarray]
    exactly_linear: bool = False
    tol: float = 1e-9

    def __post_init__(self):
        if not self.ops:
            raise NormlabError("empty family")
        lengths = {len(a) for a in self.ops}
        if len(lengths) != 1:
            raise NormlabError("keys of different lengths")
        self.ops = {a: np.asarray(m, dtype=complex) for a, m in self.ops.items()}
        dims = {m.shape for m in self.ops.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"operators of different shapes: {dims}")
        for a, m in self.ops.items():
            if not _is_binary(m, self.tol):
                raise NormlabError(f"W({a}) is not a binary observable")
        if self.exactly_linear:
            self._check_linear()

    def _check_linear(self) -> None:
        n, eye = self.n, np.eye(self.dim)
        if set(self.ops) != set(_bitstrings(n)):
            raise NormlabError("an exactly linear family needs every a in {0,1}^n")
        if np.max(np.abs(self.ops["0" * n] - eye)) > self.tol:
            raise NormlabError("W(0) is not the identity")
        gens = [self.ops[int_to_bits(1 << (n - 1 - i), n)] for i in range(n)]
        for g, h in itertools.combinations(gens, 2):
            if np.max(np.abs(g @ h - h @ g)) > self.tol:
                raise NormlabError("generators do not commute")
        for a, m in self.ops.items():
            prod = eye.astype(complex)
            for i, bit in enumerate(a):
                if bit == "1":
                    prod = prod @ gens[i]
            if np.max(np.abs(prod - m)) > self.tol:
                raise NormlabError(f"W({a}) is not the product of its generators")

    @property
    def n(self) -> int:
        return len(next(iter(self.ops)))

    @property
    def dim(self) -> int:
        return next(iter(self.ops.values())).shape[0]

    def __getitem__(self, a: str) -> np.ndarray:
        return self.ops[a]

    def stack(self) -> np.ndarray:
        """``(2^n, d, d)`` array in integer order of ``a``."""
        return np.stack([self.ops[a] for a in _bitstrings(self.n)])

    @classmethod
    def pauli(cls, letter: str, n: int, label: Optional[str] = None) -> "ObservableFamily":
        w = PauliString.uniform(letter, n)
        ops = {a: word_to_dense(sigma_w(w, a)) for a in _bitstrings(n)}
        return cls(label or f"sigma_{letter}", ops, exactly_linear=True)

    @classmethod
    def from_projectors(cls, label: str, projectors: Mapping[str, np.ndarray]) -> "ObservableFamily":
        """``W(a) = sum_u (-1)^{a.u} P_u``; exactly linear for a projective measurement."""
        n = len(next(iter(projectors)))
        ops = {a: fourier_observable(projectors, a) for a in _bitstrings(n)}
        return cls(label, ops, exactly_linear=True)

    @classmethod
    def diagonal(cls, n: int, d: int, rng: np.random.Generator, label: str = "diagonal") -> "ObservableFamily":
        """``W(a) = diag((-1)^{a.c_j})`` for random labels ``c_j``."""
        labels = rng.integers(0, 1 << n, size=d)
        ops = {}
        for a in _bitstrings(n):
            av = bits_to_int(a)
            ops[a] = np.diag([(-1.0) ** dot(av, int(c)) for c in labels]).astype(complex)
        return cls(label, ops, exactly_linear=True)

    def conjugated(self, U: np.ndarray, label: Optional[str] = None) -> "ObservableFamily":
        ops = {a: U @ m @ U.conj().T for a, m in self.ops.items()}
        return ObservableFamily(label or f"{self.label}^U", ops, self.exactly_linear, self.tol)

    def embedded(self, left_dim: int, label: Optional[str] = None) -> "ObservableFamily":
        """``1_left (x) W(a)``: act on the right factor of a larger register."""
        eye = np.eye(left_dim)
        ops = {a: np.kron(eye, m) for a, m in self.ops.items()}
        return ObservableFamily(label or self.label, ops, self.exactly_linear, self.tol)


def fourier_observable(projectors: Mapping[str, np.ndarray], a: str) -> np.ndarray:
    av = bits_to_int(a)
    return sum((-1) ** dot(av, bits_to_int(u)) * P for u, P in projectors.items())


# ---------------------------------------------------------------- commutators


def _pair_table(Z: np.ndarray, X: np.ndarray, psi: np.ndarray, n: int, rows: Sequence[int]) -> np.ndarray:
    """``R[i, b] = ||Z(a_i)X(b) - (-1)^{a_i.b} X(b)Z(a_i)||^2_psi``."""
    bs = np.arange(1 << n)
    out = np.zeros((len(rows), 1 << n))
    for i, a in enumerate(rows):
        signs = np.array([(-1.0) ** dot(a, int(b)) for b in bs])
        C = Z[a] @ X - signs[:, None, None] * (X @ Z[a])
        out[i] = np.maximum(np.einsum("bij,bij->b", C.conj(), C @ psi).real, 0.0)
    return out


def _check_pair(Zfam: ObservableFamily, Xfam: ObservableFamily, psi: np.ndarray) -> np.ndarray:
    if Zfam.n != Xfam.n:
        raise DimensionMismatch("families index different n")
    if Zfam.dim != Xfam.dim:
        raise DimensionMismatch("families act on different dimensions")
    return check_state(psi, Zfam.dim)


def commutator_residual(
    Zfam: ObservableFamily,
    Xfam: ObservableFamily,
    psi: np.ndarray,
    dist: Optional[Mapping[Tuple[str, str], float]] = None,
) -> float:
    """``E_{(a,b)~dist} ||Z(a)X(b) - (-1)^{a.b} X(b)Z(a)||^2_psi`` (uniform if ``dist`` is None)."""
    psi = _check_pair(Zfam, Xfam, psi)
    n = Zfam.n
    if dist is None:
        table = _pair_table(Zfam.stack(), Xfam.stack(), psi, n, range(1 << n))
        return float(table.mean())
    total = 0.0
    for (a, b), p in dist.items():
        if p == 0:
            continue
        s = (-1) ** dot(a, b)
        C = Zfam[a] @ Xfam[b] - s * Xfam[b] @ Zfam[a]
        total += p * _norm_sq(C, psi)
    return total


def uniform_pairs(n: int) -> Dict[Tuple[str, str], float]:
    bs = _bitstrings(n)
    p = 1.0 / len(bs) ** 2
    return {(a, b): p for a in bs for b in bs}


def twirl(Wfam: ObservableFamily, rho: np.ndarray) -> np.ndarray:
    W = Wfam.stack()
    return np.mean(W @ rho @ W, axis=0)


def _members(S) -> Tuple[int, List[int]]:
    if isinstance(S, BiasedSet):
        return S.n, [int(v) for v in S.as_ints()]
    S = list(S)
    return len(S[0]), [bits_to_int(s) for s in S]


def _bias(S) -> float:
    lam = bias_of(S if isinstance(S, BiasedSet) else list(S))
    if lam >= 1:
        raise NormlabError(f"set bias {lam} >= 1 gives no lifting bound")
    return lam


def dls_check(M: np.ndarray, Wfam: ObservableFamily, rho: np.ndarray, S, delta: float = 0.0) -> CheckResult:
    """Lift ``[W(a), M] ~ 0`` from a biased set to all of ``{0,1}^n``."""
    if not Wfam.exactly_linear:
        raise NormlabError("family must be exactly linear")
    M = np.asarray(M, dtype=complex)
    if M.shape != (Wfam.dim, Wfam.dim) or not _is_binary(M, Wfam.tol):
        raise NormlabError("M must be a binary observable on the family's space")
    if delta < 0:
        raise NormlabError("delta must be nonnegative")
    rho = check_state(rho, Wfam.dim)
    n, members = _members(S)
    if n != Wfam.n:
        raise DimensionMismatch("set and family index different n")
    lam = _bias(S)
    W = Wfam.stack()
    C = W @ M - M @ W
    per_a = np.maximum(np.einsum("aij,aij->a", C.conj(), C @ rho).real, 0.0)
    lhs = float(per_a.mean())
    on_set = float(per_a[members].mean())
    rhs = on_set / (1 - lam) + 2 * delta / (1 - lam)
    extra = {"bias": lam, "set_mean": on_set, "twirl_distance": trace_norm(rho - twirl(Wfam, rho))}
    return CheckResult("dls_commutator", lhs, rhs, lhs <= rhs + 1e-9, {"n": n, "delta": delta, "set_size": len(members)}, extra)


def dls_anticommutation_check(
    Zfam: ObservableFamily, Xfam: ObservableFamily, rho: np.ndarray, S, delta: float = 0.0
) -> CheckResult:
    """Anticommutation form: the uniform residual from the biased-set residual."""
    if not (Zfam.exactly_linear and Xfam.exactly_linear):
        raise NormlabError("both families must be exactly linear")
    if delta < 0:
        raise NormlabError("delta must be nonnegative")
    rho = _check_pair(Zfam, Xfam, rho)
    n, members = _members(S)
    if n != Zfam.n:
        raise DimensionMismatch("set and families index different n")
    lam = _bias(S)
    table = _pair_table(Zfam.stack(), Xfam.stack(), rho, n, range(1 << n))
    lhs = float(table.mean())
    on_set = float(table[np.ix_(members, members)].mean())
    rhs = on_set / (1 - lam) ** 2 + 2 * delta * (2 - lam) / (1 - lam) ** 2
    twirled = max(trace_norm(rho - twirl(Zfam, rho)), trace_norm(rho - twirl(Xfam, rho)))
    extra = {"bias": lam, "set_mean": on_set, "twirl_distance": twirled}
    return CheckResult("dls_anticommutation", lhs, rhs, lhs <= rhs + 1e-9, {"n": n, "delta": delta, "set_size": len(members)}, extra)


# ---------------------------------------------------------------- the group W_n


class GroupTable:
    """Elements of ``W_n`` with multiplication and inverse tables."""

    def __init__(self, n: int):
        if not 1 <= n <= MAX_GROUP_N:
            raise NormlabError(f"group tables are enumerated only for 1 <= n <= {MAX_GROUP_N}")
        self.n = n
        self.elements: List[PauliWord] = all_words(n)
        self.index = {g: i for i, g in enumerate(self.elements)}
        size = len(self.elements)
        self.mult = np.array(
            [[self.index[word_mul(g, h)] for h in self.elements] for g in self.elements], dtype=np.int64
        )
        self.inv = np.array([self.index[g if g.square_sign() == 1 else -g] for g in self.elements], dtype=np.int64)
        self.identity = self.index[PauliWord.identity(n)]
        self.minus_one = self.index[-PauliWord.identity(n)]
        assert np.all(self.mult[np.arange(size), self.inv] == self.identity)

    def __len__(self) -> int:
        return len(self.elements)

    def regular(self, g: PauliWord) -> np.ndarray:
        """``pi(g) = sum_h |h><hg|``."""
        gi = self.index[g]
        size = len(self)
        out = np.zeros((size, size))
        out[np.arange(size), self.mult[:, gi]] = 1.0
        return out


@dataclass
class GroupFunction:
    """A map ``f: W_n -> U(H)`` given by its full table."""

    n: int
    table: Dict[PauliWord, np.ndarray]
    check: bool = True

    def __post_init__(self):
        self.group = GroupTable(self.n)
        missing = [g for g in self.group.elements if g not in self.table]
        if missing:
            raise NormlabError(f"table misses {len(missing)} group elements")
        self.table = {g: np.asarray(m, dtype=complex) for g, m in self.table.items()}
        if len({m.shape for m in self.table.values()}) != 1:
            raise DimensionMismatch("table entries of different shapes")
        if self.check and self.unitarity_defect() > 1e-9:
            raise NormlabError("table is not unitary-valued")

    @property
    def dim(self) -> int:
        return next(iter(self.table.values())).shape[0]

    def stack(self) -> np.ndarray:
        return np.stack([self.table[g] for g in self.group.elements])

    def unitarity_defect(self) -> float:
        eye = np.eye(self.dim)
        return max(float(np.max(np.abs(m.conj().T @ m - eye))) for m in self.table.values())

    @classmethod
    def fundamental(cls, n: int) -> "GroupFunction":
        return cls(n, {g: word_to_dense(g) for g in all_words(n)})

    @classmethod
    def sign(cls, n: int, s: int = 0, t: int = 0) -> "GroupFunction":
        """One-dimensional irrep ``+-X^x Z^z -> (-1)^{s.x + t.z}``."""
        return cls(n, {g: np.array([[(-1.0) ** (dot(s, g.xmask) + dot(t, g.zmask))]]) for g in all_words(n)})

    @classmethod
    def perturbed(cls, n: int, theta: float, rng: np.random.Generator) -> "GroupFunction":
        """Fundamental representation times independent ``exp(i theta H_g)``."""
        d = 1 << n
        return cls(n, {g: unitary_near_identity(d, theta, rng) @ word_to_dense(g) for g in all_words(n)})


def _mu_weights(group: GroupTable, mu: Optional[Mapping[PauliWord, float]]) -> np.ndarray:
    if mu is None:
        return np.full(len(group), 1.0 / len(group))
    w = np.zeros(len(group))
    for g, p in mu.items():
        if g not in group.index:
            raise NormlabError(f"{g} is not an element of W_{group.n}")
        w[group.index[g]] += p
    if abs(w.sum() - 1) > 1e-9 or np.any(w < 0):
        raise NormlabError("mu is not a probability distribution")
    return w


@dataclass
class RoundingResult:
    """Dilation ``V: H -> C[W_n] (x) C^r`` with ``V^dag (pi(g) (x) 1) V`` close to ``f(g)``."""

    V: np.ndarray
    group: GroupTable
    aux_dim: int
    residual: float
    hypothesis: float
    choi_min_eigenvalue: float
    representation_error: float
    tol: float = 1e-9

    def __post_init__(self):
        d = self.V.shape[1]
        if self.V.shape[0] != len(self.group) * self.aux_dim:
            raise DimensionMismatch("V does not map into C[W_n] (x) C^r")
        err = float(np.max(np.abs(self.V.conj().T @ self.V - np.eye(d))))
        if err > self.tol:
            raise NormlabError(f"V is not an isometry (error {err:.2e})")
        self.pi = {g: self.group.regular(g) for g in self.group.elements}
        hom = self.homomorphism_error()
        if hom > 1e-8:
            raise NormlabError(f"pi is not a homomorphism (error {hom:.2e})")

    @property
    def holds(self) -> bool:
        return self.residual <= self.hypothesis + 1e-8

    def _tensor(self) -> np.ndarray:
        return self.V.reshape(len(self.group), self.aux_dim, -1)

    def rounded(self, g: PauliWord) -> np.ndarray:
        """``V^dag (pi(g) (x) 1) V`` without forming the big matrix."""
        T = self._tensor()
        perm = self.group.mult[:, self.group.index[g]]
        return np.einsum("hki,hkj->ij", T.conj(), T[perm])

    def pi_full(self, g: PauliWord) -> np.ndarray:
        return np.kron(self.pi[g], np.eye(self.aux_dim))

    def homomorphism_error(self) -> float:
        worst = 0.0
        for g in self.group.elements:
            for h in self.group.elements:
                diff = self.pi[g] @ self.pi[h] - self.pi[word_mul(g, h)]
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst


def _fstar(F: np.ndarray, group: GroupTable) -> np.ndarray:
    """``f*(g) = E_h f(h)^dag f(hg)`` for every g."""
    Fd = F.conj().transpose(0, 2, 1)
    return np.stack([np.mean(Fd @ F[group.mult[:, g]], axis=0) for g in range(len(group))])


def choi_operator(f: GroupFunction) -> np.ndarray:
    """``C = sum_{g,h} f*(g^-1 h)/|G| (x) |g><h|`` on ``H (x) C[W_n]``."""
    group, d = f.group, f.dim
    size = len(group)
    fs = _fstar(f.stack(), group)
    idx = group.mult[group.inv][:, np.arange(size)]  # idx[g, h] = g^-1 h
    blocks = fs[idx] / size  # (g, h, i, j)
    return blocks.transpose(2, 0, 3, 1).reshape(d * size, d * size)


def gh_round(f: GroupFunction, psi: np.ndarray, mu: Optional[Mapping[PauliWord, float]] = None) -> RoundingResult:
    """Round an approximately multiplicative ``f`` to a dilated regular representation."""
    group, d = f.group, f.dim
    size = len(group)
    psi = check_state(psi, d)
    weights = _mu_weights(group, mu)
    C = choi_operator(f)
    vals, vecs = np.linalg.eigh((C + C.conj().T) / 2)
    lo = float(vals.min())
    # phi(1) = sum_g phi(|g><g|) = f*(e)
    unital = float(np.max(np.abs(_fstar(f.stack(), group)[group.identity] - np.eye(d))))
    if lo < -CHOI_TOL or unital > CHOI_TOL:
        raise ChoiDiagnostic(lo, unital, f.unitarity_defect())
    vals = np.where(vals < CLIP_TOL, 0.0, vals)
    keep = vals > 0
    kraus = (vecs[:, keep] * np.sqrt(vals[keep])).T.reshape(-1, d, size)  # K_k = sum_g |x_kg><g|
    r = kraus.shape[0]
    # V = sum_k K_k^dag (x) |k>, indexed (g, k) -> g * r + k
    V = kraus.conj().transpose(2, 0, 1).reshape(size * r, d)
    F = f.stack()
    T = V.reshape(size, r, d)
    fs = _fstar(F, group)
    rounded = np.stack([np.einsum("hki,hkj->ij", T.conj(), T[group.mult[:, g]]) for g in range(size)])
    rep_err = float(np.max(np.abs(rounded - fs)))
    residual = sum(weights[g] * _norm_sq(F[g] - rounded[g], psi) for g in range(size) if weights[g])
    hyp = 0.0
    for g in range(size):
        if not weights[g]:
            continue
        diffs = F @ F[g] - F[group.mult[:, g]]
        hyp += weights[g] * float(np.mean(np.maximum(np.einsum("hij,hij->h", diffs.conj(), diffs @ psi).real, 0)))
    return RoundingResult(V, group, r, float(residual), hyp, lo, rep_err)


# ---------------------------------------------------------------- irreps of W_n


def irrep_multiplicities(group: GroupTable, rep: Mapping[PauliWord, np.ndarray]) -> Dict[str, object]:
    """Multiplicities from characters: ``4^n`` one-dimensional irreps and the fundamental."""
    size, n = len(group), group.n
    chi = np.array([np.trace(rep[g]) for g in group.elements])
    one_dim = {}
    for s in range(1 << n):
        for t in range(1 << n):
            char = np.array([(-1.0) ** (dot(s, g.xmask) + dot(t, g.zmask)) for g in group.elements])
            one_dim[(s, t)] = complex(np.vdot(char, chi) / size)
    fund = np.array([np.trace(word_to_dense(g)) for g in group.elements])
    m_fund = complex(np.vdot(fund, chi) / size)
    values = list(one_dim.values()) + [m_fund]
    integral = all(abs(v.imag) < 1e-9 and abs(v.real - round(v.real)) < 1e-9 for v in values)
    dims_ok = sum(int(round(v.real)) for v in one_dim.values()) + (1 << n) * int(round(m_fund.real))
    return {
        "one_dimensional": {k: int(round(v.real)) for k, v in one_dim.items()},
        "fundamental": int(round(m_fund.real)),
        "integral": integral,
        "dimension_accounted": dims_ok == next(iter(rep.values())).shape[0],
    }


def pauli_intertwiner(group: GroupTable) -> np.ndarray:
    """Isometry ``Phi: C^d (x) C^d -> C[W_n]`` with ``pi(g) Phi = Phi (sigma(g) (x) 1)``.

    ``Phi(|v>|j>) = sqrt(d/|G|) sum_h <j|sigma(h)|v> |h>``; its range is the
    sector where ``pi(-1) = -1``.
    """
    d = 1 << group.n
    c = math.sqrt(d / len(group))
    sig = np.stack([word_to_dense(h) for h in group.elements])  # (h, j, v)
    return c * sig.transpose(0, 2, 1).reshape(len(group), d * d)


# ---------------------------------------------------------------- all-distribution rounding


def _check_invariant(fam: ObservableFamily, psi: np.ndarray, tol: float = 1e-9) -> float:
    gap = trace_norm(twirl(fam, psi) - psi)
    if gap > tol:
        raise NonInvariantState(f"state is not invariant under the {fam.label} twirl (distance {gap:.2e})")
    return gap


def braiding_function(Zfam: ObservableFamily, Xfam: ObservableFamily) -> GroupFunction:
    """``f(+-sigma_Z(a) sigma_X(b)) = +-Z(a) X(b)`` on ``W_n``."""
    n = Zfam.n
    table = {}
    for g in all_words(n):
        # s X^x Z^z = s (-1)^{x.z} Z^z X^x
        s = g.phase * (-1) ** dot(g.xmask, g.zmask)
        table[g] = s * Zfam[int_to_bits(g.zmask, n)] @ Xfam[int_to_bits(g.xmask, n)]
    return GroupFunction(n, table)


def _zx_word(a: str, b: str) -> PauliWord:
    return word_mul(sigma_z(a), sigma_x(b))


def rounding_all_dist_check(
    Zfam: ObservableFamily,
    Xfam: ObservableFamily,
    psi: np.ndarray,
    mu: Optional[Mapping[Tuple[str, str], float]] = None,
    constant: float = FLAG_CONSTANT,
) -> CheckResult:
    """Round two exactly linear families to Paulis and measure the error under ``mu``.

    ``mu`` is a distribution over pairs ``(a, b)`` (uniform when None). The
    result reports ``eps`` (the uniform commutation residual), the residual
    against ``V^dag (sigma_Z(a) sigma_X(b) (x) 1) V`` and the constant
    ``residual / eps`` actually needed.
    """
    if not (Zfam.exactly_linear and Xfam.exactly_linear):
        raise NormlabError("both families must be exactly linear")
    psi = _check_pair(Zfam, Xfam, psi)
    _check_invariant(Zfam, psi)
    _check_invariant(Xfam, psi)
    n, d = Zfam.n, Zfam.dim
    mu = uniform_pairs(n) if mu is None else dict(mu)
    if abs(sum(mu.values()) - 1) > 1e-9:
        raise NormlabError("mu is not a probability distribution")
    eps = commutator_residual(Zfam, Xfam, psi)
    f = braiding_function(Zfam, Xfam)
    mu_w: Dict[PauliWord, float] = {}
    for (a, b), p in mu.items():
        g = _zx_word(a, b)
        mu_w[g] = mu_w.get(g, 0.0) + p
    rr = gh_round(f, psi, mu_w)
    group = rr.group
    dp = 1 << n
    phi = pauli_intertwiner(group)
    T = rr.V.reshape(len(group), rr.aux_dim, d)
    Vp = np.einsum("hp,hki->pki", phi.conj(), T).reshape(dp * dp * rr.aux_dim, d)
    iso_err = float(np.max(np.abs(Vp.conj().T @ Vp - np.eye(d))))
    aux = dp * rr.aux_dim
    Vt = Vp.reshape(dp, aux, d)
    residual = 0.0
    for (a, b), p in mu.items():
        if not p:
            continue
        sig = word_to_dense(_zx_word(a, b))
        approx = np.einsum("pki,pq,qkj->ij", Vt.conj(), sig, Vt)
        residual += p * _norm_sq(Zfam[a] @ Xfam[b] - approx, psi)
    if eps > 1e-14:
        needed = residual / eps
    else:
        needed = 0.0 if residual <= 1e-12 else math.inf
    holds = residual <= constant * eps + 1e-6
    extra = {
        "epsilon": eps,
        "constant_needed": needed,
        "flagged": needed > FLAG_CONSTANT,
        "gh_residual": rr.residual,
        "isometry_error": iso_err,
        "aux_dim": aux,
    }
    return CheckResult("rounding_all_dist", float(residual), constant * eps, holds, {"n": n, "constant": constant, "support": len(mu)}, extra)


def calibrate_constant(results: Sequence[CheckResult]) -> float:
    """Largest ``residual / eps`` seen over a sweep of all-distribution checks."""
    return max((r.extra["constant_needed"] for r in results), default=0.0)


# ---------------------------------------------------------------- measurement families


def _respects_convention(w: PauliString, u: str) -> bool:
    return all(not (ch == "I" and bit == "1") for ch, bit in zip(w.letters, u))


def check_projective(Mfam: Mapping[str, np.ndarray], tol: float = 1e-9) -> int:
    if not Mfam:
        raise NotComplete("empty family")
    mats = [np.asarray(m, dtype=complex) for m in Mfam.values()]
    d = mats[0].shape[0]
    for u, m in Mfam.items():
        if m.shape != (d, d):
            raise DimensionMismatch("projectors of different shapes")
        if np.max(np.abs(m - m.conj().T)) > tol or np.max(np.abs(m @ m - m)) > tol:
            raise NormlabError(f"M_{u} is not an orthogonal projector")
    if np.max(np.abs(sum(mats) - np.eye(d))) > tol:
        raise NotComplete("projectors do not sum to the identity")
    return d


def _as_pauli_string(w) -> PauliString:
    return w if isinstance(w, PauliString) else PauliString.parse(w)


def parseval_check(
    Mfam: Mapping[str, np.ndarray], w, V: np.ndarray, psi: np.ndarray, tol: float = 1e-9
) -> CheckResult:
    """Projector-level error against its observable-level Fourier transform."""
    w = _as_pauli_string(w)
    d = check_projective(Mfam)
    n = w.n
    if set(Mfam) != set(_bitstrings(n)):
        raise NotComplete(f"family must be indexed by all of {{0,1}}^{n}")
    psi = check_state(psi, d)
    V = np.asarray(V, dtype=complex)
    dp = 1 << n
    if V.shape[1] != d or V.shape[0] % dp:
        raise DimensionMismatch(f"V of shape {V.shape} does not map C^{d} into C^{dp} (x) aux")
    if np.max(np.abs(V.conj().T @ V - np.eye(d))) > 1e-9:
        raise NormlabError("V is not an isometry")
    aux = np.eye(V.shape[0] // dp)

    def pulled(P):
        return V.conj().T @ np.kron(P, aux) @ V

    lhs = sum(_norm_sq(Mfam[u] - pulled(pauli_projector(w, u)), psi) for u in _bitstrings(n))
    rhs = float(np.mean([
        _norm_sq(fourier_observable(Mfam, a) - pulled(word_to_dense(sigma_w(w, a))), psi) for a in _bitstrings(n)
    ]))
    return CheckResult("parseval", float(lhs), rhs, abs(lhs - rhs) <= tol, {"w": str(w)})


def factorisation_check(Mfam: Mapping[str, np.ndarray], w, tol: float = 1e-10) -> CheckResult:
    """``O^w = O^w_X O^w_Z`` for a projective family respecting the identity convention."""
    w = _as_pauli_string(w)
    check_projective(Mfam)
    n = w.n
    bad = [u for u, m in Mfam.items() if not _respects_convention(w, u) and np.max(np.abs(m)) > 1e-12]
    if bad:
        raise ConventionViolation(sorted(bad))
    x_mask = int_to_bits(w.support_mask("X"), n)
    z_mask = int_to_bits(w.support_mask("Z"), n)
    full = int_to_bits(w.support_mask(), n)
    O = fourier_observable(Mfam, full)
    OX = fourier_observable(Mfam, x_mask)
    OZ = fourier_observable(Mfam, z_mask)
    err = float(np.max(np.abs(O - OX @ OZ)))
    return CheckResult("factorisation", err, tol, err <= tol, {"w": str(w)}, {"commute_error": float(np.max(np.abs(OX @ OZ - OZ @ OX)))})


# ---------------------------------------------------------------- compiled branches


def compiled_pure_branches(prover, qhe, basis: str, n: int, qubits: Sequence[int], secparam: int = 128, rng=None):
    """Round-one branches of a compiled prover on a pure-basis question.

    Returns ``(decoded answer, unnormalised density on qubits)`` per branch;
    the prover must expose its post-measurement register.
    """
    from .compiler import decode_bits, encode_question
    from .games import PureBasis
    from .simulator import reduced_density

    key = qhe.gen(secparam, rng)
    c = qhe.enc(key, encode_question(PureBasis(basis)))
    out = []
    for br in prover.round1_branches(c):
        if br.state is None:
            raise BranchMismatch("prover does not expose post-measurement states")
        bits = decode_bits(qhe.dec(key, br.alpha))
        if len(bits) != n:
            raise BranchMismatch(f"decoded answer {bits!r} is not {n} bits")
        out.append((bits, reduced_density(br.state, list(qubits))))
    return out


def _check_branches(Wfam: ObservableFamily, branches) -> None:
    seen = set()
    total = 0.0
    for bits, rho in branches:
        if len(bits) != Wfam.n:
            raise BranchMismatch(f"answer {bits!r} has wrong length")
        if bits in seen:
            raise BranchMismatch(f"answer {bits!r} appears twice")
        seen.add(bits)
        check_state(rho, Wfam.dim)
        total += float(np.trace(rho).real)
    if total > 1 + 1e-9:
        raise BranchMismatch(f"branch weights sum to {total:.6f} > 1")


def consistency_sign_check(Wfam: ObservableFamily, branches, b: str) -> float:
    """``sum_alpha ||W(b) - (-1)^{alpha.b} 1||^2_{psi_alpha}``."""
    _check_branches(Wfam, branches)
    eye = np.eye(Wfam.dim)
    return float(sum(_norm_sq(Wfam[b] - (-1) ** dot(bits, b) * eye, rho) for bits, rho in branches))


def twirl_invariance_check(Wfam: ObservableFamily, psi: np.ndarray, bs: Optional[Sequence[str]] = None) -> float:
    """``max_b ||W(b) psi W(b) - psi||_1`` over ``bs`` (all b when None)."""
    psi = check_state(psi, Wfam.dim)
    bs = _bitstrings(Wfam.n) if bs is None else bs
    return max(trace_norm(Wfam[b] @ psi @ Wfam[b] - psi) for b in bs)


def twirl_bound(residual: float) -> float:
    """The proof's bound ``2 sqrt(residual)`` on the twirl distance."""
    return 2 * math.sqrt(max(residual, 0.0))
