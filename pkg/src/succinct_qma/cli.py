"""Batch harness: ``succinct-qma <command> [flags]``.

Commands: game, compiled, succinct, ham-build, bias-build, checks. Each
builds a :class:`RunConfig` (defaults, then an INI file, then flags), runs,
writes a JSON report validated against ``report.schema.json`` and exits 0
iff every asserted invariant held.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from .rng import TracedRng

COMMANDS = ("game", "compiled", "succinct", "ham-build", "bias-build", "checks")
CHECK_SUITES = (
    "norms", "dls", "gh", "alldist", "parseval", "factorisation", "consistency", "twirl", "smallbias", "hamiltonian",
)
GAME_NS = (2, 3, 4)
MAX_TRIALS = 10**7
MAX_N = 64


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """All knobs of a batch run; every field has a documented default."""

    seed: int = 0
    n: int = 2
    bias: float = 0.5
    t: int = 1
    secparam: int = 128
    trials: int = 1000
    hash: str = "blake2b"
    k: int = 32
    strict_braiding: bool = False
    literal_ksv: bool = False
    prover: str = "honest"  # honest | table
    ns: Tuple[int, ...] = (16, 32, 64, 128, 256, 512, 1024)
    prg_seed_len: int = 14
    checks: Tuple[str, ...] = CHECK_SUITES
    inject_failure: bool = False
    workers: int = 1
    timing: bool = False
    artifact_out: str = ""

    def validate(self) -> "RunConfig":
        from .succinct.merkle import HASH_FAMILIES

        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 1 <= self.n <= MAX_N:
            raise ConfigError(f"n must lie in [1, {MAX_N}]")
        if not 0 < self.bias <= 1:
            raise ConfigError("bias must lie in (0, 1]")
        if not 1 <= self.t <= 4096 // self.n:
            raise ConfigError("t * n must not exceed 4096")
        if self.secparam < 8 or self.secparam % 8 or self.secparam > 4096:
            raise ConfigError("secparam must be a multiple of 8 in [8, 4096]")
        if not 0 <= self.trials <= MAX_TRIALS:
            raise ConfigError(f"trials must lie in [0, {MAX_TRIALS}]")
        if self.hash not in HASH_FAMILIES:
            raise ConfigError(f"hash must be one of {sorted(HASH_FAMILIES)}")
        if not 1 <= self.k <= 1024:
            raise ConfigError("k must lie in [1, 1024]")
        if self.prover not in ("honest", "table"):
            raise ConfigError("prover must be 'honest' or 'table'")
        if not self.ns or any(v < 2 for v in self.ns):
            raise ConfigError("ns must be a nonempty list of integers >= 2")
        if not 1 <= self.prg_seed_len <= 64:
            raise ConfigError("prg_seed_len must lie in [1, 64]")
        unknown = set(self.checks) - set(CHECK_SUITES)
        if unknown:
            raise ConfigError(f"unknown check suites {sorted(unknown)}")
        if not 1 <= self.workers <= 64:
            raise ConfigError("workers must lie in [1, 64]")
        return self

    # INI round trip: one [run] section of key = value lines
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["run"] = {f.name: _fmt(getattr(self, f.name)) for f in fields(self)}
        lines = ["[run]"] + [f"{k} = {v}" for k, v in cp["run"].items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ini(cls, text: str, base: Optional["RunConfig"] = None) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        values = asdict(base or cls())
        if cp.has_section("run"):
            for key, raw in cp["run"].items():
                values[key] = _parse_field(key, raw)
        return cls(**values).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ns"], d["checks"] = list(self.ns), list(self.checks)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(map(str, v))
    return str(v)


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {raw!r}")


def _parse_field(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    typ = _FIELD_TYPES[key]
    try:
        if typ == "bool":
            return _parse_bool(raw)
        if typ == "int":
            return int(raw, 0)
        if typ == "float":
            return float(raw)
        if key == "ns":
            return tuple(_parse_ns(raw))
        if key == "checks":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {raw!r}") from e
    return raw.strip()


def _parse_ns(raw: str) -> List[int]:
    """``16, 32, 64`` or an inclusive range ``16..1024``."""
    raw = raw.strip()
    if ".." in raw:
        lo, hi = raw.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in raw.split(",") if v.strip()]


# ---------------------------------------------------------------- shared setup


@lru_cache(maxsize=None)
def _instance(n: int, bias: float):
    from .games import honest_strategy
    from .hamiltonian import toy_instances, yes_instance
    from .smallbias import construct_biased

    if n not in GAME_NS:
        raise ConfigError(f"game commands run on the toy instances, n in {GAME_NS}")
    h = toy_instances()[GAME_NS.index(n)]
    mh = yes_instance(h)
    S = construct_biased(n, bias)
    _, ground = h.ground()
    return h, mh, S, honest_strategy(ground, mh, S)


def _table_strategy(n: int):
    from .games import classical_strategy, zero_answers

    return classical_strategy(n, zero_answers(n), zero_answers(n))


def _trial_chunk(command: str, cfg: dict, start: int, stop: int) -> Tuple[Dict[str, List[int]], Dict[str, int]]:
    """Trials ``start..stop-1``; trial ``i`` uses ``TracedRng(seed, (i,))``."""
    from .compiler import compile_and_run, honest_compiled_prover, main_game, transparent_qhe
    from .games import recompute_verdict, run_main

    config = RunConfig(**{**cfg, "ns": tuple(cfg["ns"]), "checks": tuple(cfg["checks"])})
    _, mh, S, hs = _instance(config.n, config.bias)
    strategy = hs if config.prover == "honest" else _table_strategy(config.n)
    counts: Dict[str, List[int]] = {}
    nbytes: Counter = Counter()
    mismatches = 0
    if command != "game":
        qhe = transparent_qhe()
        prover = honest_compiled_prover(strategy, qhe)
        game = main_game(mh, S, config.strict_braiding)
    for i in range(start, stop):
        rng = TracedRng(config.seed, (i,))
        if command == "game":
            tr = run_main(strategy, mh, S, rng, config.strict_braiding)
            test, verdict = tr.test, tr.verdict
            mismatches += recompute_verdict(tr, S, mh) != verdict
        elif command == "compiled":
            tr = compile_and_run(game, qhe, prover, config.secparam, rng)
            test, verdict = tr.test, tr.verdict
            mismatches += game.verdict(tr.test, tr.x, tr.a, tr.y, tr.b, tr.private) != verdict
        else:
            from .succinct import HashSpec, run_succinct_protocol

            hspec = HashSpec.sample(TracedRng(config.seed, (i, 1)), config.hash)
            tr = run_succinct_protocol(game, qhe, prover, config.secparam, rng, hspec, config.k)
            test, verdict = tr.test, tr.verdict
            nbytes.update(tr.byte_counts())
        c = counts.setdefault(test, [0, 0])
        c[0] += 1
        c[1] += int(verdict)
    counts["_verdict_mismatch"] = [mismatches, 0]
    return counts, dict(nbytes)


def _run_trials(command: str, config: RunConfig) -> Tuple[Dict[str, dict], Dict[str, int], int]:
    cfg = config.to_dict()
    if config.workers == 1 or config.trials < 2:
        parts = [_trial_chunk(command, cfg, 0, config.trials)]
    else:
        step = math.ceil(config.trials / config.workers)
        bounds = [(s, min(s + step, config.trials)) for s in range(0, config.trials, step)]
        with ProcessPoolExecutor(config.workers) as ex:
            parts = list(ex.map(_trial_chunk, *zip(*[(command, cfg, a, b) for a, b in bounds])))
    counts: Dict[str, List[int]] = {}
    nbytes: Counter = Counter()
    for c, b in parts:
        for k, (tr, acc) in c.items():
            cur = counts.setdefault(k, [0, 0])
            cur[0] += tr
            cur[1] += acc
        nbytes.update(b)
    mismatches = counts.pop("_verdict_mismatch", [0, 0])[0]
    if sum(v[0] for v in counts.values()) != config.trials:
        raise RuntimeError("per-test counts do not sum to the trial count")
    out = {k: {"trials": v[0], "accepted": v[1]} for k, v in sorted(counts.items())}
    return out, dict(sorted(nbytes.items())), mismatches


class _Report:
    def __init__(self, command: str, config: RunConfig):
        self.data = {
            "command": command, "config": config.to_dict(), "counts": {}, "exact": {}, "bytes": {},
            "checks": [], "details": {}, "ok": True, "failures": [],
        }

    def require(self, cond: bool, message: str) -> None:
        if not cond:
            self.data["failures"].append(message)

    def finish(self) -> dict:
        self.data["ok"] = not self.data["failures"] and all(c["verdict"] == "pass" for c in self.data["checks"])
        return self.data


def _honest_invariants(rep: _Report, counts: Dict[str, dict], tests: Sequence[str]) -> None:
    for test in tests:
        c = counts.get(test)
        if c is not None:
            rep.require(c["accepted"] == c["trials"], f"honest {test} rejected {c['trials'] - c['accepted']} times")


def _magic_square(rep: _Report) -> None:
    from fractions import Fraction

    from .games import ms_classical_value, ms_quantum_value

    rc, cell = ms_classical_value("row_column"), ms_classical_value("cell")
    rep.data["exact"].update({
        "ms_classical_row_column": float(rc), "ms_classical_cell": float(cell),
        "ms_quantum": ms_quantum_value("row_column"),
    })
    rep.require(rc == Fraction(8, 9), "row-column classical value is not 8/9")
    rep.require(rep.data["exact"]["ms_quantum"] >= 1 - 1e-9, "quantum magic square value below 1")


# ---------------------------------------------------------------- commands


def cmd_game(config: RunConfig) -> dict:
    from .games import braiding_items, exact_accept, ham_items, main_items, mvp_items
    from .hamiltonian import exact_energy

    rep = _Report("game", config)
    counts, _, mism = _run_trials("game", config)
    rep.data["counts"] = counts
    rep.require(mism == 0, f"{mism} transcripts disagree with the recomputed verdict")
    h, mh, S, hs = _instance(config.n, config.bias)
    if config.prover == "honest":
        _honest_invariants(rep, counts, ("com", "anticom", "mvp"))
        ex = rep.data["exact"]
        ex["braiding"] = exact_accept(hs, braiding_items(S, config.strict_braiding), S)
        ex["mixed_vs_pure"] = exact_accept(hs, mvp_items(mh), mh=mh)
        ex["hamiltonian"] = exact_accept(hs, ham_items(mh), mh=mh)
        ex["one_minus_energy"] = 1 - exact_energy(mh, hs.witness)
        ex["main"] = exact_accept(hs, main_items(mh, S, config.strict_braiding), S, mh)
        rep.require(abs(ex["braiding"] - 1) <= 1e-9, "honest braiding acceptance is not 1")
        rep.require(abs(ex["mixed_vs_pure"] - 1) <= 1e-9, "honest mixed-vs-pure acceptance is not 1")
        rep.require(abs(ex["hamiltonian"] - ex["one_minus_energy"]) <= 1e-9, "Hamiltonian test differs from 1 - <H>")
    else:
        rep.data["exact"]["main"] = exact_accept(_table_strategy(config.n), main_items(mh, S, config.strict_braiding), S, mh)
        _magic_square(rep)
    return rep.finish()


def cmd_compiled(config: RunConfig) -> dict:
    from .compiler import compiled_exact_accept, honest_compiled_prover, main_game, transparent_qhe
    from .games import exact_accept, main_items

    rep = _Report("compiled", config)
    counts, _, mism = _run_trials("compiled", config)
    rep.data["counts"] = counts
    rep.require(mism == 0, f"{mism} transcripts disagree with the recomputed verdict")
    _, mh, S, hs = _instance(config.n, config.bias)
    strategy = hs if config.prover == "honest" else _table_strategy(config.n)
    if config.prover == "honest":
        _honest_invariants(rep, counts, ("com", "anticom", "mvp"))
    else:
        _magic_square(rep)
    if config.n <= 3:
        qhe = transparent_qhe()
        game = main_game(mh, S, config.strict_braiding)
        comp = compiled_exact_accept(game, qhe, honest_compiled_prover(strategy, qhe), config.secparam)
        plain = exact_accept(strategy, main_items(mh, S, config.strict_braiding), S, mh)
        rep.data["exact"].update({"compiled_main": comp, "uncompiled_main": plain})
        rep.require(abs(comp - plain) <= 1e-9, "compiled and uncompiled acceptance differ")
    return rep.finish()


def ksv_separation(t: int, literal: bool = False, margin: float = 0.05) -> Dict[str, float]:
    """Exact amplified acceptance of a YES toy instance and of a NO instance built from it.

    The NO instance moves both thresholds below the ground energy, so even the
    best witness accepts each block with probability at most ``1 - alpha``.
    """
    from .hamiltonian import ground_energy, ksv_accept_probability, mf_convert, toy_instances, yes_instance

    h = toy_instances()[0]
    e0, _ = h.ground()
    total = sum(abs(term.coeff) for term in h.terms)
    yes = yes_instance(h, margin)
    no = mf_convert(h, alpha_h=e0 - 4 * margin * total, beta_h=e0 - margin * total)
    ey, _ = ground_energy(yes)
    en, _ = ground_energy(no)
    p_yes = ksv_accept_probability(1 - ey, t, yes.alpha, yes.beta, literal)
    p_no = ksv_accept_probability(1 - en, t, no.alpha, no.beta, literal)
    return {"ksv_t": t, "ksv_yes": p_yes, "ksv_no": p_no, "ksv_separation": p_yes - p_no}


def cmd_succinct(config: RunConfig) -> dict:
    from .succinct import accounting_report

    rep = _Report("succinct", config)
    counts, nbytes, _ = _run_trials("succinct", config)
    rep.data["counts"] = counts
    if config.prover == "honest":
        rep.require(all(c["accepted"] == c["trials"] for c in counts.values()), "honest succinct run rejected")
    runs = max(config.trials, 1)
    rep.data["bytes"] = {k: v / runs for k, v in nbytes.items()}
    acct = accounting_report(config.ns)
    ex = rep.data["exact"]
    ex.update({
        "fit_a": acct["fit"]["a"], "fit_b": acct["fit"]["b"], "fit_r2": acct["fit"]["r2"],
        "n_max": acct["n_max"], "succinct_total": acct["succinct_total"],
        "naive_total": acct["naive_total"], "total_over_naive": acct["ratio"],
    })
    rep.data["details"]["v2p_bytes"] = {str(k): v for k, v in acct["v2p"].items()}
    if len(config.ns) >= 3:
        rep.require(acct["fit"]["r2"] >= 0.95, f"log^2 fit R^2 = {acct['fit']['r2']:.3f} < 0.95")
    rep.require(acct["ratio"] < 0.01, f"total/naive = {acct['ratio']:.3g} >= 1%")
    sep = ksv_separation(config.t if config.t > 1 else 60, config.literal_ksv)
    ex.update(sep)
    rep.require(sep["ksv_separation"] >= 0.3, "YES/NO acceptance separation below 0.3")
    return rep.finish()


def cmd_ham_build(config: RunConfig) -> dict:
    from .hamiltonian import (
        Prg,
        ground_energy,
        ksv_accept_probability,
        ksv_amplify,
        prg_subsample,
        subsampled_ground_energy,
        toy_instances,
        yes_instance,
    )

    rep = _Report("ham-build", config)
    if config.n not in GAME_NS:
        raise ConfigError(f"ham-build uses the toy instances, n in {GAME_NS}")
    h = toy_instances()[GAME_NS.index(config.n)]
    mh = yes_instance(h)
    e_h, _ = h.ground()
    e0, _ = ground_energy(mh)
    ex = rep.data["exact"]
    ex.update({"xz_ground": e_h, "ground": e0, "alpha": mh.alpha, "beta": mh.beta, "seed_bits": mh.seed_bits})
    prg = Prg(config.prg_seed_len, max(64, mh.seed_bits))
    sub = prg_subsample(mh, prg)
    samples = None if config.prg_seed_len <= 20 else 1 << 16
    e_sub, bound = subsampled_ground_energy(sub, samples, TracedRng(config.seed, (0,)))
    ex.update({"subsampled_ground": e_sub, "subsample_bound": bound})
    from .normlab import CheckResult

    gap = abs(e0 - e_sub) + bound
    rep.data["checks"].append(CheckResult("prg_fidelity", gap, 0.05, gap <= 0.05, {"seed_len": config.prg_seed_len}).to_record())
    recipe = sub.recipe
    if config.t > 1:
        amp = ksv_amplify(mh, config.t, config.literal_ksv)
        recipe = prg_subsample(amp, Prg(config.prg_seed_len, max(64, amp.seed_bits))).recipe
        ex["amplified_seed_bits"] = amp.seed_bits
        ex["amplified_accept_ground"] = ksv_accept_probability(1 - e0, config.t, mh.alpha, mh.beta, config.literal_ksv)
    rep.data["details"]["recipe"] = recipe
    if config.artifact_out:
        Path(config.artifact_out).write_text(json.dumps(recipe, indent=2, sort_keys=True))
    return rep.finish()


def cmd_bias_build(config: RunConfig) -> dict:
    from .smallbias import BRUTE_FORCE_CAP, bias_of, construct_biased

    rep = _Report("bias-build", config)
    S = construct_biased(config.n, config.bias)
    ex = rep.data["exact"]
    ex.update({"size": len(S), "field_degree": S.field_degree, "size_constant": S.size_constant()})
    if config.n <= BRUTE_FORCE_CAP:
        ex["bias"] = bias_of(S)
        rep.require(ex["bias"] <= config.bias + 1e-12, f"measured bias {ex['bias']} exceeds target {config.bias}")
    else:
        ex["bias"] = None
    if config.artifact_out:
        S.save(config.artifact_out)
    return rep.finish()


# ---------------------------------------------------------------- check suites


def _suite_norms(rng):
    from . import normlab as nl

    out = []
    for _ in range(10):
        d = int(rng.integers(2, 6))
        A, B = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(2))
        p = rng.uniform()
        psi, psi2 = nl.random_density(d, rng, p), nl.random_density(d, rng, 1 - p)
        out += list(nl.norm_properties(A, B, psi, psi2, nl.random_unitary(d, rng)).values())
        out.append(nl.replace_state_check(A, nl.random_density(d, rng), nl.random_density(d, rng)))
        out.append(nl.cauchy_schwarz_check([A, B], [psi, psi2]))
    return out


def _suite_dls(rng):
    from . import normlab as nl
    from .smallbias import construct_biased

    out = []
    S = construct_biased(4, 0.5)
    for _ in range(5):
        d = 8
        W = nl.ObservableFamily.diagonal(4, d, rng)
        out.append(nl.dls_check(nl.random_binary_observable(d, rng), W, np.eye(d) / d, S))
        X = nl.ObservableFamily.diagonal(4, d, rng).conjugated(nl.random_unitary(d, rng))
        out.append(nl.dls_anticommutation_check(W, X, np.eye(d) / d, S))
    return out


def _gh_record(name, r, params):
    from .normlab import CheckResult

    return CheckResult(name, r.residual, r.hypothesis, r.holds, params, {"aux_dim": r.aux_dim})


def _suite_gh(rng):
    from . import normlab as nl

    out = []
    for n in (1, 2):
        f = nl.GroupFunction.fundamental(n)
        out.append(_gh_record("gh_exact", nl.gh_round(f, np.eye(f.dim) / f.dim), {"n": n}))
    for theta in (0.01, 0.05, 0.1, 0.25, 0.5):
        f = nl.GroupFunction.perturbed(2, theta, rng)
        out.append(_gh_record("gh_perturbed", nl.gh_round(f, nl.random_density(4, rng)), {"n": 2, "theta": theta}))
    return out


def _suite_alldist(rng):
    from . import normlab as nl

    Z, X = nl.ObservableFamily.pauli("Z", 2), nl.ObservableFamily.pauli("X", 2)
    out = []
    for theta in (0.05, 0.2):
        Xp = X.conjugated(nl.unitary_near_identity(4, theta, rng))
        out.append(nl.rounding_all_dist_check(Z, Xp, np.eye(4) / 4, {("11", "11"): 1.0}))
    return out


def _suite_parseval(rng):
    from . import normlab as nl

    return [
        nl.parseval_check(nl.random_projective_family(2, 4, rng), "XZ", nl.random_isometry(4, 8, rng), nl.random_density(4, rng))
        for _ in range(5)
    ]


def _suite_factorisation(rng):
    from . import normlab as nl
    from .pauli import PauliString

    w = PauliString.parse("XZI")
    return [nl.factorisation_check(nl.random_projective_family(3, 8, rng, w), w) for _ in range(5)]


def _honest_branches(n: int, basis: str):
    from . import normlab as nl
    from .compiler import honest_compiled_prover, transparent_qhe
    from .games import honest_strategy
    from .smallbias import construct_biased

    hs = honest_strategy(None, S=construct_biased(n, 0.5), n=n)
    qhe = transparent_qhe()
    qubits = list(hs.alice_last) + list(hs.bob_last)
    br = nl.compiled_pure_branches(honest_compiled_prover(hs, qhe), qhe, basis, n, qubits)
    fam = nl.ObservableFamily.pauli(basis, n).embedded(1 << n)
    return br, fam


def _suite_consistency(rng):
    from . import normlab as nl
    from .pauli import int_to_bits

    out = []
    for basis in ("Z", "X"):
        br, fam = _honest_branches(2, basis)
        for v in range(4):
            b = int_to_bits(v, 2)
            res = nl.consistency_sign_check(fam, br, b)
            out.append(nl.CheckResult("consistency_sign", res, 1e-9, res <= 1e-9, {"basis": basis, "b": b}))
    return out


def _suite_twirl(rng):
    from . import normlab as nl

    out = []
    for basis in ("Z", "X"):
        br, fam = _honest_branches(2, basis)
        dist = nl.twirl_invariance_check(fam, sum(r for _, r in br))
        out.append(nl.CheckResult("twirl_invariance", dist, 1e-9, dist <= 1e-9, {"basis": basis}))
    return out


def _suite_smallbias(rng):
    from .normlab import CheckResult
    from .pauli import dot
    from .smallbias import bias_of, construct_biased

    out = []
    for n, target in ((6, 0.5), (8, 0.25)):
        S = construct_biased(n, target)
        ints = [int(v) for v in S.as_ints()]
        naive = max(abs(sum((-1) ** dot(a, b) for a in ints)) / len(ints) for b in range(1, 1 << n))
        fast = bias_of(S)
        out.append(CheckResult("smallbias_oracle", abs(fast - naive), 1e-12, abs(fast - naive) <= 1e-12, {"n": n}))
        out.append(CheckResult("smallbias_target", fast, target, fast <= target, {"n": n}))
    return out


def _suite_hamiltonian(rng):
    from .hamiltonian import dense_hamiltonian, exact_energy, mf_convert, toy_instances
    from .normlab import CheckResult

    out = []
    for h in toy_instances():
        mh = mf_convert(h)
        _, g = h.ground()
        dense = float(np.vdot(g.amplitudes, dense_hamiltonian(mh) @ g.amplitudes).real)
        diff = abs(exact_energy(mh, g) - dense)
        out.append(CheckResult("energy_oracle", diff, 1e-9, diff <= 1e-9, {"n": h.n}))
    return out


SUITES: Dict[str, Callable] = {
    "norms": _suite_norms, "dls": _suite_dls, "gh": _suite_gh, "alldist": _suite_alldist,
    "parseval": _suite_parseval, "factorisation": _suite_factorisation, "consistency": _suite_consistency,
    "twirl": _suite_twirl, "smallbias": _suite_smallbias, "hamiltonian": _suite_hamiltonian,
}


def cmd_checks(config: RunConfig) -> dict:
    rep = _Report("checks", config)
    results = []
    for i, name in enumerate(config.checks):
        rng = np.random.default_rng([config.seed, i])
        for r in SUITES[name](rng):
            r.params = {"suite": name, **r.params}
            results.append(r)
    if config.inject_failure and results:
        results[0].holds = not results[0].holds
        results[0].extra["injected"] = True
    rep.data["checks"] = [r.to_record() for r in results]
    return rep.finish()


HANDLERS = {
    "game": cmd_game, "compiled": cmd_compiled, "succinct": cmd_succinct,
    "ham-build": cmd_ham_build, "bias-build": cmd_bias_build, "checks": cmd_checks,
}


# ---------------------------------------------------------------- reports and entry point


@lru_cache(maxsize=1)
def report_schema() -> dict:
    return json.loads(resources.files("succinct_qma").joinpath("report.schema.json").read_text())


def validate_report(report: dict) -> None:
    jsonschema.validate(report, report_schema())


def run(command: str, config: RunConfig) -> dict:
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    config.validate()
    t0 = time.perf_counter()
    report = HANDLERS[command](config)
    if config.timing:
        report["wall_clock_s"] = time.perf_counter() - t0
    validate_report(report)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=float)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="succinct-qma", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI file with a [run] section")
    p.add_argument("--report", help="write the JSON report here (default: stdout)")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            p.add_argument(flag, dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        else:
            p.add_argument(flag, dest=f.name, default=None)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    base = RunConfig()
    if args.config:
        base = RunConfig.from_ini(Path(args.config).read_text())
    values = asdict(base)
    for f in fields(RunConfig):
        raw = getattr(args, f.name)
        if raw is None:
            continue
        values[f.name] = raw if isinstance(raw, bool) else _parse_field(f.name, raw)
    return RunConfig(**values).validate()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report = run(args.command, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    text = dumps(report)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    status = "ok" if report["ok"] else "FAILED: " + "; ".join(report["failures"] or ["check verdicts"])
    print(f"{args.command}: {status}", file=sys.stderr)
    return 0 if report["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
