"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines appear in the
live output even without ``-s``.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import binom

from succinct_qma import normlab as nl
from succinct_qma.compiler import compiled_joint_distribution, honest_compiled_prover, transparent_qhe
from succinct_qma.games import (
    braiding_items,
    exact_accept,
    ham_items,
    honest_strategy,
    joint_distribution,
    main_items,
    ms_classical_value,
    ms_quantum_value,
    mvp_items,
)
from succinct_qma.hamiltonian import (
    Prg,
    ground_energy,
    exact_energy,
    ksv_accept_probability,
    mf_convert,
    prg_subsample,
    random_xz_hamiltonian,
    subsampled_ground_energy,
    toy_instances,
    yes_instance,
)
from succinct_qma.pauli import PauliString
from succinct_qma.rng import TracedRng
from succinct_qma.smallbias import bias_of, construct_biased
from succinct_qma.succinct import (
    CorruptingSaokProver,
    HashSpec,
    HonestSaokProver,
    Relation,
    accounting_report,
    classical_extract,
    merkle_commit,
    merkle_verify,
    saok_run,
)


@pytest.fixture
def verdict(capsys):
    def emit(num: int, title: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {num:2d}: {title}" + (f" [{detail}]" if detail else ""))
        assert ok, f"criterion {num} failed: {detail}"

    return emit


def _setup(n):
    h = toy_instances()[n - 2]
    mh = yes_instance(h)
    S = construct_biased(n, 0.5)
    _, g = ground_energy(mh)
    return mh, S, honest_strategy(g, mh, S)


def _rng(*path):
    return np.random.default_rng(list(path))


def test_c01_honest_completeness(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 3, 4):
        mh, S, hs = _setup(n)
        for strict in (False, True):
            worst = max(worst, abs(exact_accept(hs, braiding_items(S, strict), S) - 1))
        worst = max(worst, abs(exact_accept(hs, mvp_items(mh), mh=mh) - 1))
    dt = time.perf_counter() - t0
    verdict(1, "honest braiding and mixed-vs-pure accept with certainty, n = 2,3,4",
            worst <= 1e-9 and dt <= 60, f"max |p - 1| = {worst:.2e}, {dt:.1f} s")


def test_c02_hamiltonian_test(verdict):
    worst = 0.0
    for n in (2, 3, 4):
        mh, S, hs = _setup(n)
        p = exact_accept(hs, ham_items(mh), mh=mh)
        worst = max(worst, abs(p - (1 - exact_energy(mh, hs.witness))))
    verdict(2, "honest Hamiltonian test accepts with 1 - <H>", worst <= 1e-9, f"max diff = {worst:.2e}")


def test_c03_compiled_equals_uncompiled(verdict):
    mh, S, hs = _setup(2)
    qhe = transparent_qhe()
    prover = honest_compiled_prover(hs, qhe)
    worst, pairs, tests = 0.0, set(), set()
    for _, test, x, y, private in main_items(mh, S, strict=True) + main_items(mh, S, strict=False):
        if (x, y) in pairs:
            continue
        pairs.add((x, y))
        tests.add(test)
        plain = joint_distribution(hs, x, y)
        comp = compiled_joint_distribution(qhe, prover, x, y)
        if set(plain) != set(comp):
            worst = math.inf
            break
        worst = max([worst] + [abs(plain[k] - comp[k]) for k in plain])
    ok = worst <= 1e-9 and tests == {"com", "anticom", "mvp", "ham"}
    verdict(3, "compiled joint distributions equal uncompiled at n = 2", ok,
            f"{len(pairs)} question pairs, subtests {sorted(tests)}, max diff = {worst:.2e}")


def test_c04_magic_square(verdict):
    t0 = time.perf_counter()
    classical = ms_classical_value("row_column")
    quantum = ms_quantum_value("row_column")
    cell = ms_classical_value("cell")
    dt = time.perf_counter() - t0
    ok = classical == Fraction(8, 9) and abs(quantum - 1) <= 1e-9 and dt <= 60
    verdict(4, "magic square classical value 8/9, quantum value 1", ok,
            f"classical {classical}, quantum {quantum:.12f}, cell variant {cell}, {dt:.1f} s")


def test_c05_ksv_amplification(verdict):
    t, alpha, beta = 60, 0.1, 0.9
    yes = ksv_accept_probability(0.9, t, alpha, beta)
    no = ksv_accept_probability(0.1, t, alpha, beta)
    # independent route: accept iff fewer than t/2 rejecting blocks
    yes_ref, no_ref = binom.cdf(29, t, 0.1), binom.cdf(29, t, 0.9)
    ok = yes >= 0.99 and no <= 0.01 and abs(yes - yes_ref) <= 1e-12 and abs(no - no_ref) <= 1e-12
    verdict(5, "KSV amplification at t = 60", ok, f"YES {yes:.12f}, NO {no:.3e}")


def test_c06_prg_fidelity(verdict):
    h = random_xz_hamiltonian(2, 4, np.random.default_rng(6), dyadic_bits=4)
    mh = mf_convert(h)
    e0, _ = ground_energy(mh)
    # exhaustive short-seed enumeration where it is feasible
    exact = {l: abs(subsampled_ground_energy(prg_subsample(mh, Prg(l, 64)))[0] - e0) for l in (16, 20)}
    t0 = time.perf_counter()
    e32, bound = subsampled_ground_energy(prg_subsample(mh, Prg(32, 64)), 1 << 20, TracedRng(6))
    dt = time.perf_counter() - t0
    gap = abs(e32 - e0) + bound
    ok = gap <= 0.05 and all(v <= 0.05 for v in exact.values())
    verdict(6, "PRG-subsampled ground energy within 0.05 (32-bit seed)", ok,
            f"l=32: |dE| {abs(e32 - e0):.2e} + bound {bound:.2e} from 2^20 seeds in {dt:.0f} s; "
            f"l=16: {exact[16]:.2e}, l=20: {exact[20]:.2e}")


def test_c07_small_bias(verdict):
    t0 = time.perf_counter()
    S = construct_biased(16, 0.25)
    b = bias_of(S)
    dt = time.perf_counter() - t0
    verdict(7, "construct_biased(16, 0.25) has bias <= 0.25", b <= 0.25 and dt <= 10,
            f"|S| = {len(S)}, bias {b:.4f}, {dt:.2f} s")


def test_c08_dls(verdict):
    fails, count, worst = 0, 0, -math.inf
    sets = {n: construct_biased(n, 0.5) for n in (4, 5, 6)}
    for i in range(100):
        n = (4, 5, 6)[i % 3]
        rng = _rng(8, i)
        d = 16
        W = nl.ObservableFamily.diagonal(n, d, rng)
        rho = np.eye(d) / d
        r1 = nl.dls_check(nl.random_binary_observable(d, rng), W, rho, sets[n])
        X = nl.ObservableFamily.diagonal(n, d, rng).conjugated(nl.random_unitary(d, rng))
        r2 = nl.dls_anticommutation_check(W, X, rho, sets[n])
        for r in (r1, r2):
            count += 1
            worst = max(worst, r.lhs - r.rhs)
            fails += not (r.lhs <= r.rhs + 1e-9 and r.extra["twirl_distance"] <= 1e-9)
    verdict(8, "commutator lifting and its anticommutator form, 100 instances", fails == 0,
            f"{count - fails}/{count} hold, max lhs - rhs = {worst:.3e}")


def test_c09_gowers_hatami(verdict):
    exact_worst, fails, rows = 0.0, 0, 0
    for n in (1, 2):
        d = 1 << n
        f = nl.GroupFunction.fundamental(n)
        exact_worst = max(exact_worst, nl.gh_round(f, nl.random_density(d, _rng(9, n))).residual)
        for j, theta in enumerate((0.01, 0.05, 0.1, 0.25, 0.5)):
            rng = _rng(9, n, j)
            r = nl.gh_round(nl.GroupFunction.perturbed(n, theta, rng), nl.random_density(d, rng))
            rows += 1
            fails += not r.residual <= r.hypothesis + 1e-8
    ok = exact_worst <= 1e-8 and fails == 0
    verdict(9, "Gowers-Hatami rounding on W_1 and W_2", ok,
            f"exact residual {exact_worst:.2e}, perturbed {rows - fails}/{rows} within hypothesis")


def test_c10_parseval_factorisation(verdict):
    fails = 0
    for i in range(50):
        n = (2, 3)[i % 2]
        d = 1 << n
        rng = _rng(10, i)
        w = PauliString("".join(rng.choice(list("XZ"), n)))
        fam = nl.random_projective_family(n, d, rng)
        V = nl.random_isometry(d, 2 * d, rng)
        p = nl.parseval_check(fam, w, V, nl.random_density(d, rng), tol=1e-9)
        wf = PauliString("".join(rng.choice(list("XZI"), n)))
        fac = nl.factorisation_check(nl.random_projective_family(n, d, rng, wf), wf, tol=1e-10)
        fails += not (p.holds and fac.holds)
    verdict(10, "Parseval and factorisation identities, 50 families at n = 2,3", fails == 0,
            f"{50 - fails}/50 families")


def test_c11_norm_properties(verdict):
    fails, total = 0, 0
    for i in range(200):
        rng = _rng(11, i)
        d = int(rng.integers(2, 7))
        A, B = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(2))
        w = rng.uniform()
        psi, psi2 = nl.random_density(d, rng, w), nl.random_density(d, rng, 1 - w)
        results = list(nl.norm_properties(A, B, psi, psi2, nl.random_unitary(d, rng), tol=1e-9).values())
        results.append(nl.replace_state_check(A, nl.random_density(d, rng), nl.random_density(d, rng), tol=1e-9))
        k = int(rng.integers(1, 5))
        ops = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(k)]
        results.append(nl.cauchy_schwarz_check(ops, [nl.random_density(d, rng, 1 / k) for _ in range(k)], tol=1e-9))
        total += len(results)
        fails += sum(not r.holds for r in results)
    verdict(11, "state-dependent norm properties, 200 instances each", fails == 0, f"{total - fails}/{total} statements")


def _eq_relation(target: bytes):
    return Relation("eq", target, lambda inst, w: w == inst, time_bound=len(target), max_witness=len(target))


def test_c12_merkle_spot_checks(verdict):
    hs = HashSpec(bytes(range(32)))
    rng = np.random.default_rng(12)
    width, size = 4, 16
    leaves = [bytes(rng.integers(0, 256, width, dtype=np.uint8)) for _ in range(size)]
    c = merkle_commit(leaves, hs)
    paths = [c.open(i) for i in range(size)]
    depth = len(paths[0])
    trials = 10**6
    kinds = rng.integers(0, 3, trials)
    idx = rng.integers(0, size, trials)
    pos = rng.integers(0, 1 << 16, trials)
    undetected = 0
    for t in range(trials):
        i, kind, p = int(idx[t]), int(kinds[t]), int(pos[t])
        leaf, path, j = leaves[i], paths[i], i
        if kind == 0:
            b = bytearray(leaf)
            b[p % width] ^= 1 << (p >> 8) % 8
            leaf = bytes(b)
        elif kind == 1:
            path = list(path)
            layer = bytearray(path[p % depth])
            layer[(p >> 4) % 32] ^= 1 << (p >> 9) % 8
            path[p % depth] = bytes(layer)
        else:
            j = (i + 1 + p % (size - 1)) % size
        undetected += merkle_verify(c.root, j, leaf, path, hs, size)

    w = bytes(range(100))
    rel = _eq_relation(w)
    k, runs, provers = 32, 20000, 4
    caught, deltas = 0, []
    for q in range(provers):
        prover = CorruptingSaokProver.at_fraction(w, hs, 0.25, TracedRng(120 + q))
        deltas.append(prover.delta)
        caught += sum(not saok_run(rel, w, hs, k, TracedRng(121, (q, i)), prover=prover).verdict
                      for i in range(runs // provers))
    expect = float(np.mean([1 - (1 - d) ** k for d in deltas]))
    sigma = math.sqrt(expect * (1 - expect) / runs)
    rate = caught / runs
    ok = undetected == 0 and abs(rate - expect) <= 3 * sigma
    verdict(12, "Merkle tampering always detected; spot-check catch rate", ok,
            f"{undetected} undetected of {trials}; delta {np.mean(deltas):.3f}, catch {rate:.5f} vs "
            f"{expect:.5f} +- {3 * sigma:.5f} (1 - 0.75^32 = {1 - 0.75 ** 32:.5f})")


def test_c13_accounting(verdict):
    rep = accounting_report(range(16, 1025))
    ok = rep["fit"]["r2"] >= 0.95 and rep["ratio"] < 0.01
    verdict(13, "V->P bytes fit a log^2 n + b; total below 1% of naive", ok,
            f"R^2 = {rep['fit']['r2']:.4f}, total/naive at n = {rep['n_max']}: {rep['ratio']:.2e}")


def test_c14_classical_extraction(verdict):
    hs = HashSpec(bytes(range(32, 64)))
    ok_runs = 0
    for i in range(100):
        rng = np.random.default_rng([14, i])
        w = bytes(rng.integers(0, 256, 10 + 7 * i, dtype=np.uint8))
        res = classical_extract(HonestSaokProver(w, hs), _eq_relation(w), hs, 32, rng=TracedRng(14, (i,)))
        ok_runs += res.ok and res.witness == w and res.rewinds <= res.budget
    verdict(14, "classical extraction from honest provers", ok_runs == 100, f"{ok_runs}/100 within the rewind budget")
