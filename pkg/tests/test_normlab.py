import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from succinct_qma.compiler import ProverBranch, honest_compiled_prover, transparent_qhe
from succinct_qma.games import honest_strategy
from succinct_qma.normlab import (
    BranchMismatch,
    CheckResult,
    ChoiDiagnostic,
    ConventionViolation,
    DimensionMismatch,
    GroupFunction,
    GroupTable,
    NonInvariantState,
    NormlabError,
    NotComplete,
    NotPSD,
    ObservableFamily,
    braiding_function,
    calibrate_constant,
    cauchy_schwarz_check,
    choi_operator,
    commutator_residual,
    compiled_pure_branches,
    consistency_sign_check,
    dls_anticommutation_check,
    dls_check,
    factorisation_check,
    gh_round,
    irrep_multiplicities,
    norm_properties,
    parseval_check,
    pauli_intertwiner,
    random_binary_observable,
    random_density,
    random_isometry,
    random_projective_family,
    random_unitary,
    replace_state_check,
    report_json,
    rounding_all_dist_check,
    state_norm,
    state_norm_sq,
    twirl,
    twirl_bound,
    twirl_invariance_check,
    unitary_near_identity,
)
from succinct_qma.pauli import PauliString, all_words, projector_family, word_to_dense
from succinct_qma.smallbias import construct_biased

seeds = st.integers(0, 2**32 - 1)


def _rng(seed):
    return np.random.default_rng(seed)


def _rand_op(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


class TestStateNorm:
    def test_identity_normalized(self):
        rho = random_density(4, _rng(0))
        assert state_norm(np.eye(4), rho) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_matches_ensemble_oracle(self, seed):
        # rho = sum_i p_i |v_i><v_i|  =>  ||A||^2 = sum_i p_i |A v_i|^2
        rng = _rng(seed)
        d = 5
        A = _rand_op(d, rng)
        p = rng.dirichlet(np.ones(3))
        vs = [v / np.linalg.norm(v) for v in (rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in p)]
        rho = sum(pi * np.outer(v, v.conj()) for pi, v in zip(p, vs))
        oracle = sum(pi * np.linalg.norm(A @ v) ** 2 for pi, v in zip(p, vs))
        assert state_norm_sq(A, rho) == pytest.approx(oracle, rel=1e-10)

    def test_unitary_invariance_fifty(self):
        rng = _rng(1)
        A, rho = _rand_op(4, rng), random_density(4, rng)
        base = state_norm(A, rho)
        for _ in range(50):
            assert state_norm(random_unitary(4, rng) @ A, rho) == pytest.approx(base, abs=1e-10)

    def test_linearity_subnormalized(self):
        rng = _rng(2)
        for _ in range(20):
            A = _rand_op(3, rng)
            t = rng.uniform(0, 1)
            p1, p2 = random_density(3, rng, t), random_density(3, rng, 1 - t)
            assert state_norm_sq(A, p1 + p2) == pytest.approx(state_norm_sq(A, p1) + state_norm_sq(A, p2), abs=1e-10)

    def test_non_psd_rejected(self):
        with pytest.raises(NotPSD):
            state_norm(np.eye(2), np.diag([1.0, -1e-6]))
        # tolerance: -1e-12 is accepted
        state_norm(np.eye(2), np.diag([1.0, -1e-12]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            state_norm(np.eye(2), np.eye(3) / 3)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(2, 6))
    def test_five_properties(self, seed, d):
        rng = _rng(seed)
        A, B = _rand_op(d, rng), _rand_op(d, rng)
        t = rng.uniform(0, 1)
        props = norm_properties(A, B, random_density(d, rng, t), random_density(d, rng, 1 - t), random_unitary(d, rng))
        assert set(props) == {"conjugated_state", "operator_bound", "unitary_invariance", "linearity", "squared_triangle"}
        for name, r in props.items():
            assert r.holds, (name, r)

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_replace_state(self, seed):
        rng = _rng(seed)
        assert replace_state_check(_rand_op(4, rng), random_density(4, rng), random_density(4, rng)).holds

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_cauchy_schwarz(self, seed, k):
        rng = _rng(seed)
        weights = rng.dirichlet(np.ones(k)) * rng.uniform(0.1, 1)
        As = [_rand_op(3, rng) for _ in range(k)]
        psis = [random_density(3, rng, w) for w in weights]
        assert cauchy_schwarz_check(As, psis).holds

    def test_cauchy_schwarz_needs_subnormalized(self):
        with pytest.raises(NormlabError):
            cauchy_schwarz_check([np.eye(2)] * 2, [np.eye(2) / 2 * 1.2] * 2)


class TestFamilies:
    def test_pauli_family_linear(self):
        f = ObservableFamily.pauli("X", 3)
        assert f.exactly_linear and f.n == 3 and f.dim == 8
        assert np.allclose(f["101"] @ f["011"], f["110"])

    def test_non_binary_rejected(self):
        with pytest.raises(NormlabError):
            ObservableFamily("bad", {"0": np.eye(2), "1": np.diag([1.0, 0.5])})

    def test_non_linear_rejected(self):
        z = np.diag([1.0, -1.0])
        x = np.array([[0, 1], [1, 0]])
        with pytest.raises(NormlabError):
            ObservableFamily("anti", {"00": np.eye(2), "10": z, "01": x, "11": z @ x + x @ z}, exactly_linear=True)
        with pytest.raises(NormlabError):
            # generators anticommute, so no linear family can contain them
            ObservableFamily("anti", {"00": np.eye(2), "10": z, "01": x, "11": np.eye(2)}, exactly_linear=True)

    def test_from_projectors_linear(self):
        fam = ObservableFamily.from_projectors("rand", random_projective_family(3, 8, _rng(3)))
        assert fam.exactly_linear

    def test_diagonal_family_linear(self):
        assert ObservableFamily.diagonal(4, 16, _rng(4)).exactly_linear


def _commuting_closed_form(n):
    # Pr_{a,b}[a.b = 1] = (1 - 2^-n) / 2
    return 4 * (1 - 2.0**-n) / 2


class TestCommutatorResidual:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_true_paulis_zero(self, n):
        Z, X = ObservableFamily.pauli("Z", n), ObservableFamily.pauli("X", n)
        assert commutator_residual(Z, X, np.eye(1 << n) / (1 << n)) <= 1e-12

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_commuting_family_closed_form(self, n):
        Z = ObservableFamily.pauli("Z", n)
        rho = random_density(1 << n, _rng(n))
        assert commutator_residual(Z, Z, rho) == pytest.approx(_commuting_closed_form(n), abs=1e-12)

    def test_explicit_distribution_agrees(self):
        n = 2
        Z = ObservableFamily.diagonal(n, 4, _rng(5))
        X = ObservableFamily.pauli("X", n).conjugated(random_unitary(4, _rng(6)))
        rho = random_density(4, _rng(7))
        from succinct_qma.normlab import uniform_pairs

        assert commutator_residual(Z, X, rho, uniform_pairs(n)) == pytest.approx(commutator_residual(Z, X, rho), abs=1e-12)

    def test_monotone_in_perturbation(self):
        n, d = 2, 4
        rng = _rng(8)
        H = unitary_near_identity(d, 1.0, rng)
        vals, vecs = np.linalg.eig(H)
        Z, X = ObservableFamily.pauli("Z", n), ObservableFamily.pauli("X", n)
        rho = np.eye(d) / d
        thetas = np.linspace(0.0, 0.3, 10)
        res = []
        for th in thetas:
            U = (vecs * vals**th) @ np.linalg.inv(vecs)
            res.append(commutator_residual(Z, X.conjugated(U), rho))
        assert res[0] <= 1e-12
        assert all(b > a for a, b in zip(res, res[1:]))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            commutator_residual(ObservableFamily.pauli("Z", 2), ObservableFamily.pauli("X", 3), np.eye(4) / 4)


class TestDls:
    def test_commuting_m(self):
        W = ObservableFamily.pauli("Z", 3)
        r = dls_check(word_to_dense(all_words(3)[1]), W, np.eye(8) / 8, construct_biased(3, 0.5))
        assert r.lhs <= 1e-14 and r.extra["set_mean"] <= 1e-14 and r.holds

    def test_random_instances(self):
        rng = _rng(9)
        count = 0
        for n in (4, 5, 6):
            S = construct_biased(n, 0.5)
            for _ in range(34):
                d = 16
                W = ObservableFamily.diagonal(n, d, rng)
                r = dls_check(random_binary_observable(d, rng), W, np.eye(d) / d, S)
                assert r.holds, r
                assert r.extra["twirl_distance"] <= 1e-12
                Z = ObservableFamily.diagonal(n, d, rng)
                X = ObservableFamily.diagonal(n, d, rng).conjugated(random_unitary(d, rng))
                assert dls_anticommutation_check(Z, X, np.eye(d) / d, S).holds
                count += 1
        assert count >= 100

    def test_bias_one_rejected(self):
        W = ObservableFamily.pauli("Z", 2)
        with pytest.raises(NormlabError):
            dls_check(np.eye(4), W, np.eye(4) / 4, ["00", "01"])

    def test_delta_term(self):
        W = ObservableFamily.pauli("Z", 2)
        S = construct_biased(2, 0.5, exhaustive=True)
        r0 = dls_check(random_binary_observable(4, _rng(1)), W, np.eye(4) / 4, S)
        r1 = dls_check(random_binary_observable(4, _rng(1)), W, np.eye(4) / 4, S, delta=0.1)
        assert r1.rhs - r0.rhs == pytest.approx(0.2 / (1 - r0.extra["bias"]))

    def test_non_linear_family_rejected(self):
        fam = ObservableFamily.pauli("Z", 2)
        fam.exactly_linear = False
        with pytest.raises(NormlabError):
            dls_check(np.eye(4), fam, np.eye(4) / 4, construct_biased(2, 0.5))


class TestGroup:
    @pytest.mark.parametrize("n", [1, 2])
    def test_table(self, n):
        G = GroupTable(n)
        assert len(G) == 2 * 4**n
        # associativity via the dense fundamental representation
        dense = [word_to_dense(g) for g in G.elements]
        for i, g in enumerate(G.elements):
            for j in range(len(G)):
                assert np.allclose(dense[i] @ dense[j], dense[G.mult[i, j]])

    def test_too_large(self):
        with pytest.raises(NormlabError):
            GroupTable(3)

    @pytest.mark.parametrize("n", [1, 2])
    def test_irreps_of_regular(self, n):
        G = GroupTable(n)
        m = irrep_multiplicities(G, {g: G.regular(g) for g in G.elements})
        assert m["integral"] and m["dimension_accounted"]
        assert len(m["one_dimensional"]) == 4**n
        assert all(v == 1 for v in m["one_dimensional"].values())
        assert m["fundamental"] == 2**n

    def test_fundamental_is_irreducible(self):
        G = GroupTable(2)
        m = irrep_multiplicities(G, {g: word_to_dense(g) for g in G.elements})
        assert m["fundamental"] == 1 and sum(m["one_dimensional"].values()) == 0

    @pytest.mark.parametrize("n", [1, 2])
    def test_intertwiner(self, n):
        G = GroupTable(n)
        phi = pauli_intertwiner(G)
        d = 2**n
        assert np.allclose(phi.conj().T @ phi, np.eye(d * d))
        for g in G.elements:
            assert np.allclose(G.regular(g) @ phi, phi @ np.kron(word_to_dense(g), np.eye(d)))


class TestGowersHatami:
    @pytest.mark.parametrize("n", [1, 2])
    def test_fundamental_exact(self, n):
        f = GroupFunction.fundamental(n)
        r = gh_round(f, random_density(f.dim, _rng(n)))
        assert r.residual <= 1e-12 and r.hypothesis <= 1e-12
        for g in all_words(n):
            assert np.allclose(r.rounded(g), f.table[g], atol=1e-8)
            assert np.allclose(r.rounded(g), r.V.conj().T @ r.pi_full(g) @ r.V, atol=1e-10)

    def test_sign_representation(self):
        for s, t in [(0, 0), (1, 2), (3, 3)]:
            r = gh_round(GroupFunction.sign(2, s, t), np.eye(1))
            assert r.residual <= 1e-12

    def test_homomorphism_exhaustive(self):
        for n in (1, 2):
            r = gh_round(GroupFunction.fundamental(n), np.eye(2**n) / 2**n)
            assert r.homomorphism_error() <= 1e-8

    @pytest.mark.parametrize("theta", [0.01, 0.02, 0.05, 0.1, 0.2, 0.5])
    def test_perturbed_sweep(self, theta):
        rng = _rng(int(theta * 1000))
        f = GroupFunction.perturbed(2, theta, rng)
        r = gh_round(f, random_density(4, rng))
        assert r.holds
        # each factor moves by at most theta in operator norm, so f(h)f(g) - f(hg) is <= 3 theta
        assert r.hypothesis <= 9 * theta**2
        assert r.residual <= r.hypothesis + 1e-8
        assert r.representation_error <= 1e-9

    @settings(max_examples=15, deadline=None)
    @given(seeds)
    def test_choi_psd_arbitrary_unitaries(self, seed):
        rng = _rng(seed)
        f = GroupFunction(1, {g: random_unitary(3, rng) for g in all_words(1)})
        assert np.linalg.eigvalsh(choi_operator(f)).min() >= -1e-9
        r = gh_round(f, random_density(3, rng))
        assert r.residual <= r.hypothesis + 1e-8

    def test_non_unitary_table_diagnostic(self):
        rng = _rng(11)
        f = GroupFunction(1, {g: _rand_op(2, rng) for g in all_words(1)}, check=False)
        with pytest.raises(ChoiDiagnostic) as e:
            gh_round(f, np.eye(2) / 2)
        assert e.value.unitarity_defect > 1e-3
        # the Choi operator is still PSD (a Gram matrix), the channel is not unital
        assert e.value.min_eigenvalue >= -1e-9 and e.value.unital_error > 1e-3

    def test_table_must_cover_group(self):
        with pytest.raises(NormlabError):
            GroupFunction(1, {g: np.eye(2) for g in all_words(1)[:-1]})

    def test_mu_concentrated(self):
        rng = _rng(12)
        f = GroupFunction.perturbed(1, 0.2, rng)
        g = all_words(1)[3]
        r = gh_round(f, np.eye(2) / 2, {g: 1.0})
        oracle = state_norm_sq(f.table[g] - r.rounded(g), np.eye(2) / 2)
        assert r.residual == pytest.approx(oracle, abs=1e-12)
        assert r.holds


class TestAllDistributions:
    @pytest.mark.parametrize("n", [1, 2])
    def test_true_paulis(self, n):
        d = 2**n
        Z, X = ObservableFamily.pauli("Z", n), ObservableFamily.pauli("X", n)
        rng = _rng(n)
        mu = {("1" * n, "0" * (n - 1) + "1"): 0.5, ("0" * n, "1" * n): 0.5}
        for m in (None, mu):
            r = rounding_all_dist_check(Z, X, np.eye(d) / d, m)
            assert r.lhs <= 1e-12 and r.holds

    def test_braiding_function_on_paulis_is_fundamental(self):
        f = braiding_function(ObservableFamily.pauli("Z", 2), ObservableFamily.pauli("X", 2))
        for g in all_words(2):
            assert np.allclose(f.table[g], word_to_dense(g))

    def test_concentrated_perturbed_sweep(self):
        rng = _rng(13)
        n, d = 2, 4
        Z, X = ObservableFamily.pauli("Z", n), ObservableFamily.pauli("X", n)
        results = []
        for theta in (0.02, 0.05, 0.1, 0.2, 0.4):
            Xp = X.conjugated(unitary_near_identity(d, theta, rng))
            Zp = Z.conjugated(unitary_near_identity(d, theta, rng))
            for a, b in [("11", "11"), ("10", "01"), ("01", "11")]:
                r = rounding_all_dist_check(Zp, Xp, np.eye(d) / d, {(a, b): 1.0})
                assert r.holds and not r.extra["flagged"]
                assert r.extra["epsilon"] > 0
                results.append(r)
        C = calibrate_constant(results)
        assert 0 < C <= 100

    def test_uniform_matches_gh_round(self):
        rng = _rng(14)
        n, d = 2, 4
        Z = ObservableFamily.pauli("Z", n).conjugated(unitary_near_identity(d, 0.3, rng))
        X = ObservableFamily.pauli("X", n).conjugated(unitary_near_identity(d, 0.3, rng))
        r = rounding_all_dist_check(Z, X, np.eye(d) / d)
        assert abs(r.lhs - r.extra["gh_residual"]) <= 1e-9
        assert r.extra["isometry_error"] <= 1e-9

    def test_non_invariant_state(self):
        Z, X = ObservableFamily.pauli("Z", 1), ObservableFamily.pauli("X", 1)
        with pytest.raises(NonInvariantState):
            rounding_all_dist_check(Z, X, np.diag([1.0, 0.0]))

    def test_twirled_state_accepted(self):
        rng = _rng(15)
        Z, X = ObservableFamily.pauli("Z", 1), ObservableFamily.pauli("X", 1)
        psi = twirl(X, twirl(Z, random_density(2, rng)))
        assert rounding_all_dist_check(Z, X, psi).holds


class TestParseval:
    def test_exact_paulis(self):
        w = PauliString.parse("XZ")
        r = parseval_check(projector_family(w), w, np.eye(4), np.eye(4) / 4)
        assert r.lhs <= 1e-12 and r.rhs <= 1e-12 and r.holds

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.sampled_from(["XZ", "ZZ", "XI", "IZ"]))
    def test_random_family(self, seed, w):
        rng = _rng(seed)
        fam = random_projective_family(2, 4, rng)
        r = parseval_check(fam, w, random_unitary(4, rng), random_density(4, rng))
        assert r.holds and r.lhs == pytest.approx(r.rhs, abs=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(seeds)
    def test_doubled_space(self, seed):
        rng = _rng(seed)
        fam = random_projective_family(2, 4, rng)
        V = random_isometry(4, 8, rng)
        r = parseval_check(fam, "ZX", V, random_density(4, rng))
        assert r.holds and r.lhs > 1e-6

    def test_incomplete_rejected(self):
        fam = projector_family(PauliString.parse("ZZ"))
        fam["11"] = np.zeros((4, 4))
        with pytest.raises(NotComplete):
            parseval_check(fam, "ZZ", np.eye(4), np.eye(4) / 4)


class TestFactorisation:
    def test_honest_mixed_basis(self):
        w = PauliString.parse("XZ")
        assert factorisation_check(projector_family(w), w).holds

    def test_honest_with_identity(self):
        w = PauliString.parse("XIZ")
        assert factorisation_check(projector_family(w), w).holds

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.sampled_from(["XZI", "ZZX", "IXZ", "XXX", "IIZ"]))
    def test_random_respecting_convention(self, seed, w):
        w = PauliString.parse(w)
        fam = random_projective_family(3, 8, _rng(seed), w)
        assert factorisation_check(fam, w).holds

    def test_convention_violation_reported(self):
        w = PauliString.parse("XI")
        fam = random_projective_family(2, 4, _rng(3))
        fam = {u: np.zeros((4, 4)) for u in fam}
        fam["01"] = np.eye(4)
        with pytest.raises(ConventionViolation) as e:
            factorisation_check(fam, w)
        assert e.value.outcomes == ["01"]


@pytest.fixture(scope="module")
def qhe():
    return transparent_qhe()


def _branches(qhe, n, basis="Z"):
    hs = honest_strategy(None, S=construct_biased(n, 0.5), n=n)
    prover = honest_compiled_prover(hs, qhe)
    qubits = list(hs.alice_last) + list(hs.bob_last)
    return compiled_pure_branches(prover, qhe, basis, n, qubits)


def _bob(letter, n):
    return ObservableFamily.pauli(letter, n).embedded(2**n)


def _rotated_bob(letter, n, theta):
    # Bob measures his first qubit in a basis rotated by theta about Y
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    ry = np.array([[c, -s], [s, c]])
    R = np.kron(np.eye(2**n), np.kron(ry, np.eye(2 ** (n - 1))))
    return _bob(letter, n).conjugated(R, "rotated")


class TestConsistency:
    @pytest.mark.parametrize("basis", ["Z", "X"])
    def test_honest_zero(self, qhe, basis):
        n = 2
        br = _branches(qhe, n, basis)
        assert sum(np.trace(r).real for _, r in br) == pytest.approx(1.0)
        for b in ["00", "01", "10", "11"]:
            assert consistency_sign_check(_bob(basis, n), br, b) <= 1e-9

    def test_honest_random_b(self, qhe):
        n = 3
        br = _branches(qhe, n)
        rng = _rng(16)
        for _ in range(50):
            b = "".join(rng.choice(["0", "1"], size=n))
            assert consistency_sign_check(_bob("Z", n), br, b) <= 1e-9

    def test_flip_deviation(self, qhe):
        # Bob flips his first outcome: W'(b) = (-1)^{b_0} Z(b), every branch is affected when b_0 = 1
        n = 3
        br = _branches(qhe, n)
        flip = np.kron(np.eye(8), np.kron(np.array([[0, 1], [1, 0]]), np.eye(4)))
        fam = _bob("Z", n).conjugated(flip, "flipped")
        assert consistency_sign_check(fam, br, "100") == pytest.approx(4.0, abs=1e-9)
        assert consistency_sign_check(fam, br, "011") <= 1e-9

    def test_conditional_flip(self, qhe):
        # W'(b) = Z(b + b_0 e_1): flips the sign only on branches whose second bit is 1
        n = 3
        br = _branches(qhe, n)
        Z = _bob("Z", n)
        ops = {b: Z[b[0] + ("1" if b[1] != b[0] else "0") + b[2]] for b in Z.ops}
        fam = ObservableFamily("conditional", ops, exactly_linear=True)
        affected = sum(np.trace(r).real for bits, r in br if bits[1] == "1")
        assert consistency_sign_check(fam, br, "100") == pytest.approx(4 * affected, abs=1e-9)

    def test_bookkeeping_mismatch(self, qhe):
        br = _branches(qhe, 2)
        with pytest.raises(BranchMismatch):
            consistency_sign_check(_bob("Z", 2), br + br[:1], "01")
        with pytest.raises(BranchMismatch):
            consistency_sign_check(_bob("Z", 2), [("0", br[0][1])], "01")

    def test_prover_without_states(self, qhe):
        class Opaque:
            def round1_branches(self, c):
                return [ProverBranch(c, 1.0, lambda y: {})]

        with pytest.raises(BranchMismatch):
            compiled_pure_branches(Opaque(), qhe, "Z", 2, [0, 1])


class TestTwirl:
    def test_honest_zero(self, qhe):
        for n in (2, 3):
            psi = sum(r for _, r in _branches(qhe, n))
            assert twirl_invariance_check(_bob("Z", n), psi) <= 1e-9

    def test_maximally_mixed(self):
        rng = _rng(17)
        fam = ObservableFamily.pauli("X", 2).conjugated(random_unitary(4, rng))
        assert twirl_invariance_check(fam, np.eye(4) / 4) <= 1e-12

    @pytest.mark.parametrize("theta", [0.05, 0.2, 0.6])
    def test_deviation_bounded(self, qhe, theta):
        n = 2
        br = _branches(qhe, n)
        psi = sum(r for _, r in br)
        fam = _rotated_bob("Z", n, theta)
        for b in ["10", "11"]:
            dist = twirl_invariance_check(fam, psi, [b])
            res = consistency_sign_check(fam, br, b)
            assert dist > 1e-4
            assert dist <= twirl_bound(res) + 1e-9


def test_report_json():
    r = dls_check(np.eye(4), ObservableFamily.pauli("Z", 2), np.eye(4) / 4, construct_biased(2, 0.5))
    rec = json.loads(report_json([r]))[0]
    assert rec["check"] == "dls_commutator" and rec["verdict"] == "pass"
    assert set(rec) == {"check", "parameters", "lhs", "rhs", "verdict", "extra"}
    lhs, rhs, holds = r
    assert isinstance(r, CheckResult) and holds
