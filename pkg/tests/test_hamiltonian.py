import math

import numpy as np
import pytest
from scipy.stats import binom

from succinct_qma.hamiltonian import (
    MeasurementHamiltonian,
    Prg,
    SeedSpaceError,
    XZHamiltonian,
    XZTerm,
    build_from_recipe,
    dense_hamiltonian,
    dprime_sample,
    exact_energy,
    ground_energy,
    ksv_accept_probability,
    ksv_amplify,
    mf_convert,
    prg_expand,
    prg_subsample,
    random_xz_hamiltonian,
    subsampled_ground_energy,
    toy_instances,
    trivial_hamiltonian,
    yes_instance,
)
from succinct_qma.pauli import PauliString
from succinct_qma.rng import TracedRng
from succinct_qma.simulator import QuantumState, basis_distribution


def rand_state(rng, m):
    v = rng.normal(size=1 << m) + 1j * rng.normal(size=1 << m)
    return QuantumState.from_vector(v / np.linalg.norm(v))


def mf_oracle(h: XZHamiltonian, state: QuantumState) -> float:
    """Rescaled energy from the dense matrix: 1/2 + <h> / (2 sum|c|)."""
    total = sum(abs(t.coeff) for t in h.terms)
    e = np.vdot(state.amplitudes, h.dense() @ state.amplitudes).real
    return 0.5 + e / (2 * total)


Z1 = XZHamiltonian(1, (XZTerm(1.0, (0,), ("Z",)),))


class TestMf:
    def test_plus_z_on_one(self):
        # |1> is the ground state of +Z, so the energy test always accepts
        assert exact_energy(mf_convert(Z1), QuantumState.basis("1")) == pytest.approx(0.0)

    def test_plus_z_on_zero(self):
        assert exact_energy(mf_convert(Z1), QuantumState.basis("0")) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(6))
    def test_random_instance_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        h = random_xz_hamiltonian(3, 5, rng)
        mh = mf_convert(h)
        assert mh.metadata["quantisation_error"] == 0.0
        for _ in range(3):
            psi = rand_state(rng, 3)
            assert exact_energy(mh, psi) == pytest.approx(mf_oracle(h, psi), abs=1e-9)
        e0, g = h.ground()
        assert exact_energy(mh, g) == pytest.approx(0.5 + mh.metadata["scale"] * e0, abs=1e-9)

    def test_dense_form_is_affine_image(self):
        h = toy_instances()[2]
        mh = mf_convert(h)
        expect = 0.5 * np.eye(16) + mh.metadata["scale"] * h.dense()
        assert np.allclose(dense_hamiltonian(mh), expect, atol=1e-12)

    def test_non_dyadic_records_error(self):
        h = XZHamiltonian(2, (XZTerm(1.0, (0,), ("Z",)), XZTerm(1.0, (1,), ("X",)), XZTerm(1.0, (0, 1), ("Z", "Z"))))
        mh = mf_convert(h, precision_bits=8)
        assert 0 < mh.metadata["quantisation_error"] < 3 / 256 * 3

    def test_zero_coefficients(self):
        with pytest.raises(ValueError):
            mf_convert(XZHamiltonian(1, (XZTerm(0.0, (0,), ("Z",)),)))

    def test_gap_shrinks_by_scale(self):
        h = toy_instances()[0]
        mh = mf_convert(h, alpha_h=-1.0, beta_h=0.0)
        assert mh.beta - mh.alpha == pytest.approx(mh.metadata["scale"] * 1.0)

    def test_two_local(self):
        with pytest.raises(ValueError):
            XZTerm(1.0, (0, 1, 2), ("Z", "Z", "Z"))


class TestEnergy:
    def test_accept_everything(self):
        mh = trivial_hamiltonian(2, True)
        assert exact_energy(mh, rand_state(np.random.default_rng(0), 2)) == pytest.approx(0.0)

    def test_accept_nothing(self):
        mh = trivial_hamiltonian(2, False)
        assert exact_energy(mh, rand_state(np.random.default_rng(0), 2)) == pytest.approx(1.0)

    def test_sampling_agrees_with_enumeration(self):
        rng = np.random.default_rng(21)
        h = random_xz_hamiltonian(3, 6, rng)
        mh = mf_convert(h)
        psi = rand_state(rng, 3)
        exact = exact_energy(mh, psi)
        est, se = exact_energy(mh, psi, trials=5000, rng=TracedRng(3))
        assert abs(est - exact) <= 4 * se

    def test_linearity_in_mixtures(self):
        rng = np.random.default_rng(8)
        h = random_xz_hamiltonian(2, 4, rng)
        mh = mf_convert(h)
        H = dense_hamiltonian(mh)
        a, b = rand_state(rng, 2), rand_state(rng, 2)
        for p in (0.0, 0.3, 0.7, 1.0):
            rho = p * a.density() + (1 - p) * b.density()
            mix = p * exact_energy(mh, a) + (1 - p) * exact_energy(mh, b)
            assert np.trace(H @ rho).real == pytest.approx(mix, abs=1e-12)

    def test_enumeration_cap(self):
        mh = trivial_hamiltonian(1, True, seed_bits=30)
        with pytest.raises(SeedSpaceError):
            exact_energy(mh, QuantumState.basis("0"))

    @pytest.mark.parametrize("idx", range(3))
    def test_yes_ground_state_within_alpha(self, idx):
        h = toy_instances()[idx]
        mh = yes_instance(h)
        _, g = h.ground()
        assert exact_energy(mh, g) <= mh.alpha + 1e-9


def _single_term_mh(p_accept_state):
    """1-qubit energy test of +Z; |psi> = sqrt(1-p)|0> + sqrt(p)|1> passes w.p. p."""
    mh = mf_convert(Z1)
    psi = QuantumState.from_vector([math.sqrt(1 - p_accept_state), math.sqrt(p_accept_state)])
    return mh, psi


class TestKsv:
    def test_t1_identity(self):
        h = toy_instances()[0]
        mh = mf_convert(h, alpha_h=-1.0, beta_h=0.5)
        amp = ksv_amplify(mh, 1)
        psi = rand_state(np.random.default_rng(2), 2)
        assert exact_energy(amp, psi) == pytest.approx(exact_energy(mh, psi), abs=1e-12)

    def test_binomial_tails_t60(self):
        yes = ksv_accept_probability(0.9, 60, 0.1, 0.9)
        no = ksv_accept_probability(0.1, 60, 0.1, 0.9)
        assert yes >= 0.99 and no <= 0.01
        # independent route: scipy binomial cdf on the rejection count (< 30 of 60)
        assert yes == pytest.approx(binom.cdf(29, 60, 0.1), rel=1e-9)
        assert no == pytest.approx(binom.cdf(29, 60, 0.9), rel=1e-9, abs=1e-300)

    def test_literal_reading(self):
        # signed sum 2r - t < t * mid  <=>  r < t (1 + mid) / 2 = 45 of 60
        yes = ksv_accept_probability(0.9, 60, 0.1, 0.9, literal=True)
        assert yes == pytest.approx(binom.cdf(44, 60, 0.1), rel=1e-9)

    @pytest.mark.parametrize("t", [2, 3, 5])
    def test_small_t_enumeration_matches_binomial(self, t):
        for p in (0.9, 0.1, 0.6):
            mh, psi = _single_term_mh(p)
            mh.alpha, mh.beta = 0.1, 0.9
            amp = ksv_amplify(mh, t)
            prod = psi
            for _ in range(t - 1):
                prod = prod.tensor(psi)
            got = 1 - exact_energy(amp, prod)
            assert got == pytest.approx(ksv_accept_probability(p, t, 0.1, 0.9), abs=1e-12)

    def test_all_blocks_accept(self):
        mh, _ = _single_term_mh(1.0)
        mh.alpha, mh.beta = 0.1, 0.9
        amp = ksv_amplify(mh, 4)
        assert amp.accept(0, "1111")

    def test_gap_monotone_in_t(self):
        gaps = [ksv_accept_probability(0.7, t, 0.3, 0.7) - ksv_accept_probability(0.3, t, 0.3, 0.7)
                for t in range(1, 80, 2)]
        assert all(b >= a - 1e-12 for a, b in zip(gaps, gaps[1:]))

    def test_cap(self):
        with pytest.raises(ValueError):
            ksv_amplify(mf_convert(toy_instances()[0]), 3000)


class TestPrg:
    def test_deterministic(self):
        assert prg_expand(12345, 32, 500) == prg_expand(12345, 32, 500)

    def test_out_equals_seed_len(self):
        assert prg_expand(7, 32, 32) == prg_expand(7, 32, 32) < 1 << 32

    def test_avalanche(self):
        rng = np.random.default_rng(0)
        fracs = []
        for _ in range(100):
            a, b = (int(x) for x in rng.integers(0, 1 << 32, size=2))
            diff = prg_expand(a, 32, 1024) ^ prg_expand(b, 32, 1024)
            fracs.append(bin(diff).count("1") / 1024)
        assert np.mean(fracs) >= 0.4

    def test_hash_choice(self):
        assert prg_expand(1, 8, 256, hash_name="sha256") != prg_expand(1, 8, 256)

    def test_identity_prg_is_identity(self):
        h = random_xz_hamiltonian(2, 5, np.random.default_rng(4))
        mh = mf_convert(h)
        sub = prg_subsample(mh, Prg.identity(mh.seed_bits))
        for s in mh.seeds():
            assert sub.sampler(s) == mh.sampler(s)
            for u in ("00", "01", "10", "11"):
                assert sub.accept(s, u) == mh.accept(s, u)

    def test_constant_prg_single_term(self):
        h = toy_instances()[1]
        mh = mf_convert(h)
        sub = prg_subsample(mh, Prg.constant_output(6, mh.seed_bits, 3))
        _, g = h.ground()
        terms = {str(sub.sampler(s)) for s in sub.seeds()}
        assert len(terms) == 1
        dist = basis_distribution(g, [0, 1, 2], mh.sampler(3))
        single = 1 - sum(p for u, p in dist.items() if mh.accept(3, u))
        assert exact_energy(sub, g) == pytest.approx(single, abs=1e-12)

    def test_shortfall(self):
        mh = mf_convert(toy_instances()[2])
        with pytest.raises(ValueError):
            prg_subsample(mh, Prg(8, mh.seed_bits - 1))

    def test_subsampled_energy_enumerated(self):
        h = random_xz_hamiltonian(2, 4, np.random.default_rng(5), dyadic_bits=4)
        mh = mf_convert(h)
        e0, _ = ground_energy(mh)
        e_sub, bound = subsampled_ground_energy(prg_subsample(mh, Prg(14, 64)))
        assert bound == 0.0 and abs(e_sub - e0) <= 0.05


class TestDprime:
    def setup_method(self):
        self.mh = mf_convert(toy_instances()[2])

    def test_all_ones(self):
        s = (5 << 4) | 0b1111
        assert dprime_sample(self.mh, s) == self.mh.sampler(5)

    def test_all_zeros(self):
        assert dprime_sample(self.mh, 5 << 4) == PauliString.uniform("I", 4)

    def test_marginals(self):
        rng = TracedRng(77)
        seed_w = 2
        w = self.mh.sampler(seed_w)
        trials = 10_000
        kept = np.zeros(4)
        for _ in range(trials):
            wp = dprime_sample(self.mh, (seed_w << 4) | rng.bits(4))
            kept += [ch != "I" for ch in wp.letters]
        for i, ch in enumerate(w.letters):
            if ch != "I":
                assert abs(kept[i] / trials - 0.5) <= 5 * math.sqrt(0.25 / trials)

    def test_underflow(self):
        with pytest.raises(ValueError):
            dprime_sample(self.mh, 1 << (self.mh.seed_bits + 4))


def test_recipe_roundtrip():
    h = toy_instances()[0]
    mh = prg_subsample(ksv_amplify(mf_convert(h, -1.0, 0.5), 2), Prg(10, 64))
    again = build_from_recipe(mh.recipe)
    for s in range(50):
        assert again.sampler(s) == mh.sampler(s)
        assert again.accept(s, "0110") == mh.accept(s, "0110")
