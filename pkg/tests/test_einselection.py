import math

import numpy as np
import pytest

from decolab import einselection as es
from decolab import hilbert as hb
from decolab import spinbath as sb
from decolab.errors import DegenerateSpec, IncompleteFamily, InvalidProjector

RT2 = 1.0 / math.sqrt(2.0)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=float)
PAULI_Z = np.diag([1.0, -1.0])


def spinbath_spec(n=4, seed=0, alpha_sq=0.5, g=None):
    rng = np.random.default_rng(seed)
    if g is None:
        p = sb.homogeneous_params(n, alpha_sq, 0.9)
    else:
        p = sb.homogeneous_params(n, alpha_sq, g)
    layout = sb.bath_layout(p)
    h_self = hb.Observable(hb.SpaceLayout([("S", 2)]), np.zeros((2, 2)))
    return p, es.InteractionSpec(layout, h_self, sb.hamiltonian(p))


def env_product_state(p):
    layout = hb.SpaceLayout([(f"E{k+1}", 2) for k in range(p.n_env)])
    amps = np.ones(1, dtype=complex)
    for alpha, beta in p.env_amps:
        amps = np.kron(amps, np.array([alpha, beta]))
    return hb.PureState(layout, amps)


SYS = hb.SpaceLayout([("S", 2)])
UP = hb.basis_state(SYS, 0)
DOWN = hb.basis_state(SYS, 1)
PLUS = hb.PureState(SYS, np.array([RT2, RT2]))
MINUS = hb.PureState(SYS, np.array([RT2, -RT2]))


class TestCommutes:
    def test_pointer_projectors_commute_with_bath_hamiltonian(self):
        p, spec = spinbath_spec()
        projs = [hb.embed(hb.Observable(SYS, np.diag([1.0, 0.0])), spec.layout),
                 hb.embed(hb.Observable(SYS, np.diag([0.0, 1.0])), spec.layout)]
        rep = es.commutes(projs, spec.h_int, tol=1e-12)
        assert rep.passed
        assert np.max(rep.norms) == 0.0

    def test_rotated_projectors_fail(self):
        p, spec = spinbath_spec()
        px = [hb.embed(hb.Observable(SYS, 0.5 * (np.eye(2) + PAULI_X)), spec.layout),
              hb.embed(hb.Observable(SYS, 0.5 * (np.eye(2) - PAULI_X)), spec.layout)]
        rep = es.commutes(px, spec.h_int, tol=1e-10)
        assert not rep.passed
        assert np.min(rep.norms) > 1e-3

    def test_function_of_preferred_observable_commutes(self):
        # H built as a polynomial in O passes for O's eigenprojectors
        rng = np.random.default_rng(1)
        u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        lam = np.array([2.0, 1.0, -1.0, -2.0])
        layout = hb.SpaceLayout([("A", 4)])
        o = u @ np.diag(lam) @ u.conj().T
        h = hb.Observable(layout, o @ o + 2.0 * o)
        projs = [hb.Observable(layout, np.outer(u[:, i], u[:, i].conj())) for i in range(4)]
        rep = es.commutes(projs, h, tol=1e-10)
        assert rep.passed

    def test_non_projector_rejected(self):
        layout = hb.SpaceLayout([("A", 2)])
        h = hb.Observable(layout, PAULI_Z)
        with pytest.raises(InvalidProjector):
            es.commutes([hb.Observable(layout, 0.5 * np.eye(2))], h)

    def test_basis_independence(self):
        rng = np.random.default_rng(2)
        layout = hb.SpaceLayout([("A", 4)])
        z = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = hb.Observable(layout, 0.5 * (z + z.conj().T))
        proj = np.zeros((4, 4), dtype=complex)
        proj[0, 0] = proj[1, 1] = 1.0
        u = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0]
        before = es.commutes([hb.Observable(layout, proj)], h).norms[0]
        after = es.commutes([hb.Observable(layout, u @ proj @ u.conj().T)],
                            hb.Observable(layout, u @ h.matrix @ u.conj().T)).norms[0]
        assert before == pytest.approx(after, abs=1e-10)


class TestPreferredObservable:
    def test_qubit_pauli_z(self):
        projs = [hb.Observable(SYS, np.diag([1.0, 0.0])),
                 hb.Observable(SYS, np.diag([0.0, 1.0]))]
        o = es.preferred_observable(projs, [1.0, -1.0])
        assert np.allclose(o.matrix, PAULI_Z)

    def test_degenerate_eigenvalues_allowed(self):
        layout = hb.SpaceLayout([("A", 3)])
        projs = [hb.Observable(layout, np.diag([1.0, 0, 0])),
                 hb.Observable(layout, np.diag([0, 1.0, 0])),
                 hb.Observable(layout, np.diag([0, 0, 1.0]))]
        o = es.preferred_observable(projs, [5.0, 5.0, -1.0])
        assert np.allclose(np.linalg.eigvalsh(o.matrix), [-1.0, 5.0, 5.0])

    def test_eigendecomposition_recovers_family(self):
        # oracle: numpy eigh on the assembled observable
        rng = np.random.default_rng(3)
        u = np.linalg.qr(rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5)))[0]
        layout = hb.SpaceLayout([("A", 5)])
        projs = [hb.Observable(layout, np.outer(u[:, i], u[:, i].conj())) for i in range(5)]
        lam = np.array([3.0, 2.0, 1.0, -1.0, -2.0])
        o = es.preferred_observable(projs, lam)
        w, v = np.linalg.eigh(o.matrix)
        assert np.allclose(np.sort(w), np.sort(lam), atol=1e-10)
        for i in range(5):
            vec = v[:, np.argmin(np.abs(w - lam[i]))]
            assert abs(np.vdot(vec, u[:, i])) == pytest.approx(1.0, abs=1e-8)

    def test_incomplete_family_rejected(self):
        projs = [hb.Observable(SYS, np.diag([1.0, 0.0]))]
        with pytest.raises(IncompleteFamily):
            es.preferred_observable(projs, [1.0])


class TestSieve:
    def test_interaction_eigenstates_stay_pure(self):
        p, spec = spinbath_spec(n=5)
        env = env_product_state(p)
        t = 0.8
        rep = es.predictability_sieve(spec, env, [UP, DOWN, PLUS, MINUS], t)
        by_cand = {e.candidate: e for e in rep.entries}
        assert by_cand[0].purity == pytest.approx(1.0, abs=1e-10)
        assert by_cand[1].purity == pytest.approx(1.0, abs=1e-10)
        # oracle: closed-form coherence damping for superposition candidates
        want = 0.5 * (1.0 + sb.z_mod_sq(p, t))
        assert by_cand[2].purity == pytest.approx(want, abs=1e-10)
        assert by_cand[3].purity == pytest.approx(want, abs=1e-10)
        assert rep.ranking()[:2] == [0, 1]

    def test_time_zero_all_tie(self):
        p, spec = spinbath_spec(n=3)
        rep = es.predictability_sieve(spec, env_product_state(p),
                                      [UP, PLUS, MINUS], 0.0)
        for e in rep.entries:
            assert e.purity == pytest.approx(1.0, abs=1e-12)
        assert rep.ranking() == [0, 1, 2]  # index tiebreak

    def test_no_interaction_keeps_everything_pure(self):
        p, _ = spinbath_spec(n=3)
        layout = sb.bath_layout(p)
        h_self = hb.Observable(SYS, PAULI_Z)
        h_int = hb.Observable(layout, np.zeros((layout.dim, layout.dim)))
        spec = es.InteractionSpec(layout, h_self, h_int)
        rep = es.predictability_sieve(spec, env_product_state(p),
                                      [UP, PLUS, MINUS], 2.0)
        for e in rep.entries:
            assert e.purity == pytest.approx(1.0, abs=1e-10)

    def test_mixed_environment_supported(self):
        # maximally mixed bath behaves like |alpha|^2 = 1/2 per spin:
        # oracle is the closed-form coherence factor cos(2gt)^N
        p = sb.homogeneous_params(3, 0.5, 0.9)
        layout = sb.bath_layout(p)
        spec = es.InteractionSpec(layout, hb.Observable(SYS, np.zeros((2, 2))),
                                  sb.hamiltonian(p))
        env_layout = hb.SpaceLayout([(f"E{k+1}", 2) for k in range(3)])
        rho_env = hb.DensityOperator(env_layout, np.eye(8) / 8.0)
        t = 0.7
        rep = es.predictability_sieve(spec, rho_env, [UP, PLUS], t)
        by_cand = {e.candidate: e for e in rep.entries}
        assert by_cand[0].purity == pytest.approx(1.0, abs=1e-10)
        zt = math.cos(2 * 0.9 * t) ** 3
        assert by_cand[1].purity == pytest.approx(0.5 * (1 + zt ** 2), abs=1e-10)

    def test_ranking_strict_while_coherence_suppressed(self):
        p, spec = spinbath_spec(n=5)
        env = env_product_state(p)
        for t in (0.2, 0.5, 1.1):
            if abs(sb.z_analytic(p, t)) >= 0.99:
                continue
            rep = es.predictability_sieve(spec, env, [UP, DOWN, PLUS, MINUS], t)
            pur = {e.candidate: e.purity for e in rep.entries}
            assert min(pur[0], pur[1]) > max(pur[2], pur[3])


class TestClassifyRegime:
    def layout_spec(self, h_self_mat, h_int_scale, seed=4):
        rng = np.random.default_rng(seed)
        layout = hb.SpaceLayout([("S", 2), ("E", 3)])
        z = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h_int = 0.5 * (z + z.conj().T) * h_int_scale
        return es.InteractionSpec(layout, hb.Observable(SYS, h_self_mat),
                                  hb.Observable(layout, h_int))

    def test_zero_self_hamiltonian(self):
        spec = self.layout_spec(np.zeros((2, 2)), 1.0)
        rep = es.classify_regime(spec)
        assert rep.regime == es.INTERACTION_DOMINATED
        assert math.isinf(rep.norm_ratio)

    def test_zero_interaction(self):
        spec = self.layout_spec(PAULI_Z, 0.0)
        assert es.classify_regime(spec).regime == es.SELF_DOMINATED

    def test_unit_ratio_intermediate(self):
        spec = self.layout_spec(PAULI_Z, 1.0)
        n_int = np.linalg.norm(spec.h_int.matrix, 2)
        spec2 = es.InteractionSpec(spec.layout, spec.h_self,
                                   hb.Observable(spec.layout, spec.h_int.matrix / n_int))
        rep = es.classify_regime(spec2, thresholds=(0.1, 10.0))
        assert rep.norm_ratio == pytest.approx(1.0, abs=1e-12)
        assert rep.regime == es.INTERMEDIATE

    def test_scale_covariance(self):
        spec = self.layout_spec(PAULI_Z, 3.7)
        rep1 = es.classify_regime(spec)
        scaled = es.InteractionSpec(spec.layout,
                                    hb.Observable(SYS, 13.0 * spec.h_self.matrix),
                                    hb.Observable(spec.layout, 13.0 * spec.h_int.matrix))
        rep2 = es.classify_regime(scaled)
        assert rep1.regime == rep2.regime
        assert rep1.norm_ratio == pytest.approx(rep2.norm_ratio, rel=1e-12)

    def test_degenerate_spec(self):
        spec = self.layout_spec(np.zeros((2, 2)), 0.0)
        with pytest.raises(DegenerateSpec):
            es.classify_regime(spec)


class TestNearDegenerate:
    def test_diagonal_case(self):
        pairs = es.near_degenerate_eigenvectors(0.05, 0.0)
        assert np.allclose(pairs.vectors[0], [1, 0])
        assert np.allclose(pairs.vectors[1], [0, 1])
        assert pairs.values[0] == pytest.approx(0.55)

    def test_degenerate_diagonal_limit(self):
        omega = 1e-3 * np.exp(0.7j)
        pairs = es.near_degenerate_eigenvectors(0.0, omega)
        want_hi = np.array([abs(omega) / omega, 1.0]) * RT2
        want_lo = np.array([-abs(omega) / omega, 1.0]) * RT2
        assert min(es.subspace_angle(pairs.vectors[0], want_hi),
                   es.subspace_angle(pairs.vectors[0], want_lo)) < 1e-12
        assert min(es.subspace_angle(pairs.vectors[1], want_hi),
                   es.subspace_angle(pairs.vectors[1], want_lo)) < 1e-12

    def test_small_delta_stays_near_limit(self):
        omega = 1e-3
        limit = es.near_degenerate_eigenvectors(0.0, omega)
        pairs = es.near_degenerate_eigenvectors(1e-8, omega)
        for got, want in zip(pairs.vectors, limit.vectors):
            assert es.subspace_angle(got, want) < 1e-4

    def test_against_numpy_eigh(self):
        # oracle: dense eigensolver on the assembled matrix
        rng = np.random.default_rng(5)
        for _ in range(25):
            delta = rng.uniform(-0.2, 0.2)
            omega = (rng.standard_normal() + 1j * rng.standard_normal()) * 0.1
            m = np.array([[0.5 + delta, np.conj(omega)], [omega, 0.5 - delta]])
            pairs = es.near_degenerate_eigenvectors(delta, omega)
            w = np.linalg.eigvalsh(m)[::-1]
            assert np.allclose(pairs.values, w, atol=1e-12)
            for val, vec in zip(pairs.values, pairs.vectors):
                assert np.linalg.norm(m @ vec - val * vec) < 1e-12

    def test_orthonormal_and_trace_one(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            delta = rng.uniform(-0.3, 0.3)
            omega = (rng.standard_normal() + 1j * rng.standard_normal()) * 0.05
            pairs = es.near_degenerate_eigenvectors(delta, omega)
            v = pairs.vectors
            assert np.allclose(v @ v.conj().T, np.eye(2), atol=1e-12)
            assert pairs.values[0] + pairs.values[1] == 1.0


class TestSchmidtVsPointer:
    def test_biased_state_tracks_pointer_basis(self):
        p = sb.homogeneous_params(8, 0.5, 0.9, a=0.6, b=0.8)
        layout = sb.bath_layout(p)
        spec = es.InteractionSpec(layout, hb.Observable(SYS, np.zeros((2, 2))),
                                  sb.hamiltonian(p))
        sys0 = hb.PureState(SYS, np.array([p.a, p.b]))
        t = 0.7  # |z| well below 1 here
        assert abs(sb.z_analytic(p, t)) < 0.3
        rep = es.schmidt_vs_pointer(spec, env_product_state(p), sys0, t, [UP, DOWN])
        final = rep.comparisons[-1]
        assert not final.near_degenerate
        assert np.max(final.angles) < 1e-3 * (1 + abs(sb.z_analytic(p, t)) * 10)

    def test_balanced_state_flags_degeneracy(self):
        # at z = 0 exactly the reduced state is maximally mixed: gap 0
        p = sb.homogeneous_params(8, 0.5, 1.0, a=RT2, b=RT2)
        layout = sb.bath_layout(p)
        spec = es.InteractionSpec(layout, hb.Observable(SYS, np.zeros((2, 2))),
                                  sb.hamiltonian(p))
        sys0 = hb.PureState(SYS, np.array([RT2, RT2]))
        rep = es.schmidt_vs_pointer(spec, env_product_state(p), sys0,
                                    math.pi / 4, [UP, DOWN])
        assert rep.comparisons[-1].near_degenerate

    def test_initial_product_state_flags_rank_deficiency(self):
        p, spec = spinbath_spec(n=4)
        sys0 = hb.PureState(SYS, np.array([0.6, 0.8]))
        rep = es.schmidt_vs_pointer(spec, env_product_state(p), sys0, 1.0, [UP, DOWN])
        assert rep.comparisons[0].rank_deficient
