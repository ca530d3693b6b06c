import numpy as np
import pytest

from decolab import hilbert as hb
from decolab.errors import (BadBipartition, LabelCollision, LabelNotFound,
                            LayoutMismatch)

RT2 = 1.0 / np.sqrt(2.0)


def random_state(layout, rng):
    layout = hb._as_layout(layout)
    z = rng.standard_normal(layout.dim) + 1j * rng.standard_normal(layout.dim)
    return hb.PureState(layout, z / np.linalg.norm(z))


def random_hermitian(dim, rng):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (z + z.conj().T)


# ---------------------------------------------------------------------------
# layouts and constructors
# ---------------------------------------------------------------------------

class TestLayout:
    def test_total_dim_is_product(self):
        lay = hb.SpaceLayout([("S", 2), ("A", 3), ("E", 4)])
        assert lay.dim == 24
        assert lay.labels == ("S", "A", "E")

    def test_duplicate_label_rejected(self):
        with pytest.raises(LabelCollision):
            hb.SpaceLayout([("S", 2), ("S", 3)])

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError):
            hb.SpaceLayout([("S", 0)])

    def test_axis_lookup(self):
        lay = hb.SpaceLayout([("S", 2), ("E", 3)])
        assert lay.axis("E") == 1
        with pytest.raises(LabelNotFound):
            lay.axis("X")


class TestStateInvariants:
    def test_norm_enforced(self):
        with pytest.raises(ValueError):
            hb.PureState(hb.SpaceLayout([("S", 2)]), [1.0, 1.0])

    def test_density_trace_enforced(self):
        with pytest.raises(ValueError):
            hb.DensityOperator(hb.SpaceLayout([("S", 2)]), np.eye(2))

    def test_density_positivity_enforced(self):
        mat = np.diag([1.5, -0.5])
        with pytest.raises(ValueError):
            hb.DensityOperator(hb.SpaceLayout([("S", 2)]), mat)

    def test_observable_hermiticity_enforced(self):
        with pytest.raises(ValueError):
            hb.Observable(hb.SpaceLayout([("S", 2)]), [[0, 1], [0, 0]])


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------

class TestTensor:
    def test_basis_product(self):
        zero = hb.basis_state([("A", 2)], 0)
        zero2 = hb.basis_state([("B", 2)], 0)
        out = hb.tensor([zero, zero2])
        assert np.allclose(out.amplitudes, [1, 0, 0, 0])

    def test_plus_times_one(self):
        plus = hb.ket("A", 2, [RT2, RT2])
        one = hb.basis_state([("B", 2)], 1)
        out = hb.tensor([plus, one])
        assert np.allclose(out.amplitudes, [0, RT2, 0, RT2], atol=1e-15)

    def test_three_random_qubits_norm(self):
        # oracle: direct norm computation of the kron product
        rng = np.random.default_rng(11)
        states = [random_state([(f"Q{i}", 2)], rng) for i in range(3)]
        out = hb.tensor(states)
        direct = np.kron(np.kron(states[0].amplitudes, states[1].amplitudes),
                         states[2].amplitudes)
        assert abs(np.linalg.norm(direct) - 1.0) < 1e-12
        assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12
        assert np.allclose(out.amplitudes, direct)

    def test_duplicate_label_collides(self):
        a = hb.basis_state([("S", 2)], 0)
        with pytest.raises(LabelCollision):
            hb.tensor([a, a])


# ---------------------------------------------------------------------------
# partial trace
# ---------------------------------------------------------------------------

def epr_state():
    # (|+->_{12} - |-+>_{12}) / sqrt(2) in a two-qubit space
    amps = np.array([0, 1, -1, 0], dtype=complex) * RT2
    return hb.PureState(hb.SpaceLayout([("s1", 2), ("s2", 2)]), amps)


class TestPartialTrace:
    def test_epr_reduction_is_maximally_mixed(self):
        rho1 = hb.partial_trace(epr_state().density(), keep={"s1"})
        assert np.allclose(rho1.matrix, 0.5 * np.eye(2), atol=1e-14)

    def test_product_state_factorizes(self):
        rng = np.random.default_rng(3)
        a = random_state([("A", 2)], rng)
        b = random_state([("B", 3)], rng)
        rho = hb.tensor([a, b]).density()
        back = hb.partial_trace(rho, keep={"A"})
        assert np.allclose(back.matrix, a.density().matrix, atol=1e-13)

    def test_local_statistics_match_global(self):
        # oracle: full-space expectation <psi| O x I |psi>, 100 random cases
        rng = np.random.default_rng(5)
        layout = hb.SpaceLayout([("q1", 2), ("q2", 2), ("q3", 2)])
        for _ in range(100):
            psi = random_state(layout, rng)
            keep = rng.choice(["q1", "q2", "q3"])
            rho1 = hb.partial_trace(psi.density(), keep={keep})
            o1 = hb.Observable(hb.SpaceLayout([(keep, 2)]), random_hermitian(2, rng))
            big = hb.embed(o1, layout)
            lhs = hb.expectation(rho1, o1)
            rhs = np.vdot(psi.amplitudes, big.matrix @ psi.amplitudes).real
            assert abs(lhs - rhs) < 1e-10

    def test_unknown_label(self):
        with pytest.raises(LabelNotFound):
            hb.partial_trace(epr_state().density(), keep={"nope"})

    def test_preserves_trace_and_hermiticity(self):
        rng = np.random.default_rng(8)
        layout = hb.SpaceLayout([("a", 2), ("b", 3), ("c", 2)])
        for _ in range(25):
            psi = random_state(layout, rng)
            red = hb.partial_trace(psi.density(), keep={"b"})
            assert abs(red.matrix.trace() - 1.0) < 1e-12
            assert np.max(np.abs(red.matrix - red.matrix.conj().T)) < 1e-12

    def test_reduce_pure_matches_partial_trace(self):
        rng = np.random.default_rng(21)
        layout = hb.SpaceLayout([("a", 2), ("b", 2), ("c", 3)])
        psi = random_state(layout, rng)
        fast = hb.reduce_pure(psi, keep={"a", "c"})
        slow = hb.partial_trace(psi.density(), keep={"a", "c"})
        assert np.allclose(fast.matrix, slow.matrix, atol=1e-13)


# ---------------------------------------------------------------------------
# expectation
# ---------------------------------------------------------------------------

PAULI_Z = np.diag([1.0, -1.0])
PAULI_X = np.array([[0, 1], [1, 0]], dtype=float)


class TestExpectation:
    def test_eigenstate(self):
        rho = hb.basis_state([("S", 2)], 0).density()
        obs = hb.Observable(rho.layout, PAULI_Z)
        assert hb.expectation(rho, obs) == pytest.approx(1.0, abs=1e-14)

    def test_maximally_mixed_traceless(self):
        rng = np.random.default_rng(2)
        rho = hb.DensityOperator(hb.SpaceLayout([("S", 2)]), 0.5 * np.eye(2))
        h = random_hermitian(2, rng)
        h -= np.eye(2) * h.trace() / 2
        obs = hb.Observable(rho.layout, h)
        assert abs(hb.expectation(rho, obs)) < 1e-12

    def test_decohered_mixture_expectation(self):
        # oracle: the direct sum  sum_n |c_n|^2 lambda_n
        rng = np.random.default_rng(9)
        c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        c /= np.linalg.norm(c)
        lam = rng.standard_normal(3)
        rho = hb.DensityOperator(hb.SpaceLayout([("SA", 3)]), np.diag(np.abs(c) ** 2))
        obs = hb.Observable(rho.layout, np.diag(lam))
        expected = float(np.sum(np.abs(c) ** 2 * lam))
        assert hb.expectation(rho, obs) == pytest.approx(expected, abs=1e-12)

    def test_layout_mismatch(self):
        rho = hb.basis_state([("S", 2)], 0).density()
        obs = hb.Observable(hb.SpaceLayout([("A", 2)]), PAULI_Z)
        with pytest.raises(LayoutMismatch):
            hb.expectation(rho, obs)


# ---------------------------------------------------------------------------
# Schmidt decomposition
# ---------------------------------------------------------------------------

class TestSchmidt:
    def test_product_state_is_rank_one(self):
        rng = np.random.default_rng(4)
        psi = hb.tensor([random_state([("A", 2)], rng), random_state([("B", 3)], rng)])
        dec = hb.schmidt(psi, ({"A"}, {"B"}))
        assert dec.rank == 1
        assert dec.coefficients[0] == pytest.approx(1.0, abs=1e-12)

    def test_epr_singlet_coefficients(self):
        dec = hb.schmidt(epr_state(), ({"s1"}, {"s2"}))
        assert np.allclose(dec.coefficients, [RT2, RT2], atol=1e-12)

    def test_random_two_qutrit_reconstruction(self):
        # oracle 1: reconstruction; oracle 2: sqrt-eigenvalues of the reduced
        # density matrix (independent of the SVD route)
        rng = np.random.default_rng(6)
        layout = hb.SpaceLayout([("A", 3), ("B", 3)])
        psi = random_state(layout, rng)
        dec = hb.schmidt(psi, ({"A"}, {"B"}))
        rec = sum(c * np.kron(l, r) for c, l, r in
                  zip(dec.coefficients, dec.left_basis, dec.right_basis))
        assert np.linalg.norm(rec - psi.amplitudes) < 1e-10
        red = hb.partial_trace(psi.density(), keep={"A"})
        sv_oracle = np.sqrt(np.maximum(np.linalg.eigvalsh(red.matrix)[::-1], 0.0))
        assert np.allclose(dec.coefficients, sv_oracle[:dec.rank], atol=1e-10)

    def test_reduced_spectra_match_coefficients(self):
        rng = np.random.default_rng(10)
        layout = hb.SpaceLayout([("A", 2), ("B", 4)])
        for _ in range(10):
            psi = random_state(layout, rng)
            dec = hb.schmidt(psi, ({"A"}, {"B"}))
            want = np.sort(dec.coefficients ** 2)[::-1]
            for side in ("A", "B"):
                lam = np.sort(np.linalg.eigvalsh(
                    hb.partial_trace(psi.density(), keep={side}).matrix))[::-1]
                assert np.allclose(lam[:len(want)], want, atol=1e-10)

    def test_reconstruction_up_to_dim_64(self):
        rng = np.random.default_rng(12)
        for dims in [(2, 2), (4, 4), (8, 8), (2, 32)]:
            layout = hb.SpaceLayout([("L", dims[0]), ("R", dims[1])])
            psi = random_state(layout, rng)
            dec = hb.schmidt(psi, ({"L"}, {"R"}))
            rec = sum(c * np.kron(l, r) for c, l, r in
                      zip(dec.coefficients, dec.left_basis, dec.right_basis))
            assert np.linalg.norm(rec - psi.amplitudes) < 1e-10

    def test_bad_bipartition(self):
        with pytest.raises(BadBipartition):
            hb.schmidt(epr_state(), ({"s1"}, {"s1", "s2"}))


# ---------------------------------------------------------------------------
# tridecomposition search
# ---------------------------------------------------------------------------

class TestTridecomposition:
    def test_ghz_found(self):
        amps = np.zeros(8, dtype=complex)
        amps[0] = amps[7] = RT2
        psi = hb.PureState(hb.SpaceLayout([("a", 2), ("b", 2), ("c", 2)]), amps)
        dec = hb.tridecomposition_search(psi, ({"a"}, {"b"}, {"c"}), tol=1e-8,
                                         restarts=20)
        assert dec is not None
        got = np.sort(np.abs(dec.coefficients))[::-1]
        assert np.allclose(got, [RT2, RT2], atol=1e-7)
        assert np.linalg.norm(dec.reconstruct() - psi.amplitudes) < 1e-7

    def test_product_state_single_term(self):
        psi = hb.basis_state([("a", 2), ("b", 2), ("c", 2)], 0)
        dec = hb.tridecomposition_search(psi, ({"a"}, {"b"}, {"c"}), tol=1e-8,
                                         restarts=10)
        assert dec is not None
        mags = np.sort(np.abs(dec.coefficients))[::-1]
        assert mags[0] == pytest.approx(1.0, abs=1e-8)
        assert np.all(mags[1:] < 1e-7)

    def test_w_state_absent(self):
        # oracle: the alternating search itself, exhausted over 200 restarts
        amps = np.zeros(8, dtype=complex)
        amps[[1, 2, 4]] = 1.0 / np.sqrt(3.0)
        psi = hb.PureState(hb.SpaceLayout([("a", 2), ("b", 2), ("c", 2)]), amps)
        dec = hb.tridecomposition_search(psi, ({"a"}, {"b"}, {"c"}), tol=1e-6,
                                         restarts=200, max_iter=120)
        assert dec is None


# ---------------------------------------------------------------------------
# purity / entropy / evolve
# ---------------------------------------------------------------------------

class TestPurityEntropy:
    def test_pure_state(self):
        rng = np.random.default_rng(13)
        rho = random_state([("S", 3)], rng).density()
        assert hb.purity(rho) == pytest.approx(1.0, abs=1e-12)
        assert hb.vn_entropy(rho) == pytest.approx(0.0, abs=1e-10)

    def test_maximally_mixed_qubit(self):
        rho = hb.DensityOperator(hb.SpaceLayout([("S", 2)]), 0.5 * np.eye(2))
        assert hb.purity(rho) == pytest.approx(0.5, abs=1e-14)
        assert hb.vn_entropy(rho) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_dephased_qubit_purity(self):
        # oracle: direct computation from the dephased 2x2 matrix (z -> 0)
        a, b = 0.6, 0.8
        rho = hb.DensityOperator(hb.SpaceLayout([("S", 2)]),
                                 np.diag([a ** 2, b ** 2]))
        assert hb.purity(rho) == pytest.approx(a ** 4 + b ** 4, abs=1e-12)


class TestEvolve:
    def test_zero_time_is_identity(self):
        rng = np.random.default_rng(14)
        psi = random_state([("S", 4)], rng)
        h = hb.Observable(psi.layout, random_hermitian(4, rng))
        out = hb.evolve(psi, h, 0.0)
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-14)

    def test_diagonal_h_phases_only(self):
        h = hb.Observable(hb.SpaceLayout([("S", 2)]), PAULI_Z)
        psi = hb.basis_state([("S", 2)], 1)
        out = hb.evolve(psi, h, 1.3)
        assert np.allclose(np.abs(out.amplitudes), np.abs(psi.amplitudes), atol=1e-14)
        assert out.amplitudes[1] == pytest.approx(np.exp(1.3j), abs=1e-12)

    def test_composition(self):
        # oracle: evolve(t/2) twice equals evolve(t)
        rng = np.random.default_rng(15)
        layout = hb.SpaceLayout([("q1", 2), ("q2", 2), ("q3", 2)])
        psi = random_state(layout, rng)
        h = hb.Observable(layout, random_hermitian(8, rng))
        t = 0.7
        once = hb.evolve(psi, h, t)
        twice = hb.evolve(hb.evolve(psi, h, t / 2), h, t / 2)
        assert np.linalg.norm(once.amplitudes - twice.amplitudes) < 1e-9

    def test_unitarity_preserves_purity(self):
        rng = np.random.default_rng(16)
        layout = hb.SpaceLayout([("a", 2), ("b", 2)])
        for _ in range(10):
            psi = random_state(layout, rng)
            rho = hb.partial_trace(psi.density(), keep={"a"})
            full = psi.density()
            h = hb.Observable(layout, random_hermitian(4, rng))
            evolved = hb.evolve(full, h, rng.uniform(0, 3))
            assert abs(hb.purity(evolved) - hb.purity(full)) < 1e-10

    def test_layout_mismatch(self):
        psi = hb.basis_state([("S", 2)], 0)
        h = hb.Observable(hb.SpaceLayout([("A", 2)]), PAULI_Z)
        with pytest.raises(LayoutMismatch):
            hb.evolve(psi, h, 1.0)


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

class TestEmbed:
    def test_embed_middle_factor(self):
        layout = hb.SpaceLayout([("a", 2), ("b", 2), ("c", 2)])
        ob = hb.Observable(hb.SpaceLayout([("b", 2)]), PAULI_X)
        big = hb.embed(ob, layout)
        want = np.kron(np.kron(np.eye(2), PAULI_X), np.eye(2))
        assert np.allclose(big.matrix, want)

    def test_embed_permuted_factor_order(self):
        # operator factors listed in a different order than the target layout
        rng = np.random.default_rng(20)
        layout = hb.SpaceLayout([("a", 2), ("b", 3), ("c", 2)])
        m = random_hermitian(4, rng)
        op_ca = hb.Observable(hb.SpaceLayout([("c", 2), ("a", 2)]), m)
        big = hb.embed(op_ca, layout)
        for _ in range(6):
            va = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            vb = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            vc = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            full = np.kron(np.kron(va, vb), vc)
            lhs = np.vdot(full, big.matrix @ full)
            ca = np.kron(vc, va)
            rhs = np.vdot(ca, m @ ca) * np.vdot(vb, vb)
            assert abs(lhs - rhs) < 1e-10

    def test_embed_non_adjacent_pair(self):
        layout = hb.SpaceLayout([("a", 2), ("b", 3), ("c", 2)])
        rng = np.random.default_rng(17)
        m = random_hermitian(4, rng)
        ob = hb.Observable(hb.SpaceLayout([("a", 2), ("c", 2)]), m)
        big = hb.embed(ob, layout)
        # oracle: contract with random product states on every factor
        for _ in range(5):
            va = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            vb = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            vc = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            full = np.kron(np.kron(va, vb), vc)
            lhs = np.vdot(full, big.matrix @ full)
            ac = np.kron(va, vc)
            rhs = np.vdot(ac, m @ ac) * np.vdot(vb, vb)
            assert abs(lhs - rhs) < 1e-10


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

class TestSerialization:
    def test_state_round_trip(self, tmp_path):
        rng = np.random.default_rng(18)
        psi = random_state([("S", 2), ("E", 3)], rng)
        path = tmp_path / "state.txt"
        hb.save_state(path, psi)
        back = hb.load_state(path)
        assert back.layout == psi.layout
        assert np.array_equal(back.amplitudes, psi.amplitudes)

    def test_operator_round_trip(self, tmp_path):
        rng = np.random.default_rng(19)
        layout = hb.SpaceLayout([("S", 3)])
        op = hb.Observable(layout, random_hermitian(3, rng))
        path = tmp_path / "op.txt"
        hb.save_operator(path, op)
        back = hb.load_observable(path)
        assert back.layout == layout
        assert np.array_equal(back.matrix, op.matrix)

    def test_header_format(self, tmp_path):
        psi = hb.basis_state([("S", 2), ("E", 3)], 0)
        text = hb.dumps_array(psi.layout, psi.amplitudes)
        assert text.splitlines()[0] == "layout: S:2,E:3"
        assert text.splitlines()[1] == "1.0,0.0"
