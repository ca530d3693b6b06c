import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from decolab import dynamics as dy
from decolab import rng as drng
from decolab.errors import NodeProximity, StepRejected


def packet(center=0.0, width=1.0, momentum=0.0, n=256, dx=0.08, mass=1.0):
    x_min = -0.5 * n * dx
    return dy.gaussian_packet(x_min, dx, n, center, width, momentum, mass)


def two_packets(w1, w2, d=6.0, width=0.6, n=512, dx=0.06):
    x_min = -0.5 * n * dx
    x = x_min + dx * np.arange(n)
    vals = (math.sqrt(w1) * np.exp(-((x + d) ** 2) / (4 * width ** 2))
            / (2 * math.pi * width ** 2) ** 0.25
            + math.sqrt(w2) * np.exp(-((x - d) ** 2) / (4 * width ** 2))
            / (2 * math.pi * width ** 2) ** 0.25)
    return dy.normalize(x_min, dx, vals)


class TestGridWavefunction:
    def test_norm_enforced(self):
        with pytest.raises(ValueError):
            dy.GridWavefunction(-1.0, 0.1, np.ones(32))

    def test_gaussian_packet_normalized(self):
        psi = packet(width=0.7)
        assert abs(np.sum(psi.density()) * psi.dx - 1.0) < 1e-10

    def test_free_evolution_preserves_norm_and_spreads(self):
        psi = packet(width=0.8)
        out = dy.free_evolve(psi, 2.0)
        assert abs(np.sum(out.density()) * out.dx - 1.0) < 1e-12
        var0 = np.sum(psi.x ** 2 * psi.density()) * psi.dx
        var1 = np.sum(out.x ** 2 * out.density()) * out.dx
        assert var1 > var0 * 1.5

    def test_free_evolution_matches_analytic_width(self):
        # oracle: analytic spreading sigma^2(t) = sigma^2 + (t / (2 m sigma))^2
        sigma, t = 1.0, 2.0
        psi = packet(width=sigma, n=512, dx=0.06)
        out = dy.free_evolve(psi, t)
        var = np.sum(out.x ** 2 * out.density()) * out.dx
        want = sigma ** 2 + (t / (2.0 * sigma)) ** 2
        assert var == pytest.approx(want, rel=1e-3)


class TestGRWParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            dy.GRWParams(nu=0.0, delta=1.0, n_particles=1)

    def test_paper_preset_exact_interhit_time(self):
        p = dy.PAPER_MACROSCOPIC
        assert p.hit_rate() == Fraction(10 ** 23, 10 ** 16)
        assert p.mean_interhit_time() == Fraction(1, 10 ** 7)
        assert float(p.mean_interhit_time()) == 1e-7

    def test_desk_rescaling_factor(self):
        desk, factor = dy.desk_rescaled(dy.PAPER_MACROSCOPIC, target_rate=50.0)
        assert desk.hit_rate() == 50.0
        assert factor == pytest.approx(1e7 / 50.0, rel=1e-12)


class TestGRWHit:
    def test_narrow_packet_barely_changes(self):
        # packet much narrower than the localization width
        psi = packet(center=1.5, width=0.05, n=512, dx=0.02)
        params = dy.GRWParams(nu=1.0, delta=2.0, n_particles=1)
        rng = drng.stream(7)
        psi2, event = dy.grw_hit(psi, params, rng)
        fidelity = abs(np.vdot(psi.values, psi2.values)) * psi.dx
        assert fidelity > 0.99
        assert abs(event.center - 1.5) < 3.0 * 2.0

    def test_two_packet_branch_frequencies(self):
        # oracle: binomial statistics of which branch survives the hit
        w1, w2 = 0.3, 0.7
        psi = two_packets(w1, w2, d=6.0, width=0.6)
        params = dy.GRWParams(nu=1.0, delta=0.8, n_particles=1)
        centers = dy.sample_hit_centers(psi, params, drng.stream(11), 10_000)
        f1 = float(np.mean(centers < 0))
        sigma = math.sqrt(w1 * w2 / 10_000)
        assert abs(f1 - w1) < 3.0 * sigma

    def test_hit_collapses_to_one_branch(self):
        psi = two_packets(0.5, 0.5)
        params = dy.GRWParams(nu=1.0, delta=0.8, n_particles=1)
        rng = drng.stream(3)
        psi2, event = dy.grw_hit(psi, params, rng)
        side = psi2.x > 0 if event.center > 0 else psi2.x < 0
        assert np.sum(psi2.density()[side]) * psi2.dx > 0.95

    def test_uniform_state_uniform_centers(self):
        n, dx = 512, 0.05
        vals = np.ones(n, dtype=complex)
        psi = dy.normalize(-0.5 * n * dx, dx, vals)
        params = dy.GRWParams(nu=1.0, delta=0.4, n_particles=1)
        w = dy.hit_center_density(psi, params)
        # interior weights are flat; edges lose kernel mass
        margin = int(4 * params.delta / dx)
        interior = w[margin:-margin]
        assert np.max(np.abs(interior / np.mean(interior) - 1.0)) < 1e-6

    def test_center_distribution_matches_density(self):
        # oracle: exact discrete CDF by quadrature vs empirical CDF (KS)
        psi = two_packets(0.4, 0.6, d=4.0, width=0.9)
        params = dy.GRWParams(nu=1.0, delta=1.1, n_particles=1)
        samples = dy.sample_hit_centers(psi, params, drng.stream(21), 10_000)
        w = dy.hit_center_density(psi, params)
        exact_cdf = np.cumsum(w)
        emp = np.searchsorted(np.sort(samples), psi.x, side="right") / len(samples)
        ks = float(np.max(np.abs(emp - exact_cdf)))
        assert ks < 0.02

    def test_renormalized_exactly(self):
        psi = two_packets(0.5, 0.5)
        params = dy.GRWParams(nu=1.0, delta=0.8, n_particles=1)
        psi2, _ = dy.grw_hit(psi, params, drng.stream(5))
        assert abs(np.sum(psi2.density()) * psi2.dx - 1.0) < 1e-12


class TestGRWRun:
    def test_zero_rate_is_pure_schroedinger(self):
        psi = packet(width=0.8)
        params = dy.GRWParams(nu=1e-300, delta=1.0, n_particles=1)
        run = dy.grw_run(psi, params, 1.5, drng.stream(1))
        assert len(run.events) == 0
        want = dy.free_evolve(psi, 1.5)
        assert np.max(np.abs(run.final.values - want.values)) < 1e-10

    def test_event_count_poisson(self):
        # oracle: Poisson statistics at rate * t_end = 100
        psi = packet(width=1.0)
        params = dy.GRWParams(nu=50.0, delta=1.0, n_particles=1)
        run = dy.grw_run(psi, params, 2.0, drng.stream(2), keep_snapshots=False)
        mean = 100.0
        assert abs(len(run.events) - mean) < 3.0 * math.sqrt(mean)

    def test_event_times_nondecreasing(self):
        psi = packet(width=1.0)
        params = dy.GRWParams(nu=20.0, delta=1.0, n_particles=1)
        run = dy.grw_run(psi, params, 1.0, drng.stream(4), keep_snapshots=False)
        ts = [e.time for e in run.events]
        assert all(t2 >= t1 for t1, t2 in zip(ts, ts[1:]))

    def test_multi_particle_rate(self):
        psi = packet(width=1.0)
        params = dy.GRWParams(nu=5.0, delta=1.0, n_particles=8)
        run = dy.grw_run(psi, params, 2.0, drng.stream(9), keep_snapshots=False)
        mean = 80.0
        assert abs(len(run.events) - mean) < 3.0 * math.sqrt(mean)
        assert all(0 <= e.particle < 8 for e in run.events)


class TestMasterEquation:
    def grid(self, n=128, dx=0.15):
        return (-0.5 * n * dx) + dx * np.arange(n)

    def test_pure_decay_law_entrywise(self):
        # with the kinetic term off the solution is the exact entrywise law
        x = self.grid()
        psi = two_packets(0.5, 0.5, d=4.0, width=0.7, n=len(x), dx=x[1] - x[0])
        rho0 = np.outer(psi.values, psi.values.conj())
        lam, dt, steps = 0.3, 1e-3, 1000
        rho = rho0.copy()
        for _ in range(steps):
            rho = dy.master_step(rho, x, 1.0, lam, dt, kinetic_enabled=False)
        want = rho0 * np.exp(-lam * np.subtract.outer(x, x) ** 2 * (dt * steps))
        assert np.max(np.abs(rho - want)) < 1e-8

    def test_unitary_limit_preserves_purity(self):
        x = self.grid()
        psi = packet(width=1.0, n=len(x), dx=x[1] - x[0])
        rho = np.outer(psi.values, psi.values.conj())
        dx = x[1] - x[0]
        p0 = dy.grid_purity(rho, dx)
        for _ in range(1000):
            rho = dy.master_step(rho, x, 1.0, 0.0, 1e-3)
        assert abs(dy.grid_purity(rho, dx) - p0) < 1e-6

    def test_cat_state_coherence_decay_rate(self):
        # oracle: exponential fit against the entrywise analytic rate lam*d^2
        n, dx = 160, 0.15
        x = (-0.5 * n * dx) + dx * np.arange(n)
        d = 6.0
        psi = two_packets(0.5, 0.5, d=d / 2, width=0.5, n=n, dx=dx)
        rho = np.outer(psi.values, psi.values.conj())
        lam, dt = 0.02, 2e-3
        mass = 400.0  # heavy: kinetic spreading negligible over the fit window
        norms, ts = [], []
        for i in range(250):
            rho = dy.master_step(rho, x, mass, lam, dt)
            if i % 10 == 0:
                ts.append((i + 1) * dt)
                norms.append(dy.offdiagonal_patch_norm(rho, x, d / 2, -d / 2, 1.2))
        slope = np.polyfit(ts, np.log(norms), 1)[0]
        # patch norm is linear in rho entries: decay rate lam * d^2
        assert slope == pytest.approx(-lam * d * d, rel=0.05)

    def test_trace_and_hermiticity_per_step(self):
        x = self.grid()
        psi = two_packets(0.5, 0.5, n=len(x), dx=x[1] - x[0])
        rho = np.outer(psi.values, psi.values.conj())
        dx = x[1] - x[0]
        tr0 = dy.grid_trace(rho, dx)
        for _ in range(50):
            rho = dy.master_step(rho, x, 1.0, 0.1, 5e-3)
            assert abs(dy.grid_trace(rho, dx) - tr0) < 1e-8
            assert np.max(np.abs(rho - rho.conj().T)) < 1e-12

    def test_purity_monotone_with_localization(self):
        x = self.grid()
        psi = two_packets(0.5, 0.5, n=len(x), dx=x[1] - x[0])
        rho = np.outer(psi.values, psi.values.conj())
        dx = x[1] - x[0]
        prev = dy.grid_purity(rho, dx)
        for _ in range(200):
            rho = dy.master_step(rho, x, 1.0, 0.25, 5e-3)
            cur = dy.grid_purity(rho, dx)
            assert cur <= prev + 1e-10
            prev = cur

    def test_malformed_input_rejected(self):
        x = self.grid(n=32)
        rho = np.full((32, 32), np.nan, dtype=complex)
        with pytest.raises(StepRejected):
            dy.master_step(rho, x, 1.0, 0.1, 1e-3)


class TestBohmVelocity:
    def test_real_wavefunction_is_static(self):
        psi = packet(width=1.0)
        assert dy.bohm_velocity(psi, 0.3) == pytest.approx(0.0, abs=1e-12)
        assert np.max(np.abs(dy.velocity_field(psi))) < 1e-10

    def test_plane_wave_velocity(self):
        n, dx = 256, 0.05
        x = (-0.5 * n * dx) + dx * np.arange(n)
        k = 2.0 * math.pi * 2 / (n * dx)  # on-grid wavenumber, k*dx small
        psi = dy.normalize(x[0], dx, np.exp(1j * k * x), mass=1.0)
        v = dy.bohm_velocity(psi, 0.0)
        assert v == pytest.approx(k, rel=1e-3)

    def test_moving_packet_center_velocity(self):
        # oracle: analytic gradient of A(x) e^{ikx} at the envelope center
        k = 0.5
        psi = packet(center=0.0, width=1.5, momentum=k, n=512, dx=0.02, mass=2.0)
        v = dy.bohm_velocity(psi, 0.0)
        assert v == pytest.approx(k / 2.0, abs=1e-4)

    def test_node_proximity_raises(self):
        psi = packet(center=0.0, width=0.5, n=256, dx=0.08)
        with pytest.raises(NodeProximity):
            dy.bohm_velocity(psi, psi.x[0])  # far tail, below the floor


class TestBohmRun:
    def test_stationary_real_state_static_trajectories(self):
        psi = packet(width=1.0)
        ens = dy.quantum_equilibrium_ensemble(psi, 64, seed=5)
        out = dy.bohm_run(lambda t: psi, ens, 0.0, 1.0, 0.02)
        assert np.max(np.abs(out.paths[-1] - out.paths[0])) < 1e-10

    def test_equivariance_free_gaussian(self):
        # oracle: chi-squared of final positions against |psi(t_end)|^2
        sigma, t_end = 1.0, 2.0
        psi0 = packet(width=sigma, n=512, dx=0.08)
        ens = dy.quantum_equilibrium_ensemble(psi0, 10_000, seed=12)
        out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t), ens, 0.0, t_end, 0.01)
        assert out.escaped_count == 0
        final = out.final_positions()
        psi_t = dy.free_evolve(psi0, t_end)
        dens = psi_t.density() * psi_t.dx
        cdf = np.concatenate([[0.0], np.cumsum(dens)])
        cdf /= cdf[-1]
        edges_x = np.concatenate([[psi_t.x[0] - psi_t.dx], psi_t.x])
        n_bins = 25
        qs = np.linspace(0.0, 1.0, n_bins + 1)
        bin_edges = np.interp(qs, cdf, edges_x)
        observed, _ = np.histogram(final, bins=bin_edges)
        expected = np.full(n_bins, len(final) / n_bins)
        chi2, p = stats.chisquare(observed, expected)
        assert p > 0.01

    def test_no_crossing(self):
        psi0 = packet(width=1.0, n=256, dx=0.1)
        rng = np.random.default_rng(3)
        starts = np.sort(dy.sample_positions(psi0, 60, rng))
        out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t),
                          dy.BohmEnsemble(starts), 0.0, 2.0, 0.01)
        for row in out.paths:
            assert np.all(np.diff(row) > -1e-9)

    def test_double_slit_symmetry_barrier(self):
        psi0 = two_packets(0.5, 0.5, d=3.0, width=0.6, n=512, dx=0.05)
        ens = dy.quantum_equilibrium_ensemble(psi0, 400, seed=8)
        out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t), ens, 0.0, 1.5, 0.005)
        start_side = np.sign(out.paths[0])
        end_side = np.sign(out.paths[-1])
        ok = start_side != 0
        assert np.all(start_side[ok] == end_side[ok])

    def test_persistent_node_raises(self):
        # a trajectory pinned on a stationary node cannot be stepped past it
        n, dx = 256, 0.08
        x_min = -0.5 * n * dx
        x = x_min + dx * np.arange(n)
        vals = x * np.exp(-x ** 2 / 4.0)  # odd state: exact node at x = 0
        psi = dy.normalize(x_min, dx, vals)
        ens = dy.BohmEnsemble(np.array([0.0]))
        with pytest.raises(NodeProximity):
            dy.bohm_run(lambda t: psi, ens, 0.0, 0.5, 0.01)

    def test_escaped_trajectories_flagged(self):
        psi0 = packet(center=0.0, width=1.0, momentum=3.0, n=128, dx=0.07)
        ens = dy.BohmEnsemble(np.array([0.0, 1.0, 4.0]))
        out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t), ens, 0.0, 2.0, 0.01)
        assert out.escaped_count >= 1
        assert len(out.final_positions()) == 3 - out.escaped_count


class TestRngStreams:
    def test_streams_reproducible_and_independent(self):
        a1 = drng.stream(42, 0).random(5)
        a2 = drng.stream(42, 0).random(5)
        b = drng.stream(42, 1).random(5)
        assert np.array_equal(a1, a2)
        assert not np.array_equal(a1, b)
