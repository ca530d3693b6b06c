"""Alternative dynamics on 1-D grid wavefunctions: spontaneous localization
hits, the localization/dephasing master equation, and pilot-wave trajectories.

Units are hbar = 1 throughout; the physical parameter set quoted for
macroscopic matter (hit rate 1e-16 per second per particle, width 1e-5 cm,
1e23 particles) enters only through presets whose rate product is kept in
exact integer/fraction arithmetic, since a desk run cannot use those numbers
literally.  Grids are periodic: free evolution is a spectral phase and is
exact, as is the entrywise localization factor, so the split-step integrator
has no per-piece error.

Stochastic pieces draw from a caller-supplied counter-based generator stream
(see :mod:`decolab.rng`), which keeps runs reproducible under any scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import NodeProximity, NumericalUnderflow, StepRejected

NORM_TOL = 1e-8
NODE_FLOOR = 1e-12
MAX_HALVINGS = 20


# ---------------------------------------------------------------------------
# grid wavefunctions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridWavefunction:
    """Complex wavefunction sampled on a uniform periodic grid."""

    x_min: float
    dx: float
    values: np.ndarray = field(repr=False)
    mass: float = 1.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        object.__setattr__(self, "values", vals)
        if len(vals) < 16:
            raise ValueError("grid needs at least 16 points")
        if self.dx <= 0 or self.mass <= 0:
            raise ValueError("dx and mass must be positive")
        norm = np.sum(np.abs(vals) ** 2) * self.dx
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        vals.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def with_values(self, vals: np.ndarray) -> "GridWavefunction":
        return GridWavefunction(self.x_min, self.dx, vals, self.mass)


def normalize(x_min: float, dx: float, vals, mass: float = 1.0) -> GridWavefunction:
    vals = np.asarray(vals, dtype=complex)
    nrm = math.sqrt(float(np.sum(np.abs(vals) ** 2)) * dx)
    if nrm < 1e-150:
        raise NumericalUnderflow("cannot normalize an (almost) zero vector")
    return GridWavefunction(x_min, dx, vals / nrm, mass)


def gaussian_packet(x_min: float, dx: float, n: int, center: float,
                    width: float, momentum: float = 0.0,
                    mass: float = 1.0) -> GridWavefunction:
    x = x_min + dx * np.arange(n)
    vals = np.exp(-((x - center) ** 2) / (4.0 * width ** 2) + 1j * momentum * x)
    return normalize(x_min, dx, vals, mass)


def free_evolve(psi: GridWavefunction, t: float) -> GridWavefunction:
    """Exact free propagation via the spectral phase e^{-i k^2 t / 2m}."""
    k = 2.0 * np.pi * np.fft.fftfreq(psi.n, psi.dx)
    vals = np.fft.ifft(np.fft.fft(psi.values) * np.exp(-0.5j * k ** 2 * t / psi.mass))
    return psi.with_values(vals)


# ---------------------------------------------------------------------------
# spontaneous localization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GRWParams:
    """Hit rate per particle, localization width, and particle count.

    ``nu`` and ``n_particles`` may be exact (int / Fraction) so that the
    total rate and mean inter-hit time stay exact; floats work too.
    """

    nu: object
    delta: float
    n_particles: int

    def __post_init__(self):
        if not (self.nu > 0 and self.delta > 0 and self.n_particles >= 1):
            raise ValueError("need nu > 0, delta > 0, n_particles >= 1")

    def hit_rate(self):
        """Total rate N * nu; exact when the fields are exact."""
        return self.n_particles * self.nu

    def mean_interhit_time(self):
        rate = self.hit_rate()
        if isinstance(rate, Fraction) or isinstance(rate, int):
            return Fraction(1, 1) / rate
        return 1.0 / rate


#: Published macroscopic parameter point, kept exact: 1e23 particles at
#: 1e-16 hits per second each localize every 1e-7 seconds on average.
PAPER_MACROSCOPIC = GRWParams(nu=Fraction(1, 10 ** 16), delta=1e-5,
                              n_particles=10 ** 23)


def desk_rescaled(preset: GRWParams, target_rate: float = 50.0) -> tuple[GRWParams, float]:
    """Desk-scale parameters with the same width, plus the applied rate factor.

    The returned factor is (preset rate) / (desk rate); the desk run keeps
    the N*nu product semantics by folding everything into a single particle.
    """
    factor = float(preset.hit_rate() / Fraction(target_rate).limit_denominator(10 ** 9)) \
        if isinstance(preset.hit_rate(), Fraction) else float(preset.hit_rate()) / target_rate
    return GRWParams(nu=target_rate, delta=preset.delta, n_particles=1), factor


@dataclass(frozen=True)
class HitEvent:
    time: float
    center: float
    particle: int


def hit_center_density(psi: GridWavefunction, params: GRWParams) -> np.ndarray:
    """Probability weights for the hit center over the grid points.

    w(X) is the squared norm of the Gaussian-multiplied state,
    integral |psi(x)|^2 exp(-(X-x)^2 / Delta^2) dx, discretized on the grid
    of candidate centers and normalized to sum to one.
    """
    x = psi.x
    kernel = np.exp(-np.subtract.outer(x, x) ** 2 / params.delta ** 2)
    w = kernel @ psi.density()
    total = float(np.sum(w))
    if total <= 0.0:
        raise NumericalUnderflow("hit-center density vanished")
    return w / total


def sample_hit_centers(psi: GridWavefunction, params: GRWParams,
                       rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw hit centers by inverse CDF over the discretized density."""
    w = hit_center_density(psi, params)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(size))
    return psi.x[idx]


def grw_hit(psi: GridWavefunction, params: GRWParams, rng: np.random.Generator,
            time: float = 0.0) -> tuple[GridWavefunction, HitEvent]:
    """One localization hit: sample a center, multiply, renormalize.

    The hit particle index is drawn uniformly (the prescription leaves the
    choice open); on this single-coordinate grid every hit acts on the
    represented coordinate.
    """
    center = float(sample_hit_centers(psi, params, rng, 1)[0])
    particle = int(rng.integers(0, params.n_particles))
    gauss = np.exp(-((center - psi.x) ** 2) / (2.0 * params.delta ** 2))
    vals = psi.values * gauss
    nrm = math.sqrt(float(np.sum(np.abs(vals) ** 2)) * psi.dx)
    if nrm < 1e-150:
        raise NumericalUnderflow("post-hit state underflowed")
    return psi.with_values(vals / nrm), HitEvent(float(time), center, particle)


@dataclass(frozen=True)
class GRWRun:
    events: tuple[HitEvent, ...]
    snapshots: tuple[tuple[float, GridWavefunction], ...]
    final: GridWavefunction


def grw_run(psi0: GridWavefunction, params: GRWParams, t_end: float,
            rng: np.random.Generator, keep_snapshots: bool = True) -> GRWRun:
    """Free evolution punctuated by Poisson-distributed localization hits.

    Inter-arrival times are exponential at the total rate N * nu; between
    hits the state propagates freely (exact spectral step).
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    rate = float(params.hit_rate())
    t = 0.0
    psi = psi0
    events: list[HitEvent] = []
    snaps: list[tuple[float, GridWavefunction]] = [(0.0, psi0)]
    while True:
        wait = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        if t + wait >= t_end:
            psi = free_evolve(psi, t_end - t)
            break
        t += wait
        psi = free_evolve(psi, wait)
        psi, event = grw_hit(psi, params, rng, time=t)
        events.append(event)
        if keep_snapshots:
            snaps.append((t, psi))
    snaps.append((t_end, psi))
    return GRWRun(tuple(events), tuple(snaps) if keep_snapshots else (), psi)


# ---------------------------------------------------------------------------
# localization / dephasing master equation
# ---------------------------------------------------------------------------

def master_step(rho: np.ndarray, x: np.ndarray, mass: float, lam: float,
                dt: float, kinetic_enabled: bool = True) -> np.ndarray:
    """One split step of d(rho)/dt = -i[p^2/2m, rho] - lam (x-x')^2 rho.

    Both pieces are applied exactly (entrywise decay factor; spectral
    kinetic conjugation), Strang-ordered, so the only error is the O(dt^3)
    splitting commutator per step and the integrator is unconditionally
    stable.  Hermiticity and the trace are preserved to roundoff; a trace
    drift beyond 1e-4 (malformed input) rejects the step.
    """
    rho = np.asarray(rho, dtype=complex)
    n = len(x)
    if rho.shape != (n, n):
        raise ValueError("rho must be square on the given grid")
    dx = float(x[1] - x[0])
    trace_before = float(np.trace(rho).real) * dx

    decay = np.exp(-lam * np.subtract.outer(x, x) ** 2 * (dt / 2.0 if kinetic_enabled else dt))
    out = rho * decay
    if kinetic_enabled:
        k = 2.0 * np.pi * np.fft.fftfreq(n, dx)
        phase = np.exp(-0.5j * k ** 2 * dt / mass)

        def apply_u(m):
            return np.fft.ifft(phase[:, None] * np.fft.fft(m, axis=0), axis=0)

        out = apply_u(apply_u(out).conj().T).conj().T
        out = out * decay
    out = 0.5 * (out + out.conj().T)
    trace_after = float(np.trace(out).real) * dx
    if not math.isfinite(trace_after) or \
            abs(trace_after - trace_before) > 1e-4 * max(1.0, abs(trace_before)):
        raise StepRejected(f"trace drifted {trace_before} -> {trace_after}")
    return out


def grid_trace(rho: np.ndarray, dx: float) -> float:
    return float(np.trace(rho).real) * dx


def grid_purity(rho: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(rho) ** 2)) * dx * dx


def offdiagonal_patch_norm(rho: np.ndarray, x: np.ndarray, center_x: float,
                           center_xp: float, half_width: float) -> float:
    """Frobenius norm of rho over a square patch around (x, x').

    Tracks the decay of a specific coherence lobe, e.g. the cross peak of a
    two-packet cat state.
    """
    ix = np.abs(x - center_x) <= half_width
    ixp = np.abs(x - center_xp) <= half_width
    return float(np.linalg.norm(rho[np.ix_(ix, ixp)]))


# ---------------------------------------------------------------------------
# pilot-wave trajectories
# ---------------------------------------------------------------------------

def velocity_field(psi: GridWavefunction) -> np.ndarray:
    """Guiding velocity Im(psi* psi') / (m |psi|^2) on the grid.

    The gradient is a centered finite difference with periodic wrap; points
    where |psi|^2 is below the node floor get zero velocity here (per-query
    node handling lives in the integrator and bohm_velocity).
    """
    vals = psi.values
    grad = (np.roll(vals, -1) - np.roll(vals, 1)) / (2.0 * psi.dx)
    dens = np.abs(vals) ** 2
    out = np.zeros(psi.n)
    ok = dens > NODE_FLOOR
    out[ok] = np.imag(np.conj(vals[ok]) * grad[ok]) / (psi.mass * dens[ok])
    return out


def bohm_velocity(psi: GridWavefunction, q: float) -> float:
    """Guiding velocity at a single position, interpolated from the grid."""
    dens = float(np.interp(q, psi.x, psi.density()))
    if dens < NODE_FLOOR:
        raise NodeProximity(f"|psi({q})|^2 = {dens:.3e} below the node floor")
    return float(np.interp(q, psi.x, velocity_field(psi)))


def sample_positions(psi: GridWavefunction, size: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw positions from |psi|^2 by inverse CDF with in-cell interpolation."""
    w = psi.density() * psi.dx
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    u = rng.random(size)
    idx = np.searchsorted(cdf, u)
    lo = np.where(idx > 0, cdf[np.maximum(idx - 1, 0)], 0.0)
    frac = np.clip((u - lo) / np.maximum(cdf[idx] - lo, 1e-300), 0.0, 1.0)
    return psi.x[idx] - psi.dx + frac * psi.dx


@dataclass(frozen=True)
class BohmEnsemble:
    positions: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions",
                           np.asarray(self.positions, dtype=float).reshape(-1))


def quantum_equilibrium_ensemble(psi: GridWavefunction, size: int,
                                 seed: int) -> BohmEnsemble:
    rng = np.random.default_rng(seed)
    return BohmEnsemble(sample_positions(psi, size, rng), seed)


@dataclass(frozen=True)
class BohmTrajectories:
    times: np.ndarray
    paths: np.ndarray           # shape (n_times, n_trajectories)
    escaped: np.ndarray         # bool per trajectory
    escaped_count: int

    def final_positions(self, include_escaped: bool = False) -> np.ndarray:
        if include_escaped:
            return self.paths[-1]
        return self.paths[-1][~self.escaped]


def _advance(pos, dt, psi_a, psi_b, x_lo, x_hi, depth=0):
    """Midpoint step against the field at the start and midpoint snapshots.

    Trajectories that probe a node region retry with halved sub-steps (the
    snapshots are reused, which is adequate because halving only triggers in
    regions the flow leaves quickly), giving up after MAX_HALVINGS.
    """
    v_grid_a = velocity_field(psi_a)
    v_grid_b = velocity_field(psi_b)
    dens_a = psi_a.density()
    dens_b = psi_b.density()

    def step_once(p, h):
        mid = p + 0.5 * h * np.interp(p, psi_a.x, v_grid_a)
        return p + h * np.interp(mid, psi_b.x, v_grid_b), mid

    new, mid = step_once(pos, dt)
    bad = (np.interp(pos, psi_a.x, dens_a) < NODE_FLOOR) \
        | (np.interp(mid, psi_b.x, dens_b) < NODE_FLOOR)
    if not np.any(bad):
        return new
    if depth >= MAX_HALVINGS:
        raise NodeProximity("node region persisted after maximum step halving")
    half = _advance(pos[bad], dt / 2.0, psi_a, psi_b, x_lo, x_hi, depth + 1)
    new[bad] = _advance(half, dt / 2.0, psi_a, psi_b, x_lo, x_hi, depth + 1)
    return new


def bohm_run(psi_of_t: Callable[[float], GridWavefunction],
             ensemble: BohmEnsemble, t0: float, t_end: float,
             dt: float) -> BohmTrajectories:
    """Integrate the ensemble along the guiding field of psi(t).

    Uses the midpoint scheme against the time-dependent state; trajectories
    leaving the grid are frozen, flagged, and excluded from final-position
    statistics (their count is reported).  If the initial positions sample
    |psi(t0)|^2, the final positions sample |psi(t_end)|^2 (equivariance).
    """
    if dt <= 0 or t_end <= t0:
        raise ValueError("need dt > 0 and t_end > t0")
    n_steps = int(round((t_end - t0) / dt))
    times = t0 + dt * np.arange(n_steps + 1)
    psi0 = psi_of_t(t0)
    x_lo, x_hi = psi0.x[0], psi0.x[-1]
    pos = ensemble.positions.copy()
    escaped = (pos < x_lo) | (pos > x_hi)
    paths = np.empty((n_steps + 1, len(pos)))
    paths[0] = pos
    for i in range(n_steps):
        t = times[i]
        psi_a = psi_of_t(t)
        psi_b = psi_of_t(t + 0.5 * dt)
        alive = ~escaped
        if np.any(alive):
            pos[alive] = _advance(pos[alive], dt, psi_a, psi_b, x_lo, x_hi)
        newly_out = (pos < x_lo) | (pos > x_hi)
        escaped |= newly_out
        pos = np.clip(pos, x_lo, x_hi)
        paths[i + 1] = pos
    return BohmTrajectories(times, paths, escaped, int(np.sum(escaped)))
