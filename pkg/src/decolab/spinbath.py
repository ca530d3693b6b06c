"""Exactly solvable dephasing model: one two-state system coupled to N
environment spins.

The interaction Hamiltonian is

    H = (|up><up| - |dn><dn|) (x) sum_k g_k (|up_k><up_k| - |dn_k><dn_k|),

with all self-Hamiltonians zero, so the model only dephases: populations are
frozen while the interference coefficient

    z(t) = <E_up(t)|E_dn(t)> = prod_k (|alpha_k|^2 e^{2 i g_k t}
                                       + |beta_k|^2 e^{-2 i g_k t})

damps the off-diagonal elements of the reduced 2x2 state.  Each environment
spin contributes a relative phase 2 g_k t between the two system branches
under the standard exp(-iHt) convention; all closed forms below use that
convention consistently, and the brute-force evolution is the oracle tying
them together.

Sign conventions differ across presentations of this model (the factor of
two in the phases and which branch overlap is called z); here everything is
derived from H above with exp(-iHt), which reproduces the displayed
|z(t)|^2 product law and the recurrence period pi/g exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert as hb
from .errors import NotHomogeneous, SizeGuard

AMP_TOL = 1e-12
BRUTE_FORCE_MAX_SPINS = 14
DENSE_HAMILTONIAN_MAX_SPINS = 10


@dataclass(frozen=True)
class SpinBathParams:
    """System amplitudes (a, b), couplings g_k, and environment amplitudes.

    ``env_amps`` holds one (alpha_k, beta_k) pair per environment spin.
    Normalization of (a, b) and of every pair is enforced at construction.
    """

    n_env: int
    a: complex
    b: complex
    couplings: np.ndarray = field(repr=False)
    env_amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.couplings, dtype=float).reshape(-1)
        amps = np.asarray(self.env_amps, dtype=complex).reshape(-1, 2)
        object.__setattr__(self, "couplings", g)
        object.__setattr__(self, "env_amps", amps)
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        if self.n_env < 1:
            raise ValueError("n_env must be positive")
        if g.shape != (self.n_env,) or amps.shape != (self.n_env, 2):
            raise ValueError("couplings/env_amps lengths do not match n_env")
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0) > AMP_TOL:
            raise ValueError("|a|^2 + |b|^2 must be 1")
        norms = np.abs(amps[:, 0]) ** 2 + np.abs(amps[:, 1]) ** 2
        if np.max(np.abs(norms - 1.0)) > AMP_TOL:
            raise ValueError("each (alpha_k, beta_k) pair must be normalized")
        g.setflags(write=False)
        amps.setflags(write=False)

    @property
    def alphas(self) -> np.ndarray:
        return self.env_amps[:, 0]

    @property
    def betas(self) -> np.ndarray:
        return self.env_amps[:, 1]


def random_params(n_env: int, rng: np.random.Generator,
                  a: complex | None = None, b: complex | None = None) -> SpinBathParams:
    """Draw model parameters: |alpha_k|^2 uniform in (0,1) with uniform
    phases on both amplitudes, couplings uniform in (0, 1]."""
    w = rng.uniform(0.0, 1.0, n_env)
    pa, pb = rng.uniform(0.0, 2 * np.pi, (2, n_env))
    amps = np.stack([np.sqrt(w) * np.exp(1j * pa),
                     np.sqrt(1.0 - w) * np.exp(1j * pb)], axis=1)
    g = rng.uniform(0.0, 1.0, n_env)
    g = np.where(g == 0.0, 1.0, g)
    if a is None:
        v = rng.uniform(0.0, 1.0)
        ph = rng.uniform(0.0, 2 * np.pi, 2)
        a = math.sqrt(v) * np.exp(1j * ph[0])
        b = math.sqrt(1.0 - v) * np.exp(1j * ph[1])
    return SpinBathParams(n_env, a, b, g, amps)


def homogeneous_params(n_env: int, alpha_sq: float, g: float,
                       a: complex = 1 / math.sqrt(2),
                       b: complex = 1 / math.sqrt(2)) -> SpinBathParams:
    """All spins share the same initial amplitudes and coupling."""
    alpha = math.sqrt(alpha_sq)
    beta = math.sqrt(1.0 - alpha_sq)
    amps = np.tile([alpha, beta], (n_env, 1)).astype(complex)
    return SpinBathParams(n_env, a, b, np.full(n_env, float(g)), amps)


# ---------------------------------------------------------------------------
# interference coefficient
# ---------------------------------------------------------------------------

def z_analytic(p: SpinBathParams, t):
    """Branch overlap <E_up(t)|E_dn(t)> in closed form.

    Accepts a scalar or an array of times; the product runs over the N
    per-spin factors |alpha_k|^2 e^{2 i g_k t} + |beta_k|^2 e^{-2 i g_k t}.
    """
    t_arr = np.asarray(t, dtype=float)
    phase = np.exp(2j * np.multiply.outer(t_arr, p.couplings))
    wa = (np.abs(p.alphas) ** 2)
    wb = (np.abs(p.betas) ** 2)
    factors = wa * phase + wb / phase
    out = np.prod(factors, axis=-1)
    return complex(out) if np.isscalar(t) else out


def z_mod_sq(p: SpinBathParams, t):
    """|z(t)|^2 as the displayed product of per-spin damping factors:
    prod_k { 1 + [(|alpha_k|^2 - |beta_k|^2)^2 - 1] sin^2(2 g_k t) }."""
    t_arr = np.asarray(t, dtype=float)
    bias = (np.abs(p.alphas) ** 2 - np.abs(p.betas) ** 2) ** 2
    s2 = np.sin(2.0 * np.multiply.outer(t_arr, p.couplings)) ** 2
    out = np.prod(1.0 + (bias - 1.0) * s2, axis=-1)
    return float(out) if np.isscalar(t) else out


def reduced_density(p: SpinBathParams, t: float) -> hb.DensityOperator:
    """Reduced 2x2 system state: frozen populations, z-damped coherences.

    The (up, dn) entry is a b* conj(z(t)), as the partial trace of the
    evolved global state dictates.
    """
    z = z_analytic(p, float(t))
    mat = np.array([[abs(p.a) ** 2, p.a * np.conj(p.b) * np.conj(z)],
                    [np.conj(p.a) * p.b * z, abs(p.b) ** 2]])
    return hb.DensityOperator(hb.SpaceLayout([("S", 2)]), mat)


def long_time_average(p: SpinBathParams) -> float:
    """Time average of |z(t)|^2 for generic (incommensurate) couplings:
    2^-N prod_k [1 + (|alpha_k|^2 - |beta_k|^2)^2]."""
    bias = (np.abs(p.alphas) ** 2 - np.abs(p.betas) ** 2) ** 2
    return float(2.0 ** (-p.n_env) * np.prod(1.0 + bias))


# ---------------------------------------------------------------------------
# homogeneous limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianLimit:
    """Fitted Gaussian envelope of z(t) for homogeneous parameters.

    ``phase_rate`` (A) is the linear phase drift, ``decay_rate`` (B) the
    width parameter of the envelope exp(-B^2 t^2 / 2), both extracted
    numerically from the binomial-exact z(t).  ``phase_unit`` is the
    per-spin branch phase rate 2g, so the mean of the binomial phase
    distribution is phase_unit * N * (2|alpha|^2 - 1).
    """

    phase_rate: float
    decay_rate: float
    envelope_deviation: float
    phase_unit: float
    n_env: int
    alpha_sq: float


def _require_homogeneous(p: SpinBathParams) -> tuple[float, float]:
    g = p.couplings
    if np.max(np.abs(g - g[0])) > 1e-12 or \
            np.max(np.abs(p.alphas - p.alphas[0])) > 1e-12 or \
            np.max(np.abs(p.betas - p.betas[0])) > 1e-12:
        raise NotHomogeneous("gaussian_limit requires identical couplings and amplitudes")
    return float(g[0]), float(abs(p.alphas[0]) ** 2)


def binomial_z(p: SpinBathParams, t):
    """Binomial expansion of the homogeneous z(t):
    sum_l C(N,l) |alpha|^{2l} |beta|^{2(N-l)} e^{i 2g (2l-N) t}."""
    g, wa = _require_homogeneous(p)
    n = p.n_env
    wb = 1.0 - wa
    ls = np.arange(n + 1)
    weights = np.array([math.comb(n, l) for l in ls], dtype=float) \
        * wa ** ls * wb ** (n - ls)
    omegas = 2.0 * g * (2 * ls - n)
    t_arr = np.asarray(t, dtype=float)
    out = np.exp(1j * np.multiply.outer(t_arr, omegas)) @ weights
    return complex(out) if np.isscalar(t) else out


def gaussian_limit(p: SpinBathParams, n_window: int = 200) -> GaussianLimit:
    """Fit the Gaussian envelope of the homogeneous z(t).

    B comes from least squares of log|z| against t^2 on the decay window
    (down to e^-2 of the peak); A from a central difference of the phase at
    t = 0.  The reported deviation is max | |z(t)| - e^{-B^2 t^2/2} | over
    t in [0, 3/B].
    """
    g, wa = _require_homogeneous(p)
    n = p.n_env
    wb = 1.0 - wa
    unit = 2.0 * g
    b_scale = 2.0 * abs(unit) * math.sqrt(max(n * wa * wb, 1e-300))
    a_scale = abs(unit) * n + b_scale

    # phase slope at the origin
    h = 1e-3 / a_scale
    a_fit = float(np.angle(binomial_z(p, h) / binomial_z(p, -h))) / (2.0 * h)

    # envelope from log|z| against t^2
    ts = np.linspace(0.0, 2.0 / b_scale, n_window + 1)[1:]
    mod = np.abs(binomial_z(p, ts))
    mask = mod > 1e-12
    slope = np.polyfit(ts[mask] ** 2, np.log(mod[mask]), 1)[0]
    b_fit = math.sqrt(max(-2.0 * slope, 0.0))

    te = np.linspace(0.0, 3.0 / b_fit, 400)
    dev = float(np.max(np.abs(np.abs(binomial_z(p, te))
                              - np.exp(-0.5 * b_fit ** 2 * te ** 2))))
    return GaussianLimit(a_fit, b_fit, dev, unit, n, wa)


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

def _env_phase_sums(p: SpinBathParams) -> np.ndarray:
    """sum_k g_k sigma_k over all 2^N environment bit patterns, bit 0 = up."""
    s = np.zeros(1)
    for g in p.couplings:
        s = (s[:, None] + np.array([g, -g])[None, :]).ravel()
    return s


def bath_layout(p: SpinBathParams) -> hb.SpaceLayout:
    return hb.SpaceLayout([("S", 2)] + [(f"E{k+1}", 2) for k in range(p.n_env)])


def initial_state(p: SpinBathParams) -> hb.PureState:
    amps = np.array([p.a, p.b])
    for alpha, beta in p.env_amps:
        amps = np.kron(amps, np.array([alpha, beta]))
    return hb.PureState(bath_layout(p), amps)


def brute_force_evolve(p: SpinBathParams, t: float) -> hb.PureState:
    """Evolve the full 2^(N+1)-dimensional state exactly.

    H is diagonal in the computational basis, so the unitary is a phase per
    basis state; the energies are assembled additively over the couplings per
    bit pattern, independent of the per-factor closed forms this validates.
    """
    if p.n_env > BRUTE_FORCE_MAX_SPINS:
        raise SizeGuard(f"n_env={p.n_env} exceeds dense guard {BRUTE_FORCE_MAX_SPINS}")
    env = _env_phase_sums(p)
    energies = np.concatenate([env, -env])
    amps = initial_state(p).amplitudes * np.exp(-1j * energies * float(t))
    return hb.PureState(bath_layout(p), amps)


def branch_environment_states(p: SpinBathParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form conditional environment states (E_up, E_dn).

    Per factor, E_up picks up e^{-i g_k t} on up_k and e^{+i g_k t} on dn_k;
    E_dn is the t -> -t mirror.
    """
    up = np.ones(1, dtype=complex)
    dn = np.ones(1, dtype=complex)
    for g, (alpha, beta) in zip(p.couplings, p.env_amps):
        up = np.kron(up, np.array([alpha * np.exp(-1j * g * t), beta * np.exp(1j * g * t)]))
        dn = np.kron(dn, np.array([alpha * np.exp(1j * g * t), beta * np.exp(-1j * g * t)]))
    return up, dn


def branch_overlap_bruteforce(p: SpinBathParams, t: float) -> complex:
    """<E_up|E_dn> extracted from the brute-force evolved full state."""
    if abs(p.a) < 1e-12 or abs(p.b) < 1e-12:
        raise ValueError("branch extraction needs both system amplitudes nonzero")
    psi = brute_force_evolve(p, t).amplitudes
    half = psi.size // 2
    e_up = psi[:half] / p.a
    e_dn = psi[half:] / p.b
    return complex(np.vdot(e_up, e_dn))


def hamiltonian(p: SpinBathParams) -> hb.Observable:
    """Dense interaction Hamiltonian (small N only)."""
    if p.n_env > DENSE_HAMILTONIAN_MAX_SPINS:
        raise SizeGuard(f"dense Hamiltonian limited to {DENSE_HAMILTONIAN_MAX_SPINS} spins")
    env = _env_phase_sums(p)
    return hb.Observable(bath_layout(p), np.diag(np.concatenate([env, -env])))


# ---------------------------------------------------------------------------
# traces and recurrences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterferenceTrace:
    """Sampled z(t): ascending times and the complex values at them."""

    times: np.ndarray
    z_values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float)
        zs = np.asarray(self.z_values, dtype=complex)
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "z_values", zs)
        if ts.shape != zs.shape:
            raise ValueError("times and z_values must align")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("times must be strictly ascending")
        if np.max(np.abs(zs)) > 1.0 + 1e-12:
            raise ValueError("|z| exceeded 1 beyond tolerance")


def trace(p: SpinBathParams, times) -> InterferenceTrace:
    times = np.asarray(times, dtype=float)
    return InterferenceTrace(times, z_analytic(p, times))


def recurrence_scan(p: SpinBathParams, t_max: float, dt: float,
                    threshold: float = 0.99, t_min: float = 0.0) -> np.ndarray:
    """Grid-scan times where |z| exceeds ``threshold``.

    For commensurate couplings the first hit past t_min sits at the common
    period of the per-spin factors (pi/g_k each).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    ts = np.arange(0.0, t_max + 0.5 * dt, dt)
    ts = ts[ts >= t_min]
    mod = np.sqrt(np.maximum(z_mod_sq(p, ts), 0.0))
    return ts[mod > threshold]
