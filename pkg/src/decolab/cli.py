"""Deterministic scenario runner.

Configs are YAML files (key-value with nested tables); command-line
``--set key=value`` flags override file keys, ``--out`` the output
directory, and ``--seed`` the seed.  Identical config plus seed yields
byte-identical CSVs: all randomness flows through counter-based streams
keyed by (seed, stream id) and every float is serialized with repr.

Every emitted CSV starts with a units comment line and a header row;
complex values are split into paired Re/Im columns.  A manifest
(manifest.json) echoes the config and digests each emitted file.

Exit codes: 0 success, 2 configuration error, 3 engine error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import yaml

from . import __version__
from . import dynamics as dy
from . import einselection as es
from . import envariance as ev
from . import hilbert as hb
from . import histories as hi
from . import measurement as ms
from . import rng as drng
from . import spinbath as sb
from .errors import ConfigError, DecolabError


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    params: dict
    seed: int | None
    output_dir: str

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        scenario = data.pop("scenario", None)
        seed = data.pop("seed", None)
        out = data.pop("output_dir", None)
        if out is None and scenario is not None:
            out = os.path.join("runs", str(scenario))
        return cls(str(scenario), data, seed, str(out))


@dataclass(frozen=True)
class RunManifest:
    scenario: str
    config: dict
    version: str
    duration_s: float
    files: tuple[tuple[str, str], ...]
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "config": self.config,
            "artifact_version": self.version,
            "duration_s": self.duration_s,
            "files": [{"name": n, "sha256": d} for n, d in self.files],
            "notes": self.notes,
        }
        return json.dumps(payload, indent=2, sort_keys=True, default=str)


def load_config(path: str) -> ScenarioConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(["config file must hold a mapping"])
    return ScenarioConfig.from_mapping(data)


def apply_overrides(config: ScenarioConfig, sets: list[str],
                    out: str | None, seed: int | None) -> ScenarioConfig:
    params = json.loads(json.dumps(config.params))  # deep copy, plain types
    top = {"scenario": config.scenario, "seed": config.seed,
           "output_dir": out or config.output_dir}
    for item in sets:
        if "=" not in item:
            raise ConfigError([f"--set needs key=value, got {item!r}"])
        key, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        parts = key.split(".")
        if parts[0] in top and len(parts) == 1:
            top[parts[0]] = value
            continue
        node = params
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    if seed is not None:
        top["seed"] = seed
    return ScenarioConfig(str(top["scenario"]), params, top["seed"],
                          str(top["output_dir"]))


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str, units: str, header: list[str], rows) -> None:
    lines = [f"# units: {units}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _need(params: dict, key: str, kind, pred=None, msg="invalid value"):
    """Return a violation string or None."""
    if key not in params:
        return f"{key}: required"
    val = params[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        return f"{key}: expected {getattr(kind, '__name__', kind)}"
    if pred is not None and not pred(val):
        return f"{key}: {msg}"
    return None


def _optional(params: dict, key: str, kind, pred=None, msg="invalid value"):
    if key not in params or params[key] is None:
        return None
    return _need(params, key, kind, pred, msg)


def _positive(x):
    return x > 0


# ---------------------------------------------------------------------------
# scenario: spinbath
# ---------------------------------------------------------------------------

def _validate_spinbath(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = []
    out.append(_need(p, "n_env", int, lambda v: 1 <= v, "must be >= 1"))
    mode = p.get("mode", "random")
    if mode not in ("random", "homogeneous"):
        out.append("mode: must be 'random' or 'homogeneous'")
    if mode == "random" and cfg.seed is None:
        out.append("seed: required for stochastic scenarios")
    if mode == "homogeneous":
        out.append(_need(p, "alpha_sq", float, lambda v: 0 <= v <= 1, "must be in [0,1]"))
        out.append(_need(p, "g", float, _positive, "must be positive"))
    out.append(_optional(p, "t_max", float, _positive, "must be positive"))
    out.append(_optional(p, "n_samples", int, lambda v: v >= 2, "must be >= 2"))
    return [v for v in out if v]


def _fit_trace(times: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """Phase-slope and Gaussian-envelope fits on the initial decay window.

    The window ends at the first dip of |z| below e^-2 (or at the global
    minimum when that never happens), which keeps the late-time fluctuation
    plateau out of the fit.
    """
    mod = np.abs(z)
    below = np.nonzero(mod < math.exp(-2.0))[0]
    cut = int(below[0]) if len(below) else int(np.argmin(mod))
    cut = max(cut, 3)
    tw = times[1:cut]
    mw = mod[1:cut]
    good = mw > 1e-12
    if np.sum(good) >= 2:
        slope = np.polyfit(tw[good] ** 2, np.log(mw[good]), 1)[0]
        b_fit = math.sqrt(max(-2.0 * slope, 0.0))
    else:
        b_fit = float("nan")
    phases = np.unwrap(np.angle(z[:cut]))
    if len(phases) >= 2:
        a_fit = float(np.polyfit(times[:cut], phases, 1)[0])
    else:
        a_fit = float("nan")
    return a_fit, b_fit


def _run_spinbath(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    n = p["n_env"]
    mode = p.get("mode", "random")
    if mode == "homogeneous":
        params = sb.homogeneous_params(n, float(p["alpha_sq"]), float(p["g"]))
    else:
        params = sb.random_params(n, drng.stream(int(cfg.seed), 0))
    t_max = float(p.get("t_max", 10.0))
    n_samples = int(p.get("n_samples", 1001))
    times = np.linspace(0.0, t_max, n_samples)
    tr = sb.trace(params, times)
    rows = [(float(t), float(z.real), float(z.imag), float(abs(z) ** 2))
            for t, z in zip(tr.times, tr.z_values)]
    write_csv(os.path.join(outdir, "trace.csv"),
              "t: model time (hbar=1); z dimensionless",
              ["t", "re_z", "im_z", "mod_sq"], rows)
    a_fit, b_fit = _fit_trace(times, tr.z_values)
    write_csv(os.path.join(outdir, "summary.csv"),
              "long_time_average dimensionless; rates in 1/time",
              ["long_time_average", "fitted_a", "fitted_b"],
              [(sb.long_time_average(params), a_fit, b_fit)])
    return ["trace.csv", "summary.csv"], {"mode": mode}


# ---------------------------------------------------------------------------
# scenario: sieve
# ---------------------------------------------------------------------------

_CANDIDATES = {
    "up": np.array([1.0, 0.0]),
    "down": np.array([0.0, 1.0]),
    "plus": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "minus": np.array([1.0, -1.0]) / math.sqrt(2.0),
}


def _validate_sieve(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = [
        _need(p, "n_env", int, lambda v: 1 <= v <= 8, "must be in 1..8"),
        _need(p, "t", float, _positive, "must be positive"),
        _optional(p, "alpha_sq", float, lambda v: 0 <= v <= 1, "must be in [0,1]"),
        _optional(p, "g", float, _positive, "must be positive"),
    ]
    for name in cfg.params.get("candidates", []):
        if name not in _CANDIDATES:
            out.append(f"candidates: unknown candidate {name!r}")
    return [v for v in out if v]


def _run_sieve(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    params = sb.homogeneous_params(p["n_env"], float(p.get("alpha_sq", 0.5)),
                                   float(p.get("g", 1.0)), a=0.6, b=0.8)
    layout = sb.bath_layout(params)
    sys_layout = hb.SpaceLayout([("S", 2)])
    spec = es.InteractionSpec(layout, hb.Observable(sys_layout, np.zeros((2, 2))),
                              sb.hamiltonian(params))
    env_layout = hb.SpaceLayout([(f"E{k+1}", 2) for k in range(params.n_env)])
    env_amps = np.ones(1, dtype=complex)
    for alpha, beta in params.env_amps:
        env_amps = np.kron(env_amps, np.array([alpha, beta]))
    env_state = hb.PureState(env_layout, env_amps)
    names = list(p.get("candidates", ["up", "down", "plus", "minus"]))
    cands = [hb.PureState(sys_layout, _CANDIDATES[n]) for n in names]
    t = float(p["t"])
    rep = es.predictability_sieve(spec, env_state, cands, t)
    write_csv(os.path.join(outdir, "sieve.csv"),
              "purity, entropy dimensionless (entropy in nats)",
              ["rank", "candidate", "purity", "entropy"],
              [(i, names[e.candidate], e.purity, e.entropy)
               for i, e in enumerate(rep.entries)])

    sys0 = hb.PureState(sys_layout, np.array([params.a, params.b]))
    pointer = [hb.PureState(sys_layout, _CANDIDATES["up"]),
               hb.PureState(sys_layout, _CANDIDATES["down"])]
    comp = es.schmidt_vs_pointer(spec, env_state, sys0, t, pointer)
    rows = []
    for c in comp.comparisons:
        for i, ang in enumerate(c.angles):
            rows.append((c.time, i, float(ang), c.gap,
                         c.near_degenerate, c.rank_deficient))
    write_csv(os.path.join(outdir, "pointer_vs_schmidt.csv"),
              "time: model time; angle: radians",
              ["time", "vector", "angle", "gap", "near_degenerate", "rank_deficient"],
              rows)
    return ["sieve.csv", "pointer_vs_schmidt.csv"], {}


# ---------------------------------------------------------------------------
# scenario: envariance
# ---------------------------------------------------------------------------

def _validate_envariance(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    weights = p.get("weights")
    if not isinstance(weights, list) or not weights:
        return ["weights: required list of rationals like '1/3'"]
    out = []
    total = Fraction(0)
    for w in weights:
        try:
            f = Fraction(str(w))
        except (ValueError, ZeroDivisionError):
            out.append(f"weights: cannot parse {w!r} as a rational")
            continue
        if f < 0:
            out.append(f"weights: {w!r} is negative")
        total += f
    if not out and total != 1:
        out.append(f"weights: must sum to 1, got {total}")
    return out


def _run_envariance(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    weights = [Fraction(str(w)) for w in cfg.params["weights"]]
    fg = ev.fine_grain(weights)
    rows = [(k, f.numerator, f.denominator, float(f))
            for k, f in enumerate(fg.probabilities)]
    write_csv(os.path.join(outdir, "probabilities.csv"),
              "probability dimensionless (exact rational in numerator/denominator)",
              ["outcome", "numerator", "denominator", "probability"], rows)
    notes: dict = {"denominator": fg.denominator,
                   "approximation_error": fg.approximation_error}
    trace_rows = []
    if fg.extension is not None:
        eq = ev.derive_equal_probabilities(fg.extension)
        trace_rows = [(s.label, s.assertion, s.residual) for s in eq.trace]
        notes["max_proof_residual"] = eq.max_residual
    write_csv(os.path.join(outdir, "proof_trace.csv"),
              "residual dimensionless (state-vector units)",
              ["step", "assertion", "residual"], trace_rows)

    print("outcome  weight      probability")
    for k, f in enumerate(fg.probabilities):
        print(f"{k:7d}  {str(f):>9}  {float(f):.12f}")
    if trace_rows:
        worst = max(r[2] for r in trace_rows)
        print(f"proof-trace steps: {len(trace_rows)}, max residual {worst:.3e}")
    return ["probabilities.csv", "proof_trace.csv"], notes


# ---------------------------------------------------------------------------
# scenario: histories
# ---------------------------------------------------------------------------

def _validate_histories(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = []
    if not isinstance(p.get("times"), list) or len(p.get("times", [])) < 1:
        out.append("times: required list of at least one time")
    fams = p.get("families")
    if not isinstance(fams, list) or not fams or \
            not all(isinstance(f, list) and f for f in fams):
        out.append("families: required list of per-time projector file lists")
    elif isinstance(p.get("times"), list) and len(fams) != len(p["times"]):
        out.append("families: need exactly one family per time")
    if "initial_state" not in p:
        out.append("initial_state: required density-matrix file")
    prop = p.get("propagator", {})
    if not isinstance(prop, dict) or \
            ("hamiltonian" not in prop and "matrices" not in prop):
        out.append("propagator: need 'hamiltonian' or 'matrices'")
    return out


def _run_histories(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    base = p.get("base_dir", ".")
    times = [float(t) for t in p["times"]]
    rho0 = hb.load_density(os.path.join(base, p["initial_state"]))
    families = []
    for t, file_list in zip(times, p["families"]):
        projs = [hb.load_observable(os.path.join(base, f)).matrix for f in file_list]
        families.append(hi.ProjectorFamily(t, projs))
    prop_cfg = p["propagator"]
    if "hamiltonian" in prop_cfg:
        ham = hb.load_observable(os.path.join(base, prop_cfg["hamiltonian"]))
        props = [hb.propagator(ham, t2 - t1) for t1, t2 in zip(times, times[1:])]
    else:
        props = [hb.load_matrix(os.path.join(base, f))[1]
                 for f in prop_cfg["matrices"]]
    d = hi.decoherence_functional(families, rho0, props)
    rows = []
    for a, ha in enumerate(d.histories):
        for b, hbb in enumerate(d.histories):
            rows.append(("-".join(map(str, ha.indices)),
                         "-".join(map(str, hbb.indices)),
                         float(d.values[a, b].real), float(d.values[a, b].imag)))
    write_csv(os.path.join(outdir, "functional.csv"),
              "decoherence functional entries, dimensionless",
              ["alpha", "beta", "re", "im"], rows)
    tol = float(p.get("consistency_tol", 1e-8))
    reports = [hi.check_consistency(d, mode, tol) for mode in ("weak", "medium")]
    write_csv(os.path.join(outdir, "consistency.csv"),
              "violations dimensionless",
              ["mode", "max_violation", "tol", "passed"],
              [(r.mode, r.max_violation, r.tol, r.passed) for r in reports])
    return ["functional.csv", "consistency.csv"], \
        {"total": d.total(), "histories": len(d.histories)}


# ---------------------------------------------------------------------------
# scenarios: grw and bohm
# ---------------------------------------------------------------------------

def _validate_grid(p: dict) -> list[str]:
    grid = p.get("grid", {})
    out = []
    if not isinstance(grid, dict):
        return ["grid: must be a table with n and dx"]
    out.append(_need(grid, "n", int, lambda v: v >= 16, "must be >= 16"))
    out.append(_need(grid, "dx", float, _positive, "must be positive"))
    pk = p.get("packets")
    if not isinstance(pk, list) or not pk:
        out.append("packets: required list of {center, width, weight}")
    else:
        for i, item in enumerate(pk):
            if not isinstance(item, dict) or "center" not in item or "width" not in item:
                out.append(f"packets[{i}]: need center and width")
    return [v for v in out if v]


def _build_packets(p: dict) -> dy.GridWavefunction:
    grid = p["grid"]
    n, dx = int(grid["n"]), float(grid["dx"])
    x_min = float(grid.get("x_min", -0.5 * n * dx))
    mass = float(p.get("mass", 1.0))
    x = x_min + dx * np.arange(n)
    vals = np.zeros(n, dtype=complex)
    for item in p["packets"]:
        w = float(item.get("weight", 1.0))
        vals += math.sqrt(w) * np.exp(
            -((x - float(item["center"])) ** 2) / (4.0 * float(item["width"]) ** 2)
            + 1j * float(item.get("momentum", 0.0)) * x)
    return dy.normalize(x_min, dx, vals, mass)


def _validate_grw(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = _validate_grid(p)
    if cfg.seed is None:
        out.append("seed: required for stochastic scenarios")
    preset = p.get("preset")
    if preset is not None and preset != "paper-macroscopic":
        out.append(f"preset: unknown preset {preset!r}")
    if preset is None:
        out.append(_need(p, "nu", float, _positive, "must be positive"))
        out.append(_need(p, "delta", float, _positive, "must be positive"))
        out.append(_optional(p, "n_particles", int, lambda v: v >= 1, "must be >= 1"))
    out.append(_optional(p, "t_end", float, _positive, "must be positive"))
    out.append(_optional(p, "lambda", float, lambda v: v >= 0, "must be >= 0"))
    return [v for v in out if v]


def _run_grw(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    notes: dict = {}
    if p.get("preset") == "paper-macroscopic":
        params, factor = dy.desk_rescaled(dy.PAPER_MACROSCOPIC,
                                          float(p.get("target_rate", 50.0)))
        params = dy.GRWParams(nu=params.nu, delta=float(p.get("delta", 1.0)),
                              n_particles=params.n_particles)
        notes["preset"] = "paper-macroscopic"
        notes["rate_rescale_factor"] = factor
        notes["paper_mean_interhit_s"] = str(dy.PAPER_MACROSCOPIC.mean_interhit_time())
    else:
        params = dy.GRWParams(nu=float(p["nu"]), delta=float(p["delta"]),
                              n_particles=int(p.get("n_particles", 1)))
    psi0 = _build_packets(p)
    t_end = float(p.get("t_end", 1.0))
    run = dy.grw_run(psi0, params, t_end, drng.stream(int(cfg.seed), 0))
    write_csv(os.path.join(outdir, "events.csv"),
              "time: model time; center: model length; particle: index",
              ["time", "center", "particle"],
              [(e.time, e.center, e.particle) for e in run.events])
    n_snap = int(p.get("n_snapshots", 5))
    idx = np.linspace(0, len(run.snapshots) - 1, min(n_snap, len(run.snapshots)))
    rows = []
    for i in sorted(set(int(round(v)) for v in idx)):
        t, psi = run.snapshots[i]
        for xx, dd in zip(psi.x, psi.density()):
            rows.append((t, float(xx), float(dd)))
    write_csv(os.path.join(outdir, "snapshots.csv"),
              "x: model length; density: probability per length",
              ["time", "x", "density"], rows)
    files = ["events.csv", "snapshots.csv"]
    notes["n_events"] = len(run.events)

    lam = p.get("lambda")
    if lam is not None:
        x = psi0.x
        rho = np.outer(psi0.values, psi0.values.conj())
        dt = float(p.get("master_dt", 1e-3))
        steps = int(p.get("master_steps", 200))
        every = max(1, steps // 50)
        mask = np.abs(np.subtract.outer(x, x)) > 2.0 * float(p["packets"][0]["width"])
        series = []
        for i in range(steps):
            rho = dy.master_step(rho, x, psi0.mass, float(lam), dt)
            if i % every == 0:
                series.append(((i + 1) * dt, float(np.linalg.norm(rho[mask]))))
        write_csv(os.path.join(outdir, "offdiag.csv"),
                  "time: model time; offdiag_norm: Frobenius norm of far coherences",
                  ["time", "offdiag_norm"], series)
        files.append("offdiag.csv")
    return files, notes


def _validate_bohm(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = _validate_grid(p)
    if cfg.seed is None:
        out.append("seed: required for stochastic scenarios")
    out.append(_optional(p, "n_traj", int, lambda v: 1 <= v <= 2000,
                         "must be in 1..2000 for CSV output"))
    out.append(_optional(p, "t_end", float, _positive, "must be positive"))
    out.append(_optional(p, "dt", float, _positive, "must be positive"))
    return [v for v in out if v]


def _run_bohm(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    psi0 = _build_packets(p)
    n_traj = int(p.get("n_traj", 100))
    ens = dy.quantum_equilibrium_ensemble(psi0, n_traj, seed=int(cfg.seed))
    t_end = float(p.get("t_end", 1.0))
    dt = float(p.get("dt", 0.01))
    out = dy.bohm_run(lambda t: dy.free_evolve(psi0, t), ens, 0.0, t_end, dt)
    header = ["t"] + [f"q{i}" for i in range(n_traj)]
    rows = [[float(t)] + [float(v) for v in row]
            for t, row in zip(out.times, out.paths)]
    write_csv(os.path.join(outdir, "trajectories.csv"),
              "t: model time; q*: model length",
              header, rows)
    return ["trajectories.csv"], {"escaped": out.escaped_count}


# ---------------------------------------------------------------------------
# scenario: measurement
# ---------------------------------------------------------------------------

def _validate_measurement(cfg: ScenarioConfig) -> list[str]:
    p = cfg.params
    out = []
    coeffs = p.get("coefficients")
    if not isinstance(coeffs, list) or len(coeffs) < 2:
        out.append("coefficients: required list of at least two numbers")
    out.append(_optional(p, "record_overlap", float, lambda v: 0 <= v <= 1,
                         "must be in [0,1]"))
    return [v for v in out if v]


def _run_measurement(cfg: ScenarioConfig, outdir: str) -> tuple[list[str], dict]:
    p = cfg.params
    coeffs = np.array([complex(*c) if isinstance(c, list) else complex(str(c))
                       for c in p["coefficients"]])
    coeffs = coeffs / np.linalg.norm(coeffs)
    k = len(coeffs)
    overlap = float(p.get("record_overlap", 0.0))
    recs = np.eye(k, dtype=complex)
    if overlap > 0:
        # records pairwise overlapping with the first one at the given value
        recs = np.zeros((k, k), dtype=complex)
        recs[0, 0] = 1.0
        for i in range(1, k):
            recs[i, 0] = overlap
            recs[i, i] = math.sqrt(1.0 - overlap ** 2)
    d_env = k + 1
    recs_full = np.zeros((k, d_env), dtype=complex)
    recs_full[:, :k] = recs
    e0 = np.zeros(d_env)
    e0[-1] = 1.0
    setup = ms.MeasurementSetup(system_basis=np.eye(k), ready_state=np.eye(k)[0],
                                pointer_states=np.eye(k),
                                environment_ready=e0, environment_records=recs_full)
    system = hb.PureState(hb.SpaceLayout([("S", k)]), coeffs)
    joint = ms.chain(system, setup)
    rho_sa = hb.partial_trace(joint.density(), keep={"S", "A"})
    rows = [(i, j, float(rho_sa.matrix[i, j].real), float(rho_sa.matrix[i, j].imag))
            for i in range(rho_sa.dim) for j in range(rho_sa.dim)]
    write_csv(os.path.join(outdir, "reduced_sa.csv"),
              "density-matrix entries, dimensionless",
              ["row", "col", "re", "im"], rows)
    dec = hb.schmidt(joint, ({"S"}, {"A", "E"}))
    write_csv(os.path.join(outdir, "schmidt.csv"),
              "coefficients dimensionless",
              ["index", "coefficient"],
              list(enumerate(float(c) for c in dec.coefficients)))
    return ["reduced_sa.csv", "schmidt.csv"], {"record_overlap": overlap}


# ---------------------------------------------------------------------------
# registry and entry points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    validate: object
    run: object


SCENARIOS = {
    s.name: s for s in [
        Scenario("spinbath", "interference coefficient of the spin-bath model",
                 _validate_spinbath, _run_spinbath),
        Scenario("sieve", "predictability sieve and pointer-vs-eigenbasis angles",
                 _validate_sieve, _run_sieve),
        Scenario("envariance", "counting derivation of outcome probabilities",
                 _validate_envariance, _run_envariance),
        Scenario("histories", "decoherence functional from a projector manifest",
                 _validate_histories, _run_histories),
        Scenario("grw", "spontaneous-localization hits and coherence decay",
                 _validate_grw, _run_grw),
        Scenario("bohm", "pilot-wave trajectories of grid wavefunctions",
                 _validate_bohm, _run_bohm),
        Scenario("measurement", "premeasurement chain and record overlap",
                 _validate_measurement, _run_measurement),
    ]
}


def validate_config(config: ScenarioConfig) -> list[str]:
    """All schema violations, without running anything."""
    if config.scenario not in SCENARIOS:
        return [f"scenario: unknown scenario {config.scenario!r} "
                f"(known: {', '.join(sorted(SCENARIOS))})"]
    if config.seed is not None and not isinstance(config.seed, int):
        return ["seed: must be an integer"]
    return SCENARIOS[config.scenario].validate(config)


def run_config(config: ScenarioConfig) -> RunManifest:
    """Execute the scenario and write its CSVs plus manifest.json."""
    violations = validate_config(config)
    if violations:
        raise ConfigError(violations)
    os.makedirs(config.output_dir, exist_ok=True)
    started = time.perf_counter()
    files, notes = SCENARIOS[config.scenario].run(config, config.output_dir)
    duration = time.perf_counter() - started
    digests = tuple((name, _sha256(os.path.join(config.output_dir, name)))
                    for name in files)
    manifest = RunManifest(
        scenario=config.scenario,
        config={"scenario": config.scenario, "seed": config.seed,
                "output_dir": config.output_dir, **config.params},
        version=__version__, duration_s=duration, files=digests, notes=notes)
    with open(os.path.join(config.output_dir, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json() + "\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="decolab", description="decoherence scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in ("run", "validate"):
        sp = sub.add_parser(cmd)
        sp.add_argument("config", help="YAML scenario configuration")
        sp.add_argument("--set", action="append", default=[], dest="sets",
                        metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the seed")
    sub.add_parser("list-scenarios")
    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name in sorted(SCENARIOS):
            print(f"{name:12s} {SCENARIOS[name].description}")
        return 0

    try:
        config = apply_overrides(load_config(args.config), args.sets,
                                 args.out, args.seed)
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2

    if args.command == "validate":
        violations = validate_config(config)
        for v in violations:
            print(v)
        if violations:
            return 2
        print("ok")
        return 0

    try:
        manifest = run_config(config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except (DecolabError, ValueError, OSError) as exc:
        print(f"engine error [{config.scenario}]: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest.files)} file(s) to {config.output_dir} "
          f"in {manifest.duration_s:.2f}s")
    for name, digest in manifest.files:
        print(f"  {name}  sha256:{digest[:12]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
