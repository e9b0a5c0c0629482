"""Offline/online experiment drivers behind the command line."""
from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import storage
from .config import RunConfig
from .dg import DgSpace
from .diagnostics import PlaneWave, gaussian, l2_error, project_complex, relative_l2l2_error
from .errors import (ConfigurationError, ConvergenceError, RankDeficiencyError,
                     SaturationError, SelectionError)
from .hyper import DmdModel, build_deim, deim_basis, dmd_fit, numerical_rank
from .integrators import NewtonSettings, SnapshotSink, TimeGrid, integrate
from .lowrank import PodBasis, pod_basis, rsvd
from .mesh import build_periodic_mesh
from .rom import build_rom, integrate_rom
from .sipg import OperatorSet

log = logging.getLogger(__name__)

STATES_FILE = "states.hrom"
NONLINEAR_FILE = "nonlinear.hrom"
ARTIFACT_FILE = "rom.zip"
INVARIANT_HEADER = ["t", "mass", "energy", "mass_drift", "energy_drift"]


@dataclass
class Problem:
    config: RunConfig
    space: DgSpace
    ops: OperatorSet
    z0: np.ndarray
    exact: PlaneWave | None

    def reference(self, t):
        if self.exact is None:
            return None
        return lambda x, y: self.exact(t, x, y)


def plane_wave_params(cfg: RunConfig) -> PlaneWave:
    ic, ph = cfg.initial, cfg.physics
    return PlaneWave(ic.amplitude, ic.c1, ic.c2, ph.alpha, ph.beta, ic.omega)


def build_problem(cfg: RunConfig) -> Problem:
    m = cfg.mesh
    mesh = build_periodic_mesh((m.xmin, m.xmax, m.ymin, m.ymax), m.nx, m.ny)
    space = DgSpace(mesh)
    ph = cfg.physics
    ops = OperatorSet(space, ph.alpha, ph.beta, ph.kappa, ph.potential_fn())
    exact = None
    if cfg.initial.kind == "plane_wave":
        exact = plane_wave_params(cfg)
        exact.check_periodic(mesh.lx, mesh.ly)
        z0 = project_complex(space, lambda x, y: exact(0.0, x, y))
        if ph.potential != "none":
            exact = None  # only an initial condition, not a solution
    else:
        z0 = project_complex(space, gaussian)
    return Problem(cfg, space, ops, z0, exact)


def newton_settings(cfg: RunConfig) -> NewtonSettings:
    t = cfg.time
    return NewtonSettings(t.newton_tol, t.newton_max_iter, 1.0, t.jacobian)


def _invariant_rows(times, mass, energy, errors=None):
    rows = []
    for i, t in enumerate(times):
        row = [float(t), float(mass[i]), float(energy[i]),
               float(abs(mass[i] - mass[0])), float(abs(energy[i] - energy[0]))]
        if errors is not None:
            row.append(float(errors[i]))
        rows.append(row)
    return rows


def _provenance(cfg: RunConfig) -> dict:
    out = {"config": cfg.to_ini()}
    if cfg.initial.kind == "plane_wave":
        pw = plane_wave_params(cfg)
        out["omega"] = pw.omega
        out["omega_alternative"] = pw.omega_alternative
    return out


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")


# FOM ---------------------------------------------------------------------------

@dataclass
class FomResult:
    problem: Problem
    trajectory: object
    states: np.ndarray
    nonlinear: np.ndarray
    dt: float
    l2_errors: np.ndarray | None


def run_fom(cfg: RunConfig, write: bool = True) -> FomResult:
    """Integrate the full model and store snapshots, invariants and timing."""
    prob = build_problem(cfg)
    grid = TimeGrid(cfg.time.tau, cfg.time.T)
    stride = cfg.rom.stride
    sink = SnapshotSink(stride)
    errors = [] if prob.exact is not None else None

    def observe(n, t, z):
        if errors is not None:
            errors.append(l2_error(prob.space, z, prob.reference(t)))

    traj = integrate(prob.ops, prob.z0, grid, cfg.time.integrator, newton_settings(cfg),
                     sink=sink, callback=observe)
    dt = stride * cfg.time.tau
    res = FomResult(prob, traj, sink.state_matrix, sink.nonlinear_matrix, dt,
                    None if errors is None else np.array(errors))
    if write:
        out = cfg.out_dir
        out.mkdir(parents=True, exist_ok=True)
        storage.write_snapshots(out / STATES_FILE, res.states, dt, "state")
        storage.write_snapshots(out / NONLINEAR_FILE, res.nonlinear, dt, "nonlinearity")
        header = INVARIANT_HEADER + (["l2_error"] if errors is not None else [])
        storage.write_csv(out / "fom.csv", header,
                          _invariant_rows(traj.times, traj.mass, traj.energy, res.l2_errors))
        _write_json(out / "fom_timing.json", {
            "wall_time": traj.wall_time, "steps": grid.n_steps,
            "newton_iterations": int(traj.newton_iterations.sum()),
            "integrator": cfg.time.integrator, **_provenance(cfg)})
    return res


# offline -------------------------------------------------------------------------

@dataclass
class OfflineModel:
    basis: PodBasis
    variant: str
    reducer: object
    meta: dict


def _rom_kind(variant: str) -> str:
    return {"pod": "pod", "pod_deim": "deim", "pod_dmd": "dmd"}[variant]


def load_snapshots(cfg: RunConfig, ops=None):
    out = cfg.out_dir
    try:
        Z = storage.read_snapshots(out / STATES_FILE)
        G = storage.read_snapshots(out / NONLINEAR_FILE)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"no snapshots in {out}; run `fom run` first") from exc
    expected = 2 * 2 * cfg.mesh.nx * cfg.mesh.ny * 3
    for snap in (Z, G):
        if snap.matrix.shape[0] != expected:
            raise ConfigurationError(
                f"snapshot rows {snap.matrix.shape[0]} do not match the configured mesh ({expected})")
    if abs(Z.dt - cfg.rom.stride * cfg.time.tau) > 1e-12 * Z.dt:
        raise ConfigurationError(f"snapshot spacing {Z.dt} does not match stride * tau")
    return Z, G


def fit_reducer(kind: str, G: np.ndarray, m: int, dt: float, cfg: RunConfig):
    """DEIM interpolant or DMD model from the nonlinearity snapshots ``G``.

    Returns ``(reducer, m_used)``; with ``cap_dmd_rank`` the DMD rank is
    clipped to the numerical rank of the snapshot matrix.
    """
    r = cfg.rom
    if kind == "deim":
        return build_deim(deim_basis(G, m, r.p, r.seed)), m
    if kind == "dmd":
        G0, G1 = G[:, :-1], G[:, 1:]
        m_used = m
        if r.cap_dmd_rank:
            probe = min(m, min(G0.shape))
            _, s, _ = rsvd(G0, probe, min(r.p, min(G0.shape) - probe), r.seed)
            m_used = max(1, min(m, numerical_rank(s, G0.shape)))
            if m_used < m:
                log.info("DMD rank capped from %d to the numerical rank %d", m, m_used)
        return dmd_fit(G0, G1, m_used, dt, b0=G[:, 0], p=r.p, seed=r.seed), m_used
    return None, 0


def offline(cfg: RunConfig, Z: np.ndarray, G: np.ndarray, dt: float, ops) -> OfflineModel:
    r = cfg.rom
    if r.variant == "none":
        raise ConfigurationError("rom.variant is 'none'; nothing to build")
    basis = pod_basis(Z, ops.lhs, rank=r.k, threshold=r.threshold, p=r.p, seed=r.seed)
    kind = _rom_kind(r.variant)
    reducer, m_used = fit_reducer(kind, G, r.m, dt, cfg)
    meta = {"variant": r.variant, "k": basis.k, "m": r.m, "m_used": m_used, "seed": r.seed,
            "p": r.p, "threshold": r.threshold, "energy_fraction": basis.energy(),
            "corrected": r.corrected, "dt": dt}
    if kind == "deim":
        meta["deim_condition"] = reducer.cond
    return OfflineModel(basis, r.variant, reducer, meta)


def build_rom_offline(cfg: RunConfig, write: bool = True) -> OfflineModel:
    """Basis and reducer from stored snapshots, saved as a ROM artifact."""
    prob = build_problem(cfg)
    Z, G = load_snapshots(cfg)
    model = offline(cfg, Z.matrix, G.matrix, Z.dt, prob.ops)
    if write:
        sys_ = build_rom(model.basis, prob.ops, _rom_kind(model.variant), model.reducer,
                         cfg.rom.corrected)
        arrays = {"U": model.basis.U, "sigma": model.basis.sigma, "J_r": sys_.J_r,
                  "A_r": sys_.A_r, "A_u": sys_.A_u}
        red = model.reducer
        if model.variant == "pod_deim":
            arrays.update(Q=red.Q, indices=red.indices)
        elif model.variant == "pod_dmd":
            arrays.update(dmd_modes=red.modes, dmd_eigenvalues=red.eigenvalues,
                          dmd_omega=red.omega, dmd_amplitudes=red.amplitudes)
        meta = {**model.meta, **_provenance(cfg), "snapshot_total": model.basis.total}
        storage.save_artifact(cfg.out_dir / ARTIFACT_FILE, arrays, meta)
    return model


def load_offline(cfg: RunConfig, path=None) -> OfflineModel:
    arrays, meta = storage.load_artifact(path or cfg.out_dir / ARTIFACT_FILE)
    if meta["variant"] != cfg.rom.variant:
        raise ConfigurationError(
            f"artifact holds a {meta['variant']} model but the config asks for {cfg.rom.variant}")
    basis = PodBasis(arrays["U"], arrays["sigma"], int(meta["k"]), None, meta["seed"],
                     meta.get("snapshot_total"))
    reducer = None
    if meta["variant"] == "pod_deim":
        from .hyper import DeimInterpolant

        Q, idx = arrays["Q"], arrays["indices"]
        inv = np.linalg.inv(Q[idx])
        reducer = DeimInterpolant(Q, idx, inv, float(np.linalg.norm(inv, 2)))
    elif meta["variant"] == "pod_dmd":
        reducer = DmdModel(arrays["dmd_modes"], arrays["dmd_eigenvalues"], arrays["dmd_omega"],
                           arrays["dmd_amplitudes"], meta["dt"])
    return OfflineModel(basis, meta["variant"], reducer, meta)


# online ----------------------------------------------------------------------------

@dataclass
class RomResult:
    system: object
    trajectory: object
    mass: np.ndarray
    energy: np.ndarray
    l2l2_vs_fom: float | None


def _align(fom_times, rom_times):
    """Index pairs of equal time stamps in the two series."""
    tol = 1e-9 * max(fom_times[-1], rom_times[-1], 1.0)
    j = np.searchsorted(fom_times, rom_times - tol)
    j = np.clip(j, 0, len(fom_times) - 1)
    ok = np.abs(fom_times[j] - rom_times) <= tol
    return np.nonzero(ok)[0], j[ok]


def simulate_rom(prob: Problem, model: OfflineModel, cfg: RunConfig, fom_states=None,
                 fom_dt: float | None = None, corrected: bool | None = None) -> RomResult:
    kind = _rom_kind(model.variant)
    corrected = cfg.rom.corrected if corrected is None else corrected
    sys_ = build_rom(model.basis, prob.ops, kind, model.reducer, corrected)
    zr0 = sys_.restrict(prob.z0)
    grid = TimeGrid(cfg.rom_tau, cfg.time.T)
    traj = integrate_rom(sys_, zr0, grid, newton_settings(cfg))
    mass, energy = traj.invariants(sys_)
    err = None
    if fom_states is not None:
        fom_times = fom_dt * np.arange(fom_states.shape[1])
        ri, fi = _align(fom_times, traj.times)
        if len(ri) > 1:
            err = relative_l2l2_error(prob.ops, sys_.U @ traj.states[:, ri], fom_states[:, fi],
                                      float(traj.times[ri[1]] - traj.times[ri[0]]))
    return RomResult(sys_, traj, mass, energy, err)


def run_rom_online(cfg: RunConfig, artifact=None, write: bool = True) -> RomResult:
    """Integrate the stored ROM; timing covers the reduced time loop only."""
    prob = build_problem(cfg)
    model = load_offline(cfg, artifact)
    fom = None
    try:
        Z, _ = load_snapshots(cfg)
        fom = Z
    except ConfigurationError:
        pass
    res = simulate_rom(prob, model, cfg, None if fom is None else fom.matrix,
                       None if fom is None else fom.dt)
    if write:
        out = cfg.out_dir
        k = res.system.k
        errs = None
        if prob.exact is not None:
            Zl = res.system.U @ res.trajectory.states
            errs = [l2_error(prob.space, z, prob.reference(t)) for z, t in zip(Zl.T, res.trajectory.times)]
        header = INVARIANT_HEADER + (["l2_error"] if errs is not None else []) + ["reduced_dim"]
        rows = [r + [k] for r in _invariant_rows(res.trajectory.times, res.mass, res.energy, errs)]
        storage.write_csv(out / f"rom_{model.variant}.csv", header, rows)
        _write_json(out / f"rom_{model.variant}_timing.json", {
            "wall_time": res.trajectory.wall_time, "k": k, "m_used": model.meta.get("m_used"),
            "l2l2_vs_fom": res.l2l2_vs_fom,
            "full_nonlinear_calls": prob.ops.counters["full_nonlinear"],
            **_provenance(cfg)})
    return res


# sweeps and benchmarks -------------------------------------------------------------

SWEEP_HEADER = ["reducer", "m", "m_used", "l2l2_error", "energy_drift", "mass_drift", "status"]


def sweep_modes(cfg: RunConfig, m_values, reducers=("deim", "dmd"), write: bool = True):
    """Reduced runs for each reducer and DEIM/DMD rank at fixed ``k``.

    Drifts are relative to the initial lifted invariants.  Failed fits or
    runs are kept as rows with ``nan`` entries and the error in ``status``.
    """
    prob = build_problem(cfg)
    rows = []
    if len(m_values):
        Z, G = load_snapshots(cfg)
        basis = pod_basis(Z.matrix, prob.ops.lhs, rank=cfg.rom.k, threshold=cfg.rom.threshold,
                          p=cfg.rom.p, seed=cfg.rom.seed)
        variants = {"deim": "pod_deim", "dmd": "pod_dmd"}
        for kind in reducers:
            for m in m_values:
                try:
                    reducer, m_used = fit_reducer(kind, G.matrix, int(m), Z.dt, cfg)
                    model = OfflineModel(basis, variants[kind], reducer, {})
                    res = simulate_rom(prob, model, cfg, Z.matrix, Z.dt)
                    rows.append([kind, int(m), m_used, res.l2l2_vs_fom,
                                 float(np.max(np.abs(res.energy - res.energy[0])) / abs(res.energy[0])),
                                 float(np.max(np.abs(res.mass - res.mass[0])) / res.mass[0]), "ok"])
                except (SelectionError, RankDeficiencyError, ConvergenceError, SaturationError,
                        ConfigurationError) as exc:
                    rows.append([kind, int(m), 0, float("nan"), float("nan"), float("nan"),
                                 type(exc).__name__])
    if write:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        storage.write_csv(cfg.out_dir / "sweep.csv", SWEEP_HEADER, rows)
    return rows


def bench(cfg: RunConfig, repeat: int = 1, write: bool = True) -> dict:
    """Median wall-clock of the FOM loop and of each reduced online loop."""
    if repeat < 1:
        raise ConfigurationError("repeat must be >= 1")
    fom_times = []
    fom = None
    for _ in range(repeat):
        fom = run_fom(cfg, write=True)
        fom_times.append(fom.trajectory.wall_time)
    prob = fom.problem
    out = {"fom": statistics.median(fom_times)}
    for variant in ("pod_deim", "pod_dmd"):
        vcfg = cfg.replace(rom={"variant": variant})
        model = offline(vcfg, fom.states, fom.nonlinear, fom.dt, prob.ops)
        times = [simulate_rom(prob, model, vcfg).trajectory.wall_time for _ in range(repeat)]
        out[variant] = statistics.median(times)
    result = {name: {"seconds": t, "speedup": out["fom"] / t if t > 0 else float("inf")}
              for name, t in out.items()}
    if write:
        storage.write_csv(cfg.out_dir / "bench.csv", ["model", "seconds", "speedup"],
                          [[n, v["seconds"], v["speedup"]] for n, v in result.items()])
    return result


__all__ = ["Problem", "build_problem", "run_fom", "build_rom_offline", "run_rom_online",
           "sweep_modes", "bench", "offline", "simulate_rom", "fit_reducer"]
