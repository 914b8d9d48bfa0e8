"""The five named experiments, their fixtures, and the comparison metrics.

Every experiment resolves to a plain config dataclass (INI file + CLI
overrides), runs through the solver modules, and leaves on disk: diagnostics
CSVs per output time, optional binary snapshots, and a manifest carrying
every number needed to replay the run bit-identically.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ap_solver import KineticProblem, KnudsenField, run_kinetic
from .collision import PenaltyConfig, load_kernel_modes, precompute_kernel_modes, save_kernel_modes
from .errors import ConfigError, GridIncompatible, SchemaMismatch
from .fokker_planck import FokkerPlanckSolver, PorousState, entropy, ring_initial
from .grid import BC_PERIODIC, BC_SPECULAR, MacroState, SpatialMesh, VelocityGrid, maxwellian
from .io import (
    read_diagnostics,
    read_manifest,
    save_snapshot,
    write_diagnostics,
    write_manifest,
    write_series,
)
from .kernels import get_backend
from .stiff_ode import run_linear_test

EXPERIMENTS = ("linear_ode", "smooth_accuracy", "sod", "mixing", "porous_medium")
SCHEMES = ("imex1", "imex2", "explicit_rk2", "explicit_euler")


@dataclass
class ExperimentConfig:
    experiment: str
    scheme: str = "imex2"
    out_dir: str = "runs/out"
    # phase-space grid
    n_x: int = 100
    n_v: int = 16
    v_max: float = 7.0
    # time stepping
    cfl: float = 0.9
    dt: float = 0.0  # fixed step where the experiment uses one (linear_ode, porous)
    dt_factor: float = 1.0
    t_end: float = 1.0
    output_interval: float = 0.25
    # stiffness field
    eps_kind: str = "constant"  # or "mixing"
    eps: float = 1e-2
    # penalty rule
    nu: float = 1.0
    base_rate: float = 1.0
    # collision kernel
    gamma: float = 0.0
    c_gamma: float = 1.0 / (2.0 * np.pi)
    quadrature_n: int = 64
    # porous-medium application
    m_exponent: float = 3.0
    # bookkeeping
    snapshots: bool = False
    seed: int = 0  # reserved; no stochastic component yet

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        for name in ("n_x", "n_v"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.eps_kind not in ("constant", "mixing"):
            raise ConfigError(f"unknown eps_kind {self.eps_kind!r}")
        if self.experiment == "porous_medium" and self.m_exponent <= 1:
            raise ConfigError("m_exponent must exceed 1")
        if self.experiment in ("linear_ode", "porous_medium") and self.dt <= 0:
            raise ConfigError(f"{self.experiment} needs a fixed dt > 0")


DEFAULTS: dict[str, dict] = {
    "linear_ode": dict(scheme="imex2", dt=0.3, nu=2.0, t_end=30.0),
    "smooth_accuracy": dict(n_x=100, n_v=16, t_end=1.0, output_interval=0.25, eps=1e-2),
    "sod": dict(n_x=100, n_v=32, t_end=0.2, output_interval=0.05, eps=1e-2),
    "mixing": dict(n_x=200, n_v=32, t_end=0.75, output_interval=0.25, eps_kind="mixing", eps=1e-3),
    "porous_medium": dict(n_v=64, v_max=3.0, dt=0.02, t_end=4.0, output_interval=0.5),
}

_SECTION_MAP = {
    "experiment": ("experiment", "scheme", "seed"),
    "grid": ("n_x", "n_v", "v_max"),
    "time": ("cfl", "dt", "dt_factor", "t_end", "output_interval"),
    "knudsen": ("eps_kind", "eps"),
    "penalty": ("nu", "base_rate"),
    "kernel": ("gamma", "c_gamma", "quadrature_n"),
    "porous": ("m_exponent",),
    "output": ("out_dir", "snapshots"),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    kw = dict(DEFAULTS[experiment])
    kw.update(overrides)
    cfg = ExperimentConfig(experiment=experiment, **kw)
    cfg.validate()
    return cfg


def load_config(path, experiment: str | None = None, **overrides) -> ExperimentConfig:
    """Flat key-value file with sections; unknown keys are rejected."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    values: dict = {}
    for section in parser.sections():
        if section not in _SECTION_MAP:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTION_MAP[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            if key in ("experiment", "scheme", "eps_kind", "out_dir"):
                values[key] = raw
            elif key == "snapshots":
                values[key] = parser.getboolean(section, key)
            elif key in ("n_x", "n_v", "quadrature_n", "seed"):
                values[key] = int(raw)
            else:
                values[key] = float(raw)
    exp = experiment or values.pop("experiment", None)
    if exp is None:
        raise ConfigError("config file does not name an experiment")
    values.pop("experiment", None)
    values.update(overrides)
    return default_config(exp, **values)


def config_from_manifest(manifest: dict) -> ExperimentConfig:
    raw = dict(manifest["config"])
    exp = raw.pop("experiment")
    return default_config(exp, **raw)


# --- experiment geometry and initial data -----------------------------------


def experiment_mesh(cfg: ExperimentConfig) -> SpatialMesh:
    if cfg.experiment == "smooth_accuracy":
        return SpatialMesh(cfg.n_x, -1.0, 1.0, bc=BC_SPECULAR)
    if cfg.experiment == "sod":
        return SpatialMesh(cfg.n_x, 0.0, 1.0, bc=BC_SPECULAR)
    if cfg.experiment == "mixing":
        return SpatialMesh(cfg.n_x, -0.5, 0.5, bc=BC_PERIODIC)
    raise ConfigError(f"{cfg.experiment} has no spatial mesh")


def smooth_macro(mesh: SpatialMesh) -> MacroState:
    x = mesh.centers
    rho0 = (11.0 - 9.0 * np.tanh(x)) / 10.0
    T0 = (3.0 - np.tanh(x)) / 4.0
    return MacroState.from_primitive(rho0, np.zeros((mesh.n_x, 2)), T0)


def sod_macro(mesh: SpatialMesh) -> MacroState:
    x = mesh.centers
    rho = np.where(x <= 0.5, 1.0, 0.125)
    T = np.where(x <= 0.5, 1.0, 0.25)
    return MacroState.from_primitive(rho, np.zeros((mesh.n_x, 2)), T)


def mixing_initial(mesh: SpatialMesh, vgrid: VelocityGrid) -> np.ndarray:
    """Two counter-streaming beams, far from local equilibrium (taken verbatim)."""
    x = mesh.centers
    k = np.pi / 0.5
    rho0 = (2.0 + np.sin(k * x)) / 2.0
    T0 = (5.0 + 2.0 * np.cos(k * x)) / 20.0
    u0 = (0.75, -0.75)
    dxp = vgrid.vx[None] - u0[0]
    dyp = vgrid.vy[None] - u0[1]
    dxm = vgrid.vx[None] + u0[0]
    dym = vgrid.vy[None] + u0[1]
    T3 = T0[:, None, None]
    beams = np.exp(-(dxp**2 + dyp**2) / T3) + np.exp(-(dxm**2 + dym**2) / T3)
    return rho0[:, None, None] / 2.0 * beams


def initial_distribution(cfg: ExperimentConfig, mesh: SpatialMesh, vgrid: VelocityGrid) -> np.ndarray:
    if cfg.experiment == "smooth_accuracy":
        return maxwellian(smooth_macro(mesh), vgrid)
    if cfg.experiment == "sod":
        return maxwellian(sod_macro(mesh), vgrid)
    if cfg.experiment == "mixing":
        return mixing_initial(mesh, vgrid)
    raise ConfigError(f"{cfg.experiment} has no kinetic initial data")


def knudsen_field(cfg: ExperimentConfig, mesh: SpatialMesh) -> KnudsenField:
    if cfg.eps_kind == "constant":
        return KnudsenField.constant(mesh, cfg.eps)
    return KnudsenField.mixing(mesh, cfg.eps)


def kernel_cache_dir() -> Path:
    return Path(os.environ.get("KAP_CACHE_DIR", Path.cwd() / "kernel_cache"))


def get_kernel_modes(vgrid: VelocityGrid, cfg: ExperimentConfig):
    """Build or reuse the cached kernel-mode tensor (cache hit is bit-identical)."""
    km = None
    cache = kernel_cache_dir()
    tag = "km_n{}_vmax{}_g{}_c{}_q{}.npz".format(
        vgrid.n_v, repr(vgrid.v_max), repr(cfg.gamma), repr(cfg.c_gamma), cfg.quadrature_n
    ).replace("/", "_")
    path = cache / tag
    if path.exists():
        km = load_kernel_modes(path)
        if (km.n_v, km.v_max, km.gamma, km.c_gamma, km.quadrature_n) != (
            vgrid.n_v,
            vgrid.v_max,
            cfg.gamma,
            cfg.c_gamma,
            cfg.quadrature_n,
        ):
            km = None
    if km is None:
        km = precompute_kernel_modes(vgrid, cfg.gamma, cfg.c_gamma, cfg.quadrature_n)
        cache.mkdir(parents=True, exist_ok=True)
        save_kernel_modes(km, path)
    return km


def build_problem(cfg: ExperimentConfig) -> tuple[KineticProblem, np.ndarray]:
    mesh = experiment_mesh(cfg)
    vgrid = VelocityGrid(cfg.n_v, cfg.v_max)
    problem = KineticProblem(
        mesh=mesh,
        vgrid=vgrid,
        knudsen=knudsen_field(cfg, mesh),
        penalty=PenaltyConfig(nu=cfg.nu, base_rate=cfg.base_rate),
        modes=get_kernel_modes(vgrid, cfg),
    )
    return problem, initial_distribution(cfg, mesh, vgrid)


# --- drivers -----------------------------------------------------------------


def _manifest_payload(cfg: ExperimentConfig, extra: dict) -> dict:
    payload = {
        "config": asdict(cfg),
        "library_version": __version__,
        "backend": get_backend(),
        "versions": {"numpy": np.__version__},
    }
    payload.update(extra)
    return payload


def run_linear_ode(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = run_linear_test(nu=cfg.nu, dt=cfg.dt, t_end=cfg.t_end, scheme=cfg.scheme)
    traj.export_csv(out / "trajectory.csv")
    write_manifest(
        out,
        _manifest_payload(
            cfg,
            {"overflow": traj.overflow, "overflow_step": traj.overflow_step, "n_steps": len(traj.times) - 1},
        ),
    )
    return {"overflow": traj.overflow, "trajectory": traj}


def run_kinetic_experiment(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, f0 = build_problem(cfg)
    result = run_kinetic(
        problem,
        f0,
        scheme=cfg.scheme,
        t_end=cfg.t_end,
        output_interval=cfg.output_interval,
        cfl=cfg.cfl,
        dt_factor=cfg.dt_factor,
        record_snapshots=cfg.snapshots,
    )
    x = problem.mesh.centers
    for k, t in enumerate(result.times):
        write_diagnostics(out / f"diag_{k:04d}.csv", x, result.macro[k], result.flux[k], result.dist_per_cell[k])
        if cfg.snapshots:
            save_snapshot(out / f"snap_{k:04d}.bin", result.snapshots[k], cfg.n_x, cfg.n_v, cfg.v_max, t)
    write_manifest(
        out,
        _manifest_payload(
            cfg,
            {
                "output_times": list(map(float, result.times)),
                "dt": result.dt,
                "n_steps": result.n_steps,
                "kernel_cache_key": problem.modes.cache_key(),
            },
        ),
    )
    return {"result": result, "problem": problem}


def run_porous_medium(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vgrid = VelocityGrid(cfg.n_v, cfg.v_max)
    f0 = ring_initial(vgrid)
    mass0 = vgrid.weight * float(f0.sum())
    solver = FokkerPlanckSolver(vgrid, mass0, cfg.dt, m=cfg.m_exponent)
    profile = solver.profile
    H_eq, _ = entropy(PorousState(f=profile.evaluate(vgrid), t=0.0), vgrid, cfg.m_exponent)

    state = PorousState(f=f0, t=0.0)
    rows = []
    n_steps = int(round(cfg.t_end / cfg.dt))
    snap_every = max(1, int(round(cfg.output_interval / cfg.dt)))

    def record(st):
        H, D = entropy(st, vgrid, cfg.m_exponent)
        mass = vgrid.weight * float(st.f.sum())
        rows.append([st.t, mass, float(st.f.min()), H, H - H_eq, D])

    record(state)
    if cfg.snapshots:
        save_snapshot(out / "snap_0000.bin", state.f[None], 1, cfg.n_v, cfg.v_max, 0.0)
    for k in range(1, n_steps + 1):
        state = solver.step(state)
        record(state)
        if cfg.snapshots and k % snap_every == 0:
            save_snapshot(out / f"snap_{k // snap_every:04d}.bin", state.f[None], 1, cfg.n_v, cfg.v_max, state.t)
    write_series(out / "series.csv", ["t", "mass", "min_f", "H", "H_rel", "dissipation"], rows)
    write_manifest(
        out,
        _manifest_payload(
            cfg,
            {"mass": mass0, "barenblatt_C": profile.C, "n_steps": n_steps, "dt": cfg.dt},
        ),
    )
    return {"state": state, "solver": solver, "series": np.array(rows)}


def run_experiment(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    if cfg.experiment == "linear_ode":
        return run_linear_ode(cfg)
    if cfg.experiment == "porous_medium":
        return run_porous_medium(cfg)
    return run_kinetic_experiment(cfg)


# --- metrics -----------------------------------------------------------------


def self_convergence(f_h: np.ndarray, f_2h: np.ndarray, f0: np.ndarray, p: float = 1.0) -> float:
    """Relative distance between a run and its half-resolution twin.

    Each coarse cell is the union of two fine cells, so the fine solution is
    restricted by block averaging (exact for cell averages) and the runs are
    compared on the coarse mesh.  A piecewise-constant prolongation in the
    other direction would floor the metric at O(h) for any smooth field and
    mask the scheme's order.  Norms are over phase space, normalized by the
    initial condition restricted the same way.
    """
    f_h = np.asarray(f_h)
    f_2h = np.asarray(f_2h)
    if f_h.shape[1:] != f_2h.shape[1:] or f_h.shape[0] != 2 * f_2h.shape[0]:
        raise GridIncompatible(f"shapes {f_h.shape} vs {f_2h.shape}")
    n_c = f_2h.shape[0]
    restrict = 0.5 * (f_h[0::2] + f_h[1::2])
    f0_c = 0.5 * (np.asarray(f0)[0::2] + np.asarray(f0)[1::2])
    diff = restrict - f_2h
    if np.isinf(p):
        return float(np.max(np.abs(diff)) / np.max(np.abs(f0_c)))
    return float(np.sum(np.abs(diff) ** p) ** (1.0 / p) / np.sum(np.abs(f0_c) ** p) ** (1.0 / p))


def max_self_convergence(series_h, series_2h, f0, p=1.0) -> float:
    """max over shared output times of the relative self-convergence error."""
    if len(series_h) != len(series_2h):
        raise GridIncompatible("runs recorded different numbers of output times")
    return max(self_convergence(a, b, f0, p) for a, b in zip(series_h, series_2h))


@dataclass
class ConvergenceReport:
    eps: float
    grids: list[int]
    errors_l1: list[float]
    errors_linf: list[float]
    slope_l1: float
    slope_linf: float
    fit_residual_l1: float
    fit_residual_linf: float


def _fit_slope(h: np.ndarray, err: np.ndarray) -> tuple[float, float]:
    logs = np.polyfit(np.log(h), np.log(err), 1, full=True)
    slope = float(logs[0][0])
    resid = float(logs[1][0]) if len(logs[1]) else 0.0
    return slope, resid


def convergence_study(cfg: ExperimentConfig, grids: list[int]) -> ConvergenceReport:
    """Self-convergence of the distribution over a ladder of spatial meshes."""
    grids = sorted(grids)
    runs = []
    for n_x in grids:
        sub = replace(cfg, n_x=n_x, snapshots=True, out_dir=str(Path(cfg.out_dir) / f"nx{n_x}"))
        runs.append(run_kinetic_experiment(sub)["result"])
    errs1, errsI = [], []
    for coarse, fine in zip(runs[:-1], runs[1:]):
        f0 = fine.snapshots[0]
        errs1.append(max_self_convergence(fine.snapshots, coarse.snapshots, f0, p=1.0))
        errsI.append(max_self_convergence(fine.snapshots, coarse.snapshots, f0, p=np.inf))
    h = np.array([1.0 / g for g in grids[1:]])
    s1, r1 = _fit_slope(h, np.array(errs1))
    sI, rI = _fit_slope(h, np.array(errsI))
    return ConvergenceReport(
        eps=cfg.eps,
        grids=grids,
        errors_l1=errs1,
        errors_linf=errsI,
        slope_l1=s1,
        slope_linf=sI,
        fit_residual_l1=r1,
        fit_residual_linf=rI,
    )


_FIELD_ALIASES = {"u": "ux", "rho": "rho", "ux": "ux", "uy": "uy", "T": "T", "qx": "qx", "dist_m": "dist_m"}


def _coarsen(a: np.ndarray, factor: int) -> np.ndarray:
    return a.reshape(-1, factor).mean(axis=1)


def compare_runs(dir_a, dir_b, fields=("rho", "ux", "T"), norm: str = "l1") -> dict:
    """Per-field relative distances between two runs at each shared output time.

    Meshes may differ by any integer factor; the finer run is block-averaged
    onto the coarser mesh.  Distances are relative to the second run's field.
    """
    man_a, man_b = read_manifest(dir_a), read_manifest(dir_b)
    times_a = man_a.get("output_times")
    times_b = man_b.get("output_times")
    if not times_a or not times_b:
        raise SchemaMismatch("both runs must record output_times")
    fields = [_FIELD_ALIASES.get(f, f) for f in fields]
    shared = [(i, j) for i, ta in enumerate(times_a) for j, tb in enumerate(times_b) if abs(ta - tb) < 1e-9]
    if not shared:
        raise SchemaMismatch("no shared output times")
    report: dict = {"times": [], "fields": {f: [] for f in fields}}
    for i, j in shared:
        da = read_diagnostics(Path(dir_a) / f"diag_{i:04d}.csv")
        db = read_diagnostics(Path(dir_b) / f"diag_{j:04d}.csv")
        na, nb = da["x"].size, db["x"].size
        if na % nb and nb % na:
            raise SchemaMismatch(f"meshes {na} and {nb} are not integer-nested")
        report["times"].append(times_a[i])
        for f in fields:
            if f not in da or f not in db:
                raise SchemaMismatch(f"field {f!r} missing from diagnostics")
            a, b = da[f], db[f]
            if na > nb:
                a = _coarsen(a, na // nb)
            elif nb > na:
                b = _coarsen(b, nb // na)
            if norm == "l1":
                denom = float(np.sum(np.abs(b)))
                dist = float(np.sum(np.abs(a - b))) / max(denom, 1e-300)
            elif norm == "linf":
                denom = float(np.max(np.abs(b)))
                dist = float(np.max(np.abs(a - b))) / max(denom, 1e-300)
            else:
                raise SchemaMismatch(f"unknown norm {norm!r}")
            report["fields"][f].append(dist)
    return report
