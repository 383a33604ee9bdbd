"""Experiment configs, dispatch, run manifests and plot-data emission."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import modulation as MD
from . import poisson as PO
from . import profiles as P
from . import simulator as SM
from . import spectral as SP
from .errors import ConfigInvalid, OutputUnwritable, SeriesMissing
from .grids import CutoffConfig, RadialField, RadialGrid, read_axisym, write_radial

SCHEMA_VERSION = 1

# per-kind parameter defaults; any other key is rejected
DEFAULTS = {
    "fields": {"r_min": 1e-6, "r_max": 1e3, "ppd": 128, "tol": 1e-6},
    "spectral_build": {"r_min": 1e-6, "r_max": 1e11, "ppd": 200},
    "eigen_scan": {"nus": [1e-2, 1e-3, 1e-4], "modes": [0, 1], "beta": 0.5, "zeta_m": 0.05,
                   "zeta_star": 20.0, "match_zeta_m": None, "pm_bound": 10.0,
                   "definiteness_samples": 0},
    "modulation_reduced": {"M0": 100.0, "beta": 0.5, "tau_end": 200.0, "n_out": 401, "T": 1.0,
                           "tol": 1e-8},
    "modulation_shoot": {"M0": 100.0, "beta": 0.5, "K2": 1.0, "c": 0.5, "horizon": None,
                         "tol": 1e-6},
    "modulation_check": {"M0": 100.0, "beta": 0.5, "tau_end": 200.0, "K": [1.0] * 7,
                         "zeta_star": 20.0},
    "sim_run": {"geometry": "radial2d", "extent": 1000.0, "n": 512, "core": 1.0,
                "ring_offset": 1e4, "stepper": "imex_euler", "cfl": 0.4, "amp_cap": 1.05,
                "dt_max": 0.05, "t_end": 50.0, "lambda_stop": 10.0, "max_steps": 1_000_000,
                "initial": "U", "amplitude": 1.3, "mass_tol": 1e-6},
    "sim_fit": {"snapshot": "", "offset": 0.0, "radius": 10.0},
}
KINDS = tuple(DEFAULTS)
TOP_KEYS = {"version", "kind", "params", "out", "seed", "tol_scale"}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    out: str = "runs/out"
    seed: int = 0
    tol_scale: float = 1.0
    version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ConfigInvalid(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.version != SCHEMA_VERSION:
            raise ConfigInvalid(f"schema version {self.version} not supported")
        bad = set(self.params) - set(DEFAULTS[self.kind])
        if bad:
            raise ConfigInvalid(f"unknown parameter(s) for {self.kind}: {sorted(bad)}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        if not self.tol_scale > 0:
            raise ConfigInvalid("tol_scale must be positive")

    def resolved(self) -> dict:
        p = copy.deepcopy(DEFAULTS[self.kind])
        p.update(self.params)
        return p

    def to_dict(self) -> dict:
        return {"version": self.version, "kind": self.kind, "params": self.params,
                "out": self.out, "seed": self.seed, "tol_scale": self.tol_scale}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict) or not d:
            raise ConfigInvalid("empty configuration")
        bad = set(d) - TOP_KEYS
        if bad:
            raise ConfigInvalid(f"unknown top-level key(s): {sorted(bad)}")
        if "kind" not in d:
            raise ConfigInvalid("missing 'kind'")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ConfigInvalid("'params' must be a mapping")
        return cls(d["kind"], dict(params), str(d.get("out", "runs/out")), d.get("seed", 0),
                   float(d.get("tol_scale", 1.0)), d.get("version", SCHEMA_VERSION))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from exc
        if not text.strip():
            raise ConfigInvalid("empty configuration")
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    started: float
    finished: float = 0.0
    files: dict = field(default_factory=dict)  # relative path -> sha256
    probes: dict = field(default_factory=dict)  # name -> {value, bound, passed}
    series: dict = field(default_factory=dict)  # name -> list of rows
    root: str = "."
    seed: int = 0

    @property
    def passed(self) -> bool:
        return all(p["passed"] for p in self.probes.values())

    def add_file(self, path):
        p = Path(path)
        self.files[str(p.relative_to(self.root))] = _sha256(p)

    def probe(self, name, value, bound, passed=None):
        ok = bool(value <= bound) if passed is None else bool(passed)
        self.probes[name] = {"value": float(value), "bound": float(bound), "passed": ok}

    def verify(self) -> bool:
        for rel, digest in self.files.items():
            p = Path(self.root) / rel
            if not p.exists() or _sha256(p) != digest:
                return False
        return True

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "version": self.version, "seed": self.seed,
                "started": self.started, "finished": self.finished, "files": self.files,
                "probes": self.probes, "series": self.series}

    def write(self) -> Path:
        p = Path(self.root) / "manifest.json"
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return p

    @classmethod
    def read(cls, root) -> "RunManifest":
        p = Path(root) / "manifest.json"
        if not p.exists():
            raise SeriesMissing(f"no manifest in {root}")
        d = json.loads(p.read_text())
        return cls(d["config_hash"], d["version"], d["started"], d["finished"], d["files"],
                   d["probes"], d["series"], str(root), d.get("seed", 0))


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputUnwritable(f"cannot write to {out}: {exc}") from exc
    return out


# experiment runners -----------------------------------------------------------

def _run_fields(p, man, out, ts):
    grid = RadialGrid.geometric(p["r_min"], p["r_max"], p["ppd"])
    g = grid.nodes
    u = RadialField(grid, P.U(g))
    dpsi = PO.radial_poisson_gradient(u)
    err = np.max(np.abs(dpsi.values - P.dPsi_U(g))[g <= 100])
    mass_err = abs(PO.total_mass(u) / (8 * np.pi) - 1)
    for name, f in (("U", u), ("dPsi_U", dpsi)):
        path = out / f"{name}.txt"
        write_radial(path, f)
        man.add_file(path)
    man.probe("radial_gradient_sup_error", err, p["tol"] * ts)
    man.probe("mass_U_rel_error", mass_err, p["tol"] * ts)


def _run_spectral_build(p, man, out, ts):
    blocks = SP.build_blocks(RadialGrid.geometric(p["r_min"], p["r_max"], p["ppd"]))
    for name in SP.BLOCK_NAMES:
        path = out / f"block_{name}.txt"
        write_radial(path, blocks.field(name))
        man.add_file(path)
        man.probe(f"flux_residual_{name}", blocks.flux_residuals[name], 1e-6 * ts)


def _run_eigen_scan(p, man, out, ts, seed):
    rows, resid = [], []
    blocks = SP.build_blocks()
    for nu in p["nus"]:
        for i in p["modes"]:
            cut = CutoffConfig(nu, zeta_star_big=p["zeta_star"], zeta_m=p["zeta_m"])
            pair = SP.glue_eigenfunction(i, nu, cut, p["beta"], blocks, match_zeta_m=p["match_zeta_m"])
            for f in SP.export_eigenpair(pair, out):
                man.add_file(f)
            rows.append([1 / abs(math.log(nu)), pair.match.sup_gap, i])
            resid.append([nu, pair.residual_constant, i])
            man.probe(f"partial_mass_constant_i{i}_nu{nu:.0e}", pair.residual_constant,
                      p["pm_bound"] * ts)
    table = out / "gap_trend.csv"
    with table.open("w") as fh:
        fh.write("inv_log_nu,sup_gap,i\n")
        for r in rows:
            fh.write(f"{float(r[0])!r},{float(r[1])!r},{r[2]}\n")
    man.add_file(table)
    man.series["match_gap"] = [r[:2] for r in rows]
    man.series["residual_vs_nu"] = [r[:2] for r in resid]
    if p["definiteness_samples"]:
        rep = SP.definiteness_probe(p["definiteness_samples"], seed)
        man.probe("definiteness_min_ratio_neg", -rep.min_ratio, 1e-8 * ts)


def _run_modulation_reduced(p, man, out, ts):
    exact, num = MD.integrate_reduced_law(p["M0"], p["beta"], p["tau_end"], p["n_out"])
    path = out / "trajectory.csv"
    num.to_csv(path)
    man.add_file(path)
    err = float(np.max(np.abs(num.nu / exact.nu - 1)))
    man.probe("reduced_law_rel_error", err, p["tol"] * ts)
    man.series["lambda_vs_time"] = MD.lambda_series(p["M0"], p["T"], p["beta"]).tolist()


def _shoot_forcing(p):
    b = MD.default_band(p["K2"], p["M0"], p["beta"])
    return lambda s: p["c"] * b(s)


def _run_modulation_shoot(p, man, out, ts):
    from scipy.integrate import quad
    f = _shoot_forcing(p)
    rep = MD.shoot_trapped_a(f, p["beta"], MD.default_band(p["K2"], p["M0"], p["beta"]),
                             p["horizon"], p["M0"], p["K2"])
    path = out / "shoot.json"
    rep.to_json(path)
    man.add_file(path)
    oracle = -quad(lambda s: math.exp(-2 * p["beta"] * s) * f(s), 0, math.inf,
                   epsabs=0, epsrel=1e-13, limit=500)[0]
    rel = abs(rep.a0 - oracle) / abs(oracle) if oracle else abs(rep.a0)
    man.probe("trapped_a0_rel_error", rel, p["tol"] * ts)
    man.probe("exit_sign_dichotomy", 0.0, 0.0, passed=rep.exit_signs == (-1, 1))


def _run_modulation_check(p, man, out, ts):
    exact, _ = MD.integrate_reduced_law(p["M0"], p["beta"], p["tau_end"])
    rep = MD.bootstrap_check(exact, MD.BootstrapParams(p["M0"], tuple(p["K"]), p["beta"],
                                                       p["zeta_star"]))
    path = out / "bootstrap.json"
    path.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    man.add_file(path)
    for k, v in rep.items():
        man.probe(f"bootstrap_{k}", 0.0, 0.0, passed=v == "PASS")


def _initial(sim, p):
    kind, amp = p["initial"], p["amplitude"]
    if sim.cfg.geometry == "radial2d":
        mesh = sim.mesh
        if kind == "U":
            return amp * mesh.cell_average(lambda r: 4 * r**2 / (1 + r**2))
        if kind == "gaussian":  # amp * 8 pi total mass with unit variance
            return mesh.cell_average(lambda r: 4 * amp * (1 - np.exp(-r**2 / 2)))
        raise ConfigInvalid(f"unknown initial data {kind!r}")
    X, Z = np.meshgrid(sim.mesh.rbar, sim.mesh.zbar, indexing="ij")
    rho = np.hypot(X, Z)
    if kind == "U":
        return amp * P.U(rho)
    if kind == "gaussian":
        return amp * 4 * np.exp(-rho**2 / 2)
    raise ConfigInvalid(f"unknown initial data {kind!r}")


def _run_sim(p, man, out, ts):
    keys = set(SM.SimConfig.__dataclass_fields__)
    try:
        cfg = SM.SimConfig(**{k: v for k, v in p.items() if k in keys}).validate()
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc
    sim = SM.Simulator(cfg)
    run = sim.run(_initial(sim, p))
    for f in run.write(out):
        man.add_file(f)
    masses = np.array([r[1] for r in run.ledger])
    drift = float(np.max(np.abs(masses / masses[0] - 1)))
    man.probe("mass_drift", drift, p["mass_tol"] * ts)
    man.series["mass_drift"] = [[r[0], r[1] / masses[0] - 1] for r in run.ledger]
    man.series["sim_lambda"] = [[r[0], r[3]] for r in run.ledger]


def _run_sim_fit(p, man, out, ts):
    if not p["snapshot"]:
        raise ConfigInvalid("sim_fit needs a snapshot path")
    fld = read_axisym(p["snapshot"])
    if fld.z_nodes.size == 1:
        fld = RadialField(RadialGrid(fld.r_nodes, "gamma", "snapshot"), fld.values[:, 0])
        lam, loc = SM.fit_scale(fld)
        d = SM.profile_distance(fld, lam, radius=p["radius"])
    else:
        lam, loc = SM.fit_scale(fld, p["offset"])
        d = SM.profile_distance(fld, lam, (loc[0] - p["offset"], loc[1]), p["radius"])
    path = out / "fit.json"
    path.write_text(json.dumps({"lambda_fit": lam, "peak": list(loc), "sup_local": d.sup_local,
                                "e_norm": d.e_norm}, indent=2) + "\n")
    man.add_file(path)


def run_experiment(config: ExperimentConfig, out=None) -> RunManifest:
    out = _prepare_out(out or config.out)
    p = config.resolved()
    man = RunManifest(config.digest(), __version__, time.time(), root=str(out), seed=config.seed)
    cfg_path = out / "config.json"
    cfg_path.write_text(config.to_json())
    man.add_file(cfg_path)
    ts = config.tol_scale
    k = config.kind
    if k == "fields":
        _run_fields(p, man, out, ts)
    elif k == "spectral_build":
        _run_spectral_build(p, man, out, ts)
    elif k == "eigen_scan":
        _run_eigen_scan(p, man, out, ts, config.seed)
    elif k == "modulation_reduced":
        _run_modulation_reduced(p, man, out, ts)
    elif k == "modulation_shoot":
        _run_modulation_shoot(p, man, out, ts)
    elif k == "modulation_check":
        _run_modulation_check(p, man, out, ts)
    elif k == "sim_run":
        _run_sim(p, man, out, ts)
    elif k == "sim_fit":
        _run_sim_fit(p, man, out, ts)
    man.finished = time.time()
    man.write()
    return man


SERIES_FILES = {
    "lambda_vs_time": ("lambda_vs_time.dat", "T-t lambda sqrt(T-t)*exp(-sqrt(|log(T-t)|/2))"),
    "match_gap": ("match_gap.dat", "1/|log nu| sup_gap"),
    "residual_vs_nu": ("residual_vs_nu.dat", "nu residual_constant"),
    "mass_drift": ("mass_drift.dat", "t relative_mass_drift"),
    "sim_lambda": ("sim_lambda.dat", "t lambda_fit"),
}


def emit_plot_data(manifest: RunManifest) -> list:
    """Whitespace-separated column files, one per recorded series."""
    if not manifest.series:
        raise SeriesMissing("manifest has no series")
    files = []
    for name, rows in manifest.series.items():
        fname, header = SERIES_FILES.get(name, (f"{name}.dat", name))
        path = Path(manifest.root) / fname
        with path.open("w") as fh:
            fh.write(f"# {header}\n")
            for row in rows:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        files.append(path)
    return files
