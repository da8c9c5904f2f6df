"""Experiment orchestration: runs, ensembles, convergence studies, persistence.

Ledgers are written as CSV with ``repr`` floats, so equal runs give
byte-identical files.  A run directory holds ``ledger.csv``, optional
snapshots ``snap_<step>.bin`` and a ``manifest.json`` that lists every
produced file together with its SHA-256.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import csv
import hashlib
import json
import logging
import math
import os
import time

import numpy as np

from . import diagnostics as dg
from . import solver as sv
from .errors import ConfigError, InvalidInputError, QSpdeError
from .initial import make_initial
from .noise import WienerPath
from .spectral import save_snapshot

log = logging.getLogger(__name__)

try:
    from importlib.metadata import version as _pkg_version
    VERSION = _pkg_version("artifact")
except Exception:  # not installed
    VERSION = "0.1.0"


@dataclass
class ExperimentSpec:
    name: str
    run: object
    audits: tuple = ()
    out: str = "out"

    def __post_init__(self):
        bad = [a for a in self.audits if a not in AUDITS]
        if bad:
            raise ConfigError(f"unknown audits {bad}; known: {sorted(AUDITS)}")


@dataclass
class RunManifest:
    spec_hash: str
    version: str
    seeds: list
    files: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    status: str = "ok"
    failures: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def write(self, out):
        path = os.path.join(out, "manifest.json")
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=_jsonable)
        return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def workers_from_env(default=1):
    v = os.environ.get("QSPDE_THREADS")
    if not v:
        return default
    try:
        n = int(v)
    except ValueError:
        raise ConfigError(f"QSPDE_THREADS must be an integer, got {v!r}") from None
    if n < 1:
        raise ConfigError("QSPDE_THREADS must be >= 1")
    return n


# ---- persistence -------------------------------------------------------------

def write_csv(path, rows, columns=None):
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv`, numeric cells as float."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            try:
                conv[k] = float(v)
            except (TypeError, ValueError):
                conv[k] = v
        out.append(conv)
    return out


def write_ledger(path, trajectory):
    return write_csv(path, trajectory.ledger, sv.LEDGER_COLUMNS)


# ---- single trajectories -------------------------------------------------------

def wiener_path(cfg, seed, level=0, base_dt=None):
    """Path at ``cfg.dt``; ``base_dt`` anchors the level hierarchy for ladders."""
    noise = cfg.noise
    if noise.off:
        return None
    if base_dt is None:
        return WienerPath.for_horizon(seed, noise.modes, cfg.dt, cfg.T)
    return WienerPath.for_horizon(seed, noise.modes, base_dt, cfg.T, level)


def simulate(run, seed=None, solver_config=None, path=None):
    """Integrate the configured initial state; ``seed`` selects the noise path only."""
    cfg = solver_config or run.solver
    seed = run.seed if seed is None else seed
    if path is None:
        path = wiener_path(cfg, seed)
    return sv.run(initial_state(run, cfg), cfg, path)


def initial_state(run, cfg=None):
    cfg = cfg or run.solver
    return make_initial(run.init_kind, cfg.grid, cfg.consts, **run.init_params)


def _audit_lower_bound(run, traj):
    c = run.solver.consts
    R = run.solver.cutoff_R
    rep = dg.audit_lower_bound(traj, R, envelope_rate=(c.gamma - 1.0) * R)
    return {"audit": "lower-bound", "rate": rep.rate, "c_hat": rep.c_hat, "R": R,
            "envelope_rate": rep.envelope_rate, "violations": rep.violations}


def _audit_energy(run, traj):
    e = dg.energy_ledger_check(traj)
    return {"audit": "energy", "C_hat": e.C_hat, "certified": e.certified, "violations": e.violations,
            "min_slack": float(e.slack.min()) if len(e.slack) else 0.0}


AUDITS = {"lower-bound": _audit_lower_bound, "energy": _audit_energy}


def run_experiment(spec):
    """Run one trajectory plus its audits and persist everything under ``spec.out``."""
    t0 = time.perf_counter()
    run = spec.run
    try:
        os.makedirs(spec.out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {spec.out}: {exc}") from exc
    if not os.access(spec.out, os.W_OK):
        raise ConfigError(f"output directory {spec.out} is not writable")
    manifest = RunManifest(run.spec_hash, VERSION, [run.seed])
    files = {}
    try:
        traj = simulate(run)
    except QSpdeError as exc:
        manifest.status = "failed"
        manifest.failures.append(f"trajectory: {exc}")
        manifest.wall_clock = time.perf_counter() - t0
        manifest.write(spec.out)
        return manifest, None
    files["ledger"] = write_ledger(os.path.join(spec.out, "ledger.csv"), traj)
    for step, state in traj.snapshots:
        p = os.path.join(spec.out, f"snap_{step:06d}.bin")
        save_snapshot(p, state.packed(), state.grid.dim, state.grid.N, state.t)
        files[f"snapshot_{step}"] = p
    rows = []
    for name in spec.audits:
        try:
            rows.append(AUDITS[name](run, traj))
        except QSpdeError as exc:
            manifest.failures.append(f"audit {name}: {exc}")
    if rows:
        files["audits"] = write_csv(os.path.join(spec.out, "audits.csv"), rows,
                                    sorted({k for r in rows for k in r}, key=lambda k: (k != "audit", k)))
    manifest.files = {k: {"path": os.path.relpath(v, spec.out), "sha256": file_hash(v)} for k, v in files.items()}
    manifest.summary = {"steps": len(traj.ledger) - 1, "final_t": traj.final.t,
                        "stopped": traj.stop_info.stopped, "stop_criterion": traj.stop_info.criterion,
                        "warnings": traj.warnings}
    if manifest.failures:
        manifest.status = "partial"
    manifest.wall_clock = time.perf_counter() - t0
    manifest.write(spec.out)
    return manifest, traj


# ---- ensembles ------------------------------------------------------------------

def _ensemble_member(args):
    run, seed = args
    return simulate(run, seed)


def run_ensemble(run, seeds, workers=1):
    """Trajectories for each seed; ordering follows ``seeds`` whatever the pool does."""
    jobs = [(run, s) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_ensemble_member(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_ensemble_member, jobs))


# ---- convergence ------------------------------------------------------------------

@dataclass
class ConvergenceResult:
    dts: np.ndarray
    errors: np.ndarray
    order: float = None
    ratio: float = None
    monotone: bool = True
    reference_dt: float = None
    note: str = ""

    def rows(self):
        """One CSV row per ladder level; order and note are repeated on each row."""
        return [{"dt": float(d), "error": float(e), "order": self.order, "ratio": self.ratio,
                 "monotone": self.monotone, "note": self.note}
                for d, e in zip(self.dts, self.errors)]


def observed_order(dts, errors):
    """Least-squares slope of log(error) against log(dt), with the monotonicity flag."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    order = np.argsort(dts)[::-1]
    e = errors[order]
    monotone = bool(np.all(np.diff(e) < 0))
    if len(dts) < 3:
        ratio = float(e[0] / e[-1]) if len(e) == 2 and e[-1] > 0 else None
        return ConvergenceResult(dts[order], e, None, ratio, monotone,
                                 note="two-point ladder: error ratio only")
    if not monotone or np.any(e <= 0):
        return ConvergenceResult(dts[order], e, None, None, False,
                                 note="errors not monotone in dt: no order claimed")
    slope = float(np.polyfit(np.log(dts[order]), np.log(e), 1)[0])
    return ConvergenceResult(dts[order], e, slope, None, True)


def state_error(a, b):
    return float(np.abs(a.packed() - b.packed()).max())


def convergence_study(run, levels=4, reference_factor=4, seeds=None, base_dt=None):
    """Strong error at the horizon for dt, dt/2, ... against a finer reference.

    All runs share one refinement-consistent Wiener path per seed; the
    error is averaged over seeds.  The reference step is the finest ladder
    step divided by ``reference_factor`` (a power of two).
    """
    cfg = run.solver
    if levels < 2:
        raise InvalidInputError("a ladder needs at least two levels")
    extra = int(round(math.log2(reference_factor)))
    if 2 ** extra != reference_factor:
        raise InvalidInputError("reference factor must be a power of two")
    base_dt = cfg.dt if base_dt is None else base_dt
    seeds = [run.seed] if seeds is None else list(seeds)
    initial = initial_state(run)
    dts = [base_dt / 2 ** l for l in range(levels)]
    errs = np.zeros(levels)
    for seed in seeds:
        def solve(level):
            c = cfg.with_(dt=base_dt / 2 ** level)
            path = None if c.noise.off else WienerPath.for_horizon(seed, c.noise.modes, base_dt, c.T, level)
            traj = sv.run(initial, c, path)
            if traj.stop_info.stopped:
                raise QSpdeError(f"convergence run stopped at t={traj.stop_info.stop_time}: "
                                 f"{traj.stop_info.message}")
            return traj.final
        ref = solve(levels - 1 + extra)
        for l in range(levels):
            errs[l] += state_error(solve(l), ref) / len(seeds)
    res = observed_order(dts, errs)
    res.reference_dt = base_dt / 2 ** (levels - 1 + extra)
    return res
