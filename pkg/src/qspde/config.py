"""Flat ``key = value`` configuration files with dotted keys.

Blank lines and ``#`` comments are ignored.  Every key must be known;
``init.*`` keys are passed to the named initial-condition generator and
``audit.*`` / ``converge.*`` keys parameterize the corresponding commands.

Example::

    grid.dim = 2
    grid.N = 32
    solver.dt = 1e-3
    solver.T = 0.1
    noise.kind = diagonal-multiplicative
    noise.sigma = 0.1
    init.kind = random-band-limited
    init.seed = 4
"""
from dataclasses import dataclass, field
import hashlib
import math

from .errors import ConfigError, InvalidInputError
from .initial import GENERATORS
from .noise import NoiseModel
from .solver import FixedPointConfig, SolverConfig
from .spectral import TorusGrid
from .tensor import MaterialConstants


def _inf_float(v):
    v = v.strip().lower()
    if v in ("inf", "+inf", "infinity"):
        return math.inf
    return float(v)


def _opt_int(v):
    return None if v.strip().lower() in ("none", "auto", "") else int(v)


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


KEYS = {
    "grid.dim": int, "grid.N": int, "grid.dealias": float,
    "solver.dt": float, "solver.T": float, "solver.galerkin_m": _opt_int,
    "solver.q_diffusion": str, "solver.velocity_diffusion": str,
    "solver.mass_form": str, "solver.save_every": int,
    "fixed_point.window": int, "fixed_point.max_iters": int, "fixed_point.tol": float,
    "cutoff.R": _inf_float, "clamp.K": _inf_float,
    "noise.kind": str, "noise.sigma": float, "noise.modes": int, "noise.beta": float,
    "noise.seed": int, "noise.table": _floats,
    "stop.max_level": int, "stop.density_floor": float,
    "ledger.s": int, "stress.form": str,
    "audit.samples": int, "audit.s": int, "audit.seeds": _ints, "audit.paths": int,
    "audit.p": float, "audit.kmax": int,
    "converge.levels": int, "converge.reference_factor": int, "converge.seeds": _ints,
    "experiment.name": str,
}
for _name in MaterialConstants.__dataclass_fields__:
    KEYS[f"consts.{_name}"] = float


def _guess(v):
    """Literal for free-form ``init.*`` values: int, float, comma tuple or string."""
    v = v.strip()
    if "," in v:
        return tuple(_guess(x) for x in v.split(",") if x.strip())
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def parse_text(text):
    """Raw key -> string mapping with line-numbered errors."""
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value', got {line!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {no}: duplicate key {key!r}")
        if key not in KEYS and not key.startswith("init."):
            raise ConfigError(f"line {no}: unknown key {key!r}")
        out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: solver settings plus experiment-level options."""

    solver: SolverConfig
    seed: int = 0
    init_kind: str = "random-band-limited"
    init_params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def option(self, key, default=None):
        return self.options.get(key, default)

    @property
    def spec_hash(self):
        text = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw))
        text += f"\nseed={self.seed}"
        return hashlib.sha256(text.encode()).hexdigest()


def build(raw, seed=None):
    """Typed :class:`RunConfig` from a raw mapping; all problems raise ConfigError."""
    vals = {}
    init = {}
    for key, v in raw.items():
        if key.startswith("init."):
            init[key[5:]] = _guess(v)
            continue
        try:
            vals[key] = KEYS[key](v)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {v!r} ({exc})") from None
    get = vals.get
    try:
        grid = TorusGrid(get("grid.dim", 2), get("grid.N", 32), get("grid.dealias", 2.0 / 3.0))
        consts = MaterialConstants(**{k[7:]: v for k, v in vals.items() if k.startswith("consts.")})
        kind = get("noise.kind", "off")
        noise_kw = dict(kind=kind, sigma=get("noise.sigma", 0.0), modes=get("noise.modes", 16),
                        beta=get("noise.beta", 1.0))
        if kind == "custom-table":
            noise_kw["table"] = get("noise.table", ())
        noise = NoiseModel(**noise_kw)
        solver = SolverConfig(
            grid=grid, consts=consts, dt=get("solver.dt", 1e-3), T=get("solver.T", 0.1),
            galerkin_m=get("solver.galerkin_m"),
            fixed_point=FixedPointConfig(get("fixed_point.window", 1), get("fixed_point.max_iters", 1),
                                         get("fixed_point.tol", 1e-12)),
            cutoff_R=get("cutoff.R", 100.0), clamp_K=get("clamp.K", math.inf), noise=noise,
            stop_max_level=get("stop.max_level", 20), density_floor=get("stop.density_floor", 1e-8),
            q_diffusion=get("solver.q_diffusion", "explicit"),
            velocity_diffusion=get("solver.velocity_diffusion", "explicit"),
            mass_form=get("solver.mass_form", "symmetric"), stress_form=get("stress.form", "display"),
            save_every=get("solver.save_every", 0), ledger_s=get("ledger.s", 1),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    if seed is None:
        seed = get("noise.seed", 0)
    init_kind = init.pop("kind", "random-band-limited")
    if init_kind not in GENERATORS:
        raise ConfigError(f"unknown init.kind {init_kind!r}; known: {sorted(GENERATORS)}")
    if init_kind == "random-band-limited":
        init.setdefault("seed", seed)
    options = {k: v for k, v in vals.items() if k.split(".")[0] in ("audit", "converge", "experiment")}
    raw = dict(raw)
    return RunConfig(solver, int(seed), init_kind, init, options, raw)


def load(path, seed=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build(parse_text(text), seed)


def loads(text, seed=None):
    return build(parse_text(text), seed)
