"""Command line entry point: ``qspde {simulate,audit,converge,report}``.

Summaries are printed as tab-separated ``key<TAB>value`` lines; tables go
to CSV files in the output directory.  Exit codes: 0 success, 2
configuration error, 3 runtime failure (partial results are kept).
"""
import argparse
import logging
import os
import sys

from . import config as cfgmod
from . import diagnostics as dg
from . import experiments as ex
from .errors import ConfigError, QSpdeError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
AUDIT_KINDS = ("commutator", "moser", "composition", "lower-bound", "energy", "moments")


def _emit(pairs, stream=None):
    stream = stream or sys.stdout
    for k, v in pairs:
        stream.write(f"{k}\t{v}\n")


def cmd_simulate(args):
    run = cfgmod.load(args.config, args.seed)
    audits = tuple(a for a in (args.audits or "").split(",") if a)
    spec = ex.ExperimentSpec(run.option("experiment.name", "simulate"), run, audits, args.out)
    manifest, _ = ex.run_experiment(spec)
    if args.plots and manifest.status != "failed":
        from .plotting import emit_plots
        emit_plots(args.out)
    _emit([("status", manifest.status), ("spec_hash", manifest.spec_hash), ("seed", run.seed),
           ("wall_clock", f"{manifest.wall_clock:.3f}")]
          + [(k, v) for k, v in manifest.summary.items()]
          + [(f"file:{k}", v["path"]) for k, v in manifest.files.items()]
          + [("failure", f) for f in manifest.failures])
    return EXIT_RUNTIME if manifest.status == "failed" else EXIT_OK


def _estimate_audit(run, kind, out):
    grid = run.solver.grid
    seeds = run.option("audit.seeds", (1, 2))
    if len(seeds) != 2:
        raise ConfigError("audit.seeds must name exactly two ensembles")
    n = run.option("audit.samples", 200)
    s = run.option("audit.s", 3 if kind == "composition" else 4)
    kmax = run.option("audit.kmax")
    a = dg.calibrate(grid, kind, n, seeds[0], s, run.solver.consts, kmax=kmax)
    b = dg.calibrate(grid, kind, n, seeds[1], s, run.solver.consts, kmax=kmax)
    rows = []
    for key in a:
        joint = max(a[key].constant, b[key].constant)
        rows.append({"estimate": key, "samples": a[key].samples + b[key].samples, "s": s,
                     "C_first": a[key].constant, "C_second": b[key].constant, "C": joint,
                     "stability": dg.stability(a[key], b[key]),
                     "violations": dg.violations(a[key], joint) + dg.violations(b[key], joint),
                     "held_out_exceedances": dg.violations(b[key], a[key].constant)})
    return rows


def cmd_audit(args):
    run = cfgmod.load(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    kind = args.kind
    if kind in ("commutator", "moser", "composition"):
        rows = _estimate_audit(run, kind, args.out)
    elif kind == "moments":
        paths = run.option("audit.paths", 16)
        seeds = [run.seed + i for i in range(paths)]
        trajs = ex.run_ensemble(run, seeds, ex.workers_from_env())
        m = dg.ensemble_moments(trajs, run.option("audit.p", 1.0))
        rows = [{"estimate": "moments", "p": m.p, "paths": m.n, "mean": m.mean, "stderr": m.stderr,
                 "note": m.note}]
    else:
        traj = ex.simulate(run)
        rows = [ex.AUDITS[kind](run, traj)]
        if traj.stop_info.stopped:
            rows[0]["stopped"] = traj.stop_info.criterion
    path = ex.write_csv(os.path.join(args.out, f"audit_{kind}.csv"), rows,
                        sorted({k for r in rows for k in r}))
    for r in rows:
        _emit([(f"{r.get('estimate', kind)}:{k}", v) for k, v in r.items() if k != "estimate"])
    _emit([("file", path)])
    return EXIT_OK


def cmd_converge(args):
    run = cfgmod.load(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    levels = args.levels or run.option("converge.levels", 4)
    res = ex.convergence_study(run, levels, run.option("converge.reference_factor", 4),
                               run.option("converge.seeds"))
    path = ex.write_csv(os.path.join(args.out, "convergence.csv"), res.rows())
    from .plotting import plot_convergence
    fig = plot_convergence(res.rows(), os.path.join(args.out, "convergence.svg"), res.order)
    _emit([("order", res.order), ("ratio", res.ratio), ("monotone", res.monotone),
           ("reference_dt", res.reference_dt), ("note", res.note), ("file", path), ("file", fig)])
    return EXIT_OK


def cmd_report(args):
    from .plotting import emit_plots
    if not os.path.isdir(args.dir):
        raise ConfigError(f"report directory {args.dir} does not exist")
    written, missing = emit_plots(args.dir)
    lines = [f"figure\t{os.path.basename(p)}" for p in written] + [f"missing\t{m}" for m in missing]
    with open(os.path.join(args.dir, "report.txt"), "w") as fh:
        fh.write("".join(line + "\n" for line in lines))
    _emit([tuple(line.split("\t")) for line in lines])
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qspde", description="Cut-off compressible nematic SPDE toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one trajectory and write its ledger")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", default="run")
    s.add_argument("--audits", help="comma list of lower-bound,energy")
    s.add_argument("--plots", action="store_true", help="also render figures")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("audit", help="numerical audit of an estimate or a trajectory")
    a.add_argument("--kind", required=True, choices=AUDIT_KINDS)
    a.add_argument("--config", required=True)
    a.add_argument("--seed", type=int)
    a.add_argument("--out", default="audit")
    a.set_defaults(func=cmd_audit)

    c = sub.add_parser("converge", help="temporal self-convergence study")
    c.add_argument("--config", required=True)
    c.add_argument("--seed", type=int)
    c.add_argument("--levels", type=int)
    c.add_argument("--out", default="converge")
    c.set_defaults(func=cmd_converge)

    r = sub.add_parser("report", help="render figures for a run or convergence directory")
    r.add_argument("--dir", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QSpdeError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
