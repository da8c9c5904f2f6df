"""Figures for run directories: norms, residuals and convergence plots.

Every figure is written as SVG next to the CSV it was drawn from.  The
Agg backend is selected so that reports render without a display.
"""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# stable SVG output: no timestamps, fixed element ids
matplotlib.rcParams["svg.hashsalt"] = "qspde"
_META = {"Date": None}


def _col(rows, name):
    return np.array([float(r[name]) for r in rows])


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_norms(rows, path):
    """Driving norms, density range and Phi against time."""
    t = _col(rows, "t")
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 7.5), sharex=True)
    axes[0].semilogy(t, np.maximum(_col(rows, "u_2inf"), 1e-300), label="||u||_{2,inf}")
    axes[0].semilogy(t, np.maximum(_col(rows, "q_3inf"), 1e-300), label="||Q||_{3,inf}")
    axes[0].set_ylabel("driving norms")
    axes[0].legend(loc="best")
    axes[1].plot(t, _col(rows, "min_r"), label="min r")
    axes[1].plot(t, _col(rows, "max_r"), label="max r")
    axes[1].set_ylabel("r")
    axes[1].legend(loc="best")
    axes[2].plot(t, _col(rows, "phi"), color="k")
    axes[2].set_ylabel("Phi")
    axes[2].set_xlabel("t")
    axes[2].set_ylim(-0.05, 1.05)
    return _save(fig, path)


def plot_residuals(rows, path, slack=None):
    """Q-tensor structure residuals, relative mass drift and (optionally) energy slack."""
    t = _col(rows, "t")
    panels = 3 if slack is not None else 2
    fig, axes = plt.subplots(panels, 1, figsize=(6.5, 2.6 * panels), sharex=True)
    floor = 1e-300
    axes[0].semilogy(t, np.maximum(_col(rows, "trace_residual"), floor), label="max |tr Q|")
    axes[0].semilogy(t, np.maximum(_col(rows, "symmetry_residual"), floor), label="max |Q - Q^T|")
    axes[0].set_ylabel("residual")
    axes[0].legend(loc="best")
    mass = _col(rows, "mass")
    axes[1].semilogy(t, np.maximum(np.abs(mass - mass[0]) / abs(mass[0]), floor))
    axes[1].set_ylabel("relative mass drift")
    if slack is not None:
        axes[2].plot(t[: len(slack)], slack)
        axes[2].set_ylabel("energy slack")
    axes[-1].set_xlabel("t")
    return _save(fig, path)


def plot_convergence(rows, path, order=None):
    """Log-log error against dt with the fitted slope in the title."""
    dt = _col(rows, "dt")
    err = _col(rows, "error")
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.loglog(dt, err, "o-", label="error at horizon")
    if order is not None:
        ref = err[0] * (dt / dt[0]) ** order
        ax.loglog(dt, ref, "--", color="gray", label=f"slope {order:.3f}")
        ax.set_title(f"observed order {order:.3f}")
    else:
        ax.set_title("no order claimed")
    ax.set_xlabel("dt")
    ax.set_ylabel("sup error")
    ax.legend(loc="best")
    return _save(fig, path)


def emit_plots(directory):
    """Render every figure the directory's CSV files support.

    Returns ``(written, missing)``: paths of SVG files and the names of
    expected inputs that were absent.
    """
    from .diagnostics import energy_ledger_check
    from .experiments import read_csv
    from .solver import StopInfo, Trajectory

    written, missing = [], []
    ledger = os.path.join(directory, "ledger.csv")
    if os.path.exists(ledger):
        rows = read_csv(ledger)
        if rows:
            traj = Trajectory([r["t"] for r in rows], rows, [], StopInfo(), None)
            slack = energy_ledger_check(traj).slack
            written.append(plot_norms(rows, os.path.join(directory, "norms.svg")))
            written.append(plot_residuals(rows, os.path.join(directory, "residuals.svg"), slack))
    else:
        missing.append("ledger.csv")
    conv = os.path.join(directory, "convergence.csv")
    if os.path.exists(conv):
        rows = read_csv(conv)
        order = None
        if rows and "order" in rows[0] and rows[0]["order"] != "":
            order = float(rows[0]["order"])
        if rows:
            written.append(plot_convergence(rows, os.path.join(directory, "convergence.svg"), order))
    return written, missing
