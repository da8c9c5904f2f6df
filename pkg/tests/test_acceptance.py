"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a PASS/FAIL line with the measured values; the lines
are repeated in the pytest terminal summary.
"""
import os
import time

import numpy as np
import pytest

from qspde import config as cfgmod
from qspde import diagnostics as dg
from qspde import dynamics as dyn
from qspde import experiments as ex
from qspde import solver as sv
from qspde.initial import random_state, rng_for, single_mode
from qspde.noise import NoiseModel, WienerPath
from qspde.spectral import TorusGrid
from qspde.tensor import MaterialConstants

from conftest import random_tuple, record

CONSTS = MaterialConstants()
GRID = TorusGrid(2, 32)


def within(budget, t0):
    took = time.perf_counter() - t0
    return took, took < budget


def test_cancellation_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for grid, seed in ((TorusGrid(2, 32), 1), (TorusGrid(3, 16), 2)):
        rng = rng_for(seed, 24)
        for _ in range(50):
            t1, t2 = dyn.cancellation_terms(grid, *random_tuple(grid, rng))
            worst = max(worst, abs(t1 + t2) / max(abs(t1), abs(t2)))
    took, fast = within(10, t0)
    ok = worst <= 1e-11 and fast
    record(1, "cancellation identity", ok,
           f"max |t1+t2|/max|t| = {worst:.2e} (tol 1e-11) over 2x50 tuples, {took:.1f}s (< 10s)")
    assert ok


def test_traceless_symmetric_preservation():
    t0 = time.perf_counter()
    cfg = sv.SolverConfig(grid=GRID, dt=1e-3, T=0.5, noise=NoiseModel(sigma=0.1, modes=16))
    traj = sv.run(random_state(GRID, CONSTS, seed=21, q_amp=0.3),
                  cfg, WienerPath.for_horizon(21, 16, 1e-3, 0.5))
    scale = traj.column("q_scale")
    tr = np.max(traj.column("trace_residual") / scale)
    sym = np.max(traj.column("symmetry_residual") / scale)
    took, fast = within(60, t0)
    ok = (not traj.stop_info.stopped and traj.final.t == pytest.approx(0.5)
          and tr <= 1e-10 and sym <= 1e-10 and fast)
    record(2, "S0^3 preservation", ok,
           f"max |tr Q|/|Q| = {tr:.2e}, max |Q-Q^T|/|Q| = {sym:.2e} (tol 1e-10), {took:.1f}s (< 60s)")
    assert ok


def test_mass_conservation():
    t0 = time.perf_counter()
    cfg = sv.SolverConfig(grid=GRID, dt=1e-3, T=1.0, mass_form="conservative",
                          noise=NoiseModel(sigma=0.1, modes=16))
    traj = sv.run(random_state(GRID, CONSTS, seed=31, rho_amp=0.2),
                  cfg, WienerPath.for_horizon(31, 16, 1e-3, 1.0))
    mass = traj.column("mass")
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    took, fast = within(120, t0)
    ok = not traj.stop_info.stopped and drift <= 1e-9 and fast
    record(3, "mass conservation", ok,
           f"relative drift {drift:.2e} (tol 1e-9) over T=1, {took:.1f}s (< 120s)")
    assert ok


def test_freeze_and_heat_decay():
    t0 = time.perf_counter()
    k = (2, 1)
    s = single_mode(GRID, CONSTS, k=k, q_amp=0.2, u_amp=0.1, rho_amp=0.1)
    cfg = sv.SolverConfig(grid=GRID, dt=1e-3, T=0.1, cutoff_R=1e-3, q_diffusion="integrating-factor")
    traj = sv.run(s, cfg)
    f = traj.final
    decay = np.exp(-CONSTS.Gamma * CONSTS.L * (k[0] ** 2 + k[1] ** 2) * 0.1)
    err = float(np.abs(f.Q - decay * s.Q).max() / np.abs(decay * s.Q).max())
    frozen = np.array_equal(f.r, s.r) and np.array_equal(f.u, s.u)
    phi_max = float(traj.column("phi").max())
    took, fast = within(10, t0)
    ok = err <= 1e-6 and frozen and phi_max == 0.0 and fast
    record(4, "freeze and heat decay", ok,
           f"max Phi = {phi_max}, Q rel err {err:.2e} (tol 1e-6), r,u bitwise constant = {frozen}, "
           f"{took:.1f}s (< 10s)")
    assert ok


def test_density_bound():
    t0 = time.perf_counter()
    uni = dg.audit_lower_bound(dg.uniform_compression(r0=1.0, div_u=-1.0, gamma=2.0, T=1.0, dt=1e-3),
                               R=1.0, envelope_rate=0.5)
    rate_err = abs(uni.rate - 0.5) / 0.5
    R = 3.0
    cfg = sv.SolverConfig(grid=GRID, dt=1e-3, T=0.2, cutoff_R=R, noise=NoiseModel(sigma=0.2, modes=8))
    random_viol = 0
    for i in range(20):
        s = random_state(GRID, CONSTS, seed=500 + i, u_amp=0.3, q_amp=0.1, rho_amp=0.2)
        traj = sv.run(s, cfg, WienerPath.for_horizon(500 + i, 8, 1e-3, 0.2))
        rep = dg.audit_lower_bound(traj, R, envelope_rate=(CONSTS.gamma - 1.0) * R)
        random_viol += rep.violations
    took, fast = within(120, t0)
    ok = rate_err <= 0.05 and uni.violations == 0 and random_viol == 0 and fast
    record(5, "density bound", ok,
           f"uniform compression rate {uni.rate:.5f} vs 0.5 ({100 * rate_err:.2f}% <= 5%), "
           f"{uni.violations} violations; 20 random runs: {random_viol} violations, {took:.1f}s (< 120s)")
    assert ok


def test_explicit_matches_fixed_point():
    t0 = time.perf_counter()
    noise = NoiseModel(sigma=0.1, modes=16)
    base = sv.SolverConfig(grid=GRID, dt=1e-3, T=0.1, noise=noise)
    fixed = base.with_(fixed_point=sv.FixedPointConfig(window=3, max_iters=3))
    s = random_state(GRID, CONSTS, seed=61, u_amp=0.3, q_amp=0.3)
    path = WienerPath.for_horizon(61, 16, 1e-3, 0.1)
    a = sv.run(s, base, path)
    b = sv.run(s, fixed, path)
    diff = float(np.abs(a.final.packed() - b.final.packed()).max())
    unconverged = [w for w in b.warnings if "not converged" in w]
    took, fast = within(120, t0)
    ok = diff <= 1e-8 and not unconverged and a.final.t == b.final.t and fast
    record(6, "explicit vs fixed point", ok,
           f"sup diff at T=0.1 = {diff:.2e} (tol 1e-8), fixed point converged on every window = "
           f"{not unconverged}, {took:.1f}s (< 120s)")
    assert ok


LADDER = """\
grid.dim = 2
grid.N = 32
solver.dt = 5e-3
solver.T = 0.2
init.kind = random-band-limited
init.seed = 3
init.u_amp = 0.3
init.q_amp = 0.3
"""


def test_self_convergence():
    t0 = time.perf_counter()
    det = ex.convergence_study(cfgmod.loads(LADDER, seed=1), levels=4, reference_factor=4)
    noisy = cfgmod.loads(LADDER + "noise.kind = diagonal-multiplicative\nnoise.sigma = 0.5\n", seed=1)
    sto = ex.convergence_study(noisy, levels=4, reference_factor=4, seeds=[1, 2])
    took, fast = within(600, t0)
    ok = (det.order is not None and det.order >= 0.9 and sto.order is not None
          and sto.order >= 0.45 and fast)
    record(7, "self-convergence", ok,
           f"deterministic order {det.order:.3f} (>= 0.9), stochastic order {sto.order:.3f} (>= 0.45), "
           f"{took:.1f}s (< 600s)")
    assert ok


def test_estimate_audits():
    t0 = time.perf_counter()
    parts = []
    ok = True
    for kind, s in (("commutator", 4), ("moser", 4), ("composition", 3)):
        a = dg.calibrate(GRID, kind, 200, seed=81, s=s, consts=CONSTS)
        b = dg.calibrate(GRID, kind, 200, seed=82, s=s, consts=CONSTS)
        for key in a:
            stab = dg.stability(a[key], b[key])
            joint = max(a[key].constant, b[key].constant)
            viol = dg.violations(a[key], joint) + dg.violations(b[key], joint)
            held = dg.violations(b[key], a[key].constant)
            ok = ok and stab <= 0.10 and viol == 0 and a[key].samples == b[key].samples == 200
            parts.append(f"{key} C={joint:.4g} stability {100 * stab:.1f}% viol {viol} (held-out {held})")
    took, fast = within(300, t0)
    ok = ok and fast
    record(8, "estimate audits", ok, "; ".join(parts) + f"; {took:.1f}s (< 300s)")
    assert ok


def test_energy_ledger():
    t0 = time.perf_counter()
    s = random_state(GRID, CONSTS, seed=3)
    fits = []
    clean = True
    for dt in (1e-3, 5e-4):
        led = dg.energy_ledger_check(sv.run(s, sv.SolverConfig(grid=GRID, dt=dt, T=0.2)))
        clean = clean and led.violations == 0 and bool(np.all(led.slack >= -1e-12 * np.abs(led.remainder).max()))
        fits.append(led.C_hat)
    change = abs(fits[1] - fits[0]) / abs(fits[0])
    took, fast = within(300, t0)
    ok = clean and change <= 0.10 and fast
    record(9, "energy ledger", ok,
           f"C_hat(dt=1e-3) = {fits[0]:.4e}, C_hat(dt=5e-4) = {fits[1]:.4e}, change {100 * change:.2f}% "
           f"(<= 10%), nonnegative slack at every step = {clean}, {took:.1f}s (< 300s)")
    assert ok


def test_determinism(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    monkeypatch.setenv("QSPDE_THREADS", "1")
    run = cfgmod.loads(LADDER.replace("solver.T = 0.2", "solver.T = 0.1").replace("5e-3", "1e-3")
                       + "noise.kind = diagonal-multiplicative\nnoise.sigma = 0.2\n", seed=11)
    hashes = []
    for name in ("first", "second"):
        m, _ = ex.run_experiment(ex.ExperimentSpec("det", run, ("energy",), str(tmp_path / name)))
        hashes.append(m.files["ledger"]["sha256"])
    took, fast = within(60, t0)
    ok = hashes[0] == hashes[1] and fast
    record(10, "determinism", ok,
           f"ledger sha256 {hashes[0][:16]}... vs {hashes[1][:16]}... equal = {hashes[0] == hashes[1]}, "
           f"{took:.1f}s (< 60s)")
    assert ok
