"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line with the measured values (run pytest with -s to see them all).
"""

import sys

import numpy as np
import pytest

import pilotlab as pl
from pilotlab.bohmian import (equivariance_check, ks_critical_value,
                              sorted_order_inversions)
from pilotlab.classical import double_slit_noncrossing_at_mass
from pilotlab.duality import (PointerStates, TwoWaveAmplitudes,
                              contrast_vs_overlap, duality_identity)
from pilotlab.grids import WaveField, make_grid, gaussian_state
from pilotlab.grw import (GrwParams, amplification_rate, jump_density,
                          sample_jump_center, simulate)
from pilotlab.packets import SpectralAmplitude, analyze, moment_widths, \
    synthesize, time_extend
from pilotlab.propagate import (PotentialField, evolve_for, free_potential)
from pilotlab.rng import substream

from conftest import GOLDEN_SEED


def _report(criterion: int, ok: bool, detail: str):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    sys.stdout.flush()
    assert ok, line


def test_criterion_1_interception(golden_results, stage_iii_timed):
    r3 = golden_results["results"]["iii"]
    r2 = golden_results["results"]["ii"]
    seconds = stage_iii_timed["seconds"]
    ok = (r3.interception_fraction <= 0.02
          and seconds <= 60.0
          and r2.interception_fraction >= 3.0 * r3.interception_fraction)
    _report(1, ok,
            f"stage iii interception {r3.interception_fraction:.5f} <= 0.02, "
            f"runtime {seconds:.1f}s <= 60s, stage ii/iii interception ratio "
            f"{r2.interception_fraction / r3.interception_fraction:.1f} >= 3")


def test_criterion_2_peak_ratio(golden_results):
    ri = golden_results["results"]["i"]
    r3 = golden_results["results"]["iii"]
    ratio1 = r3.peak_c1 / ri.peak_c1
    ratio2 = r3.peak_c2 / ri.peak_c2
    ok = ratio1 >= 0.95 and ratio2 >= 0.95
    _report(2, ok, f"per-lobe peak ratios iii/i = ({ratio1:.4f}, {ratio2:.4f}) >= 0.95")


def test_criterion_3_equivariance(doubleslit_bundle):
    b = doubleslit_bundle
    moved = b["ensemble"]
    crit = ks_critical_value(moved.count)
    by_time = {round(s.time, 9): s for s in b["snaps"]}
    stats = []
    for t in b["ks_times"]:
        j = int(np.argmin(np.abs(moved.times - t)))
        alive = moved.absorbed_time > t
        stats.append(equivariance_check(moved.positions[j][alive],
                                        by_time[round(t, 9)].field))
    ok = all(s < crit for s in stats)
    _report(3, ok, "KS at t=" + ",".join(f"{t:g}" for t in b["ks_times"])
            + " = " + ",".join(f"{s:.4f}" for s in stats)
            + f" all < {crit:.5f} (1% critical, M=10^4)")


def test_criterion_4_noncrossing(golden_results, doubleslit_bundle):
    inv_ds = sorted_order_inversions(doubleslit_bundle["ensemble"])
    inv_stage = sorted_order_inversions(golden_results["results"]["iii"].ensemble)
    inv_mass = double_slit_noncrossing_at_mass(16.0, count=400)
    ok = inv_ds == 0 and inv_stage == 0 and inv_mass == 0
    _report(4, ok, f"sorted-order inversions: doubleslit {inv_ds}, "
                   f"stage iii {inv_stage}, mass-ladder top {inv_mass} (all 0)")


def test_criterion_5_duality_algebra():
    rng = substream(GOLDEN_SEED, "acceptance", "pairs")
    worst = 0.0
    for _ in range(10000):
        a, b = rng.uniform(1e-3, 10.0, size=2)
        worst = max(worst, abs(duality_identity(TwoWaveAmplitudes(a, b)) - 1.0))

    beam_grid = make_grid(-32 * np.pi, 32 * np.pi, 2048)
    x = beam_grid.axis(0)
    length = beam_grid.x_max[0] - beam_grid.x_min[0]
    psi1 = WaveField(beam_grid, np.exp(1j * x) / np.sqrt(length))
    psi2 = WaveField(beam_grid, np.exp(-1j * x) / np.sqrt(length))
    pointer_grid = make_grid(-40.0, 40.0, 1024)
    seps = np.linspace(0.0, 12.0, 10)
    pairs = []
    for s in seps[:-1]:
        pairs.append(PointerStates(gaussian_state(pointer_grid, 0.0, 1.0),
                                   gaussian_state(pointer_grid, s, 1.0)))
    # exact c = 0 endpoint: disjoint supports
    y = pointer_grid.axis(0)
    box1 = pl.normalize(WaveField(pointer_grid,
                                  np.where(np.abs(y + 15) < 4, 1.0, 0.0).astype(complex)))
    box2 = pl.normalize(WaveField(pointer_grid,
                                  np.where(np.abs(y - 15) < 4, 1.0, 0.0).astype(complex)))
    pairs.append(PointerStates(box1, box2))
    rows = contrast_vs_overlap(psi1, psi2, pairs, fringe_k=1.0)
    scan_err = max(abs(r["visibility"] - r["overlap_abs"]) for r in rows)
    end_v1 = abs(rows[0]["visibility"] - 1.0)
    end_v0 = abs(rows[-1]["visibility"] - 0.0)
    ok = worst <= 1e-12 and scan_err <= 1e-4 and end_v1 <= 1e-6 and end_v0 <= 1e-6
    _report(5, ok, f"identity dev {worst:.2e} <= 1e-12, scan err {scan_err:.2e} "
                   f"<= 1e-4, endpoints ({end_v1:.2e}, {end_v0:.2e}) <= 1e-6")


def test_criterion_6_solver_oracles():
    # free-Gaussian width at t = 2
    g = make_grid(-40.0, 40.0, 2048)
    psi = pl.gaussian_state(g, sigma=1.0)
    out = evolve_for(psi, 2.0, free_potential(g), dt=0.01)
    x = g.axis(0)
    rho = out.density()
    rho /= np.sum(rho) * g.dx[0]
    width = np.sqrt(np.sum(x ** 2 * rho) * g.dx[0])
    width_err = abs(width / np.sqrt(2.0) - 1.0)

    # harmonic ground-state stationarity over t = 1
    g2 = make_grid(-20.0, 20.0, 1024)
    x2 = g2.axis(0)
    V2 = PotentialField(g2, 0.5 * x2 ** 2)
    ground = WaveField(g2, (np.exp(-x2 ** 2 / 2) / np.pi ** 0.25).astype(complex))
    evolved = evolve_for(ground, 1.0, V2, dt=2.5e-4)
    drift = np.max(np.abs(evolved.density() - ground.density()))

    # dt-halving convergence against the analytic coherent state
    def coherent(t, x0=1.0):
        xc = x0 * np.cos(t)
        pc = -x0 * np.sin(t)
        return (np.pi ** -0.25 * np.exp(-(x2 - xc) ** 2 / 2
                                        + 1j * (pc * x2 - 0.5 * xc * pc - 0.5 * t)))
    psi0 = WaveField(g2, coherent(0.0))
    exact = coherent(1.0)
    errs = [np.sqrt(np.sum(np.abs(evolve_for(psi0, 1.0, V2, dt).amplitudes
                                  - exact) ** 2) * g2.dx[0])
            for dt in (4e-3, 2e-3, 1e-3)]
    exps = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = (width_err <= 1e-6 and drift <= 1e-8
          and all(1.8 <= p <= 2.2 for p in exps))
    _report(6, ok, f"width rel err {width_err:.2e} <= 1e-6, stationarity "
                   f"{drift:.2e} <= 1e-8, convergence exponents "
                   + ",".join(f"{p:.3f}" for p in exps) + " in [1.8, 2.2]")


def test_criterion_7_grw():
    g = make_grid(-40.0, 40.0, 512)
    psi = pl.gaussian_state(g, sigma=1.0)

    # jump-density normalization along a jumpy run
    run = simulate(psi, GrwParams(lam=5.0, alpha=1.0), 3.0, seed=17, dt=0.005,
                   snapshot_every=0.25, keep_snapshots=True)
    norm_errs = [abs(np.sum(jump_density(s, 1.0)) * g.dx[0] - 1.0)
                 for s in run.snapshots]
    norm_ok = max(norm_errs) <= 1e-6

    # branch selection vs Born weights
    x = g.axis(0)
    amps = (np.sqrt(0.7) * np.exp(-(x - 10) ** 2 / 4)
            + np.sqrt(0.3) * np.exp(-(x + 10) ** 2 / 4))
    branchy = pl.normalize(WaveField(g, amps.astype(complex)))
    rng = substream(GOLDEN_SEED, "grw", "branch")
    freq = np.mean([sample_jump_center(branchy, 1.0, rng) > 0
                    for _ in range(1000)])
    branch_ok = abs(freq - 0.7) <= 0.03

    # Poisson jump counts, lam*T = 100 over a 100-run batch
    g_small = make_grid(-40.0, 40.0, 256)
    psi_small = pl.gaussian_state(g_small, sigma=1.0)
    params_p = GrwParams(lam=10.0, alpha=0.25)
    counts = []
    for i in range(100):
        child = int(substream(GOLDEN_SEED, "grw", "poisson", i).integers(0, 2 ** 63 - 1))
        counts.append(len(simulate(psi_small, params_p, 10.0, seed=child, dt=0.01).jumps))
    poisson_dev = abs(np.mean(counts) - 100.0)
    poisson_ok = poisson_dev <= 4.0 * np.sqrt(100.0)

    # energy-drift slope over 200 runs
    lam, alpha = 2.0, 1.0
    params_e = GrwParams(lam=lam, alpha=alpha)
    energies = []
    for i in range(200):
        child = int(substream(GOLDEN_SEED, "grw", "run", i).integers(0, 2 ** 63 - 1))
        energies.append(simulate(psi, params_e, 5.0, seed=child, dt=0.005,
                                 snapshot_every=0.25).energies)
    slope = np.polyfit(np.arange(0, 5.01, 0.25),
                       np.mean(np.stack(energies), axis=0), 1)[0]
    theory = lam * alpha / 4.0
    slope_ok = abs(slope / theory - 1.0) <= 0.20

    gamma_ok = (amplification_rate(1e-16, 10 ** 8, 10 ** 8) == pytest.approx(1e8)
                and amplification_rate(3.0, 2, 7) == 3.0 * 4 * 7)

    ok = norm_ok and branch_ok and poisson_ok and slope_ok and gamma_ok
    _report(7, ok, f"p(x) norm err {max(norm_errs):.2e} <= 1e-6, branch freq "
                   f"{freq:.3f} in 0.7+/-0.03, |Poisson mean - 100| = "
                   f"{poisson_dev:.2f} <= 40, slope/theory = {slope / theory:.3f} "
                   f"in 1+/-0.2, Gamma arithmetic exact")


def test_criterion_8_packet_tools():
    g = make_grid(-100.0, 100.0, 2048)
    rng = substream(GOLDEN_SEED, "acceptance", "packets")
    x = g.axis(0)
    smooth = np.zeros(2048, dtype=complex)
    for _ in range(4):
        smooth += rng.uniform(0.3, 1.0) * np.exp(
            -(x - rng.uniform(-8, 8)) ** 2 / rng.uniform(2, 10)
            + 1j * rng.uniform(-1, 1) * x)
    psi_r = pl.normalize(WaveField(g, smooth))
    roundtrip = np.max(np.abs(synthesize(analyze(psi_r)).amplitudes
                              - psi_r.amplitudes))

    k = g.k_axis(0)
    kappa = 0.5
    phi = SpectralAmplitude(g, np.exp(-(k - 2.0) ** 2 / (4 * kappa ** 2)).astype(complex))
    psi_g = synthesize(phi)
    psi_g = psi_g.with_amplitudes(psi_g.amplitudes / pl.norm(psi_g))
    sigma_x, sigma_k = moment_widths(psi_g)
    product_err = abs(sigma_x * sigma_k - 0.5)

    phi_n = analyze(psi_g)
    via_dispersion = time_extend(phi_n, 2.0)
    via_split = evolve_for(psi_g, 2.0, free_potential(g), dt=0.01)
    agreement = np.max(np.abs(via_dispersion.amplitudes - via_split.amplitudes))

    ok = roundtrip <= 1e-10 and product_err <= 1e-8 and agreement <= 1e-8
    _report(8, ok, f"roundtrip {roundtrip:.2e} <= 1e-10, sigma_x*sigma_k err "
                   f"{product_err:.2e} <= 1e-8, dispersion-vs-split-step "
                   f"{agreement:.2e} <= 1e-8")


def test_criterion_9_reproducibility(tmp_path):
    from pilotlab.cli import main
    cfg_text = """\
[schema]
version = 1
[run]
seed = 31416
snapshot_every = 0.5
[grid]
x_min = -150
x_max = 150
n = 1024
[doubleslit]
separation = 8.0
width = 1.0
duration = 20.0
dt = 0.02
trajectories = 500
ks_times = 10,20
"""
    cfg = tmp_path / "repro.ini"
    cfg.write_text(cfg_text)
    outs = []
    for threads in ("1", "4", "16"):
        out = tmp_path / f"t{threads}"
        assert main(["doubleslit", "--config", str(cfg), "--out", str(out),
                     "--threads", threads]) == 0
        outs.append((out / "summary.json").read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    _report(9, ok, f"summary.json byte-identical across --threads 1/4/16 "
                   f"({len(outs[0])} bytes)")
