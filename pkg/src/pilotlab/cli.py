"""Command-line harness: config loading, scenario execution, structured
output (JSON summary + CSV profiles + rendered figures + digest manifest).

Commands: afshar, doubleslit, grw, duality-table, classical-sweep,
packet-demo, validate.  Exit codes: 0 success, 2 config error, 3 numerical
failure, 64 unknown command.  Flags mirror PILOTLAB_* environment variables
(flag wins over environment wins over file).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import afshar as afshar_mod
from . import bohmian, classical, duality, grw, packets
from .config import (ScenarioConfig, config_hash, load_config, validate_config)
from .errors import ConfigError, PilotLabError
from .grids import WaveField, make_grid, normalize, gaussian_state
from .propagate import (EvolutionPlan, absorbing_potential, evolve,
                        evolve_for, free_potential)
from .report import (RunWriter, profile_figure, series_figure,
                     trajectory_figure)
from .rng import substream

COMMANDS = ("afshar", "doubleslit", "grw", "duality-table",
            "classical-sweep", "packet-demo", "validate")

_ENV_PREFIX = "PILOTLAB_"


def _env(name: str, fallback=None):
    return os.environ.get(_ENV_PREFIX + name, fallback)


def _summary_config_echo(cfg: ScenarioConfig) -> dict:
    echo: dict[str, dict] = {}
    for (section, key), value in sorted(cfg.values.items()):
        if (section, key) == ("run", "threads"):
            continue  # runtime metadata, lives in the manifest
        echo.setdefault(section, {})[key] = value
    return echo


def _base_summary(cfg: ScenarioConfig, command: str, seed: int) -> dict:
    return {
        "command": command,
        "schema_version": cfg.get("schema", "version"),
        "seed": seed,
        "config": _summary_config_echo(cfg),
    }


def _afshar_config(cfg: ScenarioConfig, seed: int) -> afshar_mod.AfsharConfig:
    a = cfg.section("afshar")
    wire_width = a["wire_width"] if a["wire_width"] > 0 else None
    return afshar_mod.AfsharConfig(
        pinhole_separation=a["pinhole_separation"],
        pinhole_width=a["pinhole_width"],
        carrier_k=a["carrier_k"],
        t_wire_grid=a["t_wire_grid"],
        t_lens=a["t_lens"],
        t_image=a["t_image"],
        lens_focal=a["lens_focal"],
        n_wires=a["n_wires"],
        wire_width_frac=a["wire_width_frac"],
        wire_width=wire_width,
        open_slits=a["open_slits"],
        x_min=cfg.get("grid", "x_min"),
        x_max=cfg.get("grid", "x_max"),
        n_points=cfg.get("grid", "n"),
        mass=cfg.get("physics", "mass"),
        hbar=cfg.get("physics", "hbar"),
        dt=a["dt"],
        absorber_fraction=a["absorber_fraction"],
        absorber_strength=a["absorber_strength"],
        snapshot_every=cfg.get("run", "snapshot_every"),
        trajectories=a["trajectories"],
        seed=seed,
    )


def run_afshar(cfg: ScenarioConfig, writer: RunWriter, seed: int,
               stage: str = "all") -> dict:
    acfg = _afshar_config(cfg, seed)
    if stage == "all":
        results = afshar_mod.run_all(acfg)
    else:
        results = {stage: afshar_mod.run_stage(acfg, stage)}

    summary = _base_summary(cfg, "afshar", seed)
    summary["stages"] = {s: r.scalars() for s, r in results.items()}

    if "i" in results and "iii" in results:
        ri, r3 = results["i"], results["iii"]
        summary["peak_ratio_iii_over_i"] = {
            "c1": r3.peak_c1 / ri.peak_c1 if ri.peak_c1 > 0 else None,
            "c2": r3.peak_c2 / ri.peak_c2 if ri.peak_c2 > 0 else None,
        }
    if "iii" in results:
        r3 = results["iii"]
        if r3.wire_centers is not None:
            covered = r3.wire_width * len(r3.wire_centers)
            v_floor = duality.visibility_floor_from_interception(
                r3.interception_fraction, covered, r3.wire_plane_peak_density)
            summary["duality_linkage"] = {
                "inferred_visibility_floor": v_floor,
                "per_lobe_flux_separation": abs(r3.flux_c1 - r3.flux_c2)
                / max(r3.flux_c1 + r3.flux_c2, 1e-300),
                "note": "reported side by side; the bound-based inference "
                        "and the lobe fluxes answer different questions",
            }

    for s, r in results.items():
        writer.write_csv(f"image_{s}.csv", ["x", "intensity"],
                         zip(r.image_x, r.image_intensity))
        if r.ensemble is not None:
            writer.write_csv(f"trajectories_{s}.csv",
                             ["trajectory_id", "t", "x", "alive"],
                             r.ensemble.to_rows())

    curves = {f"stage {s}": r.image_intensity for s, r in results.items()}
    any_result = next(iter(results.values()))
    writer.save_figure("images.png", profile_figure(
        any_result.image_x, curves, "Detector-plane irradiance",
        xlabel="x", ylabel="I(x)"))

    wired = next((r for r in results.values() if r.wire_centers is not None), None)
    if wired is not None and wired.snapshots:
        plane = next((sn for sn in wired.snapshots
                      if abs(sn.time - acfg.t_wire_grid) < 1e-9
                      and sn.tag == "pre_element"), None)
        if plane is not None:
            xs = plane.field.grid.axis(0)
            rho = plane.field.density()
            blocked = afshar_mod.wire_blocked_region(
                plane.field.grid, wired.wire_centers, wired.wire_width)
            writer.write_csv("wire_plane.csv", ["x", "density", "blocked"],
                             zip(xs, rho, blocked.astype(int)))
            writer.save_figure("wire_plane.png", profile_figure(
                xs, {"|psi|^2": rho},
                "Wire-plane density with wire positions",
                marks=wired.wire_centers))
    traj = next((r for r in results.values() if r.ensemble is not None), None)
    if traj is not None:
        writer.save_figure("trajectories.png", trajectory_figure(
            traj.ensemble.times, traj.ensemble.positions,
            f"Stage {traj.stage} trajectories (M={traj.ensemble.count})"))
    return summary


def _doubleslit_state(cfg: ScenarioConfig):
    grid = make_grid(cfg.get("grid", "x_min"), cfg.get("grid", "x_max"),
                     cfg.get("grid", "n"))
    sec = cfg.section("doubleslit")
    x = grid.axis(0)
    sig, d = sec["width"], sec["separation"]
    amps = (np.exp(-(x - d / 2) ** 2 / (4 * sig ** 2))
            + np.exp(-(x + d / 2) ** 2 / (4 * sig ** 2)))
    psi0 = normalize(WaveField(grid, amps.astype(complex),
                               mass=cfg.get("physics", "mass"),
                               hbar=cfg.get("physics", "hbar")))
    return psi0, sec


def run_doubleslit(cfg: ScenarioConfig, writer: RunWriter, seed: int,
                   trajectories: int | None = None) -> dict:
    psi0, sec = _doubleslit_state(cfg)
    grid = psi0.grid
    count = trajectories if trajectories is not None else sec["trajectories"]
    duration = sec["duration"]
    every = cfg.get("run", "snapshot_every")
    V = absorbing_potential(grid, fraction=0.10, strength=1.0)
    plan = EvolutionPlan(
        duration=duration, dt=sec["dt"],
        snapshot_times=np.arange(0.0, duration + every / 2, every).tolist())
    snaps = evolve(psi0, plan, V)
    ens = bohmian.sample_equilibrium(psi0, count, seed)
    span = grid.x_max[0] - grid.x_min[0]
    interior = (grid.x_min[0] + 0.10 * span, grid.x_max[0] - 0.10 * span)
    moved = bohmian.integrate_trajectories(ens, snaps, edge_bounds=interior)

    by_time = {round(s.time, 9): s for s in snaps}
    ks_rows = []
    for t in cfg.float_list("doubleslit", "ks_times"):
        snap = by_time.get(round(t, 9))
        if snap is None:
            continue
        j = int(np.argmin(np.abs(moved.times - t)))
        stat = bohmian.equivariance_check(moved.positions[j], snap.field)
        ks_rows.append({"t": t, "ks": stat})
    critical = bohmian.ks_critical_value(count)
    inversions = bohmian.sorted_order_inversions(moved)
    occupancy = bohmian.fringe_occupancy(moved, snaps, threshold=0.1)

    summary = _base_summary(cfg, "doubleslit", seed)
    summary["trajectories"] = count
    summary["ks_critical_1pct"] = critical
    summary["ks_by_time"] = ks_rows
    summary["sorted_order_inversions"] = inversions
    summary["fringe_occupancy_theta_0.1"] = occupancy

    writer.write_csv("trajectories.csv", ["trajectory_id", "t", "x", "alive"],
                     moved.to_rows())
    final = snaps[-1].field
    writer.write_csv("final_density.csv", ["x", "density"],
                     zip(grid.axis(0), final.density()))

    stride = max(1, len(snaps) // 200)
    bg_rows = snaps[::stride]
    bg_rho = np.stack([s.field.density() for s in bg_rows])
    xs = grid.axis(0)
    keep = np.abs(xs) < 150.0
    writer.save_figure("trajectories.png", trajectory_figure(
        moved.times, moved.positions,
        f"Double-slit trajectories (M={count})",
        background=(np.array([s.time for s in bg_rows]), xs[keep],
                    np.sqrt(bg_rho[:, keep]))))
    writer.save_figure("final_density.png", profile_figure(
        xs, {"|psi_T|^2": final.density()}, "Far-field density"))
    return summary


def run_grw(cfg: ScenarioConfig, writer: RunWriter, seed: int) -> dict:
    sec = cfg.section("grw")
    grid = make_grid(sec["x_min"], sec["x_max"], sec["n"])
    psi0 = gaussian_state(grid, sigma=sec["sigma0"],
                          mass=cfg.get("physics", "mass"),
                          hbar=cfg.get("physics", "hbar"))
    params = grw.GrwParams(lam=sec["lam"], alpha=sec["alpha"])
    runs = sec["runs"]
    duration = sec["duration"]
    every = max(duration / 20.0, sec["dt"])

    all_jump_rows, energies = [], []
    jump_counts = []
    for i in range(runs):
        child = int(substream(seed, "grw", "run", i).integers(0, 2 ** 63 - 1))
        run = grw.simulate(psi0, params, duration, seed=child,
                           dt=sec["dt"], snapshot_every=every)
        jump_counts.append(len(run.jumps))
        energies.append(run.energies)
        for ev in run.jumps:
            all_jump_rows.append((i, ev.time, ev.particle, ev.center,
                                  ev.norm_factor))

    times = np.arange(0.0, duration + every / 2, every)
    mean_e = np.mean(np.stack(energies), axis=0)
    slope = float(np.polyfit(times, mean_e, 1)[0]) if len(times) > 1 else 0.0
    theory = params.lam * cfg.get("physics", "hbar") ** 2 * params.alpha / (
        4.0 * cfg.get("physics", "mass"))

    summary = _base_summary(cfg, "grw", seed)
    summary["runs"] = runs
    summary["jump_count_mean"] = float(np.mean(jump_counts))
    summary["jump_count_expected"] = params.lam * duration
    summary["energy_slope"] = slope
    summary["energy_slope_theory"] = theory
    summary["r_c"] = params.r_c

    writer.write_csv("jumps.csv",
                     ["run", "t", "particle", "x", "norm_factor"],
                     all_jump_rows)
    writer.write_csv("energy.csv", ["t", "mean_energy"], zip(times, mean_e))
    writer.save_figure("energy.png", series_figure(
        times, {"batch mean <E>": mean_e,
                "theory slope": mean_e[0] + theory * times},
        "Collapse-driven energy growth", "t", "<E>"))
    return summary


def run_duality_table(cfg: ScenarioConfig, writer: RunWriter, seed: int) -> dict:
    sec = cfg.section("duality")
    rng = substream(seed, "duality", "pairs")
    pair_rows = []
    worst = 0.0
    for _ in range(200):
        a, b = rng.uniform(0.05, 3.0, size=2)
        amp = duality.TwoWaveAmplitudes(a, b)
        v = duality.visibility(amp)
        k = duality.distinguishability(amp)
        ident = duality.duality_identity(amp)
        worst = max(worst, abs(ident - 1.0))
        pair_rows.append((a, b, v, k, ident,
                          duality.englert_check(v, k)["status"]))

    # pointer-separation scan against equal-amplitude counterpropagating beams
    beam_grid = make_grid(-32.0 * np.pi, 32.0 * np.pi, 2048)
    x = beam_grid.axis(0)
    fringe_k = sec["fringe_k"]
    length = beam_grid.x_max[0] - beam_grid.x_min[0]
    psi1 = WaveField(beam_grid, np.exp(1j * fringe_k * x) / np.sqrt(length))
    psi2 = WaveField(beam_grid, np.exp(-1j * fringe_k * x) / np.sqrt(length))
    pointer_grid = make_grid(-40.0, 40.0, 1024)
    seps = np.linspace(0.0, sec["separation_max"], sec["scan_points"])
    pairs = [duality.PointerStates(
        gaussian_state(pointer_grid, center=0.0, sigma=sec["pointer_sigma"]),
        gaussian_state(pointer_grid, center=s, sigma=sec["pointer_sigma"]))
        for s in seps]
    scan = duality.contrast_vs_overlap(psi1, psi2, pairs, fringe_k)
    scan_rows = [(s, row["overlap_abs"], row["visibility"])
                 for s, row in zip(seps, scan)]
    scan_err = max(abs(r["visibility"] - r["overlap_abs"]) for r in scan)
    entries = []
    for s, row in zip(seps, scan):
        v = min(max(row["visibility"], 0.0), 1.0)
        k_val = np.sqrt(max(1.0 - v * v, 0.0))
        entries.append(duality.DualityReportEntry(
            visibility=v, distinguishability=k_val,
            identity=v * v + k_val * k_val, overlap=complex(row["overlap_abs"]),
            context=f"pointer separation {s:g}").as_dict())

    summary = _base_summary(cfg, "duality-table", seed)
    summary["identity_max_deviation"] = worst
    summary["scan_max_visibility_error"] = scan_err
    summary["report_entries"] = entries
    writer.write_csv("duality_pairs.csv",
                     ["r_b", "r_b_prime", "V", "K", "K2_plus_V2", "englert"],
                     pair_rows)
    writer.write_csv("duality_scan.csv",
                     ["separation", "overlap_abs", "fitted_visibility"],
                     scan_rows)
    writer.save_figure("duality_scan.png", series_figure(
        seps, {"|c|": np.array([r[1] for r in scan_rows]),
               "fitted V": np.array([r[2] for r in scan_rows])},
        "Fringe contrast vs pointer overlap", "pointer separation", "value"))
    return summary


def run_classical_sweep(cfg: ScenarioConfig, writer: RunWriter, seed: int) -> dict:
    sec = cfg.section("classical")
    masses = cfg.float_list("classical", "masses")
    sigma0 = sec["sigma0"]
    # a single packet needs far fewer points than the interferometer grid
    n = min(cfg.get("grid", "n"), 2048)
    grid = make_grid(cfg.get("grid", "x_min"), cfg.get("grid", "x_max"), n)

    def make_state(m):
        return gaussian_state(grid, sigma=sigma0, mass=m,
                              hbar=cfg.get("physics", "hbar"))

    sweep = classical.deviation_sweep(make_state, masses, q0=sec["q0"],
                                      duration=sec["duration"])
    top_mass = max(masses)
    inversions = classical.double_slit_noncrossing_at_mass(top_mass, seed=seed)

    summary = _base_summary(cfg, "classical-sweep", seed)
    summary["sweep"] = list(sweep.rows())
    summary["noncrossing_inversions_top_mass"] = inversions
    summary["top_mass"] = top_mass
    writer.write_csv("sweep.csv",
                     ["mass", "max_deviation", "max_quantum_potential"],
                     [(r["mass"], r["max_deviation"], r["max_quantum_potential"])
                      for r in sweep.rows()])
    writer.save_figure("sweep.png", series_figure(
        sweep.masses, {"max |Q_bohm - Q_class|": sweep.max_deviation,
                       "max |Q_pot| on path": sweep.max_quantum_potential},
        "Classical limit with growing mass", "mass", "deviation", logy=True))
    return summary


def run_packet_demo(cfg: ScenarioConfig, writer: RunWriter, seed: int) -> dict:
    sec = cfg.section("packet")
    grid = make_grid(-100.0, 100.0, 2048)
    kappa, k0, t = sec["kappa"], sec["k0"], sec["t"]
    k = grid.k_axis(0)
    phi = packets.SpectralAmplitude(
        grid, np.exp(-(k - k0) ** 2 / (4.0 * kappa ** 2)).astype(complex),
        mass=cfg.get("physics", "mass"), hbar=cfg.get("physics", "hbar"))
    psi0 = packets.synthesize(phi)
    norm0 = np.sqrt(np.sum(psi0.density()) * grid.dx[0])
    psi0 = psi0.with_amplitudes(psi0.amplitudes / norm0)
    phi0 = packets.analyze(psi0)
    roundtrip = float(np.max(np.abs(
        packets.synthesize(phi0).amplitudes - psi0.amplitudes)))
    sigma_x, sigma_k = packets.moment_widths(psi0)
    psi_t = packets.time_extend(phi0, t)
    split = evolve_for(psi0, t, free_potential(grid), dt=0.01)
    agreement = float(np.max(np.abs(psi_t.amplitudes - split.amplitudes)))

    summary = _base_summary(cfg, "packet-demo", seed)
    summary["sigma_x"] = sigma_x
    summary["sigma_k"] = sigma_k
    summary["sigma_product"] = sigma_x * sigma_k
    summary["roundtrip_max_error"] = roundtrip
    summary["dispersion_vs_splitstep_max_error"] = agreement

    x = grid.axis(0)
    writer.write_csv("packet.csv", ["x", "abs_psi0", "abs_psi_t"],
                     zip(x, np.abs(psi0.amplitudes), np.abs(psi_t.amplitudes)))
    writer.write_csv("spectrum.csv", ["k", "abs_phi"],
                     zip(np.fft.fftshift(k), np.fft.fftshift(np.abs(phi0.values))))
    writer.save_figure("packet.png", profile_figure(
        x, {"|psi(0)|": np.abs(psi0.amplitudes),
            "|psi(t)|": np.abs(psi_t.amplitudes)},
        "Packet synthesis and dispersion", ylabel="|psi|"))
    return summary


_RUNNERS = {
    "afshar": run_afshar,
    "doubleslit": run_doubleslit,
    "grw": run_grw,
    "duality-table": run_duality_table,
    "classical-sweep": run_classical_sweep,
    "packet-demo": run_packet_demo,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotlab",
        description="Pilot-wave / collapse-model numerical laboratory")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", default=_env("CONFIG"),
                       help="scenario config file (key=value sections)")
        p.add_argument("--seed", type=int,
                       default=None, help="override [run] seed")
        p.add_argument("--out", default=_env("OUT"),
                       help="output directory (default runs/<command>)")
        p.add_argument("--threads", type=int,
                       default=int(_env("THREADS", "1")),
                       help="worker threads (results are thread-count independent)")
        p.add_argument("--snapshot-every", type=float, default=None,
                       help="override [run] snapshot_every")

    p_afshar = sub.add_parser("afshar", help="run the interferometer stages")
    add_common(p_afshar)
    p_afshar.add_argument("--stage", choices=["i", "ii", "iii", "all"],
                          default="all")

    p_ds = sub.add_parser("doubleslit", help="free double slit with trajectories")
    add_common(p_ds)
    p_ds.add_argument("--trajectories", type=int, default=None)

    for name in ("grw", "duality-table", "classical-sweep", "packet-demo"):
        add_common(sub.add_parser(name))

    p_val = sub.add_parser("validate", help="check a config, run nothing")
    p_val.add_argument("--config", default=_env("CONFIG"), required=False)
    p_val.add_argument("--command", dest="check_command", default=None,
                       help="also check required keys for this command")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        parser.print_usage(sys.stderr)
        print(f"pilotlab: unknown command {argv[0]!r}", file=sys.stderr)
        return 64
    if not argv:
        parser.print_usage(sys.stderr)
        return 64
    args = parser.parse_args(argv)

    if args.command == "validate":
        if not args.config:
            print("validate: --config is required", file=sys.stderr)
            return 2
        try:
            report = validate_config(args.config, args.check_command)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        for warning in report.warnings:
            print(f"warning: {warning}")
        for error in report.errors:
            print(f"error: {error}")
        return 0 if report.ok else 2

    if not args.config:
        print(f"{args.command}: --config is required", file=sys.stderr)
        return 2

    overrides: dict[tuple[str, str], object] = {}
    env_seed = _env("SEED")
    if env_seed is not None:
        overrides[("run", "seed")] = int(env_seed)
    if args.seed is not None:
        overrides[("run", "seed")] = args.seed
    env_snap = _env("SNAPSHOT_EVERY")
    if env_snap is not None:
        overrides[("run", "snapshot_every")] = float(env_snap)
    if args.snapshot_every is not None:
        overrides[("run", "snapshot_every")] = args.snapshot_every

    try:
        cfg = load_config(args.config, command=args.command,
                          overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    seed = cfg.get("run", "seed")
    out_dir = args.out or os.path.join("runs", args.command)
    writer = RunWriter(out_dir, config_hash(cfg), seed)

    runner_args = {}
    if args.command == "afshar":
        runner_args["stage"] = args.stage
    if args.command == "doubleslit" and args.trajectories is not None:
        runner_args["trajectories"] = args.trajectories

    try:
        summary = _RUNNERS[args.command](cfg, writer, seed, **runner_args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PilotLabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    writer.write_json("summary.json", summary)
    path = writer.finalize(extras={"threads": args.threads})
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
