"""Shared fixtures: the heavy golden-scenario runs are session-scoped so the
module tests and the acceptance suite reuse one computation."""

import numpy as np
import pytest

import pilotlab as pl
from pilotlab.afshar import AfsharConfig, run_all, run_stage
from pilotlab.bohmian import integrate_trajectories, sample_equilibrium
from pilotlab.propagate import EvolutionPlan, absorbing_potential, evolve

GOLDEN_SEED = 20260809


def golden_config(**patch) -> AfsharConfig:
    """The frozen canonical scenario (mirrors configs/golden_afshar.ini)."""
    base = dict(
        pinhole_separation=8.0, pinhole_width=1.0, carrier_k=1.0,
        t_wire_grid=95.0, t_lens=100.0, t_image=200.0, lens_focal=50.0,
        n_wires=6, wire_width_frac=0.1, open_slits="both",
        x_min=-250.0, x_max=250.0, n_points=4096,
        mass=1.0, hbar=1.0, dt=0.01,
        absorber_fraction=0.10, absorber_strength=1.0,
        snapshot_every=0.25, trajectories=0, seed=GOLDEN_SEED,
    )
    base.update(patch)
    return AfsharConfig(**base)


def double_slit_state(grid, separation=8.0, sigma=1.0, mass=1.0,
                      amp1=1.0, amp2=1.0):
    x = grid.axis(0)
    amps = (amp1 * np.exp(-(x - separation / 2) ** 2 / (4 * sigma ** 2))
            + amp2 * np.exp(-(x + separation / 2) ** 2 / (4 * sigma ** 2)))
    return pl.normalize(pl.WaveField(grid, amps.astype(complex), mass=mass))


@pytest.fixture(scope="session")
def golden_results():
    """Stages i-iii on the golden config, trajectories attached to stage iii."""
    import time
    cfg = golden_config(trajectories=1000)
    t0 = time.monotonic()
    results = run_all(cfg, keep_snapshots=True)
    elapsed = time.monotonic() - t0
    return {"config": cfg, "results": results, "elapsed_all": elapsed}


@pytest.fixture(scope="session")
def stage_iii_timed():
    """A standalone stage-iii run for the wall-clock acceptance bound."""
    import time
    cfg = golden_config(trajectories=0)
    t0 = time.monotonic()
    result = run_stage(cfg, "iii")
    return {"result": result, "seconds": time.monotonic() - t0}


@pytest.fixture(scope="session")
def single_slit_run():
    """Stage i with one pinhole open, trajectories attached."""
    cfg = golden_config(open_slits="1", trajectories=400)
    return run_stage(cfg, "i")


@pytest.fixture(scope="session")
def doubleslit_bundle():
    """Free double slit to the far field with an M = 10^4 ensemble."""
    grid = pl.make_grid(-250.0, 250.0, 4096)
    psi0 = double_slit_state(grid)
    V = absorbing_potential(grid, fraction=0.10, strength=1.0)
    duration = 95.0
    plan = EvolutionPlan(duration=duration, dt=0.01,
                         snapshot_times=np.arange(0.0, duration + 1e-9,
                                                  0.25).tolist())
    snaps = evolve(psi0, plan, V)
    ens = sample_equilibrium(psi0, 10000, GOLDEN_SEED)
    span = grid.x_max[0] - grid.x_min[0]
    interior = (grid.x_min[0] + 0.10 * span, grid.x_max[0] - 0.10 * span)
    moved = integrate_trajectories(ens, snaps, edge_bounds=interior)
    return {"psi0": psi0, "snaps": snaps, "ensemble": moved,
            "ks_times": [19.0, 38.0, 57.0, 76.0, 95.0]}
