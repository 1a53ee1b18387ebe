"""Mass-scaling study of the classical limit.

The quantum potential carries an hbar^2/2m prefactor, so at fixed wave shape
the guidance corrections shrink as the mass grows; trajectories approach
Newtonian references while the noncrossing rule persists at every mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import WaveField, make_grid, normalize
from .propagate import EvolutionPlan, absorbing_potential, evolve
from .bohmian import (ensemble_from_positions, integrate_trajectories,
                      quantum_potential, velocity_field)

__all__ = [
    "LimitSweep",
    "classical_reference",
    "bohmian_trajectory",
    "deviation_sweep",
    "double_slit_noncrossing_at_mass",
]


@dataclass
class LimitSweep:
    """Per-mass deviation metrics on matched initial conditions."""

    masses: np.ndarray
    max_deviation: np.ndarray
    max_quantum_potential: np.ndarray

    def rows(self):
        for m, dev, qp in zip(self.masses, self.max_deviation,
                              self.max_quantum_potential):
            yield {"mass": float(m), "max_deviation": float(dev),
                   "max_quantum_potential": float(qp)}


def classical_reference(q0: float, v0: float, force, duration: float,
                        dt: float = 1e-3) -> np.ndarray:
    """RK4 Newtonian trajectory under F(x) (per unit mass); rows (t, x, v)."""
    n = int(round(duration / dt))
    out = np.empty((n + 1, 3))
    q, v = float(q0), float(v0)
    out[0] = (0.0, q, v)
    for i in range(1, n + 1):
        k1q, k1v = v, force(q)
        k2q, k2v = v + 0.5 * dt * k1v, force(q + 0.5 * dt * k1q)
        k3q, k3v = v + 0.5 * dt * k2v, force(q + 0.5 * dt * k2q)
        k4q, k4v = v + dt * k3v, force(q + dt * k3q)
        q += (dt / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        v += (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        out[i] = (i * dt, q, v)
    return out


def force_from_potential(potential, h: float = 1e-5):
    """Central-difference force -dV/dx per unit mass for a callable V(x)."""
    def force(x):
        return -(potential(x + h) - potential(x - h)) / (2.0 * h)
    return force


def bohmian_trajectory(psi0: WaveField, q0, duration: float,
                       snapshot_every: float = 0.1,
                       V=None, dt: float = 0.01):
    """Evolve the field and transport the given starting points through it."""
    plan = EvolutionPlan(duration=duration, dt=dt,
                         snapshot_times=np.arange(0.0, duration + snapshot_every / 2,
                                                  snapshot_every).tolist())
    snaps = evolve(psi0, plan, V)
    ens = ensemble_from_positions(np.atleast_1d(q0))
    return integrate_trajectories(ens, snaps), snaps


def deviation_sweep(make_state, masses, q0: float, duration: float,
                    force=None, dt: float = 0.01,
                    snapshot_every: float = 0.1) -> LimitSweep:
    """Bohmian-vs-Newtonian deviation across a mass ladder at fixed horizon.

    make_state(mass) builds the initial field for one rung; classical
    references start from the same q0 with v0 = v(q0, 0) and feel only the
    classical force (zero by default).
    """
    masses = np.asarray(sorted(masses), dtype=float)
    if force is None:
        force = lambda x: 0.0
    devs, qpots = [], []
    for m in masses:
        psi0 = make_state(m)
        ens, snaps = bohmian_trajectory(psi0, q0, duration,
                                        snapshot_every, dt=dt)
        v0 = float(velocity_field(psi0).component(0)[
            np.argmin(np.abs(psi0.grid.axis(0) - q0))])
        ref = classical_reference(q0, v0, force, duration, dt=snapshot_every)
        bohm = ens.positions[:, 0]
        ref_on_traj = np.interp(ens.times, ref[:, 0], ref[:, 1])
        devs.append(np.max(np.abs(bohm - ref_on_traj)))
        qp_max = 0.0
        snap_by_time = {round(s.time, 9): s for s in snaps}
        for j, t in enumerate(ens.times):
            s = snap_by_time.get(round(float(t), 9))
            if s is None:
                continue
            qp = quantum_potential(s.field)
            idx = np.argmin(np.abs(s.field.grid.axis(0) - bohm[j]))
            qp_max = max(qp_max, abs(qp.values[idx]))
        qpots.append(qp_max)
    return LimitSweep(masses=masses, max_deviation=np.array(devs),
                      max_quantum_potential=np.array(qpots))


def double_slit_noncrossing_at_mass(mass: float, count: int = 400,
                                    separation: float = 8.0,
                                    sigma: float = 1.0,
                                    base_duration: float = 40.0,
                                    seed: int = 7,
                                    n_points: int = 2048) -> int:
    """Run a double-slit ensemble at the given mass; returns the number of
    sorted-order inversions (0 = noncrossing holds).

    Time and step are rescaled with mass so every rung probes the same
    diffraction physics.
    """
    from .bohmian import sample_equilibrium  # local import to avoid cycle noise

    grid = make_grid(-150.0, 150.0, n_points)
    x = grid.axis(0)
    amps = (np.exp(-(x - separation / 2) ** 2 / (4 * sigma ** 2))
            + np.exp(-(x + separation / 2) ** 2 / (4 * sigma ** 2)))
    psi0 = normalize(WaveField(grid, amps.astype(complex), mass=mass))
    V = absorbing_potential(grid, fraction=0.1, strength=1.0)
    duration = base_duration * mass
    plan = EvolutionPlan(duration=duration, dt=0.02 * mass,
                         snapshot_times=np.arange(0.0, duration + 1e-9,
                                                  0.25 * mass).tolist())
    snaps = evolve(psi0, plan, V)
    ens = sample_equilibrium(psi0, count, seed)
    moved = integrate_trajectories(ens, snaps)
    order = np.argsort(moved.initial, kind="stable")
    inversions = 0
    for row in moved.positions:
        arranged = row[order]
        inversions += int(np.sum(arranged[1:] < arranged[:-1]))
    return inversions
