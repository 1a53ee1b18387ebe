"""Spontaneous-collapse dynamics: Poisson-timed Gaussian localization jumps
superposed on Schrödinger evolution.

Each jump multiplies the state by the reduction operator

    L_n(x) = (alpha/pi)^{D/4} exp(-alpha (q_n - x)^2 / 2)

and renormalizes; jump centers are Born-weighted through the jump density
p_n(x) = ||L_n(x) psi||^2, and jump times form a Poisson process of rate
lambda per particle.  For a composite of N constituents at packing n per
localization volume the effective center-of-mass rate is Gamma = lambda n^2 N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCollapse, DegenerateState
from .grids import Grid, WaveField, norm
from .propagate import PotentialField, evolve_for, free_potential, energy_expectation
from .bohmian import grid_cdf, _invert_cdf
from .rng import substream

__all__ = [
    "GrwParams",
    "JumpEvent",
    "GrwRun",
    "MassDensityField",
    "reduction_operator",
    "jump_density",
    "sample_jump_center",
    "simulate",
    "amplification_rate",
    "mass_density",
    "energy_series",
]


@dataclass(frozen=True)
class GrwParams:
    """Collapse rate per particle and inverse-square localization width.

    Values are in simulation units; use from_physical() to rescale the
    standard laboratory numbers (lambda ~ 1e-16 / s, alpha ~ 1e10 / cm^2).
    """

    lam: float
    alpha: float

    def __post_init__(self):
        if self.lam < 0 or self.alpha <= 0:
            raise ValueError("need lam >= 0 and alpha > 0")

    @property
    def r_c(self) -> float:
        """Localization length 1/sqrt(alpha)."""
        return 1.0 / np.sqrt(self.alpha)

    @staticmethod
    def from_physical(length_unit_cm: float, time_unit_s: float,
                      lam_per_s: float = 1e-16,
                      alpha_per_cm2: float = 1e10) -> "GrwParams":
        """Rescale physical (lambda, alpha) to simulation units given the
        physical size of one simulation length/time unit."""
        return GrwParams(lam=lam_per_s * time_unit_s,
                         alpha=alpha_per_cm2 * length_unit_cm ** 2)


@dataclass(frozen=True)
class JumpEvent:
    time: float
    particle: int
    center: float
    norm_factor: float


@dataclass
class GrwRun:
    params: GrwParams
    seed: int
    duration: float
    dt: float
    jumps: list[JumpEvent]
    snapshot_times: np.ndarray
    energies: np.ndarray
    final: WaveField
    snapshots: list[WaveField] = field(default=None, repr=False)


@dataclass
class MassDensityField:
    """Per-particle mass density rho^(n)(x) = m_n * marginal |Psi|^2."""

    axis: np.ndarray
    densities: list[np.ndarray]
    masses: list[float]


def _particle_count(grid: Grid) -> int:
    # each grid axis is one particle moving in 1D
    return grid.dims


def _axis_coordinate(grid: Grid, particle: int) -> np.ndarray:
    x = grid.axis(particle)
    shape = [1] * grid.dims
    shape[particle] = grid.n[particle]
    return x.reshape(shape)


def reduction_operator(psi: WaveField, center: float, alpha: float,
                       particle: int = 0) -> tuple[WaveField, float]:
    """Apply L_n(center) and renormalize; returns (state, pre-norm factor).

    The Gaussian acts on one particle coordinate with the per-dimension
    prefactor (alpha/pi)^{1/4}, keeping 1D results exactly normalized.
    """
    q = _axis_coordinate(psi.grid, particle)
    kernel = (alpha / np.pi) ** 0.25 * np.exp(-0.5 * alpha * (q - center) ** 2)
    collapsed = psi.amplitudes * kernel
    factor = float(np.sqrt(np.sum(np.abs(collapsed) ** 2) * psi.grid.cell_volume()))
    if factor <= 0.0 or not np.isfinite(factor):
        raise DegenerateCollapse(
            f"collapse at x={center} leaves no support (norm factor {factor})")
    return psi.with_amplitudes(collapsed / factor), factor


def jump_density(psi: WaveField, alpha: float, particle: int = 0) -> np.ndarray:
    """p(x) = ||L_n(x) psi||^2 over the particle's axis; integrates to 1.

    Equals the Gaussian smoothing of the particle's marginal density with
    kernel (alpha/pi)^{1/2} exp(-alpha u^2), computed by direct convolution.
    """
    total = norm(psi) ** 2
    if total <= 0:
        raise DegenerateState("jump density of a zero field")
    grid = psi.grid
    marginal = psi.density()
    for ax in reversed(range(grid.dims)):
        if ax != particle:
            marginal = marginal.sum(axis=ax) * grid.dx[ax]
    x = grid.axis(particle)
    dx = grid.dx[particle]
    half = grid.n[particle] // 2
    u = dx * np.arange(-half, half)
    kernel = np.sqrt(alpha / np.pi) * np.exp(-alpha * u ** 2)
    p = np.convolve(marginal, kernel, mode="full")[half: half + len(x)] * dx
    return p / total


def sample_jump_center(psi: WaveField, alpha: float, rng,
                       particle: int = 0) -> float:
    """Inverse-CDF draw from the exact discrete jump density."""
    p = jump_density(psi, alpha, particle)
    edges, cdf = grid_cdf(p, psi.grid.axis(particle))
    return float(_invert_cdf(edges, cdf, rng.random(1))[0])


def simulate(psi0: WaveField, params: GrwParams, duration: float,
             V: PotentialField | None = None, seed: int = 0,
             dt: float = 0.01, snapshot_every: float = 0.0,
             keep_snapshots: bool = False,
             max_jumps: int | None = None) -> GrwRun:
    """Jump-interrupted evolution over [0, duration].

    Between jumps the state follows the split-step propagator; with lam = 0
    the step sequence is identical to a plain propagator run.  Jump times are
    exponential with total rate (number of particles) * lam; the struck
    particle is uniform and the center Born-weighted.  Snapshots (and the
    energy series) are taken every snapshot_every plus at 0 and duration.
    """
    if V is None:
        V = free_potential(psi0.grid)
    n_particles = _particle_count(psi0.grid)
    rng = substream(seed, "grw", "jumps")
    total_rate = n_particles * params.lam

    # draw the full jump schedule up front
    jump_times = []
    t = 0.0
    if total_rate > 0:
        while True:
            t += rng.exponential(1.0 / total_rate)
            if t >= duration or (max_jumps is not None and len(jump_times) >= max_jumps):
                break
            jump_times.append(t)

    if snapshot_every > 0:
        marks = np.arange(0.0, duration + snapshot_every / 2, snapshot_every)
        if marks[-1] < duration - 1e-12:
            marks = np.append(marks, duration)
    else:
        marks = np.array([0.0, duration])

    events = sorted([(tt, "jump", i) for i, tt in enumerate(jump_times)]
                    + [(tt, "mark", i) for i, tt in enumerate(marks)])

    psi = psi0.copy()
    jumps: list[JumpEvent] = []
    times_out, energies, kept = [], [], []
    t_now = 0.0
    for when, kind, _ in events:
        seg = when - t_now
        if seg > 1e-12:
            psi = evolve_for(psi, seg, V, dt)
            t_now = when
        if kind == "jump":
            particle = int(rng.integers(n_particles))
            center = sample_jump_center(psi, params.alpha, rng, particle)
            psi, factor = reduction_operator(psi, center, params.alpha, particle)
            jumps.append(JumpEvent(time=when, particle=particle,
                                   center=center, norm_factor=factor))
        else:
            times_out.append(when)
            energies.append(energy_expectation(psi, V))
            if keep_snapshots:
                kept.append(psi.copy())
    if t_now < duration - 1e-12:
        psi = evolve_for(psi, duration - t_now, V, dt)

    return GrwRun(params=params, seed=seed, duration=duration, dt=dt,
                  jumps=jumps, snapshot_times=np.array(times_out),
                  energies=np.array(energies), final=psi,
                  snapshots=kept if keep_snapshots else None)


def amplification_rate(lam: float, n_per_volume: int, n_volumes: int) -> float:
    """Gamma = lambda n^2 N for the center of mass of a composite."""
    if n_per_volume < 1 or n_volumes < 1:
        raise ValueError("need n, N >= 1")
    return lam * n_per_volume ** 2 * n_volumes


def mass_density(psi: WaveField, masses) -> MassDensityField:
    """Marginal |Psi|^2 per particle scaled by its mass (1 or 2 particles)."""
    grid = psi.grid
    n_particles = _particle_count(grid)
    masses = [float(m) for m in np.atleast_1d(masses)]
    if len(masses) != n_particles:
        raise ValueError(f"need {n_particles} masses, got {len(masses)}")
    if n_particles > 2:
        raise ValueError("mass density supported for 1 or 2 particles")
    dens = psi.density()
    out = []
    for p in range(n_particles):
        marginal = dens
        for ax in reversed(range(grid.dims)):
            if ax != p:
                marginal = marginal.sum(axis=ax) * grid.dx[ax]
        out.append(masses[p] * marginal)
    return MassDensityField(axis=grid.axis(0), densities=out, masses=masses)


def energy_series(run: GrwRun) -> np.ndarray:
    """(t, <E>) table recorded at the run's snapshot marks."""
    return np.column_stack([run.snapshot_times, run.energies])
