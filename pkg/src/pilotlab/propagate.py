"""Split-step spectral time evolution plus instantaneous thin optical elements.

One step advances psi by the symmetric (Strang) factorization

    exp(-i V dt / 2 hbar) . exp(-i T dt / hbar) . exp(-i V dt / 2 hbar)

with the kinetic factor applied in Fourier space.  The scheme is norm
conserving for real potentials and second-order accurate in dt; an optional
nonpositive imaginary potential implements absorbing boundary layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateState
from .grids import Grid, WaveField, norm

__all__ = [
    "PotentialField",
    "ThinElement",
    "EvolutionPlan",
    "Snapshot",
    "step",
    "evolve",
    "evolve_for",
    "apply_element",
    "absorbed_fraction",
    "absorbing_potential",
    "free_potential",
    "amplitude_mask",
    "phase_mask",
    "lens",
    "energy_expectation",
    "stability_dt",
]

_TIME_TOL = 1e-9


@dataclass
class PotentialField:
    """Real potential V(x) with an optional absorbing imaginary part.

    values may be complex; Im(values) <= 0 everywhere (gain is forbidden).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError("potential shape does not match grid")
        if not np.all(np.isfinite(self.values.real)):
            raise ValueError("potential real part must be finite")
        if np.iscomplexobj(self.values) and np.any(self.values.imag > 1e-300):
            raise ValueError("imaginary part of the potential must be nonpositive")

    @property
    def is_absorbing(self) -> bool:
        return np.iscomplexobj(self.values) and np.any(self.values.imag < 0)


def free_potential(grid: Grid) -> PotentialField:
    return PotentialField(grid, np.zeros(grid.shape))


def absorbing_potential(grid: Grid, base: np.ndarray | None = None,
                        fraction: float = 0.10, strength: float = 1.0,
                        power: int = 3) -> PotentialField:
    """Add a polynomial-ramp absorber (-i strength ramp^power) on the outer
    `fraction` of each axis to an optional real base potential."""
    if not 0.0 < fraction < 0.5:
        raise ValueError("absorber fraction must lie in (0, 0.5)")
    gamma = np.zeros(grid.shape)
    for ax in range(grid.dims):
        x = grid.axis(ax)
        lo, hi = grid.x_min[ax], grid.x_max[ax]
        width = fraction * (hi - lo)
        ramp = np.zeros_like(x)
        left = x < lo + width
        ramp[left] = ((lo + width - x[left]) / width) ** power
        right = x >= hi - width
        ramp[right] = ((x[right] - (hi - width)) / width) ** power
        shape = [1] * grid.dims
        shape[ax] = grid.n[ax]
        gamma = gamma + ramp.reshape(shape)
    base_vals = np.zeros(grid.shape) if base is None else np.asarray(base)
    return PotentialField(grid, base_vals - 1j * strength * gamma)


@dataclass
class ThinElement:
    """Instantaneous pointwise multiplication by a transmission profile.

    kind is one of 'amplitude_mask', 'phase_mask', 'lens'; masks must satisfy
    |t| <= 1 pointwise.
    """

    kind: str
    transmission: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.transmission = np.asarray(self.transmission, dtype=np.complex128)
        if self.kind not in ("amplitude_mask", "phase_mask", "lens"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.kind in ("amplitude_mask", "phase_mask"):
            if np.any(np.abs(self.transmission) > 1.0 + 1e-12):
                raise ValueError("mask transmission must satisfy |t| <= 1")


def amplitude_mask(grid: Grid, blocked, label: str = "mask") -> ThinElement:
    """Hard mask: t = 0 where `blocked` (boolean array over the grid), else 1."""
    t = np.where(np.asarray(blocked, dtype=bool), 0.0, 1.0)
    return ThinElement("amplitude_mask", t, label=label)


def phase_mask(grid: Grid, phase: np.ndarray, label: str = "phase") -> ThinElement:
    return ThinElement("phase_mask", np.exp(1j * np.asarray(phase)), label=label)


def lens(grid: Grid, focal_length: float, carrier_k: float,
         axis: int = 0, label: str = "lens") -> ThinElement:
    """Thin paraxial lens: t(x) = exp(-i k0 x^2 / (2 f)).

    With matter-wave mapping the focal time is t_f = m f / (hbar k0).
    """
    if focal_length == 0:
        raise ValueError("focal length must be nonzero")
    x = grid.meshgrid()[axis]
    t = np.exp(-0.5j * carrier_k * x ** 2 / focal_length)
    return ThinElement("lens", t, label=label)


@dataclass
class EvolutionPlan:
    """Schedule of propagation segments and thin elements.

    elements: list of (time, ThinElement) with times on step boundaries.
    snapshot_times are rounded to step boundaries as well.
    """

    duration: float
    dt: float
    elements: list[tuple[float, ThinElement]] = field(default_factory=list)
    snapshot_times: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")
        self.elements = sorted(self.elements, key=lambda et: et[0])
        for t_el, _ in self.elements:
            if t_el < -_TIME_TOL or t_el > self.duration + _TIME_TOL:
                raise ValueError("element time outside [0, duration]")
            if abs(t_el / self.dt - round(t_el / self.dt)) > 1e-6:
                raise ValueError("element times must lie on step boundaries")

    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


@dataclass
class Snapshot:
    time: float
    field: WaveField
    tag: str = "plain"  # 'plain' | 'pre_element' | 'post_element'


class _Stepper:
    """Caches the split-step phase factors for one (grid, V, dt) combination."""

    def __init__(self, psi: WaveField, V: PotentialField, dt: float):
        grid = psi.grid
        ksq = sum(km ** 2 for km in grid.k_meshgrid())
        self.exp_kinetic = np.exp(-0.5j * psi.hbar * ksq * dt / psi.mass)
        self.exp_half_potential = np.exp(-0.5j * V.values * dt / psi.hbar)
        self.dt = dt

    def advance(self, amps: np.ndarray) -> np.ndarray:
        work = self.exp_half_potential * amps
        work = np.fft.ifftn(self.exp_kinetic * np.fft.fftn(work))
        return self.exp_half_potential * work


def stability_dt(psi: WaveField, c_stab: float = 0.5) -> float:
    """Advisory accuracy bound dt <= c_stab * m * dx^2 / hbar (the scheme is
    unconditionally stable; this controls splitting accuracy only)."""
    dx_min = min(psi.grid.dx)
    return c_stab * psi.mass * dx_min ** 2 / psi.hbar


def step(psi: WaveField, V: PotentialField, dt: float) -> WaveField:
    """One Strang split step of size dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = _Stepper(psi, V, dt)
    return psi.with_amplitudes(stepper.advance(psi.amplitudes))


def evolve_for(psi: WaveField, duration: float, V: PotentialField, dt: float) -> WaveField:
    """Advance by `duration` using whole dt steps plus one remainder step.

    The step sequence depends only on (duration, dt), so two callers with the
    same arguments produce bitwise-identical results.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if duration == 0:
        return psi.copy()
    n_whole = int(np.floor(duration / dt + _TIME_TOL))
    remainder = duration - n_whole * dt
    amps = psi.amplitudes
    if n_whole:
        stepper = _Stepper(psi, V, dt)
        for _ in range(n_whole):
            amps = stepper.advance(amps)
    if remainder > _TIME_TOL * dt:
        amps = _Stepper(psi, V, remainder).advance(amps)
    return psi.with_amplitudes(amps)


def apply_element(psi: WaveField, element: ThinElement) -> WaveField:
    """Pointwise multiplication by the element transmission."""
    if element.transmission.shape != psi.grid.shape:
        raise ValueError("element profile does not match the field grid")
    return psi.with_amplitudes(psi.amplitudes * element.transmission)


def absorbed_fraction(before: WaveField, after: WaveField) -> float:
    """1 - norm(after)^2 / norm(before)^2, the flux removed between the two fields."""
    if before.grid != after.grid:
        raise ValueError("fields live on different grids")
    nb = norm(before)
    if nb == 0.0:
        raise DegenerateState("reference field has zero norm")
    frac = 1.0 - (norm(after) / nb) ** 2
    return float(min(max(frac, 0.0), 1.0))


def evolve(psi: WaveField, plan: EvolutionPlan, V: PotentialField | None = None) -> list[Snapshot]:
    """Run an evolution plan, returning Snapshots at the requested times.

    At an element time the pre-element field is recorded (tag 'pre_element'),
    the element applied, and the post-element field recorded ('post_element').
    A snapshot of the initial field is always included.
    """
    if V is None:
        V = free_potential(psi.grid)
    dt = plan.dt
    n_steps = plan.n_steps()
    want = sorted({int(round(t / dt)) for t in plan.snapshot_times
                   if -_TIME_TOL <= t <= plan.duration + _TIME_TOL})
    elements = {}
    for t_el, el in plan.elements:
        elements.setdefault(int(round(t_el / dt)), []).append(el)

    out: list[Snapshot] = []
    amps = psi.amplitudes.copy()

    def record(i_step: int, tag: str):
        out.append(Snapshot(time=i_step * dt,
                            field=psi.with_amplitudes(amps.copy()), tag=tag))

    def handle_boundary(i_step: int):
        nonlocal amps
        els = elements.get(i_step)
        if els:
            record(i_step, "pre_element")
            for el in els:
                if el.transmission.shape != psi.grid.shape:
                    raise ValueError("element profile does not match the field grid")
                amps = amps * el.transmission
            record(i_step, "post_element")
        elif i_step in want or i_step == 0 or i_step == n_steps:
            record(i_step, "plain")

    handle_boundary(0)
    if n_steps:
        stepper = _Stepper(psi, V, dt)
        for i in range(1, n_steps + 1):
            amps = stepper.advance(amps)
            handle_boundary(i)
    return out


def energy_expectation(psi: WaveField, V: PotentialField | None = None) -> float:
    """<psi|T + Re(V)|psi> / <psi|psi> via the spectral kinetic operator."""
    grid = psi.grid
    dens = psi.density()
    total = np.sum(dens) * grid.cell_volume()
    if total == 0.0:
        raise DegenerateState("zero-norm field has no energy expectation")
    phi = np.fft.fftn(psi.amplitudes)
    ksq = sum(km ** 2 for km in grid.k_meshgrid())
    # FFT Parseval: sum |phi|^2 = n_total * sum |psi|^2
    kinetic = (psi.hbar ** 2 / (2.0 * psi.mass)) * np.sum(ksq * np.abs(phi) ** 2)
    kinetic *= grid.cell_volume() / np.prod(grid.n)
    potential = 0.0
    if V is not None:
        potential = np.sum(V.values.real * dens) * grid.cell_volume()
    return float((kinetic + potential) / total)
