"""Dual-pinhole interferometer with wire grid and imaging lens, run end to end.

The optical bench is mapped to matter-wave dynamics: the grid axis is the
transverse coordinate and propagation distance plays the role of time.  The
three stages are (i) no wire grid, (ii) grid present with one pinhole open,
(iii) grid at the fringe minima with both pinholes open.  The wire grid is a
hard amplitude mask, so "stopped by the grid" is a direct norm deficit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import NoFringes
from .grids import WaveField, make_grid, normalize, norm
from .propagate import (EvolutionPlan, Snapshot, absorbing_potential,
                        amplitude_mask, evolve, lens)
from .bohmian import (TrajectoryEnsemble, integrate_trajectories,
                      sample_equilibrium)

__all__ = [
    "AfsharConfig",
    "StageResult",
    "build_initial_state",
    "fringe_minima",
    "fringe_spacing",
    "wire_blocked_region",
    "run_stage",
    "run_all",
    "detector_fluxes",
    "which_path_correlation",
]

STAGES = ("i", "ii", "iii")


@dataclass(frozen=True)
class AfsharConfig:
    """Geometry and solver settings for one interferometer scenario.

    Times are propagation-distance equivalents; the lens focal time is
    mass * lens_focal / (hbar * carrier_k).
    """

    pinhole_separation: float = 8.0
    pinhole_width: float = 1.0
    carrier_k: float = 1.0
    t_wire_grid: float = 95.0
    t_lens: float = 100.0
    t_image: float = 200.0
    lens_focal: float = 50.0
    n_wires: int = 6
    wire_width_frac: float = 0.1    # fraction of the fringe spacing
    wire_width: float | None = None  # absolute width wins when given
    open_slits: str = "both"        # '1' (+d/2), '2' (-d/2), or 'both'
    x_min: float = -250.0
    x_max: float = 250.0
    n_points: int = 4096
    mass: float = 1.0
    hbar: float = 1.0
    dt: float = 0.01
    absorber_fraction: float = 0.10
    absorber_strength: float = 1.0
    snapshot_every: float = 0.25
    # denser snapshots just after the wire mask: the hard edge sheds
    # grid-scale ripples that coarse-in-time velocity interpolation misses
    snapshot_refine_window: float = 3.0
    snapshot_refine_every: float = 0.05
    trajectories: int = 0
    seed: int = 20260809

    def __post_init__(self):
        if self.open_slits not in ("1", "2", "both"):
            raise ValueError("open_slits must be '1', '2', or 'both'")
        if not (0 < self.t_wire_grid < self.t_lens < self.t_image):
            raise ValueError("need 0 < t_wire_grid < t_lens < t_image")
        if self.pinhole_width <= 0 or self.pinhole_separation <= 0:
            raise ValueError("pinhole geometry must be positive")
        if self.pinhole_separation < 4 * self.pinhole_width:
            raise ValueError("pinhole separation must be >> pinhole width")
        w = self.effective_wire_width()
        if not 0 < w < self.fringe_spacing():
            raise ValueError("wire width must lie in (0, fringe spacing)")

    def fringe_spacing(self) -> float:
        """Far-field fringe period at the wire plane, 2 pi hbar t / (m d)."""
        return (2.0 * np.pi * self.hbar * self.t_wire_grid
                / (self.mass * self.pinhole_separation))

    def effective_wire_width(self) -> float:
        if self.wire_width is not None:
            return self.wire_width
        return self.wire_width_frac * self.fringe_spacing()

    def focal_time(self) -> float:
        return self.mass * self.lens_focal / (self.hbar * self.carrier_k)

    def magnification(self) -> float | None:
        """Geometric magnification when t_image sits at the image plane."""
        a = self.t_lens
        b = self.t_image - self.t_lens
        tf = self.focal_time()
        if abs(1.0 / a + 1.0 / b - 1.0 / tf) * tf > 0.05:
            return None
        return -b / a

    def make_grid(self):
        return make_grid(self.x_min, self.x_max, self.n_points, dims=1)

    def as_dict(self) -> dict:
        return asdict(self)


def fringe_spacing(cfg: AfsharConfig) -> float:
    return cfg.fringe_spacing()


def build_initial_state(cfg: AfsharConfig) -> WaveField:
    """Normalized pinhole state: Gaussians at +/- d/2, width sigma."""
    grid = cfg.make_grid()
    x = grid.axis(0)
    d, sig = cfg.pinhole_separation, cfg.pinhole_width

    def pinhole(center):
        return np.exp(-(x - center) ** 2 / (4.0 * sig ** 2))

    amps = np.zeros(grid.n[0], dtype=np.complex128)
    if cfg.open_slits in ("1", "both"):
        amps += pinhole(+d / 2.0)
    if cfg.open_slits in ("2", "both"):
        amps += pinhole(-d / 2.0)
    return normalize(WaveField(grid, amps, mass=cfg.mass, hbar=cfg.hbar))


def fringe_minima(psi: WaveField, darkness: float = 1e-3,
                  envelope_floor: float = 1e-6,
                  window: tuple[float, float] | None = None) -> np.ndarray:
    """Positions of interference minima, ascending.

    A reported minimum is a local density minimum inside the analysis window,
    bracketed on both sides by fringe lobes above envelope_floor * peak, with
    density below darkness * peak.  A fringe-free field raises NoFringes.
    """
    rho = psi.density()
    x = psi.grid.axis(0)
    peak = rho.max()
    idx = np.arange(1, len(rho) - 1)
    is_min = (rho[idx] < rho[idx - 1]) & (rho[idx] <= rho[idx + 1])
    dark = rho[idx] < darkness * peak
    candidates = idx[is_min & dark]
    if window is not None:
        lo, hi = window
        candidates = candidates[(x[candidates] >= lo) & (x[candidates] <= hi)]
    # require real fringe lobes on both sides, not absorber residue
    kept = []
    for i in candidates:
        left = rho[:i].max() if i > 0 else 0.0
        right = rho[i + 1:].max() if i + 1 < len(rho) else 0.0
        if min(left, right) > envelope_floor * peak:
            kept.append(x[i])
    if not kept:
        raise NoFringes("no interference minima found (single-beam field?)")
    return np.array(sorted(kept))


def wire_blocked_region(grid, centers: np.ndarray, width: float) -> np.ndarray:
    """Boolean blocked-cell array for wires of `width` at `centers`."""
    x = grid.axis(0)
    blocked = np.zeros(grid.n[0], dtype=bool)
    for c in centers:
        blocked |= np.abs(x - c) <= width / 2.0
    return blocked


@dataclass
class StageResult:
    """Everything measured in one stage run."""

    stage: str
    open_slits: str
    grid_present: bool
    interception_fraction: float
    edge_loss: float
    flux_c1: float
    flux_c2: float
    peak_c1: float
    peak_c2: float
    peak_x_c1: float
    peak_x_c2: float
    norm_final: float
    imaging_sign: int
    magnification: float | None
    fringe_spacing_theory: float
    fringe_spacing_measured: float | None
    wire_centers: np.ndarray | None
    wire_width: float | None
    wire_plane_peak_density: float | None
    image_x: np.ndarray = field(repr=False, default=None)
    image_intensity: np.ndarray = field(repr=False, default=None)
    snapshots: list[Snapshot] = field(repr=False, default=None)
    ensemble: TrajectoryEnsemble | None = field(repr=False, default=None)
    which_path_match: float | None = None

    def flux_total(self) -> float:
        return self.flux_c1 + self.flux_c2

    def scalars(self) -> dict:
        out = {
            "stage": self.stage,
            "open_slits": self.open_slits,
            "grid_present": self.grid_present,
            "interception_fraction": self.interception_fraction,
            "edge_loss": self.edge_loss,
            "flux_c1": self.flux_c1,
            "flux_c2": self.flux_c2,
            "peak_c1": self.peak_c1,
            "peak_c2": self.peak_c2,
            "peak_x_c1": self.peak_x_c1,
            "peak_x_c2": self.peak_x_c2,
            "norm_final": self.norm_final,
            "imaging_sign": self.imaging_sign,
            "magnification": self.magnification,
            "fringe_spacing_theory": self.fringe_spacing_theory,
            "fringe_spacing_measured": self.fringe_spacing_measured,
            "wire_width": self.wire_width,
            "wire_plane_peak_density": self.wire_plane_peak_density,
            "which_path_match": self.which_path_match,
        }
        if self.wire_centers is not None:
            out["wire_centers"] = [float(c) for c in self.wire_centers]
        return out


def _reference_wire_info(cfg: AfsharConfig) -> dict:
    """Evolve the both-slit field to the wire plane and locate the minima.

    Mirrors the bench procedure: the grid is positioned against the two-slit
    pattern regardless of which pinholes stay open afterwards.
    """
    ref_cfg = _with(cfg, open_slits="both")
    psi0 = build_initial_state(ref_cfg)
    V = absorbing_potential(psi0.grid, fraction=cfg.absorber_fraction,
                            strength=cfg.absorber_strength)
    plan = EvolutionPlan(duration=cfg.t_wire_grid, dt=cfg.dt)
    snaps = evolve(psi0, plan, V)
    at_plane = snaps[-1].field
    span = cfg.x_max - cfg.x_min
    interior = (cfg.x_min + cfg.absorber_fraction * span,
                cfg.x_max - cfg.absorber_fraction * span)
    minima = fringe_minima(at_plane, window=interior)
    if len(minima) < cfg.n_wires:
        raise NoFringes(
            f"only {len(minima)} qualifying minima for {cfg.n_wires} wires")
    innermost = np.array(sorted(minima, key=abs)[:cfg.n_wires])
    centers = np.sort(innermost)
    spacing = float(np.median(np.diff(np.sort(minima)))) if len(minima) > 1 else None
    width = cfg.effective_wire_width()
    blocked = wire_blocked_region(psi0.grid, centers, width)
    return {
        "centers": centers,
        "width": width,
        "blocked": blocked,
        "measured_spacing": spacing,
        "plane_peak_density": float(at_plane.density().max()),
    }


def _with(cfg: AfsharConfig, **patch) -> AfsharConfig:
    vals = cfg.as_dict()
    vals.update(patch)
    return AfsharConfig(**vals)


def _stage_config(cfg: AfsharConfig, stage: str) -> tuple[AfsharConfig, bool]:
    if stage == "i":
        return cfg, False
    if stage == "ii":
        slits = cfg.open_slits if cfg.open_slits in ("1", "2") else "1"
        return _with(cfg, open_slits=slits), True
    if stage == "iii":
        return _with(cfg, open_slits="both"), True
    raise ValueError(f"unknown stage {stage!r} (expected one of {STAGES})")


def run_stage(cfg: AfsharConfig, stage: str,
              wire_info: dict | None = None,
              keep_snapshots: bool = False) -> StageResult:
    """Run one stage: source -> wire plane -> lens -> image, with accounting.

    Flux bookkeeping: detector fluxes + interception + boundary absorption
    add up to 1 (initial norm) to solver precision.
    """
    stage_cfg, grid_present = _stage_config(cfg, stage)
    attach = stage_cfg.trajectories > 0

    if grid_present and wire_info is None:
        wire_info = _reference_wire_info(cfg)

    psi0 = build_initial_state(stage_cfg)
    grid = psi0.grid
    V = absorbing_potential(grid, fraction=cfg.absorber_fraction,
                            strength=cfg.absorber_strength)

    elements = []
    if grid_present:
        elements.append((cfg.t_wire_grid,
                         amplitude_mask(grid, wire_info["blocked"], label="wire_grid")))
    elements.append((cfg.t_lens,
                     lens(grid, cfg.lens_focal, cfg.carrier_k)))

    snapshot_times = [0.0, cfg.t_wire_grid, cfg.t_lens, cfg.t_image]
    if attach and cfg.snapshot_every > 0:
        snapshot_times.extend(np.arange(0.0, cfg.t_image + cfg.snapshot_every / 2,
                                        cfg.snapshot_every).tolist())
        if grid_present and cfg.snapshot_refine_every > 0:
            snapshot_times.extend(np.arange(
                cfg.t_wire_grid,
                min(cfg.t_wire_grid + cfg.snapshot_refine_window, cfg.t_image),
                cfg.snapshot_refine_every).tolist())
    plan = EvolutionPlan(duration=cfg.t_image, dt=cfg.dt,
                         elements=elements, snapshot_times=snapshot_times)
    snaps = evolve(psi0, plan, V)

    def norms_at(t, tag):
        for s in snaps:
            if abs(s.time - t) < 1e-9 and s.tag == tag:
                return norm(s.field) ** 2
        return None

    interception = 0.0
    if grid_present:
        pre = norms_at(cfg.t_wire_grid, "pre_element")
        post = norms_at(cfg.t_wire_grid, "post_element")
        interception = pre - post

    final_field = snaps[-1].field
    norm_final = norm(final_field) ** 2
    edge_loss = 1.0 - interception - norm_final

    x = grid.axis(0)
    image = final_field.density()
    left = x < 0
    right = x > 0
    dx = grid.dx[0]
    # cells are centered on grid points; a cell centered exactly at x = 0
    # straddles the lobe boundary and contributes half to each side
    boundary = np.sum(image[x == 0]) * dx
    flux_c1 = float(np.sum(image[left]) * dx + 0.5 * boundary)
    flux_c2 = float(np.sum(image[right]) * dx + 0.5 * boundary)
    peak_c1 = float(image[left].max())
    peak_c2 = float(image[right].max())
    peak_x_c1 = float(x[left][np.argmax(image[left])])
    peak_x_c2 = float(x[right][np.argmax(image[right])])

    mag = cfg.magnification()
    imaging_sign = -1 if (mag is None or mag < 0) else 1

    result = StageResult(
        stage=stage,
        open_slits=stage_cfg.open_slits,
        grid_present=grid_present,
        interception_fraction=float(interception),
        edge_loss=float(edge_loss),
        flux_c1=flux_c1,
        flux_c2=flux_c2,
        peak_c1=peak_c1,
        peak_c2=peak_c2,
        peak_x_c1=peak_x_c1,
        peak_x_c2=peak_x_c2,
        norm_final=float(norm_final),
        imaging_sign=imaging_sign,
        magnification=mag,
        fringe_spacing_theory=cfg.fringe_spacing(),
        fringe_spacing_measured=(wire_info or {}).get("measured_spacing")
        if grid_present else None,
        wire_centers=(wire_info or {}).get("centers") if grid_present else None,
        wire_width=(wire_info or {}).get("width") if grid_present else None,
        wire_plane_peak_density=(wire_info or {}).get("plane_peak_density")
        if grid_present else None,
        image_x=x.copy(),
        image_intensity=image,
        snapshots=snaps if (keep_snapshots or attach) else None,
    )

    if attach:
        ensemble = sample_equilibrium(psi0, stage_cfg.trajectories, stage_cfg.seed)
        absorbers = {cfg.t_wire_grid: wire_info["blocked"]} if grid_present else None
        span = cfg.x_max - cfg.x_min
        interior = (cfg.x_min + cfg.absorber_fraction * span,
                    cfg.x_max - cfg.absorber_fraction * span)
        result.ensemble = integrate_trajectories(ensemble, snaps,
                                                 absorbers=absorbers,
                                                 edge_bounds=interior)
        result.which_path_match = which_path_correlation(result.ensemble, imaging_sign)
    return result


def run_all(cfg: AfsharConfig, keep_snapshots: bool = False) -> dict[str, StageResult]:
    """Run stages i-iii sharing one wire-placement reference run."""
    wire_info = _reference_wire_info(cfg)
    return {stage: run_stage(cfg, stage, wire_info=wire_info,
                             keep_snapshots=keep_snapshots)
            for stage in STAGES}


def detector_fluxes(result: StageResult) -> tuple[float, float]:
    """(C1, C2) image-lobe fluxes; C1 integrates x < 0, which the inverting
    lens assigns to pinhole 1 (located at +d/2).  The cell centered exactly
    on the lobe boundary is split evenly between the two detectors."""
    return result.flux_c1, result.flux_c2


def which_path_correlation(ensemble: TrajectoryEnsemble, imaging_sign: int) -> float:
    """Fraction of surviving trajectories whose final detector lobe matches
    the image of their pinhole of origin under the recorded lens mapping."""
    survived = ensemble.alive
    if not survived.any():
        return float("nan")
    q0 = ensemble.initial[survived]
    qf = ensemble.final[survived]
    matched = np.sign(qf) == imaging_sign * np.sign(q0)
    return float(np.mean(matched))
