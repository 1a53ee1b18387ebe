"""Pilot-wave layer: guidance velocity field, quantum potential and force,
equilibrium sampling, trajectory integration, and conditional wave functions.

Particle positions move along dQ/dt = (hbar/m) Im(grad psi / psi); ensembles
seeded from |psi_0|^2 stay |psi_t|^2-distributed under this transport, which
the Kolmogorov-Smirnov check below verifies numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import DegenerateState, EscapedDomain
from .grids import Grid, WaveField, _fill_flagged_1d
from .propagate import Snapshot
from .rng import substream

__all__ = [
    "VelocityField",
    "QuantumPotentialField",
    "TrajectoryEnsemble",
    "ConditionalSlice",
    "velocity_field",
    "quantum_potential",
    "quantum_force",
    "sample_equilibrium",
    "ensemble_from_positions",
    "integrate_trajectories",
    "equivariance_check",
    "ks_critical_value",
    "fringe_occupancy",
    "conditional_wavefunction",
    "grid_cdf",
    "sample_from_density",
]


@dataclass
class VelocityField:
    """Guidance velocity on the grid; one array per spatial axis."""

    grid: Grid
    components: tuple[np.ndarray, ...]
    node_flags: np.ndarray

    def component(self, ax: int = 0) -> np.ndarray:
        return self.components[ax]


@dataclass
class QuantumPotentialField:
    grid: Grid
    values: np.ndarray
    node_flags: np.ndarray


@dataclass
class TrajectoryEnsemble:
    """Positions of M seeded trajectories on a shared time grid.

    positions has shape (n_times, M) in 1D and (n_times, M, 2) in 2D; alive
    marks trajectories not yet absorbed (wire hits terminate a trajectory).
    """

    seed: int | None
    times: np.ndarray
    positions: np.ndarray
    alive: np.ndarray
    absorbed_time: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.absorbed_time is None:
            self.absorbed_time = np.full(self.count, np.inf)

    @property
    def count(self) -> int:
        return self.positions.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.positions[0]

    @property
    def final(self) -> np.ndarray:
        return self.positions[-1]

    def to_rows(self):
        """Rows (trajectory_id, t, x[, y], alive) for CSV export."""
        two_d = self.positions.ndim == 3
        for i in range(self.count):
            cutoff = self.absorbed_time[i]
            for j, t in enumerate(self.times):
                live = int(t <= cutoff)
                if two_d:
                    yield (i, t, self.positions[j, i, 0], self.positions[j, i, 1], live)
                else:
                    yield (i, t, self.positions[j, i], live)


@dataclass
class ConditionalSlice:
    """1D conditional wave function psi(x) = Psi(x, Y_nearest), unnormalized."""

    values: np.ndarray
    y_actual: float
    y_index: int
    degenerate: bool
    effective_branch: int | None = None


def _spectral_gradient(field: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    k = grid.k_axis(axis)
    shape = [1] * grid.dims
    shape[axis] = grid.n[axis]
    return np.fft.ifftn(1j * k.reshape(shape) * np.fft.fftn(field, axes=(axis,)), axes=(axis,))


def _fill_flagged(values: np.ndarray, flags: np.ndarray, grid: Grid) -> np.ndarray:
    if not flags.any():
        return values
    if grid.dims == 1:
        return _fill_flagged_1d(values, flags, grid.axis(0))
    out = values.copy()
    x = grid.axis(1)
    for i in range(grid.n[0]):
        out[i] = _fill_flagged_1d(out[i], flags[i], x)
    return out


def velocity_field(psi: WaveField, epsilon_node: float | None = None) -> VelocityField:
    """v = (hbar/m) Im(grad psi / psi), spectral gradient, node-regularized."""
    amps = psi.amplitudes
    peak = np.abs(amps).max()
    if peak == 0.0:
        raise DegenerateState("velocity field of a zero field is undefined")
    if epsilon_node is None:
        epsilon_node = 1e-8 * peak
    flags = np.abs(amps) < epsilon_node
    comps = []
    for ax in range(psi.grid.dims):
        grad = _spectral_gradient(amps, psi.grid, ax)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = (psi.hbar / psi.mass) * np.imag(grad / amps)
        v = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
        comps.append(_fill_flagged(v, flags, psi.grid))
    return VelocityField(grid=psi.grid, components=tuple(comps), node_flags=flags)


def quantum_potential(psi: WaveField, epsilon_node: float | None = None) -> QuantumPotentialField:
    """Q = -(hbar^2 / 2m) Laplacian(R) / R with R = |psi|, node-regularized."""
    R = np.abs(psi.amplitudes)
    peak = R.max()
    if peak == 0.0:
        raise DegenerateState("quantum potential of a zero field is undefined")
    if epsilon_node is None:
        epsilon_node = 1e-8 * peak
    flags = R < epsilon_node
    lap = np.zeros(psi.grid.shape)
    for ax in range(psi.grid.dims):
        k = psi.grid.k_axis(ax)
        shape = [1] * psi.grid.dims
        shape[ax] = psi.grid.n[ax]
        lap = lap + np.real(np.fft.ifftn(
            -(k.reshape(shape) ** 2) * np.fft.fftn(R, axes=(ax,)), axes=(ax,)))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = -(psi.hbar ** 2 / (2.0 * psi.mass)) * lap / R
    q = np.nan_to_num(q, nan=0.0, posinf=0.0, neginf=0.0)
    q = _fill_flagged(q, flags, psi.grid)
    return QuantumPotentialField(grid=psi.grid, values=q, node_flags=flags)


def quantum_force(psi: WaveField, epsilon_node: float | None = None) -> np.ndarray:
    """F_Q = -grad Q for 1D fields.

    Composed pointwise from spectral derivatives of R = |psi|,
    F_Q = (hbar^2/2m) (R''' R - R'' R') / R^2, rather than differentiating
    the node-regularized Q array (which is not periodic and would ring).
    """
    if psi.grid.dims != 1:
        raise NotImplementedError("quantum force exposed for 1D fields")
    R = np.abs(psi.amplitudes)
    peak = R.max()
    if peak == 0.0:
        raise DegenerateState("quantum force of a zero field is undefined")
    if epsilon_node is None:
        epsilon_node = 1e-8 * peak
    flags = R < epsilon_node
    k = psi.grid.k_axis(0)
    Rk = np.fft.fft(R)
    d1 = np.real(np.fft.ifft(1j * k * Rk))
    d2 = np.real(np.fft.ifft(-(k ** 2) * Rk))
    d3 = np.real(np.fft.ifft(-1j * k ** 3 * Rk))
    with np.errstate(divide="ignore", invalid="ignore"):
        force = (psi.hbar ** 2 / (2.0 * psi.mass)) * (d3 * R - d2 * d1) / R ** 2
    force = np.nan_to_num(force, nan=0.0, posinf=0.0, neginf=0.0)
    return _fill_flagged(force, flags, psi.grid)


# --- quantum-equilibrium sampling ----------------------------------------


def grid_cdf(density: np.ndarray, axis_points: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear CDF of a cell-constant density.

    Cells are centered on the grid points (cell j covers x_j +/- dx/2), so
    sampling and CDF lookups carry no half-cell bias.  Returns (edges, cdf),
    both of length n + 1.
    """
    dx = axis_points[1] - axis_points[0]
    edges = np.concatenate([axis_points - 0.5 * dx,
                            [axis_points[-1] + 0.5 * dx]])
    cell = np.maximum(density, 0.0) * dx
    cdf = np.concatenate([[0.0], np.cumsum(cell)])
    total = cdf[-1]
    if total <= 0:
        raise DegenerateState("cannot sample from an all-zero density")
    return edges, cdf / total


def _invert_cdf(edges: np.ndarray, cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    dx = edges[1] - edges[0]
    idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, len(edges) - 2)
    gap = cdf[idx + 1] - cdf[idx]
    frac = np.where(gap > 0, (u - cdf[idx]) / np.where(gap > 0, gap, 1.0), 0.0)
    return edges[idx] + frac * dx


def sample_from_density(density: np.ndarray, grid: Grid, count: int, rng) -> np.ndarray:
    """Inverse-CDF samples from a grid density: exact in 1D, conditional
    x-then-y decomposition in 2D."""
    if grid.dims == 1:
        edges, cdf = grid_cdf(density, grid.axis(0))
        return _invert_cdf(edges, cdf, rng.random(count))
    x_axis, y_axis = grid.axis(0), grid.axis(1)
    marginal_x = density.sum(axis=1)
    edges_x, cdf_x = grid_cdf(marginal_x, x_axis)
    xs = _invert_cdf(edges_x, cdf_x, rng.random(count))
    ix = np.clip(np.rint((xs - grid.x_min[0]) / grid.dx[0]).astype(int),
                 0, grid.n[0] - 1)
    ys = np.empty(count)
    u = rng.random(count)
    for row in np.unique(ix):
        sel = ix == row
        edges_y, cdf_y = grid_cdf(density[row], y_axis)
        ys[sel] = _invert_cdf(edges_y, cdf_y, u[sel])
    return np.column_stack([xs, ys])


def sample_equilibrium(psi: WaveField, count: int, seed: int) -> TrajectoryEnsemble:
    """Draw count i.i.d. positions from |psi|^2 (the quantum equilibrium law)."""
    if count < 1:
        raise ValueError("need at least one trajectory")
    rng = substream(seed, "bohmian", "equilibrium")
    pos = sample_from_density(psi.density(), psi.grid, count, rng)
    positions = pos[None, ...] if psi.grid.dims == 2 else pos[None, :]
    return TrajectoryEnsemble(seed=seed, times=np.array([0.0]),
                              positions=positions,
                              alive=np.ones(count, dtype=bool))


def ensemble_from_positions(positions, t0: float = 0.0) -> TrajectoryEnsemble:
    """Ensemble with explicitly chosen initial positions (tests, mirrors)."""
    arr = np.asarray(positions, dtype=float)
    first = arr[None, ...]
    return TrajectoryEnsemble(seed=None, times=np.array([t0]),
                              positions=first,
                              alive=np.ones(arr.shape[0], dtype=bool))


# --- trajectory integration ----------------------------------------------


class _VelocityInterpolator:
    """Cubic-in-space interpolant of one snapshot's velocity field.

    Evaluation positions are clamped to the grid span so that stray points
    never sample the spline's extrapolation polynomials.
    """

    def __init__(self, psi: WaveField):
        vf = velocity_field(psi)
        self.grid = psi.grid
        self._lo = np.array([ax[0] for ax in map(psi.grid.axis, range(psi.grid.dims))])
        self._hi = np.array([psi.grid.axis(i)[-1] for i in range(psi.grid.dims)])
        if psi.grid.dims == 1:
            self._vx = CubicSpline(psi.grid.axis(0), vf.component(0))
            self._vy = None
        else:
            x, y = psi.grid.axis(0), psi.grid.axis(1)
            self._vx = RectBivariateSpline(x, y, vf.component(0), kx=3, ky=3)
            self._vy = RectBivariateSpline(x, y, vf.component(1), kx=3, ky=3)

    def __call__(self, pos: np.ndarray) -> np.ndarray:
        if self.grid.dims == 1:
            return self._vx(np.clip(pos, self._lo[0], self._hi[0]))
        px = np.clip(pos[:, 0], self._lo[0], self._hi[0])
        py = np.clip(pos[:, 1], self._lo[1], self._hi[1])
        return np.column_stack([self._vx.ev(px, py), self._vy.ev(px, py)])


def _check_interior(pos: np.ndarray, grid: Grid, alive: np.ndarray):
    if grid.dims == 1:
        bad = alive & ((pos < grid.x_min[0]) | (pos >= grid.x_max[0]))
    else:
        bad = alive & ((pos[:, 0] < grid.x_min[0]) | (pos[:, 0] >= grid.x_max[0])
                       | (pos[:, 1] < grid.x_min[1]) | (pos[:, 1] >= grid.x_max[1]))
    if bad.any():
        raise EscapedDomain(
            f"{int(bad.sum())} trajectories left the grid interior"
        )


def integrate_trajectories(ensemble: TrajectoryEnsemble,
                           snapshots: list[Snapshot],
                           absorbers: dict[float, np.ndarray] | None = None,
                           substeps: int = 1,
                           edge_bounds: tuple[float, float] | None = None
                           ) -> TrajectoryEnsemble:
    """RK4 transport of the ensemble through a snapshot series.

    Velocity is cubic in space and linear in time between snapshots.  Element
    boundaries in the series (pre/post tags at equal times) switch the field
    without advancing time.  `absorbers` maps an element time to a boolean
    blocked-region array; trajectories inside a blocked cell at that time are
    terminated and excluded from later statistics.  `edge_bounds` censors
    trajectories that wander into the absorbing boundary layer (their flux is
    lost, so the particles are too); leaving the grid itself is an error.
    """
    if ensemble.positions.shape[0] != 1:
        raise ValueError("ensemble must hold initial positions only")
    snaps = sorted(snapshots, key=lambda s: (s.time, s.tag == "post_element"))
    grid = snaps[0].field.grid
    absorbers = absorbers or {}

    pos = ensemble.initial.copy()
    alive = ensemble.alive.copy()
    absorbed_time = ensemble.absorbed_time.copy()
    out_times = [snaps[0].time]
    out_positions = [pos.copy()]

    interp_cache: dict[int, _VelocityInterpolator] = {}

    def interp(i: int) -> _VelocityInterpolator:
        if i not in interp_cache:
            interp_cache[i] = _VelocityInterpolator(snaps[i].field)
            # keep the cache from holding every spline in long runs
            if len(interp_cache) > 4:
                oldest = min(kk for kk in interp_cache if kk != i)
                del interp_cache[oldest]
        return interp_cache[i]

    def absorb_at(t: float):
        nonlocal alive, absorbed_time
        if edge_bounds is not None and grid.dims == 1:
            outside = alive & ((pos < edge_bounds[0]) | (pos > edge_bounds[1]))
            absorbed_time[outside] = np.minimum(absorbed_time[outside], t)
            alive = alive & ~outside
        for t_el, blocked in absorbers.items():
            if abs(t_el - t) < 1e-9:
                if grid.dims != 1:
                    raise NotImplementedError("wire absorption supported in 1D")
                idx = np.clip(np.rint((pos - grid.x_min[0]) / grid.dx[0]).astype(int),
                              0, grid.n[0] - 1)
                hit = alive & np.asarray(blocked, dtype=bool)[idx]
                absorbed_time[hit] = np.minimum(absorbed_time[hit], t)
                alive = alive & ~hit

    absorb_at(snaps[0].time)
    for i in range(len(snaps) - 1):
        a, b = snaps[i], snaps[i + 1]
        h_total = b.time - a.time
        if h_total <= 1e-12:
            # element boundary: field switches, positions stand still
            absorb_at(b.time)
            continue
        va, vb = interp(i), interp(i + 1)

        def v_at(p, theta):
            return (1.0 - theta) * va(p) + theta * vb(p)

        h = h_total / substeps
        for s in range(substeps):
            th0 = s / substeps
            thm = (s + 0.5) / substeps
            th1 = (s + 1) / substeps
            live = pos[alive] if grid.dims == 1 else pos[alive, :]
            k1 = v_at(live, th0)
            k2 = v_at(live + 0.5 * h * k1, thm)
            k3 = v_at(live + 0.5 * h * k2, thm)
            k4 = v_at(live + h * k3, th1)
            moved = live + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if grid.dims == 1:
                pos[alive] = moved
            else:
                pos[alive, :] = moved
        absorb_at(b.time)
        _check_interior(pos, grid, alive)
        out_times.append(b.time)
        out_positions.append(pos.copy())

    return TrajectoryEnsemble(seed=ensemble.seed,
                              times=np.array(out_times),
                              positions=np.stack(out_positions),
                              alive=alive,
                              absorbed_time=absorbed_time)


# --- equivariance and occupancy ------------------------------------------


def ks_critical_value(count: int, significance: float = 0.01) -> float:
    """Asymptotic Kolmogorov-Smirnov critical value c(alpha)/sqrt(n)."""
    c = np.sqrt(-0.5 * np.log(significance / 2.0))
    return float(c / np.sqrt(count))


def sorted_order_inversions(ensemble: TrajectoryEnsemble) -> int:
    """Count descents in initial-sorted order across all output times (1D).

    Trajectories terminated by absorption are skipped after their absorption
    time; a return of 0 certifies the noncrossing property on the ensemble.
    """
    if ensemble.positions.ndim != 2:
        raise NotImplementedError("inversion count applies to 1D ensembles")
    order = np.argsort(ensemble.initial, kind="stable")
    total = 0
    for j, t in enumerate(ensemble.times):
        live = ensemble.absorbed_time[order] > t - 1e-12
        arranged = ensemble.positions[j][order][live]
        total += int(np.sum(arranged[1:] < arranged[:-1]))
    return total


def equivariance_check(positions: np.ndarray, psi: WaveField) -> float:
    """KS distance between (surviving) trajectory positions and |psi|^2.

    1D only; the reference CDF is the renormalized grid density.
    """
    if psi.grid.dims != 1:
        raise NotImplementedError("equivariance KS check is 1D")
    pts = np.sort(np.asarray(positions, dtype=float))
    if pts.size == 0:
        raise DegenerateState("empty ensemble")
    edges, cdf = grid_cdf(psi.density(), psi.grid.axis(0))
    theo = np.interp(pts, edges, cdf)
    m = pts.size
    ecdf_hi = np.arange(1, m + 1) / m
    ecdf_lo = np.arange(0, m) / m
    return float(max(np.max(np.abs(ecdf_hi - theo)), np.max(np.abs(theo - ecdf_lo))))


def fringe_occupancy(ensemble: TrajectoryEnsemble,
                     snapshots: list[Snapshot],
                     threshold: float) -> float:
    """Fraction of trajectory-time spent where |psi_t|^2 < threshold * max."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    by_time = {}
    for s in snapshots:
        by_time[round(s.time, 9)] = s  # post_element wins at equal times
    low_count = 0
    total = 0
    for j, t in enumerate(ensemble.times):
        snap = by_time.get(round(t, 9))
        if snap is None:
            continue
        grid = snap.field.grid
        dens = snap.field.density()
        cutoff = threshold * dens.max()
        live = ensemble.absorbed_time > t - 1e-12
        pos = ensemble.positions[j][live]
        if pos.size == 0:
            continue
        idx = np.clip(np.rint((pos - grid.x_min[0]) / grid.dx[0]).astype(int),
                      0, grid.n[0] - 1)
        low_count += int(np.sum(dens[idx] < cutoff))
        total += pos.size
    if total == 0:
        raise DegenerateState("no live trajectory-time samples")
    return low_count / total


# --- conditional / effective wave function --------------------------------


def conditional_wavefunction(Psi: WaveField, y_actual: float,
                             branch_supports=None,
                             zero_tol: float = 1e-12) -> ConditionalSlice:
    """Row extraction psi(x) = Psi(x, Y) at the grid row nearest Y.

    branch_supports, when given, is a sequence of 1D arrays over the y-axis
    (|Phi_i| profiles or boolean supports, assumed pairwise disjoint); the
    slice reports which branch supports Y, i.e. whether psi qualifies as an
    effective wave function relative to that decomposition.
    """
    if Psi.grid.dims != 2:
        raise ValueError("conditional wave function needs a 2D field")
    y = Psi.grid.axis(1)
    if not (Psi.grid.x_min[1] <= y_actual < Psi.grid.x_max[1]):
        raise ValueError(f"Y={y_actual} outside the grid")
    iy = int(np.argmin(np.abs(y - y_actual)))
    values = Psi.amplitudes[:, iy].copy()
    peak = np.abs(Psi.amplitudes).max()
    degenerate = bool(np.abs(values).max() <= zero_tol * max(peak, 1.0))
    branch = None
    if branch_supports is not None:
        for i, prof in enumerate(branch_supports):
            prof = np.asarray(prof)
            support = prof.astype(bool) if prof.dtype == bool else (
                np.abs(prof) > zero_tol * max(np.abs(prof).max(), 1.0))
            if support[iy]:
                branch = i
                break
    return ConditionalSlice(values=values, y_actual=float(y[iy]), y_index=iy,
                            degenerate=degenerate, effective_branch=branch)
