"""Uniform spatial grids, complex wave fields, and reciprocal-space bookkeeping.

Everything downstream (propagation, trajectories, collapse dynamics) runs on
the types defined here.  The Fourier convention is fixed package-wide:

    forward  (analysis):  phi(k) = (1/sqrt(2*pi)) * Integral psi(x) e^{-ikx} dx
    inverse  (synthesis): psi(x) = (1/sqrt(2*pi)) * Integral phi(k) e^{+ikx} dk

discretised so that Parseval holds exactly on the grid (dx*dk*n = 2*pi).
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateState

__all__ = [
    "Grid",
    "WaveField",
    "PolarDecomposition",
    "make_grid",
    "norm",
    "normalize",
    "polar",
    "gaussian_state",
    "fourier_forward",
    "fourier_inverse",
    "save_wavefield",
    "load_wavefield",
    "wavefield_to_csv",
    "wavefield_from_csv",
]

_MAGIC = b"PWF1"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid over [x_min, x_max) per axis, n a power of two."""

    dims: int
    x_min: tuple[float, ...]
    x_max: tuple[float, ...]
    n: tuple[int, ...]

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / nn for lo, hi, nn in zip(self.x_min, self.x_max, self.n))

    @property
    def dk(self) -> tuple[float, ...]:
        return tuple(2.0 * np.pi / (hi - lo) for lo, hi in zip(self.x_min, self.x_max))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    def axis(self, i: int = 0) -> np.ndarray:
        """Grid points x_j = x_min + j*dx along axis i."""
        return self.x_min[i] + self.dx[i] * np.arange(self.n[i])

    def k_axis(self, i: int = 0) -> np.ndarray:
        """Wavenumbers in FFT layout along axis i."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n[i], d=self.dx[i])

    def meshgrid(self):
        return np.meshgrid(*(self.axis(i) for i in range(self.dims)), indexing="ij")

    def k_meshgrid(self):
        return np.meshgrid(*(self.k_axis(i) for i in range(self.dims)), indexing="ij")

    def cell_volume(self) -> float:
        out = 1.0
        for d in self.dx:
            out *= d
        return out

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dims == other.dims
            and self.x_min == other.x_min
            and self.x_max == other.x_max
            and self.n == other.n
        )


def make_grid(x_min, x_max, n, dims: int = 1) -> Grid:
    """Build a uniform grid.  Scalar extents are broadcast to all axes.

    n must be a power of two >= 8 per axis; [x_min, x_max) must be nondegenerate.
    """
    if dims not in (1, 2):
        raise ValueError(f"dims must be 1 or 2, got {dims}")
    lo = tuple(float(x) for x in (x_min if np.iterable(x_min) else [x_min] * dims))
    hi = tuple(float(x) for x in (x_max if np.iterable(x_max) else [x_max] * dims))
    nn = tuple(int(x) for x in (n if np.iterable(n) else [n] * dims))
    if not (len(lo) == len(hi) == len(nn) == dims):
        raise ValueError("per-axis parameters must match dims")
    for a, b in zip(lo, hi):
        if not b > a:
            raise ValueError(f"degenerate extent [{a}, {b})")
    for m in nn:
        if not (_is_power_of_two(m) and m >= 8):
            raise ValueError(f"points-per-axis must be a power of two >= 8, got {m}")
    return Grid(dims=dims, x_min=lo, x_max=hi, n=nn)


@dataclass
class WaveField:
    """Complex amplitudes on a grid, with particle mass and hbar attached."""

    grid: Grid
    amplitudes: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != self.grid.shape:
            raise ValueError(
                f"amplitude shape {self.amplitudes.shape} != grid shape {self.grid.shape}"
            )
        if self.mass <= 0 or self.hbar <= 0:
            raise ValueError("mass and hbar must be positive")

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.amplitudes.copy(), self.mass, self.hbar)

    def with_amplitudes(self, amps: np.ndarray) -> "WaveField":
        return WaveField(self.grid, amps, self.mass, self.hbar)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class PolarDecomposition:
    """psi = R * exp(i S / hbar) with S unwrapped where the amplitude is resolvable.

    node_flags marks points with R below the node threshold; S there is the
    nearest-neighbour continuation and carries no phase information.
    """

    R: np.ndarray
    S: np.ndarray
    node_flags: np.ndarray
    hbar: float = 1.0
    epsilon_node: float = field(default=0.0)

    def reconstruct(self) -> np.ndarray:
        return self.R * np.exp(1j * self.S / self.hbar)


def norm(psi: WaveField) -> float:
    """sqrt of the discrete quadrature of |psi|^2 over the grid."""
    return float(np.sqrt(np.sum(psi.density()) * psi.grid.cell_volume()))


def normalize(psi: WaveField) -> WaveField:
    """Rescale to unit norm; direction unchanged."""
    nrm = norm(psi)
    if nrm == 0.0 or not np.isfinite(nrm):
        raise DegenerateState("cannot normalize a zero-norm field")
    return psi.with_amplitudes(psi.amplitudes / nrm)


def _fill_flagged_1d(values: np.ndarray, flags: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Replace flagged entries by the nearest unflagged value along the axis."""
    if not flags.any():
        return values
    good = ~flags
    if not good.any():
        return np.zeros_like(values)
    out = values.copy()
    out[flags] = np.interp(coords[flags], coords[good], values[good])
    return out


def _unwrap_with_flags(phase: np.ndarray, flags: np.ndarray) -> np.ndarray:
    """Unwrap along each axis, restarting across flagged (unresolvable) runs."""
    out = phase.copy()
    if out.ndim == 1:
        good = ~flags
        if good.any():
            out[good] = np.unwrap(phase[good])
        return out
    # 2D: unwrap rows along the last axis, then stitch rows along the first
    for i in range(out.shape[0]):
        good = ~flags[i]
        if good.any():
            out[i, good] = np.unwrap(phase[i, good])
    anchor_good = ~flags[:, 0]
    if anchor_good.any():
        col = out[:, 0].copy()
        col[anchor_good] = np.unwrap(col[anchor_good])
        out += (col - out[:, 0])[:, None]
    return out


def polar(psi: WaveField, epsilon_node: float | None = None) -> PolarDecomposition:
    """Amplitude/action split psi = R exp(iS/hbar).

    epsilon_node defaults to 1e-8 * max|psi|; points below it are flagged and
    excluded from unwrapping.
    """
    amps = psi.amplitudes
    R = np.abs(amps)
    peak = R.max()
    if epsilon_node is None:
        epsilon_node = 1e-8 * peak
    if epsilon_node <= 0 and peak > 0:
        raise ValueError("epsilon_node must be positive")
    flags = R < epsilon_node
    raw = np.angle(amps)
    S = psi.hbar * _unwrap_with_flags(raw, flags)
    return PolarDecomposition(R=R, S=S, node_flags=flags, hbar=psi.hbar,
                              epsilon_node=float(epsilon_node))


def gaussian_state(grid: Grid, center=0.0, sigma=1.0, k0=0.0,
                   mass: float = 1.0, hbar: float = 1.0,
                   normalized: bool = True) -> WaveField:
    """Gaussian packet with position-density standard deviation sigma.

    amplitude ~ exp(-(x-center)^2 / (4 sigma^2) + i k0 (x-center)), per axis.
    """
    centers = np.atleast_1d(np.asarray(center, dtype=float))
    sigmas = np.atleast_1d(np.asarray(sigma, dtype=float))
    k0s = np.atleast_1d(np.asarray(k0, dtype=float))
    if centers.size == 1:
        centers = np.repeat(centers, grid.dims)
    if sigmas.size == 1:
        sigmas = np.repeat(sigmas, grid.dims)
    if k0s.size == 1:
        k0s = np.repeat(k0s, grid.dims)
    mesh = grid.meshgrid()
    amps = np.ones(grid.shape, dtype=np.complex128)
    for ax in range(grid.dims):
        u = mesh[ax] - centers[ax]
        amps = amps * np.exp(-(u ** 2) / (4.0 * sigmas[ax] ** 2) + 1j * k0s[ax] * u)
    psi = WaveField(grid, amps, mass, hbar)
    return normalize(psi) if normalized else psi


def fourier_forward(psi: WaveField) -> np.ndarray:
    """Analysis transform: grid samples of phi(k) in FFT layout.

    phi(k_j) = (dx/sqrt(2 pi))^dims * sum_n psi(x_n) e^{-i k_j x_n}
    """
    grid = psi.grid
    out = np.fft.fftn(psi.amplitudes)
    for ax in range(grid.dims):
        k = grid.k_axis(ax)
        phase = np.exp(-1j * k * grid.x_min[ax]) * grid.dx[ax] / np.sqrt(2.0 * np.pi)
        shape = [1] * grid.dims
        shape[ax] = grid.n[ax]
        out = out * phase.reshape(shape)
    return out


def fourier_inverse(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Synthesis transform, exact inverse of :func:`fourier_forward`."""
    work = np.asarray(phi, dtype=np.complex128).copy()
    for ax in range(grid.dims):
        k = grid.k_axis(ax)
        phase = np.exp(1j * k * grid.x_min[ax]) * np.sqrt(2.0 * np.pi) / grid.dx[ax]
        shape = [1] * grid.dims
        shape[ax] = grid.n[ax]
        work = work * phase.reshape(shape)
    return np.fft.ifftn(work)


# --- serialization -------------------------------------------------------
#
# Binary layout (little-endian), shared by position- and reciprocal-space
# fields via the domain tag:
#   bytes 0..3   magic "PWF1"
#   byte  4      dims (uint8)
#   byte  5      domain tag (uint8): 0 = position, 1 = reciprocal
#   bytes 6..7   reserved (zero)
#   per axis:    n (uint64), x_min (float64), x_max (float64)
#   then:        hbar (float64), mass (float64)
#   payload:     n_total interleaved (re, im) float64 pairs, C order.


def save_wavefield(psi: WaveField, path, domain: str = "position") -> None:
    tag = {"position": 0, "reciprocal": 1}[domain]
    grid = psi.grid
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<BBH", grid.dims, tag, 0))
    for ax in range(grid.dims):
        buf.write(struct.pack("<Qdd", grid.n[ax], grid.x_min[ax], grid.x_max[ax]))
    buf.write(struct.pack("<dd", psi.hbar, psi.mass))
    flat = psi.amplitudes.ravel()
    inter = np.empty(2 * flat.size, dtype="<f8")
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    buf.write(inter.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_wavefield(path) -> tuple[WaveField, str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError("not a wave-field file (bad magic)")
    dims, tag, _ = struct.unpack_from("<BBH", raw, 4)
    off = 8
    ns, los, his = [], [], []
    for _ in range(dims):
        n_ax, lo, hi = struct.unpack_from("<Qdd", raw, off)
        off += 24
        ns.append(int(n_ax))
        los.append(lo)
        his.append(hi)
    hbar, mass = struct.unpack_from("<dd", raw, off)
    off += 16
    grid = make_grid(los, his, ns, dims=dims)
    total = int(np.prod(ns))
    inter = np.frombuffer(raw, dtype="<f8", count=2 * total, offset=off)
    amps = (inter[0::2] + 1j * inter[1::2]).reshape(ns)
    domain = "position" if tag == 0 else "reciprocal"
    return WaveField(grid, amps, mass=mass, hbar=hbar), domain


def wavefield_to_csv(psi: WaveField, path) -> None:
    """Human-inspectable dump: x[,y],re,im rows."""
    grid = psi.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if grid.dims == 1:
            writer.writerow(["x", "re", "im"])
            x = grid.axis(0)
            for j in range(grid.n[0]):
                a = psi.amplitudes[j]
                writer.writerow([repr(float(x[j])), repr(float(a.real)),
                                 repr(float(a.imag))])
        else:
            writer.writerow(["x", "y", "re", "im"])
            x, y = grid.axis(0), grid.axis(1)
            for i in range(grid.n[0]):
                for j in range(grid.n[1]):
                    a = psi.amplitudes[i, j]
                    writer.writerow([repr(float(x[i])), repr(float(y[j])),
                                     repr(float(a.real)), repr(float(a.imag))])


def wavefield_from_csv(path, grid: Grid, mass: float = 1.0, hbar: float = 1.0) -> WaveField:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    re = data[:, -2]
    im = data[:, -1]
    amps = (re + 1j * im).reshape(grid.shape)
    return WaveField(grid, amps, mass=mass, hbar=hbar)
