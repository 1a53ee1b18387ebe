"""Fourier synthesis and analysis of wave packets.

Uses the package-wide symmetric transform convention owned by grids:
synthesis psi(x) = (1/sqrt(2 pi)) Int phi(k) e^{ikx} dk and its inverse.
time_extend superposes plane waves with a dispersion law, reproducing the
free split-step propagator exactly for omega(k) = hbar k^2 / 2m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, WaveField, fourier_forward, fourier_inverse

__all__ = [
    "SpectralAmplitude",
    "synthesize",
    "analyze",
    "time_extend",
    "matter_wave_dispersion",
    "moment_widths",
]


@dataclass
class SpectralAmplitude:
    """phi(k) on the reciprocal grid (FFT layout), tied to a position grid."""

    grid: Grid
    values: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise ValueError("spectral amplitude shape does not match grid")

    def k_axis(self, i: int = 0) -> np.ndarray:
        return self.grid.k_axis(i)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        dk = 1.0
        for ax in range(self.grid.dims):
            dk *= self.grid.dk[ax]
        return float(np.sqrt(np.sum(self.density()) * dk))


def synthesize(phi: SpectralAmplitude) -> WaveField:
    """psi(x) at t = 0 from the spectral amplitude."""
    amps = fourier_inverse(phi.values, phi.grid)
    return WaveField(phi.grid, amps, mass=phi.mass, hbar=phi.hbar)


def analyze(psi: WaveField) -> SpectralAmplitude:
    """Spectral amplitude of a position-space field; inverse of synthesize."""
    return SpectralAmplitude(psi.grid, fourier_forward(psi),
                             mass=psi.mass, hbar=psi.hbar)


def matter_wave_dispersion(phi: SpectralAmplitude):
    def omega(k):
        return phi.hbar * k ** 2 / (2.0 * phi.mass)
    return omega


def time_extend(phi: SpectralAmplitude, t: float, omega=None) -> WaveField:
    """psi(x, t) = (1/sqrt(2 pi)) Int phi(k) e^{i(kx - omega(k) t)} dk.

    omega defaults to the matter-wave dispersion hbar k^2 / 2m and is applied
    per axis (additive across axes for the default quadratic law).
    """
    if omega is None:
        omega = matter_wave_dispersion(phi)
    work = phi.values.copy()
    for ax in range(phi.grid.dims):
        k = phi.grid.k_axis(ax)
        shape = [1] * phi.grid.dims
        shape[ax] = phi.grid.n[ax]
        work = work * np.exp(-1j * np.asarray(omega(k)).reshape(shape) * t)
    amps = fourier_inverse(work, phi.grid)
    return WaveField(phi.grid, amps, mass=phi.mass, hbar=phi.hbar)


def moment_widths(psi: WaveField) -> tuple[float, float]:
    """(sigma_x, sigma_k) standard deviations of |psi|^2 and |phi|^2 (1D)."""
    if psi.grid.dims != 1:
        raise NotImplementedError("moment widths are 1D")
    x = psi.grid.axis(0)
    rho = psi.density()
    rho = rho / (np.sum(rho) * psi.grid.dx[0])
    mean_x = np.sum(x * rho) * psi.grid.dx[0]
    var_x = np.sum((x - mean_x) ** 2 * rho) * psi.grid.dx[0]
    phi = analyze(psi)
    k = np.fft.fftshift(phi.k_axis(0))
    pk = np.fft.fftshift(phi.density())
    dk = psi.grid.dk[0]
    pk = pk / (np.sum(pk) * dk)
    mean_k = np.sum(k * pk) * dk
    var_k = np.sum((k - mean_k) ** 2 * pk) * dk
    return float(np.sqrt(var_x)), float(np.sqrt(var_k))
