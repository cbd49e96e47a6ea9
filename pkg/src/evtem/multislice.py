"""Minimal Cowley-Moodie multi-slice engine for the elastic negative control.

A uniform-potential slab with a sharp lateral vacuum edge is propagated with
alternating phase-grating transmission and Fresnel free-space propagation.
Amplitude images at zero defocus must show no exponential vacuum tail, and
Fresnel fringes must grow away from zero defocus; this is the elastic
counterpart the measured evanescent tails are contrasted against.

Propagator sign convention: kernel(k) = exp(-i pi lambda dz |k|^2), forward z
along the beam.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import ELECTRON_REST_ENERGY


@dataclass
class WaveField:
    """Complex 2-D wavefunction on a sampled grid (ny rows, nx columns)."""

    psi: np.ndarray  # complex128, shape (ny, nx)
    pixel_size: float  # nm
    wavelength: float  # nm

    def __post_init__(self):
        ny, nx = self.psi.shape
        for n in (ny, nx):
            if n & (n - 1):
                raise ValueError(f"grid sizes must be powers of two, got {ny}x{nx}")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be > 0")

    @property
    def nx(self):
        return self.psi.shape[1]

    @property
    def ny(self):
        return self.psi.shape[0]

    def intensity(self):
        return np.abs(self.psi) ** 2

    def total_intensity(self):
        return float(np.sum(self.intensity()) * self.pixel_size**2)


@dataclass(frozen=True)
class SlabPhantom:
    """Uniform inner-potential slab with a sharp vacuum edge at `edge_col`."""

    inner_potential: float  # V, within the sample region (columns < edge_col)
    thickness: float  # nm
    n_slices: int
    edge_col: int
    interaction_constant: float  # rad / (V nm)
    edge_softening_px: float = 2.0  # erf edge width; suppresses band-limit ringing
    sample_start_col: int = 0  # > 0 gives a two-sided band, periodic-clean

    def __post_init__(self):
        if self.thickness <= 0:
            raise ValueError("thickness must be > 0")
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")


def interaction_constant(beam):
    """Relativistic beam-potential interaction constant sigma [rad/(V nm)]."""
    u = beam.accel_voltage
    return (2.0 * math.pi / (beam.wavelength * u)
            * (ELECTRON_REST_ENERGY + u) / (2.0 * ELECTRON_REST_ENERGY + u))


def plane_wave(nx, ny, pixel_size, wavelength):
    return WaveField(psi=np.ones((ny, nx), dtype=complex),
                     pixel_size=pixel_size, wavelength=wavelength)


def gaussian_beam(nx, ny, pixel_size, wavelength, waist):
    """Collimated Gaussian beam centered on the grid, 1/e^2 intensity radius `waist`."""
    x = (np.arange(nx) - nx / 2) * pixel_size
    y = (np.arange(ny) - ny / 2) * pixel_size
    r2 = x[None, :] ** 2 + y[:, None] ** 2
    return WaveField(psi=np.exp(-r2 / waist**2).astype(complex),
                     pixel_size=pixel_size, wavelength=wavelength)


def fresnel_propagator(nx, ny, pixel_size, wavelength, dz):
    """Reciprocal-space free-space kernel exp(-i pi lambda dz |k|^2); unit modulus."""
    if pixel_size <= 0:
        raise ValueError("pixel_size must be > 0")
    kx = np.fft.fftfreq(nx, d=pixel_size)
    ky = np.fft.fftfreq(ny, d=pixel_size)
    k2 = kx[None, :] ** 2 + ky[:, None] ** 2
    return np.exp(-1j * math.pi * wavelength * dz * k2)


def free_propagate(field, dz):
    """Fresnel free-space propagation by dz (negative dz back-propagates)."""
    kernel = fresnel_propagator(field.nx, field.ny, field.pixel_size,
                                field.wavelength, dz)
    psi = np.fft.ifft2(np.fft.fft2(field.psi) * kernel)
    return WaveField(psi=psi, pixel_size=field.pixel_size,
                     wavelength=field.wavelength)


def bandlimit_mask(nx, ny, pixel_size):
    """Two-thirds antialias mask on the discrete frequency grid."""
    kx = np.fft.fftfreq(nx, d=pixel_size)
    ky = np.fft.fftfreq(ny, d=pixel_size)
    k = np.sqrt(kx[None, :] ** 2 + ky[:, None] ** 2)
    k_max = 1.0 / (2.0 * pixel_size)
    return k <= (2.0 / 3.0) * k_max


def _transmission(field, slab):
    # erf-apodized edge: keeps the phase grating band-limited on the grid
    cols = np.arange(field.nx, dtype=float)
    s = slab.edge_softening_px
    if s > 0:
        from scipy.special import erf
        frac = 0.5 * (1.0 - erf((cols - slab.edge_col) / s))
        if slab.sample_start_col > 0:
            frac -= 0.5 * (1.0 - erf((cols - slab.sample_start_col) / s))
    else:
        frac = ((cols < slab.edge_col) & (cols >= slab.sample_start_col)).astype(float)
    dz = slab.thickness / slab.n_slices
    phase = slab.interaction_constant * slab.inner_potential * dz * frac
    return np.exp(1j * phase)[None, :]


def multislice_exit_wave(incident, slab):
    """Alternate phase-grating transmission and Fresnel propagation through the slab."""
    if not 0 <= slab.edge_col <= incident.nx:
        raise ValueError(
            f"edge_col {slab.edge_col} incompatible with grid width {incident.nx}")
    dz = slab.thickness / slab.n_slices
    t = _transmission(incident, slab)
    kernel = fresnel_propagator(incident.nx, incident.ny, incident.pixel_size,
                                incident.wavelength, dz)
    mask = bandlimit_mask(incident.nx, incident.ny, incident.pixel_size)
    psi = incident.psi
    for _ in range(slab.n_slices):
        psi = psi * t
        psi = np.fft.ifft2(np.fft.fft2(psi) * mask * kernel)
    return WaveField(psi=psi, pixel_size=incident.pixel_size,
                     wavelength=incident.wavelength)


def defocused_wave(exit_wave, defocus):
    """Wavefield at defocus `defocus` nm (propagation by -defocus from the exit plane)."""
    if defocus == 0:
        return exit_wave
    return free_propagate(exit_wave, -defocus)


def apply_defocus(exit_wave, defocus):
    """Amplitude image |psi|^2 at the requested defocus."""
    return defocused_wave(exit_wave, defocus).intensity()


def edge_metrics(image, edge_col, pixel_size, fringe_halfwidth_px=20,
                 tail_level=0.01):
    """Fringe and tail metrics of an edge image.

    fringe_amplitude: peak-to-peak oscillation of the row-averaged profile
    within `fringe_halfwidth_px` of the edge, relative to the bulk mean.
    tail_extent_nm: largest distance beyond the edge where the vacuum signal
    (above the far-vacuum baseline) still exceeds `tail_level` of the bulk mean.
    """
    image = np.asarray(image, dtype=float)
    height, width = image.shape
    if not 0 < edge_col < width - 1:
        raise ValueError(f"edge_col {edge_col} outside image of width {width}")
    profile = image.mean(axis=0)
    if np.ptp(profile) == 0.0:
        return {"fringe_amplitude": 0.0, "tail_extent_nm": 0.0}

    bulk_hi = max(edge_col - fringe_halfwidth_px, 1)
    bulk_lo = max(edge_col - 4 * fringe_halfwidth_px, 0)
    bulk_mean = float(profile[bulk_lo:bulk_hi].mean())
    vacuum = profile[edge_col:]
    n_far = max(1, vacuum.size // 4)
    baseline = float(np.median(vacuum[-n_far:]))

    lo = max(edge_col - fringe_halfwidth_px, 0)
    hi = min(edge_col + fringe_halfwidth_px + 1, width)
    near = profile[lo:hi]
    denom = abs(bulk_mean) if bulk_mean != 0 else 1.0
    fringe_amplitude = float(np.ptp(near) / denom)

    excess = vacuum - baseline
    above = np.nonzero(excess > tail_level * denom)[0]
    tail_extent = float(above[-1] * pixel_size) if above.size else 0.0
    return {"fringe_amplitude": fringe_amplitude, "tail_extent_nm": tail_extent}


def defocus_scan(incident, slab, defocus_values):
    """Exit wave once, then edge metrics for each defocus; list of result dicts."""
    exit_wave = multislice_exit_wave(incident, slab)
    out = []
    for df in defocus_values:
        image = apply_defocus(exit_wave, df)
        m = edge_metrics(image, slab.edge_col, incident.pixel_size)
        out.append({"defocus_nm": float(df), **m})
    return out


def pendelloesung_thickness(period, n_oscillations):
    """Sample thickness from the thickness-oscillation period and count."""
    if period <= 0 or n_oscillations <= 0:
        raise ValueError("period and n_oscillations must be > 0")
    return period * n_oscillations


def two_beam_intensity(thickness, period):
    """Diffracted-beam intensity sin^2(pi t / period) of the two-beam model."""
    if period <= 0:
        raise ValueError("period must be > 0")
    return np.sin(math.pi * np.asarray(thickness, dtype=float) / period) ** 2
