"""Closed-form decay-length and coherence models plus relativistic beam kinematics.

All functions are pure and stateless.  Units are fixed repo-wide:
energies in eV, lengths in nm, times in s, angles in rad.
"""

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import ELECTRON_REST_ENERGY, H_C, HBAR, HBAR_C, LIGHT_SPEED


class LambdaConvention(Enum):
    """Which wavelength spread enters the self-coherence expression."""

    ELECTRON_DISPERSION = "electron_dispersion"
    VIRTUAL_PHOTON = "virtual_photon"


@dataclass(frozen=True)
class BeamState:
    """Relativistic electron beam parameters."""

    accel_voltage: float  # V
    kinetic_energy: float  # eV
    wavelength: float  # nm
    beta: float  # v/c
    momentum_c: float  # pc, eV


@dataclass(frozen=True)
class CoherenceQuery:
    """Energy loss and decoherence phase for a self-coherence evaluation."""

    delta_e: float  # eV, > 0
    delta_phi: float  # rad, >= 0
    lambda_convention: LambdaConvention = LambdaConvention.ELECTRON_DISPERSION

    def __post_init__(self):
        if self.delta_e <= 0:
            raise ValueError(f"delta_e must be > 0, got {self.delta_e}")
        if self.delta_phi < 0:
            raise ValueError(f"delta_phi must be >= 0, got {self.delta_phi}")


@dataclass(frozen=True)
class ModelCurveSet:
    """All decay-length models and Heisenberg times tabulated over an energy-loss grid."""

    grid: np.ndarray  # eV, ascending
    l_s: np.ndarray  # self-coherence length, nm
    l_e: np.ndarray  # light-speed evanescent length, nm
    l_t: np.ndarray  # tunneling depth, nm
    x_i_fit: np.ndarray  # fitted-velocity decay length, nm
    x_ic: np.ndarray  # light-speed decay length, nm (== l_e)
    t_heisenberg: np.ndarray  # s


def beam_kinematics(accel_voltage):
    """Relativistic de Broglie kinematics for an electron accelerated by `accel_voltage` volts."""
    if accel_voltage <= 0:
        raise ValueError(f"accel_voltage must be > 0, got {accel_voltage}")
    kinetic_energy = float(accel_voltage)  # single electron charge: 1 V -> 1 eV
    momentum_c = math.sqrt(kinetic_energy**2 + 2.0 * kinetic_energy * ELECTRON_REST_ENERGY)
    wavelength = H_C / momentum_c
    beta = momentum_c / (kinetic_energy + ELECTRON_REST_ENERGY)
    return BeamState(
        accel_voltage=float(accel_voltage),
        kinetic_energy=kinetic_energy,
        wavelength=wavelength,
        beta=beta,
        momentum_c=momentum_c,
    )


def wavelength_shift(beam, delta_e):
    """Wavelength increase when the beam loses `delta_e` eV, by exact two-point evaluation."""
    if not 0 <= delta_e < beam.kinetic_energy:
        raise ValueError(
            f"delta_e must lie in [0, kinetic_energy), got {delta_e} "
            f"for kinetic_energy {beam.kinetic_energy}"
        )
    if delta_e == 0:
        return 0.0
    shifted = beam_kinematics(beam.accel_voltage - delta_e)
    return shifted.wavelength - beam.wavelength


def self_coherence_length(beam, query):
    """Self-coherence length of a wave packet from the phase difference of two partial waves.

    l_s = delta_phi / (2 pi / lambda - 2 pi / (lambda + delta_lambda)),
    algebraically delta_phi * lambda * (lambda + delta_lambda) / (2 pi delta_lambda).
    """
    lam = beam.wavelength
    if query.lambda_convention is LambdaConvention.ELECTRON_DISPERSION:
        dlam = wavelength_shift(beam, query.delta_e)
    else:
        dlam = H_C / query.delta_e
    if dlam == 0:
        raise ValueError("delta_lambda is zero; self-coherence length diverges")
    return query.delta_phi * lam * (lam + dlam) / (2.0 * math.pi * dlam)


def coherence_time(l_s):
    """Self-coherence time t_s = l_s / c."""
    if l_s < 0:
        raise ValueError(f"l_s must be >= 0, got {l_s}")
    return l_s / LIGHT_SPEED


def evanescent_length(delta_e, kappa):
    """Evanescent decay length kappa / delta_e.

    kappa = hbar*c gives the light-speed length; kappa = fitted hbar*v gives
    the measured decay length.
    """
    if delta_e <= 0:
        raise ValueError(f"delta_e must be > 0, got {delta_e}")
    if kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    return kappa / delta_e


def goos_hanchen_shift(wavelength, phi, n_squared):
    """Magnitude of the lateral shift of a totally internally reflected beam.

    |D| = (lambda / pi) |sin(phi) / sqrt(sin(phi)^2 - n^2)|; for
    sin(phi)^2 < n^2 the root is imaginary and the magnitude of the complex
    expression is taken.
    """
    if not 0 < phi <= math.pi / 2:
        raise ValueError(f"phi must lie in (0, pi/2], got {phi}")
    s = math.sin(phi)
    if s * s == n_squared:
        raise ValueError("sin(phi)^2 equals n^2: shift is singular")
    root = cmath.sqrt(complex(s * s - n_squared, 0.0))
    return abs(wavelength / math.pi * s / root)


def tunneling_depth(delta_e):
    """Penetration depth of a bound state into a barrier: hbar*c / sqrt(2 m c^2 delta_e)."""
    if delta_e <= 0:
        raise ValueError(f"delta_e must be > 0, got {delta_e}")
    return HBAR_C / math.sqrt(2.0 * ELECTRON_REST_ENERGY * delta_e)


def phase_time_constant(delta_e):
    """Time constant of the oscillatory time factor: hbar / delta_e."""
    if delta_e <= 0:
        raise ValueError(f"delta_e must be > 0, got {delta_e}")
    return HBAR / delta_e


def heisenberg_time(delta_e):
    """Uncertainty-principle time hbar / (2 delta_e)."""
    if delta_e <= 0:
        raise ValueError(f"delta_e must be > 0, got {delta_e}")
    return HBAR / (2.0 * delta_e)


def model_curve_table(beam, grid, delta_phi=0.5, kappa_fit=106.0,
                      convention=LambdaConvention.ELECTRON_DISPERSION):
    """Tabulate every model curve over an ascending energy-loss grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("energy-loss grid is empty")
    if np.any(grid <= 0):
        raise ValueError("all grid energies must be > 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")

    l_s = np.array([
        self_coherence_length(beam, CoherenceQuery(de, delta_phi, convention))
        for de in grid
    ])
    l_e = np.array([evanescent_length(de, HBAR_C) for de in grid])
    l_t = np.array([tunneling_depth(de) for de in grid])
    x_i_fit = np.array([evanescent_length(de, kappa_fit) for de in grid])
    x_ic = l_e.copy()
    t_h = np.array([heisenberg_time(de) for de in grid])
    return ModelCurveSet(grid=grid, l_s=l_s, l_e=l_e, l_t=l_t,
                         x_i_fit=x_i_fit, x_ic=x_ic, t_heisenberg=t_h)
