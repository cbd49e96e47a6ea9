"""Synthetic single-electron-counting EFTEM frame stacks.

Frames are Poisson-quantized electron counts over a sample/vacuum interface
phantom whose vacuum intensity decays exponentially with a model-dependent
characteristic length.  Generation is deterministic: a counter-based
(Philox) generator with one jumped substream per frame makes every frame
reproducible independently of generation order.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MAX_MEAN = 2.0**31  # Poisson means beyond this would overflow i32 counts


class StackKind(Enum):
    INCIDENT = 0
    SCATTERED = 1
    DIFFERENCE = 2
    SIM = 3


class DecayKind(Enum):
    EXPONENTIAL = "exponential"
    SQRT_TUNNELING = "sqrt_tunneling"


@dataclass(frozen=True)
class DecayModel:
    """Vacuum decay model: the profile is exp(-x / length_nm) in both cases;
    the kinds differ in how the length scales with energy loss."""

    kind: DecayKind
    length_nm: float

    def __post_init__(self):
        if self.length_nm <= 0:
            raise ValueError(f"decay length must be > 0, got {self.length_nm}")


@dataclass(frozen=True)
class ScenePhantom:
    """Ground-truth scene: bulk sample left of `interface_col`, vacuum right,
    with an exponential intensity tail extending into the vacuum."""

    width_px: int
    height_px: int
    pixel_size: float  # nm/px
    interface_col: int
    mu_background: float  # mean counts/px/frame, incident distribution
    mu_bulk: float  # extra mean in the sample region
    mu_interface: float  # tail amplitude at the interface (I0)
    decay_model: DecayModel
    delta_e: float  # eV

    def __post_init__(self):
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be > 0")
        if not 0 < self.interface_col < self.width_px:
            raise ValueError(
                f"interface_col must lie inside (0, width_px), got {self.interface_col}")
        for name in ("mu_background", "mu_bulk", "mu_interface"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def vacuum_distance_nm(self):
        """Distance from the interface for every vacuum column, nm."""
        cols = np.arange(self.interface_col, self.width_px)
        return (cols - self.interface_col) * self.pixel_size

    def mean_map(self, kind):
        """Expected counts/px/frame for the given stack kind, shape (height, width)."""
        row = np.full(self.width_px, self.mu_background, dtype=float)
        if kind is StackKind.SCATTERED:
            row[: self.interface_col] += self.mu_bulk
            x = self.vacuum_distance_nm()
            row[self.interface_col:] += self.mu_interface * np.exp(
                -x / self.decay_model.length_nm)
        elif kind is not StackKind.INCIDENT:
            raise ValueError(f"cannot generate stacks of kind {kind}")
        return np.broadcast_to(row, (self.height_px, self.width_px)).copy()


@dataclass(frozen=True)
class Frame:
    """One recorded frame of integer electron counts."""

    counts: np.ndarray  # (height, width) int32
    phantom: ScenePhantom
    index: int
    seed: int


@dataclass
class FrameStack:
    """An ordered series of frames sharing one phantom and geometry."""

    counts: np.ndarray  # (n_frames, height, width) int32
    kind: StackKind
    phantom: ScenePhantom = None
    pixel_size: float = 1.0
    delta_e: float = 0.0
    seed: int = 0
    injected_shifts: list = field(default_factory=list)

    @property
    def n_frames(self):
        return self.counts.shape[0]

    def frame(self, i):
        return Frame(counts=self.counts[i], phantom=self.phantom, index=i, seed=self.seed)


def _frame_rng(seed, frame_index):
    # one Philox substream per frame; jumped() guarantees non-overlap
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)).jumped(frame_index))


def generate_stack(phantom, n_frames, kind, seed, injected_shifts=None):
    """Draw `n_frames` independent Poisson frames from the phantom's mean map.

    `injected_shifts` optionally applies a rigid integer (row, col) roll to
    the mean map of each frame, to exercise the alignment stage.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if kind not in (StackKind.INCIDENT, StackKind.SCATTERED):
        raise ValueError(f"can only generate INCIDENT or SCATTERED stacks, got {kind}")
    if injected_shifts is not None and len(injected_shifts) != n_frames:
        raise ValueError("injected_shifts must have one (dy, dx) entry per frame")

    mean = phantom.mean_map(kind)
    if mean.max(initial=0.0) > MAX_MEAN:
        raise ValueError("mean counts exceed the i32 overflow guard (2**31)")

    counts = np.empty((n_frames, phantom.height_px, phantom.width_px), dtype=np.int32)
    for i in range(n_frames):
        m = mean
        if injected_shifts is not None:
            dy, dx = injected_shifts[i]
            m = np.roll(mean, (int(dy), int(dx)), axis=(0, 1))
        counts[i] = _frame_rng(seed, i).poisson(m).astype(np.int32)
    return FrameStack(
        counts=counts, kind=kind, phantom=phantom,
        pixel_size=phantom.pixel_size, delta_e=phantom.delta_e, seed=seed,
        injected_shifts=list(injected_shifts) if injected_shifts is not None else [],
    )


def difference_stack(scattered, incident):
    """Per-frame integer subtraction (scattered - incident)."""
    if scattered.counts.shape != incident.counts.shape:
        raise ValueError(
            f"shape mismatch: {scattered.counts.shape} vs {incident.counts.shape}")
    return FrameStack(
        counts=scattered.counts - incident.counts,
        kind=StackKind.DIFFERENCE,
        phantom=scattered.phantom,
        pixel_size=scattered.pixel_size,
        delta_e=scattered.delta_e,
        seed=scattered.seed,
        injected_shifts=list(scattered.injected_shifts),
    )


@dataclass(frozen=True)
class SpectralPeak:
    """One Lorentzian loss peak (center, FWHM-like width, amplitude), all eV/eV/counts."""

    center: float
    width: float
    amplitude: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"peak width must be > 0, got {self.width}")
        if self.amplitude < 0:
            raise ValueError(f"peak amplitude must be >= 0, got {self.amplitude}")


def default_gan_spectrum():
    """GaN-like loss spectrum: bulk plasmon at 19.4 eV plus a weak low-loss shoulder."""
    return [SpectralPeak(19.4, 8.0, 1.0), SpectralPeak(7.0, 4.0, 0.15)]


def spectral_weight(delta_e, peaks, zero_loss_sigma=0.3, zero_loss_amplitude=0.0):
    """Loss-spectrum weight at `delta_e`: sum of Lorentzian peaks plus an
    optional zero-loss Gaussian.  Used to scale the interface amplitude
    across an energy series."""
    if delta_e < 0:
        raise ValueError(f"delta_e must be >= 0, got {delta_e}")
    if zero_loss_sigma <= 0 or zero_loss_amplitude < 0:
        raise ValueError("zero-loss parameters must be positive/non-negative")
    w = zero_loss_amplitude * math.exp(-0.5 * (delta_e / zero_loss_sigma) ** 2)
    for p in peaks:
        half = 0.5 * p.width
        w += p.amplitude * half**2 / ((delta_e - p.center) ** 2 + half**2)
    return w
