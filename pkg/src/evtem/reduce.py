"""Reduction pipeline: rigid stack alignment, averaging, perpendicular profile
extraction, and weighted exponential decay fitting with uncertainties.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .synth import FrameStack, difference_stack


@dataclass(frozen=True)
class LineProfile:
    """Interface-perpendicular intensity profile averaged over rows and frames."""

    x: np.ndarray  # distance from interface, nm, ascending
    y: np.ndarray  # mean counts
    sigma: np.ndarray  # standard error per point
    rows_averaged: int
    frames_averaged: int
    degenerate: bool = False  # flat input, sigma identically zero


@dataclass(frozen=True)
class DecayFit:
    """Fitted y = i0 * exp(-x / x_i) + baseline with 1-sigma uncertainties."""

    i0: float
    x_i: float
    baseline: float
    sigma_x_i: float
    sigma_i0: float
    chi2_reduced: float
    window: tuple  # (x_min, x_max), nm


def align_stack(stack, max_shift):
    """Rigid integer alignment of each frame against the running average of the
    already-aligned frames (frame 0 is the reference).

    Returns the aligned stack and the list of (dy, dx) shifts applied.  Frames
    with zero variance cannot be aligned; they get a zero shift and a warning.
    """
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0, got {max_shift}")
    if stack.n_frames == 0:
        raise ValueError("empty stack")
    shifts = [(0, 0)]
    if max_shift == 0 or stack.n_frames == 1:
        shifts = [(0, 0)] * stack.n_frames
        return stack, shifts

    counts = stack.counts.astype(float)
    aligned = np.empty_like(counts)
    aligned[0] = counts[0]
    running = counts[0].copy()
    for i in range(1, stack.n_frames):
        frame = counts[i]
        ref = running / i
        if frame.std() == 0.0 or ref.std() == 0.0:
            warnings.warn(f"frame {i}: degenerate (flat) data, alignment skipped")
            dy, dx = 0, 0
        else:
            dy, dx = _best_shift(ref, frame, max_shift)
        aligned[i] = np.roll(frame, (dy, dx), axis=(0, 1))
        running += aligned[i]
        shifts.append((dy, dx))
    out = FrameStack(
        counts=np.rint(aligned).astype(stack.counts.dtype), kind=stack.kind,
        phantom=stack.phantom, pixel_size=stack.pixel_size,
        delta_e=stack.delta_e, seed=stack.seed,
        injected_shifts=list(stack.injected_shifts),
    )
    return out, shifts


def _best_shift(ref, frame, max_shift):
    # circular cross-correlation; peak restricted to |shift| <= max_shift
    c = np.fft.irfft2(np.fft.rfft2(ref) * np.conj(np.fft.rfft2(frame)),
                      s=ref.shape)
    offsets = range(-max_shift, max_shift + 1)
    best, best_val = (0, 0), -np.inf
    for dy in offsets:
        for dx in offsets:
            val = c[dy % ref.shape[0], dx % ref.shape[1]]
            if val > best_val:
                best_val = val
                best = (dy, dx)
    return best


def average_stack(stack):
    """Per-pixel arithmetic mean over frames."""
    if stack.n_frames == 0:
        raise ValueError("empty stack")
    return stack.counts.mean(axis=0)


def extract_profile(mean_frame, interface_col, row_range, pixel_size,
                    frames_averaged=1):
    """Average rows [r0, r1) and return the vacuum-side profile versus distance
    from `interface_col` in nm, with row-wise standard errors."""
    mean_frame = np.asarray(mean_frame, dtype=float)
    height, width = mean_frame.shape
    r0, r1 = row_range
    if not (0 <= r0 < r1 <= height) or r1 - r0 < 2:
        raise ValueError(f"row_range {row_range} invalid for height {height}")
    if not 0 <= interface_col < width:
        raise ValueError(f"interface_col {interface_col} outside frame width {width}")
    block = mean_frame[r0:r1, interface_col:]
    n_rows = r1 - r0
    y = block.mean(axis=0)
    sigma = block.std(axis=0, ddof=1) / np.sqrt(n_rows)
    x = np.arange(width - interface_col) * pixel_size
    degenerate = bool(np.all(sigma == 0.0))
    if degenerate:
        warnings.warn("flat profile: all row-wise standard errors are zero")
    return LineProfile(x=x, y=y, sigma=sigma, rows_averaged=n_rows,
                       frames_averaged=frames_averaged, degenerate=degenerate)


class ExponentialDecayFitter(RegressorMixin, BaseEstimator):
    """Weighted least-squares fit of y = i0 * exp(-x / x_i) + baseline.

    Initialization comes from a log-linear regression on baseline-subtracted
    data; refinement uses Levenberg damping with a monotone non-increasing
    weighted residual.  Points with non-positive sigma get unit weight.

    Attributes after fit: i0_, x_i_, baseline_, sigma_i0_, sigma_x_i_,
    covariance_, chi2_reduced_, n_iter_.
    """

    def __init__(self, max_iter=200, tol=1e-10, damping=1e-3):
        self.max_iter = max_iter
        self.tol = tol
        self.damping = damping

    def fit(self, X, y, sigma=None):
        x = column_or_1d(np.asarray(X, dtype=float).squeeze())
        y = column_or_1d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if sigma is None:
            sigma = np.zeros_like(y)
        sigma = column_or_1d(np.asarray(sigma, dtype=float))
        safe_sigma = np.where(sigma > 0, sigma, 1.0)
        w = np.where(sigma > 0, 1.0 / safe_sigma**2, 1.0)

        theta = self._initial_guess(x, y, w)
        theta, cov, wrss, n_iter = self._levenberg(x, y, w, theta)
        i0, x_i, baseline = theta
        if x_i <= 0:
            raise ValueError(f"fitted decay length is non-positive ({x_i}): model mismatch")
        self.i0_, self.x_i_, self.baseline_ = float(i0), float(x_i), float(baseline)
        self.covariance_ = cov
        self.sigma_i0_ = float(np.sqrt(cov[0, 0]))
        self.sigma_x_i_ = float(np.sqrt(cov[1, 1]))
        dof = max(x.size - 3, 1)
        self.chi2_reduced_ = float(wrss / dof)
        self.n_iter_ = n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "x_i_")
        x = column_or_1d(np.asarray(X, dtype=float).squeeze())
        return self.i0_ * np.exp(-x / self.x_i_) + self.baseline_

    @staticmethod
    def _initial_guess(x, y, w):
        n_tail = max(1, x.size // 10)
        baseline = min(np.median(y[-n_tail:]), np.min(y))
        z = y - baseline
        mask = z > 0
        if mask.sum() < 5:
            raise ValueError("need at least 5 points above the baseline estimate")
        lz = np.log(z[mask])
        wm = w[mask] * z[mask] ** 2  # error propagation onto log scale
        xm = x[mask]
        xb = np.average(xm, weights=wm)
        lb = np.average(lz, weights=wm)
        denom = np.sum(wm * (xm - xb) ** 2)
        slope = np.sum(wm * (xm - xb) * (lz - lb)) / denom if denom > 0 else -1.0
        if slope >= 0:
            x_i = (x[-1] - x[0]) / 2 or 1.0
        else:
            x_i = -1.0 / slope
        i0 = float(np.exp(lb + xb / x_i))
        return np.array([i0, x_i, baseline], dtype=float)

    def _levenberg(self, x, y, w, theta):
        def residual(th):
            i0, x_i, b = th
            return y - (i0 * np.exp(-x / x_i) + b)

        def jacobian(th):
            i0, x_i, b = th
            e = np.exp(-x / x_i)
            return np.column_stack([e, i0 * x / x_i**2 * e, np.ones_like(x)])

        lam = self.damping
        r = residual(theta)
        wrss = np.sum(w * r * r)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            J = jacobian(theta)
            A = J.T @ (w[:, None] * J)
            g = J.T @ (w * r)
            step_ok = False
            for _ in range(50):
                try:
                    delta = np.linalg.solve(A + lam * np.diag(np.diag(A)), g)
                except np.linalg.LinAlgError:
                    lam *= 10
                    continue
                trial = theta + delta
                if trial[1] <= 0:
                    lam *= 10
                    continue
                r_trial = residual(trial)
                wrss_trial = np.sum(w * r_trial * r_trial)
                if wrss_trial <= wrss:
                    step_ok = True
                    break
                lam *= 10
            if not step_ok:
                break  # damping exhausted: current point is the (local) optimum
            rel = np.max(np.abs(delta) / np.maximum(np.abs(theta), 1e-300))
            theta, r, wrss = trial, r_trial, wrss_trial
            lam = max(lam / 3, 1e-12)
            if rel < self.tol:
                break
        else:
            raise RuntimeError(
                f"exponential fit did not converge in {self.max_iter} iterations; "
                f"last iterate i0={theta[0]:.6g}, x_i={theta[1]:.6g}, "
                f"baseline={theta[2]:.6g}")
        J = jacobian(theta)
        A = J.T @ (w[:, None] * J)
        cov = np.linalg.inv(A)
        return theta, cov, wrss, n_iter


def default_window(profile):
    """Fit window [one pixel, first x where the signal drops below
    max(3 * baseline noise, 1e-4 counts)]."""
    x = profile.x
    pixel = x[1] - x[0] if x.size > 1 else 1.0
    x_min = x[0] + pixel
    n_tail = max(1, x.size // 10)
    baseline_sigma = float(np.median(profile.sigma[-n_tail:]))
    threshold = max(3.0 * baseline_sigma, 1e-4)
    below = np.nonzero((profile.y < threshold) & (x >= x_min))[0]
    x_max = x[below[0]] if below.size else x[-1]
    if np.count_nonzero((x >= x_min) & (x <= x_max)) < 5:
        x_max = x[-1]
    return (float(x_min), float(x_max))


def fit_exponential(profile, window=None, fitter=None):
    """Fit the decay model on `profile` restricted to `window` (default: data-driven)."""
    if window is None:
        window = default_window(profile)
    x_min, x_max = window
    mask = (profile.x >= x_min) & (profile.x <= x_max)
    if mask.sum() < 5:
        raise ValueError(f"fewer than 5 profile points inside window {window}")
    fitter = fitter or ExponentialDecayFitter()
    sigma = None if profile.degenerate else profile.sigma[mask]
    fitter.fit(profile.x[mask], profile.y[mask], sigma=sigma)
    return DecayFit(
        i0=fitter.i0_, x_i=fitter.x_i_, baseline=fitter.baseline_,
        sigma_x_i=fitter.sigma_x_i_, sigma_i0=fitter.sigma_i0_,
        chi2_reduced=fitter.chi2_reduced_, window=(float(x_min), float(x_max)),
    )


def reduce_stack(stack, interface_col, row_range=None, max_shift=0, window=None):
    """Full reduction of one (difference) stack: align, average, extract, fit."""
    aligned, shifts = align_stack(stack, max_shift)
    mean = average_stack(aligned)
    if row_range is None:
        row_range = (0, mean.shape[0])
    profile = extract_profile(mean, interface_col, row_range, stack.pixel_size,
                              frames_averaged=stack.n_frames)
    fit = fit_exponential(profile, window=window)
    return fit, profile, shifts


def reduce_pipeline(scattered, incident, interface_col, row_range=None,
                    max_shift=0, window=None):
    """Full reduction of a scattered/incident stack pair via their difference."""
    diff = difference_stack(scattered, incident)
    return reduce_stack(diff, interface_col, row_range=row_range,
                        max_shift=max_shift, window=window)


def dose_independence_check(stack, fraction, interface_col, row_range=None,
                            max_shift=0, window=None):
    """Compare the fitted decay length on the full stack against the leading
    `fraction` of frames; consistency at the 3-sigma level."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    n_sub = int(round(fraction * stack.n_frames))
    if n_sub < 1:
        raise ValueError(
            f"fraction {fraction} of {stack.n_frames} frames leaves no frame to fit")
    fit_full, _, _ = reduce_stack(stack, interface_col, row_range, max_shift, window)
    sub = FrameStack(counts=stack.counts[:n_sub], kind=stack.kind,
                     phantom=stack.phantom, pixel_size=stack.pixel_size,
                     delta_e=stack.delta_e, seed=stack.seed)
    fit_sub, _, _ = reduce_stack(sub, interface_col, row_range, max_shift, window)
    combined_sigma = float(np.hypot(fit_full.sigma_x_i, fit_sub.sigma_x_i))
    consistent = abs(fit_full.x_i - fit_sub.x_i) < 3.0 * combined_sigma
    return {
        "x_i_full": fit_full.x_i,
        "x_i_sub": fit_sub.x_i,
        "combined_sigma": combined_sigma,
        "consistent": bool(consistent),
    }
