import numpy as np
import pytest

from evtem import (
    DecayKind,
    DecayModel,
    ExponentialDecayFitter,
    ScenePhantom,
    StackKind,
    align_stack,
    average_stack,
    dose_independence_check,
    extract_profile,
    fit_exponential,
    generate_stack,
    reduce_pipeline,
    reduce_stack,
)
from evtem.reduce import LineProfile, default_window
from evtem.synth import FrameStack


def make_phantom(**overrides):
    base = dict(
        width_px=128, height_px=64, pixel_size=0.5, interface_col=16,
        mu_background=0.01, mu_bulk=1.0, mu_interface=4.0,
        decay_model=DecayModel(DecayKind.EXPONENTIAL, 10.0), delta_e=5.0,
    )
    base.update(overrides)
    return ScenePhantom(**base)


def make_profile(x_i=10.0, i0=4.0, baseline=0.0, noise=0.0, sigma=0.01,
                 n=100, seed=0):
    x = np.arange(n) * 0.5
    y = i0 * np.exp(-x / x_i) + baseline
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, n)
    return LineProfile(x=x, y=y, sigma=np.full(n, sigma), rows_averaged=1,
                       frames_averaged=1, degenerate=sigma == 0.0)


class TestAlignStack:
    def test_zero_max_shift_is_identity(self):
        s = generate_stack(make_phantom(), 4, StackKind.SCATTERED, seed=1)
        out, shifts = align_stack(s, max_shift=0)
        assert out is s
        assert shifts == [(0, 0)] * 4

    def test_recovers_injected_drift(self):
        # high dose so the cross-correlation peak dominates the shot noise
        p = make_phantom(mu_bulk=200.0, mu_interface=400.0)
        # column shifts only: the phantom is row-uniform, so row drift is
        # invisible to any estimator
        injected = [(0, 0), (0, 1), (0, -2), (0, 3), (0, -1)]
        s = generate_stack(p, 5, StackKind.SCATTERED, seed=4,
                           injected_shifts=injected)
        _, recovered = align_stack(s, max_shift=3)
        # alignment must undo the injected columns shifts; the row component
        # is indeterminate (all rows tie) and may land anywhere
        for (dy, dx), (ry, rx) in zip(injected, recovered):
            assert rx == -dx

    def test_aligned_average_sharper_than_unaligned(self):
        p = make_phantom(mu_bulk=200.0, mu_interface=400.0)
        injected = [(0, d) for d in (0, 2, -2, 3, -3, 1)]
        s = generate_stack(p, 6, StackKind.SCATTERED, seed=4,
                           injected_shifts=injected)
        aligned, _ = align_stack(s, max_shift=4)
        grad_aligned = np.abs(np.diff(average_stack(aligned).mean(axis=0))).max()
        grad_blurred = np.abs(np.diff(average_stack(s).mean(axis=0))).max()
        assert grad_aligned > grad_blurred

    def test_degenerate_frames_warn(self):
        flat = FrameStack(counts=np.zeros((3, 8, 8), dtype=np.int32),
                          kind=StackKind.DIFFERENCE)
        with pytest.warns(UserWarning, match="degenerate"):
            out, shifts = align_stack(flat, max_shift=1)
        assert shifts == [(0, 0)] * 3

    def test_negative_max_shift(self):
        s = generate_stack(make_phantom(), 2, StackKind.SCATTERED, seed=1)
        with pytest.raises(ValueError):
            align_stack(s, max_shift=-1)


class TestAverageExtract:
    def test_average(self):
        s = generate_stack(make_phantom(), 10, StackKind.SCATTERED, seed=2)
        mean = average_stack(s)
        assert mean.shape == (64, 128)
        assert np.allclose(mean, s.counts.mean(axis=0))

    def test_extract_geometry(self):
        mean = np.outer(np.ones(64), np.exp(-np.arange(128) / 20.0))
        prof = extract_profile(mean, 16, (0, 64), 0.5)
        assert prof.x[0] == 0.0
        assert prof.x[1] == 0.5
        assert prof.x.size == 128 - 16
        assert prof.rows_averaged == 64

    def test_extract_sigma_is_standard_error(self):
        rng = np.random.default_rng(3)
        mean = rng.normal(10.0, 2.0, (400, 32))
        prof = extract_profile(mean, 0, (0, 400), 1.0)
        assert np.all(prof.sigma > 0)
        assert prof.sigma.mean() == pytest.approx(2.0 / np.sqrt(400), rel=0.1)

    def test_flat_input_degenerate_flag(self):
        with pytest.warns(UserWarning, match="flat"):
            prof = extract_profile(np.ones((16, 32)), 4, (0, 16), 1.0)
        assert prof.degenerate

    @pytest.mark.parametrize("row_range", [(5, 5), (10, 5), (-1, 8), (0, 100)])
    def test_bad_row_range(self, row_range):
        with pytest.raises(ValueError):
            extract_profile(np.ones((16, 32)), 4, row_range, 1.0)

    def test_bad_interface_col(self):
        with pytest.raises(ValueError):
            extract_profile(np.ones((16, 32)), 32, (0, 16), 1.0)


class TestExponentialDecayFitter:
    def test_exact_on_noiseless(self):
        prof = make_profile(x_i=10.0, i0=4.0, baseline=0.5)
        f = ExponentialDecayFitter().fit(prof.x, prof.y, sigma=prof.sigma)
        assert f.x_i_ == pytest.approx(10.0, rel=1e-8)
        assert f.i0_ == pytest.approx(4.0, rel=1e-8)
        assert f.baseline_ == pytest.approx(0.5, abs=1e-8)

    def test_noisy_recovery_within_errors(self):
        prof = make_profile(x_i=10.0, i0=4.0, noise=0.01, sigma=0.01, seed=5)
        f = ExponentialDecayFitter().fit(prof.x, prof.y, sigma=prof.sigma)
        assert abs(f.x_i_ - 10.0) < 3 * f.sigma_x_i_
        assert f.chi2_reduced_ == pytest.approx(1.0, abs=0.5)

    def test_uncertainty_shrinks_with_noise(self):
        loud = make_profile(noise=0.04, sigma=0.04, seed=6)
        quiet = make_profile(noise=0.004, sigma=0.004, seed=6)
        f_loud = ExponentialDecayFitter().fit(loud.x, loud.y, sigma=loud.sigma)
        f_quiet = ExponentialDecayFitter().fit(quiet.x, quiet.y, sigma=quiet.sigma)
        assert f_quiet.sigma_x_i_ < f_loud.sigma_x_i_

    def test_zero_sigma_points_get_unit_weight(self):
        prof = make_profile()
        sigma = prof.sigma.copy()
        sigma[::2] = 0.0
        f = ExponentialDecayFitter().fit(prof.x, prof.y, sigma=sigma)
        assert f.x_i_ == pytest.approx(10.0, rel=1e-6)

    def test_predict(self):
        prof = make_profile()
        f = ExponentialDecayFitter().fit(prof.x, prof.y, sigma=prof.sigma)
        assert np.allclose(f.predict(prof.x), prof.y, atol=1e-6)

    def test_sklearn_get_set_params(self):
        f = ExponentialDecayFitter(max_iter=50)
        assert f.get_params()["max_iter"] == 50
        f.set_params(tol=1e-8)
        assert f.tol == 1e-8

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            ExponentialDecayFitter().predict([1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ExponentialDecayFitter().fit([1.0, 2.0], [1.0])

    def test_growing_signal_rejected(self):
        x = np.arange(20.0)
        y = np.exp(x / 5.0)
        with pytest.raises((ValueError, RuntimeError)):
            ExponentialDecayFitter().fit(x, y)


class TestWindowAndFit:
    def test_default_window_skips_first_pixel(self):
        prof = make_profile()
        x_min, x_max = default_window(prof)
        assert x_min == pytest.approx(prof.x[1])
        assert x_max > x_min

    def test_fit_exponential_uses_window(self):
        prof = make_profile(x_i=8.0)
        fit = fit_exponential(prof, window=(0.5, 30.0))
        assert fit.window == (0.5, 30.0)
        assert fit.x_i == pytest.approx(8.0, rel=1e-6)

    def test_too_few_points_in_window(self):
        prof = make_profile()
        with pytest.raises(ValueError):
            fit_exponential(prof, window=(0.0, 1.0))


class TestPipeline:
    def test_reduce_pipeline_recovers_truth(self):
        p = make_phantom(height_px=512, mu_interface=4.0)
        s = generate_stack(p, 30, StackKind.SCATTERED, seed=10)
        i = generate_stack(p, 30, StackKind.INCIDENT, seed=11)
        fit, profile, shifts = reduce_pipeline(s, i, p.interface_col)
        assert abs(fit.x_i - 10.0) < 4 * fit.sigma_x_i
        assert fit.sigma_x_i < 0.5
        assert profile.frames_averaged == 30
        assert shifts == [(0, 0)] * 30

    def test_dose_independence(self):
        p = make_phantom(height_px=512)
        s = generate_stack(p, 100, StackKind.SCATTERED, seed=20)
        i = generate_stack(p, 100, StackKind.INCIDENT, seed=21)
        from evtem.synth import difference_stack
        d = difference_stack(s, i)
        out = dose_independence_check(d, 0.25, p.interface_col)
        assert out["consistent"]
        assert out["x_i_sub"] > 0

    def test_dose_fraction_validation(self):
        p = make_phantom()
        s = generate_stack(p, 10, StackKind.SCATTERED, seed=1)
        with pytest.raises(ValueError):
            dose_independence_check(s, 0.0, p.interface_col)
        with pytest.raises(ValueError):
            dose_independence_check(s, 1.5, p.interface_col)

    def test_reduce_stack_default_rows(self):
        p = make_phantom(height_px=256)
        s = generate_stack(p, 20, StackKind.SCATTERED, seed=30)
        i = generate_stack(p, 20, StackKind.INCIDENT, seed=31)
        from evtem.synth import difference_stack
        fit, profile, _ = reduce_stack(difference_stack(s, i), p.interface_col)
        assert profile.rows_averaged == 256
        assert fit.x_i > 0
