import numpy as np
import pytest
from scipy import stats

from evtem import (
    DecayKind,
    DecayModel,
    ScenePhantom,
    SpectralPeak,
    StackKind,
    difference_stack,
    generate_stack,
    spectral_weight,
)
from evtem.synth import default_gan_spectrum


def make_phantom(**overrides):
    base = dict(
        width_px=64, height_px=32, pixel_size=0.5, interface_col=16,
        mu_background=0.01, mu_bulk=1.0, mu_interface=2.0,
        decay_model=DecayModel(DecayKind.EXPONENTIAL, 10.0), delta_e=5.0,
    )
    base.update(overrides)
    return ScenePhantom(**base)


class TestScenePhantom:
    def test_mean_map_incident(self):
        p = make_phantom()
        m = p.mean_map(StackKind.INCIDENT)
        assert m.shape == (32, 64)
        assert np.all(m == 0.01)

    def test_mean_map_scattered(self):
        p = make_phantom()
        m = p.mean_map(StackKind.SCATTERED)
        assert np.allclose(m[:, :16], 1.01)
        # value exactly at the interface: background + full tail amplitude
        assert np.allclose(m[:, 16], 0.01 + 2.0)
        # one decay length into the vacuum: amplitude down by 1/e
        col = 16 + int(10.0 / 0.5)
        assert m[0, col] == pytest.approx(0.01 + 2.0 * np.exp(-1.0), rel=1e-12)

    def test_mean_map_rows_identical(self):
        m = make_phantom().mean_map(StackKind.SCATTERED)
        assert np.all(m == m[0])

    def test_vacuum_distance(self):
        x = make_phantom().vacuum_distance_nm()
        assert x[0] == 0.0
        assert x[1] == 0.5
        assert x.size == 64 - 16

    def test_cannot_request_difference_map(self):
        with pytest.raises(ValueError):
            make_phantom().mean_map(StackKind.DIFFERENCE)

    @pytest.mark.parametrize("bad", [
        {"interface_col": 0}, {"interface_col": 64}, {"pixel_size": 0.0},
        {"mu_background": -0.1}, {"mu_bulk": -1.0}, {"mu_interface": -1.0},
    ])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            make_phantom(**bad)

    def test_decay_model_validation(self):
        with pytest.raises(ValueError):
            DecayModel(DecayKind.EXPONENTIAL, 0.0)


class TestGenerateStack:
    def test_shapes_and_dtype(self):
        s = generate_stack(make_phantom(), 5, StackKind.SCATTERED, seed=1)
        assert s.counts.shape == (5, 32, 64)
        assert s.counts.dtype == np.int32
        assert s.kind is StackKind.SCATTERED
        assert s.n_frames == 5

    def test_deterministic(self):
        a = generate_stack(make_phantom(), 4, StackKind.SCATTERED, seed=7)
        b = generate_stack(make_phantom(), 4, StackKind.SCATTERED, seed=7)
        assert np.array_equal(a.counts, b.counts)

    def test_seed_changes_frames(self):
        a = generate_stack(make_phantom(), 2, StackKind.SCATTERED, seed=7)
        b = generate_stack(make_phantom(), 2, StackKind.SCATTERED, seed=8)
        assert not np.array_equal(a.counts, b.counts)

    def test_order_independent_substreams(self):
        # frame i is identical whether generated in a 2-frame or 6-frame run
        short = generate_stack(make_phantom(), 2, StackKind.SCATTERED, seed=3)
        long = generate_stack(make_phantom(), 6, StackKind.SCATTERED, seed=3)
        assert np.array_equal(short.counts, long.counts[:2])

    def test_frames_mutually_independent(self):
        s = generate_stack(make_phantom(), 3, StackKind.SCATTERED, seed=3)
        assert not np.array_equal(s.counts[0], s.counts[1])

    def test_poisson_mean(self):
        p = make_phantom(mu_bulk=4.0, mu_background=0.0, mu_interface=0.0)
        s = generate_stack(p, 200, StackKind.SCATTERED, seed=11)
        bulk = s.counts[:, :, :16]
        assert bulk.mean() == pytest.approx(4.0, rel=0.01)
        assert bulk.var() == pytest.approx(4.0, rel=0.05)

    def test_poisson_distribution_chi2(self):
        p = make_phantom(mu_bulk=2.0, mu_background=0.0, mu_interface=0.0,
                         width_px=32, interface_col=16)
        s = generate_stack(p, 100, StackKind.SCATTERED, seed=5)
        sample = s.counts[:, :, :16].ravel()
        kmax = 9
        observed = np.bincount(np.minimum(sample, kmax), minlength=kmax + 1)
        pmf = stats.poisson.pmf(np.arange(kmax), 2.0)
        expected = np.append(pmf, 1.0 - pmf.sum()) * sample.size
        _, pvalue = stats.chisquare(observed, expected)
        assert pvalue > 0.01

    def test_injected_shift_moves_interface(self):
        p = make_phantom(mu_bulk=50.0)
        shifted = generate_stack(p, 1, StackKind.SCATTERED, seed=2,
                                 injected_shifts=[(0, 3)])
        profile = shifted.counts[0].mean(axis=0)
        assert profile[17] > 25  # bulk plateau now extends past col 16
        assert shifted.injected_shifts == [(0, 3)]

    def test_injected_shift_length_mismatch(self):
        with pytest.raises(ValueError):
            generate_stack(make_phantom(), 3, StackKind.SCATTERED, seed=2,
                           injected_shifts=[(0, 0)])

    def test_rejects_difference_kind(self):
        with pytest.raises(ValueError):
            generate_stack(make_phantom(), 1, StackKind.DIFFERENCE, seed=1)

    def test_rejects_zero_frames(self):
        with pytest.raises(ValueError):
            generate_stack(make_phantom(), 0, StackKind.SCATTERED, seed=1)

    def test_overflow_guard(self):
        p = make_phantom(mu_bulk=2.0**32)
        with pytest.raises(ValueError):
            generate_stack(p, 1, StackKind.SCATTERED, seed=1)


class TestDifferenceStack:
    def test_subtraction(self):
        p = make_phantom()
        s = generate_stack(p, 3, StackKind.SCATTERED, seed=1)
        i = generate_stack(p, 3, StackKind.INCIDENT, seed=2)
        d = difference_stack(s, i)
        assert d.kind is StackKind.DIFFERENCE
        assert np.array_equal(d.counts, s.counts - i.counts)
        assert d.delta_e == p.delta_e

    def test_can_be_negative(self):
        p = make_phantom(mu_background=5.0, mu_bulk=0.0, mu_interface=0.0)
        s = generate_stack(p, 10, StackKind.SCATTERED, seed=1)
        i = generate_stack(p, 10, StackKind.INCIDENT, seed=2)
        assert difference_stack(s, i).counts.min() < 0

    def test_shape_mismatch(self):
        p = make_phantom()
        s = generate_stack(p, 3, StackKind.SCATTERED, seed=1)
        i = generate_stack(p, 2, StackKind.INCIDENT, seed=2)
        with pytest.raises(ValueError):
            difference_stack(s, i)


class TestSpectralWeight:
    def test_peak_maximum_at_center(self):
        peaks = default_gan_spectrum()
        assert spectral_weight(19.4, peaks) > spectral_weight(25.0, peaks)
        assert spectral_weight(19.4, peaks) > spectral_weight(12.0, peaks)

    def test_lorentzian_value(self):
        peak = SpectralPeak(10.0, 4.0, 2.0)
        assert spectral_weight(10.0, [peak]) == pytest.approx(2.0, rel=1e-12)
        # half maximum at center +/- width/2
        assert spectral_weight(12.0, [peak]) == pytest.approx(1.0, rel=1e-12)

    def test_zero_loss_term(self):
        w = spectral_weight(0.0, [], zero_loss_amplitude=3.0)
        assert w == pytest.approx(3.0, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            spectral_weight(-1.0, [])
        with pytest.raises(ValueError):
            SpectralPeak(1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            SpectralPeak(1.0, 1.0, -1.0)

    def test_default_spectrum_plasmon(self):
        peaks = default_gan_spectrum()
        assert peaks[0].center == 19.4
