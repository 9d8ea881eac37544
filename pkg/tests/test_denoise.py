import numpy as np
import pytest

from latentedit.denoise import (
    AnalyticGaussianDenoiser,
    ConditioningVector,
    ConstantDenoiser,
    ExactNoiseDenoiser,
    GaussianWorld,
    ZeroDenoiser,
)
from latentedit.errors import ConditionError, DimensionError, DomainError, FormatError, NumericalError
from latentedit.rng import gaussian
from latentedit.schedule import NoiseSchedule, reverse_step
from latentedit.volume import LatentVolume, write_volume

from conftest import make_volume

COND0 = ConditioningVector(np.eye(8)[0])
SHAPE = (1, 1, 4, 4)


def _world(mu_value=0.0, sigma=1.0, shape=SHAPE):
    return GaussianWorld({0: LatentVolume.full(shape, mu_value)}, sigma)


def _schedule_with(alpha_bar_value):
    # tiny handmade schedule holding the exact alpha_bar we want at index 2
    ab = np.array([1.0, 0.8, alpha_bar_value, 0.1, 4e-4])
    return NoiseSchedule(4, ab), 2


class TestConditioningVector:
    def test_condition_id_is_argmax(self):
        assert ConditioningVector(np.array([0.0, 3.0, 1.0])).condition_id == 1

    def test_rejects_non_finite(self):
        with pytest.raises(NumericalError):
            ConditioningVector(np.array([1.0, np.nan]))

    def test_rejects_empty(self):
        with pytest.raises(DimensionError):
            ConditioningVector(np.array([]))


class TestGaussianWorld:
    def test_rejects_bad_sigma(self):
        with pytest.raises(DomainError):
            GaussianWorld({0: make_volume(1)}, 0.0)

    def test_rejects_mixed_shapes(self):
        with pytest.raises(DimensionError):
            GaussianWorld({0: make_volume(1), 1: make_volume(2, shape=(1, 2, 8, 8))})

    def test_unknown_condition(self):
        with pytest.raises(ConditionError):
            _world().mean(3)

    def test_manifest_round_trip(self, tmp_path):
        write_volume(tmp_path / "a.latf", LatentVolume.full(SHAPE, 1.0))
        write_volume(tmp_path / "b.latf", LatentVolume.full(SHAPE, 2.0))
        manifest = tmp_path / "world.txt"
        manifest.write_text("# means\n0 a.latf\n\n5 b.latf  # second condition\n")
        world = GaussianWorld.from_manifest(manifest, sigma=2.0)
        assert set(world.means) == {0, 5}
        assert world.sigma == 2.0
        assert (world.mean(5).data == 2.0).all()

    def test_manifest_rejects_bad_line(self, tmp_path):
        manifest = tmp_path / "world.txt"
        manifest.write_text("zero a.latf\n")
        with pytest.raises(FormatError):
            GaussianWorld.from_manifest(manifest)

    def test_manifest_rejects_duplicate_id(self, tmp_path):
        write_volume(tmp_path / "a.latf", LatentVolume.full(SHAPE, 1.0))
        manifest = tmp_path / "world.txt"
        manifest.write_text("0 a.latf\n0 a.latf\n")
        with pytest.raises(FormatError):
            GaussianWorld.from_manifest(manifest)


class TestAnalyticGaussian:
    def test_point_mass_limit(self):
        # sigma -> 0 collapses the posterior to (z - sqrt(ab) mu)/sqrt(1 - ab)
        sched, i = _schedule_with(0.6)
        world = _world(mu_value=0.7, sigma=1e-9)
        den = AnalyticGaussianDenoiser(world, sched)
        z = make_volume(1, shape=SHAPE)
        a = 0.6
        expect = (z.data - np.sqrt(a) * 0.7) / np.sqrt(1 - a)
        assert np.allclose(den.predict_noise(z, i, COND0).data, expect, rtol=1e-9)

    def test_pure_noise_limit(self):
        sched = NoiseSchedule.linear(100)
        den = AnalyticGaussianDenoiser(_world(mu_value=1.0), sched)
        z = make_volume(2, shape=SHAPE)
        out = den.predict_noise(z, 100, COND0)
        assert np.allclose(out.data, z.data, atol=0.02)

    def test_level_zero_returns_zero(self):
        sched = NoiseSchedule.linear(10)
        den = AnalyticGaussianDenoiser(_world(mu_value=0.4, sigma=0.5), sched)
        out = den.predict_noise(make_volume(3, shape=SHAPE), 0, COND0)
        assert (out.data == 0.0).all()

    def test_monte_carlo_posterior_oracle(self):
        # ab=0.5, sigma=1, mu=0, z=1: closed form gives sqrt(0.5); compare with
        # a windowed conditional-mean estimate over 1e6 joint (x0, eps) draws
        sched, i = _schedule_with(0.5)
        den = AnalyticGaussianDenoiser(_world(mu_value=0.0, sigma=1.0), sched)
        z = LatentVolume.full(SHAPE, 1.0)
        predicted = float(den.predict_noise(z, i, COND0).data[0, 0, 0, 0])
        assert np.isclose(predicted, np.sqrt(0.5), rtol=1e-12)

        gen = np.random.Generator(np.random.Philox(key=12345))
        n = 1_000_000
        x0 = gen.standard_normal(n)
        eps = gen.standard_normal(n)
        z_joint = np.sqrt(0.5) * x0 + np.sqrt(0.5) * eps
        window = np.abs(z_joint - 1.0) < 0.02
        sample = eps[window]
        estimate = sample.mean()
        stderr = sample.std(ddof=1) / np.sqrt(sample.size)
        assert sample.size > 1000
        assert abs(estimate - predicted) < 3 * stderr + 1e-3  # 3 SE plus window-bias allowance

    def test_affine_in_z(self):
        sched, i = _schedule_with(0.37)
        den = AnalyticGaussianDenoiser(_world(mu_value=0.3, sigma=1.7), sched)
        z1, z2 = make_volume(4, shape=SHAPE), make_volume(5, shape=SHAPE)
        lam = 0.37
        mix = LatentVolume(z1.data + lam * (z2.data - z1.data))
        lhs = den.predict_noise(mix, i, COND0).data
        rhs = den.predict_noise(z1, i, COND0).data + lam * (
            den.predict_noise(z2, i, COND0).data - den.predict_noise(z1, i, COND0).data
        )
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_full_reverse_mean_converges_to_condition_mean(self):
        # 1000 independent reverse runs stacked on the frame axis; the final
        # per-element mean must land within 5% of sigma around mu
        runs, mu_val, sigma = 1000, 1.2, 1.0
        shape = (runs, 1, 4, 4)
        sched = NoiseSchedule.linear(100)
        world = GaussianWorld({0: LatentVolume.full(shape, mu_val)}, sigma)
        den = AnalyticGaussianDenoiser(world, sched)
        state = LatentVolume(gaussian(77, 5, shape))
        for i in range(100, 0, -1):
            state = reverse_step(state, i, den, COND0, "ddim", sched)
        assert abs(state.data.mean() - mu_val) < 0.05 * sigma

    def test_unknown_condition_id(self):
        sched = NoiseSchedule.linear(10)
        den = AnalyticGaussianDenoiser(_world(), sched)
        cond = ConditioningVector(np.eye(8)[3])
        with pytest.raises(ConditionError):
            den.predict_noise(make_volume(1, shape=SHAPE), 2, cond)

    def test_shape_guard(self):
        sched = NoiseSchedule.linear(10)
        den = AnalyticGaussianDenoiser(_world(), sched)
        with pytest.raises(DimensionError):
            den.predict_noise(make_volume(1, shape=(2, 1, 4, 4)), 2, COND0)


class TestFixtureDenoisers:
    def test_zero_denoiser_shape_and_value(self):
        out = ZeroDenoiser().predict_noise(make_volume(1), 3, COND0)
        assert out.shape == (2, 2, 8, 8)
        assert (out.data == 0.0).all()

    def test_constant_denoiser(self):
        eps = make_volume(2)
        out = ConstantDenoiser(eps).predict_noise(make_volume(1), 3, COND0)
        assert out is eps

    def test_exact_noise_denoiser_recovers_injected_noise(self):
        sched = NoiseSchedule.linear(30)
        z0, eps = make_volume(1), make_volume(2)
        from latentedit.schedule import forward_noise

        z_t = forward_noise(z0, 17, eps, sched)
        oracle = ExactNoiseDenoiser(z0, sched)
        assert np.allclose(oracle.predict_noise(z_t, 17, COND0).data, eps.data, atol=1e-10)

    def test_contract_preserves_shape_and_finiteness(self):
        sched = NoiseSchedule.linear(10)
        z = make_volume(1, shape=SHAPE)
        for den in (ZeroDenoiser(), ExactNoiseDenoiser(z, sched), AnalyticGaussianDenoiser(_world(), sched)):
            out = den.predict_noise(z, 5, COND0)
            assert out.shape == z.shape
            assert np.isfinite(out.data).all()
