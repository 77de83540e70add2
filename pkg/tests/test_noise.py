import numpy as np
import pytest

from scenegrasp.errors import InvalidArgumentError
from scenegrasp.geometry import DepthImage
from scenegrasp.noise import (NoiseParams, bicubic_matrix, correlated_field, corrupt, corrupt_views, draw_alpha,
                              viewpoint_seed)


def test_gamma_moments():
    p = NoiseParams()
    a = draw_alpha(p, np.random.default_rng(0), 100_000)
    assert abs(a.mean() - 1.0) < 1e-3
    assert abs(a.var(ddof=1) / 2e-4 - 1) < 0.05


def test_field_marginal_std_over_seeds():
    samples = np.array([correlated_field((24, 30), 0.001, 6, np.random.default_rng(s)) for s in range(10_000)])
    std = samples.std(axis=0)
    assert np.all(np.abs(std / 0.001 - 1) < 0.1)
    assert abs(samples.mean()) < 1e-5


def test_field_spatial_correlation_decays():
    rng = np.random.default_rng(3)
    f = np.array([correlated_field((48, 64), 1.0, 6, rng) for _ in range(200)])

    def corr(lag):
        return np.mean(f[:, :, :-lag] * f[:, :, lag:])

    assert corr(1) > corr(12)
    assert corr(1) > 0.8
    assert abs(corr(12)) < 0.1


def test_bicubic_rows_sum_to_one():
    m = bicubic_matrix(60, 10, 6)
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)
    # identity factor reproduces the input
    np.testing.assert_allclose(bicubic_matrix(7, 7, 1), np.eye(7), atol=1e-15)


def test_identity_when_alpha_one_and_sigma_zero(rng):
    y = rng.uniform(0.3, 1.0, (20, 30))
    y[0, 0] = 0.0
    out = corrupt(DepthImage(y), NoiseParams(sigma=0.0), alpha=1.0)
    np.testing.assert_array_equal(out.data, y)


def test_invalid_pixels_stay_zero_and_clamped():
    y = np.zeros((30, 30))
    y[10:20, 10:20] = 1e-4
    out = corrupt(DepthImage(y), NoiseParams(sigma=0.01, seed=5)).data
    assert np.all(out[y == 0] == 0.0)
    assert np.all(out >= 0.0)
    assert np.any(out[y > 0] == 0.0)


def test_alpha_override_keeps_field():
    y = np.full((12, 18), 0.5)
    p = NoiseParams(seed=9)
    a = corrupt(DepthImage(y), p, alpha=1.0).data
    b = corrupt(DepthImage(y), p, alpha=2.0).data
    np.testing.assert_allclose(b - a, 0.5, atol=1e-12)


def test_seeded_and_per_view_distinct():
    y = DepthImage(np.full((16, 16), 0.6))
    p = NoiseParams(seed=42)
    assert np.array_equal(corrupt(y, p).data, corrupt(y, p).data)
    views = corrupt_views([y, y, y], p)
    assert not np.array_equal(views[0].data, views[1].data)
    assert np.array_equal(views[2].data, corrupt(y, p.with_seed(42 ^ 2)).data)
    assert viewpoint_seed(42, 0) == 42


def test_per_pixel_alpha():
    y = DepthImage(np.full((40, 40), 1.0))
    out = corrupt(y, NoiseParams(sigma=0.0, per_pixel_alpha=True, seed=1)).data
    assert out.std() > 0.005


@pytest.mark.parametrize("kw", [dict(k=0.0), dict(s=-1.0), dict(sigma=-0.1), dict(l=0), dict(l=2.5)])
def test_bad_params(kw):
    with pytest.raises(InvalidArgumentError):
        NoiseParams(**kw)
