import numpy as np
import pytest

from fbsdiff import (NULL_COND, Conditioning, OracleConditioningWarning,
                     OracleDenoiser, build_schedule, cfg_eps, forward_diffuse,
                     predict_eps, text_cond)
from fbsdiff.errors import InvalidConfigError, InvalidInputError


def test_conditioning_invariants():
    assert NULL_COND.kind == "null" and NULL_COND.text is None
    assert text_cond("a cat").text == "a cat"
    with pytest.raises(InvalidConfigError):
        Conditioning("null", "stray text")
    with pytest.raises(InvalidConfigError):
        Conditioning("text", None)
    with pytest.raises(InvalidConfigError):
        Conditioning("image")


def test_oracle_sigma_one_gain():
    s = build_schedule(1000)
    d = OracleDenoiser(sigma=1.0)
    rng = np.random.default_rng(0)
    z = rng.normal(size=(2, 8, 8))
    for t in (1, 250, 1000):
        expected = np.sqrt(1.0 - s.abar(t)) * z
        np.testing.assert_allclose(predict_eps(d, z, t, NULL_COND, s), expected,
                                   rtol=1e-12)


def test_oracle_general_sigma_gain():
    s = build_schedule(1000)
    sigma = 2.5
    d = OracleDenoiser(sigma=sigma)
    z = np.ones((1, 4, 4))
    t = 300
    a = s.abar(t)
    expected = np.sqrt(1.0 - a) / (a * sigma ** 2 + 1.0 - a)
    np.testing.assert_allclose(predict_eps(d, z, t, NULL_COND, s),
                               np.full_like(z, expected), rtol=1e-12)


def test_oracle_clean_data_predicts_zero_noise():
    s = build_schedule(1000)
    d = OracleDenoiser()
    z = np.ones((1, 3, 3))
    np.testing.assert_array_equal(predict_eps(d, z, 0, NULL_COND, s), 0.0)


def test_oracle_zero_input_zero_output():
    s = build_schedule(1000)
    out = predict_eps(OracleDenoiser(), np.zeros((2, 4, 4)), 500, NULL_COND, s)
    np.testing.assert_array_equal(out, 0.0)


def test_oracle_warns_on_text_conditioning():
    s = build_schedule(1000)
    d = OracleDenoiser()
    z = np.ones((1, 2, 2))
    with pytest.warns(OracleConditioningWarning):
        cond_out = d.predict_eps(z, 100, text_cond("a dog"), s)
    np.testing.assert_array_equal(cond_out, d.predict_eps(z, 100, NULL_COND, s))


def test_oracle_rejects_bad_sigma():
    with pytest.raises(InvalidConfigError):
        OracleDenoiser(sigma=0.0)
    with pytest.raises(InvalidConfigError):
        OracleDenoiser(sigma=-1.0)


def test_oracle_deterministic():
    s = build_schedule(1000)
    d = OracleDenoiser(sigma=0.7)
    rng = np.random.default_rng(1)
    z = rng.normal(size=(4, 16, 16))
    a = d.predict_eps(z, 123, NULL_COND, s)
    b = d.predict_eps(z, 123, NULL_COND, s)
    np.testing.assert_array_equal(a, b)


def test_oracle_monte_carlo_regression_slope():
    # z_t built from x0 ~ N(0, sigma^2): regressing the true noise on the
    # oracle prediction must give slope 1 (conditional-mean property)
    s = build_schedule(1000)
    sigma = 1.0
    d = OracleDenoiser(sigma=sigma)
    t = 600
    rng = np.random.default_rng(42)
    n = 10_000
    x0 = sigma * rng.normal(size=(1, 100, 100))
    eps = rng.normal(size=(1, 100, 100))
    z_t = forward_diffuse(x0, t, eps, s)
    eps_hat = predict_eps(d, z_t, t, NULL_COND, s)
    slope = float(np.sum(eps_hat * eps) / np.sum(eps_hat * eps_hat))
    assert x0.size == n
    assert abs(slope - 1.0) <= 0.02


def test_cfg_passthrough_at_unit_and_zero():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(2, 4, 4))
    b = rng.normal(size=(2, 4, 4))
    np.testing.assert_array_equal(cfg_eps(a, b, 1.0), a)
    np.testing.assert_array_equal(cfg_eps(a, b, 0.0), b)


def test_cfg_frozen_scalar_example():
    out = cfg_eps(np.ones((1, 1, 1)), np.zeros((1, 1, 1)), 7.5)
    assert out[0, 0, 0] == 7.5


def test_cfg_affine_identity_exact_on_dyadics():
    # eighth-integer values keep every product exact in binary floating point,
    # so the two algebraic forms must agree bit for bit
    rng = np.random.default_rng(3)
    a = rng.integers(-16, 17, size=(3, 8, 8)) / 8.0
    b = rng.integers(-16, 17, size=(3, 8, 8)) / 8.0
    for omega in (0.0, 0.5, 1.0, 2.0, 7.5):
        np.testing.assert_array_equal(cfg_eps(a, b, omega), b + omega * (a - b))


def test_cfg_affine_identity_random_tolerance():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(2, 8, 8))
    b = rng.normal(size=(2, 8, 8))
    np.testing.assert_allclose(cfg_eps(a, b, 7.5), b + 7.5 * (a - b), rtol=1e-12)


def test_cfg_shape_mismatch():
    with pytest.raises(InvalidInputError):
        cfg_eps(np.ones((1, 2, 2)), np.ones((1, 3, 3)), 1.0)
