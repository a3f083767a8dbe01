"""The numba and numpy backends must agree, and the env flag must select them."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskrefine import _accel, kernels, roomsim

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def _cn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.mark.parametrize("value, disabled", [("1", True), ("true", True), ("ON", True),
                                             ("0", False), ("", False), ("no", False)])
def test_env_flag(monkeypatch, value, disabled):
    monkeypatch.setenv(_accel.ENV_FLAG, value)
    assert _accel.numba_disabled() is disabled
    assert _accel.use_numba() is (_accel.HAVE_NUMBA and not disabled)


def test_dispatch_follows_flag(monkeypatch):
    calls = []
    monkeypatch.setattr(kernels, "_quadratic_form_numpy", lambda y, a: calls.append("np") or 0)
    monkeypatch.setattr(kernels, "_quadratic_form_numba", lambda y, a: calls.append("nb") or 0)
    y, a = np.zeros((1, 1, 1), complex), np.zeros((1, 1, 1), complex)
    monkeypatch.setenv(_accel.ENV_FLAG, "1")
    kernels.quadratic_form(y, a)
    monkeypatch.setenv(_accel.ENV_FLAG, "0")
    kernels.quadratic_form(y, a)
    assert calls == ["np", "nb" if _accel.HAVE_NUMBA else "np"]


def test_weighted_covariance_oracle(rng):
    y, w = _cn(rng, 7, 3, 4), rng.uniform(size=(7, 3))
    out = kernels.weighted_covariance(y, w)
    for f in range(3):
        direct = sum(w[t, f] * np.outer(y[t, f], y[t, f].conj()) for t in range(7))
        assert np.allclose(out[f], direct, atol=1e-12)


def test_quadratic_form_oracle(rng):
    y, a = _cn(rng, 5, 2, 3), _cn(rng, 2, 3, 3)
    out = kernels.quadratic_form(y, a)
    assert np.allclose(out, [[np.real(y[t, f].conj() @ a[f] @ y[t, f]) for f in range(2)]
                             for t in range(5)])


@needs_numba
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 20), st.integers(1, 9), st.integers(1, 6))
def test_backends_agree_covariance_and_quadform(seed, T, F, M):
    rng = np.random.default_rng(seed)
    y, w, a = _cn(rng, T, F, M), rng.uniform(size=(T, F)), _cn(rng, F, M, M)
    w[rng.uniform(size=w.shape) < 0.2] = 0.0
    np_cov, nb_cov = (fn(y, w) for fn in kernels.KERNELS["weighted_covariance"])
    assert np.allclose(np_cov, nb_cov, rtol=1e-12, atol=1e-12 * np.abs(np_cov).max())
    np_q, nb_q = (fn(y, a) for fn in kernels.KERNELS["quadratic_form"])
    assert np.allclose(np_q, nb_q, rtol=1e-12, atol=1e-12 * np.abs(np_q).max())


@needs_numba
@pytest.mark.parametrize("beta", [0.0, 0.6, 0.9])
def test_backends_agree_image_source(beta):
    room, fs = (5.0, 4.0, 3.0), 16000
    images, orders = roomsim._image_sources(np.array([2.0, 1.5, 1.2]), room, 40.0)
    mics = np.array([[3.0, 2.0, 1.5], [3.1, 2.0, 1.5]])
    np_fn, nb_fn = kernels.KERNELS["image_source_accumulate"]
    args = (images, orders.astype(float), mics, beta, float(fs), 343.0, 1500, 8)
    a, b = np_fn(*args), nb_fn(*args)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_image_source_single_image_on_grid():
    """An image at an integer-sample delay yields one tap of 1/(4 pi d)."""
    fs, c = 16000.0, 343.0
    d = 343.0 * 40 / fs
    h = kernels.image_source_accumulate(np.array([[d, 0.0, 0.0]]), np.array([0.0]),
                                        np.zeros((1, 3)), 0.5, fs, c, 100)
    expected = np.zeros(100)
    expected[40] = 1.0 / (4 * np.pi * d)
    assert np.allclose(h[0], expected, atol=1e-15)


def test_image_source_fractional_delay_is_interpolated():
    fs, c = 16000.0, 343.0
    d = 343.0 * 40.5 / fs
    h = kernels.image_source_accumulate(np.array([[d, 0.0, 0.0]]), np.array([2.0]),
                                        np.zeros((1, 3)), 0.5, fs, c, 100)[0]
    # taps 33..49 around centre 41; the pairs straddling 40.5 mirror each other
    assert np.allclose(h[33:41], h[48:40:-1], atol=1e-15)
    assert h[32] == 0.0 and h[50] == 0.0
    assert h.sum() == pytest.approx(0.25 / (4 * np.pi * d), rel=0.05)


def test_image_source_same_result_under_both_flags(monkeypatch):
    images = np.array([[1.0, 0.3, 0.2], [2.0, -1.0, 0.5]])
    args = (images, np.array([0.0, 1.0]), np.zeros((1, 3)), 0.7, 16000.0, 343.0, 200)
    monkeypatch.setenv(_accel.ENV_FLAG, "1")
    a = kernels.image_source_accumulate(*args)
    monkeypatch.setenv(_accel.ENV_FLAG, "0")
    b = kernels.image_source_accumulate(*args)
    assert np.allclose(a, b, rtol=0, atol=1e-15)
