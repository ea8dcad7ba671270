import importlib

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kpmass import _backend, _fallback

compiled = pytest.importorskip("kpmass._ckernels")


def _case(ny, nq, nx, seed):
    rng = np.random.default_rng(seed)
    coeff = rng.normal(size=(ny, nq)) + 1j * rng.normal(size=(ny, nq))
    coeff_a = rng.normal(size=(ny, nq)) + 1j * rng.normal(size=(ny, nq))
    xi = np.sort(rng.uniform(-6.0, 6.0, nq))
    # uniform runs, a jump and a geometric tail
    xs = np.concatenate([np.linspace(-50.0, -10.0, 300), np.linspace(-9.0, 9.0, 400),
                         10.0 * 1.01 ** np.arange(200)])
    return coeff, coeff_a, xi, xs


@pytest.mark.parametrize("ny", [1, 3, 7])
def test_compiled_matches_fallback(ny):
    coeff, coeff_a, xi, xs = _case(ny, 500, 0, ny)
    u1 = np.zeros((ny, len(xs)))
    a1 = np.zeros_like(u1)
    u2 = np.zeros_like(u1)
    a2 = np.zeros_like(u1)
    _fallback.fourier_sum(coeff, coeff_a, xi, xs, u1, a1)
    compiled.fourier_sum(coeff, coeff_a, xi, xs, u2, a2)
    scale = np.sum(np.abs(coeff))
    assert np.max(np.abs(u1 - u2)) <= 1e-12 * scale
    assert np.max(np.abs(a1 - a2)) <= 1e-12 * scale


def test_fourier_sum_accumulates():
    coeff, coeff_a, xi, xs = _case(2, 50, 0, 4)
    u = np.ones((2, len(xs)))
    a = np.zeros_like(u)
    compiled.fourier_sum(coeff, coeff_a, xi, xs, u, a)
    ref = 1.0 + (coeff @ np.exp(1j * np.outer(xi, xs))).real
    assert_allclose(u, ref, rtol=0, atol=1e-10)


def test_oscillatory_integrand_matches():
    s = np.linspace(0.0, 3.0, 101)
    assert_allclose(compiled.osc_integrand_s(s, -2.0, 1.0, 2.0, 2.0),
                    _fallback.osc_integrand_s(s, -2.0, 1.0, 2.0, 2.0), rtol=1e-14, atol=0)


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("KPMASS_PURE_PYTHON", "1")
    mod = importlib.reload(_backend)
    try:
        assert mod.NAME == "python"
        assert mod.fourier_sum is _fallback.fourier_sum
    finally:
        monkeypatch.delenv("KPMASS_PURE_PYTHON")
        importlib.reload(_backend)
    assert _backend.NAME == "compiled"
