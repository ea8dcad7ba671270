import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kpmass.errors import ConvergenceError, DomainError
from kpmass.evolve import (InitialDatum, TorusGrid, TorusState, bbm_solve, duhamel_exponent,
                           duhamel_solve, linear_apply, mass_line, project_zero_modes,
                           propagate_line, singular_weight_rule, spectral_run, spectral_step,
                           symbol)
from kpmass.kernels import DispersionSpec, Grid

KP2 = DispersionSpec(2.0, 1)
BBM = DispersionSpec(2.0, 1, family="KP-BBM", weight_order=3.5)
SMALL = Grid(-20.0, 20.0, 128, -20.0, 20.0, 128)


def test_datum_normalisation():
    d = InitialDatum("gaussian", 1.0, 1.5, 0.7, 0.3, -0.2)
    x = np.linspace(-20.0, 20.0, 4001)
    assert_allclose(np.trapezoid(d(x, -0.2), x), 1.0, rtol=1e-12)
    assert_allclose(d.fourier_x(0.0), 1.0)
    assert_allclose(d.x_line_mass(-0.2), 1.0)
    dip = InitialDatum("dipole")
    assert abs(np.trapezoid(dip(x, 0.0), x)) < 1e-15
    assert_allclose(dip.fourier_x(0.0), 0.0)


def test_symbols():
    xi = np.array([-2.0, 0.5, 3.0])
    p, q = symbol(KP2, xi)
    assert_allclose(p, xi * np.abs(xi) ** 2)
    assert_allclose(q, 1.0 / xi)
    p, _ = symbol(DispersionSpec(2.0, -1), xi)
    assert_allclose(p, -xi * np.abs(xi) ** 2)
    p, _ = symbol(BBM, xi)
    assert_allclose(p, -xi / (1.0 + xi * xi))


def test_duhamel_exponents():
    assert_allclose(duhamel_exponent(KP2), 2.0 / 3.0)
    assert duhamel_exponent(DispersionSpec(0.6, 1)) < 1.0
    assert duhamel_exponent(BBM) == 0.5


def test_singular_weight_rule():
    for t in (0.1, 1.0, 2.5):
        s, w = singular_weight_rule(t, 0.5, 6)
        assert np.all((s > 0) & (s < t))
        assert abs(w.sum() - 2.0 * math.sqrt(t)) <= 1e-10
    # exact for polynomials of degree 2n - 1: int_0^1 (1-s)^(-2/3) s^3 ds = B(4, 1/3)
    s, w = singular_weight_rule(1.0, 2.0 / 3.0, 2)
    assert_allclose(np.sum(w * s ** 3), math.gamma(4) * math.gamma(1 / 3) / math.gamma(4 + 1 / 3),
                    rtol=1e-12)
    for gamma in (1.0, -0.1):
        with pytest.raises(DomainError):
            singular_weight_rule(1.0, gamma, 4)


def test_mass_line():
    xs = mass_line(300.0)
    assert xs[0] == -300.0 and xs[-1] == 300.0
    assert np.all(np.diff(xs) > 0)
    assert_allclose(xs, -xs[::-1], rtol=0, atol=0)
    assert np.count_nonzero(xs == 0.0) == 1


def test_zero_datum_is_fixed_point():
    z = InitialDatum("zero")
    tr = duhamel_solve(KP2, z, 0.25, 4, 1e-10, SMALL)
    assert all(np.all(f == 0.0) for f in tr.fields)
    tr = bbm_solve(BBM, z, 0.25, 4, 1e-10, SMALL, k=1.75)
    assert all(np.all(f == 0.0) for f in tr.fields)
    u, a, err = propagate_line(KP2, z, 1.0, [0.0, 1.0], [0.0])
    assert np.all(u == 0) and np.all(a == 0) and err == 0.0


@pytest.mark.parametrize("spec,solver", [(KP2, duhamel_solve), (BBM, bbm_solve)])
def test_first_iterate_is_linear_apply(spec, solver):
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    tr = solver(spec, d, 0.25, 4, 1e-10, SMALL)
    for j in (1, 4):
        lin = linear_apply(spec, d, float(tr.times[j]), SMALL)
        assert np.array_equal(lin.u, tr.linear_fields[j])
        assert np.array_equal(lin.antiderivative, tr.linear_antiderivatives[j])


def test_picard_residuals_decrease():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    tr = duhamel_solve(KP2, d, 0.25, 4, 1e-12, SMALL)
    for hist in tr.picard_residuals[1:]:
        assert all(b < a for a, b in zip(hist[:-1], hist[1:]))
        assert hist[-1] <= 1e-12


def test_picard_aborts_loudly():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    with pytest.raises(ConvergenceError, match="max_iter"):
        duhamel_solve(KP2, d, 0.25, 4, 1e-14, SMALL, max_iter=2)


def test_second_order_perturbation():
    ratios = []
    for amp in (0.01, 0.005):
        tr = duhamel_solve(KP2, InitialDatum("gaussian", amp, 1.0, 1.0), 0.25, 8, 1e-14, SMALL)
        ratios.append(np.max(np.abs(tr.fields[-1] - tr.linear_fields[-1])) / amp ** 2)
    assert abs(ratios[0] / ratios[1] - 1.0) <= 0.2


def test_time_quadrature_order():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    f = {n: duhamel_solve(KP2, d, 0.25, n, 1e-12, SMALL).fields[-1] for n in (4, 8, 16)}
    e1 = np.max(np.abs(f[4] - f[8]))
    e2 = np.max(np.abs(f[8] - f[16]))
    assert math.log2(e1 / e2) >= 1.8


def test_y_parity_preserved():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    tr = duhamel_solve(KP2, d, 0.25, 4, 1e-10, SMALL)
    for f in tr.fields:
        assert np.max(np.abs(f - f[::-1])) <= 1e-15


def test_solver_guards():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    with pytest.raises(DomainError):
        duhamel_solve(BBM, d, 0.25, 4, 1e-8, SMALL)
    with pytest.raises(DomainError):
        bbm_solve(KP2, d, 0.25, 4, 1e-8, SMALL)
    with pytest.raises(DomainError, match="k > "):
        bbm_solve(BBM, d, 0.25, 4, 1e-8, SMALL, k=1.0)
    with pytest.raises(DomainError):
        duhamel_solve(KP2, d, -1.0, 4, 1e-8, SMALL)


def test_fresnel_matches_convolution():
    g = Grid(-16.0, 16.0, 129, -16.0, 16.0, 129)
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    a = linear_apply(KP2, d, 0.5, g)
    b = linear_apply(KP2, d, 0.5, g, method="convolution")
    assert np.max(np.abs(a.u - b.u)) <= 1e-12
    assert np.max(np.abs(a.antiderivative - b.antiderivative)) <= 1e-12


def test_convolution_needs_padding():
    g = Grid(-16.0, 16.0, 65, -16.0, 16.0, 65)
    with pytest.raises(DomainError, match="padding"):
        linear_apply(KP2, InitialDatum("gaussian", 1.0, 1.0, 1.0, x0=6.0), 0.5, g,
                     method="convolution")


def test_antiderivative_companion_second_order():
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    x0 = np.linspace(-6.0, 6.0, 13)
    errs = []
    for h in (0.1, 0.05):
        xs = np.concatenate([x0 - h, x0, x0 + h])
        u, a, _ = propagate_line(KP2, d, 1.0, xs, [0.0, 0.8])
        n = len(x0)
        fd = (a[:, 2 * n:] - a[:, :n]) / (2 * h)
        errs.append(np.max(np.abs(fd - u[:, n:2 * n])))
    assert abs(math.log2(errs[0] / errs[1]) - 2.0) <= 0.2


@pytest.mark.xfail(strict=True, reason="A*phi decays like |x|^(-1/2); at x = -40 it is 0.16 of "
                                       "its peak on y = 0 and larger on far y lines")
def test_antiderivative_small_at_default_window_edges():
    g = Grid(-40.0, 40.0, 256, -40.0, 40.0, 256)
    sol = linear_apply(KP2, InitialDatum("gaussian", 1.0, 1.0, 1.0), 1.0, g)
    assert sol.boundary_ratio <= 1e-2


@pytest.mark.parametrize("eps", [1, -1])
def test_antiderivative_vanishes_at_infinity(eps):
    spec = DispersionSpec(2.0, eps)
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    _, a, _ = propagate_line(spec, d, 1.0, np.linspace(-20.0, 20.0, 801), [0.0])
    peak = np.max(np.abs(a))
    X = 40.0 * 4.0 ** np.arange(5)
    _, b, _ = propagate_line(spec, d, 1.0, np.concatenate([-X, X]), [0.0])
    ratio = np.maximum(np.abs(b[0, :5]), np.abs(b[0, 5:])) / peak
    # each fourfold step halves the edge value
    assert_allclose(ratio[1:] / ratio[:-1], 0.5, rtol=0.02)
    if eps == 1:
        assert ratio[-1] <= 1e-2


def test_linear_apply_matches_torus_multiplier():
    tg = TorusGrid(160.0, 160.0, 512, 512)
    X, Y = np.meshgrid(tg.x, tg.y)
    d = InitialDatum("dipole", 1.0, 1.0, 1.0)
    state = TorusState(tg, project_zero_modes(d(X, Y)))
    for _ in range(10):
        state = spectral_step(KP2, state, 0.01, nonlinear=False)
    sel = np.abs(tg.x) <= 20.0
    u, _, _ = propagate_line(KP2, d, 0.1, tg.x[sel], tg.y[sel])
    assert np.max(np.abs(u - state.u[np.ix_(sel, sel)])) <= 1e-4


def test_duhamel_matches_torus_for_dipole():
    tg = TorusGrid(80.0, 80.0, 256, 256)
    grid = Grid(tg.x[0], tg.x[-1], 256, tg.y[0], tg.y[-1], 256)
    d = InitialDatum("dipole", 0.1, 1.0, 1.0)
    X, Y = np.meshgrid(tg.x, tg.y)
    run = spectral_run(KP2, TorusState(tg, project_zero_modes(d(X, Y))), 1e-3, 100)
    tr = duhamel_solve(KP2, d, 0.1, 8, 1e-10, grid)
    assert np.max(np.abs(tr.fields[-1] - run.fields[-1])) <= 1e-3


def test_single_mode_phase():
    tg = TorusGrid(2 * math.pi, 2 * math.pi, 32, 16)
    X, Y = np.meshgrid(tg.x, tg.y)
    xi0, eta0 = 3.0, 2.0
    state = TorusState(tg, np.cos(xi0 * X + eta0 * Y))
    dt, steps = 0.01, 25
    for _ in range(steps):
        state = spectral_step(KP2, state, dt, nonlinear=False)
    w = xi0 * abs(xi0) ** 2 - eta0 ** 2 / xi0
    # e^{i w t} acting on e^{i(xi x + eta y)}
    assert np.max(np.abs(state.u - np.cos(xi0 * X + eta0 * Y + w * dt * steps))) <= 1e-12


def test_torus_rejects_zero_plane_energy():
    tg = TorusGrid(10.0, 10.0, 16, 16)
    u = np.ones((16, 16))
    with pytest.raises(DomainError, match="xi = 0"):
        spectral_step(KP2, TorusState(tg, u), 0.01)
    assert np.max(np.abs(project_zero_modes(u))) == 0.0
    with pytest.raises(DomainError):
        TorusGrid(10.0, 10.0, 12, 16)
