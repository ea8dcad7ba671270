import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import erf

from kpmass.diagnostics import (MassReport, decay_envelope, decay_scan, envelope_points,
                                first_crossing, hamiltonian_bbm, hamiltonian_kp,
                                mass_identity_gap, mass_report, partial_mass, residual)
from kpmass.errors import DomainError
from kpmass.evolve import (InitialDatum, SolutionTrajectory, TorusGrid, TorusState, duhamel_solve,
                           linear_apply, mass_line, project_zero_modes, propagate_line,
                           spectral_run)
from kpmass.kernels import DispersionSpec, Grid
from kpmass.oscquad import eval_F

KP2 = DispersionSpec(2.0, 1)
DEFAULT = Grid(-40.0, 40.0, 256, -40.0, 40.0, 256)


def test_partial_mass_gaussian_at_t0():
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    field = d.sample(DEFAULT)
    y = float(DEFAULT.y[DEFAULT.ny // 2])
    p = partial_mass(field, DEFAULT.x, 40.0, y, DEFAULT.y)
    assert abs(p / float(d.x_line_mass(y)) - 1.0) <= 1e-8


def test_partial_mass_dipole_vanishes():
    d = InitialDatum("dipole", 1.0, 1.0, 1.0)
    field = d.sample(DEFAULT)
    y = float(DEFAULT.y[DEFAULT.ny // 2])
    for X in (0.5, 3.0, 17.3, 40.0):
        assert abs(partial_mass(field, DEFAULT.x, X, y, DEFAULT.y)) <= 1e-10


def test_partial_mass_nonuniform_line():
    xs = mass_line(64.0)
    line = np.exp(-0.5 * xs ** 2) / math.sqrt(2 * math.pi)
    for X in (0.7, 2.0, 5.0):
        assert abs(partial_mass(line, xs, X) - erf(X / math.sqrt(2))) <= 1e-6


def test_partial_mass_errors():
    xs = np.linspace(-5.0, 5.0, 11)
    with pytest.raises(DomainError, match="outside the window"):
        partial_mass(np.zeros(11), xs, 6.0)
    with pytest.raises(DomainError):
        partial_mass(np.zeros((3, 11)), xs, 2.0)
    with pytest.raises(DomainError, match="not a grid line"):
        partial_mass(np.zeros((3, 11)), xs, 2.0, 0.5, [-1.0, 0.0, 1.0])


def test_identity_gap_linear_run():
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    xs = mass_line(512.0)
    u, a, err = propagate_line(KP2, d, 1.0, xs, [0.0])
    rep = mass_report(1.0, xs, [0.0], u, a, [2.0, 8.0, 32.0, 128.0, 512.0], error_budget=err)
    assert rep.max_gap() <= 1e-6


def test_identity_gap_dipole():
    d = InitialDatum("dipole", 1.0, 1.0, 1.0)
    xs = mass_line(64.0)
    u, a, _ = propagate_line(KP2, d, 1.0, xs, [0.0, 1.0])
    rep = mass_report(1.0, xs, [0.0, 1.0], u, a, [4.0, 16.0, 64.0])
    # zero total mass, but partial masses on finite windows are not zero
    assert np.all(np.isfinite(rep.partial_mass))
    assert rep.max_gap() <= 1e-6


def test_identity_gap_small_time_is_reported():
    # the kernel sharpens as t -> 0; only the report is produced
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    g = Grid(-10.0, 10.0, 81, 0.0, 0.0, 1)
    gaps = [mass_identity_gap(linear_apply(KP2, d, t, g), [5.0], [0.0]).max_gap()
            for t in (0.5, 0.05)]
    assert all(np.isfinite(gaps))


def test_mass_identity_gap_from_linear_solution():
    d = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    g = Grid(-20.0, 20.0, 401, -1.0, 1.0, 3)
    rep = mass_identity_gap(linear_apply(KP2, d, 1.0, g), [5.0, 10.0, 20.0], [0.0])
    assert rep.identity_gap.shape == (1, 3)
    assert rep.max_gap() <= 1e-3


def test_mass_identity_gap_needs_companion():
    tg = TorusGrid(10.0, 10.0, 16, 16)
    run = spectral_run(KP2, TorusState(tg, np.zeros((16, 16))), 0.01, 2)
    with pytest.raises(DomainError, match="companion"):
        mass_identity_gap(run, [1.0])


def test_report_flags_and_csv(tmp_path):
    rep = MassReport(1.0, [0.0], np.array([1.0, 2.0]), np.array([[0.5, 0.1]]),
                     np.array([[1e-3, 1e-9]]), error_budget=1e-6)
    assert rep.flagged().tolist() == [[True, False]]
    path = tmp_path / "m.csv"
    rep.to_csv(path, "# header")
    lines = path.read_text().splitlines()
    assert lines[0] == "# header" and lines[1] == "t,y,X,P,gap" and len(lines) == 4


def test_first_crossing():
    X = [1.0, 2.0, 4.0, 8.0]
    assert first_crossing(X, [0.5, 0.001, 0.2, 0.001], 0.01) == 8.0
    assert first_crossing(X, [0.5, 0.001, -0.002, 0.001], 0.01) == 2.0
    assert first_crossing(X, [0.5, 0.5, 0.5, 0.5], 0.01) is None


def test_decay_scan_synthetic():
    scan = decay_scan(lambda x: 1.0 / (1.0 + x * x), lambda x: 1.0, 2.0 ** np.arange(8), 1e-3)
    assert_allclose(scan.peak, 1.0, rtol=1e-12)
    assert scan.X_star == 32.0
    assert np.all(np.diff(scan.window_max) < 0)


def test_hamiltonian_zero_and_single_mode():
    tg = TorusGrid(40.0, 40.0, 64, 32)
    X, _ = np.meshgrid(tg.x, tg.y)
    assert hamiltonian_kp(np.zeros_like(X), tg, KP2) == 0.0
    assert hamiltonian_bbm(np.zeros_like(X), tg) == 0.0
    a, xi0 = 0.3, 2 * math.pi * 3 / 40.0
    u = a * np.cos(xi0 * X)
    area = 40.0 * 40.0
    assert_allclose(hamiltonian_bbm(u, tg), 0.5 * a * a / 2 * area, rtol=1e-12)
    for eps in (1, -1):
        spec = DispersionSpec(2.0, eps)
        ref = 0.5 * (1.0 - eps * xi0 ** 2) * a * a / 2 * area
        assert_allclose(hamiltonian_kp(u, tg, spec), ref, rtol=1e-12)


def test_hamiltonian_rejects_mass():
    tg = TorusGrid(40.0, 40.0, 64, 32)
    u = np.full((32, 64), 1e-3)
    with pytest.raises(DomainError, match="x-line mass"):
        hamiltonian_kp(u, tg, KP2)
    with pytest.raises(DomainError, match="x-line mass"):
        hamiltonian_bbm(u, tg)


def test_hamiltonian_drift_bbm():
    spec = DispersionSpec(2.0, 1, family="KP-BBM", weight_order=3.5)
    tg = TorusGrid(40.0, 40.0, 128, 128)
    X, Y = np.meshgrid(tg.x, tg.y)
    u = project_zero_modes(InitialDatum("dipole", 0.1, 1.0, 1.0)(X, Y))
    h0 = hamiltonian_bbm(u, tg)
    run = spectral_run(spec, TorusState(tg, u), 1e-3, 100, record_every=100)
    assert abs(hamiltonian_bbm(run.fields[-1], tg) - h0) <= 1e-6 * abs(h0)


def test_envelope_synthetic_power_law():
    lam = np.geomspace(1.0, 100.0, 50)
    fit = decay_envelope(list(zip(lam, 1.0 / lam)))
    assert abs(fit.exponent + 1.0) <= 1e-6


def test_envelope_rejects_short_input():
    with pytest.raises(DomainError):
        decay_envelope([(1.0, 1.0)] * 5)
    lam = np.linspace(1.0, 2.0, 30)
    with pytest.raises(DomainError, match="decade"):
        decay_envelope(list(zip(lam, lam)))


def test_envelope_positive_lambda_decreasing():
    # beyond lambda ~ 20 the magnitude is at roundoff level
    lam = np.linspace(0.0, 6.0, 150)
    mag = np.array([abs(eval_F(v, 2.0).value) for v in lam])
    el, em = envelope_points(lam, mag)
    assert np.all(np.diff(em) < 0)


def _linear_torus_run(nonlinear):
    tg = TorusGrid(40.0, 40.0, 128, 128)
    X, Y = np.meshgrid(tg.x, tg.y)
    u = project_zero_modes(InitialDatum("dipole", 0.1, 1.0, 1.0)(X, Y))
    return tg, spectral_run(KP2, TorusState(tg, u), 1e-3, 20, nonlinear=nonlinear)


def test_residual_linear_multiplier_run():
    tg, run = _linear_torus_run(False)
    _, r = residual(run, KP2, nonlinear=False, torus=tg)
    assert np.max(r) <= 1e-6


def test_residual_spectral_run():
    tg, run = _linear_torus_run(True)
    _, r = residual(run, KP2, torus=tg)
    assert np.max(r) <= 1e-4


def test_residual_zero_trajectory():
    g = Grid(-10.0, 10.0, 32, -10.0, 10.0, 32)
    tr = SolutionTrajectory(np.linspace(0.0, 0.1, 5), [np.zeros(g.shape)] * 5, "zero", g)
    _, r = residual(tr, KP2)
    assert np.all(r == 0.0)


def test_residual_input_checks():
    g = Grid(-10.0, 10.0, 32, -10.0, 10.0, 32)
    with pytest.raises(DomainError):
        residual(SolutionTrajectory([0.0, 0.1], [np.zeros(g.shape)] * 2, "x", g), KP2)
    with pytest.raises(DomainError, match="uniformly"):
        residual(SolutionTrajectory([0.0, 0.1, 0.3], [np.zeros(g.shape)] * 3, "x", g), KP2)


def test_residual_duhamel_default_and_refinement():
    d = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    _, r = residual(duhamel_solve(KP2, d, 0.25, 16, 1e-8, DEFAULT), KP2)
    assert np.max(r) <= 1e-3
    coarse = Grid(-40.0, 40.0, 128, -40.0, 40.0, 128)
    r8 = np.max(residual(duhamel_solve(KP2, d, 0.25, 8, 1e-8, coarse), KP2)[1])
    r16 = np.max(residual(duhamel_solve(KP2, d, 0.25, 16, 1e-8, coarse), KP2)[1])
    assert r16 < 0.25 * r8
