"""Acceptance suite: one line per criterion, printed as it finishes."""
import math

import pytest

from kpmass import oracles
from kpmass.acceptance import run_all

FAMILY_NAMES = ("KP a=2 e=+1", "KP a=2 e=-1", "KP a=1.5 e=+1", "KP-BBM a=2 b=3")


def _run(capsys, number, **kw):
    (res,) = run_all(numbers=[number], **kw)
    with capsys.disabled():
        print("\n" + res.line())
    return res


def test_criterion_01_airy_oracle(capsys):
    r = _run(capsys, 1)
    m = r.measured
    assert m["fit_rms"] <= 1e-8
    assert m["max_rel_err"] <= 1e-6
    assert m["runtime_s"] <= 120.0
    assert abs(m["c1"] - 12.0 ** (-1.0 / 3.0)) <= 1e-10
    assert r.passed


def test_criterion_02_derivative_order(capsys):
    r = _run(capsys, 2)
    for name in FAMILY_NAMES:
        assert abs(r.measured[f"order[{name}]"] - 2.0) <= 0.2
    assert r.passed


def test_criterion_03_decay_of_A(capsys):
    r = _run(capsys, 3)
    for name in FAMILY_NAMES:
        assert r.measured[f"X*[{name}]"] is not None
    assert r.passed


def test_criterion_04_envelope_exponent(capsys):
    r = _run(capsys, 4)
    assert abs(r.measured["exponent"] + 0.5) <= 0.05
    assert r.measured["maxima"] >= 20
    assert r.passed


def test_criterion_05_linear_mass(capsys):
    r = _run(capsys, 5)
    m = r.measured
    assert abs(m["P(0,Xmax,0)"] - 1.0) <= 1e-6
    for eps in ("+1", "-1"):
        assert m[f"X*[e={eps}]"] is not None
        assert abs(m[f"P(1,X*)[e={eps}]"]) <= 1e-2
        assert m[f"max_gap[e={eps}]"] <= 1e-6
    assert r.passed


def test_criterion_06_nonlinear_mass(capsys):
    r = _run(capsys, 6)
    m = r.measured
    assert m["picard_residual"] <= 1e-8
    assert m["X*"] is not None
    assert m["first_iterate_diff"] == 0.0
    assert r.passed


def test_criterion_07_kp_bbm(capsys):
    r = _run(capsys, 7)
    m = r.measured
    assert m["increment_ratio"] < 0.75
    assert m["X*[A]"] is not None and m["X*[P]"] is not None
    assert m["beta_bad_rejected"] and m["k_bad_rejected"]
    assert m["picard_residual"] <= 1e-8
    assert m["first_iterate_diff"] == 0.0
    assert r.passed


def test_criterion_08_3d_kernel(capsys):
    r = _run(capsys, 8)
    m = r.measured
    assert m["parity_diff"] == 0.0
    assert m["X*"] is not None
    assert m["max_deriv_err"] <= 1e-4
    assert m["alpha1_rejected"]
    assert r.passed


def test_criterion_09_scaling(capsys):
    r = _run(capsys, 9)
    assert r.measured["max_gap"] <= r.measured["max_error_estimate"]
    assert r.passed


def test_criterion_10_hamiltonian(capsys):
    r = _run(capsys, 10)
    assert r.measured["relative_drift"] <= 1e-6
    assert r.measured["nonzero_mean_rejected"]
    assert r.passed


@pytest.mark.parametrize("subset", [3, len(oracles.REGISTRY)])
def test_criterion_11_oracle_soundness(capsys, subset):
    r = _run(capsys, 11, subset=subset, seed=None)
    assert r.measured["registry_matches_frozen"]
    assert len(r.measured["rederived"]) == subset
    assert r.measured["max_rel_change"] <= 1e-10
    assert math.isfinite(r.measured["max_rel_change"])
    assert r.passed
