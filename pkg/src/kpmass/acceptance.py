"""Acceptance checks shared by ``kpmass verify-all`` and the test suite.

Each ``criterion_N`` returns a :class:`CriterionResult` holding the measured
values and whether every threshold was met.  Nothing here is tuned to make a
check pass; thresholds are the documented acceptance tolerances.
"""
from __future__ import annotations

import dataclasses
import json
import math
import random
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import oracles
from .diagnostics import (decay_envelope, decay_scan, first_crossing, hamiltonian_kp,
                          mass_identity_gap, mass_report, partial_mass, residual)
from .errors import DomainError
from .evolve import (InitialDatum, TorusGrid, TorusState, bbm_solve, duhamel_solve,
                     linear_apply, mass_line, project_zero_modes, propagate_line, spectral_run)
from .kernels import (DispersionSpec, Grid, calibrate_c1, eval_A, eval_A3, eval_G, kp2_closed_A,
                      kp2_closed_G, local_period)
from .oscquad import QuadratureConfig, eval_F

__all__ = ["CriterionResult", "CRITERIA", "run_all", "load_frozen"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"criterion {self.number:>2} [{status}] {self.title}: {vals} ({self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _rejects(fn) -> bool:
    try:
        fn()
    except DomainError:
        return True
    return False


FAMILIES = (
    ("KP a=2 e=+1", DispersionSpec(2.0, 1)),
    ("KP a=2 e=-1", DispersionSpec(2.0, -1)),
    ("KP a=1.5 e=+1", DispersionSpec(1.5, 1)),
    ("KP-BBM a=2 b=3", DispersionSpec(2.0, 1, family="KP-BBM", weight_order=3.0)),
)
SCAN_LADDER = 2.0 ** np.arange(1, 24)


def criterion_1(cfg: QuadratureConfig) -> CriterionResult:
    t0 = time.perf_counter()
    cal = calibrate_c1(cfg)
    spec = DispersionSpec(2.0, 1)
    worst = 0.0
    for lam in np.linspace(-10.0, 10.0, 200):
        for num, closed in ((eval_G, kp2_closed_G), (eval_A, kp2_closed_A)):
            a = num(spec, 1.0, lam, 0.0, cfg).value
            b = closed(1.0, lam, 0.0, cal)
            worst = max(worst, abs(a - b) / abs(b))
    dt = time.perf_counter() - t0
    ok = cal.rms_residual <= 1e-8 and worst <= 1e-6 and dt <= 120.0
    return CriterionResult(1, "Airy oracle", ok, {
        "c1": cal.c1, "fit_rms": cal.rms_residual, "max_rel_err": worst, "runtime_s": dt})


def criterion_2(cfg: QuadratureConfig) -> CriterionResult:
    orders = {}
    for name, spec in FAMILIES:
        worst = 2.0
        for x, y in ((0.7, 0.4), (-2.3, 1.1), (1.9, -0.6)):
            g = eval_G(spec, 1.0, x, y, cfg).value
            errs = []
            for h in (0.1, 0.05, 0.025):
                fd = (eval_A(spec, 1.0, x + h, y, cfg).value - eval_A(spec, 1.0, x - h, y, cfg).value) / (2 * h)
                errs.append(abs(fd - g))
            for e1, e2 in zip(errs[:-1], errs[1:]):
                order = math.log2(e1 / e2)
                if abs(order - 2.0) > abs(worst - 2.0):
                    worst = order
        orders[name] = worst
    ok = all(abs(o - 2.0) <= 0.2 for o in orders.values())
    return CriterionResult(2, "dA/dx = G, central-difference order", ok,
                           {f"order[{k}]": v for k, v in orders.items()})


def _scan_A(spec, cfg, threshold=1e-3, ladder=SCAN_LADDER):
    return decay_scan(lambda x: eval_A(spec, 1.0, x, 0.0, cfg).value,
                      lambda x: local_period(spec, 1.0, x), ladder, threshold)


def criterion_3(cfg: QuadratureConfig) -> CriterionResult:
    stars = {}
    for name, spec in FAMILIES:
        stars[name] = _scan_A(spec, cfg).X_star
    ok = all(s is not None for s in stars.values())
    return CriterionResult(3, "decay of A below 1e-3 of peak", ok,
                           {f"X*[{k}]": v for k, v in stars.items()})


def criterion_4(cfg: QuadratureConfig) -> CriterionResult:
    lam = np.linspace(-200.0, -20.0, 4000)
    mag = [abs(eval_F(v, 2.0, cfg).value) for v in lam]
    fit = decay_envelope(list(zip(lam, mag)))
    return CriterionResult(4, "envelope exponent of |F|", abs(fit.exponent + 0.5) <= 0.05,
                           {"exponent": fit.exponent, "maxima": fit.points})


def criterion_5(cfg: QuadratureConfig) -> CriterionResult:
    datum = InitialDatum("gaussian", 1.0, 1.0, 1.0)
    xs = mass_line(4096.0)
    ladder = [4.0 * 2 ** k for k in range(11)]
    p0 = partial_mass(datum(xs, 0.0), xs, 4096.0)
    meas = {"P(0,Xmax,0)": p0}
    ok = abs(p0 - 1.0) <= 1e-6
    for eps in (1, -1):
        spec = DispersionSpec(2.0, eps)
        u, a, _ = propagate_line(spec, datum, 1.0, xs, [0.0])
        rep = mass_report(1.0, xs, [0.0], u, a, ladder)
        star = first_crossing(ladder, rep.partial_mass[0], 1e-2)
        meas[f"X*[e={eps:+d}]"] = star
        meas[f"P(1,X*)[e={eps:+d}]"] = None if star is None else float(
            rep.partial_mass[0][ladder.index(star)])
        meas[f"max_gap[e={eps:+d}]"] = rep.max_gap()
        ok = ok and star is not None and rep.max_gap() <= 1e-6
    return CriterionResult(5, "linear mass smoothing", ok, meas)


def _nonlinear_mass(traj, grid, threshold):
    j0 = int(np.argmin(np.abs(grid.y)))
    ladder = [float(x) for x in grid.x[grid.nx // 2 + 2::4]]
    rep = mass_identity_gap(traj, ladder, [float(grid.y[j0])], index=len(traj.times) - 1)
    return first_crossing(ladder, rep.partial_mass[0], threshold), rep


def criterion_6(cfg: QuadratureConfig) -> CriterionResult:
    spec = DispersionSpec(2.0, 1)
    grid = Grid(-40.0, 40.0, 256, -40.0, 40.0, 256)
    datum = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    traj = duhamel_solve(spec, datum, 0.25, 16, 1e-8, grid)
    final_res = max(h[-1] for h in traj.picard_residuals)
    star, rep = _nonlinear_mass(traj, grid, 2e-2)
    lin = linear_apply(spec, datum, float(traj.times[1]), grid)
    first = float(np.max(np.abs(lin.u - traj.linear_fields[1])))
    ok = final_res <= 1e-8 and star is not None and first == 0.0
    return CriterionResult(6, "nonlinear mass smoothing", ok, {
        "picard_residual": final_res, "X*": star, "max_gap": rep.max_gap(),
        "first_iterate_diff": first})


def criterion_7(cfg: QuadratureConfig) -> CriterionResult:
    alpha = 2.0
    beta_ok = (alpha + 3.0) / 2.0 + 0.5
    beta_bad = (alpha + 3.0) / 2.0 - 0.5
    spec = DispersionSpec(alpha, 1, family="KP-BBM", weight_order=beta_ok)
    # continuity: increments of A shrink with the step at a few points
    cont = 0.0
    for x in (-1.0, 0.0, 1.5):
        d1 = abs(eval_A(spec, 1.0, x + 1e-3, 0.3, cfg).value - eval_A(spec, 1.0, x, 0.3, cfg).value)
        d2 = abs(eval_A(spec, 1.0, x + 5e-4, 0.3, cfg).value - eval_A(spec, 1.0, x, 0.3, cfg).value)
        cont = max(cont, d2 / d1 if d1 > 0 else 0.0)
    scan = _scan_A(spec, cfg)
    rejected = _rejects(lambda: DispersionSpec(alpha, 1, family="KP-BBM", weight_order=beta_bad))
    k_ok = (alpha + 3.0) / 4.0 + 0.5
    grid = Grid(-40.0, 40.0, 256, -40.0, 40.0, 256)
    datum = InitialDatum("gaussian", 0.1, 1.0, 1.0)
    k_rejected = _rejects(lambda: bbm_solve(spec, datum, 0.25, 16, 1e-8, grid,
                                            k=(alpha + 3.0) / 4.0 - 0.5))
    traj = bbm_solve(spec, datum, 0.25, 16, 1e-8, grid, k=k_ok)
    final_res = max(h[-1] for h in traj.picard_residuals)
    star, rep = _nonlinear_mass(traj, grid, 2e-2)
    lin = linear_apply(spec, datum, float(traj.times[1]), grid)
    first = float(np.max(np.abs(lin.u - traj.linear_fields[1])))
    ok = (cont < 0.75 and scan.X_star is not None and rejected and k_rejected
          and final_res <= 1e-8 and star is not None and first == 0.0)
    return CriterionResult(7, "KP-BBM kernels and smoothing", ok, {
        "increment_ratio": cont, "X*[A]": scan.X_star, "beta_bad_rejected": rejected,
        "k_bad_rejected": k_rejected, "picard_residual": final_res, "X*[P]": star,
        "first_iterate_diff": first})


_G3_POINTS = ((0.5, 0.3, 0.2), (-1.5, 0.8, 0.4), (1.0, 1.0, 1.0))


def criterion_8(cfg: QuadratureConfig) -> CriterionResult:
    def a3(x, y=0.0, z=0.0):
        return eval_A3(1.0, x, y, z, 2.0, cfg).value

    even = max(max(abs(a3(x, y, z) - a3(x, -y, z)), abs(a3(x, y, z) - a3(x, y, -z)))
               for x, y, z in ((0.7, 0.3, 1.1), (-2.0, 2.0, 0.5), (1.3, 1.3, -0.4)))
    spec = DispersionSpec(2.0, 1)
    scan = decay_scan(a3, lambda x: local_period(spec, 1.0, x), 2.0 ** np.arange(1, 31), 1e-2)
    deriv = 0.0
    h = 5e-4
    for x, y, z in _G3_POINTS:
        fd = (a3(x + h, y, z) - a3(x - h, y, z)) / (2 * h)
        deriv = max(deriv, abs(fd - oracles.brute_G3(1.0, x, y, z, 2.0)[0]))
    rejected = _rejects(lambda: eval_A3(1.0, 0.0, 0.0, 0.0, 1.0, cfg))
    ok = even == 0.0 and scan.X_star is not None and deriv <= 1e-4 and rejected
    return CriterionResult(8, "3D kernel", ok, {
        "parity_diff": even, "X*": scan.X_star, "max_deriv_err": deriv, "alpha1_rejected": rejected})


def criterion_9(cfg: QuadratureConfig) -> CriterionResult:
    spec = DispersionSpec(2.0, 1)
    rng = np.random.default_rng(9)
    worst, budget = 0.0, 0.0
    ok = True
    for _ in range(20):
        t, x, y = rng.uniform(0.5, 2.0), rng.uniform(-5.0, 5.0), rng.uniform(-3.0, 3.0)
        a = eval_G(spec, 8 * t, 2 * x, 4 * y, cfg)
        b = eval_G(spec, t, x, y, cfg)
        gap = abs(a.value - b.value / 8)
        tol = a.error + b.error / 8 + 1e-15
        ok = ok and gap <= tol
        worst, budget = max(worst, gap), max(budget, tol)
    return CriterionResult(9, "scaling G(8t,2x,4y) = G(t,x,y)/8", ok,
                           {"max_gap": worst, "max_error_estimate": budget})


def criterion_10(cfg: QuadratureConfig) -> CriterionResult:
    spec = DispersionSpec(2.0, 1)
    tg = TorusGrid(40.0, 40.0, 128, 128)
    X, Y = np.meshgrid(tg.x, tg.y)
    u = project_zero_modes(InitialDatum("dipole", 0.1, 1.0, 1.0)(X, Y))
    h0 = hamiltonian_kp(u, tg, spec)
    run = spectral_run(spec, TorusState(tg, u), 1e-3, 100)
    drift = abs(hamiltonian_kp(run.fields[-1], tg, spec) - h0) / abs(h0)
    rejected = _rejects(lambda: hamiltonian_kp(u + 1e-3, tg, spec))
    return CriterionResult(10, "Hamiltonian conservation on the torus", drift <= 1e-6 and rejected,
                           {"relative_drift": drift, "nonzero_mean_rejected": rejected})


def load_frozen() -> dict:
    text = resources.files("kpmass").joinpath("data/frozen_oracles.json").read_text()
    return json.loads(text)


def criterion_11(cfg: QuadratureConfig, subset: int = 3, seed: int | None = None) -> CriterionResult:
    frozen = load_frozen()
    names = sorted(oracles.REGISTRY)
    complete = sorted(frozen) == names and all(
        frozen[n]["inputs"] == oracles.REGISTRY[n][1] for n in names)
    rng = random.Random(seed)
    chosen = rng.sample(names, min(subset, len(names)))
    worst = 0.0
    for name in chosen:
        new = np.array(oracles.derive(name))
        old = np.array(frozen[name]["values"])
        scale = max(float(np.max(np.abs(old))), 1e-300)
        worst = max(worst, float(np.max(np.abs(new - old))) / scale)
    return CriterionResult(11, "oracle soundness", complete and worst <= 1e-10, {
        "registry_matches_frozen": complete, "rederived": chosen, "max_rel_change": worst})


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


def run_all(cfg: QuadratureConfig | None = None, numbers=None, seed: int | None = None,
            subset: int = 3, report=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default); ``report`` receives each result."""
    cfg = cfg or QuadratureConfig()
    out = []
    for n in numbers or sorted(CRITERIA):
        t0 = time.perf_counter()
        if n == 11:
            res = criterion_11(cfg, subset=subset, seed=seed)
        else:
            res = CRITERIA[n](cfg)
        res = dataclasses.replace(res, seconds=time.perf_counter() - t0)
        if report is not None:
            report(res)
        out.append(res)
    return out
