"""Brute-force reference evaluations, independent of :mod:`kpmass.oscquad`.

None of these use integration by parts, region splits or sequence
acceleration.  They are slow and meant for producing frozen test values and
for spot checks in ``verify-all``.

* :func:`damped_one_sided` regularises ``exp(i sigma xi^(alpha+1))`` to
  ``exp((i sigma - kappa) xi^(alpha+1))``, integrates on dense uniform
  Gauss-Legendre panels until the damping has killed the integrand, and
  extrapolates ``kappa -> 0`` by Neville's polynomial scheme.
* :func:`mp_one_sided` uses mpmath's ``quadosc`` for absolutely integrable
  (KP-BBM) amplitudes.
"""
from __future__ import annotations

import math

import mpmath as mp
import numpy as np

__all__ = ["damped_one_sided", "damped_full_line", "damped_tail", "mp_one_sided",
           "fresnel_check", "brute_G3", "airy_fit", "REGISTRY", "derive"]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _dense(f, a, b, panel):
    n = max(1, int(math.ceil((b - a) / panel)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    x = mid + half * _GL_X[None, :]
    return complex(np.sum(half[:, 0] * (f(x) @ _GL_W)))


def _neville(h, v):
    v = list(v)
    n = len(v)
    for k in range(1, n):
        for i in range(n - k):
            v[i] = (h[i + k] * v[i] - h[i] * v[i + 1]) / (h[i + k] - h[i])
    return v[0]


def damped_one_sided(p, lam, sigma, alpha, m=None, kappa0=0.1, levels=9, amp_phase=None):
    """``int_0^inf xi^p m(xi) e^{i(lam xi + sigma xi^(alpha+1))}`` by damping and extrapolation.

    Returns ``(value, spread)`` where ``spread`` compares the extrapolations
    from the last two subsets of damping levels.
    """
    vals = []
    kappas = [kappa0 * 2.0 ** (-j) for j in range(levels)]
    for kappa in kappas:
        top = (40.0 / kappa) ** (1.0 / (alpha + 1.0))
        s_top = math.sqrt(top)

        def f(s):
            xi = s * s
            out = 2.0 * s ** (2 * p + 1) * np.exp(
                1j * lam * xi + (1j * sigma - kappa) * xi ** (alpha + 1.0))
            if m is not None:
                out = out * m(xi)
            return out
        # about 8 panels per local oscillation in s
        dtheta = abs(lam) * 2 * s_top + sigma * (2 * alpha + 2) * s_top ** (2 * alpha + 1)
        panel = min(0.05, 2 * np.pi / max(dtheta, 1e-9))
        vals.append(_dense(f, 0.0, s_top, panel))
    full = _neville(kappas, vals)
    part = _neville(kappas[:-1], vals[:-1])
    return full, abs(full - part)


def damped_full_line(kind, lam, alpha, epsilon=1, **kw):
    """Full-line KP integrals for the pure power kinds via :func:`damped_one_sided`."""
    p, parity, c0 = {
        "half_power": (0.5, 1, np.exp(-0.25j * np.pi)),
        "inv_half_power": (-0.5, -1, np.exp(-0.25j * np.pi)),
        "signum": (0.0, -1, np.exp(-0.25j * np.pi)),
        "unit": (0.0, 1, 1.0),
    }[kind]
    if epsilon == 1:
        half, spread = damped_one_sided(p, lam, 1.0, alpha, **kw)
        z = c0 * half
        return z + parity * np.conj(z), 2 * spread
    half, spread = damped_one_sided(p, -lam, 1.0, alpha, **kw)
    z = np.conj(c0) * half
    return np.conj(z) + parity * z, 2 * spread


def mp_one_sided(p, lam, sigma, alpha, m, dps=20):
    """mpmath ``quadosc`` reference for absolutely integrable amplitudes.

    ``m`` must accept an mpmath number.
    """
    with mp.workdps(dps):
        def f(xi):
            return xi ** p * m(xi) * mp.expj(lam * xi + sigma * xi ** (alpha + 1))
        head = mp.quad(f, [0, 0.25, 1, 2, 4])
        if sigma > 0:
            tail = mp.quadosc(f, [4, mp.inf], zeros=lambda n: ((lam * 0 + n * mp.pi) / sigma) ** (1 / (alpha + 1)) + 4)
        elif lam != 0:
            tail = mp.quadosc(f, [4, mp.inf], omega=abs(lam))
        else:
            tail = mp.quad(f, [4, 64, 1024, mp.inf])
        return complex(head + tail)


def fresnel_check(y, xi, t, kappa=(0.02, 0.01, 0.005, 0.0025)):
    """Numerical transverse integral ``int e^{i y eta - i t eta^2 / xi} d eta``.

    Computed with Gaussian damping ``e^{-kappa eta^2}`` and extrapolated to zero
    damping; compare with ``sqrt(pi |xi| / t) e^{-i pi/4 sgn xi} e^{i y^2 xi / 4t}``.
    """
    vals = []
    for k in kappa:
        top = math.sqrt(40.0 / k)

        def f(eta):
            return np.exp(1j * y * eta - (1j * t / xi + k) * eta * eta)
        freq = abs(y) + 2 * t / abs(xi) * top
        vals.append(_dense(f, -top, top, min(0.1, 2 * np.pi / freq)))
    return _neville(list(kappa), vals)


def brute_G3(t, x, y, z, alpha, epsilon=1, **kw):
    """3D fundamental solution from the amplitude of G itself (not of A).

    After the two transverse Fresnel integrals the amplitude is
    ``(pi/t) (-i sgn xi) |xi|``; the remaining ``xi`` integral is done with
    :func:`damped_one_sided`.  Independent of the antiderivative route.
    """
    a1 = 1.0 / (alpha + 1.0)
    lam = x * t ** (-a1) + (y * y + z * z) * t ** (-(alpha + 2.0) * a1) / 4.0
    half, spread = damped_one_sided(1.0, lam, 1.0, alpha, **kw)
    # amp(xi) = -i|xi| for xi > 0 and +i|xi| for xi < 0: I = -i h + conj(-i h)
    z_ = -1j * half
    val = (z_ + np.conj(z_)).real
    pref = (2 * math.pi) ** -3 * math.pi / t * t ** (-2.0 * a1)
    return pref * val, pref * 2 * spread


def damped_tail(p, lam, alpha, cutoff, sigma=1.0, **kw):
    """``int_cutoff^inf xi^p e^{i(lam xi + sigma xi^(alpha+1))}`` as the damped full
    half-line value minus an undamped dense head on ``[0, cutoff]``."""
    full, spread = damped_one_sided(p, lam, sigma, alpha, **kw)

    def f(s):
        xi = s * s
        return 2.0 * s ** (2 * p + 1) * np.exp(1j * (lam * xi + sigma * xi ** (alpha + 1.0)))
    head = _dense(f, 0.0, math.sqrt(cutoff), 0.005)
    return full - head, spread


def airy_fit(lams=None, alpha=2.0):
    """Least-squares ``(c1, scale)`` in ``A(1, lam, 0) = -(scale / (6 c1)) Ai(c1 lam)^2``.

    ``A`` comes from :func:`damped_full_line` and the Fresnel constant; Airy
    values from :func:`scipy.special.airy`.  Returns ``(c1, scale, rms)``.
    """
    from scipy import optimize, special

    lams = np.linspace(-8.0, 4.0, 13) if lams is None else np.asarray(lams, dtype=float)
    c_g = math.sqrt(math.pi) / (4.0 * math.pi ** 2)
    data = np.array([c_g * (-1j * damped_full_line("inv_half_power", lam, alpha)[0]).real
                     for lam in lams])

    def resid(q):
        c1, s = q
        return -(s / (6.0 * c1)) * special.airy(c1 * lams)[0] ** 2 - data

    sol = optimize.least_squares(resid, [0.45, 1.7], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    rms = float(np.sqrt(np.mean(sol.fun ** 2)))
    return float(sol.x[0]), float(sol.x[1]), rms


def _cplx(z):
    z = complex(z)
    return [z.real, z.imag]


def _region_split_closed(alpha):
    with mp.workdps(30):
        a = mp.mpf(alpha)
        return [float((1 / (a + 1)) ** (1 / (2 * a))), float(((a + 1) * (2 * a + 1)) ** (-1 / (2 * a)))]


def _airy_origin():
    with mp.workdps(30):
        return [float(mp.mpf(3) ** (-mp.mpf(2) / 3) / mp.gamma(mp.mpf(2) / 3)),
                float(-mp.mpf(3) ** (-mp.mpf(1) / 3) / mp.gamma(mp.mpf(1) / 3))]


# Named oracle computations whose outputs are frozen into the test data.
# Each entry maps a name to (description, inputs, function of the inputs).
REGISTRY = {
    "region_split_xi": (
        "xi1, xi2 of the stationary region split from their closed formulas (mpmath)",
        {"alpha": 2.0}, lambda alpha: _region_split_closed(alpha)),
    "airy_origin": (
        "Ai(0), Ai'(0) from the Maclaurin closed forms (mpmath)",
        {}, lambda: _airy_origin()),
    "half_power_lam0": (
        "raw half_power full-line integral at lambda=0, alpha=2 (damped extrapolation)",
        {"lam": 0.0, "alpha": 2.0}, lambda lam, alpha: _cplx(damped_full_line("half_power", lam, alpha)[0])),
    "half_power_lam_m3": (
        "raw half_power full-line integral at lambda=-3, alpha=2 (damped extrapolation)",
        {"lam": -3.0, "alpha": 2.0}, lambda lam, alpha: _cplx(damped_full_line("half_power", lam, alpha)[0])),
    "inv_half_power_lam0": (
        "F(0) at alpha=2 (damped extrapolation)",
        {"lam": 0.0, "alpha": 2.0}, lambda lam, alpha: _cplx(damped_full_line("inv_half_power", lam, alpha)[0])),
    "signum_lam_m3": (
        "signum-kind full-line integral at lambda=-3, alpha=2 (damped extrapolation)",
        {"lam": -3.0, "alpha": 2.0}, lambda lam, alpha: _cplx(damped_full_line("signum", lam, alpha)[0])),
    "tail_p_half": (
        "oscillatory tail from cutoff 4 with amplitude xi^(1/2), lambda=0.5, alpha=2",
        {"p": 0.5, "lam": 0.5, "alpha": 2.0, "cutoff": 4.0},
        lambda p, lam, alpha, cutoff: _cplx(damped_tail(p, lam, alpha, cutoff)[0])),
    "g3_unit_point": (
        "3D fundamental solution at t=x=y=z=1, alpha=2 from the amplitude of G",
        {"t": 1.0, "x": 1.0, "y": 1.0, "z": 1.0, "alpha": 2.0},
        lambda t, x, y, z, alpha: [float(brute_G3(t, x, y, z, alpha)[0])]),
    "airy_fit": (
        "c1, overall scale and RMS of the Airy-square fit to damped values of A",
        {}, lambda: list(airy_fit())),
}


def derive(name):
    """Run one registered oracle; returns a list of floats."""
    _, inputs, fn = REGISTRY[name]
    return [float(v) for v in fn(**inputs)]
