"""Fundamental solutions ``G`` and their x-antiderivatives ``A``.

2D KP type (``(u_t - L u_x)_x + u_yy = 0`` with symbol ``epsilon |xi|^alpha``)::

    G(t, x, y) = t^{-(1/2 + 3/(2(alpha+1)))} H(lambda)
    A(t, x, y) = t^{-(alpha+2)/(2(alpha+1))} * (-i c) F(lambda)
    lambda     = x t^{-1/(alpha+1)} + y^2 t^{-(alpha+2)/(alpha+1)} / 4

with ``c = (2 pi)^-2 sqrt(pi)`` from the transverse Fresnel integral.  KP-BBM
kernels are the Sobolev-weighted ``G~`` and ``A~`` and depend on ``t``
through the amplitude as well, so they do not collapse to one profile.

The 3D antiderivative uses two Fresnel factors; its amplitude reduces to the
constant ``-1`` and its time exponent to ``(alpha+2)/(alpha+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import DomainError
from .oscquad import (FRESNEL_2D, Estimate, QuadratureConfig, WeightedAmplitude,
                      clenshaw_curtis, eval_F, eval_H, eval_weighted,
                      stationary_points)
from .special import airy

__all__ = [
    "DispersionSpec",
    "Grid",
    "KernelField",
    "ClosedFormKP2",
    "ProfileTable",
    "lambda_coord",
    "g_exponent",
    "a_exponent",
    "eval_G",
    "eval_A",
    "eval_A3",
    "eval_G3",
    "calibrate_c1",
    "kp2_closed_G",
    "kp2_closed_A",
    "local_period",
    "build_profile_table",
    "sample_kernel",
]

KP = "KP"
KP_BBM = "KP-BBM"


@dataclass(frozen=True)
class DispersionSpec:
    alpha: float = 2.0
    epsilon: int = 1
    family: str = KP
    transverse_dim: int = 1
    weight_order: float = 0.0

    def __post_init__(self):
        if self.family not in (KP, KP_BBM):
            raise DomainError(f"family must be {KP!r} or {KP_BBM!r}, got {self.family!r}")
        if self.epsilon not in (1, -1):
            raise DomainError("epsilon must be +1 or -1")
        if self.transverse_dim not in (1, 2):
            raise DomainError("transverse_dim must be 1 (2D) or 2 (3D)")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.family == KP:
            if self.transverse_dim == 1 and not self.alpha > 0.5:
                raise DomainError(
                    f"2D KP kernels need alpha > 1/2 (got alpha={self.alpha})")
            if self.transverse_dim == 2 and not self.alpha > 1:
                raise DomainError(
                    f"3D KP kernels need alpha > 1; alpha = 1 is excluded (got alpha={self.alpha})")
        else:
            if self.transverse_dim != 1:
                raise DomainError("KP-BBM kernels are implemented in 2D only")
            if self.epsilon != 1:
                raise DomainError("KP-BBM kernels use epsilon = +1")
            limit = (self.alpha + 3.0) / 2.0
            if not self.weight_order > limit:
                raise DomainError(
                    f"KP-BBM needs beta > (alpha+3)/2 = {limit} (got beta={self.weight_order})")

    @property
    def is_bbm(self) -> bool:
        return self.family == KP_BBM


@dataclass(frozen=True)
class Grid:
    """Rectangular node-centred lattice; the last axis is x."""

    x_min: float
    x_max: float
    nx: int
    y_min: float
    y_max: float
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 1:
            raise DomainError("grid needs nx >= 2 and ny >= 1")
        if not self.x_max > self.x_min or (self.ny > 1 and not self.y_max > self.y_min):
            raise DomainError("grid bounds must be increasing")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1) if self.ny > 1 else 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)

    def is_y_symmetric(self) -> bool:
        return math.isclose(self.y_min, -self.y_max, abs_tol=1e-14)


@dataclass
class KernelField:
    t: float
    grid: Grid
    values: np.ndarray
    which: str
    error_estimate: float
    spec: Optional[DispersionSpec] = None

    def __post_init__(self):
        if self.which not in ("G", "A"):
            raise DomainError("which must be 'G' or 'A'")
        if self.values.shape != self.grid.shape:
            raise DomainError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("kernel field contains non-finite values")


@dataclass(frozen=True)
class ClosedFormKP2:
    c1: float
    overall_scale: float
    rms_residual: float = 0.0

    @property
    def c2(self) -> float:
        return self.c1 / 4.0

    def zeta(self, t, x, y):
        return self.c1 * x / t ** (1.0 / 3.0) + self.c2 * y * y / t ** (4.0 / 3.0)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------

def _check_t(t):
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")


def lambda_coord(t, x, y, alpha):
    """Self-similar coordinate of the 2D KP kernels."""
    _check_t(t)
    return x * t ** (-1.0 / (alpha + 1.0)) + y * y * t ** (-(alpha + 2.0) / (alpha + 1.0)) / 4.0


def g_exponent(alpha: float) -> float:
    """Power of ``1/t`` in front of ``H``."""
    return 0.5 + 3.0 / (2.0 * (alpha + 1.0))


def a_exponent(alpha: float) -> float:
    """Power of ``1/t`` in front of ``F``."""
    return (alpha + 2.0) / (2.0 * (alpha + 1.0))


def _bbm_coords(t, x, y):
    sigma = y * y / (4.0 * t)
    return x + sigma, sigma


def _bbm_amp(spec, t, kind):
    return WeightedAmplitude(kind, spec.alpha, spec.weight_order, t, "beta")


def eval_G(spec: DispersionSpec, t: float, x: float, y: float,
           cfg: QuadratureConfig | None = None) -> Estimate:
    """Fundamental solution (Sobolev-weighted for KP-BBM) at one point."""
    _check_t(t)
    cfg = cfg or QuadratureConfig()
    if spec.transverse_dim != 1:
        raise DomainError("use eval_G3 for the 3D kernel")
    if spec.is_bbm:
        lam, sigma = _bbm_coords(t, x, y)
        est = eval_weighted(_bbm_amp(spec, t, "bbm_a"), lam, sigma, cfg)
        pref = FRESNEL_2D / math.sqrt(t)
        return _real(pref, est)
    lam = lambda_coord(t, x, y, spec.alpha)
    h = eval_H(lam, spec.alpha, cfg, spec.epsilon)
    pref = t ** (-g_exponent(spec.alpha))
    return Estimate(pref * h.value, pref * h.error)


def eval_A(spec: DispersionSpec, t: float, x: float, y: float,
           cfg: QuadratureConfig | None = None) -> Estimate:
    """x-antiderivative kernel at one point (``dA/dx = G``)."""
    _check_t(t)
    cfg = cfg or QuadratureConfig()
    if spec.transverse_dim != 1:
        raise DomainError("use eval_A3 for the 3D kernel")
    if spec.is_bbm:
        lam, sigma = _bbm_coords(t, x, y)
        est = eval_weighted(_bbm_amp(spec, t, "bbm_a_tilde"), lam, sigma, cfg)
        pref = FRESNEL_2D / math.sqrt(t)
        return _real(-1j * pref, est)
    lam = lambda_coord(t, x, y, spec.alpha)
    f = eval_F(lam, spec.alpha, cfg, spec.epsilon)
    pref = FRESNEL_2D * t ** (-a_exponent(spec.alpha))
    return Estimate((-1j * f.value).real * pref, pref * f.error)


def local_period(spec: DispersionSpec, t: float, x: float, y: float = 0.0) -> float:
    """Oscillation length of the kernels in ``x`` near ``(t, x, y)``, capped at one.

    KP kernels oscillate like ``exp(i x xi_s t^(-1/(alpha+1)))`` where ``xi_s`` is
    the stationary point in the self-similar variable; KP-BBM kernels have no
    growing frequency and get the cap.
    """
    _check_t(t)
    if spec.is_bbm:
        return 1.0
    lam = lambda_coord(t, x, y, spec.alpha)
    pts = stationary_points(lam, spec.alpha, spec.epsilon)
    if not pts:
        return 1.0
    return min(1.0, 2.0 * math.pi * t ** (1.0 / (spec.alpha + 1.0)) / pts[-1])


def _real(pref, est: Estimate) -> Estimate:
    z = pref * est.value
    residue = abs(z.imag)
    err = abs(pref) * est.error
    if residue > 10 * err + 1e-15:
        raise DomainError(f"kernel value has imaginary residue {residue:.3e} > error {err:.3e}")
    return Estimate(z.real, err)


def lambda3_coord(t, x, y, z, alpha):
    _check_t(t)
    return x * t ** (-1.0 / (alpha + 1.0)) + (y * y + z * z) * t ** (-(alpha + 2.0) / (alpha + 1.0)) / 4.0


def a3_exponent(alpha: float) -> float:
    """Power of ``1/t`` in front of the 3D antiderivative profile."""
    return (alpha + 2.0) / (alpha + 1.0)


def eval_A3(t: float, x: float, y: float, z: float, alpha: float,
            cfg: QuadratureConfig | None = None, epsilon: int = 1) -> Estimate:
    """3D x-antiderivative kernel.

    Two transverse Fresnel integrals turn the amplitude ``1/(i xi)`` into
    ``(pi/t) * (-i sgn xi) |xi| / (i xi) = -(pi/t)``, hence
    ``A3 = -(2 pi)^-3 pi t^{-(alpha+2)/(alpha+1)} int e^{i lam xi + i eps xi|xi|^alpha} d xi``.
    """
    _check_t(t)
    if not alpha > 1:
        raise DomainError(f"3D kernels need alpha > 1; alpha = 1 is excluded (got {alpha})")
    cfg = cfg or QuadratureConfig()
    lam = lambda3_coord(t, x, y, z, alpha)
    est = eval_weighted(WeightedAmplitude("unit", alpha), lam, 1.0, cfg, epsilon)
    pref = -(2 * math.pi) ** -3 * math.pi * t ** (-a3_exponent(alpha))
    return _real(pref, est)


def eval_G3(t: float, x: float, y: float, z: float, alpha: float,
            cfg: QuadratureConfig | None = None) -> Estimate:
    """3D fundamental solution via the amplitude ``(pi/t)(-i sgn xi)|xi|`` (epsilon = +1)."""
    from .oscquad import one_sided
    _check_t(t)
    if not alpha > 1:
        raise DomainError(f"3D kernels need alpha > 1 (got {alpha})")
    cfg = cfg or QuadratureConfig()
    lam = lambda3_coord(t, x, y, z, alpha)
    half = one_sided(1.0, lam, 1.0, alpha, cfg)
    w = -1j * half.value
    val = (w + np.conj(w)).real
    pref = (2 * math.pi) ** -3 * math.pi * t ** (-a3_exponent(alpha) - 1.0 / (alpha + 1.0))
    return Estimate(pref * val, pref * 2 * half.error)


# ---------------------------------------------------------------------------
# KP-II closed form
# ---------------------------------------------------------------------------

def kp2_closed_G(t, x, y, cal: ClosedFormKP2):
    _check_t(t)
    ai, aip = airy(cal.zeta(t, x, y))
    return -cal.overall_scale / (3.0 * t) * ai * aip


def kp2_closed_A(t, x, y, cal: ClosedFormKP2):
    _check_t(t)
    ai, _ = airy(cal.zeta(t, x, y))
    return -cal.overall_scale / (6.0 * cal.c1 * t ** (2.0 / 3.0)) * ai * ai


def calibrate_c1(cfg: QuadratureConfig | None = None, n: int = 200,
                 lam_range=(-8.0, 4.0)) -> ClosedFormKP2:
    """Fit ``c1`` and the overall constant of the Airy form of A at alpha = 2.

    The overall constant enters linearly and is eliminated by least squares for
    each trial ``c1``; ``c1`` itself is found by bounded scalar minimisation.
    """
    cfg = cfg or QuadratureConfig()
    spec = DispersionSpec(2.0, 1)
    xs = np.linspace(lam_range[0], lam_range[1], n)
    data = np.array([eval_A(spec, 1.0, x, 0.0, cfg).value for x in xs])

    def solve(c1):
        basis = -airy(c1 * xs)[0] ** 2 / (6.0 * c1)
        scale = float(basis @ data / (basis @ basis))
        resid = data - scale * basis
        return scale, float(np.sqrt(np.mean(resid ** 2)))

    res = optimize.minimize_scalar(lambda c: solve(c)[1], bounds=(0.2, 1.0), method="bounded",
                                   options={"xatol": 1e-14})
    scale0, _ = solve(float(res.x))
    fit = optimize.least_squares(
        lambda q: data + q[1] * airy(q[0] * xs)[0] ** 2 / (6.0 * q[0]),
        x0=[float(res.x), scale0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    c1 = float(fit.x[0])
    scale, rms = solve(c1)
    if rms > 1e-8:
        raise DomainError(f"Airy calibration residual {rms:.3e} exceeds 1e-8")
    return ClosedFormKP2(c1, scale, rms)


# ---------------------------------------------------------------------------
# tabulated profiles and grid sampling
# ---------------------------------------------------------------------------

_TAB_N = 32
_TAB_X, _ = clenshaw_curtis(_TAB_N)
_TAB_X = _TAB_X[::-1].copy()  # increasing


def _bary_weights(n):
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


_TAB_W = _bary_weights(_TAB_N)
_TAB_W_COARSE = _bary_weights(_TAB_N // 2)


@dataclass(frozen=True)
class ProfileTable:
    """Piecewise Chebyshev interpolant of ``H`` or ``-i c F`` on a lambda range.

    Immutable; pass it explicitly to :func:`sample_kernel` to avoid repeated
    quadrature.  ``error`` bounds the interpolation error (difference between
    the 33- and 17-node interpolants, maximised at panel quarter points) plus
    the largest quadrature error estimate.
    """

    which: str
    alpha: float
    epsilon: int
    edges: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    error: float = 0.0

    @property
    def lam_min(self) -> float:
        return float(self.edges[0])

    @property
    def lam_max(self) -> float:
        return float(self.edges[-1])

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        if lam.size and (lam.min() < self.lam_min - 1e-12 or lam.max() > self.lam_max + 1e-12):
            raise DomainError(
                f"lambda range [{lam.min():.4g}, {lam.max():.4g}] outside table "
                f"[{self.lam_min:.4g}, {self.lam_max:.4g}]")
        flat = lam.ravel()
        idx = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[idx]
        b = self.edges[idx + 1]
        u = (2.0 * flat - a - b) / (b - a)
        return _bary_eval(u, self.values[idx], _TAB_X, _TAB_W).reshape(lam.shape)


def _bary_eval(u, vals, nodes, weights):
    diff = u[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    c = weights[None, :] / diff
    out = (c * vals).sum(axis=1) / c.sum(axis=1)
    hit = exact.any(axis=1)
    if np.any(hit):
        out[hit] = vals[hit][exact[hit]]
    return out


def _panel_width(lam, alpha):
    freq = (max(-lam, 0.0) / (alpha + 1.0)) ** (1.0 / alpha)
    return min(1.0, 8.0 / max(freq, 1e-12))


def build_profile_table(which: str, alpha: float, epsilon: int, lam_min: float, lam_max: float,
                        cfg: QuadratureConfig | None = None, workers: int = 1) -> ProfileTable:
    """Tabulate the scaled 2D KP profile of ``G`` (``which='G'``) or ``A``.

    Values are exactly the ``t = 1`` kernels: ``G(1, lam, 0)`` or ``A(1, lam, 0)``.
    """
    cfg = cfg or QuadratureConfig()
    spec = DispersionSpec(alpha, epsilon)
    if which not in ("G", "A"):
        raise DomainError("which must be 'G' or 'A'")
    edges = [float(lam_min)]
    while edges[-1] < lam_max:
        # width set by the local oscillation frequency (mirrored for epsilon = -1)
        edges.append(edges[-1] + _panel_width(epsilon * (edges[-1] if epsilon > 0
                                                         else edges[-1] + 1.0), alpha))
    edges[-1] = float(lam_max) if len(edges) > 2 else max(edges[-1], lam_max)
    edges = np.array(edges)
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * _TAB_X[None, :]
    fn = eval_G if which == "G" else eval_A
    flat = nodes.ravel()

    def one(lam):
        return fn(spec, 1.0, float(lam), 0.0, cfg)

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            ests = list(ex.map(_table_point, [(which, alpha, epsilon, float(l), cfg) for l in flat],
                               chunksize=64))
    else:
        ests = [one(l) for l in flat]
    vals = np.array([e.value for e in ests]).reshape(nodes.shape)
    qerr = max(e.error for e in ests)
    # interpolation error estimate from the nested coarse interpolant
    probe = np.array([-0.75, -0.25, 0.25, 0.75])
    fine = np.stack([_bary_eval(np.full(len(vals), u), vals, _TAB_X, _TAB_W) for u in probe])
    coarse = np.stack([_bary_eval(np.full(len(vals), u), vals[:, ::2], _TAB_X[::2], _TAB_W_COARSE)
                       for u in probe])
    ierr = float(np.max(np.abs(fine - coarse))) if len(vals) else 0.0
    return ProfileTable(which, alpha, epsilon, edges, vals, qerr + ierr)


def _table_point(args):
    which, alpha, epsilon, lam, cfg = args
    fn = eval_G if which == "G" else eval_A
    return fn(DispersionSpec(alpha, epsilon), 1.0, lam, 0.0, cfg)


def table_range(grid: Grid, t: float, alpha: float, pad: float = 1.0) -> tuple[float, float]:
    """Lambda range met when sampling a kernel on ``grid`` at time ``t``."""
    ys = np.abs(np.array([grid.y_min, grid.y_max]))
    ymax = ys.max()
    ymin = 0.0 if grid.y_min <= 0 <= grid.y_max else ys.min()
    lo = lambda_coord(t, grid.x_min, ymin, alpha)
    hi = lambda_coord(t, grid.x_max, ymax, alpha)
    return lo - pad, hi + pad


def sample_kernel(spec: DispersionSpec, t: float, grid: Grid, which: str = "G",
                  cfg: QuadratureConfig | None = None, table: ProfileTable | None = None,
                  workers: int = 1) -> KernelField:
    """Sample ``G`` or ``A`` on ``grid`` at time ``t``.

    For the 2D KP family a :class:`ProfileTable` (built on demand when not
    supplied) is evaluated at ``lambda(x, y)`` and rescaled.  KP-BBM kernels
    are evaluated point by point; rows with equal ``|y|`` are computed once.
    """
    _check_t(t)
    cfg = cfg or QuadratureConfig()
    if which not in ("G", "A"):
        raise DomainError("which must be 'G' or 'A'")
    X, Y = grid.mesh()
    if spec.transverse_dim != 1:
        raise DomainError("grid sampling is implemented for 2D kernels")
    if not spec.is_bbm:
        if table is None:
            lo, hi = table_range(grid, t, spec.alpha)
            table = build_profile_table(which, spec.alpha, spec.epsilon, lo, hi, cfg, workers)
        if table.which != which or table.alpha != spec.alpha or table.epsilon != spec.epsilon:
            raise DomainError("profile table does not match the requested kernel")
        lam = lambda_coord(t, X, Y, spec.alpha)
        expo = g_exponent(spec.alpha) if which == "G" else a_exponent(spec.alpha)
        vals = t ** (-expo) * table(lam)
        return KernelField(t, grid, vals, which, t ** (-expo) * table.error, spec)
    return _sample_bbm(spec, t, grid, which, cfg, workers)


def _bbm_row(args):
    spec, t, xs, y, which, cfg = args
    fn = eval_G if which == "G" else eval_A
    out = np.empty(len(xs))
    err = 0.0
    for i, x in enumerate(xs):
        try:
            e = fn(spec, t, float(x), float(y), cfg)
        except Exception as exc:  # attach coordinates
            raise type(exc)(f"{exc} at (t={t}, x={x}, y={y})") from exc
        out[i] = e.value
        err = max(err, e.error)
    return out, err


def _sample_bbm(spec, t, grid, which, cfg, workers):
    ys = grid.y
    keys = np.round(np.abs(ys), 12)
    uniq = sorted(set(keys.tolist()))
    jobs = [(spec, t, grid.x, y, which, cfg) for y in uniq]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_bbm_row, jobs))
    else:
        rows = [_bbm_row(j) for j in jobs]
    lookup = dict(zip(uniq, rows))
    vals = np.stack([lookup[k][0] for k in keys.tolist()])
    err = max(r[1] for r in rows)
    return KernelField(t, grid, vals, which, err, spec)
