"""Free propagation and nonlinear Duhamel solutions.

Conventions: ``u(x, y) = (2 pi)^-2 int e^{i(x xi + y eta)} u^(xi, eta)``.  The free
groups act as Fourier multipliers ``exp(i t P(xi) - i t Q(xi) eta^2)`` with

* KP:     ``P = epsilon xi |xi|^alpha``,       ``Q = 1 / xi``
* KP-BBM: ``P = -xi / (1 + |xi|^alpha)``,      ``Q = 1 / (xi (1 + |xi|^alpha))``

The KP solver targets ``u_t + u u_x - L u_x + d_x^{-1} u_yy = 0`` (the ``u_x``
term removed by a change of frame); the KP-BBM solver keeps its ``u_x`` term.

Whole-plane free evolution of data that are Gaussian in ``y`` is computed by
integrating the transverse variable in closed form (a complex Gaussian) and
the remaining ``xi`` integral by graded Gauss-Legendre quadrature, so nothing
is periodised: the x-line mass really leaves every bounded window.  Nonlinear
Duhamel terms have zero x-mean and are propagated spectrally on a zero-padded
grid with an exponential rule that integrates the linear phase exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy import signal, special

from . import _backend
from .errors import ConvergenceError, DomainError
from .kernels import DispersionSpec, Grid, sample_kernel
from .oscquad import QuadratureConfig

__all__ = [
    "InitialDatum",
    "LinearSolution",
    "SolutionTrajectory",
    "TorusGrid",
    "TorusState",
    "symbol",
    "linear_apply",
    "propagate_line",
    "mass_line",
    "duhamel_solve",
    "bbm_solve",
    "spectral_step",
    "spectral_run",
    "project_zero_modes",
    "singular_weight_rule",
    "duhamel_exponent",
    "phi_functions",
]


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialDatum:
    """Separable Gaussian-type datum.

    ``gaussian``: ``amplitude * g(x) * exp(-(y-y0)^2 / (2 wy^2))`` with
    ``g(x) = exp(-(x-x0)^2 / (2 wx^2)) / (sqrt(2 pi) wx)``, so the x-line mass
    through ``y = y0`` equals ``amplitude``.
    ``dipole``: the same with ``g`` replaced by ``g'`` (zero x-line mass).
    ``zero``: identically zero.
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    wx: float = 1.0
    wy: float = 1.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "dipole", "zero"):
            raise DomainError(f"unknown datum kind {self.kind!r}")
        if not (self.wx > 0 and self.wy > 0):
            raise DomainError("datum widths must be positive")

    def _gx(self, x):
        z = (np.asarray(x, dtype=float) - self.x0) / self.wx
        g = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.wx)
        return -z / self.wx * g if self.kind == "dipole" else g

    def _gy(self, y):
        z = (np.asarray(y, dtype=float) - self.y0) / self.wy
        return np.exp(-0.5 * z * z)

    def __call__(self, x, y):
        if self.kind == "zero":
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return self.amplitude * self._gx(x) * self._gy(y)

    def sample(self, grid: Grid) -> np.ndarray:
        return self(grid.x[None, :], grid.y[:, None]) * np.ones(grid.shape)

    def x_line_mass(self, y):
        """``int phi(x, y) dx``."""
        if self.kind != "gaussian":
            return np.zeros_like(np.asarray(y, dtype=float))
        return self.amplitude * self._gy(y)

    @property
    def total_mass(self) -> float:
        """``int int |phi|``."""
        line = math.sqrt(2.0 * math.pi) * self.wy
        if self.kind == "gaussian":
            return abs(self.amplitude) * line
        if self.kind == "dipole":
            return abs(self.amplitude) * 2.0 / (math.sqrt(2.0 * math.pi) * self.wx ** 2) * line * self.wx
        return 0.0

    def fourier_x(self, xi):
        """``int e^{-i x xi} g(x) dx`` times the amplitude."""
        xi = np.asarray(xi, dtype=float)
        base = self.amplitude * np.exp(-1j * self.x0 * xi - 0.5 * (self.wx * xi) ** 2)
        if self.kind == "dipole":
            return 1j * xi * base
        if self.kind == "zero":
            return 0.0 * base
        return base

    def support_radius(self, rel: float = 1e-13) -> tuple[float, float]:
        """Half-widths beyond which ``|phi| < rel * max|phi|``."""
        r = math.sqrt(-2.0 * math.log(rel))
        extra = 1.0 if self.kind == "dipole" else 0.0
        return (r + extra) * self.wx, r * self.wy


# ---------------------------------------------------------------------------
# symbols
# ---------------------------------------------------------------------------

def symbol(spec: DispersionSpec, xi):
    """``(P(xi), Q(xi))`` of the free group; ``Q`` is infinite at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore"):
        if spec.is_bbm:
            d = 1.0 + np.abs(xi) ** spec.alpha
            return -xi / d, 1.0 / (xi * d)
        return spec.epsilon * xi * np.abs(xi) ** spec.alpha, 1.0 / xi


def _sobolev_weight(spec, xi):
    return (1.0 + xi * xi) ** (spec.weight_order / 2.0)


def duhamel_exponent(spec: DispersionSpec) -> float:
    """Exponent of the ``(t - s)`` singularity bounding the Duhamel kernel."""
    if spec.is_bbm:
        return 0.5
    return (spec.alpha + 2.0) / (2.0 * (spec.alpha + 1.0))


def singular_weight_rule(t: float, gamma: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi nodes and weights for ``int_0^t (t-s)^{-gamma} f(s) ds``.

    Exact for polynomial ``f`` of degree ``2n - 1``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"singular weight exponent must lie in [0, 1), got {gamma}")
    if n < 1:
        raise DomainError("need at least one node")
    x, w = special.roots_jacobi(n, -gamma, 0.0)
    s = 0.5 * t * (1.0 + x)
    return s, w * (0.5 * t) ** (1.0 - gamma)


# ---------------------------------------------------------------------------
# whole-plane free evolution
# ---------------------------------------------------------------------------

@dataclass
class LinearSolution:
    t: float
    grid: Grid
    u: np.ndarray
    antiderivative: np.ndarray
    error_estimate: float
    boundary_ratio: float
    method: str


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _xi_nodes(panels, s_max):
    edges = np.linspace(0.0, s_max, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    s = (0.5 * (a + b) + 0.5 * (b - a) * _GL_X[None, :]).ravel()
    w = (0.5 * (b - a) * _GL_W[None, :]).ravel()
    return s, w


def _fresnel_factor(spec, datum, t, xi, ys):
    """Closed-form y-propagation of the Gaussian profile, shape (len(ys), len(xi))."""
    _, q = symbol(spec, xi)
    a = 0.5 * datum.wy ** 2 + 1j * t * q
    dy = (np.asarray(ys, dtype=float) - datum.y0)[:, None]
    return datum.wy / np.sqrt(2.0 * a)[None, :] * np.exp(-dy * dy / (4.0 * a[None, :]))


def _fresnel_eval(spec, datum, t, xs, ys, panels):
    """u and A*phi by the s = sqrt|xi| graded rule with ``panels`` panels per side."""
    s_max = math.sqrt(math.sqrt(80.0) / datum.wx)
    s, w = _xi_nodes(panels, s_max)
    xs = np.asarray(xs, dtype=float)
    u = np.zeros((len(ys), len(xs)))
    a = np.zeros_like(u)
    for sign in (1.0, -1.0):
        xi = sign * s * s
        p, _ = symbol(spec, xi)
        base = datum.fourier_x(xi) * np.exp(1j * t * p)
        if spec.is_bbm:
            # the BBM group acts on phi directly; no extra weight
            pass
        jac = 2.0 * s * w / (2.0 * math.pi)
        y_fac = _fresnel_factor(spec, datum, t, xi, ys)       # (ny, nq)
        coeff = y_fac * (base * jac)[None, :]                  # (ny, nq)
        coeff_a = coeff / (1j * xi)[None, :]
        _backend.fourier_sum(np.ascontiguousarray(coeff), np.ascontiguousarray(coeff_a),
                             np.ascontiguousarray(xi), xs, u, a)
    return u, a


def propagate_line(spec: DispersionSpec, datum: InitialDatum, t: float, xs, ys,
                   tol: float = 1e-10, max_panels: int = 1 << 15):
    """Whole-plane ``S(t) phi`` and ``A * phi`` at the points ``xs x ys``.

    Returns ``(u, A_conv, error_estimate)`` with arrays of shape
    ``(len(ys), len(xs))``.  Points are grouped into bands of ``|x - x0|``;
    in each band the panel count is doubled until two successive results
    agree to ``tol`` (absolute, max norm).
    """
    if not t > 0:
        raise DomainError("t must be positive")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    u = np.zeros((len(ys), len(xs)))
    a = np.zeros_like(u)
    if datum.kind == "zero":
        return u, a, 0.0
    dist = np.abs(xs - datum.x0)
    edges = [0.0, 32.0]
    while edges[-1] < dist.max():
        edges.append(edges[-1] * 4.0)
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (dist >= lo) & (dist <= hi) if lo == 0 else (dist > lo) & (dist <= hi)
        if not sel.any():
            continue
        ub, ab, eb = _converged_band(spec, datum, t, xs[sel], ys, tol, max_panels)
        u[:, sel] = ub
        a[:, sel] = ab
        err = max(err, eb)
    return u, a, err


def _converged_band(spec, datum, t, xs, ys, tol, max_panels):
    # initial resolution from the largest phase met on the rule
    xi_max = math.sqrt(80.0) / datum.wx
    p_max = float(np.abs(symbol(spec, np.array([xi_max]))[0][0]))
    ymax = float(np.max(np.abs(ys - datum.y0)))
    # the transverse factor contributes a phase of at most ymax^2 / (4 wy^2)
    phase = xi_max * float(np.max(np.abs(xs - datum.x0))) + t * p_max + ymax ** 2 / (4.0 * datum.wy ** 2)
    panels = max(16, int(2 ** math.ceil(math.log2(max(phase / 20.0, 1.0)))))
    prev = _fresnel_eval(spec, datum, t, xs, ys, panels)
    while True:
        panels *= 2
        if panels > max_panels:
            raise ConvergenceError(f"free evolution quadrature did not reach tol={tol}")
        cur = _fresnel_eval(spec, datum, t, xs, ys, panels)
        err = max(float(np.max(np.abs(cur[0] - prev[0]))), float(np.max(np.abs(cur[1] - prev[1]))))
        if err <= tol:
            return cur[0], cur[1], err
        prev = cur


def mass_line(x_max: float, tiers=((16.0, 0.005), (128.0, 0.01)),
              ratio: float = 0.002) -> np.ndarray:
    """Symmetric sampling line for partial-mass scans.

    ``tiers`` lists ``(edge, spacing)`` pairs of uniform spacing used out to
    each edge; beyond the last edge the nodes grow geometrically,
    ``x_{k+1} = x_k (1 + ratio)``, up to ``x_max``.
    """
    if not x_max > 0:
        raise DomainError("x_max must be positive")
    pos = [0.0]
    for edge, h in tiers:
        edge = min(edge, x_max)
        if edge <= pos[-1]:
            continue
        n = int(math.ceil((edge - pos[-1]) / h))
        pos.extend(np.linspace(pos[-1], edge, n + 1)[1:].tolist())
    last = pos[-1]
    if x_max > last:
        m = int(math.ceil(math.log(x_max / last) / math.log1p(ratio)))
        tail = last * (1.0 + ratio) ** np.arange(1, m + 1)
        tail = tail[tail < x_max]
        pos.extend(tail.tolist())
        pos.append(x_max)
    pos = np.array(pos)
    return np.concatenate([-pos[:0:-1], pos])


def _check_padding(datum, grid):
    rx, ry = datum.support_radius()
    hx = 0.25 * (grid.x_max - grid.x_min)
    hy = 0.25 * (grid.y_max - grid.y_min)
    cx = 0.5 * (grid.x_max + grid.x_min)
    cy = 0.5 * (grid.y_max + grid.y_min)
    if abs(datum.x0 - cx) + rx > hx or (grid.ny > 1 and abs(datum.y0 - cy) + ry > hy):
        raise DomainError(
            f"insufficient padding: datum support (+-{rx:.3g}, +-{ry:.3g}) must lie in the "
            f"central half of the window [{grid.x_min}, {grid.x_max}] x [{grid.y_min}, {grid.y_max}]")


def _boundary_ratio(a):
    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        return 0.0
    edge = max(float(np.max(np.abs(a[:, 0]))), float(np.max(np.abs(a[:, -1]))))
    return edge / peak


def linear_apply(spec: DispersionSpec, datum: InitialDatum, t: float, grid: Grid,
                 method: str = "fresnel", cfg: QuadratureConfig | None = None,
                 tol: float = 1e-10, workers: int = 1) -> LinearSolution:
    """Free evolution ``S(t) phi`` on ``grid`` with its antiderivative ``A * phi``.

    ``method="convolution"`` convolves the sampled datum with kernels sampled
    on the difference grid (the datum must sit in the central half of the
    window).  ``method="fresnel"`` integrates ``y`` in closed form and is exact
    on the whole plane.  For KP-BBM the convolution uses the Sobolev-weighted
    kernels against ``(I - d_x^2)^{beta/2} phi``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if spec.transverse_dim != 1:
        raise DomainError("linear_apply handles 2D equations")
    if method == "fresnel":
        u, a, err = propagate_line(spec, datum, t, grid.x, grid.y, tol)
        return LinearSolution(t, grid, u, a, err, _boundary_ratio(a), method)
    if method != "convolution":
        raise DomainError(f"unknown method {method!r}")
    _check_padding(datum, grid)
    phi = datum.sample(grid)
    if spec.is_bbm:
        phi = _apply_x_multiplier(phi, grid.dx, lambda xi: _sobolev_weight(spec, xi))
    diff = Grid(-(grid.x_max - grid.x_min), grid.x_max - grid.x_min, 2 * grid.nx - 1,
                -(grid.y_max - grid.y_min), grid.y_max - grid.y_min, max(2 * grid.ny - 1, 1))
    kg = sample_kernel(spec, t, diff, "G", cfg, workers=workers)
    ka = sample_kernel(spec, t, diff, "A", cfg, workers=workers)
    cell = grid.dx * grid.dy
    u = signal.fftconvolve(kg.values, phi, mode="valid") * cell
    a = signal.fftconvolve(ka.values, phi, mode="valid") * cell
    l1 = float(np.abs(phi).sum()) * cell
    err = max(kg.error_estimate, ka.error_estimate) * l1
    ratio = _boundary_ratio(a)
    return LinearSolution(t, grid, u, a, err, ratio, method)


def _apply_x_multiplier(field, dx, mult):
    n = field.shape[-1]
    m = 2 * n
    xi = 2.0 * math.pi * sfft.rfftfreq(m, dx)
    spec_ = sfft.rfft(field, n=m, axis=-1) * mult(xi)
    return sfft.irfft(spec_, n=m, axis=-1)[..., :n]


# ---------------------------------------------------------------------------
# exponential integrators
# ---------------------------------------------------------------------------

def phi_functions(z):
    """``phi1(z) = (e^z - 1)/z`` and ``phi2(z) = (e^z - 1 - z)/z^2``, stable near 0."""
    z = np.asarray(z, dtype=complex)
    p1 = np.empty_like(z)
    p2 = np.empty_like(z)
    small = np.abs(z) < 0.5
    zs = z[small]
    t1 = np.zeros_like(zs)
    t2 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for k in range(0, 22):
        t1 += term / math.factorial(k + 1)
        t2 += term / math.factorial(k + 2)
        term = term * zs
    p1[small] = t1
    p2[small] = t2
    zb = z[~small]
    e = np.exp(zb)
    p1[~small] = (e - 1.0) / zb
    p2[~small] = (e - 1.0 - zb) / (zb * zb)
    return p1, p2


class _PaddedSpectral:
    """rfft2 workspace on a grid zero-padded by a factor two in each direction."""

    def __init__(self, spec: DispersionSpec, grid: Grid, dealias: bool = True):
        self.spec = spec
        self.grid = grid
        self.shape = (2 * grid.ny, 2 * grid.nx)
        xi = 2.0 * math.pi * sfft.rfftfreq(self.shape[1], grid.dx)
        eta = 2.0 * math.pi * sfft.fftfreq(self.shape[0], grid.dy)
        self.xi, self.eta = np.meshgrid(xi, eta)
        self.omega = _omega(spec, self.xi, self.eta)
        self.mask = _dealias_mask(self.shape, dealias)

    def forward(self, f):
        return sfft.rfft2(f, s=self.shape)

    def inverse(self, fh):
        return sfft.irfft2(fh, s=self.shape)[: self.grid.ny, : self.grid.nx]

    def nonlinearity(self, u):
        """Transform of ``-d_x(u^2/2)`` (KP) or ``-(I+L)^{-1} d_x(u^2/2)`` (KP-BBM)."""
        nh = -0.5j * self.xi * self.forward(u * u) * self.mask
        if self.spec.is_bbm:
            nh = nh / (1.0 + np.abs(self.xi) ** self.spec.alpha)
        return nh


def _omega(spec, xi, eta):
    p, q = symbol(spec, xi)
    with np.errstate(invalid="ignore"):
        om = p - q * eta * eta
    om[xi == 0] = 0.0
    return om


def _dealias_mask(shape, on):
    if not on:
        return np.ones((shape[0], shape[1] // 2 + 1))
    ky = np.abs(sfft.fftfreq(shape[0]) * shape[0])
    kx = np.arange(shape[1] // 2 + 1)
    return ((ky[:, None] < shape[0] / 3.0) & (kx[None, :] < shape[1] / 3.0)).astype(float)


# ---------------------------------------------------------------------------
# Duhamel / Picard
# ---------------------------------------------------------------------------

@dataclass
class SolutionTrajectory:
    times: np.ndarray
    fields: list
    method: str
    grid: Optional[Grid] = None
    picard_residuals: list = field(default_factory=list)
    linear_fields: list = field(default_factory=list)
    linear_antiderivatives: list = field(default_factory=list)
    duhamel_antiderivatives: list = field(default_factory=list)
    spec: Optional[DispersionSpec] = None
    datum: Optional[InitialDatum] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.fields):
            raise DomainError("times and fields must have equal length")
        if len(self.times) and self.times[0] != 0.0:
            raise DomainError("trajectories start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("times must increase")

    def antiderivative(self, j: int) -> np.ndarray:
        """x-antiderivative of ``fields[j]`` that vanishes as ``x -> +-inf``."""
        if not self.linear_antiderivatives:
            raise DomainError("trajectory has no antiderivative companion")
        a = self.linear_antiderivatives[j]
        if self.duhamel_antiderivatives:
            a = a + self.duhamel_antiderivatives[j]
        return a


def _duhamel_sweep(work: _PaddedSpectral, times, nonlin_hat):
    """Duhamel integrals for a piecewise-linear-in-time nonlinearity.

    ``V_{j+1} = e^{i w h} V_j + h [(phi1 - phi2) N_j + phi2 N_{j+1}]``.
    """
    out = [np.zeros_like(nonlin_hat[0])]
    v = out[0]
    for j in range(len(times) - 1):
        h = times[j + 1] - times[j]
        z = 1j * work.omega * h
        p1, p2 = phi_functions(z)
        v = np.exp(z) * v + h * ((p1 - p2) * nonlin_hat[j] + p2 * nonlin_hat[j + 1])
        out.append(v)
    return out


def _picard(spec, datum, grid, T, n_times, tol, max_iter, method, linear_method, cfg):
    if not T > 0:
        raise DomainError("T must be positive")
    if n_times < 1:
        raise DomainError("n_times must be at least 1")
    if not tol > 0:
        raise DomainError("tol must be positive")
    times = np.linspace(0.0, T, n_times + 1)
    phi = datum.sample(grid)
    lin = [phi]
    lin_a = [_initial_antiderivative(datum, grid)]
    for t in times[1:]:
        sol = linear_apply(spec, datum, float(t), grid, linear_method, cfg)
        lin.append(sol.u)
        lin_a.append(sol.antiderivative)
    work = _PaddedSpectral(spec, grid)
    u = [f.copy() for f in lin]
    history = [[] for _ in times]
    duh_hat = None
    for it in range(max_iter):
        nh = [work.nonlinearity(f) for f in u]
        duh_hat = _duhamel_sweep(work, times, nh)
        new = [lin[j] + work.inverse(duh_hat[j]) for j in range(len(times))]
        res = [float(np.max(np.abs(new[j] - u[j]))) for j in range(len(times))]
        for j, r in enumerate(res):
            hist = history[j]
            if hist and hist[-1] > tol and r >= hist[-1]:
                raise ConvergenceError(
                    f"Picard iteration does not contract at t={times[j]:.4g}: residuals {hist + [r]}")
            hist.append(r)
        u = new
        if max(res) <= tol:
            break
    else:
        raise ConvergenceError(
            f"Picard iteration reached max_iter={max_iter} with residual {max(res):.3e} > tol={tol}")
    duh_a = []
    for vh in duh_hat:
        with np.errstate(divide="ignore", invalid="ignore"):
            ah = np.where(work.xi == 0, 0.0, vh / (1j * work.xi))
        duh_a.append(work.inverse(ah))
    return SolutionTrajectory(times, u, method, grid, history, lin, lin_a, duh_a, spec, datum)


def _initial_antiderivative(datum, grid):
    """``int_{-inf}^x phi``; at t = 0 no antiderivative vanishes at both ends unless the line mass is zero."""
    from scipy.special import erf
    if datum.kind == "zero":
        return np.zeros(grid.shape)
    gy = datum._gy(grid.y)[:, None]
    if datum.kind == "gaussian":
        z = (grid.x[None, :] - datum.x0) / (math.sqrt(2.0) * datum.wx)
        gx = 0.5 * (1.0 + erf(z))
    else:
        z = (grid.x[None, :] - datum.x0) / datum.wx
        gx = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * datum.wx)
    return datum.amplitude * gx * gy


def duhamel_solve(spec: DispersionSpec, datum: InitialDatum, T: float, n_times: int,
                  tol: float, grid: Grid, max_iter: int = 12, linear_method: str = "fresnel",
                  cfg: QuadratureConfig | None = None) -> SolutionTrajectory:
    """Picard iteration on ``u(t) = S(t) phi - int_0^t S(t-s) (u u_x)(s) ds``.

    The first iterate is the free evolution.  The s-integral uses the
    piecewise-linear interpolant of the nonlinearity in time with the linear
    phase integrated exactly (second order in ``T / n_times``).
    """
    if spec.is_bbm:
        raise DomainError("use bbm_solve for KP-BBM equations")
    return _picard(spec, datum, grid, T, n_times, tol, max_iter, "duhamel_picard",
                   linear_method, cfg)


def bbm_solve(spec: DispersionSpec, datum: InitialDatum, T: float, n_times: int,
              tol: float, grid: Grid, k: float | None = None, max_iter: int = 12,
              linear_method: str = "fresnel",
              cfg: QuadratureConfig | None = None) -> SolutionTrajectory:
    """KP-BBM analogue of :func:`duhamel_solve`.

    ``k`` is the Sobolev order of the smoothing weight ``(I - d_x^2)^k``; it
    must exceed ``(alpha + 3) / 4``.
    """
    if not spec.is_bbm:
        raise DomainError("bbm_solve needs a KP-BBM DispersionSpec")
    if k is not None:
        limit = (spec.alpha + 3.0) / 4.0
        if not k > limit:
            raise DomainError(f"KP-BBM needs k > (alpha+3)/4 = {limit} (got k={k})")
    return _picard(spec, datum, grid, T, n_times, tol, max_iter, "duhamel_picard",
                   linear_method, cfg)


# ---------------------------------------------------------------------------
# periodic stepping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusGrid:
    lx: float
    ly: float
    nx: int
    ny: int

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 4 or n & (n - 1):
                raise DomainError("torus grid sizes must be powers of two >= 4")
        if not (self.lx > 0 and self.ly > 0):
            raise DomainError("torus lengths must be positive")

    @property
    def x(self):
        return -0.5 * self.lx + self.lx * np.arange(self.nx) / self.nx

    @property
    def y(self):
        return -0.5 * self.ly + self.ly * np.arange(self.ny) / self.ny

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    def wavenumbers(self):
        xi = 2.0 * math.pi * sfft.rfftfreq(self.nx, self.dx)
        eta = 2.0 * math.pi * sfft.fftfreq(self.ny, self.dy)
        return np.meshgrid(xi, eta)


@dataclass(frozen=True)
class TorusState:
    grid: TorusGrid
    u: np.ndarray
    t: float = 0.0


def project_zero_modes(u: np.ndarray) -> np.ndarray:
    """Remove the x-mean of every y line (the ``xi = 0`` Fourier plane)."""
    return u - u.mean(axis=-1, keepdims=True)


def _zero_plane_fraction(uh):
    total = float(np.sum(np.abs(uh) ** 2))
    if total == 0.0:
        return 0.0
    return float(np.sum(np.abs(uh[:, 0]) ** 2)) / total


def spectral_step(spec: DispersionSpec, state: TorusState, dt: float,
                  nonlinear: bool = True) -> TorusState:
    """One ETD-RK2 step on the torus with the ``xi = 0`` modes held at zero."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    g = state.grid
    uh = sfft.rfft2(state.u)
    frac = _zero_plane_fraction(uh)
    if frac > 1e-12:
        raise DomainError(
            f"the xi = 0 plane carries {frac:.3e} of the energy; the torus method only "
            "represents fields with zero x-mean (use project_zero_modes)")
    uh[:, 0] = 0.0
    xi, eta = g.wavenumbers()
    om = _omega(spec, xi, eta)
    z = 1j * om * dt
    e = np.exp(z)
    if not nonlinear:
        vh = e * uh
    else:
        mask = _dealias_mask((g.ny, g.nx), True)

        def nl(fh):
            f = sfft.irfft2(fh, s=(g.ny, g.nx))
            out = -0.5j * xi * sfft.rfft2(f * f) * mask
            if spec.is_bbm:
                out = out / (1.0 + np.abs(xi) ** spec.alpha)
            return out

        p1, p2 = phi_functions(z)
        n0 = nl(uh)
        ah = e * uh + dt * p1 * n0
        vh = ah + dt * p2 * (nl(ah) - n0)
    vh[:, 0] = 0.0
    return TorusState(g, sfft.irfft2(vh, s=(g.ny, g.nx)), state.t + dt)


def spectral_run(spec: DispersionSpec, state: TorusState, dt: float, steps: int,
                 nonlinear: bool = True, record_every: int = 1) -> SolutionTrajectory:
    """Repeated :func:`spectral_step`; records every ``record_every`` steps."""
    times = [0.0]
    fields = [state.u]
    t0 = state.t
    for n in range(1, steps + 1):
        state = spectral_step(spec, state, dt, nonlinear)
        if n % record_every == 0:
            times.append(state.t - t0)
            fields.append(state.u)
    return SolutionTrajectory(np.array(times), fields, "spectral_torus", None, spec=spec)
