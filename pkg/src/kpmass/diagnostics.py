"""Partial masses, Hamiltonians, decay envelopes and PDE residuals."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import DomainError
from .kernels import DispersionSpec, Grid
from .evolve import LinearSolution, SolutionTrajectory, TorusGrid, _omega

__all__ = [
    "MassReport",
    "EnvelopeFit",
    "partial_mass",
    "antiderivative_difference",
    "mass_report",
    "mass_identity_gap",
    "first_crossing",
    "DecayScan",
    "decay_scan",
    "hamiltonian_kp",
    "hamiltonian_bbm",
    "decay_envelope",
    "envelope_points",
    "residual",
]


# ---------------------------------------------------------------------------
# partial masses
# ---------------------------------------------------------------------------

def _line(values, xs, y=None, ys=None):
    values = np.asarray(values, dtype=float)
    xs = np.asarray(xs, dtype=float)
    if values.ndim == 1:
        return values
    if ys is None or y is None:
        raise DomainError("a 2D field needs its y coordinates and a y line")
    ys = np.asarray(ys, dtype=float)
    hits = np.nonzero(np.isclose(ys, y, rtol=0.0, atol=1e-12 * max(1.0, abs(y))))[0]
    if hits.size == 0:
        raise DomainError(f"y={y} is not a grid line")
    return values[hits[0]]


def _interp_at(xs, f, x):
    return float(np.interp(x, xs, f))


def partial_mass(values, xs, X: float, y: float | None = None, ys=None) -> float:
    """Trapezoidal ``int_{-X}^{X} u(x, y) dx`` on the sampled line.

    ``values`` is a line (1D) or a field ``(len(ys), len(xs))``; ``xs`` may be
    non-uniform.  When ``+-X`` fall between nodes the end pieces use the
    linearly interpolated value, which keeps the rule trapezoidal.
    """
    line = _line(values, xs, y, ys)
    xs = np.asarray(xs, dtype=float)
    if not X > 0:
        raise DomainError("X must be positive")
    if X > min(-xs[0], xs[-1]) * (1.0 + 1e-12):
        raise DomainError(f"X={X} lies outside the window [{xs[0]}, {xs[-1]}]")
    inside = np.abs(xs) <= X * (1.0 + 1e-12)
    xi = xs[inside]
    fi = line[inside]
    pts = [xi]
    vals = [fi]
    if xi[0] > -X * (1.0 + 1e-12):
        pts.insert(0, np.array([-X]))
        vals.insert(0, np.array([_interp_at(xs, line, -X)]))
    if xi[-1] < X * (1.0 - 1e-12):
        pts.append(np.array([X]))
        vals.append(np.array([_interp_at(xs, line, X)]))
    x = np.concatenate(pts)
    f = np.concatenate(vals)
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(x)))


def antiderivative_difference(a_values, xs, X: float, y=None, ys=None) -> float:
    """``A(X) - A(-X)`` from a sampled antiderivative line."""
    line = _line(a_values, xs, y, ys)
    return _interp_at(xs, line, X) - _interp_at(xs, line, -X)


@dataclass
class MassReport:
    t: float
    y_slices: list
    X_values: np.ndarray
    partial_mass: np.ndarray
    identity_gap: Optional[np.ndarray] = None
    error_budget: float = 0.0

    def flagged(self) -> np.ndarray:
        """Entries whose gap exceeds ten times the propagated error budget."""
        if self.identity_gap is None:
            return np.zeros_like(self.partial_mass, dtype=bool)
        return self.identity_gap > 10.0 * self.error_budget

    def max_gap(self) -> float:
        return float(np.max(self.identity_gap)) if self.identity_gap is not None else float("nan")

    def rows(self):
        for i, y in enumerate(self.y_slices):
            for j, X in enumerate(self.X_values):
                gap = "" if self.identity_gap is None else repr(float(self.identity_gap[i, j]))
                yield [repr(float(self.t)), repr(float(y)), repr(float(X)),
                       repr(float(self.partial_mass[i, j])), gap]

    def to_csv(self, path, header_line: str = "") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_line:
                fh.write(header_line.rstrip("\n") + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "X", "P", "gap"])
            for row in self.rows():
                w.writerow(row)


def mass_report(t: float, xs, ys, u, a=None, X_values: Sequence[float] = (),
                y_slices: Sequence[float] | None = None, error_budget: float = 0.0) -> MassReport:
    """Partial masses (and identity gaps when ``a`` is given) on an X ladder."""
    xs = np.asarray(xs, dtype=float)
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    u = np.atleast_2d(u)
    y_slices = list(ys) if y_slices is None else list(y_slices)
    X_values = np.asarray(sorted(X_values), dtype=float)
    if X_values.size == 0:
        raise DomainError("empty X ladder")
    P = np.array([[partial_mass(u, xs, X, y, ys) for X in X_values] for y in y_slices])
    gap = None
    if a is not None:
        a = np.atleast_2d(a)
        D = np.array([[antiderivative_difference(a, xs, X, y, ys) for X in X_values]
                      for y in y_slices])
        gap = np.abs(P - D)
    return MassReport(float(t), y_slices, X_values, P, gap, error_budget)


def mass_identity_gap(run, X_values: Sequence[float], y_slices: Sequence[float] | None = None,
                      index: int = -1) -> MassReport:
    """Mass report with the telescoping identity ``P = A(X) - A(-X)``.

    ``run`` is a :class:`LinearSolution` or a :class:`SolutionTrajectory`
    carrying antiderivative companions (``index`` selects the time).
    """
    if isinstance(run, LinearSolution):
        grid = run.grid
        return mass_report(run.t, grid.x, grid.y, run.u, run.antiderivative, X_values,
                           y_slices, run.error_estimate)
    if isinstance(run, SolutionTrajectory):
        if not run.linear_antiderivatives or run.grid is None:
            raise DomainError("trajectory has no antiderivative companion field")
        grid = run.grid
        return mass_report(run.times[index], grid.x, grid.y, run.fields[index],
                           run.antiderivative(index), X_values, y_slices)
    raise DomainError("mass_identity_gap needs a linear solution or a trajectory with companions")


def first_crossing(X_values, P, threshold: float) -> Optional[float]:
    """Smallest ladder entry from which ``|P| <= threshold`` holds for the rest of the ladder."""
    X_values = np.asarray(X_values, dtype=float)
    ok = np.abs(np.asarray(P, dtype=float)) <= threshold
    if not ok[-1]:
        return None
    j = len(ok) - 1
    while j > 0 and ok[j - 1]:
        j -= 1
    return float(X_values[j])


@dataclass(frozen=True)
class DecayScan:
    """Window maxima of ``|f|`` on both sides of a geometric ladder of abscissae."""

    peak: float
    X_values: np.ndarray
    window_max: np.ndarray
    threshold: float
    X_star: Optional[float]


def decay_scan(f, period, X_values, threshold: float, peak_window=(-20.0, 20.0),
               peak_samples: int = 2001, periods: float = 4.0,
               per_period: int = 24) -> DecayScan:
    """Scan ``|f|`` for decay below ``threshold * peak``.

    The peak is the maximum over a dense sample of ``peak_window`` refined by a
    bounded local search.  For each ladder entry ``X`` the windows
    ``[X, X + w]`` and ``[-X - w, -X]`` are sampled with ``per_period`` points
    per local period, where ``w = periods * period(+-X)``.  ``X_star`` is the
    first ladder entry from which every later window stays below the
    threshold, or ``None`` if the last one does not.
    """
    from scipy import optimize

    xs = np.linspace(peak_window[0], peak_window[1], peak_samples)
    vals = np.abs([f(x) for x in xs])
    k = int(np.argmax(vals))
    peak = float(vals[k])
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda x: -abs(f(x)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10})
        peak = max(peak, float(-res.fun))
    X_values = np.asarray(X_values, dtype=float)
    wmax = np.empty(len(X_values))
    for i, X in enumerate(X_values):
        m = 0.0
        for sgn in (1.0, -1.0):
            p = float(period(sgn * X))
            w = periods * p
            n = max(int(math.ceil(periods * per_period)), 8)
            pts = sgn * (X + np.linspace(0.0, w, n))
            m = max(m, float(np.max(np.abs([f(x) for x in pts]))))
        wmax[i] = m
    star = first_crossing(X_values, wmax / peak, threshold)
    return DecayScan(peak, X_values, wmax, threshold, star)


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def _check_constraint(u, grid: TorusGrid):
    means = u.mean(axis=-1)
    worst = int(np.argmax(np.abs(means)))
    if abs(means[worst]) > 1e-10:
        raise DomainError(
            f"field violates the zero-mass constraint: x-line mass {means[worst] * grid.lx:.3e} "
            f"at y={grid.y[worst]:.4g}; d_x^-1 u_y is undefined")


def _inverse_dx_dy(u, grid: TorusGrid):
    xi, eta = grid.wavenumbers()
    uh = sfft.rfft2(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        wh = np.where(xi == 0, 0.0, eta / xi * uh)
    return sfft.irfft2(wh, s=u.shape)


def hamiltonian_kp(u, grid: TorusGrid, spec: DispersionSpec) -> float:
    """``1/2 int [-u L u + (d_x^-1 u_y)^2 + u^2 + u^3/3]`` on the torus."""
    u = np.asarray(u, dtype=float)
    _check_constraint(u, grid)
    xi, _ = grid.wavenumbers()
    lu = sfft.irfft2(spec.epsilon * np.abs(xi) ** spec.alpha * sfft.rfft2(u), s=u.shape)
    w = _inverse_dx_dy(u, grid)
    dens = -u * lu + w * w + u * u + u ** 3 / 3.0
    return 0.5 * float(dens.sum()) * grid.dx * grid.dy


def hamiltonian_bbm(u, grid: TorusGrid) -> float:
    """``1/2 int [(d_x^-1 u_y)^2 + u^2 + u^3/3]`` on the torus."""
    u = np.asarray(u, dtype=float)
    _check_constraint(u, grid)
    w = _inverse_dx_dy(u, grid)
    dens = w * w + u * u + u ** 3 / 3.0
    return 0.5 * float(dens.sum()) * grid.dx * grid.dy


# ---------------------------------------------------------------------------
# decay envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    exponent: float
    log_prefactor: float
    points: int


def envelope_points(lam, mag):
    """Window maxima of ``mag``: one per oscillation, delimited by local minima.

    A monotone sequence is its own envelope.
    """
    lam = np.asarray(lam, dtype=float)
    mag = np.abs(np.asarray(mag, dtype=float))
    order = np.argsort(np.abs(lam))
    lam, mag = lam[order], mag[order]
    interior = (mag[1:-1] >= mag[:-2]) & (mag[1:-1] >= mag[2:])
    minima = (mag[1:-1] < mag[:-2]) & (mag[1:-1] < mag[2:])
    if not minima.any():
        return lam, mag
    idx = np.nonzero(interior)[0] + 1
    return lam[idx], mag[idx]


def decay_envelope(samples) -> EnvelopeFit:
    """Least-squares slope of ``log(envelope)`` against ``log|lambda|``."""
    samples = list(samples)
    if len(samples) < 20:
        raise DomainError(f"need at least 20 samples, got {len(samples)}")
    lam = np.array([s[0] for s in samples], dtype=float)
    mag = np.array([s[1] for s in samples], dtype=float)
    span = np.abs(lam)
    if span.min() <= 0 or span.max() / span.min() < 10.0:
        raise DomainError("samples must span at least one decade of |lambda|")
    el, em = envelope_points(lam, mag)
    keep = em > 0
    if keep.sum() < 3:
        raise DomainError("too few envelope points for a fit")
    slope, icpt = np.polyfit(np.log(np.abs(el[keep])), np.log(em[keep]), 1)
    return EnvelopeFit(float(slope), float(icpt), int(keep.sum()))


# ---------------------------------------------------------------------------
# PDE residuals
# ---------------------------------------------------------------------------

def _taper(n, flat=0.6):
    """C-infinity window: 1 on the central ``flat`` fraction, 0 at the ends."""
    s = np.linspace(-1.0, 1.0, n)
    r = np.abs(s)
    edge = flat
    out = np.ones(n)
    ramp = (r > edge) & (r < 1.0)
    z = (r[ramp] - edge) / (1.0 - edge)

    def bump(v):
        return np.where(v > 0, np.exp(-1.0 / np.maximum(v, 1e-300)), 0.0)

    out[ramp] = bump(1.0 - z) / (bump(1.0 - z) + bump(z))
    out[r >= 1.0] = 0.0
    return out


def _time_derivative(fields, times, j):
    h = times[1] - times[0]
    if not np.allclose(np.diff(times), h, rtol=1e-9, atol=0.0):
        raise DomainError("residual needs uniformly spaced times")
    n = len(times)
    if 2 <= j <= n - 3:
        return (-fields[j + 2] + 8 * fields[j + 1] - 8 * fields[j - 1] + fields[j - 2]) / (12.0 * h)
    if n >= 5:
        # fourth-order stencil shifted by one point
        if j == 1:
            f = fields[0:5]
            return (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12.0 * h)
        f = fields[n - 5:n]
        return (3 * f[4] + 10 * f[3] - 18 * f[2] + 6 * f[1] - f[0]) / (12.0 * h)
    return (fields[j + 1] - fields[j - 1]) / (2.0 * h)


def residual(trajectory: SolutionTrajectory, spec: DispersionSpec, nonlinear: bool = True,
             torus: TorusGrid | None = None, flat: float = 0.6) -> tuple[np.ndarray, np.ndarray]:
    """Max-norm of the differentiated equation at the interior recorded times.

    KP: ``(u_t + u u_x - epsilon L u_x)_x + u_yy``; KP-BBM:
    ``(u_t + u_x + u u_x + L u_t)_x + u_yy`` with ``L = |D_x|^alpha``.
    Time derivatives are fourth-order finite differences (central where
    possible) when five or more times are recorded, second order otherwise.  Window fields are multiplied by a smooth
    taper and the residual is reported where the taper equals one; torus
    fields are used as they are.  Returns ``(times, residuals)``.
    """
    times = np.asarray(trajectory.times, dtype=float)
    if len(times) < 3:
        raise DomainError("residual needs at least three recorded times")
    fields = [np.asarray(f, dtype=float) for f in trajectory.fields]
    if torus is not None:
        ny, nx = fields[0].shape
        shape = (ny, nx)
        xi, eta = torus.wavenumbers()
        weight = np.ones(shape)
        region = np.ones(shape, dtype=bool)
    else:
        grid = trajectory.grid
        if grid is None:
            raise DomainError("trajectory has no grid; pass torus=")
        shape = (2 * grid.ny, 2 * grid.nx)
        xi = 2.0 * math.pi * sfft.rfftfreq(shape[1], grid.dx)
        eta = 2.0 * math.pi * sfft.fftfreq(shape[0], grid.dy)
        xi, eta = np.meshgrid(xi, eta)
        weight = np.outer(_taper(grid.ny, flat), _taper(grid.nx, flat))
        region = weight >= 1.0 - 1e-15
    n = fields[0].shape

    def fwd(f):
        return sfft.rfft2(f * weight, s=shape)

    def inv(fh):
        return sfft.irfft2(fh, s=shape)[: n[0], : n[1]]

    la = np.abs(xi) ** spec.alpha
    out_t, out_r = [], []
    for j in range(1, len(times) - 1):
        u = fields[j]
        ut = _time_derivative(fields, times, j)
        uh = fwd(u)
        uth = fwd(ut)
        if spec.is_bbm:
            inner = uth + 1j * xi * uh + la * uth
        else:
            inner = uth - spec.epsilon * la * 1j * xi * uh
        if nonlinear:
            inner = inner + 0.5j * xi * fwd(u * u) if torus is not None else inner + fwd(
                u * inv(1j * xi * uh))
        r = inv(1j * xi * inner - eta * eta * uh)
        out_t.append(times[j])
        out_r.append(float(np.max(np.abs(r[region]))))
    return np.array(out_t), np.array(out_r)
