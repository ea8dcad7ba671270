"""Regularized oscillatory integrals behind the KP and KP-BBM kernels.

Every kernel in the package reduces to one-dimensional integrals of the form

    I(lambda) = int_R amp(xi) exp(i lambda xi + i sigma xi |xi|^alpha) d xi,

where the amplitude grows like |xi|^{1/2}, has an integrable |xi|^{-1/2}
singularity, or is an absolutely integrable KP-BBM weight.  Conjugate symmetry
of the amplitudes folds each integral onto the half line, where it is split as

* ``[0, cutoff]``: adaptive Clenshaw-Curtis panels in the variable
  ``s = sqrt(xi)`` (removes the ``xi^{-1/2}`` singularity), with breakpoints at
  the stationary point and at the region-split edges,
* ``[cutoff, inf)``: repeated integration by parts for pure power amplitudes
  (boundary terms plus an absolutely convergent remainder whose size is
  certified), or half-period summation with Wynn epsilon acceleration for the
  KP-BBM weights.

For large ``|lambda|`` the real-axis route needs a number of panels growing
like ``|lambda|^{(alpha+1)/alpha}``; there the half-line integral is moved onto
straight segments in the complex plane that pass through the stationary point
and end in a sector where the integrand decays exponentially.

All functions are pure; nothing is cached between calls.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ConvergenceError, DomainError
from . import _backend

__all__ = [
    "Estimate",
    "QuadratureConfig",
    "PhaseContext",
    "RegionSplit",
    "WeightedAmplitude",
    "FRESNEL_2D",
    "stationary_points",
    "region_split",
    "eval_H",
    "eval_F",
    "eval_weighted",
    "ibp_tail",
    "case1_transformed_integrand",
    "one_sided",
    "contour_one_sided",
]

# (2 pi)^-2 * sqrt(pi): inverse-transform normalisation times the Fresnel factor
FRESNEL_2D = math.sqrt(math.pi) / (4.0 * math.pi ** 2)

_EIGHTH = np.exp(-0.25j * np.pi)


class Estimate(NamedTuple):
    """A computed value together with its estimated absolute error."""

    value: complex
    error: float


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_panels: int = 40000
    tail_cutoff: float = 4.0
    contour_threshold: float = 40.0

    def __post_init__(self):
        if not self.rel_tol > 0 or not self.abs_tol > 0:
            raise DomainError("rel_tol and abs_tol must be positive")
        if self.max_panels < 4:
            raise DomainError("max_panels must be at least 4")
        if self.tail_cutoff < 1.0:
            raise DomainError("tail_cutoff must be >= 1")
        if not self.contour_threshold > 0:
            raise DomainError("contour_threshold must be positive")

    def scaled(self, factor: float) -> "QuadratureConfig":
        return QuadratureConfig(self.rel_tol * factor, self.abs_tol * factor,
                                self.max_panels, self.tail_cutoff, self.contour_threshold)


@dataclass(frozen=True)
class PhaseContext:
    """Self-similar coordinate and dispersion data for one evaluation."""

    lam: float
    alpha: float
    epsilon: int = 1

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.epsilon not in (1, -1):
            raise DomainError("epsilon must be +1 or -1")

    @property
    def mu(self) -> float:
        return -self.lam


@dataclass(frozen=True)
class RegionSplit:
    xi_alpha: float
    xi1: float
    xi2: float
    delta: float
    panel_edges: tuple
    case: int


_KINDS = ("half_power", "inv_half_power", "signum", "unit", "bbm_a", "bbm_a_tilde")


@dataclass(frozen=True)
class WeightedAmplitude:
    """Amplitude multiplying ``exp(i lambda xi + i c xi|xi|^alpha)``.

    ``weight`` is the Sobolev order: ``beta`` (exponent ``-beta/2`` on
    ``1 + xi^2``) when ``weight_kind == "beta"``, or ``k`` (exponent ``-k``)
    when ``weight_kind == "k"``.  Only the ``bbm_*`` kinds use ``weight`` and
    ``t``.
    """

    kind: str
    alpha: float
    weight: float = 0.0
    t: float = 0.0
    weight_kind: str = "beta"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown amplitude kind {self.kind!r}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.kind.startswith("bbm"):
            if self.weight_kind not in ("beta", "k"):
                raise DomainError("weight_kind must be 'beta' or 'k'")
            if self.weight_kind == "beta":
                limit = (self.alpha + 3.0) / 2.0
                name = "beta"
            else:
                limit = (self.alpha + 3.0) / 4.0
                name = "k"
            if not self.weight > limit:
                raise DomainError(
                    f"{name}={self.weight} must exceed (alpha+3)/"
                    f"{2 if name == 'beta' else 4}={limit} for an integrable KP-BBM amplitude")
            if not self.t > 0:
                raise DomainError("KP-BBM amplitudes need t > 0")
        if self.kind in ("signum", "unit") and not self.alpha > 1:
            raise DomainError(
                f"the 3D amplitude needs alpha > 1 (alpha={self.alpha}); alpha = 1 is excluded")

    # Right half-line data: amp(xi) = phase0 * xi^power * m(xi), xi > 0;
    # amp(-xi) = parity * conj(amp(xi)).
    @property
    def power(self) -> float:
        return {"half_power": 0.5, "inv_half_power": -0.5, "signum": 0.0,
                "unit": 0.0, "bbm_a": 0.5, "bbm_a_tilde": -0.5}[self.kind]

    @property
    def parity(self) -> int:
        return 1 if self.kind in ("half_power", "bbm_a", "unit") else -1

    @property
    def phase0(self) -> complex:
        return 1.0 + 0j if self.kind == "unit" else complex(_EIGHTH)

    @property
    def sobolev_exponent(self) -> float:
        return self.weight / 2.0 if self.weight_kind == "beta" else self.weight

    @property
    def decay_exponent(self) -> float:
        """Power of xi governing |amp| as xi -> infinity."""
        if self.kind.startswith("bbm"):
            return self.power + self.alpha / 2.0 - 2.0 * self.sobolev_exponent
        return self.power

    def smooth_factor(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        if not self.kind.startswith("bbm"):
            return None
        alpha, t, e = self.alpha, self.t, self.sobolev_exponent

        def m(xi):
            xa = xi ** alpha
            return (np.sqrt(1.0 + xa) * (1.0 + xi * xi) ** (-e)
                    * np.exp(-1j * t * xi / (1.0 + xa)))
        return m

    def inner_phase(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        if not self.kind.startswith("bbm"):
            return None
        alpha, t = self.alpha, self.t
        return lambda xi: -t * xi / (1.0 + xi ** alpha)


def _check_alpha(alpha, minimum=0.0, reason=""):
    if not (alpha > minimum and math.isfinite(alpha)):
        raise DomainError(f"alpha must exceed {minimum}{reason}, got {alpha}")


# ---------------------------------------------------------------------------
# geometry of the phase
# ---------------------------------------------------------------------------

def stationary_points(lam: float, alpha: float, epsilon: int = 1) -> list[float]:
    """Critical points of ``lam*xi + epsilon*xi|xi|^alpha`` on the real line."""
    _check_alpha(alpha)
    if epsilon not in (1, -1):
        raise DomainError("epsilon must be +1 or -1")
    mu = -lam * epsilon
    if mu <= 0:
        return []
    xa = (mu / (alpha + 1.0)) ** (1.0 / alpha)
    return [-xa, xa]


def region_split(lam: float, alpha: float, cfg: QuadratureConfig | None = None) -> RegionSplit:
    """Breakpoints used on the positive half line.

    For ``lam < -1`` the edges are expressed in the rescaled squared variable
    ``w`` with ``xi = mu^(1/alpha) w^2``: ``[mu^(-1/(2 alpha)), delta]``,
    ``[delta, 1]`` and ``[1, inf)``.  Otherwise they are ``{1, cutoff}`` in
    ``xi`` itself.
    """
    _check_alpha(alpha)
    cfg = cfg or QuadratureConfig()
    xi1 = (1.0 / (alpha + 1.0)) ** (1.0 / (2.0 * alpha))
    xi2 = ((alpha + 1.0) * (2.0 * alpha + 1.0)) ** (-1.0 / (2.0 * alpha))
    delta = 0.5 * (xi1 + xi2)
    pts = stationary_points(lam, alpha)
    xa = pts[1] if pts else 0.0
    if lam < -1.0:
        mu = -lam
        edges = (mu ** (-1.0 / (2.0 * alpha)), delta, 1.0, math.inf)
        case = 2
    else:
        edges = (1.0, max(cfg.tail_cutoff, 2.0 * xa))
        case = 1
    return RegionSplit(xa, xi1, xi2, delta, edges, case)


# ---------------------------------------------------------------------------
# panel quadrature
# ---------------------------------------------------------------------------

def clenshaw_curtis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the (n+1)-point Clenshaw-Curtis rule on [-1, 1]."""
    if n % 2:
        raise ValueError("n must be even")
    theta = np.pi * np.arange(n + 1) / n
    x = np.cos(theta)
    w = np.ones(n + 1)
    for k in range(1, n // 2 + 1):
        b = 1.0 if k == n // 2 else 2.0
        w -= b * np.cos(2 * k * theta) / (4 * k * k - 1)
    c = np.full(n + 1, 2.0)
    c[0] = c[-1] = 1.0
    return x, c * w / n


_CC_X, _CC_W = clenshaw_curtis(32)
_CC_W_COARSE = clenshaw_curtis(16)[1]


def adaptive_panels(f: Callable[[np.ndarray], np.ndarray], edges, cfg: QuadratureConfig,
                    scale_hint: float = 0.0) -> Estimate:
    """Integrate ``f`` over consecutive ``edges`` with nested CC(33/17) panels.

    ``f`` receives a 2-D array of abscissae and must be vectorised.  Panels
    whose two estimates disagree by more than their share of the tolerance are
    bisected; all pending panels are processed together in each round.
    """
    edges = np.asarray(edges, dtype=float)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return Estimate(0j, 0.0)
    length = float(b[-1] - a[0]) if np.all(np.isfinite(b)) else 1.0
    total = 0j
    err_total = 0.0
    used = a.size
    magnitude = abs(scale_hint)
    while a.size:
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _CC_X[None, :]
        vals = f(x)
        fine = half * (vals @ _CC_W)
        coarse = half * (vals[:, ::2] @ _CC_W_COARSE)
        err = np.abs(fine - coarse)
        magnitude = max(magnitude, abs(total + fine.sum()), float(np.abs(fine).max()) * 1e-3)
        target = max(cfg.abs_tol, cfg.rel_tol * magnitude)
        ok = err <= target * np.maximum(2.0 * half / length, 1e-3)
        # panels at the floating-point resolution limit cannot be refined
        ok |= half <= 1e-14 * np.maximum(np.abs(mid), 1.0)
        total += fine[ok].sum()
        err_total += float(err[ok].sum())
        a_bad, b_bad, m_bad = a[~ok], b[~ok], mid[~ok]
        if a_bad.size and used + a_bad.size > cfg.max_panels:
            raise ConvergenceError(
                f"adaptive quadrature exceeded max_panels={cfg.max_panels} "
                f"(remaining error {float(err[~ok].sum()):.3e})")
        used += a_bad.size
        a = np.concatenate([a_bad, m_bad])
        b = np.concatenate([m_bad, b_bad])
    return Estimate(complex(total), err_total)


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

def _dpsi(xi, lam, sigma, alpha):
    return lam + sigma * (alpha + 1.0) * xi ** alpha


def _ibp_terms(p, lam, sigma, alpha, cutoff, target, max_order=60):
    """Repeated integration by parts for ``int_cutoff^inf xi^p e^{i psi}``.

    Amplitudes are kept as sums of ``c * xi^q * psi'(xi)^(-m)``; one step maps
    ``f -> i (f / psi')'``.  Returns ``(boundary_sum, remainder_bound, order)``
    where the value is ``exp(i psi(cutoff)) * boundary_sum`` up to the bound.
    """
    d0 = _dpsi(cutoff, lam, sigma, alpha)
    if d0 <= 0:
        raise DomainError("tail cutoff lies inside the stationary region")
    kappa = min(1.0, d0 / (sigma * (alpha + 1.0) * cutoff ** alpha))
    lead = kappa * sigma * (alpha + 1.0)
    dd = sigma * alpha * (alpha + 1.0)
    terms = {(float(p), 0): 1.0 + 0j}
    boundary = 0j
    best = None
    for order in range(1, max_order + 1):
        # boundary contribution of the current integrand
        boundary += 1j * sum(c * cutoff ** q * d0 ** (-(m + 1)) for (q, m), c in terms.items())
        new = {}
        for (q, m), c in terms.items():
            if q != 0.0:
                key = (q - 1.0, m + 1)
                new[key] = new.get(key, 0j) + 1j * q * c
            key = (q + alpha - 1.0, m + 2)
            new[key] = new.get(key, 0j) - 1j * (m + 1) * dd * c
        terms = {k: v for k, v in new.items() if v != 0}
        bound = 0.0
        finite = True
        for (q, m), c in terms.items():
            expo = m * alpha - q - 1.0
            if expo <= 0:
                finite = False
                break
            bound += abs(c) * lead ** (-m) * cutoff ** (-expo) / expo
        if not finite:
            continue
        if best is not None and bound > best[1]:
            # asymptotic series has started to diverge
            break
        best = (boundary, bound, order)
        if bound <= target:
            break
    if best is None:
        return boundary, math.inf, max_order
    return best


def ibp_tail(p: float, lam: float, alpha: float, cutoff: float,
             cfg: QuadratureConfig | None = None, sigma: float = 1.0) -> Estimate:
    """``int_cutoff^inf xi^p exp(i(lam xi + sigma xi^(alpha+1))) d xi``.

    The first step is exactly the boundary-term-plus-transformed-integral form;
    further steps are applied to the transformed integrand until the remainder
    is certified below ``abs_tol / 4``.  Raises :class:`ConvergenceError` if
    the cutoff is too close to the stationary point for that to happen.
    """
    cfg = cfg or QuadratureConfig()
    _check_alpha(alpha)
    if alpha <= p:
        raise DomainError(f"alpha must exceed {p} for amplitude exponent {p}")
    if not sigma > 0:
        raise DomainError("ibp_tail needs a positive dispersive coefficient")
    pts = stationary_points(lam / sigma, alpha)
    if pts and cutoff <= pts[1]:
        raise DomainError(f"cutoff {cutoff} lies inside the stationary region (xi_alpha={pts[1]})")
    target = cfg.abs_tol / 4.0
    boundary, bound, _ = _ibp_terms(p, lam, sigma, alpha, cutoff, target)
    if bound > target:
        raise ConvergenceError(
            f"integration by parts from cutoff={cutoff} leaves remainder {bound:.3e} > {target:.3e}")
    phase = lam * cutoff + sigma * cutoff ** (alpha + 1.0)
    return Estimate(complex(np.exp(1j * phase) * boundary), bound)


def case1_transformed_integrand(xi, lam: float, alpha: float):
    """Non-negative weight of the once-integrated ``|xi| >= 1`` piece of F.

    ``(lam + (alpha+1)(2 alpha+1) xi^alpha) / (xi^{3/2} (lam + (alpha+1) xi^alpha)^2)``
    """
    xi = np.asarray(xi, dtype=float)
    xa = xi ** alpha
    return (lam + (alpha + 1.0) * (2.0 * alpha + 1.0) * xa) / (
        xi ** 1.5 * (lam + (alpha + 1.0) * xa) ** 2)


def wynn_epsilon(partial_sums) -> tuple[complex, float]:
    """Wynn's epsilon extrapolation of a sequence of partial sums.

    Returns the last even-column estimate and its distance to the previous
    even-column estimate as an error proxy.
    """
    s = [complex(v) for v in partial_sums]
    if len(s) < 3:
        return s[-1], (abs(s[-1] - s[-2]) if len(s) == 2 else math.inf)
    estimates = [s[-1]]
    prev = [0j] * (len(s) + 1)
    cur = s[:]
    col = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if abs(diff) <= 1e-300:
                # column has converged exactly; nothing more to extrapolate
                return estimates[-1], (abs(estimates[-1] - estimates[-2])
                                       if len(estimates) > 1 else abs(s[-1] - s[-2]))
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        col += 1
        if col % 2 == 0 and cur:
            if not math.isfinite(abs(cur[-1])):
                break
            estimates.append(cur[-1])
    if len(estimates) < 2:
        return s[-1], abs(s[-1] - s[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])


def _period_edges(lam, sigma, alpha, start, count, inner_phase):
    """Points where the dominant phase advances by multiples of pi."""
    k = np.arange(count + 1, dtype=float)
    if sigma > 0:
        psi0 = lam * start + sigma * start ** (alpha + 1.0)
        targets = psi0 + np.pi * k
        xi = np.maximum(start, (np.maximum(targets, 1e-300) / sigma) ** (1.0 / (alpha + 1.0)))
        xi[0] = start
        for _ in range(60):
            g = lam * xi + sigma * xi ** (alpha + 1.0) - targets
            step = g / _dpsi(xi, lam, sigma, alpha)
            xi = np.maximum(xi - step, start)
            if np.all(np.abs(step) <= 1e-14 * xi):
                break
        xi[0] = start
        return xi
    if lam != 0:
        return start + np.pi * k / abs(lam)
    # sigma == lam == 0: only the amplitude's own phase oscillates
    omega0 = inner_phase(np.array([start]))[0]
    lo = np.full(count + 1, start)
    hi = lo * 2.0
    targets = omega0 - np.pi * k
    for _ in range(200):
        too_small = inner_phase(hi) > targets
        if not np.any(too_small):
            break
        hi = np.where(too_small, hi * 2.0, hi)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        above = inner_phase(mid) > targets
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    out = 0.5 * (lo + hi)
    out[0] = start
    return out


def _accelerated_tail(integrand, lam, sigma, alpha, start, cfg, amp: WeightedAmplitude):
    inner = amp.inner_phase()
    if sigma == 0 and lam == 0 and alpha >= 1:
        # no oscillation survives: map the algebraic decay onto (0, 1]
        d = -1.0 - amp.decay_exponent

        def g(v):
            xi = start * v ** (-1.0 / d)
            return integrand(xi) * (start / d) * v ** (-1.0 / d - 1.0)
        edges = np.geomspace(1e-15, 1.0, 31)
        return adaptive_panels(g, edges, cfg)
    tol = max(cfg.abs_tol, 1e-16)
    chunk = 40
    count = chunk
    sums = []
    running = 0j
    err_sum = 0.0
    edges = _period_edges(lam, sigma, alpha, start, count, inner)
    done = 0
    estimate, err = 0j, math.inf
    last = None
    while True:
        for i in range(done, len(edges) - 1):
            piece = adaptive_panels(integrand, [edges[i], edges[i + 1]], cfg.scaled(0.1))
            running += piece.value
            err_sum += piece.error
            sums.append(running)
        done = len(edges) - 1
        if len(sums) >= 8:
            estimate, err = wynn_epsilon(sums[-24:])
            if last is not None and abs(estimate - last) <= tol and err <= tol:
                break
            if err <= tol * 0.1:
                break
            last = estimate
        if len(sums) > 600:
            raise ConvergenceError(f"accelerated tail did not settle (last change {err:.3e})")
        count += chunk
        edges = _period_edges(lam, sigma, alpha, start, count, inner)
    return Estimate(complex(estimate), err + err_sum)


# ---------------------------------------------------------------------------
# half-line integrals
# ---------------------------------------------------------------------------

def _s_breaks(points, top):
    pts = sorted({float(p) for p in points if 0.0 < p < top})
    return [0.0] + [math.sqrt(p) for p in pts] + [math.sqrt(top)]


def _refine_by_phase(edges_s, theta, cycles_per_panel=2.0):
    """Subdivide each s-interval so that no panel spans too many oscillations."""
    out = [edges_s[0]]
    for lo, hi in zip(edges_s[:-1], edges_s[1:]):
        ss = np.linspace(lo, hi, 257)
        th = theta(ss)
        acc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(th)))])
        n = int(math.ceil(acc[-1] / (2 * np.pi * cycles_per_panel)))
        if n > 1:
            inner = np.interp(np.linspace(0, acc[-1], n + 1)[1:-1], acc, ss)
            out.extend(inner.tolist())
        out.append(hi)
    return np.array(out)


def _use_contour(lam, sigma, alpha, cfg, case):
    if case is not None or not alpha > 1 or lam == 0:
        return False
    scaled = abs(lam) * sigma ** (-1.0 / (alpha + 1.0)) if sigma > 0 else abs(lam)
    return scaled > cfg.contour_threshold


def one_sided(p: float, lam: float, sigma: float, alpha: float, cfg: QuadratureConfig,
              amp: WeightedAmplitude | None = None, case: int | None = None) -> Estimate:
    """``int_0^inf xi^p m(xi) exp(i(lam xi + sigma xi^(alpha+1))) d xi``.

    ``m`` is the smooth factor of ``amp`` (1 when ``amp`` is ``None`` or a
    pure power kind).  ``case`` forces the Case-1 (1) or Case-2 (2) region
    split; by default it follows ``lam >= -1``.
    """
    m = amp.smooth_factor() if amp is not None else None
    inner = amp.inner_phase() if amp is not None else None
    pure = m is None
    if _use_contour(lam, sigma, alpha, cfg, case):
        return contour_one_sided(p, lam, sigma, alpha, cfg, amp)
    if pure and not sigma > 0:
        raise DomainError("pure power amplitudes need a positive dispersive coefficient")
    if sigma > 0:
        pts = stationary_points(lam / sigma, alpha)
    else:
        pts = []
    xa = pts[1] if pts else 0.0
    if case is None:
        case = 2 if lam < -1.0 else 1

    breaks = [1.0]
    if xa > 0:
        breaks.append(xa)
        # geometric grading toward the stationary point
        w = max(math.sqrt(cfg.rel_tol), 1e-6) * xa
        for k in range(0, 40):
            d = w * 2.0 ** k
            if d > 0.5 * xa:
                break
            breaks.extend([xa - d, xa + d])
    if case == 2 and lam < 0 and sigma > 0:
        mu = -lam / sigma
        rs = region_split(-mu, alpha, cfg)
        scale = mu ** (1.0 / alpha)
        breaks.extend([scale * rs.delta ** 2, scale])
    cutoff = max(cfg.tail_cutoff, 2.0 * xa)
    if case == 2 and lam < 0 and sigma > 0:
        cutoff = max(cutoff, 1.25 * (-lam / sigma) ** (1.0 / alpha))

    def theta_s(s):
        xi = s * s
        th = lam * xi + sigma * xi ** (alpha + 1.0)
        if inner is not None:
            th = th + inner(xi)
        return th

    two_p1 = 2.0 * p + 1.0

    def f_s(s):
        xi = s * s
        vals = _backend.osc_integrand_s(s, lam, sigma, alpha, two_p1)
        if m is not None:
            vals = vals * m(xi)
        return vals

    def f_xi(xi):
        vals = xi ** p * np.exp(1j * (lam * xi + sigma * xi ** (alpha + 1.0)))
        if m is not None:
            vals = vals * m(xi)
        return vals

    for _attempt in range(12):
        edges = _refine_by_phase(_s_breaks(breaks, cutoff), theta_s)
        body = adaptive_panels(f_s, edges, cfg)
        try:
            if pure:
                tail = ibp_tail(p, lam, alpha, cutoff, cfg, sigma=sigma)
            else:
                tail = _accelerated_tail(f_xi, lam, sigma, alpha, cutoff, cfg, amp)
        except ConvergenceError:
            cutoff *= 1.6
            continue
        return Estimate(body.value + tail.value, body.error + tail.error)
    raise ConvergenceError(f"tail could not be certified for lam={lam}, alpha={alpha}")


def _phase_increment(u, xs, lam, sigma, alpha):
    """``psi(xs (1 + u)) - psi(xs)`` at a stationary point ``xs``, without cancellation.

    With ``psi'(xs) = 0`` this equals ``sigma xs^(alpha+1) [(1+u)^(alpha+1) - 1 - (alpha+1) u]``.
    """
    a = alpha + 1.0
    u = np.asarray(u, dtype=complex)
    out = np.empty_like(u)
    small = np.abs(u) < 0.25
    us = u[small]
    acc = np.zeros_like(us)
    coef = a * (a - 1.0) / 2.0
    power = us * us
    for k in range(2, 60):
        acc += coef * power
        coef *= (a - k) / (k + 1.0)
        power = power * us
        if coef == 0.0:
            break
    out[small] = acc
    ub = u[~small]
    out[~small] = (1.0 + ub) ** a - 1.0 - a * ub
    return sigma * xs ** a * out


def _contour_angles(alpha, sigma, m):
    """Ray angle into the decay sector and the clearance from amplitude singularities."""
    if sigma > 0:
        theta = math.pi / (2.0 * (alpha + 1.0))
    else:
        theta = math.pi / 4.0
    if m is not None:
        # stay clear of xi = +-i and of the zeros of 1 + xi^alpha
        theta = min(theta, 0.5 * math.pi / max(alpha, 1.0), math.pi / 4.0)
    return theta


def contour_one_sided(p: float, lam: float, sigma: float, alpha: float, cfg: QuadratureConfig,
                      amp: WeightedAmplitude | None = None) -> Estimate:
    """Same integral as :func:`one_sided`, evaluated on a deformed contour.

    The integrand is analytic in the open right half plane, so the half line
    may be replaced by

    * ``lam > 0``: the ray ``r e^{i theta}`` (no real stationary point),
    * ``lam < 0, sigma > 0``: the segment from 0 to ``xs - r1 e^{i theta}``
      followed by the line ``xs + r e^{i theta}`` through the stationary point
      ``xs``,
    * ``lam < 0, sigma = 0``: the ray ``r e^{-i theta}``,

    with ``theta`` inside the sector where ``exp(i sigma xi^(alpha+1))`` decays.
    Requires ``alpha > 1`` so that the lower segment stays in a valley.
    """
    m = amp.smooth_factor() if amp is not None else None
    if m is None and not sigma > 0:
        raise DomainError("pure power amplitudes need a positive dispersive coefficient")
    if not alpha > 1:
        raise DomainError("contour evaluation needs alpha > 1")
    if lam == 0:
        raise DomainError("contour evaluation needs lam != 0")
    theta = _contour_angles(alpha, sigma, m)

    def psi(xi):
        return lam * xi + sigma * xi ** (alpha + 1.0)

    def amp_phase(xi):
        vals = np.exp(1j * psi(xi))
        if m is not None:
            vals = vals * m(xi)
        return vals

    def decay_length(origin, direction, start):
        # smallest r with Im psi > 60 along origin + r*direction, by doubling
        r = start
        for _ in range(200):
            if (psi(origin + r * direction)).imag > 60.0:
                return r
            r *= 2.0
        raise ConvergenceError("contour did not reach the decay sector")

    def from_origin(z_end):
        # int_0^{z_end} with xi = z_end * s^2 (removes xi^p at the origin)
        def f(s):
            xi = z_end * s * s
            return 2.0 * z_end ** (p + 1.0) * s ** (2.0 * p + 1.0) * amp_phase(xi)
        scale = 1.0 / (abs(lam) * abs(z_end))
        lo = math.sqrt(min(scale, 1.0)) * 1e-3
        edges = np.concatenate([[0.0], np.geomspace(lo, 1.0, 48)]) if lo < 1.0 else [0.0, 1.0]
        return adaptive_panels(f, edges, cfg)

    def along(xs, direction, r_lo, r_hi, width):
        # phase measured from psi(xs); the factor exp(i psi(xs)) is applied by the caller
        def f(r):
            w = r * direction
            xi = xs + w
            vals = direction * xi ** p * np.exp(1j * _phase_increment(w / xs, xs, lam, sigma, alpha))
            if m is not None:
                vals = vals * m(xi)
            return vals
        pos = width * np.geomspace(1.0, max(r_hi / width, 2.0), 60)
        neg = -width * np.geomspace(1.0, max(-r_lo / width, 2.0), 60) if r_lo < 0 else []
        edges = np.unique(np.clip(np.concatenate([[r_lo, 0.0, r_hi], pos, neg]), r_lo, r_hi))
        return adaptive_panels(f, edges, cfg)

    if lam > 0:
        d = np.exp(1j * theta)
        r_end = decay_length(0.0, d, 1.0 / lam)
        est = from_origin(r_end * d)
        return est
    if not sigma > 0:
        d = np.exp(-1j * theta)
        r_end = decay_length(0.0, d, 1.0 / abs(lam))
        return from_origin(r_end * d)
    xs = (-lam / (sigma * (alpha + 1.0))) ** (1.0 / alpha)
    d = np.exp(1j * theta)
    r1 = 0.5 * xs / math.cos(theta)
    z1 = xs - r1 * d
    second = sigma * (alpha + 1.0) * alpha * xs ** (alpha - 1.0)
    width = 1.0 / math.sqrt(second)
    r_hi = decay_length(xs, d, width)
    # the lower leg must not climb out of the valley
    probe = np.concatenate([z1 * np.linspace(0.0, 1.0, 65)[1:], xs + np.linspace(-r1, 0.0, 65) * d])
    if np.min(psi(probe).imag) < -1.0:
        raise ConvergenceError("deformed contour leaves the decay region")
    first = from_origin(z1)
    rest = along(xs, d, -r1, r_hi, width)
    # psi(xs) = lam*xs*alpha/(alpha+1) avoids cancelling two large terms
    rot = np.exp(1j * lam * xs * alpha / (alpha + 1.0))
    # a one-ulp change of lam moves the phase by about eps*|lam|*xs
    conditioning = 4.0 * np.finfo(float).eps * abs(lam) * xs * abs(rest.value)
    return Estimate(first.value + rot * rest.value, first.error + rest.error + conditioning)


def _full_line(amp: WeightedAmplitude, lam: float, sigma: float, epsilon: int,
               cfg: QuadratureConfig, case=None) -> Estimate:
    """Fold the real-line integral onto the half line using amp(-xi) = parity*conj(amp(xi))."""
    p, kappa, c0 = amp.power, amp.parity, amp.phase0
    if epsilon == 1:
        half = one_sided(p, lam, sigma, amp.alpha, cfg, amp, case)
        z = c0 * half.value
        return Estimate(z + kappa * np.conj(z), 2.0 * half.error)
    if amp.kind.startswith("bbm"):
        raise DomainError("KP-BBM amplitudes are defined for epsilon = +1 only")
    # epsilon = -1: substitute xi -> -xi; the amplitude has no smooth factor here
    half = one_sided(p, -lam, sigma, amp.alpha, cfg, None,
                     None if case is None else case)
    z = np.conj(c0) * half.value
    return Estimate(np.conj(z) + kappa * z, 2.0 * half.error)


def eval_H(lam: float, alpha: float, cfg: QuadratureConfig | None = None,
           epsilon: int = 1) -> Estimate:
    """Profile of the 2D fundamental solution, constant included.

    ``G(t, x, y) = t^{-(1/2 + 3/(2(alpha+1)))} * H(lambda)``.
    """
    cfg = cfg or QuadratureConfig()
    _check_alpha(alpha, 0.5, " (the transformed tail integrand is not integrable otherwise)")
    amp = WeightedAmplitude("half_power", alpha)
    est = _full_line(amp, lam, 1.0, epsilon, cfg)
    return Estimate(FRESNEL_2D * est.value.real, FRESNEL_2D * est.error)


def eval_F(lam: float, alpha: float, cfg: QuadratureConfig | None = None,
           epsilon: int = 1, check_boundary: bool = True) -> Estimate:
    """Antiderivative profile ``int sgn(xi) e^{-i sgn(xi) pi/4} |xi|^{-1/2} e^{i lam xi + i xi|xi|^alpha}``.

    The value is purely imaginary.  Within 0.1 of the Case boundary
    ``lam = -1`` both region splits are evaluated; their disagreement is
    added to the error estimate and a warning is issued if it exceeds the
    tolerance.
    """
    cfg = cfg or QuadratureConfig()
    _check_alpha(alpha)
    amp = WeightedAmplitude("inv_half_power", alpha)
    est = _full_line(amp, lam, 1.0, epsilon, cfg)
    value = 1j * est.value.imag
    err = est.error
    if check_boundary and abs(epsilon * lam + 1.0) <= 0.1:
        other_case = 1 if epsilon * lam < -1.0 else 2
        alt = _full_line(amp, lam, 1.0, epsilon, cfg, case=other_case)
        gap = abs(alt.value.imag - value.imag)
        if gap > 10 * max(cfg.abs_tol, cfg.rel_tol * abs(value)) + err + alt.error:
            warnings.warn(f"Case-1/Case-2 branches disagree by {gap:.3e} at lam={lam}",
                          RuntimeWarning, stacklevel=2)
        err = max(err, gap)
    return Estimate(value, err)


def eval_weighted(amp: WeightedAmplitude, lam: float, secondary_coeff: float,
                  cfg: QuadratureConfig | None = None, epsilon: int = 1) -> Estimate:
    """``int amp(xi) exp(i lam xi + i secondary_coeff xi|xi|^alpha) d xi``."""
    cfg = cfg or QuadratureConfig()
    if secondary_coeff < 0:
        raise DomainError("secondary coefficient must be non-negative")
    if amp.kind in ("half_power",) and amp.alpha <= 0.5:
        raise DomainError("half_power amplitude needs alpha > 1/2")
    return _full_line(amp, lam, secondary_coeff, epsilon, cfg)
