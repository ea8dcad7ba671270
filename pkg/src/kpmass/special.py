"""Airy function Ai and its derivative in double precision.

Three regimes are stitched together:

* Maclaurin series around the origin,
* Taylor stepping with the Airy ODE ``y'' = x y``: outward from the
  origin on the negative axis (both solutions oscillate there) and inward
  from ``x = 9`` on the positive axis (the direction in which Ai dominates),
* the classical asymptotic expansions for large ``|x|``.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["airy_ai", "airy_ai_prime", "airy", "AiryValue"]

# Gamma(1/3), Gamma(2/3)
_GAMMA_1_3 = 2.6789385347077476337
_GAMMA_2_3 = 1.3541179394264004169

AI0 = 1.0 / (3.0 ** (2.0 / 3.0) * _GAMMA_2_3)
AIP0 = -1.0 / (3.0 ** (1.0 / 3.0) * _GAMMA_1_3)

SERIES_POS_MAX = 3.0
POS_ANCHOR_START = 9.0
SERIES_NEG_MAX = 2.5
ASYMP_NEG_MIN = 8.0
_STEP = 0.25
_TAYLOR_TERMS = 40


class AiryValue(tuple):
    """``(ai, ai_prime, x)`` triple."""

    __slots__ = ()

    def __new__(cls, ai: float, ai_prime: float, x: float):
        return super().__new__(cls, (ai, ai_prime, x))

    ai = property(lambda self: self[0])
    ai_prime = property(lambda self: self[1])
    x = property(lambda self: self[2])


def _maclaurin(x: float) -> tuple[float, float]:
    # Ai = AI0 f + AIP0 g with f, g the even/odd-type solutions
    f = 1.0
    g = x
    fp = 0.0
    gp = 1.0
    tf = 1.0
    tg = x
    x3 = x * x * x
    k = 0
    while True:
        k += 1
        tf *= x3 / ((3 * k - 1) * (3 * k))
        tg *= x3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
        fp += 3 * k * tf / x if x != 0.0 else 0.0
        gp += (3 * k + 1) * tg / x if x != 0.0 else 0.0
        if abs(tf) + abs(tg) < 1e-18 * (abs(f) + abs(g)) and k > 3:
            break
        if k > 200:
            break
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _taylor_step(x0: float, y0: float, yp0: float, h: float) -> tuple[float, float]:
    a = [y0, yp0 * h, 0.5 * x0 * y0 * h * h]
    for n in range(1, _TAYLOR_TERMS):
        a.append((x0 * h * h * a[n] + h ** 3 * a[n - 1]) / ((n + 1) * (n + 2)))
    y = math.fsum(a)
    yp = math.fsum(n * a[n] for n in range(1, len(a))) / h
    return y, yp


def _build_anchors() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = [0.0]
    ys = [AI0]
    yps = [AIP0]
    while xs[-1] > -ASYMP_NEG_MIN - _STEP:
        y, yp = _taylor_step(xs[-1], ys[-1], yps[-1], -_STEP)
        xs.append(xs[-1] - _STEP)
        ys.append(y)
        yps.append(yp)
    return np.array(xs), np.array(ys), np.array(yps)


_ANCHOR_X, _ANCHOR_Y, _ANCHOR_YP = _build_anchors()


def _asymptotic_coeffs(n: int) -> tuple[list[float], list[float]]:
    u = [1.0]
    v = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
        v.append(-(6 * k + 1) / (6 * k - 1) * u[-1])
    return u, v


_U, _V = _asymptotic_coeffs(60)


def _truncated_sum(coeffs, z: float, sign: float = -1.0) -> float:
    """Sum ``coeffs[k] (sign/z)^k`` stopping at the smallest term."""
    total = 0.0
    prev = math.inf
    zk = 1.0
    for k, c in enumerate(coeffs):
        term = c * zk
        if abs(term) > prev:
            break
        total += term
        prev = abs(term)
        if prev < 1e-17 * abs(total):
            break
        zk *= sign / z
    return total


def _asymptotic_pos(x: float) -> tuple[float, float]:
    zeta = 2.0 / 3.0 * x ** 1.5
    q = x ** 0.25
    e = math.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    return e / q * _truncated_sum(_U, zeta), -e * q * _truncated_sum(_V, zeta)


def _alternating_pair(coeffs, zeta: float) -> tuple[float, float]:
    even = coeffs[0::2]
    odd = coeffs[1::2]
    z2 = zeta * zeta
    p = _truncated_sum(even, z2)
    q = _truncated_sum(odd, z2) / zeta
    return p, q


def _asymptotic_neg(x: float) -> tuple[float, float]:
    # x > 0 here; returns Ai(-x), Ai'(-x)
    zeta = 2.0 / 3.0 * x ** 1.5
    q = x ** 0.25
    s = math.sin(zeta + math.pi / 4)
    c = math.cos(zeta + math.pi / 4)
    pu, qu = _alternating_pair(_U, zeta)
    pv, qv = _alternating_pair(_V, zeta)
    root_pi = math.sqrt(math.pi)
    ai = (s * pu - c * qu) / (root_pi * q)
    aip = -q * (c * pv + s * qv) / root_pi
    return ai, aip


def _build_pos_anchors() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs = [POS_ANCHOR_START]
    y, yp = _asymptotic_pos(POS_ANCHOR_START)
    ys = [y]
    yps = [yp]
    while xs[-1] > SERIES_POS_MAX:
        y, yp = _taylor_step(xs[-1], ys[-1], yps[-1], -_STEP)
        xs.append(xs[-1] - _STEP)
        ys.append(y)
        yps.append(yp)
    return np.array(xs), np.array(ys), np.array(yps)


_POS_X, _POS_Y, _POS_YP = _build_pos_anchors()


def _from_anchor(x: float, xs, ys, yps) -> tuple[float, float]:
    i = int(np.argmin(np.abs(xs - x)))
    h = x - xs[i]
    if h == 0.0:
        return float(ys[i]), float(yps[i])
    return _taylor_step(float(xs[i]), float(ys[i]), float(yps[i]), h)


def _airy_scalar(x: float) -> tuple[float, float]:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Airy argument must be finite, got {x!r}")
    if x >= 0.0:
        if x <= SERIES_POS_MAX:
            return _maclaurin(x)
        if x <= POS_ANCHOR_START:
            return _from_anchor(x, _POS_X, _POS_Y, _POS_YP)
        return _asymptotic_pos(x)
    if x >= -SERIES_NEG_MAX:
        return _maclaurin(x)
    if x >= -ASYMP_NEG_MIN:
        return _from_anchor(x, _ANCHOR_X, _ANCHOR_Y, _ANCHOR_YP)
    return _asymptotic_neg(-x)


def airy(x):
    """Return ``(Ai(x), Ai'(x))`` for scalar or array ``x``."""
    if np.ndim(x) == 0:
        return _airy_scalar(x)
    arr = np.asarray(x, dtype=float)
    out = np.empty((2,) + arr.shape)
    for idx, xv in np.ndenumerate(arr):
        out[(0,) + idx], out[(1,) + idx] = _airy_scalar(xv)
    return out[0], out[1]


def airy_ai(x):
    """Airy function Ai(x)."""
    return airy(x)[0]


def airy_ai_prime(x):
    """Derivative Ai'(x)."""
    return airy(x)[1]
