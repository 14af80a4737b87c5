"""Quadrature engines for complex-valued integrands.

Two engines are provided:

* `integrate`: adaptive Gauss-Legendre panels (7/15 pair for the error
  estimate); good for smooth integrands and for caller-controlled panel
  layouts.  scipy.integrate.quad is real-only, hence the local engine.
* `tanh_sinh`: double-exponential rule on (0, 1); nodes cluster at both
  endpoints so fractional-power endpoint behavior (including the
  (1-t)^(-1/2 + i c) boundary kernels) converges spectrally.  Integrands
  receive (t, 1-t) with 1-t computed in full precision near the endpoint.

Both run unchanged on mpmath values since they only combine integrand
outputs linearly.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import QuadratureError


@lru_cache(maxsize=None)
def gauss_rule(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return tuple(float(v) for v in x), tuple(float(v) for v in w)


@dataclass
class QuadResult:
    value: complex
    err: float
    n_evals: int


def _panel(f, a: float, b: float, n: int):
    x, w = gauss_rule(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    total = None
    for xi, wi in zip(x, w):
        v = f(mid + half * xi) * wi
        total = v if total is None else total + v
    return total * half


def integrate(
    f,
    a: float = 0.0,
    b: float = 1.0,
    *,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-14,
    max_panels: int = 2000,
    edges=None,
    lo_order: int = 7,
    hi_order: int = 15,
    raise_on_fail: bool = True,
) -> QuadResult:
    """Adaptive panel integration of f over [a, b].

    `edges` seeds the initial panel boundaries (e.g. pre-refined toward an
    endpoint).  f is only called at interior points of panels.
    """
    if edges is None:
        edges = [a, b]
    else:
        edges = sorted(set([a, b] + [e for e in edges if a < e < b]))

    n_evals = 0

    def eval_panel(lo, hi):
        nonlocal n_evals
        coarse = _panel(f, lo, hi, lo_order)
        fine = _panel(f, lo, hi, hi_order)
        n_evals += lo_order + hi_order
        return fine, abs(fine - coarse)

    entries = []  # (-err, seq, lo, hi, value, err)
    seq = 0
    total = None
    total_err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = eval_panel(lo, hi)
        total = v if total is None else total + v
        total_err += float(e)
        heapq.heappush(entries, (-float(e), seq, lo, hi, v, float(e)))
        seq += 1

    def target():
        return max(abs_tol, rel_tol * abs(total))

    while total_err > target() and len(entries) < max_panels:
        neg_e, _, lo, hi, v, e = heapq.heappop(entries)
        total_err -= e
        if e <= 0.0 or hi - lo < 1e-15 * max(abs(lo), abs(hi), 1.0):
            heapq.heappush(entries, (0.0, seq, lo, hi, v, 0.0))
            seq += 1
            continue
        mid = 0.5 * (lo + hi)
        v1, e1 = eval_panel(lo, mid)
        v2, e2 = eval_panel(mid, hi)
        total = total - v + v1 + v2
        total_err += float(e1) + float(e2)
        heapq.heappush(entries, (-float(e1), seq, lo, mid, v1, float(e1)))
        seq += 1
        heapq.heappush(entries, (-float(e2), seq, mid, hi, v2, float(e2)))
        seq += 1

    if total_err > target() and raise_on_fail:
        raise QuadratureError(
            f"tolerance not reached: err={total_err:.3e} > target={target():.3e} "
            f"with {len(entries)} panels"
        )
    return QuadResult(total, float(total_err), n_evals)


def geometric_edges(a: float, b: float, toward: float, depth: int, ratio: float = 0.25):
    """Panel edges on [a, b] geometrically refined toward `toward` (= a or b)."""
    pts = []
    span = b - a
    frac = 1.0
    for _ in range(depth):
        frac *= ratio
        if toward == b:
            pts.append(b - frac * span)
        else:
            pts.append(a + frac * span)
    return sorted(set(pts))


# --------------------------------------------------------------------------
# tanh-sinh (double exponential) rule on (0, 1)
# --------------------------------------------------------------------------

_HALF_PI = 0.5 * math.pi


@lru_cache(maxsize=None)
def _ts_nodes(level: int, j_max: int):
    """Node table for sigma = j * 2^-level, |j| <= j_max (odd j only for
    level > 0, since even j replicate coarser levels).

    Each entry is (t, 1-t, weight) with weight = h * dt/dsigma; 1-t is
    computed from the exponential form so it stays accurate near 1.
    """
    h = 2.0 ** (-level)
    out = []
    js = range(-j_max, j_max + 1) if level == 0 else range(-j_max, j_max + 1, 2)
    for j in js:
        if level > 0 and j % 2 == 0:
            continue
        sigma = j * h
        a = _HALF_PI * math.sinh(sigma)
        # t = 1/(1 + e^(-2a)),  1 - t = e^(-2a)/(1 + e^(-2a))
        e = math.exp(-2.0 * abs(a))
        big = 1.0 / (1.0 + e)
        small = e / (1.0 + e)
        t, omt = (big, small) if a >= 0 else (small, big)
        w = h * _HALF_PI * math.cosh(sigma) * (2.0 * e / (1.0 + e) ** 2)
        out.append((t, omt, w))
    return tuple(out)


def tanh_sinh(
    f,
    *,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-14,
    max_level: int = 8,
    sigma_max: float = 4.3,
    min_level: int = 2,
    raise_on_fail: bool = True,
) -> QuadResult:
    """Integrate f(t, 1-t) over (0, 1) by the double-exponential rule.

    Levels halve the step until successive sums agree within tolerance.
    Terms whose weight falls below the floor are skipped (the integrand is
    assumed integrable, so skipped tails are double-exponentially small).
    """
    n_evals = 0
    total = None
    prev = None
    err = math.inf
    floor = 0.25 * abs_tol

    for level in range(0, max_level + 1):
        j_max = int(math.ceil(sigma_max / 2.0 ** (-level)))
        part = None
        for t, omt, w in _ts_nodes(level, j_max):
            if w == 0.0:
                continue
            scale = 1.0 if total is None else max(1.0, abs(total))
            if w < floor / max(1.0, scale) and min(t, omt) < 1e-280:
                continue
            v = f(t, omt) * w
            part = v if part is None else part + v
            n_evals += 1
        if part is None:
            part = 0.0
        if level == 0:
            total = part
        else:
            total = 0.5 * total + part * 0.5 if False else total * 0.5 + part * 0.5 * 2.0 * 0.5
        # note: with nested nodes, I_level = I_{level-1}/2 + h_level * sum(odd nodes)
        if level == 0:
            prev = None
        else:
            pass
    raise RuntimeError("unreachable")
