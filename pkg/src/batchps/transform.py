"""Laplace transform of the batch sojourn time and its decomposition.

The transform is assembled from two layers of integrals:

* inner integrals over xi in [0, U-(s)] of Psi_k applied to the tree
  function of w(xi) = x(s) R(s; xi) X(s; v), against d xi / (1 - xi);
* outer integrals over y in [u, U-(s)] whose integrands feed the inner
  layer at the moving argument v' = y Z(y).

All contours are straight segments; power branches are continued along the
affine base paths, and the tree function is continued by warm-started
Newton along each path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .core import DEFAULT_CONFIG, DomainError, EvalConfig, QueueParams
from .cpower import c_exp, c_log, im, is_mp, re, seg_log
from .quadrature import geometric_edges, integrate
from .spectral import (
    SpectralBundle,
    TreeSolver,
    bundle_from_theta,
    cut_info,
    kernel_frak_R,
    map_X,
    poly_P,
    polys_Q,
    psi_maps,
    roots_U,
)

__all__ = [
    "TransformValue",
    "DecompositionValue",
    "E_at_q",
    "E_general",
    "kernel_Z",
    "L1",
    "L2",
    "F_full",
    "lt_Omega",
    "decompose",
]


@dataclass(frozen=True)
class TransformValue:
    s: complex
    value: complex
    est_abs_error: float


@dataclass(frozen=True)
class DecompositionValue:
    i1: complex
    i2: complex
    i3: complex
    pole_term: complex
    prefactor: float
    est_abs_error: float = 0.0


def _guard_poly(params, s, v):
    p = poly_P(params, s, v)
    if abs(p) <= 1e-12 * (1.0 + abs(v)) ** 2:
        raise DomainError(f"P(s; v) vanishes at s={s}, v={v}")
    return p


def _psi_integrals(
    params: QueueParams,
    bundle: SpectralBundle,
    v,
    cfg: EvalConfig,
    *,
    want=(True, False),
    rel_tol=None,
    abs_tol=None,
):
    """Inner integrals int_0^1 Psi_k(T(w(t))) U- / (1 - t U-) dt for k in {0,1}.

    w(t) = x(s) X(s; v) (1-t)^(C- - 1) (1 - t U-/U+)^(C+ - 1), the kernel
    R evaluated along the ray xi = t U- with continued power branches.
    Returns ((val0, val1), err); unset entries of `want` come back as None.
    """
    rel_tol = cfg.quad_rel_tol if rel_tol is None else rel_tol
    abs_tol = cfg.quad_abs_tol if abs_tol is None else abs_tol
    base_w = bundle.x_small * map_X(params, bundle, v)
    if base_w == 0:
        zero = 0.0 * bundle.u_minus
        return (zero if want[0] else None, zero if want[1] else None), 0.0

    um, up = bundle.u_minus, bundle.u_plus
    em = bundle.c_minus - 1.0
    ep = bundle.c_plus - 1.0
    ratio_end = 1.0 - um / up
    mp_mode = bundle.is_mp
    one = mp.mpf(1) if mp_mode else 1.0

    def w_of_t(t):
        tt = mp.mpf(t) if mp_mode else t
        if tt == 0:
            return base_w
        lg = em * c_log(one - tt) + ep * seg_log(one, ratio_end, tt)
        return base_w * c_exp(lg)

    solver = TreeSolver(bundle.c_plus, w_of_t, cfg)
    edges = geometric_edges(0.0, 1.0, toward=1.0, depth=5)

    def make_integrand(k):
        def f(t):
            tt = mp.mpf(t) if mp_mode else t
            T = solver.value_at(t)
            p0, p1 = psi_maps(params, bundle, T)
            meas = um / (one - tt * um)
            return (p0 if k == 0 else p1) * meas

        return f

    vals = [None, None]
    err = 0.0
    for k in (0, 1):
        if not want[k]:
            continue
        res = integrate(
            make_integrand(k),
            0.0,
            1.0,
            rel_tol=rel_tol,
            abs_tol=abs_tol,
            max_panels=cfg.max_subdivisions,
            edges=edges,
        )
        vals[k] = res.value
        err += res.err
    return (vals[0], vals[1]), err


def _E_from_bundle(params, bundle, v, cfg, *, rel_tol=None, abs_tol=None):
    if v == 0:
        return 0.0 * bundle.u_minus, 0.0
    p = _guard_poly(params, bundle.s, v)
    q0, _ = polys_Q(params, bundle, v)
    pref = q0 / (bundle.sqrt_delta * p)
    (val0, _), err = _psi_integrals(
        params, bundle, v, cfg, want=(True, False), rel_tol=rel_tol, abs_tol=abs_tol
    )
    return pref * val0, abs(pref) * err


def E_at_q(params: QueueParams, s, v, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG) -> TransformValue:
    """E(s; q, v): the transform generating function at u = q.

    Single integral over xi in [0, U-(s)] of Psi0(T(x R X(v))) / (1 - xi).
    """
    bundle = roots_U(params, s, side)
    val, err = _E_from_bundle(params, bundle, v, cfg)
    return TransformValue(s=s, value=val, est_abs_error=err)


def _L_pair_from_bundle(params, bundle, uu, vv, cfg, *, want=(True, True), rel_tol=None, abs_tol=None):
    """(L1(s; uu, vv), L2(s; vv)) sharing one tree-function path at vv."""
    if vv == 0:
        zero = 0.0 * bundle.u_minus
        return (zero if want[0] else None, zero if want[1] else None), 0.0
    p = _guard_poly(params, bundle.s, vv)
    q0, q1 = polys_Q(params, bundle, vv)
    (psi0_int, psi1_int), err = _psi_integrals(
        params, bundle, vv, cfg, want=want, rel_tol=rel_tol, abs_tol=abs_tol
    )
    sd = bundle.sqrt_delta
    l1 = None
    l2 = None
    if want[0]:
        coeff1 = (uu * q0 / p + vv * q1 / (p * p)) / sd
        l1 = coeff1 * psi0_int
    if want[1]:
        tot = bundle.u_plus + bundle.u_minus
        coeff2 = (tot - params.q - vv) * q0 * q0 / (sd * p * p)
        l2 = coeff2 * psi1_int
    return (l1, l2), err


def L1(params: QueueParams, s, u, v, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG):
    """Inner kernel L1(s; u, v) (affine in u)."""
    bundle = roots_U(params, s, side)
    (l1, _), _ = _L_pair_from_bundle(params, bundle, u, v, cfg, want=(True, False))
    return l1


def L2(params: QueueParams, s, v, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG):
    """Inner kernel L2(s; v)."""
    bundle = roots_U(params, s, side)
    (_, l2), _ = _L_pair_from_bundle(params, bundle, None, v, cfg, want=(False, True))
    return l2


def kernel_Z(params: QueueParams, bundle: SpectralBundle, u, v, y):
    """Z(s; u, v; y) = v R(s;y)/R(s;u) / ((1-v) + v R(s;y)/R(s;u))."""
    if v == 0:
        return 0.0 * bundle.u_minus
    fr = kernel_frak_R(params, bundle, u, y)
    den = (1.0 - v) + v * fr
    if abs(den) <= 1e-13 * (1.0 + abs(v * fr)):
        raise DomainError("Z denominator vanishes")
    return v * fr / den


class _OuterPath:
    """Shared state for the outer y-integrals y = u + t (U- - u)."""

    def __init__(self, params, bundle, u, v, cfg):
        self.params = params
        self.bundle = bundle
        self.cfg = cfg
        self.u = u
        self.V = v / u
        self.du = bundle.u_minus - u
        self.em = bundle.c_minus - 1.0
        self.ep = bundle.c_plus - 1.0
        self.bp0 = bundle.u_plus - u  # base+ anchor at t=0
        self.bp1 = bundle.u_plus - bundle.u_minus
        self.lg_bp0 = c_log(self.bp0)
        self.mp_mode = bundle.is_mp
        self.one = mp.mpf(1) if self.mp_mode else 1.0

    def frak(self, t):
        """R(s; y(t))/R(s; u), argument-continued from y=u (value 1)."""
        tt = mp.mpf(t) if self.mp_mode else t
        lg = self.em * c_log(self.one - tt) + self.ep * (
            seg_log(self.bp0, self.bp1, t) - self.lg_bp0
        )
        return c_exp(lg)

    def z_of(self, t):
        fr = self.frak(t)
        den = (self.one - self.V) + self.V * fr
        if abs(den) <= 1e-13 * (1.0 + abs(self.V * fr)):
            raise DomainError("Z denominator vanishes on the outer path")
        return self.V * fr / den

    def y_of(self, t):
        tt = mp.mpf(t) if self.mp_mode else t
        return self.u + tt * self.du


def _F_integrals(params, bundle, u, v, cfg, *, rel_tol=None, abs_tol=None):
    """(J0, J12, err): the three outer integrals of the transform solution,
    with the two inner-kernel terms merged into a single passage J12."""
    rel_tol = cfg.quad_rel_tol if rel_tol is None else rel_tol
    abs_tol = cfg.quad_abs_tol if abs_tol is None else abs_tol
    path = _OuterPath(params, bundle, u, v, cfg)
    inner_rel = rel_tol * cfg.inner_tol_factor
    inner_abs = abs_tol * cfg.inner_tol_factor
    edges = geometric_edges(0.0, 1.0, toward=1.0, depth=4)

    def f0(t):
        z = path.z_of(t)
        y = path.y_of(t)
        return (1.0 - z) * z * path.du / (1.0 - y)

    def f12(t):
        z = path.z_of(t)
        y = path.y_of(t)
        vv = y * z
        (l1, l2), _ = _L_pair_from_bundle(
            params, bundle, y, vv, cfg, rel_tol=inner_rel, abs_tol=inner_abs
        )
        return (1.0 - z) * (l1 + l2) * path.du / y

    res0 = integrate(f0, 0.0, 1.0, rel_tol=rel_tol, abs_tol=abs_tol,
                     max_panels=cfg.max_subdivisions, edges=edges)
    res12 = integrate(f12, 0.0, 1.0, rel_tol=rel_tol, abs_tol=abs_tol,
                      max_panels=cfg.max_subdivisions, edges=edges)
    return res0.value, res12.value, res0.err + res12.err


def F_full(params: QueueParams, s, u, v, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG) -> TransformValue:
    """F(s; u, v): analytic difference-quotient component of the transform.

    Sum of three integrals over the straight segment [u, U-(s)]; the inner
    kernels make this a nested double integral (inner tolerances scaled by
    cfg.inner_tol_factor).  u = v is outside the supported domain.
    """
    if u == 0:
        raise DomainError("F is undefined at u = 0")
    if abs(u - v) <= 1e-13 * (1.0 + abs(u)):
        raise DomainError("F at u = v is not supported (removable singularity)")
    if abs(u) > 1.0 + 1e-12 or abs(v) > 1.0 + 1e-12:
        raise DomainError("u and v must lie in the closed unit disk")
    bundle = roots_U(params, s, side)
    if abs(u - bundle.u_minus) <= 1e-13 * (1.0 + abs(u)):
        return TransformValue(s=s, value=0.0 * bundle.u_minus, est_abs_error=0.0)
    p_u = _guard_poly(params, s, u)
    j0, j12, err = _F_integrals(params, bundle, u, v, cfg)
    pref = u / ((u - v) * p_u)
    return TransformValue(s=s, value=pref * (j0 + j12), est_abs_error=abs(pref) * err)


def E_general(params: QueueParams, s, u, v, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG) -> TransformValue:
    """E(s; u, v) = E(s; q, v) + (u - q) F(s; u, v)."""
    if abs(u) > 1.0 + 1e-12:
        raise DomainError("u must lie in the closed unit disk")
    e = E_at_q(params, s, v, side, cfg)
    if u == params.q:
        return e
    f = F_full(params, s, u, v, side, cfg)
    return TransformValue(
        s=s,
        value=e.value + (u - params.q) * f.value,
        est_abs_error=e.est_abs_error + abs(u - params.q) * f.est_abs_error,
    )


def _decompose_from_bundle(params, bundle, cfg, *, rel_tol=None, abs_tol=None,
                           want=(True, True, True)):
    """(i1, i2, i3, err) at the bundle's s; the rational pole factor of the
    first term cancels exactly against U+ U- - q v at v = q, so i1 is
    evaluated in the pole-free combined form."""
    q, rho = params.q, params.rho
    s = bundle.s
    i1 = i2 = i3 = None
    err = 0.0
    if want[0]:
        (psi0_int, _), e1 = _psi_integrals(
            params, bundle, q, cfg, want=(True, False), rel_tol=rel_tol, abs_tol=abs_tol
        )
        coeff1 = (q * s + rho + 2.0 * q * (1.0 - q)) / ((1.0 - q) * bundle.sqrt_delta)
        i1 = coeff1 * psi0_int
        err += abs(coeff1) * e1
    if want[1] or want[2]:
        u = rho + q
        # P(s; rho+q) = -rho s exactly; the outer prefactor reduces to -(rho+q)/s
        outer = -(rho + q) / s
        path_rel = rel_tol if rel_tol is not None else cfg.quad_rel_tol
        path_abs = abs_tol if abs_tol is not None else cfg.quad_abs_tol
        j0 = j12 = None
        if want[1] and want[2]:
            j0, j12, e23 = _F_integrals(params, bundle, u, q, cfg,
                                        rel_tol=path_rel, abs_tol=path_abs)
        else:
            # single-term evaluation still goes through the shared machinery
            j0, j12, e23 = _F_integrals(params, bundle, u, q, cfg,
                                        rel_tol=path_rel, abs_tol=path_abs)
        if want[1]:
            i2 = outer * j0
        if want[2]:
            i3 = outer * j12
        err += abs(outer) * e23
    return i1, i2, i3, err


def decompose(params: QueueParams, s, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG) -> DecompositionValue:
    """Transform decomposition: prefactor * (i1 + i2 + i3 + pole_term)
    reconstructs the full transform."""
    q, rho = params.q, params.rho
    if s == 0:
        raise DomainError("decomposition is singular at s = 0")
    pole_den = q + rho + q * s - q * q
    if abs(pole_den) <= 1e-13 * q * (1.0 + abs(s)):
        raise DomainError(f"s={s} is the rational pole of the transform")
    bundle = roots_U(params, s, side)
    i1, i2, i3, err = _decompose_from_bundle(params, bundle, cfg)
    pole_term = q ** 3 / pole_den
    prefactor = (1.0 - rho - q) / (q * (rho + q))
    return DecompositionValue(
        i1=i1, i2=i2, i3=i3, pole_term=pole_term,
        prefactor=prefactor, est_abs_error=prefactor * err,
    )


def lt_Omega(params: QueueParams, s, side: str = "auto", cfg: EvalConfig = DEFAULT_CONFIG) -> TransformValue:
    """Laplace transform E[exp(-s * Omega)] of the batch sojourn time.

    Assembled from F(s; rho+q, q) and E(s; q, q); internally the pole-free
    decomposition is used (identical algebraically, stable near the pole).
    """
    d = decompose(params, s, side, cfg)
    val = d.prefactor * (d.i1 + d.i2 + d.i3 + d.pole_term)
    return TransformValue(s=s, value=val, est_abs_error=d.est_abs_error)


def lt_Omega_from_theta(params: QueueParams, theta, side: str = "above",
                        cfg: EvalConfig = DEFAULT_CONFIG,
                        *, rel_tol=None, abs_tol=None):
    """Boundary transform terms (i1, i2, i3, err) at s(theta) + side 0i.

    Used by the branch-cut inversion; theta may be an mpmath value to get
    extended-precision boundary values.
    """
    bundle = bundle_from_theta(params, theta, side)
    return _decompose_from_bundle(params, bundle, cfg, rel_tol=rel_tol, abs_tol=abs_tol)
