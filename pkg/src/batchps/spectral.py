"""Kernel objects of the batch sojourn-time transform.

The quadratic u^2 - (1+rho+q+s) u + (q + q s + rho) has roots U-(s), U+(s)
whose square-root discriminant is taken analytic in the plane cut along
[sigma-, sigma+] with sqrt(delta(0)) > 0.  On the upper side of the cut the
roots trace the circle q + r e^{+-i theta} with r = sqrt(rho (1-q)).  All
functions accept builtin complex or mpmath values and preserve the type.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .core import BranchCutError, DomainError, EvalConfig, QueueParams, SolverError, DEFAULT_CONFIG
from .cpower import (
    affine_branch_tag,
    c_exp,
    c_log,
    c_sqrt,
    cpow,
    im,
    is_mp,
    make_i,
    re,
    seg_log,
)

# When set to a list, every tree-function solve appends (c_plus, w, T);
# used by the test suite to audit residuals at production evaluation points.
TREE_TRACE = None

_SIDE_ABOVE = ("above", "above_cut", "+")
_SIDE_BELOW = ("below", "below_cut", "-")


@dataclass(frozen=True)
class CutInfo:
    """Branch-cut endpoints and the rational pole of the transform."""

    sigma_minus: float
    sigma_plus: float
    pole: float


def cut_info(params: QueueParams) -> CutInfo:
    sr = math.sqrt(params.rho)
    sq = math.sqrt(1.0 - params.q)
    sigma_plus = -((sq - sr) ** 2)
    sigma_minus = -((sq + sr) ** 2)
    pole = -(params.rho + params.q * (1.0 - params.q)) / params.q
    return CutInfo(sigma_minus=sigma_minus, sigma_plus=sigma_plus, pole=pole)


@dataclass(frozen=True)
class SpectralBundle:
    """Per-s cache of the roots, exponents and derived quantities."""

    s: complex
    u_minus: complex
    u_plus: complex
    sqrt_delta: complex
    c_plus: complex
    c_minus: complex
    x_small: complex  # 1 - U-/U+

    @property
    def is_mp(self) -> bool:
        return is_mp(self.u_minus)


def poly_P(params: QueueParams, s, u):
    """The defining quadratic P(s; u) = u^2 - (1+rho+q+s) u + (q + q s + rho)."""
    return u * u - (1.0 + params.rho + params.q + s) * u + (params.q + params.q * s + params.rho)


def s_of_theta(params: QueueParams, theta):
    """Cut parametrization s(theta) = -1 + q - rho + 2 r cos(theta), theta in [0, pi]."""
    cos = mp.cos(theta) if is_mp(theta) else math.cos(theta)
    return -1.0 + params.q - params.rho + 2.0 * params.r * cos


def theta_of_s(params: QueueParams, s: float) -> float:
    """Inverse of s_of_theta for real s in [sigma-, sigma+]."""
    c = (s + 1.0 - params.q + params.rho) / (2.0 * params.r)
    c = min(1.0, max(-1.0, c))
    return math.acos(c)


def _finish_bundle(params: QueueParams, s, u_minus, u_plus, sqrt_delta) -> SpectralBundle:
    q = params.q
    if sqrt_delta == 0:
        inf = complex(math.inf, 0.0)
        return SpectralBundle(s, u_minus, u_plus, sqrt_delta, inf, inf, 0.0 * u_plus)
    c_plus = -(u_minus - q) / sqrt_delta
    c_minus = 1.0 - c_plus
    x_small = 1.0 - u_minus / u_plus
    return SpectralBundle(s, u_minus, u_plus, sqrt_delta, c_plus, c_minus, x_small)


def bundle_from_theta(params: QueueParams, theta, side: str = "above") -> SpectralBundle:
    """Bundle for the boundary point s(theta) +- 0i, built from the exact
    circle parametrization (no cancellation near the cut endpoints).

    Pass an mpmath theta to build the bundle in extended precision.
    """
    if is_mp(theta):
        r = mp.sqrt(mp.mpf(params.rho) * (1 - mp.mpf(params.q)))
        i_unit = mp.mpc(0, 1)
        e_plus = mp.cos(theta) + i_unit * mp.sin(theta)
    else:
        r = params.r
        e_plus = complex(math.cos(theta), math.sin(theta))
    if side in _SIDE_BELOW:
        e_plus = e_plus.conjugate()
    elif side not in _SIDE_ABOVE:
        raise ValueError(f"side must name a cut side, got {side!r}")
    u_plus = params.q + r * e_plus
    u_minus = params.q + r * e_plus.conjugate()
    s = u_plus + u_minus - (1.0 + params.rho + params.q)
    sqrt_delta = u_plus - u_minus
    return _finish_bundle(params, s, u_minus, u_plus, sqrt_delta)


def roots_U(params: QueueParams, s, side: str = "auto") -> SpectralBundle:
    """Roots U-(s), U+(s) with the cut-plane branch convention.

    For real s strictly inside the cut, `side` must select a boundary; the
    endpoints sigma+- themselves are unambiguous (double root).
    """
    ci = cut_info(params)
    s_re, s_im = float(re(s)), float(im(s))
    on_cut = s_im == 0.0 and ci.sigma_minus <= s_re <= ci.sigma_plus
    if on_cut:
        strictly_inside = ci.sigma_minus < s_re < ci.sigma_plus
        if side == "auto" and strictly_inside:
            raise BranchCutError(
                f"s={s_re} lies on the branch cut [{ci.sigma_minus:.6g}, {ci.sigma_plus:.6g}]; "
                "choose side='above' or side='below'"
            )
        theta = theta_of_s(params, s_re)
        if is_mp(s):
            theta = mp.mpf(theta)
        return bundle_from_theta(params, theta, side if side != "auto" else "above")
    # analytic extension off the cut: sqrt(delta) = sqrt(s - sigma+) sqrt(s - sigma-)
    sqrt_delta = c_sqrt(s - ci.sigma_plus) * c_sqrt(s - ci.sigma_minus)
    total = s + 1.0 + params.rho + params.q
    u_plus = 0.5 * (total + sqrt_delta)
    u_minus = 0.5 * (total - sqrt_delta)
    return _finish_bundle(params, s, u_minus, u_plus, sqrt_delta)


def _check_not_root(bundle: SpectralBundle, z, what: str):
    for u in (bundle.u_minus, bundle.u_plus):
        if abs(z - u) <= 1e-12 * (1.0 + abs(u)):
            raise DomainError(f"{what}={z} coincides with a root U of the quadratic")


def kernel_R(params: QueueParams, bundle: SpectralBundle, xi, branch_minus: int = 0, branch_plus: int = 0):
    """R(s; xi) = (1 - xi/U-)^(C- - 1) (1 - xi/U+)^(C+ - 1).

    Branch tags continue the argument of either base beyond the principal
    sheet; tag 0 is the principal evaluation.
    """
    _check_not_root(bundle, xi, "xi")
    bm = 1.0 - xi / bundle.u_minus
    bp = 1.0 - xi / bundle.u_plus
    return cpow(bm, bundle.c_minus - 1.0, branch_minus) * cpow(bp, bundle.c_plus - 1.0, branch_plus)


def kernel_frak_R(params: QueueParams, bundle: SpectralBundle, u, v,
                  tags_u=(0, 0), tags_v=(0, 0)):
    """Ratio R(s; v) / R(s; u)."""
    r_u = kernel_R(params, bundle, u, *tags_u)
    if r_u == 0:
        raise DomainError("R(s; u) vanishes; ratio undefined")
    return kernel_R(params, bundle, v, *tags_v) / r_u


def frak_R_cut(params: QueueParams, theta: float, zeta: float, t: float):
    """Boundary value of the ratio kernel on the open cut segment.

    Evaluates R(s;xi)/R(s;zeta) at s = s(theta)+0i for xi on the straight
    segment between the conjugate roots, xi = U- + t (U+ - U-), with both
    power bases continued from the real anchor zeta (principal arguments;
    neither difference ratio crosses the negative real axis in t).
    """
    if not (0.0 < t < 1.0):
        raise DomainError("t must lie strictly inside (0, 1)")
    b = bundle_from_theta(params, theta, "above")
    xi = b.u_minus + t * (b.u_plus - b.u_minus)
    for u_root in (b.u_minus, b.u_plus):
        if abs(zeta - u_root) <= 1e-12 * (1.0 + abs(u_root)):
            raise DomainError("zeta coincides with a root on the cut")
    lg = (b.c_minus - 1.0) * (c_log(xi - b.u_minus) - c_log(zeta - b.u_minus)) + (
        b.c_plus - 1.0
    ) * (c_log(xi - b.u_plus) - c_log(zeta - b.u_plus))
    return c_exp(lg)


def map_X(params: QueueParams, bundle: SpectralBundle, v):
    """X(s; v) = -U+ v / (P(s; v) R(s; v)), the transfer factor feeding the
    tree function; R is continued from xi=0 along the straight segment to v."""
    if v == 0:
        return 0.0 * bundle.u_plus
    p = poly_P(params, bundle.s, v)
    if abs(p) <= 1e-14 * (1.0 + abs(v) * abs(v)):
        raise DomainError(f"P(s; v) vanishes at v={v}")
    one = 1.0
    bm_end = 1.0 - v / bundle.u_minus
    bp_end = 1.0 - v / bundle.u_plus
    tag_m = affine_branch_tag(one, bm_end, 1.0)
    tag_p = affine_branch_tag(one, bp_end, 1.0)
    r_v = cpow(bm_end, bundle.c_minus - 1.0, tag_m) * cpow(bp_end, bundle.c_plus - 1.0, tag_p)
    return -bundle.u_plus * v / (p * r_v)


def polys_Q(params: QueueParams, bundle: SpectralBundle, v):
    """First- and second-order polynomial coefficients (Q0, Q1) at v."""
    prod = bundle.u_plus * bundle.u_minus
    tot = bundle.u_plus + bundle.u_minus
    q = params.q
    q0 = prod - q * v
    q1 = (q * q - prod) * v * v + 2.0 * prod * (tot - 2.0 * q) * v - prod * ((tot - q) ** 2 - prod)
    return q0, q1


def psi_maps(params: QueueParams, bundle: SpectralBundle, t):
    """The pair (Psi0, Psi1) driving the inner kernels:

    Psi0(t) = t (1-t) / (C+ t + 1 - C+)^3
    Psi1(t) = t (1-t) (1 - 2t - C+ (1 - t^2)) / (C+ t + 1 - C+)^5
    """
    cp = bundle.c_plus
    den = cp * t + 1.0 - cp
    if abs(den) <= 1e-13 * (1.0 + abs(cp * t)):
        raise DomainError("Psi denominator vanishes")
    den3 = den * den * den
    base = t * (1.0 - t)
    psi0 = base / den3
    psi1 = base * (1.0 - 2.0 * t - cp * (1.0 - t * t)) / (den3 * den * den)
    return psi0, psi1


# --------------------------------------------------------------------------
# Tree function: T solving 1 - T + w T^(1 - C+) = 0 with T(0) = 1.
# Solved in tau = log T so the power T^(1-C+) = exp((1-C+) tau) is
# single-valued; continuation along a w-path keeps the correct branch.
# --------------------------------------------------------------------------


def _tree_newton(c_plus, w, tau0, cfg: EvalConfig):
    """Newton iteration on g(tau) = 1 - e^tau + w e^(gamma tau), gamma = 1 - C+.

    Returns (tau, T, ok).
    """
    gamma = 1.0 - c_plus
    tau = tau0
    for _ in range(cfg.newton_max_iter):
        e_t = c_exp(tau)
        e_g = c_exp(gamma * tau)
        g = 1.0 - e_t + w * e_g
        if abs(g) <= cfg.newton_tol * max(1.0, abs(e_t)):
            return tau, e_t, True
        gp = -e_t + w * gamma * e_g
        if abs(gp) <= 1e-14 * (abs(e_t) + abs(w * gamma * e_g)):
            return tau, e_t, False  # near the branch point
        step = g / gp
        mag = abs(step)
        if mag > 1.5:
            step = step * (1.5 / mag)
        tau = tau - step
    return tau, c_exp(tau), False


def tree_series(c_plus, w, tol: float = 1e-16, max_terms: int = 80):
    """Direct series T = 1 + sum_n binom(n gamma, n-1) w^n / n, gamma = 1 - C+.

    Converges inside the branch-point radius; intended for |w| well below it.
    """
    gamma = 1.0 - c_plus
    total = 1.0 + 0.0 * w
    w_pow = 1.0 + 0.0 * w
    small_streak = 0
    for n in range(1, max_terms + 1):
        w_pow = w_pow * w
        a = n * gamma
        coeff = 1.0 + 0.0 * w
        for j in range(n - 1):
            coeff = coeff * (a - j) / (j + 1.0)
        term = coeff * w_pow / n
        total = total + term
        if abs(term) <= tol * max(1.0, abs(total)):
            small_streak += 1
            if small_streak >= 2:
                return total
        else:
            small_streak = 0
    raise SolverError(f"tree series did not converge for |w|={abs(w):.3e}")


class TreeSolver:
    """Path-continued evaluation of the tree function along w(t), t in [0, 1].

    Anchors (t, tau) accumulate as the quadrature visits nodes; each new node
    warm-starts Newton from the nearest anchor, bisecting the path parameter
    when a step looks like a branch jump.
    """

    _STEP_CAP = 1.0
    _MAX_DEPTH = 48

    def __init__(self, c_plus, w_of_t, cfg: EvalConfig = DEFAULT_CONFIG):
        self.c_plus = c_plus
        self.w_of_t = w_of_t
        self.cfg = cfg
        w0 = w_of_t(0.0)
        tau0 = _continue_from_zero(c_plus, w0, cfg)
        self._ts = [0.0]
        self._taus = [tau0]

    def _nearest(self, t: float):
        import bisect

        i = bisect.bisect_left(self._ts, t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self._ts):
                d = abs(self._ts[j] - t)
                if best is None or d < best[0]:
                    best = (d, j)
        return best[1]

    def _store(self, t: float, tau):
        import bisect

        i = bisect.bisect_left(self._ts, t)
        if i < len(self._ts) and self._ts[i] == t:
            return
        self._ts.insert(i, t)
        self._taus.insert(i, tau)

    def _advance(self, t_from: float, tau_from, t_to: float, depth: int = 0):
        w = self.w_of_t(t_to)
        tau, T, ok = _tree_newton(self.c_plus, w, tau_from, self.cfg)
        if ok and abs(tau - tau_from) <= self._STEP_CAP:
            self._store(t_to, tau)
            return tau
        if depth >= self._MAX_DEPTH:
            raise SolverError(
                f"tree continuation failed near t={t_to:.6g} "
                f"(residual path step too large after {depth} bisections)"
            )
        t_mid = 0.5 * (t_from + t_to)
        tau_mid = self._advance(t_from, tau_from, t_mid, depth + 1)
        return self._advance(t_mid, tau_mid, t_to, depth + 1)

    def value_at(self, t: float):
        """T at path parameter t (computes w(t) internally)."""
        j = self._nearest(t)
        tau = self._advance(self._ts[j], self._taus[j], t)
        T = c_exp(tau)
        if TREE_TRACE is not None:
            TREE_TRACE.append((self.c_plus, self.w_of_t(t), T))
        return T


def _continue_from_zero(c_plus, w_target, cfg: EvalConfig, depth: int = 0):
    """tau = log T at w_target, continued from (w=0, T=1) along the straight
    segment sigma -> sigma * w_target."""
    if w_target == 0:
        return 0.0 * (c_plus * 0.0)
    if abs(w_target) < 1e-3:
        T = tree_series(c_plus, w_target, tol=1e-18)
        tau, _, ok = _tree_newton(c_plus, w_target, c_log(T), cfg)
        if ok:
            return tau
    def walk(sigma_from, tau_from, sigma_to, d):
        w = sigma_to * w_target
        tau, T, ok = _tree_newton(c_plus, w, tau_from, cfg)
        if ok and abs(tau - tau_from) <= 1.0:
            return tau
        if d >= 60:
            raise SolverError("tree continuation from w=0 failed")
        mid = 0.5 * (sigma_from + sigma_to)
        tau_mid = walk(sigma_from, tau_from, mid, d + 1)
        return walk(mid, tau_mid, sigma_to, d + 1)

    zero = 0.0 * (c_plus * 0.0)
    return walk(0.0, zero, 1.0, 0)


def tree_T(params: QueueParams, bundle: SpectralBundle, w, cfg: EvalConfig = DEFAULT_CONFIG):
    """Tree function T(s; w): the root of 1 - T + w T^(1 - C+) = 0 continued
    from T(s; 0) = 1 along the straight segment from 0 to w.

    Seeded from the two-term series 1 + w; for |w| < 1e-3 the full series is
    used as the seed and Newton polishes it to the residual tolerance.
    """
    tau = _continue_from_zero(bundle.c_plus, w, cfg)
    T = c_exp(tau)
    if TREE_TRACE is not None:
        TREE_TRACE.append((bundle.c_plus, w, T))
    return T


def tree_residual(bundle_or_cplus, w, T):
    """Residual of the defining equation at (w, T) (log-free check)."""
    cp = bundle_or_cplus.c_plus if isinstance(bundle_or_cplus, SpectralBundle) else bundle_or_cplus
    return 1.0 - T + w * cpow(T, 1.0 - cp)
