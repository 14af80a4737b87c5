"""Complex elementary functions with explicit branch bookkeeping.

Works transparently on builtin float/complex and on mpmath mpf/mpc, so the
same kernel code can run in double or extended precision.  Powers z**a with
complex exponents are evaluated as exp(a * (log|z| + i arg z + 2*pi*i*k));
the winding integer k is tracked explicitly when a base moves along a path
that crosses the negative real axis.
"""
from __future__ import annotations

import cmath
import math

import mpmath as mp

TWO_PI = 2.0 * math.pi

_MP_TYPES = (mp.mpf, mp.mpc)


def is_mp(*zs) -> bool:
    return any(isinstance(z, _MP_TYPES) for z in zs)


def c_exp(z):
    return mp.exp(z) if is_mp(z) else cmath.exp(complex(z))


def c_log(z):
    """Principal logarithm."""
    return mp.log(z) if is_mp(z) else cmath.log(complex(z))


def c_sqrt(z):
    """Principal square root."""
    return mp.sqrt(z) if is_mp(z) else cmath.sqrt(complex(z))


def re(z):
    if is_mp(z):
        return z.real if isinstance(z, mp.mpc) else z
    return complex(z).real


def im(z):
    if is_mp(z):
        return z.imag if isinstance(z, mp.mpc) else mp.mpf(0)
    return complex(z).imag


def c_arg(z):
    return mp.arg(z) if is_mp(z) else cmath.phase(complex(z))


def make_i(like):
    """The imaginary unit in the numeric type of `like`."""
    return mp.mpc(0, 1) if is_mp(like) else 1j


def to_float_complex(z) -> complex:
    return complex(float(re(z)), float(im(z)))


def cpow(z, a, branch_tag: int = 0):
    """z**a on the branch `branch_tag` (0 = principal).

    Evaluated as exp(a * (Log z + 2*pi*i*branch_tag)) so complex exponents
    stay continuous when the caller unwinds the argument along a path.
    """
    if z == 0:
        if re(a) > 0:
            return mp.mpc(0) if is_mp(z, a) else 0j
        raise ZeroDivisionError("0 raised to a power with non-positive real part")
    lg = c_log(z)
    if branch_tag:
        lg = lg + make_i(lg) * (TWO_PI * branch_tag)
    return c_exp(a * lg)


def segment_crossing(z0, z1):
    """Parameter t* in (0, 1] where t -> z0 + t (z1 - z0) crosses (-inf, 0).

    Returns (t_star, direction) or None.  direction is -1 when the crossing
    is upward (Im goes - to +, continuous argument passes through -pi, so
    the branch tag decreases) and +1 for a downward crossing.
    """
    y0 = float(im(z0))
    y1 = float(im(z1))
    if y0 == y1:
        return None
    t = y0 / (y0 - y1)
    if not (0.0 < t <= 1.0):
        return None
    x = float(re(z0)) + t * (float(re(z1)) - float(re(z0)))
    if x >= 0.0:
        return None
    return t, (-1 if y1 > y0 else 1)


def affine_branch_tag(z0, z1, t: float, tag0: int = 0) -> int:
    """Branch tag of the affine path z0 + t (z1 - z0), continued from tag0 at t=0."""
    hit = segment_crossing(z0, z1)
    if hit is None or t < hit[0]:
        return tag0
    return tag0 + hit[1]


def seg_pow(z0, z1, t: float, a, tag0: int = 0):
    """(z0 + t (z1 - z0))**a with the argument continued from t=0."""
    z = z0 + t * (z1 - z0)
    return cpow(z, a, affine_branch_tag(z0, z1, t, tag0))


def seg_log(z0, z1, t: float, tag0: int = 0):
    """Continuously-continued log of the affine path (value + unwound arg)."""
    z = z0 + t * (z1 - z0)
    tag = affine_branch_tag(z0, z1, t, tag0)
    lg = c_log(z)
    if tag:
        lg = lg + make_i(lg) * (TWO_PI * tag)
    return lg
