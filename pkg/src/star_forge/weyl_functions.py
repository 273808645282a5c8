"""Weyl continuation f -> f(z + Z) and recapture of the base star product."""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .algebra import SymplecticFrame, WeylSeries, moyal_product
from .errors import ShapeError


def base_polynomial(dim_n, terms):
    """Series in z (and even powers of nu) from ``{(nu_power, base_exp): coeff}``."""
    zero = (0,) * (2 * dim_n)
    return WeylSeries(dim_n, None, [((nu, zero, tuple(e), 0), c) for (nu, e), c in terms.items()])


def is_base_polynomial(f: WeylSeries) -> bool:
    return not f.has_fiber() and not f.has_forms()


def weyl_continuation(f: WeylSeries, frame: SymplecticFrame = None, trunc_N=None) -> WeylSeries:
    """Taylor shift: each z^a becomes prod_i (z^i + Z^i)^{a_i}.

    Fiber terms already present in ``f`` are kept (the shift acts on base exponents).
    """
    if frame is not None and frame.dim_n != f.dim_n:
        from .errors import DimensionMismatch
        raise DimensionMismatch("frame and series dimensions differ")
    width = 2 * f.dim_n
    acc = {}
    for (nu, fib, base, mask), c in f.items():
        # expand prod_i sum_k C(a_i, k) z^{a_i-k} Z^k
        partial = [((), (), Fraction(c))]
        for i in range(width):
            a = base[i]
            nxt = []
            for fz, bz, cc in partial:
                for k in range(a + 1):
                    nxt.append((fz + (fib[i] + k,), bz + (a - k,), cc * comb(a, k)))
            partial = nxt
        for fz, bz, cc in partial:
            key = (nu, fz, bz, mask)
            acc[key] = acc.get(key, 0) + cc
    N = trunc_N if trunc_N is not None else f.trunc_N
    return WeylSeries._raw(f.dim_n, N, acc)


def sharp(f, frame=None, trunc_N=None):
    return weyl_continuation(f, frame, trunc_N)


def weyl_inverse(section: WeylSeries) -> WeylSeries:
    """Undo the continuation by setting Z = 0, after checking the shape."""
    base = section.fiber_free().truncate(None)
    if weyl_continuation(base, trunc_N=section.trunc_N) != section:
        raise ShapeError("section is not the Weyl continuation of its Z = 0 part")
    return base


def _fiber_room(f, g):
    # every fiber contraction lowers d by 2 and raises nu by 1; keep enough room
    total = sum(max((2 * k[0] + sum(k[2]) for k in s._terms), default=0) for s in (f, g))
    return total


def recaptured_star(f: WeylSeries, g: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """f * g = #^{-1}(#f *fiber #g) for base polynomials."""
    if not (is_base_polynomial(f) and is_base_polynomial(g)):
        raise ValueError("recaptured_star expects base polynomials")
    N = _fiber_room(f, g)
    product = moyal_product(weyl_continuation(f, frame, N), weyl_continuation(g, frame, N), frame)
    return weyl_inverse(product)


def base_moyal(f: WeylSeries, g: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """Moyal product taken directly in the base variables (z and Z swapped through the kernel)."""
    fs = f.swap_base_fiber()
    gs = g.swap_base_fiber()
    return moyal_product(fs, gs, frame).swap_base_fiber()
