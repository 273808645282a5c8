import random
from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import sympy as sp
from hypothesis import settings

from star_forge.algebra import SymplecticFrame, WeylSeries, nu_bracket

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


NU = sp.Symbol("nu")


def fiber_symbols(n):
    return sp.symbols(f"Z1:{2 * n + 1}")


def base_symbols(n):
    return sp.symbols(f"z1:{2 * n + 1}")


def to_sympy(series):
    """Form-free series as a sympy polynomial in nu, z, Z."""
    n = series.dim_n
    Z = fiber_symbols(n)
    z = base_symbols(n)
    out = sp.Integer(0)
    for (nu, fib, base, mask), c in series.items():
        assert mask == 0
        term = sp.Rational(c.numerator, c.denominator) * NU ** nu
        for v, e in zip(Z, fib):
            term *= v ** e
        for v, e in zip(z, base):
            term *= v ** e
        out += term
    return sp.expand(out)


def moyal_oracle(f, g, lam, n, order):
    """f exp[(nu/2) <-d lam ->d] g by doubling the variables, independent of the product tables."""
    Z = fiber_symbols(n)
    Y = sp.symbols(f"Y1:{2 * n + 1}")
    h = sp.expand(f * g.subs(dict(zip(Z, Y)), simultaneous=True))
    total = h
    term = h
    for k in range(1, order + 1):
        nxt = sp.Integer(0)
        for i in range(2 * n):
            for j in range(2 * n):
                if lam[i][j]:
                    nxt += sp.Rational(lam[i][j]) * sp.diff(term, Z[i], Y[j])
        term = sp.expand(nxt * NU / 2 / k)
        total += term
    return sp.expand(total.subs(dict(zip(Y, Z)), simultaneous=True))


def degree_cut(expr, n, N):
    """Drop terms of total degree 2l + |fiber| > N."""
    Z = fiber_symbols(n)
    poly = sp.Poly(expr, NU, *Z, *base_symbols(n))
    out = sp.Integer(0)
    for monom, c in poly.terms():
        if 2 * monom[0] + sum(monom[1:1 + 2 * n]) <= N:
            out += c * sp.Mul(*[v ** e for v, e in zip((NU, *Z, *base_symbols(n)), monom)])
    return sp.expand(out)


def random_fiber_series(rng, n, max_deg, N, terms=4, nu_max=1, base=False):
    width = 2 * n
    acc = {}
    for _ in range(terms):
        fib = [0] * width
        for _ in range(rng.randint(0, max_deg)):
            fib[rng.randrange(width)] += 1
        b = tuple(rng.randint(0, 1) for _ in range(width)) if base else (0,) * width
        key = (rng.randint(0, nu_max), tuple(fib), b, 0)
        acc[key] = Fraction(rng.randint(-4, 4), rng.randint(1, 3))
    return WeylSeries(n, N, acc)


def random_base_poly(rng, n, max_deg, terms=3):
    width = 2 * n
    acc = {}
    for _ in range(terms):
        b = [0] * width
        for _ in range(rng.randint(0, max_deg)):
            b[rng.randrange(width)] += 1
        acc[(0, (0,) * width, tuple(b), 0)] = Fraction(rng.randint(-3, 3), rng.randint(1, 2))
    return WeylSeries(n, None, acc)


def random_symmetric(rng, size, lo=-3, hi=3):
    A = [[Fraction(0)] * size for _ in range(size)]
    for i in range(size):
        for j in range(i, size):
            A[i][j] = A[j][i] = Fraction(rng.randint(lo, hi), rng.randint(1, 3))
    return A


def _bernoulli(k):
    return Fraction(sp.bernoulli(k).p, sp.bernoulli(k).q) if k != 1 else Fraction(-1, 2)


def ode_oracle(coeffs, steps=400):
    """RK4 for Y' = sum_k B_k/k! ad_Y^k X(t), Y(0) = 0, in float coordinates on the closed span."""
    frame = coeffs[0].frame
    cut = coeffs[0].trunc_N + 1
    n = frame.dim_n
    keys = []
    index = {}

    def add_keys(s):
        for k in s.terms:
            if k not in index:
                index[k] = len(keys)
                keys.append(k)

    for c in coeffs:
        add_keys(c.series)
    # close the span under brackets
    table = {}
    changed = True
    while changed:
        changed = False
        for a in list(keys):
            for b in list(keys):
                if (a, b) in table:
                    continue
                ea = WeylSeries(n, cut, {a: 1})
                eb = WeylSeries(n, cut, {b: 1})
                br = nu_bracket(ea, eb, frame)
                table[(a, b)] = br
                before = len(keys)
                add_keys(br)
                changed |= len(keys) != before
    dim = len(keys)
    struct = np.zeros((dim, dim, dim))
    for (a, b), br in table.items():
        for k, c in br.terms.items():
            struct[index[a], index[b], index[k]] = float(c)
    X = [np.zeros(dim) for _ in coeffs]
    for j, c in enumerate(coeffs):
        for k, v in c.series.terms.items():
            X[j][index[k]] = float(v)

    def ad(Y, V):
        return np.einsum("a,b,abk->k", Y, V, struct)

    weights = [float(_bernoulli(k)) / factorial(k) for k in range(2 * cut + 2)]

    def rhs(t, Y):
        V = sum(Xj * t ** j for j, Xj in enumerate(X))
        out = V.copy()
        term = V
        for k in range(1, len(weights)):
            term = ad(Y, term)
            if not term.any():
                break
            out = out + weights[k] * term
        return out

    Y = np.zeros(dim)
    h = 1.0 / steps
    for s in range(steps):
        t = s * h
        k1 = rhs(t, Y)
        k2 = rhs(t + h / 2, Y + h / 2 * k1)
        k3 = rhs(t + h / 2, Y + h / 2 * k2)
        k4 = rhs(t + h, Y + h * k3)
        Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return {k: Y[i] for i, k in enumerate(keys)}


@pytest.fixture
def rng():
    return random.Random(20240917)


@pytest.fixture(params=["minus", "plus"])
def convention(request):
    return request.param


def frame_for(convention, n):
    return SymplecticFrame.named(convention, n)
