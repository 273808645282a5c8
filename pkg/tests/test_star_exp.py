import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from conftest import random_symmetric
from star_forge.algebra import WeylSeries
from star_forge.errors import SingularityError
from star_forge.linalg import matmul, transpose
from star_forge.star_exp import (
    amplitude_series,
    cayley,
    cayley_inv,
    evolution_defect,
    exp_frame,
    phase_series,
    quadratic_form,
    riccati_closed,
    riccati_solve,
    star_exp_closed,
    star_exp_taylor,
)

W = WeylSeries
I2 = [[1, 0], [0, 1]]


def test_low_orders():
    T = star_exp_taylor(I2, 0)
    assert T.coeffs == [W.constant(1, 1, 0)]
    T = star_exp_taylor(I2, 1)
    # mu * (A[Z]/mu) = A[Z]
    assert T.coeffs[1] == quadratic_form(I2, 2)
    zero = [[0, 0], [0, 0]]
    C = star_exp_closed(zero, 4)
    assert C.coeffs[0] == W.constant(1, 1, 8)
    assert all(c.is_zero() for c in C.coeffs[1:])


def test_routes_agree_identity():
    assert (star_exp_taylor(I2, 5) - star_exp_closed(I2, 5)).is_zero()


@given(st.integers(0, 10 ** 6))
def test_routes_agree_random(seed):
    rng = random.Random(seed)
    A = random_symmetric(rng, 2)
    assert (star_exp_taylor(A, 4) - star_exp_closed(A, 4)).is_zero()


def test_evolution_equation(rng):
    A = random_symmetric(rng, 4)
    assert evolution_defect(star_exp_closed(A, 3), A).is_zero()


def test_amplitude_against_sympy():
    # det(cosh(t a))^{-1/2} for a = lam A, expanded by sympy
    A = sp.Matrix([[1, sp.Rational(1, 2)], [sp.Rational(1, 2), 2]])
    lam = sp.Matrix(exp_frame(1).lam)
    a = lam * A
    t = sp.Symbol("t")
    cosh = ((a * t).exp() + (-a * t).exp()) / 2
    expr = sp.series(cosh.det() ** sp.Rational(-1, 2), t, 0, 7).removeO()
    want = [sp.nsimplify(sp.simplify(expr.coeff(t, k))) for k in range(7)]
    got = amplitude_series([[Fraction(str(v)) for v in row] for row in a.tolist()], 6)
    assert [sp.Rational(g.numerator, g.denominator) for g in got] == want


def test_phase_against_sympy():
    A = sp.Matrix([[2, 1], [1, -1]])
    lam = sp.Matrix(exp_frame(1).lam)
    a = lam * A
    t = sp.Symbol("t")
    cosh = ((a * t).exp() + (-a * t).exp()) / 2
    sinh = ((a * t).exp() - (-a * t).exp()) / 2
    Q = lam.inv() * sinh * cosh.inv()
    got = phase_series([[Fraction(int(v)) for v in row] for row in a.tolist()], exp_frame(1).lam, 5)
    for i in range(2):
        for j in range(2):
            ser = sp.series(sp.simplify(Q[i, j]), t, 0, 6).removeO()
            for k in range(6):
                assert sp.nsimplify(sp.simplify(ser.coeff(t, k))) == got[k][i][j]


def _random_sp(rng, n):
    lam = exp_frame(n).lam
    S = random_symmetric(rng, 2 * n, -2, 2)
    return matmul([list(r) for r in lam], S)


def test_cayley_examples(rng):
    assert cayley([[0, 0], [0, 0]]) == [[1, 0], [0, 1]]
    for n in (1, 2, 3):
        lam = [list(r) for r in exp_frame(n).lam]
        X = _random_sp(rng, n)
        C = cayley(X)
        assert matmul(matmul(transpose(C), lam), C) == lam
        assert cayley_inv(C) == X
    with pytest.raises(SingularityError):
        cayley([[-1, 0], [0, 1]])


def test_riccati_stationary():
    B = [[1, 0], [0, 0]]
    ts, qs, gs = riccati_solve([[0, 0], [0, 0]], B, 1.0, 50)
    lamB = np.array(exp_frame(1).lam, dtype=float) @ np.array(B, dtype=float)
    assert np.allclose(qs, lamB) and np.allclose(gs, 1.0)


def test_riccati_matches_closed_form(rng):
    for _ in range(3):
        A = [[float(v) for v in row] for row in random_symmetric(rng, 2, -1, 1)]
        ts, qs, gs = riccati_solve(A, [[0, 0], [0, 0]], 0.5, 1000)
        qc, gc = riccati_closed(A, [[0, 0], [0, 0]], 0.5)
        assert np.abs(qs[-1] - qc).max() < 1e-8 and abs(gs[-1] - gc) < 1e-8


def test_riccati_blowup_reports_time():
    # A = identity: a = lam is a rotation generator, det M(t) = cos(t)^2 vanishes at t = pi/2
    with pytest.raises(SingularityError) as info:
        riccati_solve(I2, [[0, 0], [0, 0]], 3.0, 3000)
    assert abs(info.value.t_critical - np.pi / 2) < 1e-2
