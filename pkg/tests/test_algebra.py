import os
import random
import subprocess
import sys
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from conftest import NU, degree_cut, fiber_symbols, frame_for, moyal_oracle, random_fiber_series, to_sympy
from star_forge import _moyal_py
from star_forge.algebra import (
    MINUS_INFINITY,
    SymplecticFrame,
    WeylSeries,
    graded_commutator,
    involution,
    moyal_product,
    nu_bracket,
    star_commutator,
    total_degree,
    truncate,
)
from star_forge.errors import DimensionMismatch, FrameError, TruncationMismatch

W = WeylSeries


def Z(n, i, N=None):
    return W.fiber_var(n, i, N)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ccr_all_pairs(n, convention):
    frame = frame_for(convention, n)
    for i in range(2 * n):
        for j in range(2 * n):
            got = star_commutator(Z(n, i, 4), Z(n, j, 4), frame)
            assert got == W.nu(n, 1, 4).scale(frame.lam[i][j])


def test_conventions_are_opposite():
    a = SymplecticFrame.minus(1)
    b = SymplecticFrame.plus(1)
    assert a.lam[0][1] == -1 and b.lam[0][1] == 1
    assert [list(r) for r in a.omega] == [[0, 1], [-1, 0]]


def test_fiber_squares_against_oracle():
    frame = SymplecticFrame.minus(1)
    a = W.monomial(1, fiber=(2, 0), trunc_N=8)
    b = W.monomial(1, fiber=(0, 2), trunc_N=8)
    got = to_sympy(moyal_product(a, b, frame))
    Z1, Z2 = fiber_symbols(1)
    want = moyal_oracle(Z1 ** 2, Z2 ** 2, frame.lam, 1, 4)
    assert sp.expand(got - want) == 0
    # hand expansion over k = 0, 1, 2 with lam^{12} = -1
    assert sp.expand(got - (Z1 ** 2 * Z2 ** 2 - 2 * NU * Z1 * Z2 + NU ** 2 / 2)) == 0


def test_commutator_with_square_against_oracle():
    frame = SymplecticFrame.minus(1)
    got = to_sympy(star_commutator(Z(1, 0, 6), W.monomial(1, fiber=(0, 2), trunc_N=6), frame))
    Z1, Z2 = fiber_symbols(1)
    want = moyal_oracle(Z1, Z2 ** 2, frame.lam, 1, 2) - moyal_oracle(Z2 ** 2, Z1, frame.lam, 1, 2)
    assert sp.expand(got - want) == 0
    assert sp.expand(got - 2 * NU * frame.lam[0][1] * Z2) == 0


@pytest.mark.parametrize("n", [1, 2])
def test_random_products_against_oracle(n, rng, convention):
    frame = frame_for(convention, n)
    N = 8
    for _ in range(6):
        f = random_fiber_series(rng, n, 3, N)
        g = random_fiber_series(rng, n, 3, N)
        got = to_sympy(moyal_product(f, g, frame))
        want = degree_cut(moyal_oracle(to_sympy(f), to_sympy(g), frame.lam, n, 6), n, N)
        assert sp.expand(got - want) == 0


def test_nu_central_and_unit(rng):
    frame = SymplecticFrame.minus(2)
    f = random_fiber_series(rng, 2, 4, 8)
    assert star_commutator(Z(2, 1, 8), W.nu(2, 1, 8), frame).is_zero()
    one = W.constant(2, 1, 8)
    assert moyal_product(f, one, frame) == f
    assert moyal_product(one, f, frame) == f


@given(st.integers(0, 10 ** 6))
def test_associativity_property(seed):
    rng = random.Random(seed)
    n = rng.choice([1, 2])
    frame = SymplecticFrame.named(rng.choice(["minus", "plus"]), n)
    f, g, h = (random_fiber_series(rng, n, 3, 8) for _ in range(3))
    assert moyal_product(moyal_product(f, g, frame), h, frame) == moyal_product(f, moyal_product(g, h, frame), frame)


@given(st.integers(0, 10 ** 6))
def test_commutator_antisymmetric(seed):
    rng = random.Random(seed)
    frame = SymplecticFrame.minus(1)
    f, g = (random_fiber_series(rng, 1, 4, 8) for _ in range(2))
    assert star_commutator(f, g, frame) == -star_commutator(g, f, frame)
    assert star_commutator(f, f, frame).is_zero()


@given(st.integers(0, 10 ** 6))
def test_involution_reverses_products(seed):
    rng = random.Random(seed)
    frame = SymplecticFrame.minus(1)
    f, g = (random_fiber_series(rng, 1, 3, 8) for _ in range(2))
    assert involution(involution(f)) == f
    assert involution(moyal_product(f, g, frame)) == moyal_product(involution(g), involution(f), frame)


def test_involution_examples():
    frame = SymplecticFrame.minus(1)
    assert involution(W.nu(1)) == W.nu(1).scale(-1)
    lhs = involution(moyal_product(Z(1, 0, 4), Z(1, 1, 4), frame))
    rhs = moyal_product(involution(Z(1, 1, 4)), involution(Z(1, 0, 4)), frame)
    assert lhs == rhs


def test_degree_and_truncate():
    assert total_degree(W.monomial(1, nu=2, fiber=(1, 0))) == 5
    assert total_degree(W.constant(1, 1)) == 0
    assert total_degree(W.monomial(1, nu=1, fiber=(3, 0)) + Z(1, 1)) == 5
    assert total_degree(W.zero(1)) == MINUS_INFINITY
    f = W.nu(1, 2) + Z(1, 0)
    assert truncate(f, 1) == Z(1, 0).truncate(1)
    assert truncate(f, total_degree(f)).terms == f.terms


def test_errors():
    frame = SymplecticFrame.minus(1)
    with pytest.raises(DimensionMismatch):
        moyal_product(Z(1, 0), Z(2, 0), frame)
    with pytest.raises(TruncationMismatch):
        moyal_product(Z(1, 0, 4), Z(1, 0, 6), frame)
    with pytest.raises(FrameError):
        SymplecticFrame([[0, 0], [0, 0]])


def test_canonical_text():
    f = W.monomial(1, Fraction(3, 2), nu=2, base=(3, 0)) + W.monomial(1, -2, fiber=(0, 1), forms=(0,))
    assert f.canonical_text() == "-2 * Z2 * dz1 + 3/2 * nu^2 * z1^3"


def test_graded_commutator_signs():
    frame = SymplecticFrame.minus(1)
    a = W.dz(1, 0).pointwise(Z(1, 0))
    b = W.dz(1, 1).pointwise(Z(1, 1))
    # two odd elements: graded commutator is the anticommutator
    got = graded_commutator(a, b, frame)
    want = moyal_product(a, b, frame) + moyal_product(b, a, frame)
    assert got == want
    # nu_bracket divides by nu exactly
    assert nu_bracket(Z(1, 0), Z(1, 1), frame) == W.constant(1, frame.lam[0][1])


def test_kernels_agree(rng):
    from star_forge import kernel
    frame = SymplecticFrame.minus(2)
    tables = frame.moyal_tables(4)
    for _ in range(10):
        f = random_fiber_series(rng, 2, 4, 10)
        g = random_fiber_series(rng, 2, 4, 10)
        items = lambda s: [(k[0], k[1], k[2], k[3], c) for k, c in s.items()]
        assert kernel.moyal_terms(items(f), items(g), tables, 10) == _moyal_py.moyal_terms(items(f), items(g), tables, 10)


def test_pure_backend_switch():
    env = dict(os.environ, STAR_FORGE_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import star_forge; print(star_forge.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
