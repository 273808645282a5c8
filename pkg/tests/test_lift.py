import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import NU, fiber_symbols, moyal_oracle, random_base_poly, to_sympy
from star_forge.algebra import SymplecticFrame, WeylSeries
from star_forge.errors import NotSymplectic, Unsupported
from star_forge.fedosov import symplectic_one_form
from star_forge.group import GroupExponent, random_symplectic
from star_forge.lift import (
    LinearLift,
    PolySymplectomorphism,
    ad_exp_series_raw,
    apply_corrections,
    ccr_defect,
    ccr_repair,
    check_symplectic,
    closedness_audit,
    contact_h0,
    defect_is_zero,
    lift_compose_cocycle,
    mcw_lift_solve,
    mcw_residual,
    radial_homotopy,
)
from star_forge.linalg import inverse, matmul

W = WeylSeries
F1 = SymplecticFrame.minus(1)
F2 = SymplecticFrame.minus(2)


def xy():
    return W.base_var(1, 0), W.base_var(1, 1)


def composed_shears(q_power, p_power):
    x, y = xy()
    inner = y + x.power(p_power)
    return [x + inner.power(q_power), inner]


def four_dim_map():
    x1, x2, y1, y2 = (W.base_var(2, i) for i in range(4))
    Y1 = y1 + x1.power(2).pointwise(x2).scale(3) + x1.power(3)
    Y2 = y2 + x1.power(3)
    return [x1 + Y1.power(3) + Y2.power(3), x2 + Y1.pointwise(Y2.power(2)).scale(3), Y1, Y2]


def commutator_oracle(comps, s, t, lam, n):
    """nu-expansion of [phi^s, phi^t] for base polynomials via the doubling oracle."""
    Z = fiber_symbols(n)
    z = sp.symbols(f"z1:{2 * n + 1}")
    f = to_sympy(comps[s]).subs(dict(zip(z, Z)), simultaneous=True)
    g = to_sympy(comps[t]).subs(dict(zip(z, Z)), simultaneous=True)
    order = 12
    comm = moyal_oracle(f, g, lam, n, order) - moyal_oracle(g, f, lam, n, order)
    return sp.expand(comm.subs(dict(zip(Z, z)), simultaneous=True))


def exterior_derivative_oracle(form, n):
    """d of a 2-form given as a series with dz masks, via sympy partials; returns dict of 3-form coefficients."""
    z = sp.symbols(f"z1:{2 * n + 1}")
    comps = {}
    for (nu, fib, base, mask), c in form.items():
        idx = tuple(i for i in range(2 * n) if mask >> i & 1)
        term = sp.Rational(c.numerator, c.denominator) * sp.Mul(*[v ** e for v, e in zip(z, base)])
        comps[idx] = comps.get(idx, 0) + term
    out = {}
    for (i, j), coeff in comps.items():
        for k in range(2 * n):
            if k in (i, j):
                continue
            order = [k, i, j]
            sign = 1
            for a in range(3):
                for b in range(2 - a):
                    if order[b] > order[b + 1]:
                        order[b], order[b + 1] = order[b + 1], order[b]
                        sign = -sign
            key = tuple(order)
            out[key] = sp.expand(out.get(key, 0) + sign * sp.diff(coeff, z[k]))
    return {k: v for k, v in out.items() if v != 0}


# --- symplecticity -----------------------------------------------------------------------------


def test_check_symplectic_examples():
    x, y = xy()
    assert check_symplectic([x, y], F1)["passed"]
    assert check_symplectic([x, y + x.power(2)], F1)["passed"]
    rep = check_symplectic([x.scale(2), y], F1)
    assert not rep["passed"] and rep["violations"] == [(1, 2)]
    assert check_symplectic(four_dim_map(), F2)["passed"]


def test_non_symplectic_rejected():
    x, y = xy()
    with pytest.raises(NotSymplectic):
        ccr_defect([x.scale(2), y], 5, F1)


# --- defects -----------------------------------------------------------------------------------


def test_linear_and_single_shear_have_no_defect():
    x, y = xy()
    lin = PolySymplectomorphism.linear([[1, 2], [0, 1]], F1).components
    assert defect_is_zero(ccr_defect(lin, 7, F1))
    assert defect_is_zero(ccr_defect([x, y + x.power(3)], 7, F1))
    assert ccr_repair(lin, 7, F1) == {}


def test_defect_values_match_oracle():
    comps = composed_shears(3, 3)
    table = ccr_defect(comps, 7, F1)
    full = commutator_oracle(comps, 0, 1, F1.lam, 1)
    for order, row in table.items():
        assert sp.expand(to_sympy(row[(0, 1)]) - full.coeff(NU, order)) == 0
    assert sp.expand(full.coeff(NU, 3)) == sp.Rational(3, 2)


def test_quadratic_composition_has_no_cubic_defect():
    # for (x + q(y + p(x)), y + p(x)) the nu^3 term is proportional to q''' p''';
    # with q(u) = u^2, p(x) = x^2 both routes give zero
    comps = composed_shears(2, 2)
    assert ccr_defect(comps, 3, F1)[3][(0, 1)].is_zero()
    assert commutator_oracle(comps, 0, 1, F1.lam, 1).coeff(NU, 3) == 0


def test_closedness_four_dim():
    comps = four_dim_map()
    row = ccr_defect(comps, 3, F2)[3]
    assert not all(p.is_zero() for p in row.values())
    form, closed = closedness_audit(row, comps, F2)
    assert closed
    assert not form.is_zero()
    assert exterior_derivative_oracle(form, 2) == {}


def test_exterior_oracle_detects_non_closed():
    x1 = W.base_var(2, 0)
    form = x1.pointwise(W.dz(2, 1)).pointwise(W.dz(2, 2))
    assert exterior_derivative_oracle(form, 2) != {}


def gradient_shear(rng, n, conj):
    """(x, y + grad S(x)) or (x + grad T(y), y) for a random quartic generating function."""
    x = [W.base_var(n, i) for i in range(n)]
    y = [W.base_var(n, n + i) for i in range(n)]
    src = y if conj else x
    S = W.zero(n)
    for _ in range(3):
        m = W.constant(n, Fraction(rng.randint(-2, 2), rng.randint(1, 2)))
        for _ in range(4):
            m = m.pointwise(rng.choice(src))
        S = S + m
    comps = x + y
    for i in range(n):
        if conj:
            comps[i] = comps[i] + S.base_derivative(n + i)
        else:
            comps[n + i] = comps[n + i] + S.base_derivative(i)
    return comps


def compose(outer, inner):
    return [c.substitute_base(inner, forms=False) for c in outer]


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6), st.sampled_from([1, 2]))
def test_closedness_on_random_shear_compositions(seed, n):
    rng = random.Random(seed)
    frame = SymplecticFrame.minus(n)
    comps = compose(gradient_shear(rng, n, True), gradient_shear(rng, n, False))
    assert check_symplectic(comps, frame)["passed"]
    for order, row in ccr_defect(comps, 5, frame).items():
        form, closed = closedness_audit(row, comps, frame)
        assert closed
        assert exterior_derivative_oracle(form, n) == {}


def test_random_shear_battery_is_not_trivial():
    hits = 0
    for seed in range(10):
        rng = random.Random(seed)
        n = 1 + seed % 2
        comps = compose(gradient_shear(rng, n, True), gradient_shear(rng, n, False))
        row = ccr_defect(comps, 3, SymplecticFrame.minus(n))[3]
        hits += any(not p.is_zero() for p in row.values())
    assert hits >= 5


def test_repair_then_next_odd_order_only():
    comps = composed_shears(3, 3)
    fixed = apply_corrections(comps, ccr_repair(comps, 3, F1))
    table = ccr_defect(fixed, 7, F1, check=False)
    assert all(p.is_zero() for p in table[3].values())
    assert not table[5][(0, 1)].is_zero()


def test_radial_homotopy_is_primitive():
    from star_forge.fedosov import d_base
    comps = four_dim_map()
    form, _ = closedness_audit(ccr_defect(comps, 3, F2)[3], comps, F2)
    assert d_base(radial_homotopy(form)) == form


def test_repair_one_dim():
    comps = composed_shears(3, 3)
    corr = ccr_repair(comps, 5, F1)
    assert set(corr) <= {2, 4}
    fixed = apply_corrections(comps, corr)
    table = ccr_defect(fixed, 5, F1, check=False)
    assert defect_is_zero(table)
    # corrections are genuine: the nu^3 defect was there before
    assert not ccr_defect(comps, 3, F1)[3][(0, 1)].is_zero()


def test_repair_four_dim():
    comps = four_dim_map()
    corr = ccr_repair(comps, 3, F2)
    assert defect_is_zero(ccr_defect(apply_corrections(comps, corr), 3, F2, check=False))


# --- MCW lift equation -------------------------------------------------------------------------


def test_mcw_identity():
    G = symplectic_one_form(F1)
    phi = PolySymplectomorphism.linear([[1, 0], [0, 1]], F1)
    F = mcw_lift_solve(phi, G, 7, F1)
    assert F.is_zero()


@pytest.mark.parametrize("M, fiber, coeff", [
    ([[1, 0], [2, 1]], (2, 0), -1),
    ([[1, Fraction(1, 3)], [0, 1]], (0, 2), Fraction(1, 6)),
])
def test_mcw_shears(M, fiber, coeff):
    G = symplectic_one_form(F1)
    phi = PolySymplectomorphism.linear(M, F1)
    F = mcw_lift_solve(phi, G, 7, F1)
    assert dict(F.items()) == {(0, fiber, (0, 0), 0): coeff}
    assert mcw_residual(phi, G, F, 7, F1).is_zero()
    # the quadratic exponent moves Z linearly and leaves the base alone
    for i in range(2):
        moved = ad_exp_series_raw(F, W.fiber_var(1, i), F1)
        assert all(sum(k[1]) == 1 and not any(k[2]) and k[0] == 0 for k in moved.terms)


def test_mcw_random_linear(rng):
    G = symplectic_one_form(F1)
    for _ in range(2):
        M = random_symplectic(rng, F1, steps=2, entries=(-1, 1))
        phi = PolySymplectomorphism.linear(M, F1)
        try:
            F = mcw_lift_solve(phi, G, 7, F1)
        except Unsupported:
            continue
        assert mcw_residual(phi, G, F, 7, F1).is_zero()


# --- composition cocycle -----------------------------------------------------------------------


def _rand_H(rng, N):
    return GroupExponent(random_base_poly(rng, 1, 2), random_base_poly(rng, 1, 3), F1, N)


def test_cocycle_action(rng):
    N = 6
    I = [[1, 0], [0, 1]]
    for _ in range(3):
        L1, L2 = random_symplectic(rng, F1), random_symplectic(rng, F1)
        P1, P2 = LinearLift(L1, _rand_H(rng, N)), LinearLift(L2, _rand_H(rng, N))
        H = lift_compose_cocycle(P1, P2)
        P = LinearLift(matmul(L1, L2), H)
        for gen in [W.fiber_var(1, 0, N), W.fiber_var(1, 1, N), W.base_var(1, 0, N), W.base_var(1, 1, N)]:
            assert P1.apply(P2.apply(gen)) == P.apply(gen)
    H1 = _rand_H(rng, N)
    L = random_symplectic(rng, F1)
    assert lift_compose_cocycle(LinearLift(L, H1), LinearLift(I, GroupExponent.zero(F1, N))) == H1
    zero = GroupExponent.zero(F1, N)
    assert lift_compose_cocycle(LinearLift(L, zero), LinearLift(inverse(L), zero)) == zero


def test_cocycle_rejects_non_symplectic():
    with pytest.raises(NotSymplectic):
        LinearLift([[2, 0], [0, 1]], GroupExponent.zero(F1, 4))


# --- contact extension -------------------------------------------------------------------------


def test_contact_h0():
    assert contact_h0(PolySymplectomorphism.linear([[1, 0], [3, 1]], F1)).is_zero()
    x, y = xy()
    phi = PolySymplectomorphism([x, y + x.power(2)], F1)
    h0 = contact_h0(phi)
    # {h0, phi^i} = phi^i - z^l d_l phi^i, checked with sympy partials
    z = sp.symbols("z1:3")
    hs = to_sympy(h0)
    for comp in phi.components:
        c = to_sympy(comp)
        euler = sum(v * sp.diff(c, v) for v in z)
        bracket = sum(sp.Rational(F1.lam[i][j]) * sp.diff(hs, z[i]) * sp.diff(c, z[j])
                      for i in range(2) for j in range(2) if F1.lam[i][j])
        assert sp.expand(bracket - (c - euler)) == 0
