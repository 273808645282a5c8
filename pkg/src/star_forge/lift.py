"""Lifting polynomial symplectomorphisms of the flat chart to the Weyl algebra.

* CCR defects of the Weyl continuations of the components and their repair by
  even-order corrections (Poincare primitives via the radial homotopy).
* The MCW lift equation, solved degree by degree for the exponent F.
* The composition cocycle for lifts of linear symplectic maps.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement

from .algebra import SymplecticFrame, WeylSeries, form_degree_of, nu_bracket
from .errors import NotSymplectic, StagnationError, Unsupported
from .fedosov import d_base
from .group import GroupExponent, ad_exp_series, bch_compose
from .linalg import identity, inverse, is_symplectic, matadd, matmul, matscale, solve_affine, transpose
from .weyl_functions import base_moyal


class PolySymplectomorphism:
    """Components phi^1..phi^{2n} as base polynomials (optionally with an explicit inverse)."""

    def __init__(self, components, frame: SymplecticFrame, inverse_components=None):
        self.frame = frame
        self.components = [c.truncate(None) for c in components]
        if len(self.components) != 2 * frame.dim_n:
            raise ValueError("need 2n components")
        for c in self.components:
            if c.has_fiber() or c.has_forms():
                raise ValueError("components must be base polynomials")
        self.inverse_components = inverse_components
        self.report = check_symplectic(self.components, frame)

    @classmethod
    def linear(cls, matrix, frame):
        n = frame.dim_n
        comps = [sum((WeylSeries.base_var(n, j).scale(matrix[i][j]) for j in range(2 * n)),
                     WeylSeries.zero(n)) for i in range(2 * n)]
        inv = inverse(matrix, "linear map")
        inv_comps = [sum((WeylSeries.base_var(n, j).scale(inv[i][j]) for j in range(2 * n)),
                         WeylSeries.zero(n)) for i in range(2 * n)]
        return cls(comps, frame, inv_comps)

    @property
    def is_symplectic(self):
        return not self.report["violations"]

    def jacobian(self):
        width = 2 * self.frame.dim_n
        return [[self.components[s].base_derivative(k) for k in range(width)] for s in range(width)]

    def linear_matrix(self):
        """Matrix of a linear map, or None if some component is not linear homogeneous."""
        width = 2 * self.frame.dim_n
        out = [[Fraction(0)] * width for _ in range(width)]
        for s, comp in enumerate(self.components):
            for (nu, fib, base, mask), c in comp.items():
                if nu or sum(base) != 1:
                    return None
                out[s][base.index(1)] = c
        return out

    def inverse_map(self):
        if self.inverse_components is not None:
            return self.inverse_components
        lin = self.linear_matrix()
        if lin is None:
            raise Unsupported("inverse of a nonlinear map must be supplied")
        return PolySymplectomorphism.linear(lin, self.frame).inverse_components


def check_symplectic(components, frame: SymplecticFrame):
    """{phi^i, phi^j} == lam^{ij} for all pairs; report lists (i, j) 1-based violations."""
    width = 2 * frame.dim_n
    violations = []
    for i in range(width):
        for j in range(i + 1, width):
            br = frame.poisson(components[i], components[j])
            if br != WeylSeries.constant(frame.dim_n, frame.lam[i][j]):
                violations.append((i + 1, j + 1))
    return {"passed": not violations, "violations": violations}


# ---------------------------------------------------------------------------
# CCR defects and repair


def _nu_coefficient(series, power):
    n = series.dim_n
    return WeylSeries(n, None, {(0, fib, base, mask): c for (nu, fib, base, mask), c in series.items()
                                if nu == power})


def ccr_defect(components, N: int, frame: SymplecticFrame, check=True):
    """{order: {(s, t): a^{s,t}_{(order)}}} for odd orders 3..N (0-based s < t).

    The star commutator of the continuations equals the continuation of the base
    Moyal commutator, so the defect is read off from base products.
    """
    if N < 3:
        raise ValueError("N must be at least 3")
    if check:
        rep = check_symplectic([c.fiber_free() for c in _nu_free(components)], frame)
        if not rep["passed"]:
            raise NotSymplectic(f"Poisson brackets fail for pairs {rep['violations']}")
    width = 2 * frame.dim_n
    table = {order: {} for order in range(3, N + 1, 2)}
    for s in range(width):
        for t in range(s + 1, width):
            comm = base_moyal(components[s], components[t], frame) - base_moyal(components[t], components[s], frame)
            for order in table:
                table[order][(s, t)] = _nu_coefficient(comm, order)
    return table


def _nu_free(components):
    return [c.filter(lambda k: k[0] == 0) for c in components]


def defect_is_zero(table):
    return all(p.is_zero() for row in table.values() for p in row.values())


def defect_matrix(row, width):
    """Antisymmetric matrix a^{st} from the s < t table row."""
    n = next(iter(row.values())).dim_n if row else 1
    zero = WeylSeries.zero(n)
    a = [[zero] * width for _ in range(width)]
    for (s, t), p in row.items():
        a[s][t] = p
        a[t][s] = -p
    return a


def omega_prime_components(row, frame):
    """W = lam^{-1} a lam^{-T}, the coefficient matrix of omega' = 1/2 W_{st} dz'^s dz'^t."""
    width = 2 * frame.dim_n
    a = defect_matrix(row, width)
    om = frame.omega
    n = frame.dim_n
    W = [[WeylSeries.zero(n)] * width for _ in range(width)]
    for s in range(width):
        for t in range(width):
            acc = WeylSeries.zero(n)
            for u in range(width):
                if not om[s][u]:
                    continue
                for v in range(width):
                    if om[t][v] and not a[u][v].is_zero():
                        acc = acc + a[u][v].scale(om[s][u] * om[t][v])
            W[s][t] = acc
    return W


def two_form(W, n):
    """1/2 W_{st} dz^s wedge dz^t as a form-valued series."""
    out = WeylSeries.zero(n)
    width = 2 * n
    for s in range(width):
        for t in range(width):
            if not W[s][t].is_zero():
                out = out + W[s][t].pointwise(WeylSeries.dz(n, s)).pointwise(WeylSeries.dz(n, t)).scale(Fraction(1, 2))
    return out


def pulled_back_omega_prime(row, components, frame):
    """phi^* omega' = 1/2 W_{st}(z) dphi^s wedge dphi^t (defects already live in z)."""
    n = frame.dim_n
    width = 2 * n
    W = omega_prime_components(row, frame)
    dphi = [d_base(c.filter(lambda k: k[0] == 0)) for c in components]
    out = WeylSeries.zero(n)
    for s in range(width):
        for t in range(width):
            if not W[s][t].is_zero():
                out = out + W[s][t].pointwise(dphi[s]).pointwise(dphi[t]).scale(Fraction(1, 2))
    return out


def closedness_audit(row, components, frame):
    """(phi^* omega', closed?) for one defect order; closedness of omega' is checked on its pullback."""
    form = pulled_back_omega_prime(row, components, frame)
    closed = d_base(form).is_zero()
    return form, closed


def radial_homotopy(form: WeylSeries) -> WeylSeries:
    """Poincare primitive on the star-shaped chart: contraction with z^k d/dz^k, weight 1/(deg + q)."""
    acc = {}
    for (nu, fib, base, mask), c in form.items():
        q = form_degree_of(mask)
        if q == 0:
            continue
        weight = Fraction(1, sum(base) + q)
        below = 0
        for k in range(len(base)):
            if mask >> k & 1:
                sign = -1 if below & 1 else 1
                below += 1
                b = list(base)
                b[k] += 1
                key = (nu, fib, tuple(b), mask & ~(1 << k))
                acc[key] = acc.get(key, 0) + sign * c * weight
    return WeylSeries(form.dim_n, None, acc)


def one_form_components(theta, n):
    width = 2 * n
    comps = [dict() for _ in range(width)]
    for (nu, fib, base, mask), c in theta.items():
        k = mask.bit_length() - 1
        comps[k][(nu, fib, base, 0)] = c
    return [WeylSeries(n, None, d) for d in comps]


def ccr_repair(components, N: int, frame: SymplecticFrame):
    """Even-order corrections {2p: [g_p^1..g_p^{2n}]} killing CCR defects through nu^N."""
    n = frame.dim_n
    width = 2 * n
    rep = check_symplectic(components, frame)
    if not rep["passed"]:
        raise NotSymplectic(f"Poisson brackets fail for pairs {rep['violations']}")
    current = [c.truncate(None) for c in components]
    classical = [c.filter(lambda k: k[0] == 0) for c in components]
    jac = [[classical[s].base_derivative(k) for k in range(width)] for s in range(width)]
    # J^{-T} = lam^{-T} J lam^T, entrywise polynomial because J is symplectic
    lam = frame.lam
    om = frame.omega
    j_inv_t = [[WeylSeries.zero(n)] * width for _ in range(width)]
    for k in range(width):
        for m in range(width):
            acc = WeylSeries.zero(n)
            for a in range(width):
                if not om[a][k]:
                    continue
                for b in range(width):
                    if lam[m][b] and not jac[a][b].is_zero():
                        acc = acc + jac[a][b].scale(om[a][k] * lam[m][b])
            j_inv_t[k][m] = acc
    corrections = {}
    for order in range(3, N + 1, 2):
        table = ccr_defect(current, order, frame, check=False)
        row = table[order]
        if all(p.is_zero() for p in row.values()):
            continue
        form, closed = closedness_audit(row, classical, frame)
        if not closed:
            raise NotSymplectic(f"defect 2-form at order {order} is not closed")
        theta = one_form_components(radial_homotopy(form), n)
        beta = [sum((j_inv_t[m][k].pointwise(theta[k]) for k in range(width)), WeylSeries.zero(n))
                for m in range(width)]
        # theta = phi^* theta', theta'_m(phi) = (J^{-T} theta)_m; correction c^s = -lam^{sm} beta_m
        power = order - 1
        corr = []
        for s in range(width):
            c = WeylSeries.zero(n)
            for m in range(width):
                if lam[s][m]:
                    c = c + beta[m].scale(-lam[s][m])
            corr.append(c)
        corrections[power] = corr
        current = [current[s] + corr[s].nu_shift(power) for s in range(width)]
    return corrections


def apply_corrections(components, corrections):
    out = list(components)
    for power, corr in corrections.items():
        out = [out[s] + corr[s].nu_shift(power) for s in range(len(out))]
    return out


# ---------------------------------------------------------------------------
# MCW lift equation


def pull_back(section: WeylSeries, images) -> WeylSeries:
    """Substitute z -> images and dz -> d(images); Z and nu untouched."""
    return section.substitute_base(images, forms=True)


def _matrix_log_unipotent(U):
    size = len(U)
    E = matadd(U, identity(size), -1)
    out = [[Fraction(0)] * size for _ in range(size)]
    power = identity(size)
    for k in range(1, size + 1):
        power = matmul(power, E)
        out = matadd(out, matscale(power, Fraction((-1) ** (k + 1), k)))
    check = matmul(power, E)
    if any(x for row in check for x in row):
        raise Unsupported("linear part of the inverse map is not unipotent")
    return out


def _linear_jacobian(images, n):
    width = 2 * n
    M = [[Fraction(0)] * width for _ in range(width)]
    for s, img in enumerate(images):
        for (nu, fib, base, mask), c in img.items():
            if nu == 0 and sum(base) == 1 and not any(fib) and not mask:
                M[s][base.index(1)] = c
    return M


class MCWProblem:
    """Data for Sum_k ad_X^{k-1}(nabla~ F)/k! = e^{ad X}(G - phi^{-1*}G) (mod center), X = F/nu."""

    def __init__(self, phi: PolySymplectomorphism, G: WeylSeries, N: int, frame: SymplecticFrame):
        self.phi = phi
        self.frame = frame
        self.N = N
        self.G = G.truncate(None)
        self.inv = phi.inverse_map()
        self.G_pulled = pull_back(self.G, self.inv).truncate(None)
        self.source = (self.G - self.G_pulled)

    def nabla_tilde(self, F):
        return d_base(F) + nu_bracket(self.G_pulled, F, self.frame)

    def residual(self, F: WeylSeries, cut=None) -> WeylSeries:
        """Left minus right side, times nu, with central terms dropped, through degree ``cut``."""
        cut = self.N - 1 if cut is None else cut
        F = F.truncate(None)
        lhs = self.nabla_tilde(F).truncate(cut)
        term = lhs
        k = 1
        while True:
            k += 1
            term = nu_bracket(F, term, self.frame).scale(Fraction(1, k))
            if term.is_zero():
                break
            if k > 256:
                raise StagnationError("adjoint series does not terminate", cut)
            lhs = lhs + term
        rhs = ad_exp_series_raw(F, self.source.truncate(cut), self.frame)
        return (lhs - rhs).truncate(cut).drop_central()


def ad_exp_series_raw(F, a, frame):
    """e^{ad(F/nu)} a without the degree-raising validation (F may be quadratic)."""
    out = a
    term = a
    k = 0
    while True:
        k += 1
        term = nu_bracket(F, term, frame).scale(Fraction(1, k))
        if term.is_zero():
            return out
        if k > 256:
            raise StagnationError("adjoint series does not terminate", a.trunc_N)
        out = out + term


def _quadratic_from_symmetric(S, n):
    width = 2 * n
    zero = (0,) * width
    acc = {}
    for i in range(width):
        for j in range(width):
            if S[i][j]:
                e = [0] * width
                e[i] += 1
                e[j] += 1
                key = (0, tuple(e), zero, 0)
                acc[key] = acc.get(key, 0) + S[i][j] / 2
    return WeylSeries(n, None, acc)


def lowest_order_term(problem: MCWProblem) -> WeylSeries:
    """Quadratic F_2 = 1/2 Z^T S Z fixed by the degree-1 equation (unipotent linear part)."""
    frame = problem.frame
    n = frame.dim_n
    M = _linear_jacobian(problem.inv, n)
    om = [list(r) for r in frame.omega]
    lam = [list(r) for r in frame.lam]
    target = matmul(matmul(lam, transpose(M)), om)
    Nt = _matrix_log_unipotent(target)
    S = matmul(transpose(Nt), om)
    S = [[(S[i][j] + S[j][i]) / 2 for j in range(len(S))] for i in range(len(S))]
    return _quadratic_from_symmetric(S, n)


def _basis(n, degree, base_bound):
    width = 2 * n
    out = []
    for nu in range(degree // 2 + 1):
        p = degree - 2 * nu
        if p < 1:
            continue
        for fib in _exponents(width, p):
            for bdeg in range(base_bound + 1):
                for base in _exponents(width, bdeg):
                    out.append((nu, fib, base, 0))
    return out


def _exponents(width, total):
    for combo in combinations_with_replacement(range(width), total):
        e = [0] * width
        for v in combo:
            e[v] += 1
        yield tuple(e)


def mcw_lift_solve(phi: PolySymplectomorphism, G: WeylSeries, N: int, frame: SymplecticFrame,
                   base_bound=None) -> WeylSeries:
    """Exponent F through degree N; residual vanishes through degree N - 1."""
    problem = MCWProblem(phi, G, N, frame)
    n = frame.dim_n
    if base_bound is None:
        base_bound = max((sum(k[2]) for k in problem.source.terms), default=0)
    F = WeylSeries.zero(n)
    if problem.source.drop_central().is_zero():
        return F
    F = lowest_order_term(problem)
    res = problem.residual(F, 1)
    if not res.is_zero():
        raise StagnationError("degree-1 equation unresolved", 1)
    for d in range(3, N + 1):
        res = problem.residual(F, d - 1).degree_part(d - 1)
        if res.is_zero():
            continue
        basis = _basis(n, d, base_bound)
        columns = []
        for key in basis:
            trial = F + WeylSeries(n, None, {key: 1})
            col = problem.residual(trial, d - 1).degree_part(d - 1) - res
            columns.append(dict(col.items()))
        x = solve_affine(columns, {k: -c for k, c in res.items()})
        if x is None:
            raise StagnationError(f"no polynomial solution at degree {d}", d - 1)
        F = F + WeylSeries(n, None, {key: v for key, v in zip(basis, x) if v})
        if not problem.residual(F, d - 1).is_zero():
            raise StagnationError(f"residual persists at degree {d - 1}", d - 1)
    return F


def mcw_residual(phi, G, F, N, frame):
    return MCWProblem(phi, G, N, frame).residual(F)


# ---------------------------------------------------------------------------
# composition cocycle on the linear subgroup


class LinearLift:
    """Psi = L^ o e^{ad(H/nu)} with L^(a) = a o L^{-1} acting on z and Z."""

    def __init__(self, L, H: GroupExponent):
        lam = [list(r) for r in H.frame.lam]
        if not is_symplectic(L, lam):
            raise NotSymplectic("base map is not symplectic")
        self.L = [[Fraction(x) for x in row] for row in L]
        self.H = H

    def apply(self, a: WeylSeries) -> WeylSeries:
        moved = ad_exp_series(self.H.series, a, self.H.frame)
        return substitute_linear(moved, inverse(self.L))


def substitute_linear(a: WeylSeries, L):
    """a(L z, L Z): both base and fiber variables go through the same linear map."""
    n = a.dim_n
    width = 2 * n
    imgs = [sum((WeylSeries.base_var(n, j).scale(L[i][j]) for j in range(width)), WeylSeries.zero(n))
            for i in range(width)]
    return a.substitute_fiber_linear(L).substitute_base(imgs, forms=False)


def lift_compose_cocycle(first: LinearLift, second: LinearLift) -> GroupExponent:
    """H with Psi_1 o Psi_2 = (L_1 L_2)^ o e^{ad(H/nu)}: H = BCH(H_1 o L_2, H_2)."""
    H1 = first.H
    moved = substitute_linear(H1.series, second.L)
    conj = GroupExponent.from_series(moved, H1.frame, H1.trunc_N)
    return bch_compose(conj, second.H)


def contact_h0(phi: PolySymplectomorphism, degree_bound=None):
    """Polynomial h0 with {h0, phi^i} = phi^i - sum_l z^l d phi^i/dz^l (the nu^1 equation)."""
    frame = phi.frame
    n = frame.dim_n
    width = 2 * n
    rhs = []
    for comp in phi.components:
        euler = WeylSeries.zero(n)
        for l in range(width):
            euler = euler + WeylSeries.base_var(n, l).pointwise(comp.base_derivative(l))
        rhs.append(comp - euler)
    if all(r.is_zero() for r in rhs):
        return WeylSeries.zero(n)
    bound = degree_bound or (max(max((sum(k[2]) for k in c.terms), default=0) for c in phi.components) + 2)
    basis = [b for d in range(1, bound + 1) for b in _exponents(width, d)]
    columns = []
    for e in basis:
        mono = WeylSeries.monomial(n, base=e)
        col = {}
        for i, comp in enumerate(phi.components):
            for k, c in frame.poisson(mono, comp).items():
                col[(i, k)] = c
        columns.append(col)
    target = {(i, k): c for i, r in enumerate(rhs) for k, c in r.items()}
    x = solve_affine(columns, target)
    if x is None:
        raise StagnationError("no polynomial h0 within the degree bound", 1)
    return WeylSeries(n, None, {(0, (0,) * width, e, 0): v for e, v in zip(basis, x) if v})
