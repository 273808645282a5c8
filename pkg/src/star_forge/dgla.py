"""Polyvector fields with the Schouten bracket, polydifferential operators with the
Gerstenhaber bracket, the Hochschild coboundary, and Maurer-Cartan defects.

Operators are compared by evaluation on monomial tuples; polynomials here are
plain ``{exponent tuple: Fraction}`` maps over ``dim`` variables.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement, product


# ---------------------------------------------------------------------------
# polynomials


class Poly:
    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        self.dim = dim
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def monomial(cls, dim, exp, c=1):
        return cls(dim, {tuple(exp): c})

    @classmethod
    def const(cls, dim, c):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def var(cls, dim, i):
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): 1})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(self.dim, out)

    def __neg__(self):
        return Poly(self.dim, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return Poly(self.dim, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        out = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return Poly(self.dim, out)

    __rmul__ = __mul__

    def derivative(self, i, times=1):
        out = {}
        for k, v in self.terms.items():
            if k[i] >= times:
                e = list(k)
                e[i] -= times
                f = 1
                for t in range(times):
                    f *= k[i] - t
                out[tuple(e)] = out.get(tuple(e), 0) + v * f
        return Poly(self.dim, out)

    def partial(self, alpha):
        out = self
        for i, a in enumerate(alpha):
            if a:
                out = out.derivative(i, a)
        return out

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    def __repr__(self):
        return f"Poly({self.text()})"

    def text(self):
        if not self.terms:
            return "0"
        parts = []
        for k, v in sorted(self.terms.items()):
            s = [str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"]
            for i, e in enumerate(k):
                if e:
                    s.append(f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}")
            parts.append(" * ".join(s))
        return " + ".join(parts)


def monomials(dim, max_degree):
    out = []
    for d in range(max_degree + 1):
        for combo in combinations_with_replacement(range(dim), d):
            e = [0] * dim
            for v in combo:
                e[v] += 1
            out.append(Poly.monomial(dim, e))
    return out


# ---------------------------------------------------------------------------
# polyvector fields


def _wedge_sort(indices):
    """(sign, sorted tuple) or (0, None) when an index repeats."""
    idx = list(indices)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class PolyVector:
    """Section of wedge^{k+1} T: ``components[(i0 < .. < ik)]`` is the coefficient of d_{i0}^..^d_{ik}."""

    def __init__(self, dim, degree, components=None):
        self.dim = dim
        self.degree = degree
        comps = {}
        for idx, p in (components or {}).items():
            if len(idx) != degree + 1:
                raise ValueError("index tuple length must be degree + 1")
            sign, key = _wedge_sort(idx)
            if not sign or p.is_zero():
                continue
            comps[key] = comps.get(key, Poly(dim)) + p.scale(sign)
        self.components = {k: v for k, v in comps.items() if not v.is_zero()}

    @classmethod
    def bivector(cls, matrix_of_polys):
        """From a full antisymmetric matrix pi^{ij} (entries Poly)."""
        dim = len(matrix_of_polys)
        comps = {}
        for i in range(dim):
            for j in range(i + 1, dim):
                if not matrix_of_polys[i][j].is_zero():
                    comps[(i, j)] = matrix_of_polys[i][j]
        return cls(dim, 1, comps)

    def is_zero(self):
        return not self.components

    def __add__(self, other):
        comps = dict(self.components)
        for k, v in other.components.items():
            comps[k] = comps.get(k, Poly(self.dim)) + v
        return PolyVector(self.dim, self.degree, comps)

    def scale(self, c):
        return PolyVector(self.dim, self.degree, {k: v.scale(c) for k, v in self.components.items()})

    def __eq__(self, other):
        return (isinstance(other, PolyVector) and self.degree == other.degree
                and self.components == other.components)

    def __repr__(self):
        body = ", ".join(f"{k}: {v.text()}" for k, v in sorted(self.components.items()))
        return f"PolyVector(k={self.degree}, {{{body}}})"

    def coefficient(self, idx):
        sign, key = _wedge_sort(idx)
        if not sign:
            return Poly(self.dim)
        return self.components.get(key, Poly(self.dim)).scale(sign)


def _lie_bracket(X, Y, dim):
    """[f d_a, g d_b] for vector fields given as (coeff, index); returns list of (coeff, index)."""
    (f, a), (g, b) = X, Y
    out = []
    fg = f * g.derivative(a)
    if not fg.is_zero():
        out.append((fg, b))
    gf = g * f.derivative(b)
    if not gf.is_zero():
        out.append((-gf, a))
    return out


def schouten(P: PolyVector, Q: PolyVector) -> PolyVector:
    """[X_0^..^X_m, Y_0^..^Y_n] = sum_{i,j} (-1)^{i+j+m} [X_i, Y_j] ^ X_0..^X_i..X_m ^ Y_0..^Y_j..Y_n.

    Each component p d_{a0}^..^d_{am} is decomposed as (p d_{a0}) ^ d_{a1} ^ .. ^ d_{am}.
    """
    dim = P.dim
    m, n = P.degree, Q.degree
    if m < 0 or n < 0:
        raise ValueError("functions (degree -1) are not handled by the decomposable formula")
    one = Poly.const(dim, 1)
    comps = {}
    for a_idx, p in P.components.items():
        X = [(p, a_idx[0])] + [(one, a) for a in a_idx[1:]]
        for b_idx, q in Q.components.items():
            Y = [(q, b_idx[0])] + [(one, b) for b in b_idx[1:]]
            for i in range(m + 1):
                for j in range(n + 1):
                    sign = -1 if (i + j + m) & 1 else 1
                    rest = X[:i] + X[i + 1:] + Y[:j] + Y[j + 1:]
                    coeff_rest = one
                    for c, _ in rest:
                        coeff_rest = coeff_rest * c
                    for c, e in _lie_bracket(X[i], Y[j], dim):
                        idx = (e,) + tuple(r[1] for r in rest)
                        s, key = _wedge_sort(idx)
                        if not s:
                            continue
                        val = (c * coeff_rest).scale(sign * s)
                        comps[key] = comps.get(key, Poly(dim)) + val
    return PolyVector(dim, m + n, comps)


def normalized_schouten(P, Q):
    """(-1)^m [P, Q]_S: the sign-normalized bracket satisfying the usual graded Jacobi identity."""
    out = schouten(P, Q)
    return out.scale(-1) if P.degree & 1 else out


def bivector_bracket(pi: PolyVector, f: Poly, g: Poly) -> Poly:
    """{f, g} = pi^{ij} d_i f d_j g."""
    out = Poly(pi.dim)
    for (i, j), c in pi.components.items():
        out = out + c * (f.derivative(i) * g.derivative(j) - f.derivative(j) * g.derivative(i))
    return out


def jacobiator(pi: PolyVector, f, g, h) -> Poly:
    return (bivector_bracket(pi, f, bivector_bracket(pi, g, h))
            + bivector_bracket(pi, g, bivector_bracket(pi, h, f))
            + bivector_bracket(pi, h, bivector_bracket(pi, f, g)))


class MCDefect:
    """Defect object with a zero flag; ``by_order`` maps nu-order to defect data when relevant."""

    def __init__(self, defect, is_zero, by_order=None):
        self.defect = defect
        self.is_zero = is_zero
        self.by_order = by_order or {}

    def __repr__(self):
        return f"MCDefect(zero={self.is_zero}, {self.defect!r})"


def mc_defect_poisson(pi: PolyVector) -> MCDefect:
    if pi.degree != 1:
        raise ValueError("expected a bivector")
    d = schouten(pi, pi)
    return MCDefect(d, d.is_zero())


# ---------------------------------------------------------------------------
# polydifferential operators


class GradedOp:
    """Multilinear operator on polynomials taking degree + 1 arguments."""

    degree = 0
    dim = 0

    def __call__(self, *args):
        if len(args) != self.degree + 1:
            raise ValueError(f"expected {self.degree + 1} arguments, got {len(args)}")
        return self._eval(args)

    def _eval(self, args):
        raise NotImplementedError

    def __add__(self, other):
        return _Sum([(1, self), (1, other)])

    def __sub__(self, other):
        return _Sum([(1, self), (-1, other)])

    def scale(self, c):
        return _Sum([(c, self)])


class PolyDiffOp(GradedOp):
    """sum of coeff(x) * prod_i d^{alpha_i} a_i; terms map (coeff exponent, (alpha_0..alpha_k)) -> Fraction."""

    def __init__(self, dim, degree, terms=None):
        self.dim = dim
        self.degree = degree
        self.terms = {}
        for (cexp, alphas), v in (terms or {}).items():
            if len(alphas) != degree + 1:
                raise ValueError("need one multi-index per argument")
            key = (tuple(cexp), tuple(tuple(a) for a in alphas))
            self.terms[key] = self.terms.get(key, 0) + Fraction(v)
        self.terms = {k: v for k, v in self.terms.items() if v != 0}

    def _eval(self, args):
        out = Poly(self.dim)
        for (cexp, alphas), v in self.terms.items():
            term = Poly.monomial(self.dim, cexp, v)
            for a, alpha in zip(args, alphas):
                term = term * a.partial(alpha)
                if term.is_zero():
                    break
            out = out + term
        return out

    def to_json(self):
        return [{"coeff": str(v), "x": list(c), "derivatives": [list(a) for a in alphas]}
                for (c, alphas), v in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, dim, degree, data):
        terms = {}
        for t in data:
            terms[(tuple(t["x"]), tuple(tuple(a) for a in t["derivatives"]))] = Fraction(t["coeff"])
        return cls(dim, degree, terms)


def pointwise_product(dim):
    zero = (0,) * dim
    return PolyDiffOp(dim, 1, {(zero, (zero, zero)): 1})


def identity_op(dim):
    zero = (0,) * dim
    return PolyDiffOp(dim, 0, {(zero, (zero,)): 1})


class _Sum(GradedOp):
    def __init__(self, parts):
        self.parts = [(Fraction(c), op) for c, op in parts]
        degs = {op.degree for _, op in self.parts}
        if len(degs) != 1:
            raise ValueError("cannot add operators of different degree")
        self.degree = degs.pop()
        self.dim = self.parts[0][1].dim

    def _eval(self, args):
        out = Poly(self.dim)
        for c, op in self.parts:
            if c:
                out = out + op._eval(args).scale(c)
        return out


class _Insert(GradedOp):
    """phi1 o^ phi2 (a_0..a_{k1+k2}) = sum_i (-1)^{i k2} phi1(a_0..a_{i-1}, phi2(a_i..a_{i+k2}), ..)."""

    def __init__(self, phi1, phi2):
        self.phi1 = phi1
        self.phi2 = phi2
        self.degree = phi1.degree + phi2.degree
        self.dim = phi1.dim

    def _eval(self, args):
        k1, k2 = self.phi1.degree, self.phi2.degree
        out = Poly(self.dim)
        for i in range(k1 + 1):
            inner = self.phi2._eval(args[i:i + k2 + 1])
            val = self.phi1._eval(args[:i] + (inner,) + args[i + k2 + 1:])
            out = out + (val.scale(-1) if (i * k2) & 1 else val)
        return out


def insertion(phi1, phi2):
    return _Insert(phi1, phi2)


def gerstenhaber(phi1: GradedOp, phi2: GradedOp) -> GradedOp:
    """[phi1, phi2]_G = phi1 o^ phi2 - (-1)^{k1 k2} phi2 o^ phi1."""
    sign = -1 if (phi1.degree * phi2.degree) & 1 else 1
    return _Sum([(1, _Insert(phi1, phi2)), (-sign, _Insert(phi2, phi1))])


def hochschild_d(phi: GradedOp, product_op: GradedOp) -> GradedOp:
    """delta(phi) = (-1)^k [product, phi]_G."""
    br = gerstenhaber(product_op, phi)
    return br.scale(-1) if phi.degree & 1 else br


def evaluate_battery(op: GradedOp, max_degree=2, total_degree=None):
    """All nonzero values of op on monomial tuples; tuples bounded per argument and optionally in total."""
    dim = op.dim
    monos = monomials(dim, max_degree)
    out = {}
    for args in product(monos, repeat=op.degree + 1):
        if total_degree is not None:
            tot = sum(sum(next(iter(a.terms))) for a in args)
            if tot > total_degree:
                continue
        val = op(*args)
        if not val.is_zero():
            out[tuple(next(iter(a.terms)) for a in args)] = val
    return out


def ops_equal(a: GradedOp, b: GradedOp, max_degree=2, total_degree=None):
    if a.degree != b.degree:
        return False
    return not evaluate_battery(a - b, max_degree, total_degree)


def moyal_cochains(frame, order):
    """B_k(f, g) = (1/2)^k/k! lam^{i1 j1}..lam^{ik jk} d_I f d_J g for k = 1..order (k = 0 entry empty)."""
    dim = 2 * frame.dim_n
    zero = (0,) * dim
    out = [PolyDiffOp(dim, 1)]
    tables = frame.moyal_tables(order)
    for k in range(1, order + 1):
        out.append(PolyDiffOp(dim, 1, {(zero, (a, b)): c for c, a, b in tables[k]}))
    return out


def mc_defect_star(B, order_N, product_op=None, max_degree=2) -> MCDefect:
    """Per nu-order m <= order_N: delta B_m - 1/2 sum_{i+j=m} [B_i, B_j]_G on monomial triples.

    ``B[m]`` is the nu^m cochain of star - multiplication (``B[0]`` must vanish).
    """
    dim = B[0].dim if B else 1
    mu = product_op or pointwise_product(dim)
    by_order = {}
    for m in range(1, order_N + 1):
        parts = []
        if m < len(B):
            parts.append((1, hochschild_d(B[m], mu)))
        for i in range(1, m):
            j = m - i
            if i < len(B) and j < len(B):
                parts.append((Fraction(-1, 2), gerstenhaber(B[i], B[j])))
        if not parts:
            by_order[m] = {}
            continue
        by_order[m] = evaluate_battery(_Sum(parts), max_degree)
    zero = all(not v for v in by_order.values())
    return MCDefect(by_order, zero, by_order)


def associativity_defect(B, order_N, max_degree=2):
    """(f*g)*h - f*(g*h) per nu order for f*g = fg + sum_m nu^m B_m(f, g)."""
    dim = B[0].dim
    mu = pointwise_product(dim)
    ops = [mu] + list(B[1:])
    by_order = {}
    for m in range(1, order_N + 1):
        parts = []
        for i in range(0, m + 1):
            j = m - i
            if i < len(ops) and j < len(ops):
                parts.append((1, _Insert(ops[i], ops[j])))
        by_order[m] = evaluate_battery(_Sum(parts), max_degree) if parts else {}
    return by_order
