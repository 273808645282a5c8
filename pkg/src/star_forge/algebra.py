"""Exact arithmetic in the truncated Weyl algebra over a Darboux chart.

A series is a finite map from monomial keys to ``Fraction`` coefficients.  A key
is ``(nu_power, fiber_exp, base_exp, form_mask)``: the power of the formal
parameter, exponents of the fiber generators Z^1..Z^{2n}, exponents of the
base coordinates z^1..z^{2n}, and a bitmask of the form generators dz^i
(bit i set means dz^{i+1} present, wedged in increasing order).

The degree of a key is ``2*nu_power + |fiber_exp|``; base variables and forms
carry no degree.  Series are truncated at a total-degree cutoff ``trunc_N``;
``None`` means no cutoff.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence, Tuple, Union

from .errors import DimensionMismatch, FrameError, TruncationMismatch
from .kernel import moyal_terms, wedge_sign
from .linalg import det, inverse

Key = Tuple[int, Tuple[int, ...], Tuple[int, ...], int]
Scalar = Union[int, Fraction]

# returned by total_degree for the zero series
MINUS_INFINITY = float("-inf")


def key_degree(key: Key) -> int:
    return 2 * key[0] + sum(key[1])


def form_degree_of(mask: int) -> int:
    return bin(mask).count("1")


def _as_scalar(c):
    if isinstance(c, int) and not isinstance(c, bool):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    return c


class WeylSeries:
    """Immutable truncated element of the Weyl algebra (with base and form parts)."""

    __slots__ = ("dim_n", "trunc_N", "_terms")

    def __init__(self, dim_n: int, trunc_N: Optional[int] = None,
                 terms: Union[Mapping[Key, Scalar], Iterable[Tuple[Key, Scalar]]] = ()):
        if dim_n < 1:
            raise ValueError("dim_n must be positive")
        if trunc_N is not None and trunc_N < 0:
            raise ValueError("trunc_N must be non-negative")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc = {}
        width = 2 * dim_n
        for key, c in items:
            nu, fib, base, mask = key
            fib = tuple(fib)
            base = tuple(base)
            if len(fib) != width or len(base) != width:
                raise DimensionMismatch(f"exponent vectors must have length {width}")
            if nu < 0 or min(fib) < 0 or min(base) < 0 or mask < 0 or mask >> width:
                raise ValueError(f"invalid monomial key {key!r}")
            k = (nu, fib, base, mask)
            acc[k] = acc.get(k, 0) + _as_scalar(c)
        self.dim_n = dim_n
        self.trunc_N = trunc_N
        self._terms = _clean(acc, trunc_N)

    @classmethod
    def _raw(cls, dim_n, trunc_N, acc):
        """Build from an already validated key->coeff dict (zeros and truncation handled here)."""
        obj = cls.__new__(cls)
        obj.dim_n = dim_n
        obj.trunc_N = trunc_N
        obj._terms = _clean(acc, trunc_N)
        return obj

    # constructors ---------------------------------------------------------
    @classmethod
    def zero(cls, dim_n, trunc_N=None):
        return cls._raw(dim_n, trunc_N, {})

    @classmethod
    def constant(cls, dim_n, c, trunc_N=None):
        z = (0,) * (2 * dim_n)
        return cls._raw(dim_n, trunc_N, {(0, z, z, 0): _as_scalar(c)})

    @classmethod
    def monomial(cls, dim_n, c=1, *, nu=0, fiber=None, base=None, forms=(), trunc_N=None):
        """Single term; ``forms`` lists 0-based dz indices in the order they are wedged."""
        width = 2 * dim_n
        fiber = tuple(fiber) if fiber is not None else (0,) * width
        base = tuple(base) if base is not None else (0,) * width
        mask = 0
        sign = 1
        for i in forms:
            s = wedge_sign(mask, 1 << i)
            if s == 0:
                return cls.zero(dim_n, trunc_N)
            sign *= s
            mask |= 1 << i
        return cls(dim_n, trunc_N, {(nu, fiber, base, mask): sign * _as_scalar(c)})

    @classmethod
    def fiber_var(cls, dim_n, i, trunc_N=None):
        e = [0] * (2 * dim_n)
        e[i] = 1
        return cls.monomial(dim_n, fiber=e, trunc_N=trunc_N)

    @classmethod
    def base_var(cls, dim_n, i, trunc_N=None):
        e = [0] * (2 * dim_n)
        e[i] = 1
        return cls.monomial(dim_n, base=e, trunc_N=trunc_N)

    @classmethod
    def nu(cls, dim_n, power=1, trunc_N=None):
        return cls.monomial(dim_n, nu=power, trunc_N=trunc_N)

    @classmethod
    def dz(cls, dim_n, i, trunc_N=None):
        return cls.monomial(dim_n, forms=(i,), trunc_N=trunc_N)

    # container protocol ---------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, Fraction]:
        return MappingProxyType(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self):
        return not self._terms

    def coefficient(self, key: Key):
        return self._terms.get(key, Fraction(0))

    def __eq__(self, other):
        if isinstance(other, WeylSeries):
            return self.dim_n == other.dim_n and self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == WeylSeries.constant(self.dim_n, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.dim_n, tuple(self._terms.items())))

    def __repr__(self):
        return f"WeylSeries(n={self.dim_n}, N={self.trunc_N}, {self.canonical_text()!r})"

    def __str__(self):
        return self.canonical_text()

    # linear structure -----------------------------------------------------
    def _check(self, other):
        if not isinstance(other, WeylSeries):
            raise TypeError("expected WeylSeries")
        if other.dim_n != self.dim_n:
            raise DimensionMismatch(f"dim_n {self.dim_n} vs {other.dim_n}")

    def _joint_trunc(self, other):
        if self.trunc_N is None:
            return other.trunc_N
        if other.trunc_N is None:
            return self.trunc_N
        return min(self.trunc_N, other.trunc_N)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = WeylSeries.constant(self.dim_n, other, self.trunc_N)
        self._check(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return WeylSeries._raw(self.dim_n, self._joint_trunc(other), acc)

    __radd__ = __add__

    def __neg__(self):
        return WeylSeries._raw(self.dim_n, self.trunc_N, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = WeylSeries.constant(self.dim_n, other, self.trunc_N)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = _as_scalar(c)
        return WeylSeries._raw(self.dim_n, self.trunc_N, {k: c * v for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, WeylSeries):
            raise TypeError("use moyal_product or pointwise for series products")
        return self.scale(other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.scale(1 / Fraction(other))

    # grading --------------------------------------------------------------
    def total_degree(self):
        if not self._terms:
            return MINUS_INFINITY
        return max(key_degree(k) for k in self._terms)

    def min_degree(self):
        if not self._terms:
            return MINUS_INFINITY
        return min(key_degree(k) for k in self._terms)

    def truncate(self, N: Optional[int]):
        if N is not None and N < 0:
            raise ValueError("N must be non-negative")
        return WeylSeries._raw(self.dim_n, N, dict(self._terms))

    def with_trunc(self, N):
        """Retag the cutoff (dropping terms above it when it shrinks)."""
        return self.truncate(N)

    def degree_part(self, d):
        return self.filter(lambda k: key_degree(k) == d)

    def filter(self, pred):
        return WeylSeries._raw(self.dim_n, self.trunc_N,
                               {k: c for k, c in self._terms.items() if pred(k)})

    def nu_shift(self, power):
        """Multiply by nu**power; negative powers must divide exactly."""
        acc = {}
        for (nu, fib, base, mask), c in self._terms.items():
            if nu + power < 0:
                raise ArithmeticError("series not divisible by that power of nu")
            acc[(nu + power, fib, base, mask)] = c
        N = self.trunc_N
        if N is not None:
            N = max(N + 2 * power, 0)
        return WeylSeries._raw(self.dim_n, N, acc)

    def form_degrees(self):
        return sorted({form_degree_of(k[3]) for k in self._terms})

    def form_part(self, q):
        return self.filter(lambda k: form_degree_of(k[3]) == q)

    def max_fiber_degree(self):
        return max((sum(k[1]) for k in self._terms), default=0)

    def fiber_free(self):
        """Part without fiber generators (the center of the fiber algebra)."""
        return self.filter(lambda k: not any(k[1]))

    def drop_central(self):
        return self.filter(lambda k: any(k[1]))

    def has_base(self):
        return any(any(k[2]) for k in self._terms)

    def has_fiber(self):
        return any(any(k[1]) for k in self._terms)

    def has_forms(self):
        return any(k[3] for k in self._terms)

    # structure maps -------------------------------------------------------
    def involution(self):
        """nu -> -nu with Z, z, dz fixed; coefficients are real so stay put."""
        return WeylSeries._raw(self.dim_n, self.trunc_N,
                               {k: (-c if k[0] & 1 else c) for k, c in self._terms.items()})

    def fiber_derivative(self, i):
        acc = {}
        for (nu, fib, base, mask), c in self._terms.items():
            e = fib[i]
            if e:
                f = list(fib)
                f[i] -= 1
                k = (nu, tuple(f), base, mask)
                acc[k] = acc.get(k, 0) + c * e
        return WeylSeries._raw(self.dim_n, self.trunc_N, acc)

    def base_derivative(self, i):
        acc = {}
        for (nu, fib, base, mask), c in self._terms.items():
            e = base[i]
            if e:
                b = list(base)
                b[i] -= 1
                k = (nu, fib, tuple(b), mask)
                acc[k] = acc.get(k, 0) + c * e
        return WeylSeries._raw(self.dim_n, self.trunc_N, acc)

    def pointwise(self, other):
        """Commutative product of the symbols (forms still anticommute)."""
        self._check(other)
        acc = {}
        N = self._joint_trunc(other)
        for (nu1, f1, b1, m1), c1 in self._terms.items():
            for (nu2, f2, b2, m2), c2 in other._terms.items():
                s = wedge_sign(m1, m2)
                if not s:
                    continue
                fib = tuple(x + y for x, y in zip(f1, f2))
                if N is not None and 2 * (nu1 + nu2) + sum(fib) > N:
                    continue
                k = (nu1 + nu2, fib, tuple(x + y for x, y in zip(b1, b2)), m1 | m2)
                acc[k] = acc.get(k, 0) + s * c1 * c2
        return WeylSeries._raw(self.dim_n, N, acc)

    def power(self, k):
        out = WeylSeries.constant(self.dim_n, 1, self.trunc_N)
        for _ in range(k):
            out = out.pointwise(self)
        return out

    def set_fiber_zero(self):
        return self.fiber_free()

    def swap_base_fiber(self):
        """Exchange the roles of z and Z (used to run base products through the fiber kernel)."""
        return WeylSeries._raw(self.dim_n, None,
                               {(nu, base, fib, mask): c
                                for (nu, fib, base, mask), c in self._terms.items()})

    def substitute_fiber_linear(self, matrix):
        """Algebra map Z^i -> sum_j matrix[i][j] Z^j (nu, z, dz fixed)."""
        width = 2 * self.dim_n
        images = []
        for i in range(width):
            images.append(WeylSeries(self.dim_n, None, [
                ((0, tuple(1 if t == j else 0 for t in range(width)), (0,) * width, 0), matrix[i][j])
                for j in range(width) if matrix[i][j] != 0]))
        return self._substitute(images, fiber=True)

    def substitute_base(self, images, *, forms=True):
        """Pull back along z -> images (base polynomials); dz^i -> d(images[i]) when ``forms``."""
        out = self._substitute(images, fiber=False)
        if not forms or not self.has_forms():
            return out
        return _pull_back_forms(self, images)

    def _substitute(self, images, fiber):
        width = 2 * self.dim_n
        powers = [[WeylSeries.constant(self.dim_n, 1)] for _ in range(width)]
        total = WeylSeries.zero(self.dim_n, None)
        acc = {}
        for (nu, fib, base, mask), c in self._terms.items():
            exps = fib if fiber else base
            term = WeylSeries(self.dim_n, None, [((nu, (0,) * width if fiber else fib,
                                                   (0,) * width if not fiber else base, mask), c)])
            for i, e in enumerate(exps):
                if e:
                    while len(powers[i]) <= e:
                        powers[i].append(powers[i][-1].pointwise(images[i]))
                    term = term.pointwise(powers[i][e])
            for k, v in term._terms.items():
                acc[k] = acc.get(k, 0) + v
        del total
        return WeylSeries._raw(self.dim_n, self.trunc_N, acc)

    # text -----------------------------------------------------------------
    def canonical_text(self):
        if not self._terms:
            return "0"
        return " + ".join(_term_text(k, c) for k, c in self._terms.items())


def _clean(acc, trunc_N):
    if trunc_N is None:
        kept = {k: c for k, c in acc.items() if c != 0}
    else:
        kept = {k: c for k, c in acc.items() if c != 0 and 2 * k[0] + sum(k[1]) <= trunc_N}
    return dict(sorted(kept.items()))


def _pull_back_forms(series, images):
    n = series.dim_n
    width = 2 * n
    diffs = []
    for p in images:
        d = WeylSeries.zero(n)
        for j in range(width):
            d = d + p.base_derivative(j).pointwise(WeylSeries.dz(n, j))
        diffs.append(d)
    acc = {}
    for (nu, fib, base, mask), c in series.items():
        head = WeylSeries(n, None, [((nu, fib, base, 0), c)]).substitute_base(images, forms=False)
        for i in range(width):
            if mask >> i & 1:
                head = head.pointwise(diffs[i])
        for k, v in head.items():
            acc[k] = acc.get(k, 0) + v
    return WeylSeries._raw(n, series.trunc_N, acc)


def format_rational(c) -> str:
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _term_text(key, c):
    nu, fib, base, mask = key
    parts = [format_rational(c)]
    if nu:
        parts.append("nu" if nu == 1 else f"nu^{nu}")
    for i, e in enumerate(base):
        if e:
            parts.append(f"z{i + 1}" if e == 1 else f"z{i + 1}^{e}")
    for i, e in enumerate(fib):
        if e:
            parts.append(f"Z{i + 1}" if e == 1 else f"Z{i + 1}^{e}")
    i = 0
    while mask >> i:
        if mask >> i & 1:
            parts.append(f"dz{i + 1}")
        i += 1
    return " * ".join(parts)


# ---------------------------------------------------------------------------
# frames


class SymplecticFrame:
    """Constant pairing data for a Darboux chart.

    ``lam`` is the matrix in [Z^i, Z^j] = nu*lam[i][j]; ``omega`` is its inverse,
    so that omega_{ij} lam^{jk} = delta_i^k.  The Poisson bracket of the frame is
    {f, g} = lam^{ij} d_i f d_j g.
    """

    __slots__ = ("dim_n", "lam", "omega", "convention", "_tables")

    def __init__(self, lam: Sequence[Sequence[Scalar]], convention: str = "matrix"):
        lam = tuple(tuple(Fraction(x) for x in row) for row in lam)
        size = len(lam)
        if size == 0 or size % 2 or any(len(r) != size for r in lam):
            raise FrameError("lambda must be a non-empty square matrix of even size")
        for i in range(size):
            for j in range(size):
                if lam[i][j] != -lam[j][i]:
                    raise FrameError("lambda must be antisymmetric")
        if det(lam) == 0:
            raise FrameError("lambda must be invertible")
        self.dim_n = size // 2
        self.lam = lam
        self.omega = tuple(tuple(r) for r in inverse(lam, "lambda"))
        self.convention = convention
        self._tables = []

    @classmethod
    def minus(cls, n):
        """Lambda = [[0, -1_n], [1_n, 0]]."""
        size = 2 * n
        lam = [[0] * size for _ in range(size)]
        for i in range(n):
            lam[i][n + i] = -1
            lam[n + i][i] = 1
        return cls(lam, "minus")

    @classmethod
    def plus(cls, n):
        """Lambda = [[0, 1_n], [-1_n, 0]]."""
        size = 2 * n
        lam = [[0] * size for _ in range(size)]
        for i in range(n):
            lam[i][n + i] = 1
            lam[n + i][i] = -1
        return cls(lam, "plus")

    @classmethod
    def named(cls, name, n):
        if name == "minus":
            return cls.minus(n)
        if name == "plus":
            return cls.plus(n)
        raise FrameError(f"unknown lambda convention {name!r}")

    def __eq__(self, other):
        return isinstance(other, SymplecticFrame) and self.lam == other.lam

    def __hash__(self):
        return hash(self.lam)

    def __repr__(self):
        return f"SymplecticFrame(n={self.dim_n}, {self.convention})"

    def lam_int_rows(self):
        return [[int(x) if x.denominator == 1 else str(x) for x in row] for row in self.lam]

    def moyal_tables(self, kmax):
        """Operator tables for orders 0..kmax of exp((nu/2) lam^{ij} d_i (x) d_j)."""
        while len(self._tables) <= kmax:
            self._tables.append(self._table(len(self._tables)))
        return self._tables[: kmax + 1]

    def _table(self, k):
        size = 2 * self.dim_n
        entries = [(i, j, self.lam[i][j]) for i in range(size) for j in range(size)
                   if self.lam[i][j] != 0]
        acc = {}
        half_k = Fraction(1, 2 ** k)
        for combo in combinations_with_replacement(range(len(entries)), k):
            counts = {}
            for e in combo:
                counts[e] = counts.get(e, 0) + 1
            coeff = half_k
            a = [0] * size
            b = [0] * size
            for e, m in counts.items():
                i, j, lam = entries[e]
                coeff *= lam ** m / _factorial(m)
                a[i] += m
                b[j] += m
            key = (tuple(a), tuple(b))
            acc[key] = acc.get(key, 0) + coeff
        return [(c, a, b) for (a, b), c in sorted(acc.items()) if c != 0]

    def poisson(self, f: WeylSeries, g: WeylSeries, *, fiber=False):
        """{f, g} = lam^{ij} d_i f d_j g in base (default) or fiber variables."""
        size = 2 * self.dim_n
        der = (lambda s, i: s.fiber_derivative(i)) if fiber else (lambda s, i: s.base_derivative(i))
        out = WeylSeries.zero(f.dim_n, f._joint_trunc(g))
        df = [der(f, i) for i in range(size)]
        dg = [der(g, j) for j in range(size)]
        for i in range(size):
            for j in range(size):
                if self.lam[i][j]:
                    out = out + df[i].pointwise(dg[j]).scale(self.lam[i][j])
        return out


def _factorial(m):
    out = 1
    for j in range(2, m + 1):
        out *= j
    return out


# ---------------------------------------------------------------------------
# products


def _items(s):
    return [(k[0], k[1], k[2], k[3], c) for k, c in s._terms.items()]


def _check_pair(f, g, frame):
    if not isinstance(f, WeylSeries) or not isinstance(g, WeylSeries):
        raise TypeError("moyal_product expects WeylSeries arguments")
    if f.dim_n != g.dim_n or f.dim_n != frame.dim_n:
        raise DimensionMismatch(f"dimensions {f.dim_n}, {g.dim_n} vs frame {frame.dim_n}")
    if f.trunc_N is not None and g.trunc_N is not None and f.trunc_N != g.trunc_N:
        raise TruncationMismatch(f"truncations {f.trunc_N} vs {g.trunc_N}")


def _raw_product(f, g, frame, max_d):
    kmax = min(f.max_fiber_degree(), g.max_fiber_degree())
    tables = frame.moyal_tables(kmax)
    return moyal_terms(_items(f), _items(g), tables, -1 if max_d is None else max_d)


def moyal_product(f: WeylSeries, g: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """f * g = sum_k (nu/2)^k/k! lam^{i1 j1}..lam^{ik jk} d_{i..} f d_{j..} g on fiber variables."""
    _check_pair(f, g, frame)
    N = f.trunc_N if f.trunc_N is not None else g.trunc_N
    return WeylSeries._raw(f.dim_n, N, _raw_product(f, g, frame, N))


def star_commutator(f: WeylSeries, g: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    return moyal_product(f, g, frame) - moyal_product(g, f, frame)


def _parity_split(a):
    even = a.filter(lambda k: not form_degree_of(k[3]) & 1)
    odd = a.filter(lambda k: form_degree_of(k[3]) & 1)
    return even, odd


def graded_commutator(a: WeylSeries, b: WeylSeries, frame: SymplecticFrame, max_d=None):
    """[a, b] = a*b - (-1)^{|a||b|} b*a with |.| the form degree parity."""
    _check_pair(a, b, frame)
    N = a.trunc_N if a.trunc_N is not None else b.trunc_N
    cut = N if max_d is None else max_d
    a_even, a_odd = _parity_split(a)
    b_even, b_odd = _parity_split(b)
    acc = {}

    def add(x, y, sign):
        if x.is_zero() or y.is_zero():
            return
        for k, c in _raw_product(x, y, frame, cut).items():
            acc[k] = acc.get(k, 0) + sign * c

    add(a, b, 1)
    add(b_even, a, -1)
    add(b_odd, a_even, -1)
    add(b_odd, a_odd, 1)
    return WeylSeries._raw(a.dim_n, None if cut is None else cut, acc)


def nu_bracket(a: WeylSeries, b: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """(1/nu)[a, b] with graded signs; exact division, result cut at the input truncation."""
    N = a.trunc_N if a.trunc_N is not None else b.trunc_N
    wide = None if N is None else N + 2
    comm = graded_commutator(a, b, frame, max_d=wide)
    return comm.nu_shift(-1).truncate(N)


def involution(f: WeylSeries) -> WeylSeries:
    return f.involution()


def total_degree(f: WeylSeries):
    return f.total_degree()


def truncate(f: WeylSeries, N: int) -> WeylSeries:
    return f.truncate(N)
