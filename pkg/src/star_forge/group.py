"""Automorphisms e^{ad(H/nu)} of the truncated Weyl algebra and their group law.

An exponent acting on the algebra truncated at degree N is stored through degree
N + 1: the action on a generator Z^i at degree N sees exponent terms of degree N + 1.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .algebra import SymplecticFrame, WeylSeries, key_degree, nu_bracket
from .errors import CCRViolation, FrameError, InvalidExponent
from .linalg import identity, inverse, is_symplectic, matmul
from .weyl_functions import weyl_continuation


def validate_exponent(H: WeylSeries):
    """Reject exponents whose adjoint action would not raise the degree."""
    if H.has_forms():
        raise InvalidExponent("exponents carry no form part")
    for key in H.terms:
        if any(key[1]) and key_degree(key) < 3:
            raise InvalidExponent(f"fiber term of degree {key_degree(key)} < 3 in exponent")
    return H


def ad_nu(H: WeylSeries, a: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """ad(H/nu)(a) = [H, a]/nu, cut at a's truncation (H is used untruncated)."""
    return nu_bracket(H.truncate(None), a, frame)


def ad_exp_series(H: WeylSeries, a: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """sum_k ad(H/nu)^k(a)/k!; terminates because every ad raises the degree."""
    validate_exponent(H)
    out = a
    term = a
    k = 0
    while True:
        k += 1
        term = ad_nu(H, term, frame).scale(Fraction(1, k))
        if term.is_zero():
            return out
        out = out + term


class GroupExponent:
    """H = g + nu^2 * #f, acting as e^{ad(H/nu)} on the algebra truncated at ``trunc_N``.

    ``g`` is a base polynomial (central); ``f`` a base polynomial whose continuation
    carries the fiber dependence.  Both may contain powers of nu.
    """

    __slots__ = ("g_part", "f_part", "frame", "trunc_N", "series")

    def __init__(self, g_part: WeylSeries, f_part: WeylSeries, frame: SymplecticFrame, trunc_N: int):
        for p in (g_part, f_part):
            if p.has_fiber() or p.has_forms():
                raise InvalidExponent("g and f must be base polynomials")
            if p.dim_n != frame.dim_n:
                raise InvalidExponent("dimension mismatch with frame")
        self.g_part = g_part.truncate(None)
        self.f_part = f_part.truncate(None)
        self.frame = frame
        self.trunc_N = trunc_N
        lifted = weyl_continuation(self.f_part, trunc_N=None).nu_shift(2)
        self.series = validate_exponent((self.g_part + lifted).truncate(trunc_N + 1))

    @classmethod
    def zero(cls, frame, trunc_N):
        z = WeylSeries.zero(frame.dim_n)
        return cls(z, z, frame, trunc_N)

    @classmethod
    def from_series(cls, H: WeylSeries, frame: SymplecticFrame, trunc_N: int):
        """Split H into g + nu^2 #f, normalized so that f has no constant term."""
        n = frame.dim_n
        H = H.truncate(trunc_N + 1)
        zero = (0,) * (2 * n)
        moving = H.drop_central()
        acc = {}
        for (nu, fib, base, mask), c in moving.items():
            if sum(fib) != 1:
                continue
            if nu < 2:
                raise InvalidExponent("fiber-dependent part must carry nu^2")
            i = fib.index(1)
            b = list(base)
            b[i] += 1
            key = (nu - 2, zero, tuple(b), 0)
            if key in acc:
                continue
            acc[key] = c / b[i]
        f = WeylSeries(n, None, acc)
        g = H.fiber_free().truncate(None) - f.nu_shift(2).truncate(None)
        out = cls(g, f, frame, trunc_N)
        if out.series != H:
            raise InvalidExponent("series is not of the form g + nu^2 #f")
        return out

    def __eq__(self, other):
        return (isinstance(other, GroupExponent) and self.frame == other.frame
                and self.trunc_N == other.trunc_N and self.series == other.series)

    def __hash__(self):
        return hash((self.series, self.trunc_N))

    def __repr__(self):
        return f"GroupExponent(N={self.trunc_N}, H={self.series.canonical_text()!r})"

    def neg(self):
        return GroupExponent(-self.g_part, -self.f_part, self.frame, self.trunc_N)

    def scale(self, c):
        return GroupExponent(self.g_part.scale(c), self.f_part.scale(c), self.frame, self.trunc_N)

    def to_json(self):
        from .algebra import format_rational
        return {"g": self.g_part.canonical_text(), "f": self.f_part.canonical_text(),
                "n": self.frame.dim_n, "N": self.trunc_N,
                "lambda": [[format_rational(x) for x in row] for row in self.frame.lam]}


def _exponent_series(H):
    return H.series if isinstance(H, GroupExponent) else validate_exponent(H)


def ad_exp_apply(H, a: WeylSeries, frame: SymplecticFrame = None) -> WeylSeries:
    """e^{ad(H/nu)}(a) on the algebra truncated at a.trunc_N."""
    if isinstance(H, GroupExponent):
        frame = H.frame
        if a.trunc_N != H.trunc_N:
            from .errors import TruncationMismatch
            raise TruncationMismatch(f"exponent N={H.trunc_N} vs element N={a.trunc_N}")
    if frame is None:
        raise FrameError("a frame is required for a raw exponent")
    return ad_exp_series(_exponent_series(H), a, frame)


# ---------------------------------------------------------------------------
# BCH


def _dynkin_coefficient(word):
    """Coefficient of the right-nested bracket of ``word`` in log(e^X e^Y).

    Sums (-1)^{m-1}/m * 1/(L * prod p_i! q_i!) over splittings of the word into m
    blocks X^p Y^q with p + q > 0 (0 stands for X, 1 for Y).
    """
    L = len(word)
    # ways[pos][m]: weighted count of splittings of word[:pos] into m blocks
    ways = [dict() for _ in range(L + 1)]
    ways[0][0] = Fraction(1)
    for start in range(L):
        if not ways[start]:
            continue
        for end in range(start + 1, L + 1):
            block = word[start:end]
            p = block.count(0)
            if block != (0,) * p + (1,) * (len(block) - p):
                break
            w = Fraction(1, factorial(p) * factorial(len(block) - p))
            for m, v in ways[start].items():
                ways[end][m + 1] = ways[end].get(m + 1, 0) + v * w
    total = Fraction(0)
    for m, v in ways[L].items():
        total += Fraction((-1) ** (m - 1), m) * v
    return total / L


def bch_series(X: WeylSeries, Y: WeylSeries, frame: SymplecticFrame, cut: int) -> WeylSeries:
    """log(e^X e^Y) in the Lie algebra with bracket [a, b]/nu, through degree ``cut``."""
    X = X.truncate(cut)
    Y = Y.truncate(cut)
    movable = (X.drop_central(), Y.drop_central())
    out = X + Y
    memo = {}

    def nested(word):
        # right-nested bracket [w0, [w1, ... w_{L-1}]] computed with suffix memo
        if word in memo:
            return memo[word]
        if len(word) == 1:
            val = movable[word[0]]
        else:
            tail = nested(word[1:])
            val = tail if tail.is_zero() else nu_bracket(movable[word[0]], tail, frame)
        memo[word] = val
        return val

    frontier = [(0,), (1,)]
    while frontier:
        nxt = []
        for suffix in frontier:
            for head in (0, 1):
                word = (head,) + suffix
                val = nested(word)
                if val.is_zero():
                    continue
                c = _dynkin_coefficient(word)
                if c:
                    out = out + val.scale(c)
                nxt.append(word)
        frontier = nxt
    return out.truncate(cut)


def bch_compose(H1: GroupExponent, H2: GroupExponent) -> GroupExponent:
    """Exponent of e^{ad(H1/nu)} o e^{ad(H2/nu)}."""
    if H1.frame != H2.frame or H1.trunc_N != H2.trunc_N:
        raise InvalidExponent("exponents must share frame and truncation")
    H = bch_series(H1.series, H2.series, H1.frame, H1.trunc_N + 1)
    return GroupExponent.from_series(H, H1.frame, H1.trunc_N)


def bch_inverse(H: GroupExponent) -> GroupExponent:
    return H.neg()


# ---------------------------------------------------------------------------
# factorization


class AutomorphismData:
    """Phi = A o e^{ad((c + F)/nu)}; ``c`` is the nu^2-series part (always 0 from images)."""

    __slots__ = ("A", "c_part", "F_part", "frame", "trunc_N")

    def __init__(self, A, c_part, F_part, frame, trunc_N):
        self.A = A
        self.c_part = c_part
        self.F_part = F_part
        self.frame = frame
        self.trunc_N = trunc_N

    def __repr__(self):
        return f"AutomorphismData(A={self.A}, c={self.c_part}, F={self.F_part.canonical_text()!r})"


def linear_images(A, frame, trunc_N):
    n = frame.dim_n
    width = 2 * n
    zero = (0,) * width
    out = []
    for i in range(width):
        out.append(WeylSeries(n, trunc_N, [
            ((0, tuple(int(t == j) for t in range(width)), zero, 0), A[i][j])
            for j in range(width) if A[i][j] != 0]))
    return out


def realize(A, F: WeylSeries, frame: SymplecticFrame, trunc_N: int):
    """Images of Z^i under A o e^{ad(F/nu)} (A acts last, as the substitution Z -> A Z)."""
    n = frame.dim_n
    images = []
    for i in range(2 * n):
        moved = ad_exp_apply(F, WeylSeries.fiber_var(n, i, trunc_N), frame)
        images.append(moved.substitute_fiber_linear(A))
    return images


def _linear_part(images, frame):
    n = frame.dim_n
    width = 2 * n
    A = [[Fraction(0)] * width for _ in range(width)]
    for i, img in enumerate(images):
        for (nu, fib, base, mask), c in img.items():
            if any(base) or mask:
                raise CCRViolation("images must be fiber series without base or form part", 0)
            if nu == 0 and sum(fib) == 1:
                A[i][fib.index(1)] = c
    return A


def integrate_adjoint(targets, frame, degree):
    """Solve [F, Z^i]/nu = targets[i] for F homogeneous of the given degree.

    [F, Z^i]/nu = -lam^{ij} d_j F, so d_j F = -omega_{ji} targets[i]; integrate
    each fiber-degree piece by the Euler identity.  Returns F (no central part).
    """
    n = frame.dim_n
    width = 2 * n
    grads = []
    for j in range(width):
        acc = WeylSeries.zero(n)
        for i in range(width):
            w = frame.omega[j][i]
            if w:
                acc = acc + targets[i].truncate(None).scale(-w)
        grads.append(acc)
    acc = {}
    for j in range(width):
        for (nu, fib, base, mask), c in grads[j].items():
            f = list(fib)
            f[j] += 1
            p = sum(f)
            key = (nu, tuple(f), base, mask)
            acc[key] = acc.get(key, 0) + c / p
    return WeylSeries(n, None, acc).filter(lambda k: key_degree(k) == degree)


def factorize_automorphism(images, frame: SymplecticFrame) -> AutomorphismData:
    """Recover (A, c, F) with A o e^{ad((c+F)/nu)} reproducing the images."""
    n = frame.dim_n
    width = 2 * n
    if len(images) != width:
        raise CCRViolation(f"expected {width} images, got {len(images)}", 0)
    N = images[0].trunc_N
    if N is None or any(img.trunc_N != N for img in images):
        raise CCRViolation("images must share a finite truncation", 0)
    for i, img in enumerate(images):
        const = img.filter(lambda k: key_degree(k) == 0)
        if not const.is_zero():
            raise CCRViolation(f"image of Z{i + 1} has a degree-0 part", 0, const)
    A = _linear_part(images, frame)
    lam = [list(r) for r in frame.lam]
    try:
        A_inv = inverse(A, "degree-1 part")
    except FrameError as exc:
        raise CCRViolation(str(exc), 1) from None
    if not is_symplectic(A, lam):
        raise CCRViolation("degree-1 part is not symplectic", 1)
    current = [img.substitute_fiber_linear(A_inv) for img in images]
    pieces = []
    for k in range(3, N + 2):
        targets = [current[i].filter(lambda key: key_degree(key) == k - 1) for i in range(width)]
        if all(t.is_zero() for t in targets):
            continue
        Fk = integrate_adjoint(targets, frame, k)
        for i in range(width):
            got = ad_nu(Fk, WeylSeries.fiber_var(n, i, N), frame)
            if got != targets[i].truncate(N):
                raise CCRViolation(f"CCR violated at degree {k - 1}", k - 1,
                                   targets[i] - got)
        pieces.append(Fk)
        current = [ad_exp_series(-Fk, c, frame) for c in current]
    for i in range(width):
        rest = current[i] - WeylSeries.fiber_var(n, i, N)
        if not rest.is_zero():
            raise CCRViolation(f"residual after peeling at degree {rest.min_degree()}",
                               rest.min_degree(), rest)
    F = WeylSeries.zero(n, None)
    for piece in reversed(pieces):
        F = bch_series(piece, F, frame, N + 1)
    return AutomorphismData(A, Fraction(0), F.drop_central().truncate(N + 1), frame, N)


def random_symplectic(rng, frame, steps=4, entries=(-2, -1, 1, 2)):
    """Product of symplectic shears and scalings (exact rationals)."""
    n = frame.dim_n
    width = 2 * n
    lam = [list(r) for r in frame.lam]
    A = identity(width)
    for _ in range(steps):
        kind = rng.random()
        if kind < 0.7:
            # Z -> Z + s * lam S Z... use the exponential of a nilpotent Hamiltonian matrix
            i = rng.randrange(width)
            s = Fraction(rng.choice(entries))
            # shear along the pairing partner: Z^j += s * lam^{j i} * Z^i... built via X = lam S, S = e_i e_i^T
            X = [[Fraction(0)] * width for _ in range(width)]
            for j in range(width):
                X[j][i] = s * lam[j][i]
            step = [[Fraction(int(r == c)) + X[r][c] for c in range(width)] for r in range(width)]
        else:
            i = rng.randrange(n)
            s = Fraction(rng.choice((2, 3, Fraction(1, 2), Fraction(-1, 3))))
            step = identity(width)
            step[i][i] = s
            step[n + i][n + i] = 1 / s
        A = matmul(step, A)
    assert is_symplectic(A, lam)
    return A


# ---------------------------------------------------------------------------
# seminorms


def grid_points(n, box=(-1.0, 1.0), points=33):
    axes = [np.linspace(box[0], box[1], points)] * (2 * n)
    mesh = np.meshgrid(*axes, indexing="ij")
    return [m.ravel() for m in mesh]


def _evaluate(poly: WeylSeries, grid):
    out = np.zeros_like(grid[0])
    for (nu, fib, base, mask), c in poly.items():
        term = np.full_like(grid[0], float(c))
        for i, e in enumerate(base):
            if e:
                term = term * grid[i] ** e
        out = out + term
    return out


def _nu_parts(f: WeylSeries):
    parts = {}
    for (nu, fib, base, mask), c in f.items():
        if any(fib) or mask:
            raise ValueError("seminorms are defined on base functions")
        parts.setdefault(nu, {})[(0, fib, base, 0)] = c
    return {l: WeylSeries(f.dim_n, None, t) for l, t in parts.items()}


def seminorm(f: WeylSeries, i: int, box=(-1.0, 1.0), points=33) -> float:
    """sum over |a| + 2l <= i of the grid sup of |d^a f_l| on the box [lo, hi]^{2n}."""
    if box[1] < box[0]:
        raise ValueError("empty box")
    n = f.dim_n
    grid = grid_points(n, box, points)
    total = 0.0
    for l, fl in _nu_parts(f).items():
        budget = i - 2 * l
        if budget < 0:
            continue
        for order in range(budget + 1):
            for alpha in _multi_indices(2 * n, order):
                d = fl
                for var, e in enumerate(alpha):
                    for _ in range(e):
                        d = d.base_derivative(var)
                if not d.is_zero():
                    total += float(np.max(np.abs(_evaluate(d, grid))))
    return total


def _multi_indices(width, order):
    for combo in itertools.combinations_with_replacement(range(width), order):
        alpha = [0] * width
        for v in combo:
            alpha[v] += 1
        yield tuple(alpha)


def _indices_up_to(width, bound):
    for order in range(bound + 1):
        yield from _multi_indices(width, order)


@lru_cache(maxsize=None)
def _quasi_mult_constant(i, n):
    total = Fraction(0)
    for k in range(i // 2 + 1):
        for l in range(i // 2 + 1):
            for alpha in _indices_up_to(n, i // 2):
                for beta in _indices_up_to(n, i // 2):
                    used = 2 * k + 2 * l + 2 * sum(alpha) + 2 * sum(beta)
                    if used > i:
                        continue
                    weight = Fraction(1, 2 ** (sum(alpha) + sum(beta)))
                    for a in alpha + beta:
                        weight /= factorial(a)
                    for gamma in _indices_up_to(n, i - used):
                        for delta in _indices_up_to(n, i - used - sum(gamma)):
                            inner = 1
                            for g in gamma:
                                inner *= sum(comb(g, z) for z in range(g + 1))
                            for d in delta:
                                inner *= sum(comb(d, e) for e in range(d + 1))
                            total += weight * inner
    return total


def quasi_mult_constant(i: int, frame) -> Fraction:
    """Explicit C_i with ||f*g||_i <= C_i ||f||_i ||g||_i (literal index enumeration)."""
    if i < 0:
        raise ValueError("i must be non-negative")
    n = frame if isinstance(frame, int) else frame.dim_n
    return _quasi_mult_constant(i, n)


# ---------------------------------------------------------------------------
# product integral


def curve_at(coeffs, t):
    """X(t) = sum_j t^j coeffs[j] for GroupExponent coefficients."""
    t = Fraction(t)
    g = sum((X.g_part.scale(t ** j) for j, X in enumerate(coeffs)), WeylSeries.zero(coeffs[0].frame.dim_n))
    f = sum((X.f_part.scale(t ** j) for j, X in enumerate(coeffs)), WeylSeries.zero(coeffs[0].frame.dim_n))
    return GroupExponent(g, f, coeffs[0].frame, coeffs[0].trunc_N)


def product_integral(coeffs, mesh_m: int) -> GroupExponent:
    """Exponent of e^{X(t_{m-1})/m} o ... o e^{X(t_0)/m}, t_i = i/m (later factors on the left)."""
    if mesh_m < 1:
        raise ValueError("mesh_m must be at least 1")
    acc = None
    for i in range(mesh_m):
        factor = curve_at(coeffs, Fraction(i, mesh_m)).scale(Fraction(1, mesh_m))
        acc = factor if acc is None else bch_compose(factor, acc)
    return acc


def richardson_limit(coeffs, points=None):
    """Mesh-refined limit m -> infinity, by exact polynomial extrapolation in h = 1/m.

    The exponent at mesh m is a polynomial in 1/m whose degree is bounded by the
    truncation; Neville extrapolation to h = 0 through enough meshes is exact.  The
    number of meshes is increased until adding one more does not change the value.
    """
    base = coeffs[0]
    start = points or 4
    samples = {}

    def series(m):
        if m not in samples:
            samples[m] = product_integral(coeffs, m).series
        return samples[m]

    def extrapolate(ms):
        hs = [Fraction(1, m) for m in ms]
        vals = [series(m) for m in ms]
        # Neville at h = 0
        table = list(vals)
        for level in range(1, len(ms)):
            for j in range(len(ms) - level):
                hj, hk = hs[j], hs[j + level]
                table[j] = (table[j + 1].scale(hj) - table[j].scale(hk)).scale(1 / (hj - hk))
        return table[0]

    count = start
    prev = extrapolate(list(range(1, count + 1)))
    while True:
        count += 1
        cur = extrapolate(list(range(1, count + 1)))
        if cur == prev:
            return GroupExponent.from_series(cur, base.frame, base.trunc_N)
        if count > 40:
            raise ArithmeticError("mesh extrapolation did not stabilize")
        prev = cur


def mesh_defects(coeffs, meshes=(4, 8, 16, 32)):
    """Max-norm of exponent(m) - exponent(2m) for each m."""
    out = []
    for m in meshes:
        a = product_integral(coeffs, m).series
        b = product_integral(coeffs, 2 * m).series
        diff = a - b
        out.append(max((abs(float(c)) for c in diff.terms.values()), default=0.0))
    return out


def empirical_order(meshes, defects):
    """Worst observed order over consecutive mesh pairs: min log(d_k/d_{k+1}) / log(m_{k+1}/m_k)."""
    orders = [math.log(a / b) / math.log(mb / ma)
              for (ma, a), (mb, b) in zip(zip(meshes, defects), zip(meshes[1:], defects[1:]))]
    return min(orders)
