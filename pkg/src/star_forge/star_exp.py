"""Star exponentials e_*^{t A[Z]/mu} of quadratic forms, mu = -nu.

Two exact routes (term-by-term star powers, and the closed det^{-1/2} / tanh
form) plus a float Riccati integrator and the Cayley transform.

A ``ParamSeries`` stores scaled coefficients: ``coeffs[k]`` is mu^k times the
t^k coefficient, which is a polynomial in nu and Z.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial

import numpy as np

from .algebra import SymplecticFrame, WeylSeries, moyal_product
from .errors import FrameError, SingularityError
from .linalg import as_matrix, identity, inverse, matadd, matmul, matscale


def exp_frame(n):
    """Frame used for star exponentials: lam = [[0, 1], [-1, 0]] blocks."""
    return SymplecticFrame.plus(n)


class ParamSeries:
    """Truncated t-series with coefficients mu^k * c_k stored as WeylSeries."""

    __slots__ = ("coeffs", "K")

    def __init__(self, coeffs):
        self.coeffs = list(coeffs)
        self.K = len(self.coeffs) - 1

    def __eq__(self, other):
        return isinstance(other, ParamSeries) and self.coeffs == other.coeffs

    def __sub__(self, other):
        return ParamSeries([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def table(self):
        return [c.canonical_text() for c in self.coeffs]


def quadratic_form(A, trunc_N=None):
    """A[Z] = Z^T A Z as a fiber series."""
    A = as_matrix(A)
    size = len(A)
    if any(A[i][j] != A[j][i] for i in range(size) for j in range(size)):
        raise FrameError("quadratic form matrix must be symmetric")
    n = size // 2
    zero = (0,) * size
    acc = {}
    for i in range(size):
        for j in range(size):
            if A[i][j]:
                e = [0] * size
                e[i] += 1
                e[j] += 1
                key = (0, tuple(e), zero, 0)
                acc[key] = acc.get(key, 0) + A[i][j]
    return WeylSeries(n, trunc_N, acc)


def star_exp_taylor(A, K: int, frame: SymplecticFrame = None) -> ParamSeries:
    """mu^k * (A[Z]/mu)^{*k}/k! = A[Z]^{*k}/k! for k <= K."""
    if K < 0:
        raise ValueError("K must be non-negative")
    size = len(A)
    frame = frame or exp_frame(size // 2)
    N = 2 * K
    q = quadratic_form(A, N)
    coeffs = [WeylSeries.constant(frame.dim_n, 1, N)]
    power = coeffs[0]
    for k in range(1, K + 1):
        power = moyal_product(power, q, frame)
        coeffs.append(power.scale(Fraction(1, factorial(k))))
    return ParamSeries(coeffs)


# formal matrix power series in t: list of matrices, index = power of t


def _ms_mul(a, b, K):
    size = len(a[0])
    out = [[[Fraction(0)] * size for _ in range(size)] for _ in range(K + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            if i + j <= K:
                out[i + j] = matadd(out[i + j], matmul(x, y))
    return out


def _ms_inverse(a, K):
    """Inverse of a matrix series with invertible constant term."""
    size = len(a[0])
    a0_inv = inverse(a[0], "constant term")
    out = [a0_inv]
    for k in range(1, K + 1):
        acc = [[Fraction(0)] * size for _ in range(size)]
        for j in range(1, k + 1):
            if j < len(a):
                acc = matadd(acc, matmul(a[j], out[k - j]))
        out.append(matscale(matmul(a0_inv, acc), -1))
    return out


def _cosh_sinh(a, K):
    size = len(a)
    cosh = [[[Fraction(0)] * size for _ in range(size)] for _ in range(K + 1)]
    sinh = [[[Fraction(0)] * size for _ in range(size)] for _ in range(K + 1)]
    power = identity(size)
    for k in range(K + 1):
        target = cosh if k % 2 == 0 else sinh
        target[k] = matscale(power, Fraction(1, factorial(k)))
        power = matmul(power, a)
    return cosh, sinh


def _scalar_log_det(series, K):
    """tr log(series) for a matrix series with constant term identity."""
    size = len(series[0])
    E = [[[Fraction(0)] * size for _ in range(size)]] + series[1:]
    out = [Fraction(0)] * (K + 1)
    power = [identity(size)] + [[[Fraction(0)] * size for _ in range(size)] for _ in range(K)]
    for j in range(1, K + 1):
        power = _ms_mul(power, E, K)
        sign = Fraction((-1) ** (j + 1), j)
        for k in range(K + 1):
            out[k] += sign * sum(power[k][i][i] for i in range(size))
    return out


def _scalar_exp(s, K):
    """exp of a scalar series with zero constant term."""
    out = [Fraction(1)] + [Fraction(0)] * K
    power = [Fraction(1)] + [Fraction(0)] * K
    for j in range(1, K + 1):
        power = [sum(power[i] * s[k - i] for i in range(k + 1)) for k in range(K + 1)]
        for k in range(K + 1):
            out[k] += power[k] / factorial(j)
    return out


def amplitude_series(a, K):
    """det^{-1/2} cosh(t a) = exp(-1/2 tr log cosh(t a)) as a t-series."""
    cosh, _ = _cosh_sinh(a, K)
    logdet = _scalar_log_det(cosh, K)
    return _scalar_exp([-x / 2 for x in logdet], K)


def phase_series(a, lam, K):
    """Q(t) = lam^{-1} tanh(t a) as a matrix t-series."""
    cosh, sinh = _cosh_sinh(a, K)
    tanh = _ms_mul(sinh, _ms_inverse(cosh, K), K)
    lam_inv = inverse(lam, "lambda")
    return [matmul(lam_inv, m) for m in tanh]


def star_exp_closed(A, K: int, frame: SymplecticFrame = None) -> ParamSeries:
    """g(t) * exp(Q(t)[Z]/mu) re-expanded in t, with a = lam A."""
    if K < 0:
        raise ValueError("K must be non-negative")
    A = as_matrix(A)
    size = len(A)
    frame = frame or exp_frame(size // 2)
    n = frame.dim_n
    N = 2 * K
    lam = [list(r) for r in frame.lam]
    a = matmul(lam, A)
    amp = amplitude_series(a, K)
    Q = phase_series(a, lam, K)
    # symmetrize (tanh series of lam A keeps lam^{-1} tanh symmetric; enforce exactly)
    qforms = [quadratic_form([[(m[i][j] + m[j][i]) / 2 for j in range(size)] for i in range(size)])
              for m in Q]
    # P_j(t) = (Q(t)[Z])^j / j!, a t-series of fiber polynomials
    zero_series = [WeylSeries.zero(n)] * (K + 1)
    powers = [[WeylSeries.constant(n, 1)] + zero_series[1:]]
    for j in range(1, K + 1):
        prev = powers[-1]
        cur = [WeylSeries.zero(n) for _ in range(K + 1)]
        for i in range(K + 1):
            if prev[i].is_zero():
                continue
            for m in range(1, K + 1 - i):
                if not qforms[m].is_zero():
                    cur[i + m] = cur[i + m] + prev[i].pointwise(qforms[m]).scale(Fraction(1, j))
        powers.append(cur)
    coeffs = []
    minus_nu = WeylSeries.nu(n).scale(-1)
    for k in range(K + 1):
        total = WeylSeries.zero(n)
        for j in range(k + 1):
            # t^k coefficient of g(t) P_j(t), times mu^{k-j}
            inner = WeylSeries.zero(n)
            for i in range(k + 1):
                if amp[k - i] and not powers[j][i].is_zero():
                    inner = inner + powers[j][i].scale(amp[k - i])
            if inner.is_zero():
                continue
            total = total + inner.pointwise(minus_nu.power(k - j))
        coeffs.append(total.truncate(N))
    return ParamSeries(coeffs)


def evolution_defect(series: ParamSeries, A, frame: SymplecticFrame = None) -> ParamSeries:
    """(k+1) c_{k+1} - A[Z] * c_k in scaled coefficients; zero iff dF/dt = (A[Z]/mu) * F."""
    size = len(A)
    frame = frame or exp_frame(size // 2)
    N = 2 * series.K
    q = quadratic_form(A, N)
    out = []
    for k in range(series.K):
        lhs = series.coeffs[k + 1].truncate(N).scale(k + 1)
        rhs = moyal_product(series.coeffs[k].truncate(N), q, frame)
        out.append(lhs - rhs)
    return ParamSeries(out)


# ---------------------------------------------------------------------------
# Cayley transform


def cayley(X):
    """C(X) = (1 - X)(1 + X)^{-1}, exact."""
    X = as_matrix(X)
    size = len(X)
    one = identity(size)
    try:
        inv = inverse(matadd(one, X), "1 + X")
    except FrameError as exc:
        raise SingularityError(str(exc)) from None
    return matmul(matadd(one, X, -1), inv)


def cayley_inv(g):
    """Inverse transform; the Cayley map is its own inverse."""
    return cayley(g)


def cayley_float(X):
    X = np.asarray(X, dtype=float)
    one = np.eye(len(X))
    return (one - X) @ np.linalg.inv(one + X)


# ---------------------------------------------------------------------------
# Riccati system


def _closed_amplitude_matrix(a, b, t):
    from scipy.linalg import expm
    one = np.eye(len(a))
    return (expm(a * t) @ (one + b) + expm(-a * t) @ (one - b)) / 2


def riccati_closed(A, B, t, lam=None):
    """Closed forms q(t) = C^{-1}(e^{-2at} C(b)), g(t) = det^{-1/2} M(t)."""
    from scipy.linalg import expm
    A = np.asarray(A, dtype=float)
    size = len(A)
    lam = np.asarray(lam if lam is not None else exp_frame(size // 2).lam, dtype=float)
    a = lam @ A
    b = lam @ np.asarray(B, dtype=float)
    q = cayley_float(expm(-2 * a * t) @ cayley_float(b))
    g = np.linalg.det(_closed_amplitude_matrix(a, b, t)) ** -0.5
    return q, g


def riccati_solve(A, B, t_end: float, steps: int, lam=None, tol=1e-10):
    """RK4 for dq/dt = (1+q) a (1-q), dg/dt = -1/2 tr(a q) g with q(0) = lam B, g(0) = 1.

    Returns (ts, q_path, g_path).  Raises SingularityError if the closed-form
    amplitude determinant comes within ``tol`` of zero on the way, or q leaves
    every bounded region (|q| > 1/tol or non-finite).
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    A = np.asarray([[float(x) for x in row] for row in A])
    size = len(A)
    lam = np.asarray(lam if lam is not None else [[float(x) for x in r] for r in exp_frame(size // 2).lam],
                     dtype=float)
    a = lam @ A
    b = lam @ np.asarray([[float(x) for x in row] for row in B])
    one = np.eye(size)

    def rhs(q, g):
        return (one + q) @ a @ (one - q), -0.5 * np.trace(a @ q) * g

    h = t_end / steps
    q = b.copy()
    g = 1.0
    ts = [0.0]
    qs = [q.copy()]
    gs = [g]
    for k in range(steps):
        t = k * h
        with np.errstate(over="ignore", invalid="ignore"):
            k1q, k1g = rhs(q, g)
            k2q, k2g = rhs(q + h / 2 * k1q, g + h / 2 * k1g)
            k3q, k3g = rhs(q + h / 2 * k2q, g + h / 2 * k2g)
            k4q, k4g = rhs(q + h * k3q, g + h * k3g)
            q = q + h / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
            g = g + h / 6 * (k1g + 2 * k2g + 2 * k3g + k4g)
        t_next = t + h
        d = np.linalg.det(_closed_amplitude_matrix(a, b, t_next))
        finite = np.all(np.isfinite(q)) and np.isfinite(g)
        if abs(d) < tol or not finite or np.abs(q).max() > 1 / tol:
            raise SingularityError(f"amplitude determinant vanishes near t = {t_next:.6g}", t_next)
        ts.append(t_next)
        qs.append(q.copy())
        gs.append(g)
    return np.array(ts), np.array(qs), np.array(gs)
