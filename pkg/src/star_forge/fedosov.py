"""Fedosov connection on the flat chart: delta, its homotopy inverse, the symplectic
connection, the recursion for r, flatness auditing, and flat sections.

The connection is D = nabla - delta + ad(r/nu) with
    delta(a)  = [omega_{ij} dz^i Z^j, a]/nu        (graded)
    nabla(a)  = d_base(a) + [Gamma~, a]/nu,  Gamma~ = 1/2 omega_{kl} Gamma^l_{ij} Z^k Z^j dz^i.
D is flat exactly when delta r = R + nabla r + r*r/nu, where R is the input curvature
and R differs from the curvature of nabla by a central 2-form.
"""

from __future__ import annotations

from fractions import Fraction

from .algebra import SymplecticFrame, WeylSeries, form_degree_of, key_degree, nu_bracket
from .errors import FlatnessError, StarForgeError


class FormDegreeOverflow(StarForgeError, ValueError):
    pass


def _check_form_degree(a, limit=1):
    for k in a.terms:
        if form_degree_of(k[3]) > limit:
            raise FormDegreeOverflow(f"form degree {form_degree_of(k[3])} exceeds {limit}")


def symplectic_one_form(frame: SymplecticFrame, trunc_N=None):
    """omega_{ij} dz^i Z^j."""
    n = frame.dim_n
    width = 2 * n
    out = WeylSeries.zero(n, trunc_N)
    for i in range(width):
        for j in range(width):
            w = frame.omega[i][j]
            if w:
                term = WeylSeries.dz(n, i).pointwise(WeylSeries.fiber_var(n, j)).scale(w)
                out = out + term.truncate(trunc_N)
    return out


def delta(a: WeylSeries, frame: SymplecticFrame) -> WeylSeries:
    """Graded commutator with omega_{ij} dz^i Z^j, divided by nu."""
    _check_form_degree(a)
    theta = symplectic_one_form(frame).truncate(None)
    return nu_bracket(theta, a, frame)


def interior(mask, k):
    """(sign, new_mask) for removing dz^k from a wedge monomial; sign 0 if absent."""
    if not mask >> k & 1:
        return 0, mask
    below = bin(mask & ((1 << k) - 1)).count("1")
    return (-1 if below & 1 else 1), mask & ~(1 << k)


def delta_inv(a: WeylSeries, frame: SymplecticFrame = None) -> WeylSeries:
    """On a monomial of fiber degree p and form degree q: Z^k i(d/dz^k) a / (p + q)."""
    acc = {}
    for (nu, fib, base, mask), c in a.items():
        p = sum(fib)
        q = form_degree_of(mask)
        if p + q == 0 or q == 0:
            continue
        for k in range(len(fib)):
            sign, rest = interior(mask, k)
            if not sign:
                continue
            f = list(fib)
            f[k] += 1
            key = (nu, tuple(f), base, rest)
            acc[key] = acc.get(key, 0) + sign * c / (p + q)
    return WeylSeries._raw(a.dim_n, a.trunc_N, acc)


def center_projection(a: WeylSeries) -> WeylSeries:
    """Part with neither fiber generators nor forms."""
    return a.filter(lambda k: not any(k[1]) and not k[3])


def d_base(a: WeylSeries) -> WeylSeries:
    """Exterior derivative in the base: sum_i dz^i wedge d/dz^i (dz^i placed on the left)."""
    n = a.dim_n
    out = WeylSeries.zero(n, a.trunc_N)
    for i in range(2 * n):
        part = a.base_derivative(i)
        if not part.is_zero():
            out = out + WeylSeries.dz(n, i).pointwise(part)
    return out


def is_symplectic_connection(gamma, frame):
    """omega_{ml} Gamma^l_{ij} totally symmetric (torsion free and omega parallel)."""
    width = 2 * frame.dim_n
    low = lowered_gamma(gamma, frame)
    for m in range(width):
        for i in range(width):
            for j in range(width):
                v = low[m][i][j]
                if v != low[i][m][j] or v != low[m][j][i]:
                    return False
    return True


def lowered_gamma(gamma, frame):
    width = 2 * frame.dim_n
    return [[[sum(frame.omega[m][l] * Fraction(gamma[l][i][j]) for l in range(width))
              for j in range(width)] for i in range(width)] for m in range(width)]


def gamma_from_symmetric(T, frame):
    """Gamma^l_{ij} = lam^{lm} T_{mij} for a totally symmetric tensor T."""
    width = 2 * frame.dim_n
    return [[[sum(frame.lam[l][m] * Fraction(T[m][i][j]) for m in range(width))
              for j in range(width)] for i in range(width)] for l in range(width)]


class FedosovState:
    """Frame, constant symplectic connection Gamma^l_{ij}, curvature input R and cutoff N.

    ``r`` is filled by :func:`fedosov_recursion`; it is kept through degree N + 1 so
    the flatness defect (which lowers degree by one) is exact through degree N.
    """

    def __init__(self, frame: SymplecticFrame, R_omega: WeylSeries, trunc_N: int, gamma=None, r=None):
        width = 2 * frame.dim_n
        if gamma is None:
            gamma = [[[Fraction(0)] * width for _ in range(width)] for _ in range(width)]
        self.gamma = [[[Fraction(x) for x in row] for row in plane] for plane in gamma]
        if not is_symplectic_connection(self.gamma, frame):
            raise ValueError("Gamma is not a symplectic connection (omega Gamma must be totally symmetric)")
        self.frame = frame
        self.trunc_N = trunc_N
        self.R_omega = R_omega.truncate(trunc_N + 1)
        for k in self.R_omega.terms:
            if form_degree_of(k[3]) != 2:
                raise ValueError("curvature input must be a 2-form")
            if key_degree(k) < 2:
                raise ValueError("curvature input must have degree at least 2")
        self.r = r
        self._gamma_tilde = None

    def with_r(self, r):
        out = FedosovState(self.frame, self.R_omega, self.trunc_N, self.gamma, r)
        return out

    @property
    def gamma_tilde(self):
        if self._gamma_tilde is None:
            n = self.frame.dim_n
            width = 2 * n
            low = lowered_gamma(self.gamma, self.frame)
            acc = WeylSeries.zero(n)
            for k in range(width):
                for i in range(width):
                    for j in range(width):
                        c = low[k][i][j]
                        if c:
                            fib = [0] * width
                            fib[k] += 1
                            fib[j] += 1
                            acc = acc + WeylSeries.monomial(n, c / 2, fiber=fib, forms=(i,))
            self._gamma_tilde = acc
        return self._gamma_tilde


def nabla_symp(a: WeylSeries, state: FedosovState) -> WeylSeries:
    _check_form_degree(a)
    return _nabla(a, state)


def _nabla(a, state):
    out = d_base(a)
    gt = state.gamma_tilde
    if not gt.is_zero():
        out = out + nu_bracket(gt, a, state.frame)
    return out


def connection_curvature(state: FedosovState) -> WeylSeries:
    """Curvature 2-form of nabla: d Gamma~ + Gamma~ * Gamma~ / nu (exact for constant Gamma)."""
    gt = state.gamma_tilde
    n = state.frame.dim_n
    if gt.is_zero():
        return WeylSeries.zero(n, state.trunc_N + 1)
    half = nu_bracket(gt.truncate(state.trunc_N + 1), gt.truncate(state.trunc_N + 1), state.frame)
    return (d_base(gt) + half.scale(Fraction(1, 2))).truncate(state.trunc_N + 1)


def curvature_mismatch(state: FedosovState) -> WeylSeries:
    """Non-central part of R - (curvature of nabla); D^2 is central only when this vanishes."""
    diff = state.R_omega - connection_curvature(state)
    return diff.filter(lambda k: any(k[1]))


def _square_over_nu(r, frame):
    # r * r / nu = 1/2 [r, r]/nu for an odd form
    return nu_bracket(r, r, frame).scale(Fraction(1, 2))


def fedosov_recursion(state: FedosovState, check=True) -> WeylSeries:
    """r_d = delta^{-1}(R + nabla r + r*r/nu)_{d-1} for d = 3 .. N + 1."""
    frame = state.frame
    cut = state.trunc_N + 1
    n = frame.dim_n
    r = WeylSeries.zero(n, cut)
    R = state.R_omega.truncate(cut)
    for d in range(3, cut + 1):
        rhs = R
        if not r.is_zero():
            rhs = rhs + _nabla(r, state) + _square_over_nu(r, frame)
        part = rhs.degree_part(d - 1)
        r = r + delta_inv(part).truncate(cut)
    if check:
        mismatch = curvature_mismatch(state)
        if not mismatch.is_zero():
            raise FlatnessError(f"curvature input does not match the connection: {mismatch.canonical_text()}")
        defect = flatness_defect(state.with_r(r))
        if not defect.is_zero():
            raise FlatnessError(f"curvature input fails the solvability audit: {defect.canonical_text()}")
    return r


def flatness_defect(state: FedosovState) -> WeylSeries:
    """delta r - R - nabla r - r*r/nu, through degree N."""
    if state.r is None:
        raise ValueError("state has no r; run fedosov_recursion first")
    frame = state.frame
    cut = state.trunc_N + 1
    r = state.r.truncate(cut)
    theta = symplectic_one_form(frame).truncate(None)
    dr = nu_bracket(theta, r, frame)
    out = dr - state.R_omega.truncate(cut) - _nabla(r, state) - _square_over_nu(r, frame)
    return out.truncate(state.trunc_N)


def connection_apply(a: WeylSeries, state: FedosovState) -> WeylSeries:
    """D a = nabla a - delta a + [r, a]/nu."""
    frame = state.frame
    theta = symplectic_one_form(frame).truncate(None)
    out = _nabla(a, state) - nu_bracket(theta, a, frame)
    if state.r is not None and not state.r.is_zero():
        out = out + nu_bracket(state.r.truncate(None), a, frame)
    return out


def flat_section(f: WeylSeries, state: FedosovState) -> WeylSeries:
    """sigma with Z = 0 part f and D sigma = 0, by sigma = f + delta^{-1}(nabla sigma + [r, sigma]/nu)."""
    if f.has_fiber() or f.has_forms():
        raise ValueError("flat_section expects a base polynomial")
    if state.r is None:
        raise FlatnessError("state has no connection term r")
    if not flatness_defect(state).is_zero() or not curvature_mismatch(state).is_zero():
        raise FlatnessError("connection is not flat")
    N = state.trunc_N
    r = state.r.truncate(None)
    base = f.truncate(N)
    sigma = base
    for _ in range(4 * N + 8):
        step = _nabla(sigma, state)
        if not r.is_zero():
            step = step + nu_bracket(r, sigma, state.frame)
        nxt = base + delta_inv(step).truncate(N)
        if nxt == sigma:
            return sigma
        sigma = nxt
    raise FlatnessError("flat-section iteration did not converge")


def fedosov_star(f: WeylSeries, g: WeylSeries, state: FedosovState) -> WeylSeries:
    """Base product recaptured from flat sections: (sigma(f) * sigma(g)) at Z = 0."""
    from .algebra import moyal_product
    prod = moyal_product(flat_section(f, state), flat_section(g, state), state.frame)
    return prod.fiber_free().filter(lambda k: not k[3])
