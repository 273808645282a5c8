"""Pure-Python Moyal kernel.

Same signature as the compiled ``_moyal_ext`` module; ``kernel.py`` picks
whichever is importable.
"""


def wedge_sign(mask_a, mask_b):
    """Sign of dz^{mask_a} ^ dz^{mask_b} once reordered increasingly, 0 if they overlap."""
    if mask_a & mask_b:
        return 0
    swaps = 0
    b = mask_b
    while b:
        low = b & -b
        # generators of the left factor sitting above this one must move past it
        swaps += bin(mask_a & ~((low << 1) - 1)).count("1")
        b ^= low
    return -1 if swaps & 1 else 1


def _falling(n, k):
    out = 1
    for j in range(k):
        out *= n - j
    return out


def moyal_terms(f_items, g_items, tables, max_d):
    """Expand the bidifferential Moyal sum over all pairs of monomials.

    ``f_items``/``g_items`` are sequences of ``(nu, fiber, base, mask, coeff)``.
    ``tables[k]`` lists ``(c, a, b)``: the k-th order operator is
    ``sum c * d^a (left) d^b (right)`` with the factor (nu/2)^k/k! folded into c
    except for the power of nu.  ``max_d < 0`` disables truncation.
    Returns a dict keyed by ``(nu, fiber, base, mask)``.
    """
    out = {}
    top = len(tables) - 1
    g_pre = []
    for nu_g, fib_g, base_g, mask_g, c_g in g_items:
        g_pre.append((nu_g, fib_g, base_g, mask_g, c_g, 2 * nu_g + sum(fib_g), sum(fib_g)))
    for nu_f, fib_f, base_f, mask_f, c_f in f_items:
        deg_f = sum(fib_f)
        d_f = 2 * nu_f + deg_f
        for nu_g, fib_g, base_g, mask_g, c_g, d_g, deg_g in g_pre:
            if max_d >= 0 and d_f + d_g > max_d:
                continue
            sign = wedge_sign(mask_f, mask_g)
            if sign == 0:
                continue
            base = tuple(x + y for x, y in zip(base_f, base_g))
            mask = mask_f | mask_g
            coeff = c_f * c_g
            if sign < 0:
                coeff = -coeff
            kmax = min(deg_f, deg_g, top)
            for k in range(kmax + 1):
                nu = nu_f + nu_g + k
                for c, a, b in tables[k]:
                    weight = 1
                    fiber = []
                    ok = True
                    for x, y in zip(fib_f, a):
                        if y > x:
                            ok = False
                            break
                        weight *= _falling(x, y)
                    if not ok:
                        continue
                    for x, y in zip(fib_g, b):
                        if y > x:
                            ok = False
                            break
                        weight *= _falling(x, y)
                    if not ok:
                        continue
                    fiber = tuple(x - y + u - v for x, y, u, v in zip(fib_f, a, fib_g, b))
                    key = (nu, fiber, base, mask)
                    val = coeff * c * weight
                    if key in out:
                        out[key] += val
                    else:
                        out[key] = val
    return out
