# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled Moyal kernel; mirrors ``_moyal_py`` exactly."""


cdef inline long _falling(long n, long k):
    cdef long out = 1
    cdef long j
    for j in range(k):
        out *= n - j
    return out


def wedge_sign(long mask_a, long mask_b):
    if mask_a & mask_b:
        return 0
    cdef long swaps = 0
    cdef long b = mask_b
    cdef long low, above
    while b:
        low = b & -b
        above = mask_a & ~((low << 1) - 1)
        while above:
            above &= above - 1
            swaps += 1
        b ^= low
    return -1 if swaps & 1 else 1


def moyal_terms(f_items, g_items, list tables, long max_d):
    cdef dict out = {}
    cdef long top = len(tables) - 1
    cdef long nu_f, nu_g, mask_f, mask_g, deg_f, deg_g, d_f, d_g
    cdef long k, kmax, i, dim, weight, sign, x, y
    cdef tuple fib_f, fib_g, base_f, base_g, a, b, base, fiber, key
    cdef list g_pre = []
    cdef list fib_out
    cdef bint ok
    for nu_g, fib_g, base_g, mask_g, c_g in g_items:
        g_pre.append((nu_g, fib_g, base_g, mask_g, c_g, 2 * nu_g + sum(fib_g), sum(fib_g)))
    for nu_f, fib_f, base_f, mask_f, c_f in f_items:
        dim = len(fib_f)
        deg_f = 0
        for i in range(dim):
            deg_f += <long>fib_f[i]
        d_f = 2 * nu_f + deg_f
        for nu_g, fib_g, base_g, mask_g, c_g, d_g, deg_g in g_pre:
            if max_d >= 0 and d_f + d_g > max_d:
                continue
            sign = wedge_sign(mask_f, mask_g)
            if sign == 0:
                continue
            base = tuple([base_f[i] + base_g[i] for i in range(len(base_f))])
            coeff = c_f * c_g
            if sign < 0:
                coeff = -coeff
            kmax = deg_f
            if deg_g < kmax:
                kmax = deg_g
            if top < kmax:
                kmax = top
            for k in range(kmax + 1):
                for c, a, b in tables[k]:
                    weight = 1
                    ok = True
                    for i in range(dim):
                        x = fib_f[i]
                        y = a[i]
                        if y > x:
                            ok = False
                            break
                        weight *= _falling(x, y)
                    if not ok:
                        continue
                    for i in range(dim):
                        x = fib_g[i]
                        y = b[i]
                        if y > x:
                            ok = False
                            break
                        weight *= _falling(x, y)
                    if not ok:
                        continue
                    fib_out = [0] * dim
                    for i in range(dim):
                        fib_out[i] = <long>fib_f[i] - <long>a[i] + <long>fib_g[i] - <long>b[i]
                    key = (nu_f + nu_g + k, tuple(fib_out), base, mask_f | mask_g)
                    val = coeff * c * weight
                    if key in out:
                        out[key] = out[key] + val
                    else:
                        out[key] = val
    return out
