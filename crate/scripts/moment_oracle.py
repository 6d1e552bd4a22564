"""Reference relaxation values from an independent conic solver.

Builds the order-k moment relaxation with cvxpy (variables rescaled to
[-1, 1]) and prints the bounds frozen in crates/core/tests/oracles.rs.
Needs cvxpy, sympy and numpy.
"""

import itertools

import cvxpy as cp
import sympy as sp


def basis(n, d):
    return [e for t in range(d + 1) for e in itertools.product(range(t + 1), repeat=n) if sum(e) == t]


def moment_bound(f, gs, hs, box, k, syms, solver, **opts):
    n = len(syms)
    # rescale x = c + h u so every box edge becomes [-1, 1]
    u = sp.symbols(f"u1:{n + 1}")
    sub = {s: (a + b) / 2 + (b - a) / 2 * v for s, v, (a, b) in zip(syms, u, box)}

    def poly(e):
        return {m: float(c) for m, c in sp.Poly(sp.expand(e.subs(sub)), *u).terms()}

    def unit(p):
        s = max(abs(c) for c in p.values())
        return {m: c / s for m, c in p.items()}, s

    fu, fscale = unit(poly(f))
    mons = basis(n, k)
    idx = {m: i for i, m in enumerate(mons)}
    y = cp.Variable(len(mons))

    def shift(a, b):
        return tuple(i + j for i, j in zip(a, b))

    def ell(g, a):
        return sum(c * y[idx[shift(m, a)]] for m, c in g.items())

    def localizing(g):
        d = (k - max(sum(m) for m in g)) // 2
        b = basis(n, d)
        mat = cp.bmat([[ell(g, shift(p, q)) for q in b] for p in b])
        return (mat + mat.T) / 2 >> 0

    one = {(0,) * n: 1.0}
    cons = [y[0] == 1, localizing(one)]
    cons += [localizing(unit(poly(g))[0]) for g in gs]
    for v in u:
        cons.append(localizing({(0,) * n: 1.0, tuple(2 if w == v else 0 for w in u): -1.0}))
    for h in hs:
        hu = unit(poly(h))[0]
        dh = max(sum(m) for m in hu)
        cons += [ell(hu, a) == 0 for a in basis(n, k - dh)]
    prob = cp.Problem(cp.Minimize(ell(fu, (0,) * n)), cons)
    prob.solve(solver=solver, **opts)
    return prob.value * fscale, prob.status


x, y = sp.symbols("x y")
camel = 4 * x**2 - sp.Rational(21, 10) * x**4 + x**6 / 3 + x * y - 4 * y**2 + 4 * y**4
print("camel k=6", moment_bound(camel, [], [], [(-3, 3), (-2, 2)], 6, (x, y), cp.CLARABEL))

v = sp.symbols("x1:7")
x1, x2, x3, x4, x5, x6 = v
f = 7 * x1 * x5**3 + 6 * x1 * x5**2 * x6 + 9 * x2 * x4**3 + 4 * x2 * x4 * x5 + 3 * x2 * x5 * x6 + x3 * x4 * x5
gs = [100 - sum(t**2 for t in v), x1**3 + x2**2 * x4 + x3 * x5**2, x2**2 * x1 + x5**3 + x4 * x1 * x2]
hs = [x1 + x2**2 - x3**2 + x4 * x5, x5 * x1 - x4**2]
print("six-variable k=4", moment_bound(f, gs, hs, [(-10, 10)] * 6, 4, v, cp.SCS, eps=1e-9, max_iters=200000))
