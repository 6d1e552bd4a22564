"""Smoke test for the polybnb_py extension.

Build first:

    cargo build --offline -p polybnb-py --features extension-module --release

then run `python3 crates/python/python/smoke_test.py` from the repository root.
If `polybnb_py` is not importable the script loads target/release/libpolybnb_py.so.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[3]


def load():
    try:
        import polybnb_py

        return polybnb_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        so = ROOT / "target" / profile / "libpolybnb_py.so"
        if so.exists():
            loader = importlib.machinery.ExtensionFileLoader("polybnb_py", str(so))
            spec = importlib.util.spec_from_loader("polybnb_py", loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("polybnb_py not found; build the extension first")


pb = load()
fixtures = ROOT / "crates" / "core" / "fixtures"

assert pb.basis_size(2, 3) == 10
assert pb.monomial_basis(2, 1) == [[0, 0], [1, 0], [0, 1]]

alpha, beta, gamma, case = pb.decompose_box_quadratic(0.0, 4.0, 1.0, 3.0)
assert case == "symmetric"
assert abs(alpha - 4) < 1e-12 and abs(beta - 3) < 1e-12 and abs(gamma + 2) < 1e-12

neg = pb.Problem.parse((fixtures / "negsquare.gpo").read_text())
r = pb.glb(neg, k=2)
assert r.status == "bound" and abs(r.bound + 1) < 1e-6, r

disjoint = pb.Problem.parse((fixtures / "disjoint.gpo").read_text())
assert pb.glb(disjoint).status == "infeasible"
try:
    pb.solve(disjoint, loops=3)
    raise AssertionError("expected InfeasibleError")
except pb.InfeasibleError:
    pass

try:
    pb.Problem.parse("vars x\nminimize x +")
    raise AssertionError("expected ValueError")
except ValueError:
    pass

camel = pb.Problem.parse((fixtures / "camel.gpo").read_text())
assert camel.var_names == ["x", "y"]
best_x, best_f = pb.grid_minimize(camel, points_per_axis=201)
s = pb.solve(camel, k=6, eta=0.01)
assert s.loops == 20 and len(s.trace()) == 20
assert abs(s.f - best_f) < 0.05, (s.f, best_f)
stars = [row[3] for row in s.trace()]
assert all(a <= b for a, b in zip(stars, stars[1:]))
assert s.trace_csv().startswith("m,branch_id,lambda_m,lambda_star")

six = pb.Problem.parse((fixtures / "sixvar.gpo").read_text())
f, g, h, w, feasible = pb.check_point(six, [0.0] * 6)
assert f == 0.0 and feasible and math.isclose(g[0], 100.0)

print("camel: f(x) =", round(s.f, 6), "grid =", round(best_f, 6))
print("smoke test passed")
