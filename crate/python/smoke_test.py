#!/usr/bin/env python3
"""Build the wicklab_py extension module and exercise it end to end.

Builds the cdylib with cargo, copies it into a temp directory under the
import name Python expects, and checks a battery of known values: exact
combinatorics, grid sampling, the three moment engines, Wick polynomials,
the stochastic exponent, diagram sums, convergence rates, and chaos
limits. Exits nonzero on the first failed check.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent

checks = 0


def check(name, ok):
    global checks
    if not ok:
        print(f"FAIL {name}", file=sys.stderr)
        sys.exit(1)
    checks += 1
    print(f"ok {name}")


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def build_and_import():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "wicklab-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    built = REPO_ROOT / "target" / "release" / "libwicklab_py.so"
    if not built.exists():  # macOS names cdylibs differently
        built = REPO_ROOT / "target" / "release" / "libwicklab_py.dylib"
    stage = Path(tempfile.mkdtemp(prefix="wicklab_py_"))
    shutil.copy2(built, stage / "wicklab_py.so")
    sys.path.insert(0, str(stage))
    import wicklab_py

    return wicklab_py


def main():
    wl = build_and_import()
    check("import", hasattr(wl, "moment_formula"))

    # Exact combinatorics: Bernoulli, Eulerian, and the block coefficients
    # they combine into.
    check("bernoulli B_2 = 1/6", wl.bernoulli_number(2) == (1, 6))
    check("bernoulli B_1 = -1/2", wl.bernoulli_number(1) == (-1, 2))
    check("eulerian A(4,1) = 11", wl.eulerian_number(4, 1) == 11)
    expected_blocks = {2: (1, 1), 4: (-2, 1), 6: (16, 1), 8: (-272, 1)}
    check(
        "block coefficients 2..8",
        all(wl.block_coefficient(k) == v for k, v in expected_blocks.items()),
    )
    check(
        "alternating eulerian sums collapse",
        all(
            wl.alternating_eulerian_sum(k) == wl.block_coefficient(k)
            for k in (2, 4, 6, 8, 10)
        ),
    )

    # Grid functions: sampling, CSV round trip, indexed access.
    f = wl.GridFunction.sample("x^2", 4)
    check("sample x^2 on 4 points", f.values() == [0.0625, 0.25, 0.5625, 1.0])
    check("grid getters", (f.n, f.arity) == (4, 1))
    check("grid value lookup", f.value([2]) == 0.25)
    check("csv round trip", wl.GridFunction.from_csv(f.to_csv()).values() == f.values())

    # The field itself: phi(1) at n = 4 for an explicit sign vector.
    one = wl.GridFunction.sample("1", 4)
    check("phi eval", close(wl.phi_eval(one, [1.0, 1.0, -1.0, 1.0]), 1.0))
    check(
        "sign draws are seeded",
        wl.draw_signs(7, 0, 16) == wl.draw_signs(7, 0, 16)
        and set(wl.draw_signs(7, 0, 16)) <= {-1.0, 1.0},
    )

    # The three plain-moment engines on a mixed fourth moment.
    g = wl.GridFunction.sample("x", 6)
    h = wl.GridFunction.sample("x^2", 6)
    spec = [(g, 2), (h, 2)]
    formula = wl.moment_formula(spec)
    check("formula vs bruteforce", close(formula, wl.moment_bruteforce(spec), 1e-13))
    mc1 = wl.moment_montecarlo(spec, 20000, 5)
    mc2 = wl.moment_montecarlo(spec, 20000, 5)
    check("montecarlo is deterministic", mc1 == mc2)
    check("montecarlo near formula", abs(mc1[0] - formula) <= 4 * mc1[1])

    # Wick polynomials over the plain sign base and a noise base.
    p4 = wl.wick_polynomial(wl.symmetric_sign_moments(4))
    check("sign-base wick P4", p4.coeffs == [5.0, 0.0, -6.0, 0.0, 1.0])
    check("wick eval", close(p4.eval(2.0), 16 - 24 + 5))
    w2 = wl.wick_power_of_noise(one, 2)
    check("noise-base wick P2", close(w2.coeffs[0], -1.0) and w2.coeffs[2] == 1.0)

    # Stochastic exponent: partial sums against e^{alpha x} / cosh(alpha).
    partial = wl.stochastic_exponent_partial(1.0, wl.symmetric_sign_moments(40), 1.0, 40)
    check("exponent partial sum", close(partial, math.e / math.cosh(1.0), 1e-8))
    closed = wl.stochastic_exponent_closed(0.5, one, [1.0, 1.0, 1.0, 1.0])
    check("exponent closed form", close(closed, math.exp(1.0) / math.cosh(0.25) ** 4))

    # Diagram sums: the cube-against-line product at n = 2 is exactly -1,
    # while its Gaussian analogue vanishes.
    two = wl.GridFunction.sample("1", 2)
    cube_line = [(two, 3), (two, 1)]
    total, terms = wl.wick_moment_traversal(cube_line)
    check("cube-line total", total == -1.0)
    check("cube-line closed", wl.wick_moment_closed(cube_line) == -1.0)
    check("cube-line oracle", close(wl.wick_moment_oracle(cube_line), -1.0))
    check("cube-line gaussian", wl.gaussian_wick_moment(cube_line) == 0.0)
    check(
        "cube-line diagram dump",
        len(terms) == 6 and all(t["blocks"] == [[1, 2, 3, 4]] for t in terms),
    )

    # Gaussian replacement error decays like 1/n.
    rows = wl.convergence_study([("sin(3 * x)", 2), ("x", 2)], [8, 16, 32, 64])
    ratios = [rows[i]["abs_error"] / rows[i + 1]["abs_error"] for i in range(3)]
    check("convergence rate ~ 1/n", all(1.6 <= r <= 2.4 for r in ratios))

    # Chaos limits: Hermite coefficients and the order-2 cosine form.
    check("hermite H4", wl.hermite_polynomial(4) == [3.0, 0.0, -6.0, 0.0, 1.0])
    limit = wl.kform_limit_check(2, [([1, 2], 1.0)], [8, 16], reference_n=512)
    check(
        "order-2 form second moments",
        all(
            close(row["moments"][1], 1 - 2 / row["n"] + 2 / row["n"] ** 2, 1e-9)
            and row["std_errors"][1] == 0.0
            for row in limit
        ),
    )
    ks = wl.clt_ks_check(wl.GridFunction.sample("0.8 + 0.5 * x", 400), 4000, 3)
    check("normal limit KS distance", ks < 0.05)

    # Error mapping: bad input raises ValueError, blown capacity RuntimeError.
    try:
        wl.GridFunction.sample("x +", 4)
        check("parse error raises", False)
    except ValueError:
        check("parse error raises", True)
    try:
        wide = wl.GridFunction.sample("x", 25)
        wl.moment_bruteforce([(wide, 2)])
        check("capacity error raises", False)
    except RuntimeError:
        check("capacity error raises", True)

    print(f"smoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
