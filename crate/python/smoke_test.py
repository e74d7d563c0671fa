"""Smoke test for the kerrcat Python extension.

Build and install first:

    pip install maturin
    maturin develop -m crates/python/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import cmath
import math
import sys

import kerrcat


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    params = kerrcat.ModelParams.device()
    model = kerrcat.CatModel.from_params(params)
    scale = model.rate_scale

    closed = model.spectrum(params.drive, params.delta)
    numeric = model.numeric_spectrum(params.drive, params.delta)
    for z in closed:
        assert min(abs(z - w) for w in numeric) < 1e-9 * scale, (z, numeric)
    assert abs(closed[0]) < 1e-12 * scale

    # third-order points: four of them, each a triple root
    points = model.lep3_points()
    assert len(points) == 4
    for p in points:
        triple = model.spectrum(p["eps"], p["delta"])[1:]
        spread = max(abs(a - b) for a in triple for b in triple)
        assert spread < 1e-6 * scale, spread
        refined = model.lep3_refine(1.05 * p["eps"], 0.95 * p["delta"])
        assert close(refined["eps"], p["eps"], 1e-8)
        assert close(refined["delta"], p["delta"], 1e-8)

    # double root on the zero-drive axis
    d2 = model.lep2_delta_at_zero_drive()
    roots = model.discriminant_roots(0.0, 3.0 * d2)
    assert any(close(r, d2, 1e-8) for r in roots), (roots, d2)

    # winding: unit charge around a third-order point, none elsewhere
    e3 = abs(points[0]["eps"])
    p = points[0]
    w = model.winding_number((p["eps"], p["delta"]), 0.3 * e3)
    assert abs(w["W"]) == 1, w
    w0 = model.winding_number((1.5 * e3, 0.0), 0.3 * e3)
    assert w0["W"] == 0, w0

    # resultant identity against eigenvalue products
    e = closed[1:]
    r1, r2 = kerrcat.resultant_vector(*e)
    f1, f2 = model.resultant(params.drive, params.delta, route="invariants")
    s6, s3 = scale ** 6, scale ** 3
    assert close(r1 / s6, f1, 1e-8) and close(r2 / s3, f2, 1e-8), ((r1 / s6, r2 / s3), (f1, f2))

    # full space at a small truncation
    dim = 16
    small = kerrcat.ModelParams.from_alpha(1.2, 0.1)
    values = kerrcat.liouvillian_eigenvalues(small, dim)
    assert len(values) == dim * dim
    assert min(abs(v) for v in values) < 1e-8
    assert max(v.real for v in values) < 1e-8
    rho = kerrcat.steady_state(small, dim)
    trace = sum(rho[i][i] for i in range(dim))
    assert abs(trace - 1) < 1e-10
    cat = kerrcat.cat_state(small.alpha, dim, 1)
    assert close(sum(abs(c) ** 2 for c in cat), 1.0, 1e-12)
    pure = [[a * b.conjugate() for b in cat] for a in cat]
    assert close(kerrcat.fidelity(pure, pure), 1.0, 1e-10)
    f = kerrcat.fidelity(rho, pure)
    assert 0.0 < f < 1.0

    try:
        kerrcat.CatModel(-1.0, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("negative alpha accepted")

    print(f"kerrcat {kerrcat.__version__} smoke test passed")
    print(f"  device spectrum: {', '.join(f'{z.real:+.4g}{z.imag:+.4g}j' for z in closed)}")
    print(f"  third-order point: eps={p['eps']:.6g}, delta={p['delta']:.6g}, W={w['W']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
