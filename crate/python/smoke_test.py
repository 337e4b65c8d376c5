"""Smoke test for the pyquasiproj extension module.

Build and install with `maturin develop -m crates/py/Cargo.toml` (or put the built
`pyquasiproj` shared library on PYTHONPATH), then run `python python/smoke_test.py`.
"""

import math

import pyquasiproj as qp


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    phi = qp.Kernel.flat_top(1, 0.25, 0.45)
    assert phi.id == "flat_top:0.25:0.45"
    close(phi.spectrum([0.1]).real, 1.0, 1e-15)
    assert qp.Kernel.from_id("sinc", 1).dim == 1

    dirac = qp.Dual.dirac()
    audit = qp.compat_audit(qp.Kernel.sinc(1), dirac, 0.25)
    assert audit["strict_pass"] is True
    assert qp.check_strict(phi, qp.Dual.box_average(), 0.25)[0] is False
    for n in (1, 2, 3):
        assert qp.detect_weak_order(qp.Kernel.weak(1, n, 0.25, 0.45), dirac) == n

    w = qp.Weight.polynomial(1, 0.25)
    close(w([3.0]), 10.0 ** 0.125, 1e-14)
    assert w.membership([[0.5 * i] for i in range(-10, 11)])["passes"]

    f = qp.Signal.bandlimited(1, 0.2, 1)
    grid, budget = qp.apply_operator(f, phi, dirac, [2.0], 1, 16.0, 8192)
    truth = f.sample(16.0, 8192)
    err = max(
        abs(a - b)
        for x, a, b in zip(grid.nodes, grid.values(), truth.values())
        if abs(x) <= 8.0
    )
    assert err <= 1e-6, err
    assert budget["under_truncated"] is False

    g = qp.Signal.gaussian(1)
    spec = g.sample(8.0, 256).spectrum()
    dual_err = max(abs(v - math.exp(-math.pi * xi * xi)) for xi, v in zip(spec.nodes, spec.values()))
    assert dual_err <= 1e-8, dual_err

    slope, _, r2 = qp.fit_rate([2.0 ** (-1.5 * j) for j in range(1, 7)], list(range(1, 7)), 2.0)
    close(slope, 1.5, 1e-10)
    close(r2, 1.0, 1e-12)

    iso = qp.modulus(g, 2, 0.25, 2.0, w, points=512)
    aniso, iso2 = qp.modulus_pair(g, 2, [2.0], 2, 2.0, w, points=512)
    assert aniso <= iso2 and iso > 0.0

    hyps, out = qp.run_experiment("experiment = compat_audit\nkernel = sinc\ndelta = 0.25\n")
    assert all(h["status"] != "FAIL" for h in hyps)
    assert out["result"]["strict_pass"] is True

    print("pyquasiproj smoke test passed")


if __name__ == "__main__":
    main()
