"""Smoke test for the mavaltk extension module.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json

import mavaltk


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    square = mavaltk.ConvexFunction.support_function([[-1, -1], [1, -1], [1, 1], [-1, 1]])
    mu = mavaltk.ma(square)
    assert len(mu.atoms) == 1, mu
    point, mass = mu.atoms[0]
    assert close(mass, 4.0) and all(abs(c) < 1e-12 for c in point)

    tau = mavaltk.Form.hessian(2, 1)
    assert tau.is_primitive() and tau.bidegree == (1, 1)
    assert close(mavaltk.klain(tau, [[1.0, 0.0]]), 1.0)
    assert close(mavaltk.klain(tau, [[1.0, 1.0]]), 1.0)
    assert mavaltk.Form.from_json(tau.to_json()) == tau

    q = mavaltk.ConvexFunction.quadratic([[2.0, 0.5], [0.5, 1.0]], [0.1, -0.2])
    phi1 = mavaltk.hessian_measure(1, q, grid=16)
    psi = mavaltk.psi_tau(tau, q, grid=16)
    assert close(phi1.total_mass(), 12.0) and close(psi.total_mass(), phi1.total_mass())
    assert close(mavaltk.ma(q, grid=16).total_mass(), 4.0 * 1.75)

    assert mavaltk.primitive_dimension(2, 1) == 3
    value, ball, ratio = mavaltk.extract_density([0.1, -0.2], weight=2.5)
    assert close(value, 2.5) and 0.99 < ratio < 1.0 and close(ball, 2.5 * ratio)

    pl = mavaltk.ConvexFunction.max_affine([([1.0, 0.0], 0.0), ([-1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([0.0, -1.0], 0.0)])
    smooth = pl.softmax(1e3)
    assert smooth.is_smooth and abs(smooth([0.3, 0.1]) - pl([0.3, 0.1])) < 1e-2

    report = json.loads(mavaltk.run_suite("positivity", n=2, k=1, seed=7))
    assert report["cases"] and all(c["pass"] for c in report["cases"])

    try:
        mavaltk.Form.hessian(2, 3)
    except mavaltk.MavaltkError:
        pass
    else:
        raise AssertionError("expected MavaltkError")
    assert issubclass(mavaltk.MavaltkError, ValueError)

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
