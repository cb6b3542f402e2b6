"""Smoke test for the speclab extension module.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/speclab-*.whl
"""

import math

import speclab


def close(x, y, rel):
    return abs(x - y) <= rel * abs(y)


def main():
    lam = 2.0
    t = speclab.momentum_integral(3, 2.5, lam)
    assert close(t, 1.0 / (6 * math.pi**2 * lam), 1e-8), t
    chain = speclab.two_step_chain(1.0)
    assert close(chain["nested"], 1.0 / (32 * math.pi**2), 1e-7), chain

    cube = speclab.BoxSpec.cube(1.0)
    stream = cube.enumerate(200.0)
    value, tail = stream.regulated_trace(0.5)
    assert tail <= 1e-6 * value
    est = speclab.stochastic_estimate(stream, 0.5, 20_000, seed=7)
    assert abs(est["mean"] - value) <= 4 * est["stderr"], (est, value)

    k = speclab.mixed_cell_heat_trace(1.0, 1.0, 1.0, 0.5)
    direct = sum(m * math.exp(-0.5 * v) for v, m in speclab.BoxSpec.mixed_cell(1, 1, 1).enumerate(400.0).modes)
    assert abs(k - direct) < 1e-10, (k, direct)
    assert close(speclab.b_coefficient(1, 1, 1), 1 / (8 * math.pi), 1e-14)

    zeta = speclab.casimir_per_area(1.0, "zeta_route")
    fit = speclab.casimir_per_area(1.0, "heat_fit")
    assert close(zeta, -math.pi**2 / 1440, 1e-14)
    assert close(fit, zeta, 5e-3), (fit, zeta)

    d = speclab.delta_alpha(1.0)
    assert abs(d - speclab.delta_cube_closed_form()) < 1e-6
    mc = speclab.delta_alpha(2.0, "monte_carlo", mc_pairs=200_000, seed=3)
    assert abs(mc["mean"] - speclab.delta_alpha(2.0)) <= 4 * mc["stderr"]

    theta = speclab.theta_bar(1.0, 2)
    assert abs(theta["theta_bar"] - 0.0072824) < 5e-8, theta
    assert theta["agree"]

    report = speclab.run("calibrate", {"alpha": [1.0, 2.0]})
    assert report["passed"], report["failures"]
    assert report["manifest"]["config"]["command"] == "calibrate"

    try:
        speclab.BoxSpec.cube(1.0, "periodic")
    except speclab.SpeclabError:
        pass
    else:
        raise AssertionError("a box without a Dirichlet axis must be rejected")

    for row in speclab.verify_all(criteria=[1, 2, 12]):
        print(row["line"])
    print("smoke test passed")


if __name__ == "__main__":
    main()
