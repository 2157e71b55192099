"""Smoke test for the traction_gap extension module."""

import math

import traction_gap as tg


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * abs(b)


def main():
    spec = tg.LoadSpec.preset(0.01)

    kernel = spec.kernel()
    assert kernel["classification"]["kind"] == "axis_subgroup", kernel["classification"]
    assert tg.LoadSpec.ball_pull_in().kernel()["classification"]["kind"] == "incompatible"
    assert tg.LoadSpec.pressure(-1.0).reversed_witness() is not None

    sol = tg.ExplicitSolution(spec)
    ints = sol.radial_integrals()
    assert close(ints["min_linear"], -0.0168301243, 1e-8), ints
    assert close(ints["min_rotated"], -0.0336600849, 1e-8), ints
    assert ints["margin"] > 0
    # eta* = r (1 - r^2)^3 / 16
    assert close(sol.eta[1], 1 / 16) and close(sol.eta[7], -1 / 16)

    # a z-rotation does no work
    r = tg.axis_rotation([0, 0, 1], 0.7)
    work = spec.load_functional(lambda x, y, z: [sum(r[i][j] * v for j, v in enumerate((x, y, z))) - c
                                                 for i, c in enumerate((x, y, z))])
    assert abs(work) < 1e-12, work

    lin = tg.min_linear(spec)
    assert lin["relative_error"] < 1e-10, lin["relative_error"]
    gap = tg.gap_report(spec)
    assert gap["margin"] > 0 and gap["incompressible"]["certified"]

    study = tg.convergence_study(spec, [0.2, 0.1], degree=3)
    gaps = [row["gap_to_limit"] for row in study["rows"]]
    assert gaps[1] < gaps[0], gaps

    rot, dist = tg.nearest_rotation([[2, 0, 0], [0, 2, 0], [0, 0, 2]])
    assert close(dist, math.sqrt(3)) and rot[0][0] == 1.0
    assert close(tg.g_p(2.0, 1.5), 3.4379, 1e-4)
    assert tg.density([[1, 0, 0], [0, 1, 0], [0, 0, 1]]) == 0.0

    try:
        tg.g_p(-1.0, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("g_p accepted t < 0")

    print(f"traction_gap {tg.__version__}: margin {gap['margin']:.6e}, "
          f"min E {lin['result']['value']:.10f}, study gaps {gaps}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
