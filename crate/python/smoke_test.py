"""Smoke test for the pysoboot extension.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import math
import os
import random
import tempfile

import pysoboot


def main():
    panel = pysoboot.Panel.simulate("D1", 300, seed=3)
    assert (panel.rows, panel.m, panel.k) == (300, 2, 2), panel

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "panel.csv")
        panel.save(path)
        again = pysoboot.Panel.load(path)
        assert again.y() == panel.y() and again.z() == panel.z()

    model = pysoboot.Model.fit(panel)
    gamma, value, converged = model.minimize()
    assert converged and value >= 0.0
    assert abs(sum(g * g for g in gamma) - 1.0) < 1e-12
    assert abs(model.phi(gamma) - value) < 1e-12

    out = pysoboot.ch_feature_test(panel, kappa_rule="T^-1/3", b=50, seed=1)
    assert out.b == 50 and len(out.draws) == 50
    assert out.reject == (out.statistic > out.crit_value)
    assert out.result_line().startswith("RESULT stat=")
    same = pysoboot.ch_feature_test(panel, kappa_rule="T^-1/3", b=50, seed=1)
    assert same.draws == out.draws

    assert pysoboot.critical_value([float(i) for i in range(1, 201)], 0.05) == 190.0
    assert pysoboot.deriv_squared_mean(3.0) == 9.0
    assert pysoboot.deriv_moment_ineq(0.05, 0.1, -1.0) == 0.0

    rng = random.Random(0)
    sample = [rng.gauss(0.0, 1.0) for _ in range(400)]
    tests = pysoboot.squared_mean_tests(sample, b=100, seed=2)
    assert set(tests) == {"standard", "babu", "modified"}
    assert tests["babu"].draws == tests["modified"].draws

    rows = pysoboot.run_design("D1", [200], reps=4, b=20, kappa_rules=["T^-1/3"], workers=2)
    assert len(rows) == 1 and rows[0]["T"] == 200
    assert 0.0 <= rows[0]["reject_rate"] <= 1.0 and not math.isnan(rows[0]["mc_se"])

    try:
        pysoboot.ch_feature_test(panel, kappa_rule="T^-3/4")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid kappa rule accepted")

    print("pysoboot smoke test passed:", out)


if __name__ == "__main__":
    main()
