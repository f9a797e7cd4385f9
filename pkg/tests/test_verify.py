import json

import numpy as np

from tilq import TimeGrid, run_verification
from tilq.verify import default_state_samples


def test_verification_passes_scalar(hyperbolic_scalar):
    rep = run_verification(hyperbolic_scalar, TimeGrid.uniform(1.0, 200))
    assert rep.passed
    assert rep.riccati["pass"]
    assert all(leg["pass"] for leg in rep.bvp)
    assert all(leg["pass"] for leg in rep.value)
    assert rep.certificate.passed
    d = rep.to_json_dict()
    json.dumps(d, allow_nan=False)  # strictly serializable
    assert d["pass"] is True


def test_verification_reuses_solution(hyperbolic_scalar, hyperbolic_solution):
    rep = run_verification(hyperbolic_scalar, hyperbolic_solution.grid,
                           solution=hyperbolic_solution)
    assert rep.solution is hyperbolic_solution
    assert rep.passed


def test_default_state_samples(hyperbolic_scalar):
    g = TimeGrid.uniform(1.0, 100)
    samples = default_state_samples(hyperbolic_scalar, g, count=5)
    assert len(samples) == 5
    for t0, x0 in samples:
        assert 0.0 <= t0 < 1.0
        assert np.any(np.abs(np.asarray(x0)) > 0)
    # deterministic plan
    again = default_state_samples(hyperbolic_scalar, g, count=5)
    for (a, xa), (b, xb) in zip(samples, again):
        assert a == b
        np.testing.assert_array_equal(xa, xb)
