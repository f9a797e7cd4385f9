"""Checking the equilibrium property by actually deviating.

What makes the computed feedback an equilibrium: replacing the control
by any constant v on a short interval [t, t+eps) can lower the cost at
most at order o(eps).  The first-order quotient
(J(deviated) - J(policy))/eps converges, as eps -> 0, to the weighted
square distance <M (v - u(t)), v - u(t)> >= 0, so no deviation is
profitable to first order.  This script measures the quotient at
finite eps, compares with the closed form, and shows that a corrupted
policy is caught: a profitable deviation shows up as a negative limit.
"""

import numpy as np

from tilq import RiccatiSolution, SampleSpec, TimeGrid, build_policy, \
    constant_problem, equilibrium_certificate, hyperbolic_problem, \
    perturbation_limit_closed_form, perturbation_limit_finite_eps, \
    solve_riccati


def main():
    p = constant_problem(A=0.0, B=1.0, Q=1.0, S=0.0, M=1.0, G=0.0, T=1.0)
    g = TimeGrid.uniform(1.0, 400)
    pol = build_policy(p, solve_riccati(p, g))

    # hold u = 0 on [0, eps) instead of the policy value u(0) = -tanh(1);
    # the limit of the quotient is (0 - u(0))^2 = tanh(1)^2
    t, x, v = 0.0, [1.0], [0.0]
    closed = perturbation_limit_closed_form(p, pol, t, x, v)
    quotients, extrap = perturbation_limit_finite_eps(
        p, pol, t, x, v, eps_list=(0.16, 0.08, 0.04, 0.02))
    print("deviate to v=0 at t=0 (policy value u(0) = -tanh(1)):")
    print("     eps      quotient        error vs closed form")
    for eps in sorted(quotients, reverse=True):
        print(f"  {eps:6.3f}  {quotients[eps]:+.8f}    "
              f"{abs(quotients[eps] - closed):.2e}")
    print(f"  extrapolated {extrap:+.8f}")
    print(f"  closed form  {closed:+.8f}  (tanh(1)^2 = "
          f"{np.tanh(1.0) ** 2:.8f})")

    # deviating to the policy's own value costs nothing
    u0 = pol.control(0.0, np.asarray(x))
    print(f"\ndeviate to the policy value itself: quotient limit = "
          f"{perturbation_limit_closed_form(p, pol, 0.0, x, u0):.1e}")

    # sweep deviations over a sample plan on a hyperbolic instance
    ph = hyperbolic_problem(1.0, 1.0, 1.0, B=1.0, k=1.0, theta=1.0, T=1.0)
    polh = build_policy(ph, solve_riccati(ph, TimeGrid.uniform(1.0, 400)))
    rep = equilibrium_certificate(ph, polh)
    print(f"\nhyperbolic instance, {len(rep.samples)} sampled deviations:")
    print(f"  worst closed-form quotient  {rep.worst_closed_form:+.3e}")
    print(f"  worst extrapolated quotient {rep.worst_extrapolated:+.3e}")
    print(f"  certificate passed: {rep.passed}")

    # corrupt the solution with a smooth bump and rerun the certificate;
    # the deviation test finds a strictly profitable deviation
    sol = polh.P
    ts = sol.grid.nodes
    bump = 0.2 * np.exp(-(((ts - 0.5) / 0.125) ** 2))
    bad = RiccatiSolution(sol.grid,
                          sol.values + bump[:, None, None], sol.meta)
    bad_pol = build_policy(ph, bad)
    bad_rep = equilibrium_certificate(
        ph, bad_pol, SampleSpec(times=(0.35, 0.45, 0.55)))
    print(f"\nsame instance with a bump added to P around t=0.5:")
    print(f"  worst extrapolated quotient {bad_rep.worst_extrapolated:+.3e}"
          f"  -> passed: {bad_rep.passed}")


if __name__ == "__main__":
    main()
