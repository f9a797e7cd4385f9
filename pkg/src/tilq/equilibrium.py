"""Equilibrium feedback policy, simulation, cost evaluation, certificates.

The policy is the linear feedback u(t, x) = gain(t) x derived from a solved
Riccati kernel; its value satisfies J(t, x; u) = <P(t)x, x>.  Deviating to a
constant control v on a short interval [t, t+eps] changes the cost, to first
order in eps, by the quadratic <M(t,t)(v - u(t,x)), v - u(t,x)>; the
certificate checks that limit both in closed form and through difference
quotients of the actual cost functional, so a wrong kernel shows up as a
profitable deviation.
"""
from __future__ import annotations

import inspect
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._quad import integrate
from .errors import GridTooCoarseError, InvalidInputError
from .grids import TimeGrid
from .problem import LQProblem
from .propagators import Propagator, closed_loop_coefficient, fundamental_solution
from .riccati import RiccatiSolution


@dataclass(frozen=True)
class EquilibriumPolicy:
    """Linear feedback u(t, x) = gain(t) x with its closed-loop flow."""

    problem: LQProblem
    P: RiccatiSolution
    closed_loop: Propagator

    def gain_many(self, ts) -> np.ndarray:
        """Gain matrices -M(t,t)^{-1}(B(t)' P(t) + S(t,t)) at times ts."""
        ts = np.asarray(ts, dtype=float)
        p = self.problem
        Pv = self.P.eval_many(ts)
        rhs = np.swapaxes(p.B.eval(ts), -1, -2) @ Pv + p.S.eval(ts, ts)
        return -np.linalg.solve(p.M.eval(ts, ts), rhs)

    def gain(self, t) -> np.ndarray:
        return self.gain_many(np.asarray([float(t)]))[0]

    def control(self, t, x) -> np.ndarray:
        """Feedback value u(t, x)."""
        return self.gain(t) @ np.asarray(x, dtype=float).reshape(self.problem.n)


def build_policy(p: LQProblem, P: RiccatiSolution) -> EquilibriumPolicy:
    """Assemble the equilibrium feedback and its closed-loop propagator."""
    phi = fundamental_solution(closed_loop_coefficient(p, P), P.grid)
    return EquilibriumPolicy(p, P, phi)


@dataclass(frozen=True)
class Trajectory:
    """Closed-loop path: nodes, states X(t_i), controls u(t_i)."""

    nodes: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    t0: float
    x0: np.ndarray

    def to_csv(self, fh) -> None:
        n = self.states.shape[1]
        m = self.controls.shape[1]
        cols = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{j + 1}" for j in range(m)]
        fh.write(",".join(cols) + "\n")
        for k in range(self.nodes.size):
            row = [self.nodes[k], *self.states[k], *self.controls[k]]
            fh.write(",".join(format(float(val), ".17g") for val in row) + "\n")


def simulate(pol: EquilibriumPolicy, t0: float, x0, g: TimeGrid | None = None
             ) -> Trajectory:
    """Trajectory X(s) = Phi(s, t0) x0 under the policy, u(s) = gain(s) X(s)."""
    p = pol.problem
    T = p.T
    t0 = float(t0)
    if not 0.0 <= t0 < T:
        raise InvalidInputError("simulate needs t0 in [0, T)")
    x0 = np.asarray(x0, dtype=float).reshape(p.n)
    if not np.all(np.isfinite(x0)):
        raise InvalidInputError("x0 must be finite")
    nodes = g.nodes if g is not None else pol.P.grid.nodes
    tail = nodes[nodes > t0 + 1e-12 * (1 + T)]
    ts = np.concatenate([[t0], tail])
    X = pol.closed_loop.transition_from(t0, ts) @ x0
    U = np.einsum("kij,kj->ki", pol.gain_many(ts), X)
    return Trajectory(ts, X, U, t0, x0)


class _LinearControl:
    def __init__(self, gain_many):
        self.gain_many = gain_many


class _ConstantControl:
    def __init__(self, v):
        self.v = v


class _GenericControl:
    def __init__(self, fn):
        self.fn = fn


def _as_control(u, m: int):
    if isinstance(u, (_LinearControl, _ConstantControl, _GenericControl)):
        return u
    if isinstance(u, EquilibriumPolicy):
        return _LinearControl(u.gain_many)
    if isinstance(u, (np.ndarray, list, tuple, float, int)):
        return _ConstantControl(np.asarray(u, dtype=float).reshape(m))
    if callable(u):
        try:
            params = list(inspect.signature(u).parameters.values())
            positional = [q for q in params
                          if q.kind in (q.POSITIONAL_ONLY, q.POSITIONAL_OR_KEYWORD)]
            variadic = any(q.kind == q.VAR_POSITIONAL for q in params)
        except (TypeError, ValueError):
            positional, variadic = [None, None], False
        if variadic or len(positional) >= 2:
            return _GenericControl(u)
        return _GenericControl(lambda s, x, _u=u: _u(s))
    raise InvalidInputError("control must be a policy, a constant vector, or a callable")


def _segment_nodes(gnodes: np.ndarray, a: float, b: float, min_nodes: int
                   ) -> np.ndarray:
    tiny = 1e-13 * (1.0 + abs(b))
    inner = gnodes[(gnodes > a + tiny) & (gnodes < b - tiny)]
    seg = np.concatenate([[a], inner, [b]])
    if seg.size < min_nodes:
        seg = np.linspace(a, b, min_nodes)
    return seg


def _integrate_segment(p: LQProblem, seg: np.ndarray, x_start, ctrl):
    """Order-4 state integration on seg; returns node states and controls."""
    K = seg.size
    n, m = p.n, p.m
    mids = 0.5 * (seg[:-1] + seg[1:])
    hs = np.diff(seg)
    An, Am = p.A.eval(seg), p.A.eval(mids)
    Bn, Bm = p.B.eval(seg), p.B.eval(mids)
    X = np.empty((K, n))
    X[0] = np.asarray(x_start, dtype=float).reshape(n)
    if isinstance(ctrl, _LinearControl):
        Cn = An + Bn @ ctrl.gain_many(seg)
        Cm = Am + Bm @ ctrl.gain_many(mids)
        for i in range(K - 1):
            h = hs[i]
            x = X[i]
            k1 = Cn[i] @ x
            k2 = Cm[i] @ (x + 0.5 * h * k1)
            k3 = Cm[i] @ (x + 0.5 * h * k2)
            k4 = Cn[i + 1] @ (x + h * k3)
            X[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        U = np.einsum("kij,kj->ki", ctrl.gain_many(seg), X)
    elif isinstance(ctrl, _ConstantControl):
        v = ctrl.v
        bn, bm = Bn @ v, Bm @ v
        for i in range(K - 1):
            h = hs[i]
            x = X[i]
            k1 = An[i] @ x + bn[i]
            k2 = Am[i] @ (x + 0.5 * h * k1) + bm[i]
            k3 = Am[i] @ (x + 0.5 * h * k2) + bm[i]
            k4 = An[i + 1] @ (x + h * k3) + bn[i + 1]
            X[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        U = np.tile(v, (K, 1))
    else:
        fn = ctrl.fn

        def u_at(s, x):
            return np.asarray(fn(s, x), dtype=float).reshape(m)

        U = np.empty((K, m))
        U[0] = u_at(seg[0], X[0])
        for i in range(K - 1):
            h = hs[i]
            x = X[i]
            k1 = An[i] @ x + Bn[i] @ U[i]
            x2 = x + 0.5 * h * k1
            k2 = Am[i] @ x2 + Bm[i] @ u_at(mids[i], x2)
            x3 = x + 0.5 * h * k2
            k3 = Am[i] @ x3 + Bm[i] @ u_at(mids[i], x3)
            x4 = x + h * k3
            k4 = An[i + 1] @ x4 + Bn[i + 1] @ u_at(seg[i + 1], x4)
            X[i + 1] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            U[i + 1] = u_at(seg[i + 1], X[i + 1])
    return X, U


def _running_cost(p: LQProblem, t_freeze: float, seg, X, U) -> float:
    Qr = p.Q.eval(t_freeze, seg)
    Sr = p.S.eval(t_freeze, seg)
    Mr = p.M.eval(t_freeze, seg)
    vals = (np.einsum("ki,kij,kj->k", X, Qr, X)
            + 2.0 * np.einsum("ki,kij,kj->k", U, Sr, X)
            + np.einsum("ki,kij,kj->k", U, Mr, U))
    return float(integrate(vals, seg))


def cost(p: LQProblem, t: float, x, u, grid: TimeGrid | None = None, *,
         breakpoints=(), min_segment_nodes: int = 17) -> float:
    """Cost functional J(t, x; u) with weights frozen at evaluation time t.

    u is a control given as a policy object, a constant vector, a time
    function u(s), or a feedback u(s, x); with breakpoints it may also be a
    sequence of such controls, one per segment, so discontinuous splices are
    integrated exactly up to the scheme order.  The state follows the
    order-4 one-step scheme and the running cost uses composite Simpson
    quadrature segment by segment; segments shorter than min_segment_nodes
    grid nodes are refined to that count.
    """
    T = p.T
    t = float(t)
    if not 0.0 <= t <= T + 1e-12 * (1 + T):
        raise InvalidInputError("cost needs t in [0, T]")
    x = np.asarray(x, dtype=float).reshape(p.n)
    tiny = 1e-12 * (1.0 + T)
    if T - t <= tiny:
        return float(x @ p.G.eval(t) @ x)
    gnodes = grid.nodes if grid is not None else TimeGrid.uniform(T, 400).nodes
    cuts = sorted({float(b) for b in breakpoints if t + tiny < float(b) < T - tiny})
    edges = [t, *cuts, T]
    n_seg = len(edges) - 1
    if isinstance(u, (list, tuple)) and not isinstance(u, np.ndarray) \
            and u and not np.isscalar(u[0]):
        if len(u) != n_seg:
            raise InvalidInputError("need one control per segment")
        ctrls = [_as_control(ui, p.m) for ui in u]
    else:
        ctrls = [_as_control(u, p.m)] * n_seg
    total = 0.0
    xs = x
    for (a, b), ctrl in zip(zip(edges[:-1], edges[1:]), ctrls):
        seg = _segment_nodes(gnodes, a, b, min_segment_nodes)
        X, U = _integrate_segment(p, seg, xs, ctrl)
        total += _running_cost(p, t, seg, X, U)
        xs = X[-1]
    return total + float(xs @ p.G.eval(t) @ xs)


def value_identity_gap(p: LQProblem, pol: EquilibriumPolicy, t: float, x,
                       grid: TimeGrid | None = None) -> float:
    """|J(t, x; policy) - <P(t)x, x>|, the two sides computed independently."""
    x = np.asarray(x, dtype=float).reshape(p.n)
    J = cost(p, t, x, pol, grid if grid is not None else pol.P.grid)
    return abs(J - float(x @ pol.P(float(t)) @ x))


def perturbation_limit_closed_form(p: LQProblem, pol: EquilibriumPolicy,
                                   t: float, x, v) -> float:
    """First-order cost change for deviating to v at (t, x).

    Equals <M(t,t) w, w> with w = v - u(t, x): nonnegative, and zero exactly
    at the policy value.
    """
    t = float(t)
    x = np.asarray(x, dtype=float).reshape(p.n)
    v = np.asarray(v, dtype=float).reshape(p.m)
    w = v - pol.control(t, x)
    return float(w @ p.M.eval(t, t) @ w)


def perturbation_limit_finite_eps(p: LQProblem, pol: EquilibriumPolicy,
                                  t: float, x, v, eps_list,
                                  grid: TimeGrid | None = None):
    """Difference quotients (J(t,x;spliced) - J(t,x;policy))/eps and their
    linear-in-eps extrapolation.

    The spliced control holds the constant v on [t, t+eps] and follows the
    policy afterwards.  Both costs use the same segmentation (splice
    sub-grid refined to >= 17 nodes) so quadrature bias cancels in the
    quotient.  Returns (dict eps -> quotient, extrapolated).
    """
    g = grid if grid is not None else pol.P.grid
    t = float(t)
    x = np.asarray(x, dtype=float).reshape(p.n)
    v = np.asarray(v, dtype=float).reshape(p.m)
    eps = sorted({float(e) for e in eps_list}, reverse=True)
    if not eps or eps[-1] <= 0.0:
        raise InvalidInputError("eps_list must contain positive values")
    if t + eps[0] > p.T + 1e-12 * (1 + p.T):
        raise InvalidInputError("t + eps exceeds the horizon")
    gnodes = g.nodes
    hmax = float(np.diff(gnodes).max())
    for e in eps:
        covered = int(np.count_nonzero(
            (gnodes >= t - 1e-12) & (gnodes <= t + e + 1e-12)))
        if covered < 4:
            raise GridTooCoarseError(
                f"eps={e:g} spans only {covered} grid nodes; refine the grid "
                f"(max spacing {hmax:g}) or increase eps")
    quotients = {}
    for e in eps:
        bp = (t + e,)
        J_dev = cost(p, t, x, [v, pol], g, breakpoints=bp)
        J_base = cost(p, t, x, [pol, pol], g, breakpoints=bp)
        quotients[e] = (J_dev - J_base) / e
    if len(eps) == 1:
        return quotients, float(quotients[eps[0]])
    e1, e2 = eps[-2], eps[-1]
    q1, q2 = quotients[e1], quotients[e2]
    return quotients, float((e1 * q2 - e2 * q1) / (e1 - e2))


@dataclass(frozen=True)
class SampleSpec:
    """Sampling plan for the deviation certificate.

    times: evaluation times (default 10 points spanning [0, 0.8 T]).
    axis_scale: magnitude of the raw axis deviations v = +/- kappa e_j.
    probe_scale: relative offset of the policy-centered deviations
        v = u(t,x) +/- eta e_j, eta = probe_scale * (1 + |u(t,x)|_inf).
    eps_list: quotient widths; None picks (b, b/2, b/4) with
        b = min(0.1 T, 0.25 (T - t)) per time.
    finite_eps: also evaluate difference quotients (on the +axis states).
    """

    times: tuple | None = None
    axis_scale: float = 1.0
    probe_scale: float = 0.1
    eps_list: tuple | None = None
    finite_eps: bool = True
    tol_closed_form: float = 1e-10
    tol_finite_eps: float = 1e-4


@dataclass(frozen=True)
class PerturbationSample:
    t: float
    x: np.ndarray
    v: np.ndarray
    closed_form: float
    finite_eps: dict | None = None
    extrapolated: float | None = None

    def to_dict(self) -> dict:
        d = {"t": self.t, "x": [float(c) for c in self.x],
             "v": [float(c) for c in self.v], "closed_form": self.closed_form}
        if self.finite_eps is not None:
            d["finite_eps"] = {format(e, ".12g"): q
                               for e, q in sorted(self.finite_eps.items(), reverse=True)}
            d["extrapolated"] = self.extrapolated
        return d


@dataclass(frozen=True)
class PerturbationReport:
    """Certificate outcome over all (t, x, v) samples."""

    samples: list
    passed: bool
    worst_closed_form: float
    worst_extrapolated: float | None
    tol_closed_form: float
    tol_finite_eps: float

    def to_json_dict(self) -> dict:
        return {
            "kind": "perturbation_report",
            "pass": bool(self.passed),
            "n_samples": len(self.samples),
            "worst_closed_form": self.worst_closed_form,
            "worst_extrapolated": self.worst_extrapolated,
            "tol_closed_form": self.tol_closed_form,
            "tol_finite_eps": self.tol_finite_eps,
            "samples": [s.to_dict() for s in self.samples],
        }


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("TILQ_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, n_tasks))


def equilibrium_certificate(p: LQProblem, pol: EquilibriumPolicy,
                            spec: SampleSpec | None = None) -> PerturbationReport:
    """Check the no-profitable-deviation property over a sample plan.

    Closed-form quotients are evaluated for every sampled (t, x, v); the
    finite-eps quotients — independent evidence through the actual cost
    functional — run on the +axis states with deviations probing around the
    policy value, which is where a wrong kernel becomes visible.  Passes
    when every closed form is >= -tol_closed_form and every extrapolated
    quotient is >= -tol_finite_eps.
    """
    spec = spec if spec is not None else SampleSpec()
    T = p.T
    n, m = p.n, p.m
    times = (np.asarray(spec.times, dtype=float) if spec.times is not None
             else np.linspace(0.0, 0.8 * T, 10))
    eye_n = np.eye(n)
    eye_m = np.eye(m)
    kappa = spec.axis_scale
    # an eps probe needs >= 4 grid nodes inside [t, t+eps] to be resolvable
    h_floor = 4.0 * float(np.diff(pol.P.grid.nodes).max())
    tasks = []
    for t in times:
        t = float(t)
        if spec.eps_list is not None:
            eps = tuple(spec.eps_list)
        else:
            base = min(0.1 * T, 0.25 * (T - t))
            eps = (base, 0.5 * base, 0.25 * base)
            eps = tuple(sorted({max(e, min(h_floor, base)) for e in eps},
                               reverse=True))
        for i in range(n):
            for sgn in (1.0, -1.0):
                x = sgn * eye_n[i]
                ubar = pol.control(t, x)
                eta = spec.probe_scale * (1.0 + float(np.abs(ubar).max()))
                vset = [np.zeros(m)]
                vset += [sv * kappa * eye_m[j] for j in range(m) for sv in (1.0, -1.0)]
                probes = [ubar + sv * eta * eye_m[j]
                          for j in range(m) for sv in (1.0, -1.0)]
                vset += probes
                fe_set = {0} | set(range(len(vset) - len(probes), len(vset)))
                for k, v in enumerate(vset):
                    want_eps = spec.finite_eps and sgn > 0 and k in fe_set
                    tasks.append((t, x, v, want_eps, eps))

    def run(task):
        t, x, v, want_eps, eps = task
        cf = perturbation_limit_closed_form(p, pol, t, x, v)
        fe = ext = None
        if want_eps:
            fe, ext = perturbation_limit_finite_eps(p, pol, t, x, v, eps)
        return PerturbationSample(t, x, v, cf, fe, ext)

    workers = _worker_count(len(tasks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(run, tasks))
    else:
        samples = [run(task) for task in tasks]
    worst_cf = min(s.closed_form for s in samples)
    exts = [s.extrapolated for s in samples if s.extrapolated is not None]
    worst_ext = min(exts) if exts else None
    passed = worst_cf >= -spec.tol_closed_form and (
        worst_ext is None or worst_ext >= -spec.tol_finite_eps)
    return PerturbationReport(samples, bool(passed), float(worst_cf),
                              None if worst_ext is None else float(worst_ext),
                              spec.tol_closed_form, spec.tol_finite_eps)
