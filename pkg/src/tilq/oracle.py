"""Independent reference computations for tests and the compare CLI mode.

classical_riccati integrates the standard backward matrix Riccati equation,
which is a valid reference exactly when all evaluation-time dependence is
absent (constant-in-first-argument kernels, constant terminal weight).
brute_force_cost evaluates the cost functional with a deliberately different
scheme — order-2 state integration and trapezoid quadrature on a finer grid
— so agreement with the order-4 path is evidence rather than tautology.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, TimeConsistencyError
from .grids import TimeGrid
from .kernels import matrix_norm_many
from .problem import LQProblem
from .equilibrium import EquilibriumPolicy, _as_control, _ConstantControl, \
    _GenericControl, _LinearControl


@dataclass(frozen=True)
class ClassicalRiccatiSolution:
    """Reference kernel P_ref on a grid; P_ref(T) equals the terminal weight."""

    grid: TimeGrid
    values: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        i = self.grid.index_of(float(t))
        return self.values[i]


def _time_consistency_defect(p: LQProblem, g: TimeGrid) -> float:
    nodes = g.nodes
    step = max(1, nodes.size // 40)
    sub = nodes[::step]
    if sub[-1] != nodes[-1]:
        sub = np.concatenate([sub, nodes[-1:]])
    ii, jj = np.triu_indices(sub.size)
    t, s = sub[ii], sub[jj]
    worst = 0.0
    for k in (p.Q, p.M, p.S):
        worst = max(worst, float(matrix_norm_many(k.eval_dt(t, s)).max()))
    worst = max(worst, float(matrix_norm_many(p.G.eval_dt(sub)).max()))
    return worst


def classical_riccati(p: LQProblem, g: TimeGrid) -> ClassicalRiccatiSolution:
    """Backward order-4 integration of the standard Riccati equation.

    Valid only for time-consistent data: all first-argument kernel partials
    and the terminal-weight derivative must vanish (checked on the grid,
    tolerance 1e-12), otherwise the classical equation is simply the wrong
    reference and the call is rejected.
    """
    defect = _time_consistency_defect(p, g)
    if defect > 1e-12:
        raise TimeConsistencyError(
            f"kernels depend on evaluation time (max partial {defect:.3e}); "
            "the classical equation is not a valid reference here")
    nodes = g.nodes
    K = nodes.size
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    half = np.empty(2 * K - 1)
    half[0::2] = nodes
    half[1::2] = mids
    Ah = p.A.eval(half)
    Bh = p.B.eval(half)
    Mh = p.M.eval(half, half)
    Sh = p.S.eval(half, half)
    Qh = p.Q.eval(half, half)

    def rhs(j: int, P: np.ndarray) -> np.ndarray:
        A, B, M, S, Q = Ah[j], Bh[j], Mh[j], Sh[j], Qh[j]
        gain = np.linalg.solve(M, B.T @ P + S)
        return -(A.T @ P) - P @ A - Q + (P @ B + S.T) @ gain

    values = np.empty((K, p.n, p.n))
    values[-1] = 0.5 * (p.G.eval(g.T) + p.G.eval(g.T).T)
    for i in range(K - 1, 0, -1):
        h = nodes[i] - nodes[i - 1]
        P = values[i]
        k1 = rhs(2 * i, P)
        k2 = rhs(2 * i - 1, P - 0.5 * h * k1)
        k3 = rhs(2 * i - 1, P - 0.5 * h * k2)
        k4 = rhs(2 * i - 2, P - h * k3)
        P0 = P - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        values[i - 1] = 0.5 * (P0 + P0.T)
    return ClassicalRiccatiSolution(g, values)


def brute_force_cost(p: LQProblem, t: float, x, u, refinement: int = 8) -> float:
    """Direct cost evaluation on a refinement-times-finer uniform grid.

    The state follows an explicit order-2 scheme (Heun) and the running
    cost uses trapezoid quadrature; both choices differ on purpose from the
    order-4 path so the two evaluations are independent witnesses.  The
    fine grid has 64 * refinement intervals on [t, T].
    """
    refinement = int(refinement)
    if refinement < 4:
        raise InvalidInputError("refinement must be at least 4")
    t = float(t)
    T = p.T
    if not 0.0 <= t <= T + 1e-12 * (1 + T):
        raise InvalidInputError("cost needs t in [0, T]")
    x = np.asarray(x, dtype=float).reshape(p.n)
    if T - t <= 1e-12 * (1 + T):
        return float(x @ p.G.eval(t) @ x)
    ts = np.linspace(t, T, 64 * refinement + 1)
    K = ts.size
    An = p.A.eval(ts)
    Bn = p.B.eval(ts)
    ctrl = _as_control(u, p.m)
    X = np.empty((K, p.n))
    X[0] = x
    if isinstance(ctrl, _LinearControl):
        C = An + Bn @ ctrl.gain_many(ts)
        for i in range(K - 1):
            h = ts[i + 1] - ts[i]
            f0 = C[i] @ X[i]
            X[i + 1] = X[i] + 0.5 * h * (f0 + C[i + 1] @ (X[i] + h * f0))
        U = np.einsum("kij,kj->ki", ctrl.gain_many(ts), X)
    elif isinstance(ctrl, _ConstantControl):
        b = Bn @ ctrl.v
        for i in range(K - 1):
            h = ts[i + 1] - ts[i]
            f0 = An[i] @ X[i] + b[i]
            X[i + 1] = X[i] + 0.5 * h * (f0 + An[i + 1] @ (X[i] + h * f0) + b[i + 1])
        U = np.tile(ctrl.v, (K, 1))
    else:
        fn = ctrl.fn
        U = np.empty((K, p.m))
        U[0] = np.asarray(fn(ts[0], X[0]), dtype=float).reshape(p.m)
        for i in range(K - 1):
            h = ts[i + 1] - ts[i]
            f0 = An[i] @ X[i] + Bn[i] @ U[i]
            xp = X[i] + h * f0
            up = np.asarray(fn(ts[i + 1], xp), dtype=float).reshape(p.m)
            X[i + 1] = X[i] + 0.5 * h * (f0 + An[i + 1] @ xp + Bn[i + 1] @ up)
            U[i + 1] = np.asarray(fn(ts[i + 1], X[i + 1]), dtype=float).reshape(p.m)
    Qr = p.Q.eval(t, ts)
    Sr = p.S.eval(t, ts)
    Mr = p.M.eval(t, ts)
    vals = (np.einsum("ki,kij,kj->k", X, Qr, X)
            + 2.0 * np.einsum("ki,kij,kj->k", U, Sr, X)
            + np.einsum("ki,kij,kj->k", U, Mr, U))
    running = float(np.trapezoid(vals, ts)) if hasattr(np, "trapezoid") \
        else float(np.trapz(vals, ts))
    return running + float(X[-1] @ p.G.eval(t) @ X[-1])
