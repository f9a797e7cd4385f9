"""Equilibrium Riccati integral equation and its windowed fixed-point solver.

The object solved for is the symmetric kernel P with

    P(t) = G(T) + int_t^T [ A'P + PA + Qbar(s,s)
                            - (PB + S')(s) M(s,s)^{-1} (B'P + S)(s) ] ds,

    Qbar(s,s) = Q(s,s) - F(s; s, P),

where F aggregates the time-preference drift of the weights along the
closed-loop flow Phi of A - B*Ups, Ups(s) = M(s,s)^{-1}(B(s)'P(s) + S(s,s)):

    F(t; s, P) = Phi(T,t)' Gdot(s) Phi(T,t)
               + int_t^T Phi(r,t)' [ Q_t(s,r) + Ups(r)' M_t(s,r) Ups(r)
                                     - Ups(r)' S_t(s,r) - S_t(s,r)' Ups(r) ] Phi(r,t) dr.

The solver marches backward from T in windows, iterating on each window the
flow-conjugated integral map (boundary value propagated with the drift-only
flow plus a windowed integral of the effective weight), which is a
contraction on windows below the width tau certified by
contraction_constants.  That certified width collapses numerically whenever
B is nonzero, so by default the solver falls back to practical windows with
divergence-triggered halving and records the observed contraction factors.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ._quad import integrate, left_slice_weights, simpson_weights
from .errors import InvalidInputError, NonconvergenceError
from .grids import TimeGrid
from .kernels import kernel_norms, matrix_norm, matrix_norm_many
from .problem import LQProblem, validate_assumptions
from .propagators import Propagator, closed_loop_coefficient, fundamental_solution


def _sym(x):
    return 0.5 * (x + np.swapaxes(x, -1, -2))


def _exp(x: float) -> float:
    """exp that saturates to inf instead of raising; large exponents only
    ever shrink the certified window widths toward zero."""
    return math.inf if x > 709.0 else math.exp(x)


class RiccatiSolution:
    """Symmetric matrix path P on a time grid with cubic interpolation.

    values[i] is P at grid.nodes[i]; node access reproduces the stored
    matrices exactly, off-node times use a cubic spline through the nodes.
    meta carries solver diagnostics (constants, windows, contraction factors).
    """

    def __init__(self, grid: TimeGrid, values, meta=None):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != grid.nodes.size or values.ndim != 3 \
                or values.shape[1] != values.shape[2]:
            raise InvalidInputError("values must be (num_nodes, n, n)")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("solution values must be finite")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.meta = dict(meta or {})
        self._spline = None

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        nodes = self.grid.nodes
        if np.any(ts < nodes[0] - 1e-12) or np.any(ts > nodes[-1] + 1e-12):
            raise InvalidInputError("evaluation time outside [0, T]")
        if self._spline is None:
            self._spline = CubicSpline(nodes, self.values, axis=0)
        out = np.asarray(self._spline(np.clip(ts, nodes[0], nodes[-1])))
        idx = np.searchsorted(nodes, ts)
        idx = np.clip(idx, 0, nodes.size - 1)
        exact = nodes[idx] == ts
        out[exact] = self.values[idx[exact]]
        return out[0] if scalar else out

    def __call__(self, t):
        return self.eval_many(t)

    def to_csv(self, fh) -> None:
        """Write t plus row-major entries P_i_j with 17 significant digits."""
        n = self.n
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"P_{i+1}_{j+1}" for i in range(n) for j in range(n)])
        for t, mat in zip(self.grid.nodes, self.values):
            writer.writerow([format(t, ".17g")]
                            + [format(v, ".17g") for v in mat.reshape(-1)])

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "riccati_solution",
            "grid": {
                "T": float(self.grid.T),
                "num_intervals": int(self.grid.num_intervals),
                "nodes": [float(t) for t in self.grid.nodes],
            },
            "values": [[float(v) for v in mat.reshape(-1)] for mat in self.values],
            "meta": _json_safe(self.meta),
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class ContractionConstants:
    """Constants certifying the fixed-point iteration on small windows.

    r bounds ||P||_C a priori; rho_bar bounds the feedback gain on the ball
    of radius 2r; beta_bar / omega_bar bound flow growth; gamma_bar is the
    Lipschitz scale of the nonlocal term; tau = min(tau1, tau2, tau3) is the
    certified window width (contraction factor <= 1/2 on windows <= tau).
    """

    r: float
    rho_bar: float
    beta_bar: float
    omega_bar: float
    gamma_bar: float
    tau1: float
    tau2: float
    tau3: float
    tau: float
    norms: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "r": self.r, "rho_bar": self.rho_bar, "beta_bar": self.beta_bar,
            "omega_bar": self.omega_bar, "gamma_bar": self.gamma_bar,
            "tau1": self.tau1, "tau2": self.tau2, "tau3": self.tau3, "tau": self.tau,
            "norms": {k: float(v) for k, v in self.norms.items()},
        }


def contraction_constants(p: LQProblem, g: TimeGrid) -> ContractionConstants:
    """Window-width certificate from grid-sampled coefficient norms."""
    nodes = g.nodes
    T = g.T
    nA = kernel_norms(p.A, g)
    nB = kernel_norms(p.B, g)
    nG = kernel_norms(p.G, g)
    nQ = kernel_norms(p.Q, g)
    nS = kernel_norms(p.S, g)
    nM = kernel_norms(p.M, g)
    ii, jj = np.triu_indices(nodes.size)
    minv = float(matrix_norm_many(np.linalg.inv(p.M.eval(nodes[ii], nodes[jj]))).max())

    a1 = nA.l1_norm
    binf = nB.linf_norm
    r = math.exp(2 * a1) * (nG.c_norm + T * nQ.c_norm)
    rho = minv * (4 * r * binf + nS.c_norm)
    beta = a1 + T * rho * binf
    omega = a1 + 2 * T * rho * binf
    gamma = minv * (1 + binf) ** 2 * (
        nG.c1_norm + T * nQ.c1_norm + (1 + 2 * T * rho) * (2 * rho * nM.c1_norm + nS.c1_norm)
    )

    den2 = 2 * _exp(4 * beta) * (
        rho * rho * nM.c_norm + nG.c1_norm + T * nQ.c1_norm
        + T * rho * (rho * nM.c1_norm + 2 * nS.c1_norm) + nQ.c_norm
    )
    tau2 = r / den2 if den2 > 0 else math.inf
    den3 = 4 * _exp(2 * a1) * (rho * binf + 2 * T * gamma * _exp(4 * omega))
    tau3 = 1.0 / den3 if den3 > 0 else math.inf

    # tau1: widest node span over which the drift-only flow stays uniformly
    # close to the identity, in both time directions
    psi = fundamental_solution(p.A, g)
    U = psi.values
    bound = 1.0 / (2.0 * (1.0 + _exp(2 * beta)))
    eye = np.eye(p.n)

    def span_ok(w: int) -> bool:
        if w == 0:
            return True
        fwd = np.linalg.solve(np.swapaxes(U[:-w], -1, -2), np.swapaxes(U[w:], -1, -2))
        bwd = np.linalg.solve(np.swapaxes(U[w:], -1, -2), np.swapaxes(U[:-w], -1, -2))
        worst = max(matrix_norm_many(np.swapaxes(fwd, -1, -2) - eye).max(),
                    matrix_norm_many(np.swapaxes(bwd, -1, -2) - eye).max())
        return bool(worst <= bound)

    lo, hi = 0, nodes.size - 1
    if span_ok(hi):
        lo = hi
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if span_ok(mid):
                lo = mid
            else:
                hi = mid
    tau1 = float((nodes[lo:] - nodes[:nodes.size - lo]).min()) if lo > 0 else 0.0

    tau = min(tau1, tau2, tau3)
    norms = {
        "A_l1": a1, "B_linf": binf, "G_c": nG.c_norm, "G_c1": nG.c1_norm,
        "Q_c": nQ.c_norm, "Q_c1": nQ.c1_norm, "S_c": nS.c_norm, "S_c1": nS.c1_norm,
        "M_c": nM.c_norm, "M_c1": nM.c1_norm, "M_inv_c": minv,
    }
    return ContractionConstants(r, rho, beta, omega, gamma,
                                tau1, float(tau2), float(tau3), float(tau), norms)


def upsilon(p: LQProblem, P, s: float) -> np.ndarray:
    """Feedback gain factor M(s,s)^{-1} (B(s)' P(s) + S(s,s)) at time s."""
    B = p.B.eval(s)
    rhs = B.T @ P(s) + p.S.eval(s, s)
    return np.linalg.solve(p.M.eval(s, s), rhs)


def f_map(p: LQProblem, P, phi: Propagator, t: float, s: float) -> np.ndarray:
    """Nonlocal drift term F(t; s, P) along the closed-loop flow phi.

    Integrates the first-argument partials of the weights, frozen at
    evaluation time s, conjugated by phi over r in [t, T].  s > t requires
    the kernels to extend beyond the triangle (the discount families do).
    """
    T = p.T
    if not (0.0 <= t <= T + 1e-12):
        raise InvalidInputError("f_map needs t in [0, T]")
    nodes = P.grid.nodes
    tail = nodes[nodes > t + 1e-12 * (1 + T)]
    if tail.size == 0:
        # t is at (or numerically at) the horizon: empty integral, identity flow
        return _sym(p.G.eval_dt(s))
    ts = np.concatenate([[t], tail])
    Phi = phi.transition_from(t, ts)
    PhiT = Phi[-1]
    Gd = p.G.eval_dt(s)
    F = PhiT.T @ Gd @ PhiT
    Pv = P.eval_many(ts)
    Bv = p.B.eval(ts)
    rhs = np.swapaxes(Bv, -1, -2) @ Pv + p.S.eval(ts, ts)
    ups = np.linalg.solve(p.M.eval(ts, ts), rhs)
    upsT = np.swapaxes(ups, -1, -2)
    Qd = p.Q.eval_dt(s, ts)
    Md = p.M.eval_dt(s, ts)
    Sd = p.S.eval_dt(s, ts)
    core = Qd + upsT @ Md @ ups - upsT @ Sd - np.swapaxes(Sd, -1, -2) @ ups
    integrand = np.swapaxes(Phi, -1, -2) @ core @ Phi
    return _sym(F + integrate(integrand, ts))


def q_bar(p: LQProblem, P, phi: Propagator, t: float) -> np.ndarray:
    """Effective state weight Q(t,t) - F(t; t, P)."""
    return _sym(p.Q.eval(t, t) - f_map(p, P, phi, t, t))


@dataclass
class SolveOptions:
    """Knobs for solve_riccati.

    tol: fixed-point tolerance in the grid sup norm (default 1e-10*(1+r)).
    max_iter: per-window iteration cap, error when hit.
    window_override: window width in time units; bypasses the width policy
        (divergence halving still active).
    validate: run assumption validation before solving.
    guaranteed_max_refine: largest internal grid-refinement factor allowed
        to resolve the certified width tau with >= min_window_nodes nodes.
    """

    tol: float | None = None
    max_iter: int = 200
    window_override: float | None = None
    validate: bool = True
    guaranteed_max_refine: int = 10
    min_window_nodes: int = 8


class _Diverged(Exception):
    pass


class _Engine:
    """Caches per-grid samples and runs fixed-point window iterations."""

    def __init__(self, p: LQProblem, grid: TimeGrid):
        self.p = p
        self.grid = grid
        nodes = grid.nodes
        self.nodes = nodes
        K = nodes.size
        mids = 0.5 * (nodes[:-1] + nodes[1:])
        half = np.empty(2 * K - 1)
        half[0::2] = nodes
        half[1::2] = mids
        self.half = half
        self.A_half = p.A.eval(half)
        self.B_half = p.B.eval(half)
        self.M_half = p.M.eval(half, half)
        self.S_half = p.S.eval(half, half)
        self.B_nodes = self.B_half[0::2]
        self.M_nodes = self.M_half[0::2]
        self.S_nodes = self.S_half[0::2]
        self.Q_nodes = p.Q.eval(nodes, nodes)
        self.Gd_nodes = p.G.eval_dt(nodes)
        self.G_T = _sym(p.G.eval(grid.T))
        self.psi = fundamental_solution(p.A, grid)
        self._tail_w = {}
        self._rows = {}
        self._win_w = {}

    def tail_weights(self, i: int) -> np.ndarray:
        if i not in self._tail_w:
            self._tail_w[i] = simpson_weights(self.nodes[i:])
        return self._tail_w[i]

    def window_weights(self, a: int, b: int) -> np.ndarray:
        key = (a, b)
        if key not in self._win_w:
            self._win_w[key] = left_slice_weights(self.nodes[a:b + 1])
        return self._win_w[key]

    def partial_rows(self, i: int):
        """Kernel first-argument partials at (s_i, nodes[i:]), cached."""
        if i not in self._rows:
            s = self.nodes[i]
            ts = self.nodes[i:]
            self._rows[i] = (self.p.Q.eval_dt(s, ts), self.p.M.eval_dt(s, ts),
                             self.p.S.eval_dt(s, ts))
        return self._rows[i]

    def upsilon_nodes(self, values: np.ndarray, a: int) -> np.ndarray:
        rhs = np.swapaxes(self.B_nodes[a:], -1, -2) @ values[a:] + self.S_nodes[a:]
        return np.linalg.solve(self.M_nodes[a:], rhs)

    def closed_loop_values(self, values: np.ndarray, a: int) -> np.ndarray:
        """Closed-loop fundamental solution U on nodes[a:], U(nodes[a]) = I."""
        spline = CubicSpline(self.nodes[a:], values[a:], axis=0)
        Pm = spline(self.half[2 * a:])
        Pm[0::2] = values[a:]
        rhs = np.swapaxes(self.B_half[2 * a:], -1, -2) @ Pm + self.S_half[2 * a:]
        ups = np.linalg.solve(self.M_half[2 * a:], rhs)
        C = self.A_half[2 * a:] - self.B_half[2 * a:] @ ups
        return fundamental_solution(None, self.nodes[a:], samples=C).values

    def f_diag(self, values: np.ndarray, a: int, b: int) -> np.ndarray:
        """F(s_i; s_i, P) for window nodes i in [a, b], tail from values."""
        U = self.closed_loop_values(values, a)
        ups = self.upsilon_nodes(values, a)
        upsT = np.swapaxes(ups, -1, -2)
        out = np.empty((b - a + 1,) + (self.p.n, self.p.n))
        for i in range(a, b + 1):
            j = i - a
            Qd, Md, Sd = self.partial_rows(i)
            Phi = np.swapaxes(
                np.linalg.solve(U[j].T, np.swapaxes(U[j:], -1, -2)), -1, -2)
            uj = ups[j:]
            ujT = upsT[j:]
            core = Qd + ujT @ Md @ uj - ujT @ Sd - np.swapaxes(Sd, -1, -2) @ uj
            integrand = np.swapaxes(Phi, -1, -2) @ core @ Phi
            F = np.tensordot(self.tail_weights(i), integrand, axes=(0, 0))
            PhiT = Phi[-1]
            out[j] = PhiT.T @ self.Gd_nodes[i] @ PhiT + F
        return _sym(out)

    def picard_iterate(self, values: np.ndarray, a: int, b: int,
                       boundary: np.ndarray) -> np.ndarray:
        """One application of the window map; returns values on nodes[a:b+1]."""
        F = self.f_diag(values, a, b)
        ups = self.upsilon_nodes(values, a)[:b - a + 1]
        quad = np.swapaxes(ups, -1, -2) @ self.M_nodes[a:b + 1] @ ups
        R = self.Q_nodes[a:b + 1] - F - quad
        UA = self.psi.values[a:b + 1]
        UAT = np.swapaxes(UA, -1, -2)
        Y = UAT @ R @ UA
        Sl = np.tensordot(self.window_weights(a, b), Y, axes=(1, 0))
        UAb = self.psi.values[b]
        C = (UAb.T @ boundary @ UAb) + Sl
        X = np.linalg.solve(UAT, C)
        new = np.swapaxes(np.linalg.solve(UAT, np.swapaxes(X, -1, -2)), -1, -2)
        new = _sym(new)
        new[-1] = boundary
        return new

    def run_window(self, values: np.ndarray, a: int, b: int, boundary: np.ndarray,
                   tol: float, max_iter: int, ball_cap: float) -> dict:
        """Iterate window [a, b] to tolerance, mutating values in place."""
        values[a:b] = boundary
        diffs = []
        for it in range(1, max_iter + 1):
            new = self.picard_iterate(values, a, b, boundary)
            if not np.all(np.isfinite(new)):
                raise _Diverged("non-finite iterate")
            d = float(matrix_norm_many(new - values[a:b + 1]).max())
            values[a:b + 1] = new
            diffs.append(d)
            if d <= tol:
                break
            if float(matrix_norm_many(new).max()) > ball_cap:
                raise _Diverged("iterate left the a-priori ball")
            if len(diffs) >= 3 and diffs[-1] > diffs[-2] > diffs[-3] \
                    and diffs[-1] > 100 * tol:
                raise _Diverged("iterate differences growing")
            if len(diffs) >= 8:
                f = (diffs[-1] / diffs[-8]) ** (1.0 / 7.0)
                if f >= 1.0:
                    raise _Diverged("no contraction over the last iterates")
                needed = math.log(tol / diffs[-1]) / math.log(f)
                if it + needed > max_iter:
                    raise _Diverged(
                        f"projected nonconvergence (observed factor ~{f:.3f})")
        else:
            raise NonconvergenceError(
                f"window [{self.nodes[a]:.6g}, {self.nodes[b]:.6g}] did not reach"
                f" tol={tol:.3e} in {max_iter} iterations (last diff {diffs[-1]:.3e})",
                diagnostics={"window": [float(self.nodes[a]), float(self.nodes[b])],
                             "diffs": diffs})
        factors = [diffs[k] / diffs[k - 1] for k in range(1, len(diffs))
                   if diffs[k - 1] > 0]
        return {
            "a": float(self.nodes[a]), "b": float(self.nodes[b]),
            "iterations": len(diffs), "final_diff": diffs[-1],
            "contraction_factor": max(factors) if factors else 0.0,
        }


@dataclass(frozen=True)
class WindowIterate:
    """Result of a single fixed-point application on one window."""

    nodes: np.ndarray
    values: np.ndarray


def picard_step(p: LQProblem, P: RiccatiSolution, window, boundary) -> WindowIterate:
    """Apply the window map once.

    window is a (a, b) pair of grid-node times, boundary the matrix pinned at
    b; P supplies both the in-window iterate and the already-solved tail on
    [b, T].  Returns the mapped values on the window nodes.
    """
    a_idx = P.grid.index_of(window[0])
    b_idx = P.grid.index_of(window[1])
    if a_idx >= b_idx:
        raise InvalidInputError("window must span at least one grid interval")
    boundary = _sym(np.atleast_2d(np.asarray(boundary, dtype=float)))
    engine = _Engine(p, P.grid)
    values = P.values.copy()
    new = engine.picard_iterate(values, a_idx, b_idx, boundary)
    return WindowIterate(P.grid.nodes[a_idx:b_idx + 1].copy(), new)


def solve_riccati(p: LQProblem, g: TimeGrid, opts: SolveOptions | None = None
                  ) -> RiccatiSolution:
    """Solve the equilibrium Riccati integral equation on grid g.

    Windows of the certified width tau are used whenever the grid resolves
    them (>= opts.min_window_nodes nodes, refining internally up to
    opts.guaranteed_max_refine); the contraction factor is then asserted
    <= 0.75 per window.  Otherwise practical windows of width T/4 march
    backward with halving on observed divergence.  Raises
    NonconvergenceError when an iteration cap or halving floor is hit.
    """
    opts = opts or SolveOptions()
    if opts.validate:
        report = validate_assumptions(p, g)
        if not report.hard_ok:
            bad = [c.assumption for c in report.checks if c.hard and not c.passed]
            raise InvalidInputError(f"problem fails structural assumptions: {bad}")
        if not report.monotone_ok:
            warnings.warn("advisory sign conditions failed; equilibrium certified"
                          " quantities may lose definiteness", RuntimeWarning,
                          stacklevel=2)
    cc = contraction_constants(p, g)
    tol = opts.tol if opts.tol is not None else 1e-10 * (1.0 + cc.r)

    g_solve = g
    refined_by = 1
    if opts.window_override is not None:
        mode = "override"
        width = float(opts.window_override)
        if not 0 < width <= g.T:
            raise InvalidInputError("window_override must lie in (0, T]")
    elif cc.tau >= opts.min_window_nodes * g.h:
        mode = "guaranteed"
        width = cc.tau
    elif cc.tau > 0 and math.ceil(opts.min_window_nodes * g.h / cc.tau) \
            <= opts.guaranteed_max_refine:
        refined_by = math.ceil(opts.min_window_nodes * g.h / cc.tau)
        g_solve = g.refine(refined_by)
        mode = "guaranteed"
        width = cc.tau
    else:
        mode = "practical"
        width = g.T / 4.0

    engine = _Engine(p, g_solve)
    nodes = g_solve.nodes
    K = nodes.size
    values = np.broadcast_to(engine.G_T, (K,) + engine.G_T.shape).copy()
    ball_cap = 4.0 * cc.r + 2.0 * matrix_norm(engine.G_T) + 1.0

    windows = []
    pos = K - 1
    halvings = 0
    w = width
    while pos > 0:
        a_idx = int(np.searchsorted(nodes, nodes[pos] - w - 1e-12 * (1 + g.T), side="left"))
        a_idx = min(a_idx, pos - 1)
        try:
            info = engine.run_window(values, a_idx, pos, values[pos].copy(),
                                     tol, opts.max_iter, ball_cap)
        except _Diverged as exc:
            if mode == "guaranteed":
                raise NonconvergenceError(
                    f"divergence inside a certified window: {exc}",
                    diagnostics={"window": [float(nodes[a_idx]), float(nodes[pos])],
                                 "mode": mode})
            if a_idx == pos - 1 or halvings >= 40:
                raise NonconvergenceError(
                    f"window halving exhausted at [{nodes[a_idx]:.6g}, {nodes[pos]:.6g}]:"
                    f" {exc}",
                    diagnostics={"halvings": halvings, "mode": mode})
            halvings += 1
            w = w / 2.0
            continue
        if mode == "guaranteed" and info["contraction_factor"] > 0.75:
            raise NonconvergenceError(
                f"contraction factor {info['contraction_factor']:.3f} exceeds 0.75 on a"
                " certified window", diagnostics=info)
        windows.append(info)
        pos = a_idx

    meta = {
        "mode": mode,
        "window_width": float(width),
        "final_window_width": float(w),
        "halvings": halvings,
        "tol": float(tol),
        "refined_by": refined_by,
        "constants": cc.to_dict(),
        "windows": windows,
        "iterations_total": int(sum(w_["iterations"] for w_ in windows)),
        "max_contraction_factor": max((w_["contraction_factor"] for w_ in windows),
                                      default=0.0),
    }
    return RiccatiSolution(g_solve, values, meta)


def _integrand_nodes(p: LQProblem, P: RiccatiSolution, engine: _Engine) -> np.ndarray:
    """Right-hand-side integrand of the integral form at all grid nodes."""
    nodes = P.grid.nodes
    K = nodes.size
    F = engine.f_diag(P.values.copy(), 0, K - 1)
    Qb = _sym(engine.Q_nodes - F)
    ups = engine.upsilon_nodes(P.values, 0)
    quad = np.swapaxes(ups, -1, -2) @ engine.M_nodes @ ups
    Av = p.A.eval(nodes)
    AtP = np.swapaxes(Av, -1, -2) @ P.values
    return AtP + np.swapaxes(AtP, -1, -2) + Qb - quad


def q_bar_nodes(p: LQProblem, P: RiccatiSolution) -> np.ndarray:
    """Effective state weight Q(s,s) - F(s; s, P) at every grid node."""
    engine = _Engine(p, P.grid)
    F = engine.f_diag(P.values.copy(), 0, P.grid.nodes.size - 1)
    return _sym(engine.Q_nodes - F)


def riccati_residual_profile(p: LQProblem, P: RiccatiSolution) -> np.ndarray:
    """Integral-equation defect at every grid node (row-sum norm)."""
    engine = _Engine(p, P.grid)
    I = _integrand_nodes(p, P, engine)
    W = left_slice_weights(P.grid.nodes)
    integrals = np.tensordot(W, I, axes=(1, 0))
    defect = P.values - engine.G_T - integrals
    return matrix_norm_many(defect)


def riccati_residual(p: LQProblem, P: RiccatiSolution, t: float) -> float:
    """Integral-equation defect ||P(t) - G(T) - int_t^T rhs|| at one time.

    Grid nodes use the shared node integrand; off-node t adds the fractional
    first interval with the nonlocal term evaluated at t itself.
    """
    nodes = P.grid.nodes
    if not nodes[0] <= t <= nodes[-1]:
        raise InvalidInputError("t outside [0, T]")
    engine = _Engine(p, P.grid)
    I = _integrand_nodes(p, P, engine)
    G_T = engine.G_T
    idx = np.searchsorted(nodes, t)
    if idx < nodes.size and nodes[idx] == t:
        wts = simpson_weights(nodes[idx:])
        integral = np.tensordot(wts, I[idx:], axes=(0, 0))
        return float(matrix_norm(P.values[idx] - G_T - integral))
    phi = fundamental_solution(closed_loop_coefficient(p, P), P.grid)
    Pt = P(t)
    At = p.A.eval(t)
    upst = upsilon(p, P, t)
    It = At.T @ Pt + Pt @ At + q_bar(p, P, phi, t) - upst.T @ p.M.eval(t, t) @ upst
    ts = np.concatenate([[t], nodes[idx:]])
    stack = np.concatenate([It[None], I[idx:]])
    integral = integrate(stack, ts)
    return float(matrix_norm(Pt - G_T - integral))
