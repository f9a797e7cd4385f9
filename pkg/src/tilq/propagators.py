"""Fundamental solutions of linear time-varying systems dU/dt = C(t) U.

The propagator stores U at the grid nodes (classical fourth-order one-step
Runge-Kutta per interval, U(nodes[0]) = I) plus the slopes C(t_i) U(t_i) for
cubic Hermite dense output between nodes.  Transitions Phi(t, s) =
U(t) U(s)^{-1} come from linear solves, never from stored inverses.
"""
from __future__ import annotations

import warnings

import numpy as np

from .errors import IllConditionedError, InvalidInputError
from .kernels import OneTimeMatrixFn

_COND_WARN = 1e12
_COND_ERROR = 1e14


def _coefficient_samples(coefficient, nodes):
    """C at all nodes and interval midpoints, stacked as (2K-1, n, n)."""
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    times = np.empty(nodes.size + mids.size)
    times[0::2] = nodes
    times[1::2] = mids
    if isinstance(coefficient, OneTimeMatrixFn):
        return coefficient.eval(times)
    sample = np.atleast_2d(np.asarray(coefficient(float(times[0])), dtype=float))
    out = np.empty((times.size,) + sample.shape)
    out[0] = sample
    for i, t in enumerate(times[1:], start=1):
        out[i] = coefficient(float(t))
    return out


class Propagator:
    """Fundamental solution on a node array; see fundamental_solution."""

    def __init__(self, nodes, values, slopes, coefficient=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = values
        self.slopes = slopes
        self.coefficient = coefficient
        self.dim = values.shape[-1]
        inv = np.linalg.inv(values)
        conds = (np.abs(values).sum(-1).max(-1) * np.abs(inv).sum(-1).max(-1))
        self.condition = float(conds.max())
        self._node_conds = conds
        if self.condition > _COND_WARN:
            warnings.warn(
                f"propagator condition number {self.condition:.3e} exceeds {_COND_WARN:.0e};"
                " transitions over long spans may lose accuracy",
                RuntimeWarning, stacklevel=3,
            )

    def value_many(self, ts) -> np.ndarray:
        """U(t) for a 1-d array of times inside [nodes[0], nodes[-1]]."""
        ts = np.asarray(ts, dtype=float)
        lo, hi = self.nodes[0], self.nodes[-1]
        span = hi - lo
        if np.any(ts < lo - 1e-12 * (1 + span)) or np.any(ts > hi + 1e-12 * (1 + span)):
            raise InvalidInputError("time outside the propagator range")
        ts = np.clip(ts, lo, hi)
        idx = np.searchsorted(self.nodes, ts, side="right") - 1
        idx = np.clip(idx, 0, self.nodes.size - 2)
        h = self.nodes[idx + 1] - self.nodes[idx]
        theta = (ts - self.nodes[idx]) / h
        exact = theta <= 1e-13
        at_end = theta >= 1 - 1e-13
        th = theta[:, None, None]
        hh = h[:, None, None]
        h00 = 2 * th**3 - 3 * th**2 + 1
        h10 = th**3 - 2 * th**2 + th
        h01 = -2 * th**3 + 3 * th**2
        h11 = th**3 - th**2
        out = (h00 * self.values[idx] + h10 * hh * self.slopes[idx]
               + h01 * self.values[idx + 1] + h11 * hh * self.slopes[idx + 1])
        out[exact] = self.values[idx[exact]]
        out[at_end] = self.values[idx[at_end] + 1]
        return out

    def value(self, t) -> np.ndarray:
        return self.value_many(np.asarray([t]))[0]

    def transition_from(self, s: float, ts) -> np.ndarray:
        """Phi(t, s) = U(t) U(s)^{-1} for each t in ts (batched)."""
        Us = self.value(s)
        cond = (np.abs(Us).sum(-1).max() * np.abs(np.linalg.inv(Us)).sum(-1).max())
        if cond > _COND_ERROR:
            raise IllConditionedError(
                f"transition base point s={s} has condition {cond:.3e}", condition=cond)
        V = self.value_many(np.asarray(ts, dtype=float))
        return np.linalg.solve(Us.T, V.swapaxes(-1, -2)).swapaxes(-1, -2)

    def transition(self, t: float, s: float) -> np.ndarray:
        """State-transition matrix Phi(t, s); Phi(t, t) = I exactly at nodes."""
        return self.transition_from(s, np.asarray([t]))[0]


def fundamental_solution(coefficient, grid, *, samples=None) -> Propagator:
    """Propagator of dU/dt = C(t) U, U(first node) = I, on the given nodes.

    Parameters
    ----------
    coefficient : OneTimeMatrixFn or callable t -> (n, n) array
    grid : TimeGrid or 1-d increasing node array
    samples : optional precomputed C at nodes and midpoints, shape
        (2K-1, n, n) interleaved [node0, mid0, node1, mid1, ...]; bypasses
        coefficient evaluation (the coefficient is still kept for slopes).
    """
    nodes = np.asarray(getattr(grid, "nodes", grid), dtype=float)
    if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise InvalidInputError("propagator needs at least two increasing nodes")
    C = _coefficient_samples(coefficient, nodes) if samples is None else np.asarray(samples, dtype=float)
    if C.shape[0] != 2 * nodes.size - 1:
        raise InvalidInputError("coefficient samples must cover nodes and midpoints")
    n = C.shape[-1]
    hs = np.diff(nodes)[:, None, None]
    eye = np.eye(n)
    C0 = C[0:-1:2]
    Cm = C[1::2]
    C1 = C[2::2]
    K1 = C0
    K2 = Cm @ (eye + 0.5 * hs * K1)
    K3 = Cm @ (eye + 0.5 * hs * K2)
    K4 = C1 @ (eye + hs * K3)
    E = eye + (hs / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    U = np.empty((nodes.size, n, n))
    U[0] = eye
    for i in range(nodes.size - 1):
        U[i + 1] = E[i] @ U[i]
    slopes = C[0::2] @ U
    return Propagator(nodes, U, slopes, coefficient)


def closed_loop_coefficient(p, P) -> OneTimeMatrixFn:
    """Drift of the state under the linear feedback induced by P:
    A(t) - B(t) M(t,t)^{-1} (B(t)^T P(t) + S(t,t)).

    P must be callable on time arrays (node values with cubic interpolation,
    as produced by the equilibrium solver).
    """
    def fn(ts):
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        A = p.A.eval(ts)
        B = p.B.eval(ts)
        Pv = P(ts)
        if Pv.ndim == 2:
            Pv = Pv[None]
        rhs = np.swapaxes(B, -1, -2) @ Pv + p.S.eval(ts, ts)
        ups = np.linalg.solve(p.M.eval(ts, ts), rhs)
        out = A - B @ ups
        return out[0] if scalar else out

    return OneTimeMatrixFn(fn, (p.n, p.n), p.T, vectorized=True)
