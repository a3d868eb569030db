"""Network Lasso: squared error on labelled nodes plus weighted total variation.

The problem ``min_x (1/M) sum_{i in M} (y_i - x_i)^2 + lam * ||x||_TV`` is
solved with a diagonally preconditioned primal-dual iteration on
``min_x max_{|u|<=1} f(x) + u^T D x`` (``f`` is the data term divided by
``lam``). The returned estimate is the running average of primal iterates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import MaxItersReached, NonFiniteIterateError
from .graph import EmpiricalGraph, Orientation, canonical_orientation, tv_norm
from .signal import LabelSet

STOP_WINDOW = 10


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    max_iters: int = 100_000
    rel_tol: float = 1e-7
    snapshot_every: int = 100

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if int(self.snapshot_every) < 1:
            raise ValueError(f"snapshot_every must be positive, got {self.snapshot_every}")


@dataclass(frozen=True)
class StepScalings:
    """Preconditioners: ``nu = 1/(lam M)``, ``gamma_i = sum_j sqrt(W_ij)``,
    edge steps ``1/(2 sqrt(W_e))``."""

    nu: float
    gamma: np.ndarray
    edge_steps: np.ndarray


def step_scalings(g: EmpiricalGraph, n_labels: int, lam: float) -> StepScalings:
    sw = g.sqrt_weights
    gamma = np.bincount(g.heads, sw, g.n_nodes) + np.bincount(g.tails, sw, g.n_nodes)
    return StepScalings(1.0 / (lam * n_labels), gamma, 1.0 / (2.0 * sw))


@dataclass
class SolverState:
    x_hat: np.ndarray
    x_prev: np.ndarray
    y_dual: np.ndarray
    x_avg: np.ndarray
    k: int = 0


@dataclass
class SolverResult:
    x: np.ndarray
    iters: int
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = True
    max_dual_abs: float = 0.0
    state: SolverState | None = None

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "iters": int(self.iters),
            "objective": float(self.objective),
            "trace": [[int(k), float(v)] for k, v in self.trace],
        }


def empirical_error(x, labels: LabelSet) -> float:
    """Mean squared deviation from the labels on the training set."""
    x = np.asarray(x, dtype=float)
    return float(np.mean((labels.values - x[labels.nodes]) ** 2))


def objective(g: EmpiricalGraph, x, labels: LabelSet, lam: float) -> float:
    """``empirical_error(x) + lam * tv_norm(x)``."""
    return empirical_error(x, labels) + lam * tv_norm(g, x)


def estimation_error_tv(g: EmpiricalGraph, x_out, x_bar) -> float:
    """Total variation of the estimation error ``x_out - x_bar``."""
    return tv_norm(g, np.asarray(x_out, dtype=float) - np.asarray(x_bar, dtype=float))


# sweep outcomes of the compiled loop
_RAN, _CONVERGED, _NON_FINITE = 0, 1, 2


@njit(cache=True)
def _sweeps(x_hat, x_prev, y, x_avg, k, n_sweeps, k_start, heads, tails, sw, edge_scale, inv_gamma,
            nodes, prox_num, gamma_m, prox_den, history, rel_tol, max_dual):
    # One call runs up to n_sweeps iterations in place; arithmetic mirrors the numpy loop
    # operation for operation so both give identical floating-point results.
    n = x_hat.shape[0]
    m = y.shape[0]
    window = history.shape[0] - 1
    x = np.empty(n)
    dty = np.empty(n)
    for _ in range(n_sweeps):
        for i in range(n):
            x[i] = 2.0 * x_hat[i] - x_prev[i]
        for e in range(m):
            z = (x[heads[e]] - x[tails[e]]) * edge_scale[e] + y[e]
            y[e] = min(max(z, -1.0), 1.0)
            if abs(y[e]) > max_dual:
                max_dual = abs(y[e])
        dty[:] = 0.0
        for e in range(m):
            dty[heads[e]] += sw[e] * y[e]
        for e in range(m):
            dty[tails[e]] += -sw[e] * y[e]
        for i in range(n):
            x_prev[i] = x_hat[i]
            x_hat[i] = x_hat[i] - dty[i] * inv_gamma[i]
        for j in range(nodes.shape[0]):
            i = nodes[j]
            x_hat[i] = (prox_num[j] + gamma_m[j] * x_hat[i]) / prox_den[j]
        k += 1
        a, b = 1.0 - 1.0 / k, 1.0 / k
        for i in range(n):
            x_avg[i] = a * x_avg[i] + b * x_hat[i]
        slot = k % (window + 1)
        for i in range(n):
            history[slot, i] = x_avg[i]
        if k - k_start > window:
            old = (k - window) % (window + 1)
            change = 0.0
            scale = 0.0
            for i in range(n):
                change = max(change, abs(x_avg[i] - history[old, i]))
                scale = max(scale, abs(x_avg[i]))
            if not np.isfinite(change + scale):
                return k, max_dual, _NON_FINITE
            if change < rel_tol * (1.0 + scale):
                return k, max_dual, _CONVERGED
        else:
            for i in range(n):
                if not np.isfinite(x_avg[i]):
                    return k, max_dual, _NON_FINITE
    return k, max_dual, _RAN


def solve(
    g: EmpiricalGraph,
    labels: LabelSet,
    cfg: SolverConfig,
    *,
    init: SolverState | None = None,
    orientation: Orientation | None = None,
    callback=None,
) -> SolverResult:
    """Run the primal-dual network Lasso iteration.

    Each sweep performs, in order: extrapolation ``x = 2 x_hat - x_prev``;
    dual ascent ``z = y + edge_steps * D x``; clipping ``y = z / max(1, |z|)``;
    primal descent ``x_hat -= (D^T y) / gamma``; the proximal data step on
    labelled nodes; and the running average of ``x_hat``.

    Stops when the averaged iterate changes by less than
    ``rel_tol * (1 + ||x_avg||_inf)`` (sup norm) over ``STOP_WINDOW``
    iterations, or after ``max_iters`` (with a :class:`MaxItersReached`
    warning and ``converged=False``).

    Without a callback the sweeps run in a compiled loop; with one they run
    in numpy so the state can be handed out after every iteration. Both give
    the same floating-point results.

    Parameters
    ----------
    init : SolverState, optional
        Warm state; ``init.k`` iterations are treated as already averaged.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.
    """
    o = orientation or canonical_orientation(g)
    n = g.n_nodes
    nodes = labels.nodes
    if nodes.max() >= n:
        raise ValueError("labels reference nodes outside the graph")
    sc = step_scalings(g, labels.size, cfg.lam)
    two_nu = 2.0 * sc.nu
    gamma_m = sc.gamma[nodes]
    p = _Problem(
        heads=np.ascontiguousarray(o.heads, dtype=np.int64),
        tails=np.ascontiguousarray(o.tails, dtype=np.int64),
        sw=np.ascontiguousarray(g.sqrt_weights, dtype=float),
        edge_scale=sc.edge_steps * g.sqrt_weights,  # dual step times incidence magnitude
        inv_gamma=1.0 / sc.gamma,
        nodes=np.ascontiguousarray(nodes, dtype=np.int64),
        prox_num=two_nu * labels.values,
        gamma_m=gamma_m,
        prox_den=two_nu + gamma_m,
    )

    if init is None:
        state = SolverState(np.zeros(n), np.zeros(n), np.zeros(g.n_edges), np.zeros(n), 0)
    else:
        state = SolverState(
            np.array(init.x_hat, dtype=float),
            np.array(init.x_prev, dtype=float),
            np.array(init.y_dual, dtype=float),
            np.array(init.x_avg, dtype=float),
            int(init.k),
        )
    run = _run_numpy if callback is not None else _run_compiled
    final_state, max_dual, converged, trace = run(p, state, cfg, g, labels, callback)

    if not converged:
        warnings.warn(
            f"network Lasso stopped at max_iters={cfg.max_iters} before reaching rel_tol={cfg.rel_tol}",
            MaxItersReached,
            stacklevel=2,
        )
    k = final_state.k
    final = objective(g, final_state.x_avg, labels, cfg.lam)
    if not trace or trace[-1][0] != k:
        trace.append((k, final))
    return SolverResult(
        x=final_state.x_avg,
        iters=k - state.k,
        objective=final,
        trace=trace,
        converged=converged,
        max_dual_abs=max_dual,
        state=final_state,
    )


@dataclass(frozen=True)
class _Problem:
    heads: np.ndarray
    tails: np.ndarray
    sw: np.ndarray
    edge_scale: np.ndarray
    inv_gamma: np.ndarray
    nodes: np.ndarray
    prox_num: np.ndarray
    gamma_m: np.ndarray
    prox_den: np.ndarray


def _run_compiled(p, start, cfg, g, labels, callback):
    x_hat, x_prev, y, x_avg = (a.copy() for a in (start.x_hat, start.x_prev, start.y_dual, start.x_avg))
    k = start.k
    history = np.empty((STOP_WINDOW + 1, g.n_nodes))
    max_dual = float(np.max(np.abs(y))) if y.size else 0.0
    end = start.k + int(cfg.max_iters)
    every = int(cfg.snapshot_every)
    trace = []
    converged = False
    while k < end:
        # run up to the next snapshot boundary
        n_sweeps = min(end, (k // every + 1) * every) - k
        k, max_dual, status = _sweeps(
            x_hat, x_prev, y, x_avg, k, n_sweeps, start.k, p.heads, p.tails, p.sw, p.edge_scale,
            p.inv_gamma, p.nodes, p.prox_num, p.gamma_m, p.prox_den, history, float(cfg.rel_tol), max_dual,
        )
        if status == _NON_FINITE:
            raise NonFiniteIterateError(f"non-finite iterate at iteration {k}")
        if k % every == 0:
            trace.append((k, objective(g, x_avg, labels, cfg.lam)))
        if status == _CONVERGED:
            converged = True
            break
    return SolverState(x_hat, x_prev, y, x_avg, k), float(max_dual), converged, trace


def _run_numpy(p, start, cfg, g, labels, callback):
    n = g.n_nodes
    x_hat, x_prev, y, x_avg = start.x_hat, start.x_prev, start.y_dual, start.x_avg
    k = start.k
    history = np.empty((STOP_WINDOW + 1, n))
    max_dual = float(np.max(np.abs(y))) if y.size else 0.0
    trace = []
    converged = False
    for _ in range(int(cfg.max_iters)):
        # 1: extrapolation
        x = 2.0 * x_hat - x_prev
        # 2: dual ascent
        z = (x[p.heads] - x[p.tails]) * p.edge_scale + y
        # 3: projection onto [-1, 1]; same values as z / max(1, |z|) since z / |z| is exactly +-1
        y = np.minimum(np.maximum(z, -1.0), 1.0)
        # 4: primal descent
        dty = np.zeros(n)
        np.add.at(dty, p.heads, p.sw * y)
        np.add.at(dty, p.tails, -p.sw * y)
        x_prev = x_hat
        x_hat = x_hat - dty * p.inv_gamma
        # 5: proximal step of the data term
        x_hat[p.nodes] = (p.prox_num + p.gamma_m * x_hat[p.nodes]) / p.prox_den
        # 6, 7: running average
        k += 1
        x_avg = (1.0 - 1.0 / k) * x_avg + (1.0 / k) * x_hat

        if y.size:
            max_dual = max(max_dual, float(np.max(np.abs(y))))
        history[k % (STOP_WINDOW + 1)] = x_avg
        callback(SolverState(x_hat, x_prev, y, x_avg, k))
        if k % cfg.snapshot_every == 0:
            trace.append((k, objective(g, x_avg, labels, cfg.lam)))
        if k - start.k > STOP_WINDOW:
            old = history[(k - STOP_WINDOW) % (STOP_WINDOW + 1)]
            change = np.max(np.abs(x_avg - old))
            scale = np.max(np.abs(x_avg))
            if not math.isfinite(change + scale):
                raise NonFiniteIterateError(f"non-finite iterate at iteration {k}")
            if change < cfg.rel_tol * (1.0 + scale):
                converged = True
                break
        elif not np.isfinite(x_avg).all():
            raise NonFiniteIterateError(f"non-finite iterate at iteration {k}")
    return SolverState(x_hat, x_prev, y, x_avg, k), max_dual, converged, trace
