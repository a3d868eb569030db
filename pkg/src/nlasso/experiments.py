"""Monte-Carlo harness for the network Lasso error bound.

A run draws one stochastic-block-model graph with a planted partition and a
piecewise-constant ground truth, then for every training-set size ``M`` and
trial draws a training set, certifies it with the flow certifier, and for every
noise level ``sigma`` and regularisation ``lam`` solves the network Lasso and
records the estimation error.

Seeds are derived from the base seed with :class:`numpy.random.SeedSequence`:

* graph: ``(seed, 0, retry)``
* training set of trial ``t``: ``(seed, 1, t)``; sets are nested in ``M``
* label noise of trial ``t``: ``(seed, 2, t)``, shared across ``sigma`` and ``M``

so cells differ only in the parameter being varied.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import MISSING, asdict, dataclass, field, fields

import numpy as np

from .errors import (
    ConfigError,
    GeneratorExhaustedError,
    HypothesisViolatedError,
    NoFeasibleLError,
    GraphError,
    NonPositiveEtaError,
    PartitionError,
)
from .flows import condition_number, max_certifiable_L
from .graph import (
    EmpiricalGraph,
    Partition,
    build_graph,
    cluster_spectral_gaps,
    incidence_pseudoinverse,
    induced_subgraph,
    make_partition,
    node_norm,
    tv_norm,
)
from .signal import ClusteredSignal, NoiseModel, expand_signal, sample_labels, sample_training_set
from .solver import SolverConfig, estimation_error_tv, solve

RESULTS_HEADER = ["sigma", "M", "lambda", "trial", "tv_error", "node_error", "iters", "K", "L", "kappa"]
BOUND_HEADER = ["eta", "empirical_freq", "bound"]
MAX_GRAPH_RETRIES = 100
DEFAULT_K_GRID = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)


def derive_seed(base: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(base), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def sbm_graph(
    sizes,
    p_in: float,
    p_out: float,
    seed: int,
    *,
    w_in: float = 1.0,
    w_out: float = 1.0,
    max_retries: int = MAX_GRAPH_RETRIES,
) -> tuple[EmpiricalGraph, Partition]:
    """Stochastic block model with the blocks as planted partition.

    Node pairs are joined with probability ``p_in`` inside a block and
    ``p_out`` across blocks; edges get weight ``w_in`` or ``w_out``. Draws are
    repeated until the graph and every block are connected.

    Raises
    ------
    GeneratorExhaustedError
        After ``max_retries`` failed draws.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("cluster sizes must be positive")
    for name, prob in (("p_in", p_in), ("p_out", p_out)):
        if not 0 <= prob <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {prob}")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    weight = np.where(same, w_in, w_out)
    clusters = [np.flatnonzero(labels == c) for c in range(len(sizes))]
    for attempt in range(max_retries):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0, attempt)))
        keep = rng.random(len(iu)) < prob
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist(), weight[keep].tolist()))
        try:
            g = build_graph(n, edges)
            return g, make_partition(g, clusters)
        except (GraphError, PartitionError):
            continue
    raise GeneratorExhaustedError(
        f"no connected SBM draw with connected clusters after {max_retries} attempts"
    )


@dataclass(frozen=True)
class ExperimentConfig:
    sizes: tuple
    p_in: float
    p_out: float
    values: tuple
    sigmas: tuple
    train_sizes: tuple
    lambdas: tuple
    trials: int
    seed: int
    w_in: float = 1.0
    w_out: float = 1.0
    max_iters: int = 5000
    tol: float = 1e-7
    K_grid: tuple = DEFAULT_K_GRID
    n_jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        data = dict(data.get("experiment", data))
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for f in fields(cls):
            if f.default is MISSING and f.name not in data:
                raise ConfigError(f.name, "missing required field")
        out = {}
        for name, value in data.items():
            try:
                out[name] = _coerce(name, value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(name, str(exc)) from None
        cfg = cls(**out)
        cfg.validate()
        return cfg

    def validate(self):
        for name in ("sizes", "values", "sigmas", "train_sizes", "lambdas"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(name, "must be a nonempty list")
        if len(self.values) != len(self.sizes):
            raise ConfigError("values", f"need one value per cluster ({len(self.sizes)})")
        if min(self.sizes) < 1:
            raise ConfigError("sizes", "cluster sizes must be positive")
        if self.trials < 1:
            raise ConfigError("trials", "must be at least 1")
        n = sum(self.sizes)
        for m in self.train_sizes:
            if not 1 <= m <= n:
                raise ConfigError("train_sizes", f"size {m} outside 1..{n}")
        if min(self.sigmas) < 0:
            raise ConfigError("sigmas", "must be non-negative")
        if min(self.lambdas) <= 0:
            raise ConfigError("lambdas", "must be positive")
        if self.K_grid and min(self.K_grid) <= 0:
            raise ConfigError("K_grid", "must be positive")
        for name in ("p_in", "p_out"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(name, "must lie in [0, 1]")
        for name in ("w_in", "w_out"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters", "must be positive")
        if not self.tol > 0:
            raise ConfigError("tol", "must be positive")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


_LIST_FIELDS = {"sizes": int, "values": float, "sigmas": float, "train_sizes": int, "lambdas": float, "K_grid": float}
_SCALAR_FIELDS = {
    "p_in": float, "p_out": float, "w_in": float, "w_out": float, "trials": int,
    "seed": int, "max_iters": int, "tol": float, "n_jobs": int,
}


def _coerce(name, value):
    if name in _LIST_FIELDS:
        if isinstance(value, str) or not hasattr(value, "__iter__"):
            raise TypeError("expected a list")
        kind = _LIST_FIELDS[name]
        return tuple(_scalar(kind, v) for v in value)
    return _scalar(_SCALAR_FIELDS[name], value)


def _scalar(kind, v):
    if isinstance(v, bool):
        raise TypeError(f"expected {kind.__name__}, got bool")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ValueError(f"expected an integer, got {v}")
        return int(v)
    return float(v)


def load_config(path) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from a ``.toml`` or ``.json`` file."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        if path.endswith(".json"):
            data = json.loads(raw)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            data = tomllib.loads(raw.decode())
    except Exception as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None
    return ExperimentConfig.from_dict(data)


@dataclass(frozen=True)
class TrialRecord:
    sigma: float
    M: int
    lam: float
    trial: int
    tv_error: float
    node_error: float
    iters: int
    K: float
    L: float
    kappa: float

    def row(self):
        return [self.sigma, self.M, self.lam, self.trial, self.tv_error, self.node_error,
                self.iters, self.K, self.L, self.kappa]


@dataclass(frozen=True)
class BoundInputs:
    """Graph quantities entering the tail bound."""

    n_clusters: int
    min_cluster_size: int
    rho: float  # smallest cluster spectral gap
    d_inf: float  # largest |D_ei| = sqrt(max W)

    def to_dict(self):
        return asdict(self)


def bound_inputs(g: EmpiricalGraph, p: Partition) -> BoundInputs:
    return BoundInputs(
        p.n_clusters,
        int(p.cluster_sizes().min()),
        float(cluster_spectral_gaps(g, p).min()),
        float(np.sqrt(g.max_weight)),
    )


@dataclass
class ExperimentSetup:
    graph: EmpiricalGraph
    partition: Partition
    x_bar: np.ndarray


def experiment_setup(cfg: ExperimentConfig) -> ExperimentSetup:
    g, p = sbm_graph(cfg.sizes, cfg.p_in, cfg.p_out, cfg.seed, w_in=cfg.w_in, w_out=cfg.w_out)
    x_bar = expand_signal(ClusteredSignal(p, tuple(cfg.values)))
    return ExperimentSetup(g, p, x_bar)


def best_certificate(g, p, training, K_grid, tol=1e-6):
    """``(K, L, kappa)`` with the smallest condition number over ``K_grid``.

    ``L`` is the largest certifiable constant for that ``K``. If no grid point
    reaches ``L > 3`` the largest ``L`` found is reported with ``kappa = inf``;
    if no ``L > 0`` is certifiable at all, ``L = 0``.
    """
    if not K_grid:
        return math.nan, math.nan, math.nan
    best = None
    fallback = None
    for K in K_grid:
        try:
            L = max_certifiable_L(g, p, training, K, tol)
        except NoFeasibleLError:
            return math.nan, 0.0, math.nan
        if L > 3:
            kappa = condition_number(K, L) if math.isfinite(L) else 0.0
            if best is None or kappa < best[2]:
                best = (K, L, kappa)
        elif fallback is None or L > fallback[1]:
            fallback = (K, L, math.inf)
    return best if best is not None else fallback


def _trial_block(cfg, setup, M, trial):
    g, p, x_bar = setup.graph, setup.partition, setup.x_bar
    training = sample_training_set(g, M, derive_seed(cfg.seed, 1, trial))
    K, L, kappa = best_certificate(g, p, training, cfg.K_grid)
    noise_seed = derive_seed(cfg.seed, 2, trial)
    out = []
    for sigma in cfg.sigmas:
        labels = sample_labels(x_bar, training, NoiseModel(sigma, noise_seed))
        for lam in cfg.lambdas:
            scfg = SolverConfig(lam, max_iters=cfg.max_iters, rel_tol=cfg.tol,
                                snapshot_every=cfg.max_iters)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = solve(g, labels, scfg)
            out.append(TrialRecord(
                float(sigma), int(M), float(lam), int(trial),
                estimation_error_tv(g, res.x, x_bar),
                node_norm(res.x - x_bar, np.arange(g.n_nodes)),
                int(res.iters), float(K), float(L), float(kappa),
            ))
    return out


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All trial records, sorted by ``(sigma, M, lambda, trial)``."""
    setup = experiment_setup(cfg)
    jobs = [(M, t) for M in cfg.train_sizes for t in range(cfg.trials)]
    if cfg.n_jobs == 1:
        blocks = [_trial_block(cfg, setup, M, t) for M, t in jobs]
    else:
        from joblib import Parallel, delayed

        blocks = Parallel(n_jobs=cfg.n_jobs)(delayed(_trial_block)(cfg, setup, M, t) for M, t in jobs)
    records = [r for b in blocks for r in b]
    records.sort(key=lambda r: (r.sigma, r.M, r.lam, r.trial))
    return records


def hypotheses_hold(K: float, L: float) -> bool:
    """Constants admissible for the tail bound: ``L > 4`` and ``1 < K < L - 2``."""
    return L > 4 and 1 < K < L - 2


def tv_error_tail_bound(
    stats: BoundInputs,
    M: int,
    K: float,
    L: float,
    sigma: float,
    eta: float,
    *,
    strict: bool = True,
    clip: bool = True,
) -> float:
    """Upper bound on ``P(||x_hat - x_bar||_TV >= eta)``::

        2 |F| exp(-|C| eta^2 / (6300 kappa^2 sigma^2))
          + 2 M exp(-M^2 rho^2 eta^2 / (900 kappa^2 sigma^2 ||D||_inf^2))

    with ``kappa = (K + 3)/(L - 3)`` and ``|C|`` the smallest cluster size.

    Parameters
    ----------
    strict : bool
        Raise :class:`HypothesisViolatedError` unless ``L > 4``,
        ``1 < K < L - 2``. With ``strict=False`` the formula is evaluated for
        any ``L > 3``; the result is then not a guarantee.
    clip : bool
        Clip the result to ``[0, 1]``.
    """
    if not eta > 0:
        raise NonPositiveEtaError(f"eta must be positive, got {eta}")
    if not sigma > 0:
        raise HypothesisViolatedError(f"sigma must be positive, got {sigma}")
    if strict:
        if not L > 4:
            raise HypothesisViolatedError(f"need L > 4, got L={L}")
        if not 1 < K < L - 2:
            raise HypothesisViolatedError(f"need 1 < K < L - 2, got K={K}, L={L}")
    kappa = condition_number(K, L)
    k2s2 = kappa**2 * sigma**2
    if math.isinf(eta):
        val = 0.0
    else:
        first = 2 * stats.n_clusters * math.exp(-stats.min_cluster_size * eta**2 / (6300 * k2s2))
        second = 2 * M * math.exp(-(M**2) * stats.rho**2 * eta**2 / (900 * k2s2 * stats.d_inf**2))
        val = first + second
    return min(1.0, max(0.0, val)) if clip else val


@dataclass
class BoundEvaluation:
    eta: np.ndarray
    empirical_freq: np.ndarray
    bound: np.ndarray
    n_trials: int
    hypotheses_ok: bool
    notes: list = field(default_factory=list)

    def margin(self) -> np.ndarray:
        """Three binomial standard deviations at the bound."""
        b = np.clip(self.bound, 0.0, 1.0)
        return 3.0 * np.sqrt(b * (1 - b) / self.n_trials)

    def violations(self) -> np.ndarray:
        return self.empirical_freq > self.bound + self.margin()


def evaluate_bound(tv_errors, eta_grid, stats: BoundInputs, M: int, K: float, L: float, sigma: float) -> BoundEvaluation:
    """Empirical tail frequencies of ``tv_errors`` against the tail bound.

    When ``(K, L)`` do not satisfy the bound's hypotheses the formula is still
    evaluated (``L > 3`` required) and the evaluation is flagged; with no usable
    ``kappa`` the bound is the trivial 1.
    """
    tv = np.asarray(tv_errors, dtype=float)
    eta = np.asarray(eta_grid, dtype=float)
    freq = np.array([np.mean(tv >= e) for e in eta])
    ok = hypotheses_hold(K, L) and sigma > 0
    notes = [f"|C_l| instantiated as the smallest cluster size ({stats.min_cluster_size})"]
    if not ok:
        notes.append(f"hypotheses L > 4, 1 < K < L - 2, sigma > 0 fail for K={K}, L={L}, sigma={sigma}")
    if L > 3 and sigma > 0 and math.isfinite(L):
        bound = np.array([tv_error_tail_bound(stats, M, K, L, sigma, e, strict=False) for e in eta])
    else:
        notes.append("no finite condition number; bound set to 1")
        bound = np.ones_like(eta)
    return BoundEvaluation(eta, freq, bound, len(tv), ok, notes)


def median_trend_ok(before, after, direction: str, n_sigma: float = 3.0) -> bool:
    """Compare two samples' medians with a binomial margin.

    For ``direction="non-increasing"`` the fraction of ``after`` exceeding
    ``median(before)`` must not exceed ``1/2 + n_sigma * 0.5 / sqrt(n)``;
    ``"non-decreasing"`` mirrors this.
    """
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    ref = np.median(before)
    if direction == "non-increasing":
        frac = np.mean(after > ref)
    elif direction == "non-decreasing":
        frac = np.mean(after < ref)
    else:
        raise ValueError(direction)
    return frac <= 0.5 + n_sigma * 0.5 / np.sqrt(len(after))


def projection_split_bound(g: EmpiricalGraph, u, v, pinv=None) -> tuple[float, float]:
    """Both sides of ``<u, v> <= mean(v) sum(u) + ||pinv(D)^T v||_inf ||u||_TV``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if pinv is None:
        pinv = incidence_pseudoinverse(g)
    lhs = float(u @ v)
    rhs = float(v.sum() * u.sum() / g.n_nodes + np.max(np.abs(pinv.T @ v)) * tv_norm(g, u))
    return lhs, rhs


def _cluster_terms(g, p, v, pinvs=None):
    means, sups = [], []
    for ci, c in enumerate(p.clusters):
        means.append(abs(v[c].mean()))
        if len(c) == 1:
            continue
        if pinvs is None:
            sub, _, _ = induced_subgraph(g, c)
            pv = incidence_pseudoinverse(sub)
        else:
            pv = pinvs[ci]
        sups.append(np.max(np.abs(pv.T @ v[c])))
    return max(means), (max(sups) if sups else 0.0)


def cluster_pinvs(g: EmpiricalGraph, p: Partition) -> list:
    out = []
    for c in p.clusters:
        out.append(None if len(c) == 1 else incidence_pseudoinverse(induced_subgraph(g, c)[0]))
    return out


def cluster_split_bound(g: EmpiricalGraph, p: Partition, nodes, u, v, pinvs=None) -> tuple[float, float]:
    """Both sides of the per-cluster noise-term inequality, restricted to ``nodes``::

        sum_{i in nodes} v_i u_i
            <= max_l |mean_{C_l} v| * sum_{j in nodes} |u_j|
               + max_l ||pinv(D_{C_l})^T v_{C_l}||_inf * ||u||_TV

    This form can fail when ``nodes`` is a strict subset of the graph (for
    instance, a nearly constant ``u`` and ``v`` concentrated on ``nodes``); see
    :func:`cluster_split_bound_full` for the version that always holds.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nodes = np.asarray(nodes, dtype=np.intp)
    mean_term, sup_term = _cluster_terms(g, p, v, pinvs)
    lhs = float(v[nodes] @ u[nodes])
    rhs = float(mean_term * np.abs(u[nodes]).sum() + sup_term * tv_norm(g, u))
    return lhs, rhs


def cluster_split_bound_full(g: EmpiricalGraph, p: Partition, u, v, pinvs=None) -> tuple[float, float]:
    """The per-cluster inequality with both node sums over all nodes."""
    return cluster_split_bound(g, p, np.arange(g.n_nodes), u, v, pinvs)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def results_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in records:
        w.writerow([_fmt(v) for v in r.row()])
    return buf.getvalue()


def emit_results(records, path, bound_evals=None, bound_path=None) -> None:
    """Write trial records as CSV (17 significant digits, round-trip exact).

    If ``bound_evals`` is given it is written to ``bound_path`` with
    :func:`emit_bound`. Nothing is written when ``records`` is empty.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    if bound_evals is not None and bound_path is None:
        raise ValueError("bound_path is required with bound_evals")
    atomic_write_text(path, results_csv(records))
    if bound_evals is not None:
        emit_bound(bound_evals, bound_path)


def emit_bound(evaluation: BoundEvaluation, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUND_HEADER)
    for e, f, b in zip(evaluation.eta, evaluation.empirical_freq, evaluation.bound):
        w.writerow([_fmt(e), _fmt(f), _fmt(b)])
    atomic_write_text(path, buf.getvalue())


def read_results(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(RESULTS_HEADER)}")
        out = []
        for n, row in enumerate(reader, start=2):
            if len(row) != len(RESULTS_HEADER):
                raise ValueError(f"{path}: line {n} has {len(row)} fields")
            s, M, lam, t, tv, ne, it, K, L, kap = row
            out.append(TrialRecord(float(s), int(M), float(lam), int(t), float(tv), float(ne),
                                   int(it), float(K), float(L), float(kap)))
    return out
