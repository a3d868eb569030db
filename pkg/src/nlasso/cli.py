"""Command line interface: ``nlasso {gen,solve,certify,experiment,report}``.

Exit codes: 0 success, 1 input error, 2 usage error, 3 solver did not
converge, 4 training set refuted.
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings

import numpy as np

from . import __version__
from . import io as nio
from .errors import ConfigError, InputFileError, MaxItersReached, NLassoError, NoFeasibleLError
from .experiments import (
    BoundInputs,
    ExperimentConfig,
    bound_inputs,
    derive_seed,
    emit_bound,
    emit_results,
    evaluate_bound,
    experiment_setup,
    load_config,
    read_results,
    run_experiment,
    sbm_graph,
)
from .flows import ResolvingCertificate, check_resolving, max_certifiable_L, ncc_sampled_check
from .signal import ClusteredSignal, NoiseModel, expand_signal, sample_labels, sample_training_set
from .solver import SolverConfig, solve

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_REFUTED = 0, 1, 2, 3, 4


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be non-negative and finite, got {text}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return v


def _probability(text):
    v = _nonneg_float(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _float_list(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        out = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if min(out) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return out


def eta_grid(text) -> np.ndarray:
    """Parse ``a:b:step`` into ``a, a+step, ...`` up to ``b`` inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers in a:b:step, got {text!r}") from None
    if not step > 0:
        raise argparse.ArgumentTypeError("step must be positive")
    if not 0 < a <= b or not math.isfinite(b):
        raise argparse.ArgumentTypeError("need 0 < a <= b < inf")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an SBM graph, partition, signal and labels")
    gen.add_argument("--model", choices=["sbm"], required=True)
    gen.add_argument("--clusters", type=_positive_int, required=True)
    gen.add_argument("--sizes", type=_int_list, required=True, help="n1,n2,...")
    gen.add_argument("--pin", type=_probability, required=True)
    gen.add_argument("--pout", type=_probability, required=True)
    gen.add_argument("--win", type=_positive_float, default=1.0, help="within-cluster weight")
    gen.add_argument("--wout", type=_positive_float, default=1.0, help="between-cluster weight")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True, help="graph JSON")
    gen.add_argument("--partition", help="partition JSON")
    gen.add_argument("--signal", type=_float_list, help="cluster values a1,a2,...")
    gen.add_argument("--signal-out", help="expanded signal JSON (default: <out>.signal.json)")
    gen.add_argument("--labels", help="label JSON; needs --signal and --train-size")
    gen.add_argument("--train-size", type=_positive_int)
    gen.add_argument("--sigma", type=_nonneg_float, default=0.0)

    sol = sub.add_parser("solve", help="solve the network Lasso")
    sol.add_argument("--graph", required=True)
    sol.add_argument("--labels", required=True)
    sol.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    sol.add_argument("--max-iters", type=_positive_int, default=100_000)
    sol.add_argument("--tol", type=_positive_float, default=1e-7)
    sol.add_argument("--snapshot-every", type=_positive_int, default=100)
    sol.add_argument("--out", required=True)

    cer = sub.add_parser("certify", help="certify a training set as resolving")
    cer.add_argument("--graph", required=True)
    cer.add_argument("--partition", required=True)
    cer.add_argument("--train", required=True, help="JSON with a 'training_set' list")
    cer.add_argument("--K", type=_positive_float, required=True)
    which = cer.add_mutually_exclusive_group(required=True)
    which.add_argument("--L", type=_positive_float)
    which.add_argument("--max-L", action="store_true", help="search the largest certifiable L")
    cer.add_argument("--tol", type=_positive_float, default=1e-6, help="accuracy of --max-L")
    cer.add_argument("--method", choices=["auto", "enumerate", "cut"], default="auto")
    cer.add_argument("--ncc-samples", type=_positive_int)
    cer.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    cer.add_argument("--out", required=True)

    exp = sub.add_parser("experiment", help="run a Monte-Carlo experiment")
    exp.add_argument("--config", required=True, help="TOML or JSON")
    exp.add_argument("--out", required=True, help="results CSV")
    exp.add_argument("--n-jobs", type=int, help="override the config's n_jobs")

    rep = sub.add_parser("report", help="tail frequencies and bound for one experiment cell")
    rep.add_argument("--results", required=True)
    rep.add_argument("--eta-grid", type=eta_grid, required=True, help="a:b:step")
    rep.add_argument("--out", required=True, help="bound CSV")
    rep.add_argument("--config", help="experiment config (default: the results' metadata file)")
    rep.add_argument("--sigma", type=float)
    rep.add_argument("--M", type=int)
    rep.add_argument("--lambda", dest="lam", type=float)
    return parser


def _meta_path(path):
    return f"{path}.meta.json"


def cmd_gen(args) -> int:
    if args.clusters != len(args.sizes):
        raise _Usage(f"--clusters {args.clusters} does not match {len(args.sizes)} sizes")
    if args.signal is not None and len(args.signal) != args.clusters:
        raise _Usage(f"--signal needs {args.clusters} values")
    if args.labels and (args.signal is None or args.train_size is None):
        raise _Usage("--labels needs --signal and --train-size")
    if args.train_size is not None and args.train_size > sum(args.sizes):
        raise _Usage(f"--train-size exceeds the {sum(args.sizes)} nodes")
    g, p = sbm_graph(args.sizes, args.pin, args.pout, args.seed, w_in=args.win, w_out=args.wout)
    meta = {"generator": "sbm", "generator_seed": args.seed}
    nio.write_graph(args.out, g, **meta)
    if args.partition:
        nio.write_partition(args.partition, p, **meta)
    if args.signal is not None:
        x_bar = expand_signal(ClusteredSignal(p, tuple(args.signal)))
        nio.write_signal(args.signal_out or f"{args.out}.signal.json", x_bar, **meta)
        if args.labels:
            train = sample_training_set(g, args.train_size, derive_seed(args.seed, 1, 0))
            noise_seed = derive_seed(args.seed, 2, 0)
            labels = sample_labels(x_bar, train, NoiseModel(args.sigma, noise_seed))
            nio.write_labels(args.labels, labels, args.sigma, noise_seed, **meta)
    return EXIT_OK


def cmd_solve(args) -> int:
    g = nio.read_graph(args.graph)
    labels = nio.read_labels(args.labels, g.n_nodes)
    cfg = SolverConfig(args.lam, max_iters=args.max_iters, rel_tol=args.tol, snapshot_every=args.snapshot_every)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxItersReached)
        res = solve(g, labels, cfg)
    nio.write_json(
        args.out,
        res.to_dict(),
        **{"lambda": args.lam, "tol": args.tol, "max_iters": args.max_iters, "converged": res.converged},
    )
    if not res.converged:
        print(f"nlasso: not converged after {res.iters} iterations; result written", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_certify(args) -> int:
    g = nio.read_graph(args.graph)
    p = nio.read_partition(args.partition, g)
    train = nio.read_training_set(args.train, g.n_nodes)
    meta = {"method": args.method}
    if args.max_L:
        meta["tol"] = args.tol
        try:
            L = max_certifiable_L(g, p, train, args.K, args.tol)
        except NoFeasibleLError as exc:
            cert = ResolvingCertificate(args.K, 0.0, "refuted", 0, None, "cut")
            doc = cert.to_dict()
            doc["reason"] = str(exc)
            nio.write_json(args.out, doc, **meta)
            print(f"nlasso: refuted: {exc}", file=sys.stderr)
            return EXIT_REFUTED
        if math.isinf(L):
            cert = ResolvingCertificate(args.K, math.inf, "certified", 0, None, "trivial")
        else:
            cert = check_resolving(g, p, train, args.K, L, method=args.method, seed=args.seed)
    else:
        cert = check_resolving(g, p, train, args.K, args.L, method=args.method, seed=args.seed)
    doc = cert.to_dict()
    if args.ncc_samples:
        if math.isinf(cert.L):
            raise _Usage("--ncc-samples needs a finite L")
        doc["ncc"] = ncc_sampled_check(g, p, train, args.K, cert.L, args.ncc_samples, args.seed).to_dict()
    nio.write_json(args.out, doc, **meta)
    return EXIT_REFUTED if cert.status == "refuted" else EXIT_OK


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.n_jobs is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "n_jobs": args.n_jobs})
    records = run_experiment(cfg)
    setup = experiment_setup(cfg)
    emit_results(records, args.out)
    meta = {"config": {k: v for k, v in cfg.to_dict().items() if k != "n_jobs"},
            "bound_inputs": bound_inputs(setup.graph, setup.partition).to_dict()}
    nio.write_json(_meta_path(args.out), {}, **meta)
    return EXIT_OK


def _report_stats(args) -> BoundInputs:
    if args.config:
        setup = experiment_setup(load_config(args.config))
        return bound_inputs(setup.graph, setup.partition)
    doc = nio.read_json(_meta_path(args.results))
    try:
        return BoundInputs(**doc["meta"]["bound_inputs"])
    except (KeyError, TypeError):
        raise InputFileError(f"{_meta_path(args.results)}: missing field 'meta.bound_inputs'") from None


def cmd_report(args) -> int:
    try:
        records = read_results(args.results)
    except OSError as exc:
        raise InputFileError(f"{args.results}: cannot read ({exc.strerror})") from None
    except ValueError as exc:
        raise InputFileError(str(exc)) from None
    stats = _report_stats(args)
    for name in ("sigma", "M", "lam"):
        want = getattr(args, name)
        if want is not None:
            records = [r for r in records if getattr(r, name) == want]
    cells = sorted({(r.sigma, r.M, r.lam) for r in records})
    if len(cells) != 1:
        shown = ", ".join(f"sigma={s} M={m} lambda={l}" for s, m, l in cells[:10]) or "none"
        raise _Usage(f"filters must select exactly one cell (sigma, M, lambda); matched: {shown}")
    sigma, M, lam = cells[0]
    # worst certificate in the cell: the bound for the largest kappa dominates every trial's bound
    kappas = np.array([r.kappa for r in records])
    if np.all(np.isfinite(kappas)):
        worst = records[int(np.argmax(kappas))]
        K, L = worst.K, worst.L
    else:
        K, L = math.nan, math.nan
    ev = evaluate_bound([r.tv_error for r in records], args.eta_grid, stats, M, K, L, sigma)
    emit_bound(ev, args.out)
    nio.write_json(
        _meta_path(args.out),
        {},
        cell={"sigma": sigma, "M": M, "lambda": lam},
        trials=len(records),
        K=K,
        L=L,
        hypotheses_ok=ev.hypotheses_ok,
        notes=ev.notes,
        bound_inputs=stats.to_dict(),
    )
    return EXIT_OK


class _Usage(Exception):
    pass


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "certify": cmd_certify,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except _Usage as exc:
        print(f"nlasso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, NLassoError, OSError) as exc:
        print(f"nlasso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
