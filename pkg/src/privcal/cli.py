"""Command-line entry point: ``privcal {generate,calibrate,sweep,verify}``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from . import core
from .core import BinningScheme
from .golden import DEFAULT_ITERATIONS, DEFAULT_T_MAX, DEFAULT_T_MIN, SearchConfig
from .harness import (
    ALL_METHODS,
    DESK_GRIDS,
    PAPER_GRIDS,
    DEFAULT_TRIALS,
    PAPER_TRIALS,
    Factor,
    SplitConfig,
    SweepConfig,
    SynthConfig,
    generate_synthetic,
    load_logits,
    rows_to_csv,
    run_sweep,
    run_trial,
    save_logits,
)
from .recalibrators import Accounting, BinRemapModel, Method, RecalConfig
from .verify import run_checks

log = logging.getLogger("privcal")

SEED_ENV = "PRIVCAL_SEED"


def parse_epsilon(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"epsilon must be positive or 'inf', got {text}")
    return value


def default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def _method(text: str) -> Method:
    return Method(text.lower())


def _add_data_args(p):
    p.add_argument("--input", help="logit CSV (label,logit_0,...); synthetic s=2 data when omitted")
    p.add_argument("--bins", type=int, default=core.DEFAULT_BINS, help="equal-width ECE bins (default 15)")
    p.add_argument("--k", type=int, default=DEFAULT_ITERATIONS, help="golden-section iterations K (default 5)")
    p.add_argument("--tmin", type=float, default=DEFAULT_T_MIN, help="lower temperature bound (default 0.5)")
    p.add_argument("--tmax", type=float, default=DEFAULT_T_MAX, help="upper temperature bound (default 3.0)")
    p.add_argument("--accounting", choices=[a.value for a in Accounting], default=Accounting.WORST_CASE.value,
                   help="epsilon split across golden-section queries (default worstcase)")
    p.add_argument("--seed", type=int, default=default_seed(), help=f"master seed (default ${SEED_ENV} or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privcal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic miscalibrated logit file")
    g.add_argument("--m", type=int, default=10, help="number of classes")
    g.add_argument("--n", type=int, default=60000, help="number of samples")
    g.add_argument("--spread", type=float, default=2.0, help="std of the true logits")
    g.add_argument("--scale", type=float, default=2.0, help="miscalibration factor s (observed = s * true)")
    g.add_argument("--seed", type=int, default=default_seed())
    g.add_argument("--out", required=True)

    c = sub.add_parser("calibrate", help="one split + recalibration + held-out ECE")
    c.add_argument("--method", type=_method, default=Method.ACC_T,
                   help="none, one_source, hist_bin, nll_t, ece_t or acc_t (default acc_t)")
    c.add_argument("--inner", type=_method, default=Method.ECE_T, help="method used by one_source (default ece_t)")
    c.add_argument("--epsilon", type=parse_epsilon, default=1.0, help="per-source epsilon, number or 'inf'")
    c.add_argument("--sources", type=int, default=100)
    c.add_argument("--samples", type=int, default=50)
    _add_data_args(c)

    s = sub.add_parser("sweep", help="vary one factor, many trials per cell, CSV out")
    s.add_argument("--factor", choices=[f.value for f in Factor], default=Factor.EPSILON.value)
    s.add_argument("--grid", help="comma-separated values (default: desk-scale grid for the factor)")
    s.add_argument("--paper-grids", choices=sorted(PAPER_GRIDS), help="use the full published grid and fixed values")
    s.add_argument("--trials", type=int, help=f"trials per cell (default {DEFAULT_TRIALS}; {PAPER_TRIALS} with --paper-grids)")
    s.add_argument("--methods", default=",".join(m.value for m in ALL_METHODS))
    s.add_argument("--epsilon", type=parse_epsilon, default=1.0, help="fixed epsilon when not swept")
    s.add_argument("--sources", type=int, default=100, help="fixed source count when not swept")
    s.add_argument("--samples", type=int, default=50, help="fixed samples per source when not swept")
    s.add_argument("--out", help="results CSV path (stdout when omitted)")
    _add_data_args(s)

    v = sub.add_parser("verify", help="Laplace statistics and unimodality scans")
    v.add_argument("--seed", type=int, default=default_seed())
    return parser


def _load(args):
    if args.input:
        return load_logits(args.input)
    return generate_synthetic(SynthConfig(seed=args.seed))


def _search(args) -> SearchConfig:
    return SearchConfig(t_min=args.tmin, t_max=args.tmax, iterations=args.k)


def cmd_generate(args) -> int:
    cfg = SynthConfig(m=args.m, n=args.n, logit_spread=args.spread, miscal_scale=args.scale, seed=args.seed)
    save_logits(generate_synthetic(cfg), args.out)
    print(f"wrote {cfg.n} samples x {cfg.m} classes to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    data = _load(args)
    scheme = BinningScheme(args.bins)
    cfg = RecalConfig(method=args.method, epsilon=args.epsilon, search=_search(args), scheme=scheme,
                      accounting=Accounting(args.accounting), inner=args.inner)
    result = run_trial(data, cfg, SplitConfig(args.sources, args.samples), args.seed)
    if result.temperature is not None:
        print(f"temperature\t{result.temperature!r}")
    elif isinstance(result.model, BinRemapModel):
        remap = ",".join("keep" if not ok else f"{v:.6f}" for v, ok in zip(result.model.remap, result.model.valid))
        print(f"remap\t{remap}")
    print(f"test_ece\t{result.ece_test!r}")
    print(f"epsilon_spent\t{max(result.epsilon_spent)!r}")
    if result.overdrawn:
        print("warning\tledger overdrawn (paper-literal accounting)")
    return 0


def cmd_sweep(args) -> int:
    factor = Factor(args.factor)
    split = SplitConfig(args.sources, args.samples)
    epsilon = args.epsilon
    trials = args.trials
    if args.paper_grids:
        grid, split, epsilon = PAPER_GRIDS[args.paper_grids][factor]
        trials = trials or PAPER_TRIALS
    else:
        grid = DESK_GRIDS[factor]
    if args.grid:
        grid = [parse_epsilon(x) if factor is Factor.EPSILON else int(x) for x in args.grid.split(",")]
    cfg = SweepConfig(
        factor=factor,
        grid=tuple(grid),
        trials=trials or DEFAULT_TRIALS,
        methods=tuple(_method(m) for m in args.methods.split(",")),
        master_seed=args.seed,
        split=split,
        epsilon=epsilon,
        scheme=BinningScheme(args.bins),
        search=_search(args),
        accounting=Accounting(args.accounting),
    )
    data = _load(args)
    rows = run_sweep(cfg, data, progress=lambda r: log.info("%s %s=%s median=%.4f",
                                                             r["method"], r["factor"], r["value"], r["ece_median"]))
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    results = run_checks(seed=args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"generate": cmd_generate, "calibrate": cmd_calibrate, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, RuntimeError) as exc:
        print(f"privcal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
