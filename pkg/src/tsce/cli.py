"""Command-line front end: ``tsce <subcommand> ...``.

Every failure prints one line ``error: <CODE>: <message>`` to stderr and
exits with the status listed in :data:`tsce.errors.EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .coinrunner import BEHAVIOURS, GameConfig, read_rollouts, render_state, simulate, write_rollouts
from .data import HansGeneratorConfig, PanelDataset, generate_hans
from .discovery import DiscoveryConfig, discover
from .engine import explain, parse_question
from .errors import EXIT_CODES, DataError, TSCEError
from .graph import ContextSet, TemporalCausalGraph
from .tree import ExplanationTree, SelectionConfig
from .treeops import leave_n_out, mask_graph, mask_tree, path_channel
from .verbalize import RESOURCES, Lexicon, render_text

CONTEXTS_ENV = "TSCE_CONTEXTS"
OUTPUT_VERSION = 1


def _resolve(path: str, suffix: str) -> Path:
    if path.startswith("builtin:"):
        return RESOURCES / f"{path.split(':', 1)[1]}{suffix}"
    return Path(path)


def load_contexts(path, require_graphs=True) -> ContextSet:
    if path is None:
        path = os.environ.get(CONTEXTS_ENV)
    if path is None:
        raise TSCEError("no contexts given; pass --contexts or set " + CONTEXTS_ENV)
    p = _resolve(path, "_contexts.json")
    try:
        return ContextSet.load(p, require_graphs=require_graphs)
    except json.JSONDecodeError as exc:
        raise DataError(f"{p}: {exc}") from None


def load_data(path):
    if path.endswith(".jsonl"):
        return read_rollouts(path)
    return PanelDataset.from_csv(path)


def _write(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_hans(args):
    cfg = HansGeneratorConfig(n=args.n, T=args.t, noise_scale=args.noise, seed=args.seed)
    cfg.validate()
    data = generate_hans(cfg)
    if args.out in (None, "-"):
        raise TSCEError("gen-hans needs --out")
    data.to_csv(args.out)


def cmd_simulate(args):
    config = GameConfig(width=args.width, height=args.height)
    rollouts = simulate(args.agent, args.rollouts, args.epsilon, args.seed, config, record_states=args.render)
    if args.out in (None, "-"):
        raise TSCEError("simulate needs --out")
    write_rollouts(args.out, rollouts)
    if args.render:
        for r in rollouts.values():
            print(f"rollout {r.id} ({r.agent}, seed {r.seed})")
            for s in r.states:
                print(render_state(s))
                print()


def cmd_discover(args):
    cs = load_contexts(args.contexts, require_graphs=False)
    rollouts = read_rollouts(args.input)
    cfg = DiscoveryConfig(
        method=args.method,
        alpha_level=args.alpha,
        margin=args.margin,
        min_samples=args.min_samples,
        noise_sd=args.noise_sd,
        cv_rule=args.cv_rule,
        seed=args.seed,
    )
    graphs, report = discover(rollouts, cs, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, g in graphs.items():
        if g is not None:
            g.save(out / f"{name}.json")
    cs.with_graphs(graphs).save(out / "contexts.json")
    report["version"] = OUTPUT_VERSION
    (out / "report.json").write_text(_dump(report))
    for name, g in graphs.items():
        edges = "no graph" if g is None else f"{len(g.edges)} edges"
        print(f"{name}: {edges}", file=sys.stderr)


def cmd_explain(args):
    cs = load_contexts(args.contexts)
    data = load_data(args.data)
    q = parse_question(args.question)
    cfg = SelectionConfig.parse(args.select, K=args.depth, mostly=not args.no_mostly)
    tree = explain(q, cs, data, cfg, mode=args.mode, live=args.live)
    _write(tree.to_json(), args.out)


def _load_tree_or_graph(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None
    if "nodes" in data:
        return ExplanationTree.from_dict(data)
    return TemporalCausalGraph.from_dict(data, max_lag=None)


def cmd_treeop(args):
    obj = _load_tree_or_graph(args.input)
    if args.op == "mask":
        names = [v for v in args.vars.split(",") if v]
        out = mask_graph(obj, names) if isinstance(obj, TemporalCausalGraph) else mask_tree(obj, names)
    elif not isinstance(obj, ExplanationTree):
        raise TSCEError(f"treeop {args.op} needs an explanation tree")
    elif args.op == "path":
        var, _, t = args.target.partition("@")
        try:
            target = (var, int(t))
        except ValueError:
            raise TSCEError(f"target must look like VAR@T, got {args.target!r}") from None
        out = path_channel(obj, target, args.width)
    else:
        out = leave_n_out(obj, args.gap, rewrite=args.rewrite)
    if isinstance(out, TemporalCausalGraph):
        d = out.to_dict()
        d["version"] = OUTPUT_VERSION
        _write(_dump(d), args.out)
    else:
        _write(out.to_json(), args.out)


def cmd_verbalize(args):
    tree = ExplanationTree.load(args.input)
    lex = Lexicon.load(args.lexicon)
    skip = [v for v in (args.skip or "").split(",") if v]
    text = render_text(tree, lex, coefficients=args.coefficients, skip_vars=skip, sequences=not args.no_sequences)
    _write(text, args.out)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsce", description="Temporal causal explanations for panel data and rollouts.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-hans", help="generate the synthetic Hans panel")
    s.add_argument("--n", type=int, default=10_000, help="individuals")
    s.add_argument("--t", type=int, default=50, help="time steps")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=0.03, help="noise std as a fraction of the structural mean")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_hans)

    s = sub.add_parser("simulate", help="record CoinRunner rollouts")
    s.add_argument("--agent", choices=BEHAVIOURS, default="killer")
    s.add_argument("--rollouts", type=int, default=500)
    s.add_argument("--epsilon", type=float, default=0.02)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--width", type=int, default=10)
    s.add_argument("--height", type=int, default=10)
    s.add_argument("--out", required=True)
    s.add_argument("--render", action="store_true", help="print every state as ASCII")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("discover", help="learn one averaged graph per context")
    s.add_argument("--method", choices=("granger", "granger_var", "lasso"), default="granger_var")
    s.add_argument("--contexts", help=f"context file or builtin:killer (default: ${CONTEXTS_ENV})")
    s.add_argument("--in", dest="input", required=True, help="rollout JSONL")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--alpha", type=float, default=0.05, help="Granger significance level")
    s.add_argument("--margin", type=int, default=0, help="extra frames around each context run")
    s.add_argument("--min-samples", type=int, default=10)
    s.add_argument("--noise-sd", type=float, default=0.01, help="noise added to binary columns")
    s.add_argument("--cv-rule", choices=("min", "1se"), default="1se")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_discover)

    s = sub.add_parser("explain", help="build an explanation tree")
    s.add_argument("--data", required=True, help="panel CSV or rollout JSONL")
    s.add_argument("--contexts", help=f"context file or builtin:hans (default: ${CONTEXTS_ENV})")
    s.add_argument("--question", required=True, help='e.g. "Mobility < mean @ t=49 ind=17"')
    s.add_argument("--mode", default="retro", choices=("retro", "antic", "retrospective", "anticipative"))
    s.add_argument("--depth", type=int, default=2)
    s.add_argument("--select", default="all", help="all | topn:N | theta:X | theta:X,topn:N")
    s.add_argument("--no-mostly", action="store_true", help="do not flag the dominant explainer")
    s.add_argument("--live", action="store_true", help="ignore data after the question's time step")
    s.add_argument("--out")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("treeop", help="transform an explanation tree")
    ops = s.add_subparsers(dest="op", required=True)
    o = ops.add_parser("mask", help="remove intermediate variables")
    o.add_argument("--vars", required=True, help="comma-separated variable names")
    o = ops.add_parser("path", help="keep one root-to-node path")
    o.add_argument("--target", required=True, help="VAR@T")
    o.add_argument("--width", type=int, default=0)
    o = ops.add_parser("leave-n-out", help="merge briefly interrupted sequences")
    o.add_argument("--gap", type=int, default=1)
    o.add_argument("--rewrite", action="store_true", help="also overwrite the absorbed indicators")
    for o in ops.choices.values():
        o.add_argument("--in", dest="input", required=True)
        o.add_argument("--out")
    s.set_defaults(func=cmd_treeop)

    s = sub.add_parser("verbalize", help="render a tree as sentences")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--lexicon", default="builtin:hans", help="TOML lexicon or builtin:hans|coinrunner")
    s.add_argument("--coefficients", action="store_true", help="append edge coefficients")
    s.add_argument("--no-sequences", action="store_true", help="one sentence per node")
    s.add_argument("--skip", help="comma-separated variables to leave unexplained")
    s.add_argument("--out")
    s.set_defaults(func=cmd_verbalize)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "method", None) == "granger":
        args.method = "granger_var"
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TSCEError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.code, 1)
    except OSError as exc:
        print(f"error: INVALID_INPUT: {exc}", file=sys.stderr)
        return EXIT_CODES["INVALID_INPUT"]
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
