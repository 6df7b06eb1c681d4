"""Operator command line: validate workflows, chat against one, simulate
evaluation datasets, and run evaluations.

Exit codes: 0 success, 1 domain error, 2 environment/I-O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import evalharness, formats, report
from .engine import ActionSink, TranscriptWriter, new_session, run_turn
from .graph import map_issues
from .providers import (
    HashingEmbedder,
    MockChatProvider,
    ProviderError,
    ProviderSet,
    RemoteChatProvider,
    RemoteEmbedder,
)
from .router import DEFAULT_THRESHOLD, build_store

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_ENV = 2


def _providers(args) -> ProviderSet:
    if args.provider == "remote":
        return ProviderSet(
            chat=RemoteChatProvider.from_env(),
            embedder=RemoteEmbedder.from_env(),
        )
    return ProviderSet(
        chat=MockChatProvider(seed=args.seed),
        embedder=HashingEmbedder(dimension=32, seed=args.seed),
    )


def _eval_embedder(args):
    if args.provider == "remote":
        return RemoteEmbedder.from_env()
    return HashingEmbedder(dimension=32, seed=args.seed, normalize=True)


def cmd_validate(args) -> int:
    try:
        source = Path(args.workflow).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {args.workflow}: {exc}", file=sys.stderr)
        return EXIT_ENV
    result = formats.parse_workflow(source)
    for diag in result.diagnostics:
        print(str(diag))
    errors = len(result.errors())
    if result.ok:
        issues = map_issues(result.document.name, result.document.nodes, result.document.edges)
        for issue in issues:
            print(f"error: map: {issue}")
        errors += len(issues)
    print(f"{errors} errors")
    return EXIT_OK if errors == 0 else EXIT_DOMAIN


def cmd_chat(args) -> int:
    try:
        nav = formats.load_map(args.workflow)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    providers = _providers(args)
    store = None
    if args.mode == "optimized":
        try:
            store = build_store(nav, providers.embedder)
        except ProviderError as exc:
            print(f"error: cannot build vector store: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
    state = new_session(nav, mode=args.mode, threshold=args.threshold)
    sink = ActionSink()
    transcript = None
    out_file = None
    if args.out:
        out_file = open(args.out, "w", encoding="utf-8")
        transcript = TranscriptWriter(out_file)
    try:
        for line in sys.stdin:
            user_text = line.rstrip("\n")
            if not user_text:
                continue
            try:
                result, state = run_turn(state, user_text, providers, store=store, sink=sink)
            except ProviderError as exc:
                print(f"[provider error: {exc}]", file=sys.stderr)
                continue
            print(result.agent_text)
            # Node annotations go to stderr so piped transcripts stay clean.
            print(
                f"[node={result.identified_node} source={result.identification_source}"
                f" actions={[a.name for a in result.actions_fired]}]",
                file=sys.stderr,
            )
            if transcript is not None:
                transcript.write_turn(state, user_text, result)
            if nav.nodes[result.identified_node].kind in ("end", "transfer"):
                break
    finally:
        if out_file is not None:
            out_file.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        nav = formats.load_map(args.workflow)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.turns_min > args.turns_max:
        print("error: --turns-min must be <= --turns-max", file=sys.stderr)
        return EXIT_DOMAIN
    providers = _providers(args)
    records, manifest = evalharness.simulate_dataset(
        nav,
        args.persona,
        args.count,
        args.seed,
        providers,
        turns_min=args.turns_min,
        turns_max=args.turns_max,
    )
    if args.count > 0 and not records:
        print("error: provider exhaustion, no records produced", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        evalharness.write_dataset(records, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_ENV
    print(f"count={manifest.count} skipped={len(manifest.skipped)} seed={manifest.seed}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        nav = formats.load_map(args.workflow)
        dataset = evalharness.read_dataset(args.dataset)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if not dataset:
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_DOMAIN
    providers = _providers(args)
    store = None
    if "optimized" in args.methods:
        try:
            store = build_store(nav, providers.embedder)
        except ProviderError as exc:
            print(f"error: cannot build vector store: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
    result = evalharness.run_eval(
        dataset,
        args.methods,
        providers,
        nav,
        store,
        args.seed,
        eval_embedder=_eval_embedder(args),
        threshold=args.threshold,
    )
    text = report.report_to_json(result)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_ENV
    print(report.format_metrics_table([report.metrics_row(s) for s in result.summaries]))
    print(report.format_ttest_table([report.ttest_row(t) for t in result.tests]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_mode=True):
        p.add_argument("--workflow", required=True, help="workflow JSON file")
        if needs_mode:
            p.add_argument("--mode", choices=("naive", "basic", "optimized"), default="basic")
        p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        p.add_argument("--provider", choices=("mock", "remote"), default="mock")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="check a workflow file and its map structure")
    p.add_argument("workflow")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("chat", help="interactive chat over a workflow")
    common(p)
    p.add_argument("--out", default=None, help="transcript JSONL path")
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("simulate", help="simulate an evaluation dataset")
    common(p, needs_mode=False)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--turns-min", type=int, default=evalharness.TURNS_MIN)
    p.add_argument("--turns-max", type=int, default=evalharness.TURNS_MAX)
    p.add_argument("--persona", default="a polite caller with a routine request")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="score a dataset and run the paired tests")
    common(p, needs_mode=False)
    p.add_argument("--dataset", required=True)
    p.add_argument(
        "--methods",
        nargs="+",
        choices=("naive", "basic", "optimized"),
        default=["naive", "basic", "optimized"],
    )
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    sys.exit(main())
