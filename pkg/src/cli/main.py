#!/usr/bin/env python3
"""
thoughtrec CLI

Thought-pattern guided multi-agent recommendation.

Usage:
    thoughtrec ingest ...
    thoughtrec genqueries ...
    thoughtrec ask ...
    thoughtrec evaluate ...
    thoughtrec patterns list|show|remove-scenario ...
    thoughtrec distill ...
    thoughtrec report ...
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..errors import ConfigError, TairaError

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE = 2

STRATEGY_CHOICES = ["taira", "react", "reflexion", "plan-solve", "zero-shot"]
ABLATION_CHOICES = ["T", "H", "E", "A"]


def create_parser() -> argparse.ArgumentParser:
    """Create argument parser."""
    parser = argparse.ArgumentParser(
        prog="thoughtrec",
        description="Thought-pattern guided multi-agent interactive recommendation",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )

    parser.add_argument(
        "--version", "-V",
        action="version",
        version="%(prog)s 0.1.0"
    )
    parser.add_argument(
        "--config", "-c",
        help="YAML config file (default: $TAIRA_CONFIG, else built-in defaults)"
    )
    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Debug logging"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # ingest subcommand
    ingest_parser = subparsers.add_parser(
        "ingest",
        help="Ingest a catalog JSONL file into the catalog store"
    )
    ingest_parser.add_argument(
        "--catalog",
        required=True,
        help="Catalog JSONL (id, title, description, attributes)"
    )
    ingest_parser.add_argument(
        "--histories",
        help="User histories JSONL (user_id, interactions)"
    )
    ingest_parser.add_argument(
        "--usage-notes",
        help="JSON object mapping attribute -> usage note"
    )
    ingest_parser.add_argument(
        "--store",
        help="Catalog store directory (default: stores.catalog_dir)"
    )

    # genqueries subcommand
    gen_parser = subparsers.add_parser(
        "genqueries",
        help="Generate a query suite from user histories"
    )
    gen_parser.add_argument(
        "--difficulty",
        choices=["easy", "medium", "hard", "all"],
        default="all",
        help="Difficulty tier (default: all; 'all' means --count per tier)"
    )
    gen_parser.add_argument(
        "--count",
        type=int,
        required=True,
        help="Number of queries (per tier with --difficulty all)"
    )
    gen_parser.add_argument(
        "--seed",
        type=int,
        help="Sampling seed (default: evaluation.seed)"
    )
    gen_parser.add_argument(
        "--out", "-o",
        required=True,
        help="Output JSONL suite"
    )

    # ask subcommand
    ask_parser = subparsers.add_parser(
        "ask",
        help="Answer one query and print the response JSON"
    )
    ask_parser.add_argument(
        "--query", "-q",
        required=True,
        help="User query"
    )
    ask_parser.add_argument(
        "--strategy",
        choices=STRATEGY_CHOICES,
        default="taira",
        help="Planner strategy (default: taira)"
    )
    ask_parser.add_argument(
        "--ablate",
        nargs="+",
        choices=ABLATION_CHOICES,
        default=[],
        help="Ablations to apply"
    )
    ask_parser.add_argument(
        "--expert-correct",
        metavar="FILE",
        help="Expert opinion text; distill it with this session's route into the pattern store"
    )
    ask_parser.add_argument(
        "--scenario",
        help="Scenario tag for a pattern distilled with --expert-correct"
    )
    ask_parser.add_argument(
        "--out", "-o",
        help="Directory for the trajectory file (default: <run_dir>/ask-<hash>)"
    )

    # evaluate subcommand
    eval_parser = subparsers.add_parser(
        "evaluate",
        help="Run a query suite and write a report"
    )
    eval_parser.add_argument(
        "--suite",
        required=True,
        help="Query suite JSONL"
    )
    eval_parser.add_argument(
        "--strategy",
        choices=STRATEGY_CHOICES,
        default="taira",
        help="Planner strategy (default: taira)"
    )
    eval_parser.add_argument(
        "--ablate",
        nargs="+",
        choices=ABLATION_CHOICES,
        default=[],
        help="Ablations to apply (T and H one at a time)"
    )
    eval_parser.add_argument(
        "--novel",
        nargs="+",
        default=[],
        help="Scenario tags whose patterns are removed"
    )
    eval_parser.add_argument(
        "--difficulty",
        choices=["easy", "medium", "hard", "all"],
        default="all",
        help="Only evaluate this tier (default: all)"
    )
    eval_parser.add_argument(
        "--parallelism", "-n",
        type=int,
        help="Concurrent sessions (default: evaluation.parallelism)"
    )
    eval_parser.add_argument(
        "--out", "-o",
        required=True,
        help="Run output directory"
    )

    # patterns subcommand
    patterns_parser = subparsers.add_parser(
        "patterns",
        help="Inspect or edit the thought pattern store"
    )
    patterns_sub = patterns_parser.add_subparsers(dest="patterns_command")
    patterns_sub.add_parser("list", help="List patterns")
    show_parser = patterns_sub.add_parser("show", help="Show one pattern")
    show_parser.add_argument("pattern_id", help="Pattern id")
    remove_parser = patterns_sub.add_parser(
        "remove-scenario",
        help="Delete every pattern tagged with a scenario"
    )
    remove_parser.add_argument("scenario", help="Scenario tag")

    # distill subcommand
    distill_parser = subparsers.add_parser(
        "distill",
        help="Distill a thought pattern from a trajectory and/or expert opinion"
    )
    distill_parser.add_argument(
        "--trajectory",
        help="Trajectory or session JSON written by ask/evaluate"
    )
    distill_parser.add_argument(
        "--opinion",
        metavar="FILE",
        help="Expert opinion text file"
    )
    distill_parser.add_argument(
        "--pattern",
        help="Id of the pattern to revise (kept on commit)"
    )
    distill_parser.add_argument(
        "--scenario",
        help="Scenario tag for the distilled pattern"
    )

    # report subcommand
    report_parser = subparsers.add_parser(
        "report",
        help="Print a run's metrics, or compare two runs"
    )
    report_parser.add_argument("run", help="Run directory")
    report_parser.add_argument("baseline", nargs="?", help="Second run directory to compare against")

    return parser


# =============================================================================
# Wiring
# =============================================================================

def _load_config(args):
    from ..io.config_io import resolve_config

    return resolve_config(args.config).validate()


def _make_gateway(config):
    from ..llm.gateway import LLMGateway, TokenLedger
    from ..llm.providers import make_provider

    return LLMGateway(make_provider(config.provider), TokenLedger(),
                      reprompt_budget=config.provider.reprompt_budget)


def _embedder(config):
    from ..core.retrieval import make_embedding_provider

    r = config.retrieval
    return make_embedding_provider(r.embedding_kind, r.embedding_dim, r.embedding_model)


def _index_dir(config) -> Path:
    return Path(config.stores.catalog_dir) / "index"


def _build_retriever(config, catalog, provider=None):
    from ..core.retrieval import BM25Index, EmbeddingIndex, Retriever

    r = config.retrieval
    index_dir = _index_dir(config)
    try:
        bm25 = BM25Index.load(str(index_dir))
    except FileNotFoundError:
        bm25 = None
    embedding_index = None
    if r.backend == "embedding":
        try:
            embedding_index = EmbeddingIndex.load(str(index_dir))
        except FileNotFoundError:
            embedding_index = None
        if embedding_index is not None and embedding_index.dimension != provider.dimension:
            embedding_index = None
    return Retriever(catalog, backend=r.backend, provider=provider,
                     candidate_pool_size=r.candidate_pool_size, map_m=r.map_m,
                     bm25_index=bm25, embedding_index=embedding_index)


def _load_patterns(config, embedder=None):
    from ..io.pattern_io import load_or_bootstrap

    return load_or_bootstrap(config.stores.pattern_store, embedder)


def _build_deps(config):
    from ..core.executors import make_search_client
    from ..core.session import SessionDeps
    from ..io.catalog_io import load_store

    catalog = load_store(config.stores.catalog_dir)
    embedder = _embedder(config) if config.retrieval.backend == "embedding" else None
    p = config.planning
    return SessionDeps(
        store=_load_patterns(config, embedder),
        catalog=catalog,
        retriever=_build_retriever(config, catalog, embedder),
        search_client=make_search_client(config.search),
        llm=_make_gateway(config),
        top_k=p.top_k,
        max_phases=p.max_phases,
        retry_limit=p.retry_limit,
        react_max_steps=p.react_max_steps,
        reflexion_max_reflections=p.reflexion_max_reflections,
        domain_noun=p.domain_noun,
    )


def _read_text(path: str) -> str:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    return path.read_text().strip()


# =============================================================================
# Commands
# =============================================================================

def cmd_ingest(args, config):
    """Handle ingest command."""
    from ..core.retrieval import Retriever
    from ..io.catalog_io import load_catalog_file, save_store

    store_dir = Path(args.store or config.stores.catalog_dir)
    print(f"Ingesting {args.catalog}...")
    catalog = load_catalog_file(args.catalog, args.histories, args.usage_notes)
    save_store(catalog, str(store_dir))

    r = config.retrieval
    provider = _embedder(config) if r.backend == "embedding" else None
    retriever = Retriever(catalog, backend=r.backend, provider=provider,
                          candidate_pool_size=r.candidate_pool_size, map_m=r.map_m)
    retriever.save(str(store_dir / "index"))

    print(f"  Items: {len(catalog)}")
    print(f"  Attributes: {len(catalog.vocab)}")
    print(f"  Histories: {len(catalog.histories)}")
    print(f"✓ Catalog store written to {store_dir}")
    return EXIT_OK


def cmd_genqueries(args, config):
    """Handle genqueries command."""
    from ..io.catalog_io import load_store
    from ..sim.queries import generate_queries, parse_counts, save_suite

    catalog = load_store(config.stores.catalog_dir)
    counts = parse_counts(args.difficulty, args.count)
    seed = config.evaluation.seed if args.seed is None else args.seed
    print(f"Generating {sum(counts.values())} queries (seed {seed})...")
    suite = generate_queries(catalog, counts, seed, _make_gateway(config),
                             profile_window=config.planning.profile_window,
                             domain_noun=config.planning.domain_noun)
    save_suite(suite, args.out)
    print(f"✓ Wrote {len(suite)} queries to {args.out}")
    return EXIT_OK


def cmd_ask(args, config):
    """Handle ask command."""
    from ..core.orchestrator import PlannerStrategy, run_session
    from ..core.thought_store import distill
    from ..evaluation.harness import prepare_store
    from ..io.pattern_io import save_pattern_store
    from ..io.run_io import save_session, session_slug

    deps = _build_deps(config)
    strategy = PlannerStrategy.from_name(args.strategy).ablated(args.ablate)
    deps = deps.with_store(prepare_store(deps.store, args.ablate))

    result = run_session(args.query, strategy, deps)
    out_dir = Path(args.out) if args.out else Path(config.stores.run_dir) / session_slug(args.query)
    path = save_session(result, str(out_dir))

    if result.succeeded:
        print(json.dumps(result.response.to_dict(), indent=2, ensure_ascii=False))
    else:
        print(json.dumps({"failure_reason": result.failure_reason.value,
                          "detail": result.trajectory.failure_detail}, indent=2),
              file=sys.stderr)
    print(f"Trajectory: {path}", file=sys.stderr)

    if args.expert_correct:
        opinion = _read_text(args.expert_correct)
        match = result.trajectory.match or {}
        old = deps.store.get(match["pattern_id"]) if match.get("pattern_id") else None
        pattern = distill(result.trajectory, opinion, old, deps.llm, scenario_tag=args.scenario)
        store = _load_patterns(config)
        store.commit(pattern)
        save_pattern_store(store, config.stores.pattern_store)
        action = "Revised" if old else "Added"
        print(f"✓ {action} pattern {pattern.id} ({pattern.source.value})", file=sys.stderr)

    return EXIT_OK if result.succeeded else EXIT_DOMAIN_ERROR


def cmd_evaluate(args, config):
    """Handle evaluate command."""
    from ..core.orchestrator import PlannerStrategy
    from ..evaluation.harness import run_experiment
    from ..evaluation.reports import write_run
    from ..io.run_io import save_trajectory
    from ..sim.queries import load_suite, select_suite

    suite = select_suite(load_suite(args.suite), args.difficulty)
    deps = _build_deps(config)
    strategy = PlannerStrategy.from_name(args.strategy)
    parallelism = args.parallelism or config.evaluation.parallelism

    print(f"Evaluating {len(suite)} queries with {strategy.kind.value}...")
    report = run_experiment(suite, strategy, deps, ablations=args.ablate,
                            novel_tags=args.novel, parallelism=parallelism,
                            seed=config.evaluation.seed)
    files = write_run(report, args.out)
    for outcome in report.outcomes:
        if outcome.trajectory is not None:
            save_trajectory(outcome.trajectory, args.out, outcome.query_id)

    overall = report.overall
    print(f"  HR@10:   {overall['HR@10']:.4f}")
    print(f"  NDCG@10: {overall['NDCG@10']:.4f}")
    print(f"  SR:      {overall['SR']:.4f}")
    for name, path in files.items():
        print(f"  {name}: {path}")
    print(f"✓ Report written to {args.out}")
    return EXIT_OK


def cmd_patterns(args, config):
    """Handle patterns command."""
    from ..io.pattern_io import save_pattern_store

    store = _load_patterns(config)
    if args.patterns_command == "list":
        for pattern in store:
            print(f"{pattern.id:<20} {pattern.scenario_tag:<18} {pattern.source.value:<32} "
                  f"{pattern.task_description[:60]}")
        print(f"{len(store)} pattern(s)")
    elif args.patterns_command == "show":
        print(json.dumps(store.get(args.pattern_id).to_dict(), indent=2, ensure_ascii=False))
    else:
        reduced = store.remove_by_scenario(args.scenario)
        save_pattern_store(reduced, config.stores.pattern_store)
        print(f"✓ Removed {len(store) - len(reduced)} pattern(s) tagged '{args.scenario}'")
    return EXIT_OK


def cmd_distill(args, config):
    """Handle distill command."""
    from ..core.thought_store import distill
    from ..io.pattern_io import save_pattern_store
    from ..io.run_io import load_trajectory

    route = load_trajectory(args.trajectory) if args.trajectory else None
    opinion = _read_text(args.opinion) if args.opinion else None
    store = _load_patterns(config)
    old = store.get(args.pattern) if args.pattern else None

    pattern = distill(route, opinion, old, _make_gateway(config), scenario_tag=args.scenario)
    store.commit(pattern)
    save_pattern_store(store, config.stores.pattern_store)
    print(json.dumps(pattern.to_dict(), indent=2, ensure_ascii=False))
    print(f"✓ Committed pattern {pattern.id} ({pattern.source.value})", file=sys.stderr)
    return EXIT_OK


def cmd_report(args, config):
    """Handle report command."""
    from ..evaluation.harness import METRIC_NAMES
    from ..evaluation.reports import compare_runs, format_comparison, load_run

    run = load_run(args.run)
    if args.baseline:
        baseline = load_run(args.baseline)
        print(format_comparison(run, baseline, compare_runs(run, baseline)))
        return EXIT_OK

    print(f"{'difficulty':<12}" + "".join(f"{m:>10}" for m in METRIC_NAMES) + f"{'n':>6}")
    rows = [("all", run.overall)] + list(run.per_difficulty.items())
    for difficulty, metrics in rows:
        print(f"{difficulty:<12}" + "".join(f"{metrics[m]:>10.4f}" for m in METRIC_NAMES)
              + f"{metrics['n']:>6}")
    return EXIT_OK


HANDLERS = {
    "ingest": cmd_ingest,
    "genqueries": cmd_genqueries,
    "ask": cmd_ask,
    "evaluate": cmd_evaluate,
    "patterns": cmd_patterns,
    "distill": cmd_distill,
    "report": cmd_report,
}


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Returns
    -------
    int
        0 on success, 1 on a domain error, 2 on a usage error
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    if args.command is None or (args.command == "patterns" and args.patterns_command is None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = _load_config(args)
        return HANDLERS[args.command](args, config)
    except TairaError as exc:
        print(f"error [{exc.label}]: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"error [{ConfigError.label}]: {exc}", file=sys.stderr)
    return EXIT_DOMAIN_ERROR


def main():
    """Main entry point."""
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
