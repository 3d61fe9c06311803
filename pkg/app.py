"""
Insight Generation Pipeline - Command Line Entry Point

Builds theme indexes over document collections, generates related insights
for question-answer pairs with the clustered method and its baselines, runs
the judge protocols and reports cross-judge agreement.

Usage:
    python app.py --mock sample generate --out fixture
    python app.py --mock index build --collection fixture/collection --index fixture/index
    python app.py --mock insights generate --qa fixture/qa.jsonl --method ALL --index fixture/index
    python app.py --mock eval set --results fixture/index/results
    python app.py stats agreement --judge-a a.set.jsonl --judge-b b.set.jsonl
    python app.py stats summary --judgments a.set.jsonl
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from config import Config, ConfigurationError
from models.insights import MethodId
from repositories.index_store import IndexStore
from repositories.results import TraceStore, load_qa_records
from utils.errors import ContractError, InsightGenError
from services.indexer import IndexBuilder
from services.pipeline import (
    PROTOCOLS, InsightPipeline, agreement, default_results_dir, evaluate, make_embedding_provider,
    make_text_model, summarize_judgments,
)
from utils.logging_config import LEVELS, configure_logging
from utils.sample_data import SampleDataGenerator
from utils.serialization import dumps_json, write_if_changed


logger = logging.getLogger(__name__)

ALL_METHODS = 'ALL'


def emit(document: Dict) -> None:
    """Command output on stdout as sorted JSON"""
    sys.stdout.write(dumps_json(document).decode('utf-8'))


def parse_methods(values: Optional[Sequence[str]]) -> List[MethodId]:
    """
    Raises:
        ContractError: On an unknown method id
    """
    if not values or ALL_METHODS in values:
        return list(MethodId)
    try:
        return [MethodId(value) for value in values]
    except ValueError as e:
        raise ContractError(f"{e}. Valid methods: {', '.join(m.value for m in MethodId)} or {ALL_METHODS}")


def load_config(args: argparse.Namespace) -> Config:
    overrides = {
        'pipeline.hyperparameters.seed': args.seed,
        'llm.judge_model': args.judge_model,
    }
    return Config(args.config, overrides=overrides)


def cmd_index_build(args: argparse.Namespace, config: Config) -> int:
    builder = IndexBuilder(
        make_embedding_provider(config, args.mock),
        config.hyperparameters(),
        clusterer=config.get('pipeline.clusterer', 'kmeans'),
        max_iter=int(config.get('pipeline.max_iter', 300)),
        tol=float(config.get('pipeline.tol', 1e-4)),
        batch_size=int(config.get('embedding.batch_size', 32)),
        parallelism=config.parallelism(),
    )
    result = builder.build(args.collection, args.index)
    emit({
        'index': args.index,
        'chunk_count': result.manifest.chunk_count,
        'num_clusters': result.manifest.num_clusters,
        'written': result.written,
        'skipped': result.skipped,
    })
    return 0


def cmd_insights_generate(args: argparse.Namespace, config: Config) -> int:
    methods = parse_methods(args.method)
    records = load_qa_records(args.qa)
    pipeline = InsightPipeline(
        config, args.index,
        make_embedding_provider(config, args.mock),
        make_text_model(config, config.llm_settings(), args.mock),
    )
    results_dir = args.out or str(default_results_dir(args.index))
    outcomes = pipeline.generate(records, methods, results_dir)
    failed = [o for o in outcomes if not o.success]
    emit({
        'results': results_dir,
        'methods': [m.value for m in methods],
        'questions': len(outcomes),
        'failed': {o.data['qa_id']: o.error_message for o in failed},
    })
    return 1 if failed else 0


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    settings = config.judge_settings()
    judge = make_text_model(config, settings, args.mock)
    outcome = evaluate(config, args.results, args.protocol, judge, judge_id=settings.get('model') or None)
    failed = [o for o in outcome['results'] if not o.success]
    emit({
        'judgments': outcome['path'],
        'summary': outcome['summary'],
        'rows': outcome['rows'],
        'failed': {o.data['qa_id']: o.error_message for o in failed},
    })
    return 1 if failed else 0


def cmd_stats_agreement(args: argparse.Namespace, config: Config) -> int:
    report = agreement(config, args.judge_a, args.judge_b, num_tests=args.num_tests).to_dict()
    if args.out:
        write_if_changed(Path(args.out), dumps_json(report))
    emit(report)
    return 0


def cmd_stats_summary(args: argparse.Namespace, config: Config) -> int:
    report = summarize_judgments(args.judgments).to_dict()
    if args.out:
        write_if_changed(Path(args.out), dumps_json(report))
    emit(report)
    return 0


def cmd_trace_show(args: argparse.Namespace, config: Config) -> int:
    trace = TraceStore(IndexStore(args.index).traces_dir).load(args.qa_id)
    if trace is None:
        raise ContractError(f"No trace for '{args.qa_id}' in {args.index}")
    emit(trace)
    return 0


def cmd_sample_generate(args: argparse.Namespace, config: Config) -> int:
    out = Path(args.out)
    generator = SampleDataGenerator(seed=config.hyperparameters().seed)
    counts = generator.write_fixture(
        str(out / 'collection'), str(out / 'qa.jsonl'),
        documents=args.documents, questions=args.questions,
    )
    emit({'collection': str(out / 'collection'), 'qa': str(out / 'qa.jsonl'), **counts})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='insightgen',
        description='Insight generation over theme-clustered document collections',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python app.py --mock sample generate --out fixture
  python app.py --mock index build --collection fixture/collection --index fixture/index
  python app.py --mock insights generate --qa fixture/qa.jsonl --method ALL --index fixture/index
  python app.py --mock eval insight --results fixture/index/results
  python app.py --mock trace show --qa-id q001 --index fixture/index
        """
    )

    parser.add_argument('--config', help='Path to a JSON or YAML configuration file')
    parser.add_argument('--seed', type=int, help='Seed (overrides config and INSIGHTGEN_SEED)')
    parser.add_argument('--mock', action='store_true', help='Use offline mock providers')
    parser.add_argument('--judge-model', help='Judge model name (LLM_* endpoint family)')
    parser.add_argument('--log-level', choices=LEVELS, help='Log level (default from config, INFO)')

    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    index = commands.add_parser('index', help='Index operations').add_subparsers(dest='action', metavar='ACTION')
    index.required = True
    build = index.add_parser('build', help='Chunk, embed and cluster a collection')
    build.add_argument('--collection', required=True, help='Directory of .txt/.md documents')
    build.add_argument('--index', required=True, help='Index directory')
    build.set_defaults(handler=cmd_index_build)

    insights = commands.add_parser('insights', help='Insight generation').add_subparsers(
        dest='action', metavar='ACTION')
    insights.required = True
    generate = insights.add_parser('generate', help='Generate insight sets')
    generate.add_argument('--qa', required=True, help='QA JSONL file')
    generate.add_argument('--method', action='append',
                          help=f"Method id ({', '.join(m.value for m in MethodId)}) or {ALL_METHODS}; repeatable")
    generate.add_argument('--index', required=True, help='Index directory')
    generate.add_argument('--out', help='Results directory (default: <index>/results)')
    generate.set_defaults(handler=cmd_insights_generate)

    evaluation = commands.add_parser('eval', help='Judge stored insight sets')
    evaluation.add_argument('protocol', choices=PROTOCOLS, help='Judge protocol')
    evaluation.add_argument('--results', required=True, help='Results directory')
    evaluation.set_defaults(handler=cmd_eval)

    stats = commands.add_parser('stats', help='Statistics').add_subparsers(dest='action', metavar='ACTION')
    stats.required = True
    agree = stats.add_parser('agreement', help='Cross-judge agreement report')
    agree.add_argument('--judge-a', required=True, help='Judge A rows (JSONL)')
    agree.add_argument('--judge-b', required=True, help='Judge B rows (JSONL)')
    agree.add_argument('--num-tests', type=int, help='Bonferroni family size (default: tests run)')
    agree.add_argument('--out', help='Also write the report to this file')
    agree.set_defaults(handler=cmd_stats_agreement)
    scores = stats.add_parser('summary', help='Mean judge score per method, overall and per collection')
    scores.add_argument('--judgments', required=True, help='Judge rows (JSONL)')
    scores.add_argument('--out', help='Also write the summary to this file')
    scores.set_defaults(handler=cmd_stats_summary)

    trace = commands.add_parser('trace', help='Selection traces').add_subparsers(dest='action', metavar='ACTION')
    trace.required = True
    show = trace.add_parser('show', help='Print the trace of one question')
    show.add_argument('--qa-id', required=True, help='Question id')
    show.add_argument('--index', required=True, help='Index directory')
    show.set_defaults(handler=cmd_trace_show)

    sample = commands.add_parser('sample', help='Sample data').add_subparsers(dest='action', metavar='ACTION')
    sample.required = True
    fixture = sample.add_parser('generate', help='Write a seeded fixture collection and QA file')
    fixture.add_argument('--out', required=True, help='Output directory')
    fixture.add_argument('--documents', type=int, default=10, help='Number of documents (default: 10)')
    fixture.add_argument('--questions', type=int, default=20, help='Number of questions (default: 20)')
    fixture.set_defaults(handler=cmd_sample_generate)

    return parser


def report_error(error: Exception) -> None:
    line = json.dumps({'error': type(error).__name__, 'message': str(error)}, sort_keys=True)
    print(line, file=sys.stderr)


def cli_run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command

    Returns:
        Exit status: 0 on success, 1 on a pipeline or configuration error,
        2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = load_config(args)
        configure_logging(args.log_level or config.get('logging.level', 'INFO'))
        return args.handler(args, config)
    except (InsightGenError, ConfigurationError, FileNotFoundError, ValueError) as e:
        logger.debug("Command failed", exc_info=True)
        report_error(e)
        return 1


def main():
    """Main entry point for the application"""
    sys.exit(cli_run())


if __name__ == '__main__':
    main()
