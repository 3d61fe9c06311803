"""
Pipeline Orchestration
Wires configuration, providers and stores into the generate, evaluate and
agreement workflows used by the command line
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import Config
from models.evaluation import PROTOCOL_INSIGHT, PROTOCOL_SET, AgreementReport, JudgeScore, ScoreSummary
from models.insights import MethodId
from models.selection import ContextSelection
from models.store import IndexData, QARecord
from repositories.embedding_cache import text_digest
from repositories.index_store import IndexStore
from repositories.results import ResultsStore, TraceStore, load_judgments
from services.baselines import MethodRunner
from services.context_selector import ContextSelector
from services.embeddings import EmbeddingProvider, HttpEmbeddingProvider, MockEmbeddingProvider, stable_seed
from utils.errors import ContractError, InsightGenError
from services.insight_engine import InsightEngine
from services.judge_eval import JudgeEvaluator
from services.statistics import agreement_stats, score_summary
from services.text_models import HttpTextModel, MockTextModel, TextModel


logger = logging.getLogger(__name__)

PROTOCOLS = (PROTOCOL_SET, PROTOCOL_INSIGHT)


class Result:
    """Result object for per-question operations"""

    def __init__(self, success: bool, data: Optional[Dict] = None, error_message: Optional[str] = None):
        self.success = success
        self.data = data
        self.error_message = error_message


def make_embedding_provider(config: Config, mock: bool = False) -> EmbeddingProvider:
    settings = config.embedding_settings()
    if mock:
        return MockEmbeddingProvider(model_id=settings.get('model') or 'mock-embed-64',
                                     dim=int(settings.get('mock_dim', 64)))
    return HttpEmbeddingProvider(
        endpoint=settings.get('endpoint', ''),
        api_key=settings.get('api_key', ''),
        model_id=settings.get('model', ''),
        timeout=float(settings.get('timeout', 30.0)),
        max_retries=int(config.get('pipeline.provider_retries', 3)),
        backoff_base=float(config.get('pipeline.backoff_base', 0.5)),
    )


def make_text_model(config: Config, settings: Dict, mock: bool = False) -> TextModel:
    """Text model for generation (llm_settings) or judging (judge_settings)"""
    if mock:
        return MockTextModel(seed=config.hyperparameters().seed, model_id=settings.get('model') or 'mock-llm')
    return HttpTextModel(
        endpoint=settings.get('endpoint', ''),
        api_key=settings.get('api_key', ''),
        model_id=settings.get('model', ''),
        timeout=float(settings.get('timeout', 120.0)),
        max_retries=int(config.get('pipeline.provider_retries', 3)),
        backoff_base=float(config.get('pipeline.backoff_base', 0.5)),
    )


def question_rng(seed: int, qa_id: str, *salt: str) -> np.random.Generator:
    """Generator for one question, independent of scheduling order"""
    return np.random.default_rng([seed, stable_seed(qa_id, *salt)])


def ordered_methods(methods: Sequence[MethodId]) -> List[MethodId]:
    """Unique methods in declaration order, so INSIGHTGEN runs before SIM"""
    chosen = set(methods)
    return [method for method in MethodId if method in chosen]


class InsightPipeline:
    """Generation over one index directory"""

    def __init__(self, config: Config, index_dir: str, embedding_provider: EmbeddingProvider,
                 text_model: TextModel):
        """
        Initialize InsightPipeline

        Args:
            config: Loaded configuration
            index_dir: Built index directory
            embedding_provider: Must match the provider and model the index was built with
            text_model: Generation model

        Raises:
            ContractError: If the provider does not match the index
            IndexCorruptedError, SchemaVersionError: From opening the index
        """
        self.config = config
        self.store = IndexStore(index_dir)
        self.index: IndexData = self.store.load()
        manifest = self.index.manifest
        if (manifest.provider_id, manifest.model_id) != (embedding_provider.provider_id, embedding_provider.model_id):
            raise ContractError(
                f"Index was embedded with {manifest.provider_id}/{manifest.model_id}, "
                f"not {embedding_provider.provider_id}/{embedding_provider.model_id}"
            )

        params = config.hyperparameters()
        self.params = params
        self.selector = ContextSelector(
            self.index.chunks, self.index.embeddings, self.index.model, self.index.graph,
            embedding_provider, k=params.k, max_hops=params.max_hops,
            chunk_budget=params.chunk_budget, context_budget=config.context_budget(),
            traversal=config.get('pipeline.traversal', 'bfs'),
        )
        llm = config.llm_settings()
        self.engine = InsightEngine(
            text_model,
            temperature=float(llm.get('temperature', 0.7)),
            max_tokens=int(llm.get('max_output_tokens', 4000)),
            parse_retries=int(config.get('pipeline.parse_retries', 2)),
        )
        self.runner = MethodRunner(
            self.index, embedding_provider, self.engine, self.selector,
            context_budget=config.context_budget(), max_insights=params.max_insights,
            sim_query=config.get('pipeline.sim_query', 'question'),
        )
        self.traces = TraceStore(self.store.traces_dir)

    def _selection_key(self, qa: QARecord) -> str:
        parts = [
            self.index.manifest.input_fingerprint, qa.answer, str(self.params.k),
            str(self.params.max_hops), str(self.selector.context_budget),
        ]
        return text_digest('\x00'.join(parts))

    def _selection_for(self, qa: QARecord) -> ContextSelection:
        """The INSIGHTGEN selection, reused from the trace while index and answer are unchanged"""
        key = self._selection_key(qa)
        trace = self.traces.load(qa.qa_id)
        if trace and trace.get('selection_key') == key and 'selection' in trace:
            return ContextSelection.from_trace(trace['selection'])
        selection, _ = self.runner.insightgen_context(qa)
        self.traces.update(qa.qa_id, {'selection_key': key, 'selection': selection.to_trace()})
        return selection

    def process_question(self, qa: QARecord, methods: Sequence[MethodId],
                         results: ResultsStore) -> Result:
        """Run every requested method for one question and persist the outputs"""
        try:
            needs_selection = any(m in (MethodId.INSIGHTGEN, MethodId.SIM, MethodId.SIM_COT) for m in methods)
            selection = self._selection_for(qa) if needs_selection else None

            summary = {}
            for method in ordered_methods(methods):
                output = self.runner.run_method(method, qa, selection)
                results.save_insight_set(output.insight_set)
                if output.prompt_chunks is not None:
                    self.traces.update(qa.qa_id, {method.value: {
                        'prompt_chunks': output.prompt_chunks,
                        'context_tokens': output.insight_set.context_tokens,
                    }})
                summary[method.value] = len(output.insight_set.insights)
            return Result(success=True, data={'qa_id': qa.qa_id, 'insights': summary})
        except InsightGenError as e:
            logger.error("Question %s failed: %s", qa.qa_id, e)
            return Result(success=False, data={'qa_id': qa.qa_id},
                          error_message=f"{type(e).__name__}: {e}")

    def generate(self, records: Sequence[QARecord], methods: Sequence[MethodId],
                 results_dir: Optional[str] = None) -> List[Result]:
        """
        Generate insight sets for every question and method

        Questions run concurrently up to the configured parallelism; one
        failing question does not stop the others.

        Returns:
            One Result per question, in input order
        """
        if not methods:
            raise ContractError("At least one method is required")
        results = ResultsStore(results_dir or self.store.results_dir)

        with self.store.lock(), results.lock():
            results.save_questions(records)
            with ThreadPoolExecutor(max_workers=self.config.parallelism()) as pool:
                outcomes = list(pool.map(lambda qa: self.process_question(qa, methods, results), records))

        failed = sum(not outcome.success for outcome in outcomes)
        logger.info("Generated insights for %d of %d questions", len(outcomes) - failed, len(outcomes))
        return outcomes


def evaluate(config: Config, results_dir: str, protocol: str, judge: TextModel,
             judge_id: Optional[str] = None, seed: Optional[int] = None) -> Dict:
    """
    Judge every stored question with the set-level or insight-level protocol

    The judge rows and their per-method score summary are written under the
    results directory while holding its lock.

    Returns:
        {'path': judgment file, 'rows': row count, 'summary': summary file or None,
        'results': per-question Result list}

    Raises:
        ContractError: On an unknown protocol or an empty results directory
    """
    if protocol not in PROTOCOLS:
        raise ContractError(f"Invalid protocol '{protocol}'. Valid: {', '.join(PROTOCOLS)}")
    results = ResultsStore(results_dir)
    questions = results.load_questions()
    if not questions:
        raise ContractError(f"No questions recorded in {results_dir}")

    seed = config.hyperparameters().seed if seed is None else seed
    evaluator = JudgeEvaluator(
        judge, judge_id=judge_id,
        criteria=config.get('evaluation.criteria'),
        parse_retries=int(config.get('pipeline.parse_retries', 2)),
    )
    repeats = int(config.get('evaluation.insight_repeats', 10))

    def judge_question(qa: QARecord) -> Result:
        try:
            sets = results.load_sets_for(qa.qa_id)
            rng = question_rng(seed, qa.qa_id, protocol)
            if protocol == PROTOCOL_SET:
                rows = evaluator.judge_set_level(qa, sets, rng, seed=seed)
            else:
                rows = evaluator.judge_insight_level(qa, sets, rng, repeats=repeats, seed=seed).scores
            return Result(success=True, data={'qa_id': qa.qa_id, 'rows': rows})
        except InsightGenError as e:
            logger.error("Judging %s failed: %s", qa.qa_id, e)
            return Result(success=False, data={'qa_id': qa.qa_id}, error_message=f"{type(e).__name__}: {e}")

    with results.lock():
        with ThreadPoolExecutor(max_workers=config.parallelism()) as pool:
            outcomes = list(pool.map(judge_question, questions))

        rows: List[JudgeScore] = [row for o in outcomes if o.success for row in o.data['rows']]
        path = results.save_judgments(evaluator.judge_id, protocol, rows)
        summary_path = None
        if rows:
            summary = score_summary(rows)
            summary.judge_id, summary.protocol = evaluator.judge_id, protocol
            summary_path = str(results.save_summary(summary))
    return {'path': str(path), 'rows': len(rows), 'summary': summary_path, 'results': outcomes}


def agreement(config: Config, judge_a_file: str, judge_b_file: str,
              num_tests: Optional[int] = None) -> AgreementReport:
    """Agreement report between two judge-row files"""
    return agreement_stats(
        load_judgments(judge_a_file),
        load_judgments(judge_b_file),
        base_alpha=float(config.get('evaluation.base_alpha', 0.05)),
        num_tests=num_tests,
    )


def summarize_judgments(judgments_file: str) -> ScoreSummary:
    """Per-method mean scores of one judge-row file"""
    return score_summary(load_judgments(judgments_file))


def default_results_dir(index_dir: str) -> Path:
    return IndexStore(index_dir).results_dir
