"""
Baseline Methods
Context builders for the comparison methods and the runner that produces an
InsightSet for any method from the shared prompts
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.corpus import Chunk, Document
from models.insights import InsightSet, MethodId
from models.selection import ContextSelection
from models.store import IndexData, QARecord
from services.context_selector import ContextSelector, render_context
from services.corpus import count_tokens, split_sentences, truncate_at_sentence
from services.embeddings import EmbeddingProvider, embed_texts_stored
from utils.errors import ContractError, DegenerateBudgetError
from services.insight_engine import DEFAULT_MAX_INSIGHTS, InsightEngine


logger = logging.getLogger(__name__)

SIM_QUERIES = ('question', 'question_answer')


def _render_document(doc_id: str, text: str) -> str:
    return f"[{doc_id}]\n{text}"


def direct_context(docs: Sequence[Document], budget: int) -> str:
    """
    Give every document the same token quota and keep its leading sentences

    Each document contributes the longest sentence-bounded prefix of at most
    floor(budget / len(docs)) tokens. Documents appear in doc_id order.

    Raises:
        ContractError: If docs is empty
        DegenerateBudgetError: If budget < len(docs)
    """
    if not docs:
        raise ContractError("direct_context requires at least one document")
    if budget < len(docs):
        raise DegenerateBudgetError(f"Budget {budget} is below one token per document ({len(docs)} documents)")

    quota = budget // len(docs)
    parts = []
    for document in sorted(docs, key=lambda d: d.doc_id):
        prefix = truncate_at_sentence(document.body, quota)
        if prefix:
            parts.append(_render_document(document.doc_id, prefix))
        else:
            logger.debug("Document %s has no sentence within its %d-token quota", document.doc_id, quota)
    return '\n\n'.join(parts)


def truncated_global_context(docs: Sequence[Document], budget: int) -> str:
    """
    Concatenate documents in doc_id order and cut at the last sentence that fits

    Token counts are summed over sentences (headers excluded).

    Raises:
        ContractError: If docs is empty or budget is negative
    """
    if not docs:
        raise ContractError("truncated_global_context requires at least one document")
    if budget < 0:
        raise ContractError(f"Budget must be >= 0, got {budget}")
    if budget == 0:
        logger.warning("Global context budget is 0; the method runs without context")
        return ''

    parts = []
    used = 0
    for document in sorted(docs, key=lambda d: d.doc_id):
        body = document.body
        kept_end = 0
        exhausted = False
        for start, end in split_sentences(body):
            tokens = count_tokens(body[start:end])
            if used + tokens > budget:
                exhausted = True
                break
            used += tokens
            kept_end = end
        if kept_end:
            parts.append(_render_document(document.doc_id, body[:kept_end].strip()))
        if exhausted:
            break
    return '\n\n'.join(parts)


def similarity_retrieve(query: str, n_chunks: int, index: IndexData,
                        provider: EmbeddingProvider) -> List[Chunk]:
    """
    Exact top-n chunks by cosine similarity to the query (linear scan)

    Ties go to the lower chunk id. n_chunks above the index size is clamped.

    Raises:
        ContractError: If n_chunks < 1 or the query is empty
    """
    if n_chunks < 1:
        raise ContractError(f"n_chunks must be >= 1, got {n_chunks}")
    if not query.strip():
        raise ContractError("similarity_retrieve requires a non-empty query")
    if n_chunks > index.size:
        logger.warning("Requested %d chunks from an index of %d; clamping", n_chunks, index.size)
        n_chunks = index.size

    query_vector = embed_texts_stored([query], provider)[0]
    matrix = np.asarray(index.embeddings, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1) * float(np.linalg.norm(query_vector))
    cosines = np.clip((matrix @ query_vector) / norms, -1.0, 1.0)

    order = sorted(range(index.size), key=lambda i: (-float(cosines[i]), index.chunks[i].chunk_id))
    return [index.chunks[i] for i in order[:n_chunks]]


@dataclass
class MethodOutput:
    """Context handed to a method and, once generated, its insight set"""

    context: str
    selection: Optional[ContextSelection] = None
    prompt_chunks: Optional[List[str]] = None
    insight_set: Optional[InsightSet] = None


class MethodRunner:
    """
    Runs any method for one question over a loaded index

    The two-step methods share the intent and insight templates and differ
    only in the context block; DIRECT and SIM use the single-prompt template.
    """

    def __init__(self, index: IndexData, embedding_provider: EmbeddingProvider,
                 engine: InsightEngine, selector: ContextSelector, context_budget: int,
                 max_insights: int = DEFAULT_MAX_INSIGHTS, sim_query: str = 'question'):
        """
        Initialize MethodRunner

        Args:
            index: Loaded index
            embedding_provider: Provider matching the index embeddings
            engine: Insight engine wrapping the generation model
            selector: Theme-graph context selector over the same index
            context_budget: Token budget for every method's context
            max_insights: Maximum insights per set
            sim_query: 'question' or 'question_answer' for the SIM retrieval query
        """
        if sim_query not in SIM_QUERIES:
            raise ContractError(f"Invalid sim_query '{sim_query}'. Valid: {', '.join(SIM_QUERIES)}")
        self.index = index
        self.embedding_provider = embedding_provider
        self.engine = engine
        self.selector = selector
        self.context_budget = context_budget
        self.max_insights = max_insights
        self.sim_query = sim_query

    def insightgen_context(self, qa: QARecord) -> Tuple[ContextSelection, str]:
        return self.selector.select(qa.answer)

    def similarity_context(self, qa: QARecord, n_chunks: int) -> Tuple[List[Chunk], str]:
        query = qa.question if self.sim_query == 'question' else f"{qa.question}\n\n{qa.answer}"
        chunks = similarity_retrieve(query, n_chunks, self.index, self.embedding_provider)
        return chunks, render_context(chunks)

    def build_context(self, method: MethodId, qa: QARecord,
                      selection: Optional[ContextSelection] = None) -> MethodOutput:
        """
        Context for a method; SIM methods need the INSIGHTGEN selection for parity

        When selection is None it is computed here.
        """
        if method == MethodId.INSIGHTGEN:
            if selection is None:
                selection, text = self.insightgen_context(qa)
            else:
                text = render_context([self.selector.by_id[c] for c in selection.chunk_ids()])
            return MethodOutput(text, selection, selection.chunk_ids())
        if method == MethodId.DIRECT:
            return MethodOutput(direct_context(self.index.documents, self.context_budget))
        if method == MethodId.DIRECT_COT:
            return MethodOutput(truncated_global_context(self.index.documents, self.context_budget))
        if method in (MethodId.SIM, MethodId.SIM_COT):
            if selection is None:
                selection, _ = self.insightgen_context(qa)
            chunks, text = self.similarity_context(qa, selection.chunk_count)
            return MethodOutput(text, selection, [c.chunk_id for c in chunks])
        raise ContractError(f"Unknown method {method!r}")

    def run_method(self, method: MethodId, qa: QARecord,
                   selection: Optional[ContextSelection] = None) -> MethodOutput:
        """
        Produce the InsightSet of one method for one question

        Raises:
            GenerationParseError, EmptyGenerationError, ProviderError: From generation
        """
        output = self.build_context(method, qa, selection)
        if method.uses_cot:
            intent = self.engine.infer_intent(qa.question, qa.answer)
            insight_set = self.engine.generate_insights(
                qa.question, qa.answer, output.context, intent,
                self.max_insights, qa_id=qa.qa_id, method_id=method,
            )
        else:
            insight_set = self.engine.generate_single_prompt(
                qa.question, qa.answer, output.context,
                self.max_insights, qa_id=qa.qa_id, method_id=method,
            )

        if output.prompt_chunks is not None:
            insight_set.context_chunks = len(output.prompt_chunks)
        insight_set.context_tokens = count_tokens(output.context)
        output.insight_set = insight_set
        logger.info("%s produced %d insights for %s", method.value, len(insight_set.insights), qa.qa_id)
        return output


def run_method(method: MethodId, qa: QARecord, runner: MethodRunner,
               selection: Optional[ContextSelection] = None) -> InsightSet:
    return runner.run_method(method, qa, selection).insight_set
