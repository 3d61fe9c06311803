"""
Corpus Service
Loads document collections and splits text into sentence-bounded,
token-budgeted chunks
"""

import logging
import math
import re
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from models.corpus import Chunk, Document, make_chunk_id
from utils.errors import ContractError, EmptyCollectionError


logger = logging.getLogger(__name__)

TokenCounter = Callable[[str], int]
Span = Tuple[int, int]

DEFAULT_CHUNK_BUDGET = 2000

DOCUMENT_SUFFIXES = ('.txt', '.md')

# Tokens ending in a period that do not close a sentence
ABBREVIATIONS = frozenset({
    'e.g.', 'i.e.', 'al.', 'cf.', 'vs.', 'fig.', 'figs.',
    'eq.', 'eqs.', 'sec.', 'no.', 'dr.', 'mr.', 'mrs.', 'ms.', 'prof.',
    'approx.', 'resp.', 'vol.', 'pp.',
})

_BOUNDARY = re.compile(r'[.!?]+["\')\]]*(?=\s|$)')
_NON_WHITESPACE = re.compile(r'\S')
_WHITESPACE_RUN = re.compile(r'\s+')


def count_tokens(text: str) -> int:
    """
    Estimate the token count of text as ceil(non-whitespace chars / 4)

    Deterministic and monotone under concatenation. Provider-specific
    counters can replace it wherever a TokenCounter is accepted.
    """
    return math.ceil(len(_NON_WHITESPACE.findall(text)) / 4)


def normalize_whitespace(text: str) -> str:
    return _WHITESPACE_RUN.sub(' ', text).strip()


def _skip_whitespace(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _is_abbreviation(text: str, sentence_start: int, end: int) -> bool:
    token_start = end
    while token_start > sentence_start and not text[token_start - 1].isspace():
        token_start -= 1
    return text[token_start:end].lower() in ABBREVIATIONS


def split_sentences(text: str) -> List[Span]:
    """
    Split text into sentence spans

    Each span starts at a non-whitespace character and ends after a
    terminator (. ! ? followed by whitespace or end of text) or at the last
    non-whitespace character. Spans partition the non-whitespace content.

    Args:
        text: Text to split

    Returns:
        List of half-open (start, end) character spans in increasing order
    """
    spans: List[Span] = []
    start = _skip_whitespace(text, 0)

    for match in _BOUNDARY.finditer(text):
        end = match.end()
        if end <= start:
            continue
        if _is_abbreviation(text, start, end):
            continue
        spans.append((start, end))
        start = _skip_whitespace(text, end)

    tail_end = len(text.rstrip())
    if start < tail_end:
        spans.append((start, tail_end))

    return spans


def _max_prefix_end(text: str, start: int, end: int, budget: int,
                    counter: TokenCounter) -> int:
    """Largest e in (start, end] with counter(text[start:e]) <= budget (at least start + 1)"""
    low, high = start + 1, end
    best = start + 1
    while low <= high:
        mid = (low + high) // 2
        if counter(text[start:mid]) <= budget:
            best = mid
            low = mid + 1
        else:
            high = mid - 1
    return best


def _hard_split(text: str, span: Span, budget: int, counter: TokenCounter) -> List[Span]:
    """Split one oversized sentence at the last whitespace before the budget boundary"""
    pieces: List[Span] = []
    pos, end = span

    while pos < end:
        if counter(text[pos:end]) <= budget:
            pieces.append((pos, end))
            break

        limit = _max_prefix_end(text, pos, end, budget, counter)
        cut = limit
        # text[limit] is the first character past the budget; a cut there is
        # clean when it is whitespace
        if limit < end and not text[limit].isspace():
            for i in range(limit - 1, pos, -1):
                if text[i].isspace():
                    cut = i
                    break

        piece_end = len(text[:cut].rstrip())
        if piece_end <= pos:
            piece_end = limit
        pieces.append((pos, piece_end))
        pos = _skip_whitespace(text, piece_end)

    return pieces


def chunk_text(text: str, budget: int = DEFAULT_CHUNK_BUDGET, doc_id: str = '',
               counter: TokenCounter = count_tokens) -> List[Chunk]:
    """
    Pack consecutive sentences into chunks of at most budget tokens

    A sentence is appended while the running token count stays within the
    budget. A single sentence above the budget is hard-split into pieces
    that are emitted as their own chunks.

    Args:
        text: Text to chunk
        budget: Token budget per chunk (>= 1)
        doc_id: Parent document id used for chunk ids
        counter: Token counter

    Returns:
        Chunks with contiguous ordinals starting at 0

    Raises:
        ContractError: If budget < 1
    """
    if budget < 1:
        raise ContractError(f"Chunk budget must be >= 1, got {budget}")

    spans: List[Span] = []
    group_start: Optional[int] = None
    group_end = 0

    for start, end in split_sentences(text):
        if group_start is not None and counter(text[group_start:end]) <= budget:
            group_end = end
            continue

        if group_start is not None:
            spans.append((group_start, group_end))
            group_start = None

        if counter(text[start:end]) > budget:
            spans.extend(_hard_split(text, (start, end), budget, counter))
        else:
            group_start, group_end = start, end

    if group_start is not None:
        spans.append((group_start, group_end))

    return [
        Chunk(
            chunk_id=make_chunk_id(doc_id, ordinal),
            doc_id=doc_id,
            ordinal=ordinal,
            text=text[start:end],
            token_count=counter(text[start:end]),
            char_span=(start, end),
        )
        for ordinal, (start, end) in enumerate(spans)
    ]


def truncate_at_sentence(text: str, budget: int, counter: TokenCounter = count_tokens) -> str:
    """
    Longest prefix of text that ends at a sentence boundary and fits the budget

    Returns '' when even the first sentence is over budget.
    """
    ends = [end for _, end in split_sentences(text)]
    low, high, best = 0, len(ends) - 1, -1
    while low <= high:
        mid = (low + high) // 2
        if counter(text[:ends[mid]]) <= budget:
            best = mid
            low = mid + 1
        else:
            high = mid - 1
    return text[:ends[best]].strip() if best >= 0 else ''


def chunk_documents(documents: Sequence[Document], budget: int = DEFAULT_CHUNK_BUDGET,
                    counter: TokenCounter = count_tokens) -> List[Chunk]:
    """Chunk every document; chunks come out grouped by document in input order"""
    chunks: List[Chunk] = []
    for document in documents:
        chunks.extend(chunk_text(document.body, budget, doc_id=document.doc_id, counter=counter))
    return chunks


def _title_of(body: str, fallback: str) -> str:
    for line in body.splitlines():
        stripped = line.strip().lstrip('#').strip()
        if stripped:
            return stripped[:200]
    return fallback


def load_collection(root: str, collection_id: Optional[str] = None,
                    counter: TokenCounter = count_tokens) -> List[Document]:
    """
    Load one Document per .txt/.md file in a collection directory

    Args:
        root: Collection directory
        collection_id: Collection id (defaults to the directory name)
        counter: Token counter for Document.token_count

    Returns:
        Documents ordered by doc_id (the file stem)

    Raises:
        FileNotFoundError: If root does not exist
        NotADirectoryError: If root is not a directory
        EmptyCollectionError: If the directory holds no documents
        ContractError: If two files map to the same doc_id
    """
    root_path = Path(root)
    if not root_path.exists():
        raise FileNotFoundError(f"Collection directory not found: {root}")
    if not root_path.is_dir():
        raise NotADirectoryError(f"Collection path is not a directory: {root}")

    collection = collection_id or root_path.name
    documents = {}

    for path in sorted(root_path.iterdir()):
        if not path.is_file() or path.suffix.lower() not in DOCUMENT_SUFFIXES:
            continue
        doc_id = path.stem
        if doc_id in documents:
            raise ContractError(f"Duplicate document id '{doc_id}' in {root}")
        body = path.read_text(encoding='utf-8')
        documents[doc_id] = Document(
            doc_id=doc_id,
            collection_id=collection,
            title=_title_of(body, doc_id),
            body=body,
            token_count=counter(body),
        )

    if not documents:
        raise EmptyCollectionError(f"No .txt or .md documents found in {root}")

    logger.info("Loaded %d documents from collection '%s'", len(documents), collection)
    return [documents[doc_id] for doc_id in sorted(documents)]
