"""Entity disambiguation by TF-IDF cosine similarity.

Entity descriptions form the document corpus. Both corpus and queries go
through the same term function (fused quantities keep their digits, words
are lemmatized), so an exact description query scores 1.0 against its own
entity. Vectors live in plain dicts keyed by term index; the corpus is tiny
and sparse arithmetic keeps the module dependency-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .context import SubSentence
from .kg import KnowledgeGraph
from .text import (
    KIND_NUMBER,
    KIND_PUNCTUATION,
    KIND_QUANTITY,
    LexiconConfig,
    Token,
    fuse_quantities,
    lemmatize,
    tokenize,
)

__all__ = [
    "Vectorizer",
    "Candidate",
    "LinkedEntity",
    "EmptyCorpus",
    "fit_vectorizer",
    "vectorize",
    "cosine",
    "terms_of",
    "disambiguate",
    "DEFAULT_TAU",
    "DEFAULT_K",
]

DEFAULT_TAU = 0.25
DEFAULT_K = 3


class EmptyCorpus(ValueError):
    """Raised when there are no entity descriptions to index."""


@dataclass(frozen=True)
class Vectorizer:
    """Fitted TF-IDF model over entity descriptions.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 with N documents; document
    vectors are L2-normalized. Term indices follow sorted term order, so
    fitting is deterministic.
    """

    vocabulary_index: Mapping[str, int]
    idf: tuple[float, ...]
    document_vectors: Mapping[str, Mapping[int, float]]
    lexicon: LexiconConfig = field(compare=False)


@dataclass(frozen=True)
class Candidate:
    entity_id: str
    score: float
    subsentence_index: int


@dataclass(frozen=True)
class LinkedEntity:
    entity_id: str
    score: float
    subsentence_index: int


def terms_of(tokens: Iterable[Token], lexicon: LexiconConfig) -> list[str]:
    """Scoring terms for a token sequence; punctuation contributes nothing."""
    terms = []
    for tok in tokens:
        if tok.kind == KIND_PUNCTUATION or not tok.normalized:
            continue
        if tok.kind in (KIND_NUMBER, KIND_QUANTITY):
            terms.append(tok.normalized)
        else:
            terms.append(lemmatize(tok.lemma, lexicon))
    return terms


def _description_terms(description: str, lexicon: LexiconConfig) -> list[str]:
    return terms_of(fuse_quantities(tokenize(description), lexicon), lexicon)


def _normalized_counts(terms: Sequence[str], index: Mapping[str, int], idf: Sequence[float]) -> dict[int, float]:
    counts: dict[int, int] = {}
    for term in terms:
        dim = index.get(term)
        if dim is not None:
            counts[dim] = counts.get(dim, 0) + 1
    weights = {dim: tf * idf[dim] for dim, tf in counts.items()}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0.0:
        return {}
    return {dim: w / norm for dim, w in weights.items()}


def fit_vectorizer(kg: KnowledgeGraph) -> Vectorizer:
    """Index every entity description; raises EmptyCorpus on no entities."""
    if not kg.entities:
        raise EmptyCorpus("cannot fit a vectorizer on a graph with no entities")
    doc_terms = {
        eid: _description_terms(kg.entities[eid].description, kg.lexicon) for eid in sorted(kg.entities)
    }
    df: dict[str, int] = {}
    for terms in doc_terms.values():
        for term in set(terms):
            df[term] = df.get(term, 0) + 1
    index = {term: dim for dim, term in enumerate(sorted(df))}
    n_docs = len(doc_terms)
    idf = tuple(
        math.log((1 + n_docs) / (1 + df[term])) + 1.0 for term in sorted(df)
    )
    vectors = {eid: _normalized_counts(terms, index, idf) for eid, terms in doc_terms.items()}
    return Vectorizer(vocabulary_index=index, idf=idf, document_vectors=vectors, lexicon=kg.lexicon)


def vectorize(tokens: Iterable[Token], vectorizer: Vectorizer) -> dict[int, float]:
    """L2-normalized TF-IDF vector of a token sequence; {} if nothing known."""
    return _normalized_counts(
        terms_of(tokens, vectorizer.lexicon), vectorizer.vocabulary_index, vectorizer.idf
    )


def cosine(a: Mapping[int, float], b: Mapping[int, float]) -> float:
    """Cosine similarity of two sparse vectors; 0.0 when either is empty."""
    if not a or not b:
        return 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(w * b.get(dim, 0.0) for dim, w in a.items())
    norm_a = math.sqrt(sum(w * w for w in a.values()))
    norm_b = math.sqrt(sum(w * w for w in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def disambiguate(
    subsentence: SubSentence,
    kg: KnowledgeGraph,
    vectorizer: Vectorizer,
    tau: float = DEFAULT_TAU,
    k: int = DEFAULT_K,
    *,
    subsentence_index: int = 0,
    type_filter: bool = True,
) -> tuple[list[Candidate], LinkedEntity | None]:
    """Rank candidate entities for one sub-sentence.

    Candidates are the top k by score (ties broken by ascending id) among
    entities of the anchor's type (all entities when type_filter is off).
    The best candidate becomes a link only when its score reaches tau.
    """
    if type_filter:
        pool = [eid for eid in sorted(kg.entities) if kg.entities[eid].entity_type == subsentence.anchor.entity_type]
    else:
        pool = sorted(kg.entities)
    query = vectorize(subsentence.tokens, vectorizer)
    scored = [
        Candidate(
            entity_id=eid,
            score=cosine(query, vectorizer.document_vectors[eid]),
            subsentence_index=subsentence_index,
        )
        for eid in pool
    ]
    scored.sort(key=lambda c: (-c.score, c.entity_id))
    candidates = scored[: max(k, 0)]
    best = None
    if candidates and candidates[0].score >= tau:
        top = candidates[0]
        best = LinkedEntity(entity_id=top.entity_id, score=top.score, subsentence_index=subsentence_index)
    return candidates, best
