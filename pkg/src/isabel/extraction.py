"""Entity mention detection over token sequences.

Two detectors run side by side: pattern rules (regular expressions over the
normalized token stream) and a gazetteer built from entity aliases. Pattern
matches win any overlap. A final dictionary gate rejects spans containing
out-of-vocabulary words so unknown requests fail loudly instead of linking
to a random near neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .kg import KnowledgeGraph, PatternRule
from .text import Token, lemmatize, number_constant_view

__all__ = [
    "EntitySpan",
    "OovRejection",
    "extract_pattern",
    "extract_gazetteer",
    "extract_entities",
    "filter_oov",
]

SOURCE_PATTERN = "pattern"
SOURCE_GAZETTEER = "gazetteer"


@dataclass(frozen=True)
class EntitySpan:
    """Half-open token range [start, end) tagged with an entity type."""

    start: int
    end: int
    entity_type: str
    source: str
    matched_rule: str  # rule name for patterns, alias text for gazetteer hits

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class OovRejection:
    """Span dropped by the dictionary gate, with the first unknown word."""

    start: int
    end: int
    rejected_word: str


def _joined_view(tokens: Sequence[Token]) -> tuple[str, dict[int, int], dict[int, int]]:
    """Normalized token texts joined by single spaces, plus offset maps.

    `starts[c]` / `ends[c]` give the token index whose text starts/ends at
    character offset c, so regex matches can be required to align with token
    boundaries.
    """
    parts: list[str] = []
    starts: dict[int, int] = {}
    ends: dict[int, int] = {}
    pos = 0
    for i, tok in enumerate(tokens):
        if i:
            parts.append(" ")
            pos += 1
        starts[pos] = i
        parts.append(tok.normalized)
        pos += len(tok.normalized)
        ends[pos] = i + 1
    return "".join(parts), starts, ends


def extract_pattern(tokens: Sequence[Token], rules: Sequence[PatternRule]) -> list[EntitySpan]:
    """Apply pattern rules in priority order; claimed tokens stay claimed.

    A match only counts when both edges fall on token boundaries and none of
    its tokens were taken by an earlier (higher priority) rule.
    """
    joined, starts, ends = _joined_view(tokens)
    claimed: set[int] = set()
    spans: list[EntitySpan] = []
    for rule in sorted(rules, key=lambda r: r.priority):
        for match in rule.compiled.finditer(joined):
            if match.start() == match.end():
                continue
            first = starts.get(match.start())
            stop = ends.get(match.end())
            if first is None or stop is None or stop <= first:
                continue
            covered = range(first, stop)
            if any(idx in claimed for idx in covered):
                continue
            claimed.update(covered)
            spans.append(
                EntitySpan(
                    start=first,
                    end=stop,
                    entity_type=rule.entity_type,
                    source=SOURCE_PATTERN,
                    matched_rule=rule.name,
                )
            )
    spans.sort(key=lambda s: (s.start, s.end))
    return spans


def extract_gazetteer(tokens: Sequence[Token], kg: KnowledgeGraph) -> list[EntitySpan]:
    """Greedy left-to-right longest alias match over normalized tokens."""
    index = kg.alias_index
    if not index:
        return []
    widest = max(len(key) for key in index)
    spans: list[EntitySpan] = []
    i = 0
    n = len(tokens)
    while i < n:
        matched = 0
        for width in range(min(widest, n - i), 0, -1):
            key = tuple(t.normalized for t in tokens[i : i + width])
            entry = index.get(key)
            if entry is not None:
                _eid, alias, entity_type = entry
                spans.append(
                    EntitySpan(
                        start=i,
                        end=i + width,
                        entity_type=entity_type,
                        source=SOURCE_GAZETTEER,
                        matched_rule=alias,
                    )
                )
                matched = width
                break
        i += matched or 1
    return spans


def extract_entities(tokens: Sequence[Token], kg: KnowledgeGraph) -> list[EntitySpan]:
    """Pattern spans plus non-overlapping gazetteer spans, in token order."""
    spans = extract_pattern(tokens, kg.rules)
    for span in extract_gazetteer(tokens, kg):
        if not any(span.overlaps(other) for other in spans):
            spans.append(span)
    spans.sort(key=lambda s: (s.start, s.end))
    return spans


def filter_oov(
    spans: Sequence[EntitySpan], tokens: Sequence[Token], kg: KnowledgeGraph
) -> tuple[list[EntitySpan], list[OovRejection]]:
    """Split spans into dictionary-approved and rejected.

    Each token in a span is viewed through `number_constant_view` and
    lemmatized; the first word missing from the graph vocabulary sinks the
    whole span.
    """
    kept: list[EntitySpan] = []
    rejected: list[OovRejection] = []
    for span in spans:
        offender = None
        for idx in range(span.start, span.end):
            word = lemmatize(number_constant_view(tokens[idx]), kg.lexicon)
            if word not in kg.vocabulary:
                offender = word
                break
        if offender is None:
            kept.append(span)
        else:
            rejected.append(OovRejection(start=span.start, end=span.end, rejected_word=offender))
    return kept, rejected
