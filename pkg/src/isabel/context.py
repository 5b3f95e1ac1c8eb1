"""Sub-sentence construction around kept entity spans.

Each kept span becomes the anchor of a small query snippet: nearby
quantities and content words to the left, plus a connector-introduced
clause to the right ("... card to play videogames"). Boundary words
("and", "with", ...), punctuation and other kept spans end the expansion,
which keeps one request with several entities from bleeding context
between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .extraction import EntitySpan
from .text import KIND_NUMBER, KIND_PUNCTUATION, KIND_QUANTITY, KIND_WORD, LexiconConfig, Token

__all__ = ["SubSentence", "build_subsentences", "LEFT_CONTEXT_CAP"]

# At most this many tokens are absorbed from the left of an anchor.
LEFT_CONTEXT_CAP = 3


@dataclass(frozen=True)
class SubSentence:
    """An anchor span plus its absorbed context, in token order."""

    anchor: EntitySpan
    token_indices: tuple[int, ...]
    tokens: tuple[Token, ...]
    rendered: str


def _expand_left(
    tokens: Sequence[Token],
    span: EntitySpan,
    taken: dict[int, EntitySpan],
    lexicon: LexiconConfig,
) -> list[int]:
    picked: list[int] = []
    j = span.start - 1
    while j >= 0 and len(picked) < LEFT_CONTEXT_CAP:
        if j in taken:
            break
        tok = tokens[j]
        if tok.kind == KIND_PUNCTUATION:
            break
        if tok.kind == KIND_WORD and tok.normalized in lexicon.boundary_words:
            break
        if tok.kind == KIND_WORD and tok.normalized in lexicon.connector_words:
            # Connectors glue a value to the anchor ("1 TB *of* storage");
            # skip over them without spending the cap.
            j -= 1
            continue
        if tok.kind in (KIND_QUANTITY, KIND_NUMBER, KIND_WORD):
            picked.append(j)
            j -= 1
            continue
        break
    picked.reverse()
    return picked


def _expand_right(
    tokens: Sequence[Token],
    span: EntitySpan,
    taken: dict[int, EntitySpan],
    lexicon: LexiconConfig,
) -> list[int]:
    j = span.end
    if j >= len(tokens):
        return []
    head = tokens[j]
    # Only a connector immediately after the anchor opens a right clause.
    if head.kind != KIND_WORD or head.normalized not in lexicon.connector_words or j in taken:
        return []
    picked = [j]
    j += 1
    while j < len(tokens):
        if j in taken:
            break
        tok = tokens[j]
        if tok.kind == KIND_PUNCTUATION:
            break
        if tok.kind == KIND_WORD and tok.normalized in lexicon.boundary_words:
            break
        picked.append(j)
        j += 1
    return picked


def build_subsentences(
    tokens: Sequence[Token],
    spans: Sequence[EntitySpan],
    lexicon: LexiconConfig,
) -> list[SubSentence]:
    """One sub-sentence per kept span, in span order.

    The rendered form joins normalized token texts with single spaces; the
    anchor tokens are always present, so it is never empty.
    """
    taken: dict[int, EntitySpan] = {}
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for span in ordered:
        for idx in range(span.start, span.end):
            taken[idx] = span

    subsentences: list[SubSentence] = []
    for span in ordered:
        owned = {idx: claimant for idx, claimant in taken.items() if claimant is not span}
        indices = sorted(
            set(_expand_left(tokens, span, owned, lexicon))
            | set(range(span.start, span.end))
            | set(_expand_right(tokens, span, owned, lexicon))
        )
        picked = tuple(tokens[i] for i in indices)
        rendered = " ".join(t.normalized for t in picked if t.normalized)
        subsentences.append(
            SubSentence(anchor=span, token_indices=tuple(indices), tokens=picked, rendered=rendered)
        )
    return subsentences
