"""Deterministic tokenization, normalization and lemmatization.

Every downstream stage (extraction, dictionary checks, similarity scoring)
consumes tokens produced here, so the whole pipeline stays reproducible:
no trained models, no locale dependence, no randomness.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping

__all__ = [
    "Token",
    "LexiconConfig",
    "LexiconError",
    "load_lexicon",
    "tokenize",
    "normalize",
    "lemmatize",
    "with_lemmas",
    "fuse_quantities",
    "number_constant_view",
    "NUMBER_CONSTANT",
]

# Placeholder used by the dictionary view of numeric tokens; always a
# member of the derived vocabulary.
NUMBER_CONSTANT = "<NUM>"

KIND_WORD = "word"
KIND_NUMBER = "number"
KIND_QUANTITY = "quantity"
KIND_PUNCTUATION = "punctuation"

# Numbers never swallow a leading letter ("i5" stays one word token) but a
# digit run followed by letters splits ("8GB" -> "8", "GB") so quantity
# fusion sees the same shape as "8 GB".
_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)?|[^\W\d_][^\W_]*|\S", re.UNICODE)
_NUMBER_RE = re.compile(r"\d+(?:[.,]\d+)?")


@dataclass(frozen=True, slots=True)
class Token:
    """One text unit with its source span (start inclusive, end exclusive)."""

    surface: str
    normalized: str
    lemma: str
    start: int
    end: int
    kind: str


@dataclass(frozen=True)
class LexiconConfig:
    """Per-language word resources; all entries are pre-normalized."""

    language_tag: str
    lemma_map: Mapping[str, str]
    unit_words: frozenset[str]
    connector_words: frozenset[str]
    boundary_words: frozenset[str]


class LexiconError(ValueError):
    """Raised when a lexicon document is malformed; names the offending path."""


def normalize(surface: str) -> str:
    """Lowercase and strip diacritics; idempotent.

    Casefolds, applies compatibility decomposition and drops nonspacing
    marks, iterating to the fixpoint so exotic casefold expansions cannot
    reintroduce marks on a second pass.
    """
    text = surface
    for _ in range(4):
        folded = unicodedata.normalize("NFKD", text.casefold())
        stripped = "".join(ch for ch in folded if unicodedata.category(ch) != "Mn")
        if stripped == text:
            return text
        text = stripped
    return text


def lemmatize(normalized: str, lexicon: LexiconConfig) -> str:
    """Dictionary lemma with identity fallback; total and deterministic."""
    return lexicon.lemma_map.get(normalized, normalized)


def _kind_of(normalized: str) -> str:
    if _NUMBER_RE.fullmatch(normalized):
        return KIND_NUMBER
    if any(ch.isalnum() for ch in normalized):
        return KIND_WORD
    return KIND_PUNCTUATION


def tokenize(text: str) -> list[Token]:
    """Split text into word, number and punctuation tokens.

    Surface slices plus the skipped whitespace reproduce the input exactly.
    Lemmas start out as the normalized form; `with_lemmas` fills dictionary
    lemmas once a lexicon is available.
    """
    tokens: list[Token] = []
    for match in _TOKEN_RE.finditer(text):
        surface = match.group()
        norm = normalize(surface)
        tokens.append(
            Token(
                surface=surface,
                normalized=norm,
                lemma=norm,
                start=match.start(),
                end=match.end(),
                kind=_kind_of(norm),
            )
        )
    return tokens


def with_lemmas(tokens: Iterable[Token], lexicon: LexiconConfig) -> list[Token]:
    """Return tokens with dictionary lemmas resolved for word tokens."""
    out = []
    for tok in tokens:
        if tok.kind == KIND_WORD:
            lemma = lemmatize(tok.normalized, lexicon)
            if lemma != tok.lemma:
                tok = Token(tok.surface, tok.normalized, lemma, tok.start, tok.end, tok.kind)
        out.append(tok)
    return out


def fuse_quantities(tokens: list[Token], lexicon: LexiconConfig) -> list[Token]:
    """Merge each adjacent (number, unit word) pair into one quantity token.

    The fused token keeps the covered span, concatenates the digits and the
    unit ("1", "TB" -> "1tb") and gets kind=quantity. Everything else passes
    through untouched; the scan is greedy left to right.
    """
    out: list[Token] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if (
            tok.kind == KIND_NUMBER
            and i + 1 < len(tokens)
            and tokens[i + 1].kind == KIND_WORD
            and tokens[i + 1].normalized in lexicon.unit_words
        ):
            unit = tokens[i + 1]
            gap = "" if unit.start == tok.end else " "
            norm = tok.normalized + unit.normalized
            out.append(
                Token(
                    surface=tok.surface + gap + unit.surface,
                    normalized=norm,
                    lemma=norm,
                    start=tok.start,
                    end=unit.end,
                    kind=KIND_QUANTITY,
                )
            )
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def number_constant_view(token: Token) -> str:
    """Dictionary view of a token: numeric content collapses to a constant."""
    if token.kind in (KIND_NUMBER, KIND_QUANTITY):
        return NUMBER_CONSTANT
    return token.lemma


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise LexiconError(f"{path}: {message}")


def _checked_words(values: object, path: str) -> frozenset[str]:
    _require(isinstance(values, list), path, "expected an array of strings")
    words = []
    for i, word in enumerate(values):  # type: ignore[union-attr]
        _require(isinstance(word, str) and word, f"{path}[{i}]", "expected a non-empty string")
        _require(normalize(word) == word, f"{path}[{i}]", f"entry {word!r} is not normalized")
        words.append(word)
    return frozenset(words)


def load_lexicon(document: bytes) -> LexiconConfig:
    """Parse a lexicon JSON document.

    Expected keys: "language", "lemmas" (object), "units", "connectors",
    "boundaries" (arrays of strings). Every entry must already be in
    normalized form so lookups stay idempotent.
    """
    try:
        data = json.loads(document.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise LexiconError(f"document: not valid UTF-8 JSON ({exc})") from exc
    _require(isinstance(data, dict), "document", "expected a JSON object")
    expected = {"language", "lemmas", "units", "connectors", "boundaries"}
    _require(set(data) == expected, "document", f"expected exactly the keys {sorted(expected)}")
    _require(isinstance(data["language"], str) and data["language"], "language", "expected a non-empty string")
    _require(isinstance(data["lemmas"], dict), "lemmas", "expected an object")
    lemma_map: dict[str, str] = {}
    for key, value in data["lemmas"].items():
        _require(isinstance(value, str) and value, f"lemmas[{key!r}]", "expected a non-empty string")
        _require(normalize(key) == key, f"lemmas[{key!r}]", "key is not normalized")
        _require(normalize(value) == value, f"lemmas[{key!r}]", "lemma is not normalized")
        lemma_map[key] = value
    return LexiconConfig(
        language_tag=data["language"],
        lemma_map=lemma_map,
        unit_words=_checked_words(data["units"], "units"),
        connector_words=_checked_words(data["connectors"], "connectors"),
        boundary_words=_checked_words(data["boundaries"], "boundaries"),
    )
