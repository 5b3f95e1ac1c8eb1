"""End-to-end request pipeline and its serialized forms.

Stages: tokenize, fuse quantities, detect mentions, dictionary gate,
sub-sentences, disambiguate, assemble. Every stage is pure given the
config snapshot, so one input always yields one output; wall-clock stage
timings are collected on the side and excluded from the canonical JSON so
serialized results stay byte-stable.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .assembler import AssemblyResult, assemble
from .context import SubSentence, build_subsentences
from .extraction import EntitySpan, OovRejection, extract_entities, filter_oov
from .kg import KnowledgeGraph
from .linking import (
    DEFAULT_K,
    DEFAULT_TAU,
    Candidate,
    LinkedEntity,
    Vectorizer,
    disambiguate,
    fit_vectorizer,
)
from .text import Token, fuse_quantities, tokenize, with_lemmas

__all__ = [
    "MAX_INPUT_CHARS",
    "InputTooLong",
    "SinkUnavailable",
    "ResultIntegrityError",
    "PipelineConfig",
    "PipelineResult",
    "InteractionRecord",
    "JsonlSink",
    "run",
    "check_result",
    "record_of",
    "append_interaction",
    "result_to_document",
    "result_to_json_bytes",
]

MAX_INPUT_CHARS = 10_000


class InputTooLong(ValueError):
    """Input text exceeds MAX_INPUT_CHARS."""


class SinkUnavailable(RuntimeError):
    """The interaction log could not be written; linking still succeeded."""


class ResultIntegrityError(RuntimeError):
    """A structural invariant of a pipeline result does not hold."""


@dataclass(frozen=True)
class PipelineConfig:
    """Immutable snapshot everything in one request is computed from."""

    kg: KnowledgeGraph
    vectorizer: Vectorizer
    tau: float = DEFAULT_TAU
    k: int = DEFAULT_K

    @classmethod
    def from_kg(cls, kg: KnowledgeGraph, tau: float = DEFAULT_TAU, k: int = DEFAULT_K) -> "PipelineConfig":
        return cls(kg=kg, vectorizer=fit_vectorizer(kg), tau=tau, k=k)


@dataclass(frozen=True)
class PipelineResult:
    input_text: str
    tokens: tuple[Token, ...]
    spans: tuple[EntitySpan, ...]
    oov: tuple[OovRejection, ...]
    subsentences: tuple[SubSentence, ...]
    candidates: tuple[Candidate, ...]
    linked: tuple[LinkedEntity, ...]
    assembly: AssemblyResult | None
    notes: tuple[str, ...]
    timings: dict[str, float] = field(compare=False)


@dataclass(frozen=True)
class InteractionRecord:
    """One line of the JSONL interaction log."""

    ts: int  # milliseconds since the UTC epoch
    input_text: str
    linked: tuple[str, ...]
    packages: tuple[str, ...]
    oov: tuple[str, ...]

    def to_json_line(self) -> str:
        doc = {
            "ts": self.ts,
            "input": self.input_text,
            "linked": list(self.linked),
            "packages": list(self.packages),
            "oov": list(self.oov),
        }
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":"), sort_keys=True)


class JsonlSink:
    """Append-only JSONL file; writes are serialized and atomic per record."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, line: str) -> None:
        payload = line + "\n"
        with self._lock:
            try:
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(payload)
            except OSError as exc:
                raise SinkUnavailable(f"cannot append to {self.path}: {exc}") from exc


def record_of(result: PipelineResult) -> InteractionRecord:
    return InteractionRecord(
        ts=time.time_ns() // 1_000_000,
        input_text=result.input_text,
        linked=tuple(link.entity_id for link in result.linked),
        packages=result.assembly.package_ids if result.assembly is not None else (),
        oov=tuple(r.rejected_word for r in result.oov),
    )


def append_interaction(record: InteractionRecord, sink: JsonlSink) -> str:
    """Append one record; returns the written line once acknowledged."""
    line = record.to_json_line()
    sink.append(line)
    return line


def run(text: str, config: PipelineConfig, sink: JsonlSink | None = None) -> PipelineResult:
    """Process one request against a config snapshot.

    Raises InputTooLong for oversized input. A failing sink never fails the
    request; it is reported in the notes instead.
    """
    if len(text) > MAX_INPUT_CHARS:
        raise InputTooLong(f"input is {len(text)} characters, limit is {MAX_INPUT_CHARS}")

    timings: dict[str, float] = {}

    def timed(stage: str, fn):
        started = time.perf_counter()
        value = fn()
        timings[stage] = time.perf_counter() - started
        return value

    lexicon = config.kg.lexicon
    tokens = timed("tokenize", lambda: tokenize(text))
    tokens = timed("fuse", lambda: fuse_quantities(tokens, lexicon))
    tokens = timed("lemmatize", lambda: with_lemmas(tokens, lexicon))
    spans = timed("extract", lambda: extract_entities(tokens, config.kg))
    kept, oov = timed("dictionary", lambda: filter_oov(spans, tokens, config.kg))
    subsentences = timed("subsentences", lambda: build_subsentences(tokens, kept, lexicon))

    candidates: list[Candidate] = []
    linked: list[LinkedEntity] = []
    started = time.perf_counter()
    for i, sub in enumerate(subsentences):
        ranked, best = disambiguate(sub, config.kg, config.vectorizer, config.tau, config.k, subsentence_index=i)
        candidates.extend(ranked)
        if best is not None:
            linked.append(best)
    timings["disambiguate"] = time.perf_counter() - started

    notes: list[str] = []
    if not spans:
        notes.append("no entity mentions detected")
    elif not kept:
        notes.append("all detected mentions were rejected by the dictionary gate")
    for rejection in oov:
        notes.append(f"out-of-vocabulary word: {rejection.rejected_word}")

    by_type: dict[str, set[str]] = {}
    for link in linked:
        anchor_type = subsentences[link.subsentence_index].anchor.entity_type
        by_type.setdefault(anchor_type, set()).add(link.entity_id)
    for anchor_type in sorted(by_type):
        ids = by_type[anchor_type]
        if len(ids) > 1:
            notes.append(f"conflicting links for type {anchor_type}: {', '.join(sorted(ids))}")

    assembly = None
    if linked:
        assembly = timed("assemble", lambda: assemble(config.kg, linked))
        if not assembly.packages:
            notes.append("no package covers all linked entities")
    elif subsentences:
        notes.append("no entity scored above the linking threshold")

    result = PipelineResult(
        input_text=text,
        tokens=tuple(tokens),
        spans=tuple(spans),
        oov=tuple(oov),
        subsentences=tuple(subsentences),
        candidates=tuple(candidates),
        linked=tuple(linked),
        assembly=assembly,
        notes=tuple(notes),
        timings=timings,
    )
    check_result(result, config)

    if sink is not None:
        started = time.perf_counter()
        try:
            append_interaction(record_of(result), sink)
        except SinkUnavailable as exc:
            notes.append(f"interaction log unavailable: {exc}")
            result = dataclasses.replace(result, notes=tuple(notes))
        timings["log"] = time.perf_counter() - started

    return result


def _fail(message: str) -> None:
    raise ResultIntegrityError(message)


def check_result(result: PipelineResult, config: PipelineConfig) -> None:
    """Structural invariants a well-formed result must satisfy."""
    n = len(result.tokens)
    for span in result.spans:
        if not (0 <= span.start < span.end <= n):
            _fail(f"span {span} out of token range 0..{n}")
    for a, b in zip(result.spans, result.spans[1:]):
        if (a.start, a.end) > (b.start, b.end):
            _fail("spans are not in token order")
    kept_spans = {(s.start, s.end) for s in result.spans} - {(r.start, r.end) for r in result.oov}
    for sub in result.subsentences:
        if not sub.token_indices:
            _fail("sub-sentence with no tokens")
        if any(not 0 <= i < n for i in sub.token_indices):
            _fail("sub-sentence token index out of range")
        if (sub.anchor.start, sub.anchor.end) not in kept_spans:
            _fail(f"sub-sentence anchor {sub.anchor} is not a kept span")
        if not set(range(sub.anchor.start, sub.anchor.end)) <= set(sub.token_indices):
            _fail("sub-sentence does not cover its anchor")
        if not sub.rendered:
            _fail("sub-sentence rendered form is empty")
    n_subs = len(result.subsentences)
    for item in (*result.candidates, *result.linked):
        if not 0 <= item.subsentence_index < n_subs:
            _fail(f"{item} references a missing sub-sentence")
        if item.entity_id not in config.kg.entities:
            _fail(f"{item} references an unknown entity")
    for link in result.linked:
        if link.score < config.tau:
            _fail(f"linked entity below threshold: {link}")
    if result.assembly is not None and not result.linked:
        _fail("assembly present without linked entities")
    if result.linked and result.assembly is None:
        _fail("linked entities without an assembly")
    if result.assembly is not None:
        if result.assembly.required != tuple(sorted({l.entity_id for l in result.linked})):
            _fail("assembly requirement differs from linked entities")


def result_to_document(result: PipelineResult) -> dict:
    """Canonical JSON-ready form of a result; excludes timings."""
    spans = [
        {
            "start": s.start,
            "end": s.end,
            "entity_type": s.entity_type,
            "source": s.source,
            "matched_rule": s.matched_rule,
        }
        for s in result.spans
    ]
    assembly = None
    if result.assembly is not None:
        assembly = {
            "required": list(result.assembly.required),
            "packages": [
                {"id": p.id, "name": p.display_name, "members": sorted(p.members)}
                for p in result.assembly.packages
            ],
            "diagnostics": [
                {"package": pid, "matched": matched, "missing": list(missing)}
                for pid, matched, missing in result.assembly.diagnostics
            ],
        }
    return {
        "input": result.input_text,
        "tokens": [
            {
                "surface": t.surface,
                "normalized": t.normalized,
                "lemma": t.lemma,
                "start": t.start,
                "end": t.end,
                "kind": t.kind,
            }
            for t in result.tokens
        ],
        "entities": spans,
        "oov": [
            {"start": r.start, "end": r.end, "rejected_word": r.rejected_word} for r in result.oov
        ],
        "subsentences": [
            {
                "rendered": sub.rendered,
                "token_indices": list(sub.token_indices),
                "anchor": {
                    "start": sub.anchor.start,
                    "end": sub.anchor.end,
                    "entity_type": sub.anchor.entity_type,
                    "source": sub.anchor.source,
                    "matched_rule": sub.anchor.matched_rule,
                },
            }
            for sub in result.subsentences
        ],
        "candidates": [
            {"entity_id": c.entity_id, "score": c.score, "subsentence_index": c.subsentence_index}
            for c in result.candidates
        ],
        "linked": [
            {"entity_id": l.entity_id, "score": l.score, "subsentence_index": l.subsentence_index}
            for l in result.linked
        ],
        "assembly": assembly,
        "notes": list(result.notes),
    }


def result_to_json_bytes(result: PipelineResult) -> bytes:
    """Single serialization path used by both the CLI and the HTTP service."""
    document = result_to_document(result)
    return json.dumps(document, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")
