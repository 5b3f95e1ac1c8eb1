"""File-backed knowledge graph: schema, loading, validation, package queries.

The graph is an immutable snapshot. Reloading builds a brand new
`KnowledgeGraph`; readers holding the old one are never affected, which is
what makes atomic hot swaps in the HTTP service safe.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .text import (
    KIND_PUNCTUATION,
    NUMBER_CONSTANT,
    LexiconConfig,
    fuse_quantities,
    lemmatize,
    number_constant_view,
    tokenize,
)

__all__ = [
    "KgEntity",
    "KgPackage",
    "PatternRule",
    "KnowledgeGraph",
    "KgError",
    "SchemaError",
    "DuplicateId",
    "DanglingReference",
    "PatternCompileError",
    "EmptyGraph",
    "UnknownEntity",
    "Finding",
    "ValidationReport",
    "load_kg",
    "serialize_kg",
    "validate_kg",
    "packages_containing_all",
    "coverage_report",
    "alias_key",
    "derive_vocabulary",
]


class KgError(ValueError):
    """Base for graph problems; the message starts with the offending path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class SchemaError(KgError):
    pass


class DuplicateId(KgError):
    pass


class DanglingReference(KgError):
    pass


class PatternCompileError(KgError):
    pass


class EmptyGraph(KgError):
    pass


class UnknownEntity(KgError):
    pass


@dataclass(frozen=True)
class KgEntity:
    id: str
    entity_type: str
    aliases: tuple[str, ...]
    description: str


@dataclass(frozen=True)
class KgPackage:
    id: str
    display_name: str
    members: frozenset[str]


@dataclass(frozen=True)
class PatternRule:
    name: str
    expression: str
    entity_type: str
    priority: int
    compiled: re.Pattern = field(compare=False, repr=False)


@dataclass(frozen=True)
class KnowledgeGraph:
    """Loaded graph snapshot with derived lookup structures."""

    entities: Mapping[str, KgEntity]
    packages: Mapping[str, KgPackage]
    rules: tuple[PatternRule, ...]
    extra_vocabulary: frozenset[str]
    lexicon: LexiconConfig
    # Derived at load time, fully determined by the fields above.
    vocabulary: frozenset[str] = field(compare=False)
    alias_index: Mapping[tuple[str, ...], tuple[str, str, str]] = field(compare=False)

    @property
    def entity_types(self) -> frozenset[str]:
        types = {e.entity_type for e in self.entities.values()}
        types.update(rule.entity_type for rule in self.rules)
        return frozenset(types)


@dataclass(frozen=True)
class Finding:
    kind: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def _entity_texts(entity: KgEntity) -> list[str]:
    # The id doubles as a name: underscores become spaces before tokenizing.
    return [entity.id.replace("_", " "), *entity.aliases, entity.description]


def _dictionary_words(text: str, lexicon: LexiconConfig) -> list[str]:
    words = []
    for tok in fuse_quantities(tokenize(text), lexicon):
        if tok.kind == KIND_PUNCTUATION:
            continue
        words.append(lemmatize(number_constant_view(tok), lexicon))
    return words


def derive_vocabulary(
    entities: Iterable[KgEntity],
    extra_vocabulary: Iterable[str],
    lexicon: LexiconConfig,
) -> frozenset[str]:
    """Every lemma reachable from entity names, aliases and descriptions.

    Numeric tokens contribute the shared number constant, so any quantity
    passes the dictionary check once one quantity exists in the graph; the
    constant is always included.
    """
    vocab = {NUMBER_CONSTANT}
    vocab.update(extra_vocabulary)
    for entity in entities:
        for text in _entity_texts(entity):
            vocab.update(_dictionary_words(text, lexicon))
    return frozenset(vocab)


def alias_key(alias: str, lexicon: LexiconConfig) -> tuple[str, ...]:
    """Token-level key an alias must match in the input, quantities fused."""
    return tuple(t.normalized for t in fuse_quantities(tokenize(alias), lexicon))


def _build_alias_index(
    entities: Mapping[str, KgEntity], lexicon: LexiconConfig
) -> dict[tuple[str, ...], tuple[str, str, str]]:
    index: dict[tuple[str, ...], tuple[str, str, str]] = {}
    # Iterate ids in sorted order so on collisions the lowest id wins.
    for eid in sorted(entities):
        entity = entities[eid]
        for alias in entity.aliases:
            index.setdefault(alias_key(alias, lexicon), (eid, alias, entity.entity_type))
    return index


def _check(condition: bool, exc: type[KgError], path: str, message: str) -> None:
    if not condition:
        raise exc(path, message)


def _str_field(obj: dict, key: str, path: str) -> str:
    value = obj.get(key)
    _check(isinstance(value, str) and value != "", SchemaError, f"{path}.{key}", "expected a non-empty string")
    return value


def _exact_keys(obj: object, keys: set[str], path: str) -> dict:
    _check(isinstance(obj, dict), SchemaError, path, "expected a JSON object")
    assert isinstance(obj, dict)
    _check(set(obj) == keys, SchemaError, path, f"expected exactly the keys {sorted(keys)}, got {sorted(obj)}")
    return obj


def load_kg(document: bytes, lexicon: LexiconConfig) -> KnowledgeGraph:
    """Parse and structurally check a knowledge graph document.

    Raises SchemaError / DuplicateId / DanglingReference /
    PatternCompileError / EmptyGraph with the offending path. The returned
    snapshot carries the derived vocabulary and alias index.
    """
    try:
        data = json.loads(document.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError("document", f"not valid UTF-8 JSON ({exc})") from exc
    data = _exact_keys(data, {"entities", "packages", "patterns", "extra_vocabulary"}, "document")

    _check(isinstance(data["entities"], list), SchemaError, "entities", "expected an array")
    _check(len(data["entities"]) > 0, EmptyGraph, "entities", "a graph must define at least one entity")
    entities: dict[str, KgEntity] = {}
    for i, raw in enumerate(data["entities"]):
        path = f"entities[{i}]"
        obj = _exact_keys(raw, {"id", "type", "aliases", "description"}, path)
        eid = _str_field(obj, "id", path)
        _check(eid not in entities, DuplicateId, f"{path}.id", f"entity id {eid!r} already defined")
        _check(isinstance(obj["aliases"], list), SchemaError, f"{path}.aliases", "expected an array")
        aliases = []
        for j, alias in enumerate(obj["aliases"]):
            _check(
                isinstance(alias, str) and alias != "",
                SchemaError,
                f"{path}.aliases[{j}]",
                "expected a non-empty string",
            )
            aliases.append(alias)
        entities[eid] = KgEntity(
            id=eid,
            entity_type=_str_field(obj, "type", path),
            aliases=tuple(aliases),
            description=_str_field(obj, "description", path),
        )

    _check(isinstance(data["packages"], list), SchemaError, "packages", "expected an array")
    packages: dict[str, KgPackage] = {}
    for i, raw in enumerate(data["packages"]):
        path = f"packages[{i}]"
        obj = _exact_keys(raw, {"id", "name", "members"}, path)
        pid = _str_field(obj, "id", path)
        _check(pid not in packages, DuplicateId, f"{path}.id", f"package id {pid!r} already defined")
        _check(
            isinstance(obj["members"], list) and len(obj["members"]) > 0,
            SchemaError,
            f"{path}.members",
            "expected a non-empty array",
        )
        members = set()
        for j, member in enumerate(obj["members"]):
            mpath = f"{path}.members[{j}]"
            _check(isinstance(member, str) and member != "", SchemaError, mpath, "expected a non-empty string")
            _check(member in entities, DanglingReference, mpath, f"unknown entity id {member!r}")
            _check(member not in members, DuplicateId, mpath, f"member {member!r} listed twice")
            members.add(member)
        packages[pid] = KgPackage(id=pid, display_name=_str_field(obj, "name", path), members=frozenset(members))

    _check(isinstance(data["patterns"], list), SchemaError, "patterns", "expected an array")
    rules: list[PatternRule] = []
    seen_names: set[str] = set()
    seen_priorities: set[int] = set()
    for i, raw in enumerate(data["patterns"]):
        path = f"patterns[{i}]"
        obj = _exact_keys(raw, {"name", "expression", "entity_type", "priority"}, path)
        name = _str_field(obj, "name", path)
        _check(name not in seen_names, DuplicateId, f"{path}.name", f"pattern name {name!r} already defined")
        seen_names.add(name)
        priority = obj["priority"]
        _check(
            isinstance(priority, int) and not isinstance(priority, bool),
            SchemaError,
            f"{path}.priority",
            "expected an integer",
        )
        _check(
            priority not in seen_priorities,
            SchemaError,
            f"{path}.priority",
            f"priority {priority} used by two rules; ordering would be ambiguous",
        )
        seen_priorities.add(priority)
        expression = _str_field(obj, "expression", path)
        try:
            compiled = re.compile(expression)
        except re.error as exc:
            raise PatternCompileError(f"{path}.expression", f"invalid regular expression: {exc}") from exc
        rules.append(
            PatternRule(
                name=name,
                expression=expression,
                entity_type=_str_field(obj, "entity_type", path),
                priority=priority,
                compiled=compiled,
            )
        )
    rules.sort(key=lambda r: r.priority)

    _check(isinstance(data["extra_vocabulary"], list), SchemaError, "extra_vocabulary", "expected an array")
    extra = []
    for i, word in enumerate(data["extra_vocabulary"]):
        _check(
            isinstance(word, str) and word != "",
            SchemaError,
            f"extra_vocabulary[{i}]",
            "expected a non-empty string",
        )
        extra.append(word)

    extra_vocabulary = frozenset(extra)
    return KnowledgeGraph(
        entities=entities,
        packages=packages,
        rules=tuple(rules),
        extra_vocabulary=extra_vocabulary,
        lexicon=lexicon,
        vocabulary=derive_vocabulary(entities.values(), extra_vocabulary, lexicon),
        alias_index=_build_alias_index(entities, lexicon),
    )


def serialize_kg(kg: KnowledgeGraph) -> bytes:
    """Canonical document for a graph; load_kg(serialize_kg(kg)) == kg."""
    doc = {
        "entities": [
            {
                "id": e.id,
                "type": e.entity_type,
                "aliases": list(e.aliases),
                "description": e.description,
            }
            for e in (kg.entities[eid] for eid in sorted(kg.entities))
        ],
        "packages": [
            {"id": p.id, "name": p.display_name, "members": sorted(p.members)}
            for p in (kg.packages[pid] for pid in sorted(kg.packages))
        ],
        "patterns": [
            {"name": r.name, "expression": r.expression, "entity_type": r.entity_type, "priority": r.priority}
            for r in kg.rules
        ],
        "extra_vocabulary": sorted(kg.extra_vocabulary),
    }
    return (json.dumps(doc, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def validate_kg(kg: KnowledgeGraph) -> ValidationReport:
    """Semantic lint of a structurally valid graph.

    Reports alias collisions (same token key, different entities), entities
    unreachable from any package, vocabulary drift against a fresh
    derivation, and descriptions with no usable terms.
    """
    findings: list[Finding] = []

    keyed: dict[tuple[str, ...], list[tuple[str, str]]] = {}
    for eid in sorted(kg.entities):
        for alias in kg.entities[eid].aliases:
            keyed.setdefault(alias_key(alias, kg.lexicon), []).append((eid, alias))
    for key, owners in sorted(keyed.items()):
        ids = sorted({eid for eid, _ in owners})
        if len(ids) > 1:
            findings.append(
                Finding(
                    kind="alias_collision",
                    subject=" ".join(key),
                    detail=f"alias resolves to multiple entities: {', '.join(ids)}",
                )
            )

    reachable: set[str] = set()
    for pkg in kg.packages.values():
        reachable.update(pkg.members)
    for eid in sorted(kg.entities):
        if eid not in reachable:
            findings.append(
                Finding(kind="unreachable_entity", subject=eid, detail="entity is not a member of any package")
            )

    fresh = derive_vocabulary(kg.entities.values(), kg.extra_vocabulary, kg.lexicon)
    if fresh != kg.vocabulary:
        missing = sorted(fresh - kg.vocabulary)
        stale = sorted(kg.vocabulary - fresh)
        findings.append(
            Finding(
                kind="vocabulary_drift",
                subject="vocabulary",
                detail=f"stored vocabulary differs from derivation (missing={missing}, stale={stale})",
            )
        )

    for eid in sorted(kg.entities):
        desc = kg.entities[eid].description
        usable = [
            t for t in fuse_quantities(tokenize(desc), kg.lexicon) if t.kind != KIND_PUNCTUATION and t.normalized
        ]
        if not usable:
            findings.append(
                Finding(kind="empty_description", subject=eid, detail="description has no usable terms")
            )

    return ValidationReport(findings=tuple(findings))


def packages_containing_all(kg: KnowledgeGraph, required: Iterable[str]) -> list[KgPackage]:
    """Packages whose member set contains every required entity, id order."""
    wanted = set(required)
    if not wanted:
        raise ValueError("required entity set must not be empty")
    for eid in sorted(wanted):
        if eid not in kg.entities:
            raise UnknownEntity(f"required[{eid}]", f"unknown entity id {eid!r}")
    return [kg.packages[pid] for pid in sorted(kg.packages) if wanted <= kg.packages[pid].members]


def coverage_report(kg: KnowledgeGraph, required: Iterable[str]) -> list[tuple[str, int, tuple[str, ...]]]:
    """Per-package partial coverage: (package id, matched count, missing ids).

    Sorted by matched count descending, then package id; explains an empty
    `packages_containing_all` result.
    """
    wanted = set(required)
    rows = []
    for pid in sorted(kg.packages):
        members = kg.packages[pid].members
        matched = len(wanted & members)
        rows.append((pid, matched, tuple(sorted(wanted - members))))
    rows.sort(key=lambda row: (-row[1], row[0]))
    return rows
