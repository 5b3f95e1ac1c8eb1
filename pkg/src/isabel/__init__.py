"""Natural-language search over a file-backed product knowledge graph.

Free text goes in; detected entity mentions, dictionary rejections,
disambiguated entity links and covering packages come out. See the
README for the file formats and the CLI/HTTP surfaces.
"""

from .assembler import AssemblyResult, EmptyLinkSet, assemble
from .context import SubSentence, build_subsentences
from .extraction import (
    EntitySpan,
    OovRejection,
    extract_entities,
    extract_gazetteer,
    extract_pattern,
    filter_oov,
)
from .kg import (
    DanglingReference,
    DuplicateId,
    EmptyGraph,
    Finding,
    KgEntity,
    KgError,
    KgPackage,
    KnowledgeGraph,
    PatternCompileError,
    PatternRule,
    SchemaError,
    UnknownEntity,
    ValidationReport,
    coverage_report,
    load_kg,
    packages_containing_all,
    serialize_kg,
    validate_kg,
)
from .linking import (
    Candidate,
    EmptyCorpus,
    LinkedEntity,
    Vectorizer,
    cosine,
    disambiguate,
    fit_vectorizer,
    vectorize,
)
from .pipeline import (
    InputTooLong,
    InteractionRecord,
    JsonlSink,
    PipelineConfig,
    PipelineResult,
    ResultIntegrityError,
    SinkUnavailable,
    append_interaction,
    result_to_document,
    result_to_json_bytes,
    run,
)
from .text import (
    LexiconConfig,
    LexiconError,
    Token,
    fuse_quantities,
    lemmatize,
    load_lexicon,
    normalize,
    number_constant_view,
    tokenize,
)

__version__ = "0.1.0"
