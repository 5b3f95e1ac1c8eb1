"""Command line front end: link, repl, serve, validate-kg.

Graph and lexicon default to the bundled gaming fixture; ISABEL_KG and
ISABEL_PORT provide environment fallbacks, explicit flags win.

Exit codes: 0 success (a request with no links is still a well-formed
answer), 2 graph or lexicon loading/validation failure, 3 bad input text.
validate-kg: 0 clean report, 1 findings, 2 the document does not load.
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
from pathlib import Path

from .kg import KgError, load_kg, validate_kg
from .linking import DEFAULT_K, DEFAULT_TAU
from .pipeline import (
    InputTooLong,
    JsonlSink,
    PipelineConfig,
    PipelineResult,
    result_to_json_bytes,
    run,
)
from .service import DEFAULT_PORT, SnapshotError, load_snapshot
from .text import LexiconError, load_lexicon

__all__ = ["main", "build_parser", "format_result"]

ENV_KG = "ISABEL_KG"
ENV_PORT = "ISABEL_PORT"


def _bundled(name: str) -> Path:
    return Path(str(importlib.resources.files("isabel.data").joinpath(name)))


def _kg_path(args: argparse.Namespace) -> Path:
    if args.kg is not None:
        return Path(args.kg)
    from_env = os.environ.get(ENV_KG)
    if from_env:
        return Path(from_env)
    return _bundled("kg_gaming.json")


def _lexicon_path(args: argparse.Namespace) -> Path:
    if args.lexicon is not None:
        return Path(args.lexicon)
    return _bundled("lexicon_en.json")


def _port(args: argparse.Namespace) -> int:
    if args.port is not None:
        return args.port
    from_env = os.environ.get(ENV_PORT)
    if from_env:
        try:
            return int(from_env)
        except ValueError:
            raise SystemExit(f"{ENV_PORT} must be an integer, got {from_env!r}")
    return DEFAULT_PORT


def _load(args: argparse.Namespace) -> PipelineConfig | None:
    try:
        return load_snapshot(_kg_path(args), _lexicon_path(args), tau=args.tau, k=args.k)
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def format_result(result: PipelineResult) -> str:
    """Human-oriented rendering used when --json is not given."""
    lines = [f"input: {result.input_text}"]
    if result.spans:
        lines.append("entities:")
        for span in result.spans:
            text = " ".join(t.surface for t in result.tokens[span.start : span.end])
            lines.append(
                f"  [{span.start}:{span.end}] {span.entity_type} via {span.source} ({span.matched_rule}): {text!r}"
            )
    if result.oov:
        lines.append("rejected words:")
        for rejection in result.oov:
            lines.append(f"  {rejection.rejected_word}")
    if result.subsentences:
        lines.append("subsentences:")
        for i, sub in enumerate(result.subsentences):
            lines.append(f"  {i}: {sub.rendered!r}")
    if result.linked:
        lines.append("linked:")
        for link in result.linked:
            lines.append(f"  {link.entity_id} score={link.score:.4f} subsentence={link.subsentence_index}")
    if result.assembly is not None and result.assembly.packages:
        lines.append("packages:")
        for pkg in result.assembly.packages:
            lines.append(f"  {pkg.id} ({pkg.display_name}): {', '.join(sorted(pkg.members))}")
    if result.assembly is not None and result.assembly.diagnostics:
        lines.append("closest packages:")
        for pid, matched, missing in result.assembly.diagnostics:
            lines.append(f"  {pid}: {matched} matched, missing {', '.join(missing) or 'nothing'}")
    if result.notes:
        lines.append("notes:")
        for note in result.notes:
            lines.append(f"  {note}")
    return "\n".join(lines)


def _emit(result: PipelineResult, as_json: bool) -> None:
    if as_json:
        print(result_to_json_bytes(result).decode("utf-8"))
    else:
        print(format_result(result))


def cmd_link(args: argparse.Namespace) -> int:
    config = _load(args)
    if config is None:
        return 2
    sink = JsonlSink(args.log) if args.log else None
    try:
        result = run(args.text, config, sink=sink)
    except InputTooLong as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    _emit(result, args.json)
    return 0


def cmd_repl(args: argparse.Namespace) -> int:
    config = _load(args)
    if config is None:
        return 2
    sink = JsonlSink(args.log) if args.log else None
    stream = sys.stdin
    if stream.isatty():
        print("enter one request per line (ctrl-d to quit)", file=sys.stderr)
    for raw in stream:
        text = raw.rstrip("\n")
        if not text.strip():
            continue
        try:
            result = run(text, config, sink=sink)
        except InputTooLong as exc:
            print(f"error: {exc}", file=sys.stderr)
            continue
        _emit(result, args.json)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    try:
        serve(
            _kg_path(args),
            _lexicon_path(args),
            host=args.host,
            port=_port(args),
            log_path=args.log,
            tau=args.tau,
            k=args.k,
        )
    except SnapshotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_validate_kg(args: argparse.Namespace) -> int:
    try:
        lexicon = load_lexicon(_lexicon_path(args).read_bytes())
        kg = load_kg(_kg_path(args).read_bytes(), lexicon)
    except (OSError, LexiconError, KgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = validate_kg(kg)
    if report.ok:
        print(f"ok: {len(kg.entities)} entities, {len(kg.packages)} packages, {len(kg.rules)} patterns")
        return 0
    for finding in report.findings:
        print(f"{finding.kind} [{finding.subject}]: {finding.detail}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isabel", description="entity-linking search over a product graph")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--kg", help=f"knowledge graph JSON path (default: ${ENV_KG} or bundled fixture)")
        p.add_argument("--lexicon", help="lexicon JSON path (default: bundled English lexicon)")
        p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="linking score threshold")
        p.add_argument("--k", type=int, default=DEFAULT_K, help="candidates kept per sub-sentence")

    p_link = sub.add_parser("link", help="process one request and print the outcome")
    common(p_link)
    p_link.add_argument("--log", help="append an interaction record to this JSONL file")
    p_link.add_argument("--json", action="store_true", help="print the canonical JSON document")
    p_link.add_argument("text", help="free-text request")
    p_link.set_defaults(handler=cmd_link)

    p_repl = sub.add_parser("repl", help="process one request per stdin line")
    common(p_repl)
    p_repl.add_argument("--log", help="append interaction records to this JSONL file")
    p_repl.add_argument("--json", action="store_true", help="print canonical JSON documents")
    p_repl.set_defaults(handler=cmd_repl)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    common(p_serve)
    p_serve.add_argument("--log", help="append interaction records to this JSONL file")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, help=f"default: ${ENV_PORT} or {DEFAULT_PORT}")
    p_serve.set_defaults(handler=cmd_serve)

    p_validate = sub.add_parser("validate-kg", help="check a graph document and print findings")
    common(p_validate)
    p_validate.set_defaults(handler=cmd_validate_kg)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
