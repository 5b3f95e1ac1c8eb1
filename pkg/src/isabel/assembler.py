"""Package assembly: turn linked entities into covering packages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .kg import KgPackage, KnowledgeGraph, coverage_report, packages_containing_all
from .linking import LinkedEntity

__all__ = ["AssemblyResult", "EmptyLinkSet", "assemble"]


class EmptyLinkSet(ValueError):
    """Raised when assembly is attempted with no linked entities."""


@dataclass(frozen=True)
class AssemblyResult:
    required: tuple[str, ...]
    packages: tuple[KgPackage, ...]
    # Populated only when nothing covers the requirement: rows of
    # (package id, matched count, missing entity ids), best match first.
    diagnostics: tuple[tuple[str, int, tuple[str, ...]], ...]

    @property
    def package_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.packages)


def assemble(kg: KnowledgeGraph, linked: Sequence[LinkedEntity]) -> AssemblyResult:
    """Packages whose members cover every linked entity, in id order.

    When no package covers the requirement the result carries a coverage
    report explaining how close each package came.
    """
    if not linked:
        raise EmptyLinkSet("no linked entities to assemble packages for")
    required = tuple(sorted({link.entity_id for link in linked}))
    matched = tuple(packages_containing_all(kg, required))
    diagnostics: tuple = ()
    if not matched:
        diagnostics = tuple(coverage_report(kg, required))
    return AssemblyResult(required=required, packages=matched, diagnostics=diagnostics)
