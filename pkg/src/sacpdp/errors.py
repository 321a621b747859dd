"""Exception hierarchy shared by every sacpdp module.

Parse-time errors carry a source location (line/column) whenever the failing
construct came from a document; semantic errors name the offending identifier.
"""

from __future__ import annotations


class SacError(Exception):
    """Base class for all sacpdp errors."""


class DocumentError(SacError):
    """A document violates its schema in a way no more specific error covers."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self) -> str:  # pragma: no cover - formatting only
        base = super().__str__()
        if self.line:
            return f"{base} (line {self.line}, column {self.column})"
        return base


class MalformedXmlError(DocumentError):
    """The raw XML could not be parsed at all."""


class UnknownElementError(DocumentError):
    """An element not part of the schema appeared in a document."""


class DuplicateRuleNameError(DocumentError):
    """Two access rules in one policy document share a name."""


class UnknownOntologyRefError(DocumentError):
    """An ontologyRef attribute names none of SO, OO, AO, AtO."""


class UnknownConditionTypeError(DocumentError):
    """A Condition element's type attribute is not a known operator or connective."""


class MissingCategoryError(DocumentError):
    """A request document is missing one of its mandatory categories."""


class OntologyError(SacError):
    """Base for ontology construction and lookup failures."""


class CycleDetectedError(OntologyError):
    """An is-a or role-inheritance relation contains a cycle."""

    def __init__(self, kind: str, cycle: list[str]) -> None:
        self.kind = kind
        self.cycle = list(cycle)
        path = " -> ".join(self.cycle)
        super().__init__(f"cycle in {kind} edges: {path}")


class DuplicateIdError(OntologyError):
    """The same node id was declared twice in one ontology document."""


class DanglingReferenceError(OntologyError):
    """An edge or arc references a node id that was never declared."""


class WrongOntologyTagError(OntologyError):
    """A reference's ontology tag does not match the graph it is used against."""


class UnknownConceptError(OntologyError):
    """A lookup named a node id that is not registered in the graph."""


class UnknownPurposeError(SacError):
    """A purpose id does not occur in the active purpose tree."""


class TypeMismatchError(SacError):
    """A condition compared values of incompatible kinds; values are never coerced."""


class ConfigError(SacError):
    """A gateway or bundle configuration file is unusable."""


class ActivationError(SacError):
    """A policy store could not be activated; carries the full findings list."""

    def __init__(self, findings: list[str]) -> None:
        self.findings = list(findings)
        super().__init__("; ".join(self.findings) or "activation failed")
