"""Syntax tree for ``.fql`` declarations.

Every node records where it came from; spans are ignored by equality so
that a reparsed pretty-print compares equal to the original tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .lexer import Span

_NOSPAN = Span("<none>", 0, 0)


def _span():
    return field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class PathNode:
    start: str
    steps: tuple[str, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class LitNode:
    type: str
    value: object
    span: Span = _span()


@dataclass(frozen=True)
class NullNode:
    """``null`` in a mapping, or ``?label`` in an instance (label set)."""

    label: str | None = None
    span: Span = _span()


@dataclass(frozen=True)
class RefNode:
    """Bare row id or integer, resolved by the generator it is assigned to."""

    text: str
    span: Span = _span()


@dataclass(frozen=True)
class CallNode:
    fn: str
    args: tuple["ExprNode", ...] = ()
    span: Span = _span()


ExprNode = Union[PathNode, LitNode, NullNode, RefNode, CallNode]


@dataclass(frozen=True)
class FkDecl:
    name: str
    source: str
    target: str
    span: Span = _span()


@dataclass(frozen=True)
class AttrDecl:
    name: str
    source: str
    type: str
    span: Span = _span()


@dataclass(frozen=True)
class EquationDecl:
    label: str | None
    lhs: PathNode
    rhs: PathNode
    span: Span = _span()


@dataclass(frozen=True)
class SchemaDecl:
    name: str
    entities: tuple[str, ...] = ()
    fks: tuple[FkDecl, ...] = ()
    attrs: tuple[AttrDecl, ...] = ()
    equations: tuple[EquationDecl, ...] = ()
    span: Span = _span()
    entity_spans: tuple[Span, ...] = _span()


@dataclass(frozen=True)
class EntityMapDecl:
    source: str
    target: str
    span: Span = _span()


@dataclass(frozen=True)
class GenMapDecl:
    kind: str  # "fk" or "attr"
    entity: str | None
    name: str
    image: ExprNode
    span: Span = _span()


@dataclass(frozen=True)
class MappingDecl:
    name: str
    source: str
    target: str
    entities: tuple[EntityMapDecl, ...] = ()
    generators: tuple[GenMapDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class AssignDecl:
    name: str
    value: ExprNode
    span: Span = _span()


@dataclass(frozen=True)
class RowDecl:
    id: str
    assignments: tuple[AssignDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class EntityRowsDecl:
    entity: str
    rows: tuple[RowDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class ValueEquationDecl:
    lhs: ExprNode
    rhs: ExprNode
    span: Span = _span()


@dataclass(frozen=True)
class InstanceDecl:
    name: str
    schema: str
    blocks: tuple[EntityRowsDecl, ...] = ()
    equations: tuple[ValueEquationDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class KeyDecl:
    entity: str
    paths: tuple[PathNode, ...]
    span: Span = _span()


@dataclass(frozen=True)
class MergeDecl:
    name: str
    overlap: str
    left: str
    right: str
    keys: tuple[KeyDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class ConditionDecl:
    attr: str
    op: str
    value: LitNode
    span: Span = _span()


@dataclass(frozen=True)
class FilterDecl:
    name: str
    schema: str
    entity: str
    conditions: tuple[ConditionDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class StepDecl:
    kind: str  # delta, sigma or filter
    target: str
    span: Span = _span()


@dataclass(frozen=True)
class MigrateDecl:
    name: str
    steps: tuple[StepDecl, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class ImportDecl:
    path: str
    span: Span = _span()


Declaration = Union[SchemaDecl, MappingDecl, InstanceDecl, MergeDecl, FilterDecl,
                    MigrateDecl, ImportDecl]
