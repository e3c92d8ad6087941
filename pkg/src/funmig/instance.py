"""Instance data over a schema: rows, foreign-key and attribute assignments.

Rows are opaque string ids scoped per entity.  Attribute values may be
labelled nulls or symbolic terms; the instance keeps the equations asserted
between them and answers value equality through a congruence closure.
Instances are treated as immutable values; :class:`InstanceBuilder` is the
mutable front door.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping

from .catcore import Path, Schema
from .errors import DanglingForeignKey, TypeMismatch, UnknownEntity
from .udf import DEFAULT_REGISTRY, UdfRegistry
from .values import Lit, Null, Term, Value, ValueClosure, format_value, lit, nulls_in


class NullFactory:
    """Deterministic labels of the form ``<entity>_<generator>_<counter>``."""

    def __init__(self, used: Iterable[str] = ()) -> None:
        self.used = set(used)
        self._counters: dict[tuple[str, str], int] = {}

    def fresh(self, entity: str, generator: str, type_: str) -> Null:
        n = self._counters.get((entity, generator), 0)
        while True:
            n += 1
            label = f"{entity}_{generator}_{n}"
            if label not in self.used:
                break
        self._counters[(entity, generator)] = n
        self.used.add(label)
        return Null(label, type_)


@dataclass(frozen=True, eq=False)
class Instance:
    schema: Schema
    rows: Mapping[str, tuple[str, ...]]
    fks: Mapping[tuple[str, str], Mapping[str, str]]
    attrs: Mapping[tuple[str, str], Mapping[str, Value]]
    equations: tuple[tuple[Value, Value], ...] = ()
    name: str = ""
    lineage: Mapping[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    registry: UdfRegistry = field(default=DEFAULT_REGISTRY, repr=False)

    @classmethod
    def empty(cls, schema: Schema, name: str = "") -> "Instance":
        return InstanceBuilder(schema, name=name).finalize()

    @cached_property
    def closure(self) -> ValueClosure:
        cc = ValueClosure(self.registry)
        for v in self.values():
            cc.add(v)
        for a, b in self.equations:
            cc.union(a, b)
        return cc

    def values(self) -> Iterator[Value]:
        for column in self.attrs.values():
            yield from column.values()

    def null_labels(self) -> set[str]:
        labels = set()
        for v in self.values():
            labels.update(n.label for n in nulls_in(v))
        for a, b in self.equations:
            for v in (a, b):
                labels.update(n.label for n in nulls_in(v))
        return labels

    def row_ids(self, entity: str) -> tuple[str, ...]:
        try:
            return self.rows[entity]
        except KeyError:
            raise UnknownEntity(f"{self.schema.name}: unknown entity {entity!r}") from None

    def size(self) -> dict[str, int]:
        return {e: len(self.rows[e]) for e in self.schema.entities}

    def fk_value(self, entity: str, fk: str, row: str) -> str:
        return self.fks[(entity, fk)][row]

    def attr_value(self, entity: str, attr: str, row: str) -> Value:
        return self.attrs[(entity, attr)][row]

    def value_equal(self, a: Value, b: Value, atol: float = 0.0) -> bool:
        return self.closure.equal(a, b, atol)

    def null_classes(self) -> list[frozenset[Value]]:
        return self.closure.classes()

    def _key(self):
        rows = {e: frozenset(ids) for e, ids in self.rows.items()}
        fks = {k: dict(v) for k, v in self.fks.items()}
        attrs = {k: dict(v) for k, v in self.attrs.items()}
        classes = frozenset(self.closure.classes())
        return (self.schema, rows, fks, attrs, classes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self._key() == other._key()

    __hash__ = None  # type: ignore[assignment]

    def describe(self) -> str:
        counts = ", ".join(f"{e}={n}" for e, n in self.size().items())
        return f"instance {self.name or '<anon>'} : {self.schema.name} ({counts})"


class InstanceBuilder:
    """Accumulate rows and assignments, then :meth:`finalize` into an Instance."""

    def __init__(self, schema: Schema, name: str = "",
                 registry: UdfRegistry | None = None) -> None:
        self.schema = schema
        self.name = name
        self.registry = registry or DEFAULT_REGISTRY
        self.rows: dict[str, list[str]] = {e: [] for e in schema.entities}
        self._row_sets: dict[str, set[str]] = {e: set() for e in schema.entities}
        self.fks: dict[tuple[str, str], dict[str, str]] = {
            (f.source, f.name): {} for f in schema.fks}
        self.attrs: dict[tuple[str, str], dict[str, Value]] = {
            (a.source, a.name): {} for a in schema.attrs}
        self.equations: list[tuple[Value, Value]] = []
        self.lineage: dict[tuple[str, str], tuple[str, ...]] = {}

    def _check_entity(self, entity: str) -> None:
        if entity not in self.rows:
            raise UnknownEntity(f"{self.schema.name}: unknown entity {entity!r}")

    def _check_row(self, entity: str, row: str) -> None:
        self._check_entity(entity)
        if row not in self._row_sets[entity]:
            raise UnknownEntity(f"{entity} has no row {row!r}")

    def add_row(self, entity: str, row: str, lineage: Iterable[str] = ()) -> "InstanceBuilder":
        self._check_entity(entity)
        row = str(row)
        if row in self._row_sets[entity]:
            raise TypeMismatch(f"{entity} row {row!r} added twice")
        self.rows[entity].append(row)
        self._row_sets[entity].add(row)
        lineage = tuple(lineage)
        if lineage:
            self.lineage[(entity, row)] = lineage
        return self

    def has_row(self, entity: str, row: str) -> bool:
        return row in self._row_sets.get(entity, ())

    def set_fk(self, entity: str, fk: str, row: str, target: str) -> "InstanceBuilder":
        self.schema.fk(entity, fk)
        self._check_row(entity, row)
        self.fks[(entity, fk)][row] = str(target)
        return self

    def set_attr(self, entity: str, attr: str, row: str, value: Value | object) -> "InstanceBuilder":
        a = self.schema.attr(entity, attr)
        self._check_row(entity, row)
        if not isinstance(value, (Lit, Null, Term)):
            value = lit(a.type, value)
        if value.type != a.type:
            raise TypeMismatch(f"{entity}.{attr} is {a.type}, got {format_value(value)}")
        self.attrs[(entity, attr)][row] = value
        return self

    def equate(self, a: Value, b: Value) -> "InstanceBuilder":
        self.equations.append((a, b))
        return self

    def finalize(self) -> Instance:
        for (entity, fk), column in self.fks.items():
            target = self.schema.fk(entity, fk).target
            for row in self.rows[entity]:
                if row not in column:
                    raise DanglingForeignKey(f"{entity}.{fk} is unset on row {row!r}")
                if column[row] not in self._row_sets[target]:
                    raise DanglingForeignKey(
                        f"{entity}.{fk} on row {row!r} points to missing {target} row "
                        f"{column[row]!r}")
        used = set()
        for column in self.attrs.values():
            for v in column.values():
                used.update(n.label for n in nulls_in(v))
        for a, b in self.equations:
            used.update(n.label for n in nulls_in(a))
            used.update(n.label for n in nulls_in(b))
        nulls = NullFactory(used)
        attrs: dict[tuple[str, str], dict[str, Value]] = {}
        for (entity, name), column in self.attrs.items():
            type_ = self.schema.attr(entity, name).type
            attrs[(entity, name)] = {
                row: column[row] if row in column else nulls.fresh(entity, name, type_)
                for row in self.rows[entity]}
        inst = Instance(
            schema=self.schema,
            rows={e: tuple(ids) for e, ids in self.rows.items()},
            fks={k: {r: col[r] for r in self.rows[k[0]]} for k, col in self.fks.items()},
            attrs=attrs,
            equations=tuple(self.equations),
            name=self.name,
            lineage=dict(self.lineage),
            registry=self.registry,
        )
        inst.closure  # surfaces contradictions at construction time
        return inst


def builder_from(inst: Instance) -> InstanceBuilder:
    b = InstanceBuilder(inst.schema, inst.name, inst.registry)
    for e in inst.schema.entities:
        for r in inst.rows[e]:
            b.add_row(e, r, inst.lineage.get((e, r), ()))
    for key, column in inst.fks.items():
        b.fks[key].update(column)
    for key, column in inst.attrs.items():
        b.attrs[key].update(column)
    b.equations.extend(inst.equations)
    return b


# ---------------------------------------------------------------------------
# evaluation and checking

def evaluate_path(inst: Instance, row: str, p: Path) -> str | Value:
    """Follow ``p`` from ``row``; returns a row id or, for attribute paths, a value."""
    if row not in inst.rows.get(p.start, ()):
        raise UnknownEntity(f"{p.start} has no row {row!r}")
    entity = p.start
    for step in p.steps:
        gen = inst.schema.generator(entity, step)
        if gen.target in inst.rows:
            row = inst.fks[(entity, step)][row]
            entity = gen.target
        else:
            return inst.attrs[(entity, step)][row]
    return row


@dataclass(frozen=True)
class Violation:
    equation: str
    entity: str
    row: str
    lhs: str | Value
    rhs: str | Value

    def __str__(self) -> str:
        def show(x):
            return x if isinstance(x, str) else format_value(x)
        return f"{self.equation}@{self.entity}:{self.row}  lhs={show(self.lhs)}  rhs={show(self.rhs)}"

    def to_json(self) -> dict:
        def show(x):
            return {"row": x} if isinstance(x, str) else {"value": format_value(x)}
        return {"equation": self.equation, "entity": self.entity, "row": self.row,
                "lhs": show(self.lhs), "rhs": show(self.rhs)}


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...] = ()

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self) -> Iterator[Violation]:
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_instance(inst: Instance, atol: float = 0.0) -> ViolationReport:
    out = []
    for i, eq in enumerate(inst.schema.equations):
        label = eq.label or f"equation#{i + 1}"
        for row in inst.rows[eq.entity]:
            left = evaluate_path(inst, row, eq.lhs)
            right = evaluate_path(inst, row, eq.rhs)
            if eq.lhs.is_attribute:
                same = inst.value_equal(left, right, atol)
            else:
                same = left == right
            if not same:
                out.append(Violation(label, eq.entity, row, left, right))
    return ViolationReport(tuple(out))


def equate_nulls(inst: Instance, a: Value, b: Value) -> Instance:
    """Return a copy of ``inst`` in which ``a`` and ``b`` are the same value.

    Raises Contradiction when that would equate distinct literals; ``inst``
    itself is never modified.
    """
    if a.type != b.type:
        raise TypeMismatch(f"cannot equate {format_value(a)} and {format_value(b)}")
    if inst.value_equal(a, b):
        return inst
    out = Instance(inst.schema, inst.rows, inst.fks, inst.attrs,
                   inst.equations + ((a, b),), inst.name, inst.lineage, inst.registry)
    out.closure
    return out


def relabel_rows(inst: Instance, renaming: Mapping[str, Mapping[str, str]]) -> Instance:
    """Rename row ids per entity (ids missing from ``renaming`` are kept)."""
    def new(e: str, r: str) -> str:
        return renaming.get(e, {}).get(r, r)

    rows = {e: tuple(new(e, r) for r in ids) for e, ids in inst.rows.items()}
    fks = {}
    for (e, f), column in inst.fks.items():
        target = inst.schema.fk(e, f).target
        fks[(e, f)] = {new(e, r): new(target, t) for r, t in column.items()}
    attrs = {(e, a): {new(e, r): v for r, v in column.items()}
             for (e, a), column in inst.attrs.items()}
    lineage = {(e, new(e, r)): src for (e, r), src in inst.lineage.items()}
    return Instance(inst.schema, rows, fks, attrs, inst.equations, inst.name, lineage,
                    inst.registry)


def provenance_tag(db: str, entity: str, row: str) -> str:
    return f"src:{db}:{entity}:{row}"


__all__ = [
    "Instance", "InstanceBuilder", "NullFactory", "Violation", "ViolationReport",
    "builder_from", "check_instance", "equate_nulls", "evaluate_path", "provenance_tag",
    "relabel_rows",
]
