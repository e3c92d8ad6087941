"""Schemas as finitely presented categories, and a bounded path-equality prover.

A schema has entities (objects), foreign keys (generating arrows between
entities), attributes (arrows from an entity into a base type) and path
equations.  Two paths are equal when one can be rewritten into the other by
replacing subpaths with equal subpaths, using the equations in either
direction.  That question is undecidable in general, so
:func:`decide_path_equality` searches a bounded neighbourhood and reports
``NotProvableWithinBound`` rather than ever claiming two paths differ.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator

from .errors import TypeMismatch, UnknownEntity, UnknownGenerator

BASE_TYPES = ("Int", "Float", "String", "Bool")
IDENTITY = "id"
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*'*\Z")

DEFAULT_DEPTH = 64
DEFAULT_MAX_NODES = 200_000


@dataclass(frozen=True)
class Fk:
    name: str
    source: str
    target: str


@dataclass(frozen=True)
class Attr:
    name: str
    source: str
    type: str

    @property
    def target(self) -> str:
        return self.type


@dataclass(frozen=True)
class Path:
    """A word of generators read left to right from ``start``.

    ``target`` is the codomain: an entity, or a base type when the last
    step is an attribute.  Build paths with :meth:`Schema.path` so the
    target is computed and checked.
    """

    start: str
    steps: tuple[str, ...] = ()
    target: str = ""

    def __post_init__(self) -> None:
        if not self.target:
            if self.steps:
                raise TypeMismatch("a non-identity path needs an explicit target")
            object.__setattr__(self, "target", self.start)

    @property
    def is_identity(self) -> bool:
        return not self.steps

    @property
    def is_attribute(self) -> bool:
        return self.target in BASE_TYPES

    def __len__(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return " . ".join((self.start,) + (self.steps or (IDENTITY,)))


def identity(entity: str) -> Path:
    return Path(entity, (), entity)


def compose(p: Path, q: Path) -> Path:
    """Concatenate ``p`` then ``q``; identity paths are two-sided units."""
    if p.is_attribute:
        raise TypeMismatch(f"cannot extend attribute-valued path {p}")
    if p.target != q.start:
        raise TypeMismatch(f"{p} ends at {p.target} but {q} starts at {q.start}")
    return Path(p.start, p.steps + q.steps, q.target)


@dataclass(frozen=True)
class Equation:
    lhs: Path
    rhs: Path
    label: str | None = None

    @property
    def entity(self) -> str:
        return self.lhs.start

    def __str__(self) -> str:
        head = f"{self.label}: " if self.label else ""
        return f"{head}{self.lhs} = {self.rhs}"


@dataclass(frozen=True)
class Schema:
    name: str
    entities: tuple[str, ...] = ()
    fks: tuple[Fk, ...] = ()
    attrs: tuple[Attr, ...] = ()
    equations: tuple[Equation, ...] = ()

    @cached_property
    def _entity_set(self) -> frozenset[str]:
        return frozenset(self.entities)

    @cached_property
    def _generators(self) -> dict[tuple[str, str], Fk | Attr]:
        table: dict[tuple[str, str], Fk | Attr] = {}
        for gen in (*self.fks, *self.attrs):
            table.setdefault((gen.source, gen.name), gen)
        return table

    def has_entity(self, name: str) -> bool:
        return name in self._entity_set

    def generator(self, entity: str, name: str) -> Fk | Attr:
        try:
            return self._generators[(entity, name)]
        except KeyError:
            raise UnknownGenerator(f"{self.name}: no generator {name!r} on {entity}") from None

    def fk(self, entity: str, name: str) -> Fk:
        gen = self.generator(entity, name)
        if not isinstance(gen, Fk):
            raise TypeMismatch(f"{entity}.{name} is an attribute, not a foreign key")
        return gen

    def attr(self, entity: str, name: str) -> Attr:
        gen = self.generator(entity, name)
        if not isinstance(gen, Attr):
            raise TypeMismatch(f"{entity}.{name} is a foreign key, not an attribute")
        return gen

    def fks_from(self, entity: str) -> tuple[Fk, ...]:
        return tuple(f for f in self.fks if f.source == entity)

    def attrs_from(self, entity: str) -> tuple[Attr, ...]:
        return tuple(a for a in self.attrs if a.source == entity)

    def equations_at(self, entity: str) -> tuple[Equation, ...]:
        return tuple(eq for eq in self.equations if eq.entity == entity)

    def path(self, start: str, steps: Iterable[str] | str = ()) -> Path:
        """Build a typed path; ``id`` steps are dropped."""
        if isinstance(steps, str):
            steps = [s.strip() for s in steps.split(".") if s.strip()]
        if not self.has_entity(start):
            raise UnknownEntity(f"{self.name}: unknown entity {start!r}")
        current = start
        kept: list[str] = []
        for step in steps:
            if step == IDENTITY:
                continue
            if current in BASE_TYPES:
                raise TypeMismatch(f"step {step!r} follows an attribute in path from {start}")
            gen = self.generator(current, step)
            kept.append(step)
            current = gen.target
        return Path(start, tuple(kept), current)

    def parse_path(self, text: str) -> Path:
        parts = [s.strip() for s in text.split(".")]
        return self.path(parts[0], parts[1:])

    def equation(self, lhs: str, rhs: str, label: str | None = None) -> Equation:
        return Equation(self.parse_path(lhs), self.parse_path(rhs), label)


def step_types(schema: Schema, start: str, steps: tuple[str, ...]) -> list[str]:
    """Object reached before each step, plus the final codomain."""
    types = [start]
    current = start
    for step in steps:
        current = schema.generator(current, step).target
        types.append(current)
    return types


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    element: str = ""
    span: object | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        out = {"code": self.code, "message": self.message, "element": self.element}
        if self.span is not None:
            out["span"] = {"file": self.span.file, "line": self.span.line,
                           "column": self.span.column}
        return out


def validate_schema(s: Schema) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def add(code: str, msg: str, element: str) -> None:
        diags.append(Diagnostic(code, msg, element))

    seen: set[str] = set()
    for e in s.entities:
        if not IDENT_RE.match(e):
            add("InvalidIdentifier", f"entity name {e!r} is not an identifier", e)
        if e in BASE_TYPES or e == IDENTITY:
            add("ReservedName", f"entity name {e!r} is reserved", e)
        if e in seen:
            add("DuplicateEntity", f"entity {e} declared twice", e)
        seen.add(e)

    gens: set[tuple[str, str]] = set()
    for gen in (*s.fks, *s.attrs):
        element = f"{gen.source}.{gen.name}"
        if not IDENT_RE.match(gen.name):
            add("InvalidIdentifier", f"generator name {gen.name!r} is not an identifier", element)
        if gen.name == IDENTITY:
            add("ReservedName", "generator name 'id' is reserved for identity paths", element)
        if gen.source not in seen:
            add("UnknownEntity", f"{element}: source entity {gen.source} is not declared", element)
        if isinstance(gen, Fk) and gen.target not in seen:
            add("UnknownEntity", f"{element}: target entity {gen.target} is not declared", element)
        if isinstance(gen, Attr) and gen.type not in BASE_TYPES:
            add("UnknownType", f"{element}: {gen.type} is not a base type", element)
        if (gen.source, gen.name) in gens:
            add("DuplicateGenerator", f"{element} declared twice", element)
        gens.add((gen.source, gen.name))

    labels: set[str] = set()
    for i, eq in enumerate(s.equations):
        element = eq.label or f"equation#{i + 1}"
        if eq.label:
            if eq.label in labels:
                add("DuplicateLabel", f"equation label {eq.label} used twice", element)
            labels.add(eq.label)
        ok = True
        for side in (eq.lhs, eq.rhs):
            try:
                typed = s.path(side.start, side.steps)
            except (UnknownEntity, UnknownGenerator, TypeMismatch) as exc:
                add("IllTypedPath", f"{element}: {exc}", element)
                ok = False
                continue
            if typed.target != side.target:
                add("IllTypedPath", f"{element}: {side} does not end at {side.target}", element)
                ok = False
        if ok and (eq.lhs.start != eq.rhs.start or eq.lhs.target != eq.rhs.target):
            add("EquationEndpointMismatch",
                f"{element}: {eq.lhs} is {eq.lhs.start} -> {eq.lhs.target} but "
                f"{eq.rhs} is {eq.rhs.start} -> {eq.rhs.target}", element)
    return diags


# ---------------------------------------------------------------------------
# bounded prover

class Verdict(str, Enum):
    PROVABLE = "Provable"
    NOT_PROVABLE = "NotProvableWithinBound"


@dataclass(frozen=True)
class RewriteStep:
    """Replace ``removed`` by ``inserted`` at ``position`` using one equation."""

    equation: str
    direction: str  # "->" uses lhs => rhs, "<-" uses rhs => lhs
    position: int
    removed: tuple[str, ...]
    inserted: tuple[str, ...]
    before: Path
    after: Path

    def to_json(self) -> dict:
        return {"equation": self.equation, "direction": self.direction,
                "position": self.position, "before": str(self.before),
                "after": str(self.after)}


@dataclass(frozen=True)
class ProofResult:
    verdict: Verdict
    trace: tuple[RewriteStep, ...] = ()
    explored: int = 0

    @property
    def provable(self) -> bool:
        return self.verdict is Verdict.PROVABLE


@dataclass(frozen=True)
class _Rule:
    label: str
    direction: str
    entity: str
    pattern: tuple[str, ...]
    replacement: tuple[str, ...]


def _rules(schema: Schema) -> list[_Rule]:
    rules = []
    for i, eq in enumerate(schema.equations):
        label = eq.label or f"equation#{i + 1}"
        if eq.lhs.steps == eq.rhs.steps:
            continue
        rules.append(_Rule(label, "->", eq.entity, eq.lhs.steps, eq.rhs.steps))
        rules.append(_Rule(label, "<-", eq.entity, eq.rhs.steps, eq.lhs.steps))
    return rules


def _neighbours(schema: Schema, start: str, word: tuple[str, ...], rules: list[_Rule],
                max_len: int) -> Iterator[tuple[tuple[str, ...], _Rule, int]]:
    types = step_types(schema, start, word)
    for rule in rules:
        k = len(rule.pattern)
        new_len = len(word) - k + len(rule.replacement)
        if new_len > max_len:
            continue
        for i in range(len(word) - k + 1):
            if types[i] != rule.entity or word[i:i + k] != rule.pattern:
                continue
            yield word[:i] + rule.replacement + word[i + k:], rule, i


def decide_path_equality(s: Schema, lhs: Path, rhs: Path, depth_bound: int = DEFAULT_DEPTH,
                         *, max_word_length: int | None = None,
                         max_nodes: int = DEFAULT_MAX_NODES) -> ProofResult:
    """Search for a chain of at most ``depth_bound`` rewrites joining two paths.

    The search runs breadth-first from both ends, always growing the smaller
    frontier, so the order of exploration never depends on ``depth_bound``:
    a proof found at some bound is found at every larger one.  Words longer
    than ``max_word_length`` are not visited and at most ``max_nodes`` words
    are stored.  Both caps only make the search less complete, never unsound.
    """
    if depth_bound < 1:
        raise ValueError("depth_bound must be positive")
    if lhs.start != rhs.start or lhs.target != rhs.target:
        raise TypeMismatch(f"{lhs} and {rhs} have different endpoints")
    if lhs.steps == rhs.steps:
        return ProofResult(Verdict.PROVABLE, (), 1)

    rules = _rules(s)
    if max_word_length is None:
        longest = max((len(r.pattern) for r in rules), default=0)
        max_word_length = max(len(lhs), len(rhs), 8) + 2 * longest

    start = lhs.start
    # word -> (parent word, rule, position)
    seen = [{lhs.steps: None}, {rhs.steps: None}]
    frontier = [[lhs.steps], [rhs.steps]]
    depth = [0, 0]
    explored = 2

    while depth[0] + depth[1] < depth_bound and frontier[0] and frontier[1]:
        side = 0 if len(frontier[0]) <= len(frontier[1]) else 1
        other = 1 - side
        nxt: list[tuple[str, ...]] = []
        for word in frontier[side]:
            for new, rule, pos in _neighbours(s, start, word, rules, max_word_length):
                if new in seen[side]:
                    continue
                seen[side][new] = (word, rule, pos)
                explored += 1
                if new in seen[other]:
                    trace = _build_trace(s, start, lhs.target, seen, new, side)
                    return ProofResult(Verdict.PROVABLE, trace, explored)
                if explored >= max_nodes:
                    return ProofResult(Verdict.NOT_PROVABLE, (), explored)
                nxt.append(new)
        frontier[side] = nxt
        depth[side] += 1
    return ProofResult(Verdict.NOT_PROVABLE, (), explored)


def _chain(seen: dict, word: tuple[str, ...]) -> list[tuple[tuple[str, ...], _Rule, int, tuple[str, ...]]]:
    """Edges from the search root to ``word`` as (parent, rule, pos, child)."""
    edges = []
    while seen[word] is not None:
        parent, rule, pos = seen[word]
        edges.append((parent, rule, pos, word))
        word = parent
    edges.reverse()
    return edges


def _build_trace(s: Schema, start: str, target: str, seen: list[dict],
                 meet: tuple[str, ...], side: int) -> tuple[RewriteStep, ...]:
    fwd = _chain(seen[0], meet)
    back = _chain(seen[1], meet)
    steps: list[RewriteStep] = []
    for parent, rule, pos, child in fwd:
        steps.append(RewriteStep(rule.label, rule.direction, pos, rule.pattern, rule.replacement,
                                 Path(start, parent, target), Path(start, child, target)))
    for parent, rule, pos, child in reversed(back):
        flipped = "<-" if rule.direction == "->" else "->"
        steps.append(RewriteStep(rule.label, flipped, pos, rule.replacement, rule.pattern,
                                 Path(start, child, target), Path(start, parent, target)))
    return tuple(steps)


def replay_trace(s: Schema, lhs: Path, trace: Iterable[RewriteStep]) -> Path:
    """Re-apply a proof trace to ``lhs``, checking every step against the schema."""
    by_label = {eq.label or f"equation#{i + 1}": eq for i, eq in enumerate(s.equations)}
    current = lhs
    for step in trace:
        eq = by_label[step.equation]
        pattern, replacement = ((eq.lhs.steps, eq.rhs.steps) if step.direction == "->"
                                else (eq.rhs.steps, eq.lhs.steps))
        if (step.removed, step.inserted) != (pattern, replacement):
            raise TypeMismatch(f"step does not match equation {step.equation}")
        if step.before != current:
            raise TypeMismatch(f"trace expected {step.before}, have {current}")
        word = current.steps
        i, k = step.position, len(pattern)
        types = step_types(s, current.start, word)
        if word[i:i + k] != pattern or types[i] != eq.entity:
            raise TypeMismatch(f"equation {step.equation} does not apply at position {i}")
        current = s.path(current.start, word[:i] + replacement + word[i + k:])
        if current != step.after:
            raise TypeMismatch(f"trace step yields {current}, recorded {step.after}")
    return current
