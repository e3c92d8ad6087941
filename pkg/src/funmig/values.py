"""Attribute values: literals, labelled nulls and symbolic function terms.

Labelled nulls are named unknowns.  Two nulls are different until something
equates them, and a function applied to a null stays symbolic
(``json_extract(?n1, "encut")``).  :class:`ValueClosure` keeps the
equivalence relation over such values closed under congruence and under
evaluation once arguments become known.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Union

from .errors import Contradiction, TypeMismatch

if TYPE_CHECKING:
    from .udf import UdfRegistry

PY_TYPES = {"Int": int, "Float": float, "String": str, "Bool": bool}


@dataclass(frozen=True)
class Lit:
    type: str
    value: object

    def __str__(self) -> str:
        return format_value(self)


@dataclass(frozen=True)
class Null:
    label: str
    type: str

    def __str__(self) -> str:
        return f"?{self.label}"


@dataclass(frozen=True)
class Term:
    fn: str
    args: tuple["Value", ...]
    type: str

    def __str__(self) -> str:
        return format_value(self)


Value = Union[Lit, Null, Term]


def lit(type_: str, value: object) -> Lit:
    """Build a literal, coercing ints to floats for Float."""
    if type_ not in PY_TYPES:
        raise TypeMismatch(f"unknown base type {type_}")
    if type_ == "Float" and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    expected = PY_TYPES[type_]
    if type(value) is not expected:
        raise TypeMismatch(f"{value!r} is not a {type_}")
    return Lit(type_, value)


def has_null(v: Value) -> bool:
    if isinstance(v, Null):
        return True
    if isinstance(v, Term):
        return any(has_null(a) for a in v.args)
    return False


def nulls_in(v: Value) -> Iterable[Null]:
    if isinstance(v, Null):
        yield v
    elif isinstance(v, Term):
        for a in v.args:
            yield from nulls_in(a)


def format_literal(type_: str, value: object) -> str:
    if type_ == "String":
        return json.dumps(value, ensure_ascii=False)
    if type_ == "Bool":
        return "true" if value else "false"
    if type_ == "Float":
        if not math.isfinite(value):
            raise TypeMismatch(f"non-finite float {value!r} cannot be written")
        return repr(value)
    return str(value)


def format_value(v: Value) -> str:
    if isinstance(v, Lit):
        return format_literal(v.type, v.value)
    if isinstance(v, Null):
        return f"?{v.label}"
    return f"{v.fn}(" + ", ".join(format_value(a) for a in v.args) + ")"


def _substitute(v: Value, fn) -> Value:
    if isinstance(v, Term):
        return Term(v.fn, tuple(fn(a) for a in v.args), v.type)
    return v


class ValueClosure:
    """Union-find over values, closed under congruence and evaluation.

    Classes containing two different literals raise :class:`Contradiction`.
    Float literals are compared exactly; tolerance belongs to callers.
    """

    def __init__(self, registry: "UdfRegistry | None" = None) -> None:
        self.registry = registry
        self._parent: dict[Value, Value] = {}
        self._order: dict[Value, int] = {}
        self._lit: dict[Value, Lit] = {}  # root -> literal in class
        self._terms: list[Term] = []
        self.asserted: list[tuple[Value, Value]] = []
        self._members: dict[Value, list[Value]] | None = None

    def copy(self) -> "ValueClosure":
        other = ValueClosure(self.registry)
        other._parent = dict(self._parent)
        other._order = dict(self._order)
        other._lit = dict(self._lit)
        other._terms = list(self._terms)
        other.asserted = list(self.asserted)
        return other

    def add(self, v: Value) -> None:
        if v in self._parent:
            return
        if isinstance(v, Term):
            for a in v.args:
                self.add(a)
            self._terms.append(v)
        self._parent[v] = v
        self._order[v] = len(self._order)
        self._members = None
        if isinstance(v, Lit):
            self._lit[v] = v

    def find(self, v: Value) -> Value:
        self.add(v)
        root = v
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[v] != root:
            self._parent[v], v = root, self._parent[v]
        return root

    def literal_of(self, v: Value) -> Lit | None:
        if isinstance(v, Lit):
            return v
        return self._lit.get(self.find(v))

    def equal(self, a: Value, b: Value, atol: float = 0.0) -> bool:
        if a == b:
            return True
        if isinstance(a, Lit) and isinstance(b, Lit):
            return _lits_close(a, b, atol)
        if self.find(a) == self.find(b):
            return True
        la, lb = self.literal_of(a), self.literal_of(b)
        return la is not None and lb is not None and _lits_close(la, lb, atol)

    def union(self, a: Value, b: Value) -> bool:
        """Equate two values; returns True when the partition changed."""
        if a.type != b.type:
            raise TypeMismatch(f"cannot equate {format_value(a)} : {a.type} with "
                               f"{format_value(b)} : {b.type}")
        changed = self._union_one(a, b)
        if changed:
            self.asserted.append((a, b))
            self._propagate()
        return changed

    def _union_one(self, a: Value, b: Value) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        la, lb = self._lit.get(ra), self._lit.get(rb)
        if la is not None and lb is not None and la != lb:
            raise Contradiction(f"cannot equate {format_value(la)} and {format_value(lb)}")
        keep, drop = (ra, rb) if self._order[ra] <= self._order[rb] else (rb, ra)
        self._parent[drop] = keep
        self._members = None
        lit_ = la if la is not None else lb
        self._lit.pop(drop, None)
        if lit_ is not None:
            self._lit[keep] = lit_
        return True

    def _propagate(self) -> None:
        changed = True
        while changed:
            changed = False
            signatures: dict[tuple, Value] = {}
            for t in list(self._terms):
                key = (t.fn, tuple(self.find(a) for a in t.args))
                other = signatures.setdefault(key, t)
                if other is not t and self._union_one(other, t):
                    changed = True
                if self.registry is not None:
                    known = [self.literal_of(a) for a in t.args]
                    if all(k is not None for k in known):
                        value = self.registry.apply(t.fn, known)
                        if self._union_one(t, value):
                            changed = True

    def canonical(self, v: Value) -> Value:
        """Preferred representative: a literal, else the first null, else a term."""
        lit_ = self.literal_of(v)
        if lit_ is not None:
            return lit_
        root = self.find(v)
        if self._members is None:
            self._members = {}
            for m in list(self._parent):
                self._members.setdefault(self.find(m), []).append(m)
        members = self._members.get(root, [v])
        nulls = sorted((m for m in members if isinstance(m, Null)), key=lambda n: n.label)
        if nulls:
            return nulls[0]
        terms = [m for m in members if isinstance(m, Term)]
        if terms:
            best = min(terms, key=self._order.__getitem__)
            return _substitute(best, self.canonical)
        return v

    def classes(self) -> list[frozenset[Value]]:
        groups: dict[Value, set[Value]] = {}
        for v in self._parent:
            groups.setdefault(self.find(v), set()).add(v)
        return [frozenset(g) for g in groups.values() if len(g) > 1]

    def residual_equations(self) -> list[tuple[Value, Value]]:
        """Equations that canonicalisation alone does not capture.

        Every term whose canonical form differs from its class representative
        yields one ``(term, representative)`` pair.  Null-null and
        null-literal facts are implied by canonical values and are omitted.
        """
        out: list[tuple[Value, Value]] = []
        seen: set[tuple[Value, Value]] = set()
        for t in self._terms:
            lhs = _substitute(t, self.canonical)
            rhs = self.canonical(t)
            if lhs != rhs and has_null(lhs) and (lhs, rhs) not in seen:
                seen.add((lhs, rhs))
                out.append((lhs, rhs))
        return out


def _lits_close(a: Lit, b: Lit, atol: float) -> bool:
    if a.type != b.type:
        return False
    if a.type == "Float" and atol > 0:
        return abs(a.value - b.value) <= atol
    return a.value == b.value
