"""Functorial data migration: delta, sigma (via the chase), merge and filter.

``delta`` pulls target data back along a mapping by reindexing.  ``sigma``
pushes source data forward: every source row becomes a target row, missing
foreign-key targets become fresh rows, missing attributes become labelled
nulls, and the target equations are chased until they hold.  ``merge``
builds the pushout of two schemas over a shared overlap, pushes both
instances into it and links records whose identifying keys agree.
"""

from __future__ import annotations

import operator
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .catcore import DEFAULT_DEPTH, Attr, Equation, Fk, Path, Schema
from .errors import (ChaseBudgetExceeded, Contradiction, KeyConflict, MergeError,
                     PreconditionFailed, TypeMismatch, UnknownAttribute)
from .instance import (Instance, InstanceBuilder, NullFactory, check_instance, evaluate_path,
                       provenance_tag)
from .mapping import (AttrExpr, Const, Mapping, NullExpr, PathExpr, check_mapping,
                      compose_mappings, translate_path)
from .udf import UdfRegistry
from .values import Lit, Null, Term, Value, ValueClosure, format_value


@dataclass(frozen=True)
class ChaseConfig:
    max_fresh_rows: int = 10_000
    max_rounds: int = 1_000

    def __post_init__(self) -> None:
        if self.max_fresh_rows < 1 or self.max_rounds < 1:
            raise ValueError("chase bounds must be positive")


# ---------------------------------------------------------------------------
# chase state

class _Chase:
    """Mutable working instance over ``schema`` with row and value merging.

    Rows are merged with a union-find per entity; the earliest inserted row
    represents its class.  Firing order is fixed: entities lexicographically,
    rows in insertion order, equations in declaration order.
    """

    def __init__(self, schema: Schema, registry: UdfRegistry, cfg: ChaseConfig,
                 used_labels: Iterable[str] = ()) -> None:
        self.schema = schema
        self.cfg = cfg
        self.rows: dict[str, list[str]] = {e: [] for e in schema.entities}
        self.index: dict[str, dict[str, int]] = {e: {} for e in schema.entities}
        self.parent: dict[str, dict[str, str]] = {e: {} for e in schema.entities}
        self.fk: dict[tuple[str, str], dict[str, str]] = {(f.source, f.name): {} for f in schema.fks}
        self.attr: dict[tuple[str, str], dict[str, Value]] = {
            (a.source, a.name): {} for a in schema.attrs}
        self.values = ValueClosure(registry)
        self.registry = registry
        self.lineage: dict[tuple[str, str], list[str]] = {}
        self.nulls = NullFactory(used_labels)
        self.fresh_rows = 0
        self.rounds = 0
        self.version = 0
        self.linking = False
        self._fresh_ids = {e: 0 for e in schema.entities}
        self._pending: deque[tuple[str, str, str]] = deque()

    # rows ------------------------------------------------------------------

    def add_row(self, entity: str, row: str, lineage: Sequence[str] = ()) -> str:
        if row in self.index[entity]:
            raise TypeMismatch(f"duplicate row {entity}:{row}")
        self.index[entity][row] = len(self.rows[entity])
        self.rows[entity].append(row)
        self.parent[entity][row] = row
        if lineage:
            self.lineage[(entity, row)] = list(lineage)
        self.version += 1
        return row

    def fresh_row(self, entity: str) -> str:
        self.fresh_rows += 1
        if self.fresh_rows > self.cfg.max_fresh_rows:
            raise ChaseBudgetExceeded(
                f"chase created more than {self.cfg.max_fresh_rows} fresh rows "
                f"(round {self.rounds})", self.fresh_rows, self.rounds)
        while True:
            self._fresh_ids[entity] += 1
            rid = f"{entity}#{self._fresh_ids[entity]}"
            if rid not in self.index[entity]:
                return self.add_row(entity, rid)

    def find(self, entity: str, row: str) -> str:
        parent = self.parent[entity]
        root = row
        while parent[root] != root:
            root = parent[root]
        while parent[row] != root:
            parent[row], row = root, parent[row]
        return root

    def reps(self, entity: str) -> list[str]:
        return [r for r in self.rows[entity] if self.parent[entity][r] == r]

    # navigation ------------------------------------------------------------

    def follow(self, entity: str, row: str, fk: str, create: bool = True) -> str | None:
        row = self.find(entity, row)
        target = self.schema.fk(entity, fk).target
        column = self.fk[(entity, fk)]
        nxt = column.get(row)
        if nxt is None:
            if not create:
                return None
            nxt = self.fresh_row(target)
            column[row] = nxt
            self.version += 1
        return self.find(target, nxt)

    def walk(self, entity: str, row: str, steps: Sequence[str], create: bool = True):
        """Follow foreign-key ``steps``; returns (entity, row) or None."""
        for step in steps:
            fk = self.schema.fk(entity, step)
            row = self.follow(entity, row, step, create)
            if row is None:
                return None
            entity = fk.target
        return entity, row

    def get_attr(self, entity: str, row: str, attr: str, create: bool = True) -> Value | None:
        row = self.find(entity, row)
        column = self.attr[(entity, attr)]
        v = column.get(row)
        if v is None and create:
            v = self.nulls.fresh(entity, attr, self.schema.attr(entity, attr).type)
            column[row] = v
            self.values.add(v)
            self.version += 1
        return v

    def set_attr(self, entity: str, row: str, attr: str, v: Value, context: str = "") -> None:
        row = self.find(entity, row)
        column = self.attr[(entity, attr)]
        old = column.get(row)
        if old is None:
            column[row] = v
            self.values.add(v)
            self.version += 1
        else:
            self.equate(old, v, context or f"{entity}:{row}.{attr}", entity, (row,), attr)

    def evaluate(self, entity: str, row: str, p: Path, create: bool = True):
        """Value of a path at a row: a row id for entity paths, else a Value."""
        if p.is_attribute:
            found = self.walk(entity, row, p.steps[:-1], create)
            if found is None:
                return None
            return self.get_attr(found[0], found[1], p.steps[-1], create)
        found = self.walk(entity, row, p.steps, create)
        return None if found is None else found[1]

    def evaluate_expr(self, entity: str, row: str, e: AttrExpr) -> Value:
        if isinstance(e, PathExpr):
            return self.evaluate(entity, row, e.path)
        if isinstance(e, Const):
            return e.value
        if isinstance(e, NullExpr):
            return self.nulls.fresh(entity, "null", e.type)
        args = [self.evaluate_expr(entity, row, a) for a in e.args]
        return self.registry.apply(e.fn, args, context=f"{entity}:{row}")

    # merging ---------------------------------------------------------------

    def equate(self, a: Value, b: Value, context: str, entity: str = "",
               rows: Sequence[str] = (), attr: str = "") -> None:
        try:
            if self.values.union(a, b):
                self.version += 1
        except Contradiction as exc:
            detail = {"entity": entity, "rows": list(rows), "attribute": attr,
                      "values": [format_value(a), format_value(b)]}
            if self.linking:
                raise KeyConflict(f"linked records disagree at {context}: {exc}", [detail]) from None
            raise Contradiction(f"chase forced {format_value(a)} = {format_value(b)} "
                                f"at {context}") from None

    def merge(self, entity: str, a: str, b: str) -> None:
        self._pending.append((entity, a, b))
        while self._pending:
            e, x, y = self._pending.popleft()
            rx, ry = self.find(e, x), self.find(e, y)
            if rx == ry:
                continue
            keep, drop = (rx, ry) if self.index[e][rx] <= self.index[e][ry] else (ry, rx)
            self.parent[e][drop] = keep
            self.version += 1
            moved = self.lineage.pop((e, drop), [])
            if moved:
                kept = self.lineage.setdefault((e, keep), [])
                kept.extend(t for t in moved if t not in kept)
            for f in self.schema.fks_from(e):
                column = self.fk[(e, f.name)]
                vd = column.pop(drop, None)
                if vd is None:
                    continue
                vk = column.get(keep)
                if vk is None:
                    column[keep] = vd
                else:
                    self._pending.append((f.target, vk, vd))
            for at in self.schema.attrs_from(e):
                column = self.attr[(e, at.name)]
                vd = column.pop(drop, None)
                if vd is None:
                    continue
                vk = column.get(keep)
                if vk is None:
                    column[keep] = vd
                else:
                    self.equate(vk, vd, f"{e}:{keep}+{drop}.{at.name}", e, (keep, drop), at.name)

    # fixpoint --------------------------------------------------------------

    def _totalize(self) -> None:
        for e in sorted(self.schema.entities):
            fks = self.schema.fks_from(e)
            if not fks:
                continue
            for row in list(self.rows[e]):
                if self.parent[e][row] != row:
                    continue
                for f in fks:
                    self.follow(e, row, f.name)

    def _enforce(self) -> None:
        for e in sorted(self.schema.entities):
            eqs = self.schema.equations_at(e)
            if not eqs:
                continue
            for row in list(self.rows[e]):
                for eq in eqs:
                    if self.parent[e][row] != row:
                        break
                    left = self.evaluate(e, row, eq.lhs)
                    right = self.evaluate(e, row, eq.rhs)
                    if eq.lhs.is_attribute:
                        self.equate(left, right, f"{eq.label or 'equation'} at {e}:{row}",
                                    e, (row,), eq.lhs.steps[-1])
                    else:
                        self.merge(eq.lhs.target, left, right)

    def run(self) -> None:
        while True:
            before = self.version
            self._totalize()
            self._enforce()
            self.rounds += 1
            if self.version == before:
                return
            if self.rounds >= self.cfg.max_rounds:
                raise ChaseBudgetExceeded(
                    f"chase did not converge within {self.cfg.max_rounds} rounds",
                    self.fresh_rows, self.rounds)

    def finalize(self, name: str) -> Instance:
        rows = {e: tuple(self.reps(e)) for e in self.schema.entities}
        fks = {}
        for f in self.schema.fks:
            column = self.fk[(f.source, f.name)]
            fks[(f.source, f.name)] = {r: self.find(f.target, column[r]) for r in rows[f.source]}
        for a in self.schema.attrs:
            for r in rows[a.source]:
                self.get_attr(a.source, r, a.name)
        attrs = {(a.source, a.name): {r: self.values.canonical(self.attr[(a.source, a.name)][r])
                                      for r in rows[a.source]}
                 for a in self.schema.attrs}
        lineage = {(e, r): tuple(self.lineage[(e, r)])
                   for e in self.schema.entities for r in rows[e] if (e, r) in self.lineage}
        inst = Instance(self.schema, rows, fks, attrs,
                        tuple(self.values.residual_equations()), name, lineage, self.registry)
        inst.closure
        return inst


def _rename_null(v: Value, renames: dict[str, str]) -> Value:
    if isinstance(v, Null):
        return Null(renames.get(v.label, v.label), v.type)
    if isinstance(v, Term):
        return Term(v.fn, tuple(_rename_null(a, renames) for a in v.args), v.type)
    return v


def _push(chase: _Chase, F: Mapping, inst: Instance, db: str | None = None) -> None:
    """Seed the chase with ``inst`` pushed along ``F`` (the sigma constraints)."""
    db = db if db is not None else inst.name
    renames: dict[str, str] = {}
    for label in sorted(inst.null_labels()):
        if label in chase.nulls.used:
            new, k = label, 0
            while new in chase.nulls.used:
                k += 1
                new = f"{db or 'db'}{k}_{label}"
            renames[label] = new
            chase.nulls.used.add(new)
        else:
            chase.nulls.used.add(label)

    shared: dict[str, int] = {}
    for X in F.source.entities:
        shared[F.entity_map[X]] = shared.get(F.entity_map[X], 0) + 1
    ids: dict[tuple[str, str], str] = {}
    for X in F.source.entities:
        E = F.entity_map[X]
        for r in inst.rows[X]:
            rid = f"{X}:{r}" if shared[E] > 1 else r
            if rid in chase.index[E]:
                base, k = rid, 0
                while rid in chase.index[E]:
                    k += 1
                    rid = f"{db or 'db'}{'' if k == 1 else k}:{base}"
            lineage = inst.lineage.get((X, r)) or (provenance_tag(db, X, r),)
            ids[(X, r)] = chase.add_row(E, rid, lineage)

    for a, b in inst.equations:
        chase.equate(_rename_null(a, renames), _rename_null(b, renames), f"{db} equations")
    for X in F.source.entities:
        E = F.entity_map[X]
        for r in inst.rows[X]:
            t = ids[(X, r)]
            for f in F.source.fks_from(X):
                image = F.fk_map[(X, f.name)]
                end = chase.walk(E, t, image.steps)[1]
                chase.merge(image.target, end, ids[(f.target, inst.fks[(X, f.name)][r])])
            for at in F.source.attrs_from(X):
                v = _rename_null(inst.attrs[(X, at.name)][r], renames)
                expr = F.attr_map[(X, at.name)]
                where = f"{X}:{r}.{at.name}"
                if isinstance(expr, PathExpr):
                    p = expr.path
                    ent, row = chase.walk(E, t, p.steps[:-1])
                    chase.set_attr(ent, row, p.steps[-1], v, where)
                elif not isinstance(expr, NullExpr):
                    chase.equate(chase.evaluate_expr(E, t, expr), v, where, X, (r,), at.name)


# ---------------------------------------------------------------------------
# delta / sigma

def _require_valid(F: Mapping, depth_bound: int) -> None:
    report = check_mapping(F, depth_bound, strict=True)
    if not report.valid:
        raise PreconditionFailed(
            f"mapping {F.name} is {report.verdict.value}: unprovable {', '.join(report.failed())}")


def _require_clean(inst: Instance, what: str) -> None:
    report = check_instance(inst)
    if not report.ok:
        first = next(iter(report))
        raise PreconditionFailed(f"{what} violates its schema ({len(report)} violations, "
                                 f"first {first})")


def _eval_expr(J: Instance, entity: str, row: str, e: AttrExpr, nulls: NullFactory,
               at: tuple[str, str]) -> Value:
    if isinstance(e, PathExpr):
        return evaluate_path(J, row, e.path)
    if isinstance(e, Const):
        return e.value
    if isinstance(e, NullExpr):
        return nulls.fresh(at[0], at[1], e.type)
    args = [_eval_expr(J, entity, row, a, nulls, at) for a in e.args]
    return J.registry.apply(e.fn, args, context=f"{entity}:{row}")


def delta(F: Mapping, J: Instance, *, check: bool = True,
          depth_bound: int = DEFAULT_DEPTH) -> Instance:
    """Pull ``J`` (over F.target) back to F.source by reindexing rows."""
    if J.schema != F.target:
        raise PreconditionFailed(f"instance is over {J.schema.name}, mapping lands in "
                                 f"{F.target.name}")
    if check:
        _require_valid(F, depth_bound)
        _require_clean(J, f"instance {J.name}")
    out = InstanceBuilder(F.source, J.name, J.registry)
    nulls = NullFactory(J.null_labels())
    for X in F.source.entities:
        E = F.entity_map[X]
        for r in J.rows[E]:
            out.add_row(X, r, J.lineage.get((E, r)) or (provenance_tag(J.name, E, r),))
    for X in F.source.entities:
        E = F.entity_map[X]
        for r in J.rows[E]:
            for f in F.source.fks_from(X):
                out.set_fk(X, f.name, r, evaluate_path(J, r, F.fk_map[(X, f.name)]))
            for at in F.source.attrs_from(X):
                value = _eval_expr(J, E, r, F.attr_map[(X, at.name)], nulls, (X, at.name))
                out.set_attr(X, at.name, r, value)
    out.equations.extend(J.equations)
    return out.finalize()


def sigma(F: Mapping, I: Instance, cfg: ChaseConfig | None = None, *, check: bool = True,
          depth_bound: int = DEFAULT_DEPTH) -> Instance:
    """Push ``I`` (over F.source) forward to F.target by the chase."""
    if I.schema != F.source:
        raise PreconditionFailed(f"instance is over {I.schema.name}, mapping starts at "
                                 f"{F.source.name}")
    if check:
        _require_valid(F, depth_bound)
        _require_clean(I, f"instance {I.name}")
    chase = _Chase(F.target, F.registry, cfg or ChaseConfig())
    _push(chase, F, I)
    chase.run()
    return chase.finalize(I.name)


# ---------------------------------------------------------------------------
# pushout and merge

@dataclass(frozen=True)
class MergeSpec:
    overlap: Schema
    left: Mapping
    right: Mapping
    keys: dict[str, tuple[Path, ...]] = field(default_factory=dict)
    name: str = ""

    def __hash__(self) -> int:
        return hash((self.name, self.overlap))


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _validate_spec(spec: MergeSpec) -> None:
    if spec.left.source != spec.overlap or spec.right.source != spec.overlap:
        raise MergeError("both merge legs must start at the overlap schema")
    for entity, paths in spec.keys.items():
        if not spec.overlap.has_entity(entity):
            raise MergeError(f"key entity {entity} is not in {spec.overlap.name}")
        for p in paths:
            if p.start != entity or spec.overlap.path(p.start, p.steps) != p:
                raise MergeError(f"key {p} is not a path from {entity}")


def pushout(spec: MergeSpec) -> tuple[Schema, Mapping, Mapping]:
    """Glue the two target schemas along the overlap.

    Entities identified through the overlap take the overlap's name.  A
    shared generator sent to single generators on both sides becomes one
    generator; otherwise both are kept and a ``glue_*`` equation states that
    their images agree.  Name clashes are resolved by prefixing the owning
    schema's name.
    """
    _validate_spec(spec)
    O, L, R = spec.overlap, spec.left, spec.right
    S1, S2 = L.target, R.target
    sides = (("L", S1, L), ("R", S2, R))

    ents = _UnionFind()
    for tag, S, _ in sides:
        for e in S.entities:
            ents.find((tag, e))
    for o in O.entities:
        ents.union(("L", L.entity_map[o]), ("R", R.entity_map[o]))

    names: dict = {}
    taken: set[str] = set()

    def claim(root, wanted: str, schema_name: str) -> None:
        if root in names:
            return
        name = wanted
        if name in taken:
            name = f"{schema_name}_{wanted}"
        k = 1
        while name in taken:
            k += 1
            name = f"{schema_name}_{wanted}{k}"
        names[root] = name
        taken.add(name)

    for o in O.entities:
        claim(ents.find(("L", L.entity_map[o])), o, O.name)
    for tag, S, _ in sides:
        for e in S.entities:
            claim(ents.find((tag, e)), e, S.name)

    def ent(tag: str, e: str) -> str:
        return names[ents.find((tag, e))]

    entities: list[str] = []
    for tag, S, _ in sides:
        for e in S.entities:
            if ent(tag, e) not in entities:
                entities.append(ent(tag, e))

    gens = _UnionFind()
    preferred: dict = {}
    glue: list[tuple[str, Path, Path, str]] = []
    for tag, S, _ in sides:
        for g in (*S.fks, *S.attrs):
            gens.find((tag, g.source, g.name))
    for f in O.fks:
        lp, rp = L.fk_map[(f.source, f.name)], R.fk_map[(f.source, f.name)]
        if len(lp) == 1 and len(rp) == 1:
            gens.union(("L", lp.start, lp.steps[0]), ("R", rp.start, rp.steps[0]))
            preferred.setdefault(gens.find(("L", lp.start, lp.steps[0])), f.name)
        elif lp.steps or rp.steps:
            glue.append((f"glue_{f.source}_{f.name}", lp, rp, f.source))
    for a in O.attrs:
        le, re_ = L.attr_map[(a.source, a.name)], R.attr_map[(a.source, a.name)]
        if not (isinstance(le, PathExpr) and isinstance(re_, PathExpr)):
            raise MergeError(f"overlap attribute {a.source}.{a.name} must map to a path on "
                             f"both sides to be glued")
        lp, rp = le.path, re_.path
        if len(lp) == 1 and len(rp) == 1:
            gens.union(("L", lp.start, lp.steps[0]), ("R", rp.start, rp.steps[0]))
            preferred.setdefault(gens.find(("L", lp.start, lp.steps[0])), a.name)
        else:
            glue.append((f"glue_{a.source}_{a.name}", lp, rp, a.source))

    gen_names: dict = {}
    gen_taken: dict[str, set[str]] = {e: set() for e in entities}
    fks: list[Fk] = []
    attrs: list[Attr] = []
    for tag, S, _ in sides:
        for g in (*S.fks, *S.attrs):
            root = gens.find((tag, g.source, g.name))
            if root in gen_names:
                continue
            owner = ent(tag, g.source)
            wanted = preferred.get(root, g.name)
            name = wanted
            k = 1
            while name in gen_taken[owner]:
                name = f"{S.name}_{wanted}" if k == 1 else f"{S.name}_{wanted}{k}"
                k += 1
            gen_taken[owner].add(name)
            gen_names[root] = name
            if isinstance(g, Fk):
                fks.append(Fk(name, owner, ent(tag, g.target)))
            else:
                attrs.append(Attr(name, owner, g.type))

    def gname(tag: str, source: str, name: str) -> str:
        return gen_names[gens.find((tag, source, name))]

    shell = Schema(spec.name or f"{S1.name}_{S2.name}", tuple(entities), tuple(fks), tuple(attrs))
    incs = []
    for tag, S, _ in sides:
        incs.append(Mapping(
            source=S, target=shell,
            entity_map={e: ent(tag, e) for e in S.entities},
            fk_map={(f.source, f.name): Path(ent(tag, f.source), (gname(tag, f.source, f.name),),
                                             ent(tag, f.target)) for f in S.fks},
            attr_map={(a.source, a.name): PathExpr(Path(ent(tag, a.source),
                                                        (gname(tag, a.source, a.name),), a.type))
                      for a in S.attrs},
            name=f"{S.name}_into_{shell.name}",
            registry=L.registry,
        ))

    equations: list[Equation] = []
    seen_sides: set[tuple[Path, Path]] = set()
    labels: set[str] = set()

    def add_eq(lhs: Path, rhs: Path, label: str | None, schema_name: str) -> None:
        if lhs == rhs or (lhs, rhs) in seen_sides or (rhs, lhs) in seen_sides:
            return
        seen_sides.add((lhs, rhs))
        if label and label in labels:
            base, k = f"{schema_name}_{label}", 1
            label = base
            while label in labels:
                k += 1
                label = f"{base}{k}"
        if label:
            labels.add(label)
        equations.append(Equation(lhs, rhs, label))

    for (tag, S, _), inc in zip(sides, incs):
        for eq in S.equations:
            add_eq(translate_path(inc, eq.lhs), translate_path(inc, eq.rhs), eq.label, S.name)
    for label, lp, rp, _ in glue:
        add_eq(translate_path(incs[0], lp), translate_path(incs[1], rp), label, O.name)

    T = Schema(shell.name, shell.entities, shell.fks, shell.attrs, tuple(equations))
    inc1 = Mapping(S1, T, incs[0].entity_map, incs[0].fk_map, incs[0].attr_map,
                   incs[0].name, L.registry)
    inc2 = Mapping(S2, T, incs[1].entity_map, incs[1].fk_map, incs[1].attr_map,
                   incs[1].name, L.registry)
    return T, inc1, inc2


def merge(spec: MergeSpec, I1: Instance, I2: Instance, cfg: ChaseConfig | None = None, *,
          check: bool = True, depth_bound: int = DEFAULT_DEPTH
          ) -> tuple[Schema, Instance, Mapping, Mapping]:
    """Merge two instances over the pushout of their schemas.

    Rows of an overlap entity are linked when every identifying key
    evaluates to the same non-null literal (or, for entity-valued keys, the
    same linked row).  Linked rows pool their attributes: a literal beats a
    null, and two different literals raise KeyConflict.
    """
    _validate_spec(spec)
    if I1.schema != spec.left.target or I2.schema != spec.right.target:
        raise PreconditionFailed("instances do not match the merge legs' target schemas")
    if check:
        _require_valid(spec.left, depth_bound)
        _require_valid(spec.right, depth_bound)
        _require_clean(I1, f"instance {I1.name}")
        _require_clean(I2, f"instance {I2.name}")
    T, inc1, inc2 = pushout(spec)
    used = I1.null_labels() | I2.null_labels()
    chase = _Chase(T, spec.left.registry, cfg or ChaseConfig(), ())
    _push(chase, inc1, I1, I1.name or "left")
    db2 = I2.name or "right"
    if db2 == (I1.name or "left"):
        db2 = f"{db2}2"
    _push(chase, inc2, I2, db2)
    chase.nulls.used |= used
    chase.run()

    via = compose_mappings(spec.left, inc1)
    keyed = []
    for o in spec.overlap.entities:
        paths = spec.keys.get(o, ())
        if not paths:
            continue
        images = []
        for p in paths:
            image = translate_path(via, p)
            if not isinstance(image, Path):
                raise MergeError(f"key {p} does not translate to a path in {T.name}")
            images.append(image)
        keyed.append((via.entity_map[o], images))

    chase.linking = True
    while True:
        merged = False
        for entity, images in keyed:
            groups: dict[tuple, list[str]] = {}
            for row in chase.reps(entity):
                key = []
                for image in images:
                    v = chase.evaluate(entity, row, image, create=False)
                    if image.is_attribute:
                        known = None if v is None else chase.values.literal_of(v)
                        if known is None:
                            break
                        key.append(known)
                    else:
                        key.append(v)
                else:
                    groups.setdefault(tuple(key), []).append(row)
            for rows in groups.values():
                for other in rows[1:]:
                    if chase.find(entity, other) != chase.find(entity, rows[0]):
                        chase.merge(entity, rows[0], other)
                        merged = True
        if not merged:
            break
        chase.run()
    return T, chase.finalize(spec.name or T.name), inc1, inc2


# ---------------------------------------------------------------------------
# filter and pipelines

_OPS = {"==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
        ">": operator.gt, ">=": operator.ge}


@dataclass(frozen=True)
class Condition:
    attr: str
    op: str
    value: Lit

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    def holds(self, v: Lit | None) -> bool:
        if v is None:
            return False
        numeric = {"Int", "Float"}
        if v.type != self.value.type and not {v.type, self.value.type} <= numeric:
            raise TypeMismatch(f"cannot compare {v.type} with {self.value.type}")
        try:
            return bool(_OPS[self.op](v.value, self.value.value))
        except TypeError:
            raise TypeMismatch(f"{self.op} is not defined on {v.type}") from None


@dataclass(frozen=True)
class FilterSpec:
    schema: Schema
    entity: str
    conditions: tuple[Condition, ...]
    name: str = ""


def filter_instance(I: Instance, entity: str, conditions: Sequence[Condition]) -> Instance:
    """Keep the rows of ``entity`` satisfying every condition.

    Rows the kept ones reach through foreign keys stay, and rows elsewhere
    that point at a dropped row are dropped in turn.
    """
    S = I.schema
    if not S.has_entity(entity):
        raise UnknownAttribute(f"{S.name} has no entity {entity}")
    for c in conditions:
        if not any(a.name == c.attr for a in S.attrs_from(entity)):
            raise UnknownAttribute(f"{entity} has no attribute {c.attr}")

    matched = [r for r in I.rows[entity]
               if all(c.holds(I.closure.literal_of(I.attrs[(entity, c.attr)][r]))
                      for c in conditions)]
    keep = {(entity, r) for r in matched}
    stack = list(keep)
    while stack:
        e, r = stack.pop()
        for f in S.fks_from(e):
            nxt = (f.target, I.fks[(e, f.name)][r])
            if nxt not in keep:
                keep.add(nxt)
                stack.append(nxt)
    dropped = {(entity, r) for r in I.rows[entity] if (entity, r) not in keep}
    changed = True
    while changed:
        changed = False
        for e in S.entities:
            for r in I.rows[e]:
                if (e, r) in dropped:
                    continue
                if any((f.target, I.fks[(e, f.name)][r]) in dropped for f in S.fks_from(e)):
                    dropped.add((e, r))
                    changed = True

    out = InstanceBuilder(S, I.name, I.registry)
    for e in S.entities:
        for r in I.rows[e]:
            if (e, r) not in dropped:
                out.add_row(e, r, I.lineage.get((e, r), ()))
    for (e, f), column in I.fks.items():
        for r, t in column.items():
            if (e, r) not in dropped:
                out.set_fk(e, f, r, t)
    for (e, a), column in I.attrs.items():
        for r, v in column.items():
            if (e, r) not in dropped:
                out.set_attr(e, a, r, v)
    out.equations.extend(I.equations)
    return out.finalize()


@dataclass(frozen=True)
class Step:
    kind: str  # "delta" | "sigma" | "filter"
    target: Mapping | FilterSpec

    @property
    def input_schema(self) -> Schema:
        if self.kind == "delta":
            return self.target.target
        if self.kind == "sigma":
            return self.target.source
        return self.target.schema

    @property
    def output_schema(self) -> Schema:
        if self.kind == "delta":
            return self.target.source
        if self.kind == "sigma":
            return self.target.target
        return self.target.schema


@dataclass(frozen=True)
class Pipeline:
    name: str
    steps: tuple[Step, ...]

    def mappings(self) -> list[Mapping]:
        return [s.target for s in self.steps if s.kind != "filter"]


def run_pipeline(pipeline: Pipeline, data: Instance, cfg: ChaseConfig | None = None, *,
                 check: bool = True, depth_bound: int = DEFAULT_DEPTH) -> Instance:
    current = data
    for step in pipeline.steps:
        if step.kind == "delta":
            current = delta(step.target, current, check=check, depth_bound=depth_bound)
        elif step.kind == "sigma":
            current = sigma(step.target, current, cfg, check=check, depth_bound=depth_bound)
        else:
            f = step.target
            current = filter_instance(current, f.entity, f.conditions)
    return current
