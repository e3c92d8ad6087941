"""Independent reference implementations used to check the engine.

Nothing here calls into the engine's algorithms: the oracles work on the
raw dictionaries of an Instance, plain tuples of generator names, and
naive fixpoints.  They are slow and only meant for tiny inputs.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter, deque

from funmig.catcore import Attr, Equation, Fk, Path, Schema
from funmig.instance import Instance, InstanceBuilder
from funmig.mapping import Const, Mapping, PathExpr
from funmig.values import Lit, Null, Term


# ---------------------------------------------------------------------------
# schema helpers that do not use the engine


def gens_from(s: Schema, entity: str) -> list[Fk]:
    return [f for f in s.fks if f.source == entity]


def words_from(s: Schema, entity: str, max_len: int) -> list[tuple[tuple[str, ...], str]]:
    """Every fk word of length <= max_len starting at ``entity`` with its end."""
    out = [((), entity)]
    frontier = [((), entity)]
    for _ in range(max_len):
        nxt = []
        for word, end in frontier:
            for f in gens_from(s, end):
                nxt.append((word + (f.name,), f.target))
        out += nxt
        frontier = nxt
    return out


def word_types(s: Schema, start: str, word: tuple[str, ...]) -> list[str]:
    types = [start]
    for g in word:
        types.append(next(f.target for f in gens_from(s, types[-1]) if f.name == g))
    return types


def is_acyclic(s: Schema) -> bool:
    indeg = Counter(f.target for f in s.fks)
    queue = deque(e for e in s.entities if indeg[e] == 0)
    seen = 0
    while queue:
        e = queue.popleft()
        seen += 1
        for f in gens_from(s, e):
            indeg[f.target] -= 1
            if indeg[f.target] == 0:
                queue.append(f.target)
    return seen == len(s.entities)


# ---------------------------------------------------------------------------
# rewrite closure


def rewrite_closure(s: Schema, start: str, word: tuple[str, ...], max_len: int = 8,
                    max_nodes: int = 50_000) -> set[tuple[str, ...]] | None:
    """All words equal to ``word`` by one-step rewrites, if every one of them
    has length <= max_len.  Returns None when some rewrite would leave that
    bound (the oracle gives up rather than guess)."""
    rules = []
    for eq in s.equations:
        rules.append((eq.lhs.start, eq.lhs.steps, eq.rhs.steps))
        rules.append((eq.lhs.start, eq.rhs.steps, eq.lhs.steps))
    seen = {word}
    queue = deque([word])
    while queue:
        w = queue.popleft()
        types = word_types(s, start, w)
        for entity, pat, rep in rules:
            k = len(pat)
            for i in range(len(w) - k + 1):
                if types[i] == entity and w[i:i + k] == pat:
                    new = w[:i] + rep + w[i + k:]
                    if new in seen:
                        continue
                    if len(new) > max_len:
                        return None
                    seen.add(new)
                    if len(seen) > max_nodes:
                        return None
                    queue.append(new)
    return seen


# ---------------------------------------------------------------------------
# naive evaluation and checking


def naive_eval(inst: Instance, start: str, row: str, steps: tuple[str, ...]):
    entity = start
    for step in steps:
        if (entity, step) in inst.fks:
            row = inst.fks[(entity, step)][row]
            entity = next(f.target for f in inst.schema.fks
                          if f.source == entity and f.name == step)
        else:
            return inst.attrs[(entity, step)][row]
    return row


def naive_violations(inst: Instance) -> set[tuple[str, str, str]]:
    """(label, entity, row) for every failing equation instance (literal data only)."""
    out = set()
    for i, eq in enumerate(inst.schema.equations):
        label = eq.label or f"equation#{i + 1}"
        for row in inst.rows[eq.lhs.start]:
            a = naive_eval(inst, eq.lhs.start, row, eq.lhs.steps)
            b = naive_eval(inst, eq.lhs.start, row, eq.rhs.steps)
            if a != b:
                out.add((label, eq.lhs.start, row))
    return out


# ---------------------------------------------------------------------------
# homomorphisms


def count_homs(A: Instance, B: Instance, limit: int = 10**7) -> int:
    """Number of instance homomorphisms A -> B over the same schema.

    A row map must commute with every foreign key; an attribute value of A
    must map to the value of B at the image row, where literals map to
    themselves and each null of A (up to A's value equalities) maps to a
    single value of B.  Assigning a row forces the images of everything it
    reaches, so only rows not reachable from earlier choices branch.
    """
    s = A.schema
    assert s == B.schema
    canon_a = A.closure.canonical
    canon_b = B.closure.canonical
    order = [(e, r) for e in s.entities for r in A.rows[e]]
    fks_of = {e: gens_from(s, e) for e in s.entities}
    attrs_of = {e: [a for a in s.attrs if a.source == e] for e in s.entities}
    count = 0

    def assign(h: dict, nulls: dict, e: str, r: str, b: str) -> bool:
        stack = [(e, r, b)]
        while stack:
            e, r, b = stack.pop()
            if (e, r) in h:
                if h[(e, r)] != b:
                    return False
                continue
            h[(e, r)] = b
            for a in attrs_of[e]:
                va = canon_a(A.attrs[(e, a.name)][r])
                vb = canon_b(B.attrs[(e, a.name)][b])
                if isinstance(va, Lit):
                    if va != vb:
                        return False
                elif isinstance(va, Null):
                    if nulls.setdefault(va, vb) != vb:
                        return False
                else:
                    raise NotImplementedError("terms are not supported by the oracle")
            for f in fks_of[e]:
                stack.append((f.target, A.fks[(e, f.name)][r], B.fks[(e, f.name)][b]))
        return True

    def go(i: int, h: dict, nulls: dict) -> None:
        nonlocal count
        while i < len(order) and order[i] in h:
            i += 1
        if i == len(order):
            count += 1
            if count > limit:
                raise OverflowError("too many homomorphisms")
            return
        e, r = order[i]
        for b in B.rows[e]:
            h2, n2 = dict(h), dict(nulls)
            if assign(h2, n2, e, r, b):
                go(i + 1, h2, n2)

    go(0, {}, {})
    return count


# ---------------------------------------------------------------------------
# delta by hand


def naive_pullback(F: Mapping, J: Instance) -> dict:
    """rows, fks and attrs of the pullback, as plain dictionaries."""
    S = F.source
    rows = {X: list(J.rows[F.entity_map[X]]) for X in S.entities}
    fks = {}
    for f in S.fks:
        image = F.fk_map[(f.source, f.name)]
        fks[(f.source, f.name)] = {r: naive_eval(J, image.start, r, image.steps)
                                   for r in rows[f.source]}
    attrs = {}
    for a in S.attrs:
        e = F.attr_map[(a.source, a.name)]
        column = {}
        for r in rows[a.source]:
            if isinstance(e, PathExpr):
                column[r] = naive_eval(J, e.path.start, r, e.path.steps)
            elif isinstance(e, Const):
                column[r] = e.value
            else:
                column[r] = None
        attrs[(a.source, a.name)] = column
    return {"rows": rows, "fks": fks, "attrs": attrs}


# ---------------------------------------------------------------------------
# sigma by hand: the term model of a left Kan extension


class _DSU:
    def __init__(self):
        self.p = {}

    def find(self, x):
        self.p.setdefault(x, x)
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.p[rb] = ra


def naive_left_kan(F: Mapping, I: Instance) -> dict[str, Counter]:
    """Rows of sigma(F, I) for an acyclic target without attribute equations.

    Every target element is named by a term (source row, target word); terms
    are identified by the source foreign keys and by the target equations
    applied anywhere inside a word.  Returns, per target entity, a multiset
    of attribute tuples (a literal value or None when unknown).
    """
    T = F.target
    assert is_acyclic(T)
    assert all(not eq.lhs.is_attribute for eq in T.equations)
    depth = len(T.entities) + 1
    words = {e: words_from(T, e, depth) for e in T.entities}
    ends = {}
    terms = []
    for X in F.source.entities:
        E = F.entity_map[X]
        for r in I.rows[X]:
            for w, end in words[E]:
                t = (X, r, w)
                terms.append(t)
                ends[t] = end
    dsu = _DSU()
    for t in terms:
        dsu.find(t)
    for f in F.source.fks:
        image = F.fk_map[(f.source, f.name)]
        for r in I.rows[f.source]:
            r2 = I.fks[(f.source, f.name)][r]
            for w, _ in words[F.entity_map[f.target]]:
                dsu.union((f.source, r, image.steps + w), (f.target, r2, w))
    for (X, r, u) in terms:
        for eq in T.equations:
            if ends[(X, r, u)] != eq.lhs.start:
                continue
            for v, _ in words[eq.lhs.target]:
                dsu.union((X, r, u + eq.lhs.steps + v), (X, r, u + eq.rhs.steps + v))

    classes: dict = {}
    for t in terms:
        classes.setdefault(dsu.find(t), ends[t])
    values: dict = {c: {} for c in classes}
    for a in F.source.attrs:
        e = F.attr_map[(a.source, a.name)]
        if not isinstance(e, PathExpr):
            continue
        prefix, name = e.path.steps[:-1], e.path.steps[-1]
        for r in I.rows[a.source]:
            v = I.attrs[(a.source, a.name)][r]
            if not isinstance(v, Lit):
                continue
            c = dsu.find((a.source, r, prefix))
            old = values[c].setdefault(name, v)
            assert old == v, "contradiction in oracle"
    out = {e: Counter() for e in T.entities}
    for c, end in classes.items():
        attrs = [x.name for x in T.attrs if x.source == end]
        out[end][tuple(values[c].get(n) for n in attrs)] += 1
    return out


def instance_profile(inst: Instance) -> dict[str, Counter]:
    """Same shape as :func:`naive_left_kan` for an engine-produced instance."""
    out = {}
    for e in inst.schema.entities:
        attrs = [a.name for a in inst.schema.attrs if a.source == e]
        c = Counter()
        for r in inst.rows[e]:
            row = []
            for n in attrs:
                v = inst.closure.literal_of(inst.attrs[(e, n)][r])
                row.append(v)
            c[tuple(row)] += 1
        out[e] = c
    return out


# ---------------------------------------------------------------------------
# congruence closure by hand


def subterms(v) -> set:
    out = {v}
    if isinstance(v, Term):
        for a in v.args:
            out |= subterms(a)
    return out


def naive_congruence(values, equations) -> _DSU:
    """Smallest congruence on the subterms of ``values`` containing ``equations``."""
    universe = set()
    for v in values:
        universe |= subterms(v)
    for a, b in equations:
        universe |= subterms(a) | subterms(b)
    dsu = _DSU()
    for v in universe:
        dsu.find(v)
    for a, b in equations:
        dsu.union(a, b)
    terms = [t for t in universe if isinstance(t, Term)]
    changed = True
    while changed:
        changed = False
        for s, t in itertools.combinations(terms, 2):
            if (s.fn == t.fn and len(s.args) == len(t.args) and dsu.find(s) != dsu.find(t)
                    and all(dsu.find(x) == dsu.find(y) for x, y in zip(s.args, t.args))):
                dsu.union(s, t)
                changed = True
    return dsu


# ---------------------------------------------------------------------------
# random generators


def random_schema(rng: random.Random, name: str = "S", max_entities: int = 3,
                  max_fks: int = 4, max_equations: int = 2, max_path: int = 4,
                  n_attrs: int = 0, acyclic: bool = False) -> Schema:
    n = rng.randint(1, max_entities)
    entities = tuple(f"E{i}" for i in range(n))
    fks = []
    for i in range(rng.randint(0, max_fks)):
        a = rng.randrange(n)
        b = rng.randrange(a + 1, n) if acyclic and a + 1 < n else (None if acyclic else rng.randrange(n))
        if b is None:
            continue
        fks.append(Fk(f"f{i}", entities[a], entities[b]))
    attrs = []
    for i in range(n_attrs):
        attrs.append(Attr(f"a{i}", entities[rng.randrange(n)], "Int"))
    base = Schema(name, entities, tuple(fks), tuple(attrs))
    equations = []
    for k in range(rng.randint(0, max_equations)):
        e = rng.choice(entities)
        paths = words_from(base, e, max_path)
        by_end: dict = {}
        for w, end in paths:
            by_end.setdefault(end, []).append(w)
        choices = [ws for ws in by_end.values() if len(ws) > 1]
        if not choices:
            continue
        ws = rng.choice(choices)
        l, r = rng.sample(ws, 2)
        end = word_types(base, e, l)[-1]
        equations.append(Equation(Path(e, l, end), Path(e, r, end), f"q{k}"))
    return Schema(name, entities, tuple(fks), tuple(attrs), tuple(equations))


def random_instance(rng: random.Random, s: Schema, max_rows: int = 3, values=(0, 1),
                    tries: int = 300, name: str = "rand") -> Instance | None:
    """A random literal-valued instance satisfying s's equations, or None."""
    for _ in range(tries):
        n = {e: rng.randint(1, max_rows) for e in s.entities}
        b = InstanceBuilder(s, name)
        for e in s.entities:
            for i in range(n[e]):
                b.add_row(e, str(i + 1))
        for f in s.fks:
            for i in range(n[f.source]):
                b.set_fk(f.source, f.name, str(i + 1), str(rng.randint(1, n[f.target])))
        for a in s.attrs:
            for i in range(n[a.source]):
                b.set_attr(a.source, a.name, str(i + 1), Lit("Int", rng.choice(values)))
        inst = b.finalize()
        if not naive_violations(inst):
            return inst
    return None


def random_mapping(rng: random.Random, T: Schema, max_entities: int = 3, max_fks: int = 3,
                   max_equations: int = 2, n_attrs: int = 1, name: str = "F",
                   acyclic: bool = False) -> Mapping | None:
    """A random source schema S with a functor S -> T.

    Foreign keys go to random target words with the right endpoints and
    attributes to random attribute-ending target paths.  Source equations
    are random; callers keep only mappings that check_mapping accepts.
    """
    n = rng.randint(1, max_entities)
    S_entities = tuple(f"X{i}" for i in range(n))
    emap = {X: rng.choice(T.entities) for X in S_entities}
    fks, fk_map = [], {}
    for i in range(rng.randint(0, max_fks)):
        a = rng.randrange(n)
        candidates = [b for b in range(n) if not acyclic or b > a]
        if not candidates:
            continue
        b = rng.choice(candidates)
        X, Y = S_entities[a], S_entities[b]
        options = [w for w, end in words_from(T, emap[X], 2) if end == emap[Y]]
        if not options:
            continue
        w = rng.choice(options)
        fks.append(Fk(f"g{i}", X, Y))
        fk_map[(X, f"g{i}")] = Path(emap[X], w, emap[Y])
    attrs, attr_map = [], {}
    for i in range(n_attrs):
        X = rng.choice(S_entities)
        options = [(w, end, a) for w, end in words_from(T, emap[X], 1)
                   for a in T.attrs if a.source == end]
        if not options:
            continue
        w, end, a = rng.choice(options)
        attrs.append(Attr(f"b{i}", X, "Int"))
        attr_map[(X, f"b{i}")] = PathExpr(Path(emap[X], w + (a.name,), "Int"))
    base = Schema("S", S_entities, tuple(fks), tuple(attrs))
    equations = []
    for k in range(rng.randint(0, max_equations)):
        e = rng.choice(S_entities)
        by_end: dict = {}
        for w, end in words_from(base, e, 3):
            by_end.setdefault(end, []).append(w)
        choices = [ws for ws in by_end.values() if len(ws) > 1]
        if not choices:
            continue
        l, r = rng.sample(rng.choice(choices), 2)
        end = word_types(base, e, l)[-1]
        equations.append(Equation(Path(e, l, end), Path(e, r, end), f"p{k}"))
    S = Schema("S", S_entities, tuple(fks), tuple(attrs), tuple(equations))
    return Mapping(S, T, emap, fk_map, attr_map, name)
