"""Schema mappings as functors, and static checking that they keep equations.

A mapping sends each source entity to a target entity, each foreign key to
a target path, and each attribute to an attribute expression: a target
attribute path, a constant, ``null``, or user-defined functions applied
around at most one such path.  :func:`check_mapping` translates every source
equation and asks the bounded prover whether the target schema implies it.
No instance data is consulted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .catcore import (DEFAULT_DEPTH, Equation, Fk, Path, ProofResult, Schema, Verdict,
                      compose, decide_path_equality, identity)
from .errors import (FunmigError, IllFormedMapping, SchemaMismatch, TypeMismatch,
                     UnknownFunction)
from .udf import DEFAULT_REGISTRY, UdfRegistry
from .values import Lit, format_value


@dataclass(frozen=True)
class PathExpr:
    path: Path

    @property
    def type(self) -> str:
        return self.path.target


@dataclass(frozen=True)
class Const:
    value: Lit

    @property
    def type(self) -> str:
        return self.value.type


@dataclass(frozen=True)
class Apply:
    fn: str
    args: tuple["AttrExpr", ...]
    type: str


@dataclass(frozen=True)
class NullExpr:
    type: str


AttrExpr = Union[PathExpr, Const, Apply, NullExpr]


def format_expr(e: AttrExpr | Path) -> str:
    if isinstance(e, Path):
        return str(e)
    if isinstance(e, PathExpr):
        return str(e.path)
    if isinstance(e, Const):
        return format_value(e.value)
    if isinstance(e, NullExpr):
        return "null"
    return f"{e.fn}(" + ", ".join(format_expr(a) for a in e.args) + ")"


def expr_paths(e: AttrExpr) -> list[Path]:
    if isinstance(e, PathExpr):
        return [e.path]
    if isinstance(e, Apply):
        return [p for a in e.args for p in expr_paths(a)]
    return []


@dataclass(frozen=True)
class Mapping:
    source: Schema
    target: Schema
    entity_map: dict[str, str]
    fk_map: dict[tuple[str, str], Path]
    attr_map: dict[tuple[str, str], AttrExpr]
    name: str = ""
    registry: UdfRegistry = field(default=DEFAULT_REGISTRY, repr=False, compare=False)

    def __hash__(self) -> int:
        return hash((self.name, self.source, self.target))

    def fk_image(self, entity: str, fk: str) -> Path:
        return self.fk_map[(entity, fk)]

    def attr_image(self, entity: str, attr: str) -> AttrExpr:
        return self.attr_map[(entity, attr)]


def identity_mapping(s: Schema, name: str = "") -> Mapping:
    return Mapping(
        source=s, target=s,
        entity_map={e: e for e in s.entities},
        fk_map={(f.source, f.name): Path(f.source, (f.name,), f.target) for f in s.fks},
        attr_map={(a.source, a.name): PathExpr(Path(a.source, (a.name,), a.type))
                  for a in s.attrs},
        name=name or f"id_{s.name}",
    )


# ---------------------------------------------------------------------------
# well-formedness

def _expr_problems(F: Mapping, e: AttrExpr, at: str, where: str) -> list[str]:
    problems = []
    if isinstance(e, PathExpr):
        try:
            typed = F.target.path(e.path.start, e.path.steps)
        except FunmigError as exc:
            return [f"{where}: {exc}"]
        if typed != e.path:
            problems.append(f"{where}: path {e.path} is mistyped in {F.target.name}")
        if e.path.start != at:
            problems.append(f"{where}: path {e.path} must start at {at}")
        if not e.path.is_attribute:
            problems.append(f"{where}: path {e.path} must end in an attribute")
    elif isinstance(e, Apply):
        try:
            sig = F.registry.signature(e.fn)
        except UnknownFunction as exc:
            return [f"{where}: {exc}"]
        if len(e.args) != sig.arity:
            problems.append(f"{where}: {e.fn} takes {sig.arity} arguments, got {len(e.args)}")
        if sig.return_type != e.type:
            problems.append(f"{where}: {e.fn} returns {sig.return_type}, not {e.type}")
        for arg, expected in zip(e.args, sig.arg_types):
            if arg.type != expected:
                problems.append(f"{where}: argument {format_expr(arg)} of {e.fn} "
                                f"is {arg.type}, expected {expected}")
            problems.extend(_expr_problems(F, arg, at, where))
    return problems


def mapping_problems(F: Mapping) -> list[str]:
    """Totality and typing failures, in a deterministic order."""
    S, T = F.source, F.target
    problems = []
    for e in S.entities:
        if e not in F.entity_map:
            problems.append(f"entity {e} is not mapped")
        elif not T.has_entity(F.entity_map[e]):
            problems.append(f"entity {e} maps to unknown {T.name} entity {F.entity_map[e]}")
    for extra in sorted(set(F.entity_map) - set(S.entities)):
        problems.append(f"{extra} is not an entity of {S.name}")
    if problems:
        return problems

    for f in S.fks:
        key = (f.source, f.name)
        where = f"fk {f.source}.{f.name}"
        if key not in F.fk_map:
            problems.append(f"{where} is not mapped")
            continue
        p = F.fk_map[key]
        try:
            typed = T.path(p.start, p.steps)
        except FunmigError as exc:
            problems.append(f"{where}: {exc}")
            continue
        want = (F.entity_map[f.source], F.entity_map[f.target])
        if (typed.start, typed.target) != want or typed != p:
            problems.append(f"{where} maps to {p} ({typed.start} -> {typed.target}), "
                            f"expected {want[0]} -> {want[1]}")
    for a in S.attrs:
        key = (a.source, a.name)
        where = f"attr {a.source}.{a.name}"
        if key not in F.attr_map:
            problems.append(f"{where} is not mapped")
            continue
        e = F.attr_map[key]
        if e.type != a.type:
            problems.append(f"{where} is {a.type} but maps to {format_expr(e)} : {e.type}")
        if len(expr_paths(e)) > 1:
            problems.append(f"{where}: an attribute expression may use at most one path")
        problems.extend(_expr_problems(F, e, F.entity_map[a.source], where))
    known = {(g.source, g.name) for g in S.fks}
    for key in sorted(set(F.fk_map) - known):
        problems.append(f"{key[0]}.{key[1]} is not a foreign key of {S.name}")
    known = {(g.source, g.name) for g in S.attrs}
    for key in sorted(set(F.attr_map) - known):
        problems.append(f"{key[0]}.{key[1]} is not an attribute of {S.name}")
    return problems


def ensure_well_formed(F: Mapping) -> None:
    problems = mapping_problems(F)
    if problems:
        raise IllFormedMapping(f"mapping {F.name or '<anon>'}: {problems[0]}")


# ---------------------------------------------------------------------------
# translation

def _prefix(prefix: Path, e: AttrExpr) -> AttrExpr:
    if isinstance(e, PathExpr):
        return PathExpr(compose(prefix, e.path))
    if isinstance(e, Apply):
        return Apply(e.fn, tuple(_prefix(prefix, a) for a in e.args), e.type)
    return e


def _unwrap(e: AttrExpr) -> Path | AttrExpr:
    return e.path if isinstance(e, PathExpr) else e


def translate_path(F: Mapping, p: Path) -> Path | AttrExpr:
    """Image of a source path.

    Entity-valued paths map to target paths.  An attribute path maps to a
    target path when its attribute is sent to a path, and otherwise to the
    attribute expression evaluated at the end of the translated prefix.
    """
    if p.start not in F.entity_map:
        raise TypeMismatch(f"{p.start} is not mapped by {F.name}")
    result = identity(F.entity_map[p.start])
    entity = p.start
    for step in p.steps:
        gen = F.source.generator(entity, step)
        if isinstance(gen, Fk):
            result = compose(result, F.fk_map[(entity, step)])
            entity = gen.target
        else:
            return _unwrap(_prefix(result, F.attr_map[(entity, step)]))
    return result


def translate_expr(G: Mapping, e: AttrExpr) -> AttrExpr:
    if isinstance(e, PathExpr):
        image = translate_path(G, e.path)
        return PathExpr(image) if isinstance(image, Path) else image
    if isinstance(e, Apply):
        return Apply(e.fn, tuple(translate_expr(G, a) for a in e.args), e.type)
    return e


def compose_mappings(F: Mapping, G: Mapping, name: str = "") -> Mapping:
    """The composite ``G after F``: first F, then G."""
    if F.target != G.source:
        raise SchemaMismatch(f"{F.name} lands in {F.target.name} but {G.name} "
                             f"starts from {G.source.name}")
    return Mapping(
        source=F.source, target=G.target,
        entity_map={e: G.entity_map[t] for e, t in F.entity_map.items()},
        fk_map={k: translate_path(G, p) for k, p in F.fk_map.items()},
        attr_map={k: translate_expr(G, e) for k, e in F.attr_map.items()},
        name=name or f"{G.name}_o_{F.name}",
        registry=F.registry,
    )


# ---------------------------------------------------------------------------
# validation

class MappingVerdict(str, Enum):
    VALID = "Valid"
    REJECTED = "Rejected"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class EquationOutcome:
    label: str
    equation: Equation
    lhs: Path | AttrExpr
    rhs: Path | AttrExpr
    result: ProofResult

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "equation": f"{self.equation.lhs} = {self.equation.rhs}",
            "translated": {"lhs": format_expr(self.lhs), "rhs": format_expr(self.rhs)},
            "verdict": self.result.verdict.value,
            "trace": [step.to_json() for step in self.result.trace],
        }


@dataclass(frozen=True)
class ValidationReport:
    mapping: str
    verdict: MappingVerdict
    outcomes: tuple[EquationOutcome, ...] = ()
    strict: bool = True
    depth_bound: int = DEFAULT_DEPTH
    problems: tuple[str, ...] = ()

    @property
    def valid(self) -> bool:
        return self.verdict is MappingVerdict.VALID

    def failed(self) -> list[str]:
        return [o.label for o in self.outcomes if not o.result.provable]

    def to_json(self) -> dict:
        return {
            "mapping": self.mapping,
            "verdict": self.verdict.value,
            "strict": self.strict,
            "depth_bound": self.depth_bound,
            "problems": list(self.problems),
            "equations": [o.to_json() for o in self.outcomes],
        }


def _prove(T: Schema, lhs: Path | AttrExpr, rhs: Path | AttrExpr, depth: int) -> ProofResult:
    not_provable = ProofResult(Verdict.NOT_PROVABLE)
    if isinstance(lhs, Path) and isinstance(rhs, Path):
        return decide_path_equality(T, lhs, rhs, depth)
    if isinstance(lhs, Const) and isinstance(rhs, Const):
        return ProofResult(Verdict.PROVABLE) if lhs.value == rhs.value else not_provable
    if (isinstance(lhs, Apply) and isinstance(rhs, Apply) and lhs.fn == rhs.fn
            and len(lhs.args) == len(rhs.args)):
        trace, explored = [], 0
        for a, b in zip(lhs.args, rhs.args):
            sub = _prove(T, _unwrap(a), _unwrap(b), depth)
            explored += sub.explored
            if not sub.provable:
                return ProofResult(Verdict.NOT_PROVABLE, (), explored)
            trace.extend(sub.trace)
        return ProofResult(Verdict.PROVABLE, tuple(trace), explored)
    return not_provable


def check_mapping(F: Mapping, depth_bound: int = DEFAULT_DEPTH, strict: bool = True) -> ValidationReport:
    """Statically decide whether F sends every source equation to a target theorem.

    Raises IllFormedMapping (naming the first totality or typing failure)
    before any proving.  ``strict`` turns unprovable equations into a
    rejection; otherwise the verdict is Inconclusive.
    """
    ensure_well_formed(F)
    outcomes = []
    for i, eq in enumerate(F.source.equations):
        lhs = translate_path(F, eq.lhs)
        rhs = translate_path(F, eq.rhs)
        result = _prove(F.target, lhs, rhs, depth_bound)
        outcomes.append(EquationOutcome(eq.label or f"equation#{i + 1}", eq, lhs, rhs, result))
    if all(o.result.provable for o in outcomes):
        verdict = MappingVerdict.VALID
    elif strict:
        verdict = MappingVerdict.REJECTED
    else:
        verdict = MappingVerdict.INCONCLUSIVE
    return ValidationReport(F.name, verdict, tuple(outcomes), strict, depth_bound)


def rejected_report(F: Mapping, exc: IllFormedMapping, depth_bound: int, strict: bool) -> ValidationReport:
    return ValidationReport(F.name, MappingVerdict.REJECTED, (), strict, depth_bound,
                            tuple(mapping_problems(F)) or (str(exc),))


__all__ = [
    "Apply", "AttrExpr", "Const", "EquationOutcome", "Mapping", "MappingVerdict",
    "NullExpr", "PathExpr", "ValidationReport", "check_mapping", "compose_mappings",
    "ensure_well_formed", "expr_paths", "format_expr", "identity_mapping", "mapping_problems",
    "rejected_report", "translate_expr", "translate_path",
]
