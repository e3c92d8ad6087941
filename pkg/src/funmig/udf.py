"""Typed registry of user-defined functions referenced from attribute mappings.

Bodies are plain Python callables over literal values.  Applying a function
to arguments that contain a labelled null does not run the body; the result
is a symbolic :class:`~funmig.values.Term` instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .catcore import BASE_TYPES
from .errors import ArityMismatch, DuplicateName, EvaluationError, TypeMismatch, UnknownFunction
from .values import PY_TYPES, Term, Value, has_null, lit


@dataclass(frozen=True)
class UdfSignature:
    name: str
    arg_types: tuple[str, ...]
    return_type: str
    doc: str = ""

    def __post_init__(self) -> None:
        for t in (*self.arg_types, self.return_type):
            if t not in BASE_TYPES:
                raise TypeMismatch(f"{self.name}: {t} is not a base type")

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.arg_types)}) -> {self.return_type}"


class UdfRegistry:
    def __init__(self) -> None:
        self._sigs: dict[str, UdfSignature] = {}
        self._bodies: dict[str, Callable] = {}

    def register(self, sig: UdfSignature, body: Callable) -> "UdfRegistry":
        if sig.name in self._sigs:
            raise DuplicateName(f"function {sig.name} is already registered")
        self._sigs[sig.name] = sig
        self._bodies[sig.name] = body
        return self

    def copy(self) -> "UdfRegistry":
        other = UdfRegistry()
        other._sigs = dict(self._sigs)
        other._bodies = dict(self._bodies)
        return other

    def __contains__(self, name: str) -> bool:
        return name in self._sigs

    def signature(self, name: str) -> UdfSignature:
        try:
            return self._sigs[name]
        except KeyError:
            raise UnknownFunction(f"no function named {name!r}") from None

    def signatures(self) -> list[UdfSignature]:
        return [self._sigs[k] for k in sorted(self._sigs)]

    def apply(self, name: str, args: Sequence[Value], context: str = "") -> Value:
        sig = self.signature(name)
        if len(args) != sig.arity:
            raise ArityMismatch(f"{name} takes {sig.arity} arguments, got {len(args)}")
        for i, (arg, expected) in enumerate(zip(args, sig.arg_types)):
            if arg.type != expected:
                raise TypeMismatch(f"{name} argument {i + 1} must be {expected}, got {arg.type}")
        if any(has_null(a) for a in args):
            return Term(name, tuple(args), sig.return_type)
        try:
            result = self._bodies[name](*(a.value for a in args))
        except EvaluationError as exc:
            where = f" ({context})" if context else ""
            raise EvaluationError(f"{name}: {exc}{where}") from None
        except Exception as exc:  # body bugs surface as evaluation errors
            where = f" ({context})" if context else ""
            raise EvaluationError(f"{name}: {type(exc).__name__}: {exc}{where}") from exc
        try:
            return lit(sig.return_type, result)
        except TypeMismatch:
            raise EvaluationError(
                f"{name} returned {result!r}, expected {sig.return_type}") from None


# ---------------------------------------------------------------------------
# built-in catalogue

def constant(name: str, type_: str, value: object) -> tuple[UdfSignature, Callable]:
    """Nullary function standing for a database-wide implicit value."""
    if type(value) is not PY_TYPES[type_] and not (type_ == "Float" and isinstance(value, int)):
        raise TypeMismatch(f"{value!r} is not a {type_}")
    return UdfSignature(name, (), type_, f"constant {value!r}"), (lambda: value)


def scale(name: str, factor: float) -> tuple[UdfSignature, Callable]:
    """Unit conversion by a constant factor."""
    return (UdfSignature(name, ("Float",), "Float", f"multiply by {factor!r}"),
            lambda x: x * factor)


def _json_object(document: str) -> dict:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise EvaluationError(f"malformed JSON: {exc.msg} at char {exc.pos}") from None
    if not isinstance(obj, dict):
        raise EvaluationError("JSON document is not an object")
    return obj


def _flat_field(document: str, field: str):
    obj = _json_object(document)
    if field not in obj:
        raise EvaluationError(f"field {field!r} missing from JSON document")
    value = obj[field]
    if isinstance(value, (dict, list)) or value is None:
        raise EvaluationError(f"field {field!r} is not a string or number")
    return value


def json_extract(document: str, field: str) -> str:
    value = _flat_field(document, field)
    if isinstance(value, str):
        return value
    return json.dumps(value)


def json_extract_float(document: str, field: str) -> float:
    value = _flat_field(document, field)
    if isinstance(value, bool):
        raise EvaluationError(f"field {field!r} is a boolean")
    try:
        out = float(value)
    except ValueError:
        raise EvaluationError(f"field {field!r} is not numeric: {value!r}") from None
    if not math.isfinite(out):
        raise EvaluationError(f"field {field!r} is not finite")
    return out


SYSTEM_TYPES = {3: "bulk", 2: "surface", 0: "molecule"}


def detect_system_type(pbc_a: bool, pbc_b: bool, pbc_c: bool) -> str:
    """Classify a structure by how many lattice directions are periodic."""
    periodic = sum((pbc_a, pbc_b, pbc_c))
    try:
        return SYSTEM_TYPES[periodic]
    except KeyError:
        raise EvaluationError(
            f"{periodic} periodic direction(s) is neither bulk, surface nor molecule") from None


def builtin_registry() -> UdfRegistry:
    reg = UdfRegistry()
    reg.register(*constant("dft_code", "String", "VASP"))
    reg.register(UdfSignature("json_extract", ("String", "String"), "String",
                              "string value of a field of a flat JSON object"), json_extract)
    reg.register(UdfSignature("json_extract_float", ("String", "String"), "Float",
                              "numeric field of a flat JSON object"), json_extract_float)
    reg.register(UdfSignature("detect_system_type", ("Bool", "Bool", "Bool"), "String",
                              "bulk, surface or molecule from periodicity flags"),
                 detect_system_type)
    reg.register(*scale("a3_to_nm3", 1e-3))
    reg.register(*scale("ev_to_mev", 1e3))
    reg.register(UdfSignature("upper", ("String",), "String", "upper-case a string"), str.upper)
    return reg


DEFAULT_REGISTRY = builtin_registry()

