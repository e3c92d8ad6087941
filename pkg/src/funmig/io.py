"""CSV bundles and the shipped fixture projects.

A bundle is a directory with one ``<Entity>.csv`` per entity.  The header
is ``id`` followed by the entity's foreign keys and then its attributes, in
declaration order.  Foreign-key cells hold row ids.  Attribute cells hold
literals, ``?label`` for a labelled null, or ``=f(...)`` for a symbolic
term; a string that starts with ``?``, ``=`` or a backslash is escaped
with a leading backslash.  An empty non-String cell is an unknown value and
loads as a fresh null.

Lineage goes to ``<Entity>.provenance.csv`` (``id,source``) and residual
term equations to ``_equalities.csv`` (``lhs,rhs``).
"""

from __future__ import annotations

import csv
import math
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path as FsPath

from .catcore import Schema
from .errors import (CsvDanglingForeignKey, DuplicateId, FunmigError, HeaderMismatch,
                     MissingFile, UnparsableLiteral)
from .instance import Instance, InstanceBuilder
from .udf import DEFAULT_REGISTRY, UdfRegistry
from .values import Null, Term, Value, format_value, lit

PROVENANCE_SUFFIX = ".provenance.csv"
EQUALITIES_FILE = "_equalities.csv"

_INT = re.compile(r"[+-]?\d+\Z")
_ESCAPED = ("?", "=", "\\")


def natural_key(row: str) -> tuple:
    """Order ids so that 2 < 10 and ``Cell#2`` < ``Cell#10``."""
    return tuple((0, int(part), "") if part.isdigit() else (1, 0, part)
                 for part in re.split(r"(\d+)", row) if part)


# ---------------------------------------------------------------------------
# cells

def encode_value(v: Value) -> str:
    if isinstance(v, Null):
        return f"?{v.label}"
    if isinstance(v, Term):
        return "=" + format_value(v)
    if v.type == "String":
        return "\\" + v.value if v.value.startswith(_ESCAPED) else v.value
    if v.type == "Bool":
        return "true" if v.value else "false"
    if v.type == "Float":
        if not math.isfinite(v.value):
            raise FunmigError(f"cannot write non-finite float {v.value!r}")
        return repr(v.value)
    return str(v.value)


def decode_value(cell: str, type_: str, registry: UdfRegistry = DEFAULT_REGISTRY,
                 null_types: dict[str, str] | None = None) -> Value | None:
    """Parse one attribute cell; ``None`` means an unknown value."""
    if cell.startswith("?"):
        label = cell[1:]
        if not re.fullmatch(r"[A-Za-z0-9_']+", label):
            raise ValueError(f"bad null label {cell!r}")
        if null_types is not None:
            known = null_types.setdefault(label, type_)
            if known != type_:
                raise ValueError(f"null {cell} is used as {known} and {type_}")
        return Null(label, type_)
    if cell.startswith("="):
        from .dsl import parse_value
        try:
            return parse_value(cell[1:], type_, registry, null_types)
        except FunmigError as exc:
            raise ValueError(str(exc)) from None
    if type_ == "String":
        return lit("String", cell[1:] if cell.startswith("\\") else cell)
    if cell == "":
        return None
    if type_ == "Int":
        if not _INT.match(cell):
            raise ValueError(f"{cell!r} is not an Int")
        return lit("Int", int(cell))
    if type_ == "Float":
        value = float(cell)
        if not math.isfinite(value):
            raise ValueError(f"{cell!r} is not a finite Float")
        return lit("Float", value)
    if type_ == "Bool":
        if cell not in ("true", "false"):
            raise ValueError(f"{cell!r} is not a Bool (true or false)")
        return lit("Bool", cell == "true")
    raise ValueError(f"unknown type {type_}")


def header_for(s: Schema, entity: str) -> list[str]:
    return ["id", *(f.name for f in s.fks_from(entity)), *(a.name for a in s.attrs_from(entity))]


# ---------------------------------------------------------------------------
# load

def _read(path: FsPath) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def load_csv(directory: str | os.PathLike, s: Schema, name: str | None = None,
             registry: UdfRegistry | None = None) -> Instance:
    """Load a bundle; referential integrity is checked, equations are not."""
    directory = FsPath(directory)
    registry = registry or DEFAULT_REGISTRY
    if not directory.is_dir():
        raise MissingFile(f"bundle directory {directory} does not exist", str(directory))
    b = InstanceBuilder(s, directory.name if name is None else name, registry)
    tables: dict[str, tuple[str, list[str], list[list[str]]]] = {}
    for entity in s.entities:
        path = directory / f"{entity}.csv"
        fname = path.name
        if not path.is_file():
            raise MissingFile(f"no file for entity {entity}", fname)
        lines = _read(path)
        expected = header_for(s, entity)
        if not lines:
            raise HeaderMismatch(f"empty file, expected header {','.join(expected)}", fname, 1)
        header = lines[0]
        if header != expected:
            extra = [h for h in header if h not in expected]
            missing = [h for h in expected if h not in header]
            column = (extra or missing or [None])[0]
            raise HeaderMismatch(f"header {','.join(header)} does not match "
                                 f"{','.join(expected)}", fname, 1, column)
        tables[entity] = (fname, header, lines[1:])
        for i, record in enumerate(lines[1:], start=2):
            if len(record) != len(header):
                raise HeaderMismatch(f"expected {len(header)} cells, got {len(record)}", fname, i)
            rid = record[0]
            if rid == "":
                raise DuplicateId("empty row id", fname, i, "id")
            if b.has_row(entity, rid):
                raise DuplicateId(f"row id {rid!r} repeats", fname, i, "id")
            b.add_row(entity, rid)

    null_types: dict[str, str] = {}
    for entity, (fname, header, records) in tables.items():
        fks = {f.name: f for f in s.fks_from(entity)}
        attrs = {a.name: a for a in s.attrs_from(entity)}
        for i, record in enumerate(records, start=2):
            rid = record[0]
            for column, cell in zip(header[1:], record[1:]):
                if column in fks:
                    target = fks[column].target
                    if not b.has_row(target, cell):
                        raise CsvDanglingForeignKey(
                            f"{cell!r} is not a {target} row", fname, i, column)
                    b.set_fk(entity, column, rid, cell)
                else:
                    type_ = attrs[column].type
                    try:
                        value = decode_value(cell, type_, registry, null_types)
                    except (ValueError, FunmigError) as exc:
                        raise UnparsableLiteral(f"{exc}", fname, i, column) from None
                    if value is not None:
                        b.set_attr(entity, column, rid, value)

    for entity in s.entities:
        path = directory / f"{entity}{PROVENANCE_SUFFIX}"
        if not path.is_file():
            continue
        lines = _read(path)
        if not lines or lines[0] != ["id", "source"]:
            raise HeaderMismatch("provenance header must be id,source", path.name, 1)
        lineage: dict[str, list[str]] = {}
        for i, record in enumerate(lines[1:], start=2):
            if len(record) != 2 or not b.has_row(entity, record[0]):
                raise CsvDanglingForeignKey("provenance for an unknown row", path.name, i, "id")
            lineage.setdefault(record[0], []).append(record[1])
        for rid, tags in lineage.items():
            b.lineage[(entity, rid)] = tuple(tags)

    path = directory / EQUALITIES_FILE
    if path.is_file():
        lines = _read(path)
        if not lines or lines[0] != ["lhs", "rhs"]:
            raise HeaderMismatch("equalities header must be lhs,rhs", path.name, 1)
        from .dsl import parse_value
        for i, record in enumerate(lines[1:], start=2):
            if len(record) != 2 or not record[0].startswith("="):
                raise UnparsableLiteral("expected =term,value", path.name, i)
            try:
                lhs = _parse_term(record[0][1:], registry, null_types, parse_value)
                rhs = decode_value(record[1], lhs.type, registry, null_types)
            except (ValueError, FunmigError) as exc:
                raise UnparsableLiteral(str(exc), path.name, i) from None
            b.equate(lhs, rhs)
    try:
        return b.finalize()
    except FunmigError as exc:
        raise UnparsableLiteral(str(exc), str(directory)) from None


def _parse_term(text: str, registry: UdfRegistry, null_types: dict[str, str], parse_value):
    fn = text.split("(", 1)[0].strip()
    return parse_value(text, registry.signature(fn).return_type, registry, null_types)


# ---------------------------------------------------------------------------
# export

def _write(path: FsPath, rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


def write_bundle(I: Instance, directory: str | os.PathLike) -> list[FsPath]:
    """Write ``I`` into an existing directory; returns the files written."""
    directory = FsPath(directory)
    s = I.schema
    written = []
    for entity in s.entities:
        rows = [header_for(s, entity)]
        fks = s.fks_from(entity)
        attrs = s.attrs_from(entity)
        for r in sorted(I.rows[entity], key=natural_key):
            rows.append([r, *(I.fks[(entity, f.name)][r] for f in fks),
                         *(encode_value(I.attrs[(entity, a.name)][r]) for a in attrs)])
        path = directory / f"{entity}.csv"
        _write(path, rows)
        written.append(path)
    if I.lineage:
        for entity in s.entities:
            rows = [["id", "source"]]
            for r in sorted(I.rows[entity], key=natural_key):
                rows += [[r, tag] for tag in I.lineage.get((entity, r), ())]
            path = directory / f"{entity}{PROVENANCE_SUFFIX}"
            _write(path, rows)
            written.append(path)
    if I.equations:
        path = directory / EQUALITIES_FILE
        _write(path, [["lhs", "rhs"], *([encode_value(a), encode_value(b)]
                                        for a, b in I.equations)])
        written.append(path)
    return written


def export_csv(I: Instance, directory: str | os.PathLike) -> list[FsPath]:
    """Write a bundle atomically: nothing changes at ``directory`` on failure.

    Files of the bundle are replaced; unrelated files already in the
    directory are left alone.
    """
    directory = FsPath(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    staging = FsPath(tempfile.mkdtemp(prefix=".funmig-", dir=directory.parent))
    try:
        files = write_bundle(I, staging)
        directory.mkdir(exist_ok=True)
        out = []
        for f in files:
            dest = directory / f.name
            os.replace(f, dest)
            out.append(dest)
        return out
    finally:
        shutil.rmtree(staging, ignore_errors=True)


# ---------------------------------------------------------------------------
# fixtures

@dataclass(frozen=True)
class FixtureProject:
    name: str
    root: FsPath

    @property
    def sources(self) -> list[FsPath]:
        return sorted(self.root.glob("*.fql"))

    @property
    def bundles(self) -> dict[str, FsPath]:
        csv_root = self.root / "csv"
        if not csv_root.is_dir():
            return {}
        return {p.name: p for p in sorted(csv_root.iterdir()) if p.is_dir()}

    def bundle(self, name: str) -> FsPath:
        try:
            return self.bundles[name]
        except KeyError:
            raise MissingFile(f"fixture {self.name} has no bundle {name}") from None

    def program(self, registry: UdfRegistry | None = None):
        from .dsl import load_program
        return load_program(self.sources, registry)

    def load(self, bundle: str, schema: Schema, registry: UdfRegistry | None = None) -> Instance:
        return load_csv(self.bundle(bundle), schema, bundle, registry)


def fixtures_root() -> FsPath:
    return FsPath(str(resources.files("funmig") / "fixtures"))


def fixtures() -> dict[str, FixtureProject]:
    """The shipped fixture projects, keyed by name."""
    root = fixtures_root()
    return {p.name: FixtureProject(p.name, p) for p in sorted(root.iterdir())
            if p.is_dir() and any(p.glob("*.fql"))}
