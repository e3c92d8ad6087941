"""``funmig`` command line.

Exit codes:

====  ==========================================================
0     success
1     syntax, elaboration or input error (bad CSV, bad flags)
2     schema validation failed
3     mapping rejected
4     mapping inconclusive (permissive mode only)
5     chase budget exceeded, contradiction or key conflict
6     instance violates its schema's equations
====  ==========================================================

Reports go to stdout, diagnostics to stderr.  Outputs are staged in a
temporary directory and moved into ``--out`` only when the command
succeeds.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from pathlib import Path as FsPath
from typing import Callable, Sequence

from . import __version__
from .catcore import DEFAULT_DEPTH, Schema
from .dsl import FqlSyntaxError, Program, load_program, pretty_print
from .errors import (ChaseBudgetExceeded, Contradiction, CsvError, EvaluationError, FunmigError,
                     IllFormedMapping, KeyConflict, PreconditionFailed)
from .instance import Instance, check_instance
from .io import load_csv, write_bundle
from .mapping import Mapping, MappingVerdict, ValidationReport, check_mapping, rejected_report
from .migrate import ChaseConfig, Pipeline, Step, merge, run_pipeline

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SCHEMA = 2
EXIT_REJECTED = 3
EXIT_INCONCLUSIVE = 4
EXIT_CHASE = 5
EXIT_VIOLATIONS = 6

DEPTH_ENV = "FUNMIG_DEPTH"


class _Exit(Exception):
    def __init__(self, code: int, message: str = "") -> None:
        super().__init__(message)
        self.code = code
        self.message = message


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _dump(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False))


def default_depth() -> int:
    raw = os.environ.get(DEPTH_ENV)
    if raw is None:
        return DEFAULT_DEPTH
    try:
        depth = int(raw)
    except ValueError:
        raise _Exit(EXIT_INPUT, f"{DEPTH_ENV}={raw!r} is not an integer") from None
    if depth < 1:
        raise _Exit(EXIT_INPUT, f"{DEPTH_ENV} must be positive")
    return depth


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


# ---------------------------------------------------------------------------
# shared steps

def _load(files: Sequence[str], fail_on_validation: bool = True) -> Program:
    try:
        prog = load_program(files)
    except FqlSyntaxError as exc:
        raise _Exit(EXIT_INPUT, f"syntax error: {exc}") from None
    except OSError as exc:
        raise _Exit(EXIT_INPUT, str(exc)) from None
    for d in prog.diagnostics:
        _err(_format_diag(d))
    if prog.diagnostics:
        raise _Exit(EXIT_INPUT)
    if fail_on_validation and prog.validation:
        for d in prog.validation:
            _err(_format_diag(d))
        raise _Exit(EXIT_SCHEMA)
    return prog


def _format_diag(d) -> str:
    where = f"{d.span}: " if d.span is not None else ""
    return f"{where}{d.code}: {d.message}"


def _get(prog: Program, table: str, name: str):
    try:
        return prog.get(table, name)
    except FunmigError as exc:
        raise _Exit(EXIT_INPUT, str(exc)) from None


def _validate(F: Mapping, depth: int, strict: bool = True) -> ValidationReport:
    try:
        return check_mapping(F, depth, strict)
    except IllFormedMapping as exc:
        return rejected_report(F, exc, depth, strict)


def _format_report(report: ValidationReport) -> str:
    lines = [f"mapping {report.mapping}: {report.verdict.value} "
             f"(depth bound {report.depth_bound}, {'strict' if report.strict else 'permissive'})"]
    lines += [f"  problem: {p}" for p in report.problems]
    for o in report.outcomes:
        translated = o.to_json()["translated"]
        lines.append(f"  {o.label}: {o.equation.lhs} = {o.equation.rhs}")
        lines.append(f"    becomes {translated['lhs']} = {translated['rhs']}: "
                     f"{o.result.verdict.value}")
        for step in o.result.trace:
            lines.append(f"      {step.before}  =[{step.equation} {step.direction}]=>  "
                         f"{step.after}")
    return "\n".join(lines)


def _require_valid(mappings: Sequence[Mapping], depth: int) -> None:
    for F in mappings:
        report = _validate(F, depth)
        if report.verdict is not MappingVerdict.VALID:
            _err(_format_report(report))
            raise _Exit(EXIT_REJECTED, f"refusing to migrate along {F.name}: "
                        f"unprovable {', '.join(report.failed()) or 'well-formedness'}")


def _load_data(directory: str, schema: Schema, name: str | None = None) -> Instance:
    try:
        return load_csv(directory, schema, name)
    except CsvError as exc:
        raise _Exit(EXIT_INPUT, f"{exc.code}: {exc}") from None


def _publish(out: str, fill: Callable[[FsPath], list[FsPath]]) -> list[FsPath]:
    target = FsPath(out)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = FsPath(tempfile.mkdtemp(prefix=".funmig-", dir=target.parent))
    try:
        files = fill(staging)
        target.mkdir(exist_ok=True)
        moved = []
        for f in files:
            dest = target / f.name
            os.replace(f, dest)
            moved.append(dest)
        return moved
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _chase_config(args) -> ChaseConfig:
    return ChaseConfig(max_fresh_rows=args.max_fresh_rows, max_rounds=args.max_rounds)


def _run_engine(thunk):
    try:
        return thunk()
    except KeyConflict as exc:
        for c in exc.conflicts:
            _err(f"conflict on {c['entity']} rows {', '.join(c['rows'])}: "
                 f"{c['attribute']} = {' vs '.join(c['values'])}")
        raise _Exit(EXIT_CHASE, f"KeyConflict: {exc}") from None
    except (ChaseBudgetExceeded, Contradiction) as exc:
        raise _Exit(EXIT_CHASE, f"{exc.code}: {exc}") from None
    except PreconditionFailed as exc:
        raise _Exit(EXIT_VIOLATIONS, f"{exc.code}: {exc}") from None
    except EvaluationError as exc:
        raise _Exit(EXIT_INPUT, f"{exc.code}: {exc}") from None


def _summary(inst: Instance) -> dict:
    return {"instance": inst.name, "schema": inst.schema.name,
            "rows": {e: len(inst.rows[e]) for e in inst.schema.entities}}


# ---------------------------------------------------------------------------
# subcommands

def cmd_check_schema(args) -> int:
    prog = _load(args.files, fail_on_validation=False)
    if args.json:
        _dump({"schemas": sorted(prog.schemas),
               "diagnostics": [d.to_json() for d in prog.validation],
               "ok": not prog.validation})
    for d in prog.validation:
        _err(_format_diag(d))
    if prog.validation:
        return EXIT_SCHEMA
    if not args.json:
        for name, s in prog.schemas.items():
            print(f"schema {name}: ok ({len(s.entities)} entities, {len(s.fks)} fks, "
                  f"{len(s.attrs)} attrs, {len(s.equations)} equations)")
    return EXIT_OK


def cmd_check_mapping(args) -> int:
    prog = _load(args.files)
    F = _get(prog, "mappings", args.mapping)
    report = _validate(F, args.depth or default_depth(), strict=not args.permissive)
    if args.json:
        _dump(report.to_json())
    else:
        print(_format_report(report))
    return {MappingVerdict.VALID: EXIT_OK, MappingVerdict.REJECTED: EXIT_REJECTED,
            MappingVerdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}[report.verdict]


def cmd_migrate(args) -> int:
    prog = _load(args.files)
    if args.pipeline:
        if args.mapping or args.mode:
            raise _Exit(EXIT_INPUT, "--pipeline cannot be combined with --mapping/--mode")
        pipeline: Pipeline = _get(prog, "pipelines", args.pipeline)
    else:
        if not (args.mapping and args.mode):
            raise _Exit(EXIT_INPUT, "give --mapping and --mode, or --pipeline")
        pipeline = Pipeline(args.mapping, (Step(args.mode, _get(prog, "mappings", args.mapping)),))
    depth = args.depth or default_depth()
    _require_valid(pipeline.mappings(), depth)
    data = _load_data(args.data, pipeline.steps[0].input_schema, args.name)
    result = _run_engine(lambda: run_pipeline(pipeline, data, _chase_config(args),
                                              depth_bound=depth))
    files = _publish(args.out, lambda d: write_bundle(result, d))
    if args.json:
        _dump({**_summary(result), "files": sorted(f.name for f in files)})
    else:
        counts = ", ".join(f"{e}={n}" for e, n in _summary(result)["rows"].items())
        print(f"migrated {data.name} along {pipeline.name} into {result.schema.name}: {counts}")
        print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def cmd_merge(args) -> int:
    prog = _load(args.files)
    spec = _get(prog, "merges", args.spec)
    depth = args.depth or default_depth()
    _require_valid([spec.left, spec.right], depth)
    left = _load_data(args.left_data, spec.left.target, args.left_name)
    right = _load_data(args.right_data, spec.right.target, args.right_name)
    T, merged, inc1, inc2 = _run_engine(
        lambda: merge(spec, left, right, _chase_config(args), depth_bound=depth))

    def fill(d: FsPath) -> list[FsPath]:
        schema_file = d / "schema.fql"
        schema_file.write_text(pretty_print(T), encoding="utf-8")
        return [schema_file, *write_bundle(merged, d)]

    files = _publish(args.out, fill)
    if args.json:
        _dump({**_summary(merged), "files": sorted(f.name for f in files),
               "inclusions": {"left": {"schema": inc1.source.name, "entities": inc1.entity_map},
                              "right": {"schema": inc2.source.name, "entities": inc2.entity_map}}})
    else:
        counts = ", ".join(f"{e}={n}" for e, n in _summary(merged)["rows"].items())
        print(f"merged {left.name} and {right.name} into {T.name}: {counts}")
        print(f"wrote {len(files)} files to {args.out}")
    return EXIT_OK


def cmd_check_instance(args) -> int:
    prog = _load(args.files)
    if args.schema:
        schema = _get(prog, "schemas", args.schema)
    elif len(prog.schemas) == 1:
        schema = next(iter(prog.schemas.values()))
    else:
        raise _Exit(EXIT_INPUT, f"several schemas declared ({', '.join(sorted(prog.schemas))}); "
                    "choose one with --schema")
    inst = _load_data(args.data, schema)
    report = check_instance(inst, args.atol)
    if args.json:
        _dump({"schema": schema.name, "instance": inst.name, "ok": report.ok,
               "violations": [v.to_json() for v in report]})
    else:
        for v in report:
            print(v)
        if report.ok:
            print(f"instance {inst.name} satisfies {schema.name}")
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funmig",
        description="Validate schema mappings and migrate data along them.",
        epilog="exit codes: 0 ok, 1 input error, 2 invalid schema, 3 mapping rejected, "
               "4 inconclusive, 5 chase failure or key conflict, 6 constraint violations")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def files(p):
        p.add_argument("files", nargs="+", help=".fql files (imports are followed)")

    def depth(p):
        p.add_argument("--depth", type=_positive, default=None,
                       help=f"rewrite-step bound for the prover (default {DEFAULT_DEPTH}, "
                            f"or ${DEPTH_ENV})")

    def chase(p):
        p.add_argument("--max-fresh-rows", type=_positive, default=ChaseConfig.max_fresh_rows)
        p.add_argument("--max-rounds", type=_positive, default=ChaseConfig.max_rounds)

    p = sub.add_parser("check-schema", help="parse, elaborate and validate schemas")
    files(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_check_schema)

    p = sub.add_parser("check-mapping", help="prove that a mapping preserves every equation")
    files(p)
    p.add_argument("--mapping", required=True)
    depth(p)
    p.add_argument("--permissive", action="store_true",
                   help="report unprovable equations as inconclusive instead of rejecting")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_check_mapping)

    p = sub.add_parser("migrate", help="run delta or sigma along a mapping, or a pipeline")
    files(p)
    p.add_argument("--mapping")
    p.add_argument("--mode", choices=("delta", "sigma"))
    p.add_argument("--pipeline", help="a migrate declaration to run instead of one mapping")
    p.add_argument("--data", required=True, help="input CSV bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", help="database name used in provenance (default: data dir name)")
    depth(p)
    chase(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_migrate)

    p = sub.add_parser("merge", help="merge two bundles over a declared overlap")
    files(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--left-data", required=True)
    p.add_argument("--right-data", required=True)
    p.add_argument("--left-name")
    p.add_argument("--right-name")
    p.add_argument("--out", required=True)
    depth(p)
    chase(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_merge)

    p = sub.add_parser("check-instance", help="check a CSV bundle against its schema")
    files(p)
    p.add_argument("--data", required=True)
    p.add_argument("--schema", help="schema to check against (needed when several are declared)")
    p.add_argument("--atol", type=float, default=0.0, help="absolute tolerance for Float equality")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_check_instance)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.run(args)
    except _Exit as exc:
        if exc.message:
            _err(exc.message)
        return exc.code
    except CsvError as exc:
        _err(f"{exc.code}: {exc}")
        return EXIT_INPUT
    except FunmigError as exc:
        _err(f"{exc.code}: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
