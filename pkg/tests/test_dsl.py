import random

import pytest
from hypothesis import given, strategies as st

from funmig.catcore import validate_schema
from funmig.dsl import (FqlSyntaxError, KEYWORDS, load_program, load_text, parse, parse_file,
                        parse_value, pretty_print)
from funmig.dsl.nodes import EquationDecl, FkDecl, PathNode, SchemaDecl
from funmig.errors import FunmigError
from funmig.mapping import check_mapping
from funmig.migrate import ChaseConfig, delta, sigma
from funmig.values import Null, Term, lit
from oracles import random_instance, random_mapping, random_schema

A_FRAGMENT = ("schema A { entities Reaction; fks rev: Reaction -> Reaction; "
              "equations A3: Reaction.rev.rev = Reaction.id; }")


def test_parse_a_fragment():
    assert parse(A_FRAGMENT) == [SchemaDecl(
        "A", ("Reaction",), (FkDecl("rev", "Reaction", "Reaction"),), (),
        (EquationDecl("A3", PathNode("Reaction", ("rev", "rev")), PathNode("Reaction", ("id",))),),
    )]
    s = load_text(A_FRAGMENT).schemas["A"]
    assert [str(e) for e in s.equations] == ["A3: Reaction . rev . rev = Reaction . id"]


@pytest.mark.parametrize("text", ["", "\n\n", "-- only a comment\n", "  \t-- x\r\n-- y"])
def test_empty_input(text):
    assert parse(text) == []
    assert load_text(text).ok


@pytest.mark.parametrize("text,line,column,expected", [
    ("schema A { entities Reaction fks }", 1, 30, {",", ";"}),
    ("schema A {\n  entities R;\n  fks f : R -> ;\n}", 3, 16, {"ident"}),
    ("mapping", 1, 8, {"ident"}),
    ("schema schema { }", 1, 8, {"ident"}),
    ("schema A { entities R; }\nfrobnicate", 2, 1, None),
])
def test_syntax_errors_are_positioned(text, line, column, expected):
    with pytest.raises(FqlSyntaxError) as info:
        parse(text, "t.fql")
    err = info.value
    assert (err.span.file, err.span.line, err.span.column) == ("t.fql", line, column)
    if expected is not None:
        assert err.expected == frozenset(expected)
    assert str(err).startswith(f"t.fql:{line}:{column}: ")


def test_lexical_errors():
    with pytest.raises(FqlSyntaxError, match="1:1"):
        parse('"unterminated')
    with pytest.raises(FqlSyntaxError, match="2:3"):
        parse("schema A {\n  # }")


def test_crlf_matches_lf():
    text = pretty_print(load_text(A_FRAGMENT).schemas["A"])
    assert parse(text.replace("\n", "\r\n")) == parse(text)
    with pytest.raises(FqlSyntaxError) as info:
        parse("schema A {\r\n  entities R\r\n}")
    assert info.value.span.line == 3


def test_comments_are_ignored():
    text = "-- head\nschema A { -- trailing\n  entities R; -- more\n}\n"
    assert parse(text) == parse("schema A { entities R; }")


def test_keywords_are_lowercase_and_reserved():
    assert all(k == k.lower() for k in KEYWORDS)
    assert "id" in KEYWORDS
    assert load_text("schema Schema { entities Entities; }").ok


# --- elaboration ---------------------------------------------------------------

def test_reaction_schemas_elaborate(rxn):
    assert rxn.ok
    for name in ("A", "B", "C"):
        assert validate_schema(rxn.schemas[name]) == []
    assert {"a_to_b", "a_to_c", "c_to_a", "a_identity"} <= set(rxn.mappings)


def test_chem_olog_elaborates_cleanly(fx):
    prog = fx["chem_olog"].program()
    assert prog.diagnostics == [] and prog.validation == []
    assert len(prog.schemas["ChemOlog"].equations) == 8


@pytest.mark.parametrize("text,code,line,column", [
    ("schema A { entities R; }\nmapping m : A -> A {\n  entity R -> Q;\n}", "UnresolvedName", 3, 3),
    ("mapping m : A -> B { }", "UnresolvedName", 1, 1),
    ("schema A { entities R; }\nschema A { entities X; }", "DuplicateDeclaration", 2, 1),
    ("schema A { entities R; attrs a : R -> Int; }\ninstance i : A { R { row 1 { a = \"x\"; } } }",
     "TypeMismatch", 2, 34),
    ("schema A { entities R; fks f : R -> R; }\ninstance i : A { R { row 1 { f = 2; } } }",
     "DanglingForeignKey", 2, 1),
])
def test_elaboration_diagnostics(text, code, line, column):
    prog = load_text(text, file="d.fql")
    assert [d.code for d in prog.diagnostics] == [code]
    span = prog.diagnostics[0].span
    assert (span.file, span.line, span.column) == ("d.fql", line, column)


def test_validation_diagnostics_carry_spans():
    prog = load_text("schema A {\n  entities R;\n  attrs a : R -> Complex;\n}", file="v.fql")
    assert prog.diagnostics == []
    assert [d.code for d in prog.validation] == ["UnknownType"]
    assert prog.validation[0].span.file == "v.fql" and prog.validation[0].span.line >= 1


def test_elaboration_does_not_check_equations(rxn):
    # a_to_c fails its equation check but still elaborates
    assert "a_to_c" in rxn.mappings
    assert not check_mapping(rxn.mappings["a_to_c"]).valid


def test_program_get_lists_known_names(rxn):
    with pytest.raises(FunmigError, match="known: A, B, C"):
        rxn.get("schemas", "D")


def test_parse_value():
    assert parse_value("3", "Int") == lit("Int", 3)
    assert parse_value("3", "Float") == lit("Float", 3.0)
    assert parse_value("?n", "String") == Null("n", "String")
    assert parse_value('upper("a")', "String") == lit("String", "A")
    assert parse_value("upper(?n)", "String") == Term("upper", (Null("n", "String"),), "String")
    with pytest.raises(FunmigError):
        parse_value('"x"', "Int")


# --- files and imports ---------------------------------------------------------

def test_imports_and_cycles(tmp_path):
    (tmp_path / "a.fql").write_text('import "b.fql";\nschema A { entities X; }\n')
    (tmp_path / "b.fql").write_text('import "a.fql";\nschema B { entities Y; }\n')
    prog = load_program(tmp_path / "a.fql")
    assert set(prog.schemas) == {"A", "B"}
    assert [d.code for d in prog.diagnostics] == ["ImportCycle"]
    assert "a.fql -> b.fql -> a.fql" in prog.diagnostics[0].message


def test_diamond_import_loads_once(tmp_path):
    (tmp_path / "base.fql").write_text("schema Base { entities X; }\n")
    (tmp_path / "l.fql").write_text('import "base.fql";\n')
    (tmp_path / "r.fql").write_text('import "base.fql";\n')
    prog = load_program([tmp_path / "l.fql", tmp_path / "r.fql"])
    assert prog.ok and set(prog.schemas) == {"Base"}


def test_missing_import(tmp_path):
    (tmp_path / "a.fql").write_text('import "gone.fql";\n')
    prog = load_program(tmp_path / "a.fql")
    assert [d.code for d in prog.diagnostics] == ["MissingFile"]
    assert prog.diagnostics[0].span.line == 1


# --- pretty-printing -------------------------------------------------------------

def test_cell_attribute_mapping_line(overlap):
    text = pretty_print(overlap.mappings["to_catalysis"])
    assert "  attr Structures . x0 -> Structure . cell_id . x0;" in text.splitlines()


def test_every_fixture_file_round_trips(fx):
    files = [f for project in fx.values() for f in project.sources]
    assert len(files) >= 10
    for f in files:
        decls = parse_file(f)
        assert parse(pretty_print(decls)) == decls, f.name


def test_every_fixture_program_round_trips(fx):
    for name, project in fx.items():
        prog = project.program()
        again = load_text(pretty_print(prog))
        assert again.ok, name
        for table in ("schemas", "mappings", "merges", "filters", "pipelines"):
            assert getattr(again, table) == getattr(prog, table), (name, table)


def test_fixture_instances_round_trip(a_data, oqmd_data, overlap):
    landed = delta(overlap.mappings["land"], oqmd_data)
    migrated = sigma(overlap.mappings["to_catalysis"], landed)
    for inst in (a_data, oqmd_data, landed, migrated):
        again = load_text(pretty_print([inst.schema, inst]))
        assert again.ok
        assert again.instances[inst.name] == inst


def test_pretty_print_is_deterministic(overlap):
    assert pretty_print(overlap) == pretty_print(overlap)
    assert pretty_print([]) == ""


@given(st.integers(0, 10_000))
def test_random_schema_and_mapping_round_trip(seed):
    rng = random.Random(seed)
    T = random_schema(rng, "T", n_attrs=2)
    F = random_mapping(rng, T, n_attrs=2)
    again = load_text(pretty_print([T, F.source, F]))
    assert again.ok
    assert again.schemas == {"T": T, "S": F.source}
    assert again.mappings[F.name] == F


@given(st.integers(0, 10_000))
def test_random_instances_with_nulls_round_trip(seed):
    rng = random.Random(seed)
    T = random_schema(rng, "T", n_attrs=2)
    F = random_mapping(rng, T, n_attrs=2)
    I = random_instance(rng, F.source, 3)
    if I is None or not check_mapping(F).valid:
        return
    try:
        inst = sigma(F, I, ChaseConfig(max_fresh_rows=50))
    except FunmigError:
        return
    again = load_text(pretty_print([T, inst]))
    assert again.ok, again.diagnostics
    assert again.instances[inst.name] == inst
