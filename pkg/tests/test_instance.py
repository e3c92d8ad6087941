import random

import pytest
from hypothesis import given, strategies as st

from funmig.catcore import compose
from funmig.errors import Contradiction, DanglingForeignKey, TypeMismatch, UnknownEntity
from funmig.instance import (Instance, InstanceBuilder, check_instance, equate_nulls,
                             evaluate_path, relabel_rows)
from funmig.udf import UdfRegistry, UdfSignature
from funmig.values import Lit, Null, Term, ValueClosure, lit
from oracles import naive_congruence, naive_violations, random_schema, words_from


def test_fixture_a_data_shape(a_data):
    assert a_data.size() == {"Reaction": 3, "Simulation": 2}
    assert check_instance(a_data).ok


def test_evaluate_identity_and_involution(rxn, a_data):
    A = rxn.schemas["A"]
    assert evaluate_path(a_data, "3", A.path("Reaction")) == "3"
    assert evaluate_path(a_data, "3", A.path("Reaction", "rev.rev")) == "3"
    assert evaluate_path(a_data, "1", A.path("Reaction", "rev")) == "2"


def test_evaluate_denormalized_cell(fx):
    prog = fx["catalysis_mini"].program()
    cat = prog.schemas["Catalysis"]
    inst = fx["catalysis_mini"].load("catalysis_data", cat)
    s = inst.rows["Structure"][0]
    cell = inst.fks[("Structure", "cell_id")][s]
    assert (evaluate_path(inst, s, cat.path("Structure", "cell_id.x0"))
            == inst.attrs[("Cell", "x0")][cell])


def test_migrated_to_b_violations(fx, rxn):
    inst = fx["rxnnet"].load("migrated_to_b", rxn.schemas["A"])
    found = {(v.equation, v.entity, v.row) for v in check_instance(inst)}
    assert ("A2", "Simulation", "2") in found
    assert ("A1", "Reaction", "3") in found
    assert [str(v) for v in check_instance(inst)][0] == "A1@Reaction:3  lhs=2  rhs=1"


def test_empty_instance_satisfies_everything(rxn):
    assert check_instance(Instance.empty(rxn.schemas["A"])).ok


def test_builder_defaults_and_errors(rxn):
    A = rxn.schemas["A"]
    b = InstanceBuilder(A, "t")
    b.add_row("Simulation", "1")
    b.add_row("Reaction", "1")
    b.set_fk("Reaction", "rev", "1", "1").set_fk("Reaction", "sim", "1", "1")
    b.set_fk("Simulation", "rds", "1", "1")
    inst = b.finalize()
    assert inst.attrs[("Reaction", "label")]["1"] == Null("Reaction_label_1", "String")
    assert check_instance(inst).ok
    with pytest.raises(UnknownEntity):
        b.add_row("Nope", "1")
    with pytest.raises(TypeMismatch):
        b.set_attr("Reaction", "rate", "1", "fast")


def test_finalize_reports_missing_fk(rxn):
    b = InstanceBuilder(rxn.schemas["A"])
    b.add_row("Simulation", "1").add_row("Reaction", "7")
    b.set_fk("Simulation", "rds", "1", "7").set_fk("Reaction", "sim", "7", "1")
    with pytest.raises(DanglingForeignKey, match=r"Reaction\.rev.*'7'"):
        b.finalize()


# --- values and congruence closure -------------------------------------------

def _registry():
    reg = UdfRegistry()
    reg.register(UdfSignature("f", ("Int",), "Int"), lambda x: x + 1)
    reg.register(UdfSignature("g", ("Int", "Int"), "Int"), lambda x, y: x * y)
    return reg


def test_equate_reflexive_is_noop(a_data):
    n = Null("Reaction_label_1", "String")
    assert equate_nulls(a_data, n, n) is a_data


def test_equate_with_literal_substitutes(rxn):
    A = rxn.schemas["A"]
    b = InstanceBuilder(A)
    b.add_row("Simulation", "1").add_row("Reaction", "1")
    b.set_fk("Reaction", "rev", "1", "1").set_fk("Reaction", "sim", "1", "1")
    b.set_fk("Simulation", "rds", "1", "1")
    b.set_attr("Reaction", "rate", "1", Null("n1", "Float"))
    inst = equate_nulls(b.finalize(), Null("n1", "Float"), lit("Float", 5))
    assert inst.value_equal(inst.attrs[("Reaction", "rate")]["1"], lit("Float", 5))
    with pytest.raises(Contradiction):
        equate_nulls(inst, Null("n1", "Float"), lit("Float", 6))
    # the failed equation left the instance untouched
    assert inst.value_equal(Null("n1", "Float"), lit("Float", 5))


def test_congruence_through_terms():
    cc = ValueClosure(_registry())
    n1, n2 = Null("n1", "Int"), Null("n2", "Int")
    t1, t2 = Term("f", (n1,), "Int"), Term("f", (n2,), "Int")
    cc.add(t1)
    cc.add(t2)
    assert not cc.equal(t1, t2)
    cc.union(n1, n2)
    assert cc.equal(t1, t2)


def test_evaluation_once_arguments_are_known():
    cc = ValueClosure(_registry())
    n = Null("n", "Int")
    t = Term("f", (n,), "Int")
    cc.add(t)
    cc.union(n, lit("Int", 4))
    assert cc.literal_of(t) == lit("Int", 5)
    with pytest.raises(Contradiction):
        cc.union(t, lit("Int", 7))


def _random_terms(rng, n_nulls=4, n_terms=10):
    nulls = [Null(f"n{i}", "Int") for i in range(n_nulls)]
    pool = list(nulls)
    while len(pool) < n_nulls + n_terms:
        if rng.random() < 0.5:
            pool.append(Term("f", (rng.choice(pool),), "Int"))
        else:
            pool.append(Term("g", (rng.choice(pool), rng.choice(pool)), "Int"))
    pool = list(dict.fromkeys(pool))
    eqs = [(rng.choice(pool), rng.choice(pool)) for _ in range(rng.randint(1, 3))]
    return pool, eqs


def test_congruence_closure_matches_naive_oracle():
    for seed in range(300):
        rng = random.Random(seed)
        pool, eqs = _random_terms(rng)
        cc = ValueClosure(_registry())
        for v in pool:
            cc.add(v)
        for a, b in eqs:
            cc.union(a, b)
        oracle = naive_congruence(pool, eqs)
        for a in pool:
            for b in pool:
                assert cc.equal(a, b) == (oracle.find(a) == oracle.find(b)), (seed, a, b)


@given(st.integers(0, 10_000))
def test_closure_idempotent(seed):
    rng = random.Random(seed)
    pool, eqs = _random_terms(rng)
    once = ValueClosure(_registry())
    for a, b in eqs:
        once.union(a, b)
    twice = once.copy()
    for a, b in eqs:
        twice.union(a, b)
    for v in pool:
        once.add(v)
        twice.add(v)
    assert {frozenset(c) for c in once.classes()} == {frozenset(c) for c in twice.classes()}


def test_null_free_equality_is_literal_equality(a_data):
    vals = list(a_data.values())
    for x in vals:
        for y in vals:
            assert a_data.value_equal(x, y) == (x == y)


# --- randomized checks against the naive checker ------------------------------

def _random_data(seed):
    """Random data that need not satisfy the equations."""
    rng = random.Random(seed)
    s = random_schema(rng, n_attrs=2)
    b = InstanceBuilder(s, "r")
    n = {e: rng.randint(0, 4) for e in s.entities}
    while any(n[f.source] and not n[f.target] for f in s.fks):
        for f in s.fks:
            if n[f.source] and not n[f.target]:
                n[f.target] = 1
    for e in s.entities:
        for i in range(n[e]):
            b.add_row(e, str(i))
    for f in s.fks:
        for i in range(n[f.source]):
            b.set_fk(f.source, f.name, str(i), str(rng.randrange(n[f.target])))
    for a in s.attrs:
        for i in range(n[a.source]):
            b.set_attr(a.source, a.name, str(i), Lit("Int", rng.randint(0, 1)))
    return b.finalize()


def test_check_instance_matches_naive_checker():
    for seed in range(300):
        inst = _random_data(seed)
        got = {(v.equation, v.entity, v.row) for v in check_instance(inst)}
        assert got == naive_violations(inst)


@given(st.integers(0, 10_000))
def test_satisfaction_invariant_under_row_renaming(seed):
    inst = _random_data(seed)
    renaming = {e: {r: f"{e.lower()}-{r}" for r in inst.rows[e]} for e in inst.schema.entities}
    renamed = relabel_rows(inst, renaming)
    before = [(v.equation, v.entity, renaming[v.entity][v.row]) for v in check_instance(inst)]
    after = [(v.equation, v.entity, v.row) for v in check_instance(renamed)]
    assert before == after


@given(st.integers(0, 10_000))
def test_evaluate_composite_path(seed):
    inst = _random_data(seed)
    s = inst.schema
    for e in s.entities:
        for w, end in words_from(s, e, 2):
            p = s.path(e, w)
            for w2, _ in words_from(s, end, 2):
                q = s.path(end, w2)
                for row in inst.rows[e]:
                    mid = evaluate_path(inst, row, p)
                    assert evaluate_path(inst, row, compose(p, q)) == evaluate_path(inst, mid, q)
