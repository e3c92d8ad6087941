"""Three ways to store a reaction network, and which translations are allowed.

Schema A links every reaction to its reverse and to the simulation it came
from.  B hangs both off a shared network; C keeps reverses but loses the
rule that reversing twice gets you back where you started.  This walk-through
asks the prover which mappings between them keep every rule intact, then
shows what happens to data that was moved along a forbidden one.

Run with ``python demos/reaction_networks.py``.
"""

from funmig import check_instance, check_mapping, sigma
from funmig.dsl import pretty_print
from funmig.errors import Contradiction
from funmig.io import fixtures


def show_report(report):
    print(f"{report.mapping}: {report.verdict.value}")
    for outcome in report.outcomes:
        steps = " then ".join(f"{s.equation} {s.direction}" for s in outcome.result.trace)
        how = f"by {steps}" if steps else "no rewrite chain found"
        print(f"  {outcome.label:3} {outcome.result.verdict.value:24} {how}")


def main():
    project = fixtures()["rxnnet"]
    prog = project.program()
    print(pretty_print(prog.schemas["A"]))

    print("Which translations keep A's rules?\n")
    for name in ("a_identity", "a_to_c", "a_to_b", "c_to_a"):
        show_report(check_mapping(prog.mappings[name]))
        print()

    # Someone moved A-shaped data through B anyway.  Reading it back as A
    # shows the damage row by row.
    damaged = project.load("migrated_to_b", prog.schemas["A"])
    print("Violations in the bundle that went through B:")
    for v in check_instance(damaged):
        print(f"  {v}")
    print()

    # Pushing C data into A forces rev . rev = id.  In C, reaction 3
    # reverses to 1 and 1 reverses to 2, so the chase has to merge
    # reactions 2 and 3.  Their labels differ, so it gives up.
    c_data = project.load("c_data", prog.schemas["C"])
    try:
        sigma(prog.mappings["c_to_a"], c_data)
    except Contradiction as exc:
        print(f"sigma along c_to_a refused: {exc}")


if __name__ == "__main__":
    main()
