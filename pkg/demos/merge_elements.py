"""Merging two element tables without counting copper twice.

Both databases have an Element table.  Taking the union naively would list
an element once per source.  The merge spec declares what the tables share
(the overlap schema) and which attribute identifies a record (``symbol``),
so rows with the same symbol collapse into one and keep the provenance of
both sources.

Run with ``python demos/merge_elements.py``.
"""

from funmig.errors import KeyConflict
from funmig.instance import InstanceBuilder
from funmig.io import fixtures
from funmig.migrate import merge, pushout


def show(inst):
    for row in inst.rows["Element"]:
        symbol = inst.attrs[("Element", "symbol")][row].value
        sources = ", ".join(inst.lineage.get(("Element", row), ()))
        print(f"  {row:18} {symbol:3} <- {sources}")


def main():
    fx = fixtures()
    prog = fx["overlap"].program()
    spec = prog.merges["elements_merge"]
    left = fx["overlap"].load("elements_left", prog.schemas["Elements"])
    right = fx["overlap"].load("elements_right", prog.schemas["Elements"])

    T, _, _ = pushout(spec)
    print(f"merged schema {T.name}: {', '.join(a.name for a in T.attrs)}\n")

    _, merged, _, _ = merge(spec, left, right)
    print(f"{len(left.rows['Element'])} + {len(right.rows['Element'])} rows, "
          f"{len(merged.rows['Element'])} after linking on symbol:")
    show(merged)
    print()

    _, same, _, _ = merge(spec, left, left)
    print(f"merging a table with itself keeps {len(same.rows['Element'])} rows\n")

    # A source that disagrees about copper's atomic number is refused.
    b = InstanceBuilder(prog.schemas["Elements"], "typo")
    b.add_row("Element", "1")
    b.set_attr("Element", "symbol", "1", "Cu").set_attr("Element", "z", "1", 30)
    try:
        merge(spec, left, b.finalize())
    except KeyConflict as exc:
        for c in exc.conflicts:
            print(f"refused: {c['entity']} rows {' and '.join(c['rows'])} disagree on "
                  f"{c['attribute']} ({' vs '.join(c['values'])})")


if __name__ == "__main__":
    main()
