"""Moving OQMD-style calculations into a catalysis database.

OQMD stores the nine lattice-vector components directly on each structure,
keeps calculation settings in a JSON ``params`` column, and never records
the DFT code because every calculation used VASP.  The catalysis schema
factors cells into their own table and wants the code and cutoff as plain
columns.  The migration runs in two steps:

1. ``land`` (delta) computes ``dft_code`` and ``encut`` on the OQMD side,
   using a constant and a JSON field extraction.
2. ``to_catalysis`` (sigma) creates one fresh Cell per structure and
   fills its nine components from the structure's own columns.

Run with ``python demos/oqmd_to_catalysis.py [output-dir]``.
"""

import sys
import tempfile

from funmig import check_instance, check_mapping, delta, sigma
from funmig.dsl import pretty_print
from funmig.io import export_csv, fixtures
from funmig.migrate import run_pipeline
from funmig.values import format_value


def table(inst, entity, columns):
    print(f"  {entity}: {len(inst.rows[entity])} rows")
    for row in inst.rows[entity]:
        cells = []
        for c in columns:
            column = inst.fks.get((entity, c)) or inst.attrs[(entity, c)]
            value = column[row]
            cells.append(f"{c}={value if isinstance(value, str) else format_value(value)}")
        print(f"    {row:8} " + "  ".join(cells))


def main(out_dir=None):
    fx = fixtures()
    prog = fx["overlap"].program()
    oqmd = fx["oqmd_mini"].load("oqmd_data", prog.schemas["OQMD"])

    land, to_catalysis = prog.mappings["land"], prog.mappings["to_catalysis"]
    for F in (land, to_catalysis):
        print(f"{F.name}: {check_mapping(F).verdict.value}")
    print()
    print("The cell columns of to_catalysis:")
    for line in pretty_print(to_catalysis).splitlines():
        if "cell_id" in line:
            print(line)
    print()

    landed = delta(land, oqmd)
    print("After landing, every calculation knows its code and cutoff:")
    table(landed, "Calculations", ["dft_code", "encut", "xc"])
    print()

    catalysis = sigma(to_catalysis, landed)
    print("After sigma, each structure points at a fresh cell:")
    table(catalysis, "Structure", ["cell_id", "formula"])
    table(catalysis, "Cell", ["x0", "x1", "x2"])
    print(f"  violations: {len(check_instance(catalysis))}")
    print()

    print("Where the structure rows came from:")
    for row in catalysis.rows["Structure"]:
        print(f"  Structure {row} <- {', '.join(catalysis.lineage[('Structure', row)])}")
    print()

    # The same two steps are declared as a pipeline, with a variant that
    # keeps PBE calculations only.
    pbe = run_pipeline(prog.pipelines["pbe_to_catalysis"], oqmd)
    print(f"PBE-only pipeline keeps {len(pbe.rows['Calculation'])} of "
          f"{len(oqmd.rows['Calculations'])} calculations")

    target = out_dir or tempfile.mkdtemp(prefix="catalysis-")
    files = export_csv(catalysis, target)
    print(f"wrote {len(files)} files to {target}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
