import runpy
from pathlib import Path

import pytest

DEMOS = Path(__file__).resolve().parent.parent / "demos"


@pytest.mark.parametrize("name,expected", [
    ("reaction_networks.py", "a_to_c: Rejected"),
    ("oqmd_to_catalysis.py", "violations: 0"),
    ("merge_elements.py", "5 after linking on symbol"),
])
def test_demo_runs(name, expected, capsys, monkeypatch, tmp_path):
    monkeypatch.setattr("sys.argv", [name, str(tmp_path / "out")])
    runpy.run_path(str(DEMOS / name), run_name="__main__")
    assert expected in capsys.readouterr().out
