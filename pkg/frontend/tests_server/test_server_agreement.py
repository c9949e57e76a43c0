"""Server-side half of the shared golden fixtures.

The client test suite proves the editor emits exactly the fixture diffs
and renders the fixture boxes; this suite proves the server applies those
diffs to the same boxes and issues the same validation verdicts.

Run from the repo root: python3 -m pytest frontend/tests_server -q
"""

import json
from pathlib import Path

import pytest

from scenesmith.layout import LayoutDiff, SceneLayout, apply_diff, validate

FIXTURES = Path(__file__).parent.parent / "fixtures"


def load(name: str):
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))


@pytest.mark.parametrize("fixture", load("roundtrip_fixtures.json"), ids=lambda f: f["name"])
def test_diff_applied_server_side_matches_client_boxes(fixture):
    initial = SceneLayout.from_dict(fixture["initial_layout"])
    diff = LayoutDiff.from_dict(fixture["expected_diff"])
    final = apply_diff(initial, diff)
    assert [entry.box.to_dict() for entry in final.entries] == fixture["expected_boxes"]


@pytest.mark.parametrize("fixture", load("validation_fixtures.json"), ids=lambda f: f["name"])
def test_validation_verdicts_agree(fixture):
    layout = SceneLayout.from_dict(fixture["layout"])
    assert validate(layout).to_dict() == fixture["report"]


def test_fixtures_in_sync_with_generator():
    import importlib.util
    import sys

    spec = importlib.util.spec_from_file_location(
        "make_fixtures", FIXTURES.parent / "make_fixtures.py"
    )
    make_fixtures = importlib.util.module_from_spec(spec)
    sys.modules["make_fixtures"] = make_fixtures
    spec.loader.exec_module(make_fixtures)

    assert make_fixtures.validation_fixtures() == load("validation_fixtures.json")
    assert make_fixtures.roundtrip_fixtures() == load("roundtrip_fixtures.json")
