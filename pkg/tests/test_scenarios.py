import hashlib
import json
import os
from fractions import Fraction as F

import pytest

from src.auction.errors import AuctionError, ValidationFailure
from src.auction.filippov import trace
from src.auction.semilinear import value_map
from src.auction.tropical import enumerate_cells
from src.report import dumps, emit_report, load_trajectory, rows_to_csv, trajectory_problems
from src.scenarios import list_scenarios, load_scenario, scenario_from_dict

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "src", "scenarios")


def doc(**kw):
    base = {
        "M": 2,
        "m": [1, 1],
        "p_min": ["1/8", "3/16"],
        "eps": ["1/4", "1/4"],
        "valuations": {
            "opponent": {"0,0": "0", "1,0": "4", "0,1": "3", "1,1": "6"},
            "player": {"0,0": "0", "1,0": "10", "0,1": "1", "1,1": "21/2"},
        },
        "player": "player",
    }
    base.update(kw)
    return base


def test_bundled_scenarios_load():
    names = {s["name"] for s in list_scenarios(SCENARIOS)}
    assert {"v_ex", "v_sub", "single", "two_opponents"} <= names
    ex = load_scenario("v_ex", SCENARIOS)
    assert ex.instance.p_min == (F(29, 10), F(9, 5))
    assert ex.strictly_concave and ex.substitutes is False
    sub = load_scenario(os.path.join(SCENARIOS, "v_sub.json"), SCENARIOS)
    assert sub.substitutes is True
    assert sub.w((1, 1)) == F(21, 2)


def test_opponents_are_aggregated():
    sc = load_scenario("two_opponents", SCENARIOS)
    assert sc.opponents == ["a", "b"]
    assert sc.opponent((2, 1)) == 11
    assert sc.opponent((1, 1)) == 8


def test_opponents_default_to_everyone_but_the_player():
    sc = scenario_from_dict(doc(), "inline")
    assert sc.opponents == ["opponent"]
    assert sc.name == "inline"


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"eps": ["1/4", "0"]}, "eps"),
        ({"p_min": ["1/8", "x"]}, "p_min[1]"),
        ({"player": "nobody"}, "valuations"),
        ({"unexpected": 1}, "unexpected"),
    ],
)
def test_bad_documents_name_the_field(patch, field):
    with pytest.raises(ValidationFailure) as exc:
        scenario_from_dict(doc(**patch))
    assert exc.value.field == field
    assert exc.value.exit_code == 2


def test_nonmonotone_player_needs_the_override():
    vals = doc()["valuations"]
    vals["player"] = {"0,0": "0", "1,0": "5", "0,1": "0", "1,1": "4"}
    with pytest.raises(ValidationFailure):
        scenario_from_dict(doc(valuations=vals))
    sc = scenario_from_dict(doc(valuations=vals, allow_nonmonotone=["player"]))
    assert sc.w((1, 1)) == 4


def test_missing_scenario():
    with pytest.raises(ValidationFailure):
        load_scenario("no_such_scenario", SCENARIOS)


def test_results_are_canonical_json():
    text = dumps({"b": F(1, 2), "a": [F(3), (1, 0)]})
    assert json.loads(text) == {"a": ["3", [1, 0]], "b": "1/2"}
    assert text == dumps({"a": [F(3), (1, 0)], "b": F(1, 2)})
    assert rows_to_csv([{"price": ["1/2", "3"], "bid": [1, 0]}]) == "price,bid\n1/2 3,1 0\n"


def test_emit_report_writes_manifest(tmp_path):
    sc = load_scenario("v_sub", SCENARIOS)
    grid = value_map("V", (1, 0), ((0, 0), (2, 1)), 2, sc.instance, sc.opponent, sc.w)
    rows = [{"p1": "0", "value": "7"}]
    manifest = emit_report("value-map", grid.as_dict(), "csv", str(tmp_path), rows=rows, grid=grid)
    names = [f["name"] for f in manifest["files"]]
    assert names == sorted(
        ["value-map.json", "value-map.csv", "value-map.matrix.csv", "value-map.dat", "value-map.gp"]
    )
    for f in manifest["files"]:
        data = (tmp_path / f["name"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"]
    assert json.loads((tmp_path / "manifest.json").read_text())["stem"] == "value-map"
    assert "splot 'value-map.dat'" in (tmp_path / "value-map.gp").read_text()
    assert (tmp_path / "value-map.matrix.csv").read_text().splitlines()[1] == "0,7,7,7"

    # same inputs, same bytes
    again = emit_report("value-map", grid.as_dict(), "csv", str(tmp_path), rows=rows, grid=grid)
    assert again == manifest


def test_emit_report_rejects_unknown_format(tmp_path):
    with pytest.raises(ValidationFailure):
        emit_report("x", {}, "xml", str(tmp_path))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(AuctionError):
        emit_report("x", {}, "json", str(blocker / "sub"))


def test_trajectory_document_reloads(tmp_path):
    sc = load_scenario("v_sub", SCENARIOS)
    traj = trace((1, 1), (0, 0), enumerate_cells(sc.opponent, sc.instance), sc.instance)
    emit_report("trace", {"trajectory": traj.as_dict()}, "json", str(tmp_path))
    back = load_trajectory(str(tmp_path / "trace.json"))
    assert back.final_price == (4, 3)
    assert trajectory_problems(back) == []

    back.segments = [back.segments[0], back.segments[2]]
    assert trajectory_problems(back) == ["segment 1 does not continue the previous one"]


def test_schema_matches_the_document_model():
    from src.scenarios.loader import ScenarioDoc

    with open(os.path.join(ROOT, "docs", "scenario.schema.json"), encoding="utf-8") as f:
        schema = json.load(f)
    assert set(schema["properties"]) == set(ScenarioDoc.model_fields)
    assert set(schema["required"]) == {n for n, f in ScenarioDoc.model_fields.items() if f.is_required()}
