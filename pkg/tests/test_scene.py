import json

import pytest

from layouteval.errors import ParseError, ValidationError
from layouteval.scene import (
    CorpusScene,
    MeshRef,
    ObjectInstance,
    PlacementCondition,
    Rect,
    RequiredObject,
    SceneLayout,
    condition_from_dict,
    corpus_scene_from_dict,
    iter_corpus,
    layout_from_dict,
    layout_to_dict,
    load_condition,
    load_layout,
    save_condition,
    save_corpus,
    save_layout,
)

MINIMAL = {
    "description": "one chair",
    "room_type": "livingroom",
    "range": {"x_min": 0.0, "y_min": 0.0, "x_max": 4.0, "y_max": 4.0},
    "objects": [{"label": "chair", "cx": 0.5, "cy": 0.5, "w": 1.0, "h": 1.0, "yaw_deg": 0.0}],
}


def test_minimal_layout_loads(tmp_path):
    path = tmp_path / "layout.json"
    path.write_text(json.dumps(MINIMAL))
    layout = load_layout(path)
    assert len(layout.objects) == 1
    obj = layout.objects[0]
    assert (obj.label, obj.cx, obj.cy, obj.w, obj.h) == ("chair", 0.5, 0.5, 1.0, 1.0)


def test_negative_yaw_normalized():
    data = dict(MINIMAL, objects=[dict(MINIMAL["objects"][0], yaw_deg=-90.0)])
    layout = layout_from_dict(data)
    assert layout.objects[0].yaw_deg == 270.0


def test_zero_width_names_field():
    data = dict(MINIMAL, objects=[dict(MINIMAL["objects"][0], w=0.0)])
    with pytest.raises(ValidationError) as err:
        layout_from_dict(data)
    assert "objects[0].w" in str(err.value)


def test_inverted_range_rejected():
    data = dict(MINIMAL, range={"x_min": 5.0, "y_min": 0.0, "x_max": 4.0, "y_max": 4.0})
    with pytest.raises(ValidationError) as err:
        layout_from_dict(data)
    assert "x_min" in str(err.value)


def test_malformed_json_is_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_layout(path)


def test_corner_anchor_converts_to_center():
    layout = layout_from_dict(MINIMAL, corner_anchor=True)
    assert (layout.objects[0].cx, layout.objects[0].cy) == (1.0, 1.0)


def test_layout_roundtrip(tmp_path):
    layout = SceneLayout(
        description="rt",
        room_type="bedroom",
        range=Rect(-1.0, -2.0, 3.0, 4.0),
        objects=[
            ObjectInstance("bed", 0.5, 0.25, 2.0, 1.5, 90.0, MeshRef(2.0, 1.5, 0.6)),
            ObjectInstance("lamp", 1.0, 1.0, 0.3, 0.3, 12.5),
        ],
    )
    path = tmp_path / "layout.json"
    save_layout(layout, path)
    assert load_layout(path) == layout
    # Serialization of the canonical form is byte-stable.
    first = path.read_bytes()
    save_layout(load_layout(path), path)
    assert path.read_bytes() == first


def test_mesh_ref_must_be_positive():
    data = dict(MINIMAL, objects=[dict(MINIMAL["objects"][0], mesh_ref={"w": 1.0, "h": 0.0, "d": 1.0})])
    with pytest.raises(ValidationError) as err:
        layout_from_dict(data)
    assert "mesh_ref.h" in str(err.value)


def test_condition_roundtrip(tmp_path):
    condition = PlacementCondition(
        description="bedroom basics",
        range=Rect(0.0, 0.0, 5.0, 5.0),
        required_objects=[RequiredObject("bed", 1), RequiredObject("nightstand", 2)],
    )
    path = tmp_path / "cond.json"
    save_condition(condition, path)
    assert load_condition(path) == condition


def test_condition_rejects_duplicate_labels():
    data = {
        "description": "",
        "range": {"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1},
        "required_objects": [{"label": "bed", "count": 1}, {"label": "Bed ", "count": 2}],
    }
    with pytest.raises(ValidationError) as err:
        condition_from_dict(data)
    assert "duplicate" in str(err.value)


def test_condition_rejects_zero_count():
    data = {
        "description": "",
        "range": {"x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1},
        "required_objects": [{"label": "bed", "count": 0}],
    }
    with pytest.raises(ValidationError):
        condition_from_dict(data)


def test_unwritable_path_raises_oserror(tmp_path):
    layout = layout_from_dict(MINIMAL)
    with pytest.raises(OSError):
        save_layout(layout, tmp_path / "missing-dir" / "layout.json")


def test_corpus_polygon_must_be_ccw():
    record = {
        "scene_id": "s1",
        "room_type": "bedroom",
        "floor_polygon": [[0, 0], [0, 1], [1, 1], [1, 0]],  # clockwise
        "objects": [],
    }
    with pytest.raises(ValidationError) as err:
        corpus_scene_from_dict(record)
    assert "counterclockwise" in str(err.value)


def test_corpus_jsonl_roundtrip_and_bad_lines(tmp_path):
    scene = CorpusScene(
        scene_id="s1",
        room_type="bedroom",
        floor_polygon=[(0.0, 0.0), (4.0, 0.0), (4.0, 3.0), (0.0, 3.0)],
        objects=[],
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus([scene], path)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("{broken\n")
    items = list(iter_corpus(path))
    assert len(items) == 2
    assert items[0][1] == scene
    assert isinstance(items[1][1], ParseError)


def test_layout_to_dict_keeps_empty_list():
    layout = layout_from_dict(dict(MINIMAL, objects=[]))
    assert layout_to_dict(layout)["objects"] == []
