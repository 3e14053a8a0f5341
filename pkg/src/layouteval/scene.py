"""Canonical in-memory and on-disk representation of layouts and corpus scenes.

Layouts store objects by CENTER (cx, cy); ``w`` and ``h`` are the two
footprint extents along the object's local axes, not a vertical height.
All lengths are meters, all angles degrees. The loader can optionally
convert min-corner input to centers (``corner_anchor=True``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .geometry import Obb, normalize_angle_deg, polygon_signed_area


def canon(label: str) -> str:
    """Canonical category form: trimmed, lowercase."""
    return label.strip().lower()


@dataclass(frozen=True)
class MeshRef:
    """Reference mesh dimensions used by the scale verifier (all > 0)."""

    w: float
    h: float
    d: float


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)


@dataclass(frozen=True)
class ObjectInstance:
    label: str
    cx: float
    cy: float
    w: float
    h: float
    yaw_deg: float = 0.0
    mesh_ref: MeshRef | None = None

    def obb(self) -> Obb:
        return Obb(self.cx, self.cy, self.w / 2.0, self.h / 2.0, self.yaw_deg)


@dataclass
class SceneLayout:
    description: str
    room_type: str
    range: Rect
    objects: list[ObjectInstance] = field(default_factory=list)


@dataclass(frozen=True)
class RequiredObject:
    label: str
    count: int


@dataclass
class PlacementCondition:
    description: str
    range: Rect
    required_objects: list[RequiredObject] = field(default_factory=list)


@dataclass(frozen=True)
class CorpusObject:
    category: str
    center: tuple[float, float, float]
    extents: tuple[float, float, float]  # (w, h, d); d is the vertical extent
    yaw_deg: float


@dataclass
class CorpusScene:
    scene_id: str
    room_type: str
    floor_polygon: list[tuple[float, float]]
    objects: list[CorpusObject] = field(default_factory=list)


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"{where}.{key}", "missing required field")
    return data[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(where, f"expected a finite number, got {value!r}")
    return float(value)


def _positive(value, where: str) -> float:
    v = _number(value, where)
    if v <= 0.0:
        raise ValidationError(where, f"must be > 0, got {v}")
    return v


def _rect_from_dict(data: dict, where: str) -> Rect:
    rect = Rect(
        _number(_require(data, "x_min", where), f"{where}.x_min"),
        _number(_require(data, "y_min", where), f"{where}.y_min"),
        _number(_require(data, "x_max", where), f"{where}.x_max"),
        _number(_require(data, "y_max", where), f"{where}.y_max"),
    )
    if rect.x_min >= rect.x_max:
        raise ValidationError(f"{where}.x_min", "range is inverted (x_min >= x_max)")
    if rect.y_min >= rect.y_max:
        raise ValidationError(f"{where}.y_min", "range is inverted (y_min >= y_max)")
    return rect


def _rect_to_dict(rect: Rect) -> dict:
    return {"x_min": rect.x_min, "y_min": rect.y_min, "x_max": rect.x_max, "y_max": rect.y_max}


def object_from_dict(data: dict, where: str = "objects[?]", corner_anchor: bool = False) -> ObjectInstance:
    label = _require(data, "label", where)
    if not isinstance(label, str) or not label.strip():
        raise ValidationError(f"{where}.label", "must be a non-empty string")
    w = _positive(_require(data, "w", where), f"{where}.w")
    h = _positive(_require(data, "h", where), f"{where}.h")
    cx = _number(_require(data, "cx", where), f"{where}.cx")
    cy = _number(_require(data, "cy", where), f"{where}.cy")
    if corner_anchor:  # input gave the min corner; store the center
        cx += w / 2.0
        cy += h / 2.0
    yaw = normalize_angle_deg(_number(data.get("yaw_deg", 0.0), f"{where}.yaw_deg"))
    mesh_ref = None
    if data.get("mesh_ref") is not None:
        m = data["mesh_ref"]
        if not isinstance(m, dict):
            raise ValidationError(f"{where}.mesh_ref", "expected an object")
        mesh_ref = MeshRef(
            _positive(_require(m, "w", f"{where}.mesh_ref"), f"{where}.mesh_ref.w"),
            _positive(_require(m, "h", f"{where}.mesh_ref"), f"{where}.mesh_ref.h"),
            _positive(_require(m, "d", f"{where}.mesh_ref"), f"{where}.mesh_ref.d"),
        )
    return ObjectInstance(label=label, cx=cx, cy=cy, w=w, h=h, yaw_deg=yaw, mesh_ref=mesh_ref)


def object_to_dict(obj: ObjectInstance) -> dict:
    out = {
        "label": obj.label,
        "cx": obj.cx,
        "cy": obj.cy,
        "w": obj.w,
        "h": obj.h,
        "yaw_deg": obj.yaw_deg,
    }
    if obj.mesh_ref is not None:
        out["mesh_ref"] = {"w": obj.mesh_ref.w, "h": obj.mesh_ref.h, "d": obj.mesh_ref.d}
    return out


def layout_from_dict(data: dict, corner_anchor: bool = False) -> SceneLayout:
    if not isinstance(data, dict):
        raise ValidationError("$", "layout document must be a JSON object")
    rng = _rect_from_dict(_require(data, "range", "$"), "range")
    raw_objects = data.get("objects", [])
    if not isinstance(raw_objects, list):
        raise ValidationError("objects", "expected a list")
    objects = [
        object_from_dict(o, f"objects[{i}]", corner_anchor=corner_anchor)
        for i, o in enumerate(raw_objects)
    ]
    return SceneLayout(
        description=str(data.get("description", "")),
        room_type=str(data.get("room_type", "")),
        range=rng,
        objects=objects,
    )


def layout_to_dict(layout: SceneLayout) -> dict:
    return {
        "description": layout.description,
        "room_type": layout.room_type,
        "range": _rect_to_dict(layout.range),
        "objects": [object_to_dict(o) for o in layout.objects],
    }


def condition_from_dict(data: dict) -> PlacementCondition:
    if not isinstance(data, dict):
        raise ValidationError("$", "condition document must be a JSON object")
    rng = _rect_from_dict(_require(data, "range", "$"), "range")
    raw = data.get("required_objects", [])
    if not isinstance(raw, list):
        raise ValidationError("required_objects", "expected a list")
    required: list[RequiredObject] = []
    seen: set[str] = set()
    for i, entry in enumerate(raw):
        where = f"required_objects[{i}]"
        label = _require(entry, "label", where)
        if not isinstance(label, str) or not label.strip():
            raise ValidationError(f"{where}.label", "must be a non-empty string")
        count = _require(entry, "count", where)
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ValidationError(f"{where}.count", f"expected an integer >= 1, got {count!r}")
        key = canon(label)
        if key in seen:
            raise ValidationError(f"{where}.label", f"duplicate label {label!r}")
        seen.add(key)
        required.append(RequiredObject(label=label, count=count))
    return PlacementCondition(
        description=str(data.get("description", "")), range=rng, required_objects=required
    )


def condition_to_dict(condition: PlacementCondition) -> dict:
    return {
        "description": condition.description,
        "range": _rect_to_dict(condition.range),
        "required_objects": [{"label": r.label, "count": r.count} for r in condition.required_objects],
    }


def corpus_scene_from_dict(data: dict) -> CorpusScene:
    if not isinstance(data, dict):
        raise ValidationError("$", "corpus record must be a JSON object")
    scene_id = str(_require(data, "scene_id", "$"))
    polygon_raw = _require(data, "floor_polygon", "$")
    if not isinstance(polygon_raw, list) or len(polygon_raw) < 3:
        raise ValidationError("floor_polygon", "expected a list of >= 3 vertices")
    polygon = []
    for i, p in enumerate(polygon_raw):
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise ValidationError(f"floor_polygon[{i}]", "expected [x, y]")
        polygon.append((_number(p[0], f"floor_polygon[{i}][0]"), _number(p[1], f"floor_polygon[{i}][1]")))
    if polygon_signed_area(polygon) <= 0.0:
        raise ValidationError("floor_polygon", "must be counterclockwise with positive area")
    objects = []
    for i, o in enumerate(data.get("objects", [])):
        where = f"objects[{i}]"
        category = _require(o, "category", where)
        if not isinstance(category, str) or not category.strip():
            raise ValidationError(f"{where}.category", "must be a non-empty string")
        center = _require(o, "center", where)
        if not isinstance(center, (list, tuple)) or len(center) != 3:
            raise ValidationError(f"{where}.center", "expected [x, y, z]")
        extents = _require(o, "extents", where)
        if not isinstance(extents, (list, tuple)) or len(extents) != 3:
            raise ValidationError(f"{where}.extents", "expected [w, h, d]")
        objects.append(
            CorpusObject(
                category=category,
                center=tuple(_number(v, f"{where}.center[{j}]") for j, v in enumerate(center)),
                extents=tuple(_positive(v, f"{where}.extents[{j}]") for j, v in enumerate(extents)),
                yaw_deg=normalize_angle_deg(_number(o.get("yaw_deg", 0.0), f"{where}.yaw_deg")),
            )
        )
    return CorpusScene(
        scene_id=scene_id,
        room_type=str(data.get("room_type", "")),
        floor_polygon=polygon,
        objects=objects,
    )


def corpus_scene_to_dict(scene: CorpusScene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "room_type": scene.room_type,
        "floor_polygon": [[x, y] for x, y in scene.floor_polygon],
        "objects": [
            {
                "category": o.category,
                "center": list(o.center),
                "extents": list(o.extents),
                "yaw_deg": o.yaw_deg,
            }
            for o in scene.objects
        ],
    }


def _read_json(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def dump_json(data) -> str:
    """Canonical serialization used for every file this package writes."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def load_layout(path: str | Path, corner_anchor: bool = False) -> SceneLayout:
    return layout_from_dict(_read_json(path), corner_anchor=corner_anchor)


def save_layout(layout: SceneLayout, path: str | Path) -> None:
    Path(path).write_text(dump_json(layout_to_dict(layout)), encoding="utf-8")


def load_condition(path: str | Path) -> PlacementCondition:
    return condition_from_dict(_read_json(path))


def save_condition(condition: PlacementCondition, path: str | Path) -> None:
    Path(path).write_text(dump_json(condition_to_dict(condition)), encoding="utf-8")


def iter_corpus(path: str | Path):
    """Yield (line_number, CorpusScene | ParseError/ValidationError) per JSONL line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, corpus_scene_from_dict(json.loads(line))
            except json.JSONDecodeError as exc:
                yield lineno, ParseError(f"line {lineno}: invalid JSON: {exc}")
            except (ParseError, ValidationError) as exc:
                yield lineno, exc


def save_corpus(scenes: list[CorpusScene], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(json.dumps(corpus_scene_to_dict(scene), sort_keys=True) + "\n")
