"""Spatial-prior ontology: per-category dimension bands, room associations,
support surfaces, co-occurrence edges, and orientation statistics.

Immutable after load; category strings are matched case-insensitively after
trimming. Every query is total: absent data yields an explicit default, never
an exception.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ValidationError
from .scene import _read_json, canon, dump_json

if TYPE_CHECKING:
    from .verifiers import EvalParams

COOCCUR_CAP = 50
DIM_AXES = ("width", "height", "depth")


@dataclass(frozen=True)
class DimStats:
    p5: float
    p25: float
    median: float
    p75: float
    p95: float
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class CooccurEdge:
    count: int
    p_b_given_a: float
    npmi: float


@dataclass(frozen=True)
class GroupShare:
    """A (count, fraction) pair used by room-association and support maps."""

    count: int
    fraction: float


@dataclass(frozen=True)
class RelationStats:
    fraction: float
    mean_angle_deg: float
    n: int


@dataclass(frozen=True)
class PairRelationStats:
    fraction: float
    mean_angle_deg: float
    mean_distance_m: float
    n: int


@dataclass(frozen=True)
class OrientationStats:
    back_to_wall: RelationStats | None = None
    faces_center: RelationStats | None = None
    faces_pair: dict[str, PairRelationStats] = field(default_factory=dict)


@dataclass
class CategoryEntry:
    dimension: dict[str, DimStats] = field(default_factory=dict)
    room_association: dict[str, GroupShare] = field(default_factory=dict)
    support_surfaces: dict[str, GroupShare] = field(default_factory=dict)
    cooccurrence: dict[str, CooccurEdge] = field(default_factory=dict)
    cooccurrence_by_room: dict[str, dict[str, CooccurEdge]] = field(default_factory=dict)
    orientation: OrientationStats = field(default_factory=OrientationStats)


@dataclass
class Ontology:
    categories: dict[str, CategoryEntry] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def entry(self, category: str) -> CategoryEntry | None:
        return self.categories.get(canon(category))


def cooccur_fraction(ontology: Ontology, a: str, b: str, room: str | None = None) -> float:
    """max(P(a|b), P(b|a)), preferring room-conditioned edges when present.

    Falls back to the global edges when the room-conditioned maps record
    neither direction; returns 0.0 when no edge exists at all.
    """
    a, b = canon(a), canon(b)
    if room is not None:
        values = _edge_values(ontology, a, b, canon(room))
        if values:
            return max(values)
    values = _edge_values(ontology, a, b, None)
    return max(values) if values else 0.0


def _edge_values(ontology: Ontology, a: str, b: str, room: str | None) -> list[float]:
    values = []
    for src, dst in ((a, b), (b, a)):
        entry = ontology.categories.get(src)
        if entry is None:
            continue
        edges = entry.cooccurrence if room is None else entry.cooccurrence_by_room.get(room, {})
        edge = edges.get(dst)
        if edge is not None:
            values.append(edge.p_b_given_a)
    return values


def orientation_checks_for(ontology: Ontology, category: str, params: "EvalParams") -> set[str]:
    """Applicable orientation sub-checks for a category.

    A sub-check applies when its observed fraction meets
    ``params.applicability_fraction`` (>=). Faces-pair checks are returned as
    one token per qualifying target, ``"faces_pair:<target>"``. Unknown
    categories yield the empty set.
    """
    entry = ontology.entry(category)
    if entry is None:
        return set()
    threshold = params.applicability_fraction
    checks: set[str] = set()
    orient = entry.orientation
    if orient.back_to_wall is not None and orient.back_to_wall.fraction >= threshold:
        checks.add("back_to_wall")
    if orient.faces_center is not None and orient.faces_center.fraction >= threshold:
        checks.add("faces_center")
    for target, stats in orient.faces_pair.items():
        if stats.fraction >= threshold:
            checks.add(f"faces_pair:{target}")
    return checks


def _num(data: dict, key: str, where: str) -> float:
    if key not in data:
        raise ValidationError(f"{where}.{key}", "missing required field")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}.{key}", f"expected a number, got {value!r}")
    return float(value)


def _count(data: dict, key: str, where: str, minimum: int = 0) -> int:
    if key not in data:
        raise ValidationError(f"{where}.{key}", "missing required field")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}.{key}", f"expected an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{where}.{key}", f"must be >= {minimum}, got {value}")
    return value


def _dim_stats_from_dict(data: dict, where: str) -> DimStats:
    stats = DimStats(
        p5=_num(data, "p5", where),
        p25=_num(data, "p25", where),
        median=_num(data, "median", where),
        p75=_num(data, "p75", where),
        p95=_num(data, "p95", where),
        mean=_num(data, "mean", where),
        std=_num(data, "std", where),
        n=_count(data, "n", where, minimum=1),
    )
    ordered = (stats.p5, stats.p25, stats.median, stats.p75, stats.p95)
    if any(lo > hi for lo, hi in zip(ordered, ordered[1:])):
        raise ValidationError(where, f"percentiles out of order: {ordered}")
    if stats.std < 0.0:
        raise ValidationError(f"{where}.std", f"must be >= 0, got {stats.std}")
    return stats


def _edge_from_dict(data: dict, where: str) -> CooccurEdge:
    edge = CooccurEdge(
        count=_count(data, "count", where, minimum=1),
        p_b_given_a=_num(data, "p_b_given_a", where),
        npmi=_num(data, "npmi", where),
    )
    if not (0.0 < edge.p_b_given_a <= 1.0):
        raise ValidationError(f"{where}.p_b_given_a", f"must be in (0, 1], got {edge.p_b_given_a}")
    if not (-1.0 - 1e-9 <= edge.npmi <= 1.0 + 1e-9):
        raise ValidationError(f"{where}.npmi", f"must be in [-1, 1], got {edge.npmi}")
    return edge


def _edge_map_from_dict(data: dict, where: str) -> dict[str, CooccurEdge]:
    if not isinstance(data, dict):
        raise ValidationError(where, "expected an object")
    if len(data) > COOCCUR_CAP:
        raise ValidationError(where, f"{len(data)} entries exceeds cap of {COOCCUR_CAP}")
    return {canon(k): _edge_from_dict(v, f"{where}.{k}") for k, v in data.items()}


def _share_map_from_dict(data: dict, where: str) -> dict[str, GroupShare]:
    if not isinstance(data, dict):
        raise ValidationError(where, "expected an object")
    out = {}
    total = 0.0
    for key, value in data.items():
        share = GroupShare(
            count=_count(value, "count", f"{where}.{key}", minimum=0),
            fraction=_num(value, "fraction", f"{where}.{key}"),
        )
        if not (0.0 <= share.fraction <= 1.0):
            raise ValidationError(f"{where}.{key}.fraction", f"must be in [0, 1], got {share.fraction}")
        total += share.fraction
        out[canon(key)] = share
    if total > 1.0 + 1e-6:
        raise ValidationError(where, f"fractions sum to {total}, above 1")
    return out


def _relation_from_dict(data: dict, where: str) -> RelationStats:
    rel = RelationStats(
        fraction=_num(data, "fraction", where),
        mean_angle_deg=_num(data, "mean_angle_deg", where),
        n=_count(data, "n", where, minimum=1),
    )
    if not (0.0 <= rel.fraction <= 1.0):
        raise ValidationError(f"{where}.fraction", f"must be in [0, 1], got {rel.fraction}")
    if not (0.0 <= rel.mean_angle_deg <= 180.0):
        raise ValidationError(f"{where}.mean_angle_deg", f"must be in [0, 180], got {rel.mean_angle_deg}")
    return rel


def _pair_relation_from_dict(data: dict, where: str) -> PairRelationStats:
    rel = PairRelationStats(
        fraction=_num(data, "fraction", where),
        mean_angle_deg=_num(data, "mean_angle_deg", where),
        mean_distance_m=_num(data, "mean_distance_m", where),
        n=_count(data, "n", where, minimum=1),
    )
    if not (0.0 <= rel.fraction <= 1.0):
        raise ValidationError(f"{where}.fraction", f"must be in [0, 1], got {rel.fraction}")
    if not (0.0 <= rel.mean_angle_deg <= 180.0):
        raise ValidationError(f"{where}.mean_angle_deg", f"must be in [0, 180], got {rel.mean_angle_deg}")
    if rel.mean_distance_m < 0.0:
        raise ValidationError(f"{where}.mean_distance_m", f"must be >= 0, got {rel.mean_distance_m}")
    return rel


def entry_from_dict(data: dict, where: str) -> CategoryEntry:
    if not isinstance(data, dict):
        raise ValidationError(where, "expected an object")
    dimension = {}
    for axis, stats in (data.get("dimension") or {}).items():
        if axis not in DIM_AXES:
            raise ValidationError(f"{where}.dimension.{axis}", f"unknown axis (expected one of {DIM_AXES})")
        dimension[axis] = _dim_stats_from_dict(stats, f"{where}.dimension.{axis}")

    orientation_raw = data.get("orientation") or {}
    faces_pair = {
        canon(target): _pair_relation_from_dict(stats, f"{where}.orientation.faces_pair.{target}")
        for target, stats in (orientation_raw.get("faces_pair") or {}).items()
    }
    orientation = OrientationStats(
        back_to_wall=(
            _relation_from_dict(orientation_raw["back_to_wall"], f"{where}.orientation.back_to_wall")
            if orientation_raw.get("back_to_wall") is not None
            else None
        ),
        faces_center=(
            _relation_from_dict(orientation_raw["faces_center"], f"{where}.orientation.faces_center")
            if orientation_raw.get("faces_center") is not None
            else None
        ),
        faces_pair=faces_pair,
    )
    by_room_raw = data.get("cooccurrence_by_room") or {}
    if not isinstance(by_room_raw, dict):
        raise ValidationError(f"{where}.cooccurrence_by_room", "expected an object")
    return CategoryEntry(
        dimension=dimension,
        room_association=_share_map_from_dict(data.get("room_association") or {}, f"{where}.room_association"),
        support_surfaces=_share_map_from_dict(data.get("support_surfaces") or {}, f"{where}.support_surfaces"),
        cooccurrence=_edge_map_from_dict(data.get("cooccurrence") or {}, f"{where}.cooccurrence"),
        cooccurrence_by_room={
            canon(room): _edge_map_from_dict(edges, f"{where}.cooccurrence_by_room.{room}")
            for room, edges in by_room_raw.items()
        },
        orientation=orientation,
    )


def ontology_from_dict(data: dict) -> Ontology:
    if not isinstance(data, dict):
        raise ValidationError("$", "ontology document must be a JSON object")
    raw = data.get("categories")
    if not isinstance(raw, dict):
        raise ValidationError("categories", "missing or not an object")
    categories = {
        canon(name): entry_from_dict(entry, f"categories.{name}") for name, entry in raw.items()
    }
    meta = data.get("meta") or {}
    if not isinstance(meta, dict):
        raise ValidationError("meta", "expected an object")
    return Ontology(categories=categories, meta=meta)


def _dim_stats_to_dict(stats: DimStats) -> dict:
    return {
        "p5": stats.p5,
        "p25": stats.p25,
        "median": stats.median,
        "p75": stats.p75,
        "p95": stats.p95,
        "mean": stats.mean,
        "std": stats.std,
        "n": stats.n,
    }


def _edge_map_to_dict(edges: dict[str, CooccurEdge]) -> dict:
    return {
        name: {"count": e.count, "p_b_given_a": e.p_b_given_a, "npmi": e.npmi}
        for name, e in edges.items()
    }


def entry_to_dict(entry: CategoryEntry) -> dict:
    orientation: dict = {}
    if entry.orientation.back_to_wall is not None:
        r = entry.orientation.back_to_wall
        orientation["back_to_wall"] = {"fraction": r.fraction, "mean_angle_deg": r.mean_angle_deg, "n": r.n}
    if entry.orientation.faces_center is not None:
        r = entry.orientation.faces_center
        orientation["faces_center"] = {"fraction": r.fraction, "mean_angle_deg": r.mean_angle_deg, "n": r.n}
    if entry.orientation.faces_pair:
        orientation["faces_pair"] = {
            target: {
                "fraction": r.fraction,
                "mean_angle_deg": r.mean_angle_deg,
                "mean_distance_m": r.mean_distance_m,
                "n": r.n,
            }
            for target, r in entry.orientation.faces_pair.items()
        }
    return {
        "dimension": {axis: _dim_stats_to_dict(s) for axis, s in entry.dimension.items()},
        "room_association": {k: {"count": v.count, "fraction": v.fraction} for k, v in entry.room_association.items()},
        "support_surfaces": {k: {"count": v.count, "fraction": v.fraction} for k, v in entry.support_surfaces.items()},
        "cooccurrence": _edge_map_to_dict(entry.cooccurrence),
        "cooccurrence_by_room": {
            room: _edge_map_to_dict(edges) for room, edges in entry.cooccurrence_by_room.items()
        },
        "orientation": orientation,
    }


def ontology_to_dict(ontology: Ontology) -> dict:
    return {
        "categories": {name: entry_to_dict(entry) for name, entry in ontology.categories.items()},
        "meta": ontology.meta,
    }


def load_ontology(path: str | Path) -> Ontology:
    return ontology_from_dict(_read_json(path))


def save_ontology(ontology: Ontology, path: str | Path) -> None:
    Path(path).write_text(dump_json(ontology_to_dict(ontology)), encoding="utf-8")
