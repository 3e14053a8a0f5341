"""Build an ontology from a normalized scene corpus.

The corpus is JSONL, one scene per line (see ``scene.CorpusScene``). The scan
accumulates mergeable ``PartialStats`` so shards can be processed in any
order or in parallel; ``finalize`` sorts every accumulator before computing
statistics, which makes the emitted ontology byte-identical regardless of
sharding.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from .geometry import angle_delta, direction_to, nearest_wall, polygon_centroid
from .ontology import (
    COOCCUR_CAP,
    CategoryEntry,
    CooccurEdge,
    DimStats,
    GroupShare,
    Ontology,
    OrientationStats,
    PairRelationStats,
    RelationStats,
)
from .scene import CorpusScene, canon, iter_corpus

SUPPORT_PREDICATES = frozenset({
    "on", "on top of", "sitting on", "standing on", "resting on", "lying on", "laying on",
})

DEFAULT_IMPOSSIBLE_SURFACES = (
    "ceiling", "sky", "wall", "window", "door", "curtain", "mirror", "lamp", "light",
)

DEFAULT_SAME_CATEGORY_WHITELIST = ("box", "tray", "plate", "book", "pillow")

# Coarse heaviness ranks: a supported object may not outrank its supporter.
DEFAULT_WEIGHT_RANK = {
    "cup": 1, "plate": 1, "book": 1, "bottle": 1, "bowl": 1, "phone": 1,
    "lamp": 2, "laptop": 2, "monitor": 2, "vase": 2, "plant": 2,
    "chair": 4, "nightstand": 4, "stool": 4,
    "table": 5, "desk": 5, "dresser": 5,
    "sofa": 6, "bookshelf": 6, "cabinet": 6,
    "bed": 7, "wardrobe": 7, "piano": 7,
}


@dataclass
class BuilderConfig:
    support_tolerance: float = 0.05
    cooccur_distance_threshold: float = 5.0
    back_to_wall_angle: float = 45.0
    faces_center_angle: float = 60.0
    faces_pair_angle: float = 60.0
    faces_pair_radius: float = 5.0
    cooccur_cap: int = COOCCUR_CAP
    impossible_surfaces: tuple[str, ...] = DEFAULT_IMPOSSIBLE_SURFACES
    same_category_support_whitelist: tuple[str, ...] = DEFAULT_SAME_CATEGORY_WHITELIST
    weight_rank: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_WEIGHT_RANK))

    def __post_init__(self):
        for name in ("support_tolerance", "cooccur_distance_threshold", "back_to_wall_angle",
                     "faces_center_angle", "faces_pair_angle", "faces_pair_radius"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.cooccur_cap < 1:
            raise ValueError("cooccur_cap must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "BuilderConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown builder config keys: {sorted(unknown)}")
        merged = dict(data)
        for name in ("impossible_surfaces", "same_category_support_whitelist"):
            if name in merged:
                merged[name] = tuple(merged[name])
        return cls(**merged)

    def to_dict(self) -> dict:
        return {
            "support_tolerance": self.support_tolerance,
            "cooccur_distance_threshold": self.cooccur_distance_threshold,
            "back_to_wall_angle": self.back_to_wall_angle,
            "faces_center_angle": self.faces_center_angle,
            "faces_pair_angle": self.faces_pair_angle,
            "faces_pair_radius": self.faces_pair_radius,
            "cooccur_cap": self.cooccur_cap,
            "impossible_surfaces": sorted(self.impossible_surfaces),
            "same_category_support_whitelist": sorted(self.same_category_support_whitelist),
            "weight_rank": {k: self.weight_rank[k] for k in sorted(self.weight_rank)},
        }


@dataclass(frozen=True)
class RelationTriple:
    """A (subject, predicate, object) relation with image-space boxes.

    Boxes are (x, y, w, h) with y growing downward, so a subject resting on
    the object has its bottom edge (y + h) inside the object's vertical span.
    """

    subject: str
    predicate: str
    object: str
    subject_box: tuple[float, float, float, float]
    object_box: tuple[float, float, float, float]

    @classmethod
    def from_dict(cls, data: dict) -> "RelationTriple":
        return cls(
            subject=str(data["subject"]),
            predicate=str(data["predicate"]),
            object=str(data["object"]),
            subject_box=tuple(float(v) for v in data["subject_box"]),
            object_box=tuple(float(v) for v in data["object_box"]),
        )


def infer_support(scene: CorpusScene, cfg: BuilderConfig | None = None) -> list[tuple[int, int | str | None]]:
    """Infer what each object rests on.

    Objects are processed in ascending order of bottom height. An object is
    floor-supported when its bottom is within tolerance of z=0; otherwise it
    is assigned to an already-placed object whose top surface matches its
    bottom within tolerance AND whose footprint contains the object's (x, y)
    center, preferring the largest footprint on ties. Returns
    ``(object_index, supporter)`` per object where supporter is an object
    index, ``"floor"``, or ``None`` when nothing qualifies.
    """
    cfg = cfg or BuilderConfig()
    order = sorted(
        range(len(scene.objects)),
        key=lambda i: (scene.objects[i].center[2] - scene.objects[i].extents[2] / 2.0, i),
    )
    placed: list[int] = []
    result: dict[int, int | str | None] = {}
    for i in order:
        obj = scene.objects[i]
        bottom = obj.center[2] - obj.extents[2] / 2.0
        if bottom <= cfg.support_tolerance:
            result[i] = "floor"
        else:
            candidates = []
            for j in placed:
                sup = scene.objects[j]
                top = sup.center[2] + sup.extents[2] / 2.0
                if abs(top - bottom) > cfg.support_tolerance:
                    continue
                if not _footprint_contains(sup, obj.center[0], obj.center[1]):
                    continue
                candidates.append((-(sup.extents[0] * sup.extents[1]), j))
            result[i] = min(candidates)[1] if candidates else None
        placed.append(i)
    return [(i, result[i]) for i in range(len(scene.objects))]


def _footprint_contains(obj, x: float, y: float) -> bool:
    t = math.radians(obj.yaw_deg)
    c, s = math.cos(t), math.sin(t)
    dx, dy = x - obj.center[0], y - obj.center[1]
    lx = c * dx + s * dy  # rotate into the object's local frame
    ly = -s * dx + c * dy
    return abs(lx) <= obj.extents[0] / 2.0 and abs(ly) <= obj.extents[1] / 2.0


def filter_support_predicates(
    triples: list[RelationTriple],
    weight_rank: dict[str, int] | None = None,
    cfg: BuilderConfig | None = None,
) -> list[RelationTriple]:
    """Keep only physically plausible support relations.

    Drops non-support predicates, impossible supporting surfaces,
    non-whitelisted same-category pairs, pairs where the supported object
    outranks its supporter in heaviness, and pairs failing the box sanity
    check (subject bottom inside the supporter's vertical span with positive
    horizontal overlap).
    """
    cfg = cfg or BuilderConfig()
    ranks = {canon(k): v for k, v in (weight_rank if weight_rank is not None else cfg.weight_rank).items()}
    impossible = {canon(s) for s in cfg.impossible_surfaces}
    whitelist = {canon(s) for s in cfg.same_category_support_whitelist}

    kept = []
    for triple in triples:
        if canon(triple.predicate) not in SUPPORT_PREDICATES:
            continue
        subject = canon(triple.subject)
        supporter = canon(triple.object)
        if supporter in impossible:
            continue
        if subject == supporter and subject not in whitelist:
            continue
        if subject in ranks and supporter in ranks and ranks[subject] > ranks[supporter]:
            continue
        sx, sy, sw, sh = triple.subject_box
        ox, oy, ow, oh = triple.object_box
        subject_bottom = sy + sh
        if not (oy <= subject_bottom <= oy + oh):
            continue
        if min(sx + sw, ox + ow) - max(sx, ox) <= 0.0:
            continue
        kept.append(triple)
    return kept


@dataclass
class PartialStats:
    """Mergeable per-shard accumulators.

    ``merge`` is associative and commutative in effect on the final ontology
    because ``finalize`` sorts every sample list before reducing it.
    """

    scenes: int = 0
    scene_ids: list[str] = field(default_factory=list)
    room_scenes: Counter = field(default_factory=Counter)
    dim_samples: dict = field(default_factory=dict)  # cat -> axis -> [m]
    room_counts: dict = field(default_factory=dict)  # cat -> Counter[room]
    support_counts: dict = field(default_factory=dict)  # cat -> Counter[surface]
    cat_scenes: Counter = field(default_factory=Counter)
    cat_room_scenes: dict = field(default_factory=dict)  # room -> Counter[cat]
    pair_scenes: Counter = field(default_factory=Counter)  # (a, b) sorted -> scenes
    pair_room_scenes: dict = field(default_factory=dict)  # room -> Counter[(a, b)]
    back_to_wall_samples: dict = field(default_factory=dict)  # cat -> [deg]
    faces_center_samples: dict = field(default_factory=dict)  # cat -> [deg]
    faces_pair_samples: dict = field(default_factory=dict)  # (cat, target) -> [(deg, m)]
    errors: list[str] = field(default_factory=list)

    def add_scene(self, scene: CorpusScene, cfg: BuilderConfig) -> None:
        self.scenes += 1
        self.scene_ids.append(scene.scene_id)
        room = canon(scene.room_type) or "unknown"
        self.room_scenes[room] += 1

        cats = []
        for obj in scene.objects:
            cat = canon(obj.category)
            cats.append(cat)
            axes = self.dim_samples.setdefault(cat, {"width": [], "height": [], "depth": []})
            axes["width"].append(obj.extents[0])
            axes["height"].append(obj.extents[1])
            axes["depth"].append(obj.extents[2])
            self.room_counts.setdefault(cat, Counter())[room] += 1

        for i, supporter in infer_support(scene, cfg):
            if supporter is None:
                continue
            surface = "floor" if supporter == "floor" else canon(scene.objects[supporter].category)
            self.support_counts.setdefault(cats[i], Counter())[surface] += 1

        present = sorted(set(cats))
        for cat in present:
            self.cat_scenes[cat] += 1
            self.cat_room_scenes.setdefault(room, Counter())[cat] += 1
        for a, b in itertools.combinations(present, 2):
            if self._within_threshold(scene, a, b, cfg.cooccur_distance_threshold):
                self.pair_scenes[(a, b)] += 1
                self.pair_room_scenes.setdefault(room, Counter())[(a, b)] += 1

        centroid = polygon_centroid(scene.floor_polygon)
        for i, obj in enumerate(scene.objects):
            cat = cats[i]
            x, y = obj.center[0], obj.center[1]
            normal_deg, _ = nearest_wall((x, y), scene.floor_polygon)
            self.back_to_wall_samples.setdefault(cat, []).append(angle_delta(obj.yaw_deg, normal_deg))
            if (x, y) != centroid:
                self.faces_center_samples.setdefault(cat, []).append(
                    angle_delta(obj.yaw_deg, direction_to((x, y), centroid))
                )
            for j, other in enumerate(scene.objects):
                if j == i:
                    continue
                ox, oy = other.center[0], other.center[1]
                dist = math.hypot(ox - x, oy - y)
                if dist == 0.0 or dist > cfg.faces_pair_radius:
                    continue
                dev = angle_delta(obj.yaw_deg, direction_to((x, y), (ox, oy)))
                self.faces_pair_samples.setdefault((cat, cats[j]), []).append((dev, dist))

    @staticmethod
    def _within_threshold(scene: CorpusScene, a: str, b: str, threshold: float) -> bool:
        pa = [o for o in scene.objects if canon(o.category) == a]
        pb = [o for o in scene.objects if canon(o.category) == b]
        for oa in pa:
            for ob in pb:
                if math.hypot(oa.center[0] - ob.center[0], oa.center[1] - ob.center[1]) <= threshold:
                    return True
        return False

    def merge(self, other: "PartialStats") -> None:
        self.scenes += other.scenes
        self.scene_ids.extend(other.scene_ids)
        self.room_scenes.update(other.room_scenes)
        self.cat_scenes.update(other.cat_scenes)
        self.pair_scenes.update(other.pair_scenes)
        self.errors.extend(other.errors)
        for cat, axes in other.dim_samples.items():
            mine = self.dim_samples.setdefault(cat, {"width": [], "height": [], "depth": []})
            for axis, samples in axes.items():
                mine[axis].extend(samples)
        for cat, counter in other.room_counts.items():
            self.room_counts.setdefault(cat, Counter()).update(counter)
        for cat, counter in other.support_counts.items():
            self.support_counts.setdefault(cat, Counter()).update(counter)
        for room, counter in other.cat_room_scenes.items():
            self.cat_room_scenes.setdefault(room, Counter()).update(counter)
        for room, counter in other.pair_room_scenes.items():
            self.pair_room_scenes.setdefault(room, Counter()).update(counter)
        for cat, samples in other.back_to_wall_samples.items():
            self.back_to_wall_samples.setdefault(cat, []).extend(samples)
        for cat, samples in other.faces_center_samples.items():
            self.faces_center_samples.setdefault(cat, []).extend(samples)
        for key, samples in other.faces_pair_samples.items():
            self.faces_pair_samples.setdefault(key, []).extend(samples)

    def finalize(self, cfg: BuilderConfig) -> Ontology:
        categories: dict[str, CategoryEntry] = {}
        for cat in sorted(self.dim_samples):
            dimension = {}
            for axis in ("width", "height", "depth"):
                samples = sorted(self.dim_samples[cat][axis])
                if samples:
                    dimension[axis] = _dim_stats(samples)

            total_rooms = sum(self.room_counts.get(cat, Counter()).values())
            room_association = {
                room: GroupShare(count, count / total_rooms)
                for room, count in sorted(self.room_counts.get(cat, Counter()).items())
            }
            support_total = sum(self.support_counts.get(cat, Counter()).values())
            support_surfaces = {
                surface: GroupShare(count, count / support_total)
                for surface, count in sorted(self.support_counts.get(cat, Counter()).items())
            }

            orientation = OrientationStats(
                back_to_wall=_relation(self.back_to_wall_samples.get(cat), cfg.back_to_wall_angle),
                faces_center=_relation(self.faces_center_samples.get(cat), cfg.faces_center_angle),
                faces_pair=self._faces_pair_for(cat, cfg),
            )
            categories[cat] = CategoryEntry(
                dimension=dimension,
                room_association=room_association,
                support_surfaces=support_surfaces,
                cooccurrence=self._edges_for(cat, None, cfg),
                cooccurrence_by_room=self._edges_by_room(cat, cfg),
                orientation=orientation,
            )

        meta = {
            "scene_count": self.scenes,
            "scene_ids": sorted(self.scene_ids),
            "config": cfg.to_dict(),
            "skipped_records": sorted(self.errors),
        }
        return Ontology(categories=categories, meta=meta)

    def _faces_pair_for(self, cat: str, cfg: BuilderConfig) -> dict[str, PairRelationStats]:
        out = {}
        for (src, target), samples in sorted(self.faces_pair_samples.items()):
            if src != cat or not samples:
                continue
            devs = sorted(dev for dev, _ in samples)
            dists = sorted(dist for _, dist in samples)
            n = len(samples)
            out[target] = PairRelationStats(
                fraction=sum(1 for d in devs if d <= cfg.faces_pair_angle) / n,
                mean_angle_deg=math.fsum(devs) / n,
                mean_distance_m=math.fsum(dists) / n,
                n=n,
            )
        return out

    def _edges_for(self, cat: str, room: str | None, cfg: BuilderConfig) -> dict[str, CooccurEdge]:
        if room is None:
            pair_counts, cat_counts, total = self.pair_scenes, self.cat_scenes, self.scenes
        else:
            pair_counts = self.pair_room_scenes.get(room, Counter())
            cat_counts = self.cat_room_scenes.get(room, Counter())
            total = self.room_scenes.get(room, 0)
        edges = []
        for (a, b), count in pair_counts.items():
            if count < 1:
                continue
            other = b if a == cat else a if b == cat else None
            if other is None:
                continue
            edges.append((count, other, _make_edge(count, cat_counts[cat], cat_counts[other], total)))
        edges.sort(key=lambda item: (-item[0], item[1]))
        return {other: edge for _, other, edge in edges[: cfg.cooccur_cap]}

    def _edges_by_room(self, cat: str, cfg: BuilderConfig) -> dict[str, dict[str, CooccurEdge]]:
        out = {}
        for room in sorted(self.pair_room_scenes):
            edges = self._edges_for(cat, room, cfg)
            if edges:
                out[room] = edges
        return out


def _dim_stats(sorted_samples: list[float]) -> DimStats:
    n = len(sorted_samples)
    mean = math.fsum(sorted_samples) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in sorted_samples) / n)
    return DimStats(
        p5=_percentile(sorted_samples, 5.0),
        p25=_percentile(sorted_samples, 25.0),
        median=_percentile(sorted_samples, 50.0),
        p75=_percentile(sorted_samples, 75.0),
        p95=_percentile(sorted_samples, 95.0),
        mean=mean,
        std=std,
        n=n,
    )


def _percentile(sorted_vals: list[float], p: float) -> float:
    """Linear interpolation between order statistics."""
    n = len(sorted_vals)
    if n == 1:
        return sorted_vals[0]
    pos = (n - 1) * (p / 100.0)
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi:
        return sorted_vals[int(pos)]
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * (pos - lo)


def _relation(samples: list[float] | None, angle: float) -> RelationStats | None:
    if not samples:
        return None
    devs = sorted(samples)
    n = len(devs)
    return RelationStats(
        fraction=sum(1 for d in devs if d <= angle) / n,
        mean_angle_deg=math.fsum(devs) / n,
        n=n,
    )


def _make_edge(pair_count: int, count_a: int, count_b: int, total: int) -> CooccurEdge:
    p_b_given_a = pair_count / count_a
    p_ab = pair_count / total
    if p_ab >= 1.0:
        npmi = 1.0
    else:
        pmi = math.log(p_ab / ((count_a / total) * (count_b / total)))
        npmi = max(-1.0, min(1.0, pmi / -math.log(p_ab)))
    return CooccurEdge(count=pair_count, p_b_given_a=p_b_given_a, npmi=npmi)


def extract_dimensions(scenes, cfg: BuilderConfig | None = None) -> dict[str, dict[str, DimStats]]:
    """Per-category width/height/depth statistics over a scene stream."""
    cfg = cfg or BuilderConfig()
    stats = PartialStats()
    for scene in scenes:
        stats.add_scene(scene, cfg)
    return {cat: entry.dimension for cat, entry in stats.finalize(cfg).categories.items()}


def compute_cooccurrence(scenes, cfg: BuilderConfig | None = None):
    """Global and per-room co-occurrence edge maps over a scene stream."""
    cfg = cfg or BuilderConfig()
    stats = PartialStats()
    for scene in scenes:
        stats.add_scene(scene, cfg)
    ontology = stats.finalize(cfg)
    global_edges = {cat: entry.cooccurrence for cat, entry in ontology.categories.items()}
    by_room: dict[str, dict[str, dict[str, CooccurEdge]]] = {}
    for cat, entry in ontology.categories.items():
        for room, edges in entry.cooccurrence_by_room.items():
            by_room.setdefault(room, {})[cat] = edges
    return global_edges, by_room


def compute_orientation_stats(scenes, cfg: BuilderConfig | None = None) -> dict[str, OrientationStats]:
    """Per-category orientation statistics over a scene stream."""
    cfg = cfg or BuilderConfig()
    stats = PartialStats()
    for scene in scenes:
        stats.add_scene(scene, cfg)
    return {cat: entry.orientation for cat, entry in stats.finalize(cfg).categories.items()}


def _scan_file(path_and_cfg: tuple[str, BuilderConfig]) -> PartialStats:
    path, cfg = path_and_cfg
    stats = PartialStats()
    for lineno, item in iter_corpus(path):
        if isinstance(item, CorpusScene):
            stats.add_scene(item, cfg)
        else:
            stats.errors.append(f"{Path(path).name}:{lineno}: {item}")
    return stats


def build_ontology(
    corpus_paths: list[str | Path],
    cfg: BuilderConfig | None = None,
    relations: list[RelationTriple] | None = None,
    jobs: int = 1,
) -> Ontology:
    """Scan all corpus files and assemble the ontology.

    Bad records are skipped and reported in ``meta["skipped_records"]``.
    Filtered relation triples, when given, contribute additional support
    observations. Output is deterministic for fixed inputs regardless of
    sharding or ``jobs``.
    """
    if not corpus_paths:
        raise ValueError("need at least one corpus file")
    cfg = cfg or BuilderConfig()
    paths = sorted(str(p) for p in corpus_paths)

    total = PartialStats()
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            shards = list(pool.map(_scan_file, [(p, cfg) for p in paths]))
    else:
        shards = [_scan_file((p, cfg)) for p in paths]
    for shard in shards:  # merge in sorted-path order
        total.merge(shard)

    if relations:
        for triple in filter_support_predicates(relations, cfg=cfg):
            total.support_counts.setdefault(canon(triple.subject), Counter())[canon(triple.object)] += 1

    return total.finalize(cfg)


SUMMARY_COLUMNS = (
    "record", "category", "target", "width_median", "height_median", "depth_median",
    "back_to_wall_fraction", "faces_center_fraction", "count", "npmi", "npmi_positive_fraction",
)


@dataclass
class OntologySummary:
    edge_count: int
    npmi_positive_fraction: float | None
    categories: list[dict]
    edges: list[dict]

    def rows(self) -> list[list]:
        """Plot-ready rows in SUMMARY_COLUMNS order."""
        out = []
        if self.edge_count or self.categories:
            out.append(["totals", "", "", "", "", "", "", "", self.edge_count,
                        "", "" if self.npmi_positive_fraction is None else self.npmi_positive_fraction])
        for cat in self.categories:
            out.append([
                "category", cat["category"], "",
                cat.get("width_median", ""), cat.get("height_median", ""), cat.get("depth_median", ""),
                cat.get("back_to_wall_fraction", ""), cat.get("faces_center_fraction", ""),
                "", "", "",
            ])
        for edge in self.edges:
            out.append(["edge", edge["category"], edge["target"], "", "", "", "", "",
                        edge["count"], edge["npmi"], ""])
        return out


def summarize(ontology: Ontology) -> OntologySummary:
    """Summary table: edge stats, per-category orientation fractions, medians."""
    seen: dict[tuple[str, str], CooccurEdge] = {}
    for cat, entry in ontology.categories.items():
        for other, edge in entry.cooccurrence.items():
            seen.setdefault(tuple(sorted((cat, other))), edge)
    edges = [
        {"category": a, "target": b, "count": e.count, "npmi": e.npmi}
        for (a, b), e in sorted(seen.items())
    ]
    positive = sum(1 for e in edges if e["npmi"] > 0.0)

    categories = []
    for cat in sorted(ontology.categories):
        entry = ontology.categories[cat]
        row: dict = {"category": cat}
        for axis in ("width", "height", "depth"):
            if axis in entry.dimension:
                row[f"{axis}_median"] = entry.dimension[axis].median
        if entry.orientation.back_to_wall is not None:
            row["back_to_wall_fraction"] = entry.orientation.back_to_wall.fraction
        if entry.orientation.faces_center is not None:
            row["faces_center_fraction"] = entry.orientation.faces_center.fraction
        categories.append(row)

    return OntologySummary(
        edge_count=len(edges),
        npmi_positive_fraction=(positive / len(edges)) if edges else None,
        categories=categories,
        edges=edges,
    )
