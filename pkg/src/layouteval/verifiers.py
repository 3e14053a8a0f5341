"""Layout verifiers and score aggregation.

Five checks — scale, co-occurrence, completeness, orientation, overlap — each
produce per-item verdicts plus a fraction-in-[0,1] score. ``evaluate`` runs
them all and combines them into the overall average:

    average = (semantic + orientation + (prox_overlap + true_overlap) / 2) / 3

Vacuous convention everywhere: a verifier with zero checked items scores 1.0.
All functions are pure; an ontology can be shared read-only across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ValidationError
from .geometry import (
    angle_delta,
    direction_to,
    nearest_wall,
    obb_aabb,
    polygon_centroid,
    rect_polygon,
    sat_penetration,
    aabb_overlap_amount,
)
from .ontology import Ontology, orientation_checks_for, cooccur_fraction
from .scene import PlacementCondition, SceneLayout, canon

PASS = "pass"
SOFT_FAIL = "soft_fail"
HARD_FAIL = "hard_fail"
FAIL = "fail"
SKIPPED = "skipped"

WEAK_PAIR_POLICIES = ("fail", "pass", "exclude")


@dataclass(frozen=True)
class EvalParams:
    """Every tunable threshold used by the verifiers."""

    scale_hard_factor: float = 2.0
    scale_soft_eps: float = 0.05
    plausibility_floor: float = 0.01
    cooccur_thresh: float = 0.2
    func_thresh: float = 0.7
    func_dist: float = 2.0
    weak_dist: float = 3.5
    soft_angle: float = 75.0
    hard_angle: float = 150.0
    overlap_tolerance: float = 0.2
    applicability_fraction: float = 0.5
    faces_pair_radius: float = 5.0
    weak_pair_policy: str = "fail"
    semantic_weights: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

    def __post_init__(self):
        if not (0.0 < self.soft_angle <= self.hard_angle <= 180.0):
            raise ValidationError(
                "soft_angle", f"need 0 < soft ({self.soft_angle}) <= hard ({self.hard_angle}) <= 180"
            )
        if self.scale_hard_factor < 1.0:
            raise ValidationError("scale_hard_factor", f"must be >= 1, got {self.scale_hard_factor}")
        if self.scale_soft_eps < 0.0:
            raise ValidationError("scale_soft_eps", f"must be >= 0, got {self.scale_soft_eps}")
        for name in ("func_dist", "weak_dist", "overlap_tolerance", "faces_pair_radius"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(name, f"must be > 0, got {getattr(self, name)}")
        if not (0.0 <= self.plausibility_floor <= 1.0):
            raise ValidationError("plausibility_floor", f"must be in [0, 1], got {self.plausibility_floor}")
        if not (0.0 <= self.cooccur_thresh < self.func_thresh <= 1.0):
            raise ValidationError(
                "cooccur_thresh",
                f"need 0 <= cooccur ({self.cooccur_thresh}) < func ({self.func_thresh}) <= 1",
            )
        if not (0.0 <= self.applicability_fraction <= 1.0):
            raise ValidationError(
                "applicability_fraction", f"must be in [0, 1], got {self.applicability_fraction}"
            )
        if self.weak_pair_policy not in WEAK_PAIR_POLICIES:
            raise ValidationError(
                "weak_pair_policy", f"expected one of {WEAK_PAIR_POLICIES}, got {self.weak_pair_policy!r}"
            )
        weights = self.semantic_weights
        if len(weights) != 3 or any(w < 0.0 for w in weights):
            raise ValidationError("semantic_weights", f"expected 3 non-negative weights, got {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValidationError("semantic_weights", f"weights must sum to 1, got {sum(weights)}")

    def with_overrides(self, **overrides) -> "EvalParams":
        """New params with the given fields replaced (re-validated)."""
        return replace(self, **overrides)

    @classmethod
    def from_dict(cls, data: dict, base: "EvalParams | None" = None) -> "EvalParams":
        """Build params from an overlay dict merged over ``base`` (or defaults)."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(sorted(unknown)[0], "unknown parameter")
        merged = dict(data)
        if "semantic_weights" in merged:
            merged["semantic_weights"] = tuple(merged["semantic_weights"])
        return replace(base or cls(), **merged)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["semantic_weights"] = list(self.semantic_weights)
        return out


@dataclass(frozen=True)
class AxisVerdict:
    axis: str  # ontology band checked: width | height | depth
    dim_m: float | None  # None when the axis was skipped
    kind: str  # pass | soft_fail | hard_fail | skipped
    detail: str


@dataclass
class ObjectScaleResult:
    index: int
    label: str
    axes: list[AxisVerdict]
    score: float | None  # None when no axis was checkable

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "label": self.label,
            "axes": [dict(vars(a)) for a in self.axes],
            "score": self.score,
        }


@dataclass
class PairVerdict:
    a: str
    b: str
    kind: str
    detail: str
    fraction: float
    d_min: float | None

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass(frozen=True)
class LabelDiff:
    label: str
    expected: int
    actual: int
    matched: int
    missing: int
    extra: int


@dataclass
class CompletenessDiff:
    labels: list[LabelDiff]

    def to_dict(self) -> dict:
        return {"labels": [dict(vars(d)) for d in self.labels]}


@dataclass
class SubCheckVerdict:
    check: str  # back_to_wall | faces_center | faces_pair
    target: str | None  # paired-object label for faces_pair
    target_deg: float
    delta_deg: float
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class ObjectOrientationResult:
    index: int
    label: str
    checks: list[SubCheckVerdict]
    score: float | None  # None when no sub-check applies

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "label": self.label,
            "checks": [c.to_dict() for c in self.checks],
            "score": self.score,
        }


@dataclass
class OverlapVerdict:
    index_a: int
    label_a: str
    index_b: int
    label_b: str
    amount_m: float
    kind: str
    detail: str

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class Scores:
    scale: float
    cooccur: float
    complete: float | None
    semantic: float
    orientation: float
    prox_overlap: float
    true_overlap: float
    overlap: float
    average: float

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class AssessmentReport:
    scores: Scores
    scale: list[ObjectScaleResult]
    cooccurrence: list[PairVerdict]
    completeness: CompletenessDiff | None
    orientation: list[ObjectOrientationResult]
    overlap_aabb: list[OverlapVerdict]
    overlap_obb: list[OverlapVerdict]
    support_info: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scores": self.scores.to_dict(),
            "scale": [r.to_dict() for r in self.scale],
            "cooccurrence": [r.to_dict() for r in self.cooccurrence],
            "completeness": self.completeness.to_dict() if self.completeness else None,
            "orientation": [r.to_dict() for r in self.orientation],
            "overlap_aabb": [r.to_dict() for r in self.overlap_aabb],
            "overlap_obb": [r.to_dict() for r in self.overlap_obb],
            "support_info": self.support_info,
        }


def _axis_verdict(axis: str, dim: float, p5: float, p95: float, params: EvalParams) -> AxisVerdict:
    k = params.scale_hard_factor
    eps = params.scale_soft_eps
    if dim < p5 / k:
        return AxisVerdict(axis, dim, HARD_FAIL, f"{dim:.2f} m < hard min {p5 / k:.2f} m")
    if dim > p95 * k:
        return AxisVerdict(axis, dim, HARD_FAIL, f"{dim:.2f} m > hard max {p95 * k:.2f} m")
    if dim < p5 - eps:
        return AxisVerdict(axis, dim, SOFT_FAIL, f"{dim:.2f} m < soft min {p5 - eps:.2f} m")
    if dim > p95 + eps:
        return AxisVerdict(axis, dim, SOFT_FAIL, f"{dim:.2f} m > soft max {p95 + eps:.2f} m")
    return AxisVerdict(axis, dim, PASS, f"{dim:.2f} m in [{p5 - eps:.2f}, {p95 + eps:.2f}] m")


def _all_pass_score(kinds: list[str]) -> float:
    """Scale rule: 0 on any hard fail, 0.5 on any soft fail, 1 when all pass."""
    if any(k == HARD_FAIL for k in kinds):
        return 0.0
    if any(k == SOFT_FAIL for k in kinds):
        return 0.5
    return 1.0


def _any_pass_score(kinds: list[str]) -> float:
    """Orientation rule: 1 on any pass, 0.5 on any soft fail, else 0."""
    if any(k == PASS for k in kinds):
        return 1.0
    if any(k == SOFT_FAIL for k in kinds):
        return 0.5
    return 0.0


def verify_scale(
    layout: SceneLayout, ontology: Ontology, params: EvalParams | None = None
) -> tuple[list[ObjectScaleResult], float]:
    """Check each object's dimensions against the ontology percentile bands.

    Footprint extents are matched against the width/height bands under both
    axis assignments (footprints swap under a 90-degree yaw) and the better
    per-object outcome is kept. When a mesh reference is present the vertical
    extent is derived from the footprint scales and checked against the depth
    band. Per object: 0 on any hard fail, 0.5 on any soft fail, 1 otherwise;
    objects with no checkable axis are excluded from the score.
    """
    params = params or EvalParams()
    results: list[ObjectScaleResult] = []
    scored: list[float] = []
    for index, obj in enumerate(layout.objects):
        entry = ontology.entry(obj.label)
        depth_verdict: AxisVerdict | None = None
        skipped: list[AxisVerdict] = []
        if entry is None:
            skipped = [AxisVerdict(axis, None, SKIPPED, "no ontology data for category") for axis in ("width", "height")]
            results.append(ObjectScaleResult(index, obj.label, skipped, None))
            continue

        width_band = entry.dimension.get("width")
        height_band = entry.dimension.get("height")
        depth_band = entry.dimension.get("depth")

        if obj.mesh_ref is not None and depth_band is not None:
            s_x = obj.w / obj.mesh_ref.w
            s_y = obj.h / obj.mesh_ref.h
            s_z = (s_x + s_y) / 2.0
            depth = obj.mesh_ref.d * s_z
            depth_verdict = _axis_verdict("depth", depth, depth_band.p5, depth_band.p95, params)
        elif obj.mesh_ref is not None:
            skipped.append(AxisVerdict("depth", None, SKIPPED, "no depth stats in ontology"))

        def footprint_verdicts(w_dim: float, h_dim: float) -> list[AxisVerdict]:
            out = []
            if width_band is not None:
                out.append(_axis_verdict("width", w_dim, width_band.p5, width_band.p95, params))
            if height_band is not None:
                out.append(_axis_verdict("height", h_dim, height_band.p5, height_band.p95, params))
            return out

        straight = footprint_verdicts(obj.w, obj.h)
        swapped = footprint_verdicts(obj.h, obj.w)
        if depth_verdict is not None:
            straight = straight + [depth_verdict]
            swapped = swapped + [depth_verdict]
        for axis, band in (("width", width_band), ("height", height_band)):
            if band is None:
                skipped.append(AxisVerdict(axis, None, SKIPPED, f"no {axis} stats in ontology"))

        if not straight:  # nothing checkable
            results.append(ObjectScaleResult(index, obj.label, skipped, None))
            continue

        score_straight = _all_pass_score([v.kind for v in straight])
        score_swapped = _all_pass_score([v.kind for v in swapped])
        if score_swapped > score_straight:
            chosen, score = swapped, score_swapped
        else:
            chosen, score = straight, score_straight
        results.append(ObjectScaleResult(index, obj.label, chosen + skipped, score))
        scored.append(score)

    s_scale = sum(scored) / len(scored) if scored else 1.0
    return results, s_scale


def verify_cooccurrence(
    layout: SceneLayout, ontology: Ontology, params: EvalParams | None = None
) -> tuple[list[PairVerdict], float]:
    """Score every unordered pair of distinct categories present in the scene.

    The association fraction comes from the ontology (room-conditioned when
    the layout names a room type). Implausible pairs fail outright; plausible
    pairs must sit within the distance budget of their association strength.
    Pairs between the plausibility floor and the co-occurrence threshold
    follow ``params.weak_pair_policy``.
    """
    params = params or EvalParams()
    room = canon(layout.room_type) if layout.room_type.strip() else None
    by_cat: dict[str, list] = {}
    for obj in layout.objects:
        by_cat.setdefault(canon(obj.label), []).append(obj)

    verdicts: list[PairVerdict] = []
    passed = 0
    counted = 0
    for a, b in itertools.combinations(sorted(by_cat), 2):
        f = cooccur_fraction(ontology, a, b, room=room)
        d_min = min(
            math.hypot(oa.cx - ob.cx, oa.cy - ob.cy)
            for oa in by_cat[a]
            for ob in by_cat[b]
        )
        if f <= params.plausibility_floor:
            verdicts.append(
                PairVerdict(a, b, FAIL, f"implausible pair (f={f:.3f} <= {params.plausibility_floor})", f, d_min)
            )
            counted += 1
            continue
        if f >= params.func_thresh:
            ok = d_min <= params.func_dist
            detail = f"f={f:.2f}, d_min={d_min:.2f} m {'<=' if ok else '>'} {params.func_dist:.2f} m"
        elif f >= params.cooccur_thresh:
            ok = d_min <= params.weak_dist
            detail = f"f={f:.2f}, d_min={d_min:.2f} m {'<=' if ok else '>'} {params.weak_dist:.2f} m"
        else:
            if params.weak_pair_policy == "exclude":
                verdicts.append(
                    PairVerdict(a, b, SKIPPED, f"weak association (f={f:.2f}) excluded by policy", f, d_min)
                )
                continue
            ok = params.weak_pair_policy == "pass"
            detail = f"weak association f={f:.2f} < cooccur threshold {params.cooccur_thresh:.2f}"
        verdicts.append(PairVerdict(a, b, PASS if ok else FAIL, detail, f, d_min))
        counted += 1
        if ok:
            passed += 1

    s_cooccur = passed / counted if counted else 1.0
    return verdicts, s_cooccur


def verify_completeness(
    layout: SceneLayout, condition: PlacementCondition
) -> tuple[CompletenessDiff, float]:
    """Diff the placed inventory against the required one.

    matched = min(actual, expected); score = sum(matched) / sum(expected + extra).
    Labels placed but never required count entirely as extra.
    """
    actual: dict[str, int] = {}
    for obj in layout.objects:
        key = canon(obj.label)
        actual[key] = actual.get(key, 0) + 1
    expected = {canon(r.label): r.count for r in condition.required_objects}

    diffs: list[LabelDiff] = []
    matched_total = 0
    denominator = 0
    for label in sorted(set(expected) | set(actual)):
        ec = expected.get(label, 0)
        ac = actual.get(label, 0)
        matched = min(ac, ec)
        missing = max(ec - ac, 0)
        extra = max(ac - ec, 0)
        diffs.append(LabelDiff(label, ec, ac, matched, missing, extra))
        matched_total += matched
        denominator += ec + extra

    score = matched_total / denominator if denominator else 1.0
    return CompletenessDiff(diffs), score


def semantic_score(
    s_scale: float, s_cooccur: float, s_complete: float | None, params: EvalParams | None = None
) -> float:
    """Weighted semantic score; reweights over scale+cooccur when completeness
    was not evaluated (no placement condition)."""
    params = params or EvalParams()
    w_scale, w_cooccur, w_complete = params.semantic_weights
    if s_complete is None:
        total = w_scale + w_cooccur
        if total <= 0.0:
            return 1.0
        return (w_scale * s_scale + w_cooccur * s_cooccur) / total
    return w_scale * s_scale + w_cooccur * s_cooccur + w_complete * s_complete


def verify_orientation(
    layout: SceneLayout,
    ontology: Ontology,
    params: EvalParams | None = None,
    floor_polygon: list[tuple[float, float]] | None = None,
) -> tuple[list[ObjectOrientationResult], float]:
    """Check yaw against the applicable orientation targets.

    Targets: the inward normal of the nearest wall (back-to-wall), the
    direction to the room centroid (faces-center), and the direction to the
    nearest instance of any qualifying pair category within
    ``params.faces_pair_radius`` (faces-pair). Per sub-check: pass at
    delta <= soft_angle, soft fail at delta <= hard_angle, hard fail beyond.
    Per object the best outcome counts (any-pass rule); objects with no
    applicable sub-check are excluded.
    """
    params = params or EvalParams()
    polygon = floor_polygon or rect_polygon(
        layout.range.x_min, layout.range.y_min, layout.range.x_max, layout.range.y_max
    )
    centroid = polygon_centroid(polygon)

    results: list[ObjectOrientationResult] = []
    scored: list[float] = []
    for index, obj in enumerate(layout.objects):
        tokens = orientation_checks_for(ontology, obj.label, params)
        pair_targets = {t.split(":", 1)[1] for t in tokens if t.startswith("faces_pair:")}
        checks: list[SubCheckVerdict] = []

        if "back_to_wall" in tokens:
            normal_deg, wall_dist = nearest_wall((obj.cx, obj.cy), polygon)
            checks.append(
                _angle_check("back_to_wall", None, obj.yaw_deg, normal_deg, params,
                             f"wall {wall_dist:.2f} m away, inward normal {normal_deg:.1f} deg")
            )

        if "faces_center" in tokens and (obj.cx, obj.cy) != centroid:
            target_deg = direction_to((obj.cx, obj.cy), centroid)
            checks.append(
                _angle_check("faces_center", None, obj.yaw_deg, target_deg, params,
                             f"room centroid at {target_deg:.1f} deg")
            )

        if pair_targets:
            best: tuple[float, float, str, float] | None = None
            for j, other in enumerate(layout.objects):
                if j == index or canon(other.label) not in pair_targets:
                    continue
                dist = math.hypot(other.cx - obj.cx, other.cy - obj.cy)
                if dist > params.faces_pair_radius or dist == 0.0:
                    continue
                target_deg = direction_to((obj.cx, obj.cy), (other.cx, other.cy))
                delta = angle_delta(obj.yaw_deg, target_deg)
                key = (dist, delta, canon(other.label), target_deg)
                if best is None or key < best:
                    best = key
            if best is not None:
                dist, _, target_label, target_deg = best
                checks.append(
                    _angle_check("faces_pair", target_label, obj.yaw_deg, target_deg, params,
                                 f"nearest {target_label} {dist:.2f} m away at {target_deg:.1f} deg")
                )

        score = _any_pass_score([c.kind for c in checks]) if checks else None
        results.append(ObjectOrientationResult(index, obj.label, checks, score))
        if score is not None:
            scored.append(score)

    s_orient = sum(scored) / len(scored) if scored else 1.0
    return results, s_orient


def _angle_check(
    check: str, target: str | None, yaw: float, target_deg: float, params: EvalParams, context: str
) -> SubCheckVerdict:
    delta = angle_delta(yaw, target_deg)
    if delta <= params.soft_angle:
        kind = PASS
        detail = f"delta {delta:.1f} deg <= {params.soft_angle:.0f} deg ({context})"
    elif delta <= params.hard_angle:
        kind = SOFT_FAIL
        detail = f"delta {delta:.1f} deg <= hard {params.hard_angle:.0f} deg ({context})"
    else:
        kind = HARD_FAIL
        detail = f"delta {delta:.1f} deg > hard {params.hard_angle:.0f} deg ({context})"
    return SubCheckVerdict(check, target, target_deg, delta, kind, detail)


def verify_overlap(
    layout: SceneLayout, params: EvalParams | None = None
) -> tuple[list[OverlapVerdict], list[OverlapVerdict], float, float, float]:
    """Pairwise collision checks over all instance pairs.

    The proximity check uses the axis-aligned hull of each rotated box; the
    true check runs the separating-axis kernel on the boxes themselves. A
    pair fails a check when its overlap amount exceeds the tolerance.
    """
    params = params or EvalParams()
    obbs = [obj.obb() for obj in layout.objects]
    hulls = [obb_aabb(o) for o in obbs]

    aabb_verdicts: list[OverlapVerdict] = []
    obb_verdicts: list[OverlapVerdict] = []
    aabb_pass = 0
    obb_pass = 0
    pairs = 0
    for i, j in itertools.combinations(range(len(layout.objects)), 2):
        pairs += 1
        la, lb = layout.objects[i].label, layout.objects[j].label

        amount = aabb_overlap_amount(hulls[i], hulls[j])
        ok = amount <= params.overlap_tolerance
        aabb_pass += ok
        aabb_verdicts.append(OverlapVerdict(
            i, la, j, lb, amount, PASS if ok else FAIL,
            f"AABB overlap {amount:.2f} m {'<=' if ok else '>'} tolerance {params.overlap_tolerance:.2f} m",
        ))

        amount = sat_penetration(obbs[i], obbs[j])
        ok = amount <= params.overlap_tolerance
        obb_pass += ok
        obb_verdicts.append(OverlapVerdict(
            i, la, j, lb, amount, PASS if ok else FAIL,
            f"OBB penetration {amount:.2f} m {'<=' if ok else '>'} tolerance {params.overlap_tolerance:.2f} m",
        ))

    s_prox = aabb_pass / pairs if pairs else 1.0
    s_true = obb_pass / pairs if pairs else 1.0
    return aabb_verdicts, obb_verdicts, s_prox, s_true, overlap_score(s_prox, s_true)


def overlap_score(s_prox: float, s_true: float) -> float:
    return (s_prox + s_true) / 2.0


def average_score(s_semantic: float, s_orient: float, s_overlap: float) -> float:
    return (s_semantic + s_orient + s_overlap) / 3.0


def evaluate(
    layout: SceneLayout,
    condition: PlacementCondition | None,
    ontology: Ontology,
    params: EvalParams | None = None,
    floor_polygon: list[tuple[float, float]] | None = None,
) -> AssessmentReport:
    """Run all verifiers and assemble the full assessment report.

    Without a condition the completeness check is skipped and the semantic
    score reweights over scale and co-occurrence.
    """
    params = params or EvalParams()
    scale_results, s_scale = verify_scale(layout, ontology, params)
    cooccur_results, s_cooccur = verify_cooccurrence(layout, ontology, params)
    if condition is not None:
        completeness, s_complete = verify_completeness(layout, condition)
    else:
        completeness, s_complete = None, None
    s_semantic = semantic_score(s_scale, s_cooccur, s_complete, params)
    orientation_results, s_orient = verify_orientation(layout, ontology, params, floor_polygon)
    aabb_verdicts, obb_verdicts, s_prox, s_true, s_overlap = verify_overlap(layout, params)

    support_info: dict[str, dict[str, float]] = {}
    for obj in layout.objects:
        entry = ontology.entry(obj.label)
        key = canon(obj.label)
        if entry is not None and entry.support_surfaces and key not in support_info:
            support_info[key] = {s: share.fraction for s, share in sorted(entry.support_surfaces.items())}

    scores = Scores(
        scale=s_scale,
        cooccur=s_cooccur,
        complete=s_complete,
        semantic=s_semantic,
        orientation=s_orient,
        prox_overlap=s_prox,
        true_overlap=s_true,
        overlap=s_overlap,
        average=average_score(s_semantic, s_orient, s_overlap),
    )
    return AssessmentReport(
        scores=scores,
        scale=scale_results,
        cooccurrence=cooccur_results,
        completeness=completeness,
        orientation=orientation_results,
        overlap_aabb=aabb_verdicts,
        overlap_obb=obb_verdicts,
        support_info=support_info,
    )
