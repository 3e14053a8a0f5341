"""Iterative layout refinement testbed.

A generator proposes layouts, a critic scores them and emits per-object
notes, and the evaluator produces a full report at every step. The loop
records the whole trajectory, stopping at the iteration budget or once the
critic's reward reaches the stop threshold.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .geometry import obb_corners, sat_penetration
from .ontology import Ontology
from .scene import ObjectInstance, PlacementCondition, Rect, SceneLayout, canon, layout_to_dict
from .verifiers import (
    AssessmentReport,
    EvalParams,
    evaluate,
    verify_completeness,
)

ISSUES = ("out_of_bounds", "missing", "extra", "overlap")


@dataclass
class CriticNote:
    label: str
    issue: str  # one of ISSUES
    with_label: str | None = None  # overlap partner
    amount_m: float | None = None  # overlap amount
    count: int = 1  # how many instances are missing/extra
    suggestion: str = ""
    index: int | None = None  # object index when the note targets an instance

    def to_dict(self) -> dict:
        return vars(self) | {}


@dataclass
class CriticFeedback:
    reward: float
    notes: list[CriticNote] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"reward": self.reward, "notes": [n.to_dict() for n in self.notes]}


@dataclass
class TrajectoryStep:
    index: int
    layout: SceneLayout | None
    feedback: CriticFeedback | None
    report: AssessmentReport | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "layout": layout_to_dict(self.layout) if self.layout else None,
            "feedback": self.feedback.to_dict() if self.feedback else None,
            "report": self.report.to_dict() if self.report else None,
            "error": self.error,
        }


@dataclass
class Trajectory:
    steps: list[TrajectoryStep] = field(default_factory=list)

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for step in self.steps:
                fh.write(json.dumps(step.to_dict(), sort_keys=True) + "\n")


Critic = Callable[[SceneLayout, PlacementCondition], CriticFeedback]


class Generator(Protocol):
    def initial(self, condition: PlacementCondition) -> SceneLayout: ...

    def revise(
        self, layout: SceneLayout, feedback: CriticFeedback, condition: PlacementCondition
    ) -> SceneLayout: ...


def _corners_inside(obj: ObjectInstance, rect: Rect) -> bool:
    return all(
        rect.x_min <= x <= rect.x_max and rect.y_min <= y <= rect.y_max
        for x, y in obb_corners(obj.obb())
    )


def heuristic_critic(
    layout: SceneLayout, condition: PlacementCondition, params: EvalParams | None = None
) -> CriticFeedback:
    """Rule-based critic over three objectives: in-boundary placement,
    inventory completeness, and box non-overlap, averaged equally.

    Every violation yields a typed per-object note with measured evidence.
    """
    params = params or EvalParams()
    notes: list[CriticNote] = []

    inside = 0
    for index, obj in enumerate(layout.objects):
        if _corners_inside(obj, layout.range):
            inside += 1
        else:
            notes.append(CriticNote(
                label=obj.label, issue="out_of_bounds", index=index,
                suggestion=f"move {obj.label} fully inside the placement range",
            ))
    in_bounds = inside / len(layout.objects) if layout.objects else 1.0

    diff, completeness = verify_completeness(layout, condition)
    for entry in diff.labels:
        if entry.missing:
            notes.append(CriticNote(
                label=entry.label, issue="missing", count=entry.missing,
                suggestion=f"place {entry.missing} more {entry.label}",
            ))
        if entry.extra:
            notes.append(CriticNote(
                label=entry.label, issue="extra", count=entry.extra,
                suggestion=f"remove {entry.extra} {entry.label}",
            ))

    obbs = [obj.obb() for obj in layout.objects]
    pairs = 0
    overlapping = 0
    for i, j in itertools.combinations(range(len(layout.objects)), 2):
        pairs += 1
        amount = sat_penetration(obbs[i], obbs[j])
        if amount > params.overlap_tolerance:
            overlapping += 1
            notes.append(CriticNote(
                label=layout.objects[i].label, issue="overlap", index=i,
                with_label=layout.objects[j].label, amount_m=amount,
                suggestion=(
                    f"separate {layout.objects[i].label} and {layout.objects[j].label} "
                    f"by at least {amount:.2f} m"
                ),
            ))
    non_overlap = (pairs - overlapping) / pairs if pairs else 1.0

    reward = (in_bounds + completeness + non_overlap) / 3.0
    return CriticFeedback(reward=reward, notes=notes)


class ScriptedFixer:
    """Deterministic generator that applies the critic's suggested fixes.

    Each revision resolves ``fixes_per_step`` notes, in an order that keeps
    the heuristic reward non-decreasing: out-of-bounds moves, then overlap
    separations, then missing placements, then extra removals. Repaired and
    new objects go to a free spot found by scanning a grid over the range.
    """

    _ORDER = {"out_of_bounds": 0, "overlap": 1, "missing": 2, "extra": 3}

    def __init__(
        self,
        initial_layout: SceneLayout | None = None,
        fixes_per_step: int = 1,
        default_extent: float = 1.0,
        grid_step: float = 0.25,
        overlap_margin: float = 0.05,
    ):
        self.initial_layout = initial_layout
        self.fixes_per_step = max(1, fixes_per_step)
        self.default_extent = default_extent
        self.grid_step = grid_step
        self.overlap_margin = overlap_margin

    def initial(self, condition: PlacementCondition) -> SceneLayout:
        if self.initial_layout is not None:
            return self.initial_layout
        # Naive row placement; later revisions clean up whatever it violates.
        objects = []
        x = condition.range.x_min + self.default_extent / 2.0
        y = condition.range.y_min + self.default_extent / 2.0
        for req in condition.required_objects:
            for _ in range(req.count):
                objects.append(ObjectInstance(req.label, x, y, self.default_extent, self.default_extent))
                x += self.default_extent / 2.0
        return SceneLayout(
            description=condition.description, room_type="", range=condition.range, objects=objects
        )

    def revise(
        self, layout: SceneLayout, feedback: CriticFeedback, condition: PlacementCondition
    ) -> SceneLayout:
        objects = list(layout.objects)
        notes = sorted(
            (n for n in feedback.notes if n.issue in self._ORDER),
            key=lambda n: (self._ORDER[n.issue], n.index if n.index is not None else -1, n.label),
        )
        removed: set[int] = set()
        for note in notes[: self.fixes_per_step]:
            if note.issue == "out_of_bounds" and note.index is not None:
                objects[note.index] = self._place_free(objects[note.index], objects, layout.range,
                                                       skip={note.index} | removed)
            elif note.issue == "overlap" and note.index is not None:
                objects[note.index] = self._place_free(objects[note.index], objects, layout.range,
                                                       skip={note.index} | removed)
            elif note.issue == "missing":
                for _ in range(note.count):
                    template = ObjectInstance(
                        note.label,
                        layout.range.x_min + self.default_extent / 2.0,
                        layout.range.y_min + self.default_extent / 2.0,
                        self.default_extent,
                        self.default_extent,
                    )
                    objects.append(self._place_free(template, objects, layout.range, skip=removed))
            elif note.issue == "extra":
                key = canon(note.label)
                doomed = [i for i, o in enumerate(objects) if canon(o.label) == key and i not in removed]
                removed.update(doomed[-note.count:])
        kept = [o for i, o in enumerate(objects) if i not in removed]
        return SceneLayout(layout.description, layout.room_type, layout.range, kept)

    def _place_free(
        self, obj: ObjectInstance, others: list[ObjectInstance], rect: Rect, skip: set[int]
    ) -> ObjectInstance:
        # Half-diagonal keeps every corner inside the range under any yaw.
        margin = math.hypot(obj.w, obj.h) / 2.0 + 1e-6
        xs = _grid_coords(rect.x_min + margin, rect.x_max - margin, self.grid_step)
        ys = _grid_coords(rect.y_min + margin, rect.y_max - margin, self.grid_step)
        obstacles = [o.obb() for i, o in enumerate(others) if i not in skip]
        for y in ys:
            for x in xs:
                candidate = ObjectInstance(obj.label, x, y, obj.w, obj.h, obj.yaw_deg, obj.mesh_ref)
                cand_obb = candidate.obb()
                if all(sat_penetration(cand_obb, other) <= self.overlap_margin for other in obstacles):
                    return candidate
        # No free spot; fall back to the range center.
        cx, cy = rect.center()
        return ObjectInstance(obj.label, cx, cy, obj.w, obj.h, obj.yaw_deg, obj.mesh_ref)


def _grid_coords(lo: float, hi: float, step: float) -> list[float]:
    if hi < lo:
        mid = (lo + hi) / 2.0
        return [mid]
    count = int(math.floor((hi - lo) / step)) + 1
    return [lo + i * step for i in range(count)]


def refine_loop(
    generator: Generator,
    critic: Critic,
    condition: PlacementCondition,
    ontology: Ontology,
    params: EvalParams | None = None,
    max_iters: int = 5,
    stop_reward: float = 1.0,
) -> Trajectory:
    """Run generate -> criticize -> revise until the reward threshold or budget.

    Step 0 is the generator's initial layout. Every step carries the critic
    feedback and a full evaluator report. Generator or critic failures are
    recorded on the failing step and end the loop gracefully.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    params = params or EvalParams()
    trajectory = Trajectory()

    layout: SceneLayout | None = None
    feedback: CriticFeedback | None = None
    for index in range(max_iters + 1):
        try:
            if index == 0:
                layout = generator.initial(condition)
            else:
                layout = generator.revise(layout, feedback, condition)
        except Exception as exc:
            trajectory.steps.append(TrajectoryStep(index, None, None, None, f"generator failed: {exc}"))
            return trajectory

        report = evaluate(layout, condition, ontology, params)
        try:
            feedback = critic(layout, condition)
        except Exception as exc:
            trajectory.steps.append(TrajectoryStep(index, layout, None, report, f"critic failed: {exc}"))
            return trajectory

        trajectory.steps.append(TrajectoryStep(index, layout, feedback, report))
        if feedback.reward >= stop_reward:
            break
    return trajectory
