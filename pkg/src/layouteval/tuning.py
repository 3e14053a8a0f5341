"""Threshold sweep and selection harness.

A grid names candidate values per parameter; the sweep scores every reference
scene under every valid combination and counts, per combination, the scenes
where it attains the per-scene maximum score (ties credit all tied
combinations). Selection then restricts to a central leniency band and picks
the best-counting combination inside it.
"""

from __future__ import annotations

import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .ontology import Ontology
from .scene import PlacementCondition, SceneLayout
from .verifiers import EvalParams, evaluate

log = logging.getLogger(__name__)

SCORE_TIE_EPS = 1e-12

# Direction in which raising the value makes the evaluator more lenient.
# Fields not listed are treated as lenient-up.
LENIENT_DOWN = frozenset({"cooccur_thresh", "plausibility_floor", "applicability_fraction"})
WEAK_PAIR_LENIENCY = {"fail": 0, "exclude": 1, "pass": 2}

# Key order for leniency ranking: primary thresholds first (the order the
# combination tables list them in), anything else alphabetical after.
FIELD_PRIORITY = (
    "soft_angle", "hard_angle", "cooccur_thresh", "func_thresh", "plausibility_floor",
    "func_dist", "weak_dist", "overlap_tolerance", "scale_hard_factor", "scale_soft_eps",
    "applicability_fraction", "faces_pair_radius", "weak_pair_policy",
)


def ordered_fields(names) -> list[str]:
    rank = {name: i for i, name in enumerate(FIELD_PRIORITY)}
    return sorted(names, key=lambda n: (rank.get(n, len(FIELD_PRIORITY)), n))

# Parameters with a proven per-scene monotone-leniency property; the
# most-lenient-combo sanity check only applies to grids over these.
MONOTONE_FIELDS = frozenset(
    {"soft_angle", "hard_angle", "overlap_tolerance", "scale_hard_factor", "scale_soft_eps"}
)


@dataclass
class ParamGrid:
    axes: dict[str, list]

    def __post_init__(self):
        if not self.axes:
            raise ValidationError("axes", "grid must name at least one parameter")
        for name, values in self.axes.items():
            if not isinstance(values, list) or not values:
                raise ValidationError(name, "expected a non-empty list of candidate values")

    @classmethod
    def from_dict(cls, data: dict) -> "ParamGrid":
        return cls(axes={str(k): list(v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> "ParamGrid":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def fields(self) -> list[str]:
        return ordered_fields(self.axes)


def grid_combos(
    grid: ParamGrid, base: EvalParams | None = None
) -> tuple[list[dict], list[tuple[dict, str]]]:
    """Cartesian combinations as overlay dicts; invalid ones skipped and logged."""
    base = base or EvalParams()
    names = grid.fields()
    combos: list[dict] = []
    skipped: list[tuple[dict, str]] = []
    for values in itertools.product(*(grid.axes[name] for name in names)):
        combo = dict(zip(names, values))
        try:
            base.with_overrides(**combo)
        except (ValidationError, TypeError) as exc:
            log.info("skipping invalid combo %s: %s", combo, exc)
            skipped.append((combo, str(exc)))
            continue
        combos.append(combo)
    return combos, skipped


@dataclass
class ComboResult:
    combo: dict
    count: int = 0
    mean_score: float = 0.0
    evaluated: int = 0


@dataclass
class SweepResult:
    combos: list[ComboResult]
    scenes: int
    mode: str
    skipped_combos: list[tuple[dict, str]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    sanity_most_lenient_always_max: bool | None = None

    def fields(self) -> list[str]:
        return ordered_fields(self.combos[0].combo) if self.combos else []

    def csv_rows(self) -> tuple[list[str], list[list]]:
        names = self.fields()
        header = names + ["count", "mean_score"]
        rows = [
            [r.combo[n] for n in names] + [r.count, f"{r.mean_score:.6f}"]
            for r in self.combos
        ]
        return header, rows


def _score_scene(args) -> list[float | None]:
    layout, condition, ontology, params_list = args
    scores: list[float | None] = []
    for params in params_list:
        try:
            scores.append(evaluate(layout, condition, ontology, params).scores.average)
        except Exception as exc:  # recorded by the caller, sweep continues
            scores.append(None)
            log.warning("evaluation failed: %s", exc)
    return scores


def sweep(
    scenes: list[tuple[SceneLayout, PlacementCondition | None]],
    ontology: Ontology,
    grid: ParamGrid,
    base_params: EvalParams | None = None,
    mode: str = "argmax",
    jobs: int = 1,
) -> SweepResult:
    """Evaluate every scene under every valid combination.

    ``mode="argmax"`` credits each combination attaining the per-scene
    maximum (ties credit all); ``mode="perfect"`` credits combinations
    scoring exactly 1.0 on the scene.
    """
    if mode not in ("argmax", "perfect"):
        raise ValidationError("mode", f"expected 'argmax' or 'perfect', got {mode!r}")
    if not scenes:
        raise ValidationError("scenes", "need at least one reference scene")
    base = base_params or EvalParams()
    combos, skipped = grid_combos(grid, base)
    if len(combos) < 2:
        raise ValidationError("grid", f"need at least 2 valid combinations, got {len(combos)}")
    params_list = [base.with_overrides(**combo) for combo in combos]

    tasks = [(layout, condition, ontology, params_list) for layout, condition in scenes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            all_scores = list(pool.map(_score_scene, tasks))
    else:
        all_scores = [_score_scene(task) for task in tasks]

    results = [ComboResult(combo=combo) for combo in combos]
    errors: list[str] = []
    for scene_idx, scores in enumerate(all_scores):
        valid = [s for s in scores if s is not None]
        for combo_idx, score in enumerate(scores):
            if score is None:
                errors.append(f"scene {scene_idx}, combo {combo_idx}: evaluation failed")
                continue
            results[combo_idx].evaluated += 1
            results[combo_idx].mean_score += score
        if not valid:
            continue
        best = max(valid)
        for combo_idx, score in enumerate(scores):
            if score is None:
                continue
            credited = (abs(score - best) <= SCORE_TIE_EPS) if mode == "argmax" else (score >= 1.0 - SCORE_TIE_EPS)
            if credited:
                results[combo_idx].count += 1

    for r in results:
        r.mean_score = r.mean_score / r.evaluated if r.evaluated else 0.0

    result = SweepResult(
        combos=results, scenes=len(scenes), mode=mode, skipped_combos=skipped, errors=errors
    )
    result.sanity_most_lenient_always_max = _check_most_lenient(result)
    return result


def leniency_key(combo: dict) -> tuple:
    """Signed leniency values in FIELD_PRIORITY order; larger = more lenient."""
    key = []
    for name in ordered_fields(combo):
        value = combo[name]
        if name == "weak_pair_policy":
            key.append(WEAK_PAIR_LENIENCY.get(value, 0))
        elif name in LENIENT_DOWN:
            key.append(-float(value))
        else:
            key.append(float(value))
    return tuple(key)


def _check_most_lenient(result: SweepResult) -> bool | None:
    """Cross-module sanity: under nested relaxations the most lenient
    combination must tie the per-scene maximum everywhere it evaluated."""
    if not result.combos or any(f not in MONOTONE_FIELDS for f in result.fields()):
        return None
    keys = [leniency_key(r.combo) for r in result.combos]
    top_idx = max(range(len(keys)), key=lambda i: keys[i])
    top = keys[top_idx]
    if any(i != top_idx and not all(a >= b for a, b in zip(top, keys[i])) for i in range(len(keys))):
        return None  # no combination dominates every other
    if result.mode != "argmax":
        return None
    top_result = result.combos[top_idx]
    return top_result.count == top_result.evaluated


def select(
    result: SweepResult, band: tuple[float, float] = (0.30, 0.70)
) -> dict:
    """Pick the best combination inside the central leniency band.

    Combinations are ordered least-to-most lenient; a combination is in-band
    when its rank midpoint (i + 0.5) / n falls inside ``band``. The in-band
    combination with the highest count wins. Ties prefer hard = 2 x soft when
    the tied combinations differ only in ``hard_angle``, then the combination
    closest to the band center, then the lexicographically smallest key.
    """
    lo, hi = band
    if not (0.0 <= lo < hi <= 1.0):
        raise ValidationError("band", f"expected 0 <= lo < hi <= 1, got {band}")
    if not result.combos:
        raise ValidationError("result", "empty sweep result")

    order = sorted(range(len(result.combos)), key=lambda i: leniency_key(result.combos[i].combo))
    n = len(order)
    in_band = [
        (idx, (rank + 0.5) / n)
        for rank, idx in enumerate(order)
        if lo <= (rank + 0.5) / n <= hi
    ]
    if not in_band:
        raise ValidationError("band", f"no combination falls inside {band}; widen the band")

    best_count = max(result.combos[idx].count for idx, _ in in_band)
    tied = [(idx, pos) for idx, pos in in_band if result.combos[idx].count == best_count]

    if len(tied) > 1:
        chosen = _prefer_double_soft(result, [idx for idx, _ in tied])
        if chosen is not None:
            return dict(result.combos[chosen].combo)
        center = (lo + hi) / 2.0
        tied.sort(key=lambda item: (abs(item[1] - center), leniency_key(result.combos[item[0]].combo)))
    return dict(result.combos[tied[0][0]].combo)


def _prefer_double_soft(result: SweepResult, tied: list[int]) -> int | None:
    combos = [result.combos[i].combo for i in tied]
    if not all("soft_angle" in c and "hard_angle" in c for c in combos):
        return None
    # Applies only when the tie spans a single soft angle (the counts are
    # invariant across the hard dimension).
    others = [{k: v for k, v in c.items() if k != "hard_angle"} for c in combos]
    if any(o != others[0] for o in others[1:]):
        return None
    for i, combo in zip(tied, combos):
        if abs(combo["hard_angle"] - 2.0 * combo["soft_angle"]) < 1e-9:
            return i
    return None
