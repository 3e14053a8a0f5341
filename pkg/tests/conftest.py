"""Shared fixtures: a hand-built ontology and randomized scene generators."""

from __future__ import annotations

import random

import pytest

from layouteval.ontology import (
    CategoryEntry,
    CooccurEdge,
    DimStats,
    GroupShare,
    Ontology,
    OrientationStats,
    PairRelationStats,
    RelationStats,
)
from layouteval.scene import (
    MeshRef,
    ObjectInstance,
    PlacementCondition,
    Rect,
    RequiredObject,
    SceneLayout,
)


def make_dim(p5: float, p95: float, n: int = 20) -> DimStats:
    span = p95 - p5
    return DimStats(
        p5=p5, p25=p5 + 0.25 * span, median=p5 + 0.5 * span, p75=p5 + 0.75 * span, p95=p95,
        mean=p5 + 0.5 * span, std=span / 4.0, n=n,
    )


def _edge(p: float, count: int = 10, npmi: float = 0.4) -> CooccurEdge:
    return CooccurEdge(count=count, p_b_given_a=p, npmi=npmi)


def build_fixture_ontology() -> Ontology:
    categories = {
        "chair": CategoryEntry(
            dimension={"width": make_dim(0.4, 0.6), "height": make_dim(0.4, 0.6), "depth": make_dim(0.7, 1.0)},
            room_association={"livingroom": GroupShare(12, 0.6), "bedroom": GroupShare(8, 0.4)},
            cooccurrence={"table": _edge(0.9, 30, 0.6), "lamp": _edge(0.3, 5, 0.1)},
            orientation=OrientationStats(
                back_to_wall=RelationStats(0.2, 80.0, 40),
                faces_center=RelationStats(0.1, 90.0, 40),
                faces_pair={"table": PairRelationStats(0.8, 30.0, 1.2, 40)},
            ),
        ),
        "table": CategoryEntry(
            dimension={"width": make_dim(0.8, 2.0), "height": make_dim(0.6, 1.2), "depth": make_dim(0.6, 0.9)},
            cooccurrence={"chair": _edge(0.8, 30, 0.6), "lamp": _edge(0.25, 5, 0.05)},
        ),
        "sofa": CategoryEntry(
            dimension={"width": make_dim(1.4, 2.6), "height": make_dim(0.7, 1.1), "depth": make_dim(0.6, 0.9)},
            orientation=OrientationStats(
                back_to_wall=RelationStats(0.9, 20.0, 60),
                faces_center=RelationStats(0.7, 40.0, 60),
            ),
        ),
        "bed": CategoryEntry(
            dimension={"width": make_dim(1.4, 2.2), "height": make_dim(1.9, 2.2), "depth": make_dim(0.4, 0.7)},
            cooccurrence={"nightstand": _edge(0.75, 20, 0.7)},
            orientation=OrientationStats(back_to_wall=RelationStats(0.95, 10.0, 80)),
        ),
        "nightstand": CategoryEntry(
            dimension={"width": make_dim(0.35, 0.6), "height": make_dim(0.35, 0.6), "depth": make_dim(0.4, 0.7)},
            cooccurrence={"bed": _edge(0.9, 20, 0.7)},
            support_surfaces={"floor": GroupShare(20, 1.0)},
        ),
        "lamp": CategoryEntry(
            dimension={"width": make_dim(0.15, 0.45), "height": make_dim(0.15, 0.45), "depth": make_dim(1.2, 1.8)},
            cooccurrence={"table": _edge(0.3, 5, 0.1), "chair": _edge(0.3, 5, 0.1)},
            support_surfaces={"table": GroupShare(8, 0.4), "nightstand": GroupShare(6, 0.3), "floor": GroupShare(6, 0.3)},
        ),
        "rug": CategoryEntry(
            dimension={"width": make_dim(1.0, 3.0), "height": make_dim(0.7, 2.4), "depth": make_dim(0.005, 0.02)},
        ),
        # Anchored pairs spanning the co-occurrence verdict table.
        "desk": CategoryEntry(
            dimension={"width": make_dim(1.0, 1.8), "height": make_dim(0.5, 0.9), "depth": make_dim(0.7, 0.8)},
            cooccurrence={
                "monitor": _edge(0.8, 25, 0.7),
                "shelf": _edge(0.3, 12, 0.3),
                "plant": _edge(0.15, 6, 0.05),
                "bathtub": _edge(0.005, 1, -0.8),
            },
        ),
        "monitor": CategoryEntry(
            dimension={"width": make_dim(0.4, 0.8), "height": make_dim(0.1, 0.3), "depth": make_dim(0.3, 0.6)},
        ),
        "shelf": CategoryEntry(
            dimension={"width": make_dim(0.6, 1.2), "height": make_dim(0.25, 0.45), "depth": make_dim(1.2, 2.2)},
        ),
        "plant": CategoryEntry(
            dimension={"width": make_dim(0.2, 0.6), "height": make_dim(0.2, 0.6), "depth": make_dim(0.3, 1.5)},
        ),
        "bathtub": CategoryEntry(
            dimension={"width": make_dim(1.5, 1.9), "height": make_dim(0.7, 0.9), "depth": make_dim(0.5, 0.65)},
        ),
        "wardrobe": CategoryEntry(
            dimension={"width": make_dim(0.9, 2.0), "height": make_dim(0.5, 0.8), "depth": make_dim(1.8, 2.4)},
            cooccurrence={"mirror": _edge(0.3, 4, 0.2)},
            cooccurrence_by_room={"bedroom": {"mirror": _edge(0.6, 3, 0.5)}},
        ),
        "mirror": CategoryEntry(
            dimension={"width": make_dim(0.4, 0.9), "height": make_dim(0.05, 0.15), "depth": make_dim(1.0, 1.8)},
        ),
    }
    return Ontology(categories=categories, meta={"source": "test fixture"})


@pytest.fixture(scope="session")
def fixture_ontology() -> Ontology:
    return build_fixture_ontology()


SCENE_LABELS = [
    "chair", "table", "sofa", "bed", "nightstand", "lamp",
    "desk", "monitor", "shelf", "plant", "rug", "mystery",
]


def random_layout(rng: random.Random, max_objects: int = 6) -> SceneLayout:
    """Random micro-scene over the fixture categories (labels may be unknown)."""
    x_min = rng.uniform(-5.0, 0.0)
    y_min = rng.uniform(-5.0, 0.0)
    rect = Rect(x_min, y_min, x_min + rng.uniform(4.0, 12.0), y_min + rng.uniform(4.0, 12.0))
    objects = []
    for _ in range(rng.randint(0, max_objects)):
        mesh = None
        if rng.random() < 0.3:
            mesh = MeshRef(rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0))
        objects.append(ObjectInstance(
            label=rng.choice(SCENE_LABELS),
            cx=rng.uniform(rect.x_min - 1.0, rect.x_max + 1.0),
            cy=rng.uniform(rect.y_min - 1.0, rect.y_max + 1.0),
            w=rng.uniform(0.1, 3.0),
            h=rng.uniform(0.1, 3.0),
            yaw_deg=rng.uniform(0.0, 360.0),
            mesh_ref=mesh,
        ))
    room = rng.choice(["", "bedroom", "livingroom"])
    return SceneLayout(description="random micro-scene", room_type=room, range=rect, objects=objects)


def random_condition(rng: random.Random, layout: SceneLayout) -> PlacementCondition | None:
    if rng.random() < 0.5:
        return None
    labels = rng.sample(SCENE_LABELS, rng.randint(1, 3))
    required = [RequiredObject(label, rng.randint(1, 2)) for label in labels]
    return PlacementCondition(description="random condition", range=layout.range, required_objects=required)
