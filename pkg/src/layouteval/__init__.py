"""Symbolic evaluation of 2D indoor floor-plan layouts.

Core pieces: a scene/ontology data model, geometry kernels, five layout
verifiers with score aggregation, an ontology builder over normalized scene
corpora, a threshold-sweep tuner, and an iterative refinement testbed.
"""

from .ontology import Ontology, load_ontology, save_ontology
from .scene import (
    ObjectInstance,
    PlacementCondition,
    SceneLayout,
    load_condition,
    load_layout,
    save_layout,
)
from .verifiers import AssessmentReport, EvalParams, evaluate

__version__ = "0.1.0"

__all__ = [
    "AssessmentReport",
    "EvalParams",
    "ObjectInstance",
    "Ontology",
    "PlacementCondition",
    "SceneLayout",
    "evaluate",
    "load_condition",
    "load_layout",
    "load_ontology",
    "save_layout",
    "save_ontology",
    "__version__",
]
