"""Orchestration engine for compositional text-to-image generation.

Decomposes a compositional prompt into attributed objects and a scene
layout, routes generation through a tool policy, verifies attributes,
self-corrects via local editing, and accepts human feedback.  All heavy
generation models sit behind a wire protocol; deterministic mock tools
close the loop offline.
"""

__version__ = "0.1.0"

from .analysis import AttributedObject, Category, PromptAnalysis, Relation
from .layout import BBox, LayoutDiff, SceneLayout

__all__ = [
    "AttributedObject",
    "BBox",
    "Category",
    "LayoutDiff",
    "PromptAnalysis",
    "Relation",
    "__version__",
]
