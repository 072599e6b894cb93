"""Cutting-surface planning and learned force adaptation for robotic rough grinding."""

import json

from ._core import (
    CuttingSurface,
    chamfer,
    gen_workpiece,
    plan,
    resistance,
    split,
    train_policy,
    workpiece_names,
)
from ._core import run as _run


def run(method, workpiece, seed=1, model_path="", feed1=0.0, feed2=0.0):
    """Run one method on one named workpiece and return the report as a dict."""
    return json.loads(_run(method, workpiece, seed, model_path, feed1, feed2))


__all__ = [
    "CuttingSurface",
    "chamfer",
    "gen_workpiece",
    "plan",
    "resistance",
    "run",
    "split",
    "train_policy",
    "workpiece_names",
]
