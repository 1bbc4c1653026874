"""Rigid structure and motion recovery from point correspondences."""

from ._core import (
    RigidError,
    Body,
    Pose,
    Observation,
    Scene,
    OrthoSolution,
    PerspSolution,
    Family,
    dof_balance,
    reference_table,
    generate,
    project_orthogonal,
    project_perspective,
    shape_distance,
    procrustes_align,
    mirror_body,
    recover_orthogonal,
    solve_five_point,
    trace_ambiguity_family,
    anchor_theta1,
    dump_scene,
    parse_scene,
    run_cli,
    __version__,
)

__all__ = [
    "RigidError",
    "Body",
    "Pose",
    "Observation",
    "Scene",
    "OrthoSolution",
    "PerspSolution",
    "Family",
    "dof_balance",
    "reference_table",
    "generate",
    "project_orthogonal",
    "project_perspective",
    "shape_distance",
    "procrustes_align",
    "mirror_body",
    "recover_orthogonal",
    "solve_five_point",
    "trace_ambiguity_family",
    "anchor_theta1",
    "dump_scene",
    "parse_scene",
    "run_cli",
]
