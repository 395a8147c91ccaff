"""Closed-form weighted registration (Horn / Arun) and the MLE objective."""
from __future__ import annotations

import numpy as np

from .core import Pose, check_instance, weighted_centroid


def procrustes_rotation(H):
    """Rotation maximizing ``trace(R^T H)``; reflection fixed on the smallest singular direction."""
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(U @ Vt))
    return (U * np.array([1.0, 1.0, d])) @ Vt


def horn_solve(instance):
    """Global minimizer of ``sum w_i |y_i - R x_i - t|^2`` with ``w_i = 1/sigma_i^2``."""
    check_instance(instance)
    w = instance.weights
    x_bar = weighted_centroid(instance.model_points, w)
    y_bar = weighted_centroid(instance.scene_points, w)
    H = ((instance.scene_points - y_bar).T * w) @ (instance.model_points - x_bar)
    R = procrustes_rotation(H)
    return Pose(R, y_bar - R @ x_bar)


def objective_value(instance, pose):
    r = instance.scene_points - pose.apply(instance.model_points)
    return float(instance.weights @ np.sum(r**2, axis=1))
