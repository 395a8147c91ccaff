"""Plain-text point cloud files: ``x y z [sigma]`` per line, ``#`` comments."""
from __future__ import annotations

import numpy as np

from .core import ProblemInstance

DEFAULT_SIGMA = 0.01


def read_cloud(path):
    """Return ``(points, sigmas_or_None)``."""
    data = np.loadtxt(path, ndmin=2, comments="#")
    if data.shape[1] not in (3, 4):
        raise ValueError(f"{path}: expected 3 or 4 columns, got {data.shape[1]}")
    sig = data[:, 3].copy() if data.shape[1] == 4 else None
    return data[:, :3].copy(), sig


def write_cloud(path, points, sigmas=None):
    points = np.asarray(points, dtype=float)
    cols = points if sigmas is None else np.column_stack([points, sigmas])
    np.savetxt(path, cols, fmt="%.17g")


def load_instance(model_path, scene_path):
    """Correspondence by line index; sigmas come from whichever file carries them."""
    x, sx = read_cloud(model_path)
    y, sy = read_cloud(scene_path)
    if len(x) != len(y):
        raise ValueError(f"model has {len(x)} points but scene has {len(y)}")
    if sx is not None and sy is not None and not np.array_equal(sx, sy):
        raise ValueError("model and scene files give different sigma columns")
    sig = sx if sx is not None else sy
    if sig is None:
        sig = np.full(len(x), DEFAULT_SIGMA)
    return ProblemInstance(x, y, sig)
