"""Forward kinematics of a 6-joint revolute arm and the table it works on.

Geometry lives in a JSON file (see ``data/default_geometry.json``)::

    {
      "version": 1,
      "chain": {
        "joints": [{"axis": [x, y, z], "translation": [x, y, z]}, ...6],
        "ee_offset": [x, y, z],
        "base_pose": {"yaw": rad, "translation": [x, y, z]}
                     | {"matrix": 4x4 nested list}
      },
      "table": {
        "surface_height": m, "x_range": [lo, hi], "y_range": [lo, hi],
        "base_exclusion_radius": m, "target_height": m
      }
    }

Frame convention: joint i rotates about its axis (expressed in the frame
reached so far), then the fixed translation of joint i moves to the next
joint. The end effector sits at ``ee_offset`` in the last frame.
"""
from dataclasses import dataclass, field
from importlib import resources
import json
import math

import numpy as np

from . import kernels

N_JOINTS = 6


class KinematicsError(ValueError):
    """Invalid chain/table description or non-finite kinematic input."""


def _vec3(value, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise KinematicsError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise KinematicsError(f"{name} must be finite")
    return arr


def yaw_pose(yaw, translation=(0.0, 0.0, 0.0)):
    """4x4 rigid transform rotating by ``yaw`` about world z."""
    c, s = math.cos(yaw), math.sin(yaw)
    pose = np.eye(4)
    pose[:2, :2] = [[c, -s], [s, c]]
    pose[:3, 3] = translation
    return pose


@dataclass(frozen=True)
class KinematicChain:
    axes: np.ndarray          # (6, 3) unit rotation axes
    translations: np.ndarray  # (6, 3) fixed offsets to the next frame
    base_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    ee_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=np.float64)
        trans = np.asarray(self.translations, dtype=np.float64)
        pose = np.asarray(self.base_pose, dtype=np.float64)
        if axes.shape != (N_JOINTS, 3) or trans.shape != (N_JOINTS, 3):
            raise KinematicsError("a chain needs exactly 6 joints")
        if pose.shape != (4, 4):
            raise KinematicsError("base_pose must be a 4x4 transform")
        for name, arr in (("axes", axes), ("translations", trans), ("base_pose", pose)):
            if not np.all(np.isfinite(arr)):
                raise KinematicsError(f"{name} must be finite")
        norms = np.linalg.norm(axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise KinematicsError(f"rotation axes must have unit norm, got {norms}")
        rot = pose[:3, :3]
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9) or not np.allclose(pose[3], [0, 0, 0, 1]):
            raise KinematicsError("base_pose must be a rigid transform")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "translations", trans)
        object.__setattr__(self, "base_pose", pose)
        object.__setattr__(self, "ee_offset", _vec3(self.ee_offset, "ee_offset"))

    @property
    def total_length(self):
        return float(np.linalg.norm(self.translations, axis=1).sum() + np.linalg.norm(self.ee_offset))

    def to_dict(self):
        return {
            "joints": [{"axis": a.tolist(), "translation": t.tolist()}
                       for a, t in zip(self.axes, self.translations)],
            "ee_offset": self.ee_offset.tolist(),
            "base_pose": {"matrix": self.base_pose.tolist()},
        }

    @classmethod
    def from_dict(cls, d):
        try:
            joints = d["joints"]
            axes = [j["axis"] for j in joints]
            trans = [j["translation"] for j in joints]
            base = d.get("base_pose", {})
            if "matrix" in base:
                pose = np.asarray(base["matrix"], dtype=np.float64)
            else:
                pose = yaw_pose(float(base.get("yaw", 0.0)), base.get("translation", (0.0, 0.0, 0.0)))
            return cls(axes, trans, pose, d.get("ee_offset", (0.0, 0.0, 0.0)))
        except (KeyError, TypeError) as exc:
            raise KinematicsError(f"malformed chain description: {exc!r}") from exc


@dataclass(frozen=True)
class TableGeometry:
    surface_height: float = 0.0
    x_range: tuple = (-0.8, 0.8)
    y_range: tuple = (0.15, 0.85)
    base_exclusion_radius: float = 0.25
    target_height: float = 0.10

    def __post_init__(self):
        x0, x1 = map(float, self.x_range)
        y0, y1 = map(float, self.y_range)
        object.__setattr__(self, "x_range", (x0, x1))
        object.__setattr__(self, "y_range", (y0, y1))
        vals = (x0, x1, y0, y1, self.surface_height, self.base_exclusion_radius, self.target_height)
        if not all(math.isfinite(v) for v in vals):
            raise KinematicsError("table geometry must be finite")
        if not (x1 > x0 and y1 > y0):
            raise KinematicsError("sampling ranges must be non-degenerate")
        if self.base_exclusion_radius < 0:
            raise KinematicsError("base_exclusion_radius must be >= 0")
        if self.free_area() <= 0.0:
            raise KinematicsError("exclusion disk covers the whole sampling rectangle")

    @property
    def target_z(self):
        return self.surface_height + self.target_height

    def free_area(self, n=4096):
        """Area of the sampling rectangle outside the exclusion disk (midpoint rule)."""
        (x0, x1), (y0, y1), r = self.x_range, self.y_range, self.base_exclusion_radius
        xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
        half = np.sqrt(np.clip(r * r - xs * xs, 0.0, None))
        covered = np.clip(np.minimum(half, y1) - np.maximum(-half, y0), 0.0, None)
        return float((x1 - x0) * (y1 - y0) - covered.sum() * (x1 - x0) / n)

    def contains(self, p):
        x, y, z = p
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return (x0 <= x <= x1 and y0 <= y <= y1
                and x * x + y * y >= self.base_exclusion_radius ** 2
                and z == self.target_z)

    def to_dict(self):
        return {
            "surface_height": self.surface_height,
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "base_exclusion_radius": self.base_exclusion_radius,
            "target_height": self.target_height,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise KinematicsError(f"malformed table description: {exc}") from exc


def load_geometry(path=None):
    """Return ``(chain, table)`` from a geometry JSON file (default: bundled)."""
    if path is None:
        text = resources.files("reachbench").joinpath("data/default_geometry.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    if data.get("version", 1) != 1:
        raise KinematicsError(f"unsupported geometry version {data.get('version')}")
    return KinematicChain.from_dict(data["chain"]), TableGeometry.from_dict(data["table"])


def default_chain():
    return load_geometry()[0]


def default_table():
    return load_geometry()[1]


def _as_joint_batch(q):
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q2 = q.reshape(1, -1) if single else q
    if q2.ndim != 2 or q2.shape[1] != N_JOINTS:
        raise KinematicsError(f"joint vectors must have 6 entries, got shape {q.shape}")
    if not np.all(np.isfinite(q2)):
        raise KinematicsError("joint angles must be finite")
    return np.ascontiguousarray(q2), single


def frame_points(chain, q):
    """Positions of every frame origin and the end effector.

    Returns shape ``(8, 3)`` for one joint vector or ``(n, 8, 3)`` for a batch:
    base, the six frame origins reached after each joint, then the EE.
    """
    q2, single = _as_joint_batch(q)
    pts = kernels.fk_frames(chain.axes, chain.translations,
                            np.ascontiguousarray(chain.base_pose[:3, :3]),
                            np.ascontiguousarray(chain.base_pose[:3, 3]),
                            chain.ee_offset, q2)
    return pts[0] if single else pts


def forward_kinematics(chain, q):
    """End-effector position in world coordinates (meters)."""
    pts = frame_points(chain, q)
    return pts[..., -1, :]


def sample_target(table, rng):
    """Uniform target on the table rectangle, rejected inside the base disk."""
    (x0, x1), (y0, y1) = table.x_range, table.y_range
    r2 = table.base_exclusion_radius ** 2
    while True:
        x = rng.uniform(x0, x1)
        y = rng.uniform(y0, y1)
        if x * x + y * y >= r2:
            return np.array([x, y, table.target_z])


def distance_to_target(ee, target):
    ee = np.asarray(ee, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.sqrt(np.sum((ee - target) ** 2)))
