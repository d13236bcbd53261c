"""Synthetic top-view camera and classic mask-difference target extraction.

Images are ``(height, width, 3)`` uint8 arrays. Pixel ``(row, col)`` has its
center at continuous pixel coordinates ``(u, v) = (col, row)``; the
calibration maps those affinely onto the table plane.
"""
from dataclasses import dataclass
import math

import numpy as np

from . import kernels, kinematics
from .curriculum import EVAL_THRESHOLDS, evaluate_policy
from .environment import builtin_action_space

FLOOR = (110, 110, 110)
TABLE = (200, 200, 200)
ARM = (70, 70, 70)
BASE = (60, 60, 60)
CYLINDER = (30, 60, 220)


@dataclass(frozen=True)
class Calibration:
    """world_x = origin_x + scale_x * u, world_y = origin_y + scale_y * v."""
    scale_x: float
    scale_y: float
    origin_x: float
    origin_y: float
    z: float

    def __post_init__(self):
        if self.scale_x == 0 or self.scale_y == 0:
            raise ValueError("calibration scales must be nonzero")

    def pixel_to_world(self, u, v):
        return np.array([self.origin_x + self.scale_x * u, self.origin_y + self.scale_y * v, self.z])

    def world_to_pixel(self, p):
        return ((p[0] - self.origin_x) / self.scale_x, (p[1] - self.origin_y) / self.scale_y)


@dataclass(frozen=True)
class CameraConfig:
    width: int = 256
    height: int = 256
    x_range: tuple = (-0.9, 0.9)
    y_range: tuple = (-0.1, 0.95)
    table_margin: float = 0.05
    cylinder_radius_px: float = 6.0
    arm_half_width_px: float = 1.5
    base_radius_px: float = 10.0

    def calibration(self, z):
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        sx = (x1 - x0) / self.width
        sy = (y1 - y0) / self.height
        # row 0 looks at the far edge of the window (largest y)
        return Calibration(sx, -sy, x0 + 0.5 * sx, y1 - 0.5 * sy, z)


def _color(c):
    return np.asarray(c, dtype=np.uint8)


def render(chain, table, joints, target, cam=None):
    """Orthographic top view of table, arm and (optionally) the cylinder."""
    cam = cam or CameraConfig()
    cal = cam.calibration(table.target_z)
    img = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    img[...] = FLOOR
    m = cam.table_margin
    (tx0, tx1), (ty0, ty1) = table.x_range, table.y_range
    u0, v0 = cal.world_to_pixel((tx0 - m, ty1 + m))
    u1, v1 = cal.world_to_pixel((tx1 + m, min(ty0 - m, -m)))
    c0, c1 = max(0, int(math.ceil(u0))), min(cam.width - 1, int(math.floor(u1)))
    r0, r1 = max(0, int(math.ceil(v0))), min(cam.height - 1, int(math.floor(v1)))
    img[r0:r1 + 1, c0:c1 + 1] = TABLE

    pts = kinematics.frame_points(chain, joints)
    uv = [cal.world_to_pixel(p) for p in pts]
    arm = _color(ARM)
    for (ua, va), (ub, vb) in zip(uv[:-1], uv[1:]):
        kernels.draw_segment(img, ua, va, ub, vb, cam.arm_half_width_px, arm)
    bu, bv = cal.world_to_pixel(chain.base_pose[:3, 3])
    kernels.draw_disk(img, float(bu), float(bv), cam.base_radius_px, _color(BASE))
    if target is not None:
        cu, cv = cal.world_to_pixel(target)
        kernels.draw_disk(img, float(round(cu)), float(round(cv)), cam.cylinder_radius_px,
                          _color(CYLINDER))
    return img


def render_scene(env, cam=None, with_target=True):
    return render(env.chain, env.table, env.joints, env.target if with_target else None, cam)


def build_background_mask(images):
    """Per-pixel, per-channel mean of cylinder-free images, rounded half up."""
    images = list(images)
    if not images:
        raise ValueError("need at least one image")
    shape = images[0].shape
    for im in images:
        if im.shape != shape:
            raise ValueError(f"image dimensions differ: {im.shape} vs {shape}")
    mean = np.mean(np.stack(images).astype(np.float64), axis=0)
    return np.floor(mean + 0.5).astype(np.uint8)


def background_mask_for(chain, table, cam=None, n_images=20, rng=None, pose_space=None):
    """Mask from ``n_images`` cylinder-free renders with random arm poses."""
    rng = rng if rng is not None else np.random.default_rng(0)
    space = pose_space or builtin_action_space("A3")
    return build_background_mask(render(chain, table, space.sample(rng), None, cam)
                                 for _ in range(n_images))


def extract_target(img, mask, threshold, cal):
    """Centroid of pixels whose max-channel difference to the mask reaches
    ``threshold``, mapped to world coordinates; ``None`` if no pixel does."""
    if img.shape != mask.shape:
        raise ValueError(f"image {img.shape} and mask {mask.shape} differ in size")
    if not 0 < threshold <= 255:
        raise ValueError("threshold must lie in (0, 255]")
    count, su, sv = kernels.diff_blob_stats(img, mask, int(threshold))
    if count == 0:
        return None
    return cal.pixel_to_world(su / count, sv / count)


class ImageTargetEstimator:
    """Callable for :func:`curriculum.evaluate_policy`: render, then extract."""

    def __init__(self, chain, table, cam=None, threshold=40, mask=None, mask_images=20, seed=0):
        self.cam = cam or CameraConfig()
        self.cal = self.cam.calibration(table.target_z)
        self.threshold = threshold
        self.mask = mask if mask is not None else background_mask_for(
            chain, table, self.cam, mask_images, np.random.default_rng(seed))

    def __call__(self, env, obs):
        return extract_target(render_scene(env, self.cam), self.mask, self.threshold, self.cal)


def eval_from_images(agent, env, n_episodes, estimator=None, thresholds=EVAL_THRESHOLDS,
                     ground_truth=False):
    """Evaluate with the target position read from rendered images.

    ``ground_truth=True`` feeds the true target instead (reduces to
    :func:`curriculum.evaluate_policy`).
    """
    if ground_truth:
        return evaluate_policy(agent, env, n_episodes, thresholds,
                               target_estimator=lambda e, obs: obs.target_position)
    estimator = estimator or ImageTargetEstimator(env.chain, env.table)
    return evaluate_policy(agent, env, n_episodes, thresholds, target_estimator=estimator)


def extraction_sweep(n_scenes, seed=0, chain=None, table=None, cam=None, threshold=40):
    """Render ``n_scenes`` random targets at the home pose and extract them.

    Returns rows ``(true_x, true_y, est_x, est_y, err_x, err_y)``; failed
    extractions carry NaN estimates.
    """
    if chain is None or table is None:
        chain, table = kinematics.load_geometry()
    est = ImageTargetEstimator(chain, table, cam, threshold, seed=seed)
    rng = np.random.default_rng(seed + 1)
    home = np.zeros(6)
    rows = []
    for _ in range(n_scenes):
        p = kinematics.sample_target(table, rng)
        found = extract_target(render(chain, table, home, p, est.cam), est.mask, threshold, est.cal)
        if found is None:
            rows.append((p[0], p[1], math.nan, math.nan, math.nan, math.nan))
        else:
            rows.append((p[0], p[1], found[0], found[1], found[0] - p[0], found[1] - p[1]))
    return rows


def write_ppm(path, img):
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def encode_ppm(img):
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def decode_ppm(data):
    """Parse binary PPM (P6, maxval 255) bytes into an image array."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PPM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P6" or tokens[3] != b"255":
        raise ValueError("only binary P6 PPM with maxval 255 is supported")
    w, h = int(tokens[1]), int(tokens[2])
    body = data[pos + 1:pos + 1 + 3 * w * h]
    if len(body) != 3 * w * h:
        raise ValueError("truncated PPM pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def read_ppm(path):
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())
