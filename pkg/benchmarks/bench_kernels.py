"""Time the numba and numpy flavours of each hot kernel side by side.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from reachbench import kernels, kinematics
from reachbench._accel import HAS_NUMBA


def cases():
    rng = np.random.default_rng(0)
    chain = kinematics.default_chain()
    base_rot = np.ascontiguousarray(chain.base_pose[:3, :3])
    base_pos = np.ascontiguousarray(chain.base_pose[:3, 3])
    q256 = rng.uniform(-3, 3, size=(256, 6))
    fk_args = (chain.axes, chain.translations, base_rot, base_pos, chain.ee_offset, q256)
    yield "fk_frames[256]", "fk_frames", lambda: fk_args

    n = 70_000  # parameter count of a 12-256-256-6 network
    p, g = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    yield "adam_update[70k]", "adam_update", lambda: (p, g, m, v, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)

    img = np.zeros((256, 256, 3), dtype=np.uint8)
    color = np.array([30, 60, 220], dtype=np.uint8)
    yield "draw_disk", "draw_disk", lambda: (img, 128.0, 128.0, 6.0, color)
    yield "draw_segment", "draw_segment", lambda: (img, 10.0, 20.0, 200.0, 180.0, 1.5, color)

    a = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    b = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    yield "diff_blob_stats", "diff_blob_stats", lambda: (a, b, 40)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    flavours = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"{'kernel':<20}" + "".join(f"{f:>14}" for f in flavours) + f"{'speedup':>10}")
    for label, name, make in cases():
        times = []
        for flavour in flavours:
            fn = getattr(kernels, f"{name}_{flavour}")
            fn(*make())  # warm-up / JIT compile
            t = min(timeit.repeat(lambda: fn(*make()), number=10, repeat=args.repeat)) / 10
            times.append(t)
        speed = f"{times[0] / times[1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{label:<20}" + "".join(f"{t * 1e6:>12.1f}us" for t in times) + speed)


if __name__ == "__main__":
    main()
