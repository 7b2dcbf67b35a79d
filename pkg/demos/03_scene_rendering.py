"""Camera stand-in: silhouette rendering, patch sampling, PGM export.

Run:  python demos/03_scene_rendering.py
Writes PGM images into demos/out/.
"""

import math
import os

import numpy as np

from advgrasp.config import resolve_object
from advgrasp.geometry import Pose2
from advgrasp.imaging import (ImagingConfig, extract_patch, pixel_to_world,
                              render_scene, sample_patch_centers, to_pgm)

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

cfg = ImagingConfig()
print(f"Frame: {cfg.width}x{cfg.height} px at {1000*cfg.meters_per_pixel:.0f} mm/px "
      f"({100*cfg.width*cfg.meters_per_pixel:.0f} cm workspace)\n")

for name, pose in (("stick", Pose2()),
                   ("t_shape", Pose2(0.02, -0.01, math.radians(40))),
                   ("round_nut", Pose2(-0.04, 0.03, 0.0))):
    obj = resolve_object(name)
    img = render_scene(obj, pose, cfg)
    path = os.path.join(OUT, f"scene_{name}.pgm")
    with open(path, "wb") as f:
        f.write(to_pgm(img.pixels))
    print(f"{name:10s} lit pixels: {int(img.pixels.sum()):4d}  -> {path}")

print("\nAscii preview (stick, downsampled 2x)")
print("=====================================")
img = render_scene(resolve_object("stick"), Pose2(), cfg)
small = img.pixels[::2, ::2]
for row in small:
    print("".join("#" if v > 0 else "." for v in row))

print("\nPatch sampling (every window overlaps the object)")
rng = np.random.default_rng(0)
centers = sample_patch_centers(img, 8, rng)
for (i, j) in centers:
    patch = extract_patch(img, (i, j), cfg.patch_size)
    x, y = pixel_to_world(img, (i, j))
    print(f"  center px ({i:2d},{j:2d}) = world ({100*x:+5.1f}, {100*y:+5.1f}) cm, "
          f"object pixels in window: {int(patch.pixels.sum())}")
