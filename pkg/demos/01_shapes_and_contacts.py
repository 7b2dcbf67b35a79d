"""Planar shape library tour: the five bundled objects and contact queries.

Run:  python demos/01_shapes_and_contacts.py
"""

import math

from advgrasp.config import BUNDLED_OBJECTS, resolve_object
from advgrasp.geometry import Pose2, area, centroid, contains, segment_contact

print("Bundled objects")
print("===============")
for name in BUNDLED_OBJECTS:
    obj = resolve_object(name)
    (x0, y0), (x1, y1) = obj.bounding_box()
    cx, cy = centroid(obj)
    print(f"  {name:10s} parts={len(obj.parts):2d}  area={area(obj)*1e4:6.2f} cm^2  "
          f"bbox={100*(x1-x0):.1f}x{100*(y1-y0):.1f} cm  "
          f"centroid=({100*cx:+.2f}, {100*cy:+.2f}) cm  mu={obj.mu}  mass={obj.mass} kg")

stick = resolve_object("stick")
print("\nContainment (stick)")
print("===================")
for p in [(0.0, 0.0), (0.0, 0.05), (0.10, 0.0), (0.11, 0.02)]:
    print(f"  point ({100*p[0]:+.0f}, {100*p[1]:+.0f}) cm inside: {contains(stick, p)}")

print("\nJaw-style sweeps (vertical ray onto the stick)")
print("==============================================")
for x in (0.0, 0.10, 0.14):
    hit = segment_contact(stick, (x, 0.08), (0.0, -1.0), 0.16)
    if hit is None:
        print(f"  sweep at x={100*x:+.0f} cm: no contact")
    else:
        px, py = hit.point
        print(f"  sweep at x={100*x:+.0f} cm: contact ({100*px:+.2f}, {100*py:+.2f}) cm, "
              f"normal ({hit.normal[0]:+.2f}, {hit.normal[1]:+.2f})")

print("\nPoses compose with queries")
print("==========================")
pose = Pose2(0.03, -0.02, math.radians(30))
moved = stick.transformed(pose)
print(f"  stick rotated 30 deg and shifted: centroid "
      f"({100*centroid(moved)[0]:+.2f}, {100*centroid(moved)[1]:+.2f}) cm")
print(f"  world point at the moved centroid inside: {contains(moved, centroid(moved))}")
