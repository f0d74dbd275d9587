"""Keyframe animation of a bending bar, two ways.

Three keyframes (straight, bent one way, bent the other way) are joined by a
discrete cardinal spline and, separately, refined twice with the binary
four-point scheme.  Both pass exactly through the keyframes; the script
checks that and writes the frames to ``demo_out/``.

    python demos/keyframe_animation.py
"""
import os

import numpy as np

from geoshell import shapes
from geoshell.curves import CardinalSpec, CardinalSpline
from geoshell.energy import DiscreteShells
from geoshell.mesh import write_frames
from geoshell.subdivision import SchemeSpec, subdivide_curve

backend = DiscreteShells()
keys = [shapes.bent_bar(0.0), shapes.bent_bar(0.9), shapes.bent_bar(-0.6)]

spline = CardinalSpline(CardinalSpec(keys, 0.5, 2, backend))
ts = np.linspace(0.0, 2.0, 9)
frames = [spline(t) for t in ts]
print("spline passes through keyframes:",
      all(np.array_equal(spline(j).positions, keys[j].positions) for j in range(3)))
write_frames(os.path.join("demo_out", "cardinal"), frames)

levels = subdivide_curve(SchemeSpec("binary4", keys, 2, "clampedEndpoints", 2, backend))
for lv in levels:
    print(f"level {lv.level}: {len(lv)} shells")
    write_frames(os.path.join("demo_out", "binary4", f"level_{lv.level}"), lv.shells)
print("coarse shells kept:",
      all(levels[2].shells[4 * k] is s for k, s in enumerate(levels[0].shells)))
