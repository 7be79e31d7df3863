"""
Defocus and motion kernels
==========================

Builds the two kernel families and writes them side by side as an image.
Motion kernels go through three steps: a horizontal line, a rotation and a
smooth elastic warp of the kernel grid.
"""

import sys

import numpy as np

from blursynth.blurkernel import (
    elastic_deform_kernel,
    gaussian_kernel,
    linear_motion_kernel,
    random_displacement_field,
    rotate_kernel,
)
from blursynth.imagecore import ensure_dir, save_map

out = ensure_dir(sys.argv[1] if len(sys.argv) > 1 else "demo_output/kernels")
rng = np.random.default_rng(0)

# Defocus: sampled Gaussians truncated at three standard deviations.
for sigma in (1.5, 3.0):
    K = gaussian_kernel(sigma)
    print(f"gaussian sigma={sigma}: {K.shape[0]}x{K.shape[0]}, centre {K[K.shape[0] // 2, K.shape[0] // 2]:.4f}")
    save_map(K / K.max(), out / f"gaussian_{sigma}.png", bits=8)

# Motion: a 21 px line, padded so the warp has room, rotated by 30 degrees.
m, size = 21, 27
line = linear_motion_kernel(m, size=size)
rotated = rotate_kernel(line, 30.0)

# A smooth random field bends the straight trail into a curve.
field = random_displacement_field(size, amplitude=3.0, smoothness=m / 4, rng=rng)
curved = elastic_deform_kernel(rotated, field)
print(f"motion m={m}: mass {curved.sum():.12f}, nonzero taps {np.count_nonzero(curved)}")

strip = np.concatenate([k / k.max() for k in (line, rotated, curved)], axis=1)
save_map(np.kron(strip, np.ones((8, 8))), out / "motion_steps.png", bits=8)
print(f"wrote {out}")
