"""
Frame grids and per-timestep shuffling
======================================

The core mechanical trick: tile per-frame latents into n x m grids so a
single-image denoiser sees many frames at once, and reshuffle which frame
lands in which grid at every timestep so all frames interact over a run.
"""

import numpy as np

from rave import (
    GridLayout,
    grid2video,
    invert_permutation,
    plan_padding,
    sample_permutation,
    video2grid,
)

# ten tiny "latents", one per frame, each tagged with its frame index
latents = {k: np.full((2, 2, 1), float(k)) for k in range(10)}

# 10 frames do not fill 3x3 grids evenly; padding replicates the last frame
layout = GridLayout(rows=3, cols=3, cell_height=2, cell_width=2)
plan = plan_padding(frame_count=10, cells=layout.cells)
print(f"K=10 frames, N={layout.cells} cells -> padded to {plan.padded_count} "
      f"({plan.pad_count} pads, each a copy of frame {plan.source_index(plan.padded_count - 1)})")

# sequential assembly: frames appear in order, pads at the tail
batch = video2grid(latents, layout, np.arange(plan.padded_count))
print("sequential assignment:")
print(batch.assignment)

# a seeded permutation scatters frames across grids
rng = np.random.default_rng(7)
perm = sample_permutation(rng, plan.padded_count, timestep=42)
shuffled = video2grid(latents, layout, perm.forward)
print("shuffled assignment (timestep 42):")
print(shuffled.assignment)

# disassembly restores every frame bit-exactly no matter the order,
# because the assignment travels with the batch
restored = grid2video(shuffled)
exact = all(np.array_equal(restored[k], latents[k]) for k in latents)
print(f"round trip bit-exact for all {len(restored)} frames: {exact}")

# the inverse permutation undoes the relabelling
inverse = invert_permutation(perm)
print(f"perm o perm^-1 == identity: {np.array_equal(perm.forward[inverse.forward], np.arange(plan.padded_count))}")
