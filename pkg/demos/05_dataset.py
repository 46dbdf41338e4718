"""
Dataset manifests: schema, validation, and the standard evaluation shape
========================================================================

Evaluation sets are described by a JSON manifest (no video content is
bundled). The standard shape is 31 videos in 8/36/90-frame buckets
(10/15/6 videos), each with 4 style and 2 shape prompts: 186 text-video
pairs in total.
"""

import json
from pathlib import Path

from rave import load_manifest, save_manifest, summarize
from rave.dataset import manifest_from_dict

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

style_prompts = [
    {"text": "a red jacket instead of the blue one", "edit_type": "local"},
    {"text": "watercolor style with visible brushstrokes", "edit_type": "visual-style"},
    {"text": "the same scene on a beach at sunset", "edit_type": "background"},
    {"text": "rendered as a charcoal drawing", "edit_type": "visual-style"},
]
shape_prompts = [
    {"text": "the wolf is now a cat", "edit_type": "shape-attribute"},
    {"text": "the car is now a tractor", "edit_type": "extreme-shape"},
]

entries = []
i = 0
for frame_count, count in ((8, 10), (36, 15), (90, 6)):
    for _ in range(count):
        entries.append(
            {
                "id": f"clip-{i:03d}",
                "source": f"videos/clip-{i:03d}",
                "frame_count": frame_count,
                "resolution": [512, 320] if frame_count != 90 else [512, 512],
                "motion_tags": ["exo"] if i % 2 == 0 else ["ego", "occlusion"],
                "prompts": style_prompts + shape_prompts,
            }
        )
        i += 1

manifest = manifest_from_dict({"name": "standard-eval", "version": "1", "entries": entries})
path = OUT / "standard_eval_manifest.json"
save_manifest(manifest, path)
print(f"wrote {path}")

# loading re-validates; summarize reports the bucket arithmetic
summary = summarize(load_manifest(path))
print(json.dumps(summary.to_dict(), indent=2))
assert summary.pair_count == 31 * 6 == 186
