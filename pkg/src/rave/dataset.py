"""Manifest schema, loader, and validator for text-video evaluation sets.

A manifest is a JSON document describing videos and their edit prompts;
no video content is bundled. Schema:

    {
      "name": str,
      "version": str,
      "entries": [
        {
          "id": str,                       # unique across the manifest
          "source": str,                   # locator of the frame directory / clip
          "frame_count": int,              # >= 1; 8/36/90 are the standard buckets
          "resolution": [width, height],
          "motion_tags": [str, ...],       # subset of MOTION_TAGS
          "prompts": [
            {"text": str, "edit_type": str}   # edit_type from EDIT_TYPES
          ]
        }
      ]
    }

Validation collects every violation (with JSON-pointer paths) before
failing. Frame counts outside the standard buckets are a warning, not an
error: the buckets are an evaluation choice, not a format constraint.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any

EDIT_TYPES = ("local", "visual-style", "background", "shape-attribute", "extreme-shape")
MOTION_TAGS = ("exo", "ego", "ego-exo", "occlusion", "multi-object")
LENGTH_BUCKETS = (8, 36, 90)


@dataclass(frozen=True)
class PromptEntry:
    text: str
    edit_type: str


@dataclass(frozen=True)
class VideoEntry:
    id: str
    source: str
    frame_count: int
    resolution: tuple[int, int]
    motion_tags: tuple[str, ...]
    prompts: tuple[PromptEntry, ...]


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    version: str
    entries: tuple[VideoEntry, ...]


class ManifestValidationError(ValueError):
    """Raised with the complete list of (json_pointer, message) violations."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        super().__init__(
            "manifest validation failed:\n"
            + "\n".join(f"  {pointer}: {message}" for pointer, message in violations)
        )


def _check_str(value: Any, pointer: str, violations: list, allow_empty: bool = False) -> str:
    if not isinstance(value, str) or (not allow_empty and not value):
        violations.append((pointer, "expected a non-empty string"))
        return ""
    return value


def manifest_from_dict(data: dict[str, Any]) -> DatasetManifest:
    """Build a validated manifest, collecting every schema violation."""
    violations: list[tuple[str, str]] = []
    if not isinstance(data, dict):
        raise ManifestValidationError([("", "manifest must be a JSON object")])

    name = _check_str(data.get("name"), "/name", violations)
    version = _check_str(data.get("version"), "/version", violations)
    raw_entries = data.get("entries")
    if not isinstance(raw_entries, list):
        violations.append(("/entries", "expected a list of video entries"))
        raw_entries = []

    entries: list[VideoEntry] = []
    id_locations: dict[str, list[str]] = {}
    for i, raw in enumerate(raw_entries):
        base = f"/entries/{i}"
        if not isinstance(raw, dict):
            violations.append((base, "expected an object"))
            continue

        entry_id = _check_str(raw.get("id"), f"{base}/id", violations)
        if entry_id:
            id_locations.setdefault(entry_id, []).append(base)
        source = _check_str(raw.get("source"), f"{base}/source", violations)

        frame_count = raw.get("frame_count")
        if not isinstance(frame_count, int) or isinstance(frame_count, bool) or frame_count < 1:
            violations.append((f"{base}/frame_count", "expected an integer >= 1"))
            frame_count = 1
        elif frame_count not in LENGTH_BUCKETS:
            warnings.warn(
                f"{base}/frame_count: {frame_count} is outside the standard "
                f"length buckets {LENGTH_BUCKETS}",
                stacklevel=2,
            )

        resolution = raw.get("resolution")
        if (
            not isinstance(resolution, (list, tuple))
            or len(resolution) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in resolution)
        ):
            violations.append((f"{base}/resolution", "expected [width, height] positive integers"))
            resolution = (0, 0)

        motion_tags = raw.get("motion_tags", [])
        if not isinstance(motion_tags, list):
            violations.append((f"{base}/motion_tags", "expected a list of motion tags"))
            motion_tags = []
        for j, tag in enumerate(motion_tags):
            if tag not in MOTION_TAGS:
                violations.append(
                    (f"{base}/motion_tags/{j}", f"unknown motion tag {tag!r}; allowed: {MOTION_TAGS}")
                )

        raw_prompts = raw.get("prompts")
        prompts: list[PromptEntry] = []
        if not isinstance(raw_prompts, list) or not raw_prompts:
            violations.append((f"{base}/prompts", "expected a non-empty list of prompts"))
        else:
            for j, rp in enumerate(raw_prompts):
                ptr = f"{base}/prompts/{j}"
                if not isinstance(rp, dict):
                    violations.append((ptr, "expected an object"))
                    continue
                text = _check_str(rp.get("text"), f"{ptr}/text", violations)
                edit_type = rp.get("edit_type")
                if edit_type not in EDIT_TYPES:
                    violations.append(
                        (f"{ptr}/edit_type", f"unknown edit_type {edit_type!r}; allowed: {EDIT_TYPES}")
                    )
                    edit_type = EDIT_TYPES[0]
                prompts.append(PromptEntry(text=text, edit_type=edit_type))

        entries.append(
            VideoEntry(
                id=entry_id,
                source=source,
                frame_count=frame_count,
                resolution=tuple(resolution),
                motion_tags=tuple(motion_tags),
                prompts=tuple(prompts),
            )
        )

    for entry_id, locations in id_locations.items():
        if len(locations) > 1:
            violations.append(
                ("/entries", f"duplicate id {entry_id!r} at {' and '.join(locations)}")
            )

    if violations:
        raise ManifestValidationError(violations)
    return DatasetManifest(name=name, version=version, entries=tuple(entries))


def manifest_to_dict(manifest: DatasetManifest) -> dict[str, Any]:
    return {
        "name": manifest.name,
        "version": manifest.version,
        "entries": [
            {
                "id": e.id,
                "source": e.source,
                "frame_count": e.frame_count,
                "resolution": list(e.resolution),
                "motion_tags": list(e.motion_tags),
                "prompts": [{"text": p.text, "edit_type": p.edit_type} for p in e.prompts],
            }
            for e in manifest.entries
        ],
    }


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a manifest file; all violations are reported at once."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"manifest not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestValidationError([("", f"not valid JSON: {exc}")]) from exc
    return manifest_from_dict(data)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest_to_dict(manifest), indent=2) + "\n")


@dataclass(frozen=True)
class DatasetSummary:
    video_count: int
    pair_count: int
    by_length: dict[int, int]
    by_edit_type: dict[str, int]
    by_motion_tag: dict[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "video_count": self.video_count,
            "pair_count": self.pair_count,
            "by_length": {str(k): v for k, v in sorted(self.by_length.items())},
            "by_edit_type": dict(sorted(self.by_edit_type.items())),
            "by_motion_tag": dict(sorted(self.by_motion_tag.items())),
        }


def summarize(manifest: DatasetManifest) -> DatasetSummary:
    """Counts by length bucket, edit type, and motion tag; total text-video pairs."""
    by_length: Counter[int] = Counter()
    by_edit: Counter[str] = Counter()
    by_motion: Counter[str] = Counter()
    pairs = 0
    for entry in manifest.entries:
        by_length[entry.frame_count] += 1
        pairs += len(entry.prompts)
        for prompt in entry.prompts:
            by_edit[prompt.edit_type] += 1
        for tag in entry.motion_tags:
            by_motion[tag] += 1
    return DatasetSummary(
        video_count=len(manifest.entries),
        pair_count=pairs,
        by_length=dict(by_length),
        by_edit_type=dict(by_edit),
        by_motion_tag=dict(by_motion),
    )
