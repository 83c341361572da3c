"""Pitch metadata records, injury labeling, and the manifest file format.

A pitch is labeled "injured" when it is one of the last k pitches a
pitcher threw before a disabled-list placement; everything else is
healthy. Records carry the DL linkage as an optional distance
(``pitches_before_dl``, 1 = the very last pitch) so the same manifest
supports any k.

The manifest is one JSON object per line with a fixed key order, so a
regenerated corpus is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .errors import InvalidInputError
from .video import BoundingBox

HEALTHY = "healthy"
INJURED = "injured"

INJURY_TYPES = (
    "back strain",
    "arm strain",
    "finger blister",
    "shoulder strain",
    "ucl tear",
    "intercostal strain",
    "sternoclavicular joint",
    "rotator cuff",
    "hamstring strain",
    "groin strain",
)

_MANIFEST_KEYS = (
    "pitch_id", "pitcher_id", "handedness", "game_id", "seq_index",
    "injury_event_id", "pitches_before_dl", "injury_type", "clip_ref", "bbox",
)


@dataclass(frozen=True)
class PitchRecord:
    pitch_id: str
    pitcher_id: str
    handedness: str
    game_id: str
    seq_index: int
    injury_event_id: str | None = None
    pitches_before_dl: int | None = None
    injury_type: str | None = None
    clip_ref: str = ""
    bbox: BoundingBox = BoundingBox(0, 0, 1, 1)

    def __post_init__(self) -> None:
        if self.handedness not in ("left", "right"):
            raise InvalidInputError(f"handedness must be left or right, got {self.handedness!r}")
        if self.seq_index < 0:
            raise InvalidInputError(f"seq_index must be >= 0, got {self.seq_index}")
        if self.pitches_before_dl is not None and self.pitches_before_dl < 1:
            raise InvalidInputError(f"pitches_before_dl must be >= 1, got {self.pitches_before_dl}")
        if (self.injury_event_id is None) != (self.injury_type is None):
            raise InvalidInputError(
                f"{self.pitch_id}: injury_type must be present exactly when injury_event_id is"
            )
        if (self.injury_event_id is None) != (self.pitches_before_dl is None):
            raise InvalidInputError(
                f"{self.pitch_id}: pitches_before_dl must accompany injury_event_id"
            )
        if self.injury_type is not None and self.injury_type not in INJURY_TYPES:
            raise InvalidInputError(f"unknown injury type {self.injury_type!r}")


@dataclass(frozen=True)
class LabeledPitch:
    record: PitchRecord
    label: str
    k_used: int

    @property
    def is_injured(self) -> bool:
        return self.label == INJURED


def label_pitches(records: Iterable[PitchRecord], k: int) -> list[LabeledPitch]:
    """Mark the last k pre-DL pitches injured; order is preserved.

    Pitchers with fewer than k linked pitches simply contribute them all.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    out = []
    for r in records:
        injured = r.pitches_before_dl is not None and r.pitches_before_dl <= k
        out.append(LabeledPitch(r, INJURED if injured else HEALTHY, k))
    return out


def record_to_dict(r: PitchRecord) -> dict:
    return {
        "pitch_id": r.pitch_id,
        "pitcher_id": r.pitcher_id,
        "handedness": r.handedness,
        "game_id": r.game_id,
        "seq_index": r.seq_index,
        "injury_event_id": r.injury_event_id,
        "pitches_before_dl": r.pitches_before_dl,
        "injury_type": r.injury_type,
        "clip_ref": r.clip_ref,
        "bbox": {"x": r.bbox.x, "y": r.bbox.y, "w": r.bbox.w, "h": r.bbox.h},
    }


def record_from_dict(d: dict) -> PitchRecord:
    missing = [k for k in _MANIFEST_KEYS if k not in d]
    if missing:
        raise InvalidInputError(f"manifest record missing keys: {missing}")
    b = d["bbox"]
    return PitchRecord(
        pitch_id=d["pitch_id"],
        pitcher_id=d["pitcher_id"],
        handedness=d["handedness"],
        game_id=d["game_id"],
        seq_index=int(d["seq_index"]),
        injury_event_id=d["injury_event_id"],
        pitches_before_dl=None if d["pitches_before_dl"] is None else int(d["pitches_before_dl"]),
        injury_type=d["injury_type"],
        clip_ref=d["clip_ref"],
        bbox=BoundingBox(b["x"], b["y"], b["w"], b["h"]),
    )


def validate_manifest(records: list[PitchRecord]) -> None:
    seen = set()
    last_seq: dict[str, int] = {}
    for r in records:
        if r.pitch_id in seen:
            raise InvalidInputError(f"duplicate pitch_id {r.pitch_id}")
        seen.add(r.pitch_id)
        prev = last_seq.get(r.pitcher_id)
        if prev is not None and r.seq_index <= prev:
            raise InvalidInputError(
                f"{r.pitch_id}: seq_index {r.seq_index} not increasing for {r.pitcher_id}"
            )
        last_seq[r.pitcher_id] = r.seq_index


def write_manifest(path: str | Path, records: list[PitchRecord]) -> None:
    validate_manifest(records)
    lines = [json.dumps(record_to_dict(r), separators=(",", ":")) for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> list[PitchRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        try:
            records.append(record_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise InvalidInputError(f"{path}:{i + 1}: bad manifest line: {e}") from e
    validate_manifest(records)
    return records


def manifest_fingerprint(path: str | Path) -> str:
    """sha-256 of the manifest bytes; identifies the corpus in reports."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def by_pitcher(records: Iterable[PitchRecord]) -> dict[str, list[PitchRecord]]:
    out: dict[str, list[PitchRecord]] = {}
    for r in records:
        out.setdefault(r.pitcher_id, []).append(r)
    return out


def pitchers_of(records: Iterable[PitchRecord], handedness: str | None = None) -> list[str]:
    """Pitcher ids in first-appearance order, optionally one cohort only."""
    seen: dict[str, None] = {}
    for r in records:
        if handedness in (None, "all") or r.handedness == handedness:
            seen.setdefault(r.pitcher_id)
    return list(seen)
