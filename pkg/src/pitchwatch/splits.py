"""Train/test partitions realizing each experimental protocol.

All protocols start from last-k labeling and compose a few moves:

* per_pitcher  - half of one pitcher's healthy and injured pitches train
  a model that is tested on the other half.
* transfer     - the per-pitcher training half of pitcher a, evaluated on
  every pitch of pitcher b.
* cohort       - the half/half split applied across a whole handedness
  cohort (or all pitchers), stratified per pitcher and class.
* unseen       - half of a cohort's pitchers train, the other pitchers
  are entirely held out.
* healthy_augmented - the unseen split, except half of each held-out
  pitcher's healthy pitches move into training; tests on their injured
  pitches plus the remaining healthy half.
* flip_cross_arm    - a cohort model from one arm evaluated on the other
  arm's pitches, optionally mirrored, optionally with flipped healthy
  pitches of the target arm added to training.

Splits are deterministic functions of (manifest order, k, seed). Odd
class counts put the extra pitch in train.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientDataError,
    InvalidInputError,
    InvalidProtocolError,
    UnknownPitcherError,
)
from .records import (
    HEALTHY,
    INJURED,
    LabeledPitch,
    PitchRecord,
    label_pitches,
    pitchers_of,
)

ARMS = ("left", "right", "all")


@dataclass(frozen=True)
class SplitPlan:
    name: str
    train: frozenset[str]
    test: frozenset[str]
    k: int
    notes: str = ""
    flipped: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.train & self.test:
            raise InvalidInputError(
                f"{self.name}: train and test overlap on {len(self.train & self.test)} pitches"
            )

    def audit(self) -> dict:
        return {
            "name": self.name,
            "train_size": len(self.train),
            "test_size": len(self.test),
            "disjoint": not (self.train & self.test),
            "flipped_size": len(self.flipped),
        }


@dataclass(frozen=True)
class Protocol:
    """One experiment's split recipe; unused fields stay None."""

    kind: str
    pitcher: str | None = None
    train_pitcher: str | None = None
    test_pitcher: str | None = None
    arm: str | None = None
    direction: str | None = None
    with_flip: bool = True
    with_healthy: bool = False

    KINDS = ("per_pitcher", "transfer", "cohort", "unseen", "healthy_augmented",
             "flip_cross_arm")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise InvalidProtocolError(f"unknown protocol kind {self.kind!r}")
        if self.kind in ("cohort", "unseen", "healthy_augmented") and self.arm not in ARMS:
            raise InvalidProtocolError(f"{self.kind} needs arm in {ARMS}, got {self.arm!r}")
        if self.kind == "flip_cross_arm" and self.direction not in ("left_to_right", "right_to_left"):
            raise InvalidProtocolError(
                f"flip_cross_arm needs direction left_to_right or right_to_left, got {self.direction!r}"
            )


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *salt]))


def _half_ids(ids: list[str], rng: np.random.Generator) -> tuple[list[str], list[str]]:
    """Shuffled halves with the odd element going to the first (train) half."""
    ids = list(ids)
    rng.shuffle(ids)
    cut = (len(ids) + 1) // 2
    return ids[:cut], ids[cut:]


def split_half(labeled: list[LabeledPitch], seed: int, name: str = "half") -> SplitPlan:
    """Stratified 50/50 split within each label class, per pitcher."""
    n_healthy = sum(1 for lp in labeled if lp.label == HEALTHY)
    n_injured = sum(1 for lp in labeled if lp.label == INJURED)
    if n_healthy < 2:
        raise InsufficientDataError(f"need at least 2 healthy pitches, got {n_healthy}")
    if n_injured < 2:
        raise InsufficientDataError(f"need at least 2 injured pitches, got {n_injured}")
    groups: dict[tuple[str, str], list[str]] = {}
    for lp in labeled:
        groups.setdefault((lp.record.pitcher_id, lp.label), []).append(lp.record.pitch_id)
    train: list[str] = []
    test: list[str] = []
    rng = _rng(seed, 11)
    for key in sorted(groups):
        tr, te = _half_ids(groups[key], rng)
        train += tr
        test += te
    k = labeled[0].k_used
    return SplitPlan(name, frozenset(train), frozenset(test), k)


def _pitcher_records(records: list[PitchRecord], pitcher: str) -> list[PitchRecord]:
    sub = [r for r in records if r.pitcher_id == pitcher]
    if not sub:
        raise UnknownPitcherError(pitcher)
    return sub


def _cohort_pitchers(records: list[PitchRecord], arm: str) -> list[str]:
    ids = pitchers_of(records, None if arm == "all" else arm)
    if not ids:
        raise InsufficientDataError(f"no pitchers in the {arm} cohort")
    return ids


def _healthy_augmented_sets(
    records: list[PitchRecord], arm: str, k: int, seed: int
) -> tuple[list[str], list[str], list[str], str]:
    """(train ids, test ids, held-out pitcher list, notes)."""
    cohort = _cohort_pitchers(records, arm)
    if len(cohort) < 2:
        raise InsufficientDataError(f"{arm} cohort needs >= 2 pitchers, got {len(cohort)}")
    train_p, test_p = _half_ids(cohort, _rng(seed, 23))
    labeled = label_pitches(records, k)
    train: list[str] = []
    test: list[str] = []
    for lp in labeled:
        if lp.record.pitcher_id in train_p:
            train.append(lp.record.pitch_id)
    rng = _rng(seed, 29)
    for p in sorted(test_p):
        healthy = [lp.record.pitch_id for lp in labeled
                   if lp.record.pitcher_id == p and lp.label == HEALTHY]
        injured = [lp.record.pitch_id for lp in labeled
                   if lp.record.pitcher_id == p and lp.label == INJURED]
        tr, te = _half_ids(healthy, rng)
        train += tr
        test += te + injured
    notes = f"train pitchers {sorted(train_p)}; held-out pitchers {sorted(test_p)}"
    return train, test, sorted(test_p), notes


def build_protocol(
    records: list[PitchRecord], protocol: Protocol, k: int, seed: int
) -> SplitPlan:
    """A SplitPlan realizing one protocol over the manifest."""
    if protocol.kind == "per_pitcher":
        if protocol.pitcher is None:
            raise InvalidProtocolError("per_pitcher needs a pitcher")
        sub = _pitcher_records(records, protocol.pitcher)
        plan = split_half(label_pitches(sub, k), seed, name=f"per_pitcher[{protocol.pitcher}]")
        return SplitPlan(plan.name, plan.train, plan.test, k,
                         notes=f"pitcher {protocol.pitcher}")

    if protocol.kind == "transfer":
        a, b = protocol.train_pitcher, protocol.test_pitcher
        if a is None or b is None:
            raise InvalidProtocolError("transfer needs train_pitcher and test_pitcher")
        if a == b:
            raise InvalidProtocolError(f"transfer source and target are both {a!r}")
        sub_a = _pitcher_records(records, a)
        sub_b = _pitcher_records(records, b)
        half = split_half(label_pitches(sub_a, k), seed, name="half")
        test = frozenset(r.pitch_id for r in sub_b)
        return SplitPlan(f"transfer[{a}->{b}]", half.train, test, k,
                         notes=f"model of {a} (its training half) applied to every pitch of {b}")

    if protocol.kind == "cohort":
        cohort = _cohort_pitchers(records, protocol.arm)
        sub = [r for r in records if r.pitcher_id in cohort]
        plan = split_half(label_pitches(sub, k), seed, name=f"cohort[{protocol.arm}]")
        return SplitPlan(plan.name, plan.train, plan.test, k,
                         notes=f"{protocol.arm} cohort: {sorted(cohort)}")

    if protocol.kind == "unseen":
        cohort = _cohort_pitchers(records, protocol.arm)
        if len(cohort) < 2:
            raise InsufficientDataError(f"{protocol.arm} cohort needs >= 2 pitchers")
        train_p, test_p = _half_ids(cohort, _rng(seed, 23))
        train = frozenset(r.pitch_id for r in records if r.pitcher_id in train_p)
        test = frozenset(r.pitch_id for r in records if r.pitcher_id in test_p)
        return SplitPlan(f"unseen[{protocol.arm}]", train, test, k,
                         notes=f"train pitchers {sorted(train_p)}; unseen pitchers {sorted(test_p)}")

    if protocol.kind == "healthy_augmented":
        train, test, _, notes = _healthy_augmented_sets(records, protocol.arm, k, seed)
        return SplitPlan(f"healthy_augmented[{protocol.arm}]",
                         frozenset(train), frozenset(test), k, notes=notes)

    # flip_cross_arm
    src, dst = (("left", "right") if protocol.direction == "left_to_right"
                else ("right", "left"))
    src_cohort = _cohort_pitchers(records, src)
    dst_cohort = _cohort_pitchers(records, dst)
    sub_src = [r for r in records if r.pitcher_id in src_cohort]
    src_half = split_half(label_pitches(sub_src, k), seed, name="half")
    train = set(src_half.train)
    flipped: set[str] = set()
    labeled = label_pitches(records, k)
    if protocol.with_healthy:
        rng = _rng(seed, 31)
        test: list[str] = []
        for p in sorted(dst_cohort):
            healthy = [lp.record.pitch_id for lp in labeled
                       if lp.record.pitcher_id == p and lp.label == HEALTHY]
            injured = [lp.record.pitch_id for lp in labeled
                       if lp.record.pitcher_id == p and lp.label == INJURED]
            tr, te = _half_ids(healthy, rng)
            train.update(tr)
            if protocol.with_flip:
                flipped.update(tr)
            test += te + injured
    else:
        test = [r.pitch_id for r in records if r.pitcher_id in dst_cohort]
    if protocol.with_flip:
        flipped.update(test)
    flags = ("+flip" if protocol.with_flip else "") + ("+healthy" if protocol.with_healthy else "")
    return SplitPlan(
        f"flip_cross_arm[{protocol.direction}{flags}]",
        frozenset(train), frozenset(test), k,
        notes=f"{src} model on {dst} pitchers; flipped side: {dst if protocol.with_flip else 'none'}",
        flipped=frozenset(flipped),
    )
