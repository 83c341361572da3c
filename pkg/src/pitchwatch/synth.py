"""Synthetic pitch-video corpus: an articulated 2-d pitcher per clip.

Each pitch renders a stick figure going through wind-up, arm
acceleration, release (a ball leaves the hand) and follow-through. A
per-pitcher profile draws arm amplitude, tempo, release timing, stride
and body size once; every pitch adds small kinematic jitter and pixel
noise from its own deterministic stream, so the corpus is a pure
function of (params, pitch identity).

Injured pitches perturb the motion through per-injury channels: arm
injuries slow the arm and delay release, hamstring/groin injuries
shorten the stride, back/intercostal injuries flatten the torso drive,
and finger blisters barely change anything (they are intentionally a
near-undetectable category). The perturbation magnitude scales with
``injury_delta``; at zero the injured clip is bit-identical to the
healthy one.

Right-handed pitchers mirror the left-handed kinematic model. With
``mirror_twins`` (the default) right-hander i is the exact horizontal
mirror of left-hander i, pixel for pixel, which gives the flip-transfer
experiments an exact correspondence to check against.

Game ids partition each pitcher's pitches chronologically and never
influence pixels, so cropped flow carries no game signal by
construction. DL linkage: the last ``dl_window`` pitches before a
placement carry their distance, but only the final ``injured_per_event``
of them move differently; the change-point is what the label-window
sweep probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidInputError
from .flow import FlowParams, flow_clip
from .records import INJURY_TYPES, PitchRecord
from .tensorfile import read_tensor, write_tensor
from .video import (
    BoundingBox,
    Clip,
    DEFAULT_CLIP_FRAMES,
    DEFAULT_FPS,
    DEFAULT_FRAME_HW,
    crop,
    grayscale_clip,
    resize_clip,
)

# Perturbation channel per injury: multipliers on arm speed/amplitude,
# torso drive, stride and leg lift, plus an additive release delay.
# Values are the fully-injured (delta = 1) endpoints.
INJURY_CHANNELS: dict[str, dict[str, float]] = {
    "back strain": dict(speed=0.82, release=0.05, amp=0.95, lean=0.50, stride=0.95, lift=1.00),
    "arm strain": dict(speed=0.65, release=0.08, amp=0.85, lean=0.95, stride=1.00, lift=1.00),
    "finger blister": dict(speed=0.985, release=0.004, amp=0.995, lean=1.00, stride=1.00, lift=1.00),
    "shoulder strain": dict(speed=0.72, release=0.06, amp=0.80, lean=0.95, stride=1.00, lift=1.00),
    "ucl tear": dict(speed=0.68, release=0.09, amp=0.88, lean=1.00, stride=1.00, lift=1.00),
    "intercostal strain": dict(speed=0.80, release=0.05, amp=0.92, lean=0.55, stride=0.97, lift=1.00),
    "sternoclavicular joint": dict(speed=0.78, release=0.05, amp=0.82, lean=0.90, stride=1.00, lift=1.00),
    "rotator cuff": dict(speed=0.70, release=0.07, amp=0.78, lean=0.95, stride=1.00, lift=1.00),
    "hamstring strain": dict(speed=0.80, release=0.04, amp=0.95, lean=0.90, stride=0.50, lift=0.55),
    "groin strain": dict(speed=0.84, release=0.04, amp=0.95, lean=0.92, stride=0.70, lift=0.80),
}

# Default event assignment cycles through the strongly-detectable injuries;
# blister and sternoclavicular corpora are built explicitly when studied.
DEFAULT_INJURY_CYCLE = (
    "arm strain",
    "hamstring strain",
    "shoulder strain",
    "back strain",
    "ucl tear",
    "intercostal strain",
    "rotator cuff",
    "groin strain",
)

_IDENTITY_CHANNEL = dict(speed=1.0, release=0.0, amp=1.0, lean=1.0, stride=1.0, lift=1.0)


@dataclass(frozen=True)
class SynthParams:
    n_left: int = 4
    n_right: int = 4
    healthy_per_pitcher: int = 100
    injured_per_event: int = 20
    dl_window: int = 40
    events_per_pitcher: int = 1
    games_per_pitcher: int = 4
    frame_hw: tuple[int, int] = DEFAULT_FRAME_HW
    n_frames: int = DEFAULT_CLIP_FRAMES
    fps: float = DEFAULT_FPS
    injury_delta: float = 1.0
    pixel_noise: float = 0.01
    jitter: float = 1.0
    injury_cycle: tuple[str, ...] = DEFAULT_INJURY_CYCLE
    mirror_twins: bool = True
    color: str = "gray"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_left + self.n_right < 1:
            raise InvalidInputError("need at least one pitcher")
        if min(self.n_left, self.n_right, self.healthy_per_pitcher,
               self.injured_per_event, self.events_per_pitcher) < 0:
            raise InvalidInputError("counts must be non-negative")
        if self.events_per_pitcher > 0 and self.injured_per_event < 1:
            raise InvalidInputError("injured_per_event must be >= 1 when events occur")
        if self.dl_window < self.injured_per_event:
            raise InvalidInputError("dl_window must cover the perturbed pitches")
        if self.events_per_pitcher > 0:
            share = self.healthy_per_pitcher // self.events_per_pitcher
            if share < self.dl_window - self.injured_per_event:
                raise InvalidInputError(
                    "healthy_per_pitcher too small for dl_window: each event needs "
                    f"{self.dl_window - self.injured_per_event} healthy pitches inside the window"
                )
        if self.games_per_pitcher < 1:
            raise InvalidInputError("games_per_pitcher must be >= 1")
        if self.n_frames < 2:
            raise InvalidInputError("clips need at least 2 frames")
        if self.injury_delta < 0:
            raise InvalidInputError("injury_delta must be >= 0")
        if self.color not in ("gray", "rgb"):
            raise InvalidInputError(f"color must be gray or rgb, got {self.color!r}")
        for name in self.injury_cycle:
            if name not in INJURY_TYPES:
                raise InvalidInputError(f"unknown injury type {name!r} in cycle")

    def to_dict(self) -> dict:
        return {
            "n_left": self.n_left, "n_right": self.n_right,
            "healthy_per_pitcher": self.healthy_per_pitcher,
            "injured_per_event": self.injured_per_event,
            "dl_window": self.dl_window,
            "events_per_pitcher": self.events_per_pitcher,
            "games_per_pitcher": self.games_per_pitcher,
            "frame_hw": list(self.frame_hw), "n_frames": self.n_frames, "fps": self.fps,
            "injury_delta": self.injury_delta, "pixel_noise": self.pixel_noise,
            "jitter": self.jitter, "injury_cycle": list(self.injury_cycle),
            "mirror_twins": self.mirror_twins, "color": self.color, "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SynthParams":
        d = dict(d)
        if "frame_hw" in d:
            d["frame_hw"] = tuple(d["frame_hw"])
        if "injury_cycle" in d:
            d["injury_cycle"] = tuple(d["injury_cycle"])
        return SynthParams(**d)


@dataclass(frozen=True)
class PitcherProfile:
    arm_amp: float
    arm_speed: float
    release_t: float
    windup_amp: float
    lean_amp: float
    stride_len: float
    leg_lift: float
    scale: float
    cx_off: float
    glove_amp: float


def _profile(params: SynthParams, canon: int, idx: int) -> PitcherProfile:
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 101, canon, idx]))
    u = rng.uniform
    return PitcherProfile(
        arm_amp=u(1.75, 2.25),
        arm_speed=u(0.82, 1.18),
        release_t=u(0.60, 0.70),
        windup_amp=u(0.85, 1.10),
        lean_amp=u(0.16, 0.30),
        stride_len=u(0.16, 0.26),
        leg_lift=u(0.10, 0.18),
        scale=u(0.90, 1.05),
        cx_off=u(-0.04, 0.04),
        glove_amp=u(0.55, 0.85),
    )


def _smoothstep(z: float) -> float:
    z = min(max(z, 0.0), 1.0)
    return z * z * (3.0 - 2.0 * z)


def _effective_channel(injury_type: str | None, delta: float) -> dict[str, float]:
    if injury_type is None or delta == 0.0:
        return _IDENTITY_CHANNEL
    full = INJURY_CHANNELS[injury_type]
    out = {}
    for key, val in full.items():
        if key == "release":
            out[key] = delta * val
        else:
            out[key] = 1.0 - delta * (1.0 - val)
    return out


def _two_link(hip, foot, l1: float, l2: float, bend_sign: float):
    """Knee position for a two-segment limb, bending toward +x when sign > 0."""
    hx, hy = hip
    fx, fy = foot
    dx, dy = fx - hx, fy - hy
    d = math.hypot(dx, dy)
    reach = l1 + l2
    if d >= reach * 0.999:
        # Straight limb; put the joint on the line.
        r = l1 / reach
        return (hx + dx * r, hy + dy * r), (hx + dx * (d and min(1.0, reach / d)), hy + dy * (d and min(1.0, reach / d)))
    a = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d) if d > 1e-9 else l1
    h2 = max(l1 * l1 - a * a, 0.0)
    h = math.sqrt(h2)
    mx, my = hx + dx * (a / d if d > 1e-9 else 0.0), hy + dy * (a / d if d > 1e-9 else 0.0)
    # Perpendicular pointing roughly forward (+x) or backward.
    px, py = -dy / d if d > 1e-9 else 1.0, dx / d if d > 1e-9 else 0.0
    if px * bend_sign < 0:
        px, py = -px, -py
    return (mx + px * h, my + py * h), (fx, fy)


def _pose_segments(
    t: float,
    prof: PitcherProfile,
    ch: dict[str, float],
    jit: dict[str, float],
    aspect: float,
) -> tuple[list[tuple[float, float, float, float, float]], list[tuple[float, float, float]]]:
    """Stick-figure segments and blobs at normalized time t, in height units.

    Returns (segments [(x0, y0, x1, y1, width_scale)], blobs [(x, y, radius_scale)]).
    The throwing arm starts down, cocks back over the shoulder, whips
    forward and releases the ball toward +x.
    """
    s = prof.scale
    amp = prof.arm_amp * ch["amp"] * jit["amp"]
    t_cock = 0.36 + jit["timing"]
    dur = max(0.12, (prof.release_t - 0.36) / (prof.arm_speed * ch["speed"]) + ch["release"])
    t_rel = t_cock + dur

    theta0 = 0.15
    theta_cock = theta0 - 0.52 * amp * prof.windup_amp

    if t < t_cock:
        theta = theta0 + (theta_cock - theta0) * _smoothstep(t / t_cock)
        bend = 0.45 + 0.85 * _smoothstep(t / t_cock)
    elif t < t_rel:
        z = _smoothstep((t - t_cock) / dur)
        theta = theta_cock + amp * z
        bend = 1.30 - 1.10 * z
    else:
        z = _smoothstep((t - t_rel) / max(1.0 - t_rel, 0.15))
        theta = theta_cock + amp + 0.45 * z
        bend = 0.20 + 0.45 * z

    lean_drive = (prof.lean_amp + 0.10) * ch["lean"] * jit["lean"]
    lean = -0.10 + lean_drive * _smoothstep((t - 0.25) / 0.45)

    stride = prof.stride_len * ch["stride"] * jit["stride"]
    lift_amp = (0.26 + prof.leg_lift) * ch["lift"]
    lift = _smoothstep(t / 0.30) * (1.0 - _smoothstep((t - 0.30) / 0.28))
    plant = _smoothstep((t - 0.32) / 0.30)

    glove = prof.glove_amp * (_smoothstep(t / t_cock) - 0.75 * _smoothstep((t - t_cock) / 0.5))

    ground = 0.93
    cx = 0.5 * aspect + prof.cx_off + jit["cx"] + 0.40 * stride * plant
    pelvis = (cx, 0.60 - 0.03 * plant)
    torso_len = 0.27 * s
    neck = (pelvis[0] + torso_len * math.sin(lean), pelvis[1] - torso_len * math.cos(lean))
    head = (neck[0] + 0.085 * s * math.sin(lean), neck[1] - 0.085 * s * math.cos(lean))

    lu, lf = 0.14 * s, 0.13 * s
    elbow = (neck[0] + lu * math.sin(theta), neck[1] + lu * math.cos(theta))
    wtheta = theta - bend
    wrist = (elbow[0] + lf * math.sin(wtheta), elbow[1] + lf * math.cos(wtheta))

    gtheta = -0.25 - glove
    gelbow = (neck[0] + lu * 0.95 * math.sin(gtheta), neck[1] + lu * 0.95 * math.cos(gtheta))
    gwrist = (gelbow[0] + lf * 0.9 * math.sin(gtheta + 0.5 * glove),
              gelbow[1] + lf * 0.9 * math.cos(gtheta + 0.5 * glove))

    ll = 0.175 * s
    front_foot = (cx + 0.03 + (0.30 * lift + plant) * stride + 0.05 * lift,
                  ground - lift * lift_amp)
    back_foot = (cx - 0.105 - 0.05 * plant, ground)
    fknee, ffoot = _two_link(pelvis, front_foot, ll, ll, +1.0)
    bknee, bfoot = _two_link(pelvis, back_foot, ll, ll, -1.0)

    segments = [
        (*pelvis, *neck, 1.15),
        (*neck, *elbow, 1.0),
        (*elbow, *wrist, 0.9),
        (*neck, *gelbow, 1.0),
        (*gelbow, *gwrist, 0.9),
        (*pelvis, *fknee, 1.1),
        (*fknee, *ffoot, 1.0),
        (*pelvis, *bknee, 1.1),
        (*bknee, *bfoot, 1.0),
    ]
    blobs = [(head[0], head[1], 1.0)]

    if t < t_rel:
        blobs.append((wrist[0], wrist[1], 0.55))
    else:
        dt = t - t_rel
        blobs.append((wrist[0] + 1.9 * dt, wrist[1] - 0.5 * dt + 1.2 * dt * dt, 0.55))
    return segments, blobs


def _render_frame(
    segments, blobs, h: int, w: int, sigma: float
) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    unit = h - 1.0
    canvas = np.zeros((h, w))
    for x0, y0, x1, y1, ws in segments:
        x0, y0, x1, y1 = x0 * unit, y0 * unit, x1 * unit, y1 * unit
        vx, vy = x1 - x0, y1 - y0
        l2 = vx * vx + vy * vy
        if l2 < 1e-12:
            tproj = np.zeros_like(xx)
        else:
            tproj = np.clip(((xx - x0) * vx + (yy - y0) * vy) / l2, 0.0, 1.0)
        dx = xx - (x0 + tproj * vx)
        dy = yy - (y0 + tproj * vy)
        d2 = dx * dx + dy * dy
        sg = sigma * ws
        np.maximum(canvas, np.exp(-0.5 * d2 / (sg * sg)), out=canvas)
    for bx, by, rs in blobs:
        dx = xx - bx * unit
        dy = yy - by * unit
        sg = sigma * 2.4 * rs
        np.maximum(canvas, np.exp(-0.5 * (dx * dx + dy * dy) / (sg * sg)), out=canvas)
    return canvas


def render_pitch_clip(
    params: SynthParams,
    prof: PitcherProfile,
    injury_type: str | None,
    perturbed: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    """The canonical-orientation clip (T, H, W) float32 for one pitch.

    All random draws come from ``rng`` in a fixed order, so the same
    stream yields the same clip regardless of labeling or game metadata.
    """
    h, w = params.frame_hw
    aspect = w / h
    j = params.jitter
    jit = {
        "amp": 1.0 + 0.045 * j * rng.standard_normal(),
        "timing": 0.020 * j * rng.standard_normal(),
        "lean": 1.0 + 0.06 * j * rng.standard_normal(),
        "stride": 1.0 + 0.05 * j * rng.standard_normal(),
        "cx": 0.012 * j * rng.standard_normal(),
    }
    ch = _effective_channel(injury_type if perturbed else None, params.injury_delta)
    sigma = max(0.75, 0.028 * h)
    frames = np.empty((params.n_frames, h, w), dtype=np.float64)
    for i in range(params.n_frames):
        t = i / (params.n_frames - 1.0)
        segments, blobs = _pose_segments(t, prof, ch, jit, aspect)
        frames[i] = _render_frame(segments, blobs, h, w, sigma)
    if params.pixel_noise > 0:
        frames += params.pixel_noise * rng.standard_normal(frames.shape)
    return np.clip(frames, 0.0, 1.0).astype(np.float32)


def _tint(params: SynthParams, canon: int, idx: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 103, canon, idx]))
    return rng.uniform(0.75, 1.0, size=3)


def _default_bbox(params: SynthParams) -> BoundingBox:
    h, w = params.frame_hw
    mx = max(1, round(w * 0.06))
    my = max(1, round(h * 0.04))
    return BoundingBox(mx, my, w - 2 * mx, h - 2 * my)


def _pitcher_key(pitcher_id: str, params: SynthParams) -> tuple[int, int]:
    """(canonical-model code, profile index); mirror twins share the left code."""
    hand, idx = pitcher_id[0], int(pitcher_id[1:])
    if hand == "L":
        return 0, idx
    if params.mirror_twins and idx < params.n_left:
        return 0, idx
    return 1, idx


def regenerate_clip(params: SynthParams, record: PitchRecord) -> np.ndarray:
    """Recompute a pitch clip from its identity alone; bit-identical to
    what `synth_generate` stored."""
    canon, idx = _pitcher_key(record.pitcher_id, params)
    prof = _profile(params, canon, idx)
    perturbed = (
        record.pitches_before_dl is not None
        and record.pitches_before_dl <= params.injured_per_event
    )
    rng = np.random.default_rng(
        np.random.SeedSequence([params.seed, 211, canon, idx, record.seq_index])
    )
    clip = render_pitch_clip(params, prof, record.injury_type, perturbed, rng)
    if record.handedness == "right":
        clip = np.ascontiguousarray(clip[:, :, ::-1])
    if params.color == "rgb":
        tint = _tint(params, canon, idx)
        clip = np.clip(clip[..., None] * tint[None, None, None, :], 0.0, 1.0).astype(np.float32)
    return clip


def build_manifest(params: SynthParams) -> list[PitchRecord]:
    """Pitch records for the whole corpus (no pixels)."""
    records: list[PitchRecord] = []
    bbox = _default_bbox(params)
    event_counter = 0
    pitcher_ids = [f"L{i}" for i in range(params.n_left)] + [f"R{i}" for i in range(params.n_right)]
    for pitcher_id in pitcher_ids:
        handedness = "left" if pitcher_id.startswith("L") else "right"
        pbbox = bbox if handedness == "left" else bbox.mirrored(params.frame_hw[1])
        events = params.events_per_pitcher
        share = params.healthy_per_pitcher // max(events, 1)
        extra = params.healthy_per_pitcher - share * max(events, 1)
        seq = 0
        plan: list[tuple[str | None, int | None, str | None, int]] = []  # (event, dist, type, game_slot)
        if events == 0:
            for _ in range(params.healthy_per_pitcher):
                plan.append((None, None, None, -1))
        for e in range(events):
            n_unlinked = share + (extra if e == events - 1 else 0) - (
                params.dl_window - params.injured_per_event
            )
            injury_type = params.injury_cycle[event_counter % len(params.injury_cycle)]
            event_id = f"{pitcher_id}-e{e}"
            for _ in range(n_unlinked):
                plan.append((None, None, None, -1))
            for dist in range(params.dl_window, 0, -1):
                plan.append((event_id, dist, injury_type, e))
            event_counter += 1
        n_unlinked_total = sum(1 for p in plan if p[0] is None)
        per_game = max(1, math.ceil(n_unlinked_total / params.games_per_pitcher))
        unlinked_seen = 0
        for event_id, dist, injury_type, game_slot in plan:
            if event_id is None:
                game = f"{pitcher_id}-g{min(unlinked_seen // per_game, params.games_per_pitcher - 1)}"
                unlinked_seen += 1
            else:
                game = f"{pitcher_id}-gI{game_slot}"
            records.append(PitchRecord(
                pitch_id=f"{pitcher_id}-p{seq:04d}",
                pitcher_id=pitcher_id,
                handedness=handedness,
                game_id=game,
                seq_index=seq,
                injury_event_id=event_id,
                pitches_before_dl=dist,
                injury_type=injury_type,
                clip_ref=f"flow/{pitcher_id}-p{seq:04d}.pgt",
                bbox=pbbox,
            ))
            seq += 1
    return records


def synth_generate(params: SynthParams, out_dir: str | Path) -> list[PitchRecord]:
    """Write one clip tensor per pitch under ``out_dir``/clips and return
    the manifest records."""
    out = Path(out_dir)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    records = build_manifest(params)
    for r in records:
        write_tensor(out / "clips" / f"{r.pitch_id}.pgt", regenerate_clip(params, r))
    return records


def clip_path(out_dir: str | Path, record: PitchRecord) -> Path:
    return Path(out_dir) / "clips" / f"{record.pitch_id}.pgt"


def preprocess_corpus(
    records: Iterable[PitchRecord],
    out_dir: str | Path,
    flow_params: FlowParams = FlowParams(),
    resize_hw: tuple[int, int] | None = None,
    fps: float = DEFAULT_FPS,
    progress=None,
) -> int:
    """Crop, grayscale, optionally resize, and compute flow for every pitch.

    Results land at each record's ``clip_ref`` as (2, T-1, H, W) float32
    tensors. Reruns produce identical bytes.
    """
    out = Path(out_dir)
    (out / "flow").mkdir(parents=True, exist_ok=True)
    n = 0
    for r in records:
        src = clip_path(out, r)
        if not src.exists():
            raise FileNotFoundError(f"pitch {r.pitch_id}: clip file missing at {src}")
        clip = Clip(read_tensor(src), fps=fps)
        clip = crop(clip, r.bbox)
        if clip.channels == 3:
            clip = grayscale_clip(clip)
        if resize_hw is not None:
            clip = resize_clip(clip, *resize_hw)
        fc = flow_clip(clip, flow_params)
        write_tensor(out / r.clip_ref, fc.as_tensor())
        n += 1
        if progress is not None:
            progress(r.pitch_id, n)
    return n


def flow_input_shape(params: SynthParams, resize_hw: tuple[int, int] | None) -> tuple[int, int, int, int]:
    """Model input dims (C, T-1, H, W) produced by the preprocessing chain."""
    if resize_hw is not None:
        h, w = resize_hw
    else:
        box = _default_bbox(params)
        h, w = box.h, box.w
    return (2, params.n_frames - 1, h, w)
