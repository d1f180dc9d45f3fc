"""The selection engine.

Per frame: build the pointing ray, preselect the scene object nearest to it
(with hysteresis against highlight flicker), and confirm via the click hand's
pinch state machine. Strictly sequential; engine state is a value owned by
one session.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from pointsel import kernels
from pointsel.frameio import Frame
from pointsel.geometry import CameraIntrinsics, Ray3
from pointsel.hand import (
    INDEX_MCP,
    NUM_LANDMARKS,
    HandFrame,
    LandmarkSmoother,
    PinchTracker,
    PointingMode,
    assign_roles,
    pinch_metric,
    pointing_ray,
)
from pointsel.scene import DepthFrame


@dataclass(frozen=True)
class SelectorConfig:
    mode: PointingMode = PointingMode.FINGER_LINE
    # Candidates farther than this from the ray are rejected (no preselection
    # rather than a far-fetched match); math.inf reproduces forced choice.
    max_ray_distance: float = 0.5
    # Objects at ray parameter <= min_t (behind the hand) are never candidates.
    min_t: float = 0.0
    # A new candidate must win this many consecutive frames before the
    # preselection switches; 1 gives memoryless behavior.
    switch_frames: int = 2
    pinch_engage: float = 0.25
    pinch_release: float = 0.35
    pinch_dwell_frames: int = 3
    finger_joint: int = INDEX_MCP
    # Missing landmark depths inherit the previous frame's value for at most
    # this many frames before the hand is declared invalid.
    depth_inherit_frames: int = 5
    smooth_landmarks: bool = False

    def __post_init__(self):
        if self.max_ray_distance <= 0:
            raise ValueError("max_ray_distance must be positive")
        if self.switch_frames < 1:
            raise ValueError("switch_frames must be >= 1")


@dataclass(frozen=True)
class SelectionEvent:
    kind: str  # "preselect" | "select" | "hands_lost" | "hands_found"
    t_ms: float
    object_id: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.t_ms, "event": self.kind, "object": self.object_id},
            separators=(",", ":"),
        )


class FrameStreamError(ValueError):
    def __init__(self, message: str, frame_index: int):
        self.frame_index = frame_index
        super().__init__(f"frame {frame_index}: {message}")


class _DepthCache:
    """Last-valid per-landmark depths, aged out after depth_inherit_frames."""

    def __init__(self, max_age: int):
        self.max_age = max_age
        self._values: dict[str, list[Optional[float]]] = {}
        self._ages: dict[str, list[int]] = {}

    def fill(self, hand: HandFrame) -> HandFrame:
        values = self._values.setdefault(hand.handedness, [None] * NUM_LANDMARKS)
        ages = self._ages.setdefault(hand.handedness, [0] * NUM_LANDMARKS)
        depths = list(hand.depths) if hand.depths is not None else [None] * NUM_LANDMARKS
        out: list[Optional[float]] = []
        for i, d in enumerate(depths):
            if d is not None:
                values[i] = d
                ages[i] = 0
                out.append(d)
            elif values[i] is not None and ages[i] < self.max_age:
                ages[i] += 1
                out.append(values[i])
            else:
                out.append(None)
        return HandFrame(hand.handedness, hand.landmarks, tuple(out), hand.confidence)


class Engine:
    """One selection session. Call step() once per frame, in order."""

    def __init__(self, cfg: SelectorConfig, intr: CameraIntrinsics):
        self.cfg = cfg
        self.intr = intr
        self.preselection: Optional[int] = None
        self._candidate: Optional[int] = None
        self._streak = 0
        self._hands_lost = False
        self._pinch = PinchTracker(cfg.pinch_engage, cfg.pinch_release, cfg.pinch_dwell_frames)
        self._depth_cache = _DepthCache(cfg.depth_inherit_frames)
        self._smoother = LandmarkSmoother() if cfg.smooth_landmarks else None
        self.last_ray: Optional[Ray3] = None
        self.hands_present = False

    def _best_candidate(self, frame: Frame, ray: Ray3) -> Optional[int]:
        ids = [o.id for o in frame.objects if o.centroid is not None]
        if not ids:
            return None
        pts = np.array(
            [[o.centroid.x, o.centroid.y, o.centroid.z] for o in frame.objects if o.centroid is not None]
        )
        dists, ts = kernels.ray_distances(
            pts, (ray.origin.x, ray.origin.y, ray.origin.z), ray.direction
        )
        best_id, best_d = None, math.inf
        for oid, d, t in zip(ids, dists, ts):
            if t <= self.cfg.min_t or d > self.cfg.max_ray_distance:
                continue
            if d < best_d or (d == best_d and (best_id is None or oid < best_id)):
                best_id, best_d = oid, d
        return best_id

    def step(self, frame: Frame, depth: Optional[DepthFrame] = None) -> list[SelectionEvent]:
        events: list[SelectionEvent] = []
        t = frame.t_ms

        hands = frame.hands
        if self._smoother is not None:
            hands = tuple(self._smoother.smooth(h) for h in hands)
        hands = tuple(self._depth_cache.fill(h) for h in hands)
        pointing, click = assign_roles(hands)

        ray = None
        if pointing is not None:
            ray = pointing_ray(pointing, self.cfg.mode, depth, self.intr, self.cfg.finger_joint)
        self.last_ray = ray

        if ray is None:
            if not self._hands_lost:
                self._hands_lost = True
                events.append(SelectionEvent("hands_lost", t))
                if self.preselection is not None:
                    self.preselection = None
                    events.append(SelectionEvent("preselect", t, None))
                self._candidate = None
                self._streak = 0
            self.hands_present = False
            self._pinch.step(None)
            return events

        if self._hands_lost:
            self._hands_lost = False
            events.append(SelectionEvent("hands_found", t))
        self.hands_present = True

        candidate = self._best_candidate(frame, ray)
        if candidate == self.preselection:
            self._candidate = None
            self._streak = 0
        else:
            if candidate == self._candidate:
                self._streak += 1
            else:
                self._candidate = candidate
                self._streak = 1
            if self._streak >= self.cfg.switch_frames:
                self.preselection = self._candidate
                self._candidate = None
                self._streak = 0
                events.append(SelectionEvent("preselect", t, self.preselection))

        metric = pinch_metric(click, self.intr) if click is not None else None
        if self._pinch.step(metric) and self.preselection is not None:
            events.append(SelectionEvent("select", t, self.preselection))
        return events


def run_stream(
    frames: Iterable[Frame],
    cfg: SelectorConfig,
    intr: CameraIntrinsics,
    depth_lookup: Optional[Callable[[Frame], Optional[DepthFrame]]] = None,
) -> tuple[list[SelectionEvent], list[Optional[int]]]:
    """Fold the engine over a frame sequence.

    Returns (events, per-frame preselection trace). Deterministic: identical
    inputs yield identical outputs. Frame errors are re-raised with the frame
    index attached.
    """
    engine = Engine(cfg, intr)
    events: list[SelectionEvent] = []
    trace: list[Optional[int]] = []
    for i, frame in enumerate(frames):
        depth = depth_lookup(frame) if depth_lookup is not None else None
        try:
            events.extend(engine.step(frame, depth))
        except FrameStreamError:
            raise
        except (ValueError, TypeError, AttributeError, KeyError) as e:
            raise FrameStreamError(str(e), i) from e
        trace.append(engine.preselection)
    return events, trace


def write_event_log(events: Iterable[SelectionEvent], path: str):
    with open(path, "w") as f:
        for e in events:
            f.write(e.to_json() + "\n")


def event_log_lines(events: Iterable[SelectionEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)
