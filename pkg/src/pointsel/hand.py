"""Hand-keypoint interpretation.

Works on 21-landmark hand frames using the standard hand-landmark indexing
(0 = wrist, 4 = thumb tip, 5 = index MCP, 6 = index PIP, 8 = index tip,
9 = middle MCP). Builds pointing rays in the two supported variants, computes
the normalized pinch metric, and runs the edge-triggered click state machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from pointsel.geometry import (
    CameraIntrinsics,
    GeometryError,
    Point3,
    Ray3,
    deproject,
    ray_from_points,
)
from pointsel.scene import DepthFrame, sample_depth_robust

WRIST = 0
THUMB_TIP = 4
INDEX_MCP = 5
INDEX_PIP = 6
INDEX_TIP = 8
MIDDLE_MCP = 9

NUM_LANDMARKS = 21

# Window for per-landmark depth lookup in the depth map.
LANDMARK_DEPTH_WINDOW = 5


class PointingMode(Enum):
    FINGER_LINE = "finger"  # index first joint -> index tip
    WRIST_LINE = "wrist"  # wrist -> index tip


class PinchPhase(Enum):
    OPEN = "open"
    PINCHED = "pinched"


@dataclass(frozen=True)
class HandFrame:
    handedness: str  # "left" | "right"
    landmarks: tuple[tuple[float, float], ...]  # 21 x (u, v) pixels
    depths: Optional[tuple[Optional[float], ...]] = None  # meters, per landmark
    confidence: Optional[float] = None

    def __post_init__(self):
        if len(self.landmarks) != NUM_LANDMARKS:
            raise ValueError(f"expected {NUM_LANDMARKS} landmarks, got {len(self.landmarks)}")
        if self.depths is not None and len(self.depths) != NUM_LANDMARKS:
            raise ValueError(f"expected {NUM_LANDMARKS} depths, got {len(self.depths)}")
        if self.handedness not in ("left", "right"):
            raise ValueError(f"handedness must be 'left' or 'right', got {self.handedness!r}")


def landmark_depth(hand: HandFrame, idx: int, depth: Optional[DepthFrame]) -> Optional[float]:
    """Depth for one landmark: the frame's own value, else robust map lookup."""
    if hand.depths is not None and hand.depths[idx] is not None:
        return hand.depths[idx]
    if depth is None:
        return None
    u, v = hand.landmarks[idx]
    return sample_depth_robust(u, v, depth, LANDMARK_DEPTH_WINDOW)


def landmark_point3(
    hand: HandFrame, idx: int, depth: Optional[DepthFrame], intr: CameraIntrinsics
) -> Optional[Point3]:
    z = landmark_depth(hand, idx, depth)
    if z is None or z <= 0:
        return None
    u, v = hand.landmarks[idx]
    try:
        return deproject(u, v, z, intr)
    except GeometryError:
        return None


def pointing_ray(
    hand: HandFrame,
    mode: PointingMode,
    depth: Optional[DepthFrame],
    intr: CameraIntrinsics,
    finger_joint: int = INDEX_MCP,
) -> Optional[Ray3]:
    """Pointing ray through two lifted landmarks, toward the indicated object.

    FINGER_LINE runs index first joint -> tip (joint configurable between MCP
    and PIP), WRIST_LINE runs wrist -> tip. None when either endpoint lacks
    valid depth or the 3D baseline is degenerate.
    """
    proximal_idx = finger_joint if mode is PointingMode.FINGER_LINE else WRIST
    proximal = landmark_point3(hand, proximal_idx, depth, intr)
    distal = landmark_point3(hand, INDEX_TIP, depth, intr)
    if proximal is None or distal is None:
        return None
    try:
        return ray_from_points(proximal, distal)
    except GeometryError:
        return None


def pinch_metric(hand: HandFrame, intr: Optional[CameraIntrinsics] = None) -> Optional[float]:
    """Thumb-tip to index-tip distance normalized by hand scale.

    Hand scale is the wrist to middle-MCP distance, which makes the metric
    invariant to hand-camera distance. Uses 3D landmarks when depth is
    available for all four involved landmarks, otherwise falls back to 2D
    pixel distances for both numerator and denominator. None when the hand
    scale is degenerate (< 1 mm in 3D, < 1 px in 2D).
    """
    idxs = (WRIST, THUMB_TIP, INDEX_TIP, MIDDLE_MCP)
    if intr is not None and hand.depths is not None and all(
        hand.depths[i] is not None for i in idxs
    ):
        pts = {i: landmark_point3(hand, i, None, intr) for i in idxs}
        if all(p is not None for p in pts.values()):
            scale = pts[WRIST].distance_to(pts[MIDDLE_MCP])
            if scale < 1e-3:
                return None
            return pts[THUMB_TIP].distance_to(pts[INDEX_TIP]) / scale
    # 2D fallback
    lm = hand.landmarks
    scale = math.dist(lm[WRIST], lm[MIDDLE_MCP])
    if scale < 1.0:
        return None
    return math.dist(lm[THUMB_TIP], lm[INDEX_TIP]) / scale


@dataclass
class PinchTracker:
    """Hysteretic, edge-triggered pinch click detector.

    Open -> Pinched after `dwell_frames` consecutive frames below the engage
    threshold; the click fires exactly once on that transition. Release when
    the metric rises above the (higher) release threshold, or when the metric
    is missing for `dwell_frames` frames. No click on release.
    """

    engage_threshold: float = 0.25
    release_threshold: float = 0.35
    dwell_frames: int = 3
    phase: PinchPhase = PinchPhase.OPEN
    _below_count: int = field(default=0, repr=False)
    _missing_count: int = field(default=0, repr=False)

    def __post_init__(self):
        if not self.engage_threshold < self.release_threshold:
            raise ValueError("engage threshold must be below release threshold")
        if self.dwell_frames < 1:
            raise ValueError("dwell_frames must be >= 1")

    def step(self, metric: Optional[float]) -> bool:
        """Advance one frame; returns True exactly when a click fires."""
        if self.phase is PinchPhase.OPEN:
            if metric is not None and metric < self.engage_threshold:
                self._below_count += 1
                if self._below_count >= self.dwell_frames:
                    self.phase = PinchPhase.PINCHED
                    self._below_count = 0
                    self._missing_count = 0
                    return True
            else:
                self._below_count = 0
            return False
        # PINCHED
        if metric is None:
            self._missing_count += 1
            if self._missing_count >= self.dwell_frames:
                self.phase = PinchPhase.OPEN
                self._missing_count = 0
        else:
            self._missing_count = 0
            if metric > self.release_threshold:
                self.phase = PinchPhase.OPEN
        return False

    def reset(self):
        self.phase = PinchPhase.OPEN
        self._below_count = 0
        self._missing_count = 0


def _extension_ratio(hand: HandFrame) -> float:
    lm = hand.landmarks
    mcp = math.dist(lm[WRIST], lm[INDEX_MCP])
    if mcp < 1e-9:
        return 0.0
    return math.dist(lm[WRIST], lm[INDEX_TIP]) / mcp


def assign_roles(
    hands: Sequence[HandFrame],
) -> tuple[Optional[HandFrame], Optional[HandFrame]]:
    """Split detected hands into (pointing hand, click hand).

    The pointing hand is the one with the most extended index finger
    (wrist->tip over wrist->MCP ratio); ties go to the right hand. With a
    single hand there is no click hand.
    """
    if not hands:
        return None, None
    if len(hands) == 1:
        return hands[0], None
    a, b = hands[0], hands[1]
    ra, rb = _extension_ratio(a), _extension_ratio(b)
    if abs(ra - rb) < 1e-9:
        pointing = a if a.handedness == "right" else b
    else:
        pointing = a if ra > rb else b
    click = b if pointing is a else a
    return pointing, click


class LandmarkSmoother:
    """Exponential smoothing of per-landmark depths (off by default upstream).

    Smoothing trades latency for jitter; replays stay bit-deterministic only
    when it is disabled, which is why the engine defaults it off.
    """

    def __init__(self, alpha: float = 0.5):
        self.alpha = alpha
        self._state: dict[str, list[Optional[float]]] = {}

    def smooth(self, hand: HandFrame) -> HandFrame:
        if hand.depths is None:
            return hand
        prev = self._state.get(hand.handedness)
        if prev is None:
            self._state[hand.handedness] = list(hand.depths)
            return hand
        out: list[Optional[float]] = []
        for p, d in zip(prev, hand.depths):
            if d is None:
                out.append(p)
            elif p is None:
                out.append(d)
            else:
                out.append(self.alpha * d + (1 - self.alpha) * p)
        self._state[hand.handedness] = out
        return HandFrame(hand.handedness, hand.landmarks, tuple(out), hand.confidence)
