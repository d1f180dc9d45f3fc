"""Frame stream wire formats: JSONL frame streams and the binary depth sidecar.

A recorded session is a `.frames.jsonl` file (header line followed by one
JSON object per frame) plus an optional `.depth` sidecar holding raw
little-endian u16 depth frames concatenated in index order. These two layouts
are the package's external interface; everything a real perception stack
needs to interoperate is in this module.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from pointsel.geometry import CameraIntrinsics, Point3
from pointsel.hand import HandFrame
from pointsel.scene import DepthFrame, ObjectMask, SceneObject, compute_centroid

FORMAT_NAME = "pointsel.frames"
FORMAT_VERSION = 1

# A single corrupt line must not allocate unbounded memory.
MAX_LINE_BYTES = 16 * 1024 * 1024


class StreamFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class SidecarError(IOError):
    pass


@dataclass(frozen=True)
class Frame:
    index: int
    t_ms: float
    hands: tuple[HandFrame, ...]
    objects: tuple[SceneObject, ...]
    depth_ref: Optional[int] = None

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise StreamFormatError(f"duplicate object ids in frame {self.index}: {ids}")


@dataclass(frozen=True)
class StreamHeader:
    intrinsics: CameraIntrinsics
    fps_hint: float = 30.0
    producer: str = ""
    version: int = FORMAT_VERSION


def _intr_to_dict(intr: CameraIntrinsics) -> dict:
    return {
        "fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
        "width": intr.width, "height": intr.height, "depth_scale": intr.depth_scale,
    }


def _intr_from_dict(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
        width=d["width"], height=d["height"], depth_scale=d["depth_scale"],
    )


def encode_header(header: StreamHeader) -> str:
    return json.dumps(
        {
            "format": FORMAT_NAME,
            "version": header.version,
            "intrinsics": _intr_to_dict(header.intrinsics),
            "fps_hint": header.fps_hint,
            "producer": header.producer,
        },
        separators=(",", ":"),
    )


def decode_header(line: str) -> StreamHeader:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as e:
        raise StreamFormatError(f"malformed header JSON: {e}", line=1)
    if d.get("format") != FORMAT_NAME:
        raise StreamFormatError(f"not a {FORMAT_NAME} stream", line=1)
    if d.get("version") != FORMAT_VERSION:
        raise StreamFormatError(
            f"unsupported stream version {d.get('version')} (expected {FORMAT_VERSION})", line=1
        )
    return StreamHeader(
        intrinsics=_intr_from_dict(d["intrinsics"]),
        fps_hint=d.get("fps_hint", 30.0),
        producer=d.get("producer", ""),
        version=d["version"],
    )


def _hand_to_dict(h: HandFrame) -> dict:
    return {
        "handedness": h.handedness,
        "landmarks": [[u, v] for u, v in h.landmarks],
        "depths": list(h.depths) if h.depths is not None else None,
        "confidence": h.confidence,
    }


def _hand_from_dict(d: dict) -> HandFrame:
    return HandFrame(
        handedness=d["handedness"],
        landmarks=tuple((lm[0], lm[1]) for lm in d["landmarks"]),
        depths=tuple(d["depths"]) if d.get("depths") is not None else None,
        confidence=d.get("confidence"),
    )


def _object_to_dict(o: SceneObject) -> dict:
    return {
        "id": o.id,
        "label": o.label,
        "mask": {"width": o.mask.width, "height": o.mask.height, "runs": list(o.mask.runs)},
        "centroid": [o.centroid.x, o.centroid.y, o.centroid.z] if o.centroid else None,
        "pixel_count": o.pixel_count,
    }


def _object_from_dict(d: dict) -> SceneObject:
    m = d["mask"]
    c = d.get("centroid")
    return SceneObject(
        id=d["id"],
        label=d["label"],
        mask=ObjectMask(m["width"], m["height"], tuple(m["runs"])),
        centroid=Point3(*c) if c is not None else None,
        pixel_count=d.get("pixel_count", 0),
    )


def encode_frame(frame: Frame) -> str:
    return json.dumps(
        {
            "index": frame.index,
            "t": frame.t_ms,
            "hands": [_hand_to_dict(h) for h in frame.hands],
            "objects": [_object_to_dict(o) for o in frame.objects],
            "depth_ref": frame.depth_ref,
        },
        separators=(",", ":"),
    )


def decode_frame(line: str, line_no: Optional[int] = None) -> Frame:
    """Decode one frame line. Unknown keys are ignored (forward compat)."""
    if len(line) > MAX_LINE_BYTES:
        raise StreamFormatError(f"line exceeds {MAX_LINE_BYTES} byte cap", line=line_no)
    try:
        d = json.loads(line)
    except json.JSONDecodeError as e:
        raise StreamFormatError(f"malformed frame JSON: {e}", line=line_no)
    try:
        return Frame(
            index=d["index"],
            t_ms=d["t"],
            hands=tuple(_hand_from_dict(h) for h in d["hands"]),
            objects=tuple(_object_from_dict(o) for o in d["objects"]),
            depth_ref=d.get("depth_ref"),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, StreamFormatError):
            raise StreamFormatError(str(e), line=line_no) from e
        raise StreamFormatError(f"bad frame: {e!r}", line=line_no) from e


class FrameWriter:
    """Sequential writer for a .frames.jsonl stream (header first)."""

    def __init__(self, path: str, header: StreamHeader):
        self._f = open(path, "w")
        self._f.write(encode_header(header) + "\n")
        self._last_t = None

    def write(self, frame: Frame):
        if self._last_t is not None and frame.t_ms < self._last_t:
            raise StreamFormatError(f"frame {frame.index} timestamp {frame.t_ms} decreases")
        self._last_t = frame.t_ms
        self._f.write(encode_frame(frame) + "\n")

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_stream(path: str) -> tuple[StreamHeader, Iterator[Frame]]:
    """Open a stream, returning its header and a lazy frame iterator."""
    f = open(path, "r")
    first = f.readline()
    if not first:
        f.close()
        raise StreamFormatError("empty stream", line=1)
    header = decode_header(first.rstrip("\n"))

    def frames():
        with f:
            for line_no, line in enumerate(f, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                yield decode_frame(line, line_no=line_no)

    return header, frames()


class DepthSidecarWriter:
    """Appends raw u16 depth frames; layout is width*height*2 bytes per frame."""

    def __init__(self, path: str, width: int, height: int):
        self.width = width
        self.height = height
        self._f = open(path, "wb")
        self._count = 0

    def write(self, depth: DepthFrame) -> int:
        """Writes one frame and returns its sidecar index."""
        if (depth.width, depth.height) != (self.width, self.height):
            raise SidecarError(f"depth {depth.width}x{depth.height} != sidecar {self.width}x{self.height}")
        self._f.write(depth.data.astype("<u2").tobytes())
        idx = self._count
        self._count += 1
        return idx

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def depth_sidecar_read(path: str, frame_index: int, intr: CameraIntrinsics) -> DepthFrame:
    """Read one depth frame from a sidecar file by index."""
    if frame_index < 0:
        raise SidecarError(f"negative frame index {frame_index}")
    nbytes = intr.width * intr.height * 2
    size = os.path.getsize(path)
    offset = frame_index * nbytes
    if offset + nbytes > size:
        raise SidecarError(
            f"frame {frame_index} past end of sidecar ({size} bytes, {nbytes} per frame)"
        )
    with open(path, "rb") as f:
        f.seek(offset)
        buf = f.read(nbytes)
    if len(buf) != nbytes:
        raise SidecarError(f"short read for frame {frame_index}")
    data = np.frombuffer(buf, dtype="<u2").reshape(intr.height, intr.width).copy()
    return DepthFrame(intr.width, intr.height, data.astype(np.uint16), intr.depth_scale)


def replay(
    frames_path: str, depth_path: Optional[str] = None
) -> tuple[StreamHeader, Iterator[tuple[Frame, Optional[DepthFrame]]]]:
    """Iterate a recorded stream, recomputing centroids from depth on ingest.

    Frames that carry centroids on the wire keep them; frames without get
    centroids recomputed when the sidecar provides their depth plane.
    """
    header, frames = read_stream(frames_path)
    intr = header.intrinsics

    def gen():
        for frame in frames:
            depth = None
            if depth_path is not None and frame.depth_ref is not None:
                depth = depth_sidecar_read(depth_path, frame.depth_ref, intr)
            if depth is not None and any(o.centroid is None for o in frame.objects):
                objs = []
                for o in frame.objects:
                    if o.centroid is None:
                        res = compute_centroid(o.mask, depth, intr)
                        if res is not None:
                            o = SceneObject(o.id, o.label, o.mask, res[0], res[1])
                    objs.append(o)
                frame = Frame(frame.index, frame.t_ms, frame.hands, tuple(objs), frame.depth_ref)
            yield frame, depth

    return header, gen()
