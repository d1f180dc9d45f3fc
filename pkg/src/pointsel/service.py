"""Session host: bridges the selection engine to an interactive client.

The session logic is synchronous (`Session`): control messages mutate state,
`tick()` advances the engine one frame and returns the messages to transmit.
`serve()` wraps one Session in a websocket host that steps the engine on a
timer and never blocks stepping on a slow client — events queue up, view
frames are latest-wins and may be dropped for the view, never for the engine
or the log.

Wire schema (JSON text messages, one per websocket message):
  server -> client:
    {"type": "frame", "t", "hands_present", and with feedback ON also
     "objects" (outline polygons), "hands" (landmark pixels), "preselected"}
    {"type": "event", "t", "event", "object"}
    {"type": "instruction", "target", "label"}
    {"type": "trial_result", "target", "selected", "correct"}
    {"type": "block_complete", "trials", "csv"}
    {"type": "warning", "message"}
  client -> server:
    {"type": "aim", "u", "v"}           screen point, unprojected to the table
    {"type": "pinch_down"} / {"type": "pinch_up"}
    {"type": "set_condition", "mode": "finger"|"wrist", "feedback": "on"|"off"}
    {"type": "start_trial_block", "selections_per_object": int}
    {"type": "load_replay", "path": str}
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import replace
from typing import Iterator, Optional

import numpy as np

from pointsel.frameio import Frame, replay
from pointsel.geometry import GeometryError, Point3, deproject
from pointsel.hand import NUM_LANDMARKS, PointingMode
from pointsel.scene import DepthFrame, mask_outline
from pointsel.selector import Engine, SelectionEvent, SelectorConfig
from pointsel.sim import (
    DEFAULT_SEED,
    ParticipantModel,
    Scene,
    build_scene,
    synth_frame,
)
from pointsel.stats import Condition, TrialRecord, write_trial_csv

# The interactive virtual hand tracks the cursor exactly; determinism of a
# scripted session depends on it.
NOISELESS = ParticipantModel(
    sigma_kp=0.0,
    frame_jitter_ratio=0.0,
    wrist_bias_deg=0.0,
    wrist_bias_sd_deg=0.0,
    wrist_bias_rho=0.0,
)


def _warning(message: str) -> dict:
    return {"type": "warning", "message": message}


def _event_msg(e: SelectionEvent) -> dict:
    return {"type": "event", "t": e.t_ms, "event": e.kind, "object": e.object_id}


class Session:
    """One interactive selection session (live-sim or replay)."""

    def __init__(
        self,
        mode: str = "live-sim",
        scene: Optional[Scene] = None,
        cfg: SelectorConfig = SelectorConfig(),
        seed: int = DEFAULT_SEED,
        fps: float = 30.0,
        out: Optional[str] = None,
        trial_timeout_s: float = 20.0,
    ):
        if mode not in ("live-sim", "replay"):
            raise ValueError(f"unknown session mode {mode!r}")
        self.mode = mode
        self.scene = scene if scene is not None else build_scene()
        self.cfg = cfg
        self.fps = fps
        self.out = out
        self.trial_timeout_frames = int(round(trial_timeout_s * fps))
        self.rng = np.random.default_rng(seed)
        self.feedback = True
        self.engine = Engine(cfg, self.scene.intr)
        self._outlines = {
            o.id: [[int(u), int(v)] for u, v in mask_outline(o.mask)]
            for o in self.scene.objects
        }
        self._tick = 0
        self._aim: Optional[Point3] = None
        self._pinch = False
        self._replay_iter: Optional[Iterator[tuple[Frame, Optional[DepthFrame]]]] = None
        # Trial block state.
        self._targets: list[int] = []
        self._trial_idx = 0
        self._trial_start_tick = 0
        self._records: list[TrialRecord] = []
        self.event_log: list[SelectionEvent] = []

    # -- control ------------------------------------------------------------

    @property
    def in_block(self) -> bool:
        return self._trial_idx < len(self._targets)

    def handle(self, msg: dict) -> list[dict]:
        kind = msg.get("type")
        if kind == "aim":
            if self.mode != "live-sim":
                return [_warning("aim ignored in replay mode")]
            try:
                self._aim = deproject(
                    float(msg["u"]), float(msg["v"]), self.scene.spec.table_depth, self.scene.intr
                )
            except (GeometryError, KeyError, TypeError, ValueError):
                self._aim = None  # off-screen: hand leaves the frame
            return []
        if kind == "pinch_down" or kind == "pinch_up":
            if self.mode != "live-sim":
                return [_warning(f"{kind} ignored in replay mode")]
            self._pinch = kind == "pinch_down"
            return []
        if kind == "set_condition":
            if self.in_block:
                return [_warning("set_condition ignored during a trial block")]
            try:
                pm = PointingMode(msg["mode"])
                feedback = {"on": True, "off": False}[msg["feedback"]]
            except (KeyError, ValueError):
                return [_warning(f"malformed set_condition: {msg}")]
            self.cfg = replace(self.cfg, mode=pm)
            self.feedback = feedback
            self.engine = Engine(self.cfg, self.scene.intr)
            return []
        if kind == "start_trial_block":
            if self.mode != "live-sim":
                return [_warning("trial blocks require live-sim mode")]
            if self.in_block:
                return [_warning("a trial block is already running")]
            per_object = int(msg.get("selections_per_object", 2))
            targets = [o.id for o in self.scene.objects for _ in range(per_object)]
            self.rng.shuffle(targets)
            self._targets = targets
            self._trial_idx = 0
            self._trial_start_tick = self._tick
            self._records = []
            return [self._instruction()]
        if kind == "load_replay":
            if self.mode != "replay":
                return [_warning("load_replay requires replay mode")]
            try:
                _, pairs = replay(msg["path"], msg.get("depth"))
            except (OSError, KeyError, ValueError) as e:
                return [_warning(f"cannot load replay: {e}")]
            self._replay_iter = pairs
            return []
        return [_warning(f"unknown or inapplicable message type {kind!r}")]

    # -- stepping -----------------------------------------------------------

    def tick(self) -> list[dict]:
        """Advance one engine frame; returns messages to transmit, the last
        being the FrameView for this frame (if one was produced)."""
        if self.mode == "replay":
            return self._tick_replay()
        t_ms = self._tick / self.fps * 1000.0
        if self._aim is not None:
            frame = synth_frame(
                self.scene,
                self._aim,
                NOISELESS,
                self.rng,
                pinch_closed=self._pinch,
                index=self._tick,
                t_ms=t_ms,
            )
        else:
            frame = Frame(self._tick, t_ms, hands=(), objects=self.scene.objects)
        events = self.engine.step(frame, self.scene.depth)
        self.event_log.extend(events)
        self._tick += 1

        out: list[dict] = []
        for e in events:
            if not self.feedback and e.kind in ("preselect", "select"):
                continue  # manipulation integrity: no preselection info client-side
            out.append(_event_msg(e))
        out.extend(self._advance_block(events, t_ms))
        out.append(self._frame_view(frame, t_ms))
        return out

    def _tick_replay(self) -> list[dict]:
        if self._replay_iter is None:
            return []
        pair = next(self._replay_iter, None)
        if pair is None:
            self._replay_iter = None
            return [{"type": "block_complete", "trials": 0, "csv": None}]
        frame, depth = pair
        events = self.engine.step(frame, depth)
        self.event_log.extend(events)
        out = [_event_msg(e) for e in events]
        out.append(self._frame_view(frame, frame.t_ms))
        return out

    def _frame_view(self, frame: Frame, t_ms: float) -> dict:
        view: dict = {
            "type": "frame",
            "t": t_ms,
            "hands_present": self.engine.hands_present,
        }
        if self.feedback:
            view["objects"] = [
                {"id": o.id, "label": o.label, "outline": self._outlines.get(o.id, [])}
                for o in frame.objects
            ]
            view["hands"] = [
                [[float(u), float(v)] for u, v in h.landmarks] for h in frame.hands
            ]
            view["preselected"] = self.engine.preselection
        return view

    def _instruction(self) -> dict:
        target = self._targets[self._trial_idx]
        label = next(o.label for o in self.scene.objects if o.id == target)
        return {"type": "instruction", "target": target, "label": label}

    def _advance_block(self, events: list[SelectionEvent], t_ms: float) -> list[dict]:
        if not self.in_block:
            return []
        target = self._targets[self._trial_idx]
        selected: Optional[int] = None
        done = False
        for e in events:
            if e.kind == "select":
                selected = e.object_id
                done = True
        if not done and self._tick - self._trial_start_tick >= self.trial_timeout_frames:
            done = True
        if not done:
            return []
        out: list[dict] = []
        if selected is None:
            out.append({"type": "event", "t": t_ms, "event": "timeout", "object": None})
        elapsed = max(self._tick - self._trial_start_tick, 1) / self.fps
        self._records.append(
            TrialRecord(
                participant=0,
                condition=Condition(self.cfg.mode, self.feedback),
                target=target,
                selected=selected,
                time_s=elapsed,
            )
        )
        out.append(
            {
                "type": "trial_result",
                "target": target,
                "selected": selected,
                "correct": selected == target,
            }
        )
        self._trial_idx += 1
        self._trial_start_tick = self._tick
        if self.in_block:
            out.append(self._instruction())
        else:
            csv_path = None
            if self.out:
                write_trial_csv(self._records, self.out)
                csv_path = self.out
            out.append(
                {"type": "block_complete", "trials": len(self._records), "csv": csv_path}
            )
        return out

    @property
    def records(self) -> list[TrialRecord]:
        return list(self._records)


def record_session(
    out_base: str,
    scene: Optional[Scene] = None,
    cfg: SelectorConfig = SelectorConfig(),
    seed: int = DEFAULT_SEED,
    trials: int = 6,
    fps: float = 30.0,
    pm: Optional[ParticipantModel] = None,
) -> tuple[str, str, str]:
    """Record a simulated session to wire files.

    Writes {out_base}.frames.jsonl, {out_base}.depth, {out_base}.events.jsonl
    and returns the three paths. The event log comes from stepping the engine
    over the exact frames written, so replaying the files reproduces it
    byte for byte. Deterministic given the seed.
    """
    from pointsel.frameio import DepthSidecarWriter, FrameWriter, StreamHeader
    from pointsel.selector import write_event_log

    if scene is None:
        scene = build_scene()
    if pm is None:
        pm = ParticipantModel()
    rng = np.random.default_rng(seed)
    frames_path = f"{out_base}.frames.jsonl"
    depth_path = f"{out_base}.depth"
    events_path = f"{out_base}.events.jsonl"

    engine = Engine(cfg, scene.intr)
    events: list[SelectionEvent] = []
    with DepthSidecarWriter(depth_path, scene.intr.width, scene.intr.height) as dw:
        depth_ref = dw.write(scene.depth)  # constant plane, shared by all frames
        header = StreamHeader(intrinsics=scene.intr, fps_hint=fps, producer="pointsel record")
        with FrameWriter(frames_path, header) as fw:
            index = 0
            for _ in range(trials):
                target = int(rng.integers(0, len(scene.objects)))
                aim = scene.centroid_of(target)
                offsets = rng.normal(0.0, pm.sigma_kp, (NUM_LANDMARKS, 3))
                bias = pm.wrist_bias_deg + float(rng.normal(0.0, pm.wrist_bias_sd_deg))
                settle = 12
                click = max(pm.click_frames, cfg.pinch_dwell_frames + 1)
                for k in range(settle + click):
                    frame = synth_frame(
                        scene,
                        aim,
                        pm,
                        rng,
                        pinch_closed=k >= settle,
                        attempt_offsets=offsets,
                        attempt_bias_deg=bias,
                        index=index,
                        t_ms=index / fps * 1000.0,
                    )
                    frame = replace(frame, depth_ref=depth_ref)
                    fw.write(frame)
                    events.extend(engine.step(frame, scene.depth))
                    index += 1
    write_event_log(events, events_path)
    return frames_path, depth_path, events_path


async def serve(
    session: Session,
    host: str = "127.0.0.1",
    port: int = 8765,
    *,
    ready: Optional[asyncio.Event] = None,
    max_ticks: Optional[int] = None,
):
    """Host one Session on a websocket; one client at a time.

    The engine ticks at session.fps regardless of the client. Events and trial
    messages are queued losslessly; frame views go through a latest-wins slot
    so a slow client only drops views.
    """
    import websockets

    clients: set = set()
    queue: asyncio.Queue = asyncio.Queue()
    frame_slot: dict = {}
    frame_ready = asyncio.Event()

    async def handler(ws):
        if clients:
            await ws.close(1013, "session busy")
            return
        clients.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("not an object")
                except ValueError as e:
                    await queue.put(_warning(f"malformed message: {e}"))
                    continue
                for reply in session.handle(msg):
                    await queue.put(reply)
        finally:
            clients.discard(ws)

    async def ticker():
        period = 1.0 / session.fps
        n = 0
        while max_ticks is None or n < max_ticks:
            for msg in session.tick():
                if msg["type"] == "frame":
                    frame_slot["latest"] = msg
                    frame_ready.set()
                else:
                    await queue.put(msg)
            n += 1
            await asyncio.sleep(period)

    async def sender():
        while True:
            get_event = asyncio.ensure_future(queue.get())
            get_frame = asyncio.ensure_future(frame_ready.wait())
            done, pending = await asyncio.wait(
                {get_event, get_frame}, return_when=asyncio.FIRST_COMPLETED
            )
            for p in pending:
                p.cancel()
            msgs = []
            if get_event in done:
                msgs.append(get_event.result())
            if get_frame in done:
                frame_ready.clear()
                msgs.append(frame_slot.pop("latest", None))
            for msg in msgs:
                if msg is None:
                    continue
                for ws in list(clients):
                    try:
                        await ws.send(json.dumps(msg))
                    except Exception:
                        clients.discard(ws)

    async with websockets.serve(handler, host, port):
        if ready is not None:
            ready.set()
        tasks = [asyncio.ensure_future(ticker()), asyncio.ensure_future(sender())]
        try:
            await tasks[0]  # runs forever unless max_ticks is set
        finally:
            for t in tasks:
                t.cancel()
