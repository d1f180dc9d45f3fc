"""Command-line entry points.

Commands: simulate (headless experiment -> trial CSV), analyze (CSV ->
accuracy table + confusion matrix + ANOVA), replay (frames file -> event
log), serve (interactive websocket host), record (simulated session ->
frames+depth+event files). All commands are deterministic given --seed.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from pointsel.hand import PointingMode
from pointsel.selector import SelectorConfig
from pointsel.sim import DEFAULT_SEED, SceneSpec, build_scene, run_experiment
from pointsel.stats import (
    accuracy_table,
    anova_report_json,
    confusion,
    format_accuracy_table,
    format_anova,
    per_participant_accuracy,
    read_trial_csv,
    rm_anova2,
    write_trial_csv,
)


def _scene_spec(text: str) -> SceneSpec:
    """Parse a COLSxROWS grid spec, e.g. '3x2'."""
    try:
        cols, rows = text.lower().split("x")
        return SceneSpec(n_cols=int(cols), n_rows=int(rows))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"scene must look like '3x2': {e}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointsel", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the virtual 2x2 experiment, write a trial CSV")
    sim.add_argument("--participants", type=int, default=20)
    sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sim.add_argument("--scene", type=_scene_spec, default=SceneSpec())
    sim.add_argument("--out", default="trials.csv")

    an = sub.add_parser("analyze", help="accuracy table, confusion matrix, RM-ANOVA from a trial CSV")
    an.add_argument("csv")
    an.add_argument("--out", default=None, help="write the ANOVA report as JSON here")

    rp = sub.add_parser("replay", help="run the engine over a recorded frame stream")
    rp.add_argument("frames")
    rp.add_argument("--depth", default=None, help="depth sidecar (default: <frames base>.depth)")
    rp.add_argument("--mode", choices=[m.value for m in PointingMode], default="finger")
    rp.add_argument("--out", default=None, help="event log path (default: stdout)")

    sv = sub.add_parser("serve", help="host an interactive session over a websocket")
    sv.add_argument("--port", type=int, default=8765)
    sv.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sv.add_argument("--mode", choices=["live-sim", "replay"], default="live-sim")
    sv.add_argument("--scene", type=_scene_spec, default=SceneSpec())
    sv.add_argument("--out", default=None, help="trial CSV written when a block completes")

    rc = sub.add_parser("record", help="record a simulated session to frames+depth+event files")
    rc.add_argument("--seed", type=int, default=DEFAULT_SEED)
    rc.add_argument("--mode", choices=[m.value for m in PointingMode], default="finger")
    rc.add_argument("--scene", type=_scene_spec, default=SceneSpec())
    rc.add_argument("--trials", type=int, default=6)
    rc.add_argument("--out", default="session", help="output base path")
    return p


def cmd_simulate(args) -> int:
    records = run_experiment(args.participants, scene=build_scene(args.scene), seed=args.seed)
    write_trial_csv(records, args.out)
    print(f"wrote {len(records)} trials to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    records = read_trial_csv(args.csv)
    print(format_accuracy_table(accuracy_table(records)))
    cm = confusion(records)
    print(f"\nOverall accuracy: {cm.accuracy:.3f}")
    print("Confusion matrix (rows = target, last column = none):")
    header = "".join(f"{t:>6}" for t in cm.targets) + f"{'none':>6}"
    print(" " * 6 + header)
    for i, t in enumerate(cm.targets):
        print(f"{t:>6}" + "".join(f"{int(c):>6}" for c in cm.counts[i]))
    _, acc = per_participant_accuracy(records)
    result = rm_anova2(acc)
    print()
    print(format_anova(result))
    if args.out:
        with open(args.out, "w") as f:
            f.write(anova_report_json(result) + "\n")
        print(f"\nwrote ANOVA report to {args.out}")
    return 0


def cmd_replay(args) -> int:
    from pointsel.frameio import StreamFormatError, replay
    from pointsel.selector import FrameStreamError, event_log_lines, run_stream

    depth = args.depth
    if depth is None and args.frames.endswith(".frames.jsonl"):
        depth = args.frames[: -len(".frames.jsonl")] + ".depth"
    try:
        header, pairs = replay(args.frames, depth)
        frames = []
        depths = {}
        for frame, d in pairs:
            depths[frame.index] = d
            frames.append(frame)
        cfg = SelectorConfig(mode=PointingMode(args.mode))
        events, _ = run_stream(frames, cfg, header.intrinsics, lambda fr: depths.get(fr.index))
    except (StreamFormatError, FrameStreamError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    text = event_log_lines(events)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        print(f"wrote {len(events)} events to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(args) -> int:
    import asyncio

    from pointsel.service import Session, serve

    session = Session(
        mode=args.mode, scene=build_scene(args.scene), seed=args.seed, out=args.out
    )
    print(f"serving on ws://127.0.0.1:{args.port} ({args.mode})")
    try:
        asyncio.run(serve(session, port=args.port))
    except KeyboardInterrupt:
        pass
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


def cmd_record(args) -> int:
    from pointsel.service import record_session

    cfg = SelectorConfig(mode=PointingMode(args.mode))
    paths = record_session(
        args.out, scene=build_scene(args.scene), cfg=cfg, seed=args.seed, trials=args.trials
    )
    for path in paths:
        print(f"wrote {path}")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "analyze": cmd_analyze,
        "replay": cmd_replay,
        "serve": cmd_serve,
        "record": cmd_record,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
