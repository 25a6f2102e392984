"""Command-line front door.

Subcommands: gen-volume (synthetic fields to QVOL), render (scene to image
plus a stats line), replay (apply an event log headlessly), bench (timed
renders, optional CSV+figure report), validate (check files), serve (run the
wire-protocol engine for a workbench client).

Success exits 0; failures print a single line `error: ...` to stderr and
exit 1. Stats go to standard output as key=value pairs.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

from .context import MODE_ALIASES, CONTEXT_MODES, canonical_mode, write_image
from .session import (
    EventLogError,
    SceneParseError,
    apply_event,
    load_scene,
    parse_event_log,
    render_scene,
    save_scene,
    serialize_scene,
)
from .volume import (
    SYNTHETIC_KINDS,
    SyntheticSpec,
    VolumeFormatError,
    generate_synthetic_volume,
    load_raw_volume,
    save_qvol,
)

_MODE_CHOICES = tuple(CONTEXT_MODES) + tuple(sorted(MODE_ALIASES))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadriclens",
        description="Focus+context volume renderer with deformable quadric lenses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-volume", help="write a synthetic volume as QVOL")
    gen.add_argument("--kind", required=True, choices=SYNTHETIC_KINDS)
    gen.add_argument("--dims", type=int, nargs=3, required=True, metavar=("DX", "DY", "DZ"))
    gen.add_argument("--value", type=float, default=0.5, help="constant level")
    gen.add_argument("--axis", default="x", choices=("x", "y", "z"))
    gen.add_argument("--center", type=float, nargs=3, default=(0.5, 0.5, 0.5))
    gen.add_argument("--radius", type=float, default=0.3)
    gen.add_argument("--width", type=float, default=0.05)
    gen.add_argument("--amplitude", type=float, default=1.0)
    gen.add_argument("--background", type=float, default=0.0)
    gen.add_argument("--dtype", default="f32le", choices=("u8", "u16le", "f32le"))
    gen.add_argument("-o", "--out", required=True)

    ren = sub.add_parser("render", help="render a scene file to an image")
    ren.add_argument("--scene", required=True)
    ren.add_argument("--mode", choices=_MODE_CHOICES, help="context mode override")
    ren.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    ren.add_argument("-o", "--out", required=True, help="output image (.png or .ppm)")

    rep = sub.add_parser("replay", help="apply an event log to a scene headlessly")
    rep.add_argument("--scene", required=True)
    rep.add_argument("--events", required=True)
    rep.add_argument("--out-dir", required=True)
    rep.add_argument(
        "--every",
        type=int,
        default=0,
        help="also render after every K-th event (0: only the final frame)",
    )
    rep.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))

    ben = sub.add_parser("bench", help="repeat renders and report timings")
    ben.add_argument("--scene", required=True)
    ben.add_argument("--mode", choices=_MODE_CHOICES)
    ben.add_argument("--size", type=int, nargs=2, metavar=("W", "H"))
    ben.add_argument("--reps", type=int, default=3)
    ben.add_argument("--report", help="write per-rep CSV here plus a PNG figure alongside")

    val = sub.add_parser("validate", help="check a scene, volume, or event log file")
    val.add_argument("--scene")
    val.add_argument("--volume")
    val.add_argument("--events")

    srv = sub.add_parser("serve", help="serve the engine protocol for a workbench")
    srv.add_argument("--scene", required=True)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=0)
    srv.add_argument("--final-scene", help="write the post-session scene here on exit")
    srv.add_argument(
        "--clients",
        type=int,
        default=1,
        help="number of client connections to serve before exiting",
    )

    return parser


def _stats_line(stats: dict) -> str:
    return (
        f"pixels={stats['pixels']} rays={stats['rays']} "
        f"samples={stats['samples']} wall_ms={stats['wall_ms']:.1f}"
    )


def _apply_overrides(state, mode, size):
    if mode is not None:
        ctx = replace(state.settings.context, mode=canonical_mode(mode))
        state = replace(state, settings=replace(state.settings, context=ctx))
    if size is not None:
        cam = replace(state.camera, width=size[0], height=size[1])
        state = replace(state, camera=cam)
    return state


def _cmd_gen_volume(args) -> int:
    spec = SyntheticSpec(
        kind=args.kind,
        value=args.value,
        axis=args.axis,
        center=tuple(args.center),
        radius=args.radius,
        width=args.width,
        amplitude=args.amplitude,
        background=args.background,
    )
    grid = generate_synthetic_volume(spec, tuple(args.dims))
    save_qvol(grid, args.out, dtype=args.dtype)
    dx, dy, dz = grid.dims
    vmin, vmax = grid.value_range
    print(f"dims={dx}x{dy}x{dz} range={vmin:g} {vmax:g}")
    return 0


def _cmd_render(args) -> int:
    state = load_scene(args.scene)
    state = _apply_overrides(state, args.mode, args.size)
    image, stats = render_scene(state)
    write_image(args.out, image)
    print(_stats_line(stats))
    return 0


def _cmd_replay(args) -> int:
    state = load_scene(args.scene)
    if args.size is not None:
        state = _apply_overrides(state, None, args.size)
    with open(args.events, "r", encoding="utf-8") as fh:
        events = parse_event_log(fh.read())
    os.makedirs(args.out_dir, exist_ok=True)
    frames = 0
    for i, event in enumerate(events, start=1):
        state = apply_event(state, event)
        if args.every > 0 and i % args.every == 0:
            image, stats = render_scene(state)
            write_image(os.path.join(args.out_dir, f"frame_{frames:06d}.png"), image)
            print(_stats_line(stats))
            frames += 1
    image, stats = render_scene(state)
    write_image(os.path.join(args.out_dir, f"frame_{frames:06d}.png"), image)
    print(_stats_line(stats))
    frames += 1
    final_path = os.path.join(args.out_dir, "final.qscene")
    save_scene(state, final_path)
    print(f"events={len(events)} frames={frames} final_scene={final_path}")
    return 0


def _cmd_bench(args) -> int:
    state = load_scene(args.scene)
    state = _apply_overrides(state, args.mode, args.size)
    if args.reps < 1:
        raise ValueError("reps must be >= 1")
    records = []
    for rep in range(1, args.reps + 1):
        t0 = time.perf_counter()
        _, stats = render_scene(state)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        rate = stats["samples"] / (wall_ms / 1000.0) / 1e6 if wall_ms > 0 else 0.0
        records.append(
            {
                "rep": rep,
                "wall_ms": wall_ms,
                "samples": stats["samples"],
                "msamples_per_s": rate,
            }
        )
    walls = [rec["wall_ms"] for rec in records]
    total_samples = sum(rec["samples"] for rec in records)
    total_rate = total_samples / (sum(walls) / 1000.0) / 1e6 if sum(walls) > 0 else 0.0
    print(
        f"reps={args.reps} mean_ms={sum(walls) / len(walls):.1f} "
        f"min_ms={min(walls):.1f} max_ms={max(walls):.1f} "
        f"msamples_per_s={total_rate:.2f}"
    )
    if args.report:
        from .report import write_bench_report

        label = f"{os.path.basename(args.scene)} {state.settings.context.mode} " \
                f"{state.camera.width}x{state.camera.height}"
        csv_path, fig_path = write_bench_report(args.report, records, label)
        print(f"report={csv_path} figure={fig_path}")
    return 0


def _cmd_validate(args) -> int:
    if not (args.scene or args.volume or args.events):
        raise ValueError("nothing to validate: pass --scene, --volume, or --events")
    if args.volume:
        grid = load_raw_volume(args.volume)
        dx, dy, dz = grid.dims
        vmin, vmax = grid.value_range
        print(f"ok volume dims={dx}x{dy}x{dz} range={vmin:g} {vmax:g}")
    if args.scene:
        state = load_scene(args.scene, load_volume=False)
        print(
            f"ok scene lenses={len(state.lenses)} "
            f"volume={state.volume_path if state.volume_path else 'none'}"
        )
    if args.events:
        with open(args.events, "r", encoding="utf-8") as fh:
            events = parse_event_log(fh.read())
        print(f"ok events count={len(events)}")
    return 0


def _cmd_serve(args) -> int:
    from .server import EngineServer

    state = load_scene(args.scene)
    server = EngineServer(state, host=args.host, port=args.port)
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        for _ in range(args.clients):
            server.serve_once()
    finally:
        server.close()
    if args.final_scene:
        save_scene(server.state, args.final_scene)
    return 0


_COMMANDS = {
    "gen-volume": _cmd_gen_volume,
    "render": _cmd_render,
    "replay": _cmd_replay,
    "bench": _cmd_bench,
    "validate": _cmd_validate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (
        ValueError,
        OSError,
        VolumeFormatError,
        SceneParseError,
        EventLogError,
        RuntimeError,
    ) as exc:
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
