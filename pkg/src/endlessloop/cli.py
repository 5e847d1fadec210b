"""Command line interface: run a solve, suggest directions, or serve."""

from __future__ import annotations

import argparse
import json
import sys

from .pipeline import ProjectConfig, StageError, run_pipeline, suggest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="endless-loop")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="animate an image region")
    run.add_argument("--image", required=True)
    run.add_argument("--mask", required=True)
    group = run.add_mutually_exclusive_group()
    group.add_argument("--direction", type=float, metavar="DEG",
                       help="motion direction in degrees from +x, y down")
    group.add_argument("--strokes", metavar="JSON",
                       help="strokes.json with {\"strokes\": [{\"points\": [[x,y],...]}]}")
    group.add_argument("--auto-direction", action="store_true")
    run.add_argument("--soft-boundary", action="store_true")
    run.add_argument("--frames", type=int, default=80)
    run.add_argument("--fps", type=float, default=30.0)
    run.add_argument("--mode", choices=["crf", "unary"], default="crf")
    run.add_argument("--out", metavar="DIR", help="write frame_%%04d.png here")
    run.add_argument("--gif", metavar="FILE", help="write an animated GIF here")
    run.add_argument("--debug-dir", metavar="DIR")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--working-size", type=int, default=300)

    sug = sub.add_parser("suggest", help="suggest motion directions")
    sug.add_argument("--image", required=True)

    srv = sub.add_parser("serve", help="run the HTTP job service")
    srv.add_argument("--bind", default="127.0.0.1:8080")
    srv.add_argument("--work-dir")
    srv.add_argument("--max-workers", type=int, default=2)
    srv.add_argument("--static-dir", help="serve the authoring UI from this directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "suggest":
        winners = suggest(args.image)
        print(json.dumps(
            {"directions": [{"x": x, "y": y, "votes": v} for x, y, v in winners]}, indent=2
        ))
        return 0

    if args.command == "serve":
        from .service import serve

        server = serve(args.bind, work_dir=args.work_dir,
                       max_workers=args.max_workers, static_dir=args.static_dir)
        print(f"serving on http://{args.bind}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()
        return 0

    strokes = None
    if args.strokes:
        with open(args.strokes) as f:
            strokes = [st["points"] for st in json.load(f)["strokes"]]
    config = ProjectConfig(
        image_path=args.image,
        mask_path=args.mask,
        strokes=strokes,
        direction_deg=args.direction,
        auto_direction=args.auto_direction,
        soft_boundary=args.soft_boundary,
        frame_count=args.frames,
        fps=args.fps,
        solver_mode="unary-only" if args.mode == "unary" else "crf",
        out_dir=args.out,
        gif_path=args.gif,
        debug_dir=args.debug_dir,
        workers=args.workers,
        working_long_side=args.working_size,
    )
    try:
        seq, diag = run_pipeline(config)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = {
        "frames": len(seq),
        "timings": {k: round(v, 3) for k, v in diag["timings"].items()},
        "warnings": diag["warnings"],
        "config_hash": diag["config_hash"],
    }
    if "outputs" in diag:
        report["outputs"] = {
            "frame_dir": config.out_dir,
            "gif": config.gif_path,
        }
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
