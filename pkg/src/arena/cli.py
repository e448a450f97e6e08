"""Command line interface.

Subcommands: serve, gen-missions, plan, replay, eval, eval-det.
All file outputs are written atomically (temp file + rename); identical
inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cdf import MissionSpec, TASK_TYPES, parse_cdf, serialize_cdf
from .errors import ArenaError
from .runtime import episode_log_lines, replay_episode_log
from .util import atomic_write_bytes, atomic_write_text


def _cmd_serve(args) -> int:
    from .server import ArenaServer, serve_forever

    server = ArenaServer(session_limit=args.session_limit,
                         agent_enabled=not args.no_agent,
                         log_dir=args.log_dir, mission_dir=args.missions)
    serve_forever(server, args.host, args.port)
    return 0


def _cmd_gen_missions(args) -> int:
    from .sampler import sample_missions

    types = args.types.split(",") if args.types else list(TASK_TYPES)
    for t in types:
        if t not in TASK_TYPES:
            print(f"unknown task type {t!r}", file=sys.stderr)
            return 2
    pool = [MissionSpec(t) for t in types]
    missions = sample_missions(pool, None, None, seed=args.seed, n=args.n,
                               unique_tool=args.unique_tool)
    out = Path(args.out)
    manifest = {"seed": args.seed, "n": args.n, "types": types,
                "unique_tool": args.unique_tool, "missions": []}
    for cdf in missions:
        name = f"{cdf.cdf_id}.json"
        atomic_write_bytes(out / name, serialize_cdf(cdf))
        manifest["missions"].append({"file": name, "cdf_id": cdf.cdf_id,
                                     "task_type": cdf.task_type})
    atomic_write_text(out / "manifest.json",
                      json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(missions)} missions to {out}")
    return 0


def _cmd_plan(args) -> int:
    from . import planner
    from .pddl import export_pddl

    cdf = parse_cdf(Path(args.cdf).read_text(encoding="utf-8"))
    if args.pddl_out:
        problem = planner.compile_problem(cdf)
        atomic_write_text(args.pddl_out, export_pddl(problem))
    plan, session = planner.demonstrate(cdf, mode=args.mode)
    for i, name in enumerate(plan.op_names):
        print(f"{i + 1:3d}. {name}")
    print(f"plan cost {plan.cost}; replay m={session.goal_m} "
          f"steps={session.steps_used} score={session.score}")
    if args.log_out:
        atomic_write_text(args.log_out, "\n".join(episode_log_lines(session)) + "\n")
    return 0


def _cmd_replay(args) -> int:
    text = Path(args.log).read_text(encoding="utf-8")
    session = replay_episode_log(text)
    print(f"replay OK: m={session.goal_m} phase={session.phase} "
          f"steps={session.steps_used}")
    return 0


def _cmd_eval(args) -> int:
    from .metrics import episode_metrics, summarize_log_lines

    episodes = []
    root = Path(args.episodes)
    for path in sorted(root.rglob("*.jsonl")):
        episodes.append(summarize_log_lines(path.read_text(encoding="utf-8")))
    report = episode_metrics(episodes)
    print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    return 0


def _cmd_eval_det(args) -> int:
    from .metrics import coco_map, load_detection_file, t_map

    gt = load_detection_file(args.gt, with_scores=False)
    det = load_detection_file(args.det, with_scores=True)
    result = {"coco_map": coco_map(gt, det), "t_map": t_map(gt, det)}
    print(json.dumps(result, sort_keys=True, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arena",
                                description="deterministic mission platform")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the websocket session server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8765)
    s.add_argument("--missions", help="directory of mission .json files")
    s.add_argument("--log-dir", help="episode log output directory")
    s.add_argument("--session-limit", type=int, default=32)
    s.add_argument("--no-agent", action="store_true",
                   help="do not route utterances to the scripted agent")
    s.set_defaults(func=_cmd_serve)

    g = sub.add_parser("gen-missions", help="sample solvable missions")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--types", help="comma-separated task types (default: all 12)")
    g.add_argument("--out", required=True)
    g.add_argument("--unique-tool", action="store_true",
                   help="enable exactly one tool per state change")
    g.set_defaults(func=_cmd_gen_missions)

    pl = sub.add_parser("plan", help="plan a mission and replay the demonstration")
    pl.add_argument("--cdf", required=True)
    pl.add_argument("--pddl-out")
    pl.add_argument("--log-out")
    pl.add_argument("--mode", choices=("bfs", "astar"), default="bfs")
    pl.set_defaults(func=_cmd_plan)

    r = sub.add_parser("replay", help="verify an episode log reproduces itself")
    r.add_argument("--log", required=True)
    r.set_defaults(func=_cmd_replay)

    e = sub.add_parser("eval", help="episode metrics over a log directory")
    e.add_argument("--episodes", required=True)
    e.set_defaults(func=_cmd_eval)

    d = sub.add_parser("eval-det", help="detection metrics (COCO mAP, t-mAP)")
    d.add_argument("--gt", required=True)
    d.add_argument("--det", required=True)
    d.set_defaults(func=_cmd_eval_det)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ArenaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
