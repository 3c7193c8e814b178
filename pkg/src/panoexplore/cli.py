"""Command-line interface.

Every subcommand is deterministic given --seed and returns exit code 0 on
success, 1 on domain errors (with a machine-readable record on stderr) and 2
on usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .eqa import (BeliefAgent, EvalReport, OmniscientAgent, RandomAgent, RuleAgent,
                  StubJudge, run_suite)
from .errors import PanoExploreError
from .explore import ExplorationConfig, ExplorationSession
from .imageio import save_panorama
from .reconstruct import bev, pointcloud, write_ply
from .store import (SessionStore, append_trajectory, make_generator,
                    read_trajectory, replay_trajectory)
from .suite import builtin_suite
from .world import (CAMERA_HEIGHT, Pose, Scene, SceneParams, generate_dataset,
                    generate_scene, render_depth, render_panorama)

AGENTS = {"random": RandomAgent, "rule": RuleAgent, "omniscient": OmniscientAgent,
          "belief": BeliefAgent}


def _parse_pose(text: str | None, scene: Scene) -> Pose:
    if not text:
        return Pose((0.0, scene.ground_height + CAMERA_HEIGHT, 0.0), 0.0)
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise PanoExploreError("pose must be x,y,z,yaw")
    return Pose(tuple(parts[:3]), parts[3])


def _load_scene(args) -> Scene:
    if getattr(args, "scene", None):
        return Scene.load(args.scene)
    params = SceneParams(density=getattr(args, "density", 2.0),
                         extent=getattr(args, "extent", 40.0))
    return generate_scene(getattr(args, "seed", 0) or 0, params)


def _generator_spec(args) -> dict:
    spec = {"kind": args.generator}
    if args.generator == "noisy-oracle":
        spec["sigma"] = args.sigma
        spec["seed"] = args.seed or 0
    return spec


def _sha256(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def cmd_scene_gen(args) -> int:
    scene = generate_scene(args.seed, SceneParams(density=args.density, extent=args.extent))
    out = Path(args.out)
    scene.save(out)
    print(f"wrote {out} ({len(scene.primitives)} primitives)")
    return 0


def cmd_render(args) -> int:
    scene = _load_scene(args)
    pose = _parse_pose(args.pose, scene)
    img = render_panorama(scene, pose, args.width, args.height)
    save_panorama(args.out, img)
    print(f"wrote {args.out}")
    if args.depth_out:
        depth = render_depth(scene, pose, args.width, args.height)
        np.savez_compressed(args.depth_out, depth=depth)
        print(f"wrote {args.depth_out}")
    return 0


def cmd_explore_step(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = SessionStore(args.store) if args.store else None
    if store and args.session:
        session, scene, gen_spec = store.load_session(args.session)
    else:
        scene = _load_scene(args)
        pose = _parse_pose(args.pose, scene)
        gen_spec = _generator_spec(args)
        session = ExplorationSession.from_scene(scene, pose, make_generator(gen_spec, scene),
                                                args.width, args.height)
    config = ExplorationConfig(np.deg2rad(args.heading_deg), args.distance,
                               args.frames, args.vertical)
    frames = session.step(config)
    refs = []
    for k, frame in enumerate(frames):
        path = out / f"step{len(session.history)-1:03d}_frame{k:03d}.png"
        save_panorama(path, frame)
        refs.append(path.name)
    log = out / "trajectory.jsonl"
    if not log.exists():
        header = {"header": {"scene": scene.to_json(), "generator": gen_spec,
                             "origin_pose": session.origin_pose.to_json(),
                             "width": session.width, "height": session.height}}
        log.write_text(json.dumps(header) + "\n")
    append_trajectory(log, len(session.history) - 1, config, session.imagined_pose,
                      refs, view_sha256=_sha256(session.current_view))
    if store:
        sid = store.save_session(session, scene, gen_spec, args.session)
        print(f"session {sid}")
    print(f"stepped to {session.imagined_pose.to_json()}; {len(frames)} frames -> {out}")
    return 0


def cmd_explore_goal(args) -> int:
    from .explore import SeekPilot, run_goal_driven

    scene = _load_scene(args)
    pose = _parse_pose(args.pose, scene)
    gen_spec = _generator_spec(args)
    session = ExplorationSession.from_scene(scene, pose, make_generator(gen_spec, scene),
                                            args.width, args.height)
    pilot = SeekPilot(session, scene, args.target_tag)
    result = run_goal_driven(session, args.goal, pilot, args.budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_panorama(out / "final.png", result.final_view)
    summary = {"outcome": result.outcome, "steps": len(result.configs),
               "final_pose": session.imagined_pose.to_json()}
    (out / "goal_run.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def _run_ielc(args, n_loops: int) -> int:
    scene = _load_scene(args)
    gen_spec = _generator_spec(args)

    def factory(loop_index):
        spec = dict(gen_spec)
        if spec["kind"] == "noisy-oracle":
            spec["seed"] = int(spec.get("seed", 0)) + loop_index
        return make_generator(spec, scene)

    report = metrics_mod.ielc(scene, factory, n_loops=n_loops,
                              bounds=metrics_mod.LoopBounds(args.max_rotations,
                                                            args.max_distance),
                              width=args.width, height=args.height, seed=args.seed or 0)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2))
        print(f"wrote {args.out}")
    if getattr(args, "csv", None):
        Path(args.csv).write_text(report.to_csv())
        print(f"wrote {args.csv}")
    print(report.format_grid())
    print(f"IELC aggregate over {len(report.records)} loops: {report.aggregate:.3e}"
          + (" (partial)" if report.partial else ""))
    return 0


def cmd_explore_loop(args) -> int:
    return _run_ielc(args, args.n)


def cmd_ielc_run(args) -> int:
    return _run_ielc(args, args.n)


def cmd_dataset_gen(args) -> int:
    scene = _load_scene(args)
    rng = np.random.default_rng(args.seed or 0)
    _, manifest = generate_dataset(scene, args.n, rng, args.width, args.height,
                                   length=args.length, frames=args.frames,
                                   out_dir=args.out)
    print(f"wrote {args.n} path videos to {args.out} "
          f"({manifest['paths'][0]['frame_count']} frames each)")
    return 0


def cmd_eqa_run(args) -> int:
    suite = builtin_suite()
    if args.category:
        suite = [s for s in suite if s.category == args.category]
    agent = AGENTS[args.agent](args.seed or 0) if args.agent == "random" else AGENTS[args.agent]()
    records = run_suite(suite, agent, args.mode)
    judge = StubJudge() if args.judge == "stub" else None
    report = EvalReport.build(records, args.mode, args.agent, judge)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2))
        print(f"wrote {args.out}")
    print(f"decision accuracy: {report.decision_accuracy:.2f}%")
    print(f"gold-action confidence: {report.gold_action_confidence:.2f}%")
    if report.logic_accuracy is not None:
        print(f"logic accuracy: {report.logic_accuracy:.2f}%")
    else:
        print(f"logic accuracy: absent ({report.logic_accuracy_error})")
    return 0


def cmd_pointcloud(args) -> int:
    scene = _load_scene(args)
    pose = _parse_pose(args.pose, scene)
    img = render_panorama(scene, pose, args.width, args.height)
    depth = render_depth(scene, pose, args.width, args.height)
    pts, cols = pointcloud(img, depth)
    write_ply(args.out, pts, cols)
    print(f"wrote {args.out} ({len(pts)} points)")
    return 0


def cmd_bev(args) -> int:
    scene = _load_scene(args)
    pose = _parse_pose(args.pose, scene)
    gen_spec = _generator_spec(args)
    session = ExplorationSession.from_scene(scene, pose, make_generator(gen_spec, scene),
                                            args.width, args.height)
    top = bev(session, args.height_m, args.face_size)
    save_panorama(args.out, top, projection="cube-face-bottom")
    print(f"wrote {args.out}")
    return 0


def cmd_replay(args) -> int:
    records = read_trajectory(args.trajectory)
    if not records or "header" not in records[0]:
        raise PanoExploreError("trajectory file lacks a header record")
    header = records[0]["header"]
    steps = records[1:]
    scene = Scene.from_json(header["scene"])
    views, session = replay_trajectory(steps, scene, header["generator"],
                                       Pose.from_json(header["origin_pose"]),
                                       header["width"], header["height"])
    mismatches = 0
    for rec, view in zip(steps, views):
        want = rec.get("view_sha256")
        if want and want != _sha256(view):
            mismatches += 1
    if args.out:
        save_panorama(args.out, session.current_view)
        print(f"wrote {args.out}")
    if mismatches:
        print(f"replay FAILED: {mismatches}/{len(steps)} steps diverged", file=sys.stderr)
        return 1
    print(f"replay OK: {len(steps)} steps, final view sha256 {_sha256(session.current_view)[:16]}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(args.store), host=args.host, port=args.port)
    return 0


def _add_common_scene_args(p, with_pose: bool = True):
    p.add_argument("--scene", help="scene JSON file (otherwise generated from --seed)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=2.0)
    p.add_argument("--extent", type=float, default=40.0)
    if with_pose:
        p.add_argument("--pose", help="x,y,z,yaw (default: spawn at origin)")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=256)


def _add_generator_args(p):
    p.add_argument("--generator", choices=["oracle", "noisy-oracle"], default="oracle")
    p.add_argument("--sigma", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panoexplore")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scene", help="scene operations")
    scene_sub = p.add_subparsers(dest="scene_command", required=True)
    g = scene_sub.add_parser("gen", help="generate a procedural scene")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--density", type=float, default=2.0)
    g.add_argument("--extent", type=float, default=40.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_scene_gen)

    p = sub.add_parser("render", help="render a panorama at a pose")
    _add_common_scene_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--depth-out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("explore", help="exploration operations")
    explore_sub = p.add_subparsers(dest="explore_command", required=True)

    e = explore_sub.add_parser("step", help="one imaginative step")
    _add_common_scene_args(e)
    _add_generator_args(e)
    e.add_argument("--heading-deg", type=float, default=0.0)
    e.add_argument("--distance", type=float, default=4.0)
    e.add_argument("--frames", type=int)
    e.add_argument("--vertical", type=float, default=0.0)
    e.add_argument("--out", required=True)
    e.add_argument("--store", help="session store directory")
    e.add_argument("--session", help="existing session id to continue")
    e.set_defaults(func=cmd_explore_step)

    e = explore_sub.add_parser("loop", help="small loop-consistency run")
    _add_common_scene_args(e, with_pose=False)
    _add_generator_args(e)
    e.add_argument("--n", type=int, default=20)
    e.add_argument("--max-rotations", type=int, default=9)
    e.add_argument("--max-distance", type=float, default=20.0)
    e.add_argument("--out")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_explore_loop)

    e = explore_sub.add_parser("goal", help="goal-driven exploration (seek pilot)")
    _add_common_scene_args(e)
    _add_generator_args(e)
    e.add_argument("--goal", default="reach the target")
    e.add_argument("--target-tag", default="ambulance")
    e.add_argument("--budget", type=int, default=16)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_explore_goal)

    p = sub.add_parser("ielc", help="loop-consistency metric")
    ielc_sub = p.add_subparsers(dest="ielc_command", required=True)
    e = ielc_sub.add_parser("run", help="full IELC protocol")
    _add_common_scene_args(e, with_pose=False)
    _add_generator_args(e)
    e.add_argument("--n", type=int, default=1000)
    e.add_argument("--max-rotations", type=int, default=9)
    e.add_argument("--max-distance", type=float, default=20.0)
    e.add_argument("--out")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_ielc_run)

    p = sub.add_parser("dataset", help="dataset operations")
    ds_sub = p.add_subparsers(dest="dataset_command", required=True)
    e = ds_sub.add_parser("gen", help="render straight-path videos")
    _add_common_scene_args(e, with_pose=False)
    e.add_argument("--n", type=int, default=1)
    e.add_argument("--length", type=float, default=20.0)
    e.add_argument("--frames", type=int, default=50)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_dataset_gen)

    p = sub.add_parser("eqa", help="embodied QA")
    eqa_sub = p.add_subparsers(dest="eqa_command", required=True)
    e = eqa_sub.add_parser("run", help="evaluate an agent on the built-in suite")
    e.add_argument("--agent", choices=sorted(AGENTS), default="random")
    e.add_argument("--mode", choices=["unimodal", "multimodal", "imagination"],
                   default="unimodal")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--category", choices=["single-agent", "multi-agent"])
    e.add_argument("--judge", choices=["stub", "none"], default="stub")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eqa_run)

    p = sub.add_parser("pointcloud", help="depth back-projection to a PLY point cloud")
    _add_common_scene_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pointcloud)

    p = sub.add_parser("bev", help="bird's-eye view via upward exploration")
    _add_common_scene_args(p)
    _add_generator_args(p)
    p.add_argument("--height-m", type=float, default=30.0)
    p.add_argument("--face-size", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bev)

    p = sub.add_parser("replay", help="re-execute a trajectory log and verify")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--store", default="./panoexplore-store")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


#: keys a config file may default; flags on the command line still win
CONFIG_KEYS = ("seed", "density", "extent", "width", "height", "generator",
               "sigma", "n", "max_rotations", "max_distance", "store")


def _extract_config(argv):
    """Pull --config out of argv and return (defaults dict, remaining argv)."""
    argv = list(argv)
    for i, arg in enumerate(argv):
        if arg == "--config":
            if i + 1 >= len(argv):
                raise PanoExploreError("--config needs a file path")
            doc = json.loads(Path(argv[i + 1]).read_text())
            unknown = set(doc) - set(CONFIG_KEYS)
            if unknown:
                raise PanoExploreError(f"unknown config keys {sorted(unknown)}")
            return doc, argv[:i] + argv[i + 2:]
        if arg.startswith("--config="):
            doc = json.loads(Path(arg.split("=", 1)[1]).read_text())
            unknown = set(doc) - set(CONFIG_KEYS)
            if unknown:
                raise PanoExploreError(f"unknown config keys {sorted(unknown)}")
            return doc, argv[:i] + argv[i + 1:]
    return {}, argv


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        defaults, argv = _extract_config(argv)
    except PanoExploreError as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1
    parser = build_parser()
    if defaults:
        parser.set_defaults(**defaults)
        for action in parser._subparsers._group_actions[0].choices.values():
            action.set_defaults(**defaults)
            sub = getattr(action, "_subparsers", None)
            if sub is not None:
                for nested in sub._group_actions[0].choices.values():
                    nested.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PanoExploreError as exc:
        record = {"error": type(exc).__name__, "detail": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
