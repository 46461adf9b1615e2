"""Command line entry point dispatching every workflow.

Flag resolution order is builtin defaults, then the --config file, then
explicit flags. The resolved configuration is persisted next to the
artifacts as run_manifest.json (no timestamps, so identical invocations
produce identical bytes).
"""
import argparse
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..datakit import (DatasetConfig, FilterConfig, build_dataset,
                       compute_metrics, filter_episode, list_episodes,
                       load_episode)
from ..evalkit import (Expert, MetricsTable, ScriptedExpertConfig, render_csv,
                       render_text, rollout, run_ablation, summarize)
from ..policy import HyperParams, Policy, train
from ..simcore import Simulator, load_sim_bundle
from ..simcore.render import load_png

HP_FLAGS = ("steps", "lr", "batch_size", "chunk_size", "image_size")


def write_manifest(out_dir: Path, command: str, resolved: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command,
           "config": resolved,
           "versions": {"tubepilot": __version__,
                        "numpy": np.__version__,
                        "python": platform.python_version()}}
    with open(out_dir / "run_manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def load_config_file(path) -> dict:
    p = Path(path)
    text = p.read_text()
    if p.suffix in (".yaml", ".yml"):
        import yaml
        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a mapping")
    return doc


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags (flags default to None)."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = load_config_file(args.config)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in defaults:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return merged


def desk_hp(cfg: dict) -> HyperParams:
    over = {k: cfg[k] for k in HP_FLAGS if cfg.get(k) is not None}
    return dataclasses.replace(HyperParams.desk(), **over)


def sim_from_bundle():
    geom, tube, cfg = load_sim_bundle()
    return geom, Simulator(geom, tube, cfg)


# ------------------------------------------------------------- subcommands


def cmd_demo_gen(args) -> int:
    cfg = resolve(args, {"n": 50, "seed": 0, "out": "demos", "frames": True})
    out = Path(cfg["out"])
    write_manifest(out, "demo-gen", cfg)
    geom, sim = sim_from_bundle()
    fc = FilterConfig()
    n_ok = n_train = 0
    for i in range(cfg["n"]):
        seed = cfg["seed"] + i
        agent = Expert(ScriptedExpertConfig.for_geometry(geom, seed=seed))
        res = rollout(agent, sim, seed=seed, out_dir=out / f"ep{i:03d}",
                      record_frames=cfg["frames"])
        ok = res.outcome.status == "success"
        passes = (res.metrics is not None
                  and filter_episode(res.metrics, fc, "training").accepted)
        n_ok += ok
        n_train += passes
        print(f"ep{i:03d} seed={seed} {res.outcome.status:8s} "
              f"steps={res.n_steps:3d} training="
              f"{'accept' if passes else 'reject'}")
    print(f"success {n_ok}/{cfg['n']}, training-accepted "
          f"{n_train}/{cfg['n']}")
    return 0


def cmd_filter(args) -> int:
    cfg = resolve(args, {"data": "demos", "out": "filtered",
                         "mode": "training"})
    out = Path(cfg["out"])
    write_manifest(out, "filter", cfg)
    fc = FilterConfig()
    accepted = []
    dirs = list_episodes(cfg["data"])
    if not dirs:
        raise FileNotFoundError(f"no episodes under {cfg['data']}")
    for d in dirs:
        v = filter_episode(compute_metrics(load_episode(d)), fc,
                           mode=cfg["mode"])
        tag = "accept" if v.accepted else "reject " + ";".join(v.reasons)
        print(f"{d.name}: {tag}")
        if v.accepted:
            accepted.append(d.name)
    with open(out / "accepted.json", "w") as fh:
        json.dump({"mode": cfg["mode"], "root": str(cfg["data"]),
                   "accepted": accepted, "total": len(dirs)},
                  fh, indent=2)
        fh.write("\n")
    print(f"accepted {len(accepted)}/{len(dirs)} ({cfg['mode']})")
    return 0


def cmd_train(args) -> int:
    cfg = resolve(args, {"data": "demos", "out": "trainrun",
                         "variant": "RACCT", "seed": 0,
                         **{k: None for k in HP_FLAGS}})
    out = Path(cfg["out"])
    hp = desk_hp(cfg)
    cfg_resolved = dict(cfg)
    cfg_resolved.update({k: getattr(hp, k) for k in HP_FLAGS})
    write_manifest(out, "train", cfg_resolved)
    ds = build_dataset(cfg["data"], DatasetConfig(chunk_size=hp.chunk_size,
                                                  image_size=hp.image_size))
    print(f"dataset: {len(ds)} windows")
    res = train(ds, hp, variant=cfg["variant"].upper(), seed=cfg["seed"])
    res.policy.save(out / "policy.nkpt")
    np.savetxt(out / "losses.csv", res.losses, fmt="%.17g",
               header="loss", comments="")
    print(f"{res.variant} seed={res.seed} final loss {res.final_loss:.6f}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve(args, {"policy": "trainrun/policy.nkpt", "out": "evalrun",
                         "n": 20, "seed": 10_000, "max_steps": 400,
                         "frames": False, "label": None})
    out = Path(cfg["out"])
    write_manifest(out, "eval", cfg)
    policy = Policy.load(cfg["policy"])
    _, sim = sim_from_bundle()
    results = []
    for j in range(cfg["n"]):
        r = rollout(policy, sim, seed=cfg["seed"] + j,
                    out_dir=out / f"ep{j:03d}", max_steps=cfg["max_steps"],
                    record_frames=cfg["frames"])
        results.append(r)
        print(f"ep{j:03d} seed={r.seed} {r.outcome.status}")
    label = cfg["label"] or policy.variant
    table = MetricsTable(rows=[summarize(label, results)])
    (out / "table.txt").write_text(render_text(table))
    (out / "table.csv").write_text(render_csv(table))
    print(render_text(table), end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = resolve(args, {"data": "demos", "out": "ablation",
                         "variants": "ACT,RACCT", "seeds": "0,1,2",
                         "n_eval": 20, "max_steps": 400, "eval_seed": 10_000,
                         **{k: None for k in HP_FLAGS}})
    out = Path(cfg["out"])
    hp = desk_hp(cfg)
    variants = [v.strip().upper() for v in cfg["variants"].split(",") if v]
    seeds = [int(s) for s in str(cfg["seeds"]).split(",") if s != ""]
    cfg_resolved = dict(cfg, variants=variants, seeds=seeds)
    cfg_resolved.update({k: getattr(hp, k) for k in HP_FLAGS})
    write_manifest(out, "ablate", cfg_resolved)
    ds = build_dataset(cfg["data"], DatasetConfig(chunk_size=hp.chunk_size,
                                                  image_size=hp.image_size))
    print(f"dataset: {len(ds)} windows")
    _, sim = sim_from_bundle()
    result = run_ablation(ds, sim, out, variants=variants, seeds=seeds,
                          n_eval=cfg["n_eval"], hp=hp,
                          eval_seed_base=cfg["eval_seed"],
                          max_steps=cfg["max_steps"], progress=print)
    print(render_text(result.table), end="")
    return 0


def cmd_rollout(args) -> int:
    cfg = resolve(args, {"policy": None, "seed": 0, "out": "rollout_ep",
                         "max_steps": 400, "frames": True})
    out = Path(cfg["out"])
    write_manifest(out, "rollout", cfg)
    geom, sim = sim_from_bundle()
    if cfg["policy"]:
        agent = Policy.load(cfg["policy"])
    else:
        agent = Expert(ScriptedExpertConfig.for_geometry(geom,
                                                         seed=cfg["seed"]))
    res = rollout(agent, sim, seed=cfg["seed"], out_dir=out / "ep000",
                  max_steps=cfg["max_steps"], record_frames=cfg["frames"])
    print(f"outcome {res.outcome.status}"
          + (f" ({res.outcome.reason})" if res.outcome.reason else "")
          + f" after {res.n_steps} steps")
    if res.metrics is not None:
        print(f"peak force {res.metrics.peaks.max():.3f} N, "
              f"duration {res.metrics.duration:.2f} s")
    return 0


def cmd_segment(args) -> int:
    from ..vision import track_tube

    cfg = resolve(args, {"infile": None, "out": None})
    if not cfg["infile"]:
        raise ValueError("segment needs --in <frame.png>")
    src = Path(cfg["infile"])
    img = load_png(src)
    res = track_tube(img)
    sidecar = {"source": src.name,
               "found": bool(res.found),
               "s_kappa": float(res.s_kappa)}
    if res.found:
        sidecar["fit"] = {"a": res.fit.a, "b": res.fit.b, "c": res.fit.c,
                          "residual_rms": res.fit.residual_rms}
        sidecar["skeleton"] = {
            "points": np.asarray(res.skeleton.points).tolist(),
            "mean_width": float(res.skeleton.mean_width),
            "length": float(res.skeleton.length)}
    dest = Path(cfg["out"]) if cfg["out"] \
        else src.with_suffix(".skeleton.json")
    with open(dest, "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"s_kappa {res.s_kappa:.6f} ({'tube found' if res.found else 'no tube'})")
    print(f"sidecar {dest}")
    return 0


def cmd_teleop_serve(args) -> int:
    from ..teleop import BridgeServer

    cfg = resolve(args, {"bind": "127.0.0.1:8765", "out": "teleop_episodes",
                         "seed": 0})
    host, _, port = cfg["bind"].rpartition(":")
    if not host:
        raise ValueError("--bind must look like host:port")
    write_manifest(Path(cfg["out"]), "teleop-serve", cfg)
    server = BridgeServer(host=host, port=int(port), out_root=cfg["out"],
                          base_seed=cfg["seed"])
    server.start()
    # the resolved address matters when port is 0
    print(f"serving on {server.address} (ctrl-c to stop)", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
        print("stopped")
    return 0


def cmd_replay(args) -> int:
    cfg = resolve(args, {"data": None, "tol": 0.0})
    if not cfg["data"]:
        raise ValueError("replay needs --data <episode dir>")
    ep = load_episode(cfg["data"])
    seed = ep.meta["seed"]
    _, sim = sim_from_bundle()
    if abs(sim.cfg.dt - ep.meta["dt"]) > 1e-12:
        raise ValueError("episode dt does not match simulator config")
    state = sim.reset(seed)
    worst = 0.0
    for i in range(len(ep.t) - 1):
        err = float(np.max(np.abs(state.ee_pose - ep.poses[i])))
        worst = max(worst, err)
        state, sample = sim.step(state, ep.actions[i])
        ch_err = float(np.max(np.abs(sample.channels() - ep.channels[i + 1])))
        worst = max(worst, ch_err)
    worst = max(worst, float(np.max(np.abs(state.ee_pose - ep.poses[-1]))))
    ok = worst <= cfg["tol"]
    print(f"replayed {len(ep.t) - 1} steps, max deviation {worst:.3e} "
          f"-> {'match' if ok else 'MISMATCH'}")
    return 0 if ok else 1


# --------------------------------------------------------------- dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubepilot",
        description="Desk-scale soft-tube insertion workflows.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, fn, helptext):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None,
                       help="JSON/YAML file of flag defaults")
        p.add_argument("--out", default=None, help="artifact directory")
        p.set_defaults(fn=fn)
        return p

    p = add("demo-gen", cmd_demo_gen, "record scripted demonstrations")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--frames", action=argparse.BooleanOptionalAction,
                   default=None)

    p = add("filter", cmd_filter, "apply the episode filter to a directory")
    p.add_argument("--data", default=None)
    p.add_argument("--mode", choices=("safety", "training"), default=None)

    p = add("train", cmd_train, "train a policy on recorded episodes")
    p.add_argument("--data", default=None)
    p.add_argument("--variant", default=None)
    for flag in HP_FLAGS:
        p.add_argument(f"--{flag.replace('_', '-')}",
                       type=float if flag == "lr" else int, default=None)

    p = add("eval", cmd_eval, "roll out a trained policy")
    p.add_argument("--policy", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--label", default=None)
    p.add_argument("--frames", action=argparse.BooleanOptionalAction,
                   default=None)

    p = add("ablate", cmd_ablate, "train and compare policy variants")
    p.add_argument("--data", default=None)
    p.add_argument("--variants", default=None)
    p.add_argument("--seeds", default=None)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--eval-seed", type=int, default=None)
    for flag in HP_FLAGS:
        p.add_argument(f"--{flag.replace('_', '-')}",
                       type=float if flag == "lr" else int, default=None)

    p = add("rollout", cmd_rollout, "run one closed-loop episode")
    p.add_argument("--policy", default=None,
                   help="checkpoint path; scripted expert when omitted")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--frames", action=argparse.BooleanOptionalAction,
                   default=None)

    p = add("segment", cmd_segment, "track the tube in one frame")
    p.add_argument("--in", dest="infile", default=None)

    p = add("teleop-serve", cmd_teleop_serve, "serve the console bridge")
    p.add_argument("--bind", default=None)

    p = add("replay", cmd_replay, "re-run a recorded episode through the sim")
    p.add_argument("--data", default=None)
    p.add_argument("--tol", type=float, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 1
    except Exception as e:                     # noqa: BLE001
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
