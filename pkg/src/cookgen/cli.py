"""Command-line front end.

Subcommands: synth, split, train-cis, train-gen, generate, monitor, eval,
quantize, report. Training commands take a single JSON run config (paths in
it are resolved relative to the config file); every command drops a
``run_manifest.json`` capturing command, config, seed, and version so reruns
are auditable.

Exit codes: 0 ok, 1 runtime failure (diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

import numpy as np

from .archive import QuantScheme, default_quant_scheme, load_weights, quantize_archive, save_weights
from .cis import CisTrainConfig, EmbeddingNet, EmbeddingNetConfig, train_cis, write_loss_csv
from .conditioning import ContextIndex
from .images import load_png, save_png
from .metrics import eval_state_table, trajectory_report
from .monitor import MonitorConfig, run_session_offline
from .nets import (
    DiscriminatorConfig,
    DiscriminatorNet,
    GeneratorConfig,
    GeneratorNet,
    expected_generator_param_count,
    generate,
    param_census,
)
from .sessions import (
    DatasetSplit,
    load_session,
    load_sessions,
    load_spec_file,
    pair_raw_state,
    split_dataset,
    synth_dataset,
)
from .training import GenTrainConfig, train_generator, write_gen_loss_csv


def version_string() -> str:
    """git-describe of the working tree when available, else the package version."""
    try:
        proc = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
        if proc.returncode == 0 and proc.stdout.strip():
            return proc.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__

    return f"cookgen-{__version__}"


def write_run_manifest(out_dir, command: str, config: dict, seed: int | None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": version_string(),
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _resolve(base_dir: str, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def _load_run_config(path: str) -> tuple[dict, str]:
    with open(path) as fh:
        cfg = json.load(fh)
    return cfg, os.path.dirname(os.path.abspath(path))


def _sessions_for_split(data_dir: str, split_path: str | None, part: str):
    sessions = load_sessions(data_dir)
    if split_path is None:
        return sessions
    with open(split_path) as fh:
        split = DatasetSplit.from_dict(json.load(fh))
    wanted = set(getattr(split, part))
    chosen = [s for s in sessions if s.session_id in wanted]
    missing = wanted - {s.session_id for s in chosen}
    if missing:
        raise ValueError(f"split names sessions absent from {data_dir}: {sorted(missing)[:5]}")
    return chosen


def _grid(rows: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    h, w, _ = rows[0][0].shape
    n_cols = max(len(r) for r in rows)
    out = np.full(
        ((h + pad) * len(rows) - pad, (w + pad) * n_cols - pad, 3), 1.0, dtype=np.float32
    )
    for i, row in enumerate(rows):
        for j, img in enumerate(row):
            out[i * (h + pad) : i * (h + pad) + h, j * (w + pad) : j * (w + pad) + w] = img
    return out


# --- subcommands -------------------------------------------------------------


def cmd_synth(args) -> int:
    specs = load_spec_file(args.specs)
    sessions = synth_dataset(
        specs,
        args.out,
        sessions_per_spec=args.sessions_per_spec,
        n_frames=args.n_frames,
        interval_s=args.interval,
        img_size=args.img_size,
    )
    write_run_manifest(
        args.out,
        "synth",
        {
            "specs": args.specs,
            "sessions_per_spec": args.sessions_per_spec,
            "n_frames": args.n_frames,
            "interval_s": args.interval,
            "img_size": args.img_size,
        },
        seed=None,
    )
    print(f"wrote {len(sessions)} sessions under {args.out}")
    return 0


def cmd_split(args) -> int:
    sessions = load_sessions(args.data)
    split = split_dataset(sessions, seed=args.seed)
    with open(args.out, "w") as fh:
        json.dump(split.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"split {len(sessions)} sessions -> train {len(split.train)} / "
        f"val {len(split.val)} / test {len(split.test)} ({args.out})"
    )
    return 0


def cmd_train_cis(args) -> int:
    cfg_json, base = _load_run_config(args.config)
    data = _resolve(base, cfg_json["data"])
    out = _resolve(base, cfg_json["out"])
    split = _resolve(base, cfg_json["split"]) if "split" in cfg_json else None
    sessions = _sessions_for_split(data, split, "train")

    train_cfg = CisTrainConfig(
        epochs=cfg_json.get("epochs", 100),
        lr=cfg_json.get("lr", 1e-4),
        weight_decay=cfg_json.get("weight_decay", 1e-5),
        batch_size=cfg_json.get("batch_size", 32),
        augment=cfg_json.get("augment", True),
        seed=cfg_json.get("seed", 0),
    )
    net_cfg = EmbeddingNetConfig(
        backbone=cfg_json.get("backbone", "small-conv"),
        embed_dim=cfg_json.get("embed_dim", 2048),
        proj_dims=tuple(cfg_json.get("proj_dims", (2048, 128))),
        img_size=cfg_json.get("img_size", sessions[0].frames[0].image.shape[0]),
    )
    net, history = train_cis(sessions, cfg=train_cfg, net_cfg=net_cfg)
    save_weights(net, os.path.join(out, "weights"))
    write_loss_csv(history, os.path.join(out, "cis_loss.csv"))
    write_run_manifest(out, "train-cis", cfg_json, seed=train_cfg.seed)
    print(
        f"trained cis on {len(sessions)} sessions for {train_cfg.epochs} epochs; "
        f"final loss {history[-1].mean_loss:.6f}; archive at {os.path.join(out, 'weights')}"
    )
    return 0


def cmd_train_gen(args) -> int:
    cfg_json, base = _load_run_config(args.config)
    data = _resolve(base, cfg_json["data"])
    out = _resolve(base, cfg_json["out"])
    split = _resolve(base, cfg_json["split"]) if "split" in cfg_json else None
    sessions = _sessions_for_split(data, split, "train")
    cis_net = load_weights(_resolve(base, cfg_json["cis_weights"]))
    if not isinstance(cis_net, EmbeddingNet):
        raise ValueError(f"cis_weights does not hold an embedding net: {cfg_json['cis_weights']}")

    img_size = cfg_json.get("img_size", sessions[0].frames[0].image.shape[0])
    gen_cfg = GeneratorConfig(
        img_size=img_size,
        base_dim=cfg_json.get("base_dim", 32),
        dim_mults=tuple(cfg_json.get("dim_mults", (1, 2, 4, 8))),
    )
    gen = GeneratorNet(gen_cfg, ContextIndex())
    disc = DiscriminatorNet(DiscriminatorConfig())
    census, expected = param_census(gen), expected_generator_param_count(gen_cfg)
    print(f"generator parameters: {census} (shape-derived {expected})")
    if census != expected:
        raise RuntimeError(f"parameter census mismatch: counted {census}, derived {expected}")

    train_cfg = GenTrainConfig(
        epochs_const=cfg_json.get("epochs_const", 50),
        epochs_decay=cfg_json.get("epochs_decay", 50),
        lr=cfg_json.get("lr", 2e-4),
        batch_size=cfg_json.get("batch_size", 1),
        lambda_gan=cfg_json.get("lambda_gan", 1.0),
        lambda_perc=cfg_json.get("lambda_perc", 50.0),
        lambda_cis=cfg_json.get("lambda_cis", 50.0),
        perceptual_impl=cfg_json.get("perceptual", "pyramid-l1"),
        augment=cfg_json.get("augment", True),
        seed=cfg_json.get("seed", 0),
    )
    history = train_generator(sessions, gen, disc, cis_net, train_cfg)
    save_weights(gen, os.path.join(out, "generator"))
    save_weights(disc, os.path.join(out, "discriminator"))
    write_gen_loss_csv(history, os.path.join(out, "gen_loss.csv"))
    write_run_manifest(out, "train-gen", cfg_json, seed=train_cfg.seed)
    print(
        f"trained generator on {len(sessions)} sessions for {train_cfg.total_epochs} epochs; "
        f"final composite {history[-1].composite:.6f}; archives under {out}"
    )
    return 0


def cmd_generate(args) -> int:
    gen = load_weights(args.weights)
    if not isinstance(gen, GeneratorNet):
        raise ValueError(f"{args.weights} does not hold a generator archive")
    raw = load_png(args.raw)
    if args.all_states:
        states = [s for r, s in gen.index.pairs() if r == args.recipe]
        if not states:
            known = sorted({r for r, _ in gen.index.pairs()})
            raise ValueError(f"recipe {args.recipe!r} not in archive vocabulary; known: {known}")
    else:
        if args.state is None:
            raise ValueError("pass --state NAME or --all-states")
        states = [args.state]
    os.makedirs(args.out, exist_ok=True)
    for state in states:
        img = generate(gen, raw, args.recipe, state)
        dest = os.path.join(args.out, f"{state}.png")
        save_png(img, dest)
        print(f"wrote {dest}")
    write_run_manifest(
        args.out,
        "generate",
        {"weights": args.weights, "raw": args.raw, "recipe": args.recipe, "states": states},
        seed=None,
    )
    return 0


def cmd_monitor(args) -> int:
    net = load_weights(args.weights)
    if not isinstance(net, EmbeddingNet):
        raise ValueError(f"{args.weights} does not hold an embedding-net archive")
    session = load_session(args.session)
    target = load_png(args.target)
    interval = (
        session.frames[1].t_seconds - session.frames[0].t_seconds
        if session.n_frames > 1
        else MonitorConfig().interval_s
    )
    cfg = MonitorConfig(
        interval_s=interval,
        smooth_window=args.window,
        peak_confirm=args.confirm,
        min_peak_sim=args.min_peak,
    )
    report = run_session_offline(net, session, target, cfg)
    os.makedirs(args.out, exist_ok=True)
    report.to_csv(os.path.join(args.out, "trace.csv"))
    with open(os.path.join(args.out, "decision.json"), "w") as fh:
        json.dump(
            {
                "stopped": report.stopped,
                "stop_index": report.stop_index,
                "stop_t_seconds": report.stop_t_seconds,
                "frames_seen": len(report.rows),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")

    n_seen = len(report.rows)
    picks = sorted(set(np.linspace(0, n_seen - 1, min(8, n_seen)).round().astype(int)))
    save_png(_grid([[session.frames[i].image for i in picks]]), os.path.join(args.out, "strip.png"))
    write_run_manifest(
        args.out,
        "monitor",
        {
            "weights": args.weights,
            "session": args.session,
            "target": args.target,
            "window": args.window,
            "confirm": args.confirm,
            "min_peak": args.min_peak,
        },
        seed=None,
    )
    if report.stopped:
        print(f"stop at frame {report.stop_index} (t={report.stop_t_seconds:.0f}s)")
    else:
        print(f"no stop after {n_seen} frames")
    return 0


def cmd_eval(args) -> int:
    net = load_weights(args.weights)
    if not isinstance(net, EmbeddingNet):
        raise ValueError(f"{args.weights} does not hold an embedding-net archive")
    sessions = load_sessions(args.data)
    os.makedirs(args.out, exist_ok=True)

    table = eval_state_table(net, args.perceptual, sessions)
    table.to_csv(os.path.join(args.out, "state_table.csv"))

    by_id = {s.session_id: s for s in sessions}
    sid = args.session_id or sessions[0].session_id
    if sid not in by_id:
        raise ValueError(f"session {sid!r} not found under {args.data}")
    traj = trajectory_report(net, by_id[sid], anchor=args.anchor, perceptual_impl=args.perceptual)
    traj.to_csv(os.path.join(args.out, f"trajectory_{sid}.csv"))
    _plot_trajectory(traj, sid, os.path.join(args.out, f"trajectory_{sid}.png"))
    write_run_manifest(
        args.out,
        "eval",
        {
            "weights": args.weights,
            "data": args.data,
            "perceptual": args.perceptual,
            "session_id": sid,
            "anchor": args.anchor,
        },
        seed=None,
    )
    print(
        f"state table over {len(sessions)} sessions -> {args.out}; "
        f"trajectory {sid}: cis range {traj.cis_range:.4f}, ssim range {traj.ssim_range:.4f}"
    )
    return 0


def _plot_trajectory(traj, sid: str, dest: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = [r.t_seconds for r in traj.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, [r.cis for r in traj.rows], label="culinary similarity", marker="o")
    ax.plot(t, [r.ssim for r in traj.rows], label="ssim", marker="s")
    ax.plot(t, [r.one_minus_perc for r in traj.rows], label=f"1 - {traj.perceptual_label}", marker="^")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("similarity to anchor")
    ax.set_title(sid)
    ax.legend()
    fig.tight_layout()
    fig.savefig(dest, dpi=120)
    plt.close(fig)


def cmd_quantize(args) -> int:
    if args.scheme:
        with open(args.scheme) as fh:
            scheme = QuantScheme.from_json(json.load(fh))
    else:
        scheme = default_quant_scheme()
    report = quantize_archive(args.weights, args.out, scheme)
    write_run_manifest(
        args.out,
        "quantize",
        {"weights": args.weights, "scheme": scheme.to_json()},
        seed=None,
    )
    print(report.summary())
    return 0


def cmd_report(args) -> int:
    gen = load_weights(args.weights)
    if not isinstance(gen, GeneratorNet):
        raise ValueError(f"{args.weights} does not hold a generator archive")
    sessions = load_sessions(args.data)[: args.sessions]
    known = set(gen.index.pairs())
    rows = []
    for s in sessions:
        for raw, real, recipe, state in pair_raw_state(s):
            if (recipe, state) not in known:
                continue
            rows.append([raw, real, generate(gen, raw, recipe, state)])
    if not rows:
        raise ValueError("no (recipe, state) pairs in the data overlap the archive vocabulary")
    os.makedirs(args.out, exist_ok=True)
    dest = os.path.join(args.out, "report.png")
    save_png(_grid(rows), dest)
    write_run_manifest(
        args.out,
        "report",
        {"weights": args.weights, "data": args.data, "sessions": args.sessions},
        seed=None,
    )
    print(f"wrote {len(rows)} raw|real|generated rows to {dest}")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cookgen",
        description="Synthesize cooked-food images and monitor cooking progress.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic dataset from a recipe-spec file")
    p.add_argument("--specs", required=True, help="JSON list of synthetic recipe specs")
    p.add_argument("--out", required=True, help="dataset root to write sessions into")
    p.add_argument("--sessions-per-spec", type=int, default=1)
    p.add_argument("--n-frames", type=int, default=16)
    p.add_argument("--interval", type=float, default=30.0)
    p.add_argument("--img-size", type=int, default=64)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="deterministic train/val/test split of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="where to write the split JSON")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-cis", help="train the culinary-similarity embedding net")
    p.add_argument("--config", required=True, help="JSON run config")
    p.set_defaults(func=cmd_train_cis)

    p = sub.add_parser("train-gen", help="adversarially train the conditioned generator")
    p.add_argument("--config", required=True, help="JSON run config")
    p.set_defaults(func=cmd_train_gen)

    p = sub.add_parser("generate", help="synthesize cooked-state images from a raw photo")
    p.add_argument("--weights", required=True, help="generator archive directory")
    p.add_argument("--raw", required=True, help="raw-food PNG")
    p.add_argument("--recipe", required=True)
    p.add_argument("--state", default=None)
    p.add_argument("--all-states", action="store_true", help="one PNG per known state of the recipe")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("monitor", help="run the stopping rule over a recorded session")
    p.add_argument("--weights", required=True, help="embedding-net archive directory")
    p.add_argument("--session", required=True, help="session directory")
    p.add_argument("--target", required=True, help="target-state PNG")
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--confirm", type=int, default=2)
    p.add_argument("--min-peak", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("eval", help="state table + metric trajectory for a dataset")
    p.add_argument("--weights", required=True, help="embedding-net archive directory")
    p.add_argument("--data", required=True)
    p.add_argument("--perceptual", default="pyramid-l1")
    p.add_argument("--session-id", default=None, help="session for the trajectory (default: first)")
    p.add_argument("--anchor", type=int, default=0, help="anchor frame index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("quantize", help="quantize a weight archive")
    p.add_argument("--weights", required=True, help="source archive directory")
    p.add_argument("--scheme", default=None, help="JSON policy file (default: hybrid int8+fp16)")
    p.add_argument("--out", required=True, help="destination archive directory")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("report", help="raw | real | generated image grid")
    p.add_argument("--weights", required=True, help="generator archive directory")
    p.add_argument("--data", required=True)
    p.add_argument("--sessions", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single surface for exit-code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
