"""End-to-end desk-scale run: synth -> split -> train both nets -> artifacts.

Drives the same CLI entry points a user would, writing everything under one
output root. Sizes default to a quick smoke run; pass --full for the desk-scale
corpus used in the acceptance tests (slower, better pictures).

    python3 scripts/desk_run.py --out runs/desk
    python3 scripts/desk_run.py --out runs/desk --full
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cookgen.cli import main as cli
from cookgen.images import save_png
from cookgen.sessions import SyntheticRecipeSpec, load_sessions, save_spec_file

SPECS = [
    SyntheticRecipeSpec(name="pancake", shape_kind="disc", seed=100),
    SyntheticRecipeSpec(
        name="toast",
        shape_kind="rectangle",
        raw_color=(0.95, 0.9, 0.75),
        extended_color=(0.3, 0.16, 0.05),
        size_factor=0.8,
        seed=200,
    ),
    SyntheticRecipeSpec(
        name="cookies",
        shape_kind="blob-cluster",
        raw_color=(0.85, 0.75, 0.55),
        extended_color=(0.4, 0.22, 0.1),
        browning_midpoint=0.6,
        size_factor=1.4,
        seed=300,
    ),
]


def run(cmd: list[str]) -> None:
    print("$ cookgen " + " ".join(cmd))
    code = cli(cmd)
    if code != 0:
        sys.exit(f"step failed with exit code {code}: {cmd[0]}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs/desk"))
    ap.add_argument("--full", action="store_true", help="desk-scale sizes instead of smoke sizes")
    ap.add_argument("--img-size", type=int, default=64)
    args = ap.parse_args()

    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    n_sessions = 40 if args.full else 6
    n_frames = 16 if args.full else 8
    cis_epochs = 12 if args.full else 2
    gen_epochs = (10, 10) if args.full else (1, 1)

    save_spec_file(SPECS, out / "specs.json")
    run(
        [
            "synth",
            "--specs", str(out / "specs.json"),
            "--out", str(out / "data"),
            "--sessions-per-spec", str(n_sessions),
            "--n-frames", str(n_frames),
            "--img-size", str(args.img_size),
        ]
    )
    run(["split", "--data", str(out / "data"), "--seed", "0", "--out", str(out / "split.json")])

    (out / "cis.json").write_text(
        json.dumps(
            {
                "data": "data",
                "split": "split.json",
                "out": "cis",
                "epochs": cis_epochs,
                "batch_size": 16,
                "augment": False,
                "seed": 0,
                "img_size": args.img_size,
                "embed_dim": 256,
                "proj_dims": [256, 128],
            },
            indent=2,
        )
    )
    run(["train-cis", "--config", str(out / "cis.json")])

    (out / "gen.json").write_text(
        json.dumps(
            {
                "data": "data",
                "split": "split.json",
                "out": "gen",
                "cis_weights": "cis/weights",
                "epochs_const": gen_epochs[0],
                "epochs_decay": gen_epochs[1],
                "img_size": args.img_size,
                "base_dim": 16,
                "augment": False,
                "seed": 0,
            },
            indent=2,
        )
    )
    run(["train-gen", "--config", str(out / "gen.json")])

    # downstream artifacts off the trained nets
    sessions = load_sessions(out / "data")
    split = json.loads((out / "split.json").read_text())
    test = [s for s in sessions if s.session_id in set(split["test"])]
    demo = test[0]
    raw_png = out / "demo_raw.png"
    save_png(demo.frames[0].image, raw_png)
    run(
        [
            "generate",
            "--weights", str(out / "gen" / "generator"),
            "--raw", str(raw_png),
            "--recipe", demo.recipe_id,
            "--all-states",
            "--out", str(out / "generated"),
        ]
    )
    target_png = out / "demo_target.png"
    save_png(demo.frames[demo.annotations["standard"]].image, target_png)
    run(
        [
            "monitor",
            "--weights", str(out / "cis" / "weights"),
            "--session", str(out / "data" / demo.session_id),
            "--target", str(target_png),
            "--out", str(out / "monitor"),
        ]
    )
    run(
        [
            "eval",
            "--weights", str(out / "cis" / "weights"),
            "--data", str(out / "data"),
            "--session-id", demo.session_id,
            "--out", str(out / "eval"),
        ]
    )
    run(["quantize", "--weights", str(out / "gen" / "generator"), "--out", str(out / "gen" / "generator-int8")])
    run(
        [
            "report",
            "--weights", str(out / "gen" / "generator"),
            "--data", str(out / "data"),
            "--sessions", "3",
            "--out", str(out / "figures"),
        ]
    )
    print(f"done; artifacts under {out}")


if __name__ == "__main__":
    main()
