"""Command-line entry points.

    taikoduet features   precompute a feature file from a WAV
    taikoduet convert    convert a Taiko .osu file to the native format
    taikoduet pretrain   train the base model on a corpus directory
    taikoduet calibrate  grid-search delta and training hyperparameters
    taikoduet serve      run the interactive editor server
    taikoduet demo       build demo songs + base model + study config

A corpus directory pairs files by stem: <name>.chart.json with
<name>.features.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _load_corpus(corpus_dir: Path):
    from .chartio import load_chart
    from .features import load_features

    corpus = []
    for chart_path in sorted(corpus_dir.glob("*.chart.json")):
        feat_path = chart_path.with_name(chart_path.name.replace(".chart.json", ".features"))
        if not feat_path.exists():
            raise SystemExit(f"no feature file for {chart_path.name} (expected {feat_path.name})")
        corpus.append((load_chart(chart_path), load_features(feat_path)))
    if not corpus:
        raise SystemExit(f"no *.chart.json files in {corpus_dir}")
    return corpus


def cmd_features(args) -> int:
    from .features import extract_features, read_wav_mono, save_features

    samples, rate = read_wav_mono(args.audio)
    matrix = extract_features(samples, rate)
    save_features(matrix, args.out)
    print(f"wrote {matrix.frame_count} frames x {matrix.data.shape[1]} bands to {args.out}")
    return 0


def cmd_convert(args) -> int:
    from .chartio import save_chart
    from .osu import parse_osu_beatmap

    with open(args.osu, "r", encoding="utf-8-sig") as fh:
        beatmap = parse_osu_beatmap(fh.read())
    chart = beatmap.to_chart()
    save_chart(chart, args.out)
    skipped = beatmap.skipped_sliders + beatmap.skipped_spinners
    print(
        f"wrote {len(chart.notes)} notes to {args.out}"
        f" (skipped {skipped} non-circle objects,"
        f" dropped {beatmap.dropped_collisions} frame collisions)"
    )
    return 0


def cmd_pretrain(args) -> int:
    from .model import ModelConfig, TrainConfig
    from .calibration import pretrain

    corpus = _load_corpus(Path(args.corpus))
    model_cfg = ModelConfig(
        hidden_size=args.hidden,
        audio_context=args.context,
        history_len=args.history,
        seed=args.seed,
    )
    train_cfg = TrainConfig(
        learning_rate=args.alpha,
        max_epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
    )
    pretrain(corpus, train_cfg, model_cfg, out_path=args.out)
    print(f"pretrained on {len(corpus)} charts -> {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    from .calibration import GridSpec, grid_search, write_table
    from .model import load_model

    corpus = _load_corpus(Path(args.corpus))
    base = load_model(args.base)
    spec_kwargs = {}
    if args.grid:
        with open(args.grid, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        mapping = {
            "delta": "delta_choices",
            "alpha": "alpha_choices",
            "epochs": "epoch_choices",
            "batch": "batch_choices",
        }
        for key, field in mapping.items():
            if key in doc:
                spec_kwargs[field] = tuple(doc[key])
    grid = GridSpec(**spec_kwargs)
    result = grid_search(base, corpus, grid)
    write_table(result, args.out)
    w = result.winner
    print(f"winner: delta={w.delta} alpha={w.alpha} epochs={w.epochs} batch={w.batch}")
    print(f"table: {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    from .session import SessionManager

    manager = SessionManager.from_dirs(
        args.base_model, args.songs, args.study_config, out_dir=args.out
    )
    frontend = args.frontend if args.frontend and Path(args.frontend).is_dir() else None
    app = create_app(manager, frontend_dir=frontend)
    port = args.port or int(os.environ.get("TAIKODUET_PORT", "8420"))
    uvicorn.run(app, host=args.host, port=port, log_level="info")
    return 0


def cmd_demo(args) -> int:
    from .demo import build_demo

    out = build_demo(args.out, seed=args.seed)
    print(f"demo data in {out}")
    print(
        f"run: taikoduet serve --base-model {out / 'base_model.tdml'} "
        f"--songs {out / 'songs'} --study-config {out / 'study.json'} "
        f"--out {out / 'sessions'}"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="taikoduet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="extract a feature file from a WAV")
    p.add_argument("--audio", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("convert", help="convert a Taiko .osu file to the native format")
    p.add_argument("--osu", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("pretrain", help="train the base model on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--context", type=int, default=8)
    p.add_argument("--history", type=int, default=16)
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("calibrate", help="grid-search retraining hyperparameters")
    p.add_argument("--corpus", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--grid", help="JSON file with delta/alpha/epochs/batch lists")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the interactive editor server")
    p.add_argument("--port", type=int, default=None,
                   help="default from TAIKODUET_PORT or 8420")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--base-model", required=True)
    p.add_argument("--songs", required=True)
    p.add_argument("--study-config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frontend", help="directory with the built editor UI")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("demo", help="build demo data for a quick start")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
