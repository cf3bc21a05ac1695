"""Command line interface: training, the three inference functions, dataset
evaluation, and code-distribution diagnostics.

Exit codes: 0 success, 1 runtime failure (ApiError JSON on stderr), 2 flag
errors. COLORCODE_HOME sets the default output root.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from colorcode.core import TrainConfig, denormalize_image, normalize_image, validate_config
from colorcode.gateway import ApiError

log = logging.getLogger("colorcode")


def _out_root() -> Path:
    return Path(os.environ.get("COLORCODE_HOME", "."))


def _load_image(path, pad_note: bool = True) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    h, w = arr.shape[:2]
    h4, w4 = h - h % 4, w - w % 4
    if (h4, w4) != (h, w):
        if pad_note:
            log.warning("cropping %s from %dx%d to %dx%d (dims must divide by 4)",
                        path, w, h, w4, h4)
        arr = arr[:h4, :w4]
    return arr


def _save_image(arr: np.ndarray, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def _session(ckpt):
    from colorcode.inference import InferenceSession
    return InferenceSession.from_checkpoint(ckpt)


def cmd_train(args) -> int:
    from colorcode.data import load_paired_dataset, make_batches, save_checkpoint
    from colorcode.training import init_train_state, train_loop
    from colorcode.data import load_checkpoint

    if args.config:
        cfg = TrainConfig.from_json(Path(args.config).read_text())
    else:
        cfg = TrainConfig()
    validate_config(cfg)
    out = Path(args.out) if args.out else _out_root() / "runs" / "latest"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())

    dataset = load_paired_dataset(args.data, split="train")
    schedule = make_batches(dataset, cfg)
    if args.resume:
        state = load_checkpoint(args.resume, expected_config=cfg)
        log.info("resumed from %s at iteration %d", args.resume, state.iteration)
    else:
        state = init_train_state(cfg, base_channels=args.width)
    ckpt_path = out / "checkpoint.zip"

    def sink(st):
        save_checkpoint(st, ckpt_path)
        log.info("checkpoint written at iteration %d", st.iteration)

    train_loop(state, schedule, cfg, checkpoint_sink=sink,
               checkpoint_interval=args.ckpt_interval,
               log_path=out / "loss_log.jsonl")
    print(json.dumps({"checkpoint": str(ckpt_path), "iterations": state.iteration}))
    return 0


def cmd_enhance(args) -> int:
    session = _session(args.ckpt)
    x = normalize_image(_load_image(args.input))
    out_path = args.out or _out_root() / "enhanced.png"
    _save_image(denormalize_image(session.enhance(x)), out_path)
    print(str(out_path))
    return 0


def cmd_adapt(args) -> int:
    from colorcode.inference import AdaptationRequest

    session = _session(args.ckpt)
    x = normalize_image(_load_image(args.input))
    g = normalize_image(_load_image(args.guide))
    mask = None
    if args.mask:
        with Image.open(args.mask) as m:
            arr = np.asarray(m.convert("L"))[
                :x.height, :x.width]
        mask = torch.from_numpy((arr > 127).astype(np.float32))
    req = AdaptationRequest(x=x, guidance=g, alpha=args.alpha, mask=mask)
    out_path = Path(args.out or _out_root() / "adapted.png")
    _save_image(denormalize_image(session.adapt(req)), out_path)
    if args.sweep:
        from colorcode.metrics import adaptation_uiqm_sweep

        alphas = [float(v) for v in args.sweep.split(",")]
        sweep = adaptation_uiqm_sweep(session, x, g, alphas)
        sweep_path = out_path.with_suffix(".sweep.json")
        sweep_path.write_text(json.dumps(sweep, indent=2, sort_keys=True))
        log.info("quality sweep written to %s", sweep_path)
    print(str(out_path))
    return 0


def cmd_interpolate(args) -> int:
    from colorcode.inference import InterpolationRequest

    session = _session(args.ckpt)
    x = normalize_image(_load_image(args.input))
    z = torch.tensor([float(v) for v in args.z.split(",")], dtype=torch.float32)
    req = InterpolationRequest(x=x, z=z, alpha=args.alpha)
    out_path = args.out or _out_root() / "interpolated.png"
    _save_image(denormalize_image(session.interpolate(req)), out_path)
    print(str(out_path))
    return 0


def cmd_grid(args) -> int:
    session = _session(args.ckpt)
    x = normalize_image(_load_image(args.input))
    grid = session.interpolation_grid(x, args.steps, (args.lo, args.hi), args.alpha)
    cells = [[denormalize_image(img) for img in row] for row in grid.images]
    montage = _montage(cells, grid.center)
    out_path = args.out or _out_root() / "grid.png"
    _save_image(montage, out_path)
    print(str(out_path))
    return 0


def _montage(cells, center, gap: int = 2):
    rows, cols = len(cells), len(cells[0])
    h, w = cells[0][0].shape[:2]
    canvas = np.full(((h + gap) * rows - gap, (w + gap) * cols - gap, 3), 255, dtype=np.uint8)
    for i, row in enumerate(cells):
        for j, cell in enumerate(row):
            cell = cell.copy()
            if center == (i, j):  # fixed-enhancement cell gets a red border
                cell[:3, :], cell[-3:, :] = (255, 0, 0), (255, 0, 0)
                cell[:, :3], cell[:, -3:] = (255, 0, 0), (255, 0, 0)
            top, left = i * (h + gap), j * (w + gap)
            canvas[top:top + h, left:left + w] = cell
    return canvas


def cmd_evaluate(args) -> int:
    from colorcode.data import load_paired_dataset
    from colorcode.metrics import evaluate_dataset

    session = _session(args.ckpt)
    dataset = load_paired_dataset(args.data, split="test")
    table = evaluate_dataset(session, dataset)
    out = Path(args.out) if args.out else _out_root() / "evaluation"
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "metrics.csv")
    table.write_json(out / "metrics.json")
    print(json.dumps(table.means, sort_keys=True))
    return 0


def cmd_histograms(args) -> int:
    from colorcode.data import load_paired_dataset
    from colorcode.gateway.server import _dataset_codes
    from colorcode.metrics import code_histograms, render_histograms

    session = _session(args.ckpt)
    dataset = load_paired_dataset(args.data, split="test")
    codes = _dataset_codes(session, dataset, args.limit)
    hist = code_histograms(codes, bins=args.bins)
    out = Path(args.out) if args.out else _out_root() / "histograms"
    out.mkdir(parents=True, exist_ok=True)
    render_histograms(hist, out / "code_histograms.png", out / "code_histograms.json")
    if session.config.code_length == 2:
        from colorcode.metrics import render_code_scatter

        gt_ds = dataset.__class__(root=dataset.root,
                                  pairs=[(gt, gt) for _, gt in dataset.pairs],
                                  split=dataset.split)
        gt_codes = _dataset_codes(session, gt_ds, args.limit)
        render_code_scatter(codes, gt_codes, out / "code_scatter.png",
                            out / "code_scatter.json")
    print(str(out / "code_histograms.png"))
    return 0


def cmd_serve(args) -> int:
    from colorcode.gateway.server import serve

    serve(args.ckpt, host=args.host, port=args.port, deadline_s=args.deadline)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colorcode",
                                description="Underwater image color enhancement toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model on a paired dataset")
    t.add_argument("--config", help="TrainConfig JSON file (defaults otherwise)")
    t.add_argument("--data", required=True, help="dataset root with input/ and gt/")
    t.add_argument("--out", help="run directory for checkpoints and logs")
    t.add_argument("--width", type=int, default=64, help="base channel width")
    t.add_argument("--ckpt-interval", type=int, default=1000)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("enhance", help="fixed color enhancement")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_enhance)

    a = sub.add_parser("adapt", help="guidance-driven color adaptation "
                                     "(quality is typically best for alpha in [0, 0.3])")
    a.add_argument("--ckpt", required=True)
    a.add_argument("--in", dest="input", required=True)
    a.add_argument("--guide", required=True)
    a.add_argument("--alpha", type=float, default=0.3)
    a.add_argument("--mask", help="optional binary foreground mask (PNG)")
    a.add_argument("--sweep", help="comma-separated alphas for a UIQM-drift report")
    a.add_argument("--out")
    a.set_defaults(fn=cmd_adapt)

    i = sub.add_parser("interpolate", help="enhance with a sampled color code")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--z", required=True, help="comma-separated code values")
    i.add_argument("--alpha", type=float, default=0.5)
    i.add_argument("--out")
    i.set_defaults(fn=cmd_interpolate)

    g = sub.add_parser("grid", help="interpolation grid (2-D code models)")
    g.add_argument("--ckpt", required=True)
    g.add_argument("--in", dest="input", required=True)
    g.add_argument("--steps", type=int, default=11)
    g.add_argument("--lo", type=float, default=-5.0)
    g.add_argument("--hi", type=float, default=5.0)
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--out")
    g.set_defaults(fn=cmd_grid)

    v = sub.add_parser("evaluate", help="PSNR/SSIM/UIQM table over a test set")
    v.add_argument("--ckpt", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--out")
    v.set_defaults(fn=cmd_evaluate)

    h = sub.add_parser("histograms", help="per-dimension color code histograms")
    h.add_argument("--ckpt", required=True)
    h.add_argument("--data", required=True)
    h.add_argument("--out")
    h.add_argument("--bins", type=int, default=30)
    h.add_argument("--limit", type=int, default=256)
    h.set_defaults(fn=cmd_histograms)

    s = sub.add_parser("serve", help="run the HTTP inference service")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.add_argument("--deadline", type=float, default=30.0)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ApiError as err:
        print(json.dumps({"error": err.to_dict()}), file=sys.stderr)
        return 1
    except Exception as err:  # runtime failures: ApiError-shaped JSON on stderr
        print(json.dumps({"error": {"code": type(err).__name__, "message": str(err)}}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
