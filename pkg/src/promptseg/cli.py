"""Command-line interface: segment / eval / bench / synth."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigError, NotEnoughInputs, PromptSegError
from .evaluation import evaluate, load_ground_truth, load_predictions, rle_encode
from .feature_io import load_feature_map, save_feature_map
from .pipeline import (
    PipelineConfig,
    bench,
    results_to_json,
    run_pipeline,
    synth_scene,
)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return (int(h), int(w))
    except ValueError:
        raise ConfigError(f"--size expects HxW, got {text!r}") from None


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    overrides = {}
    for name in (
        "stride",
        "tau_b",
        "tau_ioa_bg",
        "tau_f_bg",
        "tau_ioa_merge",
        "tau_f_merge",
        "prompt_strategy",
        "filter_strategy",
        "min_area_fraction",
        "score_mode",
    ):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    if getattr(args, "size", None):
        overrides["output_size"] = _parse_size(args.size)
    return cfg.with_overrides(**overrides)


def _feature_files(spec: str) -> list[Path]:
    path = Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.pmfm"))
        if not files:
            raise NotEnoughInputs(f"{path}: no .pmfm files found")
        return files
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    return [path]


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _segment_one(task: tuple[str, dict]) -> dict:
    path, cfg_dict = task
    cfg = PipelineConfig.from_dict(cfg_dict)
    f = Path(path)
    result = run_pipeline(load_feature_map(f), cfg, image_id=f.stem)
    return results_to_json([result])["images"][0]


def _load_size_map(path: str) -> dict[str, tuple[int, int]]:
    """Per-image output sizes from any file in the GT/predictions schema."""
    payload = json.loads(Path(path).read_text())
    return {
        str(e["image_id"]): (int(e["height"]), int(e["width"]))
        for e in payload.get("images", [])
    }


def cmd_segment(args) -> int:
    cfg = _load_config(args)
    if args.backend:
        _kernels.set_backend(args.backend)
    size_map = _load_size_map(args.size_from) if args.size_from else {}
    tasks = []
    for f in _feature_files(args.features):
        per_image = cfg
        if f.stem in size_map:
            per_image = cfg.with_overrides(output_size=size_map[f.stem])
        tasks.append((str(f), per_image.to_dict()))
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            images = list(pool.map(_segment_one, tasks))  # gathered by input index
    else:
        images = [_segment_one(t) for t in tasks]
    _write_json({"postprocess": "nearest", "images": images}, args.out)
    return 0


def cmd_eval(args) -> int:
    dets = load_predictions(args.pred)
    gts = load_ground_truth(args.gt)
    report = evaluate(dets, gts, iou_type="box" if args.box else "mask")
    _write_json(report.to_dict(), args.out)
    print(
        f"ap={report.ap:.4f} ap50={report.ap50:.4f} ar100={report.ar100:.4f} "
        f"({report.num_images} images, {report.num_dets} dets, {report.num_gt} gt)",
        file=sys.stderr,
    )
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    backends = _kernels.available() if args.compare else [args.backend or "auto"]
    reports = {}
    dump_payload = None
    for name in backends:
        report, predictions = bench(args.features, args.warmup, args.measure, cfg, backend=name)
        reports[report["backend"]] = report
        dump_payload = predictions
    payload = reports if args.compare else next(iter(reports.values()))
    if args.dump:
        Path(args.dump).write_text(json.dumps(dump_payload, indent=2) + "\n")
    _write_json(payload, args.out)
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lo, _, hi = args.objects.partition("-")
    lo = int(lo)
    hi = int(hi) if hi else lo
    if hi < lo:
        raise ConfigError(f"--objects range is inverted: {args.objects!r}")
    rng = np.random.default_rng(args.seed)
    gt_images = []
    for i in range(args.count):
        num_objects = int(rng.integers(lo, hi + 1))
        fm, gt_masks = synth_scene(
            args.size, args.size, args.channels, num_objects, args.noise, seed=args.seed + 1 + i
        )
        stem = f"scene_{i:04d}"
        save_feature_map(fm, out_dir / f"{stem}.pmfm")
        gt_images.append(
            {
                "image_id": stem,
                "height": args.size,
                "width": args.size,
                "masks": [{"counts": rle_encode(m).counts} for m in gt_masks],
            }
        )
    (out_dir / "gt.json").write_text(json.dumps({"images": gt_images}, indent=2) + "\n")
    print(f"wrote {args.count} scenes and gt.json to {out_dir}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptseg",
        description="Training-free instance segmentation on precomputed feature maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="generate instance masks from PMFM features")
    seg.add_argument("--features", required=True, help="PMFM file or directory")
    seg.add_argument("--config", help="flat JSON config file")
    seg.add_argument("--out", help="predictions JSON path (default: stdout)")
    seg.add_argument("--size", help="upsample masks to HxW")
    seg.add_argument(
        "--size-from",
        dest="size_from",
        help="JSON file in the GT schema; upsample each image to its recorded size",
    )
    seg.add_argument("--stride", type=int)
    seg.add_argument("--tau-b", dest="tau_b", type=float)
    seg.add_argument("--tau-ioa-bg", dest="tau_ioa_bg", type=float)
    seg.add_argument("--tau-f-bg", dest="tau_f_bg", type=float)
    seg.add_argument("--tau-ioa-merge", dest="tau_ioa_merge", type=float)
    seg.add_argument("--tau-f-merge", dest="tau_f_merge", type=float)
    seg.add_argument("--prompt-strategy", dest="prompt_strategy", choices=("grid", "random"))
    seg.add_argument(
        "--filter-strategy", dest="filter_strategy", choices=("cascade", "ioa", "similarity")
    )
    seg.add_argument("--min-area-fraction", dest="min_area_fraction", type=float)
    seg.add_argument("--score-mode", dest="score_mode", choices=("area", "constant"))
    seg.add_argument("--backend", choices=("auto", "compiled", "python"))
    seg.add_argument("--workers", type=int, default=1, help="parallel images; output order is by input index")
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("eval", help="COCO-protocol AP/AR for predictions vs ground truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gt", required=True)
    ev.add_argument("--out", help="report JSON path (default: stdout)")
    ev.add_argument("--box", action="store_true", help="box IoU instead of mask IoU")
    ev.set_defaults(func=cmd_eval)

    be = sub.add_parser("bench", help="throughput benchmark over a feature directory")
    be.add_argument("--features", required=True)
    be.add_argument("--warmup", type=int, required=True)
    be.add_argument("--measure", type=int, required=True)
    be.add_argument("--config", help="flat JSON config file")
    be.add_argument("--out", help="report JSON path (default: stdout)")
    be.add_argument("--backend", choices=("auto", "compiled", "python"))
    be.add_argument("--compare", action="store_true", help="run every available backend")
    be.add_argument("--dump", help="also write the measured images' predictions JSON here")
    be.set_defaults(func=cmd_bench)

    sy = sub.add_parser("synth", help="generate synthetic PMFM scenes with ground truth")
    sy.add_argument("--out", required=True, help="output directory")
    sy.add_argument("--count", type=int, default=10)
    sy.add_argument("--objects", default="3", help="objects per scene: K or LO-HI")
    sy.add_argument("--noise", type=float, default=0.05)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--size", type=int, default=60, help="feature grid height/width")
    sy.add_argument("--channels", type=int, default=8)
    sy.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PromptSegError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
