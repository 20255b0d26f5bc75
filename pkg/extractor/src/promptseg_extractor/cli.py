"""Command-line interface: extract / convert-gt / overlay."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".webp"}


def _collect_images(spec: str) -> list[Path]:
    path = Path(spec)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise FileNotFoundError(f"{path}: no images found")
        return files
    if path.exists():
        return [path]
    files = [Path(p) for p in spec.split(",")]
    missing = [p for p in files if not p.exists()]
    if missing:
        raise FileNotFoundError(f"missing image(s): {missing}")
    return files


def cmd_extract(args) -> int:
    from .vit_keys import ExtractionSpec, extract

    spec = ExtractionSpec(
        image_paths=_collect_images(args.images),
        out_dir=Path(args.out),
        size=args.size,
        model_id=args.model,
        device=args.device,
        random_init=args.random_init,
    )
    written = extract(spec)
    print(f"wrote {len(written)} PMFM files to {spec.out_dir}", file=sys.stderr)
    return 0


def cmd_convert_gt(args) -> int:
    from .convert import convert_gt_file

    subset = None
    if args.subset:
        subset_path = Path(args.subset)
        if subset_path.exists():
            tokens = subset_path.read_text().split()
        else:
            tokens = args.subset.split(",")
        subset = {t.strip() for t in tokens if t.strip()}
        subset |= {int(t) for t in subset if t.isdigit()}
    report = convert_gt_file(args.coco, args.out, subset)
    print(json.dumps(report.to_dict()), file=sys.stderr)
    return 0


def cmd_overlay(args) -> int:
    from .overlay import overlay_from_predictions

    img = overlay_from_predictions(args.image, args.pred, args.image_id)
    img.save(args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptseg-extract",
        description="Feature extraction and annotation conversion for the promptseg core.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="encode images to PMFM feature maps")
    ex.add_argument("--images", required=True, help="image directory, file, or comma list")
    ex.add_argument("--out", required=True, help="output directory")
    ex.add_argument("--size", type=int, default=480, help="square resize target")
    ex.add_argument("--model", default="facebook/dino-vitb8")
    ex.add_argument("--device", default="cpu")
    ex.add_argument(
        "--random-init",
        action="store_true",
        help="use an untrained encoder of the same geometry (plumbing checks only)",
    )
    ex.set_defaults(func=cmd_extract)

    cg = sub.add_parser("convert-gt", help="convert COCO annotations to evaluator GT JSON")
    cg.add_argument("--coco", required=True)
    cg.add_argument("--out", required=True)
    cg.add_argument("--subset", help="comma list of image ids, or a file with one id per line")
    cg.set_defaults(func=cmd_convert_gt)

    ov = sub.add_parser("overlay", help="render predictions over an image for inspection")
    ov.add_argument("--image", required=True)
    ov.add_argument("--pred", required=True, help="predictions JSON from `promptseg segment`")
    ov.add_argument("--out", required=True, help="output PNG path")
    ov.add_argument("--image-id", help="override the prediction entry to draw")
    ov.set_defaults(func=cmd_overlay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # CLI boundary: report machine-readably, exit nonzero
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
