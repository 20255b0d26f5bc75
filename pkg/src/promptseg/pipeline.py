"""End-to-end pipeline: prompt -> prune -> merge, plus configuration,
nearest-neighbor upsampling, synthetic scene generation, and the
benchmark harness.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    Downscale,
    NotEnoughInputs,
    PlacementFailure,
)
from .evaluation import rle_encode
from .feature_io import FeatureMap, l2_normalize, load_feature_map
from .mask import BinaryMask
from .merging import MergeConfig, finalize, merge_all
from .prompting import RandomPrompts, RegularGrid, generate_proposals
from .pruning import Cascade, IoAOnly, SimilarityOnly, apply_filter, vote_background

PROMPT_STRATEGIES = ("grid", "random")
FILTER_STRATEGIES = ("cascade", "ioa", "similarity")
SCORE_MODES = ("area", "constant")
POSTPROCESS = "nearest"


@dataclass
class PipelineConfig:
    """All thresholds and strategy selectors, JSON-serializable as a flat dict."""

    stride: int = 4
    tau_b: float = 0.2
    tau_ioa_bg: float = 0.8
    tau_f_bg: float = 0.1
    tau_ioa_merge: float = 0.1
    tau_f_merge: float = 0.1
    prompt_strategy: str = "grid"
    random_count: int = 225
    random_seed: int = 0
    filter_strategy: str = "cascade"
    tau_ioa_only: float = 0.5
    tau_f_only: float = 0.0
    enable_feature_condition: bool = True
    enable_ioa_condition: bool = True
    min_area_fraction: float | None = None
    score_mode: str = "area"
    output_size: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        for name in ("tau_b", "tau_ioa_bg", "tau_f_bg", "tau_ioa_merge", "tau_f_merge",
                     "tau_ioa_only", "tau_f_only"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.prompt_strategy not in PROMPT_STRATEGIES:
            raise ConfigError(
                f"prompt_strategy must be one of {PROMPT_STRATEGIES}, got {self.prompt_strategy!r}"
            )
        if self.filter_strategy not in FILTER_STRATEGIES:
            raise ConfigError(
                f"filter_strategy must be one of {FILTER_STRATEGIES}, got {self.filter_strategy!r}"
            )
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}, got {self.score_mode!r}")
        if not (self.enable_feature_condition or self.enable_ioa_condition):
            raise ConfigError("at least one merge condition must be enabled")
        if self.output_size is not None:
            h, w = self.output_size
            if h < 1 or w < 1:
                raise ConfigError(f"output_size must be positive, got {self.output_size}")
            self.output_size = (int(h), int(w))

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        """Strict constructor: unknown keys are an error, not a warning."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "output_size" in data and data["output_size"] is not None:
            data = dict(data)
            data["output_size"] = tuple(data["output_size"])
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a flat JSON object")
        return cls.from_dict(payload)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides)

    def prompt(self):
        if self.prompt_strategy == "grid":
            return RegularGrid(self.stride)
        return RandomPrompts(self.random_count, self.random_seed)

    def filter(self):
        if self.filter_strategy == "cascade":
            return Cascade(self.tau_ioa_bg, self.tau_f_bg)
        if self.filter_strategy == "ioa":
            return IoAOnly(self.tau_ioa_only)
        return SimilarityOnly(self.tau_f_only)

    def merge(self) -> MergeConfig:
        return MergeConfig(
            tau_f=self.tau_f_merge,
            tau_ioa=self.tau_ioa_merge,
            enable_feature_condition=self.enable_feature_condition,
            enable_ioa_condition=self.enable_ioa_condition,
        )

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if out["output_size"] is not None:
            out["output_size"] = list(out["output_size"])
        return out


@dataclass
class ScoredMask:
    mask: BinaryMask
    score: float


@dataclass
class SegmentationResult:
    image_id: str
    feature_shape: tuple[int, int]
    output_shape: tuple[int, int]
    masks: list[ScoredMask]
    timing: dict[str, float] = field(default_factory=dict)
    postprocess: str = POSTPROCESS


def upsample_mask(mask: BinaryMask, height: int, width: int) -> BinaryMask:
    """Nearest-neighbor upscale; output pixel (y, x) reads source
    (y*h // height, x*w // width)."""
    h, w = mask.shape
    if height < h or width < w:
        raise Downscale(f"cannot shrink {h}x{w} mask to {height}x{width}")
    if (height, width) == (h, w):
        return mask
    rows = (np.arange(height, dtype=np.int64) * h) // height
    cols = (np.arange(width, dtype=np.int64) * w) // width
    return BinaryMask(mask.bits[np.ix_(rows, cols)])


def run_pipeline(fm: FeatureMap, cfg: PipelineConfig, image_id: str = "") -> SegmentationResult:
    """Run the full prompt/prune/merge pipeline on one feature map."""
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    normalized = l2_normalize(fm)
    timing["normalize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    proposals, bg_candidates = generate_proposals(normalized, cfg.prompt(), cfg.tau_b)
    timing["prompt"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bg = vote_background(bg_candidates, shape=(fm.height, fm.width))
    timing["vote"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    kept = apply_filter(proposals, bg, normalized, cfg.filter())
    timing["filter"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    clusters = merge_all(kept, normalized, cfg.merge())
    masks = finalize(clusters, cfg.min_area_fraction)
    timing["merge"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out_h, out_w = cfg.output_size if cfg.output_size else (fm.height, fm.width)
    scored = []
    for m in masks:
        up = upsample_mask(m, out_h, out_w)
        score = up.area / (out_h * out_w) if cfg.score_mode == "area" else 1.0
        scored.append(ScoredMask(up, score))
    timing["postprocess"] = time.perf_counter() - t0

    return SegmentationResult(
        image_id=image_id,
        feature_shape=(fm.height, fm.width),
        output_shape=(out_h, out_w),
        masks=scored,
        timing=timing,
    )


def results_to_json(results: Iterable[SegmentationResult]) -> dict:
    """Predictions payload in the evaluator's schema."""
    images = []
    for r in results:
        images.append(
            {
                "image_id": r.image_id,
                "height": r.output_shape[0],
                "width": r.output_shape[1],
                "masks": [
                    {"counts": rle_encode(sm.mask).counts, "score": sm.score}
                    for sm in r.masks
                ],
            }
        )
    return {"postprocess": POSTPROCESS, "images": images}


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


def synth_scene(
    h: int,
    w: int,
    c: int,
    num_objects: int,
    noise_sigma: float,
    seed: int,
) -> tuple[FeatureMap, list[BinaryMask]]:
    """Rectangles on an orthogonal background, with Gaussian feature noise.

    Each object and the background get a distinct standard-basis feature
    vector (so num_objects + 1 <= c). `noise_sigma` scales the isotropic
    noise vector as a whole: components are iid N(0, noise_sigma^2 / c),
    so E|noise|^2 = noise_sigma^2 regardless of the channel count.
    Rectangles keep a 2-pixel margin from each other and from the image
    border; placement is rejection sampling with a 10,000-attempt
    budget. Normalization is left to the pipeline.
    """
    if num_objects + 1 > c:
        raise ConfigError(f"need num_objects + 1 <= c, got {num_objects + 1} > {c}")
    if num_objects < 0:
        raise ConfigError("num_objects must be >= 0")
    rng = np.random.default_rng(seed)
    margin = 2
    side = min(h, w)
    lo = max(2, round(0.14 * side))
    hi = max(lo, round(0.30 * side))

    placed: list[tuple[int, int, int, int]] = []  # (r0, c0, r1, c1) inclusive
    attempts = 0
    while len(placed) < num_objects:
        if attempts >= 10_000:
            raise PlacementFailure(
                f"could not place {num_objects} rectangles in {h}x{w} after {attempts} attempts"
            )
        attempts += 1
        sh = int(rng.integers(lo, hi + 1))
        sw = int(rng.integers(lo, hi + 1))
        if h - margin - sh < margin or w - margin - sw < margin:
            continue
        r0 = int(rng.integers(margin, h - margin - sh + 1))
        c0 = int(rng.integers(margin, w - margin - sw + 1))
        cand = (r0, c0, r0 + sh - 1, c0 + sw - 1)
        if all(_chebyshev_gap(cand, p) >= margin for p in placed):
            placed.append(cand)

    labels = np.zeros((h, w), dtype=np.int64)
    masks = []
    for k, (r0, c0, r1, c1) in enumerate(placed, start=1):
        labels[r0 : r1 + 1, c0 : c1 + 1] = k
        bits = np.zeros((h, w), dtype=bool)
        bits[r0 : r1 + 1, c0 : c1 + 1] = True
        masks.append(BinaryMask(bits))

    basis = np.eye(c, dtype=np.float32)
    values = basis[labels]  # background = e_0, object k = e_k
    if noise_sigma > 0:
        values = values + rng.normal(0.0, noise_sigma / np.sqrt(c), size=values.shape)
    return FeatureMap(values.astype(np.float32)), masks


def _chebyshev_gap(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> int:
    dr = max(a[0] - b[2], b[0] - a[2], 0)
    dc = max(a[1] - b[3], b[1] - a[3], 0)
    return max(dr, dc)


# ---------------------------------------------------------------------------
# Benchmark harness
# ---------------------------------------------------------------------------


def bench(
    feature_dir: str | Path,
    warmup_count: int,
    measure_count: int,
    cfg: PipelineConfig,
    backend: str = "auto",
) -> tuple[dict, dict]:
    """Timed pipeline runs over a directory of PMFM files.

    The first `warmup_count` files run untimed, the next `measure_count`
    are measured individually. Returns (report, predictions_payload);
    the report is labeled core-only: it covers mask generation on
    precomputed features and is not comparable to end-to-end systems
    that include feature extraction and heavier post-processing.
    """
    files = sorted(Path(feature_dir).glob("*.pmfm"))
    needed = warmup_count + measure_count
    if len(files) < needed:
        raise NotEnoughInputs(
            f"{feature_dir}: need {needed} PMFM files, found {len(files)}"
        )
    previous = _kernels.backend_name()
    _kernels.set_backend(backend)
    try:
        for f in files[:warmup_count]:
            run_pipeline(load_feature_map(f), cfg, image_id=f.stem)

        wall_ms = []
        stage_totals: dict[str, float] = {}
        results = []
        for f in files[warmup_count:needed]:
            fm = load_feature_map(f)
            t0 = time.perf_counter()
            result = run_pipeline(fm, cfg, image_id=f.stem)
            wall_ms.append((time.perf_counter() - t0) * 1000.0)
            for stage, sec in result.timing.items():
                stage_totals[stage] = stage_totals.get(stage, 0.0) + sec * 1000.0
            results.append(result)
    finally:
        _kernels.set_backend(previous)

    wall = np.asarray(wall_ms)
    total_s = float(wall.sum()) / 1000.0
    report = {
        "label": "core-only",
        "note": (
            "Times cover the mask-generation core on precomputed feature maps "
            "only; figures are not comparable to end-to-end systems that "
            "include neural feature extraction and post-processing."
        ),
        "backend": _kernels.resolve(backend).NAME,
        "num_warmup": warmup_count,
        "num_measured": measure_count,
        "per_image_ms": {
            "mean": float(wall.mean()),
            "median": float(np.median(wall)),
            "p95": float(np.percentile(wall, 95)),
        },
        "fps": measure_count / total_s if total_s > 0 else float("inf"),
        "stage_ms_mean": {k: v / measure_count for k, v in sorted(stage_totals.items())},
        "config": cfg.to_dict(),
    }
    return report, results_to_json(results)
