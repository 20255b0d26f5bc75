"""Key-feature extraction from a ViT encoder.

The patch tokens fed to the core are the outputs of the last attention
layer's key projection (all heads concatenated), taken for every image
patch (the class token is dropped) and reshaped to the patch grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

DEFAULT_MODEL = "facebook/dino-vitb8"
DEFAULT_SIZE = 480

# standard ImageNet statistics, matching the encoder's pretraining
_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)


class ModelLoadError(RuntimeError):
    pass


@dataclass
class ExtractionSpec:
    image_paths: list[Path]
    out_dir: Path
    size: int = DEFAULT_SIZE
    model_id: str = DEFAULT_MODEL
    device: str = "cpu"
    random_init: bool = False

    def __post_init__(self) -> None:
        self.image_paths = [Path(p) for p in self.image_paths]
        self.out_dir = Path(self.out_dir)


def _find_key_projection(model: torch.nn.Module) -> torch.nn.Module:
    """Locate the last attention layer's key linear across transformers versions."""
    for path in ("layers", "encoder.layer"):
        node = model
        try:
            for part in path.split("."):
                node = getattr(node, part)
        except AttributeError:
            continue
        last = node[-1]
        for attr in ("attention",):
            block = getattr(last, attr, None)
            if block is None:
                continue
            for key_name in ("k_proj", "key"):
                if hasattr(block, key_name):
                    return getattr(block, key_name)
            inner = getattr(block, "attention", None)
            if inner is not None and hasattr(inner, "key"):
                return inner.key
    raise ModelLoadError("could not locate the key projection of the last attention layer")


class KeyFeatureExtractor:
    """Runs a ViT and captures last-layer key features on a patch grid."""

    def __init__(self, model: torch.nn.Module, patch_size: int, device: str = "cpu") -> None:
        self.model = model.to(device).eval()
        self.patch_size = patch_size
        self.device = device
        self._key_proj = _find_key_projection(self.model)

    @classmethod
    def from_pretrained(cls, model_id: str = DEFAULT_MODEL, device: str = "cpu"):
        from transformers import ViTModel

        try:
            model = ViTModel.from_pretrained(model_id, add_pooling_layer=False)
        except Exception as e:  # network failure, missing weights, bad id
            raise ModelLoadError(f"could not load pretrained weights {model_id!r}: {e}") from e
        return cls(model, patch_size=model.config.patch_size, device=device)

    @classmethod
    def random_init(cls, size: int = DEFAULT_SIZE, device: str = "cpu", seed: int = 0):
        """Untrained ViT-B/8-shaped encoder; geometry-faithful, fast to build.

        Useful for pipeline plumbing checks without downloadable weights;
        the emitted features are meaningless for segmentation quality.
        """
        from transformers import ViTConfig, ViTModel

        torch.manual_seed(seed)
        cfg = ViTConfig(image_size=size, patch_size=8)
        return cls(ViTModel(cfg, add_pooling_layer=False), patch_size=8, device=device)

    def preprocess(self, image: Image.Image, size: int) -> torch.Tensor:
        """Stretch to size x size (no aspect preservation), ImageNet-normalize."""
        rgb = image.convert("RGB").resize((size, size), Image.BILINEAR)
        x = torch.from_numpy(np.asarray(rgb, dtype=np.float32) / 255.0).permute(2, 0, 1)
        return ((x - _MEAN) / _STD).unsqueeze(0)

    def extract_array(self, image: Image.Image, size: int = DEFAULT_SIZE) -> np.ndarray:
        """(size/patch, size/patch, c) float32 key features for one image."""
        if size % self.patch_size != 0:
            raise ValueError(f"size {size} not divisible by patch size {self.patch_size}")
        grid = size // self.patch_size
        pixel_values = self.preprocess(image, size).to(self.device)
        captured: dict[str, torch.Tensor] = {}

        def hook(_module, _inputs, output):
            captured["keys"] = output

        handle = self._key_proj.register_forward_hook(hook)
        try:
            with torch.no_grad():
                self.model(pixel_values=pixel_values, interpolate_pos_encoding=True)
        finally:
            handle.remove()
        keys = captured["keys"][0]  # (tokens, c)
        if keys.shape[0] != grid * grid + 1:
            raise ModelLoadError(
                f"expected {grid * grid + 1} tokens (grid + class token), got {keys.shape[0]}"
            )
        patch_keys = keys[1:]  # drop the class token
        return patch_keys.reshape(grid, grid, -1).cpu().numpy().astype(np.float32)


def extract(spec: ExtractionSpec, extractor: KeyFeatureExtractor | None = None) -> list[Path]:
    """Write one PMFM (plus sidecar) per input image; returns written paths."""
    from .pmfm import write_pmfm, write_sidecar

    if extractor is None:
        if spec.random_init:
            extractor = KeyFeatureExtractor.random_init(size=spec.size, device=spec.device)
        else:
            extractor = KeyFeatureExtractor.from_pretrained(spec.model_id, device=spec.device)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in spec.image_paths:
        with Image.open(path) as img:
            values = extractor.extract_array(img, size=spec.size)
        out = spec.out_dir / (path.stem + ".pmfm")
        write_pmfm(values, out)
        write_sidecar(
            out,
            {
                "source_image": path.name,
                "model": "random-init-vit-b8" if spec.random_init else spec.model_id,
                "feature": "last-attention-layer keys, heads concatenated",
                "resize": {
                    "mode": "stretch",
                    "size": [spec.size, spec.size],
                    "interpolation": "bilinear",
                },
                "normalization": "imagenet-mean-std",
                "grid": [spec.size // extractor.patch_size, spec.size // extractor.patch_size],
            },
        )
        written.append(out)
    return written
