import numpy as np
import pytest
import torch
from PIL import Image


@pytest.fixture(scope="session")
def tiny_extractor():
    """Untrained patch-8 ViT small enough for fast tests; same geometry
    contract as the production encoder (480/8 -> 60x60 tokens)."""
    from transformers import ViTConfig, ViTModel

    from promptseg_extractor.vit_keys import KeyFeatureExtractor

    torch.manual_seed(1234)
    cfg = ViTConfig(
        image_size=480,
        patch_size=8,
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
    )
    return KeyFeatureExtractor(ViTModel(cfg, add_pooling_layer=False), patch_size=8)


@pytest.fixture
def sample_image():
    rng = np.random.default_rng(7)
    arr = rng.integers(0, 255, size=(333, 517, 3), dtype=np.uint8)
    arr[80:200, 120:300] = [200, 40, 40]  # a blocky "object"
    return Image.fromarray(arr, mode="RGB")
