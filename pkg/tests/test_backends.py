"""Cross-backend equivalence: the compiled kernels must agree with the
NumPy fallback, and whole-pipeline outputs must match mask-for-mask."""
import json

import numpy as np
import pytest

from promptseg import _kernels
from promptseg.pipeline import PipelineConfig, results_to_json, run_pipeline, synth_scene

pytestmark = pytest.mark.skipif(
    "compiled" not in _kernels.available(),
    reason="compiled backend not built in this environment",
)

_pk = _kernels.resolve("python")
_ck = _kernels.resolve("compiled")


def test_compiled_backend_is_default_when_built():
    assert _kernels.resolve("auto").NAME == "compiled"


def test_label_components_agree(rng):
    for _ in range(200):
        h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        bits = rng.random((h, w)) < 0.45
        la, na = _pk.label_components(bits)
        lb, nb = _ck.label_components(bits)
        assert na == nb
        assert np.array_equal(la, lb)


def test_masked_means_agree(rng):
    for _ in range(100):
        n, hw, c = int(rng.integers(1, 12)), 64, int(rng.integers(1, 9))
        masks = rng.random((n, hw)) < 0.4
        feats = rng.normal(size=(hw, c)).astype(np.float32)
        a = _pk.masked_means(masks, feats)
        b = _ck.masked_means(masks, feats)
        assert np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))) < 1e-6


def test_cascade_scan_agree(rng):
    for _ in range(200):
        n, hw = int(rng.integers(1, 16)), 100
        masks = rng.random((n, hw)) < 0.3
        bg = rng.random(hw) < 0.4
        sims = rng.uniform(-0.3, 0.5, size=n)
        tau_ioa = float(rng.uniform(0.1, 1.0))
        tau_f = float(rng.uniform(-0.1, 0.4))
        a = _pk.cascade_scan(masks, bg, sims, tau_ioa, tau_f)
        b = _ck.cascade_scan(masks, bg, sims, tau_ioa, tau_f)
        assert np.array_equal(a, b)


def test_merge_scan_agree(rng):
    for _ in range(150):
        n, hw, c = int(rng.integers(1, 12)), 64, 5
        masks = rng.random((n, hw)) < 0.35
        masks[:, 0] |= ~masks.any(axis=1)  # keep every mask nonempty
        feats = rng.normal(size=(hw, c)).astype(np.float32)
        embs = _pk.masked_means(masks, feats)
        args = (float(rng.uniform(0, 0.6)), float(rng.uniform(0, 0.6)), True, True)
        aa, ma = _pk.merge_scan(masks, feats, embs, *args)
        ab, mb = _ck.merge_scan(masks, feats, embs, *args)
        assert ma == mb
        assert np.array_equal(aa, ab)


def test_rle_agree(rng):
    for _ in range(300):
        n = int(rng.integers(1, 200))
        flat = rng.random(n) < 0.5
        a = _pk.rle_encode(flat)
        b = _ck.rle_encode(flat)
        assert np.array_equal(a, b)
        assert np.array_equal(_pk.rle_decode(a, n), _ck.rle_decode(b, n))


def test_full_pipeline_outputs_identical(tmp_path):
    cfg = PipelineConfig()
    for seed in range(8):
        fm, _ = synth_scene(60, 60, 8, 1 + seed % 5, 0.05, seed=900 + seed)
        payloads = {}
        for name in ("python", "compiled"):
            _kernels.set_backend(name)
            try:
                payloads[name] = json.dumps(
                    results_to_json([run_pipeline(fm, cfg, image_id="s")])
                )
            finally:
                _kernels.set_backend("auto")
        assert payloads["python"] == payloads["compiled"]
