"""Image-to-feature bridge for the promptseg core.

Extracts last-attention-layer key features from a ViT encoder into
PMFM files and converts COCO-style annotations into the core
evaluator's ground-truth JSON. Communicates with the core exclusively
through those published file formats.
"""
from .convert import ConversionReport, convert_gt, convert_gt_file, rasterize_polygons
from .pmfm import write_pmfm, write_sidecar
from .rle import counts_from_string, counts_to_string, decode_counts, encode_counts
from .vit_keys import ExtractionSpec, KeyFeatureExtractor, ModelLoadError, extract

__version__ = "0.1.0"
