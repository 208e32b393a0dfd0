"""Backbone activation dumper producing SBAT tensors and manifests."""

from .backbone import build_backbone, forward_activations
from .extract import extract, prepare_image, read_crop_file, read_image_list
from .sbat import write_manifest, write_sbat

__version__ = "0.1.0"

__all__ = [
    "build_backbone",
    "extract",
    "forward_activations",
    "prepare_image",
    "read_crop_file",
    "read_image_list",
    "write_manifest",
    "write_sbat",
]
