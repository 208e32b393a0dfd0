"""Extraction pipeline and CLI.

Reads an image list, optionally crops queries to their annotated boxes,
applies the half-size rule for very large images, runs the backbone, and
writes one SBAT file per image plus a manifest in input order.  Undecodable
images are skipped with a warning.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbone import LAYERS, build_backbone, forward_activations
from .sbat import write_manifest, write_sbat

# ImageNet statistics used by the VGG-family preprocessing
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

_RESAMPLE = {
    "bilinear": Image.BILINEAR,
    "bicubic": Image.BICUBIC,
    "nearest": Image.NEAREST,
}


def read_image_list(path) -> list[tuple[str, str]]:
    """Lines are `path` or `image_id<TAB>path`; ids default to the stem."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "\t" in line:
                image_id, img_path = line.split("\t", 1)
            else:
                image_id, img_path = Path(line).stem, line
            entries.append((image_id, img_path))
    return entries


def read_crop_file(path) -> dict[str, tuple[float, float, float, float]]:
    """Lines `image_id<TAB>x1<TAB>y1<TAB>x2<TAB>y2` in pixel coordinates."""
    boxes = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path}:{lineno}: expected id and 4 box coords")
            boxes[fields[0]] = tuple(float(v) for v in fields[1:])
    return boxes


def prepare_image(img: Image.Image, crop=None, max_side: int = 1024,
                  interpolation: str = "bilinear") -> torch.Tensor:
    """Crop (image space), apply the half-size rule, normalize to a CHW tensor."""
    img = img.convert("RGB")
    if crop is not None:
        x1, y1, x2, y2 = crop
        img = img.crop((round(x1), round(y1), round(x2), round(y2)))
    if max(img.size) > max_side:
        img = img.resize((max(1, img.width // 2), max(1, img.height // 2)),
                         _RESAMPLE[interpolation])
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    return torch.from_numpy(arr.transpose(2, 0, 1).copy())


def extract(image_entries, out_dir, layer="pool5", weights=None,
            crop_boxes=None, max_side=1024, interpolation="bilinear",
            init_seed=0):
    """Run the backbone over all images; returns the manifest path.

    One SBAT file per decodable image; skipped images are excluded from the
    manifest with a warning.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.set_num_threads(1)  # bitwise-reproducible inference
    trunk = build_backbone(layer=layer, weights_path=weights,
                           init_seed=init_seed)
    crop_boxes = crop_boxes or {}
    records = []
    for image_id, img_path in image_entries:
        try:
            with Image.open(img_path) as img:
                tensor = prepare_image(img, crop_boxes.get(image_id),
                                       max_side, interpolation)
        except (OSError, ValueError) as exc:
            warnings.warn(f"skipping {img_path}: {exc}", stacklevel=2)
            continue
        activations = forward_activations(trunk, tensor)
        sbat_path = out_dir / f"{image_id}.sbat"
        write_sbat(activations, sbat_path)
        records.append((image_id, str(sbat_path)))
    manifest_path = out_dir / "manifest.tsv"
    write_manifest(records, manifest_path)
    return manifest_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sba-extract",
        description="Dump convolutional activations into SBAT tensor files "
                    "plus a manifest",
    )
    parser.add_argument("--images", required=True,
                        help="text file listing images, one per line "
                             "(optionally image_id<TAB>path)")
    parser.add_argument("--layer", default="pool5", choices=LAYERS,
                        help="capture layer of the backbone")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--crop-file", default=None, dest="crop_file",
                        help="query boxes: image_id<TAB>x1<TAB>y1<TAB>x2<TAB>y2")
    parser.add_argument("--max-side", type=int, default=1024, dest="max_side",
                        help="images with a larger max side are halved")
    parser.add_argument("--interpolation", default="bilinear",
                        choices=sorted(_RESAMPLE),
                        help="resampling filter for the half-size rule")
    parser.add_argument("--weights", default=None,
                        help="local state-dict file for the backbone")
    parser.add_argument("--init-seed", type=int, default=0, dest="init_seed",
                        help="seed for random initialization when no weights "
                             "are given")
    args = parser.parse_args(argv)
    try:
        entries = read_image_list(args.images)
        crops = read_crop_file(args.crop_file) if args.crop_file else None
        manifest = extract(entries, args.out, layer=args.layer,
                           weights=args.weights, crop_boxes=crops,
                           max_side=args.max_side,
                           interpolation=args.interpolation,
                           init_seed=args.init_seed)
    except (OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
