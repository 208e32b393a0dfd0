"""Writers for the SBAT tensor format and the tab-separated manifest.

These mirror the consumer's on-disk contract: 4-byte magic "SBAT", u32
version 1, u32 C, H, W, then C*H*W float32 little-endian values in (c, y, x)
order.  Manifest lines are `image_id<TAB>tensor_path[<TAB>label]`.
"""

import struct

import numpy as np

SBAT_MAGIC = b"SBAT"
SBAT_VERSION = 1


def write_sbat(activations: np.ndarray, path) -> None:
    arr = np.ascontiguousarray(activations, dtype="<f4")
    if arr.ndim != 3 or any(s < 1 for s in arr.shape):
        raise ValueError(f"activations must be (C, H, W) with positive dims, "
                         f"got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("activations contain NaN or Inf")
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(SBAT_MAGIC + struct.pack("<IIII", SBAT_VERSION, c, h, w))
        fh.write(arr.tobytes())


def write_manifest(records, path) -> None:
    """records: iterable of (image_id, tensor_path) pairs, order preserved."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for image_id, tensor_path in records:
            fh.write(f"{image_id}\t{tensor_path}\n")
