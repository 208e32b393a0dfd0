"""VGG16-class backbone with a named capture layer.

The pool5 layer is the end of the convolutional stack: 512 channels, spatial
size input/32 (7x7 for a 224x224 input).  relu5_3 captures the same channels
before the final max pool.  Weights load from a local state-dict file when
given; otherwise the network is randomly initialized under a fixed seed so
repeated runs stay bitwise identical.
"""

import warnings

import torch
from torchvision.models import vgg16

LAYERS = ("pool5", "relu5_3")

# index into vgg16().features; 30 is the last ReLU, 31 the final MaxPool2d
_LAYER_END = {"relu5_3": 31, "pool5": 32}


def build_backbone(layer: str = "pool5", weights_path=None,
                   init_seed: int = 0) -> torch.nn.Module:
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}, expected one of {LAYERS}")
    torch.manual_seed(init_seed)
    model = vgg16(weights=None)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    else:
        warnings.warn(
            "no weights file given; using a seeded random initialization "
            "(layer shapes and signs are valid, retrieval quality is not)",
            stacklevel=2,
        )
    trunk = torch.nn.Sequential(*list(model.features[: _LAYER_END[layer]]))
    trunk.eval()
    for p in trunk.parameters():
        p.requires_grad_(False)
    return trunk


@torch.no_grad()
def forward_activations(trunk: torch.nn.Module, image_chw: torch.Tensor):
    """Run one (3, H, W) float tensor through the trunk, return (C, h, w)."""
    out = trunk(image_chw.unsqueeze(0))
    return out.squeeze(0).cpu().numpy()
