"""Classifier backbones behind a single contract.

A backbone maps a grayscale image batch (N, 1, H, W) to two outputs:
two-class logits (N, 2) and the final convolutional block's feature maps
(N, C, h, w). It also exposes the final linear layer's class-weight
matrix (2, C), which together with the feature maps is what class
activation mapping needs. The forward pass is deterministic under fixed
parameters.

The toy four-block network is the desk-scale default and trains in
seconds on a CPU. The heavier torchvision architectures are optional
configurations of the same contract.
"""
from __future__ import annotations

import torch
from torch import nn

BACKBONE_NAMES = ("toy", "resnet50", "densenet121", "inception_v3")


class Backbone(nn.Module):
    """Contract base: subclasses set ``name`` and implement forward
    returning (logits, feature_maps) plus the ``class_weights`` property."""

    name: str = "abstract"

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        raise NotImplementedError

    @property
    def class_weights(self) -> torch.Tensor:
        raise NotImplementedError


class ToyCnn(Backbone):
    """Four convolution blocks with a stride-2 stem, global average
    pooling, and a two-class linear head. 224 px inputs give 14 x 14
    feature maps."""

    name = "toy"

    def __init__(self, channels: tuple[int, ...] = (8, 16, 32, 64)):
        super().__init__()
        c1, c2, c3, c4 = channels
        self.features = nn.Sequential(
            nn.Conv2d(1, c1, 5, stride=2, padding=2),
            nn.ReLU(inplace=True),
            nn.Conv2d(c1, c2, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c2, c3, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c3, c4, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        self.fc = nn.Linear(c4, 2)

    def forward(self, x):
        f = self.features(x)
        logits = self.fc(f.mean(dim=(2, 3)))
        return logits, f

    @property
    def class_weights(self) -> torch.Tensor:
        return self.fc.weight


def _to_rgb(x: torch.Tensor) -> torch.Tensor:
    return x.repeat(1, 3, 1, 1) if x.shape[1] == 1 else x


class _TorchvisionBackbone(Backbone):
    def __init__(self, name: str, pretrained: bool):
        super().__init__()
        try:
            import torchvision.models as tvm
        except ImportError as exc:
            raise ImportError(
                f"backbone {name!r} needs torchvision (install the 'backbones' extra)"
            ) from exc
        self.name = name
        weights = "DEFAULT" if pretrained else None
        if name == "resnet50":
            net = tvm.resnet50(weights=weights)
            self._stages = nn.Sequential(
                net.conv1, net.bn1, net.relu, net.maxpool,
                net.layer1, net.layer2, net.layer3, net.layer4,
            )
            self.fc = nn.Linear(2048, 2)
        elif name == "densenet121":
            net = tvm.densenet121(weights=weights)
            self._stages = nn.Sequential(net.features, nn.ReLU(inplace=True))
            self.fc = nn.Linear(1024, 2)
        elif name == "inception_v3":
            net = tvm.inception_v3(weights=weights, aux_logits=True, init_weights=not pretrained)
            net.AuxLogits = None
            net.aux_logits = False
            # Everything up to (not including) the average pool and fc.
            self._stages = nn.Sequential(
                net.Conv2d_1a_3x3, net.Conv2d_2a_3x3, net.Conv2d_2b_3x3,
                nn.MaxPool2d(3, stride=2), net.Conv2d_3b_1x1, net.Conv2d_4a_3x3,
                nn.MaxPool2d(3, stride=2), net.Mixed_5b, net.Mixed_5c, net.Mixed_5d,
                net.Mixed_6a, net.Mixed_6b, net.Mixed_6c, net.Mixed_6d, net.Mixed_6e,
                net.Mixed_7a, net.Mixed_7b, net.Mixed_7c,
            )
            self.fc = nn.Linear(2048, 2)
        else:
            raise ValueError(f"unknown torchvision backbone {name!r}")

    def forward(self, x):
        f = self._stages(_to_rgb(x))
        logits = self.fc(f.mean(dim=(2, 3)))
        return logits, f

    @property
    def class_weights(self) -> torch.Tensor:
        return self.fc.weight


def build_backbone(name: str, pretrained: bool | None = None) -> Backbone:
    """Instantiate a backbone by name. ``pretrained=None`` resolves to
    general-image pretraining for the torchvision architectures and random
    initialization for the toy network."""
    if name not in BACKBONE_NAMES:
        raise ValueError(f"unknown backbone {name!r}; choose from {BACKBONE_NAMES}")
    if name == "toy":
        return ToyCnn()
    return _TorchvisionBackbone(name, pretrained=True if pretrained is None else pretrained)
