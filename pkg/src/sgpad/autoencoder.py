"""Autoencoder-generated pseudosaliency.

A small encoder-decoder with skip connections learns to predict fused
human saliency from preprocessed fingerprint images, then stamps out
FOI-level maps for unannotated samples. Downstream granularities follow
the usual chain with the autoencoder's 0.5 AOI threshold.

The architecture is deliberately contract-first: anything image-in,
[0, 1]-field-out with matching dims satisfies downstream consumers, so
the desk-scale network here is a two-level U-shaped model; heavier
backbones are a configuration concern, not a requirement.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from sklearn.base import BaseEstimator
from torch import nn

from .saliency import Granularity, SaliencyMap, SaliencySource
from .validation import check_image_batch


@dataclass(frozen=True)
class PredictorMetadata:
    input_dims: tuple[int, int]
    seed: int
    epochs: int
    loss_curve: tuple[float, ...]

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1]


class _UNet(nn.Module):
    def __init__(self, base_channels: int = 16):
        super().__init__()
        c = base_channels

        def block(cin, cout):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 3, padding=1), nn.ReLU(inplace=True),
                nn.Conv2d(cout, cout, 3, padding=1), nn.ReLU(inplace=True),
            )

        self.enc1 = block(1, c)
        self.enc2 = block(c, 2 * c)
        self.bottleneck = block(2 * c, 4 * c)
        self.up2 = nn.ConvTranspose2d(4 * c, 2 * c, 2, stride=2)
        self.dec2 = block(4 * c, 2 * c)
        self.up1 = nn.ConvTranspose2d(2 * c, c, 2, stride=2)
        self.dec1 = block(2 * c, c)
        self.head = nn.Conv2d(c, 1, 1)

    def forward(self, x):
        s1 = self.enc1(x)
        s2 = self.enc2(F.max_pool2d(s1, 2))
        b = self.bottleneck(F.max_pool2d(s2, 2))
        d2 = self.dec2(torch.cat([self.up2(b), s2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), s1], dim=1))
        # Linear head: squared error against [0, 1] targets saturates through
        # a sigmoid; predictions are clamped into range at inference instead.
        return self.head(d1)


class SaliencyAutoencoder(BaseEstimator):
    """Image-to-saliency regressor (sklearn-style fit/predict).

    ``fit(X, y)`` takes images and target saliency grids of identical
    (N, H, W) shape with H and W divisible by 4; training minimizes mean
    squared error and is deterministic under ``seed``. ``predict(X)``
    returns per-pixel fields in [0, 1] with dims equal to the input dims.
    """

    def __init__(self, epochs: int = 40, learning_rate: float = 1e-3,
                 batch_size: int = 8, base_channels: int = 16, seed: int = 0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.base_channels = base_channels
        self.seed = seed

    def fit(self, X, y):
        X = check_image_batch(X)
        y = check_image_batch(y)
        if X.shape != y.shape:
            raise ValueError(f"dimension mismatch: images {X.shape} vs targets {y.shape}")
        n, height, width = X.shape
        if n < 2:
            raise ValueError("training requires at least 2 (image, saliency) pairs")
        if height % 4 or width % 4:
            raise ValueError(f"input dims must be divisible by 4, got {height}x{width}")

        prev_threads = torch.get_num_threads()
        torch.set_num_threads(1)
        try:
            torch.manual_seed(self.seed)
            rng = np.random.default_rng(self.seed)
            model = _UNet(self.base_channels)
            images = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))[:, None]
            targets = torch.from_numpy(np.ascontiguousarray(y, dtype=np.float32))[:, None]
            opt = torch.optim.Adam(model.parameters(), lr=self.learning_rate)
            loss_curve = []
            for _ in range(self.epochs):
                model.train()
                order = rng.permutation(n)
                epoch_losses = []
                for start in range(0, n, self.batch_size):
                    idxs = torch.as_tensor(order[start : start + self.batch_size])
                    pred = model(images[idxs])
                    loss = F.mse_loss(pred, targets[idxs])
                    opt.zero_grad()
                    loss.backward()
                    opt.step()
                    epoch_losses.append(float(loss.detach()) * len(idxs))
                loss_curve.append(sum(epoch_losses) / n)
            model.eval()
            self.model_ = model
            self.metadata_ = PredictorMetadata(
                input_dims=(height, width), seed=self.seed, epochs=self.epochs,
                loss_curve=tuple(loss_curve),
            )
        finally:
            torch.set_num_threads(prev_threads)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("autoencoder is not fitted")
        X = check_image_batch(X, dims=self.metadata_.input_dims)
        images = torch.from_numpy(np.ascontiguousarray(X, dtype=np.float32))[:, None]
        outs = []
        with torch.no_grad():
            for start in range(0, images.shape[0], self.batch_size):
                outs.append(self.model_(images[start : start + self.batch_size])[:, 0].numpy())
        return np.clip(np.concatenate(outs, axis=0).astype(np.float64), 0.0, 1.0)


@dataclass(frozen=True)
class AutoencoderConfig:
    epochs: int = 40
    learning_rate: float = 1e-3
    batch_size: int = 8
    base_channels: int = 16
    seed: int = 0


def train_saliency_autoencoder(
    pairs: list[tuple[np.ndarray, SaliencyMap]],
    config: AutoencoderConfig = AutoencoderConfig(),
) -> SaliencyAutoencoder:
    """Fit the predictor on (preprocessed image, fused human FOI) pairs."""
    if not pairs:
        raise ValueError("training requires a non-empty pair list")
    X = np.stack([img for img, _ in pairs])
    y = np.stack([m.values for _, m in pairs])
    est = SaliencyAutoencoder(
        epochs=config.epochs, learning_rate=config.learning_rate,
        batch_size=config.batch_size, base_channels=config.base_channels, seed=config.seed,
    )
    return est.fit(X, y)


def predict_saliency(model: SaliencyAutoencoder, image: np.ndarray) -> SaliencyMap:
    """Predict one FOI map; output dims equal input dims."""
    values = model.predict(image[None])[0]
    return SaliencyMap(values, Granularity.FOI, SaliencySource.AUTOENCODER)


def save_predictor(model: SaliencyAutoencoder, path: str | Path) -> None:
    """Opaque model file plus a JSON metadata sidecar (input dims, seed,
    epochs, final loss)."""
    path = Path(path)
    torch.save(
        {"state_dict": model.model_.state_dict(), "params": model.get_params(),
         "metadata": asdict(model.metadata_)},
        path,
    )
    meta = asdict(model.metadata_)
    meta["final_loss"] = model.metadata_.final_loss
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def load_predictor(path: str | Path) -> SaliencyAutoencoder:
    payload = torch.load(path, weights_only=False)
    est = SaliencyAutoencoder(**payload["params"])
    est.model_ = _UNet(est.base_channels)
    est.model_.load_state_dict(payload["state_dict"])
    est.model_.eval()
    meta = payload["metadata"]
    est.metadata_ = PredictorMetadata(
        input_dims=tuple(meta["input_dims"]), seed=meta["seed"], epochs=meta["epochs"],
        loss_curve=tuple(meta["loss_curve"]),
    )
    return est
