"""
Class activation maps for the GAP-headed regressors.

For a model whose GAP layer feeds a linear head directly, the heatmap is
sum_k w_k F_k over the feature maps entering GAP. Its spatial mean plus the
head bias equals the model output.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from core.exceptions import ConfigError, DataError, ShapeError
from netblocks.network import Network, layer_id

logger = logging.getLogger(__name__)


@dataclass
class CamMap:
    heatmap: np.ndarray
    overlay: np.ndarray
    prediction: float
    bias: float

    def to_dict(self):
        return {
            'prediction': self.prediction,
            'bias': self.bias,
            'heatmap_shape': list(self.heatmap.shape),
            'heatmap_mean': float(self.heatmap.mean()),
        }


def _head(network, params):
    gap = network.gap_index()
    layers = network.spec.layers
    if gap + 1 >= len(layers) or layers[gap + 1]['kind'] != 'linear' or layers[gap + 1]['out_features'] != 1:
        raise ConfigError(f"model '{network.spec.name}' needs a scalar linear layer right after GAP for CAM")
    head = params.layer_params(layer_id(gap + 1))
    return head['w'][0].astype(np.float64), float(head['b'][0])


def normalize(values):
    """Min-max scale to [0, 1]; a constant map becomes zeros."""
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros_like(values, dtype=np.float32)
    return ((values - low) / (high - low)).astype(np.float32)


def compute_cam(params, image):
    """
    Args:
        params: ModelParams of a GAP-headed scalar regressor
        image: C x H x W input at the model input size

    Returns:
        CamMap with the feature-resolution heatmap and an H x W overlay in [0, 1]
    """
    network = Network(params.spec)
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3:
        raise ShapeError(f"CAM needs a single C x H x W image, got shape {image.shape}")
    weights, bias = _head(network, params)
    x = image[None]
    features = network.features(params, x)[0].astype(np.float64)
    heatmap = np.tensordot(weights, features, axes=(0, 0))
    prediction = float(network.predict(params, x)[0, 0])

    h, w = image.shape[1:]
    upsampled = cv2.resize(heatmap.astype(np.float32), (w, h), interpolation=cv2.INTER_LINEAR)
    return CamMap(heatmap, normalize(upsampled), prediction, bias)


def write_cam_png(path, cam, image=None, alpha=0.5):
    """JET-colored overlay, blended over the RGB image when one is given (R,G,B order)."""
    colored = cv2.applyColorMap((cam.overlay * 255).round().astype(np.uint8), cv2.COLORMAP_JET)
    if image is not None:
        rgb = np.clip(np.asarray(image)[:3], 0.0, 1.0)
        bgr = (rgb[::-1].transpose(1, 2, 0) * 255).round().astype(np.uint8)
        colored = cv2.addWeighted(colored, alpha, bgr, 1.0 - alpha, 0.0)
    path = Path(path)
    if not cv2.imwrite(str(path), colored):
        raise DataError(f"cannot write {path}")
    return path
