#!/usr/bin/env python
"""
Acceptance: class activation maps.

The heatmap mean plus the head bias reproduces the prediction for 100 random
parameter draws of both regressors, and on a counter trained on synthetic
patches the top-decile CAM pixels land on plant bases at least twice as often
as the bases' share of the patch area.

Run:
    python tests/test_acceptance_cam.py
"""
import cv2
import numpy as np

from tester import AcceptanceTester

from core.rng import stream
from imaging.components import connected_components
from imaging.patches import PatchConfig
from netblocks.network import Network, layer_id
from netblocks.specs import BiomassConfig, EmergenceConfig, build_biomass_spec, build_emergence_spec
from phenopipe.cam import compute_cam
from phenopipe.counting import CounterTrainConfig, labelled_patches, train_counter
from synthdata.generator import SynthConfig, generate_dataset

DRAWS = 100
SEED = 13
PATCHES = PatchConfig(size=64)
NET = EmergenceConfig(base_width=8, input_size=(64, 64))
TRAIN = CounterTrainConfig(epochs=10, flips=True)
BASE_RADIUS = 3


def check_identity(tester):
    tester.section(f"1. CAM IDENTITY ({DRAWS} RANDOM DRAWS)")
    specs = {
        'emergence': build_emergence_spec(EmergenceConfig(base_width=8, input_size=(32, 32))),
        'biomass': build_biomass_spec(BiomassConfig(base_width=8, pool_stages=3, input_size=(16, 64)), 1),
    }
    for name, spec in specs.items():
        network = Network(spec)
        head = layer_id(network.gap_index() + 1)
        worst = 0.0
        for draw in range(DRAWS):
            rng = stream(draw, 'cam-identity', name)
            params = network.init_params(draw)
            params.tensors[f"{head}.b"][...] = rng.normal()
            image = rng.uniform(0.0, 1.0, size=(spec.input_channels, *spec.input_size)).astype(np.float32)
            cam = compute_cam(params, image)
            reconstructed = float(cam.heatmap.mean()) + cam.bias
            worst = max(worst, abs(reconstructed - cam.prediction) / max(1.0, abs(cam.prediction)))
        tester.test(f"{name}: mean(heatmap) + bias == prediction", worst < 1e-4, "< 1e-4", f"{worst:.3e}")


def base_pixels(patch, labels, bases):
    """Disks around the bases of the patch's component, in canvas coordinates."""
    x, y, _, _ = patch.bbox
    x0, y0, _, _ = patch.placement
    canvas = np.zeros((PATCHES.size, PATCHES.size), np.uint8)
    radius = max(1, int(round(BASE_RADIUS * patch.scale)))
    for bx, by in bases:
        row, col = int(round(by)), int(round(bx))
        if labels[row, col] != patch.label:
            continue
        centre = (int(round(x0 + (bx - x) * patch.scale)), int(round(y0 + (by - y) * patch.scale)))
        cv2.circle(canvas, centre, radius, 1, thickness=-1)
    return canvas.astype(bool)


def check_saliency(tester):
    tester.section("2. CAM SALIENCY ON A TRAINED COUNTER")
    plots = generate_dataset(SynthConfig(), 24, SEED)
    train_plots, test_plots = plots[:18], plots[18:]
    train = [patch for plot in train_plots
             for patch in labelled_patches(plot.raster, plot.mask, plot.bases, PATCHES, plot.plot_id)]
    params, _ = train_counter(train, TRAIN, NET, SEED)

    top_hits = top_total = base_total = area = 0
    for plot in test_plots:
        labels, _ = connected_components(plot.mask, PATCHES.connectivity)
        for patch in labelled_patches(plot.raster, plot.mask, plot.bases, PATCHES, plot.plot_id):
            if not patch.count:
                continue
            bases = base_pixels(patch, labels, plot.bases)
            overlay = compute_cam(params, patch.image.data).overlay
            top = overlay >= np.quantile(overlay, 0.9)
            top_hits += int((top & bases).sum())
            top_total += int(top.sum())
            base_total += int(bases.sum())
            area += bases.size

    overlap = top_hits / max(top_total, 1)
    share = base_total / max(area, 1)
    tester.test("top-decile CAM overlap >= 2x base-area fraction", overlap >= 2 * share,
                f">= {2 * share:.4f}", f"{overlap:.4f}")


def main():
    tester = AcceptanceTester("CAM ACCEPTANCE")
    check_identity(tester)
    check_saliency(tester)
    tester.within_budget(5)
    tester.finish()


if __name__ == '__main__':
    main()
