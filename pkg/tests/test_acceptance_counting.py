#!/usr/bin/env python
"""
Acceptance: counting by regression on synthetic patches.

400 labelled training patches (counts 1-5, merged neighbours included) train a
width-8 emergence net for 30 epochs on 64 x 64 patches. The held-out patch MAD
must be at most half the MAD of predicting the mean training count, and plot
totals on 20 held-out plots must land within +-2 of truth for 80% of plots.

Run:
    python tests/test_acceptance_counting.py
"""
import numpy as np

from tester import AcceptanceTester

from imaging.patches import PatchConfig
from metrics.evaluation import mad, pairs_from
from netblocks.specs import EmergenceConfig
from phenopipe.counting import CounterTrainConfig, count_patches, count_plot, labelled_patches, train_counter
from synthdata.generator import SynthConfig, generate_dataset

SEED = 7
TRAIN_PATCHES = 400
NET = EmergenceConfig(base_width=8, input_size=(64, 64))
PATCHES = PatchConfig(size=64)
TRAIN = CounterTrainConfig(epochs=30, decay_epoch=20, flips=True)


def patches_in_range(plots):
    for plot in plots:
        for patch in labelled_patches(plot.raster, plot.mask, plot.bases, PATCHES, plot.plot_id):
            if 1 <= patch.count <= 5:
                yield patch


def training_patches():
    patches = []
    batch = 0
    while len(patches) < TRAIN_PATCHES:
        plots = generate_dataset(SynthConfig(), 20, seed=SEED * 1000 + batch)
        patches.extend(patches_in_range(plots))
        batch += 1
    return patches[:TRAIN_PATCHES]


def main():
    tester = AcceptanceTester("COUNTING ACCEPTANCE")
    tester.section("EMERGENCE COUNTER END-TO-END (400 PATCHES, 30 EPOCHS)")
    train = training_patches()
    counts = np.array([p.count for p in train])
    tester.test("training patches include merged plants", (counts > 1).any(), "count > 1 present",
                np.bincount(counts).tolist())

    params, log = train_counter(train, TRAIN, NET, SEED)
    tester.test("loss decreases", log[-1]['loss'] < log[0]['loss'],
                f"< {log[0]['loss']:.4f}", f"{log[-1]['loss']:.4f}")

    holdout_plots = generate_dataset(SynthConfig(), 20, seed=SEED + 1)
    holdout = list(patches_in_range(holdout_plots))
    truth = [p.count for p in holdout]
    predicted = count_patches(holdout, params)
    model_mad = mad(pairs_from(predicted, truth))
    mean_mad = mad(pairs_from([float(counts.mean())] * len(truth), truth))
    tester.test("held-out MAD <= 0.5 x mean-predictor MAD", model_mad <= 0.5 * mean_mad,
                f"<= {0.5 * mean_mad:.3f}", f"{model_mad:.3f}")

    close = 0
    for plot in holdout_plots:
        result = count_plot(plot.raster, plot.mask, params, PATCHES, plot.plot_id)
        close += abs(result.total - plot.count) <= 2
    tester.test("plot totals within +-2 for >= 80% of held-out plots", close >= 0.8 * len(holdout_plots),
                f">= {int(0.8 * len(holdout_plots))} plots", f"{close} plots")
    tester.within_budget(45)
    tester.finish()


if __name__ == '__main__':
    main()
