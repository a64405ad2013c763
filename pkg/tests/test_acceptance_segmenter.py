#!/usr/bin/env python
"""
Acceptance: relaxed segmentation on 100 default synthetic plots.

A 4-stage segmenter trained for 10 epochs must reach pixel recall >= 0.95 and
precision >= 0.70 on the held-out plots. Tiles are 112 x 112 to keep the
CPU run short.

Run:
    python tests/test_acceptance_segmenter.py
"""
from tester import AcceptanceTester

from core.rng import split_holdout
from metrics.evaluation import add_tallies, seg_metrics, seg_tally
from netblocks.specs import SegmenterConfig
from phenopipe.segmentation import SegmenterTrainConfig, segment_plot, train_segmenter
from synthdata.generator import SynthConfig, generate_dataset

SEED = 5
NET = SegmenterConfig(stages=4, input_size=(112, 112))
TRAIN = SegmenterTrainConfig(epochs=10)


def main():
    tester = AcceptanceTester("SEGMENTER ACCEPTANCE")
    tester.section("SEGMENTER END-TO-END (100 PLOTS, 10 EPOCHS)")
    plots = {plot.plot_id: plot for plot in generate_dataset(SynthConfig(), 100, SEED)}
    train_ids, holdout_ids = split_holdout(sorted(plots))
    corpus = [(plots[i].raster, plots[i].mask) for i in train_ids]

    params, log = train_segmenter(corpus, TRAIN, NET, SEED)
    tester.test("loss decreases", log[-1]['loss'] < log[0]['loss'],
                f"< {log[0]['loss']:.4f}", f"{log[-1]['loss']:.4f}")

    tally = add_tallies(seg_tally(segment_plot(plots[i].raster, params), plots[i].mask)
                        for i in holdout_ids)
    precision, recall, _ = seg_metrics(tally)
    tester.test("held-out pixel recall >= 0.95", recall is not None and recall >= 0.95, ">= 0.95", recall)
    tester.test("held-out pixel precision >= 0.70", precision is not None and precision >= 0.70,
                ">= 0.70", precision)
    tester.within_budget(30)
    tester.finish()


if __name__ == '__main__':
    main()
