#!/usr/bin/env python
"""
Acceptance: RMRS conservation on 20 synthetic plots x 500 samples.

Disjoint-rectangle samples must keep every channel's pixel multiset, and the
DEM sum of every sample must stay within [0.99, 1.0] of the original.

Run:
    python tests/test_acceptance_rmrs.py
"""
import numpy as np

from tester import AcceptanceTester

from augment.rmrs import RmrsConfig, apply_swap_plan, channel_sum_ratio, draw_swap_plan, rects_overlap
from augment.superpixels import slic
from imaging.raster import Raster
from synthdata.generator import SynthConfig, generate_dataset

PLOTS = 20
SAMPLES = 500


def disjoint(plan):
    return all(not rects_overlap(pair['rect_a'], pair['rect_b']) for pair in plan.applied)


def main():
    tester = AcceptanceTester("RMRS ACCEPTANCE")
    tester.section(f"RMRS CONSERVATION ({PLOTS} PLOTS x {SAMPLES} SAMPLES)")
    plots = generate_dataset(SynthConfig(), PLOTS, seed=11)

    multiset_failures = 0
    disjoint_samples = 0
    ratios = []
    for index, plot in enumerate(plots):
        cfg = RmrsConfig(samples=SAMPLES, seed=index)
        spmap = slic(plot.raster, cfg.k_target, cfg.compactness, cfg.slic_iters)
        cfg.check_against(spmap.k)
        original = plot.raster.data
        reference = np.sort(original.reshape(original.shape[0], -1), axis=1)
        for sample in range(SAMPLES):
            plan = draw_swap_plan(spmap, cfg, sample)
            augmented = apply_swap_plan(original, plan)
            ratios.append(channel_sum_ratio(plot.raster, Raster(augmented, plot.raster.channels)))
            if disjoint(plan):
                disjoint_samples += 1
                flat = np.sort(augmented.reshape(augmented.shape[0], -1), axis=1)
                if not np.array_equal(flat, reference):
                    multiset_failures += 1

    tester.test("disjoint-rectangle samples exist", disjoint_samples > 0, "> 0", disjoint_samples)
    tester.test("per-channel pixel multisets preserved", multiset_failures == 0,
                0, f"{multiset_failures} of {disjoint_samples}")
    low, high = min(ratios), max(ratios)
    tester.test("normalized DEM sum within [0.99, 1.0]", 0.99 <= low and high <= 1.0 + 1e-12,
                "[0.99, 1.0]", f"[{low:.6f}, {high:.6f}]")
    tester.within_budget(5)
    tester.finish()


if __name__ == '__main__':
    main()
