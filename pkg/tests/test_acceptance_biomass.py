#!/usr/bin/env python
"""
Acceptance: biomass regression and the height-feature baseline.

48 synthetic plots follow the height-sum biomass law. Per seed, an H-only and
an RGBH model are trained for 50 epochs on RMRS-augmented pools (x100 plans per
plot, 32 samples drawn per epoch) and compared on the same hash split with
the height-features + MLR baseline.

Run:
    python tests/test_acceptance_biomass.py
"""
import numpy as np

from tester import AcceptanceTester

from augment.rmrs import RmrsConfig
from baselines.features import drop_redundant_columns, feature_matrix, height_features
from baselines.regression import mlr_fit, mlr_predict, vector_angle
from core.rng import split_holdout, stream
from metrics.evaluation import pairs_from, pct_diff
from netblocks.specs import BiomassConfig
from phenopipe.biomass import BiomassSample, BiomassTrainConfig, predict_biomass, train_biomass
from synthdata.generator import SynthConfig, generate_dataset

SEEDS = (1, 2, 3)
NET = BiomassConfig(base_width=8, max_width=32)
TRAIN = BiomassTrainConfig(epochs=50, augment_per_plot=100, samples_per_epoch=32, decay_epoch=40)
RMRS = RmrsConfig(k_target=100)


def deep_pct_diff(train, holdout, channels, seed):
    params, _ = train_biomass(train, channels, TRAIN, NET, RMRS, seed)
    predicted = [predict_biomass(sample.raster, params) for sample in holdout]
    return pct_diff(pairs_from(predicted, [sample.biomass for sample in holdout]))


def baseline_pct_diff(train, holdout):
    X_train, names = feature_matrix(height_features(sample.raster) for sample in train)
    X_holdout, _ = feature_matrix(height_features(sample.raster) for sample in holdout)
    X_kept, kept = drop_redundant_columns(X_train, names)
    columns = [names.index(name) for name in kept]
    model = mlr_fit(X_kept, [sample.biomass for sample in train], kept)
    predicted = mlr_predict(model, X_holdout[:, columns])
    return pct_diff(pairs_from(predicted, [sample.biomass for sample in holdout]))


def check_regression_oracles(tester):
    tester.section("1. REGRESSION ORACLES")
    rng = stream(0, 'mlr-oracle')
    X = rng.normal(size=(40, 4))
    y = X @ np.array([1.5, -2.0, 0.5, 3.0]) + 4.0 + rng.normal(0.0, 0.1, size=40)
    model = mlr_fit(X, y)
    design = np.hstack([X, np.ones((40, 1))])
    oracle = np.linalg.solve(design.T @ design, design.T @ y)
    error = max(np.abs(model.coefficients - oracle[:-1]).max(), abs(model.intercept - oracle[-1]))
    tester.test("mlr_fit matches the normal-equations oracle", error < 1e-6, "< 1e-6", f"{error:.3e}")
    for u, v, expected in (((1, 0), (2, 0), 0.0), ((1, 0), (1, 1), 45.0), ((1, 0), (0, 3), 90.0)):
        angle = vector_angle(u, v)
        tester.test(f"vector_angle {u} {v} is {expected:g} degrees", abs(angle - expected) < 1e-9,
                    expected, angle)


def check_biomass(tester):
    tester.section("2. BIOMASS END-TO-END (48 PLOTS, H vs RGBH vs BASELINE)")
    plots = {p.plot_id: p for p in generate_dataset(SynthConfig(), 48, seed=21)}
    train_ids, holdout_ids = split_holdout(sorted(plots))
    train = [BiomassSample(i, plots[i].raster, plots[i].biomass) for i in train_ids]
    holdout = [BiomassSample(i, plots[i].raster, plots[i].biomass) for i in holdout_ids]

    baseline = baseline_pct_diff(train, holdout)
    print(f"   baseline %D: {baseline:.2f}")
    h_wins = baseline_wins = 0
    for seed in SEEDS:
        h_only = deep_pct_diff(train, holdout, 'H', seed)
        rgbh = deep_pct_diff(train, holdout, 'RGBH', seed)
        print(f"   seed {seed}: H %D {h_only:.2f}, RGBH %D {rgbh:.2f}")
        if seed == SEEDS[0]:
            tester.test("H-only held-out %D < 15", h_only < 15.0, "< 15", f"{h_only:.2f}")
        h_wins += h_only <= rgbh
        baseline_wins += h_only < baseline
    tester.test("H-only %D <= RGBH %D in >= 2 of 3 seeds", h_wins >= 2, ">= 2", h_wins)
    tester.test("H-only %D beats the MLR baseline in >= 2 of 3 seeds", baseline_wins >= 2, ">= 2",
                baseline_wins)


def main():
    tester = AcceptanceTester("BIOMASS ACCEPTANCE")
    check_regression_oracles(tester)
    check_biomass(tester)
    tester.within_budget(70)
    tester.finish()


if __name__ == '__main__':
    main()
