#!/usr/bin/env python
"""
Acceptance: gradient suite over every layer and block (20 seeds, 64-bit),
metric oracle over 1000 random vectors, and block arithmetic.

Run:
    python tests/test_acceptance_numerics.py
"""
import math

import numpy as np

from tester import AcceptanceTester

from core.rng import stream
from metrics.evaluation import mad, pairs_from, pct_diff, sdad
from netblocks.blocks import (ResidualCNR, ResidualInception, inception_widths, residual_cnr_forward,
                              residual_inception_forward)
from netblocks.gradsuite import GradcheckConfig, run_gradient_suite


def brute_force(a, t):
    """Metrics written out term by term, %D through the explicit indicator sum."""
    n = len(a)
    diffs = [abs(x - y) for x, y in zip(a, t)]
    mean = sum(diffs) / n
    spread = math.sqrt(sum((d - mean) ** 2 for d in diffs) / (n - 1))
    indicator = sum(d * (1 if x - y != 0 else 0) for d, x, y in zip(diffs, a, t))
    return mean, spread, 100.0 * indicator / sum(t)


def check_gradients(tester):
    tester.section("1. GRADIENT SUITE (20 SEEDS, RELATIVE ERROR < 1e-4)")
    results = run_gradient_suite(GradcheckConfig(seeds=20))
    for name, result in sorted(results.items()):
        tester.test(f"gradient {name}", result['passed'], "< 1e-4", f"{result['max_error']:.3e}")


def check_metrics(tester):
    tester.section("2. METRIC ORACLE (1000 RANDOM VECTORS)")
    worst = 0.0
    for index in range(1000):
        rng = stream(index, 'metric-oracle')
        n = int(rng.integers(2, 40))
        t = rng.integers(0, 20, size=n).astype(float)
        t[0] += 1.0
        a = t + rng.normal(0.0, 2.0, size=n)
        pairs = pairs_from(a, t)
        expected = brute_force(a.tolist(), t.tolist())
        got = (mad(pairs), sdad(pairs), pct_diff(pairs))
        worst = max(worst, max(abs(x - y) for x, y in zip(got, expected)))
    tester.test("mad/sdad/pct_diff match the brute-force evaluator", worst < 1e-9, "< 1e-9", f"{worst:.3e}")


def check_blocks(tester):
    tester.section("3. BLOCK ARITHMETIC")
    for channels in (8, 16, 32, 64, 128):
        widths = inception_widths(channels)
        tester.test(f"Inception widths for C={channels}",
                    widths == (channels // 2, channels // 4, channels // 8, channels // 8),
                    (channels // 2, channels // 4, channels // 8, channels // 8), widths)
    x = stream(0, 'identity').uniform(0.0, 3.0, size=(2, 16, 6, 6))
    zero_cnr = {name: np.zeros(shape) for name, shape in ResidualCNR(16).param_shapes().items()}
    zero_inc = {name: np.zeros(shape) for name, shape in ResidualInception(16).param_shapes().items()}
    tester.test("residual-CNR with zero branch is the identity",
                np.array_equal(residual_cnr_forward(x, zero_cnr), x), "identity", "differs")
    tester.test("residual-Inception with zero branch is the identity",
                np.array_equal(residual_inception_forward(x, zero_inc), x), "identity", "differs")


def main():
    tester = AcceptanceTester("NUMERICS ACCEPTANCE")
    check_gradients(tester)
    check_metrics(tester)
    check_blocks(tester)
    tester.within_budget(5)
    tester.finish()


if __name__ == '__main__':
    main()
