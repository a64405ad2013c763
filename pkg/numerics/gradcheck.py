"""
Central finite-difference verification of analytic gradients.

The layer output is reduced to a scalar with a fixed random projection
f(x) = sum(r * layer(x)); backward(r) must then equal df/dx and df/dparams.
"""

import logging

import numpy as np

from core.rng import stream

logger = logging.getLogger(__name__)


def _central_difference(objective, flat, index, eps):
    original = flat[index]
    flat[index] = original + eps
    plus = objective()
    flat[index] = original - eps
    minus = objective()
    flat[index] = original
    return (plus - minus) / (2.0 * eps)


def _sample_coordinates(size, max_coords, rng):
    if max_coords is None or size <= max_coords:
        return range(size)
    return sorted(rng.choice(size, size=max_coords, replace=False).tolist())


def finite_diff_check(layer, x, params=None, eps=1e-5, seed=0, max_coords=32, kink_tol=1e-3):
    """
    Max relative error between analytic and central-difference gradients.

    Relative error per coordinate is |analytic - numeric| / max(1e-8, |numeric|),
    taken over the input and every parameter tensor (at most max_coords sampled
    coordinates per tensor). Coordinates where the estimates at eps and eps/2
    disagree by more than kink_tol (relative) straddle a non-differentiable
    point and are skipped.

    Args:
        layer: object with forward(x, params) -> (y, cache) and
            backward(dout, cache, params) -> LayerGrad
        x: input array; checked in float64
        params: dict of parameter arrays (may be None)

    Returns:
        float
    """
    x = np.array(x, dtype=np.float64)
    params = {name: np.array(value, dtype=np.float64) for name, value in (params or {}).items()}
    rng = stream(seed, 'finite-diff')

    out, cache = layer.forward(x, params)
    projection = rng.standard_normal(out.shape)
    grads = layer.backward(projection, cache, params)

    def objective():
        value, _ = layer.forward(x, params)
        return float(np.sum(value * projection))

    targets = [('input', x, grads.input_grad)]
    targets += [(name, params[name], grads.param_grads[name]) for name in sorted(params)]

    worst = 0.0
    skipped = 0
    for name, tensor, analytic in targets:
        if analytic.shape != tensor.shape:
            logger.warning(f"gradient for '{name}' has shape {analytic.shape}, expected {tensor.shape}")
            return float('inf')
        flat = tensor.reshape(-1)
        analytic_flat = np.asarray(analytic, dtype=np.float64).reshape(-1)
        for index in _sample_coordinates(flat.size, max_coords, rng):
            numeric = _central_difference(objective, flat, index, eps)
            refined = _central_difference(objective, flat, index, eps / 2)
            if abs(numeric - refined) > kink_tol * max(1e-8, abs(numeric)):
                skipped += 1
                continue
            error = abs(analytic_flat[index] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, error)

    if skipped:
        logger.debug(f"finite-difference check skipped {skipped} kink coordinates")
    return worst
