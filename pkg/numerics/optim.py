"""
Optimizers operating in place on a parameter dict (name -> array).

Weight decay is coupled: wd * p is added to the gradient before it enters the
momentum buffer (SGD) or the moment estimates (Adam).

SGD-momentum:  v <- momentum * v + (g + wd * p);  p <- p - lr * v
Adam:          g' = g + wd * p; m <- b1 m + (1 - b1) g'; v <- b2 v + (1 - b2) g'^2
               p <- p - lr * m_hat / (sqrt(v_hat) + eps), hats bias-corrected by step
"""

from dataclasses import dataclass, field

import numpy as np

from core.exceptions import ConfigError, ShapeError

SGD_MOMENTUM = 'sgd_momentum'
ADAM = 'adam'


@dataclass
class OptimState:
    kind: str
    learning_rate: float
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    buffers: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (SGD_MOMENTUM, ADAM):
            raise ConfigError(f"unknown optimizer kind '{self.kind}'")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError(f"Adam betas must be in (0, 1), got {self.beta1}, {self.beta2}")

    def _buffer(self, slot, name, like):
        store = self.buffers.setdefault(slot, {})
        if name not in store:
            store[name] = np.zeros_like(like)
        elif store[name].shape != like.shape:
            raise ShapeError(f"moment buffer '{slot}/{name}' has shape {store[name].shape}, "
                             f"parameter has {like.shape}")
        return store[name]


def sgd_state(learning_rate=0.01, momentum=0.9, weight_decay=1e-4):
    return OptimState(SGD_MOMENTUM, learning_rate, weight_decay=weight_decay, momentum=momentum)


def adam_state(learning_rate=1e-4, weight_decay=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
    return OptimState(ADAM, learning_rate, weight_decay=weight_decay, beta1=beta1, beta2=beta2,
                      epsilon=epsilon)


def sgd_momentum_step(params, grads, state):
    if state.kind != SGD_MOMENTUM:
        raise ConfigError(f"sgd_momentum_step called with a '{state.kind}' state")
    for name, p in params.items():
        g = grads[name] + state.weight_decay * p
        v = state._buffer('velocity', name, p)
        v *= state.momentum
        v += g
        p -= (state.learning_rate * v).astype(p.dtype, copy=False)
    state.step_count += 1
    return params


def adam_step(params, grads, state):
    if state.kind != ADAM:
        raise ConfigError(f"adam_step called with a '{state.kind}' state")
    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name] + state.weight_decay * p
        m = state._buffer('m', name, p)
        v = state._buffer('v', name, p)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        p -= step.astype(p.dtype, copy=False)
    return params


def optimizer_step(params, grads, state):
    if state.kind == SGD_MOMENTUM:
        return sgd_momentum_step(params, grads, state)
    return adam_step(params, grads, state)
