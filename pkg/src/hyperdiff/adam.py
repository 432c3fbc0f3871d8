"""Adam optimizer over a flat parameter vector."""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """Moment estimates for one flat parameter vector."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)

    def ensure(self, n: int):
        if self.m is None:
            self.m = np.zeros(n)
            self.v = np.zeros(n)
        elif self.m.shape != (n,) or self.v.shape != (n,):
            raise ValueError(f"AdamState moments shaped {self.m.shape}, expected ({n},)")


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update with bias correction. Returns the new parameter vector."""
    if params.shape != grad.shape:
        raise ValueError(f"adam_step: params {params.shape} vs grad {grad.shape}")
    state.ensure(params.size)
    state.step += 1
    t = state.step
    # in-place moment updates: the vectors can run to millions of entries
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grad
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    np.sqrt(v_hat, out=v_hat)
    v_hat += state.eps
    m_hat /= v_hat
    m_hat *= state.learning_rate
    return params - m_hat
