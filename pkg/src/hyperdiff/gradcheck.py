"""Central finite-difference validation of analytic gradients."""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

__all__ = ["GradCheckReport", "finite_diff_check"]

DEFAULT_STEP = 1e-5


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst_index: int
    tolerance: float
    analytic: np.ndarray
    numeric: np.ndarray

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {status}: max rel error {self.max_rel_error:.3e} "
                f"at coordinate {self.worst_index} (tolerance {self.tolerance:.1e})")


def finite_diff_check(loss_fn, params: np.ndarray, tolerance: float = 1e-4,
                      step: float = DEFAULT_STEP) -> GradCheckReport:
    """Compare backward() gradients against central differences.

    `loss_fn` maps a parameter node to a scalar loss node and must be
    deterministic (freeze any RNG draws before calling). Failures are
    reported, never raised.
    """
    params = np.asarray(params, dtype=np.float64)
    node = ad.leaf(params, trainable=True, op="gradcheck-params")
    analytic = ad.backward(loss_fn(node)).get(node)
    if analytic is None:
        analytic = np.zeros_like(params)

    numeric = np.zeros_like(params)
    flat = params.copy()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(loss_fn(ad.constant(flat)).value)
        flat[i] = orig - step
        lo = float(loss_fn(ad.constant(flat)).value)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * step)

    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    worst_err = float(rel[worst])
    return GradCheckReport(worst_err < tolerance, worst_err, worst, tolerance,
                           analytic, numeric)
