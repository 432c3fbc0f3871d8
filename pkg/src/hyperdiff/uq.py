"""M x N prediction matrices and the aleatoric/epistemic decomposition.

All variances use the population convention (divide by the count), which
makes total = aleatoric + epistemic an exact identity rather than an
approximation.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffusion import DiffusionConfig, sample_with_noise
from .rng import stream
from .tensor import as_tensor

__all__ = [
    "SampleMatrix", "UncertaintyReport", "build_sample_matrix",
    "build_sample_grid", "predict_mean", "aleatoric", "epistemic", "decompose",
    "matrix_to_csv", "report_to_csv",
]

IDENTITY_RTOL = 1e-12


@dataclass
class SampleMatrix:
    """[M, N, D] predictions: M weight draws, N diffusion samples each."""

    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = as_tensor(self.values)
        if self.values.ndim != 3:
            raise ValueError(f"sample matrix must be [M, N, D], got {self.values.shape}")
        m, n, _ = self.values.shape
        if m < 1 or n < 2:
            raise ValueError(f"need M >= 1 and N >= 2, got M={m}, N={n}")

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    @property
    def dim(self):
        return self.values.shape[2]


@dataclass
class UncertaintyReport:
    mean: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray
    total: np.ndarray
    m: int
    n: int
    epistemic_degenerate: bool = False  # True when M == 1


def predict_mean(matrix: SampleMatrix) -> np.ndarray:
    """Grand mean over weight draws and samples."""
    return matrix.values.mean(axis=(0, 1))


def aleatoric(matrix: SampleMatrix) -> np.ndarray:
    """Mean over weight draws of the per-draw sample variance."""
    return matrix.values.var(axis=1).mean(axis=0)


def epistemic(matrix: SampleMatrix) -> np.ndarray:
    """Variance over weight draws of the per-draw sample mean.

    With a single weight draw this is identically zero; a warning flags that
    the estimate is degenerate rather than informative.
    """
    if matrix.m == 1:
        warnings.warn("epistemic variance is 0 by construction when M == 1",
                      stacklevel=2)
        return np.zeros(matrix.dim)
    return matrix.values.mean(axis=1).var(axis=0)


def decompose(matrix: SampleMatrix) -> UncertaintyReport:
    """Full report; enforces the law-of-total-variance identity."""
    mean = predict_mean(matrix)
    alea = aleatoric(matrix)
    epi = epistemic(matrix)
    total = matrix.values.reshape(-1, matrix.dim).var(axis=0)
    gap = np.abs(total - (alea + epi))
    scale = np.maximum(np.abs(total), np.abs(alea + epi))
    # the absolute term covers float64 cancellation in the two-pass variance,
    # which is proportional to the mean square of the raw values
    msq = (matrix.values * matrix.values).mean(axis=(0, 1))
    if np.any(gap > IDENTITY_RTOL * scale + 1e-13 * msq + 1e-30):
        raise ArithmeticError(
            f"total variance decomposition violated: gap {gap.max():.3e}")
    return UncertaintyReport(mean, alea, epi, total, matrix.m, matrix.n,
                             epistemic_degenerate=(matrix.m == 1))


def _sample_rows(source, config: DiffusionConfig, y_grid: np.ndarray,
                 n: int, master_seed: int, i: int, member_seed: int) -> np.ndarray:
    """All N samples for weight draw i across every condition, one batch."""
    theta, masks = source.member(member_seed, i)
    n_cond = y_grid.shape[0]
    t_steps = config.schedule.T
    noise = np.empty((n_cond * n, t_steps, config.data_dim))
    for c in range(n_cond):
        for j in range(n):
            rng = stream(master_seed, *(("cond", c) if n_cond > 1 else ()),
                         "sample", i, j)
            noise[c * n + j] = rng.standard_normal((t_steps, config.data_dim))
    y_batch = np.repeat(y_grid, n, axis=0)
    out = sample_with_noise(config, theta, y_batch, noise, masks)
    return out.reshape(n_cond, n, config.data_dim)


def build_sample_matrix(source, config: DiffusionConfig, y, m: int, n: int,
                        master_seed: int, workers: int = 1) -> SampleMatrix:
    """Fill the [M, N, D] matrix with per-(i, j) counter-based streams.

    Results are bit-identical for any worker count: workers split over
    weight draws, and each draw's batch is assembled the same way.
    """
    grid = build_sample_grid(source, config, np.atleast_2d(y), m, n,
                             master_seed, workers)
    return grid[0]


def build_sample_grid(source, config: DiffusionConfig, y_grid: np.ndarray,
                      m: int, n: int, master_seed: int,
                      workers: int = 1, member_seed: int | None = None) -> list:
    """One SampleMatrix per condition row of `y_grid`, sharing weight draws.

    `member_seed` keys the weight draws separately from the sample noise
    (defaults to `master_seed`); holding it fixed while varying
    `master_seed` re-samples the same members with fresh noise.
    """
    y_grid = np.atleast_2d(np.asarray(y_grid, dtype=np.float64))
    if source.count is not None and m > source.count:
        raise ValueError(f"strategy provides {source.count} members, need {m}")
    if member_seed is None:
        member_seed = master_seed
    values = np.empty((y_grid.shape[0], m, n, config.data_dim))

    def fill(i):
        values[:, i] = _sample_rows(source, config, y_grid, n, master_seed, i,
                                    member_seed)

    if workers <= 1:
        for i in range(m):
            fill(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, range(m)))

    matrices = []
    for c, y_row in enumerate(y_grid):
        matrices.append(SampleMatrix(values[c], provenance={
            "strategy": source.name,
            "master_seed": int(master_seed),
            "y": [float(v) for v in y_row],
        }))
    return matrices


def matrix_to_csv(matrix: SampleMatrix, path):
    """One row per (i, j) with D value columns, 17-significant-digit floats."""
    cols = ",".join(f"v{k}" for k in range(matrix.dim))
    lines = [f"i,j,{cols}"]
    for i in range(matrix.m):
        for j in range(matrix.n):
            vals = ",".join(f"{v:.17g}" for v in matrix.values[i, j])
            lines.append(f"{i},{j},{vals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def report_to_csv(report: UncertaintyReport, path):
    lines = ["quantity," + ",".join(f"v{k}" for k in range(report.mean.size))]
    for label, arr in (("mean", report.mean), ("aleatoric", report.aleatoric),
                       ("epistemic", report.epistemic), ("total", report.total)):
        lines.append(label + "," + ",".join(f"{v:.17g}" for v in arr))
    lines.append(f"M,{report.m}")
    lines.append(f"N,{report.n}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
