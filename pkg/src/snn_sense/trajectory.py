"""Time-indexed training records shared by the flow integrator and gradient descent."""

import dataclasses
import math
from typing import NamedTuple

import numpy as np

COLUMNS = (
    "step",
    "time",
    "loss",
    "nuclear_norm",
    "sigma1",
    "sigma2",
    "sigma3",
    "residual_inf",
    "q_drift",
    "psnr",
    "eff_rank",
)


class TrajectoryRow(NamedTuple):
    step: int
    time: float
    loss: float
    nuclear_norm: float
    sigma_top3: tuple
    residual_inf: float
    q_drift: float | None = None
    psnr: float | None = None
    eff_rank: float | None = None

    def values(self):
        s = tuple(self.sigma_top3) + (math.nan,) * (3 - len(self.sigma_top3))
        return (self.step, self.time, self.loss, self.nuclear_norm, *s[:3], self.residual_inf, self.q_drift, self.psnr, self.eff_rank)


@dataclasses.dataclass
class Trajectory:
    rows: list = dataclasses.field(default_factory=list)
    residuals: list = dataclasses.field(default_factory=list)  # full residual vectors, one per row, if tracked
    meta: dict = dataclasses.field(default_factory=dict)

    def append(self, row, residual=None):
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError("trajectory steps must be strictly increasing")
        self.rows.append(row)
        if residual is not None:
            self.residuals.append(np.asarray(residual, dtype=np.float64).copy())

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        if name == "sigma_top3":
            return np.array([r.sigma_top3 for r in self.rows], dtype=np.float64)
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], dtype=np.float64)

    @property
    def times(self):
        return self.column("time")

    def residual_matrix(self):
        """(n_rows, d1) array of tracked residual vectors."""
        return np.array(self.residuals)

    @property
    def last(self):
        return self.rows[-1]


def top3(sigma):
    s = sorted((float(x) for x in np.abs(sigma)), reverse=True)[:3]
    return tuple(s + [math.nan] * (3 - len(s)))
