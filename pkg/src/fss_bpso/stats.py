"""
Statistics for comparing campaign outcomes: ECDFs, the two-sample
Kolmogorov-Smirnov test, Spearman rank correlation and success rates.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ConstantSample, EmptySample, LengthMismatch
from .metrics import SUCCESS_THRESHOLD

SIGNIFICANCE = 0.05


def _sample(values, name: str = "sample") -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySample(f"{name} is empty")
    return arr


@dataclass(frozen=True)
class EcdfCurve:
    values: np.ndarray  # sorted ascending
    fractions: np.ndarray  # i/n for the i-th sorted value

    @property
    def n(self) -> int:
        return len(self.values)

    def __call__(self, x):
        """Fraction of the sample <= x (right-continuous)."""
        return np.searchsorted(self.values, x, side="right") / self.n


def ecdf(values) -> EcdfCurve:
    v = np.sort(_sample(values))
    return EcdfCurve(v, np.arange(1, len(v) + 1) / len(v))


def kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, 2 sum (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam <= 0:
        return 1.0
    a2 = -2.0 * lam * lam
    total, sign, prev = 0.0, 2.0, 0.0
    for j in range(1, 101):
        term = sign * math.exp(a2 * j * j)
        total += term
        if abs(term) <= 1e-3 * prev or abs(term) <= 1e-8 * abs(total):
            return total
        sign, prev = -sign, abs(term)
    # series did not settle: lam is tiny and the tail probability is 1
    return 1.0


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value, clamped to (0, 1]."""
    a = np.sort(_sample(a, "first sample"))
    b = np.sort(_sample(b, "second sample"))
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / len(a)
    cdf_b = np.searchsorted(b, pooled, side="right") / len(b)
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = len(a) * len(b) / (len(a) + len(b))
    root = math.sqrt(ne)
    p = kolmogorov_sf((root + 0.12 + 0.11 / root) * d)
    return d, min(1.0, max(p, np.finfo(float).tiny))


def spearman(a, b) -> float:
    """Pearson correlation of mid-ranks."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) != len(b):
        raise LengthMismatch(f"samples differ in length: {len(a)} vs {len(b)}")
    if len(a) < 3:
        raise LengthMismatch("spearman needs at least 3 paired values")
    ra, rb = rankdata(a), rankdata(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        raise ConstantSample("rank correlation is undefined for a constant sample")
    return float(np.clip(ra @ rb / denom, -1.0, 1.0))


def success_rate(final_maes, threshold: float = SUCCESS_THRESHOLD) -> float:
    v = _sample(final_maes, "final MAE sample")
    return float(np.count_nonzero(v < threshold) / len(v))


def ks_matrix(samples: Mapping[str, Sequence[float]]) -> dict[tuple[str, str], tuple[float, float]]:
    names = list(samples)
    return {(r, c): ks_two_sample(samples[r], samples[c]) for r in names for c in names}


def write_ks_matrix_csv(path, samples: Mapping[str, Sequence[float]]) -> None:
    """Scenario x scenario matrix of "D;p" cells plus a +/- significance string per row."""
    names = list(samples)
    mat = ks_matrix(samples)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", *names, "significant"])
        for r in names:
            cells = [f"{mat[r, c][0]:.6f};{mat[r, c][1]:.6f}" for c in names]
            signs = "".join("+" if mat[r, c][1] < SIGNIFICANCE else "-" for c in names)
            w.writerow([r, *cells, signs])
