"""
Uncertainty and design-error metrics over spectral responses.

All functions broadcast over leading batch axes: a response whose fields are
``(n, 100)`` yields ``n`` scalars.
"""
from __future__ import annotations

import enum

import numpy as np

from .em_oracle import SpectralResponse, TargetProfile, transmission_magnitude
from .errors import EnsembleTooSmall

SUCCESS_THRESHOLD = 0.1


class Direction(str, enum.Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class MetricKind(str, enum.Enum):
    PHY_UNC = "phy_unc"
    ENSB_UNC = "ensb_unc"
    LF_DES_MAE = "lf_des_mae"
    HF_DES_MAE = "hf_des_mae"

    @property
    def is_uncertainty(self) -> bool:
        return self in (MetricKind.PHY_UNC, MetricKind.ENSB_UNC)

    @property
    def direction(self) -> Direction:
        return Direction.MAXIMIZE if self.is_uncertainty else Direction.MINIMIZE


def phy_unc(r: SpectralResponse) -> np.ndarray | float:
    """Mean over frequency of the continuity residuals |Re T - Re R - 1| + |Im T - Im R|."""
    l_re = np.abs(r.re_t - r.re_r - 1.0)
    l_im = np.abs(r.im_t - r.im_r)
    return (l_re + l_im).mean(axis=-1)


def ensb_unc(members) -> np.ndarray | float:
    """Ensemble spread of predicted transmission magnitudes.

    ``members`` is a sequence of responses (one per model) or a stacked
    magnitude array of shape ``(n_m, ..., 100)``. The norm is the RMS over
    frequency points.
    """
    if isinstance(members, np.ndarray):
        mags = members
    else:
        mags = np.stack([transmission_magnitude(r) for r in members])
    if mags.shape[0] < 2:
        raise EnsembleTooSmall(f"need at least 2 ensemble members, got {mags.shape[0]}")
    # centring on member 0 first makes identical members give exactly zero
    shifted = mags - mags[0]
    dev = shifted - shifted.mean(axis=0)
    sq_rms = (dev**2).mean(axis=-1)
    return np.sqrt(sq_rms.mean(axis=0))


def des_mae(magnitude: np.ndarray, target: TargetProfile) -> np.ndarray | float:
    """Mean absolute distance of a transmission magnitude from the target profile."""
    return np.abs(np.asarray(magnitude) - target.magnitude).mean(axis=-1)


def lf_mae(lf: SpectralResponse, hf: SpectralResponse) -> np.ndarray | float:
    return np.abs(transmission_magnitude(lf) - transmission_magnitude(hf)).mean(axis=-1)


def is_optimized(hf_des_mae: float, threshold: float = SUCCESS_THRESHOLD) -> bool:
    return hf_des_mae < threshold
