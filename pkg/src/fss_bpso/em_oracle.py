"""
Synthetic high-fidelity solver for pixelated meta-atoms.

Every design maps to a single resonance with centre ``f0``, width ``gamma``
and a channel mix ``mu`` in [0, 1]. The response is written through a real
detuning ``y(f)``::

    T = y / (y + i)        R = T - 1

Any real ``y`` puts T on the circle ``|T|**2 == Re(T)``, which is exactly the
condition for ``|T|**2 + |R|**2 == 1`` when ``R = T - 1``, so continuity and
energy conservation hold to rounding error.

The detuning starts from ``d = (f - f0) / gamma`` raised to an odd power
(``x = sign(d) * |d|**order``, a flat-bottomed multi-pole response) and is then
rotated by ``theta = (pi / 2) * (1 - mu)``::

    y = tan(atan(x) - theta)

``mu == 1`` is a notch (T = 0 at resonance, 1 far away) and ``mu == 0`` a pass
band (T = 1 at resonance, 0 far away); intermediate values blend smoothly.

Design -> resonance parameters:

* ``gamma = gamma_min + gamma_span * fill_fraction``
* ``f0 = 20 + 10 * Phi(f0_spread * s1)`` plus optional roughness and jitter terms
* ``mu = Phi(channel_offset + channel_spread * s2)``

where ``s1`` and ``s2`` are fixed, salted random projections of the +-1 octant
bits with unit-norm weights.
"""
from __future__ import annotations

import csv
import enum
import functools
import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from . import design_codec as dc

F_MIN_GHZ = 20.0
F_MAX_GHZ = 30.0
N_FREQ = 100
FREQ_GHZ = np.linspace(F_MIN_GHZ, F_MAX_GHZ, N_FREQ)


@dataclass(frozen=True)
class SpectralResponse:
    """Re/Im of transmission and reflection on FREQ_GHZ.

    Fields have shape ``(100,)`` for one design or ``(n, 100)`` for a batch.
    """

    re_t: np.ndarray
    im_t: np.ndarray
    re_r: np.ndarray
    im_r: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.re_t + 1j * self.im_t

    @property
    def r(self) -> np.ndarray:
        return self.re_r + 1j * self.im_r

    def __len__(self) -> int:
        return len(self.re_t) if self.re_t.ndim > 1 else 1

    def __getitem__(self, idx) -> "SpectralResponse":
        return SpectralResponse(self.re_t[idx], self.im_t[idx], self.re_r[idx], self.im_r[idx])

    def stack(self) -> np.ndarray:
        """Components stacked as ``(..., 4, 100)`` in order re_t, im_t, re_r, im_r."""
        return np.stack([self.re_t, self.im_t, self.re_r, self.im_r], axis=-2)

    @classmethod
    def from_stack(cls, arr: np.ndarray) -> "SpectralResponse":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[..., 0, :], arr[..., 1, :], arr[..., 2, :], arr[..., 3, :])

    @classmethod
    def from_complex(cls, t: np.ndarray, r: np.ndarray) -> "SpectralResponse":
        return cls(t.real.copy(), t.imag.copy(), r.real.copy(), r.imag.copy())


class TargetKind(str, enum.Enum):
    BAND_STOP = "band_stop"
    BAND_PASS = "band_pass"


@dataclass(frozen=True)
class TargetProfile:
    kind: TargetKind
    magnitude: np.ndarray


@dataclass(frozen=True)
class OracleConfig:
    band_lo_ghz: float = 24.0
    band_hi_ghz: float = 26.0
    gamma_min_ghz: float = 0.2
    gamma_span_ghz: float = 4.8
    resonance_order: int = 3
    # f0 = 20 + 10 * Phi(f0_spread * score_1) + roughness shift + hashed jitter
    f0_spread: float = 0.05
    roughness_ghz: float = 0.0
    roughness_mean: float = 0.47
    jitter_ghz: float = 0.0
    # mix = Phi(channel_offset + channel_spread * (score_2 + connectivity_weight * conn_z))
    channel_offset: float = 1.2
    channel_spread: float = 0.2
    connectivity_weight: float = 0.0
    connectivity_mean: float = 0.34
    connectivity_scale: float = 0.27
    hard_channel: bool = False
    salt: str = "fss-oracle-1"

    def __post_init__(self):
        if not F_MIN_GHZ <= self.band_lo_ghz < self.band_hi_ghz <= F_MAX_GHZ:
            raise ValueError("band edges must satisfy 20 <= lo < hi <= 30 GHz")
        if self.gamma_min_ghz <= 0 or self.gamma_span_ghz < 0:
            raise ValueError("resonance width must stay positive")
        if self.resonance_order < 1:
            raise ValueError("resonance_order must be >= 1")
        if self.connectivity_scale <= 0:
            raise ValueError("connectivity_scale must be positive")


DEFAULT_ORACLE = OracleConfig()


@dataclass(frozen=True)
class Resonance:
    f0: float
    gamma: float
    mix: float  # 1 = pure notch, 0 = pure pass


def _salt_seed(salt: str) -> int:
    return int.from_bytes(hashlib.blake2b(salt.encode(), digest_size=8).digest(), "little")


@functools.lru_cache(maxsize=16)
def _bit_weights(salt: str) -> np.ndarray:
    a = np.random.default_rng(_salt_seed(salt)).standard_normal((2, dc.N_BITS))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def _bit_hash(octant: np.ndarray, salt: str) -> float:
    """Uniform [0, 1) hash of the octant bits."""
    h = hashlib.blake2b(salt.encode() + b":" + np.asarray(octant, dtype=np.uint8).tobytes(), digest_size=8)
    return int.from_bytes(h.digest(), "little") / 2.0**64


def resonance(grid, cfg: OracleConfig = DEFAULT_ORACLE) -> Resonance:
    grid = np.asarray(grid, dtype=np.uint8)
    octant = dc.fold_grid(grid)
    feats = dc.features(grid)
    freq_score, chan_score = _bit_weights(cfg.salt) @ (2.0 * octant - 1.0)
    jitter = cfg.jitter_ghz * (2.0 * _bit_hash(octant, cfg.salt) - 1.0)
    f0 = (F_MIN_GHZ + (F_MAX_GHZ - F_MIN_GHZ) * float(ndtr(cfg.f0_spread * freq_score))
          + cfg.roughness_ghz * (feats.roughness - cfg.roughness_mean) + jitter)
    gamma = cfg.gamma_min_ghz + cfg.gamma_span_ghz * feats.fill_fraction
    conn_z = (feats.connectivity - cfg.connectivity_mean) / cfg.connectivity_scale
    u = chan_score + cfg.connectivity_weight * conn_z
    mix = float(ndtr(cfg.channel_offset + cfg.channel_spread * u))
    if cfg.hard_channel:
        mix = float(mix >= 0.5)
    return Resonance(f0=f0, gamma=gamma, mix=mix)


def resonance_response(res: Resonance, order: int = 1, freq: np.ndarray = FREQ_GHZ) -> SpectralResponse:
    d = (freq - res.f0) / res.gamma
    x = np.sign(d) * np.abs(d) ** order
    # rotate the detuning between the notch (mix=1) and pass (mix=0) channels
    theta = 0.5 * np.pi * (1.0 - res.mix)
    c, s = np.cos(theta), np.sin(theta)
    with np.errstate(divide="ignore"):
        y = (x * c - s) / (x * s + c)
    t = np.where(np.isfinite(y), y / (y + 1j), 1.0 + 0j)
    return SpectralResponse.from_complex(t, t - 1.0)


def hf_solve(grid, cfg: OracleConfig = DEFAULT_ORACLE) -> SpectralResponse:
    """Deterministic physics-consistent response of one 18x18 grid."""
    return resonance_response(resonance(grid, cfg), order=cfg.resonance_order)


def target_profile(kind: TargetKind | str, cfg: OracleConfig = DEFAULT_ORACLE) -> TargetProfile:
    kind = TargetKind(kind)
    in_band = (FREQ_GHZ >= cfg.band_lo_ghz) & (FREQ_GHZ <= cfg.band_hi_ghz)
    stop = np.where(in_band, 0.0, 1.0)
    return TargetProfile(kind, stop if kind is TargetKind.BAND_STOP else 1.0 - stop)


def transmission_magnitude(r: SpectralResponse) -> np.ndarray:
    return np.hypot(r.re_t, r.im_t)


@dataclass
class HFOracle:
    """Counted, batch-capable front end to :func:`hf_solve` taking octants.

    ``calls`` is the shared HF-call ledger; increments are locked so it can be
    shared between threads.
    """

    config: OracleConfig = DEFAULT_ORACLE
    calls: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __call__(self, octants) -> SpectralResponse:
        octants = np.asarray(octants, dtype=np.uint8)
        single = octants.ndim == 1
        batch = octants[None] if single else octants
        grids = dc.expand_octant(batch)
        stacked = np.stack([hf_solve(g, self.config).stack() for g in grids])
        with self._lock:
            self.calls += len(batch)
        out = SpectralResponse.from_stack(stacked)
        return out[0] if single else out

    def reset(self) -> None:
        with self._lock:
            self.calls = 0


def write_spectrum_csv(path, response: SpectralResponse) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_ghz", "re_t", "im_t", "re_r", "im_r"])
        for k, f in enumerate(FREQ_GHZ):
            w.writerow([repr(float(f)), repr(float(response.re_t[k])), repr(float(response.im_t[k])),
                        repr(float(response.re_r[k])), repr(float(response.im_r[k]))])


def read_spectrum_csv(path) -> SpectralResponse:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1)
    return SpectralResponse(data[:, 1].copy(), data[:, 2].copy(), data[:, 3].copy(), data[:, 4].copy())
