"""
Low-fidelity surrogate: ridge regression on signed random binary projections.

Each of the four response components (re_t, im_t, re_r, im_r) is a separate
head with its own random projection drawn from the model's feature seed.
The heads share no parameters, so nothing ties the predicted T to 1 + R and
the continuity residual of a prediction carries information about its error.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from . import design_codec as dc
from .em_oracle import N_FREQ, HFOracle, SpectralResponse, transmission_magnitude
from .errors import DegenerateData, EnsembleTooSmall, MissingModel

N_HEADS = 4
DEFAULT_FEATURES = 1024
DEFAULT_RIDGE_LAMBDA = 1e-5
DEFAULT_TRAIN_SIZE = 2000
DEFAULT_MEMBERS = 10
MIN_TRAIN_SIZE = 100
# each projection sums a random subset of bits (inclusion probability SUBSET_PROB)
SUBSET_PROB = 0.5
# threshold offsets, in units of the subset count's std under random designs
THRESHOLD_SPREAD = 2.0

MAGIC = b"MSUR1"


@dataclass(frozen=True)
class TrainingSet:
    designs: np.ndarray  # (n, 45) uint8
    responses: SpectralResponse  # fields (n, 100)

    def __len__(self) -> int:
        return len(self.designs)

    def split(self, n_first: int) -> tuple["TrainingSet", "TrainingSet"]:
        return (TrainingSet(self.designs[:n_first], self.responses[:n_first]),
                TrainingSet(self.designs[n_first:], self.responses[n_first:]))


def generate_dataset(n: int, seed: int, oracle: HFOracle | None = None) -> TrainingSet:
    if n < MIN_TRAIN_SIZE:
        raise ValueError(f"dataset size must be at least {MIN_TRAIN_SIZE}")
    oracle = oracle or HFOracle()
    designs = dc.random_design(np.random.default_rng(seed), size=n)
    return TrainingSet(designs, oracle(designs))


def _head_projection(feature_seed: int, head: int, n_features: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([feature_seed, head])
    proj = (rng.random((n_features, dc.N_BITS)) < SUBSET_PROB).astype(float)
    size = proj.sum(axis=1)
    bias = -(0.5 * size + THRESHOLD_SPREAD * 0.5 * np.sqrt(size) * rng.standard_normal(n_features))
    return proj, bias


def _featurize(octants: np.ndarray, proj: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Sign of each thresholded subset count, scaled so ``phi @ phi == 1``."""
    u = np.asarray(octants, dtype=float) @ proj.T + bias
    return np.where(u >= 0, 1.0, -1.0) / np.sqrt(len(bias))


def _ridge(phi: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Ridge with an unpenalised intercept; dual form when samples < features."""
    phi_mean = phi.mean(axis=0)
    y_mean = y.mean(axis=0)
    pc = phi - phi_mean
    yc = y - y_mean
    n, d = pc.shape
    if n < d:
        gram = pc @ pc.T + lam * np.eye(n)
        coef = pc.T @ linalg.solve(gram, yc, assume_a="sym")
    else:
        gram = pc.T @ pc + lam * np.eye(d)
        coef = linalg.solve(gram, pc.T @ yc, assume_a="pos")
    return coef, y_mean - phi_mean @ coef


@dataclass
class SurrogateModel:
    feature_seed: int
    ridge_lambda: float
    projections: np.ndarray  # (4, D, 45)
    biases: np.ndarray  # (4, D)
    weights: np.ndarray  # (4, D, 100)
    intercepts: np.ndarray  # (4, 100)

    @property
    def n_features(self) -> int:
        return self.projections.shape[1]

    def predict(self, octants) -> SpectralResponse:
        octants = np.asarray(octants, dtype=np.uint8)
        single = octants.ndim == 1
        batch = octants[None] if single else octants
        comps = [
            _featurize(batch, self.projections[h], self.biases[h]) @ self.weights[h] + self.intercepts[h]
            for h in range(N_HEADS)
        ]
        out = SpectralResponse(*comps)
        return out[0] if single else out

    __call__ = predict


def train(ts: TrainingSet, feature_seed: int, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
          n_features: int = DEFAULT_FEATURES) -> SurrogateModel:
    if len(ts) == 0:
        raise DegenerateData("empty training set")
    if len(np.unique(ts.designs, axis=0)) < 2:
        raise DegenerateData("all training designs are identical")
    targets = ts.responses.stack()  # (n, 4, 100)
    projs, biases, weights, intercepts = [], [], [], []
    for h in range(N_HEADS):
        proj, bias = _head_projection(feature_seed, h, n_features)
        coef, icpt = _ridge(_featurize(ts.designs, proj, bias), targets[:, h, :], ridge_lambda)
        projs.append(proj)
        biases.append(bias)
        weights.append(coef)
        intercepts.append(icpt)
    return SurrogateModel(feature_seed, ridge_lambda, np.stack(projs), np.stack(biases),
                          np.stack(weights), np.stack(intercepts))


def predict(m: SurrogateModel, octants) -> SpectralResponse:
    return m.predict(octants)


@dataclass
class Ensemble:
    """N_m surrogates differing only in feature seed. Member 0 is the deployed predictor."""

    members: list[SurrogateModel] = field(default_factory=list)

    def __post_init__(self):
        if len(self.members) < 2:
            raise EnsembleTooSmall(f"ensemble needs >= 2 members, got {len(self.members)}")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def primary(self) -> SurrogateModel:
        return self.members[0]

    def magnitudes(self, octants) -> np.ndarray:
        """Predicted |T| per member, shape ``(n_m, ..., 100)``."""
        return np.stack([transmission_magnitude(m.predict(octants)) for m in self.members])


def member_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint32)[0])


def train_ensemble(ts: TrainingSet, n_m: int = DEFAULT_MEMBERS, seed: int = 0,
                   ridge_lambda: float = DEFAULT_RIDGE_LAMBDA, n_features: int = DEFAULT_FEATURES) -> Ensemble:
    if n_m < 2:
        raise EnsembleTooSmall(f"n_m must be >= 2, got {n_m}")
    seeds = [member_seed(seed, i) for i in range(n_m)]
    return Ensemble([train(ts, s, ridge_lambda, n_features) for s in seeds])


# -- persistence ------------------------------------------------------------

_HEADER = struct.Struct("<IIIII")
_MEMBER = struct.Struct("<qd")


def save_ensemble(ens: Ensemble | SurrogateModel, path) -> None:
    members = [ens] if isinstance(ens, SurrogateModel) else ens.members
    d = members[0].n_features
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_HEADER.pack(len(members), dc.N_BITS, d, N_FREQ, N_HEADS))
    for m in members:
        buf.write(_MEMBER.pack(m.feature_seed, m.ridge_lambda))
        for arr in (m.projections, m.biases, m.weights, m.intercepts):
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue())


def load_models(path) -> list[SurrogateModel]:
    path = Path(path)
    if not path.exists():
        raise MissingModel(f"no surrogate file at {path}")
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a surrogate file (bad magic)")
    off = len(MAGIC)
    n_m, n_bits, d, n_freq, n_heads = _HEADER.unpack_from(raw, off)
    off += _HEADER.size
    shapes = [(n_heads, d, n_bits), (n_heads, d), (n_heads, d, n_freq), (n_heads, n_freq)]
    members = []
    for _ in range(n_m):
        fseed, lam = _MEMBER.unpack_from(raw, off)
        off += _MEMBER.size
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(shape).astype(float))
            off += 8 * count
        members.append(SurrogateModel(fseed, lam, *arrays))
    return members


def load_ensemble(path) -> Ensemble:
    return Ensemble(load_models(path))


def held_out_mae(model: SurrogateModel, test: TrainingSet) -> float:
    pred = model.predict(test.designs)
    return float(np.abs(transmission_magnitude(pred) - transmission_magnitude(test.responses)).mean())
