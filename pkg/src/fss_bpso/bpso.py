"""
Binary particle swarm optimisers over 45-bit octant designs.

Three variants share one iteration convention: iteration 1 evaluates the
initial swarm, and every later iteration moves the particles and then
evaluates them. A run of ``n_itr`` iterations therefore performs exactly
``n_itr`` evaluation rounds.

* :func:`baseline_bpso` - particle best plus global best, both by LF-DES-MAE.
* :func:`single_metric_bpso` - particle best only, chosen by one metric.
* :func:`multifidelity_bpso` - uncertainty-driven swarm that sends one
  particle per iteration to the HF oracle and steers toward those
  evaluated designs ("beacons"), switching between exploit and explore.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import design_codec as dc
from .em_oracle import SpectralResponse, TargetProfile, transmission_magnitude
from .errors import MissingEnsemble, MissingOracle, NoBeacons
from .metrics import Direction, MetricKind, des_mae, ensb_unc, phy_unc
from .surrogate import Ensemble

Predictor = Callable[[np.ndarray], SpectralResponse]


@dataclass(frozen=True)
class SwarmConfig:
    n_particles: int = 20
    n_itr: int = 30
    n_itr_const: int = 10
    n_itr_alter: int = 20
    w: float = 0.7
    c1: float = 2.0
    c2: float = 2.0
    c_metric: float = 2.0
    c: float = 2.0
    k: float = 10.0
    v_clamp: float = 6.0
    seed: int = 0
    # False draws r1, r2 per coordinate instead of one scalar per particle
    scalar_r: bool = True
    # True makes the uncertainty particle best an argmin instead of an argmax
    uncertainty_argmin: bool = False

    def validate(self, staged: bool = False) -> None:
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if self.n_itr < 1:
            raise ValueError("n_itr must be >= 1")
        coeffs = (self.w, self.c1, self.c2, self.c_metric, self.c, self.k, self.v_clamp)
        if min(coeffs) < 0:
            raise ValueError("swarm coefficients must be non-negative")
        if staged and self.n_itr_const + self.n_itr_alter != self.n_itr:
            raise ValueError("n_itr_const + n_itr_alter must equal n_itr for staged runs")
        if staged and self.n_itr_const < 1:
            raise ValueError("staged runs need at least one constant-stage iteration")


class Mode(str, enum.Enum):
    CONSTANT = "constant"
    EXPLOIT = "exploit"
    EXPLORE = "explore"


class ModeMachine:
    """Exploit/explore alternation driven by HF improvements.

    Start in Exploit. An improvement over the running HF minimum returns to
    Exploit and clears the counter; a stall increments it, and the second
    consecutive stall switches to Explore, where the swarm stays until the
    next improvement.
    """

    STALL_LIMIT = 2

    def __init__(self):
        self.mode = Mode.EXPLOIT
        self.counter = 0

    def step(self, improved: bool) -> Mode:
        if improved:
            self.mode = Mode.EXPLOIT
            self.counter = 0
        else:
            self.counter = min(self.counter + 1, self.STALL_LIMIT)
            if self.counter == self.STALL_LIMIT:
                self.mode = Mode.EXPLORE
        return self.mode


@dataclass
class IterationRecord:
    iteration: int
    mode: str
    best_lf_des_mae: float
    design: str
    hf_des_mae: float | None
    hf_calls_cumulative: int
    post_hoc_hf_des_mae: float | None = None


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    p_best: np.ndarray
    p_best_value: np.ndarray
    beacons: list[np.ndarray] = field(default_factory=list)
    beacon_errors: list[float] = field(default_factory=list)
    mode: Mode = Mode.CONSTANT
    stagnation_counter: int = 0
    g_best: np.ndarray | None = None


@dataclass
class RunRecord:
    scenario: str
    seed: int
    iterations: list[IterationRecord]
    hf_calls: int
    lf_calls: int
    wall_time: float
    final_hf_des_mae: float | None = None
    post_hoc_hf_calls: int = 0
    run_id: int = 0
    state: SwarmState | None = field(default=None, repr=False, compare=False)

    def hf_trace(self) -> np.ndarray:
        """Per-iteration HF-DES-MAE, in-run or post-hoc (NaN where not evaluated)."""
        out = []
        for r in self.iterations:
            v = r.hf_des_mae if r.hf_des_mae is not None else r.post_hoc_hf_des_mae
            out.append(np.nan if v is None else v)
        return np.array(out, dtype=float)

    def designs(self) -> np.ndarray:
        return np.array([dc.from_bitstring(r.design) for r in self.iterations], dtype=np.uint8)

    def cumulative_min_hf(self) -> np.ndarray:
        return np.fmin.accumulate(self.hf_trace())


def transfer(v):
    """S-shaped transfer 1 / (1 + exp(-3 v))."""
    return 1.0 / (1.0 + np.exp(-3.0 * np.asarray(v, dtype=float)))


def update_position(v, rng: np.random.Generator) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (transfer(v) > rng.random(v.shape)).astype(np.uint8)


def attraction(beacons, x, k: float, beacon_errors=None) -> np.ndarray:
    """Beacon pull: weighted mean of ``b_j - x`` with weights ``exp(-k * err_j)``.

    ``beacons`` is either a sequence of ``(design, error)`` pairs or, when
    ``beacon_errors`` is given, an array of designs. ``x`` may be one design
    or a batch ``(n, 45)``.
    """
    if beacon_errors is None:
        pairs = list(beacons)
        if not pairs:
            raise NoBeacons("attraction needs at least one beacon")
        designs = np.array([np.asarray(b, dtype=float) for b, _ in pairs])
        errors = np.array([e for _, e in pairs], dtype=float)
    else:
        designs = np.asarray(beacons, dtype=float)
        errors = np.asarray(beacon_errors, dtype=float)
        if len(designs) == 0:
            raise NoBeacons("attraction needs at least one beacon")
    # shifting by the minimum leaves the normalised weights unchanged
    alpha = np.exp(-k * (errors - errors.min()))
    centre = alpha @ designs / alpha.sum()
    return centre - np.asarray(x, dtype=float)


class _Evaluator:
    """Counts LF and HF evaluations for one run."""

    def __init__(self, lf_predictor: Predictor, target: TargetProfile,
                 ensemble: Ensemble | None = None, hf_oracle: Predictor | None = None):
        self.lf = lf_predictor
        self.target = target
        self.ensemble = ensemble
        self.hf = hf_oracle
        self.lf_calls = 0
        self.hf_calls = 0

    def lf_response(self, X) -> SpectralResponse:
        self.lf_calls += len(X)
        return self.lf(X)

    def lf_des(self, X) -> np.ndarray:
        return des_mae(transmission_magnitude(self.lf_response(X)), self.target)

    def hf_des(self, X) -> np.ndarray:
        if self.hf is None:
            raise MissingOracle("an HF oracle is required for this scenario")
        X = np.atleast_2d(X)
        self.hf_calls += len(X)
        return des_mae(transmission_magnitude(self.hf(X)), self.target)

    def metric(self, kind: MetricKind, X) -> np.ndarray:
        if kind is MetricKind.LF_DES_MAE:
            return self.lf_des(X)
        if kind is MetricKind.HF_DES_MAE:
            return self.hf_des(X)
        if kind is MetricKind.PHY_UNC:
            return phy_unc(self.lf_response(X))
        if self.ensemble is None:
            raise MissingEnsemble("ENSB-UNC needs a trained ensemble")
        self.lf_calls += len(X) * len(self.ensemble)
        return ensb_unc(self.ensemble.magnitudes(X))


def _improves(new: np.ndarray, old: np.ndarray, direction: Direction) -> np.ndarray:
    return new > old if direction is Direction.MAXIMIZE else new < old


def _init_swarm(cfg: SwarmConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    X = dc.random_design(rng, size=cfg.n_particles)
    V = rng.uniform(-1.0, 1.0, size=(cfg.n_particles, dc.N_BITS))
    return X, V


def _coeff_draw(cfg: SwarmConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.scalar_r:
        return rng.random((cfg.n_particles, 1))
    return rng.random((cfg.n_particles, dc.N_BITS))


def _move(cfg: SwarmConfig, V: np.ndarray, pull: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    V = np.clip(cfg.w * V + pull, -cfg.v_clamp, cfg.v_clamp)
    return V, update_position(V, rng)


def baseline_bpso(cfg: SwarmConfig, lf_predictor: Predictor, target: TargetProfile,
                  rng: np.random.Generator) -> RunRecord:
    cfg.validate()
    t0 = time.perf_counter()
    ev = _Evaluator(lf_predictor, target)
    X, V = _init_swarm(cfg, rng)
    f = ev.lf_des(X)
    p_best, p_val = X.copy(), f.copy()
    records = []
    for itr in range(1, cfg.n_itr + 1):
        if itr > 1:
            r1, r2 = _coeff_draw(cfg, rng), _coeff_draw(cfg, rng)
            g = p_best[np.argmin(p_val)]
            V, X = _move(cfg, V, cfg.c1 * r1 * (p_best - X) + cfg.c2 * r2 * (g - X.astype(float)), rng)
            f = ev.lf_des(X)
            better = f < p_val
            p_best[better], p_val[better] = X[better], f[better]
        gi = int(np.argmin(p_val))
        records.append(IterationRecord(itr, Mode.CONSTANT.value, float(p_val[gi]),
                                       dc.to_bitstring(p_best[gi]), None, 0))
    state = SwarmState(X, V, p_best, p_val, g_best=p_best[int(np.argmin(p_val))].copy())
    return RunRecord("baseline", cfg.seed, records, 0, ev.lf_calls, time.perf_counter() - t0, state=state)


def single_metric_bpso(cfg: SwarmConfig, metric: MetricKind | str, lf_predictor: Predictor,
                       ensemble: Ensemble | None, hf_oracle: Predictor | None, target: TargetProfile,
                       rng: np.random.Generator) -> RunRecord:
    metric = MetricKind(metric)
    cfg.validate()
    if metric is MetricKind.ENSB_UNC and ensemble is None:
        raise MissingEnsemble("ENSB-UNC needs a trained ensemble")
    if metric is MetricKind.HF_DES_MAE and hf_oracle is None:
        raise MissingOracle("HF-DES-MAE needs the HF oracle")
    direction = _direction(metric, cfg)
    t0 = time.perf_counter()
    ev = _Evaluator(lf_predictor, target, ensemble, hf_oracle)
    X, V = _init_swarm(cfg, rng)
    records = []
    p_best = p_val = None
    for itr in range(1, cfg.n_itr + 1):
        if itr > 1:
            r = _coeff_draw(cfg, rng)
            V, X = _move(cfg, V, cfg.c_metric * r * (p_best - X.astype(float)), rng)
        m = ev.metric(metric, X)
        if p_best is None:
            p_best, p_val = X.copy(), m.copy()
        else:
            better = _improves(m, p_val, direction)
            p_best[better], p_val[better] = X[better], m[better]
        if metric is MetricKind.HF_DES_MAE:
            # every particle already has an HF value; select on it at no extra cost
            i = int(np.argmin(m))
            lf_best = float(ev.lf_des(X[i : i + 1])[0])
            hf_val = float(m[i])
        else:
            f = m if metric is MetricKind.LF_DES_MAE else ev.lf_des(X)
            i = int(np.argmin(f))
            lf_best, hf_val = float(f[i]), None
        records.append(IterationRecord(itr, Mode.CONSTANT.value, lf_best, dc.to_bitstring(X[i]), hf_val, ev.hf_calls))
    rec = RunRecord(metric.value, cfg.seed, records, ev.hf_calls, ev.lf_calls, time.perf_counter() - t0,
                    state=SwarmState(X, V, p_best, p_val))
    if metric is MetricKind.HF_DES_MAE:
        rec.final_hf_des_mae = float(np.nanmin(rec.hf_trace()))
    return rec


def _direction(metric: MetricKind, cfg: SwarmConfig) -> Direction:
    if metric.is_uncertainty and cfg.uncertainty_argmin:
        return Direction.MINIMIZE
    return metric.direction


def multifidelity_bpso(cfg: SwarmConfig, metric: MetricKind | str, lf_predictor: Predictor,
                       ensemble: Ensemble | None, hf_oracle: Predictor, target: TargetProfile,
                       rng: np.random.Generator, staged: bool = True) -> RunRecord:
    """Uncertainty-aware multi-fidelity BPSO.

    Staged runs spend ``n_itr_const`` iterations with the swarm attracted only
    to each particle's highest-uncertainty design, then ``n_itr_alter``
    iterations alternating between beacon attraction (exploit) and the
    uncertainty particle best (explore). Unstaged runs alternate from the
    first move, seeded by the HF evaluation of iteration 1. Every iteration
    sends the particle with the lowest LF-DES-MAE to the HF oracle.
    """
    metric = MetricKind(metric)
    if not metric.is_uncertainty:
        raise ValueError(f"multi-fidelity BPSO needs an uncertainty metric, got {metric.value}")
    cfg.validate(staged=staged)
    if metric is MetricKind.ENSB_UNC and ensemble is None:
        raise MissingEnsemble("ENSB-UNC needs a trained ensemble")
    if hf_oracle is None:
        raise MissingOracle("multi-fidelity BPSO needs the HF oracle")
    direction = _direction(metric, cfg)
    n_const = cfg.n_itr_const if staged else 1
    t0 = time.perf_counter()
    ev = _Evaluator(lf_predictor, target, ensemble, hf_oracle)
    X, V = _init_swarm(cfg, rng)
    beacons: list[np.ndarray] = []
    errors: list[float] = []
    machine = ModeMachine()
    records = []
    p_best = p_val = None
    for itr in range(1, cfg.n_itr + 1):
        alternating = itr > n_const
        if itr > 1:
            if alternating:
                c_exploit, c_explore = (cfg.c, 0.0) if machine.mode is Mode.EXPLOIT else (0.0, cfg.c)
                r1, r2 = _coeff_draw(cfg, rng), _coeff_draw(cfg, rng)
                pull = (c_explore * r1 * (p_best - X.astype(float))
                        + c_exploit * r2 * attraction(beacons, X, cfg.k, errors))
            else:
                r = _coeff_draw(cfg, rng)
                pull = cfg.c_metric * r * (p_best - X.astype(float))
            V, X = _move(cfg, V, pull, rng)
        u = ev.metric(metric, X)
        if p_best is None:
            p_best, p_val = X.copy(), u.copy()
        else:
            better = _improves(u, p_val, direction)
            p_best[better], p_val[better] = X[better], u[better]
        f = ev.lf_des(X)
        i = int(np.argmin(f))
        x_eval = X[i].copy()
        hf_val = float(ev.hf_des(x_eval)[0])
        if alternating:
            mode = machine.step(hf_val < min(errors))
        else:
            mode = Mode.CONSTANT
        beacons.append(x_eval)
        errors.append(hf_val)
        records.append(IterationRecord(itr, mode.value, float(f[i]), dc.to_bitstring(x_eval), hf_val, ev.hf_calls))
    name = f"{'staged' if staged else 'alternating'}_{metric.value}"
    state = SwarmState(X, V, p_best, p_val, beacons, errors,
                       machine.mode if cfg.n_itr > n_const else Mode.CONSTANT, machine.counter)
    rec = RunRecord(name, cfg.seed, records, ev.hf_calls, ev.lf_calls, time.perf_counter() - t0, state=state)
    rec.final_hf_des_mae = float(min(errors))
    return rec
