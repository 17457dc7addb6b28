"""Episodic data aggregation loop for learning barrier-derivative residuals."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .barrier import BarrierFunction, ClassKFunction
from .controller import CBFQP, LCBFQP, Blend, PDGains
from .dynamics import SegwayParams, Trajectory, simulate
from .io import write_dataset_csv, write_trajectory_csv
from .learning import (Dataset, ResidualEstimator, TrainConfig, build_dataset, erm_train,
                       save_estimator)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def linear_trust_schedule(T: int) -> tuple[float, ...]:
    if T < 1:
        raise ValueError(f"need at least one episode, got T={T}")
    return tuple(j / T for j in range(1, T + 1))


@dataclass(frozen=True)
class X0Box:
    """Uniform box of initial states, rejection-sampled to h(x0) >= margin."""

    center: tuple = (0.0, 0.0, 0.0, 0.0)
    half_widths: tuple = (0.0, 0.5, 0.2, 0.5)
    margin: float = 0.0045

    def __post_init__(self):
        if len(self.center) != 4 or len(self.half_widths) != 4:
            raise ConfigError("x0 center and half_widths need 4 entries")
        if any(w < 0 for w in self.half_widths):
            raise ConfigError("x0 half_widths must be nonnegative")


def sample_x0(box: X0Box, rng: np.random.Generator, bf: BarrierFunction, max_attempts: int = 1000) -> np.ndarray:
    lo = np.asarray(box.center, dtype=float) - np.asarray(box.half_widths, dtype=float)
    hi = np.asarray(box.center, dtype=float) + np.asarray(box.half_widths, dtype=float)
    for _ in range(max_attempts):
        x0 = rng.uniform(lo, hi)
        if bf.value(x0) >= box.margin:
            return x0
    raise ConfigError(
        f"no initial state with h >= {box.margin} after {max_attempts} draws; "
        "the x0 box does not fit inside the safe set"
    )


@dataclass(frozen=True)
class EpisodeConfig:
    num_episodes: int = 10
    weights: tuple | None = None  # None -> linear_trust_schedule(num_episodes)
    horizon: float = 10.0
    x0: X0Box = X0Box()
    seed: int = 0
    dt_ctrl: float = 0.01
    substeps: int = 10
    max_pitch: float = math.pi / 2
    max_norm: float = 1e3

    def __post_init__(self):
        if self.num_episodes < 0:
            raise ConfigError("num_episodes must be >= 0")
        w = self.trust_weights()
        if len(w) != self.num_episodes:
            raise ConfigError(f"expected {self.num_episodes} trust weights, got {len(w)}")
        if any(not 0.0 <= v <= 1.0 for v in w) or any(b < a for a, b in zip(w, w[1:])):
            raise ConfigError("trust weights must be nondecreasing within [0, 1]")
        if self.horizon <= 0 or self.dt_ctrl <= 0 or self.substeps < 1:
            raise ConfigError("horizon, dt_ctrl must be positive and substeps >= 1")

    def trust_weights(self) -> tuple[float, ...]:
        if self.weights is not None:
            return tuple(float(v) for v in self.weights)
        return linear_trust_schedule(self.num_episodes) if self.num_episodes else ()


def rollout(params, controller, x0, cfg: EpisodeConfig, theta_e: float = 0.0) -> Trajectory:
    return simulate(params, controller, x0, cfg.horizon, cfg.dt_ctrl, cfg.substeps,
                    theta_e=theta_e, max_pitch=cfg.max_pitch, max_norm=cfg.max_norm)


@dataclass
class EpisodeRecord:
    episode: int
    x0: list
    rollout_weight: float  # trust weight of the controller that generated the data
    new_weight: float
    min_h: float
    frac_unsafe: float
    n_records: int
    dataset_size: int
    infeasible_count: int
    blew_up: bool
    reason: str
    train_loss: list = field(default_factory=list)
    trained_on_episodes: list = field(default_factory=list)


@dataclass
class EpisodeReport:
    episodes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"episodes": [asdict(e) for e in self.episodes]}


@dataclass
class DacbarfResult:
    dataset: Dataset
    estimator: ResidualEstimator
    controller: object
    report: EpisodeReport
    trajectories: list
    estimators: list


def theta_center(bf: BarrierFunction) -> float:
    return float(getattr(bf, "theta_e", 0.0))


def run_dacbarf(
    cfg: EpisodeConfig,
    true_p: SegwayParams,
    nom_p: SegwayParams,
    bf: BarrierFunction,
    alpha: ClassKFunction,
    gains: PDGains,
    hidden: Sequence[int] = (200,),
    train_cfg: TrainConfig = TrainConfig(),
    run_dir=None,
) -> DacbarfResult:
    """Alternate rollouts on the true plant with retraining on all data so far.

    k_0 is the model-based filter; after episode j the controller becomes
    ``(1 - w_j) k_0 + w_j LCBF-QP(estimator_j)``. The estimator is refit from a
    fresh initialization on the aggregate dataset each episode.
    """
    weights = cfg.trust_weights()
    rng = np.random.default_rng(cfg.seed)
    k0 = CBFQP(bf, alpha, nom_p, gains)
    controller = k0
    estimator = ResidualEstimator.zero(hidden)
    data = Dataset.empty()
    report = EpisodeReport()
    trajectories, estimators = [], []
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)

    prev_w = 0.0
    for j in range(1, cfg.num_episodes + 1):
        x0 = sample_x0(cfg.x0, rng, bf)
        traj = rollout(true_p, controller, x0, cfg, theta_center(bf))
        if traj.blew_up:
            logger.warning("episode %d: %s (partial data kept)", j, traj.reason)
        d_j = build_dataset(traj, bf, episode=j)
        data = data.concat(d_j)
        estimator, history = erm_train(data, bf, nom_p, replace(train_cfg, seed=train_cfg.seed + j), hidden)
        w = weights[j - 1]
        controller = Blend(k0, LCBFQP(bf, alpha, nom_p, gains, estimator), w)

        h = bf.value(traj.states)
        report.episodes.append(EpisodeRecord(
            episode=j, x0=[float(v) for v in x0], rollout_weight=prev_w, new_weight=w,
            min_h=float(h.min()), frac_unsafe=float(np.mean(h < 0)),
            n_records=len(d_j), dataset_size=len(data),
            infeasible_count=int(traj.infeasible.sum()), blew_up=traj.blew_up, reason=traj.reason,
            train_loss=[float(v) for v in history.train_loss],
            trained_on_episodes=list(estimator.episodes),
        ))
        logger.info("episode %d: min h %.4g, N=%d, loss %.3g -> %.3g", j, h.min(), len(data),
                    history.train_loss[0], history.train_loss[-1])
        trajectories.append(traj)
        estimators.append(estimator)
        prev_w = w

        if run_dir is not None:
            write_trajectory_csv(run_dir / f"episode_{j:02d}_trajectory.csv", traj, bf)
            write_dataset_csv(run_dir / f"episode_{j:02d}_dataset.csv", d_j)
            save_estimator(run_dir / f"estimator_{j:02d}.txt", estimator)

    if run_dir is not None:
        write_dataset_csv(run_dir / "dataset_aggregate.csv", data)
        (run_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return DacbarfResult(data, estimator, controller, report, trajectories, estimators)
