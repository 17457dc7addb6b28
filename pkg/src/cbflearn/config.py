"""Campaign configuration: one YAML file fully determines a run."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .barrier import BarrierFunction, ClassKFunction, make_barrier
from .controller import PDGains
from .dynamics import SegwayParams
from .episodic import ConfigError, EpisodeConfig, X0Box
from .learning import TrainConfig

SHIPPED_CONFIGS = ("default", "pitch_rate")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsSection(_Section):
    cart_mass: float = Field(20.0, gt=0)
    pendulum_mass: float = Field(25.0, gt=0)
    com_offset: float = Field(0.27, gt=0)
    pendulum_inertia: float = Field(2.0, gt=0)
    wheel_radius: float = Field(0.195, gt=0)
    torque_constant: float = Field(1.0, gt=0)
    back_emf: float = Field(1.0, ge=0)
    ground_friction: float = Field(1.0, ge=0)
    gravity: float = Field(9.81, gt=0)


class PlantSection(_Section):
    nominal: ParamsSection = ParamsSection()
    perturbation: float = Field(0.15, ge=0, le=1)
    seed_candidates: list[int] = Field(default_factory=lambda: list(range(10)), min_length=1)


class BarrierSection(_Section):
    kind: Literal["pitch_ellipse", "pitch_rate"] = "pitch_ellipse"
    theta_max: float = Field(0.3, gt=0)
    theta_e: float = 0.0
    c: float = Field(0.1, gt=0)


class AlphaSection(_Section):
    gamma: float = Field(0.5, gt=0)


class ControllerSection(_Section):
    kp_theta: float = 150.0
    kd_theta: float = 35.0
    kp_vel: float = 0.2
    v_des: float = 3.0
    theta_target: float = 0.0


class SimulationSection(_Section):
    dt_ctrl: float = Field(0.005, gt=0)
    substeps: int = Field(5, ge=1)
    horizon: float = Field(10.0, gt=0)
    max_pitch: float = Field(1.5707963267948966, gt=0)
    max_norm: float = Field(1e3, gt=0)


class EpisodesSection(_Section):
    num_episodes: int = Field(10, ge=0)
    weights: Optional[list[float]] = None  # None -> linear ramp j / T
    x0_center: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0], min_length=4, max_length=4)
    x0_half_widths: list[float] = Field(default_factory=lambda: [0.0, 0.5, 0.2, 0.5], min_length=4, max_length=4)
    margin: float = 0.0045
    seed: int = 1

    @model_validator(mode="after")
    def _check(self):
        if any(w < 0 for w in self.x0_half_widths):
            raise ValueError("x0_half_widths must be nonnegative")
        if self.weights is not None:
            if len(self.weights) != self.num_episodes:
                raise ValueError(f"weights needs {self.num_episodes} entries, got {len(self.weights)}")
            w = self.weights
            if any(not 0 <= v <= 1 for v in w) or any(b < a for a, b in zip(w, w[1:])):
                raise ValueError("weights must be nondecreasing within [0, 1]")
        return self


class EvaluationSection(_Section):
    num_x0: int = Field(8, ge=1)
    seed: int = 12345
    safety_tolerance: float = Field(1e-2, ge=0)


class NetworkSection(_Section):
    hidden: list[int] = Field(default_factory=lambda: [200], min_length=1)

    @model_validator(mode="after")
    def _check(self):
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")
        return self


class TrainingSection(_Section):
    learning_rate: float = Field(1e-2, gt=0)
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(32, ge=1)
    seed: int = 0
    validation_fraction: float = Field(0.0, ge=0, lt=1)
    lr_decay: float = Field(0.0, ge=0)


class OutputSection(_Section):
    directory: str = "runs/default"


class CampaignConfig(_Section):
    name: str = "default"
    plant: PlantSection = PlantSection()
    barrier: BarrierSection = BarrierSection()
    alpha: AlphaSection = AlphaSection()
    controller: ControllerSection = ControllerSection()
    simulation: SimulationSection = SimulationSection()
    episodes: EpisodesSection = EpisodesSection()
    evaluation: EvaluationSection = EvaluationSection()
    network: NetworkSection = NetworkSection()
    training: TrainingSection = TrainingSection()
    output: OutputSection = OutputSection()

    # domain objects -----------------------------------------------------------

    def nominal_params(self) -> SegwayParams:
        return SegwayParams(**self.plant.nominal.model_dump())

    def barrier_function(self) -> BarrierFunction:
        b = self.barrier
        if b.kind == "pitch_ellipse":
            return make_barrier(b.kind, theta_max=b.theta_max, theta_e=b.theta_e, c=b.c)
        return make_barrier(b.kind, c=b.c, theta_e=b.theta_e)

    def class_k(self) -> ClassKFunction:
        return ClassKFunction(self.alpha.gamma)

    def pd_gains(self) -> PDGains:
        return PDGains(**self.controller.model_dump())

    def x0_box(self) -> X0Box:
        e = self.episodes
        return X0Box(tuple(e.x0_center), tuple(e.x0_half_widths), e.margin)

    def episode_config(self) -> EpisodeConfig:
        s, e = self.simulation, self.episodes
        return EpisodeConfig(
            num_episodes=e.num_episodes,
            weights=None if e.weights is None else tuple(e.weights),
            horizon=s.horizon, x0=self.x0_box(), seed=e.seed,
            dt_ctrl=s.dt_ctrl, substeps=s.substeps, max_pitch=s.max_pitch, max_norm=s.max_norm,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.training.model_dump())

    def with_seed(self, seed: int) -> "CampaignConfig":
        """Copy with the episode and training seeds replaced."""
        return self.model_copy(update={
            "episodes": self.episodes.model_copy(update={"seed": seed}),
            "training": self.training.model_copy(update={"seed": seed}),
        })

    def with_output(self, directory) -> "CampaignConfig":
        return self.model_copy(update={"output": OutputSection(directory=str(directory))})


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "invalid configuration:\n" + "\n".join(lines)


def parse_config(data: dict) -> CampaignConfig:
    try:
        cfg = CampaignConfig.model_validate(data or {})
        # build every domain object once so their own invariants are checked up front
        cfg.nominal_params(), cfg.barrier_function(), cfg.class_k(), cfg.pd_gains()
        cfg.episode_config(), cfg.train_config()
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return cfg


def load_config(path, echo_dir=None) -> CampaignConfig:
    """Parse and validate a campaign YAML file; optionally echo it to ``echo_dir``."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = parse_config(data)
    if echo_dir is not None:
        dump_config(cfg, Path(echo_dir) / "config.yaml")
    return cfg


def dump_config(cfg: CampaignConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.model_dump(), sort_keys=False))


def shipped_config_path(name: str = "default") -> Path:
    if name not in SHIPPED_CONFIGS:
        raise ConfigError(f"no shipped config named {name!r}; choose from {SHIPPED_CONFIGS}")
    return Path(str(resources.files("cbflearn") / "data" / f"{name}.yaml"))
