"""Three-phase experiment: model-based baseline, episodic learning, final evaluation."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import CampaignConfig, dump_config
from .controller import CBFQP
from .dynamics import perturb_params
from .episodic import rollout, run_dacbarf, sample_x0, theta_center
from .io import write_trajectory_csv
from .plotting import PlotSpec, Trace, emit_plot

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_UNSAFE = 0, 1, 2, 3

BASELINE_COLOR, FINAL_COLOR, EPISODE_COLOR = "#2ca02c", "#1f77b4", "#d62728"


@dataclass
class CampaignResult:
    exit_code: int
    summary: dict
    out_dir: Path
    baseline_min_h: list = field(default_factory=list)
    final_min_h: list = field(default_factory=list)
    x0_set: list = field(default_factory=list)
    dacbarf: object = None


def evaluation_x0_set(cfg: CampaignConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.evaluation.seed)
    box, bf = cfg.x0_box(), cfg.barrier_function()
    return [sample_x0(box, rng, bf) for _ in range(cfg.evaluation.num_x0)]


def _rollouts(params, controller, x0s, ep_cfg, bf):
    return [rollout(params, controller, x0, ep_cfg, theta_center(bf)) for x0 in x0s]


def summary_text(summary: dict) -> str:
    rows = [("phase", "min h", "rollouts", "unsafe")]
    for p in summary["phases"]:
        rows.append((p["phase"], f"{p['min_h']:.6g}", str(p["rollouts"]), str(p["unsafe_rollouts"])))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines += [
        "",
        f"perturbation seed: {summary['perturbation_seed']}"
        f" (excluded: {summary['excluded_seeds'] or 'none'})",
        f"baseline violation found: {summary['baseline_violation_found']}"
        f" at x0 indices {summary['adversarial_x0']}",
        f"final controller safe (tolerance {summary['safety_tolerance']:g}): {summary['final_safe']}",
    ]
    return "\n".join(lines) + "\n"


def _phase_row(name, mins, tol=0.0):
    return {"phase": name, "min_h": float(min(mins)) if mins else float("nan"),
            "rollouts": len(mins), "unsafe_rollouts": int(sum(m < -tol for m in mins))}


def run_campaign(cfg: CampaignConfig, out_dir=None) -> CampaignResult:
    """Run baseline, learning and final phases; write CSVs, plots and summaries.

    The baseline searches ``plant.seed_candidates`` in order for a perturbed
    plant on which the model-based filter leaves the safe set from some x0 of
    the evaluation set. Seeds without a violation are reported as excluded.
    """
    t_start = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")

    nom = cfg.nominal_params()
    bf, alpha, gains = cfg.barrier_function(), cfg.class_k(), cfg.pd_gains()
    ep_cfg = cfg.episode_config()
    x0s = evaluation_x0_set(cfg)
    k0 = CBFQP(bf, alpha, nom, gains)

    # phase (i): model-based baseline with seed search
    excluded, chosen = [], None
    for seed in cfg.plant.seed_candidates:
        true_p = perturb_params(nom, cfg.plant.perturbation, seed)
        base = _rollouts(true_p, k0, x0s, ep_cfg, bf)
        mins = [float(bf.value(t.states).min()) for t in base]
        if any(m < 0 for m in mins):
            chosen = (seed, true_p, base, mins)
            break
        excluded.append(seed)
        if cfg.plant.perturbation == 0.0:
            break  # every seed gives the same plant
    violation_found = chosen is not None
    if chosen is None:
        seed = cfg.plant.seed_candidates[0]
        true_p = perturb_params(nom, cfg.plant.perturbation, seed)
        base = _rollouts(true_p, k0, x0s, ep_cfg, bf)
        chosen = (seed, true_p, base, [float(bf.value(t.states).min()) for t in base])
        logger.warning("no candidate seed produced a baseline violation; using seed %d", seed)
    seed, true_p, base, base_mins = chosen
    adversarial = [i for i, m in enumerate(base_mins) if m < 0]
    for i, traj in enumerate(base):
        write_trajectory_csv(out / f"baseline_x0_{i:02d}.csv", traj, bf)

    # phase (ii): episodic learning on the chosen plant
    result = run_dacbarf(ep_cfg, true_p, nom, bf, alpha, gains, tuple(cfg.network.hidden),
                         cfg.train_config(), run_dir=out / "episodes")

    # phase (iii): final controller from the same x0 set
    final = _rollouts(true_p, result.controller, x0s, ep_cfg, bf)
    final_mins = [float(bf.value(t.states).min()) for t in final]
    for i, traj in enumerate(final):
        write_trajectory_csv(out / f"final_x0_{i:02d}.csv", traj, bf)

    tol = cfg.evaluation.safety_tolerance
    episode_mins = [e.min_h for e in result.report.episodes]
    phases = [_phase_row("baseline", base_mins), _phase_row("learning", episode_mins),
              _phase_row("final", final_mins)]
    final_safe = bool(final_mins) and min(final_mins) >= -tol
    summary = {
        "name": cfg.name,
        "phases": phases,
        "perturbation_seed": seed,
        "excluded_seeds": excluded if violation_found else list(cfg.plant.seed_candidates),
        "baseline_violation_found": violation_found,
        "adversarial_x0": adversarial,
        "x0_set": [[float(v) for v in x] for x in x0s],
        "baseline_min_h": base_mins,
        "final_min_h": final_mins,
        "safety_tolerance": tol,
        "final_safe": final_safe,
        "true_params": true_p.to_dict(),
    }
    with open(out / "summary.csv", "w") as fh:
        fh.write("phase,min_h,rollouts,unsafe_rollouts\n")
        for p in phases:
            fh.write(f"{p['phase']},{p['min_h']!r},{p['rollouts']},{p['unsafe_rollouts']}\n")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    text = summary_text(summary)
    (out / "summary.txt").write_text(text)

    _figures(out, bf, len(x0s), adversarial, base_mins, cfg.episodes.num_episodes)
    logger.info("campaign %s finished in %.1f s", cfg.name, time.perf_counter() - t_start)
    code = EXIT_OK if final_safe else EXIT_UNSAFE
    return CampaignResult(code, summary, out, base_mins, final_mins, x0s, result)


def _figures(out, bf, n_x0, adversarial, base_mins, n_episodes):
    show = adversarial or [int(np.argmin(base_mins))]
    episodes = [Trace(str(out / "episodes" / f"episode_{j:02d}_trajectory.csv"), EPISODE_COLOR, f"episode {j}")
                for j in range(1, n_episodes + 1)]
    baseline = [Trace(str(out / f"baseline_x0_{i:02d}.csv"), BASELINE_COLOR, f"CBF-QP x0 {i}") for i in show]
    final = [Trace(str(out / f"final_x0_{i:02d}.csv"), FINAL_COLOR, f"LCBF-QP x0 {i}") for i in show]
    emit_plot(PlotSpec("phase", episodes + baseline + final, str(out / "phase_portrait.svg"), bf,
                       "phase portrait"))
    worst = int(np.argmin(base_mins))
    emit_plot(PlotSpec("h_vs_t",
                       [Trace(str(out / f"baseline_x0_{worst:02d}.csv"), BASELINE_COLOR, "CBF-QP"),
                        Trace(str(out / f"final_x0_{worst:02d}.csv"), FINAL_COLOR, "LCBF-QP")],
                       str(out / "h_vs_t.svg"), bf, "barrier value"))
