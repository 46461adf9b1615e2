"""Closed-loop episode runner for experts and trained policies."""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..datakit import (CHANNEL_NAMES, IMPULSE_FLOOR, EpisodeMetrics,
                       EpisodeWriter, build_observation, compute_impulse)
from ..policy import EnsembleBuffer, Observation, Policy, temporal_ensemble
from ..simcore import Outcome, Simulator


@dataclass
class RolloutResult:
    episode_dir: Path
    outcome: Outcome
    metrics: Optional[EpisodeMetrics]   # None for a zero-step run
    n_steps: int
    seed: int


def running_metrics(ts, ch_rows, threshold: float) -> EpisodeMetrics:
    """Metrics over rows collected so far; equals the final file metrics."""
    t = np.asarray(ts)
    ch = np.abs(np.asarray(ch_rows))            # (n, 5)
    dt = float(t[1] - t[0])
    imp = np.array([compute_impulse(ch[:, j], threshold=threshold, dt=dt)
                    for j in range(len(CHANNEL_NAMES))])
    return EpisodeMetrics(duration=float(t[-1]),
                          peaks=ch.max(axis=0),
                          log_impulses=np.log(np.maximum(imp, IMPULSE_FLOOR)))


def rollout(agent, sim: Simulator, seed: int, out_dir,
            max_steps: int = 400, record_frames: bool = True
            ) -> RolloutResult:
    """Run one closed-loop episode and persist it in the episode format.

    Rows hold the observation at acting time (pose, previous tick's forces,
    frame) together with the command chosen from it; a closing row carries
    the final state with a zero command, so terminal force spikes are part
    of the record. Deterministic given (agent, sim config, seed)."""
    is_policy = isinstance(agent, Policy)
    writer = EpisodeWriter(out_dir, seed=seed,
                           operator="policy" if is_policy else "scripted",
                           dt=sim.cfg.dt)
    state = sim.reset(seed)
    dt = sim.cfg.dt
    prev_sample = None
    prev_ee = np.zeros(3)
    prev_ch = np.zeros(5)
    ts, ch_rows = [0.0], [prev_ch]
    dec_state = None
    buf = EnsembleBuffer(agent.hp.chunk_size) if is_policy else None
    outcome = Outcome("in_progress")
    metrics = None
    steps = 0

    for i in range(max_steps):
        frame = sim.render_camera1(state)
        if is_policy:
            img, skap = build_observation(frame, agent.hp.image_size)
            obs = Observation(image=img.astype(np.float64), s_kappa=skap,
                              proprio=agent.normalize_proprio(state.ee_pose,
                                                              prev_ee))
            chunk, dec_state = agent.act(obs, dec_state)
            buf.push(i, chunk)
            action = agent.denormalize_action(
                temporal_ensemble(buf, i, agent.hp.ensemble_m,
                                  agent.hp.ensemble_order))
        else:
            action = agent(state, prev_sample).as_array()
        writer.append(i * dt, state.ee_pose, prev_ee, prev_ch, action,
                      frame if record_frames else None)

        state, sample = sim.step(state, action)
        prev_sample = sample
        prev_ee = np.array([sample.fx_ee, sample.fy_ee, sample.fz_ee])
        prev_ch = sample.channels()
        ts.append((i + 1) * dt)
        ch_rows.append(prev_ch)
        steps = i + 1
        metrics = running_metrics(ts, ch_rows, sim.cfg.impulse_threshold)
        outcome = sim.check_outcome(state, metrics)
        if outcome.terminal:
            break

    # closing observation row; its zero command marks the stop
    writer.append(steps * dt, state.ee_pose, prev_ee, prev_ch, np.zeros(3),
                  sim.render_camera1(state) if record_frames else None)
    if not outcome.terminal:
        outcome = Outcome("failure", "timeout")
    writer.finalize(outcome.status, outcome.reason or "")
    return RolloutResult(episode_dir=Path(out_dir), outcome=outcome,
                         metrics=metrics, n_steps=steps, seed=seed)
