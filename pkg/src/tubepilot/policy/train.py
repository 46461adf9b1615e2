from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..numkit import AdamState, Tape, Tensor, adam_step, backward, no_tape
from .config import VARIANTS, HyperParams
from .losses import act_l1_loss, kl_gaussian, racct_loss
from .model import Policy


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; carries step and variant info."""


@dataclass
class TrainResult:
    policy: Policy
    losses: np.ndarray
    variant: str
    seed: int

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])


def stats_from_dataset(ds, hp: HyperParams) -> dict:
    p = hp.proprio_dim
    return {"action_mean": ds.action_norm.mean.copy(),
            "action_std": ds.action_norm.std.copy(),
            "proprio_mean": ds.proprio_norm.mean[:p].copy(),
            "proprio_std": ds.proprio_norm.std[:p].copy()}


def train(dataset, hp: Optional[HyperParams] = None, variant: str = "RACCT",
          seed: int = 0,
          callback: Optional[Callable[[int, float], None]] = None
          ) -> TrainResult:
    """Adam over the variant's objective plus the beta-weighted KL.

    Recurrent variants get their previous decoder tokens from an untracked
    forward pass on the preceding step's observation (one-step truncation);
    windows at an episode start use the learned start tokens instead.
    Deterministic for a fixed (dataset, hp, variant, seed)."""
    hp = hp or HyperParams.desk()
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
    if hp.chunk_size != dataset.config.chunk_size:
        raise ValueError(
            f"dataset windows are {dataset.config.chunk_size} steps, "
            f"hyperparameters want {hp.chunk_size}")
    if dataset.obs_images.shape[-1] != hp.image_size:
        raise ValueError("dataset image size does not match hyperparameters")
    use_conf, use_rec = VARIANTS[variant]

    policy = Policy(hp, variant, stats=stats_from_dataset(dataset, hp),
                    seed=seed)
    params = policy.trainable_params()
    opt = AdamState()
    rng = np.random.default_rng([int(seed), 0x5EED])
    m = len(dataset)
    pdim = hp.proprio_dim
    losses = np.empty(hp.steps)

    for step in range(hp.steps):
        idx = rng.integers(0, m, size=hp.batch_size)
        img = dataset.obs_images[idx]
        prop = dataset.proprio[idx, :pdim]
        skap = dataset.skappa[idx]
        tgt = dataset.actions[idx]
        pad = dataset.pad[idx]
        eps = rng.standard_normal((hp.batch_size, hp.latent_dim))

        prev_tokens, t0 = None, None
        if use_rec:
            t0 = dataset.step_ids[idx] == 0
            pidx = np.where(t0, idx, idx - 1)
            with no_tape():
                _, _, prev_tokens = policy.forward(
                    dataset.obs_images[pidx], dataset.proprio[pidx, :pdim],
                    dataset.skappa[pidx],
                    np.zeros((hp.batch_size, hp.latent_dim)))

        with Tape() as tape:
            mu, logvar = policy.encode_style(tgt, prop)
            z = Policy.sample_style(mu, logvar, eps)
            a_hat, conf, _ = policy.forward(img, prop, skap, z,
                                            prev_tokens, t0)
            if use_conf:
                fit = racct_loss(a_hat, conf, tgt, pad, hp)
            else:
                fit = act_l1_loss(a_hat, tgt, pad)
            loss = fit + kl_gaussian(mu, logvar) * Tensor(hp.kl_beta)

        val = loss.item()
        if not np.isfinite(val):
            raise TrainingDiverged(
                f"non-finite loss at step {step} "
                f"(variant {variant}, seed {seed})")
        grads = backward(tape, loss, params=params)
        adam_step(params, grads, opt, hp.lr)
        losses[step] = val
        if callback is not None:
            callback(step, val)

    return TrainResult(policy=policy, losses=losses, variant=variant,
                       seed=seed)
