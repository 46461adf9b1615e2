from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..simcore.render import load_png
from ..vision import VisionConfig, track_tube
from .episode import Episode, list_episodes, load_episode
from .metrics import FilterConfig, compute_metrics, filter_episode

PROPRIO_DIM = 11   # pose (3) + ee force (3) + sensor channels (5)
ACTION_DIM = 3


@dataclass(frozen=True)
class DatasetConfig:
    chunk_size: int = 20
    image_size: int = 32
    filter: FilterConfig = field(default_factory=FilterConfig)

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.image_size < 4:
            raise ValueError("image_size must be >= 4")


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray     # clamped away from zero

    @classmethod
    def fit(cls, x: np.ndarray) -> "Normalizer":
        x = np.asarray(x, dtype=np.float64)
        return cls(mean=x.mean(axis=0),
                   std=np.maximum(x.std(axis=0), 1e-6))

    def encode(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def decode(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean


@dataclass
class Dataset:
    """Normalized training windows, one per recorded step.

    obs_images holds a grayscale channel and a coarse tube mask, both mean
    pooled to image_size and scaled to [0, 1]. Action windows past the end
    of an episode repeat the terminal action and are flagged in pad."""
    obs_images: np.ndarray   # (M, 2, s, s) float32
    skappa: np.ndarray       # (M,) float64, curvature scores
    proprio: np.ndarray      # (M, 11) float64, normalized
    actions: np.ndarray      # (M, k, 3) float64, normalized
    pad: np.ndarray          # (M, k) bool
    episode_ids: np.ndarray  # (M,) int32
    step_ids: np.ndarray     # (M,) int32
    action_norm: Normalizer
    proprio_norm: Normalizer
    config: DatasetConfig

    def __len__(self):
        return len(self.proprio)

    def save(self, path):
        f = self.config.filter
        np.savez_compressed(
            Path(path),
            obs_images=self.obs_images, skappa=self.skappa,
            proprio=self.proprio,
            actions=self.actions, pad=self.pad,
            episode_ids=self.episode_ids, step_ids=self.step_ids,
            action_mean=self.action_norm.mean, action_std=self.action_norm.std,
            proprio_mean=self.proprio_norm.mean,
            proprio_std=self.proprio_norm.std,
            chunk_size=self.config.chunk_size,
            image_size=self.config.image_size,
            filter_params=np.array([f.f_threshold, f.time_limit, f.peak_limit,
                                    f.log_impulse_limit, f.keep_fraction]),
            impulse_domain=np.array(f.impulse_domain),
        )

    @classmethod
    def load(cls, path) -> "Dataset":
        with np.load(Path(path), allow_pickle=False) as z:
            fp = z["filter_params"]
            cfg = DatasetConfig(
                chunk_size=int(z["chunk_size"]),
                image_size=int(z["image_size"]),
                filter=FilterConfig(f_threshold=float(fp[0]),
                                    time_limit=float(fp[1]),
                                    peak_limit=float(fp[2]),
                                    log_impulse_limit=float(fp[3]),
                                    keep_fraction=float(fp[4]),
                                    impulse_domain=str(z["impulse_domain"])))
            return cls(obs_images=z["obs_images"], skappa=z["skappa"],
                       proprio=z["proprio"],
                       actions=z["actions"], pad=z["pad"],
                       episode_ids=z["episode_ids"], step_ids=z["step_ids"],
                       action_norm=Normalizer(z["action_mean"], z["action_std"]),
                       proprio_norm=Normalizer(z["proprio_mean"],
                                               z["proprio_std"]),
                       config=cfg)


def pool_image(img: np.ndarray, out_size: int) -> np.ndarray:
    """Mean pooling to out_size x out_size; image side must divide evenly."""
    h, w = img.shape
    if h % out_size or w % out_size:
        raise ValueError(f"cannot pool {img.shape} to {out_size}")
    fh, fw = h // out_size, w // out_size
    x = img.reshape(out_size, fh, out_size, fw).astype(np.float64)
    return x.mean(axis=(1, 3))


def build_observation(frame: np.ndarray, out_size: int = 32,
                      vision_cfg: Optional[VisionConfig] = None):
    """Model-facing view of one camera frame.

    Returns ((2, s, s) float32 in [0, 1], s_kappa). The second image channel
    is the selected tube component, not the raw coarse mask, so distractor
    blobs never reach the policy; with no tube found it is all zero and the
    curvature score falls back to 1."""
    res = track_tube(frame, vision_cfg)
    gray = pool_image(frame, out_size) / 255.0
    comp = res.skeleton.comp if res.found and res.skeleton.comp is not None \
        else np.zeros_like(frame, dtype=bool)
    mask = pool_image(comp.astype(np.float64), out_size)
    img = np.stack([gray, mask]).astype(np.float32)
    return img, float(res.s_kappa)


def _episode_proprio(ep: Episode) -> np.ndarray:
    return np.concatenate([ep.poses, ep.ee_forces, ep.channels], axis=1)


def build_dataset(episodes, config: Optional[DatasetConfig] = None,
                  strict: bool = False) -> Dataset:
    """Assemble training windows from episode directories or Episode objects.

    Episodes failing the training filter are skipped (strict=True raises
    instead). Raises if nothing passes."""
    cfg = config or DatasetConfig()
    if isinstance(episodes, (str, Path)):
        episodes = list_episodes(episodes)
    eps: List[Episode] = []
    for item in episodes:
        ep = item if isinstance(item, Episode) else load_episode(item)
        verdict = filter_episode(compute_metrics(ep, cfg.filter), cfg.filter,
                                 mode="training")
        if not verdict.accepted:
            if strict:
                raise ValueError(
                    f"episode rejected by training filter: {verdict.reasons}")
            continue
        eps.append(ep)
    if not eps:
        raise ValueError("no episodes pass the training filter")

    action_norm = Normalizer.fit(np.concatenate([ep.actions for ep in eps]))
    proprio_norm = Normalizer.fit(
        np.concatenate([_episode_proprio(ep) for ep in eps]))

    k = cfg.chunk_size
    obs_l, sk_l, prop_l, act_l, pad_l, eid_l, sid_l = [], [], [], [], [], [], []
    for ei, ep in enumerate(eps):
        n = ep.n_steps
        acts = action_norm.encode(ep.actions)
        prop = proprio_norm.encode(_episode_proprio(ep))
        for t in range(n):
            if ep.frames[t] is None:
                raise ValueError(f"episode {ei} step {t} has no frame")
            img, sk = build_observation(load_png(ep.frames[t]),
                                        cfg.image_size)
            obs_l.append(img)
            sk_l.append(sk)
            take = min(k, n - t)
            w = np.empty((k, ACTION_DIM))
            w[:take] = acts[t:t + take]
            w[take:] = acts[n - 1]
            p = np.zeros(k, dtype=bool)
            p[take:] = True
            prop_l.append(prop[t])
            act_l.append(w)
            pad_l.append(p)
            eid_l.append(ei)
            sid_l.append(t)

    return Dataset(
        obs_images=np.stack(obs_l).astype(np.float32),
        skappa=np.asarray(sk_l, dtype=np.float64),
        proprio=np.asarray(prop_l, dtype=np.float64),
        actions=np.asarray(act_l, dtype=np.float64),
        pad=np.asarray(pad_l, dtype=bool),
        episode_ids=np.asarray(eid_l, dtype=np.int32),
        step_ids=np.asarray(sid_l, dtype=np.int32),
        action_norm=action_norm, proprio_norm=proprio_norm, config=cfg)
