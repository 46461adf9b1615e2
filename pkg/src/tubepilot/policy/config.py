from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

VARIANTS = {
    # variant: (use_confidence, use_recurrence)
    "ACT": (False, False),
    "ACCT": (True, False),
    "RACT": (False, True),
    "RACCT": (True, True),
}


@dataclass(frozen=True)
class HyperParams:
    chunk_size: int = 80
    ensemble_m: float = 0.95
    loss_eps: float = 0.2          # epsilon in the confidence-weighted term
    loss_lambda: float = 0.1       # weight of the -log mean-confidence term
    batch_size: int = 8
    lr: float = 1e-5
    steps: int = 2000
    latent_dim: int = 32
    width: int = 64
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    style_layers: int = 2
    kl_beta: float = 10.0
    image_size: int = 32
    patch: int = 8
    proprio_dim: int = 6           # pose (3) + end-effector force (3)
    action_dim: int = 3
    ensemble_order: str = "oldest_first"

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if self.ensemble_m <= 0:
            raise ValueError("ensemble_m must be positive")
        if self.loss_eps <= 0:
            raise ValueError("loss_eps must be positive")
        if self.loss_lambda < 0:
            raise ValueError("loss_lambda must be non-negative")
        if self.width % self.heads:
            raise ValueError("width must divide evenly into heads")
        if self.image_size % self.patch:
            raise ValueError("patch must divide image_size")
        if self.ensemble_order not in ("oldest_first", "newest_first"):
            raise ValueError(f"unknown ensemble_order {self.ensemble_order!r}")

    @property
    def n_patches(self) -> int:
        return (self.image_size // self.patch) ** 2

    @property
    def patch_dim(self) -> int:
        return 2 * self.patch * self.patch

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(**d)

    @classmethod
    def desk(cls, **over) -> "HyperParams":
        """Settings small enough to train and evaluate on a laptop CPU."""
        base = dict(chunk_size=20, lr=1e-3, steps=2000)
        base.update(over)
        return cls(**base)

    @classmethod
    def paper_scale(cls, **over) -> "HyperParams":
        """The full-size configuration; a preset, not something the test
        suite ever instantiates."""
        base = dict(chunk_size=80, lr=1e-5, steps=20000, latent_dim=512,
                    width=512, heads=8, enc_layers=4, dec_layers=7,
                    style_layers=4, image_size=128, patch=16)
        base.update(over)
        return cls(**base)


@dataclass
class Observation:
    """Per-step policy input, already normalized.

    image is the (2, s, s) camera view (grayscale + tube mask, [0, 1]);
    proprio is pose and end-effector force scaled by dataset stats."""
    image: np.ndarray
    s_kappa: float
    proprio: np.ndarray      # (6,)

    def validate(self, hp: HyperParams):
        s = hp.image_size
        if self.image.shape != (2, s, s):
            raise ValueError(f"image must be (2, {s}, {s})")
        if self.proprio.shape != (hp.proprio_dim,):
            raise ValueError(f"proprio must be ({hp.proprio_dim},)")
        return self


@dataclass(frozen=True)
class LatentStyle:
    z: np.ndarray
    mu: Optional[np.ndarray] = None
    logvar: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, dim: int, batch: Optional[int] = None) -> "LatentStyle":
        shape = (dim,) if batch is None else (batch, dim)
        return cls(z=np.zeros(shape))


@dataclass
class ActionConfidenceChunk:
    """Sigmoid confidences stay strictly inside (0, 1); the exact value 1
    is admitted only for the constant output of the no-confidence variants."""
    actions: np.ndarray       # (k, 3) normalized increments
    confidences: np.ndarray   # (k,) in (0, 1]

    def __post_init__(self):
        a = np.asarray(self.actions, dtype=np.float64)
        c = np.asarray(self.confidences, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 3 or c.shape != (a.shape[0],):
            raise ValueError(f"inconsistent chunk shapes {a.shape} {c.shape}")
        if np.any(c <= 0.0) or np.any(c > 1.0):
            raise ValueError("confidences must lie in (0, 1]")
        self.actions = a
        self.confidences = c

    @property
    def k(self) -> int:
        return len(self.actions)


@dataclass
class DecoderState:
    """Output tokens of the previous decode; None selects the start tokens."""
    tokens: Optional[np.ndarray] = None    # (k, width)

    def validate(self, hp: HyperParams):
        if self.tokens is not None and \
                self.tokens.shape != (hp.chunk_size, hp.width):
            raise ValueError(
                f"decoder state must be ({hp.chunk_size}, {hp.width})")
        return self
