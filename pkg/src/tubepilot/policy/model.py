"""The RACCT family: CVAE style encoder, observation encoder, recurrent
decoder, action and confidence heads.

All four ablations share one parameter structure; the variant only toggles
whether the confidence head output is used (else C = 1) and whether decoder
queries come from the shifted previous output tokens (else fixed learned
queries). Observation images enter as non-overlapping patches through a
single linear embedding.
"""
from typing import Optional

import numpy as np

from .. import numkit as nk
from ..numkit import Tensor, no_tape
from .config import (
    VARIANTS, ActionConfidenceChunk, DecoderState, HyperParams, Observation,
)


def shift_recurrent_input(prev_tokens, start: np.ndarray,
                          cls: np.ndarray) -> np.ndarray:
    """Decoder input tokens before position embeddings.

    Drops the leftmost previous output token and appends the CLS token; with
    no previous step the learned start tokens are used as they are."""
    start = np.asarray(start)
    if prev_tokens is None:
        return start.copy()
    prev = np.asarray(prev_tokens)
    if prev.shape != start.shape:
        raise ValueError(
            f"previous tokens have shape {prev.shape}, expected {start.shape}")
    return np.concatenate([prev[1:], np.asarray(cls)[None, :]], axis=0)


def patchify(img: np.ndarray, patch: int) -> np.ndarray:
    """(B, C, S, S) -> (B, (S/patch)^2, C patch^2) non-overlapping patches."""
    img = np.asarray(img, dtype=np.float64)
    b, c, s, s2 = img.shape
    if s != s2 or s % patch:
        raise ValueError(f"cannot patchify {img.shape} with patch {patch}")
    n = s // patch
    x = img.reshape(b, c, n, patch, n, patch)
    x = x.transpose(0, 2, 4, 1, 3, 5)
    return x.reshape(b, n * n, c * patch * patch)


def init_params(hp: HyperParams, seed: int = 0) -> dict:
    rng = np.random.default_rng([int(seed), 0x7C])
    params: dict = {}

    def lin(name, fan_in, fan_out):
        params[name + "/W"] = Tensor(
            rng.normal(0.0, fan_in ** -0.5, (fan_in, fan_out)),
            requires_grad=True)
        params[name + "/b"] = Tensor(np.zeros(fan_out), requires_grad=True)

    def emb(name, shape, std=0.02):
        params[name] = Tensor(rng.normal(0.0, std, shape), requires_grad=True)

    d, lat, k = hp.width, hp.latent_dim, hp.chunk_size
    lin("patch", hp.patch_dim, d)
    lin("prop", hp.proprio_dim, d)
    lin("skap", 1, d)
    lin("zin", lat, d)
    emb("enc/pos", (hp.n_patches + 3, d))
    for i in range(hp.enc_layers):
        lin(f"enc{i}/qkv", d, 3 * d)
        lin(f"enc{i}/att", d, d)
        lin(f"enc{i}/fc1", d, 4 * d)
        lin(f"enc{i}/fc2", 4 * d, d)
    emb("dec/query_pos", (k, d))
    emb("dec/start", (k, d))
    emb("dec/cls", (d,))
    for i in range(hp.dec_layers):
        lin(f"dec{i}/qkv", d, 3 * d)
        lin(f"dec{i}/att", d, d)
        lin(f"dec{i}/xq", d, d)
        lin(f"dec{i}/xkv", d, 2 * d)
        lin(f"dec{i}/xatt", d, d)
        lin(f"dec{i}/fc1", d, 4 * d)
        lin(f"dec{i}/fc2", 4 * d, d)
    lin("act_head", d, hp.action_dim)
    lin("conf_head", d, 1)
    # start confident but unsaturated so the -log term cannot dominate early
    params["conf_head/b"].data[:] = np.log(0.7 / 0.3)
    lin("sty/act", hp.action_dim, d)
    lin("sty/prop", hp.proprio_dim, d)
    emb("sty/cls", (d,))
    emb("sty/pos", (k + 2, d))
    for i in range(hp.style_layers):
        lin(f"sty{i}/qkv", d, 3 * d)
        lin(f"sty{i}/att", d, d)
        lin(f"sty{i}/fc1", d, 4 * d)
        lin(f"sty{i}/fc2", 4 * d, d)
    lin("sty/out", d, 2 * lat)
    return params


def _default_stats(hp: HyperParams) -> dict:
    return {
        "action_mean": np.zeros(hp.action_dim),
        "action_std": np.ones(hp.action_dim),
        "proprio_mean": np.zeros(hp.proprio_dim),
        "proprio_std": np.ones(hp.proprio_dim),
    }


class Policy:
    def __init__(self, hp: HyperParams, variant: str = "RACCT",
                 stats: Optional[dict] = None, seed: int = 0,
                 params: Optional[dict] = None):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
        self.hp = hp
        self.variant = variant
        self.use_confidence, self.use_recurrence = VARIANTS[variant]
        self.params = params if params is not None else init_params(hp, seed)
        self.stats = dict(_default_stats(hp), **(stats or {}))

    # ------------------------------------------------------------ attention

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        h = self.hp.heads
        return x.reshape((b, t, h, d // h)).transpose((0, 2, 1, 3))

    def _join(self, x: Tensor) -> Tensor:
        b, h, t, hd = x.shape
        return x.transpose((0, 2, 1, 3)).reshape((b, t, h * hd))

    def _attend(self, q: Tensor, k: Tensor, v: Tensor, out_name: str) -> Tensor:
        p = self.params
        hd = self.hp.width // self.hp.heads
        scores = (self._split(q) @ self._split(k).transpose((0, 1, 3, 2))) \
            * Tensor(hd ** -0.5)
        att = nk.softmax(scores, axis=-1)
        o = self._join(att @ self._split(v))
        return o @ p[out_name + "/W"] + p[out_name + "/b"]

    def _self_att(self, pre: str, x: Tensor) -> Tensor:
        p, d = self.params, self.hp.width
        qkv = x @ p[pre + "/qkv/W"] + p[pre + "/qkv/b"]
        return self._attend(qkv[:, :, 0:d], qkv[:, :, d:2 * d],
                            qkv[:, :, 2 * d:3 * d], pre + "/att")

    def _cross_att(self, pre: str, x: Tensor, mem: Tensor) -> Tensor:
        p, d = self.params, self.hp.width
        q = x @ p[pre + "/xq/W"] + p[pre + "/xq/b"]
        kv = mem @ p[pre + "/xkv/W"] + p[pre + "/xkv/b"]
        return self._attend(q, kv[:, :, 0:d], kv[:, :, d:2 * d], pre + "/xatt")

    def _ffn(self, pre: str, x: Tensor) -> Tensor:
        p = self.params
        h = nk.gelu(x @ p[pre + "/fc1/W"] + p[pre + "/fc1/b"])
        return h @ p[pre + "/fc2/W"] + p[pre + "/fc2/b"]

    # ------------------------------------------------------------- encoders

    def _encode_obs(self, img, prop, skappa, z) -> Tensor:
        p, hp = self.params, self.hp
        img = np.asarray(img, dtype=np.float64)
        b, d = img.shape[0], hp.width
        t_img = Tensor(patchify(img, hp.patch)) @ p["patch/W"] + p["patch/b"]
        t_prop = (Tensor(np.asarray(prop, dtype=np.float64))
                  @ p["prop/W"] + p["prop/b"]).reshape((b, 1, d))
        sk = np.asarray(skappa, dtype=np.float64).reshape(b, 1)
        t_sk = (Tensor(sk) @ p["skap/W"] + p["skap/b"]).reshape((b, 1, d))
        zt = z if isinstance(z, Tensor) else Tensor(np.asarray(z, np.float64))
        t_z = (zt @ p["zin/W"] + p["zin/b"]).reshape((b, 1, d))
        x = nk.concat([t_img, t_prop, t_sk, t_z], axis=1) + p["enc/pos"]
        for i in range(hp.enc_layers):
            x = x + self._self_att(f"enc{i}", nk.layer_norm(x))
            x = x + self._ffn(f"enc{i}", nk.layer_norm(x))
        return nk.layer_norm(x)

    def encode_style(self, action_windows, prop):
        """Posterior over the style latent from a ground-truth window.

        Returns (mu, logvar) Tensors of shape (B, latent)."""
        p, hp = self.params, self.hp
        wins = np.asarray(action_windows, dtype=np.float64)
        if wins.ndim == 2:
            wins = wins[None]
        b, d, lat = wins.shape[0], hp.width, hp.latent_dim
        t_act = Tensor(wins) @ p["sty/act/W"] + p["sty/act/b"]
        t_prop = (Tensor(np.asarray(prop, np.float64).reshape(b, -1))
                  @ p["sty/prop/W"] + p["sty/prop/b"]).reshape((b, 1, d))
        t_cls = Tensor(np.zeros((b, 1, d))) + p["sty/cls"].reshape((1, 1, d))
        x = nk.concat([t_cls, t_prop, t_act], axis=1) + p["sty/pos"]
        for i in range(hp.style_layers):
            x = x + self._self_att(f"sty{i}", nk.layer_norm(x))
            x = x + self._ffn(f"sty{i}", nk.layer_norm(x))
        h = nk.layer_norm(x)[:, 0, :]
        out = h @ p["sty/out/W"] + p["sty/out/b"]
        return out[:, 0:lat], out[:, lat:2 * lat]

    @staticmethod
    def sample_style(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
        """Reparameterized draw z = mu + exp(logvar/2) * eps."""
        return mu + nk.exp(logvar * Tensor(0.5)) * Tensor(eps)

    # -------------------------------------------------------------- forward

    def forward(self, img, prop, skappa, z, prev_tokens=None, t0_mask=None):
        """Batched decode.

        prev_tokens (B, k, width) feeds the shift recurrence; rows flagged in
        t0_mask (and all rows when prev_tokens is None) start from the learned
        start tokens. Returns (actions Tensor (B, k, 3), confidence Tensor
        (B, k), output tokens ndarray (B, k, width))."""
        p, hp = self.params, self.hp
        img = np.asarray(img, dtype=np.float64)
        b, d, k = img.shape[0], hp.width, hp.chunk_size
        mem = self._encode_obs(img, prop, skappa, z)

        if self.use_recurrence:
            if prev_tokens is None:
                t0 = np.ones(b, dtype=bool)
                shifted = np.zeros((b, k, d))
            else:
                prev = np.asarray(prev_tokens, dtype=np.float64)
                if prev.shape != (b, k, d):
                    raise ValueError(
                        f"prev tokens must be ({b}, {k}, {d}), got {prev.shape}")
                t0 = np.zeros(b, dtype=bool) if t0_mask is None \
                    else np.asarray(t0_mask, dtype=bool)
                shifted = np.zeros((b, k, d))
                shifted[~t0, :k - 1] = prev[~t0, 1:]
            cls_m = np.zeros((b, k, 1))
            cls_m[~t0, k - 1, 0] = 1.0
            x = Tensor(shifted) \
                + p["dec/start"] * Tensor(t0.astype(np.float64)[:, None, None]) \
                + p["dec/cls"].reshape((1, 1, d)) * Tensor(cls_m) \
                + p["dec/query_pos"]
        else:
            x = Tensor(np.zeros((b, k, d))) + p["dec/query_pos"]

        for i in range(hp.dec_layers):
            x = x + self._self_att(f"dec{i}", nk.layer_norm(x))
            x = x + self._cross_att(f"dec{i}", nk.layer_norm(x), mem)
            x = x + self._ffn(f"dec{i}", nk.layer_norm(x))
        x = nk.layer_norm(x)

        a_hat = x @ p["act_head/W"] + p["act_head/b"]
        if self.use_confidence:
            conf = nk.sigmoid(x @ p["conf_head/W"] + p["conf_head/b"])
            conf = conf.reshape((b, k))
        else:
            conf = Tensor(np.ones((b, k)))
        return a_hat, conf, x.data.copy()

    # ------------------------------------------------------------ inference

    def act(self, obs: Observation, state: Optional[DecoderState] = None):
        """One control-rate decode with z = 0 and no gradient tracking."""
        obs.validate(self.hp)
        prev = state.tokens if state is not None else None
        if prev is not None:
            DecoderState(prev).validate(self.hp)
        with no_tape():
            z = np.zeros((1, self.hp.latent_dim))
            a, c, toks = self.forward(
                obs.image[None], obs.proprio[None],
                np.array([obs.s_kappa]), z,
                prev_tokens=None if prev is None else prev[None])
        chunk = ActionConfidenceChunk(actions=a.data[0],
                                      confidences=c.data[0])
        return chunk, DecoderState(tokens=toks[0])

    # ---------------------------------------------------------------- stats

    def normalize_proprio(self, pose, force) -> np.ndarray:
        raw = np.concatenate([np.asarray(pose, np.float64).ravel(),
                              np.asarray(force, np.float64).ravel()])
        return (raw - self.stats["proprio_mean"]) / self.stats["proprio_std"]

    def denormalize_action(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a) * self.stats["action_std"] \
            + self.stats["action_mean"]

    # -------------------------------------------------------------- weights

    def trainable_params(self) -> dict:
        out = {}
        for name, t in self.params.items():
            if not self.use_confidence and name.startswith("conf_head"):
                continue
            if not self.use_recurrence and name in ("dec/start", "dec/cls"):
                continue
            out[name] = t
        return out

    def n_params(self) -> int:
        return sum(t.size for t in self.params.values())

    def save(self, path):
        blobs = dict(self.params)
        for key, arr in self.stats.items():
            blobs[f"stats/{key}"] = arr
        nk.save_checkpoint(path, blobs, meta={"variant": self.variant,
                                              "hp": self.hp.to_dict()})

    @classmethod
    def load(cls, path) -> "Policy":
        blocks, meta = nk.load_checkpoint(path)
        stats = {k[len("stats/"):]: v for k, v in blocks.items()
                 if k.startswith("stats/")}
        params = {k: Tensor(v, requires_grad=True) for k, v in blocks.items()
                  if not k.startswith("stats/")}
        return cls(HyperParams.from_dict(meta["hp"]), meta["variant"],
                   stats=stats, params=params)
