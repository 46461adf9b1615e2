"""Training objectives.

The confidence-weighted loss follows the form
    sum_i c_i |a_hat_i - a_i|_1 / (k (eps + 1 - c_i)) - lambda log(sum_i c_i / k)
with the L1 taken over the three action dims. Padded slots are excluded from
the first sum but still count toward the mean confidence, and k stays the
full chunk size either way. The no-confidence ablations train on plain
mean L1 instead (with c = 1 the first term is just a 1/eps rescaling of it).
"""
import numpy as np

from .. import numkit as nk
from ..numkit import Tensor
from .config import HyperParams


def _as_batched(x, want_dims: int) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.ndim == want_dims - 1:
        t = t.reshape((1,) + t.shape)
    if t.ndim != want_dims:
        raise ValueError(f"expected {want_dims - 1}- or {want_dims}-d input, "
                         f"got shape {t.shape}")
    return t


def _pad_mask(pad, b: int, k: int) -> np.ndarray:
    if pad is None:
        return np.zeros((b, k), dtype=bool)
    pad = np.asarray(pad, dtype=bool)
    if pad.ndim == 1:
        pad = pad[None, :]
    if pad.shape != (b, k):
        raise ValueError(f"pad mask must be ({b}, {k})")
    return pad


def racct_loss(a_hat, conf, target, pad=None,
               hp: HyperParams = None) -> Tensor:
    hp = hp or HyperParams()
    a_hat = _as_batched(a_hat, 3)
    conf = _as_batched(conf, 2)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 2:
        target = target[None]
    b, k, _ = a_hat.shape
    if conf.shape != (b, k) or target.shape != a_hat.shape:
        raise ValueError("loss input shapes disagree")
    if np.any(conf.data <= 0.0) or np.any(conf.data >= 1.0):
        raise ValueError("confidences must lie strictly inside (0, 1)")
    pad = _pad_mask(pad, b, k)

    err = nk.tabs(a_hat - Tensor(target)).sum(axis=2)     # (b, k)
    num = nk.relu_mask(conf * err, (~pad).astype(np.float64))
    denom = Tensor(hp.loss_eps + 1.0) - conf
    fit = nk.tsum(num / denom) * Tensor(1.0 / (k * b))

    mean_conf = conf.sum(axis=1) * Tensor(1.0 / k)        # (b,)
    reg = nk.tmean(nk.log(mean_conf)) * Tensor(hp.loss_lambda)
    return fit - reg


def act_l1_loss(a_hat, target, pad=None) -> Tensor:
    """Mean absolute error over non-padded slots and action dims."""
    a_hat = _as_batched(a_hat, 3)
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 2:
        target = target[None]
    b, k, d = a_hat.shape
    if target.shape != a_hat.shape:
        raise ValueError("loss input shapes disagree")
    pad = _pad_mask(pad, b, k)
    keep = (~pad).astype(np.float64)[:, :, None]
    count = float(keep.sum() * d)
    if count == 0:
        raise ValueError("every slot is padded")
    masked = nk.relu_mask(nk.tabs(a_hat - Tensor(target)),
                          np.broadcast_to(keep, a_hat.shape))
    return nk.tsum(masked) * Tensor(1.0 / count)


def kl_gaussian(mu, logvar) -> Tensor:
    """KL(N(mu, e^logvar) || N(0, I)), averaged over the batch."""
    mu = _as_batched(mu, 2)
    logvar = _as_batched(logvar, 2)
    term = mu * mu + nk.exp(logvar) - Tensor(1.0) - logvar   # (b, L)
    return nk.tmean(term.sum(axis=1)) * Tensor(0.5)
