"""Finite-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tape, Tensor, backward


@dataclass
class GradCheckReport:
    per_block: dict[str, float]
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def __str__(self):
        lines = [f"grad check (tol {self.tolerance:g}): "
                 f"max rel err {self.max_rel_err:.3e} "
                 f"[{'PASS' if self.passed else 'FAIL'}]"]
        for name, err in sorted(self.per_block.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {name:40s} {err:.3e}")
        return "\n".join(lines)


def grad_check(params: dict[str, Tensor], loss_fn, tolerance: float = 1e-4,
               h: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild its graph from ``params`` on every call and
    return a scalar Tensor.  Relative error per coordinate uses a denominator
    floored at 1e-3 so near-zero gradients are judged on an absolute scale.
    """
    n_params = sum(p.size for p in params.values())
    if n_params > 10_000:
        raise ValueError(f"{n_params} parameters is too many to difference")

    with Tape() as tape:
        loss = loss_fn()
    analytic = backward(tape, loss, params=params)

    per_block: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        ga = analytic[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().item()
            flat[i] = orig - h
            f_minus = loss_fn().item()
            flat[i] = orig
            gn = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(ga[i]), abs(gn), 1e-3)
            worst = max(worst, abs(ga[i] - gn) / denom)
        per_block[name] = worst

    max_err = max(per_block.values()) if per_block else 0.0
    return GradCheckReport(per_block=per_block, max_rel_err=max_err,
                           tolerance=tolerance)
