"""Reverse-mode autodiff over numpy float64 arrays.

A ``Tape`` records primitive ops while it is active (``with Tape() as t:``).
With no active tape, ops compute plain values and record nothing, which is
the fast path used at inference time.  ``backward(tape, output)`` replays the
records in reverse and writes ``.grad`` on every tensor that requires it.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class Tensor:
    """A float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operators are wired to the op functions at the bottom of ops.py
    def __add__(self, other):
        from . import ops
        return ops.add(self, _as_tensor(other))

    def __radd__(self, other):
        from . import ops
        return ops.add(_as_tensor(other), self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, _as_tensor(other))

    def __rsub__(self, other):
        from . import ops
        return ops.sub(_as_tensor(other), self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, _as_tensor(other))

    def __rmul__(self, other):
        from . import ops
        return ops.mul(_as_tensor(other), self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(_as_tensor(other), self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, _as_tensor(other))

    def __getitem__(self, idx):
        from . import ops
        return ops.tslice(self, idx)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, axes):
        from . import ops
        return ops.transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.tmean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered record of primitive ops; append order is topological."""

    def __init__(self):
        # each record: (out, inputs tuple, backward_fn(g_out) -> grads per input)
        self.records: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        self.records.append((out, inputs, backward_fn))

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self, "tape stack corrupted"
        return False

    def __len__(self) -> int:
        return len(self.records)


_TAPE_STACK: list[Tape] = []


def active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


@contextmanager
def no_tape():
    """Suspend recording (used to run subgraphs without gradient tracking)."""
    _TAPE_STACK.append(None)  # type: ignore[arg-type]
    try:
        yield
    finally:
        _TAPE_STACK.pop()


def record_op(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Attach a primitive record to the active tape, if any."""
    tape = active_tape()
    if tape is not None:
        tape.record(out, inputs, backward_fn)
    return out


def backward(tape: Tape, output: Tensor, params: dict[str, Tensor] | None = None,
             accumulate: bool = False) -> dict[str, np.ndarray] | None:
    """Reverse sweep over ``tape`` seeding d(output)/d(output) = 1.

    Writes ``.grad`` on every requires_grad tensor reached (overwriting unless
    ``accumulate``), so repeated calls with the same tape are idempotent.
    When ``params`` is given, returns ``{name: grad}`` and raises KeyError for
    any parameter the tape never touched.
    """
    if output.data.size != 1:
        raise ValueError(f"backward needs a scalar output, got shape {output.shape}")

    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    touched: dict[int, Tensor] = {id(output): output}

    for out, inputs, backward_fn in reversed(tape.records):
        g_out = grads.get(id(out))
        if g_out is None:
            continue
        in_grads = backward_fn(g_out)
        for inp, g in zip(inputs, in_grads):
            if g is None:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            touched[key] = inp

    for key, t in touched.items():
        if not t.requires_grad:
            continue
        g = grads[key]
        if accumulate and t.grad is not None:
            t.grad = t.grad + g
        else:
            t.grad = g.copy()

    if params is not None:
        result = {}
        for name, p in params.items():
            if not p.requires_grad:
                continue
            if id(p) not in grads:
                raise KeyError(f"parameter {name!r} is not on the tape")
            result[name] = grads[id(p)]
        return result
    return None
