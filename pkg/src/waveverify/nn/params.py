"""Named parameter storage with gradient and velocity slots."""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ShapeError
from .tensor import Parameter


class ParamStore:
    """Map of layer name -> Parameter (weights + gradient + velocity).

    Iteration is always in sorted name order, so reductions and updates are
    deterministic. ``freeze()`` marks every parameter non-trainable; frozen
    parameters receive no gradients and are skipped by the optimizer.
    """

    def __init__(self):
        self._params: dict[str, Parameter] = {}
        self.frozen = False

    def add(self, name: str, values: np.ndarray) -> Parameter:
        if name in self._params:
            raise ShapeError(f"duplicate parameter name {name!r}")
        p = Parameter(np.asarray(values), name=name, trainable=not self.frozen)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def subset(self, prefix: str) -> dict[str, Parameter]:
        """Parameters under ``prefix.`` with the prefix stripped (for gru_step)."""
        plen = len(prefix) + 1
        return {n[plen:]: p for n, p in self._params.items() if n.startswith(prefix + ".")}

    def freeze(self) -> None:
        self.frozen = True
        for p in self._params.values():
            p.set_trainable(False)

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def copy(self) -> "ParamStore":
        """Deep copy of values; gradients and velocities start at zero."""
        out = ParamStore()
        for name in self.names():
            out.add(name, self._params[name].values.copy())
        return out

    def total_size(self) -> int:
        return sum(p.size for p in self._params.values())

    def state_hash(self) -> str:
        """SHA-256 over (name, shape, raw bytes) in sorted order."""
        h = hashlib.sha256()
        for name, p in self.items():
            h.update(name.encode())
            h.update(str(p.shape).encode())
            h.update(np.ascontiguousarray(p.values).tobytes())
        return h.hexdigest()

    def allclose(self, other: "ParamStore", rtol=0.0, atol=0.0) -> bool:
        if self.names() != other.names():
            return False
        return all(
            np.allclose(p.values, other[n].values, rtol=rtol, atol=atol)
            for n, p in self.items()
        )
