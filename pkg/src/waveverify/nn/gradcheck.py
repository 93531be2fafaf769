"""Central finite-difference oracle and the gradient verification suite.

The suite checks every layer op in isolation plus randomly composed stacks
(conv / pool / activation / GRU / dense feeding a random loss head) against
central differences at 64-bit precision. It is the second, independent route
for every backward implementation in ops.py.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import stream
from . import ops
from .params import ParamStore

DEFAULT_H = 1e-5
DEFAULT_TOLERANCE = 1e-4

LAYER_KINDS = (
    "conv1d_valid",
    "conv1d_same",
    "maxpool1d",
    "lrelu",
    "dense",
    "gru",
    "softmax_xent",
    "cosine_distance",
    "mse",
)


def finite_difference_grad(f, store: ParamStore, h: float = DEFAULT_H) -> dict[str, np.ndarray]:
    """Central differences ``(f(t+h e_k) - f(t-h e_k)) / 2h`` per coordinate.

    ``f`` takes the store and returns a float; it must be deterministic.
    Only trainable parameters are differentiated.
    """
    grads: dict[str, np.ndarray] = {}
    for name, p in store.items():
        if not p.trainable:
            continue
        g = np.zeros_like(p.values)
        flat_v = p.values.reshape(-1)
        flat_g = g.reshape(-1)
        for k in range(flat_v.size):
            orig = flat_v[k]
            flat_v[k] = orig + h
            f_plus = f(store)
            flat_v[k] = orig - h
            f_minus = f(store)
            flat_v[k] = orig
            flat_g[k] = (f_plus - f_minus) / (2.0 * h)
        grads[name] = g
    return grads


def autodiff_grad(forward, store: ParamStore) -> tuple[float, dict[str, np.ndarray]]:
    """Run ``forward(store) -> Tensor`` once and collect tape gradients."""
    store.zero_grads()
    loss = forward(store)
    loss.backward()
    grads = {n: p.grad.copy() for n, p in store.items() if p.trainable}
    store.zero_grads()
    return loss.item(), grads


def relative_error(g_ad: np.ndarray, g_fd: np.ndarray) -> float:
    """Worst coordinate-wise ``|a - b| / max(1, |b|)`` (b = finite differences)."""
    denom = np.maximum(1.0, np.abs(g_fd))
    return float(np.max(np.abs(g_ad - g_fd) / denom)) if g_fd.size else 0.0


def compare_grads(forward, store: ParamStore, h: float = DEFAULT_H) -> float:
    """Worst relative error between the tape and finite differences."""
    _, ad = autodiff_grad(forward, store)
    fd = finite_difference_grad(lambda s: forward(s).item(), store, h=h)
    worst = 0.0
    for name in fd:
        worst = max(worst, relative_error(ad[name], fd[name]))
    return worst


# ---------------------------------------------------------------------------
# randomized test cases
# ---------------------------------------------------------------------------


def _loss_head(x, rng: np.random.Generator):
    """Reduce a tensor to a scalar through a randomly chosen loss."""
    flat_dim = int(np.prod(x.shape))
    x = ops.reshape(x, (flat_dim,))
    choice = rng.integers(0, 4)
    if choice == 0:
        target = rng.dirichlet(np.ones(flat_dim))
        return ops.soft_cross_entropy(target, ops.softmax(x))
    if choice == 1:
        target = rng.uniform(0.2, 1.0, flat_dim)
        return ops.cosine_distance(ops.add(ops.mul(x, 0.2), 2.0), target)  # shift keeps the norm > 0
    if choice == 2:
        target = rng.uniform(-1.0, 1.0, flat_dim)
        return ops.mse(x, target)
    return ops.tsum(ops.mul(x, rng.uniform(-1.0, 1.0, flat_dim)))


def build_layer_case(kind: str, seed: int):
    """A single-op case: returns (store, forward) for one layer type."""
    rng = stream(seed, "gradcheck", kind)
    store = ParamStore()

    if kind in ("conv1d_valid", "conv1d_same"):
        length, c_in, c_out, k = 8, 2, 3, 3
        stride = int(rng.integers(1, 3)) if kind == "conv1d_valid" else 1
        padding = ops.VALID if kind == "conv1d_valid" else ops.SAME
        store.add("x", rng.uniform(-1, 1, (length, c_in)))
        store.add("w", rng.uniform(-1, 1, (k, c_in, c_out)))
        store.add("b", rng.uniform(-1, 1, c_out))
        return store, lambda s: _loss_head(
            ops.conv1d(s["x"], s["w"], s["b"], stride=stride, padding=padding),
            stream(seed, "gradcheck", kind, "head"),
        )
    if kind == "maxpool1d":
        store.add("x", rng.uniform(-1, 1, (9, 3)))
        return store, lambda s: _loss_head(
            ops.maxpool1d(s["x"], pool=3, stride=2), stream(seed, "gradcheck", kind, "head")
        )
    if kind == "lrelu":
        store.add("x", rng.uniform(-1, 1, (6, 2)))
        return store, lambda s: _loss_head(
            ops.lrelu(s["x"], alpha=0.3), stream(seed, "gradcheck", kind, "head")
        )
    if kind == "dense":
        store.add("x", rng.uniform(-1, 1, 5))
        store.add("w", rng.uniform(-1, 1, (5, 4)))
        store.add("b", rng.uniform(-1, 1, 4))
        return store, lambda s: _loss_head(
            ops.dense(s["x"], s["w"], s["b"]), stream(seed, "gradcheck", kind, "head")
        )
    if kind == "gru":
        d, hidden, t = 3, 4, 3
        store.add("x", rng.uniform(-1, 1, (t, d)))
        _add_gru_params(store, "gru", d, hidden, rng)
        return store, lambda s: _loss_head(
            ops.gru_sequence(s["x"], s.subset("gru")), stream(seed, "gradcheck", kind, "head")
        )
    if kind == "softmax_xent":
        target = stream(seed, "gradcheck", kind, "target").dirichlet(np.ones(5))
        store.add("x", rng.uniform(-2, 2, 5))
        return store, lambda s: ops.soft_cross_entropy(target, ops.softmax(s["x"]))
    if kind == "cosine_distance":
        store.add("a", rng.uniform(0.5, 1.5, 6))
        store.add("b", rng.uniform(0.5, 1.5, 6))
        return store, lambda s: ops.cosine_distance(s["a"], s["b"])
    if kind == "mse":
        store.add("a", rng.uniform(-1, 1, 6))
        store.add("b", rng.uniform(-1, 1, 6))
        return store, lambda s: ops.mse(s["a"], s["b"])
    raise ValueError(f"unknown layer kind {kind!r}")


def _add_gru_params(store: ParamStore, prefix: str, d: int, hidden: int, rng) -> None:
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.w_{gate}", rng.uniform(-0.8, 0.8, (d, hidden)))
        store.add(f"{prefix}.u_{gate}", rng.uniform(-0.8, 0.8, (hidden, hidden)))
        store.add(f"{prefix}.b_{gate}", rng.uniform(-0.3, 0.3, hidden))


def build_random_stack(seed: int, depth: int = 5):
    """Random composite network: returns (store, forward, layer_kinds_used).

    Dimensions stay <= 8 so the finite-difference sweep stays cheap.
    """
    rng = stream(seed, "gradcheck", "stack")
    store = ParamStore()
    length = int(rng.integers(6, 13))
    c = int(rng.integers(1, 4))
    store.add("input", rng.uniform(-1, 1, (length, c)))
    plan: list[tuple] = []
    used: list[str] = []
    rank = 2
    for i in range(depth):
        if rank == 2:
            choices = ["conv", "pool", "lrelu", "gru"]
            if length < 3:
                choices = ["lrelu", "gru"]
            kind = choices[rng.integers(0, len(choices))]
            if kind == "conv":
                k = int(rng.integers(1, min(3, length) + 1))
                same = bool(rng.integers(0, 2))
                stride = 1 if same else int(rng.integers(1, 3))
                c_out = int(rng.integers(1, 5))
                store.add(f"l{i}.w", rng.uniform(-0.8, 0.8, (k, c, c_out)))
                store.add(f"l{i}.b", rng.uniform(-0.3, 0.3, c_out))
                plan.append(("conv", i, stride, ops.SAME if same else ops.VALID))
                used.append("conv1d_same" if same else "conv1d_valid")
                length = length if same else (length - k) // stride + 1
                c = c_out
            elif kind == "pool":
                pool = int(rng.integers(2, min(3, length) + 1))
                stride = int(rng.integers(1, 3))
                plan.append(("pool", i, pool, stride))
                used.append("maxpool1d")
                length = (length - pool) // stride + 1
            elif kind == "lrelu":
                plan.append(("lrelu", i, 0.3, None))
                used.append("lrelu")
            else:
                hidden = int(rng.integers(2, 6))
                _add_gru_params(store, f"l{i}.gru", c, hidden, rng)
                plan.append(("gru", i, hidden, None))
                used.append("gru")
                rank, length, c = 1, hidden, hidden
        else:
            if rng.integers(0, 2):
                d_out = int(rng.integers(2, 6))
                store.add(f"l{i}.w", rng.uniform(-0.8, 0.8, (length, d_out)))
                store.add(f"l{i}.b", rng.uniform(-0.3, 0.3, d_out))
                plan.append(("dense", i, None, None))
                used.append("dense")
                length = d_out
            else:
                plan.append(("lrelu", i, 0.3, None))
                used.append("lrelu")

    head_seed = int(stream(seed, "gradcheck", "stack", "headpick").integers(0, 2**31))

    def forward(s: ParamStore):
        x = s["input"]
        for kind, i, a, b in plan:
            if kind == "conv":
                x = ops.conv1d(x, s[f"l{i}.w"], s[f"l{i}.b"], stride=a, padding=b)
            elif kind == "pool":
                x = ops.maxpool1d(x, pool=a, stride=b)
            elif kind == "lrelu":
                x = ops.lrelu(x, alpha=a)
            elif kind == "gru":
                x = ops.gru_sequence(x, s.subset(f"l{i}.gru"))
            else:
                x = ops.dense(x, s[f"l{i}.w"], s[f"l{i}.b"])
        return _loss_head(x, stream(head_seed, "gradcheck", "head"))

    return store, forward, used


@dataclass
class GradcheckReport:
    tolerance: float
    worst_by_layer: dict[str, float] = field(default_factory=dict)
    worst_overall: float = 0.0
    n_cases: int = 0

    @property
    def passed(self) -> bool:
        return self.worst_overall < self.tolerance

    def record(self, kinds, err: float) -> None:
        self.n_cases += 1
        self.worst_overall = max(self.worst_overall, err)
        for kind in set(kinds):
            self.worst_by_layer[kind] = max(self.worst_by_layer.get(kind, 0.0), err)

    def lines(self) -> list[str]:
        out = [f"{kind:18s} worst rel err {err:.3e}" for kind, err in sorted(self.worst_by_layer.items())]
        verdict = "PASS" if self.passed else "FAIL"
        out.append(f"{verdict}, worst rtol {self.worst_overall:.3e} over {self.n_cases} cases (tolerance {self.tolerance:g})")
        return out


def run_suite(n_stacks: int = 100, depth: int = 5, seed: int = 0,
              tolerance: float = DEFAULT_TOLERANCE, h: float = DEFAULT_H) -> GradcheckReport:
    """Dedicated per-layer checks plus ``n_stacks`` random composite stacks."""
    report = GradcheckReport(tolerance=tolerance)
    for kind in LAYER_KINDS:
        store, forward = build_layer_case(kind, seed)
        report.record([kind], compare_grads(forward, store, h=h))
    for i in range(n_stacks):
        store, forward, used = build_random_stack(seed + i, depth=depth)
        report.record(used, compare_grads(forward, store, h=h))
    return report
