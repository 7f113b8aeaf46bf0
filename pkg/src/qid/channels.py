"""Classical-quantum (broadcast) channels.

Input symbols are the dense integers ``0..alphabet_size-1``.  A broadcast
channel stores each joint output on ``B1 (x) B2`` (``B1`` is the left tensor
factor); receivers see the partial traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import qstate
from .errors import (
    DimensionMismatch,
    InvalidState,
    NotStochastic,
    ParamOutOfRange,
    SymbolOutOfRange,
)
from .qstate import DensityOperator, make_density, partial_trace, tensor_power


@dataclass(frozen=True, eq=False)
class CqChannel:
    outputs: tuple

    def __post_init__(self):
        outs = tuple(_as_state(o) for o in self.outputs)
        if not outs:
            raise InvalidState("a channel needs at least one input symbol")
        dims = {o.dim for o in outs}
        if len(dims) != 1:
            raise DimensionMismatch(f"outputs have differing dimensions {sorted(dims)}")
        object.__setattr__(self, "outputs", outs)

    @property
    def alphabet_size(self) -> int:
        return len(self.outputs)

    @property
    def dim(self) -> int:
        return self.outputs[0].dim

    def __call__(self, x: int) -> DensityOperator:
        return self.outputs[x]

    def is_diagonal(self) -> bool:
        return all(o.is_diagonal() for o in self.outputs)

    def average_output(self, pmf) -> DensityOperator:
        p = np.asarray(pmf, dtype=float)
        m = sum(pi * o.matrix for pi, o in zip(p, self.outputs))
        return DensityOperator._trusted(m)


@dataclass(frozen=True, eq=False)
class CqBroadcastChannel:
    outputs: tuple
    dim1: int
    dim2: int

    def __post_init__(self):
        outs = tuple(_as_state(o) for o in self.outputs)
        if not outs:
            raise InvalidState("a channel needs at least one input symbol")
        for x, o in enumerate(outs):
            if o.dim != self.dim1 * self.dim2:
                raise DimensionMismatch(
                    f"output {x} has dimension {o.dim}, expected {self.dim1}*{self.dim2}"
                )
        object.__setattr__(self, "outputs", outs)

    @property
    def alphabet_size(self) -> int:
        return len(self.outputs)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim1, self.dim2)

    def __call__(self, x: int) -> DensityOperator:
        return self.outputs[x]


Channel = Union[CqChannel, CqBroadcastChannel]


def _as_state(o) -> DensityOperator:
    if isinstance(o, DensityOperator):
        return o
    try:
        return make_density(o)
    except InvalidState:
        raise
    except Exception as exc:  # malformed array-likes
        raise InvalidState(f"cannot interpret output as a density operator: {exc}") from exc


@dataclass(frozen=True, eq=False)
class ProductChannelView:
    """Memoryless n-fold extension, evaluated lazily per input sequence."""

    base: Channel
    n: int

    @property
    def dim(self) -> int:
        d = self.base.dim if isinstance(self.base, CqChannel) else self.base.dim1 * self.base.dim2
        return d**self.n

    def _check(self, xn: Sequence[int]) -> None:
        if len(xn) != self.n:
            raise DimensionMismatch(f"sequence length {len(xn)} != block length {self.n}")
        for x in xn:
            if not 0 <= int(x) < self.base.alphabet_size:
                raise SymbolOutOfRange(f"symbol {x} outside alphabet of size {self.base.alphabet_size}")

    def __call__(self, xn: Sequence[int], cap: int | None = None) -> DensityOperator:
        self._check(xn)
        return tensor_power((self.base.outputs[int(x)] for x in xn), cap=cap)

    def diagonal(self, xn: Sequence[int]) -> np.ndarray:
        """Diagonal of the output in the product computational basis."""
        self._check(xn)
        out = np.ones(1)
        for x in xn:
            out = np.kron(out, np.real(np.diag(self.base.outputs[int(x)].matrix)))
        return out


def marginal(channel: CqBroadcastChannel, receiver: int) -> CqChannel:
    """Receiver ``receiver``'s view (1 or 2) of a broadcast channel."""
    if receiver not in (1, 2):
        raise ValueError(f"receiver must be 1 or 2, got {receiver}")
    keep = "A" if receiver == 1 else "B"
    return CqChannel(tuple(partial_trace(o, channel.dims, keep) for o in channel.outputs))


def extend_iid(channel: Channel, n: int, cap: int | None = None) -> ProductChannelView:
    if n < 1:
        raise ParamOutOfRange(f"block length must be >= 1, got {n}")
    view = ProductChannelView(channel, n)
    qstate.check_dim(view.dim, cap)
    return view


def erasure_bc(lam: float) -> CqBroadcastChannel:
    """Erasure broadcast channel with classical inputs {|0>, |1>}.

    Each receiver space is {|0>, |1>, |e>}.  The joint output is the pure
    state U|x> with U = sqrt(1-lam) |x>_B1|e>_B2 + sqrt(lam) |e>_B1|x>_B2, so
    receiver 1 sees the erasure channel with parameter lam and receiver 2
    the one with parameter 1-lam.
    """
    if not 0.0 <= lam <= 1.0:
        raise ParamOutOfRange(f"erasure parameter must lie in [0, 1], got {lam}")
    e = 2
    outputs = []
    for x in (0, 1):
        psi = np.zeros(9, dtype=complex)
        psi[3 * x + e] += np.sqrt(1.0 - lam)
        psi[3 * e + x] += np.sqrt(lam)
        outputs.append(DensityOperator._trusted(np.outer(psi, psi.conj())))
    return CqBroadcastChannel(tuple(outputs), 3, 3)


def classical_bc(kernel) -> CqBroadcastChannel:
    """Diagonal embedding of a classical broadcast kernel P(y1, y2 | x).

    ``kernel`` has shape (|X|, |Y1|, |Y2|).
    """
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 3:
        raise NotStochastic(f"kernel must have shape (|X|, |Y1|, |Y2|), got {k.shape}")
    if np.any(k < 0):
        raise NotStochastic(f"negative kernel entry {k.min():.3e}")
    sums = k.reshape(k.shape[0], -1).sum(axis=1)
    bad = np.abs(sums - 1.0) > 1e-10
    if np.any(bad):
        x = int(np.argmax(bad))
        raise NotStochastic(f"row {x} sums to {sums[x]:.12g}")
    outputs = tuple(DensityOperator._trusted(np.diag(row.ravel()).astype(complex)) for row in k)
    return CqBroadcastChannel(outputs, k.shape[1], k.shape[2])


def classical_channel(kernel) -> CqChannel:
    """Diagonal embedding of a single-user classical channel P(y | x)."""
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2 or np.any(k < 0) or np.any(np.abs(k.sum(axis=1) - 1) > 1e-10):
        raise NotStochastic("kernel must be a row-stochastic matrix")
    return CqChannel(tuple(DensityOperator._trusted(np.diag(r).astype(complex)) for r in k))


def bsc_kernel(p: float) -> np.ndarray:
    return np.array([[1 - p, p], [p, 1 - p]])


def independent_kernel(k1, k2) -> np.ndarray:
    """Joint kernel P(y1|x) P(y2|x) from two single-user kernels."""
    k1, k2 = np.asarray(k1, float), np.asarray(k2, float)
    return k1[:, :, None] * k2[:, None, :]


def cq_from_ensemble(joint, dims=None) -> CqBroadcastChannel:
    """Wrap already-applied joint outputs x -> N(|phi_x><phi_x|).

    ``joint`` is a sequence of states on B1 (x) B2, or a ``{x: state}`` mapping
    with keys 0..|X|-1.  ``dims=(d1, d2)`` defaults to equal square factors.
    """
    if isinstance(joint, dict):
        keys = sorted(joint)
        if keys != list(range(len(keys))):
            raise InvalidState(f"ensemble keys must be 0..{len(keys) - 1}, got {keys}")
        joint = [joint[k] for k in keys]
    states = [_as_state(s) for s in joint]
    if not states:
        raise InvalidState("empty ensemble")
    dim = states[0].dim
    if dims is None:
        root = int(round(np.sqrt(dim)))
        if root * root != dim:
            raise DimensionMismatch(f"cannot infer receiver dims from joint dimension {dim}")
        dims = (root, root)
    return CqBroadcastChannel(tuple(states), int(dims[0]), int(dims[1]))


# ---------------------------------------------------------------- file format


def _decode_matrix(rows, dim: int, where: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.shape == (dim * dim, 2):
        flat = arr[:, 0] + 1j * arr[:, 1]
        return flat.reshape(dim, dim)
    if arr.shape == (dim, dim, 2):
        return arr[..., 0] + 1j * arr[..., 1]
    raise InvalidState(f"{where}: expected {dim * dim} [re, im] pairs, got shape {arr.shape}")


def channel_from_dict(data: dict) -> CqBroadcastChannel:
    """Parse the JSON channel format.

    ``{"alphabet_size": k, "dimB1": d1, "dimB2": d2, "outputs": [M_0, ...]}``
    where each ``M_x`` lists the (d1*d2)^2 entries of the joint output in
    row-major order as ``[re, im]`` pairs.
    """
    try:
        k = int(data["alphabet_size"])
        d1 = int(data["dimB1"])
        d2 = int(data["dimB2"])
        raw = data["outputs"]
    except KeyError as exc:
        raise InvalidState(f"channel file missing field {exc.args[0]!r}") from None
    if len(raw) != k:
        raise InvalidState(f"alphabet_size={k} but {len(raw)} outputs given")
    outs = [_as_state(_decode_matrix(m, d1 * d2, f"outputs[{x}]")) for x, m in enumerate(raw)]
    return CqBroadcastChannel(tuple(outs), d1, d2)


def channel_to_dict(channel: CqBroadcastChannel) -> dict:
    outs = []
    for o in channel.outputs:
        flat = o.matrix.ravel()
        outs.append([[float(z.real), float(z.imag)] for z in flat])
    return {
        "alphabet_size": channel.alphabet_size,
        "dimB1": channel.dim1,
        "dimB2": channel.dim2,
        "outputs": outs,
    }


def load_channel(path) -> CqBroadcastChannel:
    with open(Path(path)) as fh:
        return channel_from_dict(json.load(fh))


def save_channel(channel: CqBroadcastChannel, path) -> None:
    with open(Path(path), "w") as fh:
        json.dump(channel_to_dict(channel), fh)
