"""Entropies and Holevo quantities, all in bits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .channels import CqChannel
from .errors import NegativeInput, ParamOutOfRange, SizeMismatch
from .qstate import DensityOperator

# Eigenvalues below this are treated as exact zeros in entropy sums.
ZERO_EIG = 1e-12


@dataclass(frozen=True, eq=False)
class InputDistribution:
    pmf: np.ndarray

    def __post_init__(self):
        p = np.array(self.pmf, dtype=float, copy=True).ravel()
        if p.size == 0:
            raise ParamOutOfRange("empty distribution")
        if np.any(p < 0):
            raise ParamOutOfRange(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1.0) > 1e-10:
            raise ParamOutOfRange(f"probabilities sum to {p.sum():.12g}")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    def __len__(self):
        return self.pmf.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.pmf, dtype=dtype)

    @classmethod
    def uniform(cls, k: int) -> "InputDistribution":
        return cls(np.full(k, 1.0 / k))


def as_pmf(p) -> np.ndarray:
    if isinstance(p, InputDistribution):
        return p.pmf
    return InputDistribution(p).pmf


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=float).ravel()
    p = p[p > ZERO_EIG]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def entropy_of_eigenvalues(w) -> float:
    return shannon_entropy(np.real(w))


def von_neumann_entropy(rho: DensityOperator) -> float:
    """-tr(rho log2 rho)."""
    m = rho.matrix if hasattr(rho, "matrix") else np.asarray(rho)
    return entropy_of_eigenvalues(np.linalg.eigvalsh(m))


def _check_sizes(p: np.ndarray, channel: CqChannel) -> None:
    if p.size != channel.alphabet_size:
        raise SizeMismatch(
            f"distribution has {p.size} entries, channel alphabet has {channel.alphabet_size}"
        )


def conditional_entropy(p, channel: CqChannel) -> float:
    """H(B|X) = sum_x p(x) H(N(x))."""
    p = as_pmf(p)
    _check_sizes(p, channel)
    return float(sum(px * von_neumann_entropy(o) for px, o in zip(p, channel.outputs) if px > 0))


def holevo_information(p, channel: CqChannel) -> float:
    """H(sum_x p(x) rho_x) - sum_x p(x) H(rho_x)."""
    p = as_pmf(p)
    _check_sizes(p, channel)
    avg = sum(px * o.matrix for px, o in zip(p, channel.outputs))
    return max(0.0, von_neumann_entropy(avg) - conditional_entropy(p, channel))


def output_entropies(channel: CqChannel) -> np.ndarray:
    return np.array([von_neumann_entropy(o) for o in channel.outputs])


def holevo_batch(pmfs: np.ndarray, channel: CqChannel, out_entropies=None) -> np.ndarray:
    """Holevo information for every row of ``pmfs`` (shape (k, |X|))."""
    pmfs = np.atleast_2d(np.asarray(pmfs, dtype=float))
    if pmfs.shape[1] != channel.alphabet_size:
        raise SizeMismatch(f"pmf rows have {pmfs.shape[1]} entries, alphabet {channel.alphabet_size}")
    stack = np.stack([o.matrix for o in channel.outputs])
    h_x = output_entropies(channel) if out_entropies is None else out_entropies
    avgs = np.einsum("kx,xij->kij", pmfs, stack)
    w = np.linalg.eigvalsh(avgs)
    w = np.where(w > ZERO_EIG, w, 1.0)
    h_avg = -np.sum(w * np.log2(w), axis=1)
    return np.maximum(h_avg - pmfs @ h_x, 0.0)


def mutual_information_cq(p, channel: CqChannel) -> float:
    """I(X;B) = H(X) + H(B) - H(XB) of the block-diagonal cq state."""
    p = as_pmf(p)
    _check_sizes(p, channel)
    rho_xb = block_diag(*[px * o.matrix for px, o in zip(p, channel.outputs)])
    rho_b = sum(px * o.matrix for px, o in zip(p, channel.outputs))
    h_xb = entropy_of_eigenvalues(np.linalg.eigvalsh(rho_xb))
    return max(0.0, shannon_entropy(p) + von_neumann_entropy(rho_b) - h_xb)


def thermal_entropy_g(x: float) -> float:
    """Entropy in bits of a thermal state with mean photon number ``x``."""
    if x < 0:
        raise NegativeInput(f"mean photon number must be >= 0, got {x}")
    if x == 0:
        return 0.0
    return float((x + 1) * np.log2(x + 1) - x * np.log2(x))
