"""Converse machinery: simplex nets, encoder truncation and hypergraph covering.

Nets are type lattices.  Rounding a pmf on k letters to denominator m by
largest remainders moves it by at most k/(4m) in total variation, so
m = ceil(2/delta) * max(1, ceil(k/8)) covers the simplex within delta.
For k <= 8 this is the plain ceil(2/delta) lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from . import qstate
from .errors import (
    EmptyComponent,
    EnumerationTooLarge,
    NoCoveringFound,
    ParamOutOfRange,
    TooFine,
)
from .qstate import HermitianOperator
from .regions import simplex_lattice
from .typicality import ENUM_CAP, _digits

NET_CAP = 10**7


@dataclass(frozen=True, eq=False)
class SimplexNet:
    delta: float
    denominator: int
    points: np.ndarray  # (size, k)

    @property
    def alphabet_size(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def c_net(self) -> float:
        """The constant c with size = (c / delta)^k."""
        return self.delta * self.size ** (1.0 / self.alphabet_size)


def net_denominator(alphabet_size: int, delta: float) -> int:
    return math.ceil(2.0 / delta) * max(1, math.ceil(alphabet_size / 8))


def build_simplex_net(alphabet_size: int, delta: float, cap: int = NET_CAP) -> SimplexNet:
    if alphabet_size < 2:
        raise ParamOutOfRange(f"alphabet_size must be >= 2, got {alphabet_size}")
    if not 0.0 < delta < 1.0:
        raise ParamOutOfRange(f"delta must lie in (0, 1), got {delta}")
    m = net_denominator(alphabet_size, delta)
    size = math.comb(m + alphabet_size - 1, alphabet_size - 1)
    if size > cap:
        raise TooFine(f"net with denominator {m} on {alphabet_size} letters has {size} points (cap {cap})")
    return SimplexNet(delta, m, simplex_lattice(alphabet_size, m))


def tv_distance(p, q) -> np.ndarray:
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)


def nearest_net_point(net: SimplexNet, pmf) -> int:
    """Index of the closest net point in TV distance, ties to the lowest index."""
    d = tv_distance(net.points, np.asarray(pmf, dtype=float))
    return int(np.argmin(d))


def round_to_lattice(pmf, m: int) -> np.ndarray:
    """Largest-remainder rounding of ``pmf`` to denominator m."""
    p = np.asarray(pmf, dtype=float) * m
    base = np.floor(p)
    short = int(round(m - base.sum()))
    order = np.argsort(-(p - base), kind="stable")
    base[order[:short]] += 1
    return base / m


# ------------------------------------------------------ encoder decomposition


@dataclass(frozen=True, eq=False)
class Decomposition:
    mixing: np.ndarray  # mu over net points
    components: dict  # net index -> distribution over X^n (dense, row-major)

    def reassemble(self) -> np.ndarray:
        size = next(iter(self.components.values())).size
        out = np.zeros(size)
        for j, comp in self.components.items():
            out += self.mixing[j] * comp
        return out


def sequence_cells(net: SimplexNet, n: int, cap: int = ENUM_CAP) -> np.ndarray:
    """Net index of every sequence in X^n (by nearest point to its type)."""
    k = net.alphabet_size
    if k**n > cap:
        raise EnumerationTooLarge(f"|X|^n = {k}^{n} exceeds enumeration cap {cap}")
    digits = _digits(k, n)
    counts = np.stack([(digits == a).sum(axis=1) for a in range(k)], axis=1)
    uniq, inv = np.unique(counts, axis=0, return_inverse=True)
    cell_of_type = np.array([nearest_net_point(net, c / n) for c in uniq])
    return cell_of_type[inv.ravel()]


def decompose_encoder(q, net: SimplexNet, n: Optional[int] = None) -> Decomposition:
    """Split q over X^n into mu(P) q(.|A_P), A_P = sequences whose type is nearest to P."""
    q = np.asarray(q, dtype=float).ravel()
    k = net.alphabet_size
    if n is None:
        n = round(math.log(q.size, k))
    if k**n != q.size:
        raise ParamOutOfRange(f"q has {q.size} entries, expected {k}^{n}")
    cells = sequence_cells(net, n)
    mixing = np.bincount(cells, weights=q, minlength=net.size)
    comps = {}
    for j in np.flatnonzero(mixing > 0):
        comp = np.where(cells == j, q, 0.0) / mixing[j]
        comps[int(j)] = comp
    return Decomposition(mixing, comps)


def choose_p_star(encoders: Mapping) -> int:
    """Net point with the largest mixing weight averaged over all messages.

    The average of the mixings is a distribution on the net, so its largest
    entry is at least 1/|net|.
    """
    mus = np.stack([d.mixing for d in encoders.values()])
    return int(np.argmax(mus.mean(axis=0)))


def truncate_code(encoders: Mapping, p_star: int) -> dict:
    """Replace every encoder by its P* component."""
    out = {}
    for key, d in encoders.items():
        if d.mixing[p_star] <= 0:
            raise EmptyComponent(f"message {key} puts no mass on net point {p_star}")
        out[key] = d.components[p_star]
    return out


def error_inflation(lam: float, eps: float, net_size: int) -> float:
    """lambda* = |T| (lambda + 2 eps): error bound after truncating to one net point."""
    return net_size * (lam + 2.0 * eps)


def pigeonhole_filter(labels: Sequence, num_labels: Optional[int] = None) -> tuple:
    """Keep the messages sharing the most common label.

    Returns (label, surviving message indices); at least floor(N / num_labels)
    messages survive.
    """
    labels = list(labels)
    if not labels:
        raise ParamOutOfRange("no messages to filter")
    counts: dict = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    # most common, ties to the first label seen
    best = max(counts, key=lambda lab: (counts[lab], -labels.index(lab)))
    keep = [i for i, lab in enumerate(labels) if lab == best]
    total = num_labels if num_labels is not None else len(counts)
    assert len(keep) >= len(labels) // total
    return best, keep


# ------------------------------------------------------- hypergraph covering


@dataclass(frozen=True, eq=False)
class QuantumHypergraph:
    dim: int
    edges: tuple
    eta: float

    def __post_init__(self):
        edges = tuple(e if isinstance(e, HermitianOperator) else HermitianOperator(np.asarray(e)) for e in self.edges)
        if not edges:
            raise ParamOutOfRange("a hypergraph needs at least one edge")
        eye = np.eye(self.dim)
        for x, g in enumerate(edges):
            if g.dim != self.dim:
                raise ParamOutOfRange(f"edge {x} has dimension {g.dim}, expected {self.dim}")
            if not (qstate.operator_leq(np.zeros((self.dim, self.dim)), g.matrix, 1e-9)
                    and qstate.operator_leq(g.matrix, self.eta * eye, 1e-9)):
                raise ParamOutOfRange(f"edge {x} violates 0 <= G <= eta * 1")
        object.__setattr__(self, "edges", edges)

    def stack(self) -> np.ndarray:
        return np.stack([g.matrix for g in self.edges])


def random_hypergraph(dim: int, num_edges: int, eta: float, rng) -> QuantumHypergraph:
    """Edges U diag(eta * u) U^dag with Haar U and u uniform on [0, 1]^dim."""
    rng = _as_rng(rng)
    edges = []
    for _ in range(num_edges):
        u = unitary_group.rvs(dim, random_state=rng)
        w = eta * rng.random(dim)
        g = (u * w) @ u.conj().T
        edges.append(HermitianOperator(0.5 * (g + g.conj().T)))
    return QuantumHypergraph(dim, tuple(edges), eta)


def covering_bound_L(eta: float, dim: int, eps: float, tau: float) -> int:
    """ceil(1 + eta |H| 2 ln2 log2(2|H|) / (eps^2 tau))."""
    if eta <= 0 or dim < 1 or eps <= 0 or tau <= 0:
        raise ParamOutOfRange(f"need eta, eps, tau > 0 and dim >= 1; got {eta}, {dim}, {eps}, {tau}")
    return math.ceil(1.0 + eta * dim * 2.0 * math.log(2.0) * math.log2(2.0 * dim) / (eps**2 * tau))


def counting_bound_messages(L: int, alphabet_size: int, n: int) -> float:
    """log2 of |X^n|^L, the bound on the number of distinguishable messages."""
    if L < 1 or alphabet_size < 1 or n < 1:
        raise ParamOutOfRange("L, alphabet_size and n must be positive")
    return L * n * math.log2(alphabet_size)


def second_order_rate(log2_L: float, alphabet_size: int, n: int) -> float:
    """log2 log2 N' / n when N' = |X^n|^L and L = 2^log2_L."""
    return (log2_L + math.log2(n * math.log2(alphabet_size))) / n


@dataclass
class CoveringResult:
    selected: list
    pi0: np.ndarray
    pi1: np.ndarray
    rho: np.ndarray
    rho_bar: np.ndarray
    eps: float
    tau: float
    L: int
    trial: int
    achieved_trace_pi0: float
    lower_margin: float  # min eigenvalue of Pi1 rho_bar Pi1 - (1-eps) Pi1 rho Pi1
    upper_margin: float  # min eigenvalue of (1+eps) Pi1 rho Pi1 - Pi1 rho_bar Pi1
    sandwich_ok: bool

    def summary(self) -> dict:
        return {
            "selected": [int(s) for s in self.selected],
            "L": self.L,
            "trial": self.trial,
            "eps": self.eps,
            "tau": self.tau,
            "rank_pi0": int(round(np.real(np.trace(self.pi0)))),
            "rank_pi1": int(round(np.real(np.trace(self.pi1)))),
            "achieved_trace_pi0": self.achieved_trace_pi0,
            "lower_margin": self.lower_margin,
            "upper_margin": self.upper_margin,
            "sandwich_ok": self.sandwich_ok,
        }


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))


def covering_select(
    h: QuantumHypergraph,
    p=None,
    eps: float = 0.3,
    tau: float = 0.3,
    rng=0,
    trials: int = 100,
    L: Optional[int] = None,
) -> CoveringResult:
    """Random selection of L edges whose average sandwiches rho on the large-eigenvalue subspace.

    rho = sum_x p(x) G_x.  Pi0 spans eigenvectors of rho with eigenvalue below
    tau/dim, so tr(Pi0 rho) <= tau.  Each trial draws L i.i.d. edges from p
    with its own seed (spawned from ``rng``); the first trial whose average
    passes both operator inequalities on Pi1 wins.
    """
    if not (0 < eps < 1 and 0 < tau < 1):
        raise ParamOutOfRange(f"eps and tau must lie in (0, 1), got {eps}, {tau}")
    if trials < 1:
        raise ParamOutOfRange(f"trials must be >= 1, got {trials}")
    m = len(h.edges)
    p = np.full(m, 1.0 / m) if p is None else np.asarray(p, dtype=float)
    if p.shape != (m,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ParamOutOfRange("p must be a distribution over the edges")
    if L is None:
        L = min(covering_bound_L(h.eta, h.dim, eps, tau), 10 * m)
    stack = h.stack()
    rho = np.einsum("x,xij->ij", p, stack)
    w, v = np.linalg.eigh(rho)
    small = w < tau / h.dim
    pi0 = v[:, small] @ v[:, small].conj().T
    pi1 = np.eye(h.dim) - pi0
    trace_pi0 = float(np.real(np.trace(pi0 @ rho)))
    r1 = pi1 @ rho @ pi1

    if isinstance(rng, np.random.Generator):
        base = np.random.SeedSequence(int(rng.integers(2**63)))
    elif isinstance(rng, np.random.SeedSequence):
        base = rng
    else:
        base = np.random.SeedSequence(rng)
    best = None
    for t, child in enumerate(base.spawn(trials)):
        g = np.random.Generator(np.random.Philox(child))
        sel = g.choice(m, size=L, p=p)
        rho_bar = stack[sel].mean(axis=0)
        rb1 = pi1 @ rho_bar @ pi1
        lo = float(np.linalg.eigvalsh(rb1 - (1 - eps) * r1).min())
        hi = float(np.linalg.eigvalsh((1 + eps) * r1 - rb1).min())
        ok = qstate.operator_leq((1 - eps) * r1, rb1, 1e-9) and qstate.operator_leq(rb1, (1 + eps) * r1, 1e-9)
        res = CoveringResult(
            [int(s) for s in sel], pi0, pi1, rho, rho_bar, eps, tau, L, t, trace_pi0, lo, hi, bool(ok)
        )
        if ok and trace_pi0 <= tau + 1e-9:
            return res
        if best is None or min(lo, hi) > min(best.lower_margin, best.upper_margin):
            best = res
    raise NoCoveringFound(f"no covering within {trials} trials (L={L})", best=best)
