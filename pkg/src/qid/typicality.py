"""Method of types, robustly typical sets and typical projectors.

A sequence x^n is robustly delta-typical for P when every letter satisfies
``|count(a)/n - P(a)| <= delta * P(a)``; letters with P(a) = 0 may not occur.

Typical projectors are kept sparse: a boolean mask over the product basis
(row-major, first position most significant, i.e. ``np.kron`` order) plus one
local orthonormal basis per position.  Letters of equal probability are
grouped into one class before the typicality test, so the projector of a
state with a degenerate spectrum does not depend on which eigenbasis the
solver returned (the maximally mixed state gives the identity).  For
non-degenerate spectra this is the plain letter-wise definition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

from . import qstate
from .channels import CqChannel
from .entropic import as_pmf, conditional_entropy, entropy_of_eigenvalues
from .errors import EnumerationTooLarge, ParamOutOfRange, SymbolOutOfRange
from .qstate import DensityOperator

ENUM_CAP = 10**7
EIG_ZERO = 1e-12
# relative slack on the typicality boundary so exact ties such as 1/4 vs 0.5*0.5 count as typical
_BOUNDARY_EPS = 1e-12


@dataclass(frozen=True)
class TypeVector:
    counts: tuple
    n: int

    def __post_init__(self):
        if sum(self.counts) != self.n or any(c < 0 for c in self.counts):
            raise ParamOutOfRange(f"counts {self.counts} do not form a type of length {self.n}")

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


def type_of(xn: Sequence[int], alphabet_size: Optional[int] = None) -> TypeVector:
    xn = [int(x) for x in xn]
    k = alphabet_size if alphabet_size is not None else (max(xn) + 1 if xn else 1)
    counts = [0] * k
    for x in xn:
        if not 0 <= x < k:
            raise SymbolOutOfRange(f"symbol {x} outside alphabet of size {k}")
        counts[x] += 1
    return TypeVector(tuple(counts), len(xn))


def is_robustly_typical_counts(counts, p, delta: float) -> np.ndarray:
    """Vectorised membership test; ``counts`` has shape (..., |X|)."""
    counts = np.asarray(counts, dtype=float)
    p = np.asarray(p, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    dev = np.abs(counts - n * p)
    allowed = delta * n * p
    ok = dev <= allowed + _BOUNDARY_EPS * np.maximum(n, 1.0)
    ok &= (p > 0) | (counts == 0)
    return np.all(ok, axis=-1)


def is_robustly_typical(xn: Sequence[int], p, delta: float) -> bool:
    p = as_pmf(p)
    return bool(is_robustly_typical_counts(type_of(xn, len(p)).counts, p, delta))


def compositions(n: int, k: int) -> Iterator[tuple]:
    """All count vectors of length k summing to n, lexicographically descending."""
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in compositions(n - first, k - 1):
            yield (first,) + rest


def typical_types(p, n: int, delta: float) -> list[tuple]:
    p = as_pmf(p)
    return [c for c in compositions(n, len(p)) if is_robustly_typical_counts(c, p, delta)]


def _multiset_permutations(counts: Sequence[int]) -> Iterator[tuple]:
    """Sequences with the given letter counts, in lexicographic order."""
    counts = list(counts)
    n = sum(counts)
    seq = [0] * n

    def rec(pos):
        if pos == n:
            yield tuple(seq)
            return
        for a, c in enumerate(counts):
            if c:
                counts[a] -= 1
                seq[pos] = a
                yield from rec(pos + 1)
                counts[a] += 1

    yield from rec(0)


def _check_enum(k: int, n: int, cap: int) -> None:
    if k**n > cap:
        raise EnumerationTooLarge(f"|X|^n = {k}^{n} exceeds enumeration cap {cap}")


def robust_typical_set(p, n: int, delta: float, cap: int = ENUM_CAP) -> Iterator[tuple]:
    """Lazily enumerate the robustly delta-typical sequences, lexicographically."""
    p = as_pmf(p)
    _check_enum(len(p), n, cap)
    if delta < 0:
        raise ParamOutOfRange(f"delta must be >= 0, got {delta}")
    types = set(typical_types(p, n, delta))
    # lexicographic order across type classes: merge by walking types in order of
    # their sequences; cheap route is to sort each class's first element lazily
    gens = sorted(types, key=lambda c: tuple(itertools.chain.from_iterable([a] * c[a] for a in range(len(c)))))
    return _merge_sorted([_multiset_permutations(c) for c in gens])


def _merge_sorted(iters) -> Iterator[tuple]:
    import heapq

    return heapq.merge(*iters)


def multinomial(counts: Sequence[int]) -> int:
    out, rem = 1, sum(counts)
    for c in counts:
        out *= math.comb(rem, c)
        rem -= c
    return out


def type_class_probability(counts: Sequence[int], p) -> float:
    """P^n of the whole type class of ``counts``."""
    p = np.asarray(p, dtype=float)
    logp = 0.0
    for c, pa in zip(counts, p):
        if c == 0:
            continue
        if pa == 0:
            return 0.0
        logp += c * math.log(pa)
    return multinomial(counts) * math.exp(logp)


def typical_set_probability(p, n: int, delta: float) -> float:
    p = as_pmf(p)
    return float(sum(type_class_probability(c, p) for c in typical_types(p, n, delta)))


def typical_probability_bound(alphabet_size: int, n: int, delta: float) -> float:
    """The lower bound 1 - 2|X| 2^(-2 n delta^2) on P^n(T)."""
    return 1.0 - 2.0 * alphabet_size * 2.0 ** (-2.0 * n * delta**2)


def hoeffding_union_bound(p, n: int, delta: float) -> float:
    """1 - sum_a 2 exp(-2 n (delta P(a))^2): Hoeffding per letter at the robust deviation."""
    p = as_pmf(p)
    tail = sum(2.0 * math.exp(-2.0 * n * (delta * pa) ** 2) for pa in p if 0 < pa < 1)
    return 1.0 - tail


def typical_probability_check(p, n: int, delta: float, cap: int = ENUM_CAP) -> tuple[float, float]:
    """Exact P^n(T_delta^n(P)) and the bound 1 - 2|X| 2^(-2 n delta^2)."""
    p = as_pmf(p)
    _check_enum(len(p), n, cap)
    return typical_set_probability(p, n, delta), typical_probability_bound(len(p), n, delta)


def hoeffding_bound(n: int, alpha: float) -> float:
    """exp(-2 alpha^2 n)."""
    if n < 1 or alpha <= 0:
        raise ParamOutOfRange(f"need n >= 1 and alpha > 0, got n={n}, alpha={alpha}")
    return math.exp(-2.0 * alpha**2 * n)


# -------------------------------------------------------------- projectors


@lru_cache(maxsize=32)
def _digits(d: int, n: int) -> np.ndarray:
    idx = np.arange(d**n)
    powers = d ** np.arange(n - 1, -1, -1)
    out = (idx[:, None] // powers[None, :]) % d
    out = out.astype(np.int8 if d < 128 else np.int32)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LetterClasses:
    """Grouping of local basis vectors by (numerically) equal probability."""

    label: np.ndarray  # local index -> class id
    weight: np.ndarray  # class id -> total probability of the class
    value: np.ndarray  # class id -> per-vector probability


def letter_classes(probs, tol: float = EIG_ZERO) -> LetterClasses:
    probs = np.clip(np.real(np.asarray(probs, dtype=float)), 0.0, None)
    probs = np.where(probs <= tol, 0.0, probs)
    order = np.argsort(-probs, kind="stable")
    label = np.empty(len(probs), dtype=int)
    values: list[float] = []
    for i in order:
        if values and abs(probs[i] - values[-1]) <= tol:
            label[i] = len(values) - 1
        else:
            values.append(probs[i])
            label[i] = len(values) - 1
    value = np.array(values)
    weight = np.array([probs[label == c].sum() for c in range(len(values))])
    return LetterClasses(label, weight, value)


def _typical_mask_on(digits_sub: np.ndarray, classes: LetterClasses, delta: float) -> np.ndarray:
    """Mask over rows of ``digits_sub`` whose class counts are robustly typical."""
    m = digits_sub.shape[1]
    if m == 0:
        return np.ones(digits_sub.shape[0], dtype=bool)
    lab = classes.label[digits_sub]
    ncls = len(classes.weight)
    counts = np.stack([(lab == c).sum(axis=1) for c in range(ncls)], axis=1)
    return is_robustly_typical_counts(counts, classes.weight, delta)


def local_eigenbasis(rho: DensityOperator) -> tuple[np.ndarray, np.ndarray]:
    """(eigenvalues, eigenvector columns); diagonal states keep the computational basis."""
    m = rho.matrix
    if rho.is_diagonal():
        return np.real(np.diag(m)).copy(), np.eye(rho.dim, dtype=complex)
    w, v = np.linalg.eigh(m)
    return w, v


@dataclass(frozen=True, eq=False)
class TypicalProjector:
    """Projector diagonal in a product basis, stored as a membership mask."""

    bases: tuple  # one d x d unitary per position
    mask: np.ndarray  # bool over d**n product indices
    basis_labels: str = ""

    @property
    def n(self) -> int:
        return len(self.bases)

    @property
    def local_dim(self) -> int:
        return self.bases[0].shape[0] if self.bases else 1

    @property
    def dim(self) -> int:
        return self.mask.size

    @property
    def rank(self) -> int:
        return int(self.mask.sum())

    @property
    def computational(self) -> bool:
        """True when every local basis is the computational basis."""
        return all(np.allclose(b, np.eye(b.shape[0]), atol=1e-14) for b in self.bases)

    def members(self) -> Iterator[tuple]:
        digits = _digits(self.local_dim, self.n)
        for i in np.flatnonzero(self.mask):
            yield tuple(int(v) for v in digits[i])

    def basis_matrix(self, cap: Optional[int] = None) -> np.ndarray:
        qstate.check_dim(self.dim, cap)
        out = np.ones((1, 1), dtype=complex)
        for b in self.bases:
            out = np.kron(out, b)
        return out

    def to_dense(self, cap: Optional[int] = None) -> np.ndarray:
        w = self.basis_matrix(cap)
        cols = w[:, self.mask]
        return cols @ cols.conj().T


def _complete_basis(states: np.ndarray) -> np.ndarray:
    d, k = states.shape
    if k == d:
        return states
    q, _ = np.linalg.qr(np.hstack([states, np.eye(d, dtype=complex)]))
    # keep the given states and append an orthonormal complement
    comp = q[:, k:d]
    return np.hstack([states, comp])


def typical_projector(ensemble, n: int, delta: float, cap: Optional[int] = None) -> TypicalProjector:
    """Projector onto the delta-typical subspace of an orthonormal ensemble.

    ``ensemble`` is ``(p, states)`` with ``states`` a d x k matrix of
    orthonormal columns, or a :class:`DensityOperator` (its eigen-ensemble).
    """
    if isinstance(ensemble, DensityOperator):
        w, basis = local_eigenbasis(ensemble)
        label = "eigenbasis"
    else:
        p, states = ensemble
        w = np.asarray(p, dtype=float)
        states = np.asarray(states, dtype=complex)
        if states.ndim != 2 or states.shape[1] != w.size:
            raise ParamOutOfRange(f"states must be d x {w.size}, got {states.shape}")
        gram = states.conj().T @ states
        if not np.allclose(gram, np.eye(w.size), atol=1e-9):
            raise ParamOutOfRange("ensemble states are not orthonormal")
        basis = _complete_basis(states)
        w = np.concatenate([w, np.zeros(basis.shape[1] - w.size)])
        label = "ensemble basis"
    d = basis.shape[0]
    qstate.check_dim(d**n, cap)
    classes = letter_classes(w)
    mask = _typical_mask_on(_digits(d, n), classes, delta)
    mask.setflags(write=False)
    return TypicalProjector(tuple([basis] * n), mask, f"{label}^(x){n}")


def cond_typical_projector(sigma, xn: Sequence[int], delta: float, cap: Optional[int] = None) -> TypicalProjector:
    """Conditionally typical projector: per input letter a, the positions where
    x_t = a are delta-typical for the output N(a), in N(a)'s eigenbasis.

    ``sigma`` is a :class:`CqChannel` or a ``(p, channel)`` pair.
    """
    channel = sigma[1] if isinstance(sigma, tuple) else sigma
    xn = [int(x) for x in xn]
    n = len(xn)
    for x in xn:
        if not 0 <= x < channel.alphabet_size:
            raise SymbolOutOfRange(f"symbol {x} outside alphabet of size {channel.alphabet_size}")
    d = channel.dim
    qstate.check_dim(d**n, cap)
    eig = [local_eigenbasis(o) for o in channel.outputs]
    digits = _digits(d, n)
    mask = np.ones(d**n, dtype=bool)
    for a in sorted(set(xn)):
        pos = [t for t, x in enumerate(xn) if x == a]
        mask &= _typical_mask_on(digits[:, pos], letter_classes(eig[a][0]), delta)
    mask.setflags(write=False)
    bases = tuple(eig[x][1] for x in xn)
    return TypicalProjector(bases, mask, "conditional eigenbasis of N(x_t)")


# ------------------------------------------------------------ verification


def _kron_all(vectors) -> np.ndarray:
    out = np.ones(1)
    for v in vectors:
        out = np.kron(out, v)
    return out


def max_abs_log2(eigenvalues) -> float:
    w = np.real(np.asarray(eigenvalues))
    w = w[w > EIG_ZERO]
    return float(np.max(np.abs(np.log2(w)))) if w.size else 0.0


def canonical_sequence(counts: Sequence[int]) -> tuple:
    return tuple(itertools.chain.from_iterable([a] * c for a, c in enumerate(counts)))


def cond_b_hoeffding_bound(p, channel: CqChannel, xn: Sequence[int], delta: float) -> float:
    """Finite-n lower bound on tr(Pi(sigma_B) N(x^n)) from Hoeffding per class.

    Measuring N(x^n) in sigma_B's eigenbasis gives independent letters; class
    c's count has mean mu_c and must land within delta*n*w_c of n*w_c.  With
    slack t_c = delta*n*w_c - |mu_c - n*w_c| the miss probability is at most
    2 exp(-2 t_c^2 / n) (1 when the slack is not positive).
    """
    p = as_pmf(p)
    n = len(xn)
    sigma_b = channel.average_output(p)
    w, basis = local_eigenbasis(sigma_b)
    classes = letter_classes(w)
    q = np.array([np.real(np.diag(basis.conj().T @ o.matrix @ basis)) for o in channel.outputs])
    qc = np.stack([q[:, classes.label == c].sum(axis=1) for c in range(len(classes.weight))], axis=1)
    mu = qc[list(xn)].sum(axis=0)
    tail = 0.0
    for c, wc in enumerate(classes.weight):
        if wc <= 0:
            continue
        slack = delta * n * wc - abs(mu[c] - n * wc)
        tail += 1.0 if slack <= 0 else min(1.0, 2.0 * math.exp(-2.0 * slack**2 / n))
    return 1.0 - min(1.0, tail)


@dataclass
class TypicalityReport:
    n: int
    delta: float
    entropy: float
    c: float
    unit_trace: float
    sandwich_ok: bool
    rank: int
    rank_bound_log2: float
    rank_bound_ok: bool
    cond_entropy: float
    c_cond: float
    sequences_checked: int
    unit_trace_cond: Optional[float]
    sandwich_cond_ok: bool
    rank_cond: Optional[int]
    rank_cond_bound_ok: bool
    unit_trace_cond_b: Optional[float]
    cond_b_bound: Optional[float]
    cond_b_ok: bool
    gentle_norm: Optional[float]
    gentle_bound: Optional[float]
    gentle_ok: bool
    gentle_vs_cond_ok: bool
    fitted_constants: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return all(
            (self.sandwich_ok, self.rank_bound_ok, self.sandwich_cond_ok,
             self.rank_cond_bound_ok, self.cond_b_ok, self.gentle_ok, self.gentle_vs_cond_ok)
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_ok"] = self.all_ok
        return d


def verify_typicality(
    p,
    channel: CqChannel,
    n: int,
    delta: float,
    sequences: Optional[Sequence[Sequence[int]]] = None,
    tol: float = 1e-9,
    cap: Optional[int] = None,
) -> TypicalityReport:
    """Evaluate every typical-projector inequality exactly at block length n.

    The unconditional checks use sigma_B = sum_x p(x) N(x).  The conditional
    ones run over ``sequences`` (default: one representative per robustly
    typical type of p, which covers all typical x^n by permutation symmetry)
    and report the worst case.

    ``gentle_ok`` is the gentle operator lemma proper, 2 sqrt(1 - tr(Pi_B N(x^n)));
    ``gentle_vs_cond_ok`` compares the same norm with 2 sqrt(1 - tr(Pi_cond N(x^n))).

    Constants: c = max |log2 lambda| over sigma_B's nonzero eigenvalues;
    c' = max_a max |log2 lambda(N(a))| + H(B|X), the smallest choice of this
    form for which the conditional sandwich provably holds at every n.
    """
    if delta <= 0:
        raise ParamOutOfRange(f"delta must be > 0, got {delta}")
    p = as_pmf(p)
    d = channel.dim
    qstate.check_dim(d**n, cap)
    sigma_b = channel.average_output(p)

    # unconditional: everything is diagonal in sigma_B's product eigenbasis
    w, basis = local_eigenbasis(sigma_b)
    classes = letter_classes(w)
    mask = _typical_mask_on(_digits(d, n), classes, delta)
    eig_n = _kron_all([np.clip(w, 0, None)] * n)
    h = entropy_of_eigenvalues(w)
    c = max_abs_log2(w)
    unit_trace = float(eig_n[mask].sum())
    inner = np.where(mask, eig_n, 0.0)
    lower = 2.0 ** (-n * (h + c * delta)) * mask
    upper = 2.0 ** (-n * (h - c * delta)) * mask
    sandwich_ok = qstate.operator_leq(lower, inner, tol) and qstate.operator_leq(inner, upper, tol)
    rank = int(mask.sum())
    rank_bound_log2 = n * (h + c * delta)
    rank_bound_ok = rank == 0 or math.log2(rank) <= rank_bound_log2 + 1e-12

    # conditional
    h_cond = conditional_entropy(p, channel)
    eigs = [local_eigenbasis(o) for o in channel.outputs]
    support = [a for a in range(channel.alphabet_size) if p[a] > 0]
    c_cond = max((max_abs_log2(eigs[a][0]) for a in support), default=0.0) + h_cond
    if sequences is None:
        sequences = [canonical_sequence(t) for t in typical_types(p, n, delta)]
    commuting = all(_diagonal_in(basis, o.matrix) for o in channel.outputs)
    q_local = [np.real(np.diag(basis.conj().T @ o.matrix @ basis)) for o in channel.outputs]

    traces, traces_b, bounds_b, gentles, gentle_bounds, ranks = [], [], [], [], [], []
    sand_c = rank_c = gentle_vs_cond = True
    for xn in sequences:
        xn = tuple(int(x) for x in xn)
        proj = cond_typical_projector(channel, xn, delta, cap)
        ev = _kron_all([np.clip(eigs[x][0], 0, None) for x in xn])
        tr_c = float(ev[proj.mask].sum())
        traces.append(tr_c)
        inner_c = np.where(proj.mask, ev, 0.0)
        lo = 2.0 ** (-n * (h_cond + c_cond * delta)) * proj.mask
        hi = 2.0 ** (-n * (h_cond - c_cond * delta)) * proj.mask
        sand_c &= qstate.operator_leq(lo, inner_c, tol) and qstate.operator_leq(inner_c, hi, tol)
        ranks.append(proj.rank)
        rank_c &= proj.rank == 0 or math.log2(proj.rank) <= n * (h_cond + c_cond * delta) + 1e-12

        probs_b = _kron_all([q_local[x] for x in xn])
        tr_b = float(probs_b[mask].sum())
        traces_b.append(tr_b)
        bounds_b.append(cond_b_hoeffding_bound(p, channel, xn, delta))
        if commuting:
            gn = max(0.0, 1.0 - tr_b)
        else:
            pi_b = TypicalProjector(tuple([basis] * n), mask).to_dense(cap)
            state = qstate.tensor_power([channel.outputs[x] for x in xn], cap).matrix
            gn = qstate.trace_norm(state - pi_b @ state @ pi_b)
        gentles.append(gn)
        gentle_bounds.append(2.0 * math.sqrt(max(0.0, 1.0 - tr_b)))
        gentle_vs_cond &= gn <= 2.0 * math.sqrt(max(0.0, 1.0 - tr_c)) + tol

    checked = len(traces)
    return TypicalityReport(
        n=n,
        delta=delta,
        entropy=h,
        c=c,
        unit_trace=unit_trace,
        sandwich_ok=bool(sandwich_ok),
        rank=rank,
        rank_bound_log2=rank_bound_log2,
        rank_bound_ok=bool(rank_bound_ok),
        cond_entropy=h_cond,
        c_cond=c_cond,
        sequences_checked=checked,
        unit_trace_cond=min(traces) if checked else None,
        sandwich_cond_ok=bool(sand_c),
        rank_cond=max(ranks) if checked else None,
        rank_cond_bound_ok=bool(rank_c),
        unit_trace_cond_b=min(traces_b) if checked else None,
        cond_b_bound=min(bounds_b) if checked else None,
        cond_b_ok=all(t >= b - tol for t, b in zip(traces_b, bounds_b)),
        gentle_norm=max(gentles) if checked else None,
        gentle_bound=min(gentle_bounds) if checked else None,
        gentle_ok=all(g <= b + tol for g, b in zip(gentles, gentle_bounds)),
        gentle_vs_cond_ok=bool(gentle_vs_cond),
    )


def _diagonal_in(basis: np.ndarray, m: np.ndarray) -> bool:
    t = basis.conj().T @ m @ basis
    return bool(np.all(np.abs(t - np.diag(np.diag(t))) <= 1e-12))


@dataclass
class TypicalitySweep:
    reports: list
    unit_trace_monotone: bool
    unit_trace_cond_monotone: bool
    fitted_b: Optional[float]
    fitted_b_cond: Optional[float]

    def to_dict(self) -> dict:
        return {
            "reports": [r.to_dict() for r in self.reports],
            "unit_trace_monotone": self.unit_trace_monotone,
            "unit_trace_cond_monotone": self.unit_trace_cond_monotone,
            "fitted_b": self.fitted_b,
            "fitted_b_cond": self.fitted_b_cond,
        }


def fit_exponent(ns, traces, delta: float) -> Optional[float]:
    """Least-squares b in 1 - trace ~ 2^(-b delta n), fit through the origin.

    Points with trace 1 carry no information and points with trace 0 sit at
    the trivial end (log2(1 - 0) = 0); both are kept as is.
    """
    xs, ys = [], []
    for n, t in zip(ns, traces):
        if t is None or t >= 1.0:
            continue
        xs.append(delta * n)
        ys.append(-math.log2(1.0 - t))
    if not xs:
        return None
    xs, ys = np.array(xs), np.array(ys)
    return float(xs @ ys / (xs @ xs))


def _non_decreasing(vals) -> bool:
    vals = [v for v in vals if v is not None]
    return all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def typicality_sweep(p, channel: CqChannel, ns: Sequence[int], delta: float, **kw) -> TypicalitySweep:
    reports = [verify_typicality(p, channel, n, delta, **kw) for n in ns]
    b = fit_exponent(ns, [r.unit_trace for r in reports], delta)
    b_cond = fit_exponent(ns, [r.unit_trace_cond for r in reports], delta)
    for r in reports:
        r.fitted_constants = {"b": b, "b_prime": b_cond, "c": r.c, "c_prime": r.c_cond}
    return TypicalitySweep(
        reports=reports,
        unit_trace_monotone=_non_decreasing([r.unit_trace for r in reports]),
        unit_trace_cond_monotone=_non_decreasing([r.unit_trace_cond for r in reports]),
        fitted_b=b,
        fitted_b_cond=b_cond,
    )
