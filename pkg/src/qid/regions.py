"""Identification capacity regions.

For a cq broadcast channel the ID region is the union, over input
distributions P, of rectangles [0, I(P; B1)] x [0, I(P; B2)].  A union of
rectangles is described exactly by the Pareto staircase of its corners, so a
sampled region is just the Pareto filter of the corners at the sampled P.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Optional

import numpy as np

from .channels import CqBroadcastChannel, CqChannel, marginal
from .entropic import InputDistribution, holevo_batch, output_entropies, thermal_entropy_g
from .errors import AlphabetTooLarge, ParamOutOfRange

ALPHABET_CAP = 16
LATTICE_CAP = 2_000_000


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float
    achiever: Optional[tuple] = None

    def __post_init__(self):
        # clip round-off below zero; anything else negative is a caller bug
        for name in ("r1", "r2"):
            v = float(getattr(self, name))
            if v < -1e-9:
                raise ParamOutOfRange(f"{name} = {v} is negative")
            object.__setattr__(self, name, max(v, 0.0))


@dataclass(frozen=True)
class RateRegion:
    frontier: tuple
    kind: str  # "exact_closed_form" | "grid_approximation"
    grid_resolution: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = tuple(self.frontier)
        for a, b in zip(pts, pts[1:]):
            if not (b.r1 > a.r1 and b.r2 <= a.r2):
                raise ValueError("frontier must be a staircase: r1 increasing, r2 non-increasing")
        object.__setattr__(self, "frontier", pts)

    def contains(self, r1: float, r2: float, tol: float = 1e-9) -> bool:
        return any(r1 <= p.r1 + tol and r2 <= p.r2 + tol for p in self.frontier)

    def max_r1(self) -> float:
        return max(p.r1 for p in self.frontier)

    def max_r2(self) -> float:
        return max(p.r2 for p in self.frontier)

    def to_csv(self, fh=None) -> str:
        """Write ``r1_bits,r2_bits,achieving_pmf`` rows (9 significant digits)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r1_bits", "r2_bits", "achieving_pmf"])
        for p in self.frontier:
            ach = "" if p.achiever is None else ";".join(f"{v:.9g}" for v in p.achiever)
            w.writerow([f"{p.r1:.9g}", f"{p.r2:.9g}", ach])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def pareto_frontier(points: Iterable[RatePoint]) -> tuple:
    """Upper-right Pareto filter; exact duplicates keep the earliest point."""
    indexed = list(enumerate(points))
    indexed.sort(key=lambda t: (-t[1].r1, -t[1].r2, t[0]))
    kept = []
    best_r2 = -np.inf
    for _, p in indexed:
        if p.r2 > best_r2:
            kept.append(p)
            best_r2 = p.r2
    return tuple(reversed(kept))


# ------------------------------------------------------------------ lattice


def simplex_lattice(k: int, m: int) -> np.ndarray:
    """All pmfs on k symbols with denominator m, in lexicographic order of counts."""
    if k < 1 or m < 1:
        raise ParamOutOfRange(f"need k >= 1 and m >= 1, got k={k}, m={m}")
    size = comb(m + k - 1, k - 1)
    if size > LATTICE_CAP:
        raise AlphabetTooLarge(f"lattice with |X|={k}, resolution {m} has {size} points (cap {LATTICE_CAP})")
    rows = []
    for bars in itertools.combinations(range(m + k - 1), k - 1):
        edges = (-1,) + bars + (m + k - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    counts = np.array(rows, dtype=float)
    # reversed so the lattice starts at the point mass on symbol 0
    return counts[::-1] / m


def _check_alphabet(k: int, cap: int) -> None:
    if k > cap:
        raise AlphabetTooLarge(f"alphabet size {k} exceeds cap {cap}")


def _degenerate(channel) -> bool:
    first = channel.outputs[0].matrix
    return all(np.allclose(o.matrix, first, atol=1e-12) for o in channel.outputs[1:])


def id_region_cq(channel: CqBroadcastChannel, grid: int, alphabet_cap: int = ALPHABET_CAP) -> RateRegion:
    """Grid approximation of the ID capacity region of a cq broadcast channel."""
    if grid < 2:
        raise ParamOutOfRange(f"grid must be >= 2, got {grid}")
    k = channel.alphabet_size
    _check_alphabet(k, alphabet_cap)
    if _degenerate(channel):
        return RateRegion((RatePoint(0.0, 0.0, tuple(np.full(k, 1.0 / k))),), "grid_approximation", grid)
    lattice = simplex_lattice(k, grid)
    m1, m2 = marginal(channel, 1), marginal(channel, 2)
    i1 = _holevo_chunked(lattice, m1)
    i2 = _holevo_chunked(lattice, m2)
    pts = [RatePoint(a, b, tuple(p)) for a, b, p in zip(i1, i2, lattice)]
    return RateRegion(pareto_frontier(pts), "grid_approximation", grid)


def _holevo_chunked(lattice: np.ndarray, ch: CqChannel, chunk: int = 4096) -> np.ndarray:
    h = output_entropies(ch)
    return np.concatenate(
        [holevo_batch(lattice[s : s + chunk], ch, h) for s in range(0, len(lattice), chunk)]
    )


def single_user_id_capacity(
    channel: CqChannel,
    grid: int = 64,
    alphabet_cap: int = ALPHABET_CAP,
    iterations: int = 50,
    tol: float = 1e-9,
) -> tuple[float, InputDistribution]:
    """max_P I(X;B): best lattice point, then pairwise-transfer coordinate ascent.

    The ascent moves ``step`` mass between two symbols when that raises the
    Holevo information, halving ``step`` whenever no move helps.  Holevo
    information is concave in P, so this converges to the global maximum.
    """
    if grid < 1:
        raise ParamOutOfRange(f"grid must be >= 1, got {grid}")
    k = channel.alphabet_size
    _check_alphabet(k, alphabet_cap)
    lattice = simplex_lattice(k, grid)
    vals = _holevo_chunked(lattice, channel)
    best = int(np.argmax(vals))
    p, val = lattice[best].copy(), float(vals[best])
    h = output_entropies(channel)
    step = 1.0 / grid
    pairs = [(i, j) for i in range(k) for j in range(k) if i != j]
    for _ in range(iterations):
        if step < tol or not pairs:
            break
        cands = []
        for i, j in pairs:
            s = min(step, p[j])
            if s <= 0:
                continue
            q = p.copy()
            q[i] += s
            q[j] -= s
            cands.append(q)
        if not cands:
            step /= 2
            continue
        cands = np.array(cands)
        cv = holevo_batch(cands, channel, h)
        c = int(np.argmax(cv))
        if cv[c] > val + 1e-15:
            p, val = cands[c], float(cv[c])
        else:
            step /= 2
    p = np.clip(p, 0.0, None)
    return val, InputDistribution(p / p.sum())


def rectangular_upper_bound(channel: CqBroadcastChannel, grid: int = 64) -> RatePoint:
    c1, p1 = single_user_id_capacity(marginal(channel, 1), grid)
    c2, p2 = single_user_id_capacity(marginal(channel, 2), grid)
    return RatePoint(c1, c2)


def is_rectangular(channel: CqBroadcastChannel, grid: int = 64, tol: float = 1e-3) -> bool:
    """Does one input distribution reach both single-user capacities (within tol)?"""
    bound = rectangular_upper_bound(channel, grid)
    region = id_region_cq(channel, grid)
    return any(p.r1 >= bound.r1 - tol and p.r2 >= bound.r2 - tol for p in region.frontier)


# ------------------------------------------------------------- closed forms


def erasure_region(lam: float) -> RateRegion:
    if not 0.0 <= lam <= 1.0:
        raise ParamOutOfRange(f"erasure parameter must lie in [0, 1], got {lam}")
    return RateRegion((RatePoint(1.0 - lam, lam, (0.5, 0.5)),), "exact_closed_form")


def _check_bosonic(n_a: float, eta: float) -> None:
    if n_a < 0:
        raise ParamOutOfRange(f"mean photon number must be >= 0, got {n_a}")
    if not 0.0 <= eta <= 1.0:
        raise ParamOutOfRange(f"transmissivity must lie in [0, 1], got {eta}")


def bosonic_id_region(n_a: float, eta: float) -> RateRegion:
    """Rectangle R1 <= g(eta N_A), R2 <= g((1-eta) N_A) of the pure-loss channel."""
    _check_bosonic(n_a, eta)
    corner = RatePoint(thermal_entropy_g(eta * n_a), thermal_entropy_g((1 - eta) * n_a))
    return RateRegion((corner,), "exact_closed_form")


def bosonic_transmission_point(n_a: float, eta: float, beta: float) -> RatePoint:
    """Corner of the superposition-coding rectangle at power split ``beta``."""
    _check_bosonic(n_a, eta)
    if not 0.0 <= beta <= 1.0:
        raise ParamOutOfRange(f"beta must lie in [0, 1], got {beta}")
    g = thermal_entropy_g
    r1 = g(eta * beta * n_a)
    r2 = g((1 - eta) * n_a) - g((1 - eta) * beta * n_a)
    return RatePoint(r1, r2, (beta, 1.0 - beta))


def bosonic_transmission_region(n_a: float, eta: float, beta_grid: int = 101) -> RateRegion:
    """Transmission region traced over ``beta_grid`` evenly spaced power splits."""
    if beta_grid < 2:
        raise ParamOutOfRange(f"beta_grid must be >= 2, got {beta_grid}")
    _check_bosonic(n_a, eta)
    pts = [bosonic_transmission_point(n_a, eta, b) for b in np.linspace(0.0, 1.0, beta_grid)]
    return RateRegion(pareto_frontier(pts), "grid_approximation", beta_grid)
