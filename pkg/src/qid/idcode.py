"""Pool-selection identification codes and their exact error probabilities.

Pool indices and messages are 0-based; the empty-bin fallback codeword is
pool index 0.  A receiver interested in message i' measures the binary POVMs
{1 - D_v, D_v}, D_v = Pi Pi^{F(v)} Pi, for v in its bin in ascending order
and says "yes" at the first yes outcome.  The no-branch Kraus operator is
sqrt(1 - D_v).

For a bin v_1 < ... < v_m write M_j = K_{v_j} ... K_{v_1}.  Then

    P(all no | rho)    = tr(E rho),  E = M_m^dag M_m
    P(first yes | rho) = tr(Y rho),  Y = sum_j M_{j-1}^dag D_{v_j} M_{j-1}

and E + Y = 1.  Both effects are computed independently so the binary
completeness identity is a real numerical check.  When every channel output
is diagonal all of this collapses to elementwise products of vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import qstate
from .channels import CqBroadcastChannel, CqChannel, marginal
from .entropic import as_pmf
from .errors import (
    BudgetExceeded,
    DimensionOverflow,
    InfeasibleParams,
    InfeasibleRates,
    MessageOutOfRange,
    ParamOutOfRange,
    SameMessage,
    TypicalSetEmpty,
)
from .qstate import HermitianOperator
from .typicality import (
    _digits,
    _typical_mask_on,
    is_robustly_typical_counts,
    letter_classes,
    local_eigenbasis,
    typical_types,
)

RETRY_CAP = 10**6
POOL_CAP = 10**6
DENSE_CAP = 1024
EVAL_BUDGET = 2 * 10**9


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int, a sequence or a SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def count_from_rate(n: int, rate: float) -> int:
    # the epsilon keeps exact powers of two from rounding up
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


@dataclass(frozen=True)
class CodeParams:
    n: int
    N: int
    rate_tilde: float
    rate_pool: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ParamOutOfRange(f"block length must be >= 1, got {self.n}")
        if self.N < 1:
            raise ParamOutOfRange(f"need at least one message, got N={self.N}")
        if self.delta <= 0:
            raise ParamOutOfRange(f"delta must be > 0, got {self.delta}")
        if self.rate_tilde < 0 or self.rate_pool < 0:
            raise ParamOutOfRange("rates must be non-negative")
        if self.rate_tilde > self.rate_pool + 1e-12:
            raise InfeasibleParams(
                f"rate_tilde {self.rate_tilde} exceeds rate_pool {self.rate_pool}"
            )

    @property
    def pool_size(self) -> int:
        return count_from_rate(self.n, self.rate_pool)

    @property
    def bin_prob(self) -> float:
        return min(1.0, 2.0 ** (-self.n * (self.rate_pool - self.rate_tilde)))


# ---------------------------------------------------------------- sampling


def sample_typical_codewords(p, n: int, delta: float, count: int, rng) -> np.ndarray:
    """``count`` i.i.d. draws from P^n conditioned on the robustly typical set.

    Plain rejection sampling in batches; raises if some codeword needs more
    than RETRY_CAP draws.
    """
    p = as_pmf(p)
    if not typical_types(p, n, delta):
        raise TypicalSetEmpty(f"no robustly {delta}-typical sequences of length {n}")
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    k = p.size
    out = np.empty((count, n), dtype=np.int64)
    filled = 0
    since_accept = 0
    while filled < count:
        batch = max(256, 2 * (count - filled))
        draws = np.searchsorted(cdf, rng.random((batch, n)), side="right")
        draws = np.minimum(draws, k - 1)
        counts = np.stack([(draws == a).sum(axis=1) for a in range(k)], axis=1)
        ok = np.flatnonzero(is_robustly_typical_counts(counts, p, delta))
        if ok.size == 0:
            since_accept += batch
            if since_accept > RETRY_CAP:
                raise InfeasibleParams(f"rejection sampling exceeded {RETRY_CAP} draws for one codeword")
            continue
        gaps = np.diff(np.concatenate([[-1], ok])) - 1
        if since_accept + gaps[0] > RETRY_CAP or np.any(gaps[1:] > RETRY_CAP):
            raise InfeasibleParams(f"rejection sampling exceeded {RETRY_CAP} draws for one codeword")
        take = ok[: count - filled]
        out[filled : filled + take.size] = draws[take]
        filled += take.size
        since_accept = batch - 1 - ok[-1]
    return out


@dataclass(frozen=True, eq=False)
class BinFamily:
    """Random subsets of a pool: bin i holds each index independently with prob q."""

    pool_size: int
    q: float
    bins: tuple
    n: Optional[int] = None
    rate_tilde: Optional[float] = None
    rate_pool: Optional[float] = None

    @property
    def N(self) -> int:
        return len(self.bins)


def sample_bins(pool_size: int, N: int, q: float, rng) -> tuple:
    if not 0.0 <= q <= 1.0:
        raise ParamOutOfRange(f"bin probability must lie in [0, 1], got {q}")
    member = rng.random((N, pool_size)) < q
    return tuple(np.flatnonzero(row) for row in member)


# ------------------------------------------------------------------- codes


@dataclass(frozen=True, eq=False)
class SingleUserPoolCode:
    params: CodeParams
    pmf: np.ndarray
    codewords: np.ndarray  # (pool_size, n) symbols
    bins: tuple  # message -> sorted pool indices
    fallback: int = 0

    @property
    def pool_size(self) -> int:
        return self.codewords.shape[0]

    @property
    def bin_family(self) -> BinFamily:
        p = self.params
        return BinFamily(self.pool_size, p.bin_prob, self.bins, p.n, p.rate_tilde, p.rate_pool)


def _check_pool(size: int) -> None:
    if size > POOL_CAP:
        raise InfeasibleParams(f"pool size {size} exceeds cap {POOL_CAP}")


def build_single_user_code(p, params: CodeParams, rng=None) -> SingleUserPoolCode:
    rng = make_rng(params.seed if rng is None else rng)
    pmf = as_pmf(p)
    size = params.pool_size
    _check_pool(size)
    words = sample_typical_codewords(pmf, params.n, params.delta, size, rng)
    bins = sample_bins(size, params.N, params.bin_prob, rng)
    return SingleUserPoolCode(params, pmf, words, bins)


def _check_message(i: int, N: int) -> None:
    if not 0 <= int(i) < N:
        raise MessageOutOfRange(f"message {i} outside 0..{N - 1}")


def encode_distribution(code: SingleUserPoolCode, i: int) -> np.ndarray:
    """Uniform over bin i; point mass on the fallback index when the bin is empty."""
    _check_message(i, len(code.bins))
    q = np.zeros(code.pool_size)
    b = code.bins[i]
    if b.size:
        q[b] = 1.0 / b.size
    else:
        q[code.fallback] = 1.0
    return q


@dataclass(frozen=True, eq=False)
class BroadcastPoolCode:
    params1: CodeParams
    params2: CodeParams
    pmf: np.ndarray
    codewords: np.ndarray
    bins1: tuple
    bins2: tuple
    common_index: np.ndarray  # (N1, N2) pool indices
    pool_delta: float

    @property
    def pool_size(self) -> int:
        return self.codewords.shape[0]

    def params(self, k: int) -> CodeParams:
        return self.params1 if k == 1 else self.params2

    def bins(self, k: int) -> tuple:
        return self.bins1 if k == 1 else self.bins2

    def single_user(self, k: int) -> SingleUserPoolCode:
        """Receiver k's single-user code: the shared pool with its own bins."""
        if k not in (1, 2):
            raise ValueError(f"receiver must be 1 or 2, got {k}")
        return SingleUserPoolCode(self.params(k), self.pmf, self.codewords, self.bins(k))


def check_broadcast_rates(rate1: float, rate2: float, rate_pool: float, strict: bool = True) -> None:
    if strict:
        if not (max(rate1, rate2) < rate_pool < rate1 + rate2):
            raise InfeasibleRates(
                f"need max(R1~, R2~) < R_pool < R1~ + R2~; got R1~={rate1}, R2~={rate2}, R_pool={rate_pool}"
            )
    elif max(rate1, rate2) > rate_pool + 1e-12:
        raise InfeasibleRates(f"R_pool={rate_pool} is below max(R1~, R2~)={max(rate1, rate2)}")


def build_broadcast_code(
    p,
    params1: CodeParams,
    params2: CodeParams,
    rate_pool: float,
    n: int,
    delta: float,
    rng=None,
    strict: bool = True,
) -> BroadcastPoolCode:
    """Shared pool, independent bin families and a common index per message pair.

    ``delta`` is the pool typicality parameter; each receiver decodes with its
    own ``params_k.delta``.  ``strict=False`` relaxes the rate constraints to
    R_k~ <= R_pool, which allows bin probability 1.
    """
    for prm in (params1, params2):
        if prm.n != n:
            raise ParamOutOfRange(f"params block length {prm.n} != {n}")
        if abs(prm.rate_pool - rate_pool) > 1e-12:
            raise ParamOutOfRange("params rate_pool must match the shared pool rate")
    check_broadcast_rates(params1.rate_tilde, params2.rate_tilde, rate_pool, strict)
    rng = make_rng(params1.seed if rng is None else rng)
    pmf = as_pmf(p)
    size = count_from_rate(n, rate_pool)
    _check_pool(size)
    words = sample_typical_codewords(pmf, n, delta, size, rng)
    bins1 = sample_bins(size, params1.N, params1.bin_prob, rng)
    bins2 = sample_bins(size, params2.N, params2.bin_prob, rng)
    common = np.empty((params1.N, params2.N), dtype=np.int64)
    for i1, b1 in enumerate(bins1):
        for i2, b2 in enumerate(bins2):
            both = np.intersect1d(b1, b2, assume_unique=True)
            if both.size:
                common[i1, i2] = both[rng.integers(both.size)]
            else:
                common[i1, i2] = rng.integers(size)
    return BroadcastPoolCode(params1, params2, pmf, words, bins1, bins2, common, delta)


# ---------------------------------------------------------------- decoders


class PoolDecoder:
    """Typical-projector decoders D_v for one receiver's channel.

    Diagonal mode (every output diagonal): operators are 1-D arrays over the
    computational product basis.  Dense mode materialises d^n x d^n matrices
    up to ``cap``.
    """

    def __init__(self, channel: CqChannel, p, n: int, delta: float, cap: int = DENSE_CAP):
        self.channel = channel
        self.pmf = as_pmf(p)
        self.n = n
        self.delta = delta
        self.d = channel.dim
        self.dim = self.d**n
        self.diagonal = channel.is_diagonal()
        if self.diagonal:
            qstate.check_dim(self.dim, qstate.DIM_CAP)
        else:
            qstate.check_dim(self.dim, cap)
        sigma = channel.average_output(self.pmf)
        w, basis = local_eigenbasis(sigma)
        self._digits = _digits(self.d, n)
        self.pi_mask = _typical_mask_on(self._digits, letter_classes(w), delta)
        self._eig = [local_eigenbasis(o) for o in channel.outputs]
        self._out_classes = [letter_classes(e[0]) for e in self._eig]
        if not self.diagonal:
            self._basis = basis
            self._pi = _dense_projector([basis] * n, self.pi_mask)

    def cond_mask(self, xn: Sequence[int]) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        xn = np.asarray(xn)
        for a in np.unique(xn):
            pos = np.flatnonzero(xn == a)
            mask &= _typical_mask_on(self._digits[:, pos], self._out_classes[a], self.delta)
        return mask

    def yes_operator(self, xn: Sequence[int]) -> np.ndarray:
        """D for codeword ``xn``: a 0/1 vector (diagonal mode) or a dense matrix."""
        if self.diagonal:
            return (self.pi_mask & self.cond_mask(xn)).astype(float)
        cond = _dense_projector([self._eig[x][1] for x in xn], self.cond_mask(xn))
        d = self._pi @ cond @ self._pi
        return 0.5 * (d + d.conj().T)

    def state(self, xn: Sequence[int]) -> np.ndarray:
        if self.diagonal:
            out = np.ones(1)
            for x in xn:
                out = np.kron(out, np.real(np.diag(self.channel.outputs[x].matrix)))
            return out
        return qstate.tensor_power([self.channel.outputs[x] for x in xn], self.dim).matrix

    def bin_effects(self, codewords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(E, Y): the all-no effect and the first-yes effect of a sequential bin test."""
        if self.diagonal:
            e = np.ones(self.dim)
            y = np.zeros(self.dim)
            for xn in codewords:
                dv = self.yes_operator(xn)
                y += e * dv
                e = e * (1.0 - dv)
            return e, y
        m = np.eye(self.dim, dtype=complex)
        y = np.zeros((self.dim, self.dim), dtype=complex)
        for xn in codewords:
            dv = self.yes_operator(xn)
            y += m.conj().T @ dv @ m
            m = _sqrt_complement(dv) @ m
        return m.conj().T @ m, y

    def expectations(self, effect: np.ndarray, states: np.ndarray) -> np.ndarray:
        """tr(effect rho) for a stack of states."""
        if self.diagonal:
            return states @ effect
        return np.real(np.einsum("ij,kji->k", effect, states))


def _dense_projector(bases, mask: np.ndarray) -> np.ndarray:
    w = np.ones((1, 1), dtype=complex)
    for b in bases:
        w = np.kron(w, b)
    cols = w[:, mask]
    return cols @ cols.conj().T


def _sqrt_complement(d: np.ndarray) -> np.ndarray:
    """sqrt(1 - D) for Hermitian 0 <= D <= 1."""
    w, v = np.linalg.eigh(d)
    s = np.sqrt(np.clip(1.0 - w, 0.0, 1.0))
    return (v * s) @ v.conj().T


def decoder_yes_operator(code: SingleUserPoolCode, channel: CqChannel, v: int, cap: int = DENSE_CAP) -> HermitianOperator:
    if not 0 <= v < code.pool_size:
        raise MessageOutOfRange(f"pool index {v} outside 0..{code.pool_size - 1}")
    dim = channel.dim**code.params.n
    if dim > cap:
        raise DimensionOverflow(f"dense D_v needs dimension {dim} > cap {cap}")
    dec = PoolDecoder(channel, code.pmf, code.params.n, code.params.delta, cap)
    op = dec.yes_operator(code.codewords[v])
    return HermitianOperator(np.diag(op).astype(complex) if op.ndim == 1 else op)


# ----------------------------------------------------------- error reports


@dataclass
class ErrorReport:
    missed_id: dict  # message -> probability
    false_id: dict  # (i_prime, i) -> probability
    completeness_residual: float = 0.0

    @property
    def max_missed(self) -> float:
        return max(self.missed_id.values(), default=0.0)

    @property
    def max_false(self) -> float:
        return max(self.false_id.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "missed_id": {str(i): v for i, v in self.missed_id.items()},
            "false_id": [[ip, i, v] for (ip, i), v in self.false_id.items()],
            "max_missed": self.max_missed,
            "max_false": self.max_false,
            "completeness_residual": self.completeness_residual,
        }


@dataclass
class _Tables:
    no: np.ndarray  # (N, len(vs)) all-no probabilities of bin i' on F(v)
    yes: np.ndarray
    col: dict  # pool index -> column


def _bin_tables(dec: PoolDecoder, codewords: np.ndarray, bins: Sequence[np.ndarray], vs, budget: int) -> _Tables:
    vs = sorted(set(int(v) for v in vs))
    per_state = dec.dim if dec.diagonal else dec.dim**2
    work = (sum(b.size for b in bins) + len(bins) * len(vs)) * per_state * (1 if dec.diagonal else dec.dim)
    if work > budget:
        raise BudgetExceeded(f"evaluation needs ~{work:.3g} operations, budget {budget:.3g}")
    states = np.stack([dec.state(codewords[v]) for v in vs])
    no = np.empty((len(bins), len(vs)))
    yes = np.empty((len(bins), len(vs)))
    for i, b in enumerate(bins):
        e, y = dec.bin_effects(codewords[b])
        no[i] = dec.expectations(e, states)
        yes[i] = dec.expectations(y, states)
    return _Tables(np.clip(no, 0.0, 1.0), np.clip(yes, 0.0, 1.0), {v: c for c, v in enumerate(vs)})


def _residual(t: _Tables, cols=None) -> float:
    if cols is None:
        s = t.no + t.yes
    else:
        s = t.no[:, cols] + t.yes[:, cols]
    return float(np.max(np.abs(s - 1.0))) if s.size else 0.0


def _single_user_from_tables(code: SingleUserPoolCode, t: _Tables) -> ErrorReport:
    N = len(code.bins)
    missed, false = {}, {}
    qs = [encode_distribution(code, i) for i in range(N)]
    for i in range(N):
        support = np.flatnonzero(qs[i])
        cols = [t.col[int(v)] for v in support]
        w = qs[i][support]
        missed[i] = float(t.no[i, cols] @ w)
        for ip in range(N):
            if ip != i:
                false[(ip, i)] = float(t.yes[ip, cols] @ w)
    return ErrorReport(missed, false, _residual(t))


def _needed_indices(code: SingleUserPoolCode) -> set:
    vs = {code.fallback}
    for b in code.bins:
        vs.update(int(v) for v in b)
    return vs


def single_user_errors(code: SingleUserPoolCode, channel: CqChannel, cap: int = DENSE_CAP, budget: int = EVAL_BUDGET) -> ErrorReport:
    """Exact missed-ID and false-ID probabilities of every message (pair)."""
    dec = PoolDecoder(channel, code.pmf, code.params.n, code.params.delta, cap)
    t = _bin_tables(dec, code.codewords, code.bins, _needed_indices(code), budget)
    return _single_user_from_tables(code, t)


def missed_id_probability(code: SingleUserPoolCode, channel: CqChannel, i: int, cap: int = DENSE_CAP) -> float:
    _check_message(i, len(code.bins))
    dec = PoolDecoder(channel, code.pmf, code.params.n, code.params.delta, cap)
    q = encode_distribution(code, i)
    support = np.flatnonzero(q)
    t = _bin_tables(dec, code.codewords, [code.bins[i]], support, EVAL_BUDGET)
    return float(t.no[0, [t.col[int(v)] for v in support]] @ q[support])


def sequential_yes_probability(code: SingleUserPoolCode, channel: CqChannel, i_prime: int, i: int, cap: int = DENSE_CAP) -> float:
    """P(some yes while testing bin i_prime | message i sent); i_prime == i allowed."""
    _check_message(i_prime, len(code.bins))
    _check_message(i, len(code.bins))
    dec = PoolDecoder(channel, code.pmf, code.params.n, code.params.delta, cap)
    q = encode_distribution(code, i)
    support = np.flatnonzero(q)
    t = _bin_tables(dec, code.codewords, [code.bins[i_prime]], support, EVAL_BUDGET)
    return float(t.yes[0, [t.col[int(v)] for v in support]] @ q[support])


def false_id_probability(code: SingleUserPoolCode, channel: CqChannel, i_prime: int, i: int, cap: int = DENSE_CAP) -> float:
    if i_prime == i:
        raise SameMessage("false-ID needs two different messages")
    return sequential_yes_probability(code, channel, i_prime, i, cap)


# --------------------------------------------------------------- broadcast


def _receiver(bcode: BroadcastPoolCode, k: int):
    if k not in (1, 2):
        raise ValueError(f"receiver must be 1 or 2, got {k}")
    # rows of ``enc`` are receiver k's messages, columns the other receiver's
    enc = bcode.common_index if k == 1 else bcode.common_index.T
    return bcode.single_user(k), enc


def _semi_average_from_tables(enc: np.ndarray, t: _Tables) -> ErrorReport:
    N, N_other = enc.shape
    missed, false = {}, {}
    for i in range(N):
        cols = [t.col[int(v)] for v in enc[i]]
        missed[i] = float(t.no[i, cols].mean())
        for ip in range(N):
            if ip != i:
                false[(ip, i)] = float(t.yes[ip, cols].mean())
    cols = sorted({t.col[int(v)] for v in enc.ravel()})
    return ErrorReport(missed, false, _residual(t, cols))


def _tables_for(bcode: BroadcastPoolCode, channel: CqBroadcastChannel, k: int, cap: int, budget: int):
    su, enc = _receiver(bcode, k)
    prm = bcode.params(k)
    dec = PoolDecoder(marginal(channel, k), bcode.pmf, prm.n, prm.delta, cap)
    vs = _needed_indices(su) | {int(v) for v in enc.ravel()}
    return su, enc, _bin_tables(dec, bcode.codewords, su.bins, vs, budget)


def semi_average_errors(
    bcode: BroadcastPoolCode, channel: CqBroadcastChannel, k: int, cap: int = DENSE_CAP, budget: int = EVAL_BUDGET
) -> ErrorReport:
    """Receiver k's errors averaged uniformly over the other receiver's messages."""
    _, enc, t = _tables_for(bcode, channel, k, cap, budget)
    return _semi_average_from_tables(enc, t)


def encoder_row_average(bcode: BroadcastPoolCode, k: int, i: int) -> np.ndarray:
    _, enc = _receiver(bcode, k)
    _check_message(i, enc.shape[0])
    q = np.zeros(bcode.pool_size)
    np.add.at(q, enc[i], 1.0 / enc.shape[1])
    return q


def encoder_tvd(bcode: BroadcastPoolCode, k: int, i: int) -> float:
    """TV distance between receiver k's row average of the broadcast encoder and Q~_i."""
    su, _ = _receiver(bcode, k)
    q_bar = encoder_row_average(bcode, k, i)
    return float(0.5 * np.abs(q_bar - encode_distribution(su, i)).sum())


@dataclass
class TransferReport:
    holds: bool
    worst_margin: float  # min over checks of (single-user + tvd + tol - semi-average)
    semi_average: ErrorReport
    single_user: ErrorReport
    tvd: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_margin": self.worst_margin,
            "semi_average": self.semi_average.to_dict(),
            "single_user": self.single_user.to_dict(),
            "tvd": {str(i): v for i, v in self.tvd.items()},
        }


def error_transfer_report(
    bcode: BroadcastPoolCode, channel: CqBroadcastChannel, k: int, tol: float = 1e-9, cap: int = DENSE_CAP, budget: int = EVAL_BUDGET
) -> TransferReport:
    su, enc, t = _tables_for(bcode, channel, k, cap, budget)
    semi = _semi_average_from_tables(enc, t)
    single = _single_user_from_tables(su, t)
    tvd = {i: encoder_tvd(bcode, k, i) for i in range(enc.shape[0])}
    margins = [single.missed_id[i] + tvd[i] + tol - semi.missed_id[i] for i in semi.missed_id]
    margins += [single.false_id[key] + tvd[key[1]] + tol - v for key, v in semi.false_id.items()]
    worst = min(margins)
    return TransferReport(worst >= 0.0, worst, semi, single, tvd)


def error_transfer_check(bcode: BroadcastPoolCode, channel: CqBroadcastChannel, k: int, tol: float = 1e-9) -> bool:
    """semi-average error <= single-user error + encoder TVD (+ tol), for every message (pair)."""
    return error_transfer_report(bcode, channel, k, tol).holds


# ------------------------------------------------------------ bin statistics


@dataclass
class BinStatistics:
    bins: int
    pairs: int
    mean_size: float
    size_sd: float
    mean_intersection: float
    intersection_sd: float
    k_sigma: float
    size_within_k_sigma: float  # fraction of bins
    intersection_within_k_sigma: float  # fraction of pairs
    delta_n: Optional[float] = None
    size_within_delta_n: Optional[float] = None
    intersection_below_bound: Optional[float] = None

    @property
    def pass_fraction(self) -> float:
        """Fraction passing the lemma's own checks when mu was given, else the k-sigma checks."""
        if self.delta_n is not None:
            return min(self.size_within_delta_n, self.intersection_below_bound)
        return min(self.size_within_k_sigma, self.intersection_within_k_sigma)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["pass_fraction"] = self.pass_fraction
        return d


def _as_family(source, k: int = 1) -> BinFamily:
    if isinstance(source, BinFamily):
        return source
    if isinstance(source, SingleUserPoolCode):
        return source.bin_family
    if isinstance(source, BroadcastPoolCode):
        return source.single_user(k).bin_family
    raise TypeError(f"cannot take bin statistics of {type(source).__name__}")


def bin_statistics(source, mu: Optional[float] = None, k_sigma: float = 3.0, receiver: int = 1) -> BinStatistics:
    """Bin sizes and pairwise intersections against their binomial means.

    Always reports the fractions within ``k_sigma`` binomial standard
    deviations.  With ``mu`` (needs n and rates) it also checks
    |V_i| in (1 +- d_n) V q and |V_i & V_i'| <= 2 d_n V q, d_n = 2^(-n mu / 2).
    """
    fam = _as_family(source, receiver)
    V, q = fam.pool_size, fam.q
    sizes = np.array([b.size for b in fam.bins], dtype=float)
    N = len(fam.bins)
    # float32 is exact for counts below 2^24 and goes through BLAS
    member = np.zeros((N, V), dtype=np.float32)
    for i, b in enumerate(fam.bins):
        member[i, b] = 1.0
    gram = np.rint(member @ member.T)
    iu = np.triu_indices(N, 1)
    inter = gram[iu].astype(float)

    mean_size = V * q
    size_sd = math.sqrt(V * q * (1 - q))
    mean_int = V * q * q
    int_sd = math.sqrt(V * q * q * (1 - q * q))
    in_size = float(np.mean(np.abs(sizes - mean_size) <= k_sigma * size_sd)) if N else 1.0
    in_int = float(np.mean(np.abs(inter - mean_int) <= k_sigma * int_sd)) if inter.size else 1.0
    stats = BinStatistics(N, int(inter.size), mean_size, size_sd, mean_int, int_sd, k_sigma, in_size, in_int)
    if mu is not None:
        if fam.n is None:
            raise ParamOutOfRange("the delta_n checks need the block length n")
        if mu <= 0:
            raise ParamOutOfRange(f"mu must be > 0, got {mu}")
        if fam.rate_pool is not None and fam.rate_tilde is not None and mu >= fam.rate_pool - fam.rate_tilde:
            raise ParamOutOfRange(f"need mu < R_pool - R~ = {fam.rate_pool - fam.rate_tilde}, got {mu}")
        dn = 2.0 ** (-fam.n * mu / 2)
        target = V * q
        stats.delta_n = dn
        stats.size_within_delta_n = float(np.mean(np.abs(sizes - target) <= dn * target)) if N else 1.0
        stats.intersection_below_bound = float(np.mean(inter <= 2 * dn * target)) if inter.size else 1.0
    return stats
