"""Variable-length achievability scheme over a noiseless bit pipe, and its Monte Carlo evaluation.

The transmitter sends the single bit ``0`` when X^n falls in the reject set
S_n (or when no codeword is jointly typical with X^n); otherwise it sends the
fixed-width index of a jointly typical codeword.  The receiver declares H1 on
``0`` and otherwise tests the indexed codeword against Y^n for typicality.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, InfeasibleTarget, MalformedMessage, ResourceLimit
from .info import (
    AuxChannel,
    JointSource,
    Pmf,
    empirical_type,
    mutual_information,
    sample_iid,
    sample_joint,
    typical_count_bounds,
)
from .montecarlo import (
    Hypothesis,
    chunk_ranges,
    derived_rng,
    empirical_exponent,
    run_chunks,
    trial_rng,
    wilson_interval,
)

MAX_CODEBOOK_BITS = 26
MAX_ENUMERATION = 1 << 20
# total codebook symbols; 2^27 int64 entries is 1 GiB
MAX_CODEBOOK_SYMBOLS = 1 << 27


# --------------------------------------------------------------------------
# typicality search


class JointTypicality:
    """Count-window test for (a^n, b^n) in T_mu^n(P_AB), reusable across sequences."""

    def __init__(self, joint, n: int, mu: float):
        t = joint.joint if isinstance(joint, JointSource) else np.asarray(joint, float)
        self.shape = t.shape
        self.n = n
        self.mu = mu
        self.lo, self.hi = typical_count_bounds(t.ravel(), n, mu)

    def rows(self, book, seq, max_hits=0):
        """Indices of rows of ``book`` jointly typical with ``seq``."""
        return kernels.typical_rows(book, seq, self.shape[1], self.lo, self.hi, max_hits)

    def pair(self, a, b) -> bool:
        cells = np.asarray(a, np.int64) * self.shape[1] + np.asarray(b, np.int64)
        c = np.bincount(cells, minlength=self.lo.size)
        return bool(np.all((c >= self.lo) & (c <= self.hi)))


# --------------------------------------------------------------------------
# codebook


def codebook_size(n: int, rate: float) -> int:
    """floor(2^{nR}), guarded at nR <= 26."""
    bits = n * rate
    if bits > MAX_CODEBOOK_BITS + 1e-9:
        raise ResourceLimit(f"n*R = {bits:.3f} exceeds the codebook guard of {MAX_CODEBOOK_BITS} bits")
    return int(math.floor(2.0 ** bits * (1 + 1e-12)))


@dataclass(frozen=True, eq=False)
class Codebook:
    entries: np.ndarray  # (size, n), row m - 1 holds u^n(m)
    n: int
    rate: float

    @property
    def size(self) -> int:
        return int(self.entries.shape[0])

    def __len__(self):
        return self.size

    def __getitem__(self, m):
        return self.entries[m - 1]


def build_codebook(p_u, n: int, rate: float, rng, size: int | None = None) -> Codebook:
    """Random codebook with i.i.d. P_U entries; ``size`` overrides floor(2^{nR})."""
    m = codebook_size(n, rate)
    if size is not None:
        m = size
    if m < 1:
        raise DomainError("codebook must contain at least one codeword")
    if m * n > MAX_CODEBOOK_SYMBOLS:
        raise ResourceLimit(f"{m} codewords of length {n} exceed the memory guard")
    entries = sample_iid(p_u, m * n, rng).reshape(m, n)
    entries.setflags(write=False)
    return Codebook(entries=entries, n=n, rate=rate)


# --------------------------------------------------------------------------
# reject set


def _compositions(n, k):
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(n + k - 1 - prev - 1)
        yield tuple(out)


def _class_mass(counts, probs):
    coef = math.factorial(sum(counts))
    for c in counts:
        coef //= math.factorial(c)
    return float(coef) * _seq_prob(counts, probs)


def _seq_prob(counts, probs):
    out = 1.0
    for c, p in zip(counts, probs):
        if c:
            out *= p ** c
    return out


@dataclass(frozen=True, eq=False)
class RejectSetSpec:
    """S_n as a union of whole type classes plus one fractionally included class.

    ``full_classes`` are included outright; a sequence of ``boundary_class``
    is included when the encoder's coin is below ``boundary_prob``.
    """

    n: int
    mu: float
    target_prob: float
    full_classes: frozenset
    boundary_class: tuple | None
    boundary_prob: float
    boundary_mass: float
    full_mass: float
    typical_mass: float
    alphabet_size: int

    @property
    def mass(self) -> float:
        return self.full_mass + self.boundary_prob * self.boundary_mass

    def membership_prob(self, x_seq) -> float:
        t = empirical_type(x_seq, self.alphabet_size).counts
        if t in self.full_classes:
            return 1.0
        if t == self.boundary_class:
            return self.boundary_prob
        return 0.0

    def contains(self, x_seq, coin: float) -> bool:
        """Randomized membership; ``coin`` is a Uniform[0, 1) draw owned by the encoder."""
        return coin < self.membership_prob(x_seq)

    @classmethod
    def empty(cls, n, alphabet_size, mu=0.0):
        return cls(n, mu, 0.0, frozenset(), None, 0.0, 0.0, 0.0, 0.0, alphabet_size)


def build_reject_set(p_x, n: int, mu: float, target_prob: float) -> RejectSetSpec:
    """Subset of T_{mu/2}^n(P_X) of probability exactly ``target_prob``.

    Typical type classes are taken in order of decreasing per-sequence
    probability (ties broken by the type tuple); the first class that would
    overshoot is included with the fractional probability that hits the target.
    """
    probs = p_x.probs if isinstance(p_x, Pmf) else np.asarray(p_x, float)
    k = probs.size
    if target_prob < 0:
        raise DomainError("target probability must be nonnegative")
    lo, hi = typical_count_bounds(probs, n, mu / 2)
    classes = []
    for counts in _compositions(n, k):
        c = np.asarray(counts)
        if np.all((c >= lo) & (c <= hi)):
            classes.append((-_seq_prob(counts, probs), counts, _class_mass(counts, probs)))
    classes.sort()
    typical_mass = math.fsum(m for _, _, m in classes)
    if target_prob > typical_mass * (1 + 1e-12):
        raise InfeasibleTarget(
            f"target {target_prob} exceeds the typical-set mass {typical_mass}", achievable=typical_mass
        )
    full, acc = [], 0.0
    boundary, gamma, bmass = None, 0.0, 0.0
    for _, counts, m in classes:
        remaining = target_prob - acc
        if remaining <= 1e-15:
            break
        if m <= remaining * (1 + 1e-12):
            full.append(counts)
            acc = math.fsum([acc, m])
            continue
        boundary, bmass = counts, m
        gamma = remaining / m
        break
    return RejectSetSpec(n=n, mu=mu, target_prob=target_prob, full_classes=frozenset(full),
                         boundary_class=boundary, boundary_prob=gamma, boundary_mass=bmass,
                         full_mass=acc, typical_mass=typical_mass, alphabet_size=k)


# --------------------------------------------------------------------------
# messages


def message_width(codebook_size: int) -> int:
    """Bits of an index message.  At least 2 so it never collides with the 1-bit reject."""
    return max(2, math.ceil(math.log2(codebook_size)) if codebook_size > 1 else 0)


@dataclass(frozen=True)
class Message:
    bits: str

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise MalformedMessage(f"not a bit-string: {self.bits!r}")

    @property
    def length(self) -> int:
        return len(self.bits)

    @property
    def is_reject(self) -> bool:
        return self.bits == "0"

    @classmethod
    def reject(cls):
        return cls("0")

    @classmethod
    def for_index(cls, m: int, codebook_size: int):
        if not 1 <= m <= codebook_size:
            raise MalformedMessage(f"index {m} outside 1..{codebook_size}")
        return cls(format(m - 1, f"0{message_width(codebook_size)}b"))

    def index(self, codebook_size: int) -> int:
        if self.length != message_width(codebook_size):
            raise MalformedMessage(f"index message must have {message_width(codebook_size)} bits")
        m = int(self.bits, 2) + 1
        if m > codebook_size:
            raise MalformedMessage(f"index {m} outside 1..{codebook_size}")
        return m


def encode(x_seq, codebook: Codebook, reject: RejectSetSpec, joint_ux, mu: float, rng,
           coin: float | None = None) -> Message:
    """Variable-length encoder.  Consumes one coin for S_n, then one draw to pick among hits."""
    if len(x_seq) != codebook.n:
        raise DomainError("source sequence length differs from the codebook block length")
    if coin is None:
        coin = rng.random()
    if reject.contains(x_seq, coin):
        return Message.reject()
    jt = joint_ux if isinstance(joint_ux, JointTypicality) else JointTypicality(joint_ux, codebook.n, mu / 2)
    return _index_message(x_seq, codebook, jt, rng)


def _index_message(x_seq, codebook, jt, rng):
    hits = jt.rows(codebook.entries, x_seq)
    if hits.size == 0:
        return Message.reject()
    return Message.for_index(int(hits[rng.integers(hits.size)]) + 1, codebook.size)


def decode(msg: Message, y_seq, codebook: Codebook, joint_uy, mu: float) -> Hypothesis:
    if msg.is_reject:
        return Hypothesis.H1
    m = msg.index(codebook.size)
    jt = joint_uy if isinstance(joint_uy, JointTypicality) else JointTypicality(joint_uy, codebook.n, mu)
    return Hypothesis.H0 if jt.pair(codebook[m], y_seq) else Hypothesis.H1


# --------------------------------------------------------------------------
# configuration and trials


@dataclass(frozen=True, eq=False)
class NoiselessConfig:
    source: JointSource
    aux: AuxChannel
    n: int
    mu: float
    epsilon: float
    rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.mu < self.epsilon < 1:
            raise DomainError("need 0 < mu < epsilon < 1")
        if self.aux.x_size != self.source.shape[0]:
            raise DomainError("aux channel input alphabet differs from the source X alphabet")
        if self.n < 1:
            raise DomainError("block length must be positive")
        if self.rate is None:
            r = (1 - self.epsilon + self.mu) * self.iux + self.mu
            object.__setattr__(self, "rate", r)

    @property
    def iux(self) -> float:
        return mutual_information(self.aux.joint_ux(self.source))

    @property
    def iuy(self) -> float:
        return mutual_information(self.aux.joint_uy(self.source))

    @property
    def reject_target(self) -> float:
        return self.epsilon - self.mu


@dataclass(eq=False)
class SimReport:
    trials_h0: int
    trials_h1: int
    alpha_hat: float
    beta_hat: float
    mean_len_per_symbol: float
    empirical_exponent: float
    alpha_ci: tuple
    beta_ci: tuple
    n: int
    rate: float
    codebook_size: int
    message_width: int
    reject_mass: float
    # H0-trial outcome breakdown: sent reject because of S_n, found no codeword, failed decoder test
    h0_in_reject_set: int = 0
    h0_no_codeword: int = 0
    h0_decoder_miss: int = 0
    accept_h0: np.ndarray = field(default=None, repr=False)  # decision == H0, H0 trials
    accept_h1: np.ndarray = field(default=None, repr=False)  # decision == H0, H1 trials
    lengths: np.ndarray = field(default=None, repr=False)

    def summary(self) -> dict:
        keys = ["trials_h0", "trials_h1", "alpha_hat", "beta_hat", "mean_len_per_symbol",
                "empirical_exponent", "alpha_ci", "beta_ci", "n", "rate", "codebook_size",
                "message_width", "reject_mass", "h0_in_reject_set", "h0_no_codeword", "h0_decoder_miss"]
        return {k: getattr(self, k) for k in keys}


_OUTCOME_REJECT, _OUTCOME_NOCODE, _OUTCOME_DECFAIL, _OUTCOME_ACCEPT = range(4)


def _one_trial(cfg, codebook, reject, jt_ux, jt_uy, hyp, i, use_reject):
    rng = trial_rng(cfg.seed, hyp, i)
    if hyp == Hypothesis.H0:
        x, y = sample_joint(cfg.source, cfg.n, rng)
    else:
        x = sample_iid(cfg.source.x_marginal, cfg.n, rng)
        y = sample_iid(cfg.source.y_marginal, cfg.n, rng)
    coin = rng.random()
    if use_reject and reject.contains(x, coin):
        return _OUTCOME_REJECT, 1
    msg = _index_message(x, codebook, jt_ux, rng)
    if msg.is_reject:
        return _OUTCOME_NOCODE, 1
    d = decode(msg, y, codebook, jt_uy, cfg.mu)
    return (_OUTCOME_ACCEPT if d == Hypothesis.H0 else _OUTCOME_DECFAIL), msg.length


def _chunk(args):
    cfg, codebook, reject, hyp, start, stop, use_reject = args
    jt_ux = JointTypicality(cfg.aux.joint_ux(cfg.source), cfg.n, cfg.mu / 2)
    jt_uy = JointTypicality(cfg.aux.joint_uy(cfg.source), cfg.n, cfg.mu)
    out = np.empty((stop - start, 2), dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        out[j] = _one_trial(cfg, codebook, reject, jt_ux, jt_uy, hyp, i, use_reject)
    return out


def scheme_objects(cfg: NoiselessConfig):
    """The codebook and reject set of a configuration, both deterministic in ``cfg.seed``."""
    p_u = cfg.aux.u_marginal(cfg.source)
    codebook = build_codebook(p_u, cfg.n, cfg.rate, derived_rng(cfg.seed, 0))
    reject = build_reject_set(cfg.source.x_marginal, cfg.n, cfg.mu, cfg.reject_target)
    return codebook, reject


def run_trials(cfg: NoiselessConfig, trials_per_hypothesis: int, *, use_reject: bool = True,
               workers: int = 1, chunks: int | None = None) -> SimReport:
    """Monte Carlo estimate of alpha_n, beta_n and E[len(M)] for one fixed codebook.

    Trial i under hypothesis h draws from ``trial_rng(cfg.seed, h, i)``, so the
    aggregate does not depend on ``workers``.  ``use_reject=False`` replays the
    same trials with S_n disabled.
    """
    if trials_per_hypothesis < 1:
        raise DomainError("need at least one trial per hypothesis")
    codebook, reject = scheme_objects(cfg)
    pieces = chunks or max(1, workers) * 4
    jobs = [(cfg, codebook, reject, h, a, b, use_reject)
            for h in (Hypothesis.H0, Hypothesis.H1)
            for a, b in chunk_ranges(trials_per_hypothesis, pieces)]
    parts = run_chunks(_chunk, jobs, workers)
    half = len(parts) // 2
    r0 = np.concatenate(parts[:half])
    r1 = np.concatenate(parts[half:])
    t = trials_per_hypothesis
    acc0 = r0[:, 0] == _OUTCOME_ACCEPT
    acc1 = r1[:, 0] == _OUTCOME_ACCEPT
    type1 = int(t - acc0.sum())
    type2 = int(acc1.sum())
    lengths = np.concatenate([r0[:, 1], r1[:, 1]])
    beta_hat = type2 / t
    return SimReport(
        trials_h0=t, trials_h1=t,
        alpha_hat=type1 / t, beta_hat=beta_hat,
        mean_len_per_symbol=float(lengths.mean()) / cfg.n,
        empirical_exponent=empirical_exponent(beta_hat, t, cfg.n),
        alpha_ci=wilson_interval(type1, t), beta_ci=wilson_interval(type2, t),
        n=cfg.n, rate=cfg.rate, codebook_size=codebook.size,
        message_width=message_width(codebook.size),
        reject_mass=reject.mass if use_reject else 0.0,
        h0_in_reject_set=int((r0[:, 0] == _OUTCOME_REJECT).sum()),
        h0_no_codeword=int((r0[:, 0] == _OUTCOME_NOCODE).sum()),
        h0_decoder_miss=int((r0[:, 0] == _OUTCOME_DECFAIL).sum()),
        accept_h0=acc0, accept_h1=acc1, lengths=lengths,
    )


def exact_expected_length(cfg: NoiselessConfig, codebook: Codebook | None = None,
                          reject: RejectSetSpec | None = None) -> float:
    """E[len(M)] in bits for a fixed codebook, by enumerating every x^n (small |X|^n only)."""
    if codebook is None or reject is None:
        codebook, reject = scheme_objects(cfg)
    k = cfg.source.shape[0]
    if k ** cfg.n > MAX_ENUMERATION:
        raise ResourceLimit(f"|X|^n = {k ** cfg.n} sequences is too many to enumerate")
    px = cfg.source.x_marginal.probs
    jt = JointTypicality(cfg.aux.joint_ux(cfg.source), cfg.n, cfg.mu / 2)
    width = message_width(codebook.size)
    total = 0.0
    for x in itertools.product(range(k), repeat=cfg.n):
        xs = np.asarray(x, dtype=np.int64)
        p = float(np.prod(px[xs]))
        if p == 0.0:
            continue
        s = reject.membership_prob(xs)
        hit = jt.rows(codebook.entries, xs, max_hits=1).size > 0
        total += p * (s * 1 + (1 - s) * (width if hit else 1))
    return total
