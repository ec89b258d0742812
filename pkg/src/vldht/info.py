"""Finite-alphabet information measures, typicality tests and i.i.d. sampling.

All logarithms are base 2, so every entropy, divergence and rate is in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AbsoluteContinuityViolation, DomainError

SUM_TOL = 1e-9
MARGINAL_TOL = 1e-12
# slack on |c/n - p| <= mu*p so float rounding never flips an exact-type decision
TYPICAL_SLACK = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _normalized(values, what):
    a = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{what} contains non-finite entries")
    if np.any(a < 0):
        raise DomainError(f"{what} has negative entries")
    total = a.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise DomainError(f"{what} sums to {total!r}, not 1")
    return a / total


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability vector over the alphabet {0, ..., alphabet_size - 1}."""

    probs: np.ndarray

    def __init__(self, probs):
        a = _normalized(np.ravel(probs), "pmf")
        if a.size == 0:
            raise DomainError("pmf over an empty alphabet")
        object.__setattr__(self, "probs", _frozen(a))

    @property
    def alphabet_size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, k: int) -> "Pmf":
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, at: int = 0) -> "Pmf":
        a = np.zeros(k)
        a[at] = 1.0
        return cls(a)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def __len__(self):
        return self.alphabet_size

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self):
        return f"Pmf({self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class JointSource:
    """Joint law P_XY as an |X| x |Y| table with cached marginals."""

    joint: np.ndarray
    x_marginal: Pmf
    y_marginal: Pmf

    def __init__(self, joint):
        t = np.asarray(joint, dtype=float)
        if t.ndim != 2:
            raise DomainError("joint law must be a 2-d table")
        t = _normalized(t, "joint law")
        object.__setattr__(self, "joint", _frozen(t))
        object.__setattr__(self, "x_marginal", Pmf(t.sum(axis=1)))
        object.__setattr__(self, "y_marginal", Pmf(t.sum(axis=0)))

    @property
    def shape(self):
        return self.joint.shape

    @property
    def y_given_x(self) -> np.ndarray:
        """Row-stochastic P_{Y|X}; rows for zero-probability x are uniform."""
        px = self.x_marginal.probs[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(px > 0, self.joint / px, 1.0 / self.joint.shape[1])
        return c

    @classmethod
    def product(cls, px, py) -> "JointSource":
        px = px.probs if isinstance(px, Pmf) else np.asarray(px, float)
        py = py.probs if isinstance(py, Pmf) else np.asarray(py, float)
        return cls(np.outer(px, py))

    @classmethod
    def from_channel(cls, px, channel) -> "JointSource":
        px = px.probs if isinstance(px, Pmf) else np.asarray(px, float)
        return cls(px[:, None] * np.asarray(channel, float))

    def independent_version(self) -> "JointSource":
        """P_X * P_Y, the law of the alternative hypothesis."""
        return JointSource.product(self.x_marginal, self.y_marginal)

    def __repr__(self):
        return f"JointSource({self.joint.tolist()})"


def dsbs(alpha: float) -> JointSource:
    """Doubly symmetric binary source: X ~ Bern(1/2), Y = X through a BSC(alpha)."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"crossover {alpha} outside [0, 1]")
    return JointSource([[(1 - alpha) / 2, alpha / 2], [alpha / 2, (1 - alpha) / 2]])


@dataclass(frozen=True, eq=False)
class AuxChannel:
    """Conditional law P_{U|X}; row x is the pmf of U given X = x."""

    rows: np.ndarray

    def __init__(self, rows):
        r = np.asarray(rows, dtype=float)
        if r.ndim != 2:
            raise DomainError("aux channel must be a 2-d table")
        r = np.vstack([_normalized(row, f"aux row {i}") for i, row in enumerate(r)])
        object.__setattr__(self, "rows", _frozen(r))

    @property
    def u_size(self) -> int:
        return int(self.rows.shape[1])

    @property
    def x_size(self) -> int:
        return int(self.rows.shape[0])

    @classmethod
    def symmetric(cls, x_size: int, crossover: float, u_size: int | None = None) -> "AuxChannel":
        """U = X with prob 1 - crossover, otherwise uniform over the other |X| - 1 symbols.

        For binary X this is the BSC(crossover) test channel.  Extra U symbols
        (u_size > x_size) carry zero mass.
        """
        u_size = x_size if u_size is None else u_size
        if u_size < x_size:
            raise DomainError("symmetric aux needs u_size >= x_size")
        r = np.zeros((x_size, u_size))
        off = crossover / (x_size - 1) if x_size > 1 else 0.0
        r[:, :x_size] = off
        np.fill_diagonal(r[:, :x_size], 1.0 - crossover if x_size > 1 else 1.0)
        return cls(r)

    def joint_ux(self, source: JointSource) -> JointSource:
        """P_UX = P_{U|X} P_X, laid out as a |U| x |X| table."""
        return JointSource((source.x_marginal.probs[:, None] * self.rows).T)

    def joint_uy(self, source: JointSource) -> JointSource:
        """P_UY through the Markov chain U - X - Y."""
        return JointSource(self.rows.T @ source.joint)

    def u_marginal(self, source: JointSource) -> Pmf:
        return Pmf(source.x_marginal.probs @ self.rows)

    def __repr__(self):
        return f"AuxChannel({self.rows.tolist()})"


@dataclass(frozen=True)
class EmpiricalType:
    counts: tuple
    n: int

    def __post_init__(self):
        if sum(self.counts) != self.n:
            raise DomainError("type counts do not sum to n")

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, float) / self.n


def empirical_type(seq, alphabet_size: int) -> EmpiricalType:
    seq = np.asarray(seq)
    counts = np.bincount(seq, minlength=alphabet_size)
    return EmpiricalType(tuple(int(c) for c in counts), int(seq.size))


def _probs(p):
    return p.probs if isinstance(p, Pmf) else np.asarray(p, dtype=float)


def _xlog2x_over(p, q):
    """Elementwise p*log2(p/q) with 0 log 0 = 0 (q > 0 wherever p > 0 assumed)."""
    out = np.zeros(np.broadcast(p, q).shape)
    mask = p > 0
    pb = np.broadcast_to(p, out.shape)
    qb = np.broadcast_to(q, out.shape)
    out[mask] = pb[mask] * np.log2(pb[mask] / qb[mask])
    return out


def entropy(p) -> float:
    a = _probs(p)
    nz = a[a > 0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def kl_divergence(p, q) -> float:
    """D(p||q) in bits; raises AbsoluteContinuityViolation if it is infinite."""
    a, b = _probs(p), _probs(q)
    if a.shape != b.shape:
        raise DomainError("pmfs live on different alphabets")
    if np.any((a > 0) & (b <= 0)):
        raise AbsoluteContinuityViolation("support of p is not contained in support of q")
    return float(max(0.0, _xlog2x_over(a, b).sum()))


def mutual_information(j) -> float:
    """I(X;Y) of a joint table, computed as D(P_XY || P_X P_Y)."""
    t = j.joint if isinstance(j, JointSource) else np.asarray(j, dtype=float)
    prod = np.outer(t.sum(axis=1), t.sum(axis=0))
    return float(max(0.0, _xlog2x_over(t, prod).sum()))


def binary_entropy(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"binary_entropy argument {a} outside [0, 1]")
    if a == 0.0 or a == 1.0:
        return 0.0
    return float(-a * math.log2(a) - (1 - a) * math.log2(1 - a))


def binary_entropy_inv(h: float, tol: float = 1e-10) -> float:
    """The a in [0, 1/2] with h_b(a) = h, by bisection."""
    if not 0.0 <= h <= 1.0:
        raise DomainError(f"binary_entropy_inv argument {h} outside [0, 1]")
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    mid = 0.25
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v = binary_entropy(mid)
        if abs(v - h) <= tol * 1e-2:
            break
        if v < h:
            lo = mid
        else:
            hi = mid
    return mid


def star(a: float, b: float) -> float:
    """Binary convolution a(1-b) + b(1-a)."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise DomainError(f"star arguments ({a}, {b}) outside [0, 1]")
    return a * (1 - b) + b * (1 - a)


def typical_count_bounds(p, n: int, mu: float):
    """Integer count window [lo, hi] per symbol equivalent to |c/n - p| <= mu*p."""
    a = _probs(p).ravel()
    slack = TYPICAL_SLACK * n
    lo = np.ceil(n * a * (1.0 - mu) - slack)
    hi = np.floor(n * a * (1.0 + mu) + slack)
    lo = np.clip(lo, 0, n).astype(np.int64)
    hi = np.clip(hi, 0, n).astype(np.int64)
    return lo, hi


def is_typical(seq, p, mu: float) -> bool:
    a = _probs(p)
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size == 0:
        return False
    counts = np.bincount(seq, minlength=a.size)
    if counts.size > a.size:
        return False
    lo, hi = typical_count_bounds(a, seq.size, mu)
    return bool(np.all((counts >= lo) & (counts <= hi)))


def is_jointly_typical(pair_seq, j, mu: float) -> bool:
    """Typicality of a sequence of (x, y) pairs; pair_seq has shape (n, 2)."""
    t = j.joint if isinstance(j, JointSource) else np.asarray(j, dtype=float)
    pairs = np.asarray(pair_seq, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise DomainError("pair sequence must have shape (n, 2)")
    flat = pairs[:, 0] * t.shape[1] + pairs[:, 1]
    return is_typical(flat, t.ravel(), mu)


def sample_iid(p, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise DomainError("sample length must be at least 1")
    a = _probs(p).ravel()
    cdf = np.cumsum(a)
    cdf[np.flatnonzero(a > 0)[-1]:] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)


def sample_joint(j: JointSource, n: int, rng: np.random.Generator):
    """n i.i.d. pairs from a joint table, returned as separate x and y sequences."""
    flat = sample_iid(j.joint.ravel(), n, rng)
    return np.divmod(flat, j.shape[1])
