"""Two-phase variable-length scheme over a DMC with stop-feedback.

Phase 1 (q(n) channel uses): the transmitter repeats w1 if X^n is in the
reject set and w0 otherwise; the receiver runs a randomized Neyman-Pearson
test on the q(n) outputs and, on detecting w1, declares H1 and stops the
transmission.  Phase 2 (n' uses): the source index found by joint-typicality
encoding is sent with a random channel code, decoded by unique joint
typicality, and the decoded U-codeword is tested against Y^n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import AbsoluteContinuityViolation, DegenerateChannels, DomainError
from .info import AuxChannel, JointSource, Pmf, kl_divergence, mutual_information, sample_iid, sample_joint
from .montecarlo import (
    Hypothesis,
    chunk_ranges,
    derived_rng,
    empirical_exponent,
    run_chunks,
    trial_rng,
    wilson_interval,
)
from .noiseless import Codebook, JointTypicality, RejectSetSpec, build_codebook, build_reject_set, codebook_size
from .solver import Dmc

_ATOM_DECIMALS = 9


# --------------------------------------------------------------------------
# Neyman-Pearson test on q repetitions


def _symbol_llr(g0, g1):
    """log2(g1/g0) per output symbol; +-inf off the common support, nan where both vanish."""
    llr = np.full(g0.size, np.nan)
    both = (g0 > 0) & (g1 > 0)
    llr[both] = np.log2(g1[both] / g0[both])
    llr[(g0 == 0) & (g1 > 0)] = np.inf
    llr[(g0 > 0) & (g1 == 0)] = -np.inf
    return llr


def _key(v):
    return v if math.isinf(v) else round(v, _ATOM_DECIMALS)


def llr_distribution(g0, g1, q):
    """Exact law of the q-sample log-likelihood ratio under both inputs.

    Returns (values, p0, p1) sorted by decreasing value; computed by q-fold
    convolution over the finite set of per-symbol LLR values.
    """
    g0 = np.asarray(g0, float)
    g1 = np.asarray(g1, float)
    llr = _symbol_llr(g0, g1)
    steps = {}
    for v, a, b in zip(llr, g0, g1):
        if np.isnan(v):
            continue
        k = _key(float(v))
        pa, pb = steps.get(k, (0.0, 0.0))
        steps[k] = (pa + a, pb + b)
    dist = {0.0: (1.0, 1.0)}
    for _ in range(q):
        nxt = {}
        for s, (a, b) in dist.items():
            for v, (pa, pb) in steps.items():
                t = s + v
                if math.isnan(t):
                    continue  # +inf and -inf together: probability zero under both inputs
                k = _key(t)
                ca, cb = nxt.get(k, (0.0, 0.0))
                nxt[k] = (ca + a * pa, cb + b * pb)
        dist = {k: p for k, p in nxt.items() if p[0] > 0 or p[1] > 0}
    vals = sorted(dist, reverse=True)
    return (np.array(vals), np.array([dist[v][0] for v in vals]), np.array([dist[v][1] for v in vals]))


@dataclass(frozen=True, eq=False)
class NpTest:
    """Randomized LLR test: declare w1 if LLR > threshold, or = threshold with prob gamma."""

    threshold: float
    gamma: float
    q: int
    target_fa: float
    llr: np.ndarray
    atoms: tuple  # (values, p0, p1)
    false_alarm: float
    miss: float

    def statistic(self, outputs) -> float:
        return float(np.sum(self.llr[np.asarray(outputs, dtype=np.int64)]))

    def at_threshold(self, s: float) -> bool:
        if math.isinf(s) or math.isinf(self.threshold):
            return s == self.threshold
        return abs(s - self.threshold) <= 10.0 ** -(_ATOM_DECIMALS - 2) * (1 + abs(self.threshold))


def _error_probs(values, p0, p1, threshold, gamma):
    above = values > threshold
    on = values == threshold
    fa = math.fsum(p0[above]) + gamma * math.fsum(p0[on])
    miss = math.fsum(p1[~above & ~on]) + (1 - gamma) * math.fsum(p1[on])
    return fa, miss


def design_np_test(gamma0, gamma1, q: int, target_fa: float) -> NpTest:
    """Most powerful test of w0 vs w1 from q outputs with false-alarm probability target_fa.

    The size is exactly ``target_fa`` unless the deterministic test already has
    power 1 at a smaller size, in which case no further randomization is added.
    """
    g0 = gamma0.probs if isinstance(gamma0, Pmf) else np.asarray(gamma0, float)
    g1 = gamma1.probs if isinstance(gamma1, Pmf) else np.asarray(gamma1, float)
    if np.allclose(g0, g1, atol=1e-15, rtol=0):
        raise DegenerateChannels("the two output laws coincide")
    if not 0 < target_fa < 1:
        raise DomainError("target false-alarm probability must lie in (0, 1)")
    if q < 1:
        raise DomainError("q must be at least 1")
    values, p0, p1 = llr_distribution(g0, g1, q)
    cum0 = cum1 = 0.0
    threshold, gamma = values[-1], 1.0
    for v, a, b in zip(values, p0, p1):
        if cum1 >= 1.0 - 1e-15:
            threshold, gamma = v, 0.0
            break
        if cum0 + a >= target_fa - 1e-15:
            threshold = v
            gamma = min(1.0, max(0.0, (target_fa - cum0) / a))
            break
        cum0 += a
        cum1 += b
    fa, miss = _error_probs(values, p0, p1, threshold, gamma)
    values.setflags(write=False)
    llr = _symbol_llr(g0, g1)
    llr.setflags(write=False)
    return NpTest(threshold=float(threshold), gamma=float(gamma), q=q, target_fa=target_fa,
                  llr=llr, atoms=(values, p0, p1), false_alarm=fa, miss=miss)


def phase1_detect(test: NpTest, outputs, rng) -> int:
    """0 for w0, 1 for w1.  One uniform draw is consumed per call."""
    if len(outputs) != test.q:
        raise DomainError(f"expected {test.q} phase-1 outputs, got {len(outputs)}")
    u = rng.random()
    s = test.statistic(outputs)
    if test.at_threshold(s):
        return int(u < test.gamma)
    return int(s > test.threshold)


class MissBracket(NamedTuple):
    exact: float
    lower: float
    upper: float
    inside: bool


def miss_probability_bounds(test: NpTest, gamma0, gamma1, mu: float) -> MissBracket:
    """Exact Pr[detect w0 | w1 sent] and the bracket 2^{-q(D+mu)} .. 2^{-q(D-mu)}, D = D(G0||G1)."""
    g0 = gamma0.probs if isinstance(gamma0, Pmf) else np.asarray(gamma0, float)
    g1 = gamma1.probs if isinstance(gamma1, Pmf) else np.asarray(gamma1, float)
    values, p0, p1 = llr_distribution(g0, g1, test.q)
    _, miss = _error_probs(values, p0, p1, test.threshold, test.gamma)
    try:
        d = kl_divergence(g0, g1)
    except AbsoluteContinuityViolation:
        d = math.inf
    lower = 0.0 if math.isinf(d) else 2.0 ** (-test.q * (d + mu))
    upper = 0.0 if math.isinf(d) else min(1.0, 2.0 ** (-test.q * (d - mu)))
    return MissBracket(miss, lower, upper, lower <= miss <= upper)


class Phase1Receiver:
    """Stopping rule after phase 1.  It sees channel outputs only, never Y^n."""

    def __init__(self, test: NpTest):
        self.test = test

    def stop(self, outputs, rng) -> bool:
        return phase1_detect(self.test, outputs, rng) == 1


# --------------------------------------------------------------------------
# configuration


def transmit(dmc: Dmc, inputs, rng) -> np.ndarray:
    """Pass an input sequence through the memoryless channel."""
    inputs = np.asarray(inputs, dtype=np.int64)
    cdf = np.cumsum(dmc.transition, axis=1)
    u = rng.random(inputs.size)
    out = (u[:, None] >= cdf[inputs]).sum(axis=1)
    return np.minimum(out, dmc.output_size - 1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class DmcSchemeConfig:
    source: JointSource
    aux: AuxChannel
    dmc: Dmc
    n: int
    kappa: float
    epsilon: float
    epsilon_prime: float
    q_exponent: float = 0.75
    w0: int = 0
    w1: int = 1
    p_w: Pmf | None = None
    rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.epsilon_prime < self.epsilon < 1:
            raise DomainError("need 0 <= epsilon' < epsilon < 1")
        if not 0 < self.q_exponent < 1:
            raise DomainError("q_exponent must lie in (0, 1)")
        if not self.kappa > 0:
            raise DomainError("kappa must be positive")
        if self.aux.x_size != self.source.shape[0]:
            raise DomainError("aux channel input alphabet differs from the source X alphabet")
        if self.w0 == self.w1:
            raise DomainError("w0 and w1 must differ")
        g0, g1 = self.dmc.row(self.w0), self.dmc.row(self.w1)
        try:
            d = kl_divergence(g0, g1)
        except AbsoluteContinuityViolation:
            d = math.inf
        if not d > 0:
            raise DegenerateChannels("D(Gamma_w0 || Gamma_w1) must be positive")
        if self.p_w is None:
            object.__setattr__(self, "p_w", self.dmc.capacity_achieving_input)
        if self.rate is None:
            object.__setattr__(self, "rate", self.iux + self.mu)
        bound = self.kappa / (1 - self.epsilon_prime) * self.iwv
        if not self.rate < bound + 1e-9:
            raise DomainError(f"rate {self.rate:.6f} violates R < kappa/(1-eps') I(W;V) = {bound:.6f}")

    @property
    def mu(self) -> float:
        return self.epsilon - self.epsilon_prime

    @property
    def q(self) -> int:
        return max(1, math.ceil(self.n ** self.q_exponent - 1e-9))

    @property
    def n_prime(self) -> int:
        return math.ceil(self.n * self.kappa / (1 - self.epsilon_prime) - 1e-9)

    @property
    def iux(self) -> float:
        return mutual_information(self.aux.joint_ux(self.source))

    @property
    def iuy(self) -> float:
        return mutual_information(self.aux.joint_uy(self.source))

    @property
    def joint_wv(self) -> JointSource:
        return JointSource.from_channel(self.p_w, self.dmc.transition)

    @property
    def iwv(self) -> float:
        return mutual_information(self.joint_wv)

    @cached_property
    def typicality(self):
        """Count windows for the encoder (U,X at mu/2), channel decoder (W,V) and final test (U,Y)."""
        return (JointTypicality(self.aux.joint_ux(self.source), self.n, self.mu / 2),
                JointTypicality(self.joint_wv, self.n_prime, self.mu),
                JointTypicality(self.aux.joint_uy(self.source), self.n, self.mu))


@dataclass(frozen=True, eq=False)
class DmcScheme:
    """Everything shared by all trials of one configuration."""

    cfg: DmcSchemeConfig
    codebook_u: Codebook
    codebook_w: Codebook
    reject: RejectSetSpec
    test: NpTest


def build_dmc_scheme(cfg: DmcSchemeConfig) -> DmcScheme:
    m = codebook_size(cfg.n, cfg.rate)
    cu = build_codebook(cfg.aux.u_marginal(cfg.source), cfg.n, cfg.rate, derived_rng(cfg.seed, 0))
    cw = build_codebook(cfg.p_w, cfg.n_prime, cfg.rate * cfg.n / cfg.n_prime, derived_rng(cfg.seed, 1),
                        size=m + 1)
    reject = build_reject_set(cfg.source.x_marginal, cfg.n, cfg.mu, cfg.epsilon_prime)
    test = design_np_test(cfg.dmc.row(cfg.w0), cfg.dmc.row(cfg.w1), cfg.q, cfg.mu / 3)
    return DmcScheme(cfg, cu, cw, reject, test)


# --------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class DmcTrialRecord:
    hypothesis: Hypothesis
    phase1_input: int  # 0 if w0^q was sent, 1 if w1^q
    phase1_detect: int  # 0 for w0, 1 for w1
    tau: int
    decision: Hypothesis
    sent_index: int | None = None
    decoded_index: int | None = None


def run_dmc_trial(cfg: DmcSchemeConfig, codebooks, reject: RejectSetSpec, hypothesis, rng,
                  test: NpTest | None = None) -> DmcTrialRecord:
    """One pass of the protocol.  ``codebooks`` is (C_U, C_W); C_W row 0 is the failure codeword."""
    cu, cw = codebooks
    if test is None:
        test = design_np_test(cfg.dmc.row(cfg.w0), cfg.dmc.row(cfg.w1), cfg.q, cfg.mu / 3)
    hypothesis = Hypothesis(hypothesis)
    if hypothesis == Hypothesis.H0:
        x, y = sample_joint(cfg.source, cfg.n, rng)
    else:
        x = sample_iid(cfg.source.x_marginal, cfg.n, rng)
        y = sample_iid(cfg.source.y_marginal, cfg.n, rng)
    coin = rng.random()
    in_s = int(reject.contains(x, coin))

    # phase 1
    q = cfg.q
    v1 = transmit(cfg.dmc, np.full(q, cfg.w1 if in_s else cfg.w0), rng)
    receiver = Phase1Receiver(test)
    if receiver.stop(v1, rng):
        return DmcTrialRecord(hypothesis, in_s, 1, q, Hypothesis.H1)

    # phase 2 transmitter
    jt_ux, jt_wv, jt_uy = cfg.typicality
    hits = jt_ux.rows(cu.entries, x)
    sent = int(hits[rng.integers(hits.size)]) + 1 if hits.size else 0
    v2 = transmit(cfg.dmc, cw.entries[sent], rng)
    tau = q + cfg.n_prime

    # phase 2 receiver: unique jointly typical channel codeword, then the typicality test on Y^n
    found = jt_wv.rows(cw.entries, v2, max_hits=2)
    if found.size != 1:
        return DmcTrialRecord(hypothesis, in_s, 0, tau, Hypothesis.H1, sent, None)
    m_hat = int(found[0])
    if m_hat == 0:
        return DmcTrialRecord(hypothesis, in_s, 0, tau, Hypothesis.H1, sent, 0)
    decision = Hypothesis.H0 if jt_uy.pair(cu[m_hat], y) else Hypothesis.H1
    return DmcTrialRecord(hypothesis, in_s, 0, tau, decision, sent, m_hat)


@dataclass(eq=False)
class DmcSimReport:
    trials_h0: int
    trials_h1: int
    alpha_hat: float
    beta_hat: float
    alpha_ci: tuple
    beta_ci: tuple
    empirical_exponent: float
    mean_tau_over_n: float
    tau_std_over_n: float
    phase1_fa_hat: float
    phase1_fa_ci: tuple
    phase1_fa_trials: int
    phase1_miss_hat: float
    phase1_miss_ci: tuple
    phase1_miss_trials: int
    continue_hat: float
    analytic_continue: float
    analytic_tau_over_n: float
    design_fa: float
    design_miss: float
    q: int
    n_prime: int
    n: int
    rate: float
    decode_wrong: int
    decode_fail: int
    phase2_trials: int
    taus_h0: np.ndarray = field(default=None, repr=False)
    taus_h1: np.ndarray = field(default=None, repr=False)

    def summary(self) -> dict:
        skip = {"taus_h0", "taus_h1"}
        return {k: v for k, v in self.__dict__.items() if k not in skip}


# columns of the per-trial integer record
_IN_S, _DET, _TAU, _DEC, _SENT, _DECODED = range(6)


def _dmc_chunk(args):
    scheme, hyp, start, stop = args
    cfg = scheme.cfg
    out = np.empty((stop - start, 6), dtype=np.int64)
    for j, i in enumerate(range(start, stop)):
        r = run_dmc_trial(cfg, (scheme.codebook_u, scheme.codebook_w), scheme.reject, hyp,
                          trial_rng(cfg.seed, hyp, i), test=scheme.test)
        out[j] = (r.phase1_input, r.phase1_detect, r.tau, int(r.decision),
                  -1 if r.sent_index is None else r.sent_index,
                  -1 if r.decoded_index is None else r.decoded_index)
    return out


def run_dmc_trials(cfg: DmcSchemeConfig, trials_per_hypothesis: int, *, workers: int = 1,
                   chunks: int | None = None) -> DmcSimReport:
    if trials_per_hypothesis < 1:
        raise DomainError("need at least one trial per hypothesis")
    scheme = build_dmc_scheme(cfg)
    pieces = chunks or max(1, workers) * 4
    jobs = [(scheme, h, a, b) for h in (Hypothesis.H0, Hypothesis.H1)
            for a, b in chunk_ranges(trials_per_hypothesis, pieces)]
    parts = run_chunks(_dmc_chunk, jobs, workers)
    half = len(parts) // 2
    r0 = np.concatenate(parts[:half])
    r1 = np.concatenate(parts[half:])
    both = np.concatenate([r0, r1])
    t = trials_per_hypothesis

    type1 = int((r0[:, _DEC] == Hypothesis.H1).sum())
    type2 = int((r1[:, _DEC] == Hypothesis.H0).sum())
    sent0 = both[:, _IN_S] == 0
    fa_k, fa_n = int(both[sent0, _DET].sum()), int(sent0.sum())
    miss_k, miss_n = int((both[~sent0, _DET] == 0).sum()), int((~sent0).sum())
    taus = both[:, _TAU]
    phase2 = both[:, _DET] == 0
    decoded = both[:, _DECODED]
    s = scheme.reject.mass
    p_cont = (1 - s) * (1 - scheme.test.false_alarm) + s * scheme.test.miss
    return DmcSimReport(
        trials_h0=t, trials_h1=t,
        alpha_hat=type1 / t, beta_hat=type2 / t,
        alpha_ci=wilson_interval(type1, t), beta_ci=wilson_interval(type2, t),
        empirical_exponent=empirical_exponent(type2 / t, t, cfg.n),
        mean_tau_over_n=float(taus.mean()) / cfg.n,
        tau_std_over_n=float(taus.std(ddof=1)) / cfg.n if taus.size > 1 else 0.0,
        phase1_fa_hat=fa_k / fa_n if fa_n else 0.0, phase1_fa_ci=wilson_interval(fa_k, fa_n),
        phase1_fa_trials=fa_n,
        phase1_miss_hat=miss_k / miss_n if miss_n else 0.0, phase1_miss_ci=wilson_interval(miss_k, miss_n),
        phase1_miss_trials=miss_n,
        continue_hat=float(phase2.mean()),
        analytic_continue=p_cont,
        analytic_tau_over_n=(cfg.q + cfg.n_prime * p_cont) / cfg.n,
        design_fa=scheme.test.false_alarm, design_miss=scheme.test.miss,
        q=cfg.q, n_prime=cfg.n_prime, n=cfg.n, rate=cfg.rate,
        decode_wrong=int((phase2 & (decoded >= 0) & (decoded != both[:, _SENT])).sum()),
        decode_fail=int((phase2 & (decoded < 0)).sum()),
        phase2_trials=int(phase2.sum()),
        taus_h0=r0[:, _TAU], taus_h1=r1[:, _TAU],
    )
