"""Single-letter optimal type-II exponents and DMC capacity.

The variable-length exponent is

    theta_eps(R) = max I(U;Y)  over P_{U|X}  subject to  (1 - eps) I(U;X) <= R,

with U - X - Y a Markov chain.  Over a DMC with stop-feedback the same
expression holds with R replaced by kappa * C.

The program is non-concave in P_{U|X}, so it is solved by multi-start
projected gradient ascent.  All restarts are advanced together as one
batched array.  Feasibility is restored after every step by blending the
iterate toward the constant channel with the same U-marginal, along which
I(U;X) is convex and reaches 0, so one bisection hits the constraint exactly.

Projected ascent zigzags once it reaches the constraint surface, so the best
few restarts are finished with SLSQP on the exact gradients and then
blended back onto the feasible set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, NonConvergence
from .info import (
    AuxChannel,
    JointSource,
    Pmf,
    binary_entropy,
    binary_entropy_inv,
    entropy,
    mutual_information,
    star,
)

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class ExponentQuery:
    source: JointSource
    rate: float
    epsilon: float = 0.0
    u_cardinality: int | None = None

    def __post_init__(self):
        if not self.rate >= 0:
            raise DomainError(f"rate must be >= 0, got {self.rate}")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.u_cardinality is not None and self.u_cardinality < 1:
            raise DomainError("u_cardinality must be positive")

    @property
    def u_size(self) -> int:
        if self.u_cardinality is None:
            return self.source.shape[0] + 1
        return self.u_cardinality

    @property
    def budget(self) -> float:
        """Largest admissible I(U;X), i.e. R / (1 - eps)."""
        return self.rate / (1.0 - self.epsilon)


@dataclass(frozen=True)
class ExponentResult:
    theta: float
    optimizer: AuxChannel
    iux: float
    iuy: float
    constraint_slack: float
    converged_restarts: int = 0


# --------------------------------------------------------------------------
# channels and capacity


@dataclass(frozen=True, eq=False)
class Dmc:
    """Discrete memoryless channel; row w of ``transition`` is Gamma(. | w)."""

    transition: np.ndarray

    def __init__(self, transition):
        t = np.asarray(transition, dtype=float)
        if t.ndim != 2:
            raise DomainError("channel law must be a 2-d table")
        rows = np.vstack([Pmf(r).probs for r in t])
        rows.setflags(write=False)
        object.__setattr__(self, "transition", rows)

    @property
    def input_size(self):
        return self.transition.shape[0]

    @property
    def output_size(self):
        return self.transition.shape[1]

    def row(self, w) -> Pmf:
        return Pmf(self.transition[w])

    @cached_property
    def _ba(self):
        return blahut_arimoto(self.transition)

    @property
    def capacity(self) -> float:
        return self._ba[0]

    @property
    def capacity_achieving_input(self) -> Pmf:
        return Pmf(self._ba[1])

    @classmethod
    def bsc(cls, p):
        return cls([[1 - p, p], [p, 1 - p]])

    @classmethod
    def bec(cls, e):
        return cls([[1 - e, e, 0.0], [0.0, e, 1 - e]])

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))

    def __repr__(self):
        return f"Dmc({self.transition.tolist()})"


def _row_divergences(G, q):
    """D(G_w || q) in bits for every row w."""
    out = np.zeros(G.shape[0])
    for w, row in enumerate(G):
        m = row > 0
        out[w] = np.sum(row[m] * np.log2(row[m] / q[m]))
    return out


def blahut_arimoto(transition, tol=1e-9, max_iter=100_000):
    """Capacity (bits/use) and a capacity-achieving input law.

    Stops when the upper bound max_w D(G_w||q) and the lower bound I(W;V)
    are within ``tol``.
    """
    G = np.asarray(transition, dtype=float)
    p = np.full(G.shape[0], 1.0 / G.shape[0])
    for _ in range(int(max_iter)):
        q = p @ G
        d = _row_divergences(G, q)
        lower = float(p @ d)
        upper = float(d.max())
        if upper - lower <= tol:
            return max(lower, 0.0), p
        p = p * np.exp2(d - upper)
        p /= p.sum()
    raise NonConvergence(f"Blahut-Arimoto did not reach tolerance {tol} in {max_iter} iterations")


def capacity(dmc) -> float:
    if not isinstance(dmc, Dmc):
        dmc = Dmc(dmc)
    return dmc.capacity


# --------------------------------------------------------------------------
# closed forms


def binary_example_exponent(alpha: float, rate: float, epsilon: float) -> float:
    """DSBS(alpha) exponent 1 - h_b(h_b^{-1}(1 - R/(1-eps)) * alpha).

    R/(1-eps) is clamped to [0, 1]; above 1 the rate constraint is inactive
    and the value saturates at 1 - h_b(alpha) = I(X;Y).
    """
    if not 0.0 <= alpha < 0.5:
        raise DomainError(f"alpha must lie in [0, 1/2), got {alpha}")
    if rate < 0 or not 0.0 <= epsilon < 1.0:
        raise DomainError("need rate >= 0 and 0 <= epsilon < 1")
    r = min(max(rate / (1.0 - epsilon), 0.0), 1.0)
    return 1.0 - binary_entropy(star(binary_entropy_inv(1.0 - r), alpha))


def gaussian_example_exponent(rho: float, rate: float, epsilon: float) -> float:
    """Jointly Gaussian exponent 1/2 log2 1/(1 - rho^2 + rho^2 2^(-2R/(1-eps)))."""
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [0, 1], got {rho}")
    if rate < 0 or not 0.0 <= epsilon < 1.0:
        raise DomainError("need rate >= 0 and 0 <= epsilon < 1")
    if rho == 0.0:
        return 0.0
    denom = 1.0 - rho * rho + rho * rho * 2.0 ** (-2.0 * rate / (1.0 - epsilon))
    return 0.5 * math.log2(1.0 / denom)


# --------------------------------------------------------------------------
# batched objective and gradients


@dataclass
class _Problem:
    px: np.ndarray  # (X,)
    A: np.ndarray  # P_{Y|X}, (X, Y)
    py: np.ndarray
    budget: float

    def measures(self, W):
        """I(U;X) and I(U;Y) in bits for a batch W of shape (K, X, U)."""
        pxu = self.px[None, :, None] * W
        pu = pxu.sum(axis=1)
        puy = np.einsum("kxu,xy->kuy", pxu, self.A)
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(pxu > 0, pxu * np.log2(W / pu[:, None, :]), 0.0)
            ty = np.where(puy > 0, puy * np.log2(puy / (pu[:, :, None] * self.py[None, None, :])), 0.0)
        iux = np.maximum(tx.sum(axis=(1, 2)), 0.0)
        iuy = np.maximum(ty.sum(axis=(1, 2)), 0.0)
        return iux, iuy

    def iux(self, W):
        pxu = self.px[None, :, None] * W
        pu = pxu.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(pxu > 0, pxu * np.log2(W / pu[:, None, :]), 0.0)
        return np.maximum(tx.sum(axis=(1, 2)), 0.0)

    def gradients(self, W):
        u = W.shape[2]
        Ws = (1.0 - _LOG_FLOOR) * W + _LOG_FLOOR / u
        pxu = self.px[None, :, None] * Ws
        pu = pxu.sum(axis=1)
        puy = np.einsum("kxu,xy->kuy", pxu, self.A)
        y_given_u = puy / pu[:, :, None]
        gx = self.px[None, :, None] * np.log2(Ws / pu[:, None, :])
        gy = self.px[None, :, None] * np.einsum("xy,kuy->kxu", self.A, np.log2(y_given_u))
        return gy, gx


def _project_rows(V):
    """Euclidean projection of every last-axis row of V onto the probability simplex."""
    shape = V.shape
    v = V.reshape(-1, shape[-1])
    s = -np.sort(-v, axis=1)
    css = np.cumsum(s, axis=1) - 1.0
    idx = np.arange(1, v.shape[1] + 1)
    cond = s - css / idx > 0
    rho = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    out = np.maximum(v - theta[:, None], 0.0)
    out /= out.sum(axis=1, keepdims=True)
    return out.reshape(shape)


def _restore(prob: _Problem, W, steps=48):
    """Blend infeasible rows of the batch toward their constant channel until I(U;X) <= budget."""
    g = prob.iux(W)
    bad = g > prob.budget
    if not np.any(bad):
        return W
    Wb = W[bad]
    const = np.broadcast_to((prob.px[None, :, None] * Wb).sum(axis=1)[:, None, :], Wb.shape)
    lo = np.zeros(Wb.shape[0])
    hi = np.ones(Wb.shape[0])
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        Wm = (1 - mid)[:, None, None] * Wb + mid[:, None, None] * const
        feas = prob.iux(Wm) <= prob.budget
        hi = np.where(feas, mid, hi)
        lo = np.where(feas, lo, mid)
    out = W.copy()
    out[bad] = (1 - hi)[:, None, None] * Wb + hi[:, None, None] * const
    return out


def _ascend(prob: _Problem, W, tol, window, max_iter, eta0=0.5):
    """Batched feasible-direction ascent; returns final W, objective values, convergence flags."""
    k = W.shape[0]
    W = _restore(prob, W)
    _, f = prob.measures(W)
    eta = np.full(k, eta0)
    converged = np.zeros(k, dtype=bool)
    history = [f.copy()]
    for it in range(max_iter):
        live = ~converged
        if not np.any(live):
            break
        Wl = W[live]
        gy, gx = prob.gradients(Wl)
        gy = gy - gy.mean(axis=2, keepdims=True)
        gx = gx - gx.mean(axis=2, keepdims=True)
        g_now = prob.iux(Wl)
        active = g_now >= prob.budget - 1e-9
        gg = np.einsum("kxu,kxu->k", gx, gx)
        fg = np.einsum("kxu,kxu->k", gy, gx)
        c = np.where(active & (gg > 0) & (fg > 0), fg / np.where(gg > 0, gg, 1.0), 0.0)
        d = gy - c[:, None, None] * gx
        cand = _project_rows(Wl + eta[live][:, None, None] * d)
        cand = _restore(prob, cand)
        _, f_new = prob.measures(cand)
        better = f_new > f[live]
        idx = np.flatnonzero(live)
        acc = idx[better]
        W[acc] = cand[better]
        f[acc] = f_new[better]
        eta[acc] = np.minimum(eta[acc] * 1.5, 1e3)
        eta[idx[~better]] *= 0.5
        history.append(f.copy())
        if len(history) > window:
            old = history[-window - 1]
            done = (f - old < tol) | (eta < 1e-15)
            converged |= done
            history = history[-window - 1 :]
    return W, f, converged


def _problem(source: JointSource, budget: float) -> _Problem:
    px = source.x_marginal.probs
    return _Problem(px=px, A=source.y_given_x, py=source.y_marginal.probs, budget=budget)


def _result(query: ExponentQuery, rows, converged) -> ExponentResult:
    aux = AuxChannel(np.clip(rows, 0.0, None))
    iux = mutual_information(aux.joint_ux(query.source))
    iuy = mutual_information(aux.joint_uy(query.source))
    slack = query.rate - (1.0 - query.epsilon) * iux
    return ExponentResult(theta=iuy, optimizer=aux, iux=iux, iuy=iuy,
                          constraint_slack=slack, converged_restarts=int(converged))


def _embedding(nx, nu):
    W = np.zeros((nx, nu))
    W[np.arange(nx), np.minimum(np.arange(nx), nu - 1)] = 1.0
    return W


def _slsqp(prob: _Problem, W0, max_iter=500):
    """Local refinement of one channel; returns (W, I(U;Y), success)."""
    nx, nu = W0.shape
    shape = (1, nx, nu)

    def f(v):
        return -prob.measures(v.reshape(shape))[1][0]

    def fj(v):
        return -prob.gradients(v.reshape(shape))[0].ravel()

    def g(v):
        return prob.budget - prob.iux(v.reshape(shape))[0]

    def gj(v):
        return -prob.gradients(v.reshape(shape))[1].ravel()

    rows = np.kron(np.eye(nx), np.ones(nu))
    cons = [{"type": "ineq", "fun": g, "jac": gj},
            {"type": "eq", "fun": lambda v: rows @ v - 1.0, "jac": lambda v: rows}]
    res = minimize(f, W0.ravel(), jac=fj, method="SLSQP", bounds=[(0.0, 1.0)] * (nx * nu),
                   constraints=cons, options={"maxiter": max_iter, "ftol": 1e-14})
    W = np.clip(res.x.reshape(shape), 0.0, None)
    W /= W.sum(axis=2, keepdims=True)
    W = _restore(prob, W)
    return W[0], prob.measures(W)[1][0], bool(res.success)


def solve_vl_exponent(query, rate=None, epsilon=0.0, *, u_cardinality=None, restarts=32,
                      seed=0, tol=1e-7, window=50, max_iter=600, polish=4):
    """Maximize I(U;Y) subject to (1 - eps) I(U;X) <= R.

    Accepts an :class:`ExponentQuery` or ``(source, rate, epsilon)``.
    The ``polish`` best restarts are refined with SLSQP.  Raises
    NonConvergence if neither the ascent stopping rule (gain below ``tol``
    over ``window`` iterations) nor any refinement succeeded.
    """
    if not isinstance(query, ExponentQuery):
        query = ExponentQuery(query, rate, epsilon, u_cardinality)
    source = query.source
    nx = source.shape[0]
    nu = query.u_size
    b = query.budget

    ixy = mutual_information(source)
    if b <= 0.0 or ixy <= 0.0:
        W = np.zeros((nx, nu))
        W[:, 0] = 1.0
        return _result(query, W, 1)
    emb = _embedding(nx, nu)
    if (1.0 - query.epsilon) * entropy(source.x_marginal) <= query.rate and nu >= nx:
        # U = X is feasible and attains the data-processing cap I(X;Y)
        return _result(query, emb, 1)

    prob = _problem(source, b)
    rng = np.random.default_rng(seed)
    const = np.zeros((nx, nu))
    const[:, 0] = 1.0
    starts = [emb, const]
    starts.extend(rng.dirichlet(np.ones(nu), size=(restarts, nx)))
    W0 = np.array(starts, dtype=float)
    W, f, conv = _ascend(prob, W0, tol, window, max_iter)
    # stable sort: lowest restart index wins ties
    order = np.argsort(-f, kind="stable")[: max(1, polish)]
    best_W, best_f, ok = W[order[0]], f[order[0]], bool(conv.any())
    for k in order:
        Wk, fk, success = _slsqp(prob, W[k])
        ok |= success
        if fk > best_f:
            best_W, best_f = Wk, fk
    if not ok:
        raise NonConvergence(f"none of {len(W0)} restarts converged in {max_iter} iterations")
    return _result(query, best_W, conv.sum())


def solve_fl_exponent(source, rate, **opts) -> ExponentResult:
    """Fixed-length exponent: the variable-length problem at epsilon = 0."""
    return solve_vl_exponent(ExponentQuery(source, rate, 0.0, opts.pop("u_cardinality", None)), **opts)


def solve_dmc_exponent(source, dmc, kappa, epsilon, **opts) -> ExponentResult:
    """Exponent over a DMC with stop-feedback; depends on the channel only through C."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if not isinstance(dmc, Dmc):
        dmc = Dmc(dmc)
    return solve_vl_exponent(ExponentQuery(source, kappa * dmc.capacity, epsilon,
                                           opts.pop("u_cardinality", None)), **opts)
