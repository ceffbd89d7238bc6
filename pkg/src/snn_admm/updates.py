"""Closed-form block minimizers of the relaxed Lagrangian.

Every function here reads the current state and *returns* the new block; the
caller decides when to write it back (the trainer does so immediately, which
gives the Gauss-Seidel sweep).  Time indices are 0-based, so "t < T" of the
derivation is ``t < T - 1`` here.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .admm_core import primal_residual_matrix
from .errors import InvalidInputError, NumericalFailure
from .model import heaviside


# ----------------------------------------------------------------------------
# weights

def weight_stats(state, l):
    """Sufficient statistics ``(N, D)`` of the layer-``l`` weight regression.

    ``N = sum_t x_t a_{t}^T`` (plus ``lam a_{L-1,T}^T / rho`` for the output
    layer) and ``D = sum_t a_t a_t^T`` with ``a`` the layer-``l-1`` activity.
    """
    if not 1 <= l <= state.L:
        raise InvalidInputError(f"layer index {l} out of range 1..{state.L}")
    net = state.net
    prev = state.act(l - 1)
    z = state.z[l - 1]
    x = z.copy()
    x[1:] -= net.delta * z[:-1]
    if l < state.L:
        x[1:] += net.theta * state.a[l - 1][:-1]
    N = np.einsum("tim,tjm->ij", x, prev)
    D = np.einsum("tim,tjm->ij", prev, prev)
    if l == state.L:
        N += (state.lam @ prev[-1].T) / state.hyper.rho
    return N, D


def solve_weights(N, D, ridge):
    """``N (D + ridge I)^{-1}`` via a Cholesky solve."""
    n = D.shape[0]
    G = D + ridge * np.eye(n)
    try:
        c, low = scipy.linalg.cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Gram matrix is not positive definite (ridge={ridge})") from exc
    diag = np.abs(np.diag(c))
    if diag.min() ** 2 <= n * np.finfo(float).eps * diag.max() ** 2:
        raise NumericalFailure(f"Gram matrix is numerically singular (ridge={ridge})")
    return scipy.linalg.cho_solve((c, low), N.T).T


def update_weights_hidden(state, l):
    if l >= state.L:
        raise InvalidInputError("update_weights_hidden is for layers 1..L-1")
    N, D = weight_stats(state, l)
    return solve_weights(N, D, state.hyper.ridge)


def update_weights_last(state, y=None):
    # y does not enter the weight update; accepted for call-site symmetry
    N, D = weight_stats(state, state.L)
    return solve_weights(N, D, state.hyper.ridge)


# ----------------------------------------------------------------------------
# pre-activations

def _check_time(state, t):
    if not 0 <= t < state.net.T:
        raise InvalidInputError(f"time index {t} out of range 0..{state.net.T - 1}")


def update_preactivation_hidden(state, l, t):
    """Quadratic minimizer for ``z_{l,t}``, hidden layer, ignoring the Heaviside term."""
    if not 1 <= l < state.L:
        raise InvalidInputError(f"hidden layer index {l} out of range 1..{state.L - 1}")
    _check_time(state, t)
    net = state.net
    W = state.weights[l - 1]
    prev = state.act(l - 1)
    z = state.z[l - 1]
    a = state.a[l - 1]
    q = W @ prev[t]
    if t > 0:
        q += net.delta * z[t - 1] - net.theta * a[t - 1]
    if t == net.T - 1:
        return q
    r_next = z[t + 1] - W @ prev[t + 1]
    return (q + net.delta * (r_next + net.theta * a[t])) / (1.0 + net.delta ** 2)


def update_preactivation_last(state, t, y):
    """Exact minimizer for ``z_{L,t}`` (loss and dual terms enter at the last steps)."""
    _check_time(state, t)
    net = state.net
    rho = state.hyper.rho
    T, delta = net.T, net.delta
    W = state.weights[-1]
    prev = state.act(state.L - 1)
    z = state.z[-1]
    num = rho * (W @ prev[t])
    if t > 0:
        num += rho * delta * z[t - 1]
    den = rho
    if t < T - 1:
        num += rho * delta * (z[t + 1] - W @ prev[t + 1])
        den += rho * delta ** 2
    else:
        num += 2.0 * np.asarray(y, dtype=float) - state.lam
        den += 2.0
    if t == T - 2:
        num += delta * state.lam
    return num / den


# ----------------------------------------------------------------------------
# Heaviside commutation

@dataclass
class EntryCostContext:
    """Per-entry restriction of the Lagrangian to one hidden potential.

    Fields may be scalars or arrays of matching shape (evaluation broadcasts).
    """

    quad_coeff: object
    quad_center: object
    sigma: float
    a_entry: object
    theta: float


def entry_cost(v, ctx):
    """``quad_coeff (v - center)^2 + sigma/2 (a - H(v))^2``, up to an additive constant."""
    v = np.asarray(v, dtype=float)
    h = (v > ctx.theta).astype(float)
    return ctx.quad_coeff * (v - ctx.quad_center) ** 2 + 0.5 * ctx.sigma * (ctx.a_entry - h) ** 2


def hidden_entry_context(state, l, t, center):
    """Cost context for the entries of ``z_{l,t}`` around the quadratic minimizer ``center``."""
    delta = state.net.delta
    coeff = 0.5 * state.hyper.rho * (1.0 + (delta ** 2 if t < state.net.T - 1 else 0.0))
    return EntryCostContext(quad_coeff=coeff, quad_center=center, sigma=state.hyper.sigma,
                            a_entry=state.a[l - 1][t], theta=state.net.theta)


def z_minimizer(z, ctx, epsilon):
    """Decide entrywise whether moving across the threshold lowers the cost.

    Spiking entries drop to ``theta`` when that is no worse; silent entries
    jump to ``theta + epsilon`` only when that is strictly better.
    """
    z = np.asarray(z, dtype=float)
    theta = ctx.theta
    c_z = entry_cost(z, ctx)
    c_off = entry_cost(np.full_like(z, theta), ctx)
    c_on = entry_cost(np.full_like(z, theta + epsilon), ctx)
    above = z > theta
    out = z.copy()
    out[above & (c_off <= c_z)] = theta
    out[~above & (c_on < c_z)] = theta + epsilon
    return out


# ----------------------------------------------------------------------------
# post-activations

class ActivationSolver:
    """Cholesky factors of the two system matrices used for ``a_{l,t}``.

    The matrix ``rho W_{l+1}^T W_{l+1} + (sigma + rho theta^2 [t < T-1]) I``
    only depends on t through the indicator, so one factor serves every
    ``t < T-1`` and another serves ``t = T-1``.
    """

    def __init__(self, state, l):
        if not 1 <= l < state.L:
            raise InvalidInputError(f"hidden layer index {l} out of range 1..{state.L - 1}")
        rho, sigma, theta = state.hyper.rho, state.hyper.sigma, state.net.theta
        W = state.weights[l]
        G = rho * (W.T @ W)
        eye = np.eye(G.shape[0])
        try:
            self._mid = scipy.linalg.cho_factor(G + (sigma + rho * theta ** 2) * eye, lower=True)
            self._end = scipy.linalg.cho_factor(G + sigma * eye, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"activation system for layer {l} is not positive definite") from exc
        self.l = l
        self.T = state.net.T

    def solve(self, t, rhs):
        factor = self._mid if t < self.T - 1 else self._end
        return scipy.linalg.cho_solve(factor, rhs)


def update_postactivation(state, l, t, solver=None):
    """Unclipped minimizer for ``a_{l,t}`` (uses ``lam`` when ``l = L-1`` and ``t = T-1``)."""
    if solver is None:
        solver = ActivationSolver(state, l)
    _check_time(state, t)
    net = state.net
    rho, sigma = state.hyper.rho, state.hyper.sigma
    T, delta, theta = net.T, net.delta, net.theta
    W_next = state.weights[l]
    z_next = state.z[l]
    v = z_next[t].copy()
    if t > 0:
        v -= delta * z_next[t - 1]
        if l + 1 < state.L:
            v += theta * state.a[l][t - 1]
    rhs = rho * (W_next.T @ v)
    if l + 1 == state.L and t == T - 1:
        rhs += W_next.T @ state.lam
    if t < T - 1:
        z = state.z[l - 1]
        w_next = z[t + 1] - delta * z[t] - state.weights[l - 1] @ state.act(l - 1)[t + 1]
        rhs -= rho * theta * w_next
    rhs += sigma * heaviside(state.z[l - 1][t], theta)
    return solver.solve(t, rhs)


def clip_activation(a):
    return np.clip(a, 0.0, 1.0)


# ----------------------------------------------------------------------------
# dual

def update_dual(state):
    return state.lam + state.hyper.rho * primal_residual_matrix(state)
