import numpy as np
import pytest

from snn_admm import AdmmHyperparams, NetworkConfig
from snn_admm.admm_core import AdmmState, build_x
from snn_admm.data import make_targets, synthetic_task


def random_state(rng, sizes=(3, 3, 3), T=3, M=4, delta=0.95, theta=1.0,
                 hyper=None, lam_scale=1.0):
    """Arbitrary (infeasible) state with well-conditioned Gram matrices."""
    hyper = hyper or AdmmHyperparams(ridge=0.0)
    net = NetworkConfig(sizes, delta, theta, T)
    while True:
        inputs = (rng.random((T, sizes[0], M)) < 0.5).astype(float)
        flat = inputs.transpose(1, 0, 2).reshape(sizes[0], -1)
        if np.linalg.cond(flat @ flat.T) < 1e3:
            break
    state = AdmmState(
        net=net, hyper=hyper, inputs=inputs,
        weights=[rng.normal(size=s) for s in net.weight_shapes()],
        z=[rng.normal(size=(T, n, M)) for n in sizes[1:]],
        a=[rng.random((T, n, M)) for n in sizes[1:-1]],
        lam=lam_scale * rng.normal(size=(sizes[-1], M)))
    y = rng.normal(size=(sizes[-1], M))
    return state, y


def lagrangian_oracle(state, y):
    """Term-by-term loop evaluation of the relaxed Lagrangian (1-based layers, 0-based time)."""
    net, hp = state.net, state.hyper
    L, T = net.L, net.T
    d, th = net.delta, net.theta
    W = lambda l: state.weights[l - 1]
    z = lambda l, t: state.z[l - 1][t]
    a = lambda l, t: state.inputs[t] if l == 0 else state.a[l - 1][t]
    sq = lambda m: float(np.sum(m ** 2))
    val = sq(z(L, T - 1) - y)
    for l in range(1, L + 1):
        val += hp.rho / 2 * sq(z(l, 0) - W(l) @ a(l - 1, 0))
    for l in range(1, L):
        for t in range(1, T):
            val += hp.rho / 2 * sq(z(l, t) - d * z(l, t - 1) - W(l) @ a(l - 1, t) + th * a(l, t - 1))
    for t in range(1, T):
        val += hp.rho / 2 * sq(z(L, t) - d * z(L, t - 1) - W(L) @ a(L - 1, t))
    for l in range(1, L):
        for t in range(T):
            val += hp.sigma / 2 * sq(a(l, t) - (z(l, t) > th))
    last = z(L, T - 1) - W(L) @ a(L - 1, T - 1)
    if T > 1:
        last = last - d * z(L, T - 2)
    val += float(np.sum(last * state.lam))
    return val


def lstsq_oracle(state, l, ridge):
    """Stacked dense least squares for W_l (dual term folded into the last target)."""
    prev = state.act(l - 1)
    x = build_x(state, l).copy()
    if l == state.L:
        x[-1] += state.lam / state.hyper.rho
    A = np.concatenate(list(prev), axis=1)    # n_{l-1} x (T M)
    X = np.concatenate(list(x), axis=1)
    n = A.shape[0]
    lhs = np.vstack([A.T, np.sqrt(ridge) * np.eye(n)])
    rhs = np.vstack([X.T, np.zeros((n, X.shape[0]))])
    return np.linalg.lstsq(lhs, rhs, rcond=None)[0].T


def fd_gradient(f, X, h=1e-5):
    """Central differences of ``f()`` w.r.t. every entry of the array ``X`` (modified in place)."""
    g = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        x0 = X[idx]
        X[idx] = x0 + h
        fp = f()
        X[idx] = x0 - h
        fm = f()
        X[idx] = x0
        g[idx] = (fp - fm) / (2 * h)
    return g


def small_task(seed, separation=0.5):
    """The desk-scale classification instance: 4 classes, M=40, n_0=64, T=20."""
    rng = np.random.default_rng(seed)
    ds = synthetic_task(4, 10, 64, 20, separation, rng)
    y = make_targets(ds.labels, 4)
    net = NetworkConfig((64, 32, 4), 0.95, 1.0, 20)
    return ds, y, net


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = []


def report(number, ok, detail):
    """Record one acceptance line (shown in the terminal summary) and assert it."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
