"""Shared oracles for the test modules."""

import numpy as np

from cbflearn import Dataset, MLPRegressor, grad_h, residual_oracle
from cbflearn.learning import mlp_gradient, nominal_hdot


def fd_relative_error(net: MLPRegressor, x, eps=1e-6) -> float:
    """Backprop vs. central finite differences of the scalar output."""
    gw, gb = mlp_gradient(net, x, np.ones((1, 1)))
    analytic = np.concatenate([a.ravel() for pair in zip(gw, gb) for a in pair])
    theta = net.flat()
    fd = np.empty_like(theta)
    for k in range(len(theta)):
        step = np.zeros_like(theta)
        step[k] = eps
        fd[k] = (net.with_flat(theta + step).forward(x)[0, 0] - net.with_flat(theta - step).forward(x)[0, 0]) / (2 * eps)
    return float(np.linalg.norm(analytic - fd) / np.linalg.norm(fd))


def random_net(sizes, rng) -> MLPRegressor:
    net = MLPRegressor.initialize(sizes, rng)
    # nonzero biases so every parameter gets exercised
    return net.with_flat(net.flat() + 0.3 * rng.normal(size=net.n_params()))


def synthetic_dataset(bf, nom, beta, n=1000, seed=0) -> Dataset:
    """Labels = nominal hdot + beta, i.e. a(x) = 0 and b(x) = beta."""
    rng = np.random.default_rng(seed)
    states = rng.uniform([-1, -1, -0.3, -0.9], [1, 1, 0.3, 0.9], size=(n, 4))
    inputs = rng.uniform(-50, 50, size=n)
    d = Dataset(states, inputs, np.zeros(n), np.ones(n, dtype=int), np.arange(n) * 0.01)
    d.labels = nominal_hdot(d, bf, nom) + beta
    return d


class OracleEstimator:
    """Exact projections of the model gap onto grad h."""

    def __init__(self, bf, true_p, nom_p):
        self.bf, self.true_p, self.nom_p = bf, true_p, nom_p

    def corrections(self, x):
        r = residual_oracle(self.true_p, self.nom_p, x)
        g = grad_h(self.bf, x)
        return float(g @ r.A_mat[:, 0]), float(g @ r.b_vec)
