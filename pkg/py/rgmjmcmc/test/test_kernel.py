import unittest
import itertools

import numpy as np
from scipy.stats import binom, chisquare

from rgmjmcmc.genetic import Population
from rgmjmcmc.inference import Dataset, Posterior, InferenceConfig
from rgmjmcmc.enumeration import enumerate_posterior
from rgmjmcmc.kernel import (LocalKernelConfig, large_jump, local_optimize, randomize, hamming,
                             log_qr_ratio, log_qr_density, log_qr_ratio_exact, mask_model)
from rgmjmcmc.errors import ConfigError, ProposalError


class ForcedFlips(object):
    """RNG stub whose uniform draws flip the given positions."""

    def __init__(self, positions):
        self.positions = positions

    def random(self, size=None):
        values = np.ones(size)
        values[list(self.positions)] = 0.
        return values


def all_masks(s, max_size):
    for bits in itertools.product([False, True], repeat=s):
        if sum(bits) <= max_size:
            yield np.array(bits)


class TestKernel(unittest.TestCase):

    def test_config(self):
        print("Testing local kernel configuration")
        LocalKernelConfig().validate()
        with self.assertRaises(ConfigError):
            LocalKernelConfig(rho_r=0.5).validate()
        with self.assertRaises(ConfigError):
            LocalKernelConfig(local_move='annealing').validate()
        with self.assertRaises(ConfigError):
            LocalKernelConfig(k_local=-1).validate()

    def test_large_jump(self):
        print("Testing large jump")
        rng = np.random.default_rng(0)
        mask = np.array([True, False, True, False, False, True])
        assert(np.all(large_jump(mask, LocalKernelConfig(rho_jump=0.), rng) == mask))
        assert(np.all(large_jump(mask, LocalKernelConfig(rho_jump=1.), rng, max_size=6) == ~mask))
        for _ in range(100):
            out = large_jump(mask, LocalKernelConfig(rho_jump=0.5), rng, max_size=2)
            assert(out.sum() <= 2)

    def test_randomize(self):
        print("Testing randomization")
        rng = np.random.default_rng(1)
        mask = np.array([True, False, True, False])
        cfg = LocalKernelConfig(rho_r=1e-9)
        for _ in range(1000):
            assert(np.all(randomize(mask, cfg, rng) == mask))

        out = randomize(np.zeros(3, dtype=bool), cfg, ForcedFlips([0, 2]))
        assert(out.tolist() == [True, False, True])
        assert(hamming(out, np.zeros(3, dtype=bool)) == 2)

        cfg = LocalKernelConfig(rho_r=0.3)
        for _ in range(200):
            assert(randomize(np.ones(6, dtype=bool), cfg, rng, max_size=3).sum() <= 3)
        with self.assertRaises(ProposalError):
            randomize(np.zeros(3, dtype=bool), LocalKernelConfig(max_retries=3), ForcedFlips([0, 1, 2]),
                      max_size=1)

    def test_randomize_distance_distribution(self):
        print("Testing randomization distance distribution")
        rng = np.random.default_rng(2)
        s, rho, ndraws = 6, 0.3, 10000
        mask = np.array([True, False]*3)
        cfg = LocalKernelConfig(rho_r=rho)
        d = np.array([hamming(randomize(mask, cfg, rng), mask) for _ in range(ndraws)])
        observed = np.bincount(d, minlength=s+1)
        expected = binom.pmf(np.arange(s+1), s, rho)*ndraws
        expected *= observed.sum()/expected.sum()
        assert(chisquare(observed, expected).pvalue > 0.001)

    def test_log_qr_ratio(self):
        print("Testing randomization log ratio")
        a = np.array([True, False, True])
        b = np.array([False, False, True])
        c = np.array([True, True, False])
        assert(log_qr_ratio(a, a, b, b, 0.1) == 0.)
        assert(np.isclose(log_qr_ratio(a, b.copy(), c, c, 0.1), np.log(0.1)))
        assert(np.isclose(log_qr_ratio(a, ~a, c, c, 0.1), 3*np.log(0.1)))
        m, mk = np.array([True, True, False]), np.array([False, False, False])
        assert(np.isclose(log_qr_ratio(m, mk, c, c, 0.1), -4.605170185988091))
        assert(log_qr_ratio(None, a, b, b, 0.1) == -np.inf)
        assert(log_qr_ratio_exact(None, a, b, b, 0.1) == -np.inf)
        for args in ((a, b, c, a), (b, c, a, a), (c, c, b, a)):
            assert(np.isclose(log_qr_ratio(*args, 0.05), -log_qr_ratio(*args[2:], *args[:2], 0.05)))
            assert(np.isclose(log_qr_ratio_exact(*args, 0.05, 2, 5),
                              -log_qr_ratio_exact(*args[2:], *args[:2], 0.05, 2, 5)))

    def test_log_qr_density(self):
        print("Testing exact randomization density")
        rho = 0.2
        mk = np.array([True, True, False, False])
        #- no size cap
        total = sum(np.exp(log_qr_density(m, mk, rho)) for m in all_masks(4, 4))
        assert(np.abs(total - 1.) < 1e-12)
        #- size cap 2, 3 draws at most: the failure probability is the complement
        z = sum(rho**hamming(m, mk)*(1-rho)**(4-hamming(m, mk)) for m in all_masks(4, 2))
        total = sum(np.exp(log_qr_density(m, mk, rho, 2, 3)) for m in all_masks(4, 2))
        assert(np.abs(total - (1. - (1.-z)**3)) < 1e-12)
        assert(log_qr_density(np.ones(4, dtype=bool), mk, rho, 2, 3) == -np.inf)

    def test_local_optimize(self):
        print("Testing local optimization")
        rng = np.random.default_rng(3)
        n = 100
        X = rng.normal(size=(n, 3))
        y = X[:, 0] + X[:, 1] + 0.3*rng.normal(size=n)
        d = Dataset(X, y)
        pop = Population(d.covariates())
        posterior = Posterior(d, InferenceConfig())

        start = np.zeros(3, dtype=bool)
        assert(np.all(local_optimize(start, pop, posterior, LocalKernelConfig(k_local=0)) == start))

        exact = enumerate_posterior(d.covariates(), 3, d)
        mode = exact.identities[int(np.argmax(exact.probabilities))]
        #- the start is archived already, each move evaluates at most 3 neighbours
        posterior.log_target(mask_model(pop, start))
        before = len(posterior.archive)
        out = local_optimize(start, pop, posterior, LocalKernelConfig(k_local=15), max_size=3)
        assert(tuple(pop.keys[i] for i in np.flatnonzero(out)) == mode)
        assert(len(posterior.archive) - before <= 15*3)

        cfg = LocalKernelConfig(k_local=30, local_move='metropolis')
        for _ in range(20):
            out = local_optimize(start, pop, posterior, cfg, rng, max_size=1)
            assert(out.sum() <= 1)


if __name__ == '__main__':
    unittest.main()
