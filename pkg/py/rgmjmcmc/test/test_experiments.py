import unittest
import os

import numpy as np

from rgmjmcmc.features import leaf, product, unary
from rgmjmcmc.experiments import (GroundTruth, compute_metrics, metrics_table, gen_mass_data,
                                  gen_kepler_data, gen_logic_data, generate, ground_truth,
                                  logic_trees, run_experiment, LOGIC_TREES, LOGIC_EFFECT,
                                  LOGIC_INTERCEPT)
from rgmjmcmc.runner import RunConfig
from rgmjmcmc.errors import ConfigError
from rgmjmcmc.test import long_tests


class TestExperiments(unittest.TestCase):

    def test_mass_data(self):
        print("Testing the planetary mass data set")
        d, truth = gen_mass_data(n=500, sigma=0., seed=1)
        assert(d.names == ['Rp', 'RhoP', 'P', 'Mh', 'Rh', 'Th', 'Teq', 'Ecc', 'Dist'])
        assert(d.response == 'Mp')
        rp, rho = leaf(0, 'Rp'), leaf(1, 'RhoP')
        law = product(rp, rp, rp, rho)
        assert(truth.keys() == {'(Rp)^3*RhoP', '(Rp)^2*RhoP*Rp', 'RhoP*Rp*Rp*Rp'})
        assert(len(truth.targets) == 1)
        #- every equivalent form gives the same column
        for form in (product(unary('cube', rp), rho), product(unary('square', rp), rho, rp)):
            assert(form.key in truth.keys())
            assert(np.allclose(d.column(form), d.column(law)))
        assert(np.allclose(d.column(law), d.y))

        d, _ = gen_mass_data(n=500, sigma=0.05, seed=1)
        residual = d.y - d.column(law)
        r2 = 1. - np.sum(residual**2)/np.sum((d.y - d.y.mean())**2)
        assert(r2 > 0.99)

    def test_kepler_data(self):
        print("Testing the Kepler data set")
        d, truth = gen_kepler_data(n=500, sigma=0., seed=2)
        assert(d.response == 'a')
        p = leaf(0, 'P')
        law = unary('cbrt', product(p, p, leaf(1, 'Mh')))
        assert(np.allclose(d.column(law), d.y))
        assert(len(truth.targets) == 1 and len(truth.targets[0]) == 6)
        assert(law.key == '(Mh*P*P)^(1/3)')
        assert(law.key in truth.targets[0])
        assert('((P)^2*Mh)^(1/3)' in truth.targets[0])
        assert(np.allclose(d.column(unary('cbrt', product(unary('square', p), leaf(1, 'Mh')))), d.y))
        #- host mass, radius and temperature are strongly correlated
        corr = np.corrcoef(np.log(d.X[:, 1:4]).T)
        assert(np.all(corr[np.triu_indices(3, 1)] >= 0.7))

    def test_logic_data(self):
        print("Testing the logic regression data set")
        d, truth = gen_logic_data(n=5000, seed=3)
        assert(d.family == 'binomial')
        assert(d.X.shape == (5000, 50))
        assert(set(np.unique(d.X)) <= {0., 1.})
        assert(set(np.unique(d.y)) <= {0., 1.})
        trees = logic_trees()
        assert(trees[0].key == 'X7')
        assert(trees[4].key == 'X1*X27*X3')
        column = d.column(trees[4])
        assert(np.all(column == d.X[:, 0]*d.X[:, 2]*d.X[:, 26]))
        assert([t.key for t in trees] == [tuple(truth.targets[i])[0] for i in range(8)])
        assert(truth.labels[0] == 'L1' and truth.labels[-1] == 'L8')

        #- frequency of each conjunction within 4 standard errors of 2^-k
        for tree, feature in zip(LOGIC_TREES, trees):
            p = 0.5**len(tree)
            se = np.sqrt(p*(1-p)/d.n)
            assert(np.abs(d.column(feature).mean() - p) < 4*se)

        #- mean response matches the logit model
        logit = LOGIC_INTERCEPT + LOGIC_EFFECT*sum(d.column(f) for f in trees)
        expected = np.mean(1./(1.+np.exp(-logit)))
        assert(np.abs(d.y.mean() - expected) < 4*np.sqrt(0.25/d.n))

    def test_determinism(self):
        print("Testing seeded generators")
        a, _ = generate('kepler', seed=[5, 0])
        b, _ = generate('kepler', seed=[5, 0])
        c, _ = generate('kepler', seed=[5, 1])
        assert(np.all(a.X == b.X) and np.all(a.y == b.y))
        assert(not np.all(a.y == c.y))
        assert(generate('mass')[0].n == 500)
        assert(generate('logic', n=300)[0].n == 300)
        with self.assertRaises(ConfigError):
            generate('galaxy')
        with self.assertRaises(ValueError):
            gen_mass_data(n=10)

    def test_ground_truth(self):
        print("Testing ground truth parsing")
        truth = GroundTruth.from_strings(['X1*X2', 'X3,X4'], threshold=0.3)
        assert(truth.targets == [('X1*X2',), ('X3', 'X4')])
        assert(truth.labels == ['X1*X2', 'X3'])
        assert(truth.keys() == {'X1*X2', 'X3', 'X4'})
        assert(ground_truth('logic', 0.25).threshold == 0.25)
        with self.assertRaises(ValueError):
            GroundTruth([])
        with self.assertRaises(ValueError):
            GroundTruth(['X1'], threshold=1.)

    def test_metrics(self):
        print("Testing power, FP and FDR")
        truth = GroundTruth([('A',), ('B', 'C')], labels=['A', 'BC'])
        perfect = {'A': 0.9, 'B': 0.2, 'C': 0.7, 'D': 0.1}
        m = compute_metrics(perfect, truth)
        assert(m.power == {'A': 1., 'BC': 1.})
        assert(m.overall_power == 1.)
        assert(m.fp == 0. and m.fdr == 0.)

        #- replicate 2 misses BC and detects D and E
        noisy = {'A': 0.6, 'B': 0.1, 'C': 0.3, 'D': 0.8, 'E': 0.5}
        m = compute_metrics([perfect, noisy], truth, replicates=2, lanes=4, kernel='rgmjmcmc')
        assert(m.power == {'A': 1., 'BC': 0.5})
        assert(m.overall_power == 0.75)
        assert(m.fp == 1.)
        assert(np.isclose(m.fdr, (0. + 2./3.)/2.))
        row = m.row()
        assert(list(row) == ['KERNEL', 'T', 'POWER_A', 'POWER_BC', 'POWER', 'FP', 'FDR', 'REPLICATES'])
        assert(row['T'] == 4)

        #- nothing detected
        m = compute_metrics({'A': 0.1}, truth)
        assert(m.overall_power == 0. and m.fdr == 0.)

        table = metrics_table([m, m])
        assert(len(table) == 2)
        with self.assertRaises(ValueError):
            compute_metrics([perfect], truth, replicates=2)
        assert(not m.degraded)
        m = compute_metrics(perfect, truth, failed_lanes={'0/1': 'RuntimeError()'})
        assert(m.degraded and m.failed_lanes == {'0/1': 'RuntimeError()'})

    def test_equivalent_forms_are_detected(self):
        print("Testing detection of laws split across equivalent forms")
        truth = ground_truth('mass')
        m = compute_metrics({'(Rp)^3*RhoP': 0.97, 'Rp': 0.1}, truth)
        assert(m.power == {'Rp3RhoP': 1.})
        assert(m.fp == 0. and m.fdr == 0.)

        #- neither form reaches the threshold alone
        truth = ground_truth('kepler')
        split = {'((P)^2*Mh)^(1/3)': 0.4994, '(Mh*P*P)^(1/3)': 0.4994, 'Ecc': 0.02}
        m = compute_metrics(split, truth)
        assert(m.overall_power == 1.)
        assert(m.fp == 0. and m.fdr == 0.)
        m = compute_metrics({'((P)^2*Mh)^(1/3)': 0.3, '(P*P*Rp)^(1/3)': 0.3}, truth)
        assert(m.overall_power == 0.)

    def experiment(self, name, threads, replicates=20):
        cfg = RunConfig.for_experiment(name, threads=threads, nproc=os.cpu_count() or 1, seed=2024)
        metrics, _ = run_experiment(name, cfg, replicates=replicates)
        assert(not metrics.degraded)
        return metrics

    @unittest.skipUnless(long_tests(), 'set RGMJMCMC_LONG_TESTS=1 for long statistical runs')
    def test_mass_power_grows_with_lanes(self):
        print("Testing mass law detection with 16 lanes against a single lane")
        many = self.experiment('mass', 16)
        assert(many.overall_power >= 0.8)
        assert(many.fdr <= 0.3)
        single = self.experiment('mass', 1)
        assert(many.overall_power > single.overall_power)

    @unittest.skipUnless(long_tests(), 'set RGMJMCMC_LONG_TESTS=1 for long statistical runs')
    def test_kepler_power(self):
        print("Testing Kepler law detection with 16 lanes")
        assert(self.experiment('kepler', 16).overall_power >= 0.7)

    @unittest.skipUnless(long_tests(), 'set RGMJMCMC_LONG_TESTS=1 for long statistical runs')
    def test_logic_power(self):
        print("Testing logic tree detection with 16 lanes")
        metrics = self.experiment('logic', 16)
        for label in ('L1', 'L2', 'L3', 'L4'):
            assert(metrics.power[label] >= 0.9)
        assert(metrics.fdr <= 0.3)


if __name__ == '__main__':
    unittest.main()
