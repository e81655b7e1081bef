import unittest
import os
import shutil
import tempfile

import numpy as np

from rgmjmcmc.io import load_csv, read_table
from rgmjmcmc.inference import Dataset, Model, ModelArchive, log_target
from rgmjmcmc.enumeration import count_models, enumerate_posterior, total_variation
from rgmjmcmc.errors import EnumerationError


class TestEnumeration(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.datafile = os.path.join(os.path.dirname(__file__), 'data', 'q5.csv')
        cls.dataset = load_csv(cls.datafile, 'y')

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_count(self):
        print("Testing model counts")
        assert(count_models(5, 2) == 16)
        assert(count_models(3, 5) == 8)
        assert(count_models(50, 0) == 1)

    def test_enumerate(self):
        print("Testing exact posterior on q=5 and Q=2")
        exact = enumerate_posterior(self.dataset.covariates(), 2, self.dataset)
        assert(len(exact) == 16)
        assert(exact.identities == sorted(exact.identities))
        assert(np.isclose(exact.probabilities.sum(), 1.))
        mode = exact.identities[int(np.argmax(exact.probabilities))]
        assert(mode == ('X1', 'X3'))
        inclusion = exact.inclusion()
        assert(inclusion['X1'] > 0.99)
        assert(inclusion['X2'] < 0.5)

    def test_single_covariate(self):
        print("Testing exact posterior with one covariate")
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 1))
        d = Dataset(X, 0.5*X[:, 0] + rng.normal(size=20))
        archive = ModelArchive()
        values = np.array([log_target(Model(), d, None, archive),
                           log_target(Model(d.covariates()), d, None, archive)])
        expected = np.exp(values - values.max())
        expected /= expected.sum()
        exact = enumerate_posterior(d.covariates(), 1, d)
        assert(exact.identities == [(), ('X1',)])
        assert(np.allclose(exact.probabilities, expected, rtol=0, atol=1e-12))
        assert(np.allclose(exact.log_targets, values))

    def test_permutation_invariance(self):
        print("Testing invariance to the feature order")
        features = self.dataset.covariates()
        a = enumerate_posterior(features, 2, self.dataset)
        b = enumerate_posterior(features[::-1], 2, self.dataset)
        assert(a.identities == b.identities)
        assert(np.allclose(a.probabilities, b.probabilities, rtol=0, atol=1e-12))

    def test_archive_count(self):
        print("Testing archive size after enumeration")
        archive = ModelArchive()
        enumerate_posterior(self.dataset.covariates()[:3], 2, self.dataset, archive=archive)
        assert(len(archive) == 7)

    def test_guard(self):
        print("Testing the model space limit")
        with self.assertRaises(EnumerationError):
            enumerate_posterior(self.dataset.covariates(), 2, self.dataset, max_models=10)

    def test_write(self):
        print("Testing exact posterior table")
        archive = ModelArchive()
        exact = enumerate_posterior(self.dataset.covariates(), 2, self.dataset, archive=archive)
        assert(len(archive) == 16)
        filename = os.path.join(self.tmpdir, 'exact.csv')
        exact.write(filename)
        table = read_table(filename)
        assert(len(table) == 16)
        for name in ('IDENTITY', 'SIZE', 'LOG_PRIOR', 'LOG_EVIDENCE', 'LOG_TARGET', 'PROB'):
            assert(name in table.colnames)
        assert('NULL' in list(table['IDENTITY']))
        assert(np.abs(np.sum(table['PROB']) - 1.) < 1e-9)

    def test_total_variation(self):
        print("Testing total variation distance")
        assert(total_variation({('X1',): 1.}, {(): 1.}) == 1.)
        assert(total_variation({(): 0.5, ('X1',): 0.5}, {(): 0.5, ('X1',): 0.5}) == 0.)
        assert(np.isclose(total_variation({(): 0.75, ('X1',): 0.25}, {(): 0.5, ('X1',): 0.5}), 0.25))


if __name__ == '__main__':
    unittest.main()
