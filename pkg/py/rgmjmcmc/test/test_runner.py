import unittest
from unittest import mock
import os
import json
import shutil
import tempfile

import numpy as np

from rgmjmcmc.io import load_csv, read_table, read_config, read_inclusions
from rgmjmcmc.kernel import LocalKernelConfig
from rgmjmcmc.genetic import OperatorConfig, Population
from rgmjmcmc.inference import Model
from rgmjmcmc.engine import EngineConfig, initial_state, rg_step, run_chain
from rgmjmcmc.stepmask import stepmask
from rgmjmcmc.runner import (RunConfig, run_lanes, merge_lanes, estimates, models_table,
                             inclusions_table, lane_seeds, run, write_step_log)
from rgmjmcmc.errors import ConfigError, RGMJMCMCError


def small_config(**kwargs):
    params = dict(pop_size=5, max_model_size=2, iterations=12, burn_in=0.25, seed=3,
                  local=LocalKernelConfig(k_local=2))
    params.update(kwargs)
    return RunConfig(**params)


class TestRunner(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.datafile = os.path.join(os.path.dirname(__file__), 'data', 'q5.csv')
        cls.dataset = load_csv(cls.datafile, 'y')

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_config(self):
        print("Testing run configuration")
        cfg = small_config(kernel='rgmjmcmc_delayed', estimator='freq').validate()
        assert(RunConfig.from_dict(cfg.to_dict()) == cfg)
        sections = cfg.to_dict()
        assert(list(sections) == ['run', 'operators', 'local', 'inference'])
        sections['plots'] = {'dpi': 100}
        assert(RunConfig.from_dict(sections) == cfg)
        with self.assertRaises(ConfigError):
            RunConfig.from_dict({'run': {'iteration': 10}})
        with self.assertRaises(ConfigError):
            small_config(kernel='gmjmcmc_baseline', estimator='freq').validate()
        with self.assertRaises(ConfigError):
            small_config(kernel='gmjmcmc_baseline').validate()
        small_config(kernel='gmjmcmc_baseline', estimator='renorm').validate()
        with self.assertRaises(ConfigError):
            small_config(iterations=10, burn_in=0.99).validate()
        with self.assertRaises(ConfigError):
            small_config(pop_size=1).validate()

        cfg = RunConfig.for_experiment('logic', iterations=50)
        assert(cfg.estimator == 'renorm')
        assert(cfg.operators.nonlinearities == ())
        assert(cfg.operators.distinct_factors)
        assert(cfg.local.k_local == 4)
        assert(cfg.inference == RunConfig().inference)
        assert(RunConfig.for_experiment('mass').local.rho_jump == 0.2)
        assert(cfg.iterations == 50)
        assert(cfg.pop_size == 15)

    def test_lane_seeds(self):
        print("Testing lane seeds")
        a = [s.generate_state(2).tolist() for s in lane_seeds(7, 2)]
        b = [s.generate_state(2).tolist() for s in lane_seeds(7, 4)]
        assert(b[:2] == a)
        assert(a[0] != a[1])

    def test_lanes_do_not_depend_on_lane_count(self):
        print("Testing lane independence of the lane count")
        one = run_lanes(self.dataset, small_config(threads=1))
        two = run_lanes(self.dataset, small_config(threads=2))
        assert(len(one) == 1 and len(two) == 2)
        assert([r.lane for r in two] == [0, 1])
        assert(one[0].records == two[0].records)
        assert(one[0].archive.identities() == two[0].archive.identities())

    def test_merge_lanes(self):
        print("Testing lane merging")
        cfg = small_config(threads=3)
        results = run_lanes(self.dataset, cfg)
        a_archive, a_counter = merge_lanes(results, cfg.kernel)
        b_archive, b_counter = merge_lanes(results[::-1], cfg.kernel)
        assert(set(a_archive.identities()) == set(b_archive.identities()))
        for identity in a_archive.identities():
            assert(a_archive.log_target(identity) == b_archive.log_target(identity))
            assert(a_archive.visits(identity) == b_archive.visits(identity))
        assert(a_counter.counts == b_counter.counts)
        assert(a_counter.total == 3*9)

        renorm, freq = estimates(a_archive, a_counter, 'both')
        assert(np.isclose(renorm.probabilities.sum(), 1.))
        assert(np.isclose(freq.probabilities.sum(), 1.))
        table = models_table(a_archive, renorm, freq, top=3)
        assert(len(table) == 3)
        assert(np.all(np.diff(table['RENORM_PROB']) <= 0))
        table = inclusions_table(renorm, None)
        assert(table.colnames == ['FEATURE', 'RENORM_PROB'])

        results[1].error = 'RuntimeError()'
        archive, counter = merge_lanes(results, cfg.kernel)
        assert(counter.total == 2*9)
        for result in results:
            result.error = 'RuntimeError()'
        with self.assertRaises(RGMJMCMCError):
            merge_lanes(results, cfg.kernel)

    def test_run(self):
        print("Testing run outputs")
        out = os.path.join(self.tmpdir, 'run')
        cfg = small_config(threads=2, data=self.datafile, out=out)
        result = run(cfg)
        assert(not result.degraded)
        assert(result.failed_lanes == [])
        for name in ('models.csv', 'inclusions.csv', 'manifest.yaml',
                     'steps-lane0.jsonl', 'steps-lane1.jsonl'):
            assert(os.path.isfile(os.path.join(out, name)))

        with open(os.path.join(out, 'steps-lane1.jsonl')) as ifile:
            records = [json.loads(line) for line in ifile]
        assert(len(records) == cfg.iterations)
        assert([r['step'] for r in records] == list(range(cfg.iterations)))
        assert(records[0]['current'] == 'NULL')

        manifest = read_config(os.path.join(out, 'manifest.yaml'))
        assert(RunConfig.from_dict(manifest) == cfg)
        assert(manifest['result']['degraded'] is False)
        assert(manifest['result']['counted_steps'] == 2*9)
        assert(manifest['result']['models'] == len(result.archive))

        inclusions = read_inclusions(os.path.join(out, 'inclusions.csv'))
        assert(set(inclusions) == set(result.renorm.inclusion))
        for key, prob in result.renorm.inclusion.items():
            assert(np.abs(inclusions[key] - prob) < 1e-11)
        models = read_table(os.path.join(out, 'models.csv'))
        assert(len(models) == min(len(result.archive), cfg.top))
        assert('FREQ_PROB' in models.colnames)

        with self.assertRaises(ConfigError):
            run(small_config(out=out))

    def test_step_log(self):
        print("Testing step logs with infeasible reverse moves")
        d = self.dataset
        cfg = EngineConfig(pop_size=1, max_model_size=1,
                           operators=OperatorConfig(p_mutation=1., p_crossover=0., p_modification=0.,
                                                    p_projection=0.),
                           local=LocalKernelConfig(rho_jump=1., k_local=0, rho_r=1e-12))
        state = initial_state(d, cfg, 4, population=Population(d.covariates()[:1]),
                              model=Model(d.covariates()[:1]))
        state.base_covariates = d.covariates()[1:]
        rg_step(state, cfg)
        assert(state.records[-1]['log_qr_ratio'] == -np.inf)

        path = os.path.join(self.tmpdir, 'steps.jsonl')
        write_step_log(state.records, path)
        with open(path) as ifile:
            text = ifile.read()
        assert('Infinity' not in text and 'NaN' not in text)
        record = json.loads(text.splitlines()[-1])
        assert(record['log_qr_ratio'] is None)
        assert(record['reason'] == 'infeasible-reverse')
        assert(record['outcome'] == ['INFEASIBLE_REVERSE'])
        assert(record['flags'] == stepmask.INFEASIBLE_REVERSE)

    def test_degraded_run(self):
        print("Testing runs with failed lanes")
        calls = []

        def flaky_run_chain(state, n_steps, cfg):
            calls.append(n_steps)
            if len(calls) == 1:
                raise RuntimeError('lane failure')
            return run_chain(state, n_steps, cfg)

        out = os.path.join(self.tmpdir, 'degraded')
        cfg = small_config(threads=2, out=out)
        with mock.patch('rgmjmcmc.runner.run_chain', side_effect=flaky_run_chain):
            result = run(cfg, self.dataset)
        assert(result.degraded)
        assert(result.failed_lanes == [0])
        assert(result.counter.total == 9)
        assert(not os.path.isfile(os.path.join(out, 'steps-lane0.jsonl')))
        assert(os.path.isfile(os.path.join(out, 'steps-lane1.jsonl')))
        manifest = read_config(os.path.join(out, 'manifest.yaml'))
        assert(manifest['result']['degraded'] is True)
        assert('lane failure' in manifest['result']['failed_lanes'][0])

        out = os.path.join(self.tmpdir, 'failed')
        with mock.patch('rgmjmcmc.runner.run_chain', side_effect=RuntimeError('lane failure')):
            with self.assertRaises(RGMJMCMCError):
                run(small_config(threads=2, out=out), self.dataset)
        assert(os.path.isfile(os.path.join(out, 'manifest.yaml')))


if __name__ == '__main__':
    unittest.main()
