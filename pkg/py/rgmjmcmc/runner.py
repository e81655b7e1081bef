"""
Runs of several independent lanes (chains) on one data set, merging of
their archives and counters, and the output files of a run.
"""

import os
import json
import multiprocessing
from dataclasses import dataclass, field, asdict

import numpy as np
from astropy.table import Table

from rgmjmcmc import __version__
from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import ConfigError, RGMJMCMCError
from rgmjmcmc.genetic import OperatorConfig
from rgmjmcmc.kernel import LocalKernelConfig
from rgmjmcmc.inference import InferenceConfig, ModelArchive, identity_string
from rgmjmcmc.engine import (EngineConfig, FrequencyCounter, KERNEL_KINDS, REVERSIBLE_KINDS,
                             initial_state, run_chain, estimate_renormalized, estimate_frequency)
from rgmjmcmc.io import load_csv, write_table, write_config
from rgmjmcmc.stepmask import stepmask

ESTIMATORS = ('renorm', 'freq', 'both')
SECTIONS = ('run', 'operators', 'local', 'inference')


@dataclass
class RunConfig:
    """Resolved configuration of a run.

    The `run` section holds the scalar fields below; operator, local kernel
    and inference settings are sections of their own.
    """
    data: str = None
    response: str = 'y'
    family: str = 'gaussian'
    pop_size: int = 15
    max_model_size: int = 10
    iterations: int = 1000
    burn_in: float = 0.2
    kernel: str = 'rgmjmcmc'
    estimator: str = 'both'
    threads: int = 1
    nproc: int = 1
    seed: int = 0
    out: str = '.'
    n_pop: int = 250
    qr_ratio: str = 'hamming'
    keep_log: bool = True
    top: int = 100
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    local: LocalKernelConfig = field(default_factory=LocalKernelConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)

    def engine_config(self):
        return EngineConfig(kind=self.kernel, pop_size=self.pop_size,
                            max_model_size=self.max_model_size, burn_in=self.burn_in,
                            n_pop=self.n_pop, qr_ratio=self.qr_ratio, keep_log=self.keep_log,
                            operators=self.operators, local=self.local)

    def validate(self):
        log = get_logger()
        message = None
        if self.kernel not in KERNEL_KINDS:
            message = 'unknown kernel {}, expected one of {}'.format(self.kernel, KERNEL_KINDS)
        elif self.estimator not in ESTIMATORS:
            message = 'unknown estimator {}, expected one of {}'.format(self.estimator, ESTIMATORS)
        elif self.estimator != 'renorm' and self.kernel not in REVERSIBLE_KINDS:
            message = 'estimator {} needs a reversible kernel, {} is not'.format(self.estimator, self.kernel)
        elif self.iterations < 1 or int(round(self.burn_in*self.iterations)) >= self.iterations:
            message = 'iterations={} must exceed the burn-in of {:g}'.format(
                self.iterations, self.burn_in*self.iterations)
        elif self.threads < 1 or self.nproc < 1:
            message = 'threads={} nproc={} must be >= 1'.format(self.threads, self.nproc)
        if message is not None:
            log.error(message)
            raise ConfigError(message)
        self.engine_config().validate()
        self.inference.validate()
        return self

    def to_dict(self):
        run = {k: v for k, v in asdict(self).items() if k not in SECTIONS}
        return {'run': run,
                'operators': self.operators.to_dict(),
                'local': self.local.to_dict(),
                'inference': self.inference.to_dict()}

    @classmethod
    def from_dict(cls, sections):
        """RunConfig from a dict of sections; unknown sections are ignored,
        unknown keys are an error.
        """
        try:
            params = dict(sections.get('run') or {})
            params['operators'] = OperatorConfig.from_dict(sections.get('operators') or {})
            params['local'] = LocalKernelConfig.from_dict(sections.get('local') or {})
            params['inference'] = InferenceConfig.from_dict(sections.get('inference') or {})
            return cls(**params)
        except TypeError as err:
            message = 'invalid configuration: {}'.format(err)
            get_logger().error(message)
            raise ConfigError(message)

    @classmethod
    def for_experiment(cls, name, **overrides):
        """Defaults of a named experiment, `overrides` applied to the run section.
        Sections the experiment does not set keep the RunConfig defaults.
        """
        from rgmjmcmc.experiments import EXPERIMENT_DEFAULTS
        if name not in EXPERIMENT_DEFAULTS:
            raise ConfigError('unknown experiment {}'.format(name))
        defaults = EXPERIMENT_DEFAULTS[name]
        run = dict(defaults['run'])
        run['estimator'] = 'renorm'
        run.update(overrides)
        sections = {s: defaults[s] for s in SECTIONS if s in defaults}
        sections['run'] = run
        return cls.from_dict(sections)


@dataclass
class LaneResult:
    """Output of one lane; `error` is set when the lane failed."""
    lane: int
    archive: ModelArchive = None
    counter: FrequencyCounter = None
    records: list = None
    steps: int = 0
    accepted: int = 0
    error: str = None


def _run_lane(arguments):
    """ Used for multiprocessing.Pool """
    log = get_logger()
    lane = arguments['lane']
    cfg = arguments['cfg']
    try:
        engine_cfg = cfg.engine_config()
        rng = np.random.default_rng(arguments['seed'])
        state = initial_state(arguments['dataset'], engine_cfg, rng, cfg.inference)
        run_chain(state, cfg.iterations, engine_cfg)
    except Exception as err:
        #- reported by the caller, healthy lanes are still merged
        log.error('lane {} failed: {}'.format(lane, repr(err)))
        return LaneResult(lane, error=repr(err))
    log.info('lane {}: {} steps, acceptance rate {:.3f}, {} models'.format(
        lane, state.step, state.acceptance_rate(), len(state.archive)))
    return LaneResult(lane, state.archive, state.counter, state.records,
                      state.step, state.accepted)


def lane_seeds(entropy, threads):
    """Seed of every lane; lane i's seed does not depend on the number of lanes."""
    return np.random.SeedSequence(entropy).spawn(threads)


def run_lanes(dataset, cfg, entropy=None):
    """Run cfg.threads independent lanes, with cfg.nproc processes.

    Returns list of LaneResult ordered by lane.
    """
    log = get_logger()
    if entropy is None:
        entropy = cfg.seed
    arguments = [{'lane': i, 'seed': seed, 'dataset': dataset, 'cfg': cfg}
                 for i, seed in enumerate(lane_seeds(entropy, cfg.threads))]
    log.info('running {} lane(s) of {} with {} steps'.format(cfg.threads, cfg.kernel, cfg.iterations))
    nproc = min(cfg.nproc, cfg.threads)
    if nproc > 1:
        pool = multiprocessing.Pool(nproc)
        results = pool.map(_run_lane, arguments)
        pool.close()
        pool.join()
    else:
        results = [_run_lane(a) for a in arguments]
    return sorted(results, key=lambda r: r.lane)


def merge_lanes(results, kind):
    """Union of the archives and pooled frequency counters of the healthy lanes.

    Raises RGMJMCMCError if no lane completed.
    """
    healthy = [r for r in results if r.error is None]
    if len(healthy) == 0:
        message = 'all {} lanes failed'.format(len(results))
        get_logger().error(message)
        raise RGMJMCMCError(message)
    archive = ModelArchive()
    counter = FrequencyCounter(kind)
    for result in healthy:
        archive = archive.merge(result.archive)
        counter = counter.merge(result.counter)
    return archive, counter


def estimates(archive, counter, estimator):
    """(renormalized estimate or None, frequency estimate or None)."""
    renorm = estimate_renormalized(archive) if estimator in ('renorm', 'both') else None
    freq = estimate_frequency(counter) if estimator in ('freq', 'both') else None
    return renorm, freq


def models_table(archive, renorm=None, freq=None, top=None):
    """Models by decreasing estimated posterior probability."""
    identities = archive.identities()
    rprobs = renorm.as_dict() if renorm is not None else dict()
    fprobs = freq.as_dict() if freq is not None else dict()
    order = sorted(identities, key=lambda i: (-rprobs.get(i, 0.), -fprobs.get(i, 0.), i))
    if top:
        order = order[:top]
    table = Table()
    table['IDENTITY'] = [identity_string(i) for i in order]
    table['SIZE'] = np.array([len(i) for i in order], dtype=int)
    table['LOG_EVIDENCE'] = np.array([archive.log_evidence(i) for i in order])
    table['LOG_PRIOR'] = np.array([archive.log_prior(i) for i in order])
    if renorm is not None:
        table['RENORM_PROB'] = np.array([rprobs.get(i, 0.) for i in order])
    if freq is not None:
        table['FREQ_PROB'] = np.array([fprobs.get(i, 0.) for i in order])
    table['VISITS'] = np.array([archive.visits(i) for i in order], dtype=int)
    table['EVALUATIONS'] = np.array([archive.evaluations(i) for i in order], dtype=int)
    return table


def inclusions_table(renorm=None, freq=None):
    """Marginal inclusion probabilities per canonical key."""
    keys = set()
    for estimate in (renorm, freq):
        if estimate is not None:
            keys.update(estimate.inclusion)
    keys = sorted(keys)
    table = Table()
    table['FEATURE'] = keys if len(keys) > 0 else np.zeros(0, dtype=str)
    if renorm is not None:
        table['RENORM_PROB'] = np.array([renorm.inclusion.get(k, 0.) for k in keys])
    if freq is not None:
        table['FREQ_PROB'] = np.array([freq.inclusion.get(k, 0.) for k in keys])
    return table


def _json_value(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_step_log(records, path):
    """One JSON object per line and per step; non-finite numbers are
    written as null and `outcome` lists the names of the flag bits.
    """
    with open(path, 'w') as ofile:
        for record in records:
            line = {key: _json_value(value) for key, value in record.items()}
            line['outcome'] = stepmask.names(record['flags'])
            ofile.write(json.dumps(line, allow_nan=False) + '\n')
    get_logger().debug('wrote {}'.format(path))



@dataclass
class RunResult:
    archive: ModelArchive
    counter: FrequencyCounter
    renorm: object
    freq: object
    lanes: list
    degraded: bool

    @property
    def failed_lanes(self):
        return [r.lane for r in self.lanes if r.error is not None]


def run(cfg, dataset=None):
    """Run all lanes and write models.csv, inclusions.csv, steps-lane{i}.jsonl
    and manifest.yaml to cfg.out.

    Returns RunResult; `degraded` is set when a lane failed.
    """
    log = get_logger()
    cfg.validate()
    if dataset is None:
        if cfg.data is None:
            raise ConfigError('no data file')
        dataset = load_csv(cfg.data, cfg.response, cfg.family)
    if not os.path.isdir(cfg.out):
        os.makedirs(cfg.out)

    results = run_lanes(dataset, cfg)
    degraded = any(r.error is not None for r in results)
    if degraded:
        log.warning('degraded run, failed lanes: {}'.format([r.lane for r in results if r.error]))

    for result in results:
        if result.error is None and cfg.keep_log:
            write_step_log(result.records, os.path.join(cfg.out, 'steps-lane{}.jsonl'.format(result.lane)))

    manifest = cfg.to_dict()
    manifest['result'] = {'version': __version__, 'degraded': degraded,
                          'failed_lanes': {r.lane: r.error for r in results if r.error is not None}}
    try:
        archive, counter = merge_lanes(results, cfg.kernel)
    except RGMJMCMCError:
        write_config(manifest, os.path.join(cfg.out, 'manifest.yaml'))
        raise
    renorm, freq = estimates(archive, counter, cfg.estimator)
    write_table(models_table(archive, renorm, freq, cfg.top), os.path.join(cfg.out, 'models.csv'))
    write_table(inclusions_table(renorm, freq), os.path.join(cfg.out, 'inclusions.csv'))
    manifest['result']['models'] = len(archive)
    manifest['result']['counted_steps'] = counter.total
    write_config(manifest, os.path.join(cfg.out, 'manifest.yaml'))
    return RunResult(archive, counter, renorm, freq, results, degraded)
