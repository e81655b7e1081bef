"""
Chain kernels over (population, model) states and posterior estimators.

Kinds:
    rgmjmcmc : reversible genetically modified mode jumping MCMC, a fresh
               population proposed around the current model at every step
    rgmjmcmc_delayed : same with delayed acceptance, the backward search
               only runs when the target ratio test passes
    gmjmcmc_baseline : mode jumping MCMC within the current population,
               population evolved every n_pop steps without correction
"""

from dataclasses import dataclass, field

import numpy as np

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import (ConfigError, PopulationError, ProposalError, OperatorError,
                             EstimatorError, EstimatorValidityError)
from rgmjmcmc.stepmask import stepmask, reasons
from rgmjmcmc.genetic import OperatorConfig, Population, fill_population, next_population, evaluable
from rgmjmcmc.inference import (Model, Posterior, identity_string, normalize_log_targets,
                                inclusion_probabilities)
from rgmjmcmc.kernel import (LocalKernelConfig, large_jump, local_optimize, randomize,
                             hamming, log_qr_ratio, log_qr_ratio_exact, mask_model)

RGMJMCMC = 'rgmjmcmc'
RGMJMCMC_DELAYED = 'rgmjmcmc_delayed'
GMJMCMC_BASELINE = 'gmjmcmc_baseline'
KERNEL_KINDS = (RGMJMCMC, RGMJMCMC_DELAYED, GMJMCMC_BASELINE)
REVERSIBLE_KINDS = (RGMJMCMC, RGMJMCMC_DELAYED)
QR_RATIOS = ('hamming', 'exact')


@dataclass
class EngineConfig:
    """Chain settings.

    kind : one of KERNEL_KINDS
    pop_size : population size s
    max_model_size : maximal number of features in a model Q
    burn_in : fraction of the steps of run_chain not counted in the frequencies
    n_pop : steps per generation of gmjmcmc_baseline
    qr_ratio : 'hamming' (rho_r^(d-d')) or 'exact' (full randomization density)
    fixed_population : keep the initial population for every step
    keep_log : keep one record per step in ChainState.records
    """
    kind: str = RGMJMCMC
    pop_size: int = 15
    max_model_size: int = 10
    burn_in: float = 0.2
    n_pop: int = 250
    qr_ratio: str = 'hamming'
    fixed_population: bool = False
    keep_log: bool = True
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    local: LocalKernelConfig = field(default_factory=LocalKernelConfig)

    def validate(self):
        message = None
        if self.kind not in KERNEL_KINDS:
            message = 'unknown kernel {}, expected one of {}'.format(self.kind, KERNEL_KINDS)
        elif not self.pop_size >= self.max_model_size >= 1:
            message = 'need pop_size >= max_model_size >= 1, got s={} Q={}'.format(
                self.pop_size, self.max_model_size)
        elif not 0 <= self.burn_in < 1:
            message = 'burn_in={} is not in [0,1)'.format(self.burn_in)
        elif self.n_pop < 1:
            message = 'n_pop={} must be >= 1'.format(self.n_pop)
        elif self.qr_ratio not in QR_RATIOS:
            message = 'unknown qr_ratio {}, expected one of {}'.format(self.qr_ratio, QR_RATIOS)
        if message is not None:
            get_logger().error(message)
            raise ConfigError(message)
        self.operators.validate()
        self.local.validate()
        return self

    def to_dict(self):
        params = {k: getattr(self, k) for k in ('kind', 'pop_size', 'max_model_size', 'burn_in',
                                                'n_pop', 'qr_ratio', 'fixed_population', 'keep_log')}
        params['operators'] = self.operators.to_dict()
        params['local'] = self.local.to_dict()
        return params

    @classmethod
    def from_dict(cls, params):
        params = dict(params)
        if 'operators' in params:
            params['operators'] = OperatorConfig.from_dict(params['operators'])
        if 'local' in params:
            params['local'] = LocalKernelConfig.from_dict(params['local'])
        return cls(**params)


class FrequencyCounter(object):
    """Visit counts W_m per model identity and per feature key, total W."""

    def __init__(self, kind=RGMJMCMC):
        self.kind = kind
        self.counts = dict()
        self.feature_counts = dict()
        self.total = 0

    def add(self, identity, weight=1):
        self.counts[identity] = self.counts.get(identity, 0) + weight
        for key in identity:
            self.feature_counts[key] = self.feature_counts.get(key, 0) + weight
        self.total += weight

    def merge(self, other):
        """Pooled counts of two counters of the same kind."""
        if other.kind != self.kind:
            raise EstimatorError('cannot pool {} and {} counts'.format(self.kind, other.kind))
        merged = FrequencyCounter(self.kind)
        for counter in (self, other):
            for identity, count in counter.counts.items():
                merged.add(identity, count)
        return merged


class ChainState(object):
    """State of one chain: population, current model, target, counters and RNG.

    Attributes:
        population : current Population S
        model : current Model, all of its features are in S
        posterior : Posterior (dataset, inference settings, archive)
        counter : FrequencyCounter of the post burn-in steps
        base_covariates : leaf features of the dataset
        rng : numpy Generator
        step : number of steps performed
        burn_in_steps : steps not counted in `counter`
        accepted : number of accepted steps
        pop_counts, pop_steps : per-feature inclusion counts in the current
            generation, used for filtration
        records : list of step records (dicts)
    """

    def __init__(self, population, model, posterior, rng, base_covariates=None):
        if not population.contains_all(model.identity):
            message = 'model {} is not in population'.format(identity_string(model.identity))
            get_logger().error(message)
            raise PopulationError(message)
        self.population = population
        self.model = model
        self.posterior = posterior
        self.rng = rng
        if base_covariates is None:
            base_covariates = posterior.dataset.covariates()
        self.base_covariates = list(base_covariates)
        self.validate_feature = evaluable(posterior.dataset)
        self.counter = FrequencyCounter()
        self.step = 0
        self.burn_in_steps = 0
        self.accepted = 0
        self.pop_counts = dict()
        self.pop_steps = 0
        self.records = []
        self.log_target = posterior.log_target(model)

    @property
    def archive(self):
        return self.posterior.archive

    def mask(self):
        return self.population.mask(self.model.identity)

    def acceptance_rate(self):
        return self.accepted/self.step if self.step > 0 else 0.


def initial_state(dataset, cfg, rng, inference_cfg=None, archive=None, population=None, model=None):
    """Chain state at step 0.

    The default population is a random choice of min(q,s) covariates,
    completed to s features with the operators; the default model is the
    null model.
    """
    log = get_logger()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    posterior = Posterior(dataset, inference_cfg, archive)
    covariates = dataset.covariates()
    if population is None:
        chosen = rng.permutation(len(covariates))[:min(cfg.pop_size, len(covariates))]
        members = [covariates[i] for i in sorted(chosen)]
        population = fill_population(members, members, covariates, cfg.pop_size, cfg.operators, rng,
                                     validate=evaluable(dataset), grow_pool=True)
    elif not isinstance(population, Population):
        population = Population(population)
    if model is None:
        model = Model()
    log.debug('initial {}'.format(population))
    state = ChainState(population, model, posterior, rng, covariates)
    state.counter.kind = cfg.kind
    return state


def propose_population(model, cfg, base_covariates, rng, validate=None):
    """Population of cfg.pop_size features containing every feature of `model`,
    completed with operator draws seeded by the model features.

    Raises PopulationError if the population cannot be completed.
    """
    members = list(model.features)
    if len(members) > cfg.pop_size:
        raise PopulationError('model of size {} exceeds population size {}'.format(
            len(members), cfg.pop_size))
    if len(members) == cfg.pop_size:
        return Population(members)
    return fill_population(members, members, base_covariates, cfg.pop_size, cfg.operators, rng,
                           validate=validate, grow_pool=True)


def _search(mask, population, state, cfg):
    """Large jump then local optimization within `population`."""
    Q = cfg.max_model_size
    jumped = large_jump(mask, cfg.local, state.rng, Q)
    return local_optimize(jumped, population, state.posterior, cfg.local, state.rng, Q)


def _qr_ratio(m, mk, m_prime, m_prime_k, cfg):
    if cfg.qr_ratio == 'exact':
        return log_qr_ratio_exact(m, mk, m_prime, m_prime_k, cfg.local.rho_r,
                                  cfg.max_model_size, cfg.local.max_retries)
    return log_qr_ratio(m, mk, m_prime, m_prime_k, cfg.local.rho_r)


def _population_proposer(state, cfg):
    if cfg.kind == GMJMCMC_BASELINE or cfg.fixed_population:
        return lambda model: state.population
    return lambda model: propose_population(model, cfg, state.base_covariates, state.rng,
                                            state.validate_feature)


def _new_record(state, cfg):
    return {'step': state.step, 'kind': cfg.kind, 'generation': state.population.generation,
            'current': identity_string(state.model.identity),
            'proposal': None,
            'log_target_current': state.log_target, 'log_target_proposal': None,
            'd_current': None, 'd_proposal': None, 'log_qr_ratio': None,
            'log_accept': None, 'log_uniform': None,
            'log_accept_stage2': None, 'log_uniform_stage2': None,
            'stage1': None, 'stage2': None, 'accepted': False, 'reason': None, 'flags': 0,
            'forward_evaluations': 0, 'backward_evaluations': 0}


def _transition(state, cfg, delayed):
    """One mode jumping step with the reverse search; fills and returns the
    record, `state` is updated on acceptance only.
    """
    log = get_logger()
    posterior = state.posterior
    propose = _population_proposer(state, cfg)
    record = _new_record(state, cfg)

    #- forward path m -> S' -> m'_0 -> ... -> m'_k -> m'
    requests = posterior.requests
    try:
        new_population = propose(state.model)
        mk_prime = _search(new_population.mask(state.model.identity), new_population, state, cfg)
        m_prime = randomize(mk_prime, cfg.local, state.rng, cfg.max_model_size)
    except (PopulationError, OperatorError) as err:
        log.debug('step {}: {}'.format(state.step, err))
        record['reason'] = reasons['POPULATION_FAILURE']
        record['flags'] = stepmask.POPULATION_FAILURE
        return record
    except ProposalError as err:
        log.debug('step {}: {}'.format(state.step, err))
        record['reason'] = reasons['PROPOSAL_FAILURE']
        record['flags'] = stepmask.PROPOSAL_FAILURE
        return record
    proposal = mask_model(new_population, m_prime)
    proposal_log_target = posterior.log_target(proposal)
    record['forward_evaluations'] = posterior.requests - requests
    record['proposal'] = identity_string(proposal.identity)
    record['log_target_proposal'] = proposal_log_target
    record['d_proposal'] = hamming(m_prime, mk_prime)

    if proposal_log_target == -np.inf:
        record['reason'] = reasons['EVIDENCE_FAILURE']
        record['flags'] = stepmask.EVIDENCE_FAILURE
        return record

    log_target_ratio = proposal_log_target - state.log_target
    if delayed:
        record['log_uniform'] = float(np.log(state.rng.random()))
        record['stage1'] = bool(record['log_uniform'] < log_target_ratio)
        if not record['stage1']:
            record['log_accept'] = log_target_ratio
            record['reason'] = reasons['STAGE1_REJECTED']
            record['flags'] = stepmask.STAGE1_REJECTED
            return record

    #- backward path m' -> S -> m_k, m must be reachable from S
    requests = posterior.requests
    try:
        old_population = propose(proposal)
        m_mask = old_population.mask(state.model.identity) \
            if old_population.contains_all(state.model.identity) else None
        mk = _search(old_population.mask(proposal.identity), old_population, state, cfg)
    except (PopulationError, OperatorError) as err:
        log.debug('step {}: {}'.format(state.step, err))
        record['backward_evaluations'] = posterior.requests - requests
        record['reason'] = reasons['POPULATION_FAILURE']
        record['flags'] = stepmask.POPULATION_FAILURE
        return record
    record['backward_evaluations'] = posterior.requests - requests

    if m_mask is None:
        record['log_qr_ratio'] = -np.inf
        record['reason'] = reasons['INFEASIBLE_REVERSE']
        record['flags'] = stepmask.INFEASIBLE_REVERSE
        return record

    record['d_current'] = hamming(m_mask, mk)
    log_qr = _qr_ratio(m_mask, mk, m_prime, mk_prime, cfg)
    record['log_qr_ratio'] = log_qr

    if delayed:
        record['log_accept'] = log_target_ratio
        record['log_accept_stage2'] = log_qr
        record['log_uniform_stage2'] = float(np.log(state.rng.random()))
        record['stage2'] = bool(record['log_uniform_stage2'] < log_qr)
        accepted = record['stage2']
        rejection = 'STAGE2_REJECTED'
    else:
        record['log_accept'] = log_target_ratio + log_qr
        record['log_uniform'] = float(np.log(state.rng.random()))
        accepted = bool(record['log_uniform'] < record['log_accept'])
        rejection = 'MH_REJECTED'

    if not accepted:
        record['reason'] = reasons[rejection]
        record['flags'] = stepmask[rejection]
        return record

    record['accepted'] = True
    record['reason'] = reasons['ACCEPTED']
    record['flags'] = stepmask.ACCEPTED
    state.population = new_population
    state.model = proposal
    state.log_target = proposal_log_target
    return record


def _end_step(state, cfg, record):
    """Counters and log of a finished step."""
    if record['accepted']:
        state.accepted += 1
    state.step += 1
    state.archive.visit(state.model.identity)
    if state.step > state.burn_in_steps:
        state.counter.add(state.model.identity)
    for key in state.model.identity:
        state.pop_counts[key] = state.pop_counts.get(key, 0) + 1
    state.pop_steps += 1
    record['flags'] = int(record['flags'])
    if cfg.keep_log:
        state.records.append(record)
    return state


def rg_step(state, cfg):
    """One reversible step: accept with probability
    min(1, p(m'|y) q_r(m|S,m_k) / (p(m|y) q_r(m'|S',m'_k))).
    """
    record = _transition(state, cfg, delayed=False)
    return _end_step(state, cfg, record)


def dr_step(state, cfg):
    """One delayed acceptance step: stage 1 on the target ratio from the
    forward path only, stage 2 on the q_r ratio after the backward search.
    """
    record = _transition(state, cfg, delayed=True)
    return _end_step(state, cfg, record)


def gmjmcmc_baseline_step(state, cfg):
    """One mode jumping step within the current population; every n_pop
    steps the population is filtered and refilled, the features of the
    current model being kept.
    """
    log = get_logger()
    record = _transition(state, cfg, delayed=False)
    _end_step(state, cfg, record)
    if cfg.fixed_population or state.pop_steps < cfg.n_pop:
        return state

    freq = {key: state.pop_counts.get(key, 0)/state.pop_steps for key in state.population.keys}
    try:
        state.population = next_population(state.population, state.model.features, freq,
                                           cfg.operators, state.base_covariates, state.rng,
                                           validate=state.validate_feature)
        record['flags'] |= stepmask.POPULATION_EVOLVED
        log.debug('step {}: evolved to {}'.format(state.step, state.population))
    except PopulationError as err:
        log.warning('step {}: population not evolved: {}'.format(state.step, err))
        record['flags'] |= stepmask.POPULATION_FAILURE
    state.pop_counts = dict()
    state.pop_steps = 0
    return state


STEP_FUNCTIONS = {
    RGMJMCMC: rg_step,
    RGMJMCMC_DELAYED: dr_step,
    GMJMCMC_BASELINE: gmjmcmc_baseline_step,
}


def run_chain(state, n_steps, cfg):
    """Run `n_steps` steps of the kernel cfg.kind; the first
    round(cfg.burn_in*n_steps) are not counted in the frequencies.
    """
    log = get_logger()
    step_function = STEP_FUNCTIONS[cfg.kind]
    state.burn_in_steps = state.step + int(round(cfg.burn_in*n_steps))
    state.counter.kind = cfg.kind
    for _ in range(n_steps):
        step_function(state, cfg)
    log.debug('{} steps of {}, acceptance rate {:.3f}, {} models in archive'.format(
        n_steps, cfg.kind, state.acceptance_rate(), len(state.archive)))
    return state


@dataclass
class PosteriorEstimate:
    """Model posterior probabilities and marginal inclusion probabilities.

    identities are sorted, probabilities follow the same order.
    """
    estimator: str
    identities: list
    probabilities: np.ndarray
    inclusion: dict

    def as_dict(self):
        return dict(zip(self.identities, self.probabilities.tolist()))

    def top(self, n=None):
        """(identity, probability) pairs by decreasing probability."""
        order = np.argsort(-self.probabilities, kind='stable')
        if n is not None:
            order = order[:n]
        return [(self.identities[i], float(self.probabilities[i])) for i in order]


def estimate_renormalized(archive):
    """Renormalized posterior estimate over all models of the archive.

    Raises EstimatorError if the archive is empty or has no finite target.
    """
    identities = archive.identities()
    if len(identities) == 0:
        message = 'empty model archive'
        get_logger().error(message)
        raise EstimatorError(message)
    identities, probs, _ = normalize_log_targets(identities, [archive.log_target(i) for i in identities])
    return PosteriorEstimate('renorm', identities, probs,
                             inclusion_probabilities(dict(zip(identities, probs))))


def estimate_frequency(state):
    """Frequency estimate W_m/W from a ChainState or a FrequencyCounter.

    Raises EstimatorValidityError for gmjmcmc_baseline counts and
    EstimatorError when no step was counted.
    """
    log = get_logger()
    counter = getattr(state, 'counter', state)
    if counter.kind not in REVERSIBLE_KINDS:
        message = 'frequency estimates are not valid for {}'.format(counter.kind)
        log.error(message)
        raise EstimatorValidityError(message)
    if counter.total < 1:
        message = 'no counted step'
        log.error(message)
        raise EstimatorError(message)
    identities = sorted(counter.counts)
    probs = np.array([counter.counts[i] for i in identities], dtype=float)/counter.total
    inclusion = {key: count/counter.total for key, count in sorted(counter.feature_counts.items())}
    return PosteriorEstimate('freq', identities, probs, inclusion)
