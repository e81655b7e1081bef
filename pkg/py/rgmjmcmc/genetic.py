"""
Populations of features and the genetic operators that evolve them:
mutation, crossover, modification, projection and filtration.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import OperatorError, PopulationError, ConfigError, FeatureEvaluationError
from rgmjmcmc.features import (NONLINEARITIES, G2, PROJECTION_WEIGHTS, PRODUCT,
                               product, unary, projection)

MUTATION = 'mutation'
CROSSOVER = 'crossover'
MODIFICATION = 'modification'
PROJECTION = 'projection'
OPERATOR_KINDS = (MUTATION, CROSSOVER, MODIFICATION, PROJECTION)


@dataclass
class OperatorConfig:
    """Probabilities of the four replacement operators, nonlinearity set,
    filtration threshold and depth cap. With distinct_factors, products
    repeating a factor are rejected (binary covariates, where X*X = X).
    """
    p_mutation: float = 0.2
    p_crossover: float = 0.4
    p_modification: float = 0.2
    p_projection: float = 0.2
    nonlinearities: tuple = field(default_factory=lambda: tuple(G2))
    pi_min: float = 0.05
    max_depth: int = 5
    max_retries: int = 50
    distinct_factors: bool = False

    def probabilities(self):
        return np.array([self.p_mutation, self.p_crossover, self.p_modification, self.p_projection])

    def validate(self):
        log = get_logger()
        probs = self.probabilities()
        message = None
        if np.any(probs < 0):
            message = 'operator probabilities must be non-negative, got {}'.format(probs.tolist())
        elif abs(probs.sum() - 1.) > 1e-12:
            message = 'operator probabilities must sum to 1, got {}'.format(probs.sum())
        elif not 0 < self.pi_min < 1:
            message = 'pi_min={} is not in (0,1)'.format(self.pi_min)
        elif self.max_depth < 0 or self.max_retries < 1:
            message = 'max_depth={} max_retries={} are invalid'.format(self.max_depth, self.max_retries)
        else:
            unknown = [g for g in self.nonlinearities if g not in NONLINEARITIES]
            if unknown:
                message = 'unknown nonlinearities {}'.format(unknown)
        if message is not None:
            log.error(message)
            raise ConfigError(message)
        return self

    def to_dict(self):
        params = asdict(self)
        params['nonlinearities'] = list(self.nonlinearities)
        return params

    @classmethod
    def from_dict(cls, params):
        params = dict(params)
        if 'nonlinearities' in params:
            params['nonlinearities'] = tuple(params['nonlinearities'] or ())
        return cls(**params)


class Population(object):
    """Ordered set of distinct features spanning a local model space.

    Args:
        features : iterable of Feature
        generation : generation index t
    """

    def __init__(self, features, generation=0):
        self.features = tuple(features)
        self.generation = int(generation)
        self.keys = tuple(f.key for f in self.features)
        self._index = {key: i for i, key in enumerate(self.keys)}
        if len(self._index) != len(self.keys):
            message = 'population features are not distinct: {}'.format(self.keys)
            get_logger().error(message)
            raise PopulationError(message)

    @property
    def size(self):
        return len(self.features)

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, i):
        return self.features[i]

    def __contains__(self, feature_or_key):
        key = getattr(feature_or_key, 'key', feature_or_key)
        return key in self._index

    def index(self, key):
        return self._index[key]

    def contains_all(self, keys):
        return all(key in self._index for key in keys)

    def mask(self, keys):
        """Boolean inclusion mask of the features with canonical keys `keys`."""
        mask = np.zeros(self.size, dtype=bool)
        for key in keys:
            mask[self._index[key]] = True
        return mask

    def subset(self, mask):
        """Features selected by a boolean mask."""
        return [f for f, included in zip(self.features, mask) if included]

    def __repr__(self):
        return 'Population(t={}, {})'.format(self.generation, list(self.keys))


def draw_operator(cfg, rng):
    """Draw one operator kind with probabilities (P_m, P_c, P_t, P_p)."""
    return OPERATOR_KINDS[rng.choice(len(OPERATOR_KINDS), p=cfg.probabilities())]


def _draw_candidate(kind, pool, base_covariates, cfg, rng):
    """One draw of the operator, None if the operator cannot apply."""
    if kind == MUTATION:
        pool_keys = set(f.key for f in pool)
        choices = [f for f in base_covariates if f.key not in pool_keys]
        if len(choices) == 0:
            choices = list(base_covariates)
        return choices[rng.integers(len(choices))]

    if kind == CROSSOVER:
        if len(pool) < 2:
            return None
        i, j = rng.choice(len(pool), size=2, replace=False)
        return product(pool[i], pool[j])

    if len(cfg.nonlinearities) == 0 or len(pool) == 0:
        return None
    g = cfg.nonlinearities[rng.integers(len(cfg.nonlinearities))]

    if kind == MODIFICATION:
        return unary(g, pool[rng.integers(len(pool))])

    if kind == PROJECTION:
        if len(pool) < 2:
            return None
        nterms = rng.integers(2, min(3, len(pool)) + 1)
        indices = rng.choice(len(pool), size=nterms, replace=False)
        weights = rng.choice(PROJECTION_WEIGHTS, size=nterms)
        return projection(g, [pool[i] for i in indices], weights)

    raise ValueError('unknown operator kind {}'.format(kind))


def _repeats_factor(feature):
    if feature.kind != PRODUCT:
        return False
    return len(set(c.key for c in feature.children)) < len(feature.children)


def generate_replacement(kind, source_pool, base_covariates, cfg, rng, exclude=None, validate=None):
    """Generate one new feature with the given operator.

    Args:
        kind : one of OPERATOR_KINDS
        source_pool : list of Feature the operator combines
        base_covariates : list of leaf Feature (the input features F_0)
        cfg : OperatorConfig
        rng : numpy Generator
        exclude : optional set of canonical keys the result must avoid
        validate : optional callable(feature) -> bool, rejects candidates

    Returns:
        Feature with depth <= cfg.max_depth

    Raises OperatorError when no valid feature is found in cfg.max_retries draws.
    """
    if len(base_covariates) == 0:
        raise ValueError('no base covariates')
    exclude = exclude or ()
    source_pool = list(source_pool)
    for _ in range(cfg.max_retries):
        candidate = _draw_candidate(kind, source_pool, base_covariates, cfg, rng)
        if candidate is None:
            break
        if candidate.depth > cfg.max_depth or candidate.key in exclude:
            continue
        if cfg.distinct_factors and _repeats_factor(candidate):
            continue
        if validate is not None and not validate(candidate):
            continue
        return candidate
    raise OperatorError('{} failed to produce a valid feature'.format(kind))


def fill_population(members, source_pool, base_covariates, size, cfg, rng, generation=0,
                    validate=None, grow_pool=False):
    """Complete `members` to `size` distinct features with operator draws.

    The operator kind of every replacement is drawn with draw_operator; a
    failed operator is followed by a fresh kind draw. With grow_pool, each
    new feature joins the source pool.

    Raises PopulationError if `size` cannot be reached in size*cfg.max_retries attempts.
    """
    members = list(members)
    keys = set(f.key for f in members)
    pool = list(source_pool)
    attempts = size*cfg.max_retries
    while len(members) < size and attempts > 0:
        attempts -= 1
        kind = draw_operator(cfg, rng)
        try:
            feature = generate_replacement(kind, pool, base_covariates, cfg, rng,
                                           exclude=keys, validate=validate)
        except OperatorError:
            continue
        members.append(feature)
        keys.add(feature.key)
        if grow_pool:
            pool.append(feature)
    if len(members) < size:
        message = 'could only build {} of {} distinct features'.format(len(members), size)
        get_logger().warning(message)
        raise PopulationError(message)
    return Population(members, generation=generation)


def _frequency(inclusion_freq, feature):
    if feature.key in inclusion_freq:
        return inclusion_freq[feature.key]
    if feature in inclusion_freq:
        return inclusion_freq[feature]
    raise KeyError('no inclusion frequency for feature {}'.format(feature.key))


def filtration(pop, inclusion_freq, pi_min, protected=()):
    """Remove features whose inclusion frequency is below `pi_min`.

    Args:
        pop : Population
        inclusion_freq : dict canonical key (or Feature) -> frequency in [0,1]
        pi_min : threshold
        protected : features (or keys) always kept

    Returns (survivors, n_removed)
    """
    protected_keys = set(getattr(f, 'key', f) for f in protected)
    survivors = [f for f in pop if f.key in protected_keys or _frequency(inclusion_freq, f) >= pi_min]
    return survivors, pop.size - len(survivors)


def next_population(current, protected, inclusion_freq, cfg, base_covariates, rng, validate=None):
    """Next population of the same size: filtration of `current` (protected
    features kept), then refill from the operators applied to `current`.

    Raises PopulationError if protected features exceed the size or the
    population cannot be refilled.
    """
    log = get_logger()
    s = current.size
    protected = list(protected)
    if len(protected) > s:
        message = '{} protected features do not fit in a population of {}'.format(len(protected), s)
        log.error(message)
        raise PopulationError(message)

    survivors, n_removed = filtration(current, inclusion_freq, cfg.pi_min, protected)
    members = []
    keys = set()
    for f in protected + survivors:
        if f.key not in keys and len(members) < s:
            members.append(f)
            keys.add(f.key)
    log.debug('generation {}: filtration removed {}, refilling {}'.format(
        current.generation, n_removed, s - len(members)))

    return fill_population(members, current.features, base_covariates, s, cfg, rng,
                           generation=current.generation + 1, validate=validate)


def evaluable(dataset):
    """Returns a validate callable accepting features that evaluate to finite
    values on `dataset`.
    """
    log = get_logger()

    def _validate(feature):
        try:
            dataset.column(feature)
        except FeatureEvaluationError as err:
            log.debug('discard {}'.format(err))
            return False
        return True

    return _validate
