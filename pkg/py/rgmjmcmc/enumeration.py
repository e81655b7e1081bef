"""
Exact posterior over all models of size <= Q built from a fixed feature list.
"""

import itertools

import numpy as np
from astropy.table import Table
from scipy.special import comb

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import EnumerationError
from rgmjmcmc.inference import (Model, ModelArchive, log_target, identity_string,
                                normalize_log_targets, inclusion_probabilities)
from rgmjmcmc.io import write_table

MAX_MODELS = 10**6


def count_models(q, max_size):
    """Number of models with at most max_size of q features, null model included."""
    return int(sum(comb(q, k, exact=True) for k in range(min(q, max_size)+1)))


class EnumeratedPosterior(object):
    """Exact posterior table.

    Attributes:
        identities : sorted model identities
        probabilities : posterior probabilities, same order
        log_targets : unnormalized log posteriors, same order
        log_norm : log normalizing constant
        q, max_size : number of features and size cap
    """

    def __init__(self, identities, probabilities, log_targets, log_norm, q, max_size, archive=None):
        self.identities = list(identities)
        self.probabilities = np.asarray(probabilities)
        self.log_targets = np.asarray(log_targets)
        self.log_norm = log_norm
        self.q = q
        self.max_size = max_size
        self.archive = archive

    def __len__(self):
        return len(self.identities)

    def as_dict(self):
        return dict(zip(self.identities, self.probabilities.tolist()))

    def inclusion(self):
        """Exact marginal inclusion probabilities per canonical key."""
        return inclusion_probabilities(self.as_dict())

    def to_table(self):
        table = Table()
        table['IDENTITY'] = [identity_string(i) for i in self.identities]
        table['SIZE'] = np.array([len(i) for i in self.identities], dtype=int)
        if self.archive is not None:
            table['LOG_PRIOR'] = [self.archive.log_prior(i) for i in self.identities]
            table['LOG_EVIDENCE'] = [self.archive.log_evidence(i) for i in self.identities]
        table['LOG_TARGET'] = self.log_targets
        table['PROB'] = self.probabilities
        return table

    def write(self, path):
        write_table(self.to_table(), path)


def enumerate_posterior(features, max_size, dataset, cfg=None, archive=None, max_models=MAX_MODELS):
    """Evaluate every model of at most `max_size` features of `features` and
    normalize.

    Args:
        features : list of distinct Feature
        max_size : size cap Q
        dataset : Dataset
        cfg : InferenceConfig
        archive : optional ModelArchive receiving the models
        max_models : refuse larger spaces

    Returns EnumeratedPosterior

    Raises EnumerationError if the model space has more than max_models models.
    """
    log = get_logger()
    features = list(features)
    nmodels = count_models(len(features), max_size)
    if nmodels > max_models:
        message = '{} models with q={} Q={} exceed the limit of {}'.format(
            nmodels, len(features), max_size, max_models)
        log.error(message)
        raise EnumerationError(message)
    if archive is None:
        archive = ModelArchive()

    identities = []
    values = []
    for k in range(min(len(features), max_size)+1):
        for subset in itertools.combinations(features, k):
            model = Model(subset)
            values.append(log_target(model, dataset, cfg, archive))
            identities.append(model.identity)
    log.debug('enumerated {} models'.format(len(identities)))

    order = sorted(range(len(identities)), key=lambda i: identities[i])
    identities, probs, log_norm = normalize_log_targets(identities, values)
    values = np.array([values[i] for i in order])
    return EnumeratedPosterior(identities, probs, values, log_norm, len(features), max_size, archive)


def total_variation(p, q):
    """Total variation distance between two dicts identity -> probability."""
    support = set(p) | set(q)
    return 0.5*sum(abs(p.get(i, 0.) - q.get(i, 0.)) for i in support)
