"""
Model priors, marginal likelihoods and the archive of evaluated models.

Gaussian responses use the exact evidence of a conjugate Zellner g-prior
regression; binomial responses use a BIC (Laplace-type) approximation of the
evidence from an IRLS logistic fit.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass, asdict

import numpy as np
import scipy.linalg
from scipy.special import gammaln, logsumexp, expit

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import EvidenceError, ConfigError, EstimatorError, FeatureEvaluationError
from rgmjmcmc.features import leaf, evaluate

FAMILIES = ('gaussian', 'binomial')

#- evaluated columns kept per dataset
COLUMN_CACHE_SIZE = 2048


@dataclass
class InferenceConfig:
    """Prior and evidence settings.

    gamma : complexity penalty of the model prior, None --> log(n)
    g : g-prior scale, None --> n
    a0, b0 : inverse-gamma prior of the noise variance (gaussian)
    rcond : relative singular value cutoff of the pseudo-inverse
    max_iter, tol, ridge : IRLS settings (binomial)
    """
    gamma: float = None
    g: float = None
    a0: float = 1e-3
    b0: float = 1e-3
    rcond: float = 1e-10
    max_iter: int = 100
    tol: float = 1e-8
    ridge: float = 1e-8

    def resolved_gamma(self, n=None):
        if self.gamma is not None:
            return float(self.gamma)
        if n is None:
            raise ConfigError('gamma is not set and the sample size is unknown')
        return float(np.log(n))

    def resolved_g(self, n):
        return float(n) if self.g is None else float(self.g)

    def validate(self):
        if self.a0 <= 0 or self.b0 <= 0 or (self.g is not None and self.g <= 0):
            message = 'a0={} b0={} g={} must be positive'.format(self.a0, self.b0, self.g)
            get_logger().error(message)
            raise ConfigError(message)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, params):
        return cls(**params)


class ColumnCache(OrderedDict):
    """Map canonical key -> evaluated column holding at most `maxsize`
    entries, the least recently used one evicted first.
    """

    def __init__(self, maxsize=COLUMN_CACHE_SIZE):
        super(ColumnCache, self).__init__()
        self.maxsize = int(maxsize)

    def __getitem__(self, key):
        value = super(ColumnCache, self).__getitem__(key)
        self.move_to_end(key)
        return value

    def __setitem__(self, key, value):
        super(ColumnCache, self).__setitem__(key, value)
        self.move_to_end(key)
        while len(self) > self.maxsize:
            del self[next(iter(self))]


class Dataset(object):
    """Covariates, response and family of a regression problem.

    Evaluated feature columns are cached by canonical key, at most
    `cache_size` of them.
    """

    def __init__(self, X, y, family='gaussian', names=None, response='y',
                 cache_size=COLUMN_CACHE_SIZE):
        log = get_logger()
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(y, dtype=float).ravel()
        if names is None:
            names = ['X{}'.format(i+1) for i in range(X.shape[1])]
        names = [str(name) for name in names]

        message = None
        if family not in FAMILIES:
            message = 'unknown family {}, expected one of {}'.format(family, FAMILIES)
        elif X.shape[0] != y.size:
            message = 'X has {} rows but y has {} values'.format(X.shape[0], y.size)
        elif y.size < 3:
            message = 'need at least 3 observations, got {}'.format(y.size)
        elif len(names) != X.shape[1] or len(set(names)) != len(names):
            message = 'need {} distinct covariate names, got {}'.format(X.shape[1], names)
        elif not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            message = 'data contain missing or non-finite values'
        elif family == 'binomial' and not np.all((y == 0) | (y == 1)):
            message = 'binomial response must be 0 or 1'
        elif cache_size < 1:
            message = 'cache_size={} must be >= 1'.format(cache_size)
        if message is not None:
            log.error(message)
            raise ValueError(message)

        self.X = X
        self.y = y
        self.family = family
        self.names = names
        self.response = str(response)
        self._columns = ColumnCache(cache_size)

    def __getstate__(self):
        #- lanes start with an empty cache
        state = self.__dict__.copy()
        state['_columns'] = ColumnCache(self._columns.maxsize)
        return state

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def q(self):
        return self.X.shape[1]

    def covariates(self):
        """Leaf features of all covariates (the input features F_0)."""
        return [leaf(i, name) for i, name in enumerate(self.names)]

    def column(self, feature):
        """Evaluated column of a feature (cached). Raises FeatureEvaluationError."""
        return evaluate(feature, self.X, cache=self._columns)


def identity_string(identity):
    """Printable model identity, NULL for the intercept-only model."""
    return ';'.join(identity) if len(identity) > 0 else 'NULL'


class Model(object):
    """Subset of features entering a regression with an intercept.

    Identity is the sorted tuple of canonical keys.
    """

    def __init__(self, features=()):
        self.features = tuple(features)
        self.identity = tuple(sorted(f.key for f in self.features))
        if len(set(self.identity)) != len(self.identity):
            raise ValueError('model features are not distinct: {}'.format(self.identity))
        self.log_evidence = None
        self.log_prior = None

    @property
    def size(self):
        return len(self.features)

    def complexity(self):
        return sum(f.complexity for f in self.features)

    def design(self, dataset):
        """n x (k+1) design matrix, intercept first, features in identity order."""
        columns = [np.ones(dataset.n)]
        for f in sorted(self.features, key=lambda f: f.key):
            columns.append(dataset.column(f))
        return np.column_stack(columns)

    def __repr__(self):
        return 'Model({})'.format(identity_string(self.identity))


def _gaussian_log_evidence(X, y, g, a0, b0, rcond):
    n = y.size
    u, sv, _ = scipy.linalg.svd(X, full_matrices=False)
    rank = int(np.sum(sv > rcond*sv[0]))
    proj = u[:, :rank].T.dot(y)
    yy = y.dot(y)
    ypy = proj.dot(proj)
    an = a0 + 0.5*n
    bn = b0 + 0.5*(yy - g/(1.+g)*ypy)
    return (-0.5*n*np.log(2*np.pi) - 0.5*rank*np.log1p(g)
            + a0*np.log(b0) - gammaln(a0) + gammaln(an) - an*np.log(bn))


def _logistic_loglik(y, eta):
    return float(np.sum(y*eta - np.logaddexp(0., eta)))


def _binomial_bic(X, y, cfg):
    n, p = X.shape
    beta = np.zeros(p)
    eta = np.zeros(n)
    loglik = _logistic_loglik(y, eta)
    for _ in range(cfg.max_iter):
        mu = expit(eta)
        w = np.clip(mu*(1-mu), 1e-10, None)
        z = eta + (y-mu)/w
        a = X.T.dot(w[:, None]*X)
        a[np.diag_indices(p)] += cfg.ridge*(1. + np.max(np.diag(a)))
        beta = scipy.linalg.solve(a, X.T.dot(w*z), assume_a='pos')
        eta = X.dot(beta)
        previous, loglik = loglik, _logistic_loglik(y, eta)
        if abs(loglik - previous) < cfg.tol*(abs(loglik) + 0.1):
            return loglik - 0.5*p*np.log(n)
    raise EvidenceError('IRLS did not converge in {} iterations'.format(cfg.max_iter))


def log_evidence(model, dataset, cfg=None):
    """Log marginal likelihood log p(y|m).

    gaussian : exact evidence under y ~ N(X b, s2), b ~ N(0, g s2 (X'X)^-),
               s2 ~ IG(a0, b0), X including the intercept, rank-deficient
               designs handled through the pseudo-inverse.
    binomial : maximized log-likelihood - (k+1)/2 log(n).

    Raises EvidenceError if n <= k+1 or the logistic fit does not converge.
    """
    cfg = cfg or InferenceConfig()
    X = model.design(dataset)
    n, p = X.shape
    if n <= p:
        raise EvidenceError('{} observations for {} coefficients'.format(n, p))
    if dataset.family == 'gaussian':
        return float(_gaussian_log_evidence(X, dataset.y, cfg.resolved_g(n), cfg.a0, cfg.b0, cfg.rcond))
    return float(_binomial_bic(X, dataset.y, cfg))


def log_prior(model, cfg=None, n=None):
    """Log model prior -gamma * (number of tree nodes over all features)."""
    cfg = cfg or InferenceConfig()
    if model.size == 0:
        return 0.
    return -cfg.resolved_gamma(n)*model.complexity()


class ModelArchive(object):
    """Append-only map from model identity to log prior and log evidence.
    Safe for use from several threads.

    Two counts are kept per identity:
        evaluations : log_target requests, >= 1 for every stored identity
        visits : chain steps ending with the identity as the current model
    """

    def __init__(self):
        self._entries = dict()
        self._evaluations = dict()
        self._visits = dict()
        self._lock = threading.Lock()
        self.computations = 0

    def __getstate__(self):
        state = self.__dict__.copy()
        del state['_lock']
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._entries)

    def __contains__(self, identity):
        return identity in self._entries

    def identities(self):
        """Identities in insertion order."""
        return list(self._entries.keys())

    def insert(self, identity, log_prior, log_evidence):
        with self._lock:
            if identity not in self._entries:
                self._entries[identity] = (float(log_prior), float(log_evidence))
                self._evaluations[identity] = 0
                self._visits[identity] = 0

    def evaluate(self, identity):
        with self._lock:
            self._evaluations[identity] += 1

    def visit(self, identity):
        with self._lock:
            self._visits[identity] += 1

    def evaluations(self, identity):
        return self._evaluations[identity]

    def visits(self, identity):
        return self._visits[identity]

    def log_prior(self, identity):
        return self._entries[identity][0]

    def log_evidence(self, identity):
        return self._entries[identity][1]

    def log_target(self, identity):
        lp, le = self._entries[identity]
        return lp + le

    def merge(self, other):
        """Union of two archives; evaluation and visit counts add."""
        merged = ModelArchive()
        for archive in (self, other):
            for identity, (lp, le) in archive._entries.items():
                merged.insert(identity, lp, le)
                merged._evaluations[identity] += archive._evaluations[identity]
                merged._visits[identity] += archive._visits[identity]
            merged.computations += archive.computations
        return merged


def log_target(model, dataset, cfg, archive):
    """Unnormalized log posterior log p(m) + log p(y|m), read from the archive
    when present, computed and inserted otherwise. Evidence failures give -inf.

    Counts one evaluation of the model; visits are counted by the chains.
    """
    identity = model.identity
    if identity not in archive:
        lp = log_prior(model, cfg, dataset.n)
        try:
            le = log_evidence(model, dataset, cfg)
        except (EvidenceError, FeatureEvaluationError, np.linalg.LinAlgError) as err:
            get_logger().debug('{}: {}'.format(identity_string(identity), err))
            le = -np.inf
        archive.computations += 1
        archive.insert(identity, lp, le)
    archive.evaluate(identity)
    model.log_prior = archive.log_prior(identity)
    model.log_evidence = archive.log_evidence(identity)
    return archive.log_target(identity)


class Posterior(object):
    """Target of the samplers: dataset, inference settings and archive.

    Counts log_target requests.
    """

    def __init__(self, dataset, cfg=None, archive=None):
        self.dataset = dataset
        self.cfg = cfg or InferenceConfig()
        self.archive = archive if archive is not None else ModelArchive()
        self.requests = 0

    def log_target(self, model):
        self.requests += 1
        return log_target(model, self.dataset, self.cfg, self.archive)


def normalize_log_targets(identities, log_targets):
    """Posterior probabilities from unnormalized log posteriors.

    Identities are processed in sorted order so that the result does not
    depend on the input order. Returns (sorted identities, probabilities,
    log normalizing constant).
    """
    order = sorted(range(len(identities)), key=lambda i: identities[i])
    identities = [identities[i] for i in order]
    values = np.array([log_targets[i] for i in order], dtype=float)
    if values.size == 0 or not np.any(np.isfinite(values)):
        raise EstimatorError('no model with finite posterior')
    log_norm = logsumexp(values)
    probs = np.exp(values - log_norm)
    probs /= np.sum(probs)
    return identities, probs, float(log_norm)


def inclusion_probabilities(model_probs):
    """Marginal feature inclusion probabilities from a dict identity -> probability."""
    inclusion = dict()
    for identity in sorted(model_probs):
        for key in identity:
            inclusion[key] = inclusion.get(key, 0.) + model_probs[identity]
    return inclusion
