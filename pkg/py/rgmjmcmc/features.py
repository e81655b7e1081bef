"""
Generated features as expression trees over the input covariates.

A feature is a leaf (one covariate), a product of features, a unary
nonlinearity of a feature, or a projection: a nonlinearity applied to a
weighted sum of features. Features are immutable; equality and hashing go
through the canonical key.
"""

import numpy as np
from scipy.special import expit

from rgmjmcmc.errors import FeatureEvaluationError

LEAF = 'leaf'
PRODUCT = 'product'
UNARY = 'unary'
PROJECTION = 'projection'

#- name -> (function, key template)
#- log and sqrt act on |x| so that every feature is defined on any input
NONLINEARITIES = {
    'cbrt':    (np.cbrt,                          '({})^(1/3)'),
    'square':  (np.square,                        '({})^2'),
    'cube':    (lambda x: x*x*x,                  '({})^3'),
    'log':     (lambda x: np.log1p(np.abs(x)),    'log(|{}|+1)'),
    'sqrt':    (lambda x: np.sqrt(np.abs(x)),     'sqrt(|{}|)'),
    'sigmoid': (expit,                            'sigmoid({})'),
}

#- products only (logic regression)
G1 = ()
G2 = ('cbrt', 'square', 'cube', 'log', 'sqrt', 'sigmoid')

#- projection weights
PROJECTION_WEIGHTS = (-1., -0.5, 0.5, 1.)


def _format_weight(weight):
    return '{:g}'.format(weight)


class Feature(object):
    """Node of a feature expression tree.

    Do not call the constructor directly, use :func:`leaf`, :func:`product`,
    :func:`unary` or :func:`projection`.
    """

    __slots__ = ('kind', 'index', 'name', 'children', 'func', 'weights',
                 'depth', 'complexity', 'key', '_hash')

    def __init__(self, kind, children=(), index=None, name=None, func=None, weights=None):
        self.kind = kind
        self.index = index
        self.name = name
        self.children = tuple(children)
        self.func = func
        self.weights = None if weights is None else tuple(float(w) for w in weights)

        if kind == LEAF:
            self.depth = 0
            self.complexity = 1
        else:
            self.depth = 1 + max(c.depth for c in self.children)
            self.complexity = 1 + sum(c.complexity for c in self.children)

        self.key = self._make_key()
        self._hash = hash(self.key)

    def _make_key(self):
        if self.kind == LEAF:
            return self.name
        if self.kind == PRODUCT:
            return '*'.join(sorted(c.key for c in self.children))
        template = NONLINEARITIES[self.func][1]
        if self.kind == UNARY:
            return template.format(self.children[0].key)
        terms = []
        for weight, child in sorted(zip(self.weights, self.children), key=lambda t: t[1].key):
            ckey = child.key
            if child.kind == PRODUCT:
                ckey = '(' + ckey + ')'
            terms.append('{}*{}'.format(_format_weight(weight), ckey))
        return template.format('+'.join(terms).replace('+-', '-'))

    def __setattr__(self, name, value):
        if hasattr(self, '_hash'):
            raise AttributeError('Feature is immutable')
        object.__setattr__(self, name, value)

    def __getstate__(self):
        return (self.kind, self.children, self.index, self.name, self.func, self.weights)

    def __setstate__(self, state):
        kind, children, index, name, func, weights = state
        self.__init__(kind, children, index, name, func, weights)

    def __eq__(self, other):
        if not isinstance(other, Feature):
            return NotImplemented
        return self.key == other.key

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "Feature('{}')".format(self.key)

    def __str__(self):
        return self.key

    def leaves(self):
        """Returns the sorted list of covariate indices used by this feature."""
        if self.kind == LEAF:
            return [self.index]
        indices = []
        for child in self.children:
            indices += child.leaves()
        return sorted(indices)


def leaf(index, name=None):
    """Feature for the covariate in column `index` (0-based); default name X{index+1}."""
    index = int(index)
    if index < 0:
        raise ValueError('negative covariate index {}'.format(index))
    if name is None:
        name = 'X{}'.format(index+1)
    return Feature(LEAF, index=index, name=str(name))


def product(*children):
    """Product of at least two features; nested products are flattened,
    repeated factors are kept, factors are stored in key order.
    """
    if len(children) == 1 and not isinstance(children[0], Feature):
        children = tuple(children[0])
    factors = []
    for child in children:
        if child.kind == PRODUCT:
            factors.extend(child.children)
        else:
            factors.append(child)
    if len(factors) < 2:
        raise ValueError('a product needs at least two factors')
    return Feature(PRODUCT, children=sorted(factors, key=lambda f: f.key))


def unary(func, child):
    """Nonlinearity `func` (a key of NONLINEARITIES) applied to `child`."""
    if func not in NONLINEARITIES:
        raise ValueError('unknown nonlinearity {}'.format(func))
    return Feature(UNARY, children=(child,), func=func)


def projection(func, children, weights):
    """Nonlinearity `func` applied to sum_i weights[i]*children[i], terms
    stored in key order.
    """
    children = tuple(children)
    if func not in NONLINEARITIES:
        raise ValueError('unknown nonlinearity {}'.format(func))
    if len(children) < 2 or len(children) != len(weights):
        raise ValueError('a projection needs two or more children with one weight each')
    if len(set(c.key for c in children)) != len(children):
        raise ValueError('projection children must be distinct')
    terms = sorted(zip(children, weights), key=lambda t: t[0].key)
    return Feature(PROJECTION, children=[c for c, _ in terms], func=func, weights=[w for _, w in terms])


def canonical_key(feature):
    """Returns the canonical key of `feature`, identical for structurally
    equal features up to the order of product factors.
    """
    return feature.key


def evaluate(feature, X, cache=None):
    """Evaluate a feature on data.

    Args:
        feature : Feature
        X : 2D array (n x q) of covariates
        cache : optional dict canonical key -> column, reused and filled

    Returns:
        1D float array of length n

    Raises FeatureEvaluationError if the result is not finite.
    """
    if cache is not None and feature.key in cache:
        return cache[feature.key]

    if feature.kind == LEAF:
        if feature.index >= X.shape[1]:
            raise ValueError('feature {} uses column {} but data has {} columns'.format(
                feature.key, feature.index, X.shape[1]))
        column = np.asarray(X[:, feature.index], dtype=float)
    else:
        values = [evaluate(child, X, cache) for child in feature.children]
        with np.errstate(all='ignore'):
            if feature.kind == PRODUCT:
                column = values[0].copy()
                for value in values[1:]:
                    column *= value
            elif feature.kind == UNARY:
                column = NONLINEARITIES[feature.func][0](values[0])
            else:
                combination = np.zeros(X.shape[0])
                for weight, value in zip(feature.weights, values):
                    combination += weight*value
                column = NONLINEARITIES[feature.func][0](combination)

    if not np.all(np.isfinite(column)):
        raise FeatureEvaluationError('feature {} has non-finite values'.format(feature.key))

    if cache is not None:
        cache[feature.key] = column
    return column
