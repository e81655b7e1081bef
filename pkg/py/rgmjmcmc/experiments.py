"""
Synthetic data sets with planted laws and the detection metrics used to
score runs against them:

    mass : planetary mass ~ R_p^3 * rho_p
    kepler : semi-major axis ~ (P^2 M_h)^(1/3), with host mass, radius and
             temperature correlated so that three laws are near-equivalent
    logic : binomial response driven by eight conjunctions of binary covariates
"""

from dataclasses import dataclass, field

import numpy as np
from astropy.table import Table

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import ConfigError
from rgmjmcmc.features import leaf, product, unary, G2
from rgmjmcmc.inference import Dataset

EXPERIMENTS = ('mass', 'kepler', 'logic')

#- conjunctions of the logic experiment, 1-based covariate numbers
LOGIC_TREES = ((7,), (8,), (2, 9), (18, 21), (1, 3, 27), (12, 20, 37),
               (4, 10, 17, 30), (11, 13, 19, 50))
LOGIC_EFFECT = 1.5
LOGIC_INTERCEPT = -2.8


class GroundTruth(object):
    """True features of a data set.

    Args:
        targets : list of tuples of canonical keys, the equivalent forms of
                  one true feature; the target is detected when the summed
                  inclusion probability of its keys reaches `threshold`
        labels : optional names of the targets, default the first key
        threshold : detection threshold on marginal inclusion probabilities
    """

    def __init__(self, targets, labels=None, threshold=0.5):
        log = get_logger()
        targets = [tuple([t]) if isinstance(t, str) else tuple(t) for t in targets]
        if len(targets) == 0 or any(len(t) == 0 for t in targets):
            message = 'ground truth needs at least one nonempty target'
            log.error(message)
            raise ValueError(message)
        if not 0 < threshold < 1:
            message = 'detection threshold {} is not in (0,1)'.format(threshold)
            log.error(message)
            raise ValueError(message)
        if labels is None:
            labels = [t[0] for t in targets]
        self.targets = targets
        self.labels = list(labels)
        self.threshold = float(threshold)

    @classmethod
    def from_strings(cls, strings, threshold=0.5):
        """Targets written as 'key' or 'key1,key2' for any-of sets."""
        return cls([tuple(k.strip() for k in s.split(',')) for s in strings], threshold=threshold)

    def keys(self):
        return set(k for t in self.targets for k in t)


@dataclass
class RunMetrics:
    """Detection metrics averaged over replicates."""
    power: dict
    overall_power: float
    fp: float
    fdr: float
    lanes: int = 1
    replicates: int = 1
    kernel: str = ''
    degraded: bool = False
    failed_lanes: dict = field(default_factory=dict)

    def row(self):
        """Table row: T, one power column per target, overall power, FP, FDR."""
        row = {'KERNEL': self.kernel, 'T': self.lanes}
        for label, power in self.power.items():
            row['POWER_' + label] = power
        row['POWER'] = self.overall_power
        row['FP'] = self.fp
        row['FDR'] = self.fdr
        row['REPLICATES'] = self.replicates
        return row


def metrics_table(metrics):
    """astropy Table with one row per RunMetrics."""
    rows = [m.row() for m in metrics]
    table = Table()
    for name in rows[0]:
        table[name] = [r[name] for r in rows]
    return table


def compute_metrics(inclusion_probs, truth, replicates=None, lanes=1, kernel='', failed_lanes=None):
    """Power, false positives and false discovery rate of detections.

    Args:
        inclusion_probs : list (one per replicate) of dict canonical key ->
                          marginal inclusion probability, or a single dict
        truth : GroundTruth
        replicates : optional check of the number of replicates
        lanes : number of lanes T, reported only
        failed_lanes : optional dict 'replicate/lane' -> error of the failed lanes

    Returns RunMetrics
    """
    if isinstance(inclusion_probs, dict):
        inclusion_probs = [inclusion_probs]
    if replicates is not None and replicates != len(inclusion_probs):
        raise ValueError('{} replicates expected, got {}'.format(replicates, len(inclusion_probs)))
    if len(inclusion_probs) < 1:
        raise ValueError('need at least one replicate')

    true_keys = truth.keys()
    detected = np.zeros((len(inclusion_probs), len(truth.targets)))
    fps = np.zeros(len(inclusion_probs))
    fdrs = np.zeros(len(inclusion_probs))
    for r, probs in enumerate(inclusion_probs):
        detections = set(k for k, p in probs.items() if p >= truth.threshold)
        for t, target in enumerate(truth.targets):
            detected[r, t] = float(sum(probs.get(k, 0.) for k in target) >= truth.threshold)
        tp = detected[r].sum()
        fps[r] = len(detections - true_keys)
        fdrs[r] = fps[r]/(tp + fps[r]) if tp + fps[r] > 0 else 0.

    power = detected.mean(axis=0)
    return RunMetrics(power=dict(zip(truth.labels, power.tolist())),
                      overall_power=float(power.mean()), fp=float(fps.mean()),
                      fdr=float(fdrs.mean()), lanes=lanes, replicates=len(inclusion_probs),
                      kernel=kernel, degraded=bool(failed_lanes), failed_lanes=dict(failed_lanes or {}))


def _check(value, minimum, name):
    if value < minimum:
        message = '{}={} must be >= {}'.format(name, value, minimum)
        get_logger().error(message)
        raise ValueError(message)


def gen_mass_data(n=500, sigma=0.05, seed=None):
    """Planetary mass from radius and density with multiplicative noise,
    plus seven distractor covariates.

    Returns (Dataset, GroundTruth)
    """
    _check(n, 50, 'n')
    rng = np.random.default_rng(seed)
    radius = rng.lognormal(0., 0.5, n)
    density = rng.lognormal(0., 0.4, n)
    period = rng.lognormal(1.5, 1., n)
    host_mass = rng.lognormal(0., 0.25, n)
    host_radius = host_mass**0.8*rng.lognormal(0., 0.1, n)
    host_temp = 5.772*host_mass**0.5*rng.lognormal(0., 0.05, n)
    eq_temp = host_temp*np.sqrt(host_radius)/period**(1./3)*rng.lognormal(0., 0.1, n)
    eccentricity = rng.uniform(0.01, 0.5, n)
    distance = rng.lognormal(4., 0.5, n)
    mass = radius**3*density*(1. + sigma*rng.standard_normal(n))

    names = ['Rp', 'RhoP', 'P', 'Mh', 'Rh', 'Th', 'Teq', 'Ecc', 'Dist']
    X = np.column_stack([radius, density, period, host_mass, host_radius, host_temp,
                         eq_temp, eccentricity, distance])
    dataset = Dataset(X, mass, 'gaussian', names, response='Mp')
    return dataset, mass_truth()


def mass_truth():
    """R_p^3 rho_p written with a cube, a square or a plain product."""
    rp, rho = leaf(0, 'Rp'), leaf(1, 'RhoP')
    forms = (product(unary('cube', rp), rho), product(unary('square', rp), rp, rho),
             product(rp, rp, rp, rho))
    return GroundTruth([tuple(f.key for f in forms)], labels=['Rp3RhoP'])


def gen_kepler_data(n=500, sigma=0.05, seed=None):
    """Semi-major axis from period and host mass (3rd Kepler's law) with
    host mass, radius and temperature mutually correlated, plus five
    distractor covariates.

    Returns (Dataset, GroundTruth) with the any-of target (P^2 h)^(1/3),
    h one of M_h, R_h, T_h
    """
    _check(n, 50, 'n')
    rng = np.random.default_rng(seed)
    period = rng.lognormal(1.5, 1., n)
    host_mass = rng.lognormal(0., 0.25, n)
    host_radius = host_mass**0.9*rng.lognormal(0., 0.05, n)
    host_temp = 5.772*host_mass**0.6*rng.lognormal(0., 0.05, n)
    radius = rng.lognormal(0., 0.5, n)
    density = rng.lognormal(0., 0.4, n)
    eccentricity = rng.uniform(0.01, 0.5, n)
    metallicity = rng.normal(0., 0.2, n)
    distance = rng.lognormal(4., 0.5, n)
    axis = np.cbrt(period**2*host_mass)*(1. + sigma*rng.standard_normal(n))

    names = ['P', 'Mh', 'Rh', 'Th', 'Rp', 'RhoP', 'Ecc', 'Met', 'Dist']
    X = np.column_stack([period, host_mass, host_radius, host_temp, radius, density,
                         eccentricity, metallicity, distance])
    dataset = Dataset(X, axis, 'gaussian', names, response='a')
    return dataset, kepler_truth()


def kepler_truth():
    """(P^2 h)^(1/3) for h any of the host mass, radius or temperature, P^2
    written with a square or a plain product.
    """
    p = leaf(0, 'P')
    target = []
    for i, name in ((1, 'Mh'), (2, 'Rh'), (3, 'Th')):
        host = leaf(i, name)
        target.append(unary('cbrt', product(unary('square', p), host)).key)
        target.append(unary('cbrt', product(p, p, host)).key)
    return GroundTruth([target], labels=['F1F2F3'])


def logic_trees():
    """Product features of the eight conjunctions of the logic experiment."""
    trees = []
    for tree in LOGIC_TREES:
        leaves = [leaf(i-1) for i in tree]
        trees.append(leaves[0] if len(leaves) == 1 else product(*leaves))
    return trees


def gen_logic_data(n=1000, seed=None):
    """50 Bernoulli(0.5) covariates X1..X50 and a binomial response with
    logit = intercept + equal effects on the eight conjunctions.

    Returns (Dataset, GroundTruth)
    """
    _check(n, 200, 'n')
    rng = np.random.default_rng(seed)
    X = (rng.random((n, 50)) < 0.5).astype(float)
    logit = LOGIC_INTERCEPT*np.ones(n)
    for tree in LOGIC_TREES:
        logit += LOGIC_EFFECT*np.prod(X[:, [i-1 for i in tree]], axis=1)
    y = (rng.random(n) < 1./(1. + np.exp(-logit))).astype(float)
    dataset = Dataset(X, y, 'binomial', response='Y')
    return dataset, logic_truth()


def logic_truth():
    return GroundTruth([(t.key,) for t in logic_trees()],
                       labels=['L{}'.format(i+1) for i in range(len(LOGIC_TREES))])


GENERATORS = {
    'mass': lambda n, sigma, seed: gen_mass_data(n, sigma, seed),
    'kepler': lambda n, sigma, seed: gen_kepler_data(n, sigma, seed),
    'logic': lambda n, sigma, seed: gen_logic_data(n, seed),
}

#- per experiment data size, noise and sampler sections; lanes come from --threads
EXPERIMENT_DEFAULTS = {
    'mass': {'n': 500, 'sigma': 0.05,
             'run': {'pop_size': 15, 'max_model_size': 6, 'iterations': 250},
             'operators': {'nonlinearities': list(G2)},
             'local': {'k_local': 4, 'rho_jump': 0.2}},
    'kepler': {'n': 500, 'sigma': 0.05,
               'run': {'pop_size': 15, 'max_model_size': 6, 'iterations': 250},
               'operators': {'nonlinearities': list(G2)},
               'local': {'k_local': 4, 'rho_jump': 0.2}},
    'logic': {'n': 1000, 'sigma': None,
              'run': {'pop_size': 15, 'max_model_size': 10, 'iterations': 500},
              'operators': {'nonlinearities': [], 'p_mutation': 0.3, 'p_crossover': 0.7,
                            'p_modification': 0., 'p_projection': 0., 'distinct_factors': True},
              'local': {'k_local': 4}},
}


def generate(name, n=None, sigma=None, seed=None):
    """(Dataset, GroundTruth) of a named experiment with its default size and noise."""
    if name not in EXPERIMENTS:
        message = 'unknown experiment {}, expected one of {}'.format(name, EXPERIMENTS)
        get_logger().error(message)
        raise ConfigError(message)
    defaults = EXPERIMENT_DEFAULTS[name]
    n = defaults['n'] if n is None else n
    sigma = defaults['sigma'] if sigma is None else sigma
    return GENERATORS[name](n, sigma, seed)


def ground_truth(name, threshold=0.5):
    """GroundTruth of a named experiment, without generating data."""
    truth = {'mass': mass_truth, 'kepler': kepler_truth, 'logic': logic_truth}[name]()
    truth.threshold = float(threshold)
    return truth


def run_experiment(name, cfg=None, replicates=1, n=None, sigma=None, threshold=0.5):
    """Generate `replicates` data sets of experiment `name`, run the sampler
    on each with cfg.threads lanes and score the detections.

    Args:
        name : one of EXPERIMENTS
        cfg : RunConfig, default the experiment defaults; replicate r uses
              seed (cfg.seed, r) for both data and lanes
        replicates : number of replicates
        n, sigma : data size and noise, default per experiment
        threshold : detection threshold

    Returns (RunMetrics, list of inclusion dicts); RunMetrics.degraded is
    set when a lane of any replicate failed. Raises RGMJMCMCError when all
    lanes of a replicate failed.
    """
    from rgmjmcmc.runner import RunConfig, run_lanes, merge_lanes, estimates

    log = get_logger()
    if cfg is None:
        cfg = RunConfig.for_experiment(name)
    cfg.validate()
    inclusions = []
    failed_lanes = dict()
    for r in range(replicates):
        dataset, _ = generate(name, n, sigma, seed=[cfg.seed, r])
        results = run_lanes(dataset, cfg, entropy=[cfg.seed, r])
        for result in results:
            if result.error is not None:
                failed_lanes['{}/{}'.format(r, result.lane)] = result.error
                log.warning('{} replicate {}: lane {} failed'.format(name, r, result.lane))
        archive, counter = merge_lanes(results, cfg.kernel)
        renorm, freq = estimates(archive, counter, cfg.estimator)
        inclusions.append((renorm if renorm is not None else freq).inclusion)
        log.info('{} replicate {}/{} done'.format(name, r+1, replicates))
    metrics = compute_metrics(inclusions, ground_truth(name, threshold), replicates,
                              lanes=cfg.threads, kernel=cfg.kernel, failed_lanes=failed_lanes)
    return metrics, inclusions
