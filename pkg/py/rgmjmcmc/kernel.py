"""
Mode jumping proposal within one population: large jump, local
optimization, final randomization, and the log ratio of randomization
densities entering the acceptance probability.

Models are boolean inclusion masks over the features of a population.
"""

from dataclasses import dataclass, asdict

import numpy as np
from scipy.stats import binom

from rgmjmcmc.log import get_logger
from rgmjmcmc.errors import ProposalError, ConfigError
from rgmjmcmc.inference import Model

LOCAL_MOVES = ('greedy', 'metropolis')


@dataclass
class LocalKernelConfig:
    """rho_jump : per-feature swap probability of the large jump
    k_local : number of local optimization steps
    local_move : 'greedy' or 'metropolis'
    rho_r : per-feature swap probability of the randomization
    max_retries : randomization draws before giving up on the size cap
    """
    rho_jump: float = 0.35
    k_local: int = 15
    local_move: str = 'greedy'
    rho_r: float = 0.05
    max_retries: int = 50

    def validate(self):
        message = None
        if not 0 <= self.rho_jump <= 1:
            message = 'rho_jump={} is not in [0,1]'.format(self.rho_jump)
        elif not 0 < self.rho_r < 0.5:
            message = 'rho_r={} is not in (0,0.5)'.format(self.rho_r)
        elif self.k_local < 0:
            message = 'k_local={} is negative'.format(self.k_local)
        elif self.local_move not in LOCAL_MOVES:
            message = 'local_move={} is not one of {}'.format(self.local_move, LOCAL_MOVES)
        elif self.max_retries < 1:
            message = 'max_retries={} must be >= 1'.format(self.max_retries)
        if message is not None:
            get_logger().error(message)
            raise ConfigError(message)
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, params):
        return cls(**params)


def hamming(a, b):
    """Number of differing inclusion bits."""
    return int(np.count_nonzero(np.asarray(a, dtype=bool) != np.asarray(b, dtype=bool)))


def mask_model(population, mask):
    return Model(population.subset(mask))


def large_jump(mask, cfg, rng, max_size=None):
    """Flip every bit with probability cfg.rho_jump, then drop uniformly
    chosen inclusions beyond max_size.
    """
    mask = np.asarray(mask, dtype=bool)
    out = mask ^ (rng.random(mask.size) < cfg.rho_jump)
    if max_size is not None:
        included = np.flatnonzero(out)
        if included.size > max_size:
            out[rng.choice(included, size=included.size - max_size, replace=False)] = False
    return out


def local_optimize(mask, population, posterior, cfg, rng=None, max_size=None):
    """Local search over single-bit flips within the population.

    greedy : move to the best neighbour while it improves the target, at
             most cfg.k_local moves
    metropolis : cfg.k_local single-bit-flip Metropolis steps (needs rng)

    Every evaluated model enters the posterior archive: the start and at
    most population.size neighbours per move, 1 + cfg.k_local*population.size
    models per call. Returns the final mask.
    """
    current = np.array(mask, dtype=bool)
    if cfg.k_local == 0:
        return current
    if max_size is None:
        max_size = current.size
    values = dict()

    def target(m):
        key = m.tobytes()
        if key not in values:
            values[key] = posterior.log_target(mask_model(population, m))
        return values[key]

    current_value = target(current)
    size = int(current.sum())

    if cfg.local_move == 'greedy':
        for _ in range(cfg.k_local):
            best_value, best_bit = current_value, None
            for bit in range(current.size):
                if not current[bit] and size >= max_size:
                    continue
                current[bit] = not current[bit]
                value = target(current)
                current[bit] = not current[bit]
                if value > best_value:
                    best_value, best_bit = value, bit
            if best_bit is None:
                break
            current[best_bit] = not current[best_bit]
            size += 1 if current[best_bit] else -1
            current_value = best_value
        return current

    for _ in range(cfg.k_local):
        bit = rng.integers(current.size)
        if not current[bit] and size >= max_size:
            continue
        current[bit] = not current[bit]
        value = target(current)
        if np.log(rng.random()) < value - current_value:
            current_value = value
            size += 1 if current[bit] else -1
        else:
            current[bit] = not current[bit]
    return current


def randomize(mask, cfg, rng, max_size=None):
    """Flip every bit with probability cfg.rho_r; draws with more than
    max_size inclusions are redrawn, at most cfg.max_retries times.

    Raises ProposalError when all draws exceed max_size.
    """
    mask = np.asarray(mask, dtype=bool)
    for _ in range(cfg.max_retries):
        out = mask ^ (rng.random(mask.size) < cfg.rho_r)
        if max_size is None or np.count_nonzero(out) <= max_size:
            return out
    raise ProposalError('randomization exceeded the size cap {} times'.format(cfg.max_retries))


def log_qr_ratio(m, mk, m_prime, m_prime_k, rho_r):
    """log q_r(m|S,m_k)/q_r(m'|S',m'_k) = (d(m,m_k) - d(m',m'_k)) log(rho_r).

    m is None when the backward population misses a feature of m; the
    reverse move then has probability zero and -inf is returned.
    """
    if m is None:
        return -np.inf
    return (hamming(m, mk) - hamming(m_prime, m_prime_k))*np.log(rho_r)


def _log_cap_acceptance(k, s, rho_r, max_size):
    """log P(randomize output has <= max_size inclusions | k inclusions in)."""
    removed = binom.pmf(np.arange(k+1), k, rho_r)
    added = binom.pmf(np.arange(s-k+1), s-k, rho_r)
    sizes = k - np.arange(k+1)[:, None] + np.arange(s-k+1)[None, :]
    return np.log(np.sum(np.outer(removed, added)[sizes <= max_size]))


def log_qr_density(m, mk, rho_r, max_size=None, max_retries=1):
    """Exact log probability that randomize turns mk into m, with the
    (1-rho_r) factors and the renormalization of the redraws under the size cap.
    """
    m = np.asarray(m, dtype=bool)
    mk = np.asarray(mk, dtype=bool)
    s = mk.size
    d = hamming(m, mk)
    value = d*np.log(rho_r) + (s-d)*np.log1p(-rho_r)
    if max_size is None or max_size >= s:
        return value
    if np.count_nonzero(m) > max_size:
        return -np.inf
    log_z = _log_cap_acceptance(int(np.count_nonzero(mk)), s, rho_r, max_size)
    #- P(success within max_retries) / P(success in one draw)
    log_fail = np.log1p(-np.exp(log_z)) if log_z < 0 else -np.inf
    return value + np.log1p(-np.exp(max_retries*log_fail)) - log_z


def log_qr_ratio_exact(m, mk, m_prime, m_prime_k, rho_r, max_size=None, max_retries=1):
    """Exact counterpart of log_qr_ratio based on log_qr_density."""
    if m is None:
        return -np.inf
    return (log_qr_density(m, mk, rho_r, max_size, max_retries)
            - log_qr_density(m_prime, m_prime_k, rho_r, max_size, max_retries))
