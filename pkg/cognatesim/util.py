"""Generic utilities: random generators and replicate fan-out"""
import logging
from concurrent.futures import ProcessPoolExecutor
from numbers import Integral

import numpy as np

logger = logging.getLogger(__name__)


def check_random_state(seed):
    """Turn `seed` into a :class:`numpy.random.Generator`

    Parameters
    ----------
    seed : None, int, numpy.random.SeedSequence or numpy.random.Generator
        If None, a fresh generator is seeded from OS entropy.
        An existing Generator is returned unchanged.

    Returns
    -------
    numpy.random.Generator

    Examples
    --------
    >>> rng = check_random_state(0)
    >>> check_random_state(rng) is rng
    True
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError("%r cannot be used to seed a numpy.random.Generator" % (seed,))


def spawn_generators(seed, n):
    """Derive `n` independent generators from a master seed

    Streams are split with :meth:`numpy.random.SeedSequence.spawn`, so the
    stream of replicate ``i`` only depends on ``(seed, i)``.

    Examples
    --------
    >>> a = [g.integers(1000) for g in spawn_generators(1, 3)]
    >>> b = [g.integers(1000) for g in spawn_generators(1, 3)]
    >>> a == b
    True
    """
    if n < 0:
        raise ValueError("n must be non-negative. Got %r" % n)
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2**63))
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seed.spawn(n)]


def _call(args):
    func, rng = args
    return func(rng)


def run_replicates(func, n, seed=None, n_jobs=1):
    """Evaluate ``func(rng)`` for `n` replicates

    Parameters
    ----------
    func : callable
        Takes a :class:`numpy.random.Generator` and returns a result.
        Must be picklable when ``n_jobs > 1``.
    n : int
        Number of replicates.
    seed : int or SeedSequence, optional
        Master seed; replicate streams are spawned from it.
    n_jobs : int, default=1
        Number of worker processes.

    Returns
    -------
    list
        Results in replicate order, independent of `n_jobs`.
    """
    generators = spawn_generators(seed, n)
    if n_jobs is None or n_jobs <= 1 or n <= 1:
        return [func(rng) for rng in generators]
    logger.debug("Running %d replicates on %d workers", n, n_jobs)
    with ProcessPoolExecutor(max_workers=n_jobs) as executor:
        return list(executor.map(_call, [(func, rng) for rng in generators]))
