"""
Various utility methods that are used across the
simulation modules: the common error base, estimator
summaries, log-log fits and seed derivation.
"""
import hashlib
import math
from functools import lru_cache

import numpy as np


class WaveKacError(Exception):
    "Base class for all errors raised by wavekac"
    pass


def mean_and_se(values):
    """
    Returns (mean, sample variance, standard error) of a
    sequence of replicate estimates. The variance uses the
    unbiased (n-1) normalization and is 0 for a single value.
    """
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n == 0:
        return (float("nan"), float("nan"), float("nan"))
    mean = float(arr.mean())
    if n == 1:
        return (mean, 0.0, 0.0)
    var = float(arr.var(ddof=1))
    return (mean, var, math.sqrt(var / n))


def batch_mean_and_se(values, batches=20):
    """
    Returns (mean, standard error) of a long vector of i.i.d.
    Monte Carlo terms, the standard error estimated from
    the spread of batch means.
    """
    arr = np.asarray(values, dtype=float)
    batches = max(2, min(batches, arr.size))
    usable = (arr.size // batches) * batches
    means = arr[:usable].reshape(batches, -1).mean(axis=1)
    return float(arr.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def loglog_slope(x, y):
    "Least-squares slope of log(y) against log(x)"
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def upper_envelope(values):
    """
    Returns the running supremum taken from the right, i.e.
    env[i] = max(values[i:]). Turns an oscillating decaying
    profile into a monotone envelope suitable for a power fit.
    """
    arr = np.asarray(values, dtype=float)
    return np.maximum.accumulate(arr[::-1])[::-1]


def relative_error(value, target):
    "Returns |value - target| / |target|"
    return abs(value - target) / abs(target)


@lru_cache(maxsize=None)
def small_block_partitions(indices):
    """
    Returns all set partitions of the positions of `indices`
    into blocks of size one or two. Each partition is a tuple
    of blocks, a block being a tuple of coordinate indices.
    Used for the Faa di Bruno expansion of f(|w|^2 / 2).
    """
    indices = tuple(indices)
    if not indices:
        return ((),)
    first, rest = indices[0], indices[1:]
    result = []
    for part in small_block_partitions(rest):
        result.append(((first,),) + part)
    for pos in range(len(rest)):
        remaining = rest[:pos] + rest[pos + 1:]
        for part in small_block_partitions(remaining):
            result.append(((first, rest[pos]),) + part)
    return tuple(result)


@lru_cache(maxsize=None)
def set_partitions(items):
    """
    Returns all set partitions of the tuple `items`. Each
    partition is a tuple of blocks (tuples of items).
    """
    items = tuple(items)
    if not items:
        return ((),)
    first, rest = items[0], items[1:]
    result = []
    for part in set_partitions(rest):
        result.append(((first,),) + part)
        for pos in range(len(part)):
            grown = part[:pos] + ((first,) + part[pos],) + part[pos + 1:]
            result.append(grown)
    return tuple(result)


def multi_index_to_list(alpha):
    "Expands a multi-index (2, 0, 1) into the index list (0, 0, 2)"
    out = []
    for i, count in enumerate(alpha):
        out.extend([i] * int(count))
    return tuple(out)


def stream_seed(master_seed, *key):
    """
    Derives an independent numpy SeedSequence from the master
    seed and a key such as (experiment id, cell index, replica index).
    String parts are hashed so the key is stable across processes.
    """
    words = []
    for part in key:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "little"))
        else:
            words.append(int(part))
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(words))


def stream_rng(master_seed, *key):
    "Returns a Generator seeded by stream_seed"
    return np.random.default_rng(stream_seed(master_seed, *key))
