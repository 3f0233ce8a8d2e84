"""Tree comparison metrics and distribution checks"""
import functools
import logging
import math
import warnings
from collections import namedtuple
from itertools import chain, combinations

import numpy as np
import pandas as pd
from scipy import linalg, stats

from .substitution import check_rate_matrix, transition_matrix

logger = logging.getLogger(__name__)

#: Pairings of a quartet ``(a, b, c, d)``: ab|cd, ac|bd and ad|bc.
QUARTET_SPLITS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


@functools.lru_cache(maxsize=8)
def _quartets(n):
    count = math.comb(n, 4)
    flat = np.fromiter(
        chain.from_iterable(combinations(range(n), 4)), dtype=np.int32, count=4 * count
    )
    out = flat.reshape(count, 4)
    out.flags.writeable = False
    return out


def _common_taxa(t1, t2):
    taxa1, taxa2 = set(t1.taxa), set(t2.taxa)
    if taxa1 != taxa2:
        raise ValueError(
            "Trees have different leaf sets; only in one of them: %r"
            % sorted(taxa1 ^ taxa2)
        )
    return sorted(taxa1)


def _leaf_order(tree, taxa):
    position = {leaf: i for i, leaf in enumerate(tree.leaves)}
    return [position[tree.node_for_label(label)] for label in taxa]


def path_length_matrix(tree, taxa=None):
    """Pairwise path lengths between leaves

    Parameters
    ----------
    tree : Tree
    taxa : sequence of str, optional
        Row and column order; defaults to the sorted taxa.

    Returns
    -------
    pandas.DataFrame
    """
    if taxa is None:
        taxa = sorted(tree.taxa)
    order = _leaf_order(tree, taxa)
    matrix = tree.leaf_path_lengths()[np.ix_(order, order)]
    return pd.DataFrame(matrix, index=list(taxa), columns=list(taxa))


def quartet_topologies(tree, taxa=None):
    """Resolved topology of every four-leaf subset

    Subsets are taken over `taxa` (default: sorted taxa) in
    lexicographic order of positions.  The topology code indexes
    :data:`QUARTET_SPLITS`: the pairing with the smallest sum of path
    edge counts (four-point condition).

    Returns
    -------
    ndarray of int8
    """
    if taxa is None:
        taxa = sorted(tree.taxa)
    n = len(taxa)
    if n < 4:
        raise ValueError("Quartets need at least 4 leaves. Got %d" % n)
    order = _leaf_order(tree, taxa)
    edges = tree.leaf_edge_counts()[np.ix_(order, order)]
    quartets = _quartets(n)
    a, b, c, d = quartets.T
    sums = np.stack(
        [
            edges[a, b] + edges[c, d],
            edges[a, c] + edges[b, d],
            edges[a, d] + edges[b, c],
        ]
    )
    return np.argmin(sums, axis=0).astype(np.int8)


def quartet_distance(t1, t2):
    """Share of four-leaf subsets on which two trees disagree

    Parameters
    ----------
    t1, t2 : Tree
        Same leaf labels, at least four leaves.

    Returns
    -------
    float
        In [0, 1]; 0 for identical unrooted topologies.

    Examples
    --------
    >>> from cognatesim.tree import parse_newick
    >>> t1 = parse_newick("((A:1,B:1):1,(C:1,D:1):1);")
    >>> t2 = parse_newick("((A:1,C:1):1,(B:1,D:1):1);")
    >>> quartet_distance(t1, t1), quartet_distance(t1, t2)
    (0.0, 1.0)
    """
    taxa = _common_taxa(t1, t2)
    differ = quartet_topologies(t1, taxa) != quartet_topologies(t2, taxa)
    return float(differ.mean())


def height_difference(true_tree, other):
    """Relative height error ``(true - other) / true``

    Positive values mean `other` underestimates the height.  Either
    argument may be a tree or a height.

    Examples
    --------
    >>> round(height_difference(7000, 5600), 12)
    0.2
    """
    true_height = getattr(true_tree, "height", true_tree)
    other_height = getattr(other, "height", other)
    if true_height == 0:
        raise ValueError("The true tree has zero height")
    return (true_height - other_height) / true_height


def pmf_binomial(n, p, k):
    """Binomial probability mass

    Examples
    --------
    >>> round(float(pmf_binomial(20, 0.5, 10)), 5)
    0.1762
    """
    if n < 0 or int(n) != n or not 0 <= p <= 1:
        raise ValueError("Invalid binomial parameters n=%r, p=%r" % (n, p))
    return stats.binom.pmf(k, n, p)


def pmf_poisson(rate, k):
    """Poisson probability mass

    Examples
    --------
    >>> round(float(pmf_poisson(1.0, 0)), 5)
    0.36788
    """
    if not rate >= 0:
        raise ValueError("Poisson rate must be non-negative. Got %r" % (rate,))
    return stats.poisson.pmf(k, rate)


def pmf_multinomial(probs, counts):
    """Multinomial probability of `counts` under category probabilities `probs`"""
    probs = np.asarray(probs, dtype=float)
    if (probs < 0).any() or not math.isclose(probs.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("probs must be non-negative and sum to 1")
    counts = np.asarray(counts)
    return stats.multinomial.pmf(counts, n=int(counts.sum()), p=probs)


def histogram(values, minlength=0):
    """Counts of non-negative integer values, indexed by value

    Examples
    --------
    >>> histogram([0, 2, 2]).tolist()
    [1, 0, 2]
    """
    counts = np.bincount(np.asarray(values, dtype=np.intp), minlength=minlength)
    index = pd.RangeIndex(len(counts), name="value")
    return pd.Series(counts, index=index, name="count")


FitResult = namedtuple(
    "FitResult", ["statistic", "critical", "dof", "pvalue", "passed"]
)
FitResult.__doc__ = """Outcome of a chi-square test

``passed`` is true when ``statistic`` is below the ``critical`` value.
"""


def _pool(observed, expected, min_expected):
    """Merge adjacent cells until every expected count reaches the minimum"""
    pooled_obs, pooled_exp = [], []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected):
        acc_obs += o
        acc_exp += e
        if acc_exp >= min_expected:
            pooled_obs.append(acc_obs)
            pooled_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0 or acc_obs > 0:
        if pooled_exp:
            pooled_obs[-1] += acc_obs
            pooled_exp[-1] += acc_exp
        else:
            pooled_obs.append(acc_obs)
            pooled_exp.append(acc_exp)
    return np.array(pooled_obs), np.array(pooled_exp)


def goodness_of_fit(observed, expected, alpha=0.01, min_expected=5.0):
    """Pearson chi-square test of a histogram against a distribution

    Parameters
    ----------
    observed : array-like or pandas.Series
        Counts of values ``0, 1, ...`` (a Series is read by its integer
        index).
    expected : array-like or callable
        Probabilities over the same values, or a probability mass
        function of the value.  Mass beyond the last observed value is
        added to the last cell.
    alpha : float, default=0.01
    min_expected : float, default=5
        Adjacent cells are pooled until each expected count reaches this.

    Returns
    -------
    FitResult

    Examples
    --------
    >>> import numpy as np
    >>> counts = np.round(pmf_binomial(20, 0.5, np.arange(21)) * 10000)
    >>> goodness_of_fit(counts, lambda k: pmf_binomial(20, 0.5, k)).passed
    True
    """
    if isinstance(observed, pd.Series):
        index = np.asarray(observed.index, dtype=np.intp)
        dense = np.zeros(index.max() + 1 if len(index) else 0)
        dense[index] = observed.to_numpy()
        observed = dense
    observed = np.asarray(observed, dtype=float)
    total = observed.sum()
    if total <= 0:
        raise ValueError("observed histogram is empty")
    if total < 1000:
        warnings.warn("Chi-square fit on only %d observations" % total, stacklevel=2)
    values = np.arange(len(observed))
    if callable(expected):
        probs = np.asarray(expected(values), dtype=float)
    else:
        probs = np.asarray(expected, dtype=float)
        if len(probs) > len(observed):
            observed = np.concatenate([observed, np.zeros(len(probs) - len(observed))])
        elif len(probs) < len(observed):
            probs = np.concatenate([probs, np.zeros(len(observed) - len(probs))])
    if (probs < 0).any():
        raise ValueError("expected probabilities must be non-negative")
    probs = probs.copy()
    probs[-1] += max(0.0, 1.0 - probs.sum())
    obs, exp = _pool(observed, probs * total, min_expected)
    if len(exp) < 2 or (exp <= 0).any():
        raise ValueError("Degenerate expected distribution: fewer than 2 usable cells")
    statistic = float(((obs - exp) ** 2 / exp).sum())
    dof = len(exp) - 1
    critical = float(stats.chi2.ppf(1 - alpha, dof))
    pvalue = float(stats.chi2.sf(statistic, dof))
    return FitResult(statistic, critical, dof, pvalue, statistic < critical)


def two_sample_test(hist_a, hist_b, alpha=0.01, min_count=10):
    """Chi-square test that two histograms come from the same distribution

    Adjacent values are pooled until each pooled cell holds at least
    `min_count` observations in total.

    Returns
    -------
    FitResult
    """
    a = np.asarray(hist_a, dtype=float)
    b = np.asarray(hist_b, dtype=float)
    size = max(len(a), len(b))
    a = np.pad(a, (0, size - len(a)))
    b = np.pad(b, (0, size - len(b)))
    cells = []
    acc = np.zeros(2)
    for pair in zip(a, b):
        acc += pair
        if acc.sum() >= min_count:
            cells.append(acc)
            acc = np.zeros(2)
    if acc.sum() > 0:
        if cells:
            cells[-1] = cells[-1] + acc
        else:
            cells.append(acc)
    table = np.array(cells).T
    if table.shape[1] < 2 or (table.sum(axis=1) == 0).any():
        raise ValueError("Histograms are too small to compare")
    statistic, pvalue, dof, _ = stats.chi2_contingency(table, correction=False)
    critical = float(stats.chi2.ppf(1 - alpha, dof))
    statistic = float(statistic)
    passed = statistic < critical
    return FitResult(statistic, critical, int(dof), float(pvalue), passed)


def _stationary_nullspace(Q):
    basis = linalg.null_space(Q.T)
    if basis.shape[1] != 1:
        raise ValueError(
            "Rate matrix is reducible: %d stationary directions" % basis.shape[1]
        )
    pi = basis[:, 0]
    pi = pi / pi.sum()
    if (pi < -1e-12).any():
        raise ValueError("Null-space solution has negative entries")
    return np.clip(pi, 0, None)


def _stationary_limit(Q, tol=1e-10, max_doublings=200):
    rate = float(np.abs(np.diag(Q)).max())
    t = 1.0 / rate
    previous = None
    for _ in range(max_doublings):
        P = transition_matrix(Q, t)
        spread = float(np.abs(P - P[0]).max())
        if spread < tol and previous is not None:
            if float(np.abs(P[0] - previous).max()) < tol:
                return P[0]
        previous = P[0]
        t *= 2
    raise ValueError("Transition matrix rows did not converge; Q may be reducible")


def stationary_distribution(Q, method="both"):
    """Stationary distribution of the chain with rate matrix `Q`

    Parameters
    ----------
    Q : array of shape (n, n)
        Irreducible rate matrix.
    method : {"both", "nullspace", "limit"}
        "nullspace" solves ``pi Q = 0``; "limit" reads a row of ``P(t)``
        for a growing `t` until rows agree; "both" computes both and
        checks they agree to 1e-8.

    Examples
    --------
    >>> np.round(stationary_distribution([[-0.5, 0.5], [0.5, -0.5]]), 12).tolist()
    [0.5, 0.5]
    """
    Q = check_rate_matrix(Q)
    if not Q.any():
        raise ValueError("Rate matrix is zero; every distribution is stationary")
    if method == "nullspace":
        return _stationary_nullspace(Q)
    if method == "limit":
        return _stationary_limit(Q)
    if method != "both":
        raise ValueError("Unknown method %r" % (method,))
    pi = _stationary_nullspace(Q)
    limit = _stationary_limit(Q)
    if np.abs(pi - limit).max() > 1e-8:
        raise ValueError(
            "Stationary solutions disagree: %r and %r" % (pi.tolist(), limit.tolist())
        )
    return pi


def summarize(values):
    """Mean and central 95% interval of a sample

    Returns
    -------
    pandas.Series
        Entries ``mean``, ``lower`` (2.5% quantile), ``upper`` (97.5%
        quantile) and ``n``.

    Examples
    --------
    >>> float(summarize([1.0, 2.0, 3.0])["mean"])
    2.0
    """
    values = np.asarray(values, dtype=float)
    if not len(values):
        raise ValueError("Cannot summarize an empty sample")
    lower, upper = np.quantile(values, [0.025, 0.975])
    return pd.Series(
        {"mean": values.mean(), "lower": lower, "upper": upper, "n": len(values)}
    )
