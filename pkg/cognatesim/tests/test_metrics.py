import warnings
from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cognatesim.metrics import (
    QUARTET_SPLITS,
    goodness_of_fit,
    height_difference,
    histogram,
    path_length_matrix,
    pmf_binomial,
    pmf_multinomial,
    pmf_poisson,
    quartet_distance,
    quartet_topologies,
    stationary_distribution,
    summarize,
    two_sample_test,
)
from cognatesim.substitution import gtr_rate_matrix
from cognatesim.tree import generate_yule, parse_newick

BALANCED = "((A:1,B:1):1,(C:1,D:1):1);"


def test_quartet_distance_identical():
    tree = generate_yule(12, 0.01, rng=0)
    assert quartet_distance(tree, tree) == 0.0


def test_quartet_distance_ignores_root_and_lengths():
    t1 = parse_newick(BALANCED)
    t2 = parse_newick("(((A:1,B:1):3,C:4):1,D:5);")
    assert quartet_distance(t1, t2) == 0.0


@pytest.mark.parametrize(
    ("other", "expected"),
    [
        ("((A:1,C:1):1,(B:1,D:1):1);", 1.0),
        ("((A:1,D:1):1,(B:1,C:1):1);", 1.0),
        ("((B:1,A:1):1,(D:1,C:1):1);", 0.0),
    ],
)
def test_quartet_distance_four_leaves(other, expected):
    assert quartet_distance(parse_newick(BALANCED), parse_newick(other)) == expected


def test_quartet_distance_five_leaves():
    t1 = parse_newick("(((A:1,B:1):1,C:2):1,(D:1,E:1):2);")
    t2 = parse_newick("(((A:1,E:1):1,C:2):1,(D:1,B:1):2);")
    d = quartet_distance(t1, t2)
    assert 0 < d <= 1
    assert d == quartet_distance(t2, t1)
    # five quartets in total, so the distance is a multiple of 1/5
    assert d * 5 == pytest.approx(round(d * 5))


def test_quartet_topologies():
    tree = parse_newick(BALANCED)
    assert QUARTET_SPLITS[quartet_topologies(tree)[0]] == (0, 1, 2, 3)
    with pytest.raises(ValueError, match="at least 4"):
        quartet_topologies(parse_newick("((A:1,B:1):1,C:2);"))


def test_quartet_distance_random_trees():
    distances = [
        quartet_distance(
            generate_yule(10, 0.01, rng=s), generate_yule(10, 0.01, rng=s + 500)
        )
        for s in range(100)
    ]
    assert np.mean(distances) == pytest.approx(2 / 3, abs=0.05)


def test_quartet_distance_leaf_sets_differ():
    t1 = parse_newick(BALANCED)
    t2 = parse_newick("((A:1,B:1):1,(C:1,E:1):1);")
    with pytest.raises(ValueError, match="different leaf sets"):
        quartet_distance(t1, t2)


def test_height_difference():
    true_tree = parse_newick(BALANCED)
    lower = parse_newick("((A:1,B:1):0.5,(C:1,D:1):0.5);")
    assert height_difference(true_tree, lower) == pytest.approx(0.25)
    assert height_difference(true_tree, true_tree) == 0
    assert height_difference(2.0, 3.0) == pytest.approx(-0.5)
    with pytest.raises(ValueError, match="zero height"):
        height_difference(0.0, 1.0)


def test_path_length_matrix():
    df = path_length_matrix(parse_newick(BALANCED), taxa=["D", "A", "B", "C"])
    assert df.index.tolist() == ["D", "A", "B", "C"]
    assert df.loc["A", "B"] == 2
    assert df.loc["A", "D"] == 4
    assert_array_equal(df.to_numpy(), df.to_numpy().T)


def test_pmfs():
    assert_allclose(pmf_binomial(20, 0.5, np.arange(21)).sum(), 1)
    assert pmf_poisson(1.0, 2) == pytest.approx(np.exp(-1) / 2)
    assert pmf_multinomial([0.5, 0.5], [1, 1]) == pytest.approx(0.5)
    with pytest.raises(ValueError, match="binomial"):
        pmf_binomial(2.5, 0.5, 1)
    with pytest.raises(ValueError, match="non-negative"):
        pmf_poisson(-1, 0)
    with pytest.raises(ValueError, match="sum to 1"):
        pmf_multinomial([0.5, 0.6], [1, 1])


def test_histogram():
    hist = histogram([3, 0, 3, 1], minlength=6)
    assert hist.tolist() == [1, 1, 0, 2, 0, 0]
    assert hist.index.name == "value"


def test_goodness_of_fit_accepts_samples():
    rng = np.random.default_rng(0)
    counts = np.bincount(rng.binomial(20, 0.5, size=20000), minlength=21)
    fit = goodness_of_fit(counts, lambda k: pmf_binomial(20, 0.5, k))
    assert fit.passed
    assert fit.statistic < fit.critical
    assert 0 < fit.pvalue <= 1
    assert fit.dof >= 5


def test_goodness_of_fit_rejects_wrong_law():
    rng = np.random.default_rng(1)
    counts = np.bincount(rng.binomial(20, 0.6, size=20000), minlength=21)
    assert not goodness_of_fit(counts, lambda k: pmf_binomial(20, 0.5, k)).passed


def test_goodness_of_fit_series_and_array_expected():
    rng = np.random.default_rng(2)
    samples = rng.poisson(1.0, size=5000)
    series = histogram(samples)
    fit = goodness_of_fit(series, pmf_poisson(1.0, np.arange(30)))
    assert fit.passed
    same = goodness_of_fit(series.to_numpy(), lambda k: pmf_poisson(1.0, k))
    assert fit.statistic == pytest.approx(same.statistic)


def test_goodness_of_fit_warnings_and_errors():
    with pytest.warns(UserWarning, match="only 20 observations"):
        goodness_of_fit([10, 10], [0.5, 0.5])
    with pytest.raises(ValueError, match="empty"):
        goodness_of_fit([0, 0], [0.5, 0.5])
    with pytest.raises(ValueError, match="non-negative"):
        goodness_of_fit([5000, 5000], [1.5, -0.5])
    with pytest.raises(ValueError, match="Degenerate"):
        goodness_of_fit([5000, 5000], [1.0, 0.0])


def test_two_sample_test():
    rng = np.random.default_rng(3)
    a = np.bincount(rng.poisson(2.0, size=5000), minlength=15)
    b = np.bincount(rng.poisson(2.0, size=5000), minlength=15)
    c = np.bincount(rng.poisson(3.0, size=5000), minlength=15)
    assert two_sample_test(a, b).passed
    assert not two_sample_test(a, c).passed
    with pytest.raises(ValueError, match="too small"):
        two_sample_test([1], [1])


@pytest.mark.parametrize("method", ["both", "nullspace", "limit"])
def test_stationary_distribution_gtr(method):
    Q = gtr_rate_matrix(0.2, 0.6)
    assert_allclose(stationary_distribution(Q, method), [0.75, 0.25], atol=1e-9)


def test_stationary_distribution_errors():
    with pytest.raises(ValueError, match="zero"):
        stationary_distribution(np.zeros((2, 2)))
    reducible = np.zeros((3, 3))
    reducible[0, 1], reducible[0, 0] = 1.0, -1.0
    with pytest.raises(ValueError, match="reducible"):
        stationary_distribution(reducible, method="nullspace")
    with pytest.raises(ValueError, match="Unknown method"):
        stationary_distribution(gtr_rate_matrix(1, 1), method="power")


def test_summarize():
    summary = summarize(np.arange(1, 101, dtype=float))
    assert summary["mean"] == pytest.approx(50.5)
    assert summary["lower"] < summary["mean"] < summary["upper"]
    assert summary["n"] == 100
    with pytest.raises(ValueError, match="empty"):
        summarize([])


def test_summarize_single_value():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        summary = summarize([0.3])
    assert summary["lower"] == summary["upper"] == pytest.approx(0.3)


def _clade_topologies(tree):
    # a quartet is ab|cd when some clade holds exactly two of its leaves
    taxa = sorted(tree.taxa)
    clades = [
        {tree.labels[leaf] for leaf in tree.leaves_below(node)}
        for node in range(tree.n_nodes)
        if not tree.is_leaf(node)
    ]
    codes = []
    for quartet in combinations(taxa, 4):
        for code, split in enumerate(QUARTET_SPLITS):
            pair = {quartet[split[0]], quartet[split[1]]}
            if any(clade & set(quartet) == pair for clade in clades):
                codes.append(code)
                break
            other = {quartet[split[2]], quartet[split[3]]}
            if any(clade & set(quartet) == other for clade in clades):
                codes.append(code)
                break
    return np.array(codes)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_quartet_distance_matches_clade_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    t1 = generate_yule(n, 0.01, rng=rng)
    t2 = generate_yule(n, 0.01, rng=rng)
    assert_array_equal(quartet_topologies(t1), _clade_topologies(t1))
    oracle = np.mean(_clade_topologies(t1) != _clade_topologies(t2))
    assert quartet_distance(t1, t2) == oracle


def test_height_difference_reference_values():
    assert height_difference(7000, 5600) == pytest.approx(0.2)
    assert height_difference(5600, 7000) == pytest.approx(-0.25)
