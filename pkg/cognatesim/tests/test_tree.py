import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cognatesim.tree import (
    INFINITE_DISTANCE,
    LineageError,
    NewickError,
    Tree,
    generate_yule,
    parse_newick,
    parse_newick_trees,
    scale_to_height,
    serialize_newick,
)

FOUR = "((A:1,B:1):2,(C:2,D:2):1);"


def test_parse_newick_ages():
    tree = parse_newick(FOUR)
    assert tree.n_leaves == 4
    assert tree.n_nodes == 7
    assert tree.height == 3.0
    assert tree.taxa == ["A", "B", "C", "D"]
    a, c = tree.node_for_label("A"), tree.node_for_label("C")
    assert tree.age[a] == 0
    assert tree.branch_length(a) == 1
    assert tree.age[tree.parent[c]] == 2
    assert tree.branch_length(tree.root) == 0


@pytest.mark.parametrize(
    "text",
    [
        "(A:1,B:1)",
        "(A:1,B:1);",
        " ( A : 1 ,\n  B:1 ) ;\n",
        "(A:1[comment],B:1);",
        "('A':1,B:1);",
    ],
)
def test_parse_newick_syntax_variants(text):
    tree = parse_newick(text)
    assert tree.taxa == ["A", "B"]
    assert tree.height == 1.0


def test_parse_newick_non_ultrametric():
    tree = parse_newick("(A:1,B:3);")
    assert tree.height == 3
    assert tree.age[tree.node_for_label("A")] == 2
    assert tree.age[tree.node_for_label("B")] == 0


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("(A,B:1);", "Missing branch length"),
        ("(A:1,A:1);", "Duplicate|Multiple"),
        ("(A:1,B:1,C:1);", "binary"),
        ("(A:1,B:1);(C:1,D:1);", "one tree, found 2"),
        ("", "one tree, found 0"),
        ("A;", "two leaves"),
    ],
)
def test_parse_newick_errors(text, match):
    with pytest.raises(NewickError, match=match):
        parse_newick(text)


@pytest.mark.parametrize(
    "text", ["(A:1,B:1", "((A:1,B:1);", "(A:x,B:1);", "(A:-1,B:1);", "('A:1,B:1);"]
)
def test_parse_newick_syntax_errors(text):
    with pytest.raises(NewickError):
        parse_newick(text)


def test_newick_error_position():
    text = "((A:1,B:1);"
    with pytest.raises(NewickError) as exc:
        parse_newick(text)
    assert isinstance(exc.value.position, int)
    assert 0 <= exc.value.position <= len(text)
    assert issubclass(NewickError, ValueError)


@pytest.mark.parametrize(
    ("label", "text"),
    [
        ("it's", "('it''s':1,B:1);"),
        ("x y", "('x y':1,B:1);"),
        ("A;x", "('A;x':1,B:1);"),
        ("a_b", "(a_b:1,B:1);"),
        ("(q)", "('(q)':1,B:1);"),
    ],
)
def test_parse_newick_quoted_labels(label, text):
    tree = parse_newick(text)
    assert tree.taxa == [label, "B"]
    assert serialize_newick(tree) == text
    assert parse_newick(serialize_newick(tree)).taxa == [label, "B"]


def test_parse_newick_labels_are_case_sensitive():
    assert parse_newick("(a:1,A:1);").taxa == ["a", "A"]


def test_parse_newick_trees():
    trees = parse_newick_trees("(A:1,B:1);\n('C;D':1,E:2);\n")
    assert [t.taxa for t in trees] == [["A", "B"], ["C;D", "E"]]
    assert parse_newick_trees("  \n") == []


@pytest.mark.parametrize(
    "text",
    [FOUR, "(A:1,B:1);", "((A:0.5,B:0.5):0.25,C:0.75);", "('x y':1,B:1);"],
)
def test_serialize_newick_round_trip(text):
    tree = parse_newick(text)
    again = parse_newick(serialize_newick(tree))
    assert again.taxa == tree.taxa
    assert_allclose(again.age, tree.age)
    assert_array_equal(again.parent, tree.parent)


def test_tree_validation():
    with pytest.raises(ValueError, match="one root"):
        Tree([-1, -1], [1, 1], ["A", "B"])
    with pytest.raises(ValueError, match="binary"):
        Tree([-1, 0], [1, 0], [None, "A"])
    with pytest.raises(ValueError, match="older than its parent"):
        Tree([-1, 0, 0], [1, 2, 0], [None, "A", "B"])
    with pytest.raises(ValueError, match="taxon label"):
        Tree([-1, 0, 0], [1, 0, 0], [None, "A", None])


def test_tree_is_immutable():
    tree = parse_newick(FOUR)
    with pytest.raises(ValueError):
        tree.age[0] = 10


def test_traversals():
    tree = parse_newick(FOUR)
    pre = list(tree.preorder())
    level = list(tree.levelorder())
    assert pre[0] == level[0] == tree.root
    assert sorted(pre) == sorted(level) == list(range(tree.n_nodes))
    for order in (pre, level):
        position = {node: i for i, node in enumerate(order)}
        for node in range(tree.n_nodes):
            if node != tree.root:
                assert position[tree.parent[node]] < position[node]
    assert [tree.depth(n) for n in level[:3]] == [0, 1, 1]


def test_mrca_and_leaves_below():
    tree = parse_newick(FOUR)
    a, b, c = (tree.node_for_label(x) for x in "ABC")
    ab = tree.mrca(a, b)
    assert tree.age[ab] == 1
    assert tree.mrca(a, c) == tree.root
    assert sorted(tree.labels[n] for n in tree.leaves_below(ab)) == ["A", "B"]
    with pytest.raises(KeyError, match="Unknown taxon"):
        tree.node_for_label("Z")


@pytest.mark.parametrize(
    ("age", "expected"),
    [
        (0, {"A", "B", "C", "D"}),
        (0.5, {"A", "B", "C", "D"}),
        (1, {"AB", "C", "D"}),
        (1.5, {"AB", "C", "D"}),
        (2, {"AB", "CD"}),
        (2.9, {"AB", "CD"}),
        (3, {"root"}),
    ],
)
def test_lineages_alive_at(age, expected):
    tree = parse_newick(FOUR)
    names = {}
    for node in range(tree.n_nodes):
        if node == tree.root:
            names[node] = "root"
        elif tree.is_leaf(node):
            names[node] = tree.labels[node]
        else:
            below = tree.leaves_below(node)
            names[node] = "".join(sorted(tree.labels[n] for n in below))
    assert {names[n] for n in tree.lineages_alive_at(age)} == expected


def test_lineages_alive_at_out_of_range():
    tree = parse_newick(FOUR)
    with pytest.raises(ValueError, match="between 0"):
        tree.lineages_alive_at(3.5)
    with pytest.raises(ValueError, match="between 0"):
        tree.lineages_alive_at(-1)


def test_mrca_within():
    tree = parse_newick(FOUR)
    a, b, c = (tree.node_for_label(x) for x in "ABC")
    assert tree.mrca_within(a, b, 0.5, 0.5)
    assert not tree.mrca_within(a, b, 0.5, 0.4)
    assert not tree.mrca_within(a, c, 0.5, 2.0)
    assert tree.mrca_within(a, c, 0.5, INFINITE_DISTANCE)
    with pytest.raises(LineageError):
        tree.mrca_within(a, c, 2.5, 1.0)
    with pytest.raises(ValueError, match="distinct"):
        tree.mrca_within(a, a, 0.5, 1.0)


def test_branch_schedule():
    tree = parse_newick("((A:2,B:2):1,C:2);")
    schedule = tree.branch_schedule()
    assert [entry.kind for entry in schedule] == ["split", "split", "tip"]
    assert [entry.age for entry in schedule] == [3.0, 2.0, 1.0]
    c = tree.node_for_label("C")
    assert c in schedule[0].alive
    assert c not in schedule[2].alive
    assert len(schedule[1].alive) == 3
    assert len(schedule[2].alive) == 2


def test_leaf_matrices():
    tree = parse_newick(FOUR)
    lengths = tree.leaf_path_lengths()
    edges = tree.leaf_edge_counts()
    assert_array_equal(np.diag(lengths), 0)
    assert lengths[0, 1] == 2
    assert lengths[0, 2] == 6
    assert edges[0, 1] == 2
    assert edges[0, 3] == 4
    assert_array_equal(lengths, lengths.T)


def test_scale_to_height():
    tree = scale_to_height(parse_newick(FOUR), 6858)
    assert tree.height == pytest.approx(6858)
    assert tree.branch_length(tree.node_for_label("A")) == pytest.approx(2286)
    with pytest.raises(ValueError, match="positive"):
        scale_to_height(tree, 0)


@pytest.mark.parametrize("n_leaves", [2, 3, 10, 80])
def test_generate_yule(n_leaves):
    tree = generate_yule(n_leaves, 0.00055, rng=1)
    assert tree.n_leaves == n_leaves
    assert tree.n_nodes == 2 * n_leaves - 1
    assert_array_equal(tree.age[list(tree.leaves)], 0)
    lengths = [tree.branch_length(n) for n in range(tree.n_nodes) if n != tree.root]
    assert min(lengths) > 0
    assert sorted(tree.taxa) == sorted("T%d" % i for i in range(1, n_leaves + 1))


def test_generate_yule_deterministic():
    t1 = generate_yule(20, 0.01, rng=5)
    t2 = generate_yule(20, 0.01, rng=5)
    assert serialize_newick(t1) == serialize_newick(t2)


def test_generate_yule_mean_height():
    # E[height] = sum_{k=2}^{n} 1/(k lambda) for the forward process
    rate = 0.01
    heights = [generate_yule(5, rate, rng=seed).height for seed in range(2000)]
    expected = sum(1 / (k * rate) for k in range(2, 6))
    assert np.mean(heights) == pytest.approx(expected, rel=0.05)


def test_generate_yule_errors():
    with pytest.raises(ValueError, match="n_leaves"):
        generate_yule(1, 0.1)
    with pytest.raises(ValueError, match="birth_rate"):
        generate_yule(5, 0)
    with pytest.warns(UserWarning, match="tiny"):
        generate_yule(2, 1e-13, rng=0)


def _ancestors(tree, node):
    out = [node]
    while tree.parent[out[-1]] >= 0:
        out.append(int(tree.parent[out[-1]]))
    return out


@pytest.mark.parametrize("seed", range(5))
def test_mrca_within_matches_ancestor_walk(seed):
    rng = np.random.default_rng(seed)
    tree = generate_yule(9, 0.01, rng=rng)
    split_ages = [a for a in tree.age.tolist() if 0 < a < tree.height]
    checked = 0
    for i in range(400):
        if i % 2:
            age = float(rng.choice(split_ages))
        else:
            age = float(rng.uniform(0, tree.height))
        alive = sorted(tree.lineages_alive_at(age))
        if len(alive) < 2:
            continue
        a, b = (int(x) for x in rng.choice(alive, size=2, replace=False))
        up = set(_ancestors(tree, b))
        mrca = next(n for n in _ancestors(tree, a) if n in up)
        z = float(rng.uniform(0, tree.height))
        assert tree.mrca_within(a, b, age, z) == (tree.age[mrca] - age <= z)
        assert tree.mrca(a, b) == mrca
        checked += 1
    assert checked > 300
