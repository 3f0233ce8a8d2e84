"""Rooted binary trees with node ages, Newick I/O and Yule generation

Ages are measured backwards from the present: leaves typically sit at age 0
and the root at the tree height.  A lineage is identified by the node at
the bottom of its branch, and is alive over the half-open age interval
``[age[node], age[parent[node]])``.
"""
import logging
import math
import re
import warnings
from collections import namedtuple

import dendropy
import numpy as np
from dendropy.utility.error import DataParseError

from .util import check_random_state

logger = logging.getLogger(__name__)

#: Local-borrowing distance meaning "any pair of lineages may borrow".
INFINITE_DISTANCE = math.inf

# labels written without quotes
_PLAIN_LABEL = re.compile(r"[A-Za-z0-9_.]+")


class NewickError(ValueError):
    """Malformed Newick text

    Attributes
    ----------
    position : int or None
        Character offset in the input where the problem was detected.
    """

    def __init__(self, message, position=None):
        if position is not None:
            message = "%s (at position %d)" % (message, position)
        super().__init__(message)
        self.position = position


class LineageError(ValueError):
    """A lineage was queried at an age where it does not exist"""


ScheduleEntry = namedtuple("ScheduleEntry", ["age", "node", "kind", "alive"])
ScheduleEntry.__doc__ = """One change in the set of alive lineages

``kind`` is ``"split"`` when internal ``node`` divides into its children and
``"tip"`` when leaf ``node`` ends above the present.  ``alive`` is the
frozenset of lineages alive in the interval below ``age``.
"""


class Tree:
    """A rooted, strictly bifurcating tree with node ages

    Instances are immutable once built and may be shared between
    simulation replicates.

    Parameters
    ----------
    parent : sequence of int
        Parent id of each node; -1 marks the (single) root.
    age : sequence of float
        Age of each node, in time units before the present.
    labels : sequence of str or None, optional
        Node labels.  Leaves must carry unique labels; internal node
        labels are kept but otherwise ignored.

    Attributes
    ----------
    parent, left_child, right_child : ndarray of int
        Tree structure; -1 where absent.
    age : ndarray of float
        Node ages.
    labels : tuple
        Node labels (None for unlabelled internal nodes).
    root : int
        Id of the root node.
    """

    def __init__(self, parent, age, labels=None):
        parent = [int(p) for p in parent]
        age = [float(a) for a in age]
        n_nodes = len(parent)
        if len(age) != n_nodes:
            raise ValueError(
                "parent and age must have the same length. Got %d and %d"
                % (n_nodes, len(age))
            )
        if labels is None:
            labels = [None] * n_nodes
        labels = tuple(labels)
        if len(labels) != n_nodes:
            raise ValueError("labels must have one entry per node")

        roots = [i for i, p in enumerate(parent) if p == -1]
        if len(roots) != 1:
            raise ValueError("Expected exactly one root. Got %d" % len(roots))
        children = [[] for _ in range(n_nodes)]
        for node, p in enumerate(parent):
            if p == -1:
                continue
            if not 0 <= p < n_nodes:
                raise ValueError("Unknown parent id %r for node %d" % (p, node))
            children[p].append(node)
        for node, kids in enumerate(children):
            if len(kids) not in (0, 2):
                raise ValueError(
                    "Node %d has %d children; only binary trees are supported"
                    % (node, len(kids))
                )
            for child in kids:
                if age[child] > age[node]:
                    raise ValueError(
                        "Node %d is older than its parent %d" % (child, node)
                    )
            if not kids and age[node] < 0:
                raise ValueError("Leaf %d has negative age %r" % (node, age[node]))

        leaves = [i for i in range(n_nodes) if not children[i]]
        seen = set()
        for leaf in leaves:
            label = labels[leaf]
            if label is None or label == "":
                raise ValueError("Leaf %d has no taxon label" % leaf)
            if label in seen:
                raise ValueError("Duplicate taxon label %r" % label)
            seen.add(label)

        self.root = roots[0]
        self.labels = labels
        self._parent = parent
        self._age = age
        self._children = [tuple(kids) for kids in children]
        self._leaves = tuple(leaves)
        self._label_index = {labels[leaf]: leaf for leaf in leaves}

        depth = [0] * n_nodes
        for node in self.preorder():
            if node != self.root:
                depth[node] = depth[parent[node]] + 1
        self._depth = depth

        self.parent = _readonly(np.array(parent, dtype=np.intp))
        self.age = _readonly(np.array(age, dtype=float))
        self.left_child = _readonly(
            np.array([kids[0] if kids else -1 for kids in children], dtype=np.intp)
        )
        self.right_child = _readonly(
            np.array([kids[1] if kids else -1 for kids in children], dtype=np.intp)
        )

    def __repr__(self):
        return "Tree(n_leaves=%d, height=%r)" % (self.n_leaves, self.height)

    @property
    def n_nodes(self):
        return len(self._parent)

    @property
    def n_leaves(self):
        return len(self._leaves)

    @property
    def leaves(self):
        """Leaf ids, in order of appearance"""
        return self._leaves

    @property
    def taxa(self):
        """Leaf labels, in the order of :attr:`leaves`"""
        return [self.labels[leaf] for leaf in self._leaves]

    @property
    def height(self):
        """Age of the root"""
        return self._age[self.root]

    def children(self, node):
        return self._children[node]

    def is_leaf(self, node):
        return not self._children[node]

    def depth(self, node):
        """Number of edges between `node` and the root"""
        return self._depth[node]

    def node_for_label(self, label):
        try:
            return self._label_index[label]
        except KeyError:
            raise KeyError("Unknown taxon label %r" % (label,)) from None

    def branch_length(self, node):
        if node == self.root:
            return 0.0
        return self._age[self._parent[node]] - self._age[node]

    def preorder(self):
        """Iterate over node ids, parents before children"""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(self._children[node]))

    def levelorder(self):
        """Iterate over node ids breadth-first from the root"""
        current = [self.root]
        while current:
            following = []
            for node in current:
                yield node
                following.extend(self._children[node])
            current = following

    def leaves_below(self, node):
        return [n for n in self._subtree(node) if not self._children[n]]

    def _subtree(self, node):
        stack = [node]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(self._children[node]))

    def mrca(self, a, b):
        """Most recent common ancestor of nodes `a` and `b`"""
        parent = self._parent
        depth = self._depth
        while depth[a] > depth[b]:
            a = parent[a]
        while depth[b] > depth[a]:
            b = parent[b]
        while a != b:
            a = parent[a]
            b = parent[b]
        return a

    def is_alive(self, node, age):
        if node == self.root:
            return age == self.height
        return self._age[node] <= age < self._age[self._parent[node]]

    def lineages_alive_at(self, age):
        """Lineages alive at `age`

        Parameters
        ----------
        age : float
            Between 0 and the tree height inclusive.

        Returns
        -------
        frozenset of int
            Node ids whose branch covers `age`.  At exactly the root age
            this is the root lineage itself.

        Examples
        --------
        >>> tree = parse_newick("(A:1.0,B:1.0)")
        >>> sorted(tree.labels[n] for n in tree.lineages_alive_at(0.5))
        ['A', 'B']
        """
        age = float(age)
        if not 0 <= age <= self.height:
            raise ValueError(
                "age must be between 0 and the tree height %r. Got %r"
                % (self.height, age)
            )
        if age == self.height:
            return frozenset([self.root])
        ages = self.age
        parent_age = np.where(self.parent >= 0, ages[self.parent], -np.inf)
        mask = (ages <= age) & (age < parent_age)
        return frozenset(np.flatnonzero(mask).tolist())

    def mrca_within(self, a, b, at_age, z):
        """Whether lineages `a` and `b` share an ancestor within time `z`

        Parameters
        ----------
        a, b : int
            Distinct lineages alive at `at_age`.
        at_age : float
        z : float
            Maximum allowed time from `at_age` back to the common ancestor;
            :data:`INFINITE_DISTANCE` accepts every pair.

        Returns
        -------
        bool
        """
        if a == b:
            raise ValueError("a and b must be distinct lineages")
        for node in (a, b):
            if not self.is_alive(node, at_age):
                raise LineageError(
                    "Lineage %r is not alive at age %r" % (node, at_age)
                )
        if z < 0:
            raise ValueError("z must be non-negative. Got %r" % z)
        return self._mrca_within(a, b, at_age, z)

    def _mrca_within(self, a, b, at_age, z):
        # unchecked variant used inside simulation loops
        if z == INFINITE_DISTANCE:
            return True
        return self._age[self.mrca(a, b)] - at_age <= z

    def branch_schedule(self):
        """Changes to the alive-lineage set, from the root down to age 0

        Returns
        -------
        list of ScheduleEntry
            Ordered by decreasing age; ties are ordered parents first.
            The first entry is the root split.
        """
        events = []
        for node in range(self.n_nodes):
            if self._children[node]:
                events.append((-self._age[node], self._depth[node], node, "split"))
            elif self._age[node] > 0:
                events.append((-self._age[node], self._depth[node], node, "tip"))
        events.sort()
        alive = set()
        schedule = []
        for neg_age, _, node, kind in events:
            alive.discard(node)
            if kind == "split":
                alive.update(self._children[node])
            schedule.append(ScheduleEntry(-neg_age, node, kind, frozenset(alive)))
        return schedule

    def leaf_mrca_matrix(self):
        """Node id of the MRCA for every pair of leaves

        Returns
        -------
        ndarray of shape (n_leaves, n_leaves)
            Rows and columns follow :attr:`leaves`; the diagonal holds the
            leaves themselves.
        """
        n = self.n_leaves
        position = {leaf: i for i, leaf in enumerate(self._leaves)}
        out = np.empty((n, n), dtype=np.intp)
        below = {}
        for node in reversed(list(self.preorder())):
            kids = self._children[node]
            if not kids:
                below[node] = [position[node]]
                out[position[node], position[node]] = node
                continue
            left, right = below.pop(kids[0]), below.pop(kids[1])
            out[np.ix_(left, right)] = node
            out[np.ix_(right, left)] = node
            below[node] = left + right
        return out

    def leaf_path_lengths(self):
        """Matrix of path lengths between leaves, in :attr:`leaves` order"""
        mrca_age = self.age[self.leaf_mrca_matrix()]
        leaf_age = self.age[list(self._leaves)]
        return 2 * mrca_age - leaf_age[:, None] - leaf_age[None, :]

    def leaf_edge_counts(self):
        """Matrix of edge counts between leaves, in :attr:`leaves` order"""
        depth = np.array(self._depth)
        mrca_depth = depth[self.leaf_mrca_matrix()]
        leaf_depth = depth[list(self._leaves)]
        return leaf_depth[:, None] + leaf_depth[None, :] - 2 * mrca_depth


def _readonly(arr):
    arr.flags.writeable = False
    return arr


def scale_to_height(tree, height):
    """Copy of `tree` with all ages rescaled so the root sits at `height`"""
    if height <= 0:
        raise ValueError("height must be positive. Got %r" % height)
    if tree.height <= 0:
        raise ValueError("Cannot rescale a tree of zero height")
    factor = height / tree.height
    return Tree(tree.parent, tree.age * factor, tree.labels)


def _offset(text, line_num, col_num):
    if line_num is None or col_num is None:
        return None
    lines = text.splitlines(keepends=True)
    offset = sum(len(line) for line in lines[: max(line_num - 1, 0)]) + col_num
    return min(max(offset, 0), len(text))


def _read_dendropy(text):
    text = text.strip()
    if not text:
        return []
    if not text.endswith(";"):
        text += ";"
    try:
        return dendropy.TreeList.get(
            data=text,
            schema="newick",
            rooting="force-rooted",
            preserve_underscores=True,
            case_sensitive_taxon_labels=True,
            taxon_namespace=dendropy.TaxonNamespace(is_case_sensitive=True),
        )
    except DataParseError as exc:
        message = getattr(exc, "message", None) or str(exc)
        position = _offset(
            text, getattr(exc, "line_num", None), getattr(exc, "col_num", None)
        )
        raise NewickError(message, position) from None
    except ValueError as exc:
        raise NewickError(str(exc)) from None


def _from_dendropy(dtree):
    nodes = list(dtree.preorder_node_iter())
    index = {id(node): i for i, node in enumerate(nodes)}
    parent = []
    length = []
    labels = []
    for node in nodes:
        up = node.parent_node
        parent.append(-1 if up is None else index[id(up)])
        length.append(None if up is None else node.edge.length)
        if node.taxon is not None:
            labels.append(node.taxon.label)
        else:
            labels.append(node.label)
    if len(nodes) == 1:
        raise NewickError("A tree needs at least two leaves")

    children = [[] for _ in parent]
    for node, p in enumerate(parent):
        if p >= 0:
            children[p].append(node)
    seen = set()
    for node, kids in enumerate(children):
        if node != 0 and length[node] is None:
            raise NewickError(
                "Missing branch length for %s"
                % ("taxon %r" % labels[node] if labels[node] else "node %d" % node)
            )
        if node != 0 and not (math.isfinite(length[node]) and length[node] >= 0):
            raise NewickError(
                "Branch length must be a non-negative number. Got %r" % length[node]
            )
        if len(kids) not in (0, 2):
            raise NewickError(
                "Node with %d children; only binary trees are supported" % len(kids)
            )
        if not kids:
            if not labels[node]:
                raise NewickError("Leaf without a taxon label")
            if labels[node] in seen:
                raise NewickError("Duplicate taxon label %r" % labels[node])
            seen.add(labels[node])

    # parents come before their children in preorder
    dist = [0.0] * len(parent)
    for node in range(1, len(parent)):
        dist[node] = dist[parent[node]] + length[node]
    root_age = max(dist[node] for node in range(len(parent)) if not children[node])
    tolerance = 1e-9 * max(1.0, root_age)
    age = []
    for d in dist:
        a = root_age - d
        age.append(0.0 if abs(a) < tolerance else a)
    # snapping leaves to 0 must not invert parent/child order
    for node in range(1, len(parent)):
        if age[node] > age[parent[node]]:
            age[node] = age[parent[node]]
    return Tree(parent, age, labels)


def parse_newick_trees(text):
    """Parse every tree in a Newick string

    Trees are separated by ``;``.  Quoting, comments and the other lexical
    rules are handled by :mod:`dendropy`'s Newick reader.

    Returns
    -------
    list of Tree

    Examples
    --------
    >>> trees = parse_newick_trees("(A:1,B:1);\\n('C;D':1,E:2);")
    >>> [t.taxa for t in trees]
    [['A', 'B'], ['C;D', 'E']]
    """
    return [_from_dendropy(dtree) for dtree in _read_dendropy(text)]


def parse_newick(text):
    """Parse a rooted binary tree with branch lengths from Newick text

    Parameters
    ----------
    text : str
        Newick text holding exactly one tree.  Every non-root node needs a
        branch length; the trailing semicolon is optional.  Square-bracket
        comments are skipped; single-quoted labels may contain any
        character, with ``''`` standing for a quote.

    Returns
    -------
    Tree
        The root age is the longest root-to-leaf path, so non-ultrametric
        leaves get positive ages.

    Raises
    ------
    NewickError
        On syntax errors, missing branch lengths or duplicate taxa.  Syntax
        errors carry the offending position.

    Examples
    --------
    >>> tree = parse_newick("(A:1.0,B:1.0)")
    >>> tree.height, tree.n_leaves
    (1.0, 2)
    >>> parse_newick("('it''s':1,B:1);").taxa
    ["it's", 'B']
    """
    trees = parse_newick_trees(text)
    if len(trees) != 1:
        raise NewickError("Expected one tree, found %d" % len(trees))
    return trees[0]


def _format_length(value):
    out = repr(float(value))
    if out.endswith(".0"):
        out = out[:-2]
    return out


def _format_label(label):
    if _PLAIN_LABEL.fullmatch(label):
        return label
    return "'%s'" % label.replace("'", "''")


def serialize_newick(tree):
    """Write `tree` as Newick text with branch lengths

    Examples
    --------
    >>> serialize_newick(parse_newick("(A:1.0,B:1.0)"))
    '(A:1,B:1);'
    """
    parts = []
    # stack of (node, visited)
    stack = [(tree.root, False)]
    while stack:
        node, visited = stack.pop()
        kids = tree.children(node)
        if kids and not visited:
            stack.append((node, True))
            for child in reversed(kids):
                stack.append((child, False))
            parts.append(("open", node))
            continue
        parts.append(("close", node))

    out = []
    needs_comma = [False]
    for action, node in parts:
        if action == "open":
            if needs_comma[-1]:
                out.append(",")
            out.append("(")
            needs_comma.append(False)
            continue
        kids = tree.children(node)
        if kids:
            needs_comma.pop()
            out.append(")")
            label = tree.labels[node]
            if label:
                out.append(_format_label(label))
        else:
            if needs_comma[-1]:
                out.append(",")
            out.append(_format_label(tree.labels[node]))
        if node != tree.root:
            out.append(":" + _format_length(tree.branch_length(node)))
        needs_comma[-1] = True
    out.append(";")
    return "".join(out)


def generate_yule(n_leaves, birth_rate, rng=None, prefix="T"):
    """Grow a random tree under the Yule (pure-birth) process

    Starting from two lineages, each lineage splits independently at rate
    `birth_rate`.  Growth continues until `n_leaves` lineages exist plus the
    waiting time to the next (unrealised) split, so every branch has
    positive length.  The result is shifted so the leaves sit at age 0.

    Parameters
    ----------
    n_leaves : int
        At least 2.
    birth_rate : float
        Per-lineage splitting rate (1/time).
    rng : seed or numpy.random.Generator, optional
    prefix : str, default="T"
        Leaves are labelled ``prefix + "1"`` ... in random order.

    Returns
    -------
    Tree

    Examples
    --------
    >>> tree = generate_yule(80, 0.00055, rng=0)
    >>> tree.n_leaves, tree.n_nodes
    (80, 159)
    """
    if n_leaves < 2 or int(n_leaves) != n_leaves:
        raise ValueError("n_leaves must be an integer >= 2. Got %r" % (n_leaves,))
    if not birth_rate > 0:
        raise ValueError("birth_rate must be positive. Got %r" % (birth_rate,))
    n_leaves = int(n_leaves)
    if birth_rate < 1e-12:
        warnings.warn(
            "birth_rate %r is tiny; tree ages may overflow" % birth_rate, stacklevel=2
        )
    rng = check_random_state(rng)

    parent = [-1, 0, 0]
    split_time = {0: 0.0}
    active = [1, 2]
    t = 0.0
    while True:
        k = len(active)
        t += rng.exponential(1.0 / (k * birth_rate))
        if k == n_leaves:
            break
        i = int(rng.integers(k))
        node = active[i]
        split_time[node] = t
        first = len(parent)
        parent.extend([node, node])
        active[i] = first
        active.append(first + 1)

    age = [t - split_time.get(node, t) for node in range(len(parent))]
    labels = [None] * len(parent)
    numbers = rng.permutation(n_leaves) + 1
    for n, leaf in zip(numbers.tolist(), sorted(active)):
        labels[leaf] = "%s%d" % (prefix, n)
        age[leaf] = 0.0
    logger.debug("Generated Yule tree with %d leaves, height %g", n_leaves, t)
    return Tree(parent, age, labels)
