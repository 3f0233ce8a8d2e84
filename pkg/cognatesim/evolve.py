"""Whole-tree evolution without borrowing"""
import logging

from .substitution import (
    ModelKind,
    RateConfig,
    draw_hidden_states,
    evolve_branch,
)
from .traits import Alignment, TraitRegistry
from .util import check_random_state

logger = logging.getLogger(__name__)


def prepare_root(root_seq, config, rng):
    """Copy of `root_seq` ready for the model in `config`

    Covarion roots without hidden states receive a stationary draw of
    hidden regimes.
    """
    root_seq.check_complete()
    if config.model is ModelKind.COVARION and root_seq.hidden is None:
        hidden = draw_hidden_states(len(root_seq), config.kappa, rng)
        return root_seq.with_hidden(hidden)
    return root_seq.copy()


def collect_alignment(tree, sequences, registry):
    """Alignment of every node's language, leaves flagged and labelled"""
    alignment = Alignment(registry)
    for node in range(tree.n_nodes):
        seq = sequences[node].pad(registry.n_columns)
        leaf = tree.is_leaf(node)
        alignment.add(node, seq, label=tree.labels[node] if leaf else None, leaf=leaf)
    return alignment


def evolve_tree(tree, root_seq, config, rng=None, log=None, meaning_classes=None):
    """Evolve `root_seq` down `tree`, each branch independently

    Each child receives a copy of its parent's language evolved over the
    branch length with the kernel selected by `config`.  Nodes are visited
    in level order.

    Parameters
    ----------
    tree : Tree
    root_seq : TraitSequence
        Language at the root; not modified.
    config : RateConfig
    rng : seed or numpy.random.Generator, optional
    log : EventLog, optional
        Receives the events of every branch, tagged with the node id of
        the branch's lower end and dated by age.
    meaning_classes : sequence of int, optional
        Meaning class of each root column.  Defaults to one class per
        column.

    Returns
    -------
    Alignment
        Languages of all nodes, keyed by node id; leaves are flagged and
        carry their taxon label.  Under stochastic-Dollo the columns are
        every trait born anywhere in the tree.

    Examples
    --------
    >>> from cognatesim.tree import parse_newick
    >>> from cognatesim.traits import TraitSequence
    >>> tree = parse_newick("(A:0,B:0);")
    >>> aln = evolve_tree(tree, TraitSequence("0110"), RateConfig.gtr(0.5), rng=0)
    >>> [str(aln[leaf]) for leaf in aln.leaves]
    ['0110', '0110']
    """
    if not isinstance(config, RateConfig):
        raise TypeError("config must be a RateConfig. Got %r" % type(config))
    rng = check_random_state(rng)
    root = prepare_root(root_seq, config, rng)
    registry = TraitRegistry.from_root(len(root), meaning_classes)
    age = tree.age
    sequences = {tree.root: root}
    for node in tree.levelorder():
        if node == tree.root:
            continue
        parent = int(tree.parent[node])
        seq = sequences[parent].copy()
        evolve_branch(
            seq,
            config,
            tree.branch_length(node),
            rng,
            registry=registry,
            log=log,
            language=node,
            start_age=float(age[parent]),
        )
        sequences[node] = seq
    logger.debug(
        "Evolved %s languages over %d nodes, %d columns",
        config.model.value,
        tree.n_nodes,
        registry.n_columns,
    )
    return collect_alignment(tree, sequences, registry)
