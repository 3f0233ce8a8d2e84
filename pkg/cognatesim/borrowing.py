"""Whole-tree evolution with borrowing between contemporaneous languages

Both engines sweep the tree from the root down to the present.  Between
two consecutive changes of the alive-lineage set (splits, and tips that end
above the present) events arrive at the total rate of every process acting
on every alive language; after each event the total rate is recomputed.

A borrowing event picks a donor language with probability proportional to
its number of present traits, one of those traits uniformly, and a
recipient uniformly among the other alive languages.  Under local
borrowing the transfer only happens when the two lineages share an
ancestor no more than `z` time units back; otherwise the event is recorded
as a veto and changes nothing.
"""
import logging
import math
import warnings
from itertools import combinations, product

import numpy as np

from .evolve import collect_alignment, evolve_tree
from .substitution import ModelKind
from .traits import (
    ABSENT,
    NO_EMPTY_MODES,
    PRESENT,
    TraitRegistry,
    death_allowed,
)
from .tree import INFINITE_DISTANCE
from .util import check_random_state

logger = logging.getLogger(__name__)

#: Borrowing rates of the experiment grid and the share of traits they
#: were calibrated to transfer over 1000 time units.
BORROWING_TABLE = {
    0.0: 0.0,
    0.045: 0.01,
    0.224: 0.05,
    0.448: 0.10,
    0.672: 0.15,
    0.896: 0.20,
    1.344: 0.30,
    1.793: 0.40,
    2.241: 0.50,
}


class TreeSimState:
    """Languages of the lineages alive during a sweep, with cached totals

    Attributes
    ----------
    age : float
        Current age of the sweep.
    total_length : int
        Sum of the sequence lengths of the alive languages.
    total_alive : int
        Sum of their present-trait counts.
    """

    def __init__(self, age=0.0):
        self.age = age
        self._languages = {}
        self._lineages = []
        self.total_length = 0
        self.total_alive = 0

    def __contains__(self, lineage):
        return lineage in self._languages

    def __getitem__(self, lineage):
        return self._languages[lineage]

    def __len__(self):
        return len(self._lineages)

    @property
    def n_languages(self):
        return len(self._lineages)

    @property
    def lineages(self):
        return list(self._lineages)

    def add(self, lineage, seq):
        if lineage in self._languages:
            raise ValueError("Lineage %r is already alive" % (lineage,))
        self._languages[lineage] = seq
        self._lineages.append(lineage)
        self.total_length += len(seq)
        self.total_alive += seq.alive_count

    def remove(self, lineage):
        seq = self._languages.pop(lineage)
        self._lineages.remove(lineage)
        self.total_length -= len(seq)
        self.total_alive -= seq.alive_count
        return seq

    def set_state(self, lineage, column, state):
        seq = self._languages[lineage]
        before = seq.alive_count
        seq.set_state(column, state)
        self.total_alive += seq.alive_count - before

    def new_trait(self, lineage, registry, meaning_class):
        """Allocate a trait in `registry`, present in `lineage` only"""
        seq = self._languages[lineage]
        before = len(seq), seq.alive_count
        trait, column = registry.new_trait(seq, meaning_class)
        self.total_length += len(seq) - before[0]
        self.total_alive += seq.alive_count - before[1]
        return trait, column

    def pad(self, lineage, length):
        seq = self._languages[lineage]
        before = len(seq)
        seq.pad(length)
        self.total_length += len(seq) - before

    def choice(self, rng):
        """Uniformly random alive lineage"""
        return self._lineages[int(rng.integers(len(self._lineages)))]

    def choice_other(self, lineage, rng):
        """Uniformly random alive lineage other than `lineage`"""
        i = int(rng.integers(len(self._lineages) - 1))
        other = self._lineages[i]
        if other == lineage:
            other = self._lineages[-1]
        return other

    def choice_by_alive(self, rng):
        """Alive lineage drawn with probability proportional to its present traits"""
        r = int(rng.integers(self.total_alive))
        for lineage in self._lineages:
            r -= self._languages[lineage].alive_count
            if r < 0:
                return lineage
        raise AssertionError("cached alive total exceeds the recount")

    def choice_site(self, rng):
        """Uniformly random (lineage, column) over all alive languages"""
        r = int(rng.integers(self.total_length))
        for lineage in self._lineages:
            n = len(self._languages[lineage])
            if r < n:
                return lineage, r
            r -= n
        raise AssertionError("cached length total exceeds the recount")

    def recount(self):
        """Totals recomputed from the sequences

        Returns
        -------
        total_length, total_alive, n_languages : int
        """
        seqs = self._languages.values()
        return (
            sum(len(seq) for seq in seqs),
            sum(seq.recount() for seq in seqs),
            len(self._languages),
        )

    def audit(self):
        """Check the cached totals and every sequence's bookkeeping"""
        for seq in self._languages.values():
            seq.audit()
        cached = self.total_length, self.total_alive, self.n_languages
        recounted = self.recount()
        if cached != recounted:
            raise AssertionError(
                "Cached totals %r disagree with recount %r" % (cached, recounted)
            )


def gtr_total_rate(state, mu, b):
    """Total event rate of a GTR sweep state

    ``mu * sum(|l_i|) + b * mu * sum(k_i)``: every site mutates at `mu` and
    every present trait is lent at ``b * mu``.
    """
    return mu * state.total_length + b * mu * state.total_alive


def sd_total_rate(state, birth_rate, mu, b):
    """Total event rate of a stochastic-Dollo sweep state

    ``birth_rate * n + mu * sum(k_i) + b * mu * sum(k_i)`` for `n` alive
    languages.
    """
    return birth_rate * state.n_languages + (1 + b) * mu * state.total_alive


def death_check(seq):
    """Whether a death event may remove a trait from `seq`

    Examples
    --------
    >>> from cognatesim.traits import TraitSequence
    >>> death_check(TraitSequence("11111")), death_check(TraitSequence("0100"))
    (True, False)
    """
    return seq.alive_count > 1


def _check_common(tree, root_seq, b, z, no_empty_trait):
    root_seq.check_complete()
    if b < 0:
        raise ValueError("b must be non-negative. Got %r" % (b,))
    if z is None or z == 0:
        z = INFINITE_DISTANCE
    if z < 0:
        raise ValueError("z must be non-negative. Got %r" % (z,))
    if no_empty_trait is True:
        no_empty_trait = "language"
    elif no_empty_trait is False:
        no_empty_trait = None
    if no_empty_trait not in NO_EMPTY_MODES:
        raise ValueError("Unknown no_empty_trait mode %r" % (no_empty_trait,))
    return z, no_empty_trait


def _borrow(state, tree, z, rng, log, registry):
    age = state.age
    if state.total_alive == 0:
        return
    donor = state.choice_by_alive(rng)
    column = state[donor].random_alive_index(rng)
    if state.n_languages < 2:
        if log is not None:
            log.record(age, "veto", donor, column=column, donor=donor)
        return
    recipient = state.choice_other(donor, rng)
    trait = registry.trait_at(column)
    if not tree.mrca_within(donor, recipient, age, z):
        if log is not None:
            log.record(age, "veto", recipient, column=column, trait=trait, donor=donor)
        return
    if len(state[recipient]) <= column:
        state.pad(recipient, registry.n_columns)
    state.set_state(recipient, column, PRESENT)
    if log is not None:
        log.record(age, "borrow", recipient, column=column, trait=trait, donor=donor)


def _sweep(tree, root, rng, total_rate, step, audit_every=0):
    """Run `step` at exponential waiting times over the alive intervals

    Returns the final language of every node.
    """
    schedule = tree.branch_schedule()
    state = TreeSimState(tree.height)
    sequences = {}
    n_events = 0
    for i, entry in enumerate(schedule):
        if entry.kind == "split":
            parent = root if entry.node == tree.root else state.remove(entry.node)
            sequences[entry.node] = parent
            for child in tree.children(entry.node):
                state.add(child, parent.copy())
        else:
            sequences[entry.node] = state.remove(entry.node)
        end = schedule[i + 1].age if i + 1 < len(schedule) else 0.0
        state.age = entry.age
        while True:
            total = total_rate(state)
            if total <= 0:
                break
            state.age -= rng.standard_exponential() / total
            if state.age <= end:
                break
            step(state)
            n_events += 1
            if audit_every and n_events % audit_every == 0:
                state.audit()
                _check_total(state, total_rate)
        state.age = end
    for lineage in state.lineages:
        sequences[lineage] = state.remove(lineage)
    logger.debug("Borrowing sweep finished after %d events", n_events)
    return sequences


def _check_total(state, total_rate):
    cached = total_rate(state)
    fresh = TreeSimState(state.age)
    for lineage in state.lineages:
        fresh.add(lineage, state[lineage])
    recomputed = total_rate(fresh)
    if abs(cached - recomputed) > 1e-12 * max(1.0, abs(recomputed)):
        raise AssertionError(
            "Cached total rate %r disagrees with recomputation %r"
            % (cached, recomputed)
        )


def evolve_tree_gtr_borrowing(
    tree,
    root_seq,
    mu,
    b,
    z=INFINITE_DISTANCE,
    no_empty_trait=None,
    rng=None,
    log=None,
    meaning_classes=None,
    audit_every=0,
):
    """Evolve `root_seq` down `tree` under symmetric GTR with borrowing

    Parameters
    ----------
    tree : Tree
    root_seq : TraitSequence
        Language at the root; not modified.
    mu : float
        Per-site mutation rate, in both directions.
    b : float
        Borrowing rate per present trait, as a multiple of `mu`.
    z : float, default=INFINITE_DISTANCE
        Local-borrowing distance; 0 or :data:`INFINITE_DISTANCE` gives
        global borrowing.
    no_empty_trait : {None, "language", "meaning_class"}, optional
        A 1 to 0 mutation the guard forbids is recorded as a veto.
    rng : seed or numpy.random.Generator, optional
    log : EventLog, optional
    meaning_classes : sequence of int, optional
        Meaning class of each root column.
    audit_every : int, default=0
        If positive, audit the cached totals every `audit_every` events.

    Returns
    -------
    Alignment
        Languages of all nodes; internal languages are those at their
        split.
    """
    z, no_empty_trait = _check_common(tree, root_seq, b, z, no_empty_trait)
    if mu < 0:
        raise ValueError("mu must be non-negative. Got %r" % (mu,))
    rng = check_random_state(rng)
    root = root_seq.copy()
    registry = TraitRegistry.from_root(len(root), meaning_classes)

    def total_rate(state):
        return gtr_total_rate(state, mu, b)

    def step(state):
        if rng.random() * total_rate(state) < mu * state.total_length:
            lineage, column = state.choice_site(rng)
            seq = state[lineage]
            if seq[column] == PRESENT:
                if not death_allowed(seq, column, no_empty_trait, registry):
                    if log is not None:
                        log.record(state.age, "veto", lineage, column=column)
                    return
                state.set_state(lineage, column, ABSENT)
                kind = "mutation10"
            else:
                state.set_state(lineage, column, PRESENT)
                kind = "mutation01"
            if log is not None:
                log.record(state.age, kind, lineage, column=column)
        else:
            _borrow(state, tree, z, rng, log, registry)

    sequences = _sweep(tree, root, rng, total_rate, step, audit_every)
    return collect_alignment(tree, sequences, registry)


def evolve_tree_sd_borrowing(
    tree,
    root_seq,
    birth_rate,
    mu,
    b,
    z=INFINITE_DISTANCE,
    no_empty_trait=None,
    rng=None,
    registry=None,
    log=None,
    meaning_classes=None,
    audit_every=0,
):
    """Evolve `root_seq` down `tree` under stochastic-Dollo with borrowing

    Births arrive at `birth_rate` per alive language and create a fresh
    trait, whose meaning class is that of a uniformly chosen existing
    class.  Each present trait dies at `mu` and is lent at ``b * mu``.

    Parameters
    ----------
    tree : Tree
    root_seq : TraitSequence
    birth_rate, mu, b : float
    z : float, default=INFINITE_DISTANCE
    no_empty_trait : {None, "language", "meaning_class"}, optional
        A death the guard forbids consumes time and is recorded as a veto.
    rng : seed or numpy.random.Generator, optional
    registry : TraitRegistry, optional
        Must describe the root columns; created from `meaning_classes`
        when omitted.
    log : EventLog, optional
    meaning_classes : sequence of int, optional
    audit_every : int, default=0

    Returns
    -------
    Alignment
    """
    z, no_empty_trait = _check_common(tree, root_seq, b, z, no_empty_trait)
    if birth_rate < 0 or mu < 0:
        raise ValueError(
            "Rates must be non-negative. Got %r and %r" % (birth_rate, mu)
        )
    rng = check_random_state(rng)
    root = root_seq.copy()
    if registry is None:
        registry = TraitRegistry.from_root(len(root), meaning_classes)
    elif registry.n_columns != len(root):
        raise ValueError(
            "Registry has %d columns but the root has %d"
            % (registry.n_columns, len(root))
        )

    def total_rate(state):
        return sd_total_rate(state, birth_rate, mu, b)

    def step(state):
        u = rng.random() * total_rate(state)
        births = birth_rate * state.n_languages
        if u < births:
            lineage = state.choice(rng)
            trait, column = state.new_trait(
                lineage, registry, registry.random_class(rng)
            )
            if log is not None:
                log.record(state.age, "birth", lineage, column=column, trait=trait)
        elif u < births + mu * state.total_alive:
            lineage = state.choice_by_alive(rng)
            seq = state[lineage]
            column = seq.random_alive_index(rng)
            trait = registry.trait_at(column)
            if not death_allowed(seq, column, no_empty_trait, registry):
                if log is not None:
                    log.record(state.age, "veto", lineage, column=column, trait=trait)
                return
            state.set_state(lineage, column, ABSENT)
            if log is not None:
                log.record(state.age, "death", lineage, column=column, trait=trait)
        else:
            _borrow(state, tree, z, rng, log, registry)

    sequences = _sweep(tree, root, rng, total_rate, step, audit_every)
    return collect_alignment(tree, sequences, registry)


def evolve_tree_borrowing(tree, root_seq, config, rng=None, log=None, **kwargs):
    """Dispatch to the borrowing engine matching ``config.model``"""
    if config.model is ModelKind.SD:
        return evolve_tree_sd_borrowing(
            tree,
            root_seq,
            config.birth_rate,
            config.death_rate,
            config.borrow_rate,
            config.local_z,
            config.no_empty_trait,
            rng=rng,
            log=log,
            **kwargs,
        )
    if config.model is ModelKind.GTR:
        return evolve_tree_gtr_borrowing(
            tree,
            root_seq,
            config.mu,
            config.borrow_rate,
            config.local_z,
            config.no_empty_trait,
            rng=rng,
            log=log,
            **kwargs,
        )
    raise ValueError("Borrowing is not available for the %r model" % config.model.value)


def simulate(tree, root_seq, config, rng=None, log=None, meaning_classes=None):
    """Evolve down `tree` with the engine `config` calls for

    Uses :func:`~cognatesim.evolve.evolve_tree` when there is no borrowing
    and the borrowing engines otherwise.
    """
    if config.borrow_rate > 0:
        return evolve_tree_borrowing(
            tree, root_seq, config, rng, log, meaning_classes=meaning_classes
        )
    return evolve_tree(tree, root_seq, config, rng, log, meaning_classes)


def borrowing_percentage(b):
    """Share of traits borrowed over 1000 time units, ``1 - exp(-1000 b)``

    Examples
    --------
    >>> borrowing_percentage(0)
    0.0
    """
    if b < 0:
        raise ValueError("b must be non-negative. Got %r" % (b,))
    return -math.expm1(-1000.0 * b)


def borrowing_rate(percentage):
    """Inverse of :func:`borrowing_percentage`

    Examples
    --------
    >>> round(borrowing_rate(0.5), 9)
    0.000693147
    """
    if not 0 <= percentage < 1:
        raise ValueError("percentage must be in [0, 1). Got %r" % (percentage,))
    return -math.log1p(-percentage) / 1000.0


def table_rate(percentage):
    """Experiment-grid borrowing rate for a tabulated percentage

    Parameters
    ----------
    percentage : float
        Fraction (0.05) or percent (5) present in :data:`BORROWING_TABLE`.
    """
    if percentage > 1:
        percentage = percentage / 100.0
    for rate, share in BORROWING_TABLE.items():
        if math.isclose(share, percentage, abs_tol=1e-9):
            if not math.isclose(borrowing_percentage(rate), share, abs_tol=1e-3):
                warnings.warn(
                    "Tabulated borrowing rate %r does not follow "
                    "1 - exp(-1000 b) = %r" % (rate, share),
                    stacklevel=2,
                )
            return rate
    raise KeyError("No tabulated borrowing rate for %r" % (percentage,))


def derive_sd_rates(loss_fraction, root_length):
    """Birth and death rates from a trait-loss share per 1000 time units

    Examples
    --------
    >>> birth, death = derive_sd_rates(0.1, 2449)
    >>> round(death, 10), round(birth, 3)
    (0.0001053605, 0.258)
    """
    if not 0 <= loss_fraction < 1:
        raise ValueError("loss_fraction must be in [0, 1). Got %r" % (loss_fraction,))
    if root_length < 1:
        raise ValueError("root_length must be at least 1. Got %r" % (root_length,))
    mu = -math.log1p(-loss_fraction) / 1000.0
    return root_length * mu, mu


def derive_gtr_rate(change_fraction):
    """Symmetric GTR rate giving a 1 to 0 probability over 1000 time units

    Examples
    --------
    >>> round(derive_gtr_rate(0.1), 10)
    0.0001115718
    """
    if not 0 <= change_fraction < 0.5:
        raise ValueError(
            "change_fraction must be in [0, 0.5). Got %r" % (change_fraction,)
        )
    return -math.log1p(-2 * change_fraction) / 2000.0


BORROWING_RULES = ("saturating", "per_donor")


def borrowing_rate_matrix(n_languages, mu, b, rule="per_donor"):
    """Generator of one column's joint state across coexisting languages

    States are tuples of presence bits, ordered as
    :func:`itertools.product` orders them (language 0 most significant).
    Every language loses or gains the trait at `mu`.  A language without
    the trait additionally borrows it

    - under ``rule="per_donor"``, at ``b * mu * m / (n - 1)`` with `m`
      holders among the `n - 1` other languages: the exact process of the
      borrowing engines;
    - under ``rule="saturating"``, at ``b * mu`` as soon as any other
      language holds it.

    The two rules coincide for two languages.

    Examples
    --------
    >>> Q = borrowing_rate_matrix(2, 0.5, 0.5)
    >>> Q[0].tolist()
    [-1.0, 0.5, 0.5, 0.0]
    """
    if n_languages < 1:
        raise ValueError("n_languages must be positive. Got %r" % (n_languages,))
    if rule not in BORROWING_RULES:
        raise ValueError("rule must be one of %r. Got %r" % (BORROWING_RULES, rule))
    states = list(product((ABSENT, PRESENT), repeat=n_languages))
    index = {state: i for i, state in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for state in states:
        holders = sum(state)
        for lang, bit in enumerate(state):
            target = list(state)
            target[lang] = 1 - bit
            rate = mu
            if bit == ABSENT and holders and n_languages > 1:
                if rule == "per_donor":
                    rate += b * mu * holders / (n_languages - 1)
                else:
                    rate += b * mu
            Q[index[state], index[tuple(target)]] += rate
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def joint_state_counts(matrix, languages):
    """Counts of per-column joint states of a set of languages

    Parameters
    ----------
    matrix : ndarray of shape (n_languages, n_columns)
    languages : sequence of int
        Row indices, in significance order.

    Returns
    -------
    ndarray
        Length ``2 ** len(languages)``, indexed as in
        :func:`borrowing_rate_matrix`.
    """
    rows = np.asarray(matrix)[list(languages)].astype(np.intp)
    weights = 2 ** np.arange(len(languages) - 1, -1, -1)
    codes = weights @ rows
    return np.bincount(codes, minlength=2 ** len(languages))


def pairs_within(tree, age, z):
    """Pairs of lineages alive at `age` allowed to borrow under distance `z`"""
    alive = sorted(tree.lineages_alive_at(age))
    return [(a, b) for a, b in combinations(alive, 2) if tree.mrca_within(a, b, age, z)]

