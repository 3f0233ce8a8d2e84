"""Trait sequences, alignments and event logs

A language is a vector of binary traits (cognates).  Each
:class:`TraitSequence` keeps a running count of its present traits and the
set of their positions, so that the count and a uniformly random present
position are both available in constant time.
"""
import bisect
from collections import namedtuple

import numpy as np
import pandas as pd

ABSENT = 0
PRESENT = 1
MISSING = -1

_SYMBOLS = {ABSENT: "0", PRESENT: "1", MISSING: "?"}
_STATES = {"0": ABSENT, "1": PRESENT, "?": MISSING}

VARIANT = 0
INVARIANT = 1

EVENT_KINDS = (
    "birth",
    "death",
    "mutation01",
    "mutation10",
    "borrow",
    "hidden-switch",
    "veto",
)


class MissingDataError(ValueError):
    """A simulation kernel received a sequence with missing entries"""


class NoAliveTraitError(ValueError):
    """A random present trait was requested from a language without one"""


class AliveIndexSet:
    """Set of ints with O(1) insertion, deletion and uniform random choice

    Items are held in a dense list; a dict maps each item to its position.
    Deletion moves the last item into the freed slot.

    Examples
    --------
    >>> s = AliveIndexSet([3, 5, 8])
    >>> s.discard(5)
    >>> sorted(s)
    [3, 8]
    >>> 5 in s, len(s)
    (False, 2)
    """

    __slots__ = ("_items", "_positions")

    def __init__(self, items=()):
        self._items = []
        self._positions = {}
        for item in items:
            self.add(item)

    def add(self, item):
        if item not in self._positions:
            self._positions[item] = len(self._items)
            self._items.append(item)

    def discard(self, item):
        index = self._positions.pop(item, None)
        if index is None:
            return
        last = self._items.pop()
        if index < len(self._items):
            self._items[index] = last
            self._positions[last] = index

    def choice(self, rng):
        """Uniformly random member"""
        if not self._items:
            raise NoAliveTraitError("Cannot choose from an empty set")
        return self._items[int(rng.integers(len(self._items)))]

    def copy(self):
        out = AliveIndexSet.__new__(AliveIndexSet)
        out._items = list(self._items)
        out._positions = dict(self._positions)
        return out

    def __contains__(self, item):
        return item in self._positions

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


class TraitSequence:
    """One language: a growable vector of trait states

    Parameters
    ----------
    states : iterable of {0, 1, -1} or str, optional
        Initial states; a string may use the characters ``0``, ``1`` and
        ``?``.
    hidden : iterable of {0, 1}, optional
        Hidden covarion regime per column (:data:`VARIANT` or
        :data:`INVARIANT`).

    Examples
    --------
    >>> seq = TraitSequence("0110")
    >>> seq.alive_count
    2
    >>> seq.set_state(0, 1).alive_count
    3
    >>> str(seq)
    '1110'
    """

    def __init__(self, states=(), hidden=None):
        if isinstance(states, str):
            try:
                states = [_STATES[c] for c in states]
            except KeyError as e:
                raise ValueError("Invalid trait state character %s" % e) from None
        states = np.asarray(list(states) if not hasattr(states, "shape") else states)
        if states.size and not np.isin(states, (ABSENT, PRESENT, MISSING)).all():
            raise ValueError("Trait states must be 0, 1 or missing")
        n = len(states)
        self._buf = np.zeros(max(n, 8), dtype=np.int8)
        self._buf[:n] = states
        self._n = n
        self._alive = AliveIndexSet(np.flatnonzero(states == PRESENT).tolist())
        self._n_missing = int(np.count_nonzero(states == MISSING))
        self._hidden = None
        if hidden is not None:
            if not hasattr(hidden, "shape"):
                hidden = list(hidden)
            hidden = np.asarray(hidden)
            if len(hidden) != n:
                raise ValueError(
                    "hidden must have the same length as states. Got %d and %d"
                    % (len(hidden), n)
                )
            self._hidden = np.zeros(len(self._buf), dtype=np.int8)
            self._hidden[:n] = hidden

    def __len__(self):
        return self._n

    def __str__(self):
        return "".join(_SYMBOLS[s] for s in self.states.tolist())

    def __repr__(self):
        return "TraitSequence(%r)" % str(self)

    def __eq__(self, other):
        if not isinstance(other, TraitSequence):
            return NotImplemented
        return np.array_equal(self.states, other.states)

    __hash__ = None

    @property
    def states(self):
        """Read-only view of the states"""
        out = self._buf[: self._n]
        out.flags.writeable = False
        return out

    @property
    def hidden(self):
        if self._hidden is None:
            return None
        out = self._hidden[: self._n]
        out.flags.writeable = False
        return out

    @property
    def alive_count(self):
        return len(self._alive)

    @property
    def alive_indices(self):
        return self._alive

    @property
    def has_missing(self):
        return self._n_missing > 0

    def __getitem__(self, column):
        if not 0 <= column < self._n:
            raise IndexError("column %r out of range for length %d" % (column, self._n))
        return int(self._buf[column])

    def set_state(self, column, state):
        """Store `state` at `column`, keeping the alive bookkeeping current"""
        if not 0 <= column < self._n:
            raise IndexError("column %r out of range for length %d" % (column, self._n))
        if state not in _SYMBOLS:
            state = _STATES.get(state, state)
            if state not in _SYMBOLS:
                raise ValueError("Invalid trait state %r" % (state,))
        old = self._buf[column]
        if old == state:
            return self
        if old == PRESENT:
            self._alive.discard(column)
        elif old == MISSING:
            self._n_missing -= 1
        if state == PRESENT:
            self._alive.add(column)
        elif state == MISSING:
            self._n_missing += 1
        self._buf[column] = state
        return self

    def set_hidden(self, column, regime):
        if self._hidden is None:
            raise ValueError("Sequence has no hidden states")
        self._hidden[column] = regime

    def with_hidden(self, hidden):
        """Copy of this sequence carrying hidden covarion states"""
        return TraitSequence(self.states, hidden=hidden)

    def random_alive_index(self, rng):
        """Uniformly random column holding a present trait

        Raises
        ------
        NoAliveTraitError
            If no trait is present.
        """
        if not len(self._alive):
            raise NoAliveTraitError("Sequence has no present traits")
        return self._alive.choice(rng)

    def append(self, state=ABSENT, hidden=VARIANT):
        """Add one column at the end, growing storage geometrically"""
        if self._n == len(self._buf):
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
            if self._hidden is not None:
                self._hidden = np.concatenate(
                    [self._hidden, np.zeros_like(self._hidden)]
                )
        column = self._n
        self._n += 1
        self._buf[column] = ABSENT
        if self._hidden is not None:
            self._hidden[column] = hidden
        self.set_state(column, state)
        return column

    def pad(self, length):
        """Append absent columns until the sequence has `length` columns"""
        extra = length - self._n
        if extra <= 0:
            return self
        if length > len(self._buf):
            size = max(length, 2 * len(self._buf))
            buf = np.zeros(size, dtype=np.int8)
            buf[: self._n] = self._buf[: self._n]
            self._buf = buf
            if self._hidden is not None:
                hidden = np.zeros(size, dtype=np.int8)
                hidden[: self._n] = self._hidden[: self._n]
                self._hidden = hidden
        else:
            self._buf[self._n : length] = ABSENT
            if self._hidden is not None:
                self._hidden[self._n : length] = VARIANT
        self._n = length
        return self

    def copy(self):
        out = TraitSequence.__new__(TraitSequence)
        out._buf = self._buf.copy()
        out._n = self._n
        out._alive = self._alive.copy()
        out._n_missing = self._n_missing
        out._hidden = None if self._hidden is None else self._hidden.copy()
        return out

    def check_complete(self):
        """Raise :class:`MissingDataError` if any entry is missing"""
        if self._n_missing:
            raise MissingDataError(
                "Sequence contains %d missing entries; simulation requires "
                "complete data" % self._n_missing
            )

    def recount(self):
        """Count present traits from scratch"""
        return int(np.count_nonzero(self.states == PRESENT))

    def audit(self):
        """Check cached bookkeeping against the states"""
        present = set(np.flatnonzero(self.states == PRESENT).tolist())
        if len(self._alive) != len(present) or set(self._alive) != present:
            raise AssertionError("alive index set disagrees with states")
        if self._n_missing != int(np.count_nonzero(self.states == MISSING)):
            raise AssertionError("missing count disagrees with states")


def set_state(seq, column, state):
    """Functional alias of :meth:`TraitSequence.set_state`"""
    return seq.set_state(column, state)


def random_alive_index(seq, rng):
    """Functional alias of :meth:`TraitSequence.random_alive_index`"""
    return seq.random_alive_index(rng)


class TraitRegistry:
    """Global trait ids, their columns and meaning classes

    Ids are allocated once and never reused; column ``i`` holds trait
    ``trait_ids[i]``.  Sequences attached to the registry receive a new
    column whenever a trait is allocated.
    """

    def __init__(self):
        self._trait_ids = []
        self._columns = {}
        self._classes = []
        self._by_class = {}
        self._class_order = []
        self._next_id = 0
        self._members = []

    @classmethod
    def from_root(cls, length, meaning_classes=None):
        """Registry for `length` initial columns

        Parameters
        ----------
        length : int
        meaning_classes : sequence of int, optional
            Meaning class per column.  By default each column is its own
            class.
        """
        if meaning_classes is None:
            meaning_classes = range(length)
        meaning_classes = [int(c) for c in meaning_classes]
        if len(meaning_classes) != length:
            raise ValueError(
                "Expected %d meaning classes. Got %d" % (length, len(meaning_classes))
            )
        registry = cls()
        for mc in meaning_classes:
            registry._allocate(mc)
        return registry

    def _allocate(self, meaning_class):
        trait_id = self._next_id
        self._next_id += 1
        self._columns[trait_id] = len(self._trait_ids)
        self._trait_ids.append(trait_id)
        self._classes.append(meaning_class)
        if meaning_class not in self._by_class:
            self._by_class[meaning_class] = []
            bisect.insort(self._class_order, meaning_class)
        self._by_class[meaning_class].append(len(self._classes) - 1)
        return trait_id

    @property
    def n_columns(self):
        return len(self._trait_ids)

    @property
    def trait_ids(self):
        return np.array(self._trait_ids, dtype=np.int64)

    @property
    def meaning_classes(self):
        return np.array(self._classes, dtype=np.int64)

    def column_of(self, trait_id):
        return self._columns[trait_id]

    def trait_at(self, column):
        return self._trait_ids[column]

    def meaning_class_of(self, column):
        return self._classes[column]

    @property
    def n_classes(self):
        return len(self._class_order)

    def columns_in_class(self, meaning_class):
        return self._by_class[meaning_class]

    def class_columns(self):
        """Mapping of meaning class to its columns, in class order"""
        return {mc: list(self._by_class[mc]) for mc in self._class_order}

    def random_class(self, rng):
        """A uniformly chosen existing meaning class (0 if there is none)"""
        if not self._class_order:
            return 0
        return self._class_order[int(rng.integers(len(self._class_order)))]

    def copy(self):
        """Copy of the metadata, without attached sequences"""
        out = TraitRegistry()
        out._trait_ids = list(self._trait_ids)
        out._columns = dict(self._columns)
        out._classes = list(self._classes)
        out._by_class = {mc: list(cols) for mc, cols in self._by_class.items()}
        out._class_order = list(self._class_order)
        out._next_id = self._next_id
        return out

    def attach(self, seq):
        if len(seq) != self.n_columns:
            raise ValueError(
                "Sequence has %d columns but the registry has %d"
                % (len(seq), self.n_columns)
            )
        self._members.append(seq)

    def new_trait(self, owner, meaning_class):
        """Allocate a trait present only in `owner`

        Every attached sequence gains an absent column; `owner` (which
        need not be attached) gets the trait present.

        Returns
        -------
        trait_id, column : int
        """
        trait_id = self._allocate(meaning_class)
        column = self.n_columns - 1
        for seq in self._members:
            if seq is not owner:
                seq.append(ABSENT)
        if len(owner) <= column:
            owner.pad(column).append(PRESENT)
        else:
            owner.set_state(column, PRESENT)
        return trait_id, column


class Alignment:
    """Languages by trait columns, with trait and meaning-class metadata

    Parameters
    ----------
    registry : TraitRegistry
        Column metadata shared by every sequence added.
    """

    def __init__(self, registry):
        self.registry = registry
        self._sequences = {}
        self._labels = {}
        self._leaf = {}

    def add(self, language, seq, label=None, leaf=False):
        if language in self._sequences:
            raise ValueError("Language %r is already in the alignment" % (language,))
        if label is not None and label in self._labels.values():
            raise ValueError("Duplicate taxon %r" % (label,))
        self.registry.attach(seq)
        self._sequences[language] = seq
        self._labels[language] = label
        self._leaf[language] = bool(leaf)
        return seq

    def __getitem__(self, language):
        return self._sequences[language]

    def __contains__(self, language):
        return language in self._sequences

    def __len__(self):
        return len(self._sequences)

    @property
    def languages(self):
        return list(self._sequences)

    @property
    def leaves(self):
        return [lang for lang in self._sequences if self._leaf[lang]]

    def label(self, language):
        return self._labels[language]

    @property
    def taxa(self):
        return [self._labels[lang] for lang in self.leaves]

    @property
    def n_columns(self):
        return self.registry.n_columns

    @property
    def meaning_classes(self):
        return self.registry.meaning_classes

    def meaning_class_starts(self):
        """Column of the first trait of every meaning class, in class order"""
        starts = {}
        for column, mc in enumerate(self.registry.meaning_classes.tolist()):
            starts.setdefault(mc, column)
        return [starts[mc] for mc in sorted(starts)]

    def to_matrix(self, leaves_only=True):
        langs = self.leaves if leaves_only else self.languages
        if not langs:
            return np.zeros((0, self.n_columns), dtype=np.int8)
        return np.vstack([self._sequences[lang].states for lang in langs])

    def to_frame(self, leaves_only=True):
        """Alignment as a DataFrame of '0', '1' and '?' characters

        Rows are taxa (or language ids for unlabelled languages), columns
        are global trait ids.
        """
        langs = self.leaves if leaves_only else self.languages
        index = [
            self._labels[lang] if self._labels[lang] is not None else lang
            for lang in langs
        ]
        symbols = np.array(["?", "0", "1"])
        matrix = self.to_matrix(leaves_only)
        df = pd.DataFrame(
            symbols[matrix.astype(np.intp) + 1],
            index=pd.Index(index, name="taxon"),
            columns=pd.Index(self.registry.trait_ids, name="trait"),
        )
        return df

    def leaf_alignment(self):
        """Independent copy holding only the leaf languages"""
        out = Alignment(self.registry.copy())
        for lang in self.leaves:
            out.add(lang, self._sequences[lang].copy(), self._labels[lang], leaf=True)
        return out

    @classmethod
    def from_rows(cls, rows, meaning_classes=None):
        """Build a leaf alignment from a mapping of taxon to state string

        Examples
        --------
        >>> aln = Alignment.from_rows({"a": "01?", "b": "110"})
        >>> aln.taxa, aln.n_columns
        (['a', 'b'], 3)
        """
        rows = dict(rows)
        lengths = {len(TraitSequence(v)) for v in rows.values()}
        if len(lengths) > 1:
            raise ValueError("All rows must have the same length")
        length = lengths.pop() if lengths else 0
        out = cls(TraitRegistry.from_root(length, meaning_classes))
        for i, (taxon, value) in enumerate(rows.items()):
            out.add(i, TraitSequence(value), label=taxon, leaf=True)
        return out


def append_trait(alignment, registry, owner, meaning_class):
    """Allocate a new trait present only in language `owner`

    Returns
    -------
    int
        Column index of the new trait.

    Examples
    --------
    >>> aln = Alignment(TraitRegistry.from_root(0))
    >>> for lang in range(3):
    ...     _ = aln.add(lang, TraitSequence())
    >>> append_trait(aln, aln.registry, 0, meaning_class=0)
    0
    >>> [str(aln[lang]) for lang in range(3)]
    ['1', '0', '0']
    """
    if registry is not alignment.registry:
        raise ValueError("registry must be the alignment's registry")
    _, column = registry.new_trait(alignment[owner], meaning_class)
    return column


Event = namedtuple("Event", ["age", "kind", "language", "column", "trait", "donor"])


class EventLog:
    """Append-only record of evolutionary events

    Examples
    --------
    >>> log = EventLog()
    >>> log.record(1.5, "birth", language=0, column=3, trait=3)
    >>> log.to_frame()[["age", "kind", "language"]]
       age   kind  language
    0  1.5  birth         0
    """

    columns = list(Event._fields)

    def __init__(self):
        self._events = []

    def record(self, age, kind, language, column=None, trait=None, donor=None):
        if kind not in EVENT_KINDS:
            raise ValueError("Unknown event kind %r" % (kind,))
        self._events.append(Event(age, kind, language, column, trait, donor))

    def __len__(self):
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def to_frame(self):
        return pd.DataFrame(self._events, columns=self.columns)

    def counts(self):
        """Number of events of each kind"""
        counts = dict.fromkeys(EVENT_KINDS, 0)
        for event in self._events:
            counts[event.kind] += 1
        return counts

    def is_time_ordered(self, per_language=False):
        """Whether ages never increase (per language if requested)"""
        last = {}
        for event in self._events:
            key = event.language if per_language else None
            if key in last and event.age > last[key]:
                return False
            last[key] = event.age
        return True

    def replay(self, seq, language):
        """Apply the events of `language` to a copy of `seq`

        Columns created after `seq` was copied are appended as absent.
        """
        out = seq.copy()
        for event in self._events:
            if event.language != language or event.column is None:
                continue
            while len(out) <= event.column:
                out.append(ABSENT)
            if event.kind in ("birth", "borrow", "mutation01"):
                out.set_state(event.column, PRESENT)
            elif event.kind in ("death", "mutation10"):
                out.set_state(event.column, ABSENT)
        return out


NO_EMPTY_MODES = (None, "language", "meaning_class")


def death_allowed(seq, column, mode=None, registry=None):
    """Whether killing `column` in `seq` respects the no-empty guard

    Parameters
    ----------
    mode : {None, "language", "meaning_class"}
        None allows every death.  "language" forbids leaving the language
        without present traits; "meaning_class" forbids emptying the
        meaning class of `column` (requires `registry`).
    """
    if not mode:
        return True
    if mode == "language":
        return seq.alive_count > 1
    if mode == "meaning_class":
        if registry is None:
            raise ValueError("meaning_class mode requires a registry")
        mc = registry.meaning_class_of(column)
        states = seq.states
        n = len(states)
        for other in registry.columns_in_class(mc):
            if other != column and other < n and states[other] == PRESENT:
                return True
        return False
    raise ValueError("Unknown no-empty mode %r" % (mode,))
