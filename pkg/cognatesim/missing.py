"""Missing-data corruption of simulated alignments

Both transforms run after simulation, modify the alignment in place and
return it, and only ever turn entries into the missing marker.
"""
import logging

import numpy as np

from .traits import MISSING
from .util import check_random_state

logger = logging.getLogger(__name__)


def _check_probability(p):
    if not 0 <= p <= 1:
        raise ValueError("p must be between 0 and 1. Got %r" % (p,))


def apply_missing_languages(
    alignment, p, rng=None, leaves_only=True, return_counts=False
):
    """Blank out entries of every language independently

    Each language suffers ``u ~ Binomial(n_columns, p)`` missing events,
    hitting `u` distinct uniformly chosen columns.

    Parameters
    ----------
    alignment : Alignment
    p : float
        Probability per entry, in [0, 1].
    rng : seed or numpy.random.Generator, optional
    leaves_only : bool, default=True
        Only corrupt the leaf languages.
    return_counts : bool, default=False
        Also return the number of missing events per language.

    Returns
    -------
    alignment : Alignment
    counts : dict
        Only if `return_counts`.

    Examples
    --------
    >>> from cognatesim.traits import Alignment
    >>> aln = Alignment.from_rows({"a": "0110", "b": "1111"})
    >>> _, counts = apply_missing_languages(aln, 1.0, rng=0, return_counts=True)
    >>> counts
    {0: 4, 1: 4}
    >>> aln.to_frame().loc["a"].tolist()
    ['?', '?', '?', '?']
    """
    _check_probability(p)
    rng = check_random_state(rng)
    languages = alignment.leaves if leaves_only else alignment.languages
    counts = {}
    for lang in languages:
        seq = alignment[lang]
        n = len(seq)
        u = int(rng.binomial(n, p))
        for column in rng.choice(n, size=u, replace=False).tolist():
            seq.set_state(column, MISSING)
        counts[lang] = u
    logger.debug("Missing-language events: %d", sum(counts.values()))
    return (alignment, counts) if return_counts else alignment


def apply_missing_meaning_classes(
    alignment, p, rng=None, leaves_only=True, return_counts=False
):
    """Blank out entries meaning class by meaning class

    Each meaning class suffers ``u ~ Binomial(n_languages, p)`` events;
    each event picks a language uniformly and sets a uniformly chosen
    column of the class to missing in that language.

    Returns
    -------
    alignment : Alignment
    counts : dict
        Number of missing events per meaning class, only if
        `return_counts`.

    Examples
    --------
    >>> from cognatesim.traits import Alignment
    >>> aln = Alignment.from_rows({"a": "01", "b": "11"}, meaning_classes=[0, 0])
    >>> str(apply_missing_meaning_classes(aln, 0.0, rng=0)[0])
    '01'
    """
    _check_probability(p)
    registry = alignment.registry
    if registry is None or len(registry.meaning_classes) != alignment.n_columns:
        raise ValueError("Alignment has no meaning-class metadata")
    rng = check_random_state(rng)
    languages = alignment.leaves if leaves_only else alignment.languages
    n_languages = len(languages)
    counts = {}
    for mc, columns in registry.class_columns().items():
        u = int(rng.binomial(n_languages, p))
        if u:
            langs = rng.integers(n_languages, size=u)
            picks = rng.integers(len(columns), size=u)
            for lang, pick in zip(langs.tolist(), picks.tolist()):
                alignment[languages[lang]].set_state(columns[pick], MISSING)
        counts[mc] = u
    logger.debug("Missing-meaning-class events: %d", sum(counts.values()))
    return (alignment, counts) if return_counts else alignment


def apply_missing(alignment, model, p, rng=None):
    """Apply the missing-data model named `model`

    Parameters
    ----------
    model : {None, "languages", "meaning_classes"}
    """
    if model is None or p == 0:
        return alignment
    if model == "languages":
        return apply_missing_languages(alignment, p, rng)
    if model == "meaning_classes":
        return apply_missing_meaning_classes(alignment, p, rng)
    raise ValueError("Unknown missing-data model %r" % (model,))


def missing_counts(alignment, by="language"):
    """Number of missing entries per leaf language or per meaning class"""
    matrix = alignment.to_matrix() == MISSING
    if by == "language":
        return matrix.sum(axis=1)
    if by == "meaning_class":
        classes = alignment.meaning_classes
        return np.array(
            [matrix[:, classes == mc].sum() for mc in np.unique(classes)], dtype=int
        )
    raise ValueError("by must be 'language' or 'meaning_class'. Got %r" % (by,))
