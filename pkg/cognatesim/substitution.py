"""Single-branch evolution kernels

Three models evolve one language along one branch:

- GTR, a two-state continuous-time Markov chain applied independently to
  every column, either by redrawing each column from the transition matrix
  (:func:`gtr_evolve_matrix`) or by simulating explicit mutation events
  (:func:`gtr_evolve_events`);
- Covarion, the GTR chain augmented with a hidden variant/invariant regime
  per column (:func:`covarion_evolve`);
- stochastic-Dollo, a birth-death process in which every trait is born once
  (:func:`sd_evolve`).

Kernels modify the sequence in place and return it.  When an
:class:`~cognatesim.traits.EventLog` is passed, events are recorded with
their age, counting down from `start_age` (by default the branch length,
so that the branch ends at age 0).
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .traits import (
    ABSENT,
    INVARIANT,
    PRESENT,
    VARIANT,
    TraitRegistry,
    TraitSequence,
    death_allowed,
)
from .tree import INFINITE_DISTANCE
from .util import check_random_state

logger = logging.getLogger(__name__)


class ModelKind(enum.Enum):
    GTR = "gtr"
    COVARION = "covarion"
    SD = "sd"


_NO_EMPTY_ALIASES = {
    None: None,
    False: None,
    "false": None,
    True: "language",
    "true": "language",
    "language": "language",
    "meaningClass": "meaning_class",
    "meaning_class": "meaning_class",
}


@dataclass(frozen=True)
class RateConfig:
    """Parameters of a substitution model

    Parameters
    ----------
    model : ModelKind or str
    q01, q10 : float
        Per-site gain and loss rates (GTR and Covarion).
    delta : float
        Rate at which a variant site becomes invariant (Covarion).
    kappa : float
        Multiplier of `delta` for the invariant to variant switch (Covarion).
    birth_rate, death_rate : float
        Global trait birth rate and per-trait death rate (stochastic-Dollo).
    borrow_rate : float
        Borrowing rate per present trait, as a multiple of the loss rate.
    local_z : float
        Maximum time back to a common ancestor for two lineages to borrow.
        Zero and :data:`~cognatesim.tree.INFINITE_DISTANCE` both mean that
        any pair may borrow.
    no_empty_trait : {None, False, True, "language", "meaning_class"}
        Guard against death events emptying a language (True or
        "language") or a meaning class.
    method : {"matrix", "events"}
        Kernel variant for GTR and Covarion branches without borrowing.

    Examples
    --------
    >>> cfg = RateConfig.gtr(0.5)
    >>> cfg.model, cfg.mu
    (<ModelKind.GTR: 'gtr'>, 0.5)
    >>> RateConfig.stochastic_dollo(0.5, 0.25).mu
    0.25
    """

    model: ModelKind = ModelKind.GTR
    q01: float = 0.0
    q10: float = 0.0
    delta: float = 0.0
    kappa: float = 0.0
    birth_rate: float = 0.0
    death_rate: float = 0.0
    borrow_rate: float = 0.0
    local_z: float = INFINITE_DISTANCE
    no_empty_trait: object = None
    method: str = "matrix"

    def __post_init__(self):
        try:
            model = ModelKind(self.model)
        except ValueError:
            raise ValueError("Unknown model kind %r" % (self.model,)) from None
        object.__setattr__(self, "model", model)
        for name in (
            "q01",
            "q10",
            "delta",
            "kappa",
            "birth_rate",
            "death_rate",
            "borrow_rate",
            "local_z",
        ):
            value = float(getattr(self, name))
            if not value >= 0:
                raise ValueError("%s must be non-negative. Got %r" % (name, value))
            object.__setattr__(self, name, value)
        if self.local_z == 0:
            object.__setattr__(self, "local_z", INFINITE_DISTANCE)
        try:
            mode = _NO_EMPTY_ALIASES[self.no_empty_trait]
        except (KeyError, TypeError):
            raise ValueError(
                "Unknown no_empty_trait mode %r" % (self.no_empty_trait,)
            ) from None
        object.__setattr__(self, "no_empty_trait", mode)
        if self.method not in ("matrix", "events"):
            raise ValueError(
                "method must be 'matrix' or 'events'. Got %r" % (self.method,)
            )

    @classmethod
    def gtr(cls, rate=None, q01=None, q10=None, **kwargs):
        """Symmetric GTR with `rate`, or asymmetric with `q01` and `q10`"""
        if rate is not None:
            if q01 is not None or q10 is not None:
                raise ValueError("Specify either rate or q01 and q10, not both")
            q01 = q10 = rate
        if q01 is None or q10 is None:
            raise ValueError("GTR requires rate or both q01 and q10")
        return cls(ModelKind.GTR, q01=q01, q10=q10, **kwargs)

    @classmethod
    def covarion(cls, q01, q10, delta, kappa, **kwargs):
        return cls(
            ModelKind.COVARION, q01=q01, q10=q10, delta=delta, kappa=kappa, **kwargs
        )

    @classmethod
    def stochastic_dollo(cls, birth_rate, death_rate, **kwargs):
        return cls(
            ModelKind.SD, birth_rate=birth_rate, death_rate=death_rate, **kwargs
        )

    @property
    def mu(self):
        """Loss rate that borrowing is scaled by

        The per-trait death rate under stochastic-Dollo; the common
        mutation rate under a symmetric GTR or Covarion model.
        """
        if self.model is ModelKind.SD:
            return self.death_rate
        if self.q01 != self.q10:
            raise ValueError(
                "Borrowing requires symmetric rates. Got q01=%r, q10=%r"
                % (self.q01, self.q10)
            )
        return self.q01

    @property
    def is_local(self):
        return self.local_z != INFINITE_DISTANCE

    def rate_matrix(self):
        if self.model is ModelKind.GTR:
            return gtr_rate_matrix(self.q01, self.q10)
        if self.model is ModelKind.COVARION:
            return covarion_rate_matrix(self.q01, self.q10, self.delta, self.kappa)
        raise ValueError("The stochastic-Dollo model has no finite rate matrix")


def gtr_rate_matrix(q01, q10):
    """Two-state rate matrix over (absent, present)

    Examples
    --------
    >>> gtr_rate_matrix(0.5, 0.5)
    array([[-0.5,  0.5],
           [ 0.5, -0.5]])
    """
    if q01 < 0 or q10 < 0:
        raise ValueError("Rates must be non-negative. Got %r and %r" % (q01, q10))
    return np.array([[-q01, q01], [q10, -q10]], dtype=float)


def check_rate_matrix(Q, tol=1e-12):
    """Validate and return `Q` as a float array

    Raises
    ------
    ValueError
        If `Q` is not square, has negative off-diagonal entries or rows
        that do not sum to zero.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Rate matrix must be square. Got shape %r" % (Q.shape,))
    off = Q[~np.eye(len(Q), dtype=bool)]
    if (off < 0).any():
        raise ValueError("Rate matrix has negative off-diagonal entries")
    scale = max(1.0, float(np.abs(Q).max())) if Q.size else 1.0
    if (np.abs(Q.sum(axis=1)) > tol * scale).any():
        raise ValueError("Rate matrix rows must sum to zero")
    return Q


def transition_matrix(Q, t):
    """Transition probabilities ``P(t) = exp(Q t)``

    The two-state case uses the closed form; larger matrices use
    :func:`scipy.linalg.expm` (scaling and squaring with Padé
    approximants).  Rounding noise is clipped and rows renormalised.

    Examples
    --------
    >>> P = transition_matrix([[-0.5, 0.5], [0.5, -0.5]], 100)
    >>> np.allclose(P, 0.5)
    True
    """
    Q = check_rate_matrix(Q)
    if not t >= 0:
        raise ValueError("t must be non-negative. Got %r" % (t,))
    n = len(Q)
    if t == 0:
        return np.eye(n)
    if n == 2:
        q01, q10 = Q[0, 1], Q[1, 0]
        total = q01 + q10
        if total == 0:
            return np.eye(2)
        decay = -math.expm1(-total * t)
        p01 = q01 / total * decay
        p10 = q10 / total * decay
        return np.array([[1 - p01, p01], [p10, 1 - p10]])
    P = expm(Q * t)
    P = np.clip(P, 0, None)
    return P / P.sum(axis=1, keepdims=True)


def _jump_chain(Q):
    exit_rates = -np.diag(Q)
    with np.errstate(divide="ignore", invalid="ignore"):
        jump = np.where(exit_rates[:, None] > 0, Q / exit_rates[:, None], 0.0)
    np.fill_diagonal(jump, 0)
    return exit_rates, np.cumsum(jump, axis=1)


def _draw_rows(cumulative, u):
    # index of the first cumulative entry reaching u
    out = (u[:, None] >= cumulative).sum(axis=1)
    return np.minimum(out, cumulative.shape[1] - 1)


def simulate_sites(states, Q, T, rng, record=True):
    """Exact per-site jump simulation of a CTMC over time `T`

    Each site draws an exponential waiting time at its current state's exit
    rate and jumps according to the embedded chain until time runs out.
    Sites are advanced together, one jump per round.

    Parameters
    ----------
    states : array of int
        Initial state of every site.
    Q : array of shape (n_states, n_states)
    T : float
    rng : numpy.random.Generator
    record : bool, default=True
        Keep the individual jumps.  Without them only the final states
        are meaningful and the jump arrays are empty.

    Returns
    -------
    final : ndarray of int
    times, sites, old, new : ndarray
        One entry per jump, in time order.
    """
    Q = check_rate_matrix(Q)
    exit_rates, cumulative = _jump_chain(Q)
    state = np.array(states, dtype=np.intp)
    clock = np.zeros(len(state))
    active = np.arange(len(state))
    rounds = []
    while active.size:
        rate = exit_rates[state[active]]
        with np.errstate(divide="ignore"):
            wait = rng.standard_exponential(active.size) / rate
        t_next = clock[active] + wait
        moving = t_next < T
        active = active[moving]
        if not active.size:
            break
        clock[active] = t_next[moving]
        old = state[active]
        new = _draw_rows(cumulative[old], rng.random(active.size))
        if record:
            rounds.append((clock[active].copy(), active.copy(), old, new))
        state[active] = new
    if not rounds:
        empty = np.zeros(0, dtype=np.intp)
        return state, np.zeros(0), empty, empty, empty
    times, sites, old, new = (np.concatenate(parts) for parts in zip(*rounds))
    order = np.argsort(times, kind="stable")
    return state, times[order], sites[order], old[order], new[order]


def _start_age(start_age, T):
    return T if start_age is None else start_age


def gtr_evolve_matrix(seq, Q, T, rng=None):
    """Evolve `seq` over time `T` by redrawing every column from ``P(T)``

    Parameters
    ----------
    seq : TraitSequence
        Complete (no missing entries); modified in place.
    Q : array of shape (2, 2)
    T : float
    rng : seed or numpy.random.Generator, optional

    Returns
    -------
    TraitSequence
        `seq`.
    """
    seq.check_complete()
    rng = check_random_state(rng)
    P = transition_matrix(Q, T)
    if P.shape != (2, 2):
        raise ValueError("GTR needs a 2x2 rate matrix. Got %r" % (P.shape,))
    if T == 0 or not len(seq):
        return seq
    states = seq.states.astype(np.intp)
    new = (rng.random(len(states)) < P[states, PRESENT]).astype(np.int8)
    for column in np.flatnonzero(new != states).tolist():
        seq.set_state(column, int(new[column]))
    return seq


def gtr_evolve_events(seq, Q, T, rng=None, log=None, language=0, start_age=None):
    """Evolve `seq` over time `T` with explicit mutation events

    Same final-state distribution as :func:`gtr_evolve_matrix`; the
    mutations are recorded in `log` when given.
    """
    seq.check_complete()
    rng = check_random_state(rng)
    Q = check_rate_matrix(Q)
    if Q.shape != (2, 2):
        raise ValueError("GTR needs a 2x2 rate matrix. Got %r" % (Q.shape,))
    if T < 0:
        raise ValueError("T must be non-negative. Got %r" % (T,))
    if T == 0 or not len(seq):
        return seq
    final, times, sites, old, new = simulate_sites(
        seq.states, Q, T, rng, record=log is not None
    )
    if log is not None:
        start = _start_age(start_age, T)
        for t, site, s_new in zip(times.tolist(), sites.tolist(), new.tolist()):
            kind = "mutation01" if s_new == PRESENT else "mutation10"
            log.record(start - t, kind, language, column=site)
    for column in np.flatnonzero(final != seq.states).tolist():
        seq.set_state(column, int(final[column]))
    return seq


def covarion_rate_matrix(q01, q10, delta, kappa):
    """Four-state covarion rate matrix

    States are ordered ``0v, 1v, 0i, 1i``: index ``observable + 2 *
    hidden``.  Variant sites mutate at `q01`/`q10` and become invariant at
    `delta`; invariant sites never mutate and return to variant at
    ``kappa * delta``.

    Examples
    --------
    >>> covarion_rate_matrix(0.5, 0.5, 0.2, 0.5)[[0, 2]]
    array([[-0.7,  0.5,  0.2,  0. ],
           [ 0.1,  0. , -0.1,  0. ]])
    """
    for name, value in (("q01", q01), ("q10", q10), ("delta", delta), ("kappa", kappa)):
        if value < 0:
            raise ValueError("%s must be non-negative. Got %r" % (name, value))
    back = kappa * delta
    return np.array(
        [
            [-(q01 + delta), q01, delta, 0.0],
            [q10, -(q10 + delta), 0.0, delta],
            [back, 0.0, -back, 0.0],
            [0.0, back, 0.0, -back],
        ]
    )


def draw_hidden_states(length, kappa, rng=None):
    """Hidden regimes drawn from the stationary switching distribution

    A site is variant with probability ``kappa / (1 + kappa)``.
    """
    rng = check_random_state(rng)
    p_variant = 1.0 if math.isinf(kappa) else kappa / (1.0 + kappa)
    variant = rng.random(length) < p_variant
    return np.where(variant, VARIANT, INVARIANT).astype(np.int8)


def covarion_evolve(seq, config, T, rng=None, log=None, language=0, start_age=None):
    """Evolve a sequence with hidden states on the covarion chain

    Parameters
    ----------
    seq : TraitSequence
        Must carry hidden states (see :meth:`TraitSequence.with_hidden`).
    config : RateConfig
        Covarion parameters; ``config.method`` selects the matrix or event
        kernel.
    T : float

    Returns
    -------
    TraitSequence
        `seq`, with observable and hidden states updated.
    """
    if seq.hidden is None:
        raise ValueError("Covarion evolution requires hidden states")
    seq.check_complete()
    rng = check_random_state(rng)
    Q = covarion_rate_matrix(config.q01, config.q10, config.delta, config.kappa)
    if T < 0:
        raise ValueError("T must be non-negative. Got %r" % (T,))
    if T == 0 or not len(seq):
        return seq
    joint = seq.states.astype(np.intp) + 2 * seq.hidden.astype(np.intp)
    if config.method == "events":
        final, times, sites, old, new = simulate_sites(
            joint, Q, T, rng, record=log is not None
        )
        if log is not None:
            start = _start_age(start_age, T)
            for t, site, s_old, s_new in zip(
                times.tolist(), sites.tolist(), old.tolist(), new.tolist()
            ):
                if s_old % 2 == s_new % 2:
                    kind = "hidden-switch"
                elif s_new % 2 == PRESENT:
                    kind = "mutation01"
                else:
                    kind = "mutation10"
                log.record(start - t, kind, language, column=site)
    else:
        cumulative = np.cumsum(transition_matrix(Q, T), axis=1)
        final = _draw_rows(cumulative[joint], rng.random(len(joint)))
    observable = final % 2
    hidden = final // 2
    for column in np.flatnonzero(observable != seq.states).tolist():
        seq.set_state(column, int(observable[column]))
    for column in np.flatnonzero(hidden != seq.hidden).tolist():
        seq.set_hidden(column, int(hidden[column]))
    return seq


def sd_evolve(
    seq,
    birth_rate,
    death_rate,
    T,
    rng=None,
    registry=None,
    log=None,
    language=0,
    start_age=None,
    no_empty_trait=None,
):
    """Evolve `seq` over time `T` under the stochastic-Dollo process

    Events arrive at total rate ``birth_rate + k * death_rate`` with `k`
    the current number of present traits.  A birth allocates a fresh
    trait in `registry`; a death removes a uniformly chosen present trait.

    Parameters
    ----------
    seq : TraitSequence
        Complete; modified in place.
    birth_rate, death_rate : float
    T : float
    rng : seed or numpy.random.Generator, optional
    registry : TraitRegistry, optional
        Allocates new traits.  A private registry (one meaning class per
        column) is created when omitted.
    log : EventLog, optional
    language : int, default=0
        Language id recorded in `log`.
    start_age : float, optional
        Age at the start of the branch.  Defaults to `T`.
    no_empty_trait : {None, "language", "meaning_class"}
        Deaths that the guard forbids consume time but change nothing and
        are recorded as vetoes.

    Returns
    -------
    TraitSequence
        `seq`.

    Examples
    --------
    >>> seq = sd_evolve(TraitSequence("11111"), 0.0, 1.0, 100.0, rng=0)
    >>> seq.alive_count
    0
    """
    seq.check_complete()
    if birth_rate < 0 or death_rate < 0:
        raise ValueError(
            "Rates must be non-negative. Got %r and %r" % (birth_rate, death_rate)
        )
    if T < 0:
        raise ValueError("T must be non-negative. Got %r" % (T,))
    rng = check_random_state(rng)
    if registry is None:
        registry = TraitRegistry.from_root(len(seq))
    start = _start_age(start_age, T)
    t = 0.0
    while True:
        total = birth_rate + seq.alive_count * death_rate
        if total <= 0:
            break
        t += rng.standard_exponential() / total
        if t >= T:
            break
        if rng.random() * total < birth_rate:
            trait, column = registry.new_trait(seq, registry.random_class(rng))
            if log is not None:
                log.record(start - t, "birth", language, column=column, trait=trait)
            continue
        column = seq.random_alive_index(rng)
        if not death_allowed(seq, column, no_empty_trait, registry):
            if log is not None:
                log.record(start - t, "veto", language, column=column)
            continue
        seq.set_state(column, ABSENT)
        if log is not None:
            trait = registry.trait_at(column)
            log.record(start - t, "death", language, column=column, trait=trait)
    return seq


def sd_stationary_sequence(birth_rate, death_rate, rng=None):
    """Sequence of present traits, their number drawn from the stationary law

    The number of traits is Poisson with mean ``birth_rate / death_rate``.
    """
    if not death_rate > 0:
        raise ValueError("death_rate must be positive. Got %r" % (death_rate,))
    rng = check_random_state(rng)
    k = int(rng.poisson(birth_rate / death_rate))
    return TraitSequence(np.full(k, PRESENT, dtype=np.int8))


def evolve_branch(
    seq, config, T, rng=None, registry=None, log=None, language=0, start_age=None
):
    """Evolve `seq` along one branch with the kernel matching `config`"""
    if config.model is ModelKind.SD:
        return sd_evolve(
            seq,
            config.birth_rate,
            config.death_rate,
            T,
            rng,
            registry=registry,
            log=log,
            language=language,
            start_age=start_age,
            no_empty_trait=config.no_empty_trait,
        )
    if config.model is ModelKind.COVARION:
        return covarion_evolve(seq, config, T, rng, log, language, start_age)
    Q = config.rate_matrix()
    if config.method == "events":
        return gtr_evolve_events(seq, Q, T, rng, log, language, start_age)
    return gtr_evolve_matrix(seq, Q, T, rng)
