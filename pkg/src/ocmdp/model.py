"""Core data model for one-counter Markov decision processes.

An OC-MDP is a finite MDP whose state-action pairs additionally carry a
counter update in {-1, 0, +1}.  Its semantics is the MDP over
configurations ``(state, counter)`` in which counter 0 and, when a finite
bound ``B`` is in force, counter ``B`` are absorbing.

Probabilities are exact :class:`fractions.Fraction` values throughout this
module.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .linalg import solve_fixpoint

INF = math.inf
Bound = Union[int, float]
Dist = Mapping[str, Fraction]

REACH = "reach"
SELTERM = "selterm"


class ModelError(ValueError):
    """Raised for malformed models, queries and strategies."""


def is_inf(b: Bound) -> bool:
    return b == INF


@dataclass(frozen=True)
class OcMdp:
    """A one-counter MDP.

    ``delta[(q, a)]`` maps successor states to exact probabilities and
    ``weight[(q, a)]`` is the counter update of the pair.  Instances are
    treated as immutable.
    """

    states: Tuple[str, ...]
    actions: Tuple[str, ...]
    enabled: Mapping[str, Tuple[str, ...]]
    delta: Mapping[Tuple[str, str], Mapping[str, Fraction]]
    weight: Mapping[Tuple[str, str], int]

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def build(
        cls,
        transitions: Mapping[Tuple[str, str], Tuple[int, Mapping[str, object]]],
        states: Optional[Iterable[str]] = None,
    ) -> "OcMdp":
        """Build a model from ``{(q, a): (weight, {p: prob})}``.

        Probabilities may be given as anything :class:`Fraction` accepts
        (ints, strings like ``"1/3"``, fractions).  States listed in
        ``states`` but without transitions are kept, so that ``validate``
        can report them as deadlocks.
        """
        st: List[str] = list(states) if states is not None else []
        seen = set(st)
        acts: List[str] = []
        enabled: Dict[str, List[str]] = defaultdict(list)
        delta: Dict[Tuple[str, str], Dict[str, Fraction]] = {}
        weight: Dict[Tuple[str, str], int] = {}

        def note(s: str) -> None:
            if s not in seen:
                seen.add(s)
                st.append(s)

        for (q, a), (w, succ) in transitions.items():
            note(q)
            if a not in acts:
                acts.append(a)
            enabled[q].append(a)
            delta[(q, a)] = {p: Fraction(pr) for p, pr in succ.items()}
            weight[(q, a)] = w
            for p in succ:
                note(p)
        return cls(
            states=tuple(st),
            actions=tuple(acts),
            enabled={q: tuple(enabled.get(q, ())) for q in st},
            delta=delta,
            weight=weight,
        )

    def transitions(self) -> Dict[Tuple[str, str], Tuple[int, Dict[str, Fraction]]]:
        return {
            (q, a): (self.weight[(q, a)], dict(self.delta[(q, a)]))
            for q in self.states
            for a in self.enabled[q]
        }


def validate(m: OcMdp) -> List[str]:
    """Return every invariant violation of ``m``; an empty list means ok."""
    out: List[str] = []
    known = set(m.states)
    if len(known) != len(m.states):
        out.append("duplicate state ids")
    for q in m.states:
        acts = m.enabled.get(q, ())
        if not acts:
            out.append(f"deadlock at {q}: no enabled action")
        for a in acts:
            if a not in m.actions:
                out.append(f"unknown action {a} at {q}")
            if (q, a) not in m.weight:
                out.append(f"missing weight at ({q},{a})")
            elif m.weight[(q, a)] not in (-1, 0, 1):
                out.append(f"weight {m.weight[(q, a)]} outside {{-1,0,1}} at ({q},{a})")
            d = m.delta.get((q, a))
            if d is None:
                out.append(f"missing distribution at ({q},{a})")
                continue
            total = Fraction(0)
            for p, pr in d.items():
                if p not in known:
                    out.append(f"unknown successor {p} at ({q},{a})")
                if not isinstance(pr, Fraction):
                    out.append(f"non-rational probability at ({q},{a})")
                elif pr < 0:
                    out.append(f"negative probability at ({q},{a})")
                total += Fraction(pr)
            if total != 1:
                out.append(f"distribution sum {total} != 1 at ({q},{a})")
    for (q, a) in m.weight:
        if a not in m.enabled.get(q, ()):
            out.append(f"weight defined on disabled pair ({q},{a})")
    return out


class Config(NamedTuple):
    state: str
    counter: int


@dataclass(frozen=True)
class Objective:
    kind: str
    targets: FrozenSet[str]

    def __post_init__(self) -> None:
        if self.kind not in (REACH, SELTERM):
            raise ModelError(f"unknown objective kind {self.kind!r}")
        object.__setattr__(self, "targets", frozenset(self.targets))


@dataclass(frozen=True)
class Query:
    objective: Objective
    bound: Bound
    init: Config
    threshold: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        b = self.bound
        if not (is_inf(b) or (isinstance(b, int) and b >= 1)):
            raise ModelError(f"bound must be a positive integer or inf, got {b!r}")
        k = self.init.counter
        if k < 0 or (not is_inf(b) and k > b):
            raise ModelError(f"initial counter {k} outside [0, {b}]")
        if not 0 <= self.threshold <= 1:
            raise ModelError(f"threshold {self.threshold} outside [0,1]")

    def check_against(self, m: OcMdp) -> None:
        known = set(m.states)
        if self.init.state not in known:
            raise ModelError(f"initial state {self.init.state!r} not in model")
        bad = sorted(self.objective.targets - known)
        if bad:
            raise ModelError(f"targets not in model: {bad}")


@dataclass(frozen=True)
class OneCounterChain:
    """A one-counter Markov chain: ``trans[q][(p, u)]`` is a probability."""

    states: Tuple[Hashable, ...]
    trans: Mapping[Hashable, Mapping[Tuple[Hashable, int], object]]

    __hash__ = None  # type: ignore[assignment]

    def violations(self) -> List[str]:
        out = []
        for q in self.states:
            row = self.trans.get(q, {})
            if sum(row.values()) != 1:
                out.append(f"row of {q!r} does not sum to 1")
            for (p, u) in row:
                if u not in (-1, 0, 1):
                    out.append(f"counter update {u} at {q!r}")
                if p not in self.trans:
                    out.append(f"unknown successor {p!r} at {q!r}")
        return out


def absorb_targets(m: OcMdp, targets: Iterable[str]) -> OcMdp:
    """Make every target state absorbing with a single weight -1 self-loop.

    The loop reuses the first enabled action id of the state so action sets
    stay unchanged.  Applying the transform twice equals applying it once.
    """
    tset = set(targets)
    bad = tset - set(m.states)
    if bad:
        raise ModelError(f"targets not in model: {sorted(bad)}")
    if not tset:
        return m
    enabled = dict(m.enabled)
    delta = dict(m.delta)
    weight = dict(m.weight)
    for q in tset:
        for a in m.enabled[q]:
            delta.pop((q, a), None)
            weight.pop((q, a), None)
        a0 = m.enabled[q][0]
        enabled[q] = (a0,)
        delta[(q, a0)] = {q: Fraction(1)}
        weight[(q, a0)] = -1
    return OcMdp(m.states, m.actions, enabled, delta, weight)


def effective_row(m: OcMdp, q: str, dist: Optional[Mapping[str, object]]) -> Dict[str, object]:
    """The action distribution actually played in ``q``.

    States with a single enabled action ignore the strategy row, which lets
    strategies written for a model be reused on ``absorb_targets`` of it.
    """
    acts = m.enabled[q]
    if len(acts) == 1:
        return {acts[0]: Fraction(1)}
    if dist is None:
        raise ModelError(f"strategy has no row for state {q!r}")
    return {a: pr for a, pr in dist.items() if not (isinstance(pr, Fraction) and pr == 0)}


@dataclass
class FiniteChain:
    """An explicit finite Markov chain ``trans[s][s'] = probability``."""

    states: List[Hashable]
    trans: Dict[Hashable, Dict[Hashable, object]] = field(default_factory=dict)

    def reach(
        self,
        targets: Iterable[Hashable],
        order: Optional[Sequence[Hashable]] = None,
    ) -> Dict[Hashable, object]:
        """Probability of eventually visiting ``targets`` from every state.

        States that cannot reach a target in the transition graph are pinned
        to 0, which makes the remaining linear system uniquely solvable.
        """
        return reach_probabilities(self.trans, targets, order)


def can_reach(
    trans: Mapping[Hashable, Mapping[Hashable, object]],
    targets: Iterable[Hashable],
    positive: Callable[[object], bool] = lambda p: p > 0,
) -> set:
    """States with a positive-probability path into ``targets``."""
    pred: Dict[Hashable, List[Hashable]] = defaultdict(list)
    for s, row in trans.items():
        for t, p in row.items():
            if positive(p):
                pred[t].append(s)
    seen = set(targets)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for s in pred.get(t, ()):
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def reach_probabilities(
    trans: Mapping[Hashable, Mapping[Hashable, object]],
    targets: Iterable[Hashable],
    order: Optional[Sequence[Hashable]] = None,
) -> Dict[Hashable, object]:
    tset = set(targets)
    alive = can_reach(trans, tset)
    rows = {}
    for s in alive - tset:
        coefs: Dict[Hashable, object] = {}
        const: object = 0
        for t, p in trans.get(s, {}).items():
            if not p > 0:
                continue
            if t in tset:
                const = const + p
            elif t in alive:
                coefs[t] = coefs.get(t, 0) + p
        rows[s] = (coefs, const)
    seq = [s for s in order if s in rows] if order is not None else None
    if seq is not None and len(seq) != len(rows):
        seq = seq + [s for s in rows if s not in set(seq)]
    sol = solve_fixpoint(rows, seq)
    out: Dict[Hashable, object] = {}
    for s in trans:
        if s in tset:
            out[s] = Fraction(1)
        else:
            out[s] = sol.get(s, Fraction(0))
    for s in tset:
        out.setdefault(s, Fraction(1))
    return out


def induced_chain_bounded(m: OcMdp, strat, bound: Bound) -> FiniteChain:
    """The explicit Markov chain induced by ``strat`` on ``Q x [0, B]``.

    Counter values 0 and ``B`` are absorbing.  ``strat`` needs a
    ``lookup(q, k)`` method returning an action distribution.  This is the
    brute-force oracle the compressed pipelines are tested against.
    """
    if is_inf(bound):
        raise ModelError("the induced-chain oracle needs a finite bound")
    B = int(bound)
    states = [(q, k) for k in range(B + 1) for q in m.states]
    trans: Dict[Hashable, Dict[Hashable, object]] = {}
    for q in m.states:
        trans[(q, 0)] = {(q, 0): Fraction(1)}
        trans[(q, B)] = {(q, B): Fraction(1)}
    for k in range(1, B):
        for q in m.states:
            row: Dict[Hashable, object] = {}
            for a, pa in effective_row(m, q, strat.lookup(q, k)).items():
                k2 = k + m.weight[(q, a)]
                for p, pp in m.delta[(q, a)].items():
                    if pp:
                        key = (p, k2)
                        row[key] = row.get(key, 0) + pa * pp
            trans[(q, k)] = row
    return FiniteChain(states, trans)


def oracle_probability(
    m: OcMdp,
    strat,
    bound: Bound,
    init: Config,
    kind: str,
    targets: Iterable[str] = (),
) -> Fraction:
    """Brute-force probability of ``kind`` from ``init``.

    ``kind`` is ``"reach"`` (visit a target at any counter), ``"selterm"``
    (reach a target at counter 0) or ``"ceiling"`` (reach counter ``B``).
    """
    chain = induced_chain_bounded(m, strat, bound)
    B = int(bound)
    tset = set(targets)
    if kind == REACH:
        goal = [(q, k) for (q, k) in chain.states if q in tset]
    elif kind == SELTERM:
        goal = [(q, 0) for q in tset]
    elif kind == "ceiling":
        goal = [(q, B) for q in m.states]
    else:
        raise ModelError(f"unknown objective kind {kind!r}")
    order = [(q, k) for k in range(B + 1) for q in m.states]
    return chain.reach(goal, order)[tuple(init)]
