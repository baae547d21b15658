"""Interval strategies (open-ended and cyclic), enumeration, Mealy export."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Tuple, Union

from .model import Bound, ModelError, OcMdp, effective_row, is_inf
from .partitions import (
    Interval,
    IntervalPartition,
    PeriodicPartition,
    window_for,
)

OEIS = "oeis"
CIS = "cis"

Row = Mapping[str, Mapping[str, Fraction]]


def dirac(a: str) -> Dict[str, Fraction]:
    return {a: Fraction(1)}


@dataclass(frozen=True)
class IntervalStrategy:
    """A memoryless strategy constant on the intervals of its base partition.

    ``table[j][q]`` is the action distribution played in state ``q`` at
    counter values of interval ``j`` (of the partition for an OEIS, of the
    window for a CIS).
    """

    kind: str
    base: Union[IntervalPartition, PeriodicPartition]
    table: Tuple[Mapping[str, Mapping[str, Fraction]], ...]

    __hash__ = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        object.__setattr__(self, "table", tuple(self.table))
        if self.kind == OEIS:
            if not isinstance(self.base, IntervalPartition):
                raise ModelError("an OEIS needs an interval partition")
        elif self.kind == CIS:
            if not isinstance(self.base, PeriodicPartition):
                raise ModelError("a CIS needs a periodic partition")
        else:
            raise ModelError(f"unknown strategy kind {self.kind!r}")
        if len(self.table) != len(self.partition):
            raise ModelError("strategy table must have one block per interval")

    @property
    def partition(self) -> IntervalPartition:
        return self.base.window if self.kind == CIS else self.base

    @property
    def period(self) -> int:
        if self.kind != CIS:
            raise ModelError("only cyclic strategies have a period")
        return self.base.period

    def index(self, k: int) -> int:
        if k < 1:
            raise ModelError(f"no decision at counter value {k}")
        if self.kind == CIS:
            return window_for(self.base, k)
        return self.base.index_of(k)

    def lookup(self, q: str, k: int) -> Mapping[str, Fraction]:
        row = self.table[self.index(k)]
        if q not in row:
            raise ModelError(f"strategy has no row for state {q!r}")
        return row[q]

    def row_at(self, k: int) -> Mapping[str, Mapping[str, Fraction]]:
        return self.table[self.index(k)]

    def is_pure(self) -> bool:
        return all(len([a for a, p in d.items() if p]) == 1 for blk in self.table for d in blk.values())


def oeis(partition: IntervalPartition, table) -> IntervalStrategy:
    return IntervalStrategy(OEIS, partition, tuple(table))


def cis(pp: PeriodicPartition, table) -> IntervalStrategy:
    return IntervalStrategy(CIS, pp, tuple(table))


def counter_oblivious(row: Row, bound: Bound) -> IntervalStrategy:
    """The single-interval OEIS playing ``row`` on ``[1, B-1]``."""
    if bound == 1:
        return oeis(IntervalPartition(()), ())
    hi = bound if is_inf(bound) else int(bound) - 1
    return oeis(IntervalPartition((Interval(1, hi),)), (row,))


def _same(r1, r2) -> bool:
    if set(r1) != set(r2):
        return False
    for q in r1:
        a = {x: p for x, p in r1[q].items() if p}
        b = {x: p for x, p in r2[q].items() if p}
        if a != b:
            return False
    return True


def is_based_on(s: IntervalStrategy, p: IntervalPartition) -> bool:
    """Whether ``s`` is constant on every interval of ``p``.

    Decided by comparing the table blocks that meet each interval of ``p``.
    """
    if s.kind == OEIS:
        own = s.base
        if p.bound != own.bound:
            return False
        for iv in p.intervals:
            first = own.index_of(iv.lo)
            last = len(own) - 1 if not iv.bounded else own.index_of(int(iv.hi))
            for j in range(first + 1, last + 1):
                if not _same(s.table[first], s.table[j]):
                    return False
        return True
    rho = s.period
    for iv in p.intervals:
        if not iv.bounded or len(iv) >= rho:
            blocks = range(len(s.table))
        else:
            a = (iv.lo - 1) % rho + 1
            b = (int(iv.hi) - 1) % rho + 1
            w = s.base.window
            if a <= b:
                blocks = range(w.index_of(a), w.index_of(b) + 1)
            else:
                blocks = list(range(w.index_of(a), len(w))) + list(range(0, w.index_of(b) + 1))
        blocks = list(blocks)
        for j in blocks[1:]:
            if not _same(s.table[blocks[0]], s.table[j]):
                return False
    return True


def enumerate_pure(p: IntervalPartition, m: OcMdp) -> Iterator[IntervalStrategy]:
    """Every pure OEIS based on ``p``, in lexicographic order of choices."""
    slots = [(j, q) for j in range(len(p)) for q in m.states]
    choices = [sorted(m.enabled[q]) for (_, q) in slots]
    for pick in itertools.product(*choices):
        table: List[Dict[str, Dict[str, Fraction]]] = [dict() for _ in range(len(p))]
        for (j, q), a in zip(slots, pick):
            table[j][q] = dirac(a)
        yield oeis(p, table)


def _nonempty_subsets(items) -> List[FrozenSet[str]]:
    items = sorted(items)
    out = []
    for r in range(1, len(items) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(items, r))
    return out


@dataclass(frozen=True)
class SupportAssignment:
    """``supports[(q, j)]`` is the action support at state ``q`` on interval ``j``."""

    supports: Mapping[Tuple[str, int], FrozenSet[str]]

    __hash__ = None  # type: ignore[assignment]

    def row(self, j: int) -> Dict[str, FrozenSet[str]]:
        return {q: acts for (q, jj), acts in self.supports.items() if jj == j}


def enumerate_supports(p: IntervalPartition, m: OcMdp) -> Iterator[SupportAssignment]:
    """Every support assignment over ``p``; subsets ordered by size then ids."""
    slots = [(q, j) for j in range(len(p)) for q in m.states]
    choices = [_nonempty_subsets(m.enabled[q]) for (q, _) in slots]
    for pick in itertools.product(*choices):
        yield SupportAssignment(dict(zip(slots, pick)))


def uniform_on(supp: SupportAssignment, p: IntervalPartition, kind: str = OEIS) -> List[Dict[str, Dict[str, Fraction]]]:
    table: List[Dict[str, Dict[str, Fraction]]] = [dict() for _ in range(len(p))]
    for (q, j), acts in supp.supports.items():
        table[j][q] = {a: Fraction(1, len(acts)) for a in sorted(acts)}
    return table


@dataclass
class MealyMachine:
    """A Mealy machine: memory states, initial memory, update and next-move."""

    memory: List[int]
    initial: int
    update: Dict[Tuple[int, str, str], int] = field(default_factory=dict)
    nxt: Dict[Tuple[int, str], Mapping[str, Fraction]] = field(default_factory=dict)

    def dump(self) -> str:
        lines = [f"memory: {len(self.memory)}", f"initial: {self.initial}"]
        for (mem, q), dist in sorted(self.nxt.items()):
            acts = ", ".join(f"{a}={pr}" for a, pr in sorted(dist.items()))
            lines.append(f"next {mem} {q}: {acts}")
        for (mem, q, a), m2 in sorted(self.update.items()):
            lines.append(f"update {mem} {q} {a}: {m2}")
        return "\n".join(lines) + "\n"


def export_mealy(
    s: IntervalStrategy,
    m: OcMdp,
    k_init: int,
    bound: Bound,
    full: bool = False,
) -> MealyMachine:
    """Mealy machine inducing the counterpart of ``s`` from counter ``k_init``.

    For an OEIS (finite ``B`` only) memory tracks the counter value in
    ``[1, B-1]``; updates leading to 0 or ``B`` are omitted because the
    configuration reached is absorbing.  For a CIS memory tracks the counter
    modulo the period.  Unless ``full`` is set only memory states reachable
    from the initial one are materialised.
    """
    if s.kind == OEIS:
        if is_inf(bound):
            raise ModelError("an OEIS counterpart needs infinite memory when B is infinite")
        B = int(bound)
        if not 1 <= k_init <= B - 1:
            raise ModelError(f"initial counter {k_init} outside [1,{B - 1}]")

        def decide(mem: int, q: str):
            return effective_row(m, q, s.lookup(q, mem))

        def step(mem: int, q: str, a: str) -> Optional[int]:
            nk = mem + m.weight[(q, a)]
            return nk if 1 <= nk <= B - 1 else None

        init = k_init
        universe = range(1, B)
    else:
        if not is_inf(bound):
            raise ModelError("cyclic strategies are defined for unbounded models only")
        rho = s.period

        def decide(mem: int, q: str):
            return effective_row(m, q, s.lookup(q, rho if mem == 0 else mem))

        def step(mem: int, q: str, a: str) -> Optional[int]:
            return (mem + m.weight[(q, a)]) % rho

        init = k_init % rho
        universe = range(rho)

    mm = MealyMachine(memory=[], initial=init)
    todo = list(universe) if full else [init]
    seen = set(todo)
    while todo:
        mem = todo.pop()
        mm.memory.append(mem)
        for q in m.states:
            dist = decide(mem, q)
            mm.nxt[(mem, q)] = dist
            for a in sorted(dist):
                nm = step(mem, q, a)
                if nm is None:
                    continue
                mm.update[(mem, q, a)] = nm
                if nm not in seen:
                    seen.add(nm)
                    todo.append(nm)
    mm.memory.sort()
    return mm
