"""Verification pipelines: is the probability of the objective at least theta?"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple

from .compression import (
    CompressedChain,
    cis_init_node,
    cis_second_partition,
    cis_to_ocmc,
    compress,
    compress_ocmc,
    prepare_partition,
)
from .model import INF, REACH, SELTERM, Bound, ModelError, OcMdp, Query, absorb_targets, is_inf
from .partitions import isolate, refine_partition
from .solvers import RATIONAL, SolveConfig, decide
from .strategies import CIS, OEIS, IntervalStrategy

YES = "yes"
NO = "no"
INCONCLUSIVE = "inconclusive"

CEILING = "ceiling"


@dataclass
class Verdict:
    answer: str
    lo: object
    hi: object
    theta: Fraction
    exact: bool
    partition: str = ""
    status: str = ""
    transformed: bool = False
    notes: List[str] = field(default_factory=list)

    @property
    def probability(self):
        """The exact probability when known, else the bracket midpoint."""
        if self.exact:
            return self.lo
        return (float(self.lo) + float(self.hi)) / 2


def _trivial(q0: str, k: int, bound: Bound, kind: str, targets) -> Optional[Fraction]:
    if kind == REACH and q0 in targets:
        return Fraction(1)
    if k == 0:
        return Fraction(1) if kind == SELTERM and q0 in targets else Fraction(0)
    if not is_inf(bound) and k == bound:
        return Fraction(1) if kind == CEILING else Fraction(0)
    return None


def _goal(m: OcMdp, bound: Bound, kind: str, targets) -> List:
    if kind == CEILING:
        return [(q, int(bound)) for q in m.states]
    goal = [(t, 0) for t in sorted(targets)]
    if kind == REACH and not is_inf(bound):
        goal += [(t, int(bound)) for t in sorted(targets)]
    return goal


def oeis_bracket(
    m: OcMdp,
    s: IntervalStrategy,
    bound: Bound,
    init: Tuple[str, int],
    kind: str,
    targets: Iterable[str] = (),
    cfg: SolveConfig = SolveConfig(),
    mode: str = RATIONAL,
) -> Tuple[object, object, Optional[CompressedChain]]:
    """Bracket on the probability of ``kind`` from ``init`` under an OEIS.

    ``kind`` is ``reach``, ``selterm`` or ``ceiling`` (reach counter ``B``).
    Reachability is handled by making targets absorbing first.
    """
    if s.kind != OEIS:
        raise ModelError("expected an open-ended interval strategy")
    if s.partition.bound != bound:
        raise ModelError(f"strategy partition {s.partition} does not cover [1, {bound}-1]")
    tset = set(targets)
    q0, k = init
    if not is_inf(bound) and not 0 <= k <= bound:
        raise ModelError(f"initial counter {k} outside [0,{bound}]")
    triv = _trivial(q0, k, bound, kind, tset)
    if triv is not None:
        return triv, triv, None
    mm = absorb_targets(m, tset) if kind == REACH else m
    p = prepare_partition(s.partition, k)
    chain = compress(mm, s, p, bound, mode=mode, cfg=cfg)
    lo, hi = chain.reach_bracket(_goal(m, bound, kind, tset), (q0, k))
    return lo, hi, chain


def cis_bracket(
    m: OcMdp,
    s: IntervalStrategy,
    init: Tuple[str, int],
    kind: str,
    targets: Iterable[str] = (),
    cfg: SolveConfig = SolveConfig(),
) -> Tuple[object, object, Optional[CompressedChain]]:
    """Bracket for a cyclic strategy via two nested compressions."""
    if s.kind != CIS:
        raise ModelError("expected a cyclic interval strategy")
    if kind == CEILING:
        raise ModelError("the ceiling objective needs a finite bound")
    tset = set(targets)
    q0, k = init
    triv = _trivial(q0, k, INF, kind, tset)
    if triv is not None:
        return triv, triv, None
    mm = absorb_targets(m, tset) if kind == REACH else m
    rho = s.period
    J = refine_partition(isolate(s.partition, k % rho)) if k % rho else refine_partition(s.partition)
    inner = cis_to_ocmc(mm, s, J, cfg)
    K = cis_second_partition(k, rho)
    chain = compress_ocmc(inner, K, RATIONAL, cfg)
    node, outer = cis_init_node(q0, k, rho)
    goal = [((t, rho), 0) for t in sorted(tset)]
    lo, hi = chain.reach_bracket(goal, (node, outer))
    return lo, hi, chain


def _verdict(lo, hi, q: Query, chain: Optional[CompressedChain], transformed: bool) -> Verdict:
    exact = isinstance(lo, Fraction) and lo == hi
    theta = q.threshold
    answer = decide(lo, hi, theta)
    notes = list(chain.notes) if chain is not None else []
    status = "exact" if exact else ("certified" if chain is None or chain.certified else "uncertified")
    if not exact and chain is not None and not chain.certified:
        notes.append("bracket relies on uncertified numerics (Newton or float mode)")
    part = str(chain.partition) if chain is not None else ""
    return Verdict(answer, lo, hi, theta, exact, part, status, transformed, notes)


def verify_bounded_oeis(m: OcMdp, s: IntervalStrategy, q: Query, cfg: SolveConfig = SolveConfig()) -> Verdict:
    """Exact verification for a finite counter bound."""
    if is_inf(q.bound):
        raise ModelError("verify_bounded_oeis needs a finite bound")
    q.check_against(m)
    kind = q.objective.kind
    lo, hi, chain = oeis_bracket(m, s, q.bound, tuple(q.init), kind, q.objective.targets, cfg, cfg.mode)
    return _verdict(lo, hi, q, chain, kind == REACH)


def verify_oeis(m: OcMdp, s: IntervalStrategy, q: Query, cfg: SolveConfig = SolveConfig()) -> Verdict:
    """Verification of an OEIS; exact when every interval is bounded."""
    q.check_against(m)
    kind = q.objective.kind
    lo, hi, chain = oeis_bracket(m, s, q.bound, tuple(q.init), kind, q.objective.targets, cfg, cfg.mode)
    return _verdict(lo, hi, q, chain, kind == REACH)


def verify_cis(m: OcMdp, s: IntervalStrategy, q: Query, cfg: SolveConfig = SolveConfig()) -> Verdict:
    if not is_inf(q.bound):
        raise ModelError("cyclic strategies are verified against unbounded models")
    q.check_against(m)
    kind = q.objective.kind
    lo, hi, chain = cis_bracket(m, s, tuple(q.init), kind, q.objective.targets, cfg)
    return _verdict(lo, hi, q, chain, kind == REACH)


def verify(m: OcMdp, s: IntervalStrategy, q: Query, cfg: SolveConfig = SolveConfig()) -> Verdict:
    """Dispatch on the strategy kind."""
    if s.kind == CIS:
        return verify_cis(m, s, q, cfg)
    return verify_oeis(m, s, q, cfg)


def emit_verification_smt(m: OcMdp, s: IntervalStrategy, q: Query, negated: bool = True, symbolic: bool = False) -> str:
    from .smt import verification_problem

    return verification_problem(m, s, q, symbolic=symbolic).render(negated=negated)
