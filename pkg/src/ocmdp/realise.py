"""Realisability: search for an interval strategy meeting the threshold."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from .model import ModelError, OcMdp, Query, is_inf
from .partitions import (
    IntervalPartition,
    PeriodicPartition,
    enumerate_partitions,
)
from .smt import SmtProblem, realisability_problem, run_solver, smt_name, z_var
from .solvers import SolveConfig
from .strategies import (
    CIS,
    OEIS,
    IntervalStrategy,
    SupportAssignment,
    cis,
    enumerate_pure,
    enumerate_supports,
    oeis,
    uniform_on,
)
from .verify import INCONCLUSIVE, NO, YES, Verdict, verify

PENDING = "inconclusive-pending-solver"


@dataclass
class RealisabilityResult:
    answer: str
    witness: Optional[IntervalStrategy] = None
    partition: Optional[object] = None
    value: Optional[Tuple[object, object]] = None
    stats: Dict[str, int] = field(default_factory=lambda: {"candidates": 0, "inconclusive": 0})
    scripts: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)


def _check(m: OcMdp, q: Query, s: IntervalStrategy, cfg: SolveConfig) -> Verdict:
    return verify(m, s, q, cfg)


def _search(
    m: OcMdp,
    q: Query,
    candidates: Iterator[Tuple[IntervalStrategy, object]],
    cfg: SolveConfig,
    jobs: int = 1,
    stats: Optional[Dict[str, int]] = None,
) -> RealisabilityResult:
    """Verify candidates in order; the first yes (in enumeration order) wins."""
    stats = stats if stats is not None else {"candidates": 0, "inconclusive": 0}
    res = RealisabilityResult(NO, stats=stats)
    if jobs <= 1:
        for s, part in candidates:
            stats["candidates"] += 1
            v = _check(m, q, s, cfg)
            if v.answer == YES:
                return RealisabilityResult(YES, s, part, (v.lo, v.hi), stats)
            if v.answer == INCONCLUSIVE:
                stats["inconclusive"] += 1
                res.answer = INCONCLUSIVE
        return res
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        while True:
            batch = list(itertools.islice(candidates, 4 * jobs))
            if not batch:
                break
            verdicts = list(pool.map(lambda c: _check(m, q, c[0], cfg), batch))
            for (s, part), v in zip(batch, verdicts):
                stats["candidates"] += 1
                if v.answer == YES:
                    return RealisabilityResult(YES, s, part, (v.lo, v.hi), stats)
                if v.answer == INCONCLUSIVE:
                    stats["inconclusive"] += 1
                    res.answer = INCONCLUSIVE
    return res


def realise_pure_fixed(
    m: OcMdp,
    q: Query,
    p: IntervalPartition,
    cfg: SolveConfig = SolveConfig(),
    jobs: int = 1,
) -> RealisabilityResult:
    """Is there a pure OEIS based on ``p`` meeting the threshold?

    Unbounded searches answer ``inconclusive`` (never ``no``) when some
    candidate's bracket straddles the threshold and none verifies.
    """
    if p.bound != q.bound:
        raise ModelError(f"partition {p} does not cover [1, {q.bound}-1]")
    q.check_against(m)
    return _search(m, q, ((s, p) for s in enumerate_pure(p, m)), cfg, jobs)


def _partition_order(parts: Sequence[IntervalPartition]) -> List[IntervalPartition]:
    def key(p: IntervalPartition):
        lens = tuple(len(iv) if iv.bounded else 0 for iv in p.intervals)
        return (len(p), lens)

    return sorted(parts, key=key)


def realise_pure_param(
    m: OcMdp,
    q: Query,
    d: int,
    n: int,
    kind: str = OEIS,
    cfg: SolveConfig = SolveConfig(),
    jobs: int = 1,
) -> RealisabilityResult:
    """Search pure strategies over every partition compatible with ``d, n``.

    For cyclic strategies (unbounded only) periods range over ``[1, d n]``
    and windows over partitions of ``[1, rho]`` with the same constraints.
    """
    q.check_against(m)
    stats = {"candidates": 0, "inconclusive": 0}
    if kind == OEIS:
        parts = _partition_order(list(enumerate_partitions(d, n, q.bound)))
        if not parts:
            return RealisabilityResult(NO, stats=stats, notes=["no partition is compatible with d and n"])

        def gen():
            for p in parts:
                for s in enumerate_pure(p, m):
                    yield s, p

        return _search(m, q, gen(), cfg, jobs, stats)
    if kind != CIS:
        raise ModelError(f"unknown strategy kind {kind!r}")
    if not is_inf(q.bound):
        raise ModelError("cyclic strategies need an unbounded model")

    def gen_cis():
        for rho in range(1, d * n + 1):
            for w in _partition_order(list(enumerate_partitions(d, n, rho + 1))):
                pp = PeriodicPartition(rho, w)
                for s in enumerate_pure(w, m):
                    yield cis(pp, s.table), pp

    return _search(m, q, gen_cis(), cfg, jobs, stats)


# --- randomised, bounded -----------------------------------------------------


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _candidate_tables(
    m: OcMdp, p: IntervalPartition, supp: SupportAssignment, limit: int
) -> Iterator[List[Dict[str, Dict[str, Fraction]]]]:
    """Uniform distributions on the supports first, then a coarse grid."""
    yield uniform_on(supp, p)
    slots = [(key, sorted(acts)) for key, acts in sorted(supp.supports.items()) if len(acts) > 1]
    if not slots:
        return
    count = 1
    for den in (3, 4, 6):
        options = [list(_compositions(den, len(acts))) for _, acts in slots]
        for pick in itertools.product(*options):
            if count >= limit:
                return
            count += 1
            table = uniform_on(supp, p)
            for ((q, j), acts), comp in zip(slots, pick):
                table[j][q] = {a: Fraction(c, den) for a, c in zip(acts, comp)}
            yield table


def _z_values(m: OcMdp, prob: SmtProblem, p: IntervalPartition, table) -> Dict:
    """Strategy variable values for the refined intervals of the problem."""
    out = {v: None for v in prob.outer}
    refined = prob.refined
    for j, iv in enumerate(refined.intervals):
        src = p.index_of(iv.lo)
        for q in m.states:
            for a in m.enabled[q]:
                v = z_var(j, q, a)
                if v in out:
                    out[v] = Fraction(table[src][q].get(a, 0))
    return out


def realise_rand_bounded(
    m: OcMdp,
    q: Query,
    p: IntervalPartition,
    cfg: SolveConfig = SolveConfig(),
    solver_cmd: Optional[str] = None,
    grid_limit: int = 64,
    timeout: float = 60.0,
) -> RealisabilityResult:
    """Randomised OEIS realisability over ``p`` for a finite bound.

    Every support assignment yields an existential script.  Without an
    external solver each support is probed with uniform and grid
    candidates, each checked by exact verification and by evaluating the
    script on the induced model.  With threshold 1 a support is decided by
    its uniform candidate, since almost-sure reachability only depends on
    supports.  Otherwise an undecided instance is reported as pending.
    """
    if is_inf(q.bound):
        raise ModelError("randomised realisability by support enumeration needs a finite bound")
    if p.bound != q.bound:
        raise ModelError(f"partition {p} does not cover [1, {q.bound}-1]")
    q.check_against(m)
    stats = {"candidates": 0, "inconclusive": 0, "supports": 0}
    scripts: List[str] = []
    undecided = False
    for supp in enumerate_supports(p, m):
        stats["supports"] += 1
        prob = realisability_problem(m, q, p, supp.supports)
        scripts.append(prob.render())
        decided_no = False
        for table in _candidate_tables(m, p, supp, grid_limit):
            stats["candidates"] += 1
            s = oeis(p, table)
            v = _check(m, q, s, cfg)
            if v.answer == YES:
                z = _z_values(m, prob, p, table)
                ok, failed = prob.evaluate(prob.assignment(z))
                if not ok:
                    raise ModelError(f"witness violates the emitted script: {failed[:3]}")
                return RealisabilityResult(YES, s, p, (v.lo, v.hi), stats, scripts, ["witness validated against the script"])
            if q.threshold == 1:
                decided_no = True
                break
        if decided_no:
            continue
        if solver_cmd:
            ans = run_solver(scripts[-1], solver_cmd, timeout)
            if ans.status == "unsat":
                continue
            if ans.status == "sat":
                table = _table_from_model(m, prob, p, ans.model)
                if table is not None:
                    s = oeis(p, table)
                    v = _check(m, q, s, cfg)
                    if v.answer == YES:
                        return RealisabilityResult(YES, s, p, (v.lo, v.hi), stats, scripts, ["witness from solver model"])
        undecided = True
    if undecided:
        stats["inconclusive"] += 1
        return RealisabilityResult(PENDING, None, p, None, stats, scripts)
    return RealisabilityResult(NO, None, p, None, stats, scripts)


def _table_from_model(m: OcMdp, prob: SmtProblem, p: IntervalPartition, model: Dict[str, Fraction]):
    table: List[Dict[str, Dict[str, Fraction]]] = [dict() for _ in range(len(p))]
    refined = prob.refined
    for j, iv in enumerate(refined.intervals):
        src = p.index_of(iv.lo)
        for q in m.states:
            acts = m.enabled[q]
            if len(acts) == 1:
                table[src][q] = {acts[0]: Fraction(1)}
                continue
            row = {}
            for a in acts:
                name = smt_name(z_var(j, q, a))
                if name not in model:
                    return None
                row[a] = model[name]
            table[src].setdefault(q, row)
    return table


def emit_realisability_smt(m: OcMdp, q: Query, base) -> str:
    """The quantified sentence for free supports (OEIS or CIS)."""
    return realisability_problem(m, q, base).render(quantified=True)
