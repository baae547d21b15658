"""Compressed Markov chains over retained configurations.

Given a refined interval partition, only a few counter values per interval
are retained.  Each retained configuration jumps directly to configurations
at its successor counter values; the transition probabilities aggregate all
histories in between and come from the systems in :mod:`ocmdp.eqsys`.
Mass that never reaches a successor counter goes to the sink ``BOT``.

Entries of a numeric chain are kept as a bracket: ``trans`` holds lower
bounds and ``trans_hi`` upper bounds.  Both coincide (as exact fractions)
whenever every interval involved is bounded and the mode is rational.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .eqsys import (
    PolySystem,
    Step,
    bounded_pins,
    bounded_system,
    fold,
    fmt_poly,
    mid,
    pconst,
    qual_from_step,
    step_from_chain,
    term_var,
    termination_system,
    var,
    zero_variables,
)
from .linalg import SingularSystem, solve_fixpoint
from .model import INF, Bound, ModelError, OcMdp, OneCounterChain, can_reach, is_inf
from .partitions import Interval, IntervalPartition, isolate, parse_partition, refine_partition
from .solvers import FLOAT, RATIONAL, SolveConfig, solve_staged, termination_bounds
from .strategies import CIS, IntervalStrategy

SYMBOLIC = "symbolic"
BOT = "bot"

Node = Hashable


def cfg_node(q, k: int) -> Tuple:
    return (q, k)


@dataclass
class SuccessorScheme:
    """``succ[k]`` lists the successor counter values of retained value ``k``."""

    succ: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def counters(self) -> List[int]:
        return sorted(self.succ)


def successor_scheme(p: IntervalPartition) -> SuccessorScheme:
    out: Dict[int, Tuple[int, ...]] = {}
    for iv in p.intervals:
        if not iv.bounded:
            out[iv.lo] = (iv.lo - 1,)
            continue
        lo, hi, beta = iv.lo, int(iv.hi), iv.beta
        for alpha in range(beta):
            out[lo + 2**alpha - 1] = (lo - 1, lo + 2 ** (alpha + 1) - 1)
            out[hi - (2**alpha - 1)] = (hi + 1, hi - (2 ** (alpha + 1) - 1))
    return SuccessorScheme(out)


def _check_refined(p: IntervalPartition) -> None:
    for iv in p.intervals:
        if iv.bounded:
            n = len(iv) + 1
            if n & (n - 1):
                raise ModelError(f"interval {iv} has size {len(iv)}, not 2^b - 1; refine the partition first")


def retained_counters(p: IntervalPartition, bound: Bound) -> List[int]:
    _check_refined(p)
    ks = set(successor_scheme(p).succ)
    ks.add(0)
    if not is_inf(bound):
        ks.add(int(bound))
    return sorted(ks)


def retained_states(p: IntervalPartition, m_or_states, bound: Bound) -> List[Node]:
    """``{BOT} + Q x retained counters`` for a refined partition."""
    states = m_or_states.states if hasattr(m_or_states, "states") else list(m_or_states)
    return [BOT] + [cfg_node(q, k) for k in retained_counters(p, bound) for q in states]


@dataclass
class CompressedChain:
    """A finite chain over retained configurations and ``BOT``.

    ``trans[s][s2]`` is an exact fraction, a float lower bound, or (symbolic
    mode) a polynomial over the variables of ``system``.  ``trans_hi``
    holds the matching upper bounds in numeric modes.
    """

    states: List[Node]
    trans: Dict[Node, Dict[Node, object]]
    trans_hi: Dict[Node, Dict[Node, object]]
    mode: str
    bound: Bound
    partition: IntervalPartition
    scheme: SuccessorScheme
    base_states: Tuple[Hashable, ...] = ()
    system: Optional[PolySystem] = None
    certified: bool = True
    notes: List[str] = field(default_factory=list)
    side_rows: List[Dict[Node, object]] = field(default_factory=list)

    def absorbing(self, s: Node) -> bool:
        if s == BOT:
            return True
        k = s[1]
        return k == 0 or (not is_inf(self.bound) and k == self.bound)

    @property
    def exact(self) -> bool:
        if self.mode == SYMBOLIC:
            return False
        for s, row in self.trans.items():
            for t, x in row.items():
                if not isinstance(x, Fraction) or self.trans_hi[s].get(t) != x:
                    return False
        return True

    def reach_bracket(self, targets: Iterable[Node], init: Node) -> Tuple[object, object]:
        """Lower and upper bound on the probability of reaching ``targets``."""
        if self.mode == SYMBOLIC:
            raise ModelError("a symbolic chain has no numeric reachability")
        tset = set(targets)
        lo = _reach_exact(self.trans, tset)
        if self.exact:
            v = lo.get(init, Fraction(0))
            return v, v
        hi = _reach_exact(self.trans_hi, tset, over=True)
        return lo.get(init, Fraction(0)), hi.get(init, Fraction(0))

    def dump(self) -> str:
        lines = [f"chain mode={self.mode} bound={'inf' if is_inf(self.bound) else self.bound}"]
        lines.append(f"partition {self.partition}")
        for s in self.states:
            row = self.trans.get(s, {})
            lines.append(f"state {node_name(s)}")
            for t in sorted(row, key=node_key):
                lines.append(f"  {node_name(t)} {_fmt_entry(row[t], self.trans_hi.get(s, {}).get(t), self.mode)}")
        return "\n".join(lines) + "\n"


def node_name(s: Node) -> str:
    return BOT if s == BOT else f"{s[0]}@{s[1]}"


def node_key(s: Node):
    return (-1, "") if s == BOT else (s[1], str(s[0]))


def _fmt_entry(lo, hi, mode) -> str:
    if mode == SYMBOLIC:
        return fmt_poly(lo)
    if isinstance(lo, Fraction) and lo == hi:
        return str(lo)
    return f"{float(lo)!r}~{float(hi)!r}"


def _parse_entry(text: str):
    if "~" in text:
        a, b = text.split("~")
        return float(a), float(b)
    v = Fraction(text)
    return v, v


def _parse_node(text: str) -> Node:
    if text == BOT:
        return BOT
    q, sep, k = text.rpartition("@")
    if not sep:
        raise ModelError(f"bad chain state {text!r}")
    return (q, int(k))


def parse_chain(text: str) -> CompressedChain:
    """Inverse of :meth:`CompressedChain.dump` for numeric chains."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("chain "):
        raise ModelError("chain dump must start with a 'chain' header")
    head = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
    mode = head.get("mode", RATIONAL)
    if mode == SYMBOLIC:
        raise ModelError("symbolic chain dumps cannot be parsed back")
    bound: Bound = INF if head.get("bound") == "inf" else int(head["bound"])
    if len(lines) < 2 or not lines[1].startswith("partition"):
        raise ModelError("missing partition line")
    part = parse_partition(lines[1][len("partition"):])
    states: List[Node] = []
    trans: Dict[Node, Dict[Node, object]] = {}
    trans_hi: Dict[Node, Dict[Node, object]] = {}
    cur = None
    for n, ln in enumerate(lines[2:], start=3):
        if ln.startswith("state "):
            cur = _parse_node(ln.split()[1])
            states.append(cur)
            trans[cur] = {}
            trans_hi[cur] = {}
        else:
            if cur is None:
                raise ModelError(f"line {n}: transition before any state")
            try:
                t, val = ln.split()
                lo, hi = _parse_entry(val)
            except ValueError:
                raise ModelError(f"line {n}: bad transition {ln.strip()!r}") from None
            t = _parse_node(t)
            trans[cur][t] = lo
            trans_hi[cur][t] = hi
    base = []
    for s in states:
        if s != BOT and s[0] not in base:
            base.append(s[0])
    return CompressedChain(states, trans, trans_hi, mode, bound, part, successor_scheme(part), tuple(base))


def chains_equal(a: CompressedChain, b: CompressedChain) -> bool:
    def norm(tr):
        return {s: {t: x for t, x in row.items()} for s, row in tr.items()}

    return (
        a.states == b.states
        and a.mode == b.mode
        and a.bound == b.bound
        and str(a.partition) == str(b.partition)
        and norm(a.trans) == norm(b.trans)
        and norm(a.trans_hi) == norm(b.trans_hi)
    )


# --- reachability over a bracketed chain --------------------------------------


def _reach_exact(
    trans: Mapping[Node, Mapping[Node, object]],
    tset: Set[Node],
    over: bool = False,
) -> Dict[Node, Fraction]:
    """Least solution of the reach system with the given (exact) entries.

    With ``over`` the coefficients may over-approximate a sub-stochastic
    matrix; if the system is then not uniquely solvable, 1 is used.
    """
    positive = lambda x: x > 0
    alive = can_reach(trans, tset, positive)
    rows = {}
    for s in alive - tset:
        coefs: Dict[Node, Fraction] = {}
        c0 = Fraction(0)
        for t, x in trans.get(s, {}).items():
            if not x > 0:
                continue
            x = Fraction(x)
            if t in tset:
                c0 += x
            elif t in alive:
                coefs[t] = coefs.get(t, 0) + x
        rows[s] = (coefs, c0)
    order = sorted(rows, key=node_key)
    try:
        sol = solve_fixpoint(rows, order)
    except SingularSystem:
        if not over:
            raise
        sol = {s: Fraction(1) for s in rows}
    out: Dict[Node, Fraction] = {s: Fraction(1) for s in tset}
    for s in trans:
        if s not in tset:
            v = sol.get(s, Fraction(0))
            if over and (v > 1 or v < 0):
                v = Fraction(1)
            out[s] = v
    return out


# --- building the chain -------------------------------------------------------


def _numeric_step(step: Step) -> bool:
    return all(pconst(p) is not None for row in step.values() for p in row.values())


def _compress_steps(
    base_states: Sequence[Hashable],
    p: IntervalPartition,
    bound: Bound,
    steps: Sequence[Step],
    mode: str,
    cfg: Optional[SolveConfig],
    supports: Optional[Sequence[Optional[Set]]] = None,
    scope_prefix: str = "",
) -> CompressedChain:
    _check_refined(p)
    cfg = cfg or SolveConfig()
    if p.bound != bound:
        raise ModelError(f"partition {p} does not cover [1, {bound}-1]")
    base_states = list(base_states)
    counters = retained_counters(p, bound)
    states = retained_states(p, base_states, bound)
    scheme = successor_scheme(p)
    trans: Dict[Node, Dict[Node, object]] = {}
    trans_hi: Dict[Node, Dict[Node, object]] = {}
    system = PolySystem() if mode == SYMBOLIC else None
    certified = True
    notes: List[str] = []
    absorbing = {0} | (set() if is_inf(bound) else {int(bound)})
    one = Fraction(1)

    def put(src, dst, lo, hi=None):
        if mode == SYMBOLIC:
            if lo:
                trans[src][dst] = lo
            return
        hi = lo if hi is None else hi
        if lo or hi:
            trans[src][dst] = trans[src].get(dst, 0) + lo
            trans_hi[src][dst] = trans_hi[src].get(dst, 0) + hi

    for s in states:
        trans[s] = {}
        trans_hi[s] = {}
    trans[BOT][BOT] = one if mode != SYMBOLIC else {(): one}
    trans_hi[BOT][BOT] = one
    for k in absorbing:
        for q in base_states:
            s = cfg_node(q, k)
            trans[s][s] = one if mode != SYMBOLIC else {(): one}
            trans_hi[s][s] = one

    for j, iv in enumerate(p.intervals):
        step = steps[j]
        scope = f"{scope_prefix}j{j}"
        if iv.bounded:
            beta = iv.beta
            sys = bounded_system(step, base_states, beta, scope)
            if supports is not None and supports[j] is not None:
                qual = supports[j]
            elif _numeric_step(step):
                qual = qual_from_step(step)
            else:
                qual = None
            if qual is not None:
                sys.pins |= bounded_pins(qual, base_states, beta, scope)
            if mode == SYMBOLIC:
                system.update(sys)
                vals = None
            else:
                sub = SolveConfig(mode=RATIONAL if mode == RATIONAL else FLOAT, eps=cfg.eps, max_iters=cfg.max_iters)
                vals = solve_staged(sys, sub).values
            lo_c, hi_c = iv.lo, int(iv.hi)
            for alpha in range(beta):
                jm = mid(alpha)
                for family in ("low", "high"):
                    if family == "low":
                        src_k = lo_c + 2**alpha - 1
                        down_k, up_k = lo_c - 1, lo_c + 2 ** (alpha + 1) - 1
                    else:
                        src_k = hi_c - (2**alpha - 1)
                        down_k, up_k = hi_c - (2 ** (alpha + 1) - 1), hi_c + 1
                    if family == "high" and alpha == beta - 1:
                        continue  # same node as the low family
                    for q in base_states:
                        src = cfg_node(q, src_k)
                        for pst in base_states:
                            uv = ("up", scope, alpha, q, jm, pst)
                            dv = ("down", scope, alpha, q, jm, pst)
                            if mode == SYMBOLIC:
                                put(src, cfg_node(pst, up_k), {} if uv in sys.pins else var(uv))
                                put(src, cfg_node(pst, down_k), {} if dv in sys.pins else var(dv))
                            else:
                                put(src, cfg_node(pst, up_k), vals.get(uv, 0))
                                put(src, cfg_node(pst, down_k), vals.get(dv, 0))
        else:
            src_k = iv.lo
            if mode == SYMBOLIC:
                sys = termination_system(step, base_states, scope)
                if supports is not None and supports[j] is not None:
                    pos_params = supports[j]
                    sys.pins |= zero_variables(sys, pos_params)
                system.update(sys)
                for q in base_states:
                    for pst in base_states:
                        tv = term_var(scope, q, pst)
                        put(cfg_node(q, src_k), cfg_node(pst, src_k - 1), {} if tv in sys.pins else var(tv))
            else:
                tb = termination_bounds(step, base_states, cfg)
                certified = certified and tb.certified
                if tb.status != "converged":
                    notes.append(f"interval {iv}: termination iteration {tb.status} (residual {tb.residual:.3g})")
                for q in base_states:
                    for pst in base_states:
                        lo_v, hi_v = tb.lower[(q, pst)], tb.upper[(q, pst)]
                        put(cfg_node(q, src_k), cfg_node(pst, src_k - 1), lo_v, hi_v)

    if mode != SYMBOLIC:
        for k in counters:
            if k in absorbing:
                continue
            for q in base_states:
                s = cfg_node(q, k)
                row = trans[s]
                if mode == RATIONAL and all(isinstance(x, Fraction) for x in row.values()) and all(
                    isinstance(x, Fraction) for x in trans_hi[s].values()
                ) and row == trans_hi[s]:
                    rest = one - sum(row.values(), Fraction(0))
                    if rest < 0:
                        raise ModelError(f"row of {node_name(s)} exceeds 1")
                    if rest:
                        put(s, BOT, rest)
                else:
                    lo_rest = max(0.0, 1.0 - float(sum(trans_hi[s].values())))
                    hi_rest = max(0.0, min(1.0, 1.0 - float(sum(row.values())) + 1e-15))
                    if hi_rest > 0:
                        put(s, BOT, lo_rest, hi_rest)
    return CompressedChain(
        states, trans, trans_hi, mode, bound, p, scheme, tuple(base_states), system, certified, notes
    )


def prepare_partition(p: IntervalPartition, init_counter: Optional[int] = None) -> IntervalPartition:
    """``Refine(Isolate(p, k))``, so that ``k`` is retained."""
    if init_counter is not None and init_counter >= 1:
        p = isolate(p, init_counter)
    return refine_partition(p)


def compress(
    m: OcMdp,
    s: IntervalStrategy,
    p: Optional[IntervalPartition] = None,
    bound: Optional[Bound] = None,
    mode: str = RATIONAL,
    cfg: SolveConfig = SolveConfig(),
    init_counter: Optional[int] = None,
    supports: Optional[Sequence[Optional[Set]]] = None,
) -> CompressedChain:
    """The compressed chain of ``m`` under the OEIS ``s``.

    ``p`` defaults to the strategy's own partition; ``bound`` to its cover.
    With ``init_counter`` the partition is isolated and refined first,
    otherwise it must already be refined.  In symbolic mode transition
    entries are variables of ``chain.system``; ``supports[j]``, when given,
    lists positive one-step triples (bounded intervals) or positive
    parameters (unbounded) used to pin zero variables.
    """
    if s.kind == CIS:
        raise ModelError("compress takes an open-ended strategy; use cis_to_ocmc for cyclic ones")
    if mode not in (RATIONAL, FLOAT, SYMBOLIC):
        raise ModelError(f"unknown mode {mode!r}")
    p = s.partition if p is None else p
    bound = p.bound if bound is None else bound
    if init_counter is not None:
        p = prepare_partition(p, init_counter)
    steps = []
    for iv in p.intervals:
        row = s.row_at(iv.lo)
        if iv.bounded and s.index(int(iv.hi)) != s.index(iv.lo):
            raise ModelError(f"strategy is not constant on {iv}")
        steps.append(fold(m, row))
    return _compress_steps(m.states, p, bound, steps, mode, cfg, supports)


def compress_ocmc(
    c: OneCounterChain,
    K: IntervalPartition,
    mode: str = RATIONAL,
    cfg: SolveConfig = SolveConfig(),
) -> CompressedChain:
    """Compress a one-counter chain along the refined partition ``K``."""
    step = step_from_chain(c)
    return _compress_steps(c.states, K, K.bound, [step] * len(K), mode, cfg)


def cis_to_ocmc(
    m: OcMdp,
    s: IntervalStrategy,
    J: Optional[IntervalPartition] = None,
    cfg: SolveConfig = SolveConfig(),
) -> OneCounterChain:
    """One-counter chain over window configurations induced by a CIS.

    ``J`` is a refined partition of ``[1, rho]`` on which ``s`` is constant
    (default: refined window).  Within the window the compressed chain is
    computed exactly; moves to counter 0 become ``-1`` steps into
    ``(p, rho)``, moves to ``rho + 1`` become ``+1`` steps into ``(p, 1)``.
    """
    if s.kind != CIS:
        raise ModelError("cis_to_ocmc needs a cyclic interval strategy")
    rho = s.period
    J = refine_partition(s.partition) if J is None else J
    if J.bound != rho + 1:
        raise ModelError(f"window partition {J} does not cover [1,{rho}]")
    steps = []
    for iv in J.intervals:
        if s.index(int(iv.hi)) != s.index(iv.lo):
            raise ModelError(f"strategy is not constant on {iv}")
        steps.append(fold(m, s.row_at(iv.lo)))
    inner = _compress_steps(m.states, J, rho + 1, steps, RATIONAL, cfg)
    states: List[Node] = [x for x in inner.states if x == BOT or 1 <= x[1] <= rho]
    trans: Dict[Node, Dict[Tuple[Node, int], object]] = {BOT: {(BOT, 0): Fraction(1)}}
    for x in states:
        if x == BOT:
            continue
        row: Dict[Tuple[Node, int], object] = {}
        for y, pr in inner.trans[x].items():
            if y == BOT:
                key = (BOT, 0)
            elif y[1] == 0:
                key = ((y[0], rho), -1)
            elif y[1] == rho + 1:
                key = ((y[0], 1), 1)
            else:
                key = (y, 0)
            row[key] = row.get(key, 0) + pr
        trans[x] = row
    return OneCounterChain(tuple(states), trans)


def cis_second_partition(k_init: int, rho: int) -> IntervalPartition:
    """``Refine([1, k/rho]) + [k/rho + 1, inf)`` for the outer counter."""
    head = k_init // rho
    parts: List[Interval] = []
    if head >= 1:
        parts.extend(refine_partition(IntervalPartition((Interval(1, head),))).intervals)
    parts.append(Interval(head + 1, INF))
    return IntervalPartition(tuple(parts))


def cis_init_node(q, k_init: int, rho: int) -> Tuple[Node, int]:
    """Window state and outer counter corresponding to ``(q, k_init)``."""
    if k_init % rho == 0:
        return (q, rho), k_init // rho
    return (q, k_init % rho), k_init // rho + 1
