"""Instance generators: worked examples, reduction gadgets and random models."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .model import INF, SELTERM, Config, ModelError, Objective, OcMdp, Query
from .partitions import IntervalPartition, PeriodicPartition, partition
from .strategies import IntervalStrategy, cis, dirac, oeis

#: Separation constant exponent: for an instance with ``n`` numbers and
#: total bit size ``lam``, a sum of square roots differing from ``y``
#: differs by more than ``2 ** -(2**n * (lam + 1))``.
def separation_bound(n: int, lam: int) -> Fraction:
    return Fraction(1, 2 ** (2**n * (lam + 1)))


@dataclass(frozen=True)
class SqrtSumInstance:
    xs: Tuple[int, ...]
    y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "xs", tuple(self.xs))
        if not self.xs:
            raise ModelError("square-root-sum instance needs at least one number")
        if any(x < 1 for x in self.xs):
            raise ModelError("square-root-sum entries must be >= 1")
        if self.y < 0:
            raise ModelError("y must be non-negative")

    @property
    def n(self) -> int:
        return len(self.xs)

    @property
    def m(self) -> int:
        return max(self.xs)

    @property
    def lam(self) -> int:
        return sum(x.bit_length() for x in self.xs) + self.y.bit_length()

    @property
    def theta(self) -> Fraction:
        return Fraction(self.y, self.n * self.m)

    @property
    def bound(self) -> int:
        """Counter bound making the bounded gadget decide the instance."""
        n, m = self.n, self.m
        return 2**n * m * (self.lam + 1) + n * m * m + 1

    def closed_form(self) -> float:
        return sum(math.sqrt(x) for x in self.xs) / (self.n * self.m)


def _gadget(inst: SqrtSumInstance) -> OcMdp:
    n, m = inst.n, inst.m
    tr: Dict[Tuple[str, str], Tuple[int, Dict[str, object]]] = {}
    tr[("q_init", "a")] = (0, {f"q{i}": Fraction(1, n) for i in range(n)})
    for i, x in enumerate(inst.xs):
        q, qp, qm = f"q{i}", f"q{i}+", f"q{i}-"
        tr[(q, "a")] = (0, {qp: Fraction(1, 2), qm: Fraction(1, 2)})
        tr[(qp, "a")] = (1, {q: Fraction(1)})
        stay = 1 - Fraction(x, m * m)
        succ: Dict[str, object] = {"t": Fraction(x, m * m)}
        if stay:
            succ[q] = stay
        tr[(qm, "a")] = (-1, succ)
    tr[("t", "a")] = (-1, {"t": Fraction(1)})
    return OcMdp.build(tr)


def gen_sqrt_sum(inst: SqrtSumInstance) -> Tuple[OcMdp, Query]:
    """Gadget whose selective-termination value is ``sum(sqrt(x_i)) / (n m)``.

    From ``(q_i, 1)`` alone the value is ``sqrt(x_i) / m``.
    """
    m = _gadget(inst)
    q = Query(Objective(SELTERM, frozenset({"t"})), INF, Config("q_init", 1), inst.theta)
    return m, q


def gen_sqrt_sum_bounded(inst: SqrtSumInstance, bound: Optional[int] = None) -> Tuple[OcMdp, int, Query]:
    """The gadget with a finite counter bound (default: :attr:`SqrtSumInstance.bound`).

    When ``sum(sqrt(x_i)) == y`` no finite bound separates the instance; the
    generator still emits it.
    """
    B = inst.bound if bound is None else bound
    m = _gadget(inst)
    q = Query(Objective(SELTERM, frozenset({"t"})), B, Config("q_init", 1), inst.theta)
    return m, B, q


def sqrt_sum_error_bound(inst: SqrtSumInstance, bound: int) -> float:
    m = inst.m
    return (m / (m + 1)) ** (bound - 1)


def counter_oblivious_gadget_strategy(m: OcMdp, bound) -> IntervalStrategy:
    from .strategies import counter_oblivious

    return counter_oblivious({q: dirac(m.enabled[q][0]) for q in m.states}, bound)


@dataclass(frozen=True)
class DirectedGraph:
    vertices: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    initial: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(sorted(set(self.edges))))
        if self.initial not in self.vertices:
            raise ModelError("initial vertex not in graph")
        vs = set(self.vertices)
        for u, v in self.edges:
            if u not in vs or v not in vs:
                raise ModelError(f"edge ({u},{v}) has an unknown endpoint")


def has_hamiltonian_cycle(g: DirectedGraph) -> bool:
    """Brute force over vertex orders starting at the initial vertex."""
    es = set(g.edges)
    rest = [v for v in g.vertices if v != g.initial]
    for perm in itertools.permutations(rest):
        cyc = (g.initial,) + perm + (g.initial,)
        if all((cyc[i], cyc[i + 1]) in es for i in range(len(cyc) - 1)):
            return True
    return False


INIT_COPY = "v_init'"
SINK = "q_sink"


def gen_hamiltonian(g: DirectedGraph) -> Tuple[OcMdp, int, Query]:
    """OC-MDP where almost-sure selective termination from ``(v_init, |V|)``
    under a counter-oblivious strategy means a Hamiltonian cycle exists.

    Edges into ``v_init`` are redirected to a copy that moves to an
    absorbing sink; every move costs one unit.  Vertices without outgoing
    edges get a move to the sink so that the model has no deadlock.
    """
    tr: Dict[Tuple[str, str], Tuple[int, Dict[str, object]]] = {}
    for v in g.vertices:
        outs = [w for (u, w) in g.edges if u == v]
        for w in outs:
            tgt = INIT_COPY if w == g.initial else w
            tr[(v, w)] = (-1, {tgt: Fraction(1)})
        if not outs:
            tr[(v, SINK)] = (-1, {SINK: Fraction(1)})
    tr[(INIT_COPY, "a")] = (-1, {SINK: Fraction(1)})
    tr[(SINK, "a")] = (-1, {SINK: Fraction(1)})
    m = OcMdp.build(tr, states=list(g.vertices) + [INIT_COPY, SINK])
    B = len(g.vertices) + 1
    q = Query(Objective(SELTERM, frozenset({INIT_COPY})), B, Config(g.initial, len(g.vertices)), Fraction(1))
    return m, B, q


def all_digraphs(n: int) -> List[DirectedGraph]:
    """Every digraph on ``n`` labelled vertices (self-loops allowed), initial ``v0``."""
    vs = tuple(f"v{i}" for i in range(n))
    pairs = [(u, v) for u in vs for v in vs]
    out = []
    for mask in range(2 ** len(pairs)):
        es = tuple(p for i, p in enumerate(pairs) if mask >> i & 1)
        out.append(DirectedGraph(vs, es, vs[0]))
    return out


@dataclass
class Example:
    """A catalogued model with a query, a strategy and notes."""

    model: OcMdp
    query: Query
    strategy: IntervalStrategy
    strategies: Dict[str, IntervalStrategy] = field(default_factory=dict)
    note: str = ""


def _fig1() -> Example:
    m = OcMdp.build(
        {
            ("q0", "a"): (1, {"q0": Fraction(1, 2), "q1": Fraction(1, 2)}),
            ("q1", "a"): (-1, {"q1": Fraction(1)}),
            ("q1", "b"): (-1, {"q2": Fraction(1)}),
            ("q2", "a"): (0, {"q2": Fraction(1)}),
        }
    )
    p = partition((1, 1), (2, INF))
    s = oeis(
        p,
        [
            {"q0": dirac("a"), "q1": dirac("b"), "q2": dirac("a")},
            {"q0": dirac("a"), "q1": dirac("a"), "q2": dirac("a")},
        ],
    )
    q = Query(Objective(SELTERM, frozenset({"q2"})), INF, Config("q0", 1), Fraction(1, 2))
    return Example(m, q, s, {"memory": s}, "b at counter 1, a above; memory must track the counter")


def _fig2a() -> Example:
    h = Fraction(1, 2)
    m = OcMdp.build(
        {
            ("q", "c"): (0, {"t'": Fraction(1)}),
            ("q", "a"): (1, {"q": h, "p": h}),
            ("p", "a"): (1, {"p": Fraction(1)}),
            ("p", "b"): (-1, {"t": h, "p": h}),
            ("t", "b"): (-1, {"t": Fraction(1)}),
            ("t'", "c"): (0, {"t'": Fraction(1)}),
        }
    )
    p = partition((1, 7), (8, INF))
    s = oeis(
        p,
        [
            {"q": dirac("a"), "p": dirac("a"), "t": dirac("b"), "t'": dirac("c")},
            {"q": dirac("c"), "p": {"a": h, "b": h}, "t": dirac("b"), "t'": dirac("c")},
        ],
    )
    q = Query(Objective(SELTERM, frozenset({"t"})), INF, Config("q", 1), Fraction(1, 2))
    return Example(m, q, s, {"compression": s}, "climb to 8 in [1,7], then randomise in p")


def _fig4() -> Example:
    m = OcMdp.build(
        {
            ("q", "a"): (-1, {"q": Fraction(1, 2), "t_top": Fraction(1, 2)}),
            ("q", "b"): (-1, {"t_bot": Fraction(1, 4), "t_top": Fraction(3, 4)}),
            ("t_top", "a"): (-1, {"t_top": Fraction(1)}),
            ("t_bot", "a"): (-1, {"t_bot": Fraction(1)}),
        }
    )
    p = partition((1, 2))
    fixed = {"t_top": dirac("a"), "t_bot": dirac("a")}
    pure_a = oeis(p, [{"q": dirac("a"), **fixed}])
    pure_b = oeis(p, [{"q": dirac("b"), **fixed}])
    uniform = oeis(p, [{"q": {"a": Fraction(1, 2), "b": Fraction(1, 2)}, **fixed}])
    split = oeis(partition((1, 1), (2, 2)), [{"q": dirac("b"), **fixed}, {"q": dirac("a"), **fixed}])
    q = Query(Objective(SELTERM, frozenset({"t_top"})), 3, Config("q", 2), Fraction(25, 32))
    return Example(
        m,
        q,
        uniform,
        {"pure_a": pure_a, "pure_b": pure_b, "uniform": uniform, "split": split},
        "pure counter-oblivious 3/4, uniform 25/32, counter-aware 7/8",
    )


def paper_examples() -> Dict[str, Example]:
    return {"fig1": _fig1(), "fig2a": _fig2a(), "fig4": _fig4()}


# --- random instances ---------------------------------------------------------


def _rand_dist(rng: random.Random, support: Sequence[str], denom: int = 6) -> Dict[str, Fraction]:
    k = rng.randint(1, len(support))
    chosen = rng.sample(list(support), k)
    cuts = sorted(rng.randint(1, denom - 1) for _ in range(k - 1)) if denom > 1 else []
    pts = [0] + cuts + [denom]
    out: Dict[str, Fraction] = {}
    for s, a, b in zip(chosen, pts, pts[1:]):
        if b > a:
            out[s] = out.get(s, 0) + Fraction(b - a, denom)
    if not out:
        out[chosen[0]] = Fraction(1)
    return out


def random_model(
    rng: random.Random,
    n_states: int = 3,
    n_actions: int = 2,
    weights: Sequence[int] = (-1, 0, 1),
    denom: int = 6,
) -> OcMdp:
    """A random deadlock-free OC-MDP with states ``s0..`` and actions ``a0..``."""
    states = [f"s{i}" for i in range(n_states)]
    acts = [f"a{i}" for i in range(n_actions)]
    tr = {}
    for q in states:
        for a in rng.sample(acts, rng.randint(1, n_actions)):
            tr[(q, a)] = (rng.choice(list(weights)), _rand_dist(rng, states, denom))
    return OcMdp.build(tr, states=states)


def random_row(rng: random.Random, m: OcMdp, pure: bool = False, denom: int = 4) -> Dict[str, Dict[str, Fraction]]:
    row = {}
    for q in m.states:
        acts = list(m.enabled[q])
        if pure:
            row[q] = dirac(rng.choice(acts))
        else:
            row[q] = _rand_dist(rng, acts, denom)
    return row


def random_oeis(
    rng: random.Random,
    m: OcMdp,
    bound,
    max_intervals: int = 3,
    pure: bool = False,
) -> IntervalStrategy:
    """A random OEIS over at most ``max_intervals`` intervals of ``[1, B-1]``."""
    from .partitions import Interval

    if bound == 1:
        return oeis(IntervalPartition(()), [])
    if bound == INF:
        cuts = sorted(rng.sample(range(2, 12), rng.randint(0, max_intervals - 1)))
        pts = [1] + cuts
        ivs = [Interval(a, b - 1) for a, b in zip(pts, pts[1:])] + [Interval(pts[-1], INF)]
    else:
        top = int(bound) - 1
        k = min(rng.randint(1, max_intervals), top)
        cuts = sorted(rng.sample(range(2, top + 1), k - 1))
        pts = [1] + cuts + [top + 1]
        ivs = [Interval(a, b - 1) for a, b in zip(pts, pts[1:])]
    p = IntervalPartition(tuple(ivs))
    return oeis(p, [random_row(rng, m, pure) for _ in ivs])


def random_cis(rng: random.Random, m: OcMdp, rho: int, rows: Optional[List] = None) -> IntervalStrategy:
    from .partitions import Interval

    k = rng.randint(1, rho)
    cuts = sorted(rng.sample(range(2, rho + 1), k - 1))
    pts = [1] + cuts + [rho + 1]
    window = IntervalPartition(tuple(Interval(a, b - 1) for a, b in zip(pts, pts[1:])))
    table = rows if rows is not None else [random_row(rng, m) for _ in window]
    return cis(PeriodicPartition(rho, window), table)
