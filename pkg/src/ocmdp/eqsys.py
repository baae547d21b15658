"""Polynomial equation systems for compressed-chain transition probabilities.

Three families are built here:

* the termination system of an unbounded interval, one variable
  ``("term", scope, q, p)`` per pair of states, whose least solution gives
  the probability of first decreasing the counter by one, ending in ``p``;
* the bounded-interval system of an interval of size ``2^beta - 1``, with
  variables ``(dir, scope, alpha, q, j, p)`` where ``dir`` is ``"up"`` or
  ``"down"``, ``alpha`` is the level and ``j`` in {1, 2, 3} the source
  counter in units of ``2^(alpha-1)`` (level 0 only uses ``j = 1``);
* linear reachability systems over compressed chains, variables
  ``("y", s)``.

Coefficients are polynomials (:data:`Poly`) so the same builders serve
concrete strategies, where every coefficient is a constant, and symbolic
ones, where strategy probabilities are variables ``("z", scope, q, a)``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import (
    Callable,
    Dict,
    Hashable,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Set,
    Tuple,
)

from .model import ModelError, OcMdp, OneCounterChain, can_reach, effective_row

Var = Tuple
Mono = Tuple[Var, ...]
Poly = Dict[Mono, Fraction]
Step = Dict[Hashable, Dict[Tuple[Hashable, int], Poly]]


class Sym(NamedTuple):
    """A symbolic coefficient standing for the variable ``name``."""

    name: Var


# --- polynomial helpers -------------------------------------------------------


def _mono(vars_: Iterable[Var]) -> Mono:
    return tuple(sorted(vars_, key=repr))


def const(c) -> Poly:
    c = Fraction(c)
    return {(): c} if c else {}


def var(v: Var) -> Poly:
    return {(v,): Fraction(1)}


def as_poly(x) -> Poly:
    if isinstance(x, dict):
        return x
    if isinstance(x, Sym):
        return var(x.name)
    return const(x)


def padd(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, 0) + c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def pmul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = _mono(m1 + m2)
            v = out.get(m, 0) + c1 * c2
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def bilinear(pairs: Iterable[Tuple[Var, Var]]) -> Poly:
    """``sum x*y`` over variable pairs; a fast path for the quadratic blocks."""
    out: Poly = {}
    for a, b in pairs:
        m = _mono((a, b))
        out[m] = out.get(m, 0) + 1
    return {m: Fraction(c) for m, c in out.items()}


def psum(polys: Iterable[Poly]) -> Poly:
    out: Poly = {}
    for p in polys:
        out = padd(out, p)
    return out


def pvars(p: Poly) -> Set[Var]:
    return {v for m in p for v in m}


def peval(p: Poly, val: Mapping[Var, object], zero=Fraction(0)):
    total = zero
    for m, c in p.items():
        t = c if not isinstance(zero, float) else float(c)
        for v in m:
            t = t * val[v]
        total = total + t
    return total


def pdegree(p: Poly, skip: Callable[[Var], bool] = lambda v: False) -> int:
    return max((sum(1 for v in m if not skip(v)) for m in p), default=0)


def pconst(p: Poly) -> Optional[Fraction]:
    """The value of a constant polynomial, else ``None``."""
    if not p:
        return Fraction(0)
    if len(p) == 1 and () in p:
        return p[()]
    return None


def fmt_var(v: Var) -> str:
    return "_".join(str(x) for x in v)


def fmt_poly(p: Poly) -> str:
    if not p:
        return "0"
    terms = []
    for m, c in sorted(p.items(), key=lambda kv: (len(kv[0]), repr(kv[0]))):
        parts = [] if c == 1 and m else [str(c)]
        parts += [fmt_var(v) for v in m]
        terms.append("*".join(parts))
    return " + ".join(terms)


# --- systems ------------------------------------------------------------------


def is_param(v: Var) -> bool:
    return v[0] == "z"


@dataclass
class PolySystem:
    """Equations ``v = poly`` plus variables pinned to zero.

    ``stage`` orders variables for staged solving, ``groups`` lists variable
    sets whose values are probabilities of disjoint events (so they sum to at
    most 1) and ``params`` are free variables (strategy probabilities or
    transition variables of an enclosing system).
    """

    equations: Dict[Var, Poly] = field(default_factory=dict)
    pins: Set[Var] = field(default_factory=set)
    stage: Dict[Var, int] = field(default_factory=dict)
    groups: List[List[Var]] = field(default_factory=list)

    @property
    def variables(self) -> List[Var]:
        return list(self.equations)

    @property
    def params(self) -> Set[Var]:
        own = set(self.equations)
        return {v for p in self.equations.values() for v in pvars(p) if v not in own}

    def degree(self) -> int:
        own = set(self.equations)
        return max((pdegree(p, lambda v: v not in own) for p in self.equations.values()), default=0)

    def is_linear(self) -> bool:
        return self.degree() <= 1

    def pinned(self) -> "PolySystem":
        """Copy in which pinned variables are replaced by 0 everywhere."""
        eqs: Dict[Var, Poly] = {}
        for v, p in self.equations.items():
            if v in self.pins:
                eqs[v] = {}
                continue
            eqs[v] = {m: c for m, c in p.items() if not any(u in self.pins for u in m)}
        return PolySystem(eqs, set(self.pins), dict(self.stage), [list(g) for g in self.groups])

    def residual(self, val: Mapping[Var, object]) -> float:
        worst = 0.0
        zero = 0.0
        for v, p in self.equations.items():
            worst = max(worst, abs(float(peval(p, val, zero)) - float(val[v])))
        return worst

    def update(self, other: "PolySystem") -> None:
        self.equations.update(other.equations)
        self.pins |= other.pins
        self.stage.update(other.stage)
        self.groups.extend(other.groups)

    def dump(self) -> str:
        lines = []
        for v, p in self.equations.items():
            if v in self.pins:
                lines.append(f"{fmt_var(v)} = 0  ; pinned")
            else:
                lines.append(f"{fmt_var(v)} = {fmt_poly(p)}")
        return "\n".join(lines) + ("\n" if lines else "")


# --- folding a strategy row into a one-counter step ---------------------------


def fold(m: OcMdp, row: Mapping[str, Mapping[str, object]]) -> Step:
    """``step[q][(p, u)] = sum over a with w(q,a)=u of row(q)(a) * delta(q,a)(p)``.

    Row entries may be numbers or :class:`Sym` placeholders.  This is the
    single place where strategy, transition function and weights combine.
    """
    step: Step = {}
    for q in m.states:
        out: Dict[Tuple[Hashable, int], Poly] = {}
        for a, pa in effective_row(m, q, row.get(q)).items():
            ppoly = as_poly(pa)
            if not ppoly:
                continue
            w = m.weight[(q, a)]
            for p, pp in m.delta[(q, a)].items():
                if not pp:
                    continue
                key = (p, w)
                out[key] = padd(out.get(key, {}), {mm: c * pp for mm, c in ppoly.items()})
        step[q] = {k: v for k, v in out.items() if v}
    return step


def step_from_chain(c: OneCounterChain) -> Step:
    step: Step = {}
    for q in c.states:
        row: Dict[Tuple[Hashable, int], Poly] = {}
        for (p, u), pr in c.trans[q].items():
            pp = as_poly(pr)
            if pp:
                row[(p, u)] = padd(row.get((p, u), {}), pp)
        step[q] = row
    return step


def qual_from_step(step: Step, positive_params: Optional[Set[Var]] = None) -> Set[Tuple[Hashable, Hashable, int]]:
    """Triples ``(q, p, u)`` whose step probability is positive.

    A polynomial coefficient is positive when one of its monomials has a
    positive coefficient and only positive parameters.
    """
    pos = positive_params or set()
    out = set()
    for q, row in step.items():
        for (p, u), poly in row.items():
            if any(c > 0 and all(v in pos for v in mono) for mono, c in poly.items()):
                out.add((q, p, u))
    return out


def qual_from_supports(m: OcMdp, supports: Mapping[str, Iterable[str]]) -> Set[Tuple[str, str, int]]:
    out = set()
    for q in m.states:
        acts = m.enabled[q] if len(m.enabled[q]) == 1 else supports.get(q, ())
        for a in acts:
            for p, pp in m.delta[(q, a)].items():
                if pp > 0:
                    out.add((q, p, m.weight[(q, a)]))
    return out


# --- termination system -------------------------------------------------------


def term_var(scope, q, p) -> Var:
    return ("term", scope, q, p)


def termination_system(step: Step, states, scope="") -> PolySystem:
    """``x_qp = P(q,p,-1) + sum_t P(q,t,0) x_tp + sum_t P(q,t,+1) sum_t' x_tt' x_t'p``."""
    states = list(states)
    sys = PolySystem()
    for q in states:
        row = step.get(q, {})
        for p in states:
            rhs = dict(row.get((p, -1), {}))
            for t in states:
                c0 = row.get((t, 0))
                if c0:
                    rhs = padd(rhs, pmul(c0, var(term_var(scope, t, p))))
                c1 = row.get((t, 1))
                if c1:
                    inner = bilinear((term_var(scope, t, t2), term_var(scope, t2, p)) for t2 in states)
                    rhs = padd(rhs, pmul(c1, inner))
            v = term_var(scope, q, p)
            sys.equations[v] = rhs
            sys.stage[v] = 0
        sys.groups.append([term_var(scope, q, p) for p in states])
    return sys


def build_termination_system(m: OcMdp, row, scope="") -> PolySystem:
    return termination_system(fold(m, row), m.states, scope)


# --- bounded-interval system --------------------------------------------------


def mid(alpha: int) -> int:
    """Source index of the variables giving compressed transitions at level alpha."""
    return 2 if alpha >= 1 else 1


def up_var(scope, alpha, q, j, p) -> Var:
    return ("up", scope, alpha, q, j, p)


def down_var(scope, alpha, q, j, p) -> Var:
    return ("down", scope, alpha, q, j, p)


def bounded_system(step: Step, states, beta: int, scope="") -> PolySystem:
    """Quadratic system for an interval normalised to ``[1, 2^beta - 1]``.

    At level ``alpha`` with ``h = 2^(alpha-1)``, ``up(alpha, q, j, p)`` is the
    probability of moving from ``(q, j*h)`` to ``(p, 4h)`` while the counter
    stays in ``[1, 4h-1]`` before; ``down`` targets ``(p, 0)``.  Level 0 has
    source counter 1 and targets counters 0 and 2.
    """
    if beta < 1:
        raise ModelError("bounded system needs beta >= 1")
    states = list(states)
    sys = PolySystem()

    def U(a, q, j, p):
        return var(up_var(scope, a, q, j, p))

    def D(a, q, j, p):
        return var(down_var(scope, a, q, j, p))

    for q in states:
        row = step.get(q, {})
        for p in states:
            for sign, name, Vf in ((1, "up", U), (-1, "down", D)):
                rhs = dict(row.get((p, sign), {}))
                for t in states:
                    c0 = row.get((t, 0))
                    if c0:
                        rhs = padd(rhs, pmul(c0, Vf(0, t, 1, p)))
                v = (name, scope, 0, q, 1, p)
                sys.equations[v] = rhs
                sys.stage[v] = 0

    for alpha in range(1, beta):
        pm = mid(alpha - 1)
        for q in states:
            for p in states:
                def lin(kind, j_to, tgt_kind):
                    src = up_var if kind == "up" else down_var
                    dst = up_var if tgt_kind == "up" else down_var
                    return bilinear((src(scope, alpha - 1, q, pm, t), dst(scope, alpha, t, j_to, p)) for t in states)

                eqs = {
                    up_var(scope, alpha, q, 1, p): lin("up", 2, "up"),
                    up_var(scope, alpha, q, 2, p): padd(lin("up", 3, "up"), lin("down", 1, "up")),
                    up_var(scope, alpha, q, 3, p): padd(lin("down", 2, "up"), U(alpha - 1, q, pm, p)),
                    down_var(scope, alpha, q, 3, p): lin("down", 2, "down"),
                    down_var(scope, alpha, q, 2, p): padd(lin("down", 1, "down"), lin("up", 3, "down")),
                    down_var(scope, alpha, q, 1, p): padd(lin("up", 2, "down"), D(alpha - 1, q, pm, p)),
                }
                for v, rhs in eqs.items():
                    sys.equations[v] = rhs
                    sys.stage[v] = alpha

    for alpha in range(beta):
        for q in states:
            for j in ((1,) if alpha == 0 else (1, 2, 3)):
                sys.groups.append(
                    [up_var(scope, alpha, q, j, p) for p in states]
                    + [down_var(scope, alpha, q, j, p) for p in states]
                )
    return sys


def build_bounded_system(m: OcMdp, row, interval, scope="") -> PolySystem:
    return bounded_system(fold(m, row), m.states, interval.beta, scope)


def bounded_pins(qual: Set[Tuple[Hashable, Hashable, int]], states, beta: int, scope="") -> Set[Var]:
    """Variables of the bounded system whose least value is zero.

    Level 0 reads positivity off the one-step support; level ``alpha`` builds
    the five-layer graph over ``Q x {0, h, 2h, 3h, 4h}`` whose edges are the
    level ``alpha-1`` transitions known positive, and checks reachability of
    the top and bottom layers.
    """
    states = list(states)
    pins: Set[Var] = set()
    zero_succ: Dict[Hashable, Set[Hashable]] = defaultdict(set)
    for (q, p, u) in qual:
        if u == 0:
            zero_succ[q].add(p)

    def closure(q):
        seen = {q}
        stack = [q]
        while stack:
            t = stack.pop()
            for t2 in zero_succ.get(t, ()):
                if t2 not in seen:
                    seen.add(t2)
                    stack.append(t2)
        return seen

    pos_up: Set[Tuple[Hashable, Hashable]] = set()
    pos_down: Set[Tuple[Hashable, Hashable]] = set()
    jump = defaultdict(set)
    for (q, p, u) in qual:
        if u:
            jump[(q, u)].add(p)
    for q in states:
        cl = closure(q)
        ups = {p for t in cl for p in jump.get((t, 1), ())}
        downs = {p for t in cl for p in jump.get((t, -1), ())}
        for p in states:
            if p in ups:
                pos_up.add((q, p))
            else:
                pins.add(up_var(scope, 0, q, 1, p))
            if p in downs:
                pos_down.add((q, p))
            else:
                pins.add(down_var(scope, 0, q, 1, p))

    for alpha in range(1, beta):
        succ_up = defaultdict(set)
        succ_down = defaultdict(set)
        for (q, p) in pos_up:
            succ_up[q].add(p)
        for (q, p) in pos_down:
            succ_down[q].add(p)
        new_up: Set[Tuple[Hashable, Hashable]] = set()
        new_down: Set[Tuple[Hashable, Hashable]] = set()
        for q in states:
            for j in (1, 2, 3):
                seen = {(q, j)}
                stack = [(q, j)]
                while stack:
                    t, k = stack.pop()
                    if k in (0, 4):
                        continue
                    for t2 in succ_up.get(t, ()):
                        if (t2, k + 1) not in seen:
                            seen.add((t2, k + 1))
                            stack.append((t2, k + 1))
                    for t2 in succ_down.get(t, ()):
                        if (t2, k - 1) not in seen:
                            seen.add((t2, k - 1))
                            stack.append((t2, k - 1))
                for p in states:
                    if (p, 4) in seen:
                        if j == 2:
                            new_up.add((q, p))
                    else:
                        pins.add(up_var(scope, alpha, q, j, p))
                    if (p, 0) in seen:
                        if j == 2:
                            new_down.add((q, p))
                    else:
                        pins.add(down_var(scope, alpha, q, j, p))
        pos_up, pos_down = new_up, new_down
    return pins


def refine_unique(sys: PolySystem, qual, states, beta: int, scope="") -> PolySystem:
    """Return a copy of the bounded system with its zero variables pinned."""
    out = PolySystem(dict(sys.equations), set(sys.pins), dict(sys.stage), [list(g) for g in sys.groups])
    out.pins |= bounded_pins(qual, states, beta, scope)
    return out


def zero_variables(sys: PolySystem, positive_params: Iterable[Var] = ()) -> Set[Var]:
    """Variables whose least solution value is zero, by derivability.

    A variable is positive as soon as one monomial of its right-hand side has
    a positive coefficient and only positive factors.
    """
    pos = set(positive_params)
    own = set(sys.equations)
    changed = True
    while changed:
        changed = False
        for v, p in sys.equations.items():
            if v in pos or v in sys.pins:
                continue
            for mono, c in p.items():
                if c > 0 and all(u in pos for u in mono):
                    pos.add(v)
                    changed = True
                    break
    return {v for v in own if v not in pos}


# --- reachability system over a chain -----------------------------------------


def y_var(s) -> Var:
    return ("y", s)


def build_reach_system(
    trans: Mapping[Hashable, Mapping[Hashable, object]],
    targets: Iterable[Hashable],
    pin: bool = True,
    positive: Callable[[object], bool] = None,
) -> PolySystem:
    """``y_s = sum_{s' not in T} x_ss' y_s' + sum_{s' in T} x_ss'``.

    Entries of ``trans`` may be numbers, polynomials or :class:`Sym`.  With
    ``pin`` the states that cannot reach ``T`` are pinned to zero, which
    makes the linear system uniquely solvable.  ``positive`` decides which
    entries count as edges; by default a number counts when positive and a
    symbolic entry always counts.
    """
    tset = set(targets)

    def default_pos(x) -> bool:
        p = as_poly(x)
        c = pconst(p)
        return c is None or c > 0

    positive = positive or default_pos
    sys = PolySystem()
    alive = can_reach(trans, tset, positive) if pin else set(trans) | tset
    for s, row in trans.items():
        if s in tset:
            continue
        v = y_var(s)
        rhs: Poly = {}
        for s2, x in row.items():
            xp = as_poly(x)
            if not xp:
                continue
            if s2 in tset:
                rhs = padd(rhs, xp)
            else:
                rhs = padd(rhs, pmul(xp, var(y_var(s2))))
        sys.equations[v] = rhs
        sys.stage[v] = 0
        if pin and s not in alive:
            sys.pins.add(v)
    return sys
