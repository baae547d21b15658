"""SMT-LIB emission for verification and realisability sentences.

Formulas are kept structurally (:class:`SmtProblem`) and rendered to
SMT-LIB v2 text on demand, so that an in-house evaluator can check a
candidate model against exactly the constraints that get emitted.  Running
an external solver is optional and goes through a plain subprocess.
"""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .compression import (
    BOT,
    SYMBOLIC,
    CompressedChain,
    _compress_steps,
    cis_init_node,
    cis_second_partition,
    compress,
    node_name,
    prepare_partition,
)
from .eqsys import (
    PolySystem,
    Poly,
    Sym,
    Var,
    as_poly,
    build_reach_system,
    fold,
    padd,
    peval,
    qual_from_supports,
    step_from_chain,
    y_var,
)
from .model import INF, REACH, ModelError, OcMdp, OneCounterChain, Query, absorb_targets, is_inf
from .partitions import IntervalPartition, PeriodicPartition, isolate, refine, refine_partition
from .strategies import OEIS, IntervalStrategy, cis, oeis

# --- structured formulas ------------------------------------------------------

# A constraint is (lhs, op, rhs) with polynomial sides; op in {=, <=, >=, <, >}.
Constraint = Tuple[Poly, str, Poly]

_OPS = {
    "=": lambda a, b: a == b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


def smt_name(v: Var) -> str:
    parts = []
    for x in v:
        if isinstance(x, tuple):
            parts.append(node_name(x) if len(x) == 2 and not isinstance(x[0], tuple) else smt_name(x))
        elif x == BOT:
            parts.append(BOT)
        else:
            parts.append(str(x))
    return "_".join(parts)


def _sym(v: Var) -> str:
    name = smt_name(v)
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_@.'+\-]*", name) and "'" not in name:
        return name
    return "|" + name.replace("|", "!").replace("\\", "/") + "|"


def _num(c: Fraction) -> str:
    c = Fraction(c)
    if c < 0:
        return f"(- {_num(-c)})"
    if c.denominator == 1:
        return f"{c.numerator}.0"
    return f"(/ {c.numerator}.0 {c.denominator}.0)"


def _term(p: Poly) -> str:
    if not p:
        return "0.0"
    terms = []
    for mono, c in sorted(p.items(), key=lambda kv: (len(kv[0]), repr(kv[0]))):
        factors = [_sym(v) for v in mono]
        if c != 1 or not factors:
            factors.insert(0, _num(c))
        terms.append(factors[0] if len(factors) == 1 else "(* " + " ".join(factors) + ")")
    return terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"


def _constraint(c: Constraint) -> str:
    lhs, op, rhs = c
    return f"({op} {_term(lhs)} {_term(rhs)})"


def _conj(cs: Sequence[Constraint]) -> str:
    if not cs:
        return "true"
    if len(cs) == 1:
        return _constraint(cs[0])
    return "(and " + " ".join(_constraint(c) for c in cs) + ")"


def _v(v: Var) -> Poly:
    return {(v,): Fraction(1)}


def _c(x) -> Poly:
    x = Fraction(x)
    return {(): x} if x else {}


@dataclass
class SmtProblem:
    """Constraint blocks of a sentence.

    ``outer`` variables are existential.  ``inner`` variables are
    universally quantified in the ``forall`` form, with
    ``premise => goal``; in the flat form every variable is existential and
    all blocks are conjoined (``goal`` negated when ``negated``).
    """

    outer: List[Var] = field(default_factory=list)
    inner: List[Var] = field(default_factory=list)
    strat: List[Constraint] = field(default_factory=list)
    premise: List[Constraint] = field(default_factory=list)
    goal: Optional[Constraint] = None
    init: Optional[Var] = None
    theta: Fraction = Fraction(0)
    comment: str = ""
    xsys: Optional[PolySystem] = None
    refined: Optional[IntervalPartition] = None
    ysys: Optional[PolySystem] = None

    def _negated_goal(self) -> Constraint:
        lhs, op, rhs = self.goal
        flip = {">=": "<", ">": "<=", "<=": ">", "<": ">=", "=": "distinct"}
        return (lhs, flip[op], rhs)

    def render(self, negated: bool = False, quantified: bool = False) -> str:
        """SMT-LIB text.

        ``negated``: existential check of a counterexample (unsat means the
        universal property holds).  ``quantified``: keep ``inner`` under a
        ``forall`` (needed for the realisability form with free supports).
        """
        out = []
        if self.comment:
            out += [f"; {ln}" for ln in self.comment.splitlines()]
        out.append("(set-logic NRA)" if quantified else "(set-logic QF_NRA)")
        if quantified:
            for v in self.outer:
                out.append(f"(declare-const {_sym(v)} Real)")
            for c in self.strat:
                out.append(f"(assert {_constraint(c)})")
            binders = " ".join(f"({_sym(v)} Real)" for v in self.inner)
            body = f"(=> {_conj(self.premise)} {_constraint(self.goal)})"
            out.append(f"(assert (forall ({binders}) {body}))" if binders else f"(assert {body})")
        else:
            for v in self.outer + self.inner:
                out.append(f"(declare-const {_sym(v)} Real)")
            for c in self.strat + self.premise:
                out.append(f"(assert {_constraint(c)})")
            goal = self._negated_goal() if negated else self.goal
            if goal[1] == "distinct":
                out.append(f"(assert (not (= {_term(goal[0])} {_term(goal[2])})))")
            else:
                out.append(f"(assert {_constraint(goal)})")
        out.append("(check-sat)")
        out.append("(get-model)")
        return "\n".join(out) + "\n"

    def assignment(self, z_values: Mapping[Var, object]) -> Dict[Var, object]:
        """Exact values of all variables once the strategy variables are fixed.

        Only for uniquely pinned bounded systems (solved stage by stage).
        """
        from .solvers import solve_linear, solve_staged

        val: Dict[Var, object] = dict(z_values)
        val.update(solve_staged(self.xsys, known=val).values)
        val.update(solve_linear(self.ysys, known=val).values)
        return val

    def variables(self) -> List[Var]:
        return self.outer + self.inner

    def evaluate(self, val: Mapping[Var, object], negated: bool = False) -> Tuple[bool, List[str]]:
        """Check the flat form of the sentence under ``val`` exactly."""
        failed = []
        goal = self._negated_goal() if negated else self.goal
        for c in self.strat + self.premise + ([goal] if goal else []):
            lhs = peval(c[0], val)
            rhs = peval(c[2], val)
            ok = lhs != rhs if c[1] == "distinct" else _OPS[c[1]](lhs, rhs)
            if not ok:
                failed.append(_constraint(c))
        return not failed, failed


# --- building blocks ----------------------------------------------------------


def _trans_block(chain: CompressedChain) -> Tuple[List[Var], List[Constraint]]:
    sys = chain.system
    vs = list(sys.equations)
    cs: List[Constraint] = []
    for v in vs:
        cs.append((_v(v), ">=", {}))
        if v in sys.pins:
            cs.append((_v(v), "=", {}))
        else:
            cs.append((_v(v), "=", sys.equations[v]))
    for s in chain.states:
        if chain.absorbing(s):
            continue
        row = [p for t, p in chain.trans[s].items() if t != BOT]
        if row:
            total: Poly = {}
            for p in row:
                total = padd(total, p)
            cs.append((total, "<=", _c(1)))
    return vs, cs


def _obj_block(chain: CompressedChain, goal: Iterable, pin: bool) -> Tuple[List[Var], List[Constraint], PolySystem]:
    gset = set(goal)
    trans = {s: row for s, row in chain.trans.items() if not chain.absorbing(s) or s in gset}
    for s in chain.states:
        if chain.absorbing(s) and s not in gset:
            trans[s] = {}
    sys = build_reach_system(trans, gset, pin=pin)
    vs = list(sys.equations)
    cs: List[Constraint] = []
    for v in vs:
        cs.append((_v(v), ">=", {}))
        cs.append((_v(v), "=", {} if v in sys.pins else sys.equations[v]))
    return vs, cs, sys


def _goal_constraint(init_var: Optional[Var], init_const: Optional[Fraction], theta: Fraction) -> Constraint:
    lhs = _v(init_var) if init_var is not None else _c(init_const)
    return (lhs, ">=", _c(theta))


def _init_value(q0, k, kind, targets, goal, sys: PolySystem, node) -> Tuple[Optional[Var], Optional[Fraction]]:
    """Variable (or constant) holding the probability from the initial node."""
    if kind == REACH and q0 in targets:
        return None, Fraction(1)
    gset = set(goal)
    if node in gset:
        return None, Fraction(1)
    v = y_var(node)
    if v not in sys.equations:
        return None, Fraction(0)
    return v, None


def z_var(j: int, q: str, a: str) -> Var:
    return ("z", f"j{j}", q, a)


def symbolic_table(m: OcMdp, p: IntervalPartition) -> List[Dict[str, Dict[str, object]]]:
    return [{q: {a: Sym(z_var(j, q, a)) for a in m.enabled[q]} for q in m.states} for j in range(len(p))]


def _strat_block(
    m: OcMdp,
    refined: IntervalPartition,
    rep: Sequence[int],
    supports: Optional[Mapping[Tuple[str, int], Set[str]]] = None,
) -> Tuple[List[Var], List[Constraint]]:
    """Distribution constraints on ``z`` plus equality with the representative."""
    vs: List[Var] = []
    cs: List[Constraint] = []
    for j in range(len(refined)):
        for q in m.states:
            acts = m.enabled[q]
            if len(acts) == 1:
                continue
            total: Poly = {}
            for a in acts:
                z = z_var(j, q, a)
                vs.append(z)
                total = padd(total, _v(z))
                if supports is not None:
                    if a in supports[(q, rep[j])]:
                        cs.append((_v(z), ">", {}))
                    else:
                        cs.append((_v(z), "=", {}))
                else:
                    cs.append((_v(z), ">=", {}))
                if rep[j] != j:
                    cs.append((_v(z), "=", _v(z_var(rep[j], q, a))))
            cs.append((total, "=", _c(1)))
    return vs, cs


def _refined_with_rep(p: IntervalPartition, k: int) -> Tuple[IntervalPartition, List[int]]:
    """Refined partition plus, per refined interval, the index of the first
    refined interval of the same input interval (the representative)."""
    iso = isolate(p, k) if k >= 1 else p
    out = []
    rep: List[int] = []
    for iv in p.intervals:
        first = len(out)
        for piece in iso.intervals:
            if piece.lo >= iv.lo and piece.hi <= iv.hi:
                for r in refine(piece):
                    out.append(r)
                    rep.append(first)
    return IntervalPartition(tuple(out)), rep


# --- verification --------------------------------------------------------------


def verification_problem(m: OcMdp, s: IntervalStrategy, q: Query, symbolic: bool = False) -> SmtProblem:
    """Sentence saying that every solution of the transition and objective
    systems gives probability at least theta from the initial configuration.

    With ``symbolic`` the strategy entries stay variables constrained to the
    given values (useful for inspecting the structure); otherwise they are
    substituted as constants.
    """
    q.check_against(m)
    kind = q.objective.kind
    targets = set(q.objective.targets)
    mm = absorb_targets(m, targets) if kind == REACH else m
    q0, k = q.init
    prob = SmtProblem(theta=q.threshold)
    prob.comment = f"verification: {kind} {sorted(targets)} from ({q0},{k}) >= {q.threshold}"
    if s.kind == OEIS:
        p = prepare_partition(s.partition, k)
        B = q.bound
        if symbolic:
            table = symbolic_table(mm, p)
            zs: List[Var] = []
            for j, iv in enumerate(p.intervals):
                row = s.row_at(iv.lo)
                for qq in mm.states:
                    if len(mm.enabled[qq]) == 1:
                        table[j][qq] = {mm.enabled[qq][0]: Fraction(1)}
                        continue
                    for a in mm.enabled[qq]:
                        z = z_var(j, qq, a)
                        zs.append(z)
                        prob.strat.append((_v(z), "=", _c(row.get(qq, {}).get(a, 0))))
            strat = oeis(p, table)
            prob.outer = zs
        else:
            strat = s
        chain = compress(mm, strat, p, B, mode=SYMBOLIC)
        goal = [(t, 0) for t in targets]
        if kind == REACH and not is_inf(B):
            goal += [(t, int(B)) for t in targets]
        init = (q0, k)
    else:
        chain, goal, init = _cis_symbolic(mm, s, k, q0, targets)
    xs, tcs = _trans_block(chain)
    tcs += _window_rows(chain)
    ys, ocs, ysys = _obj_block(chain, goal, pin=False)
    prob.inner = xs + ys
    prob.premise = tcs + ocs
    iv, ic = _init_value(q0, k, kind, targets, goal, ysys, init)
    prob.goal = _goal_constraint(iv, ic, q.threshold)
    prob.init = iv
    prob.xsys, prob.ysys = chain.system, ysys
    return prob


def _cis_symbolic(m: OcMdp, s: IntervalStrategy, k: int, q0: str, targets) -> Tuple[CompressedChain, List, object]:
    rho = s.period
    J = refine_partition(isolate(s.partition, k % rho)) if k % rho else refine_partition(s.partition)
    steps = [fold(m, s.row_at(iv.lo)) for iv in J.intervals]
    inner = _compress_steps(m.states, J, rho + 1, steps, SYMBOLIC, None, scope_prefix="w")
    oc = _symbolic_ocmc(inner, rho)
    K = cis_second_partition(k, rho)
    step = step_from_chain(oc)
    outer = _compress_steps(oc.states, K, INF, [step] * len(K), SYMBOLIC, None, scope_prefix="o")
    outer.system.update(inner.system)
    # the window rows must be sub-distributions too
    outer.side_rows = [inner.trans[x] for x in inner.states if not inner.absorbing(x)]
    node, out_k = cis_init_node(q0, k, rho)
    goal = [((t, rho), 0) for t in targets]
    return outer, goal, (node, out_k)


def _symbolic_ocmc(inner: CompressedChain, rho: int) -> OneCounterChain:
    states = [x for x in inner.states if x == BOT or 1 <= x[1] <= rho]
    trans: Dict = {BOT: {(BOT, 0): {(): Fraction(1)}}}
    for x in states:
        if x == BOT:
            continue
        row: Dict = {}
        for y, pr in inner.trans[x].items():
            if y == BOT:
                continue
            if y[1] == 0:
                key = ((y[0], rho), -1)
            elif y[1] == rho + 1:
                key = ((y[0], 1), 1)
            else:
                key = (y, 0)
            row[key] = padd(row.get(key, {}), as_poly(pr))
        trans[x] = row
    return OneCounterChain(tuple(states), trans)


# --- realisability --------------------------------------------------------------


def realisability_problem(
    m: OcMdp,
    q: Query,
    base,
    supports: Optional[Mapping[Tuple[str, int], Set[str]]] = None,
) -> SmtProblem:
    """Sentence asking for an interval strategy based on ``base`` meeting theta.

    ``base`` is an :class:`IntervalPartition` (OEIS) or a
    :class:`PeriodicPartition` (CIS).  With ``supports`` (bounded OEIS
    only) zero variables are pinned according to the supports, which makes
    all systems uniquely solvable and the sentence purely existential.
    Without supports the transition and objective variables are universal.
    """
    q.check_against(m)
    kind = q.objective.kind
    targets = set(q.objective.targets)
    mm = absorb_targets(m, targets) if kind == REACH else m
    q0, k = q.init
    prob = SmtProblem(theta=q.threshold)
    if isinstance(base, PeriodicPartition):
        if supports is not None:
            raise ModelError("support pinning is only implemented for open-ended strategies")
        rho = base.period
        Jraw = base.window
        J, rep = _refined_with_rep(Jraw, k % rho)
        table = symbolic_table(mm, J)
        s = cis(PeriodicPartition(rho, J), table)
        zs, scs = _strat_block(mm, J, rep)
        prob.refined = J
        chain, goal, init = _cis_symbolic(mm, s, k, q0, targets)
        prob.comment = f"cyclic realisability: period {rho}, window {Jraw}"
    else:
        if base.bound != q.bound:
            raise ModelError(f"partition {base} does not cover [1, {q.bound}-1]")
        p, rep = _refined_with_rep(base, k)
        table = symbolic_table(mm, p)
        s = oeis(p, table)
        zs, scs = _strat_block(mm, p, rep, supports)
        prob.refined = p
        sup_list = None
        if supports is not None:
            sup_list = []
            for j, iv in enumerate(p.intervals):
                row = {qq: supports[(qq, rep[j])] for qq in mm.states}
                if iv.bounded:
                    sup_list.append(qual_from_supports(mm, row))
                else:
                    sup_list.append({z_var(j, qq, a) for qq in mm.states for a in row[qq]})
        chain = compress(mm, s, p, q.bound, mode=SYMBOLIC, supports=sup_list)
        goal = [(t, 0) for t in targets]
        if kind == REACH and not is_inf(q.bound):
            goal += [(t, int(q.bound)) for t in targets]
        init = (q0, k)
        prob.comment = f"realisability over {base}" + (" with fixed supports" if supports else "")
    xs, tcs = _trans_block(chain)
    tcs += _window_rows(chain)
    pinned = supports is not None
    ys, ocs, ysys = _obj_block(chain, goal, pin=pinned)
    prob.outer = zs
    prob.strat = scs
    prob.inner = xs + ys
    prob.premise = tcs + ocs
    iv, ic = _init_value(q0, k, kind, targets, goal, ysys, init)
    prob.goal = _goal_constraint(iv, ic, q.threshold)
    prob.init = iv
    prob.xsys, prob.ysys = chain.system, ysys
    return prob


def _window_rows(chain: CompressedChain) -> List[Constraint]:
    cs = []
    for row in chain.side_rows:
        total: Poly = {}
        for t, p in row.items():
            if t != BOT:
                total = padd(total, p)
        if total:
            cs.append((total, "<=", _c(1)))
    return cs


# --- external solver -------------------------------------------------------------


@dataclass
class SolverAnswer:
    status: str  # sat | unsat | unknown | error
    model: Dict[str, Fraction] = field(default_factory=dict)
    output: str = ""


_DEFINE = re.compile(r"\(define-fun\s+(\|[^|]*\||\S+)\s+\(\)\s+Real\s+")


def _parse_value(text: str) -> Optional[Fraction]:
    text = text.strip()
    toks = text.replace("(", " ( ").replace(")", " ) ").split()

    def parse(i):
        t = toks[i]
        if t == "(":
            op = toks[i + 1]
            args = []
            j = i + 2
            while toks[j] != ")":
                v, j = parse(j)
                args.append(v)
            j += 1
            if op == "/":
                return args[0] / args[1], j
            if op == "-":
                return (-args[0] if len(args) == 1 else args[0] - args[1]), j
            if op == "+":
                return sum(args, Fraction(0)), j
            if op == "*":
                r = Fraction(1)
                for a in args:
                    r *= a
                return r, j
            raise ValueError(op)
        return Fraction(t), i + 1

    try:
        v, _ = parse(0)
        return v
    except (ValueError, IndexError, ZeroDivisionError):
        return None


def parse_model(text: str) -> Dict[str, Fraction]:
    """Values of real constants in a ``(get-model)`` response."""
    out: Dict[str, Fraction] = {}
    for mt in _DEFINE.finditer(text):
        name = mt.group(1).strip("|")
        depth = 0
        i = mt.end()
        start = i
        while i < len(text):
            ch = text[i]
            if ch == "(":
                depth += 1
            elif ch == ")":
                if depth == 0:
                    break
                depth -= 1
            i += 1
        v = _parse_value(text[start:i])
        if v is not None:
            out[name] = v
    return out


def run_solver(script: str, cmd: str, timeout: float = 60.0) -> SolverAnswer:
    """Pipe ``script`` into ``cmd`` and parse its answer."""
    try:
        proc = subprocess.run(
            shlex.split(cmd), input=script, capture_output=True, text=True, timeout=timeout
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        return SolverAnswer("error", output=str(exc))
    out = proc.stdout
    first = out.strip().split("\n", 1)[0].strip() if out.strip() else ""
    if first in ("sat", "unsat", "unknown"):
        model = parse_model(out) if first == "sat" else {}
        return SolverAnswer(first, model, out)
    return SolverAnswer("error", output=out + proc.stderr)
