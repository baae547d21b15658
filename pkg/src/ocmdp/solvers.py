"""Numeric engines: exact linear solves, staged solves and least fixed points.

Least fixed points of the quadratic systems are approximated from below by
Kleene iteration in floating point with every iterate rounded down, so each
iterate stays below the least solution.  Upper bounds come from a vector
``y`` checked to satisfy ``f(y) <= y`` with rounding up (any such vector
dominates the least solution), combined with the constraint that
probabilities of disjoint events sum to at most 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from .eqsys import PolySystem, Step, Var, pconst, zero_variables
from .linalg import SingularSystem, solve_fixpoint

RATIONAL = "rational"
FLOAT = "float"

EXACT = "exact"
CONVERGED = "converged"
CAPPED = "capped"
CERTIFIED = "certified"
HEURISTIC = "heuristic"


class ConsistencyError(RuntimeError):
    """A system that should be uniquely solvable turned out singular."""


@dataclass(frozen=True)
class SolveConfig:
    mode: str = RATIONAL
    eps: float = 1e-12
    max_iters: int = 10**6
    newton: bool = False

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.mode not in (RATIONAL, FLOAT):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class Valuation:
    values: Dict[Var, object]
    status: str = EXACT
    residual: float = 0.0
    iterations: int = 0

    def __getitem__(self, v: Var):
        return self.values[v]

    def get(self, v: Var, default=0):
        return self.values.get(v, default)


# --- linear systems -----------------------------------------------------------


def _linear_rows(
    sys: PolySystem,
    unknowns: Iterable[Var],
    known: Mapping[Var, object],
    one,
) -> Dict[Var, Tuple[Dict[Var, object], object]]:
    unk = set(unknowns)
    rows = {}
    for v in unk:
        coefs: Dict[Var, object] = {}
        c0 = one * 0
        for mono, c in sys.equations[v].items():
            coef = one * c if isinstance(one, float) else c
            free = None
            dead = False
            for u in mono:
                if u in unk:
                    if free is not None:
                        raise ValueError(f"equation of {v!r} is not linear in its stage")
                    free = u
                elif u in sys.pins:
                    dead = True
                    break
                else:
                    coef = coef * known[u]
            if dead or not coef:
                continue
            if free is None:
                c0 = c0 + coef
            else:
                coefs[free] = coefs.get(free, 0) + coef
        rows[v] = (coefs, c0)
    return rows


def solve_linear(
    sys: PolySystem,
    cfg: SolveConfig = SolveConfig(),
    known: Optional[Mapping[Var, object]] = None,
    order: Optional[Sequence[Var]] = None,
) -> Valuation:
    """Solve a linear system whose zero variables are pinned.

    Free variables not defined by the system must be provided in ``known``.
    """
    one = Fraction(1) if cfg.mode == RATIONAL else 1.0
    known = dict(known or {})
    unknowns = [v for v in sys.equations if v not in sys.pins]
    rows = _linear_rows(sys, unknowns, known, one)
    seq = [v for v in order if v in rows] if order is not None else None
    try:
        sol = solve_fixpoint(rows, seq)
    except SingularSystem as exc:
        raise ConsistencyError(f"singular system despite pinning: {exc}") from exc
    values: Dict[Var, object] = {v: one * 0 for v in sys.pins if v in sys.equations}
    values.update(sol)
    return Valuation(values, EXACT if cfg.mode == RATIONAL else CONVERGED)


def solve_staged(
    sys: PolySystem,
    cfg: SolveConfig = SolveConfig(),
    known: Optional[Mapping[Var, object]] = None,
) -> Valuation:
    """Solve a uniquely pinned system stage by stage.

    Each stage must be linear once earlier stages are known; this is the
    shape of the bounded-interval systems after zero pinning.
    """
    one = Fraction(1) if cfg.mode == RATIONAL else 1.0
    vals: Dict[Var, object] = dict(known or {})
    out: Dict[Var, object] = {}
    for v in sys.pins:
        if v in sys.equations:
            out[v] = one * 0
    stages = sorted(set(sys.stage.get(v, 0) for v in sys.equations))
    for st in stages:
        unknowns = [v for v in sys.equations if sys.stage.get(v, 0) == st and v not in sys.pins]
        if not unknowns:
            continue
        rows = _linear_rows(sys, unknowns, vals, one)
        try:
            sol = solve_fixpoint(rows)
        except SingularSystem as exc:
            raise ConsistencyError(f"singular stage {st}: {exc}") from exc
        vals.update(sol)
        out.update(sol)
    return Valuation(out, EXACT if cfg.mode == RATIONAL else CONVERGED)


# --- float operators ----------------------------------------------------------


def _round(c: Fraction, up: bool) -> float:
    f = float(c)
    exact = Fraction(f)
    if up and exact < c:
        f = math.nextafter(f, math.inf)
    elif not up and exact > c:
        f = math.nextafter(f, -math.inf)
    return f


class _Operator:
    """A monotone quadratic map on a flat float vector."""

    n: int
    gamma: float

    def f(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def jac(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class _PolyOperator(_Operator):
    def __init__(self, sys: PolySystem, index: Dict[Var, int], known: Mapping[Var, object], up: bool):
        n = len(index)
        self.n = n
        c = np.zeros(n)
        lr, lc, lv = [], [], []
        qr, qi, qj, qv = [], [], [], []
        width = 1
        for v, i in index.items():
            terms = 0
            for mono, coef in sys.equations[v].items():
                val = Fraction(coef)
                free = []
                dead = False
                for u in mono:
                    if u in index:
                        free.append(index[u])
                    elif u in known:
                        val *= Fraction(known[u])
                    else:
                        dead = True
                        break
                if dead or not val:
                    continue
                fv = _round(val, up)
                terms += 1
                if not free:
                    c[i] += fv
                elif len(free) == 1:
                    lr.append(i)
                    lc.append(free[0])
                    lv.append(fv)
                elif len(free) == 2:
                    qr.append(i)
                    qi.append(free[0])
                    qj.append(free[1])
                    qv.append(fv)
                else:
                    raise ValueError("lfp supports degree <= 2 only")
            width = max(width, terms)
        self.c = c
        self.A = csr_matrix((lv, (lr, lc)), shape=(n, n))
        self.qi = np.array(qi, dtype=int)
        self.qj = np.array(qj, dtype=int)
        self.qr = np.array(qr, dtype=int)
        self.qv = np.array(qv)
        self.Q = csr_matrix((qv, (qr, list(range(len(qr))))), shape=(n, len(qr)))
        self.gamma = (width + 4) * 2.3e-16

    def f(self, x):
        return self.c + self.A @ x + self.Q @ (x[self.qi] * x[self.qj])

    def jac(self, x):
        J = self.A.toarray()
        if len(self.qr):
            np.add.at(J, (self.qr, self.qi), self.qv * x[self.qj])
            np.add.at(J, (self.qr, self.qj), self.qv * x[self.qi])
        return J


class _TermOperator(_Operator):
    """``X -> Dm + D0 X + Dp X X`` in matrix form, row-major flattened."""

    def __init__(self, Dm, D0, Dp, mask):
        self.k = Dm.shape[0]
        self.n = self.k * self.k
        self.Dm, self.D0, self.Dp = Dm, D0, Dp
        self.mask = mask.ravel()
        self.gamma = (3 * self.k + 6) * 2.3e-16

    def f(self, x):
        X = x.reshape(self.k, self.k)
        return (self.Dm + self.D0 @ X + self.Dp @ (X @ X)).ravel() * self.mask

    def jac(self, x):
        X = x.reshape(self.k, self.k)
        eye = np.eye(self.k)
        J = np.kron(self.D0 + self.Dp @ X, eye) + np.kron(self.Dp, X.T)
        return J * self.mask[:, None] * self.mask[None, :]


def _kleene(op: _Operator, x: np.ndarray, cfg: SolveConfig, budget: int) -> Tuple[np.ndarray, int, bool]:
    # the convergence test runs every few steps; it dominates the cost otherwise
    shrink = 1.0 - op.gamma
    it = 0
    while it < budget:
        prev = x
        for _ in range(min(16, budget - it)):
            prev = x
            x = op.f(x)
            x *= shrink
            np.maximum(x, prev, out=x)
            it += 1
        if not x.size or float((x - prev).max()) < cfg.eps:
            x[x < 1e-290] = 0.0
            return x, it, True
    x[x < 1e-290] = 0.0
    return x, it, False


def _newton(op: _Operator, active: np.ndarray, cfg: SolveConfig, limit: int = 200) -> Tuple[np.ndarray, int]:
    x = np.zeros(op.n)
    idx = np.nonzero(active)[0]
    if not len(idx):
        return x, 0
    it = 0
    for it in range(1, limit + 1):
        fx = op.f(x)
        J = op.jac(x)[np.ix_(idx, idx)]
        rhs = (fx - x)[idx]
        try:
            d = np.linalg.solve(np.eye(len(idx)) - J, rhs)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(d)):
            break
        nx = x.copy()
        nx[idx] = np.clip(x[idx] + d, 0.0, 1.0)
        change = np.max(np.abs(nx - x))
        x = nx
        if change < cfg.eps:
            break
    return x, it


def _iterate(op_lo: _Operator, active: np.ndarray, cfg: SolveConfig) -> Tuple[np.ndarray, str, int]:
    if cfg.newton:
        xn, its = _newton(op_lo, active, cfg)
        start = np.where(active, xn * (1.0 - 1e-10), 0.0)
        x, k, done = _kleene(op_lo, start, cfg, min(cfg.max_iters, 1000))
        return x, CONVERGED, its + k
    x, k, done = _kleene(op_lo, np.zeros(op_lo.n), cfg, cfg.max_iters)
    return x, (CONVERGED if done else CAPPED), k


def _prefixed(op_hi: _Operator, y: np.ndarray) -> bool:
    fy = op_hi.f(y) * (1.0 + op_hi.gamma) + 1e-300
    return bool(np.all(fy <= y))


def _spectral_estimate(J: np.ndarray, iters: int = 200) -> float:
    n = J.shape[0]
    if n == 0:
        return 0.0
    v = np.ones(n) / n
    lam = 0.0
    for _ in range(iters):
        w = J @ v
        s = float(np.max(np.abs(w)))
        if s == 0.0:
            return 0.0
        lam = s / float(np.max(np.abs(v)))
        v = w / s
    return lam


def _upper(
    op_lo: _Operator,
    op_hi: _Operator,
    lower: np.ndarray,
    active: np.ndarray,
    groups: Sequence[Sequence[int]],
) -> Tuple[np.ndarray, bool]:
    """An upper bound on the least fixed point and whether it is certified."""
    n = op_hi.n
    res = float(np.max(np.abs(op_lo.f(lower) - lower), initial=0.0))
    found: Optional[np.ndarray] = None
    dirs = [active.astype(float)]
    idx = np.nonzero(active)[0]
    if len(idx):
        try:
            J = op_hi.jac(lower)[np.ix_(idx, idx)]
            v = np.linalg.solve(np.eye(len(idx)) - J, np.ones(len(idx)))
            if np.all(np.isfinite(v)) and np.all(v > 0):
                d = np.zeros(n)
                d[idx] = v / np.max(v)
                dirs.insert(0, d)
        except np.linalg.LinAlgError:
            pass
    base = max(res, 1e-15)
    for d in dirs:
        for j in range(24):
            y = lower + d * base * (4.0**j)
            if _prefixed(op_hi, y):
                found = y
                break
        if found is not None:
            break
    certified = True
    bound = np.full(n, np.inf) if found is None else found.copy()
    if groups:
        gb = np.full(n, np.inf)
        for g in groups:
            g = list(g)
            tot = float(np.sum(lower[g]))
            for i in g:
                gb[i] = min(gb[i], (1.0 - (tot - lower[i])) * (1.0 + 4e-16 * len(g)) + 1e-300)
        bound = np.minimum(bound, gb)
    if not np.all(np.isfinite(bound[active])):
        certified = False
        idx_bad = np.nonzero(~np.isfinite(bound) & active)[0]
        if len(idx):
            lam = _spectral_estimate(op_hi.jac(lower)[np.ix_(idx, idx)])
            amp = 1.0 / (1.0 - lam) if lam < 1.0 else 1e12
        else:
            amp = 1.0
        bound[idx_bad] = lower[idx_bad] + max(res, 1e-12) * amp
    bound = np.where(active, np.maximum(bound, lower), 0.0)
    return np.minimum(bound, 1.0), certified


def _to_valuation(names: Sequence[Var], arr: np.ndarray, status: str, residual: float, its: int) -> Valuation:
    return Valuation({v: float(arr[i]) for i, v in enumerate(names)}, status, residual, its)


# --- least fixed points ------------------------------------------------------


def _compile(sys: PolySystem, known: Optional[Mapping[Var, object]]):
    known = dict(known or {})
    zeros = zero_variables(sys, positive_params=[v for v, x in known.items() if x > 0])
    names = list(sys.equations)
    index = {v: i for i, v in enumerate(names)}
    kn = dict(known)
    active = np.array([v not in zeros for v in names])
    pinned = PolySystem(sys.equations, set(sys.pins) | zeros, sys.stage, sys.groups).pinned()
    op_lo = _PolyOperator(pinned, index, kn, up=False)
    op_hi = _PolyOperator(pinned, index, kn, up=True)
    groups = [[index[v] for v in g if v in index] for g in sys.groups]
    return names, active, op_lo, op_hi, groups


def lfp(
    sys: PolySystem,
    cfg: SolveConfig = SolveConfig(),
    known: Optional[Mapping[Var, object]] = None,
) -> Valuation:
    """Lower bound on the least non-negative solution of a monotone system.

    Zero variables are found exactly by derivability first.  Without Newton
    acceleration every iterate is a certified lower bound.
    """
    names, active, op_lo, _, _ = _compile(sys, known)
    x, status, its = _iterate(op_lo, active, cfg)
    res = float(np.max(np.abs(op_lo.f(x) - x), initial=0.0))
    return _to_valuation(names, x, status, res, its)


def upper_bound_pass(
    sys: PolySystem,
    lower: Valuation,
    known: Optional[Mapping[Var, object]] = None,
) -> Valuation:
    """Upper bound on the least solution given a lower bound from :func:`lfp`.

    Exact valuations are returned unchanged.  Otherwise a vector above
    ``lower`` is searched for which ``f(y) <= y`` holds with outward
    rounding; group constraints then tighten it.  If no such vector is found
    the bound is ``lower`` plus the residual amplified by an estimate of
    ``1/(1 - spectral radius)`` and the status says ``heuristic``.
    """
    if lower.status == EXACT:
        return Valuation(dict(lower.values), EXACT)
    names, active, op_lo, op_hi, groups = _compile(sys, known)
    x = np.array([float(lower.values.get(v, 0.0)) for v in names])
    ub, ok = _upper(op_lo, op_hi, x, active, groups)
    return _to_valuation(names, ub, CERTIFIED if ok else HEURISTIC, lower.residual, 0)


@dataclass
class TerminationBounds:
    """Bracket on the termination probabilities ``x_qp`` of a one-counter step."""

    states: List[Hashable]
    lower: Dict[Tuple[Hashable, Hashable], float]
    upper: Dict[Tuple[Hashable, Hashable], float]
    zeros: Set[Tuple[Hashable, Hashable]]
    status: str
    certified: bool
    residual: float
    iterations: int


def termination_bounds(step: Step, states: Sequence[Hashable], cfg: SolveConfig = SolveConfig()) -> TerminationBounds:
    """Bracket the least solution of the termination system of ``step``.

    Equivalent to :func:`lfp` plus :func:`upper_bound_pass` on
    ``termination_system(step, states)`` but evaluated in matrix form,
    which is much faster for larger state sets.
    """
    states = list(states)
    k = len(states)
    pos = {s: i for i, s in enumerate(states)}
    mats = {}
    for up in (False, True):
        Dm, D0, Dp = np.zeros((k, k)), np.zeros((k, k)), np.zeros((k, k))
        for q in states:
            for (p, u), poly in step.get(q, {}).items():
                c = pconst(poly)
                if c is None:
                    raise ValueError("termination_bounds needs a numeric step")
                M = Dm if u == -1 else D0 if u == 0 else Dp
                M[pos[q], pos[p]] = _round(Fraction(c), up)
        mats[up] = (Dm, D0, Dp)

    # exact zero set: x_qp > 0 iff derivable
    qual = {(q, p, u) for q in states for (p, u), poly in step.get(q, {}).items() if pconst(poly) > 0}
    posv: Set[Tuple[Hashable, Hashable]] = set()
    down = {}
    for (q, p, u) in qual:
        down.setdefault(u, {}).setdefault(q, set()).add(p)
    changed = True
    while changed:
        changed = False
        for q in states:
            for p in states:
                if (q, p) in posv:
                    continue
                ok = p in down.get(-1, {}).get(q, ())
                if not ok:
                    ok = any((t, p) in posv for t in down.get(0, {}).get(q, ()))
                if not ok:
                    for t in down.get(1, {}).get(q, ()):
                        if any((t, t2) in posv and (t2, p) in posv for t2 in states):
                            ok = True
                            break
                if ok:
                    posv.add((q, p))
                    changed = True
    mask = np.array([[(q, p) in posv for p in states] for q in states])
    op_lo = _TermOperator(*mats[False], mask)
    op_hi = _TermOperator(*mats[True], mask)
    active = mask.ravel()
    x, status, its = _iterate(op_lo, active, cfg)
    res = float(np.max(np.abs(op_lo.f(x) - x), initial=0.0))
    groups = [[i * k + j for j in range(k)] for i in range(k)]
    ub, ok = _upper(op_lo, op_hi, x, active, groups)
    lower = {(q, p): float(x[pos[q] * k + pos[p]]) for q in states for p in states}
    upper = {(q, p): float(ub[pos[q] * k + pos[p]]) for q in states for p in states}
    zeros = {(q, p) for q in states for p in states if (q, p) not in posv}
    return TerminationBounds(states, lower, upper, zeros, status, ok and not cfg.newton, res, its)


def decide(lo, hi, theta) -> str:
    """``yes`` if ``lo >= theta``, ``no`` if ``hi < theta``, else ``inconclusive``."""
    if lo >= theta:
        return "yes"
    if hi < theta:
        return "no"
    return "inconclusive"
