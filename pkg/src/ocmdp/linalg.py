"""Sparse elimination for fixed-point linear systems ``x = A x + b``.

The systems built in this package are sub-stochastic with non-negative
coefficients.  Once variables with value zero have been pinned away, the
matrix ``I - A`` is a non-singular M-matrix, so eliminating variables in any
order keeps every pivot ``1 - a_vv`` strictly positive.  A non-positive pivot
therefore signals a caller bug (or, for over-approximated coefficients, that
the least solution is unbounded).
"""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, Hashable, Iterable, Mapping, Optional, Tuple, TypeVar

V = TypeVar("V", bound=Hashable)

Row = Tuple[Dict[Hashable, object], object]


class SingularSystem(ArithmeticError):
    """Raised when a pivot ``1 - a_vv`` is not strictly positive."""

    def __init__(self, var: object, pivot: object) -> None:
        super().__init__(f"non-positive pivot {pivot} at variable {var!r}")
        self.var = var
        self.pivot = pivot


def solve_fixpoint(
    rows: Mapping[V, Tuple[Mapping[V, object], object]],
    order: Optional[Iterable[V]] = None,
) -> Dict[V, object]:
    """Solve ``x_v = sum_u rows[v][0][u] * x_u + rows[v][1]`` for every ``v``.

    Works with any field type supporting ``+ - * /`` and comparison with 0
    (``Fraction`` for exact answers, ``float`` for approximations).  Every
    variable referenced on a right-hand side must itself have a row.
    """
    eqs: Dict[V, Tuple[Dict[V, object], object]] = {}
    users: Dict[V, set] = defaultdict(set)
    for v, (coefs, const) in rows.items():
        eqs[v] = (dict(coefs), const)
        for u in coefs:
            users[u].add(v)
    for v, (coefs, _) in eqs.items():
        for u in coefs:
            if u not in eqs:
                raise KeyError(f"variable {u!r} used by {v!r} has no equation")

    seq = list(order) if order is not None else list(eqs)
    if len(seq) != len(eqs) or set(seq) != set(eqs):
        raise ValueError("elimination order must list every variable once")
    pending = set(seq)

    for v in seq:
        pending.discard(v)
        coefs, const = eqs[v]
        a = coefs.pop(v, 0)
        if a:
            pivot = 1 - a
            if not pivot > 0:
                raise SingularSystem(v, pivot)
            coefs = {u: c / pivot for u, c in coefs.items()}
            const = const / pivot
            eqs[v] = (coefs, const)
        for w in users.pop(v, ()):
            if w not in pending:
                continue
            wc, wb = eqs[w]
            f = wc.pop(v, 0)
            if not f:
                continue
            for u, c in coefs.items():
                nc = wc.get(u, 0) + f * c
                if nc:
                    wc[u] = nc
                else:
                    wc.pop(u, None)
                users[u].add(w)
            eqs[w] = (wc, wb + f * const)

    values: Dict[V, object] = {}
    for v in reversed(seq):
        coefs, const = eqs[v]
        total = const
        for u, c in coefs.items():
            total = total + c * values[u]
        values[v] = total
    return values
