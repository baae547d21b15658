"""Independent reference computations used by the tests.

Nothing here goes through compression or the equation systems: the
truncated oracle unrolls the counter explicitly and solves one sparse linear
system in floating point.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import spsolve

from ocmdp.model import effective_row


def truncated_selterm(m, strat, height: int, init: Tuple[str, int], targets: Iterable[str]) -> float:
    """P(reach some (t, 0)) in the chain cut off at counter ``height``.

    Counter ``height`` is absorbing and counts as failure, so the value
    increases towards the unbounded probability as ``height`` grows.
    """
    tset = set(targets)
    idx: Dict[Tuple[str, int], int] = {}
    states: List[Tuple[str, int]] = []
    succ: List[List[Tuple[int, float]]] = []

    def node(s):
        if s not in idx:
            idx[s] = len(states)
            states.append(s)
            succ.append([])
        return idx[s]

    todo = deque([init])
    node(init)
    seen = {init}
    while todo:
        q, k = todo.popleft()
        if k == 0 or k >= height:
            continue
        i = idx[(q, k)]
        for a, pa in effective_row(m, q, strat.lookup(q, k)).items():
            k2 = k + m.weight[(q, a)]
            for p, pp in m.delta[(q, a)].items():
                if not pp:
                    continue
                j = node((p, k2))
                succ[i].append((j, float(pa) * float(pp)))
                if (p, k2) not in seen:
                    seen.add((p, k2))
                    todo.append((p, k2))
    n = len(states)
    goal = np.array([1.0 if (k == 0 and q in tset) else 0.0 for q, k in states])
    # keep only states that can reach the goal; the rest have value 0
    pred: List[List[int]] = [[] for _ in range(n)]
    for i, row in enumerate(succ):
        for j, _ in row:
            pred[j].append(i)
    alive = set(i for i in range(n) if goal[i])
    todo2 = deque(alive)
    while todo2:
        j = todo2.popleft()
        for i in pred[j]:
            if i not in alive:
                alive.add(i)
                todo2.append(i)
    if idx[init] not in alive:
        return 0.0
    if goal[idx[init]]:
        return 1.0
    inner = sorted(i for i in alive if not goal[i])
    pos = {i: r for r, i in enumerate(inner)}
    rows, cols, vals = [], [], []
    b = np.zeros(len(inner))
    for i in inner:
        for j, p in succ[i]:
            if goal[j]:
                b[pos[i]] += p
            elif j in pos:
                rows.append(pos[i])
                cols.append(pos[j])
                vals.append(p)
    P = csr_matrix((vals, (rows, cols)), shape=(len(inner), len(inner)))
    x = spsolve((identity(len(inner), format="csr") - P).tocsc(), b)
    return float(x[pos[idx[init]]])
