"""Text formats for models, queries and strategies.

Model::

    states q0 q1 q2
    trans q0 a +1 : q0 1/2, q1 1/2
    trans q1 b -1 : q2 1

Query (``key: value`` lines)::

    objective: selterm
    targets: t
    bound: inf
    init: q 1
    threshold: 1/2

Strategy::

    kind: oeis
    partition: 1-7,8-inf
    interval 1-7
      q: a
      p: a 1/2, b 1/2
    interval 8-inf
      ...

A cyclic strategy uses ``kind: cis``, ``period: N`` and ``window: ...``
instead of ``partition``.  A row naming a single action means probability 1.
Rows of states with one enabled action may be omitted.  Lines starting with
``#`` are comments everywhere.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .model import INF, Config, ModelError, Objective, OcMdp, Query, is_inf, validate
from .partitions import PeriodicPartition, parse_interval, parse_partition
from .strategies import CIS, OEIS, IntervalStrategy, cis, oeis


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.strip():
            yield n, line


def _frac(tok: str, where: str) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"{where}: bad rational {tok!r}") from None


# --- models -----------------------------------------------------------------


def dump_model(m: OcMdp) -> str:
    out = ["states " + " ".join(m.states)]
    for q in m.states:
        for a in m.enabled[q]:
            w = m.weight[(q, a)]
            succ = ", ".join(f"{p} {pr}" for p, pr in m.delta[(q, a)].items())
            out.append(f"trans {q} {a} {w:+d} : {succ}")
    return "\n".join(out) + "\n"


def parse_model(text: str, check: bool = True) -> OcMdp:
    states: List[str] = []
    tr: Dict[Tuple[str, str], Tuple[int, Dict[str, Fraction]]] = {}
    for n, line in _lines(text):
        where = f"line {n}"
        head, _, rest = line.strip().partition(" ")
        if head == "states":
            states.extend(rest.split())
        elif head == "trans":
            lhs, sep, rhs = rest.partition(":")
            parts = lhs.split()
            if not sep or len(parts) != 3:
                raise ModelError(f"{where}: expected 'trans STATE ACTION WEIGHT : SUCC PROB, ...'")
            q, a, w = parts
            try:
                weight = int(w)
            except ValueError:
                raise ModelError(f"{where}: bad weight {w!r}") from None
            if (q, a) in tr:
                raise ModelError(f"{where}: duplicate transition ({q},{a})")
            succ: Dict[str, Fraction] = {}
            for chunk in rhs.split(","):
                toks = chunk.split()
                if len(toks) != 2:
                    raise ModelError(f"{where}: expected 'SUCC PROB', got {chunk.strip()!r}")
                succ[toks[0]] = succ.get(toks[0], Fraction(0)) + _frac(toks[1], where)
            tr[(q, a)] = (weight, succ)
        else:
            raise ModelError(f"{where}: unknown directive {head!r}")
    m = OcMdp.build(tr, states=states or None)
    if check:
        bad = validate(m)
        if bad:
            raise ModelError("invalid model: " + "; ".join(bad))
    return m


# --- queries -----------------------------------------------------------------


def _kv(text: str) -> Dict[str, Tuple[int, str]]:
    out: Dict[str, Tuple[int, str]] = {}
    for n, line in _lines(text):
        key, sep, val = line.partition(":")
        if not sep:
            raise ModelError(f"line {n}: expected 'key: value'")
        out[key.strip()] = (n, val.strip())
    return out


def dump_query(q: Query) -> str:
    return (
        f"objective: {q.objective.kind}\n"
        f"targets: {' '.join(sorted(q.objective.targets))}\n"
        f"bound: {'inf' if is_inf(q.bound) else q.bound}\n"
        f"init: {q.init.state} {q.init.counter}\n"
        f"threshold: {q.threshold}\n"
    )


def parse_bound(tok: str):
    tok = tok.strip()
    if tok == "inf":
        return INF
    try:
        b = int(tok)
    except ValueError:
        raise ModelError(f"bad bound {tok!r}") from None
    return b


def parse_query(text: str) -> Query:
    kv = _kv(text)
    for key in ("objective", "targets", "bound", "init"):
        if key not in kv:
            raise ModelError(f"query is missing '{key}'")
    try:
        obj = Objective(kv["objective"][1], frozenset(kv["targets"][1].split()))
        n, init = kv["init"]
        toks = init.split()
        if len(toks) != 2:
            raise ModelError(f"line {n}: init must be 'STATE COUNTER'")
        cfg = Config(toks[0], int(toks[1]))
        theta = _frac(kv["threshold"][1], f"line {kv['threshold'][0]}") if "threshold" in kv else Fraction(0)
        return Query(obj, parse_bound(kv["bound"][1]), cfg, theta)
    except ValueError as exc:
        raise ModelError(str(exc)) from None


# --- strategies ----------------------------------------------------------------


def _fmt_dist(d) -> str:
    items = [(a, p) for a, p in d.items() if p]
    if len(items) == 1 and items[0][1] == 1:
        return items[0][0]
    return ", ".join(f"{a} {p}" for a, p in items)


def dump_strategy(s: IntervalStrategy) -> str:
    out = [f"kind: {s.kind}"]
    if s.kind == CIS:
        out += [f"period: {s.period}", f"window: {s.partition}"]
    else:
        out.append(f"partition: {s.partition}")
    for iv, row in zip(s.partition.intervals, s.table):
        out.append(f"interval {iv}")
        for q, d in row.items():
            out.append(f"  {q}: {_fmt_dist(d)}")
    return "\n".join(out) + "\n"


def parse_strategy(text: str, m: Optional[OcMdp] = None) -> IntervalStrategy:
    """Parse a strategy; with ``m`` every row is checked against the model."""
    header: Dict[str, Tuple[int, str]] = {}
    blocks: List[Tuple[int, str, Dict[str, Dict[str, Fraction]]]] = []
    for n, line in _lines(text):
        where = f"line {n}"
        stripped = line.strip()
        if stripped.startswith("interval "):
            blocks.append((n, stripped.split(None, 1)[1].strip(), {}))
            continue
        key, sep, val = stripped.partition(":")
        if not sep:
            raise ModelError(f"{where}: expected 'key: value' or 'interval ...'")
        if not blocks:
            header[key.strip()] = (n, val.strip())
            continue
        q = key.strip()
        row: Dict[str, Fraction] = {}
        chunks = [c.strip() for c in val.split(",") if c.strip()]
        if len(chunks) == 1 and len(chunks[0].split()) == 1:
            row[chunks[0]] = Fraction(1)
        else:
            for c in chunks:
                toks = c.split()
                if len(toks) != 2:
                    raise ModelError(f"{where}: expected 'ACTION PROB', got {c!r}")
                row[toks[0]] = row.get(toks[0], Fraction(0)) + _frac(toks[1], where)
        if q in blocks[-1][2]:
            raise ModelError(f"{where}: duplicate row for state {q!r}")
        blocks[-1][2][q] = row
    kind = header.get("kind", (0, OEIS))[1]
    try:
        if kind == CIS:
            pp = PeriodicPartition(int(header["period"][1]), parse_partition(header["window"][1]))
            part = pp.window
        elif kind == OEIS:
            part = parse_partition(header["partition"][1])
            pp = None
        else:
            raise ModelError(f"unknown strategy kind {kind!r}")
    except KeyError as exc:
        raise ModelError(f"strategy is missing '{exc.args[0]}'") from None
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    if len(blocks) != len(part):
        raise ModelError(f"strategy has {len(blocks)} interval blocks but its partition has {len(part)}")
    for (n, label, _), iv in zip(blocks, part.intervals):
        if parse_interval(label) != iv:
            raise ModelError(f"line {n}: interval {label} does not match declared interval {iv}")
    table = [b[2] for b in blocks]
    if m is not None:
        table = [complete_row(m, row, f"interval {iv}") for row, iv in zip(table, part.intervals)]
    return cis(pp, table) if kind == CIS else oeis(part, table)


def complete_row(m: OcMdp, row: Dict[str, Dict[str, Fraction]], where: str) -> Dict[str, Dict[str, Fraction]]:
    out = {}
    for q in row:
        if q not in m.enabled:
            raise ModelError(f"{where}: unknown state {q!r}")
    for q in m.states:
        acts = m.enabled[q]
        d = row.get(q)
        if d is None:
            if len(acts) != 1:
                raise ModelError(f"{where}: no row for state {q!r}")
            d = {acts[0]: Fraction(1)}
        for a, p in d.items():
            if a not in acts:
                raise ModelError(f"{where}: action {a!r} not enabled in {q!r}")
            if p < 0:
                raise ModelError(f"{where}: negative probability at {q!r}")
        if sum(d.values()) != 1:
            raise ModelError(f"{where}: row of {q!r} sums to {sum(d.values())}")
        out[q] = dict(d)
    return out
