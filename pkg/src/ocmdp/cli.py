"""Command-line interface.

Exit status: 0 yes, 1 no, 2 inconclusive, 3 usage or data error.  Reports
are ``key: value`` lines on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Tuple

from . import formats
from .compression import SYMBOLIC, compress
from .generators import (
    DirectedGraph,
    SqrtSumInstance,
    counter_oblivious_gadget_strategy,
    gen_hamiltonian,
    gen_sqrt_sum,
    gen_sqrt_sum_bounded,
    paper_examples,
)
from .model import INF, Config, ModelError, Objective, OcMdp, Query, is_inf
from .partitions import PeriodicPartition, parse_partition
from .realise import PENDING, emit_realisability_smt, realise_pure_fixed, realise_pure_param, realise_rand_bounded
from .solvers import SolveConfig
from .smt import realisability_problem, verification_problem
from .strategies import CIS, OEIS, IntervalStrategy, export_mealy
from .verify import INCONCLUSIVE, NO, YES, verify

EXIT = {YES: 0, NO: 1, INCONCLUSIVE: 2, PENDING: 2}
USAGE = 3
SOLVER_ENV = "OCMDP_SOLVER"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which means "inconclusive" here
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x, exact: bool = True) -> str:
    if exact and isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def _emit(pairs: List[Tuple[str, object]]) -> None:
    for k, v in pairs:
        print(f"{k}: {v}")


# --- loading -----------------------------------------------------------------


def _load_model(spec: str):
    cat = paper_examples()
    if spec in cat:
        return cat[spec].model, cat[spec]
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"model {spec!r} is neither a catalog name ({', '.join(cat)}) nor a file")
    return formats.parse_model(path.read_text()), None


def _load_query(args, example) -> Query:
    q: Optional[Query] = None
    if getattr(args, "query", None):
        q = formats.parse_query(Path(args.query).read_text())
    elif example is not None:
        q = example.query
    fields = {}
    if args.objective or args.targets:
        kind = args.objective or (q.objective.kind if q else None)
        targets = args.targets.split(",") if args.targets else (sorted(q.objective.targets) if q else None)
        if kind is None or targets is None:
            raise UsageError("objective and targets are both needed")
        fields["objective"] = Objective(kind, frozenset(targets))
    if args.bound is not None:
        fields["bound"] = formats.parse_bound(args.bound)
    if args.init:
        st, _, k = args.init.rpartition(",") if "," in args.init else args.init.rpartition(" ")
        fields["init"] = Config(st.strip(), int(k))
    if args.theta is not None:
        fields["threshold"] = Fraction(args.theta)
    if q is None:
        missing = {"objective", "bound", "init"} - set(fields)
        if missing:
            raise UsageError(f"no query given and missing {sorted(missing)}")
        return Query(fields["objective"], fields["bound"], fields["init"], fields.get("threshold", Fraction(0)))
    return replace(q, **fields)


def _load_strategy(spec: Optional[str], m: OcMdp, example) -> IntervalStrategy:
    if spec is None:
        if example is None:
            raise UsageError("--strategy is required for models loaded from files")
        return example.strategy
    if example is not None and spec in example.strategies:
        return example.strategies[spec]
    path = Path(spec)
    if not path.exists():
        names = ", ".join(example.strategies) if example else ""
        raise UsageError(f"strategy {spec!r} is not a file" + (f" nor one of: {names}" if names else ""))
    return formats.parse_strategy(path.read_text(), m)


def _cfg(args) -> SolveConfig:
    return SolveConfig(mode=args.mode, eps=args.eps, max_iters=args.max_iters, newton=args.newton)


# --- commands ------------------------------------------------------------------


def cmd_verify(args) -> int:
    m, ex = _load_model(args.model)
    q = _load_query(args, ex)
    s = _load_strategy(args.strategy, m, ex)
    if s.kind == OEIS and s.partition.bound != q.bound:
        raise UsageError(f"strategy partition {s.partition} does not match bound {q.bound}")
    v = verify(m, s, q, _cfg(args))
    out = [("answer", v.answer)]
    if v.exact:
        out.append(("probability", _fmt(v.lo)))
    out += [("lower", _fmt(v.lo, v.exact)), ("upper", _fmt(v.hi, v.exact)), ("threshold", str(v.theta)), ("exact", str(v.exact).lower())]
    out += [("status", v.status), ("partition", v.partition), ("reach_transform", str(v.transformed).lower())]
    for note in v.notes:
        out.append(("note", note))
    if args.smt_out:
        text = verification_problem(m, s, q).render(negated=not args.forall)
        Path(args.smt_out).write_text(text)
        out.append(("smt", args.smt_out))
    _emit(out)
    return EXIT[v.answer]


def _print_witness(res) -> None:
    if res.witness is not None:
        print("witness:")
        for line in formats.dump_strategy(res.witness).splitlines():
            print(f"  {line}")


def cmd_realise_pure(args) -> int:
    m, ex = _load_model(args.model)
    q = _load_query(args, ex)
    cfg = _cfg(args)
    if args.partition is not None:
        res = realise_pure_fixed(m, q, parse_partition(args.partition), cfg, args.jobs)
    else:
        if args.d is None or args.n is None:
            raise UsageError("give --partition or both --d and --n")
        res = realise_pure_param(m, q, args.d, args.n, args.kind, cfg, args.jobs)
    out = [("answer", res.answer), ("candidates", res.stats["candidates"]), ("inconclusive", res.stats["inconclusive"])]
    if res.value is not None:
        out += [("lower", _fmt(res.value[0])), ("upper", _fmt(res.value[1]))]
    if res.partition is not None:
        out.append(("partition", res.partition))
    for note in res.notes:
        out.append(("note", note))
    _emit(out)
    _print_witness(res)
    return EXIT[res.answer]


def cmd_realise_rand(args) -> int:
    m, ex = _load_model(args.model)
    q = _load_query(args, ex)
    if args.partition is None:
        raise UsageError("--partition is required")
    p = parse_partition(args.partition)
    solver = args.solver_cmd or os.environ.get(SOLVER_ENV)
    if is_inf(q.bound):
        text = emit_realisability_smt(m, q, p)
        if args.smt_out:
            Path(args.smt_out).write_text(text)
        else:
            sys.stdout.write(text)
        _emit([("answer", PENDING), ("note", "unbounded randomised realisability is delegated to the emitted script")])
        return EXIT[PENDING]
    res = realise_rand_bounded(m, q, p, _cfg(args), solver_cmd=solver)
    out = [("answer", res.answer), ("supports", res.stats["supports"]), ("candidates", res.stats["candidates"])]
    if res.value is not None:
        out += [("lower", _fmt(res.value[0])), ("upper", _fmt(res.value[1]))]
    if args.smt_out:
        base = Path(args.smt_out)
        for i, text in enumerate(res.scripts):
            path = base.with_name(f"{base.stem}.{i}{base.suffix or '.smt2'}")
            path.write_text(text)
        out.append(("scripts", len(res.scripts)))
    for note in res.notes:
        out.append(("note", note))
    _emit(out)
    _print_witness(res)
    return EXIT[res.answer]


def cmd_compress(args) -> int:
    m, ex = _load_model(args.model)
    s = _load_strategy(args.strategy, m, ex)
    if s.kind == CIS:
        raise UsageError("compress takes an open-ended strategy")
    p = parse_partition(args.partition) if args.partition else s.partition
    mode = SYMBOLIC if args.symbolic else args.mode
    chain = compress(m, s, p, p.bound, mode=mode, cfg=_cfg(args), init_counter=args.init_counter)
    if args.dump:
        sys.stdout.write(chain.dump())
    else:
        _emit([("states", len(chain.states)), ("partition", chain.partition), ("exact", str(chain.exact).lower())])
    return 0


def cmd_emit_smt(args) -> int:
    m, ex = _load_model(args.model)
    q = _load_query(args, ex)
    if args.task == "verify":
        s = _load_strategy(args.strategy, m, ex)
        text = verification_problem(m, s, q, symbolic=args.symbolic).render(negated=not args.forall)
    else:
        if args.period is not None:
            base = PeriodicPartition(args.period, parse_partition(args.window or f"1-{args.period}"))
        elif args.partition is not None:
            base = parse_partition(args.partition)
        else:
            raise UsageError("realisability needs --partition or --period/--window")
        text = realisability_problem(m, q, base).render(quantified=True)
    if args.smt_out:
        Path(args.smt_out).write_text(text)
        _emit([("smt", args.smt_out)])
    else:
        sys.stdout.write(text)
    return 0


def cmd_generate(args) -> int:
    strat = None
    if args.family in ("sqrt-sum", "sqrt-sum-bounded"):
        if not args.xs:
            raise UsageError("--xs is required")
        inst = SqrtSumInstance(tuple(int(x) for x in args.xs.split(",")), args.y)
        if args.family == "sqrt-sum":
            m, q = gen_sqrt_sum(inst)
        else:
            m, _, q = gen_sqrt_sum_bounded(inst, args.bound_override)
        strat = counter_oblivious_gadget_strategy(m, q.bound)
    elif args.family == "hamiltonian":
        if not args.edges:
            raise UsageError("--edges is required, e.g. v0>v1,v1>v0")
        edges = [tuple(e.split(">")) for e in args.edges.split(",") if e]
        vs = args.vertices.split(",") if args.vertices else sorted({v for e in edges for v in e})
        m, _, q = gen_hamiltonian(DirectedGraph(tuple(vs), tuple(edges), args.initial or vs[0]))
    else:
        cat = paper_examples()
        if args.name not in cat:
            raise UsageError(f"--name must be one of {', '.join(cat)}")
        ex = cat[args.name]
        m, q, strat = ex.model, ex.query, ex.strategy
    files = {"model.txt": formats.dump_model(m), "query.txt": formats.dump_query(q)}
    if strat is not None:
        files["strategy.txt"] = formats.dump_strategy(strat)
    if args.out_dir:
        d = Path(args.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (d / name).write_text(text)
        _emit([("wrote", str(d / name)) for name in files])
    else:
        for name, text in files.items():
            print(f"# {name}")
            sys.stdout.write(text)
    return 0


def cmd_mealy(args) -> int:
    m, ex = _load_model(args.model)
    s = _load_strategy(args.strategy, m, ex)
    bound = formats.parse_bound(args.bound) if args.bound else (INF if s.kind == CIS else s.partition.bound)
    mm = export_mealy(s, m, args.init_counter, bound, full=args.full)
    sys.stdout.write(mm.dump())
    return 0


# --- parser --------------------------------------------------------------------


def _solver_flags(sp) -> None:
    sp.add_argument("--mode", choices=["rational", "float"], default="rational")
    sp.add_argument("--eps", type=float, default=1e-12)
    sp.add_argument("--max-iters", type=int, default=10**6)
    sp.add_argument("--newton", action="store_true", help="Newton acceleration for least fixed points")


def _query_flags(sp) -> None:
    sp.add_argument("--query", help="query file")
    sp.add_argument("--objective", choices=["reach", "selterm"])
    sp.add_argument("--targets", help="comma-separated target states")
    sp.add_argument("--bound", help="counter bound N or inf")
    sp.add_argument("--init", help="initial configuration 'STATE,COUNTER'")
    sp.add_argument("--theta", help="threshold, e.g. 25/32")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ocmdp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("verify", help="check an interval strategy against a threshold")
    sp.add_argument("--model", required=True, help="model file or catalog name (fig1, fig2a, fig4)")
    sp.add_argument("--strategy", help="strategy file or catalog strategy name")
    _query_flags(sp)
    _solver_flags(sp)
    sp.add_argument("--smt-out", help="also write the verification sentence here")
    sp.add_argument("--forall", action="store_true", help="emit the universal form instead of the negated one")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("realise-pure", help="search pure interval strategies")
    sp.add_argument("--model", required=True)
    _query_flags(sp)
    _solver_flags(sp)
    sp.add_argument("--partition", help="fixed partition, e.g. 1-2,3-inf")
    sp.add_argument("--d", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--kind", choices=[OEIS, CIS], default=OEIS)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_realise_pure)

    sp = sub.add_parser("realise-rand", help="randomised realisability over a fixed partition")
    sp.add_argument("--model", required=True)
    _query_flags(sp)
    _solver_flags(sp)
    sp.add_argument("--partition")
    sp.add_argument("--smt-out", help="script path (one file per support in the bounded case)")
    sp.add_argument("--solver-cmd", help=f"external SMT solver command (default ${SOLVER_ENV})")
    sp.set_defaults(func=cmd_realise_rand)

    sp = sub.add_parser("compress", help="build the compressed chain")
    sp.add_argument("--model", required=True)
    sp.add_argument("--strategy")
    sp.add_argument("--partition")
    sp.add_argument("--init-counter", type=int, help="counter value to keep retained")
    _solver_flags(sp)
    sp.add_argument("--symbolic", action="store_true")
    sp.add_argument("--dump", action="store_true")
    sp.set_defaults(func=cmd_compress)

    sp = sub.add_parser("emit-smt", help="write an SMT-LIB sentence")
    sp.add_argument("task", choices=["verify", "realise"])
    sp.add_argument("--model", required=True)
    sp.add_argument("--strategy")
    _query_flags(sp)
    sp.add_argument("--partition")
    sp.add_argument("--period", type=int)
    sp.add_argument("--window")
    sp.add_argument("--symbolic", action="store_true", help="keep strategy entries as variables")
    sp.add_argument("--forall", action="store_true")
    sp.add_argument("--smt-out")
    sp.set_defaults(func=cmd_emit_smt)

    sp = sub.add_parser("generate", help="write generated instances")
    sp.add_argument("family", choices=["sqrt-sum", "sqrt-sum-bounded", "hamiltonian", "example"])
    sp.add_argument("--xs", help="comma-separated naturals")
    sp.add_argument("--y", type=int, default=1)
    sp.add_argument("--bound-override", type=int)
    sp.add_argument("--edges")
    sp.add_argument("--vertices")
    sp.add_argument("--initial")
    sp.add_argument("--name")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("mealy-export", help="dump the Mealy machine of a strategy")
    sp.add_argument("--model", required=True)
    sp.add_argument("--strategy")
    sp.add_argument("--init-counter", type=int, required=True)
    sp.add_argument("--bound")
    sp.add_argument("--full", action="store_true")
    sp.set_defaults(func=cmd_mealy)
    return ap


def run(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ModelError, UsageError, OSError, ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
