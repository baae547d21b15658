"""Acceptance criteria.  Each test records one PASS/FAIL line."""

import itertools
import math
import random
import time
from fractions import Fraction

from oracles import truncated_selterm

from ocmdp.compression import cfg_node, compress
from ocmdp.eqsys import bounded_system, fold, termination_system
from ocmdp.generators import (
    SqrtSumInstance,
    all_digraphs,
    counter_oblivious_gadget_strategy,
    gen_hamiltonian,
    gen_sqrt_sum,
    has_hamiltonian_cycle,
    random_model,
    random_oeis,
    random_row,
    random_cis,
)
from ocmdp.model import INF, Config, Objective, Query, oracle_probability
from ocmdp.partitions import Interval, parse_partition, partition, refine
from ocmdp.realise import realise_pure_fixed
from ocmdp.smt import realisability_problem
from ocmdp.strategies import cis, counter_oblivious, enumerate_supports
from ocmdp.verify import NO, YES, oeis_bracket, verify, verify_cis, verify_oeis


class TestAcceptance:
    def test_1_compression_fidelity(self, catalog, record):
        ex = catalog["fig2a"]
        t0 = time.perf_counter()
        chain = compress(ex.model, ex.strategy, parse_partition("1-7,8-inf"))
        elapsed = time.perf_counter() - t0
        tr, hi = chain.trans, chain.trans_hi
        exact = [
            (cfg_node("q", 1), cfg_node("q", 2), Fraction(1, 2)),
            (cfg_node("q", 2), cfg_node("q", 4), Fraction(1, 4)),
            (cfg_node("q", 4), cfg_node("q", 8), Fraction(1, 16)),
        ]
        ok_exact = all(
            isinstance(tr[s][t], Fraction) and tr[s][t] == want and hi[s][t] == want for s, t, want in exact
        )
        s, t = cfg_node("p", 8), cfg_node("t", 7)
        root = math.sqrt(2) / 2
        err = max(abs(float(tr[s][t]) - root), abs(float(hi[s][t]) - root))
        ok = ok_exact and err <= 1e-9 and elapsed < 1.0
        record(1, "compression fidelity", ok, f"exact={ok_exact} sqrt2/2 err={err:.1e} time={elapsed:.2f}s")
        assert ok

    def test_2_pure_vs_random(self, catalog, record):
        ex = catalog["fig4"]
        m, q = ex.model, ex.query
        t0 = time.perf_counter()
        vals = {name: verify(m, ex.strategies[name], q).lo for name in ("pure_a", "pure_b", "uniform")}
        ok_vals = vals == {"pure_a": Fraction(3, 4), "pure_b": Fraction(3, 4), "uniform": Fraction(25, 32)}
        pure = realise_pure_fixed(m, q, partition((1, 2)))
        ok_pure = pure.answer == NO

        p = partition((1, 2))
        supp = next(s for s in enumerate_supports(p, m) if s.supports[("q", 0)] == frozenset({"a", "b"}))
        prob = realisability_problem(m, q, p, supp.supports)
        z = {}
        for v in prob.outer:
            _, _, st, a = v
            acts = supp.supports[(st, 0)]
            z[v] = Fraction(1, len(acts)) if a in acts else Fraction(0)
        sat, failed = prob.evaluate(prob.assignment(z))
        again = verify(m, ex.strategies["uniform"], q)
        ok_rand = sat and again.answer == YES and again.exact and again.lo == Fraction(25, 32)
        elapsed = time.perf_counter() - t0
        ok = ok_vals and ok_pure and ok_rand and elapsed < 1.0
        detail = f"values={ {k: str(v) for k, v in vals.items()} } pure={pure.answer} script_sat={sat} time={elapsed:.2f}s"
        record(2, "pure vs randomised", ok, detail)
        assert ok, failed

    def test_3_sqrt_sum_closed_form(self, record):
        t0 = time.perf_counter()
        worst, count = 0.0, 0
        for n in (1, 2, 3):
            for xs in itertools.product(range(1, 6), repeat=n):
                inst = SqrtSumInstance(xs, 1)
                m, _ = gen_sqrt_sum(inst)
                s = counter_oblivious_gadget_strategy(m, INF)
                chain = compress(m, s, init_counter=1)
                want = sum(math.sqrt(x) for x in xs) / (inst.n * inst.m)
                lo, hi = chain.reach_bracket([("t", 0)], ("q_init", 1))
                worst = max(worst, abs(float(lo) - want), abs(float(hi) - want))
                for i, x in enumerate(xs):
                    lo, hi = chain.reach_bracket([("t", 0)], (f"q{i}", 1))
                    want_i = math.sqrt(x) / inst.m
                    worst = max(worst, abs(float(lo) - want_i), abs(float(hi) - want_i))
                count += 1
        elapsed = time.perf_counter() - t0
        ok = count == 155 and worst <= 1e-6 and elapsed < 10.0
        record(3, "square-root-sum closed form", ok, f"{count} instances, max err={worst:.1e}, time={elapsed:.2f}s")
        assert ok

    def test_4_oracle_equivalence(self, record):
        rng = random.Random(2024)
        t0 = time.perf_counter()
        mismatches = []
        for i in range(200):
            m = random_model(rng, rng.randint(1, 4), rng.randint(1, 3))
            B = rng.randint(2, 32)
            s = random_oeis(rng, m, B, 3)
            init = (rng.choice(m.states), rng.randint(1, B - 1))
            targets = set(rng.sample(m.states, rng.randint(1, len(m.states))))
            for kind in ("selterm", "reach", "ceiling"):
                lo, hi, _ = oeis_bracket(m, s, B, init, kind, targets)
                want = oracle_probability(m, s, B, init, kind, targets)
                if not (isinstance(lo, Fraction) and lo == hi == want):
                    mismatches.append((i, kind, lo, hi, want))
        elapsed = time.perf_counter() - t0
        ok = not mismatches and elapsed < 60.0
        record(4, "oracle equivalence", ok, f"600 comparisons, {len(mismatches)} mismatches, time={elapsed:.2f}s")
        assert ok, mismatches[:3]

    def test_5_refine_bounds(self, record):
        rng = random.Random(5)
        t0 = time.perf_counter()
        bad = []
        for _ in range(10**4):
            hi = rng.randint(1, 2**20)
            lo = rng.randint(1, hi)
            pieces = refine(Interval(lo, hi))
            n = hi - lo + 1
            sizes_ok = all(((len(j) + 1) & len(j)) == 0 for j in pieces)
            cover_ok = pieces[0].lo == lo and pieces[-1].hi == hi and all(
                a.hi + 1 == b.lo for a, b in zip(pieces, pieces[1:])
            )
            if not (sizes_ok and cover_ok and len(pieces) <= math.log2(n + 1) + 1):
                bad.append((lo, hi))
        elapsed = time.perf_counter() - t0
        ok = not bad and elapsed < 5.0
        record(5, "refine bounds", ok, f"10000 intervals, {len(bad)} violations, time={elapsed:.2f}s")
        assert ok, bad[:3]

    def test_6_cis_double_compression(self, record):
        rng = random.Random(7)
        t0 = time.perf_counter()
        bad = []
        for i in range(50):
            m = random_model(rng, rng.randint(1, 3), rng.randint(1, 2))
            tail = random_row(rng, m)
            rho = rng.randint(1, 4)
            window = random_cis(rng, m, rho).base
            c = cis(window, [tail] * len(window.window))
            o = counter_oblivious(tail, INF)
            init = Config(rng.choice(m.states), rng.randint(1, 5))
            targets = frozenset(rng.sample(m.states, rng.randint(1, len(m.states))))
            q = Query(Objective("selterm", targets), INF, init, 0)
            vc, vo = verify_cis(m, c, q), verify_oeis(m, o, q)
            ref = truncated_selterm(m, o, 2**10, tuple(init), targets)
            overlap = max(vc.lo, vo.lo) <= min(vc.hi, vo.hi)
            contain = all(v.lo - 1e-6 <= ref <= v.hi + 1e-6 for v in (vc, vo))
            if not (overlap and contain):
                bad.append((i, float(vc.lo), float(vc.hi), float(vo.lo), float(vo.hi), ref))
        elapsed = time.perf_counter() - t0
        ok = not bad and elapsed < 60.0
        record(6, "CIS double compression", ok, f"50 instances, {len(bad)} failures, time={elapsed:.2f}s")
        assert ok, bad[:3]

    def test_7_hamiltonian_reduction(self, record):
        rng = random.Random(11)
        graphs = all_digraphs(1) + all_digraphs(2)
        three, four = all_digraphs(3), all_digraphs(4)
        graphs += rng.sample(three, 32) + rng.sample(four, 100 - len(graphs) - 32)
        t0 = time.perf_counter()
        bad, positives = [], 0
        for g in graphs:
            m, B, q = gen_hamiltonian(g)
            res = realise_pure_fixed(m, q, partition((1, B - 1)))
            truth = has_hamiltonian_cycle(g)
            positives += truth
            if (res.answer == YES) != truth:
                bad.append(g)
        elapsed = time.perf_counter() - t0
        ok = not bad and elapsed < 30.0
        detail = f"{len(graphs)} graphs ({positives} Hamiltonian), {len(bad)} disagreements, time={elapsed:.2f}s"
        record(7, "Hamiltonian reduction", ok, detail)
        assert ok, bad[:3]

    def test_8_system_sizes(self, record):
        rng = random.Random(8)
        t0 = time.perf_counter()
        bad = []
        pairs = [(n, b) for n in range(1, 6) for b in range(1, 7)]
        for n, beta in pairs + [(rng.randint(1, 5), rng.randint(1, 6)) for _ in range(10)]:
            m = random_model(rng, n, 2)
            step = fold(m, random_row(rng, m))
            ts = termination_system(step, m.states)
            bs = bounded_system(step, m.states, beta)
            got = (len(ts.equations), len(bs.equations))
            want = (n * n, 2 * n * n * (3 * beta - 2))
            closed = set(ts.variables) <= set(ts.equations) and set(bs.variables) <= set(bs.equations)
            if got != want or not closed:
                bad.append((n, beta, got, want))
        elapsed = time.perf_counter() - t0
        ok = not bad and elapsed < 1.0
        record(8, "system sizes", ok, f"{len(pairs) + 10} (|Q|, beta) pairs, {len(bad)} mismatches, time={elapsed:.2f}s")
        assert ok, bad[:3]
