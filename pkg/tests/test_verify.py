import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import truncated_selterm

from ocmdp.generators import (
    SqrtSumInstance,
    counter_oblivious_gadget_strategy,
    gen_sqrt_sum,
    random_cis,
    random_model,
    random_oeis,
    random_row,
)
from ocmdp.model import INF, Config, ModelError, Objective, Query, oracle_probability
from ocmdp.partitions import PeriodicPartition, partition
from ocmdp.solvers import SolveConfig
from ocmdp.strategies import cis, counter_oblivious
from ocmdp.verify import (
    INCONCLUSIVE,
    NO,
    YES,
    emit_verification_smt,
    oeis_bracket,
    verify,
    verify_bounded_oeis,
    verify_cis,
    verify_oeis,
)

FAST = SolveConfig(max_iters=20000)


def _with_theta(q, theta):
    return Query(q.objective, q.bound, q.init, Fraction(theta))


def _query(kind, targets, bound, init, theta=Fraction(0)):
    return Query(Objective(kind, frozenset(targets)), bound, Config(*init), theta)


class TestFig4Catalog:
    def test_uniform_meets_its_value(self, catalog):
        ex = catalog["fig4"]
        v = verify(ex.model, ex.strategies["uniform"], ex.query)
        assert v.answer == YES and v.exact and v.lo == Fraction(25, 32)

    def test_pure_below_uniform(self, catalog):
        ex = catalog["fig4"]
        v = verify(ex.model, ex.strategies["pure_a"], ex.query)
        assert v.answer == NO and v.hi == Fraction(3, 4)
        assert verify(ex.model, ex.strategies["pure_a"], _with_theta(ex.query, Fraction(3, 4))).answer == YES

    def test_counter_aware(self, catalog):
        ex = catalog["fig4"]
        v = verify(ex.model, ex.strategies["split"], ex.query)
        assert v.answer == YES and v.lo == Fraction(7, 8)

    def test_zero_threshold(self, catalog):
        ex = catalog["fig4"]
        v = verify(ex.model, ex.strategies["pure_b"], _with_theta(ex.query, 0))
        assert v.answer == YES

    def test_strategy_must_cover_bound(self, catalog):
        ex = catalog["fig4"]
        with pytest.raises(ModelError):
            verify(ex.model, ex.strategies["uniform"], Query(ex.query.objective, 5, Config("q", 2), Fraction(0)))


class TestSquareRootGadget:
    def _query(self, theta):
        m, q = gen_sqrt_sum(SqrtSumInstance((2,), 1))
        return m, counter_oblivious_gadget_strategy(m, INF), _with_theta(q, theta)

    def test_above_and_below(self):
        m, s, q = self._query(Fraction(70, 100))
        yes = verify(m, s, q)
        assert yes.answer == YES and not yes.exact
        m, s, q = self._query(Fraction(71, 100))
        assert verify(m, s, q).answer == NO

    def test_bracket(self):
        m, s, q = self._query(Fraction(1, 2))
        v = verify(m, s, q)
        assert v.lo <= math.sqrt(2) / 2 <= v.hi and v.hi - v.lo <= 1e-9
        assert v.probability == pytest.approx(math.sqrt(2) / 2)

    def test_fig2a(self, catalog):
        # q misses p only by climbing all the way to 8; from p the walk hits t surely
        ex = catalog["fig2a"]
        v = verify(ex.model, ex.strategy, ex.query)
        want = Fraction(127, 128)
        assert v.lo <= want <= v.hi and v.hi - v.lo <= 1e-9
        assert v.answer == YES


class TestBoundedPipeline:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["selterm", "reach"]))
    def test_matches_oracle(self, seed, kind):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 3), rng.randint(1, 3))
        B = rng.randint(2, 16)
        s = random_oeis(rng, m, B)
        init = (rng.choice(m.states), rng.randint(1, B - 1))
        targets = set(rng.sample(m.states, rng.randint(1, len(m.states))))
        want = oracle_probability(m, s, B, Config(*init), kind, targets)
        theta = Fraction(rng.randint(0, 8), 8)
        v = verify_bounded_oeis(m, s, _query(kind, targets, B, init, theta))
        assert v.exact and v.lo == v.hi == want
        assert v.answer == (YES if want >= theta else NO)
        assert v.transformed == (kind == "reach")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_ceiling_bracket(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 3), rng.randint(1, 3))
        B = rng.randint(2, 16)
        s = random_oeis(rng, m, B)
        init = (rng.choice(m.states), rng.randint(1, B - 1))
        lo, hi, _ = oeis_bracket(m, s, B, init, "ceiling", ())
        assert lo == hi == oracle_probability(m, s, B, Config(*init), "ceiling")


class TestUnboundedPipeline:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_bracket_contains_truncations(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 3), rng.randint(1, 2))
        s = random_oeis(rng, m, INF, 2)
        init = (rng.choice(m.states), rng.randint(1, 4))
        targets = set(rng.sample(m.states, rng.randint(1, len(m.states))))
        v = verify_oeis(m, s, _query("selterm", targets, INF, init), FAST)
        prev = -1.0
        for h in (16, 64, 256):
            if h <= init[1]:
                continue
            t = truncated_selterm(m, s, h, init, targets)
            assert t >= prev - 1e-12
            assert t <= float(v.hi) + 1e-9
            prev = t

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_answer_consistent_with_bracket(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 3), rng.randint(1, 2))
        s = random_oeis(rng, m, INF, 2)
        init = (rng.choice(m.states), rng.randint(1, 4))
        theta = Fraction(rng.randint(0, 10), 10)
        v = verify_oeis(m, s, _query("selterm", set(m.states[:1]), INF, init, theta), FAST)
        assert v.lo <= v.hi
        if v.answer == YES:
            assert v.lo >= theta
        elif v.answer == NO:
            assert v.hi < theta
        else:
            assert v.answer == INCONCLUSIVE and v.lo < theta <= v.hi

    def test_reach_is_transformed(self, catalog):
        ex = catalog["fig2a"]
        v = verify(ex.model, ex.strategy, _query("reach", {"t'"}, INF, ("q", 1), Fraction(1, 100)))
        assert v.transformed and v.answer == NO
        assert v.lo <= Fraction(1, 128) <= v.hi


class TestCyclic:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_period_one_matches_oblivious(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 3), rng.randint(1, 2))
        row = random_row(rng, m)
        c = cis(PeriodicPartition(1, partition((1, 1))), [row])
        o = counter_oblivious(row, INF)
        q = _query("selterm", set(m.states[-1:]), INF, (m.states[0], rng.randint(1, 5)))
        vc, vo = verify_cis(m, c, q, FAST), verify_oeis(m, o, q, FAST)
        assert max(vc.lo, vo.lo) <= min(vc.hi, vo.hi) + 1e-12

    def test_rejects_bounded(self):
        rng = random.Random(3)
        m = random_model(rng, 2, 2)
        s = random_cis(rng, m, 2)
        with pytest.raises(ModelError):
            verify_cis(m, s, _query("selterm", m.states[:1], 5, (m.states[0], 1)))


class TestSmtExport:
    def test_script_shape(self, catalog):
        ex = catalog["fig4"]
        text = emit_verification_smt(ex.model, ex.strategies["uniform"], ex.query)
        assert "(check-sat)" in text and "declare-const" in text
