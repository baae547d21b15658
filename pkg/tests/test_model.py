import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocmdp.generators import random_model, random_oeis
from ocmdp.model import (
    INF,
    Config,
    ModelError,
    Objective,
    OcMdp,
    OneCounterChain,
    Query,
    absorb_targets,
    can_reach,
    induced_chain_bounded,
    oracle_probability,
    reach_probabilities,
    validate,
)
from ocmdp.strategies import counter_oblivious, dirac


class TestValidate:
    def test_fig1_is_valid(self, catalog):
        assert validate(catalog["fig1"].model) == []

    def test_smallest_model(self):
        m = OcMdp.build({("s", "a"): (0, {"s": 1})})
        assert validate(m) == []

    def test_half_distribution(self):
        m = OcMdp.build({("q", "a"): (0, {"q": Fraction(1, 2)})})
        bad = validate(m)
        assert len(bad) == 1 and "distribution sum" in bad[0] and "(q,a)" in bad[0]

    def test_deadlock_reported(self):
        m = OcMdp.build({("q", "a"): (0, {"p": 1})})
        assert any("deadlock at p" in v for v in validate(m))

    def test_weight_range(self):
        m = OcMdp.build({("q", "a"): (2, {"q": 1})})
        assert any("weight 2" in v for v in validate(m))

    def test_probabilities_become_fractions(self):
        m = OcMdp.build({("q", "a"): (0, {"q": "1/3", "p": "2/3"}), ("p", "a"): (-1, {"p": 1})})
        assert m.delta[("q", "a")]["q"] == Fraction(1, 3)
        assert validate(m) == []


class TestQuery:
    def test_init_counter_range(self):
        with pytest.raises(ModelError):
            Query(Objective("selterm", {"t"}), 3, Config("q", 4))

    def test_threshold_range(self):
        with pytest.raises(ModelError):
            Query(Objective("selterm", {"t"}), INF, Config("q", 1), Fraction(3, 2))

    def test_unknown_objective(self):
        with pytest.raises(ModelError):
            Objective("liveness", {"t"})

    def test_targets_checked_against_model(self, catalog):
        q = Query(Objective("selterm", {"nowhere"}), INF, Config("q", 1))
        with pytest.raises(ModelError):
            q.check_against(catalog["fig2a"].model)


class TestAbsorbTargets:
    def test_fig4_top_keeps_its_loop(self, catalog):
        m = catalog["fig4"].model
        out = absorb_targets(m, {"t_top"})
        assert out.delta[("t_top", "a")] == {"t_top": 1}
        assert out.weight[("t_top", "a")] == -1
        assert out.delta[("t_bot", "a")] == m.delta[("t_bot", "a")]

    def test_empty_target_is_identity(self, catalog):
        m = catalog["fig1"].model
        assert absorb_targets(m, set()) is m

    def test_fig1_target_weight_changes(self, catalog):
        m = catalog["fig1"].model
        assert m.weight[("q2", "a")] == 0
        out = absorb_targets(m, {"q2"})
        assert out.weight[("q2", "a")] == -1
        assert validate(out) == []

    def test_unknown_target(self, catalog):
        with pytest.raises(ModelError):
            absorb_targets(catalog["fig1"].model, {"zz"})

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_idempotent(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 4), rng.randint(1, 3))
        ts = set(rng.sample(m.states, rng.randint(0, len(m.states))))
        once = absorb_targets(m, ts)
        twice = absorb_targets(once, ts)
        assert once.transitions() == twice.transitions()
        assert once.enabled == twice.enabled


class TestInducedChain:
    def test_fig4_pure_a(self, catalog):
        ex = catalog["fig4"]
        s = ex.strategies["pure_a"]
        assert oracle_probability(ex.model, s, 3, Config("q", 2), "selterm", {"t_top"}) == Fraction(3, 4)

    def test_fig4_uniform(self, catalog):
        ex = catalog["fig4"]
        s = ex.strategies["uniform"]
        assert oracle_probability(ex.model, s, 3, Config("q", 2), "reach", {"t_top"}) == Fraction(25, 32)

    def test_bound_one_everything_absorbing(self, catalog):
        m = catalog["fig4"].model
        s = counter_oblivious({}, 1)
        chain = induced_chain_bounded(m, s, 1)
        for (q, k) in chain.states:
            assert chain.trans[(q, k)] == {(q, k): 1}
        probs = chain.reach([("t_top", 0)])
        assert set(probs.values()) <= {0, 1}

    def test_needs_finite_bound(self, catalog):
        ex = catalog["fig2a"]
        with pytest.raises(ModelError):
            induced_chain_bounded(ex.model, ex.strategy, INF)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_rows_sum_to_one(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 4), rng.randint(1, 3))
        B = rng.randint(1, 12)
        s = random_oeis(rng, m, B)
        chain = induced_chain_bounded(m, s, B)
        for row in chain.trans.values():
            assert sum(row.values()) == 1
            assert all(isinstance(p, Fraction) for p in row.values())

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_termination_and_ceiling_disjoint(self, seed):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 4), rng.randint(1, 3))
        B = rng.randint(2, 10)
        s = random_oeis(rng, m, B)
        init = Config(rng.choice(m.states), rng.randint(1, B - 1))
        sel = oracle_probability(m, s, B, init, "selterm", m.states)
        ceil = oracle_probability(m, s, B, init, "ceiling")
        assert 0 <= sel and 0 <= ceil and sel + ceil <= 1


class TestReachability:
    def test_gambler_ruin(self):
        trans = {0: {0: 1}, 4: {4: 1}}
        for k in (1, 2, 3):
            trans[k] = {k - 1: Fraction(1, 2), k + 1: Fraction(1, 2)}
        probs = reach_probabilities(trans, [0])
        assert probs[1] == Fraction(3, 4)
        assert probs[2] == Fraction(1, 2)
        assert probs[4] == 0

    def test_can_reach_ignores_zero_edges(self):
        trans = {"a": {"b": 0, "c": 1}, "b": {"b": 1}, "c": {"c": 1}}
        assert can_reach(trans, {"b"}) == {"b"}


class TestOneCounterChain:
    def test_violations(self):
        c = OneCounterChain(("q",), {"q": {("q", 2): Fraction(1, 2)}})
        bad = c.violations()
        assert any("sum" in v for v in bad) and any("update 2" in v for v in bad)

    def test_dirac_rows(self):
        assert dirac("a") == {"a": 1}
