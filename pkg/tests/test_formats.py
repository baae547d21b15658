import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocmdp.formats import (
    dump_model,
    dump_query,
    dump_strategy,
    parse_bound,
    parse_model,
    parse_query,
    parse_strategy,
)
from ocmdp.generators import random_cis, random_model, random_oeis
from ocmdp.model import INF, Config, ModelError, Objective, Query
from ocmdp.strategies import CIS


def _same_strategy(a, b):
    return a.kind == b.kind and a.base == b.base and a.table == b.table


class TestModelFormat:
    def test_parse(self):
        m = parse_model("# fair walk\nstates q\ntrans q up +1 : q 1\ntrans q down -1 : q 1\n")
        assert m.enabled["q"] == ("up", "down") or set(m.enabled["q"]) == {"up", "down"}
        assert m.weight[("q", "down")] == -1

    def test_invalid_distribution(self):
        with pytest.raises(ModelError, match="distribution sum"):
            parse_model("trans q a 0 : q 1/2\n")

    def test_unchecked(self):
        m = parse_model("trans q a 0 : q 1/2\n", check=False)
        assert m.delta[("q", "a")] == {"q": Fraction(1, 2)}

    @pytest.mark.parametrize(
        "text,line",
        [
            ("states q\nbogus q\n", 2),
            ("states q\n\ntrans q a x : q 1\n", 3),
            ("trans q a 0 q 1\n", 1),
            ("trans q a 0 : q one\n", 1),
            ("trans q a 0 : q\n", 1),
            ("trans q a 0 : q 1\ntrans q a 0 : q 1\n", 2),
        ],
    )
    def test_errors_name_the_line(self, text, line):
        with pytest.raises(ModelError, match=f"line {line}"):
            parse_model(text)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_round_trip(self, seed):
        m = random_model(random.Random(seed), random.Random(seed).randint(1, 5), 3)
        again = parse_model(dump_model(m))
        assert again.states == m.states
        assert again.transitions() == m.transitions()


class TestQueryFormat:
    def test_round_trip(self):
        q = Query(Objective("reach", frozenset({"t", "u"})), INF, Config("q", 3), Fraction(2, 3))
        assert parse_query(dump_query(q)) == q

    def test_defaults_threshold(self):
        q = parse_query("objective: selterm\ntargets: t\nbound: 5\ninit: q 1\n")
        assert q.threshold == 0 and q.bound == 5

    def test_missing_key(self):
        with pytest.raises(ModelError, match="init"):
            parse_query("objective: selterm\ntargets: t\nbound: 5\n")

    def test_bad_init(self):
        with pytest.raises(ModelError, match="line 4"):
            parse_query("objective: selterm\ntargets: t\nbound: 5\ninit: q\n")

    def test_not_key_value(self):
        with pytest.raises(ModelError, match="line 2"):
            parse_query("objective: selterm\ntargets t\n")

    def test_bad_threshold(self):
        with pytest.raises(ModelError, match="line 5"):
            parse_query("objective: selterm\ntargets: t\nbound: 5\ninit: q 1\nthreshold: half\n")

    def test_bound(self):
        assert parse_bound("inf") == INF and parse_bound(" 7 ") == 7
        with pytest.raises(ModelError):
            parse_bound("lots")


class TestStrategyFormat:
    def test_catalog_round_trip(self, catalog):
        for ex in catalog.values():
            for s in ex.strategies.values():
                assert _same_strategy(parse_strategy(dump_strategy(s), ex.model), s)

    def test_omitted_single_action_rows(self, catalog):
        ex = catalog["fig4"]
        s = parse_strategy("kind: oeis\npartition: 1-2\ninterval 1-2\n  q: a 1/2, b 1/2\n", ex.model)
        assert s.table[0]["t_top"] == {"a": 1}

    def test_cis(self):
        s = parse_strategy("kind: cis\nperiod: 2\nwindow: 1-1,2-2\ninterval 1-1\n  q: a\ninterval 2-2\n  q: b\n")
        assert s.kind == CIS and s.period == 2

    @pytest.mark.parametrize(
        "text,msg",
        [
            ("kind: oeis\npartition: 1-2\ninterval 1-2\n  q: a 1/2 b\n", "line 4"),
            ("kind: oeis\npartition: 1-2\ninterval 1-2\n  q: a\n  q: b\n", "line 5"),
            ("kind: oeis\npartition: 1-2\ninterval 1-1\n  q: a\n", "line 3"),
            ("kind: oeis\npartition: 1-2\ninterval 1-2\n  q a\n", "line 4"),
            ("kind: oeis\npartition: 1-1,2-2\ninterval 1-1\n  q: a\n", "1 interval blocks"),
            ("kind: wobbly\npartition: 1-2\n", "unknown strategy kind"),
            ("kind: cis\nwindow: 1-2\ninterval 1-2\n  q: a\n", "period"),
        ],
    )
    def test_errors(self, text, msg):
        with pytest.raises(ModelError, match=msg):
            parse_strategy(text)

    def test_checked_against_model(self, catalog):
        ex = catalog["fig4"]
        with pytest.raises(ModelError, match="not enabled"):
            parse_strategy("kind: oeis\npartition: 1-2\ninterval 1-2\n  q: c\n", ex.model)
        with pytest.raises(ModelError, match="sums to"):
            parse_strategy("kind: oeis\npartition: 1-2\ninterval 1-2\n  q: a 1/2, b 1/4\n", ex.model)
        with pytest.raises(ModelError, match="no row"):
            parse_strategy("kind: oeis\npartition: 1-2\ninterval 1-2\n", ex.model)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.booleans())
    def test_random_round_trip(self, seed, cyclic):
        rng = random.Random(seed)
        m = random_model(rng, rng.randint(1, 4), 3)
        s = random_cis(rng, m, rng.randint(1, 5)) if cyclic else random_oeis(rng, m, rng.choice([INF, rng.randint(2, 40)]))
        assert _same_strategy(parse_strategy(dump_strategy(s), m), s)
