import shutil
import sys
from fractions import Fraction

import pytest

from ocmdp.model import Query
from ocmdp.partitions import PeriodicPartition, partition
from ocmdp.smt import (
    SmtProblem,
    parse_model,
    realisability_problem,
    run_solver,
    smt_name,
    verification_problem,
    z_var,
)
from ocmdp.strategies import enumerate_supports


def _fake_solver(tmp_path, reply):
    script = tmp_path / "solver.py"
    script.write_text(f"import sys\nsys.stdin.read()\nprint({reply!r})\n")
    return f"{sys.executable} {script}"


def _with_theta(q, theta):
    return Query(q.objective, q.bound, q.init, Fraction(theta))


class TestNames:
    def test_plain(self):
        assert smt_name(z_var(0, "q", "a")) == "z_j0_q_a"

    def test_nested_nodes(self):
        assert smt_name(("x", "", ("q", 1), ("p", 2))) == "x__q@1_p@2"

    def test_quoting(self):
        prob = SmtProblem(outer=[("z", "j0", "t'", "c")], goal=({}, ">=", {}))
        assert "(declare-const |z_j0_t'_c| Real)" in prob.render()


class TestVerificationProblem:
    def test_structure(self, catalog):
        ex = catalog["fig4"]
        text = verification_problem(ex.model, ex.strategies["uniform"], ex.query).render(negated=True)
        assert text.startswith("; verification: selterm")
        assert "(set-logic QF_NRA)" in text
        assert text.count("(check-sat)") == 1 and text.rstrip().endswith("(get-model)")
        assert "(< y_q@2 (/ 25.0 32.0))" in text

    def test_exact_assignment(self, catalog):
        ex = catalog["fig4"]
        prob = verification_problem(ex.model, ex.strategies["uniform"], ex.query)
        val = prob.assignment({})
        assert val[prob.init] == Fraction(25, 32)
        assert prob.evaluate(val)[0]
        assert not prob.evaluate(val, negated=True)[0]

    def test_below_threshold(self, catalog):
        ex = catalog["fig4"]
        prob = verification_problem(ex.model, ex.strategies["pure_a"], ex.query)
        ok, failed = prob.evaluate(prob.assignment({}))
        assert not ok and failed == ["(>= y_q@2 (/ 25.0 32.0))"]

    def test_zero_threshold_is_trivial(self, catalog):
        ex = catalog["fig4"]
        prob = verification_problem(ex.model, ex.strategies["pure_b"], _with_theta(ex.query, 0))
        assert prob.goal[2] == {}
        assert prob.evaluate(prob.assignment({}))[0]

    def test_symbolic_strategy(self, catalog):
        ex = catalog["fig4"]
        prob = verification_problem(ex.model, ex.strategies["uniform"], ex.query, symbolic=True)
        assert z_var(0, "q", "a") in prob.outer
        assert (({(z_var(0, "q", "a"),): 1}, "=", {(): Fraction(1, 2)})) in prob.strat


class TestRealisabilityProblem:
    def test_supports_make_it_existential(self, catalog):
        ex = catalog["fig4"]
        p = partition((1, 2))
        supp = next(iter(enumerate_supports(p, ex.model)))
        text = realisability_problem(ex.model, ex.query, p, supp.supports).render()
        assert "forall" not in text

    def test_free_supports_are_quantified(self, catalog):
        ex = catalog["fig4"]
        text = realisability_problem(ex.model, ex.query, partition((1, 2))).render(quantified=True)
        assert "(set-logic NRA)" in text and "(assert (forall (" in text

    def test_cyclic(self, catalog):
        ex = catalog["fig2a"]
        prob = realisability_problem(ex.model, ex.query, PeriodicPartition(2, partition((1, 2))))
        assert prob.comment.startswith("cyclic realisability: period 2")
        assert prob.outer and prob.inner


class TestModels:
    def test_parse(self):
        text = """sat
(
  (define-fun z_j0_q_a () Real
    (/ 1.0 3.0))
  (define-fun |z_j0_t'_c| () Real 1.0)
  (define-fun neg () Real (- (/ 1.0 4.0)))
)"""
        assert parse_model(text) == {"z_j0_q_a": Fraction(1, 3), "z_j0_t'_c": Fraction(1), "neg": Fraction(-1, 4)}

    def test_ignores_algebraic_values(self):
        text = "(define-fun x () Real (root-obj (+ (^ x 2) (- 2)) 2))"
        assert parse_model(text) == {}

    def test_fake_solver_sat(self, tmp_path):
        cmd = _fake_solver(tmp_path, "sat\n((define-fun x () Real 0.5))")
        ans = run_solver("(check-sat)\n", cmd)
        assert ans.status == "sat" and ans.model == {"x": Fraction(1, 2)}

    def test_fake_solver_unsat(self, tmp_path):
        assert run_solver("(check-sat)\n", _fake_solver(tmp_path, "unsat")).status == "unsat"

    def test_missing_solver(self):
        assert run_solver("(check-sat)\n", "/nonexistent/solver").status == "error"

    @pytest.mark.skipif(shutil.which("z3") is None, reason="no z3 on PATH")
    def test_real_solver(self, catalog):
        ex = catalog["fig4"]
        text = verification_problem(ex.model, ex.strategies["uniform"], ex.query).render(negated=True)
        assert run_solver(text, "z3 -in").status == "unsat"
