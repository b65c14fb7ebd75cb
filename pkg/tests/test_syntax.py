from __future__ import annotations

import pytest

from chrkit.cli import corpus_names
from chrkit.omega_t import run
from chrkit.store import IdentifiedConstraint
from chrkit.syntax import ParseError, format_program, parse_program, parse_query, print_canonical
from chrkit.terms import TRUE, Atom, Compound, ConstraintAtom, Int, Var, make_atom


def test_simplification_normal_form():
    (r,) = parse_program("reflexivity @ leq(X,X) <=> true.").rules
    assert r.name == "reflexivity"
    assert r.kept == ()
    assert [h.symbol for h in r.removed] == ["leq"]
    assert r.guard == (TRUE,) and r.body == (TRUE,)
    x = r.removed[0].args[0]
    assert r.removed[0].args == (x, x)


def test_propagation_normal_form():
    (r,) = parse_program("p ==> q.").rules
    assert [h.symbol for h in r.kept] == ["p"] and r.removed == ()
    assert r.is_propagation


def test_simpagation_with_guard():
    (r,) = parse_program("remove_nonprime @ prime(A) \\ prime(B) <=> B mod A =:= 0 | true.").rules
    assert [h.symbol for h in r.kept] == ["prime"] and [h.symbol for h in r.removed] == ["prime"]
    (g,) = r.guard
    assert g.symbol == "=:=" and g.is_builtin
    a, b = r.kept[0].args[0], r.removed[0].args[0]
    assert g.args == (Compound("mod", (b, a)), Int(0))


def test_unnamed_rules_get_unique_names():
    prog = parse_program("rule_1 @ a <=> b.\nc <=> d.\ne <=> f.")
    names = [r.name for r in prog.rules]
    assert len(set(names)) == 3 and names[0] == "rule_1"


def test_priorities():
    prog = parse_program("1 :: p <=> q.\nr2 @ D+2 :: dist(V,D) ==> true.")
    assert prog.rules[0].priority == Int(1)
    assert isinstance(prog.rules[1].priority, Compound)
    assert prog.has_priorities


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("a <=> b.\na <=> ", ""),
        ("r @ a <=> b.\nr @ c <=> d.", "duplicate rule name"),
        ("<=> b.", ""),
        ("X+1 :: p(Y) <=> true.", "non-head variable"),
        ("p <=> q | r | s.", ""),
        ("p(X <=> q.", ""),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as info:
        parse_program(text)
    assert fragment in str(info.value)
    assert info.value.line >= 1


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_program("a <=> b.\nc <=> d(.\n")
    assert info.value.line == 2


def test_occurrence_order():
    prog = parse_program("r1 @ a(X), b(X) <=> true.\nr2 @ b(Y) \\ a(Y) <=> true.\nr3 @ a(Z) ==> c.")
    occ = prog.occurrences
    assert [(o.rule_index, o.head_index, o.removed) for o in occ[("a", 1)]] == [(0, 0, True), (1, 1, True), (2, 0, False)]
    assert [(o.rule_index, o.head_index) for o in occ[("b", 1)]] == [(0, 1), (1, 0)]
    total = sum(len(v) for v in occ.values())
    assert total == sum(len(r.heads) for r in prog.rules)


def test_rule_variables_are_scoped_to_their_rule():
    prog = parse_program("a(X) <=> b(X).\nc(Y) <=> d(X).")
    assert all(v.serial != Var("X").serial for r in prog.rules for v in r.head_vars)
    res = run(prog, parse_query("a(1), c(2)"))
    store = {c.atom.symbol: res.state.bindings.resolve(c.atom.args[0]) for c in res.state.store}
    assert store["b"] == Int(1)
    assert isinstance(store["d"], Var)  # the body-only X is local to the second rule


def test_query_shares_variables():
    goal = parse_query("leq(A,B), leq(B,C), leq(C,A)")
    assert len(goal) == 3 and all(a.symbol == "leq" for a in goal)
    assert goal[0].args[1] == goal[1].args[0] == Var("B")
    assert parse_query("") == []
    assert parse_query("upto(7)") == [make_atom("upto", (Int(7),))]


def test_query_builtins_classified():
    goal = parse_query("X = f(Y), Y is 1+2, c(X)")
    assert [a.is_builtin for a in goal] == [True, True, False]


def test_print_canonical():
    a = make_atom("leq", (Var("A"), Var("B")))
    assert print_canonical(a) == "leq(_G0,_G1)"
    store = [IdentifiedConstraint(make_atom("prime", (Int(3),)), 2), IdentifiedConstraint(make_atom("prime", (Int(2),)), 1)]
    assert print_canonical(store) == "prime(2)#1, prime(3)#2"
    assert print_canonical(Int(-4)) == "-4"
    assert print_canonical(Compound("-", (Compound("+", (Int(1), Int(2))), Int(3)))) == "1+2-3"
    assert print_canonical(Compound("-", (Int(1), Compound("+", (Int(2), Int(3)))))) == "1-(2+3)"
    assert print_canonical(Atom("hello world")) == "'hello world'"


@pytest.mark.parametrize("name", corpus_names())
def test_round_trip_corpus(name, corpus):
    prog = corpus(name)
    again = parse_program(format_program(prog))
    assert [r.name for r in again.rules] == [r.name for r in prog.rules]
    assert format_program(again) == format_program(prog)
    assert sorted(again.occurrences.items()) == sorted(prog.occurrences.items())


def test_round_trip_normal_forms():
    text = "a(X) \\ b(X,Y) <=> X > 1, Y == f(X) | c(Y), Z = X.\np ==> q.\n2 :: r(N) <=> N mod 2 =:= 0 | s(N-1)."
    prog = parse_program(text)
    again = parse_program(format_program(prog))
    for r1, r2 in zip(prog.rules, again.rules):
        assert (len(r1.kept), len(r1.removed), len(r1.guard), len(r1.body)) == (
            len(r2.kept),
            len(r2.removed),
            len(r2.guard),
            len(r2.body),
        )
        assert (r1.priority is None) == (r2.priority is None)
    assert format_program(again) == format_program(prog)


def test_constraint_declaration_and_comments():
    prog = parse_program("% a comment\nconstraints leq/2, unused/1.\nleq(X,X) <=> true.")
    assert ("unused", 1) in prog.constraints and ("leq", 2) in prog.constraints


def test_constraint_atom_key():
    assert ConstraintAtom("p", (Int(1), Int(2))).key == ("p", 2)
