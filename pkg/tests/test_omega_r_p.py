from __future__ import annotations

import pytest

from chrkit.canonical import normal_form_text
from chrkit.omega_r_p import (
    ACTIVATE,
    POP,
    REACTIVATE,
    audit_priority,
    run_priority,
    run_refined,
)
from chrkit.omega_t import (
    APPLY,
    FAILED,
    FINAL,
    INTRODUCE,
    OUT_OF_FUEL,
    ExecutionState,
    Transition,
    format_trace,
    replay,
)
from chrkit.syntax import parse_program, parse_query

DIJKSTRA_QUERY = "source(a), edge(a,1,b), edge(b,2,c), edge(a,5,c)"


def test_primes_upto_7(corpus):
    res = run_refined(corpus("primes"), parse_query("upto(7)"))
    assert res.status == FINAL
    assert normal_form_text(res.state) == "prime(2), prime(3), prime(5), prime(7)"


def test_leq_cycle(corpus):
    res = run_refined(corpus("leq"), parse_query("leq(A,B), leq(B,C), leq(C,A)"))
    assert res.status == FINAL
    assert normal_form_text(res.state) == "true ; B = A, C = A"


def test_propagation_fires_once():
    res = run_refined(parse_program("c ==> true."), parse_query("c"))
    assert format_trace(res.trace) == ["1 introduce c#1", "2 activate 1", "3 apply rule_1 [1] {}", "4 solve true", "5 pop 1"]


@pytest.mark.parametrize(
    "program, goal",
    [
        ("leq", "leq(A,B), leq(B,C), leq(C,A)"),
        ("primes", "upto(30)"),
        ("gcd", "gcd(9), gcd(6)"),
        ("boolean", "and(X,Y,Z), X = 1, Y = 1"),
        ("dijkstra", DIJKSTRA_QUERY),
    ],
)
def test_refined_trace_is_a_theoretical_derivation(program, goal, corpus):
    prog = corpus(program)
    res = run_refined(prog, parse_query(goal))
    end = replay(prog, ExecutionState.initial(parse_query(goal)), res.trace, strict=True)
    assert normal_form_text(end) == normal_form_text(res.state)


def _active_discipline(trace) -> None:
    """Every Apply involves the constraint on top of the activation stack."""
    stack: list[int] = []
    for ev in trace:
        if ev.kind in (ACTIVATE, REACTIVATE):
            stack.append(ev.cid)
        elif ev.kind == POP:
            assert stack and stack.pop() == ev.cid
        elif ev.kind == APPLY:
            assert stack and stack[-1] in ev.ids, ev
    assert not stack


@pytest.mark.parametrize("goal", ["upto(20)", "upto(2)"])
def test_active_constraint_discipline(goal, corpus):
    _active_discipline(run_refined(corpus("primes"), parse_query(goal)).trace)


def test_active_discipline_with_reactivation(corpus):
    _active_discipline(run_refined(corpus("leq"), parse_query("leq(A,B), leq(B,C), leq(C,A)")).trace)


def test_reactivation_in_ascending_order():
    prog = parse_program("p(a) ==> r.\nq(a) ==> s.")
    res = run_refined(prog, parse_query("q(A), p(A), A = a"))
    woken = [ev.cid for ev in res.trace if ev.kind == REACTIVATE]
    assert woken == [1, 2]
    assert normal_form_text(res.state) == "p(a), q(a), r, s ; A = a"


def test_refined_failure_and_fuel():
    res = run_refined(parse_program(""), parse_query("X = a, X = b"))
    assert res.status == FAILED
    res = run_refined(parse_program("p <=> p."), parse_query("p"), fuel=100)
    assert res.status == OUT_OF_FUEL


def test_deep_recursion_stays_off_the_call_stack():
    prog = parse_program("count(N) <=> N > 0 | M is N-1, count(M).\ncount(0) <=> true.")
    res = run_refined(prog, parse_query("count(5000)"), fuel=10**6)
    assert res.status == FINAL and normal_form_text(res.state) == "true"


# -- priority semantics


def test_dijkstra(corpus):
    res = run_priority(corpus("dijkstra"), parse_query("source(a), edge(a,1,b), edge(b,2,c)"), audit=True)
    assert res.status == FINAL and res.violations == []
    dists = sorted(normal_form_text(res.state).split(", "))
    assert [d for d in dists if d.startswith("dist")] == ["dist(a,0)", "dist(b,0+1)", "dist(c,0+1+2)"]


def test_dijkstra_keeps_only_the_shortest(corpus):
    res = run_priority(corpus("dijkstra"), parse_query(DIJKSTRA_QUERY), audit=True)
    assert res.violations == []
    dists = [c.atom for c in res.state.store if c.atom.symbol == "dist"]
    assert len(dists) == 3  # one per reachable node
    assert "dist(c,0+1+2)" in normal_form_text(res.state)


def test_static_priority_picks_higher():
    res = run_priority(parse_program("1 :: p <=> q.\n2 :: p <=> r."), parse_query("p"))
    assert normal_form_text(res.state) == "q"
    res = run_priority(parse_program("2 :: p <=> q.\n1 :: p <=> r."), parse_query("p"))
    assert normal_form_text(res.state) == "r"


def test_batch_mode_processes_goal_first():
    prog = parse_program("1 :: a, b <=> c.\n2 :: a ==> d.")
    res = run_priority(prog, parse_query("a, b"), audit=True)
    first_apply = next(i for i, ev in enumerate(res.trace) if ev.kind == APPLY)
    introduced = [ev for ev in res.trace[:first_apply] if ev.kind == INTRODUCE]
    assert len(introduced) == 2
    assert normal_form_text(res.state) == "c"
    assert res.violations == []


def test_audit_reports_violations():
    prog = parse_program("1 :: p <=> q.\n2 :: p <=> r.")
    goal = parse_query("p")
    bad = [Transition(INTRODUCE, atom=goal[0]), Transition(APPLY, rule=prog.rules[1].name, ids=(1,))]
    problems = audit_priority(prog, ExecutionState.initial(goal), bad)
    assert problems and "priority 1" in problems[0]


def test_dynamic_priority_error_fails_the_run():
    res = run_priority(parse_program("X :: p(X) <=> true."), parse_query("p(Y)"))
    assert res.status == FAILED
    assert "unbound variable" in res.state.error


def test_priority_trace_replays(corpus):
    prog = corpus("dijkstra")
    res = run_priority(prog, parse_query(DIJKSTRA_QUERY))
    end = replay(prog, ExecutionState.initial(parse_query(DIJKSTRA_QUERY)), res.trace, strict=True)
    assert normal_form_text(end) == normal_form_text(res.state)
