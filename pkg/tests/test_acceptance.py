"""Acceptance criteria; each test prints one PASS/FAIL line."""

from __future__ import annotations

import random
import time
from collections import Counter

import networkx as nx
import pytest
import sympy

import properties as P
from chrkit.cli import corpus_names
from chrkit.canonical import normal_form_text, states_equivalent
from chrkit.confluence import CONFLUENT, NON_JOINABLE, check_confluence, replay_witness, witness_text
from chrkit.herbrand import eval_arith
from chrkit.omega_r_p import run_priority, run_refined
from chrkit.omega_t import APPLY, FAILED, FINAL, ExecutionState, Strategy, explore_all, run
from chrkit.syntax import parse_program, parse_query


def report(record, n: int, title: str, ok: bool, detail: str) -> None:
    record(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({detail})")
    assert ok, detail


def test_criterion_1_leq_cycle(corpus, acceptance):
    leq = corpus("leq")
    goal = parse_query("leq(A,B), leq(B,C), leq(C,A)")
    # expected final state: empty store, A = C, A = B
    expected = ExecutionState.initial(goal)
    A, B, C = expected.query_vars
    expected.goal = []
    expected.bindings.unify(A, C)
    expected.bindings.unify(A, B)
    t0 = time.perf_counter()
    results = {
        "refined": run_refined(leq, goal),
        "theoretical-first": run(leq, goal, Strategy.first()),
    }
    elapsed = time.perf_counter() - t0
    ok = all(r.status == FINAL and len(r.state.store) == 0 and states_equivalent(r.state, expected) for r in results.values())
    texts = {k: normal_form_text(r.state) for k, r in results.items()}
    report(acceptance, 1, "leq cycle collapses to A = B = C", ok and elapsed < 1.0, f"{texts}, {elapsed:.3f}s")


def test_criterion_2_primes(corpus, acceptance):
    primes = corpus("primes")
    t0 = time.perf_counter()
    wrong = []
    for n in range(2, 51):
        res = run_refined(primes, parse_query(f"upto({n})"))
        got = Counter(c.atom.args[0].value for c in res.state.store if c.atom.symbol == "prime")
        want = Counter(sympy.primerange(2, n + 1))
        if res.status != FINAL or got != want or len(res.state.store) != len(want):
            wrong.append(n)
    small = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = run_refined(primes, parse_query("upto(1000)"))
    big = time.perf_counter() - t0
    got = sorted(c.atom.args[0].value for c in res.state.store)
    big_ok = res.status == FINAL and got == list(sympy.primerange(2, 1001))
    ok = not wrong and small < 1.0 and big_ok and big < 5.0
    report(acceptance, 2, "primes match a sieve", ok, f"2..50 wrong={wrong} in {small:.2f}s, n=1000 ok={big_ok} in {big:.2f}s")


def test_criterion_3_coin(corpus, acceptance):
    ex = explore_all(corpus("coin"), parse_query("throw(Coin)"))
    ok = not ex.truncated and ex.texts == ["true ; Coin = head", "true ; Coin = tail"]
    report(acceptance, 3, "coin has two normal forms", ok, f"{ex.texts}")


def _random_graph(rng: random.Random) -> nx.DiGraph:
    n = rng.randint(1, 10)
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < 0.3:
                g.add_edge(u, v, weight=rng.randint(1, 9))
    return g


def test_criterion_4_dijkstra(corpus, acceptance):
    program = corpus("dijkstra")
    rng = random.Random(20240613)
    t0 = time.perf_counter()
    bad, violations, steps = [], 0, 0
    for k in range(25):
        g = _random_graph(rng)
        atoms = ["source(n0)"] + [f"edge(n{u},{d['weight']},n{v})" for u, v, d in sorted(g.edges(data=True))]
        res = run_priority(program, parse_query(", ".join(atoms)), audit=True)
        steps += res.steps
        violations += len(res.violations)
        b = res.state.bindings
        got = {}
        for c in res.state.store:
            if c.atom.symbol == "dist":
                node = b.resolve(c.atom.args[0]).name
                got.setdefault(node, []).append(eval_arith(c.atom.args[1], b))
        want = {f"n{v}": [d] for v, d in nx.single_source_dijkstra_path_length(g, 0).items()}
        if res.status != FINAL or got != want:
            bad.append(k)
    elapsed = time.perf_counter() - t0
    ok = not bad and violations == 0 and elapsed < 5.0
    report(
        acceptance,
        4,
        "prioritized Dijkstra matches shortest paths",
        ok,
        f"bad graphs={bad}, priority violations={violations}, {steps} steps, {elapsed:.2f}s",
    )


def _leq_query(rng: random.Random) -> str:
    args = ["A", "B", "C", "a", "b"]
    return ", ".join(f"leq({rng.choice(args)},{rng.choice(args)})" for _ in range(rng.randint(1, 4)))


def _boolean_query(rng: random.Random) -> str:
    args = ["X", "Y", "Z", "0", "1"]
    parts = []
    for _ in range(rng.randint(1, 3)):
        if rng.random() < 0.5:
            parts.append(f"neg({rng.choice(args)},{rng.choice(args)})")
        else:
            parts.append(f"and({rng.choice(args)},{rng.choice(args)},{rng.choice(args)})")
    if rng.random() < 0.4:
        parts.append(f"{rng.choice('XYZ')} = {rng.choice('01')}")
    return ", ".join(parts)


QUERIES = {"leq": _leq_query, "boolean": _boolean_query}

# Queries such as leq(A,A), leq(b,A) have infinite derivations under the
# theoretical semantics (transitivity keeps copying leq(A,A)), so their
# exploration is cut off, by expanded or by generated states; such a search
# must still have found exactly one final state.
AGREEMENT_FUEL = 5000
AGREEMENT_MAX_GENERATED = 10_000


def test_criterion_5_refined_agrees_with_exploration(corpus, acceptance):
    rng = random.Random(7)
    checked, mismatches, truncated = [], [], 0
    for name in corpus_names():
        program = corpus(name)
        if check_confluence(program).verdict != CONFLUENT:
            continue
        checked.append(name)
        gen = QUERIES[name]  # every confluent bundled program needs a query generator
        for _ in range(20):
            q = gen(rng)
            goal = parse_query(q)
            ref = run_refined(program, goal)
            ex = explore_all(program, goal, AGREEMENT_FUEL, max_generated=AGREEMENT_MAX_GENERATED)
            truncated += ex.truncated
            nfs = ex.normal_forms
            if ref.status not in (FINAL, FAILED) or len(nfs) != 1 or not states_equivalent(ref.state, nfs[0].state):
                mismatches.append((name, q, [nf.text for nf in nfs], normal_form_text(ref.state)))
    ok = bool(checked) and not mismatches
    report(
        acceptance,
        5,
        "refined run equals the unique normal form",
        ok,
        f"confluent programs={checked}, {20 * len(checked)} queries, truncated explorations={truncated}, mismatches={mismatches[:3]}",
    )


def test_criterion_6_confluence(corpus, acceptance):
    details, ok = [], True
    for name, program, want in (
        ("leq", corpus("leq"), CONFLUENT),
        ("p<=>q. p<=>r.", parse_program("p <=> q.\np <=> r.\n"), NON_JOINABLE),
        ("coin", corpus("coin"), NON_JOINABLE),
    ):
        t0 = time.perf_counter()
        rep = check_confluence(program)
        elapsed = time.perf_counter() - t0
        good = rep.verdict == want and elapsed < 2.0
        if want == NON_JOINABLE:
            for rec in rep.witnesses:
                for text, trace in rec.joinability.witness:
                    end = replay_witness(program, rec.pair, trace)
                    good = good and end.status == FINAL and witness_text(rec.pair, end) == text
            good = good and bool(rep.witnesses)
        ok = ok and good
        details.append(f"{name}: {rep.verdict} {elapsed:.2f}s")
    report(acceptance, 6, "confluence verdicts with replayable witnesses", ok, "; ".join(details))


def test_criterion_7_history_termination(corpus, acceptance):
    leq = corpus("leq")
    names = ["a", "b", "c", "d", "e"]
    rng = random.Random(5)
    worst, refires, unfinished = 0, 0, 0
    for trial in range(20):
        order = names[:]
        rng.shuffle(order)
        pairs = [(order[i], order[j]) for i in range(5) for j in range(i + 1, 5)]
        rng.shuffle(pairs)
        goal = parse_query(", ".join(f"leq({x},{y})" for x, y in pairs))
        runs = [run(leq, goal, Strategy.first()), run(leq, goal, Strategy.random(trial)), run_refined(leq, goal)]
        for res in runs:
            fired = Counter((t.rule, t.ids) for t in res.trace if t.kind == APPLY)
            refires += sum(k - 1 for k in fired.values())
            worst = max(worst, res.steps)
            unfinished += res.status != FINAL or res.steps > 10_000 or len(res.state.store) != 10
    ok = not unfinished and not refires
    report(acceptance, 7, "ground transitive closure terminates", ok, f"60 runs, max steps={worst}, refires={refires}")


@pytest.mark.parametrize("name", list(P.ALL))
def test_criterion_8_property_suites(name, acceptance):
    factory, key = P.ALL[name]
    before = P.CASES[key]
    factory(1000)()
    cases = P.CASES[key] - before
    report(acceptance, 8, f"property suite '{name}'", cases >= 1000, f"{cases} cases")

