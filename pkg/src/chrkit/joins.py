"""Join ordering and rule-instance enumeration shared by all engines."""

from __future__ import annotations

from itertools import permutations
from typing import Iterator

from .herbrand import Bindings, GuardResult, compile_guard, match_args
from .store import Store
from .syntax import Program, Rule
from .terms import ConstraintAtom, Var, term_vars

# exhaustive plan search up to this many partner heads, greedy beyond
_EXHAUSTIVE_LIMIT = 6


def _bound_args(head: ConstraintAtom, bound: set[Var]) -> int:
    return sum(1 for a in head.args if all(v in bound for v in term_vars(a)))


def _head_vars(head: ConstraintAtom) -> set[Var]:
    return {v for a in head.args for v in term_vars(a)}


def fan_out(program: Program | None, head: ConstraintAtom) -> int:
    if program is None:
        return 0
    return len(program.occurrences.get(head.key, ()))


def plan_cost(rule: Rule, active: int | None, plan, program: Program | None = None) -> tuple:
    """Cost vector of a lookup order: per step, (-bound args, fan-out)."""
    bound = _head_vars(rule.heads[active]) if active is not None else set()
    cost = []
    for i in plan:
        h = rule.heads[i]
        cost.append((-_bound_args(h, bound), fan_out(program, h)))
        bound |= _head_vars(h)
    return tuple(cost)


def order_partners(rule: Rule, active: int | None, program: Program | None = None) -> tuple[int, ...]:
    """Lookup order for the heads other than ``active``.

    Heads with more arguments already fixed by earlier heads go first, then
    symbols with fewer program occurrences; textual order breaks ties.
    """
    rest = [i for i in range(len(rule.heads)) if i != active]
    if len(rest) <= _EXHAUSTIVE_LIMIT:
        return min(permutations(rest), key=lambda p: (plan_cost(rule, active, p, program), p), default=())
    bound = _head_vars(rule.heads[active]) if active is not None else set()
    plan = []
    while rest:
        nxt = min(
            rest,
            key=lambda i: (-_bound_args(rule.heads[i], bound), fan_out(program, rule.heads[i]), i),
        )
        plan.append(nxt)
        rest.remove(nxt)
        bound |= _head_vars(rule.heads[nxt])
    return tuple(plan)


class JoinPlans:
    """Per-program cache of lookup orders, keyed by (rule index, active head)."""

    def __init__(self, program: Program) -> None:
        self.program = program
        self._plans: dict[tuple[int, int | None], tuple[int, ...]] = {}

    def get(self, rule_index: int, active: int | None) -> tuple[int, ...]:
        key = (rule_index, active)
        plan = self._plans.get(key)
        if plan is None:
            rule = self.program.rules[rule_index]
            if active is None:
                plan = (0,) + order_partners(rule, 0, self.program)
            else:
                plan = order_partners(rule, active, self.program)
            self._plans[key] = plan
        return plan


def _fresh_levels(heads, plan, seed: int | None) -> list[bool]:
    """Per plan level: the head's arguments are distinct variables not bound before it."""
    bound = _head_vars(heads[seed]) if seed is not None else set()
    out = []
    for pos in plan:
        args = heads[pos].args
        out.append(
            all(a.__class__ is Var for a in args) and len(set(args)) == len(args) and not bound.intersection(args)
        )
        bound |= _head_vars(heads[pos])
    return out


def iter_matches(
    rule: Rule,
    plan: tuple[int, ...],
    store: Store,
    b: Bindings,
    seed: tuple[int, int] | None = None,
    *,
    check_history: bool = True,
    check_guards: bool = True,
) -> Iterator[tuple[tuple[int, ...], dict]]:
    """Enumerate applicable instances of ``rule`` lazily.

    Yields ``(ids, theta)`` with ``ids`` in head order (kept then removed).
    ``seed`` fixes head ``seed[0]`` to constraint ``seed[1]``.  Candidate
    lists are snapshots taken when a level is entered; liveness of every
    chosen constraint is re-checked before each yield, so the store may be
    mutated between iterations.
    """
    heads = rule.heads
    n = len(heads)
    chosen: list[int | None] = [None] * n
    live = store.live
    theta: dict = {}
    if seed is not None:
        pos, cid = seed
        c = live.get(cid)
        if c is None:
            return
        h = heads[pos]
        if c.atom.key != h.key or not match_args(h.args, c.atom.args, b, theta):
            return
        chosen[pos] = cid
    name = rule.name
    guard = compile_guard(rule.guard)
    check_guards = check_guards and not rule.trivial_guard
    # a tuple containing a removed head can never be offered twice
    check_history = check_history and rule.is_propagation
    history = store.history
    holds = GuardResult.HOLDS
    last = len(plan) - 1
    fresh = _fresh_levels(heads, plan, seed[0] if seed is not None else None)
    contains = live.__contains__

    def rec(level: int, theta: dict) -> Iterator[tuple[tuple[int, ...], dict]]:
        if level > last:
            # every head fixed by the seed
            ids = tuple(chosen)  # type: ignore[arg-type]
            if check_history and history.contains(name, ids):
                return
            if check_guards and guard(theta, b) is not holds:
                return
            yield ids, theta
            return
        pos = plan[level]
        h = heads[pos]
        hargs = h.args
        for cid in store.candidate_ids(h, b, theta):
            if cid in chosen:
                continue
            c = live.get(cid)
            if c is None:
                continue
            t2 = dict(theta)
            if fresh[level]:
                # distinct unbound variables: matching cannot fail
                for v, a in zip(hargs, c.atom.args):
                    t2[v] = b.deref(a)
            elif not match_args(hargs, c.atom.args, b, t2):
                continue
            chosen[pos] = cid
            if level == last:
                ids = tuple(chosen)  # type: ignore[arg-type]
                if all(map(contains, ids)) and not (check_history and history.contains(name, ids)):
                    if not check_guards or guard(t2, b) is holds:
                        yield ids, t2
            else:
                yield from rec(level + 1, t2)
            chosen[pos] = None
            # an earlier choice may have been removed while we were suspended
            for prev in chosen:
                if prev is not None and prev not in live:
                    return

    yield from rec(0, theta)


def match_instance(rule: Rule, ids: tuple[int, ...], store: Store, b: Bindings) -> dict | None:
    """Matching substitution of ``rule`` against the given constraints, if any."""
    if len(ids) != len(rule.heads) or len(set(ids)) != len(ids):
        return None
    theta: dict = {}
    for h, cid in zip(rule.heads, ids):
        c = store.live.get(cid)
        if c is None or c.atom.key != h.key or not match_args(h.args, c.atom.args, b, theta):
            return None
    return theta
