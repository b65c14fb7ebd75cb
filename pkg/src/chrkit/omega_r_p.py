"""Production engines: the refined semantics and the priority semantics.

Both engines share the store, matcher and transition helpers of the
theoretical interpreter, so every Solve/Introduce/Apply they record is a
valid theoretical transition and can be replayed with ``omega_t.replay``.

The refined engine keeps its activation stack on the heap: each frame is a
generator that yields a child frame when it needs one to run to completion
first (a rule body, an activation, a reactivation).  Deep recursion in CHR
programs therefore never touches the Python call stack.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator

from .herbrand import EvaluationError, eval_arith
from .joins import iter_matches, match_instance, order_partners
from .omega_t import (
    APPLY,
    FAILED,
    FINAL,
    INTRODUCE,
    OUT_OF_FUEL,
    RUNNING,
    SOLVE,
    ExecutionState,
    RunResult,
    Transition,
    _initial,
    _take_goal,
    apply_label,
    fire,
    solve_step,
    step,
)
from .syntax import Program, Rule, format_term
from .terms import ConstraintAtom, Int, Term, term_vars

__all__ = [
    "ACTIVATE",
    "REACTIVATE",
    "POP",
    "SCHEDULE",
    "DEFAULT_ENGINE_FUEL",
    "PriorityRunResult",
    "audit_priority",
    "order_partners",
    "run_priority",
    "run_refined",
]

log = logging.getLogger(__name__)

ACTIVATE = "activate"
REACTIVATE = "reactivate"
POP = "pop"
SCHEDULE = "schedule"

# transitions, not explored states; the production engines are cheap per step
DEFAULT_ENGINE_FUEL = 100_000


class _OutOfFuel(Exception):
    pass


class _Engine:
    def __init__(self, program: Program, state: ExecutionState, fuel: int) -> None:
        self.program = program
        self.state = state
        self.fuel = fuel
        self.steps = 0
        self.trace: list[Transition] = []

    def tick(self) -> None:
        if self.steps >= self.fuel:
            raise _OutOfFuel
        self.steps += 1

    def solve(self, atom: ConstraintAtom) -> list[int]:
        self.tick()
        _take_goal(self.state, atom)
        affected = solve_step(self.state, atom)
        self.trace.append(Transition(SOLVE, atom=atom))
        return affected

    def introduce(self, atom: ConstraintAtom) -> int:
        self.tick()
        _take_goal(self.state, atom)
        cid = self.state.store.introduce(atom, self.state.bindings)
        self.trace.append(Transition(INTRODUCE, atom=atom, cid=cid))
        return cid

    def apply(self, rule: Rule, ids: tuple[int, ...], theta: dict) -> list[ConstraintAtom]:
        self.tick()
        body = fire(self.state, rule, ids, theta)
        self.state.goal[0:0] = body
        self.trace.append(apply_label(rule, ids, theta))
        return body

    def result(self, status: str) -> RunResult:
        if status == RUNNING:
            status = FINAL
        self.state.status = status
        return RunResult(status, self.state, self.trace, self.steps)


# ---------------------------------------------------------------------------
# refined semantics


class _Refined(_Engine):
    def goals(self, atoms: list[ConstraintAtom]) -> Iterator:
        """Execute ``atoms`` left to right, each to completion."""
        state = self.state
        for a in atoms:
            if state.status != RUNNING:
                return
            if a.is_builtin:
                affected = self.solve(a)
                if state.status != RUNNING:
                    return
                for cid in affected:
                    yield self.activate(cid, REACTIVATE)
            else:
                cid = self.introduce(a)
                yield self.activate(cid, ACTIVATE)

    def activate(self, cid: int, kind: str) -> Iterator:
        """Try every occurrence of constraint ``cid`` in program order."""
        state = self.state
        store = state.store
        c = store.live.get(cid)
        if c is None:
            return
        self.trace.append(Transition(kind, cid=cid))
        rules = self.program.rules
        plans = self.program.join_plans
        for occ in self.program.occurrences.get(c.atom.key, ()):
            rule = rules[occ.rule_index]
            plan = plans.get(occ.rule_index, occ.head_index)
            matches = iter_matches(rule, plan, store, state.bindings, (occ.head_index, cid))
            while True:
                found = next(matches, None)
                if found is None:
                    break
                before = (store.next_id, state.bindings.generation)
                body = self.apply(rule, *found)
                yield self.goals(body)
                if state.status != RUNNING:
                    return
                if cid not in store.live:
                    self.trace.append(Transition(POP, cid=cid, note="removed"))
                    return
                if before != (store.next_id, state.bindings.generation):
                    # new constraints or bindings may enable instances already passed over
                    matches = iter_matches(rule, plan, store, state.bindings, (occ.head_index, cid))
                # otherwise the body only removed constraints, which cannot enable
                # a rejected instance, so the search continues where it stopped
        self.trace.append(Transition(POP, cid=cid))


def _drive(root: Iterator, state: ExecutionState) -> None:
    stack = [root]
    while stack:
        try:
            child = next(stack[-1])
        except StopIteration:
            stack.pop()
            continue
        if state.status != RUNNING:
            return
        stack.append(child)


def run_refined(
    program: Program,
    goal,
    fuel: int = DEFAULT_ENGINE_FUEL,
    *,
    occurs_check: bool = False,
) -> RunResult:
    """Run ``goal`` under the refined semantics.

    Goal atoms are executed left to right.  An active constraint tries its
    occurrences in program order; when a rule fires its body runs at once,
    and the active constraint then resumes at the same occurrence unless it
    was removed.  The partner search restarts from the beginning unless the
    body only removed constraints.  A Solve reactivates, in ascending id order, the live
    constraints attached to the variables it bound.
    """
    if program.has_priorities:
        log.warning("rule priorities are ignored under the refined semantics")
    state = _initial(program, goal, occurs_check)
    eng = _Refined(program, state, fuel)
    try:
        _drive(eng.goals(list(state.goal)), state)
    except _OutOfFuel:
        return eng.result(OUT_OF_FUEL)
    return eng.result(state.status)


# ---------------------------------------------------------------------------
# priority semantics


class PriorityError(EvaluationError):
    pass


def _static_priority(rule: Rule, default: int) -> int | None:
    """Integer priority of ``rule``, or None when it depends on head variables."""
    p = rule.priority
    if p is None:
        return default
    if any(True for _ in term_vars(p)):
        return None
    try:
        return eval_arith(p, _NO_BINDINGS)
    except EvaluationError as e:
        raise PriorityError(f"rule {rule.name}: priority {format_term(p)}: {e}") from None


class _Unbound:
    """Bindings stand-in for evaluating ground priority expressions."""

    def deref(self, t: Term) -> Term:
        return t


_NO_BINDINGS = _Unbound()


def instance_priority(rule: Rule, theta: dict, b, default: int = 1) -> int:
    """Priority of one rule instance; dynamic priorities are evaluated under ``theta``."""
    p = rule.priority
    if p is None:
        return default
    if p.__class__ is Int:
        return p.value
    try:
        return eval_arith(p, b, theta)
    except EvaluationError as e:
        raise PriorityError(f"rule {rule.name}: priority {format_term(p)}: {e}") from None


@dataclass
class PriorityRunResult(RunResult):
    violations: list[str] = field(default_factory=list)


class _Priority(_Engine):
    def __init__(self, program: Program, state: ExecutionState, fuel: int, default: int) -> None:
        super().__init__(program, state, fuel)
        self.default = default
        self.static = [_static_priority(r, default) for r in program.rules]
        self.heap: list = []  # ((priority, rule index, seq), cid, occurrence)
        self.dynamic: list = []  # (seq, cid, occurrence)
        self.seq = itertools.count()

    def schedule(self, cid: int) -> None:
        c = self.state.store.live.get(cid)
        if c is None:
            return
        rules = self.program.rules
        for occ in self.program.occurrences.get(c.atom.key, ()):
            seq = next(self.seq)
            p = self.static[occ.rule_index]
            rule = rules[occ.rule_index]
            if p is None:
                self.dynamic.append((seq, cid, occ))
                label = format_term(rule.priority)
            else:
                heapq.heappush(self.heap, ((p, occ.rule_index, seq), cid, occ))
                label = str(p)
            self.trace.append(Transition(f"{SCHEDULE}({label})", cid=cid, note=rule.name))

    def batch(self) -> None:
        """Process the whole goal before any rule may fire."""
        state = self.state
        while state.goal and state.status == RUNNING:
            a = state.goal[0]
            if a.is_builtin:
                for cid in self.solve(a):
                    self.schedule(cid)
            else:
                self.schedule(self.introduce(a))

    def _instances(self, cid: int, occ) -> Iterator[tuple[tuple[int, ...], dict]]:
        rule = self.program.rules[occ.rule_index]
        plan = self.program.join_plans.get(occ.rule_index, occ.head_index)
        return iter_matches(rule, plan, self.state.store, self.state.bindings, (occ.head_index, cid))

    def select(self):
        """Highest-priority applicable instance among the pending entries."""
        live = self.state.store.live
        best = None
        heap = self.heap
        while heap:
            key, cid, occ = heap[0]
            found = next(self._instances(cid, occ), None) if cid in live else None
            if found is None:
                heapq.heappop(heap)
                continue
            best = (key, occ, found)
            break
        keep = []
        b = self.state.bindings
        for entry in self.dynamic:
            seq, cid, occ = entry
            if cid not in live:
                continue
            rule = self.program.rules[occ.rule_index]
            any_found = False
            for ids, theta in self._instances(cid, occ):
                any_found = True
                key = (instance_priority(rule, theta, b, self.default), occ.rule_index, seq)
                if best is None or key < best[0]:
                    best = (key, occ, (ids, theta))
            if any_found:
                keep.append(entry)
        self.dynamic = keep
        return best

    def run(self) -> None:
        state = self.state
        rules = self.program.rules
        self.batch()
        while state.status == RUNNING:
            chosen = self.select()
            if chosen is None:
                return
            _, occ, (ids, theta) = chosen
            self.apply(rules[occ.rule_index], ids, theta)
            self.batch()


def run_priority(
    program: Program,
    goal,
    fuel: int = DEFAULT_ENGINE_FUEL,
    *,
    default_priority: int = 1,
    audit: bool = False,
    occurs_check: bool = False,
) -> PriorityRunResult:
    """Run ``goal`` under the priority semantics, in batch mode.

    Lower numbers mean higher priority; rules without a priority get
    ``default_priority``.  Ties go to the textually earlier rule, then to the
    earlier scheduled entry.  A dynamic priority that does not evaluate to an
    integer ends the run in a failed state carrying an error message.  With
    ``audit`` the finished trace is replayed and checked by
    :func:`audit_priority`.
    """
    state = _initial(program, goal, occurs_check)
    start = state.copy()
    try:
        eng = _Priority(program, state, fuel, default_priority)
    except PriorityError as e:
        state.status, state.error = FAILED, str(e)
        return PriorityRunResult(FAILED, state, [], 0)
    try:
        eng.run()
        status = state.status
    except _OutOfFuel:
        status = OUT_OF_FUEL
    except PriorityError as e:
        state.error = str(e)
        status = FAILED
    res = eng.result(status)
    out = PriorityRunResult(res.status, res.state, res.trace, res.steps)
    if audit:
        out.violations = audit_priority(program, start, res.trace, default_priority=default_priority)
    return out


def audit_priority(program: Program, start, trace, *, default_priority: int = 1) -> list[str]:
    """Replay ``trace`` and report every Apply that broke the priority discipline.

    At each Apply the replayed pre-state must have an empty goal, and no
    applicable instance of any rule may have a smaller priority number than
    the instance that fired.
    """
    state = start.copy() if isinstance(start, ExecutionState) else ExecutionState.initial(start)
    plans = program.join_plans
    problems: list[str] = []
    for i, label in enumerate(trace, 1):
        if not label.is_transition:
            continue
        if label.kind == APPLY:
            rule = program.rule(label.rule)
            theta = match_instance(rule, label.ids, state.store, state.bindings)
            if theta is None:
                problems.append(f"step {i}: {label.rule} {list(label.ids)} does not match")
                break
            if state.goal:
                problems.append(f"step {i}: {label.rule} fired with {len(state.goal)} goal atoms pending")
            p = instance_priority(rule, theta, state.bindings, default_priority)
            for ri, other in enumerate(program.rules):
                for ids, th in iter_matches(other, plans.get(ri, None), state.store, state.bindings):
                    q = instance_priority(other, th, state.bindings, default_priority)
                    if q < p:
                        problems.append(
                            f"step {i}: {label.rule} (priority {p}) fired while "
                            f"{other.name} {list(ids)} (priority {q}) was applicable"
                        )
                        break
        step(state, program, label)
    return problems
