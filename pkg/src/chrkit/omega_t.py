"""Reference interpreter for the theoretical operational semantics.

A state is ``<goal, store, builtins, history>`` plus the id counter kept
inside the store.  Three transitions exist: Solve a built-in from the goal,
Introduce a CHR constraint from the goal, Apply a rule instance.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .canonical import normal_form_text, state_key, states_equivalent
from .herbrand import Bindings, SolveOutcome, guard_holds, instantiate_atom, solve
from .joins import iter_matches, match_instance
from .store import Store
from .syntax import Program, Rule, VarNamer, format_atom, format_term
from .terms import ConstraintAtom, Var, atom_vars

RUNNING = "running"
FINAL = "final"
FAILED = "failed"
OUT_OF_FUEL = "out_of_fuel"

SOLVE = "solve"
INTRODUCE = "introduce"
APPLY = "apply"

DEFAULT_RUN_FUEL = 10_000
DEFAULT_EXPLORE_FUEL = 100_000


@dataclass(frozen=True)
class Transition:
    """A trace event.  Solve/Introduce/Apply labels replay deterministically.

    Fields marked ``compare=False`` are annotations filled in when the
    event is recorded.
    """

    kind: str
    atom: ConstraintAtom | None = None
    rule: str | None = None
    ids: tuple[int, ...] = ()
    n_kept: int = 0
    cid: int | None = field(default=None, compare=False)
    theta: tuple = field(default=(), compare=False)
    note: str = field(default="", compare=False)

    @property
    def kept_ids(self) -> tuple[int, ...]:
        return self.ids[: self.n_kept]

    @property
    def removed_ids(self) -> tuple[int, ...]:
        return self.ids[self.n_kept :]

    @property
    def is_transition(self) -> bool:
        return self.kind in (SOLVE, INTRODUCE, APPLY)


@dataclass
class ExecutionState:
    goal: list[ConstraintAtom]
    store: Store
    bindings: Bindings
    query_vars: tuple[Var, ...] = ()
    status: str = RUNNING
    error: str | None = None

    @classmethod
    def initial(
        cls,
        goal: Iterable[ConstraintAtom],
        *,
        occurs_check: bool = False,
        query_vars: Sequence[Var] | None = None,
    ) -> ExecutionState:
        goal = list(goal)
        qv = tuple(atom_vars(goal)) if query_vars is None else tuple(query_vars)
        return cls(goal, Store(), Bindings(occurs_check), qv)

    @property
    def history(self):
        return self.store.history

    @property
    def failed(self) -> bool:
        return self.status == FAILED

    def copy(self) -> ExecutionState:
        return ExecutionState(
            list(self.goal), self.store.copy(), self.bindings.copy(), self.query_vars, self.status, self.error
        )


@dataclass(frozen=True)
class Strategy:
    policy: str = "first"
    seed: int | None = None

    @classmethod
    def first(cls) -> Strategy:
        return cls("first")

    @classmethod
    def random(cls, seed: int) -> Strategy:
        return cls("random", seed)


@dataclass
class RunResult:
    status: str
    state: ExecutionState
    trace: list[Transition]
    steps: int

    @property
    def final(self) -> bool:
        return self.status == FINAL


# ---------------------------------------------------------------------------
# transitions


def apply_label(rule: Rule, ids: tuple[int, ...], theta: dict) -> Transition:
    pairs = tuple((v, theta[v]) for v in rule.head_vars if v in theta)
    return Transition(APPLY, rule=rule.name, ids=tuple(ids), n_kept=len(rule.kept), theta=pairs)


def enabled(state: ExecutionState, program: Program) -> list[Transition]:
    """All transitions enabled in ``state``: goal transitions first, then rule instances."""
    if state.status != RUNNING:
        return []
    out: list[Transition] = []
    seen: set[ConstraintAtom] = set()
    for g in state.goal:
        if g in seen:
            continue
        seen.add(g)
        out.append(Transition(SOLVE if g.is_builtin else INTRODUCE, atom=g))
    plans = program.join_plans
    for ri, rule in enumerate(program.rules):
        for ids, theta in iter_matches(rule, plans.get(ri, None), state.store, state.bindings):
            out.append(apply_label(rule, ids, theta))
    return out


def first_enabled(state: ExecutionState, program: Program) -> Transition | None:
    if state.status != RUNNING:
        return None
    if state.goal:
        g = state.goal[0]
        return Transition(SOLVE if g.is_builtin else INTRODUCE, atom=g)
    plans = program.join_plans
    for ri, rule in enumerate(program.rules):
        for ids, theta in iter_matches(rule, plans.get(ri, None), state.store, state.bindings):
            return apply_label(rule, ids, theta)
    return None


def is_enabled(state: ExecutionState, program: Program, label: Transition) -> bool:
    """Check a single label directly, without enumerating every transition."""
    if state.status != RUNNING:
        return False
    if label.kind in (SOLVE, INTRODUCE):
        return (
            label.atom is not None
            and label.atom in state.goal
            and label.atom.is_builtin == (label.kind == SOLVE)
        )
    if label.kind != APPLY:
        return False
    rule = program.rule(label.rule)
    if label.n_kept != len(rule.kept):
        return False
    theta = match_instance(rule, label.ids, state.store, state.bindings)
    if theta is None or state.history.contains(rule.name, label.ids):
        return False
    return guard_holds(rule.guard, theta, state.bindings)


def solve_step(state: ExecutionState, atom: ConstraintAtom) -> list[int]:
    """Tell ``atom``; returns ids of constraints whose variables were touched."""
    b = state.bindings
    start = len(b.trail)
    outcome, msg = solve(atom, b)
    if outcome is SolveOutcome.OK:
        bound = b.trail[start:]
        return state.store.notify_bound(bound, b) if bound else []
    state.status = FAILED
    if outcome is SolveOutcome.ERROR:
        state.error = msg
    return []


def fire(state: ExecutionState, rule: Rule, ids: tuple[int, ...], theta: dict) -> list[ConstraintAtom]:
    """Commit to a rule instance; returns the instantiated body."""
    store = state.store
    store.history.add(rule.name, ids)
    for cid in ids[len(rule.kept) :]:
        store.remove(cid)
    fresh: dict = {}
    return [instantiate_atom(a, theta, state.bindings, fresh) for a in rule.body]


def _take_goal(state: ExecutionState, atom: ConstraintAtom) -> None:
    goal = state.goal
    for i, g in enumerate(goal):
        if g == atom:
            del goal[i]
            return
    raise ValueError(f"{atom} is not in the goal")


def step(state: ExecutionState, program: Program, label: Transition) -> Transition:
    """Perform ``label`` on ``state`` in place; returns the recorded label."""
    if label.kind == SOLVE:
        _take_goal(state, label.atom)
        solve_step(state, label.atom)
        return label
    if label.kind == INTRODUCE:
        _take_goal(state, label.atom)
        cid = state.store.introduce(label.atom, state.bindings)
        return replace(label, cid=cid)
    if label.kind == APPLY:
        rule = program.rule(label.rule)
        theta = match_instance(rule, label.ids, state.store, state.bindings)
        if theta is None:
            raise ValueError(f"rule {label.rule} does not match {label.ids}")
        body = fire(state, rule, label.ids, theta)
        state.goal[0:0] = body
        return label if label.theta else apply_label(rule, label.ids, theta)
    raise ValueError(f"not an omega_t transition: {label.kind}")


def successors(state: ExecutionState, program: Program) -> list[tuple[Transition, ExecutionState]]:
    """Every enabled transition with an independent successor snapshot."""
    out = []
    for label in enabled(state, program):
        nxt = state.copy()
        recorded = step(nxt, program, label)
        out.append((recorded, nxt))
    return out


# ---------------------------------------------------------------------------
# runs


def _initial(program: Program, goal, occurs_check: bool) -> ExecutionState:
    if isinstance(goal, ExecutionState):
        return goal.copy()
    return ExecutionState.initial(goal, occurs_check=occurs_check)


def run(
    program: Program,
    goal,
    strategy: Strategy | None = None,
    fuel: int = DEFAULT_RUN_FUEL,
    *,
    occurs_check: bool = False,
) -> RunResult:
    """Apply strategy-selected transitions until none is enabled, failure, or fuel runs out."""
    strategy = strategy or Strategy.first()
    state = _initial(program, goal, occurs_check)
    rng = random.Random(strategy.seed) if strategy.policy == "random" else None
    trace: list[Transition] = []
    steps = 0
    while True:
        if state.status == FAILED:
            return RunResult(FAILED, state, trace, steps)
        if rng is None:
            label = first_enabled(state, program)
        else:
            labels = enabled(state, program)
            label = rng.choice(labels) if labels else None
        if label is None:
            state.status = FINAL
            return RunResult(FINAL, state, trace, steps)
        if steps >= fuel:
            return RunResult(OUT_OF_FUEL, state, trace, steps)
        trace.append(step(state, program, label))
        steps += 1


def replay(
    program: Program, start: ExecutionState, labels: Iterable[Transition], *, strict: bool = False
) -> ExecutionState:
    """Re-run ``labels`` from ``start``, checking each is enabled.

    Non-transition events (activate, pop, ...) are skipped.  With
    ``strict`` every label must appear in the full :func:`enabled` list.
    """
    state = start.copy()
    for i, label in enumerate(labels):
        if not label.is_transition:
            continue
        if strict:
            ok = label in enabled(state, program)
        else:
            ok = is_enabled(state, program, label)
        if not ok:
            raise ValueError(f"step {i}: {label.kind} {label.rule or label.atom} is not enabled")
        step(state, program, label)
    if state.status == RUNNING and first_enabled(state, program) is None:
        state.status = FINAL
    return state


# ---------------------------------------------------------------------------
# exhaustive exploration


@dataclass
class NormalForm:
    text: str
    state: ExecutionState
    trace: tuple[Transition, ...]


@dataclass
class Exploration:
    normal_forms: list[NormalForm]
    truncated: bool
    explored: int

    @property
    def texts(self) -> list[str]:
        return sorted(nf.text for nf in self.normal_forms)


def monotone_guards(program: Program) -> bool:
    """True when every guard, once entailed, stays entailed as bindings grow.

    All built-in guards are monotone except the non-identity test ``\\==``.
    """
    return all(g.symbol != "\\==" for r in program.rules for g in r.guard)


class Explorer:
    """Incremental breadth-first search over all derivations from one state.

    Iterating yields each final state the first time its canonical text is
    seen, so callers may stop early.  ``truncated`` and ``explored`` describe
    the search so far.

    ``fuel`` bounds the states expanded; ``max_generated``, if given, also
    bounds the successor states computed, duplicates included, which is
    the real cost when states have very many successors.

    With ``reduce`` (the default whenever guards are monotone) a state with a
    nonempty goal only takes the transition for its first goal atom.  Every
    goal atom is consumed in any complete derivation, and Solve/Introduce
    commute to the left of any Apply whose guard was already entailed, so the
    set of final states is the same.
    """

    def __init__(
        self,
        program: Program,
        goal,
        fuel: int = DEFAULT_EXPLORE_FUEL,
        *,
        external: Sequence[Var] | None = None,
        occurs_check: bool = False,
        reduce: bool | None = None,
        max_generated: int | None = None,
    ) -> None:
        self.program = program
        self.fuel = fuel
        self.max_generated = max_generated
        self.generated = 0
        self.reduce = monotone_guards(program) if reduce is None else reduce
        self.root = _initial(program, goal, occurs_check)
        self.external = self.root.query_vars if external is None else tuple(external)
        self.explored = 0
        self.truncated = False
        self.finals: dict[str, NormalForm] = {}
        self._nodes: list[tuple[int, Transition | None]] = [(-1, None)]
        self._queue: deque[tuple[ExecutionState, int]] = deque([(self.root, 0)])
        self._seen = {state_key(self.root, self.external)}

    def _path(self, i: int) -> tuple[Transition, ...]:
        out = []
        while i > 0:
            parent, label = self._nodes[i]
            out.append(label)
            i = parent
        return tuple(reversed(out))

    def __iter__(self) -> Iterator[NormalForm]:
        program, ext = self.program, self.external
        queue, seen, nodes = self._queue, self._seen, self._nodes
        while queue:
            if self.explored >= self.fuel:
                self.truncated = True
                return
            state, node = queue.popleft()
            self.explored += 1
            if self.reduce and state.goal and state.status == RUNNING:
                g = state.goal[0]
                labels = [Transition(SOLVE if g.is_builtin else INTRODUCE, atom=g)]
            else:
                labels = enabled(state, program)
            if not labels:
                if state.status == RUNNING:
                    state.status = FINAL
                text = normal_form_text(state, ext)
                if text not in self.finals:
                    nf = self.finals[text] = NormalForm(text, state, self._path(node))
                    yield nf
                continue
            limit = self.max_generated
            for label in labels:
                if limit is not None and self.generated >= limit:
                    self.truncated = True
                    return
                self.generated += 1
                nxt = state.copy()
                recorded = step(nxt, program, label)
                key = state_key(nxt, ext)
                if key in seen:
                    continue
                seen.add(key)
                nodes.append((node, recorded))
                queue.append((nxt, len(nodes) - 1))

    def normal_forms(self) -> list[NormalForm]:
        """Distinct final states found so far, one per equivalence class, sorted by text."""
        forms: list[NormalForm] = []
        for nf in sorted(self.finals.values(), key=lambda nf: nf.text):
            if not any(states_equivalent(nf.state, other.state, self.external) for other in forms):
                forms.append(nf)
        return forms


def explore_all(
    program: Program,
    goal,
    fuel: int = DEFAULT_EXPLORE_FUEL,
    *,
    external: Sequence[Var] | None = None,
    occurs_check: bool = False,
    reduce: bool | None = None,
    max_generated: int | None = None,
) -> Exploration:
    """Breadth-first search over all derivations; collects final states modulo renaming."""
    ex = Explorer(program, goal, fuel, external=external, occurs_check=occurs_check, reduce=reduce, max_generated=max_generated)
    for _ in ex:
        pass
    return Exploration(ex.normal_forms(), ex.truncated, ex.explored)


# ---------------------------------------------------------------------------
# trace rendering


def format_event(i: int, label: Transition, namer: VarNamer) -> str:
    k = label.kind
    if k == SOLVE:
        return f"{i} solve {format_atom(label.atom, namer)}"
    if k == INTRODUCE:
        suffix = f"#{label.cid}" if label.cid is not None else ""
        return f"{i} introduce {format_atom(label.atom, namer)}{suffix}"
    if k == APPLY:
        ids = ",".join(map(str, label.ids))
        theta = ",".join(f"{v.name}->{format_term(t, namer)}" for v, t in label.theta)
        return f"{i} apply {label.rule} [{ids}] {{{theta}}}"
    detail = f" {label.cid}" if label.cid is not None else ""
    if label.note:
        detail += f" {label.note}"
    return f"{i} {k}{detail}"


def format_trace(trace: Iterable[Transition], query_vars: Sequence[Var] = ()) -> list[str]:
    """``<step#> <kind> <detail>`` lines; query variables keep their names."""
    namer = VarNamer(keep=query_vars)
    return [format_event(i, label, namer) for i, label in enumerate(trace, 1)]
