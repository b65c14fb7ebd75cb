"""Critical pairs and bounded joinability: a confluence test for terminating programs.

A critical pair comes from two rule instances that share at least one head
constraint, where some shared constraint is removed by at least one of the
two rules.  The overlap state holds the merged heads; its built-in store is
the most general unifier of the shared heads plus both guards.  The two
successors are the results of firing either rule on the overlap.  The pair
joins when some final state reachable from one successor is equivalent to a
final state reachable from the other, with the overlap's variables fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Iterator

from .canonical import external_namer, normal_form_text, states_equivalent, view, views_equivalent
from .herbrand import Bindings, GuardResult, check_atom
from .omega_t import (
    DEFAULT_RUN_FUEL,
    FINAL,
    ExecutionState,
    Explorer,
    Strategy,
    Transition,
    is_enabled,
    replay,
    run,
    step,
)
from .store import Store
from .syntax import Program, Rule, format_atom
from .terms import ConstraintAtom, Var, atom_vars, rename_atom

__all__ = [
    "CONFLUENT",
    "NON_JOINABLE",
    "INCONCLUSIVE",
    "JOINS",
    "DISTINCT",
    "CriticalPair",
    "ConfluenceReport",
    "Joinability",
    "PairRecord",
    "check_confluence",
    "critical_pairs",
    "joinable",
    "states_equivalent",
]

CONFLUENT = "confluent"
NON_JOINABLE = "non_joinable"
INCONCLUSIVE = "inconclusive"

JOINS = "joins"
DISTINCT = "distinct"

DEFAULT_CHECK_FUEL = 20_000  # explored states per side of a pair

# serials for renaming the two rules apart
_LEFT, _RIGHT = -2, -3


@dataclass
class CriticalPair:
    rule1: str
    rule2: str
    pairing: tuple[tuple[int, int], ...]  # (head of rule1, head of rule2)
    overlap: ExecutionState
    label1: Transition | None
    label2: Transition | None
    state1: ExecutionState | None
    state2: ExecutionState | None
    note: str = ""  # why the pair cannot be decided, if it cannot

    @property
    def external(self) -> tuple[Var, ...]:
        return self.overlap.query_vars

    def overlap_text(self) -> str:
        namer = external_namer(self.external)
        b = self.overlap.bindings
        parts = [f"{format_atom(_resolved(c.atom, b), namer)}#{c.id}" for c in self.overlap.store]
        return "{" + ", ".join(parts) + "}"


def _resolved(a: ConstraintAtom, b: Bindings) -> ConstraintAtom:
    return ConstraintAtom(a.symbol, tuple(b.resolve(x) for x in a.args), a.kind)


def _renamed(rule: Rule, serial: int) -> tuple[tuple[ConstraintAtom, ...], tuple[ConstraintAtom, ...]]:
    mapping: dict = {}
    for v in atom_vars(rule.heads + rule.guard):
        mapping[v] = Var(v.name, serial)
    return tuple(rename_atom(h, mapping) for h in rule.heads), tuple(rename_atom(g, mapping) for g in rule.guard)


def _pairings(r1: Rule, r2: Rule, same: bool) -> Iterator[tuple[tuple[int, int], ...]]:
    """Injective partial matchings of heads with equal symbols, touching a removed head."""
    n1, n2 = len(r1.heads), len(r2.heads)
    seen: set = set()
    for k in range(1, min(n1, n2) + 1):
        for left in combinations(range(n1), k):
            for right in permutations(range(n2), k):
                pairing = tuple(zip(left, right))
                if any(r1.heads[i].key != r2.heads[j].key for i, j in pairing):
                    continue
                if not any(r1.is_removed(i) or r2.is_removed(j) for i, j in pairing):
                    continue
                if same:
                    if k == n1 and all(i == j for i, j in pairing):
                        continue  # the same instance on both sides
                    mirror = tuple(sorted((j, i) for i, j in pairing))
                    canon = min(pairing, mirror)
                    if canon in seen:
                        continue
                    seen.add(canon)
                yield pairing


def _tell_guard(guard, b: Bindings) -> str | None:
    """Add guard atoms to ``b``.  Returns "fails", "nonground" or None (satisfied)."""
    for g in guard:
        if g.symbol in ("=", "=="):
            if not b.unify(*g.args):
                return "fails"
            continue
        r = check_atom(g, {}, b)
        if r is GuardResult.FAILS:
            return "fails"
        if r is GuardResult.NONGROUND:
            return "nonground"
    return None


def _build(program: Program, i1: int, i2: int, pairing) -> CriticalPair | None:
    r1, r2 = program.rules[i1], program.rules[i2]
    h1, g1 = _renamed(r1, _LEFT)
    h2, g2 = _renamed(r2, _RIGHT)
    b = Bindings()
    for i, j in pairing:
        if not all(b.unify(x, y) for x, y in zip(h1[i].args, h2[j].args)):
            return None
    verdict = _tell_guard(g1, b) or _tell_guard(g2, b)
    if verdict == "fails":
        return None
    atoms = list(h1)
    paired = {j: i for i, j in pairing}
    for j, h in enumerate(h2):
        if j not in paired:
            atoms.append(h)
    store = Store()
    ids = [store.introduce(a, b) for a in atoms]
    ids2 = []
    extra = iter(ids[len(h1) :])
    for j in range(len(h2)):
        ids2.append(ids[paired[j]] if j in paired else next(extra))
    external = tuple(dict.fromkeys(v for a in atoms for x in a.args for v in b.free_vars(x)))
    overlap = ExecutionState([], store, b, external)
    cp = CriticalPair(r1.name, r2.name, tuple(pairing), overlap, None, None, None, None)
    if verdict == "nonground":
        cp.note = "nonground guard"
        return cp
    for side, (rule, rids) in enumerate(((r1, tuple(ids[: len(h1)])), (r2, tuple(ids2)))):
        label = Transition("apply", rule=rule.name, ids=rids, n_kept=len(rule.kept))
        if not is_enabled(overlap, program, label):
            cp.note = f"{rule.name} not applicable on the overlap"
            return cp
        nxt = overlap.copy()
        recorded = step(nxt, program, label)
        if side == 0:
            cp.label1, cp.state1 = recorded, nxt
        else:
            cp.label2, cp.state2 = recorded, nxt
    return cp


def critical_pairs(program: Program) -> list[CriticalPair]:
    """All critical pairs, for every unordered pair of rules including a rule with itself."""
    out = []
    n = len(program.rules)
    for i1 in range(n):
        for i2 in range(i1, n):
            r1, r2 = program.rules[i1], program.rules[i2]
            for pairing in _pairings(r1, r2, i1 == i2):
                cp = _build(program, i1, i2, pairing)
                if cp is not None:
                    out.append(cp)
    return out


@dataclass
class Joinability:
    result: str  # joins / distinct / inconclusive
    witness: tuple = ()  # ((text, trace from overlap), (text, trace from overlap)) when distinct
    explored: int = 0
    note: str = ""


def _quick(program: Program, cp: CriticalPair, fuel: int) -> bool:
    """Run both successors with the first strategy; equivalent results join."""
    a = run(program, cp.state1, Strategy.first(), fuel)
    if a.status != FINAL and a.status != "failed":
        return False
    c = run(program, cp.state2, Strategy.first(), fuel)
    if c.status != FINAL and c.status != "failed":
        return False
    return states_equivalent(a.state, c.state, cp.external)


def joinable(program: Program, cp: CriticalPair, fuel: int = DEFAULT_CHECK_FUEL) -> Joinability:
    """Search both successors breadth-first, in lockstep, for a common final state."""
    if cp.state1 is None or cp.state2 is None:
        return Joinability(INCONCLUSIVE, note=cp.note)
    ext = cp.external
    if views_equivalent(view(cp.state1, ext), view(cp.state2, ext), with_goal=True):
        return Joinability(JOINS)
    if _quick(program, cp, min(fuel, DEFAULT_RUN_FUEL)):
        return Joinability(JOINS)
    left = Explorer(program, cp.state1, fuel, external=ext)
    right = Explorer(program, cp.state2, fuel, external=ext)
    streams = [iter(left), iter(right)]
    found: list[list] = [[], []]
    live = [True, True]
    while any(live):
        for side in (0, 1):
            if not live[side]:
                continue
            nf = next(streams[side], None)
            if nf is None:
                live[side] = False
                continue
            if any(states_equivalent(nf.state, other.state, ext) for other in found[1 - side]):
                return Joinability(JOINS, explored=left.explored + right.explored)
            found[side].append(nf)
    explored = left.explored + right.explored
    if left.truncated or right.truncated:
        return Joinability(INCONCLUSIVE, explored=explored, note="fuel exhausted")
    a = min(found[0], key=lambda nf: nf.text)
    c = min(found[1], key=lambda nf: nf.text)
    witness = ((a.text, (cp.label1,) + a.trace), (c.text, (cp.label2,) + c.trace))
    return Joinability(DISTINCT, witness, explored)


@dataclass
class PairRecord:
    pair: CriticalPair
    joinability: Joinability

    @property
    def verdict(self) -> str:
        return self.joinability.result

    def line(self) -> str:
        return f"PAIR {self.pair.rule1} {self.pair.rule2} {self.pair.overlap_text()} {self.verdict}"


@dataclass
class ConfluenceReport:
    verdict: str
    records: list[PairRecord] = field(default_factory=list)

    @property
    def witnesses(self) -> list[PairRecord]:
        return [r for r in self.records if r.verdict == DISTINCT]

    def lines(self) -> list[str]:
        out = [r.line() for r in self.records]
        n = len(self.records)
        if self.verdict == CONFLUENT:
            out.append(f"CONFLUENT ({n} pairs checked)")
            return out
        if self.verdict == NON_JOINABLE:
            bad = self.witnesses
            out.append(f"NON-JOINABLE ({len(bad)} of {n} pairs)")
            for r in bad:
                (t1, _), (t2, _) = r.joinability.witness
                out.append(f"  {r.pair.rule1} / {r.pair.rule2} syntactic overlap {r.pair.overlap_text()}")
                out.append(f"    {t1}")
                out.append(f"    {t2}")
            return out
        unsure = [r for r in self.records if r.verdict == INCONCLUSIVE]
        out.append(f"INCONCLUSIVE ({len(unsure)} of {n} pairs undecided)")
        for r in unsure:
            out.append(f"  {r.pair.rule1} / {r.pair.rule2} {r.pair.overlap_text()}: {r.joinability.note}")
        return out

    def text(self) -> str:
        return "\n".join(self.lines())


def check_confluence(program: Program, fuel: int = DEFAULT_CHECK_FUEL) -> ConfluenceReport:
    """Confluent iff every critical pair joins within ``fuel`` explored states per side.

    Any distinct pair makes the verdict non-joinable; otherwise an undecided
    pair makes it inconclusive.  The caller is responsible for termination.
    """
    records = [PairRecord(cp, joinable(program, cp, fuel)) for cp in critical_pairs(program)]
    records.sort(key=lambda r: (r.pair.rule1, r.pair.rule2, r.pair.pairing))
    verdicts = {r.verdict for r in records}
    if DISTINCT in verdicts:
        verdict = NON_JOINABLE
    elif INCONCLUSIVE in verdicts:
        verdict = INCONCLUSIVE
    else:
        verdict = CONFLUENT
    return ConfluenceReport(verdict, records)


def replay_witness(program: Program, cp: CriticalPair, trace) -> ExecutionState:
    """Re-run a witness trace from the overlap state and return where it ends."""
    return replay(program, cp.overlap, trace)


def witness_text(cp: CriticalPair, state: ExecutionState) -> str:
    return normal_form_text(state, cp.external)

