"""Canonical forms of execution states and equivalence modulo renaming.

External variables (query variables, or the variables of a critical-pair
overlap) keep their identity; every other variable and every constraint id
may be renamed.  When several external variables are aliased to one
another, the first one in external order represents the class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .syntax import VarNamer, format_atom, format_term, standard_order_key
from .terms import Compound, ConstraintAtom, Int, Term, Var, rename_term, term_vars


def _blind(t: Term) -> str:
    return format_term(t, lambda v: "_")


def external_namer(external: Sequence[Var]) -> VarNamer:
    """Namer printing external variables under unique readable names."""
    namer = VarNamer()
    used: set[str] = set()
    for v in external:
        name = v.name if not v.name.startswith("_%") else "_"
        base, k = name, 1
        while name in used:
            k += 1
            name = f"{base}{k}"
        used.add(name)
        namer.names[v] = name
    return namer


@dataclass
class StateView:
    failed: bool
    external: tuple[Var, ...]
    ext_values: tuple[Term, ...]  # normalized value of each external var
    store: tuple[tuple[ConstraintAtom, int], ...]  # normalized atoms with ids
    goal: tuple[ConstraintAtom, ...]


def view(state, external: Sequence[Var] | None = None) -> StateView:
    external = tuple(state.query_vars if external is None else external)
    if state.failed:
        return StateView(True, external, (), (), ())
    b = state.bindings
    rep: dict[Var, Var] = {}
    for x in external:
        r = b.deref(x)
        if r.__class__ is Var and r not in rep:
            rep[r] = x

    def norm(t: Term) -> Term:
        t = b.resolve(t)
        if rep and any(True for _ in term_vars(t)):
            return rename_term(t, rep)
        return t

    ext_values = tuple(norm(x) for x in external)
    store = tuple(
        (ConstraintAtom(c.atom.symbol, tuple(norm(a) for a in c.atom.args), c.atom.kind), c.id)
        for c in state.store.live.values()
    )
    goal = tuple(ConstraintAtom(g.symbol, tuple(norm(a) for a in g.args), g.kind) for g in state.goal)
    return StateView(False, external, ext_values, store, goal)


def _blind_order(t: Term) -> tuple:
    """Standard order in which all variables compare equal."""
    cls = t.__class__
    if cls is Var:
        return (0,)
    if cls is Int:
        return (1, t.value)
    if cls is Compound:
        return (4, len(t.args), t.functor, tuple(_blind_order(a) for a in t.args))
    return (3, t.name)


def _atom_blind(a: ConstraintAtom) -> tuple:
    return (a.symbol, len(a.args), tuple(_blind(x) for x in a.args))


def _binding_lines(v: StateView, namer: VarNamer) -> list[str]:
    lines = []
    for x, t in zip(v.external, v.ext_values):
        if t == x:
            continue
        lines.append(f"{namer(x)} = {format_term(t, namer, 699)}")
    return lines


def answer(state, external: Sequence[Var] | None = None, *, ids: bool = False) -> tuple[str, list[str]]:
    """Sorted store text (``true`` when empty) and ``X = t`` lines for bound external variables."""
    v = view(state, external)
    if v.failed:
        return "fail", []
    namer = external_namer(v.external)
    items = sorted(
        v.store,
        key=lambda p: (
            p[0].symbol,
            len(p[0].args),
            tuple(_blind_order(a) for a in p[0].args),
            tuple(standard_order_key(a) for a in p[0].args),
            p[1],
        ),
    )
    parts = []
    for atom, cid in items:
        s = format_atom(atom, namer)
        parts.append(f"{s}#{cid}" if ids else s)
    return (", ".join(parts) if parts else "true"), _binding_lines(v, namer)


def normal_form_text(state, external: Sequence[Var] | None = None, *, ids: bool = False) -> str:
    """Readable canonical form: sorted store, then bindings of external variables."""
    store_text, lines = answer(state, external, ids=ids)
    return store_text if not lines else f"{store_text} ; {', '.join(lines)}"


def _encode(t: Term, b, varmap: dict | None):
    """Structural tuple for ``t`` under ``b``; variables become their index in
    ``varmap`` (assigned on first sight), or ``("_",)`` when ``varmap`` is None.
    Every kind of node starts with its own tag so blind encodings sort."""
    t = b.deref(t)
    cls = t.__class__
    if cls is Var:
        if varmap is None:
            return ("_",)
        k = varmap.get(t)
        if k is None:
            k = varmap[t] = len(varmap)
        return k
    if cls is Compound:
        return ("(", t.functor) + tuple(_encode(a, b, varmap) for a in t.args)
    if cls is Int:
        return ("#", t.value)
    return ("'", t.name)


def state_key(state, external: Sequence[Var] | None = None) -> tuple:
    """Hashable key such that equal keys imply equivalent states.

    Covers goal, store, propagation history and external bindings, so
    it is suitable for deduplicating intermediate states.
    """
    if state.status == "failed":
        return ("fail",)
    external = tuple(state.query_vars if external is None else external)
    b = state.bindings
    varmap: dict = {}
    for i, x in enumerate(external):
        r = b.deref(x)
        if r.__class__ is Var and r not in varmap:
            varmap[r] = ("x", i)
    ext = tuple(_encode(x, b, varmap) for x in external)
    items = sorted(
        ((c.atom.symbol, tuple(_encode(a, b, None) for a in c.atom.args)), cid, c.atom)
        for cid, c in state.store.live.items()
    )
    rank = {}
    store = []
    for r, (blind, cid, atom) in enumerate(items):
        rank[cid] = r
        store.append((atom.symbol,) + tuple(_encode(a, b, varmap) for a in atom.args))
    goal_items = sorted(
        ((g.symbol, tuple(_encode(a, b, None) for a in g.args)), i) for i, g in enumerate(state.goal)
    )
    goal = tuple((state.goal[i].symbol,) + tuple(_encode(a, b, varmap) for a in state.goal[i].args) for _, i in goal_items)
    hist = tuple(
        sorted(
            (rule, tuple(rank[i] for i in ids))
            for rule, ids in state.store.history._tuples
            if all(i in rank for i in ids)
        )
    )
    return (ext, tuple(store), goal, hist)


# ---------------------------------------------------------------------------
# equivalence


def _iso(t1: Term, t2: Term, fwd: dict, bwd: dict, fixed: set) -> bool:
    stack = [(t1, t2)]
    while stack:
        x, y = stack.pop()
        xc = x.__class__
        if xc is Var:
            if y.__class__ is not Var:
                return False
            if x in fixed or y in fixed:
                if x != y:
                    return False
                continue
            m = fwd.get(x)
            if m is None:
                if y in bwd:
                    return False
                fwd[x] = y
                bwd[y] = x
            elif m != y:
                return False
        elif xc is Compound:
            if y.__class__ is not Compound or x.functor != y.functor or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
        elif x != y:
            return False
    return True


def _iso_atoms(a: ConstraintAtom, c: ConstraintAtom, fwd, bwd, fixed) -> bool:
    if a.symbol != c.symbol or len(a.args) != len(c.args):
        return False
    return all(_iso(x, y, fwd, bwd, fixed) for x, y in zip(a.args, c.args))


def views_equivalent(va: StateView, vb: StateView, *, with_goal: bool = False) -> bool:
    if va.failed or vb.failed:
        return va.failed == vb.failed
    if va.external != vb.external or len(va.store) != len(vb.store):
        return False
    if with_goal and len(va.goal) != len(vb.goal):
        return False
    fixed = set(va.external)
    fwd: dict = {}
    bwd: dict = {}
    for x, y in zip(va.ext_values, vb.ext_values):
        if not _iso(x, y, fwd, bwd, fixed):
            return False
    left = [a for a, _ in va.store] + (list(va.goal) if with_goal else [])
    right = [a for a, _ in vb.store] + (list(vb.goal) if with_goal else [])
    if sorted(map(_atom_blind, left)) != sorted(map(_atom_blind, right)):
        return False
    left.sort(key=_atom_blind)
    used = [False] * len(right)

    def search(i: int, fwd: dict, bwd: dict) -> bool:
        if i == len(left):
            return True
        a = left[i]
        key = _atom_blind(a)
        for j, c in enumerate(right):
            if used[j] or _atom_blind(c) != key:
                continue
            f2, b2 = dict(fwd), dict(bwd)
            if _iso_atoms(a, c, f2, b2, fixed):
                used[j] = True
                if search(i + 1, f2, b2):
                    return True
                used[j] = False
        return False

    return search(0, fwd, bwd)


def states_equivalent(a, b, external: Sequence[Var] | None = None) -> bool:
    """Equivalence of final states modulo renaming of ids and non-external variables."""
    ext = a.query_vars if external is None else external
    return views_equivalent(view(a, ext), view(b, ext))
