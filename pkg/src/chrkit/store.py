"""Identified CHR constraint store with lookup indexes and propagation history."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .herbrand import Bindings
from .syntax import print_canonical
from .terms import Atom, ConstraintAtom, Int, Var


@dataclass(frozen=True, slots=True)
class IdentifiedConstraint:
    atom: ConstraintAtom
    id: int

    def __repr__(self) -> str:
        return f"#({print_canonical(self.atom)},{self.id})"


class PropagationHistory:
    """Set of ``(rule name, ids)`` tuples; ``ids`` lists kept heads then removed heads."""

    def __init__(self) -> None:
        self._tuples: set[tuple[str, tuple[int, ...]]] = set()
        self._by_id: dict[int, set[tuple[str, tuple[int, ...]]]] = {}

    def contains(self, rule: str, ids) -> bool:
        return (rule, tuple(ids)) in self._tuples

    def add(self, rule: str, ids) -> PropagationHistory:
        entry = (rule, tuple(ids))
        if entry not in self._tuples:
            self._tuples.add(entry)
            for i in entry[1]:
                self._by_id.setdefault(i, set()).add(entry)
        return self

    def prune(self, cid: int) -> None:
        for entry in self._by_id.pop(cid, ()):
            self._tuples.discard(entry)
            for other in entry[1]:
                if other != cid:
                    s = self._by_id.get(other)
                    if s is not None:
                        s.discard(entry)
                        if not s:
                            del self._by_id[other]

    def copy(self) -> PropagationHistory:
        h = PropagationHistory()
        h._tuples = set(self._tuples)
        h._by_id = {k: set(v) for k, v in self._by_id.items()}
        return h

    def __len__(self) -> int:
        return len(self._tuples)

    def __iter__(self) -> Iterator[tuple[str, tuple[int, ...]]]:
        return iter(sorted(self._tuples))

    def __contains__(self, entry) -> bool:
        rule, ids = entry
        return self.contains(rule, ids)


def _atomic(t) -> bool:
    return t.__class__ is Atom or t.__class__ is Int


class Store:
    """Live constraints plus the indexes used for partner lookup.

    * symbol index: ``(name, arity) -> ids``
    * argument index: ``((name, arity), position, value) -> ids`` for
      arguments currently dereferencing to an atom or integer
    * variable attachment: ``var -> ids`` of constraints mentioning it

    The argument index and the attachments track the current bindings;
    call :meth:`notify_bound` after binding variables.
    """

    def __init__(self) -> None:
        self.live: dict[int, IdentifiedConstraint] = {}
        self.by_symbol: dict[tuple[str, int], dict[int, None]] = {}
        self.by_arg: dict[tuple, dict[int, None]] = {}
        self.attached: dict[Var, dict[int, None]] = {}
        self._arg_keys: dict[int, list[tuple]] = {}
        self._vars: dict[int, list[Var]] = {}
        self.next_id = 1
        self.history = PropagationHistory()

    def __len__(self) -> int:
        return len(self.live)

    def __contains__(self, cid: int) -> bool:
        return cid in self.live

    def __iter__(self) -> Iterator[IdentifiedConstraint]:
        return iter(self.live.values())

    def copy(self) -> Store:
        s = Store.__new__(Store)
        s.live = dict(self.live)
        s.by_symbol = {k: dict(v) for k, v in self.by_symbol.items()}
        s.by_arg = {k: dict(v) for k, v in self.by_arg.items()}
        s.attached = {k: dict(v) for k, v in self.attached.items()}
        s._arg_keys = {k: list(v) for k, v in self._arg_keys.items()}
        s._vars = {k: list(v) for k, v in self._vars.items()}
        s.next_id = self.next_id
        s.history = self.history.copy()
        return s

    def get(self, cid: int) -> IdentifiedConstraint:
        return self.live[cid]

    # -- indexing

    def _index(self, c: IdentifiedConstraint, b: Bindings) -> None:
        key = c.atom.key
        cid = c.id
        arg_keys = []
        seen_vars: dict[Var, None] = {}
        for pos, arg in enumerate(c.atom.args):
            val = b.deref(arg)
            if _atomic(val):
                k = (key, pos, val)
                self.by_arg.setdefault(k, {})[cid] = None
                arg_keys.append(k)
            elif val.__class__ is Var:
                seen_vars.setdefault(val, None)
            else:
                for v in b.free_vars(val):
                    seen_vars.setdefault(v, None)
        for v in seen_vars:
            self.attached.setdefault(v, {})[cid] = None
        self._arg_keys[cid] = arg_keys
        self._vars[cid] = list(seen_vars)

    def _unindex(self, cid: int) -> None:
        for k in self._arg_keys.pop(cid, ()):
            s = self.by_arg[k]
            del s[cid]
            if not s:
                del self.by_arg[k]
        for v in self._vars.pop(cid, ()):
            s = self.attached.get(v)
            if s is not None:
                s.pop(cid, None)
                if not s:
                    del self.attached[v]

    # -- operations

    def introduce(self, atom: ConstraintAtom, b: Bindings) -> int:
        """Add ``atom`` as ``#(atom, n)`` and return ``n``."""
        assert not atom.is_builtin, atom
        cid = self.next_id
        self.next_id += 1
        c = IdentifiedConstraint(atom, cid)
        self.live[cid] = c
        self.by_symbol.setdefault(atom.key, {})[cid] = None
        self._index(c, b)
        return cid

    def remove(self, cid: int) -> None:
        c = self.live.pop(cid)  # KeyError for non-live ids is a caller defect
        s = self.by_symbol[c.atom.key]
        del s[cid]
        if not s:
            del self.by_symbol[c.atom.key]
        self._unindex(cid)
        self.history.prune(cid)

    def notify_bound(self, bound: list[Var], b: Bindings) -> list[int]:
        """Re-index constraints that mention newly bound variables.

        Returns the affected live ids in ascending order.
        """
        affected: dict[int, None] = {}
        for v in bound:
            ids = self.attached.get(v)
            if ids:
                affected.update(ids)
        out = sorted(i for i in affected if i in self.live)
        for cid in out:
            self._unindex(cid)
            self._index(self.live[cid], b)
        return out

    def candidate_ids(self, pattern: ConstraintAtom, b: Bindings, theta: dict | None = None) -> list[int]:
        """Ids that may match ``pattern``; a superset of the actual matches.

        An argument that is (or is matched to) an atom or integer narrows via
        the argument index, one matched to an unbound store variable via the
        attachments, and otherwise the symbol index is used.
        """
        key = pattern.key
        best = self.by_symbol.get(key)
        if not best:
            return []
        filtered = False
        exact = True  # best is in ascending id order
        for pos, arg in enumerate(pattern.args):
            if arg.__class__ is Var:
                if not theta:
                    continue
                val = theta.get(arg)
                if val is None:
                    continue
                val = b.deref(val)
            else:
                val = arg
            if _atomic(val):
                s = self.by_arg.get((key, pos, val))
                if not s:
                    return []
                if len(s) < len(best):
                    best, filtered, exact = s, False, False
            elif val.__class__ is Var:
                s = self.attached.get(val)
                if not s:
                    return []
                if len(s) < len(best):
                    best, filtered, exact = s, True, False
        if filtered:
            live = self.live
            ids = [i for i in best if live[i].atom.key == key]
        else:
            ids = list(best)
        if not exact:
            ids.sort()
        return ids

    def candidates(self, pattern: ConstraintAtom, b: Bindings, theta: dict | None = None) -> list[IdentifiedConstraint]:
        live = self.live
        return [live[i] for i in self.candidate_ids(pattern, b, theta)]

    def by_key(self, key: tuple[str, int]) -> list[int]:
        return list(self.by_symbol.get(key, ()))

    def snapshot(self) -> tuple[IdentifiedConstraint, ...]:
        return tuple(self.live.values())
