"""Herbrand terms and constraint atoms.

Variables compare by ``(name, serial)`` rather than by object identity so
that two replays of the same derivation, which mint fresh variables in the
same order, produce equal terms.  Serial conventions:

* ``-1``      variables of parsed rules
* ``<= -2``   renamed-apart rule copies (critical pairs)
* ``0``       query variables
* ``>= 1``    fresh variables minted by a :class:`~chrkit.herbrand.Bindings`
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

RULE_SERIAL = -1
QUERY_SERIAL = 0


class Var:
    __slots__ = ("name", "serial", "_hash")

    def __init__(self, name: str, serial: int = QUERY_SERIAL) -> None:
        self.name = name
        self.serial = serial
        self._hash = hash((name, serial))

    def __eq__(self, other: object) -> bool:
        return self is other or (
            other.__class__ is Var
            and self.serial == other.serial  # type: ignore[attr-defined]
            and self.name == other.name  # type: ignore[attr-defined]
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        if self.serial == QUERY_SERIAL:
            return f"Var({self.name!r})"
        return f"Var({self.name!r}, {self.serial})"


@dataclass(frozen=True, slots=True)
class Atom:
    name: str

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"


@dataclass(frozen=True, slots=True)
class Int:
    value: int

    def __repr__(self) -> str:
        return f"Int({self.value})"


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("compound terms need at least one argument")

    def __repr__(self) -> str:
        return f"Compound({self.functor!r}, {self.args!r})"


Term = Union[Var, Atom, Int, Compound]

CHR = "chr"
BUILTIN = "builtin"

# symbol/arity pairs of the host-language constraint vocabulary
BUILTINS = frozenset(
    {
        ("true", 0),
        ("fail", 0),
        ("=", 2),
        ("==", 2),
        ("\\==", 2),
        ("<", 2),
        ("=<", 2),
        (">", 2),
        (">=", 2),
        ("=:=", 2),
        ("=\\=", 2),
        ("is", 2),
    }
)


@dataclass(frozen=True, slots=True)
class ConstraintAtom:
    symbol: str
    args: tuple
    kind: str = CHR

    @property
    def key(self) -> tuple[str, int]:
        return (self.symbol, len(self.args))

    @property
    def is_builtin(self) -> bool:
        return self.kind == BUILTIN

    def as_term(self) -> Term:
        if self.args:
            return Compound(self.symbol, self.args)
        return Atom(self.symbol)


TRUE = ConstraintAtom("true", (), BUILTIN)
FAIL = ConstraintAtom("fail", (), BUILTIN)


def make_atom(symbol: str, args: tuple | list = ()) -> ConstraintAtom:
    """Build a constraint atom, classifying it as built-in or CHR by its key."""
    args = tuple(args)
    kind = BUILTIN if (symbol, len(args)) in BUILTINS else CHR
    return ConstraintAtom(symbol, args, kind)


def term_vars(t: Term) -> Iterator[Var]:
    """Yield variables of ``t`` left to right, with repetitions."""
    stack = [t]
    while stack:
        t = stack.pop()
        if t.__class__ is Var:
            yield t  # type: ignore[misc]
        elif t.__class__ is Compound:
            stack.extend(reversed(t.args))  # type: ignore[union-attr]


def atom_vars(atoms) -> list[Var]:
    """Distinct variables of a sequence of atoms, in first-occurrence order."""
    seen: dict[Var, None] = {}
    for a in atoms:
        for arg in a.args:
            for v in term_vars(arg):
                seen.setdefault(v, None)
    return list(seen)


def rename_term(t: Term, mapping: dict) -> Term:
    cls = t.__class__
    if cls is Var:
        return mapping.get(t, t)
    if cls is Compound:
        return Compound(t.functor, tuple(rename_term(a, mapping) for a in t.args))  # type: ignore[union-attr]
    return t


def rename_atom(a: ConstraintAtom, mapping: dict) -> ConstraintAtom:
    if not a.args:
        return a
    return ConstraintAtom(a.symbol, tuple(rename_term(x, mapping) for x in a.args), a.kind)
