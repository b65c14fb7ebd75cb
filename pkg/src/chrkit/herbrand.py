"""The built-in solver: Herbrand equality plus ground integer arithmetic.

The built-in store is a substitution kept in a :class:`Bindings` object.
Telling an equation means unifying; asking a guard means evaluating it
under a one-way matching substitution without creating any binding.
"""

from __future__ import annotations

import enum
import functools
import operator
from typing import Callable, Iterable

from .syntax import CHRError
from .terms import Compound, ConstraintAtom, Int, Term, Var


class EvaluationError(CHRError):
    pass


class NonGroundError(EvaluationError):
    """An arithmetic operand is an unbound variable."""


class ArithmeticTypeError(EvaluationError):
    """An operand is not an integer expression."""


class MarkError(CHRError):
    pass


class Mark:
    __slots__ = ("trail_len", "depth", "released")

    def __init__(self, trail_len: int, depth: int) -> None:
        self.trail_len = trail_len
        self.depth = depth
        self.released = False

    def __repr__(self) -> str:
        return f"Mark(trail={self.trail_len}, depth={self.depth})"


class Bindings:
    """Variable bindings with an undo trail.

    ``generation`` counts binding events and never decreases, so an
    unchanged generation proves no binding happened in between.
    """

    def __init__(self, occurs_check: bool = False) -> None:
        self._ref: dict[Var, Term] = {}
        self.trail: list[Var] = []
        self.generation = 0
        self.occurs_check = occurs_check
        self.next_serial = 1
        self._marks: list[Mark] = []

    def copy(self) -> Bindings:
        b = Bindings.__new__(Bindings)
        b._ref = dict(self._ref)
        b.trail = []
        b.generation = self.generation
        b.occurs_check = self.occurs_check
        b.next_serial = self.next_serial
        b._marks = []
        return b

    def fresh(self, name: str = "_") -> Var:
        v = Var(name, self.next_serial)
        self.next_serial += 1
        return v

    def __len__(self) -> int:
        return len(self._ref)

    def __contains__(self, v: Var) -> bool:
        return v in self._ref

    def items(self):
        return self._ref.items()

    def deref(self, t: Term) -> Term:
        ref = self._ref
        while t.__class__ is Var:
            nxt = ref.get(t)
            if nxt is None:
                return t
            t = nxt
        return t

    def resolve(self, t: Term) -> Term:
        """Apply the substitution exhaustively; cyclic bindings stop at the repeated variable."""
        return self._resolve(t, set())

    def _resolve(self, t: Term, active: set) -> Term:
        if t.__class__ is Var:
            root = t
            t = self.deref(t)
            if t.__class__ is Var:
                return t
            if root in active:
                return root
            active.add(root)
            try:
                return self._resolve(t, active)
            finally:
                active.discard(root)
        if t.__class__ is Compound:
            args = t.args
            new = tuple(self._resolve(a, active) for a in args)
            if all(x is y for x, y in zip(new, args)):
                return t
            return Compound(t.functor, new)
        return t

    def is_ground(self, t: Term) -> bool:
        stack = [t]
        while stack:
            t = self.deref(stack.pop())
            if t.__class__ is Var:
                return False
            if t.__class__ is Compound:
                stack.extend(t.args)
        return True

    def free_vars(self, t: Term) -> list[Var]:
        seen: dict[Var, None] = {}
        stack = [t]
        visited: set[int] = set()
        while stack:
            t = stack.pop()
            t = self.deref(t)
            if t.__class__ is Var:
                seen.setdefault(t, None)
            elif t.__class__ is Compound:
                if id(t) in visited:
                    continue
                visited.add(id(t))
                stack.extend(reversed(t.args))
        return list(seen)

    # -- telling

    def bind(self, v: Var, t: Term) -> None:
        self._ref[v] = t
        self.trail.append(v)
        self.generation += 1

    def _occurs(self, v: Var, t: Term) -> bool:
        return v in self.free_vars(t)

    def unify(self, a: Term, b: Term) -> bool:
        """Unify ``a`` and ``b``; on failure every binding made is undone."""
        start = len(self.trail)
        stack = [(a, b)]
        while stack:
            x, y = stack.pop()
            x = self.deref(x)
            y = self.deref(y)
            if x is y:
                continue
            xc, yc = x.__class__, y.__class__
            if xc is Var:
                if yc is Var and x == y:
                    continue
                if self.occurs_check and yc is Compound and self._occurs(x, y):
                    self._undo(start)
                    return False
                self.bind(x, y)
            elif yc is Var:
                if self.occurs_check and xc is Compound and self._occurs(y, x):
                    self._undo(start)
                    return False
                self.bind(y, x)
            elif xc is Compound and yc is Compound:
                if x.functor != y.functor or len(x.args) != len(y.args):
                    self._undo(start)
                    return False
                stack.extend(zip(reversed(x.args), reversed(y.args)))
            elif x != y:
                self._undo(start)
                return False
        return True

    # -- checkpoints

    def _undo(self, trail_len: int) -> None:
        ref, trail = self._ref, self.trail
        while len(trail) > trail_len:
            del ref[trail.pop()]

    def checkpoint(self) -> Mark:
        m = Mark(len(self.trail), len(self._marks))
        self._marks.append(m)
        return m

    def undo_to(self, mark: Mark) -> Bindings:
        """Restore the state at ``mark``; ``mark`` and all later marks are released."""
        if mark.released or mark.depth >= len(self._marks) or self._marks[mark.depth] is not mark:
            raise MarkError("mark already released")
        self._undo(mark.trail_len)
        for m in self._marks[mark.depth :]:
            m.released = True
        del self._marks[mark.depth :]
        return self

    def release(self, mark: Mark) -> None:
        """Keep the bindings made since ``mark`` and forget the mark."""
        if mark.released or mark.depth >= len(self._marks) or self._marks[mark.depth] is not mark:
            raise MarkError("mark already released")
        for m in self._marks[mark.depth :]:
            m.released = True
        del self._marks[mark.depth :]

    def snapshot(self) -> dict[Var, Term]:
        return dict(self._ref)


def unify(t1: Term, t2: Term, b: Bindings) -> bool:
    return b.unify(t1, t2)


def identical(a: Term, c: Term, b: Bindings) -> bool:
    """Syntactic identity of two terms under dereferencing (``==``)."""
    stack = [(a, c)]
    while stack:
        x, y = stack.pop()
        x = b.deref(x)
        y = b.deref(y)
        if x is y:
            continue
        if x.__class__ is not y.__class__:
            return False
        if x.__class__ is Compound:
            if x.functor != y.functor or len(x.args) != len(y.args):
                return False
            stack.extend(zip(x.args, y.args))
        elif x != y:
            return False
    return True


# ---------------------------------------------------------------------------
# matching


def _match(p: Term, c: Term, b: Bindings, theta: dict) -> bool:
    pc = p.__class__
    if pc is Var:
        bound = theta.get(p)
        if bound is None:
            theta[p] = b.deref(c)
            return True
        return identical(bound, c, b)
    c = b.deref(c)
    if pc is Compound:
        if c.__class__ is not Compound or c.functor != p.functor or len(c.args) != len(p.args):
            return False
        for pa, ca in zip(p.args, c.args):
            if not _match(pa, ca, b, theta):
                return False
        return True
    return p == c


def match_args(pargs: tuple, cargs: tuple, b: Bindings, theta: dict) -> bool:
    """Extend ``theta`` in place; on failure ``theta`` may hold partial entries."""
    for pa, ca in zip(pargs, cargs):
        if not _match(pa, ca, b, theta):
            return False
    return True


def match(pattern: ConstraintAtom, candidate: ConstraintAtom, b: Bindings, theta: dict | None = None) -> dict | None:
    """One-way matching of a rule-head atom against a store atom.

    Returns the extended substitution, or ``None``.  Never binds anything
    in ``b``.
    """
    if pattern.symbol != candidate.symbol or len(pattern.args) != len(candidate.args):
        return None
    out = dict(theta) if theta else {}
    if match_args(pattern.args, candidate.args, b, out):
        return out
    return None


def instantiate(t: Term, theta: dict, b: Bindings | None = None, fresh: dict | None = None) -> Term:
    """Apply ``theta``; rule variables it does not cover get fresh variables from ``b``."""
    cls = t.__class__
    if cls is Var:
        v = theta.get(t)
        if v is not None:
            return v
        if fresh is None or b is None:
            return t
        v = fresh.get(t)
        if v is None:
            v = fresh[t] = b.fresh(t.name.lstrip("_%") or "_")
        return v
    if cls is Compound:
        return Compound(t.functor, tuple(instantiate(a, theta, b, fresh) for a in t.args))
    return t


def instantiate_atom(a: ConstraintAtom, theta: dict, b: Bindings | None = None, fresh: dict | None = None) -> ConstraintAtom:
    if not a.args:
        return a
    return ConstraintAtom(a.symbol, tuple(instantiate(x, theta, b, fresh) for x in a.args), a.kind)


# ---------------------------------------------------------------------------
# arithmetic


def eval_arith(t: Term, b: Bindings, theta: dict | None = None) -> int:
    """Integer value of ``t``; ``mod`` is floored (takes the divisor's sign)."""
    cls = t.__class__
    if cls is Var:
        if theta is not None:
            v = theta.get(t)
            if v is not None:
                t = v
        t = b.deref(t)
        cls = t.__class__
        if cls is Var:
            raise NonGroundError(f"unbound variable in arithmetic: {t.name}")
        theta = None
    if cls is Int:
        return t.value
    if cls is Compound:
        f, args = t.functor, t.args
        if len(args) == 2:
            x = eval_arith(args[0], b, theta)
            y = eval_arith(args[1], b, theta)
            if f == "+":
                return x + y
            if f == "-":
                return x - y
            if f == "*":
                return x * y
            if f == "mod":
                if y == 0:
                    raise ArithmeticTypeError("mod by zero")
                return x % y
        elif len(args) == 1 and f == "-":
            return -eval_arith(args[0], b, theta)
        raise ArithmeticTypeError(f"not an arithmetic function: {f}/{len(args)}")
    raise ArithmeticTypeError(f"not a number: {t!r}")


# ---------------------------------------------------------------------------
# guards


class GuardResult(enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    NONGROUND = "nonground"


_COMPARE = {
    "<": lambda x, y: x < y,
    "=<": lambda x, y: x <= y,
    ">": lambda x, y: x > y,
    ">=": lambda x, y: x >= y,
    "=:=": lambda x, y: x == y,
    "=\\=": lambda x, y: x != y,
}


def _subst(t: Term, theta: dict) -> Term:
    if t.__class__ is Var:
        return theta.get(t, t)
    if t.__class__ is Compound:
        return Compound(t.functor, tuple(_subst(a, theta) for a in t.args))
    return t


def check_atom(g: ConstraintAtom, theta: dict, b: Bindings) -> GuardResult:
    """Ask a single built-in under ``theta``.

    ``=`` asks for entailment, which for Herbrand equality without local
    variables is syntactic identity.  ``X is E`` holds when ``X`` is already
    equal to the value of ``E``.
    """
    s = g.symbol
    if s == "true":
        return GuardResult.HOLDS
    if s == "fail":
        return GuardResult.FAILS
    x, y = g.args
    if s in ("==", "="):
        return GuardResult.HOLDS if identical(_subst(x, theta), _subst(y, theta), b) else GuardResult.FAILS
    if s == "\\==":
        return GuardResult.FAILS if identical(_subst(x, theta), _subst(y, theta), b) else GuardResult.HOLDS
    if s == "is":
        s = "=:="
    cmp = _COMPARE.get(s)
    if cmp is None:
        raise CHRError(f"unsupported guard {s}/{len(g.args)}")
    try:
        return GuardResult.HOLDS if cmp(eval_arith(x, b, theta), eval_arith(y, b, theta)) else GuardResult.FAILS
    except NonGroundError:
        return GuardResult.NONGROUND
    except ArithmeticTypeError:
        return GuardResult.FAILS


def check_guard(guard: Iterable[ConstraintAtom], theta: dict, b: Bindings) -> GuardResult:
    """Evaluate a guard conjunction left to right without binding anything."""
    for g in guard:
        r = check_atom(g, theta, b)
        if r is not GuardResult.HOLDS:
            return r
    return GuardResult.HOLDS


def guard_holds(guard, theta: dict, b: Bindings) -> bool:
    return check_guard(guard, theta, b) is GuardResult.HOLDS


# ---------------------------------------------------------------------------
# compiled guards
#
# Guards are compiled once into closures; :func:`check_guard` remains the
# reference interpreter they are tested against.

_ARITH_OPS = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def _mod(x: int, y: int) -> int:
    if y == 0:
        raise ArithmeticTypeError("mod by zero")
    return x % y


def compile_arith(t: Term) -> Callable[[dict, Bindings], int]:
    """Closure computing ``eval_arith(t, b, theta)``."""
    cls = t.__class__
    if cls is Int:
        value = t.value
        return lambda theta, b: value
    if cls is Var:
        v = t

        def var(theta: dict, b: Bindings) -> int:
            x = b.deref(theta.get(v, v))
            if x.__class__ is Int:
                return x.value
            return eval_arith(x, b)

        return var
    if cls is Compound:
        f, args = t.functor, t.args
        if len(args) == 2 and (f in _ARITH_OPS or f == "mod"):
            op = _ARITH_OPS.get(f, _mod)
            fx, fy = compile_arith(args[0]), compile_arith(args[1])
            return lambda theta, b: op(fx(theta, b), fy(theta, b))
        if len(args) == 1 and f == "-":
            fx = compile_arith(args[0])
            return lambda theta, b: -fx(theta, b)
    return lambda theta, b: eval_arith(t, b, theta)


def _compile_atom(g: ConstraintAtom) -> Callable[[dict, Bindings], GuardResult]:
    s = "=:=" if g.symbol == "is" else g.symbol
    cmp = _COMPARE.get(s)
    if cmp is None:
        return lambda theta, b: check_atom(g, theta, b)
    fx, fy = compile_arith(g.args[0]), compile_arith(g.args[1])
    holds, fails, nonground = GuardResult.HOLDS, GuardResult.FAILS, GuardResult.NONGROUND

    def test(theta: dict, b: Bindings) -> GuardResult:
        try:
            return holds if cmp(fx(theta, b), fy(theta, b)) else fails
        except NonGroundError:
            return nonground
        except ArithmeticTypeError:
            return fails

    return test


@functools.lru_cache(maxsize=None)
def compile_guard(guard: tuple[ConstraintAtom, ...]) -> Callable[[dict, Bindings], GuardResult]:
    """Closure equivalent to ``check_guard(guard, theta, b)``."""
    tests = [_compile_atom(g) for g in guard if g.symbol != "true"]
    holds = GuardResult.HOLDS
    if not tests:
        return lambda theta, b: holds
    if len(tests) == 1:
        return tests[0]

    def conj(theta: dict, b: Bindings) -> GuardResult:
        for test in tests:
            r = test(theta, b)
            if r is not holds:
                return r
        return holds

    return conj


# ---------------------------------------------------------------------------
# telling built-ins


class SolveOutcome(enum.Enum):
    OK = "ok"
    FAIL = "fail"
    ERROR = "error"


def solve(c: ConstraintAtom, b: Bindings) -> tuple[SolveOutcome, str]:
    """Add built-in ``c`` to the store.  Returns (outcome, message)."""
    s = c.symbol
    if s == "true":
        return SolveOutcome.OK, ""
    if s == "fail":
        return SolveOutcome.FAIL, ""
    x, y = c.args
    if s == "=":
        return (SolveOutcome.OK, "") if b.unify(x, y) else (SolveOutcome.FAIL, "")
    if s == "is":
        try:
            v = eval_arith(y, b)
        except EvaluationError as e:
            return SolveOutcome.ERROR, str(e)
        return (SolveOutcome.OK, "") if b.unify(x, Int(v)) else (SolveOutcome.FAIL, "")
    if s in ("==", "\\=="):
        ok = identical(x, y, b) == (s == "==")
        return (SolveOutcome.OK, "") if ok else (SolveOutcome.FAIL, "")
    cmp = _COMPARE.get(s)
    if cmp is None:
        return SolveOutcome.ERROR, f"unknown built-in {s}/{len(c.args)}"
    try:
        ok = cmp(eval_arith(x, b), eval_arith(y, b))
    except EvaluationError as e:
        return SolveOutcome.ERROR, str(e)
    return (SolveOutcome.OK, "") if ok else (SolveOutcome.FAIL, "")

