"""Exact rationals, finite structures, assignments and weighted teams.

Teams store their rows as tuples of domain values aligned with an ordered
variable list, which keeps lookups cheap and iteration deterministic.

>>> t = WeightedTeam(("x", "y"), {("0", "1"): Fraction(1, 2), ("0", "0"): Fraction(1, 2)})
>>> project(t, ["x"]).rows
{('0',): Fraction(1, 1)}
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

from .errors import EmptyRange, StructureError, UnknownVariable, VariableMismatch

Rational = Fraction
RationalLike = Union[int, str, Fraction]


def to_rational(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions and ``p/q`` strings to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not weights")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational: {value!r}") from None
    raise TypeError(f"cannot use {type(value).__name__} as an exact rational")


def format_rational(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# structures


@dataclass(frozen=True)
class WeightFunction:
    name: str
    arity: int
    values: Mapping[tuple, Fraction]
    distribution: bool = False

    def __call__(self, *args):
        return self.values[tuple(args)]

    @property
    def total(self) -> Fraction:
        return sum(self.values.values(), Fraction(0))


@dataclass(frozen=True)
class Structure:
    """Finite domain with named relations and rational weight functions."""

    domain: tuple
    relations: Mapping[str, tuple] = field(default_factory=dict)
    functions: Mapping[str, WeightFunction] = field(default_factory=dict)
    order: tuple | None = None

    def __post_init__(self):
        dom = tuple(str(a) for a in self.domain)
        if len(set(dom)) != len(dom):
            raise StructureError("domain elements must be distinct")
        if self.order is not None:
            order = tuple(str(a) for a in self.order)
            if sorted(order) != sorted(dom):
                raise StructureError("order must list exactly the domain elements")
            dom = order
            object.__setattr__(self, "order", order)
        object.__setattr__(self, "domain", dom)
        members = set(dom)
        rels = {}
        for name, spec in dict(self.relations).items():
            arity, tuples = spec
            tuples = frozenset(tuple(str(a) for a in t) for t in tuples)
            for t in tuples:
                if len(t) != arity:
                    raise StructureError(f"relation {name}/{arity} has tuple {t} of wrong length")
                if not set(t) <= members:
                    raise StructureError(f"relation {name} uses values outside the domain: {t}")
            rels[name] = (int(arity), tuples)
        object.__setattr__(self, "relations", rels)
        fns = {}
        for name, fn in dict(self.functions).items():
            values = {tuple(str(a) for a in k): to_rational(v) for k, v in fn.values.items()}
            for key in values:
                if len(key) != fn.arity or not set(key) <= members:
                    raise StructureError(f"function {name} has bad argument {key}")
            for key in itertools.product(dom, repeat=fn.arity):
                if key not in values:
                    raise StructureError(f"function {name} is not total: missing {key}")
            total = sum(values.values(), Fraction(0))
            if fn.distribution and total != 1:
                raise StructureError(f"distribution {name} sums to {total}, not 1")
            fns[name] = WeightFunction(name, fn.arity, values, fn.distribution)
        object.__setattr__(self, "functions", fns)

    @property
    def size(self) -> int:
        return len(self.domain)

    def index(self, element: str) -> int:
        return self.domain.index(element)

    def holds(self, relation: str, args: tuple) -> bool:
        try:
            arity, tuples = self.relations[relation]
        except KeyError:
            raise StructureError(f"unknown relation {relation}") from None
        if arity != len(args):
            raise StructureError(f"relation {relation} has arity {arity}, got {len(args)} arguments")
        return tuple(args) in tuples

    def value(self, function: str, args: tuple) -> Fraction:
        try:
            fn = self.functions[function]
        except KeyError:
            raise StructureError(f"unknown function {function}") from None
        return fn.values[tuple(args)]

    def with_functions(self, extra: Mapping[str, WeightFunction]) -> "Structure":
        fns = dict(self.functions)
        fns.update(extra)
        return Structure(self.domain, self.relations, fns)

    def rename(self, mapping: Mapping[str, str]) -> "Structure":
        """Isomorphic copy with domain elements renamed."""
        m = lambda t: tuple(mapping[a] for a in t)
        rels = {n: (a, {m(t) for t in ts}) for n, (a, ts) in self.relations.items()}
        fns = {
            n: WeightFunction(n, f.arity, {m(k): v for k, v in f.values.items()}, f.distribution)
            for n, f in self.functions.items()
        }
        return Structure(tuple(mapping[a] for a in self.domain), rels, fns)


# assignments and teams


class Assignment(Mapping):
    """Immutable, hashable map from variables to domain values."""

    __slots__ = ("_items",)

    def __init__(self, bindings: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        items = dict(bindings)
        object.__setattr__(self, "_items", tuple(sorted(items.items())))

    def __getitem__(self, key):
        for k, v in self._items:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self):
        return (k for k, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return hash(self._items)

    def __eq__(self, other):
        if isinstance(other, Assignment):
            return self._items == other._items
        return isinstance(other, Mapping) and dict(self) == dict(other)

    def __repr__(self):
        return "Assignment(" + ", ".join(f"{k}={v}" for k, v in self._items) + ")"

    def extend(self, var: str, value: str) -> "Assignment":
        d = dict(self._items)
        d[var] = value
        return Assignment(d)


class WeightedTeam:
    """Finite map from assignments over ``variables`` to non-negative rationals."""

    __slots__ = ("variables", "_rows")

    def __init__(self, variables: Iterable[str], rows: Mapping | Iterable = ()):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise VariableMismatch(f"repeated variable in {variables}")
        items = rows.items() if isinstance(rows, Mapping) else rows
        table: dict[tuple, Fraction] = {}
        for key, weight in items:
            if isinstance(key, Mapping):
                if set(key) != set(variables):
                    raise VariableMismatch(f"assignment over {sorted(key)} in team over {variables}")
                key = tuple(key[v] for v in variables)
            else:
                key = tuple(key)
                if len(key) != len(variables):
                    raise VariableMismatch(f"row {key} does not match variables {variables}")
            w = to_rational(weight)
            if w < 0:
                raise ValueError(f"negative weight {w}")
            table[key] = table.get(key, Fraction(0)) + w
        self.variables = variables
        self._rows = table

    @property
    def rows(self) -> dict[tuple, Fraction]:
        return dict(self._rows)

    def items(self):
        return self._rows.items()

    def weight(self, row) -> Fraction:
        if isinstance(row, Mapping):
            row = tuple(row[v] for v in self.variables)
        return self._rows.get(tuple(row), Fraction(0))

    @property
    def total(self) -> Fraction:
        return sum(self._rows.values(), Fraction(0))

    def __len__(self):
        return len(self._rows)

    @property
    def support(self) -> list[tuple]:
        return [k for k, w in self._rows.items() if w > 0]

    def support_set(self) -> frozenset:
        return frozenset(self.support)

    def is_probabilistic(self) -> bool:
        return self.total == 1

    def assignments(self) -> Iterator[tuple[dict, Fraction]]:
        for key, w in self._rows.items():
            yield dict(zip(self.variables, key)), w

    def column(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise UnknownVariable(f"variable {var} not in team over {self.variables}") from None

    def values_of(self, vars_: Iterable[str], row: tuple) -> tuple:
        return tuple(row[self.column(v)] for v in vars_)

    def mass(self, predicate: Callable[[dict], bool]) -> Fraction:
        """Total weight of rows whose assignment satisfies ``predicate``."""
        total = Fraction(0)
        for assignment, w in self.assignments():
            if predicate(assignment):
                total += w
        return total

    def reorder(self, variables: Iterable[str]) -> "WeightedTeam":
        variables = tuple(variables)
        if set(variables) != set(self.variables) or len(variables) != len(self.variables):
            raise VariableMismatch(f"cannot reorder {self.variables} as {variables}")
        idx = [self.column(v) for v in variables]
        return WeightedTeam(variables, {tuple(k[i] for i in idx): w for k, w in self._rows.items()})

    def _canonical(self):
        order = sorted(range(len(self.variables)), key=lambda i: self.variables[i])
        rows = {}
        for k, w in self._rows.items():
            if w:
                rows[tuple(k[i] for i in order)] = w
        return tuple(self.variables[i] for i in order), rows

    def __eq__(self, other):
        if not isinstance(other, WeightedTeam):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self):
        vs, rows = self._canonical()
        return hash((vs, frozenset(rows.items())))

    def __repr__(self):
        body = "; ".join(
            ",".join(f"{v}:{a}" for v, a in zip(self.variables, k)) + f" -> {format_rational(w)}"
            for k, w in sorted(self._rows.items())
        )
        return f"WeightedTeam({list(self.variables)}, {{{body}}})"


def sentence_team() -> WeightedTeam:
    """The team mapping the empty assignment to 1."""
    return WeightedTeam((), {(): 1})


def uniform_team(variables: Iterable[str], rows: Iterable) -> WeightedTeam:
    rows = list(dict.fromkeys(tuple(r) if not isinstance(r, Mapping) else r for r in rows))
    if not rows:
        return WeightedTeam(variables, {})
    w = Fraction(1, len(rows))
    return WeightedTeam(variables, [(r, w) for r in rows])


def project(team: WeightedTeam, vars_: Iterable[str]) -> WeightedTeam:
    """Marginal of ``team`` on ``vars_`` (kept in the given order)."""
    vars_ = tuple(dict.fromkeys(vars_))
    idx = [team.column(v) for v in vars_]
    out: dict[tuple, Fraction] = {}
    for k, w in team.items():
        key = tuple(k[i] for i in idx)
        out[key] = out.get(key, Fraction(0)) + w
    return WeightedTeam(vars_, out)


def duplicate(team: WeightedTeam, values: Iterable[str], x: str) -> WeightedTeam:
    """The uniform extension X[A/x]; an existing column ``x`` is replaced."""
    values = list(dict.fromkeys(values))
    if not values:
        raise EmptyRange("duplicate needs a nonempty value set")
    if x in team.variables:
        team = project(team, [v for v in team.variables if v != x])
    share = Fraction(1, len(values))
    out = {}
    for k, w in team.items():
        for a in values:
            out[k + (a,)] = w * share
    return WeightedTeam(team.variables + (x,), out)


def restrict(team: WeightedTeam, cond, structure: Structure | None = None) -> WeightedTeam:
    """Keep the rows satisfying ``cond``, a callable on assignments or a first-order formula."""
    if not callable(cond):
        from .semantics import eval_first_order

        formula = cond
        cond = lambda s: eval_first_order(formula, structure, s)
    out = {}
    for k, w in team.items():
        if cond(dict(zip(team.variables, k))):
            out[k] = w
    return WeightedTeam(team.variables, out)


def _aligned(a: WeightedTeam, b: WeightedTeam) -> WeightedTeam:
    if set(a.variables) != set(b.variables):
        raise VariableMismatch(f"teams over {a.variables} and {b.variables}")
    return b if a.variables == b.variables else b.reorder(a.variables)


def scale(r: RationalLike, team: WeightedTeam) -> WeightedTeam:
    r = to_rational(r)
    if r <= 0:
        raise ValueError("scale factor must be positive")
    return WeightedTeam(team.variables, {k: w * r for k, w in team.items()})


def add(y: WeightedTeam, z: WeightedTeam) -> WeightedTeam:
    z = _aligned(y, z)
    out = dict(y.items())
    for k, w in z.items():
        out[k] = out.get(k, Fraction(0)) + w
    return WeightedTeam(y.variables, out)


def combine(alpha: RationalLike, y: WeightedTeam, z: WeightedTeam) -> WeightedTeam:
    """Pointwise alpha*Y + (1-alpha)*Z."""
    alpha = to_rational(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    z = _aligned(y, z)
    out: dict[tuple, Fraction] = {}
    for k, w in y.items():
        out[k] = out.get(k, Fraction(0)) + alpha * w
    for k, w in z.items():
        out[k] = out.get(k, Fraction(0)) + (1 - alpha) * w
    return WeightedTeam(y.variables, out)


def normalize(team: WeightedTeam) -> WeightedTeam:
    total = team.total
    if total == 0:
        return team
    return scale(1 / total, team)


def drop_zero_rows(team: WeightedTeam) -> WeightedTeam:
    return WeightedTeam(team.variables, {k: w for k, w in team.items() if w})
