"""Exact rational linear systems: grounding ESO sentences into LP families,
feasibility by simplex or Fourier-Motzkin, and the .lin text format."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .core import Structure, format_rational, to_rational
from .errors import FormatError, NotAlmostConjunctive, TeamLPError
from .semantics import eval_first_order, resolve
from .syntax import (
    Add,
    And,
    Apply,
    Bottom,
    Const,
    Exists,
    FnExists,
    Forall,
    Formula,
    NotLe,
    NumEq,
    NumLe,
    Or,
    Sum,
    Term,
    Top,
    free_vars,
    is_first_order,
    split_conjuncts,
    to_text,
    walk,
)

RELS = ("<=", "<", "=")


@dataclass(frozen=True, order=True)
class LinVar:
    """LP column: the value of function ``fn`` at argument tuple ``args``."""

    fn: str
    args: tuple = ()

    def __str__(self):
        return f"{self.fn}({','.join(self.args)})"

    @classmethod
    def parse(cls, text: str) -> "LinVar":
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise FormatError(f"bad variable key {text!r}")
        name, rest = text.split("(", 1)
        inner = rest[:-1]
        return cls(name, tuple(a for a in inner.split(",") if a) if inner else ())


class LinConstraint:
    """sum(coeffs[v] * v) REL rhs, normalised to coprime integer coefficients."""

    __slots__ = ("coeffs", "rel", "rhs", "_hash")

    def __init__(self, coeffs: Mapping | Iterable, rel: str, rhs=0, normalize: bool = True):
        if rel not in RELS:
            raise ValueError(f"relation must be one of {RELS}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict = {}
        for v, c in items:
            if type(c) not in _EXACT:
                c = to_rational(c)
            if c:
                merged[v] = merged.get(v, 0) + c
        merged = {v: c for v, c in merged.items() if c}
        if type(rhs) not in _EXACT:
            rhs = to_rational(rhs)
        if normalize:
            merged, rhs = _normalize(merged, rhs, rel)
        self.coeffs = tuple(sorted(merged.items(), key=lambda kv: kv[0]))
        self.rel = rel
        self.rhs = rhs
        self._hash = hash((self.coeffs, rel, rhs))

    def as_dict(self) -> dict:
        return dict(self.coeffs)

    @property
    def variables(self):
        return [v for v, _ in self.coeffs]

    def is_trivial(self) -> bool:
        return not self.coeffs

    def holds(self, point: Mapping) -> bool:
        lhs = 0
        for v, c in self.coeffs:
            x = point.get(v, 0)
            if x:
                lhs += c * x
        if self.rel == "<=":
            return lhs <= self.rhs
        if self.rel == "<":
            return lhs < self.rhs
        return lhs == self.rhs

    def __eq__(self, other):
        return (
            isinstance(other, LinConstraint)
            and self.coeffs == other.coeffs
            and self.rel == other.rel
            and self.rhs == other.rhs
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"LinConstraint({self})"

    def __str__(self):
        if not self.coeffs:
            lhs = "0"
        else:
            parts = []
            for v, c in self.coeffs:
                if c == 1:
                    parts.append(f"{v}")
                elif c == -1:
                    parts.append(f"-{v}")
                else:
                    parts.append(f"{format_rational(c)}*{v}")
            lhs = " + ".join(parts).replace("+ -", "- ")
        return f"{lhs} {self.rel} {format_rational(self.rhs)}"


_EXACT = (int, Fraction)


def _normalize(coeffs: dict, rhs, rel: str):
    """Scale to coprime integers (kept as ints); '=' rows get a positive leading coefficient."""
    vals = list(coeffs.values()) + [rhs]
    den = 1
    for q in vals:
        d = q.denominator
        if d != 1:
            den = den * d // math.gcd(den, d)
    nums = [q.numerator * (den // q.denominator) for q in vals]
    g = math.gcd(*nums)
    if g == 0:
        return coeffs, rhs
    if rel == "=" and coeffs:
        first = min(coeffs)
        if coeffs[first] < 0:
            g = -g
    keys = list(coeffs)
    return {v: n // g for v, n in zip(keys, nums)}, nums[-1] // g


FALSE_ROW = LinConstraint({}, "<=", -1)


@dataclass(frozen=True)
class FunctionSort:
    name: str
    arity: int
    sort: str


@dataclass
class LinearSystem:
    """Constraints over declared variables plus range constraints implied by sorts."""

    variables: tuple
    constraints: tuple
    sorts: tuple = ()
    _ranges: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.constraints = tuple(dict.fromkeys(self.constraints))
        self.sorts = tuple(self.sorts)

    def _vars_of(self, fn: str):
        return [v for v in self.variables if v.fn == fn]

    @property
    def range_constraints(self) -> tuple:
        if self._ranges is None:
            rows = []
            for s in self.sorts:
                vs = self._vars_of(s.name)
                if s.sort in ("U", "D"):
                    rows.extend(LinConstraint({v: -1}, "<=", 0) for v in vs)
                if s.sort == "U":
                    rows.extend(LinConstraint({v: 1}, "<=", 1) for v in vs)
                if s.sort == "D":
                    rows.append(LinConstraint({v: 1 for v in vs}, "=", 1))
            self._ranges = tuple(rows)
        return self._ranges

    def bounds(self) -> dict:
        """Per-variable (lower, upper) bounds implied by the sorts."""
        out = {}
        for s in self.sorts:
            if s.sort == "R":
                continue
            hi = Fraction(1) if s.sort == "U" else None
            for v in self._vars_of(s.name):
                out[v] = (Fraction(0), hi)
        return out

    def distribution_rows(self) -> list:
        rows = []
        for s in self.sorts:
            if s.sort == "D":
                rows.append(LinConstraint({v: 1 for v in self._vars_of(s.name)}, "=", 1))
        return rows

    @property
    def all_constraints(self) -> tuple:
        return tuple(dict.fromkeys(self.constraints + self.range_constraints))

    def has_strict(self) -> bool:
        return any(c.rel == "<" for c in self.constraints)

    def has_integer_coefficients(self) -> bool:
        return all(
            q.denominator == 1 for c in self.all_constraints for q in [c.rhs] + [a for _, a in c.coeffs]
        )

    def check_point(self, point: Mapping) -> bool:
        if not all(c.holds(point) for c in self.constraints):
            return False
        by_fn: dict = {}
        for v in self.variables:
            by_fn.setdefault(v.fn, []).append(point.get(v, 0))
        for s in self.sorts:
            vals = by_fn.get(s.name, [])
            if s.sort == "R":
                continue
            if any(x < 0 for x in vals):
                return False
            if s.sort == "U" and any(x > 1 for x in vals):
                return False
            if s.sort == "D" and sum(vals) != 1:
                return False
        return True

    def same_constraints(self, other: "LinearSystem") -> bool:
        return set(self.variables) == set(other.variables) and set(self.all_constraints) == set(
            other.all_constraints
        )

    def __len__(self):
        return len(self.constraints)


@dataclass
class LpFamily:
    """Linear systems indexed by assignments to the existential first-order variables."""

    free: tuple
    systems: list
    pruned: list = field(default_factory=list)

    def labels(self):
        return [label for label, _ in self.systems]

    def __len__(self):
        return len(self.systems)

    def equivalent(self, other: "LpFamily") -> bool:
        if self.labels() != other.labels() or [p[0] for p in self.pruned] != [p[0] for p in other.pruned]:
            return False
        return all(a.same_constraints(b) for (_, a), (_, b) in zip(self.systems, other.systems))


# grounding


class GAnd(tuple):
    pass


class GOr(tuple):
    pass


def g_and(parts) -> object:
    out = []
    for p in parts:
        if p is True:
            continue
        if p is False:
            return False
        if isinstance(p, GAnd):
            out.extend(p)
        else:
            out.append(p)
    if not out:
        return True
    if len(out) == 1:
        return out[0]
    return GAnd(out)


def g_or(parts) -> object:
    out = []
    for p in parts:
        if p is False:
            continue
        if p is True:
            return True
        if isinstance(p, GOr):
            out.extend(p)
        else:
            out.append(p)
    if not out:
        return False
    if len(out) == 1:
        return out[0]
    return GOr(out)


class Grounder:
    """Grounds formulas of additive ESO under assignments into linear constraints.

    Quantified function symbols become LP variables; free ones are looked up in
    the structure (or ``functions``).  First-order quantifiers are expanded over
    the domain, universal ones conjunct by conjunct.
    """

    def __init__(self, structure: Structure, quantified: Iterable[str], functions: Mapping | None = None):
        self.A = structure
        self.quantified = frozenset(quantified)
        self.functions = dict(structure.functions)
        if functions:
            self.functions.update(functions)
        self._dep_cache = {}

    def depends(self, phi) -> bool:
        key = id(phi)
        hit = self._dep_cache.get(key)
        if hit is None:
            hit = (any(isinstance(n, Apply) and n.name in self.quantified for n in walk(phi)), phi)
            self._dep_cache[key] = hit
        return hit[0]

    def _first_order(self, phi) -> bool:
        key = ("fo", id(phi))
        hit = self._dep_cache.get(key)
        if hit is None:
            hit = (is_first_order(phi), phi)
            self._dep_cache[key] = hit
        return hit[0]

    # terms
    def linear(self, t: Term, s: dict, out: dict, coef=1) -> Fraction:
        """Accumulate coef*t into ``out``; returns the constant part."""
        if isinstance(t, Const):
            return coef * t.value
        if isinstance(t, Apply):
            args = tuple(resolve(a, s, self.A) for a in t.args)
            if t.name in self.quantified:
                v = LinVar(t.name, args)
                out[v] = out.get(v, 0) + coef
                return 0
            fn = self.functions.get(t.name)
            if fn is None:
                raise TeamLPError(f"function {t.name} is neither quantified nor interpreted")
            return coef * fn.values[args]
        if isinstance(t, Add):
            return self.linear(t.left, s, out, coef) + self.linear(t.right, s, out, coef)
        if isinstance(t, Sum):
            total = 0
            for values in itertools.product(self.A.domain, repeat=len(t.vars)):
                inner = dict(s)
                inner.update(zip(t.vars, values))
                total += self.linear(t.body, inner, out, coef)
            return total
        raise TeamLPError(f"unsupported term {type(t).__name__}")

    def atom(self, phi, s: dict):
        # out*z + c stands for left - right
        out: dict = {}
        c = self.linear(phi.left, s, out) + self.linear(phi.right, s, out, -1)
        if isinstance(phi, NotLe):
            # not (l <= r)  iff  r - l < 0
            row = LinConstraint({v: -a for v, a in out.items()}, "<", c)
        else:
            row = LinConstraint(out, "=" if isinstance(phi, NumEq) else "<=", -c)
        if row.is_trivial():
            return row.holds({})
        return row

    def ground(self, phi: Formula, s: dict):
        if isinstance(phi, (NumEq, NumLe, NotLe)):
            return self.atom(phi, s)
        if isinstance(phi, And):
            left = self.ground(phi.left, s)
            if left is False:
                return False
            return g_and([left, self.ground(phi.right, s)])
        if isinstance(phi, Or):
            if not self.depends(phi.left):
                if self.ground(phi.left, s) is True:
                    return True
                return self.ground(phi.right, s)
            if not self.depends(phi.right):
                if self.ground(phi.right, s) is True:
                    return True
                return self.ground(phi.left, s)
            return g_or([self.ground(phi.left, s), self.ground(phi.right, s)])
        if isinstance(phi, Forall):
            return self.ground_forall([phi.var], phi.body, s)
        if isinstance(phi, Exists):
            parts = []
            for a in self.A.domain:
                g = self.ground(phi.body, {**s, phi.var: a})
                if g is True:
                    return True
                parts.append(g)
            return g_or(parts)
        if isinstance(phi, FnExists):
            raise TeamLPError("function quantifier inside the matrix; prenex the formula first")
        if isinstance(phi, (Top, Bottom)) or self._first_order(phi):
            return eval_first_order(phi, self.A, s)
        raise TeamLPError(f"cannot ground {type(phi).__name__}")

    def ground_forall(self, vars_, body, s):
        """Ground a universal block conjunct by conjunct over the variables each uses."""
        while isinstance(body, Forall):
            vars_ = vars_ + [body.var]
            body = body.body
        parts = []
        for conjunct in split_conjuncts(body):
            g = self.ground_conjunct(vars_, conjunct, s)
            if g is False:
                return False
            parts.append(g)
        return g_and(parts)

    def instances(self, vars_, conjunct, s):
        fv = free_vars(conjunct)
        used = [v for v in dict.fromkeys(vars_) if v in fv]
        # innermost binding wins for repeated names
        for values in itertools.product(self.A.domain, repeat=len(used)):
            inner = dict(s)
            inner.update(zip(used, values))
            yield inner

    def ground_conjunct(self, vars_, conjunct, s):
        parts = []
        for inner in self.instances(vars_, conjunct, s):
            g = self.ground(conjunct, inner)
            if g is False:
                return False
            parts.append(g)
        return g_and(parts)


def _flatten_rows(g) -> list:
    if g is True:
        return []
    if g is False:
        return [FALSE_ROW]
    if isinstance(g, LinConstraint):
        return [g]
    if isinstance(g, GAnd):
        out = []
        for p in g:
            out.extend(_flatten_rows(p))
        return out
    raise NotAlmostConjunctive("disjunction with two function-dependent sides survived grounding")


def split_prefix(phi: Formula):
    """Return (existential vars, function sorts, universal vars, matrix)."""
    ys, fns, xs = [], [], []
    while True:
        if isinstance(phi, Exists):
            if xs:
                break
            ys.append(phi.var)
        elif isinstance(phi, FnExists):
            if xs:
                raise TeamLPError("function quantifier under a universal quantifier; prenex the formula first")
            fns.append(FunctionSort(phi.name, phi.arity, phi.sort))
        elif isinstance(phi, Forall):
            xs.append(phi.var)
        else:
            break
        phi = phi.body
    return ys, fns, xs, phi


def declared_variables(structure: Structure, fns) -> tuple:
    out = []
    for f in fns:
        out.extend(LinVar(f.name, args) for args in itertools.product(structure.domain, repeat=f.arity))
    return tuple(out)


def relaxed_almost_conjunctive(phi: Formula, quantified) -> Formula | None:
    """First disjunction whose two sides both mention quantified functions, if any."""
    q = frozenset(quantified)
    dep = lambda n: any(isinstance(m, Apply) and m.name in q for m in walk(n))
    for n in walk(phi):
        if isinstance(n, Or) and dep(n.left) and dep(n.right):
            return n
    return None


def reduce_to_lp_family(phi: Formula, structure: Structure, s: Mapping | None = None,
                        functions: Mapping | None = None) -> LpFamily:
    """Ground an ESO sentence E y Ef f A x theta into one linear system per value of y."""
    s = dict(s or {})
    ys, fns, xs, matrix = split_prefix(phi)
    if any(isinstance(n, FnExists) for n in walk(matrix)):
        raise TeamLPError("function quantifier inside the matrix; prenex the formula first")
    quantified = [f.name for f in fns]
    q = frozenset(quantified)
    for n in walk(matrix):
        # existentials over function-free bodies are decided while grounding
        if isinstance(n, Exists) and any(isinstance(m, Apply) and m.name in q for m in walk(n.body)):
            raise NotAlmostConjunctive("first-order existential under a universal quantifier", n)
    bad = relaxed_almost_conjunctive(matrix, quantified)
    if bad is not None:
        raise NotAlmostConjunctive(f"both sides of {to_text(bad)} depend on quantified functions", bad)
    g = Grounder(structure, quantified, functions)
    variables = declared_variables(structure, fns)
    conjuncts = split_conjuncts(matrix)
    systems, pruned = [], []
    for values in itertools.product(structure.domain, repeat=len(ys)):
        v = dict(zip(ys, values))
        label = tuple(zip(ys, values))
        sv = {**s, **v}
        rows = []
        failed = None
        for c in conjuncts:
            dependent = g.depends(c)
            for inner in g.instances(xs, c, sv):
                out = g.ground(c, inner)
                if out is False and not dependent:
                    shown = {x: inner[x] for x in xs if x in free_vars(c)}
                    failed = f"{to_text(c)} [{', '.join(f'{k}={a}' for k, a in shown.items())}]"
                    break
                rows.extend(_flatten_rows(out))
            if failed:
                break
        if failed:
            pruned.append((label, failed))
            continue
        systems.append((label, LinearSystem(variables, tuple(rows), tuple(fns))))
    return LpFamily(tuple(ys), systems, pruned)


# feasibility


@dataclass
class Verdict:
    feasible: bool
    point: dict | None = None
    stats: dict = field(default_factory=dict)

    def __bool__(self):
        return self.feasible


def feasible_simplex(system: LinearSystem, **options) -> Verdict:
    from .lpsolve import solve_system

    return solve_system(system, **options)


def feasible_fm(system: LinearSystem, max_rows: int = 4000) -> bool:
    from .fm import fm_feasible

    return fm_feasible(system, max_rows=max_rows)


def family_feasible(family: LpFamily, engine: str = "simplex", jobs: int = 1):
    """First feasible member (label, verdict) or None."""
    members = family.systems
    if jobs > 1 and len(members) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_member, [(sys, engine) for _, sys in members]))
        for (label, _), res in zip(members, results):
            if res.feasible:
                return label, res
        return None
    for label, sys in members:
        res = _solve_member((sys, engine))
        if res.feasible:
            return label, res
    return None


def _solve_member(arg):
    sys, engine = arg
    if engine == "fm":
        return Verdict(feasible_fm(sys))
    return feasible_simplex(sys)


# .lin format


def _label_text(label) -> str:
    return ",".join(f"{k}:{a}" for k, a in label)


def _parse_label(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(","):
        k, _, a = part.partition(":")
        out.append((k, a))
    return tuple(out)


def format_lin(family: LpFamily) -> str:
    variables = []
    seen = set()
    for _, sys in family.systems:
        for v in sys.variables:
            if v not in seen:
                seen.add(v)
                variables.append(v)
    index = {v: i for i, v in enumerate(variables)}
    lines = [f"vars {len(variables)}"]
    for i, v in enumerate(variables, 1):
        lines.append(f"var {i} {v}")
    for label, sys in family.systems:
        lines.append(f"system v={_label_text(label)}")
        for c in sys.all_constraints:
            row = ["0"] * len(variables)
            for v, a in c.coeffs:
                row[index[v]] = format_rational(a)
            lines.append(" ".join(row + [c.rel, format_rational(c.rhs)]))
    for label, why in family.pruned:
        lines.append(f"# pruned v={_label_text(label)} by {why}")
    return "\n".join(lines) + "\n"


def parse_lin(text: str) -> LpFamily:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("vars "):
        raise FormatError("first line must be 'vars <n>'", 1)
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise FormatError("bad vars line", 1) from None
    variables = [None] * n
    systems, pruned = [], []
    current = None
    rows: list = []
    free: tuple = ()

    def close():
        if current is not None:
            systems.append((current, LinearSystem(tuple(variables), tuple(rows))))

    for lineno, raw in enumerate(lines[1:], 2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("# pruned v="):
            head, _, why = line[len("# pruned v="):].partition(" by ")
            pruned.append((_parse_label(head), why))
            continue
        if line.startswith("#"):
            continue
        if line.startswith("var "):
            parts = line.split(None, 2)
            idx = int(parts[1])
            if not 1 <= idx <= n:
                raise FormatError(f"variable index {idx} out of range", lineno)
            variables[idx - 1] = LinVar.parse(parts[2])
            continue
        if line.startswith("system"):
            close()
            current = _parse_label(line.split("v=", 1)[1] if "v=" in line else "")
            free = tuple(k for k, _ in current)
            rows = []
            continue
        if None in variables:
            raise FormatError("constraint before all variables are declared", lineno)
        parts = line.split()
        if len(parts) != n + 2 or parts[-2] not in RELS:
            raise FormatError(f"expected {n} coefficients, a relation and a constant", lineno)
        try:
            coeffs = {variables[i]: Fraction(p) for i, p in enumerate(parts[:n]) if Fraction(p)}
            rows.append(LinConstraint(coeffs, parts[-2], Fraction(parts[-1])))
        except (ValueError, ZeroDivisionError):
            raise FormatError("bad rational", lineno) from None
    close()
    return LpFamily(free, systems, pruned)


def export_lp(family: LpFamily, path) -> None:
    Path(path).write_text(format_lin(family), encoding="utf-8")


def import_lp(path) -> LpFamily:
    return parse_lin(Path(path).read_text(encoding="utf-8"))
