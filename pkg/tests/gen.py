"""Seeded random generators for formulas, teams, systems and implication instances."""
from __future__ import annotations

import random
from fractions import Fraction as F

from hypothesis import strategies as st

from teamlp.core import Structure, WeightedTeam
from teamlp.linear import LinConstraint, LinearSystem, LinVar
from teamlp.syntax import (
    Add,
    And,
    Apply,
    Const,
    Dependence,
    Eq,
    Equiextension,
    Exists,
    FnExists,
    Forall,
    Inclusion,
    MarginalIdentity,
    Neq,
    NotLe,
    NumEq,
    NumLe,
    Or,
    ProbIndependence,
    Rel,
    Sum,
)

A2 = Structure(("0", "1"), {"R": (1, {("0",)}), "S": (2, {("0", "1"), ("1", "1")})})
A3 = Structure(("0", "1", "2"), {"R": (1, {("0",), ("2",)}), "S": (2, {("0", "1"), ("1", "2")})})


def literal(rng: random.Random, scope):
    k = rng.randrange(4)
    x, y = rng.choice(scope), rng.choice(scope)
    if k == 0:
        return Eq(x, y)
    if k == 1:
        return Neq(x, y)
    if k == 2:
        return Rel("R", (x,), rng.random() < 0.4)
    return Rel("S", (x, y), rng.random() < 0.4)


def _tuple(rng, scope, n):
    return tuple(rng.choice(scope) for _ in range(n))


def team_atom(rng, scope, atoms):
    kind = rng.choice(atoms)
    n = rng.randint(1, min(2, len(scope)))
    if kind == "approx":
        return MarginalIdentity(_tuple(rng, scope, n), _tuple(rng, scope, n))
    if kind == "incl":
        return Inclusion(_tuple(rng, scope, n), _tuple(rng, scope, n))
    if kind == "equi":
        return Equiextension(_tuple(rng, scope, n), _tuple(rng, scope, n))
    if kind == "dep":
        return Dependence(_tuple(rng, scope, rng.randint(0, 1)), rng.choice(scope))
    return ProbIndependence(_tuple(rng, scope, 1), _tuple(rng, scope, 1), ())


def team_formula(rng, free=("x", "y"), depth=3, atoms=("approx",), quantifiers=True, disjunction=True):
    """Random team formula whose free variables lie in ``free``; bound variables are fresh."""
    counter = [0]

    def go(scope, d):
        r = rng.random()
        if d == 0 or r < 0.3:
            return team_atom(rng, scope, atoms) if rng.random() < 0.6 else literal(rng, scope)
        ops = ["and"] + (["or"] if disjunction else []) + (["E", "A"] if quantifiers else [])
        op = rng.choice(ops)
        if op in ("and", "or"):
            cls = And if op == "and" else Or
            return cls(go(scope, d - 1), go(scope, d - 1))
        counter[0] += 1
        v = f"z{counter[0]}"
        body = go(scope + (v,), d - 1)
        return (Exists if op == "E" else Forall)(v, body)

    return go(tuple(free), depth)


def inc_sentence(rng, depth=2):
    """Random FO(equi) sentence with at most two quantified variables."""
    def go(scope, d):
        if not scope or (d > 0 and rng.random() < 0.6 and len(scope) < 2):
            v = "xy"[len(scope)]
            return (Exists if rng.random() < 0.6 else Forall)(v, go(scope + (v,), d - 1))
        if d <= 0 or rng.random() < 0.5:
            if rng.random() < 0.6:
                return Equiextension((rng.choice(scope),), (rng.choice(scope),))
            return literal(rng, scope)
        return (And if rng.random() < 0.6 else Or)(go(scope, d - 1), go(scope, d - 1))

    return go((), depth + 1)


# ESO terms and formulas


def term(rng, scope, fns, depth=2, allow_add=True, constants=True):
    r = rng.random()
    if depth == 0 or r < 0.4:
        if constants and rng.random() < 0.2:
            return Const(F(rng.randint(0, 2), rng.randint(1, 3)))
        name, arity = rng.choice(fns)
        return Apply(name, _tuple(rng, scope, arity) if scope else ("#0",) * arity)
    if allow_add and r < 0.6:
        return Add(term(rng, scope, fns, depth - 1, allow_add, constants), term(rng, scope, fns, depth - 1, allow_add, constants))
    v = rng.choice(["u", "v", "w"])
    return Sum((v,), term(rng, scope + (v,), fns, depth - 1, allow_add, constants))


def eso_formula(rng, depth=3, fns=(("g", 1), ("h", 2), ("n", 0)), loose=False, eq_only=False, sums_only=False):
    """Random ESO sentence quantifying the functions in ``fns`` in front."""
    counter = [0]
    fns = list(fns)

    def atom(scope):
        if rng.random() < 0.3 and scope:
            return literal(rng, scope)
        kw = {"allow_add": not sums_only, "constants": not sums_only}
        a, b = term(rng, scope, fns, 2, **kw), term(rng, scope, fns, 2, **kw)
        if eq_only:
            return NumEq(a, b)
        k = rng.randrange(3 if not loose else 2)
        return [NumEq, NumLe, NotLe][k](a, b)

    def go(scope, d):
        r = rng.random()
        if d == 0 or r < 0.25:
            return atom(scope)
        op = rng.choice(["and", "or", "A", "E"])
        if op in ("and", "or"):
            return (And if op == "and" else Or)(go(scope, d - 1), go(scope, d - 1))
        counter[0] += 1
        v = f"x{counter[0]}"
        return (Forall if op == "A" else Exists)(v, go(scope + (v,), d - 1))

    phi = go((), depth)
    for name, arity in reversed(fns):
        phi = FnExists(name, arity, rng.choice("UD") if not sums_only else "D", phi)
    return phi


def skolem_input(rng, depth=2, fns=(("g", 1), ("h", 2), ("n", 0))):
    """Random prenex {=, SUM} sentence as fed to the Skolem normal form."""
    scope = ("x1", "x2")

    def atom():
        if rng.random() < 0.3:
            return literal(rng, scope)
        kw = {"allow_add": False, "constants": False}
        return NumEq(term(rng, scope, fns, depth, **kw), term(rng, scope, fns, depth, **kw))

    def go(d):
        if d == 0 or rng.random() < 0.3:
            return atom()
        return (And if rng.random() < 0.6 else Or)(go(d - 1), go(d - 1))

    phi = Forall("x1", Forall("x2", go(2)))
    for name, arity in reversed(fns):
        phi = FnExists(name, arity, rng.choice("UD"), phi)
    from teamlp.translate import eliminate_dummy_sums, prenex

    return prenex(eliminate_dummy_sums(phi))


def rational_team(rng, variables, domain=("0", "1"), max_rows=4, max_den=5, min_weight=None, avoid=None):
    """Random probabilistic team; ``avoid(row)`` rows are left out."""
    import itertools

    cells = [r for r in itertools.product(domain, repeat=len(variables)) if not (avoid and avoid(r))]
    rows = rng.sample(cells, rng.randint(1, min(max_rows, len(cells))))
    if min_weight is None:
        raw = [F(rng.randint(1, max_den), rng.randint(1, max_den)) for _ in rows]
        total = sum(raw)
        return WeightedTeam(variables, {r: w / total for r, w in zip(rows, raw)})
    # spread the slack above the floor at random
    slack = 1 - min_weight * len(rows)
    if slack < 0:
        rows = rows[: int(1 / min_weight)]
        slack = 1 - min_weight * len(rows)
    cuts = sorted(F(rng.randint(0, max_den), max_den) for _ in range(len(rows) - 1))
    parts = [b - a for a, b in zip([F(0)] + cuts, cuts + [F(1)])]
    return WeightedTeam(variables, {r: min_weight + slack * p for r, p in zip(rows, parts)})


def linear_system(rng, max_vars=6, max_rows=10, bound=5):
    n = rng.randint(1, max_vars)
    xs = [LinVar(f"x{i}") for i in range(n)]
    rows = []
    for _ in range(rng.randint(1, max_rows)):
        coeffs = {}
        for v in rng.sample(xs, rng.randint(1, n)):
            c = F(rng.randint(-bound, bound), rng.randint(1, bound))
            if c:
                coeffs[v] = c
        rhs = F(rng.randint(-bound, bound), rng.randint(1, bound))
        rows.append(LinConstraint(coeffs, rng.choice(["<=", "<=", "<", "="]), rhs))
    return LinearSystem(xs, rows)


def implication_instance(rng, n_vars=5, max_side=2, max_premises=3):
    from teamlp.axioms import MarginalIdAtom

    names = [f"v{i}" for i in range(rng.randint(2, n_vars))]

    def atom():
        k = rng.randint(1, min(max_side, len(names)))
        return MarginalIdAtom(tuple(rng.sample(names, k)), tuple(rng.sample(names, k)))

    return [atom() for _ in range(rng.randint(0, max_premises))], atom()


# hypothesis strategies over the generators


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def from_seed(fn, *args, **kw):
    return seeds.map(lambda s: fn(random.Random(s), *args, **kw))
