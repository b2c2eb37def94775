"""Direct evaluation of atoms on teams, Tarski semantics, and a brute-force
lax team-semantics evaluator for formulas with relational atoms only."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .core import Structure, WeightedTeam, combine, project, scale
from .errors import ArityError, NotRelational, TeamLPError, UnknownVariable
from .syntax import (
    And,
    Bottom,
    Dependence,
    Eq,
    Equiextension,
    Exists,
    Forall,
    Formula,
    Inclusion,
    MarginalIdentity,
    Neq,
    Not,
    Or,
    ProbIndependence,
    Rel,
    Top,
    free_vars,
    is_const,
    is_first_order,
)


def resolve(arg: str, s: dict, structure: Structure | None) -> str:
    hit = s.get(arg)
    if hit is not None:
        return hit
    if is_const(arg):
        if structure is None:
            raise TeamLPError(f"constant {arg} needs a structure")
        i = int(arg[1:])
        if i >= structure.size:
            raise TeamLPError(f"constant {arg} exceeds the domain size {structure.size}")
        return structure.domain[i]
    try:
        return s[arg]
    except KeyError:
        raise UnknownVariable(f"variable {arg} is not assigned") from None


def eval_first_order(phi: Formula, structure: Structure, s: dict) -> bool:
    """Tarski satisfaction of a first-order formula under assignment ``s``."""
    if isinstance(phi, Top):
        return True
    if isinstance(phi, Bottom):
        return False
    if isinstance(phi, Eq):
        return resolve(phi.left, s, structure) == resolve(phi.right, s, structure)
    if isinstance(phi, Neq):
        return resolve(phi.left, s, structure) != resolve(phi.right, s, structure)
    if isinstance(phi, Rel):
        args = tuple(resolve(a, s, structure) for a in phi.args)
        return structure.holds(phi.name, args) != phi.negated
    if isinstance(phi, Not):
        return not eval_first_order(phi.body, structure, s)
    if isinstance(phi, And):
        return eval_first_order(phi.left, structure, s) and eval_first_order(phi.right, structure, s)
    if isinstance(phi, Or):
        return eval_first_order(phi.left, structure, s) or eval_first_order(phi.right, structure, s)
    if isinstance(phi, Exists):
        return any(eval_first_order(phi.body, structure, {**s, phi.var: a}) for a in structure.domain)
    if isinstance(phi, Forall):
        return all(eval_first_order(phi.body, structure, {**s, phi.var: a}) for a in structure.domain)
    raise TeamLPError(f"{type(phi).__name__} is not first-order")


@dataclass(frozen=True)
class AtomVerdict:
    holds: bool
    witness: object = None

    def __bool__(self):
        return self.holds


def _values(team: WeightedTeam, vars_, structure):
    cols = []
    for v in vars_:
        if is_const(v):
            cols.append(("c", resolve(v, {}, structure)))
        else:
            cols.append(("v", team.column(v)))

    def get(row):
        return tuple(row[i] if k == "v" else i for k, i in cols)

    return get


def _marginal(team, vars_, structure, support_only=False):
    get = _values(team, vars_, structure)
    out = {}
    for row, w in team.items():
        if support_only and not w:
            continue
        key = get(row)
        out[key] = out.get(key, Fraction(0)) + w
    return out


def _order_key(structure):
    if structure is None:
        return lambda t: t
    pos = {a: i for i, a in enumerate(structure.domain)}
    return lambda t: tuple(pos.get(a, len(pos)) for a in t)


def eval_atom(atom: Formula, structure: Structure | None, team: WeightedTeam) -> AtomVerdict:
    """Evaluate a single atom (or literal) on a weighted team."""
    if isinstance(atom, MarginalIdentity):
        if len(atom.lhs) != len(atom.rhs):
            raise ArityError("approx sides differ in length")
        left = _marginal(team, atom.lhs, structure)
        right = _marginal(team, atom.rhs, structure)
        for key in sorted(set(left) | set(right), key=_order_key(structure)):
            if left.get(key, 0) != right.get(key, 0):
                return AtomVerdict(False, key)
        return AtomVerdict(True)
    if isinstance(atom, (Inclusion, Equiextension)):
        if len(atom.lhs) != len(atom.rhs):
            raise ArityError("atom sides differ in length")
        left = {k for k, w in _marginal(team, atom.lhs, structure, True).items() if w}
        right = {k for k, w in _marginal(team, atom.rhs, structure, True).items() if w}
        missing = sorted(left - right, key=_order_key(structure))
        if missing:
            return AtomVerdict(False, missing[0])
        if isinstance(atom, Equiextension):
            missing = sorted(right - left, key=_order_key(structure))
            if missing:
                return AtomVerdict(False, missing[0])
        return AtomVerdict(True)
    if isinstance(atom, Dependence):
        get_x = _values(team, atom.args, structure)
        get_y = _values(team, (atom.target,), structure)
        seen = {}
        for row in sorted(team.support, key=_order_key(structure)):
            kx = get_x(row)
            if kx in seen and seen[kx][1] != get_y(row):
                first = dict(zip(team.variables, seen[kx][0]))
                return AtomVerdict(False, (first, dict(zip(team.variables, row))))
            seen.setdefault(kx, (row, get_y(row)))
        return AtomVerdict(True)
    if isinstance(atom, ProbIndependence):
        x, y, z = atom.given, atom.left, atom.right
        m_xy = _marginal(team, x + y, structure)
        m_xz = _marginal(team, x + z, structure)
        m_xyz = _marginal(team, x + y + z, structure)
        m_x = _marginal(team, x, structure)
        nx = len(x)
        for kxy, wxy in sorted(m_xy.items(), key=lambda kv: _order_key(structure)(kv[0])):
            if not wxy:
                continue
            for kxz, wxz in sorted(m_xz.items(), key=lambda kv: _order_key(structure)(kv[0])):
                if not wxz or kxz[:nx] != kxy[:nx]:
                    continue
                kxyz = kxy + kxz[nx:]
                if wxy * wxz != m_xyz.get(kxyz, 0) * m_x[kxy[:nx]]:
                    return AtomVerdict(False, kxyz)
        return AtomVerdict(True)
    if is_first_order(atom):
        for row in team.support:
            s = dict(zip(team.variables, row))
            if not eval_first_order(atom, structure, s):
                return AtomVerdict(False, s)
        return AtomVerdict(True)
    raise TeamLPError(f"{type(atom).__name__} is not an atom")


# lax relational team semantics


def _relational_ok(phi: Formula) -> None:
    from .syntax import walk

    for n in walk(phi):
        if isinstance(n, (MarginalIdentity, ProbIndependence)):
            raise NotRelational(f"probabilistic atom {type(n).__name__} in a relational formula")
        if not isinstance(n, (Top, Bottom, Eq, Neq, Rel, And, Or, Exists, Forall, Inclusion, Equiextension, Dependence)):
            raise NotRelational(f"unsupported node {type(n).__name__}")


def eval_relational_formula(phi: Formula, structure: Structure, team=None) -> bool:
    """Brute-force lax team semantics.

    ``team`` is a WeightedTeam (its support is used), a pair
    ``(variables, rows)``, or None for the team holding only the empty assignment.
    """
    _relational_ok(phi)
    if team is None:
        vars_, rows = (), frozenset({()})
    elif isinstance(team, WeightedTeam):
        vars_, rows = team.variables, team.support_set()
    else:
        vars_, rows = tuple(team[0]), frozenset(tuple(r) for r in team[1])
    missing = free_vars(phi) - set(vars_)
    if missing:
        raise UnknownVariable(f"team lacks free variables {sorted(missing)}")
    return _Relational(structure).sat(phi, vars_, rows)


class _Relational:
    def __init__(self, structure: Structure):
        self.A = structure
        self.memo = {}

    def sat(self, phi, vars_, rows) -> bool:
        key = (id(phi), vars_, rows)
        hit = self.memo.get(key)
        if hit is not None:
            return hit[0]
        out = self._sat(phi, vars_, rows)
        self.memo[key] = (out, phi)
        return out

    def _sat(self, phi, vars_, rows) -> bool:
        if not rows:
            return True
        if is_first_order(phi) and not isinstance(phi, (Exists, Forall)):
            return all(eval_first_order(phi, self.A, dict(zip(vars_, r))) for r in rows)
        if isinstance(phi, (Inclusion, Equiextension, Dependence)):
            team = WeightedTeam(vars_, {r: 1 for r in rows})
            return eval_atom(phi, self.A, team).holds
        if isinstance(phi, And):
            return self.sat(phi.left, vars_, rows) and self.sat(phi.right, vars_, rows)
        if isinstance(phi, Or):
            rows_l = sorted(rows)
            for choice in itertools.product((0, 1, 2), repeat=len(rows_l)):
                left = frozenset(r for r, c in zip(rows_l, choice) if c != 1)
                right = frozenset(r for r, c in zip(rows_l, choice) if c != 0)
                if self.sat(phi.left, vars_, left) and self.sat(phi.right, vars_, right):
                    return True
            return False
        if isinstance(phi, (Exists, Forall)):
            x = phi.var
            if x in vars_:
                i = vars_.index(x)
                base_vars = vars_[:i] + vars_[i + 1 :]
                base = frozenset(r[:i] + r[i + 1 :] for r in rows)
            else:
                base_vars, base = vars_, rows
            new_vars = base_vars + (x,)
            dom = self.A.domain
            if isinstance(phi, Forall):
                ext = frozenset(r + (a,) for r in base for a in dom)
                return self.sat(phi.body, new_vars, ext)
            base_l = sorted(base)
            subsets = [c for n in range(1, len(dom) + 1) for c in itertools.combinations(dom, n)]
            for pick in itertools.product(subsets, repeat=len(base_l)):
                ext = frozenset(r + (a,) for r, vals in zip(base_l, pick) for a in vals)
                if self.sat(phi.body, new_vars, ext):
                    return True
            return False
        raise NotRelational(f"unexpected node {type(phi).__name__}")


# closure laws


@dataclass
class ClosureReport:
    checked: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    def record(self, law: str, ok: bool, detail=None):
        self.checked[law] = self.checked.get(law, 0) + 1
        if not ok:
            self.violations.setdefault(law, []).append(detail)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_closure_laws(phi: Formula, structure: Structure, *teams: WeightedTeam,
                       factors=(Fraction(7, 3), Fraction(1, 5)),
                       alphas=(Fraction(0), Fraction(1, 3), Fraction(1)),
                       pipeline_check=None) -> ClosureReport:
    """Check scaling invariance, locality, flatness, support conservativity and
    scaled-union closure of ``phi`` on the given teams.

    Atoms are evaluated directly; compound formulas go through
    ``pipeline_check(phi, structure, team) -> bool`` (defaults to the LP pipeline,
    run without normalisation so that scaling is really exercised).
    """
    from .syntax import is_team_formula, walk

    if pipeline_check is None:
        from .pipeline import check_formula

        pipeline_check = lambda f, a, t: check_formula(f, a, t, normalize=False)
    atomic = isinstance(phi, (MarginalIdentity, Inclusion, Equiextension, Dependence, ProbIndependence)) or (
        is_first_order(phi) and not isinstance(phi, (Exists, Forall))
    )
    relational = not any(isinstance(n, (MarginalIdentity, ProbIndependence)) for n in walk(phi))
    # scaled unions preserve FO(≈) only; dependence and independence atoms are not union closed
    union_closed = not any(isinstance(n, (Dependence, ProbIndependence, Inclusion, Equiextension)) for n in walk(phi))

    def verdict(team):
        if atomic:
            return eval_atom(phi, structure, team).holds
        return pipeline_check(phi, structure, team)

    report = ClosureReport()
    fv = sorted(free_vars(phi))
    cache = {}
    for team in teams:
        base = verdict(team)
        cache[id(team)] = base
        for r in factors:
            report.record("scaling", verdict(scale(r, team)) == base, (team, r))
        if set(fv) <= set(team.variables):
            report.record("locality", verdict(project(team, fv)) == base, team)
        if is_first_order(phi):
            tarski = all(eval_first_order(phi, structure, s) for s, w in team.assignments() if w)
            report.record("flatness", tarski == base, team)
        if relational and is_team_formula(phi):
            support = WeightedTeam(team.variables, {k: 1 for k in team.support})
            report.record("support", eval_relational_formula(phi, structure, support) == base, team)
    for y, z in itertools.combinations(teams if union_closed else (), 2):
        if y.variables != z.variables or not cache[id(y)] or not cache[id(z)]:
            continue
        for a in alphas:
            mixed = combine(a, y, z)
            report.record("scaled-union", verdict(mixed), (y, z, a))
    return report


def random_team(rng: random.Random, variables, domain, max_rows=None, max_den=6, zero_prob=0.3) -> WeightedTeam:
    """A random rational weighted team; used by tests and the acceptance harness."""
    rows = list(itertools.product(domain, repeat=len(variables)))
    rng.shuffle(rows)
    if max_rows is not None:
        rows = rows[: max(1, rng.randint(1, max_rows))]
    table = {}
    for r in rows:
        if rng.random() < zero_prob and len(table) > 0:
            continue
        table[r] = Fraction(rng.randint(1, max_den), rng.randint(1, max_den))
    team = WeightedTeam(variables, table)
    total = team.total
    return scale(1 / total, team) if total else team
