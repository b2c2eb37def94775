"""End-to-end model checking: translate a team formula, ground it, decide feasibility.

Almost-conjunctive inputs reduce to a family of linear systems. Anything else
(dependence atoms, existentials whose witnesses feed quantified functions) is
handled by a lazy disjunct search: solve the committed rows, look for a
disjunction the current point violates, and branch on its alternatives only.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .core import Structure, WeightFunction, normalize, sentence_team, WeightedTeam
from .errors import TeamLPError, BadParameter, BudgetExceeded, CannotPrenex, NotAlmostConjunctive, UnsupportedAtom
from .linear import (
    FALSE_ROW,
    GOr,
    Grounder,
    LinConstraint,
    LinearSystem,
    declared_variables,
    family_feasible,
    feasible_fm,
    feasible_simplex,
    reduce_to_lp_family,
    split_prefix,
)
from .semantics import eval_atom, eval_first_order, eval_relational_formula
from .syntax import (
    TEAM_ATOMS,
    ZERO,
    And,
    Apply,
    Dependence,
    Equiextension,
    FnExists,
    Inclusion,
    MarginalIdentity,
    NumLe,
    ProbIndependence,
    Term,
    Top,
    conj,
    forall,
    free_vars,
    split_conjuncts,
    transform,
    walk,
)
from .translate import (
    TranslationTrace,
    eliminate_dummy_sums,
    prenex,
    sentence_inc_to_prob,
    team_to_eso,
)

ENGINES = ("simplex", "fm", "bruteforce")


@dataclass
class Budget:
    nodes: int = 20000
    seconds: float | None = None


@dataclass
class CheckRequest:
    structure: Structure
    formula: object
    team: WeightedTeam | None = None
    engine: str = "simplex"
    budget: Budget = field(default_factory=Budget)
    normalize: bool = True
    dep_mode: str = "clause"
    eliminate_constants: bool = False
    k: int | None = None
    jobs: int = 1
    trace: TranslationTrace | None = None


@dataclass
class CheckReport:
    verdict: bool
    route: str
    stats: dict = field(default_factory=dict)
    witness: dict | None = None

    def to_json(self) -> dict:
        return {
            "schema": "teamlp.check/1",
            "verdict": self.verdict,
            "route": self.route,
            "stats": {k: v for k, v in self.stats.items() if k != "seconds"} | {"seconds": round(self.stats.get("seconds", 0.0), 4)},
            "witness": None if self.witness is None else {k: str(v) for k, v in self.witness.items()},
        }


def _is_eso(phi) -> bool:
    return any(isinstance(n, (FnExists, Term)) for n in walk(phi))


# entry points


def check(req: CheckRequest) -> CheckReport:
    if req.engine not in ENGINES:
        raise BadParameter(f"unknown engine {req.engine!r}")
    start = time.perf_counter()
    report = _check(req)
    report.stats["seconds"] = time.perf_counter() - start
    if report.witness is not None and not report.verdict:
        report.witness = None
    return report


def check_formula(formula, structure: Structure, team: WeightedTeam | None = None, normalize: bool = True,
                  engine: str = "simplex", **options) -> bool:
    return check(CheckRequest(structure, formula, team, engine=engine, normalize=normalize, **options)).verdict


def check_inc_sentence(phi, structure: Structure, *, k: int | None = None, engine: str = "simplex",
                       budget: Budget | None = None, trace: TranslationTrace | None = None) -> CheckReport:
    """Decide an FO(⋈) sentence through its FO(≈) translation."""
    start = time.perf_counter()
    if structure.size == 1:
        # the ∃uv(u≠v ∧ …) guard is unsatisfiable on one element, while every ⋈ holds there
        report = CheckReport(_single_element(phi, structure, sentence_team()), "single-element")
    else:
        psi = sentence_inc_to_prob(phi, k, trace=trace)
        req = CheckRequest(structure, psi, None, engine=engine, budget=budget or Budget(), trace=trace)
        report = _check(req)
        report.route = "equiextension-sentence/" + report.route
        report.stats["translated_size"] = sum(1 for _ in walk(psi))
    report.stats["seconds"] = time.perf_counter() - start
    return report


def _check(req: CheckRequest) -> CheckReport:
    phi, A = req.formula, req.structure
    if _is_eso(phi):
        return check_eso(phi, A, engine=req.engine, budget=req.budget, jobs=req.jobs)
    team = req.team
    fv = free_vars(phi)
    if team is None:
        if fv:
            raise BadParameter(f"open formula needs a team for {sorted(fv)}")
        team = sentence_team()
    missing = fv - set(team.variables)
    if missing:
        raise BadParameter(f"team lacks variables {sorted(missing)}")
    atoms = [n for n in walk(phi) if isinstance(n, TEAM_ATOMS)]
    if any(isinstance(a, Equiextension) for a in atoms) and not fv and team.variables == ():
        if any(isinstance(a, (Inclusion, MarginalIdentity, Dependence, ProbIndependence)) for a in atoms):
            raise UnsupportedAtom("equiextension sentences may not mix in other team atoms")
        return check_inc_sentence(phi, A, k=req.k, engine=req.engine, budget=req.budget, trace=req.trace)
    if team.total == 0:
        return CheckReport(True, "empty-team")
    if A.size == 1:
        return CheckReport(_single_element(phi, A, team), "single-element")
    pinds = [c for c in split_conjuncts(phi) if isinstance(c, ProbIndependence)]
    rest = conj(*(c for c in split_conjuncts(phi) if not isinstance(c, ProbIndependence)))
    if any(isinstance(n, ProbIndependence) for n in walk(rest)):
        raise UnsupportedAtom("independence atoms are only evaluated as top-level conjuncts")
    for p in pinds:
        if not eval_atom(p, A, team):
            return CheckReport(False, "independence-atom")
    if any(isinstance(a, (Inclusion, Equiextension)) for a in atoms):
        if any(isinstance(a, MarginalIdentity) for a in atoms):
            raise UnsupportedAtom("inclusion atoms cannot be combined with marginal identity atoms")
        return CheckReport(eval_relational_formula(rest, A, team), "relational")
    if isinstance(rest, Top):
        return CheckReport(True, "independence-atom" if pinds else "trivial")
    if req.normalize:
        team = normalize(team)
    eso = team_to_eso(rest, team.variables, dep_mode=req.dep_mode,
                      eliminate_constants=req.eliminate_constants, trace=req.trace)
    eso = eliminate_dummy_sums(eso)
    if team.total != 1:
        eso = _unbounded_weights(eso)
    f = WeightFunction("f", len(team.variables), _team_values(team, A))
    report = check_eso(eso, A, functions={"f": f}, engine=req.engine, budget=req.budget, jobs=req.jobs)
    report.route = "team/" + report.route
    return report


def _team_values(team: WeightedTeam, A: Structure) -> dict:
    values = {row: Fraction(0) for row in itertools.product(A.domain, repeat=len(team.variables))}
    for row, w in team.items():
        if row not in values:
            raise BadParameter(f"team row {row} uses elements outside the domain")
        values[row] += w
    return values


def _unbounded_weights(eso):
    """For raw weighted teams: quantified Unit functions become nonnegative reals."""
    def fix(n):
        if isinstance(n, FnExists) and n.sort == "U":
            xs = tuple(f"_w{i}" for i in range(n.arity))
            return FnExists(n.name, n.arity, "R", And(forall(xs, NumLe(ZERO, Apply(n.name, xs))), n.body))
        return None
    return transform(eso, fix)


def _single_element(phi, A, team) -> bool:
    """On a one-element domain every team atom holds on a nonempty team."""
    if team.total == 0:
        return True
    flat = transform(phi, lambda n: Top() if isinstance(n, TEAM_ATOMS) else None)
    s = dict(zip(team.variables, (A.domain[0],) * len(team.variables)))
    return eval_first_order(flat, A, s)


# ESO sentences


def check_eso(phi, structure: Structure, s=None, functions=None, *, engine: str = "simplex",
              budget: Budget | None = None, jobs: int = 1) -> CheckReport:
    """Decide an ESO sentence over ``structure`` (free functions from ``functions``)."""
    budget = budget or Budget()
    phi = _to_prenex(phi)
    if engine != "bruteforce":
        try:
            family = reduce_to_lp_family(phi, structure, s, functions)
        except NotAlmostConjunctive:
            pass
        else:
            stats = {
                "systems": len(family.systems),
                "pruned": len(family.pruned),
                "variables": max((len(x.variables) for _, x in family.systems), default=0),
                "rows": max((len(x.constraints) for _, x in family.systems), default=0),
            }
            hit = family_feasible(family, engine, jobs)
            if hit is None:
                return CheckReport(False, f"lp/{engine}", stats)
            label, verdict = hit
            stats["witness_label"] = dict(label)
            stats.update({f"lp_{k}": v for k, v in verdict.stats.items() if isinstance(v, (int, str))})
            return CheckReport(True, f"lp/{engine}", stats, _witness(verdict.point))
    search = DisjunctSearch(structure, phi, s, functions, engine, budget)
    verdict, point = search.run()
    return CheckReport(verdict, f"search/{engine}", search.stats, _witness(point))


def _witness(point):
    if not point:
        return None
    return {str(v): q for v, q in sorted(point.items()) if q}


def _to_prenex(phi):
    try:
        matrix = split_prefix(phi)[3]
        if not any(isinstance(n, FnExists) for n in walk(matrix)):
            return phi
    except TeamLPError:
        pass
    try:
        return prenex(phi)
    except CannotPrenex:
        return prenex(phi, strict=False)


class DisjunctSearch:
    """Lazy branching over disjunctions whose both sides constrain quantified functions.

    Each node solves the rows committed so far. If the solution already satisfies
    every open disjunction the node is a witness; otherwise one violated
    disjunction is split on its alternatives. The ``bruteforce`` engine instead
    commits to an alternative of every disjunction before solving and serves as
    an independent check on the lazy strategy.
    """

    def __init__(self, structure, phi, s, functions, engine, budget: Budget):
        self.A = structure
        self.phi = phi
        self.s = dict(s or {})
        self.functions = functions
        self.engine = engine
        self.budget = budget
        self.stats = {"nodes": 0, "leaves": 0, "memo_hits": 0, "systems": 0}
        self.memo = {}
        self.deadline = None if budget.seconds is None else time.perf_counter() + budget.seconds

    def run(self):
        ys, fns, xs, matrix = split_prefix(self.phi)
        self.fns = tuple(fns)
        g = Grounder(self.A, [f.name for f in fns], self.functions)
        self.variables = declared_variables(self.A, fns)
        for values in itertools.product(self.A.domain, repeat=len(ys)):
            sv = {**self.s, **dict(zip(ys, values))}
            tree = g.ground(forall(xs, matrix), sv) if xs else g.ground(matrix, sv)
            self.stats["systems"] += 1
            if tree is False:
                continue
            rows, clauses = _split(tree)
            if self.engine == "bruteforce":
                point = self._brute(rows, clauses)
            else:
                point = self._lazy(frozenset(rows), tuple(clauses))
            if point is not None:
                return True, point
        return False, None

    def _tick(self):
        self.stats["nodes"] += 1
        if self.stats["nodes"] > self.budget.nodes:
            raise BudgetExceeded(f"search exceeded {self.budget.nodes} nodes")
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise BudgetExceeded(f"search exceeded {self.budget.seconds} s")

    def _solve(self, rows):
        system = LinearSystem(self.variables, tuple(rows), self.fns)
        self.stats["leaves"] += 1
        if self.engine == "fm":
            if not feasible_fm(system):
                return None
            # fm has no witness; recover one for branching decisions
        verdict = feasible_simplex(system)
        return verdict.point if verdict.feasible else None

    def _lazy(self, rows: frozenset, clauses: tuple):
        self._tick()
        if rows in self.memo:
            self.stats["memo_hits"] += 1
            cached = self.memo[rows]
            if cached is None:
                return None
        point = self._solve(rows)
        self.memo[rows] = point
        if point is None:
            return None
        open_ = [c for c in clauses if not _holds(c, point)]
        if not open_:
            return point
        # branch on the violated disjunction with the fewest alternatives
        pick = min(open_, key=len)
        others = tuple(c for c in clauses if c is not pick)
        for alt in pick:
            r, cl = _split(alt)
            found = self._lazy(rows | frozenset(r), others + tuple(cl))
            if found is not None:
                return found
        return None

    def _brute(self, rows, clauses):
        self._tick()
        if not clauses:
            point = self._solve(rows)
            return point
        first, rest = clauses[0], clauses[1:]
        for alt in first:
            r, cl = _split(alt)
            found = self._brute(rows + r, list(rest) + cl)
            if found is not None:
                return found
        return None


def _split(tree):
    """Separate a ground tree into hard rows and disjunctive clauses."""
    if tree is True:
        return [], []
    if tree is False:
        return [FALSE_ROW], []
    if isinstance(tree, LinConstraint):
        return [tree], []
    if isinstance(tree, GOr):
        return [], [tree]
    rows, clauses = [], []
    for part in tree:
        r, c = _split(part)
        rows += r
        clauses += c
    return rows, clauses


def _holds(tree, point) -> bool:
    if tree is True:
        return True
    if tree is False:
        return False
    if isinstance(tree, LinConstraint):
        return tree.holds(point)
    if isinstance(tree, GOr):
        return any(_holds(t, point) for t in tree)
    return all(_holds(t, point) for t in tree)
