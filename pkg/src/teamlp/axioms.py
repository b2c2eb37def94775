"""Implication for marginal identity atoms.

Four rules (reflexivity, symmetry, projection-permutation, transitivity) are
sound and complete. ``chase_decide`` runs the inclusion-dependency chase with
index columns that count repetitions; its result either contains the goal's
witness row, from which a derivation is read off, or becomes a counterexample
once made uniform. ``saturate`` is an independent brute-force closure.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .core import WeightedTeam
from .errors import ChaseBudget, MalformedAtom, NoWitness
from .syntax import MarginalIdentity


@dataclass(frozen=True)
class MarginalIdAtom:
    lhs: tuple
    rhs: tuple

    def __post_init__(self):
        object.__setattr__(self, "lhs", tuple(self.lhs))
        object.__setattr__(self, "rhs", tuple(self.rhs))
        if len(self.lhs) != len(self.rhs):
            raise MalformedAtom(f"sides differ in length: {self}")
        if not self.lhs:
            raise MalformedAtom("empty marginal identity atom")
        for side in (self.lhs, self.rhs):
            if len(set(side)) != len(side):
                raise MalformedAtom(f"repeated variable in {' '.join(side)}")

    @classmethod
    def parse(cls, text: str) -> "MarginalIdAtom":
        if text.count("~") != 1:
            raise MalformedAtom(f"expected 'x y ~ u v', got {text!r}")
        left, right = text.split("~")
        return cls(tuple(left.split()), tuple(right.split()))

    def __str__(self):
        return f"{' '.join(self.lhs)} ~ {' '.join(self.rhs)}"

    def inverse(self) -> "MarginalIdAtom":
        return MarginalIdAtom(self.rhs, self.lhs)

    def project(self, idx) -> "MarginalIdAtom":
        """Zero-based index sequence."""
        return MarginalIdAtom(tuple(self.lhs[i] for i in idx), tuple(self.rhs[i] for i in idx))

    def variables(self) -> set:
        return set(self.lhs) | set(self.rhs)

    def to_formula(self) -> MarginalIdentity:
        return MarginalIdentity(self.lhs, self.rhs)


def parse_atoms(text: str) -> list:
    return [MarginalIdAtom.parse(p) for p in text.split(";") if p.strip()]


# derivations


@dataclass(frozen=True)
class Premise:
    def __str__(self):
        return "premise"


@dataclass(frozen=True)
class Reflexivity:
    def __str__(self):
        return "reflexivity"


@dataclass(frozen=True)
class Symmetry:
    line: int

    def __str__(self):
        return f"symmetry {self.line}"


@dataclass(frozen=True)
class ProjPerm:
    line: int
    indices: tuple  # one-based

    def __str__(self):
        return f"proj-perm {self.line} @ ({','.join(map(str, self.indices))})"


@dataclass(frozen=True)
class Transitivity:
    first: int
    second: int

    def __str__(self):
        return f"transitivity {self.first}, {self.second}"


@dataclass
class Derivation:
    lines: list = field(default_factory=list)

    def add(self, atom: MarginalIdAtom, why) -> int:
        self.lines.append((atom, why))
        return len(self.lines)

    @property
    def conclusion(self) -> MarginalIdAtom | None:
        return self.lines[-1][0] if self.lines else None

    def __str__(self):
        return "\n".join(f"{i}. {a}  [{why}]" for i, (a, why) in enumerate(self.lines, 1))

    def to_json(self) -> list:
        return [{"atom": str(a), "rule": str(why)} for a, why in self.lines]

    def trimmed(self) -> "Derivation":
        """Drop lines the conclusion does not depend on and renumber."""
        if not self.lines:
            return self
        used, todo = set(), [len(self.lines)]
        while todo:
            n = todo.pop()
            if n not in used:
                used.add(n)
                todo.extend(_refs(self.lines[n - 1][1]))
        renum = {old: new for new, old in enumerate(sorted(used), 1)}
        out = Derivation()
        for old in sorted(used):
            atom, why = self.lines[old - 1]
            if isinstance(why, Symmetry):
                why = Symmetry(renum[why.line])
            elif isinstance(why, ProjPerm):
                why = ProjPerm(renum[why.line], why.indices)
            elif isinstance(why, Transitivity):
                why = Transitivity(renum[why.first], renum[why.second])
            out.add(atom, why)
        return out


def _refs(why) -> tuple:
    if isinstance(why, (Symmetry, ProjPerm)):
        return (why.line,)
    if isinstance(why, Transitivity):
        return (why.first, why.second)
    return ()


def verify_derivation(d: Derivation, premises, *, symmetry: bool = True) -> bool:
    premises = set(premises)
    seen = []
    for atom, why in d.lines:
        ok = False
        ref = lambda i: 1 <= i <= len(seen)
        if isinstance(why, Premise):
            ok = atom in premises
        elif isinstance(why, Reflexivity):
            ok = atom.lhs == atom.rhs
        elif isinstance(why, Symmetry):
            ok = symmetry and ref(why.line) and seen[why.line - 1].inverse() == atom
        elif isinstance(why, ProjPerm):
            idx = why.indices
            if ref(why.line) and idx and len(set(idx)) == len(idx):
                src = seen[why.line - 1]
                if all(1 <= i <= len(src.lhs) for i in idx):
                    ok = src.project([i - 1 for i in idx]) == atom
        elif isinstance(why, Transitivity):
            if ref(why.first) and ref(why.second):
                a, b = seen[why.first - 1], seen[why.second - 1]
                ok = a.rhs == b.lhs and atom == MarginalIdAtom(a.lhs, b.rhs)
        if not ok:
            return False
        seen.append(atom)
    return True


# saturation


def saturate(premises, max_len: int | None = None, variables=None, *, symmetry: bool = True) -> set:
    """Closure of ``premises`` under the rules, restricted to sides of length ≤ max_len."""
    premises = list(premises)
    pool = set(variables or ())
    for p in premises:
        pool |= p.variables()
    if max_len is None:
        max_len = max((len(p.lhs) for p in premises), default=1)
    out = set()
    todo = deque()

    def push(a):
        if len(a.lhs) <= max_len and a not in out:
            out.add(a)
            todo.append(a)

    for n in range(1, max_len + 1):
        for xs in itertools.permutations(sorted(pool), n):
            push(MarginalIdAtom(xs, xs))
    for p in premises:
        push(p)
    by_lhs: dict = {}
    by_rhs: dict = {}
    while todo:
        a = todo.popleft()
        by_lhs.setdefault(a.lhs, set()).add(a)
        by_rhs.setdefault(a.rhs, set()).add(a)
        if symmetry:
            push(a.inverse())
        n = len(a.lhs)
        for k in range(1, n + 1):
            for idx in itertools.permutations(range(n), k):
                push(a.project(idx))
        for b in list(by_lhs.get(a.rhs, ())):
            push(MarginalIdAtom(a.lhs, b.rhs))
        for b in list(by_rhs.get(a.lhs, ())):
            push(MarginalIdAtom(b.lhs, a.rhs))
    return out


def _saturation_proof(premises, goal, symmetry: bool):
    """Breadth-first closure that records how each atom was obtained."""
    pool = set(goal.variables())
    for p in premises:
        pool |= p.variables()
    max_len = max([len(goal.lhs)] + [len(p.lhs) for p in premises])
    how = {}
    order = []
    todo = deque()

    def push(a, why):
        if len(a.lhs) <= max_len and a not in how:
            how[a] = why
            order.append(a)
            todo.append(a)

    if goal.lhs == goal.rhs:
        push(goal, ("refl",))
    for p in premises:
        push(p, ("premise",))
    by_lhs, by_rhs = {}, {}
    while todo and goal not in how:
        a = todo.popleft()
        by_lhs.setdefault(a.lhs, set()).add(a)
        by_rhs.setdefault(a.rhs, set()).add(a)
        if symmetry:
            push(a.inverse(), ("sym", a))
        n = len(a.lhs)
        for k in range(1, n + 1):
            for idx in itertools.permutations(range(n), k):
                push(a.project(idx), ("proj", a, tuple(i + 1 for i in idx)))
        for b in list(by_lhs.get(a.rhs, ())):
            push(MarginalIdAtom(a.lhs, b.rhs), ("trans", a, b))
        for b in list(by_rhs.get(a.lhs, ())):
            push(MarginalIdAtom(b.lhs, a.rhs), ("trans", b, a))
    if goal not in how:
        return None
    d = Derivation()
    line = {}

    def emit(a):
        if a in line:
            return line[a]
        why = how[a]
        if why[0] == "refl":
            n = d.add(a, Reflexivity())
        elif why[0] == "premise":
            n = d.add(a, Premise())
        elif why[0] == "sym":
            n = d.add(a, Symmetry(emit(why[1])))
        elif why[0] == "proj":
            n = d.add(a, ProjPerm(emit(why[1]), why[2]))
        else:
            i, j = emit(why[1]), emit(why[2])
            n = d.add(a, Transitivity(i, j))
        line[a] = n
        return n

    emit(goal)
    return d


# chase


@dataclass
class ChaseResult:
    implied: bool
    variables: tuple
    indices: tuple
    team: list
    history: list
    sigma_star: list
    witness: int | None
    goal: MarginalIdAtom
    premises: tuple

    def uniform_team(self) -> WeightedTeam:
        """Uniform distribution over the chase result, projected to the atom variables."""
        rows = {}
        for s in self.team:
            key = tuple(str(s[v]) for v in self.variables)
            rows[key] = rows.get(key, 0) + 1
        total = len(self.team)
        return WeightedTeam(self.variables, {k: Fraction(c, total) for k, c in rows.items()})


def _sigma_star(premises):
    out = []
    for p in premises:
        for a in (p, p.inverse()):
            tau = (a.lhs, frozenset(a.lhs), a.rhs, frozenset(a.rhs))
            if tau not in out:
                out.append(tau)
    return out


def chase_decide(premises, goal: MarginalIdAtom, *, full_index: bool = False, max_steps: int | None = None) -> ChaseResult:
    premises = tuple(premises)
    variables = set(goal.variables())
    for p in premises:
        variables |= p.variables()
    variables = tuple(sorted(variables))
    star = _sigma_star(premises)
    if full_index:
        index_sets = [frozenset(c) for k in range(len(variables) + 1) for c in itertools.combinations(variables, k)]
    else:
        index_sets = list(dict.fromkeys(w for _, u, _, v in star for w in (u, v)))
    n = len(goal.lhs)
    if max_steps is None:
        max_steps = 10 * (n + 1) ** len(variables) * max(1, len(index_sets))
    counts = {w: {} for w in index_sets}
    seen = {}
    team, history = [], []

    def key_of(s, w):
        return tuple(s[v] for v in sorted(w))

    def add(base: dict, parent):
        s = dict(base)
        for w in index_sets:
            s[("i", w)] = counts[w].get(key_of(s, w), 0)
        for w in index_sets:
            k = key_of(s, w)
            counts[w][k] = counts[w].get(k, 0) + 1
        for t, (_, _, v, vset) in enumerate(star):
            seen.setdefault(t, set()).add(tuple(s[x] for x in v) + (s[("i", vset)],))
        team.append(s)
        history.append(parent)

    start = {v: 0 for v in variables}
    for i, x in enumerate(goal.lhs, 1):
        start[x] = i
    add(start, None)
    queue = 0
    while queue < len(team):
        s = team[queue]
        for t, (u, uset, v, vset) in enumerate(star):
            want = tuple(s[x] for x in u) + (s[("i", uset)],)
            if want in seen.get(t, ()):
                continue
            if len(team) >= max_steps:
                raise ChaseBudget(f"chase exceeded {max_steps} assignments")
            base = {x: 0 for x in variables}
            for a, b in zip(u, v):
                base[b] = s[a]
            add(base, (queue, t))
        queue += 1
    target = tuple(range(1, n + 1))
    witness = next((i for i, s in enumerate(team) if tuple(s[y] for y in goal.rhs) == target), None)
    return ChaseResult(
        witness is not None, variables, tuple(index_sets), team, history,
        [(MarginalIdAtom(u, v)) for u, _, v, _ in star], witness, goal, premises,
    )


def extract_proof(result: ChaseResult) -> Derivation:
    """Read a derivation of the goal off the generation history of its witness row."""
    if not result.implied:
        raise NoWitness("the chase found no witness for the goal")
    goal, premises = result.goal, set(result.premises)
    xs = goal.lhs
    d = Derivation()
    cache = {}
    lines_of = {}

    def line(atom, why):
        if atom in lines_of:
            return lines_of[atom]
        n = d.add(atom, why)
        lines_of[atom] = n
        return n

    def star_line(t):
        """Line for the t-th Σ* atom as a marginal identity (symmetry if inverted)."""
        atom = result.sigma_star[t]
        if atom in premises:
            return line(atom, Premise())
        return line(atom, Symmetry(line(atom.inverse(), Premise())))

    def proof(i):
        """(line, ordered positive variables) proving x_{s(z)} ... ~ z ... for row i."""
        if i in cache:
            return cache[i]
        s = result.team[i]
        parent = result.history[i]
        if parent is None:
            out = (line(MarginalIdAtom(xs, xs), Reflexivity()), list(xs))
            cache[i] = out
            return out
        p, t = parent
        ps = result.team[p]
        tau = result.sigma_star[t]
        keep = [j for j, u in enumerate(tau.lhs) if ps[u] > 0]
        if not keep:
            cache[i] = (None, [])
            return cache[i]
        pl, pvars = proof(p)
        tl = star_line(t)
        us = [tau.lhs[j] for j in keep]
        vs = [tau.rhs[j] for j in keep]
        # x_{s(u)} ~ u from the parent's line
        left = MarginalIdAtom(tuple(xs[ps[u] - 1] for u in us), tuple(us))
        if tuple(us) != tuple(pvars):
            pl = line(left, ProjPerm(pl, tuple(pvars.index(u) + 1 for u in us)))
        mid = MarginalIdAtom(tuple(us), tuple(vs))
        if mid != tau:
            tl = line(mid, ProjPerm(tl, tuple(j + 1 for j in keep)))
        out = (line(MarginalIdAtom(left.lhs, tuple(vs)), Transitivity(pl, tl)), vs)
        assert all(s[v] == ps[u] for u, v in zip(us, vs))
        cache[i] = out
        return out

    n, zs = proof(result.witness)
    s = result.team[result.witness]
    if tuple(zs) != goal.rhs:
        atom_now = d.lines[n - 1][0]
        idx = tuple(zs.index(y) + 1 for y in goal.rhs)
        n = line(atom_now.project([i - 1 for i in idx]), ProjPerm(n, idx))
    del s
    if d.conclusion != goal:
        # the goal already appeared earlier; repeat it as the final line
        d.add(goal, ProjPerm(lines_of[goal], tuple(range(1, len(goal.lhs) + 1))))
    return d.trimmed()


@dataclass
class NotDerivable:
    counterexample: WeightedTeam | None
    chase: ChaseResult | None = None

    def __bool__(self):
        return False


def derive(premises, goal: MarginalIdAtom, *, symmetry: bool = True, full_index: bool = False):
    """A verified Derivation, or NotDerivable with a counterexample team."""
    premises = tuple(premises)
    if not symmetry:
        d = _saturation_proof(premises, goal, symmetry=False)
        return d if d is not None else NotDerivable(None)
    result = chase_decide(premises, goal, full_index=full_index)
    if result.implied:
        return extract_proof(result)
    return NotDerivable(result.uniform_team(), result)
