"""Compilers between probabilistic team logic and additive existential second-order logic.

Every function here is a pure tree rewrite. Fresh names are drawn from a
``FreshNames`` pool seeded with every name of the input, so introduced symbols
never collide with the caller's vocabulary.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import (
    BadParameter,
    CannotPrenex,
    NotASentence,
    NotInNormalForm,
    NotLoose,
    UnsupportedAtom,
)
from .syntax import (
    ONE,
    ZERO,
    Add,
    And,
    Apply,
    Bottom,
    Const,
    Dependence,
    Eq,
    Equiextension,
    Exists,
    FnExists,
    Forall,
    FreshNames,
    Inclusion,
    MarginalIdentity,
    Neq,
    Node,
    Not,
    NotLe,
    NumEq,
    NumLe,
    Or,
    ProbIndependence,
    Rel,
    Sum,
    Top,
    all_names,
    alpha_rename,
    conj,
    disj,
    dual,
    eq_tuple,
    exists,
    fn_arities,
    forall,
    free_fns,
    free_vars,
    has_dummy_sum,
    has_terms,
    iff,
    implies,
    in_prefix_class,
    is_almost_conjunctive,
    is_first_order,
    is_loose,
    is_quantifier_free,
    prefix_word,
    quantifier_prefix,
    split_conjuncts,
    substitute,
    to_nnf,
    to_text,
    transform,
    walk,
)


@dataclass
class TranslationTrace:
    steps: list = field(default_factory=list)
    fresh_names: list = field(default_factory=list)

    def record(self, rule: str, before, after) -> None:
        self.steps.append((rule, _show(before), _show(after)))

    def format(self) -> str:
        lines = []
        for i, (rule, before, after) in enumerate(self.steps, 1):
            lines.append(f"[{i}] {rule}")
            lines.append(f"    in : {before}")
            lines.append(f"    out: {after}")
        if self.fresh_names:
            lines.append("fresh: " + ", ".join(self.fresh_names))
        return "\n".join(lines)


def _show(x, limit=400) -> str:
    text = x if isinstance(x, str) else to_text(x)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _pool(*nodes, extra=()) -> FreshNames:
    used = set(extra)
    for n in nodes:
        used |= all_names(n)
    return FreshNames(used)


def _sum(vars_, body):
    vars_ = tuple(vars_)
    return Sum(vars_, body) if vars_ else body


def _map_children(node, fn):
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            changes[f.name] = fn(v)
    return dataclasses.replace(node, **changes) if changes else node


def _is_fo(phi) -> bool:
    return is_first_order(phi) and not any(isinstance(n, Not) for n in walk(phi))


def _team_nnf(phi):
    """Push negations inside first-order parts; team atoms may not be negated."""
    if isinstance(phi, Not):
        return to_nnf(phi)
    if isinstance(phi, (And, Or)):
        return type(phi)(_team_nnf(phi.left), _team_nnf(phi.right))
    if isinstance(phi, (Exists, Forall)):
        return type(phi)(phi.var, _team_nnf(phi.body))
    return phi


# team logic -> ESO


class _TeamToEso:
    def __init__(self, fresh, dep_mode, flatten, scoped, trace, dist=()):
        self.fresh = fresh
        self.dist = set(dist)
        self.dep_mode = dep_mode
        self.flatten = flatten
        self.scoped = scoped
        self.trace = trace

    def ref(self, fref, args):
        name, suffix = fref
        return Apply(name, tuple(args) + suffix)

    def new_fn(self):
        name = self.fresh("g")
        if self.trace:
            self.trace.fresh_names.append(name)
        return name

    def sort_for(self, g, fref):
        """A new function summing exactly to a whole distribution is one too."""
        if not fref[1] and fref[0] in self.dist:
            self.dist.add(g)
            return "D"
        return "U"

    def tr(self, phi, xs, fref):
        out = self._tr(phi, xs, fref)
        if self.trace is not None and not isinstance(phi, (And,)):
            self.trace.record(self._rule_name(phi), phi, out)
        return out

    def _rule_name(self, phi):
        if isinstance(phi, (Eq, Neq, Rel, Top, Bottom)) or (self.flatten and _is_fo(phi) and is_quantifier_free(phi)):
            return "literal"
        return {
            MarginalIdentity: "marginal identity",
            Dependence: "dependence",
            Or: "disjunction",
            Exists: "existential",
            Forall: "universal",
        }.get(type(phi), type(phi).__name__)

    def _tr(self, phi, xs, fref):
        if isinstance(phi, (Inclusion, Equiextension, ProbIndependence)):
            raise UnsupportedAtom(f"{type(phi).__name__} has no translation to additive ESO")
        if isinstance(phi, Top):
            return Top()
        fo_block = self.flatten and _is_fo(phi) and is_quantifier_free(phi)
        if isinstance(phi, (Eq, Neq, Rel, Bottom)) or fo_block:
            return forall(xs, Or(NumEq(self.ref(fref, xs), ZERO), phi))
        if isinstance(phi, Dependence):
            return self.dependence(phi, xs, fref)
        if isinstance(phi, MarginalIdentity):
            return self.marginal(phi, xs, fref)
        if isinstance(phi, And):
            return conj(self.tr(phi.left, xs, fref), self.tr(phi.right, xs, fref))
        if isinstance(phi, Or):
            return self.disjunction(phi, xs, fref)
        if isinstance(phi, Exists):
            g = self.new_fn()
            y = phi.var
            gy = Apply(g, tuple(xs) + (y,))
            body = conj(
                forall(xs, NumEq(Sum((y,), gy), self.ref(fref, xs))),
                self.tr(phi.body, tuple(xs) + (y,), (g, ())),
            )
            return FnExists(g, len(xs) + 1, self.sort_for(g, fref), body)
        if isinstance(phi, Forall):
            g = self.new_fn()
            y = phi.var
            z = self.fresh(y)
            sort = self.sort_for(g, fref)
            gy = Apply(g, tuple(xs) + (y,))
            gz = Apply(g, tuple(xs) + (z,))
            body = conj(
                forall(xs, conj(Forall(y, Forall(z, NumEq(gy, gz))), NumEq(Sum((y,), gy), self.ref(fref, xs)))),
                self.tr(phi.body, tuple(xs) + (y,), (g, ())),
            )
            return FnExists(g, len(xs) + 1, sort, body)
        raise UnsupportedAtom(f"cannot translate {type(phi).__name__}")

    def dependence(self, phi, xs, fref):
        if phi.target in phi.args:
            return Top()
        if self.dep_mode == "sum":
            ctx = tuple(dict.fromkeys(phi.args))
            rest0 = tuple(x for x in xs if x not in ctx)
            rest1 = tuple(x for x in rest0 if x != phi.target)
            f = self.ref(fref, xs)
            return forall(ctx, Exists(phi.target, NumEq(_sum(rest1, f), _sum(rest0, f))))
        primed = {x: self.fresh(x) for x in xs}
        xs2 = tuple(primed[x] for x in xs)
        differ = [Neq(a, primed.get(a, a)) for a in phi.args]
        same = Eq(phi.target, primed.get(phi.target, phi.target))
        body = disj(NumEq(self.ref(fref, xs), ZERO), NumEq(self.ref(fref, xs2), ZERO), *differ, same)
        return forall(tuple(xs) + xs2, body)

    def _side(self, side, xs, fref, ys):
        """Marginal of ``side`` at ``ys``, plus the consistency condition for repeated variables."""
        mapping = {}
        conds = []
        for v, y in zip(side, ys):
            if v in mapping:
                conds.append(Eq(mapping[v], y))
            else:
                mapping[v] = y
        summed = tuple(x for x in xs if x not in mapping)
        args = tuple(mapping.get(x, x) for x in xs)
        return _sum(summed, self.ref(fref, args)), conj(*conds)

    def marginal(self, phi, xs, fref):
        if not phi.lhs:
            return Top()
        ys = tuple(self.fresh("y") for _ in phi.lhs)
        left, c0 = self._side(phi.lhs, xs, fref, ys)
        right, c1 = self._side(phi.rhs, xs, fref, ys)
        if isinstance(c0, Top) and isinstance(c1, Top):
            return forall(ys, NumEq(left, right))
        # repeated variables: a side whose pattern ys does not match contributes zero
        parts = [
            Or(dual(conj(c0, c1)), NumEq(left, right)),
            Or(dual(conj(c0, dual(c1))), NumEq(left, ZERO)) if not isinstance(c1, Top) else Top(),
            Or(dual(conj(dual(c0), c1)), NumEq(right, ZERO)) if not isinstance(c0, Top) else Top(),
        ]
        return forall(ys, conj(*parts))

    def disjunction(self, phi, xs, fref):
        g = self.new_fn()
        sort = self.sort_for(g, fref)
        y = self.fresh("y")
        gy = Apply(g, tuple(xs) + (y,))
        split = forall(
            xs,
            conj(
                NumEq(Sum((y,), gy), self.ref(fref, xs)),
                Forall(y, disj(Eq(y, "#0"), Eq(y, "#1"), NumEq(gy, ZERO))),
            ),
        )
        left = self.tr(phi.left, xs, (g, ("#0",)))
        right = self.tr(phi.right, xs, (g, ("#1",)))
        return FnExists(g, len(xs) + 1, sort, conj(split, left, right))


def team_to_eso(
    phi,
    variables,
    *,
    fn: str = "f",
    dep_mode: str = "clause",
    flatten_first_order: bool = True,
    eliminate_constants: bool = False,
    tight_sorts: bool = False,
    trace: TranslationTrace | None = None,
):
    """Translate a team formula over ``variables`` into an ESO formula with one
    free function ``fn`` of arity ``len(variables)`` standing for the team.

    ``dep_mode='clause'`` renders dep(x;y) as a pairwise clause over two copies of
    the team variables; ``'sum'`` uses the marginal form with an existential
    witness, which keeps the output almost conjunctive but is not prenexable.
    ``eliminate_constants`` replaces the split constants #0/#1 by universally
    quantified distinct elements. Quantified functions are Unit-sorted;
    ``tight_sorts`` marks those whose total mass is forced to 1 as
    distributions instead, assuming the team itself is probabilistic.
    """
    if dep_mode not in ("clause", "sum"):
        raise BadParameter(f"unknown dep_mode {dep_mode!r}")
    variables = tuple(variables)
    if len(set(variables)) != len(variables):
        raise BadParameter("team variables must be distinct")
    phi = _team_nnf(phi)
    missing = free_vars(phi) - set(variables)
    if missing:
        raise BadParameter(f"free variables {sorted(missing)} are not team variables")
    fresh = _pool(phi, extra=set(variables) | {fn})
    phi = alpha_rename(phi, avoid=set(variables) | {fn}, fresh=fresh)
    t = _TeamToEso(fresh, dep_mode, flatten_first_order, True, trace, dist={fn} if tight_sorts else ())
    out = t.tr(phi, variables, (fn, ()))
    if eliminate_constants:
        out = _eliminate_split_constants(out, variables, fn, fresh, trace)
    return out


def _eliminate_split_constants(psi, xs, fn, fresh, trace):
    """∃f'∀c∀d∀x̄(f'(x̄,c,d)=f(x̄) ∧ (c≠d → ψ**)) where ψ** uses c, d for #0, #1."""
    fp, c, d = fresh(fn), fresh("c"), fresh("d")
    body = substitute(psi, {"#0": c, "#1": d})
    body = transform(body, lambda n: Apply(fp, n.args + (c, d)) if isinstance(n, Apply) and n.name == fn else None)
    out = FnExists(
        fp,
        len(xs) + 2,
        "U",
        forall((c, d) + tuple(xs), conj(NumEq(Apply(fp, tuple(xs) + (c, d)), Apply(fn, tuple(xs))), implies(Neq(c, d), body))),
    )
    if trace is not None:
        trace.fresh_names += [fp, c, d]
        trace.record("constant elimination", psi, out)
    return out


# prenex form


def prenex(phi, *, strict: bool = True, trace: TranslationTrace | None = None):
    """Move function quantifiers to the front, raising arities past universals.

    With ``strict`` the first-order universals are pulled out as well, giving
    ∃̈*∀*θ; a first-order ∃ then raises CannotPrenex. Without it only the
    function quantifiers move and first-order quantifiers stay in place.
    """
    if prefix_word(phi) is not None and in_prefix_class(prefix_word(phi), "Ef* A*"):
        return phi
    fresh = _pool(phi)
    phi = alpha_rename(phi, fresh=fresh)
    quants, body = _pull_fns(phi, fresh)
    if strict:
        body = _clauses_to_prenex(_pull_foralls(body))
    out = body
    for name, arity, sort, _ in reversed(quants):
        out = FnExists(name, arity, sort, out)
    if trace is not None:
        trace.record("prenex", phi, out)
    return out


def _pull_fns(node, fresh):
    """Return ([name, arity, sort, free-vars], body) with every FnExists lifted out."""
    if isinstance(node, FnExists):
        quants, body = _pull_fns(node.body, fresh)
        return [[node.name, node.arity, node.sort, set(free_vars(node))]] + quants, body
    if isinstance(node, (And, Or)):
        q1, b1 = _pull_fns(node.left, fresh)
        q2, b2 = _pull_fns(node.right, fresh)
        return q1 + q2, type(node)(b1, b2)
    if isinstance(node, Exists):
        quants, body = _pull_fns(node.body, fresh)
        for q in quants:
            q[3].discard(node.var)
        return quants, Exists(node.var, body)
    if isinstance(node, Forall):
        quants, body = _pull_fns(node.body, fresh)
        v = node.var
        for q in quants:
            if v not in q[3]:
                continue
            name = q[0]
            body = transform(body, lambda n, name=name: Apply(name, (v,) + n.args) if isinstance(n, Apply) and n.name == name else None)
            if q[2] == "D":
                # a distribution for each value of v
                ws = tuple(fresh("w") for _ in range(q[1]))
                body = conj(NumEq(_sum(ws, Apply(name, (v,) + ws)), ONE), body)
                q[2] = "U"
            q[1] += 1
            q[3].discard(v)
        return quants, Forall(v, body)
    return [], node


def _pull_foralls(node, limit=64):
    """Return the matrix as a list of clauses, each paired with its own universals."""
    if isinstance(node, Forall):
        out = []
        for vs, c in _pull_foralls(node.body, limit):
            out.append(([node.var] + vs, c) if node.var in free_vars(c) else (vs, c))
        return out
    if isinstance(node, And):
        return _pull_foralls(node.left, limit) + _pull_foralls(node.right, limit)
    if isinstance(node, Or):
        left = _pull_foralls(node.left, limit)
        right = _pull_foralls(node.right, limit)
        if len(left) * len(right) <= limit:
            # classical distribution; universals of the two sides are disjoint
            return [(vl + vr, Or(cl, cr)) for vl, cl in left for vr, cr in right]
        vl = [v for vs, _ in left for v in vs]
        vr = [v for vs, _ in right for v in vs]
        return [(vl + vr, Or(conj(*(c for _, c in left)), conj(*(c for _, c in right))))]
    if isinstance(node, Exists):
        raise CannotPrenex(f"first-order existential over {node.var} blocks prenexing")
    if isinstance(node, FnExists):
        raise CannotPrenex("function quantifier left inside the matrix")
    if isinstance(node, Top):
        return []
    return [([], node)]


def _clauses_to_prenex(clauses):
    vars_ = list(dict.fromkeys(v for vs, _ in clauses for v in vs))
    return forall(vars_, conj(*(c for _, c in clauses)))


# dummy sums


def _is_zero(t) -> bool:
    if isinstance(t, Const):
        return t.value == 0
    if isinstance(t, Add):
        return _is_zero(t.left) and _is_zero(t.right)
    if isinstance(t, Sum):
        return _is_zero(t.body)
    return False


def eliminate_dummy_sums(phi, *, trace: TranslationTrace | None = None):
    """Give every dummy SUM variable a real occurrence by widening all functions."""
    if not has_dummy_sum(phi):
        return phi
    fresh = _pool(phi)
    dummies = []

    def rename(n):
        if isinstance(n, Sum):
            body_vars = free_vars(n.body)
            new = []
            for v in n.vars:
                if v in body_vars:
                    new.append(v)
                else:
                    w = fresh("v")
                    dummies.append(w)
                    new.append(w)
            return Sum(tuple(new), n.body)
        return None

    phi = transform(phi, rename)
    vs = tuple(dummies)
    k = len(vs)
    free = sorted(free_fns(phi))
    arities = fn_arities(phi)
    star = {g: fresh(g) for g in free}
    kappa = {}

    def vec(base, n):
        return tuple(fresh(base) for _ in range(n))

    def widen(node):
        if isinstance(node, Apply):
            return Apply(star.get(node.name, node.name), node.args + vs)
        if isinstance(node, Const):
            if node.value == 0:
                return node
            if node.value not in kappa:
                kappa[node.value] = fresh("kappa")
            return Apply(kappa[node.value], vs)
        if isinstance(node, FnExists):
            xs, v1, v2 = vec("x", node.arity), vec("v", k), vec("v", k)
            even = forall(xs + v1 + v2, NumEq(Apply(node.name, xs + v1), Apply(node.name, xs + v2)))
            return FnExists(node.name, node.arity + k, node.sort, conj(even, widen(node.body)))
        if isinstance(node, Sum):
            body = widen(node.body)
            # a sum of zeros is zero and has nothing to widen
            return Const(0) if _is_zero(body) else Sum(node.vars, body)
        return _map_children(node, widen)

    # every widened term is constant in vs, so ∃vs and ∀vs agree; ∀ keeps it prenexable
    core = forall(vs, widen(phi))
    parts = []
    for g in free:
        xs, v1, v2 = vec("x", arities[g]), vec("v", k), vec("v", k)
        parts.append(forall(xs, NumEq(Sum(v1, Apply(star[g], xs + v1)), Apply(g, xs))))
        parts.append(forall(xs + v1 + v2, NumEq(Apply(star[g], xs + v1), Apply(star[g], xs + v2))))
    for c, name in kappa.items():
        v1, v2 = vec("v", k), vec("v", k)
        parts.append(forall(v1 + v2, NumEq(Apply(name, v1), Apply(name, v2))))
        parts.append(NumEq(Sum(v1, Apply(name, v1)), Const(c)))
    out = conj(*parts, core)
    for name in reversed(list(kappa.values())):
        out = FnExists(name, k, "R", out)
    for g in reversed(free):
        out = FnExists(star[g], arities[g] + k, "R", out)
    if trace is not None:
        trace.fresh_names += list(vs) + list(star.values()) + list(kappa.values())
        trace.record("dummy-sum elimination", phi, out)
    return out


# Skolem normal form with canonical atoms


def _split_prenex(phi):
    prefix, body = quantifier_prefix(phi)
    fns, foralls, exists_ = [], [], []
    stage = 0
    for q in prefix:
        if isinstance(q, FnExists):
            if stage > 0:
                raise NotInNormalForm("function quantifier after a first-order quantifier")
            fns.append((q.name, q.arity, q.sort))
        elif isinstance(q, Exists):
            if stage > 1:
                raise NotInNormalForm("existential after a universal")
            stage = 1
            exists_.append(q.var)
        else:
            stage = 2
            foralls.append(q.var)
    if not is_quantifier_free(body):
        raise NotInNormalForm("matrix is not quantifier free")
    return fns, exists_, foralls, body


def skolem_normal_form(phi, *, free_distributions: bool = True, trace: TranslationTrace | None = None):
    """Bring a loose {=,SUM} formula to ∃̈*∀*θ whose numerical atoms are all of
    the shape f_i(w̄) = SUM_v̄ f_j(ū) (or f_i(w̄) = 0/1).

    Each term gets a fresh function holding its value. Leading first-order
    existentials are turned into unary distributions on their witnesses.
    """
    if not is_loose(phi):
        raise NotLoose("negated numerical atoms are not allowed")
    if has_dummy_sum(phi):
        raise NotInNormalForm("eliminate dummy sums first")
    if not (prefix_word(phi) and in_prefix_class(prefix_word(phi), "Ef* E* A*")):
        phi = prenex(phi)
    fresh = _pool(phi)
    fns, exists_, foralls, body = _split_prenex(phi)
    sorts = {name: sort for name, _, sort in fns}
    new_fns = []

    def is_dist(name):
        return sorts[name] == "D" if name in sorts else free_distributions

    defs, def_vars = [], []

    def define(g, args, summed):
        """Fresh h with h(p̄) = SUM_summed g(args') where the unsummed slots of
        g become fresh variables p̄; returns the use-site term h(kept args)."""
        ps, inner, kept = [], [], []
        for a in args:
            if a in summed:
                inner.append(a)
            else:
                if len(ps) == len(def_vars):
                    def_vars.append(fresh("p"))
                p = def_vars[len(ps)]
                ps.append(p)
                inner.append(p)
                kept.append(a)
        once = all(args.count(v) == 1 for v in summed)
        if not is_dist(g):
            sort = "R" if summed else sorts.get(g, "R")
        else:
            sort = "D" if once else "U"
        h = fresh("h")
        new_fns.append((h, len(ps), sort))
        sorts[h] = sort
        renamed = {v: fresh("v") for v in summed}
        inner = tuple(renamed.get(a, a) for a in inner)
        defs.append(NumEq(Apply(h, tuple(ps)), Sum(tuple(renamed[v] for v in summed), Apply(g, inner))))
        return Apply(h, tuple(kept))

    def term(t):
        """Return an Apply holding the value of t."""
        if isinstance(t, Apply):
            return define(t.name, t.args, ())
        if isinstance(t, Sum):
            body = t.body
            if isinstance(body, Sum):
                body = term(body)
            if not isinstance(body, Apply):
                raise NotInNormalForm(f"term {to_text(t)} is outside the {{=, SUM}} signature")
            return define(body.name, body.args, tuple(dict.fromkeys(t.vars)))
        raise NotInNormalForm(f"term {to_text(t)} is outside the {{=, SUM}} signature")

    def atom(a):
        if isinstance(a, NumLe):
            raise NotInNormalForm("only numerical identities are allowed")
        if not isinstance(a, NumEq):
            return a
        if _canonical_atom(a, set(sorts)):
            return a
        if _canonical_atom(NumEq(a.right, a.left), set(sorts)):
            return NumEq(a.right, a.left)
        left, right = a.left, a.right
        if isinstance(left, Const) and not isinstance(right, Const):
            left, right = right, left
        if isinstance(left, Const):
            return Top() if left.value == right.value else Bottom()
        hl = term(left)
        if isinstance(right, Const):
            if right.value not in (0, 1):
                raise NotInNormalForm("only the constants 0 and 1 are allowed")
            return NumEq(hl, right)
        if isinstance(right, Apply) and right.name != hl.name:
            return NumEq(hl, Sum((), right))
        return NumEq(hl, Sum((), term(right)))

    def walk_body(n):
        if isinstance(n, (And, Or)):
            return type(n)(walk_body(n.left), walk_body(n.right))
        return atom(n)

    theta = walk_body(body)
    if defs:
        theta = conj(*defs, theta)
    extra_forall = list(def_vars)
    for y in exists_:
        g = fresh("e")
        new_fns.append((g, 1, "D"))
        theta = Or(NumEq(Apply(g, (y,)), ZERO), theta)
        extra_forall.append(y)
    out = forall(foralls + extra_forall, theta)
    for name, arity, sort in reversed(fns + new_fns):
        out = FnExists(name, arity, sort, out)
    if trace is not None:
        trace.fresh_names += [n for n, _, _ in new_fns]
        trace.record("canonical atoms", phi, out)
    return out


def _canonical_atom(a, quantified) -> bool:
    if not isinstance(a, NumEq) or not isinstance(a.left, Apply):
        return False
    r = a.right
    if isinstance(r, Const):
        return r.value in (0, 1)
    if not isinstance(r, Sum) or not isinstance(r.body, Apply):
        return False
    fi, fj = a.left.name, r.body.name
    if fi == fj or not (fi in quantified or fj in quantified):
        return False
    return set(r.vars) <= set(r.body.args) and len(set(r.vars)) == len(r.vars)


# scaling to distributions


def scale_to_distributions(
    phi, *, pure: bool = False, bound_rows: bool = True, trace: TranslationTrace | None = None
):
    """Turn Unit-sorted quantified functions into Distribution-sorted ones.

    Every weight is divided by n^k with k the largest arity: quantified f gets
    one extra argument and is read on the diagonal; a free g gets k+1 extra
    arguments tied to g by a sum. ``pure`` removes the remaining 0 constants
    with a guarded two-argument witness. ``bound_rows=False`` leaves out the
    cell ≤ 1/n^k guards of Unit functions, which keeps the output inside
    {=, SUM}; that is only sound when the bounds are implied, as they are for
    functions produced by ``team_to_eso`` (each sums into the team function).
    """
    fns, exists_, foralls, theta = _split_prenex(phi)
    if exists_:
        raise NotInNormalForm("expected a ∃̈*∀* prefix")
    for n in walk(theta):
        if isinstance(n, NotLe):
            raise NotInNormalForm("expected a loose sentence over {=, SUM, 0, 1}")
        if isinstance(n, Const) and n.value not in (0, 1):
            raise NotInNormalForm("only the constants 0 and 1 are allowed")
    fresh = _pool(phi)
    arities = fn_arities(phi)
    quantified = {name: (arity, sort) for name, arity, sort in fns}
    for name, (_, sort) in quantified.items():
        if sort == "R":
            raise NotInNormalForm(f"function {name} ranges over the reals")
    free = sorted(set(arities) - set(quantified))
    k = max([1] + list(arities.values()))
    ws = tuple(fresh("w") for _ in range(k))
    u = fresh("u")
    uw = Apply(u, ws)
    zs = tuple(fresh("z") for _ in range(k))
    diag_z = fresh("z")
    new_names = {name: fresh(name) for name in quantified}
    new_names.update({g: fresh(g) for g in free})

    def replace(n):
        if isinstance(n, Const):
            return uw if n.value == 1 else None
        if not isinstance(n, Apply):
            return None
        if n.name in quantified:
            if not n.args:
                return Apply(new_names[n.name], (diag_z, diag_z))
            return Apply(new_names[n.name], n.args + (n.args[-1],))
        return Apply(new_names[n.name], n.args + zs + (zs[-1],))

    body = transform(theta, replace)
    ws2 = tuple(fresh("w") for _ in range(k))
    cons = [NumEq(uw, Apply(u, ws2))]
    univ = list(ws) + list(ws2)
    for name, (arity, sort) in quantified.items():
        f2 = new_names[name]
        if arity == 0:
            z2 = fresh("z")
            univ.append(z2)
            cell = Apply(f2, (diag_z, diag_z))
            cons.append(NumEq(cell, Apply(f2, (z2, z2))))
            if sort == "D":
                cons.append(NumEq(cell, uw))
            elif bound_rows:
                cons.append(NumLe(cell, uw))
            continue
        ys = tuple(fresh("y") for _ in range(arity))
        cell = Apply(f2, ys + (ys[-1],))
        if sort == "D":
            cons.append(NumEq(Sum(ys, cell), uw))
        elif bound_rows:
            cons.append(forall(ys, NumLe(cell, uw)))
    for g in free:
        g2 = new_names[g]
        ys = tuple(fresh("y") for _ in range(arities[g]))
        z1 = tuple(fresh("z") for _ in range(k))
        z2 = tuple(fresh("z") for _ in range(k))
        cell = Apply(g2, ys + z1 + (z1[-1],))
        cons.append(
            forall(
                ys + z1 + z2,
                conj(NumEq(cell, Apply(g2, ys + z2 + (z2[-1],))), NumEq(Sum(z1, cell), Apply(g, ys))),
            )
        )
    # the constraint block is universally closed; values only matter on the diagonal
    matrix = conj(*[_strip_forall(c, univ) for c in cons], body)
    univ = list(foralls) + list(zs) + [diag_z] + univ
    decls = [(u, k, "D")]
    decls += [(new_names[name], max(arity, 1) + 1, "D") for name, (arity, _) in quantified.items()]
    decls += [(new_names[g], arities[g] + k + 1, "D") for g in free]
    if pure:
        decls, univ, matrix = _realzero(decls, univ, matrix, fresh)
    out = forall(univ, matrix)
    for name, arity, sort in reversed(decls):
        out = FnExists(name, arity, sort, out)
    if trace is not None:
        trace.fresh_names += [d[0] for d in decls]
        trace.record("scale to distributions", phi, out)
    return out


def _strip_forall(c, univ):
    while isinstance(c, Forall):
        univ.append(c.var)
        c = c.body
    return c


def _realzero(decls, univ, matrix, fresh):
    """Replace the constant 0 by h(y,z) guarded by y = z, with f(x) = h(x,x) making h a distribution."""
    f, h = fresh("r"), fresh("r")
    x, y, z = fresh("x"), fresh("y"), fresh("z")
    parts = []
    for c in split_conjuncts(matrix):
        c2 = transform(c, lambda n: Apply(h, (y, z)) if isinstance(n, Const) and n.value == 0 else None)
        # the guard only matters where the witness is used; keeping it local keeps grounding small
        parts.append(c if c2 == c else Or(Eq(y, z), c2))
    matrix = conj(NumEq(Apply(f, (x,)), Sum((), Apply(h, (x, x)))), *parts)
    return decls + [(f, 1, "D"), (h, 2, "D")], univ + [x, y, z], matrix


# ESO -> team logic


def eso_to_team(phi, fn: str = "f", variables=None, *, trace: TranslationTrace | None = None):
    """Translate ∃̈f̄∀x̄θ with canonical atoms and Distribution sorts back to
    team logic. The team variables are ``variables`` (fresh names if omitted)."""
    fns, exists_, foralls, theta = _split_prenex(phi)
    if exists_:
        raise NotInNormalForm("expected a ∃̈*∀* prefix")
    quantified = {name: arity for name, arity, _ in fns}
    for name, _, sort in fns:
        if sort != "D":
            raise NotInNormalForm(f"function {name} is not distribution-sorted")
    arities = fn_arities(phi)
    others = set(arities) - set(quantified) - {fn}
    if others:
        raise NotInNormalForm(f"free functions {sorted(others)} besides {fn}")
    n = arities.get(fn, len(variables) if variables is not None else 0)
    fresh = _pool(phi, extra={fn})
    if variables is None:
        variables = tuple(fresh("t") for _ in range(n))
    variables = tuple(variables)
    if len(variables) != n:
        raise BadParameter(f"{fn} has arity {n} but {len(variables)} team variables were given")
    if set(variables) & (all_names(phi) - {fn}):
        phi = alpha_rename(phi, avoid=set(variables), fresh=fresh)
        fns, exists_, foralls, theta = _split_prenex(phi)
    fresh.reserve(variables)
    ys = {name: tuple(fresh("y") for _ in range(arity)) for name, arity in quantified.items()}
    ys[fn] = variables
    foralls = list(foralls)
    if not foralls:
        foralls = [fresh("x")]
    xs = tuple(foralls)
    state = {"split": None}

    def split_consts():
        if state["split"] is None:
            state["split"] = (fresh("c"), fresh("d"))
        return state["split"]

    def build(t):
        if isinstance(t, (Eq, Neq, Rel, Top, Bottom)):
            return t
        if isinstance(t, And):
            return And(build(t.left), build(t.right))
        if isinstance(t, Or):
            for a, b in ((t.left, t.right), (t.right, t.left)):
                if not has_terms(a):
                    return Or(a, And(dual(a), build(b)))
            c, d = split_consts()
            z = fresh("z")
            return Exists(
                z,
                conj(Dependence(xs, z), Or(And(build(t.left), Eq(z, c)), And(build(t.right), Eq(z, d)))),
            )
        if isinstance(t, NumEq):
            return identity(t)
        raise NotInNormalForm(f"unexpected node {type(t).__name__} in the matrix")

    def identity(a):
        if not isinstance(a.left, Apply) or a.left.name not in ys:
            raise NotInNormalForm(f"non-canonical atom {to_text(a)}")
        fi, xi = a.left.name, a.left.args
        if isinstance(a.right, Const):
            hit = eq_tuple(xi, ys[fi])
            if a.right.value == 1:
                return hit
            if a.right.value == 0:
                return dual(hit)
            raise NotInNormalForm(f"non-canonical atom {to_text(a)}")
        if not _canonical_atom(a, set(quantified)) or a.right.body.name not in ys:
            raise NotInNormalForm(f"non-canonical atom {to_text(a)}")
        summed = set(a.right.vars)
        fj, xj = a.right.body.name, a.right.body.args
        keep = [i for i, v in enumerate(xj) if v not in summed]
        xj1 = tuple(xj[i] for i in keep)
        yj1 = tuple(ys[fj][i] for i in keep)
        alpha, beta = fresh("a"), fresh("b")
        x = xs[0]
        return exists(
            (alpha, beta),
            conj(
                _iff(Eq(alpha, x), eq_tuple(xi, ys[fi])),
                _iff(Eq(beta, x), eq_tuple(xj1, yj1)),
                MarginalIdentity(xs + (alpha,), xs + (beta,)),
            ),
        )

    body = build(theta)
    out = exists([y for name in quantified for y in ys[name]], forall(xs, body))
    if state["split"] is not None:
        c, d = state["split"]
        out = exists((c, d), conj(Dependence((), c), Dependence((), d), Neq(c, d), out))
    if trace is not None:
        trace.record("ESO to team logic", phi, out)
    return out


def _iff(a, b):
    if isinstance(b, Top):
        return a
    return Or(And(a, b), And(dual(a), dual(b)))


# equiextension


def psi_k(atom: Equiextension, k: int, fresh: FreshNames | None = None):
    """The marginal-identity formula that expresses x̄₁ ⋈ x̄₂ on teams whose
    weights are bounded below by 1/n^k and where x̄₁ = x̄₂ has no mass."""
    if not isinstance(k, int) or k < 1:
        raise BadParameter("k must be a positive integer")
    x1, x2 = tuple(atom.lhs), tuple(atom.rhs)
    if len(x1) != len(x2):
        raise BadParameter("equi sides differ in length")
    if not x1:
        return Top()
    fresh = fresh or _pool(atom)
    us = tuple(fresh("u") for _ in x1)
    v1, v2 = fresh("v"), fresh("v")
    z0 = tuple(fresh("z") for _ in range(k))
    zs = tuple(fresh("z") for _ in range(k))
    y = us[0]
    ys = (y,) * k
    body = conj(
        iff(eq_tuple(x1, us), Eq(v1, y)),
        iff(eq_tuple(x2, us), Eq(v2, y)),
        implies(eq_tuple(z0, ys), eq_tuple(zs, ys)),
        Or(dual(eq_tuple(zs, ys)), MarginalIdentity(us + (v1,), us + (v2,))),
    )
    return forall(us, exists((v1, v2), forall(z0, exists(zs, body))))


def count_k(phi) -> int:
    """Number of disjunctions and first-order quantifiers."""
    return sum(1 for n in walk(phi) if isinstance(n, (Or, Exists, Forall)))


def sentence_inc_to_prob(phi, k: int | None = None, *, trace: TranslationTrace | None = None):
    """Translate an FO(⋈) sentence into an FO(≈) sentence."""
    if free_vars(phi):
        raise NotASentence(f"free variables {sorted(free_vars(phi))}")
    phi = _team_nnf(phi)
    for n in walk(phi):
        if isinstance(n, (Inclusion, Dependence, MarginalIdentity, ProbIndependence)):
            raise UnsupportedAtom(f"only equiextension atoms are allowed, found {type(n).__name__}")
    fresh = _pool(phi)
    phi = alpha_rename(phi, fresh=fresh)

    def wrap(n):
        if isinstance(n, Equiextension):
            u, v = fresh("u"), fresh("v")
            return exists((u, v), And(Neq(u, v), Equiextension(n.lhs + (u,), n.rhs + (v,))))
        return None

    wrapped = transform(phi, wrap)
    if k is None:
        k = count_k(wrapped)
    if k < 1:
        raise BadParameter("k must be a positive integer")

    def replace(n):
        if isinstance(n, Equiextension):
            return psi_k(n, k, fresh)
        return None

    out = transform(wrapped, replace)
    if trace is not None:
        trace.record("guard equiextension atoms", phi, wrapped)
        trace.record(f"replace by psi^{k}", wrapped, out)
    return out


# postcondition checkers


def check_loose(phi) -> bool:
    return is_loose(phi)


def check_no_dummy_sums(phi) -> bool:
    return not has_dummy_sum(phi)


def check_prefix(phi, pattern: str) -> bool:
    return in_prefix_class(prefix_word(phi), pattern)


def check_canonical(phi) -> bool:
    """∃̈*∀*θ with every numerical atom in the canonical shape."""
    if not check_prefix(phi, "Ef* A*"):
        return False
    prefix, body = quantifier_prefix(phi)
    quantified = {q.name for q in prefix if isinstance(q, FnExists)}
    for n in walk(body):
        if isinstance(n, (NumLe, NotLe)):
            return False
        if isinstance(n, NumEq) and not _canonical_atom(n, quantified):
            return False
    return True


def check_team_fragment(phi, atoms=(MarginalIdentity,)) -> bool:
    """No numerical syntax, and only the listed team atoms."""
    allowed = (Eq, Neq, Rel, Top, Bottom, And, Or, Exists, Forall) + tuple(atoms)
    return all(isinstance(n, allowed) for n in walk(phi))


def check_almost_conjunctive(phi) -> bool:
    return is_almost_conjunctive(phi)


def check_distribution_sorts(phi) -> bool:
    return all(n.sort == "D" for n in walk(phi) if isinstance(n, FnExists))
