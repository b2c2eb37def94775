"""Exact feasibility for rational linear systems.

Strict rows are handled with a shared slack variable eps: the system with every
``<`` replaced by ``+ eps <=`` is solved maximising eps, and the original is
feasible iff eps can be made positive.  A presolve (fixings, forcing rows,
substitution of implied-free variables, component splitting) shrinks the large
systems produced by the translations before they reach the simplex tableau,
which runs on integer rows so no rational arithmetic happens inside pivots.
"""
from __future__ import annotations

import math
from collections import deque
from fractions import Fraction

ZERO = Fraction(0)


class _Row:
    __slots__ = ("coeffs", "rel", "rhs")

    def __init__(self, coeffs, rel, rhs):
        self.coeffs = coeffs
        self.rel = rel
        self.rhs = rhs


class Infeasible(Exception):
    pass


class Problem:
    """Mutable LP in column/row form with bounds and a postsolve stack."""

    def __init__(self, n: int, max_fill: int = 64):
        self.n = n
        self.rows: dict[int, _Row] = {}
        self.cols: list[set] = [set() for _ in range(n)]
        self.lo: list = [None] * n
        self.hi: list = [None] * n
        self.alive = set(range(n))
        self.stack: list = []
        self.max_fill = max_fill
        self._next = 0
        self.dirty: deque = deque()
        self._queued: set = set()

    def add_row(self, coeffs: dict, rel: str, rhs) -> None:
        rid = self._next
        self._next += 1
        coeffs = {j: a for j, a in coeffs.items() if a}
        self.rows[rid] = _Row(coeffs, rel, Fraction(rhs))
        for j in coeffs:
            self.cols[j].add(rid)
        self.touch(rid)

    def touch(self, rid):
        if rid not in self._queued:
            self._queued.add(rid)
            self.dirty.append(rid)

    def drop_row(self, rid):
        row = self.rows.pop(rid)
        for j in row.coeffs:
            self.cols[j].discard(rid)
            if not self.cols[j]:
                self._empty_col(j)

    # bounds
    def tighten(self, j, lo=None, hi=None):
        changed = False
        if lo is not None and (self.lo[j] is None or lo > self.lo[j]):
            self.lo[j] = lo
            changed = True
        if hi is not None and (self.hi[j] is None or hi < self.hi[j]):
            self.hi[j] = hi
            changed = True
        if self.lo[j] is not None and self.hi[j] is not None:
            if self.lo[j] > self.hi[j]:
                raise Infeasible
            if self.lo[j] == self.hi[j]:
                self.fix(j, self.lo[j])
                return
        if changed:
            for rid in self.cols[j]:
                self.touch(rid)

    def fix(self, j, val):
        if j not in self.alive:
            return
        if (self.lo[j] is not None and val < self.lo[j]) or (self.hi[j] is not None and val > self.hi[j]):
            raise Infeasible
        self.alive.discard(j)
        self.stack.append(("fix", j, val))
        for rid in list(self.cols[j]):
            row = self.rows[rid]
            a = row.coeffs.pop(j)
            row.rhs -= a * val
            self.touch(rid)
        self.cols[j].clear()

    def _empty_col(self, j):
        if j not in self.alive:
            return
        lo, hi = self.lo[j], self.hi[j]
        self.fix(j, lo if lo is not None else hi if hi is not None else ZERO)

    # activity bounds
    def _activity(self, row):
        lo = hi = ZERO
        lo_inf = hi_inf = 0
        for j, a in row.coeffs.items():
            l, h = self.lo[j], self.hi[j]
            if a > 0:
                if l is None:
                    lo_inf += 1
                else:
                    lo += a * l
                if h is None:
                    hi_inf += 1
                else:
                    hi += a * h
            else:
                if h is None:
                    lo_inf += 1
                else:
                    lo += a * h
                if l is None:
                    hi_inf += 1
                else:
                    hi += a * l
        return (None if lo_inf else lo), (None if hi_inf else hi)

    def examine(self, rid):
        row = self.rows.get(rid)
        if row is None:
            return
        k = len(row.coeffs)
        if k == 0:
            if (row.rel == "=" and row.rhs != 0) or (row.rel == "<=" and row.rhs < 0) or (
                row.rel == "<" and row.rhs <= 0
            ):
                raise Infeasible
            del self.rows[rid]
            return
        if k == 1 and row.rel != "<":
            (j, a), = row.coeffs.items()
            val = row.rhs / a
            del self.rows[rid]
            self.cols[j].discard(rid)
            if row.rel == "=":
                self.fix(j, val)
            elif a > 0:
                self.tighten(j, hi=val)
            else:
                self.tighten(j, lo=val)
            if j in self.alive and not self.cols[j]:
                self._empty_col(j)
            return
        lo, hi = self._activity(row)
        if row.rel == "<":
            if lo is not None and lo >= row.rhs:
                raise Infeasible
            if hi is not None and hi < row.rhs:
                self.drop_row(rid)
            return
        if lo is not None:
            if lo > row.rhs:
                raise Infeasible
            if lo == row.rhs:
                self._force(rid, low=True)
                return
        if row.rel == "<=":
            if hi is not None and hi <= row.rhs:
                self.drop_row(rid)
            return
        if hi is not None:
            if hi < row.rhs:
                raise Infeasible
            if hi == row.rhs:
                self._force(rid, low=False)

    def _force(self, rid, low: bool):
        row = self.rows.pop(rid)
        targets = []
        for j, a in row.coeffs.items():
            self.cols[j].discard(rid)
            at_lo = (a > 0) == low
            targets.append((j, self.lo[j] if at_lo else self.hi[j]))
        for j, val in targets:
            self.fix(j, val)

    def implied_free(self, j, row) -> bool:
        a = row.coeffs[j]
        lo_j, hi_j = self.lo[j], self.hi[j]
        if lo_j is None and hi_j is None:
            return True
        const = row.rhs / a
        mn = mx = const
        for k, b in row.coeffs.items():
            if k == j:
                continue
            c = -b / a
            l, h = self.lo[k], self.hi[k]
            if c > 0:
                mn = None if mn is None or l is None else mn + c * l
                mx = None if mx is None or h is None else mx + c * h
            else:
                mn = None if mn is None or h is None else mn + c * h
                mx = None if mx is None or l is None else mx + c * l
        ok_lo = lo_j is None or (mn is not None and mn >= lo_j)
        ok_hi = hi_j is None or (mx is not None and mx <= hi_j)
        return ok_lo and ok_hi

    def substitute(self, j, rid):
        """Eliminate x_j using equality row rid."""
        row = self.rows.pop(rid)
        a = row.coeffs[j]
        expr = {k: -b / a for k, b in row.coeffs.items() if k != j}
        const = row.rhs / a
        for k in row.coeffs:
            self.cols[k].discard(rid)
        self.alive.discard(j)
        self.stack.append(("expr", j, expr, const))
        for other in list(self.cols[j]):
            r = self.rows[other]
            b = r.coeffs.pop(j)
            r.rhs -= b * const
            for k, c in expr.items():
                v = r.coeffs.get(k, ZERO) + b * c
                if v:
                    if k not in r.coeffs:
                        self.cols[k].add(other)
                    r.coeffs[k] = v
                elif k in r.coeffs:
                    del r.coeffs[k]
                    self.cols[k].discard(other)
            self.touch(other)
        self.cols[j].clear()
        for k in expr:
            if k in self.alive and not self.cols[k]:
                self._empty_col(k)

    def run(self):
        while True:
            while self.dirty:
                rid = self.dirty.popleft()
                self._queued.discard(rid)
                self.examine(rid)
            if not self._substitution_pass():
                break
        for j in list(self.alive):
            if not self.cols[j]:
                self._empty_col(j)

    def _substitution_pass(self) -> bool:
        done = False
        for rid in sorted(self.rows, key=lambda r: len(self.rows[r].coeffs)):
            row = self.rows.get(rid)
            if row is None or row.rel != "=":
                continue
            width = len(row.coeffs) - 1
            best = None
            for j in row.coeffs:
                fill = width * (len(self.cols[j]) - 1)
                if fill <= self.max_fill and (best is None or fill < best[0]) and self.implied_free(j, row):
                    best = (fill, j)
            if best is not None:
                self.substitute(best[1], rid)
                done = True
                while self.dirty:
                    r = self.dirty.popleft()
                    self._queued.discard(r)
                    self.examine(r)
        return done

    def components(self):
        parent = {}

        def find(x):
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for rid, row in self.rows.items():
            js = list(row.coeffs)
            for j in js[1:]:
                ra, rb = find(js[0]), find(j)
                if ra != rb:
                    parent[ra] = rb
        groups: dict = {}
        for rid, row in self.rows.items():
            root = find(next(iter(row.coeffs)))
            groups.setdefault(root, []).append(rid)
        return list(groups.values())

    def postsolve(self, core: dict) -> list:
        x = [None] * self.n
        for j, v in core.items():
            x[j] = v
        for op in reversed(self.stack):
            if op[0] == "fix":
                x[op[1]] = op[2]
            else:
                _, j, expr, const = op
                x[j] = const + sum((c * x[k] for k, c in expr.items()), ZERO)
        return x


# integer tableau simplex


def _scale_to_ints(values):
    den = 1
    for q in values:
        d = q.denominator
        den = den * d // math.gcd(den, d)
    return [int(q * den) for q in values]


def _reduce(row):
    g = math.gcd(*row)
    if g > 1:
        return [a // g for a in row]
    return row


class Tableau:
    """Fraction-free dense tableau.  Row i encodes sum_j T[i][j] x_j = T[i][-1]
    with T[i][basis[i]] > 0 and every other basic column zero."""

    def __init__(self, rows, basis, ncols, pivot_rule="dantzig"):
        self.T = [_reduce(r) for r in rows]
        self.basis = list(basis)
        self.ncols = ncols
        self.pivot_rule = pivot_rule
        self.pivots = 0

    def value(self, col):
        for i, b in enumerate(self.basis):
            if b == col:
                r = self.T[i]
                return Fraction(r[-1], r[b])
        return ZERO

    def objective_row(self, costs):
        """Reduced-cost row (positively scaled) for minimising costs . x."""
        den = 1
        for c in costs:
            den = den * c.denominator // math.gcd(den, c.denominator)
        r0 = [int(c * den) for c in costs] + [0]
        for i, b in enumerate(self.basis):
            if r0[b]:
                row = self.T[i]
                p, q = row[b], r0[b]
                r0 = _reduce([p * u - q * v for u, v in zip(r0, row)])
        return r0

    def pivot(self, p, q, r0):
        rowp = self.T[p]
        piv = rowp[q]
        for i, row in enumerate(self.T):
            if i != p and row[q]:
                c = row[q]
                self.T[i] = _reduce([piv * u - c * v for u, v in zip(row, rowp)])
        self.basis[p] = q
        self.pivots += 1
        if r0[q]:
            c = r0[q]
            r0 = _reduce([piv * u - c * v for u, v in zip(r0, rowp)])
        return r0

    def minimize(self, costs, allowed, stop=None, max_pivots=None):
        """Run primal simplex from the current feasible basis; returns the final r0."""
        r0 = self.objective_row(costs)
        degenerate = 0
        while True:
            if stop is not None and stop(self):
                return r0
            bland = self.pivot_rule == "bland" or degenerate > 50
            q = None
            if bland:
                for j in allowed:
                    if r0[j] < 0:
                        q = j
                        break
            else:
                best = 0
                for j in allowed:
                    if r0[j] < best:
                        best = r0[j]
                        q = j
            if q is None:
                return r0
            p = None
            for i, row in enumerate(self.T):
                a = row[q]
                if a > 0:
                    if p is None:
                        p = i
                        continue
                    pr = self.T[p]
                    lhs, rhs = row[-1] * pr[q], pr[-1] * a
                    if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[p]):
                        p = i
            if p is None:
                raise RuntimeError("unbounded direction in a bounded program")
            degenerate = degenerate + 1 if self.T[p][-1] == 0 else 0
            r0 = self.pivot(p, q, r0)
            if max_pivots is not None and self.pivots > max_pivots:
                raise RuntimeError("pivot limit exceeded")


def solve_core(rows, lo, hi, pivot_rule="dantzig"):
    """Feasibility of rows (coeffs dict over 0..n-1, rel, rhs) with bounds.

    Returns a list of values or None.  Strict rows share one eps column."""
    n = len(lo)
    # column layout: for each variable one or two tableau columns
    shift = [ZERO] * n
    cols: list[list] = []  # per variable: list of (column, sign)
    ncols = 0
    extra = []  # (coeffs over tableau columns, rel, rhs)
    for j in range(n):
        if lo[j] is not None:
            shift[j] = lo[j]
            cols.append([(ncols, 1)])
            if hi[j] is not None:
                extra.append(({ncols: Fraction(1)}, "<=", hi[j] - lo[j]))
            ncols += 1
        elif hi[j] is not None:
            shift[j] = hi[j]
            cols.append([(ncols, -1)])
            ncols += 1
        else:
            cols.append([(ncols, 1), (ncols + 1, -1)])
            ncols += 2
    strict = any(rel == "<" for _, rel, _ in rows)
    eps = None
    if strict:
        eps = ncols
        ncols += 1
        extra.append(({eps: Fraction(1)}, "<=", Fraction(1)))
    tab_rows = []
    for coeffs, rel, rhs in rows:
        t = {}
        b = Fraction(rhs)
        for j, a in coeffs.items():
            b -= a * shift[j]
            for c, sgn in cols[j]:
                t[c] = t.get(c, ZERO) + a * sgn
        if rel == "<":
            t[eps] = Fraction(1)
        tab_rows.append((t, "=" if rel == "=" else "<=", b))
    tab_rows.extend(extra)
    slack_of = {}
    for i, (_, rel, _) in enumerate(tab_rows):
        if rel == "<=":
            slack_of[i] = ncols
            ncols += 1
    dense, basis = [], []
    arts = []
    for i, (t, rel, b) in enumerate(tab_rows):
        sign = -1 if b < 0 else 1
        vals = [ZERO] * ncols
        for c, a in t.items():
            vals[c] = a * sign
        if i in slack_of:
            vals[slack_of[i]] = Fraction(sign)
        rhs = b * sign
        if i in slack_of and sign == 1:
            basis.append(slack_of[i])
            vals.append(ZERO)  # placeholder for artificials appended later
        else:
            basis.append(None)
            vals.append(ZERO)
        dense.append((vals[:-1], rhs))
    total = ncols + sum(1 for b in basis if b is None)
    rows_int = []
    for i, (vals, rhs) in enumerate(dense):
        full = vals + [ZERO] * (total - ncols)
        if basis[i] is None:
            c = ncols + len(arts)
            arts.append(c)
            full[c] = Fraction(1)
            basis[i] = c
        rows_int.append(_scale_to_ints(full + [rhs]))
    tab = Tableau(rows_int, basis, total, pivot_rule)
    art_set = set(arts)
    if arts:
        costs = [ZERO] * total
        for c in arts:
            costs[c] = Fraction(1)
        allowed = list(range(total))
        tab.minimize(costs, allowed)
        if any(tab.value(c) > 0 for c in arts):
            return None
        _drive_out(tab, art_set)
    allowed = [c for c in range(total) if c not in art_set]
    if eps is not None and tab.value(eps) == 0:
        costs = [ZERO] * total
        costs[eps] = Fraction(-1)
        tab.minimize(costs, allowed, stop=lambda tb: tb.value(eps) > 0)
        if tab.value(eps) == 0:
            return None
    values = {}
    for i, b in enumerate(tab.basis):
        r = tab.T[i]
        values[b] = Fraction(r[-1], r[b])
    out = []
    for j in range(n):
        v = sum((values.get(c, ZERO) * sgn for c, sgn in cols[j]), ZERO)
        out.append(shift[j] + v)
    return out


def _drive_out(tab: Tableau, art_set):
    """Pivot zero-level artificials out of the basis, deleting redundant rows."""
    keep = []
    for i in range(len(tab.T)):
        b = tab.basis[i]
        if b not in art_set:
            keep.append(i)
            continue
        row = tab.T[i]
        q = next((c for c in range(tab.ncols) if c not in art_set and row[c] != 0), None)
        if q is None:
            continue
        if row[q] < 0:
            tab.T[i] = row = [-a for a in row]
            # basic artificial coefficient flips sign, but its level is zero so
            # the pivot below restores a positive basic coefficient
        dummy = [0] * (tab.ncols + 1)
        tab.pivot(i, q, dummy)
        keep.append(i)
    tab.T = [tab.T[i] for i in keep]
    tab.basis = [tab.basis[i] for i in keep]


# driver


def solve_system(system, presolve: bool = True, lazy_bounds: bool = True, pivot_rule: str = "dantzig",
                 max_fill: int = 64):
    from .linear import Verdict

    variables = list(system.variables)
    index = {v: i for i, v in enumerate(variables)}
    for c in system.constraints:
        for v, _ in c.coeffs:
            if v not in index:
                index[v] = len(variables)
                variables.append(v)
    n = len(variables)
    bounds = system.bounds()
    rows = [c for c in system.constraints] + system.distribution_rows()
    base = [({index[v]: Fraction(a) for v, a in c.coeffs}, c.rel, Fraction(c.rhs)) for c in rows]
    lo = [None] * n
    hi = [None] * n
    for v, (l, h) in bounds.items():
        lo[index[v]] = l
        hi[index[v]] = h
    stats = {"variables": n, "rows": len(base), "rounds": 0}
    active_hi = set() if lazy_bounds else {j for j in range(n) if hi[j] is not None}

    def point_of(x):
        return {v: x[i] for i, v in enumerate(variables)}

    while True:
        stats["rounds"] += 1
        cur_hi = [hi[j] if j in active_hi else None for j in range(n)]
        x = _solve(base, lo, cur_hi, presolve, pivot_rule, max_fill, stats)
        if x is None:
            return Verdict(False, None, stats)
        violated = {j for j in range(n) if hi[j] is not None and x[j] > hi[j]} - active_hi
        if violated:
            active_hi |= violated
            continue
        point = point_of(x)
        if system.check_point(point):
            return Verdict(True, point, stats)
        # should not happen; fall back to the plain tableau on everything
        stats["fallback"] = True
        x = solve_core(base, lo, hi, pivot_rule)
        if x is None:
            return Verdict(False, None, stats)
        point = point_of(x)
        if not system.check_point(point):
            raise RuntimeError("simplex produced a point that fails verification")
        return Verdict(True, point, stats)


def _solve(base, lo, hi, presolve, pivot_rule, max_fill, stats):
    n = len(lo)
    if not presolve:
        return solve_core(base, lo, hi, pivot_rule)
    prob = Problem(n, max_fill)
    prob.lo = list(lo)
    prob.hi = list(hi)
    try:
        for j in range(n):
            if lo[j] is not None and hi[j] is not None and lo[j] > hi[j]:
                raise Infeasible
        for coeffs, rel, rhs in base:
            prob.add_row(dict(coeffs), rel, rhs)
        for j in range(n):
            if lo[j] is not None and lo[j] == hi[j]:
                prob.fix(j, lo[j])
        prob.run()
    except Infeasible:
        stats["presolve"] = "infeasible"
        return None
    core = {}
    comps = prob.components()
    stats["core_rows"] = len(prob.rows)
    stats["core_vars"] = len({j for r in prob.rows.values() for j in r.coeffs})
    stats["components"] = len(comps)
    for comp in comps:
        js = sorted({j for rid in comp for j in prob.rows[rid].coeffs})
        local = {j: i for i, j in enumerate(js)}
        rows = [({local[j]: a for j, a in prob.rows[rid].coeffs.items()}, prob.rows[rid].rel, prob.rows[rid].rhs)
                for rid in comp]
        x = solve_core(rows, [prob.lo[j] for j in js], [prob.hi[j] for j in js], pivot_rule)
        if x is None:
            return None
        for j, v in zip(js, x):
            core[j] = v
    return prob.postsolve(core)
