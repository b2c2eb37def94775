"""Fourier-Motzkin elimination over the rationals.

Kept independent of the simplex code so the two can cross-check each other.
Strict rows a·x < b become a·x + e <= b with one slack e <= 1; the system is
feasible iff the projection onto e contains a positive point. With only
non-strict rows left, Chernikov's rule applies: after k eliminations a row
combined from more than k+1 original rows is implied by the others.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd

from .errors import TooLarge

_EPS = ("", "eps")  # sorts before every LinVar key, never eliminated


def _norm(coeffs: dict, rhs: Fraction):
    """Scale by a positive factor to coprime integers so duplicates collapse."""
    vals = list(coeffs.values()) + [rhs]
    den = 1
    for q in vals:
        den = den * q.denominator // gcd(den, q.denominator)
    nums = [int(q * den) for q in vals]
    g = 0
    for x in nums:
        g = gcd(g, x)
    g = g or 1
    key = tuple(sorted(((v, n // g) for v, n in zip(coeffs, nums[:-1])), key=lambda t: _order(t[0])))
    return key, Fraction(nums[-1] // g)


def _order(v):
    return (0, "") if v == _EPS else (1, str(v))


def _add(rows: dict, key, rhs, history: frozenset) -> None:
    # keep the smallest history for duplicate rows
    old = rows.get((key, rhs))
    if old is None or len(history) < len(old):
        rows[(key, rhs)] = history


def fm_feasible(system, max_rows: int = 4000) -> bool:
    """Decide feasibility of ``system`` (a LinearSystem) by eliminating every variable."""
    rows: dict = {}
    n = 0
    for c in system.all_constraints:
        coeffs = dict(c.coeffs)
        if c.rel == "=":
            _add(rows, *_norm(coeffs, c.rhs), frozenset([n]))
            _add(rows, *_norm({v: -a for v, a in coeffs.items()}, -c.rhs), frozenset([n + 1]))
            n += 2
        else:
            if c.rel == "<":
                coeffs[_EPS] = Fraction(1)
            _add(rows, *_norm(coeffs, c.rhs), frozenset([n]))
            n += 1
    _add(rows, *_norm({_EPS: Fraction(1)}, Fraction(1)), frozenset([n]))
    rows = _prune(rows)
    if rows is None:
        return False
    eliminated = 0
    while True:
        live = {}
        for key, _ in rows:
            for v, a in key:
                if v == _EPS:
                    continue
                p, q = live.get(v, (0, 0))
                live[v] = (p + (a > 0), q + (a < 0))
        if not live:
            return _eps_positive(rows)
        var = min(live, key=lambda v: (live[v][0] * live[v][1] - live[v][0] - live[v][1], _order(v)))
        eliminated += 1
        pos, neg, rest = [], [], {}
        for (key, rhs), hist in rows.items():
            a = dict(key).get(var)
            if a is None:
                _add(rest, key, rhs, hist)
            elif a > 0:
                pos.append((key, rhs, hist))
            else:
                neg.append((key, rhs, hist))
        for kp, bp, hp in pos:
            dp = dict(kp)
            ap = dp.pop(var)
            for kn, bn, hn in neg:
                hist = hp | hn
                if len(hist) > eliminated + 1:
                    continue
                dn = dict(kn)
                an = -dn.pop(var)
                # an * row_p + ap * row_n eliminates var
                out = {}
                for v, a in dp.items():
                    out[v] = out.get(v, 0) + an * a
                for v, a in dn.items():
                    out[v] = out.get(v, 0) + ap * a
                out = {v: Fraction(a) for v, a in out.items() if a}
                _add(rest, *_norm(out, an * bp + ap * bn), hist)
            if len(rest) > max_rows:
                raise TooLarge(f"Fourier-Motzkin exceeded {max_rows} rows")
        rows = _prune(rest)
        if rows is None:
            return False


def _prune(rows: dict):
    """Drop variable-free rows, returning None on a contradiction."""
    out = {}
    for (key, rhs), hist in rows.items():
        if not key:
            if rhs < 0:
                return None
            continue
        out[(key, rhs)] = hist
    return out


def _eps_positive(rows) -> bool:
    """Rows are a·e <= b; is there an e > 0 satisfying all of them?"""
    upper, lower = None, None
    for key, rhs in rows:
        (_, a), = key
        bound = Fraction(rhs, a)
        if a > 0:
            upper = bound if upper is None else min(upper, bound)
        else:
            lower = bound if lower is None else max(lower, bound)
    # e <= 1 is always present, so an upper bound exists
    return upper > 0 and (lower is None or lower <= upper)
