import random
from fractions import Fraction as F

import pytest
from gen import A2, rational_team, team_formula
from hypothesis import given, settings
from hypothesis import strategies as st

from teamlp.core import Structure, WeightedTeam, combine, scale
from teamlp.errors import BadParameter, BudgetExceeded
from teamlp.pipeline import Budget, CheckRequest, check, check_formula, check_inc_sentence
from teamlp.semantics import eval_atom, eval_relational_formula
from teamlp.syntax import And, parse_eso_formula, parse_team_formula

p = parse_team_formula
SYM = WeightedTeam("xy", {("0", "1"): F(1, 2), ("1", "0"): F(1, 2)})


def test_symmetric_team():
    A = Structure(("0", "1"))
    phi = p("approx(x;y)")
    assert check_formula(phi, A, SYM) == eval_atom(phi, A, SYM).holds is True


def test_sentence_with_witness():
    phi = p("E x E y (x != y & approx(x;y))")
    r = check(CheckRequest(Structure(("a", "b")), phi))
    assert r.verdict and r.witness
    assert not check(CheckRequest(Structure(("a",)), phi)).verdict


def test_dependence_atoms():
    A = Structure(("0", "1"))
    X = WeightedTeam("xy", {("0", "0"): F(1, 2), ("0", "1"): F(1, 2)})
    phi = p("dep(x;y)")
    r = check(CheckRequest(A, phi, X))
    assert r.verdict is False == eval_atom(phi, A, X).holds
    # a disjunction over dep needs the branching search
    r = check(CheckRequest(A, p("(dep(x;y) | x = y)"), X))
    assert r.verdict and "search" in r.route
    Y = WeightedTeam("xy", {("0", "0"): F(1, 2), ("1", "1"): F(1, 2)})
    assert check_formula(phi, A, Y)


def test_dependence_sum_mode_agrees():
    A = Structure(("0", "1"))
    rng = random.Random(5)
    for _ in range(6):
        X = rational_team(rng, ("x", "y"))
        for text in ("dep(x;y)", "(dep(x;y) & approx(x;y))"):
            a = check_formula(p(text), A, X, dep_mode="clause")
            b = check_formula(p(text), A, X, dep_mode="sum")
            assert a == b
        assert check_formula(p("dep(x;y)"), A, X) == eval_atom(p("dep(x;y)"), A, X).holds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_conjunctions_match_direct_evaluation(seed):
    rng = random.Random(seed)
    phi = team_formula(rng, ("x", "y"), depth=2, quantifiers=False, disjunction=False)
    X = rational_team(rng, ("x", "y"), A2.domain)
    direct = all(eval_atom(c, A2, X).holds for c in _conjuncts(phi))
    assert check_formula(phi, A2, X) == direct


def _conjuncts(phi):
    if isinstance(phi, And):
        return _conjuncts(phi.left) + _conjuncts(phi.right)
    return [phi]


def test_open_formula_needs_team():
    with pytest.raises(BadParameter):
        check(CheckRequest(A2, p("approx(x;y)")))
    with pytest.raises(BadParameter):
        check(CheckRequest(A2, p("approx(x;y)"), engine="magic"))


def test_budget_is_reported():
    X = rational_team(random.Random(1), ("x", "y"), max_rows=4)
    phi = p("(dep(x;y) | dep(y;x))")
    with pytest.raises(BudgetExceeded):
        check(CheckRequest(A2, phi, WeightedTeam("xy", {r: F(1, 4) for r in [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]}),
                           budget=Budget(nodes=1)))
    assert check(CheckRequest(A2, phi, X)).verdict in (True, False)


def test_equiextension_sentences():
    A1 = Structure(("a",))
    phi = p("E x E y (x != y & equi(x;y))")
    assert not check_inc_sentence(phi, A1).verdict
    psi = p("A x equi(x;x)")
    A = Structure(("0", "1"), {"R": (1, {("0",)})})
    assert check_inc_sentence(psi, A).verdict == eval_relational_formula(psi, A) is True


def test_eso_sentences_route_directly():
    A = Structure(("a", "b", "c"))
    assert check(CheckRequest(A, parse_eso_formula("Ef f/1:D A x A y f(x) = f(y)"))).verdict
    assert not check(CheckRequest(A, parse_eso_formula("Ef f/1:R A x !(f(x) <= f(x))"))).verdict


# invariants


CORPUS = [
    "approx(x;y)",
    "(x = y | approx(x;y))",
    "E z approx(x;z)",
    "A z (x = z | approx(x;z))",
    "(R(x) | approx(x y; y x))",
    "dep(x;y)",
    "(dep(x;y) | x = y)",
]


def corpus_teams(seed, n=3):
    rng = random.Random(seed)
    out = [SYM, WeightedTeam("xy", {("0", "0"): F(1, 3), ("1", "1"): F(2, 3)})]
    out += [rational_team(rng, ("x", "y")) for _ in range(n)]
    return out


@pytest.mark.parametrize("text", CORPUS)
def test_engine_independence(text):
    phi = p(text)
    for X in corpus_teams(len(text)):
        verdicts = {engine: check_formula(phi, A2, X, engine=engine) for engine in ("simplex", "fm", "bruteforce")}
        assert len(set(verdicts.values())) == 1, verdicts


@pytest.mark.parametrize("text", CORPUS[:5])
def test_scaled_union_closure(text):
    phi = p(text)
    rng = random.Random(7)
    good = [X for X in corpus_teams(11, 5) if check_formula(phi, A2, X)]
    for i, X in enumerate(good):
        for Y in good[i + 1:]:
            alpha = F(rng.randint(1, 4), 5)
            assert check_formula(phi, A2, combine(alpha, X, Y))


@pytest.mark.parametrize("text", CORPUS)
def test_scaling_invariance_in_weighted_mode(text):
    phi = p(text)
    for X in corpus_teams(3, 2):
        assert check_formula(phi, A2, X) == check_formula(phi, A2, scale(F(5, 2), X), normalize=False)


def _swap(v):
    return {"0": "1", "1": "0"}[v]


def test_isomorphism_invariance():
    B = Structure(("0", "1"), {"R": (1, {("1",)}), "S": (2, {("1", "0"), ("0", "0")})})
    for text in CORPUS:
        phi = p(text)
        for X in corpus_teams(4, 2):
            Y = WeightedTeam(X.variables, {tuple(map(_swap, r)): w for r, w in X.items()})
            assert check_formula(phi, A2, X) == check_formula(phi, B, Y)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_relational_formulas_use_the_support(seed):
    rng = random.Random(seed)
    phi = team_formula(rng, ("x", "y"), depth=2, atoms=("incl", "dep"))
    X = rational_team(rng, ("x", "y"), A2.domain)
    assert check_formula(phi, A2, X) == eval_relational_formula(phi, A2, X)
