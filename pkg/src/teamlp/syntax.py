"""Abstract syntax, parser, printer and syntactic analyses for both logics.

Team formulas and ESO formulas share one node hierarchy: first-order
literals and the connectives are common, team atoms only occur in team
formulas, numerical atoms and function quantifiers only in ESO formulas.

Arguments of relations and functions are strings.  A string of the form
``#i`` is a constant naming the i-th domain element (0-based); every
other string is a first-order variable.

>>> to_text(parse_team_formula("E x A y (x = y | incl(x; y))"))
'E x A y (x = y | incl(x; y))'
>>> classify(parse_eso_formula("Ef f/1:R A x (R(x) | f(x) = 0)")).is_almost_conjunctive
True
"""
from __future__ import annotations

import dataclasses
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator

from .errors import ArityError, NotFirstOrder, ParseError, UnsupportedOperation

SORTS = ("R", "U", "D")
SORT_NAMES = {"R": "Reals", "U": "Unit", "D": "Distribution"}


def is_const(arg: str) -> bool:
    return arg.startswith("#")


# nodes


@dataclass(frozen=True)
class Node:
    span: tuple | None = field(default=None, compare=False, repr=False, kw_only=True)


class Formula(Node):
    pass


class Term(Node):
    pass


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Neq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Rel(Formula):
    name: str
    args: tuple
    negated: bool = False


@dataclass(frozen=True)
class Not(Formula):
    """Negation of a first-order formula; removed by ``to_nnf``."""

    body: Formula


@dataclass(frozen=True)
class MarginalIdentity(Formula):
    lhs: tuple
    rhs: tuple

    def __post_init__(self):
        if len(self.lhs) != len(self.rhs):
            raise ArityError(f"approx sides differ in length: {self.lhs} vs {self.rhs}")


@dataclass(frozen=True)
class Inclusion(Formula):
    lhs: tuple
    rhs: tuple

    def __post_init__(self):
        if len(self.lhs) != len(self.rhs):
            raise ArityError(f"incl sides differ in length: {self.lhs} vs {self.rhs}")


@dataclass(frozen=True)
class Equiextension(Formula):
    lhs: tuple
    rhs: tuple

    def __post_init__(self):
        if len(self.lhs) != len(self.rhs):
            raise ArityError(f"equi sides differ in length: {self.lhs} vs {self.rhs}")


@dataclass(frozen=True)
class Dependence(Formula):
    args: tuple
    target: str


@dataclass(frozen=True)
class ProbIndependence(Formula):
    """``left`` is independent of ``right`` given ``given``."""

    left: tuple
    right: tuple
    given: tuple = ()


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class FnExists(Formula):
    name: str
    arity: int
    sort: str
    body: Formula

    def __post_init__(self):
        if self.sort not in SORTS:
            raise ValueError(f"unknown range sort {self.sort}")


@dataclass(frozen=True)
class Const(Term):
    value: Fraction


@dataclass(frozen=True)
class Apply(Term):
    name: str
    args: tuple


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Sum(Term):
    vars: tuple
    body: Term


@dataclass(frozen=True)
class NumEq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class NumLe(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class NotLe(Formula):
    left: Term
    right: Term


TEAM_ATOMS = (MarginalIdentity, Inclusion, Equiextension, Dependence, ProbIndependence)
FO_LITERALS = (Eq, Neq, Rel, Top, Bottom)
NUM_ATOMS = (NumEq, NumLe, NotLe)
ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


# generic traversal


def children(node: Node) -> list:
    out = []
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            out.append(v)
    return out


def transform(node: Node, fn: Callable[[Node], Node | None]) -> Node:
    """Bottom-up rewrite; ``fn`` returns a replacement or None to keep."""
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            nv = transform(v, fn)
            if nv is not v:
                changes[f.name] = nv
    if changes:
        node = dataclasses.replace(node, **changes)
    out = fn(node)
    return node if out is None else out


def walk(node: Node) -> Iterator[Node]:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


# convenience constructors


def conj(*parts: Formula) -> Formula:
    parts = [p for p in parts if not isinstance(p, Top)]
    if not parts:
        return Top()
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disj(*parts: Formula) -> Formula:
    parts = [p for p in parts if not isinstance(p, Bottom)]
    if not parts:
        return Bottom()
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def exists(vars_: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(vars_)):
        body = Exists(v, body)
    return body


def forall(vars_: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(vars_)):
        body = Forall(v, body)
    return body


def eq_tuple(xs: Iterable[str], ys: Iterable[str]) -> Formula:
    xs, ys = tuple(xs), tuple(ys)
    if len(xs) != len(ys):
        raise ArityError("tuple equality needs equal lengths")
    return conj(*(Eq(a, b) for a, b in zip(xs, ys)))


def add_terms(terms: list) -> Term:
    if not terms:
        return ZERO
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = Add(t, out)
    return out


def implies(a: Formula, b: Formula) -> Formula:
    """The team-logic shorthand a -> b := dual(a) | (a & b) for first-order ``a``."""
    return Or(dual(a), And(a, b))


def iff(a: Formula, b: Formula) -> Formula:
    """Biconditional of two first-order formulas."""
    return Or(And(a, b), And(dual(a), dual(b)))


def split_conjuncts(phi: Formula) -> list:
    if isinstance(phi, And):
        return split_conjuncts(phi.left) + split_conjuncts(phi.right)
    if isinstance(phi, Top):
        return []
    return [phi]


# free variables and symbols


def _args_vars(args) -> set:
    return {a for a in args if not is_const(a)}


def free_vars(node: Node) -> frozenset:
    if isinstance(node, (Eq, Neq)):
        return frozenset(_args_vars((node.left, node.right)))
    if isinstance(node, (Rel, Apply)):
        return frozenset(_args_vars(node.args))
    if isinstance(node, (MarginalIdentity, Inclusion, Equiextension)):
        return frozenset(_args_vars(node.lhs + node.rhs))
    if isinstance(node, Dependence):
        return frozenset(_args_vars(node.args + (node.target,)))
    if isinstance(node, ProbIndependence):
        return frozenset(_args_vars(node.left + node.right + node.given))
    if isinstance(node, (Exists, Forall)):
        return free_vars(node.body) - {node.var}
    if isinstance(node, Sum):
        return free_vars(node.body) - set(node.vars)
    out = set()
    for c in children(node):
        out |= free_vars(c)
    return frozenset(out)


def free_fns(node: Node) -> frozenset:
    if isinstance(node, Apply):
        return frozenset({node.name})
    if isinstance(node, FnExists):
        return free_fns(node.body) - {node.name}
    out = set()
    for c in children(node):
        out |= free_fns(c)
    return frozenset(out)


def fn_arities(node: Node) -> dict:
    """Arity of every function name applied in ``node`` (bound or free)."""
    out = {}
    for n in walk(node):
        if isinstance(n, Apply):
            if out.setdefault(n.name, len(n.args)) != len(n.args):
                raise ArityError(f"function {n.name} used with arities {out[n.name]} and {len(n.args)}")
        elif isinstance(n, FnExists):
            if out.setdefault(n.name, n.arity) != n.arity:
                raise ArityError(f"function {n.name} declared with arity {n.arity}, used with {out[n.name]}")
    return out


def all_names(node: Node) -> set:
    """Every variable, function and relation name occurring anywhere."""
    out = set()
    for n in walk(node):
        if isinstance(n, (Eq, Neq)):
            out |= {n.left, n.right}
        elif isinstance(n, Rel):
            out |= set(n.args) | {n.name}
        elif isinstance(n, Apply):
            out |= set(n.args) | {n.name}
        elif isinstance(n, (Exists, Forall)):
            out.add(n.var)
        elif isinstance(n, Sum):
            out |= set(n.vars)
        elif isinstance(n, FnExists):
            out.add(n.name)
        elif isinstance(n, TEAM_ATOMS):
            out |= free_vars(n)
    return {a for a in out if not is_const(a)}


def has_dummy_sum(node: Node) -> bool:
    """True iff some SUM binds a variable that does not occur free in its body."""
    for n in walk(node):
        if isinstance(n, Sum) and not set(n.vars) <= free_vars(n.body):
            return True
    return False


def has_terms(node: Node) -> bool:
    return any(isinstance(n, Term) for n in walk(node))


def is_first_order(node: Node) -> bool:
    return all(isinstance(n, FO_LITERALS + (And, Or, Exists, Forall, Not)) for n in walk(node))


def team_atoms(node: Node) -> list:
    return [n for n in walk(node) if isinstance(n, TEAM_ATOMS)]


# negation normal form


def to_nnf(phi: Formula) -> Formula:
    """Push every Not to the atoms of a first-order formula."""
    if not is_first_order(phi):
        raise NotFirstOrder("negation normal form is only defined for first-order formulas")
    return _nnf(phi, False)


def _nnf(phi: Formula, neg: bool) -> Formula:
    if isinstance(phi, Not):
        return _nnf(phi.body, not neg)
    if isinstance(phi, Eq):
        return Neq(phi.left, phi.right) if neg else phi
    if isinstance(phi, Neq):
        return Eq(phi.left, phi.right) if neg else phi
    if isinstance(phi, Rel):
        return Rel(phi.name, phi.args, phi.negated != neg) if neg else phi
    if isinstance(phi, Top):
        return Bottom() if neg else phi
    if isinstance(phi, Bottom):
        return Top() if neg else phi
    if isinstance(phi, And):
        l, r = _nnf(phi.left, neg), _nnf(phi.right, neg)
        return Or(l, r) if neg else And(l, r)
    if isinstance(phi, Or):
        l, r = _nnf(phi.left, neg), _nnf(phi.right, neg)
        return And(l, r) if neg else Or(l, r)
    if isinstance(phi, Exists):
        b = _nnf(phi.body, neg)
        return Forall(phi.var, b) if neg else Exists(phi.var, b)
    if isinstance(phi, Forall):
        b = _nnf(phi.body, neg)
        return Exists(phi.var, b) if neg else Forall(phi.var, b)
    raise NotFirstOrder(f"unexpected node {type(phi).__name__}")


def dual(phi: Formula) -> Formula:
    """Negation normal form of the negation of a first-order formula."""
    return to_nnf(Not(phi))


# classification


QUANT_SYMBOL = {"Ef": "∃̈", "E": "∃", "A": "∀"}


@dataclass(frozen=True)
class Classification:
    is_loose: bool
    is_almost_conjunctive: bool
    prefix: tuple | None

    @property
    def prefix_class(self) -> str | None:
        if self.prefix is None:
            return None
        return "".join(QUANT_SYMBOL[q] for q in self.prefix)


def quantifier_prefix(phi: Formula) -> tuple[list, Formula]:
    """Split off the leading block of quantifiers."""
    prefix = []
    while isinstance(phi, (Exists, Forall, FnExists)):
        prefix.append(phi)
        phi = phi.body
    return prefix, phi


def is_quantifier_free(phi: Formula) -> bool:
    return not any(isinstance(n, (Exists, Forall, FnExists)) for n in walk(phi))


def prefix_word(phi: Formula) -> tuple | None:
    prefix, body = quantifier_prefix(phi)
    if not is_quantifier_free(body):
        return None
    word = []
    for q in prefix:
        word.append("Ef" if isinstance(q, FnExists) else "E" if isinstance(q, Exists) else "A")
    return tuple(word)


def in_prefix_class(word: tuple | None, pattern: str) -> bool:
    """Match a prefix word against a pattern like ``'Ef* E* A*'``."""
    if word is None:
        return False
    regex = ""
    for part in pattern.split():
        star = part.endswith("*")
        sym = part.rstrip("*")
        regex += f"(?:{sym} )" + ("*" if star else "")
    return re.fullmatch(regex, "".join(w + " " for w in word)) is not None


def is_loose(phi: Formula) -> bool:
    return not any(isinstance(n, NotLe) for n in walk(phi))


def is_almost_conjunctive(phi: Formula) -> bool:
    for n in walk(phi):
        if isinstance(n, Or) and has_terms(n.left) and has_terms(n.right):
            return False
    return True


def classify(phi: Formula) -> Classification:
    return Classification(is_loose(phi), is_almost_conjunctive(phi), prefix_word(phi))


# renaming


class FreshNames:
    """Generator of names that avoid a growing set of used names."""

    def __init__(self, used: Iterable[str] = ()):
        self.used = set(used)
        self.issued: list[str] = []

    def __call__(self, base: str = "v") -> str:
        base = base.rstrip("0123456789_") or "v"
        i = 1
        while f"{base}{i}" in self.used:
            i += 1
        name = f"{base}{i}"
        self.used.add(name)
        self.issued.append(name)
        return name

    def reserve(self, names: Iterable[str]) -> None:
        self.used |= set(names)


def rename_args(args: tuple, mapping: dict) -> tuple:
    return tuple(mapping.get(a, a) for a in args)


def substitute(node: Node, mapping: dict) -> Node:
    """Replace free first-order variables; bound names must not clash with targets."""
    if not mapping:
        return node
    if isinstance(node, Eq):
        return Eq(mapping.get(node.left, node.left), mapping.get(node.right, node.right))
    if isinstance(node, Neq):
        return Neq(mapping.get(node.left, node.left), mapping.get(node.right, node.right))
    if isinstance(node, Rel):
        return Rel(node.name, rename_args(node.args, mapping), node.negated)
    if isinstance(node, Apply):
        return Apply(node.name, rename_args(node.args, mapping))
    if isinstance(node, (MarginalIdentity, Inclusion, Equiextension)):
        return type(node)(rename_args(node.lhs, mapping), rename_args(node.rhs, mapping))
    if isinstance(node, Dependence):
        return Dependence(rename_args(node.args, mapping), mapping.get(node.target, node.target))
    if isinstance(node, ProbIndependence):
        return ProbIndependence(
            rename_args(node.left, mapping), rename_args(node.right, mapping), rename_args(node.given, mapping)
        )
    if isinstance(node, (Exists, Forall)):
        inner = {k: v for k, v in mapping.items() if k != node.var}
        return type(node)(node.var, substitute(node.body, inner))
    if isinstance(node, Sum):
        inner = {k: v for k, v in mapping.items() if k not in node.vars}
        return Sum(node.vars, substitute(node.body, inner))
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            changes[f.name] = substitute(v, mapping)
    return dataclasses.replace(node, **changes) if changes else node


def alpha_rename(phi: Node, avoid: Iterable[str] = (), fresh: FreshNames | None = None) -> Node:
    """Rename bound variables and bound functions so each is bound exactly once
    and none coincides with a free name or a name in ``avoid``."""
    fresh = fresh or FreshNames()
    fresh.reserve(all_names(phi))
    fresh.reserve(avoid)
    taken = set(free_vars(phi)) | set(free_fns(phi)) | set(avoid)
    return _alpha(phi, {}, {}, taken, fresh)


def _alpha(node, vmap, fmap, taken, fresh):
    if isinstance(node, (Exists, Forall)):
        new = node.var
        if new in taken:
            new = fresh(node.var)
        taken.add(new)
        body = _alpha(node.body, {**vmap, node.var: new}, fmap, taken, fresh)
        return type(node)(new, body, span=node.span)
    if isinstance(node, Sum):
        nvars = []
        inner = dict(vmap)
        for v in node.vars:
            new = v
            if new in taken:
                new = fresh(v)
            taken.add(new)
            inner[v] = new
            nvars.append(new)
        return Sum(tuple(nvars), _alpha(node.body, inner, fmap, taken, fresh), span=node.span)
    if isinstance(node, FnExists):
        new = node.name
        if new in taken:
            new = fresh(node.name)
        taken.add(new)
        body = _alpha(node.body, vmap, {**fmap, node.name: new}, taken, fresh)
        return FnExists(new, node.arity, node.sort, body, span=node.span)
    if isinstance(node, Apply):
        return Apply(fmap.get(node.name, node.name), rename_args(node.args, vmap), span=node.span)
    if not children(node):
        return substitute(node, vmap) if vmap else node
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if isinstance(v, Node):
            changes[f.name] = _alpha(v, vmap, fmap, taken, fresh)
    return dataclasses.replace(node, **changes)


def bound_vars(node: Node) -> list:
    out = []
    for n in walk(node):
        if isinstance(n, (Exists, Forall)):
            out.append(n.var)
        elif isinstance(n, Sum):
            out.extend(n.vars)
    return out


def rewrite_applies(node: Node, fn: Callable[[Apply], Term | None]) -> Node:
    return transform(node, lambda n: fn(n) if isinstance(n, Apply) else None)


# printing


def _vars(xs) -> str:
    return " ".join(xs)


def to_text(node: Node) -> str:
    if isinstance(node, Top):
        return "true"
    if isinstance(node, Bottom):
        return "false"
    if isinstance(node, Eq):
        return f"{node.left} = {node.right}"
    if isinstance(node, Neq):
        return f"{node.left} != {node.right}"
    if isinstance(node, Rel):
        return ("!" if node.negated else "") + f"{node.name}({', '.join(node.args)})"
    if isinstance(node, Not):
        return f"not({to_text(node.body)})"
    if isinstance(node, MarginalIdentity):
        return f"approx({_vars(node.lhs)}; {_vars(node.rhs)})"
    if isinstance(node, Inclusion):
        return f"incl({_vars(node.lhs)}; {_vars(node.rhs)})"
    if isinstance(node, Equiextension):
        return f"equi({_vars(node.lhs)}; {_vars(node.rhs)})"
    if isinstance(node, Dependence):
        return f"dep({_vars(node.args)}; {node.target})"
    if isinstance(node, ProbIndependence):
        return f"pind({_vars(node.left)}; {_vars(node.right)} | {_vars(node.given)})"
    if isinstance(node, And):
        return f"({to_text(node.left)} & {to_text(node.right)})"
    if isinstance(node, Or):
        return f"({to_text(node.left)} | {to_text(node.right)})"
    if isinstance(node, Exists):
        return f"E {node.var} {to_text(node.body)}"
    if isinstance(node, Forall):
        return f"A {node.var} {to_text(node.body)}"
    if isinstance(node, FnExists):
        return f"Ef {node.name}/{node.arity}:{node.sort} {to_text(node.body)}"
    if isinstance(node, Const):
        v = node.value
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(node, Apply):
        return f"{node.name}({', '.join(node.args)})"
    if isinstance(node, Add):
        return f"({to_text(node.left)} + {to_text(node.right)})"
    if isinstance(node, Sum):
        return f"sum{{{_vars(node.vars)}}} {to_text(node.body)}"
    if isinstance(node, NumEq):
        return f"{to_text(node.left)} = {to_text(node.right)}"
    if isinstance(node, NumLe):
        return f"{to_text(node.left)} <= {to_text(node.right)}"
    if isinstance(node, NotLe):
        return f"!({to_text(node.left)} <= {to_text(node.right)})"
    raise TypeError(f"cannot print {type(node).__name__}")


def size(node: Node) -> int:
    return sum(1 for _ in walk(node))


# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>-?\d+(?:/\d+)?)
  | (?P<const>\#\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym><=|!=|[()&|;{}=<!+*,:/~])
    """,
    re.VERBOSE,
)

ATOM_KEYWORDS = {"approx", "incl", "equi", "dep", "pind"}
RESERVED = {"E", "A", "Ef", "sum", "true", "false"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str, eso: bool):
        self.toks = tokenize(text)
        self.i = 0
        self.eso = eso

    # helpers
    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text) -> _Tok:
        t = self.peek()
        if t.text != text:
            if t.text == "*":
                raise UnsupportedOperation("multiplication is not supported", t.line, t.col)
            raise self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def at(self, text, k=0) -> bool:
        return self.peek(k).text == text

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in RESERVED:
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.next()
        return t.text

    def arg(self) -> str:
        t = self.peek()
        if t.kind == "const":
            self.next()
            return t.text
        return self.ident()

    def var_list(self, stops) -> tuple:
        out = []
        while self.peek().text not in stops:
            if self.at(","):
                self.next()
                continue
            out.append(self.arg())
        return tuple(out)

    def span(self, tok):
        return (tok.line, tok.col)

    # grammar
    def parse(self) -> Formula:
        phi = self.formula()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r} after formula")
        return phi

    def formula(self) -> Formula:
        t = self.peek()
        if t.text == "(":
            if self.eso:
                save = self.i
                try:
                    return self.numeric_atom()
                except UnsupportedOperation:
                    raise
                except ParseError:
                    self.i = save
            return self.paren_formula()
        if t.kind == "ident" and t.text in ("E", "A"):
            self.next()
            var = self.ident()
            body = self.formula()
            cls = Exists if t.text == "E" else Forall
            return cls(var, body, span=self.span(t))
        if t.kind == "ident" and t.text == "Ef":
            if not self.eso:
                raise self.error("function quantifier outside an ESO formula")
            self.next()
            name = self.ident()
            self.expect("/")
            ar = self.next()
            if ar.kind != "num" or "/" in ar.text or ar.text.startswith("-"):
                raise self.error("expected an arity", ar)
            self.expect(":")
            sort = self.next()
            if sort.text not in SORTS:
                raise self.error("range sort must be R, U or D", sort)
            body = self.formula()
            return FnExists(name, int(ar.text), sort.text, body, span=self.span(t))
        if t.kind == "ident" and t.text in ("true", "false"):
            self.next()
            return (Top if t.text == "true" else Bottom)(span=self.span(t))
        if t.text == "!":
            self.next()
            if self.at("("):
                if not self.eso:
                    raise self.error("negation is only allowed before relation symbols")
                self.expect("(")
                left = self.term()
                self.expect("<=")
                right = self.term()
                self.expect(")")
                return NotLe(left, right, span=self.span(t))
            name = self.ident()
            self.expect("(")
            args = self.var_list({")"})
            self.expect(")")
            return Rel(name, args, True, span=self.span(t))
        if t.kind == "ident" and t.text in ATOM_KEYWORDS and self.at("(", 1):
            return self.team_atom()
        if t.kind == "ident" and t.text == "sum" or t.kind == "num":
            if not self.eso:
                raise self.error("numerical terms are only allowed in ESO formulas")
            return self.numeric_atom()
        if t.kind in ("ident", "const"):
            if self.at("(", 1) and t.kind == "ident":
                save = self.i
                name = self.ident()
                self.expect("(")
                args = self.var_list({")"})
                self.expect(")")
                if self.eso and self.peek().text in ("=", "<=", "<", "+", "*"):
                    self.i = save
                    return self.numeric_atom()
                return Rel(name, args, span=self.span(t))
            left = self.arg()
            op = self.next()
            if op.text not in ("=", "!="):
                raise self.error(f"expected '=' or '!=' after {left!r}", op)
            right = self.arg()
            if self.at("("):
                raise self.error("numerical term compared with a first-order variable")
            cls = Eq if op.text == "=" else Neq
            return cls(left, right, span=self.span(t))
        raise self.error(f"unexpected {t.text or 'end of input'!r}")

    def paren_formula(self) -> Formula:
        start = self.expect("(")
        parts = [self.formula()]
        op = None
        while self.peek().text in ("&", "|"):
            o = self.next().text
            if op is not None and o != op:
                raise self.error("mixing & and | needs parentheses")
            op = o
            parts.append(self.formula())
        self.expect(")")
        if op is None:
            return parts[0]
        cls = And if op == "&" else Or
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = cls(p, out, span=self.span(start))
        return out

    def numeric_atom(self) -> Formula:
        start = self.peek()
        left = self.term()
        op = self.next()
        if op.text == "*":
            raise UnsupportedOperation("multiplication is not supported", op.line, op.col)
        if op.text not in ("=", "<=", "<"):
            raise self.error("expected a comparison between terms", op)
        right = self.term()
        if op.text == "=":
            return NumEq(left, right, span=self.span(start))
        if op.text == "<=":
            return NumLe(left, right, span=self.span(start))
        return NotLe(right, left, span=self.span(start))

    def term(self) -> Term:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return Const(Fraction(t.text), span=self.span(t))
        if t.kind == "ident" and t.text == "sum":
            self.next()
            self.expect("{")
            vars_ = self.var_list({"}"})
            self.expect("}")
            body = self.term()
            return Sum(vars_, body, span=self.span(t))
        if t.text == "(":
            self.next()
            parts = [self.term()]
            while self.at("+") or self.at("*"):
                o = self.next()
                if o.text == "*":
                    raise UnsupportedOperation("multiplication is not supported", o.line, o.col)
                parts.append(self.term())
            self.expect(")")
            if len(parts) == 1:
                return parts[0]
            return add_terms(parts)
        if t.kind == "ident" and self.at("(", 1):
            name = self.ident()
            self.expect("(")
            args = self.var_list({")"})
            self.expect(")")
            if self.at("*"):
                o = self.peek()
                raise UnsupportedOperation("multiplication is not supported", o.line, o.col)
            return Apply(name, args, span=self.span(t))
        raise self.error(f"expected a numerical term, found {t.text or 'end of input'!r}")

    def team_atom(self) -> Formula:
        t = self.next()
        kw = t.text
        self.expect("(")
        if kw == "dep":
            args = self.var_list({";", ")"})
            if self.at(")"):
                if not args:
                    raise self.error("dep needs a target variable")
                self.next()
                return Dependence(args[:-1], args[-1], span=self.span(t))
            self.expect(";")
            target = self.var_list({")"})
            self.expect(")")
            if len(target) != 1:
                raise self.error("dep has exactly one target variable")
            return Dependence(args, target[0], span=self.span(t))
        if kw == "pind":
            left = self.var_list({";"})
            self.expect(";")
            right = self.var_list({"|", ")"})
            given = ()
            if self.at("|"):
                self.next()
                given = self.var_list({")"})
            self.expect(")")
            return ProbIndependence(left, right, given, span=self.span(t))
        lhs = self.var_list({";"})
        self.expect(";")
        rhs = self.var_list({")"})
        self.expect(")")
        cls = {"approx": MarginalIdentity, "incl": Inclusion, "equi": Equiextension}[kw]
        try:
            return cls(lhs, rhs, span=self.span(t))
        except ArityError as exc:
            raise ArityError(f"{exc} (line {t.line}, column {t.col})") from None


def _check_arities(phi: Formula) -> None:
    fn_arities(phi)
    rels = {}
    for n in walk(phi):
        if isinstance(n, Rel) and rels.setdefault(n.name, len(n.args)) != len(n.args):
            raise ArityError(f"relation {n.name} used with arities {rels[n.name]} and {len(n.args)}")
        if isinstance(n, Sum) and len(set(n.vars)) != len(n.vars):
            raise ArityError(f"repeated bound variable in sum{{{' '.join(n.vars)}}}")


def parse_team_formula(text: str) -> Formula:
    phi = _Parser(text, eso=False).parse()
    _check_arities(phi)
    return phi


def parse_eso_formula(text: str) -> Formula:
    phi = _Parser(text, eso=True).parse()
    _check_arities(phi)
    names = [n.name for n in walk(phi) if isinstance(n, FnExists)]
    if len(names) != len(set(names)):
        raise ParseError("function variables must be quantified at most once")
    return phi


def parse_formula(text: str) -> Formula:
    """Parse as a team formula, falling back to the ESO grammar."""
    try:
        return parse_team_formula(text)
    except UnsupportedOperation:
        raise
    except ParseError:
        return parse_eso_formula(text)


def is_team_formula(phi: Formula) -> bool:
    return not any(isinstance(n, (Term, FnExists) + NUM_ATOMS) for n in walk(phi))


def assignments(vars_: list, domain) -> Iterator[dict]:
    for values in itertools.product(domain, repeat=len(vars_)):
        yield dict(zip(vars_, values))
