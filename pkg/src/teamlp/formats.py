"""Readers and writers for the line-based structure (.tls) and team (.team) files.

Structure file::

    domain a b c
    order a b c
    rel R/2 = (a,b) (b,c)
    fun f/1 = a:1/3 b:2/3 c:0
    fun* d/0 = 1

Team file::

    x y #weight
    a b 1/3
    b a 2/3
"""
from __future__ import annotations

import re
from pathlib import Path

from .core import Structure, WeightFunction, WeightedTeam, format_rational, to_rational
from .errors import FormatError, StructureError

_DECL = re.compile(r"^(rel|fun\*?)\s+([A-Za-z_][\w']*)\s*/\s*(\d+)\s*=(.*)$")


def _strip(line: str) -> str:
    pos = line.find("#")
    return (line if pos < 0 else line[:pos]).strip()


def parse_structure(text: str) -> Structure:
    domain = None
    order = None
    relations = {}
    functions = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        head = line.split(None, 1)[0]
        if head == "domain":
            if domain is not None:
                raise FormatError("duplicate domain line", lineno)
            domain = line.split()[1:]
            if not domain:
                raise FormatError("empty domain", lineno)
            continue
        if head == "order":
            order = line.split()[1:]
            continue
        m = _DECL.match(line)
        if not m:
            raise FormatError(f"cannot parse {line!r}", lineno)
        kind, name, arity, body = m.group(1), m.group(2), int(m.group(3)), m.group(4).strip()
        if name in relations or name in functions:
            raise FormatError(f"duplicate symbol {name}", lineno)
        if kind == "rel":
            relations[name] = (arity, _parse_tuples(body, arity, lineno))
        else:
            values = _parse_values(body, arity, lineno)
            functions[name] = WeightFunction(name, arity, values, kind == "fun*")
    if domain is None:
        raise FormatError("missing domain line")
    try:
        return Structure(tuple(domain), relations, functions, tuple(order) if order else None)
    except StructureError as exc:
        raise FormatError(str(exc)) from None


def _parse_tuples(body: str, arity: int, lineno: int) -> set:
    tuples = set()
    if arity == 0:
        if body.replace(" ", "") in ("()",):
            tuples.add(())
        elif body:
            raise FormatError("nullary relation body must be () or empty", lineno)
        return tuples
    for group in re.findall(r"\(([^)]*)\)", body):
        items = tuple(p.strip() for p in re.split(r"[,\s]+", group.strip()) if p.strip())
        if len(items) != arity:
            raise FormatError(f"tuple ({group}) has wrong arity", lineno)
        tuples.add(items)
    leftover = re.sub(r"\([^)]*\)", "", body).strip()
    if leftover:
        if arity == 1:
            tuples.update((p,) for p in leftover.split())
        else:
            raise FormatError(f"unexpected text {leftover!r}", lineno)
    return tuples


def _parse_values(body: str, arity: int, lineno: int) -> dict:
    values = {}
    for token in body.split():
        if ":" in token:
            key, val = token.rsplit(":", 1)
        elif arity == 0:
            key, val = "", token
        else:
            raise FormatError(f"entry {token!r} lacks ':'", lineno)
        key = key.strip("()")
        args = tuple(p for p in key.split(",") if p) if key else ()
        if len(args) != arity:
            raise FormatError(f"entry {token!r} has wrong arity", lineno)
        try:
            values[args] = to_rational(val)
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
    return values


def format_structure(structure: Structure) -> str:
    lines = ["domain " + " ".join(structure.domain)]
    for name, (arity, tuples) in structure.relations.items():
        if arity == 0:
            body = "()" if tuples else ""
        else:
            body = " ".join("(" + ",".join(t) + ")" for t in sorted(tuples, key=_key(structure)))
        lines.append(f"rel {name}/{arity} = {body}".rstrip())
    for name, fn in structure.functions.items():
        kw = "fun*" if fn.distribution else "fun"
        entries = []
        for args in sorted(fn.values, key=_key(structure)):
            val = format_rational(fn.values[args])
            entries.append(val if not args else ",".join(args) + ":" + val)
        lines.append(f"{kw} {name}/{fn.arity} = " + " ".join(entries))
    return "\n".join(lines) + "\n"


def _key(structure):
    pos = {a: i for i, a in enumerate(structure.domain)}
    return lambda t: tuple(pos[a] for a in t)


def parse_team(text: str) -> WeightedTeam:
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped:
            continue
        if header is None:
            if "#weight" not in stripped:
                if stripped.startswith("#"):
                    continue
                raise FormatError("team header must end with #weight", lineno)
            names = stripped.split("#weight", 1)[0].split()
            header = tuple(names)
            continue
        line = _strip(raw)
        if not line:
            continue
        parts = line.split()
        if len(parts) != len(header) + 1:
            raise FormatError(f"expected {len(header)} values and a weight", lineno)
        try:
            w = to_rational(parts[-1])
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if w < 0:
            raise FormatError("negative weight", lineno)
        rows.append((tuple(parts[:-1]), w))
    if header is None:
        raise FormatError("missing team header")
    try:
        return WeightedTeam(header, rows)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def format_team(team: WeightedTeam) -> str:
    head = " ".join(team.variables)
    lines = [(head + " #weight").strip()]
    for key, w in sorted(team.items()):
        lines.append(" ".join(list(key) + [format_rational(w)]))
    return "\n".join(lines) + "\n"


def load_structure(path) -> Structure:
    return parse_structure(Path(path).read_text(encoding="utf-8"))


def load_team(path) -> WeightedTeam:
    return parse_team(Path(path).read_text(encoding="utf-8"))


def save_team(team: WeightedTeam, path) -> None:
    Path(path).write_text(format_team(team), encoding="utf-8")


def save_structure(structure: Structure, path) -> None:
    Path(path).write_text(format_structure(structure), encoding="utf-8")
