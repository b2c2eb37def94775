"""Command-line front end.

Each subcommand builds the matching request model from ``teamlp.api`` and runs
it in-process, or posts it to a running service when ``--remote URL`` is given.
Exit codes: 0 true/derivable, 1 false/not derivable, 2 usage or parse error,
3 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

from . import api

FORMULA_COMMANDS = ("check", "sentence", "translate", "lp-export", "eval-atom", "eval-team")


class UsageError(Exception):
    pass


def _read(path: str | None, what: str) -> str | None:
    if path is None:
        return None
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {what} file {path}: {e.strerror}") from None


def _need(args, name: str, what: str) -> str:
    text = _read(getattr(args, name), what)
    if text is None:
        raise UsageError(f"{args.command} needs --{name}")
    return text


def _formula(args) -> str:
    if args.formula is not None and args.formula_file is not None:
        raise UsageError("give --formula or --formula-file, not both")
    if args.formula_file is not None:
        return _read(args.formula_file, "formula").strip()
    if args.formula is None:
        raise UsageError(f"{args.command} needs --formula or --formula-file")
    return args.formula


def _budget(args) -> api.BudgetIn:
    return api.BudgetIn(nodes=args.budget, seconds=args.budget_seconds)


def build_request(args):
    c = args.command
    if c == "check":
        return api.CheckIn(
            structure=_need(args, "structure", "structure"),
            team=_read(args.team, "team"),
            formula=_formula(args),
            engine=args.engine,
            budget=_budget(args),
            k=args.k,
            dep_mode=args.dep_mode,
            normalize=not args.raw_weights,
            eliminate_constants=args.eliminate_constants,
            jobs=args.jobs,
            trace=args.trace,
        )
    if c == "sentence":
        return api.SentenceIn(
            structure=_need(args, "structure", "structure"),
            formula=_formula(args),
            k=args.k,
            engine=args.engine,
            budget=_budget(args),
            trace=args.trace,
        )
    if c == "translate":
        return api.TranslateIn(
            formula=_formula(args),
            target=args.target,
            variables=args.vars.split() if args.vars is not None else None,
            fn=args.fn,
            k=args.k,
            dep_mode=args.dep_mode,
            eliminate_constants=args.eliminate_constants,
            tight_sorts=args.tight_sorts,
            pure=args.pure,
            trace=args.trace,
        )
    if c == "lp-export":
        return api.LpExportIn(
            structure=_need(args, "structure", "structure"), formula=_formula(args), team=_read(args.team, "team")
        )
    if c == "implies":
        return api.ImpliesIn(
            premises=args.premises, goal=args.goal, full_index=args.full_index, symmetry=not args.no_symmetry
        )
    if c == "eval-atom":
        return api.EvalAtomIn(
            team=_need(args, "team", "team"), formula=_formula(args), structure=_read(args.structure, "structure")
        )
    if c == "eval-team":
        return api.EvalTeamIn(
            structure=_need(args, "structure", "structure"), team=_need(args, "team", "team"), formula=_formula(args)
        )
    raise UsageError(f"unknown command {c}")


def _remote(url: str, command: str, req) -> api.Outcome:
    import httpx

    try:
        r = httpx.post(f"{url.rstrip('/')}/{command}", json=req.model_dump(), timeout=None)
    except httpx.HTTPError as e:
        raise UsageError(f"cannot reach {url}: {e}") from None
    if r.status_code != 200:
        raise UsageError(f"service answered {r.status_code}: {r.text[:200]}")
    return api.Outcome.model_validate(r.json())


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teamlp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"teamlp {_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the machine-readable report")
    common.add_argument("--remote", metavar="URL", help="send the request to a running teamlp service")
    common.add_argument("--seed", type=int, default=0, help="seed for any randomized choices")
    common.add_argument("--out", metavar="PATH", help="write the main artifact here")

    def formula_flags(sp):
        sp.add_argument("--formula", help="formula text")
        sp.add_argument("--formula-file", metavar="PATH", help="read the formula from a file")

    def solve_flags(sp):
        sp.add_argument("--structure", metavar="PATH", help=".tls structure file")
        sp.add_argument("--engine", choices=api.ENGINES, default="simplex")
        sp.add_argument("--budget", type=int, default=20000, help="search node budget")
        sp.add_argument("--budget-seconds", type=float, default=None, help="search time budget")
        sp.add_argument("--k", type=int, default=None, help="override k of the equiextension translation")
        sp.add_argument("--trace", action="store_true", help="print the translation trace")

    sp = sub.add_parser("check", parents=[common], help="model check a formula on a structure and team")
    formula_flags(sp)
    solve_flags(sp)
    sp.add_argument("--team", metavar="PATH", help=".team file (omit for sentences)")
    sp.add_argument("--dep-mode", choices=("clause", "sum"), default="clause")
    sp.add_argument("--raw-weights", action="store_true", help="do not normalize the team to total weight 1")
    sp.add_argument("--eliminate-constants", action="store_true")
    sp.add_argument("--jobs", type=int, default=1, help="solve family members in parallel")

    sp = sub.add_parser("sentence", parents=[common], help="decide a team-logic sentence (equiextension atoms included)")
    formula_flags(sp)
    solve_flags(sp)

    sp = sub.add_parser("translate", parents=[common], help="run one translation and print the result")
    formula_flags(sp)
    sp.add_argument("--target", choices=api.TranslateIn.model_fields["target"].annotation.__args__, default="eso")
    sp.add_argument("--vars", help="team variables, space separated")
    sp.add_argument("--fn", default="f", help="name of the team function")
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--dep-mode", choices=("clause", "sum"), default="clause")
    sp.add_argument("--eliminate-constants", action="store_true")
    sp.add_argument("--tight-sorts", action="store_true")
    sp.add_argument("--pure", action="store_true", help="remove the constants 0 and 1 when scaling")
    sp.add_argument("--trace", action="store_true")

    sp = sub.add_parser("lp-export", parents=[common], help="ground an ESO sentence and write the .lin family")
    formula_flags(sp)
    sp.add_argument("--structure", metavar="PATH")
    sp.add_argument("--team", metavar="PATH", help="bind the free function f to this team")

    sp = sub.add_parser("implies", parents=[common], help="decide implication between marginal identity atoms")
    sp.add_argument("--premises", default="", help="';'-separated atoms such as 'x y ~ u v'")
    sp.add_argument("--goal", required=True)
    sp.add_argument("--full-index", action="store_true", help="use every index set in the chase")
    sp.add_argument("--no-symmetry", action="store_true", help="drop the symmetry rule")

    sp = sub.add_parser("eval-atom", parents=[common], help="evaluate one team atom directly")
    formula_flags(sp)
    sp.add_argument("--team", metavar="PATH")
    sp.add_argument("--structure", metavar="PATH")

    sp = sub.add_parser("eval-team", parents=[common], help="evaluate a relational formula on a team's support")
    formula_flags(sp)
    sp.add_argument("--team", metavar="PATH")
    sp.add_argument("--structure", metavar="PATH")

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def _version() -> str:
    from . import __version__

    return __version__


def _emit(args, outcome: api.Outcome, out=None) -> None:
    out = out or sys.stdout
    if args.json:
        print(json.dumps(outcome.dump(), indent=2, sort_keys=True), file=out)
    else:
        if outcome.error:
            print(f"error: {outcome.error}", file=sys.stderr)
        if outcome.trace:
            print(outcome.trace, file=out)
        if outcome.text and not (args.out and args.command in ("lp-export", "translate")):
            print(outcome.text, file=out)


def _write_artifacts(args, outcome: api.Outcome) -> None:
    if outcome.exit_code >= api.EXIT_USAGE:
        return
    if args.out and args.command in ("lp-export", "translate"):
        Path(args.out).write_text(outcome.text + ("" if outcome.text.endswith("\n") else "\n"), encoding="utf-8")
    for name, text in outcome.artifacts.items():
        # the counterexample goes to --out when given, else next to the caller
        path = Path(args.out) if args.out and args.command == "implies" else Path(name)
        path.write_text(text, encoding="utf-8")
        outcome.report.setdefault("files", []).append(str(path))
        if not args.json:
            print(f"wrote {path}", file=sys.stderr)


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("teamlp.service:app", host=args.host, port=args.port)
        return 0
    random.seed(args.seed)
    try:
        req = build_request(args)
        outcome = _remote(args.remote, args.command, req) if args.remote else api.dispatch(args.command, req)
    except UsageError as e:
        print(f"teamlp: error: {e}", file=sys.stderr)
        return api.EXIT_USAGE
    except ValueError as e:
        # pydantic validation of a malformed request
        print(f"teamlp: error: {e}", file=sys.stderr)
        return api.EXIT_USAGE
    _write_artifacts(args, outcome)
    _emit(args, outcome)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
