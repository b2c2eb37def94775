"""Request and response models shared by the HTTP service and the CLI.

Every command is a pydantic request model plus a handler that turns it into an
``Outcome``. Inputs are carried as text (structure and team files, formulas) so
the same payloads work in-process and over the wire.
"""
from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from . import axioms, translate
from .errors import BadParameter, BudgetExceeded, ChaseBudget, TeamLPError, TooLarge
from .formats import format_team, parse_structure, parse_team
from .linear import format_lin, reduce_to_lp_family
from .pipeline import ENGINES, Budget, CheckRequest, check
from .semantics import eval_atom, eval_relational_formula
from .syntax import (
    TEAM_ATOMS,
    Equiextension,
    FnExists,
    classify,
    free_vars,
    parse_eso_formula,
    parse_formula,
    parse_team_formula,
    quantifier_prefix,
    to_text,
)

SCHEMA = "teamlp.outcome/1"

EXIT_TRUE, EXIT_FALSE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

Engine = Literal["simplex", "fm", "bruteforce"]


class Outcome(BaseModel):
    schema_: str = Field(SCHEMA, alias="schema")
    command: str
    exit_code: int
    verdict: bool | None = None
    report: dict = Field(default_factory=dict)
    text: str = ""
    trace: str | None = None
    # extra files the caller may write out (name -> contents)
    artifacts: dict[str, str] = Field(default_factory=dict)
    error: str | None = None

    model_config = {"populate_by_name": True}

    def dump(self) -> dict:
        return self.model_dump(by_alias=True)


class BudgetIn(BaseModel):
    nodes: int = 20000
    seconds: float | None = None

    def build(self) -> Budget:
        return Budget(self.nodes, self.seconds)


class CheckIn(BaseModel):
    structure: str
    formula: str
    team: str | None = None
    engine: Engine = "simplex"
    budget: BudgetIn = Field(default_factory=BudgetIn)
    k: int | None = None
    dep_mode: Literal["clause", "sum"] = "clause"
    normalize: bool = True
    eliminate_constants: bool = False
    jobs: int = 1
    trace: bool = False


class SentenceIn(BaseModel):
    structure: str
    formula: str
    k: int | None = None
    engine: Engine = "simplex"
    budget: BudgetIn = Field(default_factory=BudgetIn)
    trace: bool = False


Target = Literal["eso", "prenex", "dummy-sums", "skolem", "scale", "normal-form", "team", "psi-k", "sentence"]


class TranslateIn(BaseModel):
    formula: str
    target: Target = "eso"
    variables: list[str] | None = None
    fn: str = "f"
    k: int | None = None
    dep_mode: Literal["clause", "sum"] = "clause"
    eliminate_constants: bool = False
    tight_sorts: bool = False
    pure: bool = False
    trace: bool = False


class LpExportIn(BaseModel):
    structure: str
    formula: str
    team: str | None = None


class ImpliesIn(BaseModel):
    premises: str = ""
    goal: str
    full_index: bool = False
    symmetry: bool = True


class EvalAtomIn(BaseModel):
    team: str
    formula: str
    structure: str | None = None


class EvalTeamIn(BaseModel):
    structure: str
    team: str
    formula: str


def _verdict(command, verdict: bool, **kw) -> Outcome:
    return Outcome(command=command, exit_code=EXIT_TRUE if verdict else EXIT_FALSE, verdict=verdict, **kw)


def run_check(req: CheckIn) -> Outcome:
    structure = parse_structure(req.structure)
    team = parse_team(req.team) if req.team is not None else None
    phi = parse_formula(req.formula)
    trace = translate.TranslationTrace() if req.trace else None
    report = check(
        CheckRequest(
            structure,
            phi,
            team,
            engine=req.engine,
            budget=req.budget.build(),
            normalize=req.normalize,
            dep_mode=req.dep_mode,
            eliminate_constants=req.eliminate_constants,
            k=req.k,
            jobs=req.jobs,
            trace=trace,
        )
    )
    return _verdict(
        "check",
        report.verdict,
        report=report.to_json(),
        text=f"{'true' if report.verdict else 'false'} ({report.route})",
        trace=trace.format() if trace else None,
    )


def run_sentence(req: SentenceIn) -> Outcome:
    structure = parse_structure(req.structure)
    phi = parse_formula(req.formula)
    if free_vars(phi):
        raise BadParameter(f"not a sentence: free variables {sorted(free_vars(phi))}")
    trace = translate.TranslationTrace() if req.trace else None
    report = check(CheckRequest(structure, phi, None, engine=req.engine, budget=req.budget.build(), k=req.k, trace=trace))
    return _verdict(
        "sentence",
        report.verdict,
        report=report.to_json(),
        text=f"{'true' if report.verdict else 'false'} ({report.route})",
        trace=trace.format() if trace else None,
    )


def run_translate(req: TranslateIn) -> Outcome:
    trace = translate.TranslationTrace() if req.trace else None
    t = req.target
    if t in ("eso", "normal-form", "psi-k", "sentence"):
        phi = parse_team_formula(req.formula)
    elif t == "team" or req.formula.lstrip().startswith("Ef"):
        phi = parse_eso_formula(req.formula)
    else:
        phi = parse_formula(req.formula)
    variables = tuple(req.variables) if req.variables is not None else tuple(sorted(free_vars(phi)))
    if t in ("eso", "normal-form"):
        out = translate.team_to_eso(
            phi,
            variables,
            fn=req.fn,
            dep_mode=req.dep_mode,
            eliminate_constants=req.eliminate_constants,
            tight_sorts=req.tight_sorts or t == "normal-form",
            trace=trace,
        )
        if t == "normal-form":
            out = translate.prenex(translate.eliminate_dummy_sums(out, trace=trace), trace=trace)
            if any(isinstance(q, FnExists) and q.sort != "D" for q in quantifier_prefix(out)[0]):
                out = translate.scale_to_distributions(out, pure=req.pure, bound_rows=False, trace=trace)
            out = translate.skolem_normal_form(out, trace=trace)
    elif t == "prenex":
        out = translate.prenex(phi, trace=trace)
    elif t == "dummy-sums":
        out = translate.eliminate_dummy_sums(phi, trace=trace)
    elif t == "skolem":
        out = translate.skolem_normal_form(phi, trace=trace)
    elif t == "scale":
        out = translate.scale_to_distributions(phi, pure=req.pure, trace=trace)
    elif t == "team":
        out = translate.eso_to_team(phi, req.fn, req.variables, trace=trace)
    elif t == "psi-k":
        if not isinstance(phi, Equiextension):
            raise BadParameter("psi-k expects a single equiextension atom")
        if req.k is None:
            raise BadParameter("psi-k needs --k")
        out = translate.psi_k(phi, req.k)
    else:
        out = translate.sentence_inc_to_prob(phi, req.k, trace=trace)
    c = classify(out)
    report = {
        "target": t,
        "loose": c.is_loose,
        "almost_conjunctive": c.is_almost_conjunctive,
        "prefix": c.prefix_class,
    }
    return Outcome(command="translate", exit_code=EXIT_TRUE, report=report, text=to_text(out),
                   trace=trace.format() if trace else None)


def run_lp_export(req: LpExportIn) -> Outcome:
    from .core import WeightFunction
    from .pipeline import _team_values, _to_prenex

    structure = parse_structure(req.structure)
    phi = parse_eso_formula(req.formula)
    functions = None
    if req.team is not None:
        team = parse_team(req.team)
        functions = {"f": WeightFunction("f", len(team.variables), _team_values(team, structure))}
    family = reduce_to_lp_family(_to_prenex(phi), structure, None, functions)
    report = {"systems": len(family.systems), "pruned": len(family.pruned)}
    return Outcome(command="lp-export", exit_code=EXIT_TRUE, report=report, text=format_lin(family))


def run_implies(req: ImpliesIn) -> Outcome:
    premises = axioms.parse_atoms(req.premises)
    goal = axioms.MarginalIdAtom.parse(req.goal)
    result = axioms.derive(premises, goal, symmetry=req.symmetry, full_index=req.full_index)
    if isinstance(result, axioms.Derivation):
        report = {"implied": True, "derivation": result.to_json()}
        return _verdict("implies", True, report=report, text=str(result))
    report = {"implied": False}
    artifacts = {}
    lines = [f"not implied: {goal}"]
    if result.counterexample is not None:
        team_text = format_team(result.counterexample)
        artifacts["counterexample.team"] = team_text
        report["counterexample"] = team_text
        lines += ["counterexample team:", team_text.rstrip()]
    return _verdict("implies", False, report=report, text="\n".join(lines), artifacts=artifacts)


def run_eval_atom(req: EvalAtomIn) -> Outcome:
    team = parse_team(req.team)
    structure = parse_structure(req.structure) if req.structure is not None else None
    atom = parse_team_formula(req.formula)
    if not isinstance(atom, TEAM_ATOMS):
        raise BadParameter("eval-atom expects a single team atom")
    v = eval_atom(atom, structure, team)
    report = {"holds": v.holds, "witness": None if v.witness is None else str(v.witness)}
    return _verdict("eval-atom", v.holds, report=report, text="true" if v.holds else "false")


def run_eval_team(req: EvalTeamIn) -> Outcome:
    structure = parse_structure(req.structure)
    team = parse_team(req.team)
    phi = parse_team_formula(req.formula)
    v = eval_relational_formula(phi, structure, team)
    return _verdict("eval-team", v, report={"holds": v}, text="true" if v else "false")


HANDLERS = {
    "check": (CheckIn, run_check),
    "sentence": (SentenceIn, run_sentence),
    "translate": (TranslateIn, run_translate),
    "lp-export": (LpExportIn, run_lp_export),
    "implies": (ImpliesIn, run_implies),
    "eval-atom": (EvalAtomIn, run_eval_atom),
    "eval-team": (EvalTeamIn, run_eval_team),
}


def dispatch(command: str, req: BaseModel) -> Outcome:
    """Run a handler, mapping package errors onto exit codes instead of raising."""
    _, handler = HANDLERS[command]
    try:
        return handler(req)
    except (BudgetExceeded, TooLarge, ChaseBudget) as e:
        return Outcome(command=command, exit_code=EXIT_BUDGET, error=f"{type(e).__name__}: {e}")
    except TeamLPError as e:
        return Outcome(command=command, exit_code=EXIT_USAGE, error=f"{type(e).__name__}: {e}")


__all__ = ["ENGINES", "HANDLERS", "Outcome", "dispatch"] + [m.__name__ for m, _ in HANDLERS.values()]
