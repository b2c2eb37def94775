"""Model checking and inference for probabilistic team semantics via exact linear programming."""

__version__ = "0.1.0"

from .core import Structure, WeightedTeam, WeightFunction
from .pipeline import Budget, CheckReport, CheckRequest, check, check_formula, check_inc_sentence
from .syntax import parse_eso_formula, parse_formula, parse_team_formula, to_text

__all__ = [
    "Budget",
    "CheckReport",
    "CheckRequest",
    "Structure",
    "WeightFunction",
    "WeightedTeam",
    "check",
    "check_formula",
    "check_inc_sentence",
    "parse_eso_formula",
    "parse_formula",
    "parse_team_formula",
    "to_text",
]
