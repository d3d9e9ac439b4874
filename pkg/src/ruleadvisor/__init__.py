"""Rule-based AI advisors that decide when advice to a human is worth giving."""

__version__ = "0.1.0"

from .advisor import Advice, Advisor, CostSpec, decision_loss, expected_team_loss, psi  # noqa: E402
from .rules import Rule, RuleSet  # noqa: E402
from .trainer import TrainerConfig, anneal  # noqa: E402

__all__ = ["Advice", "Advisor", "CostSpec", "Rule", "RuleSet", "TrainerConfig", "anneal",
           "decision_loss", "expected_team_loss", "psi", "__version__"]
