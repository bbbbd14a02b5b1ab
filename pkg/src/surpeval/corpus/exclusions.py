"""Declarative exclusion filtering with per-rule counts.

All thresholds are strict inequalities, so a 100 ms response survives a
``response_below(100)`` rule and a 5000 ms response survives
``response_above(5000)``. Subject-score rules remove every row of a
subject whose score falls strictly below the threshold.
"""

from dataclasses import dataclass

from .recipes import DatasetRecipe, ExclusionRule
from .trials import TrialRow


class ExclusionError(ValueError):
    pass


@dataclass
class ExclusionReport:
    total: int
    retained: int
    counts: dict[str, int]              # rule label -> rows failing it


def _rule_fails(rule: ExclusionRule, row: TrialRow) -> bool:
    if rule.kind == "response_below":
        return row.response < rule.threshold
    if rule.kind == "response_above":
        return row.response > rule.threshold
    if rule.kind in ("flagged", "unflagged", "subject_score_below"):
        if rule.column not in row.flags:
            raise ExclusionError(
                f"rule {rule.label()} references absent flag {rule.column!r}")
        value = row.flags[rule.column]
        if rule.kind == "flagged":
            return value != 0
        if rule.kind == "unflagged":
            return value == 0
        return value < rule.threshold
    if rule.kind == "covariate_above":
        if rule.column not in row.covariates:
            raise ExclusionError(
                f"rule {rule.label()} references absent column {rule.column!r}")
        return row.covariates[rule.column] > rule.threshold
    raise ExclusionError(f"unknown rule kind {rule.kind!r}")


def apply_exclusions(rows: list[TrialRow], recipe: DatasetRecipe
                     ) -> tuple[list[TrialRow], ExclusionReport]:
    """Rows failing no rule, plus how many rows each rule removed."""
    counts = {rule.label(): 0 for rule in recipe.exclusions}
    kept: list[TrialRow] = []
    for row in rows:
        ok = True
        for rule in recipe.exclusions:
            if _rule_fails(rule, row):
                counts[rule.label()] += 1
                ok = False
        if ok:
            kept.append(row)
    return kept, ExclusionReport(len(rows), len(kept), counts)
