"""Joining surprisal onto trials and preparing regression columns."""

import math
from dataclasses import dataclass, field

from ..engines.surprisal import SurprisalRecord
from .recipes import DatasetRecipe
from .trials import TrialRow


class JoinError(ValueError):
    pass


class TransformError(ValueError):
    pass


@dataclass
class AnalysisTable:
    """Trials with surprisal attached, ready for design assembly."""

    rows: list[TrialRow]
    surprisal: list[float]              # nats, aligned with rows
    recipe: DatasetRecipe
    engine: str
    provenance: dict = field(default_factory=dict)
    transformed: bool = False

    def columns(self) -> dict[str, list]:
        """Column view consumed by build_design."""
        out: dict[str, list] = {
            "response": [r.response for r in self.rows],
            "surprisal": list(self.surprisal),
            "subject": [r.subject for r in self.rows],
            "item": [r.item for r in self.rows],
        }
        if self.rows:
            for name in self.rows[0].covariates:
                out[name] = [r.covariates[name] for r in self.rows]
            for name in self.rows[0].grouping:
                out[name] = [r.grouping[name] for r in self.rows]
        return out


def attach_surprisal(rows: list[TrialRow], records: list[SurprisalRecord],
                     recipe: DatasetRecipe, engine: str) -> AnalysisTable:
    """Exact-key join on (item, word_index); every row must match once."""
    table: dict[tuple[str, int], float] = {}
    for rec in records:
        key = (rec.item_id, rec.word_index)
        if key in table:
            raise JoinError(f"duplicate surprisal key {key}")
        table[key] = rec.surprisal
    missing = sorted({(r.item, r.word_index) for r in rows
                      if (r.item, r.word_index) not in table})
    if missing:
        shown = ", ".join(f"({i}, {w})" for i, w in missing)
        raise JoinError(f"no surprisal record for: {shown}")
    values = [table[(r.item, r.word_index)] for r in rows]
    return AnalysisTable(rows=list(rows), surprisal=values, recipe=recipe,
                         engine=engine)


def transform_response(table: AnalysisTable) -> AnalysisTable:
    """Apply the recipe's response transform; identity passes through."""
    if table.recipe.response_transform == "identity":
        return AnalysisTable(table.rows, table.surprisal, table.recipe,
                             table.engine, dict(table.provenance), True)
    out_rows = []
    for row in table.rows:
        if row.response <= 0:
            raise TransformError(
                f"non-positive response {row.response} under natural-log "
                f"transform (subject {row.subject}, item {row.item})")
        out_rows.append(TrialRow(
            subject=row.subject, item=row.item, word_index=row.word_index,
            response=math.log(row.response),
            covariates=dict(row.covariates), grouping=dict(row.grouping),
            flags=dict(row.flags)))
    return AnalysisTable(out_rows, list(table.surprisal), table.recipe,
                         table.engine, dict(table.provenance), True)
