"""Trial tables: typed CSV loading against a recipe-derived schema."""

import csv
from dataclasses import dataclass, field

from .recipes import DatasetRecipe

BASE_COLUMNS = ("subject", "item", "word_index", "response")


class TrialFileError(ValueError):
    pass


@dataclass
class TrialRow:
    subject: str
    item: str
    word_index: int
    response: float
    covariates: dict[str, float] = field(default_factory=dict)
    grouping: dict[str, str] = field(default_factory=dict)
    flags: dict[str, float] = field(default_factory=dict)

    def column(self, name: str):
        if name == "response":
            return self.response
        if name == "subject":
            return self.subject
        if name == "item":
            return self.item
        if name in self.covariates:
            return self.covariates[name]
        if name in self.grouping:
            return self.grouping[name]
        if name in self.flags:
            return self.flags[name]
        raise KeyError(name)


@dataclass(frozen=True)
class TrialSchema:
    """Column roles a recipe demands of its trial file."""

    covariates: tuple[str, ...]
    grouping: tuple[str, ...]
    flags: tuple[str, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return BASE_COLUMNS + self.covariates + self.grouping + self.flags


def schema_for(recipe: DatasetRecipe) -> TrialSchema:
    covariates: list[str] = []
    for name in recipe.fixed_effects:
        if name != "surprisal":
            covariates.append(name)
    for term in recipe.random_effects:
        for slope in term.slopes:
            if slope != "surprisal" and slope not in covariates:
                covariates.append(slope)
    grouping = [t.group for t in recipe.random_effects
                if t.group not in ("subject", "item")]
    flags: list[str] = []
    for rule in recipe.exclusions:
        if rule.kind in ("flagged", "unflagged", "subject_score_below"):
            if rule.column not in flags:
                flags.append(rule.column)
        elif rule.kind == "covariate_above" and rule.column not in covariates:
            covariates.append(rule.column)
    return TrialSchema(tuple(covariates), tuple(grouping), tuple(flags))


def load_trials(path, schema: TrialSchema) -> list[TrialRow]:
    """Parse a UTF-8 comma-separated trial file with a header row.

    Every schema column must be present; unparseable cells report both
    the data row number and the column name.
    """
    rows: list[TrialRow] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TrialFileError(f"{path}: empty file (no header row)")
        missing = [c for c in schema.columns if c not in reader.fieldnames]
        if missing:
            raise TrialFileError(f"{path}: missing column {missing[0]!r}")

        def parse_float(row, rownum, name):
            try:
                return float(row[name])
            except (TypeError, ValueError):
                raise TrialFileError(
                    f"{path}: row {rownum}, column {name!r}: "
                    f"cannot parse {row[name]!r}") from None

        for rownum, raw in enumerate(reader, start=2):
            try:
                word_index = int(raw["word_index"])
            except (TypeError, ValueError):
                raise TrialFileError(
                    f"{path}: row {rownum}, column 'word_index': "
                    f"cannot parse {raw['word_index']!r}") from None
            rows.append(TrialRow(
                subject=raw["subject"],
                item=raw["item"],
                word_index=word_index,
                response=parse_float(raw, rownum, "response"),
                covariates={c: parse_float(raw, rownum, c)
                            for c in schema.covariates},
                grouping={g: raw[g] for g in schema.grouping},
                flags={f: parse_float(raw, rownum, f) for f in schema.flags},
            ))
    return rows
