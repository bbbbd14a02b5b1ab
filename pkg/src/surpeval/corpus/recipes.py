"""Dataset recipes: metric, context policy, transforms, exclusions, effects.

A recipe is a small key-value text document. The twelve built-in
recipes shipped under ``corpus/recipes/`` cover the six N400 studies,
the two self-paced-reading corpora, the three-word self-paced-reading
study, the Maze study, and the two eye-tracking corpora. User recipe
files use the same format and may override any field.

Exclusion thresholds are strict: ``response_below(100)`` removes rows
strictly below 100, ``response_above(3000)`` strictly above, and
``subject_score_below(comprehension, 4)`` removes every row of a
subject whose score is strictly below 4.
"""

from dataclasses import dataclass
from importlib import resources

from ..lmm.design import RandomTerm

METRICS = ("N400", "SPR-RT", "SPR-3W-RT", "Maze-RT", "GPD")
CONTEXT_POLICIES = ("sentence-so-far", "passage-so-far")
TRANSFORMS = ("identity", "natural-log")

RULE_KINDS = ("response_below", "response_above", "flagged", "unflagged",
              "covariate_above", "subject_score_below")

BUILTIN_IDS = (
    "federmeier2007", "hubbard2019", "michaelov2024", "szewczyk2022",
    "szewczyk2022power", "wlotko2012",
    "boyce2023", "brothers2021", "naturalstories", "dundee", "provo",
    "smith2013",
)


class RecipeError(ValueError):
    pass


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True)
class ExclusionRule:
    kind: str
    column: str = ""          # flag or covariate column, empty for response rules
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise RecipeError(f"unknown exclusion rule kind {self.kind!r}")

    def label(self) -> str:
        if self.kind in ("response_below", "response_above"):
            return f"{self.kind}({_fmt_num(self.threshold)})"
        if self.kind in ("flagged", "unflagged"):
            return f"{self.kind}({self.column})"
        return f"{self.kind}({self.column}, {_fmt_num(self.threshold)})"

    def serialize(self) -> str:
        if self.kind in ("response_below", "response_above"):
            return f"{self.kind} {_fmt_num(self.threshold)}"
        if self.kind in ("flagged", "unflagged"):
            return f"{self.kind} {self.column}"
        return f"{self.kind} {self.column} {_fmt_num(self.threshold)}"

    @classmethod
    def parse(cls, text: str) -> "ExclusionRule":
        parts = text.split()
        if not parts:
            raise RecipeError("empty exclusion rule")
        kind = parts[0]
        try:
            if kind in ("response_below", "response_above"):
                (thr,) = parts[1:]
                return cls(kind, threshold=float(thr))
            if kind in ("flagged", "unflagged"):
                (col,) = parts[1:]
                return cls(kind, column=col)
            if kind in ("covariate_above", "subject_score_below"):
                col, thr = parts[1:]
                return cls(kind, column=col, threshold=float(thr))
        except ValueError as exc:
            raise RecipeError(f"bad exclusion rule {text!r}: {exc}") from None
        raise RecipeError(f"unknown exclusion rule kind {kind!r}")


@dataclass(frozen=True)
class DatasetRecipe:
    dataset_id: str
    metric: str
    context_policy: str
    response_transform: str
    exclusions: tuple[ExclusionRule, ...]
    fixed_effects: tuple[str, ...]
    random_effects: tuple[RandomTerm, ...]

    def __post_init__(self):
        if self.metric not in METRICS:
            raise RecipeError(f"unknown metric {self.metric!r}")
        if self.context_policy not in CONTEXT_POLICIES:
            raise RecipeError(f"unknown context policy {self.context_policy!r}")
        if self.response_transform not in TRANSFORMS:
            raise RecipeError(f"unknown transform {self.response_transform!r}")
        if not self.fixed_effects or self.fixed_effects[0] != "surprisal":
            raise RecipeError("fixed effects must start with surprisal")
        if not self.random_effects:
            raise RecipeError("at least one random term is required")

    def flag_columns(self) -> tuple[str, ...]:
        return tuple(r.column for r in self.exclusions
                     if r.kind in ("flagged", "unflagged"))

    def required_columns(self) -> tuple[str, ...]:
        """Canonical trial-file columns this recipe inspects."""
        cols = ["subject", "item", "word_index", "response"]
        for name in self.fixed_effects:
            if name != "surprisal" and name not in cols:
                cols.append(name)
        for term in self.random_effects:
            if term.group not in cols:
                cols.append(term.group)
            for slope in term.slopes:
                if slope != "surprisal" and slope not in cols:
                    cols.append(slope)
        for rule in self.exclusions:
            if rule.kind in ("covariate_above", "subject_score_below",
                             "flagged", "unflagged"):
                if rule.column not in cols:
                    cols.append(rule.column)
        return tuple(cols)

    def describe(self) -> str:
        """Canonical manifest block used by the recipe-fidelity check."""
        lines = [f"[{self.dataset_id}]",
                 f"metric: {self.metric}",
                 f"context: {self.context_policy}",
                 f"transform: {self.response_transform}",
                 f"fixed: {' + '.join(self.fixed_effects)}"]
        for term in self.random_effects:
            lines.append(f"random: {term.describe()}")
        if self.exclusions:
            for rule in self.exclusions:
                lines.append(f"exclude: {rule.label()}")
        else:
            lines.append("exclude: none")
        return "\n".join(lines)

    def serialize(self) -> str:
        lines = [f"dataset_id = {self.dataset_id}",
                 f"metric = {self.metric}",
                 f"context_policy = {self.context_policy}",
                 f"response_transform = {self.response_transform}",
                 f"fixed_effects = {', '.join(self.fixed_effects)}"]
        for term in self.random_effects:
            cols = " + ".join(("intercept",) + term.slopes)
            corr = "correlated" if term.correlated else "uncorrelated"
            lines.append(f"random = {term.group}: {cols}, {corr}")
        for rule in self.exclusions:
            lines.append(f"exclude = {rule.serialize()}")
        return "\n".join(lines) + "\n"


def _parse_random(value: str) -> RandomTerm:
    try:
        head, corr = value.rsplit(",", 1)
        group, cols = head.split(":", 1)
    except ValueError:
        raise RecipeError(f"bad random term {value!r}") from None
    corr = corr.strip()
    if corr not in ("correlated", "uncorrelated"):
        raise RecipeError(f"bad correlation flag {corr!r}")
    parts = [c.strip() for c in cols.split("+")]
    if not parts or parts[0] != "intercept":
        raise RecipeError(f"random term must start with intercept: {value!r}")
    return RandomTerm(group.strip(), tuple(parts[1:]), corr == "correlated")


def parse_recipe(text: str) -> DatasetRecipe:
    fields: dict[str, str] = {}
    randoms: list[RandomTerm] = []
    excludes: list[ExclusionRule] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RecipeError(f"line {ln}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "random":
            randoms.append(_parse_random(value))
        elif key == "exclude":
            excludes.append(ExclusionRule.parse(value))
        elif key in fields:
            raise RecipeError(f"line {ln}: duplicate key {key!r}")
        else:
            fields[key] = value
    missing = [k for k in ("dataset_id", "metric", "context_policy",
                           "response_transform", "fixed_effects") if k not in fields]
    if missing:
        raise RecipeError(f"missing recipe keys: {', '.join(missing)}")
    fixed = tuple(s.strip() for s in fields["fixed_effects"].split(",") if s.strip())
    return DatasetRecipe(
        dataset_id=fields["dataset_id"],
        metric=fields["metric"],
        context_policy=fields["context_policy"],
        response_transform=fields["response_transform"],
        exclusions=tuple(excludes),
        fixed_effects=fixed,
        random_effects=tuple(randoms),
    )


def load_recipe(path) -> DatasetRecipe:
    with open(path, encoding="utf-8") as fh:
        return parse_recipe(fh.read())


def builtin_recipe(dataset_id: str) -> DatasetRecipe:
    if dataset_id not in BUILTIN_IDS:
        raise RecipeError(f"no built-in recipe {dataset_id!r}")
    text = (resources.files("surpeval.corpus") / "recipes"
            / f"{dataset_id}.recipe").read_text(encoding="utf-8")
    recipe = parse_recipe(text)
    if recipe.dataset_id != dataset_id:
        raise RecipeError(
            f"recipe file for {dataset_id} declares {recipe.dataset_id!r}")
    return recipe


def builtin_recipes() -> dict[str, DatasetRecipe]:
    return {rid: builtin_recipe(rid) for rid in BUILTIN_IDS}


def recipe_manifest() -> str:
    """Concatenated describe() blocks for all built-in recipes."""
    return "\n\n".join(builtin_recipe(rid).describe() for rid in BUILTIN_IDS) + "\n"
