"""Run configuration: JSON parsing, path validation, and hashing."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..corpus import DatasetRecipe, builtin_recipe, load_recipe
from ..engines import EngineConfig

ANALYSIS_MODES = ("scale", "perplexity")


class ConfigFileError(ValueError):
    pass


@dataclass
class EngineEntry:
    name: str
    config: EngineConfig
    weights: Path

    @property
    def meta_architecture(self) -> str:
        # the transformer family plays the pythia role in meta-analyses
        return "pythia" if self.config.family == "transformer" else self.config.family


@dataclass
class DatasetEntry:
    recipe: DatasetRecipe
    trials: Path
    stimuli: Path


@dataclass
class RunConfig:
    vocab: Path
    engines: list[EngineEntry]
    datasets: list[DatasetEntry]
    out_dir: Path
    seed: int = 0
    workers: int = 1
    perplexity_corpus: Path | None = None
    analysis_modes: tuple[str, ...] = ("scale",)
    fdr_method: str = "BH"
    fdr_family: str = "table"
    config_hash: str = ""
    _raw: dict = field(default_factory=dict, repr=False)


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigFileError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _existing_path(base: Path, value, where) -> Path:
    path = (base / value).resolve() if not Path(value).is_absolute() else Path(value)
    if not path.exists():
        raise ConfigFileError(f"{where}: path does not exist: {path}")
    return path


def load_config(path, out_dir=None, seed=None, workers=None) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Relative paths are resolved against the config file's directory.
    CLI overrides for the output directory, seed, and worker count win
    over the file's values.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from None
    base = path.parent

    vocab = _existing_path(base, _require(raw, "vocab", "config"), "vocab")

    engines = []
    for i, spec in enumerate(_require(raw, "engines", "config")):
        where = f"engines[{i}]"
        name = _require(spec, "name", where)
        family = _require(spec, "family", where)
        params = {k: spec[k] for k in ("n_heads", "d_state", "d_ffn") if k in spec}
        config = EngineConfig(
            family=family,
            vocab_size=int(_require(spec, "vocab_size", where)),
            d_model=int(_require(spec, "d_model", where)),
            n_layers=int(_require(spec, "n_layers", where)),
            family_params=params)
        weights = _existing_path(base, _require(spec, "weights", where), where)
        engines.append(EngineEntry(name, config, weights))
    if len({e.name for e in engines}) != len(engines):
        raise ConfigFileError("engine names must be unique")
    if not engines:
        raise ConfigFileError("at least one engine is required")

    datasets = []
    for i, spec in enumerate(raw.get("datasets", [])):
        where = f"datasets[{i}]"
        recipe_ref = _require(spec, "recipe", where)
        if (base / recipe_ref).exists() or Path(recipe_ref).is_absolute():
            recipe = load_recipe(_existing_path(base, recipe_ref, where))
        else:
            recipe = builtin_recipe(recipe_ref)
        trials = _existing_path(base, _require(spec, "trials", where), where)
        stimuli = _existing_path(base, _require(spec, "stimuli", where), where)
        datasets.append(DatasetEntry(recipe, trials, stimuli))
    ids = [d.recipe.dataset_id for d in datasets]
    if len(set(ids)) != len(ids):
        raise ConfigFileError("dataset ids must be unique")

    analysis = raw.get("analysis", {})
    modes = tuple(analysis.get("modes", ["scale"]))
    for mode in modes:
        if mode not in ANALYSIS_MODES:
            raise ConfigFileError(f"unknown analysis mode {mode!r}")
    fdr_method = analysis.get("fdr_method", "BH")
    fdr_family = analysis.get("fdr_family", "table")

    ppl_corpus = None
    if "perplexity_corpus" in raw:
        ppl_corpus = _existing_path(base, raw["perplexity_corpus"],
                                    "perplexity_corpus")
    elif "perplexity" in modes:
        raise ConfigFileError("perplexity mode requires perplexity_corpus")

    resolved_out = Path(out_dir) if out_dir else base / raw.get("out_dir", "out")
    config_hash = hashlib.sha256(
        json.dumps(raw, sort_keys=True).encode("utf-8")).hexdigest()

    return RunConfig(
        vocab=vocab, engines=engines, datasets=datasets,
        out_dir=resolved_out,
        seed=int(seed if seed is not None else raw.get("seed", 0)),
        workers=int(workers if workers is not None else raw.get("workers", 1)),
        perplexity_corpus=ppl_corpus,
        analysis_modes=modes, fdr_method=fdr_method, fdr_family=fdr_family,
        config_hash=config_hash, _raw=raw)
