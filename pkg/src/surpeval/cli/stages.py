"""Pipeline stages: surprisal, fit, perplexity, meta, and their file formats.

Every stage reads and writes plain CSV under the run's output directory.
Work is distributed over a bounded thread pool, results are collected
into key-sorted order before writing, and all stochastic components
(optimizer restarts) take seeds derived from (run seed, dataset, engine),
so outputs are byte-identical across reruns and worker counts.

A failing (dataset, engine) pair is recorded and skipped; it never
blocks or corrupts the other pairs' outputs.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..corpus import (apply_exclusions, attach_surprisal, load_stimuli,
                      load_trials, schema_for, transform_response)
from ..engines import (SurprisalRecord, Vocabulary, align_word, load_weights,
                       token_surprisals, tokenize)
from ..lmm import FixedSpec, build_design, fit_lmm, fit_report
from ..metastats import AicObservation, MetaError, ModelMeta, meta_regression
from ..textio import read_csv, write_csv
from .config import RunConfig

SURPRISAL_HEADER = ("dataset", "engine", "item", "word_index", "word",
                    "n_tokens", "surprisal", "token_ids", "token_surprisals")
AIC_HEADER = ("dataset", "engine", "n", "p", "k", "loglik", "aic",
              "converged", "singular")
EXCLUSION_HEADER = ("dataset", "rule", "count")
PERPLEXITY_HEADER = ("engine", "word_count", "token_count", "perplexity")
META_HEADER = ("Dataset", "Predictor", "Estimate", "SE", "t", "df",
               "p_uncorrected", "p_adjusted")


class StageError(ValueError):
    pass


@dataclass
class StageResult:
    files: list = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)   # task key -> message

    @property
    def ok(self) -> bool:
        return not self.failures


def fit_seed(run_seed: int, dataset: str, engine: str) -> int:
    digest = hashlib.sha256(f"{run_seed}:{dataset}:{engine}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def load_engines(cfg: RunConfig) -> dict[str, object]:
    return {e.name: load_weights(e.weights, e.config) for e in cfg.engines}


def _word_span(words: list[str], k: int) -> tuple[int, int]:
    """Byte span of words[k] in ' '.join(words), folding the leading space."""
    pos = sum(len(w.encode("utf-8")) + 1 for w in words[:k])
    start = pos if k == 0 else pos - 1
    return start, pos + len(words[k].encode("utf-8"))


def _item_records(dataset_id, item, recipe, engine_name, engine, vocab):
    """Word surprisal for every critical word of one stimulus item.

    One forward pass per passage (or per sentence under the sentence
    policy); by causality this equals the per-word context construction.
    """
    if recipe.context_policy == "passage-so-far":
        grouped = [(item.words, [(wi, wi) for wi in item.critical])]
    else:
        by_sentence: dict[int, list] = {}
        for wi in item.critical:
            si, local = item.sentence_of(wi)
            by_sentence.setdefault(si, []).append((wi, local))
        grouped = [(item.sentences[si], by_sentence[si])
                   for si in sorted(by_sentence)]
    records = []
    for words, targets in grouped:
        if not targets:
            continue
        text = " ".join(words)
        tokens = tokenize(text, vocab)
        surps = token_surprisals(engine, tokens)
        for word_index, local in targets:
            span = _word_span(words, local)
            run = align_word(tokens, span)
            tok_ids = tuple(t.id for t in tokens[run])
            tok_surps = tuple(float(s) for s in surps[run])
            records.append(SurprisalRecord(
                dataset_id=dataset_id, item_id=item.item_id,
                word_index=word_index, engine=engine_name,
                word=words[local], surprisal=float(sum(tok_surps)),
                token_ids=tok_ids, token_surprisals=tok_surps))
    return records


def stage_surprisal(cfg: RunConfig) -> StageResult:
    vocab = Vocabulary.load(cfg.vocab)
    engines = load_engines(cfg)
    for entry in cfg.engines:
        if entry.config.vocab_size != vocab.vocab_size:
            raise StageError(
                f"engine {entry.name}: vocab_size {entry.config.vocab_size} "
                f"!= vocabulary size {vocab.vocab_size}")
    result = StageResult()
    tasks = []
    for ds in cfg.datasets:
        items = load_stimuli(ds.stimuli, ds.recipe.dataset_id)
        for entry in cfg.engines:
            for item in items:
                tasks.append((ds.recipe.dataset_id, ds.recipe, entry.name, item))

    def run_task(task):
        dataset_id, recipe, engine_name, item = task
        return _item_records(dataset_id, item, recipe, engine_name,
                             engines[engine_name], vocab)

    collected: dict[tuple, list] = {}
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = {pool.submit(run_task, t): t for t in tasks}
        for fut, task in futures.items():
            key = (task[0], task[2], task[3].item_id)
            try:
                collected[key] = fut.result()
            except Exception as exc:   # noqa: BLE001 - per-task isolation
                result.failures[f"surprisal:{task[0]}:{task[2]}:{task[3].item_id}"] \
                    = f"{type(exc).__name__}: {exc}"

    rows = []
    for key in sorted(collected):
        for rec in sorted(collected[key], key=lambda r: r.word_index):
            rows.append((rec.dataset_id, rec.engine, rec.item_id, rec.word_index,
                         rec.word, len(rec.token_ids), rec.surprisal,
                         ";".join(str(i) for i in rec.token_ids),
                         ";".join(repr(s) for s in rec.token_surprisals)))
    path = cfg.out_dir / "surprisal.csv"
    write_csv(path, SURPRISAL_HEADER, rows)
    result.files.append(path)
    return result


def read_surprisal_records(path) -> list[SurprisalRecord]:
    records = []
    for row in read_csv(path):
        tok_ids = tuple(int(s) for s in row["token_ids"].split(";") if s)
        tok_surps = tuple(float(s) for s in row["token_surprisals"].split(";") if s)
        records.append(SurprisalRecord(
            dataset_id=row["dataset"], item_id=row["item"],
            word_index=int(row["word_index"]), engine=row["engine"],
            word=row["word"], surprisal=float(row["surprisal"]),
            token_ids=tok_ids, token_surprisals=tok_surps))
    return records


def stage_fit(cfg: RunConfig, criterion="reml") -> StageResult:
    surprisal_path = cfg.out_dir / "surprisal.csv"
    if not surprisal_path.exists():
        raise StageError("surprisal.csv not found; run the surprisal stage first")
    records = read_surprisal_records(surprisal_path)
    by_pair: dict[tuple[str, str], list[SurprisalRecord]] = {}
    for rec in records:
        by_pair.setdefault((rec.dataset_id, rec.engine), []).append(rec)

    result = StageResult()
    exclusion_rows = []
    report_dir = cfg.out_dir / "fit_reports"
    report_dir.mkdir(exist_ok=True)

    prepared = {}
    for ds in cfg.datasets:
        recipe = ds.recipe
        rows = load_trials(ds.trials, schema_for(recipe))
        kept, report = apply_exclusions(rows, recipe)
        for rule_label in report.counts:
            exclusion_rows.append((recipe.dataset_id, rule_label,
                                   report.counts[rule_label]))
        exclusion_rows.append((recipe.dataset_id, "retained", report.retained))
        exclusion_rows.append((recipe.dataset_id, "total", report.total))
        prepared[recipe.dataset_id] = (recipe, kept)

    def run_fit(dataset_id, engine_name):
        recipe, kept = prepared[dataset_id]
        recs = by_pair.get((dataset_id, engine_name), [])
        table = attach_surprisal(kept, recs, recipe, engine_name)
        table = transform_response(table)
        data = table.columns()
        design = build_design(data, FixedSpec(recipe.fixed_effects),
                              recipe.random_effects)
        y = np.asarray(data["response"], dtype=float)
        return fit_lmm(design, y, criterion=criterion,
                       seed=fit_seed(cfg.seed, dataset_id, engine_name))

    pairs = [(ds.recipe.dataset_id, e.name)
             for ds in cfg.datasets for e in cfg.engines]
    fits: dict[tuple[str, str], object] = {}
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = {pool.submit(run_fit, d, e): (d, e) for d, e in pairs}
        for fut, (d, e) in futures.items():
            try:
                fits[(d, e)] = fut.result()
            except Exception as exc:   # noqa: BLE001 - per-pair isolation
                result.failures[f"fit:{d}:{e}"] = f"{type(exc).__name__}: {exc}"

    aic_rows = []
    for (d, e) in sorted(fits):
        fit = fits[(d, e)]
        aic_rows.append((d, e, fit.n, fit.p, fit.k, fit.loglik, fit.aic,
                         fit.converged, fit.singular))
        report_path = report_dir / f"{d}__{e}.txt"
        report_path.write_text(fit_report(fit), encoding="utf-8")
        result.files.append(report_path)

    aic_path = cfg.out_dir / "aic.csv"
    write_csv(aic_path, AIC_HEADER, aic_rows)
    excl_path = cfg.out_dir / "exclusions.csv"
    write_csv(excl_path, EXCLUSION_HEADER, exclusion_rows)
    result.files.extend([aic_path, excl_path])
    return result


def stage_perplexity(cfg: RunConfig) -> StageResult:
    if cfg.perplexity_corpus is None:
        raise StageError("no perplexity_corpus configured")
    text = cfg.perplexity_corpus.read_text(encoding="utf-8")
    n_words = len(text.split())
    if n_words == 0:
        raise StageError("perplexity corpus contains no words")
    vocab = Vocabulary.load(cfg.vocab)
    tokens = tokenize(text, vocab)
    engines = load_engines(cfg)

    def run_engine(name):
        total = float(np.sum(token_surprisals(engines[name], tokens)))
        return float(np.exp(total / n_words))

    result = StageResult()
    values: dict[str, float] = {}
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = {pool.submit(run_engine, e.name): e.name for e in cfg.engines}
        for fut, name in futures.items():
            values[name] = fut.result()

    rows = [(name, n_words, len(tokens), values[name])
            for name in sorted(values)]
    path = cfg.out_dir / "perplexity.csv"
    write_csv(path, PERPLEXITY_HEADER, rows)
    result.files.append(path)
    return result


def model_metas(cfg: RunConfig, with_perplexity=False) -> list[ModelMeta]:
    ppl: dict[str, float] = {}
    if with_perplexity:
        path = cfg.out_dir / "perplexity.csv"
        if not path.exists():
            raise StageError("perplexity.csv not found; run the perplexity stage")
        for row in read_csv(path):
            ppl[row["engine"]] = float(row["perplexity"])
    metas = []
    for entry in sorted(cfg.engines, key=lambda e: e.name):
        neg_log_ppl = None
        if with_perplexity:
            if entry.name not in ppl:
                raise StageError(f"no perplexity row for engine {entry.name}")
            neg_log_ppl = -float(np.log(ppl[entry.name]))
        metas.append(ModelMeta(entry.name, entry.meta_architecture,
                               entry.config.param_count, neg_log_ppl))
    return metas


def stage_meta(cfg: RunConfig) -> StageResult:
    aic_path = cfg.out_dir / "aic.csv"
    if not aic_path.exists():
        raise StageError("aic.csv not found; run the fit stage first")
    observations = [AicObservation(row["dataset"], row["engine"],
                                   float(row["aic"]))
                    for row in read_csv(aic_path)]
    result = StageResult()
    for mode in cfg.analysis_modes:
        metas = model_metas(cfg, with_perplexity=(mode == "perplexity"))
        try:
            rows = meta_regression(observations, metas, mode=mode,
                                   fdr_method=cfg.fdr_method,
                                   fdr_family=cfg.fdr_family)
        except MetaError as exc:
            raise StageError(f"meta ({mode}): {exc}") from None
        out_rows = [(r.dataset_id, r.predictor, r.estimate, r.se, r.t, r.df,
                     r.p_uncorrected, r.p_adjusted) for r in rows]
        path = cfg.out_dir / f"meta_{mode}.csv"
        write_csv(path, META_HEADER, out_rows)
        result.files.append(path)
    return result
