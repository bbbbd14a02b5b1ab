#!/usr/bin/env python3
"""Generate a self-contained synthetic demo workspace for the pipeline.

Creates a vocabulary, six small engines (two per family) with seeded
random weights, three toy datasets (one N400-style, two reading-time
style), a perplexity corpus, and a config.json wired to all of it.
Everything is deterministic in the seed.
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np

from surpeval.engines import EngineConfig, Vocabulary, init_weights, save_archive

WORDS = (
    "the a an of to in on at for with and or but not no yes they she he it "
    "we you i was were is are be been has have had will would could said "
    "went gone came come saw seen took given made found left right small "
    "large old new good bad cat dog bird fish tree house door light water "
    "coffee morning night story word page book garden river mountain city "
    "quiet loud warm cold empty full open closed"
).split()

ENGINE_SPECS = (
    ("pythia-a", "transformer", 16, 2, {"n_heads": 4}),
    ("pythia-b", "transformer", 32, 2, {"n_heads": 4}),
    ("rwkv-a", "rwkv", 16, 2, {}),
    ("rwkv-b", "rwkv", 24, 2, {}),
    ("mamba-a", "mamba", 16, 2, {"d_state": 8}),
    ("mamba-b", "mamba", 24, 2, {"d_state": 8}),
)

TOYPASSAGE_RECIPE = """\
dataset_id = toypassage
metric = SPR-RT
context_policy = passage-so-far
response_transform = natural-log
fixed_effects = surprisal, log_freq
random = subject: intercept + surprisal, correlated
random = sentence: intercept, correlated
exclude = flagged sentence_initial
exclude = flagged sentence_final
exclude = response_below 100
exclude = response_above 3000
"""


def _sentence(rng, length):
    return [WORDS[i] for i in rng.integers(0, len(WORDS), size=length)]


def _write_stimuli(path, items):
    lines = ["item,sentence,word,critical"]
    for item_id, sentences, critical in items:
        wi = 0
        for si, sent in enumerate(sentences):
            for word in sent:
                lines.append(f"{item_id},{si},{word},{1 if wi in critical else 0}")
                wi += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_demo(root: Path, seed: int = 0) -> Path:
    """Populate root with demo inputs; returns the config.json path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    vocab = Vocabulary.from_words(list(WORDS))
    vocab_path = root / "vocab.txt"
    vocab.save(vocab_path)

    weights_dir = root / "weights"
    weights_dir.mkdir(exist_ok=True)
    engine_entries = []
    for i, (name, family, d_model, n_layers, params) in enumerate(ENGINE_SPECS):
        config = EngineConfig(family, vocab.vocab_size, d_model, n_layers,
                              dict(params))
        tensors = init_weights(config, seed=seed * 1000 + i)
        save_archive(weights_dir / f"{name}.sbwt", tensors)
        entry = {"name": name, "family": family,
                 "vocab_size": vocab.vocab_size, "d_model": d_model,
                 "n_layers": n_layers, "weights": f"weights/{name}.sbwt"}
        entry.update(params)
        engine_entries.append(entry)

    stim_dir = root / "stimuli"
    trial_dir = root / "trials"
    stim_dir.mkdir(exist_ok=True)
    trial_dir.mkdir(exist_ok=True)

    # N400-style constructed stimuli: one critical word per item
    m_items = []
    for i in range(8):
        sentences = [_sentence(rng, int(rng.integers(5, 8)))]
        crit = int(rng.integers(1, len(sentences[0])))
        m_items.append((f"m{i}", sentences, {crit}))
    _write_stimuli(stim_dir / "michaelov2024.csv", m_items)

    rows = []
    electrodes = ("cz", "pz", "cpz")
    for subj in range(10):
        for item_id, sentences, critical in m_items:
            crit = next(iter(critical))
            word = sentences[0][crit]
            frame = f"f{int(item_id[1:]) // 2}"
            log_freq = float(np.round(rng.normal(2.0, 0.8), 6))
            orth_nd = float(np.round(rng.uniform(0.5, 3.0), 6))
            base = rng.normal(-2.0, 1.5)
            for elec in electrodes:
                amp = base + rng.normal(0, 1.0)
                rows.append((f"s{subj:02d}", item_id, crit,
                             float(np.round(amp, 6)), log_freq, orth_nd,
                             frame, word, elec))
    _write_csv(trial_dir / "michaelov2024.csv",
               ("subject", "item", "word_index", "response", "log_freq",
                "orth_nd", "sentence", "word", "electrode"), rows)

    # three-word self-paced reading: constructed single-sentence items
    b_items = []
    for i in range(8):
        sentences = [_sentence(rng, int(rng.integers(6, 9)))]
        crit = int(rng.integers(1, len(sentences[0]) - 1))
        b_items.append((f"b{i}", sentences, {crit}))
    _write_stimuli(stim_dir / "brothers2021.csv", b_items)

    rows = []
    for subj in range(12):
        subj_shift = rng.normal(0, 40)
        for item_id, sentences, critical in b_items:
            crit = next(iter(critical))
            rt = 900 + subj_shift + rng.normal(0, 60)
            rows.append((f"s{subj:02d}", item_id, crit,
                         float(np.round(max(rt, 200.0), 6))))
    _write_csv(trial_dir / "brothers2021.csv",
               ("subject", "item", "word_index", "response"), rows)

    # naturalistic passages: every word critical, boundary flags, exclusions
    (root / "toypassage.recipe").write_text(TOYPASSAGE_RECIPE, encoding="utf-8")
    p_items = []
    for i in range(4):
        sentences = [_sentence(rng, int(rng.integers(4, 7)))
                     for _ in range(int(rng.integers(2, 4)))]
        n_words = sum(len(s) for s in sentences)
        p_items.append((f"p{i}", sentences, set(range(n_words))))
    _write_stimuli(stim_dir / "toypassage.csv", p_items)

    rows = []
    for subj in range(8):
        subj_speed = math.exp(rng.normal(0, 0.1))
        for item_id, sentences, _ in p_items:
            wi = 0
            for si, sent in enumerate(sentences):
                for k, word in enumerate(sent):
                    rt = 330.0 * subj_speed * math.exp(rng.normal(0, 0.25))
                    if rng.uniform() < 0.03:
                        rt = float(rng.uniform(40, 95))      # exercises exclusion
                    rows.append((f"s{subj:02d}", item_id, wi,
                                 float(np.round(rt, 6)),
                                 float(np.round(rng.normal(2.0, 0.8), 6)),
                                 f"{item_id}.{si}",
                                 1 if k == 0 else 0,
                                 1 if k == len(sent) - 1 else 0))
                    wi += 1
    _write_csv(trial_dir / "toypassage.csv",
               ("subject", "item", "word_index", "response", "log_freq",
                "sentence", "sentence_initial", "sentence_final"), rows)

    corpus_words = [WORDS[i] for i in rng.integers(0, len(WORDS), size=120)]
    (root / "wiki_sample.txt").write_text(" ".join(corpus_words) + "\n",
                                          encoding="utf-8")

    config = {
        "vocab": "vocab.txt",
        "engines": engine_entries,
        "datasets": [
            {"recipe": "michaelov2024", "trials": "trials/michaelov2024.csv",
             "stimuli": "stimuli/michaelov2024.csv"},
            {"recipe": "brothers2021", "trials": "trials/brothers2021.csv",
             "stimuli": "stimuli/brothers2021.csv"},
            {"recipe": "toypassage.recipe", "trials": "trials/toypassage.csv",
             "stimuli": "stimuli/toypassage.csv"},
        ],
        "perplexity_corpus": "wiki_sample.txt",
        "analysis": {"modes": ["scale", "perplexity"],
                     "fdr_method": "BH", "fdr_family": "table"},
        "out_dir": "out",
        "seed": seed,
        "workers": 2,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return config_path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", required=True, help="directory to populate")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    config_path = build_demo(Path(args.root), args.seed)
    print(config_path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
