"""Stimulus items: sentence word lists, byte offsets, and context building.

A stimulus file is a UTF-8 CSV with header ``item,sentence,word,critical``;
rows are grouped by item in order, ``sentence`` is the 0-based sentence
index within the item, and ``critical`` flags the words that receive
surprisal (1 for every word in naturalistic corpora). Item text is the
words joined by single spaces; every non-initial word's span includes
its preceding space, matching the tokenizer's leading-space convention.
"""

import csv
from dataclasses import dataclass


class StimulusError(ValueError):
    pass


@dataclass
class StimulusItem:
    dataset_id: str
    item_id: str
    sentences: list[list[str]]
    critical: list[int]                 # item-level word indices

    def __post_init__(self):
        total = sum(len(s) for s in self.sentences)
        for idx in self.critical:
            if not 0 <= idx < total:
                raise StimulusError(
                    f"critical index {idx} out of range for item {self.item_id}")

    @property
    def words(self) -> list[str]:
        return [w for sent in self.sentences for w in sent]

    @property
    def n_words(self) -> int:
        return sum(len(s) for s in self.sentences)

    def sentence_of(self, word_index: int) -> tuple[int, int]:
        """(sentence index, word index within that sentence)."""
        offset = word_index
        for si, sent in enumerate(self.sentences):
            if offset < len(sent):
                return si, offset
            offset -= len(sent)
        raise StimulusError(f"word index {word_index} out of range")

    def text(self) -> str:
        return " ".join(self.words)

    def word_span(self, word_index: int) -> tuple[int, int]:
        """Byte span of the word in text(), including any preceding space."""
        words = self.words
        if not 0 <= word_index < len(words):
            raise StimulusError(f"word index {word_index} out of range")
        pos = 0
        for i, word in enumerate(words):
            nbytes = len(word.encode("utf-8"))
            if i == word_index:
                start = pos if i == 0 else pos - 1   # fold the preceding space
                return (start, pos + nbytes)
            pos += nbytes + 1                        # word + joining space
        raise AssertionError("unreachable")


def build_context(item: StimulusItem, word_index: int, policy: str) -> str:
    """Words preceding word_index under the given context policy."""
    si, wi = item.sentence_of(word_index)
    if policy == "sentence-so-far":
        return " ".join(item.sentences[si][:wi])
    if policy == "passage-so-far":
        words = [w for sent in item.sentences[:si] for w in sent]
        words.extend(item.sentences[si][:wi])
        return " ".join(words)
    raise StimulusError(f"unknown context policy {policy!r}")


def load_stimuli(path, dataset_id: str) -> list[StimulusItem]:
    items: list[StimulusItem] = []
    current: str | None = None
    sentences: list[list[str]] = []
    critical: list[int] = []

    def flush():
        if current is not None:
            items.append(StimulusItem(dataset_id, current, sentences, critical))

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"item", "sentence", "word", "critical"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise StimulusError(
                f"stimulus file {path} must have columns item,sentence,word,critical")
        for ln, row in enumerate(reader, start=2):
            item = row["item"]
            if item != current:
                flush()
                current, sentences, critical = item, [], []
            try:
                sent_idx = int(row["sentence"])
                crit = int(row["critical"])
            except ValueError:
                raise StimulusError(f"{path}:{ln}: bad sentence/critical value")
            word = row["word"]
            if not word or " " in word:
                raise StimulusError(f"{path}:{ln}: bad word {word!r}")
            if sent_idx == len(sentences):
                sentences.append([])
            elif sent_idx != len(sentences) - 1:
                raise StimulusError(f"{path}:{ln}: sentence index out of order")
            if crit:
                critical.append(sum(len(s) for s in sentences[:-1])
                                + len(sentences[-1]))
            sentences[-1].append(word)
    flush()
    return items
