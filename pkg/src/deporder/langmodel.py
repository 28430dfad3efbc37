"""Trigram language models with add-one smoothing, over tags or words.

Sequences are padded with two start sentinels and one end sentinel.  The
conditional probability of w3 after (w1, w2) is

    (count(w1 w2 w3) + 1) / (count(w1 w2) + V)

where V is the prediction vocabulary size (the vocabulary minus the start
sentinel, which is never predicted).  Unseen histories therefore fall back
to the uniform 1/V.  In word mode, training tokens seen fewer than
`oov_threshold` times collapse into an out-of-vocabulary symbol, and unseen
evaluation tokens map to it as well.  Tag mode uses the closed universal
tagset as its vocabulary and needs no OOV symbol.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .treebank import DepTree, UPOS_TAGS

BOS = "<s>"
EOS = "</s>"
OOV = "<unk>"

DEFAULT_OOV_THRESHOLD = 10


@dataclass(frozen=True)
class TrigramLM:
    mode: str  # "tag" or "word"
    vocabulary: frozenset[str]
    trigrams: dict[tuple[str, str, str], int]
    histories: dict[tuple[str, str], int]
    unigrams: dict[str, int]
    oov_threshold: int = DEFAULT_OOV_THRESHOLD

    @property
    def prediction_vocab_size(self) -> int:
        return len(self.vocabulary) - 1  # BOS is never predicted

    def map_symbol(self, symbol: str) -> str:
        if symbol in self.vocabulary:
            return symbol
        return OOV if self.mode == "word" else "X"

    def log2_conditional(self, w1: str, w2: str, w3: str) -> float:
        numerator = self.trigrams.get((w1, w2, w3), 0) + 1
        denominator = self.histories.get((w1, w2), 0) + self.prediction_vocab_size
        return math.log2(numerator / denominator)

    def sequence_log2prob(self, sequence: Sequence[str]) -> tuple[float, int]:
        """Total log2 probability and number of predicted positions
        (every symbol plus the end sentinel)."""
        padded = [BOS, BOS] + [self.map_symbol(s) for s in sequence] + [EOS]
        total = 0.0
        for k in range(2, len(padded)):
            total += self.log2_conditional(padded[k - 2], padded[k - 1], padded[k])
        return total, len(sequence) + 1


def train_trigram(sequences: Sequence[Sequence[str]], mode: str = "tag",
                  oov_threshold: int = DEFAULT_OOV_THRESHOLD) -> TrigramLM:
    """Count trigrams over the padded sequences.

    Word mode first replaces every token whose corpus count is below
    `oov_threshold` with the OOV symbol.
    """
    if mode not in ("tag", "word"):
        raise ValueError(f"unknown mode {mode!r}")
    if not sequences:
        raise ValueError("empty training corpus")
    if mode == "word":
        corpus_counts = Counter(tok for seq in sequences for tok in seq)

        def mapped(tok: str) -> str:
            return tok if corpus_counts[tok] >= oov_threshold else OOV

        vocabulary = {mapped(tok) for tok in corpus_counts}
        vocabulary |= {BOS, EOS, OOV}
    else:
        def mapped(tok: str) -> str:
            return tok if tok in UPOS_TAGS else "X"

        vocabulary = set(UPOS_TAGS) | {BOS, EOS}

    trigrams: Counter = Counter()
    histories: Counter = Counter()
    unigrams: Counter = Counter()
    for seq in sequences:
        padded = [BOS, BOS] + [mapped(tok) for tok in seq] + [EOS]
        for k in range(2, len(padded)):
            trigrams[(padded[k - 2], padded[k - 1], padded[k])] += 1
            histories[(padded[k - 2], padded[k - 1])] += 1
            unigrams[padded[k]] += 1
    return TrigramLM(mode, frozenset(vocabulary), dict(trigrams),
                     dict(histories), dict(unigrams), oov_threshold)


def perplexity(lm: TrigramLM, sequences: Sequence[Sequence[str]]) -> float:
    """2 ** (mean negative log2 probability per predicted position)."""
    total = 0.0
    positions = 0
    for seq in sequences:
        log2p, n = lm.sequence_log2prob(seq)
        total += log2p
        positions += n
    if positions == 0:
        raise ValueError("nothing to evaluate")
    return 2.0 ** (-total / positions)


def select_source(candidates: Sequence[tuple[str, TrigramLM]],
                  target_sequences: Sequence[Sequence[str]]
                  ) -> tuple[str, list[tuple[str, float, int]]]:
    """Maximum-likelihood source for the target sequences.

    Returns the winning language id and the full table of
    (language, total log2 probability, rank), best first.  Ties are broken
    by lexicographic language id.
    """
    if not candidates:
        raise ValueError("no candidate language models")
    scored = []
    for language, lm in candidates:
        total = sum(lm.sequence_log2prob(seq)[0] for seq in target_sequences)
        scored.append((language, total))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    table = [(language, total, rank)
             for rank, (language, total) in enumerate(scored, start=1)]
    return table[0][0], table


def tag_sequences(trees: Iterable[DepTree]) -> list[list[str]]:
    return [[tok.upos for tok in tree.tokens] for tree in trees]


def word_sequences(trees: Iterable[DepTree]) -> list[list[str]]:
    return [[tok.form for tok in tree.tokens] for tree in trees]


def lm_to_text(lm: TrigramLM) -> str:
    """Line-oriented persistence: headers then `w1 w2 w3<TAB>count` lines.

    Symbols therefore must not contain whitespace; offenders are rejected.
    """
    for symbol in lm.vocabulary:
        if any(ch.isspace() for ch in symbol):
            raise ValueError(f"cannot persist symbol with whitespace: {symbol!r}")
    lines = [f"#mode {lm.mode}",
             f"#oov_threshold {lm.oov_threshold}",
             f"#vocab_size {len(lm.vocabulary)}"]
    for (w1, w2, w3) in sorted(lm.trigrams):
        lines.append(f"{w1} {w2} {w3}\t{lm.trigrams[(w1, w2, w3)]}")
    return "\n".join(lines) + "\n"


def lm_from_text(text: str) -> TrigramLM:
    mode = ""
    oov_threshold = DEFAULT_OOV_THRESHOLD
    declared_vocab = -1
    trigrams: dict[tuple[str, str, str], int] = {}
    histories: Counter = Counter()
    unigrams: Counter = Counter()
    symbols: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#mode "):
            mode = line[len("#mode "):].strip()
        elif line.startswith("#oov_threshold "):
            oov_threshold = int(line[len("#oov_threshold "):])
        elif line.startswith("#vocab_size "):
            declared_vocab = int(line[len("#vocab_size "):])
        elif line.startswith("#"):
            raise ValueError(f"line {lineno}: unknown header {line!r}")
        else:
            gram, sep, count = line.partition("\t")
            parts = gram.split(" ")
            if not sep or len(parts) != 3:
                raise ValueError(f"line {lineno}: expected `w1 w2 w3\\t<count>`")
            trigrams[tuple(parts)] = int(count)
            histories[(parts[0], parts[1])] += int(count)
            unigrams[parts[2]] += int(count)
            symbols.update(parts)
    if mode not in ("tag", "word"):
        raise ValueError(f"bad or missing #mode header: {mode!r}")
    if mode == "tag":
        vocabulary = frozenset(UPOS_TAGS | {BOS, EOS})
    else:
        vocabulary = frozenset(symbols | {BOS, EOS, OOV})
    if declared_vocab >= 0 and declared_vocab != len(vocabulary):
        raise ValueError(f"vocabulary size mismatch: header says {declared_vocab}, "
                         f"reconstructed {len(vocabulary)}")
    return TrigramLM(mode, vocabulary, trigrams, dict(histories),
                     dict(unigrams), oov_threshold)


def save_lm(lm: TrigramLM, path: str | Path) -> None:
    Path(path).write_text(lm_to_text(lm), encoding="utf-8")


def load_lm(path: str | Path) -> TrigramLM:
    return lm_from_text(Path(path).read_text(encoding="utf-8"))
