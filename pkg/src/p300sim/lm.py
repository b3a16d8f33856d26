"""Layered character language model with discounted backoff smoothing.

Five count models are built from one corpus: character unigrams, bigrams
and trigrams, word prefix counts, and biword (consecutive word pair)
prefix counts.  Conditional next-character probabilities cascade from the
biword model down to the unigram floor; at each level the observed count
is discounted and the freed mass is routed to the next simpler model, so
out-of-vocabulary contexts degrade gracefully instead of going to zero.

All tables use prefix-count semantics: ``count(x)`` is the total corpus
frequency of entries that begin with the string ``x``.  Words and biwords
are stored with a terminating space, which makes every level's conditional
sum to one exactly over the 27-symbol alphabet.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass

LETTERS = "abcdefghijklmnopqrstuvwxyz"
SPACE = " "
ALPHABET = LETTERS + SPACE

LEVELS = ("unigram", "bigram", "trigram", "word", "biword")

_LM_MAGIC = b"P3LM"
_LM_VERSION = 1


def normalize_text(raw: str) -> str:
    """Reduce arbitrary text to the 27-symbol alphabet.

    Letters are case-folded; digits, punctuation and control characters
    are dropped; runs of spaces collapse to a single space and the ends
    are trimmed.  The empty string is a legal result.
    """
    kept = [c for c in raw.lower() if c in ALPHABET]
    return " ".join("".join(kept).split())


def load_corpus(path) -> str:
    """Read a plain-text corpus file and normalize it.

    Line breaks and tabs act as word separators here (unlike bare
    ``normalize_text``, which drops them) so that multi-line files do not
    fuse words across line boundaries.
    """
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        text = fh.read()
    return normalize_text(" ".join(text.split()))


@dataclass
class CountTable:
    """Prefix-count table for one model level.

    ``entries`` holds the maximal-context strings (the raw n-grams, or
    words/biwords with their terminating space) with their corpus
    frequencies.  ``counts`` maps every prefix of every entry, including
    the empty string, to the summed frequency of entries extending it.
    ``followers`` maps a prefix to the number of distinct next symbols
    observed after it.
    """

    level: str
    entries: dict
    counts: dict
    followers: dict
    total: int

    def count(self, key: str) -> int:
        return self.counts.get(key, 0)

    def distinct_followers(self, key: str) -> int:
        return self.followers.get(key, 0)


def _build_table(level: str, entry_counts: Counter) -> CountTable:
    counts: dict = {}
    followers: dict = {}
    for entry, freq in entry_counts.items():
        for i in range(len(entry) + 1):
            prefix = entry[:i]
            counts[prefix] = counts.get(prefix, 0) + freq
    for key in counts:
        if key:
            parent = key[:-1]
            followers[parent] = followers.get(parent, 0) + 1
    total = counts.get("", 0)
    return CountTable(level, dict(entry_counts), counts, followers, total)


@dataclass
class LayeredLM:
    """Immutable bundle of the five count tables plus discounts d1..d4.

    d1 applies at the biword level, d2 at the word level, d3 at the
    trigram level, d4 at the bigram level.
    """

    tables: dict
    discounts: tuple

    def table(self, level: str) -> CountTable:
        return self.tables[level]


def build_lm(corpus: str, discounts=(0.5, 0.5, 0.5, 0.5)) -> LayeredLM:
    """Count all five model levels over a normalized corpus.

    Raises ValueError for a corpus with no words or discounts outside
    [0, 1].
    """
    if any(not (0.0 <= d <= 1.0) for d in discounts):
        raise ValueError("discounts must lie in [0, 1]")
    if len(discounts) != 4:
        raise ValueError("expected four discounts")
    words = corpus.split()
    if not words:
        raise ValueError("empty corpus")

    n = len(corpus)
    unigrams = Counter(corpus)
    bigrams = Counter(corpus[i : i + 2] for i in range(n - 1))
    trigrams = Counter(corpus[i : i + 3] for i in range(n - 2))
    word_entries = Counter(w + SPACE for w in words)
    biword_entries = Counter(
        a + SPACE + b + SPACE for a, b in zip(words, words[1:])
    )

    tables = {
        "unigram": _build_table("unigram", unigrams),
        "bigram": _build_table("bigram", bigrams),
        "trigram": _build_table("trigram", trigrams),
        "word": _build_table("word", word_entries),
        "biword": _build_table("biword", biword_entries),
    }
    return LayeredLM(tables, tuple(float(d) for d in discounts))


def split_context(history: str):
    """Return (previous complete word or None, current partial word)."""
    if SPACE in history:
        head, partial = history.rsplit(SPACE, 1)
        prev = head.rsplit(SPACE, 1)[-1]
        return (prev if prev else None), partial
    return None, history


def _level_prob(table: CountTable, ctx, c: str, d: float, lower: float) -> float:
    # An absent or empty context contributes exactly the lower level's
    # probability; the literal d*L backoff with L=1 would leak mass.
    if not ctx:
        return lower
    n = table.count(ctx)
    if n == 0:
        return lower
    held = max(table.count(ctx + c) - d, 0.0) / n
    backoff = d * table.distinct_followers(ctx) / n
    return held + backoff * lower


def p_char(lm: LayeredLM, history: str, c: str) -> float:
    """Smoothed probability of the next character given spelled history.

    The biword context is the previous complete word plus the current
    partial word; the word context is the partial word alone; trigram and
    bigram contexts are the last two / one characters of the history.
    Histories shorter than a context width use whatever suffix exists.
    """
    if c not in ALPHABET:
        raise ValueError(f"symbol {c!r} not in alphabet")
    d1, d2, d3, d4 = lm.discounts
    prev, partial = split_context(history)
    biword_ctx = (prev + SPACE + partial) if prev is not None else None

    uni = lm.table("unigram")
    p = uni.count(c) / uni.total if uni.total else 0.0
    p = _level_prob(lm.table("bigram"), history[-1:], c, d4, p)
    p = _level_prob(lm.table("trigram"), history[-2:], c, d3, p)
    p = _level_prob(lm.table("word"), partial, c, d2, p)
    p = _level_prob(lm.table("biword"), biword_ctx, c, d1, p)
    return p


def p_next(lm: LayeredLM, history: str) -> dict:
    """Distribution over the full alphabet for the next character.

    The cascade already sums to one by construction; a final
    renormalization guards against float drift.
    """
    probs = {c: p_char(lm, history, c) for c in ALPHABET}
    z = sum(probs.values())
    if z > 0:
        probs = {c: p / z for c, p in probs.items()}
    return probs


def p_word_completion(lm: LayeredLM, history: str, candidate: str) -> float:
    """Probability of finishing the current word as ``candidate``.

    The result is the chain-rule product of p_char over the characters of
    the candidate not yet spelled, plus the terminating space.  A
    candidate already fully typed (history ends with it and its space)
    has probability one.
    """
    target = candidate if candidate.endswith(SPACE) else candidate + SPACE
    if candidate.endswith(SPACE) and history.endswith(target):
        return 1.0
    _, partial = split_context(history)
    if not target.startswith(partial):
        raise ValueError(
            f"candidate {candidate!r} inconsistent with partial word {partial!r}"
        )
    p = 1.0
    h = history
    for ch in target[len(partial) :]:
        p *= p_char(lm, h, ch)
        h += ch
    return p


def save_lm(lm: LayeredLM, path) -> None:
    """Dump the maximal-context entries of each table to a versioned file."""
    with open(path, "wb") as fh:
        fh.write(_LM_MAGIC)
        fh.write(struct.pack("<B", _LM_VERSION))
        fh.write(struct.pack("<4d", *lm.discounts))
        for level in LEVELS:
            table = lm.table(level)
            for entry, freq in sorted(table.entries.items()):
                fh.write(f"{level}\t{entry}\t{freq}\n".encode("utf-8"))


def load_lm(path) -> LayeredLM:
    """Rebuild a LayeredLM from a save_lm dump."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _LM_MAGIC:
            raise ValueError("not a P3LM file")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != _LM_VERSION:
            raise ValueError(f"unsupported P3LM version {version}")
        discounts = struct.unpack("<4d", fh.read(32))
        per_level = {level: Counter() for level in LEVELS}
        for line in fh.read().decode("utf-8").splitlines():
            level, entry, freq = line.split("\t")
            per_level[level][entry] = int(freq)
    tables = {level: _build_table(level, per_level[level]) for level in LEVELS}
    return LayeredLM(tables, discounts)
