"""Shared fixtures: synthetic corpora, passages and subjects.

The corpus generator composes words from a shared syllable inventory so
prefixes collide the way natural language does; word frequencies follow a
Zipf law with a short-word head.  Passages draw from the same
distribution with out-of-vocabulary words injected to stress smoothing
and word prediction.
"""

from __future__ import annotations

import random

import numpy as np
import pytest

from p300sim import build_lm, build_pools, fit_gaussians
from p300sim.harness import SubjectModel

CONSONANTS = "tnshrdlcmwfgypbvkjxqz"
CONS_W = [9, 8, 7, 6, 6, 5, 5, 4, 4, 3, 3, 3, 3, 2.5, 2, 1.5, 0.4, 0.3, 0.3, 0.2, 0.2]
VOWELS = "eaoiu"
VOW_W = [12, 8, 7, 7, 3]


def make_text(
    seed: int,
    n_syllables: int = 160,
    vocab_size: int = 5000,
    corpus_words: int = 20000,
    zipf_a: float = 1.0,
    oov_every: int = 6,
    passage_words: int = 130,
    passage_chars: int = 440,
):
    """Deterministic (corpus, passage) pair sharing one vocabulary."""
    rng = random.Random(seed)

    def syllable():
        s = rng.choices(CONSONANTS, CONS_W)[0] + rng.choices(VOWELS, VOW_W)[0]
        if rng.random() < 0.5:
            s += rng.choices(CONSONANTS, CONS_W)[0]
        return s

    syllables, seen = [], set()
    while len(syllables) < n_syllables:
        s = syllable()
        if s not in seen:
            seen.add(s)
            syllables.append(s)

    def make_word(k):
        return "".join(rng.choices(syllables, k=k))

    vocab, seen_words = [], set()
    while len(vocab) < 60:  # short high-frequency head words
        w = make_word(1)
        if w not in seen_words:
            seen_words.add(w)
            vocab.append(w)
    while len(vocab) < vocab_size:
        w = make_word(rng.choice([3, 3, 4, 4, 5]))
        if w not in seen_words and len(w) <= 14:
            seen_words.add(w)
            vocab.append(w)

    zipf = [1 / (i + 1) ** zipf_a for i in range(vocab_size)]
    corpus = " ".join(rng.choices(vocab, zipf, k=corpus_words))

    picked = rng.choices(vocab, zipf, k=passage_words)
    for i in range(0, len(picked), oov_every):
        w = make_word(rng.choice([3, 4]))
        while w in seen_words:
            w = make_word(4)
        picked[i] = w
    passage = " ".join(picked)[:passage_chars].rsplit(" ", 1)[0]
    return corpus, passage


def make_flash_rows(seed: int, mu_a: float, mu_n: float, sigma: float = 1.0, rounds: int = 200):
    """Synthetic labelled flash scores in scan-round order (2 attended of 12)."""
    g = np.random.default_rng(seed)
    rows = []
    for _ in range(rounds):
        attended = set(g.choice(12, 2, replace=False))
        rows += [
            (float(g.normal(mu_a if i in attended else mu_n, sigma)), i in attended)
            for i in range(12)
        ]
    return rows


def make_subject(seed: int, mu_a: float, mu_n: float, sigma: float = 1.0, rounds: int = 200):
    rows = make_flash_rows(seed, mu_a, mu_n, sigma, rounds)
    return SubjectModel(f"s{seed:04d}", build_pools(rows), fit_gaussians(rows))


@pytest.fixture(scope="session")
def big_text():
    return make_text(11)


@pytest.fixture(scope="session")
def big_lm(big_text):
    corpus, _ = big_text
    assert len(corpus) >= 100_000
    return build_lm(corpus)


@pytest.fixture(scope="session")
def toy_lm():
    # words: cat x3, car x1 -- small enough for hand-counted oracles
    return build_lm("cat cat cat car")
