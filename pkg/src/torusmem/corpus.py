"""Seeded generator of plain English narrative for long-stream experiments.

Sentences come from a small phrase grammar over common words, so a bigram
model trained on one seed transfers to text drawn from another.
"""

from __future__ import annotations

import numpy as np

NAMES = ["Martha", "Thomas", "Alice", "Walter", "Helen", "Arthur", "Clara", "Henry", "Rose", "Samuel"]
PLACES = ["harbor", "village", "forest", "river", "market", "garden", "castle", "valley", "station", "library"]
NOUNS = [
    "door", "window", "table", "letter", "lantern", "boat", "horse", "road", "bridge", "house",
    "stone", "tree", "hill", "field", "wall", "basket", "coat", "book", "candle", "bell",
    "ship", "bread", "key", "box", "chair", "clock", "map", "rope", "cup", "fire",
    "night", "morning", "rain", "wind", "light", "water", "voice", "sound", "storm", "road",
]
ADJECTIVES = [
    "old", "small", "dark", "quiet", "heavy", "bright", "cold", "narrow", "long", "warm",
    "empty", "broken", "green", "white", "strange", "gentle", "distant", "wet", "tall", "little",
]
VERBS_PAST = [
    "opened", "closed", "carried", "found", "watched", "followed", "lifted", "pushed", "turned", "held",
    "crossed", "reached", "left", "saw", "heard", "touched", "pulled", "filled", "painted", "moved",
]
INTRANSITIVE = ["waited", "listened", "smiled", "walked", "rested", "laughed", "stopped", "returned", "slept", "worked"]
PREPOSITIONS = ["near", "behind", "under", "beside", "across", "inside", "toward", "above", "along", "past"]
ADVERBS = ["slowly", "quietly", "again", "carefully", "suddenly", "together", "alone", "early", "later", "often"]
TIMES = ["that night", "in the morning", "after the storm", "before dawn", "by the evening", "in the spring"]
CONNECT = ["and", "but", "so", "while", "because"]


class _Grammar:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)

    def pick(self, words):
        return words[int(self.rng.integers(len(words)))]

    def noun_phrase(self):
        det = self.pick(["the", "the", "a", "her", "his", "their"])
        if det == "a":
            adj = self.pick(ADJECTIVES)
            det = "an" if adj[0] in "aeiou" else "a"
            return [det, adj, self.pick(NOUNS)]
        if self.rng.random() < 0.5:
            return [det, self.pick(ADJECTIVES), self.pick(NOUNS)]
        return [det, self.pick(NOUNS)]

    def subject(self):
        r = self.rng.random()
        if r < 0.35:
            return [self.pick(NAMES)]
        if r < 0.6:
            return [self.pick(["she", "he", "they", "we"])]
        return self.noun_phrase()

    def clause(self):
        words = self.subject()
        if self.rng.random() < 0.6:
            words += [self.pick(VERBS_PAST)] + self.noun_phrase()
        else:
            words += [self.pick(INTRANSITIVE)]
        if self.rng.random() < 0.5:
            words += [self.pick(PREPOSITIONS), "the", self.pick(PLACES)]
        if self.rng.random() < 0.25:
            words += [self.pick(ADVERBS)]
        return words

    def sentence(self):
        words = []
        if self.rng.random() < 0.2:
            words += self.pick(TIMES).split() + [","]
        words += self.clause()
        if self.rng.random() < 0.35:
            words += [",", self.pick(CONNECT)] + self.clause()
        words[0] = words[0][0].upper() + words[0][1:]
        return words + [self.pick([".", ".", ".", "!", "?"])]


def synthetic_tokens(n_tokens: int, seed: int = 0) -> list:
    """Exactly ``n_tokens`` tokens of generated narrative."""
    g = _Grammar(seed)
    out = []
    while len(out) < n_tokens:
        out.extend(g.sentence())
    return out[:n_tokens]


def synthetic_text(n_tokens: int, seed: int = 0) -> str:
    text = " ".join(synthetic_tokens(n_tokens, seed))
    for p in ",.!?":
        text = text.replace(f" {p}", p)
    return text
