"""Decode side: invert one step, broadcast against the lexicon, fuse with a prior.

For a bridge position t the force vector is recovered exactly from the stored
pair (S_{t-1}, S_t). Cosine similarity against the vocabulary prunes to the
top-k candidates; each candidate is then scored by the transition error of
re-running the step with its fingerprint, softmaxed at sharpness gamma, and
mixed with the semantic prior as alpha * prior + (1 - alpha) * signal.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import manifold as M
from .memory import MemoryTrace, tokenize
from .phonetics import VocabIndex, nearest_indices

log = logging.getLogger(__name__)

ENDPOINT_ENV = "TORUSMEM_PRIOR_ENDPOINT"


@dataclass(frozen=True)
class DecoderConfig:
    alpha: float = 0.4
    gamma: float = 25.0
    top_k: int = 32
    unknown_threshold: float = 0.55
    unknown_marker: str = "<aba?>"
    context_window: int = 32  # prior sees at most this many preceding tokens

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0 <= self.unknown_threshold <= 1:
            raise ValueError("unknown_threshold must be in [0, 1]")


# -- priors -------------------------------------------------------------------


class PriorUnavailable(RuntimeError):
    """The prior could not produce scores for this position."""


class SemanticPrior(Protocol):
    def score(self, context: list, candidates: list) -> np.ndarray: ...


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = np.exp(z - np.max(z))
    return z / z.sum()


class UniformPrior:
    def score(self, context, candidates):
        return np.full(len(candidates), 1.0 / len(candidates))

    def describe(self):
        return {"kind": "uniform"}


class NgramPrior:
    """Bigram model over lowercase tokens with add-k smoothing."""

    def __init__(self, tokens, k: float = 0.1):
        tokens = [t.lower() for t in tokens]
        if not tokens:
            raise ValueError("empty corpus")
        self.k = k
        self.unigrams = Counter(tokens)
        self.bigrams = Counter(zip(tokens, tokens[1:]))
        self.total = len(tokens)
        # +1 reserves a slot for unseen words
        self.vocab_size = len(self.unigrams) + 1

    @classmethod
    def from_text(cls, text: str, k: float = 0.1) -> "NgramPrior":
        return cls(tokenize(text), k)

    def prob(self, word: str, prev: str = None) -> float:
        word = word.lower()
        if prev is None:
            return (self.unigrams[word] + self.k) / (self.total + self.k * self.vocab_size)
        prev = prev.lower()
        return (self.bigrams[(prev, word)] + self.k) / (self.unigrams[prev] + self.k * self.vocab_size)

    def score(self, context, candidates):
        prev = context[-1] if context else None
        p = np.array([self.prob(c, prev) for c in candidates])
        return p / p.sum()

    def describe(self):
        return {"kind": "ngram", "order": 2, "k": self.k, "types": len(self.unigrams), "tokens": self.total}


def ngram_train(corpus_path, k: float = 0.1) -> NgramPrior:
    with open(corpus_path, encoding="utf-8") as fh:
        return NgramPrior.from_text(fh.read(), k)


@dataclass
class RemotePrior:
    """Scores candidates with an HTTP service.

    Request: {"context": [...], "candidates": [...]}; response {"logprobs": [...]}.
    One retry on transport failure, then :class:`PriorUnavailable`.
    """

    endpoint: str
    timeout: float = 10.0
    retries: int = 1
    calls: int = field(default=0, init=False)

    def _post(self, payload: bytes):
        req = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}, method="POST"
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            if resp.status != 200:
                raise PriorUnavailable(f"prior service returned HTTP {resp.status}")
            return json.loads(resp.read().decode("utf-8"))

    def score(self, context, candidates):
        payload = json.dumps({"context": list(context), "candidates": list(candidates)}).encode("utf-8")
        last = None
        for _ in range(self.retries + 1):
            self.calls += 1
            try:
                body = self._post(payload)
                break
            except (urllib.error.URLError, OSError, ValueError, PriorUnavailable) as exc:
                last = exc
        else:
            raise PriorUnavailable(f"prior service unreachable: {last}") from last
        logprobs = body.get("logprobs") if isinstance(body, dict) else None
        if not isinstance(logprobs, list) or len(logprobs) != len(candidates):
            raise PriorUnavailable("malformed prior response: logprobs missing or misaligned with candidates")
        try:
            values = np.array(logprobs, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise PriorUnavailable(f"malformed prior response: {exc}") from exc
        if not np.all(np.isfinite(values)):
            raise PriorUnavailable("malformed prior response: non-finite logprobs")
        return softmax(values)

    def describe(self):
        return {"kind": "remote", "endpoint": self.endpoint, "timeout": self.timeout}


def remote_prior(endpoint: str = None, timeout: float = 10.0) -> RemotePrior:
    endpoint = os.environ.get(ENDPOINT_ENV) or endpoint
    if not endpoint:
        raise ValueError(f"no prior endpoint configured (set {ENDPOINT_ENV} or pass one)")
    return RemotePrior(endpoint, timeout)


# -- decoding -----------------------------------------------------------------


class Outcome(str, enum.Enum):
    ANCHOR_HIT = "anchor_hit"
    SIGNAL_LED = "signal_led"
    PRIOR_LED = "prior_led"
    CONSENSUS = "consensus"
    UNKNOWN = "unknown"


@dataclass
class Candidate:
    surface: str
    cosine: float
    p_signal: float
    p_prior: float
    p_total: float


@dataclass
class PositionLog:
    position: int
    v_rec: np.ndarray
    candidates: list
    chosen: str
    outcome: Outcome
    alpha: float
    prior_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "chosen": self.chosen,
            "outcome": self.outcome.value,
            "alpha": self.alpha,
            "prior_fallback": self.prior_fallback,
            "candidates": [c.__dict__ for c in self.candidates],
        }


class VersionMismatch(ValueError):
    pass


def signal_probs(R, S_prev: M.TorusState, S_t: M.TorusState, fingerprints, gamma: float) -> np.ndarray:
    """softmax(-gamma * d) where d is the torus distance between the re-run step and S_t."""
    fps = np.atleast_2d(np.asarray(fingerprints, dtype=R.dtype))
    rotated = M.rotate(R, S_prev.coords)
    # row-wise identical to evolve(R, S_prev, fp) for each candidate
    landed = M.mod1(rotated[None, :] + fps)
    d = M.wrap_distance(landed, S_t.coords[None, :])
    return softmax(-gamma * d)


def lift_force(v_rec: np.ndarray, tol: float = 1e-5) -> np.ndarray:
    """Undo mod-1 wrap of tiny negative rounding: fingerprints are non-negative, so 0.99999... means -0."""
    v = np.asarray(v_rec, dtype=np.float64).copy()
    v[v > 1 - tol] -= 1
    return v


def _argmax_lex(values: np.ndarray, surfaces: list) -> int:
    best = np.max(values)
    ties = [i for i in np.flatnonzero(values == best)]
    return min(ties, key=lambda i: surfaces[i])


def decode_position(trace: MemoryTrace, t: int, vocab: VocabIndex, prior, config: DecoderConfig, *, context=(), rotation=None):
    """Reconstruct token ``t`` (1-based, as in S_t) and its decision log."""
    if not 1 <= t <= trace.token_count:
        raise IndexError(f"position {t} outside 1..{trace.token_count}")
    pos = t - 1
    if pos in trace.anchors:
        surface = trace.anchors[pos]
        cand = Candidate(surface, 1.0, 1.0, 1.0, 1.0)
        return surface, PositionLog(pos, np.zeros(M.DIM), [cand], surface, Outcome.ANCHOR_HIT, config.alpha)

    R = rotation or trace.rotation()
    S_prev, S_t = trace.state(t - 1), trace.state(t)
    v_rec = M.invert_step(R, S_t, S_prev)
    idx, cos = nearest_indices(vocab, lift_force(v_rec), config.top_k)
    surfaces = [vocab.surfaces[i] for i in idx]
    if cos[0] < config.unknown_threshold:
        cands = [Candidate(s, float(c), math.nan, math.nan, math.nan) for s, c in zip(surfaces, cos)]
        return config.unknown_marker, PositionLog(pos, v_rec, cands, config.unknown_marker, Outcome.UNKNOWN, config.alpha)

    p_signal = signal_probs(R, S_prev, S_t, vocab.vectors[idx], config.gamma)
    alpha, fallback = config.alpha, False
    try:
        p_prior = np.asarray(prior.score(list(context), surfaces), dtype=np.float64)
    except PriorUnavailable as exc:
        log.warning("position %d: prior unavailable (%s); using signal only", pos, exc)
        p_prior = np.full(len(surfaces), 1.0 / len(surfaces))
        alpha, fallback = 0.0, True
    p_total = alpha * p_prior + (1 - alpha) * p_signal

    win = _argmax_lex(p_total, surfaces)
    by_signal = _argmax_lex(p_signal, surfaces)
    by_prior = _argmax_lex(p_prior, surfaces)
    if win == by_signal == by_prior:
        outcome = Outcome.CONSENSUS
    elif win == by_signal:
        outcome = Outcome.SIGNAL_LED
    elif win == by_prior:
        outcome = Outcome.PRIOR_LED
    else:
        outcome = Outcome.CONSENSUS
    cands = [
        Candidate(s, float(c), float(ps), float(pp), float(pt))
        for s, c, ps, pp, pt in zip(surfaces, cos, p_signal, p_prior, p_total)
    ]
    return surfaces[win], PositionLog(pos, v_rec, cands, surfaces[win], outcome, alpha, fallback)


def reconstruct(trace: MemoryTrace, vocab: VocabIndex, prior, config: DecoderConfig = DecoderConfig()):
    """Greedy left-to-right decode; the prior sees the already reconstructed prefix."""
    if trace.synth_version != vocab.synth_version:
        raise VersionMismatch(
            f"trace synthesized with constants v{trace.synth_version}, vocabulary index is v{vocab.synth_version}"
        )
    R = trace.rotation()
    tokens, logs = [], []
    for t in range(1, trace.token_count + 1):
        context = tokens[-config.context_window :] if config.context_window else []
        surface, entry = decode_position(trace, t, vocab, prior, config, context=context, rotation=R)
        tokens.append(surface)
        logs.append(entry)
    return tokens, logs
