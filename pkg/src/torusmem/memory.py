"""Encode side: tokens -> anchors + state trajectory -> trace file.

Trace binary layout (little-endian):

    "PTMT" | version u16 | dim u16 | precision u8 | n_primes u8 | primes u32*n
    | synth_version u32 | token_count u64 | anchor_count u64
    | anchors: (position u64, length u16, utf-8 bytes)*
    | states: (token_count + 1) * dim floats (f32 single, f64 double)
    | crc32 u32 over everything before it
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import manifold as M
from .phonetics import PronunciationTable, TokenFlags, is_punctuation
from .synth_constants import SYNTH_VERSION

# -- tokenization -------------------------------------------------------------


def _split_edges(chunk: str):
    lead = []
    while chunk and not chunk[0].isalnum():
        lead.append(chunk[0])
        chunk = chunk[1:]
    trail = []
    while chunk and not chunk[-1].isalnum():
        trail.append(chunk[-1])
        chunk = chunk[:-1]
    return lead, chunk, trail[::-1]


def tokenize(text: str) -> list:
    """Whitespace split, edge punctuation detached, internal hyphens split.

    >>> tokenize("Oh, please!")
    ['Oh', ',', 'please', '!']
    """
    out = []
    for chunk in text.split():
        lead, core, trail = _split_edges(chunk)
        out.extend(lead)
        pieces = [p for p in core.split("-") if p]
        for piece in pieces:
            # a piece like "word." left behind by hyphen splitting
            plead, pcore, ptrail = _split_edges(piece)
            out.extend(plead)
            if pcore:
                out.append(pcore)
            out.extend(ptrail)
        out.extend(trail)
    return out


@dataclass
class TokenRecord:
    surface: str
    position: int
    is_anchor: bool = False
    fingerprint_flags: TokenFlags = TokenFlags.NONE


# -- importance ---------------------------------------------------------------


@dataclass
class CorpusStats:
    """Unigram counts over lowercase tokens, add-one smoothed."""

    counts: Counter
    total: int

    @classmethod
    def from_tokens(cls, tokens) -> "CorpusStats":
        counts = Counter(t.lower() for t in tokens if not is_punctuation(t))
        return cls(counts, sum(counts.values()))

    @classmethod
    def from_text(cls, text: str) -> "CorpusStats":
        return cls.from_tokens(tokenize(text))

    @property
    def max_surprisal(self) -> float:
        return -math.log2(1 / (self.total + len(self.counts) + 1))

    def surprisal(self, token: str) -> float:
        # one extra type reserves mass for unseen words
        p = (self.counts.get(token.lower(), 0) + 1) / (self.total + len(self.counts) + 1)
        return -math.log2(p)


def importance(token: str, stats: CorpusStats) -> float:
    if is_punctuation(token):
        return 0.0
    return stats.surprisal(token)


class AnchorMode(str, enum.Enum):
    TARGET_RATE = "target_rate"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class AnchorPolicy:
    mode: AnchorMode = AnchorMode.TARGET_RATE
    target_drop_rate: float = 0.72
    surprisal_threshold: float = math.inf
    always_anchor_oov: bool = False
    always_anchor_numerals: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", AnchorMode(self.mode))
        if self.mode is AnchorMode.TARGET_RATE and not 0 < self.target_drop_rate <= 1:
            raise ValueError("target_drop_rate must be in (0, 1]")

    def anchor_budget(self, n: int) -> int:
        # the small slack absorbs binary noise such as (1 - 0.72) * 100 = 28.000000000000004
        return min(n, math.ceil((1 - self.target_drop_rate) * n - 1e-9))

    def summary(self) -> str:
        if self.mode is AnchorMode.TARGET_RATE:
            return f"target_rate:{self.target_drop_rate:g}"
        return f"threshold:{self.surprisal_threshold:g}"


def _forced(token: str, policy: AnchorPolicy, table) -> bool:
    if policy.always_anchor_numerals and any(ch.isdigit() for ch in token):
        return True
    if policy.always_anchor_oov and table is not None and not is_punctuation(token):
        return token not in table
    return False


def select_anchors(tokens, policy: AnchorPolicy, stats: CorpusStats, table: PronunciationTable = None) -> list:
    """Anchor flag per token.

    Target-rate mode keeps the ceil((1 - drop_rate) * N) highest-importance
    tokens, earlier position first on ties; forced anchors (OOV, numerals)
    take budget before anything else.
    """
    scores = [importance(t, stats) for t in tokens]
    forced = [_forced(t, policy, table) for t in tokens]
    if policy.mode is AnchorMode.THRESHOLD:
        return [f or s >= policy.surprisal_threshold for s, f in zip(scores, forced)]
    budget = policy.anchor_budget(len(tokens))
    order = sorted(range(len(tokens)), key=lambda i: (not forced[i], -scores[i], i))
    chosen = set(order[:budget])
    return [i in chosen for i in range(len(tokens))]


# -- trace --------------------------------------------------------------------


@dataclass(eq=False)
class MemoryTrace:
    primes: tuple
    precision: M.Precision
    states: np.ndarray  # (token_count + 1, 16); row 0 is the origin
    anchors: dict = field(default_factory=dict)  # position -> surface
    synth_version: int = SYNTH_VERSION

    def __post_init__(self):
        self.precision = M.Precision(self.precision)
        self.states = np.asarray(self.states, dtype=self.precision.dtype).reshape(-1, M.DIM)
        self.anchors = dict(sorted(self.anchors.items()))
        if np.any(self.states[0] != 0):
            raise ValueError("trajectory must start at the origin")
        if any(not 0 <= p < self.token_count for p in self.anchors):
            raise ValueError("anchor position out of range")

    @property
    def token_count(self) -> int:
        return self.states.shape[0] - 1

    def state(self, t: int) -> M.TorusState:
        return M.TorusState(self.states[t], self.precision)

    def rotation(self) -> M.RotationOperator:
        return M.make_rotation(self.primes, self.precision)

    @property
    def signal_bytes(self) -> int:
        return self.states.size * self.states.itemsize

    def __eq__(self, other):
        if not isinstance(other, MemoryTrace):
            return NotImplemented
        return (
            self.primes == other.primes
            and self.precision is other.precision
            and self.synth_version == other.synth_version
            and self.anchors == other.anchors
            and self.states.dtype == other.states.dtype
            and self.states.tobytes() == other.states.tobytes()
        )


def encode(tokens, rotation: M.RotationOperator, table: PronunciationTable, anchors=None) -> MemoryTrace:
    """Fold the token stream through the recurrence S_t = R S_{t-1} + phi(x_t) mod 1.

    ``anchors`` is an optional per-token flag list; anchored surfaces are kept verbatim.
    """
    tokens = list(tokens)
    states = np.zeros((len(tokens) + 1, M.DIM), dtype=rotation.dtype)
    state = M.TorusState.zero(rotation.precision)
    for t, tok in enumerate(tokens, start=1):
        fp, _ = table.fingerprint(tok)
        state = M.evolve(rotation, state, fp)
        states[t] = state.coords
    kept = {i: tok for i, (tok, a) in enumerate(zip(tokens, anchors or ())) if a}
    return MemoryTrace(rotation.primes, rotation.precision, states, kept)


def token_records(tokens, anchors, table: PronunciationTable) -> list:
    return [
        TokenRecord(tok, i, bool(a), table.fingerprint(tok)[1]) for i, (tok, a) in enumerate(zip(tokens, anchors))
    ]


TRACE_MAGIC = b"PTMT"
TRACE_VERSION = 1


class TraceError(ValueError):
    code = "trace_error"


class BadMagicError(TraceError):
    code = "bad_magic"


class VersionMismatchError(TraceError):
    code = "version_mismatch"


class TruncatedTraceError(TraceError):
    code = "truncated"


class ChecksumError(TraceError):
    code = "checksum"


def trace_to_bytes(trace: MemoryTrace) -> bytes:
    parts = [
        TRACE_MAGIC,
        struct.pack("<HHBB", TRACE_VERSION, M.DIM, trace.precision.code, len(trace.primes)),
        struct.pack(f"<{len(trace.primes)}I", *trace.primes),
        struct.pack("<IQQ", trace.synth_version, trace.token_count, len(trace.anchors)),
    ]
    for pos, surface in trace.anchors.items():
        raw = surface.encode("utf-8")
        parts.append(struct.pack("<QH", pos, len(raw)))
        parts.append(raw)
    parts.append(trace.states.astype(trace.states.dtype.newbyteorder("<")).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedTraceError(f"trace truncated at byte {len(self.data)} (needed {self.pos + n})")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def trace_from_bytes(data: bytes) -> MemoryTrace:
    if len(data) >= 4 and data[:4] != TRACE_MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {TRACE_MAGIC!r}")
    r = _Reader(data)
    r.take(4)
    version, dim, precision_code, n_primes = r.unpack("<HHBB")
    if version != TRACE_VERSION:
        raise VersionMismatchError(f"trace format version {version}, this build reads {TRACE_VERSION}")
    if dim != M.DIM:
        raise VersionMismatchError(f"trace dimension {dim}, expected {M.DIM}")
    primes = r.unpack(f"<{n_primes}I")
    synth_version, token_count, anchor_count = r.unpack("<IQQ")
    anchors = {}
    for _ in range(anchor_count):
        pos, length = r.unpack("<QH")
        anchors[pos] = r.take(length).decode("utf-8")
    precision = M.Precision.from_code(precision_code)
    dtype = precision.dtype.newbyteorder("<")
    raw = r.take((token_count + 1) * dim * dtype.itemsize)
    (crc,) = r.unpack("<I")
    if r.pos != len(data):
        raise TraceError(f"{len(data) - r.pos} trailing bytes after checksum")
    if zlib.crc32(data[: r.pos - 4]) != crc:
        raise ChecksumError("trace checksum mismatch")
    states = np.frombuffer(raw, dtype=dtype).astype(precision.dtype).reshape(token_count + 1, dim)
    return MemoryTrace(tuple(primes), precision, states, anchors, synth_version)


def write_trace(trace: MemoryTrace, path) -> int:
    data = trace_to_bytes(trace)
    Path(path).write_bytes(data)
    return len(data)


def read_trace(path) -> MemoryTrace:
    return trace_from_bytes(Path(path).read_bytes())


def header_bytes(n_primes: int = M.N_ROTORS) -> int:
    return 4 + struct.calcsize("<HHBB") + 4 * n_primes + struct.calcsize("<IQQ")


def anchor_table_bytes(anchors: dict) -> int:
    return sum(struct.calcsize("<QH") + len(s.encode("utf-8")) for s in anchors.values())
