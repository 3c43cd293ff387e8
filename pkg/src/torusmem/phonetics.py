"""Words to sound to 16-dimensional spectral fingerprints.

Pipeline for a dictionary word: CMUdict phonemes -> fixed synthetic waveform
(80 ms per phoneme at 16 kHz) -> power spectrum -> 16 log-spaced bands
between 50 Hz and 8 kHz -> unit L2 norm. Everything is deterministic: the
"noise" for stops and fricatives comes from a counter-based Philox stream
keyed by the phoneme's ARPAbet index, never from global RNG state.
"""

from __future__ import annotations

import enum
import functools
import hashlib
import logging
import re
import string
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth_constants as C

log = logging.getLogger(__name__)

ARPABET_INDEX = {sym: i for i, sym in enumerate(C.ARPABET)}
DEFAULT_SYMBOLS = tuple(string.punctuation) + ("‘", "’", "“", "”", "—", "–")

_STRESS = re.compile(r"\d")
_ALTERNATE = re.compile(r"\(\d+\)$")


class TokenFlags(enum.IntFlag):
    NONE = 0
    PUNCTUATION = 1
    OOV_SYNTHETIC = 2


def default_dictionary_path() -> Path:
    """Path of the CMUdict file bundled with the ``cmudict`` package."""
    from importlib import resources

    return Path(str(resources.files("cmudict").joinpath("data", "cmudict.dict")))


def is_punctuation(surface: str) -> bool:
    return len(surface) == 1 and not surface.isalnum()


# -- dictionary ---------------------------------------------------------------


@dataclass
class PronunciationTable:
    """Lowercase surface -> first listed pronunciation, stress stripped."""

    entries: dict = field(default_factory=dict)
    warnings: int = 0
    source: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        return word.lower() in self.entries

    def phonemes(self, word: str):
        return self.entries.get(word.lower())

    def fingerprint(self, surface: str):
        """(fingerprint, flags) for a token; memoized and safe to call from many threads."""
        if not surface:
            raise ValueError("empty token")
        hit = self._cache.get(surface)
        if hit is not None:
            return hit
        result = _fingerprint_uncached(surface, self)
        with self._lock:
            # first writer wins; the computation is pure so values always agree
            return self._cache.setdefault(surface, result)


def parse_dictionary_lines(lines, source: str = "") -> PronunciationTable:
    entries = {}
    warnings = 0
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith(";;;"):
            continue
        line = line.split("#", 1)[0].strip()
        parts = line.split()
        if len(parts) < 2:
            warnings += 1
            continue
        word, phones = parts[0], parts[1:]
        if _ALTERNATE.search(word):
            continue
        phones = tuple(_STRESS.sub("", p).upper() for p in phones)
        if any(p not in ARPABET_INDEX for p in phones):
            warnings += 1
            continue
        entries.setdefault(word.lower(), phones)
    if warnings:
        log.warning("%s: skipped %d malformed dictionary lines", source or "<lines>", warnings)
    return PronunciationTable(entries, warnings, source)


def load_dictionary(path) -> PronunciationTable:
    path = Path(path)
    with open(path, encoding="latin-1") as fh:
        return parse_dictionary_lines(fh, str(path))


# -- synthesis ----------------------------------------------------------------


def _noise(key: int, n: int) -> np.ndarray:
    raw = np.random.Philox(key=key).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-52 - 1.0


@functools.lru_cache(maxsize=None)
def phoneme_segment(symbol: str) -> np.ndarray:
    """The fixed 80 ms waveform for one phoneme."""
    if symbol not in ARPABET_INDEX:
        raise ValueError(f"unknown phoneme: {symbol!r}")
    n = C.PHONEME_SAMPLES
    t = np.arange(n) / C.SAMPLE_RATE
    if symbol in C.VOWEL_FORMANTS:
        seg = sum(a * np.sin(2 * np.pi * f * t) for a, f in zip(C.FORMANT_AMPLITUDES, C.VOWEL_FORMANTS[symbol]))
    elif symbol in C.SONORANT_HZ:
        seg = 0.8 * np.sin(2 * np.pi * C.SONORANT_HZ[symbol] * t)
    else:
        lo, hi, voiced, burst = C.NOISE_SHAPES[symbol]
        spec = np.fft.rfft(_noise(ARPABET_INDEX[symbol], n))
        freqs = np.fft.rfftfreq(n, 1 / C.SAMPLE_RATE)
        spec[(freqs < lo) | (freqs > hi)] = 0
        seg = np.fft.irfft(spec, n)
        seg *= C.NOISE_RMS / np.sqrt(np.mean(seg**2))
        if burst:
            seg *= np.exp(-t / C.STOP_DECAY_S)
        if voiced:
            seg = seg + C.VOICING_AMPLITUDE * np.sin(2 * np.pi * C.VOICING_HZ * t)
    seg = np.asarray(seg, dtype=np.float64)
    seg.setflags(write=False)
    return seg


def synthesize(phonemes) -> np.ndarray:
    if len(phonemes) == 0:
        raise ValueError("cannot synthesize an empty phoneme sequence")
    return np.concatenate([phoneme_segment(p) for p in phonemes])


# -- spectral fingerprint -----------------------------------------------------


def band_edges() -> np.ndarray:
    return np.geomspace(C.BAND_LOW_HZ, C.BAND_HIGH_HZ, C.N_BANDS + 1)


@functools.lru_cache(maxsize=None)
def _band_slices(nfft: int):
    freqs = np.fft.rfftfreq(nfft, 1 / C.SAMPLE_RATE)
    edges = band_edges()
    lo = np.searchsorted(freqs, edges[:-1], side="left")
    hi = np.searchsorted(freqs, edges[1:], side="left")
    hi[-1] = np.searchsorted(freqs, edges[-1], side="right")
    return tuple(zip(lo.tolist(), hi.tolist()))


def fingerprint_batch(waves: np.ndarray) -> np.ndarray:
    """Fingerprints for a (batch, samples) array of equal-length waveforms."""
    waves = np.atleast_2d(np.asarray(waves, dtype=np.float64))
    n = waves.shape[1]
    if n < 256:
        raise ValueError(f"need at least 256 samples, got {n}")
    nfft = 1 << (n - 1).bit_length()
    power = np.abs(np.fft.rfft(waves, nfft, axis=1)) ** 2
    bands = np.stack([power[:, lo:hi].sum(axis=1) for lo, hi in _band_slices(nfft)], axis=1)
    norms = np.sqrt(np.sum(bands * bands, axis=1))
    if np.any(norms == 0):
        raise ValueError("waveform has no energy in the analysis bands")
    return bands / norms[:, None]


def fingerprint(wave) -> np.ndarray:
    return fingerprint_batch(np.asarray(wave)[None, :])[0]


def punctuation_fingerprint(symbol: str) -> np.ndarray:
    raw = _noise((1 << 64) | ord(symbol), C.N_BANDS)
    v = np.abs(raw) + 1e-3
    return v / np.linalg.norm(v)


def oov_fingerprint(surface: str) -> np.ndarray:
    digest = hashlib.blake2b(surface.lower().encode("utf-8"), digest_size=32, person=b"torusmem-oov").digest()
    v = (np.frombuffer(digest, dtype="<u2").astype(np.float64) + 1.0) / 65536.0
    return v / np.linalg.norm(v)


def _fingerprint_uncached(surface: str, table: PronunciationTable):
    if is_punctuation(surface):
        return punctuation_fingerprint(surface), TokenFlags.PUNCTUATION
    phones = table.phonemes(surface)
    if phones is None:
        return oov_fingerprint(surface), TokenFlags.OOV_SYNTHETIC
    return fingerprint(synthesize(phones)), TokenFlags.NONE


def fingerprint_token(surface: str, table: PronunciationTable):
    return table.fingerprint(surface)


# -- vocabulary index ---------------------------------------------------------

VOCAB_MAGIC = b"PTMV"
VOCAB_FORMAT_VERSION = 1


class VocabFormatError(ValueError):
    pass


@dataclass(eq=False)
class VocabIndex:
    surfaces: list
    vectors: np.ndarray  # (n, 16) float32, unit rows
    flags: np.ndarray  # (n,) uint8
    synth_version: int = C.SYNTH_VERSION

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.flags = np.asarray(self.flags, dtype=np.uint8)
        if any(a >= b for a, b in zip(self.surfaces, self.surfaces[1:])):
            raise ValueError("vocabulary surfaces must be unique and lexicographically sorted")
        if self.vectors.shape != (len(self.surfaces), C.N_BANDS) or self.flags.shape != (len(self.surfaces),):
            raise ValueError("vocabulary vectors and flags must align with surfaces")
        self._scan = self.vectors.astype(np.float64)
        self._position = {s: i for i, s in enumerate(self.surfaces)}

    def __len__(self):
        return len(self.surfaces)

    def __contains__(self, surface):
        return surface in self._position

    def vector(self, surface: str) -> np.ndarray:
        return self.vectors[self._position[surface]]

    def counts(self) -> dict:
        return {
            "entries": len(self),
            "punctuation": int(np.count_nonzero(self.flags & TokenFlags.PUNCTUATION)),
            "oov_synthetic": int(np.count_nonzero(self.flags & TokenFlags.OOV_SYNTHETIC)),
        }

    def to_bytes(self) -> bytes:
        out = [VOCAB_MAGIC, struct.pack("<HIQ", VOCAB_FORMAT_VERSION, self.synth_version, len(self))]
        for surface, flag, vec in zip(self.surfaces, self.flags, self.vectors):
            raw = surface.encode("utf-8")
            out.append(struct.pack("<H", len(raw)))
            out.append(raw)
            out.append(struct.pack("<B", int(flag)))
            out.append(vec.astype("<f4").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "VocabIndex":
        if data[:4] != VOCAB_MAGIC:
            raise VocabFormatError("bad magic: not a vocabulary index")
        try:
            version, synth_version, count = struct.unpack_from("<HIQ", data, 4)
            if version != VOCAB_FORMAT_VERSION:
                raise VocabFormatError(f"unsupported vocabulary index version {version}")
            pos = 4 + struct.calcsize("<HIQ")
            surfaces, flags = [], np.empty(count, dtype=np.uint8)
            vectors = np.empty((count, C.N_BANDS), dtype=np.float32)
            for i in range(count):
                (length,) = struct.unpack_from("<H", data, pos)
                pos += 2
                surfaces.append(data[pos : pos + length].decode("utf-8"))
                pos += length
                flags[i] = data[pos]
                pos += 1
                vectors[i] = np.frombuffer(data, dtype="<f4", count=C.N_BANDS, offset=pos)
                pos += 4 * C.N_BANDS
        except (struct.error, IndexError, ValueError) as exc:
            if isinstance(exc, VocabFormatError):
                raise
            raise VocabFormatError(f"truncated vocabulary index: {exc}") from exc
        return cls(surfaces, vectors, flags, synth_version)

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "VocabIndex":
        return cls.from_bytes(Path(path).read_bytes())


def _dictionary_fingerprints(table: PronunciationTable, words, chunk: int = 1024, workers=None) -> dict:
    segments = np.stack([phoneme_segment(sym) for sym in C.ARPABET])
    by_length = {}
    for w in words:
        by_length.setdefault(len(table.entries[w]), []).append(w)
    batches = []
    for length, group in sorted(by_length.items()):
        for start in range(0, len(group), chunk):
            batches.append((length, group[start : start + chunk]))

    def run(item):
        length, batch = item
        codes = np.array([[ARPABET_INDEX[p] for p in table.entries[w]] for w in batch])
        waves = segments[codes].reshape(len(batch), length * C.PHONEME_SAMPLES)
        return batch, fingerprint_batch(waves)

    out = {}
    # rows are transformed independently, so thread scheduling cannot change results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for batch, fps in pool.map(run, batches):
            out.update(zip(batch, fps))
    return out


def build_vocab_index(table: PronunciationTable, extra_symbols=DEFAULT_SYMBOLS) -> VocabIndex:
    fps = _dictionary_fingerprints(table, table.entries)
    flags = dict.fromkeys(fps, TokenFlags.NONE)
    for sym in extra_symbols:
        if sym not in fps:
            fps[sym] = punctuation_fingerprint(sym)
            flags[sym] = TokenFlags.PUNCTUATION
    surfaces = sorted(fps)
    vectors = np.array([fps[s] for s in surfaces], dtype=np.float32).reshape(-1, C.N_BANDS)
    return VocabIndex(surfaces, vectors, np.array([flags[s] for s in surfaces], dtype=np.uint8))


def nearest_indices(index: VocabIndex, probe, k: int):
    """Indices and cosines of the top-k entries; ties go to the lexicographically smaller surface."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        raise ValueError("empty vocabulary index")
    p = np.asarray(probe, dtype=np.float64)
    norm = np.linalg.norm(p)
    cos = index._scan @ (p / norm) if norm > 0 else np.zeros(len(index))
    if k < len(index):
        kth = np.partition(cos, len(cos) - k)[len(cos) - k]
        pool = np.flatnonzero(cos >= kth)
    else:
        pool = np.arange(len(index))
    order = np.lexsort((pool, -cos[pool]))[:k]
    chosen = pool[order]
    return chosen, cos[chosen]


def nearest(index: VocabIndex, probe, k: int):
    idx, cos = nearest_indices(index, probe, k)
    return [(index.surfaces[i], float(c)) for i, c in zip(idx, cos)]
