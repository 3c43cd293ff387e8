"""Audit, memory accounting, closed-form bounds and latency measurement.

All byte arithmetic is integer; megabytes (10**6 bytes) appear only when
rendering reports.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import manifold as M
from .memory import MemoryTrace
from .phonetics import PronunciationTable
from .resonance import DecoderConfig, UniformPrior, decode_position

REPORT_SCHEMA_VERSION = 1
DEFAULT_KV_BYTES_PER_TOKEN = 192_000
HOMOPHONE_COSINE = 0.999
DRIFT_COSINE = 0.8
MB = 10**6


class ErrorClass(str, enum.Enum):
    EXACT = "exact"
    HOMOPHONE = "homophone"
    PHONETIC_DRIFT = "phonetic_drift"
    UNKNOWN_MARKER = "unknown_marker"
    OTHER = "other"


def classify(original: str, recon: str, is_anchor: bool, table: PronunciationTable, marker="<aba?>") -> ErrorClass:
    same = original == recon if is_anchor else original.lower() == recon.lower()
    if same:
        return ErrorClass.EXACT
    if recon == marker:
        return ErrorClass.UNKNOWN_MARKER
    a, _ = table.fingerprint(original)
    b, _ = table.fingerprint(recon)
    cos = float(np.dot(a, b))
    if cos >= HOMOPHONE_COSINE:
        return ErrorClass.HOMOPHONE
    if cos >= DRIFT_COSINE:
        return ErrorClass.PHONETIC_DRIFT
    return ErrorClass.OTHER


@dataclass
class MemoryFootprint:
    baseline_bytes: int
    sparse_anchor_bytes: int
    signal_bytes: int

    @property
    def net_compression(self) -> float:
        return self.baseline_bytes / (self.sparse_anchor_bytes + self.signal_bytes)

    @property
    def signal_to_state_ratio(self):
        # only meaningful when nothing is kept in the dense cache
        return self.baseline_bytes / self.signal_bytes if self.sparse_anchor_bytes == 0 else None

    def to_dict(self):
        return {
            "baseline_bytes": self.baseline_bytes,
            "sparse_anchor_bytes": self.sparse_anchor_bytes,
            "signal_bytes": self.signal_bytes,
            "net_compression": self.net_compression,
            "signal_to_state_ratio": self.signal_to_state_ratio,
        }


def memory_footprint(token_count: int, anchor_count: int, kv_bytes_per_token: int = DEFAULT_KV_BYTES_PER_TOKEN,
                     dim: int = M.DIM, float_bytes: int = 4) -> MemoryFootprint:
    return MemoryFootprint(
        baseline_bytes=token_count * kv_bytes_per_token,
        sparse_anchor_bytes=anchor_count * kv_bytes_per_token,
        signal_bytes=(token_count + 1) * dim * float_bytes,
    )


@dataclass
class AuditReport:
    token_count: int
    anchor_count: int
    exact_matches: int
    errors: dict
    memory: MemoryFootprint
    window_size: int
    window_accuracies: list
    classes: list = field(default_factory=list, repr=False)
    examples: dict = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.exact_matches / self.token_count if self.token_count else 1.0

    @property
    def drop_rate(self) -> float:
        return 1 - self.anchor_count / self.token_count if self.token_count else 1.0

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "token_count": self.token_count,
            "anchor_count": self.anchor_count,
            "drop_rate": self.drop_rate,
            "exact_matches": self.exact_matches,
            "accuracy": self.accuracy,
            "errors": dict(self.errors),
            "memory": self.memory.to_dict(),
            "window_size": self.window_size,
            "window_accuracies": list(self.window_accuracies),
            "examples": {k: list(v) for k, v in self.examples.items()},
        }


def audit(original, reconstructed, trace: MemoryTrace, table: PronunciationTable,
          kv_bytes_per_token: int = DEFAULT_KV_BYTES_PER_TOKEN, window_size: int = 200,
          marker: str = "<aba?>", max_examples: int = 20) -> AuditReport:
    if len(original) != len(reconstructed):
        raise ValueError(f"length mismatch: {len(original)} original vs {len(reconstructed)} reconstructed tokens")
    classes = [
        classify(o, r, i in trace.anchors, table, marker) for i, (o, r) in enumerate(zip(original, reconstructed))
    ]
    counts = {c.value: 0 for c in ErrorClass if c is not ErrorClass.EXACT}
    examples = {c.value: [] for c in ErrorClass if c is not ErrorClass.EXACT}
    for o, r, c in zip(original, reconstructed, classes):
        if c is ErrorClass.EXACT:
            continue
        counts[c.value] += 1
        if len(examples[c.value]) < max_examples:
            examples[c.value].append([o, r])
    matches = [c is ErrorClass.EXACT for c in classes]
    return AuditReport(
        token_count=len(original),
        anchor_count=len(trace.anchors),
        exact_matches=sum(matches),
        errors=counts,
        memory=memory_footprint(len(original), len(trace.anchors), kv_bytes_per_token,
                                float_bytes=trace.states.itemsize),
        window_size=window_size,
        window_accuracies=windowed_accuracy(matches, window_size),
        classes=classes,
        examples=examples,
    )


def windowed_accuracy(matches, window_size: int) -> list:
    """Means over consecutive non-overlapping windows; a short tail window is kept."""
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    m = np.asarray(matches, dtype=np.float64)
    return [float(m[i : i + window_size].mean()) for i in range(0, len(m), window_size)]


def collision_probability(epsilon: float, n_tokens: float, dims: int = M.DIM) -> dict:
    """Volume of an epsilon-ball in ``dims`` dimensions and the birthday-bound collision chance."""
    if dims % 2:
        raise ValueError("dims must be even")
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must be in (0, 0.5)")
    v_spot = math.pi ** (dims // 2) / math.factorial(dims // 2) * epsilon**dims
    p = -math.expm1(-(n_tokens**2) * v_spot / 2)
    return {"v_spot": v_spot, "p_collision": p}


def drift_bound(t: float, machine_epsilon: float = float(np.finfo(np.float32).eps)) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    return math.sqrt(t) * machine_epsilon


def cycle_length_bound(significand_bits: int, n_rotors: int) -> int:
    if significand_bits < 1 or n_rotors < 1:
        raise ValueError("arguments must be positive")
    return 2 ** (significand_bits * n_rotors)


# -- latency ------------------------------------------------------------------


@dataclass
class LatencyReport:
    encode_step_median_s: float
    encode_step_p99_s: float
    decode: dict  # position -> {"median_s", "p99_s"}
    depth_ratio: float

    def to_dict(self):
        return asdict(self)


def _percentiles(samples):
    a = np.asarray(samples)
    return float(np.median(a)), float(np.percentile(a, 99))


def latency_bench(trace: MemoryTrace, vocab, positions, repetitions: int = 20, config: DecoderConfig = DecoderConfig(),
                  clock=time.perf_counter) -> LatencyReport:
    """Wall-clock of the manifold step and of single-position decodes under a uniform prior."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    positions = sorted(set(int(p) for p in positions))
    if not positions or positions[0] < 1 or positions[-1] > trace.token_count:
        raise ValueError(f"positions must lie in 1..{trace.token_count}")
    R = trace.rotation()
    prior = UniformPrior()
    # bridges only; anchors are a dictionary lookup
    bridge_trace = MemoryTrace(trace.primes, trace.precision, trace.states, {}, trace.synth_version)

    force = np.full(M.DIM, 0.25, dtype=R.dtype)
    state = trace.state(positions[0] - 1)
    M.evolve(R, state, force)
    enc = []
    for _ in range(max(repetitions, 100)):
        t0 = clock()
        M.evolve(R, state, force)
        enc.append(clock() - t0)

    decode = {}
    for p in positions:
        decode_position(bridge_trace, p, vocab, prior, config, rotation=R)
        samples = []
        for _ in range(repetitions):
            t0 = clock()
            decode_position(bridge_trace, p, vocab, prior, config, rotation=R)
            samples.append(clock() - t0)
        med, p99 = _percentiles(samples)
        decode[p] = {"median_s": med, "p99_s": p99}
    enc_med, enc_p99 = _percentiles(enc)
    ratio = decode[positions[-1]]["median_s"] / decode[positions[0]]["median_s"]
    return LatencyReport(enc_med, enc_p99, decode, ratio)


# -- rendering ----------------------------------------------------------------


def render_text_report(report: dict, title: str = "Reconstruction Audit") -> str:
    """Plain-text report block generated from the JSON form."""
    mem = report["memory"]
    n, a = report["token_count"], report["anchor_count"]
    kv = mem["baseline_bytes"] // n if n else 0
    lines = [
        f"Test Report: {title}",
        "MEMORY FOOTPRINT BREAKDOWN",
        f"  Accuracy:                  {100 * report['accuracy']:.2f}% ({report['exact_matches']}/{n} tokens correct)",
        f"  Drop Rate:                 {100 * report['drop_rate']:.2f}% ({a} anchors retained)",
        f"  Baseline Memory (Dense KV): {mem['baseline_bytes'] / MB:.2f} MB ({n} tokens x {kv} B)",
        f"  Ours (Sparse KV):          {mem['sparse_anchor_bytes'] / MB:.2f} MB ({a} anchors x {kv} B)",
        f"  + Full Phonetic Signal:    {mem['signal_bytes'] / MB:.3f} MB ({n + 1} vectors x 16-dim x 4 B)",
        f"  Net Compression:           {mem['net_compression']:.2f}x",
    ]
    if mem.get("signal_to_state_ratio"):
        lines.append(f"  Signal-to-KV State Ratio:  {mem['signal_to_state_ratio']:.0f}x")
    lines.append("ERROR BREAKDOWN")
    for name in [c.value for c in ErrorClass if c.value in report["errors"]]:
        count = report["errors"][name]
        shown = ", ".join(f"{o}->{r}" for o, r in report.get("examples", {}).get(name, [])[:8])
        lines.append(f"  {name:<15} {count:>6}  {shown}")
    return "\n".join(lines) + "\n"


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
