"""Command-line entry points.

Exit codes: 0 success, 1 internal error, 2 bad input or path, 3 format or
version mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import manifold as M
from . import metrics as Met
from .memory import (
    AnchorPolicy,
    CorpusStats,
    TraceError,
    encode,
    read_trace,
    select_anchors,
    tokenize,
    write_trace,
)
from .phonetics import VocabFormatError, VocabIndex, build_vocab_index, default_dictionary_path, load_dictionary
from .resonance import (
    ENDPOINT_ENV,
    DecoderConfig,
    NgramPrior,
    UniformPrior,
    VersionMismatch,
    reconstruct,
    remote_prior,
)

log = logging.getLogger("torusmem")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_FORMAT = 0, 1, 2, 3


class InputError(Exception):
    """Bad user input: missing paths, invalid parameters."""


@dataclass
class PriorConfig:
    kind: str = "uniform"  # uniform | ngram | remote
    endpoint: str = ""
    timeout: float = 10.0


@dataclass
class RunConfig:
    dictionary: str = ""
    corpus: str = ""
    index: str = ""
    anchor_policy: AnchorPolicy = field(default_factory=AnchorPolicy)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    precision: str = "single"
    output_dir: str = "out"
    seed: int = 0
    kv_bytes_per_token: int = Met.DEFAULT_KV_BYTES_PER_TOKEN
    window_size: int = 200

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if "anchor_policy" in d:
            d["anchor_policy"] = AnchorPolicy(**d["anchor_policy"])
        if "decoder" in d:
            d["decoder"] = DecoderConfig(**d["decoder"])
        if "prior" in d:
            d["prior"] = PriorConfig(**d["prior"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["anchor_policy"]["mode"] = self.anchor_policy.mode.value
        if math.isinf(self.anchor_policy.surprisal_threshold):
            d["anchor_policy"]["surprisal_threshold"] = None
        return d

    def validate(self):
        if self.prior.kind not in ("uniform", "ngram", "remote"):
            raise InputError(f"prior.kind must be uniform, ngram or remote, not {self.prior.kind!r}")
        if self.precision not in ("single", "double"):
            raise InputError(f"precision must be single or double, not {self.precision!r}")
        for name in ("dictionary", "corpus", "index"):
            value = getattr(self, name)
            if value and not Path(value).is_file():
                raise InputError(f"{name} not found: {value}")
        if self.prior.kind == "ngram" and not self.corpus:
            raise InputError("the ngram prior needs a corpus path")
        if self.prior.kind == "remote" and not (self.prior.endpoint or os.environ.get(ENDPOINT_ENV)):
            raise InputError(f"the remote prior needs prior.endpoint or {ENDPOINT_ENV}")


def load_config(path, overrides: dict) -> RunConfig:
    raw = {}
    if path:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config not found: {path}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            outer, inner = key.split(".", 1)
            raw.setdefault(outer, {})[inner] = value
        else:
            raw[key] = value
    try:
        cfg = RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid config: {exc}") from exc
    cfg.validate()
    return cfg


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input not found: {path}")
    return p.read_text(encoding="utf-8")


def _table(cfg: RunConfig):
    return load_dictionary(cfg.dictionary or default_dictionary_path())


def _vocab(cfg: RunConfig, table) -> VocabIndex:
    if cfg.index:
        return VocabIndex.load(cfg.index)
    log.info("no index configured; building one from the dictionary")
    return build_vocab_index(table)


def _prior(cfg: RunConfig):
    if cfg.prior.kind == "ngram":
        return NgramPrior.from_text(_read_text(cfg.corpus))
    if cfg.prior.kind == "remote":
        return remote_prior(cfg.prior.endpoint, cfg.prior.timeout)
    return UniformPrior()


def _encode_text(text: str, cfg: RunConfig, table):
    tokens = tokenize(text)
    stats = CorpusStats.from_text(_read_text(cfg.corpus)) if cfg.corpus else CorpusStats.from_tokens(tokens)
    flags = select_anchors(tokens, cfg.anchor_policy, stats, table)
    rotation = M.make_rotation(precision=cfg.precision)
    return tokens, encode(tokens, rotation, table, flags)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _output_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory not writable: {out}")
    return out


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args) -> int:
    dict_path = Path(args.dict) if args.dict else default_dictionary_path()
    if not dict_path.is_file():
        raise InputError(f"dictionary not found: {dict_path}")
    out = Path(args.out)
    _output_dir(out.parent if str(out.parent) else ".")
    t0 = time.perf_counter()
    table = load_dictionary(dict_path)
    index = build_vocab_index(table)
    try:
        index.save(out)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from exc
    counts = index.counts()
    print(f"entries: {counts['entries']}")
    print(f"punctuation: {counts['punctuation']}")
    print(f"dictionary warnings: {table.warnings}")
    print(f"build time: {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def cmd_encode(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    text = _read_text(args.text)
    table = _table(cfg)
    tokens, trace = _encode_text(text, cfg, table)
    out = Path(args.out) if args.out else _output_dir(cfg.output_dir) / "trace.ptmt"
    _output_dir(out.parent)
    size = write_trace(trace, out)
    summary = {
        "tokens": trace.token_count,
        "anchors": len(trace.anchors),
        "drop_rate": 1 - len(trace.anchors) / trace.token_count if trace.token_count else 1.0,
        "signal_bytes": trace.signal_bytes,
        "signal_mb": trace.signal_bytes / Met.MB,
        "file_bytes": size,
        "policy": cfg.anchor_policy.summary(),
    }
    print(f"tokens: {summary['tokens']}")
    print(f"anchors: {summary['anchors']}")
    print(f"drop rate: {100 * summary['drop_rate']:.2f}%")
    print(f"signal: {summary['signal_bytes']} B ({summary['signal_mb']:.4f} MB)")
    print(f"trace: {out} ({size} B)")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    text = _read_text(args.text)
    out = _output_dir(cfg.output_dir)
    table = _table(cfg)
    t0 = time.perf_counter()
    if args.trace:
        if not Path(args.trace).is_file():
            raise InputError(f"trace not found: {args.trace}")
        tokens, trace = tokenize(text), read_trace(args.trace)
        if trace.token_count != len(tokens):
            raise InputError(f"trace holds {trace.token_count} tokens but the text has {len(tokens)}")
    else:
        tokens, trace = _encode_text(text, cfg, table)
    t_encode = time.perf_counter() - t0
    vocab = _vocab(cfg, table)
    prior = _prior(cfg)
    t0 = time.perf_counter()
    recon, logs = reconstruct(trace, vocab, prior, cfg.decoder)
    t_decode = time.perf_counter() - t0
    report = Met.audit(tokens, recon, trace, table, cfg.kv_bytes_per_token, cfg.window_size,
                       cfg.decoder.unknown_marker)

    outcomes = {}
    for entry in logs:
        outcomes[entry.outcome.value] = outcomes.get(entry.outcome.value, 0) + 1
    doc = {
        "config": cfg.to_dict(),
        "input": {"text": str(args.text), "trace": str(args.trace) if args.trace else None},
        "prior": prior.describe(),
        "report": report.to_dict(),
        "outcomes": dict(sorted(outcomes.items())),
        "prior_fallbacks": sum(e.prior_fallback for e in logs),
        "reconstruction": " ".join(recon),
    }
    (out / "audit.json").write_text(_dump_json(doc), encoding="utf-8")
    (out / "audit.txt").write_text(Met.render_text_report(doc["report"]), encoding="utf-8")
    rows = [(i, i * cfg.window_size, f"{a:.6f}") for i, a in enumerate(report.window_accuracies)]
    (out / "windows.csv").write_text(Met.rows_to_csv(["window", "start", "accuracy"], rows), encoding="utf-8")
    if args.positions_log:
        with open(out / "positions.jsonl", "w", encoding="utf-8") as fh:
            for entry in logs:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
    # wall-clock lives apart from audit.json so that file stays byte-reproducible
    meta = {"started_unix": int(time.time()), "encode_s": t_encode, "decode_s": t_decode}
    (out / "audit.meta.json").write_text(_dump_json(meta), encoding="utf-8")
    print(Met.render_text_report(doc["report"]), end="")
    return EXIT_OK


def cmd_stress(args) -> int:
    if args.kind == "drift":
        if args.steps < 1:
            raise InputError("--steps must be >= 1")
        R = M.make_rotation(precision=args.precision)
        rep = M.drift_stress(R, args.steps, seed=args.seed)
        eps = M.Precision(args.precision).eps
        rows = [(t, f"{e:.6e}", f"{Met.drift_bound(2 * t, eps):.6e}") for t, e in zip(rep.checkpoints, rep.errors)]
        text = Met.rows_to_csv(["steps", "roundtrip_error", "sqrt_t_eps"], rows)
    elif args.kind == "ergodicity":
        start = M.TorusState.from_coords([args.start] * M.DIM, args.precision)
        irr = M.orbit_min_return(M.make_rotation(precision=args.precision), start, args.horizon, args.skip)
        rat_op = M.RotationOperator.from_angles([2 * math.pi / args.period] * M.N_ROTORS, args.precision, testing=True)
        rat = M.orbit_min_return(rat_op, start, args.horizon, args.skip)
        rows = [("irrational", args.horizon, args.skip, f"{irr:.6e}"),
                (f"rational_2pi/{args.period}", args.horizon, args.skip, f"{rat:.6e}")]
        text = Met.rows_to_csv(["operator", "horizon", "skip", "min_return_distance"], rows)
    elif args.kind == "collision":
        try:
            res = Met.collision_probability(args.epsilon, args.n, args.dims)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        rows = [(args.epsilon, int(args.n), args.dims, f"{res['v_spot']:.6e}", f"{res['p_collision']:.6e}")]
        text = Met.rows_to_csv(["epsilon", "n_tokens", "dims", "v_spot", "p_collision"], rows)
    else:
        try:
            L = Met.cycle_length_bound(args.bits, args.rotors)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        text = Met.rows_to_csv(["significand_bits", "rotors", "cycle_length"], [(args.bits, args.rotors, str(L))])
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise InputError("--reps must be >= 1")
    if not Path(args.trace).is_file():
        raise InputError(f"trace not found: {args.trace}")
    cfg = load_config(args.config, _overrides(args))
    trace = read_trace(args.trace)
    positions = [int(p) for p in args.positions.split(",")] if args.positions else None
    if positions is None:
        n = trace.token_count
        positions = sorted({1, max(1, n // 2), n})
    table = _table(cfg)
    vocab = _vocab(cfg, table)
    try:
        rep = Met.latency_bench(trace, vocab, positions, args.reps, cfg.decoder)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    doc = {
        "trace": str(args.trace),
        "token_count": trace.token_count,
        "positions": positions,
        "repetitions": args.reps,
        "encode_step_median_us": rep.encode_step_median_s * 1e6,
        "encode_step_p99_us": rep.encode_step_p99_s * 1e6,
        "decode_us": {str(p): {k.replace("_s", "_us"): v * 1e6 for k, v in d.items()} for p, d in rep.decode.items()},
        "depth_ratio": rep.depth_ratio,
    }
    text = _dump_json(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _overrides(args) -> dict:
    keys = {
        "dict": "dictionary",
        "corpus": "corpus",
        "index": "index",
        "out_dir": "output_dir",
        "precision": "precision",
        "drop_rate": "anchor_policy.target_drop_rate",
        "prior": "prior.kind",
        "endpoint": "prior.endpoint",
        "alpha": "decoder.alpha",
        "gamma": "decoder.gamma",
        "top_k": "decoder.top_k",
    }
    return {dest: getattr(args, name, None) for name, dest in keys.items()}


def _add_run_options(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--dict", help="CMUdict file (default: bundled cmudict)")
    p.add_argument("--corpus", help="text corpus for importance statistics and the n-gram prior")
    p.add_argument("--index", help="vocabulary index built by `ingest`")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--precision", choices=["single", "double"])
    p.add_argument("--drop-rate", type=float, help="target fraction of tokens not anchored")
    p.add_argument("--prior", choices=["uniform", "ngram", "remote"])
    p.add_argument("--endpoint", help=f"remote prior URL (env {ENDPOINT_ENV} wins)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--top-k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torusmem", description="Toroidal phonetic trajectory memory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build the vocabulary index")
    p.add_argument("--dict", help="CMUdict file (default: bundled cmudict)")
    p.add_argument("--out", required=True, help="index file to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("encode", help="encode a text file into a trace")
    p.add_argument("text")
    p.add_argument("--out", help="trace file (default: <out-dir>/trace.ptmt)")
    _add_run_options(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("audit", help="encode, reconstruct and score a text")
    p.add_argument("text")
    p.add_argument("--trace", help="decode this trace instead of encoding the text")
    p.add_argument("--positions-log", action="store_true", help="also write per-position decision logs")
    _add_run_options(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("stress", help="dynamical stress tests and closed-form bounds")
    p.add_argument("kind", choices=["drift", "ergodicity", "collision", "cycle"])
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--precision", choices=["single", "double"], default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--skip", type=int, default=1)
    p.add_argument("--period", type=int, default=8, help="rational comparison rotor period")
    p.add_argument("--start", type=float, default=0.3)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--n", type=float, default=1e6)
    p.add_argument("--dims", type=int, default=16)
    p.add_argument("--bits", type=int, default=24)
    p.add_argument("--rotors", type=int, default=8)
    p.add_argument("--out", help="also write the CSV here")
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("bench", help="latency of the manifold step and of decodes at several depths")
    p.add_argument("trace")
    p.add_argument("--positions", help="comma-separated 1-based positions")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--out", help="also write the JSON here")
    _add_run_options(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TraceError, VocabFormatError, VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
