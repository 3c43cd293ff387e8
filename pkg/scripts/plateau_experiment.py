"""Windowed accuracy over a long generated stream.

A bigram prior is trained on one seed of the narrative generator and the
stream is drawn from another. Writes window accuracies as CSV and prints a
summary with the outcome counts.
"""

import argparse
import time
from collections import Counter

from torusmem import corpus
from torusmem import manifold as M
from torusmem import memory as Mem
from torusmem import metrics as Met
from torusmem import phonetics as P
from torusmem import resonance as Res


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tokens", type=int, default=20_000)
    ap.add_argument("--train-tokens", type=int, default=50_000)
    ap.add_argument("--drop-rate", type=float, default=0.75)
    ap.add_argument("--window", type=int, default=2000)
    ap.add_argument("--index", help="prebuilt vocabulary index")
    ap.add_argument("--out", default="plateau.csv")
    args = ap.parse_args()

    table = P.load_dictionary(P.default_dictionary_path())
    vocab = P.VocabIndex.load(args.index) if args.index else P.build_vocab_index(table)
    train = corpus.synthetic_tokens(args.train_tokens, seed=1)
    stream = corpus.synthetic_tokens(args.tokens, seed=2)
    flags = Mem.select_anchors(stream, Mem.AnchorPolicy(target_drop_rate=args.drop_rate),
                               Mem.CorpusStats.from_tokens(train))
    t0 = time.perf_counter()
    trace = Mem.encode(stream, M.make_rotation(), table, flags)
    t1 = time.perf_counter()
    recon, logs = Res.reconstruct(trace, vocab, Res.NgramPrior(train))
    t2 = time.perf_counter()
    report = Met.audit(stream, recon, trace, table, window_size=args.window)

    rows = [(i * args.window, f"{a:.6f}") for i, a in enumerate(report.window_accuracies)]
    with open(args.out, "w") as fh:
        fh.write(Met.rows_to_csv(["start", "accuracy"], rows))
    print(Met.render_text_report(report.to_dict(), f"Plateau ({args.tokens} tokens)"), end="")
    print("outcomes:", dict(Counter(log.outcome.value for log in logs)))
    print(f"encode {t1 - t0:.2f} s, decode {t2 - t1:.2f} s; windows written to {args.out}")


if __name__ == "__main__":
    main()
