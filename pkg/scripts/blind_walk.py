"""Zero-anchor reconstruction of a text under a uniform or bigram prior.

Prints the audit block and the first homophone substitutions.
"""

import argparse
from pathlib import Path

from torusmem import manifold as M
from torusmem import memory as Mem
from torusmem import metrics as Met
from torusmem import phonetics as P
from torusmem import resonance as Res

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "lighthouse.txt"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("text", nargs="?", default=str(FIXTURE))
    ap.add_argument("--index", help="prebuilt vocabulary index (built on the fly otherwise)")
    ap.add_argument("--prior-corpus", help="train a bigram prior on this text instead of using a uniform prior")
    ap.add_argument("--alpha", type=float, default=0.4)
    args = ap.parse_args()

    table = P.load_dictionary(P.default_dictionary_path())
    vocab = P.VocabIndex.load(args.index) if args.index else P.build_vocab_index(table)
    tokens = Mem.tokenize(Path(args.text).read_text(encoding="utf-8"))
    trace = Mem.encode(tokens, M.make_rotation(), table)
    prior = Res.ngram_train(args.prior_corpus) if args.prior_corpus else Res.UniformPrior()
    recon, _ = Res.reconstruct(trace, vocab, prior, Res.DecoderConfig(alpha=args.alpha))
    report = Met.audit(tokens, recon, trace, table)
    print(Met.render_text_report(report.to_dict(), "Blind Walk (0 anchors)"), end="")
    print("reconstruction:", " ".join(recon[:60]), "...")


if __name__ == "__main__":
    main()
