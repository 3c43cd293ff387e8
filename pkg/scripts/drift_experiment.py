"""Round-trip drift of the clock versus the sqrt(t)*eps random-walk bound.

Writes one CSV row per (precision, checkpoint).
"""

import argparse
import sys

from torusmem import manifold as M
from torusmem.metrics import drift_bound, rows_to_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args()

    rows = []
    for precision in M.Precision:
        rep = M.drift_stress(M.make_rotation(precision=precision), args.steps, seed=args.seed)
        for t, err in zip(rep.checkpoints, rep.errors):
            rows.append((precision.value, t, f"{err:.6e}", f"{drift_bound(2 * t, precision.eps):.6e}"))
    text = rows_to_csv(["precision", "steps", "roundtrip_error", "sqrt_2t_eps"], rows)
    if args.out:
        open(args.out, "w").write(text)
    sys.stdout.write(text)


if __name__ == "__main__":
    main()
