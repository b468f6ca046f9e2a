"""Plot-ready CSV of beta -> Lambda(beta) for each model file.

    python scripts/lambda_curves.py --models models --beta-max 6 --points 121 --out lambda.csv
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from hmmtails.modelfile import load_model
from hmmtails.spectral import lambda_curve


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--models", default="models")
    p.add_argument("--beta-max", type=float, default=6.0)
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)

    betas = np.linspace(0.0, args.beta_max, args.points)
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["model", "beta", "lambda"])
    for path in sorted(Path(args.models).glob("*.json")):
        for beta, lam in lambda_curve(load_model(path), betas):
            writer.writerow([path.stem, f"{beta:.17g}", f"{lam:.17g}"])
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
