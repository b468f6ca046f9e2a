"""Theory against Monte Carlo for every model file in a directory.

Writes one CSV row per (model, state, sign) with the predicted constant, the
window estimate and its standard error.

    python scripts/theory_vs_mc.py --models models --samples 1000000 --out theory_vs_mc.csv
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from hmmtails import spectral
from hmmtails.errors import HmmTailsError
from hmmtails.estimate import hill, k_constant_estimate
from hmmtails.modelfile import load_model
from hmmtails.simulate import stationary_sample


def rows_for(path: Path, samples: int, seed: int):
    model = load_model(path)
    theory = spectral.theory_report(model)
    if theory.alpha is None or theory.degenerate.is_degenerate:
        yield {"model": path.stem, "regime": theory.regime, "note": "no power tail"}
        return
    sample = stationary_sample(model, samples, seed=seed)
    alpha_hat = hill(sample.r).alpha_hat
    for sign, vec in ((1, theory.K_plus), (-1, theory.K_minus)):
        est = k_constant_estimate(sample.r, theory.alpha, sign=sign, states=sample.states, per_state=True)
        for i, state in enumerate(model.chain.states):
            k = est.get(i)
            yield {
                "model": path.stem,
                "regime": theory.regime,
                "alpha": theory.alpha,
                "alpha_hill": alpha_hat,
                "state": state,
                "sign": sign,
                "K_theory": "" if vec is None else float(vec[i]),
                "K_hat": "" if k is None else k.value,
                "std_err": "" if k is None else k.std_err,
                "spread": "" if k is None else k.spread,
            }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--models", default="models")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)

    fields = ["model", "regime", "alpha", "alpha_hill", "state", "sign", "K_theory", "K_hat", "std_err",
              "spread", "note"]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    writer = csv.DictWriter(fh, fieldnames=fields)
    writer.writeheader()
    for path in sorted(Path(args.models).glob("*.json")):
        try:
            for row in rows_for(path, args.samples, args.seed):
                writer.writerow(row)
        except HmmTailsError as exc:
            writer.writerow({"model": path.stem, "note": f"{type(exc).__name__}: {exc}"})
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    np.seterr(over="ignore")
    sys.exit(main())
