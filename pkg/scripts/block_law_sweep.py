"""E|B|^alpha over regeneration blocks for a sweep of coin probabilities r.

The block moment should equal 1 for every r; the sweep shows how the
standard error and the block length grow as r shrinks.

    python scripts/block_law_sweep.py --model models/kesten_signed.json --blocks 100000
"""

import argparse
import sys

from hmmtails import spectral
from hmmtails.modelfile import load_model
from hmmtails.simulate import block_moment_check, regeneration_blocks


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", default="models/kesten_signed.json")
    p.add_argument("--blocks", type=int, default=100_000)
    p.add_argument("--r", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 0.95])
    p.add_argument("--y-star", default=None)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    model = load_model(args.model)
    alpha = spectral.solve_alpha(model)
    y_star = model.chain.states[0] if args.y_star is None else args.y_star
    print(f"alpha = {alpha:.10f}")
    print("r,mean_length,moment,std_err,z,rho_theta")
    for r in args.r:
        blocks = regeneration_blocks(model, y_star, r, args.blocks, seed=args.seed)
        chk = block_moment_check(blocks, alpha)
        _, rho = spectral.theta_matrix(model, alpha, y_star, r)
        print(f"{r},{blocks.length.mean():.4f},{chk.mean:.5f},{chk.std_err:.5f},{chk.z():.2f},{rho:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
