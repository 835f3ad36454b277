"""How the symmetry penalty weight trades off against reconstruction quality.

For K >= 3 no symmetric filter pair is also an orthonormal bank, so any
positive symmetry weight pulls the learned pair away from exact inversion.
"""

import argparse

import numpy as np

from ldwpool.filters import loss_sym
from ldwpool.tensor import FeatureMap, format_psnr, psnr
from ldwpool.training import TrainConfig, train_filters
from ldwpool.transform import decompose, reconstruct


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--taps", type=int, default=4)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--lr", type=float, default=3e-2)
    parser.add_argument("--sym-weights", default="0,0.001,0.01,0.1,1")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    images = [FeatureMap(rng.uniform(0, 1, (1, 32, 32))) for _ in range(8)]
    held_out = FeatureMap(rng.uniform(0, 1, (1, 32, 32)))
    print(f"{'sym weight':>11}{'L_Sym':>12}{'held-out PSNR':>16}")
    for w in (float(s) for s in args.sym_weights.split(",")):
        cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, wavelet_weights=(1, 1, 1, w))
        pair = train_filters(images, args.taps, cfg).final_pair
        value = psnr(held_out, reconstruct(decompose(held_out, pair), pair))
        print(f"{w:>11g}{loss_sym(pair):>12.4g}{format_psnr(value):>16}")


if __name__ == "__main__":
    main()
