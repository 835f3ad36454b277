"""Pretrain / L_Wavelet ablation at desk scale.

Trains K-tap filters under the four combinations of constrained
initialization and wavelet loss, scores every final pair on the same
objective (round-trip MSE + full wavelet loss) and reports held-out PSNR.
"""

import argparse
from dataclasses import replace

import numpy as np

from ldwpool.tensor import FeatureMap, format_psnr, psnr
from ldwpool.training import TrainConfig, evaluate, train_filters
from ldwpool.transform import decompose, reconstruct


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--taps", type=int, default=4)
    parser.add_argument("--epochs", type=int, default=200)
    parser.add_argument("--lr", type=float, default=3e-2)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--images", type=int, default=8)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--weights", default="1,1,1,1", help="weights of the wavelet terms when enabled")
    args = parser.parse_args()

    weights = tuple(float(w) for w in args.weights.split(","))
    reference = TrainConfig(learning_rate=args.lr, epochs=args.epochs, wavelet_weights=weights)
    configs = {
        "pretrain + L_wavelet": dict(pretrain=True, wavelet_weights=weights),
        "pretrain only": dict(pretrain=True, wavelet_weights=(0, 0, 0, 0)),
        "L_wavelet only": dict(pretrain=False, wavelet_weights=weights),
        "neither": dict(pretrain=False, wavelet_weights=(0, 0, 0, 0)),
    }
    totals = {name: [] for name in configs}
    psnrs = {name: [] for name in configs}
    for seed in range(args.seeds):
        rng = np.random.default_rng(700 + seed)
        shape = (1, args.size, args.size)
        images = [FeatureMap(rng.uniform(0, 1, shape)) for _ in range(args.images)]
        held_out = FeatureMap(rng.uniform(0, 1, shape))
        for name, overrides in configs.items():
            pair = train_filters(images, args.taps, replace(reference, seed=seed, **overrides)).final_pair
            totals[name].append(evaluate(images, pair, reference).total_loss)
            psnrs[name].append(psnr(held_out, reconstruct(decompose(held_out, pair), pair)))

    print(f"{'config':<22}{'mean total loss':>18}{'median PSNR':>16}")
    for name in configs:
        print(f"{name:<22}{np.mean(totals[name]):>18.6g}{format_psnr(float(np.median(psnrs[name]))):>16}")


if __name__ == "__main__":
    main()
