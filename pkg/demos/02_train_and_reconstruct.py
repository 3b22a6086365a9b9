"""Train the denoising autoencoder on clean segments and score its in-filling.

Each clean 30 s segment yields ten training pairs: a copy with one or two
random patches (1-15 s) zeroed, and the untouched segment as the target.
After training, held-out segments get a single fixed-length patch erased and
the network's fill is compared with two naive fills, leaving zeros and
drawing a straight line across the gap.

The defaults train a small run in a few minutes on one CPU core; the full
configuration is ``--segments 200 --epochs 50``.

    python demos/02_train_and_reconstruct.py --segments 40 --epochs 8 --save /tmp/dae.json
"""

import argparse
import time

import numpy as np

from ppgdae import (
    MaskSpec,
    TrainConfig,
    build_dataset,
    clean_training_segments,
    derive_seed,
    erased_rmse,
    fixed_patch_masks,
    linear_fill,
    train_dae,
    zero_fill,
)


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--segments", type=int, default=40)
    p.add_argument("--epochs", type=int, default=8)
    p.add_argument("--holdout", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save", help="write the final checkpoint here")
    return p.parse_args()


def main():
    args = parse_args()
    segments = clean_training_segments(args.segments, derive_seed(args.seed, "train-corpus"))
    dataset = build_dataset(segments, MaskSpec(seed=derive_seed(args.seed, "masks")))
    print(f"{len(segments)} clean segments -> {len(dataset)} training pairs; "
          f"mean erased fraction {dataset.erased.mean():.2f}")

    config = TrainConfig(
        epochs=args.epochs,
        shuffle_seed=derive_seed(args.seed, "shuffle"),
        model_seed=derive_seed(args.seed, "init"),
        dtype="float32",
    )
    t0 = time.perf_counter()
    result = train_dae(
        dataset, config,
        on_epoch=lambda e: print(f"  epoch {e.epoch:3d}  train {e.train_rmse:.4f}  val {e.val_rmse:.4f}  {e.wall_ms / 1000:.1f} s"),
    )
    print(f"trained in {time.perf_counter() - t0:.0f} s; best validation epoch {result.best_epoch}")

    held = np.array([s.samples for s in clean_training_segments(args.holdout, derive_seed(args.seed, "holdout"))])
    print("\nerased-region RMSE on held-out segments")
    print("patch   model   zero-fill  linear")
    for patch in (1.0, 5.0, 10.0):
        masks = fixed_patch_masks(len(held), patch, derive_seed(args.seed, f"holdout-{patch:g}s"))
        x = held * masks
        print(f"{patch:4.0f} s  {erased_rmse(result.model.predict(x), held, masks):.4f}  "
              f"{erased_rmse(zero_fill(x, masks), held, masks):9.4f}  "
              f"{erased_rmse(linear_fill(x, masks), held, masks):.4f}")

    if args.save:
        result.model.save(args.save, {"segments": args.segments, "epochs": args.epochs, "seed": args.seed})
        print(f"\nsaved {args.save}")


if __name__ == "__main__":
    main()
