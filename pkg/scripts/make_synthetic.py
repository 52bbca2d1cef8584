#!/usr/bin/env python3
"""Write the synthetic sine-vs-AR(1) datasets in the archive layout.

    python scripts/make_synthetic.py data/ --seed 7
    tsmb benchmark --data-dir data --datasets SineVsAR1 --format csv --seed 7
"""

import argparse
import sys
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from tsmb.data.dataset import save_csv
from tsmb.data.synthetic import make_sine_vs_ar1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--length", type=int, default=100)
    parser.add_argument("--n-train", type=int, default=20, help="training series per class")
    parser.add_argument("--n-test", type=int, default=20, help="test series per class")
    args = parser.parse_args()

    for multimodal in (False, True):
        dataset = make_sine_vs_ar1(
            n_train_per_class=args.n_train,
            n_test_per_class=args.n_test,
            length=args.length,
            seed=args.seed,
            multimodal=multimodal,
        )
        folder = args.out_dir / dataset.name
        save_csv(dataset.train, folder / f"{dataset.name}_TRAIN.csv")
        save_csv(dataset.test, folder / f"{dataset.name}_TEST.csv")
        print(f"{dataset.name}: {len(dataset.train)} train, {len(dataset.test)} test -> {folder}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
