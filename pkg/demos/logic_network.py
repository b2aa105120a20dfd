"""Build a symbolic ENN for the 16 two-input Boolean functions and look inside.

Run: python demos/logic_network.py
"""
import numpy as np

from enn.config import load_config
from enn.datasets import gen_logic
from enn.train import train_enn


def main():
    ds = gen_logic()
    cfg = load_config("logic_enn")
    model = train_enn(ds.X, ds.y, cfg.enn, seed=cfg.seed, class_names=ds.class_names)
    net = model.network
    print(f"widths (differentia / subconcept / concept): {net.widths}")
    print(f"training error: {model.error_rate(ds.X, ds.y):.3f}")

    print("\nsubconcepts per class:", model.partition.counts_per_class)
    for k, (a, b) in enumerate(model.catalog.pairs):
        print(f"  differentia {k:2d} separates subconcept {a} (class {model.subconcept_class[a]}) "
              f"from {b} (class {model.subconcept_class[b]})")

    trace = net.forward(ds.X[:4])
    for i in range(4):
        print(f"\nsample {i}: label {ds.class_names[ds.y[i]]}")
        for name, a in zip(("differentiae", "subconcepts", "concepts"), trace.activations):
            print(f"  {name:12s} {np.array2string(a[i], precision=1)}")


if __name__ == "__main__":
    main()
