"""Compare an ENN with a same-width GDN on rectangle orientation:
clean error, FGSM self-attacks, and Gaussian input noise.

Uses a reduced training set so it finishes in about a minute.
Run: python demos/rectangles_robustness.py
"""
import numpy as np

from enn.config import load_config, parse_config, set_value
from enn.experiments import load_data, network_of, train_model
from enn.robustness import epsilon_grid, fgsm_epsilon_min, noise_curve


def small(name):
    text = set_value(load_config(name).text, "dataset", "per_class", "600")
    return parse_config(text, name)


def main():
    ecfg, gcfg = small("rectangles_enn"), small("rectangles_gdn")
    data = load_data(ecfg)
    enn = network_of(train_model(ecfg, data))
    gdn = train_model(gcfg, data)
    test = data.tests["test"]
    X, y = test.X[:300].astype(np.float64), test.y[:300]
    print(f"widths ENN {enn.widths}, GDN {gdn.widths}")
    grid = epsilon_grid()
    for name, net in (("ENN", enn), ("GDN", gdn)):
        ok = np.flatnonzero(net.predict(X) == y)
        eps = [fgsm_epsilon_min(net, net, X[i], int(y[i]), grid).eps_min for i in ok]
        curve = noise_curve(net, X, y, [0.0, 0.5, 1.0, 2.0], repeats=5, seed=0)
        print(f"{name}: clean error {net.error_rate(X, y):.3f}, median self-attack eps {np.median(eps):.3f}, "
              f"noise errors {np.round(curve.errors, 3).tolist()} at sigma 0/0.5/1/2")


if __name__ == "__main__":
    main()
