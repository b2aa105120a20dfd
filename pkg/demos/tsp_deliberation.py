"""Route one TSP map with a deliberative ENN and print each decision.

Training the 90-sample network takes about a minute.
Run: python demos/tsp_deliberation.py [map_seed]
"""
import sys

import numpy as np

from enn.config import load_config
from enn.datasets import gen_tsp_maps, tsp_train
from enn.deliberation import deliberate_classify
from enn.tasks import nearest_neighbor_route, rollout_tsp
from enn.train import train_enn


def main(map_seed: int = 0):
    cfg = load_config("tsp_denn")
    train = tsp_train()
    model = train_enn(train.X, train.y, cfg.enn, seed=cfg.seed, class_names=train.class_names)
    print(f"widths: {model.network.widths}")

    inst = gen_tsp_maps(1, seed=map_seed)[0]
    steps = []

    def policy(x, mask):
        result = deliberate_classify(model, x, mask, cfg.deliberation)
        steps.append(result)
        return result.label

    route = rollout_tsp(policy, inst)
    for k, r in enumerate(steps):
        note = f"deliberated over {len(r.transcript)} steps" if r.triggered else "direct"
        print(f"step {k}: go to city {r.label} ({note})")
    ref = nearest_neighbor_route(inst)
    print(f"\nnetwork route {route.order}, length {route.length:.4f}")
    print(f"nearest neighbour {ref.order}, length {ref.length:.4f}")
    print("identical" if np.isclose(route.length, ref.length) else "different")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
