# Average regret of MP-ROGD, MP-OGD and ROGD as the horizon grows.
#
# Run with:  python3 demos/02_compare_baselines.py

import numpy as np

from safeoco.algo import ALGORITHMS, run
from safeoco.problem import make_instance

horizons = [100, 1000, 5000]
seeds = range(3)

for setting in ("linear", "quadratic"):
    print(f"\n{setting} setting, average regret (mean over {len(seeds)} seeds)")
    print("T".rjust(6), *(a.rjust(10) for a in ALGORITHMS))
    for T in horizons:
        row = []
        for algo in ALGORITHMS:
            vals = [run(algo, make_instance(setting, s, 2), T).avg_regret for s in seeds]
            row.append(f"{np.mean(vals):10.4f}")
        print(str(T).rjust(6), *row)
