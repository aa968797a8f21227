"""Collisions between two independent embedded trees.

Two trees are grown from nearby roots and embedded independently; we
count pairs of side vertices that land on the same space-time site
subject to the window and spacing rules. A single instance is printed
pair by pair, then a small scan shows the moment summaries.
"""

import numpy as np

from brwlab import (
    ExperimentConfig,
    progeny_preset,
    scan_intersections,
    step_preset,
    two_tree_experiment,
)

p = progeny_preset("geometric")
law = step_preset("srw_d1")
rng = np.random.default_rng(22)

# hunt for an instance with at least one collision
for attempt in range(200):
    res = two_tree_experiment(p, law, 24, (0,), rng, records="all")
    if res.count:
        break
print(f"found {res.count} colliding pair(s) after {attempt + 1} instances:")
for pair in res.records:
    print(
        f"  vertices ({pair.u1}, {pair.u2}) meet at height {pair.height}, "
        f"site {pair.site}, forks at levels ({pair.fork1}, {pair.fork2})"
        f"{', primed' if pair.primed else ''}"
    )
print()

cfg = ExperimentConfig.from_dict(
    {
        "progeny": "geometric",
        "dim": 1,
        "delta_n_list": [12, 24, 48],
        "replicates": 2000,
        "seed": 22,
    }
)
rows = scan_intersections(cfg)
print("window length | mean |I| | mean |I|^2 | P(|I|>0) | second-moment bound")
for r in rows:
    print(
        f"  {r.delta_n:4d}        {r.mean_count:8.4f}  {r.mean_sq:9.4f}"
        f"   {r.p_positive:7.4f}   {max(r.pz_lower, 0.0):.4f}"
    )
print()
print("P(|I|>0) stays above the bound mean^2 / mean-square (minus noise),")
print("which is how positive collision probability is certified")
