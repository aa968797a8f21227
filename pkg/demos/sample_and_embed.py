"""Sample conditioned trees, embed one, and price its resistance.

Walks through the basic pipeline: a critical progeny law, the backbone
tree with deadline-conditioned side trees, the lattice embedding, and
the root-to-level resistance with its cutset lower bound.
"""

import numpy as np

from brwlab import (
    embed,
    nash_williams_lower,
    progeny_preset,
    resistance_row,
    sample_backbone_tree,
    size_bias,
    step_preset,
)

rng = np.random.default_rng(7)
binary = progeny_preset("binary")

print("progeny law:", binary.pmf, "mean", binary.mean, "variance", binary.sigma_sq)
print("first generation off the backbone follows", size_bias(binary).pmf)
print()

n, m = 64, 128
sizes = []
for _ in range(5):
    tree = sample_backbone_tree(binary, n, m, rng)
    sizes.append(tree.num_vertices)
    print(
        f"tree with backbone length {n}: {tree.num_vertices} vertices, "
        f"max height {int(tree.height.max())} (deadline keeps it < {m})"
    )
print("sizes vary a lot:", sizes)
print()

law = step_preset("srw_d6")
tree = sample_backbone_tree(binary, n, m, rng)
trace = embed(tree, law, rng)
print(
    f"embedded trace: {trace.num_points} space-time points, "
    f"{trace.num_edges} edges (parallel edges kept)"
)

row = resistance_row(trace, n)
print(f"R({n}) = {row['R']:.3f} via {row['nodes']} nodes / {row['edges']} edges")
print(f"cutset bound {nash_williams_lower(trace, n):.3f} <= R({n}) <= {n}")
