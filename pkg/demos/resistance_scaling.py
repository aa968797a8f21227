"""Resistance growth across dimensions: flat ratio high, falling ratio low.

Runs a small resistance scan at d=8 and d=4 and fits both scaling models.
Replicate counts are kept modest so the script finishes in about a minute;
the acceptance suite runs the full-size version.
"""

from brwlab import ExperimentConfig, fit_exponent, scan_resistance

for dim in (8, 4):
    cfg = ExperimentConfig.from_dict(
        {
            "progeny": "binary",
            "dim": dim,
            "n_list": [16, 32, 64, 128],
            "replicates": 200,
            "seed": 20,
        }
    )
    rows = scan_resistance(cfg)
    print(f"d = {dim}")
    for r in rows:
        print(
            f"  n={r.n:4d}  mean R={r.mean_r:8.3f} +- {r.se_r:.3f}"
            f"   R/n={r.mean_r / r.n:.4f}   cutset bound={r.mean_nw:.3f}"
        )
    power = fit_exponent(rows, model="power")
    logc = fit_exponent(rows, model="log-correction")
    print(f"  power fit: R ~ n^{power.exponent:.3f} (se {power.exponent_se:.3f})")
    print(
        f"  log fit:   R ~ n / (log n)^{logc.exponent:.3f} "
        f"(se {logc.exponent_se:.3f})"
    )
    print()

print("high dimension keeps R/n near a constant; low dimension drags it down")
