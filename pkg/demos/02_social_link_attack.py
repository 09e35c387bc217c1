"""Social-link inference attack with feature ablation.

Builds the pinned benchmark world, extracts the six pair metrics for
friend and non-friend pairs, trains the dense fusion classifier on each
feature subset, and prints the resulting ablation table.
"""

from trajpriv import WorldConfig, generate_world, run_attack
from trajpriv.features import SUBSETS


def main():
    world = generate_world(WorldConfig(n_users=64, n_days=14, seed=42))
    subsets = ["all", "spatial", "temporal"] + [(f,) for f in SUBSETS["all"]]
    rows = run_attack(world, subsets)
    print(f"{'subset':12s} {'P':>6s} {'R':>6s} {'F1':>6s} {'AUC':>6s}")
    for r in rows:
        print(f"{r['subset']:12s} {r['precision']:6.3f} {r['recall']:6.3f} "
              f"{r['f1']:6.3f} {r['auc']:6.3f}")


if __name__ == "__main__":
    main()
