"""Ingest stay records and extract co-occurrence events.

Generates a small synthetic world, serializes it through the CSV format,
parses it back, and then extracts weighted co-occurrence events for a
friend pair and a stranger pair side by side.
"""

import numpy as np

from trajpriv import (CoLocationConfig, WorldConfig, coevent_score,
                      extract_pair_coevents, generate_world,
                      group_trajectories, parse_stays,
                      sample_negative_pairs)


def main():
    world = generate_world(WorldConfig(n_users=16, n_days=7, seed=5))
    text = world.stays_csv()
    print(f"serialized {text.count(chr(10)) - 1} stay records")

    stays = parse_stays(text)
    trajectories = group_trajectories(stays)
    print(f"parsed back {len(trajectories)} users")

    cfg = CoLocationConfig(alpha_d_m=250.0, alpha_t_s=1800)
    friend = sorted(world.friend_edges)[0]
    stranger = sample_negative_pairs(world.users, world.friend_edges, 1,
                                     np.random.default_rng(0))[0]
    for label, (a, b) in (("friends", friend), ("strangers", stranger)):
        events = extract_pair_coevents(trajectories[a], trajectories[b],
                                       cfg, world.grid)
        print(f"{a} / {b} ({label}): {len(events)} co-occurrences, "
              f"score {coevent_score(events):.2f}")


if __name__ == "__main__":
    main()
