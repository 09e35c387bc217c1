"""Co-location / co-occurrence event extraction between user pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import haversine_m, to_cell, OutOfGridError

KERNELS = ("indicator", "exponential")


@dataclass(frozen=True)
class CoLocationConfig:
    """Spatial/temporal thresholds and kernel shapes.

    Indicator kernels are 1 within the threshold and 0 outside; exponential
    kernels are exp(-x/alpha), truncated to 0 beyond 3*alpha.
    """

    alpha_d_m: float = 250.0
    alpha_t_s: float = 1800.0
    spatial_kernel: str = "indicator"
    temporal_kernel: str = "indicator"

    def __post_init__(self):
        if self.alpha_d_m <= 0 or self.alpha_t_s <= 0:
            raise ValueError("thresholds must be positive")
        if self.spatial_kernel not in KERNELS or self.temporal_kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")

    def spatial_weight(self, dist_m):
        if self.spatial_kernel == "indicator":
            return 1.0 if dist_m <= self.alpha_d_m else 0.0
        if dist_m > 3.0 * self.alpha_d_m:
            return 0.0
        import math
        return math.exp(-dist_m / self.alpha_d_m)

    def temporal_weight(self, gap_s):
        if self.temporal_kernel == "indicator":
            return 1.0 if gap_s <= self.alpha_t_s else 0.0
        if gap_s > 3.0 * self.alpha_t_s:
            return 0.0
        import math
        return math.exp(-gap_s / self.alpha_t_s)

    @property
    def temporal_reach_s(self):
        """Largest interval gap that can still yield a nonzero weight."""
        if self.temporal_kernel == "indicator":
            return self.alpha_t_s
        return 3.0 * self.alpha_t_s


@dataclass(frozen=True)
class CoEvent:
    """One co-occurrence between an ordered user pair (user_a < user_b).

    The overlap interval is the intersection of the two stay intervals; for
    disjoint-but-close stays it degenerates to the earlier stay's endpoint.
    """

    user_a: str
    user_b: str
    cell: object
    overlap_start: int
    overlap_end: int
    weight: float

    def __post_init__(self):
        if self.user_a >= self.user_b:
            raise ValueError("pair must be ordered user_a < user_b")
        if self.overlap_start > self.overlap_end:
            raise ValueError("inverted overlap interval")
        if not (0.0 < self.weight <= 1.0):
            raise ValueError("weight must be in (0, 1]")

    @property
    def overlap_s(self):
        return self.overlap_end - self.overlap_start


def interval_gap_s(a, b):
    """Gap between two stay intervals; 0 when they overlap or touch."""
    return max(0, max(a.start_time, b.start_time) - min(a.stop_time, b.stop_time))


def _event_for(sa, sb, pair, cfg, grid):
    d = haversine_m(sa.lat, sa.lon, sb.lat, sb.lon)
    w = cfg.spatial_weight(d) * cfg.temporal_weight(interval_gap_s(sa, sb))
    if w <= 0.0:
        return None
    lo = max(sa.start_time, sb.start_time)
    hi = min(sa.stop_time, sb.stop_time)
    if lo > hi:          # disjoint stays within temporal reach
        lo = hi
    first = sa if pair[0] == sa.user_id else sb
    try:
        cell = to_cell(first.lat, first.lon, grid)
    except OutOfGridError:
        cell = None
    return CoEvent(pair[0], pair[1], cell, lo, hi, w)


def extract_pair_coevents(traj_a, traj_b, cfg, grid):
    """All co-occurrence events between two trajectories.

    Stays are time-sorted, so candidates are pruned with a sliding window on
    the temporal reach before kernel evaluation; the result equals the full
    nested-loop evaluation.
    """
    pair = tuple(sorted([traj_a.user_id, traj_b.user_id]))
    if traj_a.user_id != pair[0]:
        traj_a, traj_b = traj_b, traj_a
    reach = cfg.temporal_reach_s
    events = []
    j0 = 0
    bs = traj_b.stays
    for sa in traj_a.stays:
        while j0 < len(bs) and bs[j0].stop_time < sa.start_time - reach:
            j0 += 1
        for sb in bs[j0:]:
            if sb.start_time > sa.stop_time + reach:
                break
            ev = _event_for(sa, sb, pair, cfg, grid)
            if ev is not None:
                events.append(ev)
    events.sort(key=lambda e: (e.overlap_start, e.overlap_end, e.weight))
    return events


def extract_coevents(trajectories, cfg, grid, pairs=None):
    """Co-occurrence events for every unordered user pair (or a given list).

    Returns a dict (user_a, user_b) -> event list with a deterministic pair
    and event ordering.
    """
    users = sorted(trajectories)
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(users) for b in users[i + 1:]]
    out = {}
    for a, b in pairs:
        key = tuple(sorted((a, b)))
        out[key] = extract_pair_coevents(
            trajectories[key[0]], trajectories[key[1]], cfg, grid)
    return out


def coevent_score(events):
    """Kernel-weighted co-occurrence score: sum of event weights."""
    return float(sum(e.weight for e in events))


def coevents_to_jsonl(events):
    lines = []
    for e in events:
        lines.append(json.dumps({
            "user_a": e.user_a, "user_b": e.user_b,
            "cell": None if e.cell is None else [e.cell.x, e.cell.y],
            "overlap_start": e.overlap_start, "overlap_end": e.overlap_end,
            "weight": e.weight,
        }, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")
