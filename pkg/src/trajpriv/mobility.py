"""Per-user space-time-social mobility model.

A Gaussian mixture over stay locations (fitted by EM on a local planar
projection), a time-slot -> cluster categorical profile, a social/non-social
labeling of clusters, the social/temporal influence measures, and seeded
next-location sampling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import EARTH_RADIUS_M, time_slot

VAR_FLOOR_M2 = 25.0


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular lat/lon <-> planar meters around a reference point."""

    ref_lat: float
    ref_lon: float

    def to_xy(self, lat, lon):
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        x = (np.radians(lon - self.ref_lon) * EARTH_RADIUS_M
             * math.cos(math.radians(self.ref_lat)))
        y = np.radians(lat - self.ref_lat) * EARTH_RADIUS_M
        return np.stack([x, y], axis=-1)

    def to_latlon(self, xy):
        xy = np.asarray(xy, dtype=float)
        lat = self.ref_lat + np.degrees(xy[..., 1] / EARTH_RADIUS_M)
        lon = self.ref_lon + np.degrees(
            xy[..., 0] / (EARTH_RADIUS_M * math.cos(math.radians(self.ref_lat))))
        return lat, lon


def _floor_cov(cov, floor):
    """Clip covariance eigenvalues from below; keeps SPD."""
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


def _log_gauss(X, mean, cov):
    d = X.shape[1]
    L = np.linalg.cholesky(cov)
    diff = (X - mean) @ np.linalg.inv(L).T
    return (-0.5 * d * np.log(2 * np.pi)
            - np.sum(np.log(np.diag(L)))
            - 0.5 * np.sum(diff * diff, axis=1))


def gaussian_pdf(x, mean, cov):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.exp(_log_gauss(x, np.asarray(mean), np.asarray(cov)))


def fit_gmm(points, m, seed=0, max_iter=200, tol=1e-6, var_floor=VAR_FLOOR_M2):
    """Full-covariance 2D GMM by EM.

    Returns (means, covs, weights, log-likelihood trace). The trace is the
    per-point mean log-likelihood evaluated at the parameters entering each
    iteration, so it is non-decreasing by the EM guarantee (the variance
    floor binds only on degenerate clusters).
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if m < 1 or m > n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    means = X[rng.choice(n, size=m, replace=False)].astype(float)
    base_cov = _floor_cov(np.cov(X.T) if n > 1 else np.eye(2), var_floor)
    covs = np.array([base_cov.copy() for _ in range(m)])
    weights = np.full(m, 1.0 / m)
    trace = []
    for _ in range(max_iter):
        log_r = np.stack([np.log(weights[j] + 1e-300)
                          + _log_gauss(X, means[j], covs[j])
                          for j in range(m)], axis=1)
        mx = log_r.max(axis=1, keepdims=True)
        lse = mx[:, 0] + np.log(np.exp(log_r - mx).sum(axis=1))
        ll = float(lse.mean())
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            break
        R = np.exp(log_r - lse[:, None])
        nk = R.sum(axis=0) + 1e-12
        weights = nk / n
        means = (R.T @ X) / nk[:, None]
        for j in range(m):
            diff = X - means[j]
            cov = (R[:, j, None] * diff).T @ diff / nk[j]
            covs[j] = _floor_cov(cov, var_floor)
    return means, covs, weights, trace


def gmm_bic(points, means, covs, weights):
    X = np.asarray(points, dtype=float)
    m = len(weights)
    log_r = np.stack([np.log(weights[j] + 1e-300)
                      + _log_gauss(X, means[j], covs[j])
                      for j in range(m)], axis=1)
    mx = log_r.max(axis=1, keepdims=True)
    ll = float((mx[:, 0] + np.log(np.exp(log_r - mx).sum(axis=1))).sum())
    # per component: 2 mean + 3 cov + 1 weight, minus the simplex constraint
    n_params = 6 * m - 1
    return n_params * np.log(X.shape[0]) - 2.0 * ll


def fit_gmm_auto(points, seed=0, m_range=range(1, 7), **kw):
    """BIC model selection over component counts."""
    best = None
    n = len(points)
    for m in m_range:
        if m > n:
            break
        fit = fit_gmm(points, m, seed=seed, **kw)
        bic = gmm_bic(points, *fit[:3])
        if best is None or bic < best[0]:
            best = (bic, m, fit)
    return best[2]


@dataclass(frozen=True)
class InfluenceParams:
    """Weights of the combined social/temporal influence measure."""

    pi1: float = 1.0
    pi2: float = 1.0
    omega_s: float = 0.5
    omega_t: float = 0.5
    epsilon_d: float = 1.0

    def __post_init__(self):
        if self.pi1 <= 0 or self.pi2 <= 0 or self.epsilon_d <= 0:
            raise ValueError("pi1, pi2, epsilon_d must be positive")
        if self.omega_s < 0 or self.omega_t < 0:
            raise ValueError("omegas must be nonnegative")
        if abs(self.omega_s + self.omega_t - 1.0) > 1e-9:
            raise ValueError("omega_s + omega_t must equal 1")


@dataclass
class MobilityModel3D:
    """Fitted 3D (space-time-social) mobility model of one user."""

    user_id: str
    projection: LocalProjection
    means: np.ndarray          # (m, 2) planar meters
    covs: np.ndarray           # (m, 2, 2)
    weights: np.ndarray        # (m,)
    temporal_profile: np.ndarray  # (n_slots, m), rows sum to 1
    social_flags: np.ndarray = None   # (m,) bool
    visit_counts: np.ndarray = None   # (m,) int
    ll_trace: list = field(default_factory=list)

    def __post_init__(self):
        m = len(self.weights)
        if self.social_flags is None:
            self.social_flags = np.zeros(m, dtype=bool)
        if self.visit_counts is None:
            self.visit_counts = np.zeros(m, dtype=int)
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        rows = self.temporal_profile.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise ValueError("temporal profile rows must sum to 1")

    @property
    def n_components(self):
        return len(self.weights)

    def to_json(self):
        return json.dumps({
            "user_id": self.user_id,
            "ref_lat": self.projection.ref_lat,
            "ref_lon": self.projection.ref_lon,
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
            "weights": self.weights.tolist(),
            "temporal_profile": self.temporal_profile.tolist(),
            "social_flags": self.social_flags.astype(int).tolist(),
            "visit_counts": self.visit_counts.tolist(),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            user_id=d["user_id"],
            projection=LocalProjection(d["ref_lat"], d["ref_lon"]),
            means=np.array(d["means"]),
            covs=np.array(d["covs"]),
            weights=np.array(d["weights"]),
            temporal_profile=np.array(d["temporal_profile"]),
            social_flags=np.array(d["social_flags"], dtype=bool),
            visit_counts=np.array(d["visit_counts"], dtype=int),
        )


def fit_mobility_model(traj, grid, m="auto", seed=0):
    """Fit the spatial GMM and temporal profile from one user's stays.

    Social flags start all-False; call label_social once co-occurrence
    fractions are known.
    """
    lats = np.array([s.lat for s in traj])
    lons = np.array([s.lon for s in traj])
    proj = LocalProjection(float(lats.mean()), float(lons.mean()))
    X = proj.to_xy(lats, lons)
    if m == "auto":
        means, covs, weights, trace = fit_gmm_auto(X, seed=seed)
    else:
        means, covs, weights, trace = fit_gmm(X, m, seed=seed)
    mm = len(weights)
    # hard-assign each stay for the profile and visit counts
    log_r = np.stack([np.log(weights[j] + 1e-300)
                      + _log_gauss(X, means[j], covs[j])
                      for j in range(mm)], axis=1)
    assign = log_r.argmax(axis=1)
    n_slots = grid.slots_per_day
    profile = np.zeros((n_slots, mm))
    counts = np.zeros(mm, dtype=int)
    for s, j in zip(traj, assign):
        slot, _ = time_slot(s.start_time, grid)
        profile[slot, j] += 1
        counts[j] += 1
    empty = profile.sum(axis=1) == 0
    profile[empty] = weights            # fall back to the global mixture
    profile /= profile.sum(axis=1, keepdims=True)
    return MobilityModel3D(traj.user_id, proj, means, covs, weights,
                           profile, visit_counts=counts,
                           ll_trace=trace), assign


def location_density(model, point_xy, slot):
    """Slot-conditioned mixture density at a planar point."""
    point = np.asarray(point_xy, dtype=float).reshape(1, 2)
    dens = 0.0
    for j in range(model.n_components):
        dens += (float(gaussian_pdf(point, model.means[j], model.covs[j])[0])
                 * model.temporal_profile[slot, j])
    return dens


def label_social(model, coevent_fraction, tau_soc):
    """Flag clusters whose co-occurrence fraction reaches the threshold."""
    frac = np.asarray(coevent_fraction, dtype=float)
    if np.any((frac < 0) | (frac > 1)):
        raise ValueError("fractions must lie in [0, 1]")
    model.social_flags = frac >= tau_soc
    return model.social_flags


def social_influence(friend_model, point_xy, slot, params):
    """Pull of a friend's dominant place on a candidate location.

    Decays with the candidate's distance to the friend's top cluster center,
    scaled by how far that center sits from the friend's expected center at
    this time slot.
    """
    c1 = friend_model.means[int(np.argmax(friend_model.weights))]
    c_slot = friend_model.temporal_profile[slot] @ friend_model.means
    point = np.asarray(point_xy, dtype=float)
    num = float(np.linalg.norm(point - c1))
    den = max(float(np.linalg.norm(c1 - c_slot)), params.epsilon_d)
    return params.pi1 * math.exp(-params.pi2 * num / den)


def temporal_influence(friend_model, slot):
    """Friend's probability mass on social clusters at the slot."""
    return float(friend_model.temporal_profile[slot][friend_model.social_flags].sum())


def combined_influence(si, ti, params):
    return params.omega_s * si + params.omega_t * ti


def sample_location(model, slot, rng, influence=None):
    """Draw a planar point for a slot: cluster from the temporal profile
    (social clusters reweighted by 1 + influence), then the cluster Gaussian.
    """
    w = model.temporal_profile[slot].copy()
    if influence:
        for j, inf in influence.items():
            if model.social_flags[j]:
                w[j] *= 1.0 + inf
    w /= w.sum()
    j = int(rng.choice(model.n_components, p=w))
    L = np.linalg.cholesky(model.covs[j])
    return model.means[j] + L @ rng.standard_normal(2)
