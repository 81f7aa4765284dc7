"""Alternating solution framework: cluster-based initialization, then
routing and placement solves in turn until the placement stops moving.

Warm starts carry the previous routing into the next routing solve and
each placement solve starts from the current elements, which makes the
reported total non-increasing across iterations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .astro import TWO_PI, CircularOrbit
from .locate import constants_by_depot, minimize_placement, total_emleo
from .model import DepotPlacement, Instance, RoutingSolution
from .routing import build_milp, solve_bnb


@dataclass(frozen=True)
class SolveConfig:
    max_outer_iter: int = 20
    placement_tol: float = 1e-6
    milp_time_limit_s: float | None = 100.0
    seed: int = 0
    kmeans_restarts: int = 10
    nlp_max_iter: int = 500

    def __post_init__(self) -> None:
        if self.max_outer_iter < 0:
            raise ValueError("max_outer_iter must be >= 0")
        if self.placement_tol <= 0.0:
            raise ValueError("placement_tol must be positive")
        if self.milp_time_limit_s is not None and self.milp_time_limit_s < 0.0:
            raise ValueError("milp_time_limit_s must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    index: int
    placement: DepotPlacement
    milp_objective: float
    nlp_objective: float | None
    milp_status: str
    nlp_exit: str | None
    wall_s: float


@dataclass
class SolveReport:
    outcome: str  # converged | max_iterations | evaluation | no_incumbent
    final_placement: DepotPlacement | None
    final_routing: RoutingSolution | None
    iterations: list[IterationRecord] = field(default_factory=list)
    initial_emleo: float | None = None
    final_emleo: float | None = None
    reported_iterations: int = 0
    wall_s: float = 0.0
    failure_reason: str | None = None

    @property
    def converged(self) -> bool:
        return self.outcome == "converged"

    @property
    def reduction_pct(self) -> float | None:
        if not self.initial_emleo or self.final_emleo is None:
            return None
        return 100.0 * (1.0 - self.final_emleo / self.initial_emleo)


def _features(orbits: list[CircularOrbit]) -> np.ndarray:
    """Clustering feature space: radius plus the orbit-normal unit vector.

    The normal drives the plane-change cost and wraps RAAN correctly."""
    rows = []
    for o in orbits:
        nx, ny, nz = o.plane_normal()
        rows.append((o.a, nx, ny, nz))
    return np.array(rows)


def _centroid_orbit(center: np.ndarray) -> CircularOrbit:
    a = float(center[0])
    normal = center[1:4]
    norm = float(np.linalg.norm(normal))
    if norm < 1e-12:
        return CircularOrbit(a, 0.0, 0.0)
    nx, ny, nz = (normal / norm).tolist()
    i = math.acos(min(1.0, max(-1.0, nz)))
    raan = math.atan2(nx, -ny) % TWO_PI if math.sin(i) > 1e-12 else 0.0
    return CircularOrbit(a, i, raan)


def kmeans_init(
    inst: Instance, k: int | None = None, seed: int = 0, restarts: int = 10
) -> DepotPlacement:
    """Seed depot orbits at satellite cluster centroids.

    k-means++ seeding, several restarts keeping the lowest within-cluster
    squared error; empty clusters are reseeded to the point farthest from
    every centroid.  Deterministic for a given seed.
    """
    k = inst.n_d if k is None else k
    if inst.n_t < k:
        raise ValueError(f"cannot seed {k} depots from {inst.n_t} satellites")
    points = _features([s.orbit for s in inst.satellites])
    rng = np.random.default_rng(seed)
    best_sse = math.inf
    best_centers: np.ndarray | None = None
    for _ in range(max(1, restarts)):
        centers = _kmeans_once(points, k, rng)
        sse = _sse(points, centers)
        if sse < best_sse - 1e-15:
            best_sse = sse
            best_centers = centers
    assert best_centers is not None
    return DepotPlacement(tuple(_centroid_orbit(c) for c in best_centers))


def _kmeans_once(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            centers[c] = points[int(rng.integers(n))]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
            centers[c] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[c]) ** 2, axis=1))

    for _ in range(200):
        dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dists, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = points[labels == c]
            if len(members) == 0:
                far = int(np.argmax(dists.min(axis=1)))
                new_centers[c] = points[far]
            else:
                new_centers[c] = members.mean(axis=0)
        if np.allclose(new_centers, centers, rtol=0.0, atol=1e-12):
            centers = new_centers
            break
        centers = new_centers
    return centers


def _sse(points: np.ndarray, centers: np.ndarray) -> float:
    dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return float(dists.min(axis=1).sum())


def placement_distance(pa: DepotPlacement, pb: DepotPlacement) -> float:
    """Euclidean norm over stacked (da, di, wrapped draan) per depot."""
    if len(pa) != len(pb):
        raise ValueError("placements must have the same depot count")
    total = 0.0
    for oa, ob in zip(pa, pb):
        draan = (oa.raan - ob.raan + math.pi) % TWO_PI - math.pi
        total += (oa.a - ob.a) ** 2 + (oa.i - ob.i) ** 2 + draan ** 2
    return math.sqrt(total)


def alternate(
    inst: Instance, initial: DepotPlacement, cfg: SolveConfig
) -> SolveReport:
    """Run routing and placement solves in turn until convergence.

    The reported iteration count excludes the final pair whose placement
    change fell under tolerance; with max_outer_iter 0 only the initial
    placement is priced (one routing solve, no placement update).
    """
    t0 = time.monotonic()
    placement = initial
    warm: RoutingSolution | None = None
    report = SolveReport(outcome="evaluation", final_placement=None, final_routing=None)

    pairs = max(1, cfg.max_outer_iter)
    evaluation_only = cfg.max_outer_iter == 0
    for t in range(1, pairs + 1):
        pair_start = time.monotonic()
        model = build_milp(inst, placement)
        bnb = solve_bnb(model, warm=warm, time_limit_s=cfg.milp_time_limit_s)
        if bnb.solution is None:
            report.outcome = "no_incumbent"
            report.failure_reason = (
                f"routing solve at iteration {t} ended {bnb.status.value} "
                "with no feasible routing"
            )
            report.wall_s = time.monotonic() - t0
            return report
        routing = bnb.solution
        milp_obj = total_emleo(placement, routing, inst)
        if t == 1:
            report.initial_emleo = milp_obj

        if evaluation_only:
            report.iterations.append(
                IterationRecord(
                    0, placement, milp_obj, None, bnb.status.value, None,
                    time.monotonic() - pair_start,
                )
            )
            report.outcome = "evaluation"
            report.final_placement = placement
            report.final_routing = routing
            report.final_emleo = milp_obj
            report.reported_iterations = 0
            report.wall_s = time.monotonic() - t0
            return report

        constants = constants_by_depot(routing, inst)
        nlp = minimize_placement(
            placement, constants, inst, max_iter=cfg.nlp_max_iter
        )
        new_placement = nlp.placement
        nlp_obj = total_emleo(new_placement, routing, inst)
        moved = placement_distance(new_placement, placement)
        report.iterations.append(
            IterationRecord(
                t, new_placement, milp_obj, nlp_obj, bnb.status.value,
                nlp.exit_reason.value, time.monotonic() - pair_start,
            )
        )
        report.final_placement = new_placement
        report.final_routing = routing
        report.final_emleo = nlp_obj
        warm = routing
        if moved < cfg.placement_tol:
            report.outcome = "converged"
            report.reported_iterations = t - 1
            report.wall_s = time.monotonic() - t0
            return report
        placement = new_placement

    report.outcome = "max_iterations"
    report.reported_iterations = pairs
    report.wall_s = time.monotonic() - t0
    return report
