"""Problem data model: instances, node index bookkeeping, route mass
propagation via the rocket equation, and numerical solution validation.

Masses are kilograms end to end; only delta-v lives in canonical units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .astro import (
    CanonicalScale,
    CircularOrbit,
    PropulsionParams,
    edelbaum_dv,
    emleo_factor,
    mass_ratio,
)


@dataclass(frozen=True)
class Satellite:
    orbit: CircularOrbit
    payload_kg: float

    def __post_init__(self) -> None:
        if self.payload_kg < 0.0:
            raise ValueError(f"payload mass must be >= 0, got {self.payload_kg}")


@dataclass(frozen=True)
class Instance:
    """Full problem input.

    Radii (r0, r_min and every orbit) are stored in DU; masses in kg.
    depots_initial is optional; when absent the initial placement comes
    from clustering.
    """

    satellites: tuple[Satellite, ...]
    n_d: int
    n_v: int
    m_dry_s: float
    m_dry_d: float
    m_max_l: float
    r0: float
    r_min: float
    prop: PropulsionParams
    scale: CanonicalScale
    depots_initial: tuple[CircularOrbit, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_d < 1 or self.n_v < 1:
            raise ValueError("n_d and n_v must be >= 1")
        if len(self.satellites) < 1:
            raise ValueError("instance needs at least one satellite")
        if self.m_dry_s <= 0.0 or self.m_dry_d <= 0.0:
            raise ValueError("dry masses must be positive")
        if self.m_max_l <= self.m_dry_s + self.m_dry_d:
            raise ValueError(
                "m_max_l must exceed combined servicer and depot dry mass"
            )
        if self.r0 <= 0.0 or self.r_min <= 0.0:
            raise ValueError("r0 and r_min must be positive")
        if self.depots_initial is not None and len(self.depots_initial) != self.n_d:
            raise ValueError("depots_initial length must equal n_d")

    @property
    def n_t(self) -> int:
        return len(self.satellites)

    @property
    def payload_total(self) -> float:
        return sum(s.payload_kg for s in self.satellites)


@dataclass(frozen=True)
class IndexSets:
    """Node index ranges for the routing formulation.

    Start nodes are the original depots plus their virtual copies (one
    copy per extra route); end nodes are one per original depot;
    satellites come last.  All four blocks are contiguous and disjoint.
    """

    n_d: int
    n_v: int
    n_t: int
    D0: range = field(init=False)
    Dv: range = field(init=False)
    Ds: range = field(init=False)
    De: range = field(init=False)
    T: range = field(init=False)

    def __post_init__(self) -> None:
        if self.n_d < 1 or self.n_v < 1 or self.n_t < 1:
            raise ValueError("n_d, n_v and n_t must all be >= 1")
        nd, nv, nt = self.n_d, self.n_v, self.n_t
        object.__setattr__(self, "D0", range(0, nd))
        object.__setattr__(self, "Dv", range(nd, nd * nv))
        object.__setattr__(self, "Ds", range(0, nd * nv))
        object.__setattr__(self, "De", range(nd * nv, nd * (nv + 1)))
        object.__setattr__(self, "T", range(nd * (nv + 1), nd * (nv + 1) + nt))

    def k_prime(self, k: int) -> int:
        """Original depot owning start node k."""
        return k % self.n_d

    def k_dprime(self, k: int) -> int:
        """End node matching start node k."""
        return self.n_d * self.n_v + k % self.n_d

    def depot_group(self, k_prime: int) -> list[int]:
        """Start nodes (original plus virtual) of one original depot."""
        return list(range(k_prime, self.n_d * self.n_v, self.n_d))

    def sat_node(self, j: int) -> int:
        """Global node id of satellite j."""
        return self.n_d * (self.n_v + 1) + j

    def sat_index(self, node: int) -> int:
        """Satellite position from its global node id."""
        return node - self.n_d * (self.n_v + 1)


def build_index_sets(n_d: int, n_v: int, n_t: int) -> IndexSets:
    return IndexSets(n_d, n_v, n_t)


@dataclass(frozen=True)
class DepotPlacement:
    """Depot orbital elements, one orbit per original depot."""

    orbits: tuple[CircularOrbit, ...]

    def __len__(self) -> int:
        return len(self.orbits)

    def __getitem__(self, k: int) -> CircularOrbit:
        return self.orbits[k]

    def __iter__(self):
        return iter(self.orbits)


@dataclass(frozen=True)
class Route:
    """One servicer departure: depot index and ordered satellite stops."""

    depot: int
    satellites: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.satellites)) != len(self.satellites):
            raise ValueError(f"repeated satellite in route {self.satellites}")


@dataclass(frozen=True)
class RoutingSolution:
    """Routes plus the node masses and objective they induce.

    node_masses is keyed by global node id: start nodes carry the mass
    before departure, satellite nodes the mass right after payload
    deployment.  Unused start nodes carry zero.
    """

    routes: tuple[Route, ...]
    node_masses: dict[int, float]
    objective_emleo: float


def route_mass_profile(
    route: Route, placement: DepotPlacement, inst: Instance
) -> tuple[list[float], float]:
    """Masses along a route and the propellant it burns.

    Backward rocket-equation propagation: the servicer arrives back at
    the depot with exactly its dry mass, each leg multiplies the mass
    by exp(dv/ve), each stop adds its payload.  Returns
    ([u_start, u_after_stop_1, ..., u_after_stop_n], propellant_kg).
    """
    if not route.satellites:
        return ([], 0.0)
    depot_orbit = placement[route.depot]
    ve = inst.prop.ve_servicer
    sc = inst.scale
    orbits = [inst.satellites[j].orbit for j in route.satellites]
    payloads = [inst.satellites[j].payload_kg for j in route.satellites]

    u = inst.m_dry_s * mass_ratio(edelbaum_dv(orbits[-1], depot_orbit), ve, sc)
    after_deploy = [u]
    for idx in range(len(orbits) - 1, 0, -1):
        u = (u + payloads[idx]) * mass_ratio(
            edelbaum_dv(orbits[idx - 1], orbits[idx]), ve, sc
        )
        after_deploy.append(u)
    after_deploy.reverse()
    u_start = (after_deploy[0] + payloads[0]) * mass_ratio(
        edelbaum_dv(depot_orbit, orbits[0]), ve, sc
    )
    propellant = u_start - inst.m_dry_s - sum(payloads)
    return ([u_start] + after_deploy, propellant)


def solution_from_routes(
    routes: list[Route] | tuple[Route, ...],
    placement: DepotPlacement,
    inst: Instance,
) -> RoutingSolution:
    """Assemble a RoutingSolution with exact masses for the given routes.

    Routes of one depot are canonicalized by first stop and assigned to
    that depot's start slots in order; the objective charges every used
    route's mass above servicer dry, converted through the depot's
    EMLEO factor.
    """
    idx = build_index_sets(inst.n_d, inst.n_v, inst.n_t)
    by_depot: dict[int, list[Route]] = {}
    for r in routes:
        if r.satellites:
            by_depot.setdefault(r.depot, []).append(r)
    node_masses = {k: 0.0 for k in idx.Ds}
    node_masses.update({idx.sat_node(j): 0.0 for j in range(inst.n_t)})
    ordered: list[Route] = []
    objective = 0.0
    for k_prime in sorted(by_depot):
        group = idx.depot_group(k_prime)
        depot_routes = sorted(by_depot[k_prime], key=lambda r: r.satellites)
        if len(depot_routes) > inst.n_v:
            raise ValueError(
                f"depot {k_prime} has {len(depot_routes)} routes, max {inst.n_v}"
            )
        phi = emleo_factor(placement[k_prime].a, inst.r0, inst.prop, inst.scale)
        for slot, route in zip(group, depot_routes):
            masses, _ = route_mass_profile(route, placement, inst)
            node_masses[slot] = masses[0]
            for pos, j in enumerate(route.satellites):
                node_masses[idx.sat_node(j)] = masses[pos + 1]
            objective += (masses[0] - inst.m_dry_s) * phi
            ordered.append(route)
    return RoutingSolution(tuple(ordered), node_masses, objective)


def validate_solution(
    sol: RoutingSolution,
    placement: DepotPlacement,
    inst: Instance,
    tol: float = 1e-6,
) -> list[str]:
    """Re-check every routing constraint numerically.

    Returns an empty list when the solution is feasible within tol (kg);
    otherwise one message per violated constraint, named by what the
    constraint means.
    """
    violations: list[str] = []
    idx = build_index_sets(inst.n_d, inst.n_v, inst.n_t)
    ve = inst.prop.ve_servicer
    sc = inst.scale

    seen: dict[int, int] = {}
    for r in sol.routes:
        for j in r.satellites:
            seen[j] = seen.get(j, 0) + 1
    for j in range(inst.n_t):
        count = seen.get(j, 0)
        if count != 1:
            violations.append(
                f"visit-exactly-once: satellite {j} visited {count} times"
            )

    per_depot: dict[int, int] = {}
    for r in sol.routes:
        if not 0 <= r.depot < inst.n_d:
            violations.append(f"route-availability: unknown depot {r.depot}")
            continue
        per_depot[r.depot] = per_depot.get(r.depot, 0) + 1
    for k_prime, count in per_depot.items():
        if count > inst.n_v:
            violations.append(
                f"route-availability: depot {k_prime} uses {count} routes, max {inst.n_v}"
            )

    # Mass propagation along each route, checked against the stored node
    # masses; flow continuity is structural for sequence-encoded routes.
    group_mass: dict[int, float] = {k: 0.0 for k in range(inst.n_d)}
    for r in sol.routes:
        if not r.satellites or not 0 <= r.depot < inst.n_d:
            continue
        depot_orbit = placement[r.depot]
        orbits = [inst.satellites[j].orbit for j in r.satellites]
        payloads = [inst.satellites[j].payload_kg for j in r.satellites]
        u = [sol.node_masses.get(idx.sat_node(j), 0.0) for j in r.satellites]
        u_last = u[-1]
        needed = inst.m_dry_s * mass_ratio(
            edelbaum_dv(orbits[-1], depot_orbit), ve, sc
        )
        if u_last < needed - tol:
            violations.append(
                f"mass-propagation-return: route {r.satellites} last mass "
                f"{u_last:.9f} < {needed:.9f}"
            )
        for pos in range(len(orbits) - 1):
            needed = (u[pos + 1] + payloads[pos + 1]) * mass_ratio(
                edelbaum_dv(orbits[pos], orbits[pos + 1]), ve, sc
            )
            if u[pos] < needed - tol:
                violations.append(
                    f"mass-propagation-chain: route {r.satellites} stop {pos} "
                    f"mass {u[pos]:.9f} < {needed:.9f}"
                )
        slot = _route_slot(sol, r, idx)
        u_start = sol.node_masses.get(slot, 0.0) if slot is not None else 0.0
        needed = (u[0] + payloads[0]) * mass_ratio(
            edelbaum_dv(depot_orbit, orbits[0]), ve, sc
        )
        if u_start < needed - tol:
            violations.append(
                f"mass-propagation-start: route {r.satellites} start mass "
                f"{u_start:.9f} < {needed:.9f}"
            )
        group_mass[r.depot] += u_start - inst.m_dry_s

    for node, mass in sol.node_masses.items():
        if mass < -tol:
            violations.append(f"nonnegative-mass: node {node} mass {mass:.9f}")

    objective = 0.0
    for k_prime in range(inst.n_d):
        phi = emleo_factor(placement[k_prime].a, inst.r0, inst.prop, inst.scale)
        launch = (group_mass[k_prime] + inst.m_dry_s + inst.m_dry_d) * phi
        if launch > inst.m_max_l + tol:
            violations.append(
                f"launch-mass-cap: depot {k_prime} launch EMLEO {launch:.6f} "
                f"> {inst.m_max_l:.6f}"
            )
        objective += group_mass[k_prime] * phi
    if abs(objective - sol.objective_emleo) > tol:
        violations.append(
            f"objective-consistency: stored {sol.objective_emleo:.9f} "
            f"!= recomputed {objective:.9f}"
        )
    return violations


def _route_slot(sol: RoutingSolution, route: Route, idx: IndexSets) -> int | None:
    """Start slot a route occupies under the canonical slot assignment."""
    same_depot = sorted(
        (r for r in sol.routes if r.depot == route.depot and r.satellites),
        key=lambda r: r.satellites,
    )
    group = idx.depot_group(route.depot)
    for slot, r in zip(group, same_depot):
        if r == route:
            return slot
    return None
