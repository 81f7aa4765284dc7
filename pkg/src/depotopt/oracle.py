"""Exhaustive ground-truth solver for tiny routing instances.

Enumerates every assignment of satellites to route slots and every
within-route order, prices each candidate with the rocket-equation
recursion, applies the per-depot launch cap, and returns the global
minimum.  Intentionally independent of the branch-and-bound path so it
can vouch for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations, product

from .astro import edelbaum_dv, emleo_factor
from .model import DepotPlacement, Instance, Route, solution_from_routes, RoutingSolution

MAX_SATELLITES = 7


@dataclass(frozen=True)
class OracleResult:
    routing: RoutingSolution | None
    objective: float
    candidates: int
    infeasible: bool


def enumerate_optimal(
    inst: Instance, placement: DepotPlacement, max_satellites: int = MAX_SATELLITES
) -> OracleResult:
    """Exact optimum of the fixed-placement routing problem by enumeration.

    Refuses instances beyond the satellite cap rather than approximating.
    Ties go to fewer routes, then to the lexicographically smaller route
    set, so results are reproducible.
    """
    n_t = inst.n_t
    if n_t > max_satellites:
        raise ValueError(
            f"oracle enumeration capped at {max_satellites} satellites, got {n_t}"
        )
    n_slots = inst.n_d * inst.n_v
    ve = inst.prop.ve_servicer
    v = inst.scale.v_ms

    # Pairwise mass-ratio factors: depot<->satellite and satellite->satellite.
    sat_orbits = [s.orbit for s in inst.satellites]
    payloads = [s.payload_kg for s in inst.satellites]
    depot_factor = [
        [math.exp(edelbaum_dv(placement[k], o) * v / ve) for o in sat_orbits]
        for k in range(inst.n_d)
    ]
    sat_factor = [
        [
            math.exp(edelbaum_dv(sat_orbits[i], sat_orbits[j]) * v / ve)
            if i != j
            else 1.0
            for j in range(n_t)
        ]
        for i in range(n_t)
    ]
    phi = [
        emleo_factor(placement[k].a, inst.r0, inst.prop, inst.scale)
        for k in range(inst.n_d)
    ]
    dry_s, dry_d = inst.m_dry_s, inst.m_dry_d
    m_max = inst.m_max_l
    cap_tol = 1e-9

    best_obj = math.inf
    best_key: tuple | None = None
    best_routes: list[Route] | None = None
    candidates = 0

    for assignment in product(range(n_slots), repeat=n_t):
        groups: list[list[int]] = [[] for _ in range(n_slots)]
        for sat, slot in enumerate(assignment):
            groups[slot].append(sat)
        pools = [permutations(g) for g in groups]
        for ordering in product(*pools):
            candidates += 1
            group_above_dry = [0.0] * inst.n_d
            feasible = True
            for slot, seq in enumerate(ordering):
                if not seq:
                    continue
                depot = slot % inst.n_d
                u = dry_s * depot_factor[depot][seq[-1]]
                for pos in range(len(seq) - 1, 0, -1):
                    u = (u + payloads[seq[pos]]) * sat_factor[seq[pos - 1]][seq[pos]]
                u_start = (u + payloads[seq[0]]) * depot_factor[depot][seq[0]]
                group_above_dry[depot] += u_start - dry_s
            obj = 0.0
            for depot in range(inst.n_d):
                launch = (group_above_dry[depot] + dry_s + dry_d) * phi[depot]
                if launch > m_max + cap_tol:
                    feasible = False
                    break
                obj += group_above_dry[depot] * phi[depot]
            if not feasible:
                continue
            if obj < best_obj - 1e-12:
                take = True
            elif obj <= best_obj + 1e-12:
                key = _candidate_key(ordering, inst.n_d)
                take = best_key is None or key < best_key
            else:
                take = False
            if take:
                best_obj = obj
                best_key = _candidate_key(ordering, inst.n_d)
                best_routes = [
                    Route(slot % inst.n_d, tuple(seq))
                    for slot, seq in enumerate(ordering)
                    if seq
                ]

    if best_routes is None:
        return OracleResult(None, math.inf, candidates, True)
    routing = solution_from_routes(best_routes, placement, inst)
    return OracleResult(routing, routing.objective_emleo, candidates, False)


def _candidate_key(ordering: tuple, n_d: int) -> tuple:
    used = [seq for seq in ordering if seq]
    per_depot = []
    for depot in range(n_d):
        seqs = sorted(
            tuple(seq) for slot, seq in enumerate(ordering) if seq and slot % n_d == depot
        )
        per_depot.append(tuple(seqs))
    return (len(used), tuple(per_depot))
