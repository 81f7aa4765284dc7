"""Depot placement optimization with fixed routes.

With routes frozen, only the first and last leg of each route depend on
its depot's orbit, so every route collapses to three constants (A, B, C)
and the propellant becomes

    m_p = A * exp((dv_out + dv_back)/ve) + B * exp(dv_out/ve) - C

with analytic first derivatives in the depot's (a, i, raan).  The
bound-constrained minimization itself is delegated to L-BFGS-B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .astro import (
    TWO_PI,
    CircularOrbit,
    edelbaum_dv,
    edelbaum_dv_grad,
    emleo_factor,
    emleo_factor_grad,
)
from .model import DepotPlacement, Instance, Route, RoutingSolution, route_mass_profile


@dataclass(frozen=True)
class RouteConstants:
    """Depot-independent constants of one route.

    a_kg scales the full-route mass ratio, b_kg the outbound-only ratio,
    c_kg = dry + payloads is the subtractive constant of the propellant
    form; interior_dv is the fixed satellite-to-satellite delta-v sum.
    """

    a_kg: float
    b_kg: float
    c_kg: float
    first_orbit: CircularOrbit
    last_orbit: CircularOrbit
    interior_dv: float
    payload_kg: float


class NlpExit(Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iterations"
    LINE_SEARCH_FAIL = "line_search_failed"


@dataclass(frozen=True)
class NlpResult:
    placement: DepotPlacement
    objective: float
    grad_norm: float
    iterations: int
    exit_reason: NlpExit


def route_constants(route: Route, inst: Instance) -> RouteConstants:
    """Collapse a route's fixed legs into the (A, B, C) constants."""
    if not route.satellites:
        raise ValueError("route_constants requires a non-empty route")
    ve = inst.prop.ve_servicer
    v = inst.scale.v_ms
    orbits = [inst.satellites[j].orbit for j in route.satellites]
    payloads = [inst.satellites[j].payload_kg for j in route.satellites]

    interior = 0.0
    b_kg = payloads[0]  # first stop carries no interior legs
    for pos in range(1, len(orbits)):
        interior += edelbaum_dv(orbits[pos - 1], orbits[pos])
        b_kg += payloads[pos] * math.exp(interior * v / ve)
    a_kg = inst.m_dry_s * math.exp(interior * v / ve)
    c_kg = inst.m_dry_s + sum(payloads)
    return RouteConstants(
        a_kg=a_kg,
        b_kg=b_kg,
        c_kg=c_kg,
        first_orbit=orbits[0],
        last_orbit=orbits[-1],
        interior_dv=interior,
        payload_kg=sum(payloads),
    )


def constants_by_depot(
    routing: RoutingSolution, inst: Instance
) -> dict[int, list[RouteConstants]]:
    """Group routes by depot and precompute their constants."""
    grouped: dict[int, list[RouteConstants]] = {}
    for route in routing.routes:
        if route.satellites:
            grouped.setdefault(route.depot, []).append(route_constants(route, inst))
    return grouped


def _route_value_and_grad(
    depot: CircularOrbit,
    rc: RouteConstants,
    inst: Instance,
    include_delivery: bool,
) -> tuple[float, float, float, float]:
    """One route's objective contribution (before phi) and its gradient.

    With include_delivery the subtractive constant drops to the dry mass,
    so the value is propellant plus delivered payload; the gradient is
    unchanged either way.
    """
    ve = inst.prop.ve_servicer
    v = inst.scale.v_ms
    dv_out = edelbaum_dv(depot, rc.first_orbit)
    dv_back = edelbaum_dv(depot, rc.last_orbit)
    g_out = edelbaum_dv_grad(depot, rc.first_orbit)
    g_back = edelbaum_dv_grad(depot, rc.last_orbit)

    exp_full = math.exp((dv_out + dv_back) * v / ve)
    exp_out = math.exp(dv_out * v / ve)
    c_eff = inst.m_dry_s if include_delivery else rc.c_kg
    value = rc.a_kg * exp_full + rc.b_kg * exp_out - c_eff

    scale = v / ve
    coef_full = rc.a_kg * exp_full * scale
    coef_out = rc.b_kg * exp_out * scale
    d_da = coef_full * (g_out.d_da + g_back.d_da) + coef_out * g_out.d_da
    d_di = coef_full * (g_out.d_di + g_back.d_di) + coef_out * g_out.d_di
    d_draan = coef_full * (g_out.d_draan + g_back.d_draan) + coef_out * g_out.d_draan
    return value, d_da, d_di, d_draan


def objective_and_grad(
    placement: DepotPlacement,
    routes_by_depot: Mapping[int, Sequence[RouteConstants]],
    inst: Instance,
    include_delivery: bool = False,
) -> tuple[float, dict[int, np.ndarray]]:
    """Total EMLEO-weighted objective and its per-depot gradient blocks.

    The default objective is pure propellant EMLEO; with
    include_delivery it also charges the delivered payload mass through
    each depot's conversion factor (the full launch-side accounting the
    routing stage minimizes).  Blocks are independent across depots.
    """
    total = 0.0
    grads: dict[int, np.ndarray] = {}
    for k_prime, constants in routes_by_depot.items():
        depot = placement[k_prime]
        phi = emleo_factor(depot.a, inst.r0, inst.prop, inst.scale)
        dphi = emleo_factor_grad(depot.a, inst.r0, inst.prop, inst.scale)
        block = np.zeros(3)
        for rc in constants:
            value, d_da, d_di, d_draan = _route_value_and_grad(
                depot, rc, inst, include_delivery
            )
            total += value * phi
            block[0] += d_da * phi + value * dphi
            block[1] += d_di * phi
            block[2] += d_draan * phi
        grads[k_prime] = block
    return total, grads


def minimize_placement(
    initial: DepotPlacement,
    routes_by_depot: Mapping[int, Sequence[RouteConstants]],
    inst: Instance,
    max_iter: int = 500,
    include_delivery: bool = True,
    grad_tol: float = 1e-8,
) -> NlpResult:
    """Optimize depot elements for fixed routes with bounded L-BFGS-B.

    Only depots that own at least one route enter the optimization
    vector; the rest keep their current orbit.  Semimajor axes are
    bounded below by the larger of r_min and r0 (the conversion factor
    is undefined below the virtual LEO); inclination stays in [0, pi];
    RAAN runs unbounded and is renormalized on output only.
    """
    active = sorted(k for k, routes in routes_by_depot.items() if routes)
    if not active:
        val, _ = objective_and_grad(initial, routes_by_depot, inst, include_delivery)
        return NlpResult(initial, val, 0.0, 0, NlpExit.CONVERGED)

    a_floor = max(inst.r_min, inst.r0)
    x0 = np.array(
        [v for k in active for v in (initial[k].a, initial[k].i, initial[k].raan)]
    )
    bounds = [(a_floor, None), (0.0, math.pi), (None, None)] * len(active)

    def unpack(x: np.ndarray) -> DepotPlacement:
        orbits = list(initial.orbits)
        for pos, k in enumerate(active):
            a, inc, raan = x[3 * pos : 3 * pos + 3]
            orbits[k] = CircularOrbit(a, inc, raan)
        return DepotPlacement(tuple(orbits))

    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        placement = unpack(x)
        val, grads = objective_and_grad(
            placement, routes_by_depot, inst, include_delivery
        )
        g = np.concatenate([grads[k] for k in active])
        return val, g

    res = minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": max_iter, "maxcor": 10, "ftol": 1e-16, "gtol": grad_tol},
    )

    x = np.asarray(res.x, dtype=float)
    val, g = fun(x)
    pg = _projected_gradient(x, g, bounds)
    pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
    if pg_norm <= grad_tol:
        reason = NlpExit.CONVERGED
    elif res.status == 1 or res.nit >= max_iter:
        reason = NlpExit.MAX_ITER
    else:
        # the line search ran out of representable descent before the
        # projected gradient met the tolerance
        reason = NlpExit.LINE_SEARCH_FAIL

    placement = unpack(x)
    normalized = DepotPlacement(
        tuple(CircularOrbit(o.a, o.i, o.raan % TWO_PI) for o in placement.orbits)
    )
    return NlpResult(normalized, float(val), pg_norm, int(res.nit), reason)


def _projected_gradient(
    x: np.ndarray, g: np.ndarray, bounds: list[tuple[float | None, float | None]]
) -> np.ndarray:
    pg = g.copy()
    for idx, (lo, hi) in enumerate(bounds):
        if lo is not None and x[idx] <= lo + 1e-15 and g[idx] > 0.0:
            pg[idx] = 0.0
        if hi is not None and x[idx] >= hi - 1e-15 and g[idx] < 0.0:
            pg[idx] = 0.0
    return pg


def total_emleo(
    placement: DepotPlacement, routing: RoutingSolution, inst: Instance
) -> float:
    """Objective of a placement/routing pair: launch-side EMLEO of every
    route's mass above servicer dry (propellant plus carried payloads),
    recomputed from scratch."""
    total = 0.0
    for route in routing.routes:
        if not route.satellites:
            continue
        masses, _ = route_mass_profile(route, placement, inst)
        phi = emleo_factor(placement[route.depot].a, inst.r0, inst.prop, inst.scale)
        total += (masses[0] - inst.m_dry_s) * phi
    return total
