"""Fixed-placement routing as a big-M MILP, solved by branch and bound.

Variable families: start edges z[k -> j], return edges z[i -> end(k)]
and inter-satellite edges z[i -> j] per vehicle k, plus one continuous
mass variable per start node and per satellite.  Branching is
most-fractional with lowest-index tie-breaks; node selection is
best-bound with deeper/most-recent nodes first among equal bounds, so
the search dives while the relaxation bound is flat.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.sparse import csr_matrix

from .astro import edelbaum_dv, emleo_factor, mass_ratio
from .lp import LpEngine, LpModel, LpStatus, lp_relax_solve
from .model import (
    DepotPlacement,
    IndexSets,
    Instance,
    Route,
    RoutingSolution,
    build_index_sets,
    solution_from_routes,
    validate_solution,
)

INT_TOL = 1e-6
GAP_REL = 1e-6


class BnbStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE_TIME_LIMIT = "feasible_time_limit"
    INFEASIBLE = "infeasible"
    NO_INCUMBENT = "no_incumbent"


@dataclass
class MilpModel:
    inst: Instance
    placement: DepotPlacement
    idx: IndexSets
    lp: LpModel
    lb: np.ndarray
    ub: np.ndarray
    n_bin: int
    big_m: float
    phi: list[float]
    start_col: dict[tuple[int, int], int]
    ret_col: dict[tuple[int, int], int]
    mid_col: dict[tuple[int, int, int], int]
    col_label: list[str]
    u_col_start: dict[int, int]
    u_col_sat: dict[int, int]
    e_depot: list[list[float]]
    e_sat: list[list[float]]
    proven_infeasible: bool = False


@dataclass
class BnbResult:
    status: BnbStatus
    solution: RoutingSolution | None
    best_bound: float
    node_count: int
    elapsed_s: float
    incumbent_history: list[float] = field(default_factory=list)


def build_milp(
    inst: Instance,
    placement: DepotPlacement,
    content_symmetry: bool | None = None,
    connectivity_tokens: bool | None = None,
) -> MilpModel:
    """Assemble objective, constraint rows and tightened variable bounds.

    Rows: route-use-at-most-once, visit-exactly-once, per-vehicle flow
    continuity, big-M mass propagation for start/chain/return legs, the
    per-depot launch-mass cap, and symmetry breaking that forbids using
    a virtual route slot before its predecessor.  Lexicographic
    first-stop ordering between a depot's route slots is added for small
    models (it speeds optimality proofs) but left out at scale, where it
    gets in the way of finding good solutions early.
    """
    if len(placement) != inst.n_d:
        raise ValueError("placement size must equal n_d")
    for k, orbit in enumerate(placement):
        if orbit.a < inst.r_min - 1e-12:
            raise ValueError(
                f"depot {k} radius {orbit.a} below minimum {inst.r_min}"
            )
    idx = build_index_sets(inst.n_d, inst.n_v, inst.n_t)
    n_t = inst.n_t
    n_start = len(idx.Ds)
    ve = inst.prop.ve_servicer
    sc = inst.scale

    sat_orbits = [s.orbit for s in inst.satellites]
    payloads = [s.payload_kg for s in inst.satellites]
    e_depot = [
        [mass_ratio(edelbaum_dv(placement[kp], o), ve, sc) for o in sat_orbits]
        for kp in range(inst.n_d)
    ]
    e_sat = [
        [
            mass_ratio(edelbaum_dv(sat_orbits[i], sat_orbits[j]), ve, sc)
            if i != j
            else 1.0
            for j in range(n_t)
        ]
        for i in range(n_t)
    ]
    phi = [
        emleo_factor(placement[kp].a, inst.r0, inst.prop, inst.scale)
        for kp in range(inst.n_d)
    ]

    # Variable layout: start edges, return edges, inter-satellite edges,
    # then mass variables (start nodes before satellites).
    start_col: dict[tuple[int, int], int] = {}
    ret_col: dict[tuple[int, int], int] = {}
    mid_col: dict[tuple[int, int, int], int] = {}
    col_label: list[str] = []
    for k in idx.Ds:
        for j in range(n_t):
            start_col[(k, j)] = len(col_label)
            col_label.append(f"z[start,k={k},j={j}]")
    for k in idx.Ds:
        for i in range(n_t):
            ret_col[(k, i)] = len(col_label)
            col_label.append(f"z[return,k={k},i={i}]")
    for k in idx.Ds:
        for i in range(n_t):
            for j in range(n_t):
                if i != j:
                    mid_col[(k, i, j)] = len(col_label)
                    col_label.append(f"z[mid,k={k},i={i},j={j}]")
    n_bin = len(col_label)
    u_col_start = {}
    for k in idx.Ds:
        u_col_start[k] = len(col_label)
        col_label.append(f"u[start,{k}]")
    u_col_sat = {}
    for j in range(n_t):
        u_col_sat[j] = len(col_label)
        col_label.append(f"u[sat,{j}]")
    # Auxiliary connectivity tokens (continuous): one unit consumed per
    # satellite, sourced only through start edges and carried only on
    # used edges.  They make depot-disconnected edge cycles infeasible
    # and keep the relaxation connected to real route costs.  Worth it
    # on small models; at scale the extra degeneracy slows hot re-solves
    # far more than the bound gain is worth.
    if connectivity_tokens is None:
        connectivity_tokens = n_bin <= 600
    f_start_col: dict[tuple[int, int], int] = {}
    f_mid_col: dict[tuple[int, int], int] = {}
    if connectivity_tokens:
        for k in idx.Ds:
            for j in range(n_t):
                f_start_col[(k, j)] = len(col_label)
                col_label.append(f"f[start,k={k},j={j}]")
        for i in range(n_t):
            for j in range(n_t):
                if i != j:
                    f_mid_col[(i, j)] = len(col_label)
                    col_label.append(f"f[mid,i={i},j={j}]")
    n_var = len(col_label)

    # Variable bounds.  Satellite masses get Bellman-style lower bounds
    # (every satellite still has to fly home) and upper bounds propagated
    # from the launch-cap limit on start masses; both shrink the big-M
    # values row by row.
    lb = np.zeros(n_var)
    ub = np.ones(n_var)
    dry_s, dry_d, m_max = inst.m_dry_s, inst.m_dry_d, inst.m_max_l
    proven_infeasible = False

    u_cap_start = [max(0.0, m_max / phi[kp] - dry_d) for kp in range(inst.n_d)]
    u_cap_global = max(u_cap_start) if u_cap_start else 0.0
    all_factors = sorted(
        [f for row in e_depot for f in row] + [f for row in e_sat for f in row],
        reverse=True,
    )
    chain = dry_s + sum(payloads)
    for f in all_factors[: n_t + 1]:
        chain *= f
    u_top = min(u_cap_global, chain)

    # Cheapest-completion floors, per depot (the servicer must return to
    # the depot it left) and globally (minimum over depots).
    low_by_depot: list[list[float]] = []
    for kp in range(inst.n_d):
        ret = [dry_s * e_depot[kp][j] for j in range(n_t)]
        lo = list(ret)
        for _ in range(n_t):
            changed = False
            for j in range(n_t):
                best = ret[j]
                for l in range(n_t):
                    if l != j:
                        cand = (lo[l] + payloads[l]) * e_sat[j][l]
                        if cand < best:
                            best = cand
                if best < lo[j] - 1e-12:
                    lo[j] = best
                    changed = True
            if not changed:
                break
        low_by_depot.append(lo)
    low = [min(low_by_depot[kp][j] for kp in range(inst.n_d)) for j in range(n_t)]

    high = [
        max(
            (u_cap_start[kp] - payloads[j] * e_depot[kp][j]) / e_depot[kp][j]
            for kp in range(inst.n_d)
        )
        for j in range(n_t)
    ]
    for _ in range(n_t):
        changed = False
        for j in range(n_t):
            best = high[j]
            for i in range(n_t):
                if i != j:
                    cand = high[i] / e_sat[i][j] - payloads[j]
                    if cand > best:
                        best = cand
            if best > high[j] + 1e-12:
                high[j] = best
                changed = True
        if not changed:
            break
    high = [min(h, u_top) for h in high]

    for k in idx.Ds:
        col = u_col_start[k]
        lb[col] = 0.0
        ub[col] = u_cap_start[idx.k_prime(k)]
    for j in range(n_t):
        col = u_col_sat[j]
        if high[j] < low[j] - 1e-9:
            proven_infeasible = True
        lb[col] = min(low[j], high[j])
        ub[col] = max(low[j], high[j])
    for col in f_start_col.values():
        lb[col] = 0.0
        ub[col] = float(n_t)
    for col in f_mid_col.values():
        lb[col] = 0.0
        ub[col] = float(n_t - 1)

    c = np.zeros(n_var)
    for k in idx.Ds:
        kp = idx.k_prime(k)
        c[u_col_start[k]] = phi[kp]
        for j in range(n_t):
            c[start_col[(k, j)]] = -dry_s * phi[kp]

    ub_rows: list[tuple[list[int], list[float], float]] = []
    eq_rows: list[tuple[list[int], list[float], float]] = []

    # Route use at most once per start node.
    for k in idx.Ds:
        cols = [start_col[(k, j)] for j in range(n_t)]
        ub_rows.append((cols, [1.0] * n_t, 1.0))

    # Visit exactly once.
    for j in range(n_t):
        cols = [start_col[(k, j)] for k in idx.Ds]
        vals = [1.0] * len(cols)
        for k in idx.Ds:
            for i in range(n_t):
                if i != j:
                    cols.append(mid_col[(k, i, j)])
                    vals.append(1.0)
        eq_rows.append((cols, vals, 1.0))

    # Flow continuity per vehicle and satellite.
    for k in idx.Ds:
        for j in range(n_t):
            cols = [start_col[(k, j)], ret_col[(k, j)]]
            vals = [1.0, -1.0]
            for i in range(n_t):
                if i != j:
                    cols.append(mid_col[(k, i, j)])
                    vals.append(1.0)
                    cols.append(mid_col[(k, j, i)])
                    vals.append(-1.0)
            eq_rows.append((cols, vals, 0.0))

    # Mass propagation, start legs: u_k >= (u_j + m_j) e - M (1 - z).
    # Each row gets the smallest M that frees it when its edge is off,
    # derived from the variable bounds above.
    big_m = 0.0
    for k in idx.Ds:
        kp = idx.k_prime(k)
        for j in range(n_t):
            e = e_depot[kp][j]
            m_row = max(0.0, (ub[u_col_sat[j]] + payloads[j]) * e - lb[u_col_start[k]])
            big_m = max(big_m, m_row)
            ub_rows.append(
                (
                    [u_col_start[k], u_col_sat[j], start_col[(k, j)]],
                    [-1.0, e, m_row],
                    m_row - payloads[j] * e,
                )
            )

    # Mass propagation, satellite chains (edge binaries summed over vehicles).
    for i in range(n_t):
        for j in range(n_t):
            if i == j:
                continue
            e = e_sat[i][j]
            m_row = max(0.0, (ub[u_col_sat[j]] + payloads[j]) * e - lb[u_col_sat[i]])
            big_m = max(big_m, m_row)
            cols = [u_col_sat[i], u_col_sat[j]]
            vals = [-1.0, e]
            for k in idx.Ds:
                cols.append(mid_col[(k, i, j)])
                vals.append(m_row)
            ub_rows.append((cols, vals, m_row - payloads[j] * e))

    # Mass propagation, return legs: u_i >= dry * e - M (1 - z).  When the
    # cheapest-return lower bound already covers this depot's return the
    # row is redundant and M drops to zero.
    for k in idx.Ds:
        kp = idx.k_prime(k)
        for i in range(n_t):
            e = e_depot[kp][i]
            m_row = max(0.0, dry_s * e - lb[u_col_sat[i]])
            big_m = max(big_m, m_row)
            ub_rows.append(
                (
                    [u_col_sat[i], ret_col[(k, i)]],
                    [-1.0, m_row],
                    m_row - dry_s * e,
                )
            )

    # Aggregated mass floors.  Exactly one outbound edge is active per
    # used start node and per satellite, so each mass variable dominates
    # the cheapest-completion floor of whichever edge it selects, with
    # the completion returning to the owning depot.  These keep the
    # relaxation honest about the cost of using a route.
    m_min = min(payloads) if payloads else 0.0
    for k in idx.Ds:
        kp = idx.k_prime(k)
        cols = [u_col_start[k]]
        vals = [-1.0]
        for j in range(n_t):
            cols.append(start_col[(k, j)])
            vals.append((low_by_depot[kp][j] + payloads[j]) * e_depot[kp][j])
        ub_rows.append((cols, vals, 0.0))
    for i in range(n_t):
        cols = [u_col_sat[i]]
        vals = [-1.0]
        for k in idx.Ds:
            kp = idx.k_prime(k)
            cols.append(ret_col[(k, i)])
            vals.append(dry_s * e_depot[kp][i])
        for j in range(n_t):
            if j == i:
                continue
            for k in idx.Ds:
                kp = idx.k_prime(k)
                cols.append(mid_col[(k, i, j)])
                vals.append((low_by_depot[kp][j] + payloads[j]) * e_sat[i][j])
        ub_rows.append((cols, vals, 0.0))

    # Token-coupled mass floors: every token crossing an edge stands for
    # one more undelivered payload aboard, so mass dominates dry plus
    # payload times token count along the selected edge.
    if m_min > 0.0 and connectivity_tokens:
        for k in idx.Ds:
            kp = idx.k_prime(k)
            cols = [u_col_start[k]]
            vals = [-1.0]
            for j in range(n_t):
                e = e_depot[kp][j]
                cols.append(start_col[(k, j)])
                vals.append((dry_s + payloads[j] - m_min) * e)
                cols.append(f_start_col[(k, j)])
                vals.append(m_min * e)
            ub_rows.append((cols, vals, 0.0))
        for i in range(n_t):
            cols = [u_col_sat[i]]
            vals = [-1.0]
            for k in idx.Ds:
                kp = idx.k_prime(k)
                cols.append(ret_col[(k, i)])
                vals.append(dry_s * e_depot[kp][i])
            for j in range(n_t):
                if j == i:
                    continue
                e = e_sat[i][j]
                for k in idx.Ds:
                    cols.append(mid_col[(k, i, j)])
                    vals.append((dry_s + payloads[j] - m_min) * e)
                cols.append(f_mid_col[(i, j)])
                vals.append(m_min * e)
            ub_rows.append((cols, vals, 0.0))

    # Token conservation and capacity: each satellite nets one token,
    # tokens ride only on active edges.
    if connectivity_tokens:
        for j in range(n_t):
            cols = [f_start_col[(k, j)] for k in idx.Ds]
            vals = [1.0] * len(cols)
            for i in range(n_t):
                if i != j:
                    cols.append(f_mid_col[(i, j)])
                    vals.append(1.0)
                    cols.append(f_mid_col[(j, i)])
                    vals.append(-1.0)
            eq_rows.append((cols, vals, 1.0))
        for k in idx.Ds:
            for j in range(n_t):
                ub_rows.append(
                    ([f_start_col[(k, j)], start_col[(k, j)]], [1.0, -float(n_t)], 0.0)
                )
        for i in range(n_t):
            for j in range(n_t):
                if i == j:
                    continue
                cols = [f_mid_col[(i, j)]]
                vals = [1.0]
                for k in idx.Ds:
                    cols.append(mid_col[(k, i, j)])
                    vals.append(-float(n_t - 1))
                ub_rows.append((cols, vals, 0.0))

    # Vehicle linking: a vehicle moves out of a satellite only if its
    # start edge is active, which bars start-less edge cycles.
    for k in idx.Ds:
        for i in range(n_t):
            cols = [ret_col[(k, i)]]
            vals = [1.0]
            for j in range(n_t):
                if j != i:
                    cols.append(mid_col[(k, i, j)])
                    vals.append(1.0)
            for j in range(n_t):
                cols.append(start_col[(k, j)])
                vals.append(-1.0)
            ub_rows.append((cols, vals, 0.0))

    # Launch-mass cap per original depot.
    for kp in range(inst.n_d):
        if (dry_s + dry_d) * phi[kp] > m_max + 1e-9:
            proven_infeasible = True
        cols = []
        vals = []
        for k in idx.depot_group(kp):
            cols.append(u_col_start[k])
            vals.append(phi[kp])
            for j in range(n_t):
                cols.append(start_col[(k, j)])
                vals.append(-dry_s * phi[kp])
        ub_rows.append((cols, vals, m_max - (dry_s + dry_d) * phi[kp]))

    # Symmetry breaking between a depot's interchangeable route slots:
    # slot p is unusable before slot p - n_d, and (small models) the
    # later slot's first stop must carry a higher satellite index, which
    # removes content-swapped duplicates of the same physical solution.
    if content_symmetry is None:
        content_symmetry = n_bin <= 600
    for p in idx.Dv:
        cols = [start_col[(p, j)] for j in range(n_t)]
        vals = [1.0] * n_t
        cols += [start_col[(p - inst.n_d, j)] for j in range(n_t)]
        vals += [-1.0] * n_t
        ub_rows.append((cols, vals, 0.0))
        if content_symmetry:
            for j in range(n_t):
                cols = [start_col[(p, j)]]
                vals = [1.0]
                for j2 in range(j):
                    cols.append(start_col[(p - inst.n_d, j2)])
                    vals.append(-1.0)
                ub_rows.append((cols, vals, 0.0))

    a_ub, b_ub = _rows_to_csr(ub_rows, n_var)
    a_eq, b_eq = _rows_to_csr(eq_rows, n_var)
    lp = LpModel(c=c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq)
    return MilpModel(
        inst=inst,
        placement=placement,
        idx=idx,
        lp=lp,
        lb=lb,
        ub=ub,
        n_bin=n_bin,
        big_m=big_m,
        phi=phi,
        start_col=start_col,
        ret_col=ret_col,
        mid_col=mid_col,
        col_label=col_label,
        u_col_start=u_col_start,
        u_col_sat=u_col_sat,
        e_depot=e_depot,
        e_sat=e_sat,
        proven_infeasible=proven_infeasible,
    )


def _rows_to_csr(
    rows: list[tuple[list[int], list[float], float]], n_var: int
) -> tuple[csr_matrix, np.ndarray]:
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    rhs = []
    for cols, vals, b in rows:
        indices.extend(cols)
        data.extend(vals)
        indptr.append(len(indices))
        rhs.append(b)
    mat = csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr, dtype=np.int32)),
        shape=(len(rows), n_var),
    )
    return mat, np.array(rhs)


def dump_model(model: MilpModel) -> str:
    """Human-readable listing of the model, one constraint per line."""
    lines = [
        f"variables: {len(model.col_label)} ({model.n_bin} binary)",
        f"big-M: {model.big_m:.6f}",
        "minimize: "
        + " + ".join(
            f"{model.lp.c[col]:+.6f}*{model.col_label[col]}"
            for col in np.nonzero(model.lp.c)[0]
        ),
    ]
    for kind, mat, rhs, sense in (
        ("ub", model.lp.a_ub, model.lp.b_ub, "<="),
        ("eq", model.lp.a_eq, model.lp.b_eq, "=="),
    ):
        mat = mat.tocsr()
        for r in range(mat.shape[0]):
            terms = " + ".join(
                f"{mat.data[p]:+.6f}*{model.col_label[mat.indices[p]]}"
                for p in range(mat.indptr[r], mat.indptr[r + 1])
            )
            lines.append(f"{kind}[{r}]: {terms} {sense} {rhs[r]:.6f}")
    for col in range(len(model.col_label)):
        lines.append(
            f"bound: {model.lb[col]:.6f} <= {model.col_label[col]} <= {model.ub[col]:.6f}"
        )
    return "\n".join(lines)


class _Node:
    __slots__ = ("var", "val", "parent", "depth", "frac", "parent_bound")

    def __init__(
        self,
        var: int | None,
        val: float,
        parent: "_Node | None",
        frac: float = 0.0,
        parent_bound: float = -math.inf,
    ):
        self.var = var
        self.val = val
        self.parent = parent
        self.depth = 0 if parent is None else parent.depth + 1
        self.frac = frac
        self.parent_bound = parent_bound


def _node_bounds(
    model: MilpModel, node: _Node, base_lb: np.ndarray, base_ub: np.ndarray
) -> tuple[np.ndarray, np.ndarray] | None:
    """Bounds for a node, or None when its fixings clash with globally
    tightened bounds (the node then holds no improving solution)."""
    lb = base_lb.copy()
    ub = base_ub.copy()
    cur = node
    while cur is not None and cur.var is not None:
        if cur.val < base_lb[cur.var] - 0.5 or cur.val > base_ub[cur.var] + 0.5:
            return None
        lb[cur.var] = cur.val
        ub[cur.var] = cur.val
        cur = cur.parent
    return (lb, ub)


def _gap_tol(objective: float) -> float:
    return GAP_REL * max(1.0, abs(objective))


def repair_warm_start(
    model: MilpModel, warm: RoutingSolution
) -> RoutingSolution | None:
    """Re-price a previous routing under this model's placement.

    Node masses are recomputed from the routes; the repaired solution is
    kept only if it still satisfies every hard constraint (in practice
    the launch cap is the one that can break).
    """
    routes = [r for r in warm.routes if r.satellites]
    if not routes:
        return None
    covered: set[int] = set()
    for r in routes:
        covered.update(r.satellites)
    if covered != set(range(model.inst.n_t)):
        return None
    try:
        sol = solution_from_routes(routes, model.placement, model.inst)
    except ValueError:
        return None
    if validate_solution(sol, model.placement, model.inst):
        return None
    return sol


def solve_bnb(
    model: MilpModel,
    warm: RoutingSolution | None = None,
    time_limit_s: float | None = None,
) -> BnbResult:
    """Branch and bound over the LP relaxation.

    Optimal means the bound gap closed to 1e-6 relative; a time limit
    with an incumbent reports the incumbent and the proven bound; a time
    limit with no incumbent is reported as such, never as infeasibility.
    """
    t0 = time.monotonic()
    history: list[float] = []
    if model.proven_infeasible:
        return BnbResult(BnbStatus.INFEASIBLE, None, math.inf, 0, _since(t0), history)

    incumbent: RoutingSolution | None = None
    inc_obj = math.inf
    warm_edges: list[tuple[int, tuple]] | None = None
    base_lb = model.lb.copy()
    base_ub = model.ub.copy()
    if warm is not None:
        repaired = repair_warm_start(model, warm)
        if repaired is not None:
            incumbent = repaired
            inc_obj = repaired.objective_emleo
            history.append(inc_obj)
            warm_edges = _warm_edge_list(model, repaired)

    engine = LpEngine(model.lp, model.lb, model.ub)
    heap: list[tuple[float, int, int, _Node]] = []
    seq = 0
    heapq.heappush(heap, (-math.inf, 0, 0, _Node(None, 0.0, None)))
    nodes = 0
    pruned_bounds: list[float] = []
    timed_out = False
    rc_dirty = incumbent is not None

    # Pseudocost state for reliability branching: mean objective gain per
    # unit of fractionality moved, per direction, learned from strong
    # branching probes and from realized child bounds.
    n_bin = model.n_bin
    pc_up = np.zeros(n_bin)
    pc_dn = np.zeros(n_bin)
    cnt_up = np.zeros(n_bin, dtype=np.int32)
    cnt_dn = np.zeros(n_bin, dtype=np.int32)

    def note_gain(var: int, direction: float, frac: float, gain: float) -> None:
        gain = max(0.0, gain)
        if direction >= 0.5:
            step = max(1e-6, 1.0 - frac)
            pc_up[var] = (pc_up[var] * cnt_up[var] + gain / step) / (cnt_up[var] + 1)
            cnt_up[var] += 1
        else:
            step = max(1e-6, frac)
            pc_dn[var] = (pc_dn[var] * cnt_dn[var] + gain / step) / (cnt_dn[var] + 1)
            cnt_dn[var] += 1

    while heap:
        if time_limit_s is not None and time.monotonic() - t0 >= time_limit_s:
            timed_out = True
            break
        if rc_dirty:
            # Reduced-cost bound tightening against the incumbent: any
            # better solution must respect the base-relaxation reduced
            # costs, so binaries too expensive to flip get fixed globally.
            rc_dirty = False
            threshold = inc_obj - _gap_tol(inc_obj)
            for _ in range(4):
                base_sol = engine.solve(
                    base_lb.copy(), base_ub.copy(), want_marginals=True
                )
                nodes += 1
                if base_sol.status is LpStatus.INFEASIBLE:
                    heap.clear()
                    pruned_bounds.append(inc_obj)
                    break
                if base_sol.objective >= threshold:
                    heap.clear()
                    pruned_bounds.append(base_sol.objective)
                    break
                if _reduced_cost_fix(
                    model, base_sol, threshold, base_lb, base_ub
                ) == 0:
                    break
            if not heap:
                break
        est, negdepth, negseq, node = heapq.heappop(heap)
        if incumbent is not None and est >= inc_obj - _gap_tol(inc_obj):
            heapq.heappush(heap, (est, negdepth, negseq, node))
            break
        # Plunge: keep walking depth-first into the chosen child while it
        # survives; a dead child hands over to its sibling inline, and a
        # surviving child banks the sibling on the heap.  Consecutive
        # solves differ by one bound, so the engine restarts hot, and
        # integer leaves arrive early.
        current: _Node | None = node
        fallback: _Node | None = None
        while current is not None:
            if time_limit_s is not None and time.monotonic() - t0 >= time_limit_s:
                timed_out = True
                for pending in (current, fallback):
                    if pending is not None:
                        seq += 1
                        heapq.heappush(
                            heap,
                            (
                                max(pending.parent_bound, -math.inf),
                                -pending.depth,
                                -seq,
                                pending,
                            ),
                        )
                break
            node = current
            current = None
            dead = False
            nb = _node_bounds(model, node, base_lb, base_ub)
            if nb is None:
                dead = True
            else:
                sol = engine.solve(nb[0], nb[1], want_marginals=True)
                nodes += 1
                if sol.status is LpStatus.INFEASIBLE:
                    dead = True
            if not dead:
                bound = sol.objective
                if node.var is not None and node.parent_bound > -math.inf:
                    note_gain(node.var, node.val, node.frac, bound - node.parent_bound)
                if incumbent is not None and bound >= inc_obj - _gap_tol(inc_obj):
                    pruned_bounds.append(bound)
                    dead = True
            if dead:
                current, fallback = fallback, None
                continue
            x = sol.x
            zb = x[:n_bin]
            dist = np.minimum(zb - np.floor(zb + INT_TOL), np.ceil(zb - INT_TOL) - zb)
            dist = np.maximum(dist, 0.0)
            if float(dist.max(initial=0.0)) <= INT_TOL:
                outcome = _handle_integer_point(model, x, node)
                if isinstance(outcome, RoutingSolution):
                    if outcome.objective_emleo < inc_obj - 1e-12:
                        incumbent = outcome
                        inc_obj = outcome.objective_emleo
                        history.append(inc_obj)
                        rc_dirty = True
                        warm_edges = _warm_edge_list(model, incumbent)
                    current, fallback = fallback, None
                    continue
                if outcome is None:
                    current, fallback = fallback, None
                    continue  # every completion keeps an orphan cycle
                branch_var = outcome
                toward = 1.0
                child_ests = (bound, bound)
            else:
                choice = None
                if n_bin > 600:
                    choice = _route_building_choice(
                        model, node, zb, base_lb, base_ub, warm_edges
                    )
                if choice is not None:
                    branch_var, toward = choice
                    child_ests = (bound, bound)
                else:
                    fractional = np.nonzero(dist > INT_TOL)[0]
                    order = fractional[np.lexsort((fractional, -dist[fractional]))]
                    # Strong-branch candidates without two-sided pseudocost
                    # history (small models only); probe bounds double as
                    # child ordering estimates.
                    sb_results: dict[int, tuple[float, float]] = {}
                    probes = 0
                    if n_bin <= 600:
                        for cand in order[:8]:
                            c = int(cand)
                            if cnt_up[c] >= 1 and cnt_dn[c] >= 1:
                                continue
                            if probes >= 4:
                                break
                            probes += 1
                            cand_frac = float(zb[c] - math.floor(zb[c]))
                            gains: list[float] = []
                            for direction in (0.0, 1.0):
                                lbp = nb[0].copy()
                                ubp = nb[1].copy()
                                lbp[c] = direction
                                ubp[c] = direction
                                probe = engine.solve(lbp, ubp)
                                nodes += 1
                                child_bound = (
                                    probe.objective
                                    if probe.status is LpStatus.OPTIMAL
                                    else math.inf
                                )
                                gains.append(child_bound)
                                note_gain(
                                    c,
                                    direction,
                                    cand_frac,
                                    (
                                        child_bound
                                        if child_bound < math.inf
                                        else bound + 1e9
                                    )
                                    - bound,
                                )
                            sb_results[c] = (gains[0], gains[1])
                    frac = zb[order] - np.floor(zb[order])
                    up_score = np.maximum(pc_up[order] * (1.0 - frac), 1e-9)
                    dn_score = np.maximum(pc_dn[order] * frac, 1e-9)
                    scores = up_score * dn_score
                    branch_var = int(order[int(np.argmax(scores))])
                    down_est, up_est = sb_results.get(branch_var, (bound, bound))
                    if down_est >= math.inf and up_est >= math.inf:
                        current, fallback = fallback, None
                        continue
                    child_ests = (down_est, up_est)
                    toward = 1.0 if zb[branch_var] >= 0.5 else 0.0
            # Subtree reduced-cost fixing: binaries too expensive to move
            # off their bound in this node's relaxation stay put below it.
            base = node
            if incumbent is not None and sol.lower_marginals is not None:
                margin = (inc_obj - _gap_tol(inc_obj)) - bound
                lom = sol.lower_marginals[:n_bin]
                upm = sol.upper_marginals[:n_bin]
                fixable = np.nonzero(
                    ((zb <= INT_TOL) & (lom >= margin))
                    | ((zb >= 1.0 - INT_TOL) & (-upm >= margin))
                )[0]
                for col in fixable:
                    c = int(col)
                    if c != branch_var:
                        base = _Node(c, float(round(zb[c])), base)
            node_frac = float(zb[branch_var]) - math.floor(float(zb[branch_var]))
            if fallback is not None:
                # the previous toward-child survived, so its sibling
                # becomes an ordinary open node
                seq += 1
                heapq.heappush(
                    heap,
                    (
                        max(fallback.parent_bound, -math.inf),
                        -fallback.depth,
                        -seq,
                        fallback,
                    ),
                )
                fallback = None
            est_toward = child_ests[int(toward)]
            est_away = child_ests[int(1.0 - toward)]
            child_toward = None
            if est_toward < math.inf and not (
                incumbent is not None
                and est_toward >= inc_obj - _gap_tol(inc_obj)
            ):
                child_toward = _Node(branch_var, toward, base, node_frac, bound)
            child_away = None
            if est_away < math.inf and not (
                incumbent is not None and est_away >= inc_obj - _gap_tol(inc_obj)
            ):
                child_away = _Node(branch_var, 1.0 - toward, base, node_frac, bound)
            elif est_away < math.inf:
                pruned_bounds.append(est_away)
            if child_toward is not None:
                current = child_toward
                fallback = child_away
            else:
                if est_toward < math.inf:
                    pruned_bounds.append(est_toward)
                current = child_away
                fallback = None
        if timed_out:
            break

    open_bounds = [entry[0] for entry in heap]
    lb_candidates = open_bounds + pruned_bounds
    finite = [b for b in lb_candidates if b != -math.inf]
    if incumbent is None:
        if timed_out:
            bound = min(finite) if finite else -math.inf
            return BnbResult(
                BnbStatus.NO_INCUMBENT, None, bound, nodes, _since(t0), history
            )
        return BnbResult(BnbStatus.INFEASIBLE, None, math.inf, nodes, _since(t0), history)

    if lb_candidates:
        bound = min(lb_candidates)
        if bound == -math.inf:
            bound = min(finite) if finite else inc_obj
    else:
        bound = inc_obj
    closed = bound >= inc_obj - _gap_tol(inc_obj)
    if timed_out and not closed:
        status = BnbStatus.FEASIBLE_TIME_LIMIT
    elif closed or not heap:
        status = BnbStatus.OPTIMAL
        bound = max(bound, inc_obj - _gap_tol(inc_obj))
    else:
        status = BnbStatus.FEASIBLE_TIME_LIMIT
    return BnbResult(status, incumbent, bound, nodes, _since(t0), history)


def _since(t0: float) -> float:
    return time.monotonic() - t0


def _reduced_cost_fix(
    model: MilpModel,
    base_sol,
    threshold: float,
    base_lb: np.ndarray,
    base_ub: np.ndarray,
) -> int:
    """Fix binaries whose reduced cost proves the other value cannot beat
    the incumbent.  Tightens the shared base bounds; returns the number
    of newly fixed variables."""
    n_bin = model.n_bin
    x = base_sol.x[:n_bin]
    lom = base_sol.lower_marginals[:n_bin]
    upm = base_sol.upper_marginals[:n_bin]
    lb = base_lb[:n_bin]
    ub = base_ub[:n_bin]
    free = lb < ub
    margin = threshold - base_sol.objective
    at_lower = free & (x <= lb + 1e-9) & (lom >= margin)
    at_upper = free & (x >= ub - 1e-9) & (-upm >= margin)
    base_ub[:n_bin][at_lower] = lb[at_lower]
    base_lb[:n_bin][at_upper] = ub[at_upper]
    return int(at_lower.sum() + at_upper.sum())


def _handle_integer_point(
    model: MilpModel, x: np.ndarray, node: _Node
) -> RoutingSolution | int | None:
    """Turn an integral LP point into a routing solution.

    Returns the solution, or the next orphan-cycle edge to branch on
    when depot-disconnected zero-cost cycles are present, or None when
    every completion of this node keeps such a cycle (prune).
    """
    idx = model.idx
    inst = model.inst
    routes: list[Route] = []
    covered: set[int] = set()
    for k in idx.Ds:
        start_j = None
        for j in range(inst.n_t):
            if x[model.start_col[(k, j)]] > 0.5:
                start_j = j
                break
        if start_j is None:
            continue
        seq = [start_j]
        current = start_j
        for _ in range(inst.n_t):
            nxt = None
            for j in range(inst.n_t):
                if j != current and x[model.mid_col[(k, current, j)]] > 0.5:
                    nxt = j
                    break
            if nxt is None:
                break
            seq.append(nxt)
            current = nxt
        routes.append(Route(idx.k_prime(k), tuple(seq)))
        covered.update(seq)

    orphans = set(range(inst.n_t)) - covered
    if orphans:
        fixed = _fixed_vars(node)
        for (k, i, j), col in sorted(model.mid_col.items(), key=lambda kv: kv[1]):
            if (i in orphans or j in orphans) and x[col] > 0.5 and col not in fixed:
                return col
        return None
    return solution_from_routes(routes, model.placement, model.inst)


def _fixed_vars(node: _Node) -> set[int]:
    fixed: set[int] = set()
    cur = node
    while cur is not None and cur.var is not None:
        fixed.add(cur.var)
        cur = cur.parent
    return fixed


def _warm_edge_list(
    model: MilpModel, warm: RoutingSolution
) -> list[tuple[int, tuple]]:
    """Edge columns of a warm routing in route-building order, using the
    same slot assignment as the canonical solution layout."""
    idx = model.idx
    by_depot: dict[int, list] = {}
    for route in warm.routes:
        if route.satellites:
            by_depot.setdefault(route.depot, []).append(route)
    edges: list[tuple[int, tuple]] = []
    for k_prime in sorted(by_depot):
        group = idx.depot_group(k_prime)
        for slot, route in zip(group, sorted(by_depot[k_prime], key=lambda r: r.satellites)):
            seq = route.satellites
            edges.append((model.start_col[(slot, seq[0])], ("start", slot, seq[0])))
            for a, b in zip(seq, seq[1:]):
                edges.append((model.mid_col[(slot, a, b)], ("mid", slot, a, b)))
            edges.append((model.ret_col[(slot, seq[-1])], ("ret", slot, seq[-1])))
    return edges


def _route_building_choice(
    model: MilpModel,
    node: _Node,
    zb: np.ndarray,
    base_lb: np.ndarray,
    base_ub: np.ndarray,
    warm_edges: list[tuple[int, tuple]] | None = None,
) -> tuple[int, float] | None:
    """Next commitment for large-model plunges: grow one route at a time.

    Follows each vehicle's already-fixed chain and extends the frontier
    along the cheapest remaining leg (opening new route slots when the
    chains run dry), then closes chains with their return edges once
    every satellite is covered.  When a warm routing is known its edges
    take precedence, so the first plunge reproduces it and the banned
    siblings explore its one-edge neighborhoods.  Keeps every fixing
    locally consistent, so wrong guesses surface immediately and cost
    one flip.
    """
    inst = model.inst
    idx = model.idx
    n_t = inst.n_t

    fixed: dict[int, float] = {}
    cur = node
    while cur is not None and cur.var is not None:
        fixed.setdefault(cur.var, cur.val)
        cur = cur.parent

    def fixed_val(col: int) -> float | None:
        v = fixed.get(col)
        if v is not None:
            return v
        if base_lb[col] > 0.5:
            return 1.0
        if base_ub[col] < 0.5:
            return 0.0
        return None

    visited: set[int] = set()
    frontiers: list[tuple[int, int | None, bool]] = []
    for k in idx.Ds:
        start = None
        for j in range(n_t):
            if fixed_val(model.start_col[(k, j)]) == 1.0:
                start = j
                break
        if start is None:
            frontiers.append((k, None, False))
            continue
        pos = start
        visited.add(pos)
        closed = False
        for _ in range(n_t):
            if fixed_val(model.ret_col[(k, pos)]) == 1.0:
                closed = True
                break
            nxt = None
            for j in range(n_t):
                if j != pos and fixed_val(model.mid_col[(k, pos, j)]) == 1.0:
                    nxt = j
                    break
            if nxt is None:
                break
            pos = nxt
            visited.add(pos)
        frontiers.append((k, pos, closed))

    unvisited = [j for j in range(n_t) if j not in visited]
    state = {k: (pos, closed) for k, pos, closed in frontiers}
    if warm_edges is not None:
        open_count = sum(
            1 for _, pos, closed in frontiers if pos is not None and not closed
        ) + sum(1 for _, pos, _ in frontiers if pos is None)
        for col, spec in warm_edges:
            if fixed_val(col) is not None:
                continue
            kind = spec[0]
            if kind == "start":
                _, k, j = spec
                if state[k][0] is None and j in unvisited:
                    return (col, 1.0)
            elif kind == "mid":
                _, k, i, j = spec
                pos, closed = state[k]
                if pos == i and not closed and j in unvisited:
                    return (col, 1.0)
            else:
                _, k, i = spec
                pos, closed = state[k]
                if pos == i and not closed and (not unvisited or open_count > 1):
                    return (col, 1.0)

    best_col = -1
    best_key = (math.inf, math.inf)
    if unvisited:
        # Rank candidate commitments by marginal transfer cost (cheap
        # legs first), with the relaxation value breaking near-ties; a
        # frontier may close early only when the cheapest onward leg is
        # clearly worse than handing the rest to another route.
        for k, pos, closed in frontiers:
            if closed:
                continue
            kp = idx.k_prime(k)
            if pos is None:
                for j in unvisited:
                    col = model.start_col[(k, j)]
                    if fixed_val(col) is None:
                        key = (model.e_depot[kp][j], -float(zb[col]))
                        if key < best_key:
                            best_key = key
                            best_col = col
            else:
                for j in unvisited:
                    col = model.mid_col[(k, pos, j)]
                    if fixed_val(col) is None:
                        key = (model.e_sat[pos][j], -float(zb[col]))
                        if key < best_key:
                            best_key = key
                            best_col = col
    else:
        for k, pos, closed in frontiers:
            if pos is not None and not closed:
                col = model.ret_col[(k, pos)]
                if fixed_val(col) is None:
                    return (col, 1.0)
    if best_col < 0:
        return None
    return (best_col, 1.0)
