"""LP-relaxation layer used by the branch-and-bound search.

A model's constraint matrices are loaded once into a persistent solver
instance; per node only the variable bounds change, so re-solves start
hot from the previous basis.  Falls back to one-shot scipy.linprog
calls when the bundled solver bindings are unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix, vstack

try:
    import scipy.optimize._highspy._core as _hcore
except ImportError:  # pragma: no cover - depends on scipy build
    _hcore = None


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class LpSolveError(RuntimeError):
    """Numerical trouble in the LP engine; never silently misreported."""


@dataclass
class LpModel:
    c: np.ndarray
    a_ub: csr_matrix
    b_ub: np.ndarray
    a_eq: csr_matrix
    b_eq: np.ndarray


@dataclass
class LpSolution:
    status: LpStatus
    objective: float
    x: np.ndarray | None
    lower_marginals: np.ndarray | None = None
    upper_marginals: np.ndarray | None = None


class LpEngine:
    """Re-solvable relaxation of one model, bounds mutable per call."""

    def __init__(self, lp: LpModel, lb: np.ndarray, ub: np.ndarray):
        self.lp = lp
        self.n_col = lp.c.shape[0]
        self._highs = None
        if _hcore is not None:
            a = vstack([lp.a_ub, lp.a_eq]).tocsc()
            hlp = _hcore.HighsLp()
            hlp.num_col_ = a.shape[1]
            hlp.num_row_ = a.shape[0]
            hlp.col_cost_ = lp.c.astype(np.float64)
            hlp.col_lower_ = lb.astype(np.float64)
            hlp.col_upper_ = ub.astype(np.float64)
            hlp.row_lower_ = np.concatenate(
                [np.full(lp.b_ub.shape, -np.inf), lp.b_eq]
            )
            hlp.row_upper_ = np.concatenate([lp.b_ub, lp.b_eq])
            hlp.a_matrix_.format_ = _hcore.MatrixFormat.kColwise
            hlp.a_matrix_.start_ = a.indptr.astype(np.int32)
            hlp.a_matrix_.index_ = a.indices.astype(np.int32)
            hlp.a_matrix_.value_ = a.data.astype(np.float64)
            h = _hcore._Highs()
            h.setOptionValue("output_flag", False)
            h.setOptionValue("threads", 1)
            h.setOptionValue("random_seed", 0)
            if h.passModel(hlp) != _hcore.HighsStatus.kOk:
                raise LpSolveError("failed to load LP into solver")
            self._highs = h
            self._cur_lb = lb.astype(np.float64).copy()
            self._cur_ub = ub.astype(np.float64).copy()

    def solve(
        self, lb: np.ndarray, ub: np.ndarray, want_marginals: bool = False
    ) -> LpSolution:
        if self._highs is not None:
            return self._solve_highs(lb, ub, want_marginals)
        return self._solve_linprog(lb, ub, want_marginals)

    def _solve_highs(
        self, lb: np.ndarray, ub: np.ndarray, want_marginals: bool
    ) -> LpSolution:
        # Only columns whose bounds actually moved are updated; along a
        # plunge that is one column, so the previous basis re-solves in
        # a handful of dual pivots.
        h = self._highs
        diff = np.nonzero((lb != self._cur_lb) | (ub != self._cur_ub))[0]
        if diff.size:
            idx32 = diff.astype(np.int32)
            h.changeColsBounds(int(diff.size), idx32, lb[diff], ub[diff])
            self._cur_lb[diff] = lb[diff]
            self._cur_ub[diff] = ub[diff]
        h.run()
        status = h.getModelStatus()
        if status not in (
            _hcore.HighsModelStatus.kOptimal,
            _hcore.HighsModelStatus.kInfeasible,
            _hcore.HighsModelStatus.kUnboundedOrInfeasible,
        ):
            # The hot basis can sour after many bound flips; retry cold.
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
        if status == _hcore.HighsModelStatus.kOptimal:
            sol = h.getSolution()
            obj = float(h.getInfoValue("objective_function_value")[1])
            x = np.asarray(sol.col_value)
            lower = upper = None
            if want_marginals and sol.dual_valid:
                dual = np.asarray(sol.col_dual)
                lower = np.maximum(dual, 0.0)
                upper = np.minimum(dual, 0.0)
            return LpSolution(LpStatus.OPTIMAL, obj, x, lower, upper)
        if status in (
            _hcore.HighsModelStatus.kInfeasible,
            _hcore.HighsModelStatus.kUnboundedOrInfeasible,
        ):
            return LpSolution(LpStatus.INFEASIBLE, np.inf, None)
        raise LpSolveError(f"LP engine failed with model status {status}")

    def _solve_linprog(
        self, lb: np.ndarray, ub: np.ndarray, want_marginals: bool
    ) -> LpSolution:
        lp = self.lp
        res = linprog(
            lp.c,
            A_ub=lp.a_ub,
            b_ub=lp.b_ub,
            A_eq=lp.a_eq if lp.a_eq.shape[0] else None,
            b_eq=lp.b_eq if lp.b_eq.size else None,
            bounds=np.column_stack((lb, ub)),
            method="highs",
        )
        if res.status == 0:
            lower = upper = None
            if want_marginals:
                lower = np.asarray(res.lower.marginals)
                upper = np.asarray(res.upper.marginals)
            return LpSolution(
                LpStatus.OPTIMAL, float(res.fun), np.asarray(res.x), lower, upper
            )
        if res.status == 2:
            return LpSolution(LpStatus.INFEASIBLE, np.inf, None)
        raise LpSolveError(
            f"LP engine failed with status {res.status}: {res.message}"
        )


def lp_relax_solve(
    lp: LpModel,
    bounds: np.ndarray,
    want_marginals: bool = False,
) -> LpSolution:
    """One-shot solve of the continuous relaxation for given bounds.

    bounds is an (n, 2) array of lower/upper limits (np.inf allowed).
    Deterministic for identical input.
    """
    engine = LpEngine(lp, bounds[:, 0], bounds[:, 1])
    return engine.solve(bounds[:, 0].copy(), bounds[:, 1].copy(), want_marginals)
