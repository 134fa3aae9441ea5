"""Trust-region successive linearization for chance-constrained programs.

Solves ``min c.x  s.t.  phat(x) >= p,  lower <= x <= upper`` where ``phat``
is the common-random-numbers probability estimator.  Each iteration solves
the linearized subproblem

    min c.x   s.t.  phat(x_k) + g_k.(x - x_k) >= p,
                    box bounds,  |x - x_k|_inf <= delta_k

which, being a box plus a single cut, is solved exactly by a greedy
active-set walk (a continuous knapsack).  Steps whose true estimate falls
below ``p - infeas_tol`` are rejected and shrink the trust radius; accepted
steps that fail to improve the cost also shrink it, which removes vertex
zigzagging.  Because the direction set is fixed, the whole solve is
deterministic for a given problem and options.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InteriorViolated, LPInfeasible, NoFeasibleStart
from .estimates import ProbEstimate, prob_gradient, prob_value
from .gaussian import DirectionSet, GaussianModel
from .oracles import InequalitySystem
from .radial import RootOptions


@dataclass(frozen=True)
class ChanceProblem:
    cost: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    p_level: float
    system: InequalitySystem
    model: GaussianModel
    eval_dirs: DirectionSet
    validate_dirs: DirectionSet
    start: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("cost", "lower", "upper"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float).reshape(-1))
        if self.start is not None:
            object.__setattr__(self, "start",
                               np.asarray(self.start, dtype=float).reshape(-1))
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if not 0.0 < self.p_level < 1.0:
            raise ValueError("p_level must lie in (0, 1)")
        if (self.eval_dirs.seed == self.validate_dirs.seed
                and self.eval_dirs.method == self.validate_dirs.method):
            raise ValueError("evaluation and validation direction seeds must differ")


@dataclass(frozen=True)
class SolveOptions:
    max_iters: int = 2000
    step_tol: float = 1e-4
    prob_band: float = 5e-3          # |phat - p| window accepted at convergence
    infeas_tol: float = 1e-3         # accepted iterates keep phat >= p - infeas_tol
    delta0: float = 1.0
    delta_min: float = 1e-12
    delta_max: float = 8.0
    grow: float = 2.0
    shrink: float = 0.5
    feas_steps: int = 500
    feas_margin: float = 5e-3
    tie_policy: str = "average"
    root_opts: RootOptions = field(default_factory=RootOptions)


@dataclass
class IterationRecord:
    k: int
    x: np.ndarray
    cost: float
    phat: float
    step_norm: float
    delta: float
    accepted: bool


@dataclass
class SolveTrace:
    records: list
    status: str = ""

    def to_jsonl_rows(self):
        for r in self.records:
            yield {"k": r.k, "x": [float(v) for v in r.x], "cost": r.cost,
                   "phat": r.phat,
                   "step_norm": r.step_norm if np.isfinite(r.step_norm) else None,
                   "delta": r.delta, "accepted": r.accepted}


def _lp_box_cut(cost, lower, upper, a, b):
    """Exact solution of min cost.x s.t. lower<=x<=upper, a.x >= b.

    Returns (x, feasible, cut_was_slack): ``cut_was_slack`` is True when the
    unconstrained box minimizer already satisfied the cut.
    """
    x = np.where(cost > 0, lower, np.where(cost < 0, upper,
                 np.where(a >= 0, upper, lower)))
    gap = b - a @ x
    if gap <= 1e-12:
        return x, True, True
    moves = []
    for i in range(cost.shape[0]):
        if a[i] > 0 and x[i] < upper[i]:
            d, extent = 1.0, upper[i] - x[i]
        elif a[i] < 0 and x[i] > lower[i]:
            d, extent = -1.0, x[i] - lower[i]
        else:
            continue
        rate = (cost[i] * d) / (a[i] * d)     # cost per unit of cut gain
        moves.append((rate, i, d, extent))
    moves.sort(key=lambda t: (t[0], t[1]))
    for rate, i, d, extent in moves:
        if gap <= 1e-12:
            break
        take = min(extent, gap / abs(a[i]))
        x[i] += d * take
        gap -= abs(a[i]) * take
    return x, gap <= 1e-9, False


def _phat(problem, x, opts):
    est = prob_value(problem.system, x, problem.model, problem.eval_dirs,
                     opts=opts.root_opts, keep_directions=False)
    return est.value


def _ghat(problem, x, opts):
    est = prob_gradient(problem.system, x, problem.model, problem.eval_dirs,
                        opts=opts.root_opts, tie_policy=opts.tie_policy,
                        keep_directions=False)
    return est.gradient


def _feasibility_phase(problem, x, opts):
    """Projected gradient ascent on phat until p + feas_margin is reached."""
    p = problem.p_level
    phat = _phat(problem, x, opts)
    if phat >= p + opts.feas_margin:
        return x, phat
    for _ in range(opts.feas_steps):
        g = _ghat(problem, x, opts)
        gnorm = np.linalg.norm(g)
        if gnorm == 0:
            break
        alpha = 1.0 / gnorm
        moved = False
        for _ in range(30):
            x_try = np.clip(x + alpha * g, problem.lower, problem.upper)
            if np.max(np.abs(x_try - x)) == 0:
                break
            try:
                p_try = _phat(problem, x_try, opts)
            except InteriorViolated:
                alpha *= 0.5
                continue
            if p_try > phat + 1e-12:
                x, phat, moved = x_try, p_try, True
                break
            alpha *= 0.5
        if not moved:
            break
        if phat >= p + opts.feas_margin:
            return x, phat
    raise NoFeasibleStart(
        f"feasibility phase stalled at phat = {phat:.6f} < {p} + {opts.feas_margin}")


def solve(problem: ChanceProblem, opts: SolveOptions = None):
    """Run the trust-region SLP loop; returns (x_final, SolveTrace).

    Raises :class:`NoFeasibleStart` when no point with phat >= p can be
    found and :class:`LPInfeasible` when the subproblem stays infeasible
    after restoration and trust-region shrinking.
    """
    opts = opts or SolveOptions()
    p = problem.p_level
    x0 = (problem.start if problem.start is not None
          else 0.5 * (problem.lower + problem.upper))
    x, phat = _feasibility_phase(problem, np.clip(x0, problem.lower, problem.upper), opts)

    delta = opts.delta0
    trace = SolveTrace(records=[])
    g = _ghat(problem, x, opts)
    trace.records.append(IterationRecord(0, x.copy(), float(problem.cost @ x),
                                         phat, np.inf, delta, True))
    for k in range(1, opts.max_iters + 1):
        lk = np.maximum(problem.lower, x - delta)
        uk = np.minimum(problem.upper, x + delta)
        b = p - phat + g @ x
        x_lp, feasible, cut_slack = _lp_box_cut(problem.cost, lk, uk, g, b)
        if not feasible:
            # Restoration: climb the linearized probability inside the box.
            x_lp = np.where(g > 0, uk, np.where(g < 0, lk, x))
            if np.max(np.abs(x_lp - x)) == 0:
                raise LPInfeasible(
                    "linearized subproblem infeasible and no ascent direction")
        step = float(np.max(np.abs(x_lp - x)))
        if step == 0.0:
            trace.records.append(IterationRecord(k, x.copy(), float(problem.cost @ x),
                                                 phat, 0.0, delta, True))
            if abs(phat - p) <= opts.prob_band or cut_slack:
                trace.status = "box_optimum" if cut_slack else "converged"
                return x, trace
            delta *= opts.shrink
            if delta < opts.delta_min:
                raise LPInfeasible("trust region exhausted without progress")
            continue
        try:
            p_new = _phat(problem, x_lp, opts)
            interior_ok = True
        except InteriorViolated:
            p_new = -np.inf
            interior_ok = False
        accept = interior_ok and feasible and p_new >= p - opts.infeas_tol
        if accept:
            prev_cost = float(problem.cost @ x)
            new_cost = float(problem.cost @ x_lp)
            x, phat = x_lp, p_new
            g = _ghat(problem, x, opts)
            if new_cost >= prev_cost - 1e-12:
                # No cost progress: contract to break vertex zigzags.
                delta = max(delta * opts.shrink, opts.delta_min)
            else:
                delta = min(delta * opts.grow, opts.delta_max)
        else:
            if interior_ok and not feasible and p_new > phat + 1e-12:
                # Successful restoration step.
                x, phat = x_lp, p_new
                g = _ghat(problem, x, opts)
            else:
                delta *= opts.shrink
                if delta < opts.delta_min:
                    raise LPInfeasible("trust region exhausted while rejecting steps")
        trace.records.append(IterationRecord(k, x.copy(), float(problem.cost @ x),
                                             phat, step, delta, accept))
        if accept and step <= opts.step_tol and (abs(phat - p) <= opts.prob_band
                                                 or cut_slack):
            trace.status = "box_optimum" if cut_slack else "converged"
            return x, trace
    trace.status = "iteration_cap"
    return x, trace


def validate(x, problem: ChanceProblem, opts: SolveOptions = None) -> ProbEstimate:
    """Independent probability estimate at ``x`` using the validation set."""
    opts = opts or SolveOptions()
    return prob_value(problem.system, x, problem.model, problem.validate_dirs,
                      opts=opts.root_opts, keep_directions=False)
