"""Probability values, gradients, and growth diagnostics from radial hits.

The probability of the feasible event is the direction-average of the chi
cdf at the radial function; infinite directions contribute exactly one.
The gradient estimator weighs, per finite direction, the decision gradient
of each active constraint by the chi density at the hit over the ray slope
of that constraint.  Evaluating value and gradient on one fixed direction
set (common random numbers) makes both smooth deterministic functions of
the decision, which the finite-difference identities and the outer solver
rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MissingSensitivity, TransversalityBreakdown
from .gaussian import DirectionSet, GaussianModel, RadialLaw, SphereMethod, chi_cdf, chi_pdf
from .oracles import ConvexSetOracle, GrowthDiagnostic, InequalitySystem
from .radial import (HitBatch, RootOptions, _hit_from_batch, enlarged_hits,
                     inequality_hits)


@dataclass(frozen=True)
class ProbEstimate:
    """Estimated probability with per-direction detail.

    ``std_error`` is the Monte Carlo standard error and is ``None`` in QMC
    mode, where error is assessed by scramble replication instead.
    ``per_direction`` holds (index, RadialHit, contribution) triples when
    requested.
    """

    value: float
    std_error: Optional[float]
    n_infinite: int
    per_direction: Optional[tuple]


@dataclass(frozen=True)
class GradEstimate:
    """Estimated gradient (or subdifferential element when ties occur).

    ``tie_fraction`` is the fraction of directions whose active set has more
    than one element; with no ties the estimate is the gradient of the
    common-random-numbers value estimator.  ``per_direction`` holds the raw
    per-direction contributions, shape (n_directions, x_dim).
    """

    gradient: np.ndarray
    tie_fraction: float
    per_direction: Optional[np.ndarray]


def _check_dirs(dirs: DirectionSet, model: GaussianModel):
    if dirs.n < 1:
        raise ValueError("direction set is empty")
    if dirs.dim != model.dim:
        raise ValueError(f"direction dimension {dirs.dim} != model dimension {model.dim}")


def _solve_batch(target, x, model, dirs, opts, eps) -> HitBatch:
    if isinstance(target, InequalitySystem):
        if eps not in (None, 0, 0.0):
            raise ValueError("eps enlargement applies to set oracles only")
        return inequality_hits(target, x, dirs.directions, model, opts)
    if isinstance(target, ConvexSetOracle):
        return enlarged_hits(target, x, dirs.directions, 0.0 if eps is None else float(eps),
                             model, opts)
    raise TypeError(f"unsupported target {type(target).__name__}")


def _materialize(batch: HitBatch, target, x, contrib) -> tuple:
    records = []
    kwargs = ({"system": target} if batch.mode == "inequality" else {"oracle": target})
    for row in range(batch.rho.shape[0]):
        hit = _hit_from_batch(batch, row, x=x, **kwargs)
        records.append((row, hit, float(contrib[row])))
    return tuple(records)


def prob_value(target, x, model: GaussianModel, dirs: DirectionSet,
               opts: RootOptions = None, eps: float = None,
               keep_directions: bool = True) -> ProbEstimate:
    """Estimate P[every constraint holds] at decision ``x``.

    ``target`` is an :class:`InequalitySystem`, or a :class:`ConvexSetOracle`
    together with an enlargement radius ``eps >= 0``.
    """
    _check_dirs(dirs, model)
    batch = _solve_batch(target, x, model, dirs, opts, eps)
    law = RadialLaw(model.dim)
    e = np.asarray(chi_cdf(law, batch.rho))
    value = float(dirs.weights @ e)
    if dirs.method is SphereMethod.MONTE_CARLO and dirs.n > 1:
        std_error = float(np.std(e, ddof=1) / np.sqrt(dirs.n))
    else:
        std_error = None
    per_direction = _materialize(batch, target, x, e) if keep_directions else None
    return ProbEstimate(value=value, std_error=std_error,
                        n_infinite=int((~batch.finite).sum()),
                        per_direction=per_direction)


def _tie_weights(batch: HitBatch, tie_policy: str) -> np.ndarray:
    """Per (row, direction) multiplier lambda over the active set."""
    n_rows, n_dirs = batch.act.shape
    lam = np.zeros((n_rows, n_dirs))
    if tie_policy == "average":
        denom = np.maximum(batch.n_active, 1)
        lam[:, :] = batch.act / denom[None, :]
    elif tie_policy == "min_index":
        any_active = batch.act.any(axis=0)
        first = np.argmax(batch.act, axis=0)
        lam[first[any_active], np.flatnonzero(any_active)] = 1.0
    else:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    return lam


def prob_gradient(system: InequalitySystem, x, model: GaussianModel,
                  dirs: DirectionSet, opts: RootOptions = None,
                  tie_policy: str = "average",
                  keep_directions: bool = True) -> GradEstimate:
    """Estimate the gradient of the probability of an inequality system.

    Per finite direction the contribution is
    ``-pdf(rho) * sum_{i active} lambda_i * grad_x g_i / <grad_z g_i, Lv>``
    evaluated at the boundary point; infinite directions contribute zero.
    Ties are split uniformly (``average``) or resolved to the smallest
    active index (``min_index``); with ties present the result is one
    element of the subdifferential hull rather than the gradient.
    """
    _check_dirs(dirs, model)
    opts = opts or RootOptions()
    x = np.asarray(x, dtype=float).reshape(-1)
    batch = inequality_hits(system, x, dirs.directions, model, opts)
    law = RadialLaw(model.dim)
    pdf = np.asarray(chi_pdf(law, np.where(batch.finite, batch.rho, np.inf)))
    lam = _tie_weights(batch, tie_policy)
    n_dirs = dirs.n
    w = np.zeros((n_dirs, system.x_dim))
    for i in range(system.s):
        mask = batch.act[i] & batch.finite
        if not mask.any():
            continue
        Z = batch.boundary[mask]
        gx = np.asarray(system.grad_x_g(i, x, Z), dtype=float)
        gz = np.asarray(system.grad_z_g(i, x, Z), dtype=float)
        slope = np.einsum("km,km->k", gz, batch.lv[mask])
        if np.any(slope <= opts.slope_floor):
            offender = int(np.flatnonzero(mask)[np.argmin(slope)])
            raise TransversalityBreakdown(
                f"constraint {i}: ray slope {slope.min():.3e} at direction "
                f"{offender} is below the slope floor", direction_index=offender)
        coef = -pdf[mask] * lam[i][mask] / slope
        w[mask] += coef[:, None] * gx
    # Domain caps are x-independent: they contribute nothing to the gradient
    # but still take their share of the tie weight.
    gradient = dirs.weights @ w
    tie_fraction = float(np.mean(batch.n_active > 1))
    return GradEstimate(gradient=gradient, tie_fraction=tie_fraction,
                        per_direction=w if keep_directions else None)


def prob_gradient_enlarged(oracle: ConvexSetOracle, x, eps: float,
                           model: GaussianModel, dirs: DirectionSet,
                           opts: RootOptions = None,
                           keep_directions: bool = True) -> GradEstimate:
    """Estimate the gradient of the eps-enlarged probability of a set oracle.

    Requires the oracle's decision-space ``sensitivity`` callback; the
    per-direction weight is ``pdf(rho_eps) / <u, Lv>`` with ``u`` the
    projection residual of the boundary point (norm eps).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if oracle.sensitivity is None:
        raise MissingSensitivity(
            f"{oracle.name}: enlarged gradients need a sensitivity callback")
    _check_dirs(dirs, model)
    opts = opts or RootOptions()
    x = np.asarray(x, dtype=float).reshape(-1)
    batch = enlarged_hits(oracle, x, dirs.directions, eps, model, opts)
    law = RadialLaw(model.dim)
    pdf = np.asarray(chi_pdf(law, np.where(batch.finite, batch.rho, np.inf)))
    w = np.zeros((dirs.n, oracle.x_dim))
    mask = batch.finite
    if mask.any():
        Z = batch.boundary[mask]
        P = oracle.project(x, Z)
        U = Z - P
        slope = np.einsum("km,km->k", U, batch.lv[mask])
        if np.any(slope <= opts.slope_floor):
            offender = int(np.flatnonzero(mask)[np.argmin(slope)])
            raise TransversalityBreakdown(
                f"residual slope {slope.min():.3e} at direction {offender} "
                "is below the slope floor", direction_index=offender)
        xs = np.asarray(oracle.sensitivity(x, Z, P, U), dtype=float)
        w[mask] = -(pdf[mask] / slope)[:, None] * xs
    gradient = dirs.weights @ w
    tie_fraction = 0.0
    return GradEstimate(gradient=gradient, tie_fraction=tie_fraction,
                        per_direction=w if keep_directions else None)


def growth_report(system: InequalitySystem, x, dirs: DirectionSet,
                  model: GaussianModel, opts: RootOptions = None) -> GrowthDiagnostic:
    """Evaluate |grad_x g| / |grad_z g| at every finite boundary hit.

    The worst ratio bounds the per-direction gradient weight together with
    the chi density, so a finite report is evidence the gradient estimator
    is well posed near ``x``.
    """
    _check_dirs(dirs, model)
    x = np.asarray(x, dtype=float).reshape(-1)
    batch = inequality_hits(system, x, dirs.directions, model, opts)
    max_ratio = 0.0
    at_norm = 0.0
    at_constraint = -1
    n_points = int(batch.finite.sum())
    for i in range(system.s):
        mask = batch.act[i] & batch.finite
        if not mask.any():
            continue
        Z = batch.boundary[mask]
        gx = np.linalg.norm(np.asarray(system.grad_x_g(i, x, Z), dtype=float), axis=1)
        gz = np.linalg.norm(np.asarray(system.grad_z_g(i, x, Z), dtype=float), axis=1)
        ratio = gx / np.where(gz > 0, gz, np.inf)
        ratio = np.where(gz > 0, ratio, np.inf)
        j = int(np.argmax(ratio))
        if ratio[j] > max_ratio:
            max_ratio = float(ratio[j])
            at_norm = float(np.linalg.norm(Z[j]))
            at_constraint = i
    return GrowthDiagnostic(max_ratio=max_ratio, at_point_norm=at_norm,
                            at_constraint=at_constraint, n_points=n_points)
