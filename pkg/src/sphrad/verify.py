"""Self-verification suite run by the ``verify`` CLI command.

Each check is a named callable returning (passed, detail).  Quick mode
reduces sample sizes and widens the sampling-error-limited tolerances
accordingly; fixed analytic tolerances are kept as is.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, stats

from .estimates import prob_gradient, prob_value
from .gaussian import (DEFAULT_SEED, RadialLaw, SphereMethod, build_model,
                       chi_cdf, chi_pdf, sample_sphere)
from .oracles import (make_ball, make_halfspace, make_hyperbolic_set,
                      make_hyperbolic_system, make_slab, slab_threshold)
from .radial import radial_root_enlarged
from . import estimates


def _model(m):
    return build_model(np.zeros(m), np.eye(m))


def check_chi_normalization(quick=False):
    dims = (1, 2, 8, 16) if quick else tuple(range(1, 17))
    worst = 0.0
    for m in dims:
        law = RadialLaw(m)
        total, _ = integrate.quad(lambda r: chi_pdf(law, r), 0.0, law.r_max,
                                  limit=200)
        worst = max(worst, abs(total - 1.0))
    ok = worst <= 1e-9
    return ok, f"max |integral - 1| = {worst:.2e} over m in {dims[0]}..{dims[-1]}"


def check_chi_consistency(quick=False):
    worst = 0.0
    # Fixed step balancing truncation (steep density at small r, large m)
    # against cancellation where cdf is close to 1 (large r).
    h = 1e-4
    for m in (1, 2, 5, 9):
        law = RadialLaw(m)
        for r in (0.5, 1.0, 2.0, 5.0):
            fd = (chi_cdf(law, r + h) - chi_cdf(law, r - h)) / (2 * h)
            pdf = chi_pdf(law, r)
            if pdf > 1e-300:
                worst = max(worst, abs(fd - pdf) / pdf)
    ok = worst <= 1e-6
    return ok, f"max relative cdf'/pdf mismatch = {worst:.2e}"


def check_sphere_construction(quick=False):
    n = 1000 if quick else 10000
    msgs = []
    ok = True
    for method in (SphereMethod.MONTE_CARLO, SphereMethod.QMC):
        d1 = sample_sphere(3, n, seed=5, method=method)
        d2 = sample_sphere(3, n, seed=5, method=method)
        if d1.directions.tobytes() != d2.directions.tobytes():
            ok = False
            msgs.append(f"{method.value}: not reproducible")
        norm_err = np.abs(np.linalg.norm(d1.directions, axis=1) - 1.0).max()
        pair_err = np.abs(d1.directions[0::2] + d1.directions[1::2]).max()
        if norm_err > 1e-12 or pair_err != 0.0:
            ok = False
            msgs.append(f"{method.value}: norms {norm_err:.1e}, antithetic {pair_err:.1e}")
    return ok, "; ".join(msgs) if msgs else "bitwise reproducible, unit norms, exact pairs"


def check_sphere_unbiasedness(quick=False):
    n = 10000 if quick else 100000
    d = sample_sphere(3, n, seed=11, method=SphereMethod.MONTE_CARLO)
    u = np.array([1.0, 0.0, 0.0])
    vals = np.maximum(d.directions @ u, 0.0)
    est, se = vals.mean(), vals.std(ddof=1) / np.sqrt(n)
    err = abs(est - 0.25)          # hemisphere average of max(<u,v>,0) in R^3
    ok = err <= 3 * se + 1e-12
    return ok, f"|est - 0.25| = {err:.2e} vs 3 SE = {3 * se:.2e}"


def check_halfspace_analytic(quick=False):
    n = 1000 if quick else 10000
    scale = np.sqrt(10000 / n)
    model = _model(2)
    dirs = sample_sphere(2, n, seed=DEFAULT_SEED, method=SphereMethod.QMC)
    sys_ = make_halfspace([1.0, 0.0])
    v = prob_value(sys_, [1.0], model, dirs, keep_directions=False).value
    g = prob_gradient(sys_, [1.0], model, dirs, keep_directions=False).gradient[0]
    ev, eg = abs(v - stats.norm.cdf(1)), abs(g - stats.norm.pdf(1))
    tol = 1e-3 * scale
    ok = ev <= tol and eg <= tol
    return ok, f"value err {ev:.2e}, grad err {eg:.2e} (tol {tol:.1e})"


def check_slab_analytic(quick=False):
    n = 1000 if quick else 10000
    scale = np.sqrt(10000 / n)
    model = _model(2)
    dirs = sample_sphere(2, n, seed=DEFAULT_SEED, method=SphereMethod.QMC)
    sys_ = make_slab([1.0, 0.0], lambda x: x[0], lambda x: np.array([1.0]))
    tau = slab_threshold(-1.0)
    v = prob_value(sys_, [-1.0], model, dirs, keep_directions=False).value
    g = prob_gradient(sys_, [-1.0], model, dirs, keep_directions=False).gradient[0]
    v_true = 2 * stats.norm.cdf(tau) - 1
    g_true = 2 * stats.norm.pdf(tau) * (-np.exp(2) / tau)
    ev, eg = abs(v - v_true), abs(g - g_true)
    tol = 1e-3 * scale
    ok = ev <= tol and eg <= tol
    return ok, f"value err {ev:.2e}, grad err {eg:.2e} (tol {tol:.1e})"


def check_radial_lemmas(quick=False):
    n_inst = 10 if quick else 100
    model = _model(2)
    ball = make_ball(np.zeros(2))
    hyp = make_hyperbolic_set()
    rng = np.random.default_rng(2024)
    failures = []
    for j in range(n_inst):
        oracle, x = (ball, [rng.uniform(0.5, 2.0)]) if j % 2 == 0 else (hyp, [rng.uniform(0.5, 2.0)])
        theta = rng.uniform(0, 2 * np.pi)
        v = np.array([np.cos(theta), np.sin(theta)])
        eps1, eps2 = sorted(rng.uniform(0.01, 0.5, 2))
        h0 = radial_root_enlarged(oracle, x, v, 0.0, model)
        h1 = radial_root_enlarged(oracle, x, v, eps1, model)
        h2 = radial_root_enlarged(oracle, x, v, eps2, model)
        if not (h0.rho <= h1.rho + 1e-9 <= h2.rho + 2e-9):
            failures.append(f"nesting at instance {j}")
        if not h0.finite:
            continue            # the ray never leaves the body
        Z = lambda r: model.mean + r * v
        d = lambda r: float(np.linalg.norm(Z(r) - oracle.project(x, Z(r)[None, :])[0]))
        # distance monotone past the plain root
        r1 = h0.rho * 1.05 + 0.01
        r2 = r1 * 1.5 + 0.1
        if not d(r1) < d(r2):
            failures.append(f"monotonicity at instance {j}")
        # uniqueness: residual at the eps root, and strict crossing
        if h1.finite:
            res = abs(d(h1.rho) - eps1)
            if res > 1e-8 or not (d(h1.rho * (1 - 1e-4)) < eps1 < d(h1.rho * (1 + 1e-4))):
                failures.append(f"uniqueness at instance {j} (res {res:.1e})")
        # continuity under (eps, x, v) perturbation, away from the cone of
        # infinite directions where the radial function blows up
        if h1.finite and h1.rho <= 5.0:
            prev = np.inf
            for delta in (1e-2, 1e-3, 1e-4):
                vp = v + delta * np.array([1.0, -1.0])
                vp /= np.linalg.norm(vp)
                hp = radial_root_enlarged(oracle, [x[0] + delta], vp, eps1 + delta, model)
                gap = abs(hp.rho - h1.rho)
                if gap > prev + 1e-9 or (delta == 1e-4 and gap > 1e-2):
                    failures.append(f"continuity at instance {j} (delta {delta}, gap {gap:.1e})")
                    break
                prev = gap
    ok = not failures
    return ok, f"{n_inst} instances, failures: {failures[:3] if failures else 'none'}"


def check_enlargement_limit(quick=False):
    n = 2000 if quick else 10000
    tol = 2e-3 * (2.0 if quick else 1.0)
    model = _model(2)
    dirs = sample_sphere(2, n, seed=DEFAULT_SEED, method=SphereMethod.QMC)
    msgs = []
    ok = True
    for oracle, x in ((make_ball(np.zeros(2)), [1.0]), (make_hyperbolic_set(), [1.0])):
        vals = [prob_value(oracle, x, model, dirs, eps=e, keep_directions=False).value
                for e in (0.5, 0.1, 0.01, 0.001)]
        base = prob_value(oracle, x, model, dirs, eps=0.0, keep_directions=False).value
        mono = all(vals[i] >= vals[i + 1] - 1e-12 for i in range(3)) and vals[-1] >= base - 1e-12
        gap = abs(vals[-1] - base)
        if not (mono and gap <= tol):
            ok = False
        msgs.append(f"{oracle.name}: gap {gap:.2e} mono {mono}")
    return ok, "; ".join(msgs)


def check_growth_diagnostics(quick=False):
    n = 500 if quick else 2000
    model = _model(2)
    dirs = sample_sphere(2, n, seed=DEFAULT_SEED, method=SphereMethod.QMC)
    msgs = []
    ok = True
    rep = estimates.growth_report(make_halfspace([1.0, 0.0]), [1.0], dirs, model)
    if abs(rep.max_ratio - 1.0) > 1e-9:
        ok = False
    msgs.append(f"halfspace ratio {rep.max_ratio:.6f}")
    rep = estimates.growth_report(make_hyperbolic_system(), [1.0], dirs, model)
    if not rep.max_ratio <= 1.0 / np.sqrt(1.0) + 1e-9:
        ok = False
    msgs.append(f"hyperbolic ratio {rep.max_ratio:.6f} <= 1")
    rep = estimates.growth_report(
        make_slab([1.0, 0.0], lambda x: x[0], lambda x: np.array([1.0])),
        [-1.0], dirs, model)
    if not np.isfinite(rep.max_ratio):
        ok = False
    msgs.append(f"slab ratio {rep.max_ratio:.3f}")
    return ok, "; ".join(msgs)


def check_crn_identity(quick=False):
    n = 500 if quick else 2000
    model = _model(2)
    dirs = sample_sphere(2, n, seed=3, method=SphereMethod.QMC)
    sys_ = make_halfspace([1.0, 0.0])
    x = np.array([1.0])
    g = prob_gradient(sys_, x, model, dirs, keep_directions=False).gradient[0]
    h = 5e-5
    fp = prob_value(sys_, x + h, model, dirs, keep_directions=False).value
    fm = prob_value(sys_, x - h, model, dirs, keep_directions=False).value
    rel = abs((fp - fm) / (2 * h) - g) / max(abs(g), 1e-12)
    ok = rel <= 1e-6
    return ok, f"relative FD mismatch {rel:.2e}"


ALL_CHECKS = (
    ("chi-normalization", check_chi_normalization),
    ("chi-cdf-pdf-consistency", check_chi_consistency),
    ("sphere-construction", check_sphere_construction),
    ("sphere-unbiasedness", check_sphere_unbiasedness),
    ("halfspace-analytic", check_halfspace_analytic),
    ("slab-analytic", check_slab_analytic),
    ("radial-lemmas", check_radial_lemmas),
    ("enlargement-limit", check_enlargement_limit),
    ("growth-diagnostics", check_growth_diagnostics),
    ("crn-identity", check_crn_identity),
)


def run_all(quick: bool = False):
    """Run every registered check; returns a list of (name, ok, detail)."""
    results = []
    for name, fn in ALL_CHECKS:
        try:
            ok, detail = fn(quick=quick)
        except Exception as exc:          # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
