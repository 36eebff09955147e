"""Batch front end: config ingestion, task orchestration, report emission.

Subcommands: verify (identity and convergence suites), spectrum (truncated
spectra against the warp-exponent predictions), scatter (deviation integral,
sufficient-condition checklists, decomposition residuals, Schatten
diagnostics, wave-operator runs). Reports are a canonical JSON document plus
CSV series per task; exit status is 0 iff every selected check passes.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

import numpy as np

from . import complexes, geometry, reporting, scattering, spectral, waveops
from .expressions import Expression, parse_expression
from .geometry import (CircleSection, ConformalFactor, ModeSection,
                       SphereSection, WarpedModel, conformal_curvature,
                       conformal_rescale, curvature_oracle_in_frame,
                       euclidean_metric, orthonormal_frame)
from .reporting import Check, ReportBundle, pv


DEFAULTS = {
    "numerics": {
        "dr": 0.25, "n_theta": 12, "R_list": [40.0, 80.0, 160.0],
        "lam": 4.0, "n": 2, "seed": 1234, "grid_levels": 3,
        "tolerance": 0.05, "tolerance_kind": "absolute",
        "schedule": [25.0, 50.0, 100.0, 200.0],
        "degrees": [0, 1, 2], "eig_count": 60,
    },
}


class ConfigError(ValueError):
    pass


def _section(cfg: dict, name: str) -> dict:
    out = dict(DEFAULTS.get(name, {}))
    out.update(cfg.get(name, {}))
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from None
    if "manifold" not in cfg:
        raise ConfigError(f"{path}: missing [manifold] table")
    return cfg


def build_model(cfg: dict) -> WarpedModel:
    man = cfg["manifold"]
    try:
        f = parse_expression(str(man.get("f", "1")))
        h = parse_expression(str(man.get("h_warp", "1")))
    except Exception as exc:
        raise ConfigError(f"manifold profiles: {exc}") from None
    cs_cfg = man.get("cross_section", {"kind": "circle", "radius": 1.0})
    kind = cs_cfg.get("kind", "circle")
    if kind == "circle":
        section = CircleSection(float(cs_cfg.get("radius", 1.0)))
    elif kind == "sphere":
        section = SphereSection(int(cs_cfg["n"]))
    elif kind == "mode":
        section = ModeSection(float(cs_cfg["eigenvalue"]),
                              float(cs_cfg.get("volume", 2 * math.pi)))
    else:
        raise ConfigError(f"unknown cross-section kind {kind!r}")
    return WarpedModel(int(man.get("m", 2)), f, h,
                       section, b=float(man.get("b", 0.0)),
                       R_max=float(man.get("R_max", 40.0)))


def build_psi(cfg: dict) -> ConformalFactor:
    blk = cfg.get("conformal", {})
    psi = ConformalFactor(parse_expression(str(blk.get("psi", "0"))),
                          sup_psi=blk.get("sup_psi"),
                          sup_dpsi=blk.get("sup_dpsi"),
                          sup_hess=blk.get("sup_hess"))
    return psi.auto_bounds()


def _random_bounded_psi(seed: int):
    """A seeded bounded (r, theta) conformal factor for exactness checks."""
    rng = np.random.default_rng(seed)
    amps = 0.2 * rng.standard_normal(3)
    cents = rng.uniform(2.0, 8.0, 3)
    widths = rng.uniform(0.5, 2.0, 3)
    ks = rng.integers(0, 4, 3)
    phases = rng.uniform(0, 2 * np.pi, 3)

    def psi(r, theta=None):
        r = np.asarray(r, dtype=float)
        th = np.zeros_like(r) if theta is None else np.asarray(theta, float)
        out = np.zeros_like(r)
        for a, c, w, k, p in zip(amps, cents, widths, ks, phases):
            out = out + a * np.exp(-((r - c) / w) ** 2) * np.cos(k * th + p)
        return out

    return psi


# ---------------------------------------------------------------------------
# verify task
# ---------------------------------------------------------------------------

def run_verify(cfg: dict, bundle: ReportBundle, out_dir: Optional[str]):
    num = _section(cfg, "numerics")
    seed = bundle.seed
    model = build_model(cfg)
    psi_cfg = build_psi(cfg)

    # fiber identities over seeded random covectors and fiber elements
    from .fiber import apply_ext, apply_int
    rng = np.random.default_rng(seed)
    worst_anti = worst_norm = 0.0
    for _ in range(1000):
        m = int(rng.integers(2, 7))
        eta = rng.standard_normal(m)
        om = rng.standard_normal(1 << m) + 1j * rng.standard_normal(1 << m)
        anti = (apply_ext(eta, apply_int(eta, om))
                + apply_int(eta, apply_ext(eta, om)) - (eta @ eta) * om)
        scale = max(1.0, float(eta @ eta) * float(np.linalg.norm(om)))
        worst_anti = max(worst_anti, float(np.linalg.norm(anti)) / scale)
        ni = np.linalg.norm(apply_int(eta, om)) ** 2
        ne = np.linalg.norm(apply_ext(eta, om)) ** 2
        tgt = (eta @ eta) * np.linalg.norm(om) ** 2
        worst_norm = max(worst_norm, abs(ni + ne - tgt) / max(1.0, tgt))
    ok = worst_anti <= 1e-12 and worst_norm <= 1e-12
    bundle.add(Check("fiber_exactness", "verify", ok,
                     "OK" if ok else "FIBER_IDENTITY_DEFECT",
                     {"anticommutator": pv(worst_anti, "probe-estimate"),
                      "norm_identity": pv(worst_norm, "probe-estimate")}))

    # complex exactness with a random bounded psi
    psi_rand = _random_bounded_psi(seed + 1)
    kwargs = dict(dr=num["dr"], n_theta=num["n_theta"])
    if isinstance(model.cross_section, ModeSection):
        kwargs.pop("n_theta")
    cx = complexes.build_graded_complex(model, boundary_condition="dirichlet",
                                        **kwargs)
    cxb = complexes.build_graded_complex(model, metric=psi_rand,
                                         boundary_condition="dirichlet",
                                         **kwargs)
    dd = cx.d[1] @ cx.d[0]
    dd_max = float(np.abs(dd.data).max()) if dd.nnz else 0.0
    adj = 0.0
    for v in complexes.probe_vectors(cx.dims[0], 8, seed, cx.dtype):
        w = complexes.probe_vectors(cx.dims[1], 8, seed + 1, cx.dtype)[0]
        lhs = cx.inner(cx.d[0] @ v, w, 1)
        rhs = cx.inner(v, cx.delta(1) @ w, 0)
        scale = max(1.0, abs(lhs))
        adj = max(adj, abs(lhs - rhs) / scale)
    ident = complexes.identification_maps(cx, cxb, psi_rand)
    ok = dd_max <= 1e-12 and adj <= 1e-12 and ident.max_defect <= 1e-12
    bundle.add(Check("complex_exactness", "verify", ok,
                     "OK" if ok else "COMPLEX_EXACTNESS_DEFECT",
                     {"dd_max": pv(dd_max, "analytic"),
                      "adjointness": pv(adj, "probe-estimate"),
                      "identification": pv(ident.max_defect, "analytic")}))

    # conformal codifferential convergence
    levels = int(num["grid_levels"])
    rels, drs = [], []
    cur = cx
    for lev in range(levels):
        _, _, comp = complexes.conformal_codifferential(cur, psi_cfg.psi,
                                                        seed=seed)
        rels.append(comp.relative)
        drs.append(cur.meta["dr"])
        if lev < levels - 1:
            cur = cur.refined(2)
    orders = [math.log2(rels[i] / rels[i + 1]) if rels[i + 1] > 0 else math.inf
              for i in range(len(rels) - 1)]
    trivial = rels[0] <= 1e-12  # psi = 0 or constant: exact, no order to fit
    ok = trivial or all(o >= 0.9 for o in orders)
    bundle.add(Check("codifferential_convergence", "verify", ok,
                     "OK" if ok else "ORDER_BELOW_THRESHOLD",
                     {"residuals": pv(rels, "probe-estimate"),
                      "orders": pv(orders, "probe-estimate")}))
    if out_dir:
        reporting.write_orders_csv(os.path.join(out_dir, "codifferential.csv"),
                                   "residual", drs, rels, orders)

    # Dirac commutator convergence; the first halving may still be
    # pre-asymptotic on coarse configs, so gate on monotone decrease plus
    # the final observed order
    study = complexes.dirac_commutator_residual(cx, psi_cfg.psi,
                                                levels=levels, seed=seed)
    trivial = study.residuals[0] <= 1e-12
    monotone = all(b < a for a, b in zip(study.residuals,
                                         study.residuals[1:]))
    ok = trivial or (monotone and study.orders[-1] >= 0.9
                     and study.residuals[-1] <= 1e-2)
    bundle.add(Check("dirac_commutator", "verify", ok,
                     "OK" if ok else "ORDER_BELOW_THRESHOLD",
                     {"residuals": pv(study.residuals, "probe-estimate"),
                      "orders": pv(study.orders, "probe-estimate")}))

    # curvature oracle suite
    g2 = euclidean_metric(2)
    sphere_psi = lambda x: math.log(2.0 / (1.0 + float(np.dot(x, x))))
    worst = 0.0
    for pt in ((0.0, 0.0), (0.4, -0.3), (1.0, 0.5)):
        x = np.array(pt)
        rbar = conformal_curvature(g2, sphere_psi, x)
        gbar = conformal_rescale(g2, sphere_psi)
        frame = math.exp(-sphere_psi(x)) * orthonormal_frame(g2.matrix(x))
        oracle = curvature_oracle_in_frame(gbar, x, frame=frame)
        scale = max(1.0, float(np.abs(oracle.components).max()))
        worst = max(worst, float(np.abs(rbar.components
                                        - oracle.components).max()) / scale)
    gtest = geometry.ChartMetric(
        2, lambda x: np.diag([1.0, 1.5 + math.sin(x[0]) ** 2]), name="test")
    x = np.array([0.7, 0.3])
    rg = curvature_oracle_in_frame(gtest, x)
    rb = conformal_curvature(gtest, lambda y: 0.4, x)
    const_defect = float(np.abs(rb.components - math.exp(-0.8)
                                * rg.components).max())
    ok = worst <= 1e-4 and const_defect <= 1e-12
    bundle.add(Check("curvature_formula", "verify", ok,
                     "OK" if ok else "CURVATURE_ORACLE_MISMATCH",
                     {"sphere_rel": pv(worst, "probe-estimate"),
                      "const_defect": pv(const_defect, "analytic")}))

    if out_dir and cfg.get("task", {}).get("dump_matrices", False):
        cx.export_triplets(os.path.join(out_dir, "complex"))

    bundle.payloads["verify"] = {
        "grid": {"dr": cx.meta["dr"], "dims": cx.dims},
    }


# ---------------------------------------------------------------------------
# spectrum task
# ---------------------------------------------------------------------------

def run_spectrum(cfg: dict, bundle: ReportBundle, out_dir: Optional[str]):
    num = _section(cfg, "numerics")
    model = build_model(cfg)
    R_list = [float(R) for R in num["R_list"]]
    if len(R_list) < 3:
        raise ConfigError("spectrum extrapolation needs >= 3 radii in R_list")
    degrees = [int(j) for j in num["degrees"]]
    count = int(num["eig_count"])
    seed = bundle.seed
    tol = float(num["tolerance"])
    rel = num["tolerance_kind"] == "relative"

    rows = []
    summary = {}
    is_mode = isinstance(model.cross_section, ModeSection)
    if is_mode:
        expected: Optional[float] = model.cross_section.eigenvalue
        pred_payload = {"kind": "mode-threshold",
                        "bottom": pv(expected, "analytic")}
        degrees = [0]
    else:
        spec = spectral.cross_section_spectrum(model.cross_section)
        expected = None

    for j in degrees:
        reports = []
        for R in R_list:
            mdl = WarpedModel(model.m, model.f, model.h_warp,
                              model.cross_section, b=model.b, R_max=R)
            kwargs = dict(dr=num["dr"])
            if not is_mode:
                kwargs["n_theta"] = num["n_theta"]
            cx = complexes.build_graded_complex(
                mdl, boundary_condition="dirichlet", **kwargs)
            evs = spectral.truncated_spectrum(cx, j, min(count, cx.dims[j]),
                                              seed=seed)
            reports.append(spectral.SpectralReport(R, j, evs))
            rows.extend((R, j, i, float(ev)) for i, ev in enumerate(evs))
        est = spectral.essential_bottom_estimate(reports)
        if not is_mode:
            pred = spectral.ac_prediction(model.b, spec, j, ball_core=True)
            expected = pred.bottom
            pred_payload = {
                "kind": pred.kind,
                "bottom": pv(pred.bottom, "analytic"),
                "reading_include_zero": pv(pred.reading_include_zero,
                                           "analytic"),
                "reading_exclude_zero": pv(pred.reading_exclude_zero,
                                           "analytic"),
            }
        if est.bottom is None or expected is None:
            ok = False
            code = "NO_ACCUMULATION_DETECTED"
            gap = math.nan
        else:
            gap = abs(est.bottom - expected)
            lim = tol * max(abs(expected), 1e-30) if rel else tol
            ok = gap <= lim
            code = "OK" if ok else "BOTTOM_OUTSIDE_TOLERANCE"
        counts_ok = (len(est.counts_below) >= 2
                     and est.counts_below[-1] == est.counts_below[-2])
        if ok and not counts_ok:
            ok, code = False, "COUNTING_NOT_STABLE"
        bundle.add(Check(f"essential_bottom_j{j}", "spectrum", ok, code,
                         {"extrapolated": pv(est.bottom, "eigensolve"),
                          "predicted": pred_payload,
                          "gap": pv(gap, "eigensolve"),
                          "counts_below": pv(est.counts_below, "eigensolve")}))
        summary[f"degree_{j}"] = {
            "bottom": pv(est.bottom, "eigensolve"),
            "band": pv(list(est.band), "eigensolve"),
            "counts_below": pv(est.counts_below, "eigensolve"),
            "prediction": pred_payload,
        }
    if out_dir:
        reporting.write_spectra_csv(os.path.join(out_dir, "spectra.csv"), rows)
    bundle.payloads["spectrum"] = summary


# ---------------------------------------------------------------------------
# scatter task
# ---------------------------------------------------------------------------

def run_scatter(cfg: dict, bundle: ReportBundle, out_dir: Optional[str]):
    num = _section(cfg, "numerics")
    sc = cfg.get("scatter", {})
    model = build_model(cfg)
    psi = build_psi(cfg)
    if "conformal" not in cfg:
        raise ConfigError("scatter task needs a [conformal] block")
    psi.require_bounded()
    seed = bundle.seed
    payload = {}

    # deviation report
    h_expr = parse_expression(str(sc.get("h", "1")))
    expect = sc.get("expected_verdict")
    report = scattering.scattering_integral(psi, h_expr, model)
    verdict_ok = (report.status == expect) if expect else report.verdict
    code = "OK"
    if not verdict_ok:
        code = {"infinite": "DIVERGENT_INTEGRAL",
                "inconclusive": "TAIL_INCONCLUSIVE"}.get(report.status,
                                                         "SCATTERING_FAIL")
    bundle.add(Check("scattering_verdict", "scatter", verdict_ok, code,
                     {"d_h": pv(report.d_h, "quadrature"),
                      "status": report.status,
                      "margin": pv(report.margin, "symbolic-tail"),
                      "partials": pv(report.partials, "quadrature")}))
    payload["deviation"] = {
        "d_h": pv(report.d_h, "quadrature"), "status": report.status,
        "verdict": report.verdict, "detail": report.detail,
    }

    # Prop 4.4-style checklist when a control function is configured
    if "beta" in sc:
        beta = scattering.ControlFunction(
            parse_expression(str(sc["beta"])), C1=float(sc["beta_C1"]),
            C2=float(sc["beta_C2"]), b_exp=float(sc.get("b_exp", 0.5)),
            C_dev=float(sc.get("C_dev", 4.0)))
        ms = scattering.ms_conditions(beta, model, psi,
                                      inj_tilde=float(sc.get("inj_tilde", 1.0)))
        ok = ms.passed and ms.report is not None and ms.report.verdict
        bundle.add(Check("first_order_conditions", "scatter", ok,
                         "OK" if ok else "MS_CONDITIONS_FAIL",
                         {"deviation_bound": ms.cond_deviation,
                          "beta_integrable": ms.cond_integrable,
                          "inj_bound": ms.cond_inj,
                          "details": reporting._plain(ms.details)}))
        wb = scattering.warped_beta_check(beta.beta, model)
        bundle.add(Check("warped_beta_test", "scatter", wb.finite,
                         "OK" if wb.finite else
                         ("DIVERGENT_INTEGRAL" if wb.status == "infinite"
                          else "TAIL_INCONCLUSIVE"),
                         {"value": pv(wb.value, "quadrature"),
                          "specialization": wb.specialization}))
        payload["beta_test"] = {"status": wb.status,
                                "specialization": wb.specialization}

    # Prop 4.8-style profile comparison when requested
    if "phi_b" in sc:
        prof = scattering.phi_profile(model.f, float(sc["phi_b"]), n=model.n)
        ok = bool(prof.hessian_bounded) and prof.beta_check.finite
        bundle.add(Check("phi_profile", "scatter", ok,
                         "OK" if ok else "PHI_CONDITIONS_FAIL",
                         {"hessian_bounded": prof.hessian_bounded,
                          "hessian_sup": pv(prof.hessian_sup, "quadrature"),
                          "beta_status": prof.beta_check.status}))
        payload["phi_profile"] = {"beta_status": prof.beta_check.status,
                                  "symbolic": prof.symbolic}

    # decomposition residual study
    if sc.get("decomposition", True):
        cfg_res = waveops.ResolventConfig(float(num["lam"]), int(num["n"]),
                                          model.m, float(sc.get("K", 0.0)))
        kwargs = dict(dr=num["dr"])
        if not isinstance(model.cross_section, ModeSection):
            kwargs["n_theta"] = num["n_theta"]
        cx = complexes.build_graded_complex(
            model, boundary_condition="dirichlet", **kwargs)
        drs, rels, orders = waveops.decomposition_refinement_study(
            cx, psi.psi, cfg_res, levels=int(num["grid_levels"]), seed=seed)
        trivial = rels[0] == 0.0
        ok = trivial or (all(o >= 0.9 for o in orders) and rels[-1] <= 1e-2)
        bundle.add(Check("decomposition_residual", "scatter", ok,
                         "OK" if ok else "ORDER_BELOW_THRESHOLD",
                         {"residuals": pv(rels, "probe-estimate"),
                          "orders": pv(orders, "probe-estimate")}))
        if out_dir:
            reporting.write_orders_csv(
                os.path.join(out_dir, "decomposition.csv"),
                "relative_residual", drs, rels, orders)

    # Schatten diagnostics on mode sectors over doubling radii
    if sc.get("schatten", False):
        R_seq = [float(R) for R in sc.get("schatten_R", [15.0, 30.0, 60.0])]
        cfg_tr = waveops.ResolventConfig(float(sc.get("schatten_lam", 2.0)),
                                         int(sc.get("schatten_n", 6)),
                                         model.m, float(sc.get("K", 0.0)))
        recs = []
        for R in R_seq:
            mdl = WarpedModel(model.m, model.f, model.h_warp,
                              ModeSection(0.0, 2 * math.pi), b=model.b,
                              R_max=R)
            cg = complexes.build_graded_complex(
                mdl, boundary_condition="dirichlet", dr=num["dr"])
            cb = complexes.build_graded_complex(
                mdl, metric=psi.psi, boundary_condition="dirichlet",
                dr=num["dr"])
            recs.append(waveops.schatten_diagnostics(cg, cb, psi.psi, cfg_tr))
        hs = [r.hs_identification for r in recs]
        tr = [r.trace_v for r in recs]
        stable = all(abs(b - a) <= 0.10 * max(a, 1e-300)
                     for a, b in zip(hs, hs[1:]))
        stable = stable and all(abs(b - a) <= 0.10 * max(a, 1e-300)
                                for a, b in zip(tr, tr[1:]))
        dominated = all(r.factorized_bound >= r.trace_sinh_block for r in recs)
        ok = stable and dominated
        bundle.add(Check("schatten_stability", "scatter", ok,
                         "OK" if ok else ("NORMS_NOT_STABLE" if not stable
                                          else "FACTORIZED_BOUND_FAIL"),
                         {"hs": pv(hs, "eigensolve"),
                          "trace": pv(tr, "eigensolve"),
                          "factorized": pv([r.factorized_bound for r in recs],
                                           "eigensolve")}))
        payload["schatten"] = {"hs": reporting._plain(hs),
                               "trace": reporting._plain(tr)}

    # wave-operator experiment
    if "waveop" in sc:
        wo = sc["waveop"]
        R_wave = float(wo.get("R_max", 380.0))
        dr_wave = float(wo.get("dr", num["dr"]))
        mdl = WarpedModel(model.m, model.f, model.h_warp,
                          ModeSection(float(wo.get("mode_eigenvalue", 0.0)),
                                      2 * math.pi),
                          b=model.b, R_max=R_wave)
        cg = complexes.build_graded_complex(mdl, boundary_condition="dirichlet",
                                            dr=dr_wave)
        cb = complexes.build_graded_complex(mdl, metric=psi.psi,
                                            boundary_condition="dirichlet",
                                            dr=dr_wave)
        third = None
        if "psi_second" in wo:
            psum = parse_expression(f"({psi.psi.sym}) + ({wo['psi_second']})"
                                    if isinstance(psi.psi, Expression)
                                    else str(wo["psi_second"]))
            third = complexes.build_graded_complex(
                mdl, metric=psum, boundary_condition="dirichlet", dr=dr_wave)
        proj = waveops.AcProjector(float(wo.get("bottom", 0.0)),
                                   float(wo.get("lam_max", 0.5)),
                                   float(wo.get("margin", 0.1)),
                                   float(wo.get("ramp_width", 0.08)))
        r = cg.blocks[0].r
        r0 = float(wo.get("packet_center", 40.0))
        sig = float(wo.get("packet_width", 12.0))
        xi = float(wo.get("packet_momentum", 0.55))
        u = np.exp(1j * xi * r) * np.exp(-(r - r0) ** 2 / (4 * sig ** 2))
        sched = [float(t) for t in num["schedule"]]
        diag = waveops.wave_operator(cg, cb, u, sched, proj, third=third)
        decreasing = all(c2 < c1 for c1, c2 in zip(diag.cauchy,
                                                   diag.cauchy[1:]))
        zero_psi = max(np.abs(cg.psi_diag(psi.psi))) <= 1e-14
        if zero_psi:
            ok = (max(diag.cauchy) <= 1e-12
                  and diag.isometry_defect <= 1e-12
                  and diag.intertwining_defect <= 1e-12 and diag.valid)
        else:
            ok = (decreasing and diag.isometry_defect <= 5e-2
                  and diag.intertwining_defect <= 5e-2 and diag.valid
                  and (diag.chain_defect is None
                       or diag.chain_defect <= 1e-2))
        code = "OK"
        if not diag.valid:
            code = "REFLECTION_CONTAMINATION"
        elif not ok:
            code = "WAVEOP_DEFECT_EXCEEDED"
        bundle.add(Check("wave_operator", "scatter", ok, code,
                         {"cauchy": pv(diag.cauchy, "eigensolve"),
                          "isometry": pv(diag.isometry_defect, "eigensolve"),
                          "intertwining": pv(diag.intertwining_defect,
                                             "eigensolve"),
                          "chain": pv(diag.chain_defect, "eigensolve"),
                          "projector": diag.projector,
                          "boundary_mass": pv(diag.boundary_mass,
                                              "eigensolve")}))
        if out_dir:
            reporting.write_waveop_csv(os.path.join(out_dir, "waveop.csv"),
                                       diag)
        payload["waveop"] = {"valid": diag.valid, "reason": diag.reason}
    bundle.payloads["scatter"] = payload


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

TASKS = {"verify": run_verify, "spectrum": run_spectrum, "scatter": run_scatter}


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hodgescat",
        description="Desk-scale diagnostics for conformal scattering of "
                    "Hodge-Laplacians on warped ends")
    parser.add_argument("command", choices=sorted(TASKS))
    parser.add_argument("--config", required=True, help="TOML run config")
    parser.add_argument("--out", default=None, help="report directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--grid-levels", type=int, default=None)
    parser.add_argument("--tolerance", type=float, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    num = cfg.setdefault("numerics", {})
    if args.seed is not None:
        num["seed"] = args.seed
    if args.grid_levels is not None:
        num["grid_levels"] = args.grid_levels
    if args.tolerance is not None:
        num["tolerance"] = args.tolerance
    seed = int(_section(cfg, "numerics")["seed"])

    with open(args.config, "r") as fh:
        raw = fh.read()
    bundle = ReportBundle(reporting.run_id(raw + args.command, seed),
                          cfg, seed)

    if args.out:
        os.makedirs(args.out, exist_ok=True)
    try:
        TASKS[args.command](cfg, bundle, args.out)
    except (ConfigError, geometry.GeometryError, complexes.ComplexError,
            spectral.SpectralError, scattering.ScatteringError,
            waveops.WaveOpError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        bundle.add(Check("task_execution", args.command, False,
                         "TASK_ERROR", {"error": str(exc)}))

    for check in bundle.checks:
        print(check.line())
    if args.out:
        path = os.path.join(args.out, f"report_{args.command}.json")
        with open(path, "w") as fh:
            fh.write(bundle.to_json())
        echo = os.path.join(args.out, "config_echo.toml")
        with open(echo, "w") as fh:
            fh.write(reporting.emit_toml(cfg))
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())
