"""Dispatch of experiment configs to the numerical modules.

Each ``_run_<kind>`` returns ``(results, verdicts)``; every verdict carries a
``passed`` flag next to the numbers that justify it.  Artifacts (CSV, SVG) go
to ``out_dir`` when one is given.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, svg
from .config import ExperimentConfig
from .dichotomy import build_certificate, lambda_tilde, verify_supported
from .errors import (
    HypothesisError,
    NoCertificateError,
    PreconditionError,
    TheoremViolationError,
)
from .fields import FieldExpr, zero_field
from .geometry import convex_hull_2d
from .grid import GridDomain, build_grid, gradient_fd_all
from .hull_property import (
    QuasiConvexProbe,
    check_hull_like_property,
    check_hull_property,
    default_probes,
)
from .monge_ampere import MAProblem, solution_rows, solve_ma, verify_theorem5
from .report import write_csv
from .singularity import (
    bifurcation_scan,
    direct_det,
    geometric_lambdas,
    remark1_case,
    singular_sweep,
)
from .transport import check_max_principle, counterexample_probe, make_instance


def make_domain(d: dict) -> GridDomain:
    mask = d.get("mask")
    return build_grid(tuple(float(v) for v in d["box"]), int(d["nx"]), int(d["ny"]),
                      None if mask in (None, "all") else mask, bool(d.get("periodic_y", False)))


def make_probe(p: dict) -> QuasiConvexProbe:
    if p["kind"] == "linear":
        return QuasiConvexProbe.linear(p["direction"])
    if p["kind"] == "norm":
        return QuasiConvexProbe.norm(p["center"])
    return QuasiConvexProbe.max_linear(p["directions"], p.get("offsets"))


def lambda_values(lam: dict, default=()) -> np.ndarray:
    if "values" in lam:
        return np.asarray(lam["values"], dtype=float)
    if {"min", "max", "steps"} <= set(lam):
        return geometric_lambdas(float(lam["min"]), float(lam["max"]), int(lam["steps"]))
    return np.asarray(default, dtype=float)


def _want(cfg: ExperimentConfig, kind: str, out_dir) -> bool:
    return out_dir is not None and bool(cfg.output.get(kind, True))


def _field(cfg, key, default=None) -> Optional[FieldExpr]:
    text = cfg.fields.get(key)
    return FieldExpr(text) if text is not None else default


def _run_hull_check(cfg, out_dir):
    dom = make_domain(cfg.domain)
    f = _field(cfg, "f")
    probes = default_probes(f.m)
    if cfg.probe:
        probes.append(make_probe(cfg.probe))
    rep = check_hull_property(f, dom, cfg.tol("tol"), probes)
    if _want(cfg, "csv", out_dir):
        write_csv(out_dir / "probe_gaps.csv", ["probe", "gap"], enumerate(rep.probe_gaps))
    if _want(cfg, "svg", out_dir) and f.m == 2:
        fb = f(dom.boundary_points)
        svg.hull_svg(f(dom.interior_points), convex_hull_2d(fb).hull_vertices_2d,
                     out_dir / "hull.svg", f(np.array(rep.worst_point)))
    return rep.to_dict(), {"hull_property": {"passed": rep.holds, "violation": rep.worst_violation,
                                             "tolerance": rep.tolerance}}


def _run_hull_like(cfg, out_dir):
    dom = make_domain(cfg.domain)
    f = _field(cfg, "f")
    probes = default_probes(f.m)
    if cfg.probe:
        probes.append(make_probe(cfg.probe))
    widths = cfg.params.get("widths")
    if widths is not None:
        widths = [w * dom.h for w in widths]  # given in grid spacings
    rep = check_hull_like_property(f, dom, probes, widths, cfg.tol("tol"))
    if _want(cfg, "csv", out_dir):
        rows = ([i, t.interior_sup, *t.collar_sups, int(t.satisfied)] for i, t in enumerate(rep.traces))
        write_csv(out_dir / "collar_traces.csv",
                  ["probe", "interior_sup", *[f"collar_{w:.6g}" for w in rep.widths], "satisfied"], rows)
    worst = max(t.interior_sup - t.collar_sups[-1] for t in rep.traces)
    return rep.to_dict(), {"hull_like_property": {"passed": rep.holds, "worst_gap": worst,
                                                  "tolerance": rep.tolerance}}


def _certificate(cfg, dom, f):
    delta = cfg.params.get("delta")
    if delta is not None:
        delta = delta * dom.h
    return build_certificate(f, dom, make_probe(cfg.probe), delta)


def _run_certificate(cfg, out_dir):
    dom = make_domain(cfg.domain)
    f = _field(cfg, "f")
    try:
        cert = _certificate(cfg, dom, f)
    except NoCertificateError as exc:
        return {"certificate": None}, {"certificate": {"passed": False, "reason": "no-certificate",
                                                       "message": str(exc)}}
    g = _field(cfg, "g", zero_field(f.m))
    lt = lambda_tilde(g, f, cert)
    results = {"certificate": cert.to_dict(), "lambda_tilde": lt, "supported": []}
    verdicts = {"certificate": {"passed": True, "r": cert.r, "rho": cert.rho,
                                "X_nodes": int(cert.X.sum())}}
    support = None
    for lam in lambda_values(cfg.lam):
        key = f"supported[lambda={lam:g}]"
        try:
            v = verify_supported(g, f, float(lam), cert, cfg.tol("tol"))
        except PreconditionError as exc:
            results["supported"].append({"lambda": float(lam), "skipped": str(exc)})
            continue
        except TheoremViolationError as exc:
            verdicts[key] = {"passed": False, "message": str(exc)}
            continue
        support = support or v.point
        results["supported"].append(v.to_dict())
        verdicts[key] = {"passed": v.passed, "boundary_distance": v.boundary_distance,
                         "tolerance": v.tolerance, "node": v.node}
    if _want(cfg, "csv", out_dir):
        rows = [(s["lambda"], lt, s.get("support_node", -1), s.get("boundary_distance", np.nan),
                 int(s.get("passed", False))) for s in results["supported"]]
        write_csv(out_dir / "supported.csv",
                  ["lambda", "lambda_tilde", "node", "boundary_distance", "passed"], rows)
    if _want(cfg, "svg", out_dir):
        svg.certificate_svg(cert, out_dir / "certificate.svg", support)
    return results, verdicts


def _run_lambda_sweep(cfg, out_dir):
    dom = make_domain(cfg.domain)
    f, g = _field(cfg, "f"), _field(cfg, "g")
    lam_t = None
    if cfg.probe:
        cert = _certificate(cfg, dom, f)
        X = cert.X
        lam_t = lambda_tilde(g, f, cert)
    else:
        X = dom.interior
    tol_det = cfg.tol("tol_det", 1e-9)
    res = singular_sweep(g, f, X, dom, lambdas=lambda_values(cfg.lam), tol_det=tol_det)
    expect_zero = bool(cfg.lam.get("expect_zero", True))
    above = cfg.lam.get("above", lam_t if lam_t is not None else 0.0)
    rows = [r for r in res.rows if r.lam > above] if expect_zero else res.rows
    if expect_zero:
        passed = bool(rows) and all(r.certified for r in rows)
    else:
        passed = not any(r.certified for r in rows)
    results = res.to_dict()
    results["lambda_tilde"] = lam_t
    if _want(cfg, "csv", out_dir):
        write_csv(out_dir / "sweep.csv", ["lambda", "min_abs_det", "x", "y", "certified"],
                  res.csv_rows())
    if _want(cfg, "svg", out_dir):
        lam = res.first_certified if res.first_certified is not None else res.rows[-1].lam
        D = np.full((dom.ny, dom.nx), np.nan)
        D[X] = direct_det(f, g, lam, dom.points(X))
        svg.scalar_field_svg(dom, np.sign(D), out_dir / "det_sign.svg")
    return results, {"singular_sweep": {
        "passed": passed, "expect_zero": expect_zero, "checked": len(rows),
        "min_abs_det": min((r.min_abs_det for r in rows), default=None)}}


def _run_bifurcation(cfg, out_dir):
    dom = make_domain(cfg.domain)
    f, g = _field(cfg, "f"), _field(cfg, "g")
    cert = _certificate(cfg, dom, f)
    K = int(cfg.params.get("K", 4))
    tol_res = cfg.tol("tol_res", 1e-8)
    results, verdicts = {"witnesses": []}, {}
    for lam in lambda_values(cfg.lam):
        w = bifurcation_scan(g, f, cert, float(lam), cfg.params.get("r0"), K)
        results["witnesses"].append(w.to_dict())
        ok_y = len(w.y_list) == K and all(y["preimages"] == 0 for y in w.y_list)
        ok_z = len(w.z_list) == K and all(
            max(z["residual_u"], z["residual_v"]) <= tol_res for z in w.z_list)
        verdicts[f"bifurcation[lambda={lam:g}]"] = {
            "passed": bool(ok_y and ok_z), "y_found": len(w.y_list), "z_found": len(w.z_list),
            "max_residual": max((max(z["residual_u"], z["residual_v"]) for z in w.z_list),
                                default=None)}
        if _want(cfg, "csv", out_dir):
            rows = [(lam, y["k"], "y", y["y"][0], y["y"][1], y["preimages"], np.nan) for y in w.y_list]
            rows += [(lam, z["k"], "z", z["z"][0], z["z"][1], 2,
                      max(z["residual_u"], z["residual_v"])) for z in w.z_list]
            write_csv(out_dir / f"bifurcation_{lam:g}.csv",
                      ["lambda", "k", "type", "target_1", "target_2", "preimages", "residual"], rows)
    if _want(cfg, "svg", out_dir):
        svg.certificate_svg(cert, out_dir / "certificate.svg")
    return results, verdicts


def _ma_problem(cfg) -> MAProblem:
    return MAProblem(make_domain(cfg.domain), _field(cfg, "h"), _field(cfg, "boundary"))


def _ma_solve(cfg, prob):
    return solve_ma(prob, max_iters=int(cfg.params.get("max_iters", 200_000)),
                    tol_res=cfg.tol("tol_res", 1e-8), omega=cfg.params.get("omega"),
                    mode=cfg.params.get("mode", "gauss-seidel"))


def _ma_common(cfg, out_dir, prob, sol):
    dom = prob.dom
    results = {"solution": sol.to_dict()}
    verdicts = {"converged": {"passed": sol.converged, "residual": sol.residual,
                              "iterations": sol.iterations}}
    exact = _field(cfg, "exact")
    if exact is not None:
        sel = dom.interior | dom.boundary_nodes
        err = float(np.abs(sol.u[sel] - exact.scalar(dom.points(sel))).max())
        results["max_error"] = err
        tol_err = cfg.tol("tol_error")
        if tol_err is not None:
            verdicts["error"] = {"passed": err <= tol_err, "max_error": err, "tolerance": tol_err}
    if _want(cfg, "csv", out_dir):
        write_csv(out_dir / "solution.csv", ["x", "y", "u", "u_x", "u_y"], solution_rows(sol, dom))
    return results, verdicts


def _run_ma_solve(cfg, out_dir):
    prob = _ma_problem(cfg)
    sol = _ma_solve(cfg, prob)
    return _ma_common(cfg, out_dir, prob, sol)


def _run_ma_verify(cfg, out_dir):
    prob = _ma_problem(cfg)
    sol = _ma_solve(cfg, prob)
    results, verdicts = _ma_common(cfg, out_dir, prob, sol)
    rep = verify_theorem5(sol, prob, cfg.tol("tol"), cfg.tol("tol_res", 1e-8))
    results["gradient_hull"] = rep.to_dict()
    verdicts["gradient_hull"] = {"passed": rep.holds, "violation": rep.worst_violation,
                                 "tolerance": rep.tolerance}
    if _want(cfg, "svg", out_dir):
        dom = prob.dom
        grad = gradient_fd_all(sol.u, dom)
        gb = grad[dom.boundary_nodes]
        svg.hull_svg(grad[dom.interior], convex_hull_2d(gb).hull_vertices_2d,
                     out_dir / "gradient_hull.svg")
    return results, verdicts


def _run_transport(cfg, out_dir):
    dom = make_domain(cfg.domain)
    beta, F = _field(cfg, "beta"), cfg.fields["F"]
    tol = cfg.tol("tol")
    alpha = _field(cfg, "alpha")
    if alpha is None:
        c = counterexample_probe(beta, F, dom, tol)
        rep = c.report
        results = c.to_dict()
        verdicts = {"max_principle": {"passed": rep.passed, "interior_excess": c.interior_excess,
                                      "tolerance": rep.tolerance}}
    else:
        try:
            inst = make_instance(beta, alpha, F, dom)
        except HypothesisError as exc:
            return ({"instance": None},
                    {"hypothesis": {"passed": False, "node": exc.node, "message": str(exc)}})
        rep = check_max_principle(inst, tol)
        results = {"instance": inst.to_dict(), "max_principle": rep.to_dict()}
        verdicts = {"max_principle": {"passed": rep.passed, "sup_gap": rep.sup_gap,
                                      "inf_gap": rep.inf_gap, "tolerance": rep.tolerance}}
    if _want(cfg, "csv", out_dir):
        write_csv(out_dir / "max_principle.csv",
                  ["sup_interior", "sup_boundary", "inf_interior", "inf_boundary", "tolerance", "passed"],
                  [(rep.sup_interior, rep.sup_boundary, rep.inf_interior, rep.inf_boundary,
                    rep.tolerance, int(rep.passed))])
    if _want(cfg, "svg", out_dir):
        u = beta.compose(F)
        vals = np.full((dom.ny, dom.nx), np.nan)
        vals[dom.interior] = u.scalar(dom.interior_points)
        svg.scalar_field_svg(dom, vals - np.nanmean(vals), out_dir / "u.svg")
    return results, verdicts


def _run_remark1(cfg, out_dir):
    samples = int(cfg.params.get("samples", 1000))
    tol = cfg.tol("tol", 1e-9)
    results, verdicts = {"cases": []}, {}
    for lam in lambda_values(cfg.lam, (0.5, 1.0, 2.0)):
        r = remark1_case(float(lam), samples)
        results["cases"].append(r.to_dict())
        err = abs(r.violation - r.expected_violation)
        verdicts[f"remark1[lambda={lam:g}]"] = {
            "passed": bool(r.injective and err <= tol), "injective": r.injective,
            "violation": r.violation, "error": err, "tolerance": tol}
    if _want(cfg, "csv", out_dir):
        write_csv(out_dir / "remark1.csv", ["lambda", "min_pair_distance", "violation", "injective"],
                  [(c["lam"], c["min_pair_distance"], c["violation"], int(c["injective"]))
                   for c in results["cases"]])
    return results, verdicts


RUNNERS = {
    "hull-check": _run_hull_check,
    "hull-like": _run_hull_like,
    "certificate": _run_certificate,
    "lambda-sweep": _run_lambda_sweep,
    "bifurcation": _run_bifurcation,
    "ma-solve": _run_ma_solve,
    "ma-verify": _run_ma_verify,
    "transport": _run_transport,
    "remark1": _run_remark1,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Report for one experiment, without timing (deterministic)."""
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    results, verdicts = RUNNERS[cfg.kind](cfg, out_dir)
    return {
        "config": cfg.to_dict(),
        "kind": cfg.kind,
        "passed": all(v["passed"] for v in verdicts.values()),
        "verdicts": verdicts,
        "results": results,
        "version": __version__,
    }
