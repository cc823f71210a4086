"""Command-line driver: config ingestion, experiment runs, JSON/CSV artifacts and the regression report.

Every subcommand reads a JSON config

    {"potential": {...} | "path/to/potential.json",
     "params": {...}, "seed": 0, "tolerances": {...}}

writes ``<subcommand>.json`` (plus CSV tables) into ``--out`` and exits 0
when all of its checks pass, 1 when a check fails or a computation raises,
and 2 on an invalid config.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CollisionAsymptoticsError, ComputationFailed, ConfigInvalid

TOLERANCES = {
    "spectrum_rel": 1e-6,
    "two_body_rel": 1e-10,
    "golden_rel": 1e-6,
    "almgren_abs": 1e-8,
    "gamma_fit": 1e-4,
    "delta_range": 0.1,
    "beta_R": 1e-6,
    "H_limit_rel": 1e-2,
    "pohozaev_exact": 1e-8,
    "pohozaev_manufactured": 1e-6,
    "phi_a": 1e-10,
    "projected_pde": 1e-4,
    "gamma_tilde": 1e-6,
    "sigma_hat": 1e-12,
    "transport": 1e-6,
    "rho_residual": 1e-6,
    "pointwise_variation": 0.1,
}

COMMANDS = ("spectrum", "solve", "almgren", "asymptotics", "project", "verify", "bound-check", "report")

PARAMS = {
    "spectrum": {"count", "n_grid", "max_sector_degree", "galerkin_degree"},
    "solve": {"count", "modes", "boundary", "h", "R", "decades"},
    "almgren": {"count", "modes", "boundary", "h", "R", "decades", "exact"},
    "asymptotics": {"count", "modes", "boundary", "h", "R", "decades", "R_list"},
    "project": {"mu", "depth", "n_points", "steps"},
    "verify": {"kinds", "families", "n_random", "r", "inflation"},
    "bound-check": {"R", "levels", "n_weighted", "q", "solution"},
    "report": {"suite"},
}
SEEDED = {"project", "verify", "bound-check"}


# ---------------------------------------------------------------------------
# serialization


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g") if math.isfinite(x) else "null"
    return json.dumps(x)


def dumps(obj, indent=0):
    """Deterministic JSON with every float written to 17 significant digits; nan/inf become null."""
    obj = _clean(obj)
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in obj) + "\n" + pad + "]"
    return _fmt(obj)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(_clean(v)) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# config


@dataclass
class ExperimentConfig:
    potential: object
    params: dict
    seed: int | None
    tolerances: dict
    raw: dict = field(repr=False)

    @property
    def config_hash(self):
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _parse_json(text, where):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{where}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def build_config(raw, command, base_dir=Path("."), tolerance_scale=1.0):
    from .potential import AngularCoefficient

    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    unknown = set(raw) - {"potential", "params", "seed", "tolerances"}
    if unknown:
        raise ConfigInvalid(f"config: unknown keys {sorted(unknown)}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("params must be an object")
    bad = set(params) - PARAMS[command]
    if bad:
        raise ConfigInvalid(f"params for {command}: unknown keys {sorted(bad)}")
    seed = raw.get("seed")
    if command in SEEDED and seed is None:
        raise ConfigInvalid(f"{command} is randomized and needs a seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigInvalid("seed must be an integer")
    tol = dict(TOLERANCES)
    over = raw.get("tolerances", {})
    bad = set(over) - set(TOLERANCES)
    if bad:
        raise ConfigInvalid(f"tolerances: unknown keys {sorted(bad)}")
    tol.update({k: float(v) for k, v in over.items()})
    if tolerance_scale <= 0:
        raise ConfigInvalid("--tolerance-scale must be positive")
    tol = {k: v * tolerance_scale for k, v in tol.items()}
    pot = raw.get("potential")
    if command == "report":
        coeff = None
    elif isinstance(pot, str):
        path = (base_dir / pot)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read potential file {path}: {exc}") from None
        coeff = AngularCoefficient.from_dict(_parse_json(text, str(path)))
    elif isinstance(pot, dict):
        coeff = AngularCoefficient.from_dict(pot)
    else:
        raise ConfigInvalid("potential must be an object or a path")
    return ExperimentConfig(coeff, params, seed, tol, raw)


def load_config(path, command, tolerance_scale=1.0):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    return build_config(_parse_json(text, str(path)), command, path.parent, tolerance_scale)


# ---------------------------------------------------------------------------
# shared pieces


def _h_from(h_cfg):
    from .potential import radial_power_h, zero_h

    if h_cfg is None:
        return radial_power_h(0.1, 0.5)
    if not isinstance(h_cfg, dict) or h_cfg.get("kind", "radial_power") not in ("radial_power", "zero"):
        raise ConfigInvalid("h must be {'kind': 'radial_power', 'c': .., 'eps': ..} or {'kind': 'zero'}")
    if h_cfg.get("kind") == "zero":
        return zero_h()
    return radial_power_h(float(h_cfg.get("c", 0.1)), float(h_cfg.get("eps", 0.5)))


def _generate(cfg):
    from .potential import zero_h
    from .radial import generate_solution
    from .spectrum import assemble_spectrum

    p = cfg.params
    dec = assemble_spectrum(cfg.potential, count=int(p.get("count", 4)))
    h = _h_from(p.get("h"))
    modes = list(p.get("modes", [0]))
    if max(modes) >= len(dec.eigenvalues):
        raise ConfigInvalid(f"mode index {max(modes)} beyond the {len(dec.eigenvalues)} computed eigenvalues")
    # generation needs a radial profile, which zero_h lacks
    sol = generate_solution(dec, _zero_radial() if h.is_zero else h, modes, float(p.get("R", 1.0)),
                            p.get("boundary"), float(p.get("decades", 6.0)))
    return dec, (zero_h() if h.is_zero else h), sol


def _zero_radial():
    """h = 0 carrying a radial profile."""
    from .potential import radial_power_h

    return radial_power_h(0.0, 0.5)


def _provenance(cfg, grids):
    return {
        "config_hash": cfg.config_hash,
        "potential_digest": cfg.potential.digest() if cfg.potential is not None else None,
        "version": __version__,
        "tolerances": cfg.tolerances,
        "grids": grids,
    }


# ---------------------------------------------------------------------------
# subcommands; each returns (summary, {csv name: (header, rows)})


def golden_dir():
    env = os.environ.get("CSS_GOLDEN_DIR")
    if env:
        return Path(env)
    return Path(str(resources.files("collision_asymptotics") / "data" / "golden"))


def cmd_spectrum(cfg):
    from .spectrum import (assemble_spectrum, lambda_of, mu1_closed_form_cylindrical,
                           mu1_closed_form_two_body)

    p = cfg.params
    c = cfg.potential
    kw = {"count": int(p.get("count", 4))}
    for key in ("n_grid", "max_sector_degree", "galerkin_degree"):
        if key in p:
            kw[key] = int(p[key])
    dec = assemble_spectrum(c, **kw)
    lam = lambda_of(c)
    checks = {}
    out = {
        "potential": c.to_dict(),
        "method": dec.method,
        "eigenvalues": dec.eigenvalues,
        "clusters": dec.summary(),
        "mu1": float(dec.eigenvalues[0]),
        "Lambda": lam,
        "positive_definite": bool(lam < 1.0),
    }
    terms = c.active_terms
    if len(terms) == 1:
        J, alpha, _ = c.single_term()
        if c.pairs and c.pairs[0].alpha != 0.0:
            ref = mu1_closed_form_two_body(c.N, c.k, c.pairs[0].alpha)
            tol = cfg.tolerances["two_body_rel"]
        else:
            ref = mu1_closed_form_cylindrical(c.N, c.k, alpha)[0]
            tol = cfg.tolerances["spectrum_rel"]
        err = abs(dec.eigenvalues[0] - ref) / max(1.0, abs(ref))
        out["closed_form_mu1"] = ref
        out["closed_form_rel_error"] = err
        checks["closed_form"] = bool(err < tol)
    gpath = golden_dir() / f"spectrum_{c.digest()}.json"
    if gpath.exists():
        gold = _parse_json(gpath.read_text(), str(gpath))
        ev = np.asarray(gold["eigenvalues"], float)
        n = min(len(ev), len(dec.eigenvalues))
        err = float(np.max(np.abs(ev[:n] - dec.eigenvalues[:n]) / np.maximum(1.0, np.abs(ev[:n]))))
        out["golden"] = {"file": gpath.name, "max_rel_error": err}
        checks["golden"] = bool(err < cfg.tolerances["golden_rel"])
    out["checks"] = checks
    out["pass"] = all(checks.values())
    out["provenance"] = _provenance(cfg, kw)
    rows = [(i, mu) for i, mu in enumerate(dec.eigenvalues)]
    return out, {"spectrum": (("index", "mu"), rows)}


def cmd_solve(cfg):
    dec, h, sol = _generate(cfg)
    tables = {}
    header = ["r"] + [f"phi_{m.index}" for m in sol.modes]
    cols = [sol.r] + [m.samples.phi for m in sol.modes]
    tables["solve"] = (header, list(zip(*cols)))
    modes = []
    for m in sol.modes:
        sp = dec.sigma_plus(m.index)
        modes.append({"index": m.index, "mu": float(dec.eigenvalues[m.index]), "sigma_plus": sp,
                      "phi_R": float(m.samples.phi[-1]),
                      "phi_over_r_sigma_at_r0": float(m.samples.phi[0] / m.samples.r[0] ** sp)})
    out = {"modes": modes, "h": h.name, "pass": True,
           "provenance": _provenance(cfg, {"points": len(sol.r), "decades": float(cfg.params.get("decades", 6.0))})}
    return out, tables


def cmd_almgren(cfg):
    from .almgren import analyze, check_doubling, compute_trace, estimate_gamma
    from .fields import homogeneous_field
    from .radial import log_grid
    from .spectrum import assemble_spectrum

    p = cfg.params
    c = cfg.potential
    tol = cfg.tolerances
    if p.get("exact", False):
        dec = assemble_spectrum(c, count=int(p.get("count", 4)))
        i = int(p.get("modes", [0])[0])
        sp = dec.sigma_plus(i)
        u, h = homogeneous_field(dec.modes[i], sp), None
        r = log_grid(float(p.get("R", 1.0)), float(p.get("decades", 4.0)), 100)
    else:
        dec, h, sol = _generate(cfg)
        i = sol.modes[0].index
        sp = dec.sigma_plus(i)
        u, r = sol.field(), sol.r
    tr = compute_trace(u, h, coeff=c, r=r)
    if p.get("exact", False):
        # H r^{-2 gamma} is constant, so only the limit fit applies
        g, dfit, C3 = estimate_gamma(tr, noise=tol["almgren_abs"])
        tr = replace(tr, gamma=g, delta_fit=dfit, C3=C3, exact=True, C4=check_doubling(tr).C4)
    else:
        tr = analyze(tr)
    checks = {"gamma_matches_sigma_plus": bool(abs(tr.gamma - sp) < tol["gamma_fit"])}
    if p.get("exact", False):
        dev = float(np.max(np.abs(tr.N - sp)))
        checks["frequency_constant"] = bool(dev < tol["almgren_abs"])
    else:
        dev = float("nan")
        if h is not None and not h.is_zero:
            eps = h.exponent_eps
            checks["delta_near_eps"] = bool(math.isfinite(tr.delta_fit)
                                            and abs(tr.delta_fit - eps) <= tol["delta_range"])
    out = {"sigma_plus": sp, "gamma": tr.gamma, "delta_fit": tr.delta_fit, "C3": tr.C3, "C4": tr.C4,
           "K1": tr.K1, "K2": tr.K2, "max_abs_N_minus_sigma": dev, "decades": tr.decades,
           "checks": checks, "pass": all(checks.values()),
           "provenance": _provenance(cfg, {"points": len(tr.r)})}
    rows = list(zip(tr.r, tr.H, tr.D, tr.N, tr.nu1, tr.nu2))
    return out, {"almgren": (("r", "H", "D", "N", "nu1", "nu2"), rows)}


def cmd_asymptotics(cfg):
    from .almgren import analyze, compute_trace
    from .asymptotics import asymptotic_profile, beta_coefficients, convergence_check

    dec, h, sol = _generate(cfg)
    c = cfg.potential
    tol = cfg.tolerances
    u = sol.field()
    tr = analyze(compute_trace(u, h, coeff=c, r=sol.r))
    g = dec.sigma_plus(sol.modes[0].index)
    Rs = [float(x) for x in cfg.params.get("R_list", [0.25, 0.5, 0.75])]
    betas = [list(beta_coefficients(u, h, None, dec, g, R)[1]) for R in Rs]
    spread = float(np.max(np.ptp(np.array(betas), axis=0)))
    prof = asymptotic_profile(u, h, None, dec, g, Rs[len(Rs) // 2])
    rep = convergence_check(u, prof, coeff=c)
    hl = tr.diagnostics["H_limit"]
    hrel = abs(hl - prof.beta_norm2) / prof.beta_norm2
    checks = {"beta_R_independent": bool(spread < tol["beta_R"]),
              "H_limit_matches": bool(hrel < tol["H_limit_rel"]),
              "errors_decreasing": bool(np.all(np.diff(rep.errors) < 0))}
    out = {"gamma": g, "R_list": Rs, "beta": betas, "beta_spread": spread,
           "H_limit": hl, "beta_norm2": prof.beta_norm2, "H_limit_rel_error": hrel,
           "fitted_rate": rep.fitted_rate, "halving_factors": rep.halving_factors,
           "checks": checks, "pass": all(checks.values()),
           "provenance": _provenance(cfg, {"points": len(sol.r), "lambdas": len(rep.lambdas)})}
    rows = list(zip(rep.lambdas, rep.errors))
    return out, {"asymptotics": (("lambda", "h1_error"), rows)}


def cmd_project(cfg):
    from .projection import (iterate_reduction, lambda_b_check, project_potential,
                             projected_pde_residual)
    from .spectrum import assemble_spectrum, mu1_closed_form_cylindrical

    p = cfg.params
    c = cfg.potential
    tol = cfg.tolerances
    rng = np.random.default_rng(cfg.seed)
    dec = assemble_spectrum(c, count=1)
    mu = float(p["mu"]) if p.get("mu") is not None else float(dec.eigenvalues[0])
    prob = project_potential(c, mu)
    y = rng.standard_normal((int(p.get("n_points", 1000)), c.N - 1)) * 2.0
    ident = prob.identity_residual(y)
    lam_b, ok_b = lambda_b_check(c)
    checks = {"identity": bool(ident < tol["phi_a"]), "Lambda_b_below_one": ok_b}
    out = {"mu": mu, "identity_residual": ident, "Lambda_b": lam_b}
    if p.get("mu") is None and len(c.active_terms) == 1:
        yy = rng.standard_normal((500, c.N - 1)) * 0.8
        steps = [float(s) for s in p.get("steps", [1e-2, 5e-3, 2.5e-3, 1.25e-3])]
        res = [projected_pde_residual(prob, dec.modes[0], yy, s) for s in steps]
        out["projected_pde_residuals"] = res
        checks["projected_pde"] = bool(res[-1] < tol["projected_pde"] and res[-1] <= res[0])
    depth = int(p.get("depth", 1))
    levels = iterate_reduction(c, mu, depth) if depth > 0 else []
    out["levels"] = [{"N": lv.problem.b.N, "mu_b": lv.mu_b, "gamma_tilde": lv.gamma_tilde,
                      "b": lv.problem.b.to_dict()} for lv in levels]
    if levels and len(c.active_terms) == 1 and c.cyl and c.cyl[0].alpha != 0.0 and c.N not in c.cyl[0].J:
        # a cylindrical term away from the pole projects to itself, so the exponent is unchanged
        gp = mu1_closed_form_cylindrical(c.N, c.k, c.cyl[0].alpha)[1]
        dev = max(abs(lv.gamma_tilde - gp) for lv in levels if not lv.problem.b.is_zero)
        out["gamma_prime"] = gp
        out["gamma_tilde_max_deviation"] = dev
        checks["gamma_tilde_invariant"] = bool(dev < tol["gamma_tilde"])
    out["checks"] = checks
    out["pass"] = all(checks.values())
    out["provenance"] = _provenance(cfg, {"n_points": len(y), "depth": depth})
    return out, {}


def cmd_verify(cfg, suite="all"):
    from . import identities as I
    from .fields import homogeneous_field
    from .spectrum import assemble_spectrum

    p = cfg.params
    c = cfg.potential
    tol = cfg.tolerances
    rows, checks = [], {}
    if suite in ("hardy", "all"):
        kinds = p.get("kinds", [k for k in I.KINDS if _kind_applies(k, c)])
        families = p.get("families", ["near_optimizer", "harmonic", "random"])
        r = float(p.get("r", 1.0))
        if "hardy_sobolev_boundary" in kinds:
            I.estimate_ball_sobolev(c.N)
        for kind in kinds:
            for fam in families:
                members = I.default_family(kind, c, r, fam, seed=cfg.seed, n_random=int(p.get("n_random", 100)))
                rep = I.verify_hardy(kind, c, members, r)
                rows.append(("hardy", kind, fam, rep.constant, rep.worst_ratio, rep.margin, rep.trend, rep.passed))
                checks[f"hardy/{kind}/{fam}"] = rep.passed
            if kind in ("cylindrical", "two_body"):
                plain, inflated = I.sharpness_probe(kind, c, r, float(p.get("inflation", 1e-3)))
                rows.append(("sharpness", kind, "inflated", inflated.constant, inflated.worst_ratio,
                             inflated.margin, inflated.trend, not inflated.passed))
                checks[f"sharpness/{kind}"] = bool(not inflated.passed and plain.worst_ratio > 0.95)
    if suite in ("pohozaev", "all"):
        dec = assemble_spectrum(c, count=1)
        u = homogeneous_field(dec.modes[0], dec.sigma_plus(0))
        res = I.verify_pohozaev(u, c, r=1.0, n_half=30)
        worst = max(res.poho, res.poho_bounded, res.energy)
        rows.append(("pohozaev", "homogeneous", "", float("nan"), worst, float("nan"), float("nan"),
                     worst < tol["pohozaev_exact"]))
        checks["pohozaev/homogeneous"] = bool(worst < tol["pohozaev_exact"])
        if len(c.active_terms) == 1 and c.cyl and c.cyl[0].alpha != 0.0:
            um, cm, hm = I.manufactured_solution(c.N, c.k, c.cyl[0].alpha)
            res = I.verify_pohozaev(um, cm, hm, r=1.0, n_half=30)
            worst = max(res.poho, res.poho_bounded, res.energy)
            rows.append(("pohozaev", "manufactured", "", float("nan"), worst, float("nan"), float("nan"),
                         worst < tol["pohozaev_manufactured"]))
            checks["pohozaev/manufactured"] = bool(worst < tol["pohozaev_manufactured"])
    out = {"suite": suite, "checks": checks, "pass": all(checks.values()),
           "provenance": _provenance(cfg, {"n_random": int(p.get("n_random", 100))})}
    header = ("suite", "kind", "family", "constant", "worst", "margin", "trend", "passed")
    return out, {"verify": (header, rows)}


def _kind_applies(kind, c):
    has_pair = any(t.alpha != 0.0 for t in c.pairs)
    has_cyl = any(t.alpha != 0.0 for t in c.cyl)
    if kind in ("two_body", "boundary_pair", "coercivity_pair"):
        return has_pair
    if kind in ("cylindrical", "boundary", "coercivity_J"):
        return has_cyl or not has_pair
    if kind == "many_particle":
        return c.N >= 2 * c.k
    return True


def cmd_bound_check(cfg):
    from . import bounds as B
    from .fields import homogeneous_field
    from .spectrum import assemble_spectrum

    p = cfg.params
    c = cfg.potential
    tol = cfg.tolerances
    R = float(p.get("R", 1.0))
    w = B.build_weight(c, R=R)
    S = B.s_hat_constant(c, weight=w)
    which = p.get("solution", "ground")
    if which == "rho":
        u = w.field()
    elif which == "ground":
        dec = assemble_spectrum(c, count=1)
        u = homogeneous_field(dec.modes[0], dec.sigma_plus(0))
    else:
        raise ConfigInvalid("solution must be 'ground' or 'rho'")
    levels = tuple(int(x) for x in p.get("levels", [4, 8]))
    pw = B.pointwise_bound_check(u, w, R, levels)
    ws_ratio, ws_ok = B.weighted_sobolev_check(w, S.value, n=int(p.get("n_weighted", 100)), seed=cfg.seed)
    transport = B.quadratic_form_transport(B.transport_family(w, seed=cfg.seed), w)
    rres = B.rho_residual(w, seed=cfg.seed)
    q = float(p.get("q", 4.0))
    s_exp = B.s_exponent(q, c.N)
    checks = {"pointwise_stable": pw.passed, "weighted_sobolev": ws_ok,
              "transport": bool(transport < tol["transport"]),
              "rho_residual": bool(rres < tol["rho_residual"]),
              "d_refinement": bool(w.d_change < 0.01),
              "s_exponent": bool((s_exp > c.N / 2) == (q > 2 * c.N / (c.N - 2)))}
    shells = [{"r": float(r), "sup_ratio": float(v)} for r, v in zip(pw.radii, pw.sup_ratio[-1])]
    out = {"sigma_hat": w.sigma_hat, "d": w.d, "S_hat": S.value, "shells": shells,
           "pass": all(checks.values()), "per_level_sup": pw.per_level, "variation": pw.variation,
           "inf_psi_hat": w.inf_psi, "rho_residual": rres, "transport_residual": transport,
           "weighted_sobolev_worst": ws_ratio, "q": q, "s": s_exp, "holder_alpha": B.holder_alpha(c.N),
           "checks": checks, "provenance": _provenance(cfg, {"levels": list(levels)})}
    return out, {}


# ---------------------------------------------------------------------------
# report


def _positivity_sweep(tol):
    """Lambda < 1 iff mu_1 > -((N-2)/2)^2 over 20 single-term potentials straddling criticality.

    Lambda comes from the graded-grid Rayleigh quotient and mu_1 from the
    separated eigen-solver, which reports -inf for a supercritical sector.
    """
    from .potential import AngularCoefficient
    from .spectrum import lambda_of, mu1_of, spectral_floor

    families = (
        (lambda a: AngularCoefficient.cylindrical(5, 3, a), 0.25),
        (lambda a: AngularCoefficient.cylindrical(6, 4, a), 1.0),
        (lambda a: AngularCoefficient.cylindrical(7, 3, a), 0.25),
        (lambda a: AngularCoefficient.pair(6, 3, a), 0.5),
    )
    rows, disagree = [], 0
    for make, crit in families:
        for f in (0.5, 0.9, 0.99, 1.01, 1.2):
            c = make(f * crit)
            lam, mu = lambda_of(c), mu1_of(c)
            pos = bool(mu > spectral_floor(c.N))
            agree = (lam < 1.0) == pos
            disagree += not agree
            rows.append({"potential": c.to_dict(), "Lambda": lam, "mu1": mu, "positive": pos, "agree": agree})
    return {"rows": rows, "disagreements": disagree, "pass": disagree == 0}


def _load_suite(name):
    path = Path(str(resources.files("collision_asymptotics") / "data" / f"{name}.json"))
    if not path.exists():
        raise ConfigInvalid(f"unknown regression suite {name}")
    return _parse_json(path.read_text(), str(path))


def cmd_report(cfg, threads=1, tolerance_scale=1.0):
    suite = _load_suite(cfg.params.get("suite", "regression"))
    jobs = []
    for entry in suite["checks"]:
        name, command = entry["name"], entry["command"]
        if command == "sweep":
            jobs.append((name, command, None))
            continue
        sub = build_config(entry["config"], command, tolerance_scale=tolerance_scale)
        sub.tolerances.update({k: v for k, v in cfg.tolerances.items() if k in cfg.raw.get("tolerances", {})})
        jobs.append((name, command, sub))

    def run_one(job):
        name, command, sub = job
        try:
            if command == "sweep":
                return name, _positivity_sweep(cfg.tolerances)
            summary, _ = run_command(command, sub, suite=sub.params.get("suite", "all") if command == "verify" else None)
            return name, summary
        except CollisionAsymptoticsError as exc:
            return name, {"pass": False, "error": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run_one, jobs))
    checks = {name: bool(s.get("pass", False)) for name, s in results}
    out = {"suite": cfg.params.get("suite", "regression"), "checks": checks, "pass": all(checks.values()),
           "summaries": dict(results), "provenance": _provenance(cfg, {"entries": len(jobs)})}
    return out, {}


def run_command(command, cfg, suite=None, threads=1, tolerance_scale=1.0):
    if command == "spectrum":
        return cmd_spectrum(cfg)
    if command == "solve":
        return cmd_solve(cfg)
    if command == "almgren":
        return cmd_almgren(cfg)
    if command == "asymptotics":
        return cmd_asymptotics(cfg)
    if command == "project":
        return cmd_project(cfg)
    if command == "verify":
        return cmd_verify(cfg, suite or "all")
    if command == "bound-check":
        return cmd_bound_check(cfg)
    if command == "report":
        return cmd_report(cfg, threads, tolerance_scale)
    raise ConfigInvalid(f"unknown subcommand {command}")


# ---------------------------------------------------------------------------
# entry point


def make_parser():
    ap = argparse.ArgumentParser(prog="collision-asym", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "report", help="experiment config (JSON)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--tolerance-scale", type=float, default=1.0)
        if name == "verify":
            sp.add_argument("--suite", choices=("hardy", "pohozaev", "all"), default="all")
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.config is None:
            cfg = build_config({}, args.command, tolerance_scale=args.tolerance_scale)
        else:
            cfg = load_config(args.config, args.command, args.tolerance_scale)
        summary, tables = run_command(args.command, cfg, getattr(args, "suite", None),
                                      args.threads, args.tolerance_scale)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ComputationFailed, CollisionAsymptoticsError) as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.command.replace("-", "_")
    (out / f"{stem}.json").write_text(dumps(summary) + "\n")
    for name, (header, rows) in tables.items():
        (out / f"{name}.csv").write_text(csv_text(header, rows))
    status = "pass" if summary.get("pass") else "FAIL"
    print(f"{args.command}: {status} ({time.perf_counter() - t0:.1f} s) -> {out / (stem + '.json')}",
          file=sys.stderr)
    return 0 if summary.get("pass") else 1


if __name__ == "__main__":
    sys.exit(main())
