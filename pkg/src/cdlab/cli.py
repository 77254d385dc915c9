"""Batch driver: experiment configs, seeded suites, machine-readable reports.

A run is described by one JSON config document; CLI flags override its
top-level fields.  Reports are deterministic for a fixed config (byte
identical JSON and CSV up to the separate "timings" block), so runs are
diffable across machines.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as defaults
from .errors import CdlabError, ConfigError
from .functionals import (cd_verdict, midpoint_deficit, negative_control_search,
                          rerun_arc, rerun_trial)
from .hamilton_jacobi import (ShiftFamily, family_concavity_check,
                              potential_interpolation_check,
                              reverse_contraction_check, semigroup_defect)
from .interpolation import density_ratio_check, dynamical_coupling
from .gradient_flow import (contraction_check, gradient_curve,
                            inf_convolution_family, laplacian_bound_check,
                            point_anchor_family, riccati_check, static_family,
                            volume_evolution_check)
from .spaces import ModelSpace, analytic_volume, distance, geodesic_point, sample
from .transport import dual_potentials, duality_gap, solve_entropic, solve_exact
from .functionals import draw_region_pair, measures_from_regions

SUITES = ("space", "transport", "cd", "hj", "flow", "all")
_SPACE_FIELDS = {
    "euclidean_box": ("side", "dim"),
    "flat_torus": ("side",),
    "round_sphere": ("radius",),
    "flat_cone": ("total_angle", "radial_cutoff"),
    "hyperbolic_disk": ("chart_radius",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    space: dict
    seed: int
    resolution: int = 64
    m: int = 2
    t_points: int = 21
    trials: int = 5
    suite: str = "all"
    out_dir: str = "out"
    fmt: str = "json"
    tolerances: dict = field(default_factory=dict)

    def model_space(self) -> ModelSpace:
        kw = {k: v for k, v in self.space.items() if k != "kind"}
        return ModelSpace(kind=self.space["kind"], **kw)

    def deficit_tol(self) -> float:
        c = self.tolerances.get("deficit_c", defaults.DEFICIT_C)
        return c / self.resolution


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if "seed" not in raw:
        raise ConfigError("field 'seed' is required (no environment entropy)")
    if "space" not in raw or "kind" not in raw.get("space", {}):
        raise ConfigError("field 'space.kind' is required")
    kind = raw["space"]["kind"]
    if kind not in _SPACE_FIELDS:
        raise ConfigError(f"field 'space.kind': unknown kind {kind!r}")
    for key in raw["space"]:
        if key != "kind" and key not in _SPACE_FIELDS[kind]:
            raise ConfigError(f"field 'space.{key}' not valid for kind {kind!r}")
    cfg = ExperimentConfig(
        space=raw["space"],
        seed=int(raw["seed"]),
        resolution=int(raw.get("resolution", 64)),
        m=int(raw.get("m", 2)),
        t_points=int(raw.get("t_points", 21)),
        trials=int(raw.get("trials", 5)),
        suite=raw.get("suite", "all"),
        out_dir=raw.get("out_dir", "out"),
        fmt=raw.get("format", "json"),
        tolerances=dict(raw.get("tolerances", {})),
    )
    if cfg.resolution < 2:
        raise ConfigError("field 'resolution' must be >= 2")
    if cfg.suite not in SUITES:
        raise ConfigError(f"field 'suite' must be one of {SUITES}")
    if cfg.fmt not in ("json", "csv"):
        raise ConfigError("field 'format' must be 'json' or 'csv'")
    if any(v <= 0 for v in cfg.tolerances.values()):
        raise ConfigError("field 'tolerances': all entries must be positive")
    if cfg.trials < 0:
        raise ConfigError("field 'trials' must be >= 0")
    return cfg


def _check(name, passed, value=None, threshold=None, **details):
    entry = {"name": name, "passed": bool(passed)}
    if value is not None:
        entry["value"] = float(value)
    if threshold is not None:
        entry["threshold"] = float(threshold)
    if details:
        entry["details"] = details
    return entry


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def _space_suite(cfg: ExperimentConfig) -> list:
    sp = cfg.model_space()
    sampled = sample(sp, cfg.resolution)
    rng = np.random.default_rng([cfg.seed, 0])
    idx = rng.choice(sampled.n_nodes, size=min(40, sampled.n_nodes), replace=False)
    P = sampled.nodes[idx]
    from .spaces import pairwise_distance
    D = pairwise_distance(sp, P, P)
    checks = [
        _check("space.metric.diagonal_zero", np.max(np.abs(np.diag(D))) <= 1e-12,
               np.max(np.abs(np.diag(D))), 1e-12),
        _check("space.metric.symmetry", np.max(np.abs(D - D.T)) == 0.0,
               np.max(np.abs(D - D.T)), 0.0),
        _check("space.metric.triangle",
               (D[:, :, None] - D[:, None, :] - D[None, :, :]).max() <= 1e-12,
               (D[:, :, None] - D[:, None, :] - D[None, :, :]).max(), 1e-12),
    ]
    ii = rng.choice(sampled.n_nodes, 20)
    jj = rng.choice(sampled.n_nodes, 20)
    x, y = sampled.nodes[ii], sampled.nodes[jj]
    d = distance(sp, x, y)
    worst = 0.0
    for t1, t2 in [(0.2, 0.7), (0.0, 0.5)]:
        seg = distance(sp, geodesic_point(sp, x, y, t1), geodesic_point(sp, x, y, t2))
        ref = (t2 - t1) * d
        worst = max(worst, float(np.max(np.abs(seg - ref) / np.maximum(ref, 1e-12))))
    checks.append(_check("space.geodesic.constant_speed", worst <= 1e-9, worst, 1e-9))
    vol_err = abs(sampled.total_volume - analytic_volume(sp)) / analytic_volume(sp)
    checks.append(_check("space.sampling.total_volume", vol_err <= 1e-6, vol_err, 1e-6))
    return checks


def _trial_objects(cfg: ExperimentConfig, k: int, sampled):
    rng = np.random.default_rng([cfg.seed, k])
    r0, r1 = draw_region_pair(cfg.model_space(), rng, defaults.SUPPORT_FRAC_RANGE)
    mu0, mu1 = measures_from_regions(sampled, r0, r1)
    return mu0, mu1


def _transport_suite(cfg: ExperimentConfig) -> list:
    sampled = sample(cfg.model_space(), cfg.resolution)
    checks = []
    worst_gap = 0.0
    worst_marg = 0.0
    n = max(1, min(cfg.trials, 10))
    for k in range(n):
        mu0, mu1 = _trial_objects(cfg, k, sampled)
        plan = solve_exact(mu0, mu1)
        m0, m1 = plan.marginals()
        worst_marg = max(worst_marg,
                         float(np.max(np.abs(m0 - mu0.weights))),
                         float(np.max(np.abs(m1 - mu1.weights))))
        pair = dual_potentials(mu0, mu1, plan)
        worst_gap = max(worst_gap, duality_gap(pair, mu0, mu1, plan))
    checks.append(_check("transport.marginals", worst_marg <= 1e-10, worst_marg, 1e-10))
    checks.append(_check("transport.dual_gap", worst_gap <= 1e-9, worst_gap, 1e-9))
    mu0, mu1 = _trial_objects(cfg, 0, sampled)
    exact = solve_exact(mu0, mu1)
    ent = solve_entropic(mu0, mu1, epsilon=1e-2)
    checks.append(_check("transport.entropic_upper_bound",
                         ent.cost >= exact.cost - 1e-12, ent.cost - exact.cost, 0.0))
    return checks


def _cd_suite(cfg: ExperimentConfig) -> tuple[list, list]:
    sp = cfg.model_space()
    checks = []
    profiles = []
    report = cd_verdict(sp, m=cfg.m, trials=cfg.trials, resolution=cfg.resolution,
                        seed=cfg.seed, t_points=cfg.t_points, tol=cfg.deficit_tol())
    for tr in report.trials:
        if tr.error is None:
            profiles.append((tr.index, tr.report))
    errors = [tr for tr in report.trials if tr.error is not None]
    if sp.kind == "hyperbolic_disk":
        best = negative_control_search(sp, m=cfg.m, resolution=cfg.resolution,
                                       candidates=max(cfg.trials, 6), seed=cfg.seed)
        checks.append(_check("cd.negative_control.violation_found",
                             best.deficit > 2 * cfg.deficit_tol(),
                             best.deficit, 2 * cfg.deficit_tol(),
                             seed=best.seed, candidate=best.candidate))
        profiles.append(("negative_control", best.report))
    else:
        clean = [tr for tr in report.trials if tr.error is None]
        worst = max(clean, key=lambda tr: tr.deficit).index if clean else None
        checks.append(_check("cd.max_deficit", report.verdict, report.max_deficit,
                             report.tol, trials=cfg.trials, seed=cfg.seed,
                             worst_trial=worst, failed_trials=len(errors)))
    return checks, profiles


def _seeded_node_field(sampled, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 3.0, 3)
    p = rng.uniform(0, 2 * np.pi, 2)
    x = sampled.nodes
    return a[0] * np.cos(a[1] * x[:, 0] + p[0]) + np.sin(a[2] * x[:, -1] + p[1])


def _hj_suite(cfg: ExperimentConfig) -> tuple[list, list]:
    sp = cfg.model_space()
    checks = []
    defect_rows = []
    res_pair = (max(cfg.resolution // 2, 8), cfg.resolution)
    n_fields = max(1, min(cfg.trials, 10))
    all_nonneg = True
    all_decreasing = True
    for k in range(n_fields):
        ds = []
        for res in res_pair:
            sampled = sample(sp, res)
            f = _seeded_node_field(sampled, [cfg.seed, 100 + k])
            d = semigroup_defect(sampled, f, 0.2, 0.3)
            ds.append(d)
            defect_rows.append((k, res, d))
        all_nonneg &= all(d >= -1e-12 for d in ds)
        all_decreasing &= ds[1] < ds[0]
    checks.append(_check("hj.semigroup.nonnegative", all_nonneg))
    checks.append(_check("hj.semigroup.defect_decreases", all_decreasing,
                         details_resolutions=list(res_pair)))
    sampled = sample(sp, cfg.resolution)
    fam = ShiftFamily(sampled, _seeded_node_field(sampled, [cfg.seed, 200]))
    conc = family_concavity_check(fam, t=0.5, n_geodesics=20, seed=cfg.seed)
    checks.append(_check("hj.family_concavity", conc.max_second_difference <= 1e-7,
                         conc.max_second_difference, 1e-7))
    mu0, mu1 = _trial_objects(cfg, 0, sampled)
    plan = solve_exact(mu0, mu1)
    pair = dual_potentials(mu0, mu1, plan)
    coupling = dynamical_coupling(plan)
    tol_support = defaults.HJ_SUPPORT_C / cfg.resolution
    worst_floor = 0.0
    worst_support = 0.0
    for t in (0.25, 0.5, 0.75):
        rep = potential_interpolation_check(mu0, mu1, pair, coupling, t)
        worst_floor = max(worst_floor, -rep.min_sum_nodes)
        worst_support = max(worst_support, rep.max_abs_sum_on_rays)
    checks.append(_check("hj.potentials.sum_nonnegative", worst_floor <= 1e-9,
                         worst_floor, 1e-9))
    checks.append(_check("hj.potentials.sum_vanishes_on_support",
                         worst_support <= tol_support, worst_support, tol_support))
    rc = reverse_contraction_check(coupling, 0.25, 0.75, n_pairs=100, seed=cfg.seed)
    checks.append(_check("hj.reverse_contraction", rc.min_margin >= -1e-7,
                         rc.min_margin, -1e-7))
    ratio = density_ratio_check(coupling, 0.25, 0.5, m=cfg.m)
    checks.append(_check("hj.density_ratio_mass", ratio.passed_fraction >= 0.99,
                         ratio.passed_fraction, 0.99))
    return checks, defect_rows


def _flow_suite(cfg: ExperimentConfig) -> list:
    from .spaces import euclidean_box
    sp = cfg.model_space()
    checks = []
    # contraction of the point-anchored shift family on the configured space
    rng = np.random.default_rng([cfg.seed, 300])
    sampled = sample(sp, max(cfg.resolution // 2, 16))
    t0, t1 = 0.25, 0.5
    step = 1e-3
    ok = True
    worst = np.inf
    evaluated = 0
    from .spaces import exp_map
    for _ in range(40):
        if evaluated >= 10:
            break
        i = rng.integers(0, sampled.n_nodes)
        anchor = sampled.nodes[i]
        fam = point_anchor_family(sp, anchor)
        # starts close to the anchor: the flow doubles the offset by t1
        angs = rng.uniform(0, 2 * np.pi, 2)
        dirs = np.stack([np.cos(angs), np.sin(angs)], axis=-1)[:, : sp.dim]
        starts = exp_map(sp, np.broadcast_to(anchor, (2, sp.dim)), dirs,
                         rng.uniform(0.02, 0.05, 2))
        try:
            ca = gradient_curve(fam, starts[0], t0, t1, step=step)
            cb = gradient_curve(fam, starts[1], t0, t1, step=step)
        except CdlabError:  # start fell off the chart
            continue
        if ca.truncated or cb.truncated:
            continue
        rep = contraction_check(fam, ca, cb, t0, t1, tol=10 * step)
        ok &= rep.passed
        worst = min(worst, rep.slack)
        evaluated += 1
    checks.append(_check("flow.contraction_hj_rate", ok and evaluated >= 5,
                         worst if np.isfinite(worst) else None, pairs=evaluated))
    # Laplacian bound for a quadratic on a box chart (equality case)
    box = euclidean_box(4.0)
    bs = sample(box, 32)
    fq = -0.5 * np.sum((bs.nodes - 2.0) ** 2, axis=1)
    lb = laplacian_bound_check(bs, fq, lam=-1.0, m=2, tol=1e-8, validation_tol=1e-6)
    checks.append(_check("flow.laplacian_bound_quadratic", lb.passed, lb.max_excess, 1e-8))
    # Riccati equality case (coarse step; the acceptance suite runs 1e-3)
    c = np.array([2.0, 2.0])
    fam = inf_convolution_family(box, lambda p: 0.5 * np.sum((p - c) ** 2, axis=1),
                                 sample(box, 48))
    curve = gradient_curve(fam, np.array([2.3, 2.2]), 0.1, 0.9, step=5e-3)
    ric = riccati_check(fam, curve, m=2, tol=1e-3)
    h_err = float(np.max(np.abs(ric.h - 2.0 / (1.0 + ric.times))))
    checks.append(_check("flow.riccati_equality", ric.passed and h_err <= 1e-3,
                         h_err, 1e-3))
    # volume evolution for the contracting quadratic flow
    vfam = static_family(box, lambda p: -0.5 * np.sum((p - c) ** 2, axis=1), -1.0)
    vol = volume_evolution_check(vfam, (1.85, 2.15, 1.85, 2.15), 0.2, 0.7,
                                 sample_n=240, flow_step=1e-3, quad_points=9,
                                 seed_box=(1.2, 2.8, 1.2, 2.8))
    checks.append(_check("flow.volume_evolution", vol.rel_mismatch <= 0.05,
                         vol.rel_mismatch, 0.05))
    return checks


# ---------------------------------------------------------------------------
# run / emit
# ---------------------------------------------------------------------------


def run(cfg: ExperimentConfig) -> dict:
    """Execute the configured suite; deterministic up to the timings block."""
    t_start = time.time()
    checks = []
    profiles = []
    defect_rows = []
    timings = {}

    def timed(name, fn):
        t0 = time.time()
        out = fn()
        timings[name] = time.time() - t0
        return out

    wanted = (cfg.suite,) if cfg.suite != "all" else ("space", "transport", "cd", "hj", "flow")
    if "space" in wanted:
        checks += timed("space", lambda: _space_suite(cfg))
    if "transport" in wanted:
        checks += timed("transport", lambda: _transport_suite(cfg))
    if "cd" in wanted:
        got = timed("cd", lambda: _cd_suite(cfg))
        checks += got[0]
        profiles += got[1]
    if "hj" in wanted:
        got = timed("hj", lambda: _hj_suite(cfg))
        checks += got[0]
        defect_rows += got[1]
    if "flow" in wanted:
        checks += timed("flow", lambda: _flow_suite(cfg))

    timings["total"] = time.time() - t_start
    report = {
        "artifact": "cdlab",
        "version": "0.1.0",
        "rng": defaults.RNG_NAME,
        "config": dataclasses.asdict(cfg),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "timings": timings,
    }
    report["_profiles"] = profiles
    report["_defect_rows"] = defect_rows
    return report


def emit(report: dict, out_dir=None, fmt=None) -> list:
    """Write report JSON (timings separated) and optional CSV profiles."""
    cfg = report["config"]
    out = Path(out_dir if out_dir is not None else cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    fmt = fmt if fmt is not None else cfg["fmt"]
    written = []

    body = {k: v for k, v in report.items() if not k.startswith("_")}
    path = out / "report.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    written.append(path)

    if fmt == "csv":
        prof = out / "theta_profiles.csv"
        with open(prof, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "t", "theta"])
            for label, rep in report.get("_profiles", []):
                for t, th in zip(rep.t_grid, rep.theta):
                    w.writerow([label, repr(float(t)), repr(float(th))])
        written.append(prof)
        defc = out / "semigroup_defects.csv"
        with open(defc, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "resolution", "defect"])
            for k, res, d in report.get("_defect_rows", []):
                w.writerow([k, res, repr(float(d))])
        written.append(defc)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cdlab",
                                     description="Concavity checks for model spaces")
    sub = parser.add_subparsers(dest="command", required=True)
    names = {"space": "space", "transport": "transport", "cd-check": "cd",
             "hj-check": "hj", "flow-check": "flow", "all": "all"}
    for cmd in names:
        p = sub.add_parser(cmd)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--resolution", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--format", type=str, default=None, choices=("json", "csv"))
    args = parser.parse_args(argv)

    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            print(f"config parse error at line {exc.lineno}: {exc.msg}", file=sys.stderr)
            return 2
    raw.setdefault("space", {"kind": "euclidean_box", "side": 1.0})
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.resolution is not None:
        raw["resolution"] = args.resolution
    if args.trials is not None:
        raw["trials"] = args.trials
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.format is not None:
        raw["format"] = args.format
    raw["suite"] = names[args.command]

    try:
        cfg = config_from_dict(raw)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2

    try:
        report = run(cfg)
    except CdlabError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    emit(report)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        val = f" value={c['value']:.3e}" if "value" in c else ""
        thr = f" threshold={c['threshold']:.3e}" if "threshold" in c else ""
        print(f"[{status}] {c['name']}{val}{thr}")
    print(f"overall: {'PASS' if report['passed'] else 'FAIL'}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
