"""Experiment orchestration: configs in TOML, deterministic CSV/JSON outputs.

`curvlab run config.toml` executes the listed scenarios (flow runs, entropy
runs, mesh runs, verification campaigns) and writes per-scenario artifacts
plus a `summary.json` and a plain-text manifest.  `curvlab verify <suite>`
drives a single randomized inequality campaign.  Identical config and seed
reproduce byte-identical numeric output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import entropy_gcf as eg
from . import mesh_flow as mf
from . import support_flow as sfl
from . import verification
from .curvature_algebra import PreconditionError
from .speed_functions import speed_from_config


class ConfigError(ValueError):
    """Schema violation; the message names the offending key."""


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _require(cfg: dict, key: str, scenario_id: str):
    if key not in cfg:
        raise ConfigError(f"scenario '{scenario_id}': missing key '{key}'")
    return cfg[key]


def _scenario_seed(root_seed: int, scenario_id: str) -> int:
    return int(np.random.SeedSequence(
        [root_seed, verification._stable_hash(scenario_id)]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# scenario runners

def _initial_state(cfg: dict, sid: str, seed: int) -> sfl.SupportState:
    shape = _require(cfg, "initial", sid)
    N = int(cfg.get("N", 256))
    if shape == "round":
        return sfl.round_state(cfg.get("kind", "planar"), cfg.get("radius", 1.0), N)
    if shape == "ellipse":
        return sfl.ellipse_state(cfg.get("a", 2.0), cfg.get("b", 1.0), N)
    if shape == "spheroid":
        return sfl.spheroid_state(cfg.get("a", 1.2), cfg.get("b", 1.0), N)
    if shape == "trig_poly":
        return sfl.trig_poly_state(np.random.default_rng(seed), N,
                                   modes=int(cfg.get("modes", 4)),
                                   amplitude=cfg.get("amplitude", 0.25))
    raise ConfigError(f"scenario '{sid}': unknown initial shape '{shape}'")


def _run_support_flow(cfg: dict, sid: str, outdir: Path, seed: int) -> dict:
    if cfg.get("task") == "angenent":
        residual = sfl.angenent_consistency_residual(
            cfg.get("t", -2.0), cfg.get("delta", 1e-4), int(cfg.get("N", 512)))
        ratios = []
        times = cfg.get("times", [-1.0, -2.0, -5.0])
        ang = 2.0 * np.pi * np.arange(720) / 720
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        for t in times:
            pts = sfl.angenent_oval_sample(t, int(cfg.get("N", 512)))
            supp = (pts @ dirs.T).max(axis=0)
            rp = sfl.radii_from_support(dirs, supp)
            ratios.append(rp.rho_plus / rp.rho_minus)
        _write_csv(outdir / "series.csv", "t,ratio",
                   list(zip(times, ratios)))
        increasing = all(ratios[i + 1] > ratios[i] for i in range(len(ratios) - 1))
        return {"residual": residual, "ratios": ratios,
                "ratio_increasing_as_t_decreases": increasing}

    state = _initial_state(cfg, sid, seed)
    n = state.dim
    speed = speed_from_config(_require(cfg, "speed", sid), n)
    config = sfl.FlowRunConfig(
        speed=speed, initial=state,
        dt_safety=cfg.get("dt_safety", 0.4),
        stop_inradius=cfg.get("stop_inradius", 0.05),
        record_every=int(cfg.get("record_every", 40)),
        eta_p=cfg.get("eta_p"), f_sigma=cfg.get("f_sigma"))
    run = sfl.evolve(config)
    recs = run.records
    _write_csv(outdir / "series.csv",
               "t,rho_minus,rho_plus,supF,pinch_ratio,area_or_volume,eta_p,f_sigma_max",
               [(r.t, r.rho_minus, r.rho_plus, r.supF, r.pinch_ratio,
                 r.area_or_volume, r.eta_p, r.f_sigma_max) for r in recs])
    every = int(cfg.get("snapshot_every", 0))
    if every > 0:
        ang = state.angles
        for i in range(0, len(recs), every):
            _write_csv(outdir / f"u_{i:05d}.csv", "angle,u",
                       list(zip(ang, recs[i].u)))
    T = run.extinction_time
    alpha = speed.degree
    ts = np.array([r.t for r in recs])
    rho = np.array([r.rho_plus for r in recs])
    radius_power_slope = float(np.polyfit(ts, rho ** (alpha + 1.0), 1)[0])
    metrics = {
        "extinction_time": T,
        "extinction_fit_ok": run.extinction_fit_ok,
        "alpha": alpha,
        "radius_power_slope": radius_power_slope,
    }
    try:
        slope, bmin, bmax = sfl.speed_decay_fit(recs, T)
        metrics["supF_slope"] = slope
        metrics["supF_band"] = [bmin, bmax]
    except PreconditionError:
        pass
    band = sfl.diameter_bound_check(recs, T, alpha, normalized=speed.normalized)
    metrics["rho_plus_band"] = list(band["rho_plus_over_rate"])
    metrics["rho_minus_band"] = list(band["rho_minus_over_rate"])
    eta = np.array([r.eta_p for r in recs])
    if np.isfinite(eta).all():
        metrics["max_eta_increase"] = float(np.diff(eta).max())
    pr = np.array([r.pinch_ratio for r in recs])
    metrics["max_pinch_ratio_increase"] = float(np.diff(pr).max())
    return metrics


def _run_entropy(cfg: dict, sid: str, outdir: Path, seed: int) -> dict:
    beta = _require(cfg, "beta", sid)
    curves = int(cfg.get("curves", 1))
    tau_end = cfg.get("tau_end", 6.0)
    allow_small = bool(cfg.get("allow_small_beta", False))
    worst_increase = -math.inf
    final_entropy = -math.inf
    max_holder = -math.inf
    rng = np.random.default_rng(seed)
    all_metrics = {}
    for c in range(curves):
        if cfg.get("initial", "trig_poly") == "trig_poly" and curves > 1:
            init = sfl.trig_poly_state(rng, int(cfg.get("N", 128)))
        else:
            init = _initial_state(cfg, sid, seed)
        recs, rstate = eg.run_rescaled_flow(
            init, beta, tau_end,
            record_dtau=cfg.get("record_dtau", 0.5),
            allow_small_beta=allow_small)
        suffix = f"_{c}" if curves > 1 else ""
        _write_csv(outdir / f"entropy_series{suffix}.csv",
                   "tau,entropy,entropy_point_x,entropy_point_y,"
                   "holder_defect,variance_defect,volume",
                   [(r.tau, r.entropy, r.entropy_point[0],
                     r.entropy_point[1] if r.entropy_point.size > 1 else 0.0,
                     r.holder_defect, r.variance_defect, r.volume) for r in recs])
        Es = [r.entropy for r in recs]
        worst_increase = max(worst_increase,
                             max(Es[i + 1] - Es[i] for i in range(len(Es) - 1)))
        final_entropy = max(final_entropy, Es[-1])
        max_holder = max(max_holder, max(r.holder_defect for r in recs))
        if curves == 1:
            e0 = eg.eccentricity(eg.renormalize_volume(
                init, eg.RescaledGCFState(state=init, tau=0.0).target_volume))
            e1 = eg.eccentricity(rstate.state)
            all_metrics["eccentricity_start"] = e0
            all_metrics["eccentricity_end"] = e1
            all_metrics["eccentricity_drift_per_tau"] = abs(e1 - e0) / tau_end
            all_metrics["entropy_drift_per_tau"] = abs(Es[-1] - Es[0]) / tau_end
    all_metrics.update({
        "beta": beta, "curves": curves,
        "max_entropy_step_increase": worst_increase,
        "final_entropy_max": final_entropy,
        "max_holder_defect": max_holder,
    })
    return all_metrics


def _run_mesh(cfg: dict, sid: str, outdir: Path, seed: int) -> dict:
    fixture = cfg.get("fixture", "icosphere")
    sub = int(cfg.get("subdivisions", 4))
    if fixture == "icosphere":
        mesh = mf.icosphere(sub, cfg.get("radius", 1.0), int(cfg.get("ambient_dim", 3)))
    elif fixture == "bump_icosphere":
        mesh = mf.bump_icosphere(sub, cfg.get("amplitude", 0.05),
                                 int(cfg.get("ambient_dim", 4)))
    elif fixture == "torus":
        mesh = mf.torus_mesh()
    else:
        raise ConfigError(f"scenario '{sid}': unknown fixture '{fixture}'")
    sigma = cfg.get("sigma", 0.1)
    p = cfg.get("p", 30.0)
    recs, final = mf.run_mcf(mesh, sigma=sigma, p=p,
                             stop_area_fraction=cfg.get("stop_area_fraction", 0.25),
                             record_every=int(cfg.get("record_every", 50)))
    _write_csv(outdir / "monitor.csv", "t,area,diameter,max_ratio,f_sigma_integral",
               [(r.t, r.area, r.diameter, r.max_ratio, r.f_sigma_integral)
                for r in recs])
    if cfg.get("snapshot", True):
        mf.write_mesh_snapshot(outdir / "final_mesh.off", final)
    area0 = recs[0].area
    r0 = math.sqrt(area0 / (4.0 * math.pi))
    worst_law = 0.0
    for r in recs:
        law = r0**2 - 4.0 * r.t
        if law > 0:
            worst_law = max(worst_law,
                            abs(math.sqrt(r.area / (4 * math.pi)) - math.sqrt(law))
                            / math.sqrt(law))
    ratios = [r.max_ratio for r in recs]
    fss = [r.f_sigma_integral for r in recs]
    return {
        "initial_max_ratio": ratios[0],
        "final_max_ratio": ratios[-1],
        "max_ratio_increase": max(ratios[i + 1] - ratios[i]
                                  for i in range(len(ratios) - 1)),
        "max_f_sigma_increase": max(fss[i + 1] - fss[i] for i in range(len(fss) - 1)),
        "sphere_law_max_rel_err": worst_law,
        "area_fraction_end": recs[-1].area / area0,
    }


def _run_campaign(cfg: dict, sid: str, outdir: Path, seed: int) -> dict:
    suite = _require(cfg, "suite", sid)
    samples = int(cfg.get("samples", 100_000))
    params = {k: v for k, v in cfg.items()
              if k not in ("id", "module", "suite", "samples", "seed", "expect")}
    report = verification.run_campaign(suite, seed=seed, samples=samples, **params)
    with open(outdir / "report.json", "w") as fh:
        fh.write(report.to_json())
    return {"suite": suite, "samples": report.samples,
            "min_defect": report.min_defect, "violations": report.violations,
            "passed": report.passed}


_RUNNERS = {
    "support_flow": _run_support_flow,
    "entropy_gcf": _run_entropy,
    "mesh_flow": _run_mesh,
    "curvature_algebra": _run_campaign,
}


# ---------------------------------------------------------------------------
# expectation checks

def _check_expectations(metrics: dict, expect: dict, sid: str):
    """Compare metrics against an `expect` table; returns a list of failures.

    Keys: `<metric>` exact target with `<metric>_rtol` / `<metric>_atol`, or
    `<metric>_max` / `<metric>_min` one-sided bounds.
    """
    failures = []
    for key, target in expect.items():
        if key.endswith(("_rtol", "_atol")):
            continue
        if key.endswith("_max"):
            name = key[:-4]
            if name not in metrics:
                failures.append(f"unknown metric '{name}'")
            elif not metrics[name] <= target:
                failures.append(f"{name} = {metrics[name]:.6g} > {target:.6g}")
            continue
        if key.endswith("_min"):
            name = key[:-4]
            if name not in metrics:
                failures.append(f"unknown metric '{name}'")
            elif not metrics[name] >= target:
                failures.append(f"{name} = {metrics[name]:.6g} < {target:.6g}")
            continue
        if key not in metrics:
            failures.append(f"unknown metric '{key}'")
            continue
        val = metrics[key]
        if isinstance(target, bool):
            if bool(val) is not target:
                failures.append(f"{key} = {val} != {target}")
            continue
        rtol = expect.get(key + "_rtol", 0.0)
        atol = expect.get(key + "_atol", 0.0)
        if not abs(val - target) <= atol + rtol * abs(target):
            failures.append(f"{key} = {val:.10g} not within "
                            f"rtol {rtol:g}/atol {atol:g} of {target:.10g}")
    return failures


# ---------------------------------------------------------------------------
# built-in scenario registry

def _sphere_law(name, speed, T):
    return {"id": name, "module": "support_flow", "kind": "planar",
            "initial": "round", "radius": 1.0, "N": 256, "speed": speed,
            "stop_inradius": 0.15, "record_every": 100,
            "expect": {"extinction_time": T, "extinction_time_rtol": 1e-4}}


SCENARIOS = {}
for _nm, _sp, _T in [
        ("sphere-law-H", {"name": "H", "normalized": True}, 0.5),
        ("sphere-law-H2", {"name": "H^a", "power": 2, "normalized": True}, 1 / 3),
        ("sphere-law-H3", {"name": "H^a", "power": 3, "normalized": True}, 0.25),
        ("sphere-law-K13", {"name": "K^b", "power": 1 / 3, "normalized": True}, 0.75),
        ("sphere-law-K1", {"name": "K^b", "power": 1, "normalized": True}, 0.5),
        ("sphere-law-K2", {"name": "K^b", "power": 2, "normalized": True}, 1 / 3)]:
    SCENARIOS[_nm] = _sphere_law(_nm, _sp, _T)

for _nm, _sp in [("spheroid-decay-H", {"name": "H", "normalized": True}),
                 ("spheroid-decay-S2S1", {"name": "Sk_ratio", "k": 2,
                                          "normalized": True})]:
    SCENARIOS[_nm] = {
        "id": _nm, "module": "support_flow", "kind": "axisymmetric",
        "initial": "spheroid", "a": 1.2, "b": 1.0, "N": 192,
        "speed": _sp, "stop_inradius": 0.012, "record_every": 40,
        "expect": {"supF_slope": -0.5, "supF_slope_atol": 0.05}}

for _p in (2, 6):
    SCENARIOS[f"eta-monotone-p{_p}"] = {
        "id": f"eta-monotone-p{_p}", "module": "support_flow",
        "kind": "axisymmetric", "initial": "spheroid", "a": 1.2, "b": 1.0,
        "N": 192, "speed": {"name": "Sk_ratio", "k": 2, "normalized": True},
        "stop_inradius": 0.015, "record_every": 40, "eta_p": float(_p),
        "expect": {"max_eta_increase_max": 1e-6}}

SCENARIOS["angenent-oval"] = {
    "id": "angenent-oval", "module": "support_flow", "task": "angenent",
    "t": -2.0, "delta": 1e-4, "N": 512, "times": [-1.0, -2.0, -5.0],
    "expect": {"residual_max": 1e-2, "ratio_increasing_as_t_decreases": True}}

for _b, _nm in [(0.5, "entropy-monotone-b05"), (1.0, "entropy-monotone-b1"),
                (2.0, "entropy-monotone-b2")]:
    SCENARIOS[_nm] = {
        "id": _nm, "module": "entropy_gcf", "beta": _b, "curves": 5,
        "N": 128, "tau_end": 6.0, "record_dtau": 0.5,
        "expect": {"max_entropy_step_increase_max": 1e-6,
                   "final_entropy_max_max": 1e-3,
                   "max_holder_defect_max": 1e-6}}

SCENARIOS["soliton-ellipse-b13"] = {
    "id": "soliton-ellipse-b13", "module": "entropy_gcf", "beta": 1 / 3,
    "initial": "ellipse", "a": 2.0, "b": 1.0, "N": 256, "tau_end": 2.0,
    "record_dtau": 0.25,
    "expect": {"eccentricity_drift_per_tau_max": 1e-3,
               "entropy_drift_per_tau_max": 1e-4}}
SCENARIOS["soliton-ellipse-b1-control"] = {
    "id": "soliton-ellipse-b1-control", "module": "entropy_gcf", "beta": 1.0,
    "initial": "ellipse", "a": 2.0, "b": 1.0, "N": 256, "tau_end": 2.0,
    "record_dtau": 0.25,
    "expect": {"eccentricity_end_max": 0.9}}  # strictly below the start (1.0)

SCENARIOS["mesh-round-control"] = {
    "id": "mesh-round-control", "module": "mesh_flow", "fixture": "icosphere",
    "subdivisions": 4, "ambient_dim": 3, "stop_area_fraction": 0.25,
    "record_every": 50,
    "expect": {"sphere_law_max_rel_err_max": 0.01}}
SCENARIOS["mesh-bump"] = {
    "id": "mesh-bump", "module": "mesh_flow", "fixture": "bump_icosphere",
    "subdivisions": 4, "amplitude": 0.05, "sigma": 0.1, "p": 30.0,
    "stop_area_fraction": 0.25, "record_every": 50,
    "expect": {"initial_max_ratio_min": 0.5, "initial_max_ratio_max": 2 / 3,
               "max_ratio_increase_max": 1e-9, "max_f_sigma_increase_max": 1e-9}}

for _suite in verification.CAMPAIGNS:
    SCENARIOS[f"verify-{_suite}"] = {
        "id": f"verify-{_suite}", "module": "curvature_algebra",
        "suite": _suite, "samples": 1_000_000,
        "expect": {"passed": True}}


# ---------------------------------------------------------------------------
# entry points

def _load_config(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _resolve_scenario(entry: dict) -> dict:
    if "preset" in entry:
        preset = entry["preset"]
        if preset not in SCENARIOS:
            raise ConfigError(f"unknown preset '{preset}'")
        merged = dict(SCENARIOS[preset])
        merged.update({k: v for k, v in entry.items() if k != "preset"})
        return merged
    return dict(entry)


def _execute_scenario(cfg: dict, root_seed: int, outroot: Path):
    sid = cfg.get("id")
    if not sid:
        raise ConfigError("scenario without an 'id' key")
    module = _require(cfg, "module", sid)
    if module not in _RUNNERS:
        raise ConfigError(f"scenario '{sid}': unknown module '{module}'")
    outdir = outroot / sid
    outdir.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", _scenario_seed(root_seed, sid)))
    started = time.perf_counter()
    try:
        metrics = _RUNNERS[module](cfg, sid, outdir, seed)
        failures = _check_expectations(metrics, cfg.get("expect", {}), sid)
        status = "pass" if not failures else "fail"
        return {"id": sid, "module": module, "seed": seed, "status": status,
                "elapsed_seconds": time.perf_counter() - started,
                "metrics": metrics, "failures": failures}
    except (ConfigError, PreconditionError) as exc:
        return {"id": sid, "module": module, "seed": seed, "status": "error",
                "elapsed_seconds": time.perf_counter() - started,
                "metrics": {}, "failures": [str(exc)]}


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        print(f"config not found: {path}", file=sys.stderr)
        return 2
    config = _load_config(path)
    scenarios = [_resolve_scenario(s) for s in config.get("scenario", [])]
    if not scenarios:
        raise ConfigError("config defines no [[scenario]] entries")
    ids = [s.get("id") for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate scenario ids")
    root_seed = int(config.get("run", {}).get("seed", 0))
    outroot = Path(args.out or config.get("run", {}).get("out", "out"))
    outroot.mkdir(parents=True, exist_ok=True)
    if args.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(args.threads) as ex:
            results = list(ex.map(
                lambda s: _execute_scenario(s, root_seed, outroot), scenarios))
    else:
        results = [_execute_scenario(s, root_seed, outroot) for s in scenarios]
    summary = {"config": str(path), "seed": root_seed,
               "scenarios": results,
               "status": "pass" if all(r["status"] == "pass" for r in results)
               else "fail"}
    with open(outroot / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    import scipy
    with open(outroot / "manifest", "w") as fh:
        from . import __version__
        fh.write(f"curvlab {__version__}\n")
        fh.write(f"python {sys.version.split()[0]}\n")
        fh.write(f"numpy {np.__version__}\nscipy {scipy.__version__}\n")
        fh.write(f"seed {root_seed}\nconfig {path}\n")
        for r in results:
            fh.write(f"scenario {r['id']} seed {r['seed']} {r['status']}\n")
    for r in results:
        print(f"[{r['status'].upper():5s}] {r['id']}"
              + ("" if not r["failures"] else "  " + "; ".join(r["failures"])))
    return 0 if summary["status"] == "pass" else 1


def cmd_verify(args) -> int:
    samples = int(float(args.samples))
    if samples <= 0:
        print("samples must be positive", file=sys.stderr)
        return 2
    try:
        report = verification.run_campaign(args.suite, seed=args.seed,
                                           samples=samples)
    except PreconditionError:
        print(f"unknown suite '{args.suite}'; known: "
              + ", ".join(sorted(verification.CAMPAIGNS)), file=sys.stderr)
        return 2
    print(f"suite {report.inequality}: {report.samples} samples, seed {report.seed}")
    print(f"min defect {report.min_defect:.6e} (tolerance {report.tolerance:g}), "
          f"violations {report.violations}")
    print(f"argmin {report.argmin}")
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / f"report_{args.suite}.json", "w") as fh:
            fh.write(report.to_json())
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def cmd_list_scenarios() -> int:
    for sid in sorted(SCENARIOS):
        print(f"{sid:28s} {SCENARIOS[sid]['module']}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curvlab",
        description="curvature-flow laboratory: runs, monitors and "
                    "verification campaigns")
    parser.add_argument("--list-scenarios", action="store_true",
                        help="print the built-in scenario registry and exit")
    sub = parser.add_subparsers(dest="command")
    prun = sub.add_parser("run", help="execute scenarios from a TOML config")
    prun.add_argument("config")
    prun.add_argument("--out", default=None, help="output directory")
    prun.add_argument("--threads", type=int, default=1)
    pver = sub.add_parser("verify", help="run one inequality campaign")
    pver.add_argument("suite")
    pver.add_argument("--seed", type=int, default=0)
    pver.add_argument("--samples", default="100000")
    pver.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    if args.list_scenarios:
        return cmd_list_scenarios()
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "verify":
            return cmd_verify(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
