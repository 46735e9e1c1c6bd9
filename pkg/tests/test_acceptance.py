"""Acceptance gate: one test (and one printed PASS/FAIL line) per headline
criterion, driven by the full batch config in ``configs/acceptance.toml``.

The batch is executed once per session through the command-line entry point;
each test reads the resulting ``summary.json`` metrics (including wall-clock
budgets) and, where the criterion asks for it, re-measures the quantity
directly against the library.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from curvlab import cli
from curvlab import curvature_algebra as ca
from curvlab import entropy_gcf as eg
from curvlab import support_flow as sfl

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def batch(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    code = cli.main(["run", str(ROOT / "configs" / "acceptance.toml"),
                     "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    return code, summary, out


def scenario(summary, sid):
    return {s["id"]: s for s in summary["scenarios"]}[sid]


def criterion(name, checks):
    """checks: list of (ok, detail); prints one summary line, then asserts."""
    bad = [d for ok, d in checks if not ok]
    print(f"[{'FAIL' if bad else 'PASS'}] {name}"
          + ("" if not bad else " -- " + "; ".join(bad)))
    assert not bad, f"{name}: " + "; ".join(bad)


def test_sphere_radius_law(batch):
    _, summary, _ = batch
    targets = {"sphere-law-H": 1.0, "sphere-law-H2": 2.0, "sphere-law-H3": 3.0,
               "sphere-law-K13": 1.0 / 3.0, "sphere-law-K1": 1.0,
               "sphere-law-K2": 2.0}
    checks = []
    for sid, alpha in targets.items():
        s = scenario(summary, sid)
        m = s["metrics"]
        T = 1.0 / (alpha + 1.0)
        checks += [
            (s["status"] == "pass", f"{sid} status {s['status']}"),
            (abs(m["extinction_time"] - T) <= 1e-4 * T,
             f"{sid} T {m['extinction_time']:.8f} vs {T:.8f}"),
            (abs(m["radius_power_slope"] + (alpha + 1.0)) <= 1e-4 * (alpha + 1.0),
             f"{sid} slope {m['radius_power_slope']:.8f} vs {-(alpha + 1.0)}"),
            (s["elapsed_seconds"] < 10.0, f"{sid} took {s['elapsed_seconds']:.1f}s"),
        ]
    criterion("sphere extinction and radius power law (6 speeds)", checks)


def test_speed_decay_exponent(batch):
    _, summary, _ = batch
    checks = []
    for sid in ("spheroid-decay-H", "spheroid-decay-S2S1"):
        s = scenario(summary, sid)
        m = s["metrics"]
        bmin, bmax = m["supF_band"]
        checks += [
            (s["status"] == "pass", f"{sid} status {s['status']}"),
            (abs(m["supF_slope"] + 0.5) <= 0.05,
             f"{sid} sup-speed slope {m['supF_slope']:.4f}"),
            (bmax / bmin <= 3.0, f"{sid} sup-speed band factor {bmax / bmin:.2f}"),
            (m["rho_plus_band"][1] / m["rho_plus_band"][0] <= 3.0,
             f"{sid} circumradius band factor"),
            (m["rho_minus_band"][1] / m["rho_minus_band"][0] <= 3.0,
             f"{sid} inradius band factor"),
            (s["elapsed_seconds"] < 30.0, f"{sid} took {s['elapsed_seconds']:.1f}s"),
        ]
    criterion("speed decay exponent -1/2 with bounded radius bands", checks)


def test_pinching_cone_preservation(batch):
    _, summary, _ = batch
    s = scenario(summary, "verify-pinching-cone")
    m = s["metrics"]
    criterion("pinching-cone boundary preservation (8 dimension pairs)", [
        (m["passed"], "campaign reported failure"),
        (m["samples"] >= 8_000_000, f"only {m['samples']} samples"),
        (m["min_defect"] >= -1e-9, f"min defect {m['min_defect']:.3e}"),
        (s["elapsed_seconds"] < 60.0, f"took {s['elapsed_seconds']:.1f}s"),
    ])


def test_reaction_and_algebraic_inequalities(batch):
    _, summary, _ = batch
    checks = []
    for sid in ("verify-traceless-bound", "verify-minimal-trace-free",
                "verify-chen-sectional", "verify-codazzi-ratio",
                "verify-lemma23", "verify-peter-paul"):
        s = scenario(summary, sid)
        m = s["metrics"]
        checks += [
            (m["passed"], f"{sid} reported failure"),
            (m["samples"] >= 1_000_000, f"{sid} only {m['samples']} samples"),
            (m["min_defect"] >= -1e-9, f"{sid} min defect {m['min_defect']:.3e}"),
        ]
    sharp = ca.codazzi_sharpness_infimum(2, 1, starts=6, rng=0)
    checks.append((abs(sharp - 1.0) <= 1e-3,
                   f"symmetrization ratio infimum {sharp:.6f} vs 1"))
    criterion("randomized inequality campaigns with sharpness probe", checks)


def test_sphere_ambient_reaction_constants(batch):
    _, summary, _ = batch
    checks = []
    for sid in ("verify-sphere-reaction", "verify-sphere-reaction-n3",
                "verify-sphere-reaction-n2"):
        s = scenario(summary, sid)
        m = s["metrics"]
        checks += [
            (m["passed"], f"{sid} reported failure"),
            (m["samples"] >= 1_000_000, f"{sid} only {m['samples']} samples"),
        ]
    criterion("curved-ambient reaction negativity for n = 2, 3, 4", checks)


def test_entropy_monotonicity(batch):
    _, summary, _ = batch
    checks = []
    total = 0.0
    for sid in ("entropy-monotone-b05", "entropy-monotone-b1",
                "entropy-monotone-b2"):
        s = scenario(summary, sid)
        m = s["metrics"]
        total += s["elapsed_seconds"]
        checks += [
            (s["status"] == "pass", f"{sid} status {s['status']}"),
            (m["max_entropy_step_increase"] <= 1e-6,
             f"{sid} entropy rose by {m['max_entropy_step_increase']:.2e}"),
            (m["final_entropy_max"] <= 1e-3,
             f"{sid} entropy {m['final_entropy_max']:.2e} at the end"),
            (m["max_holder_defect"] <= 1e-6,
             f"{sid} positive Holder defect {m['max_holder_defect']:.2e}"),
        ]
    checks.append((total < 60.0, f"entropy scenarios took {total:.1f}s"))
    # direct slope-versus-bound measurement (central difference about one step)
    for beta in (0.5, 1.0, 2.0):
        state = eg.renormalize_volume(sfl.trig_poly_state(3, 128), math.pi)
        rstate = eg.RescaledGCFState(state=state, tau=0.0)
        dtau = 1e-4
        _, E0 = eg.entropy_point(rstate.state, beta)
        mid = eg.gcf_rescaled_step(rstate, beta, dtau)
        _, holder, _ = eg.entropy_monotonicity_defects(mid, beta, dtau=dtau)
        end = eg.gcf_rescaled_step(mid, beta, dtau)
        _, E2 = eg.entropy_point(end.state, beta)
        slope = (E2 - E0) / (2.0 * dtau)
        checks.append((slope <= holder + 1e-6,
                       f"beta {beta}: slope {slope:.3e} above bound {holder:.3e}"))
        sig = eg.sigma_integral(state, sfl.steiner_point(state))
        checks.append((abs(sig - 2.0 * math.pi) <= 1e-8,
                       f"beta {beta}: sigma integral off by {sig - 2 * math.pi:.2e}"))
    criterion("entropy monotonicity, Holder bound and round limit", checks)


def test_affine_soliton_fixture(batch):
    _, summary, _ = batch
    s = scenario(summary, "soliton-ellipse-b13")
    m = s["metrics"]
    c = scenario(summary, "soliton-ellipse-b1-control")["metrics"]
    criterion("threshold-power ellipse soliton vs shrinking control", [
        (m["eccentricity_drift_per_tau"] <= 1e-3,
         f"eccentricity drift {m['eccentricity_drift_per_tau']:.2e}"),
        (m["entropy_drift_per_tau"] <= 1e-4,
         f"entropy drift {m['entropy_drift_per_tau']:.2e}"),
        (c["eccentricity_end"] < c["eccentricity_start"],
         "control eccentricity failed to decrease"),
    ])


def test_translating_oval_fixture(batch):
    _, summary, _ = batch
    s = scenario(summary, "angenent-oval")
    m = s["metrics"]
    ratios = m["ratios"]
    criterion("implicit translating-oval self-consistency", [
        (m["residual"] <= 1e-2, f"residual {m['residual']:.3e}"),
        (m["ratio_increasing_as_t_decreases"],
         f"radius ratios {ratios} not increasing"),
    ])


def test_high_codimension_mesh_flow(batch):
    _, summary, _ = batch
    b = scenario(summary, "mesh-bump")
    r = scenario(summary, "mesh-round-control")
    mb, mr = b["metrics"], r["metrics"]
    criterion("mesh flow: pinched bump monitors and round control", [
        (0.5 < mb["initial_max_ratio"] < 2.0 / 3.0,
         f"initial ratio {mb['initial_max_ratio']:.4f}"),
        (mb["max_ratio_increase"] <= 1e-9,
         f"ratio rose by {mb['max_ratio_increase']:.2e}"),
        (mb["max_f_sigma_increase"] <= 1e-9,
         f"pinching integral rose by {mb['max_f_sigma_increase']:.2e}"),
        (mb["area_fraction_end"] <= 0.26, "bump run stopped early"),
        (mr["sphere_law_max_rel_err"] <= 0.01,
         f"round-control radius law off by {mr['sphere_law_max_rel_err']:.3f}"),
        (b["elapsed_seconds"] < 300.0, f"bump took {b['elapsed_seconds']:.0f}s"),
        (r["elapsed_seconds"] < 300.0, f"control took {r['elapsed_seconds']:.0f}s"),
    ])


def test_eta_functional_monotonicity(batch):
    _, summary, _ = batch
    checks = []
    for p in (2, 6):
        s = scenario(summary, f"eta-monotone-p{p}")
        m = s["metrics"]
        checks += [
            (s["status"] == "pass", f"p={p} status {s['status']}"),
            (m["max_eta_increase"] <= 1e-6,
             f"p={p} monitor rose by {m['max_eta_increase']:.2e}"),
        ]
    criterion("eta-functional monotonicity for p = 2, 6", checks)


def test_batch_exit_status(batch):
    code, summary, _ = batch
    criterion("full acceptance batch exits clean", [
        (code == 0, f"exit code {code}"),
        (summary["status"] == "pass",
         "; ".join(f"{s['id']}: {s['failures']}" for s in summary["scenarios"]
                   if s["status"] != "pass") or "status fail"),
    ])


def test_figure_pipeline(batch, tmp_path):
    plots = pytest.importorskip("plots")
    _, summary, out = batch
    spec_path = tmp_path / "figure.toml"
    spec_path.write_text(f"""
[figure]
kind = "loglog_fit"
output = "{tmp_path / 'radius.png'}"

[[series]]
csv = "{out / 'sphere-law-H' / 'series.csv'}"
x = "t"
y = "rho_plus"
x_origin = {scenario(summary, 'sphere-law-H')['metrics']['extinction_time']!r}

[annotation]
summary = "{out / 'summary.json'}"
scenario = "sphere-law-H"
metric = "radius_power_slope"
""")
    result = plots.render(plots.load_figure_spec(spec_path))
    expected = scenario(summary, "sphere-law-H")["metrics"]["radius_power_slope"]
    criterion("figure pipeline renders with slopes read from summary.json", [
        ((tmp_path / "radius.png").exists(), "no image written"),
        (result.annotated_slope == expected, "annotation was recomputed"),
        (np.isfinite(result.fitted_slope), "no fitted slope"),
    ])
