"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (a PASS/FAIL table is printed in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import filecmp
import time

import numpy as np
import pytest

from enkbf_dp import experiments as ex
from enkbf_dp.enkbf import init_ensemble, run_until_discrepancy
from enkbf_dp.posterior import posterior_moments, theoretical_rate
from enkbf_dp.seqmodel import PriorSpec, discrepancy_threshold, generate_observations, ground_truth, residual
from enkbf_dp.spectral import eigenpairs

RESULTS = []


def record(number, name, passed, detail):
    RESULTS.append((number, name, bool(passed), detail))
    assert passed, f"criterion {number} ({name}): {detail}"


def test_c1_oracle_equivalence():
    t = time.perf_counter()
    rep = ex.run_oracle_check(ex.resolve_spec("oracle"))
    secs = time.perf_counter() - t
    ok = rep["mean_rel_l2_error"] <= 0.05 and rep["max_var_rel_error_first5"] <= 0.20 and secs <= 60
    record(1, "oracle equivalence", ok,
           f"mean rel err {rep['mean_rel_l2_error']:.2e} (<= 0.05), "
           f"max var rel err i<=5 {rep['max_var_rel_error_first5']:.3f} (<= 0.20), {secs:.1f}s")


def _dense(kappa, c0, y, n, tau):
    K, C0, R = np.diag(kappa), np.diag(c0), np.eye(kappa.size) / n
    G = tau * C0 @ K.T @ np.linalg.inv(tau * K @ C0 @ K.T + R)
    return G @ y, np.diag(C0 - G @ K @ C0)


def test_c2_dense_vs_diagonal():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(100):
        D = int(rng.integers(1, 9))
        n = float(10 ** rng.uniform(0, 6))
        tau = float(rng.uniform(0, 10))
        alpha = float(rng.uniform(0.5, 3))
        b = eigenpairs(D)
        obs = generate_observations(b, ground_truth(D), n, D, k)
        post = posterior_moments(b, PriorSpec(alpha, D), obs, tau)
        m, v = _dense(b.kappa, PriorSpec(alpha, D).variances, obs.ytilde, n, tau)
        worst = max(worst, np.abs(post.mean - m).max(), np.abs(post.variance - v).max())
    record(2, "dense vs diagonal posterior", worst <= 1e-10, f"max abs diff {worst:.1e} over 100 instances (<= 1e-10)")


def test_c3_stopping_contract():
    t = time.perf_counter()
    spec = ex.resolve_spec("figure1")
    cfg = spec.model
    details, ok = [], True
    for n in (1e3, 1e4, 1e5):
        D = cfg.dimension(n)
        b = eigenpairs(D)
        obs = generate_observations(b, ground_truth(D, cfg.truth_decay), n, D, cfg.seed)
        ens = init_ensemble(cfg.J, cfg.prior(D), cfg.seed, label=int(n), dt=cfg.dt)
        kappa = discrepancy_threshold(cfg, D, n)
        _, rep = run_until_discrepancy(b, ens, obs, kappa, cfg.k0, cfg.k_max)
        R = rep.residual_path
        k = rep.k_dp
        good = (not rep.hit_cap) and R[k] <= kappa and R[k - 1] > kappa
        ok &= good
        details.append(f"n={n:g}: k_dp={k}{' (cap)' if rep.hit_cap else ''}")
    secs = time.perf_counter() - t
    ok &= secs <= 120
    record(3, "stopping-rule contract", ok, ", ".join(details) + f", {secs:.1f}s")


def test_c4_residual_calibration():
    D, n = 100, 1e4
    b = eigenpairs(D)
    v0 = ground_truth(D)
    vals = [residual(b, generate_observations(b, v0, n, D, 0, replicate=r), v0) for r in range(10_000)]
    mean = float(np.mean(vals))
    record(4, "residual calibration", abs(mean / (D / n) - 1) <= 0.05,
           f"MC mean {mean:.5f} vs D/n = {D / n:.5f} ({100 * (mean / (D / n) - 1):+.2f}%)")


def test_c5_round_trip():
    s = ex.run_roundtrip_suite(ex.resolve_spec("roundtrip"))
    ok = s["reference_error"] <= 1e-2 and abs(s["refinement_slope"] + 2) <= 0.3
    record(5, "round trip", ok,
           f"rel sup err {s['reference_error']:.2e} at m=1024, D=64 (<= 1e-2); slope {s['refinement_slope']:.3f} (-2 +/- 0.3)")


def test_c6_contraction_trend():
    t = time.perf_counter()
    _, s = ex.run_contraction_study(ex.resolve_spec("contraction"))
    secs = time.perf_counter() - t
    ok = s["fitted_slope"] <= -0.15 and s["monotone_decrease"] and secs <= 600
    beta = 2.0
    record(6, "contraction trend", ok,
           f"slope {s['fitted_slope']:.3f} (<= -0.15) vs theory {-theoretical_rate(beta, 2, 2):.3f}; "
           f"medians {[round(x, 4) for x in s['median_err_v']]} monotone={s['monotone_decrease']}, {secs:.1f}s")


def coverage_trend_ok(c):
    """At most one adjacent decrease, of at most 5 points, and the last n not below the first by more than 5."""
    drops = [a - b for a, b in zip(c, c[1:]) if b < a]
    return len(drops) <= 1 and all(d <= 0.05 for d in drops) and c[-1] >= c[0] - 0.05


def test_c7_coverage_trend():
    t = time.perf_counter()
    spec = ex.resolve_spec("coverage", {"J": 512, "replicates": 50})
    _, s = ex.run_coverage_study(spec)
    secs = time.perf_counter() - t
    c = s["coverage_fraction_v"]
    at_1e4 = c[spec.n_list.index(1e4)]
    ok = at_1e4 >= 0.8 and coverage_trend_ok(c) and secs <= 600
    record(7, "coverage trend", ok, f"coverage over n={spec.n_list}: {c} (n=1e4 >= 0.8), {secs:.1f}s")


def test_c8_figure1(tmp_path):
    t = time.perf_counter()
    panels, s = ex.run_figure1(ex.resolve_spec("figure1", {"output_dir": tmp_path}))
    secs = time.perf_counter() - t
    coef, func = s["coef_band_area"], s["func_band_area"]
    dec = all(np.diff(coef) < 0) and all(np.diff(func) < 0)
    inside = s["truth_inside_points"][-1]
    files = len(list(tmp_path.glob("*.svg"))) == 6 and len(list(tmp_path.glob("*.csv"))) == 6
    ok = dec and inside >= 95 and files and secs <= 120
    record(8, "figure-1 reproduction", ok,
           f"coef band areas {[round(a, 3) for a in coef]}, f band areas {[round(a, 3) for a in func]}, "
           f"truth inside {inside}/100 at largest n, {secs:.1f}s")


def test_c9_determinism(tmp_path):
    ok, checked = True, []
    for study in ("contraction", "coverage", "figure1"):
        outs = []
        for jobs in (1, 8):
            out = tmp_path / f"{study}_{jobs}"
            spec = ex.resolve_spec(study, {"output_dir": out, "jobs": jobs})
            {"contraction": ex.run_contraction_study, "coverage": ex.run_coverage_study,
             "figure1": ex.run_figure1}[study](spec)
            outs.append(out)
        names = sorted(p.name for p in outs[0].glob("*.csv"))
        same = names == sorted(p.name for p in outs[1].glob("*.csv")) and all(
            filecmp.cmp(outs[0] / f, outs[1] / f, shallow=False) for f in names)
        ok &= same and bool(names)
        checked.append(f"{study}: {len(names)} CSVs {'identical' if same else 'DIFFER'}")
    record(9, "determinism (--jobs 1 vs 8)", ok, "; ".join(checked))


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_c")]
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            pass
    for number, name, passed, detail in RESULTS:
        print(f"{'PASS' if passed else 'FAIL'} criterion {number} {name}: {detail}")
