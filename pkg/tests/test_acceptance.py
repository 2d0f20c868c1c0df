"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the live lines.
Budgets are tuned to stay well inside each criterion's runtime ceiling.
"""
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

from stableheat import cli, duhamel as du, geometry as geo, kato
from stableheat import mc_engine as mc
from stableheat import stable_core as sc
from stableheat import verify as vf
from stableheat._streams import stream
from stableheat.mc_engine import PathConfig

SEED = 20240801


def _line(num, name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    print(f"ACCEPT-{num:02d} {name}: {tag} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


@pytest.fixture(scope="module")
def law():
    return sc.make_law(1.5, 2)


@pytest.fixture(scope="module")
def unit_ball():
    return geo.ball(1.0)


@pytest.fixture(scope="module")
def fields():
    return {
        "zero": kato.parse_drift("zero", 2),
        "const": kato.parse_drift("const:0.3,0", 2),
        "bump": kato.parse_drift("bump:0,0;0.3;0.5", 2),
        "invpow": kato.parse_drift("invpow:0.25;1.0", 2),
    }


def test_accept_01_free_kernel_correctness(law):
    t0 = time.time()
    ok_norm = law.normalization_defect() <= 1e-3
    rho = np.linspace(1.0, 4.0, 13)
    routes = np.max(np.abs(
        sc.profile_fourier(1.5, 2, rho) / sc.profile_subordination(1.5, 2, rho) - 1.0))
    ok_routes = routes <= 1e-6
    worst_fd = 0.0
    h = 1e-5
    for r in np.geomspace(0.1, 5.0, 12):
        g = sc.grad_density(law, 1.0, np.array([r, 0.0]), np.zeros(2))[0]
        fd = (sc.density(law, 1.0, np.array([r + h, 0.0]), np.zeros(2))
              - sc.density(law, 1.0, np.array([r - h, 0.0]), np.zeros(2))) / (2 * h)
        worst_fd = max(worst_fd, abs(g / fd - 1.0))
    ok_grad = worst_fd <= 1e-4
    ax = np.linspace(-16.0, 16.0, 401)
    hs = ax[1] - ax[0]
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    grid = np.stack([X.ravel(), Y.ravel()], -1)
    worst_ck = 0.0
    for (tt, ss, dist) in ((0.5, 0.5, 1.0), (0.3, 0.7, 0.0), (0.2, 0.2, 2.0)):
        x = np.zeros(2)
        y = np.array([dist, 0.0])
        conv = np.sum(sc.density(law, tt, x[None, :], grid)
                      * sc.density(law, ss, grid, y[None, :])) * hs**2
        worst_ck = max(worst_ck, abs(conv / float(sc.density(law, tt + ss, x, y)) - 1.0))
    ok_ck = worst_ck <= 1e-2
    _line(1, "free-kernel-correctness", ok_norm and ok_routes and ok_grad and ok_ck,
          f"norm_defect={law.normalization_defect():.1e} routes={routes:.1e} "
          f"gradFD={worst_fd:.1e} CK={worst_ck:.1e} [{time.time()-t0:.0f}s]")


def test_accept_02_constant_drift_exactness(law, fields):
    t0 = time.time()
    b = fields["const"]
    b0 = np.array([0.3, 0.0])
    rng = stream(SEED, 201)
    c4, _ = du.fit_c4(b, law, (0.25,), rng)
    ok_series = True
    detail = []
    for x, y in ((np.zeros(2), np.array([0.3, 0.2])),
                 (np.array([0.5, 0.0]), np.array([-0.7, 0.4])),
                 (np.zeros(2), np.zeros(2))):
        fk = du.free_kernel(b, law, 0.25, x, y, rng, fitted_c4=c4,
                            cloud_size=16384, n_space=96)
        exact = float(sc.density(law, 0.25, x + 0.25 * b0, y))
        err = abs(fk.value - exact)
        tol = max(3 * fk.stderr + fk.truncation_bound, 1e-3 * exact)
        ok_series &= err <= tol
        detail.append(f"{err/exact:.1e}")
    t = 1.0
    cfg = PathConfig(dt=t / 64, max_steps=64, seed=SEED)
    run = mc._run_paths(law, b, None, np.zeros(2), 100000, cfg, 202,
                        snapshot_times=[t])
    _, xs = run["snaps"][64]
    ref = sc.sample_increment(law, t, stream(SEED, 203), size=100000) + b0 * t
    p_values = [ks_2samp(xs[:, i], ref[:, i]).pvalue for i in (0, 1)]
    ok_ks = min(p_values) > 0.01
    _line(2, "constant-drift-exactness", ok_series and ok_ks,
          f"series_rel={','.join(detail)} KS_p={min(p_values):.3f} [{time.time()-t0:.0f}s]")


def test_accept_03_series_control(law, fields):
    t0 = time.time()
    rng = stream(SEED, 301)
    all_ok = True
    details = []
    for name in ("const", "bump", "invpow"):
        b = fields[name]
        c4, _ = du.fit_c4(b, law, (0.1, 0.25), rng)
        horizon = du.series_horizon(b, law, c4)
        t = min(horizon, 0.25)
        nb = du._cached_nb(b, t, law.alpha)
        # envelope includes the probe pairs' own first-order ratios
        probes = []
        for _ in range(4):
            x = b.center + rng.standard_normal(2) * 0.4
            y = x + sc.sample_increment(law, t, rng)
            probes.append((x, y))
        for x, y in probes:
            eng = du.SeriesEngine(b, law, t, x, rng, cloud_size=4096, n_space=96)
            p0 = eng.term(0, y).value
            t1 = eng.term(1, y)
            c4 = max(c4, (abs(t1.value) + t1.stderr) / (p0 * nb))
        env = c4 * nb
        field_ok = env < 1.0
        for x, y in probes:
            eng = du.SeriesEngine(b, law, t, x, rng, cloud_size=8192, n_space=96)
            p0 = eng.term(0, y).value
            prev = eng.term(1, y)
            for k in range(2, 6):
                tk = eng.term(k, y)
                ratio_ok = (abs(tk.value) - 3 * tk.stderr
                            <= env * (abs(prev.value) + 3 * prev.stderr))
                envelope_ok = abs(tk.value) - 3 * tk.stderr <= env**k * p0
                field_ok &= ratio_ok and envelope_ok
                prev = tk
        mass, se = du.conservativeness_check(b, law, t, b.center, rng,
                                             n_outer=160, fitted_c4=c4)
        mass_ok = abs(mass - 1.0) <= max(3 * se, 5e-3)
        field_ok &= mass_ok
        details.append(f"{name}: env={env:.2f} mass={mass:.4f}+-{se:.4f}")
        all_ok &= field_ok
    _line(3, "series-control", all_ok, "; ".join(details) + f" [{time.time()-t0:.0f}s]")


def test_accept_04_kato_scaling(law, fields):
    t0 = time.time()
    b = fields["bump"]
    ok = True
    worst = 0.0
    for lam in (0.5, 2.0, 4.0):
        lhs = kato.kato_modulus(kato.scaled_drift(b, lam, 1.5), 1.0, 1.5,
                                probes=300).value
        rhs = kato.kato_modulus(b, 1.0 / lam, 1.5, probes=300).value
        rel = abs(lhs / rhs - 1.0)
        worst = max(worst, rel)
        ok &= rel <= 0.02
    _line(4, "kato-scaling", ok, f"worst_rel={worst:.4f} [{time.time()-t0:.0f}s]")


def test_accept_05_three_g_stability(law, unit_ball):
    t0 = time.time()
    cfg = PathConfig(dt=1e-3, max_steps=10, seed=SEED)
    ok = True
    details = []
    for dom in (unit_ball, geo.annulus(0.5, 1.2)):
        rep = vf.suite_three_g(dom, law, 100000, cfg)
        ok &= rep.verdict == "pass"
        details.append(f"{dom.kind}: sup={rep.statistics['sup_first']['2n']:.2f} "
                       f"growth={rep.statistics['sup_first']['growth']:+.2%}")
    _line(5, "three-g-stability", ok, "; ".join(details) + f" [{time.time()-t0:.0f}s]")


def test_accept_06_factor2_small_ball(law, fields):
    t0 = time.time()
    cfg = PathConfig(dt=1e-3, max_steps=10, seed=SEED)
    grid = (0.05, 0.1, 0.2, 0.4)
    rep0 = vf.suite_small_ball_factor2(fields["zero"], law, grid, cfg, n_pairs=4)
    ok = rep0.verdict == "pass"
    details = ["zero: exact"]
    for name, b in (("const", fields["const"]), ("bump", fields["bump"]),
                    ("invpow*0.3", kato.scale_amplitude(fields["invpow"], 0.3))):
        rep = vf.suite_small_ball_factor2(b, law, grid, cfg, n_pairs=4,
                                          n_chain=16384)
        ok &= rep.verdict == "pass" and rep.statistics["r_star"] > 0
        details.append(f"{name}: r*={rep.statistics['r_star']}")
    _line(6, "factor2-small-ball", ok, "; ".join(details) + f" [{time.time()-t0:.0f}s]")


def test_accept_07_heat_two_sided(law, unit_ball, fields):
    t0 = time.time()
    t_grid = [0.05, 0.1, 0.2, 0.4, 0.7, 1.0]
    cfg = PathConfig(dt=1.0 / 2048, max_steps=2048, seed=SEED, workers=2)
    rep0 = vf.suite_heat_two_sided(fields["zero"], unit_ball, law, t_grid, cfg,
                                   n_paths=200000)
    ok = rep0.verdict == "pass"
    rep1 = vf.suite_heat_two_sided(fields["bump"], unit_ball, law, t_grid, cfg,
                                   n_paths=200000)
    ok &= rep1.verdict == "pass"
    c0 = rep0.statistics["ratio"]["fitted_constant"]
    c1 = rep1.statistics["ratio"]["fitted_constant"]
    stable = max(c0, c1) / min(c0, c1) <= 2.0
    ok &= stable
    _line(7, "heat-two-sided", ok,
          f"b0: spread={rep0.statistics['ratio']['spread']:.1f} "
          f"rho={rep0.statistics['spearman_log']:.3f}; "
          f"bump: spread={rep1.statistics['ratio']['spread']:.1f} "
          f"rho={rep1.statistics['spearman_log']:.3f}; c1 ratio={max(c0,c1)/min(c0,c1):.2f} "
          f"[{time.time()-t0:.0f}s]")


def test_accept_08_green_two_sided(law, unit_ball, fields):
    t0 = time.time()
    cfg = PathConfig(dt=1.0 / 1024, max_steps=8 * 1024, seed=SEED, workers=2)
    rep_ball = vf.suite_green_two_sided(fields["zero"], unit_ball, law, cfg,
                                        n_paths=50000, crosscheck_pairs=20)
    ok = rep_ball.verdict == "pass"
    rep_bump = vf.suite_green_two_sided(fields["bump"], unit_ball, law, cfg,
                                        n_paths=50000)
    ok &= rep_bump.verdict == "pass"
    ring = geo.annulus(0.5, 1.2)
    cfg_r = PathConfig(dt=1.0 / 1024, max_steps=8 * 1024, seed=SEED, workers=2)
    rep_ring = vf.suite_green_two_sided(fields["bump"], ring, law, cfg_r,
                                        n_paths=50000)
    ok &= rep_ring.verdict == "pass"
    _line(8, "green-two-sided", ok,
          f"ball spread={rep_ball.statistics['ratio']['spread']:.1f} "
          f"xchk_fail={rep_ball.statistics['crosscheck_failures']}; "
          f"bump spread={rep_bump.statistics['ratio']['spread']:.1f}; "
          f"annulus spread={rep_ring.statistics['ratio']['spread']:.1f} "
          f"[{time.time()-t0:.0f}s]")


def test_accept_09_scaling_identity(law, unit_ball, fields):
    t0 = time.time()
    cfg = PathConfig(dt=1.0 / 1024, max_steps=8 * 1024, seed=SEED, workers=2)
    rep = vf.suite_scaling(fields["bump"], unit_ball, law, (0.5, 2.0), cfg,
                           n_paths=60000, t_grid=(0.15, 0.3, 0.6))
    _line(9, "scaling-identity", rep.verdict == "pass",
          f"worst_z={rep.statistics['worst_z']:.2f} n_fail={rep.statistics['n_fail']} "
          f"[{time.time()-t0:.0f}s]")


def test_accept_10_levy_system(law, fields):
    t0 = time.time()
    a = geo.ball(1.0)
    bset = geo.ball(1.0, center=[4.0, 0.0])
    cfg = PathConfig(dt=1 / 256, max_steps=256, seed=SEED)
    ok = True
    details = []
    for name in ("zero", "bump"):
        cnt, integ, se, flags = mc.levy_jump_count(fields[name], law, a, bset,
                                                   1.0, np.zeros(2), cfg, 60000)
        z = (cnt - integ) / se
        ok &= abs(z) <= 3.0 and not flags
        details.append(f"{name}: z={z:+.2f}")
    _line(10, "levy-system", ok, "; ".join(details) + f" [{time.time()-t0:.0f}s]")


def test_accept_11_large_time(law, unit_ball, fields):
    t0 = time.time()
    cfg = PathConfig(dt=1 / 512, max_steps=6 * 512, seed=SEED, workers=2)
    rep0 = vf.suite_large_time(fields["zero"], unit_ball, law, cfg,
                               n_paths=200000, spread_cap=10.0)
    ok = rep0.verdict == "pass"
    rep1 = vf.suite_large_time(fields["bump"], unit_ball, law, cfg,
                               n_paths=200000, spread_cap=20.0)
    ok &= rep1.verdict == "pass"
    # eigenvalue structure: domain monotonicity and the dilation exponent
    probes = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, -0.4]])
    tg = np.linspace(0.25, 4.0, 16)
    lam1 = mc.eigen_estimate(fields["zero"], law, unit_ball, probes, tg, cfg, 40000)
    lam2 = mc.eigen_estimate(fields["zero"], law, geo.ball(1.2), 1.2 * probes,
                             tg * 1.2**1.5, cfg, 40000, purpose=17)
    mono = lam1.ci_low > lam2.ci_high
    pred = lam1.value / 1.2**1.5
    half = (lam2.ci_high - lam2.ci_low) / 2 + (lam1.ci_high - lam1.ci_low) / 2
    scal = abs(pred - lam2.value) <= max(half, 0.05 * lam2.value)
    ok &= mono and scal
    sp0 = rep0.statistics["spreads"]
    sp1 = rep1.statistics["spreads"]
    _line(11, "large-time", ok,
          f"b0 spreads={[f'{v:.2f}' for v in sp0.values()]} "
          f"bump spreads={[f'{v:.2f}' for v in sp1.values()]} "
          f"mono={mono} scaling={scal} [{time.time()-t0:.0f}s]")


def test_accept_12_bhp(law, unit_ball, fields):
    t0 = time.time()
    b = fields["bump"]
    ok = True
    details = []
    ring = geo.annulus(0.5, 1.2)
    spots = [
        (unit_ball, np.array([1.0, 0.0])),
        (unit_ball, np.array([0.0, -1.0])),
        (ring, np.array([1.2, 0.0])),
    ]
    for di, (dom, zb) in enumerate(spots):
        r = 0.3
        cfg = PathConfig(dt=r**1.5 / 512, max_steps=60000, seed=SEED + di,
                         workers=2)
        rep = vf.suite_bhp(b, dom, law, zb, r, cfg, n_paths=15000)
        ok &= rep.verdict == "pass"
        if rep.verdict == "pass":
            cs = rep.statistics["fitted_c"]
            details.append(f"{dom.kind}@{zb.tolist()}: c={cs['family_far']:.2f}")
        else:
            details.append(f"{dom.kind}@{zb.tolist()}: {rep.verdict}")
    _line(12, "bhp", ok, "; ".join(details) + f" [{time.time()-t0:.0f}s]")


def test_accept_13_determinism(law, tmp_path):
    t0 = time.time()
    outs = []
    for sub, workers in (("w1", 1), ("w2", 2)):
        code = cli.main([
            "--set", f"out={tmp_path / sub}", "--set", f"mc.workers={workers}",
            "--set", "mc.paths=8000", "--set", "grid.t=0.2,0.4",
            "--set", "mc.horizon=0.4", "--set", f"seed={SEED}",
            "verify", "heat-two-sided",
        ])
        assert code in (0, 2)
        run_dir = next((tmp_path / sub / "heat-two-sided").iterdir())
        outs.append((run_dir / "cells.csv").read_bytes())
    _line(13, "determinism", outs[0] == outs[1],
          f"bytes={len(outs[0])} identical [{time.time()-t0:.0f}s]")
