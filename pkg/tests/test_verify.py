"""Suite harness: verdict mechanics, report files, reduced-budget suite runs."""
import json
import os

import numpy as np
import pytest

from stableheat import geometry as geo
from stableheat import verify as vf
from stableheat.mc_engine import PathConfig


@pytest.fixture(scope="module")
def quick_cfg():
    return PathConfig(dt=1 / 512, max_steps=512, seed=909)


def test_report_writing_and_shape(tmp_path, law, unit_ball, quick_cfg):
    rep = vf.suite_three_g(unit_ball, law, 5000, quick_cfg)
    paths = vf.write_report(rep, str(tmp_path))
    with open(paths["report"]) as fh:
        payload = json.load(fh)
    assert payload["suite_name"] == "three-g"
    assert payload["theorem_ref"] == "Lemma 4.1"
    assert payload["verdict"] in ("pass", "fail", "inconclusive")
    lines = open(paths["cells"]).read().strip().split("\n")
    assert len(lines) == 1 + len(rep.cells)


def test_report_verdict_mechanics():
    rep = vf.SuiteReport("x", "ref", {})
    rep.mark_inconclusive("noisy cell")
    assert rep.verdict == "inconclusive"
    rep.require("works", True)
    assert rep.verdict == "inconclusive"
    rep.require("broken", False)
    assert rep.verdict == "fail"


def test_three_g_suite_ball_and_annulus(law, quick_cfg):
    for dom in (geo.ball(1.0), geo.annulus(0.5, 1.2)):
        rep = vf.suite_three_g(dom, law, 20000, quick_cfg)
        assert rep.verdict == "pass"
        assert np.isfinite(rep.statistics["sup_first"]["n"])


def test_heat_suite_zero_field(law, unit_ball, zero_drift):
    cfg = PathConfig(dt=1 / 1024, max_steps=1024, seed=909)
    rep = vf.suite_heat_two_sided(zero_drift, unit_ball, law, [0.1, 0.3, 0.6],
                                  cfg, n_paths=30000, n_x=3, n_y=3)
    assert rep.verdict == "pass"
    assert rep.statistics["ratio"]["spread"] < 50.0
    assert rep.statistics["spearman_log"] > 0.9


def test_green_suite_zero_field_with_crosscheck(law, unit_ball, zero_drift):
    cfg = PathConfig(dt=1 / 1024, max_steps=8 * 1024, seed=23)
    rep = vf.suite_green_two_sided(zero_drift, unit_ball, law, cfg, n_paths=20000,
                                   n_x=2, n_y=4, crosscheck_pairs=3)
    assert rep.verdict == "pass"
    assert rep.statistics["crosscheck_failures"] == 0


def test_factor2_suite_zero_is_exact(law, zero_drift, quick_cfg):
    rep = vf.suite_small_ball_factor2(zero_drift, law, [0.1, 0.4], quick_cfg,
                                      n_pairs=3)
    assert rep.verdict == "pass"
    assert all(abs(c["ratio"] - 1.0) < 1e-10 for c in rep.cells)


def test_factor2_suite_bump_has_positive_radius(law, bump_drift, quick_cfg):
    rep = vf.suite_small_ball_factor2(bump_drift, law, [0.1, 0.2, 0.4], quick_cfg,
                                      n_pairs=4, n_chain=4096)
    assert rep.verdict == "pass"
    assert rep.statistics["r_star"] > 0
    assert rep.statistics["fitted_c2"] > 0


def test_factor2_radius_shrinks_with_amplitude(law, bump_drift, quick_cfg):
    from stableheat.kato import scale_amplitude

    grid = [0.05, 0.1, 0.2, 0.4]
    weak = vf.suite_small_ball_factor2(bump_drift, law, grid, quick_cfg, n_pairs=4)
    strong = vf.suite_small_ball_factor2(scale_amplitude(bump_drift, 8.0), law,
                                         grid, quick_cfg, n_pairs=4)
    assert strong.statistics["r_star"] <= weak.statistics["r_star"]


def test_splitting_suite(law, zero_drift, bump_drift):
    cfg = PathConfig(dt=1 / 1024, max_steps=8 * 1024, seed=41)
    for b in (zero_drift, bump_drift):
        rep = vf.suite_splitting_diagnostics(b, law, cfg, t=0.4, n_paths=20000)
        assert rep.verdict == "pass"
        assert rep.statistics["slack_factor"] >= 1.0


def test_splitting_geometry_guard(law, zero_drift):
    # separated-subset precondition is enforced by construction
    import stableheat.verify as v

    cfg = PathConfig(dt=1 / 256, max_steps=256, seed=1)
    # suite builds its own valid geometry; direct misuse of the engine with
    # overlapping windows is rejected by the jump-count precondition
    from stableheat import mc_engine as mc

    with pytest.raises(ValueError):
        mc.levy_jump_count(zero_drift, law, geo.ball(1.0),
                           geo.ball(1.0, center=[1.2, 0.0]), 0.5, np.zeros(2),
                           cfg, 10)


def test_bhp_suite_scalar_invariance_of_cross_ratio(law, zero_drift, unit_ball):
    # two proportional boundary data give cross-ratios collapsing to one
    from stableheat import mc_engine as mc

    cfg = PathConfig(dt=0.3**1.5 / 256, max_steps=4096, seed=31)
    zb = np.array([1.0, 0.0])

    def cap_delta(pts):
        pts = np.atleast_2d(pts)
        return np.minimum(unit_ball.delta(pts),
                          np.maximum(0.0, 0.3 - np.linalg.norm(pts - zb, axis=-1)))

    u_dom = geo.Domain("intersection", 2, ("ball", (1.0, 0.0), 0.3), 0.6, zb,
                       None, cap_delta, unit_ball._boundary_fn)

    def f(w):
        return (np.atleast_2d(w)[:, 0] < -0.2).astype(float)

    x = zb - np.array([0.06, 0.0])
    y = zb - np.array([0.02, 0.0])
    ux = mc.harmonic_value(zero_drift, law, u_dom, x, f, cfg, 20000)
    uy = mc.harmonic_value(zero_drift, law, u_dom, y, f, cfg, 20000, purpose=2)
    u2x = mc.harmonic_value(zero_drift, law, u_dom, x,
                            lambda w: 3.0 * f(w), cfg, 20000, purpose=3)
    u2y = mc.harmonic_value(zero_drift, law, u_dom, y,
                            lambda w: 3.0 * f(w), cfg, 20000, purpose=4)
    cross = (ux.value * u2y.value) / (uy.value * u2x.value)
    rel = np.sqrt(sum((e.stderr / e.value) ** 2 for e in (ux, uy, u2x, u2y)))
    assert abs(cross - 1.0) < 3 * rel


def test_bhp_suite_runs_ball(law, zero_drift, unit_ball):
    cfg = PathConfig(dt=0.3**1.5 / 256, max_steps=8192, seed=31)
    rep = vf.suite_bhp(zero_drift, unit_ball, law, [1.0, 0.0], 0.3, cfg,
                       n_paths=6000)
    assert rep.verdict in ("pass", "inconclusive")
    if rep.verdict == "pass":
        assert all(np.isfinite(v) for v in rep.statistics["fitted_c"].values())


def test_scaling_suite_identity_lambda_one(law, bump_drift, unit_ball):
    cfg = PathConfig(dt=1 / 512, max_steps=512, seed=191)
    rep = vf.suite_scaling(bump_drift, unit_ball, law, [1.0], cfg, n_paths=15000,
                           t_grid=(0.2, 0.4), n_x=2, n_y=2, check_green=False)
    assert rep.verdict == "pass"
