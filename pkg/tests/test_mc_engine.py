"""Killed-path engine: exit statistics, estimators, determinism."""
import numpy as np
import pytest
from scipy.stats import ks_2samp

from stableheat import geometry as geo
from stableheat import mc_engine as mc
from stableheat._streams import stream
from stableheat.stable_core import sample_increment


def _taus(records):
    return np.array([r.tau for r in records]), np.array(
        [r.alive_at_horizon for r in records])


class TestStep:
    def test_zero_drift_pure_stable_statistics(self, law, zero_drift):
        rng = stream(1, 50)
        out = mc.step(zero_drift, law, np.zeros((50000, 2)), 0.5, rng)
        ref = sample_increment(law, 0.5, stream(2, 50), size=50000)
        assert ks_2samp(out[:, 0], ref[:, 0]).pvalue > 0.01

    def test_constant_drift_translation_ks(self, law, const_drift):
        t = 1.0
        cfg = mc.PathConfig(dt=t / 64, max_steps=64, seed=202)
        run = mc._run_paths(law, const_drift, None, np.zeros(2), 50000, cfg, 11,
                            snapshot_times=[t])
        _, xs = run["snaps"][64]
        ref = sample_increment(law, t, stream(55, 9), size=50000) + np.array([0.3, 0.0])
        for axis in (0, 1):
            assert ks_2samp(xs[:, axis], ref[:, axis]).pvalue > 0.01

    def test_dt_halving_weak_consistency(self, law, bump_drift):
        # a bounded functional at t=1 moves by less than 3 sigma when dt halves
        t = 1.0
        vals = []
        errs = []
        for steps in (64, 128):
            cfg = mc.PathConfig(dt=t / steps, max_steps=steps, seed=77)
            run = mc._run_paths(law, bump_drift, None, np.zeros(2), 40000, cfg, 12,
                                snapshot_times=[t])
            _, xs = run["snaps"][steps]
            f = np.tanh(np.linalg.norm(xs, axis=1))
            vals.append(f.mean())
            errs.append(f.std() / np.sqrt(len(f)))
        assert abs(vals[0] - vals[1]) < 3 * float(np.hypot(*errs))

    def test_rejects_nonpositive_dt(self, law, zero_drift):
        with pytest.raises(ValueError):
            mc.step(zero_drift, law, np.zeros(2), 0.0, stream(1, 2))


class TestSimulateKilled:
    def test_start_outside_rejected(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1e-3, max_steps=1000, seed=1)
        with pytest.raises(ValueError):
            mc.simulate_killed(zero_drift, law, unit_ball, np.array([2.0, 0.0]),
                               1.0, cfg)

    def test_survival_decreasing_from_near_one(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=512, seed=3)
        tg = np.array([0.01, 0.05, 0.2, 0.8])
        surv = mc.survival_curve(zero_drift, law, unit_ball, np.zeros(2), tg,
                                 cfg, 20000)
        assert surv[0] > 0.97
        assert np.all(np.diff(surv) < 0)

    def test_mean_exit_time_matches_closed_form(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 2048, max_steps=6 * 2048, seed=101)
        recs = mc.simulate_killed(zero_drift, law, unit_ball, np.zeros(2), 6.0,
                                  cfg, n_paths=20000)
        taus, alive = _taus(recs)
        est = taus[~alive].mean()
        se = taus[~alive].std() / np.sqrt((~alive).sum())
        exact = float(geo.ball_mean_exit_time(unit_ball, law, np.zeros(2)))
        assert abs(est - exact) < 3 * se + 0.01 * exact  # lattice-killing bias

    def test_exit_points_outside_and_jump_classified(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 256, max_steps=2048, seed=5)
        recs = mc.simulate_killed(zero_drift, law, unit_ball, np.zeros(2), 8.0,
                                  cfg, n_paths=2000)
        for r in recs:
            if not r.alive_at_horizon:
                assert unit_ball.delta(r.exit_point) == 0.0
                assert r.tau <= 8.0
        # jumps dominate exits below the diffusive index two
        jump_frac = np.mean([r.exited_by_jump for r in recs if not r.alive_at_horizon])
        assert jump_frac > 0.95


class TestKde:
    def test_mass_matches_survival(self, law, zero_drift, unit_ball):
        t = 0.25
        cfg = mc.PathConfig(dt=t / 512, max_steps=512, seed=303)
        rng = stream(6, 60)
        ys = geo.sample_interior(unit_ball, 800, rng)
        ests = mc.kernel_kde(zero_drift, law, unit_ball, t, np.array([0.1, 0.0]),
                             ys, cfg, 40000)
        vals = np.array([e.value for e in ests])
        area = np.pi
        mass = vals.mean() * area
        surv = mc.survival_curve(zero_drift, law, unit_ball, np.array([0.1, 0.0]),
                                 [t], cfg, 40000, purpose=61)[0]
        assert mass == pytest.approx(surv, rel=0.04)

    def test_cross_estimator_agreement(self, law, zero_drift, bump_drift, unit_ball):
        t = 0.25
        cfg = mc.PathConfig(dt=t / 512, max_steps=512, seed=303)
        ys = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, 0.5], [-0.4, -0.2], [0.6, 0.1]])
        for b in (zero_drift, bump_drift):
            kde = mc.kernel_kde(b, law, unit_ball, t, np.array([0.1, 0.0]), ys,
                                cfg, 60000)
            hyb = mc.kernel_hybrid(b, law, unit_ball, t, np.array([0.1, 0.0]), ys,
                                   cfg, 60000)
            for k, h in zip(kde, hyb):
                se = np.hypot(k.stderr, h.stderr) + 0.02 * h.value
                assert abs(k.value - h.value) < 3 * se

    def test_few_survivors_flagged(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 128, max_steps=6 * 128, seed=9)
        ests = mc.kernel_kde(zero_drift, law, unit_ball, 6.0, np.zeros(2),
                             np.zeros((1, 2)), cfg, 300)
        assert "unreliable-few-survivors" in ests[0].flags


class TestHybrid:
    def test_deep_interior_small_t_dominated_by_free_term(self, law, zero_drift):
        big = geo.ball(4.0)
        t = 0.02
        cfg = mc.PathConfig(dt=t / 128, max_steps=128, seed=11)
        est = mc.kernel_hybrid(zero_drift, law, big, t, np.zeros(2),
                               np.array([[0.2, 0.0]]), cfg, 5000)[0]
        from stableheat.stable_core import density

        free = float(density(law, t, np.zeros(2), np.array([0.2, 0.0])))
        assert est.value == pytest.approx(free, rel=1e-3)

    def test_free_envelope_near_boundary(self, law, bump_drift, unit_ball):
        t = 0.25
        cfg = mc.PathConfig(dt=t / 512, max_steps=512, seed=13)
        y = np.array([[0.97, 0.0]])
        est = mc.kernel_hybrid(bump_drift, law, unit_ball, t, np.zeros(2), y,
                               cfg, 60000)[0]
        prof = min(t ** (-2 / 1.5), t * 0.97 ** (-3.5))
        assert est.value > 0
        assert est.value < 5.0 * prof  # fitted-envelope cap


class TestGreen:
    def test_matches_exact_ball_green(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 1024, max_steps=8 * 1024, seed=23)
        x0 = np.array([0.1, 0.0])
        rng = stream(8, 70)
        ys = geo.sample_interior(unit_ball, 8, rng, delta_range=(0.2, np.inf))
        ys = ys[np.linalg.norm(ys - x0, axis=1) > 0.25]
        ests, refine, _ = mc.green_occupation(zero_drift, law, unit_ball, x0, ys,
                                              cfg, 60000)
        for yi, y in enumerate(ys):
            exact = float(geo.green_ball_exact(unit_ball, law, x0, y))
            tol = 3 * ests[yi].stderr + refine[yi] + 0.02 * exact
            assert abs(ests[yi].value - exact) < tol

    def test_occupation_integral_is_mean_exit_time(self, law, zero_drift, unit_ball):
        # int G(x0, y) dy over a y-lattice reproduces the expected exit time
        cfg = mc.PathConfig(dt=1 / 1024, max_steps=8 * 1024, seed=29)
        x0 = np.zeros(2)
        ax = np.linspace(-0.95, 0.95, 13)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], -1)
        pts = pts[unit_ball.contains(pts)]
        h = ax[1] - ax[0]
        ests, _, _ = mc.green_occupation(zero_drift, law, unit_ball, x0, pts,
                                         cfg, 40000)
        integral = sum(e.value for e in ests) * h * h
        exact = float(geo.ball_mean_exit_time(unit_ball, law, x0))
        # lattice misses the boundary strip where the Green function is small
        assert integral == pytest.approx(exact, rel=0.08)

    def test_domain_monotonicity(self, law, zero_drift):
        ring = geo.annulus(0.3, 1.0)
        balld = geo.ball(1.0)
        cfg = mc.PathConfig(dt=1 / 1024, max_steps=8 * 1024, seed=31)
        x0 = np.array([0.65, 0.0])
        ys = np.array([[0.0, 0.65], [-0.6, 0.0], [0.4, 0.4]])
        small, _, _ = mc.green_occupation(zero_drift, law, ring, x0, ys, cfg, 40000)
        large, _, _ = mc.green_occupation(zero_drift, law, balld, x0, ys, cfg, 40000)
        for s, l in zip(small, large):
            assert s.value <= l.value + 3 * np.hypot(s.stderr, l.stderr)


class TestHarmonic:
    def test_constant_data_gives_one(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=16 * 512, seed=37)
        est = mc.harmonic_value(zero_drift, law, unit_ball, np.zeros(2),
                                lambda w: np.ones(len(w)), cfg, 4000)
        assert est.value == 1.0
        assert est.stderr == 0.0

    def test_linearity(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=16 * 512, seed=41)

        def f(w):
            return (np.atleast_2d(w)[:, 0] > 1.0).astype(float)

        def g(w):
            return (np.atleast_2d(w)[:, 1] > 0.5).astype(float)

        x0 = np.array([0.2, 0.1])
        hf = mc.harmonic_value(zero_drift, law, unit_ball, x0, f, cfg, 20000)
        hg = mc.harmonic_value(zero_drift, law, unit_ball, x0, g, cfg, 20000, purpose=5)
        comb = mc.harmonic_value(
            zero_drift, law, unit_ball, x0,
            lambda w: 2.0 * f(w) + 0.5 * g(w), cfg, 20000, purpose=6)
        se = np.sqrt(4 * hf.stderr**2 + 0.25 * hg.stderr**2 + comb.stderr**2)
        assert abs(comb.value - (2 * hf.value + 0.5 * hg.value)) < 3 * se

    def test_monotone_toward_supporting_halfspace(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=16 * 512, seed=43)

        def f(w):
            return (np.atleast_2d(w)[:, 0] > 1.0).astype(float)

        vals = []
        for i, x0 in enumerate((np.array([-0.5, 0.0]), np.zeros(2), np.array([0.5, 0.0]))):
            est = mc.harmonic_value(zero_drift, law, unit_ball, x0, f, cfg, 30000,
                                    purpose=10 + i)
            assert 0.0 < est.value < 1.0
            vals.append((est.value, est.stderr))
        assert vals[0][0] < vals[1][0] < vals[2][0]


class TestLevy:
    def test_identity_zero_and_bump(self, law, zero_drift, bump_drift):
        a = geo.ball(1.0)
        bset = geo.ball(1.0, center=[4.0, 0.0])
        cfg = mc.PathConfig(dt=1 / 256, max_steps=256, seed=505)
        for b in (zero_drift, bump_drift):
            cnt, integ, se, flags = mc.levy_jump_count(b, law, a, bset, 1.0,
                                                       np.zeros(2), cfg, 40000)
            assert abs(cnt - integ) < 3 * se
            assert flags == ()

    def test_far_separation_decay(self, law, zero_drift):
        cfg = mc.PathConfig(dt=1 / 128, max_steps=128, seed=7)
        a = geo.ball(1.0)
        near = geo.ball(1.0, center=[4.0, 0.0])
        far = geo.ball(1.0, center=[12.0, 0.0])
        c1, i1, _, _ = mc.levy_jump_count(zero_drift, law, a, near, 1.0,
                                          np.zeros(2), cfg, 30000)
        c2, i2, _, _ = mc.levy_jump_count(zero_drift, law, a, far, 1.0,
                                          np.zeros(2), cfg, 30000, purpose=9)
        # both sides fall off like the intensity tail (distance ratio ^ -(d+a))
        assert i2 < i1 * (12.0 / 4.0) ** (-3.5) * 3.0
        assert c2 <= c1

    def test_disjointness_required(self, law, zero_drift):
        cfg = mc.PathConfig(dt=1 / 64, max_steps=64, seed=1)
        with pytest.raises(ValueError):
            mc.levy_jump_count(zero_drift, law, geo.ball(1.0),
                               geo.ball(1.0, center=[1.5, 0.0]), 1.0,
                               np.zeros(2), cfg, 100)


class TestEigen:
    def test_domain_monotonicity_and_scaling(self, law, zero_drift):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=6 * 512, seed=404)
        probes = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, -0.4]])
        tg = np.linspace(0.25, 4.0, 16)
        lam1 = mc.eigen_estimate(zero_drift, law, geo.ball(1.0), probes, tg, cfg, 30000)
        lam2 = mc.eigen_estimate(zero_drift, law, geo.ball(1.2), 1.2 * probes,
                                 tg * 1.2**1.5, cfg, 30000, purpose=17)
        assert lam1.ci_low > lam2.ci_high  # strict domain monotonicity
        pred = lam1.value / 1.2**1.5
        half_width = (lam2.ci_high - lam2.ci_low) / 2 + (lam1.ci_high - lam1.ci_low) / 2
        assert abs(pred - lam2.value) < max(half_width, 0.05 * lam2.value)

    def test_slope_probe_independent(self, law, zero_drift):
        cfg = mc.PathConfig(dt=1 / 512, max_steps=6 * 512, seed=404)
        probes = np.array([[0.0, 0.0], [0.3, 0.0], [0.0, -0.4]])
        tg = np.linspace(0.25, 4.0, 16)
        lam = mc.eigen_estimate(zero_drift, law, geo.ball(1.0), probes, tg, cfg, 30000)
        per = np.array(lam.per_probe)
        assert per.max() - per.min() < 0.12 * lam.value

    def test_no_window_raises(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 64, max_steps=640, seed=2)
        with pytest.raises(RuntimeError):
            mc.eigen_estimate(zero_drift, law, unit_ball, np.zeros((1, 2)),
                              np.linspace(8.0, 10.0, 6), cfg, 200)


class TestInvariantsAndProperties:
    def test_exit_time_boundary_decay(self, law, zero_drift, unit_ball):
        # survival beyond a quarter unit of time decays like the boundary factor
        cfg = mc.PathConfig(dt=1 / 1024, max_steps=1024, seed=47)
        deltas = np.geomspace(0.01, 0.6, 10)
        probs = []
        for i, dl in enumerate(deltas):
            x0 = np.array([1.0 - dl, 0.0])
            surv = mc.survival_curve(zero_drift, law, unit_ball, x0, [0.25], cfg,
                                     8000, purpose=50 + i)[0]
            probs.append(max(surv, 1e-4))
        fitted_c = np.max(np.array(probs) / np.minimum(1.0, deltas**0.75))
        refit = np.max((np.array(probs) / np.minimum(1.0, deltas**0.75))[::2])
        assert np.isfinite(fitted_c)
        assert fitted_c < 3.0
        assert fitted_c < 2.0 * refit

    def test_near_diagonal_interior_lower_bound(self, law, zero_drift):
        # kernel at ball centers admits a scale-invariant floor c * t^{-d/a}
        # over the stable window; the fitted c must agree across radii
        fitted = []
        for i, r in enumerate((0.5, 1.0)):
            dom = geo.ball(r)
            ts = np.array([0.5, 1.0, 1.5]) * r**1.5
            cfg = mc.PathConfig(dt=ts[-1] / 1024, max_steps=1024, seed=53 + i)
            ests = mc.kernel_kde_grid(zero_drift, law, dom, list(ts), np.zeros(2),
                                      np.zeros((1, 2)), cfg, 30000, purpose=i)
            floors = [ests[float(t)][0].value * t ** (2 / 1.5) for t in ts]
            assert min(floors) > 0
            fitted.append(min(floors))
        assert max(fitted) / min(fitted) < 1.6  # same constant at both scales

    def test_large_time_exponential_decay(self, law, zero_drift, unit_ball):
        cfg = mc.PathConfig(dt=1 / 256, max_steps=5 * 256, seed=59)
        ts = [1.0, 2.0, 3.0, 4.0, 5.0]
        ests = mc.kernel_kde_grid(zero_drift, law, unit_ball, ts, np.zeros(2),
                                  np.zeros((1, 2)), cfg, 200000)
        vals = np.array([ests[t][0].value for t in ts])
        ok = vals > 0
        slope = np.polyfit(np.array(ts)[ok], np.log(vals[ok]), 1)[0]
        assert slope < -1.0  # genuine exponential decay rate

    def test_determinism_across_worker_counts(self, law, bump_drift, unit_ball):
        t = 0.25
        ys = np.array([[0.0, 0.0], [0.3, 0.2]])
        outs = []
        for workers in (1, 2):
            cfg = mc.PathConfig(dt=t / 256, max_steps=256, seed=4242, workers=workers)
            ests = mc.kernel_kde(bump_drift, law, unit_ball, t, np.zeros(2), ys,
                                 cfg, 20000)
            outs.append([(e.value, e.stderr) for e in ests])
        assert outs[0] == outs[1]

    def test_antithetic_determinism_and_agreement(self, law, zero_drift, unit_ball):
        t = 0.25
        cfg_a = mc.PathConfig(dt=t / 256, max_steps=256, seed=11, antithetic=True)
        cfg_b = mc.PathConfig(dt=t / 256, max_steps=256, seed=11, antithetic=False)
        ya = mc.kernel_kde(zero_drift, law, unit_ball, t, np.zeros(2),
                           np.zeros((1, 2)), cfg_a, 20000)[0]
        yb = mc.kernel_kde(zero_drift, law, unit_ball, t, np.zeros(2),
                           np.zeros((1, 2)), cfg_b, 20000)[0]
        assert abs(ya.value - yb.value) < 3 * np.hypot(ya.stderr, yb.stderr)


def test_path_record_file(tmp_path, law, zero_drift, unit_ball):
    cfg = mc.PathConfig(dt=1 / 128, max_steps=1024, seed=61)
    recs = mc.simulate_killed(zero_drift, law, unit_ball, np.zeros(2), 8.0, cfg,
                              n_paths=50)
    out = tmp_path / "paths.csv"
    mc.write_path_records(recs, out, x0=np.zeros(2))
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 50
    assert all(len(l.split(",")) == 7 for l in lines)  # x0(2), tau, exit(2), flags(2)


def test_stderr_shrinks_with_path_count(law, zero_drift, unit_ball):
    # monitored estimator contract: doubling paths shrinks stderr ~ 1/sqrt(2)
    t = 0.25
    cfg = mc.PathConfig(dt=t / 256, max_steps=256, seed=67)
    y = np.array([[0.2, 0.1]])
    e1 = mc.kernel_kde(zero_drift, law, unit_ball, t, np.zeros(2), y, cfg, 10000)[0]
    e2 = mc.kernel_kde(zero_drift, law, unit_ball, t, np.zeros(2), y, cfg, 40000)[0]
    assert e2.stderr < 0.7 * e1.stderr
