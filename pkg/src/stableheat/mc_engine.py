"""Killed-path Monte Carlo for the drifted stable process.

Paths follow the Euler scheme ``x <- x + b(x) dt + dX(dt)`` with killing
declared at the first lattice time outside the domain; the post-jump landing
point is recorded as the exit position, which removes the leading
discretization bias because jumps dominate exits.  Work is sharded into
fixed-size batches, each drawing from its own counter-based stream keyed by
(seed, purpose, batch index), and reductions are ordered by batch, so every
estimate is bit-identical for any worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _streams
from .duhamel import free_kernel_batch
from .geometry import Domain
from .kato import DriftField
from .stable_core import JumpKernel, StableLaw, density, sample_subordinator

__all__ = [
    "PathConfig",
    "ExitRecord",
    "KernelEstimate",
    "Lambda0Estimate",
    "step",
    "simulate_killed",
    "kernel_kde",
    "kernel_kde_grid",
    "kernel_hybrid",
    "green_occupation",
    "harmonic_value",
    "levy_jump_count",
    "eigen_estimate",
    "survival_curve",
    "default_dt",
    "write_path_records",
]

_BATCH = 4096  # fixed batch size: determinism is per-batch, not per-worker


@dataclass(frozen=True)
class PathConfig:
    """Simulation knobs; identical (seed, config) gives identical estimates."""

    dt: float
    max_steps: int
    seed: int
    workers: int = 1
    antithetic: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.max_steps <= 0:
            raise ValueError("dt and max_steps must be positive")

    def horizon(self) -> float:
        return self.dt * self.max_steps


@dataclass(frozen=True)
class ExitRecord:
    tau: float
    exit_point: np.ndarray
    exited_by_jump: bool
    alive_at_horizon: bool
    censored: bool = False


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    stderr: float
    n_paths: int
    method: str
    flags: tuple = ()


@dataclass(frozen=True)
class Lambda0Estimate:
    value: float
    ci_low: float
    ci_high: float
    window: tuple
    per_probe: tuple


def default_dt(horizon: float, law: StableLaw, delta_start: float | None = None,
               steps: int = 2048) -> float:
    """horizon/steps, capped so the median step displacement stays small
    relative to the starting distance to the boundary."""
    dt = horizon / steps
    if delta_start is not None and delta_start > 0:
        med = _median_increment(law)
        cap = (delta_start / (10.0 * med)) ** law.alpha
        dt = min(dt, cap)
    return dt


def _median_increment(law: StableLaw) -> float:
    rng = _streams.stream(0, _streams.TAG_SAMPLING, 7)
    s = sample_subordinator(law.alpha / 2.0, rng, 4096)
    z = rng.standard_normal((4096, law.dim))
    return float(np.median(np.linalg.norm(np.sqrt(2.0 * s)[:, None] * z, axis=1)))


def step(b: DriftField, law: StableLaw, x, dt: float, rng) -> np.ndarray:
    """One Euler step of the drifted jump dynamics."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    drift = b(x)
    if not np.all(np.isfinite(drift)):
        raise FloatingPointError("drift evaluation returned non-finite values")
    s = sample_subordinator(law.alpha / 2.0, rng, n) * dt ** (2.0 / law.alpha)
    z = rng.standard_normal((n, law.dim))
    out = x + drift * dt + np.sqrt(2.0 * s)[:, None] * z
    return out[0] if np.asarray(x).ndim == 1 else out


# ---------------------------------------------------------------------------
# batched killed-path driver
# ---------------------------------------------------------------------------

def _batch_paths(law: StableLaw, b: DriftField, domain: Domain | None,
                 x0: np.ndarray, cfg: PathConfig, batch_id: int, n: int,
                 purpose: int, snapshot_steps, occupation):
    """Simulate one batch; returns per-path exit data plus requested extras.

    occupation: None or (y_grid, eps_list) -> accumulates time in the
    eps-balls around each y along the path.
    """
    rng = _streams.stream(cfg.seed, _streams.TAG_PATHS, purpose, batch_id)
    d = law.dim
    dt = cfg.dt
    beta = law.alpha / 2.0
    scale = dt ** (1.0 / law.alpha)

    x = np.tile(np.asarray(x0, dtype=float), (n, 1))
    alive = np.ones(n, dtype=bool)
    tau = np.zeros(n)
    exit_point = np.zeros((n, d))
    jumped = np.zeros(n, dtype=bool)
    snaps = {}
    occ = None
    y_grid = eps2 = None
    if occupation is not None:
        y_grid, eps_list = occupation
        eps2 = np.asarray(eps_list) ** 2
        occ = np.zeros((n, len(y_grid), len(eps_list)))

    half = n // 2 if cfg.antithetic else n
    for step_i in range(cfg.max_steps):
        if not alive.any():
            break
        # randomness is drawn only for columns that need it; the schedule is a
        # deterministic function of the stream, so results stay reproducible
        if cfg.antithetic:
            pair_live = alive[:half] | alive[half:2 * half]
            np_pairs = int(pair_live.sum())
            sub_p = sample_subordinator(beta, rng, np_pairs)
            z_p = rng.standard_normal((np_pairs, d))
            sub = np.empty(n)
            zs = np.empty((n, d))
            sub[:half][pair_live] = sub_p
            sub[half:2 * half][pair_live] = sub_p
            zs[:half][pair_live] = z_p
            zs[half:2 * half][pair_live] = -z_p
            idx = np.nonzero(alive)[0]
            sub_a = sub[idx]
            z_a = zs[idx]
        else:
            idx = np.nonzero(alive)[0]
            n_act = len(idx)
            sub_a = sample_subordinator(beta, rng, n_act)
            z_a = rng.standard_normal((n_act, d))
        xa = x[idx]
        drift = b(xa)
        if not np.all(np.isfinite(drift)):
            raise FloatingPointError("drift evaluation returned non-finite values")
        x_new = xa + drift * dt + scale * np.sqrt(2.0 * sub_a)[:, None] * z_a
        if occ is not None:
            d2 = np.sum((xa[:, None, :] - y_grid[None, :, :]) ** 2, axis=-1)
            for ei in range(len(eps2)):
                occ[idx, :, ei] += dt * (d2 < eps2[ei])
        if domain is not None:
            gone = ~domain.contains(x_new)
            if gone.any():
                gi = idx[gone]
                tau[gi] = (step_i + 1) * dt
                exit_point[gi] = x_new[gone]
                drift_only = xa[gone] + drift[gone] * dt
                jumped[gi] = domain.contains(drift_only)
                alive[gi] = False
        x[idx] = x_new
        if snapshot_steps is not None and (step_i + 1) in snapshot_steps:
            snaps[step_i + 1] = (alive.copy(), x.copy())
    return dict(x=x, alive=alive, tau=tau, exit_point=exit_point, jumped=jumped,
                snaps=snaps, occ=occ)


def _run_paths(law, b, domain, x0, n_paths: int, cfg: PathConfig, purpose: int,
               snapshot_times=(), occupation=None):
    """Batch-sharded driver with deterministic, worker-invariant assembly."""
    snapshot_steps = {int(round(t / cfg.dt)) for t in snapshot_times} or None
    sizes = [min(_BATCH, n_paths - i) for i in range(0, n_paths, _BATCH)]

    def work(args):
        bid, n = args
        return _batch_paths(law, b, domain, x0, cfg, bid, n, purpose,
                            snapshot_steps, occupation)

    jobs = list(enumerate(sizes))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    out = dict(
        x=np.concatenate([r["x"] for r in results]),
        alive=np.concatenate([r["alive"] for r in results]),
        tau=np.concatenate([r["tau"] for r in results]),
        exit_point=np.concatenate([r["exit_point"] for r in results]),
        jumped=np.concatenate([r["jumped"] for r in results]),
    )
    if occupation is not None:
        out["occ"] = np.concatenate([r["occ"] for r in results])
    if snapshot_steps:
        snaps = {}
        for s in snapshot_steps:
            snaps[s] = (
                np.concatenate([r["snaps"][s][0] for r in results if s in r["snaps"]])
                if any(s in r["snaps"] for r in results)
                else None
            )
        full = {}
        for s in snapshot_steps:
            parts_alive = []
            parts_x = []
            for r in results:
                if s in r["snaps"]:
                    parts_alive.append(r["snaps"][s][0])
                    parts_x.append(r["snaps"][s][1])
                else:  # batch died out before the snapshot time
                    nb_paths = len(r["x"])
                    parts_alive.append(np.zeros(nb_paths, dtype=bool))
                    parts_x.append(np.zeros((nb_paths, law.dim)))
            full[s] = (np.concatenate(parts_alive), np.concatenate(parts_x))
        out["snaps"] = full
    return out


# ---------------------------------------------------------------------------
# public estimators
# ---------------------------------------------------------------------------

def simulate_killed(b: DriftField, law: StableLaw, domain: Domain, x0,
                    horizon: float, cfg: PathConfig, n_paths: int = 1,
                    purpose: int = 0):
    """Exit records for paths started at x0 and killed outside the domain."""
    x0 = np.asarray(x0, dtype=float)
    if not domain.contains(x0):
        raise ValueError("start point must lie in the domain")
    steps = int(round(horizon / cfg.dt))
    if steps > cfg.max_steps:
        raise ValueError("dt * max_steps must cover the horizon")
    run = _run_paths(law, b, domain, x0, n_paths, cfg, purpose)
    records = []
    for i in range(n_paths):
        alive = bool(run["alive"][i])
        censored = alive and cfg.max_steps * cfg.dt < horizon
        records.append(
            ExitRecord(
                tau=float(run["tau"][i]) if not alive else horizon,
                exit_point=run["exit_point"][i] if not alive else run["x"][i],
                exited_by_jump=bool(run["jumped"][i]) and not alive,
                alive_at_horizon=alive,
                censored=censored,
            )
        )
    return records if n_paths > 1 else records[0]


def _silverman(points: np.ndarray, d: int) -> float:
    n = max(len(points), 2)
    sigma = float(np.mean(np.std(points, axis=0))) or 1.0
    return sigma * (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))


def kernel_kde_grid(b: DriftField, law: StableLaw, domain: Domain, t_list,
                    x0, y_grid, cfg: PathConfig, n_paths: int,
                    purpose: int = 1):
    """Killed-kernel estimates on a (t, y) grid from one set of paths.

    Gaussian product-kernel density over surviving endpoints, bandwidth by
    the Silverman rule shrunk by min(1, delta(y)/h) near the boundary
    (conservative: no boundary reflection).
    """
    t_list = sorted(set(float(t) for t in np.atleast_1d(t_list)))
    y_grid = np.atleast_2d(np.asarray(y_grid, dtype=float))
    run = _run_paths(law, b, domain, np.asarray(x0, float), n_paths, cfg,
                     purpose, snapshot_times=t_list)
    d = law.dim
    out = {}
    for t in t_list:
        s = int(round(t / cfg.dt))
        alive, xs = run["snaps"][s]
        n_surv = int(alive.sum())
        flags = () if n_surv >= 100 else ("unreliable-few-survivors",)
        if n_surv == 0:
            out[t] = [KernelEstimate(0.0, np.nan, n_paths, "kde", flags) for _ in y_grid]
            continue
        pts = xs[alive]
        h0 = _silverman(pts, d)
        ests = []
        for y in y_grid:
            h = h0 * min(1.0, max(domain.delta(y), 1e-12) / h0)
            kvals = np.exp(-np.sum((pts - y) ** 2, axis=1) / (2 * h * h))
            kvals = kvals / ((2 * np.pi) ** (d / 2.0) * h**d)
            # dead paths contribute zeros to the mean over all paths
            mean = kvals.sum() / n_paths
            var = (np.sum(kvals**2) / n_paths - mean**2) / n_paths
            ests.append(KernelEstimate(float(mean), float(np.sqrt(max(var, 0.0))),
                                       n_paths, "kde", flags))
        out[t] = ests
    return out


def kernel_kde(b, law, domain, t, x0, y_grid, cfg, n_paths, purpose: int = 1):
    return kernel_kde_grid(b, law, domain, [t], x0, y_grid, cfg, n_paths, purpose)[float(t)]


def kernel_hybrid(b: DriftField, law: StableLaw, domain: Domain, t_list, x0,
                  y_grid, cfg: PathConfig, n_paths: int, purpose: int = 2,
                  max_exit_evals: int = 3000, series_kw: dict | None = None):
    """Killed kernel by the exit identity: free kernel minus the mean of the
    free kernel restarted from the exit data.

    The correction mean subsamples the exits deterministically when they
    outnumber ``max_exit_evals``; the free factors use the vectorized
    low-order series evaluator.
    """
    t_list = sorted(set(float(t) for t in np.atleast_1d(t_list)))
    y_grid = np.atleast_2d(np.asarray(y_grid, dtype=float))
    x0 = np.asarray(x0, dtype=float)
    series_kw = dict(series_kw or {})
    run = _run_paths(law, b, domain, x0, n_paths, cfg, purpose)
    exited = ~run["alive"]
    taus = run["tau"][exited]
    pts = run["exit_point"][exited]
    rng = _streams.stream(cfg.seed, _streams.TAG_SERIES, purpose)
    out = {}
    for t in t_list:
        sel = taus < t
        n_exit = int(sel.sum())
        tau_t = taus[sel]
        pt_t = pts[sel]
        if n_exit > max_exit_evals:
            stride_idx = np.linspace(0, n_exit - 1, max_exit_evals).astype(int)
            tau_t = tau_t[stride_idx]
            pt_t = pt_t[stride_idx]
        m = len(tau_t)
        ests = []
        free_vals, free_errs = free_kernel_batch(
            b, law, np.full(len(y_grid), t), np.tile(x0, (len(y_grid), 1)),
            y_grid, rng, **series_kw)
        for yi, y in enumerate(y_grid):
            if m == 0:
                ests.append(KernelEstimate(float(free_vals[yi]), float(free_errs[yi]),
                                           n_paths, "hybrid", ("no-exits",)))
                continue
            cv, ce = free_kernel_batch(
                b, law, t - tau_t, pt_t, np.tile(y, (m, 1)), rng, **series_kw)
            frac = n_exit / n_paths
            corr = frac * cv.mean()
            corr_var = frac**2 * (cv.var(ddof=1) / m + (ce**2).mean() / m)
            corr_var += cv.mean() ** 2 * frac * (1 - frac) / n_paths
            val = float(free_vals[yi] - corr)
            err = float(np.sqrt(free_errs[yi] ** 2 + corr_var))
            flags = () if val > 0 else ("nonpositive-corrected",)
            ests.append(KernelEstimate(val, err, n_paths, "hybrid", flags))
        out[t] = ests
    return out if len(t_list) > 1 else out[t_list[0]]


def green_occupation(b: DriftField, law: StableLaw, domain: Domain, x0, y_grid,
                     cfg: PathConfig, n_paths: int, eps: float | None = None,
                     purpose: int = 3):
    """Green function estimates by occupation of small balls along killed paths.

    Returns (estimates at eps, refinement deltas at eps/2, censored fraction).
    """
    y_grid = np.atleast_2d(np.asarray(y_grid, dtype=float))
    if eps is None:
        eps = domain.diameter / 40.0
    eps_list = (eps, eps / 2.0)
    run = _run_paths(law, b, domain, np.asarray(x0, float), n_paths, cfg,
                     purpose, occupation=(y_grid, eps_list))
    occ = run["occ"]  # (n, n_y, 2)
    d = law.dim
    from scipy.special import gamma as _g
    vols = [np.pi ** (d / 2.0) / _g(d / 2.0 + 1.0) * e**d for e in eps_list]
    censored = float(run["alive"].mean())
    ests, refine = [], []
    for yi in range(len(y_grid)):
        vals = occ[:, yi, 0] / vols[0]
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(n_paths))
        fine = float((occ[:, yi, 1] / vols[1]).mean())
        flags = ("censored-paths",) if censored > 0 else ()
        ests.append(KernelEstimate(mean, se, n_paths, "occupation", flags))
        refine.append(abs(fine - mean))
    return ests, refine, censored


def harmonic_value(b: DriftField, law: StableLaw, domain_u: Domain, x0, f,
                   cfg: PathConfig, n_paths: int, purpose: int = 4):
    """Monte Carlo harmonic extension: mean of f over exit positions."""
    run = _run_paths(law, b, domain_u, np.asarray(x0, float), n_paths, cfg, purpose)
    alive = run["alive"]
    vals = np.asarray(f(run["exit_point"]), dtype=float)
    vals[alive] = 0.0
    flags = ("censored-paths",) if alive.any() else ()
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_paths))
    return KernelEstimate(mean, se, n_paths, "occupation", flags)


def levy_jump_count(b: DriftField, law: StableLaw, window_a: Domain,
                    target_b: Domain, t: float, x0, cfg: PathConfig,
                    n_paths: int, purpose: int = 5):
    """Both sides of the jump-system identity from the same paths.

    Counts transitions from A landing in B with displacement above half the
    set separation, against the time integral of the jump intensity mass of
    B seen from A.  Returns (count mean, integral mean, stderr of the
    difference, flags).
    """
    gapd = _set_distance(window_a, target_b)
    if gapd <= 0:
        raise ValueError("window and target sets must be separated")
    kern = JumpKernel(law)
    rate_big = _ball_rate_table(kern, target_b)
    steps = int(round(t / cfg.dt))
    if steps > cfg.max_steps:
        raise ValueError("dt * max_steps must cover the horizon")
    flags = ()
    expect_cross = kern.amplitude * (gapd / 2.0) ** (-law.alpha) / law.alpha * cfg.dt
    if expect_cross > 0.05:
        flags = ("dt-coarse-jump-misattribution",)

    counts = np.zeros(0)
    integrals = np.zeros(0)
    sizes = [min(_BATCH, n_paths - i) for i in range(0, n_paths, _BATCH)]
    for bid, n in enumerate(sizes):
        rng = _streams.stream(cfg.seed, _streams.TAG_PATHS, purpose, bid)
        x = np.tile(np.asarray(x0, float), (n, 1))
        cnt = np.zeros(n)
        integ = np.zeros(n)
        beta = law.alpha / 2.0
        scale = cfg.dt ** (1.0 / law.alpha)
        for _ in range(steps):
            in_a = window_a.contains(x)
            if in_a.any():
                integ[in_a] += cfg.dt * rate_big(x[in_a])
            drift = b(x)
            s = sample_subordinator(beta, rng, n)
            z = rng.standard_normal((n, law.dim))
            x_new = x + drift * cfg.dt + scale * np.sqrt(2.0 * s)[:, None] * z
            moved = np.linalg.norm(x_new - x, axis=1) > gapd / 2.0
            cnt += in_a & target_b.contains(x_new) & moved
            x = x_new
        counts = np.concatenate([counts, cnt])
        integrals = np.concatenate([integrals, integ])
    diff = counts - integrals
    se = float(diff.std(ddof=1) / np.sqrt(n_paths))
    return float(counts.mean()), float(integrals.mean()), se, flags


def _set_distance(a: Domain, b: Domain) -> float:
    if a.kind == "ball" and b.kind == "ball":
        return float(np.linalg.norm(a.center - b.center) - a.params[0] - b.params[0])
    rng = _streams.stream(1, _streams.TAG_PROBES, 91)
    pa = a.boundary_points(512, rng)
    pb = b.boundary_points(512, rng)
    return float(np.min(np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)))


def _ball_rate_table(kern: JumpKernel, target: Domain):
    """Distance-indexed table of int_B J(x, y) dy for a ball target."""
    if target.kind != "ball":
        raise ValueError("jump-count target must be a ball")
    r = target.params[0]
    c = target.center
    law = kern.law
    xg, wg = leggauss(48)
    rho = (xg + 1.0) * (r / 2.0)
    wr = wg * (r / 2.0)
    th = (np.arange(64) + 0.5) * (2.0 * np.pi / 64.0)
    dist_grid = np.linspace(r + 1e-3, 60.0, 400)
    if law.dim == 2:
        # polar integration around the target center for source on the x-axis
        px = rho[:, None] * np.cos(th)[None, :]
        py = rho[:, None] * np.sin(th)[None, :]
        vals = []
        for dd in dist_grid:
            d2 = (px - dd) ** 2 + py**2
            integrand = kern.amplitude * d2 ** (-(law.dim + law.alpha) / 2.0)
            ring = integrand.mean(axis=1) * 2.0 * np.pi * rho
            vals.append(float(ring @ wr))
        table = np.array(vals)
    else:
        rng = _streams.stream(2, _streams.TAG_PROBES, 92)
        pts = []
        need = 20000
        while need > 0:
            cand = rng.uniform(-r, r, size=(2 * need, law.dim))
            ok = np.linalg.norm(cand, axis=1) < r
            pts.append(cand[ok][:need])
            need -= len(pts[-1])
        pts = np.concatenate(pts)
        from scipy.special import gamma as _g
        vol = np.pi ** (law.dim / 2.0) / _g(law.dim / 2.0 + 1.0) * r**law.dim
        vals = []
        for dd in dist_grid:
            src = np.zeros(law.dim)
            src[0] = dd
            jv = kern.amplitude * np.linalg.norm(pts - src, axis=1) ** (-(law.dim + law.alpha))
            vals.append(float(jv.mean() * vol))
        table = np.array(vals)

    def rate(x):
        dd = np.linalg.norm(np.atleast_2d(x) - c, axis=-1)
        return np.interp(dd, dist_grid, table, left=table[0], right=0.0)

    return rate


def survival_curve(b: DriftField, law: StableLaw, domain: Domain, x0,
                   t_grid, cfg: PathConfig, n_paths: int, purpose: int = 6):
    """P(exit time > t) on a grid, from one set of paths."""
    t_grid = np.sort(np.atleast_1d(np.asarray(t_grid, dtype=float)))
    run = _run_paths(law, b, domain, np.asarray(x0, float), n_paths, cfg, purpose)
    tau = np.where(run["alive"], np.inf, run["tau"])
    return np.array([(tau > t).mean() for t in t_grid])


def eigen_estimate(b: DriftField, law: StableLaw, domain: Domain, probes,
                   t_grid, cfg: PathConfig, n_paths: int, purpose: int = 6) -> Lambda0Estimate:
    """Leading eigenvalue from the exponential decay of survival probabilities.

    Fits the log-survival slope on an automatically detected linear window,
    pooled across probe starting points; the confidence interval combines
    probe dispersion with per-fit errors.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    t_grid = np.sort(np.atleast_1d(np.asarray(t_grid, dtype=float)))
    slopes = []
    window = None
    for pi, x0 in enumerate(probes):
        surv = survival_curve(b, law, domain, x0, t_grid, cfg, n_paths,
                              purpose=purpose + 101 * pi)
        counts = surv * n_paths
        ok = counts >= 30
        ts = t_grid[ok]
        ls = np.log(surv[ok])
        if len(ts) < 4:
            raise RuntimeError("no usable survival window: too few surviving paths")
        # drop the early transient: keep the latter part where the local slope
        # stabilizes (compare slopes of the two halves, shrink from the left)
        lo = 0
        for lo in range(0, len(ts) - 3):
            seg_t, seg_l = ts[lo:], ls[lo:]
            m = len(seg_t) // 2
            s1 = np.polyfit(seg_t[:m + 1], seg_l[:m + 1], 1)[0]
            s2 = np.polyfit(seg_t[m:], seg_l[m:], 1)[0]
            if abs(s1 - s2) < 0.12 * abs(s2):
                break
        else:
            raise RuntimeError("no linear window found in the survival curve")
        window = (float(ts[lo]), float(ts[-1]))
        slopes.append(-np.polyfit(ts[lo:], ls[lo:], 1)[0])
    slopes = np.array(slopes)
    mean = float(slopes.mean())
    spread = float(slopes.std(ddof=1) / np.sqrt(len(slopes))) if len(slopes) > 1 else 0.1 * mean
    return Lambda0Estimate(mean, mean - 1.96 * spread, mean + 1.96 * spread,
                           window, tuple(float(s) for s in slopes))


def write_path_records(records, path, x0=None) -> None:
    """One line per path: x0, tau, exit point, jump flag, alive flag."""
    with open(path, "w") as fh:
        for r in np.atleast_1d(records):
            start = "" if x0 is None else ",".join(repr(float(c)) for c in np.atleast_1d(x0)) + ","
            coords = ",".join(repr(float(c)) for c in r.exit_point)
            fh.write(f"{start}{r.tau!r},{coords},{int(r.exited_by_jump)},{int(r.alive_at_horizon)}\n")
