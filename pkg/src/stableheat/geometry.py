"""Bounded open sets with distance oracles, and the sharp estimate templates.

Domains ship as parametric primitives (ball, annulus, two disjoint balls)
with exact distance-to-complement, plus smooth level sets with
Newton-projected distance.  The estimate templates are pure algebra:

* ``f_template``  -- the small-time killed-kernel shape
  ``(1 ^ delta(x)^{a/2}/sqrt(t)) (1 ^ delta(y)^{a/2}/sqrt(t)) (t^{-d/a} ^ t/|x-y|^{d+a})``;
* ``g_template``  -- the Green-function shape
  ``|x-y|^{a-d} (1 ^ delta(x) delta(y)/|x-y|^2)^{a/2}`` (and the capped
  product variant);
* the exact classical Green function of the ball and its gradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma

from .stable_core import StableLaw

__all__ = [
    "Domain",
    "ball",
    "annulus",
    "two_balls",
    "level_set",
    "parse_domain",
    "f_template",
    "g_template",
    "green_ball_exact",
    "green_ball_exact_grad",
    "ball_mean_exit_time",
    "three_g_ratio",
    "sample_interior",
    "boundary_points",
]


@dataclass(frozen=True)
class Domain:
    """Open set with membership and distance-to-complement oracles."""

    kind: str
    dim: int
    params: tuple
    diameter: float
    center: np.ndarray
    c11_characteristics: tuple | None = None
    _delta_fn: object = field(default=None, repr=False, compare=False)
    _boundary_fn: object = field(default=None, repr=False, compare=False)

    def delta(self, pts) -> np.ndarray:
        """Distance to the complement: positive inside, 0 outside."""
        pts = np.asarray(pts, dtype=float)
        scalar = pts.ndim == 1
        out = self._delta_fn(np.atleast_2d(pts))
        return out[0] if scalar else out

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        scalar = pts.ndim == 1
        out = self._delta_fn(np.atleast_2d(pts)) > 0.0
        return out[0] if scalar else out

    def boundary_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._boundary_fn(n, rng)

    def scaled(self, lam: float) -> "Domain":
        """The dilated set lam * D (about the origin)."""
        return _scale_domain(self, lam)


def _sphere_dirs(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Low-gap unit directions: stratified angles (d=2), Fibonacci (d=3)."""
    if dim == 2:
        th = (np.arange(n) + rng.random()) * (2.0 * np.pi / n)
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    if dim == 3:
        i = np.arange(n) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / n)
        th = np.pi * (1.0 + 5.0**0.5) * i + rng.random() * 2.0 * np.pi
        return np.stack(
            [np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)], axis=-1
        )
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ball(r: float, dim: int = 2, center=None) -> Domain:
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def delta(pts):
        return np.maximum(0.0, r - np.linalg.norm(pts - center, axis=-1))

    def bdry(n, rng):
        return center + r * _sphere_dirs(n, dim, rng)

    return Domain("ball", dim, (r,), 2.0 * r, center,
                  c11_characteristics=(r, 1.0), _delta_fn=delta, _boundary_fn=bdry)


def annulus(r_in: float, r_out: float, dim: int = 2, center=None) -> Domain:
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def delta(pts):
        rho = np.linalg.norm(pts - center, axis=-1)
        return np.maximum(0.0, np.minimum(rho - r_in, r_out - rho))

    def bdry(n, rng):
        n_out = int(round(n * r_out / (r_in + r_out)))
        outer = center + r_out * _sphere_dirs(n_out, dim, rng)
        inner = center + r_in * _sphere_dirs(n - n_out, dim, rng)
        return np.concatenate([outer, inner], axis=0)

    return Domain("annulus", dim, (r_in, r_out), 2.0 * r_out, center,
                  c11_characteristics=((r_out - r_in) / 2.0, 1.0),
                  _delta_fn=delta, _boundary_fn=bdry)


def two_balls(r1: float, r2: float, gap: float, dim: int = 2) -> Domain:
    """Two disjoint balls on the first axis separated by `gap` surface distance."""
    if gap <= 0:
        raise ValueError("balls must be disjoint (gap > 0)")
    e1 = np.zeros(dim)
    e1[0] = 1.0
    c1 = -(gap / 2.0 + r1) * e1
    c2 = (gap / 2.0 + r2) * e1

    def delta(pts):
        d1 = r1 - np.linalg.norm(pts - c1, axis=-1)
        d2 = r2 - np.linalg.norm(pts - c2, axis=-1)
        return np.maximum(0.0, np.maximum(d1, d2))

    def bdry(n, rng):
        n1 = int(round(n * r1 / (r1 + r2)))
        return np.concatenate(
            [c1 + r1 * _sphere_dirs(n1, dim, rng), c2 + r2 * _sphere_dirs(n - n1, dim, rng)],
            axis=0,
        )

    return Domain("two_balls", dim, (r1, r2, gap), 2.0 * r1 + 2.0 * r2 + gap,
                  np.zeros(dim), c11_characteristics=(min(r1, r2), 1.0),
                  _delta_fn=delta, _boundary_fn=bdry)


# -- smooth level sets -------------------------------------------------------

def _ellipsoid_distance(pts: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Distance to an axis-aligned ellipsoid boundary (positive inside).

    Solves the foot-point equation sum_i (x_i a_i / (a_i^2 + m))^2 = 1 for
    the scalar m by bracketed bisection plus Newton polish; the left-hand
    side is strictly decreasing on (-min a_i^2, inf), and components are
    floored away from zero so the bracket stays valid on the axes.
    """
    a2 = axes**2
    a_min = axes.min()
    x = np.maximum(np.abs(pts), 1e-12 * a_min)
    inside = np.sum((pts / axes) ** 2, axis=-1) < 1.0
    x_min = x[:, np.argmin(axes)]
    lo = -a2.min() + x_min * a_min  # f(lo) >= 0 by the dominant term
    hi = np.linalg.norm(x * axes[None, :], axis=-1)  # f(hi) <= 0

    def f_of(m):
        denom = a2[None, :] + m[:, None]
        return np.sum((x * axes[None, :] / denom) ** 2, axis=-1) - 1.0

    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = f_of(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    m = 0.5 * (lo + hi)
    for _ in range(4):
        denom = a2[None, :] + m[:, None]
        f = np.sum((x * axes[None, :] / denom) ** 2, axis=-1) - 1.0
        df = -2.0 * np.sum(x**2 * a2[None, :] / denom**3, axis=-1)
        m = np.clip(m - f / df, lo, hi)
    foot = x * a2[None, :] / (a2[None, :] + m[:, None])
    dist = np.linalg.norm(x - foot, axis=-1)
    return np.where(inside, dist, 0.0)


def level_set(preset: str, dim: int = 2) -> Domain:
    """Named smooth domains: 'ellipse' (axes 1.0/0.7) and 'lens'.

    'lens' is the smoothed intersection of two overlapping unit balls
    (log-sum-exp blend of the two ball level functions); its distance oracle
    is a Newton-projected gradient walk polished to 1e-8.
    """
    if preset == "ellipse":
        axes = np.array([1.0] + [0.7] * (dim - 1))

        def delta(pts):
            return _ellipsoid_distance(pts, axes)

        def bdry(n, rng):
            dirs = _sphere_dirs(n, dim, rng)
            return dirs * axes  # parametric boundary points of the ellipsoid

        return Domain("level_set", dim, ("ellipse",), 2.0, np.zeros(dim),
                      c11_characteristics=(0.49, 2.1), _delta_fn=delta,
                      _boundary_fn=bdry)
    if preset == "lens":
        off = 0.6
        c1 = np.zeros(dim)
        c1[0] = -off
        c2 = -c1
        kappa = 8.0

        def phi(pts):
            p1 = np.linalg.norm(pts - c1, axis=-1) - 1.0
            p2 = np.linalg.norm(pts - c2, axis=-1) - 1.0
            m = np.maximum(p1, p2)
            return m + np.log(np.exp(kappa * (p1 - m)) + np.exp(kappa * (p2 - m))) / kappa

        def grad_phi(pts):
            p1 = pts - c1
            p2 = pts - c2
            n1 = np.linalg.norm(p1, axis=-1, keepdims=True)
            n2 = np.linalg.norm(p2, axis=-1, keepdims=True)
            e1 = kappa * (n1[:, 0] - 1.0)
            e2 = kappa * (n2[:, 0] - 1.0)
            m = np.maximum(e1, e2)
            w1 = np.exp(e1 - m)
            w2 = np.exp(e2 - m)
            tot = w1 + w2
            return (w1 / tot)[:, None] * p1 / n1 + (w2 / tot)[:, None] * p2 / n2

        def _project(y):
            # scalar Newton along the gradient direction onto {phi = 0}
            for _ in range(50):
                f = phi(y)
                g = grad_phi(y)
                y = y - (f / np.sum(g * g, axis=-1))[:, None] * g
                if np.max(np.abs(phi(y))) < 1e-12:
                    break
            return y

        # dense cached boundary for nearest-point initialization
        th = np.linspace(0.0, 2.0 * np.pi, 2048, endpoint=False)
        seed_pts = np.zeros((2048, dim))
        seed_pts[:, 0] = 0.38 * np.cos(th)
        seed_pts[:, 1] = 0.75 * np.sin(th)
        cache = _project(seed_pts)

        def delta(pts):
            inside = phi(pts) < 0.0
            out = np.zeros(len(pts))
            if inside.any():
                x = pts[inside]
                idx = np.argmin(
                    np.sum((x[:, None, :] - cache[None, :, :]) ** 2, axis=-1), axis=1
                )
                y = cache[idx].copy()
                for _ in range(40):
                    # slide along the tangent toward x, then re-project
                    g = grad_phi(y)
                    nrm = g / np.linalg.norm(g, axis=-1, keepdims=True)
                    resid = x - y
                    tang = resid - np.sum(resid * nrm, axis=-1, keepdims=True) * nrm
                    if np.max(np.linalg.norm(tang, axis=-1)) < 1e-9:
                        break
                    y = _project(y + 0.8 * tang)
                out[inside] = np.linalg.norm(x - y, axis=-1)
            return out

        def bdry(n, rng):
            t = (np.arange(n) + rng.random()) * (2.0 * np.pi / n)
            pts = np.zeros((n, dim))
            pts[:, 0] = 0.38 * np.cos(t)
            pts[:, 1] = 0.75 * np.sin(t)
            return _project(pts)

        return Domain("level_set", dim, ("lens",), 2.0 * np.sqrt(1.0 - off**2),
                      np.zeros(dim), c11_characteristics=None,
                      _delta_fn=delta, _boundary_fn=bdry)
    raise ValueError(f"unknown level-set preset: {preset!r}")


def _scale_domain(dom: Domain, lam: float) -> Domain:
    def delta(pts):
        return lam * dom._delta_fn(np.atleast_2d(pts) / lam)

    def bdry(n, rng):
        return lam * dom._boundary_fn(n, rng)

    chars = dom.c11_characteristics
    if chars is not None:
        chars = (chars[0] * lam, chars[1] / lam)
    return Domain(dom.kind, dom.dim, dom.params + (("scale", lam),),
                  dom.diameter * lam, dom.center * lam,
                  c11_characteristics=chars, _delta_fn=delta, _boundary_fn=bdry)


def parse_domain(spec: str, dim: int = 2) -> Domain:
    """Grammar: ball:r | annulus:rin,rout | twoballs:r1,r2,gap | levelset:<preset>."""
    spec = spec.strip()
    if spec.startswith("ball:"):
        return ball(float(spec[5:]), dim)
    if spec.startswith("annulus:"):
        r_in, r_out = (float(s) for s in spec[8:].split(","))
        return annulus(r_in, r_out, dim)
    if spec.startswith("twoballs:"):
        r1, r2, gap = (float(s) for s in spec[9:].split(","))
        return two_balls(r1, r2, gap, dim)
    if spec.startswith("levelset:"):
        return level_set(spec[9:], dim)
    raise ValueError(f"unknown domain descriptor: {spec!r}")


# ---------------------------------------------------------------------------
# Point sampling helpers
# ---------------------------------------------------------------------------

def sample_interior(dom: Domain, n: int, rng: np.random.Generator,
                    delta_range: tuple | None = None) -> np.ndarray:
    """Rejection-sample interior points, optionally within a delta band."""
    out = []
    need = n
    box_r = dom.diameter
    guard = 0
    while need > 0:
        guard += 1
        if guard > 4000:
            raise RuntimeError("interior sampling failed; delta band too thin?")
        cand = dom.center + rng.uniform(-box_r, box_r, size=(max(4 * need, 64), dom.dim))
        dl = dom.delta(cand)
        ok = dl > 0
        if delta_range is not None:
            ok &= (dl >= delta_range[0]) & (dl <= delta_range[1])
        good = cand[ok]
        out.append(good[:need])
        need -= min(need, len(good))
    return np.concatenate(out, axis=0)


def boundary_points(dom: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    return dom.boundary_points(n, rng)


# ---------------------------------------------------------------------------
# Estimate templates
# ---------------------------------------------------------------------------

def _check_inside(dom: Domain, *pts) -> None:
    for p in pts:
        if not np.all(dom.contains(p)):
            raise ValueError("point outside the domain")


def f_template(dom: Domain, law: StableLaw, t, x, y) -> np.ndarray:
    """Small-time two-sided estimate shape for the killed kernel."""
    _check_inside(dom, x, y)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("time must be positive")
    a = law.alpha
    dx = dom.delta(x)
    dy = dom.delta(y)
    rho = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    interior = np.minimum(t ** (-law.dim / a), t * np.where(rho > 0, rho, 1e-300) ** -(law.dim + a))
    return (
        np.minimum(1.0, dx ** (a / 2.0) / np.sqrt(t))
        * np.minimum(1.0, dy ** (a / 2.0) / np.sqrt(t))
        * interior
    )


def g_template(dom: Domain, law: StableLaw, x, y, variant: str = "interior") -> np.ndarray:
    """Green-function estimate shape.

    variant='interior': |x-y|^{a-d} (1 ^ dd'/|x-y|^2)^{a/2};
    variant='product' : |x-y|^{a-d} (1 ^ (dd')^{a/2}/|x-y|^a).
    The two are comparable within a universal factor.
    """
    _check_inside(dom, x, y)
    rho = np.linalg.norm(np.asarray(x, float) - np.asarray(y, float), axis=-1)
    if np.any(rho == 0.0):
        raise ValueError("coincident points")
    a, d = law.alpha, law.dim
    dd = dom.delta(x) * dom.delta(y)
    if variant == "interior":
        boundary = np.minimum(1.0, dd / rho**2) ** (a / 2.0)
    elif variant == "product":
        boundary = np.minimum(1.0, dd ** (a / 2.0) / rho**a)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return rho ** (a - d) * boundary


def three_g_ratio(dom: Domain, law: StableLaw, x, z, y):
    """LHS/RHS of the two product-of-Green-shapes inequalities at (x, z, y).

    The first couples g(x,z) g(z,y)/(|z-y| ^ delta(z)) against
    g(x,y) (|x-z|^{a-d-1} + |z-y|^{a-d-1}); the second carries the extra
    |x-y| ^ delta(x) weight on both sides.  Vectorized over rows.
    """
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    scalar = x.ndim == 1
    x, z, y = np.atleast_2d(x), np.atleast_2d(z), np.atleast_2d(y)
    if (
        np.any(np.all(x == z, axis=-1))
        or np.any(np.all(z == y, axis=-1))
        or np.any(np.all(x == y, axis=-1))
    ):
        raise ValueError("points must be distinct")
    a, d = law.alpha, law.dim
    gxz = g_template(dom, law, x, z)
    gzy = g_template(dom, law, z, y)
    gxy = g_template(dom, law, x, y)
    rxz = np.linalg.norm(x - z, axis=-1)
    rzy = np.linalg.norm(z - y, axis=-1)
    rxy = np.linalg.norm(x - y, axis=-1)
    dz = dom.delta(z)
    dx = dom.delta(x)
    sing = rxz ** (a - d - 1.0) + rzy ** (a - d - 1.0)
    ratio1 = gxz * gzy / np.minimum(rzy, dz) / (gxy * sing)
    ratio2 = (
        gxz / np.minimum(rxz, dx) * gzy / np.minimum(rzy, dz)
        / (gxy / np.minimum(rxy, dx) * sing)
    )
    if scalar:
        return float(ratio1[0]), float(ratio2[0])
    return ratio1, ratio2


# ---------------------------------------------------------------------------
# Exact ball Green function
# ---------------------------------------------------------------------------

def _ball_green_const(alpha: float, dim: int) -> float:
    return gamma(dim / 2.0) / (2.0**alpha * np.pi ** (dim / 2.0) * gamma(alpha / 2.0) ** 2)


def _inc_int(w: np.ndarray, alpha: float, dim: int) -> np.ndarray:
    """int_0^w u^{a/2-1} (1+u)^{-d/2} du via the regularized incomplete beta."""
    a = alpha / 2.0
    b = (dim - alpha) / 2.0
    x = w / (1.0 + w)
    return betainc(a, b, x) * beta_fn(a, b)


def green_ball_exact(dom: Domain, law: StableLaw, x, y) -> np.ndarray:
    """Classical closed-form Green function of a ball for the stable generator."""
    if dom.kind != "ball":
        raise ValueError("exact Green function requires a ball domain")
    _check_inside(dom, x, y)
    r = dom.params[0]
    u = np.atleast_2d(np.asarray(x, float)) - dom.center
    v = np.atleast_2d(np.asarray(y, float)) - dom.center
    duv = np.linalg.norm(u - v, axis=-1)
    if np.any(duv == 0.0):
        raise ValueError("coincident points")
    w = (r**2 - np.sum(u * u, -1)) * (r**2 - np.sum(v * v, -1)) / (r**2 * duv**2)
    val = _ball_green_const(law.alpha, law.dim) * duv ** (law.alpha - law.dim) * _inc_int(w, law.alpha, law.dim)
    return val[0] if np.asarray(x).ndim == 1 else val


def green_ball_exact_grad(dom: Domain, law: StableLaw, x, y) -> np.ndarray:
    """Gradient in x of the exact ball Green function (analytic)."""
    if dom.kind != "ball":
        raise ValueError("exact Green function requires a ball domain")
    _check_inside(dom, x, y)
    a, d = law.alpha, law.dim
    r = dom.params[0]
    scalar = np.asarray(x).ndim == 1
    u = np.atleast_2d(np.asarray(x, float)) - dom.center
    v = np.atleast_2d(np.asarray(y, float)) - dom.center
    diff = u - v
    duv = np.linalg.norm(diff, axis=-1)
    if np.any(duv == 0.0):
        raise ValueError("coincident points")
    pu = r**2 - np.sum(u * u, -1)
    pv = r**2 - np.sum(v * v, -1)
    w = pu * pv / (r**2 * duv**2)
    c = _ball_green_const(a, d)
    int_w = _inc_int(w, a, d)
    dint = w ** (a / 2.0 - 1.0) * (1.0 + w) ** (-d / 2.0)
    grad_w = (
        -2.0 * u * (pv / (r**2 * duv**2))[:, None]
        - 2.0 * (w / duv**2)[:, None] * diff
    )
    term1 = ((a - d) * duv ** (a - d - 2.0) * int_w)[:, None] * diff
    term2 = (duv ** (a - d) * dint)[:, None] * grad_w
    out = c * (term1 + term2)
    return out[0] if scalar else out


def ball_mean_exit_time(dom: Domain, law: StableLaw, x) -> np.ndarray:
    """Expected exit time of the free process from a ball (classical formula)."""
    if dom.kind != "ball":
        raise ValueError("closed-form exit time requires a ball")
    a, d = law.alpha, law.dim
    r = dom.params[0]
    u = np.atleast_2d(np.asarray(x, float)) - dom.center
    const = gamma(d / 2.0) / (2.0**a * gamma(1.0 + a / 2.0) * gamma((d + a) / 2.0))
    val = const * np.maximum(0.0, r**2 - np.sum(u * u, -1)) ** (a / 2.0)
    return val[0] if np.asarray(x).ndim == 1 else val
