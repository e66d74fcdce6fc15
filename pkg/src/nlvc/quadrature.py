"""Quadrature engines for singular and far-field nonlocal integrals.

The central primitive is ``pv_integrate``: principal-value integration of a
function with a point singularity.  The integrand is sampled in antipodal
pairs (y and its reflection through the center), so odd singular parts
cancel before summation; the paired integrand is then integrated over
shells [eps_j, R] for a geometric ladder of inner cutoffs eps_j = eps/4^j
and the cutoff is extrapolated to zero, either with caller-declared
correction exponents or with a measured contraction ratio.

Regular pieces use composite Gauss-Legendre panels with geometric grading
toward declared singular abscissae.  Seeded Monte Carlo estimators provide
independent oracles on balls, ball complements and sphere products.

All routines are deterministic for a fixed QuadratureConfig.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QuadratureError(Exception):
    """Raised when an integral fails its convergence or budget checks."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            message = message + " | " + json.dumps(diagnostics, default=repr, sort_keys=True)
        super().__init__(message)


@dataclass(frozen=True)
class QuadratureConfig:
    """Shared knobs for every integration routine.

    Parameters
    ----------
    eps : float
        Inner principal-value cutoff radius (absolute length; scale it to
        the problem's domain size).
    r_max : float
        Far-field truncation radius used when the interaction horizon is
        infinite.
    rel_tol, abs_tol : float
        Target relative tolerance and absolute floor for refinements.
    max_evals : int
        Hard budget on integrand evaluations per call.
    mc_seed : int
        Seed for the Monte Carlo estimators; fixed seed gives bit-identical
        estimates.
    richardson_levels : int
        Number of shrinking cutoffs used for the extrapolation (>= 2).
    """

    eps: float = 1e-4
    r_max: float = 60.0
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    max_evals: int = 8_000_000
    mc_seed: int = 12342026
    richardson_levels: int = 3

    def __post_init__(self):
        if not (0.0 < self.eps < self.r_max):
            raise ValueError("QuadratureConfig requires 0 < eps < r_max")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("QuadratureConfig tolerances must be positive")
        if self.richardson_levels < 2:
            raise ValueError("QuadratureConfig needs richardson_levels >= 2")
        if self.max_evals < 1000:
            raise ValueError("QuadratureConfig max_evals is unusably small")


DEFAULT_CONFIG = QuadratureConfig()

# Gauss order per panel and its embedded lower order for error estimates.
PANEL_ORDER = 14
_EMBED_DROP = 5


def power_tail(n, t, radius):
    """Exact integral of |y - c|^(-(n+t)) over the complement of B_radius(c).

    Equals (pi^(n/2) * n / (t * Gamma(n/2 + 1))) / radius^t; finite for t > 0.
    """
    if t <= 0.0:
        raise ValueError("tail exponent must be positive")
    coeff = math.pi ** (n / 2.0) * n / (t * math.gamma(n / 2.0 + 1.0))
    return coeff / radius ** t


@lru_cache(maxsize=64)
def _leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gauss_panels(edges, order=PANEL_ORDER):
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two panel edges")
    x, w = _leggauss(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def graded_edges(a, b, toward="left", panels=34, ratio=0.5):
    """Panel edges on [a, b] whose widths shrink geometrically toward one end.

    toward is "left", "right" or "both"; use it to resolve an integrable
    endpoint singularity or a kink without wasting panels elsewhere.
    """
    if not b > a:
        raise ValueError("graded_edges needs b > a")
    frac = ratio ** np.arange(panels - 1, -1.0, -1.0)
    if toward == "left":
        return np.concatenate(([a], a + (b - a) * frac))
    if toward == "right":
        return np.concatenate((b - (b - a) * frac[::-1], [b]))
    if toward == "both":
        mid = 0.5 * (a + b)
        left = graded_edges(a, mid, "left", panels, ratio)
        right = graded_edges(mid, b, "right", panels, ratio)
        return np.concatenate((left, right[1:]))
    raise ValueError("toward must be 'left', 'right' or 'both'")


def _panel_sums(f, edges, order):
    """Per-panel integrals of f; returns (sums, evals)."""
    nodes, weights = gauss_panels(edges, order)
    vals = np.asarray(f(nodes))
    npan = len(edges) - 1
    if vals.ndim == 1:
        sums = (vals * weights).reshape(npan, order).sum(axis=1)
    else:
        shaped = (vals * weights[:, None]).reshape(npan, order, -1)
        sums = shaped.sum(axis=1)
    return sums, nodes.size


def integrate_interval(f, a, b, sing=(), order=PANEL_ORDER, panels=8,
                       depth=40, ratio=0.5):
    """Integrate a batched scalar/vector integrand over [a, b].

    Parameters
    ----------
    f : callable
        Maps an (m,) array of abscissae to (m,) or (m, d) values.
    sing : sequence of float
        Abscissae (endpoints or interior) where f is integrably singular or
        non-smooth; panels are graded geometrically toward each.
    depth : int
        Panels per graded section; leftover mass near a singular point of
        strength |x - p|^(-q) scales like ratio^(depth*(1-q)).

    Returns
    -------
    value, error_estimate
        The estimate compares the panel rule with an embedded lower order.
    """
    if b <= a:
        return 0.0, 0.0
    cuts = sorted({float(a), float(b), *(float(p) for p in sing if a <= p <= b)})
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0.0:
            continue
        lo_sing = any(abs(lo - p) < 1e-300 for p in sing)
        hi_sing = any(abs(hi - p) < 1e-300 for p in sing)
        if lo_sing and hi_sing:
            e = graded_edges(lo, hi, "both", depth, ratio)
        elif lo_sing:
            e = graded_edges(lo, hi, "left", depth, ratio)
        elif hi_sing:
            e = graded_edges(lo, hi, "right", depth, ratio)
        else:
            e = np.linspace(lo, hi, panels + 1)
        pieces.append(e if not pieces else e[1:])
    edges = np.concatenate(pieces)
    hi_sums, _ = _panel_sums(f, edges, order)
    lo_sums, _ = _panel_sums(f, edges, order - _EMBED_DROP)
    value = hi_sums.sum(axis=0)
    err = np.abs(hi_sums.sum(axis=0) - lo_sums.sum(axis=0))
    return value, err


def sphere_rule(n, points=None):
    """Nodes (rows) and weights integrating over the unit sphere S^(n-1).

    n = 1 uses the two-point counting measure on {-1, +1}; n = 2 a
    trapezoid rule in angle (spectrally accurate for smooth integrands);
    n = 3 a Gauss-Legendre x trapezoid product rule in (cos theta, phi).
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        m = int(points or 256)
        ang = 2.0 * math.pi * np.arange(m) / m
        pts = np.column_stack((np.cos(ang), np.sin(ang)))
        return pts, np.full(m, 2.0 * math.pi / m)
    if n == 3:
        mmu = int(points or 24)
        if mmu % 2:
            mmu += 1
        mphi = 2 * mmu
        mu, wmu = _leggauss(mmu)
        phi = 2.0 * math.pi * np.arange(mphi) / mphi
        smu = np.sqrt(1.0 - mu ** 2)
        pts = np.empty((mmu * mphi, 3))
        pts[:, 0] = np.repeat(mu, mphi)
        pts[:, 1] = (smu[:, None] * np.cos(phi)[None, :]).ravel()
        pts[:, 2] = (smu[:, None] * np.sin(phi)[None, :]).ravel()
        w = np.repeat(wmu, mphi) * (2.0 * math.pi / mphi)
        return pts, w
    raise ValueError("sphere_rule supports n in {1, 2, 3}")


def half_sphere_rule(n, points=None):
    """One point per antipodal pair, with the full-rule pair weights."""
    pts, w = sphere_rule(n, points)
    if n == 1:
        return pts[:1], w[:1]
    if n == 2:
        m = len(w)
        return pts[: m // 2], w[: m // 2]
    keep = pts[:, 0] > 0.0
    return pts[keep], w[keep]


def sphere_integrate(g, n, cfg=None, points=None):
    """Integral of g over S^(n-1) with surface (n>=2) or counting (n=1) measure.

    g maps an (m, n) array of unit vectors to (m,) values.  The rule is
    refined once and the finer value returned; for smooth integrands both
    built-in rules converge spectrally.
    """
    if n == 1:
        pts, w = sphere_rule(1)
        return float(np.dot(np.asarray(g(pts), dtype=float), w))
    base = points or (256 if n == 2 else 24)
    pts, w = sphere_rule(n, 2 * base)
    return float(np.dot(np.asarray(g(pts), dtype=float), w))


def _eval_paired(f, center, radii, n, half_pts, half_w, scalar_mode):
    """Shell integrand F(r) with antipodal pairing; vector-valued allowed.

    F(r) = r^(n-1) * sum_i w_i [f(c + r t_i) + f(c - r t_i)] over half-sphere
    nodes t_i, which equals the full spherical shell integrand of f.
    """
    m = radii.size
    if scalar_mode:
        pts = np.concatenate((center + radii, center - radii))
        vals = np.asarray(f(pts))
        plus, minus = vals[:m], vals[m:]
        paired = plus + minus
        evals = pts.size
    else:
        k = len(half_w)
        offs = radii[:, None, None] * half_pts[None, :, :]
        pts = np.concatenate(((center + offs).reshape(m * k, n),
                              (center - offs).reshape(m * k, n)))
        vals = np.asarray(f(pts))
        evals = m * k * 2
        if vals.ndim == 1:
            both = (vals[: m * k] + vals[m * k:]).reshape(m, k)
            paired = both @ half_w
        else:
            d = vals.shape[1]
            both = (vals[: m * k] + vals[m * k:]).reshape(m, k, d)
            paired = np.einsum("mkd,k->md", both, half_w)
        if n > 1:
            shell = radii ** (n - 1)
            paired = paired * (shell[:, None] if paired.ndim == 2 else shell)
            return paired, evals
    if n > 1:
        paired = paired * radii ** (n - 1)
    return paired, evals


def _richardson(eps_ladder, partials, orders, abs_tol):
    """Extrapolate partial integrals I(eps_j) to eps -> 0.

    partials has shape (L,) or (L, d) with rows ordered by decreasing eps.
    Returns (value, error_estimate).  Raises QuadratureError when the shell
    corrections grow, which signals a non-integrable even part.
    """
    I = np.asarray(partials, dtype=float)
    L = I.shape[0]
    diffs = np.diff(I, axis=0)
    dn = np.linalg.norm(np.atleast_1d(diffs[-1]))
    scale = max(float(np.max(np.abs(I[-1]))), abs_tol)
    if dn <= abs_tol + 1e-14 * scale:
        return I[-1], np.abs(diffs[-1]) + abs_tol
    if orders is not None:
        def solve(rows):
            m = min(rows.shape[0] - 1, len(orders))
            if m <= 0:
                return rows[-1]
            A = np.ones((rows.shape[0], m + 1))
            for j in range(m):
                A[:, j + 1] = eps_ladder[-rows.shape[0]:] ** orders[j]
            sol = np.linalg.lstsq(A, rows, rcond=None)[0]
            return sol[0]
        best = solve(I)
        prev = solve(I[1:]) if L >= 3 else I[-1]
        return best, np.abs(best - prev) + abs_tol
    if L < 3:
        return I[-1], np.abs(diffs[-1]) + abs_tol
    d_prev = np.atleast_1d(diffs[-2])
    d_last = np.atleast_1d(diffs[-1])
    denom = float(np.dot(d_prev, d_prev))
    rho = float(np.dot(d_last, d_prev)) / denom if denom > 0.0 else 0.0
    if abs(rho) >= 0.97:
        raise QuadratureError(
            "cutoff extrapolation does not contract",
            contraction_ratio=rho,
            last_corrections=[float(np.linalg.norm(d_prev)),
                              float(np.linalg.norm(d_last))])
    corr = diffs[-1] * (rho / (1.0 - rho))
    value = I[-1] + corr
    err = np.abs(diffs[-1]) * (rho * rho / abs(1.0 - rho)) + abs_tol
    return value, err


def pv_integrate(f, center, delta, cfg=None, orders=None, decay=None,
                 tail=None, sphere_points=None, order=PANEL_ORDER,
                 max_width=None, breaks=()):
    """Principal value of the integral of f over the ball B_delta(center).

    Evaluates lim_{eps -> 0} of the integral over eps <= |y - c| <= R with
    R = min(delta, cfg.r_max), using antipodal pairing and a ladder of
    richardson_levels cutoffs eps_j = cfg.eps / 4^j.

    Parameters
    ----------
    f : callable
        Batched integrand.  Scalar center: maps (m,) points to (m,) or
        (m, d) values.  Vector center of length n: maps (m, n) points.
    center : float or sequence of float
    delta : float
        Interaction horizon; may be inf, in which case the region beyond
        cfg.r_max is covered by `decay` or `tail`.
    cfg : QuadratureConfig
    orders : sequence of float, optional
        Known exponents p of the cutoff corrections I(eps) ~ I + sum a_p eps^p,
        eliminated exactly; if omitted, the contraction ratio is measured.
    decay : float, optional
        Declared far-field exponent t with |shell integrand| ~ r^(-1-t); the
        tail beyond r_max is then estimated with the closed-form power tail
        and its fit mismatch added to the error.
    tail : ("bound", b) or ("exact", v), optional
        Explicit tail contribution: added to the error estimate or to the
        value, respectively.  Mutually exclusive with `decay`.
    breaks : sequence of float, optional
        Radii where the shell integrand jumps or kinks (truncation edges,
        support boundaries); inserted as panel edges.

    Returns
    -------
    value, error_estimate
        Scalars, or arrays of the integrand's trailing dimension.

    Raises
    ------
    QuadratureError
        If the evaluation budget is exhausted or the cutoff corrections do
        not shrink (non-integrable singularity after pairing).
    """
    cfg = cfg or DEFAULT_CONFIG
    c = np.asarray(center, dtype=float)
    scalar_mode = c.ndim == 0
    n = 1 if scalar_mode else c.size
    if not scalar_mode:
        c = c.reshape(n)
    if decay is not None and tail is not None:
        raise ValueError("pass either decay or tail, not both")
    unbounded = not np.isfinite(delta)
    R = cfg.r_max if unbounded else float(delta)
    if R <= 0.0:
        raise ValueError("delta must be positive")

    L = cfg.richardson_levels
    eps0 = min(cfg.eps, R / 64.0)
    eps_min = eps0 * 4.0 ** (-(L - 1))
    # Geometric edges (exact powers of two) so every cutoff lands on an edge.
    w_cap = max_width if max_width is not None else max(R / 24.0, 4.0 * eps0)
    geo = [eps_min]
    while geo[-1] < min(R, w_cap):
        geo.append(geo[-1] * 2.0)
    geo = np.array(geo)
    geo = geo[geo < R]
    if geo[-1] < R:
        gap = R - geo[-1]
        m_uni = max(1, int(math.ceil(gap / w_cap)))
        uni = np.linspace(geo[-1], R, m_uni + 1)[1:]
        edges = np.concatenate((geo, uni))
    else:
        edges = geo
    cut_radii = [b for b in breaks if eps_min < b < R]
    if cut_radii:
        edges = np.unique(np.concatenate((edges, np.asarray(cut_radii, float))))

    half_pts = half_w = None
    if not scalar_mode:
        half_pts, half_w = half_sphere_rule(n, sphere_points)

    evals = [0]

    def shell_f(radii):
        vals, cnt = _eval_paired(f, c, radii, n, half_pts, half_w, scalar_mode)
        evals[0] += cnt
        if evals[0] > cfg.max_evals:
            raise QuadratureError("evaluation budget exhausted",
                                  budget=cfg.max_evals)
        return vals

    hi_sums, _ = _panel_sums(shell_f, edges, order)
    lo_sums, _ = _panel_sums(shell_f, edges, order - _EMBED_DROP)

    eps_ladder = eps0 * 4.0 ** (-np.arange(L, dtype=float))  # descending
    idx = np.searchsorted(edges, eps_ladder * (1.0 - 1e-12))
    rev = np.flip(np.cumsum(np.flip(hi_sums, axis=0), axis=0), axis=0)
    partials = np.stack([rev[i] for i in idx])  # I(eps_j), rows by falling eps
    value, err = _richardson(eps_ladder, partials, orders, cfg.abs_tol)
    panel_err = np.abs(hi_sums.sum(axis=0) - lo_sums.sum(axis=0))
    err = err + panel_err

    if unbounded:
        if decay is not None:
            # Fit F(r) ~ a r^(-1-decay) over the two outermost quarters by
            # matching section integrals; averaging over a section keeps the
            # fit stable for oscillatory shell integrands and is exact for
            # pure powers.
            ia = min(int(np.searchsorted(edges, 0.5 * R)), len(edges) - 2)
            ib = min(int(np.searchsorted(edges, 0.25 * R)), ia - 1)
            cum = np.concatenate((rev, np.zeros((1,) + rev.shape[1:])))

            def section(i, j):
                val = cum[i] - cum[j]
                ref = (edges[i] ** -decay - edges[j] ** -decay) / decay
                return val / ref

            a_out = section(ia, len(edges) - 1)
            a_in = section(ib, ia)
            value = value + a_out / (decay * R ** decay)
            err = err + np.abs(a_out - a_in) / (decay * R ** decay)
        elif tail is not None:
            kind, amount = tail
            if kind == "exact":
                value = value + amount
            elif kind == "bound":
                err = err + np.abs(amount)
            else:
                raise ValueError("tail kind must be 'exact' or 'bound'")
    elif tail is not None:
        kind, amount = tail
        if kind == "exact":
            value = value + amount
        else:
            err = err + np.abs(amount)

    if np.ndim(value) == 0 or (hasattr(value, "shape") and value.shape == ()):
        return float(value), float(np.max(err))
    return np.asarray(value), np.asarray(err)


def _unit_directions(rng, n, m):
    if n == 1:
        return rng.integers(0, 2, size=m) * 2.0 - 1.0
    g = rng.standard_normal((m, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


def _surface(n):
    # |S^(n-1)|; the n = 1 sphere carries counting measure of total mass 2.
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def mc_integrate(f, region, cfg=None, samples=None):
    """Seeded Monte Carlo integral over a named region.

    Parameters
    ----------
    f : callable
        Batched integrand over the region's points.  For ball regions it
        receives points ((m,) scalars when n = 1, else (m, n)); for
        "sphere-product" it receives two direction batches and may return
        complex values.
    region : tuple
        ("ball-complement", n, radius[, importance_exponent]),
        ("ball", n, radius) or ("sphere-product", n).
    cfg : QuadratureConfig
        Supplies mc_seed and the evaluation budget.
    samples : int, optional
        Override the sample count (default: min(max_evals, 4e6)).

    Returns
    -------
    value, std_error
        The estimate is unbiased and bit-identical for identical seeds.
    """
    cfg = cfg or DEFAULT_CONFIG
    name = region[0].replace("_", "-")
    n = int(region[1])
    N = int(samples or min(cfg.max_evals, 4_000_000))
    rng = np.random.default_rng(cfg.mc_seed)
    batch = 500_000
    acc = []
    done = 0
    while done < N:
        m = min(batch, N - done)
        if name == "ball-complement":
            radius = float(region[2])
            q = float(region[3]) if len(region) > 3 else 0.75
            u = rng.random(m)
            r = radius * u ** (-1.0 / q)
            theta = _unit_directions(rng, n, m)
            pts = r * theta if n == 1 else r[:, None] * theta
            dens = (q * radius ** q * r ** (-q - 1.0)) / (_surface(n) * r ** (n - 1))
            acc.append(np.asarray(f(pts)) / dens)
        elif name == "ball":
            radius = float(region[2])
            u = rng.random(m)
            r = radius * u ** (1.0 / n)
            theta = _unit_directions(rng, n, m)
            pts = r * theta if n == 1 else r[:, None] * theta
            vol = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * radius ** n
            acc.append(np.asarray(f(pts)) * vol)
        elif name == "sphere-product":
            t1 = _unit_directions(rng, n, m)
            t2 = _unit_directions(rng, n, m)
            acc.append(np.asarray(f(t1, t2)) * _surface(n) ** 2)
        else:
            raise ValueError("unknown Monte Carlo region %r" % (region[0],))
        done += m
    vals = np.concatenate(acc)
    mean = vals.mean()
    if np.iscomplexobj(vals):
        var = vals.real.var(ddof=1) + vals.imag.var(ddof=1)
        std_err = math.sqrt(var / vals.size)
        return complex(mean), float(std_err)
    std_err = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return float(mean), std_err
