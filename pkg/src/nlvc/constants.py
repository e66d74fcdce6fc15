"""Scaling constants of the nonlocal calculus, each with an independent oracle.

Closed forms: the exterior-ball coefficient Upsilon_{n,t}, the Riesz
normalization C_{n,s}, the directional-to-Cartesian factor G_s, and the
composition constant D_{n,s} (via a hemisphere moment).  Quadratures: the
pair-convolution constant gamma_bar of the power-law equivalence kernel and
the tempered damping factor F.  Every value can be cross-checked against a
Monte Carlo, spectral, or alternative-quadrature oracle and packaged in a
ConstantReport.

The pair-convolution integral shared by gamma_bar, F and the equivalence
module integrates eta(w) . eta(d e1 - w) over R^n, where eta(h) is an odd
radial-profile vector field; it splits into a principal-value ball around
the w = 0 singularity, an angularly capped smooth region in the half-space
w1 <= d/2 (doubled by the w <-> d e1 - w symmetry, which also removes the
second singular point), and an analytic far-field tail.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .quadrature import QuadratureError

_TINY = 1e-300


@dataclass(frozen=True)
class ConstantReport:
    """One constant, its oracle, and the agreement verdict.

    rel_discrepancy = |value - oracle_value| / max(|value|, tiny); the
    status is PASS exactly when it is below the tolerance.
    """

    name: str
    value: float
    oracle_value: float
    rel_discrepancy: float
    method: str
    n: int = 1
    s_or_beta: float = float("nan")
    lam_r: float = 0.0
    tolerance: float = 1e-3

    @property
    def status(self):
        return "PASS" if self.rel_discrepancy < self.tolerance else "FAIL"


def _report(name, value, oracle, method, **kw):
    rel = abs(value - oracle) / max(abs(value), _TINY)
    return ConstantReport(name=name, value=float(value), oracle_value=float(oracle),
                          rel_discrepancy=float(rel), method=method, **kw)


def config_with(cfg, **overrides):
    """Copy of cfg (or the defaults) with selected fields replaced."""
    cfg = cfg or quad.DEFAULT_CONFIG
    fields = dict(eps=cfg.eps, r_max=cfg.r_max, rel_tol=cfg.rel_tol,
                  abs_tol=cfg.abs_tol, max_evals=cfg.max_evals,
                  mc_seed=cfg.mc_seed, richardson_levels=cfg.richardson_levels)
    fields.update(overrides)
    return quad.QuadratureConfig(**fields)


def upsilon(n, t):
    """Exterior-ball coefficient: the integral of |x - y|^(-(n+t)) over the
    complement of B_delta(x) equals upsilon(n, t) / delta^t.

    Closed form pi^(n/2) n / (t Gamma(n/2 + 1)); n = 1 gives 2/t.
    """
    if t <= 0.0:
        raise ValueError("exterior exponent t must be positive")
    if n < 1:
        raise ValueError("dimension must be at least 1")
    return math.pi ** (n / 2.0) * n / (t * math.gamma(n / 2.0 + 1.0))


def frac_laplacian_constant(n, s):
    """Riesz normalization C_{n,s} = 4^s Gamma(s + n/2) / (pi^(n/2) |Gamma(-s)|).

    |Gamma(-s)| = Gamma(1 - s)/s for s in (0, 1), so the value is
    4^s s Gamma(s + n/2) / (pi^(n/2) Gamma(1 - s)).
    """
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    return 4.0 ** s * s * math.gamma(s + n / 2.0) / (math.pi ** (n / 2.0) * math.gamma(1.0 - s))


def grad_scale(s):
    """Directional-to-Cartesian conversion factor G_s = s / Gamma(1 - s)."""
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    return s / math.gamma(1.0 - s)


def hemisphere_moment(n, s, cfg=None):
    """Integral of |theta_1|^(s+1) over the half sphere {theta_1 >= 0}.

    n = 1 uses the counting measure on {+1} (value 1 exactly); n = 2
    integrates 2 int_0^(pi/2) cos(phi)^(s+1) dphi with graded panels; n = 3
    reduces to 2 pi int_0^1 mu^(s+1) dmu.
    """
    if n == 1:
        return 1.0
    if n == 2:
        val, _ = quad.integrate_interval(
            lambda p: np.cos(p) ** (s + 1.0), 0.0, math.pi / 2.0,
            sing=(math.pi / 2.0,))
        return 2.0 * float(val)
    if n == 3:
        val, _ = quad.integrate_interval(lambda m: m ** (s + 1.0), 0.0, 1.0,
                                         sing=(0.0,))
        return 2.0 * math.pi * float(val)
    raise ValueError("hemisphere moment supports n in {1, 2, 3}")


def dns_constant(n, s, cfg=None):
    """Composition constant D_{n,s} = -4 sin^2(pi s / 2) * hemisphere_moment^2.

    Strictly negative for all n >= 1 and s in (0, 1); D_{1,1/2} = -2.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    h = hemisphere_moment(n, s, cfg)
    return -4.0 * math.sin(math.pi * s / 2.0) ** 2 * h * h


def dns_symbol_sum(n, s, xi=None, cfg=None, samples=None):
    """Oracle for D_{n,s}: the double sphere integral of
    (theta . theta')(i theta . xi)^s (i theta' . xi)^s at |xi| = 1.

    n = 1 evaluates the exact four-term sum over {+-1}^2; n >= 2 uses the
    seeded sphere-product Monte Carlo.  Returns (complex value, std_error);
    the imaginary part must vanish and is checked, not assumed.
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    if xi is None:
        xi = np.zeros(n)
        xi[0] = 1.0
    xi = np.asarray(xi, dtype=float)

    if n == 1:
        total = 0.0 + 0.0j
        for t1 in (1.0, -1.0):
            for t2 in (1.0, -1.0):
                total += t1 * t2 * (1j * t1 * xi[0]) ** s * (1j * t2 * xi[0]) ** s
        err = 0.0
    else:
        def f(t1, t2):
            dot = np.sum(t1 * t2, axis=1)
            a = t1 @ xi
            b = t2 @ xi
            return dot * (1j * a) ** s * (1j * b) ** s

        total, err = quad.mc_integrate(f, ("sphere-product", n), cfg,
                                       samples=samples or 16_000_000)
    if abs(total.imag) > 10.0 * err + 1e-9:
        raise QuadratureError("sphere-product integral has non-vanishing "
                              "imaginary part", imag=total.imag, std_error=err)
    return total, err


def _profile_exponent(profile, t1, t2):
    """Effective local power q with profile(t) ~ a t^(-q) between t1 < t2."""
    w1 = float(np.atleast_1d(profile(np.array([t1])))[0])
    w2 = float(np.atleast_1d(profile(np.array([t2])))[0])
    if w1 <= 0.0 or w2 <= 0.0:
        raise QuadratureError("pair profile must be positive", t1=t1, t2=t2)
    return math.log(w1 / w2) / math.log(t2 / t1)


def _surface(n):
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def pair_weight_integral(n, profile, d, delta=math.inf, cfg=None,
                         angular_order=32, radial_order=quad.PANEL_ORDER,
                         ball_frac=0.35, local_exponent=None):
    """Integral over R^n of eta(w) . eta(d e1 - w), with
    eta(h) = (h/|h|) profile(|h|) 1(|h| <= delta).

    This is the translation-invariant pair convolution behind the
    equivalence kernels: for the power-law profile r^(1-beta) it equals
    2 gamma_bar d^(n+2(1-beta)), and with an exponential damping factor it
    gives the tempered correction.  Returns (value, error_estimate).

    local_exponent, when given, is the exact power q with
    profile(t) ~ a t^(-q) as t -> 0; it sharpens the cutoff extrapolation
    around the singular points (otherwise q is measured at 1e-7 d, which
    is accurate to ~1e-7 for profiles that are power laws times smooth
    factors).

    Raises QuadratureError when the integrand is not integrable: profile
    steeper than r^(-(n+1)) at the origin, far-field decay r^(-q) with
    2q <= n when delta = inf, or a singular point sitting exactly on the
    support boundary (d = delta).
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    if d <= 0.0:
        raise ValueError("separation d must be positive")
    if d >= 2.0 * delta:
        return 0.0, 0.0
    if np.isfinite(delta) and abs(d - delta) <= 1e-9 * delta:
        raise QuadratureError("singular point on the support boundary",
                              d=d, delta=delta)

    if local_exponent is not None:
        q0 = float(local_exponent)
    else:
        q0 = _profile_exponent(profile, 1e-7 * d, 2e-7 * d)
    if q0 >= n + 1.0:
        raise QuadratureError("pair integrand not integrable at the "
                              "singular points", local_exponent=q0)

    def integrand_cart(pts):
        if n == 1:
            r = np.abs(pts)
            l = np.abs(d - pts)
            dot = (d - pts) * pts
        else:
            r = np.linalg.norm(pts, axis=1)
            dvec = -pts.copy()
            dvec[:, 0] += d
            l = np.linalg.norm(dvec, axis=1)
            dot = np.sum(dvec * pts, axis=1)
        val = dot / (l * r) * profile(l) * profile(r)
        if np.isfinite(delta):
            val = np.where((r <= delta) & (l <= delta), val, 0.0)
        return val

    # Principal-value ball around w = 0, present when 0 lies inside the lens.
    ball_val = 0.0
    ball_err = 0.0
    if d < delta:
        gap = (delta - d) if np.isfinite(delta) else d
        a = ball_frac * min(d, gap)
        center = 0.0 if n == 1 else np.zeros(n)
        orders = (n + 1.0 - q0, n + 2.0 - q0, n + 3.0 - q0)
        ball_val, ball_err = quad.pv_integrate(
            integrand_cart, center, a, cfg, orders=orders)
        r_lo = a
    else:
        a = 0.0
        r_lo = d - delta

    # Smooth fold {w1 <= d/2} minus the ball, in axisymmetric coordinates.
    unbounded = not np.isfinite(delta)
    if unbounded:
        r_hi = cfg.r_max * max(1.0, d)
        # pull the matching radius in while the profile underflows there
        # (strong exponential tempering); the far tail is then negligible
        while r_hi > 8.0 * max(1.0, d) and \
                float(np.atleast_1d(profile(np.array([r_hi])))[0]) < 1e-140:
            r_hi *= 0.5
    else:
        r_hi = delta

    def mu_limits(r):
        hi = np.minimum(1.0, d / (2.0 * r))
        if np.isfinite(delta):
            lo = np.maximum(-1.0, (r * r + d * d - delta * delta) / (2.0 * r * d))
        else:
            lo = np.full_like(r, -1.0)
        return lo, hi

    def g_of(r, mu):
        # clamp keeps the l = 0 corner (r = d, mu = 1, always masked or
        # outside the fold) from emitting divide warnings
        l = np.sqrt(np.maximum(r * r - 2.0 * d * r * mu + d * d, 1e-280))
        return (d * mu - r) / l * profile(l) * profile(r)

    gx, gw = np.polynomial.legendre.leggauss(angular_order)

    def radial_integrand(r):
        lo, hi = mu_limits(r)
        if n == 1:
            # boolean indexing, not np.where: the masked-out corner r = d,
            # mu = 1 cancels catastrophically in l and would overflow
            out = np.zeros_like(r)
            m_up = (hi >= 1.0) & (lo <= 1.0)
            if np.any(m_up):
                out[m_up] = g_of(r[m_up], np.ones(int(m_up.sum())))
            m_dn = lo <= -1.0
            if np.any(m_dn):
                out[m_dn] += g_of(r[m_dn], -np.ones(int(m_dn.sum())))
            return out
        if n == 2:
            # integrate in angle phi, mu = cos(phi), over [arccos(hi), arccos(lo)]
            phi_lo = np.arccos(np.clip(hi, -1.0, 1.0))
            phi_hi = np.arccos(np.clip(lo, -1.0, 1.0))
            half = 0.5 * (phi_hi - phi_lo)
            mid = 0.5 * (phi_hi + phi_lo)
            phi = mid[:, None] + half[:, None] * gx[None, :]
            vals = g_of(r[:, None], np.cos(phi))
            return 2.0 * r * (vals @ gw) * half
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        mu = mid[:, None] + half[:, None] * gx[None, :]
        vals = g_of(r[:, None], mu)
        return 2.0 * math.pi * r * r * (vals @ gw) * half

    breaks = {0.5 * d}
    if np.isfinite(delta):
        for b in (delta - d, d - delta, delta + d):
            if r_lo < b < r_hi:
                breaks.add(b)
    breaks = sorted(b for b in breaks if r_lo < b < r_hi)

    smooth_val, smooth_err = quad.integrate_interval(
        radial_integrand, r_lo, r_hi,
        sing=tuple([r_lo] + breaks), order=radial_order, panels=24, depth=44)

    # Far-field tail: integrand ~ -profile(r)^2 over the whole sphere.
    tail_val = 0.0
    tail_err = 0.0
    if unbounded:
        q_eff = _profile_exponent(profile, 0.5 * r_hi, r_hi)
        q_chk = _profile_exponent(profile, 0.25 * r_hi, 0.5 * r_hi)
        if 2.0 * q_eff <= n:
            raise QuadratureError("pair integrand far field not integrable",
                                  far_exponent=q_eff)
        w_hi = float(np.atleast_1d(profile(np.array([r_hi])))[0])
        base = w_hi * w_hi * r_hi ** n / (2.0 * q_eff - n)
        tail_val = -_surface(n) * base
        model_mismatch = abs(q_eff - q_chk) * math.log(max(r_hi, 2.0)) + 1e-12
        tail_err = abs(tail_val) * ((q_eff + 2.0) * d / r_hi + min(1.0, model_mismatch))

    value = 2.0 * (float(ball_val) + float(smooth_val)) + tail_val
    err = 2.0 * (float(ball_err) + float(smooth_err)) + tail_err
    return value, err


def gamma_bar(n, beta, cfg=None):
    """Radial-profile constant of the power-law equivalence kernel.

    Defined by 2 gamma_bar = integral over R^n of
    ((e - z) . z) / (|e - z|^beta |z|^beta) dz for a unit vector e; the
    equivalence kernel is then gamma_bar |y - x|^(n + 2(1 - beta)).
    Converges for n/2 + 1 < beta < n + 2; other ranges raise
    QuadratureError.
    """
    if beta <= n / 2.0:
        raise ValueError("power-law exponent beta must exceed n/2")
    cfg = cfg or quad.DEFAULT_CONFIG
    profile = lambda r: np.asarray(r, float) ** (1.0 - beta)
    value, err = pair_weight_integral(n, profile, 1.0, math.inf, cfg,
                                      local_exponent=beta - 1.0)
    return 0.5 * value


def tempered_factor(n, s, lam_r, cfg=None):
    """Tempered pair-convolution factor F(n, s, lam_r).

    The tempered equivalence kernel at separation r is
    F(n, s, lambda r) / r^(n+2s) with
    F = integral of ((e - z) . z) |e - z|^(-beta) |z|^(-beta)
        exp(-lam_r (|e - z| + |z|)) dz,  beta = n + 1 + s.
    F(n, s, 0) = 2 gamma_bar(n, n + 1 + s).
    """
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    if lam_r < 0.0:
        raise ValueError("lam_r must be nonnegative")
    cfg = cfg or quad.DEFAULT_CONFIG
    beta = n + 1.0 + s

    def profile(r):
        r = np.asarray(r, float)
        return np.exp(-lam_r * r) * r ** (1.0 - beta)

    value, err = pair_weight_integral(n, profile, 1.0, math.inf, cfg,
                                      local_exponent=beta - 1.0)
    return value


def upsilon_report(n, t, cfg=None, tolerance=1e-3):
    """Closed-form upsilon against the seeded Monte Carlo exterior integral."""
    cfg = cfg or quad.DEFAULT_CONFIG
    p = n + t

    def f(y):
        r = np.abs(y) if n == 1 else np.linalg.norm(y, axis=1)
        return r ** -p

    # importance exponent slightly below t keeps the weight near-flat
    # without degenerating into a zero-variance (vacuous) check
    est, se = quad.mc_integrate(f, ("ball-complement", n, 1.0, 0.8 * t), cfg)
    return _report("upsilon", upsilon(n, t), est,
                   "monte-carlo exterior ball (se=%.1e)" % se,
                   n=n, s_or_beta=t, tolerance=tolerance)


def frac_laplacian_report(n, s, cfg=None, wavenumber=1.0, tolerance=1e-3):
    """C_{n,s} against the Fourier symbol: the principal-value integral of
    (u(0) - u(y)) |y|^(-(n+2s)) for u = cos(k x_1) must equal
    |k|^(2s) / C_{n,s}; the oracle is |k|^(2s) divided by that quadrature.
    """
    base = config_with(cfg, r_max=max(400.0, (cfg or quad.DEFAULT_CONFIG).r_max))
    k = float(wavenumber)

    def f(y):
        y1 = y if n == 1 else y[:, 0]
        r = np.abs(y) if n == 1 else np.linalg.norm(y, axis=1)
        return (1.0 - np.cos(k * y1)) * r ** -(n + 2.0 * s)

    center = 0.0 if n == 1 else np.zeros(n)
    val, err = quad.pv_integrate(f, center, math.inf, base,
                                 orders=(2.0 - 2.0 * s, 4.0 - 2.0 * s),
                                 decay=2.0 * s, max_width=2.0 / max(k, 1.0))
    oracle = k ** (2.0 * s) / val
    return _report("frac_laplacian_constant", frac_laplacian_constant(n, s), oracle,
                   "spectral symbol round trip (quad err=%.1e)" % np.max(err),
                   n=n, s_or_beta=s, tolerance=tolerance)


def grad_scale_report(s, cfg=None, tolerance=1e-3):
    """G_s against an independent quadrature of Gamma(1 - s)."""
    val, _ = quad.integrate_interval(
        lambda t: t ** -s * np.exp(-t), 0.0, 40.0, sing=(0.0,), depth=48)
    oracle = s / float(val)
    return _report("grad_scale", grad_scale(s), oracle,
                   "incomplete-gamma quadrature",
                   n=1, s_or_beta=s, tolerance=tolerance)


def dns_report(n, s, cfg=None, tolerance=1e-3):
    """D_{n,s} against the sphere-product double integral oracle."""
    cfg = cfg or quad.DEFAULT_CONFIG
    oracle, se = dns_symbol_sum(n, s, cfg=cfg)
    method = ("discrete double sum" if n == 1
              else "monte-carlo double sphere (se=%.1e)" % se)
    return _report("dns_constant", dns_constant(n, s), oracle.real, method,
                   n=n, s_or_beta=s, tolerance=tolerance)


def gamma_bar_report(n, beta, cfg=None, tolerance=1e-3):
    """gamma_bar quadrature against the composition-constants identity
    2 gamma_bar = -C_{n,s} D_{n,s} / G_s^2 with s = beta - n - 1 (valid for
    beta in (n+1, n+2)); outside that band the oracle is an absolutely
    convergent direct quadrature (available for beta < n + 1).
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    value = gamma_bar(n, beta, cfg)
    s = beta - n - 1.0
    if 0.0 < s < 1.0:
        oracle = -0.5 * frac_laplacian_constant(n, s) * dns_constant(n, s) \
            / grad_scale(s) ** 2
        method = "composition-constants identity"
    elif n == 1 and n / 2.0 + 1.0 < beta < n + 1.0:
        from scipy import integrate as _si

        def g(z):
            return ((1.0 - z) * z) / (abs(1.0 - z) ** beta * abs(z) ** beta)

        parts = 0.0
        for a, b in ((-60.0, 0.0), (0.0, 1.0), (1.0, 60.0)):
            parts += _si.quad(g, a, b, points=None, limit=400)[0]
        # far field beyond |z| = 60, integrand ~ -|z|^(2 - 2 beta)
        tail = -2.0 * 60.0 ** (3.0 - 2.0 * beta) / (2.0 * beta - 3.0)
        oracle = 0.5 * (parts + tail)
        method = "direct absolutely convergent quadrature"
    else:
        raise QuadratureError("no independent oracle for this exponent",
                              n=n, beta=beta)
    return _report("gamma_bar", value, oracle, method,
                   n=n, s_or_beta=beta, tolerance=tolerance)


def tempered_factor_report(n, s, lam_r, cfg=None, tolerance=1e-3):
    """F value against either the untempered reduction (lam_r = 0) or a
    refined re-quadrature with a different region split."""
    cfg = cfg or quad.DEFAULT_CONFIG
    value = tempered_factor(n, s, lam_r, cfg)
    if lam_r == 0.0:
        oracle = 2.0 * gamma_bar(n, n + 1.0 + s, cfg)
        method = "untempered reduction"
    else:
        beta = n + 1.0 + s

        def profile(r):
            r = np.asarray(r, float)
            return np.exp(-lam_r * r) * r ** (1.0 - beta)

        oracle, _ = pair_weight_integral(n, profile, 1.0, math.inf, cfg,
                                         angular_order=48, ball_frac=0.22,
                                         radial_order=18)
        method = "refined re-quadrature"
    return _report("tempered_factor", value, oracle, method,
                   n=n, s_or_beta=s, lam_r=lam_r, tolerance=tolerance)


def constant_suite(cfg=None, tolerance=1e-3):
    """Standard collection of ConstantReports used by the CLI and tests."""
    cfg = cfg or quad.DEFAULT_CONFIG
    reports = [
        upsilon_report(1, 1.0, cfg, tolerance),
        upsilon_report(2, 1.0, cfg, tolerance),
        upsilon_report(1, 2.0, cfg, tolerance),
        frac_laplacian_report(1, 0.5, cfg, tolerance=tolerance),
        grad_scale_report(0.5, cfg, tolerance),
        grad_scale_report(0.25, cfg, tolerance),
        dns_report(1, 0.5, cfg, tolerance),
        dns_report(2, 0.5, cfg, tolerance),
        gamma_bar_report(1, 2.5, cfg, tolerance),
        tempered_factor_report(1, 0.5, 0.0, cfg, tolerance),
        tempered_factor_report(1, 0.5, 1.0, cfg, tolerance),
    ]
    return reports
