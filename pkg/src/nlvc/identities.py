"""Dual-route checks of the nonlocal Green identities and energy
equalities.

Each check evaluates the two sides of one identity through disjoint
quadrature paths: the interior term goes through the pointwise operator
routines, while the gradient double integral and the exterior flux are
integrated here from scratch (difference folds, a pair double integral in
the separation variable, oscillatory far tails for periodic fields).  The
report carries the residual next to a tolerance assembled from every
participating error estimate, so a pass is evidence about the identity
rather than about shared code.

Four identity families are covered: the unweighted Green identity on a
truncated collar or on the full periodic cell, the weighted Green
identity (truncated collar, compact fields at infinite horizon, or the
periodic cell), the fractional flux identity with its algebraic
reconciliation against the unweighted form, and the variational
equivalence between the matched-kernel bilinear form and the weighted
one, together with the two energy functionals.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate as _si

from . import equivalence as E
from . import kernels as K
from . import operators as O
from . import quadrature as quad
from .constants import frac_laplacian_constant
from .quadrature import QuadratureError

IDENTITIES = ("Unweighted", "Weighted", "FractionalDipierro",
              "AppendixBReconciliation", "Variational")

# Residual tolerance is this factor times the root-sum-square of the
# participating quadrature error estimates.
SAFETY = 10.0

_EPSABS = 1e-12
_EPSREL = 1e-9
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class GreenReport:
    """Two sides of one Green identity with an attributable tolerance.

    terms maps each independently quadratured integral to its value and
    errors to its error estimate; tolerance is SAFETY times the
    root-sum-square of the error entries, weighted exactly as the terms
    enter the two sides.
    """

    identity: str
    lhs: float
    rhs: float
    tolerance: float
    terms: dict
    errors: dict

    @property
    def residual(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.residual <= self.tolerance

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"

    def as_dict(self):
        return {
            "identity": self.identity,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "terms": dict(self.terms),
            "errors": dict(self.errors),
        }


def _report(identity, lhs, rhs, weighted_errs, terms, errors):
    tol = SAFETY * math.sqrt(sum(e * e for e in weighted_errs))
    return GreenReport(identity, float(lhs), float(rhs), tol,
                       dict(terms), dict(errors))


# ---------------------------------------------------------------------------
# scalar helpers

def _scal(f):
    ev = f.eval

    def g(x):
        return float(np.atleast_1d(np.asarray(ev(np.array([x], float)),
                                              float))[0])
    return g


def _sup(f, who):
    r = f.support_radius
    if r is None or not np.isfinite(r):
        raise ValueError("%s must declare a finite support_radius for this "
                         "identity check" % who)
    return -float(r), float(r)


def _prof_scal(profile):
    def p(r):
        return float(np.atleast_1d(np.asarray(profile(np.array([r], float)),
                                              float))[0])
    return p


def _q(f, a, b, points=None, epsabs=_EPSABS, epsrel=_EPSREL, limit=300):
    kw = {"epsabs": epsabs, "epsrel": epsrel, "limit": limit}
    if points is not None and np.isfinite(a) and np.isfinite(b):
        pts = sorted({float(p) for p in points if a < p < b})
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = _si.quad(f, a, b, **kw)
    if not np.isfinite(val):
        raise QuadratureError("divergent integral on (%g, %g)" % (a, b))
    return float(val), float(abs(err))


def _q_osc(f, a, k, trig):
    # int_a^inf f(t) * trig(k t) dt by the oscillatory far-field rule
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = _si.quad(f, a, np.inf, weight=trig, wvar=k,
                            epsabs=_EPSABS, epsrel=_EPSREL, limit=300,
                            limlst=80)
    if not np.isfinite(val):
        raise QuadratureError("divergent oscillatory tail")
    return float(val), float(abs(err))


def _cuts(x, marks, amax):
    out = set()
    for m in marks:
        d = abs(x - m)
        if 0.0 < d < amax:
            out.add(d)
    return sorted(out)


def _weight_profile(spec):
    if spec.family == "custom" or not spec.translation_invariant:
        raise ValueError("weighted identity checks need a built-in "
                         "translation-invariant kernel")
    prof = _prof_scal(spec.omega_profile())
    if spec.family == "power-law":
        q = spec.beta - 1.0
    else:
        q = spec.n + spec.s
    return prof, q


def _max_abs(f, segs, n=257):
    top = 0.0
    ev = f.eval
    for a, b in segs:
        if b - a <= 0.0:
            continue
        x = np.linspace(a, b, n)
        top = max(top, float(np.max(np.abs(np.asarray(ev(x), float)))))
    return top


def _require_zero(f, segs, who, where):
    segs = [(a, b) for a, b in segs if b - a > 1e-13]
    if not segs:
        return
    top = _max_abs(f, segs)
    ref = max(1.0, _max_abs(f, [(-1.0, 1.0)]))
    if top > 1e-10 * ref:
        raise ValueError("%s must vanish on %s (max |value| %.3e)"
                         % (who, where, top))


# ---------------------------------------------------------------------------
# difference folds with a small-offset series limb
#
# The integrands behave like t^(1-q) (first difference) or t^(2-q)
# (second difference) at the origin; below t_c the difference is replaced
# by its centered series with coefficients extracted at two offsets, and
# the power segment is integrated against the local amplitude of the
# radial profile.

def _limb_amp(prof, q, tc):
    A = prof(tc) * tc ** q
    mis = abs(prof(2.0 * tc) * (2.0 * tc) ** q / A - 1.0) if A != 0.0 else 0.0
    return A, mis


def _fold_odd(f, x, prof, q, amax, cuts=(), scale=1.0, err_out=None):
    """int_0^amax (f(x+t) - f(x-t)) prof(t) dt, prof ~ t^-q near zero."""
    tc = min(1e-4 * scale, amax / 8.0)
    h = min(1e-3 * scale, amax / 4.0)
    d1 = f(x + h) - f(x - h)
    d2 = f(x + 2.0 * h) - f(x - 2.0 * h)
    a = (8.0 * d1 - d2) / (6.0 * h)
    b = (d2 - 2.0 * d1) / (6.0 * h ** 3)
    A, mis = _limb_amp(prof, q, tc)
    limb = A * (a * tc ** (2.0 - q) / (2.0 - q)
                + b * tc ** (4.0 - q) / (4.0 - q))
    e_limb = abs(limb) * (mis + 1e-9) + abs(A * b) * tc ** (5.0 - q)
    val, err = _q(lambda t: (f(x + t) - f(x - t)) * prof(t), tc, amax,
                  points=cuts)
    if err_out is not None:
        err_out.append(err + e_limb)
    return limb + val


def _fold_even(f, x, prof, q, amax, cuts=(), scale=1.0, err_out=None,
               far_const=None):
    """int_0^amax (f(x+t) + f(x-t) - 2 f(x)) prof(t) dt.

    far_const closes the integral over (amax, inf) when both shifted
    values vanish there, contributing -2 f(x) times the profile tail.
    """
    fx = f(x)
    tc = min(1e-4 * scale, amax / 8.0)
    h = min(1e-3 * scale, amax / 4.0)
    d1 = f(x + h) + f(x - h) - 2.0 * fx
    d2 = f(x + 2.0 * h) + f(x - 2.0 * h) - 2.0 * fx
    c2 = (16.0 * d1 - d2) / (12.0 * h * h)
    c4 = (d2 - 4.0 * d1) / (12.0 * h ** 4)
    A, mis = _limb_amp(prof, q, tc)
    limb = A * (c2 * tc ** (3.0 - q) / (3.0 - q)
                + c4 * tc ** (5.0 - q) / (5.0 - q))
    e_limb = abs(limb) * (mis + 1e-9) + abs(A * c4) * tc ** (6.0 - q)
    val, err = _q(lambda t: (f(x + t) + f(x - t) - 2.0 * fx) * prof(t),
                  tc, amax, points=cuts)
    tail = 0.0
    if far_const:
        it, et = _q(prof, amax, np.inf)
        tail = -2.0 * fx * it
        err += 2.0 * abs(fx) * et
    if err_out is not None:
        err_out.append(err + e_limb)
    return limb + val + tail


class _Grad:
    """Weighted gradient of a compactly supported field by difference
    folds; evaluation errors accumulate on the instance."""

    def __init__(self, f, spec, who="u"):
        self.f = _scal(f)
        self.prof, self.q = _weight_profile(spec)
        self.delta = spec.delta
        self.su = _sup(f, who)
        self.scale = min(1.0, self.delta if spec.truncated else 1.0,
                         0.5 * (self.su[1] - self.su[0]))
        self.errs = []

    def reach(self, x):
        return max(abs(x - self.su[0]), abs(x - self.su[1]))

    def __call__(self, x):
        amax = min(self.delta, self.reach(x))
        if amax <= 0.0:
            return 0.0
        cuts = _cuts(x, self.su, amax)
        return _fold_odd(self.f, x, self.prof, self.q, amax, cuts,
                         self.scale, self.errs)

    def max_err(self):
        return max(self.errs) if self.errs else 0.0

    def kinks(self):
        if math.isinf(self.delta):
            return list(self.su)
        return [e + s * self.delta for e in self.su for s in (-1.0, 0.0, 1.0)]


def _free_divergence_fold(g, x, prof, q, gsup, scale, err_out):
    # int_0^inf (g(x+t) - g(x-t)) prof(t) dt for an algebraically decaying g
    T = max(abs(x - gsup[0]), abs(x - gsup[1])) + 2.0
    tc = 1e-4 * scale
    h = 1e-3 * scale
    d1 = g(x + h) - g(x - h)
    d2 = g(x + 2.0 * h) - g(x - 2.0 * h)
    a = (8.0 * d1 - d2) / (6.0 * h)
    b = (d2 - 2.0 * d1) / (6.0 * h ** 3)
    A, mis = _limb_amp(prof, q, tc)
    limb = A * (a * tc ** (2.0 - q) / (2.0 - q)
                + b * tc ** (4.0 - q) / (4.0 - q))
    e_limb = abs(limb) * (mis + 1e-9) + abs(A * b) * tc ** (5.0 - q)
    body, e1 = _q(lambda t: (g(x + t) - g(x - t)) * prof(t), tc, T,
                  points=_cuts(x, gsup, T))
    tail, e2 = _q(lambda t: (g(x + t) - g(x - t)) * prof(t), T, np.inf)
    err_out.append(e_limb + e1 + e2)
    return limb + body + tail


# ---------------------------------------------------------------------------
# interval algebra for the pair double integral

def _merge(segs):
    segs = sorted((float(a), float(b)) for a, b in segs if b > a)
    out = []
    for a, b in segs:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _inter(A, B):
    out = []
    for a1, b1 in A:
        for a2, b2 in B:
            lo, hi = max(a1, a2), min(b1, b2)
            if hi > lo:
                out.append((lo, hi))
    return _merge(out)


def _shift(segs, d):
    return [(a + d, b + d) for a, b in segs]


def _pair_half(fu, fv, kern, region_fn, fixed_ends, moving_ends, scale,
               horizon=None, symmetric=True, tag="double", errs=None,
               terms=None):
    """One-sided pair integral int_0^H kern(h) inner(h) dh.

    inner(h) integrates (u(x+h)-u(x)) (v(x+h)-v(x)) over the h-section of
    the region; the region is the set returned by region_fn clipped to
    the window where either difference can be nonzero.  Symmetric
    sections get a series limb at h -> 0, non-symmetric ones a bounded
    floor; constant saturation past the last geometric break closes an
    infinite horizon with the kernel tail.
    """
    uu, vv = fu.eval, fv.eval
    su = _sup(fu, "u")
    sv = _sup(fv, "v")

    def win(h):
        mu = _merge([su, (su[0] - h, su[1] - h)])
        mv = _merge([sv, (sv[0] - h, sv[1] - h)])
        return _inter(mu, mv)

    all_marks = list(fixed_ends) + list(su) + list(sv)
    all_moving = list(moving_ends) + list(su) + list(sv)

    def inner(h, epsabs=_EPSABS, epsrel=_EPSREL):
        segs = _inter(region_fn(h), win(h))
        if not segs:
            return 0.0, 0.0
        brk = all_marks + [m - h for m in all_moving]

        def f(x):
            pu = np.asarray(uu(np.array([x, x + h], float)), float)
            pv = np.asarray(vv(np.array([x, x + h], float)), float)
            return (pu[1] - pu[0]) * (pv[1] - pv[0])
        tot = etot = 0.0
        for a, b in segs:
            val, err = _q(f, a, b, points=brk, epsabs=epsabs, epsrel=epsrel)
            tot += val
            etot += err
        return tot, etot

    cands = sorted({m - f0 for m in all_moving for f0 in all_marks
                    if m - f0 > 1e-12})
    err_parts = []

    # small-h limb
    if symmetric:
        tc = 1e-4 * scale
        h0 = 1e-3 * scale
        F1, e1 = inner(h0, epsabs=1e-14, epsrel=1e-12)
        F2, e2 = inner(2.0 * h0, epsabs=1e-14, epsrel=1e-12)
        c2 = (16.0 * F1 - F2) / (12.0 * h0 * h0)
        c4 = (F2 - 4.0 * F1) / (12.0 * h0 ** 4)
        kt, k2 = kern(tc), kern(2.0 * tc)
        p = math.log(k2 / kt) / math.log(2.0) if kt > 0.0 else 0.0
        A = kt / tc ** p if kt > 0.0 else 0.0
        limb = A * (c2 * tc ** (3.0 + p) / (3.0 + p)
                    + c4 * tc ** (5.0 + p) / (5.0 + p))
        err_parts.append(abs(A * c4) * tc ** (6.0 + p)
                         + (e1 + e2) / (h0 * h0) * A * tc ** (3.0 + p)
                         + 1e-9 * abs(limb))
        lo = tc
    else:
        lo = 1e-5 * scale
        v0, e0 = inner(lo, epsabs=1e-14, epsrel=1e-12)
        kt, k2 = kern(lo), kern(2.0 * lo)
        p = math.log(k2 / kt) / math.log(2.0) if kt > 0.0 else 0.0
        A = kt / lo ** p if kt > 0.0 else 0.0
        # below lo the section grows at least quadratically, so the
        # dropped mass is bounded through |inner(lo)| (h/lo)^2
        limb = 0.0
        err_parts.append((abs(v0) + e0) / lo ** 2
                         * A * lo ** (3.0 + p) / (3.0 + p))

    # saturation of the section integral past the last geometric break
    tail = 0.0
    cinf = 0.0
    if horizon is not None and np.isfinite(horizon):
        hi = horizon
    else:
        hs = (max(cands) if cands else scale) + 0.6 * scale
        c1, ec1 = inner(hs + 0.1 * scale)
        c2v, ec2 = inner(2.0 * hs + 1.0)
        if abs(c1 - c2v) > 1e-8 * (1.0 + abs(c1)) + 10.0 * (ec1 + ec2):
            raise QuadratureError("pair integral fails to saturate past the "
                                  "geometric breaks | {hs: %g}" % hs)
        cinf = c1
        hi = hs
        if cinf != 0.0:
            ik, ek = _q(kern, hi, np.inf)
            tail = cinf * ik
            err_parts.append(abs(cinf) * ek + abs(c1 - c2v) * ik)

    inner_err = [0.0]

    def core_f(h):
        val, err = inner(h)
        if err > inner_err[0]:
            inner_err[0] = err
        return kern(h) * val

    pts = [c for c in cands if lo < c < hi]
    pts += list(np.geomspace(lo, min(hi, scale), 6)[1:-1])
    core, ecore = _q(core_f, lo, hi, points=pts)
    ik_abs, _ = _q(kern, lo, hi, epsrel=1e-3, epsabs=1e-6)
    err_parts.append(ecore + inner_err[0] * abs(ik_abs))

    total = limb + core + tail
    err_total = sum(err_parts)
    if errs is not None:
        errs[tag] = errs.get(tag, 0.0) + err_total
    if terms is not None:
        terms[tag] = terms.get(tag, 0.0) + total
    return total, err_total


# ---------------------------------------------------------------------------
# periodic-cell machinery

def _harm(f, who):
    if f.periodic_grid is None:
        raise ValueError("%s must carry a periodic grid here" % who)
    a, b = f.harmonics()
    return np.asarray(a, float), np.asarray(b, float)


def _cell_check(dom):
    a, b = float(dom[0]), float(dom[1])
    if abs((b - a) - _TWO_PI) > 1e-9:
        raise ValueError("periodic fields verify the identity on the full "
                         "cell; pass the period as the domain")
    return a, b


def _cos_moment(prof, q, k, horizon):
    # int_0^H (1 - cos(k t)) prof(t) dt with prof ~ t^-q at zero
    eps = 1e-4
    A, mis = _limb_amp(prof, q, eps)
    limb = A * (k * k / 2.0 * eps ** (3.0 - q) / (3.0 - q)
                - k ** 4 / 24.0 * eps ** (5.0 - q) / (5.0 - q))
    e_limb = abs(limb) * (mis + 1e-9) + A * k ** 6 / 720.0 * eps ** (7.0 - q)
    mid_hi = min(1.0, horizon)
    mid, e1 = _q(lambda t: (1.0 - math.cos(k * t)) * prof(t), eps, mid_hi)
    val, err = limb + mid, e_limb + e1
    if horizon > 1.0:
        if np.isfinite(horizon):
            far, e2 = _q(lambda t: (1.0 - math.cos(k * t)) * prof(t),
                         1.0, horizon)
            val += far
            err += e2
        else:
            ip, e2 = _q(prof, 1.0, np.inf)
            oc, e3 = _q_osc(prof, 1.0, k, "cos")
            val += ip - oc
            err += e2 + e3
    return val, err


def _sine_moment(prof, q, k, horizon):
    # int_0^H sin(k t) prof(t) dt with prof ~ t^-q at zero, q < 2
    eps = 1e-4
    A, mis = _limb_amp(prof, q, eps)
    limb = A * (k * eps ** (2.0 - q) / (2.0 - q)
                - k ** 3 / 6.0 * eps ** (4.0 - q) / (4.0 - q))
    e_limb = abs(limb) * (mis + 1e-9) + A * k ** 5 / 120.0 * eps ** (6.0 - q)
    mid_hi = min(1.0, horizon)
    mid, e1 = _q(lambda t: math.sin(k * t) * prof(t), eps, mid_hi)
    val, err = limb + mid, e_limb + e1
    if horizon > 1.0:
        if np.isfinite(horizon):
            far, e2 = _q(lambda t: math.sin(k * t) * prof(t), 1.0, horizon)
        else:
            far, e2 = _q_osc(prof, 1.0, k, "sin")
        val += far
        err += e2
    return val, err


# ---------------------------------------------------------------------------
# unweighted Green identity

def check_unweighted_green(u, v, Omega, spec, cfg=None):
    """Check the unweighted Green identity on one interval.

    The interior term integrates the pointwise unweighted Laplacian of u
    against v over Omega; the other side adds the gradient pair double
    integral over (Omega union collar)^2 and the flux of the two-point
    gradient through the collar.  For a finite horizon every integral is
    restricted to Omega union collar, which makes the identity exact for
    arbitrary smooth fields; periodic fields at infinite horizon verify
    the cell form, whose flux term vanishes.

    Parameters
    ----------
    u, v : ScalarField
        Compactly supported smooth fields, or both periodic on the cell.
    Omega : tuple
        Interval (a, b); the full period in the periodic case.
    spec : KernelSpec
        Translation-invariant kernel; its unweighted gamma drives both
        sides.
    cfg : QuadratureConfig, optional

    Returns
    -------
    GreenReport
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    if spec.n != 1:
        raise ValueError("identity checks are one-dimensional")
    if not spec.translation_invariant:
        raise ValueError("a translation-invariant kernel is required")
    a, b = float(Omega[0]), float(Omega[1])
    terms, errs = {}, {}
    gprof = _prof_scal(spec.gamma_profile())
    q = E._probe_exponent(spec.gamma_profile(), 1.0)

    if u.periodic_grid is not None or v.periodic_grid is not None:
        if u.periodic_grid is None or v.periodic_grid is None:
            raise ValueError("periodic checks need both fields periodic")
        if spec.truncated:
            horizon = spec.delta
        else:
            horizon = np.inf
            if gprof(100.0) * 100.0 > 0.5 * gprof(10.0) * 10.0:
                raise ValueError("kernel tail is not integrable; the cell "
                                 "identity diverges at infinite horizon")
        _cell_check((a, b))
        vsc = _scal(v)
        node_err = [0.0]

        def f_int(x):
            val, err = O.unweighted_laplacian(u, spec, x, cfg,
                                              with_error=True)
            if err > node_err[0]:
                node_err[0] = err
            return -val * vsc(x)
        lhs, e_out = _q(f_int, a, b, limit=200)
        errs["interior"] = e_out + node_err[0] * (b - a)
        terms["interior"] = lhs

        au, bu = _harm(u, "u")
        av, bv = _harm(v, "v")
        m = min(len(au), len(av))
        rhs = 0.0
        e_rhs = 0.0
        for k in range(1, m):
            pk = au[k] * av[k] + bu[k] * bv[k]
            if abs(pk) < 1e-15:
                continue
            mk, ek = _cos_moment(gprof, q, float(k), horizon)
            rhs += 4.0 * math.pi * pk * mk
            e_rhs += 4.0 * math.pi * abs(pk) * ek
        terms["gradient"] = rhs
        terms["flux"] = 0.0
        errs["gradient"] = e_rhs
        return _report("Unweighted", lhs, rhs,
                       [errs["interior"], errs["gradient"]], terms, errs)

    su = _sup(u, "u")
    sv = _sup(v, "v")
    usc, vsc = _scal(u), _scal(v)
    if spec.truncated:
        d = spec.delta
        xa, xb = a - d, b + d
        scale = min(1.0, d)
        horizon = d
        flux_lo = [(xa, a), (b, xb)]
        region = [(xa, xb)]

        def lap_window(x):
            lo = max(xa, x - d)
            hi = min(xb, x + d)
            tsym = min(x - lo, hi - x)
            err_box = []
            val = 2.0 * _fold_even(usc, x, gprof, q, tsym,
                                   _cuts(x, su, tsym), scale, err_box)
            for aa, bb in ((lo, x - tsym), (x + tsym, hi)):
                if bb - aa > 1e-14:
                    ux = usc(x)
                    seg, es = _q(lambda y: 2.0 * (usc(y) - ux)
                                 * gprof(abs(y - x)), aa, bb,
                                 points=list(su))
                    val += seg
                    err_box.append(es)
            return val, sum(err_box)
    else:
        if gprof(100.0) * 100.0 > 0.5 * gprof(10.0) * 10.0:
            raise ValueError("kernel tail is not integrable; the gradient "
                             "double integral diverges at infinite horizon")
        d = None
        scale = 1.0
        horizon = None
        flux_lo = [(sv[0], a), (b, sv[1])]
        region = [(-np.inf, np.inf)]

        def lap_window(x):
            err_box = []
            amax = max(abs(x - su[0]), abs(x - su[1]))
            val = 2.0 * _fold_even(usc, x, gprof, q, amax,
                                   _cuts(x, su, amax), scale, err_box,
                                   far_const=True)
            return val, sum(err_box)

    # interior term through the operator route
    node_err = [0.0]

    def f_int(x):
        val, err = O.unweighted_laplacian(u, spec, x, cfg, with_error=True)
        if err > node_err[0]:
            node_err[0] = err
        return -val * vsc(x)
    pts = list(su) + list(sv)
    if d is not None:
        pts += [e + sgn * d for e in su for sgn in (-1.0, 1.0)]
    lhs, e_out = _q(f_int, a, b, points=pts, limit=200)
    errs["interior"] = e_out + node_err[0] * (b - a)
    terms["interior"] = lhs

    # gradient pair double integral
    gd, _ = _pair_half(u, v, gprof, lambda h: region,
                       [a, b], [a, b], scale, horizon=horizon,
                       symmetric=True, tag="gradient", errs=errs,
                       terms=terms)
    gd *= 2.0
    terms["gradient"] = gd

    # flux through the collar
    fl = 0.0
    e_fl = 0.0
    for lo, hi in flux_lo:
        lo = max(lo, sv[0])
        hi = min(hi, sv[1])
        if hi - lo <= 1e-14:
            continue
        box = [0.0]

        def f_fl(x):
            val, err = lap_window(x)
            if err > box[0]:
                box[0] = err
            return val * vsc(x)
        seg, es = _q(f_fl, lo, hi,
                     points=list(su) + ([e + sg * d for e in su
                                         for sg in (-1.0, 1.0)]
                                        if d is not None else []))
        fl += seg
        e_fl += es + box[0] * (hi - lo)
    terms["flux"] = fl
    errs["flux"] = e_fl

    rhs = gd + fl
    return _report("Unweighted", lhs, rhs,
                   [errs["interior"], 2.0 * errs["gradient"], errs["flux"]],
                   terms, errs)


# ---------------------------------------------------------------------------
# weighted Green identity

def check_weighted_green(u, v, Omega, spec, cfg=None):
    """Check the weighted Green identity on one interval.

    The interior term integrates the composed weighted Laplacian of u
    (operator route) against v over Omega; the other side adds the single
    integral of the product of weighted gradients and the weighted flux
    over the exterior.  For a finite horizon the exterior reduces to the
    width-2 delta collar and u must vanish outside the closure of Omega,
    which makes the restricted identity exact; at infinite horizon either
    both fields are compact (the exterior is clipped by the support of v)
    or both are periodic, in which case the cell form holds with no flux
    term.

    Parameters
    ----------
    u, v : ScalarField
    Omega : tuple
        Interval (a, b); the full period in the periodic case.
    spec : KernelSpec
        Built-in translation-invariant family (the radial weight and its
        origin exponent must be known).
    cfg : QuadratureConfig, optional

    Returns
    -------
    GreenReport
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    if spec.n != 1:
        raise ValueError("identity checks are one-dimensional")
    prof, q = _weight_profile(spec)
    a, b = float(Omega[0]), float(Omega[1])
    terms, errs = {}, {}

    if u.periodic_grid is not None or v.periodic_grid is not None:
        if u.periodic_grid is None or v.periodic_grid is None:
            raise ValueError("periodic checks need both fields periodic")
        _cell_check((a, b))
        if q >= 2.0:
            raise ValueError("weight exponent at the origin must stay "
                             "below 2")
        horizon = spec.delta if spec.truncated else np.inf
        au, bu = _harm(u, "u")
        av, bv = _harm(v, "v")
        m = max(len(au), len(av))
        sk = np.zeros(m)
        e_sk = np.zeros(m)
        for k in range(1, m):
            amp = 0.0
            if k < len(au):
                amp += abs(au[k]) + abs(bu[k])
            if k < len(av):
                amp += abs(av[k]) + abs(bv[k])
            if amp < 1e-15:
                continue
            sk[k], e_sk[k] = _sine_moment(prof, q, float(k), horizon)

        def g_of(acf, bcf):
            ka = np.zeros(m)
            kb = np.zeros(m)
            kk = min(m, len(acf))
            ka[:kk] = acf[:kk]
            kb[:kk] = bcf[:kk]
            amp_c = 2.0 * sk * kb
            amp_s = -2.0 * sk * ka

            def g(x):
                x = np.asarray(x, float)
                out = np.zeros_like(x)
                for k in range(1, m):
                    if amp_c[k] != 0.0 or amp_s[k] != 0.0:
                        out = out + amp_c[k] * np.cos(k * x) \
                            + amp_s[k] * np.sin(k * x)
                return out
            bound = float(np.sum(np.abs(amp_c) + np.abs(amp_s)))
            slack = float(np.sum(2.0 * e_sk
                                 * (np.abs(ka) + np.abs(kb))))
            return g, bound, slack

        gu, bu_amp, su_sl = g_of(au, bu)
        gv, bv_amp, sv_sl = g_of(av, bv)
        rhs, e_rhs = _q(lambda x: float(gu(x)) * float(gv(x)), a, b,
                        limit=200)
        errs["gradient"] = e_rhs + _TWO_PI * (su_sl * bv_amp
                                              + sv_sl * bu_amp)
        terms["gradient"] = rhs
        terms["flux"] = 0.0

        wf = O.weighted_gradient_field(u, spec, cfg)
        vsc = _scal(v)
        node_err = [0.0]

        def f_int(x):
            val, err = O.weighted_divergence(wf, spec, x, cfg,
                                             with_error=True)
            if err > node_err[0]:
                node_err[0] = err
            return -val * vsc(x)
        lhs, e_out = _q(f_int, a, b, limit=200)
        errs["interior"] = e_out + node_err[0] * (b - a)
        terms["interior"] = lhs
        return _report("Weighted", lhs, rhs,
                       [errs["interior"], errs["gradient"]], terms, errs)

    su = _sup(u, "u")
    sv = _sup(v, "v")
    vsc = _scal(v)
    gu = _Grad(u, spec, "u")
    gv = _Grad(v, spec, "v")

    if spec.truncated:
        d = spec.delta
        _require_zero(u, [(su[0], a), (b, su[1])],
                      "u", "the exterior of the domain closure")
        ca, cb = a - 2.0 * d, b + 2.0 * d
        # interior term, composed-operator route
        node_err = [0.0]

        def f_int(x):
            val, err = O.weighted_laplacian(u, spec, x, cfg,
                                            with_error=True)
            if err > node_err[0]:
                node_err[0] = err
            return -val * vsc(x)
        pts = [e + k * d for e in su for k in (-2.0, -1.0, 0.0, 1.0, 2.0)]
        lhs, e_out = _q(f_int, a, b, points=pts, limit=120,
                        epsabs=1e-10, epsrel=1e-8)
        errs["interior"] = e_out + node_err[0] * (b - a)
        terms["interior"] = lhs

        # gradient product over the widened region
        gpts = gu.kinks() + gv.kinks()
        grad, e_g = _q(lambda x: gu(x) * gv(x), ca, cb, points=gpts)
        errs["gradient"] = e_g + (gu.max_err() * _max_abs_fn(gv, ca, cb)
                                  + gv.max_err() * _max_abs_fn(gu, ca, cb)
                                  ) * (cb - ca)
        terms["gradient"] = grad

        # flux over the collar
        fl = 0.0
        e_fl = 0.0
        gsup = (su[0] - d, su[1] + d)
        for lo, hi in ((ca, a), (b, cb)):
            lo = max(lo, sv[0])
            hi = min(hi, sv[1])
            if hi - lo <= 1e-14:
                continue
            box = []

            def f_fl(x):
                amax = min(d, max(abs(x - gsup[0]), abs(x - gsup[1])))
                if amax <= 0.0:
                    return 0.0
                val = _fold_odd(gu, x, prof, q, amax,
                                _cuts(x, gu.kinks(), amax), gu.scale, box)
                return val * vsc(x)
            seg, es = _q(f_fl, lo, hi, points=gu.kinks())
            fl += seg
            e_fl += es + (max(box) if box else 0.0) * (hi - lo)
        e_fl += gu.max_err() * 2.0 * d * _coarse_int(prof, q, d) \
            * _max_abs(v, [(ca, a), (b, cb)])
        terms["flux"] = fl
        errs["flux"] = e_fl
        rhs = grad + fl
        return _report("Weighted", lhs, rhs,
                       [errs["interior"], errs["gradient"], errs["flux"]],
                       terms, errs)

    # infinite horizon, compact fields
    if spec.family == "power-law" and not spec.beta > 2.0:
        raise ValueError("power-law weights need beta > 2 at infinite "
                         "horizon for an integrable far field")
    inner_cfg = replace(cfg, r_max=cfg.r_max + max(abs(su[0]), su[1]) + 8.0)
    memo = {}

    def w_scalar(y):
        got = memo.get(y)
        if got is None:
            got = O.weighted_gradient(u, spec, y, inner_cfg,
                                      with_error=True)
            memo[y] = got
        return got

    def w_batch(ys):
        ys = np.atleast_1d(np.asarray(ys, float))
        return np.array([w_scalar(float(y))[0] for y in ys])

    w_field = O.ScalarField(w_batch, decay_exponent=q)
    node_err = [0.0]

    def f_int(x):
        val, err = O.weighted_divergence(w_field, spec, x, cfg,
                                         with_error=True)
        if err > node_err[0]:
            node_err[0] = err
        return -val * vsc(x)
    lhs, e_out = _q(f_int, a, b, points=list(su) + list(sv),
                    limit=120, epsabs=1e-10, epsrel=1e-8)
    inner_slack = max(e for _, e in memo.values()) if memo else 0.0
    errs["interior"] = e_out + (node_err[0]
                                + inner_slack * _coarse_int(prof, q, 4.0)
                                ) * (b - a)
    terms["interior"] = lhs

    x0 = max(abs(su[0]), su[1], abs(sv[0]), sv[1]) + 1.0
    grad, e_g = _q(lambda x: gu(x) * gv(x), -x0, x0,
                   points=list(su) + list(sv))
    t_r, e_r = _q(lambda x: gu(x) * gv(x), x0, np.inf)
    t_l, e_l = _q(lambda x: gu(-x) * gv(-x), x0, np.inf)
    grad += t_r + t_l
    e_g += e_r + e_l + (gu.max_err() + gv.max_err()) * 2.0 * x0 \
        * max(_max_abs_fn(gu, -x0, x0), _max_abs_fn(gv, -x0, x0))
    terms["gradient"] = grad
    errs["gradient"] = e_g

    fl = 0.0
    e_fl = 0.0
    for lo, hi in ((sv[0], a), (b, sv[1])):
        if hi - lo <= 1e-14:
            continue
        box = []

        def f_fl(x):
            val = _free_divergence_fold(gu, x, prof, q, su, gu.scale, box)
            return val * vsc(x)
        seg, es = _q(f_fl, lo, hi, points=list(su))
        fl += seg
        e_fl += es + (max(box) if box else 0.0) * (hi - lo)
    terms["flux"] = fl
    errs["flux"] = e_fl
    rhs = grad + fl
    return _report("Weighted", lhs, rhs,
                   [errs["interior"], errs["gradient"], errs["flux"]],
                   terms, errs)


def _max_abs_fn(g, a, b, n=65):
    return max(abs(g(x)) for x in np.linspace(a, b, n))


def _coarse_int(prof, q, upper):
    tc = 1e-4
    A, _ = _limb_amp(prof, q, tc)
    head = A * tc ** (1.0 - q) / (1.0 - q) if q < 1.0 else 0.0
    lo = tc if q < 1.0 else min(0.2, upper / 4.0)
    val, _ = _q(prof, lo, upper, epsrel=1e-3, epsabs=1e-6)
    return abs(head) + abs(val)


# ---------------------------------------------------------------------------
# fractional flux identity and its reconciliation

def check_fractional_green(u, v, Omega, s, cfg=None):
    """Check the fractional flux identity and its reconciliation.

    Five integrals are quadratured independently: the interior term
    (pointwise fractional Laplacian against v), the exterior flux against
    the one-sided trace, the pair double integral restricted to pairs
    with at least one point inside Omega, the unrestricted pair double
    integral, and the exterior integral of v against the full-space
    difference integral.  The first report balances interior plus
    scaled flux against the restricted double; the second balances the
    unrestricted double minus twice the full-space exterior term against
    the restricted double minus twice the flux, which is the algebraic
    bridge between the two printed forms.

    Parameters
    ----------
    u, v : ScalarField
        Compactly supported smooth fields; v need not vanish outside
        Omega.
    Omega : tuple
    s : float
        Fractional order in (0, 1).
    cfg : QuadratureConfig, optional

    Returns
    -------
    (GreenReport, GreenReport)
        The flux identity report and the reconciliation report.
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    a, b = float(Omega[0]), float(Omega[1])
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    C1 = frac_laplacian_constant(1, s)
    qk = 1.0 + 2.0 * s

    def kern(r):
        return r ** -qk
    su = _sup(u, "u")
    sv = _sup(v, "v")
    usc, vsc = _scal(u), _scal(v)
    terms, errs = {}, {}

    # interior: pointwise operator against v
    node_err = [0.0]

    def f_t1(x):
        val, err = O.fractional_laplacian(u, s, x, cfg, with_error=True)
        if err > node_err[0]:
            node_err[0] = err
        return val * vsc(x)
    t1, e1 = _q(f_t1, a, b, points=list(su) + list(sv), limit=200)
    terms["interior"] = t1
    errs["interior"] = e1 + node_err[0] * (b - a)

    # exterior flux against the one-sided trace
    ext = [(max(sv[0], -np.inf), a), (b, sv[1])]
    ext = [(lo, hi) for lo, hi in ((sv[0], a), (b, sv[1])) if hi - lo > 1e-14]
    t2 = 0.0
    e2 = 0.0
    for lo, hi in ext:
        box = [0.0]

        def f_t2(x):
            val, err = O.fractional_neumann(u, s, x, (a, b), cfg,
                                            with_error=True)
            if err > box[0]:
                box[0] = err
            return val * vsc(x)
        edge = b if lo == b else a
        pts = list(su) + [edge + sg * 10.0 ** -p for p in (1, 2, 3)
                          for sg in (-1.0, 1.0)]
        seg, es = _q(f_t2, lo, hi, points=pts, limit=400)
        t2 += seg
        e2 += es + box[0] * (hi - lo)
    terms["flux"] = t2
    errs["flux"] = e2

    # restricted and unrestricted pair doubles
    omega_segs = [(a, b)]

    def region_l(h):
        return _merge(omega_segs + _shift(omega_segs, -h))
    t3, e3 = _pair_half(u, v, kern, region_l, [a, b], [a, b], 1.0,
                        horizon=None, symmetric=True, tag="double_restricted")
    t3 *= 2.0
    e3 *= 2.0
    terms["double_restricted"] = t3
    errs["double_restricted"] = e3

    t4, e4 = _pair_half(u, v, kern, lambda h: [(-np.inf, np.inf)],
                        [], [], 1.0, horizon=None, symmetric=True,
                        tag="double_full")
    t4 *= 2.0
    e4 *= 2.0
    terms["double_full"] = t4
    errs["double_full"] = e4

    # exterior integral of v against the full-space difference integral
    t5 = 0.0
    e5 = 0.0
    for lo, hi in ext:
        box = []

        def f_t5(x):
            amax = max(abs(x - su[0]), abs(x - su[1]))
            val = -_fold_even(usc, x, kern, qk, amax,
                              _cuts(x, su, amax), 1.0, box, far_const=True)
            return val * vsc(x)
        seg, es = _q(f_t5, lo, hi, points=list(su), limit=200)
        t5 += seg
        e5 += es + (max(box) if box else 0.0) * (hi - lo)
    terms["full_flux"] = t5
    errs["full_flux"] = e5

    rep1 = _report("FractionalDipierro",
                   t1 + C1 * t2, 0.5 * C1 * t3,
                   [errs["interior"], C1 * errs["flux"],
                    0.5 * C1 * errs["double_restricted"]],
                   terms, errs)
    rep2 = _report("AppendixBReconciliation",
                   t4 - 2.0 * t5, t3 - 2.0 * t2,
                   [errs["double_full"], 2.0 * errs["full_flux"],
                    errs["double_restricted"], 2.0 * errs["flux"]],
                   terms, errs)
    return rep1, rep2


def set_decomposition(u, v, Omega, s, cfg=None):
    """Check the rectangle decomposition of the restricted pair double.

    The double integral over pairs with at least one point inside Omega
    is evaluated directly and against the sum of the three rectangles
    (inside x inside, outside x inside, inside x outside), each by an
    independent pair quadrature.

    Returns
    -------
    GreenReport
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    a, b = float(Omega[0]), float(Omega[1])
    s = float(s)
    qk = 1.0 + 2.0 * s

    def kern(r):
        return r ** -qk
    terms, errs = {}, {}
    omega_segs = [(a, b)]
    ext_segs = [(-np.inf, a), (b, np.inf)]

    def region_l(h):
        return _merge(omega_segs + _shift(omega_segs, -h))
    direct, e_d = _pair_half(u, v, kern, region_l, [a, b], [a, b], 1.0,
                             symmetric=True, tag="union")
    direct *= 2.0
    e_d *= 2.0
    terms["union"] = direct
    errs["union"] = e_d

    oo, e_oo = _pair_half(u, v, kern,
                          lambda h: _inter(omega_segs,
                                           _shift(omega_segs, -h)),
                          [a, b], [a, b], 1.0, symmetric=True,
                          tag="inside_inside")
    oo *= 2.0
    e_oo *= 2.0
    terms["inside_inside"] = oo
    errs["inside_inside"] = e_oo

    def rect_pair(tag):
        v1, er1 = _pair_half(u, v, kern,
                             lambda h: _inter(ext_segs,
                                              _shift(omega_segs, -h)),
                             [a, b], [a, b], 1.0, symmetric=False, tag=tag)
        v2, er2 = _pair_half(u, v, kern,
                             lambda h: _inter(omega_segs,
                                              _shift(ext_segs, -h)),
                             [a, b], [a, b], 1.0, symmetric=False, tag=tag)
        return v1 + v2, er1 + er2
    eo, e_eo = rect_pair("outside_inside")
    terms["outside_inside"] = eo
    errs["outside_inside"] = e_eo
    oe, e_oe = rect_pair("inside_outside")
    terms["inside_outside"] = oe
    errs["inside_outside"] = e_oe

    return _report("AppendixBReconciliation", direct, oo + eo + oe,
                   [e_d, e_oo, e_eo, e_oe], terms, errs)


# ---------------------------------------------------------------------------
# energies and the variational equivalence

def _matched_kernel(spec, cfg, eq_kernel):
    """Radial matched-kernel profile (value at r, relative slack)."""
    if spec.family == "custom":
        gprof = _prof_scal(spec.gamma_profile())
        horizon = spec.delta if spec.truncated else None
        return gprof, horizon, 0.0
    if spec.truncated:
        ek = eq_kernel
        if ek is None:
            ek = E.EquivalenceKernel(spec, "truncated-translation-invariant")
        if getattr(ek, "table", None) is None:
            ek.tabulate(cfg)
        probe = float(ek.table.get("probe_rel", 0.0))

        def kern(r):
            return 0.5 * float(np.atleast_1d(ek.profile_eval(
                np.array([r], float)))[0])
        return kern, 2.0 * spec.delta, probe
    if spec.family == "tempered":
        raise ValueError("no closed matched kernel for untruncated "
                         "tempered weights; truncate the spec instead")
    ref = E.closed_form_two_gamma(spec, 1.0, cfg)
    if ref is None:
        raise ValueError("no matched kernel available for this spec")
    amp = 0.5 * float(ref)
    beta = E._closed_form_beta(spec)
    expo = spec.n + 2.0 * (1.0 - beta)

    def kern(r):
        return amp * r ** expo
    return kern, None, 1e-9


def _weighted_bilinear(u, v, spec, domain, cfg):
    """Single integral of the product of weighted gradients."""
    a, b = float(domain[0]), float(domain[1])
    gu = _Grad(u, spec, "u")
    gv = _Grad(v, spec, "v") if v is not u else gu
    pts = gu.kinks() + gv.kinks()
    if spec.truncated:
        ca, cb = a - 2.0 * spec.delta, b + 2.0 * spec.delta
        val, err = _q(lambda x: gu(x) * gv(x), ca, cb, points=pts)
        slack = (gu.max_err() * _max_abs_fn(gv, ca, cb)
                 + gv.max_err() * _max_abs_fn(gu, ca, cb)) * (cb - ca)
        return val, err + slack
    su = _sup(u, "u")
    sv = _sup(v, "v")
    x0 = max(abs(su[0]), su[1], abs(sv[0]), sv[1]) + 1.0
    val, err = _q(lambda x: gu(x) * gv(x), -x0, x0, points=pts)
    t_r, e_r = _q(lambda x: gu(x) * gv(x), x0, np.inf)
    t_l, e_l = _q(lambda x: gu(-x) * gv(-x), x0, np.inf)
    slack = (gu.max_err() + gv.max_err()) * 2.0 * x0 \
        * max(_max_abs_fn(gu, -x0, x0), _max_abs_fn(gv, -x0, x0))
    return val + t_r + t_l, err + e_r + e_l + slack


def _matched_bilinear(u, v, spec, domain, cfg, eq_kernel):
    """Pair double integral against the matched radial kernel."""
    a, b = float(domain[0]), float(domain[1])
    kern, horizon, probe = _matched_kernel(spec, cfg, eq_kernel)
    if spec.truncated:
        ca, cb = a - 2.0 * spec.delta, b + 2.0 * spec.delta
        region = [(ca, cb)]
        ends = [ca, cb]
        scale = min(1.0, spec.delta)
    else:
        region = [(-np.inf, np.inf)]
        ends = []
        scale = 1.0
    val, err = _pair_half(u, v, kern, lambda h: region, ends, ends, scale,
                          horizon=horizon, symmetric=True)
    val *= 2.0
    err *= 2.0
    if probe:
        vab, _ = _pair_half(u, u, kern, lambda h: region, ends, ends, scale,
                            horizon=horizon, symmetric=True)
        vbb, _ = _pair_half(v, v, kern, lambda h: region, ends, ends, scale,
                            horizon=horizon, symmetric=True)
        err += probe * 2.0 * math.sqrt(max(vab, 0.0) * max(vbb, 0.0)) \
            + probe * abs(val)
    return val, err


def energy(u, spec, domain, cfg=None, weighted=False, eq_kernel=None,
           with_error=False):
    """Energy of a field over the domain and its interaction collar.

    weighted=False integrates the squared two-point gradient against the
    matched radial kernel over the squared region (domain widened by two
    horizons, or the whole line at infinite horizon); weighted=True
    integrates the squared one-point weighted gradient over the same
    region.  Both are quadratic forms; the two agree for fields that
    vanish on the collar.

    Parameters
    ----------
    u : ScalarField
        Compactly supported field.
    spec : KernelSpec
    domain : tuple
    cfg : QuadratureConfig, optional
    weighted : bool
    eq_kernel : EquivalenceKernel, optional
        Pre-tabulated matched kernel for truncated specs; built on the
        fly when absent (slow).
    with_error : bool
        Also return the accumulated quadrature error estimate.

    Returns
    -------
    real, or (real, real) with with_error
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    if weighted:
        val, err = _weighted_bilinear(u, u, spec, domain, cfg)
    else:
        val, err = _matched_bilinear(u, u, spec, domain, cfg, eq_kernel)
    if with_error:
        return val, err
    return val


def check_variational_equivalence(u, v, Omega, spec, cfg=None,
                                  eq_kernel=None):
    """Check the variational bridge between the two bilinear forms.

    The matched-kernel pair double integral of (u, v) over the squared
    widened region must equal the single integral of the product of
    weighted gradients, provided v vanishes on the collar (checked
    numerically) and u lives inside the widened region.

    Parameters
    ----------
    u, v : ScalarField
    Omega : tuple
    spec : KernelSpec
        Truncated built-in family (tabulated matched kernel) or
        untruncated fractional / power-law (closed form).
    cfg : QuadratureConfig, optional
    eq_kernel : EquivalenceKernel, optional

    Returns
    -------
    GreenReport
    """
    cfg = cfg or quad.DEFAULT_CONFIG
    a, b = float(Omega[0]), float(Omega[1])
    sv = _sup(v, "v")
    su = _sup(u, "u")
    if spec.truncated:
        ca, cb = a - 2.0 * spec.delta, b + 2.0 * spec.delta
        _require_zero(v, [(sv[0], a), (b, sv[1])], "v", "the collar")
        _require_zero(u, [(su[0], ca), (cb, su[1])],
                      "u", "the exterior of the widened region")
    else:
        _require_zero(v, [(sv[0], a), (b, sv[1])],
                      "v", "the exterior of the domain")
    terms, errs = {}, {}
    lhs, e_l = _matched_bilinear(u, v, spec, (a, b), cfg, eq_kernel)
    terms["matched_double"] = lhs
    errs["matched_double"] = e_l
    rhs, e_r = _weighted_bilinear(u, v, spec, (a, b), cfg)
    terms["weighted_single"] = rhs
    errs["weighted_single"] = e_r
    return _report("Variational", lhs, rhs, [e_l, e_r], terms, errs)
