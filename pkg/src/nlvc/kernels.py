"""Two-point interaction kernels and weights.

A kernel is the pair (rho, omega) plus a horizon delta: the vector
interaction function alpha(x, y) = rho(x, y) * 1(|x - y| <= delta) drives
the unweighted operators, and the scalar weight omega(x, y) turns them into
the weighted (and in particular fractional and tempered) operators.

Built-in families share rho(x, y) = (y - x)/|y - x| and differ in the
radial weight profile:

    fractional   omega = r^(-(n+s))                     horizon usually inf
    tempered     omega = exp(-lambda r) r^(-(n+s))
    power-law    omega = r^(1-beta)

with r = |y - x|.  Custom kernels supply closures and must declare their
structural flags, since fast paths (radial reduction, equivalence-kernel
convolution) rely on them.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("fractional", "tempered", "power-law", "custom")


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one interaction kernel.

    Parameters
    ----------
    family : str
        One of "fractional", "tempered", "power-law", "custom".
    n : int
        Spatial dimension, 1 to 3.
    s : float
        Fractional order in (0, 1); required for fractional/tempered.
    lam : float
        Tempering rate >= 0 (the JSON key is "lambda").
    beta : float
        Power-law exponent, > n/2.
    delta : float
        Interaction horizon in (0, inf]; math.inf is the distinguished
        untruncated value and operator code branches on it explicitly.
    rho_fn, omega_fn : callable
        Custom closures (x, y) -> vector / scalar, batched over rows.
    antisymmetric, symmetric, translation_invariant : bool
        Declared structure of (rho_fn, omega_fn); built-ins set all three.
    """

    family: str
    n: int = 1
    s: float = None
    lam: float = 0.0
    beta: float = None
    delta: float = math.inf
    rho_fn: object = None
    omega_fn: object = None
    antisymmetric: bool = True
    symmetric: bool = True
    translation_invariant: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError("unknown kernel family %r" % (self.family,))
        if self.n not in (1, 2, 3):
            raise ValueError("dimension n must be 1, 2 or 3")
        if not self.delta > 0.0:
            raise ValueError("horizon delta must be positive")
        if self.family in ("fractional", "tempered"):
            if self.s is None or not 0.0 < self.s < 1.0:
                raise ValueError("fractional order s must lie in (0, 1)")
        if self.family == "tempered" and self.lam < 0.0:
            raise ValueError("tempering rate must be nonnegative")
        if self.family == "power-law":
            if self.beta is None or not self.beta > self.n / 2.0:
                raise ValueError("power-law exponent beta must exceed n/2")
        if self.family == "custom":
            if self.rho_fn is None or self.omega_fn is None:
                raise ValueError("custom kernels need rho_fn and omega_fn")

    @property
    def truncated(self):
        return math.isfinite(self.delta)

    def omega_profile(self):
        """Radial weight profile W with omega(x, y) = W(|y - x|).

        Only defined for translation-invariant kernels; the profile does
        not include the horizon indicator.
        """
        if not self.translation_invariant:
            raise ValueError("no radial profile: kernel is not translation invariant")
        if self.family == "fractional":
            p = self.n + self.s
            return lambda r: np.asarray(r, float) ** -p
        if self.family == "tempered":
            p, lam = self.n + self.s, self.lam
            return lambda r: np.exp(-lam * np.asarray(r, float)) * np.asarray(r, float) ** -p
        if self.family == "power-law":
            q = self.beta - 1.0
            return lambda r: np.asarray(r, float) ** -q
        omega_fn, n = self.omega_fn, self.n

        def profile(r):
            r = np.atleast_1d(np.asarray(r, float))
            x = np.zeros((r.size, n))
            y = np.zeros((r.size, n))
            y[:, 0] = r
            return np.asarray(omega_fn(x, y))

        return profile

    def gamma_profile(self):
        """Radial profile of gamma = alpha . alpha (horizon indicator excluded)."""
        if not self.translation_invariant:
            raise ValueError("no radial profile: kernel is not translation invariant")
        if self.family != "custom":
            return lambda r: np.ones_like(np.asarray(r, float))
        rho_fn, n = self.rho_fn, self.n

        def profile(r):
            r = np.atleast_1d(np.asarray(r, float))
            x = np.zeros((r.size, n))
            y = np.zeros((r.size, n))
            y[:, 0] = r
            v = np.asarray(rho_fn(x, y))
            return np.sum(v * v, axis=-1)

        return profile


def _pairs(spec, x, y):
    """Validate and broadcast a point pair; returns (diff, dist, squeeze)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.n == 1:
        squeeze = x.ndim == 0 and y.ndim == 0
    else:
        squeeze = x.ndim <= 1 and y.ndim <= 1
    if spec.n == 1:
        xb = np.atleast_1d(x).reshape(-1, 1)
        yb = np.atleast_1d(y).reshape(-1, 1)
    else:
        xb = np.atleast_2d(x)
        yb = np.atleast_2d(y)
    if xb.shape[-1] != spec.n or yb.shape[-1] != spec.n:
        raise ValueError("points must have dimension n = %d" % spec.n)
    xb, yb = np.broadcast_arrays(xb, yb)
    diff = yb - xb
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist == 0.0):
        raise ValueError("kernel evaluated at coincident points")
    return xb, yb, diff, dist, squeeze


def rho(spec, x, y):
    """Direction function rho(x, y); unit vector from x toward y for built-ins."""
    xb, yb, diff, dist, squeeze = _pairs(spec, x, y)
    if spec.family == "custom":
        out = np.asarray(spec.rho_fn(xb, yb), dtype=float)
    else:
        out = diff / dist[..., None]
    if squeeze:
        out = out[0] if spec.n > 1 else float(out[0, 0])
    return out


def omega(spec, x, y):
    """Scalar weight omega(x, y) >= 0, symmetric for the built-in families."""
    xb, yb, _, dist, squeeze = _pairs(spec, x, y)
    if spec.family == "custom":
        out = np.asarray(spec.omega_fn(xb, yb), dtype=float)
    else:
        out = spec.omega_profile()(dist)
    if squeeze:
        out = float(np.atleast_1d(out)[0])
    return out


def alpha(spec, x, y):
    """Kernel vector alpha(x, y) = rho(x, y) 1(|y - x| <= delta)."""
    xb, yb, diff, dist, squeeze = _pairs(spec, x, y)
    if spec.family == "custom":
        vec = np.asarray(spec.rho_fn(xb, yb), dtype=float)
    else:
        vec = diff / dist[..., None]
    vec = np.where((dist <= spec.delta)[..., None], vec, 0.0)
    if squeeze:
        vec = vec[0] if spec.n > 1 else float(vec[0, 0])
    return vec


def alpha_omega(spec, x, y):
    """Product alpha(x, y) omega(x, y); the zero vector beyond the horizon."""
    xb, yb, diff, dist, squeeze = _pairs(spec, x, y)
    if spec.family == "custom":
        vec = np.asarray(spec.rho_fn(xb, yb), dtype=float) \
            * np.asarray(spec.omega_fn(xb, yb), dtype=float)[..., None]
    else:
        vec = diff / dist[..., None] * spec.omega_profile()(dist)[..., None]
    vec = np.where((dist <= spec.delta)[..., None], vec, 0.0)
    if squeeze:
        vec = vec[0] if spec.n > 1 else float(vec[0, 0])
    return vec


def gamma_unweighted(spec, x, y):
    """gamma(x, y) = alpha(x, y) . alpha(x, y) >= 0; zero beyond the horizon."""
    xb, yb, diff, dist, squeeze = _pairs(spec, x, y)
    if spec.family == "custom":
        v = np.asarray(spec.rho_fn(xb, yb), dtype=float)
        out = np.sum(v * v, axis=-1)
    else:
        out = np.ones_like(dist)
    out = np.where(dist <= spec.delta, out, 0.0)
    if squeeze:
        out = float(np.atleast_1d(out)[0])
    return out


def riesz_kernel(n, s, delta=math.inf):
    """Kernel whose unweighted gamma is the Riesz kernel |x - y|^(-(n+2s)).

    The direction function carries the full singular magnitude,
    rho(x, y) = ((y - x)/|y - x|) |y - x|^(-(n/2 + s)), so the composed
    unweighted operators reproduce fractional-Laplacian dynamics; omega is
    identically one and plays no role.
    """
    if not 0.0 < s < 1.0:
        raise ValueError("fractional order s must lie in (0, 1)")
    p = n / 2.0 + s

    def rho_fn(x, y):
        d = np.asarray(y, float) - np.asarray(x, float)
        r = np.linalg.norm(d, axis=-1)
        return d / r[..., None] * r[..., None] ** -p

    def omega_fn(x, y):
        d = np.asarray(y, float) - np.asarray(x, float)
        return np.ones(d.shape[:-1])

    return KernelSpec(family="custom", n=n, s=s, delta=delta,
                      rho_fn=rho_fn, omega_fn=omega_fn,
                      antisymmetric=True, symmetric=True,
                      translation_invariant=True)


def kernel_to_json(spec):
    """Serialize a built-in KernelSpec to a JSON string.

    Custom kernels hold closures and are rejected.
    """
    if spec.family == "custom":
        raise ValueError("custom kernels are not serializable")
    obj = {
        "family": spec.family,
        "n": spec.n,
        "s": spec.s,
        "lambda": spec.lam,
        "beta": spec.beta,
        "delta": "inf" if not spec.truncated else spec.delta,
    }
    return json.dumps(obj, sort_keys=True)


def kernel_from_json(text):
    """Inverse of kernel_to_json; accepts a JSON string or parsed dict."""
    obj = json.loads(text) if isinstance(text, str) else dict(text)
    known = {"family", "n", "s", "lambda", "beta", "delta"}
    extra = set(obj) - known
    if extra:
        raise ValueError("unknown kernel fields: %s" % ", ".join(sorted(extra)))
    delta = obj.get("delta", "inf")
    if isinstance(delta, str):
        if delta != "inf":
            raise ValueError("delta must be a number or 'inf'")
        delta = math.inf
    return KernelSpec(family=obj["family"], n=int(obj.get("n", 1)),
                      s=obj.get("s"), lam=float(obj.get("lambda") or 0.0),
                      beta=obj.get("beta"), delta=float(delta))
