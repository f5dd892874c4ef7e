"""Distance, gradient and Riemannian SGD kernels for the three embedding geometries.

All batched kernels work row-wise on ``(m, n)`` arrays and broadcast a single
``(n,)`` vector against a batch. The public single-vector functions validate
their inputs; the batched methods on the geometry classes do not, since they
sit in the training loop.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, OffManifold, PointOutsideBall

DEFAULT_EPS = 1e-7
MANIFOLD_TOL = 1e-4
INIT_RANGE = 1e-3


def _sqnorm(x):
    return np.einsum("...i,...i->...", x, x)


def _check_same_dim(u, v):
    if u.shape[-1] != v.shape[-1]:
        raise DimensionMismatch(f"dimension {u.shape[-1]} != {v.shape[-1]}")


def _check_in_ball(*xs):
    for x in xs:
        if np.any(_sqnorm(x) >= 1.0):
            raise PointOutsideBall("point has norm >= 1")


# ---------------------------------------------------------------- Poincare ball


def _arcosh1p(x):
    # arcosh(1 + x), accurate for small x
    return np.log1p(x + np.sqrt(x * (x + 2.0)))


def mobius_add(u, v, epsilon=DEFAULT_EPS):
    """Mobius addition ``u (+) v`` in the Poincare ball."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(u, v)
    _check_in_ball(u, v)
    return _project_ball(_mobius_add(u, v, epsilon), epsilon)


def _mobius_add(u, v, epsilon):
    uv = np.einsum("...i,...i->...", u, v)[..., None]
    uu = _sqnorm(u)[..., None]
    vv = _sqnorm(v)[..., None]
    num = (1.0 + 2.0 * uv + vv) * u + (1.0 - uu) * v
    den = np.maximum(1.0 + 2.0 * uv + uu * vv, epsilon)
    return num / den


def _project_ball(y, epsilon):
    bound = 1.0 - epsilon
    # Aim a few ulps inside the bound so norms computed in any summation
    # order still come out <= 1 - eps.
    target = bound - 4 * np.spacing(bound)
    norm = np.sqrt(_sqnorm(y))[..., None]
    out = np.where(norm > target, y * (target / np.maximum(norm, target)), y)
    over = np.sqrt(_sqnorm(out)) > target
    while np.any(over):
        out[over] = out[over] * np.nextafter(1.0, 0.0)
        over = np.sqrt(_sqnorm(out)) > target
    return out


def poincare_distance(u, v, epsilon=DEFAULT_EPS):
    """``arcosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2)))`` with the argument clamped to ``>= 1+eps``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(u, v)
    _check_in_ball(u, v)
    d = PoincareBall(epsilon).dist(u, v)
    return float(d) if np.ndim(d) == 0 else d


def poincare_rsgd_step(x, euclidean_grad, lr, epsilon=DEFAULT_EPS):
    """One Riemannian SGD step in the ball.

    The Euclidean gradient is rescaled by the inverse metric ``(1-|x|^2)^2/4``,
    the point moves along the geodesic via Mobius addition of
    ``tanh(lr * lambda_x * |g_r| / 2) * (-g_r / |g_r|)``, and points that end
    up outside ``|y| <= 1 - eps`` are rescaled back onto that sphere.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(euclidean_grad, dtype=float)
    _check_same_dim(x, g)
    _check_in_ball(x)
    out = PoincareBall(epsilon).step(np.atleast_2d(x), np.atleast_2d(g), lr)
    return out.reshape(x.shape)


class PoincareBall:
    name = "poincare"

    def __init__(self, epsilon=DEFAULT_EPS):
        self.epsilon = epsilon

    @staticmethod
    def ambient_dim(dim):
        return dim

    def init(self, n, dim, rng):
        return rng.uniform(-INIT_RANGE, INIT_RANGE, size=(n, dim))

    def _arg(self, u, v):
        alpha = 1.0 - _sqnorm(u)
        beta = 1.0 - _sqnorm(v)
        diff2 = _sqnorm(u - v)
        return 2.0 * diff2 / (alpha * beta), alpha, beta, diff2

    def dist(self, u, v):
        x, *_ = self._arg(u, v)
        return _arcosh1p(np.maximum(x, self.epsilon))

    def dist_grad(self, u, v):
        """Distances and their Euclidean gradients w.r.t. ``u`` and ``v``."""
        u, v = np.broadcast_arrays(u, v)
        x, alpha, beta, diff2 = self._arg(u, v)
        active = x > self.epsilon
        xc = np.maximum(x, self.epsilon)
        d = _arcosh1p(xc)
        dd_dx = np.where(active, 1.0 / np.sqrt(xc * (xc + 2.0)), 0.0)[..., None]
        a = alpha[..., None]
        b = beta[..., None]
        s = diff2[..., None]
        diff = u - v
        gx_u = 4.0 * diff / (a * b) + 4.0 * s * u / (a * a * b)
        gx_v = -4.0 * diff / (a * b) + 4.0 * s * v / (a * b * b)
        return d, dd_dx * gx_u, dd_dx * gx_v

    def step(self, x, g, lr):
        sq = _sqnorm(x)[..., None]
        g_r = ((1.0 - sq) ** 2 / 4.0) * g
        gn = np.sqrt(_sqnorm(g_r))[..., None]
        moving = gn[..., 0] > 0
        if not np.any(moving):
            return x.copy()
        lam = 2.0 / (1.0 - sq)
        safe = np.where(gn > 0, gn, 1.0)
        v = np.tanh(lr * lam * gn / 2.0) * (-g_r / safe)
        out = x.copy()
        out[moving] = _project_ball(_mobius_add(x[moving], v[moving], self.epsilon), self.epsilon)
        return out

    def validate(self, x, tol=None):
        return bool(np.all(np.sqrt(_sqnorm(x)) <= 1.0 - self.epsilon))


# ---------------------------------------------------------------- Hyperboloid


def lorentz_inner(u, v):
    """``-u0 v0 + sum_i ui vi``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(u, v)
    out = _lorentz(u, v)
    return float(out) if np.ndim(out) == 0 else out


def _lorentz(u, v):
    return np.einsum("...i,...i->...", u[..., 1:], v[..., 1:]) - u[..., 0] * v[..., 0]


def _check_on_manifold(*xs):
    for x in xs:
        if np.any(np.abs(_lorentz(x, x) + 1.0) > MANIFOLD_TOL) or np.any(x[..., 0] <= 0):
            raise OffManifold("point is not on the hyperboloid <x,x>_L = -1, x0 > 0")


def lift_to_hyperboloid(spatial):
    """Map spatial coordinates ``x_{1:}`` to the hyperboloid point above them."""
    spatial = np.asarray(spatial, dtype=float)
    x0 = np.sqrt(_sqnorm(spatial) + 1.0)[..., None]
    return np.concatenate([x0, spatial], axis=-1)


def hyperboloid_distance(u, v, epsilon=DEFAULT_EPS):
    """``arcosh(-<u,v>_L)`` with the argument clamped to ``>= 1+eps``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_same_dim(u, v)
    _check_on_manifold(u, v)
    d = Hyperboloid(epsilon).dist(u, v)
    return float(d) if np.ndim(d) == 0 else d


def hyperboloid_expmap(x, u):
    """Exponential map at ``x`` of the tangent vector ``u``: ``cosh|u| x + sinh|u| u/|u|``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_same_dim(x, u)
    return _expmap(x, u)


def _expmap(x, u):
    un = np.sqrt(np.maximum(_lorentz(u, u), 0.0))[..., None]
    safe = np.where(un > 0, un, 1.0)
    return np.where(un > 0, np.cosh(un) * x + np.sinh(un) * u / safe, x)


def hyperboloid_rsgd_step(x, euclidean_grad, lr, c_g=1.0, c_s=1e6):
    """One Riemannian SGD step on the hyperboloid.

    Steps, in order: tangent projection of the Lorentz-flipped gradient,
    clipping its Lorentz norm to ``c_g``, the exponential map along
    ``-lr * g_r``, and re-projection onto the manifold with the spatial part
    clipped to norm ``c_s``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(euclidean_grad, dtype=float)
    _check_same_dim(x, g)
    out = Hyperboloid(grad_clip=c_g, spatial_clip=c_s).step(np.atleast_2d(x), np.atleast_2d(g), lr)
    return out.reshape(x.shape)


class Hyperboloid:
    name = "hyperboloid"

    def __init__(self, epsilon=DEFAULT_EPS, grad_clip=1.0, spatial_clip=1e6):
        self.epsilon = epsilon
        self.grad_clip = grad_clip
        self.spatial_clip = spatial_clip

    @staticmethod
    def ambient_dim(dim):
        return dim + 1

    def init(self, n, dim, rng):
        return lift_to_hyperboloid(rng.uniform(-INIT_RANGE, INIT_RANGE, size=(n, dim)))

    def dist(self, u, v):
        z = np.maximum(-_lorentz(u, v), 1.0 + self.epsilon)
        return np.arccosh(z)

    def dist_grad(self, u, v):
        u, v = np.broadcast_arrays(u, v)
        z = -_lorentz(u, v)
        active = z > 1.0 + self.epsilon
        zc = np.maximum(z, 1.0 + self.epsilon)
        d = np.arccosh(zc)
        dd_dz = np.where(active, 1.0 / np.sqrt(zc * zc - 1.0), 0.0)[..., None]
        gz_u = v.copy()
        gz_u[..., 1:] *= -1.0
        gz_v = u.copy()
        gz_v[..., 1:] *= -1.0
        return d, dd_dz * gz_u, dd_dz * gz_v

    def step(self, x, g, lr):
        # 1. tangent projection
        g_l = g.copy()
        g_l[..., 0] *= -1.0
        g_r = g_l + _lorentz(x, g_l)[..., None] * x
        # 2. clip Lorentz norm
        gn = np.sqrt(np.maximum(_lorentz(g_r, g_r), 0.0))[..., None]
        scale = np.minimum(1.0, self.grad_clip / np.where(gn > 0, gn, 1.0))
        g_r = g_r * scale
        # 3. exponential map
        x_new = _expmap(x, -lr * g_r)
        # 4. back onto the manifold, spatial norm clipped
        spatial = x_new[..., 1:]
        sn = np.sqrt(_sqnorm(spatial))[..., None]
        spatial = spatial * np.minimum(1.0, self.spatial_clip / np.where(sn > 0, sn, 1.0))
        return lift_to_hyperboloid(spatial)

    def validate(self, x, tol=1e-6):
        return bool(np.all(np.abs(_lorentz(x, x) + 1.0) <= tol) and np.all(x[..., 0] > 0))


# ---------------------------------------------------------------- Euclidean baseline


class Euclidean:
    name = "euclidean"

    def __init__(self, epsilon=DEFAULT_EPS, grad_clip=1.0):
        self.epsilon = epsilon
        self.grad_clip = grad_clip

    @staticmethod
    def ambient_dim(dim):
        return dim

    def init(self, n, dim, rng):
        return rng.uniform(-INIT_RANGE, INIT_RANGE, size=(n, dim))

    def dist(self, u, v):
        return np.sqrt(_sqnorm(u - v))

    def dist_grad(self, u, v):
        u, v = np.broadcast_arrays(u, v)
        diff = u - v
        d = np.sqrt(_sqnorm(diff))
        inv = np.where(d > self.epsilon, 1.0 / np.where(d > 0, d, 1.0), 0.0)[..., None]
        return d, diff * inv, -diff * inv

    def step(self, x, g, lr):
        gn = np.sqrt(_sqnorm(g))[..., None]
        scale = np.minimum(1.0, self.grad_clip / np.where(gn > 0, gn, 1.0))
        return x - lr * g * scale

    def validate(self, x, tol=None):
        return bool(np.all(np.isfinite(x)))


GEOMETRIES = {"poincare": PoincareBall, "hyperboloid": Hyperboloid, "euclidean": Euclidean}


def make_geometry(name, epsilon=DEFAULT_EPS, grad_clip=1.0, spatial_clip=1e6):
    if name == "poincare":
        return PoincareBall(epsilon)
    if name == "hyperboloid":
        return Hyperboloid(epsilon, grad_clip, spatial_clip)
    if name == "euclidean":
        return Euclidean(epsilon, grad_clip)
    raise ValueError(f"unknown geometry {name!r}; expected one of {sorted(GEOMETRIES)}")
