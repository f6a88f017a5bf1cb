"""Mass-density geometry, Newtonian potentials, pair coupling energies
and the gravitational decay times they induce.

A mass configuration is a list of rigid primitives (uniform spheres,
uniform boxes, Plummer-softened points). The coupling energy between
two configurations a and b is the double integral

    E = G * integral( (rho_a - rho_b)(x) (rho_a - rho_b)(y) / |x - y| )

evaluated analytically where closed forms exist (spheres, softened
points) and by adaptive Gauss quadrature otherwise (boxes). The decay
time of a two-state superposition is hbar / E.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .constants import G, HBAR, WATER_DENSITY
from .errors import InvalidInputError, NumericFailureError

DEFAULT_SOFTENING = 1e-9  # m; unsoftened points have a divergent self term


def _vec3(v, name):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be a finite 3-vector, got {v!r}")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise InvalidInputError(f"sphere radius must be > 0, got {self.radius}")
        if not (self.mass >= 0.0 and math.isfinite(self.mass)):
            raise InvalidInputError(f"sphere mass must be >= 0, got {self.mass}")

    @property
    def density(self):
        return self.mass / (4.0 / 3.0 * math.pi * self.radius ** 3)

    @property
    def bounding_radius(self):
        return self.radius

    def translated(self, offset):
        off = _vec3(offset, "offset")
        return Sphere(tuple(c + o for c, o in zip(self.center, off)),
                      self.radius, self.mass)


@dataclass(frozen=True)
class Box:
    center: tuple
    half_extents: tuple
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "box center"))
        object.__setattr__(self, "half_extents", _vec3(self.half_extents, "box half-extents"))
        if not all(h > 0.0 for h in self.half_extents):
            raise InvalidInputError(f"box half-extents must be > 0, got {self.half_extents}")
        if not (self.mass >= 0.0 and math.isfinite(self.mass)):
            raise InvalidInputError(f"box mass must be >= 0, got {self.mass}")

    @property
    def volume(self):
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz

    @property
    def density(self):
        return self.mass / self.volume

    @property
    def bounding_radius(self):
        return math.sqrt(sum(h * h for h in self.half_extents))

    @property
    def lo(self):
        return tuple(c - h for c, h in zip(self.center, self.half_extents))

    @property
    def hi(self):
        return tuple(c + h for c, h in zip(self.center, self.half_extents))

    def translated(self, offset):
        off = _vec3(offset, "offset")
        return Box(tuple(c + o for c, o in zip(self.center, off)),
                   self.half_extents, self.mass)


@dataclass(frozen=True)
class SoftPoint:
    center: tuple
    mass: float
    eps: float = DEFAULT_SOFTENING

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "point center"))
        if not (self.eps > 0.0 and math.isfinite(self.eps)):
            raise InvalidInputError(f"softening radius must be > 0, got {self.eps}")
        if not (self.mass >= 0.0 and math.isfinite(self.mass)):
            raise InvalidInputError(f"point mass must be >= 0, got {self.mass}")

    @property
    def bounding_radius(self):
        return 3.0 * self.eps

    def translated(self, offset):
        off = _vec3(offset, "offset")
        return SoftPoint(tuple(c + o for c, o in zip(self.center, off)),
                         self.mass, self.eps)


@dataclass(frozen=True)
class MassDensity:
    """A rigid mass configuration: a tuple of primitives."""

    primitives: tuple

    def __post_init__(self):
        prims = tuple(self.primitives)
        for p in prims:
            if not isinstance(p, (Sphere, Box, SoftPoint)):
                raise InvalidInputError(f"unsupported primitive {p!r}")
        object.__setattr__(self, "primitives", prims)

    @property
    def total_mass(self):
        return sum(p.mass for p in self.primitives)

    def translated(self, offset):
        return MassDensity(tuple(p.translated(offset) for p in self.primitives))

    @classmethod
    def empty(cls):
        return cls(())

    @classmethod
    def sphere(cls, center, radius, mass):
        return cls((Sphere(center, radius, mass),))

    @classmethod
    def box(cls, center, half_extents, mass):
        return cls((Box(center, half_extents, mass),))

    @classmethod
    def point(cls, center, mass, eps=DEFAULT_SOFTENING):
        return cls((SoftPoint(center, mass, eps),))


def water_sphere(diameter=1e-6, center=(0.0, 0.0, 0.0)):
    """Uniform water sphere of the given diameter."""
    r = diameter / 2.0
    mass = WATER_DENSITY * 4.0 / 3.0 * math.pi * r ** 3
    return MassDensity.sphere(center, r, mass)


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

def potential_at(density, point):
    """Newtonian potential of the configuration at one point, J/kg."""
    return float(potential_at_many(density, np.asarray(point, float)[None, :])[0])


def potential_at_many(density, points, impl=None):
    """Vectorized gravitational potential, shape (n_points,)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != 3 or not np.all(np.isfinite(points)):
        raise InvalidInputError("points must be finite 3-vectors")
    impl = impl if impl is not None else kernels.active
    out = np.zeros(points.shape[0])
    for prim in density.primitives:
        if prim.mass == 0.0:
            continue
        out += _primitive_potential(prim, points, impl)
    return out


def _primitive_potential(prim, points, impl):
    c = np.asarray(prim.center)
    if isinstance(prim, Sphere):
        r = np.sqrt(((points - c) ** 2).sum(axis=1))
        inside = r < prim.radius
        np.maximum(r, 1e-300, out=r)
        out = -G * prim.mass / r
        if inside.any():
            ri = np.sqrt(((points[inside] - c) ** 2).sum(axis=1))
            rr = prim.radius
            out[inside] = -G * prim.mass * (3.0 * rr * rr - ri * ri) / (2.0 * rr ** 3)
        return out
    if isinstance(prim, SoftPoint):
        r2 = ((points - c) ** 2).sum(axis=1)
        return -G * prim.mass / np.sqrt(r2 + prim.eps ** 2)
    # uniform box via adaptive octree quadrature
    integral = impl.box_integral_points(points, prim.lo, prim.hi)
    return -G * prim.density * integral


# ---------------------------------------------------------------------------
# pair interaction terms U(p, q) = G * integral rho_p rho_q / |x - y|
# ---------------------------------------------------------------------------

def _center_distance(p, q):
    return math.dist(p.center, q.center)


def _pair_key(p):
    if isinstance(p, Sphere):
        return (0, p.center, (p.radius,), p.mass)
    if isinstance(p, Box):
        return (1, p.center, p.half_extents, p.mass)
    return (2, p.center, (p.eps,), p.mass)


def _pair_interaction(p, q, rel_tol):
    # canonical argument order keeps U(p, q) == U(q, p) bitwise
    if _pair_key(q) < _pair_key(p):
        p, q = q, p
    if p.mass == 0.0 or q.mass == 0.0:
        return 0.0
    if isinstance(p, SoftPoint) or isinstance(q, SoftPoint):
        return _point_interaction(p, q)
    if isinstance(p, Sphere) and isinstance(q, Sphere):
        return _sphere_sphere(p, q)
    # at least one box
    if isinstance(p, Box):
        box, other = p, q
    else:
        box, other = q, p
    return _box_interaction(box, other, rel_tol)


def _point_interaction(p, q):
    if isinstance(p, SoftPoint) and isinstance(q, SoftPoint):
        if p == q:
            # Plummer self term: integral rho rho / |x-y| = (3 pi / 16) m^2 / eps
            return G * (3.0 * math.pi / 16.0) * p.mass ** 2 / p.eps
        d2 = _center_distance(p, q) ** 2
        return G * p.mass * q.mass / math.sqrt(d2 + p.eps ** 2 + q.eps ** 2)
    pt, other = (p, q) if isinstance(p, SoftPoint) else (q, p)
    # softening length is negligible against extended bodies
    phi = potential_at(MassDensity((other,)), pt.center)
    return pt.mass * (-phi)


def _sphere_sphere(p, q):
    d = _center_distance(p, q)
    if d >= p.radius + q.radius:
        return G * p.mass * q.mass / d
    if d <= 1e-7 * (p.radius + q.radius):
        if p.radius == q.radius:
            return 1.2 * G * p.mass * q.mass / p.radius
        d = 0.0
    return G * _overlapping_spheres(p, q, d)


def _overlapping_spheres(p, q, d):
    """integral rho_p(x) g_q(|x - c_q|) with g the 1/s kernel smeared by q."""
    m2, r2 = q.mass, q.radius

    def s_anti(s):
        # antiderivative of s * g_q(s)
        if s < r2:
            return m2 * (1.5 * r2 * r2 * s * s - 0.25 * s ** 4) / (2.0 * r2 ** 3)
        return m2 * s - 0.375 * m2 * r2

    r1 = p.radius
    rho1 = p.density
    if d == 0.0:
        def f0(r):
            g = m2 / r if r >= r2 else m2 * (3 * r2 * r2 - r * r) / (2 * r2 ** 3)
            return 4.0 * math.pi * rho1 * r * r * g
        pts = [x for x in (r2,) if 0.0 < x < r1]
        val, _ = integrate.quad(f0, 0.0, r1, points=pts or None, limit=200)
        return val

    def f(r):
        return (3.0 * p.mass / (2.0 * r1 ** 3 * d)) * r * (s_anti(d + r) - s_anti(abs(d - r)))

    pts = sorted({x for x in (r2 - d, d - r2, r2 + d) if 0.0 < x < r1})
    val, _ = integrate.quad(f, 0.0, r1, points=pts or None, limit=200)
    return val


def _box_interaction(box, other, rel_tol):
    """Adaptive Gauss integral of rho_box * (-phi_other) over the box."""
    other_density = MassDensity((other,))
    lo = np.asarray(box.lo)
    hi = np.asarray(box.hi)

    def total_for(n):
        pts, wts = _box_gauss_nodes(lo, hi, n)
        phi = potential_at_many(other_density, pts)
        return float(box.density * np.dot(wts, -phi))

    prev = None
    achieved = math.inf
    for n in (2, 4, 8, 16):
        cur = total_for(n)
        if prev is not None:
            scale = max(abs(cur), abs(prev), 1e-300)
            achieved = abs(cur - prev) / scale
            if achieved <= rel_tol:
                return cur
        prev = cur
    raise NumericFailureError(
        f"box pair quadrature did not reach rel_tol={rel_tol:g}", achieved_tol=achieved)


_GAUSS2 = 1.0 / math.sqrt(3.0)


def _box_gauss_nodes(lo, hi, n):
    """Tensor 2-point Gauss nodes on an n^3 subdivision of the box."""
    edges = [np.linspace(lo[k], hi[k], n + 1) for k in range(3)]
    axes = []
    for k in range(3):
        c = 0.5 * (edges[k][1:] + edges[k][:-1])
        h = 0.5 * (edges[k][1:] - edges[k][:-1])
        axes.append(np.concatenate([c - h * _GAUSS2, c + h * _GAUSS2]))
    widths = [(hi[k] - lo[k]) / (2.0 * n) for k in range(3)]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    w = widths[0] * widths[1] * widths[2]
    return pts, np.full(pts.shape[0], w)


# ---------------------------------------------------------------------------
# coupling energies and decay times
# ---------------------------------------------------------------------------

def coupling_energy(a, b, rel_tol=1e-4):
    """Diosi-Penrose coupling energy between two mass configurations, J.

    Symmetric, zero for identical configurations, never negative (the
    1/|x-y| kernel is positive semi-definite); tiny negative quadrature
    residue is clamped to zero.
    """
    if not isinstance(a, MassDensity) or not isinstance(b, MassDensity):
        raise InvalidInputError("coupling_energy expects MassDensity arguments")
    if a == b:
        return 0.0
    total = 0.0
    scale = 0.0
    # self terms
    for prims, sign in ((a.primitives, 1.0), (b.primitives, 1.0)):
        n = len(prims)
        for i in range(n):
            for j in range(i, n):
                u = _pair_interaction(prims[i], prims[j], rel_tol)
                u = u if i == j else 2.0 * u
                total += sign * u
                scale += abs(u)
    # cross terms
    for p in a.primitives:
        for q in b.primitives:
            u = _pair_interaction(p, q, rel_tol)
            total -= 2.0 * u
            scale += 2.0 * abs(u)
    if total < 0.0:
        if scale > 0.0 and total > -10.0 * rel_tol * scale:
            return 0.0
        raise NumericFailureError(
            f"coupling energy came out negative ({total:g} J) beyond the "
            f"quadrature tolerance", achieved_tol=abs(total) / max(scale, 1e-300))
    return total


def couplings_matrix(densities, rel_tol=1e-4):
    """Symmetric coupling matrix E[k, l] with zero diagonal, J."""
    densities = list(densities)
    if len(densities) < 2:
        raise InvalidInputError("couplings_matrix needs at least 2 densities")
    n = len(densities)
    e = np.zeros((n, n))
    for k in range(n):
        for l in range(k + 1, n):
            e[k, l] = e[l, k] = coupling_energy(densities[k], densities[l], rel_tol)
    return e


def decay_time(energy):
    """Superposition lifetime tau = hbar / E; infinite for E = 0."""
    if not math.isfinite(energy) or energy < 0.0:
        raise InvalidInputError(f"coupling energy must be >= 0, got {energy!r}")
    if energy == 0.0:
        return math.inf
    return HBAR / energy
