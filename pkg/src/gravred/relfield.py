"""Space-time representation of the relativistic engine.

Classical scenarios are complete, never-superposed histories: every
item (rigid body, photon, marker carrier) has a world line over the
whole experiment and piecewise-constant marker values (switch states,
applied fields). Scenarios that are indistinguishable by local
observables at a space-time point are bundled into one effective state
there; the bundled squared amplitudes form the location-dependent
amplitude field.

The coupling field between two scenarios at a point x measures the
difference of their space-time geometries,

    field(x) = -(1 / hbar c) * drho(x) * dphi(x),

with drho from the instantaneous body poses and dphi either from the
same poses (quasi-static) or from retarded source positions
(slow-motion, 00-dominant). In the default 1+1 grid the transverse
directions are integrated out, so a cell value is an event probability
per unit ct once multiplied by the cell's x extent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import massmodel
from .constants import C, HBAR
from .errors import InsufficientHistoryError, InvalidInputError

POSE_QUANTUM = 1e-13   # m, distinguishability quantum for body poses
NORM_TOL = 1e-12


# ---------------------------------------------------------------------------
# spacetime points and intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpacetimePoint:
    """(ct, x) with 1 or 3 spatial coordinates, all in meters."""

    ct: float
    x: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in (self.x if hasattr(self.x, "__len__") else (self.x,)))
        if len(x) not in (1, 3) or not all(math.isfinite(v) for v in x) \
                or not math.isfinite(self.ct):
            raise InvalidInputError(f"bad spacetime point ct={self.ct} x={self.x}")
        object.__setattr__(self, "x", x)

    @classmethod
    def at_time(cls, t, x):
        return cls(C * t, x)

    @property
    def t(self):
        return self.ct / C

    @property
    def spatial3(self):
        return np.array(self.x + (0.0,) * (3 - len(self.x)))


def interval_squared(a, b):
    """Minkowski s^2 = (d ct)^2 - |dx|^2; positive for timelike pairs."""
    if len(a.x) != len(b.x):
        raise InvalidInputError("points live in different spatial dimensions")
    dct = a.ct - b.ct
    dx2 = sum((u - v) ** 2 for u, v in zip(a.x, b.x))
    return dct * dct - dx2


def minkowski_interval(a, b):
    """Invariant interval in meters; NaN flags spacelike separation."""
    s2 = interval_squared(a, b)
    if s2 < 0.0:
        return math.nan
    return math.sqrt(s2)


def is_spacelike(a, b):
    return interval_squared(a, b) < 0.0


def boost(point, beta):
    """Boost along x^1 with velocity beta*c."""
    if not -1.0 < beta < 1.0:
        raise InvalidInputError(f"beta must be in (-1, 1), got {beta}")
    g = 1.0 / math.sqrt(1.0 - beta * beta)
    ct = g * (point.ct - beta * point.x[0])
    x1 = g * (point.x[0] - beta * point.ct)
    return SpacetimePoint(ct, (x1,) + point.x[1:])


# ---------------------------------------------------------------------------
# world items and classical scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Marker:
    """Piecewise-constant local observable (switch state, applied field)."""

    initial: object
    switches: tuple = ()   # ((time_s, value), ...) ascending

    def value_at(self, t):
        v = self.initial
        for ts, val in self.switches:
            if t >= ts:
                v = val
            else:
                break
        return v


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear center position (3-vector) vs time, clamped
    outside the knots; segment speeds must stay below c."""

    times: tuple
    positions: tuple   # of 3-tuples

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        ps = tuple(tuple(float(c) for c in p) for p in self.positions)
        if len(ts) != len(ps) or len(ts) == 0:
            raise InvalidInputError("trajectory needs matching times/positions")
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise InvalidInputError("trajectory times must be strictly increasing")
        for (t1, p1), (t2, p2) in zip(zip(ts, ps), zip(ts[1:], ps[1:])):
            speed = math.dist(p1, p2) / (t2 - t1)
            if speed >= C:
                raise InvalidInputError(f"trajectory segment exceeds c ({speed:.3g} m/s)")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "positions", ps)

    @classmethod
    def static(cls, position):
        return cls((0.0,), (tuple(position),))

    def position_at(self, t):
        ts = self.times
        ps = self.positions
        if t <= ts[0]:
            return np.asarray(ps[0])
        if t >= ts[-1]:
            return np.asarray(ps[-1])
        i = np.searchsorted(ts, t, side="right") - 1
        f = (t - ts[i]) / (ts[i + 1] - ts[i])
        a, b = np.asarray(ps[i]), np.asarray(ps[i + 1])
        return a + f * (b - a)

    def positions_at(self, times):
        times = np.asarray(times)
        out = np.empty((len(times), 3))
        for k in range(3):
            out[:, k] = np.interp(times, self.times, [p[k] for p in self.positions])
        return out


@dataclass(frozen=True)
class WorldItem:
    """One tracked object: an optional rigid body (in body frame,
    centered on the trajectory) plus local markers."""

    name: str
    track: Trajectory
    body: object = None              # massmodel.MassDensity or None
    markers: tuple = ()              # ((name, Marker), ...)
    locality_radius: float = 0.0     # extra reach for massless items
    coverage: tuple = None           # (t_min, t_max) of known history

    @property
    def bounding_radius(self):
        r = self.locality_radius
        if self.body is not None:
            r = max(r, max((p.bounding_radius for p in self.body.primitives),
                           default=0.0))
        return r

    def marker_values(self, t):
        return tuple((name, m.value_at(t)) for name, m in self.markers)


@dataclass(frozen=True)
class ClassicalScenario:
    """A complete world-line history of all items; never superposed."""

    name: str
    items: tuple

    def __post_init__(self):
        if not self.items:
            raise InvalidInputError("scenario needs at least one item")
        object.__setattr__(self, "items", tuple(self.items))


# ---------------------------------------------------------------------------
# local configurations and bundling
# ---------------------------------------------------------------------------

def local_configuration(scenario, point, radius, pose_quantum=POSE_QUANTUM):
    """Canonical descriptor of all local observables near the point.

    Items whose center lies within ``radius + bounding_radius`` of the
    point contribute their pose (quantized to ``pose_quantum``) and
    their current marker values; everything else is invisible locally.
    """
    t = point.t
    p3 = point.spatial3
    entries = []
    for idx, item in enumerate(scenario.items):
        pos = item.track.position_at(t)
        if math.dist(pos, p3) <= radius + item.bounding_radius:
            qpos = tuple(int(round(c / pose_quantum)) for c in pos)
            entries.append((idx, qpos, item.marker_values(t)))
    return tuple(entries)


@dataclass(frozen=True)
class BundlePartition:
    """Partition of scenario indices into locally indistinguishable
    bundles, with the bundled squared amplitudes."""

    blocks: tuple
    weights: tuple

    def __post_init__(self):
        seen = [i for blk in self.blocks for i in blk]
        if sorted(seen) != list(range(len(seen))):
            raise InvalidInputError("bundle blocks must partition the scenarios")
        if abs(sum(self.weights) - 1.0) > NORM_TOL:
            raise InvalidInputError("bundled amplitudes must sum to 1")

    @property
    def dimension(self):
        return len(self.blocks)

    def block_of(self, scenario_index):
        for b, blk in enumerate(self.blocks):
            if scenario_index in blk:
                return b
        raise InvalidInputError(f"scenario {scenario_index} not in partition")


def bundle_at(point, scenarios, weights, radius, pose_quantum=POSE_QUANTUM):
    """Group scenarios with equal local configurations at the point."""
    if abs(sum(weights) - 1.0) > NORM_TOL:
        raise InvalidInputError("amplitudes must be normalized")
    groups = {}
    for i, scen in enumerate(scenarios):
        desc = local_configuration(scen, point, radius, pose_quantum)
        groups.setdefault(desc, []).append(i)
    blocks = sorted((tuple(v) for v in groups.values()), key=lambda b: b[0])
    wsum = tuple(float(sum(weights[i] for i in blk)) for blk in blocks)
    return BundlePartition(tuple(blocks), wsum)


def amplitude_field_at(point, scenarios, weights, radius, pose_quantum=POSE_QUANTUM):
    """Bundled amplitude tuple and local dimension D(x)."""
    part = bundle_at(point, scenarios, weights, radius, pose_quantum)
    return part.weights, part.dimension


# ---------------------------------------------------------------------------
# coupling field evaluation
# ---------------------------------------------------------------------------

def _signed_sources(scen_a, scen_b, t):
    """Signed rigid-body sources wherever the two scenarios' poses differ."""
    if len(scen_a.items) != len(scen_b.items):
        raise InvalidInputError("scenario item lists must be parallel")
    sources = []
    for item_a, item_b in zip(scen_a.items, scen_b.items):
        if item_a.body is None and item_b.body is None:
            continue
        if item_a.body != item_b.body:
            raise InvalidInputError("scenarios must share the same rigid bodies")
        if item_a.body is None or item_a.body.total_mass == 0.0:
            continue
        pos_a = item_a.track.position_at(t)
        pos_b = item_b.track.position_at(t)
        if np.array_equal(pos_a, pos_b):
            continue
        for prim in item_a.body.primitives:
            sources.append((+1.0, prim, pos_a, item_a))
            sources.append((-1.0, prim, pos_b, item_b))
    return sources


def _slice_terms(prim, pose, x1, n_theta=8, n_r=3):
    """Quadrature nodes/weights of int dx2 dx3 rho(x) f(x) on the plane
    x^1 = x1 through the primitive placed at ``pose``; the density is
    folded into the weights."""
    c = np.asarray(prim.center) + np.asarray(pose)
    dx1 = x1 - c[0]
    if isinstance(prim, massmodel.Sphere):
        if abs(dx1) >= prim.radius:
            return None
        disk_r = math.sqrt(prim.radius ** 2 - dx1 * dx1)
        # radial nodes on u = r^2 (flat measure), uniform angle
        u_nodes, u_w = np.polynomial.legendre.leggauss(n_r)
        u = 0.5 * (u_nodes + 1.0) * disk_r ** 2
        uw = 0.5 * u_w * disk_r ** 2
        theta = (np.arange(n_theta) + 0.5) * (2.0 * math.pi / n_theta)
        rr = np.sqrt(u)
        pts = np.empty((n_r * n_theta, 3))
        wts = np.empty(n_r * n_theta)
        k = 0
        for i in range(n_r):
            for j in range(n_theta):
                pts[k] = (x1, c[1] + rr[i] * math.cos(theta[j]),
                          c[2] + rr[i] * math.sin(theta[j]))
                wts[k] = prim.density * uw[i] * (math.pi / n_theta)
                k += 1
        return pts, wts
    if isinstance(prim, massmodel.Box):
        hx, hy, hz = prim.half_extents
        if abs(dx1) >= hx:
            return None
        g_nodes, g_w = np.polynomial.legendre.leggauss(3)
        ys = c[1] + g_nodes * hy
        yw = g_w * hy
        zs = c[2] + g_nodes * hz
        zw = g_w * hz
        pts = np.array([(x1, y, z) for y in ys for z in zs])
        wts = prim.density * np.array([wy * wz for wy in yw for wz in zw])
        return pts, wts
    if isinstance(prim, massmodel.SoftPoint):
        # Plummer line density lambda(dx1) integrated over the plane
        lam = prim.mass / (2.0 * prim.eps) * (1.0 + (dx1 / prim.eps) ** 2) ** -1.5
        if lam == 0.0:
            return None
        return np.array([(x1, c[1], c[2])]), np.array([lam])
    raise InvalidInputError(f"unsupported primitive {prim!r}")


def _dphi_quasistatic(sources, pts):
    phi = np.zeros(len(pts))
    for sign, prim, pose, _item in sources:
        shifted = prim.translated(pose)
        phi += sign * massmodel.potential_at_many(
            massmodel.MassDensity((shifted,)), pts)
    return phi


def _retarded_time(item, prim, point3, t):
    """Solve t_ret = t - |x - c(t_ret)| / c by fixed-point iteration."""
    t_ret = t
    for _ in range(12):
        pos = item.track.position_at(t_ret) + np.asarray(prim.center)
        t_new = t - math.dist(point3, pos) / C
        if abs(t_new - t_ret) < 1e-18:
            t_ret = t_new
            break
        t_ret = t_new
    if item.coverage is not None and t_ret < item.coverage[0]:
        raise InsufficientHistoryError(
            f"retarded evaluation needs {item.name!r} history at t={t_ret:.3e}s, "
            f"coverage starts at {item.coverage[0]:.3e}s")
    return t_ret


def _dphi_retarded(sources, pts, t):
    phi = np.zeros(len(pts))
    for sign, prim, pose, item in sources:
        posed = prim.translated(pose)
        for i, p in enumerate(pts):
            t_ret = _retarded_time(item, prim, p, t)
            ret_pose = item.track.position_at(t_ret)
            ret_prim = prim.translated(ret_pose)
            phi[i] += sign * massmodel.potential_at(
                massmodel.MassDensity((ret_prim,)), p)
        del posed
    return phi


def _field_value(point, scen_a, scen_b, retarded, pointwise):
    t = point.t
    sources = _signed_sources(scen_a, scen_b, t)
    if not sources:
        return 0.0
    if pointwise:
        p3 = point.spatial3
        drho = 0.0
        for sign, prim, pose, _item in sources:
            drho += sign * _density_at(prim, pose, p3)
        if drho == 0.0:
            return 0.0
        pts = p3[None, :]
        dphi = (_dphi_retarded(sources, pts, t) if retarded
                else _dphi_quasistatic(sources, pts))
        return float(-drho * dphi[0] / (HBAR * C))
    # transverse-integrated 1+1 value at x^1
    x1 = point.x[0]
    total = 0.0
    for sign, prim, pose, _item in sources:
        terms = _slice_terms(prim, pose, x1)
        if terms is None:
            continue
        pts, wts = terms
        dphi = (_dphi_retarded(sources, pts, t) if retarded
                else _dphi_quasistatic(sources, pts))
        total += sign * float(np.dot(wts, dphi))
    return -total / (HBAR * C)


def _density_at(prim, pose, p3):
    c = np.asarray(prim.center) + np.asarray(pose)
    if isinstance(prim, massmodel.Sphere):
        return prim.density if math.dist(c, p3) < prim.radius else 0.0
    if isinstance(prim, massmodel.Box):
        d = np.abs(p3 - c)
        return prim.density if np.all(d < prim.half_extents) else 0.0
    r2 = float(((p3 - c) ** 2).sum())
    eps = prim.eps
    return 3.0 * prim.mass / (4.0 * math.pi * eps ** 3) * (1.0 + r2 / eps ** 2) ** -2.5


def field_quasistatic_at(point, scen_a, scen_b, pointwise=False):
    """Coupling field between two scenarios from instantaneous poses.

    With ``pointwise=False`` (the 1+1 default) transverse dimensions
    are integrated out: the value is int dx2 dx3 of the field, 1/m^2.
    Pointwise values are the bare field density, 1/m^4.
    """
    return _field_value(point, scen_a, scen_b, retarded=False, pointwise=pointwise)


def field_retarded_at(point, scen_a, scen_b, pointwise=False):
    """Slow-motion retarded evaluation: dphi from retarded poses."""
    return _field_value(point, scen_a, scen_b, retarded=True, pointwise=pointwise)


# ---------------------------------------------------------------------------
# spacetime grid and the sampled model driving the wave engine
# ---------------------------------------------------------------------------

class SpacetimeGrid:
    """Regular grid over (ct, x); 1+1 by default, 3+1 optional."""

    def __init__(self, ct_min, ct_max, n_t, x_min, x_max, n_x):
        x_min = tuple(np.atleast_1d(np.asarray(x_min, float)))
        x_max = tuple(np.atleast_1d(np.asarray(x_max, float)))
        n_x = tuple(np.atleast_1d(np.asarray(n_x, int)))
        if len(x_min) not in (1, 3) or len(x_min) != len(x_max) != len(n_x):
            raise InvalidInputError("grid spatial spec must be 1- or 3-dimensional")
        if not (ct_max > ct_min and n_t >= 1 and all(n >= 1 for n in n_x)):
            raise InvalidInputError("bad grid extents")
        self.ct_min, self.ct_max, self.n_t = float(ct_min), float(ct_max), int(n_t)
        self.x_min, self.x_max, self.n_x = x_min, x_max, n_x
        self.dct = (ct_max - ct_min) / n_t
        self.dx = tuple((hi - lo) / n for lo, hi, n in zip(x_min, x_max, n_x))
        self.ct_centers = ct_min + (np.arange(n_t) + 0.5) * self.dct
        axes = [lo + (np.arange(n) + 0.5) * d
                for lo, n, d in zip(x_min, n_x, self.dx)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.spatial_centers = np.column_stack([m.ravel() for m in mesh])
        self.n_spatial = self.spatial_centers.shape[0]
        self.n_cells = self.n_t * self.n_spatial
        self.cell_ct = np.repeat(self.ct_centers, self.n_spatial)
        self.cell_x = np.tile(self.spatial_centers, (self.n_t, 1))

    @classmethod
    def line(cls, x_min, x_max, dx, ct_min, ct_max, dct):
        n_x = max(1, int(round((x_max - x_min) / dx)))
        n_t = max(1, int(round((ct_max - ct_min) / dct)))
        return cls(ct_min, ct_max, n_t, (x_min,), (x_max,), (n_x,))

    @property
    def sdim(self):
        return len(self.n_x)

    def cell_point(self, c):
        return SpacetimePoint(float(self.cell_ct[c]), tuple(self.cell_x[c]))

    def cell_index(self, point):
        it = int((point.ct - self.ct_min) // self.dct)
        it = min(max(it, 0), self.n_t - 1)
        idx = 0
        for k in range(self.sdim):
            ik = int((point.x[k] - self.x_min[k]) // self.dx[k])
            ik = min(max(ik, 0), self.n_x[k] - 1)
            idx = idx * self.n_x[k] + ik
        return it * self.n_spatial + idx

    def spatial_volume(self):
        v = 1.0
        for d in self.dx:
            v *= d
        return v


class GridModel:
    """Grid-sampled inputs of the wave engine: per-cell bundle
    partitions and the signed cell-integrated coupling field.

    ``cell_rate[c, a, b]`` is the event probability per unit ct between
    local bundles a, b at cell c (already integrated over the cell's
    spatial extent), so a front crossing the cell contributes
    ``cell_rate * share * dct``.
    """

    def __init__(self, grid, scenarios, weights, part, nb, cell_rate,
                 device_cells=(), gain=1.0):
        self.grid = grid
        self.scenarios = tuple(scenarios)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.part = part
        self.nb = nb
        self.cell_rate = cell_rate
        self.device_cells = tuple(sorted(int(c) for c in device_cells))
        self.gain = gain

    @property
    def nbmax(self):
        return self.cell_rate.shape[1]

    def bundled_field(self, weights=None):
        w = self.weights if weights is None else np.asarray(weights)
        from .kernels import _numpy as knp
        return knp.bundle_field(w, self.part, self.nbmax)

    def field_rows(self):
        """CSV-ready rows (x1, ct, pair, value) of the sampled field."""
        rows = []
        for c in range(self.grid.n_cells):
            for a in range(int(self.nb[c])):
                for b in range(a + 1, int(self.nb[c])):
                    v = self.cell_rate[c, a, b]
                    if v != 0.0:
                        rows.append((float(self.grid.cell_x[c][0]),
                                     float(self.grid.cell_ct[c]),
                                     f"{a + 1}-{b + 1}", float(v)))
        return rows

    def bundle_rows(self):
        amp = self.bundled_field()
        rows = []
        for c in range(self.grid.n_cells):
            d = int(self.nb[c])
            blocks = {}
            for i in range(self.part.shape[1]):
                blocks.setdefault(int(self.part[c, i]), []).append(i + 1)
            pstr = "|".join(",".join(map(str, blocks[b])) for b in range(d))
            tup = ",".join(f"{amp[c, b]:.12g}" for b in range(d))
            rows.append((float(self.grid.cell_x[c][0]),
                         float(self.grid.cell_ct[c]), pstr, tup))
        return rows


def build_grid_model(scenarios, weights, grid, gain=1.0, evaluator="quasistatic",
                     radius=None, pose_quantum=POSE_QUANTUM, device_positions=(),
                     x1_quad=3):
    """Sample bundling partitions and the coupling field on the grid."""
    scenarios = tuple(scenarios)
    n_scen = len(scenarios)
    if n_scen < 1:
        raise InvalidInputError("need at least one scenario")
    if abs(sum(weights) - 1.0) > NORM_TOL:
        raise InvalidInputError("scenario amplitudes must be normalized")
    if evaluator not in ("quasistatic", "retarded"):
        raise InvalidInputError(f"unknown evaluator {evaluator!r}")
    if radius is None:
        radius = max(max(grid.dx), grid.dct)

    n_cells = grid.n_cells
    part = np.zeros((n_cells, n_scen), dtype=np.int16)
    nb = np.zeros(n_cells, dtype=np.int8)
    reps = np.zeros((n_cells, n_scen), dtype=np.int16)  # representative per bundle

    for c in range(n_cells):
        point = grid.cell_point(c)
        groups = {}
        for i, scen in enumerate(scenarios):
            desc = local_configuration(scen, point, radius, pose_quantum)
            groups.setdefault(desc, []).append(i)
        blocks = sorted(groups.values(), key=lambda b: b[0])
        nb[c] = len(blocks)
        for b, blk in enumerate(blocks):
            reps[c, b] = blk[0]
            for i in blk:
                part[c, i] = b

    nbmax = int(nb.max())
    cell_rate = np.zeros((n_cells, nbmax, nbmax))
    retarded = evaluator == "retarded"
    g_nodes, g_w = np.polynomial.legendre.leggauss(x1_quad)
    for c in range(n_cells):
        d = int(nb[c])
        if d < 2:
            continue
        ct = grid.cell_ct[c]
        x1c = grid.cell_x[c][0]
        hx = grid.dx[0] / 2.0
        for a in range(d):
            for b in range(a + 1, d):
                ia, ib = int(reps[c, a]), int(reps[c, b])
                if grid.sdim == 1:
                    val = 0.0
                    for gn, gw in zip(g_nodes, g_w):
                        p = SpacetimePoint(ct, (x1c + gn * hx,))
                        val += gw * hx * _field_value(
                            p, scenarios[ia], scenarios[ib], retarded, False)
                else:
                    p = SpacetimePoint(ct, tuple(grid.cell_x[c]))
                    val = _field_value(p, scenarios[ia], scenarios[ib],
                                       retarded, True) * grid.spatial_volume()
                cell_rate[c, a, b] = cell_rate[c, b, a] = gain * val

    device_cells = [grid.cell_index(p) for p in device_positions]
    return GridModel(grid, scenarios, weights, part, nb, cell_rate,
                     device_cells, gain)
