import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gravred import massmodel as mm
from gravred.constants import G, HBAR
from gravred.errors import InvalidInputError


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def box_potential_oracle(lo, hi, point, n=40):
    """Midpoint-grid integral of 1/|p-y| over the box (independent path)."""
    axes = [np.linspace(lo[k], hi[k], n, endpoint=False) + (hi[k] - lo[k]) / (2 * n)
            for k in range(3)]
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    r = np.sqrt(((pts - np.asarray(point)) ** 2).sum(axis=1))
    vol = np.prod([(hi[k] - lo[k]) / n for k in range(3)])
    return (1.0 / r).sum() * vol


CUBE_SELF = 1.88231264438966  # integral over unit cube^2 of 1/|x-y|


def voxel_coupling_oracle(centers_a, centers_b, h, rho):
    """Brute-force voxel double sum of G * int int drho drho / |x-y|.

    ``centers_a``/``centers_b`` are midpoints of equal cubic voxels of
    side h filled with density rho for the two configurations; the
    difference density is +rho on a-only voxels and -rho on b-only
    voxels. Same-voxel singular terms use the exact cube self integral.
    """
    key = lambda c: tuple(np.round(c / (h / 4)).astype(int))
    set_a = {key(c) for c in centers_a}
    set_b = {key(c) for c in centers_b}
    signs = []
    pts = []
    for c in centers_a:
        if key(c) not in set_b:
            pts.append(c)
            signs.append(1.0)
    for c in centers_b:
        if key(c) not in set_a:
            pts.append(c)
            signs.append(-1.0)
    pts = np.asarray(pts)
    signs = np.asarray(signs)
    m = rho * h ** 3
    total = 0.0
    for i in range(len(pts)):
        r = np.sqrt(((pts - pts[i]) ** 2).sum(axis=1))
        r[i] = np.inf
        total += signs[i] * (signs / r).sum() * m * m
    total += len(pts) * rho * rho * CUBE_SELF * h ** 5
    return G * total


def sphere_voxels(center, radius, h):
    n = int(np.ceil(radius / h)) + 1
    g = (np.arange(-n, n + 1) + 0.5) * h
    xx, yy, zz = np.meshgrid(g, g, g, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    inside = (pts ** 2).sum(axis=1) <= radius ** 2
    return pts[inside] + np.asarray(center)


# ---------------------------------------------------------------------------
# potential_at
# ---------------------------------------------------------------------------

def test_sphere_exterior_equals_point_mass():
    d = mm.MassDensity.sphere((0, 0, 0), 1.0, 1.0)
    assert mm.potential_at(d, (2, 0, 0)) == pytest.approx(-G / 2.0, rel=1e-14)


def test_sphere_interior_closed_form():
    d = mm.MassDensity.sphere((0, 0, 0), 1.0, 2.0)
    # at r = 0.5: -G m (3 R^2 - r^2) / (2 R^3)
    expect = -G * 2.0 * (3.0 - 0.25) / 2.0
    assert mm.potential_at(d, (0.5, 0, 0)) == pytest.approx(expect, rel=1e-14)


def test_empty_density_zero_potential():
    assert mm.potential_at(mm.MassDensity.empty(), (1.0, 2.0, 3.0)) == 0.0


def test_box_far_field_within_tenth_percent():
    d = mm.MassDensity.box((0, 0, 0), (0.1, 0.1, 0.1), 1.0)
    v = mm.potential_at(d, (5, 0, 0))
    assert abs(v - (-G / 5.0)) / (G / 5.0) < 1e-3


def test_box_potential_matches_grid_oracle_inside_and_out():
    lo = np.array([-0.1, -0.2, -0.15])
    hi = np.array([0.1, 0.2, 0.15])
    box = mm.Box(tuple((lo + hi) / 2), tuple((hi - lo) / 2), 3.0)
    d = mm.MassDensity((box,))
    rho = box.density
    for p in [(0.5, 0.1, -0.3), (0.05, 0.0, 0.0), (0.09, 0.19, 0.1)]:
        got = mm.potential_at(d, p)
        want = -G * rho * box_potential_oracle(lo, hi, p, n=60)
        assert got == pytest.approx(want, rel=5e-3)


def test_non_finite_point_rejected():
    d = mm.MassDensity.sphere((0, 0, 0), 1.0, 1.0)
    with pytest.raises(InvalidInputError):
        mm.potential_at(d, (np.nan, 0, 0))


def test_soft_point_plummer_potential():
    d = mm.MassDensity.point((0, 0, 0), 1.0, eps=1e-3)
    assert mm.potential_at(d, (1, 0, 0)) == pytest.approx(
        -G / math.sqrt(1.0 + 1e-6), rel=1e-14)


# ---------------------------------------------------------------------------
# coupling_energy
# ---------------------------------------------------------------------------

def test_identical_densities_zero():
    d = mm.MassDensity.sphere((0.3, 0, 0), 0.2, 5.0)
    assert mm.coupling_energy(d, d) == 0.0


def test_sphere_pair_analytic_value():
    a = mm.MassDensity.sphere((0, 0, 0), 0.1, 1.0)
    b = mm.MassDensity.sphere((1, 0, 0), 0.1, 1.0)
    # (12/5) G m^2 / R - 2 G m^2 / d = 24 G - 2 G
    assert mm.coupling_energy(a, b) == pytest.approx(22.0 * G, rel=1e-12)


def test_sphere_pair_against_voxel_oracle():
    radius, dist = 0.1, 0.25
    a = mm.MassDensity.sphere((0, 0, 0), radius, 1.0)
    b = mm.MassDensity.sphere((dist, 0, 0), radius, 1.0)
    got = mm.coupling_energy(a, b)
    h = radius / 7.5
    va = sphere_voxels((0, 0, 0), radius, h)
    vb = sphere_voxels((dist, 0, 0), radius, h)
    # keep the voxelized mass equal to the sphere mass
    rho_eff = 1.0 / (len(va) * h ** 3)
    want = voxel_coupling_oracle(va, vb, h, rho_eff)
    assert got == pytest.approx(want, rel=2e-2)


@pytest.mark.parametrize("d_over_r", [2.5, 5.0, 10.0, 100.0])
def test_sphere_pair_formula_vs_quadrature(d_over_r):
    radius = 0.05
    mass = 2.0
    a = mm.MassDensity.sphere((0, 0, 0), radius, mass)
    b = mm.MassDensity.sphere((d_over_r * radius, 0, 0), radius, mass)
    analytic = 2.4 * G * mass ** 2 / radius - 2.0 * G * mass ** 2 / (d_over_r * radius)
    assert mm.coupling_energy(a, b) == pytest.approx(analytic, rel=5e-3)


def test_swap_arguments_symmetric_bitwise():
    a = mm.MassDensity((mm.Sphere((0, 0, 0), 0.3, 1.0),
                        mm.Box((1, 0, 0), (0.1, 0.2, 0.1), 2.0)))
    b = mm.MassDensity((mm.Sphere((0.2, 0, 0), 0.3, 1.0),
                        mm.Box((1.1, 0, 0), (0.1, 0.2, 0.1), 2.0)))
    e1 = mm.coupling_energy(a, b, rel_tol=1e-3)
    e2 = mm.coupling_energy(b, a, rel_tol=1e-3)
    assert e1 == pytest.approx(e2, rel=1e-12)


def test_shifted_cube_pair_slab_decomposition():
    # shifted cube: coupling equals twice the non-overlap slab self term
    # minus twice the slab cross term
    side, shift = 0.04, 0.01
    a = mm.MassDensity.box((0, 0, 0), (side / 2,) * 3, 1.0)
    b = a.translated((shift, 0, 0))
    e = mm.coupling_energy(a, b)
    rho = a.primitives[0].density
    slab_mass = rho * shift * side * side
    sa = mm.Box((-(side - shift) / 2 - shift / 2 + shift / 2 - shift / 2, 0, 0),
                (shift / 2, side / 2, side / 2), slab_mass)
    sa = mm.Box((-side / 2 + shift / 2, 0, 0), (shift / 2, side / 2, side / 2), slab_mass)
    sb = mm.Box((side / 2 + shift / 2, 0, 0), (shift / 2, side / 2, side / 2), slab_mass)
    uaa = mm._pair_interaction(sa, sa, 1e-4)
    uab = mm._pair_interaction(sa, sb, 1e-4)
    assert e == pytest.approx(2 * uaa - 2 * uab, rel=5e-3)


def test_shifted_cube_pair_against_voxel_oracle():
    side, shift = 0.04, 0.01
    a = mm.MassDensity.box((0, 0, 0), (side / 2,) * 3, 1.0)
    b = a.translated((shift, 0, 0))
    got = mm.coupling_energy(a, b)
    n = 16
    h = side / n
    g = (np.arange(n) + 0.5) * h - side / 2
    xx, yy, zz = np.meshgrid(g, g, g, indexing="ij")
    va = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])
    vb = va + np.array([shift, 0, 0])
    rho = a.primitives[0].density
    want = voxel_coupling_oracle(va, vb, h, rho)
    assert got == pytest.approx(want, rel=5e-3)


def test_monotone_in_separation_for_rigid_translates():
    base_sphere = mm.MassDensity.sphere((0, 0, 0), 0.1, 1.0)
    base_box = mm.MassDensity.box((0, 0, 0), (0.05, 0.04, 0.06), 1.0)
    for base in (base_sphere, base_box):
        seps = [0.5, 0.3, 0.2, 0.12, 0.06, 0.02, 0.005]
        vals = [mm.coupling_energy(base, base.translated((s, 0, 0))) for s in seps]
        assert all(v >= 0.0 for v in vals)
        assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))


def test_soft_point_self_term_finite_and_softening_required():
    a = mm.MassDensity.point((0, 0, 0), 1.0, eps=1e-6)
    b = mm.MassDensity.point((1, 0, 0), 1.0, eps=1e-6)
    e = mm.coupling_energy(a, b)
    # dominated by the two Plummer self terms
    expect = 2 * G * (3 * math.pi / 16) / 1e-6 - 2 * G / math.sqrt(1 + 2e-12)
    assert e == pytest.approx(expect, rel=1e-9)
    with pytest.raises(InvalidInputError):
        mm.SoftPoint((0, 0, 0), 1.0, eps=0.0)


@settings(max_examples=30, deadline=None)
@given(
    r1=st.floats(0.05, 0.3), r2=st.floats(0.05, 0.3),
    m1=st.floats(0.1, 5.0), m2=st.floats(0.1, 5.0),
    dx=st.floats(-0.6, 0.6), dy=st.floats(-0.3, 0.3),
)
def test_sphere_pairs_symmetric_and_nonnegative(r1, r2, m1, m2, dx, dy):
    a = mm.MassDensity.sphere((0, 0, 0), r1, m1)
    b = mm.MassDensity.sphere((dx, dy, 0), r2, m2)
    e_ab = mm.coupling_energy(a, b)
    e_ba = mm.coupling_energy(b, a)
    assert e_ab >= 0.0
    assert e_ab == pytest.approx(e_ba, rel=1e-12, abs=1e-30)


# ---------------------------------------------------------------------------
# couplings_matrix / decay_time
# ---------------------------------------------------------------------------

def test_matrix_identical_pair_is_zero():
    d = mm.MassDensity.sphere((0, 0, 0), 0.1, 1.0)
    e = mm.couplings_matrix([d, d])
    assert e.shape == (2, 2)
    assert np.all(e == 0.0)


def test_matrix_three_states_pairwise_structure():
    d1 = mm.MassDensity.sphere((0, 0, 0), 0.1, 1.0)
    d2 = mm.MassDensity.sphere((1, 0, 0), 0.1, 1.0)
    d3 = mm.MassDensity.sphere((1, 0, 0), 0.1, 1.0)
    e = mm.couplings_matrix([d1, d2, d3])
    assert e[0, 1] == e[0, 2] > 0.0
    assert e[1, 2] == 0.0
    assert np.all(np.diag(e) == 0.0)
    assert np.all(e == e.T)


def test_matrix_needs_two_densities():
    with pytest.raises(InvalidInputError):
        mm.couplings_matrix([mm.MassDensity.sphere((0, 0, 0), 1, 1)])


def test_decay_time_definition_and_sentinels():
    assert mm.decay_time(HBAR) == pytest.approx(1.0, rel=1e-15)
    assert mm.decay_time(0.0) == math.inf
    with pytest.raises(InvalidInputError):
        mm.decay_time(-1.0)


def test_water_sphere_lifetime_order_of_seconds():
    w1 = mm.water_sphere(diameter=1e-6)
    w2 = mm.water_sphere(diameter=1e-6, center=(1.0, 0, 0))
    tau = mm.decay_time(mm.coupling_energy(w1, w2))
    assert 0.1 <= tau <= 10.0


def test_total_mass_and_validation():
    d = mm.MassDensity((mm.Sphere((0, 0, 0), 1, 2.0), mm.Box((2, 0, 0), (1, 1, 1), 3.0)))
    assert d.total_mass == 5.0
    with pytest.raises(InvalidInputError):
        mm.Sphere((0, 0, 0), -1.0, 1.0)
    with pytest.raises(InvalidInputError):
        mm.Box((0, 0, 0), (1, 0, 1), 1.0)
    with pytest.raises(InvalidInputError):
        mm.Sphere((0, 0, 0), 1.0, -2.0)
