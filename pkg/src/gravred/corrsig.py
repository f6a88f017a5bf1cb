"""Correlated reductions and the signaling constraint.

A reduction in favor of a state stimulates the surviving concurrencies
of that state: the forward rate absorbs both amplitudes and the
reverse rate drops to zero, which biases outcomes away from Born's
rule. The correlation is only allowed while it cannot signal: every
active front cell inside the correlated reduction's impact area and
spacelike region must already lie in the stimulating event's future
light-cone (the checker) - guaranteed whenever those cells are covered
by the stimulating wave's swept region (the gate, a strictly stronger
condition).

Closed forms for star-shaped couplings, the distance attenuation law,
the reducer decay rate and the experimental design window live here
too.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import massmodel
from .constants import C, HBAR
from .errors import InvalidInputError, NumericFailureError
from .relfield import SpacetimePoint, interval_squared
from .redwave import wavefront_band


# ---------------------------------------------------------------------------
# stimulated rates
# ---------------------------------------------------------------------------

@dataclass
class StimulationState:
    """Per ordered pair: which state the concurrency is biased toward,
    and the stimulating wave/birth point that justifies it."""

    entries: dict = field(default_factory=dict)   # frozenset({k,l}) -> record

    def stimulate(self, loser, winner, wave_id=None, x_stim=None):
        self.entries[frozenset((loser, winner))] = {
            "toward": winner, "wave": wave_id, "x_stim": x_stim}

    def toward(self, k, l):
        rec = self.entries.get(frozenset((k, l)))
        return None if rec is None else rec["toward"]


def correlated_rates(k, l, weights, coupling, stimulated_toward=None,
                     hbar=HBAR):
    """Ordered-pair rates {(loser, winner): rate} for one concurrency.

    Unstimulated pairs follow the baseline law (winner amplitude drives
    the rate); a pair stimulated toward ``l`` moves both weights into
    the forward direction and kills the reverse one.
    """
    if k == l:
        raise InvalidInputError("a state does not compete with itself")
    base = coupling / hbar
    if stimulated_toward is None:
        return {(k, l): base * weights[l], (l, k): base * weights[k]}
    if stimulated_toward not in (k, l):
        raise InvalidInputError("stimulated_toward must be one of the pair")
    win, lose = stimulated_toward, (k if stimulated_toward == l else l)
    return {(lose, win): base * (weights[k] + weights[l]), (win, lose): 0.0}


def closed_form_star_probs(e_hat, weights):
    """Final reduction probabilities of the first-winner cascade:
    p_l proportional to (sum_k E_kl) |c_l|^2, normalized.

    Works in exact arithmetic when fed Fractions (returned as a list);
    float inputs come back as an ndarray.
    """
    e = [list(row) for row in e_hat]
    d = len(e)
    weights = list(weights)
    if any(len(row) != d for row in e) or len(weights) != d:
        raise InvalidInputError("coupling matrix must be square and match weights")
    for i in range(d):
        if e[i][i] != 0:
            raise InvalidInputError("coupling matrix needs a zero diagonal")
        for j in range(d):
            if e[i][j] != e[j][i]:
                raise InvalidInputError("coupling matrix must be symmetric")
    raw = [sum(e[k][l] for k in range(d)) * weights[l] for l in range(d)]
    total = sum(raw)
    if total == 0:
        raise InvalidInputError("all couplings vanish; no reduction happens")
    out = [x / total for x in raw]
    from fractions import Fraction
    if any(isinstance(v, Fraction) for v in out):
        return out
    return np.asarray([float(v) for v in out])


# ---------------------------------------------------------------------------
# geometric areas and the signaling constraint
# ---------------------------------------------------------------------------

def stimulation_area(system, wave, t_r):
    """Cells the wave's front has swept by t_R, inside its impact area."""
    if C * t_r < wave.birth_tr:
        raise InvalidInputError("stimulation area requested before birth")
    grid = system.model.grid
    dct = grid.cell_ct - wave.birth_point.ct
    dx2 = ((grid.cell_x - np.asarray(wave.birth_point.x)[None, :]) ** 2).sum(axis=1)
    s2 = dct * dct - dx2
    ok = (dct >= 0.0) & (s2 >= 0.0)
    s = np.sqrt(np.where(ok, s2, 0.0))
    swept = ok & (s <= C * t_r - wave.birth_tr)
    return np.where(swept & wave.impact)[0]


def _future_cone_mask(grid, point):
    dct = grid.cell_ct - point.ct
    dx2 = ((grid.cell_x - np.asarray(point.x)[None, :]) ** 2).sum(axis=1)
    return (dct >= 0.0) & (dct * dct - dx2 >= 0.0)


def _spacelike_mask(grid, point):
    dct = grid.cell_ct - point.ct
    dx2 = ((grid.cell_x - np.asarray(point.x)[None, :]) ** 2).sum(axis=1)
    return dct * dct - dx2 < 0.0


def _relevant_front_cells(system, corr_impact, corr_point, t_r_corr, dt_r):
    """Active-front cells inside the correlated reduction's impact area
    intersected with its spacelike region."""
    grid = system.model.grid
    impact_mask = np.zeros(grid.n_cells, dtype=bool)
    impact_mask[np.asarray(corr_impact, dtype=np.int64)] = True
    region = impact_mask & _spacelike_mask(grid, corr_point)
    cells = set()
    dt_r = system.dct_r / C if dt_r is None else dt_r
    for wave in system.waves:
        if C * t_r_corr < wave.birth_tr:
            continue
        band = wavefront_band(system, wave, t_r_corr, dt_r)
        band = band[wave.impact[band]]
        cells.update(int(c) for c in band if region[c])
    return cells


@dataclass(frozen=True)
class SignalingReport:
    passed: bool
    offending_cells: tuple
    n_region_cells: int
    n_front_cells: int

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"signaling constraint {verdict}: {self.n_front_cells} active "
                f"front cells in impact-and-spacelike region, "
                f"{len(self.offending_cells)} outside the stimulating cone")


def signaling_check(x_stim, corr_impact, corr_point, system, t_r_corr,
                    dt_r=None):
    """Check that no active front cell inside the correlated reduction's
    impact-and-spacelike region escapes the stimulating event's future
    light-cone. Returns a report with the offending cells as witnesses.
    """
    grid = system.model.grid
    front = _relevant_front_cells(system, corr_impact, corr_point, t_r_corr, dt_r)
    flc = _future_cone_mask(grid, x_stim)
    offending = tuple(sorted(c for c in front if not flc[c]))
    region = len(np.asarray(corr_impact))
    return SignalingReport(len(offending) == 0, offending, region, len(front))


def correlation_gate(stim_wave, corr_impact, corr_point, system, t_r_corr,
                     dt_r=None):
    """Allow the stimulated rates only when every relevant front cell is
    already covered by the stimulating wave's swept region; allowance
    implies the signaling check passes (the swept region is a subset of
    the future light-cone)."""
    front = _relevant_front_cells(system, corr_impact, corr_point, t_r_corr, dt_r)
    if not front:
        return True
    stim_cells = set(int(c) for c in stimulation_area(system, stim_wave, t_r_corr))
    return front <= stim_cells


# ---------------------------------------------------------------------------
# closed-form predictions
# ---------------------------------------------------------------------------

def attenuated_probs(p_born, p_inf, distance, tau_red):
    """Exponential interpolation from the correlated prediction at d=0
    to Born's rule at large separation."""
    if distance < 0.0 or not tau_red > 0.0:
        raise InvalidInputError("need distance >= 0 and tau_red > 0")
    p_born = np.asarray(p_born, dtype=np.float64)
    p_inf = np.asarray(p_inf, dtype=np.float64)
    if p_born.shape != p_inf.shape:
        raise InvalidInputError("probability vectors differ in length")
    damp = math.exp(-distance / (C * tau_red))
    return p_born + (p_inf - p_born) * damp


@dataclass(frozen=True)
class StarCoupling:
    """Star-shaped coupling field E_hat_kl * f(x) * H(t - t0)."""

    e_hat: np.ndarray          # J, symmetric, zero diagonal
    profile: object            # "uniform" | callable f(points (n,3)) -> field 1/m^4
    field_scale: float = None  # uniform mode: field value inside the volume
    volume: float = None       # uniform mode: m^3
    bounds: tuple = None       # callable mode: ((lo3), (hi3))
    onset: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.e_hat, dtype=np.float64)
        if np.max(np.abs(e - e.T)) > 0 or np.any(np.diag(e) != 0.0):
            raise InvalidInputError("star coupling matrix must be symmetric "
                                    "with zero diagonal")
        object.__setattr__(self, "e_hat", e)


def reducer_decay_rate(star, rel_tol=1e-4):
    """1/tau of the reducer: the spatial integral of c * field * f."""
    if star.profile == "uniform":
        if star.field_scale is None or star.volume is None:
            raise InvalidInputError("uniform profile needs field_scale and volume")
        return C * star.field_scale * star.volume
    if not callable(star.profile):
        raise InvalidInputError("profile must be 'uniform' or a callable")
    if star.bounds is None:
        raise InvalidInputError("callable profile needs integration bounds")
    lo = np.asarray(star.bounds[0], dtype=np.float64)
    hi = np.asarray(star.bounds[1], dtype=np.float64)

    prev = None
    achieved = math.inf
    for n in (4, 8, 16, 32):
        pts, wts = massmodel._box_gauss_nodes(lo, hi, n)
        vals = np.asarray(star.profile(pts), dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise NumericFailureError("profile integrand is not finite")
        cur = C * float(np.dot(wts, vals))
        if prev is not None:
            scale = max(abs(cur), abs(prev), 1e-300)
            achieved = abs(cur - prev) / scale
            if achieved <= rel_tol:
                return cur
        prev = cur
    raise NumericFailureError("reducer decay-rate quadrature did not converge",
                              achieved_tol=achieved)


@dataclass(frozen=True)
class DesignWindowReport:
    passed: bool
    detector_ok: bool
    light_ok: bool
    rate_det: float
    rate_red: float
    c_over_d: float
    margin: float

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"design window {verdict}: 1/tau_det={self.rate_det:.3g}/s "
                f"{'<<' if self.detector_ok else '!<<'} 1/tau_red="
                f"{self.rate_red:.3g}/s "
                f"{'<<' if self.light_ok else '!<<'} c/d={self.c_over_d:.3g}/s "
                f"(margin {self.margin:g})")


def design_window_check(tau_det, tau_red, distance, margin=10.0):
    """Feasibility window 1/tau_det << 1/tau_red << c/d with a margin."""
    if not (tau_det > 0.0 and tau_red > 0.0 and distance > 0.0 and margin >= 1.0):
        raise InvalidInputError("need positive tau_det, tau_red, distance, margin >= 1")
    rate_det = 1.0 / tau_det
    rate_red = 1.0 / tau_red
    c_over_d = C / distance
    det_ok = rate_det * margin <= rate_red
    light_ok = rate_red * margin <= c_over_d
    return DesignWindowReport(det_ok and light_ok, det_ok, light_ok,
                              rate_det, rate_red, c_over_d, margin)


def cell_growth(n, t, tau_cell):
    """Early-time amplitude of the distinguished state in a star of n
    equal branches: exponential growth capped at the 0.5 closed form."""
    if n < 2:
        raise InvalidInputError("need at least 2 states")
    if not tau_cell > 0.0:
        raise InvalidInputError("tau_cell must be > 0")
    return min(math.exp(t / tau_cell) / n, 0.5)


def star_matrix(n, coupling=1.0, center=0):
    """Star topology: the center couples to every leaf, leaves do not
    couple to each other."""
    if n < 2:
        raise InvalidInputError("need at least 2 states")
    e = np.zeros((n, n))
    for i in range(n):
        if i != center:
            e[center, i] = e[i, center] = coupling
    return e
