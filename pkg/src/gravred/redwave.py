"""Reduction-wave dynamics.

A reduction wave is born at a reduction event and its front propagates
as surfaces of constant Minkowski interval (hyperboloids) inside the
birth point's future light-cone, ordered by the global reduction time
t_R accumulated along the parent chain. Every wave carries its own
share of the bundled amplitude field; the shares of all waves sum to
the amplitude field at every cell. A sweep advances t_R by dt_R: each
wave's effective front (the interval shell intersected with the wave's
impact area) contributes per-cell, per-bundle-pair event probabilities
cell_rate * share * dct, one cell exactly once per wave.

WaveSystem is the inspectable single-run engine; `run_monte_carlo` is
the batch path backed by the compiled kernels.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, rng
from .constants import C
from .errors import (InvalidInputError, InvalidStateError, NumericFailureError,
                     StepTooLargeError)
from .kernels import _numpy as knp
from .relfield import SpacetimePoint, interval_squared

GUARD = 0.1
IMPACT_TOL = 1e-12


@dataclass
class ReductionWave:
    """One wave: birth event, parent link, per-cell bundle shares."""

    wave_id: int
    birth_point: SpacetimePoint
    birth_tr: float              # global ct_R at birth, meters
    parent: int                  # parent wave id, -1 for the root
    shares: np.ndarray           # (n_cells, nbmax), >= 0
    impact: np.ndarray           # (n_cells,) bool


@dataclass(frozen=True)
class WaveEvent:
    ctr: float                   # global reduction time, ct units (m)
    cell: int
    loser_bundle: int
    winner_bundle: int
    wave_id: int
    kind: str                    # "field" | "measurement" | "stall"
    loser_states: tuple = ()
    winner_states: tuple = ()
    weights_after: tuple = ()

    @property
    def t_r(self):
        return self.ctr / C


def _cell_interval_parts(grid, point):
    dct = grid.cell_ct - point.ct
    dx2 = ((grid.cell_x - np.asarray(point.x)[None, :]) ** 2).sum(axis=1)
    return dct, dct * dct - dx2


def wavefront_band(system, wave, t_r, dt_r):
    """Cells whose interval to the birth point lies in the sweep shell
    [c(t_R - t_Rr), c(t_R - t_Rr + dt_R)), inside the future cone."""
    if C * t_r < wave.birth_tr:
        raise InvalidInputError("band requested before the wave's birth")
    grid = system.model.grid
    dct, s2 = _cell_interval_parts(grid, wave.birth_point)
    lo = C * t_r - wave.birth_tr
    hi = lo + C * dt_r
    ok = (dct >= 0.0) & (s2 >= 0.0)
    s = np.sqrt(np.where(ok, s2, 0.0))
    return np.where(ok & (s >= lo) & (s < hi))[0]


def effective_wavefront(system, wave, t_r, dt_r):
    """Front restricted to the wave's impact area."""
    band = wavefront_band(system, wave, t_r, dt_r)
    return band[wave.impact[band]]


def global_tr(point, wave, system):
    """Global t_R of a front point: the interval to the birth point plus
    the accumulated intervals along the parent chain, over c."""
    waves = {w.wave_id: w for w in system.waves}
    s2 = interval_squared(point, wave.birth_point)
    if s2 < 0.0 or point.ct < wave.birth_point.ct:
        raise InvalidInputError("point is outside the wave's future light-cone")
    total = math.sqrt(s2)
    node = wave
    while node.parent >= 0:
        parent = waves.get(node.parent)
        if parent is None:
            raise InvalidStateError(f"wave {node.wave_id} has a broken parent chain")
        seg = interval_squared(node.birth_point, parent.birth_point)
        if seg < 0.0 or node.birth_point.ct < parent.birth_point.ct:
            raise InvalidStateError("parent chain is not timelike future-directed")
        total += math.sqrt(seg)
        node = parent
    return total / C


def impact_area(before, after, tol=IMPACT_TOL):
    """Cells where any bundled amplitude changed by more than tol."""
    before = np.asarray(before)
    after = np.asarray(after)
    if before.shape != after.shape:
        raise InvalidInputError("amplitude fields live on different grids")
    return np.where((np.abs(after - before) > tol).any(axis=1))[0]


class WaveSystem:
    """Single reduction-wave run over a grid model, advanced sweep by
    sweep; all randomness comes from one splitmix64 stream."""

    def __init__(self, model, seed=0, dt_r=None, root_birth=None, guard=GUARD,
                 check_decomposition=False, trace=False):
        self.model = model
        grid = model.grid
        self.stream = rng.Stream(int(seed))
        self.dct_r = grid.dct if dt_r is None else C * dt_r
        if self.dct_r <= 0:
            raise InvalidInputError("dt_r must be positive")
        self.guard = guard
        self.check_decomposition = check_decomposition
        self.weights = model.weights.copy()
        self.amp = model.bundled_field(self.weights)
        peak = float(np.max(np.abs(model.cell_rate))) * grid.dct
        if peak >= guard / 2.0:
            raise NumericFailureError(
                f"single-cell event probability {peak:.3g} is too close to the "
                f"stability guard; refine the grid or lower the gain")
        span = max((hi - lo) for lo, hi in zip(grid.x_min, grid.x_max))
        if root_birth is None:
            center = tuple(0.5 * (lo + hi) for lo, hi in zip(grid.x_min, grid.x_max))
            root_birth = SpacetimePoint(grid.ct_min - 1.05 * span, center)
        dct, s2 = _cell_interval_parts(grid, root_birth)
        if not np.all((dct >= 0) & (s2 >= 0)):
            raise InvalidInputError("root birth point must precede the whole grid")
        ctr_span = (grid.ct_max - root_birth.ct) + span
        self.n_sweep_max = int(math.ceil(ctr_span / self.dct_r)) + 2
        root = ReductionWave(0, root_birth, 0.0, -1, self.amp.copy(),
                             np.ones(grid.n_cells, dtype=bool))
        self.waves = [root]
        self._buckets = [self._build_bucket(root, first_sweep=0)]
        self.sweep_index = 0
        self.events = []
        self.trace = [] if trace else None

    # -- geometry ----------------------------------------------------------

    @property
    def ctr(self):
        """Current global reduction time in ct units (start of sweep)."""
        return self.sweep_index * self.dct_r

    @property
    def t_r(self):
        return self.ctr / C

    def _build_bucket(self, wave, first_sweep):
        return knp._build_bucket(
            self.model.grid.cell_ct, self.model.grid.cell_x,
            wave.birth_point.ct, np.asarray(wave.birth_point.x),
            wave.birth_tr, wave.impact, self.dct_r, self.n_sweep_max,
            first_sweep=first_sweep)

    @property
    def alive(self):
        return np.where(self.weights > 0.0)[0]

    def decomposition_residual(self):
        total = np.zeros_like(self.amp)
        for w in self.waves:
            total += w.shares
        return float(np.max(np.abs(total - self.amp)))

    # -- dynamics ----------------------------------------------------------

    def _chain_interval(self, cell, wave):
        p = self.model.grid.cell_point(cell)
        s2 = interval_squared(p, wave.birth_point)
        return math.sqrt(max(s2, 0.0))

    def _sweep_entries(self):
        """Hazard contributions of this sweep in canonical order."""
        model = self.model
        nbmax = model.nbmax
        entries = []
        covered = {}
        for wave, bucket in zip(self.waves, self._buckets):
            cells = bucket.get(self.sweep_index)
            if cells is None or len(cells) == 0:
                continue
            for dcell in model.device_cells:
                if dcell in cells and dcell not in covered:
                    covered[dcell] = wave.wave_id
            sh = wave.shares[cells]
            for a in range(nbmax):
                for b in range(a + 1, nbmax):
                    valid = model.nb[cells] > b
                    if not valid.any():
                        continue
                    cr = model.cell_rate[cells, a, b]
                    mag = np.abs(cr) * model.grid.dct
                    pos = cr > 0.0
                    m1 = np.where(valid & (self.amp[cells, a] > 0.0), mag * sh[:, b], 0.0)
                    m2 = np.where(valid & (self.amp[cells, b] > 0.0), mag * sh[:, a], 0.0)
                    if m1.any() or m2.any():
                        entries.append((wave.wave_id, cells, a, b, pos, m1, m2))
        return entries, covered

    def sweep(self):
        """One sweep of all effective fronts; returns the field event of
        this sweep (forced measurements are appended to .events)."""
        if len(self.alive) <= 1:
            self.sweep_index += 1
            return None
        entries, covered = self._sweep_entries()
        h_tot = 0.0
        for _, _, _, _, _, m1, m2 in entries:
            h_tot += m1.sum() + m2.sum()
        if h_tot > self.guard:
            raise StepTooLargeError(
                f"sweep event probability {h_tot:.3g} exceeds {self.guard}; "
                f"halve dt_r", total_probability=h_tot)
        if self.trace is not None:
            self.trace.append({
                "t_r": self.t_r, "sweep": self.sweep_index,
                "waves": [(w.wave_id, int(len(b.get(self.sweep_index, ()))))
                          for w, b in zip(self.waves, self._buckets)],
                "p_total": h_tot})
        event = None
        if h_tot > 0.0:
            u = self.stream.uniform()
            if u < h_tot:
                acc = 0.0
                for wv, cells, a, b, pos, m1, m2 in entries:
                    if event is not None:
                        break
                    for idx in range(len(cells)):
                        acc += m1[idx]
                        if acc > u:
                            la, lb = (a, b) if pos[idx] else (b, a)
                            event = self._apply(int(cells[idx]), la, lb, wv, "field")
                            break
                        acc += m2[idx]
                        if acc > u:
                            la, lb = (b, a) if pos[idx] else (a, b)
                            event = self._apply(int(cells[idx]), la, lb, wv, "field")
                            break
        for dcell, wv in sorted(covered.items()):
            self.measurement_crossing(dcell, wv)
        self.sweep_index += 1
        return event

    def measurement_crossing(self, cell, wave_id=0):
        """Force reductions among the local bundles until D(cell) = 1."""
        model = self.model
        forced = []
        while len(self.alive) > 1:
            local = self.amp[cell, : int(model.nb[cell])]
            act = np.where(local > 0.0)[0]
            if len(act) <= 1:
                break
            u = self.stream.uniform()
            target = u * local[act].sum()
            acc = 0.0
            win = int(act[-1])
            for bidx in act:
                acc += local[bidx]
                if acc > target:
                    win = int(bidx)
                    break
            loser = int(act[0]) if act[0] != win else int(act[1])
            forced.append(self._apply(cell, loser, win, wave_id, "measurement"))
        return forced

    def apply_event(self, cell, loser_bundle, winner_bundle, wave_id=0,
                    kind="field"):
        """Apply one reduction at a cell (public scripted-event entry)."""
        model = self.model
        if not (0 <= cell < model.grid.n_cells):
            raise InvalidInputError(f"cell {cell} out of range")
        d = int(model.nb[cell])
        if not (0 <= loser_bundle < d and 0 <= winner_bundle < d) \
                or loser_bundle == winner_bundle:
            raise InvalidInputError("bad bundle pair")
        if self.amp[cell, loser_bundle] <= 0.0:
            raise InvalidStateError("cannot reduce a bundle with zero amplitude")
        return self._apply(cell, loser_bundle, winner_bundle, wave_id, kind)

    def _apply(self, cell, la, lb, wave_id, kind):
        model = self.model
        grid = model.grid
        part_c = model.part[cell]
        members_l = part_c == la
        members_w = part_c == lb
        wk = self.weights[members_l].sum()
        wl = self.weights[members_w].sum()
        if wl <= 0.0:
            raise InvalidStateError("winner bundle has zero amplitude")
        w_new = self.weights.copy()
        w_new[members_w] = self.weights[members_w] * (1.0 + wk / wl)
        w_new[members_l] = 0.0
        amp_new = model.bundled_field(w_new)
        birth = grid.cell_point(cell)
        dct, s2 = _cell_interval_parts(grid, birth)
        flc = (dct >= 0.0) & (s2 >= 0.0)
        diff = amp_new - self.amp
        ratio = np.divide(amp_new, self.amp, out=np.zeros_like(self.amp),
                          where=self.amp > 0.0)
        rescale = ~(flc[:, None] & (diff >= 0.0))
        for w in self.waves:
            w.shares[rescale] = w.shares[rescale] * ratio[rescale]
        trig = self.waves[wave_id]
        tr = trig.birth_tr + self._chain_interval(cell, trig)
        new = ReductionWave(
            len(self.waves), birth, tr, wave_id,
            np.where(flc[:, None] & (diff > 0.0), diff, 0.0),
            (np.abs(diff) > IMPACT_TOL).any(axis=1))
        self.waves.append(new)
        self._buckets.append(self._build_bucket(new, first_sweep=self.sweep_index + 1))
        self.weights = w_new
        self.amp = amp_new
        lstates = tuple(int(i) for i in np.where(members_l)[0])
        wstates = tuple(int(i) for i in np.where(members_w)[0])
        event = WaveEvent(tr, cell, la, lb, wave_id, kind, lstates, wstates,
                          tuple(float(x) for x in w_new))
        self.events.append(event)
        if self.check_decomposition:
            res = self.decomposition_residual()
            if res > 1e-9:
                raise InvalidStateError(
                    f"wave decomposition violated: residual {res:.3e}")
        return event

    def run(self, max_sweeps=None):
        """Sweep until fully reduced; Born-resolve a stalled leftover."""
        limit = self.n_sweep_max if max_sweeps is None else max_sweeps
        while self.sweep_index < limit and len(self.alive) > 1:
            self.sweep()
        alive = self.alive
        stalled = False
        if len(alive) > 1:
            stalled = True
            u = self.stream.uniform()
            target = u * self.weights[alive].sum()
            acc = 0.0
            win = int(alive[-1])
            for i in alive:
                acc += self.weights[i]
                if acc > target:
                    win = int(i)
                    break
            for i in alive:
                if i != win:
                    self.weights[win] += self.weights[i]
                    self.weights[i] = 0.0
            self.events.append(WaveEvent(self.ctr, -1, -1, -1, -1, "stall",
                                         tuple(int(i) for i in alive if i != win),
                                         (win,), tuple(self.weights)))
        return WaveRunResult(int(np.argmax(self.weights > 0.0)), stalled,
                             tuple(self.events))


@dataclass(frozen=True)
class WaveRunResult:
    winner: int
    stalled: bool
    events: tuple


# ---------------------------------------------------------------------------
# batch Monte Carlo over the kernels
# ---------------------------------------------------------------------------

@dataclass
class WaveMonteCarloResult:
    frequencies: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    n_runs: int
    winners: np.ndarray
    statuses: np.ndarray
    labels: tuple
    events: list = field(default_factory=list)

    def frequency_rows(self):
        return [(self.labels[i], float(self.frequencies[i]), float(self.stderr[i]))
                for i in range(len(self.frequencies))]


def run_monte_carlo(model, n_runs, seed, dt_r=None, impl=None, guard=GUARD,
                    keep_events=False, max_halvings=6):
    """Batch wave-engine runs with derived per-run seed streams.

    Sweeps whose total event probability exceeds the guard abort the
    affected runs, which are retried with dt_r halved (outcome
    probabilities are unchanged by dt_r; it only orders the sweeps).
    """
    if n_runs < 1:
        raise InvalidInputError("n_runs must be >= 1")
    grid = model.grid
    kern = kernels.get_impl(impl)
    peak = float(np.max(np.abs(model.cell_rate))) * grid.dct
    if peak >= guard / 2.0:
        raise NumericFailureError(
            f"single-cell event probability {peak:.3g} is too close to the "
            f"stability guard; refine the grid or lower the gain")
    span = max((hi - lo) for lo, hi in zip(grid.x_min, grid.x_max))
    center = tuple(0.5 * (lo + hi) for lo, hi in zip(grid.x_min, grid.x_max))
    root_ct = grid.ct_min - 1.05 * span
    n_scen = len(model.weights)
    max_ev = 2 * n_scen + 2
    max_waves = n_scen + 1

    seeds = rng.derive_streams(seed, n_runs)
    dct_r = grid.dct if dt_r is None else C * dt_r
    pending = np.arange(n_runs)
    winners = np.full(n_runs, -1, dtype=np.int16)
    statuses = np.zeros(n_runs, dtype=np.int8)
    all_events = [None] * n_runs if keep_events else None

    for attempt in range(max_halvings + 1):
        ctr_span = (grid.ct_max - root_ct) + span
        n_sweep_max = int(math.ceil(ctr_span / dct_r)) + 2
        got = kern.wave_runs(
            seeds[pending], model.weights, grid.cell_ct, grid.cell_x,
            model.part, model.nb, model.cell_rate, root_ct,
            np.asarray(center), dct_r, grid.dct,
            np.asarray(model.device_cells, dtype=np.int64),
            n_sweep_max, guard, max_ev, max_waves)
        w, st, n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave, ev_kind = got
        winners[pending] = w
        statuses[pending] = st
        if keep_events:
            kinds = {0: "field", 1: "measurement", 2: "stall"}
            for j, r in enumerate(pending):
                all_events[r] = tuple(
                    WaveEvent(float(ev_t[j, k]), int(ev_cell[j, k]),
                              int(ev_la[j, k]), int(ev_lb[j, k]),
                              int(ev_wave[j, k]), kinds[int(ev_kind[j, k])])
                    for k in range(int(n_ev[j])))
        tripped = pending[st == knp.GUARD_TRIPPED]
        if len(tripped) == 0:
            break
        pending = tripped
        dct_r /= 2.0
    else:
        raise StepTooLargeError(
            f"{len(pending)} runs still exceed the sweep guard after "
            f"{max_halvings} dt_r halvings")
    if np.any(winners < 0):
        raise InvalidStateError("some runs did not finish")

    counts = np.bincount(winners, minlength=n_scen).astype(np.int64)
    freq = counts / n_runs
    stderr = np.sqrt(freq * (1.0 - freq) / n_runs)
    labels = tuple(s.name for s in model.scenarios) or tuple(
        str(i + 1) for i in range(n_scen))
    res = WaveMonteCarloResult(freq, stderr, counts, n_runs, winners,
                               statuses, labels)
    if keep_events:
        res.events = all_events
    return res


# ---------------------------------------------------------------------------
# hyperplane-flow demonstrator (frame dependence of the rejected scheme)
# ---------------------------------------------------------------------------

def plane_flow_first_event_probs(model, beta):
    """First-event distribution if sweeps followed boosted hyperplanes.

    Orders cells by the boosted time coordinate instead of the
    invariant interval; the resulting branch probabilities depend on
    beta, which is exactly why the plane-based flow is rejected as an
    engine mode. Returns {loser scenario tuple: probability}.
    """
    if not -1.0 < beta < 1.0:
        raise InvalidInputError("beta must be in (-1, 1)")
    grid = model.grid
    amp = model.bundled_field()
    g = 1.0 / math.sqrt(1.0 - beta * beta)
    t_boost = g * (grid.cell_ct - beta * grid.cell_x[:, 0])
    order = np.argsort(t_boost, kind="stable")
    survive = 1.0
    probs = {}
    for c in order:
        d = int(model.nb[c])
        for a in range(d):
            for b in range(a + 1, d):
                cr = model.cell_rate[c, a, b]
                if cr == 0.0:
                    continue
                mag = abs(cr) * grid.dct
                for la, lb, drv in ((a, b, b), (b, a, a)):
                    p = mag * amp[c, drv]
                    if cr < 0.0:
                        la, lb = lb, la
                    if p <= 0.0 or amp[c, la] <= 0.0 or amp[c, lb] <= 0.0:
                        continue
                    losers = tuple(int(i) for i in np.where(model.part[c] == la)[0])
                    probs[losers] = probs.get(losers, 0.0) + survive * p
                    survive *= 1.0 - p
    total = sum(probs.values())
    if total > 0.0:
        probs = {k: v / total for k, v in probs.items()}
    return probs
