"""Numpy backend for the hot kernels.

Implements the same contracts as the numba backend:

* ``box_integral_points`` - Newtonian kernel integral of a homogeneous box,
  adaptive octree subdivision with 2-point Gauss cells,
* ``mc_runs``             - event-driven Monte Carlo for the jump process
  (vectorized across runs),
* ``wave_runs``           - full reduction-wave engine runs (per-run loop,
  vectorized across grid cells).

Random decisions come from splitmix64 streams; channel/winner picks in
``mc_runs`` are pure float arithmetic on the drawn uniforms and match
the numba backend decision-for-decision (event times can differ in the
last ulp through libm). ``wave_runs`` matches the numba backend run for
run on the same seeds up to float-summation order in the per-sweep
hazard, which is tested statistically rather than bitwise.
"""

import numpy as np

BACKEND = "numpy"

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)

# run status codes shared by both backends
OK = 0
STALLED = 1
GUARD_TRIPPED = 3

# event kinds
EV_FIELD = 0
EV_MEASUREMENT = 1
EV_STALL = 2

POLICY_BORN = 0
POLICY_FIRST_WINNER = 1


def _sm_next(states):
    """Advance splitmix64 states (uint64 ndarray); returns (states, values)."""
    states = states + _GOLDEN
    z = states
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    z = z ^ (z >> _U64(31))
    return states, z


def _to_unit(values):
    return (values >> _U64(11)).astype(np.float64) * 2.0 ** -53


# ---------------------------------------------------------------------------
# box potential integral
# ---------------------------------------------------------------------------

_GAUSS_OFF = 1.0 / np.sqrt(3.0)
_CORNERS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
)


def box_integral_points(points, lo, hi, theta=0.5, max_depth=9):
    """Integral of 1/|p - y| over the box [lo, hi] for each point p.

    Octree subdivision refines cells until their half-diagonal is below
    ``theta`` times the distance to the evaluation point (or the depth
    cap is hit, which bounds the error of the integrable singularity).
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    out = np.empty(points.shape[0])
    for i in range(points.shape[0]):
        out[i] = _box_integral_single(points[i], lo, hi, theta, max_depth)
    return out


def _box_integral_single(p, lo, hi, theta, max_depth):
    ctr = (0.5 * (lo + hi))[None, :]
    half = (0.5 * (hi - lo))[None, :]
    total = 0.0
    for depth in range(max_depth + 1):
        diag = np.sqrt((half * half).sum(axis=1))
        dist = np.sqrt(((p - ctr) ** 2).sum(axis=1))
        leaf = (diag <= theta * dist) if depth < max_depth else np.ones(len(ctr), bool)
        if leaf.any():
            total += _gauss_cells(p, ctr[leaf], half[leaf])
        if leaf.all():
            break
        keep = ~leaf
        q = half[keep] * 0.5
        ctr = (ctr[keep][:, None, :] + _CORNERS[None, :, :] * q[:, None, :]).reshape(-1, 3)
        half = np.repeat(q, 8, axis=0)
    return total


def _gauss_cells(p, ctr, half):
    nodes = ctr[:, None, :] + (_CORNERS * _GAUSS_OFF)[None, :, :] * half[:, None, :]
    r = np.sqrt(((nodes - p[None, None, :]) ** 2).sum(axis=2))
    np.maximum(r, 1e-300, out=r)
    vol = (2.0 * half).prod(axis=1)
    return float(((1.0 / r).sum(axis=1) * (vol / 8.0)).sum())


# ---------------------------------------------------------------------------
# event-driven Monte Carlo for the non-relativistic jump process
# ---------------------------------------------------------------------------

def mc_runs(seeds, w0, epoch_dur, ch_off, ch_rate, ch_loser, ch_winner,
            ch_driver, policy, max_ev):
    """Simulate one jump-process trajectory per seed.

    Channels are ordered decay modes: ``ch_loser``/``ch_winner`` are
    bitmasks over states, ``ch_rate`` the coupling rate (1/s per unit
    squared amplitude), ``ch_driver`` +1 when the winner amplitude
    drives the rate and -1 for the inverted (negative-coupling) mode.
    Epoch ``j`` uses channels ``ch_off[j]:ch_off[j+1]`` and lasts
    ``epoch_dur[j]`` seconds (the last entry may be inf).

    Returns (winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind).
    """
    n = len(seeds)
    d = len(w0)
    n_epochs = len(epoch_dur)
    epoch_end = np.cumsum(epoch_dur)

    nc = len(ch_rate)
    mask_l = np.zeros((nc, d), bool)
    mask_w = np.zeros((nc, d), bool)
    for c in range(nc):
        for i in range(d):
            if int(ch_loser[c]) & (1 << i):
                mask_l[c, i] = True
            if int(ch_winner[c]) & (1 << i):
                mask_w[c, i] = True
    single_l = np.where(mask_l.sum(axis=1) == 1, mask_l.argmax(axis=1), -1)
    single_w = np.where(mask_w.sum(axis=1) == 1, mask_w.argmax(axis=1), -1)

    states = np.asarray(seeds, dtype=np.uint64).copy()
    w = np.tile(np.asarray(w0, dtype=np.float64), (n, 1))
    t = np.zeros(n)
    ep = np.zeros(n, dtype=np.int64)
    stim = np.zeros((n, d, d), dtype=np.int8)
    first_win = np.full(n, -1, dtype=np.int64)
    last_win = np.full(n, -1, dtype=np.int64)

    winner = np.full(n, -1, dtype=np.int16)
    n_ev = np.zeros(n, dtype=np.int16)
    ev_t = np.full((n, max_ev), np.nan)
    ev_a = np.full((n, max_ev), -1, dtype=np.int16)
    ev_b = np.full((n, max_ev), -1, dtype=np.int16)
    ev_ch = np.full((n, max_ev), -1, dtype=np.int32)
    ev_kind = np.full((n, max_ev), -1, dtype=np.int8)

    active = np.arange(n)
    max_rounds = (n_epochs + 2) * (d + 2)
    for _ in range(max_rounds):
        if len(active) == 0:
            break
        alive_ct = (w[active] > 0.0).sum(axis=1)
        done = alive_ct <= 1
        if done.any():
            fin = active[done]
            winner[fin] = np.argmax(w[fin] > 0.0, axis=1).astype(np.int16)
            active = active[~done]
            if len(active) == 0:
                break

        out_of_time = ep[active] >= n_epochs
        if out_of_time.any():
            _resolve_stall(active[out_of_time], states, w, t, policy, first_win,
                           last_win, winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind)
            active = active[~out_of_time]
            if len(active) == 0:
                break

        for j in np.unique(ep[active]):
            sel = active[ep[active] == int(j)]
            c0, c1 = int(ch_off[j]), int(ch_off[j + 1])
            ncj = c1 - c0
            ws = w[sel]
            if ncj == 0:
                lam_tot = np.zeros(len(sel))
                cum = np.zeros((len(sel), 0))
            else:
                contrib_w = np.where(mask_w[None, c0:c1, :], ws[:, None, :], 0.0)
                sum_w = np.cumsum(contrib_w, axis=2)[:, :, -1]
                contrib_l = np.where(mask_l[None, c0:c1, :], ws[:, None, :], 0.0)
                sum_l = np.cumsum(contrib_l, axis=2)[:, :, -1]
                lam = np.where(ch_driver[None, c0:c1] > 0, sum_w, sum_l) * ch_rate[None, c0:c1]
                if policy == POLICY_FIRST_WINNER:
                    k_idx = single_l[c0:c1]
                    l_idx = single_w[c0:c1]
                    ok = (k_idx >= 0) & (l_idx >= 0)
                    kk = np.where(ok, k_idx, 0)
                    ll = np.where(ok, l_idx, 0)
                    s_fwd = (stim[sel[:, None], kk[None, :], ll[None, :]] > 0) & ok[None, :]
                    s_rev = (stim[sel[:, None], ll[None, :], kk[None, :]] > 0) & ok[None, :]
                    stim_rate = ch_rate[None, c0:c1] * (ws[:, kk] + ws[:, ll])
                    lam = np.where(s_fwd, stim_rate, np.where(s_rev, 0.0, lam))
                lam = np.where((sum_l <= 0.0) | (sum_w <= 0.0), 0.0, lam)
                cum = np.cumsum(lam, axis=1)
                lam_tot = cum[:, -1]

            end_j = epoch_end[j]
            zero = lam_tot <= 0.0
            if zero.any():
                z = sel[zero]
                if np.isinf(end_j):
                    _resolve_stall(z, states, w, t, policy, first_win, last_win,
                                   winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind)
                    ep[z] = n_epochs
                else:
                    t[z] = end_j
                    ep[z] += 1
            go = ~zero
            if not go.any():
                continue
            g = sel[go]
            states[g], v1 = _sm_next(states[g])
            u1 = _to_unit(v1)
            dt = -np.log1p(-u1) / lam_tot[go]
            tev = t[g] + dt
            crossed = tev >= end_j
            gc = g[crossed]
            t[gc] = end_j
            ep[gc] += 1
            gev = g[~crossed]
            if len(gev) == 0:
                continue
            t[gev] = tev[~crossed]
            states[gev], v2 = _sm_next(states[gev])
            target = _to_unit(v2) * lam_tot[go][~crossed]
            cum_ev = cum[go][~crossed]
            above = cum_ev > target[:, None]
            pick = np.where(above.any(axis=1), above.argmax(axis=1), ncj - 1)
            for r, c in zip(gev, pick + c0):
                ml = mask_l[c]
                mw = mask_w[c]
                wk = 0.0
                wl = 0.0
                for i in range(d):
                    if ml[i]:
                        wk += w[r, i]
                for i in range(d):
                    if mw[i]:
                        wl += w[r, i]
                factor = wk / wl
                w[r, mw] = w[r, mw] * (1.0 + factor)
                w[r, ml] = 0.0
                k = n_ev[r]
                ev_t[r, k] = t[r]
                ev_a[r, k] = single_l[c] if single_l[c] >= 0 else int(np.argmax(ml))
                ev_b[r, k] = single_w[c] if single_w[c] >= 0 else int(np.argmax(mw))
                ev_ch[r, k] = c
                ev_kind[r, k] = EV_FIELD
                n_ev[r] += 1
                wi = single_w[c]
                if wi >= 0:
                    if first_win[r] < 0:
                        first_win[r] = wi
                    last_win[r] = wi
                    if policy == POLICY_FIRST_WINNER:
                        stim[r, :, wi] = 1
                        stim[r, wi, :] = 0

    return winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind


def _resolve_stall(runs, states, w, t, policy, first_win, last_win,
                   winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind):
    """Finish stalled runs: first-winner cascade or Born measurement."""
    d = w.shape[1]
    for r in runs:
        win = -1
        if policy == POLICY_FIRST_WINNER:
            if first_win[r] >= 0 and w[r, first_win[r]] > 0.0:
                win = int(first_win[r])
            elif last_win[r] >= 0 and w[r, last_win[r]] > 0.0:
                win = int(last_win[r])
        if win < 0:
            states[r: r + 1], v = _sm_next(states[r: r + 1])
            u = _to_unit(v)[0]
            total = 0.0
            for i in range(d):
                total += w[r, i]
            target = u * total
            acc = 0.0
            win = d - 1
            for i in range(d):
                acc += w[r, i]
                if acc > target:
                    win = i
                    break
        for i in range(d):
            if i != win and w[r, i] > 0.0:
                k = n_ev[r]
                if k < ev_t.shape[1]:
                    ev_t[r, k] = t[r]
                    ev_a[r, k] = i
                    ev_b[r, k] = win
                    ev_ch[r, k] = -1
                    ev_kind[r, k] = EV_STALL
                    n_ev[r] += 1
                w[r, win] += w[r, i]
                w[r, i] = 0.0
        winner[r] = win


# ---------------------------------------------------------------------------
# reduction-wave engine
# ---------------------------------------------------------------------------

def wave_runs(seeds, w0, cell_ct, cell_x, part, nb, cell_rate,
              root_ct, root_x, dct_r, dct_cell, device_cells,
              n_sweep_max, guard, max_ev, max_waves):
    """Run the reduction-wave engine once per seed.

    The grid is flattened to ``n_cells``; ``part[c, i]`` gives scenario
    ``i``'s bundle index at cell ``c``, ``cell_rate[c, a, b]`` the signed
    cell-integrated coupling field between local bundles (an event
    probability per unit ct). ``dct_r`` is the sweep thickness c*dt_R,
    ``dct_cell`` the grid's ct cell height: a cell contributes its full
    probability weight exactly once, at the sweep whose interval bucket
    covers it.

    Returns (winner, status, n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave,
    ev_kind); ev_t is the global reduction time in ct units (meters).
    """
    n = len(seeds)
    winner = np.full(n, -1, dtype=np.int16)
    status = np.zeros(n, dtype=np.int8)
    n_ev = np.zeros(n, dtype=np.int16)
    ev_t = np.full((n, max_ev), np.nan)
    ev_cell = np.full((n, max_ev), -1, dtype=np.int64)
    ev_la = np.full((n, max_ev), -1, dtype=np.int16)
    ev_lb = np.full((n, max_ev), -1, dtype=np.int16)
    ev_wave = np.full((n, max_ev), -1, dtype=np.int16)
    ev_kind = np.full((n, max_ev), -1, dtype=np.int8)

    for r in range(n):
        _one_wave_run(r, int(seeds[r]), w0, cell_ct, cell_x, part, nb, cell_rate,
                      root_ct, root_x, dct_r, dct_cell, device_cells,
                      int(n_sweep_max), guard, winner, status, n_ev, ev_t,
                      ev_cell, ev_la, ev_lb, ev_wave, ev_kind)
    return winner, status, n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave, ev_kind


def bundle_field(w, part, nbmax):
    """Bundled amplitude field A[c, b] = sum of w over partition members."""
    n_cells, n_scen = part.shape
    a = np.zeros((n_cells, nbmax))
    rows = np.arange(n_cells)
    for i in range(n_scen):
        np.add.at(a, (rows, part[:, i]), w[i])
    return a


def _interval_parts(cell_ct, cell_x, o_ct, o_x):
    dct = cell_ct - o_ct
    dx2 = ((cell_x - np.asarray(o_x)[None, :]) ** 2).sum(axis=1)
    return dct, dct * dct - dx2


def _one_wave_run(r, seed, w0, cell_ct, cell_x, part, nb, cell_rate,
                  root_ct, root_x, dct_r, dct_cell, device_cells,
                  n_sweep_max, guard, winner, status, n_ev, ev_t,
                  ev_cell, ev_la, ev_lb, ev_wave, ev_kind,
                  check_decomposition=False):
    from .. import rng

    stream = rng.Stream(seed)
    n_cells, n_scen = part.shape
    nbmax = cell_rate.shape[1]
    w = np.asarray(w0, dtype=np.float64).copy()
    amp = bundle_field(w, part, nbmax)

    shares = [amp.copy()]
    impacts = [np.ones(n_cells, bool)]
    birth_tr = [0.0]
    birth_pts = [(float(root_ct), np.asarray(root_x, dtype=np.float64))]
    buckets = [_build_bucket(cell_ct, cell_x, root_ct, root_x, 0.0,
                             np.ones(n_cells, bool), dct_r, n_sweep_max,
                             first_sweep=0)]

    def record(tr, cell, la, lb, wv, kind):
        k = n_ev[r]
        if k < ev_t.shape[1]:
            ev_t[r, k] = tr
            ev_cell[r, k] = cell
            ev_la[r, k] = la
            ev_lb[r, k] = lb
            ev_wave[r, k] = wv
            ev_kind[r, k] = kind
            n_ev[r] += 1

    def chain_interval(cell, wv):
        b_ct, b_x = birth_pts[wv]
        dct = cell_ct[cell] - b_ct
        dx2 = ((cell_x[cell] - b_x) ** 2).sum()
        return np.sqrt(max(dct * dct - dx2, 0.0))

    def apply_event(cell, la, lb, wv, tr, kind, sweep):
        nonlocal w, amp
        members_l = part[cell] == la
        members_w = part[cell] == lb
        wk = w[members_l].sum()
        wl = w[members_w].sum()
        factor = wk / wl
        w_new = w.copy()
        w_new[members_w] = w[members_w] * (1.0 + factor)
        w_new[members_l] = 0.0
        amp_new = bundle_field(w_new, part, nbmax)
        dct, s2 = _interval_parts(cell_ct, cell_x, cell_ct[cell], cell_x[cell])
        flc = (dct >= 0.0) & (s2 >= 0.0)
        diff = amp_new - amp
        ratio = np.divide(amp_new, amp, out=np.zeros_like(amp), where=amp > 0.0)
        rescale = ~(flc[:, None] & (diff >= 0.0))
        for s in shares:
            s[rescale] = s[rescale] * ratio[rescale]
        new_share = np.where(flc[:, None] & (diff > 0.0), diff, 0.0)
        impact = (np.abs(diff) > 1e-12).any(axis=1)
        shares.append(new_share)
        impacts.append(impact)
        birth_tr.append(tr)
        birth_pts.append((float(cell_ct[cell]), cell_x[cell].copy()))
        buckets.append(_build_bucket(cell_ct, cell_x, cell_ct[cell], cell_x[cell],
                                     tr, impact, dct_r, n_sweep_max,
                                     first_sweep=sweep + 1))
        w = w_new
        amp = amp_new
        record(tr, cell, la, lb, wv, kind)
        if check_decomposition:
            tot = np.zeros_like(amp)
            for s in shares:
                tot += s
            assert np.max(np.abs(tot - amp)) < 1e-9

    for sweep in range(n_sweep_max):
        if (w > 0.0).sum() <= 1:
            break
        entries = []
        h_tot = 0.0
        covered = {}
        for wv in range(len(shares)):
            cells = buckets[wv].get(sweep)
            if cells is None:
                continue
            cells = cells[impacts[wv][cells]]
            if len(cells) == 0:
                continue
            for dcell in device_cells:
                if dcell in cells and int(dcell) not in covered:
                    covered[int(dcell)] = wv
            sh = shares[wv][cells]
            for a in range(nbmax):
                for b in range(a + 1, nbmax):
                    valid = nb[cells] > b
                    if not valid.any():
                        continue
                    cr = cell_rate[cells, a, b]
                    mag = np.abs(cr) * dct_cell
                    pos = cr > 0.0
                    # contribution 1 driven by bundle b's share, 2 by a's;
                    # the other bundle must be locally alive
                    m1 = np.where(valid & (amp[cells, a] > 0.0), mag * sh[:, b], 0.0)
                    m2 = np.where(valid & (amp[cells, b] > 0.0), mag * sh[:, a], 0.0)
                    if m1.any() or m2.any():
                        entries.append((wv, cells, a, b, pos, m1, m2))
                        h_tot += m1.sum() + m2.sum()
        if h_tot > guard:
            status[r] = GUARD_TRIPPED
            return
        if h_tot > 0.0:
            u = stream.uniform()
            if u < h_tot:
                acc = 0.0
                hit = None
                for wv, cells, a, b, pos, m1, m2 in entries:
                    for idx in range(len(cells)):
                        acc += m1[idx]
                        if acc > u:
                            la, lb = (a, b) if pos[idx] else (b, a)
                            hit = (int(cells[idx]), la, lb, wv)
                            break
                        acc += m2[idx]
                        if acc > u:
                            la, lb = (b, a) if pos[idx] else (a, b)
                            hit = (int(cells[idx]), la, lb, wv)
                            break
                    if hit is not None:
                        break
                if hit is not None:
                    cell, la, lb, wv = hit
                    tr = birth_tr[wv] + chain_interval(cell, wv)
                    apply_event(cell, la, lb, wv, tr, EV_FIELD, sweep)
        # forced measurements where an effective front covers a device
        for dcell, wv in sorted(covered.items()):
            while (w > 0.0).sum() > 1:
                local = amp[dcell, : nb[dcell]]
                act = np.where(local > 0.0)[0]
                if len(act) <= 1:
                    break
                u = stream.uniform()
                target = u * local[act].sum()
                acc = 0.0
                win = int(act[-1])
                for bidx in act:
                    acc += local[bidx]
                    if acc > target:
                        win = int(bidx)
                        break
                la = int(act[0]) if act[0] != win else int(act[1])
                tr = birth_tr[wv] + chain_interval(dcell, wv)
                apply_event(int(dcell), la, win, wv, tr, EV_MEASUREMENT, sweep)

    alive = np.where(w > 0.0)[0]
    if len(alive) > 1:
        u = stream.uniform()
        target = u * w[alive].sum()
        acc = 0.0
        win = int(alive[-1])
        for i in alive:
            acc += w[i]
            if acc > target:
                win = int(i)
                break
        for i in alive:
            if i != win:
                record(n_sweep_max * dct_r, -1, int(i), win, -1, EV_STALL)
                w[win] += w[i]
                w[i] = 0.0
        status[r] = STALLED
        winner[r] = win
    else:
        winner[r] = int(np.argmax(w > 0.0))


def _build_bucket(cell_ct, cell_x, o_ct, o_x, tr_birth, impact, dct_r,
                  n_sweep_max, first_sweep):
    """Map sweep index -> cells whose wavefront bucket is that sweep.

    Cells in the wave's future light-cone and impact area land in the
    bucket floor((tr_birth + interval)/dct_r), never before
    ``first_sweep`` (a new wave starts acting on the sweep after its
    birth).
    """
    dct, s2 = _interval_parts(cell_ct, cell_x, o_ct, o_x)
    ok = (dct >= 0.0) & (s2 >= 0.0) & impact
    cells = np.where(ok)[0]
    s = np.sqrt(s2[cells])
    sweep_idx = np.floor((tr_birth + s) / dct_r).astype(np.int64)
    np.maximum(sweep_idx, first_sweep, out=sweep_idx)
    keep = sweep_idx < n_sweep_max
    cells, sweep_idx = cells[keep], sweep_idx[keep]
    order = np.lexsort((cells, sweep_idx))
    cells, sweep_idx = cells[order], sweep_idx[order]
    bucket = {}
    if len(cells):
        bounds = np.flatnonzero(np.diff(sweep_idx)) + 1
        starts = np.concatenate(([0], bounds))
        ends = np.concatenate((bounds, [len(cells)]))
        for st, en in zip(starts, ends):
            bucket[int(sweep_idx[st])] = cells[st:en]
    return bucket
