"""Numba backend: JIT-compiled versions of the hot kernels.

Same contracts as ``_numpy``; see that module for the semantics. The
splitmix64 stream, weight updates and categorical picks use identical
arithmetic, so Monte Carlo decisions agree with the numpy backend.
"""

import numpy as np
from numba import njit

BACKEND = "numba"

OK = 0
STALLED = 1
GUARD_TRIPPED = 3

EV_FIELD = 0
EV_MEASUREMENT = 1
EV_STALL = 2

POLICY_BORN = 0
POLICY_FIRST_WINNER = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _sm_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, inline="always")
def _to_unit(value):
    return np.float64(value >> np.uint64(11)) * (2.0 ** -53)


# ---------------------------------------------------------------------------
# box potential integral
# ---------------------------------------------------------------------------

@njit(cache=True)
def _box_integral_single(px, py, pz, lo, hi, theta, max_depth):
    g = 1.0 / np.sqrt(3.0)
    max_stack = 8 * (max_depth + 2) * 8
    st_lo = np.empty((max_stack, 3))
    st_hi = np.empty((max_stack, 3))
    st_d = np.empty(max_stack, dtype=np.int64)
    top = 0
    for k in range(3):
        st_lo[0, k] = lo[k]
        st_hi[0, k] = hi[k]
    st_d[0] = 0
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        depth = st_d[top]
        clo0, clo1, clo2 = st_lo[top, 0], st_lo[top, 1], st_lo[top, 2]
        chi0, chi1, chi2 = st_hi[top, 0], st_hi[top, 1], st_hi[top, 2]
        cx = 0.5 * (clo0 + chi0)
        cy = 0.5 * (clo1 + chi1)
        cz = 0.5 * (clo2 + chi2)
        hx = 0.5 * (chi0 - clo0)
        hy = 0.5 * (chi1 - clo1)
        hz = 0.5 * (chi2 - clo2)
        diag = np.sqrt(hx * hx + hy * hy + hz * hz)
        dist = np.sqrt((px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2)
        if diag <= theta * dist or depth >= max_depth:
            vol = 8.0 * hx * hy * hz
            acc = 0.0
            for sx in (-1.0, 1.0):
                for sy in (-1.0, 1.0):
                    for sz in (-1.0, 1.0):
                        nx = cx + sx * g * hx
                        ny = cy + sy * g * hy
                        nz = cz + sz * g * hz
                        rr = np.sqrt((nx - px) ** 2 + (ny - py) ** 2 + (nz - pz) ** 2)
                        if rr < 1e-300:
                            rr = 1e-300
                        acc += 1.0 / rr
            total += acc * vol / 8.0
        else:
            for sx in (-1.0, 1.0):
                for sy in (-1.0, 1.0):
                    for sz in (-1.0, 1.0):
                        nlo0 = cx + min(sx, 0.0) * hx
                        nhi0 = cx + max(sx, 0.0) * hx
                        nlo1 = cy + min(sy, 0.0) * hy
                        nhi1 = cy + max(sy, 0.0) * hy
                        nlo2 = cz + min(sz, 0.0) * hz
                        nhi2 = cz + max(sz, 0.0) * hz
                        st_lo[top, 0] = nlo0
                        st_lo[top, 1] = nlo1
                        st_lo[top, 2] = nlo2
                        st_hi[top, 0] = nhi0
                        st_hi[top, 1] = nhi1
                        st_hi[top, 2] = nhi2
                        st_d[top] = depth + 1
                        top += 1
    return total


@njit(cache=True)
def _box_integral_many(points, lo, hi, theta, max_depth):
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _box_integral_single(points[i, 0], points[i, 1], points[i, 2],
                                      lo, hi, theta, max_depth)
    return out


def box_integral_points(points, lo, hi, theta=0.5, max_depth=9):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    return _box_integral_many(points, lo, hi, float(theta), int(max_depth))


# ---------------------------------------------------------------------------
# event-driven Monte Carlo
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mc_kernel(seeds, w0, epoch_end, ch_off, ch_rate, mask_l, mask_w,
               single_l, single_w, ch_driver, policy, winner, n_ev,
               ev_t, ev_a, ev_b, ev_ch, ev_kind):
    n = seeds.shape[0]
    d = w0.shape[0]
    n_epochs = epoch_end.shape[0]
    nc = ch_rate.shape[0]
    cum = np.empty(nc)
    w = np.empty(d)
    stim = np.empty((d, d), dtype=np.int8)

    for r in range(n):
        state = seeds[r]
        for i in range(d):
            w[i] = w0[i]
        stim[:, :] = 0
        first_win = -1
        last_win = -1
        t = 0.0
        ep = 0
        while True:
            alive = 0
            for i in range(d):
                if w[i] > 0.0:
                    alive += 1
            if alive <= 1:
                for i in range(d):
                    if w[i] > 0.0:
                        winner[r] = i
                        break
                break
            if ep >= n_epochs:
                state = _stall_resolve(r, state, w, t, policy, first_win, last_win,
                                       winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind)
                break
            c0 = ch_off[ep]
            c1 = ch_off[ep + 1]
            lam_tot = 0.0
            for c in range(c0, c1):
                sum_w = 0.0
                sum_l = 0.0
                for i in range(d):
                    if mask_w[c, i]:
                        sum_w += w[i]
                for i in range(d):
                    if mask_l[c, i]:
                        sum_l += w[i]
                if ch_driver[c] > 0:
                    lam = sum_w * ch_rate[c]
                else:
                    lam = sum_l * ch_rate[c]
                if policy == POLICY_FIRST_WINNER:
                    k = single_l[c]
                    ll = single_w[c]
                    if k >= 0 and ll >= 0:
                        if stim[k, ll] > 0:
                            lam = ch_rate[c] * (w[k] + w[ll])
                        elif stim[ll, k] > 0:
                            lam = 0.0
                if sum_l <= 0.0 or sum_w <= 0.0:
                    lam = 0.0
                lam_tot += lam
                cum[c - c0] = lam_tot
            end_j = epoch_end[ep]
            if lam_tot <= 0.0:
                if np.isinf(end_j):
                    state = _stall_resolve(r, state, w, t, policy, first_win, last_win,
                                           winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind)
                    break
                t = end_j
                ep += 1
                continue
            state, v1 = _sm_next(state)
            u1 = _to_unit(v1)
            dt = -np.log1p(-u1) / lam_tot
            tev = t + dt
            if tev >= end_j:
                t = end_j
                ep += 1
                continue
            t = tev
            state, v2 = _sm_next(state)
            target = _to_unit(v2) * lam_tot
            pick = c1 - c0 - 1
            for k in range(c1 - c0):
                if cum[k] > target:
                    pick = k
                    break
            c = pick + c0
            wk = 0.0
            wl = 0.0
            for i in range(d):
                if mask_l[c, i]:
                    wk += w[i]
            for i in range(d):
                if mask_w[c, i]:
                    wl += w[i]
            factor = wk / wl
            for i in range(d):
                if mask_w[c, i]:
                    w[i] = w[i] * (1.0 + factor)
            for i in range(d):
                if mask_l[c, i]:
                    w[i] = 0.0
            k_ev = n_ev[r]
            if k_ev < ev_t.shape[1]:
                ev_t[r, k_ev] = t
                if single_l[c] >= 0:
                    ev_a[r, k_ev] = single_l[c]
                else:
                    for i in range(d):
                        if mask_l[c, i]:
                            ev_a[r, k_ev] = i
                            break
                if single_w[c] >= 0:
                    ev_b[r, k_ev] = single_w[c]
                else:
                    for i in range(d):
                        if mask_w[c, i]:
                            ev_b[r, k_ev] = i
                            break
                ev_ch[r, k_ev] = c
                ev_kind[r, k_ev] = EV_FIELD
                n_ev[r] += 1
            wi = single_w[c]
            if wi >= 0:
                if first_win < 0:
                    first_win = wi
                last_win = wi
                if policy == POLICY_FIRST_WINNER:
                    for i in range(d):
                        stim[i, wi] = 1
                        stim[wi, i] = 0


@njit(cache=True)
def _stall_resolve(r, state, w, t, policy, first_win, last_win,
                   winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind):
    d = w.shape[0]
    win = -1
    if policy == POLICY_FIRST_WINNER:
        if first_win >= 0 and w[first_win] > 0.0:
            win = first_win
        elif last_win >= 0 and w[last_win] > 0.0:
            win = last_win
    if win < 0:
        state, v = _sm_next(state)
        u = _to_unit(v)
        total = 0.0
        for i in range(d):
            total += w[i]
        target = u * total
        acc = 0.0
        win = d - 1
        for i in range(d):
            acc += w[i]
            if acc > target:
                win = i
                break
    for i in range(d):
        if i != win and w[i] > 0.0:
            k = n_ev[r]
            if k < ev_t.shape[1]:
                ev_t[r, k] = t
                ev_a[r, k] = i
                ev_b[r, k] = win
                ev_ch[r, k] = -1
                ev_kind[r, k] = EV_STALL
                n_ev[r] += 1
            w[win] += w[i]
            w[i] = 0.0
    winner[r] = win
    return state


def mc_runs(seeds, w0, epoch_dur, ch_off, ch_rate, ch_loser, ch_winner,
            ch_driver, policy, max_ev):
    n = len(seeds)
    d = len(w0)
    nc = len(ch_rate)
    mask_l = np.zeros((nc, d), dtype=np.bool_)
    mask_w = np.zeros((nc, d), dtype=np.bool_)
    for c in range(nc):
        for i in range(d):
            if int(ch_loser[c]) & (1 << i):
                mask_l[c, i] = True
            if int(ch_winner[c]) & (1 << i):
                mask_w[c, i] = True
    single_l = np.where(mask_l.sum(axis=1) == 1, mask_l.argmax(axis=1), -1).astype(np.int64)
    single_w = np.where(mask_w.sum(axis=1) == 1, mask_w.argmax(axis=1), -1).astype(np.int64)

    winner = np.full(n, -1, dtype=np.int16)
    n_ev = np.zeros(n, dtype=np.int16)
    ev_t = np.full((n, max_ev), np.nan)
    ev_a = np.full((n, max_ev), -1, dtype=np.int16)
    ev_b = np.full((n, max_ev), -1, dtype=np.int16)
    ev_ch = np.full((n, max_ev), -1, dtype=np.int32)
    ev_kind = np.full((n, max_ev), -1, dtype=np.int8)

    _mc_kernel(np.asarray(seeds, dtype=np.uint64),
               np.asarray(w0, dtype=np.float64),
               np.cumsum(np.asarray(epoch_dur, dtype=np.float64)),
               np.asarray(ch_off, dtype=np.int64),
               np.asarray(ch_rate, dtype=np.float64),
               mask_l, mask_w, single_l, single_w,
               np.asarray(ch_driver, dtype=np.int8),
               int(policy), winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind)
    return winner, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind


# ---------------------------------------------------------------------------
# reduction-wave engine
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bundle_field_fill(w, part, amp):
    n_cells, n_scen = part.shape
    amp[:, :] = 0.0
    for c in range(n_cells):
        for i in range(n_scen):
            amp[c, part[c, i]] += w[i]


@njit(cache=True)
def _fill_bucket(wv, o_ct, o_x, tr_birth, impacts, cell_ct, cell_x,
                 dct_r, n_sweep_max, first_sweep, sorted_cells, bucket_ptr,
                 counts):
    n_cells = cell_ct.shape[0]
    sdim = cell_x.shape[1]
    counts[:] = 0
    for c in range(n_cells):
        if not impacts[wv, c]:
            continue
        dct = cell_ct[c] - o_ct
        if dct < 0.0:
            continue
        dx2 = 0.0
        for k in range(sdim):
            dd = cell_x[c, k] - o_x[k]
            dx2 += dd * dd
        s2 = dct * dct - dx2
        if s2 < 0.0:
            continue
        b = int(np.floor((tr_birth + np.sqrt(s2)) / dct_r))
        if b < first_sweep:
            b = first_sweep
        if b >= n_sweep_max:
            continue
        counts[b] += 1
    acc = 0
    for s in range(n_sweep_max + 1):
        bucket_ptr[wv, s] = acc
        if s < n_sweep_max:
            acc += counts[s]
    counts[:] = 0
    for c in range(n_cells):
        if not impacts[wv, c]:
            continue
        dct = cell_ct[c] - o_ct
        if dct < 0.0:
            continue
        dx2 = 0.0
        for k in range(sdim):
            dd = cell_x[c, k] - o_x[k]
            dx2 += dd * dd
        s2 = dct * dct - dx2
        if s2 < 0.0:
            continue
        b = int(np.floor((tr_birth + np.sqrt(s2)) / dct_r))
        if b < first_sweep:
            b = first_sweep
        if b >= n_sweep_max:
            continue
        sorted_cells[wv, bucket_ptr[wv, b] + counts[b]] = c
        counts[b] += 1


@njit(cache=True)
def _chain_interval(cell, wv, birth_ct, birth_x, cell_ct, cell_x):
    dct = cell_ct[cell] - birth_ct[wv]
    sdim = cell_x.shape[1]
    dx2 = 0.0
    for k in range(sdim):
        dd = cell_x[cell, k] - birth_x[wv, k]
        dx2 += dd * dd
    s2 = dct * dct - dx2
    if s2 < 0.0:
        s2 = 0.0
    return np.sqrt(s2)


@njit(cache=True)
def _apply_event(r, cell, la, lb, wv, tr, kind, sweep, n_waves,
                 w, w_new, amp, amp_new, shares, impacts,
                 birth_ct, birth_x, birth_tr,
                 part, nb, cell_ct, cell_x, dct_r, n_sweep_max,
                 sorted_cells, bucket_ptr, counts,
                 n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave, ev_kind):
    n_cells, n_scen = part.shape
    nbmax = amp.shape[1]
    sdim = cell_x.shape[1]
    wk = 0.0
    wl = 0.0
    for i in range(n_scen):
        if part[cell, i] == la:
            wk += w[i]
        elif part[cell, i] == lb:
            wl += w[i]
    factor = wk / wl
    for i in range(n_scen):
        w_new[i] = w[i]
    for i in range(n_scen):
        if part[cell, i] == lb:
            w_new[i] = w[i] * (1.0 + factor)
        elif part[cell, i] == la:
            w_new[i] = 0.0
    _bundle_field_fill(w_new, part, amp_new)

    new_wv = n_waves
    o_ct = cell_ct[cell]
    for c in range(n_cells):
        dct = cell_ct[c] - o_ct
        dx2 = 0.0
        for k in range(sdim):
            dd = cell_x[c, k] - cell_x[cell, k]
            dx2 += dd * dd
        in_flc = dct >= 0.0 and dct * dct - dx2 >= 0.0
        any_change = False
        for b in range(nbmax):
            diff = amp_new[c, b] - amp[c, b]
            if abs(diff) > 1e-12:
                any_change = True
            if in_flc and diff >= 0.0:
                shares[new_wv, c, b] = diff if diff > 0.0 else 0.0
            else:
                if amp[c, b] > 0.0:
                    ratio = amp_new[c, b] / amp[c, b]
                else:
                    ratio = 0.0
                for iw in range(n_waves):
                    shares[iw, c, b] = shares[iw, c, b] * ratio
                shares[new_wv, c, b] = 0.0
        impacts[new_wv, c] = any_change
    birth_ct[new_wv] = cell_ct[cell]
    for k in range(sdim):
        birth_x[new_wv, k] = cell_x[cell, k]
    birth_tr[new_wv] = tr
    _fill_bucket(new_wv, cell_ct[cell], cell_x[cell], tr, impacts,
                 cell_ct, cell_x, dct_r, n_sweep_max, sweep + 1,
                 sorted_cells, bucket_ptr, counts)
    for i in range(n_scen):
        w[i] = w_new[i]
    for c in range(n_cells):
        for b in range(nbmax):
            amp[c, b] = amp_new[c, b]
    k_ev = n_ev[r]
    if k_ev < ev_t.shape[1]:
        ev_t[r, k_ev] = tr
        ev_cell[r, k_ev] = cell
        ev_la[r, k_ev] = la
        ev_lb[r, k_ev] = lb
        ev_wave[r, k_ev] = wv
        ev_kind[r, k_ev] = kind
        n_ev[r] += 1
    return n_waves + 1


@njit(cache=True)
def _wave_kernel(seeds, w0, cell_ct, cell_x, part, nb, cell_rate,
                 root_ct, root_x, dct_r, dct_cell, device_cells,
                 n_sweep_max, guard, max_waves,
                 winner, status, n_ev, ev_t, ev_cell, ev_la, ev_lb,
                 ev_wave, ev_kind):
    n = seeds.shape[0]
    n_cells, n_scen = part.shape
    nbmax = cell_rate.shape[1]
    sdim = cell_x.shape[1]
    nd = device_cells.shape[0]

    w = np.empty(n_scen)
    w_new = np.empty(n_scen)
    amp = np.empty((n_cells, nbmax))
    amp_new = np.empty((n_cells, nbmax))
    shares = np.empty((max_waves, n_cells, nbmax))
    impacts = np.empty((max_waves, n_cells), dtype=np.bool_)
    birth_ct = np.empty(max_waves)
    birth_x = np.empty((max_waves, sdim))
    birth_tr = np.empty(max_waves)
    sorted_cells = np.empty((max_waves, n_cells), dtype=np.int64)
    bucket_ptr = np.empty((max_waves, n_sweep_max + 1), dtype=np.int64)
    counts = np.empty(n_sweep_max + 1, dtype=np.int64)
    dev_wave = np.empty(nd, dtype=np.int64)

    for r in range(n):
        state = seeds[r]
        for i in range(n_scen):
            w[i] = w0[i]
        _bundle_field_fill(w, part, amp)
        n_waves = 1
        for c in range(n_cells):
            impacts[0, c] = True
            for b in range(nbmax):
                shares[0, c, b] = amp[c, b]
        birth_ct[0] = root_ct
        for k in range(sdim):
            birth_x[0, k] = root_x[k]
        birth_tr[0] = 0.0
        _fill_bucket(0, root_ct, root_x, 0.0, impacts, cell_ct, cell_x,
                     dct_r, n_sweep_max, 0, sorted_cells, bucket_ptr, counts)

        tripped = False
        for sweep in range(n_sweep_max):
            alive = 0
            for i in range(n_scen):
                if w[i] > 0.0:
                    alive += 1
            if alive <= 1:
                break
            # pass A: hazard and device coverage
            h_tot = 0.0
            for k in range(nd):
                dev_wave[k] = -1
            for wv in range(n_waves):
                lo = bucket_ptr[wv, sweep]
                hi = bucket_ptr[wv, sweep + 1] if sweep + 1 <= n_sweep_max else lo
                if hi <= lo:
                    continue
                for ci in range(lo, hi):
                    c = sorted_cells[wv, ci]
                    for k in range(nd):
                        if device_cells[k] == c and dev_wave[k] < 0:
                            dev_wave[k] = wv
                for a in range(nbmax):
                    for b in range(a + 1, nbmax):
                        for ci in range(lo, hi):
                            c = sorted_cells[wv, ci]
                            if nb[c] <= b:
                                continue
                            cr = cell_rate[c, a, b]
                            if cr == 0.0:
                                continue
                            mag = abs(cr) * dct_cell
                            if amp[c, a] > 0.0:
                                h_tot += mag * shares[wv, c, b]
                            if amp[c, b] > 0.0:
                                h_tot += mag * shares[wv, c, a]
            if h_tot > guard:
                status[r] = GUARD_TRIPPED
                tripped = True
                break
            if h_tot > 0.0:
                state, v = _sm_next(state)
                u = _to_unit(v)
                if u < h_tot:
                    # pass B: locate the contribution
                    acc = 0.0
                    hit_cell = -1
                    hit_la = -1
                    hit_lb = -1
                    hit_wv = -1
                    for wv in range(n_waves):
                        if hit_cell >= 0:
                            break
                        lo = bucket_ptr[wv, sweep]
                        hi = bucket_ptr[wv, sweep + 1] if sweep + 1 <= n_sweep_max else lo
                        if hi <= lo:
                            continue
                        for a in range(nbmax):
                            if hit_cell >= 0:
                                break
                            for b in range(a + 1, nbmax):
                                if hit_cell >= 0:
                                    break
                                for ci in range(lo, hi):
                                    c = sorted_cells[wv, ci]
                                    if nb[c] <= b:
                                        continue
                                    cr = cell_rate[c, a, b]
                                    if cr == 0.0:
                                        continue
                                    mag = abs(cr) * dct_cell
                                    if amp[c, a] > 0.0:
                                        acc += mag * shares[wv, c, b]
                                        if acc > u:
                                            if cr > 0.0:
                                                hit_la, hit_lb = a, b
                                            else:
                                                hit_la, hit_lb = b, a
                                            hit_cell = c
                                            hit_wv = wv
                                            break
                                    if amp[c, b] > 0.0:
                                        acc += mag * shares[wv, c, a]
                                        if acc > u:
                                            if cr > 0.0:
                                                hit_la, hit_lb = b, a
                                            else:
                                                hit_la, hit_lb = a, b
                                            hit_cell = c
                                            hit_wv = wv
                                            break
                    if hit_cell >= 0 and n_waves < max_waves:
                        tr = birth_tr[hit_wv] + _chain_interval(
                            hit_cell, hit_wv, birth_ct, birth_x, cell_ct, cell_x)
                        n_waves = _apply_event(
                            r, hit_cell, hit_la, hit_lb, hit_wv, tr, EV_FIELD,
                            sweep, n_waves, w, w_new, amp, amp_new, shares,
                            impacts, birth_ct, birth_x, birth_tr, part, nb,
                            cell_ct, cell_x, dct_r, n_sweep_max, sorted_cells,
                            bucket_ptr, counts, n_ev, ev_t, ev_cell, ev_la,
                            ev_lb, ev_wave, ev_kind)
            # forced measurements, devices in ascending cell order
            for k in range(nd):
                wv = dev_wave[k]
                if wv < 0:
                    continue
                dcell = device_cells[k]
                while n_waves < max_waves:
                    alive = 0
                    for i in range(n_scen):
                        if w[i] > 0.0:
                            alive += 1
                    if alive <= 1:
                        break
                    n_act = 0
                    first_act = -1
                    second_act = -1
                    tot = 0.0
                    for b in range(nb[dcell]):
                        if amp[dcell, b] > 0.0:
                            n_act += 1
                            tot += amp[dcell, b]
                            if first_act < 0:
                                first_act = b
                            elif second_act < 0:
                                second_act = b
                    if n_act <= 1:
                        break
                    state, v = _sm_next(state)
                    u = _to_unit(v)
                    target = u * tot
                    accb = 0.0
                    win = -1
                    for b in range(nb[dcell]):
                        if amp[dcell, b] > 0.0:
                            accb += amp[dcell, b]
                            win = b
                            if accb > target:
                                break
                    la = first_act if first_act != win else second_act
                    tr = birth_tr[wv] + _chain_interval(dcell, wv, birth_ct,
                                                        birth_x, cell_ct, cell_x)
                    n_waves = _apply_event(
                        r, dcell, la, win, wv, tr, EV_MEASUREMENT, sweep,
                        n_waves, w, w_new, amp, amp_new, shares, impacts,
                        birth_ct, birth_x, birth_tr, part, nb, cell_ct,
                        cell_x, dct_r, n_sweep_max, sorted_cells, bucket_ptr,
                        counts, n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave,
                        ev_kind)
        if tripped:
            continue
        alive = 0
        for i in range(n_scen):
            if w[i] > 0.0:
                alive += 1
        if alive > 1:
            state, v = _sm_next(state)
            u = _to_unit(v)
            tot = 0.0
            for i in range(n_scen):
                tot += w[i]
            target = u * tot
            acc = 0.0
            win = -1
            for i in range(n_scen):
                if w[i] > 0.0:
                    acc += w[i]
                    win = i
                    if acc > target:
                        break
            for i in range(n_scen):
                if i != win and w[i] > 0.0:
                    k_ev = n_ev[r]
                    if k_ev < ev_t.shape[1]:
                        ev_t[r, k_ev] = n_sweep_max * dct_r
                        ev_cell[r, k_ev] = -1
                        ev_la[r, k_ev] = i
                        ev_lb[r, k_ev] = win
                        ev_wave[r, k_ev] = -1
                        ev_kind[r, k_ev] = EV_STALL
                        n_ev[r] += 1
                    w[win] += w[i]
                    w[i] = 0.0
            status[r] = STALLED
            winner[r] = win
        else:
            for i in range(n_scen):
                if w[i] > 0.0:
                    winner[r] = i
                    break


def wave_runs(seeds, w0, cell_ct, cell_x, part, nb, cell_rate,
              root_ct, root_x, dct_r, dct_cell, device_cells,
              n_sweep_max, guard, max_ev, max_waves):
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

    _wave_kernel(np.asarray(seeds, dtype=np.uint64),
                 np.asarray(w0, dtype=np.float64),
                 np.asarray(cell_ct, dtype=np.float64),
                 np.asarray(cell_x, dtype=np.float64),
                 np.asarray(part, dtype=np.int16),
                 np.asarray(nb, dtype=np.int8),
                 np.asarray(cell_rate, dtype=np.float64),
                 float(root_ct), np.asarray(root_x, dtype=np.float64),
                 float(dct_r), float(dct_cell),
                 np.asarray(device_cells, dtype=np.int64),
                 int(n_sweep_max), float(guard), int(max_waves),
                 winner, status, n_ev, ev_t, ev_cell, ev_la, ev_lb,
                 ev_wave, ev_kind)
    return winner, status, n_ev, ev_t, ev_cell, ev_la, ev_lb, ev_wave, ev_kind
