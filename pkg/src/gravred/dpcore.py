"""Non-relativistic stochastic reduction engine.

The superposition is a vector of squared amplitudes; decay is a
continuous-time jump process whose ordered-pair rates are set by the
couplings matrix: the probability that state k decays in favor of l in
dt is (E_kl / hbar) |c_l|^2 dt. Events are instantaneous amplitude
jumps (loser zeroed, winner absorbs the weight). On top of the matrix
form, decay modes can be expressed as explicit channels between groups
of states, which is how the bundled (location-dependent) dynamics of
the relativistic engine maps onto this module for exact enumeration.

`enumerate_tree` computes the exact tree of reduction scenarios: a
single never-ending epoch reduces to the closed-form race between
competing exponentials (kept in exact arithmetic when fed Fractions);
piecewise-constant schedules propagate node occupancies through each
epoch with a sparse matrix exponential before the final race.
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels, rng
from .constants import HBAR
from .errors import (InvalidInputError, ScheduleTimeoutError, StepTooLargeError)

STEP_GUARD = 0.1  # max total jump probability per discrete step
NORM_TOL = 1e-12

POLICIES = ("none", "first-winner", "born-fallback")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Superposition:
    """Squared amplitudes |c_i|^2 of the competing states."""

    weights: tuple
    labels: tuple = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) == 0:
            raise InvalidInputError("superposition needs at least one state")
        if any(not (0.0 <= x <= 1.0 + 1e-12) or not math.isfinite(x) for x in w):
            raise InvalidInputError(f"squared amplitudes must lie in [0, 1]: {w}")
        if abs(sum(w) - 1.0) > NORM_TOL:
            raise InvalidInputError(f"squared amplitudes must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "weights", w)
        labels = self.labels or tuple(str(i + 1) for i in range(len(w)))
        if len(labels) != len(w):
            raise InvalidInputError("labels/weights length mismatch")
        object.__setattr__(self, "labels", tuple(labels))

    def __len__(self):
        return len(self.weights)

    @property
    def array(self):
        return np.asarray(self.weights)


@dataclass(frozen=True)
class ReductionEvent:
    """One Heisenberg reduction: loser's weight jumps onto the winner.

    ``loser``/``winner`` are representative state indices;
    ``loser_states``/``winner_states`` the full groups for bundled
    channels. ``time`` is None on aggregated tree edges. ``kind`` is
    "field", "measurement" or "stall" (forced resolution).
    """

    loser: int
    winner: int
    time: float = None
    loser_states: tuple = None
    winner_states: tuple = None
    kind: str = "field"

    def __post_init__(self):
        if self.loser_states is None:
            object.__setattr__(self, "loser_states", (self.loser,))
        if self.winner_states is None:
            object.__setattr__(self, "winner_states", (self.winner,))
        if set(self.loser_states) & set(self.winner_states):
            raise InvalidInputError("loser and winner groups overlap")


@dataclass(frozen=True)
class Channel:
    """One ordered decay mode: the loser group decays in favor of the
    winner group at rate ``rate * sum(w[winner])`` (driver "winner") or
    ``rate * sum(w[loser])`` (driver "loser", the inverted mode of a
    negative coupling). ``rate`` is in 1/s per unit squared amplitude.
    """

    losers: tuple
    winners: tuple
    rate: object
    driver: str = "winner"

    def __post_init__(self):
        losers = tuple(sorted(self.losers))
        winners = tuple(sorted(self.winners))
        if not losers or not winners or set(losers) & set(winners):
            raise InvalidInputError(f"bad channel groups {losers} -> {winners}")
        if self.driver not in ("winner", "loser"):
            raise InvalidInputError(f"bad channel driver {self.driver!r}")
        if self.rate < 0:
            raise InvalidInputError("channel rate must be >= 0 (signs are modes)")
        object.__setattr__(self, "losers", losers)
        object.__setattr__(self, "winners", winners)

    @property
    def signature(self):
        return (self.losers, self.winners, self.driver)


def matrix_channels(e_matrix, hbar=HBAR):
    """Ordered-pair channels of a (possibly signed) couplings matrix."""
    e = np.asarray(e_matrix, dtype=np.float64)
    _validate_matrix(e)
    chans = []
    d = e.shape[0]
    for k in range(d):
        for l in range(k + 1, d):
            if e[k, l] == 0.0:
                continue
            rate = abs(e[k, l]) / hbar
            driver = "winner" if e[k, l] > 0.0 else "loser"
            chans.append(Channel((k,), (l,), rate, driver))
            chans.append(Channel((l,), (k,), rate, driver))
    return tuple(chans)


def _validate_matrix(e):
    if e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise InvalidInputError(f"couplings matrix must be square, got {e.shape}")
    if not np.all(np.isfinite(e)):
        raise InvalidInputError("couplings matrix must be finite")
    scale = np.max(np.abs(e)) or 1.0
    if np.max(np.abs(e - e.T)) > 1e-12 * scale:
        raise InvalidInputError("couplings matrix must be symmetric")
    if np.max(np.abs(np.diag(e))) > 0.0:
        raise InvalidInputError("couplings matrix must have a zero diagonal")


@dataclass(frozen=True)
class CouplingsSchedule:
    """Piecewise-constant decay modes: epochs of (duration, channels).

    The last epoch may have infinite duration; a schedule whose last
    epoch is finite leaves the system uncoupled afterwards (a stall,
    resolved by the declared final measurement). ``matrices`` keeps the
    raw couplings for matrix-built schedules (one per epoch, or None).
    """

    epochs: tuple
    dim: int
    matrices: tuple = None

    @classmethod
    def constant(cls, e_matrix, hbar=HBAR):
        e = np.asarray(e_matrix, dtype=np.float64)
        chans = matrix_channels(e, hbar)
        return cls(((math.inf, chans),), e.shape[0], (e,))

    @classmethod
    def piecewise(cls, segments, hbar=HBAR):
        """segments: iterable of (duration_s, matrix); last may be inf."""
        segments = list(segments)
        if not segments:
            raise InvalidInputError("schedule needs at least one segment")
        epochs = []
        mats = []
        dim = None
        for i, (dur, mat) in enumerate(segments):
            mat = np.asarray(mat, dtype=np.float64)
            if dim is None:
                dim = mat.shape[0]
            elif mat.shape[0] != dim:
                raise InvalidInputError("all matrices must share the dimension")
            if not (dur > 0.0):
                raise InvalidInputError(f"epoch duration must be > 0, got {dur}")
            if math.isinf(dur) and i != len(segments) - 1:
                raise InvalidInputError("only the last epoch may be infinite")
            epochs.append((float(dur), matrix_channels(mat, hbar)))
            mats.append(mat)
        return cls(tuple(epochs), dim, tuple(mats))

    @classmethod
    def from_channels(cls, segments, dim):
        segments = [(float(d), tuple(ch)) for d, ch in segments]
        for dur, chans in segments:
            for ch in chans:
                if max(ch.losers + ch.winners) >= dim:
                    raise InvalidInputError("channel state index out of range")
        return cls(tuple(segments), dim)

    @property
    def breakpoints(self):
        ts = [0.0]
        for dur, _ in self.epochs:
            if math.isinf(dur):
                break
            ts.append(ts[-1] + dur)
        return tuple(ts)

    def matrix_at(self, t):
        if self.matrices is None:
            raise InvalidInputError("schedule was not built from matrices")
        acc = 0.0
        for (dur, _), mat in zip(self.epochs, self.matrices):
            if t < acc + dur:
                return mat
            acc += dur
        return np.zeros((self.dim, self.dim))

    def closed(self):
        """Epochs with a guaranteed infinite tail (possibly uncoupled)."""
        eps = list(self.epochs)
        if not math.isinf(eps[-1][0]):
            eps.append((math.inf, ()))
        return eps


# ---------------------------------------------------------------------------
# single-step operations
# ---------------------------------------------------------------------------

def step_probabilities(s, e_matrix, dt):
    """Ordered-pair jump probabilities and the stay probability for dt.

    Returns (p, stay) with p[k, l] the probability that k decays in
    favor of l. Negative couplings invert the decay direction (the
    probability is driven by the loser's amplitude).
    """
    if not dt > 0.0:
        raise InvalidInputError(f"dt must be > 0, got {dt}")
    e = np.asarray(e_matrix, dtype=np.float64)
    _validate_matrix(e)
    w = s.array
    if e.shape[0] != len(w):
        raise InvalidInputError("matrix dimension does not match the superposition")
    pos = np.clip(e, 0.0, None)
    neg = np.clip(-e, 0.0, None)
    p = (pos * w[None, :] + neg * w[:, None]) * (dt / HBAR)
    p[w <= 0.0, :] = 0.0   # dead states cannot lose
    p[:, w <= 0.0] = 0.0   # or win
    total = float(p.sum())
    if total >= STEP_GUARD:
        raise StepTooLargeError(
            f"total jump probability {total:.3g} >= {STEP_GUARD}; halve dt",
            total_probability=total)
    return p, 1.0 - total


def sample_step(s, e_matrix, dt, rand, t=0.0):
    """Draw one step outcome; returns a ReductionEvent or None (stay).

    ``rand`` is a numpy Generator (or anything with .random()).
    """
    p, stay = step_probabilities(s, e_matrix, dt)
    u = rand.random()
    acc = 0.0
    d = p.shape[0]
    for k in range(d):
        for l in range(d):
            if p[k, l] <= 0.0:
                continue
            acc += p[k, l]
            if u < acc:
                return ReductionEvent(loser=k, winner=l, time=t + dt)
    return None


def apply_reduction(s, event):
    """Winner absorbs the loser's weight; normalization is untouched."""
    w = list(s.weights)
    for i in event.loser_states + event.winner_states:
        if not 0 <= i < len(w):
            raise InvalidInputError(f"state index {i} out of range")
    lose_total = sum(w[i] for i in event.loser_states)
    if lose_total == 0.0:
        warnings.warn("reduction of an already-empty state is a no-op")
        return s
    win_total = sum(w[i] for i in event.winner_states)
    if win_total <= 0.0:
        raise InvalidInputError("winner group has zero amplitude")
    factor = lose_total / win_total
    for i in event.winner_states:
        w[i] = w[i] * (1.0 + factor)
    for i in event.loser_states:
        w[i] = 0.0
    return Superposition(tuple(w), s.labels)


def split_state(s, index, fractions):
    """Unitary splitting: state ``index`` becomes len(fractions) children."""
    if not 0 <= index < len(s):
        raise InvalidInputError(f"state index {index} out of range")
    fr = [float(f) for f in fractions]
    if any(f < 0.0 for f in fr):
        raise InvalidInputError("fractions must be >= 0")
    if abs(sum(fr) - 1.0) > NORM_TOL:
        raise InvalidInputError(f"fractions must sum to 1, got {sum(fr)!r}")
    w = []
    labels = []
    for i, (wi, li) in enumerate(zip(s.weights, s.labels)):
        if i == index:
            for j, f in enumerate(fr):
                w.append(wi * f)
                labels.append(f"{li}.{j + 1}")
        else:
            w.append(wi)
            labels.append(li)
    return Superposition(tuple(w), tuple(labels))


# ---------------------------------------------------------------------------
# exact decay trees
# ---------------------------------------------------------------------------

class TreeNode:
    __slots__ = ("weights", "stim", "first_winner", "depth", "edges",
                 "probability", "stalled")

    def __init__(self, weights, stim=(), first_winner=None, depth=0):
        self.weights = tuple(weights)
        self.stim = dict(stim)       # frozenset({k,l}) -> winner
        self.first_winner = first_winner
        self.depth = depth
        self.edges = []              # (event, edge_probability, child)
        self.probability = 0
        self.stalled = False

    @property
    def alive(self):
        return tuple(i for i, w in enumerate(self.weights) if w > 0)

    @property
    def is_leaf(self):
        return len(self.alive) <= 1


@dataclass
class DecayTree:
    root: TreeNode
    labels: tuple

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            for _, _, child in node.edges:
                stack.append(child)

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            for _, _, child in node.edges:
                stack.append(child)

    def has_transition(self, before, after, tol=1e-12):
        """Does any edge take the weights from ``before`` to ``after``?"""
        for node in self.nodes():
            if _close(node.weights, before, tol):
                for _, _, child in node.edges:
                    if _close(child.weights, after, tol):
                        return True
        return False


def _close(a, b, tol):
    return len(a) == len(b) and all(abs(float(x) - float(y)) <= tol
                                    for x, y in zip(a, b))


def _channel_rate(ch, weights, stim):
    """Effective rate of a channel at the given node state."""
    lose_sum = sum(weights[i] for i in ch.losers)
    win_sum = sum(weights[i] for i in ch.winners)
    if lose_sum <= 0 or win_sum <= 0:
        return 0
    if stim and len(ch.losers) == 1 and len(ch.winners) == 1:
        k, l = ch.losers[0], ch.winners[0]
        toward = stim.get(frozenset((k, l)))
        if toward == l:
            return ch.rate * (weights[k] + weights[l])
        if toward == k:
            return 0
    return ch.rate * (win_sum if ch.driver == "winner" else lose_sum)


def _child_of(node, ch, policy):
    w = list(node.weights)
    lose_total = sum(w[i] for i in ch.losers)
    win_total = sum(w[i] for i in ch.winners)
    factor = lose_total / win_total
    for i in ch.winners:
        w[i] = w[i] * (1 + factor)
    for i in ch.losers:
        w[i] = 0
    stim = dict(node.stim)
    first = node.first_winner
    if len(ch.winners) == 1:
        winner = ch.winners[0]
        if first is None:
            first = winner
        if policy == "first-winner":
            for x in range(len(w)):
                if x != winner:
                    stim[frozenset((x, winner))] = winner
    child = TreeNode(w, stim, first, node.depth + 1)
    event = ReductionEvent(loser=ch.losers[0], winner=ch.winners[0],
                           loser_states=ch.losers, winner_states=ch.winners)
    return event, child


def _stall_edges(node, policy, final_measurement):
    """Resolve a stalled node: cascade to the first winner or measure."""
    alive = node.alive
    edges = []
    if policy == "first-winner" and node.first_winner is not None \
            and node.weights[node.first_winner] > 0:
        win = node.first_winner
        losers = tuple(i for i in alive if i != win)
        w = [0 if i in losers else node.weights[i] for i in range(len(node.weights))]
        w[win] = sum(node.weights[i] for i in alive)
        child = TreeNode(w, node.stim, node.first_winner, node.depth + 1)
        event = ReductionEvent(loser=losers[0], winner=win, loser_states=losers,
                               kind="stall")
        edges.append((event, 1, child))
        return edges
    if not final_measurement:
        return None
    total = sum(node.weights[i] for i in alive)
    for win in alive:
        p = node.weights[win] / total
        losers = tuple(i for i in alive if i != win)
        w = [0] * len(node.weights)
        w[win] = total
        child = TreeNode(w, node.stim, node.first_winner or win, node.depth + 1)
        event = ReductionEvent(loser=losers[0], winner=win, loser_states=losers,
                               kind="measurement")
        edges.append((event, p, child))
    return edges


def enumerate_tree(initial, schedule, policy="none", final_measurement=True,
                   max_nodes=50000):
    """Exact tree of reduction scenarios with branch probabilities.

    For a single never-ending epoch the race between competing
    exponentials has closed-form branch probabilities rate/total (kept
    exact for Fraction-valued inputs). Piecewise-constant schedules
    propagate node occupancies epoch by epoch with a sparse matrix
    exponential, which resolves the probability that each branch fires
    in each epoch, before the final infinite epoch is folded in closed
    form.
    """
    if policy not in POLICIES:
        raise InvalidInputError(f"unknown policy {policy!r}")
    weights = initial.weights if isinstance(initial, Superposition) else tuple(initial)
    labels = initial.labels if isinstance(initial, Superposition) else \
        tuple(str(i + 1) for i in range(len(weights)))
    epochs = schedule.closed()
    root = TreeNode(weights)
    root.probability = 1 if isinstance(weights[0], Fraction) else 1.0

    if len(epochs) == 1:
        _race_fill(root, epochs[0][1], policy, final_measurement, [0], max_nodes)
        return DecayTree(root, labels)
    _multi_epoch_fill(root, epochs, policy, final_measurement, max_nodes)
    return DecayTree(root, labels)


def _race_fill(node, channels, policy, final_measurement, counter, max_nodes):
    if node.is_leaf:
        return
    counter[0] += 1
    if counter[0] > max_nodes:
        raise ScheduleTimeoutError("tree enumeration exceeded the node budget",
                                   partial_tree=node)
    rates = [(ch, _channel_rate(ch, node.weights, node.stim)) for ch in channels]
    rates = [(ch, r) for ch, r in rates if r > 0]
    total = sum(r for _, r in rates)
    if total == 0:
        edges = _stall_edges(node, policy, final_measurement)
        if edges is None:
            node.stalled = True
            raise ScheduleTimeoutError(
                "schedule stalls with no declared final measurement",
                partial_tree=node)
        for event, p, child in edges:
            child.probability = node.probability * p
            node.edges.append((event, p, child))
            _race_fill(child, channels, policy, final_measurement, counter, max_nodes)
        return
    for ch, r in rates:
        p = r / total
        event, child = _child_of(node, ch, policy)
        child.probability = node.probability * p
        node.edges.append((event, p, child))
        _race_fill(child, channels, policy, final_measurement, counter, max_nodes)


def _multi_epoch_fill(root, epochs, policy, final_measurement, max_nodes):
    from scipy.sparse import lil_matrix
    from scipy.sparse.linalg import expm_multiply

    # discover all nodes reachable under the union of the epochs' channels
    all_channels = []
    seen_sigs = set()
    for _, chans in epochs:
        for ch in chans:
            if ch.signature not in seen_sigs:
                seen_sigs.add(ch.signature)
                all_channels.append(ch)
    nodes = [root]
    index = {id(root): 0}
    children_by_sig = [{}]
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if not node.is_leaf:
            for ch in all_channels:
                feasible = _channel_rate(
                    ch, [1.0 if w > 0 else 0.0 for w in node.weights], {}) > 0
                if not feasible:
                    continue
                if ch.signature in children_by_sig[i]:
                    continue
                event, child = _child_of(node, ch, policy)
                nodes.append(child)
                index[id(child)] = len(nodes) - 1
                children_by_sig[i][ch.signature] = (event, len(nodes) - 1)
                children_by_sig.append({})
                if len(nodes) > max_nodes:
                    raise ScheduleTimeoutError(
                        "tree enumeration exceeded the node budget",
                        partial_tree=root)
        i += 1

    n = len(nodes)
    edge_list = []   # (parent_idx, sig, event, child_idx)
    edge_index = {}
    for pi, sigs in enumerate(children_by_sig):
        for sig, (event, ci) in sigs.items():
            edge_index[(pi, sig)] = len(edge_list)
            edge_list.append((pi, sig, event, ci))
    ne = len(edge_list)

    occ = np.zeros(n + ne)
    occ[0] = float(root.probability)
    flows = np.zeros(ne)

    for dur, chans in epochs[:-1]:
        m = lil_matrix((n + ne, n + ne))
        by_sig = {}
        for ch in chans:
            by_sig.setdefault(ch.signature, []).append(ch)
        for pi, node in enumerate(nodes):
            lam_out = 0.0
            for sig, (event, ci) in children_by_sig[pi].items():
                lam = sum(float(_channel_rate(ch, node.weights, node.stim))
                          for ch in by_sig.get(sig, ()))
                if lam <= 0.0:
                    continue
                lam_out += lam
                m[ci, pi] += lam
                m[n + edge_index[(pi, sig)], pi] += lam
            if lam_out > 0.0:
                m[pi, pi] -= lam_out
        occ = expm_multiply(m.tocsr() * dur, occ)
    flows += occ[n:]
    node_occ = occ[:n]

    # final infinite epoch: closed-form race on the remaining occupancy
    final_chans = epochs[-1][1]
    order = sorted(range(n), key=lambda i: nodes[i].depth)
    arriving = node_occ.copy()
    stall_extra = {}
    for pi in order:
        mass = arriving[pi]
        if mass <= 0.0:
            continue
        node = nodes[pi]
        if node.is_leaf:
            continue
        rates = {}
        for sig in children_by_sig[pi]:
            lam = sum(float(_channel_rate(ch, node.weights, node.stim))
                      for ch in final_chans if ch.signature == sig)
            if lam > 0.0:
                rates[sig] = lam
        total = sum(rates.values())
        if total <= 0.0:
            edges = _stall_edges(node, policy, final_measurement)
            if edges is None:
                node.stalled = True
                raise ScheduleTimeoutError(
                    "schedule stalls with no declared final measurement",
                    partial_tree=root)
            stall_extra.setdefault(pi, [])
            for event, p, child in edges:
                stall_extra[pi].append((event, float(p) * mass, child))
            continue
        for sig, lam in rates.items():
            ei = edge_index[(pi, sig)]
            share = mass * lam / total
            flows[ei] += share
            arriving[edge_list[ei][3]] += share

    # assemble the tree: probabilities and edges
    inflow = np.zeros(n)
    inflow[0] = float(root.probability)
    for ei, (pi, sig, event, ci) in enumerate(edge_list):
        inflow[ci] += flows[ei]
    for pi, node in enumerate(nodes):
        node.probability = float(inflow[pi])
        node.edges = []
    for ei, (pi, sig, event, ci) in enumerate(edge_list):
        if flows[ei] > 0.0:
            parent = nodes[pi]
            cond = flows[ei] / parent.probability if parent.probability > 0 else 0.0
            parent.edges.append((event, cond, nodes[ci]))
    for pi, extras in stall_extra.items():
        parent = nodes[pi]
        for event, mass, child in extras:
            child.probability = mass
            cond = mass / parent.probability if parent.probability > 0 else 0.0
            parent.edges.append((event, cond, child))


def final_probabilities(tree):
    """Per-state probability of being the surviving scenario."""
    dim = len(tree.root.weights)
    out = [0] * dim
    for leaf in tree.leaves():
        alive = leaf.alive
        if len(alive) != 1:
            raise InvalidInputError("tree is incomplete: a leaf still superposes")
        out[alive[0]] += leaf.probability
    total = sum(out)
    if abs(float(total) - 1.0) > 1e-9:
        raise InvalidInputError(f"leaf probabilities sum to {float(total)!r}, not 1")
    if any(isinstance(x, Fraction) for x in out):
        return out
    return np.asarray([float(x) for x in out])


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass
class RunLog:
    seed: int
    events: tuple
    final_state: int


@dataclass
class MonteCarloResult:
    frequencies: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    n_runs: int
    winners: np.ndarray
    labels: tuple
    logs: list = field(default_factory=list)

    def frequency_rows(self):
        return [(self.labels[i], float(self.frequencies[i]), float(self.stderr[i]))
                for i in range(len(self.frequencies))]


def _schedule_arrays(schedule):
    epochs = schedule.closed()
    dur = np.array([d for d, _ in epochs])
    offs = [0]
    rate, loser, winner, driver = [], [], [], []
    for _, chans in epochs:
        for ch in chans:
            rate.append(float(ch.rate))
            loser.append(sum(1 << i for i in ch.losers))
            winner.append(sum(1 << i for i in ch.winners))
            driver.append(1 if ch.driver == "winner" else -1)
        offs.append(len(rate))
    return (dur, np.asarray(offs, dtype=np.int64), np.asarray(rate),
            np.asarray(loser, dtype=np.int64), np.asarray(winner, dtype=np.int64),
            np.asarray(driver, dtype=np.int8))


def run_monte_carlo(initial, schedule, n_runs, seed, policy="none",
                    impl=None, keep_logs=False):
    """Sample the jump process ``n_runs`` times with derived seed streams."""
    if n_runs < 1:
        raise InvalidInputError("n_runs must be >= 1")
    if policy not in POLICIES:
        raise InvalidInputError(f"unknown policy {policy!r}")
    if len(initial) > 63:
        raise InvalidInputError("at most 63 states are supported")
    if policy == "first-winner":
        for _, chans in schedule.epochs:
            for ch in chans:
                if len(ch.losers) > 1 or len(ch.winners) > 1:
                    raise InvalidInputError(
                        "first-winner policy needs single-state channels")
    kern = kernels.get_impl(impl)
    dur, offs, rate, loser, winner, driver = _schedule_arrays(schedule)
    seeds = rng.derive_streams(seed, n_runs)
    pol = kern.POLICY_FIRST_WINNER if policy == "first-winner" else kern.POLICY_BORN
    winners, n_ev, ev_t, ev_a, ev_b, ev_ch, ev_kind = kern.mc_runs(
        seeds, initial.array, dur, offs, rate, loser, winner, driver, pol,
        max_ev=len(initial) + 1)
    counts = np.bincount(winners, minlength=len(initial)).astype(np.int64)
    freq = counts / n_runs
    stderr = np.sqrt(freq * (1.0 - freq) / n_runs)
    result = MonteCarloResult(freq, stderr, counts, n_runs, winners,
                              initial.labels)
    if keep_logs:
        kinds = {0: "field", 1: "measurement", 2: "stall"}
        for r in range(n_runs):
            evs = tuple(
                ReductionEvent(loser=int(ev_a[r, k]), winner=int(ev_b[r, k]),
                               time=float(ev_t[r, k]), kind=kinds[int(ev_kind[r, k])])
                for k in range(int(n_ev[r])))
            result.logs.append(RunLog(int(seeds[r]), evs, int(winners[r])))
    return result
