"""Discrete-time Monte Carlo of the queue-coupled Poisson cellular network.

Base stations and users are Poisson-deployed on a square torus (wrap-around
distances keep every cell statistically typical).  Each base station holds
an infinite FIFO buffer fed by Bernoulli(xi) arrivals; every slot all
stations with a nonempty buffer transmit, each tagged user passes iff its
SIR over the concurrently active set clears theta, and failures stay queued
for retransmission.  No independence shortcut is taken across slots: queues
carry their full history, which is exactly what makes agreement with the
mean-field analysis a meaningful validation.

Per-slot transmission outcomes follow one of two statistically identical
routes (see SimConfig.algorithm): explicit unit-mean exponential fades per
active link, or a Bernoulli draw with the fading-averaged conditional
success probability exp(-sum_active ln(1 + theta * gain ratio)).  Fades are
independent across receivers and slots, so the marginalization is exact;
the conditional route is the production path because it turns the slot
update into sparse column toggles.

Randomness comes from counter-based Philox streams keyed by
(seed, realization, purpose), making every statistic reproducible and
independent of execution order or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from scipy.spatial import cKDTree

from . import kernels
from .cdfgrid import CdfGrid, default_grid
from .config import SimConfig
from .errors import DomainError, EmptyRealizationError, InsufficientDataError

_PURPOSE_BS = 0
_PURPOSE_UE = 1
_PURPOSE_FALLBACK = 2
_PURPOSE_ARRIVALS = 3
_PURPOSE_SUCCESS = 4
_PURPOSE_FADING = 5
_PURPOSE_TAG = 6

MIN_SURVIVING_LINKS = 500


def stream(seed: int, realization: int, purpose: int) -> np.random.Generator:
    """Philox stream for one (realization, purpose) pair under a root seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(realization, purpose))
    return np.random.Generator(np.random.Philox(ss))


def generate_ppp(density: float, side: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson point process on the [0, side)^2 torus; (n, 2) array."""
    if density * side**2 <= 0.0:
        raise DomainError("expected point count must be positive")
    n = rng.poisson(density * side**2)
    return rng.random((n, 2)) * side


def _torus_distance(a: np.ndarray, b: np.ndarray, side: float) -> np.ndarray:
    """Pairwise wrap-around distances between (n,2) and (m,2) point sets."""
    d = np.abs(a[:, None, :] - b[None, :, :])
    d = np.minimum(d, side - d)
    return np.hypot(d[..., 0], d[..., 1])


@dataclass
class NetworkRealization:
    side: float
    alpha: float
    bs_points: np.ndarray          # (n_bs, 2)
    ue_points: np.ndarray          # (n_ue, 2) as drawn
    association: np.ndarray        # (n_ue,) nearest-BS index per drawn UE
    tagged_pos: np.ndarray         # (n_bs, 2) measured UE per cell
    tagged_dist: np.ndarray        # (n_bs,) serving distance
    tagged_synthetic: np.ndarray   # (n_bs,) True where the cell drew no UE

    @property
    def n_bs(self) -> int:
        return len(self.bs_points)

    def gain_matrix(self) -> np.ndarray:
        """Dense (receiver, transmitter) path-gain ratios (r_j / d_ji)**alpha.

        Reference-scale helper (quadratic memory); the production path uses
        pruned sparse columns of ln(1 + theta * ratio) instead.
        """
        d = _torus_distance(self.tagged_pos, self.bs_points, self.side)
        ratio = (self.tagged_dist[:, None] / d) ** self.alpha
        np.fill_diagonal(ratio, 0.0)
        return ratio


def _nearest_bs(tree: cKDTree, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest BS with deterministic lowest-index tie-breaking."""
    if len(pts) == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    d, idx = tree.query(pts, k=2)
    tie = d[:, 0] == d[:, 1]
    best = np.where(tie, np.minimum(idx[:, 0], idx[:, 1]), idx[:, 0])
    return d[:, 0], best.astype(np.int64)


def build_realization(cfg: SimConfig, realization: int = 0) -> NetworkRealization:
    """Draw one network: points, nearest-BS association, one tagged UE per cell.

    Tagging follows cfg.tag_policy among the cell's associated UEs; cells
    that drew none receive a synthetic UE placed uniformly inside the cell
    (rejection from the torus), honoring the at-least-one-UE assumption.
    """
    bs = generate_ppp(cfg.lambda_b, cfg.region_side, stream(cfg.seed, realization, _PURPOSE_BS))
    if len(bs) == 0:
        raise EmptyRealizationError("no base stations drawn")
    ue = generate_ppp(cfg.lambda_u, cfg.region_side, stream(cfg.seed, realization, _PURPOSE_UE))
    tree = cKDTree(bs, boxsize=cfg.region_side)
    ue_dist, assoc = _nearest_bs(tree, ue)

    n = len(bs)
    tag_pos = np.zeros((n, 2))
    tag_dist = np.zeros(n)
    chosen = np.full(n, -1, dtype=np.int64)
    if len(ue):
        if cfg.tag_policy == "uniform":
            order = stream(cfg.seed, realization, _PURPOSE_TAG).permutation(len(ue))
        else:  # nearest associated UE
            order = np.argsort(ue_dist, kind="stable")
        for j in order:
            c = assoc[j]
            if chosen[c] < 0:
                chosen[c] = j
    filled = chosen >= 0
    tag_pos[filled] = ue[chosen[filled]]
    tag_dist[filled] = ue_dist[chosen[filled]]

    missing = np.flatnonzero(~filled)
    fb = stream(cfg.seed, realization, _PURPOSE_FALLBACK)
    guard = 0
    while len(missing):
        cand = fb.random((max(4 * len(missing), 64), 2)) * cfg.region_side
        d, owner = _nearest_bs(tree, cand)
        for j in range(len(cand)):
            c = owner[j]
            if not filled[c]:
                filled[c] = True
                tag_pos[c] = cand[j]
                tag_dist[c] = d[j]
        missing = np.flatnonzero(~filled)
        guard += 1
        if guard > 10_000:
            raise RuntimeError("in-cell rejection sampling failed to terminate")

    return NetworkRealization(
        side=cfg.region_side,
        alpha=cfg.alpha,
        bs_points=bs,
        ue_points=ue,
        association=assoc,
        tagged_pos=tag_pos,
        tagged_dist=tag_dist,
        tagged_synthetic=~(chosen >= 0),
    )


def prune_radius(net: NetworkRealization, cfg: SimConfig) -> np.ndarray:
    """Per-receiver keep radius of the interference footprint.

    The p-th nearest interferer of a receiver at serving distance r
    contributes ~ theta * p**(-alpha/2) to the summed ln-kernel; keeping
    ranks up to K with theta * K**(1-alpha/2) / (alpha/2 - 1) = budget/2
    bounds the expected dropped mass by half the budget, and a 15% radius
    margin (32% in area/rank) absorbs the Poisson fluctuation of the tail.
    The model is validated against exact dropped sums in the test suite.
    """
    p = cfg.alpha / 2.0
    budget = max(cfg.prune_budget, 1e-12)
    k_keep = (2.0 * cfg.theta / ((p - 1.0) * budget)) ** (1.0 / (p - 1.0))
    if k_keep < 1.0:
        k_keep = 1.0
    cut = cfg.theta * k_keep ** (-p)
    radius = net.tagged_dist * (cfg.theta / math.expm1(cut)) ** (1.0 / cfg.alpha)
    return np.minimum(1.15 * radius, net.side)


def interference_columns(net: NetworkRealization, cfg: SimConfig) -> sp.csc_matrix:
    """Sparse columns of c[j, i] = ln(1 + theta * (r_j / d_ji)**alpha).

    Column i is the interference footprint of transmitter i on every tagged
    receiver j (diagonal excluded).  Entries beyond the per-receiver prune
    radius are dropped: their summed ln-mass is bounded by cfg.prune_budget,
    i.e. a worst-case conditional-coverage bias below exp(prune_budget) - 1.
    """
    n = net.n_bs
    theta = cfg.theta
    if theta == 0.0:
        return sp.csc_matrix((n, n), dtype=np.float32)
    radius2 = prune_radius(net, cfg) ** 2
    r2 = net.tagged_dist**2
    rows, cols, vals = [], [], []
    block = max(1, min(n, int(2e6 // max(n, 1))))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        d = np.abs(net.tagged_pos[lo:hi, None, :] - net.bs_points[None, :, :])
        d = np.minimum(d, net.side - d)
        d2 = d[..., 0] ** 2 + d[..., 1] ** 2
        keep = d2 <= radius2[lo:hi, None]
        keep[np.arange(lo, hi) - lo, np.arange(lo, hi)] = False
        r, k = np.nonzero(keep)
        c = np.log1p(theta * (r2[r + lo] / d2[r, k]) ** (cfg.alpha / 2.0))
        rows.append((r + lo).astype(np.int32))
        cols.append(k.astype(np.int32))
        vals.append(c.astype(np.float32))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsc()


# -- reference single-slot dynamics -----------------------------------------


@dataclass
class QueueState:
    """Mutable queue bookkeeping for the reference slot loop."""

    n: int
    slot: int = 0
    pending: list = field(default_factory=list)  # per-BS FIFO of arrival slots

    def __post_init__(self):
        if not self.pending:
            self.pending = [[] for _ in range(self.n)]

    @property
    def buffer_len(self) -> np.ndarray:
        return np.array([len(p) for p in self.pending], dtype=np.int64)

    def head_age(self) -> np.ndarray:
        """Slots since the head-of-line packet arrived (0 for empty buffers)."""
        return np.array(
            [self.slot - p[0] if p else 0 for p in self.pending], dtype=np.int64
        )


@dataclass
class SlotOutcome:
    active: np.ndarray
    success: np.ndarray
    sojourns: list            # (link, sojourn) pairs delivered this slot
    sir: np.ndarray | None    # per-link SIR, fading mode only
    success_prob: np.ndarray | None  # per-link exp(-v), conditional mode only


def step_slot(
    net: NetworkRealization,
    state: QueueState,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
    *,
    arrivals: np.ndarray | None = None,
    success_u: np.ndarray | None = None,
    fading_serve: np.ndarray | None = None,
    fading_cross: np.ndarray | None = None,
    gains: np.ndarray | None = None,
) -> SlotOutcome:
    """Advance one slot: departures at the slot boundary, then arrivals.

    Every station with a nonempty buffer transmits.  In "fading" mode the
    SIR of each tagged link is assembled from explicit exponential fades
    over all concurrently active stations and compared to theta (an idle
    network yields infinite SIR, so isolated transmitters always succeed);
    in "conditional" mode the success indicator is drawn with the exact
    fading-averaged probability.  Draws come from `rng` unless explicit
    arrays are supplied (tests pin them).
    """
    n = net.n_bs
    if gains is None:
        gains = net.gain_matrix()
    buf = state.buffer_len
    active = buf > 0
    ia = np.flatnonzero(active)
    success = np.zeros(n, dtype=bool)
    sir = None
    prob = None
    if len(ia):
        if cfg.algorithm == "fading":
            if fading_serve is None:
                fading_serve = rng.exponential(1.0, n)
            if fading_cross is None:
                fading_cross = rng.exponential(1.0, (n, len(ia)))
            interference = fading_cross * gains[:, ia]
            sir = np.full(n, np.inf)
            for pos, j in enumerate(ia):
                denom = interference[j].sum() - interference[j, pos]
                sir[j] = fading_serve[j] / denom if denom > 0 else np.inf
            success[ia] = sir[ia] >= cfg.theta
        else:
            v = np.log1p(cfg.theta * gains[:, ia]).sum(axis=1)
            prob = np.exp(-v)
            if success_u is None:
                success_u = rng.random(n)
            success[ia] = success_u[ia] < prob[ia]
    sojourns = []
    for j in np.flatnonzero(success):
        arrived = state.pending[j].pop(0)
        sojourns.append((int(j), state.slot - arrived))
    if arrivals is None:
        arrivals = rng.random(n) < cfg.xi
    for j in np.flatnonzero(arrivals):
        state.pending[j].append(state.slot)
    state.slot += 1
    return SlotOutcome(active=active, success=success, sojourns=sojourns, sir=sir, success_prob=prob)


# -- production runs ----------------------------------------------------------


@dataclass
class LinkStats:
    """Per-link counters of one realization (or a concatenation of several).

    attempts == active_slots in this transmission model (an active station
    always transmits); both are kept because they answer different
    questions.  Conservation holds exactly per link:
    arrivals == delivered + censored, censored being the packets still
    buffered at the horizon.
    """

    attempts: np.ndarray
    successes: np.ndarray
    active_slots: np.ndarray
    arrivals: np.ndarray
    delivered: np.ndarray
    delivered_measured: np.ndarray
    sojourn_sum_measured: np.ndarray
    censored: np.ndarray
    measure_slots: int
    realization: np.ndarray

    @property
    def n_links(self) -> int:
        return len(self.attempts)

    @staticmethod
    def concat(parts: list["LinkStats"]) -> "LinkStats":
        if not parts:
            raise ValueError("nothing to concatenate")
        ms = {p.measure_slots for p in parts}
        if len(ms) != 1:
            raise ValueError("mixed measurement windows")
        return LinkStats(
            **{
                name: np.concatenate([getattr(p, name) for p in parts])
                for name in (
                    "attempts",
                    "successes",
                    "active_slots",
                    "arrivals",
                    "delivered",
                    "delivered_measured",
                    "sojourn_sum_measured",
                    "censored",
                    "realization",
                )
            },
            measure_slots=ms.pop(),
        )


def _as_merged(stats) -> LinkStats:
    if isinstance(stats, LinkStats):
        return stats
    return LinkStats.concat(list(stats))


def run_realization(cfg: SimConfig, realization: int) -> LinkStats:
    """Simulate one network realization end to end (kernel path)."""
    net = build_realization(cfg, realization)
    n = net.n_bs
    csc = interference_columns(net, cfg)
    total = cfg.total_slots

    v = np.zeros(n)
    buf = np.zeros(n, dtype=np.int64)
    active = np.zeros(n, dtype=np.uint8)
    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    active_slots = np.zeros(n, dtype=np.int64)
    success_hist = np.zeros((total, n), dtype=np.uint8)
    arrivals_hist = np.zeros((total, n), dtype=np.uint8)

    arr_rng = stream(cfg.seed, realization, _PURPOSE_ARRIVALS)
    suc_rng = stream(cfg.seed, realization, _PURPOSE_SUCCESS)
    indptr = csc.indptr.astype(np.int32)
    indices = csc.indices.astype(np.int32)
    data = csc.data.astype(np.float32)

    chunk = max(1, cfg.resync_every)
    for lo in range(0, total, chunk):
        hi = min(total, lo + chunk)
        arr = (arr_rng.random((hi - lo, n)) < cfg.xi).astype(np.uint8)
        su = suc_rng.random((hi - lo, n))
        arrivals_hist[lo:hi] = arr
        count = np.zeros(hi - lo, dtype=np.uint8)
        sel = (np.arange(lo, hi) >= cfg.warmup_slots)
        count[sel] = 1
        kernels.slot_chunk(
            v, buf, active, indptr, indices, data,
            arr, su, success_hist[lo:hi], count,
            attempts, successes, active_slots,
        )
        # refresh v from scratch: kills float drift of the incremental toggles
        v[:] = csc @ active.astype(np.float64)

    arrivals_total = arrivals_hist.sum(axis=0, dtype=np.int64)
    delivered_total = success_hist.sum(axis=0, dtype=np.int64)
    delivered_measured = np.zeros(n, dtype=np.int64)
    sojourn_sum = np.zeros(n, dtype=np.int64)
    w0 = cfg.warmup_slots
    for j in range(n):
        dels = np.flatnonzero(success_hist[:, j])
        if len(dels) == 0:
            continue
        arrs = np.flatnonzero(arrivals_hist[:, j])[: len(dels)]
        sojourn = dels - arrs  # FIFO: k-th delivery clears the k-th arrival
        in_window = dels >= w0
        delivered_measured[j] = int(in_window.sum())
        sojourn_sum[j] = int(sojourn[in_window].sum())

    return LinkStats(
        attempts=attempts,
        successes=successes,
        active_slots=active_slots,
        arrivals=arrivals_total,
        delivered=delivered_total,
        delivered_measured=delivered_measured,
        sojourn_sum_measured=sojourn_sum,
        censored=buf.copy(),
        measure_slots=cfg.measure_slots,
        realization=np.full(n, realization, dtype=np.int64),
    )


def run_simulation(cfg: SimConfig, n_jobs: int = 1) -> list[LinkStats]:
    """All realizations, optionally in parallel; output independent of n_jobs."""
    if cfg.algorithm == "fading":
        return [_run_realization_fading(cfg, r) for r in range(cfg.realizations)]
    if n_jobs == 1 or cfg.realizations == 1:
        return [run_realization(cfg, r) for r in range(cfg.realizations)]
    return Parallel(n_jobs=n_jobs)(
        delayed(run_realization)(cfg, r) for r in range(cfg.realizations)
    )


def _run_realization_fading(cfg: SimConfig, realization: int) -> LinkStats:
    """Reference realization with explicit per-slot fades (small scale only)."""
    net = build_realization(cfg, realization)
    n = net.n_bs
    gains = net.gain_matrix()
    state = QueueState(n)
    arr_rng = stream(cfg.seed, realization, _PURPOSE_ARRIVALS)
    fad_rng = stream(cfg.seed, realization, _PURPOSE_FADING)

    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    arrivals_total = np.zeros(n, dtype=np.int64)
    delivered_total = np.zeros(n, dtype=np.int64)
    delivered_measured = np.zeros(n, dtype=np.int64)
    sojourn_sum = np.zeros(n, dtype=np.int64)

    for t in range(cfg.total_slots):
        arrivals = arr_rng.random(n) < cfg.xi
        out = step_slot(net, state, cfg, fad_rng, arrivals=arrivals, gains=gains)
        arrivals_total += arrivals
        delivered_total += out.success
        if t >= cfg.warmup_slots:
            attempts += out.active
            successes += out.success
            for j, s in out.sojourns:
                delivered_measured[j] += 1
                sojourn_sum[j] += s
    return LinkStats(
        attempts=attempts,
        successes=successes,
        active_slots=attempts.copy(),
        arrivals=arrivals_total,
        delivered=delivered_total,
        delivered_measured=delivered_measured,
        sojourn_sum_measured=sojourn_sum,
        censored=state.buffer_len,
        measure_slots=cfg.measure_slots,
        realization=np.full(n, realization, dtype=np.int64),
    )


# -- empirical statistics ------------------------------------------------------


def empirical_meta_cdf(stats, min_attempts: int = 1, grid_size: int = 201) -> CdfGrid:
    """Empirical CDF of per-link conditional success fractions.

    Links with fewer than min_attempts measured transmission attempts carry
    no conditional information and are excluded; fewer than
    MIN_SURVIVING_LINKS survivors raise InsufficientDataError.
    """
    if min_attempts < 1:
        raise DomainError("min_attempts must be a positive integer")
    s = _as_merged(stats)
    ok = s.attempts >= min_attempts
    if int(ok.sum()) < MIN_SURVIVING_LINKS:
        raise InsufficientDataError(
            f"only {int(ok.sum())} links with >= {min_attempts} attempts "
            f"(need {MIN_SURVIVING_LINKS})"
        )
    fractions = s.successes[ok] / s.attempts[ok]
    return CdfGrid.from_samples(fractions, default_grid(grid_size))


@dataclass
class DelayDistribution:
    """Per-link mean-delay law: finite part plus a mass at infinity.

    Links whose censored packets outnumber their deliveries are classified
    unstable and assigned infinite delay; `outage` is their fraction.
    """

    delays: np.ndarray  # sorted finite per-link means
    n_links: int
    outage: float

    def cdf(self, T) -> np.ndarray | float:
        pos = np.searchsorted(self.delays, np.asarray(T, dtype=float), side="right")
        return pos / self.n_links


def empirical_delay_cdf(stats) -> DelayDistribution:
    s = _as_merged(stats)
    unstable = s.censored > s.delivered
    usable = (~unstable) & (s.delivered_measured > 0)
    means = np.sort(s.sojourn_sum_measured[usable] / s.delivered_measured[usable])
    n_links = int(usable.sum() + unstable.sum())
    return DelayDistribution(
        delays=means, n_links=n_links, outage=float(unstable.sum() / n_links)
    )


def empirical_active_prob(stats) -> float:
    """Mean over links of the fraction of measured slots spent transmitting."""
    s = _as_merged(stats)
    if s.n_links == 0:
        raise InsufficientDataError("no links")
    return float(np.mean(s.active_slots / s.measure_slots))


def dump_links(stats, path) -> None:
    """Columnar text dump, one row per link."""
    s = _as_merged(stats)
    mean_sojourn = np.divide(
        s.sojourn_sum_measured,
        s.delivered_measured,
        out=np.zeros(s.n_links),
        where=s.delivered_measured > 0,
    )
    with open(path, "w") as fh:
        fh.write("attempts successes active_slots mean_sojourn censored\n")
        for i in range(s.n_links):
            fh.write(
                f"{s.attempts[i]} {s.successes[i]} {s.active_slots[i]} "
                f"{mean_sojourn[i]:.6f} {s.censored[i]}\n"
            )
