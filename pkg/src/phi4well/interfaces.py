"""Path observables: crossing detectors, step profiles and rate functionals.

Everything here consumes sampled paths (or profiles already reduced to steps)
and produces the event-level statistics the experiments aggregate: hysteresis
stopping times, zero returns with their genuine/spurious labels, first
transition times, L^p geometry of the step manifold, and the energy
functionals evaluated along paths.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import _backend
from .potential import Potential, agmon_distance
from .sampler import PathSample, TransitionKernel

__all__ = [
    "CrossingConfig",
    "CrossingRecord",
    "EventSample",
    "GridResampleWarning",
    "PointProcess",
    "StepProfile",
    "count_well_switches",
    "crossing_record_rows",
    "default_crossing_config",
    "detect_hysteresis_crossings",
    "detect_zero_returns",
    "dist_to_manifold",
    "extract_point_process",
    "first_transition_time",
    "first_transition_times",
    "hitting_time_of_zero",
    "hitting_times_of_zero",
    "lp_distance",
    "modica_mortola",
    "path_rate",
    "project_to_steps",
    "rate_function",
    "write_crossing_csv",
]

#: Surface tension of the standard quartic double well, used as the default
#: jump cost in the rate function.
C_W_QUARTIC = 4.0 / 3.0


class GridResampleWarning(UserWarning):
    """Raised when lp_distance has to interpolate one input onto the other's grid."""


@dataclass(frozen=True)
class CrossingConfig:
    """Thresholds and separation time for the crossing detectors.

    rho1/rho2 set the hysteresis levels 1-rho1 (deep well) and 1-rho2
    (inner); t_sep is the memory of the zero-return detector; ell the
    nominal path length the config was built for.
    """

    rho1: float = 0.2
    rho2: float = 0.6
    t_sep: float = 20.0
    ell: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.rho1 < self.rho2 < 1.0:
            raise ValueError("need 0 < rho1 < rho2 < 1")
        if self.t_sep <= 0:
            raise ValueError("t_sep must be positive")
        if self.ell <= 0:
            raise ValueError("ell must be positive")


def default_crossing_config(beta: float, ell: float) -> CrossingConfig:
    """Defaults: rho1=0.2, rho2=0.6, t_sep = max(10 beta, 20)."""
    return CrossingConfig(rho1=0.2, rho2=0.6, t_sep=max(10.0 * beta, 20.0), ell=ell)


@dataclass(frozen=True)
class CrossingRecord:
    """Events detected on one path.

    sigma_times/sigma_labels hold the alternating hysteresis sequence (labels
    are the signed levels hit).  tau_times are zero returns separated by at
    least t_sep; probe_signs the path sign one t_sep after each return;
    genuine marks the sign-changing ones.  Z counts all returns, N the
    genuine subset, so N <= Z by construction.
    """

    sigma_times: np.ndarray
    sigma_labels: np.ndarray
    tau_times: np.ndarray
    probe_signs: np.ndarray
    genuine: np.ndarray

    def __post_init__(self) -> None:
        if self.sigma_times.size and np.any(np.diff(self.sigma_times) <= 0):
            raise ValueError("sigma_times must be strictly increasing")
        if self.tau_times.size and np.any(np.diff(self.tau_times) <= 0):
            raise ValueError("tau_times must be strictly increasing")
        if self.genuine.size != self.tau_times.size:
            raise ValueError("one genuine flag per return")

    @property
    def Z(self) -> int:
        return int(self.tau_times.size)

    @property
    def N(self) -> int:
        return int(np.count_nonzero(self.genuine))


def _empty_record(**parts) -> CrossingRecord:
    base = dict(
        sigma_times=np.empty(0),
        sigma_labels=np.empty(0),
        tau_times=np.empty(0),
        probe_signs=np.empty(0, dtype=np.int8),
        genuine=np.empty(0, dtype=bool),
    )
    base.update(parts)
    return CrossingRecord(**base)


def detect_hysteresis_crossings(path: PathSample, cfg: CrossingConfig) -> CrossingRecord:
    """Alternating first-hitting times of the outer/inner levels.

    Even events hit |x| >= 1-rho1 (deep in a well), odd events hit
    |x| <= 1-rho2 (back inside the barrier region); each search starts
    strictly after the previous event, and a hit on the grid is the first
    sample at or beyond the level.  Labels are the signed levels.
    """
    x = path.values
    outer, inner = 1.0 - cfg.rho1, 1.0 - cfg.rho2
    times, labels = [], []
    i, n = 0, x.size
    want_outer = True
    while i < n:
        hit = np.abs(x[i:]) >= outer if want_outer else np.abs(x[i:]) <= inner
        j = int(np.argmax(hit))
        if not hit[j]:
            break
        i += j
        level = outer if want_outer else inner
        times.append(i * path.dt)
        labels.append(float(np.sign(x[i])) * level)
        want_outer = not want_outer
        i += 1
    return _empty_record(sigma_times=np.asarray(times), sigma_labels=np.asarray(labels))


def count_well_switches(record: CrossingRecord) -> int:
    """Completed excursions: consecutive outer labels with opposite signs."""
    outer = record.sigma_labels[0::2]
    return int(np.count_nonzero(outer[1:] * outer[:-1] < 0))


def _zero_hits(signs: np.ndarray) -> np.ndarray:
    """Indices of zero hits: exact center-node landing or a sign change
    between consecutive samples (event time = the later sample)."""
    flips = (signs[1:] * signs[:-1] < 0) | (signs[1:] == 0)
    return 1 + np.flatnonzero(flips)


def detect_zero_returns(path: PathSample, cfg: CrossingConfig) -> CrossingRecord:
    """Zero returns separated by t_sep, with genuine/spurious labels.

    Returns are greedy: the first zero hit at or after t_sep past the
    previous return (the first ever must also wait t_sep), stopping at
    ell - 2 t_sep.  A return is genuine when the path sign one t_sep after
    it differs from the reference sign (the sign one t_sep after the
    previous return, seeded by the sign at t_sep); a zero probe updates the
    reference to 0 and can never flag a flip itself.
    """
    ell = path.length
    if not cfg.t_sep < ell / 4:
        raise ValueError("need t_sep < ell/4")
    r0 = int(round(cfg.t_sep / path.dt))
    if r0 < 1:
        raise ValueError("t_sep must be at least one sample step")
    sg = np.sign(path.values).astype(np.int8)
    hits = _zero_hits(sg)
    is_landing = sg[hits] == 0
    cap = ell - 2.0 * cfg.t_sep
    taus = []
    prev = 0
    for i, landed in zip(hits, is_landing):
        if i * path.dt >= cap:
            break
        # a flip event straddles (i-1, i): both samples must sit past the
        # previous probe, costing one extra step of separation
        if i >= prev + r0 + (0 if landed else 1):
            taus.append(int(i))
            prev = int(i)
    taus_idx = np.asarray(taus, dtype=np.int64)
    ref = int(sg[r0])
    probes = np.empty(taus_idx.size, dtype=np.int8)
    genuine = np.empty(taus_idx.size, dtype=bool)
    for k, i in enumerate(taus_idx):
        pv = int(sg[i + r0])
        probes[k] = pv
        genuine[k] = ref * pv < 0
        ref = pv
    return _empty_record(
        tau_times=taus_idx * path.dt, probe_signs=probes, genuine=genuine
    )


# ---------------------------------------------------------------------------
# event sampling straight from the kernel chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventSample:
    """Per-replica event times with censoring flags (never dropped).

    Censored entries carry the budget time, so exposure-based estimators can
    use them directly.  return_counts is the number of zero returns the
    first-transition machine examined before stopping (0 for plain hitting).
    """

    times: np.ndarray
    censored: np.ndarray
    return_counts: np.ndarray

    def __post_init__(self) -> None:
        if self.times.size != self.censored.size:
            raise ValueError("one censoring flag per time")


def _kernel_lbar(kernel: TransitionKernel) -> float:
    gap = float(kernel.spectrum[1] - kernel.spectrum[0])
    if gap <= 0:
        raise ValueError("kernel spectrum has no positive gap")
    return 2.0 / gap


def first_transition_times(
    kernel: TransitionKernel,
    cfg: CrossingConfig,
    seed: int,
    n_replicas: int,
    start: str = "pi",
    budget_factor: float = 20.0,
    rep_start: int = 0,
) -> EventSample:
    """First sign-changing zero return (the zeta observable) per replica.

    Simulates the stationary chain until the zero-return/probe machine sees
    its first genuine transition; replicas still running after
    budget_factor * lbar are flagged censored with the budget as their time.
    """
    ip, ia = kernel.init_tables(start)
    sp, sa = kernel.step_tables()
    budget = int(np.ceil(budget_factor * _kernel_lbar(kernel) / kernel.dt))
    sep_steps = int(round(cfg.t_sep / kernel.dt))
    steps, returns = _backend.chain_first_transition(
        ip, ia, sp, sa, kernel.node_signs(), sep_steps, budget, seed, rep_start, n_replicas
    )
    censored = steps < 0
    times = np.where(censored, budget, steps).astype(float) * kernel.dt
    return EventSample(times=times, censored=censored, return_counts=returns)


def first_transition_time(
    kernel: TransitionKernel, cfg: CrossingConfig, seed: int, start: str = "pi"
) -> Tuple[float, bool]:
    s = first_transition_times(kernel, cfg, seed, 1, start)
    return float(s.times[0]), bool(s.censored[0])


def hitting_times_of_zero(
    kernel: TransitionKernel,
    seed: int,
    n_replicas: int,
    start: str = "pi_plus",
    budget_factor: float = 20.0,
    rep_start: int = 0,
) -> EventSample:
    """First zero hit per replica, no separation constraint."""
    ip, ia = kernel.init_tables(start)
    sp, sa = kernel.step_tables()
    budget = int(np.ceil(budget_factor * _kernel_lbar(kernel) / kernel.dt))
    steps = _backend.chain_hit_zero(
        ip, ia, sp, sa, kernel.node_signs(), budget, seed, rep_start, n_replicas
    )
    censored = steps < 0
    times = np.where(censored, budget, steps).astype(float) * kernel.dt
    return EventSample(
        times=times, censored=censored,
        return_counts=np.zeros(n_replicas, dtype=np.int64),
    )


def hitting_time_of_zero(
    kernel: TransitionKernel, seed: int, start: str = "pi_plus"
) -> Tuple[float, bool]:
    s = hitting_times_of_zero(kernel, seed, 1, start)
    return float(s.times[0]), bool(s.censored[0])


# ---------------------------------------------------------------------------
# step profiles and the jump manifold
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepProfile:
    """Two-valued profile on [0,1): initial_sign, flipped at each jump."""

    initial_sign: int
    jumps: np.ndarray

    def __post_init__(self) -> None:
        if self.initial_sign not in (-1, 1):
            raise ValueError("initial_sign must be +1 or -1")
        j = np.asarray(self.jumps, dtype=float)
        object.__setattr__(self, "jumps", j)
        if j.size and not (0.0 < j[0] and j[-1] < 1.0 and np.all(np.diff(j) > 0)):
            raise ValueError("jumps must be strictly increasing inside (0, 1)")

    @property
    def size(self) -> int:
        return int(self.jumps.size)

    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[0.0], self.jumps, [1.0]])

    def segment_values(self) -> np.ndarray:
        return self.initial_sign * (-1.0) ** np.arange(self.jumps.size + 1)

    def value(self, s) -> np.ndarray:
        """Right-continuous evaluation at s in [0, 1]."""
        k = np.searchsorted(self.jumps, np.asarray(s, dtype=float), side="right")
        return self.initial_sign * (-1.0) ** k


def project_to_steps(path: PathSample, cfg: CrossingConfig) -> StepProfile:
    """Step profile with jumps at the rescaled genuine return times."""
    record = detect_zero_returns(path, cfg)
    nz = np.flatnonzero(path.values)
    sign = int(np.sign(path.values[nz[0]])) if nz.size else 1
    return StepProfile(
        initial_sign=sign, jumps=record.tau_times[record.genuine] / path.length
    )


def _mismatch_length(a: StepProfile, b: StepProfile) -> float:
    """Lebesgue measure of {s : a(s) != b(s)} for two-valued profiles."""
    cuts = np.unique(np.concatenate([a.breakpoints(), b.breakpoints()]))
    mids = 0.5 * (cuts[1:] + cuts[:-1])
    differ = a.value(mids) != b.value(mids)
    return float(np.sum((cuts[1:] - cuts[:-1])[differ]))


def lp_distance(a, b, p: float = 2.0) -> float:
    """L^p distance on [0,1] between rescaled paths and/or step profiles.

    Step-vs-step inputs are integrated exactly; sampled inputs use the
    trapezoid rule.  Mismatched sample grids are handled by interpolating
    the coarser input onto the finer grid, with a GridResampleWarning.
    """
    if p < 1.0:
        raise ValueError("need p >= 1")
    if isinstance(a, StepProfile) and isinstance(b, StepProfile):
        return 2.0 * _mismatch_length(a, b) ** (1.0 / p)
    sa, ya = _as_samples(a)
    sb, yb = _as_samples(b)
    if sa.size != sb.size or not np.array_equal(sa, sb):
        s = sa if sa.size >= sb.size else sb
        warnings.warn(
            "inputs on different grids: resampling to the finer one",
            GridResampleWarning,
            stacklevel=2,
        )
        ya, yb = _resample(a, sa, ya, s), _resample(b, sb, yb, s)
    else:
        s = sa
    return float(np.trapezoid(np.abs(ya - yb) ** p, s) ** (1.0 / p))


def _as_samples(obj):
    if isinstance(obj, StepProfile):
        s = np.concatenate([[0.0], obj.jumps, [1.0]])
        return s, obj.value(s)
    if isinstance(obj, PathSample):
        return obj.times() / obj.length, obj.values
    s, y = obj
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if s.size != y.size or s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("need matching strictly increasing sample grid")
    return s, y


def _resample(obj, s_own, y_own, s):
    if s_own.size == s.size and np.array_equal(s_own, s):
        return y_own
    if isinstance(obj, StepProfile):
        return obj.value(s)
    return np.interp(s, s_own, y_own)


def dist_to_manifold(m: StepProfile, n: int, p: float = 1.0) -> float:
    """Exact L^p distance from m to the profiles with at most n jumps.

    For two-valued steps |a-b| is 0 or 2, so the distance is
    2 * (mismatch length)^{1/p} and the optimal candidate places its jumps
    on m's breakpoints or segment midpoints; those are searched exhaustively
    over every sign and every admissible jump count.
    """
    if p < 1.0:
        raise ValueError("need p >= 1")
    if n < 0:
        raise ValueError("need n >= 0")
    if n > m.size + 8:
        raise ValueError("search bound: n may exceed the jump count by at most 8")
    if m.size <= n:
        return 0.0
    bp = m.breakpoints()
    candidates = np.unique(np.concatenate([m.jumps, 0.5 * (bp[1:] + bp[:-1])]))
    best = np.inf
    from itertools import combinations

    for k in range(n + 1):
        for jumps in combinations(candidates, k):
            for sign in (-1, 1):
                c = StepProfile(initial_sign=sign, jumps=np.asarray(jumps))
                best = min(best, _mismatch_length(m, c))
    return 2.0 * best ** (1.0 / p)


def rate_function(m: StepProfile, alpha: float, c_w: float = C_W_QUARTIC) -> float:
    """Large-deviation cost (c_w - alpha) per jump, alpha in [0, c_w)."""
    if not 0.0 <= alpha < c_w:
        raise ValueError("need 0 <= alpha < c_w")
    return (c_w - alpha) * m.size


# ---------------------------------------------------------------------------
# energy functionals along paths
# ---------------------------------------------------------------------------


def _rescaled(path, length: Optional[float]):
    if isinstance(path, PathSample):
        return path.times() / path.length, path.values, path.length
    y = np.asarray(path, dtype=float)
    if length is None:
        raise ValueError("length required for bare sample arrays")
    return np.linspace(0.0, 1.0, y.size), y, float(length)


def modica_mortola(path, length: Optional[float] = None, potential: Optional[Potential] = None) -> float:
    """Rescaled free energy: int_0^1 [ (X')^2/(2 ell) + ell W(X) ] ds."""
    from .potential import quartic_potential

    s, y, ell = _rescaled(path, length)
    w = (potential or quartic_potential()).eval(y)
    ds = np.diff(s)
    grad = float(np.sum((np.diff(y) / ds) ** 2 * ds)) / (2.0 * ell)
    return grad + ell * float(np.trapezoid(w, s))


def path_rate(path, potential: Potential, dt: Optional[float] = None) -> float:
    """Action along an unrescaled path: (1/2) int [X'^2 + 2W(X)] dt + U(X_T) - U(X_0)."""
    if isinstance(path, PathSample):
        y, step = path.values, path.dt
    else:
        y = np.asarray(path, dtype=float)
        if dt is None:
            raise ValueError("dt required for bare sample arrays")
        step = float(dt)
    kinetic = 0.5 * float(np.sum(np.diff(y) ** 2)) / step
    potential_term = float(np.trapezoid(potential.eval(y), dx=step))
    du = agmon_distance(potential, y[-1]) - agmon_distance(potential, y[0])
    return kinetic + potential_term + float(du)


# ---------------------------------------------------------------------------
# point-process extraction and serialization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointProcess:
    """Rescaled genuine transition times and unit-window counts."""

    events: np.ndarray
    window_counts: np.ndarray


def extract_point_process(path: PathSample, cfg: CrossingConfig, lbar: float) -> PointProcess:
    """Genuine return times rescaled by lbar, with counts per unit window."""
    if lbar <= 0:
        raise ValueError("lbar must be positive")
    record = detect_zero_returns(path, cfg)
    events = np.sort(record.tau_times[record.genuine] / lbar)
    n_windows = int(np.floor(path.length / lbar))
    counts = np.bincount(
        np.floor(events[events < n_windows]).astype(int), minlength=n_windows
    ) if n_windows else np.zeros(0, dtype=np.int64)
    return PointProcess(events=events, window_counts=counts)


def crossing_record_rows(record: CrossingRecord, replica: int) -> list:
    """Flatten a record to (replica, k, kind, time, level, sign) rows.

    Sigma rows carry the signed level hit; tau rows sit at level 0 with the
    post-probe sign (whose flip against the previous probe marks a genuine
    transition).
    """
    rows = []
    for k, (t, lab) in enumerate(zip(record.sigma_times, record.sigma_labels)):
        rows.append((replica, k, "sigma", float(t), float(lab), int(np.sign(lab))))
    for k, (t, pv) in enumerate(zip(record.tau_times, record.probe_signs)):
        rows.append((replica, k, "tau", float(t), 0.0, int(pv)))
    return rows


def write_crossing_csv(records: Sequence[CrossingRecord], fname) -> None:
    with open(fname, "w", newline="") as f:
        out = csv.writer(f)
        out.writerow(["replica", "k", "kind", "time", "level", "sign"])
        for replica, record in enumerate(records):
            out.writerows(crossing_record_rows(record, replica))
