"""Exact grid-chain sampler, free-boundary sampler, SDE cross-check, densities.

The primary sampler is the matrix exponential of the discrete generator of
the ground-state diffusion: time-discretization bias is exactly zero, so
interface statistics inherit only the spatial O(h^2) error.  The
Euler-Maruyama integrator is an independent cross-check, and the endpoint
densities give the marginal laws used by the mixing diagnostics.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import _backend
from .potential import NumericFailure
from .spectral import SpectralModel, _positive_inverse_iteration, build_hamiltonian, effective_potential, heat_kernel

__all__ = [
    "TransitionKernel",
    "PathSample",
    "EndpointDensities",
    "stationary_density",
    "build_step_kernel",
    "kernel_diagnostics",
    "sample_stationary_path",
    "sample_stationary_paths",
    "sample_free_boundary_path",
    "sample_free_boundary_paths",
    "euler_maruyama_path",
    "euler_maruyama_paths",
    "euler_maruyama_occupation",
    "euler_maruyama_hitting_times",
    "endpoint_densities",
    "write_path_record",
    "read_path_record",
    "write_path_csv",
]

NEGATIVITY_FLOOR = -1e-12
BOUNDARY_KINDS = {"stationary": 0, "free": 1, "sde": 2}
_KIND_NAMES = {v: k for k, v in BOUNDARY_KINDS.items()}


def stationary_density(m: SpectralModel) -> np.ndarray:
    """Node masses of pi_beta = psi_0^2 dx, renormalized to total mass 1."""
    pi = m.weight * m.psi(0) ** 2
    return pi / pi.sum()


def _vose_tables_1d(p: np.ndarray):
    """Alias tables (prob, alias) for one categorical distribution."""
    n = p.shape[0]
    scaled = p * (n / p.sum())
    prob = np.empty(n)
    alias = np.empty(n, dtype=np.int32)
    small = [j for j in range(n) if scaled[j] < 1.0]
    large = [j for j in range(n) if scaled[j] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for rest in (small, large):
        for j in rest:
            prob[j] = 1.0
            alias[j] = j
    return prob, alias


def _vose_tables(P: np.ndarray):
    n_rows = P.shape[0]
    prob = np.empty_like(P)
    alias = np.empty(P.shape, dtype=np.int32)
    for i in range(n_rows):
        prob[i], alias[i] = _vose_tables_1d(P[i])
    return prob, alias


@dataclass
class TransitionKernel:
    """One-step law P = exp(dt L) of the grid chain, with sampling tables.

    L = -diag(v0)^{-1} (H - E0) diag(v0) is a proper Markov generator because
    the discrete ground state v0 is an exact null vector of H - E0.  P comes
    from the full tridiagonal eigendecomposition; `spectrum`/`modes` keep that
    decomposition for spectral reuse (h-transform weights, diagnostics).
    """

    model: SpectralModel
    dt: float
    P: np.ndarray
    stationary_pi: np.ndarray
    v0: np.ndarray
    spectrum: np.ndarray
    modes: np.ndarray
    clamped_mass: float
    _tables: Optional[tuple] = field(default=None, repr=False)
    _init_tables: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    def nodes(self) -> np.ndarray:
        return self.model.nodes()

    def node_signs(self) -> np.ndarray:
        return np.sign(self.nodes()).astype(np.int8)

    def step_tables(self):
        if self._tables is None:
            self._tables = _vose_tables(self.P)
        return self._tables

    def init_tables(self, start: str = "pi"):
        """Alias tables for the initial law.

        "pi": the stationary law; "pi_plus": pi conditioned on x > 0;
        "well_plus": point mass at the node nearest +1.
        """
        if start not in self._init_tables:
            pi = self.stationary_pi
            if start == "pi":
                w = pi
            elif start == "pi_plus":
                w = np.where(self.nodes() > 0, pi, 0.0)
            elif start == "well_plus":
                w = np.zeros(self.n)
                w[int(np.argmin(np.abs(self.nodes() - 1.0)))] = 1.0
            else:
                raise ValueError(f"unknown start distribution {start!r}")
            self._init_tables[start] = _vose_tables_1d(w / w.sum())
        return self._init_tables[start]


def build_step_kernel(m: SpectralModel, dt: float) -> TransitionKernel:
    """Exponentiate the discrete generator through the full eigendecomposition.

    The symmetric form e^{-dt(H - E0)} is assembled as a Gram product (hence
    symmetric nonnegative-definite up to roundoff); entries below
    -1e-12 abort, smaller negatives are clamped and renormalized away, and
    the conjugation by v0 then gives an exactly nonnegative stochastic P.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    diag, off = build_hamiltonian(m.potential, m.beta, m.grid)
    vals, vecs = eigh_tridiagonal(diag, off)
    v0 = _positive_inverse_iteration(diag, off, vals[0], np.abs(vecs[:, 0]))

    half = vecs * np.exp(-0.5 * dt * (vals - vals[0]))
    g = half @ half.T
    g = 0.5 * (g + g.T)
    neg_min = float(g.min())
    if neg_min < NEGATIVITY_FLOOR:
        raise NumericFailure(
            f"kernel negativity {neg_min:.3e} below {NEGATIVITY_FLOOR}: eigendecomposition broken"
        )
    clamped = float(-g[g < 0].sum()) if neg_min < 0 else 0.0
    np.clip(g, 0.0, None, out=g)

    P = (g / v0[:, None]) * v0[None, :]
    P /= P.sum(axis=1)[:, None]
    pi = v0 * v0
    pi /= pi.sum()
    return TransitionKernel(
        model=m, dt=dt, P=P, stationary_pi=pi, v0=v0,
        spectrum=vals, modes=vecs, clamped_mass=clamped,
    )


def kernel_diagnostics(k: TransitionKernel) -> dict:
    """Deviation measures for the kernel invariants.

    Detailed balance and the semigroup property are measured on the flux
    scale pi(x) P(x, y) (the scale on which reversibility is stated); raw
    entrywise comparisons would be dominated by 1/v0 amplification at the
    boundary rows, where both kernels carry ~1e-300 of probability.
    """
    P, pi = k.P, k.stationary_pi
    flux = pi[:, None] * P
    two = build_step_kernel(k.model, 2.0 * k.dt)
    return {
        "row_sum": float(np.abs(P.sum(axis=1) - 1.0).max()),
        "min_entry": float(P.min()),
        "detailed_balance": float(np.abs(flux - flux.T).max()),
        "stationarity": float(np.abs(pi @ P - pi).max()),
        "semigroup": float(np.abs(pi[:, None] * (P @ P) - two.stationary_pi[:, None] * two.P).max()),
        "clamped_mass": k.clamped_mass,
    }


@dataclass(frozen=True)
class PathSample:
    """A sampled trajectory: real coordinates plus grid indices when on-grid."""

    values: np.ndarray
    dt: float
    beta: float
    boundary_kind: str
    rng_seed: int
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.values.size < 1:
            raise ValueError("path must have at least one sample")
        if self.boundary_kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")

    @property
    def length(self) -> float:
        return (self.values.size - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt


def _steps_for(length: float, dt: float) -> int:
    if length < dt:
        raise ValueError("path length must be at least dt")
    return int(np.ceil(length / dt - 1e-12))


def sample_stationary_paths(
    k: TransitionKernel, length: float, seed: int, n_replicas: int, rep_start: int = 0
) -> np.ndarray:
    """Index paths (n_replicas, steps + 1) of the stationary chain, X_0 ~ pi."""
    steps = _steps_for(length, k.dt)
    ip, ia = k.init_tables("pi")
    sp, sa = k.step_tables()
    return _backend.chain_paths(ip, ia, sp, sa, steps, seed, rep_start, n_replicas)


def sample_stationary_path(k: TransitionKernel, length: float, seed: int) -> PathSample:
    """One stationary draw; the marginal at every step is exactly pi."""
    idx = sample_stationary_paths(k, length, seed, 1)[0]
    return PathSample(
        values=k.nodes()[idx], dt=k.dt, beta=k.model.beta,
        boundary_kind="stationary", rng_seed=int(seed), indices=idx,
    )


def _h_weights(k: TransitionKernel, s_values: np.ndarray, truncation: Optional[int]) -> np.ndarray:
    """h_s(x) = sum_k e^{-s(lam_k - lam_0)} v_k(x) c_k for each s (columns)."""
    vals, vecs = k.spectrum, k.modes
    kk = vals.size if truncation is None else min(truncation, vals.size)
    c = vecs[:, :kk].sum(axis=0)
    decay = np.exp(-np.outer(vals[:kk] - vals[0], s_values))
    return vecs[:, :kk] @ (decay * c[:, None])


def sample_free_boundary_paths(
    m: SpectralModel,
    length: float,
    dt: float,
    seed: int,
    n_replicas: int,
    truncation: Optional[int] = None,
    kernel: Optional[TransitionKernel] = None,
) -> np.ndarray:
    """Exact draws from the discretized free-boundary measure (h-transform).

    X_0 ~ h_ell; each step reweights the stationary kernel row by
    h_{s - dt}(y)/v0(y), s = remaining length; at s = dt the weight is the
    flat h_0 = 1 (free right endpoint).  With the full mode set the h's are
    exact and positive; a truncated set may go negative, which is refused
    with advice to raise the truncation.
    """
    k = kernel or build_step_kernel(m, dt)
    steps = _steps_for(length, dt)
    s_grid = (np.arange(steps + 1)[::-1]) * dt  # remaining length after i steps
    H = _h_weights(k, s_grid, truncation)
    scale = np.abs(H).max()
    if H.min() < -1e-12 * scale:
        raise NumericFailure(
            "h-transform weight went negative: truncation too small, increase K"
        )
    np.clip(H, 0.0, None, out=H)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), 0))))
    init = H[:, 0].copy()
    if init.sum() <= 0:
        raise NumericFailure("initial h-weights vanished; increase K")
    init /= init.sum()
    out = np.empty((n_replicas, steps + 1), dtype=np.uint16)
    cdf0 = np.cumsum(init)
    cdf0[-1] = 1.0
    s_idx = np.searchsorted(cdf0, rng.random(n_replicas), side="right").astype(np.int64)
    np.minimum(s_idx, k.n - 1, out=s_idx)
    out[:, 0] = s_idx
    ratio = H / k.v0[:, None]  # h_s(y)/v0(y), columns follow s_grid
    for i in range(1, steps + 1):
        w = k.P[s_idx] * ratio[:, i]
        tot = w.sum(axis=1)
        if (tot <= 0).any():
            raise NumericFailure(
                "h-transform step weights vanished at a visited node; increase K"
            )
        cdf = np.cumsum(w, axis=1)
        u = rng.random(n_replicas) * tot
        s_idx = np.empty(n_replicas, dtype=np.int64)
        for r in range(n_replicas):
            s_idx[r] = np.searchsorted(cdf[r], u[r], side="right")
        np.minimum(s_idx, k.n - 1, out=s_idx)
        out[:, i] = s_idx
    return out


def sample_free_boundary_path(
    m: SpectralModel, length: float, dt: float, seed: int,
    truncation: Optional[int] = None, kernel: Optional[TransitionKernel] = None,
) -> PathSample:
    idx = sample_free_boundary_paths(m, length, dt, seed, 1, truncation, kernel)[0]
    return PathSample(
        values=m.nodes()[idx], dt=dt, beta=m.beta,
        boundary_kind="free", rng_seed=int(seed), indices=idx,
    )


#: Width (in x) trimmed off each end of the drift table.  The Dirichlet wall
#: forces psi_0 -> 0 linearly, so -U_b' picks up a spurious 1/(beta*(R-x))
#: layer there; beyond the trimmed table the interpolant clamps to the edge
#: value, which keeps the restoring drift bounded.
_DRIFT_EDGE_MARGIN = 0.1


def _drift_data(m: SpectralModel):
    """(-U_b', x_lo, h): drift toward the wells on the interior nodes."""
    _, du, valid = effective_potential(m)
    if not valid.all():
        raise NumericFailure("ground state underflow: cannot build drift")
    x = m.nodes()
    trim = int(np.ceil(_DRIFT_EDGE_MARGIN / m.weight))
    if x.size <= 2 * trim + 2:
        raise NumericFailure("grid too narrow for a usable drift table")
    sl = slice(trim, x.size - trim)
    return np.ascontiguousarray(-du[sl]), float(x[sl][0]), m.weight


def _check_sde_stability(m: SpectralModel, drift: np.ndarray, dt: float) -> None:
    slope = float(np.abs(np.diff(drift)).max() / m.weight)
    if dt * slope > 1.0:
        raise ValueError(
            f"dt={dt} unstable for drift slope {slope:.2f}; need dt <= {1.0 / slope:.2e}"
        )


def euler_maruyama_paths(
    m: SpectralModel, x0, length: float, dt: float, seed: int,
    noise: bool = True, rep_start: int = 0,
) -> np.ndarray:
    """EM trajectories (n_replicas, steps + 1) of dX = -U_b'(X) dt + sqrt(dt/beta) dW."""
    drift, x_lo, h = _drift_data(m)
    _check_sde_stability(m, drift, dt)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    steps = _steps_for(length, dt)
    try:
        return _backend.em_paths(x0, drift, x_lo, h, steps, dt, m.beta, seed, rep_start, noise)
    except RuntimeError as exc:
        raise NumericFailure(str(exc)) from exc


def euler_maruyama_path(
    m: SpectralModel, x0: float, length: float, dt: float, seed: int, noise: bool = True
) -> PathSample:
    vals = euler_maruyama_paths(m, [x0], length, dt, seed, noise)[0]
    idx = np.clip(np.round((vals - m.nodes()[0]) / m.weight), 0, m.nodes().size - 1)
    return PathSample(
        values=vals, dt=dt, beta=m.beta, boundary_kind="sde",
        rng_seed=int(seed), indices=idx.astype(np.uint16),
    )


def euler_maruyama_occupation(
    m: SpectralModel, x0, length: float, dt: float, seed: int, n_bins: int,
) -> np.ndarray:
    """Pooled occupation histogram of EM trajectories over [-R, R] uniform bins."""
    drift, x_lo, h = _drift_data(m)
    _check_sde_stability(m, drift, dt)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    steps = _steps_for(length, dt)
    r = m.grid.half_width
    try:
        return _backend.em_occupation(
            x0, drift, x_lo, h, steps, dt, m.beta, seed, 0, n_bins, -r, r
        )
    except RuntimeError as exc:
        raise NumericFailure(str(exc)) from exc


def euler_maruyama_hitting_times(
    m: SpectralModel, x0: float, dt: float, seed: int, n_replicas: int,
    max_steps: int, rep_start: int = 0,
) -> np.ndarray:
    """Step count of the first zero crossing per EM replica, -1 if censored."""
    drift, x_lo, h = _drift_data(m)
    _check_sde_stability(m, drift, dt)
    starts = np.full(n_replicas, float(x0))
    try:
        return _backend.em_hit_zero(
            starts, drift, x_lo, h, max_steps, dt, m.beta, seed, rep_start
        )
    except RuntimeError as exc:
        raise NumericFailure(str(exc)) from exc


@dataclass(frozen=True)
class EndpointDensities:
    """Node-mass laws: joint rho/rho_bar for (X_T, X_{ell-T}) and marginal q."""

    rho: np.ndarray
    rho_bar: np.ndarray
    q: np.ndarray


def _normalize_mass(w: np.ndarray, what: str) -> np.ndarray:
    z = float(w.sum())
    if not np.isfinite(z) or z <= 0:
        raise NumericFailure(f"non-positive normalizer for {what}")
    return w / z


def endpoint_densities(
    m: SpectralModel, length: float, T: float, truncation: Optional[int] = None
) -> EndpointDensities:
    """Spectral-series endpoint laws of the free-boundary measure.

    rho is the joint law of (X_T, X_{ell-T}); rho_bar its stationary
    surrogate psi0 g psi0; q the marginal of X_T started from the center.
    All are normalized node-mass arrays (sum exactly 1).
    """
    if not 0 <= T < length / 2:
        raise ValueError("need 0 <= T < length/2")
    h = m.weight
    x = m.nodes()
    kk = m.k if truncation is None else min(truncation, m.k)
    c = h * m.vectors[:, :kk].sum(axis=0)
    gaps = m.energies[:kk] - m.energies[0]

    hT = m.vectors[:, :kk] @ (np.exp(-T * gaps) * c) if T > 0 else m.vectors[:, :kk] @ c
    g_mid = heat_kernel(m, length - 2.0 * T, truncation=kk)
    rho = _normalize_mass(hT[:, None] * g_mid * hT[None, :] * h * h, "rho")
    psi0 = m.psi(0)
    rho_bar = _normalize_mass(psi0[:, None] * g_mid * psi0[None, :] * h * h, "rho_bar")

    center = int(np.argmin(np.abs(x)))
    if T > 0:
        gT = heat_kernel(m, T, truncation=kk)
        q = gT[center] * psi0 / psi0[center] * h
    else:
        q = np.zeros(x.size)
        q[center] = 1.0
    q = _normalize_mass(q, "q")
    return EndpointDensities(rho=rho, rho_bar=rho_bar, q=q)


_HEADER = struct.Struct("<ddQQB")


def write_path_record(path: PathSample, fname) -> None:
    """Binary record: little-endian header (beta, dt, length, seed, kind) + uint16 indices."""
    if path.indices is None:
        raise ValueError("path has no grid indices to persist")
    idx = np.ascontiguousarray(path.indices, dtype="<u2")
    with open(fname, "wb") as f:
        f.write(_HEADER.pack(path.beta, path.dt, idx.size, path.rng_seed,
                             BOUNDARY_KINDS[path.boundary_kind]))
        f.write(idx.tobytes())


def read_path_record(fname, m: SpectralModel) -> PathSample:
    with open(fname, "rb") as f:
        beta, dt, n, seed, kind = _HEADER.unpack(f.read(_HEADER.size))
        idx = np.frombuffer(f.read(2 * n), dtype="<u2")
    if idx.size != n:
        raise ValueError("truncated path record")
    return PathSample(
        values=m.nodes()[idx], dt=dt, beta=beta,
        boundary_kind=_KIND_NAMES[kind], rng_seed=int(seed), indices=idx,
    )


def write_path_csv(path: PathSample, fname) -> None:
    """Textual export: header t,x then one row per sample."""
    data = np.column_stack([path.times(), path.values])
    np.savetxt(fname, data, fmt="%.10g", delimiter=",", header="t,x", comments="")
