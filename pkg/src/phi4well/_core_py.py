"""NumPy implementations of the hot sampling kernels.

Selected by :mod:`phi4well._backend` when the compiled extension is missing
(or ``PHI4_FORCE_NUMPY`` is set).  Replicas advance in lockstep ensembles
with a fixed internal batch width, so a given seed always reproduces the
same output arrays; the bit streams differ from the compiled backend's
per-replica streams (per-backend determinism, not cross-backend identity).

``chain_path_reference`` is the exception: it consumes one Philox stream
per replica exactly like the compiled code (one uniform for the initial
state, one per step) and exists so tests can pin the compiled backend to
it bit for bit.
"""
from __future__ import annotations

import numpy as np

BATCH = 4096
_CENSORED = -1


def _ensemble_rng(seed: int, batch_start: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), int(batch_start))))
    )


def _replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), int(replica))))
    )


def _pick_init(prob, alias, u):
    n = prob.shape[0]
    un = u * n
    j = un.astype(np.int64)
    np.minimum(j, n - 1, out=j)
    return np.where(un - j < prob[j], j, alias[j])


def _pick_rows(prob, alias, rows, u):
    n = prob.shape[1]
    un = u * n
    j = un.astype(np.int64)
    np.minimum(j, n - 1, out=j)
    return np.where(un - j < prob[rows, j], j, alias[rows, j])


def chain_paths(init_prob, init_alias, step_prob, step_alias, n_steps, seed, rep_start, n_reps):
    """Index paths of the grid chain: (n_reps, n_steps + 1) uint16."""
    out = np.empty((n_reps, n_steps + 1), dtype=np.uint16)
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        s = _pick_init(init_prob, init_alias, rng.random(nb))
        out[b0 : b0 + nb, 0] = s
        for k in range(1, n_steps + 1):
            s = _pick_rows(step_prob, step_alias, s, rng.random(nb))
            out[b0 : b0 + nb, k] = s
    return out


def chain_hit_zero(init_prob, init_alias, step_prob, step_alias, signs, max_steps, seed, rep_start, n_reps):
    """Step index of the first zero hit (center landing or sign change), -1 if censored."""
    res = np.full(n_reps, _CENSORED, dtype=np.int64)
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        s = _pick_init(init_prob, init_alias, rng.random(nb))
        gid = np.arange(b0, b0 + nb)
        sg = signs[s]
        at0 = sg == 0
        if at0.any():
            res[gid[at0]] = 0
            keep = ~at0
            s, gid, sg = s[keep], gid[keep], sg[keep]
        for k in range(1, max_steps + 1):
            if s.size == 0:
                break
            s = _pick_rows(step_prob, step_alias, s, rng.random(s.size))
            sg_new = signs[s]
            hit = (sg_new == 0) | (sg_new.astype(np.int16) * sg < 0)
            if hit.any():
                res[gid[hit]] = k
                keep = ~hit
                s, gid, sg = s[keep], gid[keep], sg_new[keep]
            else:
                sg = sg_new
    return res


def chain_first_transition(
    init_prob, init_alias, step_prob, step_alias, signs, sep_steps, max_steps, seed, rep_start, n_reps
):
    """First sign-changing zero return (the zeta machine).

    Semantics: zero returns are grid zero hits separated by >= sep_steps;
    the sign is probed sep_steps after each return and compared with the
    sign probed after the previous one (reference at step sep_steps); a
    strict sign product < 0 ends the replica with zeta = the return time.
    The search for the next return resumes at the probe step.

    Returns (steps, returns): steps[i] = step index of the genuine return,
    -1 if the budget was exhausted; returns[i] counts all zero returns seen.
    """
    big = np.iinfo(np.int64).max
    res = np.full(n_reps, _CENSORED, dtype=np.int64)
    nret_out = np.zeros(n_reps, dtype=np.int64)
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        s = _pick_init(init_prob, init_alias, rng.random(nb))
        gid = np.arange(b0, b0 + nb)
        sg_prev = signs[s].astype(np.int8)
        ref = np.zeros(nb, dtype=np.int8)
        resume = np.full(nb, sep_steps, dtype=np.int64)
        probe_at = np.full(nb, big, dtype=np.int64)
        tau_pend = np.zeros(nb, dtype=np.int64)
        nret = np.zeros(nb, dtype=np.int64)
        for k in range(1, max_steps + 1):
            if s.size == 0:
                break
            s = _pick_rows(step_prob, step_alias, s, rng.random(s.size))
            sg = signs[s].astype(np.int8)
            if k == sep_steps:
                ref[:] = sg
            due = probe_at == k
            flip = due & ((ref.astype(np.int16) * sg) < 0)
            if flip.any():
                res[gid[flip]] = tau_pend[flip]
                nret_out[gid[flip]] = nret[flip]
                keep = ~flip
                s, gid, sg, sg_prev = s[keep], gid[keep], sg[keep], sg_prev[keep]
                ref, resume, probe_at = ref[keep], resume[keep], probe_at[keep]
                tau_pend, nret, due = tau_pend[keep], nret[keep], due[keep]
            if due.any():
                ref[due] = sg[due]
                resume[due] = k
                probe_at[due] = big
            searching = (probe_at == big) & (k >= resume)
            hit = searching & ((sg == 0) | ((k - 1 >= resume) & (sg_prev.astype(np.int16) * sg < 0)))
            if hit.any():
                probe_at[hit] = k + sep_steps
                tau_pend[hit] = k
                nret[hit] += 1
            sg_prev = sg
        nret_out[gid] = nret  # censored replicas keep their return counts
    return res, nret_out


def chain_path_reference(init_prob, init_alias, step_prob, step_alias, n_steps, seed, replica):
    """Scalar per-replica reference path: the compiled backend must equal this bit for bit."""
    rng = _replica_rng(seed, replica)
    n = init_prob.shape[0]
    out = np.empty(n_steps + 1, dtype=np.uint16)

    def pick_init():
        un = rng.random() * n
        j = min(int(un), n - 1)
        return j if un - j < init_prob[j] else init_alias[j]

    s = pick_init()
    out[0] = s
    for k in range(1, n_steps + 1):
        un = rng.random() * n
        j = min(int(un), n - 1)
        s = j if un - j < step_prob[s, j] else int(step_alias[s, j])
        out[k] = s
    return out


def _drift_interp(x, drift, x_lo, h):
    t = (x - x_lo) / h
    j = np.clip(t.astype(np.int64), 0, drift.shape[0] - 2)
    f = t - j
    return drift[j] * (1.0 - f) + drift[j + 1] * f


def em_paths(x0, drift, x_lo, h, n_steps, dt, beta, seed, rep_start, noise=True):
    """Euler-Maruyama paths: (n_reps, n_steps + 1) float64, clamped to the node range."""
    x0 = np.asarray(x0, dtype=float)
    n_reps = x0.shape[0]
    x_hi = x_lo + (drift.shape[0] - 1) * h
    sig = np.sqrt(dt / beta) if noise else 0.0
    out = np.empty((n_reps, n_steps + 1))
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        x = np.clip(x0[b0 : b0 + nb].copy(), x_lo, x_hi)
        out[b0 : b0 + nb, 0] = x
        for k in range(1, n_steps + 1):
            x = x + _drift_interp(x, drift, x_lo, h) * dt
            if sig:
                x += sig * rng.standard_normal(nb)
            if np.abs(x).max() > x_hi + 1.0:
                raise RuntimeError("trajectory blow-up: dt too large")
            np.clip(x, x_lo, x_hi, out=x)
            out[b0 : b0 + nb, k] = x
    return out


def em_occupation(x0, drift, x_lo, h, n_steps, dt, beta, seed, rep_start, n_bins, lo, hi):
    """Pooled occupation histogram over uniform bins on [lo, hi], accumulated in-loop."""
    x0 = np.asarray(x0, dtype=float)
    n_reps = x0.shape[0]
    x_hi = x_lo + (drift.shape[0] - 1) * h
    sig = np.sqrt(dt / beta)
    counts = np.zeros(n_bins, dtype=np.int64)
    inv = n_bins / (hi - lo)
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        x = np.clip(x0[b0 : b0 + nb].copy(), x_lo, x_hi)
        for k in range(n_steps):
            x = x + _drift_interp(x, drift, x_lo, h) * dt + sig * rng.standard_normal(nb)
            if np.abs(x).max() > x_hi + 1.0:
                raise RuntimeError("trajectory blow-up: dt too large")
            np.clip(x, x_lo, x_hi, out=x)
            b = np.clip(((x - lo) * inv).astype(np.int64), 0, n_bins - 1)
            np.add.at(counts, b, 1)
    return counts


def em_hit_zero(x0, drift, x_lo, h, max_steps, dt, beta, seed, rep_start):
    """Step index of the first sign change of an EM trajectory, -1 if censored."""
    x0 = np.asarray(x0, dtype=float)
    n_reps = x0.shape[0]
    x_hi = x_lo + (drift.shape[0] - 1) * h
    sig = np.sqrt(dt / beta)
    res = np.full(n_reps, _CENSORED, dtype=np.int64)
    for b0 in range(0, n_reps, BATCH):
        nb = min(BATCH, n_reps - b0)
        rng = _ensemble_rng(seed, rep_start + b0)
        x = np.clip(x0[b0 : b0 + nb].copy(), x_lo, x_hi)
        gid = np.arange(b0, b0 + nb)
        sg = np.sign(x)
        at0 = sg == 0
        if at0.any():
            res[gid[at0]] = 0
            keep = ~at0
            x, gid, sg = x[keep], gid[keep], sg[keep]
        for k in range(1, max_steps + 1):
            if x.size == 0:
                break
            x = x + _drift_interp(x, drift, x_lo, h) * dt + sig * rng.standard_normal(x.size)
            np.clip(x, x_lo, x_hi, out=x)
            sg_new = np.sign(x)
            hit = (sg_new == 0) | (sg_new * sg < 0)
            if hit.any():
                res[gid[hit]] = k
                keep = ~hit
                x, gid, sg = x[keep], gid[keep], sg_new[keep]
            else:
                sg = sg_new
    return res
