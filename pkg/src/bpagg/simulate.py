"""Exact path simulation, ensembles and centered space-time aggregates.

States are int64 counts. One step draws, for each type i with current count
c_i > 0, the exact sum of c_i independent brood vectors, then adds one
immigration draw; types are consumed in index order, immigration last, so a
path is a pure function of its generator stream.

Ensembles give copy j its own counter-based stream derived from
(master_seed, j), which makes every copy reproducible in isolation and the
ensemble independent of scheduling and worker count.
"""

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kronalg import NotSubcriticalError
from .model import (
    FiniteSupport,
    IndependentMarginals,
    law_mean,
    mean_matrix,
    model_digest,
    validate,
)
from .moments import stationary_moments

__all__ = [
    "PathEnsemble",
    "AggregateSeries",
    "SimulationOverflowError",
    "step",
    "simulate_path",
    "simulate_ensemble",
    "aggregate",
    "extract_innovations",
    "burnin_auto",
    "paths_to_csv",
    "aggregates_to_csv",
    "ensemble_metadata",
]

# per-component count ceiling; beyond this a step raises instead of risking
# int64 wraparound or unbounded draw sizes (supercritical runaway)
_STATE_LIMIT = 1 << 31

_BURNIN_FLOOR = 100
_BURNIN_DECAY = 1e-6


class SimulationOverflowError(RuntimeError):
    """Raised when a component count exceeds the 2^31 simulation ceiling."""


def stream_rng(master_seed, *key):
    """Counter-based generator on the stream addressed by (master_seed, key)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def copy_rng(master_seed, copy):
    """Generator for one ensemble copy, keyed by (master_seed, copy) alone."""
    return stream_rng(master_seed, copy)


def derived_seed(master_seed, *key):
    """Stable 64-bit child seed for a namespaced purpose under master_seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def burnin_auto(model):
    """Burn-in length max(100, ceil(log(1e-6) / log(rho))).

    Initialization bias decays like rho^k, so this many steps shrink it by
    a factor 1e-6 (with a floor for very small rho). Subcritical only.
    """
    cls = validate(model)
    if cls.regime != "subcritical":
        raise NotSubcriticalError(
            "burn-in initialization needs a subcritical model, got rho = %.6g" % cls.rho
        )
    if cls.rho <= 0.0:
        return _BURNIN_FLOOR
    return max(_BURNIN_FLOOR, int(math.ceil(math.log(_BURNIN_DECAY) / math.log(cls.rho))))


def _check_state(total):
    if int(total.max(initial=0)) > _STATE_LIMIT or int(total.min(initial=0)) < 0:
        raise SimulationOverflowError(
            "component count exceeded 2^31, supercritical runaway?"
        )
    return total


def _make_stepper(model):
    offspring = model.offspring
    imm = model.immigration
    p = model.p

    def step_fn(state, rng):
        total = np.zeros(p, dtype=np.int64)
        for i in range(p):
            c = int(state[i])
            if c > 0:
                total += offspring[i].sample_sum(c, rng)
        total += imm.sample(rng)
        return _check_state(total)

    return step_fn


def step(model, state, rng):
    """One exact transition from state, consuming rng in a fixed order."""
    state = np.asarray(state, dtype=np.int64)
    if state.shape != (model.p,) or int(state.min()) < 0:
        raise ValueError("state must be a nonnegative int vector of length p")
    return _make_stepper(model)(state, rng)


def _resolve_burnin(model, burnin):
    if burnin is None:
        return 0
    if burnin == "auto":
        return burnin_auto(model)
    if int(burnin) != burnin or burnin < 0:
        raise ValueError("burnin must be 'auto' or an integer >= 0, got %r" % (burnin,))
    return int(burnin)


def _scalar_samplers(model):
    # unwrap p = 1 laws to scalar closures; draw order matches the general path
    off = model.offspring[0]
    imm = model.immigration
    if isinstance(off, IndependentMarginals):
        off_sum = off.marginals[0].sample_sum
    else:
        table = off

        def off_sum(c, rng, _t=table):
            return int(_t.sample_sum(c, rng)[0])

    if isinstance(imm, IndependentMarginals):
        imm_one = imm.marginals[0].sample_one
    else:

        def imm_one(rng, _t=imm):
            return int(_t.sample(rng)[0])

    return off_sum, imm_one


def simulate_path(model, n, rng, burnin=None):
    """Path of n steps as an (n+1, p) int64 array, path[0] the initial state.

    burnin None starts from zero; an integer k (or 'auto') first runs k
    discarded steps from zero so path[0] is approximately stationary.
    """
    if int(n) != n or n < 0:
        raise ValueError("need n >= 0, got %r" % (n,))
    n = int(n)
    k = _resolve_burnin(model, burnin)
    p = model.p
    path = np.zeros((n + 1, p), dtype=np.int64)

    if p == 1:
        off_sum, imm_one = _scalar_samplers(model)
        x = 0
        for _ in range(k):
            x = (off_sum(x, rng) if x > 0 else 0) + imm_one(rng)
            if x > _STATE_LIMIT or x < 0:
                raise SimulationOverflowError(
                    "component count exceeded 2^31, supercritical runaway?"
                )
        path[0, 0] = x
        for t in range(1, n + 1):
            x = (off_sum(x, rng) if x > 0 else 0) + imm_one(rng)
            if x > _STATE_LIMIT or x < 0:
                raise SimulationOverflowError(
                    "component count exceeded 2^31, supercritical runaway?"
                )
            path[t, 0] = x
        return path

    step_fn = _make_stepper(model)
    x = np.zeros(p, dtype=np.int64)
    for _ in range(k):
        x = step_fn(x, rng)
    path[0] = x
    for t in range(1, n + 1):
        x = step_fn(x, rng)
        path[t] = x
    return path


@dataclass
class PathEnsemble:
    """N independent copies of one model, each on its own derived stream."""

    model: object
    master_seed: int
    burnin: int
    paths: np.ndarray  # (N, n+1, p) int64

    @property
    def N(self):
        return self.paths.shape[0]

    @property
    def n(self):
        return self.paths.shape[1] - 1

    @property
    def p(self):
        return self.paths.shape[2]


def _copies_worker(args):
    model, n, burnin, master_seed, start, stop = args
    out = np.empty((stop - start, n + 1, model.p), dtype=np.int64)
    for j in range(start, stop):
        out[j - start] = simulate_path(model, n, copy_rng(master_seed, j), burnin)
    return out


def simulate_ensemble(model, N, n, master_seed, burnin="auto", threads=1):
    """Ensemble of N copies, n steps each. Results do not depend on threads."""
    if int(N) != N or N < 1:
        raise ValueError("need N >= 1 copies, got %r" % (N,))
    N = int(N)
    k = _resolve_burnin(model, burnin)
    bounds = _chunk_bounds(N, threads)
    tasks = [(model, int(n), k, int(master_seed), a, b) for a, b in bounds]
    if threads <= 1 or len(tasks) == 1:
        parts = [_copies_worker(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_copies_worker, tasks))
    return PathEnsemble(model, int(master_seed), k, np.concatenate(parts, axis=0))


def _chunk_bounds(N, threads):
    pieces = 1 if threads <= 1 else min(N, threads * 4)
    edges = np.linspace(0, N, pieces + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


@dataclass
class AggregateSeries:
    """Centered space-time sums S_t over a grid, optionally (nN)^(-1/2) scaled."""

    grid: tuple
    values: np.ndarray  # (len(grid), p)
    scaled: bool
    n: int
    N: int


def _grid_indices(grid, n):
    idx = []
    for t in grid:
        t = float(t)
        if t < 0:
            raise ValueError("grid points must be >= 0, got %r" % t)
        m = math.floor(t * n)
        if m > n:
            raise ValueError("grid point %r needs %d steps but paths have %d" % (t, m, n))
        idx.append(m)
    return idx


def aggregate(ensemble, grid, scaled=True):
    """Aggregate S_t = sum_copies sum_{k <= floor(n t)} (X_k - mean).

    Centering uses the exact stationary mean, so the series has exact zero
    expectation under stationary initialization. With scaled=True values
    carry the CLT normalization (n N)^(-1/2).
    """
    mean = stationary_moments(ensemble.model, 1)[0]
    n, N = ensemble.n, ensemble.N
    idx = _grid_indices(grid, n)
    totals = ensemble.paths[:, 1:, :].sum(axis=0) - N * mean  # (n, p) float
    csum = np.vstack([np.zeros(ensemble.p), np.cumsum(totals, axis=0)])
    values = csum[idx]
    if scaled:
        values = values / math.sqrt(n * N)
    return AggregateSeries(tuple(float(t) for t in grid), values, bool(scaled), n, N)


def percopy_aggregates(ensemble, grid):
    """Per-copy scaled aggregates n^(-1/2) sum_{k <= floor(n t)} (X_k - mean).

    Copies are independent and identically distributed, so their empirical
    covariance estimates the covariance of the ensemble aggregate: summing
    over N copies and dividing by sqrt(N) changes no second moment.
    Returns an (N, len(grid), p) array.
    """
    mean = stationary_moments(ensemble.model, 1)[0]
    n = ensemble.n
    idx = _grid_indices(grid, n)
    centered = ensemble.paths[:, 1:, :] - mean  # (N, n, p)
    csum = np.concatenate(
        [np.zeros((ensemble.N, 1, ensemble.p)), np.cumsum(centered, axis=1)], axis=1
    )
    return csum[:, idx, :] / math.sqrt(n)


def extract_innovations(model, path):
    """Innovations U_k = X_k - M X_{k-1} - m_eps for k = 1..n as (n, p) floats.

    These are the one-step prediction errors; conditionally on the past they
    are centered with covariance affine in the previous state.
    """
    path = np.asarray(path)
    if path.ndim != 2 or path.shape[1] != model.p or path.shape[0] < 2:
        raise ValueError("need a path of shape (n+1, p) with n >= 1")
    M = mean_matrix(model)
    m_eps = law_mean(model.immigration)
    x = path.astype(float)
    return x[1:] - x[:-1] @ M.T - m_eps


def paths_to_csv(ensemble, path):
    """Write paths as rows copy,k,x_1..x_p (k = 0 is the initial state)."""
    p = ensemble.p
    with open(path, "w", newline="") as fh:
        fh.write("copy,k," + ",".join("x_%d" % (i + 1) for i in range(p)) + "\n")
        for j in range(ensemble.N):
            for k in range(ensemble.n + 1):
                fh.write(
                    "%d,%d,%s\n"
                    % (j, k, ",".join(str(int(v)) for v in ensemble.paths[j, k]))
                )


def aggregates_to_csv(series, path):
    """Write aggregate rows t,s_1..s_p."""
    p = series.values.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("t," + ",".join("s_%d" % (i + 1) for i in range(p)) + "\n")
        for t, row in zip(series.grid, series.values):
            fh.write("%s,%s\n" % (repr(float(t)), ",".join(repr(float(v)) for v in row)))


def ensemble_metadata(ensemble):
    """Reproducibility metadata: model digest, seed, sizes, burn-in."""
    return {
        "model": model_digest(ensemble.model),
        "master_seed": ensemble.master_seed,
        "copies": ensemble.N,
        "steps": ensemble.n,
        "burnin": ensemble.burnin,
    }


def default_threads():
    """Thread count from BPAGG_THREADS, defaulting to 1."""
    raw = os.environ.get("BPAGG_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def write_metadata(ensemble, path):
    with open(path, "w") as fh:
        fh.write(json.dumps(ensemble_metadata(ensemble), indent=2) + "\n")
