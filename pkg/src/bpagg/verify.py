"""Monte Carlo verification of stationary moments and aggregation limits.

Every experiment compares simulation against the exact quantities from the
moment engine using pre-registered bands: a fixed standard-error multiplier
(default 4) chosen before sampling, never widened afterwards. Reports carry
the empirical value, the exact target, the standard error and the z-score
for every checked entry, and serialize deterministically: a rerun with the
same master seed produces identical bytes for any worker count, so wall
clock time is kept out of the serialized form.

Standard errors come from batch means on single long paths and from a
percentile-free bootstrap (200 resamples, standard deviation across
resampled covariance estimates) on replicated aggregates.
"""

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .model import law_kron_moments, law_mean, mean_matrix, model_digest, validate
from .moments import (
    limit_covariance,
    noise_matrix,
    stationary_moments,
    stationary_variance,
)
from .simulate import (
    aggregate,
    burnin_auto,
    extract_innovations,
    percopy_aggregates,
    simulate_ensemble,
    simulate_path,
    stream_rng,
    derived_seed,
)

__all__ = [
    "ExperimentConfig",
    "VerificationReport",
    "ergodic_check",
    "clt_covariance_experiment",
    "iterated_experiment",
    "autocovariance_check",
    "innovation_diagnostics",
    "bands_overlap",
]

_BOOT = 200
_MIN_BUCKET = 100
_MAX_BUCKETS = 20


@dataclass
class ExperimentConfig:
    """Shared experiment knobs. grid must be strictly increasing."""

    model: object
    n: int
    N: int = 1
    reps: int = 200
    grid: tuple = (1.0,)
    master_seed: int = 0
    se_multiplier: float = 4.0
    burnin: object = "auto"
    threads: int = 1


@dataclass
class VerificationReport:
    """Band-by-band comparison of simulation against exact targets.

    rows hold dicts with keys t, i, j, empirical, target, se, z; the meaning
    of t depends on kind (grid time for aggregate experiments, lag for
    autocovariances, moment order for the ergodic check, 0 for innovation
    totals). runtime is wall clock and intentionally left out of the
    serialized report so reruns are byte-identical.
    """

    kind: str
    params: dict
    rows: list
    extra: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    passed: bool = True
    runtime: float = 0.0

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "passed": bool(self.passed),
            "warnings": list(self.warnings),
            "rows": self.rows,
            "extra": self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self):
        lines = ["t,i,j,empirical,target,z"]
        for r in self.rows:
            lines.append(
                "%s,%d,%d,%s,%s,%s"
                % (
                    repr(float(r["t"])),
                    r["i"],
                    r["j"],
                    repr(float(r["empirical"])),
                    repr(float(r["target"])),
                    repr(float(r["z"])),
                )
            )
        return "\n".join(lines) + "\n"


def _zval(diff, se):
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.inf


def _row(t, i, j, empirical, target, se):
    empirical = float(empirical)
    target = float(target)
    se = float(se)
    return {
        "t": float(t),
        "i": int(i),
        "j": int(j),
        "empirical": empirical,
        "target": target,
        "se": se,
        "z": float(_zval(empirical - target, se)),
    }


def _batch_se(series):
    """Standard error of the mean of a dependent series via batch means."""
    m = len(series)
    nb = 100 if m >= 200 else max(2, m // 10)
    width = m // nb
    if width < 1:
        return math.inf
    trimmed = np.asarray(series[: nb * width], dtype=float).reshape(nb, width)
    means = trimmed.mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nb))


def _rows_ok(rows, mult):
    return all(abs(r["z"]) <= mult for r in rows)


def _sample_cov(sample):
    x = np.asarray(sample, dtype=float)
    xc = x - x.mean(axis=0)
    return xc.T @ xc / (x.shape[0] - 1)


def _cov_band_rows(sample, t, target, boot_idx):
    """Covariance of sample rows vs target with bootstrap standard errors."""
    emp = _sample_cov(sample)
    boots = np.stack([_sample_cov(sample[idx]) for idx in boot_idx])
    se = boots.std(axis=0, ddof=1)
    p = emp.shape[0]
    return [
        _row(t, i, j, emp[i, j], target[i, j], se[i, j])
        for i in range(p)
        for j in range(i, p)
    ]


def _ks_normal(values):
    """Exact Kolmogorov-Smirnov distance of standardized values to N(0,1)."""
    x = np.sort(np.asarray(values, dtype=float))
    m = len(x)
    c = norm.cdf(x)
    hi = np.arange(1, m + 1) / m - c
    lo = c - np.arange(0, m) / m
    return float(max(hi.max(), lo.max()))


def _check_grid(grid):
    grid = tuple(float(t) for t in grid)
    if len(grid) == 0:
        raise ValueError("need a nonempty grid")
    if any(t < 0 for t in grid):
        raise ValueError("grid points must be >= 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    return grid


def _mixing_warning(rho, n, warnings):
    if rho > 0 and n < 100.0 / (1.0 - rho) ** 2:
        warnings.append(
            "insufficient n for reliable bands: n = %d but rho = %.3f suggests"
            " n >= %d" % (n, rho, int(100.0 / (1.0 - rho) ** 2))
        )


def ergodic_check(model, n, seed, se_multiplier=4.0):
    """Time averages of X and X (x) X on one long path vs exact moments.

    Rows use t = 1 for first moments (i = j = coordinate) and t = 2 for
    second Kronecker moments (upper triangle). Bands are batch-mean standard
    errors times the multiplier; too small an n for the model's mixing time
    is reported as a warning, not a wider band.
    """
    t0 = time.perf_counter()
    mean, kron2, _ = stationary_moments(model, 2)
    cls = validate(model)
    burn = burnin_auto(model)
    path = simulate_path(model, n, stream_rng(seed, 0), burnin=burn)
    x = path[1:].astype(float)
    p = model.p
    rows = []
    for i in range(p):
        rows.append(_row(1.0, i, i, x[:, i].mean(), mean[i], _batch_se(x[:, i])))
    second = kron2.reshape(p, p)
    for i in range(p):
        for j in range(i, p):
            prods = x[:, i] * x[:, j]
            rows.append(_row(2.0, i, j, prods.mean(), second[i, j], _batch_se(prods)))
    warnings = []
    _mixing_warning(cls.rho, n, warnings)
    return VerificationReport(
        kind="ergodic",
        params={
            "model": model_digest(model),
            "n": int(n),
            "seed": int(seed),
            "burnin": int(burn),
            "se_multiplier": float(se_multiplier),
        },
        rows=rows,
        extra={},
        warnings=warnings,
        passed=_rows_ok(rows, se_multiplier),
        runtime=time.perf_counter() - t0,
    )


def _clt_rep_worker(args):
    model, n, N, burn, grid, seed = args
    ens = simulate_ensemble(model, N, n, seed, burnin=burn, threads=1)
    return aggregate(ens, grid, scaled=True).values


def clt_covariance_experiment(cfg):
    """Distribution of the scaled aggregate against the Gaussian limit.

    Runs cfg.reps independent ensembles of cfg.N copies over cfg.n steps,
    each replication on its own derived stream. Per grid point t the
    empirical covariance of the scaled aggregate across replications is
    compared entrywise to t * sigma with bootstrap standard errors, each
    standardized marginal is tested for normality (KS distance against the
    1.36 / sqrt(reps) threshold), and increments over disjoint grid
    intervals are checked for vanishing cross covariance.
    """
    t0 = time.perf_counter()
    model = cfg.model
    grid = _check_grid(cfg.grid)
    if cfg.reps < 2:
        raise ValueError("need reps >= 2, got %r" % (cfg.reps,))
    sigma = limit_covariance(model)
    burn = burnin_auto(model) if cfg.burnin == "auto" else int(cfg.burnin)
    tasks = [
        (model, int(cfg.n), int(cfg.N), burn, grid, derived_seed(cfg.master_seed, 0, r))
        for r in range(cfg.reps)
    ]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            vals = list(pool.map(_clt_rep_worker, tasks, chunksize=max(1, cfg.reps // (cfg.threads * 8))))
    else:
        vals = [_clt_rep_worker(t) for t in tasks]
    vals = np.stack(vals)  # (reps, G, p)
    p = model.p

    boot_rng = stream_rng(cfg.master_seed, 1)
    boot_idx = boot_rng.integers(0, cfg.reps, size=(_BOOT, cfg.reps))

    rows = []
    ks_entries = []
    ks_threshold = 1.36 / math.sqrt(cfg.reps)
    for g, t in enumerate(grid):
        sample = vals[:, g, :]
        rows.extend(_cov_band_rows(sample, t, t * sigma, boot_idx))
        for i in range(p):
            sd = sample[:, i].std(ddof=1)
            if sd == 0:
                stat = 0.0 if t * sigma[i, i] == 0 else 1.0
            else:
                stat = _ks_normal((sample[:, i] - sample[:, i].mean()) / sd)
            ks_entries.append(
                {
                    "t": float(t),
                    "coord": int(i),
                    "stat": float(stat),
                    "threshold": float(ks_threshold),
                    "passed": bool(stat <= ks_threshold),
                }
            )

    increments = []
    if len(grid) > 1:
        incs = np.empty_like(vals)
        incs[:, 0, :] = vals[:, 0, :]
        incs[:, 1:, :] = vals[:, 1:, :] - vals[:, :-1, :]
        for a in range(len(grid)):
            for b in range(a + 1, len(grid)):
                for i in range(p):
                    for j in range(p):
                        xa, xb = incs[:, a, i], incs[:, b, j]
                        emp = float(
                            np.mean((xa - xa.mean()) * (xb - xb.mean()))
                            * cfg.reps
                            / (cfg.reps - 1)
                        )
                        boots = [
                            float(np.cov(xa[idx], xb[idx], ddof=1)[0, 1])
                            for idx in boot_idx
                        ]
                        se = float(np.std(boots, ddof=1))
                        increments.append(
                            {
                                "t_a": float(grid[a]),
                                "t_b": float(grid[b]),
                                "i": int(i),
                                "j": int(j),
                                "empirical": emp,
                                "se": se,
                                "z": float(_zval(emp, se)),
                            }
                        )

    mult = cfg.se_multiplier
    passed = (
        _rows_ok(rows, mult)
        and all(e["passed"] for e in ks_entries)
        and all(abs(e["z"]) <= mult for e in increments)
    )
    return VerificationReport(
        kind="clt",
        params={
            "model": model_digest(model),
            "n": int(cfg.n),
            "N": int(cfg.N),
            "reps": int(cfg.reps),
            "grid": list(grid),
            "master_seed": int(cfg.master_seed),
            "burnin": int(burn),
            "se_multiplier": float(mult),
        },
        rows=rows,
        extra={"sigma": sigma.tolist(), "ks": ks_entries, "increments": increments},
        warnings=[],
        passed=passed,
        runtime=time.perf_counter() - t0,
    )


def _default_sweep(top):
    vals = sorted({max(2, top // 4), max(2, top // 2), int(top)})
    return [int(v) for v in vals]


def iterated_experiment(cfg, order, sweep=None):
    """Iterated-limit covariance trajectories, one limit order at a time.

    order 'N_first' holds the copy count at cfg.N (the inner limit) and
    sweeps the horizon n upward; 'n_first' holds the horizon at cfg.n and
    sweeps the copy count. The scaled ensemble aggregate is a normalized sum
    of i.i.d. per-copy aggregates, so the empirical covariance across copies
    estimates the aggregate covariance at every sweep point; the trajectory
    should settle at t * sigma whichever limit is taken first. Top-level
    rows are the final sweep point, full trajectories sit in extra['sweep'].
    """
    t0 = time.perf_counter()
    model = cfg.model
    grid = _check_grid(cfg.grid)
    orders = {"N_first": 0, "n_first": 1}
    if order not in orders:
        raise ValueError("order must be 'N_first' or 'n_first', got %r" % (order,))
    oid = orders[order]
    sigma = limit_covariance(model)
    burn = burnin_auto(model) if cfg.burnin == "auto" else int(cfg.burnin)
    if sweep is None:
        sweep = _default_sweep(cfg.n if order == "N_first" else cfg.N)
    sweep = [int(s) for s in sweep]

    trajectory = []
    rows = []
    for s, val in enumerate(sweep):
        if order == "N_first":
            N_s, n_s = int(cfg.N), val
        else:
            N_s, n_s = val, int(cfg.n)
        if N_s < 2:
            raise ValueError("need at least 2 copies per sweep point")
        seed = derived_seed(cfg.master_seed, 0, oid, s)
        ens = simulate_ensemble(model, N_s, n_s, seed, burnin=burn, threads=cfg.threads)
        per_copy = percopy_aggregates(ens, grid)  # (N_s, G, p)
        boot_idx = stream_rng(cfg.master_seed, 1, oid, s).integers(
            0, N_s, size=(_BOOT, N_s)
        )
        point_rows = []
        for g, t in enumerate(grid):
            point_rows.extend(_cov_band_rows(per_copy[:, g, :], t, t * sigma, boot_idx))
        trajectory.append({"sweep": val, "N": N_s, "n": n_s, "rows": point_rows})
        rows = point_rows

    mult = cfg.se_multiplier
    return VerificationReport(
        kind="iterated",
        params={
            "model": model_digest(model),
            "order": order,
            "n": int(cfg.n),
            "N": int(cfg.N),
            "sweep": sweep,
            "grid": list(grid),
            "master_seed": int(cfg.master_seed),
            "burnin": int(burn),
            "se_multiplier": float(mult),
        },
        rows=rows,
        extra={"sigma": sigma.tolist(), "sweep": trajectory},
        warnings=[],
        passed=_rows_ok(rows, mult),
        runtime=time.perf_counter() - t0,
    )


def autocovariance_check(model, n, lags, seed, se_multiplier=4.0):
    """Empirical lagged autocovariances on one long path vs var0 (M^T)^lag.

    Rows use t = lag and cover all (i, j) since lagged autocovariance is
    not symmetric.
    """
    t0 = time.perf_counter()
    lags = [int(k) for k in lags]
    if any(k < 0 for k in lags):
        raise ValueError("lags must be >= 0")
    if max(lags, default=0) >= n:
        raise ValueError("largest lag must be below n")
    var0 = stationary_variance(model)
    M = mean_matrix(model)
    cls = validate(model)
    burn = burnin_auto(model)
    path = simulate_path(model, n, stream_rng(seed, 0), burnin=burn)
    x = path[1:].astype(float)
    c = x - x.mean(axis=0)
    p = model.p
    rows = []
    for lag in lags:
        target = var0 @ np.linalg.matrix_power(M.T, lag)
        a = c[: len(c) - lag] if lag else c
        b = c[lag:]
        for i in range(p):
            for j in range(p):
                prods = a[:, i] * b[:, j]
                rows.append(_row(float(lag), i, j, prods.mean(), target[i, j], _batch_se(prods)))
    warnings = []
    _mixing_warning(cls.rho, n, warnings)
    return VerificationReport(
        kind="autocov",
        params={
            "model": model_digest(model),
            "n": int(n),
            "lags": lags,
            "seed": int(seed),
            "burnin": int(burn),
            "se_multiplier": float(se_multiplier),
        },
        rows=rows,
        extra={},
        warnings=warnings,
        passed=_rows_ok(rows, se_multiplier),
        runtime=time.perf_counter() - t0,
    )


def _law_cov(law):
    m = law_mean(law)
    return law_kron_moments(law, 2).reshape(law.dim, law.dim) - np.outer(m, m)


def innovation_diagnostics(model, path, se_multiplier=4.0):
    """Innovation moment checks on a supplied (approximately stationary) path.

    Checks E(U U^T) against V globally (rows, t = 0), the absolute-moment
    bound E|U_j| <= sqrt(V_jj), and, bucketed by previous state for states
    seen at least 100 times, the conditional second moment against its
    affine form sum_q x_q Cov(xi^(q)) + Cov(eps). Bucket samples are i.i.d.
    so plain standard errors apply there.
    """
    t0 = time.perf_counter()
    U = extract_innovations(model, path)
    V = noise_matrix(model)
    p = model.p
    rows = []
    for i in range(p):
        for j in range(i, p):
            prods = U[:, i] * U[:, j]
            rows.append(_row(0.0, i, j, prods.mean(), V[i, j], _batch_se(prods)))

    mult = se_multiplier
    abs_entries = []
    abs_ok = True
    for j in range(p):
        a = np.abs(U[:, j])
        bound = math.sqrt(max(V[j, j], 0.0))
        se = _batch_se(a)
        excess = float(a.mean() - bound)
        ok = excess <= mult * se
        abs_ok = abs_ok and ok
        abs_entries.append(
            {
                "coord": int(j),
                "empirical": float(a.mean()),
                "bound": float(bound),
                "se": float(se),
                "passed": bool(ok),
            }
        )

    offspring_cov = [_law_cov(law) for law in model.offspring]
    eps_cov = _law_cov(model.immigration)
    states = path[:-1]
    keys, inverse, counts = np.unique(
        states, axis=0, return_inverse=True, return_counts=True
    )
    eligible = [k for k in range(len(keys)) if counts[k] >= _MIN_BUCKET]
    eligible.sort(key=lambda k: (-int(counts[k]), tuple(int(v) for v in keys[k])))
    eligible = eligible[:_MAX_BUCKETS]
    buckets = []
    buckets_ok = True
    for k in eligible:
        mask = inverse == k
        x = keys[k]
        target = eps_cov + sum(int(x[q]) * offspring_cov[q] for q in range(p))
        entries = []
        for i in range(p):
            for j in range(i, p):
                prods = U[mask, i] * U[mask, j]
                se = float(prods.std(ddof=1) / math.sqrt(len(prods)))
                z = _zval(float(prods.mean()) - float(target[i, j]), se)
                buckets_ok = buckets_ok and abs(z) <= mult
                entries.append(
                    {
                        "i": int(i),
                        "j": int(j),
                        "empirical": float(prods.mean()),
                        "target": float(target[i, j]),
                        "se": se,
                        "z": float(z),
                    }
                )
        buckets.append(
            {
                "state": [int(v) for v in x],
                "count": int(counts[k]),
                "entries": entries,
            }
        )

    passed = _rows_ok(rows, mult) and abs_ok and buckets_ok
    return VerificationReport(
        kind="innovations",
        params={
            "model": model_digest(model),
            "n": int(U.shape[0]),
            "se_multiplier": float(mult),
        },
        rows=rows,
        extra={"abs_moment": abs_entries, "buckets": buckets},
        warnings=[],
        passed=passed,
        runtime=time.perf_counter() - t0,
    )


def bands_overlap(report_a, report_b):
    """Whether every shared (t, i, j) band of two reports intersects.

    Bands are empirical +- multiplier * se with each report's own
    multiplier.
    """
    mult_a = float(report_a.params.get("se_multiplier", 4.0))
    mult_b = float(report_b.params.get("se_multiplier", 4.0))
    index_b = {(r["t"], r["i"], r["j"]): r for r in report_b.rows}
    shared = 0
    for ra in report_a.rows:
        rb = index_b.get((ra["t"], ra["i"], ra["j"]))
        if rb is None:
            continue
        shared += 1
        lo_a, hi_a = ra["empirical"] - mult_a * ra["se"], ra["empirical"] + mult_a * ra["se"]
        lo_b, hi_b = rb["empirical"] - mult_b * rb["se"], rb["empirical"] + mult_b * rb["se"]
        if hi_a < lo_b or hi_b < lo_a:
            return False
    if shared == 0:
        raise ValueError("reports share no bands to compare")
    return True
