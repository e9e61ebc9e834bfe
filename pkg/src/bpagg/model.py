"""Offspring and immigration laws on Z_+^p and the branching model container.

A model is p offspring laws (one per type) plus one immigration law, all
p-dimensional. Two law representations are supported: an explicit finite
probability table, and a product of independent scalar marginals with
closed-form moments. Both expose exact mixed moments up to third order
through Kronecker powers, and exact samplers on a caller-supplied generator.
"""

import hashlib
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .kronalg import kron_power, spectral_radius

__all__ = [
    "FiniteSupport",
    "IndependentMarginals",
    "BranchingModel",
    "Classification",
    "law_mean",
    "law_kron_moments",
    "mean_matrix",
    "validate",
    "sample",
    "model_from_json",
    "model_to_json",
    "load_model",
    "model_digest",
]

# draws larger than this are generated in chunks to bound memory
_CHUNK = 1 << 20

_REGIME_TOL = 1e-9
_MASS_TOL = 1e-9


class Poisson:
    """poisson(lam) on {0,1,...}: E X = lam, E X^2 = lam + lam^2,
    E X^3 = lam + 3 lam^2 + lam^3."""

    dist = "poisson"

    def __init__(self, lam):
        lam = float(lam)
        if lam < 0:
            raise ValueError("need lambda >= 0, got %r" % lam)
        self.lam = lam

    def raw_moment(self, k):
        lam = self.lam
        if k == 1:
            return lam
        if k == 2:
            return lam + lam * lam
        return lam + 3.0 * lam * lam + lam ** 3

    def sample_one(self, rng):
        return int(rng.poisson(self.lam))

    def sample_sum(self, count, rng):
        total = 0
        while count > 0:
            k = min(count, _CHUNK)
            total += int(rng.poisson(self.lam, k).sum())
            count -= k
        return total

    def params(self):
        return {"dist": "poisson", "lambda": self.lam}


class Bernoulli:
    """bernoulli(q) on {0,1}: all raw moments equal q.

    A sum of count independent copies is binomial(count, q), drawn as one
    binomial variate. This is the only marginal with an aggregated draw;
    it keeps thinning-style models fast without changing the law.
    """

    dist = "bernoulli"

    def __init__(self, q):
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError("need q in [0, 1], got %r" % q)
        self.q = q

    def raw_moment(self, k):
        return self.q

    def sample_one(self, rng):
        return int(rng.binomial(1, self.q))

    def sample_sum(self, count, rng):
        return int(rng.binomial(count, self.q))

    def params(self):
        return {"dist": "bernoulli", "q": self.q}


class Binomial:
    """binomial(n, q): raw moments from factorial moments
    E X(X-1) = n(n-1)q^2 and E X(X-1)(X-2) = n(n-1)(n-2)q^3."""

    dist = "binomial"

    def __init__(self, n, q):
        if int(n) != n or n < 0:
            raise ValueError("need integer n >= 0, got %r" % (n,))
        q = float(q)
        if not 0.0 <= q <= 1.0:
            raise ValueError("need q in [0, 1], got %r" % q)
        self.n = int(n)
        self.q = q

    def raw_moment(self, k):
        n, q = self.n, self.q
        m1 = n * q
        if k == 1:
            return m1
        f2 = n * (n - 1) * q * q
        if k == 2:
            return f2 + m1
        f3 = n * (n - 1) * (n - 2) * q ** 3
        return f3 + 3.0 * f2 + m1

    def sample_one(self, rng):
        return int(rng.binomial(self.n, self.q))

    def sample_sum(self, count, rng):
        total = 0
        while count > 0:
            k = min(count, _CHUNK)
            total += int(rng.binomial(self.n, self.q, k).sum())
            count -= k
        return total

    def params(self):
        return {"dist": "binomial", "n": self.n, "q": self.q}


class Geometric:
    """geometric(q) counting failures, P(X = k) = q (1-q)^k on {0,1,...}.

    With b = (1-q)/q the factorial moments are b, 2 b^2, 6 b^3, so
    E X = b, E X^2 = 2 b^2 + b, E X^3 = 6 b^3 + 6 b^2 + b. q = 1 is the
    point mass at zero.
    """

    dist = "geometric"

    def __init__(self, q):
        q = float(q)
        if not 0.0 < q <= 1.0:
            raise ValueError("need q in (0, 1], got %r" % q)
        self.q = q

    def raw_moment(self, k):
        b = (1.0 - self.q) / self.q
        if k == 1:
            return b
        if k == 2:
            return 2.0 * b * b + b
        return 6.0 * b ** 3 + 6.0 * b * b + b

    def sample_one(self, rng):
        return int(rng.geometric(self.q)) - 1

    def sample_sum(self, count, rng):
        total = 0
        while count > 0:
            k = min(count, _CHUNK)
            total += int(rng.geometric(self.q, k).sum()) - k
            count -= k
        return total

    def params(self):
        return {"dist": "geometric", "q": self.q}


class Point:
    """Point mass at a nonnegative integer c. Consumes no randomness."""

    dist = "point"

    def __init__(self, c):
        if int(c) != c or c < 0:
            raise ValueError("need integer c >= 0, got %r" % (c,))
        self.c = int(c)

    def raw_moment(self, k):
        return float(self.c) ** k

    def sample_one(self, rng):
        return self.c

    def sample_sum(self, count, rng):
        return self.c * count

    def params(self):
        return {"dist": "point", "c": self.c}


_MARGINALS = {m.dist: m for m in (Poisson, Bernoulli, Binomial, Geometric, Point)}


class FiniteSupport:
    """Law given by an explicit table of support vectors and probabilities.

    Support vectors are distinct points of Z_+^p. Probabilities must be
    nonnegative and sum to one within 1e-9; the stored masses are
    renormalized to exact unit total.
    """

    kind = "finite"

    def __init__(self, support, probs):
        support = np.asarray(support, dtype=np.int64)
        if support.ndim == 1:
            support = support[:, None]
        probs = np.asarray(probs, dtype=float)
        if support.ndim != 2 or support.shape[0] != probs.shape[0]:
            raise ValueError("need one probability per support vector")
        if support.shape[0] == 0:
            raise ValueError("need at least one support vector")
        if np.any(support < 0):
            raise ValueError("support vectors must be nonnegative integers")
        if len({tuple(v) for v in support.tolist()}) != support.shape[0]:
            raise ValueError("support vectors must be distinct")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = probs.sum()
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError("probabilities sum to %r, not 1" % total)
        self.support = support
        self.probs = probs / total
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    @property
    def dim(self):
        return self.support.shape[1]

    def mean(self):
        return self.probs @ self.support.astype(float)

    def kron_moment(self, alpha):
        if alpha not in (1, 2, 3):
            raise ValueError("moment order must be 1, 2 or 3, got %r" % (alpha,))
        pts = self.support.astype(float)
        out = np.zeros(self.dim ** alpha)
        for w, x in zip(self.probs, pts):
            out += w * kron_power(x, alpha)
        return out

    def sample(self, rng):
        idx = min(int(np.searchsorted(self._cum, rng.random(), side="right")),
                  len(self.probs) - 1)
        return self.support[idx].copy()

    def sample_sum(self, count, rng):
        total = np.zeros(self.dim, dtype=np.int64)
        natoms = len(self.probs)
        while count > 0:
            k = min(count, _CHUNK)
            idx = np.searchsorted(self._cum, rng.random(k), side="right")
            np.minimum(idx, natoms - 1, out=idx)
            total += np.bincount(idx, minlength=natoms) @ self.support
            count -= k
        return total

    def to_json(self):
        return {
            "kind": "finite",
            "support": [
                {"v": [int(c) for c in v], "p": float(w)}
                for v, w in zip(self.support, self.probs)
            ],
        }


class IndependentMarginals:
    """Product law with independent scalar marginals, one per coordinate.

    Mixed moments factor across coordinates, so any Kronecker moment up to
    order three is a product of closed-form scalar raw moments.
    """

    kind = "independent"

    def __init__(self, marginals):
        if len(marginals) == 0:
            raise ValueError("need at least one marginal")
        self.marginals = list(marginals)

    @property
    def dim(self):
        return len(self.marginals)

    def mean(self):
        return np.array([m.raw_moment(1) for m in self.marginals])

    def kron_moment(self, alpha):
        if alpha not in (1, 2, 3):
            raise ValueError("moment order must be 1, 2 or 3, got %r" % (alpha,))
        p = self.dim
        raws = [[m.raw_moment(k) for k in (1, 2, 3)] for m in self.marginals]
        out = np.empty(p ** alpha)
        for flat, idx in enumerate(np.ndindex(*(p,) * alpha)):
            prod = 1.0
            for coord, mult in Counter(idx).items():
                prod *= raws[coord][mult - 1]
            out[flat] = prod
        return out

    def sample(self, rng):
        return np.array([m.sample_one(rng) for m in self.marginals], dtype=np.int64)

    def sample_sum(self, count, rng):
        return np.array(
            [m.sample_sum(count, rng) for m in self.marginals], dtype=np.int64
        )

    def to_json(self):
        return {"kind": "independent", "marginals": [m.params() for m in self.marginals]}


@dataclass(frozen=True)
class BranchingModel:
    """p offspring laws (column i is the brood of one type-i individual)
    plus one p-dimensional immigration law."""

    p: int
    offspring: tuple
    immigration: object

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need p >= 1")
        if len(self.offspring) != self.p:
            raise ValueError(
                "need %d offspring laws, got %d" % (self.p, len(self.offspring))
            )
        object.__setattr__(self, "offspring", tuple(self.offspring))
        for law in self.offspring:
            if law.dim != self.p:
                raise ValueError("offspring law dimension %d != p = %d" % (law.dim, self.p))
        if self.immigration.dim != self.p:
            raise ValueError(
                "immigration dimension %d != p = %d" % (self.immigration.dim, self.p)
            )


@dataclass(frozen=True)
class Classification:
    rho: float
    regime: str
    primitive: bool
    immigration_nontrivial: bool


def law_mean(law):
    """Mean vector of a law."""
    return law.mean()


def law_kron_moments(law, alpha):
    """E[X^{(x)alpha}] as a vector of length dim**alpha, alpha in {1, 2, 3}."""
    return law.kron_moment(alpha)


def sample(law, rng):
    """One exact draw from a law as an int64 vector."""
    return law.sample(rng)


def mean_matrix(model):
    """Offspring mean matrix M with column i the mean brood of type i."""
    return np.column_stack([law.mean() for law in model.offspring])


def validate(model):
    """Classify a model: spectral radius, regime, primitivity, immigration.

    The regime splits at spectral radius one with tolerance 1e-9.
    Primitivity is decided exactly on the sparsity pattern of M: M is
    primitive iff the boolean power B^((p-1)^2 + 1) is everywhere positive.
    """
    M = mean_matrix(model)
    rho = spectral_radius(M)
    if rho < 1.0 - _REGIME_TOL:
        regime = "subcritical"
    elif rho <= 1.0 + _REGIME_TOL:
        regime = "critical"
    else:
        regime = "supercritical"
    B = (M > 0).astype(np.int64)
    C = B.copy()
    for _ in range((model.p - 1) ** 2):
        C = np.minimum(C @ B, 1)
    nontrivial = bool(np.any(law_mean(model.immigration) > 0))
    return Classification(rho, regime, bool(C.all()), nontrivial)


def _law_from_json(obj):
    kind = obj.get("kind")
    if kind == "finite":
        atoms = obj["support"]
        support = [a["v"] for a in atoms]
        probs = [a["p"] for a in atoms]
        return FiniteSupport(support, probs)
    if kind == "independent":
        marginals = []
        for spec in obj["marginals"]:
            cls = _MARGINALS.get(spec.get("dist"))
            if cls is None:
                raise ValueError("unknown marginal dist %r" % (spec.get("dist"),))
            kwargs = {k: v for k, v in spec.items() if k != "dist"}
            if "lambda" in kwargs:
                kwargs["lam"] = kwargs.pop("lambda")
            marginals.append(cls(**kwargs))
        return IndependentMarginals(marginals)
    raise ValueError("unknown law kind %r" % (kind,))


def model_from_json(obj):
    """Build a model from its JSON dictionary form."""
    if not isinstance(obj, dict):
        raise ValueError("model JSON must be an object")
    for key in ("p", "offspring", "immigration"):
        if key not in obj:
            raise ValueError("model JSON missing %r" % key)
    p = obj["p"]
    offspring = tuple(_law_from_json(o) for o in obj["offspring"])
    immigration = _law_from_json(obj["immigration"])
    return BranchingModel(p, offspring, immigration)


def model_to_json(model):
    """JSON dictionary form of a model."""
    return {
        "p": model.p,
        "offspring": [law.to_json() for law in model.offspring],
        "immigration": model.immigration.to_json(),
    }


def load_model(path):
    """Read a model from a JSON file."""
    with open(path) as fh:
        return model_from_json(json.load(fh))


def model_digest(model):
    """Short stable hash of the model, for run metadata."""
    text = json.dumps(model_to_json(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
