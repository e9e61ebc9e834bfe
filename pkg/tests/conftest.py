import numpy as np
import pytest

from bpagg.model import (
    Bernoulli,
    Binomial,
    BranchingModel,
    FiniteSupport,
    Geometric,
    IndependentMarginals,
    Point,
    Poisson,
)


def build_scalar_inar():
    """Bernoulli(0.5) offspring with poisson(1) immigration: mean 2, V 1.5,
    var 2, limit covariance 6."""
    return BranchingModel(
        1,
        (IndependentMarginals([Bernoulli(0.5)]),),
        IndependentMarginals([Poisson(1.0)]),
    )


def build_two_type():
    """Mean matrix [[0.3, 0.2], [0.1, 0.4]], immigration means (1, 2)."""
    return BranchingModel(
        2,
        (
            IndependentMarginals([Bernoulli(0.3), Bernoulli(0.1)]),
            IndependentMarginals([Bernoulli(0.2), Bernoulli(0.4)]),
        ),
        IndependentMarginals([Poisson(1.0), Poisson(2.0)]),
    )


def build_deterministic():
    """Point-mass laws only: nilpotent mean matrix, V = 0, constant paths."""
    return BranchingModel(
        2,
        (
            IndependentMarginals([Point(0), Point(1)]),
            IndependentMarginals([Point(0), Point(0)]),
        ),
        IndependentMarginals([Point(2), Point(3)]),
    )


def build_deterministic_scalar():
    return BranchingModel(
        1, (IndependentMarginals([Point(0)]),), IndependentMarginals([Point(1)])
    )


def _random_marginal(rng, target_mean):
    kind = rng.integers(0, 4)
    if kind == 0:
        return Bernoulli(target_mean)
    if kind == 1:
        return Binomial(2, target_mean / 2.0)
    if kind == 2:
        return Geometric(1.0 / (1.0 + target_mean))
    return Bernoulli(target_mean)


def _random_offspring(rng, p, cap):
    # every mean entry stays below cap so row sums keep rho under control
    means = rng.uniform(0.0, cap, size=p)
    if rng.random() < 0.5:
        return IndependentMarginals([_random_marginal(rng, m) for m in means])
    # table on {0, e_1, 2 e_1, ...} with exact per-coordinate means
    atoms = [np.zeros(p, dtype=np.int64)]
    probs = []
    for j in range(p):
        v = np.zeros(p, dtype=np.int64)
        if rng.random() < 0.3:
            v[j] = 2
            probs.append(means[j] / 2.0)
        else:
            v[j] = 1
            probs.append(means[j])
        atoms.append(v)
    probs = [1.0 - sum(probs)] + probs
    return FiniteSupport(np.stack(atoms), probs)


def _random_immigration(rng, p):
    if rng.random() < 0.5:
        return IndependentMarginals([Poisson(lam) for lam in rng.uniform(0.3, 2.0, p)])
    atoms = [np.zeros(p, dtype=np.int64)]
    probs = [0.4]
    for j in range(p):
        v = np.zeros(p, dtype=np.int64)
        v[j] = int(rng.integers(1, 4))
        atoms.append(v)
    rest = rng.uniform(0.1, 1.0, p)
    rest = 0.6 * rest / rest.sum()
    probs.extend(rest.tolist())
    return FiniteSupport(np.stack(atoms), probs)


def build_random_subcritical(rng, p, rho_cap=0.8):
    """Random mixed-representation model with spectral radius <= rho_cap."""
    cap = rho_cap / p
    offspring = tuple(_random_offspring(rng, p, cap) for _ in range(p))
    return BranchingModel(p, offspring, _random_immigration(rng, p))


@pytest.fixture
def scalar_inar():
    return build_scalar_inar()


@pytest.fixture
def two_type():
    return build_two_type()


@pytest.fixture
def deterministic_model():
    return build_deterministic()
