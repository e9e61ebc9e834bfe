import itertools
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bpagg.kronalg import kron_power
from bpagg.model import (
    Bernoulli,
    Binomial,
    BranchingModel,
    FiniteSupport,
    Geometric,
    IndependentMarginals,
    Point,
    Poisson,
    law_kron_moments,
    law_mean,
    mean_matrix,
    model_digest,
    model_from_json,
    model_to_json,
    sample,
    validate,
)
from conftest import build_scalar_inar, build_two_type


def _pmf_table(marginal, tail=1e-13):
    """Truncated pmf of a scalar marginal, computed from first principles."""
    if isinstance(marginal, Poisson):
        lam = marginal.lam
        out, k, term = [], 0, math.exp(-lam)
        total = 0.0
        while total < 1.0 - tail:
            out.append(term)
            total += term
            k += 1
            term = term * lam / k
            if k > 500:
                break
        return np.array(out)
    if isinstance(marginal, Bernoulli):
        return np.array([1.0 - marginal.q, marginal.q])
    if isinstance(marginal, Binomial):
        n, q = marginal.n, marginal.q
        return np.array(
            [math.comb(n, k) * q ** k * (1 - q) ** (n - k) for k in range(n + 1)]
        )
    if isinstance(marginal, Geometric):
        q = marginal.q
        if q == 1.0:
            return np.array([1.0])
        # third moments weight the tail by k^3, so truncate far beyond the
        # point where the raw mass is negligible
        kmax = 3 * (int(math.log(tail) / math.log(1 - q)) + 2)
        return np.array([q * (1 - q) ** k for k in range(kmax)])
    if isinstance(marginal, Point):
        return np.array([0.0] * marginal.c + [1.0])
    raise AssertionError("unknown marginal")


def _raw_moment_oracle(marginal, order):
    pmf = _pmf_table(marginal)
    ks = np.arange(len(pmf), dtype=float)
    return float(np.sum(pmf * ks ** order))


@pytest.mark.parametrize(
    "marginal",
    [
        Poisson(1.0),
        Poisson(0.3),
        Poisson(2.5),
        Bernoulli(0.5),
        Bernoulli(1.0),
        Binomial(3, 0.2),
        Binomial(5, 0.65),
        Geometric(0.7),
        Geometric(0.25),
        Geometric(1.0),
        Point(0),
        Point(3),
    ],
)
def test_marginal_raw_moments_match_pmf_summation(marginal):
    for order in (1, 2, 3):
        assert marginal.raw_moment(order) == pytest.approx(
            _raw_moment_oracle(marginal, order), rel=1e-10, abs=1e-10
        )


def test_poisson_one_third_moment_is_five():
    assert Poisson(1.0).raw_moment(3) == pytest.approx(5.0, abs=1e-12)


def test_kron_moment_order_one_equals_mean():
    laws = [
        IndependentMarginals([Poisson(1.3), Geometric(0.4)]),
        FiniteSupport([[0, 0], [2, 1], [1, 3]], [0.5, 0.25, 0.25]),
    ]
    for law in laws:
        assert_allclose(law_kron_moments(law, 1), law_mean(law), atol=0)


def test_independent_marginals_second_moment_table():
    law = IndependentMarginals([Poisson(1.0), Bernoulli(0.5)])
    second = law_kron_moments(law, 2).reshape(2, 2)
    assert_allclose(second, [[2.0, 0.5], [0.5, 0.5]], atol=1e-14)


def test_independent_marginals_vs_joint_enumeration():
    law = IndependentMarginals([Poisson(0.7), Geometric(0.6), Bernoulli(0.3)])
    tables = [_pmf_table(m) for m in law.marginals]
    for alpha in (1, 2, 3):
        oracle = np.zeros(3 ** alpha)
        for idx in itertools.product(*[range(len(t)) for t in tables]):
            w = tables[0][idx[0]] * tables[1][idx[1]] * tables[2][idx[2]]
            oracle += w * kron_power(np.array(idx, dtype=float), alpha)
        assert_allclose(law_kron_moments(law, alpha), oracle, rtol=1e-9, atol=1e-9)


def test_finite_support_moments_from_table():
    law = FiniteSupport(
        [[0, 0], [1, 0], [1, 1], [0, 2]], [0.5, 0.2, 0.2, 0.1]
    )
    assert_allclose(law_mean(law), [0.4, 0.4], atol=1e-15)
    second = law_kron_moments(law, 2).reshape(2, 2)
    # E x1 x2 only from atom (1,1)
    assert second[0, 1] == pytest.approx(0.2, abs=1e-15)
    assert second[0, 0] == pytest.approx(0.4, abs=1e-15)
    assert second[1, 1] == pytest.approx(0.2 + 0.4, abs=1e-15)


def test_representation_equivalence_product_bernoulli():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a, b = rng.uniform(0, 1, 2)
        table = FiniteSupport(
            [[0, 0], [0, 1], [1, 0], [1, 1]],
            [(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b],
        )
        product = IndependentMarginals([Bernoulli(a), Bernoulli(b)])
        for alpha in (1, 2, 3):
            assert_allclose(
                law_kron_moments(table, alpha),
                law_kron_moments(product, alpha),
                atol=1e-12,
            )


def test_finite_support_validation():
    with pytest.raises(ValueError):
        FiniteSupport([[0], [1]], [0.6, 0.6])
    with pytest.raises(ValueError):
        FiniteSupport([[0], [1]], [1.2, -0.2])
    with pytest.raises(ValueError):
        FiniteSupport([[0], [0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        FiniteSupport([[-1], [0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        FiniteSupport([[0], [1]], [0.5])


def test_finite_support_mass_renormalized():
    eps = 4e-10
    law = FiniteSupport([[0], [1]], [0.5, 0.5 + eps])
    assert law.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_marginal_parameter_validation():
    with pytest.raises(ValueError):
        Poisson(-0.1)
    with pytest.raises(ValueError):
        Bernoulli(1.5)
    with pytest.raises(ValueError):
        Binomial(-1, 0.5)
    with pytest.raises(ValueError):
        Binomial(2, -0.2)
    with pytest.raises(ValueError):
        Geometric(0.0)
    with pytest.raises(ValueError):
        Point(-2)
    with pytest.raises(ValueError):
        Point(1.5)


def test_mean_matrix_columns_are_offspring_means():
    model = build_two_type()
    assert_allclose(mean_matrix(model), [[0.3, 0.2], [0.1, 0.4]], atol=0)


def test_validate_two_type():
    cls = validate(build_two_type())
    assert cls.regime == "subcritical"
    assert cls.rho == pytest.approx(0.5, abs=1e-12)
    assert cls.primitive
    assert cls.immigration_nontrivial


def test_validate_critical_and_supercritical():
    crit = BranchingModel(
        1, (IndependentMarginals([Point(1)]),), IndependentMarginals([Poisson(1.0)])
    )
    assert validate(crit).regime == "critical"
    sup = BranchingModel(
        1, (IndependentMarginals([Point(2)]),), IndependentMarginals([Poisson(1.0)])
    )
    assert validate(sup).regime == "supercritical"


def test_validate_depends_only_on_mean_matrix():
    a = build_scalar_inar()
    b = BranchingModel(
        1,
        (FiniteSupport([[0], [1]], [0.5, 0.5]),),
        IndependentMarginals([Geometric(0.5)]),
    )
    ca, cb = validate(a), validate(b)
    assert (ca.rho, ca.regime, ca.primitive) == (cb.rho, cb.regime, cb.primitive)


def test_primitivity_patterns():
    companion = BranchingModel(
        2,
        (
            IndependentMarginals([Bernoulli(0.5), Point(1)]),
            IndependentMarginals([Bernoulli(0.3), Point(0)]),
        ),
        IndependentMarginals([Poisson(1.0), Point(0)]),
    )
    assert validate(companion).primitive
    nilpotent = BranchingModel(
        2,
        (
            IndependentMarginals([Point(0), Point(1)]),
            IndependentMarginals([Point(0), Point(0)]),
        ),
        IndependentMarginals([Poisson(1.0), Point(0)]),
    )
    assert not validate(nilpotent).primitive
    dead = BranchingModel(
        1, (IndependentMarginals([Point(0)]),), IndependentMarginals([Poisson(1.0)])
    )
    assert not validate(dead).primitive


def test_trivial_immigration_flag():
    model = BranchingModel(
        1, (IndependentMarginals([Bernoulli(0.5)]),), IndependentMarginals([Point(0)])
    )
    assert not validate(model).immigration_nontrivial


def test_sample_sum_empirical_mean_poisson():
    # CLT band: sd of the mean of 1e6 poisson(2) draws is ~0.0014
    rng = np.random.default_rng(123)
    law = Poisson(2.0)
    total = law.sample_sum(1_000_000, rng)
    assert total / 1e6 == pytest.approx(2.0, abs=0.005)


def test_sample_sum_matches_individual_draws():
    # chunk accumulation must consume the stream like one-by-one draws
    for law in (Poisson(1.3), Geometric(0.4), Binomial(3, 0.3)):
        r1 = np.random.default_rng(9)
        r2 = np.random.default_rng(9)
        total = law.sample_sum(5000, r1)
        singles = sum(law.sample_one(r2) for _ in range(5000))
        assert total == singles


def test_bernoulli_sum_uses_binomial_count():
    rng = np.random.default_rng(2)
    law = Bernoulli(1.0)
    assert law.sample_sum(7, rng) == 7
    assert Bernoulli(0.0).sample_sum(1000, rng) == 0


def test_point_and_degenerate_samples():
    rng = np.random.default_rng(0)
    assert Point(3).sample_one(rng) == 3
    assert Point(2).sample_sum(10, rng) == 20
    assert Geometric(1.0).sample_sum(1000, rng) == 0


def test_finite_support_sampler_frequencies():
    rng = np.random.default_rng(31)
    law = FiniteSupport([[0, 0], [1, 0], [1, 1], [0, 2]], [0.5, 0.2, 0.2, 0.1])
    draws = np.stack([sample(law, rng) for _ in range(20000)])
    freq_11 = np.mean((draws[:, 0] == 1) & (draws[:, 1] == 1))
    se = math.sqrt(0.2 * 0.8 / 20000)
    assert abs(freq_11 - 0.2) <= 4 * se
    assert_allclose(draws.mean(axis=0), [0.4, 0.4], atol=0.02)


def test_finite_support_sum_matches_single_draw_stream():
    law = FiniteSupport([[0, 1], [2, 0], [1, 1]], [0.3, 0.3, 0.4])
    r1 = np.random.default_rng(77)
    r2 = np.random.default_rng(77)
    total = law.sample_sum(4000, r1)
    singles = sum(law.sample(r2) for _ in range(4000))
    assert_allclose(total, singles, atol=0)


def test_model_json_roundtrip():
    model = build_two_type()
    text = json.dumps(model_to_json(model))
    back = model_from_json(json.loads(text))
    assert model_digest(back) == model_digest(model)
    for alpha in (1, 2, 3):
        for a, b in zip(model.offspring, back.offspring):
            assert_allclose(law_kron_moments(a, alpha), law_kron_moments(b, alpha))


def test_model_json_rejects_bad_input():
    with pytest.raises(ValueError):
        model_from_json({"p": 1, "offspring": []})
    with pytest.raises(ValueError):
        model_from_json(
            {
                "p": 1,
                "offspring": [{"kind": "mystery"}],
                "immigration": {"kind": "independent", "marginals": [{"dist": "poisson", "lambda": 1.0}]},
            }
        )
    with pytest.raises(ValueError):
        model_from_json(
            {
                "p": 1,
                "offspring": [
                    {"kind": "independent", "marginals": [{"dist": "zeta", "s": 2}]}
                ],
                "immigration": {"kind": "independent", "marginals": [{"dist": "poisson", "lambda": 1.0}]},
            }
        )


def test_model_dimension_checks():
    with pytest.raises(ValueError):
        BranchingModel(
            2,
            (IndependentMarginals([Bernoulli(0.5)]),),
            IndependentMarginals([Poisson(1.0), Poisson(1.0)]),
        )
    with pytest.raises(ValueError):
        BranchingModel(
            1,
            (IndependentMarginals([Bernoulli(0.5)]),),
            IndependentMarginals([Poisson(1.0), Poisson(1.0)]),
        )
