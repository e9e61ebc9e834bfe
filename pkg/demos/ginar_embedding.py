"""
GINAR(p) autoregressions as branching processes
===============================================

An integer-valued AR(p) recursion Z_k = xi(Z_{k-1}; 1) + ... + xi(Z_{k-p}; p)
+ eps_k embeds as a p-type chain for the stacked state (Z_k, ..., Z_{k-p+1}),
whose mean matrix is the companion matrix of the recursion. Everything the
moment engine offers then applies to the autoregression for free.
"""

import numpy as np

from bpagg import (
    autocovariance,
    characteristic_polynomial,
    embed,
    ginar_classify,
    ginar_from_means,
    limit_covariance,
    mean_matrix,
    scalar_limit_std,
    stationary_moments,
    stationary_variance,
    v_ginar,
)

np.set_printoptions(precision=6, suppress=True)

# order 2 with bernoulli thinning means 0.5 and 0.3 and poisson(1) immigration
spec = ginar_from_means([0.5, 0.3], immigration_lam=1.0)
print("characteristic polynomial:", characteristic_polynomial(spec))
cls = ginar_classify(spec)
print("rho = %.6f, regime = %s, primitive = %s" % (cls.rho, cls.regime, cls.primitive))
print()

model = embed(spec)
print("companion mean matrix:\n", mean_matrix(model))
mean, _, _ = stationary_moments(model, 1)
print("stationary mean of the chain:", mean[0], "(lambda / (1 - m1 - m2) = 5)")
print("noise matrix (only the (0,0) entry can be nonzero):\n", v_ginar(spec))
print()

# the stacked state makes lagged covariances of Z contemporaneous ones of X:
# var(X_0)[0, 1] is cov(Z_k, Z_{k-1})
var0 = stationary_variance(model)
print("var(Z_k)          = %.6f" % var0[0, 0])
print("cov(Z_k, Z_k-1)   = %.6f" % var0[0, 1])
print("same via lag-1 autocovariance:", autocovariance(model, 1)[0, 0])
print()

# order 1 has a closed form for the aggregation limit standard deviation,
# which squares to the general limit covariance
spec1 = ginar_from_means([0.5], immigration_lam=1.0)
std = scalar_limit_std(spec1)
print("order-1 closed form std = %.6f, squared = %.6f" % (std, std * std))
print("general route sigma     = %.6f" % limit_covariance(embed(spec1))[0, 0])
