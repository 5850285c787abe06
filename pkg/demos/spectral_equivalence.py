"""
Kernel PCA as a special case
============================

With Gram similarities on both sides, a square loss and one prototype per
sample, the joint objective reduces to a low-rank approximation of the
input Gram matrix. Its optimum is the residual of the top-d eigenpairs.
"""

import numpy as np

from distr import distr_fit
from distr.affinity import linear_gram
from distr.numkit import sym_eig

N, p, d = 8, 5, 2
for seed in range(5):
    X = np.random.default_rng(seed).standard_normal((N, p))
    lam = sym_eig(linear_gram(X).C).eigenvalues
    # uniform weights 1/N turn the Frobenius residual into sum(lam_i^2) / N^2
    bound = np.sum(lam[d:] ** 2) / N**2
    res = distr_fit(X, n=N, d=d, cx_kind="gram", cz_kind="gram", loss="l2", lr=0.1, seed=seed)
    print("seed %d  bound %.6f  reached %.6f  excess %.2e"
          % (seed, bound, res.objective_trace[-1], res.objective_trace[-1] / bound - 1))

# at the default step size the same budget stops short of the bound
res = distr_fit(X, n=N, d=d, cx_kind="gram", cz_kind="gram", loss="l2", seed=4)
print("lr 0.01: excess %.2e" % (res.objective_trace[-1] / bound - 1))
