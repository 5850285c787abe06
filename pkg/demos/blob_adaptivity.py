"""
How many prototypes survive on unbalanced blobs
===============================================

Nine Gaussian blobs of sizes 10 to 90 are fitted with 12 prototypes under
entropic affinities, a Student kernel and the KL loss. The coupling is
free to leave prototypes empty, so the number of live ones is an output.

The input affinity sums to one, while the Student similarities of the
prototypes also sum to one but are weighted by prototype masses of order
1/n instead of 1/N. This makes the repulsive part of the objective
dominate and the fit merges blobs. Multiplying the input affinity by a
factor (``cx_scale``) rebalances the two terms; the loop below shows how
the number of live prototypes and the homogeneity change with it.

Expect a few minutes of runtime on one core.
"""

import time

import numpy as np

from distr import distr_fit
from distr.datasets import blobs
from distr.metrics import homogeneity

data = blobs(k=9, separation=10.0, noise=1.0, seed=0)
N = data.X.shape[0]

for scale in (1.0, float(N), 1000.0):
    t = time.perf_counter()
    res = distr_fit(data.X, n=12, d=2, perplexity=5, cx_scale=scale, seed=0)
    H = homogeneity(res.T, data.labels)
    print("cx_scale %7.1f  live prototypes %2d  homogeneity %.3f  (%.0f s)"
          % (scale, res.effective_n, H, time.perf_counter() - t))

# the spectral initialization alone already separates the blobs
from distr.engine import DistrConfig, initial_coupling
from distr.affinity import entropic_affinity

Cx = entropic_affinity(data.X, 5)
T0 = initial_coupling(Cx, data.X, 12, DistrConfig(n=12, perplexity=5), Cx.h)
print("initial coupling: homogeneity %.3f, live columns %d"
      % (homogeneity(T0, data.labels), np.count_nonzero(T0.sum(0) > 1e-4)))
