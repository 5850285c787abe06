"""
Summarizing a circle with a few prototypes
==========================================

A noisy circle in 3-D is reduced to 2-D with 8 prototypes and a square
loss between Gram matrices. Each prototype receives the mass of the arc
it represents.
"""

import numpy as np

from distr import distr_fit
from distr.datasets import circle3d

X = circle3d(N=120, noise=0.02, seed=0).X
# center so that inner products describe the geometry around the origin
X = X - X.mean(axis=0)

res = distr_fit(X, n=8, d=2, cx_kind="gram", cz_kind="gram", loss="l2", lr=0.05, seed=0)
print("outer iterations:", res.n_outer, "converged:", res.converged)
print("objective: %.4g -> %.4g" % (res.objective_trace[0], res.objective_trace[-1]))

# prototypes should lie close to a circle in the plane
radius = np.linalg.norm(res.Z, axis=1)
print("prototype radii:", np.round(radius, 3))
print("prototype masses:", np.round(res.h_Z, 3))

# every sample is sent to a single prototype in practice
share = res.T.max(axis=1) / res.T.sum(axis=1)
print("smallest share of a row on its main prototype: %.3f" % share.min())
