"""
Irregular timestamps and in-between estimates
=============================================

With uneven gaps the Laplacian penalty is weighted by one over the gap, so
distant neighbours are allowed to differ more.  Between two solved
timestamps the Laplacian estimate is a gap-weighted average, while degree-1
penalties return the nearer neighbour.
"""
import numpy as np

from tvnet import (ObservationSet, PenaltySpec, SolverConfig, empirical_covariances,
                   interpolate_sequence, solve)
from tvnet.extensions import async_weights

rng = np.random.default_rng(0)
times = np.array([0.0, 1.0, 1.5, 4.0, 4.5, 9.0])
cov = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.3], [0.0, 0.3, 1.0]])
samples = tuple(rng.multivariate_normal(np.zeros(3), cov, size=15) for _ in times)
covs = empirical_covariances(ObservationSet(times, samples))

pen = PenaltySpec("laplacian", 0.2, 5.0, asynchronous=True)
print("per-pair penalty scale:", async_weights(np.diff(times), pen))
thetas, report, _ = solve(covs, pen, SolverConfig(max_iter=5000))
print(f"converged={report.converged}")

for s in (2.0, 3.0, 6.0):
    lap = interpolate_sequence(thetas, s, "laplacian")
    near = interpolate_sequence(thetas, s, "l1")
    print(f"s={s}: laplacian entry (0,1) {lap[0, 1]:+.3f}, l1 entry (0,1) {near[0, 1]:+.3f}")
