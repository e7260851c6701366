"""
Choosing lambda and beta
========================

Two ways to pick the regularization strengths on a training scenario that
is independent of the one being evaluated: the Akaike information
criterion, which needs no ground truth, and the best F1 on the training
truth.  The acceptance parameters were fixed with the second rule on seeds
1000 and 1001.  This takes a few minutes.
"""
import itertools

from tvnet import PenaltySpec, SolverConfig, empirical_covariances, solve
from tvnet.evaluation import aic, f1_score, generate_scenario

cfg = SolverConfig(rho=200.0, eps_abs=1e-6, eps_rel=1e-6, max_iter=20000)
grid = list(itertools.product([1.0, 1.5, 2.0, 3.0], [10.0, 20.0, 40.0, 80.0]))

total_f1 = dict.fromkeys(grid, 0.0)
for seed in (1000, 1001):
    scenario, obs = generate_scenario("global", seed=seed)
    covs = empirical_covariances(obs)
    scores = {}
    for lam, beta in grid:
        thetas, _, _ = solve(covs, PenaltySpec("l2", lam, beta), cfg)
        f1 = f1_score(thetas, scenario)
        total_f1[(lam, beta)] += f1
        scores[(lam, beta)] = aic(thetas, covs)
        print(f"seed {seed} lambda={lam} beta={beta}: F1 {f1:.3f}, AIC {scores[(lam, beta)]:.0f}")
    print(f"seed {seed}: AIC picks {min(scores, key=scores.get)}")

print("best summed F1:", max(total_f1, key=total_f1.get))
