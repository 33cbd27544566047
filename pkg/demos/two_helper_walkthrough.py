"""Two helpers, four users, one cache slot each.

Users 1 and 2 hear only helper 1, user 4 only helper 2, and user 3 both.
Every helper link is one unit faster than the base station. We compare
the greedy placement, the exhaustive optimum and the coded LP.
"""
import numpy as np

from helpercache import (ConnectivityGraph, DelayMatrix, FileLibrary, Popularity,
                         ProblemInstance, coded_objective, exact_uncoded, greedy_place,
                         solve_coded, uncoded_delays)

adjacency = np.array([[1, 1, 1, 0],
                      [0, 0, 1, 1]], dtype=bool)
graph = ConnectivityGraph(adjacency)
delays = DelayMatrix.from_links(graph, bs_delay=2.0, helper_delay=1.0)
inst = ProblemInstance(FileLibrary(2), Popularity(np.array([0.6, 0.4])), graph, delays, 1)

# %% base station only
print("delay with empty caches:", inst.omega_bs.sum())

# %% greedy, step by step
X, trace = greedy_place(inst)
for step in trace.steps:
    f, h = step.element
    print(f"  pick file {f + 1} at helper {h}, gain {step.marginal:.2f}")
print("greedy savings:", round(trace.objective, 12), " delay:", uncoded_delays(inst, X).sum())

# %% exhaustive search agrees here
best = exact_uncoded(inst)
print(f"optimum savings {best.value} over {best.enumerated} placements")
print(best.placements[0].x.astype(int))

# %% coded placement can only do better
R, coded_delay = solve_coded(inst)
print("coded delay:", round(coded_delay, 9), " check:", round(coded_objective(inst, R), 9))
print(np.round(R.rho, 3))
