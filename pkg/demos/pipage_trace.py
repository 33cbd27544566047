"""Rounding a fractional coverage solution one augmenting structure at a time.

All helper links share one delay, so the coverage LP applies. Each
pipage step moves mass around a cycle or path of fractional entries and
never lowers the multilinear value g.
"""
import numpy as np

from helpercache import (DelayMatrix, ConnectivityGraph, FileLibrary, ProblemInstance,
                         approximation_ratio, build_coverage_lp, exact_uncoded, lp_pipage_solve,
                         solve_lp, special_case, special_case_value, zipf_popularity)

rng = np.random.default_rng(11)
H, U, F, M = 4, 12, 6, 2
adjacency = rng.random((H, U)) < 0.45
adjacency[:, 0] = True  # one user hears every helper
graph = ConnectivityGraph(adjacency)
delays = DelayMatrix.from_links(graph, bs_delay=rng.uniform(1, 3, U), helper_delay=0.5)
inst = ProblemInstance(FileLibrary(F), zipf_popularity(F, 0.8), graph, delays, M)
sc = special_case(inst)

# %% LP bound
lp_value = solve_lp(build_coverage_lp(sc)).objective
print(f"coverage LP value {lp_value:.4f}, max degree d = {sc.max_degree}")

# %% pipage steps
trace = []
X = lp_pipage_solve(sc, trace=trace)
for s in trace:
    print(f"  {s.kind:5s} len {s.length}  g {s.g_before:.4f} -> {s.g_after:.4f}"
          f"  fractional left {s.fractional_left}")

# %% compare with the optimum and the guarantee
value, opt = special_case_value(sc, X), exact_uncoded(inst).value
ratio = approximation_ratio(sc.max_degree)
print(f"rounded {value:.4f}  optimum {opt:.4f}  guarantee {ratio:.4f} x optimum = {ratio * opt:.4f}")
