"""One cell, one seed: average download rate under each scheme.

Uses the default cell geometry at reduced size so it finishes in a
couple of seconds. Run the full sweep with ``helpercache experiment``.
"""
from helpercache import (ExperimentConfig, FileLibrary, average_download_rate, build_instance,
                         calibrate_grid, greedy_place, grid_helpers, sample_users, solve_coded,
                         zipf_popularity)
from helpercache.scenario import Scenario

config = ExperimentConfig().scaled(0.2)
lib, pop = FileLibrary(config.files), zipf_popularity(config.files, config.zipf_gamma)

for n_helpers in config.helper_counts:
    geom = calibrate_grid(config.geometry, n_helpers)
    scenario = Scenario(geom, config.radio, grid_helpers(geom),
                        sample_users(geom, config.users, seed=0), seed=0)
    inst = build_instance(scenario, lib, pop, config.cache_size)
    X, _ = greedy_place(inst)
    R, _ = solve_coded(inst, backend="highs")
    bs, g, c = (average_download_rate(inst, p) / 1e3 for p in (None, X, R))
    print(f"H={n_helpers:2d} ({inst.H} in use)  bs {bs:7.1f}  greedy {g:7.1f}  "
          f"coded {c:7.1f} kbps")
