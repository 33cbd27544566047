"""Helper-count sweep, user-count sweep and mobility comparison.

Every (parameter, seed) cell is computed independently and deterministically,
so tables are reproducible bit for bit and cells can run in parallel.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .greedy import greedy_place
from .lp import solve_coded
from .model import FileLibrary, zipf_popularity
from .scenario import (CellGeometry, MobilityConfig, RadioConfig, Scenario,
                       average_download_rate, calibrate_grid, compile_scenario, derive_seed,
                       grid_helpers, random_walk, remap_placement, sample_users)

KINDS = ("helpers_sweep", "users_sweep", "mobility")
CSV_HEADER = ("experiment", "param", "seed", "scheme", "avg_rate_bps")


@dataclass(frozen=True)
class ExperimentConfig:
    files: int = 1000
    cache_size: int = 100
    zipf_gamma: float = 0.56
    users: int = 300
    helper_counts: tuple[int, ...] = (25, 32, 45)
    user_counts: tuple[int, ...] = (300, 450, 600)
    sweep_helpers: int = 32
    seeds: tuple[int, ...] = tuple(range(10))
    geometry: CellGeometry = field(default_factory=CellGeometry)
    radio: RadioConfig = field(default_factory=RadioConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    lp_backend: str = "highs"

    def scaled(self, factor: float) -> ExperimentConfig:
        """Shrink library, cache, user counts and number of seeds by ``factor``."""
        if not 0 < factor <= 1:
            raise ValueError("scale must lie in (0, 1]")
        if factor == 1:
            return self
        sz = lambda n: max(1, int(round(n * factor)))  # noqa: E731
        return replace(self, files=sz(self.files), cache_size=sz(self.cache_size),
                       users=sz(self.users), user_counts=tuple(sz(n) for n in self.user_counts),
                       seeds=self.seeds[:sz(len(self.seeds))])

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("helper_counts", "user_counts", "seeds"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment config field(s): {sorted(unknown)}")
        for k in ("helper_counts", "user_counts", "seeds"):
            if k in d:
                d[k] = tuple(int(v) for v in d[k])
        for k, typ in (("geometry", CellGeometry), ("radio", RadioConfig),
                       ("mobility", MobilityConfig)):
            if k in d:
                d[k] = typ(**d[k])
        return cls(**d)


class Row(NamedTuple):
    experiment: str
    param: int
    seed: int
    scheme: str
    avg_rate_bps: float


@dataclass
class ExperimentResult:
    kind: str
    rows: list[Row]

    def summary(self) -> dict[tuple[int, str], tuple[float, float]]:
        """``(param, scheme) -> (mean, sample std)`` over seeds."""
        groups: dict[tuple[int, str], list[float]] = {}
        for r in self.rows:
            groups.setdefault((r.param, r.scheme), []).append(r.avg_rate_bps)
        return {k: (float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
                for k, v in groups.items()}

    def mean(self, param: int, scheme: str) -> float:
        return self.summary()[(param, scheme)][0]

    def params(self) -> list[int]:
        return sorted({r.param for r in self.rows})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.experiment, r.param, r.seed, r.scheme, repr(r.avg_rate_bps)])
        return buf.getvalue()


def _setting(config: ExperimentConfig, n_helpers: int, n_users: int, seed: int) -> Scenario:
    geom = calibrate_grid(config.geometry, n_helpers)
    users = sample_users(geom, n_users, seed)
    return Scenario(geom, config.radio, grid_helpers(geom), users, seed)


def _library(config: ExperimentConfig):
    return FileLibrary(config.files), zipf_popularity(config.files, config.zipf_gamma)


def _placement_rows(kind, param, seed, config, scenario) -> list[Row]:
    lib, pop = _library(config)
    inst, _ = compile_scenario(scenario, lib, pop, config.cache_size)
    X, _ = greedy_place(inst)
    R, _ = solve_coded(inst, backend=config.lp_backend)
    return [Row(kind, param, seed, "bs", average_download_rate(inst)),
            Row(kind, param, seed, "greedy", average_download_rate(inst, X)),
            Row(kind, param, seed, "coded", average_download_rate(inst, R))]


def _mobility_rows(param, seed, config, scenario) -> list[Row]:
    lib, pop = _library(config)
    before, ids_before = compile_scenario(scenario, lib, pop, config.cache_size)
    X_agnostic, _ = greedy_place(before)
    moved = scenario.with_users(random_walk(scenario, config.mobility, derive_seed(seed, 1)))
    after, ids_after = compile_scenario(moved, lib, pop, config.cache_size)
    X_adaptive, _ = greedy_place(after)
    X_carried = remap_placement(X_agnostic, ids_before, ids_after)
    return [Row("mobility", param, seed, "bs", average_download_rate(after)),
            Row("mobility", param, seed, "agnostic", average_download_rate(after, X_carried)),
            Row("mobility", param, seed, "adaptive", average_download_rate(after, X_adaptive))]


def run_cell(kind: str, config: ExperimentConfig, param: int, seed: int) -> list[Row]:
    if kind == "helpers_sweep":
        return _placement_rows(kind, param, seed, config,
                               _setting(config, param, config.users, seed))
    if kind == "users_sweep":
        return _placement_rows(kind, param, seed, config,
                               _setting(config, config.sweep_helpers, param, seed))
    if kind == "mobility":
        return _mobility_rows(param, seed, config, _setting(config, param, config.users, seed))
    raise ValueError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(kind: str, config: ExperimentConfig, seeds=None, *, threads: int = 1
                   ) -> ExperimentResult:
    if kind not in KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
    seeds = tuple(config.seeds if seeds is None else seeds)
    params = config.user_counts if kind == "users_sweep" else config.helper_counts
    jobs = [(kind, config, p, s) for p in params for s in seeds]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_cell_args, jobs))
    else:
        chunks = [run_cell(*j) for j in jobs]
    return ExperimentResult(kind, [r for c in chunks for r in c])
