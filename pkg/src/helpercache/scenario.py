"""Single-cell geometric scenarios.

Helpers sit on a square grid clipped to the cell disk, users are uniform on
the disk, a helper reaches every user within its range, and link rates are
spectral efficiency times bandwidth shared evenly among connected users.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .delay import coded_delays, uncoded_delays
from .model import (CodedPlacement, ConnectivityGraph, DelayMatrix, FileLibrary, Popularity,
                    ProblemInstance, UncodedPlacement)


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class CellGeometry:
    cell_radius: float = 350.0
    helper_range: float = 70.0
    grid_spacing: float = 100.0
    #: grid phase as a fraction of the spacing; 0 puts a helper at the center
    grid_offset: float = 0.0

    def __post_init__(self):
        if min(self.cell_radius, self.helper_range, self.grid_spacing) <= 0:
            raise ValueError("geometry lengths must be positive")
        if self.helper_range > self.cell_radius:
            raise ValueError("helper range exceeds the cell radius")


@dataclass(frozen=True)
class RadioConfig:
    bs_bandwidth_hz: float = 20e6
    bs_spectral_eff: float = 3.0
    helper_bandwidth_hz: float = 20e6
    helper_spectral_eff: float = 5.0

    def __post_init__(self):
        if min(self.bs_bandwidth_hz, self.bs_spectral_eff,
               self.helper_bandwidth_hz, self.helper_spectral_eff) <= 0:
            raise ValueError("radio parameters must be positive")

    @property
    def bs_capacity(self) -> float:
        return self.bs_spectral_eff * self.bs_bandwidth_hz

    @property
    def helper_capacity(self) -> float:
        return self.helper_spectral_eff * self.helper_bandwidth_hz


@dataclass(frozen=True)
class MobilityConfig:
    steps: int = 800
    step_length: float = 2.0

    def __post_init__(self):
        if self.steps < 0 or self.step_length <= 0:
            raise ValueError("mobility steps must be >= 0 and step length positive")


@dataclass(frozen=True, eq=False)
class Scenario:
    geometry: CellGeometry
    radio: RadioConfig
    helpers: np.ndarray
    users: np.ndarray
    seed: int | None = None
    helper_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        h = np.asarray(self.helpers, dtype=float).reshape(-1, 2)
        u = np.asarray(self.users, dtype=float).reshape(-1, 2)
        r2 = self.geometry.cell_radius ** 2 * (1 + 1e-12)
        if np.any((h ** 2).sum(axis=1) > r2) or np.any((u ** 2).sum(axis=1) > r2):
            raise ValueError("all positions must lie inside the cell")
        ids = np.arange(len(h)) if self.helper_ids is None else np.asarray(self.helper_ids)
        object.__setattr__(self, "helpers", h)
        object.__setattr__(self, "users", u)
        object.__setattr__(self, "helper_ids", ids)

    def with_users(self, users) -> Scenario:
        return replace(self, users=users)


# -- helper grid -----------------------------------------------------------

def grid_helpers(geometry: CellGeometry) -> np.ndarray:
    """Grid points inside the disk, ordered by row then column."""
    R, s, o = geometry.cell_radius, geometry.grid_spacing, geometry.grid_offset
    n = int(np.ceil(R / s)) + 1
    k = np.arange(-n, n + 1) + o
    xs, ys = np.meshgrid(k * s, k * s)
    pts = np.column_stack([xs.ravel(), ys.ravel()])
    inside = (pts ** 2).sum(axis=1) <= R * R * (1 + 1e-12)
    return pts[inside]


def _lattice_norms(offset: float, reach: int):
    k = np.arange(-reach, reach + 1) + offset
    q = (k[:, None] ** 2 + k[None, :] ** 2).ravel()
    norms, counts = np.unique(np.round(q, 9), return_counts=True)
    return norms, np.cumsum(counts)


def calibrate_spacing(geometry: CellGeometry, target: int) -> float:
    """Grid spacing that puts exactly ``target`` helpers in the disk.

    Counts change only when ``(R/s)**2`` crosses a lattice norm, so the
    achievable counts are the cumulative norm multiplicities; the returned
    spacing sits in the middle of the matching interval.
    """
    if target < 1:
        raise ValueError("target helper count must be >= 1")
    reach = int(np.sqrt(target)) + 4
    norms, cum = _lattice_norms(geometry.grid_offset, reach)
    # only norms well inside the enumerated square have complete counts
    ok = norms < reach ** 2 / 2
    norms, cum = norms[ok], cum[ok]
    hit = np.flatnonzero(cum == target)
    if len(hit) == 0:
        below = cum[cum < target]
        above = cum[cum > target]
        nearest = [int(below[-1])] if len(below) else []
        nearest += [int(above[0])] if len(above) else []
        raise CalibrationError(
            f"no spacing gives {target} helpers with grid offset {geometry.grid_offset}; "
            f"nearest achievable counts: {nearest}")
    k = int(hit[0])
    q_hi = norms[k + 1]
    q_mid = (norms[k] + q_hi) / 2
    return float(geometry.cell_radius / np.sqrt(q_mid))


def calibrate_grid(geometry: CellGeometry, target: int) -> CellGeometry:
    """Geometry with spacing (and, if needed, a half-cell offset) giving
    exactly ``target`` helpers."""
    errors = []
    for offset in (0.0, 0.5):
        g = replace(geometry, grid_offset=offset)
        try:
            return replace(g, grid_spacing=calibrate_spacing(g, target))
        except CalibrationError as exc:
            errors.append(str(exc))
    raise CalibrationError("; ".join(errors))


# -- users -----------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(seed: int, *stream: int) -> int:
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1, np.uint64)[0])


def sample_users(geometry: CellGeometry, n: int, seed: int) -> np.ndarray:
    """``n`` points uniform on the disk (rejection from the bounding square)."""
    if n < 1:
        raise ValueError("need at least one user")
    R = geometry.cell_radius
    rng = _rng(seed)
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform(-R, R, size=(2 * n, 2))
        cand = cand[(cand ** 2).sum(axis=1) <= R * R]
        out = np.vstack([out, cand])
    return out[:n]


def make_scenario(geometry: CellGeometry, radio: RadioConfig, n_users: int, seed: int
                  ) -> Scenario:
    return Scenario(geometry, radio, grid_helpers(geometry),
                    sample_users(geometry, n_users, seed), seed)


# -- instance --------------------------------------------------------------

def compile_scenario(scenario: Scenario, library: FileLibrary, popularity: Popularity,
                     M: int) -> tuple[ProblemInstance, np.ndarray]:
    """Instance plus the scenario helper id behind each instance helper.

    Helpers without users are left out; so are helpers whose per-user rate
    would fall below the base station's (with a warning).
    """
    geom, radio = scenario.geometry, scenario.radio
    U = len(scenario.users)
    d2 = ((scenario.helpers[:, None, :] - scenario.users[None, :, :]) ** 2).sum(axis=2)
    adj = d2 <= geom.helper_range ** 2
    degree = adj.sum(axis=1)
    r0 = radio.bs_capacity / U
    rate = np.where(degree > 0, radio.helper_capacity / np.maximum(degree, 1), 0.0)
    slow = (degree > 0) & (rate < r0)
    if slow.any():
        warnings.warn(f"dropping {int(slow.sum())} helper(s) whose rate is below the base "
                      f"station's: ids {scenario.helper_ids[slow].tolist()}", stacklevel=2)
    keep = (degree > 0) & ~slow
    graph = ConnectivityGraph(adj[keep])
    helper_delay = np.repeat((1.0 / rate[keep])[:, None], U, axis=1)
    delays = DelayMatrix.from_links(graph, bs_delay=np.full(U, 1.0 / r0),
                                    helper_delay=helper_delay)
    inst = ProblemInstance(library, popularity, graph, delays, M)
    return inst, scenario.helper_ids[keep]


def build_instance(scenario: Scenario, library: FileLibrary, popularity: Popularity,
                   M: int) -> ProblemInstance:
    return compile_scenario(scenario, library, popularity, M)[0]


def average_download_rate(instance: ProblemInstance, placement=None) -> float:
    """Mean over users of the reciprocal expected per-bit delay (bits/s).

    ``placement=None`` gives the base-station-only baseline.
    """
    if placement is None:
        delays = instance.omega_bs
    elif isinstance(placement, CodedPlacement):
        delays = coded_delays(instance, placement)
    else:
        delays = uncoded_delays(instance, placement)
    return float(np.mean(1.0 / delays))


# -- mobility --------------------------------------------------------------

_DIRECTIONS = np.array([[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]])


def random_walk(scenario: Scenario, mobility: MobilityConfig, seed: int) -> np.ndarray:
    """Move every user ``steps`` times by ``step_length`` north/south/east/west.

    A move that would leave the cell is skipped; the user stays put.
    """
    R2 = scenario.geometry.cell_radius ** 2
    pos = scenario.users.copy()
    rng = _rng(seed)
    for _ in range(mobility.steps):
        step = _DIRECTIONS[rng.integers(0, 4, size=len(pos))] * mobility.step_length
        cand = pos + step
        inside = (cand ** 2).sum(axis=1) <= R2
        pos = np.where(inside[:, None], cand, pos)
    return pos


def remap_placement(placement: UncodedPlacement, from_ids, to_ids) -> UncodedPlacement:
    """Carry a placement across instances built from the same helper grid."""
    x = placement.x
    col = {int(h): j for j, h in enumerate(from_ids)}
    out = np.zeros((x.shape[0], len(to_ids)), dtype=bool)
    for j, h in enumerate(to_ids):
        if int(h) in col:
            out[:, j] = x[:, col[int(h)]]
    return UncodedPlacement(out)
