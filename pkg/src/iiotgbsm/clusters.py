"""Random cluster environment: counts, twin-bounce placement, offsets, visibility."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import propagation
from .config import ScenarioParams, ensure_valid
from .geometry import ArrayConfig, Trajectory, angles_of, unit_from_angles


class PathKind(str, Enum):
    LOS = "LOS"
    SMC = "SMC"
    DMC = "DMC"


@dataclass
class Scatterer:
    kind: PathKind
    azi_offset_rx: float
    ele_offset_rx: float
    azi_offset_tx: float
    ele_offset_tx: float
    rel_delay: float
    add_delay: float
    phases: tuple[float, float, float, float]  # VV, VH, HV, HH
    xpr: float
    rx_position: np.ndarray  # last-bounce point at t = 0
    tx_position: np.ndarray  # first-bounce point at t = 0
    power: float = float("nan")


@dataclass
class ClusterRealization:
    id: int
    first_bounce: Trajectory
    last_bounce: Trajectory
    virtual_delay: float
    shadowing_db: float
    smcs: list[Scatterer]
    dmcs: list[Scatterer]
    visible_tx: frozenset[int]
    visible_rx: frozenset[int]

    def __post_init__(self):
        if self.virtual_delay < 0:
            raise ValueError("virtual delay must be >= 0")
        if not self.smcs:
            raise ValueError("a cluster needs at least one SMC")


@dataclass
class Environment:
    """One drawn scattering environment plus its per-realization constants."""

    clusters: list[ClusterRealization]
    sigma_tau: float
    los_phase: float
    tx_center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rx_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __iter__(self):
        return iter(self.clusters)

    def __len__(self):
        return len(self.clusters)


def wrap_angle(x):
    """Wrap into (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    y = np.pi - np.mod(np.pi - x, 2 * np.pi)
    # values already in range pass through untouched (no rounding)
    return np.where((x > -np.pi) & (x <= np.pi), x, y)


def draw_counts(params: ScenarioParams, rng: np.random.Generator, clamp: bool = True):
    """Number of clusters and per-cluster SMC/DMC counts.

    SMC counts are clamped to at least one so every cluster has a strongest SMC.
    """
    n = params.n_clusters
    s = rng.poisson(params.lambda_smc, size=n)
    m = rng.poisson(params.lambda_dmc, size=n)
    if clamp:
        s = np.maximum(s, 1)
    return n, s, m


def draw_cluster_angles(params: ScenarioParams, rng: np.random.Generator, means, size: int | None = None) -> np.ndarray:
    """Wrapped-Gaussian cluster angles ``(rx azimuth, rx elevation, tx azimuth, tx elevation)``.

    ``means`` holds the four mean angles in radians; the result has shape ``(size, 4)``.
    """
    size = params.n_clusters if size is None else size
    std = np.deg2rad(np.asarray(params.angle_std, dtype=float))
    draws = rng.normal(np.asarray(means, dtype=float), std, size=(size, 4))
    return wrap_angle(draws)


def place_cluster(angles, d_rx: float, d_tx: float, rx_center, tx_center):
    """First- and last-bounce positions for the drawn angles and distances."""
    if not (d_rx > 0 and d_tx > 0):
        raise ValueError("cluster distances must be > 0")
    angles = np.asarray(angles, dtype=float)
    last = np.asarray(rx_center, dtype=float) + d_rx * unit_from_angles(angles[..., 0], angles[..., 1])
    first = np.asarray(tx_center, dtype=float) + d_tx * unit_from_angles(angles[..., 2], angles[..., 3])
    return first, last


def draw_offsets(kind: PathKind, params: ScenarioParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Zero-mean Laplace offsets (radians) for rx azimuth/elevation and tx azimuth/elevation."""
    kind = PathKind(kind)
    std_deg = params.smc_offset_std_deg if kind is PathKind.SMC else params.dmc_offset_std_deg
    scale = np.deg2rad(std_deg) / np.sqrt(2.0)
    shape = (4,) if size is None else (size, 4)
    return rng.laplace(0.0, scale, size=shape)


def visibility_probability(delta, params: ScenarioParams):
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("antenna spacing must be >= 0")
    return np.exp(-params.lambda_r * delta * params.wavelength / params.d_c_s)


def _survival_chain(n: int, p: float, rng: np.random.Generator) -> frozenset[int]:
    if n == 1:
        return frozenset({0})
    steps = rng.random(n - 1) < p
    alive = np.concatenate([[True], np.logical_and.accumulate(steps)])
    return frozenset(int(i) for i in np.flatnonzero(alive))


def assign_visibility(tx_array: ArrayConfig, rx_array: ArrayConfig, params: ScenarioParams, rng: np.random.Generator):
    """Visible element sets (tx, rx) grown from element 0 along each array."""
    p_tx = float(visibility_probability(tx_array.spacing, params))
    p_rx = float(visibility_probability(rx_array.spacing, params))
    return _survival_chain(tx_array.n_elements, p_tx, rng), _survival_chain(rx_array.n_elements, p_rx, rng)


def arrays_from_layout(params: ScenarioParams) -> tuple[ArrayConfig, ArrayConfig]:
    lay = params.layout
    spacing = params.element_spacing
    tx = ArrayConfig(Trajectory(lay.tx_position, lay.tx_velocity), lay.n_tx, spacing,
                     np.deg2rad(lay.tx_array_azimuth_deg), np.deg2rad(lay.tx_array_elevation_deg))
    rx = ArrayConfig(Trajectory(lay.rx_position, lay.rx_velocity), lay.n_rx, spacing,
                     np.deg2rad(lay.rx_array_azimuth_deg), np.deg2rad(lay.rx_array_elevation_deg))
    return tx, rx


def _scatterers(kind, offsets, rel_delays, add_delays, phases, xprs, base_angles, d_rx, d_tx, rx_center, tx_center):
    angles = base_angles + offsets
    tx_pos, rx_pos = place_cluster(angles, d_rx, d_tx, rx_center, tx_center)
    return [
        Scatterer(kind, *map(float, offsets[i]), float(rel_delays[i]), float(add_delays[i]),
                  tuple(map(float, phases[i])), float(xprs[i]), rx_pos[i], tx_pos[i])
        for i in range(len(offsets))
    ]


def build_environment(params: ScenarioParams, tx_array: ArrayConfig, rx_array: ArrayConfig,
                      rng: np.random.Generator, include_dmc: bool = True) -> Environment:
    """Draw a complete cluster environment.

    DMC scatterers are offset (with the wider DMC spread) around the same
    cluster angles as the SMCs, so they sit near them. Each DMC inherits the
    intra-cluster delay of its cluster's earliest (hence strongest) SMC and adds
    ``xi * s_dmc_tau * beta_dmc`` on top.
    """
    ensure_valid(params)
    lay = params.layout
    tx_c = tx_array.center.p0
    rx_c = rx_array.center.p0

    sigma_tau = float(propagation.draw_sigma_tau(params, rng))
    los_phase = float(rng.uniform(0.0, 2 * np.pi))
    n, s_counts, m_counts = draw_counts(params, rng)
    if not include_dmc:
        m_counts = np.zeros_like(m_counts)

    rx_az, rx_el = angles_of(tx_c - rx_c)
    tx_az, tx_el = angles_of(rx_c - tx_c)
    cluster_angles = draw_cluster_angles(params, rng, (rx_az, rx_el, tx_az, tx_el), size=n)
    d_rx = rng.uniform(lay.cluster_distance_min, lay.cluster_distance_max, size=n)
    d_tx = rng.uniform(lay.cluster_distance_min, lay.cluster_distance_max, size=n)
    vel_dirs = rng.uniform(-np.pi, np.pi, size=(n, 2))
    shadowing = rng.normal(0.0, params.sigma_cluster_db, size=n)
    mu = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=n)

    clusters = []
    for i in range(n):
        s, m = int(s_counts[i]), int(m_counts[i])
        smc_off = draw_offsets(PathKind.SMC, params, rng, s)
        smc_rel = rng.exponential(params.mean_intra_delay, size=s) if params.mean_intra_delay > 0 else np.zeros(s)
        smc_ph = rng.uniform(0.0, 2 * np.pi, size=(s, 4))
        smc_xpr = _draw_xpr(params, rng, s)
        dmc_off = draw_offsets(PathKind.DMC, params, rng, m)
        xi = rng.random(m)
        dmc_ph = rng.uniform(0.0, 2 * np.pi, size=(m, 4))
        dmc_xpr = _draw_xpr(params, rng, m)
        vis_tx, vis_rx = assign_visibility(tx_array, rx_array, params, rng)

        anchor = float(smc_rel.min())
        add = propagation.dmc_additional_delay(xi, params)
        smcs = _scatterers(PathKind.SMC, smc_off, smc_rel, np.zeros(s), smc_ph, smc_xpr,
                           cluster_angles[i], d_rx[i], d_tx[i], rx_c, tx_c)
        dmcs = _scatterers(PathKind.DMC, dmc_off, np.full(m, anchor), add, dmc_ph, dmc_xpr,
                           cluster_angles[i], d_rx[i], d_tx[i], rx_c, tx_c)
        first, last = place_cluster(cluster_angles[i], d_rx[i], d_tx[i], rx_c, tx_c)
        speed = lay.cluster_speed
        v_first = speed * unit_from_angles(vel_dirs[i, 0], 0.0)
        v_last = speed * unit_from_angles(vel_dirs[i, 1], 0.0)
        clusters.append(ClusterRealization(
            id=i,
            first_bounce=Trajectory(first, v_first),
            last_bounce=Trajectory(last, v_last),
            virtual_delay=float(propagation.virtual_delay(params.r_tau, sigma_tau, mu[i])),
            shadowing_db=float(shadowing[i]),
            smcs=smcs,
            dmcs=dmcs,
            visible_tx=vis_tx,
            visible_rx=vis_rx,
        ))
    return Environment(clusters, sigma_tau, los_phase, np.array(tx_c, dtype=float), np.array(rx_c, dtype=float))


def _draw_xpr(params: ScenarioParams, rng: np.random.Generator, size: int) -> np.ndarray:
    # kappa scales the cross-polar entries, so it is the inverse of the XPR
    xpr_db = rng.normal(params.layout.xpr_mean_db, params.layout.xpr_std_db, size=size)
    return 10.0 ** (-xpr_db / 10.0)


# --- snapshots -------------------------------------------------------------

def _scatterer_to_dict(s: Scatterer) -> dict:
    return {
        "kind": s.kind.value,
        "offsets": [s.azi_offset_rx, s.ele_offset_rx, s.azi_offset_tx, s.ele_offset_tx],
        "rel_delay": s.rel_delay,
        "add_delay": s.add_delay,
        "phases": list(s.phases),
        "xpr": s.xpr,
        "rx_position": s.rx_position.tolist(),
        "tx_position": s.tx_position.tolist(),
    }


def _scatterer_from_dict(d: dict) -> Scatterer:
    return Scatterer(PathKind(d["kind"]), *d["offsets"], d["rel_delay"], d["add_delay"], tuple(d["phases"]),
                     d["xpr"], np.array(d["rx_position"]), np.array(d["tx_position"]))


def environment_to_dict(env: Environment) -> dict:
    return {
        "sigma_tau": env.sigma_tau,
        "los_phase": env.los_phase,
        "tx_center": env.tx_center.tolist(),
        "rx_center": env.rx_center.tolist(),
        "clusters": [
            {
                "id": c.id,
                "first_bounce": {"p0": c.first_bounce.p0.tolist(), "v": c.first_bounce.v.tolist()},
                "last_bounce": {"p0": c.last_bounce.p0.tolist(), "v": c.last_bounce.v.tolist()},
                "virtual_delay": c.virtual_delay,
                "shadowing_db": c.shadowing_db,
                "visible_tx": sorted(c.visible_tx),
                "visible_rx": sorted(c.visible_rx),
                "smcs": [_scatterer_to_dict(s) for s in c.smcs],
                "dmcs": [_scatterer_to_dict(s) for s in c.dmcs],
            }
            for c in env.clusters
        ],
    }


def environment_from_dict(data: dict) -> Environment:
    clusters = [
        ClusterRealization(
            id=c["id"],
            first_bounce=Trajectory(c["first_bounce"]["p0"], c["first_bounce"]["v"]),
            last_bounce=Trajectory(c["last_bounce"]["p0"], c["last_bounce"]["v"]),
            virtual_delay=c["virtual_delay"],
            shadowing_db=c["shadowing_db"],
            smcs=[_scatterer_from_dict(s) for s in c["smcs"]],
            dmcs=[_scatterer_from_dict(s) for s in c["dmcs"]],
            visible_tx=frozenset(c["visible_tx"]),
            visible_rx=frozenset(c["visible_rx"]),
        )
        for c in data["clusters"]
    ]
    return Environment(clusters, data["sigma_tau"], data["los_phase"],
                       np.array(data["tx_center"]), np.array(data["rx_center"]))


def dump_environment(env: Environment, path: str | Path) -> None:
    Path(path).write_text(json.dumps(environment_to_dict(env), indent=1))


def load_environment(path: str | Path) -> Environment:
    return environment_from_dict(json.loads(Path(path).read_text()))
