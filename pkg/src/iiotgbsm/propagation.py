"""Delay and power laws for the LOS, SMC and DMC paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import EtaReference, ScenarioParams
from .geometry import SPEED_OF_LIGHT


class UndefinedPowerError(ValueError):
    """DMC total power has no finite nonnegative solution."""


# --- delays ----------------------------------------------------------------

def draw_sigma_tau(params: ScenarioParams, rng: np.random.Generator, size=None):
    """Log-normal RMS delay spread in seconds."""
    return 10.0 ** rng.normal(params.mean_log_ds, params.std_log_ds, size=size)


def los_delay(tx_pos, rx_pos):
    d = np.linalg.norm(np.asarray(rx_pos, dtype=float) - np.asarray(tx_pos, dtype=float), axis=-1)
    if np.any(d == 0):
        raise ValueError("LOS endpoints coincide")
    return d / SPEED_OF_LIGHT


def virtual_delay(r_tau: float, sigma_tau: float, mu):
    mu = np.asarray(mu, dtype=float)
    if np.any((mu <= 0) | (mu > 1)):
        raise ValueError("mu must lie in (0, 1)")
    return -r_tau * sigma_tau * np.log(mu)


def bounce_delay(rx_bounce, tx_bounce, rx_center, tx_center):
    """Geometric part of a cluster path: (|D^R| + |D^T|) / c."""
    d_r = np.linalg.norm(np.asarray(rx_bounce) - np.asarray(rx_center), axis=-1)
    d_t = np.linalg.norm(np.asarray(tx_bounce) - np.asarray(tx_center), axis=-1)
    return (d_r + d_t) / SPEED_OF_LIGHT


def smc_delay(cluster, scatterer, tx_center, rx_center, t: float = 0.0) -> float:
    """Delay of one SMC at time ``t`` (bounce points advanced by cluster velocity)."""
    rx_b = scatterer.rx_position + cluster.last_bounce.v * t
    tx_b = scatterer.tx_position + cluster.first_bounce.v * t
    return float(bounce_delay(rx_b, tx_b, rx_center, tx_center) + cluster.virtual_delay + scatterer.rel_delay)


def dmc_additional_delay(xi, params: ScenarioParams):
    return np.asarray(xi, dtype=float) * params.s_dmc_tau * params.beta_dmc


def dmc_delay(smc_base_delay, xi, params: ScenarioParams):
    xi = np.asarray(xi, dtype=float)
    if np.any((xi < 0) | (xi >= 1)):
        raise ValueError("xi must lie in [0, 1)")
    return smc_base_delay + dmc_additional_delay(xi, params)


# --- powers ----------------------------------------------------------------

def smc_power_raw(tau_smc, r_tau: float, sigma_tau: float, z_n_db):
    return np.exp(-np.asarray(tau_smc) * (r_tau - 1) / (r_tau * sigma_tau)) * 10.0 ** (-np.asarray(z_n_db) / 10.0)


def normalize_smc(raw):
    """Scale raw SMC powers (last axis = all SMCs of all clusters) to unit sum."""
    raw = np.asarray(raw, dtype=float)
    total = raw.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("no positive SMC power to normalize")
    return raw / total


def dmc_power_raw(strongest_smc_power, tau_dmc, tau_smc_base, params: ScenarioParams):
    excess = np.asarray(tau_dmc, dtype=float) - np.asarray(tau_smc_base, dtype=float)
    if np.any(excess < 0):
        raise ValueError("DMC delay precedes its SMC reference delay")
    p_off = 10.0 ** (-params.p_off_db / 10.0)
    return np.asarray(strongest_smc_power) * p_off * np.exp(-excess / params.beta_dmc)


def dmc_total_power(k_linear: float, eta_dmc: float) -> float:
    """Total DMC power relative to unit SMC power for a DMC share of the total power."""
    g = (k_linear + 1.0) * eta_dmc
    if not g < 1:
        raise UndefinedPowerError(f"eta*(K+1) = {g:.6g} >= 1; DMC power undefined")
    return g / (1.0 - g)


def dmc_total_for(params: ScenarioParams) -> float:
    if params.eta_reference is EtaReference.NLOS:
        return dmc_total_power(0.0, params.eta_dmc)
    return dmc_total_power(params.k_linear, params.eta_dmc)


def normalize_dmc(raw, dmc_cluster, p_n_smc, p_dmc_total: float):
    """Per-cluster DMC powers summing to ``p_dmc_total * P_n^SMC`` in cluster n.

    ``raw`` has shape ``(..., n_dmc)``, ``dmc_cluster`` the cluster index of each
    DMC and ``p_n_smc`` shape ``(..., n_clusters)``. Clusters without DMCs drop
    out and the rest are rescaled so the global sum stays ``p_dmc_total``.
    """
    raw = np.asarray(raw, dtype=float)
    dmc_cluster = np.asarray(dmc_cluster, dtype=int)
    p_n_smc = np.asarray(p_n_smc, dtype=float)
    if raw.shape[-1] == 0:
        return raw.copy()
    n_clusters = p_n_smc.shape[-1]
    onehot = np.zeros((raw.shape[-1], n_clusters))
    onehot[np.arange(raw.shape[-1]), dmc_cluster] = 1.0
    cluster_sum = raw @ onehot
    has_dmc = onehot.sum(axis=0) > 0
    if np.any(cluster_sum[..., has_dmc] <= 0):
        raise ValueError("zero raw DMC power in a cluster with DMCs")
    covered = np.sum(p_n_smc * has_dmc, axis=-1, keepdims=True)
    share = raw / np.take(cluster_sum, dmc_cluster, axis=-1)
    return p_dmc_total * np.take(p_n_smc, dmc_cluster, axis=-1) / covered * share


def los_power(k_linear: float, p_dmc_total: float, p_smc_total: float = 1.0) -> float:
    if k_linear < 0:
        raise ValueError("K must be >= 0")
    return k_linear * (p_smc_total + p_dmc_total)


# --- vectorized evaluation over an environment -------------------------------

@dataclass
class PathTable:
    """Flattened NLOS paths of one environment: all SMCs first, then all DMCs,
    each grouped by cluster."""

    kind_is_dmc: np.ndarray  # (L,) bool
    cluster: np.ndarray  # (L,) int
    rx0: np.ndarray  # (L, 3)
    tx0: np.ndarray  # (L, 3)
    v_rx: np.ndarray  # (L, 3) last-bounce velocity
    v_tx: np.ndarray  # (L, 3) first-bounce velocity
    const_delay: np.ndarray  # (L,) virtual + intra-cluster + additional delay
    add_delay: np.ndarray  # (L,)
    phases: np.ndarray  # (L, 4)
    xpr: np.ndarray  # (L,)
    shadowing_db: np.ndarray  # (N,)
    smc_starts: np.ndarray  # start index of every cluster's SMC block
    vis_tx: np.ndarray  # (N, P) bool
    vis_rx: np.ndarray  # (N, Q) bool

    @property
    def n_smc(self) -> int:
        return int(np.count_nonzero(~self.kind_is_dmc))

    @classmethod
    def from_environment(cls, env, n_tx: int, n_rx: int) -> "PathTable":
        rows = []
        starts = []
        for c in env.clusters:
            starts.append(len(rows))
            rows.extend((False, c, s) for s in c.smcs)
        for c in env.clusters:
            rows.extend((True, c, s) for s in c.dmcs)
        n = len(env.clusters)
        vis_tx = np.zeros((n, n_tx), dtype=bool)
        vis_rx = np.zeros((n, n_rx), dtype=bool)
        for i, c in enumerate(env.clusters):
            vis_tx[i, sorted(c.visible_tx)] = True
            vis_rx[i, sorted(c.visible_rx)] = True
        index = {id(c): i for i, c in enumerate(env.clusters)}
        return cls(
            kind_is_dmc=np.array([r[0] for r in rows], dtype=bool),
            cluster=np.array([index[id(r[1])] for r in rows], dtype=int),
            rx0=np.array([r[2].rx_position for r in rows], dtype=float).reshape(-1, 3),
            tx0=np.array([r[2].tx_position for r in rows], dtype=float).reshape(-1, 3),
            v_rx=np.array([r[1].last_bounce.v for r in rows], dtype=float).reshape(-1, 3),
            v_tx=np.array([r[1].first_bounce.v for r in rows], dtype=float).reshape(-1, 3),
            const_delay=np.array([r[1].virtual_delay + r[2].rel_delay + r[2].add_delay for r in rows]),
            add_delay=np.array([r[2].add_delay for r in rows]),
            phases=np.array([r[2].phases for r in rows], dtype=float).reshape(-1, 4),
            xpr=np.array([r[2].xpr for r in rows]),
            shadowing_db=np.array([c.shadowing_db for c in env.clusters]),
            smc_starts=np.array(starts, dtype=int),
            vis_tx=vis_tx,
            vis_rx=vis_rx,
        )

    def bounce_positions(self, t):
        t = np.asarray(t, dtype=float)[:, None, None]
        return self.rx0 + self.v_rx * t, self.tx0 + self.v_tx * t


@dataclass
class PathTiming:
    tau_los: np.ndarray  # (T,) between array centers
    tau: np.ndarray  # (T, L) NLOS path delays
    base: np.ndarray  # (T, L) delays without the DMC additional delay


@dataclass
class PowerLedger:
    p_los: float
    p_path: np.ndarray  # (T, L) normalized SMC / DMC powers
    is_dmc: np.ndarray  # (L,) bool
    p_dmc_total: float
    raw_dmc: np.ndarray  # (T, n_dmc) un-normalized DMC powers
    k_linear: float

    @property
    def realized_eta(self) -> np.ndarray:
        """DMC share of the total power after the Rician weighting."""
        k = self.k_linear
        dmc = self.p_path[:, self.is_dmc].sum(axis=-1) / (k + 1)
        total = self.p_los / (k + 1) + self.p_path.sum(axis=-1) / (k + 1)
        return dmc / total

    @property
    def realized_k(self) -> np.ndarray:
        return self.p_los / self.p_path.sum(axis=-1)


def path_timing(table: PathTable, tx_center, rx_center, times) -> PathTiming:
    """Delays at every time; ``tx_center``/``rx_center`` have shape (T, 3)."""
    rx_b, tx_b = table.bounce_positions(times)
    geo = bounce_delay(rx_b, tx_b, rx_center[:, None, :], tx_center[:, None, :])
    tau = geo + table.const_delay
    return PathTiming(los_delay(tx_center, rx_center), tau, tau - table.add_delay)


def power_ledger(table: PathTable, timing: PathTiming, params: ScenarioParams, sigma_tau: float) -> PowerLedger:
    """Normalized path powers at every time step."""
    smc = ~table.kind_is_dmc
    tau_s = timing.tau[:, smc]
    z = table.shadowing_db[table.cluster[smc]]
    p_s = normalize_smc(smc_power_raw(tau_s, params.r_tau, sigma_tau, z))
    p_n = np.add.reduceat(p_s, table.smc_starts, axis=-1)
    strongest = np.maximum.reduceat(p_s, table.smc_starts, axis=-1)

    p_dmc_total = dmc_total_for(params)
    dmc = table.kind_is_dmc
    dmc_cluster = table.cluster[dmc]
    excess = np.broadcast_to(table.add_delay[dmc], timing.tau[:, dmc].shape)
    # the per-cluster factor (strongest SMC x power offset) cancels on
    # normalization; normalizing only the delay weights keeps the result
    # bitwise independent of it
    weights = np.exp(-excess / params.beta_dmc)
    p_m = normalize_dmc(weights, dmc_cluster, p_n, p_dmc_total)
    raw = dmc_power_raw(strongest[:, dmc_cluster], timing.tau[:, dmc], timing.base[:, dmc], params)

    p_path = np.empty_like(timing.tau)
    p_path[:, smc] = p_s
    p_path[:, dmc] = p_m
    return PowerLedger(los_power(params.k_linear, p_dmc_total), p_path, dmc, p_dmc_total, raw, params.k_linear)
