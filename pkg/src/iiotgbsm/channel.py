"""Channel coefficients, impulse responses and transfer functions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clusters import Environment, PathKind, arrays_from_layout, build_environment
from .config import Condition, ScenarioParams, ensure_valid
from .geometry import ArrayConfig, doppler_shift, position_at, rotate_to_local
from .propagation import PathTable, PowerLedger, los_delay, path_timing, power_ledger


class AntennaPattern:
    """Field pattern ``(F_V, F_H)`` evaluated on unit directions in the array frame.

    ``field`` maps local unit directions ``(..., 3)`` to a pair of complex arrays.
    The default is an isotropic, purely vertical element.
    """

    def __init__(self, field: Callable | None = None):
        self.field = field

    def __call__(self, directions, azimuth: float = 0.0, elevation: float = 0.0):
        directions = np.asarray(directions, dtype=float)
        norm = np.linalg.norm(directions, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise ValueError("zero-length direction vector")
        if self.field is None:
            shape = directions.shape[:-1]
            return np.ones(shape, dtype=complex), np.zeros(shape, dtype=complex)
        local = rotate_to_local(directions / norm, azimuth, elevation)
        f_v, f_h = self.field(local)
        return np.asarray(f_v, dtype=complex), np.asarray(f_h, dtype=complex)


ISOTROPIC = AntennaPattern()


def polarization_matrix(kind, phases, xpr=0.0) -> np.ndarray:
    """2x2 polarization matrix; ``phases`` is Phi for LOS, (VV, VH, HV, HH) otherwise.

    Vectorizes over leading axes of ``phases`` / ``xpr``.
    """
    kind = PathKind(kind)
    if kind is PathKind.LOS:
        e = np.exp(1j * np.asarray(phases, dtype=float))
        zero = np.zeros_like(e)
        return np.stack([np.stack([e, zero], -1), np.stack([zero, -e], -1)], -2)
    phases = np.asarray(phases, dtype=float)
    xpr = np.asarray(xpr, dtype=float)
    if np.any(xpr < 0):
        raise ValueError("xpr must be >= 0")
    e = np.exp(1j * phases)
    root = np.sqrt(xpr)
    return np.stack([
        np.stack([e[..., 0], root * e[..., 1]], -1),
        np.stack([root * e[..., 2], e[..., 3]], -1),
    ], -2)


def path_coefficient(f_tx, m_pol, f_rx, power, doppler, t):
    """``[F^T]^T M [F^R] sqrt(P) exp(-j 2 pi f_D t)`` for one or many paths.

    ``f_tx``/``f_rx`` are ``(F_V, F_H)`` pairs, ``m_pol`` has shape ``(..., 2, 2)``.
    """
    if np.any(np.asarray(power) < 0):
        raise ValueError("power must be >= 0")
    ft = np.stack(np.broadcast_arrays(*f_tx), -1)
    fr = np.stack(np.broadcast_arrays(*f_rx), -1)
    gain = np.einsum("...i,...ij,...j->...", ft, m_pol, fr)
    return gain * np.sqrt(power) * np.exp(-2j * np.pi * np.asarray(doppler) * np.asarray(t))


@dataclass
class ChannelRealization:
    """Path coefficients and delays on a time grid.

    ``coefficients`` and ``delays`` have shape ``(T, Q, P, L)`` with receive
    element q and transmit element p; the LOS path, when present, is index 0.
    Paths of clusters invisible to (q, p) have coefficient exactly zero.
    """

    times: np.ndarray
    coefficients: np.ndarray
    delays: np.ndarray
    kinds: np.ndarray  # (L,) PathKind values as str
    cluster: np.ndarray  # (L,) cluster index, -1 for LOS
    visible: np.ndarray  # (Q, P, L)
    powers: np.ndarray  # (T, L) path powers including the Rician weighting
    f_c: float
    ledger: PowerLedger | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.coefficients.shape

    def mask(self, kind=None, cluster=None) -> np.ndarray:
        m = np.ones(self.kinds.shape, dtype=bool)
        if kind is not None:
            m &= self.kinds == PathKind(kind).value
        if cluster is not None:
            m &= self.cluster == cluster
        return m

    def paths(self, ti: int, q: int, p: int):
        """Visible paths of one (t, q, p) cell as ``(coefficient, delay, kind, cluster)``."""
        vis = self.visible[q, p]
        return [
            (complex(self.coefficients[ti, q, p, l]), float(self.delays[ti, q, p, l]),
             str(self.kinds[l]), int(self.cluster[l]))
            for l in np.flatnonzero(vis)
        ]

    def rows(self):
        for ti, t in enumerate(self.times):
            for q in range(self.coefficients.shape[1]):
                for p in range(self.coefficients.shape[2]):
                    for c, d, kind, cl in self.paths(ti, q, p):
                        yield (float(t), q, p, kind, cl, d, c.real, c.imag)

    def write_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "q", "p", "tag", "cluster", "delay_s", "re", "im"])
            for t, q, p, kind, cl, d, re, im in self.rows():
                writer.writerow([repr(t), q, p, kind, cl, repr(d), repr(re), repr(im)])


@dataclass
class CTF:
    times: np.ndarray
    frequencies: np.ndarray  # offsets from the carrier, Hz
    values: np.ndarray  # (T, Q, P, F)


def _rician_weights(params: ScenarioParams):
    k = params.k_linear
    return np.sqrt(1.0 / (k + 1.0))


def synthesize(env: Environment, params: ScenarioParams, tx_array: ArrayConfig, rx_array: ArrayConfig,
               times, tx_pattern: AntennaPattern = ISOTROPIC, rx_pattern: AntennaPattern = ISOTROPIC
               ) -> ChannelRealization:
    """Evaluate every LOS/SMC/DMC coefficient and delay on the time grid."""
    ensure_valid(params)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    lam = params.wavelength
    q_n, p_n = rx_array.n_elements, tx_array.n_elements
    table = PathTable.from_environment(env, p_n, q_n)

    rx_c = position_at(rx_array.center, times)
    tx_c = position_at(tx_array.center, times)
    rx_el = rx_array.positions(times)  # (T, Q, 3)
    tx_el = tx_array.positions(times)  # (T, P, 3)

    timing = path_timing(table, tx_c, rx_c, times)
    ledger = power_ledger(table, timing, params, env.sigma_tau)
    rx_b, tx_b = table.bounce_positions(times)  # (T, L, 3)

    f_r = doppler_shift(rx_b[:, None] - rx_el[:, :, None], rx_array.velocity - table.v_rx, lam)  # (T, Q, L)
    f_t = doppler_shift(tx_b[:, None] - tx_el[:, :, None], tx_array.velocity - table.v_tx, lam)  # (T, P, L)
    g_t = tx_pattern(tx_b - tx_c[:, None], tx_array.azimuth, tx_array.elevation)
    g_r = rx_pattern(rx_b - rx_c[:, None], rx_array.azimuth, rx_array.elevation)
    m_pol = polarization_matrix(PathKind.SMC, table.phases, table.xpr)  # (L, 2, 2)

    w = _rician_weights(params)
    doppler = f_r[:, :, None, :] + f_t[:, None, :, :]
    coef = w * path_coefficient(
        tuple(g[:, None, None, :] for g in g_t), m_pol, tuple(g[:, None, None, :] for g in g_r),
        ledger.p_path[:, None, None, :], doppler, times[:, None, None, None],
    )
    vis = table.vis_rx[table.cluster].T[:, None, :] & table.vis_tx[table.cluster].T[None, :, :]  # (Q, P, L)
    coef = np.where(vis, coef, 0.0)
    delays = np.broadcast_to(timing.tau[:, None, None, :], coef.shape)
    kinds = np.where(table.kind_is_dmc, PathKind.DMC.value, PathKind.SMC.value)
    cluster = table.cluster
    powers = ledger.p_path * w**2

    if params.condition is Condition.LOS:
        d_los = tx_el[:, None, :, :] - rx_el[:, :, None, :]  # (T, Q, P, 3), rx element -> tx element
        f_los = doppler_shift(d_los, rx_array.velocity - tx_array.velocity, lam)
        gt = tx_pattern(-d_los, tx_array.azimuth, tx_array.elevation)
        gr = rx_pattern(d_los, rx_array.azimuth, rx_array.elevation)
        p_los_w = ledger.p_los / (params.k_linear + 1.0)
        c_los = path_coefficient(gt, polarization_matrix(PathKind.LOS, env.los_phase), gr, p_los_w,
                                 f_los, times[:, None, None])
        tau_los = los_delay(tx_el[:, None, :, :], rx_el[:, :, None, :])
        coef = np.concatenate([c_los[..., None], coef], axis=-1)
        delays = np.concatenate([tau_los[..., None], delays], axis=-1)
        vis = np.concatenate([np.ones(vis.shape[:2] + (1,), dtype=bool), vis], axis=-1)
        kinds = np.concatenate([[PathKind.LOS.value], kinds])
        cluster = np.concatenate([[-1], cluster])
        powers = np.concatenate([np.full((len(times), 1), p_los_w), powers], axis=-1)

    return ChannelRealization(times, coef, np.ascontiguousarray(delays), kinds.astype(str), cluster, vis,
                              powers, params.f_c, ledger)


def transfer_function(realization: ChannelRealization, frequencies, mask=None) -> CTF:
    """H(t, f) = sum over paths of coefficient * exp(-j 2 pi f tau).

    ``frequencies`` are offsets from the carrier in Hz; ``mask`` optionally
    restricts the sum to a subset of paths.
    """
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    c = realization.coefficients
    d = realization.delays
    if mask is not None:
        c = c[..., mask]
        d = d[..., mask]
    phase = np.exp(-2j * np.pi * d[..., None, :] * f[:, None])  # (T, Q, P, F, L)
    values = np.sum(c[..., None, :] * phase, axis=-1)
    return CTF(realization.times, f, values)


def cir_on_grid(realization: ChannelRealization, delay_step: float, n_bins: int) -> np.ndarray:
    """Impulse response sampled on a delay grid, shape (T, Q, P, n_bins).

    Each path is placed in its nearest bin; paths beyond the grid raise.
    """
    bins = np.rint(realization.delays / delay_step).astype(int)
    if np.any(bins < 0) or np.any(bins >= n_bins):
        raise ValueError("delay grid too short for the realization")
    out = np.zeros(realization.coefficients.shape[:3] + (n_bins,), dtype=complex)
    t_i, q_i, p_i, _ = np.indices(realization.coefficients.shape)
    np.add.at(out, (t_i, q_i, p_i, bins), realization.coefficients)
    return out


@dataclass
class Scene:
    """An environment bound to its scenario and arrays; evaluates at any time."""

    params: ScenarioParams
    env: Environment
    tx_array: ArrayConfig
    rx_array: ArrayConfig
    tx_pattern: AntennaPattern = ISOTROPIC
    rx_pattern: AntennaPattern = ISOTROPIC

    @classmethod
    def draw(cls, params: ScenarioParams, rng: np.random.Generator, include_dmc: bool = True) -> "Scene":
        tx, rx = arrays_from_layout(params)
        return cls(params, build_environment(params, tx, rx, rng, include_dmc=include_dmc), tx, rx)

    def realize(self, times) -> ChannelRealization:
        return synthesize(self.env, self.params, self.tx_array, self.rx_array, times,
                          self.tx_pattern, self.rx_pattern)

    def with_params(self, params: ScenarioParams) -> "Scene":
        """Same drawn environment evaluated under different power parameters."""
        return Scene(params, self.env, self.tx_array, self.rx_array, self.tx_pattern, self.rx_pattern)
